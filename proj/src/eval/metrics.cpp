#include "cmls/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <stdexcept>

namespace cmls::eval {

EvalReport nrmse_window(const std::vector<SeriesSet>& pred, const std::vector<SeriesSet>& gt, std::size_t t_begin,
                        std::size_t t_end)
{
    if (pred.size() != gt.size())
        throw std::invalid_argument("nrmse: " + std::to_string(pred.size()) + " predicted samples vs " +
                                    std::to_string(gt.size()) + " ground-truth samples");
    if (pred.empty()) throw std::invalid_argument("nrmse: no samples");
    if (t_end <= t_begin)
        throw std::invalid_argument("nrmse: empty window [" + std::to_string(t_begin) + ", " + std::to_string(t_end) + ")");

    EvalReport r;
    r.n_test = pred.size();
    r.n_var = pred[0].size();
    r.t_begin = t_begin;
    r.t_end = t_end;
    r.th = t_begin;
    r.n_t = t_end;
    for (std::size_t t = t_begin; t < t_end; ++t) r.timesteps.push_back(t);
    r.curve.assign(t_end - t_begin, 0.0);
    r.curve_count.assign(t_end - t_begin, 0);
    r.per_sample.assign(pred.size(), 0.0);
    std::map<std::string, std::size_t> var_count;
    std::vector<std::size_t> sample_count(pred.size(), 0);
    double total = 0.0;
    std::size_t used = 0;

    for (std::size_t n = 0; n < pred.size(); ++n) {
        if (pred[n].size() != r.n_var) throw std::invalid_argument("nrmse: samples carry different variable counts");
        for (const auto& p : pred[n]) {
            const FieldSeries& g = find_series(gt[n], p.name);
            if (p.extents != g.extents)
                throw std::invalid_argument("nrmse: '" + p.name + "' extents " + extents_str(p.extents) + " vs " +
                                            extents_str(g.extents));
            if (p.steps < t_end || g.steps < t_end)
                throw std::invalid_argument("nrmse: '" + p.name + "' has " + std::to_string(std::min(p.steps, g.steps)) +
                                            " frames, window ends at " + std::to_string(t_end));
            for (std::size_t t = t_begin; t < t_end; ++t) {
                const auto a = p.frame(t), b = g.frame(t);
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const double e = double(a[i]) - double(b[i]);
                    num += e * e;
                    den += double(b[i]) * double(b[i]);
                }
                TermRow row{n, p.name, t, 0.0, false};
                if (den == 0.0) {
                    row.excluded = true;
                    ++r.excluded;
                    std::cerr << "warning: zero ground-truth norm for sample " << n << " '" << p.name << "' t=" << t
                              << "; term excluded\n";
                }
                else {
                    row.value = std::sqrt(num) / std::sqrt(den);
                    total += row.value;
                    ++used;
                    r.curve[t - t_begin] += row.value;
                    ++r.curve_count[t - t_begin];
                    r.per_variable[p.name] += row.value;
                    ++var_count[p.name];
                    r.per_sample[n] += row.value;
                    ++sample_count[n];
                }
                r.rows.push_back(row);
            }
        }
    }
    if (used == 0) throw std::domain_error("nrmse: every term has a zero ground-truth norm");
    r.aggregate = total / double(used);
    for (std::size_t i = 0; i < r.curve.size(); ++i)
        r.curve[i] = r.curve_count[i] ? r.curve[i] / double(r.curve_count[i]) : std::nan("");
    for (auto& [k, v] : r.per_variable) v /= double(var_count[k]);
    for (std::size_t n = 0; n < r.per_sample.size(); ++n)
        r.per_sample[n] = sample_count[n] ? r.per_sample[n] / double(sample_count[n]) : std::nan("");
    return r;
}

EvalReport nrmse(const std::vector<SeriesSet>& pred, const std::vector<SeriesSet>& gt, std::size_t th)
{
    if (gt.empty()) throw std::invalid_argument("nrmse: no samples");
    const std::size_t nt = gt[0].at(0).steps;
    if (nt <= th) throw std::invalid_argument("nrmse: N_t must exceed th");
    return nrmse_window(pred, gt, th, nt);
}

std::vector<SeriesSet> persistence_prediction(const std::vector<SeriesSet>& gt, std::size_t hold,
                                              const std::vector<std::string>& variables)
{
    std::vector<SeriesSet> out;
    for (const auto& sample : gt) {
        SeriesSet set;
        for (const auto& name : variables) {
            FieldSeries s = find_series(sample, name);
            if (hold >= s.steps) throw std::invalid_argument("persistence: hold frame beyond the series");
            const auto src = s.field(hold);
            for (std::size_t t = hold + 1; t < s.steps; ++t) s.set_frame(t, src);
            set.push_back(std::move(s));
        }
        out.push_back(std::move(set));
    }
    return out;
}

EvalReport persistence_baseline(const std::vector<SeriesSet>& gt, std::size_t th, const std::vector<std::string>& variables)
{
    if (th == 0) throw std::invalid_argument("persistence: th must be >= 1");
    return nrmse(persistence_prediction(gt, th - 1, variables), gt, th);
}

std::vector<double> melt_pool_depth(const FieldSeries& T, double t_melt, double dz)
{
    if (T.extents.size() != 3) throw std::invalid_argument("melt-pool depth needs a 3-D temperature series");
    const std::size_t nx = T.extents[0], ny = T.extents[1], nz = T.extents[2];
    std::vector<double> out;
    for (std::size_t t = 0; t < T.steps; ++t) {
        const auto f = T.frame(t);
        std::size_t layers = 0;
        for (std::size_t k = nz; k-- > 0;) {
            bool hot = false;
            for (std::size_t i = 0; i < nx && !hot; ++i)
                for (std::size_t j = 0; j < ny && !hot; ++j) hot = double(f[(i * ny + j) * nz + k]) > t_melt;
            if (!hot) break;
            ++layers;
        }
        out.push_back(double(layers) * dz);
    }
    return out;
}

void write_rows_csv(const std::filesystem::path& path, const EvalReport& r, double baseline)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(10);
    os << "sample,variable,timestep,nrmse,excluded\n";
    for (const auto& row : r.rows)
        os << row.sample << "," << row.variable << "," << row.timestep << "," << row.value << "," << (row.excluded ? 1 : 0)
           << "\n";
    os << "# aggregate," << r.aggregate << "\n";
    if (!std::isnan(baseline)) os << "# baseline," << baseline << "\n";
}

void write_curve_csv(const std::filesystem::path& path, const EvalReport& r, const EvalReport* baseline)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(10);
    os << "timestep,nrmse" << (baseline ? ",baseline" : "") << "\n";
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
        os << r.timesteps[i] << "," << r.curve[i];
        if (baseline && i < baseline->curve.size()) os << "," << baseline->curve[i];
        os << "\n";
    }
}

} // namespace cmls::eval
