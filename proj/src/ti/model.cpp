#include "cmls/ti/model.hpp"

#include "cmls/nn/checkpoint.hpp"

#include <cstring>
#include <numeric>

namespace cmls::ti {

using nn::Tensor;
using nn::Var;

namespace {

std::string slots_str(const std::vector<FieldSlot>& slots)
{
    std::string s;
    for (std::size_t i = 0; i < slots.size(); ++i) s += (i ? "," : "") + slots[i].name + ":" + std::to_string(slots[i].latent);
    return s;
}

std::vector<FieldSlot> parse_slots(const std::string& text)
{
    std::vector<FieldSlot> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(pos, end - pos);
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw io::FormatError("malformed field slot '" + item + "'");
        out.push_back({item.substr(0, colon), std::stoul(item.substr(colon + 1))});
        pos = end + 1;
    }
    return out;
}

std::vector<nn::LayerSpec> mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, nn::Activation act)
{
    std::vector<std::size_t> widths{in};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return nn::mlp_specs(widths, act);
}

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& rows)
{
    const std::size_t w = t.size() / t.dim(0);
    Tensor out({rows.size(), w});
    for (std::size_t i = 0; i < rows.size(); ++i) std::memcpy(out.data() + i * w, t.data() + rows[i] * w, w * sizeof(double));
    return out;
}

Tensor solution_cols(const Tensor& frame, std::size_t ls)
{
    const std::size_t n = frame.dim(0), w = frame.dim(1);
    Tensor out({n, ls});
    for (std::size_t i = 0; i < n; ++i) std::memcpy(out.data() + i * ls, frame.data() + i * w, ls * sizeof(double));
    return out;
}

} // namespace

std::size_t TiConfig::solution_width() const
{
    std::size_t w = 0;
    for (const auto& s : solution) w += s.latent;
    return w;
}

std::size_t TiConfig::condition_width() const
{
    std::size_t w = 0;
    for (const auto& s : condition) w += s.latent;
    return w;
}

decomp::NeighborPolicy TiConfig::effective_policy() const
{
    return policy.modes.empty() ? decomp::NeighborPolicy::uniform(decomp::NeighborMode::zero, dims) : policy;
}

void TiConfig::validate() const
{
    if (dims != 2 && dims != 3) throw std::invalid_argument("time integrator dims must be 2 or 3");
    if (solution.empty()) throw std::invalid_argument("time integrator needs at least one solution field");
    for (const auto* group : {&solution, &condition})
        for (const auto& s : *group)
            if (s.latent == 0) throw std::invalid_argument("field '" + s.name + "' has zero latent size");
    if (history == 0) throw std::invalid_argument("time history th must be >= 1");
    if (d_gamma == 0) throw std::invalid_argument("d_gamma must be >= 1");
    if (!policy.modes.empty() && policy.modes.size() != dims)
        throw std::invalid_argument("neighbour policy has " + std::to_string(policy.modes.size()) + " axes for a " +
                                    std::to_string(dims) + "-D model");
}

void TiConfig::to_metadata(io::Metadata& meta) const
{
    meta["ti.dims"] = std::to_string(dims);
    meta["ti.solution"] = slots_str(solution);
    meta["ti.condition"] = slots_str(condition);
    meta["ti.history"] = std::to_string(history);
    meta["ti.d_gamma"] = std::to_string(d_gamma);
    meta["ti.spatial_hidden"] = io::join_sizes(spatial_hidden);
    meta["ti.temporal_hidden"] = io::join_sizes(temporal_hidden);
    meta["ti.activation"] = nn::to_string(activation);
    meta["ti.policy"] = effective_policy().serialize();
    meta["ti.residual"] = residual ? "1" : "0";
}

TiConfig TiConfig::from_metadata(const io::Metadata& meta)
{
    TiConfig c;
    c.dims = io::get_size(meta, "ti.dims");
    c.solution = parse_slots(io::get(meta, "ti.solution"));
    c.condition = parse_slots(io::get(meta, "ti.condition"));
    c.history = io::get_size(meta, "ti.history");
    c.d_gamma = io::get_size(meta, "ti.d_gamma");
    c.spatial_hidden = io::get(meta, "ti.spatial_hidden").empty() ? std::vector<std::size_t>{}
                                                                   : io::get_sizes(meta, "ti.spatial_hidden");
    c.temporal_hidden = io::get(meta, "ti.temporal_hidden").empty() ? std::vector<std::size_t>{}
                                                                     : io::get_sizes(meta, "ti.temporal_hidden");
    c.activation = nn::parse_activation(io::get(meta, "ti.activation"));
    c.policy = decomp::NeighborPolicy::parse(io::get(meta, "ti.policy"));
    c.residual = io::get(meta, "ti.residual") == "1";
    return c;
}

TiConfig roster_config(TiConfig base, const std::vector<const ae::AutoencoderModel*>& solution,
                       const std::vector<const ae::AutoencoderModel*>& condition)
{
    base.solution.clear();
    base.condition.clear();
    for (const auto* m : solution) base.solution.push_back({m->field(), m->config().latent});
    for (const auto* m : condition) base.condition.push_back({m->field(), m->config().latent});
    for (const auto* group : {&solution, &condition})
        for (const auto* m : *group)
            if (m->config().dims != base.dims)
                throw std::invalid_argument("autoencoder '" + m->field() + "' is " + std::to_string(m->config().dims) +
                                            "-D, integrator is " + std::to_string(base.dims) + "-D");
    return base;
}

TimeIntegratorModel::TimeIntegratorModel(TiConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg))
{
    cfg_.validate();
    if (cfg_.policy.modes.empty()) cfg_.policy = cfg_.effective_policy();
    nn::Rng rng(seed);
    f_spatial_ = nn::Sequential("f_spatial", {cfg_.spatial_in()},
                                mlp(cfg_.spatial_in(), cfg_.spatial_hidden, cfg_.d_gamma, cfg_.activation), rng);
    f_temporal_ = nn::Sequential("f_temporal", {cfg_.temporal_in()},
                                 mlp(cfg_.temporal_in(), cfg_.temporal_hidden, cfg_.solution_width(), cfg_.activation),
                                 rng);
}

Var TimeIntegratorModel::fuse_spatial(const Var& x) const
{
    if (x.shape().size() != 2 || x.shape()[1] != cfg_.spatial_in())
        throw std::invalid_argument("F_spatial expects input width " + std::to_string(cfg_.spatial_in()) + ", got " +
                                    (x.shape().size() == 2 ? std::to_string(x.shape()[1]) : nn::shape_str(x.shape())));
    return f_spatial_.forward(x);
}

std::vector<double> TimeIntegratorModel::fuse_spatial(std::span<const double> x) const
{
    nn::NoGradGuard guard;
    const Var y = fuse_spatial(Var(Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end()))));
    return std::vector<double>(y.value().data(), y.value().data() + y.value().size());
}

Var TimeIntegratorModel::predict_next(const Var& history) const
{
    if (history.shape().size() != 2 || history.shape()[1] != cfg_.temporal_in())
        throw std::invalid_argument("F_temporal expects input width " + std::to_string(cfg_.temporal_in()) + " (th=" +
                                    std::to_string(cfg_.history) + " x d_gamma=" + std::to_string(cfg_.d_gamma) +
                                    "), got " + nn::shape_str(history.shape()));
    return f_temporal_.forward(history);
}

std::vector<double> TimeIntegratorModel::predict_next(const std::vector<std::vector<double>>& gammas) const
{
    if (gammas.size() != cfg_.history)
        throw std::invalid_argument("predict_next needs " + std::to_string(cfg_.history) + " fused vectors, got " +
                                    std::to_string(gammas.size()));
    std::vector<double> flat;
    for (const auto& g : gammas) {
        if (g.size() != cfg_.d_gamma)
            throw std::invalid_argument("fused vector width " + std::to_string(g.size()) + ", expected " +
                                        std::to_string(cfg_.d_gamma));
        flat.insert(flat.end(), g.begin(), g.end());
    }
    nn::NoGradGuard guard;
    const std::size_t width = flat.size();
    const Var y = predict_next(Var(Tensor({1, width}, std::move(flat))));
    return std::vector<double>(y.value().data(), y.value().data() + y.value().size());
}

Var TimeIntegratorModel::gamma(const Var& frame, const std::vector<long>& table) const
{
    if (frame.shape().size() != 2 || frame.shape()[1] != cfg_.frame_width())
        throw std::invalid_argument("latent frame width " + nn::shape_str(frame.shape()) + ", expected [R," +
                                    std::to_string(cfg_.frame_width()) + "]");
    return fuse_spatial(nn::gather_rows(frame, table, cfg_.stencil()));
}

Var TimeIntegratorModel::advance(const std::vector<Var>& gammas, const Var& latest_solution) const
{
    if (gammas.size() != cfg_.history)
        throw std::invalid_argument("advance needs " + std::to_string(cfg_.history) + " fused frames, got " +
                                    std::to_string(gammas.size()));
    const Var out = predict_next(nn::concat_cols(gammas));
    return cfg_.residual ? nn::add(out, latest_solution) : out;
}

std::vector<long> TimeIntegratorModel::table(const Extents& lattice) const
{
    if (lattice.size() != cfg_.dims)
        throw std::invalid_argument("lattice " + extents_str(lattice) + " does not match a " + std::to_string(cfg_.dims) +
                                    "-D integrator");
    return decomp::neighbor_table(lattice, cfg_.policy);
}

nn::ParameterRefs TimeIntegratorModel::parameters()
{
    auto out = f_spatial_.parameters();
    for (auto* p : f_temporal_.parameters()) out.push_back(p);
    return out;
}

void TimeIntegratorModel::save(const std::filesystem::path& path, const io::Metadata& extra) const
{
    io::Metadata meta = extra;
    meta["model"] = "time_integrator";
    cfg_.to_metadata(meta);
    nn::put_sequential_specs(meta, "ti.f_spatial", f_spatial_);
    nn::put_sequential_specs(meta, "ti.f_temporal", f_temporal_);
    nn::write_checkpoint(path, meta, const_cast<TimeIntegratorModel*>(this)->parameters());
}

TimeIntegratorModel TimeIntegratorModel::load(const std::filesystem::path& path, io::Metadata* metadata)
{
    const auto ck = nn::read_checkpoint(path);
    if (ck.metadata.count("model") == 0 || ck.metadata.at("model") != "time_integrator")
        throw io::FormatError(path.string() + " is not a time-integrator checkpoint");
    TimeIntegratorModel m(TiConfig::from_metadata(ck.metadata), 0);
    if (nn::get_sequential_specs(ck.metadata, "ti.f_spatial") != m.f_spatial_.specs() ||
        nn::get_sequential_specs(ck.metadata, "ti.f_temporal") != m.f_temporal_.specs())
        throw io::FormatError(path.string() + ": stored layer specs do not match the stored config");
    nn::load_parameters(ck, m.parameters());
    if (metadata) *metadata = ck.metadata;
    return m;
}

std::vector<long> stacked_table(const std::vector<long>& table, std::size_t n, std::size_t copies)
{
    std::vector<long> out;
    out.reserve(table.size() * copies);
    for (std::size_t b = 0; b < copies; ++b)
        for (long id : table) out.push_back(id < 0 ? id : id + long(b * n));
    return out;
}

Tensor combine(const std::vector<const ae::LatentFrame*>& fields)
{
    if (fields.empty()) throw std::invalid_argument("combine: no latent frames");
    const std::size_t n = fields.front()->count();
    std::size_t w = 0;
    for (const auto* f : fields) {
        if (f->count() != n || f->lattice != fields.front()->lattice)
            throw std::invalid_argument("combine: latent frames live on different lattices");
        w += f->latent;
    }
    Tensor out({n, w});
    std::size_t off = 0;
    for (const auto* f : fields) {
        for (std::size_t i = 0; i < n; ++i) std::memcpy(out.data() + i * w + off, f->vec(i).data(), f->latent * sizeof(double));
        off += f->latent;
    }
    return out;
}

std::vector<Tensor> combine_series(const std::vector<std::vector<ae::LatentFrame>>& fields)
{
    if (fields.empty()) throw std::invalid_argument("combine_series: no fields");
    const std::size_t steps = fields.front().size();
    std::vector<Tensor> out;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<const ae::LatentFrame*> at;
        for (const auto& f : fields) {
            if (f.size() != steps) throw std::invalid_argument("combine_series: fields have different frame counts");
            at.push_back(&f[t]);
        }
        out.push_back(combine(at));
    }
    return out;
}

Tensor step_all(const TimeIntegratorModel& model, const Extents& lattice, const std::vector<Tensor>& history,
                const std::vector<std::size_t>& order)
{
    const auto& cfg = model.config();
    const std::size_t n = cell_count(lattice);
    if (history.size() != cfg.history)
        throw std::invalid_argument("step_all needs " + std::to_string(cfg.history) + " history frames, got " +
                                    std::to_string(history.size()));
    for (const auto& f : history)
        if (f.rank() != 2 || f.dim(0) != n || f.dim(1) != cfg.frame_width())
            throw std::invalid_argument("history frame " + nn::shape_str(f.shape()) + " does not match [" +
                                        std::to_string(n) + "," + std::to_string(cfg.frame_width()) + "]");
    std::vector<std::size_t> ord = order;
    if (ord.empty()) {
        ord.resize(n);
        std::iota(ord.begin(), ord.end(), 0);
    }
    std::vector<char> seen(n, 0);
    for (auto i : ord) {
        if (i >= n || seen[i]) throw std::invalid_argument("step_all: order is not a permutation of the subdomains");
        seen[i] = 1;
    }
    if (ord.size() != n) throw std::invalid_argument("step_all: order is not a permutation of the subdomains");

    // Rows are evaluated in `ord`; row m of every intermediate is subdomain ord[m].
    const std::size_t s = cfg.stencil();
    const auto full = model.table(lattice);
    std::vector<long> table;
    table.reserve(n * s);
    for (auto i : ord) table.insert(table.end(), full.begin() + long(i * s), full.begin() + long((i + 1) * s));

    nn::NoGradGuard guard;
    std::vector<Var> gammas;
    for (const auto& f : history) gammas.push_back(model.gamma(Var(f), table));
    const Var latest(rows_of(solution_cols(history.back(), cfg.solution_width()), ord));
    const Var pred = model.advance(gammas, latest);

    const std::size_t ls = cfg.solution_width();
    Tensor out({n, ls});
    for (std::size_t m = 0; m < n; ++m)
        std::memcpy(out.data() + ord[m] * ls, pred.value().data() + m * ls, ls * sizeof(double));
    return out;
}

LatentStepper::LatentStepper(const TimeIntegratorModel& model, Extents lattice)
    : model_(model), lattice_(std::move(lattice)), table_(model.table(lattice_))
{
}

void LatentStepper::push(const Tensor& frame)
{
    nn::NoGradGuard guard;
    gammas_.push_back(model_.gamma(Var(frame), table_));
    if (gammas_.size() > model_.config().history) gammas_.pop_front();
    latest_ = solution_cols(frame, model_.config().solution_width());
}

Tensor LatentStepper::step() const
{
    if (!ready())
        throw std::logic_error("latent stepper holds " + std::to_string(gammas_.size()) + " of " +
                               std::to_string(model_.config().history) + " history frames");
    nn::NoGradGuard guard;
    const std::vector<Var> g(gammas_.begin(), gammas_.end());
    return model_.advance(g, Var(latest_)).value();
}

} // namespace cmls::ti
