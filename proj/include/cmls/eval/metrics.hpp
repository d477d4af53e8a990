#pragma once

#include "cmls/field.hpp"

#include <filesystem>
#include <limits>
#include <map>

namespace cmls::eval {

struct TermRow {
    std::size_t sample = 0;
    std::string variable;
    std::size_t timestep = 0;
    double value = 0.0;  // ||pred - gt|| / ||gt||
    bool excluded = false;
};

/// nRMSE over samples, variables and timesteps [t_begin, t_end). Terms whose
/// ground-truth norm is zero are excluded (counted in `excluded`).
struct EvalReport {
    double aggregate = 0.0;
    std::vector<std::size_t> timesteps;
    std::vector<double> curve;            // mean over samples and variables per timestep
    std::vector<std::size_t> curve_count;  // included terms per timestep
    std::map<std::string, double> per_variable;
    std::vector<double> per_sample;
    std::size_t n_test = 0, n_var = 0, n_t = 0, th = 0;
    std::size_t t_begin = 0, t_end = 0;
    std::size_t excluded = 0;
    std::vector<TermRow> rows;
};

/// Variables are the series of each prediction set, matched by name in gt.
EvalReport nrmse_window(const std::vector<SeriesSet>& pred, const std::vector<SeriesSet>& gt, std::size_t t_begin,
                        std::size_t t_end);
/// Window [th, N_t).
EvalReport nrmse(const std::vector<SeriesSet>& pred, const std::vector<SeriesSet>& gt, std::size_t th);

/// Predictor that repeats frame `hold` of gt for every later frame.
std::vector<SeriesSet> persistence_prediction(const std::vector<SeriesSet>& gt, std::size_t hold,
                                              const std::vector<std::string>& variables);
/// Persistence of frame th-1 scored on [th, N_t).
EvalReport persistence_baseline(const std::vector<SeriesSet>& gt, std::size_t th,
                                const std::vector<std::string>& variables);

/// Per timestep: number of contiguous z-layers from the top (largest z) that
/// contain a cell above t_melt, times dz.
std::vector<double> melt_pool_depth(const FieldSeries& temperature, double t_melt, double dz);

/// One row per (sample, variable, timestep) plus "# aggregate" / "# baseline" footer lines.
void write_rows_csv(const std::filesystem::path& path, const EvalReport& report,
                    double baseline = std::numeric_limits<double>::quiet_NaN());
/// timestep,nrmse[,baseline]
void write_curve_csv(const std::filesystem::path& path, const EvalReport& report, const EvalReport* baseline = nullptr);

} // namespace cmls::eval
