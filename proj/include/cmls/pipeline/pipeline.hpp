#pragma once

#include "cmls/ae/train.hpp"
#include "cmls/datagen/dataset.hpp"
#include "cmls/eval/metrics.hpp"
#include "cmls/pipeline/config.hpp"
#include "cmls/ti/train.hpp"

#include <iosfwd>

namespace cmls::pipeline {

/// Where each command reads and writes. Training always writes under `out`;
/// checkpoints are read from `models` when that is set.
struct Layout {
    std::filesystem::path root;
    std::filesystem::path data;
    std::filesystem::path ae_read, ae_write;
    std::filesystem::path ti_read, ti_write;

    explicit Layout(const ExperimentConfig& cfg);
    Layout() = default;

    std::filesystem::path manifest() const { return data / "manifest.json"; }
    std::filesystem::path ae_checkpoint(const std::filesystem::path& dir, const std::string& field) const
    {
        return dir / (field + ".ckpt");
    }
    std::filesystem::path ti_checkpoint(const std::filesystem::path& dir) const { return dir / "ti.ckpt"; }
    std::filesystem::path rollout_dir() const { return root / "rollout"; }
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path sweep_dir() const { return root / "sweep"; }
};

struct FieldInfo {
    std::string name;
    FieldRole role = FieldRole::solution;
    std::string units;
};

struct Manifest {
    std::string pde;
    datagen::GridSpec grid;
    std::vector<FieldInfo> fields;
    std::vector<std::string> train;  // file names relative to the manifest
    std::vector<std::string> test;
    std::vector<std::uint64_t> train_seeds, test_seeds;
    nlohmann::json data;  // the data section that produced the set

    std::vector<std::string> names(FieldRole role) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
std::vector<datagen::Dataset> load_split(const Layout& layout, const Manifest& m, bool test);

/// Independent stream for (base seed, purpose tag, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index);

/// Progress output; nullptr silences it. Defaults to std::cout.
void set_log(std::ostream* os);
std::ostream& log();

/// Checks that only need the dataset: patch divisibility, training window,
/// th + K against the stored frames. Throws ConfigError.
void validate_against(const ExperimentConfig& cfg, const Manifest& m);

/// Generator grid with per-pde defaults filled in.
datagen::GridSpec grid_for(const DataConfig& d);

// ---- commands ---------------------------------------------------------------

Manifest cmd_generate(const ExperimentConfig& cfg, const Layout& layout);
Manifest cmd_generate(const ExperimentConfig& cfg);

struct AeSummary {
    std::string field;
    ae::AeTrainReport report;
    double rel_l2 = 0.0;  // on the training patches
    double seconds = 0.0;
};
std::vector<AeSummary> cmd_train_ae(const ExperimentConfig& cfg, const Layout& layout);
std::vector<AeSummary> cmd_train_ae(const ExperimentConfig& cfg);

struct TiSummary {
    ti::TiTrainReport report;
    std::size_t first_epoch = 0;  // non-zero after a resume
    double seconds = 0.0;
};
/// Throws ConfigError telling the caller to run train-ae first when an
/// autoencoder checkpoint is missing.
TiSummary cmd_train_ti(const ExperimentConfig& cfg, const Layout& layout);
TiSummary cmd_train_ti(const ExperimentConfig& cfg);

struct RolloutSummary {
    std::size_t samples = 0;
    std::size_t history = 0;
    std::size_t horizon = 0;
    std::vector<std::filesystem::path> predictions;
    double seconds = 0.0;
};
/// Propagates NumericalError (with the offending timestep) from any sample.
RolloutSummary cmd_rollout(const ExperimentConfig& cfg, const Layout& layout);
RolloutSummary cmd_rollout(const ExperimentConfig& cfg);

struct EvalSummary {
    eval::EvalReport model;
    eval::EvalReport baseline;
};
EvalSummary cmd_eval(const ExperimentConfig& cfg, const Layout& layout);
EvalSummary cmd_eval(const ExperimentConfig& cfg);

struct SweepRow {
    std::size_t value = 0;
    double aggregate = 0.0;
    double baseline = 0.0;
    std::filesystem::path checkpoint;
};
/// One TI checkpoint per value of the sweep axis plus sweep/comparison.csv.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg);

} // namespace cmls::pipeline
