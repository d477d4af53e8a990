#pragma once

#include "cmls/decomp/lattice.hpp"
#include "cmls/decomp/normalize.hpp"
#include "cmls/nn/layers.hpp"

#include <atomic>
#include <filesystem>

namespace cmls::ae {

struct AutoencoderConfig {
    std::size_t dims = 2;
    std::size_t patch = 8;                    // p
    std::size_t latent = 16;                  // l
    std::vector<std::size_t> channels{16, 32};  // one stride-2 stage each
    std::size_t kernel = 3;
    nn::Activation activation = nn::Activation::tanh;

    /// Throws std::invalid_argument unless p is divisible by 2^stages etc.
    void validate() const;
    void to_metadata(io::Metadata& meta) const;
    static AutoencoderConfig from_metadata(const io::Metadata& meta);
    bool operator==(const AutoencoderConfig&) const = default;
};

/// Latent vectors of every subdomain of one field at one timestep, row-major
/// over the lattice; `values` holds count * latent entries.
struct LatentFrame {
    Extents lattice;
    std::size_t latent = 0;
    std::string field;
    std::size_t timestep = 0;
    std::vector<double> values;

    std::size_t count() const { return cell_count(lattice); }
    std::span<double> vec(std::size_t n) { return std::span<double>(values).subspan(n * latent, latent); }
    std::span<const double> vec(std::size_t n) const { return std::span<const double>(values).subspan(n * latent, latent); }
    bool all_finite() const;
    bool operator==(const LatentFrame&) const = default;
};

/// Per-field patch autoencoder: conv stages with stride 2, then a dense map to
/// the latent; the decoder mirrors it with transpose convolutions.
class AutoencoderModel {
public:
    AutoencoderModel(AutoencoderConfig cfg, std::string field, decomp::NormStats stats, std::uint64_t seed);
    AutoencoderModel(const AutoencoderModel& other);
    AutoencoderModel& operator=(const AutoencoderModel& other);

    const AutoencoderConfig& config() const { return cfg_; }
    const std::string& field() const { return field_; }
    const decomp::NormStats& stats() const { return stats_; }
    void set_stats(const decomp::NormStats& s) { stats_ = s; }

    nn::Shape patch_shape() const;  // [1, p, p(, p)]

    // Graph-building batch maps: [B, 1, p..] <-> [B, l].
    nn::Var encode_batch(const nn::Var& x) const;
    nn::Var decode_batch(const nn::Var& z) const;

    /// Lattice patches must already be normalised with stats().
    LatentFrame encode(const decomp::SubdomainLattice& lattice) const;
    /// Returns normalised patches unless `denormalize` is set.
    decomp::SubdomainLattice decode(const LatentFrame& frame, bool denormalize = false) const;

    /// Raw field -> normalise -> decompose -> encode.
    LatentFrame encode_field(const Field& raw, std::size_t timestep = 0) const;
    /// decode -> denormalise -> reassemble.
    Field decode_field(const LatentFrame& frame) const;

    nn::ParameterRefs parameters();
    nn::Sequential& encoder_head() { return enc_head_; }
    nn::Sequential& decoder_body() { return dec_body_; }

    /// Number of decode / decode_field calls made on this instance.
    std::size_t decode_calls() const { return decode_calls_.load(); }

    void save(const std::filesystem::path& path, const io::Metadata& extra = {}) const;
    static AutoencoderModel load(const std::filesystem::path& path);

private:
    nn::Tensor batch_of(const decomp::SubdomainLattice& lattice) const;

    AutoencoderConfig cfg_;
    std::string field_;
    decomp::NormStats stats_;
    std::size_t bottleneck_ = 0;  // p / 2^stages
    nn::Sequential enc_body_, enc_head_, dec_head_, dec_body_;
    mutable std::atomic<std::size_t> decode_calls_{0};
};

/// Normalised patches of every frame in [t_begin, t_end) of each series,
/// stacked as [N, 1, p..]. t_end = 0 means all frames.
nn::Tensor collect_patches(const std::vector<const FieldSeries*>& series, std::size_t p,
                           const decomp::NormStats& stats, std::size_t t_begin = 0, std::size_t t_end = 0);

/// Encodes frames [t_begin, t_end) of a raw series.
std::vector<LatentFrame> encode_series(const AutoencoderModel& model, const FieldSeries& raw, std::size_t t_begin = 0,
                                       std::size_t t_end = 0);

} // namespace cmls::ae
