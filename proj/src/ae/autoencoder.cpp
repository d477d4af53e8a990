#include "cmls/ae/autoencoder.hpp"

#include "cmls/nn/checkpoint.hpp"
#include "cmls/parallel.hpp"

#include <cmath>
#include <cstring>

namespace cmls::ae {

using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::size_t kChunk = 512;

std::size_t ipow(std::size_t b, std::size_t e)
{
    std::size_t r = 1;
    while (e--) r *= b;
    return r;
}

// Row-chunked, possibly parallel evaluation of a per-row map [N, ...] -> [N, out...].
Tensor map_rows(const Tensor& in, const Shape& out_sample, const std::function<Var(const Var&)>& fn)
{
    const std::size_t n = in.dim(0);
    Shape out_shape{n};
    out_shape.insert(out_shape.end(), out_sample.begin(), out_sample.end());
    Tensor out(out_shape);
    const std::size_t in_row = in.size() / n, out_row = out.size() / n;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t cb, std::size_t ce) {
        nn::NoGradGuard guard;
        for (std::size_t c = cb; c < ce; ++c) {
            const std::size_t b = c * kChunk, e = std::min(n, b + kChunk);
            Shape s = in.shape();
            s[0] = e - b;
            Tensor part(s);
            std::memcpy(part.data(), in.data() + b * in_row, (e - b) * in_row * sizeof(double));
            const Var y = fn(Var(std::move(part)));
            std::memcpy(out.data() + b * out_row, y.value().data(), (e - b) * out_row * sizeof(double));
        }
    });
    return out;
}

} // namespace

bool LatentFrame::all_finite() const
{
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void AutoencoderConfig::validate() const
{
    if (dims != 2 && dims != 3) throw std::invalid_argument("autoencoder dims must be 2 or 3");
    if (latent == 0) throw std::invalid_argument("autoencoder latent size must be positive");
    if (channels.empty()) throw std::invalid_argument("autoencoder needs at least one conv stage");
    if (kernel == 0) throw std::invalid_argument("autoencoder kernel must be >= 1");
    const std::size_t f = ipow(2, channels.size());
    if (patch == 0 || patch % f != 0)
        throw std::invalid_argument("patch extent " + std::to_string(patch) + " is not divisible by 2^" +
                                    std::to_string(channels.size()) + " for " + std::to_string(channels.size()) +
                                    " stride-2 stages");
    for (auto c : channels)
        if (c == 0) throw std::invalid_argument("autoencoder channel widths must be positive");
}

void AutoencoderConfig::to_metadata(io::Metadata& meta) const
{
    meta["ae.dims"] = std::to_string(dims);
    meta["ae.patch"] = std::to_string(patch);
    meta["ae.latent"] = std::to_string(latent);
    meta["ae.channels"] = io::join_sizes(channels);
    meta["ae.kernel"] = std::to_string(kernel);
    meta["ae.activation"] = nn::to_string(activation);
}

AutoencoderConfig AutoencoderConfig::from_metadata(const io::Metadata& meta)
{
    AutoencoderConfig c;
    c.dims = io::get_size(meta, "ae.dims");
    c.patch = io::get_size(meta, "ae.patch");
    c.latent = io::get_size(meta, "ae.latent");
    c.channels = io::get_sizes(meta, "ae.channels");
    c.kernel = io::get_size(meta, "ae.kernel");
    c.activation = nn::parse_activation(io::get(meta, "ae.activation"));
    return c;
}

AutoencoderModel::AutoencoderModel(AutoencoderConfig cfg, std::string field, decomp::NormStats stats,
                                   std::uint64_t seed)
    : cfg_(std::move(cfg)), field_(std::move(field)), stats_(stats)
{
    cfg_.validate();
    const std::size_t d = cfg_.dims;
    bottleneck_ = cfg_.patch / ipow(2, cfg_.channels.size());
    const std::size_t flat = cfg_.channels.back() * ipow(bottleneck_, d);

    nn::Rng rng(seed);
    std::vector<LayerSpec> body;
    std::size_t cin = 1;
    for (auto c : cfg_.channels) {
        body.push_back(LayerSpec::conv(cin, c, cfg_.kernel, 2, d));
        body.push_back(LayerSpec::act(cfg_.activation));
        cin = c;
    }
    enc_body_ = nn::Sequential("enc", patch_shape(), body, rng);
    enc_head_ = nn::Sequential("enc_head", {flat}, {LayerSpec::dense(flat, cfg_.latent)}, rng);
    dec_head_ = nn::Sequential("dec_head", {cfg_.latent},
                               {LayerSpec::dense(cfg_.latent, flat), LayerSpec::act(cfg_.activation)}, rng);

    std::vector<LayerSpec> up;
    for (std::size_t s = cfg_.channels.size(); s-- > 0;) {
        const std::size_t cout = s == 0 ? 1 : cfg_.channels[s - 1];
        up.push_back(LayerSpec::conv_transpose(cfg_.channels[s], cout, cfg_.kernel, 2, d));
        if (s > 0) up.push_back(LayerSpec::act(cfg_.activation));
    }
    Shape mid{cfg_.channels.back()};
    mid.insert(mid.end(), d, bottleneck_);
    dec_body_ = nn::Sequential("dec", mid, up, rng);
}

AutoencoderModel::AutoencoderModel(const AutoencoderModel& o)
    : cfg_(o.cfg_), field_(o.field_), stats_(o.stats_), bottleneck_(o.bottleneck_), enc_body_(o.enc_body_),
      enc_head_(o.enc_head_), dec_head_(o.dec_head_), dec_body_(o.dec_body_)
{
}

AutoencoderModel& AutoencoderModel::operator=(const AutoencoderModel& o)
{
    if (this != &o) {
        cfg_ = o.cfg_;
        field_ = o.field_;
        stats_ = o.stats_;
        bottleneck_ = o.bottleneck_;
        enc_body_ = o.enc_body_;
        enc_head_ = o.enc_head_;
        dec_head_ = o.dec_head_;
        dec_body_ = o.dec_body_;
        decode_calls_ = 0;
    }
    return *this;
}

Shape AutoencoderModel::patch_shape() const
{
    Shape s{1};
    s.insert(s.end(), cfg_.dims, cfg_.patch);
    return s;
}

Var AutoencoderModel::encode_batch(const Var& x) const
{
    const Var h = enc_body_.forward(x);
    return enc_head_.forward(nn::reshape(h, {x.shape()[0], enc_head_.input_shape()[0]}));
}

Var AutoencoderModel::decode_batch(const Var& z) const
{
    const Var h = dec_head_.forward(z);
    Shape s{z.shape()[0]};
    const auto& mid = dec_body_.input_shape();
    s.insert(s.end(), mid.begin(), mid.end());
    return dec_body_.forward(nn::reshape(h, s));
}

nn::ParameterRefs AutoencoderModel::parameters()
{
    nn::ParameterRefs out;
    for (auto* seq : {&enc_body_, &enc_head_, &dec_head_, &dec_body_})
        for (auto* p : seq->parameters()) out.push_back(p);
    return out;
}

Tensor AutoencoderModel::batch_of(const decomp::SubdomainLattice& lat) const
{
    if (lat.p != cfg_.patch || lat.dims() != cfg_.dims)
        throw std::invalid_argument("autoencoder '" + field_ + "' expects " + std::to_string(cfg_.dims) +
                                    "-D patches of extent " + std::to_string(cfg_.patch) + ", lattice has " +
                                    std::to_string(lat.dims()) + "-D patches of extent " + std::to_string(lat.p));
    Shape s{lat.count()};
    const Shape ps = patch_shape();
    s.insert(s.end(), ps.begin(), ps.end());
    Tensor t(s);
    const std::size_t cells = lat.patch_cells();
    for (std::size_t n = 0; n < lat.count(); ++n) {
        if (lat.patches[n].size() != cells) throw std::invalid_argument("lattice patch " + std::to_string(n) + " is incomplete");
        std::copy(lat.patches[n].begin(), lat.patches[n].end(), t.data() + n * cells);
    }
    return t;
}

LatentFrame AutoencoderModel::encode(const decomp::SubdomainLattice& lat) const
{
    const Tensor z = map_rows(batch_of(lat), {cfg_.latent}, [this](const Var& x) { return encode_batch(x); });
    return LatentFrame{lat.lattice, cfg_.latent, field_, lat.timestep, std::vector<double>(z.data(), z.data() + z.size())};
}

decomp::SubdomainLattice AutoencoderModel::decode(const LatentFrame& frame, bool denormalize) const
{
    ++decode_calls_;
    if (frame.latent != cfg_.latent)
        throw std::invalid_argument("autoencoder '" + field_ + "' has latent size " + std::to_string(cfg_.latent) +
                                    ", frame carries " + std::to_string(frame.latent));
    if (frame.values.size() != frame.count() * frame.latent)
        throw std::invalid_argument("latent frame holds " + std::to_string(frame.values.size()) + " values, expected " +
                                    std::to_string(frame.count() * frame.latent));
    Tensor z({frame.count(), frame.latent});
    std::copy(frame.values.begin(), frame.values.end(), z.data());
    const Tensor x = map_rows(z, patch_shape(), [this](const Var& v) { return decode_batch(v); });

    decomp::SubdomainLattice lat;
    lat.p = cfg_.patch;
    lat.lattice = frame.lattice;
    lat.field = frame.field;
    lat.timestep = frame.timestep;
    const std::size_t cells = lat.patch_cells();
    lat.patches.resize(frame.count());
    for (std::size_t n = 0; n < frame.count(); ++n) {
        lat.patches[n].assign(x.data() + n * cells, x.data() + (n + 1) * cells);
        if (denormalize)
            for (auto& v : lat.patches[n]) v = stats_.denormalize(v);
    }
    return lat;
}

LatentFrame AutoencoderModel::encode_field(const Field& raw, std::size_t timestep) const
{
    return encode(decomp::decompose(decomp::normalize(raw, stats_), cfg_.patch, field_, timestep));
}

Field AutoencoderModel::decode_field(const LatentFrame& frame) const
{
    return decomp::reassemble(decode(frame, true));
}

void AutoencoderModel::save(const std::filesystem::path& path, const io::Metadata& extra) const
{
    io::Metadata meta = extra;
    meta["model"] = "autoencoder";
    meta["ae.field"] = field_;
    cfg_.to_metadata(meta);
    stats_.to_metadata(meta, "ae.norm");
    nn::put_sequential_specs(meta, "ae.enc", enc_body_);
    nn::put_sequential_specs(meta, "ae.enc_head", enc_head_);
    nn::put_sequential_specs(meta, "ae.dec_head", dec_head_);
    nn::put_sequential_specs(meta, "ae.dec", dec_body_);
    auto self = const_cast<AutoencoderModel*>(this);
    nn::write_checkpoint(path, meta, self->parameters());
}

AutoencoderModel AutoencoderModel::load(const std::filesystem::path& path)
{
    const auto ck = nn::read_checkpoint(path);
    if (ck.metadata.count("model") == 0 || ck.metadata.at("model") != "autoencoder")
        throw io::FormatError(path.string() + " is not an autoencoder checkpoint");
    AutoencoderModel m(AutoencoderConfig::from_metadata(ck.metadata), io::get(ck.metadata, "ae.field"),
                       decomp::NormStats::from_metadata(ck.metadata, "ae.norm"), 0);
    const std::pair<const char*, nn::Sequential*> parts[] = {
        {"ae.enc", &m.enc_body_}, {"ae.enc_head", &m.enc_head_}, {"ae.dec_head", &m.dec_head_}, {"ae.dec", &m.dec_body_}};
    for (const auto& [key, seq] : parts)
        if (nn::get_sequential_specs(ck.metadata, key) != seq->specs())
            throw io::FormatError(path.string() + ": layer specs under '" + key + "' do not match the stored config");
    nn::load_parameters(ck, m.parameters());
    return m;
}

Tensor collect_patches(const std::vector<const FieldSeries*>& series, std::size_t p, const decomp::NormStats& stats,
                       std::size_t t_begin, std::size_t t_end)
{
    if (series.empty()) throw std::invalid_argument("collect_patches: no series given");
    const std::size_t d = series.front()->extents.size();
    std::vector<double> data;
    std::size_t count = 0;
    for (const auto* s : series) {
        if (s->extents.size() != d) throw std::invalid_argument("collect_patches: mixed dimensionality");
        const std::size_t end = t_end == 0 ? s->steps : std::min(t_end, s->steps);
        for (std::size_t t = t_begin; t < end; ++t) {
            const auto lat = decomp::decompose(decomp::normalize(s->field(t), stats), p);
            for (const auto& patch : lat.patches) data.insert(data.end(), patch.begin(), patch.end());
            count += lat.count();
        }
    }
    if (count == 0) throw std::invalid_argument("collect_patches: empty frame range");
    Shape shape{count, 1};
    shape.insert(shape.end(), d, p);
    return Tensor(shape, std::move(data));
}

std::vector<LatentFrame> encode_series(const AutoencoderModel& model, const FieldSeries& raw, std::size_t t_begin,
                                       std::size_t t_end)
{
    const std::size_t end = t_end == 0 ? raw.steps : std::min(t_end, raw.steps);
    if (t_begin >= end) throw std::invalid_argument("encode_series: empty frame range");
    const std::size_t p = model.config().patch;
    const Extents lattice = decomp::lattice_extents(raw.extents, p);
    const std::size_t per = cell_count(lattice), l = model.config().latent;

    const Tensor patches = collect_patches({&raw}, p, model.stats(), t_begin, end);
    const Tensor z = map_rows(patches, {l}, [&model](const Var& x) { return model.encode_batch(x); });

    std::vector<LatentFrame> out;
    for (std::size_t t = t_begin; t < end; ++t) {
        const std::size_t off = (t - t_begin) * per * l;
        out.push_back(LatentFrame{lattice, l, model.field(), t,
                                  std::vector<double>(z.data() + off, z.data() + off + per * l)});
    }
    return out;
}

} // namespace cmls::ae
