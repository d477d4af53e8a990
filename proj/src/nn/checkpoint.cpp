#include "cmls/nn/checkpoint.hpp"

#include <fstream>

namespace cmls::nn {

void write_checkpoint(const std::filesystem::path& path, const io::Metadata& metadata, const ParameterRefs& params)
{
    io::Metadata meta = metadata;
    meta["param.count"] = std::to_string(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string key = "param." + std::to_string(i);
        meta[key + ".id"] = params[i]->id();
        meta[key + ".shape"] = io::join_sizes(params[i]->value().shape());
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    io::write_header(os, kCheckpointMagic, kCheckpointVersion, meta);
    for (auto* p : params) io::write_f32(os, p->value().values());
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    Checkpoint ck;
    ck.metadata = io::read_header(is, kCheckpointMagic, kCheckpointVersion, path.string());
    const std::size_t n = io::get_size(ck.metadata, "param.count");
    for (std::size_t i = 0; i < n; ++i) {
        const std::string key = "param." + std::to_string(i);
        ck.ids.push_back(io::get(ck.metadata, key + ".id"));
        Tensor t(io::get_sizes(ck.metadata, key + ".shape"));
        io::read_f32(is, t.values(), path.string());
        ck.values.push_back(std::move(t));
    }
    return ck;
}

void load_parameters(const Checkpoint& ckpt, const ParameterRefs& params)
{
    if (ckpt.values.size() != params.size())
        throw io::FormatError("checkpoint holds " + std::to_string(ckpt.values.size()) + " parameters, model has " +
                              std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i)
        if (ckpt.ids[i] != params[i]->id())
            throw io::FormatError("checkpoint parameter " + std::to_string(i) + " is '" + ckpt.ids[i] +
                                  "', model expects '" + params[i]->id() + "'");
    restore(params, ckpt.values);
}

void put_sequential_specs(io::Metadata& meta, const std::string& prefix, const Sequential& seq)
{
    meta[prefix + ".input"] = io::join_sizes(seq.input_shape());
    meta[prefix + ".layers"] = std::to_string(seq.layers().size());
    for (std::size_t i = 0; i < seq.layers().size(); ++i)
        meta[prefix + ".layer." + std::to_string(i)] = seq.layers()[i].spec().serialize();
}

std::vector<LayerSpec> get_sequential_specs(const io::Metadata& meta, const std::string& prefix)
{
    std::vector<LayerSpec> specs;
    const std::size_t n = io::get_size(meta, prefix + ".layers");
    for (std::size_t i = 0; i < n; ++i) specs.push_back(LayerSpec::parse(io::get(meta, prefix + ".layer." + std::to_string(i))));
    return specs;
}

} // namespace cmls::nn
