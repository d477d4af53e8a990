#include "cmls/datagen/dataset.hpp"

#include <fstream>

namespace cmls::datagen {

namespace {

constexpr std::string_view kMagic{kDatasetMagic, 4};

} // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    io::Metadata meta;
    ds.grid.to_metadata(meta);
    meta["seed"] = std::to_string(ds.seed);
    meta["field.count"] = std::to_string(ds.series.size());
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        const auto& s = ds.series[i];
        if (s.extents != ds.grid.extents || s.steps != ds.grid.steps)
            throw std::invalid_argument("dataset: series '" + s.name + "' (" + extents_str(s.extents) + ", " +
                                        std::to_string(s.steps) + " frames) does not match the grid (" +
                                        extents_str(ds.grid.extents) + ", " + std::to_string(ds.grid.steps) + ")");
        const std::string key = "field." + std::to_string(i);
        meta[key + ".name"] = s.name;
        meta[key + ".role"] = to_string(s.role);
        meta[key + ".units"] = s.units;
    }
    for (const auto& [k, v] : ds.config) meta["gen." + k] = v;

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    io::write_header(os, kMagic, kDatasetVersion, meta);
    for (const auto& s : ds.series) io::write_f32(os, std::span<const float>(s.values));
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

io::Metadata read_dataset_header(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset " + path.string());
    return io::read_header(is, kMagic, kDatasetVersion, path.string());
}

Dataset read_dataset(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset " + path.string());
    const io::Metadata meta = io::read_header(is, kMagic, kDatasetVersion, path.string());

    Dataset ds;
    ds.grid = GridSpec::from_metadata(meta);
    ds.seed = std::stoull(io::get(meta, "seed"));
    const std::size_t n = io::get_size(meta, "field.count");
    for (std::size_t i = 0; i < n; ++i) {
        const std::string key = "field." + std::to_string(i);
        FieldSeries s(io::get(meta, key + ".name"), parse_role(io::get(meta, key + ".role")), ds.grid.extents,
                      ds.grid.steps, io::get(meta, key + ".units"));
        io::read_f32(is, std::span<float>(s.values), path.string());
        ds.series.push_back(std::move(s));
    }
    for (const auto& [k, v] : meta)
        if (k.rfind("gen.", 0) == 0) ds.config[k.substr(4)] = v;
    return ds;
}

} // namespace cmls::datagen
