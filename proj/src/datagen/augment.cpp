#include "cmls/datagen/generators.hpp"

namespace cmls::datagen {

std::string to_string(AugmentOp op)
{
    switch (op) {
    case AugmentOp::reflect_xz: return "reflect_xz";
    case AugmentOp::reflect_yz: return "reflect_yz";
    case AugmentOp::rotate90_z: return "rotate90_z";
    }
    return "?";
}

namespace {

void transform_frame(std::span<const float> src, std::span<float> dst, const Extents& e, AugmentOp op)
{
    const std::size_t nx = e[0], ny = e[1], nz = e.size() > 2 ? e[2] : 1;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            std::size_t si = i, sj = j;
            switch (op) {
            case AugmentOp::reflect_xz: sj = ny - 1 - j; break;
            case AugmentOp::reflect_yz: si = nx - 1 - i; break;
            case AugmentOp::rotate90_z:
                si = j;
                sj = ny - 1 - i;
                break;
            }
            for (std::size_t k = 0; k < nz; ++k) dst[(i * ny + j) * nz + k] = src[(si * ny + sj) * nz + k];
        }
}

} // namespace

SeriesSet augment(const SeriesSet& set, AugmentOp op)
{
    SeriesSet out = set;
    for (std::size_t s = 0; s < set.size(); ++s) {
        const auto& e = set[s].extents;
        if (e.size() < 2) throw std::invalid_argument("augment: series '" + set[s].name + "' is not 2-D or 3-D");
        if (op == AugmentOp::rotate90_z && e[0] != e[1])
            throw std::invalid_argument("augment: rotation needs a square x-y plane, got " + extents_str(e));
        for (std::size_t t = 0; t < set[s].steps; ++t) transform_frame(set[s].frame(t), out[s].frame(t), e, op);
    }
    return out;
}

std::vector<SeriesSet> augment_all(const std::vector<SeriesSet>& samples)
{
    std::vector<SeriesSet> out;
    out.reserve(samples.size() * 4);
    for (const auto& s : samples) {
        out.push_back(s);
        for (AugmentOp op : {AugmentOp::reflect_xz, AugmentOp::reflect_yz, AugmentOp::rotate90_z})
            out.push_back(augment(s, op));
    }
    return out;
}

} // namespace cmls::datagen
