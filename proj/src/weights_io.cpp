#include "tonus/network.hpp"
#include "tonus/wire.hpp"

namespace tonus {

namespace {

constexpr char kWeightsMagic[4] = {'T', 'N', 'W', '1'};

void write_param(WireWriter& w, const std::optional<Tensor>& t) {
    if (!t) {
        w.u8(0);
        return;
    }
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t->size(); ++i) w.f32(static_cast<float>((*t)[i]));
}

std::optional<Tensor> read_param(WireReader& r) {
    if (r.u8() == 0) return std::nullopt;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw ValidationError("weights: implausible tensor rank");
    std::vector<std::size_t> dims(rank);
    std::size_t count = 1;
    for (auto& d : dims) {
        d = r.u32();
        count *= d;
    }
    if (count > (1u << 28)) throw ValidationError("weights: implausible tensor size");
    Tensor t(dims);
    for (std::size_t i = 0; i < count; ++i) t[i] = static_cast<double>(r.f32());
    return t;
}

}  // namespace

void save_weights(const WeightStore& store, const std::string& path) {
    WireWriter w;
    w.magic(kWeightsMagic);
    w.u16(static_cast<std::uint16_t>(store.layers.size()));
    for (const auto& p : store.layers) {
        w.u8(p.kind);
        w.u8(p.quant_bits);
        write_param(w, p.weight);
        write_param(w, p.bias);
        write_param(w, p.bn_gamma);
        write_param(w, p.bn_beta);
        write_param(w, p.bn_mean);
        write_param(w, p.bn_var);
    }
    write_file_bytes(path, w.data());
}

WeightStore load_weights(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    WireReader r(bytes.data(), bytes.size(), "weights " + path);
    r.expect_magic(kWeightsMagic);
    const std::uint16_t n = r.u16();
    WeightStore store;
    store.layers.reserve(n);
    for (std::uint16_t i = 0; i < n; ++i) {
        LayerParams p;
        p.kind = r.u8();
        p.quant_bits = r.u8();
        p.weight = read_param(r);
        p.bias = read_param(r);
        p.bn_gamma = read_param(r);
        p.bn_beta = read_param(r);
        p.bn_mean = read_param(r);
        p.bn_var = read_param(r);
        store.layers.push_back(std::move(p));
    }
    if (!r.done()) throw ValidationError("weights " + path + ": trailing bytes");
    return store;
}

}  // namespace tonus
