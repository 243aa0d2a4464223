#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tonus/events.hpp"
#include "tonus/neurons.hpp"
#include "tonus/tensor.hpp"

namespace tonus {

inline constexpr std::size_t kNumJoints = 13;
inline constexpr std::size_t kDownsampleFactor = 4;

enum class LayerKind : std::uint8_t {
    SpikingConv,    // conv + neuron dynamics (encoder)
    Conv,           // plain conv
    ConvTranspose,  // upsampling conv, output_padding = stride-1
    ResBlock,       // [conv k3 d2 + BN] x2 with residual add; stride 2 = x2 nearest upsample first
    SepConvBlock,   // depthwise k3 -> pointwise k1 -> BN -> ReLU
};

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t out_channels = 1;
    std::size_t dilation = 1;
    NeuronKind neuron = NeuronKind::None;
    bool batchnorm = false;

    void validate() const;  // kernel odd, stride in {1,2}, out_channels >= 1
};

enum class HeadsMode : std::uint8_t { MultiHead, HeatmapsOnly };

// Output head order is fixed: heatmap(13), center(1), regression(26), offset(26).
inline constexpr std::array<std::size_t, 4> kHeadChannels = {kNumJoints, 1, 2 * kNumJoints,
                                                             2 * kNumJoints};
inline constexpr std::array<const char*, 4> kHeadNames = {"heatmap", "center", "regression",
                                                          "offset"};

struct NetworkSpec {
    std::uint16_t model_width = 160;
    std::uint16_t model_height = 160;
    HeadsMode heads = HeadsMode::MultiHead;
    CubaParams cuba;
    PlifParams plif;
    std::vector<LayerSpec> encoder;        // spiking stack
    std::vector<LayerSpec> decoder;        // shared trunk before the heads
    std::size_t head_branch_channels = 96; // separable-block output channels per head

    // The published architecture: 8 spiking conv layers into a 7-stage decoder
    // whose last two stages are duplicated across the four heads.
    static NetworkSpec standard(NeuronKind neuron = NeuronKind::Plif,
                                HeadsMode heads = HeadsMode::MultiHead);

    std::size_t num_heads() const { return heads == HeadsMode::MultiHead ? 4 : 1; }
    std::size_t heatmap_size() const { return model_width / kDownsampleFactor; }

    void set_encoder_neuron(NeuronKind kind);
    void validate() const;

    // Spatial side length after each encoder layer / decoder stage.
    std::vector<std::size_t> encoder_output_sizes() const;
    std::vector<std::size_t> decoder_output_sizes() const;
};

// Text config round trip so ablation variants are file-driven.
std::string format_network_spec(const NetworkSpec& spec);
void save_network_spec(const NetworkSpec& spec, const std::string& path);
NetworkSpec parse_network_spec(const std::string& text);
NetworkSpec load_network_spec(const std::string& path);

// ---------------------------------------------------------------------------
// Parameter storage. Composite stages (ResBlock, SepConvBlock) flatten into
// primitive parameterized layers, each holding one kernel plus optional bias
// and batchnorm statistics.

enum class PrimitiveKind : std::uint8_t { Conv = 0, ConvTranspose = 1, DepthwiseConv = 2 };

struct PrimitiveGeom {
    std::string name;  // e.g. "encoder.3", "decoder.1.conv2", "head.center.pointwise"
    PrimitiveKind kind = PrimitiveKind::Conv;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t groups = 1;
    bool has_bias = false;
    bool has_batchnorm = false;
    bool spiking = false;     // belongs to a spiking layer (AC accounting)
    std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;

    std::vector<std::size_t> weight_dims() const;
};

std::vector<PrimitiveGeom> flatten_primitives(const NetworkSpec& spec);

struct LayerParams {
    std::uint8_t kind = 0;  // PrimitiveKind
    std::uint8_t quant_bits = 32;
    double quant_scale = 0.0;  // last quantization step, not persisted
    std::optional<Tensor> weight, bias, bn_gamma, bn_beta, bn_mean, bn_var;
};

struct WeightStore {
    std::vector<LayerParams> layers;
};

// Seeded gaussian init (fan-in scaled); batchnorm starts as identity.
WeightStore init_weights(const NetworkSpec& spec, std::uint64_t seed);

// Checks every tensor in the store against the spec-derived geometry,
// naming the offending layer. Folded stores (bias instead of batchnorm) pass.
void validate_weights(const NetworkSpec& spec, const WeightStore& store);

// Binary container, magic "TNW1". Bit-exact round trip at f32 precision.
void save_weights(const WeightStore& store, const std::string& path);
WeightStore load_weights(const std::string& path);

// Symmetric uniform quantization of each layer's kernel; bits in {8,16,24,32}.
WeightStore quantize_weights(const WeightStore& store, int bits);

// Fuses batchnorm statistics into the preceding kernel and bias. Layers
// without statistics pass through; partial statistics or zero variance throw.
WeightStore fold_batchnorm(const WeightStore& store);

// ---------------------------------------------------------------------------

struct HeadMaps {
    Tensor heatmap;                    // (13, S, S), sigmoid activated
    std::optional<Tensor> center;      // (1, S, S), sigmoid activated
    std::optional<Tensor> regression;  // (26, S, S)
    std::optional<Tensor> offset;      // (26, S, S)

    bool multihead() const { return center.has_value(); }
};

struct EncoderResult {
    Tensor latent;  // (C, h, w): charged membrane potential after the last bin
    // Nonzero input cells entering each spiking layer, per layer per time step.
    std::vector<std::vector<double>> spike_counts;

    double total_spikes(std::size_t layer) const;
};

class Network {
public:
    Network(NetworkSpec spec, WeightStore store);

    const NetworkSpec& spec() const { return spec_; }
    const WeightStore& weights() const { return store_; }
    const std::vector<PrimitiveGeom>& primitives() const { return prims_; }

    // Steps all T bins through the spiking stack with fresh state and returns
    // the final layer's charged membrane potential. Thread-safe (state is per
    // call). ANN variants (neuron == None) sum the bins and run feedforward.
    EncoderResult encoder_forward(const SpikeTensor& input) const;

    HeadMaps decoder_forward(const Tensor& latent) const;

    // Internal-layer spike representation guard: layers after the first only
    // accept binary spike tensors.
    static void require_binary_spikes(const Tensor& t, std::size_t layer_index);

private:
    NetworkSpec spec_;
    WeightStore store_;
    std::vector<PrimitiveGeom> prims_;
    std::size_t encoder_prim_begin_ = 0;
    std::size_t decoder_prim_begin_ = 0;

    Tensor run_primitive(std::size_t prim_index, const Tensor& x, bool sparse_input) const;
    Tensor apply_batchnorm_if_present(std::size_t prim_index, Tensor y) const;
};

}  // namespace tonus
