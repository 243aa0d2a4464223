#include "tonus/network.hpp"

#include <algorithm>
#include <cmath>

#include "tonus/conv.hpp"
#include "tonus/rng.hpp"

namespace tonus {

void LayerSpec::validate() const {
    if (kernel % 2 == 0 || kernel == 0) throw ValidationError("layer: kernel must be odd");
    if (stride != 1 && stride != 2) throw ValidationError("layer: stride must be 1 or 2");
    if (out_channels < 1) throw ValidationError("layer: out_channels must be >= 1");
    if (dilation < 1) throw ValidationError("layer: dilation must be >= 1");
}

NetworkSpec NetworkSpec::standard(NeuronKind neuron, HeadsMode heads) {
    NetworkSpec spec;
    spec.heads = heads;

    const std::size_t enc_kernels[8] = {5, 5, 5, 5, 3, 5, 3, 3};
    const std::size_t enc_channels[8] = {16, 32, 32, 64, 64, 128, 128, 128};
    const std::size_t enc_strides[8] = {2, 2, 2, 1, 1, 2, 1, 1};
    for (int i = 0; i < 8; ++i) {
        LayerSpec l;
        l.kind = LayerKind::SpikingConv;
        l.kernel = enc_kernels[i];
        l.stride = enc_strides[i];
        l.out_channels = enc_channels[i];
        l.neuron = neuron;
        spec.encoder.push_back(l);
    }

    auto trunk = [](LayerKind kind, std::size_t k, std::size_t s, std::size_t c,
                    std::size_t dil, bool bn) {
        LayerSpec l;
        l.kind = kind;
        l.kernel = k;
        l.stride = s;
        l.out_channels = c;
        l.dilation = dil;
        l.batchnorm = bn;
        return l;
    };
    spec.decoder.push_back(trunk(LayerKind::ConvTranspose, 5, 1, 64, 1, false));
    spec.decoder.push_back(trunk(LayerKind::ResBlock, 3, 2, 64, 2, true));
    spec.decoder.push_back(trunk(LayerKind::ConvTranspose, 5, 2, 32, 1, false));
    spec.decoder.push_back(trunk(LayerKind::ResBlock, 3, 1, 32, 2, true));
    spec.decoder.push_back(trunk(LayerKind::Conv, 3, 1, 24, 1, false));
    return spec;
}

void NetworkSpec::set_encoder_neuron(NeuronKind kind) {
    for (auto& l : encoder) l.neuron = kind;
}

void NetworkSpec::validate() const {
    if (model_width < 1 || model_height < 1) {
        throw ValidationError("network: model dimensions must be >= 1");
    }
    if (encoder.empty()) throw ValidationError("network: encoder must have layers");
    std::size_t ann_layers = 0;
    for (const auto& l : encoder) {
        l.validate();
        if (l.kind != LayerKind::SpikingConv) {
            throw ValidationError("network: encoder layers must be spiking_conv");
        }
        if (l.neuron == NeuronKind::None) ++ann_layers;
    }
    if (ann_layers != 0 && ann_layers != encoder.size()) {
        throw ValidationError("network: neuron=none must apply to the whole encoder");
    }
    std::size_t cin = encoder.back().out_channels;
    for (const auto& l : decoder) {
        l.validate();
        if (l.kind == LayerKind::SpikingConv) {
            throw ValidationError("network: decoder layers must be non-spiking");
        }
        if (l.kind == LayerKind::ResBlock && l.out_channels != cin) {
            throw ValidationError("network: residual block must preserve channel count");
        }
        cin = l.out_channels;
    }
    cuba.validate();
    plif.validate();
    if (head_branch_channels < 1) {
        throw ValidationError("network: head_branch_channels must be >= 1");
    }
}

namespace {

std::size_t stage_out_size(const LayerSpec& l, std::size_t in) {
    switch (l.kind) {
        case LayerKind::SpikingConv:
        case LayerKind::Conv:
            return conv_out_size(in, l.kernel, l.stride, l.dilation);
        case LayerKind::ConvTranspose:
            return conv_transpose_out_size(in, l.kernel, l.stride);
        case LayerKind::ResBlock:
            return l.stride == 2 ? in * 2 : in;
        case LayerKind::SepConvBlock:
            return in;
    }
    return in;
}

}  // namespace

std::vector<std::size_t> NetworkSpec::encoder_output_sizes() const {
    std::vector<std::size_t> sizes;
    std::size_t cur = model_height;
    for (const auto& l : encoder) {
        cur = stage_out_size(l, cur);
        sizes.push_back(cur);
    }
    return sizes;
}

std::vector<std::size_t> NetworkSpec::decoder_output_sizes() const {
    std::vector<std::size_t> sizes;
    std::size_t cur = encoder_output_sizes().back();
    for (const auto& l : decoder) {
        cur = stage_out_size(l, cur);
        sizes.push_back(cur);
    }
    sizes.push_back(cur);  // separable head block keeps size
    sizes.push_back(cur);  // 1x1 head output keeps size
    return sizes;
}

std::vector<std::size_t> PrimitiveGeom::weight_dims() const {
    if (kind == PrimitiveKind::ConvTranspose) return {in_channels, out_channels, kernel, kernel};
    return {out_channels, in_channels / groups, kernel, kernel};
}

std::vector<PrimitiveGeom> flatten_primitives(const NetworkSpec& spec) {
    spec.validate();
    std::vector<PrimitiveGeom> prims;

    auto push = [&prims](PrimitiveGeom g) { prims.push_back(std::move(g)); };
    auto base = [](const std::string& name, PrimitiveKind kind, std::size_t cin, std::size_t cout,
                   std::size_t k, std::size_t s, std::size_t dil, std::size_t groups, bool bias,
                   bool bn, bool spiking, std::size_t in_sz, std::size_t out_sz) {
        PrimitiveGeom g;
        g.name = name;
        g.kind = kind;
        g.in_channels = cin;
        g.out_channels = cout;
        g.kernel = k;
        g.stride = s;
        g.dilation = dil;
        g.groups = groups;
        g.has_bias = bias;
        g.has_batchnorm = bn;
        g.spiking = spiking;
        g.in_h = g.in_w = in_sz;
        g.out_h = g.out_w = out_sz;
        return g;
    };

    std::size_t cur = spec.model_height;
    std::size_t cin = 2;  // polarity channels
    for (std::size_t i = 0; i < spec.encoder.size(); ++i) {
        const auto& l = spec.encoder[i];
        const std::size_t out = stage_out_size(l, cur);
        const bool spiking = l.neuron != NeuronKind::None;
        push(base("encoder." + std::to_string(i), PrimitiveKind::Conv, cin, l.out_channels,
                  l.kernel, l.stride, l.dilation, 1, false, l.batchnorm, spiking, cur, out));
        cur = out;
        cin = l.out_channels;
    }

    for (std::size_t i = 0; i < spec.decoder.size(); ++i) {
        const auto& l = spec.decoder[i];
        const std::string name = "decoder." + std::to_string(i);
        const std::size_t out = stage_out_size(l, cur);
        switch (l.kind) {
            case LayerKind::ConvTranspose:
                push(base(name, PrimitiveKind::ConvTranspose, cin, l.out_channels, l.kernel,
                          l.stride, 1, 1, !l.batchnorm, l.batchnorm, false, cur, out));
                break;
            case LayerKind::ResBlock: {
                // Sublayers run at the (possibly upsampled) output size.
                push(base(name + ".conv1", PrimitiveKind::Conv, cin, l.out_channels, l.kernel, 1,
                          l.dilation, 1, !l.batchnorm, l.batchnorm, false, out, out));
                push(base(name + ".conv2", PrimitiveKind::Conv, l.out_channels, l.out_channels,
                          l.kernel, 1, l.dilation, 1, !l.batchnorm, l.batchnorm, false, out, out));
                break;
            }
            case LayerKind::Conv:
                push(base(name, PrimitiveKind::Conv, cin, l.out_channels, l.kernel, l.stride,
                          l.dilation, 1, !l.batchnorm, l.batchnorm, false, cur, out));
                break;
            case LayerKind::SepConvBlock:
                push(base(name + ".depthwise", PrimitiveKind::DepthwiseConv, cin, cin, l.kernel,
                          1, 1, cin, false, false, false, cur, out));
                push(base(name + ".pointwise", PrimitiveKind::Conv, cin, l.out_channels, 1, 1, 1,
                          1, false, true, false, out, out));
                break;
            case LayerKind::SpikingConv:
                throw ValidationError("network: decoder layers must be non-spiking");
        }
        cur = out;
        cin = l.out_channels;
    }

    const std::size_t n_heads = spec.num_heads();
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::string name = std::string("head.") + kHeadNames[h];
        push(base(name + ".depthwise", PrimitiveKind::DepthwiseConv, cin, cin, 3, 1, 1, cin,
                  false, false, false, cur, cur));
        push(base(name + ".pointwise", PrimitiveKind::Conv, cin, spec.head_branch_channels, 1, 1,
                  1, 1, false, true, false, cur, cur));
        push(base(name + ".out", PrimitiveKind::Conv, spec.head_branch_channels, kHeadChannels[h],
                  1, 1, 1, 1, true, false, false, cur, cur));
    }
    return prims;
}

WeightStore init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    const auto prims = flatten_primitives(spec);
    Rng rng(seed);
    WeightStore store;
    for (const auto& g : prims) {
        LayerParams p;
        p.kind = static_cast<std::uint8_t>(g.kind);
        const auto wd = g.weight_dims();
        Tensor w(wd);
        const std::size_t fan_in = (g.in_channels / g.groups) * g.kernel * g.kernel;
        const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < w.size(); ++i) {
            // Values are clipped through f32 so a saved store reloads bit-exactly.
            w[i] = static_cast<double>(static_cast<float>(rng.gaussian(0.0, stddev)));
        }
        p.weight = std::move(w);
        if (g.has_bias) p.bias = Tensor({g.out_channels});
        if (g.has_batchnorm) {
            p.bn_gamma = Tensor({g.out_channels}, 1.0);
            p.bn_beta = Tensor({g.out_channels});
            p.bn_mean = Tensor({g.out_channels});
            p.bn_var = Tensor({g.out_channels}, 1.0);
        }
        store.layers.push_back(std::move(p));
    }
    return store;
}

namespace {

void check_dims(const std::optional<Tensor>& t, const std::vector<std::size_t>& want,
                const std::string& layer, const char* which) {
    if (!t) return;
    if (t->shape() != want) {
        Tensor expect(want);
        throw ValidationError("weights: layer " + layer + " " + which + " has shape " +
                              t->shape_str() + ", expected " + expect.shape_str());
    }
}

}  // namespace

void validate_weights(const NetworkSpec& spec, const WeightStore& store) {
    const auto prims = flatten_primitives(spec);
    if (store.layers.size() != prims.size()) {
        throw ValidationError("weights: store has " + std::to_string(store.layers.size()) +
                              " layers, spec needs " + std::to_string(prims.size()));
    }
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const auto& g = prims[i];
        const auto& p = store.layers[i];
        if (p.kind != static_cast<std::uint8_t>(g.kind)) {
            throw ValidationError("weights: layer " + g.name + " has kind " +
                                  std::to_string(p.kind) + ", expected " +
                                  std::to_string(static_cast<int>(g.kind)));
        }
        if (!p.weight) throw ValidationError("weights: layer " + g.name + " missing kernel");
        check_dims(p.weight, g.weight_dims(), g.name, "kernel");
        const std::vector<std::size_t> per_channel = {g.out_channels};
        check_dims(p.bias, per_channel, g.name, "bias");
        check_dims(p.bn_gamma, per_channel, g.name, "bn_gamma");
        check_dims(p.bn_beta, per_channel, g.name, "bn_beta");
        check_dims(p.bn_mean, per_channel, g.name, "bn_mean");
        check_dims(p.bn_var, per_channel, g.name, "bn_var");
        const bool has_bn = p.bn_gamma && p.bn_beta && p.bn_mean && p.bn_var;
        const bool some_bn = p.bn_gamma || p.bn_beta || p.bn_mean || p.bn_var;
        if (some_bn && !has_bn) {
            throw ValidationError("weights: layer " + g.name + " has partial batchnorm stats");
        }
        if (g.has_batchnorm && !has_bn && !p.bias) {
            throw ValidationError("weights: layer " + g.name +
                                  " needs batchnorm stats (or a folded bias)");
        }
    }
}

WeightStore quantize_weights(const WeightStore& store, int bits) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32) {
        throw ValidationError("quantize: bits must be one of 8, 16, 24, 32");
    }
    WeightStore out = store;
    const double levels = std::pow(2.0, bits - 1) - 1.0;
    for (auto& p : out.layers) {
        if (!p.weight) continue;
        double max_abs = 0.0;
        for (std::size_t i = 0; i < p.weight->size(); ++i) {
            max_abs = std::max(max_abs, std::fabs((*p.weight)[i]));
        }
        p.quant_bits = static_cast<std::uint8_t>(bits);
        if (max_abs == 0.0) {
            p.quant_scale = 0.0;
            continue;
        }
        const double delta = max_abs / levels;
        p.quant_scale = delta;
        for (std::size_t i = 0; i < p.weight->size(); ++i) {
            (*p.weight)[i] = std::round((*p.weight)[i] / delta) * delta;
        }
    }
    return out;
}

WeightStore fold_batchnorm(const WeightStore& store) {
    WeightStore out = store;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        auto& p = out.layers[li];
        const bool has_bn = p.bn_gamma && p.bn_beta && p.bn_mean && p.bn_var;
        const bool some_bn = p.bn_gamma || p.bn_beta || p.bn_mean || p.bn_var;
        if (!some_bn) continue;
        if (!has_bn) {
            throw ValidationError("fold_batchnorm: layer " + std::to_string(li) +
                                  " has partial statistics");
        }
        if (!p.weight) {
            throw ValidationError("fold_batchnorm: layer " + std::to_string(li) + " has no kernel");
        }
        const std::size_t c_out = p.bn_gamma->size();
        for (std::size_t c = 0; c < c_out; ++c) {
            if ((*p.bn_var)[c] <= 0.0) {
                throw ValidationError("fold_batchnorm: layer " + std::to_string(li) +
                                      " variance must be positive (channel " + std::to_string(c) +
                                      ")");
            }
        }
        // Kernel layout puts the output channel first for Conv/Depthwise and
        // second for ConvTranspose.
        const bool transpose = p.kind == static_cast<std::uint8_t>(PrimitiveKind::ConvTranspose);
        auto& w = *p.weight;
        const std::size_t d0 = w.dim(0), d1 = w.dim(1), kk = w.dim(2) * w.dim(3);
        Tensor bias = p.bias ? *p.bias : Tensor({c_out});
        for (std::size_t c = 0; c < c_out; ++c) {
            const double scale = (*p.bn_gamma)[c] / std::sqrt((*p.bn_var)[c] + kBatchnormEps);
            if (transpose) {
                for (std::size_t a = 0; a < d0; ++a) {
                    double* block = w.data() + (a * d1 + c) * kk;
                    for (std::size_t i = 0; i < kk; ++i) block[i] *= scale;
                }
            } else {
                double* block = w.data() + c * d1 * kk;
                for (std::size_t i = 0; i < d1 * kk; ++i) block[i] *= scale;
            }
            bias[c] = (bias[c] - (*p.bn_mean)[c]) * scale + (*p.bn_beta)[c];
        }
        p.bias = std::move(bias);
        p.bn_gamma.reset();
        p.bn_beta.reset();
        p.bn_mean.reset();
        p.bn_var.reset();
    }
    return out;
}

// ---------------------------------------------------------------------------

double EncoderResult::total_spikes(std::size_t layer) const {
    double s = 0.0;
    for (double v : spike_counts[layer]) s += v;
    return s;
}

Network::Network(NetworkSpec spec, WeightStore store)
    : spec_(std::move(spec)), store_(std::move(store)) {
    spec_.validate();
    validate_weights(spec_, store_);
    prims_ = flatten_primitives(spec_);
    encoder_prim_begin_ = 0;
    decoder_prim_begin_ = spec_.encoder.size();
}

void Network::require_binary_spikes(const Tensor& t, std::size_t layer_index) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != 0.0 && t[i] != 1.0) {
            throw ValidationError("encoder: non-binary spikes entering layer " +
                                  std::to_string(layer_index));
        }
    }
}

namespace {

Tensor slice_bin(const SpikeTensor& input, std::size_t t) {
    Tensor x({input.values.dim(1), input.values.dim(2), input.values.dim(3)});
    const std::size_t plane = x.size();
    const double* src = input.values.data() + t * plane;
    std::copy(src, src + plane, x.data());
    return x;
}

Tensor upsample2_nearest(const Tensor& x) {
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor y({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t yy = 0; yy < 2 * h; ++yy) {
            const double* row = x.data() + (ch * h + yy / 2) * w;
            double* out = y.data() + (ch * 2 * h + yy) * 2 * w;
            for (std::size_t xx = 0; xx < 2 * w; ++xx) out[xx] = row[xx / 2];
        }
    }
    return y;
}

void relu_inplace(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] > 0.0 ? t[i] : 0.0;
}

void sigmoid_inplace(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = sigmoid(t[i]);
}

}  // namespace

Tensor Network::run_primitive(std::size_t prim_index, const Tensor& x, bool sparse_input) const {
    const auto& g = prims_[prim_index];
    const auto& p = store_.layers[prim_index];
    const double* bias = p.bias ? p.bias->data() : nullptr;
    switch (g.kind) {
        case PrimitiveKind::ConvTranspose:
            return conv_transpose2d(x, *p.weight, bias, g.stride);
        case PrimitiveKind::DepthwiseConv:
            return conv2d(x, *p.weight, bias, g.stride, g.dilation, g.groups);
        case PrimitiveKind::Conv:
        default: {
            // Spike tensors are mostly zeros; scatter only the active cells.
            if (sparse_input && x.count_nonzero() * 8 < x.size()) {
                return conv2d_sparse(x, *p.weight, bias, g.stride, g.dilation, g.groups);
            }
            return conv2d(x, *p.weight, bias, g.stride, g.dilation, g.groups);
        }
    }
}

Tensor Network::apply_batchnorm_if_present(std::size_t prim_index, Tensor y) const {
    const auto& p = store_.layers[prim_index];
    if (p.bn_gamma && p.bn_beta && p.bn_mean && p.bn_var) {
        return batchnorm2d(y, *p.bn_gamma, *p.bn_beta, *p.bn_mean, *p.bn_var, kBatchnormEps);
    }
    return y;
}

EncoderResult Network::encoder_forward(const SpikeTensor& input) const {
    if (input.values.rank() != 4 || input.values.dim(1) != 2 ||
        input.values.dim(2) != spec_.model_height || input.values.dim(3) != spec_.model_width) {
        throw ValidationError("encoder: input " + input.values.shape_str() +
                              " does not match model resolution " +
                              std::to_string(spec_.model_width) + "x" +
                              std::to_string(spec_.model_height));
    }
    const std::size_t n_layers = spec_.encoder.size();
    const std::size_t num_bins = input.num_bins();
    const auto sizes = spec_.encoder_output_sizes();

    EncoderResult result;
    result.spike_counts.assign(n_layers, {});

    const bool ann = spec_.encoder.front().neuron == NeuronKind::None;
    if (ann) {
        // Feedforward variant: time-summed input, ReLU between layers, linear
        // read-out of the last layer.
        Tensor act({2, spec_.model_height, spec_.model_width});
        for (std::size_t t = 0; t < num_bins; ++t) {
            const Tensor bin = slice_bin(input, t);
            for (std::size_t i = 0; i < act.size(); ++i) act[i] += bin[i];
        }
        for (std::size_t l = 0; l < n_layers; ++l) {
            result.spike_counts[l].push_back(static_cast<double>(act.count_nonzero()));
            Tensor z = run_primitive(encoder_prim_begin_ + l, act, false);
            if (l + 1 < n_layers) {
                relu_inplace(z);
                act = std::move(z);
            } else {
                result.latent = std::move(z);
            }
        }
        return result;
    }

    // Fresh neuron state per forward pass.
    std::vector<CubaState> cuba_states;
    std::vector<PlifState> plif_states;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::vector<std::size_t> shape = {spec_.encoder[l].out_channels, sizes[l], sizes[l]};
        if (spec_.encoder[l].neuron == NeuronKind::Cuba) {
            cuba_states.emplace_back(shape);
            plif_states.emplace_back();
        } else {
            cuba_states.emplace_back();
            plif_states.emplace_back(shape, spec_.plif.v_reset);
        }
        result.spike_counts[l].assign(num_bins, 0.0);
    }

    for (std::size_t t = 0; t < num_bins; ++t) {
        Tensor act = slice_bin(input, t);
        for (std::size_t l = 0; l < n_layers; ++l) {
            if (l > 0) require_binary_spikes(act, l);
            result.spike_counts[l][t] = static_cast<double>(act.count_nonzero());
            Tensor z = run_primitive(encoder_prim_begin_ + l, act, true);
            NeuronStepResult step = spec_.encoder[l].neuron == NeuronKind::Cuba
                                        ? cuba_step(cuba_states[l], z, spec_.cuba)
                                        : plif_step(plif_states[l], z, spec_.plif);
            if (l + 1 == n_layers && t + 1 == num_bins) {
                result.latent = std::move(step.potential);
            }
            act = std::move(step.spikes);
        }
    }
    return result;
}

HeadMaps Network::decoder_forward(const Tensor& latent) const {
    const auto enc_sizes = spec_.encoder_output_sizes();
    const std::size_t latent_c = spec_.encoder.back().out_channels;
    if (latent.rank() != 3 || latent.dim(0) != latent_c || latent.dim(1) != enc_sizes.back() ||
        latent.dim(2) != enc_sizes.back()) {
        throw ValidationError("decoder: latent shape " + latent.shape_str() + " does not match");
    }

    std::size_t pi = decoder_prim_begin_;
    Tensor x = latent;
    for (const auto& l : spec_.decoder) {
        switch (l.kind) {
            case LayerKind::ConvTranspose:
                x = apply_batchnorm_if_present(pi, run_primitive(pi, x, false));
                pi += 1;
                break;
            case LayerKind::ResBlock: {
                Tensor in = l.stride == 2 ? upsample2_nearest(x) : std::move(x);
                Tensor y = apply_batchnorm_if_present(pi, run_primitive(pi, in, false));
                y = apply_batchnorm_if_present(pi + 1, run_primitive(pi + 1, y, false));
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += in[i];
                x = std::move(y);
                pi += 2;
                break;
            }
            case LayerKind::Conv:
                x = apply_batchnorm_if_present(pi, run_primitive(pi, x, false));
                pi += 1;
                break;
            case LayerKind::SepConvBlock: {
                Tensor y = run_primitive(pi, x, false);
                y = apply_batchnorm_if_present(pi + 1, run_primitive(pi + 1, y, false));
                relu_inplace(y);
                x = std::move(y);
                pi += 2;
                break;
            }
            case LayerKind::SpikingConv:
                throw ValidationError("decoder: unexpected spiking layer");
        }
    }

    HeadMaps maps;
    const std::size_t n_heads = spec_.num_heads();
    for (std::size_t h = 0; h < n_heads; ++h) {
        Tensor y = run_primitive(pi, x, false);
        y = apply_batchnorm_if_present(pi + 1, run_primitive(pi + 1, y, false));
        relu_inplace(y);
        Tensor out = run_primitive(pi + 2, y, false);
        pi += 3;
        switch (h) {
            case 0:
                sigmoid_inplace(out);
                maps.heatmap = std::move(out);
                break;
            case 1:
                sigmoid_inplace(out);
                maps.center = std::move(out);
                break;
            case 2:
                maps.regression = std::move(out);
                break;
            case 3:
                maps.offset = std::move(out);
                break;
        }
    }
    return maps;
}

}  // namespace tonus
