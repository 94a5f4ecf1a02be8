#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fpdn/ops.hpp"
#include "fpdn/rng.hpp"
#include "fpdn/tensor.hpp"

namespace fpdn {

// Encoder-decoder with skip connections: `depth` pooling stages of two 3x3
// zero-padded convs + ReLU, channels doubling per stage, 2x2 max-pool down,
// stride-2 2x2 transposed conv up, channel-concat skips, 1x1 output head.
struct UNetConfig {
    int depth = 4;
    int base_channels = 16;
    int in_channels = 1;
    int out_channels = 1;
    enum class Activation { Sigmoid, Linear };
    Activation output_activation = Activation::Sigmoid;

    int divisor() const { return 1 << depth; }
    int stage_channels(int k) const { return base_channels << k; }
    int bottleneck_channels() const { return base_channels << depth; }
};

inline bool operator==(const UNetConfig& a, const UNetConfig& b) {
    return a.depth == b.depth && a.base_channels == b.base_channels &&
           a.in_channels == b.in_channels && a.out_channels == b.out_channels &&
           a.output_activation == b.output_activation;
}

// Ordered (name, tensor) parameter set. The order is fixed and documented:
// encoder stages 0..depth-1 (conv0 w/b, conv1 w/b), bottleneck (conv0, conv1),
// decoder stages 0..depth-1 deepest-first (up w/b, conv0 w/b, conv1 w/b),
// output head (w/b). Stable across save/load round-trips.
template <typename Scalar>
struct UNetParams {
    UNetConfig config;
    std::vector<std::pair<std::string, Tensor<Scalar>>> entries;
    uint64_t revision = 0;  // bumped on every in-place update

    Tensor<Scalar>& tensor(size_t i) { return entries[i].second; }
    const Tensor<Scalar>& tensor(size_t i) const { return entries[i].second; }
    size_t size() const { return entries.size(); }
};

namespace unet_detail {

struct ParamSlot {
    std::string name;
    std::vector<Index> shape;
};

// The complete parameter table implied by a config, in the canonical order.
inline std::vector<ParamSlot> parameter_table(const UNetConfig& cfg) {
    std::vector<ParamSlot> slots;
    auto conv = [&slots](const std::string& prefix, Index in_c, Index out_c, Index k) {
        slots.push_back({prefix + ".weight", {out_c, in_c, k, k}});
        slots.push_back({prefix + ".bias", {out_c}});
    };
    Index prev = cfg.in_channels;
    for (int k = 0; k < cfg.depth; ++k) {
        const Index ch = cfg.stage_channels(k);
        conv("enc" + std::to_string(k) + ".conv0", prev, ch, 3);
        conv("enc" + std::to_string(k) + ".conv1", ch, ch, 3);
        prev = ch;
    }
    const Index chb = cfg.bottleneck_channels();
    conv("bottleneck.conv0", prev, chb, 3);
    conv("bottleneck.conv1", chb, chb, 3);
    Index cur = chb;
    for (int d = 0; d < cfg.depth; ++d) {
        const int k = cfg.depth - 1 - d;
        const Index ch = cfg.stage_channels(k);
        const std::string prefix = "dec" + std::to_string(d);
        conv(prefix + ".up", cur, ch, 2);
        conv(prefix + ".conv0", 2 * ch, ch, 3);
        conv(prefix + ".conv1", ch, ch, 3);
        cur = ch;
    }
    conv("head", cur, cfg.out_channels, 1);
    return slots;
}

inline ConvSpec spec_for(const std::vector<Index>& weight_shape) {
    ConvSpec spec;
    spec.out_channels = weight_shape[0];
    spec.in_channels = weight_shape[1];
    spec.kernel_h = weight_shape[2];
    spec.kernel_w = weight_shape[3];
    spec.stride = 1;
    spec.padding = weight_shape[2] == 3 ? 1 : 0;
    return spec;
}

}  // namespace unet_detail

// He-style init: weights uniform in +-sqrt(2/fan_in), biases zero. Fully
// determined by the seed.
template <typename Scalar>
UNetParams<Scalar> build_unet(const UNetConfig& cfg, uint64_t seed) {
    if (cfg.depth < 1) throw std::invalid_argument("build_unet: depth must be >= 1");
    if (cfg.base_channels < 1) throw std::invalid_argument("build_unet: base_channels must be >= 1");
    if (cfg.in_channels < 1 || cfg.out_channels < 1)
        throw std::invalid_argument("build_unet: channel counts must be >= 1");

    UNetParams<Scalar> params;
    params.config = cfg;
    std::mt19937_64 rng(seed);
    for (const auto& slot : unet_detail::parameter_table(cfg)) {
        Tensor<Scalar> t(slot.shape);
        if (slot.shape.size() == 4) {
            const double fan_in =
                static_cast<double>(slot.shape[1] * slot.shape[2] * slot.shape[3]);
            const double bound = std::sqrt(2.0 / fan_in);
            for (Index i = 0; i < t.size(); ++i)
                t[i] = static_cast<Scalar>(uniform(rng, -bound, bound));
        }  // biases stay zero
        params.entries.emplace_back(slot.name, std::move(t));
    }
    return params;
}

inline Index unet_parameter_count(const UNetConfig& cfg) {
    Index total = 0;
    for (const auto& slot : unet_detail::parameter_table(cfg))
        total += Tensor<float>::count(slot.shape);
    return total;
}

// Everything backward needs, captured during a train-mode forward.
template <typename Scalar>
struct UNetTape {
    bool train_mode = false;
    uint64_t params_revision = 0;
    std::vector<Tensor<Scalar>> conv_inputs;    // per conv, execution order
    std::vector<Tensor<Scalar>> conv_preacts;   // pre-ReLU values (empty slot for the head)
    std::vector<Tensor<Scalar>> up_inputs;      // per transposed conv
    std::vector<PoolIndices> pool_indices;
    std::vector<std::vector<Index>> pool_shapes;
    Tensor<Scalar> head_output;                 // post-activation
};

template <typename Scalar>
struct UNetGradients {
    std::vector<Tensor<Scalar>> params;  // aligned with UNetParams order
    Tensor<Scalar> input;
};

enum class RunMode { Train, Infer };

template <typename Scalar>
std::pair<Tensor<Scalar>, UNetTape<Scalar>> unet_forward(const UNetParams<Scalar>& params,
                                                         const Tensor<Scalar>& batch,
                                                         RunMode mode) {
    const UNetConfig& cfg = params.config;
    if (batch.rank() != 4)
        throw std::invalid_argument("unet_forward: batch must be rank 4, got " +
                                    shape_string(batch));
    if (batch.dim(1) != cfg.in_channels)
        throw std::invalid_argument("unet_forward: batch channels " + std::to_string(batch.dim(1)) +
                                    " != configured in_channels " +
                                    std::to_string(cfg.in_channels));
    const int div = cfg.divisor();
    if (batch.dim(2) % div != 0 || batch.dim(3) % div != 0)
        throw std::invalid_argument(
            "unet_forward: spatial dims " + std::to_string(batch.dim(2)) + "x" +
            std::to_string(batch.dim(3)) + " not divisible by " + std::to_string(div) +
            "; run the input through resize_to_multiple16 first");

    const bool train = mode == RunMode::Train;
    UNetTape<Scalar> tape;
    tape.train_mode = train;
    tape.params_revision = params.revision;

    size_t p = 0;  // entry cursor in canonical order
    auto conv_relu = [&](Tensor<Scalar> x, bool relu) {
        const auto& w = params.tensor(p);
        const auto& b = params.tensor(p + 1);
        p += 2;
        auto spec = unet_detail::spec_for(w.shape());
        Tensor<Scalar> pre = conv2d_forward(x, w, b, spec);
        if (train) tape.conv_inputs.push_back(std::move(x));
        Tensor<Scalar> out = relu ? relu_forward(pre) : pre;
        if (train) tape.conv_preacts.push_back(relu ? std::move(pre) : Tensor<Scalar>{});
        return out;
    };

    Tensor<Scalar> x = batch;
    std::vector<Tensor<Scalar>> skips;
    for (int k = 0; k < cfg.depth; ++k) {
        x = conv_relu(std::move(x), true);
        x = conv_relu(std::move(x), true);
        skips.push_back(x);
        auto [pooled, idx] = maxpool2x2_forward(x);
        if (train) {
            tape.pool_indices.push_back(std::move(idx));
            tape.pool_shapes.push_back(x.shape());
        }
        x = std::move(pooled);
    }
    x = conv_relu(std::move(x), true);
    x = conv_relu(std::move(x), true);
    for (int d = 0; d < cfg.depth; ++d) {
        const int k = cfg.depth - 1 - d;
        const auto& w = params.tensor(p);
        const auto& b = params.tensor(p + 1);
        p += 2;
        Tensor<Scalar> up = transposed_conv2x2_forward(x, w, b);
        if (train) tape.up_inputs.push_back(std::move(x));
        x = concat_channels(up, skips[static_cast<size_t>(k)]);
        x = conv_relu(std::move(x), true);
        x = conv_relu(std::move(x), true);
    }
    x = conv_relu(std::move(x), false);  // 1x1 head
    if (cfg.output_activation == UNetConfig::Activation::Sigmoid) x = sigmoid_forward(x);
    if (train) tape.head_output = x;
    return {std::move(x), std::move(tape)};
}

template <typename Scalar>
UNetGradients<Scalar> unet_backward(const UNetParams<Scalar>& params, const UNetTape<Scalar>& tape,
                                    const Tensor<Scalar>& grad_output) {
    const UNetConfig& cfg = params.config;
    if (!tape.train_mode)
        throw std::invalid_argument("unet_backward: activations were not captured in train mode");
    if (tape.params_revision != params.revision)
        throw std::invalid_argument(
            "unet_backward: stale activations (params were updated since the forward pass)");
    if (!grad_output.same_shape(tape.head_output))
        throw std::invalid_argument("unet_backward: grad_output shape " +
                                    shape_string(grad_output) + " != forward output shape " +
                                    shape_string(tape.head_output));

    UNetGradients<Scalar> grads;
    grads.params.resize(params.size());

    Tensor<Scalar> g = grad_output;
    if (cfg.output_activation == UNetConfig::Activation::Sigmoid)
        g = sigmoid_backward(g, tape.head_output);

    size_t p = params.size();          // walks entry pairs backwards
    size_t conv = tape.conv_inputs.size();
    size_t up = tape.up_inputs.size();
    size_t pool = tape.pool_indices.size();

    auto conv_back = [&](Tensor<Scalar> gout, bool relu) {
        p -= 2;
        --conv;
        if (relu) gout = relu_backward(gout, tape.conv_preacts[conv]);
        auto spec = unet_detail::spec_for(params.tensor(p).shape());
        auto [gi, gw, gb] =
            conv2d_backward(gout, tape.conv_inputs[conv], params.tensor(p), spec);
        grads.params[p] = std::move(gw);
        grads.params[p + 1] = std::move(gb);
        return std::move(gi);
    };

    std::vector<Tensor<Scalar>> skip_grads(static_cast<size_t>(cfg.depth));

    g = conv_back(std::move(g), false);  // head
    for (int d = cfg.depth - 1; d >= 0; --d) {
        const int k = cfg.depth - 1 - d;
        g = conv_back(std::move(g), true);
        g = conv_back(std::move(g), true);
        auto [g_up, g_skip] = split_channels(g, cfg.stage_channels(k));
        skip_grads[static_cast<size_t>(k)] = std::move(g_skip);
        p -= 2;
        --up;
        auto [g_below, gw, gb] =
            transposed_conv2x2_backward(g_up, tape.up_inputs[up], params.tensor(p));
        grads.params[p] = std::move(gw);
        grads.params[p + 1] = std::move(gb);
        g = std::move(g_below);
    }
    g = conv_back(std::move(g), true);  // bottleneck
    g = conv_back(std::move(g), true);
    for (int k = cfg.depth - 1; k >= 0; --k) {
        --pool;
        Tensor<Scalar> g_pool =
            maxpool2x2_backward(g, tape.pool_indices[pool], tape.pool_shapes[pool]);
        g_pool.array() += skip_grads[static_cast<size_t>(k)].array();
        g = conv_back(std::move(g_pool), true);
        g = conv_back(std::move(g), true);
    }
    grads.input = std::move(g);
    return grads;
}

}  // namespace fpdn
