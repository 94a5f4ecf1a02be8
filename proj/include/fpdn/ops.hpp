#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fpdn/tensor.hpp"

namespace fpdn {

// 2-d convolution geometry. Padding is a zero-pad count per side; kernel 3,
// stride 1, padding 1 preserves spatial dims.
struct ConvSpec {
    Index kernel_h = 3;
    Index kernel_w = 3;
    Index stride = 1;
    Index padding = 1;
    Index in_channels = 1;
    Index out_channels = 1;

    Index out_h(Index in_h) const { return (in_h + 2 * padding - kernel_h) / stride + 1; }
    Index out_w(Index in_w) const { return (in_w + 2 * padding - kernel_w) / stride + 1; }
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

template <typename Scalar>
void check_conv_args(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias, const ConvSpec& spec) {
    require(input.rank() == 4, "conv2d: input rank " + std::to_string(input.rank()) + " != 4");
    require(weights.rank() == 4, "conv2d: weights rank " + std::to_string(weights.rank()) + " != 4");
    require(input.dim(1) == spec.in_channels,
            "conv2d: input channels " + std::to_string(input.dim(1)) + " != spec.in_channels " +
                std::to_string(spec.in_channels));
    require(weights.dim(0) == spec.out_channels && weights.dim(1) == spec.in_channels &&
                weights.dim(2) == spec.kernel_h && weights.dim(3) == spec.kernel_w,
            "conv2d: weights shape " + shape_string(weights) + " does not match spec (" +
                std::to_string(spec.out_channels) + "," + std::to_string(spec.in_channels) + "," +
                std::to_string(spec.kernel_h) + "," + std::to_string(spec.kernel_w) + ")");
    require(bias.rank() == 1 && bias.dim(0) == spec.out_channels,
            "conv2d: bias shape " + shape_string(bias) + " != (" +
                std::to_string(spec.out_channels) + ")");
    require(input.dim(2) + 2 * spec.padding >= spec.kernel_h,
            "conv2d: input height " + std::to_string(input.dim(2)) + " too small for kernel");
    require(input.dim(3) + 2 * spec.padding >= spec.kernel_w,
            "conv2d: input width " + std::to_string(input.dim(3)) + " too small for kernel");
}

// Unroll the zero-padded receptive fields of one batch item into a
// (C*KH*KW) x (OH*OW) row-major patch matrix.
template <typename Scalar>
void im2col(const Scalar* img, Index channels, Index height, Index width, const ConvSpec& spec,
            Scalar* col) {
    const Index out_h = spec.out_h(height);
    const Index out_w = spec.out_w(width);
    const Index plane = height * width;
    Scalar* dst = col;
    for (Index c = 0; c < channels; ++c) {
        for (Index kh = 0; kh < spec.kernel_h; ++kh) {
            for (Index kw = 0; kw < spec.kernel_w; ++kw) {
                const Scalar* src = img + c * plane;
                for (Index oh = 0; oh < out_h; ++oh) {
                    const Index ih = oh * spec.stride - spec.padding + kh;
                    if (ih < 0 || ih >= height) {
                        for (Index ow = 0; ow < out_w; ++ow) *dst++ = Scalar(0);
                        continue;
                    }
                    for (Index ow = 0; ow < out_w; ++ow) {
                        const Index iw = ow * spec.stride - spec.padding + kw;
                        *dst++ = (iw < 0 || iw >= width) ? Scalar(0) : src[ih * width + iw];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patch columns back onto the image grid.
template <typename Scalar>
void col2im(const Scalar* col, Index channels, Index height, Index width, const ConvSpec& spec,
            Scalar* img) {
    const Index out_h = spec.out_h(height);
    const Index out_w = spec.out_w(width);
    const Index plane = height * width;
    const Scalar* src = col;
    for (Index c = 0; c < channels; ++c) {
        for (Index kh = 0; kh < spec.kernel_h; ++kh) {
            for (Index kw = 0; kw < spec.kernel_w; ++kw) {
                Scalar* dst = img + c * plane;
                for (Index oh = 0; oh < out_h; ++oh) {
                    const Index ih = oh * spec.stride - spec.padding + kh;
                    if (ih < 0 || ih >= height) {
                        src += out_w;
                        continue;
                    }
                    for (Index ow = 0; ow < out_w; ++ow) {
                        const Index iw = ow * spec.stride - spec.padding + kw;
                        if (iw >= 0 && iw < width) dst[ih * width + iw] += *src;
                        ++src;
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                              const Tensor<Scalar>& bias, const ConvSpec& spec) {
    detail::check_conv_args(input, weights, bias, spec);
    const Index batch = input.dim(0), in_h = input.dim(2), in_w = input.dim(3);
    const Index out_h = spec.out_h(in_h), out_w = spec.out_w(in_w);
    const Index patch = spec.in_channels * spec.kernel_h * spec.kernel_w;

    Tensor<Scalar> output({batch, spec.out_channels, out_h, out_w});
    Tensor<Scalar> col({patch, out_h * out_w});
    auto w_mat = weights.matrix(spec.out_channels, patch);
    for (Index b = 0; b < batch; ++b) {
        detail::im2col(input.data() + b * input.dim(1) * in_h * in_w, spec.in_channels, in_h, in_w,
                       spec, col.data());
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> out_mat(
            output.data() + b * spec.out_channels * out_h * out_w, spec.out_channels, out_h * out_w);
        out_mat.noalias() = w_mat * col.matrix(patch, out_h * out_w);
        for (Index oc = 0; oc < spec.out_channels; ++oc)
            out_mat.row(oc).array() += bias[oc];
    }
    return output;
}

template <typename Scalar>
std::tuple<Tensor<Scalar>, Tensor<Scalar>, Tensor<Scalar>> conv2d_backward(
    const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
    const Tensor<Scalar>& weights, const ConvSpec& spec) {
    Tensor<Scalar> bias_probe({spec.out_channels});
    detail::check_conv_args(saved_input, weights, bias_probe, spec);
    const Index batch = saved_input.dim(0), in_h = saved_input.dim(2), in_w = saved_input.dim(3);
    const Index out_h = spec.out_h(in_h), out_w = spec.out_w(in_w);
    detail::require(grad_out.shape() ==
                        std::vector<Index>{batch, spec.out_channels, out_h, out_w},
                    "conv2d_backward: grad_out shape " + shape_string(grad_out) +
                        " does not match forward output");

    const Index patch = spec.in_channels * spec.kernel_h * spec.kernel_w;
    Tensor<Scalar> grad_input(saved_input.shape());
    Tensor<Scalar> grad_weights(weights.shape());
    Tensor<Scalar> grad_bias({spec.out_channels});

    Tensor<Scalar> col({patch, out_h * out_w});
    Tensor<Scalar> col_grad({patch, out_h * out_w});
    auto w_mat = weights.matrix(spec.out_channels, patch);
    auto gw_mat = grad_weights.matrix(spec.out_channels, patch);
    for (Index b = 0; b < batch; ++b) {
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            go_mat(grad_out.data() + b * spec.out_channels * out_h * out_w, spec.out_channels,
                   out_h * out_w);
        detail::im2col(saved_input.data() + b * spec.in_channels * in_h * in_w, spec.in_channels,
                       in_h, in_w, spec, col.data());
        gw_mat.noalias() += go_mat * col.matrix(patch, out_h * out_w).transpose();
        col_grad.matrix(patch, out_h * out_w).noalias() = w_mat.transpose() * go_mat;
        detail::col2im(col_grad.data(), spec.in_channels, in_h, in_w, spec,
                       grad_input.data() + b * spec.in_channels * in_h * in_w);
        for (Index oc = 0; oc < spec.out_channels; ++oc)
            grad_bias[oc] += go_mat.row(oc).sum();
    }
    return {std::move(grad_input), std::move(grad_weights), std::move(grad_bias)};
}

// Flat argmax positions of a 2x2 max-pool, one entry per pooled output element
// in the output's row-major order. Ties go to the first element of the window
// in row-major order so the backward routing is deterministic.
struct PoolIndices {
    std::vector<Index> shape;        // pooled output shape
    std::vector<int64_t> argmax;     // flat index into the pool's input tensor
};

template <typename Scalar>
std::pair<Tensor<Scalar>, PoolIndices> maxpool2x2_forward(const Tensor<Scalar>& input) {
    detail::require(input.rank() == 4, "maxpool2x2: input rank != 4");
    const Index batch = input.dim(0), channels = input.dim(1);
    const Index in_h = input.dim(2), in_w = input.dim(3);
    detail::require(in_h % 2 == 0, "maxpool2x2: input height " + std::to_string(in_h) + " is odd");
    detail::require(in_w % 2 == 0, "maxpool2x2: input width " + std::to_string(in_w) + " is odd");

    Tensor<Scalar> output({batch, channels, in_h / 2, in_w / 2});
    PoolIndices indices;
    indices.shape = output.shape();
    indices.argmax.resize(static_cast<size_t>(output.size()));

    Index o = 0;
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < channels; ++c)
            for (Index h = 0; h < in_h; h += 2)
                for (Index w = 0; w < in_w; w += 2) {
                    Index best = input.flat4(b, c, h, w);
                    Scalar best_v = input[best];
                    const Index cand[3] = {input.flat4(b, c, h, w + 1),
                                           input.flat4(b, c, h + 1, w),
                                           input.flat4(b, c, h + 1, w + 1)};
                    for (Index k : cand)
                        if (input[k] > best_v) { best = k; best_v = input[k]; }
                    output[o] = best_v;
                    indices.argmax[static_cast<size_t>(o)] = best;
                    ++o;
                }
    return {std::move(output), std::move(indices)};
}

template <typename Scalar>
Tensor<Scalar> maxpool2x2_backward(const Tensor<Scalar>& grad_out, const PoolIndices& indices,
                                   const std::vector<Index>& input_shape) {
    detail::require(grad_out.shape() == indices.shape,
                    "maxpool2x2_backward: grad_out shape " + shape_string(grad_out) +
                        " does not match pooled shape");
    Tensor<Scalar> grad_input(input_shape);
    const Index out_h = indices.shape[2], out_w = indices.shape[3];
    const Index in_w = input_shape[3];
    for (Index o = 0; o < grad_out.size(); ++o) {
        const int64_t src = indices.argmax[static_cast<size_t>(o)];
        // recover the window origin to validate the stored index
        const Index ow = o % out_w, oh = (o / out_w) % out_h;
        const Index bc = o / (out_h * out_w);
        const Index origin = (bc * input_shape[2] + oh * 2) * in_w + ow * 2;
        const Index off = static_cast<Index>(src) - origin;
        if (!(off == 0 || off == 1 || off == in_w || off == in_w + 1))
            throw std::logic_error("maxpool2x2_backward: stored argmax " + std::to_string(src) +
                                   " lies outside its 2x2 window");
        grad_input[static_cast<Index>(src)] += grad_out[o];
    }
    return grad_input;
}

namespace detail {

template <typename Scalar>
void check_tconv_args(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                      const Tensor<Scalar>& bias) {
    require(input.rank() == 4, "transposed_conv2x2: input rank != 4");
    require(weights.rank() == 4 && weights.dim(2) == 2 && weights.dim(3) == 2,
            "transposed_conv2x2: weights shape " + shape_string(weights) + " is not (*,*,2,2)");
    require(weights.dim(1) == input.dim(1),
            "transposed_conv2x2: weights in_channels " + std::to_string(weights.dim(1)) +
                " != input channels " + std::to_string(input.dim(1)));
    require(bias.rank() == 1 && bias.dim(0) == weights.dim(0),
            "transposed_conv2x2: bias shape " + shape_string(bias) + " != (" +
                std::to_string(weights.dim(0)) + ")");
}

}  // namespace detail

// Stride-2 up-sampling, the exact adjoint of a stride-2 2x2 convolution whose
// weights have the leading two axes swapped. Weights: (out_channels,
// in_channels, 2, 2). Output spatial dims are exactly doubled.
template <typename Scalar>
Tensor<Scalar> transposed_conv2x2_forward(const Tensor<Scalar>& input,
                                          const Tensor<Scalar>& weights,
                                          const Tensor<Scalar>& bias) {
    detail::check_tconv_args(input, weights, bias);
    const Index batch = input.dim(0), in_c = input.dim(1);
    const Index in_h = input.dim(2), in_w = input.dim(3);
    const Index out_c = weights.dim(0);

    Tensor<Scalar> output({batch, out_c, in_h * 2, in_w * 2});
    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < out_c; ++oc) {
            Scalar* out_plane = output.data() + output.flat4(b, oc, 0, 0);
            for (Index ic = 0; ic < in_c; ++ic) {
                const Scalar* in_plane = input.data() + input.flat4(b, ic, 0, 0);
                const Scalar w00 = weights(oc, ic, 0, 0), w01 = weights(oc, ic, 0, 1);
                const Scalar w10 = weights(oc, ic, 1, 0), w11 = weights(oc, ic, 1, 1);
                for (Index h = 0; h < in_h; ++h) {
                    Scalar* row0 = out_plane + (2 * h) * (2 * in_w);
                    Scalar* row1 = row0 + 2 * in_w;
                    const Scalar* src = in_plane + h * in_w;
                    for (Index w = 0; w < in_w; ++w) {
                        const Scalar v = src[w];
                        row0[2 * w] += v * w00;
                        row0[2 * w + 1] += v * w01;
                        row1[2 * w] += v * w10;
                        row1[2 * w + 1] += v * w11;
                    }
                }
            }
            Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(out_plane, 4 * in_h * in_w) +=
                bias[oc];
        }
    return output;
}

template <typename Scalar>
std::tuple<Tensor<Scalar>, Tensor<Scalar>, Tensor<Scalar>> transposed_conv2x2_backward(
    const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
    const Tensor<Scalar>& weights) {
    Tensor<Scalar> bias_probe({weights.dim(0)});
    detail::check_tconv_args(saved_input, weights, bias_probe);
    const Index batch = saved_input.dim(0), in_c = saved_input.dim(1);
    const Index in_h = saved_input.dim(2), in_w = saved_input.dim(3);
    const Index out_c = weights.dim(0);
    detail::require(grad_out.shape() == std::vector<Index>{batch, out_c, in_h * 2, in_w * 2},
                    "transposed_conv2x2_backward: grad_out shape " + shape_string(grad_out) +
                        " does not match forward output");

    Tensor<Scalar> grad_input(saved_input.shape());
    Tensor<Scalar> grad_weights(weights.shape());
    Tensor<Scalar> grad_bias({out_c});

    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < out_c; ++oc) {
            const Scalar* go_plane = grad_out.data() + grad_out.flat4(b, oc, 0, 0);
            grad_bias[oc] +=
                Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(go_plane, 4 * in_h * in_w)
                    .sum();
            for (Index ic = 0; ic < in_c; ++ic) {
                const Scalar* in_plane = saved_input.data() + saved_input.flat4(b, ic, 0, 0);
                Scalar* gi_plane = grad_input.data() + grad_input.flat4(b, ic, 0, 0);
                const Scalar w00 = weights(oc, ic, 0, 0), w01 = weights(oc, ic, 0, 1);
                const Scalar w10 = weights(oc, ic, 1, 0), w11 = weights(oc, ic, 1, 1);
                Scalar gw00 = 0, gw01 = 0, gw10 = 0, gw11 = 0;
                for (Index h = 0; h < in_h; ++h) {
                    const Scalar* row0 = go_plane + (2 * h) * (2 * in_w);
                    const Scalar* row1 = row0 + 2 * in_w;
                    const Scalar* src = in_plane + h * in_w;
                    Scalar* gi = gi_plane + h * in_w;
                    for (Index w = 0; w < in_w; ++w) {
                        const Scalar g00 = row0[2 * w], g01 = row0[2 * w + 1];
                        const Scalar g10 = row1[2 * w], g11 = row1[2 * w + 1];
                        gi[w] += g00 * w00 + g01 * w01 + g10 * w10 + g11 * w11;
                        const Scalar v = src[w];
                        gw00 += v * g00;
                        gw01 += v * g01;
                        gw10 += v * g10;
                        gw11 += v * g11;
                    }
                }
                grad_weights(oc, ic, 0, 0) += gw00;
                grad_weights(oc, ic, 0, 1) += gw01;
                grad_weights(oc, ic, 1, 0) += gw10;
                grad_weights(oc, ic, 1, 1) += gw11;
            }
        }
    return {std::move(grad_input), std::move(grad_weights), std::move(grad_bias)};
}

// Channel concatenation; a occupies the leading channels of the result.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::require(a.rank() == 4 && b.rank() == 4, "concat_channels: inputs must be rank 4");
    detail::require(a.dim(0) == b.dim(0),
                    "concat_channels: batch " + std::to_string(a.dim(0)) + " != " +
                        std::to_string(b.dim(0)));
    detail::require(a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                    "concat_channels: spatial dims " + shape_string(a) + " vs " + shape_string(b) +
                        " disagree (architecture wiring bug)");
    const Index batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const Index plane = a.dim(2) * a.dim(3);
    Tensor<Scalar> out({batch, ca + cb, a.dim(2), a.dim(3)});
    for (Index n = 0; n < batch; ++n) {
        std::copy(a.data() + n * ca * plane, a.data() + (n + 1) * ca * plane,
                  out.data() + n * (ca + cb) * plane);
        std::copy(b.data() + n * cb * plane, b.data() + (n + 1) * cb * plane,
                  out.data() + n * (ca + cb) * plane + ca * plane);
    }
    return out;
}

// Backward of concat_channels: split the gradient back into the addends.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad,
                                                         Index channels_a) {
    detail::require(grad.rank() == 4, "split_channels: input must be rank 4");
    detail::require(channels_a >= 0 && channels_a <= grad.dim(1),
                    "split_channels: leading channel count " + std::to_string(channels_a) +
                        " out of range");
    const Index batch = grad.dim(0), cb = grad.dim(1) - channels_a;
    const Index plane = grad.dim(2) * grad.dim(3);
    Tensor<Scalar> ga({batch, channels_a, grad.dim(2), grad.dim(3)});
    Tensor<Scalar> gb({batch, cb, grad.dim(2), grad.dim(3)});
    for (Index n = 0; n < batch; ++n) {
        const Scalar* src = grad.data() + n * (channels_a + cb) * plane;
        std::copy(src, src + channels_a * plane, ga.data() + n * channels_a * plane);
        std::copy(src + channels_a * plane, src + (channels_a + cb) * plane,
                  gb.data() + n * cb * plane);
    }
    return {std::move(ga), std::move(gb)};
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& input) {
    Tensor<Scalar> out(input.shape());
    out.array() = input.array().max(Scalar(0));
    return out;
}

// Subgradient 0 at x == 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input) {
    detail::require(grad_out.same_shape(saved_input), "relu_backward: shape mismatch");
    Tensor<Scalar> out(grad_out.shape());
    out.array() = (saved_input.array() > Scalar(0)).select(grad_out.array(), Scalar(0));
    return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_forward(const Tensor<Scalar>& input) {
    Tensor<Scalar> out(input.shape());
    out.array() = Scalar(1) / (Scalar(1) + (-input.array()).exp());
    return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& grad_out,
                                const Tensor<Scalar>& saved_output) {
    detail::require(grad_out.same_shape(saved_output), "sigmoid_backward: shape mismatch");
    Tensor<Scalar> out(grad_out.shape());
    out.array() =
        grad_out.array() * saved_output.array() * (Scalar(1) - saved_output.array());
    return out;
}

// Mean absolute error over all elements, with its gradient w.r.t. pred.
// sign(0) = 0 keeps the subgradient bounded.
template <typename Scalar>
std::pair<Scalar, Tensor<Scalar>> mae_loss(const Tensor<Scalar>& pred,
                                           const Tensor<Scalar>& target) {
    detail::require(pred.same_shape(target),
                    "mae_loss: pred shape " + shape_string(pred) + " != target shape " +
                        shape_string(target));
    const Scalar n = static_cast<Scalar>(pred.size());
    Tensor<Scalar> grad(pred.shape());
    auto diff = pred.array() - target.array();
    grad.array() = diff.sign() / n;
    return {diff.abs().sum() / n, std::move(grad)};
}

}  // namespace fpdn
