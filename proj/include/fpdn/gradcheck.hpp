#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fpdn/ops.hpp"
#include "fpdn/rng.hpp"
#include "fpdn/tensor.hpp"
#include "fpdn/unet.hpp"

namespace fpdn {

// Finite-difference verification of backward implementations. All checks run
// in 64-bit with a central-difference step of 1e-5. The loss is a random
// positively-weighted sum of the op output so the whole Jacobian action is
// exercised, not just its column sums.
struct GradcheckReport {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    double step = 0.0;
    Index checked = 0;
    Index skipped = 0;
    std::string worst;  // "input 0 entry 17: analytic=..., numeric=..."
    bool pass = true;
};

namespace gradcheck_detail {

constexpr double kStep = 1e-5;
// Ops that are exactly linear in every single perturbed entry admit any step;
// a larger one suppresses rounding noise enough to meet the 1e-9 gate.
constexpr double kLinearStep = 1e-2;
constexpr double kDeadband = 1e-8;  // entries below this on both sides are skipped

inline Tensor<double> random_tensor(std::vector<Index> shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
}

// Loss weights bounded away from zero so every output entry contributes.
inline Tensor<double> loss_weights(const std::vector<Index>& shape, std::mt19937_64& rng) {
    Tensor<double> w(shape);
    for (Index i = 0; i < w.size(); ++i) {
        const double mag = uniform(rng, 0.25, 1.0);
        w[i] = bernoulli(rng, 0.5) ? mag : -mag;
    }
    return w;
}

}  // namespace gradcheck_detail

using GradcheckForward = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
using GradcheckBackward = std::function<std::vector<Tensor<double>>(
    const std::vector<Tensor<double>>&, const Tensor<double>& grad_out)>;

inline GradcheckReport gradcheck_run(const std::string& name, const GradcheckForward& forward,
                                     const GradcheckBackward& backward,
                                     std::vector<Tensor<double>> inputs, double tolerance,
                                     uint64_t seed, double step = gradcheck_detail::kStep) {
    GradcheckReport report;
    report.name = name;
    report.tolerance = tolerance;
    report.step = step;

    std::mt19937_64 rng(seed);
    const Tensor<double> probe = forward(inputs);
    const Tensor<double> weights = gradcheck_detail::loss_weights(probe.shape(), rng);
    const auto loss = [&](const std::vector<Tensor<double>>& x) {
        return (forward(x).array() * weights.array()).sum();
    };

    const std::vector<Tensor<double>> analytic = backward(inputs, weights);

    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor<double>& x = inputs[k];
        for (Index i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + step;
            const double up = loss(inputs);
            x[i] = saved - step;
            const double down = loss(inputs);
            x[i] = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[k][i];
            if (std::abs(a) < gradcheck_detail::kDeadband &&
                std::abs(numeric) < gradcheck_detail::kDeadband) {
                ++report.skipped;
                continue;
            }
            const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = "input " + std::to_string(k) + " entry " + std::to_string(i) +
                               ": analytic=" + std::to_string(a) +
                               " numeric=" + std::to_string(numeric);
            }
        }
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

// A registered op check: one named gradcheck instance per seed.
struct OpCheck {
    std::string name;
    double tolerance;
    std::function<GradcheckReport(uint64_t seed)> run;
};

inline std::vector<OpCheck> standard_op_checks() {
    using namespace gradcheck_detail;
    std::vector<OpCheck> checks;

    checks.push_back({"conv2d", 1e-9, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        ConvSpec spec;
        spec.in_channels = uniform_int(rng, 1, 3);
        spec.out_channels = uniform_int(rng, 1, 4);
        const Index h = uniform_int(rng, 3, 7), w = uniform_int(rng, 3, 7);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, spec.in_channels, h, w}, rng));
        inputs.push_back(random_tensor({spec.out_channels, spec.in_channels, 3, 3}, rng));
        inputs.push_back(random_tensor({spec.out_channels}, rng));
        return gradcheck_run(
            "conv2d",
            [spec](const std::vector<Tensor<double>>& x) {
                return conv2d_forward(x[0], x[1], x[2], spec);
            },
            [spec](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                auto [gi, gw, gb] = conv2d_backward(g, x[0], x[1], spec);
                return std::vector<Tensor<double>>{gi, gw, gb};
            },
            std::move(inputs), 1e-9, seed + 101, kLinearStep);
    }});

    checks.push_back({"transposed_conv2x2", 1e-9, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        const Index in_c = uniform_int(rng, 1, 3), out_c = uniform_int(rng, 1, 3);
        const Index h = uniform_int(rng, 2, 5), w = uniform_int(rng, 2, 5);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, in_c, h, w}, rng));
        inputs.push_back(random_tensor({out_c, in_c, 2, 2}, rng));
        inputs.push_back(random_tensor({out_c}, rng));
        return gradcheck_run(
            "transposed_conv2x2",
            [](const std::vector<Tensor<double>>& x) {
                return transposed_conv2x2_forward(x[0], x[1], x[2]);
            },
            [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                auto [gi, gw, gb] = transposed_conv2x2_backward(g, x[0], x[1]);
                return std::vector<Tensor<double>>{gi, gw, gb};
            },
            std::move(inputs), 1e-9, seed + 102, kLinearStep);
    }});

    checks.push_back({"maxpool2x2", 1e-9, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        const Index c = uniform_int(rng, 1, 3);
        const Index h = 2 * uniform_int(rng, 2, 4), w = 2 * uniform_int(rng, 2, 4);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, c, h, w}, rng));
        return gradcheck_run(
            "maxpool2x2",
            [](const std::vector<Tensor<double>>& x) { return maxpool2x2_forward(x[0]).first; },
            [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                auto [out, idx] = maxpool2x2_forward(x[0]);
                return std::vector<Tensor<double>>{maxpool2x2_backward(g, idx, x[0].shape())};
            },
            std::move(inputs), 1e-9, seed + 103, 1e-3);
    }});

    checks.push_back({"relu", 1e-6, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, 3, 5, 4}, rng));
        return gradcheck_run(
            "relu",
            [](const std::vector<Tensor<double>>& x) { return relu_forward(x[0]); },
            [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                return std::vector<Tensor<double>>{relu_backward(g, x[0])};
            },
            std::move(inputs), 1e-6, seed + 104);
    }});

    checks.push_back({"sigmoid", 1e-6, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, 3, 5, 4}, rng, -3.0, 3.0));
        return gradcheck_run(
            "sigmoid",
            [](const std::vector<Tensor<double>>& x) { return sigmoid_forward(x[0]); },
            [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                return std::vector<Tensor<double>>{sigmoid_backward(g, sigmoid_forward(x[0]))};
            },
            std::move(inputs), 1e-6, seed + 105);
    }});

    checks.push_back({"concat_channels", 1e-9, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        const Index h = uniform_int(rng, 2, 5), w = uniform_int(rng, 2, 5);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, uniform_int(rng, 1, 3), h, w}, rng));
        inputs.push_back(random_tensor({2, uniform_int(rng, 1, 3), h, w}, rng));
        return gradcheck_run(
            "concat_channels",
            [](const std::vector<Tensor<double>>& x) { return concat_channels(x[0], x[1]); },
            [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                auto [ga, gb] = split_channels(g, x[0].dim(1));
                return std::vector<Tensor<double>>{ga, gb};
            },
            std::move(inputs), 1e-9, seed + 106, kLinearStep);
    }});

    checks.push_back({"mae_loss", 1e-6, [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<Tensor<double>> inputs;
        inputs.push_back(random_tensor({2, 1, 4, 5}, rng));
        const Tensor<double> target = random_tensor({2, 1, 4, 5}, rng);
        return gradcheck_run(
            "mae_loss",
            [target](const std::vector<Tensor<double>>& x) {
                Tensor<double> out({1});
                out[0] = mae_loss(x[0], target).first;
                return out;
            },
            [target](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
                auto [loss, grad] = mae_loss(x[0], target);
                grad.array() *= g[0];
                return std::vector<Tensor<double>>{grad};
            },
            std::move(inputs), 1e-6, seed + 107);
    }});

    return checks;
}

// Whole-network check on a tiny config. Every parameter (biases included) is
// re-drawn uniformly first: at the zero-bias init point a fully dead channel
// leaves the next layer's pre-activations exactly on the ReLU kink, where the
// defined subgradient (0) and a central difference legitimately disagree.
// A generic point keeps all paths live and off the kink.
inline GradcheckReport unet_full_gradcheck(uint64_t seed) {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 2;
    auto proto = build_unet<double>(cfg, seed);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<Tensor<double>> inputs;
    for (auto& [name, t] : proto.entries) {
        for (Index i = 0; i < t.size(); ++i) t[i] = uniform(rng, -0.5, 0.5);
        inputs.push_back(t);
    }
    Tensor<double> batch({1, 1, 8, 8});
    for (Index i = 0; i < batch.size(); ++i) batch[i] = uniform01(rng);
    inputs.push_back(std::move(batch));

    auto assemble = [cfg](const std::vector<Tensor<double>>& x) {
        UNetParams<double> p;
        p.config = cfg;
        const auto table = unet_detail::parameter_table(cfg);
        for (size_t i = 0; i < table.size(); ++i) p.entries.emplace_back(table[i].name, x[i]);
        return p;
    };
    return gradcheck_run(
        "unet_full",
        [assemble](const std::vector<Tensor<double>>& x) {
            auto p = assemble(x);
            return unet_forward(p, x.back(), RunMode::Infer).first;
        },
        [assemble](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
            auto p = assemble(x);
            auto [out, tape] = unet_forward(p, x.back(), RunMode::Train);
            auto grads = unet_backward(p, tape, g);
            std::vector<Tensor<double>> all = std::move(grads.params);
            all.push_back(std::move(grads.input));
            return all;
        },
        std::move(inputs), 1e-5, seed + 11);
}

// Negative control: a backward with one entry doubled must be reported as a
// failure, proving the checker can actually see a wrong gradient.
inline GradcheckReport corrupted_gradient_control(uint64_t seed) {
    std::mt19937_64 rng(seed);
    ConvSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 2;
    std::vector<Tensor<double>> inputs;
    inputs.push_back(gradcheck_detail::random_tensor({1, 2, 4, 4}, rng));
    inputs.push_back(gradcheck_detail::random_tensor({2, 2, 3, 3}, rng));
    inputs.push_back(gradcheck_detail::random_tensor({2}, rng));
    return gradcheck_run(
        "corrupted_conv2d_control",
        [spec](const std::vector<Tensor<double>>& x) {
            return conv2d_forward(x[0], x[1], x[2], spec);
        },
        [spec](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
            auto [gi, gw, gb] = conv2d_backward(g, x[0], x[1], spec);
            Index worst = 0;
            for (Index i = 1; i < gw.size(); ++i)
                if (std::abs(gw[i]) > std::abs(gw[worst])) worst = i;
            gw[worst] *= 2.0;
            return std::vector<Tensor<double>>{gi, gw, gb};
        },
        std::move(inputs), 1e-9, seed + 7);
}

}  // namespace fpdn
