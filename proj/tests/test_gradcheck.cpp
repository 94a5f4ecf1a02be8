#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fpdn/gradcheck.hpp"

using namespace fpdn;

TEST_CASE("gradcheck accepts a linear op with a known Jacobian at tight tolerance") {
    // y = 3x + 2z is linear; central differences are exact up to rounding.
    std::mt19937_64 rng(5);
    std::vector<Tensor<double>> inputs;
    inputs.push_back(gradcheck_detail::random_tensor({1, 1, 4, 4}, rng));
    inputs.push_back(gradcheck_detail::random_tensor({1, 1, 4, 4}, rng));
    auto report = gradcheck_run(
        "linear",
        [](const std::vector<Tensor<double>>& x) {
            Tensor<double> y(x[0].shape());
            y.array() = 3.0 * x[0].array() + 2.0 * x[1].array();
            return y;
        },
        [](const std::vector<Tensor<double>>& x, const Tensor<double>& g) {
            Tensor<double> ga(g.shape()), gb(g.shape());
            ga.array() = 3.0 * g.array();
            gb.array() = 2.0 * g.array();
            return std::vector<Tensor<double>>{ga, gb};
        },
        std::move(inputs), 1e-9, 17);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("every registered layer op passes gradcheck on 5 random instances") {
    for (const auto& check : standard_op_checks()) {
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            auto report = check.run(seed * 1000 + 3);
            INFO(check.name, " seed ", seed, " max_rel_err=", report.max_rel_err, " worst: ",
                 report.worst);
            CHECK(report.pass);
            CHECK(report.checked > 0);
        }
    }
}

TEST_CASE("a deliberately corrupted gradient is reported as a failure") {
    auto report = corrupted_gradient_control(2024);
    CHECK_FALSE(report.pass);
    CHECK(report.max_rel_err > 1e-3);
}
