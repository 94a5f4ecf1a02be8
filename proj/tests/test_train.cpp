#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fpdn/degrade.hpp"
#include "fpdn/rng.hpp"
#include "fpdn/train.hpp"

using namespace fpdn;
namespace fs = std::filesystem;

namespace {

// single scalar parameter wrapped in the params container
UNetParams<double> scalar_param(double value) {
    UNetParams<double> p;
    Tensor<double> t({1});
    t[0] = value;
    p.entries.emplace_back("w", std::move(t));
    return p;
}

std::vector<Tensor<double>> scalar_grad(double g) {
    Tensor<double> t({1});
    t[0] = g;
    return {std::move(t)};
}

}  // namespace

TEST_CASE("adam matches a hand-rolled scalar oracle to 1e-12 over ten scripted steps") {
    const double lr = 1e-3;
    TrainConfig cfg;
    auto params = scalar_param(0.5);
    AdamState<double> state;

    const double grads[10] = {0.3, -1.2, 0.8, 0.05, -0.4, 2.0, -0.7, 0.0, 1.5, -0.9};

    // independent oracle, straight from the update rule
    double w = 0.5, m = 0, v = 0;
    for (int t = 1; t <= 10; ++t) {
        const double g = grads[t - 1];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        w -= lr * mhat / (std::sqrt(vhat) + 1e-8);

        adam_step(params, scalar_grad(g), state, cfg, lr);
        CHECK(params.tensor(0)[0] == doctest::Approx(w).epsilon(1e-12));
    }
    CHECK(state.step_count == 10);
    CHECK(std::abs(params.tensor(0)[0] - w) < 1e-12);
}

TEST_CASE("zero gradient on a fresh state leaves parameters unchanged") {
    TrainConfig cfg;
    auto params = scalar_param(0.123456);
    AdamState<double> state;
    adam_step(params, scalar_grad(0.0), state, cfg, 1e-2);
    CHECK(params.tensor(0)[0] == 0.123456);
}

TEST_CASE("the first step moves by about -lr * sign(g)") {
    TrainConfig cfg;
    const double lr = 1e-3;
    for (double g : {0.7, -0.2, 3.0, -0.001}) {
        auto params = scalar_param(0.0);
        AdamState<double> state;
        adam_step(params, scalar_grad(g), state, cfg, lr);
        const double expected = -lr * (g > 0 ? 1.0 : -1.0);
        CHECK(params.tensor(0)[0] == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("non-finite gradients abort with a numeric error") {
    TrainConfig cfg;
    auto params = scalar_param(0.0);
    AdamState<double> state;
    CHECK_THROWS_AS(adam_step(params, scalar_grad(std::nan("")), state, cfg, 1e-3), NumericError);
    CHECK_THROWS_AS(
        adam_step(params, scalar_grad(std::numeric_limits<double>::infinity()), state, cfg, 1e-3),
        NumericError);
}

TEST_CASE("adam_step bumps the revision so stale tapes are caught") {
    TrainConfig cfg;
    auto params = scalar_param(1.0);
    AdamState<double> state;
    const uint64_t before = params.revision;
    adam_step(params, scalar_grad(0.5), state, cfg, 1e-3);
    CHECK(params.revision == before + 1);
}

TEST_CASE("scheduler: always-improving sequence never reduces or stops") {
    TrainConfig cfg;
    ScheduleState s;
    s.lr = 1e-4;
    for (int i = 0; i < 30; ++i) {
        CHECK(schedule_and_stop(s, 1.0 - 0.02 * i, cfg) == ScheduleDecision::Continue);
        CHECK(s.lr == 1e-4);
    }
}

TEST_CASE("scheduler: flat sequence halves at the 4th flat epoch, stops at the 5th") {
    TrainConfig cfg;
    ScheduleState s;
    s.lr = 1e-4;
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::Continue);  // first val improves on inf
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::Continue);  // 1 flat
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::Continue);  // 2
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::Continue);  // 3 (not > patience yet)
    CHECK(s.lr == 1e-4);
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::ReduceLr);  // 4 > 3: halve
    CHECK(s.lr == 0.5e-4);
    CHECK(schedule_and_stop(s, 1.0, cfg) == ScheduleDecision::Stop);  // 5 flat epochs total
}

TEST_CASE("scheduler: improvement equal to best counts as not improved") {
    TrainConfig cfg;
    ScheduleState s;
    s.lr = 1e-4;
    schedule_and_stop(s, 0.5, cfg);
    CHECK(s.best_val == 0.5);
    schedule_and_stop(s, 0.5, cfg);  // equal, strict comparison says no
    CHECK(s.since_improve_stop == 1);
}

TEST_CASE("scheduler: improve-then-flat trace") {
    TrainConfig cfg;
    ScheduleState s;
    s.lr = 1e-4;
    std::vector<double> vals = {1.0, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8};
    std::vector<ScheduleDecision> decisions;
    for (double v : vals) decisions.push_back(schedule_and_stop(s, v, cfg));
    CHECK(decisions[0] == ScheduleDecision::Continue);
    CHECK(decisions[1] == ScheduleDecision::Continue);  // improvement
    CHECK(decisions[2] == ScheduleDecision::Continue);
    CHECK(decisions[3] == ScheduleDecision::Continue);
    CHECK(decisions[4] == ScheduleDecision::Continue);
    CHECK(decisions[5] == ScheduleDecision::ReduceLr);  // 4th flat epoch after the improvement
    CHECK(decisions[6] == ScheduleDecision::Stop);      // 5th
}

TEST_CASE("scheduler: sawtooth that improves every other epoch never stops") {
    TrainConfig cfg;
    ScheduleState s;
    s.lr = 1e-4;
    double best = 1.0;
    for (int i = 0; i < 20; ++i) {
        const bool improve = i % 2 == 0;
        const double v = improve ? best - 0.05 : best + 0.3;
        if (improve) best = v;
        CHECK(schedule_and_stop(s, v, cfg) == ScheduleDecision::Continue);
    }
    CHECK(s.lr == 1e-4);
}

TEST_CASE("scheduler automaton matches an independent reference on all length-12 traces") {
    TrainConfig cfg;
    for (unsigned mask = 0; mask < (1u << 12); ++mask) {
        ScheduleState s;
        s.lr = 1e-4;

        // independent counter automaton written from the documented rule
        double ref_best = std::numeric_limits<double>::infinity();
        int ref_lr_count = 0, ref_stop_count = 0, ref_halvings = 0;
        double ref_lr = 1e-4;

        double best_feed = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 12; ++i) {
            const bool improve = (mask >> i) & 1u;
            double v;
            if (improve) v = std::isfinite(best_feed) ? best_feed - 0.25 : 10.0;
            else v = std::isfinite(best_feed) ? best_feed + 0.1 : 20.0;
            if (v < best_feed) best_feed = v;

            ScheduleDecision expected;
            if (v < ref_best) {
                ref_best = v;
                ref_lr_count = 0;
                ref_stop_count = 0;
                expected = ScheduleDecision::Continue;
            } else {
                ref_lr_count++;
                ref_stop_count++;
                expected = ScheduleDecision::Continue;
                if (ref_lr_count > cfg.plateau_patience) {
                    ref_lr *= 0.5;
                    ref_halvings++;
                    ref_lr_count = 0;
                    expected = ScheduleDecision::ReduceLr;
                }
                if (ref_stop_count >= cfg.stop_patience) expected = ScheduleDecision::Stop;
            }

            const ScheduleDecision got = schedule_and_stop(s, v, cfg);
            REQUIRE(got == expected);
            REQUIRE(s.lr == ref_lr);
            // lr is always lr_init * 0.5^k
            REQUIRE(s.lr == 1e-4 * std::pow(0.5, ref_halvings));
            if (expected == ScheduleDecision::Stop) break;
        }
    }
}

namespace {

std::string small_dataset(int n_pairs, uint64_t seed) {
    const auto dir =
        (fs::temp_directory_path() / ("fpdn_train_ds_" + std::to_string(seed))).string();
    fs::remove_all(dir);
    DegradationConfig config;
    config.elastic = false;  // keep the fixture quick
    build_dataset(n_pairs, 48, 48, config, seed, dir);
    return dir;
}

}  // namespace

TEST_CASE("fit runs one epoch, writes one log row and a checkpoint") {
    const auto dir = small_dataset(6, 31);
    const auto out = (fs::temp_directory_path() / "fpdn_fit_one").string();
    fs::remove_all(out);

    UNetConfig model;
    model.base_channels = 2;
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 4;
    cfg.val_fraction = 0.2;
    cfg.seed = 5;
    auto result = fit(model, cfg, AugmentationSpec::disabled(), dir, out);

    CHECK(result.log.rows.size() == 1);
    CHECK(result.epochs_run == 1);
    CHECK(fs::exists(result.checkpoint_path));
    CHECK(fs::exists(fs::path(out) / "metrics.csv"));
    CHECK(std::isfinite(result.best_val));

    std::ifstream log(fs::path(out) / "metrics.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "epoch,train_mae,val_mae,lr,wall_seconds");

    fs::remove_all(dir);
    fs::remove_all(out);
}

TEST_CASE("batch size larger than the dataset still trains on one partial batch") {
    const auto dir = small_dataset(4, 33);
    const auto out = (fs::temp_directory_path() / "fpdn_fit_partial").string();
    fs::remove_all(out);

    UNetConfig model;
    model.base_channels = 2;
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 64;
    cfg.val_fraction = 0.25;
    auto result = fit(model, cfg, AugmentationSpec::disabled(), dir, out);
    CHECK(result.log.rows.size() == 1);
    CHECK(result.log.rows[0].train_mae > 0.0);

    fs::remove_all(dir);
    fs::remove_all(out);
}

TEST_CASE("validation scoring is deterministic without a train step") {
    const auto dir = small_dataset(5, 35);
    auto set = load_training_set(dir);
    std::vector<TrainingSample> val(set.samples.begin() + 3, set.samples.end());

    UNetConfig model;
    model.base_channels = 2;
    auto params = build_unet<float>(model, 7);
    const double a = evaluate_validation(params, val, 2);
    const double b = evaluate_validation(params, val, 2);
    CHECK(a == b);
    fs::remove_all(dir);
}

TEST_CASE("seeded reruns produce identical logs, and the best checkpoint beats every row") {
    const auto dir = small_dataset(8, 37);
    const auto out_a = (fs::temp_directory_path() / "fpdn_fit_a").string();
    const auto out_b = (fs::temp_directory_path() / "fpdn_fit_b").string();
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    UNetConfig model;
    model.base_channels = 2;
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 4;
    cfg.val_fraction = 0.25;
    cfg.seed = 11;
    AugmentationSpec augment;  // all augmentations active
    auto ra = fit(model, cfg, augment, dir, out_a);
    auto rb = fit(model, cfg, augment, dir, out_b);

    REQUIRE(ra.log.rows.size() == rb.log.rows.size());
    for (size_t i = 0; i < ra.log.rows.size(); ++i) {
        CHECK(ra.log.rows[i].train_mae == rb.log.rows[i].train_mae);
        CHECK(ra.log.rows[i].val_mae == rb.log.rows[i].val_mae);
        CHECK(ra.log.rows[i].lr == rb.log.rows[i].lr);
    }

    for (const auto& row : ra.log.rows) CHECK(ra.best_val <= row.val_mae);

    fs::remove_all(dir);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("missing manifest and too-small datasets are rejected") {
    CHECK_THROWS_WITH_AS(load_training_set("/nonexistent/dataset"),
                         doctest::Contains("manifest"), std::runtime_error);

    const auto dir = small_dataset(1, 39);
    UNetConfig model;
    model.base_channels = 2;
    TrainConfig cfg;
    CHECK_THROWS_WITH_AS(fit(model, cfg, AugmentationSpec::disabled(), dir, dir + "_out"),
                         doctest::Contains("small"), std::runtime_error);
    fs::remove_all(dir);
    fs::remove_all(dir + "_out");
}
