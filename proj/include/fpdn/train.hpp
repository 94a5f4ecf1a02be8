#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpdn/augment.hpp"
#include "fpdn/image.hpp"
#include "fpdn/unet.hpp"

namespace fpdn {

// Raised when a loss or gradient goes non-finite; maps to the CLI's numeric
// failure exit status.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double lr_init = 1e-4;
    double plateau_factor = 0.5;
    int plateau_patience = 3;  // LR halves once the plateau exceeds this many epochs
    int stop_patience = 5;     // stop after this many epochs without improvement
    int batch_size = 8;
    int max_epochs = 100;
    double val_fraction = 0.1;
    uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double min_improvement_delta = 0.0;

    void validate() const {
        if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
            throw std::invalid_argument("train: plateau_factor must be in (0,1)");
        if (plateau_patience < 1 || stop_patience < 1)
            throw std::invalid_argument("train: patience values must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw std::invalid_argument("train: val_fraction must be in (0,1)");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
        if (lr_init <= 0.0) throw std::invalid_argument("train: lr_init must be positive");
    }
};

template <typename Scalar>
struct AdamState {
    std::vector<Tensor<Scalar>> m;  // first-moment estimates, one per parameter
    std::vector<Tensor<Scalar>> v;  // second-moment estimates
    int64_t step_count = 0;         // total optimizer steps taken
};

// One Adam update over the whole parameter set:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
//   theta <- theta - lr * mhat / (sqrt(vhat) + eps)
// with bias-corrected mhat, vhat. Moments are lazily initialized to zero.
template <typename Scalar>
void adam_step(UNetParams<Scalar>& params, const std::vector<Tensor<Scalar>>& grads,
               AdamState<Scalar>& state, const TrainConfig& config, double lr) {
    if (grads.size() != params.size())
        throw std::invalid_argument("adam_step: gradient count " + std::to_string(grads.size()) +
                                    " != parameter count " + std::to_string(params.size()));
    if (state.m.empty()) {
        for (size_t i = 0; i < params.size(); ++i) {
            state.m.emplace_back(params.tensor(i).shape());
            state.v.emplace_back(params.tensor(i).shape());
        }
    }
    for (size_t i = 0; i < params.size(); ++i)
        if (!grads[i].all_finite())
            throw NumericError("adam_step: non-finite gradient in parameter '" +
                               params.entries[i].first + "'");

    state.step_count++;
    const Scalar b1 = static_cast<Scalar>(config.adam_beta1);
    const Scalar b2 = static_cast<Scalar>(config.adam_beta2);
    const Scalar eps = static_cast<Scalar>(config.adam_eps);
    const Scalar corr1 =
        Scalar(1) - static_cast<Scalar>(std::pow(config.adam_beta1, state.step_count));
    const Scalar corr2 =
        Scalar(1) - static_cast<Scalar>(std::pow(config.adam_beta2, state.step_count));
    const Scalar step = static_cast<Scalar>(lr);

    for (size_t i = 0; i < params.size(); ++i) {
        auto& m = state.m[i].array();
        auto& v = state.v[i].array();
        const auto& g = grads[i].array();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g * g;
        params.tensor(i).array() -= step * (m / corr1) / ((v / corr2).sqrt() + eps);
    }
    params.revision++;
}

enum class ScheduleDecision { Continue, ReduceLr, Stop };

struct ScheduleState {
    double lr = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    int since_improve_lr = 0;    // epochs since improvement, for the LR plateau
    int since_improve_stop = 0;  // epochs since improvement, for early stopping
};

// The per-epoch plateau/early-stop automaton. Improvement is strict:
// val < best - delta. On improvement both counters reset; otherwise both
// advance, the LR halves (and its counter resets) once its counter exceeds
// plateau_patience, and training stops once the stop counter reaches
// stop_patience. Reduction is evaluated before stopping.
ScheduleDecision schedule_and_stop(ScheduleState& state, double val_mae,
                                   const TrainConfig& config);

// One sample of the loaded dataset, compute domain, dims already multiple of 16.
struct TrainingSample {
    std::string id;
    GrayImage degraded;
    GrayImage clean;
};

struct TrainingSet {
    std::vector<TrainingSample> samples;
    int height = 0;
    int width = 0;
};

// Reads every manifest pair, normalizes and resizes to the 16-multiple grid.
// All pairs must share one size (they do for generated datasets).
TrainingSet load_training_set(const std::string& dataset_dir);

struct EpochRow {
    int epoch = 0;
    double train_mae = 0;
    double val_mae = 0;
    double lr = 0;
    double wall_seconds = 0;
};

struct TrainingLog {
    std::vector<EpochRow> rows;
};

// Header then comma-separated rows (epoch, train_mae, val_mae, lr, wall_seconds).
void write_training_log(const TrainingLog& log, const std::string& path);

double evaluate_validation(const UNetParams<float>& params,
                           const std::vector<TrainingSample>& val, int batch_size);

// Shuffles (seeded), augments per sample, steps Adam per batch on MAE, then
// scores validation with augmentation off. Returns the epoch's log row
// (wall_seconds left to the caller).
EpochRow run_epoch(UNetParams<float>& params, AdamState<float>& adam,
                   const std::vector<TrainingSample>& train,
                   const std::vector<TrainingSample>& val, const AugmentationSpec& augment,
                   const TrainConfig& config, double lr, int epoch);

struct FitResult {
    TrainingLog log;
    std::string checkpoint_path;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_run = 0;
};

// The whole procedure: epochs until stop or max_epochs, best-val checkpoint
// (not last) written to out_dir/checkpoint.fpdn, log to out_dir/metrics.csv.
FitResult fit(const UNetConfig& model_config, const TrainConfig& config,
              const AugmentationSpec& augment, const std::string& dataset_dir,
              const std::string& out_dir, bool verbose = false);

}  // namespace fpdn
