#include "fpdn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fpdn/checkpoint.hpp"
#include "fpdn/degrade.hpp"
#include "fpdn/ops.hpp"
#include "fpdn/rng.hpp"

namespace fs = std::filesystem;

namespace fpdn {

ScheduleDecision schedule_and_stop(ScheduleState& state, double val_mae,
                                   const TrainConfig& config) {
    const bool improved = val_mae < state.best_val - config.min_improvement_delta;
    if (improved) {
        state.best_val = val_mae;
        state.since_improve_lr = 0;
        state.since_improve_stop = 0;
        return ScheduleDecision::Continue;
    }
    state.since_improve_lr++;
    state.since_improve_stop++;

    ScheduleDecision decision = ScheduleDecision::Continue;
    if (state.since_improve_lr > config.plateau_patience) {
        state.lr *= config.plateau_factor;
        state.since_improve_lr = 0;
        decision = ScheduleDecision::ReduceLr;
    }
    if (state.since_improve_stop >= config.stop_patience) decision = ScheduleDecision::Stop;
    return decision;
}

TrainingSet load_training_set(const std::string& dataset_dir) {
    const auto path = manifest_path(dataset_dir);
    if (!fs::exists(path))
        throw std::runtime_error("dataset manifest not found: " + path);
    const auto manifest = read_manifest(path);
    if (manifest.entries.empty()) throw std::runtime_error("empty dataset: " + path);

    TrainingSet set;
    for (const auto& entry : manifest.entries) {
        TrainingSample sample;
        sample.id = entry.id;
        const auto dir = fs::path(dataset_dir);
        auto [degraded, drec] =
            resize_to_multiple16(normalize(read_image((dir / (entry.id + "_input.png")).string())));
        auto [clean, crec] =
            resize_to_multiple16(normalize(read_image((dir / (entry.id + "_target.png")).string())));
        sample.degraded = std::move(degraded);
        sample.clean = std::move(clean);
        if (sample.degraded.width != sample.clean.width ||
            sample.degraded.height != sample.clean.height)
            throw std::runtime_error("pair " + entry.id + " images disagree on size");
        if (set.samples.empty()) {
            set.height = sample.degraded.height;
            set.width = sample.degraded.width;
        } else if (sample.degraded.height != set.height || sample.degraded.width != set.width) {
            throw std::runtime_error("dataset is not uniformly sized: pair " + entry.id + " is " +
                                     std::to_string(sample.degraded.width) + "x" +
                                     std::to_string(sample.degraded.height) + ", expected " +
                                     std::to_string(set.width) + "x" + std::to_string(set.height));
        }
        set.samples.push_back(std::move(sample));
    }
    return set;
}

namespace {

// Stack sample images (and their targets) into (B,1,H,W) batch tensors.
void fill_batch(const std::vector<const TrainingSample*>& samples, Tensor<float>& input,
                Tensor<float>& target) {
    const auto batch = static_cast<Index>(samples.size());
    const int h = samples[0]->degraded.height, w = samples[0]->degraded.width;
    input = Tensor<float>({batch, 1, h, w});
    target = Tensor<float>({batch, 1, h, w});
    for (Index b = 0; b < batch; ++b) {
        std::copy(samples[static_cast<size_t>(b)]->degraded.pixels.data(),
                  samples[static_cast<size_t>(b)]->degraded.pixels.data() + h * w,
                  input.data() + b * h * w);
        std::copy(samples[static_cast<size_t>(b)]->clean.pixels.data(),
                  samples[static_cast<size_t>(b)]->clean.pixels.data() + h * w,
                  target.data() + b * h * w);
    }
}

}  // namespace

double evaluate_validation(const UNetParams<float>& params,
                           const std::vector<TrainingSample>& val, int batch_size) {
    double acc = 0;
    size_t done = 0;
    while (done < val.size()) {
        const size_t take = std::min(static_cast<size_t>(batch_size), val.size() - done);
        std::vector<const TrainingSample*> chunk;
        for (size_t i = 0; i < take; ++i) chunk.push_back(&val[done + i]);
        Tensor<float> input, target;
        fill_batch(chunk, input, target);
        auto [output, tape] = unet_forward(params, input, RunMode::Infer);
        acc += static_cast<double>(mae_loss(output, target).first) * static_cast<double>(take);
        done += take;
    }
    return acc / static_cast<double>(val.size());
}

EpochRow run_epoch(UNetParams<float>& params, AdamState<float>& adam,
                   const std::vector<TrainingSample>& train,
                   const std::vector<TrainingSample>& val, const AugmentationSpec& augment,
                   const TrainConfig& config, double lr, int epoch) {
    if (train.empty() || val.empty())
        throw std::invalid_argument("run_epoch: train and validation sets must be non-empty");

    // seeded Fisher-Yates; all draws go through rng.hpp so runs replay everywhere
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0xF15E0000ull + static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(uniform_int(
                                    shuffle_rng, 0, static_cast<int>(i) - 1))]);

    double train_acc = 0;
    size_t cursor = 0;
    std::vector<ImagePair> scratch;
    while (cursor < order.size()) {
        const size_t take = std::min(static_cast<size_t>(config.batch_size), order.size() - cursor);
        scratch.clear();
        std::vector<const TrainingSample*> chunk;
        for (size_t i = 0; i < take; ++i) {
            const auto& sample = train[order[cursor + i]];
            ImagePair pair;
            pair.degraded = sample.degraded;
            pair.clean = sample.clean;
            const uint64_t aug_seed =
                mix_seed(config.seed, (static_cast<uint64_t>(epoch) << 32) ^ order[cursor + i]);
            scratch.push_back(augment_pair(pair, augment, aug_seed));
        }
        std::vector<TrainingSample> batch_samples(take);
        for (size_t i = 0; i < take; ++i) {
            batch_samples[i].degraded = std::move(scratch[i].degraded);
            batch_samples[i].clean = std::move(scratch[i].clean);
            chunk.push_back(&batch_samples[i]);
        }

        Tensor<float> input, target;
        fill_batch(chunk, input, target);
        auto [output, tape] = unet_forward(params, input, RunMode::Train);
        auto [loss, grad] = mae_loss(output, target);
        if (!std::isfinite(loss))
            throw NumericError("run_epoch: non-finite training loss at epoch " +
                               std::to_string(epoch));
        auto grads = unet_backward(params, tape, grad);
        adam_step(params, grads.params, adam, config, lr);

        train_acc += static_cast<double>(loss) * static_cast<double>(take);
        cursor += take;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_mae = train_acc / static_cast<double>(train.size());
    row.val_mae = evaluate_validation(params, val, config.batch_size);
    return row;
}

void write_training_log(const TrainingLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write training log: " + path);
    out << "epoch,train_mae,val_mae,lr,wall_seconds\n";
    char line[160];
    for (const auto& row : log.rows) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.3f\n", row.epoch, row.train_mae,
                      row.val_mae, row.lr, row.wall_seconds);
        out << line;
    }
    if (!out) throw std::runtime_error("short write: " + path);
}

FitResult fit(const UNetConfig& model_config, const TrainConfig& config,
              const AugmentationSpec& augment, const std::string& dataset_dir,
              const std::string& out_dir, bool verbose) {
    config.validate();
    auto set = load_training_set(dataset_dir);
    const size_t n_val = std::max<size_t>(
        1, static_cast<size_t>(std::lround(config.val_fraction * static_cast<double>(set.samples.size()))));
    if (n_val >= set.samples.size())
        throw std::runtime_error("dataset too small for validation split: " +
                                 std::to_string(set.samples.size()) + " pairs");

    // deterministic split: the last val_fraction of the manifest order
    std::vector<TrainingSample> train(set.samples.begin(),
                                      set.samples.end() - static_cast<long>(n_val));
    std::vector<TrainingSample> val(set.samples.end() - static_cast<long>(n_val),
                                    set.samples.end());

    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.fpdn").string();
    const std::string log_path = (fs::path(out_dir) / "metrics.csv").string();

    auto params = build_unet<float>(model_config, config.seed);
    AdamState<float> adam;
    ScheduleState schedule;
    schedule.lr = config.lr_init;

    FitResult result;
    result.checkpoint_path = ckpt_path;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = schedule.lr;
        EpochRow row = run_epoch(params, adam, train, val, augment, config, lr, epoch);
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.rows.push_back(row);
        result.epochs_run = epoch + 1;

        const ScheduleDecision decision = schedule_and_stop(schedule, row.val_mae, config);
        if (schedule.best_val == row.val_mae) {
            save_checkpoint(params, ckpt_path, static_cast<float>(row.val_mae));
            result.best_val = row.val_mae;
        }
        write_training_log(result.log, log_path);
        if (verbose)
            std::printf("epoch %d: train_mae=%.5f val_mae=%.5f lr=%.3g%s\n", epoch, row.train_mae,
                        row.val_mae, lr,
                        decision == ScheduleDecision::Stop
                            ? " (early stop)"
                            : decision == ScheduleDecision::ReduceLr ? " (lr reduced)" : "");
        if (decision == ScheduleDecision::Stop) break;
    }
    return result;
}

}  // namespace fpdn
