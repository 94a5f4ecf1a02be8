#include "fpdn/commands.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include "fpdn/checkpoint.hpp"
#include "fpdn/config.hpp"
#include "fpdn/degrade.hpp"
#include "fpdn/gradcheck.hpp"
#include "fpdn/metrics.hpp"
#include "fpdn/train.hpp"

namespace fs = std::filesystem;

namespace fpdn {

namespace {

int default_workers(bool single_thread) {
    if (single_thread) return 1;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 4u));
}

RunConfig load_options_config(const std::string& config_file) {
    RunConfig config;
    if (!config_file.empty()) config = load_config_file(config_file);
    return config;
}

// Shared error mapping: flag/config problems are usage errors, file and
// dataset problems are data errors, numeric blowups are their own class.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace

int run_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (options.out_dir.empty()) throw std::invalid_argument("generate: --out is required");
        if (options.count < 0) throw std::invalid_argument("generate: --count must be >= 0");
        const RunConfig config = load_options_config(options.config_file);
        build_dataset(options.count, options.height, options.width, config.degrade, options.seed,
                      options.out_dir, default_workers(options.single_thread));
        out << manifest_path(options.out_dir) << "\n";
        return kExitOk;
    });
}

int run_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (options.data_dir.empty() || options.out_dir.empty())
            throw std::invalid_argument("train: --data and --out are required");
        RunConfig config = load_options_config(options.config_file);
        if (options.seed) config.train.seed = *options.seed;

        const FitResult result = fit(config.model, config.train, config.augment, options.data_dir,
                                     options.out_dir, options.verbose);
        out << result.checkpoint_path << "\n";
        out << "epochs=" << result.epochs_run << " best_val_mae=" << result.best_val << "\n";
        return kExitOk;
    });
}

namespace {

std::vector<fs::path> collect_inputs(const std::string& input_path) {
    std::vector<fs::path> files;
    if (fs::is_directory(input_path)) {
        for (const auto& entry : fs::directory_iterator(input_path)) {
            const auto ext = entry.path().extension().string();
            if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm")) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
    } else if (fs::exists(input_path)) {
        files.emplace_back(input_path);
    } else {
        throw std::runtime_error("input not found: " + input_path);
    }
    return files;
}

}  // namespace

int run_denoise(const DenoiseOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (options.model_path.empty() || options.input_path.empty() || options.out_dir.empty())
            throw std::invalid_argument("denoise: --model, --in and --out are required");
        const RunConfig config = load_options_config(options.config_file);
        const Checkpoint ckpt = load_checkpoint(options.model_path);
        const auto files = collect_inputs(options.input_path);
        fs::create_directories(options.out_dir);

        const bool pad = config.pad_instead_of_resize;
        auto process = [&](const fs::path& path) {
            const GrayImage raw = read_image(path.string());
            const GrayImage unit = normalize(raw);
            auto [grid, record] = pad ? pad_to_multiple16(unit) : resize_to_multiple16(unit);
            auto [output, tape] =
                unet_forward(ckpt.params, image_to_tensor(grid), RunMode::Infer);
            const GrayImage restored =
                pad ? postprocess_padded(output, record) : postprocess(output, record);
            write_image((fs::path(options.out_dir) / path.filename()).string(), restored);
        };

        const int workers = std::min<int>(default_workers(options.single_thread),
                                          std::max<size_t>(files.size(), 1));
        if (workers <= 1) {
            for (const auto& f : files) process(f);
        } else {
            std::vector<std::thread> pool;
            std::exception_ptr failure;
            std::mutex failure_mutex;
            for (int t = 0; t < workers; ++t)
                pool.emplace_back([&, t]() {
                    try {
                        for (size_t i = static_cast<size_t>(t); i < files.size();
                             i += static_cast<size_t>(workers))
                            process(files[i]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                });
            for (auto& th : pool) th.join();
            if (failure) std::rethrow_exception(failure);
        }
        out << "restored " << files.size() << " image(s) into " << options.out_dir << "\n";
        return kExitOk;
    });
}

int run_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        if (options.pred_dir.empty() || options.target_dir.empty())
            throw std::invalid_argument("evaluate: --pred and --target are required");
        const MetricsReport report = evaluate_dataset(options.pred_dir, options.target_dir);
        if (!options.report_path.empty()) write_report(report, options.report_path);

        out << "pairs=" << report.count() << " mean_mae=" << report.mean_mae
            << " mean_psnr_db=" << report.mean_psnr_db << " mean_ssim=" << report.mean_ssim
            << "\n";
        for (const auto& m : report.missing) err << "missing: " << m << "\n";
        return report.complete ? kExitOk : kExitData;
    });
}

int run_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        bool all_pass = true;
        bool matched = false;

        if (!options.full_net) {
            for (const auto& check : standard_op_checks()) {
                if (!options.op.empty() && options.op != check.name) continue;
                matched = true;
                double worst = 0;
                bool pass = true;
                for (uint64_t seed = 1; seed <= 5; ++seed) {
                    const auto report = check.run(seed * 1000 + 3);
                    worst = std::max(worst, report.max_rel_err);
                    pass = pass && report.pass;
                }
                all_pass = all_pass && pass;
                out << (pass ? "PASS" : "FAIL") << " " << check.name << " max_rel_err=" << worst
                    << " tolerance=" << check.tolerance << "\n";
            }
            if (options.op.empty()) {
                const auto control = corrupted_gradient_control(2024);
                const bool caught = !control.pass;
                all_pass = all_pass && caught;
                out << (caught ? "PASS" : "FAIL")
                    << " negative_control (corrupted gradient reported as failure)\n";
                matched = true;
            }
        } else {
            const auto report = unet_full_gradcheck(6);
            all_pass = report.pass;
            matched = true;
            out << (report.pass ? "PASS" : "FAIL") << " full_net max_rel_err=" << report.max_rel_err
                << " tolerance=" << report.tolerance << "\n";
        }

        if (!matched) throw std::invalid_argument("gradcheck: unknown op '" + options.op + "'");
        if (!all_pass) {
            err << "gradient check failed\n";
            return kExitNumeric;
        }
        return kExitOk;
    });
}

}  // namespace fpdn
