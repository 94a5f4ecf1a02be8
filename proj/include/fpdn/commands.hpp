#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace fpdn {

// Exit statuses shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // bad flags, unknown config keys, bad values
constexpr int kExitData = 2;     // missing/corrupt files and datasets
constexpr int kExitNumeric = 3;  // NaN aborts and gradcheck failures

struct GenerateOptions {
    std::string out_dir;
    int count = 0;
    int height = 64;
    int width = 64;
    uint64_t seed = 0;
    std::string config_file;
    bool single_thread = false;
};

struct TrainOptions {
    std::string data_dir;
    std::string out_dir;
    std::string config_file;
    std::optional<uint64_t> seed;  // overrides train.seed from the config
    bool single_thread = false;
    bool verbose = false;
};

struct DenoiseOptions {
    std::string model_path;
    std::string input_path;  // one image or a directory of them
    std::string out_dir;
    std::string config_file;
    bool single_thread = false;
};

struct EvaluateOptions {
    std::string pred_dir;
    std::string target_dir;
    std::string report_path;
};

struct GradcheckOptions {
    std::string op;        // empty = all registered ops
    bool full_net = false;
};

int run_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);
int run_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int run_denoise(const DenoiseOptions& options, std::ostream& out, std::ostream& err);
int run_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int run_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);

}  // namespace fpdn
