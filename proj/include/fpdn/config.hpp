#pragma once

#include <string>

#include "fpdn/augment.hpp"
#include "fpdn/degrade.hpp"
#include "fpdn/train.hpp"
#include "fpdn/unet.hpp"

namespace fpdn {

// Flat `section.key = value` configuration covering every tunable. Files are
// UTF-8 with '#' comments; unknown keys are rejected; CLI flags override file
// values by being applied after the file is read.
struct RunConfig {
    UNetConfig model;
    TrainConfig train;
    DegradationConfig degrade;
    AugmentationSpec augment;
    bool pad_instead_of_resize = false;  // pipeline.pad_instead_of_resize
};

// Applies one key to the config; throws std::invalid_argument on unknown keys
// or unparseable values.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Every key with its current value, in file format; doubles as documentation.
std::string config_to_text(const RunConfig& config);

}  // namespace fpdn
