#pragma once

#include <optional>
#include <string>

#include "fpdn/unet.hpp"

namespace fpdn {

// Binary checkpoint: magic "FPDN", format version u32 LE, a length-prefixed
// UTF-8 key=value config block, then each parameter in canonical order as
// name length + name, rank + extents (u32 LE), raw float32 LE values.

struct Checkpoint {
    UNetParams<float> params;
    std::optional<float> val_mae;  // best validation MAE, when saved by training
};

void save_checkpoint(const UNetParams<float>& params, const std::string& path,
                     std::optional<float> val_mae = std::nullopt);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fpdn
