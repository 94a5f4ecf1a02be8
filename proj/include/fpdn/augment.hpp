#pragma once

#include <cstdint>

#include "fpdn/image.hpp"

namespace fpdn {

// Training-time augmentation. Geometric transforms are drawn once per pair
// and hit degraded and clean identically so the pair stays aligned;
// photometric transforms (contrast, intensity gain) hit the degraded input
// only. Out-of-frame regions fill with white (1.0), the ridge background.
struct AugmentationSpec {
    bool flip_horizontal = true;  // each flip fires on a fair coin when enabled
    bool flip_vertical = true;

    bool shear = true;
    double shear_max = 0.1;

    bool translate = true;
    double translate_max = 0.05;  // fraction of each dimension

    bool zoom = true;
    double zoom_min = 0.9;
    double zoom_max = 1.1;

    bool rotate = true;
    double rotate_max_deg = 10.0;

    bool contrast = true;
    double contrast_min = 0.8;
    double contrast_max = 1.2;

    // single-channel stand-in for a saturation jitter: a multiplicative
    // intensity gain on the degraded input
    bool intensity_gain = true;
    double intensity_gain_min = 0.8;
    double intensity_gain_max = 1.2;

    static AugmentationSpec disabled();
    bool any_enabled() const;
};

ImagePair augment_pair(const ImagePair& pair, const AugmentationSpec& spec, uint64_t seed);

}  // namespace fpdn
