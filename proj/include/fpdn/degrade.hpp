#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpdn/image.hpp"

namespace fpdn {

// Procedural ridge-pattern generator knobs. Ridge spacing is drawn per image
// from [period_min, period_max] pixels.
struct RidgeConfig {
    double period_min = 6.0;
    double period_max = 11.0;
    int iterations = 4;     // oriented-filter sharpening passes
    double margin = 0.06;   // elliptical footprint margin as a fraction of the dims
};

GrayImage generate_clean(uint64_t seed, int h, int w, const RidgeConfig& ridge = {});

// Per-operator toggles, firing probabilities and draw ranges for the paired
// degradations. Applied in the fixed order: rotation, elastic, resolution,
// blur, brightness, contrast, background, occlusion, scratch.
struct DegradationConfig {
    bool rotation = true;
    double rotation_probability = 0.5;
    double rotation_max_deg = 15.0;

    bool elastic = true;
    double elastic_probability = 0.5;
    double elastic_alpha_min = 2.0;
    double elastic_alpha_max = 8.0;
    double elastic_sigma_min = 4.0;
    double elastic_sigma_max = 8.0;

    bool resolution = true;
    double resolution_probability = 0.5;
    double resolution_factor_min = 1.5;
    double resolution_factor_max = 3.0;

    bool blur = true;
    double blur_probability = 0.5;
    double blur_sigma_min = 0.5;
    double blur_sigma_max = 2.5;

    bool brightness = true;
    double brightness_probability = 0.5;
    double brightness_max = 0.2;  // additive offset drawn from +- this

    bool contrast = true;
    double contrast_probability = 0.5;
    double contrast_min = 0.6;
    double contrast_max = 1.4;

    bool background = true;
    double background_probability = 0.9;
    double background_alpha_min = 0.25;
    double background_alpha_max = 0.55;

    bool occlusion = true;
    double occlusion_probability = 0.5;
    int occlusion_count_min = 1;
    int occlusion_count_max = 3;
    double occlusion_size_min = 0.05;  // half-extent as a fraction of min(h,w)
    double occlusion_size_max = 0.18;

    bool scratch = true;
    double scratch_probability = 0.5;
    int scratch_count_min = 1;
    int scratch_count_max = 4;
    double scratch_length_min = 0.2;  // fraction of the diagonal
    double scratch_length_max = 0.6;
    double scratch_width_min = 1.0;  // pixels
    double scratch_width_max = 3.0;

    RidgeConfig ridge;

    static DegradationConfig all_disabled();
};

// The concrete draws behind one degraded image; replaying a plan reproduces
// the image exactly. Serialized into the dataset manifest as op=value tokens.
struct DegradationPlan {
    std::optional<double> rotation_deg;

    struct Elastic {
        double alpha = 0.0;
        double sigma = 1.0;
        uint64_t field_seed = 0;
    };
    std::optional<Elastic> elastic;

    std::optional<double> resolution_factor;
    std::optional<double> blur_sigma;
    std::optional<double> brightness_offset;
    std::optional<double> contrast_factor;

    struct Background {
        double alpha = 0.0;
        uint64_t texture_seed = 0;
    };
    std::optional<Background> background;

    struct Occlusion {
        bool ellipse = false;
        double cy = 0, cx = 0, ry = 0, rx = 0;
        double intensity = 1.0;
    };
    std::vector<Occlusion> occlusions;

    struct Scratch {
        double y0 = 0, x0 = 0, y1 = 0, x1 = 0;
        double width = 1.0;
        double intensity = 1.0;
    };
    std::vector<Scratch> scratches;
};

DegradationPlan draw_plan(const DegradationConfig& config, int h, int w, uint64_t seed);

// Full operator chain for the network input.
GrayImage apply_plan_input(const GrayImage& clean_compute, const DegradationPlan& plan);
// The target keeps the pose change only: rotation, nothing else.
GrayImage apply_plan_target(const GrayImage& clean_compute, const DegradationPlan& plan);

ImagePair degrade(const GrayImage& clean_storage, const DegradationConfig& config, uint64_t seed);

std::string plan_to_tokens(const DegradationPlan& plan);
DegradationPlan plan_from_tokens(const std::string& tokens);

// Building blocks exposed for direct use and oracle tests.
GrayImage gaussian_blur(const GrayImage& img, double sigma);  // radius ceil(3*sigma), renormalized
GrayImage elastic_transform(const GrayImage& img, double alpha, double sigma, uint64_t seed);
void elastic_displacement(int h, int w, double alpha, double sigma, uint64_t seed,
                          Eigen::ArrayXf& dy, Eigen::ArrayXf& dx);
GrayImage background_texture(int h, int w, uint64_t seed);

// One dataset record: {id}_input.png / {id}_target.png on disk plus the
// manifest line `id seed op=value...`.
struct ManifestEntry {
    std::string id;
    uint64_t seed = 0;
    std::string tokens;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

DatasetManifest build_dataset(int n_pairs, int h, int w, const DegradationConfig& config,
                              uint64_t base_seed, const std::string& out_dir, int workers = 1);

DatasetManifest read_manifest(const std::string& path);
std::string manifest_path(const std::string& dataset_dir);

// Sub-seed derivation used by build_dataset; exposed so a manifest row can be
// replayed from its stored pair seed.
uint64_t clean_seed_for(uint64_t pair_seed);
uint64_t degrade_seed_for(uint64_t pair_seed);

}  // namespace fpdn
