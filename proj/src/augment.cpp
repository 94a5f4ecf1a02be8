#include "fpdn/augment.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fpdn/rng.hpp"

namespace fpdn {

AugmentationSpec AugmentationSpec::disabled() {
    AugmentationSpec spec;
    spec.flip_horizontal = spec.flip_vertical = false;
    spec.shear = spec.translate = spec.zoom = spec.rotate = false;
    spec.contrast = spec.intensity_gain = false;
    return spec;
}

bool AugmentationSpec::any_enabled() const {
    return flip_horizontal || flip_vertical || shear || translate || zoom || rotate || contrast ||
           intensity_gain;
}

ImagePair augment_pair(const ImagePair& pair, const AugmentationSpec& spec, uint64_t seed) {
    if (pair.degraded.domain != PixelDomain::Compute || pair.clean.domain != PixelDomain::Compute)
        throw std::invalid_argument("augment_pair: expects compute-domain images");
    if (pair.degraded.width != pair.clean.width || pair.degraded.height != pair.clean.height)
        throw std::invalid_argument("augment_pair: pair images disagree on size");
    if (!spec.any_enabled()) return pair;

    std::mt19937_64 rng(seed);
    const int w = pair.degraded.width, h = pair.degraded.height;

    // draw order is fixed so seeds replay identically regardless of toggles
    const bool flip_h = spec.flip_horizontal && bernoulli(rng, 0.5);
    const bool flip_v = spec.flip_vertical && bernoulli(rng, 0.5);
    const double shear = spec.shear ? uniform(rng, -spec.shear_max, spec.shear_max) : 0.0;
    const double tx = spec.translate ? uniform(rng, -spec.translate_max, spec.translate_max) * w : 0.0;
    const double ty = spec.translate ? uniform(rng, -spec.translate_max, spec.translate_max) * h : 0.0;
    const double zoom = spec.zoom ? uniform(rng, spec.zoom_min, spec.zoom_max) : 1.0;
    const double angle = spec.rotate
                             ? uniform(rng, -spec.rotate_max_deg, spec.rotate_max_deg) * M_PI / 180.0
                             : 0.0;
    const double contrast = spec.contrast ? uniform(rng, spec.contrast_min, spec.contrast_max) : 1.0;
    const double gain = spec.intensity_gain
                            ? uniform(rng, spec.intensity_gain_min, spec.intensity_gain_max)
                            : 1.0;

    const bool geometric = flip_h || flip_v || shear != 0.0 || tx != 0.0 || ty != 0.0 ||
                           zoom != 1.0 || angle != 0.0;

    ImagePair out;
    out.seed = pair.seed;
    out.id = pair.id;

    if (geometric) {
        const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
        Eigen::Matrix3d to_center = Eigen::Matrix3d::Identity();
        to_center(0, 2) = -cx;
        to_center(1, 2) = -cy;

        Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
        rot(0, 0) = std::cos(angle);
        rot(0, 1) = -std::sin(angle);
        rot(1, 0) = std::sin(angle);
        rot(1, 1) = std::cos(angle);

        Eigen::Matrix3d sh = Eigen::Matrix3d::Identity();
        sh(0, 1) = shear;

        Eigen::Matrix3d scale = Eigen::Matrix3d::Identity();
        scale(0, 0) = zoom * (flip_h ? -1.0 : 1.0);
        scale(1, 1) = zoom * (flip_v ? -1.0 : 1.0);

        Eigen::Matrix3d back = Eigen::Matrix3d::Identity();
        back(0, 2) = cx + tx;
        back(1, 2) = cy + ty;

        const Eigen::Matrix3d forward = back * rot * sh * scale * to_center;
        const Eigen::Matrix3d inverse = forward.inverse();
        out.degraded = warp_affine(pair.degraded, inverse, 1.0f);
        out.clean = warp_affine(pair.clean, inverse, 1.0f);
    } else {
        out.degraded = pair.degraded;
        out.clean = pair.clean;
    }

    if (contrast != 1.0)
        out.degraded.pixels =
            ((out.degraded.pixels - 0.5f) * static_cast<float>(contrast) + 0.5f).max(0.0f).min(1.0f);
    if (gain != 1.0)
        out.degraded.pixels = (out.degraded.pixels * static_cast<float>(gain)).max(0.0f).min(1.0f);
    return out;
}

}  // namespace fpdn
