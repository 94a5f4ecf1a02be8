#include "fpdn/degrade.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fpdn/rng.hpp"

namespace fs = std::filesystem;

namespace fpdn {

namespace {

// Low-frequency value noise: a coarse random grid bilinearly upsampled.
GrayImage value_noise(int h, int w, int cells_y, int cells_x, std::mt19937_64& rng, double lo,
                      double hi) {
    GrayImage coarse(std::max(cells_y, 2), std::max(cells_x, 2), PixelDomain::Compute);
    for (Eigen::Index i = 0; i < coarse.size(); ++i)
        coarse.pixels[i] = static_cast<float>(uniform(rng, lo, hi));
    return resize_bilinear(coarse, h, w);
}

GrayImage rotate_about_center(const GrayImage& img, double degrees, float fill) {
    const double angle = degrees * M_PI / 180.0;
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    Eigen::Matrix3d to_center = Eigen::Matrix3d::Identity();
    to_center(0, 2) = -cx;
    to_center(1, 2) = -cy;
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    rot(0, 0) = std::cos(angle);
    rot(0, 1) = -std::sin(angle);
    rot(1, 0) = std::sin(angle);
    rot(1, 1) = std::cos(angle);
    Eigen::Matrix3d back = Eigen::Matrix3d::Identity();
    back(0, 2) = cx;
    back(1, 2) = cy;
    const Eigen::Matrix3d forward = back * rot * to_center;
    return warp_affine(img, forward.inverse(), fill);
}

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

GrayImage generate_clean(uint64_t seed, int h, int w, const RidgeConfig& ridge) {
    if (h < 32 || w < 32)
        throw std::invalid_argument("generate_clean: minimum size is 32x32, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    std::mt19937_64 rng(seed);
    const double period = uniform(rng, ridge.period_min, ridge.period_max);
    const double base_angle = uniform(rng, -M_PI, M_PI);  // dominant ridge-normal direction

    // smooth ridge-normal orientation field: base direction plus low-frequency wobble
    GrayImage wobble = value_noise(h, w, 4, 4, rng, -0.5, 0.5);

    // start from white noise and sharpen with an oriented bandpass filter
    Eigen::ArrayXf field(static_cast<Eigen::Index>(h) * w);
    for (Eigen::Index i = 0; i < field.size(); ++i)
        field[i] = static_cast<float>(uniform(rng, -1.0, 1.0));

    const double sigma_g = 0.5 * period;
    const int r = static_cast<int>(std::ceil(period));
    std::vector<double> envelope(static_cast<size_t>(2 * r + 1));
    for (int d = -r; d <= r; ++d)
        envelope[static_cast<size_t>(d + r)] = std::exp(-(d * d) / (2.0 * sigma_g * sigma_g));

    Eigen::ArrayXf next(field.size());
    std::vector<double> cos_x(static_cast<size_t>(2 * r + 1)), sin_x(cos_x.size());
    std::vector<double> cos_y(cos_x.size()), sin_y(cos_x.size());
    for (int iter = 0; iter < ridge.iterations; ++iter) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double phi = base_angle + wobble.at(y, x);
                const double fx = 2.0 * M_PI * std::cos(phi) / period;
                const double fy = 2.0 * M_PI * std::sin(phi) / period;
                for (int d = -r; d <= r; ++d) {
                    cos_x[static_cast<size_t>(d + r)] = std::cos(fx * d) * envelope[static_cast<size_t>(d + r)];
                    sin_x[static_cast<size_t>(d + r)] = std::sin(fx * d) * envelope[static_cast<size_t>(d + r)];
                    cos_y[static_cast<size_t>(d + r)] = std::cos(fy * d);
                    sin_y[static_cast<size_t>(d + r)] = std::sin(fy * d);
                }
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const double cy = cos_y[static_cast<size_t>(dy + r)] * envelope[static_cast<size_t>(dy + r)];
                    const double sy = sin_y[static_cast<size_t>(dy + r)] * envelope[static_cast<size_t>(dy + r)];
                    const float* row = field.data() + static_cast<Eigen::Index>(yy) * w;
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = std::clamp(x + dx, 0, w - 1);
                        // cos(fx*dx + fy*dy) expanded so the trig tables stay 1-d
                        const double kernel = cos_x[static_cast<size_t>(dx + r)] * cy -
                                              sin_x[static_cast<size_t>(dx + r)] * sy;
                        acc += kernel * row[xx];
                    }
                }
                next[static_cast<Eigen::Index>(y) * w + x] = static_cast<float>(acc);
            }
        }
        const double rms = std::sqrt(static_cast<double>((next * next).mean()));
        const float gain = rms > 1e-12 ? static_cast<float>(2.0 / rms) : 1.0f;
        field = (next * gain).tanh();
    }

    // dark ridges on a white page, inside a soft elliptical footprint
    GrayImage out(h, w, PixelDomain::Storage);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double ry = cy * (1.0 - ridge.margin), rx = cx * (1.0 - ridge.margin);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double e = std::pow((y - cy) / ry, 2) + std::pow((x - cx) / rx, 2);
            const double t = std::clamp((e - 1.0) / 0.3, 0.0, 1.0);
            const double footprint = t * t * (3.0 - 2.0 * t);  // smoothstep to white
            const double pattern = 0.5 + 0.5 * field[static_cast<Eigen::Index>(y) * w + x];
            const double v = pattern * (1.0 - footprint) + footprint;
            out.at(y, x) = static_cast<float>(std::floor(v * 255.0 + 0.5));
        }
    }
    return out;
}

DegradationConfig DegradationConfig::all_disabled() {
    DegradationConfig c;
    c.rotation = c.elastic = c.resolution = c.blur = false;
    c.brightness = c.contrast = c.background = c.occlusion = c.scratch = false;
    return c;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        kernel[static_cast<size_t>(d + radius)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += kernel[static_cast<size_t>(d + radius)];
    }
    for (double& k : kernel) k /= sum;

    // separable passes with clamped borders; identical to the direct 2-d
    // convolution because the border clamp factorizes per axis
    GrayImage mid(img.height, img.width, img.domain);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += kernel[static_cast<size_t>(d + radius)] *
                       img.at(y, std::clamp(x + d, 0, img.width - 1));
            mid.at(y, x) = static_cast<float>(acc);
        }
    GrayImage out(img.height, img.width, img.domain);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += kernel[static_cast<size_t>(d + radius)] *
                       mid.at(std::clamp(y + d, 0, img.height - 1), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

void elastic_displacement(int h, int w, double alpha, double sigma, uint64_t seed,
                          Eigen::ArrayXf& dy, Eigen::ArrayXf& dx) {
    std::mt19937_64 rng(seed);
    GrayImage ny(h, w, PixelDomain::Compute), nx(h, w, PixelDomain::Compute);
    for (Eigen::Index i = 0; i < ny.size(); ++i) ny.pixels[i] = static_cast<float>(uniform(rng, -1.0, 1.0));
    for (Eigen::Index i = 0; i < nx.size(); ++i) nx.pixels[i] = static_cast<float>(uniform(rng, -1.0, 1.0));
    dy = gaussian_blur(ny, sigma).pixels * static_cast<float>(alpha);
    dx = gaussian_blur(nx, sigma).pixels * static_cast<float>(alpha);
}

GrayImage elastic_transform(const GrayImage& img, double alpha, double sigma, uint64_t seed) {
    if (alpha == 0.0) return img;
    Eigen::ArrayXf dy, dx;
    elastic_displacement(img.height, img.width, alpha, sigma, seed, dy, dx);
    GrayImage out(img.height, img.width, img.domain);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Eigen::Index i = static_cast<Eigen::Index>(y) * img.width + x;
            out.at(y, x) = sample_bilinear(img, y + dy[i], x + dx[i]);
        }
    return out;
}

GrayImage background_texture(int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int cell = std::max(6, std::min(h, w) / uniform_int(rng, 3, 6));
    GrayImage bg = value_noise(h, w, h / cell + 2, w / cell + 2, rng, 0.35, 0.95);

    // sometimes overlay a line or grid pattern on the noise
    const int kind = uniform_int(rng, 0, 2);
    if (kind > 0) {
        const int pitch = uniform_int(rng, 6, 14);
        const int thick = uniform_int(rng, 1, 2);
        const float dim = static_cast<float>(uniform(rng, 0.55, 0.8));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const bool on_row = (y % pitch) < thick;
                const bool on_col = (x % pitch) < thick;
                if ((kind == 1 && on_row) || (kind == 2 && (on_row || on_col)))
                    bg.at(y, x) *= dim;
            }
    }
    return bg;
}

DegradationPlan draw_plan(const DegradationConfig& config, int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    DegradationPlan plan;

    if (config.rotation && bernoulli(rng, config.rotation_probability))
        plan.rotation_deg = uniform(rng, -config.rotation_max_deg, config.rotation_max_deg);

    if (config.elastic && bernoulli(rng, config.elastic_probability)) {
        DegradationPlan::Elastic e;
        e.alpha = uniform(rng, config.elastic_alpha_min, config.elastic_alpha_max);
        e.sigma = uniform(rng, config.elastic_sigma_min, config.elastic_sigma_max);
        e.field_seed = rng();
        plan.elastic = e;
    }

    if (config.resolution && bernoulli(rng, config.resolution_probability))
        plan.resolution_factor = uniform(rng, config.resolution_factor_min, config.resolution_factor_max);

    if (config.blur && bernoulli(rng, config.blur_probability))
        plan.blur_sigma = uniform(rng, config.blur_sigma_min, config.blur_sigma_max);

    if (config.brightness && bernoulli(rng, config.brightness_probability))
        plan.brightness_offset = uniform(rng, -config.brightness_max, config.brightness_max);

    if (config.contrast && bernoulli(rng, config.contrast_probability))
        plan.contrast_factor = uniform(rng, config.contrast_min, config.contrast_max);

    if (config.background && bernoulli(rng, config.background_probability)) {
        DegradationPlan::Background b;
        b.alpha = uniform(rng, config.background_alpha_min, config.background_alpha_max);
        b.texture_seed = rng();
        plan.background = b;
    }

    if (config.occlusion && bernoulli(rng, config.occlusion_probability)) {
        const int count = uniform_int(rng, config.occlusion_count_min, config.occlusion_count_max);
        const double scale = std::min(h, w);
        for (int i = 0; i < count; ++i) {
            DegradationPlan::Occlusion o;
            o.ellipse = bernoulli(rng, 0.5);
            o.cy = uniform(rng, 0.15, 0.85) * h;
            o.cx = uniform(rng, 0.15, 0.85) * w;
            o.ry = uniform(rng, config.occlusion_size_min, config.occlusion_size_max) * scale;
            o.rx = uniform(rng, config.occlusion_size_min, config.occlusion_size_max) * scale;
            o.intensity = uniform(rng, 0.85, 1.0);
            plan.occlusions.push_back(o);
        }
    }

    if (config.scratch && bernoulli(rng, config.scratch_probability)) {
        const int count = uniform_int(rng, config.scratch_count_min, config.scratch_count_max);
        const double diag = std::hypot(h, w);
        for (int i = 0; i < count; ++i) {
            DegradationPlan::Scratch s;
            s.y0 = uniform(rng, 0.0, h - 1.0);
            s.x0 = uniform(rng, 0.0, w - 1.0);
            const double angle = uniform(rng, 0.0, 2.0 * M_PI);
            const double len = uniform(rng, config.scratch_length_min, config.scratch_length_max) * diag;
            s.y1 = s.y0 + len * std::sin(angle);
            s.x1 = s.x0 + len * std::cos(angle);
            s.width = uniform(rng, config.scratch_width_min, config.scratch_width_max);
            s.intensity = bernoulli(rng, 0.5) ? uniform(rng, 0.85, 1.0) : uniform(rng, 0.0, 0.15);
            plan.scratches.push_back(s);
        }
    }
    return plan;
}

namespace {

void render_occlusion(GrayImage& img, const DegradationPlan::Occlusion& o) {
    const int y_lo = std::max(0, static_cast<int>(std::floor(o.cy - o.ry)));
    const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(o.cy + o.ry)));
    const int x_lo = std::max(0, static_cast<int>(std::floor(o.cx - o.rx)));
    const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(o.cx + o.rx)));
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            const bool inside =
                o.ellipse ? (std::pow((y - o.cy) / o.ry, 2) + std::pow((x - o.cx) / o.rx, 2) <= 1.0)
                          : (std::abs(y - o.cy) <= o.ry && std::abs(x - o.cx) <= o.rx);
            if (inside) img.at(y, x) = static_cast<float>(o.intensity);
        }
}

void render_scratch(GrayImage& img, const DegradationPlan::Scratch& s) {
    const double pad = s.width / 2.0 + 1.0;
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - pad)));
    const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + pad)));
    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - pad)));
    const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + pad)));
    const double vy = s.y1 - s.y0, vx = s.x1 - s.x0;
    const double len2 = vy * vy + vx * vx;
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            double t = len2 > 0.0 ? ((y - s.y0) * vy + (x - s.x0) * vx) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double d = std::hypot(y - (s.y0 + t * vy), x - (s.x0 + t * vx));
            const double cover = std::clamp(s.width / 2.0 + 0.5 - d, 0.0, 1.0);  // anti-aliased edge
            if (cover > 0.0)
                img.at(y, x) = clamp01(static_cast<float>(
                    img.at(y, x) * (1.0 - cover) + s.intensity * cover));
        }
}

}  // namespace

GrayImage apply_plan_input(const GrayImage& clean_compute, const DegradationPlan& plan) {
    GrayImage img = clean_compute;
    if (plan.rotation_deg) img = rotate_about_center(img, *plan.rotation_deg, 1.0f);
    if (plan.elastic)
        img = elastic_transform(img, plan.elastic->alpha, plan.elastic->sigma,
                                plan.elastic->field_seed);
    if (plan.resolution_factor) {
        const int small_h = std::max(1, static_cast<int>(std::lround(img.height / *plan.resolution_factor)));
        const int small_w = std::max(1, static_cast<int>(std::lround(img.width / *plan.resolution_factor)));
        img = resize_bilinear(resize_bilinear(img, small_h, small_w), clean_compute.height,
                              clean_compute.width);
    }
    if (plan.blur_sigma) img = gaussian_blur(img, *plan.blur_sigma);
    if (plan.brightness_offset)
        img.pixels = (img.pixels + static_cast<float>(*plan.brightness_offset)).max(0.0f).min(1.0f);
    if (plan.contrast_factor)
        img.pixels =
            ((img.pixels - 0.5f) * static_cast<float>(*plan.contrast_factor) + 0.5f).max(0.0f).min(1.0f);
    if (plan.background) {
        const GrayImage bg = background_texture(img.height, img.width, plan.background->texture_seed);
        const float a = static_cast<float>(plan.background->alpha);
        img.pixels = img.pixels * (1.0f - a) + bg.pixels * a;
    }
    for (const auto& o : plan.occlusions) render_occlusion(img, o);
    for (const auto& s : plan.scratches) render_scratch(img, s);
    return img;
}

GrayImage apply_plan_target(const GrayImage& clean_compute, const DegradationPlan& plan) {
    if (plan.rotation_deg) return rotate_about_center(clean_compute, *plan.rotation_deg, 1.0f);
    return clean_compute;
}

ImagePair degrade(const GrayImage& clean_storage, const DegradationConfig& config, uint64_t seed) {
    const GrayImage clean_c = normalize(clean_storage);
    const DegradationPlan plan = draw_plan(config, clean_storage.height, clean_storage.width, seed);
    ImagePair pair;
    pair.degraded = denormalize(apply_plan_input(clean_c, plan));
    pair.clean = denormalize(apply_plan_target(clean_c, plan));
    pair.seed = seed;
    return pair;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string plan_to_tokens(const DegradationPlan& plan) {
    std::ostringstream out;
    auto sep = [&out]() {
        if (out.tellp() > 0) out << ' ';
    };
    if (plan.rotation_deg) { sep(); out << "rotation=" << fmt(*plan.rotation_deg); }
    if (plan.elastic) {
        sep();
        out << "elastic=" << fmt(plan.elastic->alpha) << ',' << fmt(plan.elastic->sigma) << ','
            << plan.elastic->field_seed;
    }
    if (plan.resolution_factor) { sep(); out << "resolution=" << fmt(*plan.resolution_factor); }
    if (plan.blur_sigma) { sep(); out << "blur=" << fmt(*plan.blur_sigma); }
    if (plan.brightness_offset) { sep(); out << "brightness=" << fmt(*plan.brightness_offset); }
    if (plan.contrast_factor) { sep(); out << "contrast=" << fmt(*plan.contrast_factor); }
    if (plan.background) {
        sep();
        out << "background=" << fmt(plan.background->alpha) << ',' << plan.background->texture_seed;
    }
    for (const auto& o : plan.occlusions) {
        sep();
        out << "occlusion=" << (o.ellipse ? 'E' : 'R') << ',' << fmt(o.cy) << ',' << fmt(o.cx)
            << ',' << fmt(o.ry) << ',' << fmt(o.rx) << ',' << fmt(o.intensity);
    }
    for (const auto& s : plan.scratches) {
        sep();
        out << "scratch=" << fmt(s.y0) << ',' << fmt(s.x0) << ',' << fmt(s.y1) << ',' << fmt(s.x1)
            << ',' << fmt(s.width) << ',' << fmt(s.intensity);
    }
    return out.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> parts;
    std::istringstream in(s);
    std::string part;
    while (std::getline(in, part, delim)) parts.push_back(part);
    return parts;
}

}  // namespace

DegradationPlan plan_from_tokens(const std::string& tokens) {
    DegradationPlan plan;
    std::istringstream in(tokens);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed manifest token: " + token);
        const std::string key = token.substr(0, eq);
        const auto parts = split(token.substr(eq + 1), ',');
        auto want = [&](size_t n) {
            if (parts.size() != n)
                throw std::runtime_error("malformed manifest token: " + token);
        };
        if (key == "rotation") { want(1); plan.rotation_deg = std::stod(parts[0]); }
        else if (key == "elastic") {
            want(3);
            DegradationPlan::Elastic e;
            e.alpha = std::stod(parts[0]);
            e.sigma = std::stod(parts[1]);
            e.field_seed = std::stoull(parts[2]);
            plan.elastic = e;
        } else if (key == "resolution") { want(1); plan.resolution_factor = std::stod(parts[0]); }
        else if (key == "blur") { want(1); plan.blur_sigma = std::stod(parts[0]); }
        else if (key == "brightness") { want(1); plan.brightness_offset = std::stod(parts[0]); }
        else if (key == "contrast") { want(1); plan.contrast_factor = std::stod(parts[0]); }
        else if (key == "background") {
            want(2);
            DegradationPlan::Background b;
            b.alpha = std::stod(parts[0]);
            b.texture_seed = std::stoull(parts[1]);
            plan.background = b;
        } else if (key == "occlusion") {
            want(6);
            DegradationPlan::Occlusion o;
            o.ellipse = parts[0] == "E";
            o.cy = std::stod(parts[1]);
            o.cx = std::stod(parts[2]);
            o.ry = std::stod(parts[3]);
            o.rx = std::stod(parts[4]);
            o.intensity = std::stod(parts[5]);
            plan.occlusions.push_back(o);
        } else if (key == "scratch") {
            want(6);
            DegradationPlan::Scratch s;
            s.y0 = std::stod(parts[0]);
            s.x0 = std::stod(parts[1]);
            s.y1 = std::stod(parts[2]);
            s.x1 = std::stod(parts[3]);
            s.width = std::stod(parts[4]);
            s.intensity = std::stod(parts[5]);
            plan.scratches.push_back(s);
        } else {
            throw std::runtime_error("unknown manifest operator: " + key);
        }
    }
    return plan;
}

uint64_t clean_seed_for(uint64_t pair_seed) { return mix_seed(pair_seed, 0xC1EA); }
uint64_t degrade_seed_for(uint64_t pair_seed) { return mix_seed(pair_seed, 0xDE64); }

std::string manifest_path(const std::string& dataset_dir) {
    return (fs::path(dataset_dir) / "manifest.txt").string();
}

DatasetManifest build_dataset(int n_pairs, int h, int w, const DegradationConfig& config,
                              uint64_t base_seed, const std::string& out_dir, int workers) {
    fs::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.entries.resize(static_cast<size_t>(n_pairs));

    auto make_pair = [&](int i) {
        const uint64_t pair_seed = base_seed + static_cast<uint64_t>(i);
        char id[32];
        std::snprintf(id, sizeof id, "pair_%06d", i);

        const GrayImage clean = generate_clean(clean_seed_for(pair_seed), h, w, config.ridge);
        const GrayImage clean_c = normalize(clean);
        const DegradationPlan plan = draw_plan(config, h, w, degrade_seed_for(pair_seed));

        write_image((fs::path(out_dir) / (std::string(id) + "_input.png")).string(),
                    denormalize(apply_plan_input(clean_c, plan)));
        write_image((fs::path(out_dir) / (std::string(id) + "_target.png")).string(),
                    denormalize(apply_plan_target(clean_c, plan)));

        manifest.entries[static_cast<size_t>(i)] = {id, pair_seed, plan_to_tokens(plan)};
    };

    if (workers <= 1 || n_pairs < 2) {
        for (int i = 0; i < n_pairs; ++i) make_pair(i);
    } else {
        const int n_threads = std::min(workers, n_pairs);
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t]() {
                try {
                    for (int i = t; i < n_pairs; i += n_threads) make_pair(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    std::ofstream out(manifest_path(out_dir));
    if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path(out_dir));
    for (const auto& e : manifest.entries) {
        out << e.id << ' ' << e.seed;
        if (!e.tokens.empty()) out << ' ' << e.tokens;
        out << '\n';
    }
    if (!out) throw std::runtime_error("short write: " + manifest_path(out_dir));
    return manifest;
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    DatasetManifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        ManifestEntry entry;
        if (!(row >> entry.id >> entry.seed))
            throw std::runtime_error("malformed manifest line: " + line);
        std::getline(row, entry.tokens);
        if (!entry.tokens.empty() && entry.tokens.front() == ' ') entry.tokens.erase(0, 1);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

}  // namespace fpdn
