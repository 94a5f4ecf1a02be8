#include "fpdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace fs = std::filesystem;

namespace fpdn {

namespace {

void check_pair(const GrayImage& a, const GrayImage& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(what) + ": image dims disagree: " +
                                    std::to_string(a.width) + "x" + std::to_string(a.height) +
                                    " vs " + std::to_string(b.width) + "x" +
                                    std::to_string(b.height));
    if (a.domain != b.domain)
        throw std::invalid_argument(std::string(what) + ": images are in different domains");
}

double domain_scale(const GrayImage& img) {
    return img.domain == PixelDomain::Storage ? 255.0 : 1.0;
}

}  // namespace

double metric_mae(const GrayImage& a, const GrayImage& b) {
    check_pair(a, b, "mae");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        acc += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
    return acc / static_cast<double>(a.size()) / domain_scale(a);
}

double metric_psnr(const GrayImage& a, const GrayImage& b) {
    check_pair(a, b, "psnr");
    const double scale = domain_scale(a);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = (static_cast<double>(a.pixels[i]) - b.pixels[i]) / scale;
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2
constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2

std::vector<double> ssim_kernel() {
    std::vector<double> k(kWindow);
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kRadius;
        k[static_cast<size_t>(i)] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
        sum += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Horizontal then vertical weighted pass over the valid region.
void separable_filter(const std::vector<double>& src, int h, int w,
                      const std::vector<double>& kernel, std::vector<double>& dst) {
    const int out_w = w - kWindow + 1;
    const int out_h = h - kWindow + 1;
    std::vector<double> mid(static_cast<size_t>(h) * out_w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double acc = 0;
            for (int i = 0; i < kWindow; ++i)
                acc += kernel[static_cast<size_t>(i)] * src[static_cast<size_t>(y) * w + x + i];
            mid[static_cast<size_t>(y) * out_w + x] = acc;
        }
    dst.assign(static_cast<size_t>(out_h) * out_w, 0.0);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double acc = 0;
            for (int i = 0; i < kWindow; ++i)
                acc += kernel[static_cast<size_t>(i)] * mid[static_cast<size_t>(y + i) * out_w + x];
            dst[static_cast<size_t>(y) * out_w + x] = acc;
        }
}

}  // namespace

double metric_ssim(const GrayImage& a, const GrayImage& b) {
    check_pair(a, b, "ssim");
    if (a.width < kWindow || a.height < kWindow)
        throw std::invalid_argument("ssim: image " + std::to_string(a.width) + "x" +
                                    std::to_string(a.height) + " is smaller than the 11x11 window");
    const double scale = domain_scale(a);
    const int h = a.height, w = a.width;
    const size_t n = static_cast<size_t>(h) * w;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        const double xv = a.pixels[static_cast<Eigen::Index>(i)] / scale;
        const double yv = b.pixels[static_cast<Eigen::Index>(i)] / scale;
        x[i] = xv;
        y[i] = yv;
        xx[i] = xv * xv;
        yy[i] = yv * yv;
        xy[i] = xv * yv;
    }

    const auto kernel = ssim_kernel();
    std::vector<double> mu_x, mu_y, e_xx, e_yy, e_xy;
    separable_filter(x, h, w, kernel, mu_x);
    separable_filter(y, h, w, kernel, mu_y);
    separable_filter(xx, h, w, kernel, e_xx);
    separable_filter(yy, h, w, kernel, e_yy);
    separable_filter(xy, h, w, kernel, e_xy);

    double acc = 0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        const double var_x = e_xx[i] - mu_x[i] * mu_x[i];
        const double var_y = e_yy[i] - mu_y[i] * mu_y[i];
        const double cov = e_xy[i] - mu_x[i] * mu_y[i];
        acc += ((2.0 * mu_x[i] * mu_y[i] + kC1) * (2.0 * cov + kC2)) /
               ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kC1) * (var_x + var_y + kC2));
    }
    return acc / static_cast<double>(mu_x.size());
}

namespace {

bool is_image_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".PNG" || ext == ".pgm" || ext == ".PGM";
}

std::string strip_suffix(const std::string& stem, const std::string& suffix) {
    if (stem.size() > suffix.size() &&
        stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
        return stem.substr(0, stem.size() - suffix.size());
    return stem;
}

// Map ids to files. A dataset directory (holding *_target files) is indexed
// by targets only, so passing it as either side of an evaluation works.
std::map<std::string, fs::path> index_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> files;
    bool has_targets = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
        files.push_back(entry.path());
        const auto stem = entry.path().stem().string();
        if (stem != strip_suffix(stem, "_target")) has_targets = true;
    }
    std::map<std::string, fs::path> index;
    for (const auto& path : files) {
        const auto stem = path.stem().string();
        const bool is_target = stem != strip_suffix(stem, "_target");
        if (has_targets && !is_target) continue;
        const auto id = strip_suffix(strip_suffix(stem, "_target"), "_input");
        if (auto [it, inserted] = index.emplace(id, path); !inserted)
            throw std::runtime_error("duplicate id '" + id + "' in " + dir + ": " +
                                     it->second.string() + " and " + path.string());
    }
    return index;
}

}  // namespace

MetricsReport evaluate_dataset(const std::string& pred_dir, const std::string& target_dir) {
    const auto preds = index_dir(pred_dir);
    const auto targets = index_dir(target_dir);

    MetricsReport report;
    for (const auto& [id, path] : preds)
        if (!targets.count(id)) {
            report.missing.push_back(id + " (no target)");
            report.complete = false;
        }
    for (const auto& [id, path] : targets)
        if (!preds.count(id)) {
            report.missing.push_back(id + " (no prediction)");
            report.complete = false;
        }

    double mae_acc = 0, psnr_acc = 0, ssim_acc = 0;
    int psnr_finite = 0;
    for (const auto& [id, pred_path] : preds) {
        auto it = targets.find(id);
        if (it == targets.end()) continue;
        const GrayImage pred = read_image(pred_path.string());
        const GrayImage target = read_image(it->second.string());

        MetricsRow row;
        row.id = id;
        row.mae = metric_mae(pred, target);
        row.psnr_db = metric_psnr(pred, target);
        row.ssim = metric_ssim(pred, target);
        mae_acc += row.mae;
        ssim_acc += row.ssim;
        if (std::isfinite(row.psnr_db)) {
            psnr_acc += row.psnr_db;
            ++psnr_finite;
        } else {
            ++report.psnr_inf_count;
        }
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const MetricsRow& a, const MetricsRow& b) { return a.id < b.id; });

    const auto n = static_cast<double>(report.rows.size());
    if (!report.rows.empty()) {
        report.mean_mae = mae_acc / n;
        report.mean_ssim = ssim_acc / n;
        report.mean_psnr_db = psnr_finite > 0 ? psnr_acc / psnr_finite
                                              : std::numeric_limits<double>::infinity();
    }
    return report;
}

void write_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out.precision(9);
    out << "id,mae,psnr_db,ssim\n";
    for (const auto& row : report.rows)
        out << row.id << ',' << row.mae << ',' << row.psnr_db << ',' << row.ssim << '\n';
    if (!report.rows.empty())
        out << "mean," << report.mean_mae << ',' << report.mean_psnr_db << ',' << report.mean_ssim
            << '\n';
    out << "# pairs=" << report.rows.size() << " psnr_inf_excluded=" << report.psnr_inf_count
        << '\n';
    for (const auto& m : report.missing) out << "# missing: " << m << '\n';
    if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace fpdn
