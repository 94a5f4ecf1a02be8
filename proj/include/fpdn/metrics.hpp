#pragma once

#include <string>
#include <vector>

#include "fpdn/image.hpp"

namespace fpdn {

// Restoration quality metrics on the [0,1] scale. Both images must share a
// domain; storage-domain intensities are put on the unit scale internally
// with a single division so integer arithmetic stays exact.

double metric_mae(const GrayImage& a, const GrayImage& b);

// 10*log10(1/MSE) dB with MAX = 1.0; identical images give +infinity.
double metric_psnr(const GrayImage& a, const GrayImage& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// L=1, averaged over window positions that fit entirely inside the image.
double metric_ssim(const GrayImage& a, const GrayImage& b);

struct MetricsRow {
    std::string id;
    double mae = 0;
    double psnr_db = 0;
    double ssim = 0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;  // sorted by id
    double mean_mae = 0;
    double mean_psnr_db = 0;  // infinite-PSNR rows are excluded from this mean
    double mean_ssim = 0;
    int psnr_inf_count = 0;
    std::vector<std::string> missing;  // ids present on one side only
    bool complete = true;

    size_t count() const { return rows.size(); }
};

// Pairs prediction and target images by id (file stem, with a trailing
// "_input"/"_target" stripped; a directory holding *_target files is indexed
// by those alone). Missing counterparts are reported, not fatal.
MetricsReport evaluate_dataset(const std::string& pred_dir, const std::string& target_dir);

// Delimited text: header, per-pair rows sorted by id, a final mean row, and a
// '#'-prefixed trailer carrying the pair count.
void write_report(const MetricsReport& report, const std::string& path);

}  // namespace fpdn
