#pragma once

#include <string>
#include <vector>

#include "phantom.hpp"

namespace eit {

// Image-pair quality metrics. Unless noted, `gt` is the reference: PSNR peak
// and the SSIM dynamic range are taken from the ground-truth value range.
double mse(const PixelImage& recon, const PixelImage& gt);

// 10 log10(range^2 / mse); identical images return +infinity
double psnr(const PixelImage& recon, const PixelImage& gt);

// mean local SSIM over all fully-contained 11x11 Gaussian windows (std 1.5,
// K1 = 0.01, K2 = 0.03); degenerate 0/0 luminance or contrast factors count
// as a perfect match
double ssim(const PixelImage& recon, const PixelImage& gt);

// l1 difference over l1 of ground truth
double re(const PixelImage& recon, const PixelImage& gt);

// mean absolute difference
double ae(const PixelImage& recon, const PixelImage& gt);

// reconstruction value range over ground-truth value range
double dr(const PixelImage& recon, const PixelImage& gt);

struct MetricReport {
  double mse = 0, psnr = 0, ssim = 0, re = 0, ae = 0, dr = 0;
};

MetricReport compute_metrics(const PixelImage& recon, const PixelImage& gt);

// "1.0" rather than "1": pretty form used by the CLI summary and CSV rows
std::string format_metric(double v);

// one row per pair plus a trailing mean+-std summary row (sample std, 0 for a
// single row)
void save_metric_report_csv(const std::vector<MetricReport>& rows,
                            const std::string& path);

}  // namespace eit
