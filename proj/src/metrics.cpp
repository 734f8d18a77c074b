#include "metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "common.hpp"

namespace eit {

namespace {

void check_pair(const PixelImage& recon, const PixelImage& gt) {
  if (recon.side < 1 || gt.side < 1) throw std::invalid_argument("empty image");
  if (recon.side != gt.side) throw std::invalid_argument("image dimension mismatch");
  if (int(recon.values.size()) != recon.side * recon.side ||
      int(gt.values.size()) != gt.side * gt.side)
    throw std::invalid_argument("image size does not match side");
}

double range_of(const PixelImage& img) {
  double lo = img.values[0], hi = img.values[0];
  for (double v : img.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

}  // namespace

double mse(const PixelImage& recon, const PixelImage& gt) {
  check_pair(recon, gt);
  double s = 0;
  for (size_t i = 0; i < gt.values.size(); ++i) {
    double d = recon.values[i] - gt.values[i];
    s += d * d;
  }
  return s / double(gt.values.size());
}

double psnr(const PixelImage& recon, const PixelImage& gt) {
  double range = range_of(gt);
  if (!(range > 0.0)) throw std::invalid_argument("constant ground truth: psnr undefined");
  double m = mse(recon, gt);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / m);
}

double ssim(const PixelImage& recon, const PixelImage& gt) {
  check_pair(recon, gt);
  constexpr int kWin = 11, kHalf = 5;
  if (recon.side < kWin) throw std::invalid_argument("image smaller than SSIM window");

  double w[kWin][kWin], wsum = 0;
  for (int a = 0; a < kWin; ++a)
    for (int b = 0; b < kWin; ++b) {
      double da = a - kHalf, db = b - kHalf;
      w[a][b] = std::exp(-(da * da + db * db) / (2.0 * 1.5 * 1.5));
      wsum += w[a][b];
    }
  for (int a = 0; a < kWin; ++a)
    for (int b = 0; b < kWin; ++b) w[a][b] /= wsum;

  double L = range_of(gt);
  double c1 = (0.01 * L) * (0.01 * L);
  double c2 = (0.03 * L) * (0.03 * L);
  auto factor = [](double num, double den) { return num == 0.0 && den == 0.0 ? 1.0 : num / den; };

  double total = 0;
  int count = 0;
  for (int i = 0; i + kWin <= recon.side; ++i)
    for (int j = 0; j + kWin <= recon.side; ++j) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int a = 0; a < kWin; ++a)
        for (int b = 0; b < kWin; ++b) {
          double x = recon.at(i + a, j + b);
          double y = gt.at(i + a, j + b);
          mx += w[a][b] * x;
          my += w[a][b] * y;
          xx += w[a][b] * x * x;
          yy += w[a][b] * y * y;
          xy += w[a][b] * x * y;
        }
      double vx = xx - mx * mx;
      double vy = yy - my * my;
      double cxy = xy - mx * my;
      total += factor(2.0 * mx * my + c1, mx * mx + my * my + c1) *
               factor(2.0 * cxy + c2, vx + vy + c2);
      ++count;
    }
  return total / count;
}

double re(const PixelImage& recon, const PixelImage& gt) {
  check_pair(recon, gt);
  double num = 0, den = 0;
  for (size_t i = 0; i < gt.values.size(); ++i) {
    num += std::abs(recon.values[i] - gt.values[i]);
    den += std::abs(gt.values[i]);
  }
  if (!(den > 0.0)) throw std::invalid_argument("all-zero ground truth: re undefined");
  return num / den;
}

double ae(const PixelImage& recon, const PixelImage& gt) {
  check_pair(recon, gt);
  double s = 0;
  for (size_t i = 0; i < gt.values.size(); ++i)
    s += std::abs(recon.values[i] - gt.values[i]);
  return s / double(gt.values.size());
}

double dr(const PixelImage& recon, const PixelImage& gt) {
  check_pair(recon, gt);
  double rg = range_of(gt);
  if (!(rg > 0.0)) throw std::invalid_argument("constant ground truth: dr undefined");
  return range_of(recon) / rg;
}

MetricReport compute_metrics(const PixelImage& recon, const PixelImage& gt) {
  MetricReport r;
  r.mse = mse(recon, gt);
  r.psnr = psnr(recon, gt);
  r.ssim = ssim(recon, gt);
  r.re = re(recon, gt);
  r.ae = ae(recon, gt);
  r.dr = dr(recon, gt);
  return r;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::string s = format_shortest(v);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos)
    s += ".0";
  return s;
}

void save_metric_report_csv(const std::vector<MetricReport>& rows,
                            const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("empty metric report");
  std::ostringstream out;
  out << "index,mse,psnr,ssim,re,ae,dr\n";
  auto cells = [](const MetricReport& r) {
    return std::array<double, 6>{r.mse, r.psnr, r.ssim, r.re, r.ae, r.dr};
  };
  for (size_t i = 0; i < rows.size(); ++i) {
    out << i;
    for (double v : cells(rows[i])) out << "," << format_metric(v);
    out << "\n";
  }
  out << "mean+-std";
  for (int c = 0; c < 6; ++c) {
    double mean = 0;
    for (const auto& r : rows) mean += cells(r)[c];
    mean /= double(rows.size());
    double var = 0;
    for (const auto& r : rows) {
      double d = cells(r)[c] - mean;
      var += d * d;
    }
    double sd = rows.size() > 1 ? std::sqrt(var / double(rows.size() - 1)) : 0.0;
    out << "," << format_metric(mean) << "+-" << format_metric(sd);
  }
  out << "\n";
  write_text_atomic(path, out.str());
}

}  // namespace eit
