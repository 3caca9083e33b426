#pragma once

// Fusion quality metrics on the 8-bit scale (pixel * 255) and mean-rank
// aggregation across methods.

#include <array>
#include <string>
#include <vector>

#include "msgf/sgio.hpp"

namespace msgf {

inline constexpr double kPsnrSentinel = 100.0;

// Average gradient: mean of sqrt((gx^2 + gy^2) / 2) over forward differences,
// last row and column excluded. Needs at least 2x2.
double average_gradient(const ImageGray& img);
// Spatial frequency sqrt(RF^2 + CF^2); RF from horizontal, CF from vertical
// first differences.
double spatial_frequency(const ImageGray& img);
// 10 log10(255^2 / MSE); kPsnrSentinel when the MSE is zero.
double psnr(const ImageGray& img, const ImageGray& reference);
// Shannon entropy (nats) of the quantized histogram.
double entropy(const ImageGray& img, std::size_t bins = 256);
// Histogram mutual information in nats.
double mutual_information(const ImageGray& a, const ImageGray& b, std::size_t bins = 256);
// Mean SSIM over all 8x8 windows (stride 1, uniform weights).
double ssim(const ImageGray& a, const ImageGray& b);
// Sobel edge-preservation measure, in [0,1].
double qabf(const ImageGray& fused, const ImageGray& a, const ImageGray& b);

struct MetricReport {
  double ag = 0, sf = 0, psnr = 0, mi = 0, ssim = 0, qabf = 0;

  static const std::array<const char*, 6>& names();
  std::array<double, 6> values() const { return {ag, sf, psnr, mi, ssim, qabf}; }
};

// Fusion variants: PSNR against the mean of the sources, MI summed over both
// sources, SSIM averaged over both.
MetricReport evaluate_fusion(const ImageGray& fused, const ImageGray& ir, const ImageGray& vi);

struct MetricTable {
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> values;  // [method][metric], higher is better
};

// Mean over metrics of each method's rank (1 = best, ties share the mean of
// their positions). Throws ValidationError for a NaN cell or ragged table.
std::vector<double> mrank(const MetricTable& table);

// CSV with a header row "method,<metric>,..." and one row per method.
MetricTable parse_metric_csv(const std::string& text);
std::string format_rank_csv(const MetricTable& table, const std::vector<double>& ranks);

}  // namespace msgf
