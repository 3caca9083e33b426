#include "msgf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "msgf/error.hpp"

namespace msgf {

namespace {

std::vector<double> to8bit(const ImageGray& img) {
  std::vector<double> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] * 255.0;
  return out;
}

void require_same(const ImageGray& a, const ImageGray& b, const char* op) {
  if (a.width != b.width || a.height != b.height)
    throw ShapeError(std::string(op) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
}

void require_min(const ImageGray& a, std::size_t n, const char* op) {
  if (a.width < n || a.height < n)
    throw ContractError(std::string(op) + " needs an image of at least " + std::to_string(n) +
                        "x" + std::to_string(n));
}

std::vector<std::size_t> quantize(const ImageGray& img, std::size_t bins) {
  std::vector<std::size_t> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double level = std::clamp(std::round(img.pixels[i] * 255.0), 0.0, 255.0);
    out[i] = std::min(bins - 1, static_cast<std::size_t>(level) * bins / 256);
  }
  return out;
}

double plogp_sum(const std::vector<double>& counts, double n) {
  double h = 0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

double average_gradient(const ImageGray& img) {
  require_min(img, 2, "average_gradient");
  const auto p = to8bit(img);
  const std::size_t w = img.width, h = img.height;
  double acc = 0;
  for (std::size_t y = 0; y + 1 < h; ++y)
    for (std::size_t x = 0; x + 1 < w; ++x) {
      const double gx = p[y * w + x + 1] - p[y * w + x];
      const double gy = p[(y + 1) * w + x] - p[y * w + x];
      acc += std::sqrt((gx * gx + gy * gy) / 2.0);
    }
  return acc / static_cast<double>((w - 1) * (h - 1));
}

double spatial_frequency(const ImageGray& img) {
  require_min(img, 2, "spatial_frequency");
  const auto p = to8bit(img);
  const std::size_t w = img.width, h = img.height;
  double rf = 0, cf = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 1; x < w; ++x) {
      const double d = p[y * w + x] - p[y * w + x - 1];
      rf += d * d;
    }
  for (std::size_t y = 1; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double d = p[y * w + x] - p[(y - 1) * w + x];
      cf += d * d;
    }
  rf /= static_cast<double>(h * (w - 1));
  cf /= static_cast<double>((h - 1) * w);
  return std::sqrt(rf + cf);
}

double psnr(const ImageGray& img, const ImageGray& reference) {
  require_same(img, reference, "psnr");
  double mse = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double d = (img.pixels[i] - reference.pixels[i]) * 255.0;
    mse += d * d;
  }
  mse /= static_cast<double>(img.pixels.size());
  if (mse == 0.0) return kPsnrSentinel;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double entropy(const ImageGray& img, std::size_t bins) {
  if (bins == 0) throw ContractError("entropy needs at least one bin");
  std::vector<double> counts(bins, 0.0);
  for (auto q : quantize(img, bins)) counts[q] += 1;
  return plogp_sum(counts, static_cast<double>(img.pixels.size()));
}

double mutual_information(const ImageGray& a, const ImageGray& b, std::size_t bins) {
  require_same(a, b, "mutual_information");
  if (bins == 0) throw ContractError("mutual_information needs at least one bin");
  const auto qa = quantize(a, bins), qb = quantize(b, bins);
  std::vector<double> joint(bins * bins, 0.0), ha(bins, 0.0), hb(bins, 0.0);
  for (std::size_t i = 0; i < qa.size(); ++i) {
    joint[qa[i] * bins + qb[i]] += 1;
    ha[qa[i]] += 1;
    hb[qb[i]] += 1;
  }
  // I = H(a) + H(b) - H(a,b)
  const double n = static_cast<double>(qa.size());
  return std::max(0.0, plogp_sum(ha, n) + plogp_sum(hb, n) - plogp_sum(joint, n));
}

double ssim(const ImageGray& a, const ImageGray& b) {
  require_same(a, b, "ssim");
  constexpr std::size_t kWin = 8;
  require_min(a, kWin, "ssim");
  const double c1 = std::pow(0.01 * 255.0, 2), c2 = std::pow(0.03 * 255.0, 2);
  const auto pa = to8bit(a), pb = to8bit(b);
  const std::size_t w = a.width, h = a.height;
  const double n = kWin * kWin;

  auto moments = [&](const std::vector<double>& u, const std::vector<double>& v, std::size_t x0,
                     std::size_t y0, double& mu_u, double& mu_v, double& cov) {
    double su = 0, sv = 0;
    for (std::size_t y = y0; y < y0 + kWin; ++y)
      for (std::size_t x = x0; x < x0 + kWin; ++x) {
        su += u[y * w + x];
        sv += v[y * w + x];
      }
    mu_u = su / n;
    mu_v = sv / n;
    double c = 0;
    for (std::size_t y = y0; y < y0 + kWin; ++y)
      for (std::size_t x = x0; x < x0 + kWin; ++x)
        c += (u[y * w + x] - mu_u) * (v[y * w + x] - mu_v);
    cov = c / n;
  };

  double acc = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + kWin <= h; ++y)
    for (std::size_t x = 0; x + kWin <= w; ++x) {
      double ma, mb, sab, m1, m2, saa, sbb;
      moments(pa, pb, x, y, ma, mb, sab);
      moments(pa, pa, x, y, m1, m2, saa);
      moments(pb, pb, x, y, m1, m2, sbb);
      acc += ((2 * ma * mb + c1) * (2 * sab + c2)) /
             ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

namespace {

struct EdgeMap {
  std::vector<double> strength, angle;
};

// Sobel responses with edge replication.
EdgeMap sobel(const ImageGray& img) {
  const auto p = to8bit(img);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, h - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, w - 1);
    return p[static_cast<std::size_t>(y * w + x)];
  };
  EdgeMap e;
  e.strength.resize(p.size());
  e.angle.resize(p.size());
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      const auto i = static_cast<std::size_t>(y * w + x);
      e.strength[i] = std::sqrt(gx * gx + gy * gy);
      e.angle[i] = gx == 0.0 ? std::numbers::pi / 2 : std::atan(gy / gx);
    }
  return e;
}

// Sigmoid preservation models, scaled so that perfect preservation scores 1.
constexpr double kKg = -15.0, kSg = 0.5, kKa = -22.0, kSa = 0.8;

double preservation(double g_src, double a_src, double g_f, double a_f) {
  double g;
  if (g_src == g_f) g = 1.0;
  else g = g_src > g_f ? g_f / g_src : g_src / g_f;
  const double a = 1.0 - std::fabs(a_src - a_f) / (std::numbers::pi / 2);
  static const double gamma_g = 1.0 + std::exp(kKg * (1.0 - kSg));
  static const double gamma_a = 1.0 + std::exp(kKa * (1.0 - kSa));
  const double qg = gamma_g / (1.0 + std::exp(kKg * (g - kSg)));
  const double qa = gamma_a / (1.0 + std::exp(kKa * (a - kSa)));
  return qg * qa;
}

}  // namespace

double qabf(const ImageGray& fused, const ImageGray& a, const ImageGray& b) {
  require_same(fused, a, "qabf");
  require_same(fused, b, "qabf");
  const EdgeMap ef = sobel(fused), ea = sobel(a), eb = sobel(b);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ef.strength.size(); ++i) {
    const double wa = ea.strength[i], wb = eb.strength[i];
    const double qa = preservation(wa, ea.angle[i], ef.strength[i], ef.angle[i]);
    const double qb = preservation(wb, eb.angle[i], ef.strength[i], ef.angle[i]);
    num += qa * wa + qb * wb;
    den += wa + wb;
  }
  if (den == 0.0) return 1.0;  // no edges anywhere: nothing to lose
  return std::clamp(num / den, 0.0, 1.0);
}

const std::array<const char*, 6>& MetricReport::names() {
  static const std::array<const char*, 6> n = {"AG", "SF", "PSNR", "MI", "SSIM", "Qabf"};
  return n;
}

MetricReport evaluate_fusion(const ImageGray& fused, const ImageGray& ir, const ImageGray& vi) {
  require_same(fused, ir, "evaluate_fusion");
  require_same(fused, vi, "evaluate_fusion");
  ImageGray reference(ir.width, ir.height);
  for (std::size_t i = 0; i < reference.pixels.size(); ++i)
    reference.pixels[i] = 0.5 * (ir.pixels[i] + vi.pixels[i]);
  MetricReport r;
  r.ag = average_gradient(fused);
  r.sf = spatial_frequency(fused);
  r.psnr = psnr(fused, reference);
  r.mi = mutual_information(fused, ir) + mutual_information(fused, vi);
  r.ssim = 0.5 * (ssim(fused, ir) + ssim(fused, vi));
  r.qabf = qabf(fused, ir, vi);
  return r;
}

std::vector<double> mrank(const MetricTable& t) {
  const std::size_t n = t.methods.size(), k = t.metrics.size();
  if (n < 2) throw ValidationError("methods", "mRank needs at least two methods");
  if (k == 0) throw ValidationError("metrics", "mRank needs at least one metric");
  if (t.values.size() != n) throw ValidationError("values", "one row per method required");
  for (std::size_t i = 0; i < n; ++i) {
    if (t.values[i].size() != k)
      throw ValidationError(t.methods[i], "expected " + std::to_string(k) + " values");
    for (std::size_t j = 0; j < k; ++j)
      if (std::isnan(t.values[i][j]))
        throw ValidationError(t.methods[i] + "/" + t.metrics[j], "missing (NaN) value");
  }
  std::vector<double> sum(n, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t better = 0, equal = 0;
      for (std::size_t o = 0; o < n; ++o) {
        if (t.values[o][j] > t.values[i][j]) ++better;
        else if (t.values[o][j] == t.values[i][j]) ++equal;
      }
      // positions better+1 .. better+equal share their mean
      sum[i] += static_cast<double>(better) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
  for (auto& s : sum) s /= static_cast<double>(k);
  return sum;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

MetricTable parse_metric_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  MetricTable t;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (header) {
      if (cells.size() < 2) throw ValidationError("line 1", "header needs method and metrics");
      t.metrics.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    const std::string where = "line " + std::to_string(lineno);
    if (cells.size() != t.metrics.size() + 1)
      throw ValidationError(where, "expected " + std::to_string(t.metrics.size() + 1) + " cells");
    t.methods.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[j], &used));
        if (used != cells[j].size()) throw std::invalid_argument(cells[j]);
      } catch (const std::exception&) {
        throw ValidationError(where + "/" + t.metrics[j - 1], "not a number: '" + cells[j] + "'");
      }
    }
    t.values.push_back(std::move(row));
  }
  if (header) throw ValidationError("header", "empty metric table");
  return t;
}

std::string format_rank_csv(const MetricTable& table, const std::vector<double>& ranks) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "method,mRank\n";
  for (std::size_t i = 0; i < table.methods.size(); ++i)
    os << table.methods[i] << ',' << ranks[i] << '\n';
  return os.str();
}

}  // namespace msgf
