#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "doctest.h"
#include "msgf/error.hpp"
#include "msgf/fixture.hpp"
#include "msgf/metrics.hpp"
#include "test_support.hpp"

using namespace msgf;

namespace {

ImageGray from_levels(std::size_t w, std::size_t h, const std::function<double(std::size_t, std::size_t)>& f) {
  ImageGray img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.at(y, x) = f(y, x) / 255.0;
  return img;
}

ImageGray transpose(const ImageGray& a) {
  ImageGray t(a.height, a.width);
  for (std::size_t y = 0; y < a.height; ++y)
    for (std::size_t x = 0; x < a.width; ++x) t.at(x, y) = a.at(y, x);
  return t;
}

ImageGray noisy(const ImageGray& a, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, sigma);
  ImageGray out = a;
  for (double& p : out.pixels) p = std::clamp(p + n(rng), 0.0, 1.0);
  return out;
}

// Independent plug-in entropy of the 8-bit levels.
double entropy_oracle(const ImageGray& a) {
  std::map<long, double> counts;
  for (double p : a.pixels) counts[std::lround(p * 255.0)] += 1;
  double h = 0;
  const double n = static_cast<double>(a.pixels.size());
  for (const auto& [level, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

MetricTable table(std::vector<std::vector<double>> values) {
  MetricTable t;
  for (std::size_t i = 0; i < values.size(); ++i) t.methods.push_back("m" + std::to_string(i));
  for (std::size_t j = 0; j < values.front().size(); ++j) t.metrics.push_back("k" + std::to_string(j));
  t.values = std::move(values);
  return t;
}

}  // namespace

TEST_CASE("average gradient") {
  CHECK(average_gradient(ImageGray(6, 5, 0.3)) == 0.0);
  const ImageGray ramp = from_levels(8, 6, [](std::size_t, std::size_t x) { return 10.0 * x; });
  CHECK(average_gradient(ramp) == doctest::Approx(10.0 / std::sqrt(2.0)).epsilon(1e-12));
  const ImageGray tex = make_texture_image(16, 3);
  CHECK(average_gradient(transpose(tex)) == doctest::Approx(average_gradient(tex)).epsilon(1e-12));
  CHECK_THROWS_AS(average_gradient(ImageGray(1, 4)), ContractError);
}

TEST_CASE("spatial frequency") {
  const ImageGray cols = from_levels(8, 8, [](std::size_t, std::size_t x) { return 255.0 * (x % 2); });
  CHECK(spatial_frequency(cols) == doctest::Approx(255.0).epsilon(1e-12));
  CHECK(spatial_frequency(ImageGray(4, 4, 0.7)) == 0.0);
  const ImageGray tex = make_texture_image(16, 4);
  CHECK(spatial_frequency(transpose(tex)) == doctest::Approx(spatial_frequency(tex)).epsilon(1e-12));
}

TEST_CASE("PSNR") {
  const ImageGray a(8, 8, 0.2);
  CHECK(psnr(a, a) == kPsnrSentinel);
  ImageGray b = a;
  for (double& p : b.pixels) p += 16.0 / 255.0;
  CHECK(psnr(b, a) == doctest::Approx(10.0 * std::log10(65025.0 / 256.0)).epsilon(1e-12));
  CHECK(std::fabs(psnr(b, a) - 24.05) < 0.01);

  std::mt19937_64 rng(1);
  const ImageGray tex = make_texture_image(32, 5);
  double prev = kPsnrSentinel;
  for (int level = 1; level <= 10; ++level) {
    std::mt19937_64 r(level);
    const double p = psnr(noisy(tex, 0.01 * level, r), tex);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(psnr(a, ImageGray(7, 8)), ShapeError);
}

TEST_CASE("mutual information") {
  const ImageGray a = make_texture_image(24, 6), b = make_texture_image(24, 7);
  CHECK(std::fabs(mutual_information(a, a) - entropy_oracle(a)) < 1e-9);
  CHECK(std::fabs(entropy(a) - entropy_oracle(a)) < 1e-9);
  CHECK(mutual_information(a, ImageGray(24, 24, 0.5)) == 0.0);
  CHECK(std::fabs(mutual_information(a, b) - mutual_information(b, a)) < 1e-12);
  CHECK(mutual_information(a, b) <= mutual_information(a, a) + 1e-12);
}

TEST_CASE("SSIM") {
  const ImageGray a = make_texture_image(16, 8);
  CHECK(ssim(a, a) == 1.0);
  ImageGray inv = a;
  for (double& p : inv.pixels) p = 1.0 - p;
  CHECK(ssim(a, inv) < 0.0);

  const double u = 0.3 * 255, v = 0.31 * 255, c1 = std::pow(0.01 * 255.0, 2);
  const double want = (2 * u * v + c1) / (u * u + v * v + c1);
  CHECK(std::fabs(ssim(ImageGray(9, 9, 0.3), ImageGray(9, 9, 0.31)) - want) < 1e-12);
  CHECK_THROWS_AS(ssim(ImageGray(7, 9), ImageGray(7, 9)), ContractError);
}

TEST_CASE("Qabf") {
  const ImageGray a = make_texture_image(16, 9), b = make_disk_image(16);
  CHECK(qabf(a, a, a) >= 0.999);
  CHECK(qabf(ImageGray(16, 16, 0.5), a, b) < 0.05);
  CHECK(std::fabs(qabf(a, a, b) - qabf(a, b, a)) < 1e-12);
  const double q = qabf(b, a, b);
  CHECK(q >= 0.0);
  CHECK(q <= 1.0);
}

TEST_CASE("evaluate_fusion") {
  const ImageGray a = make_texture_image(16, 10), b = make_disk_image(16);
  const MetricReport r = evaluate_fusion(a, a, b);
  CHECK(r.ag == average_gradient(a));
  CHECK(r.mi == doctest::Approx(mutual_information(a, a) + mutual_information(a, b)));
  CHECK(r.ssim == doctest::Approx(0.5 * (1.0 + ssim(a, b))));
  CHECK(MetricReport::names()[5] == std::string("Qabf"));
}

TEST_CASE("mean rank") {
  CHECK(mrank(table({{3, 3}, {2, 1}, {1, 2}})) == std::vector<double>{1.0, 2.5, 2.5});
  CHECK(mrank(table({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}})) ==
        std::vector<double>{2.5, 2.5, 2.5, 2.5});
  CHECK(mrank(table({{5, 1}, {5, 2}, {4, 3}})) == std::vector<double>{2.25, 1.75, 2.0});
  CHECK_THROWS_AS(mrank(table({{1, NAN}, {2, 3}})), ValidationError);
  CHECK_THROWS_AS(mrank(table({{1, 2}})), ValidationError);
  MetricTable ragged = table({{1, 2}, {2, 3}});
  ragged.values[1].pop_back();
  CHECK_THROWS_AS(mrank(ragged), ValidationError);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> v(5, std::vector<double>(4));
    for (auto& r : v)
      for (double& x : r) x = std::round(u(rng));
    const auto base = mrank(table(v));
    for (auto& r : v)
      for (double& x : r) x = std::exp(0.5 * x) + 3.0;
    CHECK(mrank(table(v)) == base);
    double total = 0;
    for (double x : base) total += x;
    CHECK(std::fabs(total - 15.0) < 1e-12);
  }
}

TEST_CASE("mean rank reproduces the published comparison") {
  const auto& rows = test::published_table();
  const auto ranks = mrank(test::published_metric_table());
  std::size_t close = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::fabs(ranks[i] - rows[i].mrank) <= 0.15) ++close;
    if (std::string(rows[i].method) == "SwinFusion") CHECK(std::fabs(ranks[i] - rows[i].mrank) < 0.01);
  }
  CHECK(close >= 6);
}

TEST_CASE("metric CSV") {
  const MetricTable t = parse_metric_csv("method, A ,B\n# comment\n\nx,1,2.5\ny,3,-1e-2\n");
  CHECK(t.metrics == std::vector<std::string>{"A", "B"});
  CHECK(t.methods == std::vector<std::string>{"x", "y"});
  CHECK(t.values[1][1] == -0.01);
  CHECK(format_rank_csv(t, mrank(t)) == "method,mRank\nx,1.500\ny,1.500\n");
  CHECK_THROWS_AS(parse_metric_csv(""), ValidationError);
  CHECK_THROWS_AS(parse_metric_csv("method,A\nx,1,2\n"), ValidationError);
  CHECK_THROWS_AS(parse_metric_csv("method,A\nx,abc\n"), ValidationError);
  CHECK_THROWS_AS(parse_metric_csv("method,A\nx,1.5q\n"), ValidationError);
}
