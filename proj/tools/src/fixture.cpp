#include "msgf/fixture.hpp"

#include <cmath>
#include <random>

#include "msgf/tensor_io.hpp"

namespace msgf {

namespace {

constexpr double kDiskValue = 0.95;

double disk_radius(std::size_t size) { return 0.22 * static_cast<double>(size); }

bool in_disk(std::size_t size, std::size_t y, std::size_t x) {
  const double c = 0.5 * static_cast<double>(size - 1);
  const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
  return dy * dy + dx * dx <= disk_radius(size) * disk_radius(size);
}

// Coarse average of the two images over a cell grid, four channels:
// infrared, visible, their product and the visible horizontal gradient.
Tensor feature_map(const ImageGray& ir, const ImageGray& vi, std::size_t cells) {
  const std::size_t s = ir.width, step = s / cells;
  Tensor f({4, cells, cells});
  for (std::size_t cy = 0; cy < cells; ++cy)
    for (std::size_t cx = 0; cx < cells; ++cx) {
      double a = 0, b = 0, p = 0, g = 0;
      for (std::size_t y = cy * step; y < (cy + 1) * step; ++y)
        for (std::size_t x = cx * step; x < (cx + 1) * step; ++x) {
          a += ir.at(y, x);
          b += vi.at(y, x);
          p += ir.at(y, x) * vi.at(y, x);
          if (x + 1 < s) g += std::fabs(vi.at(y, x + 1) - vi.at(y, x));
        }
      const double n = static_cast<double>(step * step);
      f.at(0, cy, cx) = a / n;
      f.at(1, cy, cx) = b / n;
      f.at(2, cy, cx) = p / n;
      f.at(3, cy, cx) = g / n;
    }
  return f;
}

}  // namespace

ImageGray make_disk_image(std::size_t size) {
  ImageGray img(size, size, 0.0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      if (in_disk(size, y, x)) img.at(y, x) = kDiskValue;
  return img;
}

ImageGray make_texture_image(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  ImageGray img(size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double stripes = 0.12 * std::sin(0.9 * static_cast<double>(x)) *
                             std::cos(0.6 * static_cast<double>(y));
      const double checks = ((x / 4 + y / 4) % 2 == 0) ? 0.08 : -0.08;
      img.at(y, x) = std::clamp(0.35 + stripes + checks + noise(rng), 0.0, 1.0);
    }
  return img;
}

TextAnnotation fixture_annotation() {
  TextAnnotation a;
  a.object = {tokenize("a bright person walking on the road"),
              tokenize("a white car parked near the building"),
              tokenize("two trees beside the road")};
  a.region = tokenize("a warm pedestrian crossing the dark street");
  a.global = tokenize("a nighttime street scene with a hot person and two cars");
  return a;
}

DataSample make_fixture_sample(const FixtureOptions& opts) {
  const std::size_t s = opts.size;
  DataSample d;
  d.name = "fixture";
  d.ir = make_disk_image(s);
  d.vi = make_texture_image(s, opts.seed);
  d.annotation = fixture_annotation();

  ImageGray mask(s, s, 0.0), w_ir(s, s, 0.3);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x)
      if (in_disk(s, y, x)) {
        mask.at(y, x) = 1.0;
        w_ir.at(y, x) = 0.8;
      }
  d.weights = make_region_weights(mask, w_ir);

  const std::size_t cells = 8;
  d.regions.feature_map = feature_map(d.ir, d.vi, cells);
  d.regions.boxes = {{2, 2, 6, 6}, {0, 0, 3, 8}, {5, 4, 8, 8}, {1, 5, 4, 8}};
  d.regions.scores = {0.95, 0.6, 0.75, 0.4};
  return d;
}

std::filesystem::path write_fixture(const std::filesystem::path& dir, const FixtureOptions& opts) {
  std::filesystem::create_directories(dir);
  const DataSample d = make_fixture_sample(opts);
  save_image(d.ir, dir / "ir.pgm");
  save_image(d.vi, dir / "vi.pgm");
  ImageGray mask(d.weights.width, d.weights.height), w_ir(d.weights.width, d.weights.height);
  mask.pixels = d.weights.mask;
  w_ir.pixels = d.weights.w_ir;
  save_image(mask, dir / "mask.pgm");
  save_image(w_ir, dir / "w_ir.pgm");
  save_annotation(d.annotation, dir / "annotation.json");
  save_regions(d.regions, dir / "regions.json", dir / "features.msgt");
  const auto manifest = dir / "manifest.json";
  write_file(manifest,
             "[{\"ir\": \"ir.pgm\", \"vi\": \"vi.pgm\", \"annotation\": \"annotation.json\", "
             "\"regions\": \"regions.json\", \"mask\": \"mask.pgm\", \"w_ir\": \"w_ir.pgm\"}]\n");
  return manifest;
}

}  // namespace msgf
