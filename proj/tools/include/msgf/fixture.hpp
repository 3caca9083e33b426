#pragma once

// Synthetic infrared/visible pair used by the tests, benchmarks and the
// smoke experiments: a bright disk on black (infrared) and a textured
// background (visible), with matching mask, weights, regions and captions.

#include <filesystem>

#include "msgf/sgio.hpp"

namespace msgf {

struct FixtureOptions {
  std::size_t size = 32;
  std::uint64_t seed = 0;
};

ImageGray make_disk_image(std::size_t size);
ImageGray make_texture_image(std::size_t size, std::uint64_t seed);
TextAnnotation fixture_annotation();
DataSample make_fixture_sample(const FixtureOptions& opts = {});

// Writes ir.pgm, vi.pgm, mask.pgm, w_ir.pgm, annotation.json, regions.json,
// features.msgt and manifest.json into `dir`; returns the manifest path.
std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                    const FixtureOptions& opts = {});

}  // namespace msgf
