#pragma once

// File ingestion and emission: PGM images, region proposals, masks,
// hierarchical text annotations, run configuration and dataset manifests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msgf/tensor.hpp"

namespace msgf {

namespace fs = std::filesystem;

/// Single-channel image with pixels in [0,1], row-major.
struct ImageGray {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  ImageGray() = default;
  ImageGray(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  // [H x W] tensor view of the pixels.
  Tensor to_tensor() const;
  // Accepts [H x W] or [1 x H x W]; values must lie in [0,1].
  static ImageGray from_tensor(const Tensor& t);

  // Throws ValidationError unless dims are positive, sized, and in range.
  void validate() const;
  bool operator==(const ImageGray&) const = default;
};

struct BoundingBox {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open: [x0,x1) x [y0,y1)
  std::int64_t width() const { return x1 - x0; }
  std::int64_t height() const { return y1 - y0; }
  bool valid() const { return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1; }
  bool contains(const BoundingBox& o) const {
    return x0 <= o.x0 && y0 <= o.y0 && x1 >= o.x1 && y1 >= o.y1;
  }
  bool operator==(const BoundingBox&) const = default;
};

/// Ingested detector output: backbone feature map plus scored boxes in
/// feature-map coordinates.
struct RegionSet {
  Tensor feature_map;  // [C x H x W]
  std::vector<BoundingBox> boxes;
  std::vector<double> scores;
};

using Sentence = std::vector<std::string>;

/// Three object-level sentences, one region-level and one global-level.
struct TextAnnotation {
  std::array<Sentence, 3> object;
  Sentence region;
  Sentence global;

  // Tiers in token order: obj, obj, obj, reg, glob.
  std::array<const Sentence*, 5> tiers() const {
    return {&object[0], &object[1], &object[2], &region, &global};
  }
  bool operator==(const TextAnnotation&) const = default;
};

/// Foreground mask and complementary per-pixel source weights.
struct RegionWeights {
  std::size_t width = 0, height = 0;
  std::vector<double> mask;  // 0 or 1
  std::vector<double> w_ir;
  std::vector<double> w_vi;  // 1 - w_ir
};

struct RunConfig {
  std::size_t d = 16;             // embedding width (text and visual)
  std::size_t t_iters = 2;        // visual message-passing rounds
  std::size_t top_n = 3;          // selected visual subgraphs
  double lr = 1e-4;
  std::size_t batch = 2;
  std::size_t epochs = 100;
  double alpha = 2.2;
  double beta = 1.2;
  double gamma = 1.0;
  double eta = 0.3;
  std::size_t contrast_window = 9;
  std::uint64_t seed = 0;
  std::size_t crop = 32;
  std::size_t channels = 16;          // encoder feature width C
  std::size_t decoder_channels = 8;
  std::size_t region_channels = 4;    // channels of ingested feature maps
  std::size_t roi_grid = 2;
  std::size_t heads = 2;
  double leaky_slope = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t checkpoint_every = 0;   // 0 = only at the end

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Paths of one training/evaluation sample, already resolved.
struct SamplePaths {
  fs::path ir, vi, annotation, regions, mask, w_ir;
};

struct DataSample {
  std::string name;
  ImageGray ir, vi;
  TextAnnotation annotation;
  RegionSet regions;
  RegionWeights weights;
};

// PGM (binary P5, maxval 255) I/O.
ImageGray decode_pgm(const std::string& bytes);
std::string encode_pgm(const ImageGray& img);
ImageGray load_image(const fs::path& path);
void save_image(const ImageGray& img, const fs::path& path);

// regions.json: {"feature_map": "<file>.msgt", "boxes": [[x0,y0,x1,y1],...],
// "scores": [...]}; the feature map path is relative to the JSON file.
RegionSet parse_regions(const std::string& json_text, const fs::path& base_dir);
RegionSet load_regions(const fs::path& path);
void save_regions(const RegionSet& r, const fs::path& json_path, const fs::path& tensor_path);

// annotation.json: {"object": [s, s, s], "region": s, "global": s}.
Sentence tokenize(const std::string& text);
std::string join_tokens(const Sentence& s);
TextAnnotation parse_annotation(const std::string& json_text);
TextAnnotation load_annotation(const fs::path& path);
std::string serialize_annotation(const TextAnnotation& a);
void save_annotation(const TextAnnotation& a, const fs::path& path);

// Mask PGM (pixel >= 0.5 is foreground) and w_ir PGM; w_vi = 1 - w_ir.
RegionWeights make_region_weights(const ImageGray& mask, const ImageGray& w_ir);
RegionWeights load_region_weights(const fs::path& mask_path, const fs::path& w_ir_path);

// Flat key=value text, '#' comments. Unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const fs::path& path);
std::string serialize_config(const RunConfig& cfg);

// JSON list of {ir, vi, annotation, regions, mask, w_ir}, relative to the
// manifest's directory.
std::vector<SamplePaths> load_manifest(const fs::path& path);
DataSample load_sample(const SamplePaths& paths);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& bytes);

}  // namespace msgf
