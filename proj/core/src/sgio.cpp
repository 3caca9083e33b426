#include "msgf/sgio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "msgf/error.hpp"
#include "msgf/tensor_io.hpp"

namespace msgf {

using json = nlohmann::json;

namespace {
constexpr std::size_t kMaxImageSide = 1u << 14;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Images

Tensor ImageGray::to_tensor() const { return Tensor({height, width}, pixels); }

ImageGray ImageGray::from_tensor(const Tensor& t) {
  const auto& s = t.shape();
  ImageGray img;
  if (s.size() == 2) {
    img.height = s[0];
    img.width = s[1];
  } else if (s.size() == 3 && s[0] == 1) {
    img.height = s[1];
    img.width = s[2];
  } else {
    throw ShapeError("image tensor must be [H x W] or [1 x H x W], got " + shape_str(s));
  }
  img.pixels = t.vector();
  img.validate();
  return img;
}

void ImageGray::validate() const {
  if (width == 0 || height == 0) throw ValidationError("image", "dimensions must be positive");
  if (pixels.size() != width * height)
    throw ValidationError("image", "pixel count does not match width*height");
  for (std::size_t i = 0; i < pixels.size(); ++i)
    if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0))
      throw ValidationError("image.pixels[" + std::to_string(i) + "]", "value outside [0,1]");
}

ImageGray decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ParseError("not a binary PGM (expected P5 magic)", 0);
  pos = 2;

  auto skip_ws_and_comments = [&] {
    bool any = false;
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        any = true;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
        any = true;
      } else {
        break;
      }
    }
    return any;
  };
  auto read_uint = [&](const char* what) -> std::size_t {
    if (!skip_ws_and_comments()) throw ParseError(std::string("expected whitespace before ") + what, pos);
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > kMaxImageSide * 16) throw ParseError(std::string(what) + " too large", start);
      ++pos;
    }
    if (pos == start) throw ParseError(std::string("expected ") + what, pos);
    return v;
  };

  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval_pos = pos;
  const std::size_t maxval = read_uint("maxval");
  if (width == 0 || height == 0 || width > kMaxImageSide || height > kMaxImageSide)
    throw ParseError("image dimensions out of range", maxval_pos);
  if (maxval != 255) throw ParseError("maxval must be 255, got " + std::to_string(maxval), pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ParseError("expected single whitespace after maxval", pos);
  ++pos;
  const std::size_t need = width * height;
  if (bytes.size() - pos < need)
    throw ParseError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                         std::to_string(bytes.size() - pos),
                     bytes.size());
  ImageGray img(width, height);
  for (std::size_t i = 0; i < need; ++i)
    img.pixels[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return img;
}

std::string encode_pgm(const ImageGray& img) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height)
    throw ValidationError("image", "inconsistent dimensions");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) {
    const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return out;
}

ImageGray load_image(const fs::path& path) { return decode_pgm(read_file(path)); }

void save_image(const ImageGray& img, const fs::path& path) { write_file(path, encode_pgm(img)); }

// ---------------------------------------------------------------------------
// Regions

namespace {

template <class F>
auto with_json_errors(const std::string& what, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what(), e.byte);
  } catch (const json::exception& e) {
    throw ValidationError(what, e.what());
  }
}

std::int64_t as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field, "expected an integer");
  return j.get<std::int64_t>();
}

}  // namespace

RegionSet parse_regions(const std::string& json_text, const fs::path& base_dir) {
  return with_json_errors("regions", [&] {
    const json doc = json::parse(json_text);
    if (!doc.is_object()) throw ValidationError("$", "expected a JSON object");
    RegionSet r;

    if (!doc.contains("feature_map") || !doc["feature_map"].is_string())
      throw ValidationError("feature_map", "missing or not a string");
    const fs::path tensor_path = base_dir / doc["feature_map"].get<std::string>();
    try {
      r.feature_map = load_tensor(tensor_path);
    } catch (const Error& e) {
      throw ValidationError("feature_map", std::string("cannot load tensor: ") + e.what());
    }
    if (r.feature_map.rank() != 3)
      throw ValidationError("feature_map", "tensor must be [C x H x W], got " +
                                               shape_str(r.feature_map.shape()));
    if (!r.feature_map.all_finite()) throw ValidationError("feature_map", "non-finite values");
    const auto H = static_cast<std::int64_t>(r.feature_map.dim(1));
    const auto W = static_cast<std::int64_t>(r.feature_map.dim(2));

    if (!doc.contains("boxes") || !doc["boxes"].is_array())
      throw ValidationError("boxes", "missing or not an array");
    const auto& boxes = doc["boxes"];
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const std::string field = "boxes[" + std::to_string(i) + "]";
      const auto& b = boxes[i];
      if (!b.is_array() || b.size() != 4) throw ValidationError(field, "expected [x0,y0,x1,y1]");
      BoundingBox box{as_int(b[0], field + "[0]"), as_int(b[1], field + "[1]"),
                      as_int(b[2], field + "[2]"), as_int(b[3], field + "[3]")};
      if (!box.valid()) throw ValidationError(field, "degenerate or negative box");
      if (box.x1 > W || box.y1 > H)
        throw ValidationError(field, "box outside feature map " + shape_str(r.feature_map.shape()));
      r.boxes.push_back(box);
    }

    if (!doc.contains("scores") || !doc["scores"].is_array())
      throw ValidationError("scores", "missing or not an array");
    const auto& scores = doc["scores"];
    if (scores.size() != r.boxes.size())
      throw ValidationError("scores", "length " + std::to_string(scores.size()) +
                                          " does not match boxes " + std::to_string(r.boxes.size()));
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const std::string field = "scores[" + std::to_string(i) + "]";
      if (!scores[i].is_number()) throw ValidationError(field, "expected a number");
      const double s = scores[i].get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw ValidationError(field, "score outside [0,1]");
      r.scores.push_back(s);
    }
    return r;
  });
}

RegionSet load_regions(const fs::path& path) {
  return parse_regions(read_file(path), path.parent_path());
}

void save_regions(const RegionSet& r, const fs::path& json_path, const fs::path& tensor_path) {
  save_tensor(r.feature_map, tensor_path);
  json doc;
  const fs::path base = json_path.has_parent_path() ? json_path.parent_path() : fs::path(".");
  doc["feature_map"] = fs::relative(tensor_path, base).generic_string();
  doc["boxes"] = json::array();
  for (const auto& b : r.boxes) doc["boxes"].push_back({b.x0, b.y0, b.x1, b.y1});
  doc["scores"] = r.scores;
  write_file(json_path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Annotations

Sentence tokenize(const std::string& text) {
  Sentence out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(' ');
    out += s[i];
  }
  return out;
}

TextAnnotation parse_annotation(const std::string& json_text) {
  return with_json_errors("annotation", [&] {
    const json doc = json::parse(json_text);
    if (!doc.is_object()) throw ValidationError("$", "expected a JSON object");
    auto sentence = [](const json& j, const std::string& field) {
      if (!j.is_string()) throw ValidationError(field, "expected a string");
      Sentence s = tokenize(j.get<std::string>());
      if (s.empty()) throw ValidationError(field, "empty sentence");
      return s;
    };
    TextAnnotation a;
    if (!doc.contains("object") || !doc["object"].is_array())
      throw ValidationError("object", "missing or not an array");
    if (doc["object"].size() != 3)
      throw ValidationError("object", "expected exactly 3 sentences, got " +
                                          std::to_string(doc["object"].size()));
    for (std::size_t i = 0; i < 3; ++i)
      a.object[i] = sentence(doc["object"][i], "object[" + std::to_string(i) + "]");
    if (!doc.contains("region")) throw ValidationError("region", "missing");
    a.region = sentence(doc["region"], "region");
    if (!doc.contains("global")) throw ValidationError("global", "missing");
    a.global = sentence(doc["global"], "global");
    return a;
  });
}

TextAnnotation load_annotation(const fs::path& path) { return parse_annotation(read_file(path)); }

std::string serialize_annotation(const TextAnnotation& a) {
  nlohmann::ordered_json doc;
  doc["object"] = {join_tokens(a.object[0]), join_tokens(a.object[1]), join_tokens(a.object[2])};
  doc["region"] = join_tokens(a.region);
  doc["global"] = join_tokens(a.global);
  return doc.dump(2) + "\n";
}

void save_annotation(const TextAnnotation& a, const fs::path& path) {
  write_file(path, serialize_annotation(a));
}

// ---------------------------------------------------------------------------
// Region weights

RegionWeights make_region_weights(const ImageGray& mask, const ImageGray& w_ir) {
  if (mask.width != w_ir.width || mask.height != w_ir.height)
    throw ShapeError("mask and w_ir dimensions differ");
  RegionWeights rw;
  rw.width = mask.width;
  rw.height = mask.height;
  rw.mask.resize(mask.pixels.size());
  rw.w_ir = w_ir.pixels;
  rw.w_vi.resize(w_ir.pixels.size());
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    rw.mask[i] = mask.pixels[i] >= 0.5 ? 1.0 : 0.0;
    rw.w_vi[i] = 1.0 - w_ir.pixels[i];
  }
  return rw;
}

RegionWeights load_region_weights(const fs::path& mask_path, const fs::path& w_ir_path) {
  return make_region_weights(load_image(mask_path), load_image(w_ir_path));
}

// ---------------------------------------------------------------------------
// Config

namespace {

struct ConfigField {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
  return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x))
    throw ConfigError(key + ": invalid number '" + v + "'");
  return x;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
#define MSGF_SIZE_FIELD(name)                                                               \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_size(#name, v); },      \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define MSGF_REAL_FIELD(name)                                                               \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_real(#name, v); },      \
           [](const RunConfig& c) { return fmt_real(c.name); }}}
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      MSGF_SIZE_FIELD(d),
      MSGF_SIZE_FIELD(t_iters),
      MSGF_SIZE_FIELD(top_n),
      MSGF_REAL_FIELD(lr),
      MSGF_SIZE_FIELD(batch),
      MSGF_SIZE_FIELD(epochs),
      MSGF_REAL_FIELD(alpha),
      MSGF_REAL_FIELD(beta),
      MSGF_REAL_FIELD(gamma),
      MSGF_REAL_FIELD(eta),
      MSGF_SIZE_FIELD(contrast_window),
      MSGF_SIZE_FIELD(seed),
      MSGF_SIZE_FIELD(crop),
      MSGF_SIZE_FIELD(channels),
      MSGF_SIZE_FIELD(decoder_channels),
      MSGF_SIZE_FIELD(region_channels),
      MSGF_SIZE_FIELD(roi_grid),
      MSGF_SIZE_FIELD(heads),
      MSGF_REAL_FIELD(leaky_slope),
      MSGF_REAL_FIELD(adam_beta1),
      MSGF_REAL_FIELD(adam_beta2),
      MSGF_REAL_FIELD(adam_eps),
      MSGF_SIZE_FIELD(checkpoint_every),
  };
#undef MSGF_SIZE_FIELD
#undef MSGF_REAL_FIELD
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  if (d < 4) throw ConfigError("d must be >= 4");
  if (top_n < 1) throw ConfigError("top_n must be >= 1");
  if (t_iters < 1) throw ConfigError("t_iters must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (heads < 1 || d % heads != 0)
    throw ConfigError("d (" + std::to_string(d) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  if (contrast_window % 2 == 0) throw ConfigError("contrast_window must be odd");
  if (channels < 1 || decoder_channels < 1 || region_channels < 1 || roi_grid < 1)
    throw ConfigError("channel counts and roi_grid must be >= 1");
  if (lr < 0) throw ConfigError("lr must be >= 0");
  if (alpha < 0 || beta < 0 || gamma < 0 || eta < 0)
    throw ConfigError("loss weights must be non-negative");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& [name, field] : config_fields()) {
      if (name != key) continue;
      if (seen[key]) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
      seen[key] = true;
      field.set(cfg, value);
      found = true;
      break;
    }
    if (!found) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : config_fields()) out += name + "=" + field.get(cfg) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<SamplePaths> load_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  const fs::path base = path.parent_path();
  return with_json_errors("manifest", [&] {
    const json doc = json::parse(text);
    if (!doc.is_array()) throw ValidationError("$", "manifest must be a JSON list");
    std::vector<SamplePaths> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string prefix = "[" + std::to_string(i) + "]";
      const auto& e = doc[i];
      if (!e.is_object()) throw ValidationError(prefix, "expected an object");
      auto get = [&](const char* key) {
        if (!e.contains(key) || !e[key].is_string())
          throw ValidationError(prefix + "." + key, "missing or not a string");
        return base / e[key].get<std::string>();
      };
      out.push_back({get("ir"), get("vi"), get("annotation"), get("regions"), get("mask"), get("w_ir")});
    }
    if (out.empty()) throw ValidationError("$", "manifest lists no samples");
    return out;
  });
}

DataSample load_sample(const SamplePaths& paths) {
  DataSample s;
  s.name = paths.ir.stem().string();
  s.ir = load_image(paths.ir);
  s.vi = load_image(paths.vi);
  if (s.ir.width != s.vi.width || s.ir.height != s.vi.height)
    throw ShapeError("infrared and visible images differ in size: " + paths.ir.string());
  s.annotation = load_annotation(paths.annotation);
  s.regions = load_regions(paths.regions);
  s.weights = load_region_weights(paths.mask, paths.w_ir);
  if (s.weights.width != s.ir.width || s.weights.height != s.ir.height)
    throw ShapeError("mask/weight maps do not match image size: " + paths.mask.string());
  return s;
}

}  // namespace msgf
