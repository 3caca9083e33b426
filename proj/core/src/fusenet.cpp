#include "msgf/fusenet.hpp"

#include <cstring>
#include <nlohmann/json.hpp>

#include "msgf/error.hpp"
#include "msgf/tensor_io.hpp"

namespace msgf {

namespace {

ConvLayer make_conv(ParamStore& store, Initializer& init, const std::string& name,
                    std::size_t out, std::size_t in, std::size_t k) {
  ConvLayer c;
  c.kernel = store.add(name + ".kernel", init.lecun({out, in, k, k}, in * k * k));
  c.bias = store.add(name + ".bias", Tensor({out, 1, 1}));
  return c;
}

PixelMlp make_pixel_mlp(ParamStore& store, Initializer& init, const std::string& name,
                        std::size_t c) {
  return {make_conv(store, init, name + ".hidden", c, c, 1),
          make_conv(store, init, name + ".out", c, c, 1)};
}

Var apply(const ConvLayer& c, const Var& x) { return add(conv2d(x, c.kernel), c.bias); }

Var as_volume(const Var& image) {
  const auto& s = image.shape();
  if (s.size() == 2) return reshape(image, {1, s[0], s[1]});
  if (s.size() == 3 && s[0] == 1) return image;
  throw ShapeError("expected an image [H x W] or [1 x H x W], got " + shape_str(s));
}

Var pixel_mlp(const PixelMlp& p, const Var& x) { return apply(p.out, tanh(apply(p.hidden, x))); }

}  // namespace

FusionModel::FusionModel(const RunConfig& cfg)
    : config_(cfg), vocab_(Vocabulary::from_lexicon()) {
  config_.validate();
  const std::size_t d = cfg.d, c = cfg.channels;
  Initializer init(cfg.seed);
  text = make_text_params(store_, init, vocab_.size(), d, cfg.leaky_slope);
  visual = make_visual_params(store_, init, cfg.region_channels, d, cfg.roi_grid);
  hier = make_hier_params(store_, init, d, cfg.heads);
  for (std::size_t l = 0; l < kEncoderLayers; ++l)
    encoder[l] = make_conv(store_, init, "encoder.conv" + std::to_string(l + 1), c, 1 + l * c, 3);
  mu = make_pixel_mlp(store_, init, "fusion.mu", c);
  lambda = make_pixel_mlp(store_, init, "fusion.lambda", c);
  e_proj_w = store_.add("fusion.e_proj_w", init.lecun({c, d}, d));
  e_proj_b = store_.add("fusion.e_proj_b", Tensor({c}));
  dec1 = make_conv(store_, init, "decoder.conv1", cfg.decoder_channels, c, 3);
  dec2 = make_conv(store_, init, "decoder.conv2", 1, cfg.decoder_channels, 3);
}

Var encode_image(const Var& image, const FusionModel& m) {
  std::vector<Var> features{as_volume(image)};
  Var layer;
  for (const auto& conv : m.encoder) {
    layer = tanh(apply(conv, concat(features, 0)));
    features.push_back(layer);
  }
  return layer;
}

AffineParams affine_params(const Var& psi_ir, const Var& psi_vi, const FusionModel& m) {
  if (psi_ir.shape() != psi_vi.shape())
    throw ShapeError("infrared and visible features differ: " + shape_str(psi_ir.shape()) +
                     " vs " + shape_str(psi_vi.shape()));
  return {pixel_mlp(m.mu, psi_ir), pixel_mlp(m.lambda, psi_vi)};
}

Var fuse_features(const Var& mu, const Var& lambda, const Var& e, const FusionModel& m) {
  const std::size_t c = m.config().channels;
  Var channel = reshape(add(matvec(m.e_proj_w, e), m.e_proj_b), {c, 1, 1});
  return add(hadamard(mu, channel), lambda);
}

Var decode_image(const Var& psi_f, const FusionModel& m) {
  Var out = sigmoid(apply(m.dec2, tanh(apply(m.dec1, psi_f))));
  const auto& s = out.shape();
  return reshape(out, {s[1], s[2]});
}

SceneEmbedding scene_embedding(const TextAnnotation& annotation, const RegionSet& regions,
                               const FusionModel& m, const BranchFlags& flags) {
  SceneEmbedding out;
  if (flags.tsg) {
    TextTokens t = embed_annotation(annotation, m.vocab(), m.text);
    for (std::size_t k = 0; k < kTokenCount; ++k)
      if (t.warnings[k] != ParseWarning::none)
        out.warnings.push_back("text tier " + std::to_string(k) + ": " +
                               warning_name(t.warnings[k]));
    out.text_tokens = t.tokens;
  } else {
    std::vector<Var> rows(kTokenCount, m.text.null_token);
    out.text_tokens = stack_rows(rows);
  }

  std::vector<SubGraphEmbedding> subgraphs;
  if (flags.vsg) {
    subgraphs = visual_subgraphs(regions, m.visual, m.config().t_iters, m.config().top_n);
    if (subgraphs.empty()) out.warnings.push_back("visual graph: no regions");
  }
  std::vector<Var> embeddings;
  for (auto& s : subgraphs) embeddings.push_back(s.embedding);
  out.visual_tokens = reconstruct_visual(embeddings, m.hier).tokens;

  if (flags.msgha) {
    out.e = cls_attend(tier_fuse(out.visual_tokens, out.text_tokens, m.hier), m.hier).embedding;
  } else {
    out.e = reduce(concat({out.visual_tokens, out.text_tokens}, 0), ReduceKind::mean, 0);
  }
  return out;
}

FuseOutput fuse_forward(const Var& ir, const Var& vi, const TextAnnotation& annotation,
                        const RegionSet& regions, const FusionModel& m, const BranchFlags& flags) {
  if (ir.shape() != vi.shape())
    throw ShapeError("source images differ in size: " + shape_str(ir.shape()) + " vs " +
                     shape_str(vi.shape()));
  SceneEmbedding se = scene_embedding(annotation, regions, m, flags);
  AffineParams ap = affine_params(encode_image(ir, m), encode_image(vi, m), m);
  Var image = decode_image(fuse_features(ap.mu, ap.lambda, se.e, m), m);
  return {image, se.e, std::move(se.warnings)};
}

ImageGray fuse_pair(const ImageGray& ir, const ImageGray& vi, const TextAnnotation& annotation,
                    const RegionSet& regions, const FusionModel& m, const BranchFlags& flags,
                    std::vector<std::string>* warnings) {
  NoGradScope no_grad;
  FuseOutput out = fuse_forward(Var::constant(ir.to_tensor()), Var::constant(vi.to_tensor()),
                                annotation, regions, m, flags);
  if (warnings) *warnings = std::move(out.warnings);
  return ImageGray::from_tensor(out.image.value());
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'S', 'G', 'C', 'K', 'P', 'T', '1'};

}  // namespace

std::string encode_checkpoint(const FusionModel& m) {
  nlohmann::ordered_json manifest;
  manifest["config"] = serialize_config(m.config());
  manifest["params"] = nlohmann::ordered_json::array();
  std::string blobs;
  for (const auto& p : m.store().params()) {
    std::string blob = encode_msgt(p.var.value());
    manifest["params"].push_back({{"name", p.name},
                                  {"offset", blobs.size()},
                                  {"bytes", blob.size()},
                                  {"shape", p.var.shape()}});
    blobs += blob;
  }
  const std::string header = manifest.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  std::uint64_t len = header.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((len >> (8 * b)) & 0xff));
  return out + header + blobs;
}

FusionModel decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw ParseError("not a checkpoint (bad magic)", 0);
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
  if (len > bytes.size() - 16) throw ParseError("checkpoint manifest truncated", 8);
  const std::size_t base = 16 + len;

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 16 + e.byte);
  }
  try {
    FusionModel m(parse_config(manifest.at("config").get<std::string>()));
    auto& params = m.store().params();
    const auto& entries = manifest.at("params");
    if (entries.size() != params.size())
      throw ValidationError("params", "checkpoint holds " + std::to_string(entries.size()) +
                                          " tensors, model expects " +
                                          std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = entries[i];
      const std::string field = "params[" + std::to_string(i) + "]";
      if (e.at("name").get<std::string>() != params[i].name)
        throw ValidationError(field + ".name", "expected '" + params[i].name + "'");
      const auto off = e.at("offset").get<std::size_t>();
      const auto n = e.at("bytes").get<std::size_t>();
      if (off > bytes.size() - base || n > bytes.size() - base - off)
        throw ParseError("tensor '" + params[i].name + "' runs past the end", base + off);
      Tensor t = decode_msgt(bytes.substr(base + off, n));
      if (t.shape() != params[i].var.shape())
        throw ValidationError(field + ".shape", "expected " + shape_str(params[i].var.shape()) +
                                                    ", got " + shape_str(t.shape()));
      params[i].var.mutable_value() = std::move(t);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest", e.what());
  }
}

void save_checkpoint(const FusionModel& m, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(m));
}

FusionModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace msgf
