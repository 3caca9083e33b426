#pragma once

// Image-side networks and the scene-graph driven affine fusion head.
//
//   psi = Encoder(I)                       shared dense conv stack
//   mu  = MLP_mu(psi_ir), lambda = MLP_lambda(psi_vi)   per pixel
//   psi_f = mu * broadcast(P E) + lambda
//   I_f = Decoder(psi_f)
//
// E comes from the text and visual scene graphs through msgha.

#include <filesystem>
#include <string>
#include <vector>

#include "msgf/msgha.hpp"
#include "msgf/params.hpp"
#include "msgf/sgio.hpp"
#include "msgf/textsg.hpp"
#include "msgf/vissg.hpp"

namespace msgf {

inline constexpr std::size_t kEncoderLayers = 3;

struct ConvLayer {
  Var kernel;  // [O x I x 3 x 3]
  Var bias;    // [O x 1 x 1]
};

// Per-pixel two-layer perceptron over channels, realized as 1x1 convolutions.
struct PixelMlp {
  ConvLayer hidden;  // C -> C, tanh
  ConvLayer out;     // C -> C, linear
};

// Which graph branches feed E. A disabled branch is replaced by its null
// tokens; with msgha off, E is the mean of the ten V and T tokens.
struct BranchFlags {
  bool tsg = true;
  bool vsg = true;
  bool msgha = true;
};

/// Every learnable tensor of the pipeline plus the hyperparameters that fix
/// their shapes. Parameters are registered once, in a fixed order, in `store`.
class FusionModel {
 public:
  explicit FusionModel(const RunConfig& cfg);
  // Copies would alias the parameter nodes, so models only move.
  FusionModel(const FusionModel&) = delete;
  FusionModel& operator=(const FusionModel&) = delete;
  FusionModel(FusionModel&&) = default;
  FusionModel& operator=(FusionModel&&) = default;

  const RunConfig& config() const noexcept { return config_; }
  ParamStore& store() noexcept { return store_; }
  const ParamStore& store() const noexcept { return store_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

  TextGraphParams text;
  VisualParams visual;
  HierParams hier;
  std::array<ConvLayer, kEncoderLayers> encoder;
  PixelMlp mu;
  PixelMlp lambda;
  Var e_proj_w;  // [C x d]
  Var e_proj_b;  // [C]
  ConvLayer dec1;  // C -> decoder_channels, tanh
  ConvLayer dec2;  // decoder_channels -> 1, sigmoid

 private:
  RunConfig config_;
  ParamStore store_;
  Vocabulary vocab_;
};

// Image [H x W] (or [1 x H x W]) to feature volume [C x H x W].
Var encode_image(const Var& image, const FusionModel& m);

struct AffineParams {
  Var mu;      // [C x H x W]
  Var lambda;  // [C x H x W]
};
AffineParams affine_params(const Var& psi_ir, const Var& psi_vi, const FusionModel& m);

// mu * broadcast(W_e E + b_e) + lambda.
Var fuse_features(const Var& mu, const Var& lambda, const Var& e, const FusionModel& m);

// Feature volume to image [H x W] with pixels in (0,1).
Var decode_image(const Var& psi_f, const FusionModel& m);

// E from the two graph branches, honoring `flags`.
struct SceneEmbedding {
  Var e;  // [d]
  Var text_tokens;
  Var visual_tokens;
  std::vector<std::string> warnings;
};
SceneEmbedding scene_embedding(const TextAnnotation& annotation, const RegionSet& regions,
                               const FusionModel& m, const BranchFlags& flags = {});

struct FuseOutput {
  Var image;  // [H x W]
  Var embedding;
  std::vector<std::string> warnings;
};
// Full forward pass. Throws ShapeError when the two images differ in size.
FuseOutput fuse_forward(const Var& ir, const Var& vi, const TextAnnotation& annotation,
                        const RegionSet& regions, const FusionModel& m,
                        const BranchFlags& flags = {});
ImageGray fuse_pair(const ImageGray& ir, const ImageGray& vi, const TextAnnotation& annotation,
                    const RegionSet& regions, const FusionModel& m,
                    const BranchFlags& flags = {}, std::vector<std::string>* warnings = nullptr);

// Checkpoint: "MSGCKPT1" | u64 manifest length | JSON manifest | MSGT blobs.
// The manifest stores the run config and {name, offset, bytes, shape} per
// parameter; loading rebuilds the model from the config and checks every
// name and shape.
void save_checkpoint(const FusionModel& m, const std::filesystem::path& path);
FusionModel load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const FusionModel& m);
FusionModel decode_checkpoint(const std::string& bytes);

}  // namespace msgf
