#pragma once

// Region-adaptive reconstruction loss, local-contrast loss, Adam and the
// training loop. Norms are pixel means so the weights do not depend on the
// image size.
//
//   L_fg  = alpha*mean((M w_ir (F - I_ir))^2) + beta*mean((M w_vi (F - I_vi))^2)
//   L_bg  = gamma*mean(((1 - M)(F - I_vi))^2)
//   L_ctr = eta*mean|s(F) - max(s(I_ir), s(I_vi))|,  s = local std dev

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msgf/autograd.hpp"
#include "msgf/fusenet.hpp"
#include "msgf/sgio.hpp"

namespace msgf {

struct LossBreakdown {
  double l_fg = 0, l_bg = 0, l_rec = 0, l_ctr = 0, total = 0;
};

struct LossTerms {
  Var l_fg, l_bg, l_rec, l_ctr, total;
  LossBreakdown values() const;
};

// Which loss terms are active; a disabled term contributes 0.
struct LossFlags {
  bool fg = true;
  bool bg = true;
  bool ctr = true;
};

struct LossWeights {
  double alpha = 2.2, beta = 1.2, gamma = 1.0, eta = 0.3;
  std::size_t window = 9;
  static LossWeights from_config(const RunConfig& cfg);
};

// All image arguments are [H x W].
struct RecTerms {
  Var l_fg, l_bg;
};
RecTerms loss_rec(const Var& fused, const Tensor& ir, const Tensor& vi, const RegionWeights& rw,
                  double alpha, double beta, double gamma);

// sqrt(max(0, E[x^2] - E[x]^2)) over a window x window neighbourhood with
// edge replication.
Var local_std(const Var& image, std::size_t window = 9);

Var loss_ctr(const Var& fused, const Tensor& ir, const Tensor& vi, double eta,
             std::size_t window = 9);

LossTerms loss_total(const Var& fused, const Tensor& ir, const Tensor& vi, const RegionWeights& rw,
                     const LossWeights& w, const LossFlags& flags = {});

/// Adam with bias correction over a fixed, ordered parameter list.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Applies one update from the current grads (missing grads count as zero).
  // Throws NumericError naming the first parameter with a non-finite
  // gradient; no parameter is modified in that case.
  void step();
  std::size_t steps() const noexcept { return t_; }
  double lr() const noexcept { return lr_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainOptions {
  BranchFlags branches;
  LossFlags losses;
  // Stop after this many optimizer steps (0: run cfg.epochs epochs).
  std::size_t max_steps = 0;
  // Receives each finished epoch (1-based) with its mean breakdown.
  std::function<void(std::size_t epoch, const LossBreakdown&)> on_epoch;
  // Writes a checkpoint every cfg.checkpoint_every epochs when non-empty.
  std::filesystem::path checkpoint_path;
};

struct TrainResult {
  std::vector<LossBreakdown> step_losses;   // batch mean before each update
  std::vector<LossBreakdown> epoch_losses;  // mean over the epoch's steps
};

// Random crop of `crop` x `crop` (the whole image when it is not larger),
// applied identically to both images and the region weights.
struct CropWindow {
  std::size_t x = 0, y = 0, w = 0, h = 0;
};
CropWindow pick_crop(std::size_t width, std::size_t height, std::size_t crop,
                     std::mt19937_64& rng);
DataSample crop_sample(const DataSample& s, const CropWindow& c);

// Minibatch training on `data` with the model's own config. Throws
// NumericError with epoch/step context on a non-finite loss.
TrainResult train(FusionModel& model, const std::vector<DataSample>& data,
                  const TrainOptions& opts = {});

// CSV with header epoch,l_fg,l_bg,l_rec,l_ctr,total.
std::string loss_csv(const std::vector<LossBreakdown>& epochs);

}  // namespace msgf
