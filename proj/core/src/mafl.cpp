#include "msgf/mafl.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "msgf/error.hpp"

namespace msgf {

namespace {

Tensor image_tensor(const std::vector<double>& v, std::size_t w, std::size_t h) {
  return Tensor({h, w}, v);
}

void check_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

Var zero() { return Var::constant(Tensor::scalar(0.0)); }

}  // namespace

LossBreakdown LossTerms::values() const {
  return {l_fg.item(), l_bg.item(), l_rec.item(), l_ctr.item(), total.item()};
}

LossWeights LossWeights::from_config(const RunConfig& cfg) {
  return {cfg.alpha, cfg.beta, cfg.gamma, cfg.eta, cfg.contrast_window};
}

RecTerms loss_rec(const Var& fused, const Tensor& ir, const Tensor& vi, const RegionWeights& rw,
                  double alpha, double beta, double gamma) {
  check_same(fused.shape(), ir.shape(), "loss_rec fused/ir");
  check_same(fused.shape(), vi.shape(), "loss_rec fused/vi");
  check_same(fused.shape(), Shape{rw.height, rw.width}, "loss_rec region weights");
  Tensor fg_ir = image_tensor(rw.mask, rw.width, rw.height);
  Tensor fg_vi = fg_ir, bg = fg_ir;
  for (std::size_t i = 0; i < fg_ir.numel(); ++i) {
    fg_ir[i] = rw.mask[i] * rw.w_ir[i];
    fg_vi[i] = rw.mask[i] * rw.w_vi[i];
    bg[i] = 1.0 - rw.mask[i];
  }
  const Var d_ir = sub(fused, Var::constant(ir));
  const Var d_vi = sub(fused, Var::constant(vi));
  auto term = [](const Var& diff, Tensor weight, double k) {
    return scale(mean(square(hadamard(diff, Var::constant(std::move(weight))))), k);
  };
  RecTerms out;
  out.l_fg = add(term(d_ir, std::move(fg_ir), alpha), term(d_vi, std::move(fg_vi), beta));
  out.l_bg = term(d_vi, std::move(bg), gamma);
  return out;
}

Var local_std(const Var& image, std::size_t window) {
  const auto& s = image.shape();
  if (s.size() != 2) throw ShapeError("local_std expects [H x W], got " + shape_str(s));
  // Shifting by one pixel value leaves the deviation unchanged and makes
  // constant images exactly zero.
  const Var x = sub(image, reshape(slice(reshape(image, {image.numel()}), 0, 0, 1), {1, 1}));
  const Var m = box_mean(x, window);
  return sqrt_clamped(sub(box_mean(square(x), window), square(m)));
}

Var loss_ctr(const Var& fused, const Tensor& ir, const Tensor& vi, double eta, std::size_t window) {
  check_same(fused.shape(), ir.shape(), "loss_ctr fused/ir");
  check_same(fused.shape(), vi.shape(), "loss_ctr fused/vi");
  Tensor target;
  {
    NoGradScope no_grad;
    target = maximum(local_std(Var::constant(ir), window), local_std(Var::constant(vi), window))
                 .value();
  }
  return scale(mean(abs(sub(local_std(fused, window), Var::constant(std::move(target))))), eta);
}

LossTerms loss_total(const Var& fused, const Tensor& ir, const Tensor& vi, const RegionWeights& rw,
                     const LossWeights& w, const LossFlags& flags) {
  if (!flags.fg && !flags.bg)
    throw ConfigError("at least one reconstruction term (foreground or background) must be enabled");
  RecTerms rec = loss_rec(fused, ir, vi, rw, w.alpha, w.beta, w.gamma);
  LossTerms t;
  t.l_fg = flags.fg ? rec.l_fg : zero();
  t.l_bg = flags.bg ? rec.l_bg : zero();
  t.l_rec = add(t.l_fg, t.l_bg);
  t.l_ctr = flags.ctr ? loss_ctr(fused, ir, vi, w.eta, w.window) : zero();
  t.total = add(t.l_rec, t.l_ctr);
  return t;
}

Adam::Adam(std::vector<NamedParam> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::step() {
  for (const auto& p : params_)
    if (p.var.has_grad() && !p.var.grad().all_finite())
      throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& var = params_[k].var;
    if (!var.has_grad()) continue;
    const Tensor& g = var.grad();
    Tensor& x = var.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < x.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      x[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

CropWindow pick_crop(std::size_t width, std::size_t height, std::size_t crop,
                     std::mt19937_64& rng) {
  CropWindow c{0, 0, std::min(width, crop), std::min(height, crop)};
  if (width > crop) c.x = std::uniform_int_distribution<std::size_t>(0, width - crop)(rng);
  if (height > crop) c.y = std::uniform_int_distribution<std::size_t>(0, height - crop)(rng);
  return c;
}

DataSample crop_sample(const DataSample& s, const CropWindow& c) {
  if (c.x == 0 && c.y == 0 && c.w == s.ir.width && c.h == s.ir.height) return s;
  auto cut = [&](const std::vector<double>& src, std::size_t width) {
    std::vector<double> out;
    out.reserve(c.w * c.h);
    for (std::size_t y = c.y; y < c.y + c.h; ++y)
      for (std::size_t x = c.x; x < c.x + c.w; ++x) out.push_back(src[y * width + x]);
    return out;
  };
  DataSample out;
  out.name = s.name;
  out.annotation = s.annotation;
  out.regions = s.regions;
  out.ir = ImageGray(c.w, c.h);
  out.ir.pixels = cut(s.ir.pixels, s.ir.width);
  out.vi = ImageGray(c.w, c.h);
  out.vi.pixels = cut(s.vi.pixels, s.vi.width);
  out.weights.width = c.w;
  out.weights.height = c.h;
  out.weights.mask = cut(s.weights.mask, s.weights.width);
  out.weights.w_ir = cut(s.weights.w_ir, s.weights.width);
  out.weights.w_vi = cut(s.weights.w_vi, s.weights.width);
  return out;
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double k) {
  acc.l_fg += k * b.l_fg;
  acc.l_bg += k * b.l_bg;
  acc.l_rec += k * b.l_rec;
  acc.l_ctr += k * b.l_ctr;
  acc.total += k * b.total;
}

}  // namespace

TrainResult train(FusionModel& model, const std::vector<DataSample>& data,
                  const TrainOptions& opts) {
  if (data.empty()) throw ContractError("train: empty dataset");
  const RunConfig& cfg = model.config();
  const LossWeights weights = LossWeights::from_config(cfg);
  if (!opts.losses.fg && !opts.losses.bg)
    throw ConfigError("at least one reconstruction term (foreground or background) must be enabled");

  Adam adam(model.store().params(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  for (std::size_t epoch = 1;; ++epoch) {
    if (opts.max_steps == 0 && epoch > cfg.epochs) break;
    if (opts.max_steps != 0 && result.step_losses.size() >= opts.max_steps) break;
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown epoch_sum;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      if (opts.max_steps != 0 && result.step_losses.size() >= opts.max_steps) break;
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);

      model.store().zero_grad();
      Tape tape;
      LossBreakdown step_loss;
      {
        TapeScope scope(tape);
        std::vector<Var> totals;
        for (std::size_t k = start; k < end; ++k) {
          const DataSample& full = data[order[k]];
          const DataSample s =
              crop_sample(full, pick_crop(full.ir.width, full.ir.height, cfg.crop, rng));
          FuseOutput out = fuse_forward(Var::constant(s.ir.to_tensor()),
                                        Var::constant(s.vi.to_tensor()), s.annotation, s.regions,
                                        model, opts.branches);
          LossTerms t = loss_total(out.image, s.ir.to_tensor(), s.vi.to_tensor(), s.weights,
                                   weights, opts.losses);
          const LossBreakdown b = t.values();
          if (!std::isfinite(b.total))
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", sample '" +
                               s.name + "'");
          accumulate(step_loss, b, inv);
          totals.push_back(t.total);
        }
        tape.backward(mean_of(totals));
      }
      try {
        adam.step();
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(result.step_losses.size() + 1));
      }
      result.step_losses.push_back(step_loss);
      accumulate(epoch_sum, step_loss, 1.0);
      ++epoch_steps;
    }
    if (epoch_steps == 0) break;
    LossBreakdown mean_loss;
    accumulate(mean_loss, epoch_sum, 1.0 / static_cast<double>(epoch_steps));
    result.epoch_losses.push_back(mean_loss);
    if (opts.on_epoch) opts.on_epoch(epoch, mean_loss);
    if (!opts.checkpoint_path.empty() && cfg.checkpoint_every != 0 &&
        epoch % cfg.checkpoint_every == 0)
      save_checkpoint(model, opts.checkpoint_path);
  }
  if (!opts.checkpoint_path.empty()) save_checkpoint(model, opts.checkpoint_path);
  return result;
}

std::string loss_csv(const std::vector<LossBreakdown>& epochs) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,l_fg,l_bg,l_rec,l_ctr,total\n";
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& b = epochs[i];
    os << i + 1 << ',' << b.l_fg << ',' << b.l_bg << ',' << b.l_rec << ',' << b.l_ctr << ','
       << b.total << '\n';
  }
  return os.str();
}

}  // namespace msgf
