#include "msgf/ablation.hpp"

#include <sstream>

#include "msgf/error.hpp"

namespace msgf {

void AblationSpec::validate() const {
  if (!losses.fg && !losses.bg)
    throw ConfigError("ablation '" + name +
                      "': disabling both reconstruction terms leaves no baseline loss");
}

std::vector<AblationSpec> standard_progression() {
  std::vector<AblationSpec> specs;
  specs.push_back({"baseline", {false, false, false}, {}});
  specs.push_back({"+TSG", {true, false, false}, {}});
  specs.push_back({"+MSGHA", {true, false, true}, {}});
  specs.push_back({"+VSG", {true, true, true}, {}});
  return specs;
}

double evaluate_loss(const FusionModel& model, const std::vector<DataSample>& data,
                     const BranchFlags& branches) {
  if (data.empty()) throw ContractError("evaluate_loss: empty dataset");
  NoGradScope no_grad;
  const LossWeights w = LossWeights::from_config(model.config());
  double acc = 0;
  for (const auto& s : data) {
    const Tensor ir = s.ir.to_tensor(), vi = s.vi.to_tensor();
    FuseOutput out = fuse_forward(Var::constant(ir), Var::constant(vi), s.annotation, s.regions,
                                  model, branches);
    acc += loss_total(out.image, ir, vi, s.weights, w).total.item();
  }
  return acc / static_cast<double>(data.size());
}

AblationTable run_ablation(const std::vector<DataSample>& data, const RunConfig& cfg,
                           const std::vector<AblationSpec>& specs, std::size_t steps) {
  if (data.empty()) throw ContractError("run_ablation: empty dataset");
  if (specs.empty()) throw ConfigError("run_ablation: no configurations");
  for (const auto& s : specs) s.validate();

  AblationTable table;
  for (const auto& spec : specs) {
    FusionModel model(cfg);
    TrainOptions opts;
    opts.branches = spec.branches;
    opts.losses = spec.losses;
    opts.max_steps = steps;
    TrainResult tr = train(model, data, opts);

    AblationRow row;
    row.spec = spec;
    row.steps = tr.step_losses.size();
    for (const auto& s : data) {
      ImageGray fused = fuse_pair(s.ir, s.vi, s.annotation, s.regions, model, spec.branches);
      const MetricReport r = evaluate_fusion(fused, s.ir, s.vi);
      const double k = 1.0 / static_cast<double>(data.size());
      row.metrics.ag += k * r.ag;
      row.metrics.sf += k * r.sf;
      row.metrics.psnr += k * r.psnr;
      row.metrics.mi += k * r.mi;
      row.metrics.ssim += k * r.ssim;
      row.metrics.qabf += k * r.qabf;
    }
    row.final_loss = evaluate_loss(model, data, spec.branches);
    table.rows.push_back(std::move(row));
  }

  if (table.rows.size() >= 2) {
    MetricTable mt;
    for (const auto* n : MetricReport::names()) mt.metrics.emplace_back(n);
    for (const auto& r : table.rows) {
      mt.methods.push_back(r.spec.name);
      const auto v = r.metrics.values();
      mt.values.emplace_back(v.begin(), v.end());
    }
    const auto ranks = mrank(mt);
    for (std::size_t i = 0; i < ranks.size(); ++i) table.rows[i].mrank = ranks[i];
  }
  return table;
}

std::string format_ablation_csv(const AblationTable& table) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os << "config,mRank,Qabf,SSIM,AG,SF,MI,PSNR,TSG,MSGHA,VSG,final_loss\n";
  auto mark = [](bool b) { return b ? "1" : "0"; };
  for (const auto& r : table.rows) {
    os.precision(3);
    os << r.spec.name << ',' << r.mrank << ',' << r.metrics.qabf << ',' << r.metrics.ssim << ','
       << r.metrics.ag << ',' << r.metrics.sf << ',' << r.metrics.mi << ',' << r.metrics.psnr
       << ',' << mark(r.spec.branches.tsg) << ',' << mark(r.spec.branches.msgha) << ','
       << mark(r.spec.branches.vsg) << ',';
    os.precision(6);
    os << r.final_loss << '\n';
  }
  return os.str();
}

}  // namespace msgf
