#pragma once

// Component ablation: train one model per configuration under identical
// seed and step budget, then score each on the same data.

#include <string>
#include <vector>

#include "msgf/mafl.hpp"
#include "msgf/metrics.hpp"

namespace msgf {

struct AblationSpec {
  std::string name;
  BranchFlags branches;
  LossFlags losses;

  // Throws ConfigError when both reconstruction terms are disabled.
  void validate() const;
};

// baseline, +TSG, +MSGHA, +VSG: each row adds one component to the previous.
std::vector<AblationSpec> standard_progression();

struct AblationRow {
  AblationSpec spec;
  MetricReport metrics;    // mean over the samples
  double final_loss = 0;   // full-loss total on the uncropped samples after training
  double mrank = 0;        // across the rows of this table
  std::size_t steps = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

AblationTable run_ablation(const std::vector<DataSample>& data, const RunConfig& cfg,
                           const std::vector<AblationSpec>& specs, std::size_t steps);

// Mean MAFL total of `model` over `data` (no cropping, no gradients).
double evaluate_loss(const FusionModel& model, const std::vector<DataSample>& data,
                     const BranchFlags& branches = {});

// Columns: config,mRank,Qabf,SSIM,AG,SF,MI,PSNR,TSG,MSGHA,VSG,final_loss.
std::string format_ablation_csv(const AblationTable& table);

}  // namespace msgf
