#include "msgf/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "msgf/ablation.hpp"
#include "msgf/error.hpp"
#include "msgf/fusenet.hpp"
#include "msgf/mafl.hpp"
#include "msgf/metrics.hpp"
#include "msgf/tensor_io.hpp"
#include "msgf/textsg.hpp"
#include "msgf/vissg.hpp"

namespace msgf {

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

FusionModel model_from(const std::string& checkpoint, const GlobalOptions& g) {
  if (!checkpoint.empty()) return load_checkpoint(checkpoint);
  return FusionModel(resolve_config(g));
}

std::vector<DataSample> load_dataset(const std::string& manifest) {
  std::vector<DataSample> data;
  for (const auto& p : load_manifest(manifest)) data.push_back(load_sample(p));
  if (data.empty()) throw ValidationError("manifest", "no samples listed");
  return data;
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) out << text;
  else write_file(path, text);
}

std::string graph_json(const Sentence& s) { return graph_to_json(parse_text(s)); }

// ---------------------------------------------------------------------------

struct ParseTextArgs {
  std::string annotation, sentence, out, dot;
};

void run_parse_text(const ParseTextArgs& a, std::ostream& out) {
  if (!a.sentence.empty()) {
    const auto g = parse_text(tokenize(a.sentence));
    write_or_print(a.out, graph_to_json(g) + "\n", out);
    if (!a.dot.empty()) write_file(a.dot, graph_to_dot(g));
    return;
  }
  const TextAnnotation ann = load_annotation(a.annotation);
  std::string json = "{\"object\":[";
  for (std::size_t k = 0; k < 3; ++k) json += (k ? "," : "") + graph_json(ann.object[k]);
  json += "],\"region\":" + graph_json(ann.region) + ",\"global\":" + graph_json(ann.global) + "}\n";
  write_or_print(a.out, json, out);
  if (!a.dot.empty()) {
    const char* names[5] = {"object1", "object2", "object3", "region", "global"};
    std::string dot;
    const auto tiers = ann.tiers();
    for (std::size_t k = 0; k < tiers.size(); ++k) dot += graph_to_dot(parse_text(*tiers[k]), names[k]);
    write_file(a.dot, dot);
  }
}

struct BuildVsgArgs {
  std::string regions, model, embeddings, json;
};

void run_build_vsg(const BuildVsgArgs& a, const GlobalOptions& g, std::ostream& out,
                   std::ostream& err) {
  const FusionModel m = model_from(a.model, g);
  const RegionSet regions = load_regions(a.regions);
  NoGradScope no_grad;
  if (regions.boxes.empty()) {
    err << "warning: region set is empty; no subgraphs\n";
    write_or_print(a.json, "{\"nodes\":[],\"relations\":[],\"anchors\":[]}\n", out);
    return;
  }
  const auto& cfg = m.config();
  VisualGraph vg = run_reasoning(init_graph(regions, m.visual), cfg.t_iters, m.visual);
  const auto anchors = select_subgraphs(vg.scores, cfg.top_n);
  std::vector<Var> rows;
  for (auto k : anchors) rows.push_back(readout(vg, k).embedding);
  if (!a.embeddings.empty()) save_tensor(stack_rows(rows).value(), a.embeddings);
  write_or_print(a.json, visual_graph_to_json(vg, anchors) + "\n", out);
}

struct FuseArgs {
  std::string ir, vi, annotation, regions, model, out, dump_embedding;
  bool no_tsg = false, no_vsg = false, no_msgha = false;
};

void run_fuse(const FuseArgs& a, const GlobalOptions& g, std::ostream& err) {
  const FusionModel m = model_from(a.model, g);
  if (a.model.empty())
    err << "warning: no --model given; fusing with freshly initialized weights\n";
  const ImageGray ir = load_image(a.ir), vi = load_image(a.vi);
  const TextAnnotation ann = load_annotation(a.annotation);
  const RegionSet regions = load_regions(a.regions);
  const BranchFlags flags{!a.no_tsg, !a.no_vsg, !a.no_msgha};

  NoGradScope no_grad;
  FuseOutput f = fuse_forward(Var::constant(ir.to_tensor()), Var::constant(vi.to_tensor()), ann,
                              regions, m, flags);
  for (const auto& w : f.warnings) err << "warning: " << w << '\n';
  save_image(ImageGray::from_tensor(f.image.value()), a.out);
  if (!a.dump_embedding.empty()) save_tensor(f.embedding.value(), a.dump_embedding);
}

struct TrainArgs {
  std::string data, out, log;
  std::size_t steps = 0;
  std::optional<std::size_t> epochs;
};

void run_train(const TrainArgs& a, const GlobalOptions& g, std::ostream& err) {
  RunConfig cfg = resolve_config(g);
  if (a.epochs) cfg.epochs = *a.epochs;
  const auto data = load_dataset(a.data);
  FusionModel m(cfg);
  TrainOptions opts;
  opts.max_steps = a.steps;
  opts.checkpoint_path = a.out;
  if (g.verbose)
    opts.on_epoch = [&err](std::size_t epoch, const LossBreakdown& b) {
      err << "epoch " << epoch << " total " << b.total << " (rec " << b.l_rec << ", ctr "
          << b.l_ctr << ")\n";
    };
  const TrainResult r = train(m, data, opts);
  if (!a.log.empty()) write_file(a.log, loss_csv(r.epoch_losses));
}

struct EvalArgs {
  std::string fused, ir, vi, out;
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(a.fused))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ValidationError("fused", "no .pgm images in " + a.fused);

  std::ostringstream csv;
  csv.setf(std::ios::fixed);
  csv.precision(6);
  csv << "image";
  for (const auto* n : MetricReport::names()) csv << ',' << n;
  csv << '\n';
  std::array<double, 6> sum{};
  for (const auto& n : names) {
    const MetricReport r = evaluate_fusion(load_image(fs::path(a.fused) / n),
                                           load_image(fs::path(a.ir) / n),
                                           load_image(fs::path(a.vi) / n));
    csv << n.string();
    const auto v = r.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      csv << ',' << v[k];
      sum[k] += v[k];
    }
    csv << '\n';
  }
  csv << "mean";
  for (double s : sum) csv << ',' << s / static_cast<double>(names.size());
  csv << '\n';
  write_or_print(a.out, csv.str(), out);
}

struct RankArgs {
  std::string in, out;
};

void run_rank(const RankArgs& a, std::ostream& out) {
  const MetricTable t = parse_metric_csv(read_file(a.in));
  write_or_print(a.out, format_rank_csv(t, mrank(t)), out);
}

struct AblateArgs {
  std::string data, out;
  std::size_t steps = 200;
  bool no_fg = false, no_bg = false, no_ctr = false;
};

void run_ablate(const AblateArgs& a, const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  auto specs = standard_progression();
  for (auto& s : specs) s.losses = {!a.no_fg, !a.no_bg, !a.no_ctr};
  const auto data = load_dataset(a.data);
  write_or_print(a.out, format_ablation_csv(run_ablation(data, cfg, specs, a.steps)), out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene-graph guided infrared/visible image fusion", "msgfusion"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (key=value file)")
      ->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>("--seed", [&g](std::uint64_t s) { g.seed = s; },
                                         "Seed for every random choice");
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on standard error");

  ParseTextArgs pt;
  auto* parse = app.add_subcommand("parse-text", "Parse annotation text into scene graphs");
  auto* pt_ann = parse->add_option("--annotation", pt.annotation, "annotation.json")
                     ->check(CLI::ExistingFile);
  auto* pt_sent = parse->add_option("--sentence", pt.sentence, "Parse one sentence instead");
  pt_ann->excludes(pt_sent);
  parse->add_option("--out", pt.out, "JSON output (default: stdout)");
  parse->add_option("--dot", pt.dot, "Also write Graphviz DOT");

  BuildVsgArgs bv;
  auto* vsg = app.add_subcommand("build-vsg", "Reason over regions and dump subgraph embeddings");
  vsg->add_option("--regions", bv.regions, "regions.json")->required()->check(CLI::ExistingFile);
  vsg->add_option("--model", bv.model, "Checkpoint (default: fresh weights)")
      ->check(CLI::ExistingFile);
  vsg->add_option("--out-embeddings", bv.embeddings, "Subgraph embeddings [n x d] (MSGT)");
  vsg->add_option("--out-json", bv.json, "Relation dump (default: stdout)");

  FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse", "Fuse one infrared/visible pair");
  fuse->add_option("--ir", fa.ir, "Infrared PGM")->required()->check(CLI::ExistingFile);
  fuse->add_option("--vi", fa.vi, "Visible PGM")->required()->check(CLI::ExistingFile);
  fuse->add_option("--annotation", fa.annotation, "annotation.json")
      ->required()
      ->check(CLI::ExistingFile);
  fuse->add_option("--regions", fa.regions, "regions.json")->required()->check(CLI::ExistingFile);
  fuse->add_option("--model", fa.model, "Checkpoint (default: fresh weights)")
      ->check(CLI::ExistingFile);
  fuse->add_option("--out", fa.out, "Fused PGM")->required();
  fuse->add_option("--dump-embedding", fa.dump_embedding, "Write E as MSGT");
  fuse->add_flag("--no-tsg", fa.no_tsg, "Replace the text branch with null tokens");
  fuse->add_flag("--no-vsg", fa.no_vsg, "Replace the visual branch with null tokens");
  fuse->add_flag("--no-msgha", fa.no_msgha, "Average the tokens instead of attending");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model on a dataset manifest");
  trn->add_option("--data", ta.data, "Manifest JSON")->required()->check(CLI::ExistingFile);
  trn->add_option("--out", ta.out, "Checkpoint path")->required();
  trn->add_option("--log", ta.log, "Per-epoch loss CSV");
  trn->add_option("--steps", ta.steps, "Stop after this many optimizer steps");
  trn->add_option_function<std::size_t>("--epochs", [&ta](std::size_t e) { ta.epochs = e; },
                                        "Override the configured epoch count");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score fused images against their sources");
  ev->add_option("--fused", ea.fused, "Directory of fused PGMs")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--ir", ea.ir, "Directory of infrared PGMs")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--vi", ea.vi, "Directory of visible PGMs")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", ea.out, "CSV output (default: stdout)");

  RankArgs ra;
  auto* rk = app.add_subcommand("rank", "Mean rank of methods over metrics");
  rk->add_option("--in", ra.in, "Metric CSV (method,<metric>...)")
      ->required()
      ->check(CLI::ExistingFile);
  rk->add_option("--out", ra.out, "CSV output (default: stdout)");

  AblateArgs aa;
  auto* abl = app.add_subcommand("ablate", "Train and score the component progression");
  abl->add_option("--data", aa.data, "Manifest JSON")->required()->check(CLI::ExistingFile);
  abl->add_option("--steps", aa.steps, "Optimizer steps per configuration");
  abl->add_option("--out", aa.out, "CSV output (default: stdout)");
  abl->add_flag("--no-fg", aa.no_fg, "Drop the foreground reconstruction term");
  abl->add_flag("--no-bg", aa.no_bg, "Drop the background reconstruction term");
  abl->add_flag("--no-ctr", aa.no_ctr, "Drop the contrast term");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*parse) {
      if (pt.annotation.empty() && pt.sentence.empty()) {
        err << "parse-text: one of --annotation or --sentence is required\n";
        return kExitUsage;
      }
      run_parse_text(pt, out);
    } else if (*vsg) {
      run_build_vsg(bv, g, out, err);
    } else if (*fuse) {
      run_fuse(fa, g, err);
    } else if (*trn) {
      run_train(ta, g, err);
    } else if (*ev) {
      run_eval(ea, out);
    } else if (*rk) {
      run_rank(ra, out);
    } else if (*abl) {
      run_ablate(aa, g, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace msgf
