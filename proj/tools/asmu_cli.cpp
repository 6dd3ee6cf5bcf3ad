#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "asmu.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr const char* kOutputEnv = "ASMU_OUTPUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  std::string gt;
  std::vector<std::string> preds;
  std::optional<double> patch;
  std::optional<std::string> metric;
  std::optional<double> penalty;
  std::optional<std::string> reduction;
  std::string bank;

  std::optional<std::size_t> train_epochs;
  std::optional<double> step_size;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> loss;

  std::optional<std::string> strategy;
  std::vector<std::string> strategies;
  std::optional<int> sim_epochs;
  std::optional<std::size_t> seeds;
  bool record_selected = false;

  int t = 0;
  std::optional<int> start_epoch, end_epoch;
  std::optional<double> start_unc, end_unc;
};

/// Defaults, then the output-dir env var, then the config file, then --set
/// overrides, then dedicated flags.
asmu::RunConfig resolve_config(const Options& o) {
  asmu::RunConfig base;
  if (const char* env = std::getenv(kOutputEnv); env && *env) base.output_dir = env;
  json j = json::object();
  if (!o.config_file.empty()) {
    try {
      j = asmu::read_json_file(o.config_file);
    } catch (const asmu::Error& e) {
      throw asmu::Error(asmu::ErrorCode::invalid_config, e.what());
    }
  }
  for (const auto& s : o.overrides) asmu::apply_override(j, s);
  const auto set = [&](const std::string& path, const json& v) { asmu::apply_override(j, path + "=" + v.dump()); };
  if (o.out) set("output_dir", *o.out);
  if (o.seed) set("seed", *o.seed);
  if (o.workers) set("workers", *o.workers);
  if (o.patch) set("geometry.patch_size", *o.patch);
  if (o.metric) set("matching.metric", *o.metric);
  if (o.penalty) set("matching.penalty_c", *o.penalty);
  if (o.reduction) set("asm.reduction", *o.reduction);
  if (o.train_epochs) set("ranking.epochs", *o.train_epochs);
  if (o.step_size) set("ranking.step_size", *o.step_size);
  if (o.batch_size) set("ranking.batch_size", *o.batch_size);
  if (o.loss) set("ranking.loss", *o.loss);
  if (o.strategy) set("simulator.strategies", json::array({*o.strategy}));
  if (!o.strategies.empty()) set("simulator.strategies", o.strategies);
  if (o.sim_epochs) set("simulator.epochs", *o.sim_epochs);
  if (o.seeds) set("simulator.seeds", *o.seeds);
  if (o.record_selected) set("simulator.record_selected", true);
  if (o.start_epoch) set("selection.schedule.start_epoch", *o.start_epoch);
  if (o.end_epoch) set("selection.schedule.end_epoch", *o.end_epoch);
  if (o.start_unc) set("selection.schedule.start_unc", *o.start_unc);
  if (o.end_unc) set("selection.schedule.end_unc", *o.end_unc);
  return asmu::run_config_from_json(j, base);
}

/// Output files are staged in memory and written only once every input has
/// been read and processed, each one through write-then-rename.
class OutputSet {
 public:
  explicit OutputSet(const asmu::RunConfig& cfg) : dir_(cfg.output_dir) {
    add_json("config.json", asmu::to_json(cfg));
  }
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
  void add_json(std::string name, const json& j) { add(std::move(name), j.dump(2) + "\n"); }

  void commit() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw asmu::Error(asmu::ErrorCode::io, "cannot create output directory " + dir_.string());
    for (const auto& [name, content] : files_) asmu::write_file_atomic(dir_ / name, content);
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::map<std::string, asmu::Annotation> by_id(std::vector<asmu::Annotation> list) {
  std::map<std::string, asmu::Annotation> out;
  for (auto& a : list) {
    auto id = a.id;
    out.emplace(std::move(id), std::move(a));
  }
  return out;
}

const asmu::Annotation& find_pred(const std::map<std::string, asmu::Annotation>& preds, const std::string& id,
                                  const std::string& file) {
  const auto it = preds.find(id);
  if (it == preds.end()) throw asmu::Error(asmu::ErrorCode::invalid_input, file + " has no prediction for '" + id + "'");
  return it->second;
}

struct Scene {
  asmu::Annotation gt;
  asmu::PatchGrid grid;
  std::vector<asmu::PointSet> gt_patches;
};

std::vector<Scene> load_scenes(const std::string& gt_file, double patch_size) {
  std::vector<Scene> scenes;
  for (auto& a : asmu::read_annotations(gt_file)) {
    Scene s;
    s.grid = asmu::build_grid(a.points.frame_width(), a.points.frame_height(), patch_size);
    s.gt_patches = asmu::crop_all(a.points, s.grid);
    s.gt = std::move(a);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::vector<asmu::PointSet> pred_patches(const Scene& s, const asmu::Annotation& pred) {
  if (!pred.points.same_frame(s.gt.points)) {
    throw asmu::Error(asmu::ErrorCode::frame_mismatch, "prediction frame differs from ground truth for '" + s.gt.id + "'");
  }
  return asmu::crop_all(pred.points, s.grid);
}

int cmd_dist(const Options& o) {
  const auto cfg = resolve_config(o);
  if (o.preds.size() != 1) throw UsageError("dist takes exactly one --pred file");
  const auto scenes = load_scenes(o.gt, cfg.geometry.patch_size);
  const auto preds = by_id(asmu::read_annotations(o.preds.front()));
  const double c = cfg.penalty();

  asmu::CsvWriter csv({"scene_id", "patch_index", "patch_row", "patch_col", "origin_x", "origin_y", "width", "height", "n_gt",
                       "n_pred", "distance"});
  for (const auto& s : scenes) {
    const auto pp = pred_patches(s, find_pred(preds, s.gt.id, o.preds.front()));
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      const auto& p = s.grid.patches[k];
      csv.field(s.gt.id).field(std::uint64_t{k}).field(std::uint64_t{s.grid.row_of(k)})
          .field(std::uint64_t{s.grid.col_of(k)}).field(p.origin_x).field(p.origin_y).field(p.width).field(p.height)
          .field(std::uint64_t{s.gt_patches[k].size()}).field(std::uint64_t{pp[k].size()})
          .field(asmu::surrogate_distance(cfg.matching.metric, pp[k], s.gt_patches[k], c));
      csv.end_row();
    }
  }
  OutputSet out(cfg);
  out.add("dist.csv", csv.str());
  out.commit();
  return kExitOk;
}

struct BankBuild {
  asmu::AsmBank bank;
  std::vector<asmu::PatchKey> keys;
  std::vector<std::vector<double>> last_features;
};

BankBuild build_bank(const Options& o, const asmu::RunConfig& cfg) {
  if (o.preds.empty()) throw UsageError("at least one --pred file (one per epoch) is required");
  const auto scenes = load_scenes(o.gt, cfg.geometry.patch_size);
  std::vector<std::map<std::string, asmu::Annotation>> epochs;
  for (const auto& f : o.preds) epochs.push_back(by_id(asmu::read_annotations(f)));

  BankBuild b{asmu::AsmBank(cfg.penalty()), {}, {}};
  if (!o.bank.empty()) {
    b.bank = asmu::AsmBank::from_json(asmu::read_json_file(o.bank));
    if (b.bank.penalty_c() != cfg.penalty()) {
      throw asmu::Error(asmu::ErrorCode::invalid_input, "bank penalty constant differs from the configured one");
    }
  }
  for (const auto& s : scenes) {
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      b.keys.push_back(asmu::PatchKey{s.gt.id, k});
      if (!b.bank.contains(b.keys.back())) b.bank.register_patch(b.keys.back());
    }
  }
  b.last_features.resize(b.keys.size());
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    std::size_t idx = 0;
    for (const auto& s : scenes) {
      const auto pp = pred_patches(s, find_pred(epochs[e], s.gt.id, o.preds[e]));
      for (std::size_t k = 0; k < s.grid.size(); ++k, ++idx) {
        b.bank.record_distance(b.keys[idx],
                               asmu::surrogate_distance(cfg.matching.metric, pp[k], s.gt_patches[k], cfg.penalty()));
        b.last_features[idx] = asmu::extract_features(pp[k], s.grid.patches[k]);
      }
    }
  }
  return b;
}

int cmd_asm(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto b = build_bank(o, cfg);
  const auto batch = asmu::normalize_batch(b.bank, b.keys, cfg.asm_section.reduction);
  asmu::CsvWriter csv({"scene_id", "patch_index", "epoch_count", "asm", "last_dist", "a"});
  for (std::size_t i = 0; i < b.keys.size(); ++i) {
    const auto& e = b.bank.entry(b.keys[i]);
    csv.field(b.keys[i].scene_id).field(std::uint64_t{b.keys[i].patch_index}).field(std::uint64_t{e.epoch_count})
        .field(e.asm_value()).field(e.last_dist).field(batch.a_values[i]);
    csv.end_row();
  }
  OutputSet out(cfg);
  out.add_json("asm_bank.json", b.bank.to_json());
  out.add("asm.csv", csv.str());
  out.commit();
  return kExitOk;
}

int cmd_train_scorer(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto b = build_bank(o, cfg);
  const auto batch = asmu::normalize_batch(b.bank, b.keys, cfg.asm_section.reduction);
  std::vector<asmu::RankingSample> samples;
  for (std::size_t i = 0; i < b.keys.size(); ++i) {
    samples.push_back(asmu::RankingSample{batch.a_values[i], 0.0, b.last_features[i]});
  }
  const auto fit = asmu::train_scorer(samples, cfg.train_options());

  asmu::CsvWriter trace({"step", "loss"});
  for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) {
    trace.field(std::uint64_t{i}).field(fit.loss_trace[i]);
    trace.end_row();
  }
  asmu::CsvWriter scores({"scene_id", "patch_index", "a", "kappa"});
  for (std::size_t i = 0; i < b.keys.size(); ++i) {
    scores.field(b.keys[i].scene_id).field(std::uint64_t{b.keys[i].patch_index}).field(samples[i].a)
        .field(fit.scorer.score(samples[i].features));
    scores.end_row();
  }
  OutputSet out(cfg);
  out.add_json("scorer.json", fit.scorer.to_json());
  out.add("loss_trace.csv", trace.str());
  out.add("scores.csv", scores.str());
  out.commit();
  return kExitOk;
}

void optional_field(asmu::CsvWriter& csv, const std::optional<double>& v) {
  if (v) {
    csv.field(*v);
  } else {
    csv.empty();
  }
}

void append_epoch_rows(asmu::CsvWriter& csv, const asmu::sim::RunResult& r) {
  for (const auto& e : r.epochs) {
    csv.field(asmu::sim::to_string(r.strategy)).field(r.seed).field(e.epoch);
    optional_field(csv, e.threshold);
    csv.field(std::uint64_t{e.candidates}).field(std::uint64_t{e.selected}).field(e.count_mae).field(e.mean_distance)
        .field(e.precision).field(e.recall).field(e.student_scale).field(e.teacher_scale);
    csv.end_row();
  }
}

asmu::CsvWriter epoch_csv() {
  return asmu::CsvWriter({"strategy", "seed", "epoch", "threshold", "candidates", "selected", "count_mae",
                          "mean_distance", "precision", "recall", "student_scale", "teacher_scale"});
}

asmu::CsvWriter run_csv() {
  return asmu::CsvWriter({"strategy", "seed", "labeled_patches", "unlabeled_patches", "selected_total",
                          "selected_count_mae", "selected_mean_distance", "precision", "recall", "scene_mae",
                          "scene_rmse"});
}

void append_run_row(asmu::CsvWriter& csv, const asmu::sim::RunResult& r) {
  csv.field(asmu::sim::to_string(r.strategy)).field(r.seed).field(std::uint64_t{r.labeled_patches})
      .field(std::uint64_t{r.unlabeled_patches}).field(std::uint64_t{r.selected_total}).field(r.selected_count_mae)
      .field(r.selected_mean_distance).field(r.precision).field(r.recall).field(r.scene_mae).field(r.scene_rmse);
  csv.end_row();
}

json run_json(const asmu::sim::RunResult& r) {
  return {{"strategy", asmu::sim::to_string(r.strategy)},
          {"seed", r.seed},
          {"labeled_patches", r.labeled_patches},
          {"unlabeled_patches", r.unlabeled_patches},
          {"selected_total", r.selected_total},
          {"selected_count_mae", r.selected_count_mae},
          {"selected_mean_distance", r.selected_mean_distance},
          {"precision", r.precision},
          {"recall", r.recall},
          {"scene_mae", r.scene_mae},
          {"scene_rmse", r.scene_rmse}};
}

int cmd_simulate(const Options& o) {
  const auto cfg = resolve_config(o);
  if (cfg.simulator.strategies.size() != 1) throw UsageError("simulate runs exactly one strategy (--strategy)");
  const auto r = asmu::sim::run_semi_supervised(cfg.experiment(), cfg.simulator.strategies.front(), cfg.seed);

  auto epochs = epoch_csv();
  append_epoch_rows(epochs, r);
  auto runs = run_csv();
  append_run_row(runs, r);
  OutputSet out(cfg);
  out.add("epochs.csv", epochs.str());
  out.add("runs.csv", runs.str());
  out.add_json("summary.json", run_json(r));
  if (cfg.simulator.experiment.record_selected) {
    asmu::CsvWriter sel({"epoch", "scene_id", "patch_index", "kappa", "n_pseudo", "n_gt", "distance"});
    for (const auto& e : r.epochs) {
      for (const auto& p : e.selected_patches) {
        sel.field(e.epoch).field(p.key.scene_id).field(std::uint64_t{p.key.patch_index}).field(p.kappa)
            .field(std::uint64_t{p.n_pseudo}).field(std::uint64_t{p.n_gt}).field(p.distance);
        sel.end_row();
      }
    }
    out.add("selected.csv", sel.str());
  }
  out.commit();
  return kExitOk;
}

int cmd_ablate(const Options& o) {
  const auto cfg = resolve_config(o);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < cfg.simulator.seeds; ++i) seeds.push_back(cfg.seed + i);
  const auto report =
      asmu::sim::run_ablation_suite(cfg.experiment(), cfg.simulator.strategies, seeds, cfg.workers);

  auto epochs = epoch_csv();
  auto runs = run_csv();
  for (const auto& r : report.runs) {
    append_epoch_rows(epochs, r);
    append_run_row(runs, r);
  }
  asmu::CsvWriter summary({"strategy", "count_mae_mean", "count_mae_std", "distance_mean", "distance_std",
                           "precision_mean", "recall_mean", "scene_mae_mean", "scene_mae_std", "scene_rmse_mean",
                           "mean_rank"});
  json js = json::array();
  for (const auto& s : report.summary) {
    summary.field(asmu::sim::to_string(s.strategy)).field(s.count_mae_mean).field(s.count_mae_std)
        .field(s.distance_mean).field(s.distance_std).field(s.precision_mean).field(s.recall_mean)
        .field(s.scene_mae_mean).field(s.scene_mae_std).field(s.scene_rmse_mean).field(s.mean_rank);
    summary.end_row();
    js.push_back({{"strategy", asmu::sim::to_string(s.strategy)},
                  {"count_mae_mean", s.count_mae_mean},
                  {"count_mae_std", s.count_mae_std},
                  {"distance_mean", s.distance_mean},
                  {"distance_std", s.distance_std},
                  {"precision_mean", s.precision_mean},
                  {"recall_mean", s.recall_mean},
                  {"scene_mae_mean", s.scene_mae_mean},
                  {"scene_mae_std", s.scene_mae_std},
                  {"scene_rmse_mean", s.scene_rmse_mean},
                  {"mean_rank", s.mean_rank}});
  }
  OutputSet out(cfg);
  out.add("epochs.csv", epochs.str());
  out.add("runs.csv", runs.str());
  out.add("summary.csv", summary.str());
  out.add_json("summary.json", {{"seeds", seeds}, {"strategies", js}});
  out.commit();
  return kExitOk;
}

int cmd_schedule(const Options& o) {
  const auto cfg = resolve_config(o);
  if (o.t < 0) throw UsageError("--t must be >= 0");
  const auto u = asmu::threshold_at(cfg.selection.schedule, o.t);
  std::cout << (u ? asmu::format_number(*u) : std::string("none")) << "\n";
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_file, "JSON run config (unknown keys are rejected)");
  sub->add_option("--set", o.overrides, "Config override key.path=value, repeatable");
  sub->add_option("--out", o.out, std::string("Output directory (default: $") + kOutputEnv + " or asmu-out)");
  sub->add_option("--seed", o.seed, "Root seed");
  sub->add_option("--workers", o.workers, "Maximum worker threads")->check(CLI::PositiveNumber);
}

void add_annotation_inputs(CLI::App* sub, Options& o, bool many) {
  sub->add_option("--gt", o.gt, "Ground-truth annotation file")->required();
  sub->add_option("--pred", o.preds, many ? "Prediction file, one per epoch in order" : "Prediction file")->required();
  sub->add_option("--patch", o.patch, "Patch side in pixels");
  sub->add_option("--metric", o.metric, "asm-step | acd | awd | hungarian");
  sub->add_option("--penalty", o.penalty, "Penalty constant C (default: patch diagonal)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-level pseudo-label uncertainty tools for point annotations"};
  app.require_subcommand(1);
  Options o;

  auto* dist = app.add_subcommand("dist", "Per-patch distance between ground truth and a prediction");
  add_common(dist, o);
  add_annotation_inputs(dist, o, false);

  auto* asm_cmd = app.add_subcommand("asm", "Accumulate per-patch ASM over epochs of predictions");
  add_common(asm_cmd, o);
  add_annotation_inputs(asm_cmd, o, true);
  asm_cmd->add_option("--reduction", o.reduction, "mean | last");
  asm_cmd->add_option("--bank", o.bank, "Existing bank JSON to continue");

  auto* train = app.add_subcommand("train-scorer", "Fit the uncertainty scorer on ASM targets");
  add_common(train, o);
  add_annotation_inputs(train, o, true);
  train->add_option("--reduction", o.reduction, "mean | last");
  train->add_option("--bank", o.bank, "Existing bank JSON to continue");
  train->add_option("--epochs", o.train_epochs, "Gradient steps");
  train->add_option("--step-size", o.step_size, "Gradient step size");
  train->add_option("--batch-size", o.batch_size, "Mini-batch size, 0 for full batch");
  train->add_option("--loss", o.loss, "rank | l1");

  auto* simulate = app.add_subcommand("simulate", "One semi-supervised run of one strategy");
  add_common(simulate, o);
  simulate->add_option("--strategy", o.strategy, "Filtering strategy");
  simulate->add_option("--epochs", o.sim_epochs, "Simulated epochs");
  simulate->add_flag("--record-selected", o.record_selected, "Write every selected patch to selected.csv");

  auto* ablate = app.add_subcommand("ablate", "Every strategy on every seed");
  add_common(ablate, o);
  ablate->add_option("--strategies", o.strategies, "Strategies to compare")->delimiter(',');
  ablate->add_option("--seeds", o.seeds, "Number of consecutive seeds starting at --seed");
  ablate->add_option("--epochs", o.sim_epochs, "Simulated epochs");

  auto* schedule = app.add_subcommand("schedule", "Print the uncertainty threshold at an epoch");
  add_common(schedule, o);
  schedule->add_option("--t", o.t, "Epoch")->required();
  schedule->add_option("--start-epoch", o.start_epoch);
  schedule->add_option("--end-epoch", o.end_epoch);
  schedule->add_option("--start-unc", o.start_unc);
  schedule->add_option("--end-unc", o.end_unc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (dist->parsed()) return cmd_dist(o);
    if (asm_cmd->parsed()) return cmd_asm(o);
    if (train->parsed()) return cmd_train_scorer(o);
    if (simulate->parsed()) return cmd_simulate(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (schedule->parsed()) return cmd_schedule(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const asmu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == asmu::ErrorCode::invalid_config ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
