#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "asmu/asm.hpp"
#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/matching.hpp"
#include "asmu/ranking.hpp"
#include "asmu/selection.hpp"
#include "asmu/simulator.hpp"

namespace asmu {

/// Every tunable of a CLI run. Sections mirror the library modules; the
/// simulator section holds only harness settings, and takes its patch size
/// from `geometry` and its boundary, EMA decay and lambda1 from `selection`.
struct RunConfig {
  struct Geometry {
    double patch_size = 64.0;
  };
  struct Matching {
    SurrogateMetric metric = SurrogateMetric::asm_step;
    /// Unset means the patch diagonal.
    std::optional<double> penalty_c;
  };
  struct Asm {
    AsmReduction reduction = AsmReduction::mean;
  };
  struct Ranking {
    std::size_t epochs = 200;
    double step_size = 1.0;
    std::size_t batch_size = 0;
    ScorerLoss loss = ScorerLoss::rank;
  };
  struct Selection {
    ThresholdSchedule schedule;
    SelectionBoundary boundary = SelectionBoundary::strict;
    double ema_decay = 0.99;
    double lambda1 = 0.3;
  };
  struct Simulator {
    sim::ExperimentConfig experiment;
    std::vector<sim::Strategy> strategies{sim::all_strategies.begin(), sim::all_strategies.end()};
    /// ablate runs seeds seed, seed + 1, ..., seed + seeds - 1.
    std::size_t seeds = 10;
  };

  Geometry geometry;
  Matching matching;
  Asm asm_section;
  Ranking ranking;
  Selection selection;
  Simulator simulator;
  std::string output_dir = "asmu-out";
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  double penalty() const {
    return matching.penalty_c.value_or(PatchSpec{0, 0, geometry.patch_size, geometry.patch_size}.diagonal());
  }

  /// Harness config with the shared keys applied.
  sim::ExperimentConfig experiment() const {
    auto e = simulator.experiment;
    e.predictor.patch_size = geometry.patch_size;
    e.boundary = selection.boundary;
    e.ema_decay = selection.ema_decay;
    e.lambda1 = selection.lambda1;
    e.seed = seed;
    return e;
  }

  TrainOptions train_options() const {
    TrainOptions opt;
    opt.epochs = ranking.epochs;
    opt.step_size = ranking.step_size;
    opt.batch_size = ranking.batch_size;
    opt.loss = ranking.loss;
    opt.seed = derive_seed(seed, {hash_name("trainer")});
    return opt;
  }

  void validate() const {
    const auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_config, m); };
    if (!(geometry.patch_size > 0.0)) fail("geometry.patch_size must be > 0");
    if (matching.penalty_c && !(*matching.penalty_c > 0.0)) fail("matching.penalty_c must be > 0");
    if (ranking.epochs == 0 || !(ranking.step_size > 0.0)) fail("ranking needs epochs >= 1 and step_size > 0");
    if (!(selection.ema_decay > 0.0 && selection.ema_decay < 1.0)) fail("selection.ema.decay must lie in (0, 1)");
    if (!(selection.lambda1 >= 0.0)) fail("selection.loss.lambda1 must be >= 0");
    if (simulator.strategies.empty()) fail("simulator.strategies is empty");
    if (workers == 0) fail("workers must be >= 1");
    try {
      selection.schedule.validate();
      experiment().validate();
    } catch (const Error& e) {
      fail(e.what());
    }
  }
};

namespace detail {

/// Reads keys out of one JSON object and rejects whatever it did not read.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::invalid_config, where() + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::invalid_config, "bad value for " + name(key));
    }
  }

  template <class T, class Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    std::string s;
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    read(key, s);
    const auto v = parse(s);
    if (!v) throw Error(ErrorCode::invalid_config, "unknown value '" + s + "' for " + name(key));
    out = *v;
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string name(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw Error(ErrorCode::invalid_config, "unknown key " + name(k));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

inline nlohmann::json schedule_json(const ThresholdSchedule& s) {
  return {{"start_epoch", s.start_epoch}, {"end_epoch", s.end_epoch}, {"start_unc", s.start_unc}, {"end_unc", s.end_unc}};
}

inline void read_schedule(const nlohmann::json& j, const std::string& path, ThresholdSchedule& s) {
  ObjectReader r(j, path);
  r.read("start_epoch", s.start_epoch);
  r.read("end_epoch", s.end_epoch);
  r.read("start_unc", s.start_unc);
  r.read("end_unc", s.end_unc);
  r.finish();
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& e = c.simulator.experiment;
  const auto& sc = e.scenes;
  const auto& p = e.predictor;
  const auto& n = p.noise;
  json strategies = json::array();
  for (auto s : c.simulator.strategies) strategies.push_back(std::string(sim::to_string(s)));
  return json{
      {"geometry", {{"patch_size", c.geometry.patch_size}}},
      {"matching",
       {{"metric", std::string(to_string(c.matching.metric))},
        {"penalty_c", c.matching.penalty_c ? json(*c.matching.penalty_c) : json(nullptr)}}},
      {"asm", {{"reduction", std::string(to_string(c.asm_section.reduction))}}},
      {"ranking",
       {{"epochs", c.ranking.epochs},
        {"step_size", c.ranking.step_size},
        {"batch_size", c.ranking.batch_size},
        {"loss", std::string(to_string(c.ranking.loss))}}},
      {"selection",
       {{"schedule", detail::schedule_json(c.selection.schedule)},
        {"ema", {{"decay", c.selection.ema_decay}}},
        {"loss", {{"lambda1", c.selection.lambda1}}},
        {"boundary", std::string(to_string(c.selection.boundary))}}},
      {"simulator",
       {{"scenes",
         {{"count", sc.count},
          {"width", sc.width},
          {"height", sc.height},
          {"cell_size", sc.cell_size},
          {"background", sc.background},
          {"max_blobs", sc.max_blobs},
          {"blob_radius_min", sc.blob_radius_min},
          {"blob_radius_max", sc.blob_radius_max},
          {"blob_peak_min", sc.blob_peak_min},
          {"blob_peak_max", sc.blob_peak_max},
          {"clutter_cell", sc.clutter_cell},
          {"clutter_probability", sc.clutter_probability},
          {"clutter_min", sc.clutter_min},
          {"clutter_max", sc.clutter_max}}},
        {"predictor",
         {{"jitter_sigma", n.jitter_sigma},
          {"miss_rate_base", n.miss_rate_base},
          {"miss_rate_density_coef", n.miss_rate_density_coef},
          {"false_positive_rate", n.false_positive_rate},
          {"clutter_displace_prob", n.clutter_displace_prob},
          {"clutter_miss_rate", n.clutter_miss_rate},
          {"clutter_fp_rate", n.clutter_fp_rate},
          {"improvement_per_epoch", p.improvement_per_epoch},
          {"density_radius", p.density_radius},
          {"displace_radius", p.displace_radius},
          {"clutter_jitter_gain", p.clutter_jitter_gain},
          {"confidence_scale", p.confidence_scale},
          {"overconfidence", p.overconfidence},
          {"overconfidence_count", p.overconfidence_count}}},
        {"labeled_fraction", e.labeled_fraction},
        {"epochs", e.epochs},
        {"schedule", detail::schedule_json(e.schedule)},
        {"ema_steps_per_epoch", e.ema_steps_per_epoch},
        {"scorer_steps", e.scorer_steps},
        {"scorer_step_size", e.scorer_step_size},
        {"pseudo_gain", e.pseudo_gain},
        {"pseudo_quality_reference", e.pseudo_quality_reference},
        {"noise_scale_floor", e.noise_scale_floor},
        {"noise_scale_cap", e.noise_scale_cap},
        {"good_count_tolerance", e.good_count_tolerance},
        {"appearance_feature", e.appearance_feature},
        {"appearance_noise", e.appearance_noise},
        {"cutout", e.cutout},
        {"record_selected", e.record_selected},
        {"strategies", strategies},
        {"seeds", c.simulator.seeds}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

/// Overlays `j` on `base`. Missing keys keep their base value; unknown keys
/// and ill-typed values throw invalid_config.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  using detail::ObjectReader;
  ObjectReader root(j, "");
  if (const auto* g = root.child("geometry")) {
    ObjectReader r(*g, "geometry");
    r.read("patch_size", base.geometry.patch_size);
    r.finish();
  }
  if (const auto* m = root.child("matching")) {
    ObjectReader r(*m, "matching");
    r.read_enum("metric", base.matching.metric, parse_metric);
    if (const auto* pc = r.child("penalty_c")) {
      if (pc->is_null()) {
        base.matching.penalty_c.reset();
      } else if (pc->is_number()) {
        base.matching.penalty_c = pc->get<double>();
      } else {
        throw Error(ErrorCode::invalid_config, "bad value for matching.penalty_c");
      }
    }
    r.finish();
  }
  if (const auto* a = root.child("asm")) {
    ObjectReader r(*a, "asm");
    r.read_enum("reduction", base.asm_section.reduction, parse_reduction);
    r.finish();
  }
  if (const auto* rk = root.child("ranking")) {
    ObjectReader r(*rk, "ranking");
    r.read("epochs", base.ranking.epochs);
    r.read("step_size", base.ranking.step_size);
    r.read("batch_size", base.ranking.batch_size);
    r.read_enum("loss", base.ranking.loss, parse_loss);
    r.finish();
  }
  if (const auto* s = root.child("selection")) {
    ObjectReader r(*s, "selection");
    if (const auto* sch = r.child("schedule")) detail::read_schedule(*sch, "selection.schedule", base.selection.schedule);
    if (const auto* ema = r.child("ema")) {
      ObjectReader q(*ema, "selection.ema");
      q.read("decay", base.selection.ema_decay);
      q.finish();
    }
    if (const auto* loss = r.child("loss")) {
      ObjectReader q(*loss, "selection.loss");
      q.read("lambda1", base.selection.lambda1);
      q.finish();
    }
    r.read_enum("boundary", base.selection.boundary, parse_boundary);
    r.finish();
  }
  if (const auto* s = root.child("simulator")) {
    ObjectReader r(*s, "simulator");
    auto& e = base.simulator.experiment;
    if (const auto* sc = r.child("scenes")) {
      ObjectReader q(*sc, "simulator.scenes");
      auto& f = e.scenes;
      q.read("count", f.count);
      q.read("width", f.width);
      q.read("height", f.height);
      q.read("cell_size", f.cell_size);
      q.read("background", f.background);
      q.read("max_blobs", f.max_blobs);
      q.read("blob_radius_min", f.blob_radius_min);
      q.read("blob_radius_max", f.blob_radius_max);
      q.read("blob_peak_min", f.blob_peak_min);
      q.read("blob_peak_max", f.blob_peak_max);
      q.read("clutter_cell", f.clutter_cell);
      q.read("clutter_probability", f.clutter_probability);
      q.read("clutter_min", f.clutter_min);
      q.read("clutter_max", f.clutter_max);
      q.finish();
    }
    if (const auto* pr = r.child("predictor")) {
      ObjectReader q(*pr, "simulator.predictor");
      auto& p = e.predictor;
      q.read("jitter_sigma", p.noise.jitter_sigma);
      q.read("miss_rate_base", p.noise.miss_rate_base);
      q.read("miss_rate_density_coef", p.noise.miss_rate_density_coef);
      q.read("false_positive_rate", p.noise.false_positive_rate);
      q.read("clutter_displace_prob", p.noise.clutter_displace_prob);
      q.read("clutter_miss_rate", p.noise.clutter_miss_rate);
      q.read("clutter_fp_rate", p.noise.clutter_fp_rate);
      q.read("improvement_per_epoch", p.improvement_per_epoch);
      q.read("density_radius", p.density_radius);
      q.read("displace_radius", p.displace_radius);
      q.read("clutter_jitter_gain", p.clutter_jitter_gain);
      q.read("confidence_scale", p.confidence_scale);
      q.read("overconfidence", p.overconfidence);
      q.read("overconfidence_count", p.overconfidence_count);
      q.finish();
    }
    r.read("labeled_fraction", e.labeled_fraction);
    r.read("epochs", e.epochs);
    if (const auto* sch = r.child("schedule")) detail::read_schedule(*sch, "simulator.schedule", e.schedule);
    r.read("ema_steps_per_epoch", e.ema_steps_per_epoch);
    r.read("scorer_steps", e.scorer_steps);
    r.read("scorer_step_size", e.scorer_step_size);
    r.read("pseudo_gain", e.pseudo_gain);
    r.read("pseudo_quality_reference", e.pseudo_quality_reference);
    r.read("noise_scale_floor", e.noise_scale_floor);
    r.read("noise_scale_cap", e.noise_scale_cap);
    r.read("good_count_tolerance", e.good_count_tolerance);
    r.read("appearance_feature", e.appearance_feature);
    r.read("appearance_noise", e.appearance_noise);
    r.read("cutout", e.cutout);
    r.read("record_selected", e.record_selected);
    if (r.child("strategies")) {
      std::vector<std::string> names;
      r.read("strategies", names);
      base.simulator.strategies.clear();
      for (const auto& name : names) {
        const auto st = sim::parse_strategy(name);
        if (!st) throw Error(ErrorCode::invalid_config, "unknown strategy '" + name + "'");
        base.simulator.strategies.push_back(*st);
      }
    }
    r.read("seeds", base.simulator.seeds);
    r.finish();
  }
  root.read("output_dir", base.output_dir);
  root.read("seed", base.seed);
  root.read("workers", base.workers);
  root.finish();
  base.validate();
  return base;
}

/// Applies a dotted-path override such as "simulator.epochs=20". The value is
/// parsed as JSON when possible and taken as a string otherwise.
inline void apply_override(nlohmann::json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::invalid_config, "override must look like key.path=value: " + std::string(assignment));
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorCode::invalid_config, "empty key in override " + path);
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace asmu
