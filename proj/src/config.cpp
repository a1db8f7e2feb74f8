#include "af/config.hpp"

#include <fstream>

#include "af/errors.hpp"

namespace af {

using nlohmann::json;

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

json PathSpec::to_json() const {
  json j;
  j["kind"] = path_kind_name(kind);
  j["steps"] = steps;
  if (kind == PathKind::Geometric) {
    j["refinement_blocks"] = refinement_blocks;
    if (!betas.empty()) j["betas"] = betas;
  }
  return j;
}

PathSpec PathSpec::from_json(const json& j) {
  require_keys(j, {"kind", "steps", "refinement_blocks", "betas"}, "path");
  PathSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "geometric")
    spec.kind = PathKind::Geometric;
  else if (kind == "shrinking_radius")
    spec.kind = PathKind::ShrinkingRadius;
  else if (kind == "constant_target")
    spec.kind = PathKind::ConstantTarget;
  else
    throw ValidationError("path: unknown kind '" + kind + "'");
  spec.steps = j.at("steps").get<int>();
  spec.refinement_blocks = j.value("refinement_blocks", 0);
  if (j.contains("betas")) spec.betas = j.at("betas").get<std::vector<double>>();
  return spec;
}

AnnealingPath PathSpec::build(TargetDensity target) const {
  switch (kind) {
    case PathKind::Geometric:
      if (!betas.empty()) {
        if (static_cast<int>(betas.size()) != steps + 1)
          throw ValidationError("path: betas must have steps + 1 entries");
        return AnnealingPath::geometric(std::move(target), betas);
      }
      return AnnealingPath::geometric_uniform(std::move(target), steps - refinement_blocks,
                                              refinement_blocks);
    case PathKind::ShrinkingRadius:
      return AnnealingPath::shrinking_radius(std::move(target), steps);
    case PathKind::ConstantTarget:
      return AnnealingPath::constant_target(std::move(target), steps);
  }
  throw ValidationError("path: bad kind");
}

json MetricOptions::to_json() const {
  json j;
  j["wasserstein_cap"] = wasserstein_cap;
  j["mmd_bandwidth_cap"] = mmd_bandwidth_cap;
  j["mode_radius"] = mode_radius;
  return j;
}

MetricOptions MetricOptions::from_json(const json& j) {
  require_keys(j, {"wasserstein_cap", "mmd_bandwidth_cap", "mode_radius"}, "metrics");
  MetricOptions m;
  m.wasserstein_cap = j.value("wasserstein_cap", 2000);
  m.mmd_bandwidth_cap = j.value("mmd_bandwidth_cap", 4096);
  m.mode_radius = j.value("mode_radius", -1.0);
  return m;
}

TargetDensity ExperimentConfig::build_target() const {
  return TargetDensity::from_json(target_json);
}

AnnealingPath ExperimentConfig::build_path() const { return path.build(build_target()); }

namespace {

json train_to_json(const TrainConfig& t) {
  json j;
  j["loss"] = loss_variant_name(t.loss_variant);
  j["alpha"] = t.alpha;
  j["sub_steps"] = t.sub_steps;
  j["learning_rate"] = t.learning_rate;
  j["lr_decay_floor"] = t.lr_decay_floor;
  j["iterations"] = t.iterations;
  j["batch_size"] = t.batch_size;
  j["pool_size"] = t.pool_size;
  j["hutchinson_sigma"] = t.hutchinson_sigma;
  j["probes_per_node"] = t.probes_per_node;
  j["hidden"] = t.hidden;
  json langevin;
  langevin["enabled"] = t.langevin.enabled;
  langevin["eta"] = t.langevin.eta;
  langevin["steps"] = t.langevin.steps;
  j["langevin"] = langevin;
  return j;
}

TrainConfig train_from_json(const json& j) {
  require_keys(j,
               {"loss", "alpha", "sub_steps", "learning_rate", "lr_decay_floor", "iterations",
                "batch_size", "pool_size", "hutchinson_sigma", "probes_per_node", "hidden",
                "langevin"},
               "train");
  TrainConfig t;
  if (j.contains("loss")) t.loss_variant = loss_variant_from_name(j.at("loss"));
  if (j.contains("alpha")) t.alpha = j.at("alpha").get<std::vector<double>>();
  t.sub_steps = j.value("sub_steps", 3);
  t.learning_rate = j.value("learning_rate", 1e-4);
  t.lr_decay_floor = j.value("lr_decay_floor", 1.0);
  t.iterations = j.value("iterations", 1000);
  t.batch_size = j.value("batch_size", 1000);
  t.pool_size = j.value("pool_size", 100000);
  t.hutchinson_sigma = j.value("hutchinson_sigma", 0.0);
  t.probes_per_node = j.value("probes_per_node", 1);
  if (j.contains("hidden")) t.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("langevin")) {
    const json& lj = j.at("langevin");
    require_keys(lj, {"enabled", "eta", "steps"}, "train.langevin");
    t.langevin.enabled = lj.value("enabled", false);
    t.langevin.eta = lj.value("eta", 1e-3);
    t.langevin.steps = lj.value("steps", 10);
  }
  return t;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  if (!name.empty()) j["name"] = name;
  if (!description.empty()) j["description"] = description;
  j["target"] = target_json;
  j["path"] = path.to_json();
  j["train"] = train_to_json(train);
  j["metrics"] = metrics.to_json();
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require_keys(j,
               {"name", "description", "target", "path", "train", "metrics", "output_dir",
                "seed"},
               "config");
  ExperimentConfig cfg;
  cfg.name = j.value("name", "");
  cfg.description = j.value("description", "");
  if (!j.contains("target")) throw ValidationError("config: missing 'target'");
  cfg.target_json = j.at("target");
  if (!j.contains("path")) throw ValidationError("config: missing 'path'");
  cfg.path = PathSpec::from_json(j.at("path"));
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  if (j.contains("metrics")) cfg.metrics = MetricOptions::from_json(j.at("metrics"));
  cfg.output_dir = j.value("output_dir", "af-out");
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.train.seed = cfg.seed;

  // Validate eagerly so malformed configs fail before any output exists.
  AnnealingPath path = cfg.build_path();
  cfg.train.validate(path.steps());
  return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

namespace {

// alpha schedule used by the circle-mixture, funnel, truncated-normal and
// logistic experiments: 8/3, 8/3, 4/3, 4/3, then 2/3 repeating.
std::vector<double> standard_alpha(int blocks) {
  std::vector<double> a(blocks, 2.0 / 3.0);
  for (int i = 0; i < std::min(blocks, 2); ++i) a[i] = 8.0 / 3.0;
  for (int i = 2; i < std::min(blocks, 4); ++i) a[i] = 4.0 / 3.0;
  return a;
}

// 20-block schedule for the exponentially weighted Gaussian experiments.
std::vector<double> expgauss_alpha() {
  std::vector<double> a;
  for (int i = 0; i < 4; ++i) a.push_back(20.0 / 3.0);
  for (int i = 0; i < 4; ++i) a.push_back(10.0 / 3.0);
  for (int i = 0; i < 4; ++i) a.push_back(5.0 / 3.0);
  for (int i = 0; i < 8; ++i) a.push_back(1.0);
  return a;
}

ExperimentConfig gmm_preset(const std::string& name, int modes, double radius, int dim,
                            bool weighted) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.description = std::to_string(modes) + "-mode circle mixture, radius " +
                    std::to_string(static_cast<int>(radius)) + ", d=" + std::to_string(dim) +
                    (weighted ? ", two modes double-weighted" : "");
  std::vector<double> weights;
  if (weighted) {
    weights.assign(modes, 1.0 / (modes + 2));
    weights[0] = 2.0 / (modes + 2);
    weights[1] = 2.0 / (modes + 2);
  }
  cfg.target_json = make_gmm_on_circle(modes, radius, dim, weights).to_json();
  cfg.path.kind = PathKind::Geometric;
  cfg.path.steps = 12;
  cfg.path.refinement_blocks = 2;
  cfg.train.loss_variant = LossVariant::AlternativeTaylor;
  cfg.train.alpha = standard_alpha(12);
  return cfg;
}

ExperimentConfig truncnorm_preset(const std::string& name, double c, int dim) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.description = "norm >= " + std::to_string(static_cast<int>(c)) +
                    " shell of a standard Gaussian, d=" + std::to_string(dim);
  TruncatedNormalRelaxedParams p;
  p.radius = c;
  cfg.target_json = TargetDensity::truncated_normal(dim, p).to_json();
  cfg.path.kind = PathKind::ShrinkingRadius;
  cfg.path.steps = 8;
  cfg.train.loss_variant = LossVariant::Original;
  cfg.train.alpha = standard_alpha(8);
  // Pushing all mass out of the shell needs a velocity of order c; the global
  // step-size default cannot move the weights that far within the budget, so
  // this family trains with many small-batch steps at a higher rate.
  cfg.train.iterations = 10000;
  cfg.train.batch_size = 250;
  cfg.train.learning_rate = 1e-3;
  return cfg;
}

ExperimentConfig expgauss_preset(const std::string& name, int dim) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.description = "exponentially weighted Gaussian, d=" + std::to_string(dim) + ", " +
                    std::to_string(1 << std::min(dim, 10)) + " modes";
  ExpWeightedGaussianParams p;
  p.abs_mask.assign(dim, dim <= 10);
  for (int i = 0; i < std::min(dim, 10); ++i) p.abs_mask[i] = true;
  cfg.target_json = TargetDensity::exp_weighted_gaussian(dim, p).to_json();
  cfg.path.kind = PathKind::Geometric;
  cfg.path.steps = 20;
  cfg.path.refinement_blocks = 5;
  cfg.train.loss_variant = LossVariant::AlternativeTaylor;
  cfg.train.alpha = expgauss_alpha();
  return cfg;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
  if (name == "gmm-6-8-d2") return gmm_preset(name, 6, 8, 2, false);
  if (name == "gmm-6-8-d5") return gmm_preset(name, 6, 8, 5, false);
  if (name == "gmm-8-10-d2") return gmm_preset(name, 8, 10, 2, false);
  if (name == "gmm-8-10-d5") return gmm_preset(name, 8, 10, 5, false);
  if (name == "gmm-10-12-d2") return gmm_preset(name, 10, 12, 2, false);
  if (name == "gmm-10-12-d5") return gmm_preset(name, 10, 12, 5, false);
  if (name == "wgmm-10-12") return gmm_preset(name, 10, 12, 2, true);
  if (name == "truncnorm-c4-d2") return truncnorm_preset(name, 4.0, 2);
  if (name == "truncnorm-c4-d5") return truncnorm_preset(name, 4.0, 5);
  if (name == "truncnorm-c6-d2") return truncnorm_preset(name, 6.0, 2);
  if (name == "truncnorm-c6-d5") return truncnorm_preset(name, 6.0, 5);
  if (name == "funnel-d5") {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.description = "funnel with neck variance 0.81, d=5";
    cfg.target_json = TargetDensity::funnel(5, FunnelParams{}).to_json();
    cfg.path.kind = PathKind::ConstantTarget;
    cfg.path.steps = 8;
    cfg.train.loss_variant = LossVariant::AlternativeTaylor;
    cfg.train.alpha = standard_alpha(8);
    return cfg;
  }
  if (name == "expgauss-d2") return expgauss_preset(name, 2);
  if (name == "expgauss-d5") return expgauss_preset(name, 5);
  if (name == "expgauss-d10") return expgauss_preset(name, 10);
  if (name == "expgauss-d50") return expgauss_preset(name, 50);
  if (name == "bayeslogit-synth") {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.description = "hierarchical logistic posterior on a bundled synthetic dataset";
    BayesianLogisticPosteriorParams data = synth_logistic_dataset(100, 3, 7);
    cfg.target_json = TargetDensity::bayesian_logistic(std::move(data)).to_json();
    cfg.path.kind = PathKind::ConstantTarget;
    cfg.path.steps = 6;
    cfg.train.loss_variant = LossVariant::Original;
    cfg.train.alpha = standard_alpha(6);
    return cfg;
  }
  throw ValidationError("unknown preset '" + name + "'; see `af train --list-presets`");
}

std::vector<std::string> preset_names() {
  return {"gmm-6-8-d2",      "gmm-6-8-d5",      "gmm-8-10-d2",     "gmm-8-10-d5",
          "gmm-10-12-d2",    "gmm-10-12-d5",    "wgmm-10-12",      "truncnorm-c4-d2",
          "truncnorm-c4-d5", "truncnorm-c6-d2", "truncnorm-c6-d5", "funnel-d5",
          "expgauss-d2",     "expgauss-d5",     "expgauss-d10",    "expgauss-d50",
          "bayeslogit-synth"};
}

bool is_preset(const std::string& name) {
  for (const std::string& p : preset_names())
    if (p == name) return true;
  return false;
}

}  // namespace af
