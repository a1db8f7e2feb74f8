#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "af/baselines.hpp"
#include "af/config.hpp"
#include "af/csvio.hpp"
#include "af/errors.hpp"
#include "af/importance.hpp"
#include "af/metrics.hpp"
#include "af/special.hpp"
#include "af/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

af::ExperimentConfig load_config(const std::string& preset_name, const std::string& config_path) {
  if (!preset_name.empty() && !config_path.empty())
    throw af::ValidationError("give either --preset or --config, not both");
  if (!preset_name.empty()) return af::preset(preset_name);
  if (!config_path.empty()) return af::ExperimentConfig::load_file(config_path);
  throw af::ValidationError("one of --preset or --config is required");
}

af::TargetDensity target_from_flags(const std::string& target_path,
                                    const std::string& preset_name) {
  if (!target_path.empty() && !preset_name.empty())
    throw af::ValidationError("give either --target or --preset-target, not both");
  if (!preset_name.empty()) return af::preset(preset_name).build_target();
  if (target_path.empty())
    throw af::ValidationError("one of --target or --preset-target is required");
  std::ifstream in(target_path);
  if (!in) throw af::ValidationError("cannot open target spec '" + target_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw af::ValidationError("target '" + target_path + "': " + e.what());
  }
  return af::TargetDensity::from_json(j);
}

void write_json_out(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw af::ValidationError("cannot open '" + out_path + "' for writing");
  out << j.dump(2) << "\n";
}

int cmd_train(const std::string& preset_name, const std::string& config_path,
              const std::string& out_override, std::optional<std::uint64_t> seed_override,
              std::optional<int> iterations_override) {
  af::ExperimentConfig cfg = load_config(preset_name, config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.train.seed = *seed_override;
  }
  if (iterations_override) cfg.train.iterations = *iterations_override;
  af::AnnealingPath path = cfg.build_path();
  cfg.train.validate(path.steps());

  const fs::path out_dir = cfg.output_dir;
  std::fprintf(stderr, "training %s: %d blocks, d=%d -> %s\n",
               cfg.name.empty() ? "experiment" : cfg.name.c_str(), path.steps(), path.dim(),
               out_dir.string().c_str());
  af::AnnealingFlowModel model = af::train_model(path, cfg.train, out_dir);
  std::ofstream echo(out_dir / "config.json");
  echo << cfg.to_json().dump(2) << "\n";
  std::fprintf(stderr, "wrote %d blocks to %s\n", model.block_count(),
               out_dir.string().c_str());
  return 0;
}

int cmd_sample(const std::string& model_dir, int n, std::uint64_t seed,
               const std::string& out_path, int upto) {
  if (n < 0) throw af::ValidationError("sample: n must be >= 0");
  const af::AnnealingFlowModel model = af::AnnealingFlowModel::load(model_dir);
  af::Rng rng = af::Rng::stream(seed, "sample");
  af::Mat draws = af::sample_reference(n, model.dim, rng);
  const af::Mat pushed = af::push_forward(model, draws, upto);
  af::write_samples_csv(out_path, pushed);
  return 0;
}

int cmd_evaluate(const std::string& samples_path, const std::string& reference_path,
                 const std::string& target_path, const std::string& target_preset,
                 int reference_n, std::uint64_t seed, const std::string& out_path,
                 double mode_radius, int wasserstein_cap) {
  const af::Mat samples = af::read_samples_csv(samples_path);
  af::MetricsReport report;
  report.n_x = samples.rows();
  report.seed = seed;

  std::optional<af::TargetDensity> target;
  af::Mat reference;
  if (!reference_path.empty()) {
    reference = af::read_samples_csv(reference_path);
  } else {
    target = target_from_flags(target_path, target_preset);
    if (!target->has_exact_sampler())
      throw af::ValidationError("target family has no exact sampler; pass --reference");
    reference = af::Mat(reference_n, target->dim());
    af::Rng rng = af::Rng::stream(seed, "evaluate/reference");
    target->sample_exact(reference, rng);
  }
  if (reference.cols() != samples.cols())
    throw af::ValidationError("evaluate: sample/reference dimension mismatch");
  report.n_y = reference.rows();

  if (samples.rows() >= 2 && reference.rows() >= 2) {
    af::MmdOptions mmd_opts;
    mmd_opts.seed = seed;
    report.mmd = af::mmd(samples, reference, mmd_opts);

    const int cap = std::min({wasserstein_cap, samples.rows(), reference.rows()});
    af::Rng wrng = af::Rng::stream(seed, "evaluate/wasserstein");
    const af::Mat xs = af::subsample_rows(samples, cap, wrng);
    const af::Mat ys = af::subsample_rows(reference, cap, wrng);
    report.wasserstein = af::wasserstein(xs, ys);
  }

  if (target) {
    const af::Mat centers = target->mode_centers();
    if (centers.rows() > 0) {
      std::vector<double> weights;
      if (target->family() == af::Family::GaussianMixture)
        weights = target->gmm_params().weights;
      else
        weights.assign(centers.rows(), 1.0 / centers.rows());
      report.mode_weight_mse = af::mode_weight_mse(samples, centers, weights);
      const double radius = mode_radius > 0.0 ? mode_radius : 3.0 * target->component_std();
      report.modes_explored = af::modes_explored(samples, centers, radius);
    }
    if (target->family() == af::Family::ExpWeightedGaussian) {
      const auto& p = target->expgauss_params();
      report.variance_mse =
          af::variance_mse(samples, p.abs_mask, std::vector<double>(samples.cols(), 1.0));
    }
  }

  write_json_out(report.to_json(), out_path);
  return 0;
}

int cmd_baseline(const std::string& target_path, const std::string& target_preset,
                 const std::string& sampler, int steps, std::uint64_t seed,
                 const std::string& out_path, double proposal_std, int replicas,
                 int exchange_interval, int burn_in) {
  const af::TargetDensity target = target_from_flags(target_path, target_preset);
  af::Mat samples;
  if (sampler == "mh") {
    af::MhConfig cfg;
    cfg.proposal_std = proposal_std;
    cfg.chain_length = steps;
    cfg.burn_in = burn_in;
    cfg.validate();
    af::Rng rng = af::Rng::stream(seed, "baseline");
    std::vector<double> x0(target.dim());
    for (double& v : x0) v = rng.normal();
    samples = af::mh_chain(target, x0, cfg, rng);
  } else if (sampler == "pt") {
    af::PtConfig cfg;
    cfg.proposal_std = proposal_std;
    cfg.iterations = steps;
    cfg.num_replicas = replicas;
    cfg.exchange_interval = exchange_interval;
    cfg.burn_in = burn_in;
    cfg.validate();
    samples = af::pt_chains(target, cfg, seed, "baseline").front();
  } else {
    throw af::ValidationError("unknown sampler '" + sampler + "' (expected mh or pt)");
  }
  af::write_samples_csv(out_path, samples);
  return 0;
}

int cmd_importance(const std::string& model_dir, const std::string& samples_path,
                   const std::string& ratio_dir, double c, int rounds, int per_round,
                   std::uint64_t seed, const std::string& out_path, int dre_samples,
                   int dre_epochs, double dre_lr, const std::string& save_ratio_dir) {
  if (model_dir.empty()) throw af::ValidationError("importance: --model is required");
  const af::AnnealingFlowModel model = af::AnnealingFlowModel::load(model_dir);
  if (c < 0.0) {
    if (model.path_meta.contains("target") && model.path_meta["target"].contains("radius"))
      c = model.path_meta["target"]["radius"].get<double>();
    else
      throw af::ValidationError("importance: --c is required for this model");
  }

  af::RatioChain chain;
  if (!ratio_dir.empty()) {
    chain = af::RatioChain::load(ratio_dir);
  } else {
    std::fprintf(stderr, "training density-ratio net (%d samples per side)\n", dre_samples);
    af::Rng rng = af::Rng::stream(seed, "importance/dre-data");
    const af::Mat prev = af::sample_reference(dre_samples, model.dim, rng);
    af::Mat next_draws = af::sample_reference(dre_samples, model.dim, rng);
    const af::Mat next = af::push_forward(model, next_draws);
    af::DreConfig dre;
    dre.epochs = dre_epochs;
    dre.learning_rate = dre_lr;
    dre.seed = seed;
    chain.stages.push_back(af::train_ratio_stage(prev, next, dre));
    if (!save_ratio_dir.empty()) chain.save(save_ratio_dir);
  }

  json j;
  if (!samples_path.empty()) {
    const af::Mat samples = af::read_samples_csv(samples_path);
    const auto h = [c](std::span<const double> x) {
      return std::sqrt(af::sq_norm(x)) >= c ? 1.0 : 0.0;
    };
    const af::IsEstimate est = af::is_estimate(samples, h, chain);
    j["mean"] = est.value;
    j["std"] = 0.0;
    j["rounds"] = 1;
    j["per_round"] = samples.rows();
    j["clamped"] = est.clamped;
  } else {
    const af::TailResult result =
        af::tail_probability_experiment(c, model, chain, rounds, per_round, seed);
    j = result.to_json();
  }
  const double truth = af::gaussian_shell_tail(model.dim, c);
  j["analytic_truth"] = truth;
  std::fprintf(stderr, "estimate %.6g +/- %.6g  (analytic %.6g)\n", j["mean"].get<double>(),
               j["std"].get<double>(), truth);
  write_json_out(j, out_path);
  return 0;
}

int cmd_inspect(const std::string& model_dir) {
  const af::AnnealingFlowModel model = af::AnnealingFlowModel::load(model_dir);
  json j;
  j["dim"] = model.dim;
  j["blocks"] = model.block_count();
  if (!model.path_meta.is_null()) j["path"] = model.path_meta;
  json blocks = json::array();
  for (const af::FlowBlock& b : model.blocks) {
    json bj;
    bj["widths"] = b.net.widths();
    bj["sub_steps"] = b.sub_steps;
    bj["parameters"] = b.net.n_params();
    blocks.push_back(bj);
  }
  j["block_details"] = blocks;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed neural transport sampler toolkit"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a flow model from a preset or config file");
  std::string train_preset, train_config, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_iterations;
  bool list_presets = false;
  train->add_option("--preset", train_preset, "preset name");
  train->add_option("--config", train_config, "config JSON file");
  train->add_option("--out", train_out, "output model directory (overrides config)");
  train->add_option("--seed", train_seed, "global seed (overrides config)");
  train->add_option("--iterations", train_iterations, "iterations per block (override)");
  train->add_flag("--list-presets", list_presets, "list preset names and exit");

  // sample
  auto* sample = app.add_subcommand("sample", "draw samples from a trained model");
  std::string sample_model, sample_out = "samples.csv";
  int sample_n = 1000, sample_upto = -1;
  std::uint64_t sample_seed = 1;
  sample->add_option("--model", sample_model, "model directory")->required();
  sample->add_option("--n", sample_n, "number of samples");
  sample->add_option("--seed", sample_seed, "seed");
  sample->add_option("--out", sample_out, "output CSV");
  sample->add_option("--upto", sample_upto, "push through the first k blocks only");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compute sample-quality metrics");
  std::string eval_samples, eval_reference, eval_target, eval_target_preset, eval_out;
  int eval_ref_n = 10000, eval_wcap = 2000;
  std::uint64_t eval_seed = 1;
  double eval_mode_radius = -1.0;
  evaluate->add_option("--samples", eval_samples, "samples CSV")->required();
  evaluate->add_option("--reference", eval_reference, "reference samples CSV");
  evaluate->add_option("--target", eval_target, "target spec JSON (draws exact reference)");
  evaluate->add_option("--preset-target", eval_target_preset, "take the target from a preset");
  evaluate->add_option("--reference-n", eval_ref_n, "reference draws when using --target");
  evaluate->add_option("--seed", eval_seed, "metric seed");
  evaluate->add_option("--out", eval_out, "report JSON path (default: stdout)");
  evaluate->add_option("--mode-radius", eval_mode_radius, "mode ball radius");
  evaluate->add_option("--wasserstein-cap", eval_wcap, "assignment size cap");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "run an MCMC reference sampler");
  std::string base_target, base_target_preset, base_sampler = "mh", base_out = "baseline.csv";
  int base_steps = 100000, base_replicas = 5, base_interval = 100, base_burn = -1;
  std::uint64_t base_seed = 1;
  double base_proposal = 1.0;
  baseline->add_option("--target", base_target, "target spec JSON");
  baseline->add_option("--preset-target", base_target_preset, "take the target from a preset");
  baseline->add_option("--sampler", base_sampler, "mh or pt");
  baseline->add_option("--steps", base_steps, "chain length / iterations");
  baseline->add_option("--seed", base_seed, "seed");
  baseline->add_option("--out", base_out, "output CSV");
  baseline->add_option("--proposal-std", base_proposal, "proposal standard deviation");
  baseline->add_option("--replicas", base_replicas, "parallel tempering replicas");
  baseline->add_option("--exchange-interval", base_interval, "iterations between swaps");
  baseline->add_option("--burn-in", base_burn, "burn-in (default 20%)");

  // importance
  auto* importance = app.add_subcommand("importance", "tail-probability estimation");
  std::string imp_model, imp_samples, imp_ratio, imp_out, imp_save_ratio;
  double imp_c = -1.0, imp_dre_lr = 1e-3;
  int imp_rounds = 200, imp_per_round = 500, imp_dre_samples = 50000, imp_dre_epochs = 60;
  std::uint64_t imp_seed = 1;
  importance->add_option("--model", imp_model, "trained flow model directory")->required();
  importance->add_option("--samples", imp_samples, "use a fixed sample CSV (single round)");
  importance->add_option("--ratio", imp_ratio, "load a saved ratio chain");
  importance->add_option("--save-ratio", imp_save_ratio, "save the trained ratio chain here");
  importance->add_option("--c", imp_c, "shell radius (default: model target radius)");
  importance->add_option("--rounds", imp_rounds, "estimation rounds");
  importance->add_option("--per-round", imp_per_round, "samples per round");
  importance->add_option("--seed", imp_seed, "seed");
  importance->add_option("--out", imp_out, "result JSON path (default: stdout)");
  importance->add_option("--dre-samples", imp_dre_samples, "training samples per side");
  importance->add_option("--dre-epochs", imp_dre_epochs, "ratio-net epochs");
  importance->add_option("--dre-lr", imp_dre_lr, "ratio-net learning rate");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print a model manifest");
  std::string inspect_model;
  inspect->add_option("--model", inspect_model, "model directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      if (list_presets) {
        for (const std::string& name : af::preset_names()) std::printf("%s\n", name.c_str());
        return 0;
      }
      return cmd_train(train_preset, train_config, train_out, train_seed, train_iterations);
    }
    if (sample->parsed())
      return cmd_sample(sample_model, sample_n, sample_seed, sample_out, sample_upto);
    if (evaluate->parsed())
      return cmd_evaluate(eval_samples, eval_reference, eval_target, eval_target_preset,
                          eval_ref_n, eval_seed, eval_out, eval_mode_radius, eval_wcap);
    if (baseline->parsed())
      return cmd_baseline(base_target, base_target_preset, base_sampler, base_steps, base_seed,
                          base_out, base_proposal, base_replicas, base_interval, base_burn);
    if (importance->parsed())
      return cmd_importance(imp_model, imp_samples, imp_ratio, imp_c, imp_rounds,
                            imp_per_round, imp_seed, imp_out, imp_dre_samples, imp_dre_epochs,
                            imp_dre_lr, imp_save_ratio);
    if (inspect->parsed()) return cmd_inspect(inspect_model);
  } catch (const af::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const af::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
