#include "af/importance.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "af/density.hpp"
#include "af/errors.hpp"
#include "af/tape.hpp"
#include "af/training.hpp"

namespace af {

double RatioStage::operator()(std::span<const double> x) const {
  if (const Mlp* net = std::get_if<Mlp>(&eval)) return net->eval_scalar(x);
  return std::get<std::function<double(std::span<const double>)>>(eval)(x);
}

int RatioStage::stage_dim() const {
  if (const Mlp* net = std::get_if<Mlp>(&eval)) return net->input_dim();
  return -1;
}

double RatioChain::log_ratio(std::span<const double> x) const {
  double acc = 0.0;
  for (const RatioStage& stage : stages) acc += stage(x);
  return acc;
}

double log_ratio(const RatioChain& chain, std::span<const double> x) {
  return chain.log_ratio(x);
}

void RatioChain::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  int count = 0;
  for (const RatioStage& stage : stages) {
    const Mlp* net = std::get_if<Mlp>(&stage.eval);
    if (!net) throw ValidationError("ratio chain: analytic stages cannot be persisted");
    char name[32];
    std::snprintf(name, sizeof(name), "stage_%03d.aflw", ++count);
    net->save(dir / name);
  }
  nlohmann::json manifest;
  manifest["format"] = "aflw-ratio-chain";
  manifest["stages"] = count;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ValidationError("ratio chain: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

RatioChain RatioChain::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("ratio chain: no manifest in '" + dir.string() + "'");
  nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "aflw-ratio-chain")
    throw ValidationError("ratio chain: '" + dir.string() + "' is not a ratio chain");
  RatioChain chain;
  const int count = manifest.at("stages").get<int>();
  for (int i = 1; i <= count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "stage_%03d.aflw", i);
    chain.stages.push_back(RatioStage{Mlp::load(dir / name)});
  }
  return chain;
}

RatioStage train_ratio_stage(const Mat& samples_prev, const Mat& samples_next,
                             const DreConfig& cfg, std::vector<double>* loss_trace) {
  if (samples_prev.rows() == 0 || samples_next.rows() == 0)
    throw ValidationError("dre: both sample sets must be nonempty");
  if (samples_prev.cols() != samples_next.cols())
    throw ValidationError("dre: dimension mismatch between sample sets");
  const int d = samples_prev.cols();

  Rng init_rng = Rng::stream(cfg.seed, "dre/init");
  Mlp net = Mlp::scalar_net(d, cfg.hidden, init_rng);
  if (cfg.epochs == 0) return RatioStage{std::move(net)};

  Rng shuffle_rng = Rng::stream(cfg.seed, "dre/shuffle");
  std::vector<double> params = net.to_vector();
  AdamState adam(params.size());

  const int batch = std::min({cfg.batch_size, samples_prev.rows(), samples_next.rows()});
  const int steps_per_epoch =
      std::max(1, std::min(samples_prev.rows(), samples_next.rows()) / batch);

  std::vector<int> order_prev(samples_prev.rows()), order_next(samples_next.rows());
  std::iota(order_prev.begin(), order_prev.end(), 0);
  std::iota(order_next.begin(), order_next.end(), 0);
  auto reshuffle = [&](std::vector<int>& order) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
  };

  Mat batch_prev(batch, d), batch_next(batch, d);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    reshuffle(order_prev);
    reshuffle(order_next);
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int i = 0; i < batch; ++i) {
        const double* p = samples_prev.row(order_prev[step * batch + i]);
        std::copy(p, p + d, batch_prev.row(i));
        const double* q = samples_next.row(order_next[step * batch + i]);
        std::copy(q, q + d, batch_next.row(i));
      }
      Graph g;
      const TapedMlp taped = TapedMlp::bind(g, net);
      const int r_prev = taped.forward(g, g.add_leaf(batch_prev, "prev"));
      const int r_next = taped.forward(g, g.add_leaf(batch_next, "next"));
      const int loss_prev = g.mean_all(g.softplus_of(r_prev, -1.0));
      const int loss_next = g.mean_all(g.softplus_of(r_next, 1.0));
      const int loss = g.lincomb({{1.0, loss_prev}, {1.0, loss_next}}, "dre_loss");
      g.backward(loss);
      const std::vector<double> grad = param_gradient(g, taped);
      adam.step(params, grad, cfg.learning_rate);
      net.from_vector(params);
      if (loss_trace) loss_trace->push_back(g.scalar(loss));
    }
  }
  return RatioStage{std::move(net)};
}

nlohmann::json IsEstimate::to_json() const {
  nlohmann::json j;
  j["mean"] = value;
  j["clamped"] = clamped;
  return j;
}

IsEstimate is_estimate(const Mat& samples,
                       const std::function<double(std::span<const double>)>& h,
                       const RatioChain& chain) {
  if (samples.rows() < 1) throw ValidationError("is_estimate: need at least one sample");
  IsEstimate result;
  double acc = 0.0;
  for (int i = 0; i < samples.rows(); ++i) {
    double lr = chain.log_ratio(samples.row_span(i));
    if (lr > 700.0 || lr < -700.0) {
      lr = std::clamp(lr, -700.0, 700.0);
      ++result.clamped;
    }
    acc += std::exp(lr) * h(samples.row_span(i));
  }
  result.value = acc / samples.rows();
  return result;
}

double normalized_is_estimate(const Mat& samples,
                              const std::function<double(std::span<const double>)>& h,
                              std::span<const double> log_weights) {
  if (samples.rows() < 1 || log_weights.size() != static_cast<std::size_t>(samples.rows()))
    throw ValidationError("normalized_is_estimate: weight count mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) m = std::max(m, lw);
  if (!std::isfinite(m)) throw NumericError("normalized_is_estimate: degenerate weights");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < samples.rows(); ++i) {
    const double w = std::exp(log_weights[i] - m);
    num += w * h(samples.row_span(i));
    den += w;
  }
  return num / den;
}

nlohmann::json TailResult::to_json() const {
  nlohmann::json j;
  j["mean"] = mean;
  j["std"] = stddev;
  j["rounds"] = rounds;
  j["per_round"] = per_round;
  j["clamped"] = clamped;
  return j;
}

TailResult tail_probability_experiment(double c, const AnnealingFlowModel& model,
                                       const RatioChain& chain, int rounds, int per_round,
                                       std::uint64_t seed) {
  if (rounds < 1 || per_round < 1)
    throw ValidationError("tail experiment: rounds and per_round must be >= 1");
  const auto h = [c](std::span<const double> x) {
    return std::sqrt(sq_norm(x)) >= c ? 1.0 : 0.0;
  };
  Rng rng = Rng::stream(seed, "importance/rounds");
  TailResult result;
  result.rounds = rounds;
  result.per_round = per_round;
  std::vector<double> values(rounds);
  for (int r = 0; r < rounds; ++r) {
    Mat draws = sample_reference(per_round, model.dim, rng);
    const Mat pushed = push_forward(model, draws);
    const IsEstimate est = is_estimate(pushed, h, chain);
    values[r] = est.value;
    result.clamped += est.clamped;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= rounds;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  result.mean = mean;
  result.stddev = rounds > 1 ? std::sqrt(var / (rounds - 1)) : 0.0;
  return result;
}

}  // namespace af
