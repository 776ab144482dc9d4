#include "kfp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace kfp {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam beta2 must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
  if (batch.interior < 1 || batch.initial < 1 || batch.boundary < 1) throw ConfigError("batch sizes must be >= 1");
  architecture.validate();
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.full_batch = j.value("full_batch", c.full_batch);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    if (j.contains("batch")) {
      const auto& b = j.at("batch");
      c.batch.interior = b.value("interior", c.batch.interior);
      c.batch.initial = b.value("initial", c.batch.initial);
      c.batch.boundary = b.value("boundary", c.batch.boundary);
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.ge = w.value("ge", c.weights.ge);
      c.weights.ic = w.value("ic", c.weights.ic);
      c.weights.bc = w.value("bc", c.weights.bc);
      c.weights.mass = w.value("mass", c.weights.mass);
    }
    if (j.contains("architecture")) c.architecture.layer_sizes = j.at("architecture").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"full_batch", c.full_batch},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"batch", {{"interior", c.batch.interior}, {"initial", c.batch.initial}, {"boundary", c.batch.boundary}}},
          {"weights", {{"ge", c.weights.ge}, {"ic", c.weights.ic}, {"bc", c.weights.bc}, {"mass", c.weights.mass}}},
          {"architecture", c.architecture.layer_sizes}};
}

AdamState AdamState::zeros_like(const NetParams& params) {
  return {ParamGrad::zeros_like(params), ParamGrad::zeros_like(params), 0};
}

void adam_step(NetParams& params, const ParamGrad& grads, AdamState& state, double learning_rate,
               const AdamConfig& config) {
  if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!grads.all_finite()) throw NonFiniteError("adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    theta.array() -= learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + config.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.first_moment.layers[l].weight,
           state.second_moment.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

BatchSampler::BatchSampler(std::size_t population, std::uint64_t seed) : order_(population), rng_(seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next(std::size_t batch_size) {
  const std::size_t n = order_.size();
  if (batch_size >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  if (!shuffled_ || cursor_ == n) {
    reshuffle();
    shuffled_ = true;
  }
  const std::size_t head = std::min(batch_size, n - cursor_);
  out.insert(out.end(), order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
             order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + head));
  cursor_ += head;
  if (out.size() < batch_size) {
    // The batch straddles two permutations: points already taken from the old
    // tail go to the back of the new permutation so the batch has no repeats.
    reshuffle();
    std::vector<char> taken(n, 0);
    for (std::size_t i : out) taken[i] = 1;
    std::stable_partition(order_.begin(), order_.end(), [&](std::size_t i) { return !taken[i]; });
    const std::size_t rest = batch_size - out.size();
    out.insert(out.end(), order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(rest));
    cursor_ = rest;
  }
  return out;
}

GridSampler::GridSampler(const GridSet& grid, std::uint64_t seed)
    : interior(grid.interior.size(), seed), initial(grid.initial.size(), seed + 1),
      boundary(grid.boundary.size(), seed + 2) {}

namespace {

std::vector<Point> gather(const std::vector<Point>& points, const std::vector<std::size_t>& indices) {
  std::vector<Point> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(points[i]);
  return out;
}

}  // namespace

Batch sample_batch(const GridSet& grid, const BatchSizes& sizes, GridSampler& state) {
  Batch b;
  b.dv = grid.spacing.dv;
  b.interior = gather(grid.interior, state.interior.next(sizes.interior));
  b.initial = gather(grid.initial, state.initial.next(sizes.initial));
  b.boundary = gather(grid.boundary, state.boundary.next(sizes.boundary));
  return b;
}

TrainResult train(const Problem& problem, const GridSet& grid, const TrainConfig& config,
                  const CheckpointFn& on_checkpoint) {
  config.validate();
  return train_from(init_network(config.architecture, config.seed), problem, grid, config, on_checkpoint);
}

TrainResult train_from(NetParams initial, const Problem& problem, const GridSet& grid, const TrainConfig& config,
                       const CheckpointFn& on_checkpoint) {
  config.validate();
  problem.validate();
  TrainResult result{std::move(initial), {}, {}, false, {}};
  result.state = AdamState::zeros_like(result.params);
  result.history.reserve(config.epochs);

  GridSampler sampler(grid, config.seed ^ 0x9e3779b97f4a7c15ULL);
  const Batch whole = config.full_batch ? full_batch(grid) : Batch{};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Batch sampled;
      if (!config.full_batch) {
        // Mini-batches must keep incoming boundary points; redraw if a small
        // batch happens to contain none.
        for (int attempt = 0;; ++attempt) {
          sampled = sample_batch(grid, config.batch, sampler);
          const bool has_incoming = std::any_of(sampled.boundary.begin(), sampled.boundary.end(), [](const Point& p) {
            return classify_boundary(p.x, p.v) == BoundaryClass::Incoming;
          });
          if (has_incoming || attempt >= 16) break;
        }
      }
      const Batch& batch = config.full_batch ? whole : sampled;
      ParamGrad grad = ParamGrad::zeros_like(result.params);
      const LossBreakdown loss = loss_total(result.params, batch, problem, config.weights, &grad);
      adam_step(result.params, grad, result.state, config.learning_rate, config.adam);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      result.history.push_back({epoch, loss, elapsed.count()});
    } catch (const NonFiniteError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }
    if (on_checkpoint && config.checkpoint_every > 0 &&
        (epoch % config.checkpoint_every == 0 || epoch == config.epochs))
      on_checkpoint(epoch, result.params);
  }
  return result;
}

}  // namespace kfp
