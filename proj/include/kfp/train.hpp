#pragma once
/**
 * @file train.hpp
 * @brief Adam optimization of the total loss over mini-batches of the
 *        collocation grid.
 */

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/loss.hpp"
#include "kfp/net.hpp"

namespace kfp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct BatchSizes {
  std::size_t interior = 4096;
  std::size_t initial = 1024;
  std::size_t boundary = 1024;
};

struct TrainConfig {
  /// Number of optimizer steps; one history row per step.
  std::size_t epochs = 20000;
  BatchSizes batch;
  /// Evaluate the loss on the whole grid each step instead of mini-batches.
  bool full_batch = false;
  double learning_rate = 1e-3;
  AdamConfig adam;
  std::uint64_t seed = 0;
  /// 0 disables checkpoint callbacks.
  std::size_t checkpoint_every = 0;
  LossWeights weights;
  Architecture architecture = Architecture::standard();

  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& config);

struct AdamState {
  ParamGrad first_moment;
  ParamGrad second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const NetParams& params);
};

/// One bias-corrected Adam update. Throws NonFiniteError (leaving params and
/// state untouched) if the gradient has a non-finite entry.
void adam_step(NetParams& params, const ParamGrad& grads, AdamState& state, double learning_rate,
               const AdamConfig& config);

/**
 * Draws fixed-size batches from a point set without replacement. The stream of
 * drawn indices is a concatenation of independent random permutations, so
 * every point appears exactly once in each consecutive run of size() draws, and
 * a batch never repeats a point.
 * If the batch size covers the whole set, every batch is the set in its
 * original order.
 */
class BatchSampler {
public:
  BatchSampler(std::size_t population, std::uint64_t seed);

  std::vector<std::size_t> next(std::size_t batch_size);
  std::size_t population() const { return order_.size(); }

private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool shuffled_ = false;
  std::mt19937_64 rng_;
};

/// Sampler state for the three point families of a grid.
struct GridSampler {
  GridSampler(const GridSet& grid, std::uint64_t seed);

  BatchSampler interior;
  BatchSampler initial;
  BatchSampler boundary;
};

/// Next mini-batch of each family; batch sizes >= the family size give the full family.
Batch sample_batch(const GridSet& grid, const BatchSizes& sizes, GridSampler& state);

struct HistoryRow {
  std::size_t epoch;
  LossBreakdown loss;
  double seconds;
};

struct TrainResult {
  NetParams params;
  std::vector<HistoryRow> history;
  AdamState state;
  bool aborted = false;
  std::string abort_reason;
};

/// Called with (completed epochs, params) every checkpoint_every epochs and at
/// the final epoch.
using CheckpointFn = std::function<void(std::size_t epoch, const NetParams& params)>;

/**
 * Runs config.epochs Adam steps on loss_total. On a non-finite loss or
 * gradient training stops, `aborted` is set and `params` holds the last
 * parameters that produced a finite step.
 */
TrainResult train(const Problem& problem, const GridSet& grid, const TrainConfig& config,
                  const CheckpointFn& on_checkpoint = {});

/// Same, continuing from given parameters.
TrainResult train_from(NetParams initial, const Problem& problem, const GridSet& grid, const TrainConfig& config,
                       const CheckpointFn& on_checkpoint = {});

}  // namespace kfp
