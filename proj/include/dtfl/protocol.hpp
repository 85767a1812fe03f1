#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dtfl/data.hpp"
#include "dtfl/optim.hpp"
#include "dtfl/privacy.hpp"
#include "dtfl/simulator.hpp"
#include "dtfl/split_model.hpp"
#include "dtfl/tier_profile.hpp"

namespace dtfl {

struct Batch {
  Tensor x;
  std::vector<int> y;
};

/// Cuts `indices` into consecutive batches of at most `batch_size` rows,
/// after shuffling them with `shuffle` when given.
std::vector<Batch> make_batches(const Dataset& data, std::span<const std::size_t> indices, std::size_t batch_size,
                                Rng* shuffle = nullptr);

/// Batches processed per round: ceil(samples / batch_size) * epochs.
std::size_t batches_per_round(std::size_t samples, std::size_t batch_size, int epochs);

struct LocalTraining {
  OptimConfig optim;
  int epochs = 1;
  double privacy_alpha = 0.0;
  bool patch_shuffle = false;
  std::size_t patch_size = 1;
  std::uint64_t noise_seed = 0;  // patch-shuffle stream
};

struct ClientUpdateResult {
  int client_id = 0;
  int tier = 0;
  std::vector<Tensor> z;  // uploaded activations, one per processed batch
  std::vector<std::vector<int>> labels;
  std::vector<Block> client_blocks;
  DenseLayer aux_head;
  double loss = 0.0;  // mean local loss over processed batches
  std::size_t batches = 0;
  bool skipped = false;  // empty partition
};

/// Local-loss training of the client part: for each batch, compute z, the aux
/// logits and the local loss (optionally mixed with the distance-correlation
/// penalty), backpropagate through aux head and client blocks and step. The
/// z of each batch is recorded before that batch's update.
ClientUpdateResult client_update(int client_id, TierSplit split, std::span<const Batch> batches,
                                 const LocalTraining& training);

/// One forward/backward/step on the server part per uploaded batch. Nothing
/// flows back to the client. Returns the mean server loss.
double server_update(TierSplit& split, std::span<const Tensor> z, std::span<const std::vector<int>> labels,
                     const OptimConfig& optim);

enum class AggregationPolicy { Uniform, DataWeighted };

/// Normalized weights: 1/K each, or N_k / N.
std::vector<double> aggregation_weights(std::span<const double> sample_counts, AggregationPolicy policy);

/// Parameter-wise weighted average. Computed as p_0 + sum_k w_k (p_k - p_0),
/// which returns identical inputs unchanged bit for bit.
BlockStack aggregate(std::span<const BlockStack> models, std::span<const double> sample_counts,
                     AggregationPolicy policy);
DenseLayer aggregate(std::span<const DenseLayer> layers, std::span<const double> sample_counts,
                     AggregationPolicy policy);

struct GlobalModelState {
  TieredModel model;
  int round = 0;
};

/// Everything a round needs besides the model and the clock.
struct RoundContext {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  const Partition* partition = nullptr;
  const TierProfileTable* profile = nullptr;
  std::size_t batch_size = 100;
  int epochs = 1;
  OptimConfig optim;
  PrivacyConfig privacy;
  AggregationPolicy policy = AggregationPolicy::DataWeighted;
  std::uint64_t seed = 0;
  bool train_model = true;
  int jobs = 1;
};

/// One DTFL round for the assigned participants (client id -> tier): client
/// updates, per-client server updates, blockwise aggregation of the assembled
/// models, per-tier aggregation of aux heads among tier-mates, evaluation and
/// virtual timing. Throws InputError("empty round") with no participants.
RoundReport run_round(GlobalModelState& state, const std::map<int, int>& assignment, Simulator& simulator,
                      const RoundContext& ctx);

/// FedAvg: every participant trains the whole model locally on the task loss.
RoundReport fedavg_baseline_round(GlobalModelState& state, std::span<const int> participants, Simulator& simulator,
                                  const RoundContext& ctx);

/// Fraction of rows whose argmax prediction equals the label.
double accuracy(const BlockStack& model, const Dataset& data);

}  // namespace dtfl
