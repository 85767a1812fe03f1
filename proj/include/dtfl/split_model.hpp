#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dtfl/layers.hpp"
#include "dtfl/rng.hpp"
#include "dtfl/tensor.hpp"

namespace dtfl {

/// Architecture of the global model: an input width, a list of blocks (each a
/// list of ReLU layer widths) and the class count of the final linear classifier.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t classes = 0;
};

struct Block {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const noexcept { return layers.front().in_dim(); }
  std::size_t out_dim() const noexcept { return layers.back().out_dim(); }
  std::size_t parameter_count() const noexcept;
};

struct BlockCache {
  std::vector<DenseCache> layers;
};

Tensor block_forward(const Block& block, const Tensor& x, BlockCache* cache = nullptr);

/// Backpropagates through one block. Parameter gradients (W, b per layer, in
/// layer order) are appended to `param_grads`; returns the gradient at the input.
Tensor block_backward(const Block& block, const BlockCache& cache, const Tensor& grad_out,
                      std::vector<Tensor>& param_grads);

/// The global model: an ordered block sequence followed by a linear classifier.
class BlockStack {
 public:
  BlockStack() = default;
  BlockStack(std::vector<Block> blocks, DenseLayer classifier);

  static BlockStack create(const ModelSpec& spec, Rng& rng);

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  std::vector<Block>& blocks() noexcept { return blocks_; }
  const DenseLayer& classifier() const noexcept { return classifier_; }
  DenseLayer& classifier() noexcept { return classifier_; }

  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t input_dim() const noexcept { return blocks_.front().in_dim(); }
  std::size_t classes() const noexcept { return classifier_.out_dim(); }
  std::size_t parameter_count() const noexcept;

  /// Output width after the first `count` blocks (count == 0 gives the input width).
  std::size_t width_after(std::size_t count) const;

  Tensor forward(const Tensor& x) const;
  /// Output of the first `count` blocks.
  Tensor features(const Tensor& x, std::size_t count) const;

  /// Every trainable tensor, blocks first (W, b per layer), then the classifier.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  std::vector<Block> blocks_;
  DenseLayer classifier_;
};

/// cut(m) for tiers m = 1..M: the number of leading blocks a tier-m client trains.
class TierLayout {
 public:
  TierLayout() = default;
  /// Throws InputError unless cuts are strictly increasing and within [1, block_count].
  TierLayout(std::vector<std::size_t> cuts, std::size_t block_count);

  /// cut(m) = m for m = 1..tiers.
  static TierLayout uniform(int tiers, std::size_t block_count);

  int tiers() const noexcept { return static_cast<int>(cuts_.size()); }
  std::size_t cut(int tier) const;
  const std::vector<std::size_t>& cuts() const noexcept { return cuts_; }

 private:
  std::vector<std::size_t> cuts_;
};

/// A tier-m view of the model: client blocks plus a local auxiliary head, and
/// the remaining server blocks plus the classifier.
struct TierSplit {
  int tier = 0;
  std::size_t cut = 0;
  std::vector<Block> client_blocks;
  DenseLayer aux_head;
  std::vector<Block> server_blocks;
  DenseLayer classifier;

  std::size_t cut_width() const noexcept { return client_blocks.back().out_dim(); }

  /// Client blocks' tensors (W, b per layer); the aux head is kept separate.
  std::vector<Tensor*> client_parameters();
  std::vector<Tensor*> aux_parameters();
  /// Server blocks' tensors followed by the classifier's.
  std::vector<Tensor*> server_parameters();

  std::size_t client_parameter_count() const noexcept;
};

TierSplit split(const BlockStack& global, const TierLayout& layout, int tier, const DenseLayer& aux_head);

/// Reassembles the trainable path (client blocks, server blocks, classifier).
BlockStack merge(const TierSplit& split);

struct ClientCache {
  std::vector<BlockCache> blocks;
};

struct ServerCache {
  std::vector<BlockCache> blocks;
  DenseCache classifier;
};

Tensor forward_client(const TierSplit& split, const Tensor& x, ClientCache* cache = nullptr);
Tensor forward_aux(const TierSplit& split, const Tensor& z, DenseCache* cache = nullptr);
Tensor forward_server(const TierSplit& split, const Tensor& z, ServerCache* cache = nullptr);

/// Gradients aligned with TierSplit::client_parameters().
std::vector<Tensor> backward_client(const TierSplit& split, const ClientCache& cache, const Tensor& grad_z);

/// Gradients aligned with TierSplit::server_parameters(). Writes the gradient
/// at the cut into `grad_z` when requested (used only for checking; the
/// training protocol never sends it back to the client).
std::vector<Tensor> backward_server(const TierSplit& split, const ServerCache& cache,
                                    const Tensor& grad_logits, Tensor* grad_z = nullptr);

/// The canonical global model plus one persistent auxiliary head per tier.
class TieredModel {
 public:
  TieredModel(BlockStack global, TierLayout layout, std::uint64_t seed);

  const BlockStack& global() const noexcept { return global_; }
  BlockStack& global() noexcept { return global_; }
  const TierLayout& layout() const noexcept { return layout_; }
  int tiers() const noexcept { return layout_.tiers(); }

  /// Initialized from (seed, tier) on first access, then persisted.
  const DenseLayer& aux_head(int tier);
  void set_aux_head(int tier, DenseLayer head);
  bool has_aux_head(int tier) const;

  TierSplit split(int tier);

 private:
  BlockStack global_;
  TierLayout layout_;
  std::uint64_t seed_;
  std::vector<std::optional<DenseLayer>> aux_heads_;
};

}  // namespace dtfl
