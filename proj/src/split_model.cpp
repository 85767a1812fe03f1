#include "dtfl/split_model.hpp"

#include <string>

#include "dtfl/errors.hpp"

namespace dtfl {

namespace {

void append_parameters(Block& block, std::vector<Tensor*>& out) {
  for (auto& layer : block.layers) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
}

void append_parameters(const Block& block, std::vector<const Tensor*>& out) {
  for (const auto& layer : block.layers) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
}

std::size_t count_parameters(const std::vector<Block>& blocks) {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.parameter_count();
  return total;
}

}  // namespace

std::size_t Block::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.parameter_count();
  return total;
}

Tensor block_forward(const Block& block, const Tensor& x, BlockCache* cache) {
  if (cache) cache->layers.assign(block.layers.size(), {});
  Tensor h = x;
  for (std::size_t i = 0; i < block.layers.size(); ++i)
    h = dense_forward(block.layers[i], h, cache ? &cache->layers[i] : nullptr);
  return h;
}

Tensor block_backward(const Block& block, const BlockCache& cache, const Tensor& grad_out,
                      std::vector<Tensor>& param_grads) {
  if (cache.layers.size() != block.layers.size()) throw StateError("block_backward: cache does not match block");
  const std::size_t base = param_grads.size();
  param_grads.resize(base + 2 * block.layers.size());
  Tensor g = grad_out;
  for (std::size_t i = block.layers.size(); i-- > 0;) {
    DenseGrads lg = dense_backward(block.layers[i], cache.layers[i], g);
    param_grads[base + 2 * i] = std::move(lg.weights);
    param_grads[base + 2 * i + 1] = std::move(lg.bias);
    g = std::move(lg.input);
  }
  return g;
}

BlockStack::BlockStack(std::vector<Block> blocks, DenseLayer classifier)
    : blocks_(std::move(blocks)), classifier_(std::move(classifier)) {
  if (blocks_.empty()) throw InputError("a block stack needs at least one block");
  std::size_t width = blocks_.front().in_dim();
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (blocks_[b].layers.empty()) throw InputError("block " + std::to_string(b + 1) + " has no layers");
    for (const auto& layer : blocks_[b].layers) {
      if (layer.in_dim() != width) throw DimensionError("block " + std::to_string(b + 1) + " does not chain");
      width = layer.out_dim();
    }
  }
  if (classifier_.in_dim() != width) throw DimensionError("classifier does not chain with the last block");
}

BlockStack BlockStack::create(const ModelSpec& spec, Rng& rng) {
  if (spec.input_dim == 0 || spec.classes < 2 || spec.blocks.empty())
    throw InputError("model spec needs input_dim > 0, classes >= 2 and at least one block");
  std::vector<Block> blocks;
  std::size_t width = spec.input_dim;
  for (const auto& widths : spec.blocks) {
    if (widths.empty()) throw InputError("model spec has an empty block");
    Block block;
    for (std::size_t w : widths) {
      block.layers.push_back(DenseLayer::init(width, w, Activation::ReLU, rng));
      width = w;
    }
    blocks.push_back(std::move(block));
  }
  DenseLayer classifier = DenseLayer::init(width, spec.classes, Activation::Identity, rng);
  return BlockStack(std::move(blocks), std::move(classifier));
}

std::size_t BlockStack::parameter_count() const noexcept {
  return count_parameters(blocks_) + classifier_.parameter_count();
}

std::size_t BlockStack::width_after(std::size_t count) const {
  if (count > blocks_.size()) throw InputError("width_after: block index out of range");
  return count == 0 ? input_dim() : blocks_[count - 1].out_dim();
}

Tensor BlockStack::forward(const Tensor& x) const {
  return dense_forward(classifier_, features(x, blocks_.size()));
}

Tensor BlockStack::features(const Tensor& x, std::size_t count) const {
  if (count > blocks_.size()) throw InputError("features: block count out of range");
  Tensor h = x;
  for (std::size_t b = 0; b < count; ++b) h = block_forward(blocks_[b], h);
  return h;
}

std::vector<Tensor*> BlockStack::parameters() {
  std::vector<Tensor*> out;
  for (auto& b : blocks_) append_parameters(b, out);
  out.push_back(&classifier_.weights);
  out.push_back(&classifier_.bias);
  return out;
}

std::vector<const Tensor*> BlockStack::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& b : blocks_) append_parameters(b, out);
  out.push_back(&classifier_.weights);
  out.push_back(&classifier_.bias);
  return out;
}

TierLayout::TierLayout(std::vector<std::size_t> cuts, std::size_t block_count) : cuts_(std::move(cuts)) {
  if (cuts_.empty()) throw InputError("tier layout needs at least one tier");
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    if (cuts_[i] < 1 || cuts_[i] > block_count)
      throw InputError("tier " + std::to_string(i + 1) + " cut " + std::to_string(cuts_[i]) +
                       " outside [1, " + std::to_string(block_count) + "]");
    if (i > 0 && cuts_[i] <= cuts_[i - 1]) throw InputError("tier cuts must be strictly increasing");
  }
}

TierLayout TierLayout::uniform(int tiers, std::size_t block_count) {
  if (tiers < 1) throw InputError("tier count must be positive");
  std::vector<std::size_t> cuts;
  for (int m = 1; m <= tiers; ++m) cuts.push_back(static_cast<std::size_t>(m));
  return TierLayout(std::move(cuts), block_count);
}

std::size_t TierLayout::cut(int tier) const {
  if (tier < 1 || tier > tiers())
    throw InputError("tier " + std::to_string(tier) + " outside [1, " + std::to_string(tiers()) + "]");
  return cuts_[static_cast<std::size_t>(tier - 1)];
}

std::vector<Tensor*> TierSplit::client_parameters() {
  std::vector<Tensor*> out;
  for (auto& b : client_blocks) append_parameters(b, out);
  return out;
}

std::vector<Tensor*> TierSplit::aux_parameters() { return {&aux_head.weights, &aux_head.bias}; }

std::vector<Tensor*> TierSplit::server_parameters() {
  std::vector<Tensor*> out;
  for (auto& b : server_blocks) append_parameters(b, out);
  out.push_back(&classifier.weights);
  out.push_back(&classifier.bias);
  return out;
}

std::size_t TierSplit::client_parameter_count() const noexcept { return count_parameters(client_blocks); }

TierSplit split(const BlockStack& global, const TierLayout& layout, int tier, const DenseLayer& aux_head) {
  if (layout.tiers() > static_cast<int>(global.block_count()))
    throw InputError("more tiers than blocks");
  const std::size_t cut = layout.cut(tier);
  if (cut > global.block_count()) throw InputError("tier cut beyond the last block");
  TierSplit s;
  s.tier = tier;
  s.cut = cut;
  const auto& blocks = global.blocks();
  s.client_blocks.assign(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(cut));
  s.server_blocks.assign(blocks.begin() + static_cast<std::ptrdiff_t>(cut), blocks.end());
  s.classifier = global.classifier();
  if (aux_head.in_dim() != s.cut_width() || aux_head.out_dim() != global.classes())
    throw DimensionError("aux head does not match the tier cut width");
  s.aux_head = aux_head;
  return s;
}

BlockStack merge(const TierSplit& s) {
  std::vector<Block> blocks = s.client_blocks;
  blocks.insert(blocks.end(), s.server_blocks.begin(), s.server_blocks.end());
  return BlockStack(std::move(blocks), s.classifier);
}

Tensor forward_client(const TierSplit& s, const Tensor& x, ClientCache* cache) {
  if (x.rank() != 2 || x.cols() != s.client_blocks.front().in_dim())
    throw DimensionError("forward_client: input width does not match the first block");
  if (cache) cache->blocks.assign(s.client_blocks.size(), {});
  Tensor h = x;
  for (std::size_t b = 0; b < s.client_blocks.size(); ++b)
    h = block_forward(s.client_blocks[b], h, cache ? &cache->blocks[b] : nullptr);
  return h;
}

Tensor forward_aux(const TierSplit& s, const Tensor& z, DenseCache* cache) {
  if (z.rank() != 2 || z.cols() != s.aux_head.in_dim())
    throw DimensionError("forward_aux: activation width does not match the aux head");
  return dense_forward(s.aux_head, z, cache);
}

Tensor forward_server(const TierSplit& s, const Tensor& z, ServerCache* cache) {
  const std::size_t expected = s.server_blocks.empty() ? s.classifier.in_dim() : s.server_blocks.front().in_dim();
  if (z.rank() != 2 || z.cols() != expected)
    throw DimensionError("forward_server: activation width does not match the server part");
  if (cache) cache->blocks.assign(s.server_blocks.size(), {});
  Tensor h = z;
  for (std::size_t b = 0; b < s.server_blocks.size(); ++b)
    h = block_forward(s.server_blocks[b], h, cache ? &cache->blocks[b] : nullptr);
  return dense_forward(s.classifier, h, cache ? &cache->classifier : nullptr);
}

std::vector<Tensor> backward_client(const TierSplit& s, const ClientCache& cache, const Tensor& grad_z) {
  if (cache.blocks.size() != s.client_blocks.size()) throw StateError("backward_client: missing forward cache");
  std::vector<std::vector<Tensor>> per_block(s.client_blocks.size());
  Tensor g = grad_z;
  for (std::size_t b = s.client_blocks.size(); b-- > 0;)
    g = block_backward(s.client_blocks[b], cache.blocks[b], g, per_block[b]);
  std::vector<Tensor> out;
  for (auto& grads : per_block)
    for (auto& t : grads) out.push_back(std::move(t));
  return out;
}

std::vector<Tensor> backward_server(const TierSplit& s, const ServerCache& cache, const Tensor& grad_logits,
                                    Tensor* grad_z) {
  if (cache.blocks.size() != s.server_blocks.size()) throw StateError("backward_server: missing forward cache");
  DenseGrads head = dense_backward(s.classifier, cache.classifier, grad_logits);
  std::vector<std::vector<Tensor>> per_block(s.server_blocks.size());
  Tensor g = std::move(head.input);
  for (std::size_t b = s.server_blocks.size(); b-- > 0;)
    g = block_backward(s.server_blocks[b], cache.blocks[b], g, per_block[b]);
  std::vector<Tensor> out;
  for (auto& grads : per_block)
    for (auto& t : grads) out.push_back(std::move(t));
  out.push_back(std::move(head.weights));
  out.push_back(std::move(head.bias));
  if (grad_z) *grad_z = std::move(g);
  return out;
}

TieredModel::TieredModel(BlockStack global, TierLayout layout, std::uint64_t seed)
    : global_(std::move(global)), layout_(std::move(layout)), seed_(seed),
      aux_heads_(static_cast<std::size_t>(layout_.tiers())) {
  if (layout_.cut(layout_.tiers()) > global_.block_count()) throw InputError("tier layout exceeds block count");
}

const DenseLayer& TieredModel::aux_head(int tier) {
  const std::size_t cut = layout_.cut(tier);
  auto& slot = aux_heads_[static_cast<std::size_t>(tier - 1)];
  if (!slot) {
    Rng rng = make_rng(seed_, {0xa0c, static_cast<std::uint64_t>(tier)});
    slot = DenseLayer::init(global_.width_after(cut), global_.classes(), Activation::Identity, rng);
  }
  return *slot;
}

void TieredModel::set_aux_head(int tier, DenseLayer head) {
  const std::size_t cut = layout_.cut(tier);
  if (head.in_dim() != global_.width_after(cut) || head.out_dim() != global_.classes())
    throw DimensionError("aux head shape does not match tier " + std::to_string(tier));
  aux_heads_[static_cast<std::size_t>(tier - 1)] = std::move(head);
}

bool TieredModel::has_aux_head(int tier) const {
  layout_.cut(tier);
  return aux_heads_[static_cast<std::size_t>(tier - 1)].has_value();
}

TierSplit TieredModel::split(int tier) { return dtfl::split(global_, layout_, tier, aux_head(tier)); }

}  // namespace dtfl
