#include "dtfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "dtfl/errors.hpp"
#include "dtfl/layers.hpp"

namespace dtfl {

std::vector<Batch> make_batches(const Dataset& data, std::span<const std::size_t> indices, std::size_t batch_size,
                                Rng* shuffle) {
  if (batch_size == 0) throw InputError("batch size must be positive");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  if (shuffle) std::shuffle(order.begin(), order.end(), *shuffle);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::span<const std::size_t> rows(order.data() + start, end - start);
    Batch b;
    b.x = gather_rows(data.features, rows);
    for (std::size_t i : rows) b.y.push_back(data.labels[i]);
    out.push_back(std::move(b));
  }
  return out;
}

std::size_t batches_per_round(std::size_t samples, std::size_t batch_size, int epochs) {
  if (batch_size == 0 || epochs < 1) throw InputError("batch size and epochs must be positive");
  return (samples + batch_size - 1) / batch_size * static_cast<std::size_t>(epochs);
}

namespace {

void add_into(Tensor& acc, const Tensor& t) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += t[i];
}

// out[j] = p0[j] + sum_k w_k (pk[j] - p0[j]) for aligned parameter lists.
void weighted_average(const std::vector<std::vector<const Tensor*>>& lists, std::span<const double> weights,
                      std::vector<Tensor*>& out) {
  const auto& first = lists.front();
  for (const auto& l : lists)
    if (l.size() != first.size()) throw ProtocolError("aggregate: models have different parameter counts");
  if (out.size() != first.size()) throw ProtocolError("aggregate: output layout mismatch");
  for (std::size_t j = 0; j < first.size(); ++j) {
    for (const auto& l : lists)
      if (!l[j]->same_shape(*first[j])) throw ProtocolError("aggregate: block shapes differ between models");
    Tensor& dst = *out[j];
    const Tensor& base = *first[j];
    for (std::size_t e = 0; e < base.size(); ++e) {
      double delta = 0.0;
      for (std::size_t k = 1; k < lists.size(); ++k) delta += weights[k] * ((*lists[k][j])[e] - base[e]);
      dst[e] = base[e] + delta;
    }
  }
}

}  // namespace

ClientUpdateResult client_update(int client_id, TierSplit split, std::span<const Batch> batches,
                                 const LocalTraining& training) {
  if (training.epochs < 1) throw InputError("client_update: epochs must be >= 1");
  const double alpha = training.privacy_alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("client_update: privacy alpha must lie in [0, 1]");

  ClientUpdateResult res;
  res.client_id = client_id;
  res.tier = split.tier;
  if (batches.empty()) {
    res.skipped = true;
    res.client_blocks = std::move(split.client_blocks);
    res.aux_head = std::move(split.aux_head);
    return res;
  }

  Optimizer opt(training.optim);
  Rng shuffle_rng(training.noise_seed);
  double loss_sum = 0.0;
  for (int epoch = 0; epoch < training.epochs; ++epoch) {
    for (const Batch& b : batches) {
      ClientCache cc;
      Tensor z = forward_client(split, b.x, &cc);
      res.z.push_back(training.patch_shuffle ? patch_shuffle(z, training.patch_size, shuffle_rng) : z);
      res.labels.push_back(b.y);

      DenseCache ac;
      Tensor logits = forward_aux(split, z, &ac);
      LossAndGrad task = softmax_xent(logits, b.y);
      const bool use_dcor = alpha > 0.0 && b.x.rows() >= 2;
      double loss = task.loss;
      if (use_dcor) {
        for (double& g : task.grad.data()) g *= (1.0 - alpha);
        loss = private_client_loss(task.loss, b.x, z, alpha);
      }
      DenseGrads aux = dense_backward(split.aux_head, ac, task.grad);
      Tensor grad_z = std::move(aux.input);
      if (use_dcor) add_into(grad_z, dcor_backward(b.x, z, alpha));

      std::vector<Tensor> grads = backward_client(split, cc, grad_z);
      grads.push_back(std::move(aux.weights));
      grads.push_back(std::move(aux.bias));
      std::vector<Tensor*> params = split.client_parameters();
      for (Tensor* p : split.aux_parameters()) params.push_back(p);
      std::vector<const Tensor*> grad_ptrs;
      for (const auto& g : grads) grad_ptrs.push_back(&g);
      opt.step(params, grad_ptrs);

      loss_sum += loss;
      ++res.batches;
    }
  }
  res.loss = loss_sum / static_cast<double>(res.batches);
  res.client_blocks = std::move(split.client_blocks);
  res.aux_head = std::move(split.aux_head);
  return res;
}

double server_update(TierSplit& split, std::span<const Tensor> z, std::span<const std::vector<int>> labels,
                     const OptimConfig& optim) {
  if (z.size() != labels.size()) throw DimensionError("server_update: one label set per uploaded batch");
  Optimizer opt(optim);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    ServerCache sc;
    Tensor logits = forward_server(split, z[i], &sc);
    LossAndGrad l = softmax_xent(logits, labels[i]);
    std::vector<Tensor> grads = backward_server(split, sc, l.grad);
    std::vector<const Tensor*> grad_ptrs;
    for (const auto& g : grads) grad_ptrs.push_back(&g);
    opt.step(split.server_parameters(), grad_ptrs);
    loss_sum += l.loss;
  }
  return z.empty() ? 0.0 : loss_sum / static_cast<double>(z.size());
}

std::vector<double> aggregation_weights(std::span<const double> sample_counts, AggregationPolicy policy) {
  if (sample_counts.empty()) throw ProtocolError("aggregate: no models");
  std::vector<double> w(sample_counts.size());
  if (policy == AggregationPolicy::Uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  const double total = std::accumulate(sample_counts.begin(), sample_counts.end(), 0.0);
  if (!(total > 0.0)) throw ProtocolError("aggregate: data-weighted policy needs positive sample counts");
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (sample_counts[k] < 0.0) throw ProtocolError("aggregate: negative sample count");
    w[k] = sample_counts[k] / total;
  }
  return w;
}

BlockStack aggregate(std::span<const BlockStack> models, std::span<const double> sample_counts,
                     AggregationPolicy policy) {
  if (models.size() != sample_counts.size()) throw ProtocolError("aggregate: one sample count per model");
  const std::vector<double> w = aggregation_weights(sample_counts, policy);
  for (const auto& m : models)
    if (m.block_count() != models.front().block_count())
      throw ProtocolError("aggregate: model is missing blocks");
  std::vector<std::vector<const Tensor*>> lists;
  for (const auto& m : models) lists.push_back(m.parameters());
  BlockStack out = models.front();
  std::vector<Tensor*> dst = out.parameters();
  weighted_average(lists, w, dst);
  return out;
}

DenseLayer aggregate(std::span<const DenseLayer> layers, std::span<const double> sample_counts,
                     AggregationPolicy policy) {
  if (layers.size() != sample_counts.size()) throw ProtocolError("aggregate: one sample count per layer");
  const std::vector<double> w = aggregation_weights(sample_counts, policy);
  std::vector<std::vector<const Tensor*>> lists;
  for (const auto& l : layers) lists.push_back({&l.weights, &l.bias});
  DenseLayer out = layers.front();
  std::vector<Tensor*> dst{&out.weights, &out.bias};
  weighted_average(lists, w, dst);
  return out;
}

double accuracy(const BlockStack& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  constexpr std::size_t chunk = 1024;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const std::vector<int> pred = argmax_rows(model.forward(gather_rows(data.features, rows)));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[start + i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

struct ClientOutcome {
  ClientUpdateResult client;
  BlockStack assembled;
  std::exception_ptr error;
};

std::map<int, std::size_t> round_batches(const std::map<int, int>& assignment, const RoundContext& ctx) {
  std::map<int, std::size_t> out;
  for (const auto& [id, tier] : assignment) {
    if (id < 0 || static_cast<std::size_t>(id) >= ctx.partition->client_count())
      throw InputError("unknown client " + std::to_string(id));
    out[id] = batches_per_round(ctx.partition->clients[static_cast<std::size_t>(id)].size(), ctx.batch_size, ctx.epochs);
  }
  return out;
}

std::vector<Batch> client_batches(const RoundContext& ctx, int round, int id) {
  Rng rng = make_rng(ctx.seed, {0xba7, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(id)});
  return make_batches(*ctx.train, ctx.partition->clients[static_cast<std::size_t>(id)], ctx.batch_size, &rng);
}

template <typename Work>
void for_each_client(std::size_t count, int jobs, Work&& work, std::vector<std::exception_ptr>& errors) {
  errors.assign(count, nullptr);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      work(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void evaluate(const GlobalModelState& state, const RoundContext& ctx, RoundReport& report) {
  report.trained = true;
  report.train_accuracy = accuracy(state.model.global(), *ctx.train);
  report.test_accuracy = ctx.test && ctx.test->size() > 0 ? accuracy(state.model.global(), *ctx.test) : 0.0;
}

}  // namespace

RoundReport run_round(GlobalModelState& state, const std::map<int, int>& assignment, Simulator& simulator,
                      const RoundContext& ctx) {
  if (assignment.empty()) throw InputError("empty round");
  for (const auto& [id, tier] : assignment) state.model.layout().cut(tier);
  const std::map<int, std::size_t> batches = round_batches(assignment, ctx);
  RoundReport report = simulator.advance_round(assignment, batches, *ctx.profile);
  report.round = state.round;

  if (ctx.train_model) {
    std::map<int, TierSplit> base;
    for (const auto& [id, tier] : assignment)
      if (!base.contains(tier)) base.emplace(tier, state.model.split(tier));

    std::vector<std::pair<int, int>> work(assignment.begin(), assignment.end());
    std::vector<ClientOutcome> outcomes(work.size());
    std::vector<std::exception_ptr> errors;
    for_each_client(
        work.size(), ctx.jobs,
        [&](std::size_t i) {
          const auto [id, tier] = work[i];
          const std::vector<Batch> data = client_batches(ctx, state.round, id);
          LocalTraining lt;
          lt.optim = ctx.optim;
          lt.epochs = ctx.epochs;
          lt.privacy_alpha = ctx.privacy.alpha_for(id);
          lt.patch_shuffle = ctx.privacy.patch_shuffle;
          lt.patch_size = ctx.privacy.patch_size;
          lt.noise_seed = derive_seed(ctx.seed, {0x9a7c, static_cast<std::uint64_t>(state.round),
                                                 static_cast<std::uint64_t>(id)});
          const TierSplit& split = base.at(tier);
          ClientOutcome& out = outcomes[i];
          out.client = client_update(id, split, data, lt);
          if (out.client.skipped) return;
          TierSplit server = split;
          server_update(server, out.client.z, out.client.labels, ctx.optim);
          server.client_blocks = out.client.client_blocks;
          out.assembled = merge(server);
          out.client.z.clear();
          out.client.labels.clear();
        },
        errors);

    std::vector<BlockStack> models;
    std::vector<double> counts;
    std::map<int, std::vector<DenseLayer>> tier_heads;
    std::map<int, std::vector<double>> tier_counts;
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (auto& o : outcomes) {
      const auto& c = o.client;
      if (c.skipped) {
        report.events.push_back("client " + std::to_string(c.client_id) + " skipped: empty partition");
        continue;
      }
      const double n = static_cast<double>(ctx.partition->clients[static_cast<std::size_t>(c.client_id)].size());
      models.push_back(std::move(o.assembled));
      counts.push_back(n);
      tier_heads[c.tier].push_back(c.aux_head);
      tier_counts[c.tier].push_back(n);
      loss_sum += c.loss * static_cast<double>(c.batches);
      loss_batches += c.batches;
    }
    if (!models.empty()) {
      state.model.global() = aggregate(models, counts, ctx.policy);
      for (auto& [tier, heads] : tier_heads)
        state.model.set_aux_head(tier, aggregate(heads, tier_counts[tier], ctx.policy));
    }
    report.train_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    evaluate(state, ctx, report);
  }
  ++state.round;
  return report;
}

RoundReport fedavg_baseline_round(GlobalModelState& state, std::span<const int> participants, Simulator& simulator,
                                  const RoundContext& ctx) {
  if (participants.empty()) throw InputError("empty round");
  std::map<int, int> ids;
  for (int id : participants) ids[id] = 0;
  const std::map<int, std::size_t> batches = round_batches(ids, ctx);
  RoundReport report = simulator.advance_fedavg_round(batches, *ctx.profile);
  report.round = state.round;

  if (ctx.train_model) {
    std::vector<int> work;
    for (const auto& [id, unused] : ids) work.push_back(id);
    std::vector<BlockStack> models(work.size());
    std::vector<double> losses(work.size(), 0.0);
    std::vector<std::size_t> steps(work.size(), 0);
    std::vector<std::exception_ptr> errors;
    const BlockStack& global = state.model.global();
    for_each_client(
        work.size(), ctx.jobs,
        [&](std::size_t i) {
          const std::vector<Batch> data = client_batches(ctx, state.round, work[i]);
          BlockStack local = global;
          Optimizer opt(ctx.optim);
          for (int e = 0; e < ctx.epochs; ++e) {
            for (const Batch& b : data) {
              const std::size_t nb = local.block_count();
              std::vector<BlockCache> caches(nb);
              Tensor h = b.x;
              for (std::size_t k = 0; k < nb; ++k) h = block_forward(local.blocks()[k], h, &caches[k]);
              DenseCache hc;
              Tensor logits = dense_forward(local.classifier(), h, &hc);
              LossAndGrad l = softmax_xent(logits, b.y);
              DenseGrads head = dense_backward(local.classifier(), hc, l.grad);
              std::vector<std::vector<Tensor>> per_block(nb);
              Tensor g = std::move(head.input);
              for (std::size_t k = nb; k-- > 0;) g = block_backward(local.blocks()[k], caches[k], g, per_block[k]);
              std::vector<const Tensor*> grads;
              for (const auto& pb : per_block)
                for (const auto& t : pb) grads.push_back(&t);
              grads.push_back(&head.weights);
              grads.push_back(&head.bias);
              opt.step(local.parameters(), grads);
              losses[i] += l.loss;
              ++steps[i];
            }
          }
          models[i] = std::move(local);
        },
        errors);

    std::vector<BlockStack> kept;
    std::vector<double> counts;
    double loss_sum = 0.0;
    std::size_t loss_steps = 0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (steps[i] == 0) {
        report.events.push_back("client " + std::to_string(work[i]) + " skipped: empty partition");
        continue;
      }
      kept.push_back(std::move(models[i]));
      counts.push_back(static_cast<double>(ctx.partition->clients[static_cast<std::size_t>(work[i])].size()));
      loss_sum += losses[i];
      loss_steps += steps[i];
    }
    if (!kept.empty()) state.model.global() = aggregate(kept, counts, ctx.policy);
    report.train_loss = loss_steps ? loss_sum / static_cast<double>(loss_steps) : 0.0;
    evaluate(state, ctx, report);
  }
  ++state.round;
  return report;
}

}  // namespace dtfl
