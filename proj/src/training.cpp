#include "corelw/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "corelw/error.hpp"
#include "corelw/parallel.hpp"

namespace corelw {

void TrainConfig::validate() const {
  if (margin < 0.0) throw ConfigError("margin must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (triplets_per_anchor < 1) throw ConfigError("triplets_per_anchor must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (grad_clip && !(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be > 0");
}

double triplet_loss(double w_ap, double w_an, double margin) {
  return std::max(w_ap - w_an + margin, 0.0);
}

std::vector<Triplet> sample_triplets(const std::vector<const Document*>& train,
                                     int num_levels, const TrainConfig& cfg, Rng& rng,
                                     std::vector<std::string>* warnings) {
  std::map<int, std::vector<std::size_t>> by_score;
  for (std::size_t i = 0; i < train.size(); ++i) by_score[train[i]->score].push_back(i);
  if (by_score.size() < 2) {
    throw TrainingError("triplet sampling needs at least two distinct score levels");
  }

  std::vector<Triplet> triplets;
  triplets.reserve(train.size() * static_cast<std::size_t>(cfg.triplets_per_anchor));
  std::size_t skipped = 0;
  for (std::size_t a = 0; a < train.size(); ++a) {
    const int s = train[a]->score;
    const auto& same = by_score[s];
    if (same.size() < 2) {
      ++skipped;
      if (warnings != nullptr) {
        warnings->push_back("anchor '" + train[a]->id + "' skipped: score class " +
                            std::to_string(s) + " is a singleton");
      }
      continue;
    }
    // Negative score classes weighted by |s - s_j|, restricted to the
    // populated classes.
    std::vector<std::pair<int, double>> class_weights;
    double total_weight = 0.0;
    for (const auto& [level, members] : by_score) {
      const double w = std::abs(s - level);
      if (w > 0.0 && !members.empty()) {
        class_weights.emplace_back(level, w);
        total_weight += w;
      }
    }
    if (class_weights.empty()) {
      ++skipped;
      if (warnings != nullptr) {
        warnings->push_back("anchor '" + train[a]->id + "' skipped: no negative class");
      }
      continue;
    }
    const std::size_t anchor_pos = static_cast<std::size_t>(
        std::find(same.begin(), same.end(), a) - same.begin());
    for (int t = 0; t < cfg.triplets_per_anchor; ++t) {
      // positive: uniform among same-score documents, excluding the anchor
      std::size_t k = rng.uniform_int(same.size() - 1);
      if (k >= anchor_pos) ++k;
      Triplet triplet;
      triplet.anchor_id = train[a]->id;
      triplet.positive_id = train[same[k]]->id;
      const double r = rng.uniform() * total_weight;
      double cum = 0.0;
      int chosen_level = class_weights.back().first;
      for (const auto& [level, w] : class_weights) {
        cum += w;
        if (r < cum) {
          chosen_level = level;
          break;
        }
      }
      const auto& neg_members = by_score[chosen_level];
      triplet.negative_id = train[neg_members[rng.uniform_int(neg_members.size())]]->id;
      triplets.push_back(std::move(triplet));
    }
  }
  if (triplets.empty()) {
    throw TrainingError("no valid triplets: every anchor was skipped");
  }
  (void)num_levels;
  (void)skipped;
  return triplets;
}

AdamState make_adam_state(EncoderParams& params) {
  AdamState state;
  for (const auto& view : tensor_views(params)) {
    state.m.emplace_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(view.size)));
    state.v.emplace_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(view.size)));
  }
  return state;
}

void adam_step(std::vector<TensorView>& params, std::vector<TensorView>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw InternalError("adam_step: mismatched parameter/gradient/state layout");
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::Map<Eigen::ArrayXd> p(params[k].data, static_cast<Eigen::Index>(params[k].size));
    Eigen::Map<const Eigen::ArrayXd> g(grads[k].data,
                                       static_cast<Eigen::Index>(grads[k].size));
    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g.square();
    p -= lr * (state.m[k] / bc1) / ((state.v[k] / bc2).sqrt() + eps);
  }
}

namespace {

struct PairGrad {
  Eigen::MatrixXd d_anchor;
  Eigen::MatrixXd d_other;
};

// Distance + upstream-scaled envelope gradients for one document pair.
double pair_distance(const DocDistribution& a, const DocDistribution& b,
                     const SinkhornSettings& settings, bool* converged,
                     PairGrad* grad, double upstream_scale) {
  const Eigen::MatrixXd cost = cost_matrix(a, b);
  const TransportResult result = sinkhorn(a, b, settings.config_for(cost));
  if (converged != nullptr) *converged = result.converged;
  if (grad != nullptr) {
    const WassersteinGrads g = wasserstein_grad(result, a, b);
    grad->d_anchor = upstream_scale * g.d_mu;
    grad->d_other = upstream_scale * g.d_nu;
  }
  return result.cost;
}

}  // namespace

TripletEval eval_triplet(const EncoderParams& params, const EmbeddedDoc& anchor,
                         const EmbeddedDoc& positive, const EmbeddedDoc& negative,
                         double margin, const SinkhornSettings& sinkhorn_settings,
                         EncoderParams* grads, double weight) {
  EncodeTrace trace_a, trace_p, trace_n;
  EncoderOutput out_a = encode(params, anchor.matrix, anchor.id, &trace_a);
  EncoderOutput out_p = encode(params, positive.matrix, positive.id, &trace_p);
  EncoderOutput out_n = encode(params, negative.matrix, negative.id, &trace_n);

  const DocDistribution mu_a = make_distribution(out_a);
  const DocDistribution mu_p = make_distribution(out_p);
  const DocDistribution mu_n = make_distribution(out_n);

  TripletEval eval;
  PairGrad grad_ap, grad_an;
  const bool want_grads = grads != nullptr;
  eval.w_ap = pair_distance(mu_a, mu_p, sinkhorn_settings, nullptr,
                            want_grads ? &grad_ap : nullptr, 1.0);
  eval.w_an = pair_distance(mu_a, mu_n, sinkhorn_settings, nullptr,
                            want_grads ? &grad_an : nullptr, -1.0);
  eval.loss = triplet_loss(eval.w_ap, eval.w_an, margin);
  eval.active = eval.loss > 0.0;

  if (want_grads && eval.active) {
    const Eigen::MatrixXd d_anchor = weight * (grad_ap.d_anchor + grad_an.d_anchor);
    const Eigen::MatrixXd d_pos = weight * grad_ap.d_other;
    const Eigen::MatrixXd d_neg = weight * grad_an.d_other;
    encode_backward(params, anchor.matrix, trace_a, d_anchor, *grads);
    encode_backward(params, positive.matrix, trace_p, d_pos, *grads);
    encode_backward(params, negative.matrix, trace_n, d_neg, *grads);
  }
  return eval;
}

namespace {

struct BatchStats {
  double loss_sum = 0.0;
  std::size_t active = 0;
  std::size_t nonconverged = 0;
};

// One mini-batch: forward, batch norm, per-triplet Sinkhorn pair losses,
// reverse pipeline, Adam. Parallel sections write index-addressed slots and
// reductions run in fixed order, so results do not depend on the worker
// count.
BatchStats run_batch(EncoderParams& params, AdamState& adam,
                     const std::vector<EmbeddedDoc>& embedded,
                     const std::unordered_map<std::string, std::size_t>& doc_index,
                     const std::vector<Triplet>& triplets, std::size_t lo, std::size_t hi,
                     const TrainConfig& cfg, const SinkhornSettings& sinkhorn_settings) {
  const std::size_t batch_n = hi - lo;

  // Unique documents of the batch, in first-appearance order.
  std::vector<std::size_t> unique_docs;
  std::unordered_map<std::size_t, std::size_t> slot_of;
  std::vector<double> multiplicity;
  std::vector<std::array<std::size_t, 3>> roles(batch_n);
  for (std::size_t b = 0; b < batch_n; ++b) {
    const Triplet& t = triplets[lo + b];
    const std::array<std::size_t, 3> docs = {doc_index.at(t.anchor_id),
                                             doc_index.at(t.positive_id),
                                             doc_index.at(t.negative_id)};
    for (int r = 0; r < 3; ++r) {
      auto [it, inserted] = slot_of.try_emplace(docs[r], unique_docs.size());
      if (inserted) {
        unique_docs.push_back(docs[r]);
        multiplicity.push_back(0.0);
      }
      multiplicity[it->second] += 1.0;
      roles[b][r] = it->second;
    }
  }
  const std::size_t n_unique = unique_docs.size();

  // Forward pass (traces are recomputed later in the backward pass to keep
  // memory proportional to the raw outputs).
  std::vector<Eigen::MatrixXd> raw(n_unique);
  parallel_for(n_unique, [&](std::size_t u) {
    raw[u] = encode(params, embedded[unique_docs[u]].matrix,
                    embedded[unique_docs[u]].id)
                 .points;
  });

  std::vector<Eigen::MatrixXd> normalized = raw;
  BatchNormTrace bn_trace;
  if (params.bn) {
    std::vector<Eigen::MatrixXd*> ptrs(n_unique);
    for (std::size_t u = 0; u < n_unique; ++u) ptrs[u] = &normalized[u];
    bn_trace = batch_norm_forward(*params.bn, ptrs, multiplicity, true);
  }

  std::vector<DocDistribution> dists(n_unique);
  for (std::size_t u = 0; u < n_unique; ++u) {
    EncoderOutput out;
    out.points = normalized[u];
    out.doc_id = embedded[unique_docs[u]].id;
    dists[u] = make_distribution(out);
  }

  // Per-triplet losses and support-point gradients.
  struct TripletWork {
    double loss = 0.0;
    bool active = false;
    int nonconverged = 0;
    Eigen::MatrixXd d_anchor, d_pos, d_neg;
  };
  std::vector<TripletWork> work(batch_n);
  const double inv_batch = 1.0 / static_cast<double>(batch_n);
  parallel_for(batch_n, [&](std::size_t b) {
    TripletWork& w = work[b];
    bool conv_ap = true, conv_an = true;
    PairGrad grad_ap, grad_an;
    const double w_ap = pair_distance(dists[roles[b][0]], dists[roles[b][1]],
                                      sinkhorn_settings, &conv_ap, &grad_ap, 1.0);
    const double w_an = pair_distance(dists[roles[b][0]], dists[roles[b][2]],
                                      sinkhorn_settings, &conv_an, &grad_an, -1.0);
    w.nonconverged = (conv_ap ? 0 : 1) + (conv_an ? 0 : 1);
    w.loss = triplet_loss(w_ap, w_an, cfg.margin);
    w.active = w.loss > 0.0;
    if (w.active) {
      w.d_anchor = inv_batch * (grad_ap.d_anchor + grad_an.d_anchor);
      w.d_pos = inv_batch * grad_ap.d_other;
      w.d_neg = inv_batch * grad_an.d_other;
    }
  });

  BatchStats stats;
  for (const auto& w : work) {
    if (!std::isfinite(w.loss)) {
      throw TrainingError("non-finite triplet loss in batch starting at triplet " +
                          std::to_string(lo));
    }
    stats.loss_sum += w.loss;
    stats.active += w.active ? 1 : 0;
    stats.nonconverged += static_cast<std::size_t>(w.nonconverged);
  }

  // Accumulate dL/d(normalized points) per unique document, in triplet order.
  std::vector<Eigen::MatrixXd> dpoints(n_unique);
  for (std::size_t u = 0; u < n_unique; ++u) {
    dpoints[u] = Eigen::MatrixXd::Zero(raw[u].rows(), raw[u].cols());
  }
  for (std::size_t b = 0; b < batch_n; ++b) {
    if (!work[b].active) continue;
    dpoints[roles[b][0]] += work[b].d_anchor;
    dpoints[roles[b][1]] += work[b].d_pos;
    dpoints[roles[b][2]] += work[b].d_neg;
  }

  EncoderParams grads = zeros_like(params);
  if (params.bn) {
    std::vector<Eigen::MatrixXd*> raw_ptrs(n_unique);
    for (std::size_t u = 0; u < n_unique; ++u) raw_ptrs[u] = &raw[u];
    Eigen::VectorXd dgamma, dbeta;
    batch_norm_backward(*params.bn, bn_trace, raw_ptrs, multiplicity, dpoints, dgamma,
                        dbeta);
    grads.bn->gamma = dgamma;
    grads.bn->beta = dbeta;
  }

  // Encoder backward over unique documents; per-block gradient partials are
  // reduced in block order.
  std::vector<EncoderParams> block_grads(kReductionBlocks);
  std::vector<bool> block_used(kReductionBlocks, false);
  parallel_blocks(n_unique, [&](std::size_t block, std::size_t ulo, std::size_t uhi) {
    block_grads[block] = zeros_like(params);
    block_used[block] = true;
    for (std::size_t u = ulo; u < uhi; ++u) {
      if (dpoints[u].cwiseAbs().maxCoeff() == 0.0) continue;
      EncodeTrace trace;
      (void)encode(params, embedded[unique_docs[u]].matrix, embedded[unique_docs[u]].id,
                   &trace);
      encode_backward(params, embedded[unique_docs[u]].matrix, trace, dpoints[u],
                      block_grads[block]);
    }
  });
  {
    auto grad_views = tensor_views(grads);
    for (std::size_t blk = 0; blk < kReductionBlocks; ++blk) {
      if (!block_used[blk]) continue;
      auto part_views = tensor_views(block_grads[blk]);
      for (std::size_t k = 0; k < grad_views.size(); ++k) {
        Eigen::Map<Eigen::ArrayXd> dst(grad_views[k].data,
                                       static_cast<Eigen::Index>(grad_views[k].size));
        Eigen::Map<const Eigen::ArrayXd> src(
            part_views[k].data, static_cast<Eigen::Index>(part_views[k].size));
        dst += src;
      }
    }
  }

  if (cfg.grad_clip) {
    double sq = 0.0;
    for (const auto& view : tensor_views(grads)) {
      Eigen::Map<const Eigen::ArrayXd> g(view.data, static_cast<Eigen::Index>(view.size));
      sq += g.square().sum();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip_norm) {
      const double scale = cfg.grad_clip_norm / norm;
      for (auto& view : tensor_views(grads)) {
        Eigen::Map<Eigen::ArrayXd> g(view.data, static_cast<Eigen::Index>(view.size));
        g *= scale;
      }
    }
  }

  auto param_views = tensor_views(params);
  auto grad_views = tensor_views(grads);
  adam_step(param_views, grad_views, adam, cfg.learning_rate, cfg.adam_beta1,
            cfg.adam_beta2, cfg.adam_eps);
  return stats;
}

}  // namespace

std::pair<EncoderParams, TrainReport> train(
    const std::vector<const Document*>& train_docs, int num_levels,
    const EmbeddingTable& table, const SifWeights& sif,
    const EncoderConfig& encoder_config, const TrainConfig& cfg,
    const SinkhornSettings& sinkhorn_settings) {
  cfg.validate();
  encoder_config.validate();

  std::vector<EmbeddedDoc> embedded;
  embedded.reserve(train_docs.size());
  std::unordered_map<std::string, std::size_t> doc_index;
  for (const Document* doc : train_docs) {
    doc_index.emplace(doc->id, embedded.size());
    embedded.push_back(embed_document(*doc, table, sif));
  }

  EncoderParams params = init_encoder(encoder_config);
  AdamState adam = make_adam_state(params);
  TrainReport report;
  report.seed = cfg.seed;

  Rng rng(cfg.seed);
  std::vector<Triplet> triplets =
      sample_triplets(train_docs, num_levels, cfg, rng, &report.warnings);
  report.triplet_count = triplets.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.resample_each_epoch && epoch > 0) {
      triplets = sample_triplets(train_docs, num_levels, cfg, rng, &report.warnings);
    }
    rng.shuffle(triplets);
    double loss_sum = 0.0;
    std::size_t active = 0;
    for (std::size_t lo = 0; lo < triplets.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(triplets.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      const BatchStats stats = run_batch(params, adam, embedded, doc_index, triplets, lo,
                                         hi, cfg, sinkhorn_settings);
      loss_sum += stats.loss_sum;
      active += stats.active;
      report.nonconverged_sinkhorn += stats.nonconverged;
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(triplets.size()));
    report.epoch_active_fraction.push_back(static_cast<double>(active) /
                                           static_cast<double>(triplets.size()));
  }
  return {std::move(params), std::move(report)};
}

}  // namespace corelw
