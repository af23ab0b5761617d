#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "corelw/embeddings.hpp"
#include "corelw/encoders.hpp"
#include "corelw/ot.hpp"
#include "corelw/rng.hpp"

namespace corelw {

struct Triplet {
  std::string anchor_id;
  std::string positive_id;
  std::string negative_id;
};

struct TrainConfig {
  double margin = 1.0;
  double learning_rate = 0.01;
  int batch_size = 408;
  int epochs = 5;
  int triplets_per_anchor = 8;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool resample_each_epoch = false;
  bool grad_clip = false;
  double grad_clip_norm = 5.0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_active_fraction;  // triplets with loss > 0
  std::size_t triplet_count = 0;
  std::size_t nonconverged_sinkhorn = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Eq.-style negative sampling: the positive is uniform among same-score
// documents; the negative's score class j is drawn with probability
// proportional to |s - s_j| over the populated classes, then a document is
// drawn uniformly within that class. Anchors whose score class is a
// singleton are skipped with a warning.
std::vector<Triplet> sample_triplets(const std::vector<const Document*>& train,
                                     int num_levels, const TrainConfig& cfg, Rng& rng,
                                     std::vector<std::string>* warnings = nullptr);

// max(w_ap - w_an + margin, 0)
double triplet_loss(double w_ap, double w_an, double margin);

struct AdamState {
  std::vector<Eigen::ArrayXd> m, v;
  long t = 0;
};

AdamState make_adam_state(EncoderParams& params);

// Standard bias-corrected Adam update over the trainable tensor views.
void adam_step(std::vector<TensorView>& params, std::vector<TensorView>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

// Loss and gradient of a single triplet without batch normalization; the
// simple reference path used by gradient checks. Gradients are scaled by
// `weight` and accumulated into `grads` when non-null.
struct TripletEval {
  double loss = 0.0;
  double w_ap = 0.0;
  double w_an = 0.0;
  bool active = false;
};
TripletEval eval_triplet(const EncoderParams& params, const EmbeddedDoc& anchor,
                         const EmbeddedDoc& positive, const EmbeddedDoc& negative,
                         double margin, const SinkhornSettings& sinkhorn_settings,
                         EncoderParams* grads = nullptr, double weight = 1.0);

// Full contrastive training loop: per mini-batch, encode every document
// role, batch-normalize when enabled, evaluate both Wasserstein distances
// per triplet, backpropagate through the fixed transport plans and the
// encoder, and apply Adam. Deterministic given cfg.seed, including under
// parallel execution.
std::pair<EncoderParams, TrainReport> train(
    const std::vector<const Document*>& train_docs, int num_levels,
    const EmbeddingTable& table, const SifWeights& sif,
    const EncoderConfig& encoder_config, const TrainConfig& cfg,
    const SinkhornSettings& sinkhorn_settings);

}  // namespace corelw
