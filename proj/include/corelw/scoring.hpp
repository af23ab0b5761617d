#pragma once

#include <string>
#include <vector>

#include "corelw/embeddings.hpp"
#include "corelw/encoders.hpp"
#include "corelw/ot.hpp"
#include "corelw/training.hpp"

namespace corelw {

// Nearest-integer rounding (half away from zero) clamped to [1, M].
int round_score(double raw_mean, int num_levels);

struct Neighbor {
  std::string id;
  double distance = 0.0;
};

struct Prediction {
  std::string doc_id;
  int predicted_score = 0;
  double raw_mean = 0.0;
  std::vector<Neighbor> neighbors;  // ascending distance; empty for baselines
};

struct KnnModel {
  EncoderParams params;
  std::vector<DocDistribution> train_dists;
  std::vector<int> train_scores;
  std::vector<std::string> train_ids;
  int k = 7;
  int num_levels = 0;
  SinkhornSettings sinkhorn_settings;
};

// Encodes and stores every training distribution once (batch-norm running
// statistics applied when enabled).
KnnModel build_knn(const std::vector<const Document*>& train, const EmbeddingTable& table,
                   const SifWeights& sif, const EncoderParams& params, int k,
                   int num_levels, const SinkhornSettings& sinkhorn_settings);

// Wasserstein distance to every training distribution; the K nearest (ties
// on distance broken by training id) vote by score average.
Prediction knn_predict(const KnnModel& model, const Document& doc,
                       const EmbeddingTable& table, const SifWeights& sif);

// Mean-pooled-encoder baseline: one vector per document, a least-squares
// linear score fit on the training set. train_head switches to an
// Adam-trained encoder+head with MSE loss.
struct BaselineModel {
  EncoderParams params;
  Eigen::VectorXd w;
  double bias = 0.0;
  int num_levels = 0;
};

BaselineModel fit_baseline(const std::vector<const Document*>& train, int num_levels,
                           const EmbeddingTable& table, const SifWeights& sif,
                           const EncoderConfig& encoder_config, bool train_head,
                           const TrainConfig& head_cfg,
                           std::vector<std::string>* warnings = nullptr);

Prediction baseline_predict(const BaselineModel& model, const Document& doc,
                            const EmbeddingTable& table, const SifWeights& sif);

}  // namespace corelw
