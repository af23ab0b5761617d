#include "corelw/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "corelw/error.hpp"
#include "corelw/parallel.hpp"

namespace corelw {

int round_score(double raw_mean, int num_levels) {
  int rounded = static_cast<int>(std::llround(raw_mean));  // half away from zero
  return std::clamp(rounded, 1, num_levels);
}

namespace {

DocDistribution encode_for_inference(const EncoderParams& params, const EmbeddedDoc& doc) {
  EncoderOutput out = encode(params, doc.matrix, doc.id);
  if (params.bn) batch_norm_apply_running(*params.bn, out.points);
  return make_distribution(out);
}

}  // namespace

KnnModel build_knn(const std::vector<const Document*>& train, const EmbeddingTable& table,
                   const SifWeights& sif, const EncoderParams& params, int k,
                   int num_levels, const SinkhornSettings& sinkhorn_settings) {
  if (k < 1) throw ConfigError("K must be >= 1");
  if (static_cast<std::size_t>(k) > train.size()) {
    throw ConfigError("K = " + std::to_string(k) + " exceeds the training set size " +
                      std::to_string(train.size()));
  }
  KnnModel model;
  model.params = params;
  model.k = k;
  model.num_levels = num_levels;
  model.sinkhorn_settings = sinkhorn_settings;
  model.train_dists.resize(train.size());
  model.train_scores.resize(train.size());
  model.train_ids.resize(train.size());
  parallel_for(train.size(), [&](std::size_t i) {
    const EmbeddedDoc emb = embed_document(*train[i], table, sif);
    model.train_dists[i] = encode_for_inference(model.params, emb);
    model.train_scores[i] = train[i]->score;
    model.train_ids[i] = train[i]->id;
  });
  return model;
}

Prediction knn_predict(const KnnModel& model, const Document& doc,
                       const EmbeddingTable& table, const SifWeights& sif) {
  const EmbeddedDoc emb = embed_document(doc, table, sif);
  const DocDistribution mu = encode_for_inference(model.params, emb);

  std::vector<double> distances(model.train_dists.size());
  parallel_for(model.train_dists.size(), [&](std::size_t i) {
    distances[i] = wasserstein_distance(mu, model.train_dists[i],
                                        model.sinkhorn_settings);
  });

  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return model.train_ids[a] < model.train_ids[b];
  });

  Prediction pred;
  pred.doc_id = doc.id;
  double score_sum = 0.0;
  for (int j = 0; j < model.k; ++j) {
    const std::size_t i = order[static_cast<std::size_t>(j)];
    pred.neighbors.push_back({model.train_ids[i], distances[i]});
    score_sum += model.train_scores[i];
  }
  pred.raw_mean = score_sum / static_cast<double>(model.k);
  pred.predicted_score = round_score(pred.raw_mean, model.num_levels);
  return pred;
}

namespace {

Eigen::VectorXd mean_pooled(const EncoderParams& params, const EmbeddedDoc& doc) {
  const EncoderOutput out = encode(params, doc.matrix, doc.id);
  return out.points.rowwise().mean();
}

void fit_ols(const std::vector<Eigen::VectorXd>& pooled, const std::vector<double>& targets,
             BaselineModel& model, std::vector<std::string>* warnings) {
  const Eigen::Index n = static_cast<Eigen::Index>(pooled.size());
  const Eigen::Index d = pooled.front().size();
  Eigen::MatrixXd design(n, d + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.row(i).head(d) = pooled[static_cast<std::size_t>(i)].transpose();
    design(i, d) = 1.0;
    y[i] = targets[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd coef;
  if (qr.rank() == d + 1) {
    coef = qr.solve(y);
  } else {
    if (warnings != nullptr) {
      warnings->push_back("baseline: singular normal equations (rank " +
                          std::to_string(qr.rank()) + " of " + std::to_string(d + 1) +
                          "), using ridge fallback lambda=1e-6");
    }
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += 1e-6;
    coef = gram.ldlt().solve(design.transpose() * y);
  }
  model.w = coef.head(d);
  model.bias = coef[d];
}

// Joint Adam training of encoder and linear head under mean squared error,
// full-batch.
void fit_trained_head(const std::vector<EmbeddedDoc>& embedded,
                      const std::vector<double>& targets, BaselineModel& model,
                      const TrainConfig& cfg) {
  const std::size_t n = embedded.size();
  const Eigen::Index d = model.params.d_out();
  model.w = Eigen::VectorXd::Zero(d);
  model.bias = 0.0;

  AdamState enc_state = make_adam_state(model.params);
  Eigen::ArrayXd mw = Eigen::ArrayXd::Zero(d), vw = Eigen::ArrayXd::Zero(d);
  double mb = 0.0, vb = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EncoderParams grads = zeros_like(model.params);
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(d);
    double db = 0.0;

    struct DocWork {
      Eigen::VectorXd pooled;
      double residual = 0.0;
    };
    std::vector<DocWork> work(n);
    parallel_for(n, [&](std::size_t i) {
      work[i].pooled = mean_pooled(model.params, embedded[i]);
      work[i].residual = model.w.dot(work[i].pooled) + model.bias - targets[i];
    });

    std::vector<EncoderParams> block_grads(kReductionBlocks);
    std::vector<bool> block_used(kReductionBlocks, false);
    parallel_blocks(n, [&](std::size_t block, std::size_t lo, std::size_t hi) {
      block_grads[block] = zeros_like(model.params);
      block_used[block] = true;
      for (std::size_t i = lo; i < hi; ++i) {
        const double dpred = 2.0 * work[i].residual / static_cast<double>(n);
        const Eigen::Index len = embedded[i].matrix.cols();
        EncodeTrace trace;
        (void)encode(model.params, embedded[i].matrix, embedded[i].id, &trace);
        // d pooled / d h_t = 1/N
        const Eigen::MatrixXd upstream =
            (dpred / static_cast<double>(len)) * model.w * Eigen::RowVectorXd::Ones(len);
        encode_backward(model.params, embedded[i].matrix, trace, upstream,
                        block_grads[block]);
      }
    });
    auto grad_views = tensor_views(grads);
    for (std::size_t blk = 0; blk < kReductionBlocks; ++blk) {
      if (!block_used[blk]) continue;
      auto part = tensor_views(block_grads[blk]);
      for (std::size_t k = 0; k < grad_views.size(); ++k) {
        Eigen::Map<Eigen::ArrayXd> dst(grad_views[k].data,
                                       static_cast<Eigen::Index>(grad_views[k].size));
        Eigen::Map<const Eigen::ArrayXd> src(part[k].data,
                                             static_cast<Eigen::Index>(part[k].size));
        dst += src;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double dpred = 2.0 * work[i].residual / static_cast<double>(n);
      dw += dpred * work[i].pooled;
      db += dpred;
    }

    auto param_views = tensor_views(model.params);
    adam_step(param_views, grad_views, enc_state, cfg.learning_rate, cfg.adam_beta1,
              cfg.adam_beta2, cfg.adam_eps);
    // Head update, same rule.
    const long t = enc_state.t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    mw = cfg.adam_beta1 * mw + (1.0 - cfg.adam_beta1) * dw.array();
    vw = cfg.adam_beta2 * vw + (1.0 - cfg.adam_beta2) * dw.array().square();
    model.w.array() -= cfg.learning_rate * (mw / bc1) / ((vw / bc2).sqrt() + cfg.adam_eps);
    mb = cfg.adam_beta1 * mb + (1.0 - cfg.adam_beta1) * db;
    vb = cfg.adam_beta2 * vb + (1.0 - cfg.adam_beta2) * db * db;
    model.bias -= cfg.learning_rate * (mb / bc1) / (std::sqrt(vb / bc2) + cfg.adam_eps);
  }
}

}  // namespace

BaselineModel fit_baseline(const std::vector<const Document*>& train, int num_levels,
                           const EmbeddingTable& table, const SifWeights& sif,
                           const EncoderConfig& encoder_config, bool train_head,
                           const TrainConfig& head_cfg,
                           std::vector<std::string>* warnings) {
  if (train.empty()) throw ConfigError("baseline: empty training set");
  BaselineModel model;
  EncoderConfig cfg = encoder_config;
  cfg.batch_norm = false;  // the pooled baseline uses raw hidden states
  model.params = init_encoder(cfg);
  model.num_levels = num_levels;

  std::vector<EmbeddedDoc> embedded;
  embedded.reserve(train.size());
  std::vector<double> targets;
  targets.reserve(train.size());
  for (const Document* doc : train) {
    embedded.push_back(embed_document(*doc, table, sif));
    targets.push_back(static_cast<double>(doc->score));
  }

  if (train_head) {
    model.w = Eigen::VectorXd::Zero(model.params.d_out());
    fit_trained_head(embedded, targets, model, head_cfg);
  } else {
    std::vector<Eigen::VectorXd> pooled(embedded.size());
    parallel_for(embedded.size(), [&](std::size_t i) {
      pooled[i] = mean_pooled(model.params, embedded[i]);
    });
    fit_ols(pooled, targets, model, warnings);
  }
  return model;
}

Prediction baseline_predict(const BaselineModel& model, const Document& doc,
                            const EmbeddingTable& table, const SifWeights& sif) {
  const EmbeddedDoc emb = embed_document(doc, table, sif);
  const Eigen::VectorXd pooled = mean_pooled(model.params, emb);
  Prediction pred;
  pred.doc_id = doc.id;
  pred.raw_mean = model.w.dot(pooled) + model.bias;
  pred.predicted_score = round_score(pred.raw_mean, model.num_levels);
  return pred;
}

}  // namespace corelw
