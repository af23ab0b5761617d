#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "corelw/error.hpp"
#include "corelw/parallel.hpp"
#include "corelw/training.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace corelw;

namespace {

// Corpus fixture with controllable score classes. Tokens are drawn from a
// per-score vocabulary so representations are learnable.
std::vector<Document> make_docs(const std::vector<int>& scores, int tokens_per_doc,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Document d;
    d.id = "doc" + std::to_string(i);
    d.score = scores[i];
    for (int t = 0; t < tokens_per_doc; ++t) {
      d.tokens.push_back("s" + std::to_string(scores[i]) + "w" +
                         std::to_string(rng.uniform_int(6)));
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<const Document*> pointers(const std::vector<Document>& docs) {
  std::vector<const Document*> out;
  for (const auto& d : docs) out.push_back(&d);
  return out;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epochs = 1;
  cfg.triplets_per_anchor = 2;
  cfg.seed = 9;
  return cfg;
}

EncoderConfig tiny_encoder(EncoderKind kind, bool bn = false) {
  EncoderConfig cfg;
  cfg.kind = kind;
  cfg.d_w = 4;
  cfg.d_h = 3;
  cfg.d_c = 3;
  cfg.window = 3;
  cfg.init_seed = 5;
  cfg.batch_norm = bn;
  return cfg;
}

}  // namespace

TEST_CASE("triplet_loss hinge") {
  CHECK(triplet_loss(2.0, 2.0, 0.0) == 0.0);
  CHECK(triplet_loss(1.0, 5.0, 1.0) == 0.0);
  CHECK(triplet_loss(5.0, 1.0, 1.0) == 5.0);
}

TEST_CASE("sample_triplets") {
  TrainConfig cfg = quick_config();

  SUBCASE("102 anchors x 8 triplets = 816") {
    std::vector<int> scores;
    for (int i = 0; i < 102; ++i) scores.push_back(1 + i % 4);
    auto docs = make_docs(scores, 3, 1);
    auto ptrs = pointers(docs);
    cfg.triplets_per_anchor = 8;
    Rng rng(2);
    const auto triplets = sample_triplets(ptrs, 4, cfg, rng);
    CHECK(triplets.size() == 816);
  }

  SUBCASE("triplet invariants hold on random corpora") {
    Rng meta(5);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> scores;
      const int n = 8 + static_cast<int>(meta.uniform_int(20));
      for (int i = 0; i < n; ++i) scores.push_back(1 + static_cast<int>(meta.uniform_int(4)));
      scores[0] = 1;
      scores[1] = 1;
      scores[2] = 2;
      scores[3] = 2;  // guarantee two usable classes
      auto docs = make_docs(scores, 3, trial);
      auto ptrs = pointers(docs);
      std::map<std::string, int> score_of;
      for (const auto& d : docs) score_of[d.id] = d.score;
      Rng rng(trial);
      const auto triplets = sample_triplets(ptrs, 4, cfg, rng);
      for (const auto& t : triplets) {
        CHECK(score_of.at(t.anchor_id) == score_of.at(t.positive_id));
        CHECK(score_of.at(t.anchor_id) != score_of.at(t.negative_id));
        CHECK(t.anchor_id != t.positive_id);
        CHECK(t.anchor_id != t.negative_id);
        CHECK(t.positive_id != t.negative_id);
      }
    }
  }

  SUBCASE("singleton anchor class is skipped with a warning") {
    auto docs = make_docs({1, 2, 2, 3, 3}, 3, 1);
    auto ptrs = pointers(docs);
    Rng rng(3);
    std::vector<std::string> warnings;
    const auto triplets = sample_triplets(ptrs, 3, cfg, rng, &warnings);
    CHECK(triplets.size() == 4 * static_cast<std::size_t>(cfg.triplets_per_anchor));
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("doc0") != std::string::npos);
  }

  SUBCASE("fewer than two score levels is an error") {
    auto docs = make_docs({2, 2, 2}, 3, 1);
    auto ptrs = pointers(docs);
    Rng rng(4);
    CHECK_THROWS_AS(sample_triplets(ptrs, 4, cfg, rng), TrainingError);
  }

  SUBCASE("all anchors skipped is an error") {
    auto docs = make_docs({1, 2}, 3, 1);
    auto ptrs = pointers(docs);
    Rng rng(5);
    CHECK_THROWS_AS(sample_triplets(ptrs, 4, cfg, rng), TrainingError);
  }

  SUBCASE("negative class law for anchor s=2, M=4") {
    // 30 docs per class so every class is populated.
    std::vector<int> scores;
    for (int level = 1; level <= 4; ++level) {
      for (int i = 0; i < 30; ++i) scores.push_back(level);
    }
    auto docs = make_docs(scores, 3, 6);
    auto ptrs = pointers(docs);
    std::map<std::string, int> score_of;
    for (const auto& d : docs) score_of[d.id] = d.score;

    cfg.triplets_per_anchor = 1;
    std::map<int, int> counts;
    int draws = 0;
    Rng rng(7);
    // Prob({1,2,3,4}) = {1/4, 0, 1/4, 2/4} for s=2.
    while (draws < 10000) {
      const auto triplets = sample_triplets(ptrs, 4, cfg, rng);
      for (const auto& t : triplets) {
        if (score_of.at(t.anchor_id) != 2) continue;
        ++counts[score_of.at(t.negative_id)];
        ++draws;
      }
    }
    CHECK(counts[2] == 0);
    const double expected[] = {draws / 4.0, draws / 4.0, draws / 2.0};
    const int observed[] = {counts[1], counts[3], counts[4]};
    double stat = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double diff = observed[k] - expected[k];
      stat += diff * diff / expected[k];
    }
    CHECK(stat < oracles::chi2_crit_99(2));
  }
}

TEST_CASE("adam_step") {
  EncoderConfig cfg = tiny_encoder(EncoderKind::cnn);
  EncoderParams params = init_encoder(cfg);
  EncoderParams start = params;
  AdamState state = make_adam_state(params);

  SUBCASE("zero gradient leaves parameters unchanged") {
    EncoderParams grads = zeros_like(params);
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    adam_step(pv, gv, state, 0.01, 0.9, 0.999, 1e-8);
    const auto sv = tensor_views(start);
    for (std::size_t k = 0; k < pv.size(); ++k) {
      for (std::size_t i = 0; i < pv[k].size; ++i) CHECK(pv[k].data[i] == sv[k].data[i]);
    }
    CHECK(state.t == 1);
  }

  SUBCASE("single step from zero state matches the closed form") {
    EncoderParams grads = zeros_like(params);
    grads.cnn->S(0, 0) = 0.4;
    grads.cnn->g(1) = -2.5;
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    const double lr = 0.01, eps = 1e-8;
    adam_step(pv, gv, state, lr, 0.9, 0.999, eps);
    // mhat = g, vhat = g^2 -> delta = -lr * g / (|g| + eps)
    const double expected_s = start.cnn->S(0, 0) - lr * 0.4 / (0.4 + eps);
    const double expected_g = start.cnn->g(1) - lr * (-2.5) / (2.5 + eps);
    CHECK(params.cnn->S(0, 0) == doctest::Approx(expected_s).epsilon(1e-12));
    CHECK(params.cnn->g(1) == doctest::Approx(expected_g).epsilon(1e-12));
  }

  SUBCASE("constant gradient approaches lr-sized signed steps") {
    EncoderParams grads = zeros_like(params);
    grads.cnn->S(0, 0) = 0.7;
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    double prev = params.cnn->S(0, 0);
    double step = 0.0;
    for (int t = 0; t < 2000; ++t) {
      adam_step(pv, gv, state, 0.01, 0.9, 0.999, 1e-8);
      step = prev - params.cnn->S(0, 0);
      prev = params.cnn->S(0, 0);
    }
    CHECK(step == doctest::Approx(0.01).epsilon(0.05));
  }
}

namespace {

struct TripletFixture {
  std::vector<Document> docs;
  EmbeddingTable table{4, 99};
  SifWeights sif;
  std::vector<EmbeddedDoc> embedded;

  explicit TripletFixture(std::uint64_t seed) {
    docs = make_docs({1, 1, 3}, 3, seed);
    for (const auto& d : docs) embedded.push_back(embed_document(d, table, sif));
  }
};

}  // namespace

TEST_CASE("eval_triplet") {
  SinkhornSettings sink;
  sink.epsilon_abs = 0.05;
  sink.tolerance = 1e-10;
  sink.max_iters = 50000;

  SUBCASE("identical documents with zero margin give zero loss and gradients") {
    TripletFixture fx(1);
    EncoderParams params = init_encoder(tiny_encoder(EncoderKind::cnn));
    EncoderParams grads = zeros_like(params);
    const TripletEval eval =
        eval_triplet(params, fx.embedded[0], fx.embedded[0], fx.embedded[0], 0.0, sink,
                     &grads);
    CHECK(eval.loss == 0.0);
    CHECK_FALSE(eval.active);
    for (const auto& view : tensor_views(grads)) {
      Eigen::Map<const Eigen::ArrayXd> g(view.data, static_cast<Eigen::Index>(view.size));
      CHECK(g.abs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("one adam step on an active triplet decreases the loss") {
    TripletFixture fx(2);
    EncoderParams params = init_encoder(tiny_encoder(EncoderKind::lstm));
    EncoderParams grads = zeros_like(params);
    const double margin = 5.0;  // force the hinge active
    const TripletEval before =
        eval_triplet(params, fx.embedded[0], fx.embedded[1], fx.embedded[2], margin, sink,
                     &grads);
    REQUIRE(before.active);
    AdamState state = make_adam_state(params);
    auto pv = tensor_views(params);
    auto gv = tensor_views(grads);
    adam_step(pv, gv, state, 0.01, 0.9, 0.999, 1e-8);
    const TripletEval after =
        eval_triplet(params, fx.embedded[0], fx.embedded[1], fx.embedded[2], margin, sink);
    CHECK(after.loss < before.loss);
  }

  SUBCASE("end-to-end gradient matches finite differences while the hinge is active") {
    int checked = 0;
    for (EncoderKind kind : {EncoderKind::cnn, EncoderKind::lstm, EncoderKind::bilstm}) {
      Rng rng(300 + static_cast<int>(kind));
      for (int trial = 0; trial < 8; ++trial) {
        TripletFixture fx(1000 + trial);
        EncoderConfig cfg = tiny_encoder(kind);
        cfg.init_seed = rng.next_u64();
        EncoderParams params = init_encoder(cfg);
        const double margin = 5.0;
        const TripletEval probe = eval_triplet(params, fx.embedded[0], fx.embedded[1],
                                               fx.embedded[2], margin, sink);
        if (!probe.active || probe.loss < margin * 0.5) continue;  // stay off the kink
        const auto loss = [&]() {
          return eval_triplet(params, fx.embedded[0], fx.embedded[1], fx.embedded[2],
                              margin, sink)
              .loss;
        };
        const auto grad_fn = [&](EncoderParams& grads) {
          (void)eval_triplet(params, fx.embedded[0], fx.embedded[1], fx.embedded[2],
                             margin, sink, &grads);
        };
        const double err = gradcheck::directional_error(params, loss, grad_fn, rng);
        CAPTURE(static_cast<int>(kind));
        CAPTURE(trial);
        CHECK(err < 1e-3);
        ++checked;
      }
    }
    CHECK(checked >= 12);
  }
}

TEST_CASE("train loop") {
  std::vector<int> scores;
  for (int i = 0; i < 16; ++i) scores.push_back(1 + i % 2 * 2);  // levels 1 and 3
  auto docs = make_docs(scores, 4, 11);
  auto ptrs = pointers(docs);
  EmbeddingTable table(4, 99);
  SifWeights sif;
  SinkhornSettings sink;
  sink.max_iters = 2000;

  SUBCASE("report shape and determinism") {
    TrainConfig cfg = quick_config();
    cfg.epochs = 2;
    auto [params1, report1] = train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::cnn, true),
                                    cfg, sink);
    CHECK(report1.epoch_mean_loss.size() == 2);
    CHECK(report1.epoch_active_fraction.size() == 2);
    CHECK(report1.triplet_count == 32);
    for (double loss : report1.epoch_mean_loss) {
      CHECK(std::isfinite(loss));
      CHECK(loss >= 0.0);
    }

    auto [params2, report2] = train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::cnn, true),
                                    cfg, sink);
    CHECK(report1.epoch_mean_loss == report2.epoch_mean_loss);
    const auto v1 = tensor_views(params1);
    const auto v2 = tensor_views(params2);
    for (std::size_t k = 0; k < v1.size(); ++k) {
      for (std::size_t i = 0; i < v1[k].size; ++i) {
        CHECK(v1[k].data[i] == v2[k].data[i]);
      }
    }
  }

  SUBCASE("results do not depend on the worker count") {
    TrainConfig cfg = quick_config();
    set_thread_count(1);
    auto [params1, report1] =
        train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::lstm, true), cfg, sink);
    set_thread_count(4);
    auto [params2, report2] =
        train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::lstm, true), cfg, sink);
    set_thread_count(0);
    CHECK(report1.epoch_mean_loss == report2.epoch_mean_loss);
    const auto v1 = tensor_views(params1);
    const auto v2 = tensor_views(params2);
    for (std::size_t k = 0; k < v1.size(); ++k) {
      for (std::size_t i = 0; i < v1[k].size; ++i) {
        CHECK(v1[k].data[i] == v2[k].data[i]);
      }
    }
  }

  SUBCASE("epoch loss equals the mean of standalone triplet losses when lr ~ 0") {
    TrainConfig cfg = quick_config();
    cfg.learning_rate = 1e-300;  // isolates the forward pass
    cfg.epochs = 1;
    const EncoderConfig enc = tiny_encoder(EncoderKind::cnn, false);
    auto [params, report] = train(ptrs, 3, table, sif, enc, cfg, sink);

    // Reconstruct the same triplets and evaluate them with the simple path.
    Rng rng(cfg.seed);
    auto triplets = sample_triplets(ptrs, 3, cfg, rng);
    rng.shuffle(triplets);
    std::map<std::string, const Document*> by_id;
    for (const auto* d : ptrs) by_id[d->id] = d;
    EncoderParams init = init_encoder(enc);
    double total = 0.0;
    for (const auto& t : triplets) {
      const EmbeddedDoc a = embed_document(*by_id[t.anchor_id], table, sif);
      const EmbeddedDoc p = embed_document(*by_id[t.positive_id], table, sif);
      const EmbeddedDoc n = embed_document(*by_id[t.negative_id], table, sif);
      total += eval_triplet(init, a, p, n, cfg.margin, sink).loss;
    }
    CHECK(report.epoch_mean_loss[0] ==
          doctest::Approx(total / triplets.size()).epsilon(1e-9));
  }

  SUBCASE("training reduces the mean loss on a learnable corpus") {
    TrainConfig cfg = quick_config();
    cfg.epochs = 4;
    cfg.learning_rate = 0.02;
    auto [params, report] =
        train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::cnn, true), cfg, sink);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());
  }

  SUBCASE("invalid config is rejected") {
    TrainConfig cfg = quick_config();
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(ptrs, 3, table, sif, tiny_encoder(EncoderKind::cnn), cfg, sink),
                    ConfigError);
  }
}
