#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "corelw/error.hpp"
#include "corelw/scoring.hpp"

using namespace corelw;

namespace {

// Identity encoder on 1-token documents: window 1 CNN with S = I, g = 0, so
// the document's distribution is a single Dirac at its embedding and the
// Wasserstein distance to another document is 0.5 * ||difference||^2.
EncoderParams identity_encoder(int dim) {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::cnn;
  cfg.d_w = dim;
  cfg.d_c = dim;
  cfg.window = 1;
  cfg.batch_norm = false;
  EncoderParams params = init_encoder(cfg);
  params.cnn->S = Eigen::MatrixXd::Identity(dim, dim);
  params.cnn->g = Eigen::VectorXd::Zero(dim);
  return params;
}

// One real axis: token "tNNN" sits at x = value / 10.
std::filesystem::path write_axis_vectors() {
  const auto path = std::filesystem::temp_directory_path() / "corelw_axis_vecs.txt";
  std::ofstream out(path);
  for (int v = 0; v <= 200; ++v) {
    out << "t" << v << ' ' << (v / 10.0) << '\n';
  }
  return path;
}

Document axis_doc(const std::string& id, int position, int score) {
  Document d;
  d.id = id;
  d.tokens = {"t" + std::to_string(position)};
  d.score = score;
  return d;
}

struct AxisFixture {
  EmbeddingTable table;
  SifWeights sif;
  EncoderParams params;
  SinkhornSettings sink;

  AxisFixture() : table(EmbeddingTable::load(write_axis_vectors(), 1, 3)),
                  params(identity_encoder(1)) {
    sink.epsilon_abs = 1e-4;
    sink.max_iters = 100000;
    sink.tolerance = 1e-10;
  }
};

}  // namespace

TEST_CASE("round_score rounds half away from zero and clamps") {
  CHECK(round_score(26.0 / 7.0, 4) == 4);  // 3.714...
  CHECK(round_score(19.0 / 7.0, 4) == 3);  // 2.714...
  CHECK(round_score(2.5, 4) == 3);
  CHECK(round_score(2.0, 4) == 2);
  CHECK(round_score(0.4, 4) == 1);   // clamped up
  CHECK(round_score(9.7, 4) == 4);   // clamped down
}

TEST_CASE("build_knn validates K") {
  AxisFixture fx;
  std::vector<Document> docs = {axis_doc("a", 0, 1), axis_doc("b", 10, 2)};
  std::vector<const Document*> ptrs = {&docs[0], &docs[1]};
  CHECK_THROWS_AS(build_knn(ptrs, fx.table, fx.sif, fx.params, 3, 4, fx.sink), ConfigError);
  CHECK_THROWS_AS(build_knn(ptrs, fx.table, fx.sif, fx.params, 0, 4, fx.sink), ConfigError);
  const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 2, 4, fx.sink);
  CHECK(model.train_dists.size() == 2);
}

TEST_CASE("knn prediction implements the rounding vote") {
  AxisFixture fx;

  SUBCASE("neighbor scores (3,3,4,4,4,4,4) -> 4") {
    // Train docs at distances 1..7 from the query at 0; nearest two score 3.
    std::vector<Document> docs;
    const int scores[] = {3, 3, 4, 4, 4, 4, 4};
    for (int i = 0; i < 7; ++i) docs.push_back(axis_doc("t" + std::to_string(i), 10 * (i + 1), scores[i]));
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 7, 4, fx.sink);
    const Document query = axis_doc("q", 0, 1);
    const Prediction pred = knn_predict(model, query, fx.table, fx.sif);
    CHECK(pred.raw_mean == doctest::Approx(26.0 / 7.0));
    CHECK(pred.predicted_score == 4);
    for (std::size_t i = 1; i < pred.neighbors.size(); ++i) {
      CHECK(pred.neighbors[i - 1].distance <= pred.neighbors[i].distance);
    }
  }

  SUBCASE("neighbor scores (2,2,2,3,3,3,4) -> 3") {
    std::vector<Document> docs;
    const int scores[] = {2, 2, 2, 3, 3, 3, 4};
    for (int i = 0; i < 7; ++i) docs.push_back(axis_doc("t" + std::to_string(i), 10 * (i + 1), scores[i]));
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 7, 4, fx.sink);
    const Prediction pred = knn_predict(model, axis_doc("q", 0, 1), fx.table, fx.sif);
    CHECK(pred.raw_mean == doctest::Approx(19.0 / 7.0));
    CHECK(pred.predicted_score == 3);
  }

  SUBCASE("unanimous neighbors") {
    std::vector<Document> docs;
    for (int i = 0; i < 7; ++i) docs.push_back(axis_doc("t" + std::to_string(i), 10 * (i + 1), 2));
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 7, 4, fx.sink);
    CHECK(knn_predict(model, axis_doc("q", 0, 1), fx.table, fx.sif).predicted_score == 2);
  }

  SUBCASE("K = 1 self-prediction recovers gold") {
    std::vector<Document> docs = {axis_doc("a", 0, 1), axis_doc("b", 50, 3),
                                  axis_doc("c", 120, 4)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 1, 4, fx.sink);
    for (const auto& d : docs) {
      CHECK(knn_predict(model, d, fx.table, fx.sif).predicted_score == d.score);
    }
  }

  SUBCASE("K = N_train averages every training score") {
    std::vector<Document> docs = {axis_doc("a", 10, 1), axis_doc("b", 50, 2),
                                  axis_doc("c", 120, 4)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    const KnnModel model = build_knn(ptrs, fx.table, fx.sif, fx.params, 3, 4, fx.sink);
    const Prediction pred = knn_predict(model, axis_doc("q", 0, 1), fx.table, fx.sif);
    CHECK(pred.raw_mean == doctest::Approx(7.0 / 3.0));
    CHECK(pred.predicted_score == 2);
  }

  SUBCASE("exact distance ties break by training id, stable under reordering") {
    // b1 and b2 sit symmetrically around the query.
    std::vector<Document> docs = {axis_doc("zz", 60, 4), axis_doc("aa", 40, 2)};
    std::vector<const Document*> fwd = {&docs[0], &docs[1]};
    std::vector<const Document*> rev = {&docs[1], &docs[0]};
    const Document query = axis_doc("q", 50, 1);
    const KnnModel m1 = build_knn(fwd, fx.table, fx.sif, fx.params, 1, 4, fx.sink);
    const KnnModel m2 = build_knn(rev, fx.table, fx.sif, fx.params, 1, 4, fx.sink);
    const Prediction p1 = knn_predict(m1, query, fx.table, fx.sif);
    const Prediction p2 = knn_predict(m2, query, fx.table, fx.sif);
    CHECK(p1.neighbors[0].id == "aa");
    CHECK(p2.neighbors[0].id == "aa");
    CHECK(p1.predicted_score == p2.predicted_score);
  }
}

TEST_CASE("baseline mean-pool regression") {
  AxisFixture fx;
  TrainConfig head_cfg;
  head_cfg.epochs = 50;
  head_cfg.learning_rate = 0.05;

  SUBCASE("constant targets predict the constant") {
    std::vector<Document> docs = {axis_doc("a", 10, 2), axis_doc("b", 70, 2),
                                  axis_doc("c", 130, 2)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    EncoderConfig enc;
    enc.kind = EncoderKind::lstm;
    enc.d_w = 1;
    enc.d_h = 3;
    const BaselineModel model =
        fit_baseline(ptrs, 4, fx.table, fx.sif, enc, false, head_cfg);
    for (const auto& d : docs) {
      CHECK(baseline_predict(model, d, fx.table, fx.sif).predicted_score == 2);
    }
    CHECK(baseline_predict(model, axis_doc("q", 40, 1), fx.table, fx.sif).predicted_score ==
          2);
  }

  SUBCASE("linearly separable scores are recovered exactly on train") {
    // score = position/10; a 1-d window-1 CNN is affine in the embedding,
    // so OLS through the four collinear points is exact.
    std::vector<Document> docs = {axis_doc("a", 10, 1), axis_doc("b", 20, 2),
                                  axis_doc("c", 30, 3), axis_doc("d", 40, 4)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    EncoderConfig enc;
    enc.kind = EncoderKind::cnn;
    enc.d_w = 1;
    enc.d_c = 1;
    enc.window = 1;
    const BaselineModel model = fit_baseline(ptrs, 4, fx.table, fx.sif, enc, false, head_cfg);
    for (const auto& d : docs) {
      CHECK(baseline_predict(model, d, fx.table, fx.sif).raw_mean ==
            doctest::Approx(d.score).epsilon(1e-6));
    }
  }

  SUBCASE("mean pooling of identical states returns that state") {
    // same token repeated: every CNN window-1 output column is equal.
    Document d;
    d.id = "rep";
    d.tokens = {"t50", "t50", "t50"};
    d.score = 2;
    const EmbeddedDoc emb = embed_document(d, fx.table, fx.sif);
    const EncoderOutput out = cnn_forward(emb.matrix, *fx.params.cnn);
    const Eigen::VectorXd pooled = out.points.rowwise().mean();
    CHECK((pooled - out.points.col(0)).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("collinear features fall back to ridge with a warning") {
    std::vector<Document> docs = {axis_doc("a", 10, 1), axis_doc("b", 10, 2),
                                  axis_doc("c", 10, 3)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    EncoderConfig enc;
    enc.kind = EncoderKind::cnn;
    enc.d_w = 1;
    enc.d_c = 1;
    enc.window = 1;
    std::vector<std::string> warnings;
    const BaselineModel model =
        fit_baseline(ptrs, 4, fx.table, fx.sif, enc, false, head_cfg, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("ridge") != std::string::npos);
    (void)model;
  }

  SUBCASE("trained head reduces the fit error over epochs") {
    std::vector<Document> docs = {axis_doc("a", 10, 1), axis_doc("b", 60, 2),
                                  axis_doc("c", 110, 3), axis_doc("d", 160, 4)};
    std::vector<const Document*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    EncoderConfig enc;
    enc.kind = EncoderKind::lstm;
    enc.d_w = 1;
    enc.d_h = 4;
    enc.init_seed = 2;
    TrainConfig short_cfg = head_cfg;
    short_cfg.epochs = 2;
    const BaselineModel quick =
        fit_baseline(ptrs, 4, fx.table, fx.sif, enc, true, short_cfg);
    TrainConfig long_cfg = head_cfg;
    long_cfg.epochs = 200;
    const BaselineModel longer =
        fit_baseline(ptrs, 4, fx.table, fx.sif, enc, true, long_cfg);
    const auto sse = [&](const BaselineModel& m) {
      double total = 0.0;
      for (const auto& d : docs) {
        const double r = baseline_predict(m, d, fx.table, fx.sif).raw_mean - d.score;
        total += r * r;
      }
      return total;
    };
    CHECK(sse(longer) < sse(quick));
  }
}
