#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "corelw/error.hpp"
#include "corelw/eval.hpp"
#include "corelw/rng.hpp"
#include "corelw/synth.hpp"
#include "support/oracles.hpp"

using namespace corelw;

namespace {

KappaInput input_of(std::vector<std::pair<int, int>> pairs, int m) {
  KappaInput in;
  in.pairs = std::move(pairs);
  in.num_levels = m;
  return in;
}

Corpus corpus_of_scores(const std::vector<int>& scores, int levels) {
  Corpus corpus;
  corpus.num_levels = levels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.score = scores[i];
    d.tokens = {"tok"};
    corpus.documents.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace

TEST_CASE("qwk basics") {
  SUBCASE("perfect agreement with two labels is exactly 1.0") {
    const double v = qwk(input_of({{1, 1}, {2, 2}, {2, 2}, {4, 4}}, 4));
    CHECK(v == 1.0);
  }
  SUBCASE("maximally wrong pairs score below zero, matching the oracle") {
    const std::vector<std::pair<int, int>> pairs = {{1, 4}, {4, 1}};
    const double v = qwk(input_of(pairs, 4));
    CHECK(v == doctest::Approx(oracles::kappa_direct(pairs, 4, true)).epsilon(1e-14));
    CHECK(v < 0.0);
  }
  SUBCASE("degenerate marginals raise a typed error") {
    CHECK_THROWS_AS(qwk(input_of({{2, 2}, {2, 2}}, 4)), DegenerateKappaError);
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(qwk(input_of({}, 4)), ValidationError);
    CHECK_THROWS_AS(qwk(input_of({{0, 1}}, 4)), ValidationError);
    CHECK_THROWS_AS(qwk(input_of({{1, 5}}, 4)), ValidationError);
  }
}

TEST_CASE("linear kappa uses absolute-distance weights") {
  const std::vector<std::pair<int, int>> pairs = {
      {1, 1}, {1, 2}, {2, 3}, {3, 3}, {4, 2}, {4, 4}, {2, 2}};
  const double lin = linear_kappa(input_of(pairs, 4));
  const double quad = qwk(input_of(pairs, 4));
  CHECK(lin == doctest::Approx(oracles::kappa_direct(pairs, 4, false)).epsilon(1e-14));
  CHECK(quad == doctest::Approx(oracles::kappa_direct(pairs, 4, true)).epsilon(1e-14));
  CHECK(lin != doctest::Approx(quad).epsilon(1e-9));
  CHECK(linear_kappa(input_of({{1, 1}, {3, 3}}, 4)) == 1.0);
}

TEST_CASE("kappa oracle equivalence on 200 random inputs") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(4));  // M <= 5
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
      pairs.emplace_back(1 + static_cast<int>(rng.uniform_int(m)),
                         1 + static_cast<int>(rng.uniform_int(m)));
    }
    // skip degenerate draws
    bool degenerate = true;
    for (const auto& p : pairs) {
      if (p != pairs[0]) {
        degenerate = false;
        break;
      }
    }
    if (degenerate || pairs[0].first != pairs[0].second) degenerate = false;
    try {
      const double mine = qwk(input_of(pairs, m));
      CHECK(std::abs(mine - oracles::kappa_direct(pairs, m, true)) < 1e-12);
      const double lin = linear_kappa(input_of(pairs, m));
      CHECK(std::abs(lin - oracles::kappa_direct(pairs, m, false)) < 1e-12);
    } catch (const DegenerateKappaError&) {
      // all-identical draw; the oracle would divide by zero too
    }
  }
}

TEST_CASE("qwk is invariant under order-reversing relabeling") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3 + static_cast<int>(rng.uniform_int(3));
    std::vector<std::pair<int, int>> pairs, flipped;
    for (int i = 0; i < 30; ++i) {
      const int p = 1 + static_cast<int>(rng.uniform_int(m));
      const int q = 1 + static_cast<int>(rng.uniform_int(m));
      pairs.emplace_back(p, q);
      flipped.emplace_back(m + 1 - p, m + 1 - q);
    }
    try {
      CHECK(qwk(input_of(pairs, m)) ==
            doctest::Approx(qwk(input_of(flipped, m))).epsilon(1e-12));
    } catch (const DegenerateKappaError&) {
    }
  }
}

TEST_CASE("split plans") {
  std::vector<int> scores;
  for (int i = 0; i < 146; ++i) scores.push_back(1 + i % 4);
  const Corpus corpus = corpus_of_scores(scores, 4);

  SUBCASE("unstratified 70/30 on 146 documents gives 102/44") {
    SplitPlan plan;
    plan.stratified = false;
    plan.seed = 5;
    const Split split = make_split(corpus, plan, 0);
    CHECK(split.train.size() == 102);
    CHECK(split.test.size() == 44);
  }

  SUBCASE("stratified per-class counts stay within one of the exact proportion") {
    SplitPlan plan;
    plan.seed = 5;
    for (int r = 0; r < 10; ++r) {
      const Split split = make_split(corpus, plan, r);
      std::map<int, int> class_total, class_train;
      for (const auto& d : corpus.documents) ++class_total[d.score];
      for (std::size_t i : split.train) ++class_train[corpus.documents[i].score];
      for (const auto& [score, total] : class_total) {
        CHECK(std::abs(class_train[score] - 0.7 * total) <= 1.0);
      }
    }
  }

  SUBCASE("splits partition the corpus and are deterministic") {
    SplitPlan plan;
    plan.seed = 11;
    const Split a = make_split(corpus, plan, 3);
    const Split b = make_split(corpus, plan, 3);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == corpus.documents.size());
    const Split c = make_split(corpus, plan, 4);
    CHECK(a.train != c.train);
  }
}

TEST_CASE("run_protocol with injected predictors") {
  std::vector<int> scores;
  for (int i = 0; i < 60; ++i) scores.push_back(1 + i % 4);
  const Corpus corpus = corpus_of_scores(scores, 4);
  const EmbeddingTable table(4, 1);
  PipelineConfig cfg;
  SplitPlan plan;
  plan.seed = 23;

  SUBCASE("perfect oracle gives mean 1.0 and zero std") {
    plan.repeats = 1;
    const auto factory = [](const std::vector<const Document*>&, int) {
      return [](const Document& doc) { return doc.score; };
    };
    const ProtocolReport report = run_protocol(corpus, table, cfg, plan, factory);
    CHECK(report.successful_repeats == 1);
    CHECK(report.qwk_mean == 1.0);
    CHECK(report.qwk_std == 0.0);
    CHECK(report.qwk_pooled == 1.0);
  }

  SUBCASE("fixed seed reruns are identical") {
    plan.repeats = 4;
    const auto factory = [](const std::vector<const Document*>& train, int) {
      // deterministic but imperfect: majority training score
      std::map<int, int> counts;
      for (const auto* d : train) ++counts[d->score];
      int best = 1, best_count = 0;
      for (const auto& [s, c] : counts) {
        if (c > best_count) {
          best = s;
          best_count = c;
        }
      }
      return [best](const Document&) { return best; };
    };
    const ProtocolReport a = run_protocol(corpus, table, cfg, plan, factory);
    const ProtocolReport b = run_protocol(corpus, table, cfg, plan, factory);
    REQUIRE(a.repeats.size() == b.repeats.size());
    for (std::size_t r = 0; r < a.repeats.size(); ++r) {
      CHECK(a.repeats[r].qwk == b.repeats[r].qwk);
    }
    CHECK(a.qwk_mean == b.qwk_mean);
  }

  SUBCASE("failed repeats are excluded with a notice") {
    plan.repeats = 3;
    const auto factory = [](const std::vector<const Document*>&, int repeat) {
      if (repeat == 1) throw TrainingError("synthetic failure");
      return PredictorFn([](const Document& doc) { return doc.score; });
    };
    const ProtocolReport report = run_protocol(corpus, table, cfg, plan, factory);
    CHECK(report.successful_repeats == 2);
    CHECK(report.repeats[1].failed);
    CHECK(report.qwk_mean == 1.0);
    bool noticed = false;
    for (const auto& w : report.warnings) {
      if (w.find("repeat 1") != std::string::npos) noticed = true;
    }
    CHECK(noticed);
  }
}

TEST_CASE("consistency report") {
  // gold scores: d0=1, d1=2, d2=3, d3=4 (d3 never tested)
  const Corpus corpus = corpus_of_scores({1, 2, 3, 4}, 4);
  std::vector<RepeatRecord> repeats(4);
  for (int r = 0; r < 4; ++r) {
    repeats[r].repeat = r;
    // d0 predicted 3 in every appearance (gold 1)
    repeats[r].predictions.push_back({"d0", 1, 3});
  }
  // d1: mixed {2, 3}
  repeats[0].predictions.push_back({"d1", 2, 2});
  repeats[1].predictions.push_back({"d1", 2, 3});
  // d2: tested once, matches
  repeats[2].predictions.push_back({"d2", 3, 3});

  const ConsistencyReport report = consistency_report(corpus, repeats, 2);
  REQUIRE(report.rows.size() == 4);

  std::map<std::string, const ConsistencyRow*> by_id;
  for (const auto& row : report.rows) by_id[row.id] = &row;

  CHECK(by_id["d0"]->cls == ConsistencyClass::consistently_differs);
  CHECK(by_id["d0"]->modal_prediction == 3);
  CHECK(by_id["d0"]->predictions.size() == 4);
  CHECK(by_id["d1"]->cls == ConsistencyClass::mixed);
  // tested below min_occurrences: neither consistent class
  CHECK(by_id["d2"]->cls == ConsistencyClass::mixed);
  CHECK(by_id["d3"]->cls == ConsistencyClass::never_tested);

  // each tested document lands in exactly one class, and rows are sorted
  // by class then id
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    CHECK((static_cast<int>(a.cls) < static_cast<int>(b.cls) ||
           (a.cls == b.cls && a.id < b.id)));
  }

  SUBCASE("csv output") {
    const auto path = std::filesystem::temp_directory_path() / "corelw_consistency.csv";
    write_consistency_csv(path, report);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "consistency_class,id,gold_score,modal_prediction,times_tested,predictions");
    std::string first;
    std::getline(in, first);
    CHECK(first.find("consistently-differs,d0,1,3,4,3;3;3;3") == 0);
  }

  SUBCASE("with min_occurrences 1 a single matching test is consistent") {
    const ConsistencyReport relaxed = consistency_report(corpus, repeats, 1);
    std::map<std::string, const ConsistencyRow*> rows;
    for (const auto& row : relaxed.rows) rows[row.id] = &row;
    CHECK(rows["d2"]->cls == ConsistencyClass::consistently_matches);
  }
}
