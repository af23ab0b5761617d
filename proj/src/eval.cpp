#include "corelw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>

#include "corelw/error.hpp"
#include "corelw/parallel.hpp"
#include "corelw/rng.hpp"
#include "corelw/scoring.hpp"

namespace corelw {

void KappaInput::validate() const {
  if (pairs.empty()) throw ValidationError("kappa input has no pairs");
  if (num_levels < 2) throw ValidationError("kappa needs num_levels >= 2");
  for (const auto& [p, q] : pairs) {
    if (p < 1 || p > num_levels || q < 1 || q > num_levels) {
      throw ValidationError("kappa pair (" + std::to_string(p) + "," + std::to_string(q) +
                            ") outside [1, " + std::to_string(num_levels) + "]");
    }
  }
}

namespace {

double weighted_kappa(const KappaInput& input, bool quadratic) {
  input.validate();
  const int m = input.num_levels;
  const double denom_scale = static_cast<double>(m - 1);

  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd true_marginal = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd pred_marginal = Eigen::VectorXd::Zero(m);
  for (const auto& [p, q] : input.pairs) {
    observed(p - 1, q - 1) += 1.0;
    true_marginal[p - 1] += 1.0;
    pred_marginal[q - 1] += 1.0;
  }
  const double total = static_cast<double>(input.pairs.size());
  // E = outer product of marginals, normalized so sum(E) == sum(O).
  const Eigen::MatrixXd expected = true_marginal * pred_marginal.transpose() / total;

  double weighted_obs = 0.0;
  double weighted_exp = 0.0;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      const double diff = std::abs(p - q) / denom_scale;
      const double w = quadratic ? diff * diff : diff;
      weighted_obs += w * observed(p, q);
      weighted_exp += w * expected(p, q);
    }
  }
  if (weighted_exp == 0.0) {
    if (weighted_obs == 0.0) {
      throw DegenerateKappaError(
          "kappa undefined: every true and predicted label is identical");
    }
    throw DegenerateKappaError("kappa undefined: zero expected disagreement");
  }
  return 1.0 - weighted_obs / weighted_exp;
}

}  // namespace

double qwk(const KappaInput& input) { return weighted_kappa(input, true); }

double linear_kappa(const KappaInput& input) { return weighted_kappa(input, false); }

void SplitPlan::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
}

Split make_split(const Corpus& corpus, const SplitPlan& plan, int repeat_index) {
  plan.validate();
  Rng rng = Rng(plan.seed).fork(static_cast<std::uint64_t>(repeat_index));
  const std::size_t n = corpus.documents.size();
  Split split;
  if (plan.stratified) {
    std::map<int, std::vector<std::size_t>> by_score;
    for (std::size_t i = 0; i < n; ++i) by_score[corpus.documents[i].score].push_back(i);
    for (auto& [score, members] : by_score) {
      rng.shuffle(members);
      const std::size_t take = static_cast<std::size_t>(std::llround(
          plan.train_fraction * static_cast<double>(members.size())));
      for (std::size_t i = 0; i < members.size(); ++i) {
        (i < take ? split.train : split.test).push_back(members[i]);
      }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t take = static_cast<std::size_t>(
        std::llround(plan.train_fraction * static_cast<double>(n)));
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(take), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
  }
  return split;
}

EvalMethod eval_method_from_string(const std::string& s) {
  if (s == "corel-cnn") return EvalMethod::corel_cnn;
  if (s == "corel-lstm") return EvalMethod::corel_lstm;
  if (s == "corel-bilstm") return EvalMethod::corel_bilstm;
  if (s == "baseline-lstm") return EvalMethod::baseline_lstm;
  if (s == "baseline-bilstm") return EvalMethod::baseline_bilstm;
  throw ConfigError("unknown method '" + s +
                    "' (expected corel-cnn, corel-lstm, corel-bilstm, baseline-lstm or "
                    "baseline-bilstm)");
}

const char* eval_method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::corel_cnn: return "corel-cnn";
    case EvalMethod::corel_lstm: return "corel-lstm";
    case EvalMethod::corel_bilstm: return "corel-bilstm";
    case EvalMethod::baseline_lstm: return "baseline-lstm";
    case EvalMethod::baseline_bilstm: return "baseline-bilstm";
  }
  return "?";
}

bool is_baseline(EvalMethod m) {
  return m == EvalMethod::baseline_lstm || m == EvalMethod::baseline_bilstm;
}

EncoderKind method_encoder_kind(EvalMethod m) {
  switch (m) {
    case EvalMethod::corel_cnn: return EncoderKind::cnn;
    case EvalMethod::corel_lstm:
    case EvalMethod::baseline_lstm: return EncoderKind::lstm;
    case EvalMethod::corel_bilstm:
    case EvalMethod::baseline_bilstm: return EncoderKind::bilstm;
  }
  return EncoderKind::cnn;
}

namespace {

PredictorFn build_pipeline_predictor(const std::vector<const Document*>& train_docs,
                                     int num_levels, const EmbeddingTable& table,
                                     const PipelineConfig& cfg, int repeat_index,
                                     std::vector<std::string>* warnings) {
  // SIF frequencies come from the training split only.
  auto sif = std::make_shared<SifWeights>(compute_sif(train_docs, cfg.sif_a));

  EncoderConfig enc = cfg.encoder;
  enc.kind = method_encoder_kind(cfg.method);
  // Per-repeat parameter stream.
  enc.init_seed = Rng(enc.init_seed).fork(static_cast<std::uint64_t>(repeat_index)).next_u64();

  if (is_baseline(cfg.method)) {
    TrainConfig head_cfg = cfg.train;
    head_cfg.seed = Rng(head_cfg.seed).fork(static_cast<std::uint64_t>(repeat_index)).next_u64();
    auto model = std::make_shared<BaselineModel>(
        fit_baseline(train_docs, num_levels, table, *sif, enc, cfg.baseline_train_head,
                     head_cfg, warnings));
    return [model, sif, &table](const Document& doc) {
      return baseline_predict(*model, doc, table, *sif).predicted_score;
    };
  }

  TrainConfig tc = cfg.train;
  tc.seed = Rng(tc.seed).fork(static_cast<std::uint64_t>(repeat_index)).next_u64();
  auto [params, report] =
      train(train_docs, num_levels, table, *sif, enc, tc, cfg.sinkhorn_settings);
  if (warnings != nullptr) {
    for (const auto& w : report.warnings) warnings->push_back(w);
  }
  auto model = std::make_shared<KnnModel>(build_knn(
      train_docs, table, *sif, params, cfg.knn_k, num_levels, cfg.sinkhorn_settings));
  return [model, sif, &table](const Document& doc) {
    return knn_predict(*model, doc, table, *sif).predicted_score;
  };
}

}  // namespace

ProtocolReport run_protocol(const Corpus& corpus, const EmbeddingTable& table,
                            const PipelineConfig& cfg, const SplitPlan& plan,
                            const PredictorFactory& factory) {
  plan.validate();
  ProtocolReport report;

  for (int r = 0; r < plan.repeats; ++r) {
    const Split split = make_split(corpus, plan, r);
    RepeatRecord record;
    record.repeat = r;

    std::vector<const Document*> train_docs;
    train_docs.reserve(split.train.size());
    for (std::size_t i : split.train) train_docs.push_back(&corpus.documents[i]);

    if (!plan.stratified) {
      std::map<int, int> train_levels;
      for (const auto* d : train_docs) ++train_levels[d->score];
      for (int level = 1; level <= corpus.num_levels; ++level) {
        if (train_levels.find(level) == train_levels.end()) {
          report.warnings.push_back("repeat " + std::to_string(r) + ": score class " +
                                    std::to_string(level) +
                                    " absent from the training split");
        }
      }
    }

    try {
      PredictorFn predict =
          factory ? factory(train_docs, r)
                  : build_pipeline_predictor(train_docs, corpus.num_levels, table, cfg,
                                             r, &report.warnings);
      record.predictions.resize(split.test.size());
      // Test documents are independent; prediction order cannot matter.
      for (std::size_t j = 0; j < split.test.size(); ++j) {
        const Document& doc = corpus.documents[split.test[j]];
        record.predictions[j] = {doc.id, doc.score, predict(doc)};
      }
      KappaInput input;
      input.num_levels = corpus.num_levels;
      for (const auto& p : record.predictions) input.pairs.emplace_back(p.gold, p.predicted);
      record.qwk = qwk(input);
    } catch (const Error& e) {
      record.failed = true;
      record.note = std::string(e.code_name()) + ": " + e.what();
      report.warnings.push_back("repeat " + std::to_string(r) +
                                " failed and is excluded from aggregates: " + record.note);
    }
    report.repeats.push_back(std::move(record));
  }

  std::vector<double> qwks;
  KappaInput pooled;
  pooled.num_levels = corpus.num_levels;
  for (const auto& rec : report.repeats) {
    if (rec.failed) continue;
    qwks.push_back(rec.qwk);
    for (const auto& p : rec.predictions) pooled.pairs.emplace_back(p.gold, p.predicted);
  }
  report.successful_repeats = static_cast<int>(qwks.size());
  if (!qwks.empty()) {
    report.qwk_mean = std::accumulate(qwks.begin(), qwks.end(), 0.0) /
                      static_cast<double>(qwks.size());
    double sq = 0.0;
    for (double v : qwks) sq += (v - report.qwk_mean) * (v - report.qwk_mean);
    report.qwk_std =
        qwks.size() > 1 ? std::sqrt(sq / static_cast<double>(qwks.size() - 1)) : 0.0;
    report.qwk_pooled = qwk(pooled);
  }
  return report;
}

const char* consistency_class_name(ConsistencyClass c) {
  switch (c) {
    case ConsistencyClass::consistently_differs: return "consistently-differs";
    case ConsistencyClass::consistently_matches: return "consistently-matches";
    case ConsistencyClass::mixed: return "mixed";
    case ConsistencyClass::never_tested: return "never-tested";
  }
  return "?";
}

ConsistencyReport consistency_report(const Corpus& corpus,
                                     const std::vector<RepeatRecord>& repeats,
                                     int min_occurrences) {
  if (min_occurrences < 1) throw ConfigError("min_occurrences must be >= 1");
  ConsistencyReport report;
  report.min_occurrences = min_occurrences;

  std::map<std::string, std::vector<int>> predictions;
  for (const auto& rec : repeats) {
    if (rec.failed) continue;
    for (const auto& p : rec.predictions) predictions[p.doc_id].push_back(p.predicted);
  }

  for (const auto& doc : corpus.documents) {
    ConsistencyRow row;
    row.id = doc.id;
    row.gold = doc.score;
    auto it = predictions.find(doc.id);
    if (it == predictions.end()) {
      row.cls = ConsistencyClass::never_tested;
    } else {
      row.predictions = it->second;
      std::map<int, int> freq;
      for (int p : row.predictions) ++freq[p];
      int best_count = 0;
      for (const auto& [value, count] : freq) {
        if (count > best_count) {  // ties resolve to the smallest prediction
          best_count = count;
          row.modal_prediction = value;
        }
      }
      const bool enough = row.predictions.size() >= static_cast<std::size_t>(min_occurrences);
      const bool all_match = std::all_of(row.predictions.begin(), row.predictions.end(),
                                         [&](int p) { return p == doc.score; });
      const bool none_match = std::none_of(row.predictions.begin(), row.predictions.end(),
                                           [&](int p) { return p == doc.score; });
      if (enough && all_match) {
        row.cls = ConsistencyClass::consistently_matches;
      } else if (enough && none_match) {
        row.cls = ConsistencyClass::consistently_differs;
      } else {
        row.cls = ConsistencyClass::mixed;
      }
    }
    report.rows.push_back(std::move(row));
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const ConsistencyRow& a, const ConsistencyRow& b) {
              if (a.cls != b.cls) return static_cast<int>(a.cls) < static_cast<int>(b.cls);
              return a.id < b.id;
            });
  return report;
}

void write_consistency_csv(const std::filesystem::path& path,
                           const ConsistencyReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write consistency report: " + path.string());
  out << "consistency_class,id,gold_score,modal_prediction,times_tested,predictions\n";
  for (const auto& row : report.rows) {
    out << consistency_class_name(row.cls) << ',' << row.id << ',' << row.gold << ',';
    if (row.predictions.empty()) {
      out << "";
    } else {
      out << row.modal_prediction;
    }
    out << ',' << row.predictions.size() << ',';
    for (std::size_t i = 0; i < row.predictions.size(); ++i) {
      if (i > 0) out << ';';
      out << row.predictions[i];
    }
    out << '\n';
  }
}

}  // namespace corelw
