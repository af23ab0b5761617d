#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corelw/corpus.hpp"
#include "corelw/embeddings.hpp"
#include "corelw/encoders.hpp"
#include "corelw/ot.hpp"
#include "corelw/training.hpp"

namespace corelw {

struct KappaInput {
  std::vector<std::pair<int, int>> pairs;  // (true score, predicted score)
  int num_levels = 0;

  void validate() const;
};

// Quadratic weighted kappa: weights (p-q)^2/(M-1)^2, expected counts from
// the marginal outer product normalized to the observed total. Exactly 1.0
// on perfect agreement; throws DegenerateKappaError when every true AND
// predicted label is identical.
double qwk(const KappaInput& input);

// Same construction with |p-q|/(M-1) weights.
double linear_kappa(const KappaInput& input);

struct SplitPlan {
  int repeats = 10;
  double train_fraction = 0.7;
  bool stratified = true;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic function of (plan.seed, repeat_index).
Split make_split(const Corpus& corpus, const SplitPlan& plan, int repeat_index);

enum class EvalMethod {
  corel_cnn,
  corel_lstm,
  corel_bilstm,
  baseline_lstm,
  baseline_bilstm,
};
EvalMethod eval_method_from_string(const std::string& s);
const char* eval_method_name(EvalMethod m);
bool is_baseline(EvalMethod m);
EncoderKind method_encoder_kind(EvalMethod m);

// Everything one repeat needs to fit and predict.
struct PipelineConfig {
  EvalMethod method = EvalMethod::corel_cnn;
  double sif_a = 1e-3;
  EncoderConfig encoder;
  TrainConfig train;
  SinkhornSettings sinkhorn_settings;
  int knn_k = 7;
  bool baseline_train_head = false;
};

struct TestPrediction {
  std::string doc_id;
  int gold = 0;
  int predicted = 0;
};

struct RepeatRecord {
  int repeat = 0;
  bool failed = false;
  std::string note;
  double qwk = 0.0;
  std::vector<TestPrediction> predictions;
};

struct ProtocolReport {
  std::vector<RepeatRecord> repeats;
  double qwk_mean = 0.0;
  double qwk_std = 0.0;    // sample std over successful repeats
  double qwk_pooled = 0.0; // over all test predictions concatenated
  int successful_repeats = 0;
  std::vector<std::string> warnings;
};

// Test hook: given the training subset and repeat index, return a scorer
// for single documents. The default (nullptr) builds the real pipeline for
// cfg.method.
using PredictorFn = std::function<int(const Document&)>;
using PredictorFactory =
    std::function<PredictorFn(const std::vector<const Document*>&, int)>;

ProtocolReport run_protocol(const Corpus& corpus, const EmbeddingTable& table,
                            const PipelineConfig& cfg, const SplitPlan& plan,
                            const PredictorFactory& factory = nullptr);

enum class ConsistencyClass {
  consistently_differs,
  consistently_matches,
  mixed,
  never_tested,
};
const char* consistency_class_name(ConsistencyClass c);

struct ConsistencyRow {
  std::string id;
  int gold = 0;
  std::vector<int> predictions;  // one per repeat the document was tested in
  int modal_prediction = 0;      // 0 when never tested
  ConsistencyClass cls = ConsistencyClass::never_tested;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;  // sorted by class then id
  int min_occurrences = 2;
};

// A document is consistently-(matches|differs) only when tested at least
// min_occurrences times with all predictions (dis)agreeing; any other
// tested document is mixed.
ConsistencyReport consistency_report(const Corpus& corpus,
                                     const std::vector<RepeatRecord>& repeats,
                                     int min_occurrences);

void write_consistency_csv(const std::filesystem::path& path,
                           const ConsistencyReport& report);

}  // namespace corelw
