#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "corelw/checkpoint.hpp"
#include "corelw/config.hpp"
#include "corelw/corpus.hpp"
#include "corelw/embeddings.hpp"
#include "corelw/error.hpp"
#include "corelw/eval.hpp"
#include "corelw/parallel.hpp"
#include "corelw/rng.hpp"
#include "corelw/scoring.hpp"
#include "corelw/synth.hpp"
#include "corelw/training.hpp"

namespace {

using corelw::RunConfig;
using nlohmann::json;

int exit_code_for(corelw::ErrorCode code) {
  switch (code) {
    case corelw::ErrorCode::config: return 2;
    case corelw::ErrorCode::load: return 3;
    case corelw::ErrorCode::validation: return 4;
    case corelw::ErrorCode::training: return 5;
    case corelw::ErrorCode::internal: return 6;
    case corelw::ErrorCode::degenerate_kappa: return 7;
  }
  return 1;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string run_id_for(const RunConfig& config, const std::string& command,
                       const std::string& input) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    corelw::hash64(config.echo() + "\n" + command + "\n" + input)));
  return buf;
}

std::set<std::string> resolve_stopwords(const RunConfig& config) {
  if (!config.remove_stopwords) return {};
  if (!config.stopwords_path.empty()) {
    return corelw::load_stopwords(config.stopwords_path);
  }
#ifdef CORELW_DEFAULT_STOPWORDS
  return corelw::load_stopwords(CORELW_DEFAULT_STOPWORDS);
#else
  throw corelw::ConfigError(
      "remove_stopwords is on but no stopwords_path was configured");
#endif
}

corelw::EmbeddingTable make_embedding_table(const RunConfig& config) {
  if (config.embedding_path.empty()) {
    // No pre-trained vectors: every token takes the deterministic
    // hash-seeded vector path.
    return corelw::EmbeddingTable(config.embedding_dim, config.oov_seed);
  }
  corelw::EmbeddingTable table = corelw::EmbeddingTable::load(
      config.embedding_path, config.embedding_dim, config.oov_seed);
  if (table.skipped_lines() > 0) {
    std::cerr << "warning: skipped " << table.skipped_lines()
              << " malformed embedding lines\n";
  }
  return table;
}

corelw::Corpus load_configured_corpus(const RunConfig& config, const std::string& path,
                                      bool allow_empty = false) {
  const auto stopwords = resolve_stopwords(config);
  const auto pcfg = config.preprocess_config(stopwords);
  std::optional<int> levels;
  if (config.num_levels > 0) levels = config.num_levels;
  return corelw::load_corpus(path, corelw::corpus_format_from_string(config.corpus_format),
                             pcfg, levels, allow_empty);
}

void print_corpus_summary(const corelw::Corpus& corpus) {
  const auto& s = corpus.stats;
  std::printf("corpus: %zu documents, levels 1..%d\n", s.num_documents, corpus.num_levels);
  std::printf("  tokens (preprocessed): avg %.1f, max %zu, min %zu\n", s.tokens.avg,
              s.tokens.max, s.tokens.min);
  std::printf("  tokens (before stopword removal): avg %.1f, max %zu, min %zu\n",
              s.tokens_with_stopwords.avg, s.tokens_with_stopwords.max,
              s.tokens_with_stopwords.min);
}

json config_json(const RunConfig& config) {
  json j;
  for (const auto& [k, v] : config.as_map()) j[k] = v;
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw corelw::LoadError("cannot write " + path.string());
  out << content;
}

std::vector<const corelw::Document*> doc_pointers(const corelw::Corpus& corpus) {
  std::vector<const corelw::Document*> docs;
  docs.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) docs.push_back(&d);
  return docs;
}

// --- subcommands ---

int cmd_train(const RunConfig& config, const std::string& corpus_path,
              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const corelw::Corpus corpus = load_configured_corpus(config, corpus_path);
  print_corpus_summary(corpus);

  const corelw::EmbeddingTable table = make_embedding_table(config);
  const auto docs = doc_pointers(corpus);
  const corelw::SifWeights sif = corelw::compute_sif(docs, config.sif_a);

  auto [params, report] =
      corelw::train(docs, corpus.num_levels, table, sif, config.encoder_config(),
                    config.train_config(), config.sinkhorn_settings());

  const std::filesystem::path out(out_dir);
  const std::filesystem::path checkpoint = out / "checkpoint.json";
  // Write through a temp name so failures leave no partial checkpoint.
  const std::filesystem::path tmp = out / "checkpoint.json.tmp";
  corelw::save_checkpoint(tmp, params);
  std::filesystem::rename(tmp, checkpoint);

  json j;
  j["run_id"] = run_id_for(config, "train", corpus_path);
  j["config"] = config_json(config);
  j["corpus"] = {{"documents", corpus.stats.num_documents},
                 {"num_levels", corpus.num_levels},
                 {"provenance", corpus.provenance}};
  j["train_report"] = {{"epoch_mean_loss", report.epoch_mean_loss},
                       {"epoch_active_fraction", report.epoch_active_fraction},
                       {"triplet_count", report.triplet_count},
                       {"nonconverged_sinkhorn", report.nonconverged_sinkhorn},
                       {"seed", report.seed},
                       {"warnings", report.warnings},
                       {"checkpoint", checkpoint.string()}};
  j["timestamp"] = iso_timestamp();
  write_text_file(out / "report.json", j.dump(2) + "\n");
  write_text_file(out / "config.echo", config.echo());

  for (std::size_t e = 0; e < report.epoch_mean_loss.size(); ++e) {
    std::printf("epoch %zu: mean loss %.6f, active %.3f\n", e + 1,
                report.epoch_mean_loss[e], report.epoch_active_fraction[e]);
  }
  std::printf("checkpoint: %s\n", checkpoint.string().c_str());
  return 0;
}

int cmd_predict(const RunConfig& config, const std::string& checkpoint_path,
                const std::string& train_path, const std::string& test_path,
                const std::string& out_file) {
  const corelw::EncoderParams params = corelw::load_checkpoint(checkpoint_path);
  const corelw::Corpus train_corpus = load_configured_corpus(config, train_path);
  const corelw::Corpus test_corpus =
      load_configured_corpus(config, test_path, /*allow_empty=*/true);

  const corelw::EmbeddingTable table = make_embedding_table(config);
  const auto train_docs = doc_pointers(train_corpus);
  const corelw::SifWeights sif = corelw::compute_sif(train_docs, config.sif_a);

  const corelw::KnnModel model =
      corelw::build_knn(train_docs, table, sif, params, config.knn_k,
                        train_corpus.num_levels, config.sinkhorn_settings());

  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw corelw::LoadError("cannot write predictions: " + out_file);
  out << "id,gold,predicted,raw_mean,neighbor_ids,neighbor_distances\n";
  for (const auto& doc : test_corpus.documents) {
    const corelw::Prediction pred = corelw::knn_predict(model, doc, table, sif);
    out << doc.id << ',' << doc.score << ',' << pred.predicted_score << ','
        << pred.raw_mean << ",\"";
    for (std::size_t i = 0; i < pred.neighbors.size(); ++i) {
      if (i > 0) out << ';';
      out << pred.neighbors[i].id;
    }
    out << "\",\"";
    char buf[32];
    for (std::size_t i = 0; i < pred.neighbors.size(); ++i) {
      if (i > 0) out << ';';
      std::snprintf(buf, sizeof buf, "%.12g", pred.neighbors[i].distance);
      out << buf;
    }
    out << "\"\n";
  }
  std::printf("wrote %zu predictions to %s\n", test_corpus.documents.size(),
              out_file.c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& corpus_path,
                 const std::string& method, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const corelw::Corpus corpus = load_configured_corpus(config, corpus_path);
  print_corpus_summary(corpus);
  const corelw::EmbeddingTable table = make_embedding_table(config);

  corelw::PipelineConfig pipeline;
  pipeline.method = corelw::eval_method_from_string(method);
  pipeline.sif_a = config.sif_a;
  pipeline.encoder = config.encoder_config();
  pipeline.train = config.train_config();
  pipeline.sinkhorn_settings = config.sinkhorn_settings();
  pipeline.knn_k = config.knn_k;
  pipeline.baseline_train_head = config.baseline_train_head;

  const corelw::SplitPlan plan = config.split_plan();
  const corelw::ProtocolReport report = corelw::run_protocol(corpus, table, pipeline, plan);

  json j;
  j["run_id"] = run_id_for(config, "evaluate/" + method, corpus_path);
  j["method"] = method;
  j["config"] = config_json(config);
  json repeats = json::array();
  for (const auto& rec : report.repeats) {
    json r;
    r["repeat"] = rec.repeat;
    r["failed"] = rec.failed;
    if (rec.failed) {
      r["note"] = rec.note;
    } else {
      r["qwk"] = rec.qwk;
      r["test_size"] = rec.predictions.size();
    }
    repeats.push_back(std::move(r));
  }
  j["repeats"] = std::move(repeats);
  j["qwk_mean"] = report.qwk_mean;
  j["qwk_std"] = report.qwk_std;
  j["qwk_pooled"] = report.qwk_pooled;
  j["successful_repeats"] = report.successful_repeats;
  j["warnings"] = report.warnings;
  j["timestamp"] = iso_timestamp();

  const std::filesystem::path out(out_dir);
  write_text_file(out / "protocol_report.json", j.dump(2) + "\n");
  write_text_file(out / "config.echo", config.echo());
  const corelw::ConsistencyReport consistency =
      corelw::consistency_report(corpus, report.repeats, config.min_occurrences);
  corelw::write_consistency_csv(out / "consistency.csv", consistency);

  for (const auto& rec : report.repeats) {
    if (rec.failed) {
      std::printf("repeat %d: failed (%s)\n", rec.repeat, rec.note.c_str());
    } else {
      std::printf("repeat %d: qwk %.4f\n", rec.repeat, rec.qwk);
    }
  }
  std::printf("%s: qwk mean %.4f std %.4f pooled %.4f over %d repeats\n", method.c_str(),
              report.qwk_mean, report.qwk_std, report.qwk_pooled,
              report.successful_repeats);
  return 0;
}

int cmd_synth(const std::string& out_path, int size, int levels, std::uint64_t seed) {
  const auto records = corelw::generate_synthetic(size, levels, seed);
  corelw::write_synthetic_csv(out_path, records);
  std::printf("wrote %zu synthetic documents (levels 1..%d) to %s\n", records.size(),
              levels, out_path.c_str());
  return 0;
}

int cmd_kappa(const std::string& pairs_path, int levels, bool linear) {
  std::ifstream in(pairs_path);
  if (!in) throw corelw::LoadError("cannot open pairs file: " + pairs_path);
  corelw::KappaInput input;
  std::string line;
  std::size_t lineno = 0;
  int max_seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.find("gold") != std::string::npos) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw corelw::LoadError(pairs_path + ":" + std::to_string(lineno) +
                              ": expected 'gold,predicted'");
    }
    try {
      const int gold = std::stoi(line.substr(0, comma));
      const int pred = std::stoi(line.substr(comma + 1));
      input.pairs.emplace_back(gold, pred);
      max_seen = std::max({max_seen, gold, pred});
    } catch (const std::exception&) {
      throw corelw::LoadError(pairs_path + ":" + std::to_string(lineno) +
                              ": non-integer pair");
    }
  }
  input.num_levels = levels > 0 ? levels : std::max(2, max_seen);
  std::printf("qwk %.12f\n", corelw::qwk(input));
  if (linear) std::printf("linear_kappa %.12f\n", corelw::linear_kappa(input));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive document scoring in Wasserstein space"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware concurrency)");

  std::string config_path, corpus_path, out_dir = "out", format, method = "corel-cnn";
  std::string checkpoint_path, train_path, test_path, out_file = "predictions.csv";
  std::string pairs_path, synth_out = "synth.csv";
  std::vector<std::string> sets;
  std::optional<int> repeats_flag, k_flag, epochs_flag;
  std::optional<std::uint64_t> seed_flag;
  int synth_size = 150, synth_levels = 4;
  std::uint64_t synth_seed = 7;
  int kappa_levels = 0;
  bool kappa_linear = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Flat key=value config file")
        ->envname("CORELW_CONFIG");
    cmd->add_option("--set", sets, "Override a config key, e.g. --set epochs=3");
    cmd->add_option("--format", format, "Corpus format: csv or jsonl");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train an encoder checkpoint");
  add_common(train_cmd);
  train_cmd->add_option("--corpus", corpus_path, "Scored corpus file")->required();
  train_cmd->add_option("--out", out_dir, "Output directory");
  train_cmd->add_option("--seed", seed_flag, "Training seed override");
  train_cmd->add_option("--epochs", epochs_flag, "Epoch count override");
  train_cmd->add_option("--encoder", method, "Encoder kind: cnn, lstm or bilstm")
      ->check(CLI::IsMember({"cnn", "lstm", "bilstm", "corel-cnn"}))
      ->default_val("cnn");

  CLI::App* predict_cmd = app.add_subcommand("predict", "Score documents with a checkpoint");
  add_common(predict_cmd);
  predict_cmd->add_option("--checkpoint", checkpoint_path, "Encoder checkpoint")->required();
  predict_cmd->add_option("--train-corpus", train_path, "Training corpus")->required();
  predict_cmd->add_option("--test-corpus", test_path, "Documents to score")->required();
  predict_cmd->add_option("--k", k_flag, "Neighbor count override");
  predict_cmd->add_option("--out", out_file, "Predictions CSV path");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Repeated-split protocol evaluation");
  add_common(eval_cmd);
  eval_cmd->add_option("--corpus", corpus_path, "Scored corpus file")->required();
  eval_cmd
      ->add_option("--method", method,
                   "corel-cnn, corel-lstm, corel-bilstm, baseline-lstm or baseline-bilstm")
      ->default_val("corel-cnn");
  eval_cmd->add_option("--repeats", repeats_flag, "Repeat count override");
  eval_cmd->add_option("--seed", seed_flag, "Protocol seed override");
  eval_cmd->add_option("--out", out_dir, "Output directory");

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scored corpus");
  synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();
  synth_cmd->add_option("--size", synth_size, "Document count");
  synth_cmd->add_option("--levels", synth_levels, "Score levels");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");

  CLI::App* kappa_cmd = app.add_subcommand("kappa", "Compute kappa from a gold,predicted CSV");
  kappa_cmd->add_option("--pairs", pairs_path, "CSV of gold,predicted pairs")->required();
  kappa_cmd->add_option("--levels", kappa_levels, "Number of ratings (0 = infer)");
  kappa_cmd->add_flag("--linear", kappa_linear, "Also print linear weighted kappa");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw corelw::ConfigError("--set expects key=value, got '" + kv + "'");
      }
      config.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!format.empty()) config.apply("corpus_format", format);
    if (seed_flag) config.seed = *seed_flag;
    if (epochs_flag) config.epochs = *epochs_flag;
    if (repeats_flag) config.repeats = *repeats_flag;
    if (k_flag) config.knn_k = *k_flag;
    if (threads > 0) config.threads = threads;
    if (config.threads > 0) corelw::set_thread_count(static_cast<std::size_t>(config.threads));

    if (train_cmd->parsed()) {
      if (method == "corel-cnn") method = "cnn";
      config.encoder = method;
      return cmd_train(config, corpus_path, out_dir);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(config, checkpoint_path, train_path, test_path, out_file);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(config, corpus_path, method, out_dir);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_out, synth_size, synth_levels, synth_seed);
    }
    if (kappa_cmd->parsed()) {
      return cmd_kappa(pairs_path, kappa_levels, kappa_linear);
    }
  } catch (const corelw::Error& e) {
    std::cerr << "error[" << e.code_name() << "] " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[internal_error] " << e.what() << "\n";
    return 6;
  }
  return 1;
}
