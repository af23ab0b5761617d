#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "corelw/corpus.hpp"
#include "corelw/encoders.hpp"
#include "corelw/eval.hpp"
#include "corelw/ot.hpp"
#include "corelw/training.hpp"

namespace corelw {

// Full run configuration with the published experimental defaults
// (lr 0.01, batch 408, 5 epochs, 8 triplets/anchor, dims 300, window 3,
// K = 7). Parsed strictly: unknown keys abort.
struct RunConfig {
  // preprocessing
  bool lowercase = true;
  bool strip_punctuation = true;
  bool remove_stopwords = true;
  bool stem = true;
  std::string stopwords_path;  // empty -> bundled default list
  std::size_t max_tokens = 0;  // 0 -> no cap
  std::string corpus_format = "csv";
  int num_levels = 0;  // 0 -> infer from data

  // embeddings
  std::string embedding_path;  // empty -> deterministic hash vectors
  int embedding_dim = 300;
  double sif_a = 1e-3;
  std::uint64_t oov_seed = 1234;

  // encoder
  std::string encoder = "cnn";
  int d_h = 300;
  int d_c = 300;
  int window = 3;
  std::uint64_t encoder_seed = 1;
  bool paper_exact_cell = false;
  bool batch_norm = true;

  // sinkhorn
  double sinkhorn_epsilon_scale = 0.1;
  double sinkhorn_epsilon_abs = 0.0;  // 0 -> use scale
  int sinkhorn_max_iters = 500;
  double sinkhorn_tolerance = 1e-6;

  // training
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

  // scoring / evaluation
  int knn_k = 7;
  bool baseline_train_head = false;
  int repeats = 10;
  double train_fraction = 0.7;
  bool stratified = true;
  int min_occurrences = 2;

  int threads = 0;  // 0 -> hardware concurrency

  void apply(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);

  // Derived views.
  PreprocessConfig preprocess_config(const std::set<std::string>& stopwords) const;
  EncoderConfig encoder_config() const;
  SinkhornSettings sinkhorn_settings() const;
  TrainConfig train_config() const;
  SplitPlan split_plan() const;

  // Canonical key=value rendering of every field, for echo files and run ids.
  std::map<std::string, std::string> as_map() const;
  std::string echo() const;
};

}  // namespace corelw
