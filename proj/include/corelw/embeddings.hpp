#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "corelw/corpus.hpp"

namespace corelw {

// Pre-trained word vectors in GloVe text format, frozen after load.
// Out-of-vocabulary tokens get a cached vector derived from
// (token hash, oov_seed), uniform in [-0.05, 0.05]^dim, so lookups are
// reproducible across runs and processes.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::uint64_t oov_seed);

  static EmbeddingTable load(const std::filesystem::path& path, int dim,
                             std::uint64_t oov_seed);

  int dim() const { return dim_; }
  std::size_t vocab_size() const { return vectors_.size(); }
  std::size_t skipped_lines() const { return skipped_lines_; }
  bool contains(const std::string& token) const {
    return vectors_.find(token) != vectors_.end();
  }

  // Thread-safe; misses are generated under a writer lock.
  Eigen::VectorXd vector(const std::string& token) const;

  // Pre-generates OOV vectors for a token range so later parallel lookups
  // are read-only.
  template <typename Iter>
  void warm(Iter begin, Iter end) const {
    for (Iter it = begin; it != end; ++it) (void)vector(*it);
  }

 private:
  Eigen::VectorXd make_oov(const std::string& token) const;

  int dim_;
  std::uint64_t oov_seed_;
  std::size_t skipped_lines_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
  mutable std::unordered_map<std::string, Eigen::VectorXd> oov_cache_;
  // Behind a pointer so the table stays movable.
  std::unique_ptr<std::shared_mutex> oov_mutex_ = std::make_unique<std::shared_mutex>();
};

// Smooth inverse frequency weights: weight(w) = a / (a + p(w)) with p(w)
// the token's relative frequency in the training corpus. Unseen tokens get
// the zero-frequency limit, weight 1.
struct SifWeights {
  double a = 1e-3;
  double default_weight = 1.0;
  std::unordered_map<std::string, double> frequencies;

  double weight(const std::string& token) const {
    auto it = frequencies.find(token);
    if (it == frequencies.end()) return default_weight;
    return a / (a + it->second);
  }
};

SifWeights compute_sif(const std::vector<const Document*>& docs, double a);
SifWeights compute_sif(const Corpus& corpus, double a);

struct EmbeddedDoc {
  std::string id;
  Eigen::MatrixXd matrix;  // d_w x N, column t = sif(w_t) * vec(w_t)
  int score = 0;
};

EmbeddedDoc embed_document(const Document& doc, const EmbeddingTable& table,
                           const SifWeights& sif);

}  // namespace corelw
