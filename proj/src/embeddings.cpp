#include "corelw/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>

#include "corelw/error.hpp"
#include "corelw/rng.hpp"

namespace corelw {

EmbeddingTable::EmbeddingTable(int dim, std::uint64_t oov_seed)
    : dim_(dim), oov_seed_(oov_seed) {
  if (dim <= 0) throw ConfigError("embedding dim must be positive");
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, int dim,
                                    std::uint64_t oov_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open embedding file: " + path.string());
  EmbeddingTable table(dim, oov_seed);
  std::string line;
  Eigen::VectorXd vec(dim);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0) {
      ++table.skipped_lines_;
      continue;
    }
    const char* p = line.data() + sp + 1;
    const char* end = line.data() + line.size();
    bool ok = true;
    for (int k = 0; k < dim; ++k) {
      while (p < end && *p == ' ') ++p;
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc{} || !std::isfinite(value)) {
        ok = false;
        break;
      }
      vec[k] = value;
      p = next;
    }
    if (ok) {
      while (p < end && *p == ' ') ++p;
      if (p != end) ok = false;  // extra values: dim mismatch
    }
    if (!ok) {
      ++table.skipped_lines_;
      continue;
    }
    table.vectors_[line.substr(0, sp)] = vec;
  }
  if (table.vectors_.empty()) {
    throw LoadError(path.string() + ": no valid embedding lines for dim " +
                    std::to_string(dim));
  }
  return table;
}

Eigen::VectorXd EmbeddingTable::make_oov(const std::string& token) const {
  Rng rng(hash64(token) ^ (oov_seed_ * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = rng.uniform(-0.05, 0.05);
  return v;
}

Eigen::VectorXd EmbeddingTable::vector(const std::string& token) const {
  auto it = vectors_.find(token);
  if (it != vectors_.end()) return it->second;
  {
    std::shared_lock lock(*oov_mutex_);
    auto oit = oov_cache_.find(token);
    if (oit != oov_cache_.end()) return oit->second;
  }
  Eigen::VectorXd v = make_oov(token);
  std::unique_lock lock(*oov_mutex_);
  return oov_cache_.emplace(token, std::move(v)).first->second;
}

SifWeights compute_sif(const std::vector<const Document*>& docs, double a) {
  if (a <= 0.0) throw ConfigError("sif smoothing constant a must be positive");
  if (docs.empty()) throw ConfigError("compute_sif needs a nonempty corpus");
  SifWeights sif;
  sif.a = a;
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const Document* doc : docs) {
    for (const auto& tok : doc->tokens) {
      ++counts[tok];
      ++total;
    }
  }
  sif.frequencies.reserve(counts.size());
  for (const auto& [tok, count] : counts) {
    sif.frequencies[tok] = static_cast<double>(count) / static_cast<double>(total);
  }
  return sif;
}

SifWeights compute_sif(const Corpus& corpus, double a) {
  std::vector<const Document*> docs;
  docs.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) docs.push_back(&d);
  return compute_sif(docs, a);
}

EmbeddedDoc embed_document(const Document& doc, const EmbeddingTable& table,
                           const SifWeights& sif) {
  if (doc.tokens.empty()) {
    throw InternalError("embed_document: document '" + doc.id + "' has no tokens");
  }
  EmbeddedDoc out;
  out.id = doc.id;
  out.score = doc.score;
  out.matrix.resize(table.dim(), static_cast<Eigen::Index>(doc.tokens.size()));
  for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
    out.matrix.col(static_cast<Eigen::Index>(t)) =
        sif.weight(doc.tokens[t]) * table.vector(doc.tokens[t]);
  }
  return out;
}

}  // namespace corelw
