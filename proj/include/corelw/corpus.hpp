#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace corelw {

// Pipeline order is fixed: lowercase -> strip punctuation -> whitespace
// tokenize -> stopword filter -> stem.
struct PreprocessConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool remove_stopwords = true;
  bool stem = true;
  std::set<std::string> stopword_list;
  std::optional<std::size_t> max_tokens;

  void validate() const;
  std::uint64_t config_hash() const;
};

std::vector<std::string> preprocess(std::string_view text, const PreprocessConfig& cfg);

// Token count after lowercase/punctuation/tokenize but before the stopword
// filter; the dataset-summary "length before stopword removal".
std::size_t raw_token_count(std::string_view text, const PreprocessConfig& cfg);

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  int score = 0;
};

struct LengthStats {
  double avg = 0.0;
  std::size_t max = 0;
  std::size_t min = 0;
};

struct CorpusStats {
  std::size_t num_documents = 0;
  LengthStats tokens;          // after the full pipeline
  LengthStats tokens_with_stopwords;  // before stopword removal / stemming
};

struct Corpus {
  std::vector<Document> documents;
  int num_levels = 0;
  std::string provenance;  // "<path>#<config hash>"
  CorpusStats stats;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat corpus_format_from_string(std::string_view s);

// Loads and preprocesses a scored-document corpus. When num_levels is not
// given, M is inferred as max(2, highest score seen). A corpus with zero
// records is an error unless allow_empty is set (prediction inputs may be
// vacuous).
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const PreprocessConfig& cfg,
                   std::optional<int> num_levels = std::nullopt,
                   bool allow_empty = false);

// Stopword file: one token per line, UTF-8, '#' comments allowed.
std::set<std::string> load_stopwords(const std::filesystem::path& path);

}  // namespace corelw
