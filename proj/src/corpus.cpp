#include "corelw/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "corelw/error.hpp"
#include "corelw/rng.hpp"
#include "corelw/stemmer.hpp"

namespace corelw {
namespace {

struct Utf8Cursor {
  std::string_view s;
  std::size_t i = 0;

  bool done() const { return i >= s.size(); }

  // Decodes the next codepoint; invalid bytes are passed through one at a
  // time so that binary junk cannot derail the tokenizer.
  char32_t next() {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
      ++i;
      return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
      len = 2;
      cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
      len = 3;
      cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      ++i;
      return b0;
    }
    if (i + len > s.size()) {
      ++i;
      return b0;
    }
    for (int k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xc0) != 0x80) {
        ++i;
        return b0;
      }
      cp = (cp << 6) | (bk & 0x3f);
    }
    i += len;
    return cp;
  }
};

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
    case 0x00a0: case 0x1680: case 0x2028: case 0x2029: case 0x202f:
    case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

bool is_punct_cp(char32_t cp) {
  if (cp < 0x80) {
    const char c = static_cast<char>(cp);
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
           (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
  }
  switch (cp) {
    case 0x00a1: case 0x00a7: case 0x00ab: case 0x00b6: case 0x00b7:
    case 0x00bb: case 0x00bf:
      return true;
    default:
      // General Punctuation block, minus its space separators.
      return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205e);
  }
}

char32_t lower_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 32;  // Latin-1
  return cp;
}

std::vector<std::string> tokenize_pre_stopword(std::string_view text,
                                               const PreprocessConfig& cfg) {
  std::string cleaned;
  cleaned.reserve(text.size());
  Utf8Cursor cur{text};
  while (!cur.done()) {
    char32_t cp = cur.next();
    if (cfg.lowercase) cp = lower_cp(cp);
    if (cfg.strip_punctuation && is_punct_cp(cp)) {
      cleaned.push_back(' ');
    } else if (is_space_cp(cp)) {
      cleaned.push_back(' ');
    } else {
      append_utf8(cleaned, cp);
    }
  }
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    while (pos < cleaned.size() && cleaned[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < cleaned.size() && cleaned[end] != ' ') ++end;
    if (end > pos) tokens.emplace_back(cleaned.substr(pos, end - pos));
    pos = end;
  }
  return tokens;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (remove_stopwords && stopword_list.empty()) {
    throw ConfigError("remove_stopwords is set but the stopword list is empty");
  }
  if (max_tokens && *max_tokens == 0) {
    throw ConfigError("max_tokens must be positive when set");
  }
}

std::uint64_t PreprocessConfig::config_hash() const {
  std::string canon;
  canon += lowercase ? "L1" : "L0";
  canon += strip_punctuation ? "P1" : "P0";
  canon += remove_stopwords ? "S1" : "S0";
  canon += stem ? "T1" : "T0";
  canon += "M";
  canon += max_tokens ? std::to_string(*max_tokens) : "-";
  for (const auto& w : stopword_list) {
    canon += '|';
    canon += w;
  }
  return hash64(canon);
}

std::vector<std::string> preprocess(std::string_view text, const PreprocessConfig& cfg) {
  std::vector<std::string> tokens = tokenize_pre_stopword(text, cfg);
  if (cfg.remove_stopwords) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (auto& t : tokens) {
      if (cfg.stopword_list.find(t) == cfg.stopword_list.end()) {
        kept.push_back(std::move(t));
      }
    }
    tokens = std::move(kept);
  }
  if (cfg.stem) {
    for (auto& t : tokens) t = porter_stem(t);
  }
  if (cfg.max_tokens && tokens.size() > *cfg.max_tokens) {
    tokens.resize(*cfg.max_tokens);
  }
  return tokens;
}

std::size_t raw_token_count(std::string_view text, const PreprocessConfig& cfg) {
  return tokenize_pre_stopword(text, cfg).size();
}

CorpusFormat corpus_format_from_string(std::string_view s) {
  if (s == "csv") return CorpusFormat::csv;
  if (s == "jsonl") return CorpusFormat::jsonl;
  throw ConfigError("unknown corpus format '" + std::string(s) + "' (expected csv or jsonl)");
}

namespace {

struct RawRecord {
  std::string id;
  std::string text;
  long long score = 0;
  std::size_t line = 0;
};

// RFC 4180 style reader: quoted fields, "" escapes, newlines allowed inside
// quotes.
std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::string& name) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (in_quotes) throw LoadError(name + ": unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<RawRecord> read_csv_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open corpus file: " + path.string());
  auto rows = read_csv(in, path.string());
  if (rows.empty()) throw LoadError(path.string() + ": empty corpus file");
  const auto& header = rows.front();
  if (header.size() != 3 || header[0] != "id" || header[1] != "score" || header[2] != "text") {
    throw LoadError(path.string() + ": expected header 'id,score,text'");
  }
  std::vector<RawRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
    if (row.size() != 3) {
      throw LoadError(path.string() + ": record " + std::to_string(r) + " has " +
                      std::to_string(row.size()) + " fields, expected 3");
    }
    RawRecord rec;
    rec.id = row[0];
    rec.text = row[2];
    rec.line = r;
    try {
      std::size_t used = 0;
      rec.score = std::stoll(row[1], &used);
      if (used != row[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw LoadError(path.string() + ": record " + std::to_string(r) + " (id '" + rec.id +
                      "') has non-integer score '" + row[1] + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RawRecord> read_jsonl_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open corpus file: " + path.string());
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ": line " + std::to_string(lineno) +
                      " is not valid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("score") ||
        !obj.contains("text") || !obj["id"].is_string() || !obj["text"].is_string() ||
        !obj["score"].is_number_integer()) {
      throw LoadError(path.string() + ": line " + std::to_string(lineno) +
                      " must be an object with string id, integer score, string text");
    }
    RawRecord rec;
    rec.id = obj["id"].get<std::string>();
    rec.text = obj["text"].get<std::string>();
    rec.score = obj["score"].get<long long>();
    rec.line = lineno;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const PreprocessConfig& cfg, std::optional<int> num_levels,
                   bool allow_empty) {
  cfg.validate();
  if (num_levels && *num_levels < 2) {
    throw ConfigError("num_levels must be >= 2");
  }
  auto records = format == CorpusFormat::csv ? read_csv_records(path)
                                             : read_jsonl_records(path);
  if (records.empty() && !allow_empty) {
    throw LoadError(path.string() + ": corpus has no records");
  }

  Corpus corpus;
  corpus.documents.reserve(records.size());
  std::unordered_set<std::string> seen_ids;
  long long max_score = 0;

  std::size_t raw_sum = 0, tok_sum = 0;
  std::size_t raw_max = 0, tok_max = 0;
  std::size_t raw_min = std::numeric_limits<std::size_t>::max();
  std::size_t tok_min = std::numeric_limits<std::size_t>::max();

  for (auto& rec : records) {
    if (!seen_ids.insert(rec.id).second) {
      throw ValidationError(path.string() + ": duplicate document id '" + rec.id + "'");
    }
    if (rec.score < 1) {
      throw ValidationError("document '" + rec.id + "' has score " +
                            std::to_string(rec.score) + " below the minimum level 1");
    }
    if (num_levels && rec.score > *num_levels) {
      throw ValidationError("document '" + rec.id + "' has score " +
                            std::to_string(rec.score) + " above num_levels " +
                            std::to_string(*num_levels));
    }
    max_score = std::max(max_score, rec.score);

    Document doc;
    doc.id = std::move(rec.id);
    doc.text = std::move(rec.text);
    doc.score = static_cast<int>(rec.score);
    doc.tokens = preprocess(doc.text, cfg);
    if (doc.tokens.empty()) {
      throw ValidationError("document '" + doc.id + "' is empty after preprocessing");
    }
    const std::size_t raw_len = raw_token_count(doc.text, cfg);
    raw_sum += raw_len;
    raw_max = std::max(raw_max, raw_len);
    raw_min = std::min(raw_min, raw_len);
    tok_sum += doc.tokens.size();
    tok_max = std::max(tok_max, doc.tokens.size());
    tok_min = std::min(tok_min, doc.tokens.size());
    corpus.documents.push_back(std::move(doc));
  }

  corpus.num_levels =
      num_levels ? *num_levels : static_cast<int>(std::max<long long>(2, max_score));
  corpus.provenance = path.string() + "#" + std::to_string(cfg.config_hash());
  corpus.stats.num_documents = corpus.documents.size();
  if (!corpus.documents.empty()) {
    const double n = static_cast<double>(corpus.documents.size());
    corpus.stats.tokens = {static_cast<double>(tok_sum) / n, tok_max, tok_min};
    corpus.stats.tokens_with_stopwords = {static_cast<double>(raw_sum) / n, raw_max,
                                          raw_min};
  }
  return corpus;
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stopword file: " + path.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    words.insert(line.substr(start));
  }
  return words;
}

}  // namespace corelw
