#include "corelw/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "corelw/error.hpp"
#include "corelw/rng.hpp"

namespace corelw {
namespace {

const std::vector<std::string> kFillers = {
    "the", "of", "a",  "and",  "to", "in",   "that", "was", "for", "with",
    "as",  "this", "which", "from", "at", "is", "on",   "be",  "were", "by"};

const std::vector<std::string> kNouns = {
    "enzyme",   "substrate",     "temperature", "reaction", "sample",  "culture",
    "membrane", "protein",       "gradient",    "rate",     "solution", "assay",
    "growth",   "yeast",         "glucose",     "bacteria", "plate",    "trial",
    "buffer",   "concentration", "pipette",     "incubation", "colony", "dilution"};

const std::vector<std::string> kVerbs = {
    "increased", "decreased", "observed", "measured",   "recorded",
    "changed",   "produced",  "showed",   "formed",     "reacted",
    "varied",    "remained",  "stabilized", "dropped",  "rose"};

const std::vector<std::string> kConnectives = {
    "however",      "moreover",     "therefore",    "consequently",
    "furthermore",  "whereas",      "nevertheless", "alternatively",
    "conversely",   "nonetheless",  "additionally", "accordingly"};

const std::vector<std::string> kHedges = {
    "possibly", "perhaps",     "might",       "could",     "suggests",   "likely",
    "appears",  "presumably",  "tentatively", "uncertain", "qualified",  "provisional"};

const std::vector<std::string> kEvidence = {
    "data",          "pattern",  "contradictory", "outliers",   "replicate",
    "correlation",   "hypotheses", "alternative", "inconsistency", "literature",
    "source",        "prior",    "external",      "comparison", "thought",
    "experiment"};

const std::vector<std::string> kSimplistic = {
    "proved", "correct", "true", "obvious", "simple", "matched", "expected", "confirmed"};

const std::vector<std::string> kAdvanced = {
    "confounding", "mechanism", "variability", "systematic",
    "interaction", "threshold", "saturation",  "kinetics"};

std::size_t graded_pool(const std::vector<std::string>& pool, double g) {
  const std::size_t lo = std::max<std::size_t>(2, pool.size() / 4);
  const std::size_t n =
      lo + static_cast<std::size_t>(std::llround(g * static_cast<double>(pool.size() - lo)));
  return std::min(n, pool.size());
}

std::vector<int> level_counts(int size, int levels) {
  // Binomial-shaped imbalance: extreme levels are rarer, like real rubric data.
  std::vector<double> weights(levels);
  double total = 0.0;
  for (int l = 0; l < levels; ++l) {
    double c = 1.0;
    for (int j = 0; j < l; ++j) c = c * (levels - 1 - j) / (j + 1);
    weights[l] = c;
    total += c;
  }
  std::vector<int> counts(levels, 0);
  int assigned = 0;
  for (int l = 0; l < levels; ++l) {
    counts[l] = std::max(1, static_cast<int>(std::floor(weights[l] / total * size)));
    assigned += counts[l];
  }
  // Distribute the remainder to the most common levels first.
  int l = levels / 2;
  while (assigned < size) {
    ++counts[l % levels];
    ++assigned;
    ++l;
  }
  while (assigned > size) {
    int big = 0;
    for (int j = 1; j < levels; ++j) {
      if (counts[j] > counts[big]) big = j;
    }
    --counts[big];
    --assigned;
  }
  return counts;
}

std::string make_text(int level, int levels, Rng& rng) {
  const double g = levels > 1 ? static_cast<double>(level - 1) / (levels - 1) : 0.0;
  const int target_words =
      static_cast<int>(std::llround((55.0 + 50.0 * g) * rng.uniform(0.9, 1.1)));

  const std::size_t noun_pool = graded_pool(kNouns, g);
  const std::size_t conn_pool = graded_pool(kConnectives, g);
  const std::size_t hedge_pool = graded_pool(kHedges, g);
  const std::size_t ev_pool = graded_pool(kEvidence, g);

  // Content-category weights; connective/hedging/evidence density rises
  // with the level, bald assertions fall.
  struct Category {
    const std::vector<std::string>* pool;
    std::size_t pool_n;
    double weight;
  };
  const double advanced_weight = g > 0.5 ? 0.05 * (g - 0.5) * 2.0 : 0.0;
  std::array<Category, 7> cats = {{
      {&kNouns, noun_pool, 0.40},
      {&kVerbs, kVerbs.size(), 0.22},
      {&kConnectives, conn_pool, 0.02 + 0.16 * g},
      {&kHedges, hedge_pool, 0.01 + 0.14 * g},
      {&kEvidence, ev_pool, 0.02 + 0.15 * g},
      {&kSimplistic, kSimplistic.size(), 0.15 - 0.13 * g},
      {&kAdvanced, kAdvanced.size(), advanced_weight},
  }};
  double total_weight = 0.0;
  for (const auto& c : cats) total_weight += c.weight;

  std::string text;
  int words = 0;
  int sentence_left = 8 + static_cast<int>(rng.uniform_int(7));
  bool sentence_start = true;
  while (words < target_words) {
    std::string word;
    if (rng.uniform() < 0.35) {
      word = kFillers[rng.uniform_int(kFillers.size())];
    } else {
      double r = rng.uniform() * total_weight;
      std::size_t chosen = 0;  // fall back to nouns on fp-boundary draws
      for (std::size_t ci = 0; ci < cats.size(); ++ci) {
        if (cats[ci].weight <= 0.0) continue;
        if (r < cats[ci].weight) {
          chosen = ci;
          break;
        }
        r -= cats[ci].weight;
      }
      word = (*cats[chosen].pool)[rng.uniform_int(cats[chosen].pool_n)];
    }
    if (!text.empty()) text.push_back(' ');
    if (sentence_start && !word.empty()) word[0] = static_cast<char>(word[0] - 'a' + 'A');
    text += word;
    sentence_start = false;
    ++words;
    --sentence_left;
    if (sentence_left <= 0) {
      text.push_back('.');
      sentence_left = 8 + static_cast<int>(rng.uniform_int(7));
      sentence_start = true;
    } else if (rng.uniform() < 0.06) {
      text.push_back(',');
    }
  }
  if (text.empty() || text.back() != '.') text.push_back('.');
  return text;
}

}  // namespace

std::vector<SynthRecord> generate_synthetic(int size, int levels, std::uint64_t seed) {
  if (levels < 2) throw ConfigError("synth: levels must be >= 2");
  if (size < levels) throw ConfigError("synth: size must be >= levels");

  Rng rng(seed ^ 0x73796e7468ULL);
  const std::vector<int> counts = level_counts(size, levels);

  std::vector<int> scores;
  scores.reserve(static_cast<std::size_t>(size));
  for (int l = 0; l < levels; ++l) {
    for (int c = 0; c < counts[l]; ++c) scores.push_back(l + 1);
  }
  rng.shuffle(scores);

  std::vector<SynthRecord> records;
  records.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    SynthRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth-%03u", static_cast<unsigned>(i + 1));
    rec.id = buf;
    rec.score = scores[i];
    rec.text = make_text(scores[i], levels, rng);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_synthetic_csv(const std::filesystem::path& path,
                         const std::vector<SynthRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write synthetic corpus: " + path.string());
  out << "id,score,text\n";
  for (const auto& rec : records) {
    out << rec.id << ',' << rec.score << ",\"";
    for (char c : rec.text) {
      if (c == '"') out << "\"\"";
      else out << c;
    }
    out << "\"\n";
  }
  if (!out) throw LoadError("failed writing synthetic corpus: " + path.string());
}

}  // namespace corelw
