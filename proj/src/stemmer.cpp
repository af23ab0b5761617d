#include "corelw/stemmer.hpp"

#include <array>
#include <cstddef>

namespace corelw {
namespace {

bool is_vowel_char(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// y counts as a consonant at position 0 or after a vowel, else as a vowel.
bool is_consonant(const std::string& w, std::size_t i) {
  const char c = w[i];
  if (is_vowel_char(c)) return false;
  if (c == 'y') return i == 0 || !is_consonant(w, i - 1);
  return true;
}

// The measure m of [C](VC)^m[V].
int measure(const std::string& w, std::size_t len) {
  int m = 0;
  std::size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  for (;;) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) return m;
    while (i < len && is_consonant(w, i)) ++i;
    ++m;
    if (i >= len) return m;
  }
}

bool contains_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) {
    if (!is_consonant(w, i)) return true;
  }
  return false;
}

bool double_consonant_end(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// *o: ends consonant-vowel-consonant where the final consonant is not w/x/y.
bool cvc_end(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) {
    return false;
  }
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, std::string_view suf) {
  return w.size() >= suf.size() &&
         w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
}

int stem_measure(const std::string& w, std::string_view suf) {
  return measure(w, w.size() - suf.size());
}

void step1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // keep
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

void step1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (stem_measure(w, "eed") > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (ends_with(w, "ed") && contains_vowel(w, w.size() - 2)) {
    w.erase(w.size() - 2);
    stripped = true;
  } else if (ends_with(w, "ing") && contains_vowel(w, w.size() - 3)) {
    w.erase(w.size() - 3);
    stripped = true;
  }
  if (!stripped) return;
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (double_consonant_end(w)) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && cvc_end(w)) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && contains_vowel(w, w.size() - 1)) {
    w.back() = 'i';
  }
}

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
};

// Longest matching suffix wins; the replacement fires only when the stem
// measure condition holds.
void apply_rules(std::string& w, const Rule* rules, std::size_t n, int min_measure) {
  const Rule* best = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    if (ends_with(w, rules[i].suffix) &&
        (best == nullptr || rules[i].suffix.size() > best->suffix.size())) {
      best = &rules[i];
    }
  }
  if (best == nullptr) return;
  if (stem_measure(w, best->suffix) > min_measure) {
    w.erase(w.size() - best->suffix.size());
    w.append(best->replacement);
  }
}

constexpr std::array<Rule, 20> kStep2Rules = {{
    {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
    {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
    {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
    {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
    {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
}};

constexpr std::array<Rule, 7> kStep3Rules = {{
    {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
    {"ical", "ic"},  {"ful", ""},   {"ness", ""},
}};

constexpr std::array<std::string_view, 19> kStep4Suffixes = {
    "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant",  "ement", "ment",
    "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive",  "ize",
};

void step4(std::string& w) {
  std::string_view best;
  for (std::string_view suf : kStep4Suffixes) {
    if (ends_with(w, suf) && suf.size() > best.size()) best = suf;
  }
  if (best.empty()) return;
  const std::size_t stem_len = w.size() - best.size();
  if (measure(w, stem_len) <= 1) return;
  if (best == "ion") {
    if (stem_len == 0) return;
    const char c = w[stem_len - 1];
    if (c != 's' && c != 't') return;
  }
  w.erase(stem_len);
}

void step5(std::string& w) {
  if (ends_with(w, "e")) {
    const int m = measure(w, w.size() - 1);
    if (m > 1) {
      w.pop_back();
    } else if (m == 1) {
      std::string stem = w.substr(0, w.size() - 1);
      if (!cvc_end(stem)) w.pop_back();
    }
  }
  if (ends_with(w, "ll") && measure(w, w.size()) > 1) w.pop_back();
}

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string w(word);
  if (w.size() <= 2) return w;
  for (char c : w) {
    if (c < 'a' || c > 'z') return w;
  }
  step1a(w);
  step1b(w);
  step1c(w);
  apply_rules(w, kStep2Rules.data(), kStep2Rules.size(), 0);
  apply_rules(w, kStep3Rules.data(), kStep3Rules.size(), 0);
  step4(w);
  step5(w);
  return w;
}

}  // namespace corelw
