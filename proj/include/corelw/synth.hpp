#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace corelw {

// Seeded generator of scored synthetic documents. Higher levels get longer
// texts, denser connective and hedging vocabulary, richer noun pools and
// fewer bald-assertion markers, so an ordinal scorer has graded signal to
// learn; text keeps stopwords and punctuation for the preprocessing
// pipeline to remove.
struct SynthRecord {
  std::string id;
  int score = 0;
  std::string text;
};

std::vector<SynthRecord> generate_synthetic(int size, int levels, std::uint64_t seed);

void write_synthetic_csv(const std::filesystem::path& path,
                         const std::vector<SynthRecord>& records);

}  // namespace corelw
