#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace conjure {

struct AnnotatedPair {
  std::string text_a;
  std::string text_b;
  double score = 0.0;  // similarity in [0, 5]
  std::size_t line = 0;
};

struct AnnotatedPairDataset {
  std::string name;
  std::string source;
  std::vector<AnnotatedPair> rows;

  std::size_t size() const { return rows.size(); }
};

struct ScoreRange {
  double lo = 0.0;
  double hi = 5.0;
};

// text_a<TAB>text_b<TAB>score per line, optional header line. Scores must lie
// in `range` and are rescaled linearly onto [0, 5] (identity for the default).
// Throws ParseError with the offending line number.
AnnotatedPairDataset load_pairs_tsv(std::istream& in, const std::string& name = "pairs", ScoreRange range = {});
AnnotatedPairDataset load_pairs_tsv(const std::filesystem::path& path, ScoreRange range = {});

}  // namespace conjure
