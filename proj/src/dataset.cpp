#include "conjure/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "conjure/errors.hpp"

namespace conjure {

namespace {

bool parse_double(const std::string& text, double& out) {
  std::size_t b = text.find_first_not_of(" \r");
  std::size_t e = text.find_last_not_of(" \r");
  if (b == std::string::npos) return false;
  const char* first = text.data() + b;
  const char* last = text.data() + e + 1;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

AnnotatedPairDataset load_pairs_tsv(std::istream& in, const std::string& name, ScoreRange range) {
  if (!(range.hi > range.lo)) throw std::invalid_argument("score range must satisfy lo < hi");
  AnnotatedPairDataset ds;
  ds.name = name;
  ds.source = name;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 3)
      throw ParseError("expected 3 tab-separated columns, found " + std::to_string(cols.size()), lineno);
    double score = 0.0;
    if (!parse_double(cols[2], score)) {
      if (ds.rows.empty() && lineno == 1) continue;  // header
      throw ParseError("score '" + cols[2] + "' is not a number", lineno);
    }
    if (!std::isfinite(score) || score < range.lo || score > range.hi)
      throw ParseError("score " + cols[2] + " outside [" + std::to_string(range.lo) + ", " +
                           std::to_string(range.hi) + "]",
                       lineno);
    if (cols[0].empty() || cols[1].empty()) throw ParseError("empty text column", lineno);
    ds.rows.push_back({cols[0], cols[1], 5.0 * (score - range.lo) / (range.hi - range.lo), lineno});
  }
  if (ds.rows.empty()) throw ParseError("dataset has no rows", std::max<std::size_t>(lineno, 1));
  return ds;
}

AnnotatedPairDataset load_pairs_tsv(const std::filesystem::path& path, ScoreRange range) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());
  try {
    auto ds = load_pairs_tsv(in, path.stem().string(), range);
    ds.source = path.string();
    return ds;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

}  // namespace conjure
