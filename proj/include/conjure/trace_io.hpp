#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "conjure/estimators.hpp"

namespace conjure {

// JSON-lines trace format, one record per (iteration, direction):
//   {"pair":[a,b],"iter":i,"dir":"y1"|"y2","sq_gaps":[T floats],"seed":u64,
//    "meta":{"model":str,"T":int,"guidance":float,"schedule":str}}
// sq_gaps are in denoising order (step T first). Doubles are written in the
// shortest form that round-trips.

void write_trace(std::ostream& out, const ScoreDifferenceTrace& trace);
void write_trace(const std::filesystem::path& path, const ScoreDifferenceTrace& trace);

struct TraceReadResult {
  ScoreDifferenceTrace trace;
  std::vector<std::string> warnings;  // non-fatal oddities (unknown keys, ...)
};

// Throws ParseError (with line number) on malformed JSON, missing fields,
// non-numeric or negative gaps, inconsistent pair/meta, missing directions.
TraceReadResult read_trace(std::istream& in);
TraceReadResult read_trace(const std::filesystem::path& path);

// Every *.jsonl file in `dir`, keyed by its prompt pair.
std::map<std::pair<std::string, std::string>, ScoreDifferenceTrace> load_trace_directory(
    const std::filesystem::path& dir);

// File-system friendly stem for a prompt pair.
std::string trace_file_name(const std::string& a, const std::string& b);

}  // namespace conjure
