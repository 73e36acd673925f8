#include "conjure/trace_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "conjure/errors.hpp"

namespace conjure {

using ordered_json = nlohmann::ordered_json;

void write_trace(std::ostream& out, const ScoreDifferenceTrace& trace) {
  trace.validate();
  for (const auto& r : trace.records) {
    ordered_json j;
    j["pair"] = {trace.pair[0], trace.pair[1]};
    j["iter"] = r.iter;
    j["dir"] = r.dir == Direction::Y1 ? "y1" : "y2";
    j["sq_gaps"] = r.sq_gaps;
    j["seed"] = r.seed;
    j["meta"] = {{"model", trace.meta.model},
                 {"T", trace.meta.steps},
                 {"guidance", trace.meta.guidance},
                 {"schedule", trace.meta.schedule}};
    out << j.dump() << '\n';
  }
}

void write_trace(const std::filesystem::path& path, const ScoreDifferenceTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace " + path.string());
  write_trace(out, trace);
}

namespace {

const std::set<std::string> kRecordKeys{"pair", "iter", "dir", "sq_gaps", "seed", "meta"};
const std::set<std::string> kMetaKeys{"model", "T", "guidance", "schedule"};

}  // namespace

TraceReadResult read_trace(std::istream& in) {
  TraceReadResult result;
  auto& trace = result.trace;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  std::set<std::pair<std::size_t, Direction>> seen;
  std::set<std::string> warned;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("record must be a JSON object", lineno);
    try {
      for (const auto& [key, _] : j.items())
        if (!kRecordKeys.count(key) && warned.insert(key).second) result.warnings.push_back("unknown key '" + key + "'");

      const auto& pair = j.at("pair");
      if (!pair.is_array() || pair.size() != 2) throw ParseError("pair must be a two-element array", lineno);
      const std::array<std::string, 2> p{pair[0].get<std::string>(), pair[1].get<std::string>()};

      const auto& meta = j.at("meta");
      TraceMeta m;
      m.model = meta.at("model").get<std::string>();
      m.steps = meta.at("T").get<std::size_t>();
      m.guidance = meta.at("guidance").get<double>();
      m.schedule = meta.at("schedule").get<std::string>();
      for (const auto& [key, _] : meta.items())
        if (!kMetaKeys.count(key) && warned.insert("meta." + key).second)
          result.warnings.push_back("unknown key 'meta." + key + "'");

      if (first) {
        trace.pair = p;
        trace.meta = m;
        first = false;
      } else if (p != trace.pair || m.model != trace.meta.model || m.steps != trace.meta.steps ||
                 m.guidance != trace.meta.guidance || m.schedule != trace.meta.schedule) {
        throw ParseError("pair or meta differs from earlier records", lineno);
      }

      TraceRecord r;
      const auto iter = j.at("iter").get<long long>();
      if (iter < 1) throw ParseError("iter must be >= 1", lineno);
      r.iter = static_cast<std::size_t>(iter);
      const auto dir = j.at("dir").get<std::string>();
      if (dir == "y1") {
        r.dir = Direction::Y1;
      } else if (dir == "y2") {
        r.dir = Direction::Y2;
      } else {
        throw ParseError("dir must be \"y1\" or \"y2\"", lineno);
      }
      const auto& gaps = j.at("sq_gaps");
      if (!gaps.is_array()) throw ParseError("sq_gaps must be an array", lineno);
      for (const auto& g : gaps) {
        if (!g.is_number()) throw ParseError("sq_gaps entries must be numbers (NaN is rejected)", lineno);
        const double v = g.get<double>();
        if (!std::isfinite(v) || v < 0.0) throw ParseError("sq_gaps entries must be finite and >= 0", lineno);
        r.sq_gaps.push_back(v);
      }
      if (r.sq_gaps.size() != m.steps)
        throw ParseError("sq_gaps has " + std::to_string(r.sq_gaps.size()) + " entries, meta.T is " +
                             std::to_string(m.steps),
                         lineno);
      r.seed = j.at("seed").get<std::uint64_t>();
      if (!seen.insert({r.iter, r.dir}).second) throw ParseError("duplicate record for iteration/direction", lineno);
      trace.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), lineno);
    }
  }
  // whole-trace problems are reported at the last line read
  const std::size_t last = std::max<std::size_t>(lineno, 1);
  if (trace.records.empty()) throw ParseError("trace is empty", last);
  try {
    trace.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), last);
  }
  return result;
}

TraceReadResult read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path.string());
  try {
    return read_trace(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::map<std::pair<std::string, std::string>, ScoreDifferenceTrace> load_trace_directory(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("trace directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::map<std::pair<std::string, std::string>, ScoreDifferenceTrace> out;
  for (const auto& f : files) {
    auto read = read_trace(f);
    auto key = std::make_pair(read.trace.pair[0], read.trace.pair[1]);
    if (out.count(key)) throw Error("two trace files for pair (" + key.first + ", " + key.second + ")");
    out.emplace(std::move(key), std::move(read.trace));
  }
  return out;
}

std::string trace_file_name(const std::string& a, const std::string& b) {
  auto clean = [](const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out.substr(0, 60);
  };
  return "trace_" + clean(a) + "__" + clean(b) + ".jsonl";
}

}  // namespace conjure
