#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "conjure/analytic.hpp"
#include "conjure/errors.hpp"
#include "conjure/estimators.hpp"
#include "conjure/trace_io.hpp"

using namespace conjure;
namespace fs = std::filesystem;

namespace {

// As written by the Python exporter: float32 gaps widened to double, guidance 7.5,
// a scheduler-derived schedule string and an extra key.
const char* kExporterTrace =
    R"({"pair": ["Snow Leopard", "Bengal Tiger"], "iter": 1, "dir": "y1", "sq_gaps": [0.30000001192092896, 1.2345678806304932, 2.5, 4.099999904632568, 8.0, 16.0, 31.5, 64.25, 128.0, 256.0], "seed": 18446744073709551615, "meta": {"model": "stable-diffusion-v1-5", "T": 10, "guidance": 7.5, "schedule": "diffusers:PNDMScheduler(scaled_linear,0.00085,0.012)/T=10"}, "prompt_template": "raw"}
{"pair": ["Snow Leopard", "Bengal Tiger"], "iter": 1, "dir": "y2", "sq_gaps": [0.25, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.5], "seed": 18446744073709551615, "meta": {"model": "stable-diffusion-v1-5", "T": 10, "guidance": 7.5, "schedule": "diffusers:PNDMScheduler(scaled_linear,0.00085,0.012)/T=10"}, "prompt_template": "raw"}
)";

std::string record(const std::string& dir, const std::string& gaps, int iter = 1, int T = 2,
                   const std::string& pair = R"(["a","b"])") {
  return R"({"pair":)" + pair + R"(,"iter":)" + std::to_string(iter) + R"(,"dir":")" + dir + R"(","sq_gaps":)" +
         gaps + R"(,"seed":3,"meta":{"model":"m","T":)" + std::to_string(T) +
         R"(,"guidance":1.0,"schedule":"s"}})";
}

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_trace(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("exporter-style trace") {
  std::istringstream in(kExporterTrace);
  const auto result = read_trace(in);
  const auto& t = result.trace;
  CHECK(t.pair[0] == "Snow Leopard");
  CHECK(t.pair[1] == "Bengal Tiger");
  CHECK(t.meta.guidance == 7.5);
  CHECK(t.meta.steps == 10);
  CHECK(t.iterations() == 1);
  CHECK(t.records[0].seed == 18446744073709551615ULL);
  CHECK(t.gaps(1, Direction::Y1)[0] == 0.30000001192092896);
  for (const auto& r : t.records) {
    CHECK(r.sq_gaps.size() == 10);
    for (double g : r.sq_gaps) CHECK(g > 0.0);
  }
  REQUIRE(result.warnings.size() >= 1);
  CHECK(result.warnings[0].find("prompt_template") != std::string::npos);

  const auto est = estimate_from_trace(t, TimestepPrior::pointwise(10));
  CHECK(est.value == doctest::Approx(0.30000001192092896 + 0.25));
}

TEST_CASE("write then read is lossless") {
  const auto vocab = Vocabulary::from_labels({"x", "y"});
  const MixtureModel model(vocab, {GMMConditionSpec({{0.3, Vector::Constant(1, -1.0), 0.5},
                                                     {0.7, Vector::Constant(1, 1.0), 0.2}}),
                                   GMMConditionSpec::single({Vector::Constant(1, 0.5), 0.7})});
  EstimatorOptions o;
  o.k = 6;
  o.seed = 77;
  const DiffusionSchedule s(10);
  const auto trace = conjure_trace(model, vocab[0], vocab[1], s, o);

  std::stringstream buffer;
  write_trace(buffer, trace);
  std::string first;
  std::getline(std::istringstream(buffer.str()) >> std::ws, first);
  CHECK(first.rfind(R"({"pair":["x","y"],"iter":1,"dir":"y1","sq_gaps":[)", 0) == 0);

  const auto back = read_trace(buffer).trace;
  REQUIRE(back.records.size() == trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    CHECK(back.records[i].sq_gaps == trace.records[i].sq_gaps);
    CHECK(back.records[i].seed == trace.records[i].seed);
  }
  CHECK(back.meta.schedule == s.id());
  CHECK(estimate_from_trace(back, o.prior).value == conjure_distance(model, vocab[0], vocab[1], s, o).value);
}

TEST_CASE("records may arrive in any order") {
  const std::string text = record("y2", "[1,1]", 2) + "\n" + record("y1", "[2,2]", 1) + "\n\n" +
                           record("y1", "[0,0]", 2) + "\n" + record("y2", "[3,3]", 1) + "\n";
  std::istringstream in(text);
  const auto t = read_trace(in).trace;
  CHECK(t.iterations() == 2);
  CHECK(estimate_from_trace(t, TimestepPrior::uniform_all()).value == 3.0);
}

TEST_CASE("malformed traces name the line") {
  const std::string ok1 = record("y1", "[1,2]");
  const std::string ok2 = record("y2", "[1,2]");
  CHECK(parse_error_line(ok1 + "\n" + "{not json\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", "[1,NaN]") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", R"([1,"2"])") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", "[1,-0.5]") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", "[1,2,3]") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y3", "[1,2]") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", "[1,2]", 1, 3) + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + record("y2", "[1,2]", 1, 2, R"(["a","c"])") + "\n") == 2);
  CHECK(parse_error_line(ok1 + "\n" + ok2 + "\n" + ok2 + "\n") == 3);
  CHECK(parse_error_line(ok1 + "\n" + R"({"pair":["a","b"],"iter":1})" + "\n") == 2);
  // missing direction is reported where the stream ends
  CHECK(parse_error_line(ok1 + "\n") >= 1);
  CHECK(parse_error_line("") >= 1);
}

TEST_CASE("trace directories") {
  const fs::path dir = fs::temp_directory_path() / "conjure_trace_dir_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK(trace_file_name("a dog", "a cat") == "trace_a_dog__a_cat.jsonl");
  {
    std::ofstream(dir / "one.jsonl") << kExporterTrace;
    std::ofstream(dir / "two.jsonl") << record("y1", "[1,2]") << "\n" << record("y2", "[1,2]") << "\n";
    std::ofstream(dir / "notes.txt") << "ignored\n";
  }
  const auto traces = load_trace_directory(dir);
  CHECK(traces.size() == 2);
  CHECK(traces.count({"Snow Leopard", "Bengal Tiger"}) == 1);
  CHECK(traces.count({"a", "b"}) == 1);

  std::ofstream(dir / "three.jsonl") << record("y1", "[5,5]") << "\n" << record("y2", "[5,5]") << "\n";
  CHECK_THROWS_AS(load_trace_directory(dir), Error);
  CHECK_THROWS_AS(load_trace_directory(dir / "missing"), Error);
  fs::remove_all(dir);
}
