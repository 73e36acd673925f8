#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "conjure/dataset.hpp"
#include "conjure/errors.hpp"
#include "conjure/stats.hpp"

using namespace conjure;

namespace {

std::size_t tsv_error_line(const std::string& text, ScoreRange range = {}) {
  std::istringstream in(text);
  try {
    load_pairs_tsv(in, "t", range);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("spearman") {
  using V = std::vector<double>;
  CHECK(spearman(V{1, 2, 3}, V{1, 2, 3}) == doctest::Approx(1.0));
  CHECK(spearman(V{1, 2, 3}, V{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(V{1, 2, 3, 4, 5}, V{1, 3, 2, 5, 4}) == doctest::Approx(0.8));
  // rank only: any increasing transform leaves it unchanged
  CHECK(spearman(V{0.1, 5, 2, 9}, V{3, 1, 4, 1.5}) == spearman(V{0.01, 25, 4, 81}, V{3, 1, 4, 1.5}));

  CHECK(average_ranks(V{10, 20, 20, 30}) == V{1, 2.5, 2.5, 4});
  CHECK(average_ranks(V{3, 3, 3}) == V{2, 2, 2});
  // ties use average ranks, so this is the Pearson correlation of the ranks
  CHECK(spearman(V{1, 2, 2, 3}, V{1, 2, 3, 4}) == doctest::Approx(pearson(V{1, 2.5, 2.5, 4}, V{1, 2, 3, 4})));

  CHECK_THROWS_AS(spearman(V{1, 1, 1}, V{1, 2, 3}), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(V{1, 2, 3}, V{4, 4, 4}), UndefinedCorrelation);
  CHECK_THROWS_AS(spearman(V{1, 2}, V{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(spearman(V{1}, V{1}), std::invalid_argument);
}

TEST_CASE("pair TSV") {
  SUBCASE("plain rows") {
    std::istringstream in("a dog\ta puppy\t4.2\nthe sky\tthe sea\t1\ntwo cats\ta car\t0.0\n");
    const auto ds = load_pairs_tsv(in, "toy");
    REQUIRE(ds.size() == 3);
    CHECK(ds.name == "toy");
    CHECK(ds.rows[0].text_a == "a dog");
    CHECK(ds.rows[0].text_b == "a puppy");
    CHECK(ds.rows[0].score == 4.2);
    CHECK(ds.rows[2].line == 3);
  }
  SUBCASE("header and CRLF") {
    std::istringstream in("sentence1\tsentence2\tscore\r\nx\ty\t2.5\r\n");
    const auto ds = load_pairs_tsv(in);
    REQUIRE(ds.size() == 1);
    CHECK(ds.rows[0].text_b == "y");
    CHECK(ds.rows[0].line == 2);
  }
  SUBCASE("rescaling from another range") {
    std::istringstream in("x\ty\t10\nx\tz\t4\n");
    const auto ds = load_pairs_tsv(in, "simlex", ScoreRange{0.0, 10.0});
    CHECK(ds.rows[0].score == 5.0);
    CHECK(ds.rows[1].score == 2.0);
  }
  CHECK(tsv_error_line("a\tb\t1\nc\td\t6.0\n") == 2);
  CHECK(tsv_error_line("a\tb\t1\nc\td\n") == 2);
  CHECK(tsv_error_line("a\tb\t1\tx\n") == 1);
  CHECK(tsv_error_line("a\tb\tnan\n") == 1);
  CHECK(tsv_error_line("a\tb\t1\nc\td\tfive\n") == 2);
  CHECK(tsv_error_line("a\tb\t-1\n") == 1);
  CHECK(tsv_error_line("") >= 1);
  CHECK(tsv_error_line("x\ty\t11\n", ScoreRange{0.0, 10.0}) == 1);
}

TEST_CASE("pair TSV from disk keeps one row per line") {
  const auto path = std::filesystem::temp_directory_path() / "conjure_pairs_test.tsv";
  {
    std::ofstream out(path);
    for (int i = 0; i < 40; ++i) out << "left " << i << "\tright " << i << "\t" << (i % 6) * 0.9 << "\n";
  }
  const auto ds = load_pairs_tsv(path);
  CHECK(ds.size() == 40);
  CHECK(ds.name == "conjure_pairs_test");
  CHECK(ds.source == path.string());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_pairs_tsv(path), Error);
}
