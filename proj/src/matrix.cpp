#include "conjure/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "conjure/errors.hpp"
#include "conjure/parallel.hpp"
#include "conjure/stats.hpp"

namespace conjure {

std::vector<double> SimilarityMatrix::upper_triangle() const {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = i + 1; j < values.cols(); ++j) out.push_back(values(i, j));
  return out;
}

std::string describe_settings(Method method, const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  std::ostringstream os;
  os << "method=" << to_string(method) << " T=" << schedule.steps() << " k=" << options.k
     << " prior=" << options.prior.to_string() << " seed=" << options.seed << " substeps=" << options.substeps;
  return os.str();
}

SimilarityMatrix pairwise_matrix(const ConditionalScoreModel& model, const Vocabulary& vocabulary, Method method,
                                 const DiffusionSchedule& schedule, const EstimatorOptions& options) {
  const std::size_t n = vocabulary.size();
  if (n < 2) throw std::invalid_argument("pairwise_matrix needs at least two prompts");
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i < j || (i > j && !is_symmetric(method))) jobs.emplace_back(i, j);

  SimilarityMatrix m;
  m.vocabulary = vocabulary;
  m.method = method;
  m.settings = describe_settings(method, schedule, options);
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  EstimatorOptions inner = options;
  inner.threads = 1;
  std::vector<double> results(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t q) {
    const auto [i, j] = jobs[q];
    try {
      results[q] = estimate(method, model, vocabulary[i], vocabulary[j], schedule, inner).value;
    } catch (const std::exception& e) {
      throw Error("pair (" + vocabulary[i].display + ", " + vocabulary[j].display + "): " + e.what());
    }
  });
  for (std::size_t q = 0; q < jobs.size(); ++q) {
    const auto [i, j] = jobs[q];
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(j);
    m.values(r, c) = results[q];
    if (is_symmetric(method)) m.values(c, r) = results[q];
  }
  return m;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

void write_matrix_csv(std::ostream& out, const SimilarityMatrix& m) {
  out << "label";
  for (const auto& c : m.vocabulary.entries()) out << ',' << csv_field(c.display);
  out << '\n';
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out << csv_field(m.vocabulary[static_cast<std::size_t>(i)].display);
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ',' << shortest(m.values(i, j));
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const SimilarityMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_matrix_csv(out, m);
}

void write_matrix_svg(const std::filesystem::path& path, const SimilarityMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const auto n = static_cast<int>(m.size());
  constexpr int cell = 40, margin = 90;
  const double top = m.values.maxCoeff() > 0.0 ? m.values.maxCoeff() : 1.0;
  const int size = margin + n * cell + 10;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i < n; ++i) {
    const auto& label = m.vocabulary[static_cast<std::size_t>(i)].display;
    out << "<text x=\"" << margin - 4 << "\" y=\"" << margin + i * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << label << "</text>\n";
    out << "<text transform=\"translate(" << margin + i * cell + cell / 2 + 4 << "," << margin - 4
        << ") rotate(-60)\">" << label << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const int shade = static_cast<int>(255.0 * std::clamp(m.values(i, j) / top, 0.0, 1.0));
      out << "<rect x=\"" << margin + j * cell << "\" y=\"" << margin + i * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << "," << shade << ")\"/>\n";
    }
  }
  out << "</svg>\n";
}

ClusterStats cluster_stats(const SimilarityMatrix& m, const std::vector<int>& cluster) {
  if (cluster.size() != m.size()) throw std::invalid_argument("cluster labels do not match the matrix");
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (cluster[i] == cluster[j]) {
        within += v;
        ++nw;
      } else {
        between += v;
        ++nb;
      }
    }
  if (nw == 0 || nb == 0) throw std::invalid_argument("cluster_stats needs within- and between-cluster pairs");
  return {within / static_cast<double>(nw), between / static_cast<double>(nb)};
}

double rank_stability(const std::vector<SimilarityMatrix>& matrices) {
  if (matrices.size() < 2) throw std::invalid_argument("rank_stability needs at least two matrices");
  double worst = 1.0;
  for (std::size_t a = 0; a < matrices.size(); ++a)
    for (std::size_t b = a + 1; b < matrices.size(); ++b)
      worst = std::min(worst, spearman(matrices[a].upper_triangle(), matrices[b].upper_triangle()));
  return worst;
}

}  // namespace conjure
