// conjure: command-line front end for the path-divergence semantic distances.
//
// Machine-readable results go to stdout (JSON) or to the files named by the
// output flags; a short human summary goes to stderr unless --quiet.
// Exit codes: 0 success, 1 runtime error, 2 usage error (including bad values
// such as unknown labels or malformed priors).

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conjure/alignment.hpp"
#include "conjure/analytic.hpp"
#include "conjure/errors.hpp"
#include "conjure/estimators.hpp"
#include "conjure/guidance.hpp"
#include "conjure/matrix.hpp"
#include "conjure/oracle.hpp"
#include "conjure/parallel.hpp"
#include "conjure/reports.hpp"
#include "conjure/sde.hpp"
#include "conjure/toy_net.hpp"
#include "conjure/trace_io.hpp"
#include "conjure/world.hpp"

namespace fs = std::filesystem;
using namespace conjure;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // model source: analytic world scores unless a checkpoint or traces are given
  std::string world = "default8";
  std::string checkpoint;
  std::string traces;

  std::size_t steps = 10;
  std::size_t k = 5;
  std::string prior = "uniform";
  std::string method = "conjure";
  double guidance = 1.0;
  std::uint64_t seed = 0;
  std::size_t substeps = 1;
  double beta_min = 0.1;
  double beta_max = 20.0;
  std::size_t threads = default_threads();
  bool quiet = false;

  // subcommand specific
  std::string a, b;
  std::string out;
  std::string out_dir = ".";
  std::string svg;
  std::string dataset;
  double score_min = 0.0, score_max = 5.0;
  std::string param;
  std::vector<std::string> values;
  std::vector<std::string> trace_files;
  bool no_trace = false;
  std::string dump_trajectories;
  bool gaussian = false, gmm = false;

  // gen-world / train-toy
  std::string tree;
  std::size_t dim = 2;
  double separation = 4.0;
  double shrink = 0.3;
  double leaf_scale = 0.3;
  std::size_t per_leaf = 1000;
  std::size_t epochs = 150;
  std::size_t batch = 256;
  double lr = 2e-3;
};

void summary(const RunConfig& cfg, const std::string& text) {
  if (!cfg.quiet) std::cerr << text << '\n';
}

void emit(const ordered_json& j, const std::string& path = {}) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
  }
}

DiffusionSchedule make_schedule(const RunConfig& cfg, std::optional<std::size_t> steps = std::nullopt) {
  return DiffusionSchedule(steps.value_or(cfg.steps), cfg.beta_min, cfg.beta_max);
}

EstimatorOptions make_options(const RunConfig& cfg) {
  EstimatorOptions o;
  o.k = cfg.k;
  o.prior = TimestepPrior::parse(cfg.prior);
  o.seed = cfg.seed;
  o.substeps = cfg.substeps;
  o.threads = cfg.threads;
  return o;
}

SemanticWorld load_world(const std::string& spec) {
  if (spec == "default8") return default8_world();
  if (!fs::exists(spec)) throw UsageError("--world: '" + spec + "' is neither 'default8' nor an existing file");
  return SemanticWorld::load(spec);
}

// The score model chosen by the flags, plus the optional guidance wrapper.
class ModelSource {
 public:
  ModelSource(const RunConfig& cfg, const SemanticWorld& world, const DiffusionSchedule& schedule) {
    if (!cfg.traces.empty()) throw UsageError("this subcommand needs a score model, not --traces");
    if (!cfg.checkpoint.empty()) {
      auto net = std::make_unique<ToyScoreNet>(ToyScoreNet::load(cfg.checkpoint, schedule));
      for (const auto& c : world.vocabulary.entries())
        if (!net->vocabulary().contains(c.id) || net->vocabulary().by_id(c.id).display != c.display)
          throw Error("checkpoint vocabulary does not match the world's labels");
      base_ = std::move(net);
    } else {
      base_ = std::make_unique<GaussianModel>(world.analytic_model());
    }
    if (cfg.guidance != 1.0) guided_ = std::make_unique<GuidedModel>(*base_, cfg.guidance);
  }

  const ConditionalScoreModel& model() const {
    return guided_ ? static_cast<const ConditionalScoreModel&>(*guided_) : *base_;
  }

 private:
  std::unique_ptr<ConditionalScoreModel> base_;
  std::unique_ptr<GuidedModel> guided_;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

void dump_trajectories_csv(const std::string& path, const ConditionalScoreModel& model, const ConditionId& y1,
                           const ConditionId& y2, const DiffusionSchedule& schedule, const EstimatorOptions& o) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "iter,prompt,step,t";
  for (std::size_t i = 0; i < model.dim(); ++i) out << ",x" << i;
  out << '\n';
  const EulerMaruyama sampler(o.substeps);
  for (std::size_t it = 0; it < o.k; ++it) {
    const std::uint64_t seed = derive_seed(o.seed, it);
    Rng rng(seed);
    const Vector xT = standard_normal(static_cast<Eigen::Index>(model.dim()), rng);
    const auto noise = draw_noise(model.dim(), schedule.steps(), sampler.draws_per_step(), rng);
    for (const auto* y : {&y1, &y2}) {
      const Trajectory traj = reverse_denoise(xT, *y, model, schedule, noise, sampler, seed);
      for (std::size_t s = 0; s < traj.states.size(); ++s) {
        out << it + 1 << ',' << y->display << ',' << schedule.steps() - s << ',' << traj.times[s];
        for (Eigen::Index i = 0; i < traj.states[s].size(); ++i) out << ',' << traj.states[s][i];
        out << '\n';
      }
    }
  }
}

int cmd_gen_world(const RunConfig& cfg) {
  WorldParams p;
  p.dim = cfg.dim;
  p.separation = cfg.separation;
  p.shrink = cfg.shrink;
  p.leaf_scale = cfg.leaf_scale;
  p.seed = cfg.seed;
  const LabelTree tree = cfg.tree.empty() || cfg.tree == "default8" ? default8_tree() : LabelTree::parse(cfg.tree);
  const SemanticWorld world = gen_semantic_world(tree, p);
  const std::string path = cfg.out.empty() ? "world.json" : cfg.out;
  world.save(path);
  ordered_json j;
  j["world"] = path;
  j["tree"] = tree.to_string();
  j["labels"] = tree.leaves();
  j["triplet_consistency"] = triplet_consistency(world);
  emit(j);
  summary(cfg, "wrote " + path + " (" + std::to_string(world.size()) + " leaves, triplet consistency " +
                   fmt(triplet_consistency(world)) + ")");
  return 0;
}

int cmd_train_toy(const RunConfig& cfg) {
  const SemanticWorld world = load_world(cfg.world);
  const DiffusionSchedule schedule = make_schedule(cfg);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.learning_rate = cfg.lr;
  tc.seed = cfg.seed;
  const LabeledDataset data = world.sample_dataset(cfg.per_leaf, derive_seed(cfg.seed, 1));
  const ToyScoreNet net = train_toy(data, schedule, tc);
  const std::string path = cfg.out.empty() ? "toy_net.json" : cfg.out;
  net.save(path);
  ordered_json j;
  j["checkpoint"] = path;
  j["parameters"] = net.parameter_count();
  j["training"] = to_json(net.log());
  emit(j);
  summary(cfg, "trained " + std::to_string(net.parameter_count()) + " parameters for " + std::to_string(tc.epochs) +
                   " epochs, validation DSM loss " + fmt(net.log().validation_loss) + " -> " + path);
  return 0;
}

int cmd_distance(const RunConfig& cfg) {
  const Method method = parse_method(cfg.method);
  const EstimatorOptions o = make_options(cfg);
  ordered_json j;
  if (!cfg.traces.empty()) {
    if (method != Method::Conjure) throw UsageError("--traces only supports --method conjure");
    const auto traces = load_trace_directory(cfg.traces);
    auto it = traces.find({cfg.a, cfg.b});
    if (it == traces.end()) it = traces.find({cfg.b, cfg.a});
    if (it == traces.end()) throw Error("no trace for (" + cfg.a + ", " + cfg.b + ") in " + cfg.traces);
    const auto est = estimate_from_trace(it->second, o.prior);
    j = to_json(est);
    j["trace"] = nullptr;
    emit(j);
    summary(cfg, "distance(" + cfg.a + ", " + cfg.b + ") = " + fmt(est.value));
    return 0;
  }

  const SemanticWorld world = load_world(cfg.world);
  const DiffusionSchedule schedule = make_schedule(cfg);
  const ModelSource source(cfg, world, schedule);
  const ConditionId& y1 = world.vocabulary.by_label(cfg.a);
  const ConditionId& y2 = world.vocabulary.by_label(cfg.b);

  DistanceEstimate est;
  std::string trace_path;
  if (method == Method::Conjure) {
    const auto trace = conjure_trace(source.model(), y1, y2, schedule, o, cfg.guidance);
    est = estimate_from_trace(trace, o.prior);
    if (!cfg.no_trace) {
      fs::create_directories(cfg.out_dir);
      trace_path = (fs::path(cfg.out_dir) / trace_file_name(cfg.a, cfg.b)).string();
      write_trace(trace_path, trace);
    }
  } else {
    est = estimate(method, source.model(), y1, y2, schedule, o);
  }
  if (!cfg.dump_trajectories.empty()) dump_trajectories_csv(cfg.dump_trajectories, source.model(), y1, y2, schedule, o);

  j = to_json(est);
  j["trace"] = trace_path.empty() ? ordered_json(nullptr) : ordered_json(trace_path);
  j["settings"] = describe_settings(method, schedule, o);
  emit(j);
  summary(cfg, to_string(method) + "(" + cfg.a + ", " + cfg.b + ") = " + fmt(est.value) +
                   (est.std_error ? " +- " + fmt(*est.std_error) : std::string()));
  return 0;
}

int cmd_matrix(const RunConfig& cfg) {
  const Method method = parse_method(cfg.method);
  const SemanticWorld world = load_world(cfg.world);
  const DiffusionSchedule schedule = make_schedule(cfg);
  const ModelSource source(cfg, world, schedule);
  const SimilarityMatrix m = pairwise_matrix(source.model(), world.vocabulary, method, schedule, make_options(cfg));
  const std::string path = cfg.out.empty() ? "matrix.csv" : cfg.out;
  write_matrix_csv(path, m);
  if (!cfg.svg.empty()) write_matrix_svg(cfg.svg, m);
  const ClusterStats cs = cluster_stats(m, world.cluster);
  ordered_json j;
  j["matrix"] = path;
  j["settings"] = m.settings;
  j["within_cluster_mean"] = cs.within_mean;
  j["between_cluster_mean"] = cs.between_mean;
  j["alignment"] = evaluate_alignment(world, m);
  emit(j);
  summary(cfg, "wrote " + path + "; within-cluster mean " + fmt(cs.within_mean) + ", between-cluster mean " +
                   fmt(cs.between_mean));
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  ordered_json j;
  if (!cfg.traces.empty() || !cfg.dataset.empty()) {
    if (cfg.traces.empty() || cfg.dataset.empty()) throw UsageError("trace evaluation needs both --traces and --dataset");
    const auto ds = load_pairs_tsv(fs::path(cfg.dataset), ScoreRange{cfg.score_min, cfg.score_max});
    const auto traces = load_trace_directory(cfg.traces);
    const auto prior = TimestepPrior::parse(cfg.prior);
    const double score = evaluate_alignment(ds, traces, prior);
    j["dataset"] = ds.name;
    j["pairs"] = ds.size();
    j["prior"] = prior.to_string();
    j["alignment"] = score;
    emit(j);
    summary(cfg, ds.name + ": Spearman x100 = " + fmt(score, 4) + " over " + std::to_string(ds.size()) + " pairs");
    return 0;
  }
  const Method method = parse_method(cfg.method);
  const SemanticWorld world = load_world(cfg.world);
  const DiffusionSchedule schedule = make_schedule(cfg);
  const ModelSource source(cfg, world, schedule);
  const EstimatorOptions o = make_options(cfg);
  const double score = evaluate_alignment(world, source.model(), method, schedule, o);
  j["world"] = cfg.world;
  j["model"] = source.model().name();
  j["settings"] = describe_settings(method, schedule, o);
  j["alignment"] = score;
  emit(j);
  summary(cfg, "alignment (Spearman x100) = " + fmt(score, 4));
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  const AblationParameter param = parse_ablation_parameter(cfg.param);
  AblationReport report;
  if (!cfg.traces.empty() || !cfg.dataset.empty()) {
    if (cfg.traces.empty() || cfg.dataset.empty()) throw UsageError("trace ablation needs both --traces and --dataset");
    const auto ds = load_pairs_tsv(fs::path(cfg.dataset), ScoreRange{cfg.score_min, cfg.score_max});
    report = ablate(param, cfg.values, ds, load_trace_directory(cfg.traces), TimestepPrior::parse(cfg.prior));
  } else {
    const SemanticWorld world = load_world(cfg.world);
    const DiffusionSchedule schedule = make_schedule(cfg);
    const ModelSource source(cfg, world, schedule);
    report = ablate(param, cfg.values, world, source.model(), parse_method(cfg.method), schedule, make_options(cfg));
  }
  // timings only go to the report file so stdout stays reproducible
  if (!cfg.out.empty()) emit(to_json(report), cfg.out);
  emit(to_json(report, false));
  std::string line = "ablation over " + report.parameter + ":";
  for (std::size_t i = 0; i < report.values.size(); ++i) line += " " + report.values[i] + "=" + fmt(report.scores[i], 4);
  summary(cfg, line);
  return 0;
}

int cmd_oracle_check(const RunConfig& cfg) {
  const DiffusionSchedule schedule = make_schedule(cfg);
  EstimatorOptions o = make_options(cfg);
  ordered_json reports = ordered_json::array();
  bool pass = true;
  if (cfg.gaussian) {
    const GaussianConditionSpec s1{Vector::Unit(2, 0), 1.0};
    const GaussianConditionSpec s2{Vector::Unit(2, 1), 1.0};
    const GaussianModel model(Vocabulary::from_labels({"m1", "m2"}), {s1, s2});
    const auto est = conjure_distance(model, model.vocabulary()[0], model.vocabulary()[1], schedule, o);
    const auto r = oracle::compare_exact("gaussian closed form", oracle::gaussian_conjure_closed_form(s1, s2, schedule, o.prior), est, 1e-8);
    pass = pass && r.pass;
    reports.push_back(to_json(r));
  }
  if (cfg.gmm) {
    const GMMConditionSpec g1({{0.5, Vector::Constant(1, -1.5), 0.4}, {0.5, Vector::Constant(1, 1.5), 0.4}});
    const GMMConditionSpec g2({{0.7, Vector::Constant(1, -1.0), 0.5}, {0.3, Vector::Constant(1, 2.0), 0.3}});
    const MixtureModel model(Vocabulary::from_labels({"g1", "g2"}), {g1, g2});
    if (o.substeps == 1) o.substeps = 50;
    if (o.k < 200) o.k = 200;
    const auto est = conjure_distance(model, model.vocabulary()[0], model.vocabulary()[1], schedule, o);
    const auto r = oracle::compare_statistical("gmm quadrature", oracle::gmm_expected_gap(g1, g2, schedule, o.prior), est, 3.0);
    pass = pass && r.pass;
    reports.push_back(to_json(r));
  }
  ordered_json j;
  j["pass"] = pass;
  j["reports"] = reports;
  emit(j);
  summary(cfg, std::string("oracle check ") + (pass ? "passed" : "FAILED"));
  return pass ? 0 : 1;
}

int cmd_ingest_trace(const RunConfig& cfg) {
  const auto prior = TimestepPrior::parse(cfg.prior);
  ordered_json out = ordered_json::array();
  for (const auto& f : cfg.trace_files) {
    const auto read = read_trace(fs::path(f));
    auto j = to_json(estimate_from_trace(read.trace, prior));
    j["file"] = f;
    j["meta"] = {{"model", read.trace.meta.model},
                 {"T", read.trace.meta.steps},
                 {"guidance", read.trace.meta.guidance},
                 {"schedule", read.trace.meta.schedule}};
    j["warnings"] = read.warnings;
    out.push_back(j);
    summary(cfg, f + ": distance " + fmt(j["value"].get<double>()) +
                     (read.warnings.empty() ? "" : " (" + std::to_string(read.warnings.size()) + " warnings)"));
  }
  emit(out.size() == 1 ? out[0] : out);
  return 0;
}

// ---- argument plumbing ----

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggestion(const CLI::App& app, const std::vector<std::string>& extras) {
  const CLI::App* scope = &app;
  for (const auto* sub : app.get_subcommands()) scope = sub;
  std::string best;
  std::size_t best_d = 4;
  for (const auto& extra : extras) {
    if (extra.rfind("--", 0) != 0) continue;
    const std::string name = extra.substr(2, extra.find('=') - 2);
    for (const auto* opt : scope->get_options())
      for (const auto& lname : opt->get_lnames()) {
        const std::size_t d = edit_distance(name, lname);
        if (d < best_d) {
          best_d = d;
          best = "--" + lname;
        }
      }
  }
  return best.empty() ? std::string() : " (did you mean " + best + "?)";
}

// Flat key=value config: each key is a long flag name; '#' starts a comment.
// Keys already present on the command line are skipped (flags win).
std::vector<std::string> config_arguments(const std::string& path, const std::vector<std::string>& args) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value == "true") {
      out.push_back(flag);
    } else if (value != "false") {
      out.push_back(flag + "=" + value);
    }
  }
  return out;
}

void add_common(CLI::App* sub, RunConfig& cfg, bool model_flags) {
  sub->add_option("--T", cfg.steps, "Number of diffusion grid steps")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--k", cfg.k, "Monte-Carlo iterations")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--prior", cfg.prior, "Timestep prior: uniform | cumulative:<s> | pointwise:<s>")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Master seed")->envname("CONJURE_SEED")->capture_default_str();
  sub->add_option("--substeps", cfg.substeps, "Euler-Maruyama substeps per grid interval")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--beta-min", cfg.beta_min, "VP schedule beta_min")->capture_default_str();
  sub->add_option("--beta-max", cfg.beta_max, "VP schedule beta_max")->capture_default_str();
  if (model_flags) {
    sub->add_option("--world", cfg.world, "Semantic world: 'default8' or a world JSON file")->capture_default_str();
    auto* ck = sub->add_option("--checkpoint", cfg.checkpoint, "Trained toy score net (JSON checkpoint)");
    auto* tr = sub->add_option("--traces", cfg.traces, "Directory of score-difference trace files (*.jsonl)");
    ck->excludes(tr);
    sub->add_option("--method", cfg.method, "conjure | kl | initial | final | output")->capture_default_str();
    sub->add_option("--guidance", cfg.guidance, "Classifier-free guidance scale (1 = none)")->capture_default_str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"conjure: semantic distances between prompts from diffusion path divergences"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", cfg.threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("-q,--quiet", cfg.quiet, "Suppress the human-readable summary on stderr");
  std::string config_path;
  app.add_option("--config", config_path, "Flat key=value file of subcommand flags (flags take precedence)");

  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic semantic world");
  gen->add_option("--tree", cfg.tree, "Label tree, e.g. ((a,b),(c,d)); default: default8");
  gen->add_option("--dim", cfg.dim, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--separation", cfg.separation, "Distance between top-level clusters")->capture_default_str();
  gen->add_option("--shrink", cfg.shrink, "Radius ratio between tree levels, in (0, 0.5)")->capture_default_str();
  gen->add_option("--leaf-scale", cfg.leaf_scale, "Std of every leaf Gaussian")->capture_default_str();
  gen->add_option("--seed", cfg.seed, "Placement seed")->envname("CONJURE_SEED")->capture_default_str();
  gen->add_option("--out", cfg.out, "Output world JSON (default world.json)");

  auto* train = app.add_subcommand("train-toy", "Train the toy conditional score network on a world");
  add_common(train, cfg, false);
  train->add_option("--world", cfg.world, "Semantic world: 'default8' or a world JSON file")->capture_default_str();
  train->add_option("--per-leaf", cfg.per_leaf, "Training samples per leaf")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--batch", cfg.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--out", cfg.out, "Checkpoint path (default toy_net.json)");

  auto* dist = app.add_subcommand("distance", "Distance between two prompts");
  add_common(dist, cfg, true);
  dist->add_option("--a", cfg.a, "First prompt label")->required();
  dist->add_option("--b", cfg.b, "Second prompt label")->required();
  dist->add_option("--out-dir", cfg.out_dir, "Directory for the emitted trace")->capture_default_str();
  dist->add_flag("--no-trace", cfg.no_trace, "Do not write the trace file");
  dist->add_option("--dump-trajectories", cfg.dump_trajectories, "Write the paired trajectories as CSV");

  auto* mat = app.add_subcommand("matrix", "Pairwise distance matrix over a world's prompts");
  add_common(mat, cfg, true);
  mat->add_option("--out", cfg.out, "Matrix CSV (default matrix.csv)");
  mat->add_option("--svg", cfg.svg, "Optional SVG heatmap");

  auto* ev = app.add_subcommand("eval", "Alignment (Spearman x100) against ground truth or annotations");
  add_common(ev, cfg, true);
  ev->add_option("--dataset", cfg.dataset, "Annotated pairs TSV (text_a, text_b, score)");
  ev->add_option("--score-min", cfg.score_min, "Lower end of the dataset's score scale")->capture_default_str();
  ev->add_option("--score-max", cfg.score_max, "Upper end of the dataset's score scale")->capture_default_str();

  auto* abl = app.add_subcommand("ablate", "Sweep prior, k or T and report alignment per value");
  add_common(abl, cfg, true);
  abl->add_option("--param", cfg.param, "prior | k | T")->required();
  abl->add_option("--values", cfg.values, "Values to sweep (comma separated)")->delimiter(',')->required();
  abl->add_option("--dataset", cfg.dataset, "Annotated pairs TSV (with --traces)");
  abl->add_option("--score-min", cfg.score_min, "Lower end of the dataset's score scale")->capture_default_str();
  abl->add_option("--score-max", cfg.score_max, "Upper end of the dataset's score scale")->capture_default_str();
  abl->add_option("--out", cfg.out, "Report JSON with per-value runtimes (stdout omits them)");

  auto* orc = app.add_subcommand("oracle-check", "Compare estimators against closed-form / quadrature oracles");
  add_common(orc, cfg, false);
  orc->add_flag("--gaussian", cfg.gaussian, "Gaussian closed-form check");
  orc->add_flag("--gmm", cfg.gmm, "Gaussian-mixture quadrature check (k >= 200, 50 substeps)");

  auto* ing = app.add_subcommand("ingest-trace", "Validate trace files and estimate their distances");
  ing->add_option("--trace", cfg.trace_files, "Trace file(s)")->required()->check(CLI::ExistingFile);
  ing->add_option("--prior", cfg.prior, "Timestep prior")->capture_default_str();

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    // splice config-file flags right after the subcommand name
    std::vector<std::string> forward(args.rbegin(), args.rend());
    std::string cfg_file;
    for (std::size_t i = 0; i < forward.size(); ++i) {
      if (forward[i] == "--config" && i + 1 < forward.size()) cfg_file = forward[i + 1];
      if (forward[i].rfind("--config=", 0) == 0) cfg_file = forward[i].substr(9);
    }
    if (!cfg_file.empty()) {
      const auto extra = config_arguments(cfg_file, forward);
      auto it = std::find_if(forward.begin(), forward.end(), [&](const std::string& a) { return app.get_subcommand_no_throw(a) != nullptr; });
      if (it != forward.end()) forward.insert(it + 1, extra.begin(), extra.end());
    }
    args.assign(forward.rbegin(), forward.rend());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    std::cerr << "usage error: " << e.what() << suggestion(app, std::vector<std::string>(args.rbegin(), args.rend())) << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_gen_world(cfg);
    if (*train) return cmd_train_toy(cfg);
    if (*dist) return cmd_distance(cfg);
    if (*mat) return cmd_matrix(cfg);
    if (*ev) return cmd_eval(cfg);
    if (*abl) return cmd_ablate(cfg);
    if (*orc) {
      if (!cfg.gaussian && !cfg.gmm) throw UsageError("oracle-check needs --gaussian and/or --gmm");
      return cmd_oracle_check(cfg);
    }
    if (*ing) return cmd_ingest_trace(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    // bad labels, priors, methods, ... are argument problems
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
