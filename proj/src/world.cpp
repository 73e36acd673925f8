#include "conjure/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "conjure/errors.hpp"
#include "conjure/random.hpp"

namespace conjure {

std::vector<std::string> LabelTree::leaves() const {
  if (is_leaf()) return {label};
  std::vector<std::string> out;
  for (const auto& c : children) {
    auto sub = c.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::string LabelTree::to_string() const {
  if (is_leaf()) return label;
  std::string out = "(";
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (i) out += ",";
    out += children[i].to_string();
  }
  return out + ")";
}

LabelTree LabelTree::mirrored() const {
  LabelTree out = *this;
  std::reverse(out.children.begin(), out.children.end());
  for (auto& c : out.children) c = c.mirrored();
  return out;
}

LabelTree LabelTree::parse(std::string_view text) {
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  std::function<LabelTree()> node = [&]() -> LabelTree {
    skip();
    LabelTree t;
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      while (true) {
        t.children.push_back(node());
        skip();
        if (pos < text.size() && text[pos] == ',') {
          ++pos;
          continue;
        }
        if (pos < text.size() && text[pos] == ')') {
          ++pos;
          break;
        }
        throw std::invalid_argument("tree spec: expected ',' or ')' at offset " + std::to_string(pos));
      }
      return t;
    }
    const std::size_t start = pos;
    while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_' ||
                                 text[pos] == '-' || text[pos] == '.'))
      ++pos;
    if (pos == start) throw std::invalid_argument("tree spec: expected a label at offset " + std::to_string(pos));
    t.label = std::string(text.substr(start, pos - start));
    return t;
  };
  LabelTree root = node();
  skip();
  if (pos != text.size()) throw std::invalid_argument("tree spec: trailing characters at offset " + std::to_string(pos));
  return root;
}

namespace {

std::string label_key(const LabelTree& t) {
  auto l = t.leaves();
  std::sort(l.begin(), l.end());
  std::string key;
  for (const auto& s : l) key += s + ",";
  return key;
}

void place(const LabelTree& node, const Eigen::VectorXd& center, double radius, const WorldParams& p,
           std::map<std::string, Eigen::VectorXd>& means) {
  if (node.is_leaf()) {
    means[node.label] = center;
    return;
  }
  if (node.children.size() < 2) throw std::invalid_argument("every internal tree node needs >= 2 children");
  std::vector<const LabelTree*> kids;
  for (const auto& c : node.children) kids.push_back(&c);
  std::sort(kids.begin(), kids.end(), [](const LabelTree* a, const LabelTree* b) { return label_key(*a) < label_key(*b); });

  const auto d = static_cast<Eigen::Index>(p.dim);
  Rng rng(derive_seed(p.seed, fnv1a64(label_key(node))));
  Eigen::VectorXd u = standard_normal(d, rng);
  u.normalize();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  if (d >= 2) {
    w = standard_normal(d, rng);
    w -= w.dot(u) * u;
    w.normalize();
  }
  const std::size_t n = kids.size();
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXd offset;
    if (d == 1 || n == 2) {
      const double pos = n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
      offset = radius * pos * u;
    } else {
      const double theta = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      offset = radius * (std::cos(theta) * u + std::sin(theta) * w);
    }
    place(*kids[k], center + offset, radius * p.shrink, p, means);
  }
}

void tree_depths(const LabelTree& node, std::vector<std::string>& path_keys, std::map<std::string, std::vector<std::string>>& paths) {
  if (node.is_leaf()) {
    paths[node.label] = path_keys;
    return;
  }
  for (const auto& c : node.children) {
    path_keys.push_back(label_key(c));
    tree_depths(c, path_keys, paths);
    path_keys.pop_back();
  }
}

}  // namespace

SemanticWorld gen_semantic_world(const LabelTree& tree, const WorldParams& params) {
  if (params.dim == 0) throw std::invalid_argument("world dimension must be >= 1");
  if (!(params.separation > 0.0) || !(params.shrink > 0.0 && params.shrink < 0.5) || !(params.leaf_scale > 0.0))
    throw std::invalid_argument("world needs separation > 0, shrink in (0, 0.5), leaf_scale > 0");
  const auto labels = tree.leaves();
  if (labels.size() < 2) throw std::invalid_argument("world needs at least two leaves");

  SemanticWorld w;
  w.tree = tree;
  w.params = params;
  w.vocabulary = Vocabulary::from_labels(labels);

  std::map<std::string, Eigen::VectorXd> means;
  place(tree, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.dim)), 0.5 * params.separation, params, means);

  std::map<std::string, std::vector<std::string>> paths;
  std::vector<std::string> keys;
  tree_depths(tree, keys, paths);

  const auto n = static_cast<Eigen::Index>(labels.size());
  w.ground_truth.resize(n, n);
  w.tree_distance.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& li = labels[static_cast<std::size_t>(i)];
    w.specs.push_back({means.at(li), params.leaf_scale});
    w.cluster.push_back(0);
    for (std::size_t c = 0; c < tree.children.size(); ++c) {
      const auto sub = tree.children[c].leaves();
      if (std::find(sub.begin(), sub.end(), li) != sub.end()) w.cluster.back() = static_cast<int>(c);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      w.ground_truth(i, j) = i == j ? 0.0 : (w.specs[static_cast<std::size_t>(i)].mean - w.specs[static_cast<std::size_t>(j)].mean).norm();
      const auto& pi = paths.at(labels[static_cast<std::size_t>(i)]);
      const auto& pj = paths.at(labels[static_cast<std::size_t>(j)]);
      std::size_t common = 0;
      while (common < pi.size() && common < pj.size() && pi[common] == pj[common]) ++common;
      w.tree_distance(i, j) = static_cast<double>(pi.size() + pj.size() - 2 * common);
    }
  }
  return w;
}

LabelTree default8_tree() {
  return LabelTree::parse("(((puppy,poodle),(kitten,tabby)),((sedan,coupe),(bicycle,tandem)))");
}

SemanticWorld default8_world(std::uint64_t seed) {
  WorldParams p;
  p.seed = seed;
  return gen_semantic_world(default8_tree(), p);
}

double triplet_consistency(const SemanticWorld& world) {
  const auto n = static_cast<Eigen::Index>(world.size());
  std::size_t total = 0, agree = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index l = 0; l < n; ++l) {
        if (i == j || i == l || j == l) continue;
        if (!(world.tree_distance(i, j) < world.tree_distance(i, l))) continue;
        ++total;
        if (world.ground_truth(i, j) < world.ground_truth(i, l)) ++agree;
      }
  return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

LabeledDataset SemanticWorld::sample_dataset(std::size_t per_leaf, std::uint64_t seed) const {
  LabeledDataset ds;
  ds.vocabulary = vocabulary;
  Rng rng(seed);
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t s = 0; s < per_leaf; ++s) {
      ds.x0.push_back(specs[i].mean + specs[i].scale * standard_normal(specs[i].mean.size(), rng));
      ds.labels.push_back(vocabulary[i].id);
    }
  return ds;
}

void SemanticWorld::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["format"] = "conjure-semantic-world";
  j["version"] = 1;
  j["tree"] = tree.to_string();
  j["dim"] = params.dim;
  j["separation"] = params.separation;
  j["shrink"] = params.shrink;
  j["leaf_scale"] = params.leaf_scale;
  j["seed"] = params.seed;
  nlohmann::ordered_json leaves = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < specs.size(); ++i)
    leaves.push_back({{"id", vocabulary[i].id},
                      {"label", vocabulary[i].display},
                      {"mean", std::vector<double>(specs[i].mean.data(), specs[i].mean.data() + specs[i].mean.size())},
                      {"scale", specs[i].scale},
                      {"cluster", cluster[i]}});
  j["leaves"] = leaves;
  std::ofstream out(path);
  if (!out) throw Error("cannot write world " + path.string());
  out << j.dump(2) << '\n';
}

SemanticWorld SemanticWorld::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open world " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "conjure-semantic-world") throw Error("not a semantic world file");
    WorldParams p;
    p.dim = j.at("dim").get<std::size_t>();
    p.separation = j.at("separation").get<double>();
    p.shrink = j.at("shrink").get<double>();
    p.leaf_scale = j.at("leaf_scale").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    SemanticWorld w = gen_semantic_world(LabelTree::parse(j.at("tree").get<std::string>()), p);
    // stored means are authoritative (hand-edited worlds keep their geometry)
    for (const auto& leaf : j.at("leaves")) {
      const auto i = w.vocabulary.index_of(w.vocabulary.by_label(leaf.at("label").get<std::string>()).id).value();
      const auto mean = leaf.at("mean").get<std::vector<double>>();
      if (mean.size() != p.dim) throw Error("leaf mean has the wrong dimension");
      w.specs[i].mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      w.specs[i].scale = leaf.at("scale").get<double>();
      w.specs[i].validate();
    }
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t k = 0; k < w.size(); ++k) {
        const bool unequal = w.specs[i].scale != w.specs[k].scale;
        // W2 between isotropic Gaussians: sqrt(||dm||^2 + d (s_i - s_k)^2)
        const double ds = unequal ? w.specs[i].scale - w.specs[k].scale : 0.0;
        w.ground_truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            std::sqrt((w.specs[i].mean - w.specs[k].mean).squaredNorm() + static_cast<double>(p.dim) * ds * ds);
      }
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed world " + path.string() + ": " + e.what());
  }
}

}  // namespace conjure
