#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "conjure/analytic.hpp"
#include "conjure/condition.hpp"
#include "conjure/toy_net.hpp"

namespace conjure {

// Label hierarchy; leaves are prompts. Written as nested parentheses, e.g.
// "((puppy,poodle),(kitten,tabby))".
struct LabelTree {
  std::string label;  // leaves only
  std::vector<LabelTree> children;

  bool is_leaf() const { return children.empty(); }
  std::vector<std::string> leaves() const;
  std::string to_string() const;
  LabelTree mirrored() const;

  static LabelTree parse(std::string_view text);
};

struct WorldParams {
  std::size_t dim = 2;
  double separation = 4.0;  // distance between the root's children
  double shrink = 0.3;      // child radius / parent radius
  double leaf_scale = 0.3;  // isotropic std of every leaf Gaussian
  std::uint64_t seed = 0;
};

/// Synthetic prompts with Gaussian image distributions placed along a label
/// tree. Ground truth is the 2-Wasserstein distance between leaf Gaussians,
/// which is ||m_i - m_j|| for equal isotropic scales.
struct SemanticWorld {
  LabelTree tree;
  WorldParams params;
  Vocabulary vocabulary;  // leaves in tree order, ids 1..n
  std::vector<GaussianConditionSpec> specs;
  std::vector<int> cluster;        // index of the root child containing each leaf
  Eigen::MatrixXd ground_truth;    // W2 distances
  Eigen::MatrixXd tree_distance;   // edges between leaves

  std::size_t size() const { return specs.size(); }
  GaussianModel analytic_model() const { return GaussianModel(vocabulary, specs); }
  LabeledDataset sample_dataset(std::size_t per_leaf, std::uint64_t seed) const;

  void save(const std::filesystem::path& path) const;
  static SemanticWorld load(const std::filesystem::path& path);
};

/// Places leaf means so Euclidean distance is monotone in tree distance.
/// Geometry depends only on the label sets (not child order), so a mirrored
/// tree yields the same placement with the leaf order reversed.
SemanticWorld gen_semantic_world(const LabelTree& tree, const WorldParams& params);

// Two 4-leaf clusters of two sibling pairs each.
LabelTree default8_tree();
SemanticWorld default8_world(std::uint64_t seed = 0);

// Fraction of triplets (i, j, l) with tree(i,j) < tree(i,l) whose ground
// truth orders the same way.
double triplet_consistency(const SemanticWorld& world);

}  // namespace conjure
