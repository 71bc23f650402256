#pragma once

// Bagged regression forest built from scratch: axis-aligned CART splits by
// (weighted) variance reduction over a random feature subset per node,
// subsampling without replacement, and an honest mode that grows structure
// on one half of the subsample and fills leaf values from the other half.
//
// Split thresholds sit at midpoints of adjacent sorted feature values and
// ties in gain break toward the lowest feature index, then the lowest
// threshold, so the induced partitions are invariant under strictly
// increasing transforms of any single feature.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hte/common/matrix.hpp"

namespace hte::learners {

class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForestParams {
  int n_trees = 2000;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf = 5;
  int mtry = 0;  // 0 = ceil(sqrt(d))
  bool honest = false;
  double bootstrap_fraction = 0.5;  // subsample share, drawn without replacement
  bool keep_inbag = false;          // record per-tree subsamples (enables OOB prediction)
  std::uint64_t seed = 0;
  int n_threads = 1;  // tree i always derives its stream from (seed, i)
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::vector<std::size_t>> inbag;  // sorted subsample per tree when keep_inbag
  std::size_t n_features = 0;
  double y_min = 0.0;  // training-label range; predictions stay inside it
  double y_max = 0.0;
  bool degenerate = false;     // n < 2*min_leaf: single-leaf constant trees
  int empty_leaf_fallbacks = 0;  // honest leaves that inherited an ancestor value
};

// weights may be empty (unweighted). Throws LearnerError on length mismatch;
// a training set too small to split yields a flagged single-leaf model.
ForestModel fit_forest(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                       const ForestParams& params);

// Honest forest over residualized data (y_residual = Y - m_hat, w_residual =
// W - e_hat) whose leaves solve the local moment
// Sum(w_res * y_res) / Sum(w_res^2); splits score per-sample moment
// contributions at the parent estimate. The range metadata holds the min/max
// training pseudo-outcome y_res/w_res, which bounds every prediction.
ForestModel fit_moment_forest(const Matrix& x, std::span<const double> y_residual,
                              std::span<const double> w_residual, const ForestParams& params);

std::vector<double> predict_forest(const ForestModel& model, const Matrix& x);
double predict_forest_row(const ForestModel& model, std::span<const double> row);

// Out-of-bag predictions over the training matrix the model was fitted on:
// row i is averaged over the trees whose subsample excluded i. Rows in every
// bag fall back to the full-forest prediction. Requires keep_inbag.
std::vector<double> predict_forest_oob(const ForestModel& model, const Matrix& x_train);

}  // namespace hte::learners
