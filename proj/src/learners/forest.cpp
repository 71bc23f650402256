#include "hte/learners/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "hte/common/parallel.hpp"
#include "hte/common/rng.hpp"

namespace hte::learners {

namespace {

struct GrowSettings {
  int min_leaf = 5;
  int max_depth = 0;
  int mtry = 1;
};

// lo <= threshold < hi, so routing by (value <= threshold) reproduces the
// scanned partition bitwise even when the midpoint rounds onto an endpoint.
double midpoint_threshold(double lo, double hi) {
  double t = 0.5 * (lo + hi);
  if (!(t < hi) || t < lo) t = lo;
  return t;
}

// Split-statistics policy shared by the regression and moment forests.
// node_begin() caches node-level stats; score()/score_weight() expose the
// per-sample contributions rho_i and w_i whose split criterion is
// sum_side (Sum w*rho)^2 / (Sum w), and honest_terms() yields the
// numerator/denominator pair whose ratio is the leaf estimate.
class RegressionStats {
 public:
  RegressionStats(std::span<const double> y, std::span<const double> weights)
      : y_(y), weights_(weights) {}

  bool node_begin(std::span<const std::size_t> samples) {
    double num = 0.0, den = 0.0;
    for (std::size_t s : samples) {
      const double w = weight(s);
      num += w * y_[s];
      den += w;
    }
    value_ = den > 0.0 ? std::optional<double>(num / den) : std::nullopt;
    return true;
  }

  std::optional<double> node_value() const { return value_; }
  double score(std::size_t s) const { return y_[s]; }
  double score_weight(std::size_t s) const { return weight(s); }

  std::pair<double, double> honest_terms(std::size_t s) const {
    const double w = weight(s);
    return {w * y_[s], w};
  }

 private:
  double weight(std::size_t s) const { return weights_.empty() ? 1.0 : weights_[s]; }

  std::span<const double> y_;
  std::span<const double> weights_;
  std::optional<double> value_;
};

// Moment-forest statistics over residualized data (y_res = Y - m_hat,
// w_res = W - e_hat). Node estimate is Sum(w_res*y_res)/Sum(w_res^2); the
// split scores are the per-sample moment contributions
//   rho_i = (wr_i - mean_wr) * [(yr_i - mean_yr) - (wr_i - mean_wr) * tau_node] / var(wr)
// evaluated at the node's own tau estimate.
class MomentStats {
 public:
  MomentStats(std::span<const double> y_res, std::span<const double> w_res)
      : y_res_(y_res), w_res_(w_res) {}

  bool node_begin(std::span<const std::size_t> samples) {
    const double m = static_cast<double>(samples.size());
    double num = 0.0, den = 0.0, w_mean = 0.0, y_mean = 0.0;
    for (std::size_t s : samples) {
      num += w_res_[s] * y_res_[s];
      den += w_res_[s] * w_res_[s];
      w_mean += w_res_[s];
      y_mean += y_res_[s];
    }
    value_ = den > 0.0 ? std::optional<double>(num / den) : std::nullopt;
    w_mean /= m;
    y_mean /= m;

    double cov = 0.0, var = 0.0;
    for (std::size_t s : samples) {
      const double wc = w_res_[s] - w_mean;
      cov += wc * (y_res_[s] - y_mean);
      var += wc * wc;
    }
    if (!(var > 0.0)) return false;  // no treatment variation left; force leaf
    w_mean_ = w_mean;
    y_mean_ = y_mean;
    tau_node_ = cov / var;
    var_w_ = var / m;
    return true;
  }

  std::optional<double> node_value() const { return value_; }

  double score(std::size_t s) const {
    const double wc = w_res_[s] - w_mean_;
    return wc * ((y_res_[s] - y_mean_) - wc * tau_node_) / var_w_;
  }
  double score_weight(std::size_t) const { return 1.0; }

  std::pair<double, double> honest_terms(std::size_t s) const {
    return {w_res_[s] * y_res_[s], w_res_[s] * w_res_[s]};
  }

 private:
  std::span<const double> y_res_;
  std::span<const double> w_res_;
  std::optional<double> value_;
  double w_mean_ = 0.0, y_mean_ = 0.0, tau_node_ = 0.0, var_w_ = 1.0;
};

template <class Stats>
Tree grow_tree(const Matrix& x, Stats& stats, std::vector<std::size_t> samples,
               const GrowSettings& settings, rng::Rng& stream) {
  Tree tree;
  tree.nodes.emplace_back();

  struct Item {
    int node;
    std::size_t begin, end;
    int depth;
    double fallback;
  };
  std::vector<Item> stack{{0, 0, samples.size(), 0, 0.0}};

  std::vector<double> scores, score_weights;
  std::vector<std::pair<double, std::size_t>> order;  // (feature value, node position)

  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    const std::span<const std::size_t> node_samples(samples.data() + item.begin,
                                                    item.end - item.begin);
    const std::size_t m = node_samples.size();

    const bool splittable_stats = stats.node_begin(node_samples);
    const double node_value = stats.node_value().value_or(item.fallback);
    tree.nodes[item.node].value = node_value;

    if (!splittable_stats || m < 2 * static_cast<std::size_t>(settings.min_leaf) ||
        (settings.max_depth > 0 && item.depth >= settings.max_depth)) {
      continue;
    }

    scores.resize(m);
    score_weights.resize(m);
    double score_total = 0.0, weight_total = 0.0;
    for (std::size_t pos = 0; pos < m; ++pos) {
      scores[pos] = stats.score(node_samples[pos]);
      score_weights[pos] = stats.score_weight(node_samples[pos]);
      score_total += score_weights[pos] * scores[pos];
      weight_total += score_weights[pos];
    }

    auto candidates = stream.sample_without_replacement(x.cols(), settings.mtry);
    std::sort(candidates.begin(), candidates.end());

    // A split must strictly beat the parent's own score, so pure and
    // zero-improvement nodes terminate.
    double best_gain = weight_total > 0.0 ? score_total * score_total / weight_total
                                          : -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;

    for (std::size_t feature : candidates) {
      order.clear();
      for (std::size_t pos = 0; pos < m; ++pos) {
        order.emplace_back(x(node_samples[pos], feature), pos);
      }
      std::sort(order.begin(), order.end());

      double left_sum = 0.0, left_weight = 0.0;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const std::size_t pos = order[k].second;
        left_sum += score_weights[pos] * scores[pos];
        left_weight += score_weights[pos];
        if (order[k + 1].first == order[k].first) continue;  // no boundary here
        const std::size_t count_left = k + 1;
        const std::size_t count_right = m - count_left;
        if (count_left < static_cast<std::size_t>(settings.min_leaf) ||
            count_right < static_cast<std::size_t>(settings.min_leaf)) {
          continue;
        }
        const double right_sum = score_total - left_sum;
        const double right_weight = weight_total - left_weight;
        if (!(left_weight > 0.0) || !(right_weight > 0.0)) continue;
        const double gain =
            left_sum * left_sum / left_weight + right_sum * right_sum / right_weight;
        // Strict improvement keeps the first (lowest feature, lowest
        // threshold) maximizer on exact ties.
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(feature);
          best_threshold = midpoint_threshold(order[k].first, order[k + 1].first);
        }
      }
    }

    if (best_feature < 0) continue;

    auto begin_it = samples.begin() + static_cast<std::ptrdiff_t>(item.begin);
    auto end_it = samples.begin() + static_cast<std::ptrdiff_t>(item.end);
    auto mid_it = std::stable_partition(begin_it, end_it, [&](std::size_t s) {
      return x(s, static_cast<std::size_t>(best_feature)) <= best_threshold;
    });
    const auto left_count = static_cast<std::size_t>(mid_it - begin_it);

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[item.node];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;

    stack.push_back({right_id, item.begin + left_count, item.end, item.depth + 1, node_value});
    stack.push_back({left_id, item.begin, item.begin + left_count, item.depth + 1, node_value});
  }
  return tree;
}

// Routes the estimation half through a grown tree and replaces leaf values
// with estimates computed from it; a leaf whose estimate is undefined
// inherits the nearest ancestor with a defined one. Returns the number of
// such fallbacks.
template <class Stats>
int fill_honest_leaves(Tree& tree, const Matrix& x, const Stats& stats,
                       std::span<const std::size_t> estimation_samples) {
  std::vector<double> num(tree.nodes.size(), 0.0);
  std::vector<double> den(tree.nodes.size(), 0.0);
  for (std::size_t s : estimation_samples) {
    int node = 0;
    for (;;) {
      const auto [term_num, term_den] = stats.honest_terms(s);
      num[node] += term_num;
      den[node] += term_den;
      const TreeNode& tn = tree.nodes[node];
      if (tn.feature < 0) break;
      node = x(s, static_cast<std::size_t>(tn.feature)) <= tn.threshold ? tn.left : tn.right;
    }
  }

  int fallbacks = 0;
  struct Item {
    int node;
    double carried;
    bool carried_defined;
  };
  std::vector<Item> stack{{0, tree.nodes[0].value, false}};
  while (!stack.empty()) {
    Item item = stack.back();
    stack.pop_back();
    if (den[item.node] > 0.0) {
      item.carried = num[item.node] / den[item.node];
      item.carried_defined = true;
    }
    TreeNode& node = tree.nodes[item.node];
    if (node.feature < 0) {
      if (den[item.node] <= 0.0) ++fallbacks;
      // When nothing on the path had estimation samples, keep the value
      // grown from the split half.
      if (item.carried_defined) node.value = item.carried;
      continue;
    }
    node.value = item.carried;  // interior values track the honest estimates
    stack.push_back({node.left, item.carried, item.carried_defined});
    stack.push_back({node.right, item.carried, item.carried_defined});
  }
  return fallbacks;
}

int resolved_mtry(int mtry, std::size_t d) {
  if (mtry > 0) return std::min<int>(mtry, static_cast<int>(d));
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
}

template <class StatsFactory>
ForestModel fit_forest_impl(const Matrix& x, const ForestParams& params,
                            const StatsFactory& make_stats, double y_min, double y_max) {
  const std::size_t n = x.rows();
  if (params.n_trees < 1) throw LearnerError("n_trees must be >= 1");
  if (params.min_leaf < 1) throw LearnerError("min_leaf must be >= 1");
  if (!(params.bootstrap_fraction > 0.0 && params.bootstrap_fraction <= 1.0)) {
    throw LearnerError("bootstrap_fraction must lie in (0, 1]");
  }

  ForestModel model;
  model.n_features = x.cols();
  model.y_min = y_min;
  model.y_max = y_max;

  if (n < 2 * static_cast<std::size_t>(params.min_leaf)) {
    // Too small to place any split: one constant tree over all samples.
    model.degenerate = true;
    auto stats = make_stats();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    stats.node_begin(all);
    Tree tree;
    tree.nodes.emplace_back();
    tree.nodes[0].value = stats.node_value().value_or(0.0);
    model.trees.push_back(std::move(tree));
    return model;
  }

  GrowSettings settings;
  settings.min_leaf = params.min_leaf;
  settings.max_depth = params.max_depth;
  settings.mtry = resolved_mtry(params.mtry, x.cols());

  auto subsample_size = static_cast<std::size_t>(
      std::llround(params.bootstrap_fraction * static_cast<double>(n)));
  subsample_size = std::clamp<std::size_t>(subsample_size, 2, n);

  model.trees.resize(params.n_trees);
  if (params.keep_inbag) model.inbag.resize(params.n_trees);
  std::vector<int> fallbacks(params.n_trees, 0);

  parallel_for(static_cast<std::size_t>(params.n_trees), params.n_threads, [&](std::size_t t) {
    rng::Rng stream(rng::derive_seed(params.seed, {t}));
    auto subsample = stream.sample_without_replacement(n, subsample_size);
    if (params.keep_inbag) {
      model.inbag[t] = subsample;
      std::sort(model.inbag[t].begin(), model.inbag[t].end());
    }
    auto stats = make_stats();
    if (params.honest) {
      const std::size_t half = subsample.size() / 2;
      std::vector<std::size_t> split_half(subsample.begin(), subsample.begin() + half);
      Tree tree = grow_tree(x, stats, std::move(split_half), settings, stream);
      fallbacks[t] = fill_honest_leaves(
          tree, x, stats, std::span<const std::size_t>(subsample).subspan(half));
      model.trees[t] = std::move(tree);
    } else {
      model.trees[t] = grow_tree(x, stats, std::move(subsample), settings, stream);
    }
  });

  for (int f : fallbacks) model.empty_leaf_fallbacks += f;
  return model;
}

}  // namespace

ForestModel fit_forest(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                       const ForestParams& params) {
  if (y.size() != x.rows()) throw LearnerError("fit_forest: y length must equal row count");
  if (!weights.empty()) {
    if (weights.size() != x.rows()) throw LearnerError("fit_forest: weight length mismatch");
    for (double w : weights) {
      if (!(w >= 0.0)) throw LearnerError("fit_forest: weights must be non-negative");
    }
  }
  double y_min = y[0], y_max = y[0];
  for (double v : y) {
    y_min = std::min(y_min, v);
    y_max = std::max(y_max, v);
  }
  return fit_forest_impl(
      x, params, [&] { return RegressionStats(y, weights); }, y_min, y_max);
}

ForestModel fit_moment_forest(const Matrix& x, std::span<const double> y_residual,
                              std::span<const double> w_residual, const ForestParams& params) {
  if (y_residual.size() != x.rows() || w_residual.size() != x.rows()) {
    throw LearnerError("fit_moment_forest: residual length mismatch");
  }
  // Range metadata: the per-sample pseudo-outcomes bound every leaf estimate.
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (w_residual[i] == 0.0) throw LearnerError("fit_moment_forest: zero treatment residual");
    const double pseudo = y_residual[i] / w_residual[i];
    if (i == 0) {
      lo = hi = pseudo;
    } else {
      lo = std::min(lo, pseudo);
      hi = std::max(hi, pseudo);
    }
  }
  return fit_forest_impl(
      x, params, [&] { return MomentStats(y_residual, w_residual); }, lo, hi);
}

double predict_forest_row(const ForestModel& model, std::span<const double> row) {
  if (row.size() != model.n_features) throw LearnerError("predict: feature count mismatch");
  double total = 0.0;
  for (const Tree& tree : model.trees) {
    int node = 0;
    for (;;) {
      const TreeNode& tn = tree.nodes[node];
      if (tn.feature < 0) {
        total += tn.value;
        break;
      }
      node = row[static_cast<std::size_t>(tn.feature)] <= tn.threshold ? tn.left : tn.right;
    }
  }
  return total / static_cast<double>(model.trees.size());
}

std::vector<double> predict_forest(const ForestModel& model, const Matrix& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_forest_row(model, x.row(i));
  return out;
}

namespace {

double tree_value_at(const Tree& tree, std::span<const double> row) {
  int node = 0;
  for (;;) {
    const TreeNode& tn = tree.nodes[node];
    if (tn.feature < 0) return tn.value;
    node = row[static_cast<std::size_t>(tn.feature)] <= tn.threshold ? tn.left : tn.right;
  }
}

}  // namespace

std::vector<double> predict_forest_oob(const ForestModel& model, const Matrix& x_train) {
  if (model.degenerate) return predict_forest(model, x_train);
  if (model.inbag.size() != model.trees.size()) {
    throw LearnerError("predict_forest_oob: model was fitted without keep_inbag");
  }
  if (x_train.cols() != model.n_features) throw LearnerError("predict: feature count mismatch");

  std::vector<double> out(x_train.rows());
  for (std::size_t i = 0; i < x_train.rows(); ++i) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      if (std::binary_search(model.inbag[t].begin(), model.inbag[t].end(), i)) continue;
      total += tree_value_at(model.trees[t], x_train.row(i));
      ++used;
    }
    out[i] = used > 0 ? total / static_cast<double>(used)
                      : predict_forest_row(model, x_train.row(i));
  }
  return out;
}

}  // namespace hte::learners
