#pragma once

// CART regression trees and the tree ensembles built on them: random forest,
// extra trees, AdaBoost.R2 and least-squares gradient boosting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/linear_models.hpp"
#include "herdscale/rng.hpp"

namespace herdscale {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Matrix& X, Eigen::Index row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = X(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  Vector predict(const Matrix& X) const {
    Vector out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out[r] = predict_row(X, r);
    return out;
  }

  int depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
      best = std::max(best, d[i]);
    }
    return best;
  }
};

struct TreeOptions {
  int max_depth = 0;  // 0 = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0 = all features
  bool random_thresholds = false;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& y, const TreeOptions& opt, Rng* rng)
      : X_(X), y_(y), opt_(opt), rng_(rng) {}

  RegressionTree build(std::vector<Eigen::Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();  // sum_l^2/n_l + sum_r^2/n_r
  };

  int grow(std::vector<Eigen::Index> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto m = static_cast<double>(rows.size());
    double sum = 0.0;
    for (auto r : rows) sum += y_[r];
    const double mean = sum / m;
    tree_.nodes[static_cast<std::size_t>(id)].value = mean;

    double sse = 0.0;
    for (auto r : rows) sse += (y_[r] - mean) * (y_[r] - mean);
    const bool depth_ok = opt_.max_depth == 0 || depth < opt_.max_depth;
    if (!depth_ok || static_cast<int>(rows.size()) < opt_.min_samples_split ||
        static_cast<int>(rows.size()) < 2 * opt_.min_samples_leaf || sse <= 1e-14 * (mean * mean * m + 1e-300)) {
      return id;
    }

    const Split split = find_split(rows, sum);
    // require a real impurity decrease
    if (split.feature < 0 || !(split.score - sum * sum / m > 1e-12 * sse)) return id;

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (X_(r, split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[static_cast<std::size_t>(id)].feature = split.feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int l = grow(std::move(left), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  Split find_split(const std::vector<Eigen::Index>& rows, double total) {
    const auto d = static_cast<int>(X_.cols());
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    const int k = opt_.max_features > 0 ? std::min(opt_.max_features, d) : d;
    if (k < d) {
      rng_->shuffle(order);
    }
    Split best;
    for (int pos = 0; pos < d; ++pos) {
      // past the first k candidates, only keep looking until something valid is found
      if (pos >= k && best.feature >= 0) break;
      const int f = order[static_cast<std::size_t>(pos)];
      const Split cand = opt_.random_thresholds ? random_split(rows, f, total) : best_split(rows, f, total);
      if (cand.feature < 0) continue;
      if (cand.score > best.score || (cand.score == best.score && cand.feature < best.feature)) best = cand;
    }
    return best;
  }

  Split best_split(const std::vector<Eigen::Index>& rows, int f, double total) {
    sorted_.assign(rows.begin(), rows.end());
    std::stable_sort(sorted_.begin(), sorted_.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return X_(a, f) < X_(b, f); });
    const auto m = sorted_.size();
    const auto leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    Split best;
    double left_sum = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
      left_sum += y_[sorted_[i - 1]];
      const double a = X_(sorted_[i - 1], f);
      const double b = X_(sorted_[i], f);
      if (!(a < b) || i < leaf || m - i < leaf) continue;
      const double right_sum = total - left_sum;
      const double score = left_sum * left_sum / static_cast<double>(i) +
                           right_sum * right_sum / static_cast<double>(m - i);
      if (score > best.score) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best = {f, thr, score};
      }
    }
    return best;
  }

  Split random_split(const std::vector<Eigen::Index>& rows, int f, double total) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto r : rows) {
      lo = std::min(lo, X_(r, f));
      hi = std::max(hi, X_(r, f));
    }
    if (!(lo < hi)) return {};
    double thr = rng_->uniform(lo, hi);
    if (!(thr < hi)) thr = lo;
    double left_sum = 0.0;
    std::size_t nl = 0;
    for (auto r : rows) {
      if (X_(r, f) <= thr) {
        left_sum += y_[r];
        ++nl;
      }
    }
    const std::size_t nr = rows.size() - nl;
    const auto leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    if (nl < leaf || nr < leaf || nl == 0 || nr == 0) return {};
    const double right_sum = total - left_sum;
    return {f, thr, left_sum * left_sum / static_cast<double>(nl) + right_sum * right_sum / static_cast<double>(nr)};
  }

  const Matrix& X_;
  const Vector& y_;
  TreeOptions opt_;
  Rng* rng_;
  RegressionTree tree_;
  std::vector<Eigen::Index> sorted_;
};

}  // namespace detail

/// Fits a tree on the given rows (duplicates allowed, as in bootstrap samples).
inline RegressionTree fit_tree(const Matrix& X, const Vector& y, std::vector<Eigen::Index> rows,
                               const TreeOptions& opt, Rng* rng = nullptr) {
  Rng local(0);
  detail::TreeBuilder builder(X, y, opt, rng ? rng : &local);
  return builder.build(std::move(rows));
}

inline RegressionTree fit_tree(const Matrix& X, const Vector& y, const TreeOptions& opt, Rng* rng = nullptr) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return fit_tree(X, y, std::move(rows), opt, rng);
}

enum class Combine { Mean, WeightedMedian, Additive };

struct TreeEnsemble {
  std::vector<RegressionTree> trees;
  std::vector<double> weights;  // AdaBoost estimator weights
  double init = 0.0;            // boosting initial prediction
  double learning_rate = 1.0;
  Combine combine = Combine::Mean;

  Vector predict(const Matrix& X) const {
    const Eigen::Index n = X.rows();
    Vector out(n);
    switch (combine) {
      case Combine::Mean: {
        out.setZero();
        for (const auto& t : trees) out += t.predict(X);
        out /= static_cast<double>(trees.size());
        break;
      }
      case Combine::Additive: {
        out.setConstant(init);
        for (const auto& t : trees) out += learning_rate * t.predict(X);
        break;
      }
      case Combine::WeightedMedian: {
        std::vector<std::pair<double, double>> pw(trees.size());
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
          for (std::size_t t = 0; t < trees.size(); ++t) pw[t] = {trees[t].predict_row(X, r), weights[t]};
          std::stable_sort(pw.begin(), pw.end(), [](auto& a, auto& b) { return a.first < b.first; });
          double cum = 0.0;
          out[r] = pw.back().first;
          for (const auto& [p, w] : pw) {
            cum += w;
            if (cum >= 0.5 * total) {
              out[r] = p;
              break;
            }
          }
        }
        break;
      }
    }
    return out;
  }
};

inline int resolve_max_features(int requested, Eigen::Index d) {
  if (requested > 0) return std::min<int>(requested, static_cast<int>(d));
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
}

/// Random forest / extra trees. Each tree draws from its own stream derived
/// from (seed, tree index).
inline TreeEnsemble fit_forest(const Matrix& X, const Vector& y, int n_trees, TreeOptions opt, bool bootstrap,
                               std::uint64_t seed) {
  TreeEnsemble ens;
  ens.combine = Combine::Mean;
  const auto n = static_cast<std::size_t>(X.rows());
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> rows(n);
    if (bootstrap) {
      for (auto& r : rows) r = static_cast<Eigen::Index>(rng.below(n));
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    ens.trees.push_back(fit_tree(X, y, std::move(rows), opt, &rng));
  }
  return ens;
}

/// Least-squares boosting: start at the mean, fit each tree to the residuals.
inline TreeEnsemble fit_gradient_boosting(const Matrix& X, const Vector& y, int rounds, int max_depth,
                                          double learning_rate) {
  TreeEnsemble ens;
  ens.combine = Combine::Additive;
  ens.learning_rate = learning_rate;
  ens.init = y.mean();
  Vector current = Vector::Constant(y.size(), ens.init);
  TreeOptions opt;
  opt.max_depth = max_depth;
  for (int m = 0; m < rounds; ++m) {
    const Vector residual = y - current;
    auto tree = fit_tree(X, residual, opt);
    current += learning_rate * tree.predict(X);
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

/// AdaBoost.R2 with linear loss and weighted resampling.
inline TreeEnsemble fit_adaboost_r2(const Matrix& X, const Vector& y, int rounds, int max_depth, double learning_rate,
                                    std::uint64_t seed) {
  TreeEnsemble ens;
  ens.combine = Combine::WeightedMedian;
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  Rng rng(seed);
  TreeOptions opt;
  opt.max_depth = max_depth;
  std::vector<double> cdf(n);
  for (int m = 0; m < rounds; ++m) {
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::vector<Eigen::Index> rows(n);
    for (auto& r : rows) {
      const double u = rng.uniform() * cdf.back();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      r = static_cast<Eigen::Index>(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1));
    }
    std::sort(rows.begin(), rows.end());
    auto tree = fit_tree(X, y, std::move(rows), opt, &rng);
    const Vector pred = tree.predict(X);
    const Vector err = (pred - y).cwiseAbs();
    const double max_err = err.maxCoeff();
    if (!(max_err > 0.0)) {
      ens.trees.push_back(std::move(tree));
      ens.weights.push_back(1.0);
      break;
    }
    double avg_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) avg_loss += w[i] * err[static_cast<Eigen::Index>(i)] / max_err;
    if (!(avg_loss > 0.0)) {
      ens.trees.push_back(std::move(tree));
      ens.weights.push_back(1.0);
      break;
    }
    if (avg_loss >= 0.5) {
      if (ens.trees.empty()) {
        ens.trees.push_back(std::move(tree));
        ens.weights.push_back(1.0);
      }
      break;
    }
    const double beta = avg_loss / (1.0 - avg_loss);
    ens.trees.push_back(std::move(tree));
    ens.weights.push_back(learning_rate * std::log(1.0 / beta));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::pow(beta, (1.0 - err[static_cast<Eigen::Index>(i)] / max_err) * learning_rate);
      total += w[i];
    }
    if (!(total > 0.0)) break;
    for (auto& v : w) v /= total;
  }
  return ens;
}

}  // namespace herdscale
