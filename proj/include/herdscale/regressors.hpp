#pragma once

#include <cmath>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "herdscale/error.hpp"
#include "herdscale/linear_models.hpp"
#include "herdscale/model_spec.hpp"
#include "herdscale/tree_models.hpp"

namespace herdscale {

/// A trained base learner. Immutable after `fit`; `predict` is deterministic.
class FittedModel {
 public:
  using Params = std::variant<LinearParams, KnnParams, TreeEnsemble>;

  FittedModel() = default;
  FittedModel(ModelSpec spec, Eigen::Index n_features, Standardizer standardizer, Params params)
      : spec_(std::move(spec)),
        n_features_(n_features),
        standardizer_(std::move(standardizer)),
        params_(std::move(params)) {}

  const ModelSpec& spec() const noexcept { return spec_; }
  Eigen::Index n_features() const noexcept { return n_features_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const Params& params() const noexcept { return params_; }

  Vector predict(const Matrix& X) const {
    if (X.cols() != n_features_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(n_features_) + " features, got " + std::to_string(X.cols()), spec_.id);
    }
    if (!X.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite feature value", spec_.id);
    if (const auto* lin = std::get_if<LinearParams>(&params_)) return predict_linear(*lin, standardizer_.apply(X));
    if (const auto* knn = std::get_if<KnnParams>(&params_)) return predict_knn(*knn, standardizer_.apply(X));
    return std::get<TreeEnsemble>(params_).predict(X);
  }

  /// Linear coefficients mapped back to raw feature units: y = b0 + sum_j slope_j x_j.
  std::pair<Vector, double> raw_linear_coefficients() const {
    const auto& lin = std::get<LinearParams>(params_);
    Vector slope = lin.coef.array() / standardizer_.scale.array();
    const double intercept = lin.intercept - slope.dot(standardizer_.mean);
    return {slope, intercept};
  }

 private:
  ModelSpec spec_;
  Eigen::Index n_features_ = 0;
  Standardizer standardizer_;
  Params params_;
};

namespace detail {

inline void check_training_data(const ModelSpec& spec, const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.rows()) + " rows, y has " + std::to_string(y.size()), spec.id);
  }
  if (X.rows() < 2) throw Error(ErrorCode::DimensionMismatch, "need at least 2 training samples", spec.id);
  if (X.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "need at least 1 feature", spec.id);
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite training value", spec.id);
  if ((y.array() <= 0.0).any()) throw Error(ErrorCode::NonPositiveTarget, "targets must be > 0", spec.id);
}

inline TreeOptions tree_options(const ModelSpec& spec) {
  TreeOptions opt;
  opt.max_depth = spec.get_int("max_depth");
  if (spec.family == Family::DecisionTree || spec.family == Family::RandomForest || spec.family == Family::ExtraTrees) {
    opt.min_samples_split = spec.get_int("min_samples_split");
    opt.min_samples_leaf = spec.get_int("min_samples_leaf");
  }
  return opt;
}

}  // namespace detail

/// Trains one base learner. Targets are live weights (kg) and must be positive.
inline FittedModel fit(const ModelSpec& spec, const Matrix& X, const Vector& y) {
  spec.validate();
  detail::check_training_data(spec, X, y);
  const Eigen::Index d = X.cols();

  if (uses_standardization(spec.family)) {
    auto standardizer = Standardizer::fit(X);
    const Matrix Xs = standardizer.apply(X);
    FittedModel::Params params;
    switch (spec.family) {
      case Family::OLS: params = fit_ols(Xs, y); break;
      case Family::Ridge: params = fit_ridge(Xs, y, spec.get("alpha")); break;
      case Family::Lasso:
        params = fit_elastic_net(Xs, y, spec.get("alpha"), 1.0, spec.get("tol"), spec.get_int("max_sweeps"));
        break;
      case Family::ElasticNet:
        params = fit_elastic_net(Xs, y, spec.get("alpha"), spec.get("l1_ratio"), spec.get("tol"),
                                 spec.get_int("max_sweeps"));
        break;
      case Family::Huber: params = fit_huber(Xs, y, spec.get("delta"), spec.get_int("max_iter")); break;
      case Family::KNN: params = KnnParams{Xs, y, spec.get_int("k")}; break;
      default: break;
    }
    return FittedModel(spec, d, std::move(standardizer), std::move(params));
  }

  // trees use raw features; keep an identity standardizer for a uniform artifact
  Standardizer identity{Vector::Zero(d), Vector::Ones(d)};
  TreeEnsemble ens;
  switch (spec.family) {
    case Family::DecisionTree: {
      ens.combine = Combine::Mean;
      ens.trees.push_back(fit_tree(X, y, detail::tree_options(spec)));
      break;
    }
    case Family::RandomForest:
    case Family::ExtraTrees: {
      auto opt = detail::tree_options(spec);
      opt.max_features = resolve_max_features(spec.get_int("max_features"), d);
      opt.random_thresholds = spec.family == Family::ExtraTrees;
      ens = fit_forest(X, y, spec.get_int("n_trees"), opt, spec.get_int("bootstrap") != 0, spec.seed);
      break;
    }
    case Family::AdaBoost:
      ens = fit_adaboost_r2(X, y, spec.get_int("n_rounds"), spec.get_int("max_depth"), spec.get("learning_rate"),
                            spec.seed);
      break;
    case Family::GradientBoosting:
      ens = fit_gradient_boosting(X, y, spec.get_int("n_rounds"), spec.get_int("max_depth"), spec.get("learning_rate"));
      break;
    default: break;
  }
  return FittedModel(spec, d, std::move(identity), std::move(ens));
}

inline Vector predict(const FittedModel& model, const Matrix& X) { return model.predict(X); }

}  // namespace herdscale
