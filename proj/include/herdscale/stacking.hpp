#pragma once

// Stacked ensemble: base models ranked by cross-validated MAPE, the top m
// combined by a ridge self-learner trained on their out-of-fold predictions.

#include <algorithm>
#include <functional>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/metrics.hpp"
#include "herdscale/parallel.hpp"
#include "herdscale/regressors.hpp"

namespace herdscale {

inline Matrix select_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline Vector select_rows(const Vector& y, const std::vector<std::size_t>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
  return out;
}

/// One training call, as seen by the leakage audit: which samples the model
/// was fit on and which samples it then produced held-out predictions for.
struct FitEvent {
  int outer_fold = -1;
  std::string stage;
  std::string model_id;
  std::vector<std::size_t> fit_ids;
  std::vector<std::size_t> predicted_ids;
};

/// Thread-safe sink for FitEvents. Sample ids are dataset-global.
class ProvenanceLog {
 public:
  void record(FitEvent event) {
    std::lock_guard lock(mutex_);
    events_.push_back(std::move(event));
  }

  std::vector<FitEvent> events() const {
    std::lock_guard lock(mutex_);
    return events_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<FitEvent> events_;
};

/// Where the rows of the current X/y came from, for provenance records.
struct FitTrace {
  ProvenanceLog* log = nullptr;
  int outer_fold = -1;
  std::vector<std::size_t> ids;  // global id per row; empty = identity

  std::vector<std::size_t> global(const std::vector<std::size_t>& rows) const {
    if (ids.empty()) return rows;
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(ids[r]);
    return out;
  }

  void record(const std::string& stage, const std::string& model, const std::vector<std::size_t>& fit_rows,
              const std::vector<std::size_t>& predicted_rows) const {
    if (log) log->record({outer_fold, stage, model, global(fit_rows), global(predicted_rows)});
  }
};

struct RankedModel {
  std::size_t spec_index = 0;  // position in the declared spec list
  std::string id;
  double mape = 0.0;
  double r2 = 0.0;
  double mae = 0.0;
};

/// Ascending by (mean CV MAPE, declaration order).
struct ModelRanking {
  std::vector<ModelSpec> specs;  // in declaration order
  std::vector<RankedModel> entries;

  std::vector<ModelSpec> top(std::size_t m) const {
    std::vector<ModelSpec> out;
    for (std::size_t i = 0; i < std::min(m, entries.size()); ++i) out.push_back(specs[entries[i].spec_index]);
    return out;
  }
};

/// Out-of-fold predictions of every spec under one shared fold assignment.
struct CvPredictions {
  Matrix oof;  // n x specs
  std::vector<std::vector<Metrics>> fold_metrics;  // [spec][fold]
};

inline CvPredictions cross_val_predict(const Matrix& X, const Vector& y, const std::vector<ModelSpec>& specs,
                                       const FoldAssignment& folds, int jobs = 1, const FitTrace& trace = {}) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (folds.size() != n) throw Error(ErrorCode::LengthMismatch, "fold assignment does not match sample count");
  CvPredictions out;
  out.oof = Matrix::Zero(X.rows(), static_cast<Eigen::Index>(specs.size()));
  out.fold_metrics.assign(specs.size(), std::vector<Metrics>(static_cast<std::size_t>(folds.k)));
  const auto k = static_cast<std::size_t>(folds.k);
  std::vector<std::vector<std::size_t>> train(k), test(k);
  for (int f = 0; f < folds.k; ++f) {
    train[static_cast<std::size_t>(f)] = folds.train_indices(f);
    test[static_cast<std::size_t>(f)] = folds.test_indices(f);
  }
  parallel_for(specs.size() * k, jobs, [&](std::size_t task) {
    const std::size_t s = task / k;
    const std::size_t f = task % k;
    const auto& spec = specs[s];
    try {
      const auto model = fit(spec, select_rows(X, train[f]), select_rows(y, train[f]));
      const Vector pred = model.predict(select_rows(X, test[f]));
      trace.record("inner-oof", spec.id, train[f], test[f]);
      std::vector<double> yt, pt;
      for (std::size_t i = 0; i < test[f].size(); ++i) {
        out.oof(static_cast<Eigen::Index>(test[f][i]), static_cast<Eigen::Index>(s)) = pred[static_cast<Eigen::Index>(i)];
        yt.push_back(y[static_cast<Eigen::Index>(test[f][i])]);
        pt.push_back(pred[static_cast<Eigen::Index>(i)]);
      }
      out.fold_metrics[s][f] = compute_metrics_lenient(yt, pt);
    } catch (const Error& e) {
      e.rethrow_in(spec.id);
    }
  });
  return out;
}

inline ModelRanking rank_from_predictions(const std::vector<ModelSpec>& specs, const CvPredictions& cv) {
  ModelRanking ranking;
  ranking.specs = specs;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto report = MetricReport::from_folds(cv.fold_metrics[s]);
    ranking.entries.push_back({s, specs[s].id, report.mape.mean, report.r2.mean, report.mae.mean});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.mape != b.mape) return a.mape < b.mape;
    return a.spec_index < b.spec_index;
  });
  return ranking;
}

/// k-fold CV of every spec on shared folds, ranked by mean MAPE.
inline ModelRanking rank_base_models(const Matrix& X, const Vector& y, const std::vector<ModelSpec>& specs, int k,
                                     std::uint64_t seed, int jobs = 1) {
  const auto folds = kfold_split(static_cast<std::size_t>(X.rows()), k, seed);
  return rank_from_predictions(specs, cross_val_predict(X, y, specs, folds, jobs));
}

/// n x m matrix of out-of-fold predictions: entry (i, m) comes from model m
/// trained without sample i's fold.
inline Matrix build_meta_features(const Matrix& X, const Vector& y, const std::vector<ModelSpec>& top_specs, int k,
                                  std::uint64_t seed, int jobs = 1) {
  const auto folds = kfold_split(static_cast<std::size_t>(X.rows()), k, seed);
  return cross_val_predict(X, y, top_specs, folds, jobs).oof;
}

/// Ridge combiner y = w . z + b on centered meta-features; b unpenalized.
struct SelfLearner {
  Vector weights;
  double intercept = 0.0;
  double alpha = 1.0;

  Vector predict(const Matrix& Z) const { return (Z * weights).array() + intercept; }
};

inline SelfLearner fit_self_learner(const Matrix& Z, const Vector& y, double alpha) {
  SelfLearner s;
  s.alpha = alpha;
  const Vector zbar = Z.colwise().mean().transpose();
  const double ybar = y.mean();
  const Matrix Zc = Z.rowwise() - zbar.transpose();
  const Vector yc = (y.array() - ybar).matrix();
  Matrix gram = Zc.transpose() * Zc;
  gram.diagonal().array() += alpha;
  s.weights = alpha > 0.0 ? Vector(gram.ldlt().solve(Zc.transpose() * yc))
                          : Vector(Eigen::CompleteOrthogonalDecomposition<Matrix>(Zc).solve(yc));
  s.intercept = ybar - zbar.dot(s.weights);
  return s;
}

struct StackedEnsemble {
  std::vector<FittedModel> bases;  // refit on the full training split, ranking order
  SelfLearner combiner;

  std::size_t m_top() const noexcept { return bases.size(); }

  Matrix base_predictions(const Matrix& X) const {
    Matrix Z(X.rows(), static_cast<Eigen::Index>(bases.size()));
    for (std::size_t m = 0; m < bases.size(); ++m) Z.col(static_cast<Eigen::Index>(m)) = bases[m].predict(X);
    return Z;
  }
};

inline Vector predict_stack(const StackedEnsemble& ens, const Matrix& X) {
  if (ens.bases.empty()) throw Error(ErrorCode::DimensionMismatch, "empty ensemble");
  return ens.combiner.predict(ens.base_predictions(X));
}

/// Self-learner on given out-of-fold columns, then base refits on all rows.
inline StackedEnsemble assemble_stack(const Matrix& X, const Vector& y, const std::vector<ModelSpec>& top_specs,
                                      const Matrix& meta, double alpha, int jobs = 1, const FitTrace& trace = {}) {
  StackedEnsemble ens;
  ens.combiner = fit_self_learner(meta, y, alpha);
  std::vector<std::size_t> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  trace.record("self-learner", "ridge", all, {});
  ens.bases.resize(top_specs.size());
  parallel_for(top_specs.size(), jobs, [&](std::size_t m) {
    ens.bases[m] = fit(top_specs[m], X, y);
    trace.record("refit", top_specs[m].id, all, {});
  });
  return ens;
}

/// Top m_top models from the ranking, stacked on out-of-fold meta-features.
inline StackedEnsemble fit_stack(const Matrix& X, const Vector& y, const ModelRanking& ranking, std::size_t m_top,
                                 int k, std::uint64_t seed, double alpha = 1.0, int jobs = 1) {
  if (m_top < 1 || m_top > ranking.entries.size()) {
    throw Error(ErrorCode::InvalidConfig, "m_top = " + std::to_string(m_top) + " outside [1, " +
                                              std::to_string(ranking.entries.size()) + "]");
  }
  const auto top = ranking.top(m_top);
  const Matrix meta = build_meta_features(X, y, top, k, seed, jobs);
  return assemble_stack(X, y, top, meta, alpha, jobs);
}

}  // namespace herdscale
