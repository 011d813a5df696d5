#pragma once

// Nested cross-validation of the full stacking procedure and the
// ensemble-size sweep.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "herdscale/metrics.hpp"
#include "herdscale/parallel.hpp"
#include "herdscale/stacking.hpp"

namespace herdscale {

struct StackingOptions {
  std::vector<ModelSpec> specs = default_model_specs();
  std::size_t m_top = 11;
  double alpha = 1.0;
  int inner_k = 5;
  int jobs = 1;
};

struct CvResult {
  MetricReport report;
  FoldAssignment folds;
  std::vector<ModelRanking> rankings;  // one per outer fold
  Vector predictions;                  // held-out stacked prediction per sample
};

struct SweepRow {
  std::size_t m = 0;
  MetricReport report;
};

namespace detail {

/// Everything the outer fold needs that does not depend on m_top.
struct OuterFoldState {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  ModelRanking ranking;
  Matrix oof;                      // training rows x specs
  std::vector<FittedModel> refit;  // top-ranked specs, ranking order
};

inline std::uint64_t inner_seed(std::uint64_t seed, int outer_fold) {
  return derive_seed(seed, 1000 + static_cast<std::uint64_t>(outer_fold));
}

inline OuterFoldState prepare_outer_fold(const Matrix& X, const Vector& y, const StackingOptions& opt,
                                         const FoldAssignment& folds, int f, std::size_t max_m, ProvenanceLog* log) {
  OuterFoldState st;
  st.train = folds.train_indices(f);
  st.test = folds.test_indices(f);
  const Matrix Xtr = select_rows(X, st.train);
  const Vector ytr = select_rows(y, st.train);
  FitTrace trace{log, f, st.train};

  const auto inner = kfold_split(st.train.size(), opt.inner_k, inner_seed(folds.seed, f));
  const auto cv = cross_val_predict(Xtr, ytr, opt.specs, inner, 1, trace);
  st.ranking = rank_from_predictions(opt.specs, cv);
  st.oof = cv.oof;

  std::vector<std::size_t> all(st.train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto top = st.ranking.top(max_m);
  for (const auto& spec : top) {
    st.refit.push_back(fit(spec, Xtr, ytr));
    trace.record("refit", spec.id, all, {});
  }
  return st;
}

inline Vector evaluate_outer_fold(const Matrix& X, const Vector& y, const OuterFoldState& st, std::size_t m,
                                  double alpha, ProvenanceLog* log, int f) {
  const Vector ytr = select_rows(y, st.train);
  Matrix meta(static_cast<Eigen::Index>(st.train.size()), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    meta.col(static_cast<Eigen::Index>(j)) = st.oof.col(static_cast<Eigen::Index>(st.ranking.entries[j].spec_index));
  }
  StackedEnsemble ens;
  ens.combiner = fit_self_learner(meta, ytr, alpha);
  ens.bases.assign(st.refit.begin(), st.refit.begin() + static_cast<std::ptrdiff_t>(m));
  FitTrace trace{log, f, st.train};
  std::vector<std::size_t> all(st.train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  trace.record("self-learner", "ridge/m=" + std::to_string(m), all, {});
  if (log) {
    // held-out evaluation: every model in the stack predicts the outer test fold
    for (std::size_t j = 0; j < m; ++j) log->record({f, "outer-test", st.ranking.entries[j].id, st.train, st.test});
  }
  return predict_stack(ens, select_rows(X, st.test));
}

inline std::vector<OuterFoldState> prepare_all(const Matrix& X, const Vector& y, const StackingOptions& opt,
                                               const FoldAssignment& folds, std::size_t max_m, ProvenanceLog* log) {
  std::vector<OuterFoldState> states(static_cast<std::size_t>(folds.k));
  parallel_for(states.size(), opt.jobs, [&](std::size_t f) {
    states[f] = prepare_outer_fold(X, y, opt, folds, static_cast<int>(f), max_m, log);
  });
  return states;
}

inline void check_options(const StackingOptions& opt, std::size_t max_m) {
  if (opt.specs.empty()) throw Error(ErrorCode::InvalidConfig, "no base model specs");
  if (max_m < 1 || max_m > opt.specs.size()) {
    throw Error(ErrorCode::InvalidConfig,
                "ensemble size " + std::to_string(max_m) + " outside [1, " + std::to_string(opt.specs.size()) + "]");
  }
  for (const auto& s : opt.specs) s.validate();
}

}  // namespace detail

/// Outer k-fold evaluation of the whole stacking procedure; ranking and
/// meta-features are rebuilt inside every outer training split.
inline CvResult cross_validate(const Matrix& X, const Vector& y, const StackingOptions& opt, int k,
                               std::uint64_t seed, ProvenanceLog* log = nullptr) {
  detail::check_options(opt, opt.m_top);
  CvResult result;
  result.folds = kfold_split(static_cast<std::size_t>(X.rows()), k, seed);
  const auto states = detail::prepare_all(X, y, opt, result.folds, opt.m_top, log);
  result.predictions = Vector::Zero(X.rows());
  std::vector<Metrics> per_fold;
  for (int f = 0; f < k; ++f) {
    const auto& st = states[static_cast<std::size_t>(f)];
    const Vector pred = detail::evaluate_outer_fold(X, y, st, opt.m_top, opt.alpha, log, f);
    std::vector<double> yt, pt;
    for (std::size_t i = 0; i < st.test.size(); ++i) {
      result.predictions[static_cast<Eigen::Index>(st.test[i])] = pred[static_cast<Eigen::Index>(i)];
      yt.push_back(y[static_cast<Eigen::Index>(st.test[i])]);
      pt.push_back(pred[static_cast<Eigen::Index>(i)]);
    }
    per_fold.push_back(compute_metrics_lenient(yt, pt));
    result.rankings.push_back(st.ranking);
  }
  result.report = MetricReport::from_folds(per_fold);
  return result;
}

/// One cross-validated stack per ensemble size, all on the same folds. The
/// m-independent work (rankings, out-of-fold matrices, refits) is shared, so
/// each row equals cross_validate with m_top = m.
inline std::vector<SweepRow> ensemble_size_sweep(const Matrix& X, const Vector& y, const StackingOptions& opt,
                                                 const std::vector<std::size_t>& m_range, int k, std::uint64_t seed) {
  if (m_range.empty()) throw Error(ErrorCode::InvalidConfig, "empty ensemble-size range");
  const auto max_m = *std::max_element(m_range.begin(), m_range.end());
  detail::check_options(opt, max_m);
  if (*std::min_element(m_range.begin(), m_range.end()) < 1) throw Error(ErrorCode::InvalidConfig, "ensemble size must be >= 1");
  const auto folds = kfold_split(static_cast<std::size_t>(X.rows()), k, seed);
  const auto states = detail::prepare_all(X, y, opt, folds, max_m, nullptr);
  std::vector<SweepRow> rows;
  for (auto m : m_range) {
    std::vector<Metrics> per_fold;
    for (int f = 0; f < k; ++f) {
      const auto& st = states[static_cast<std::size_t>(f)];
      const Vector pred = detail::evaluate_outer_fold(X, y, st, m, opt.alpha, nullptr, f);
      std::vector<double> yt, pt;
      for (std::size_t i = 0; i < st.test.size(); ++i) {
        yt.push_back(y[static_cast<Eigen::Index>(st.test[i])]);
        pt.push_back(pred[static_cast<Eigen::Index>(i)]);
      }
      per_fold.push_back(compute_metrics_lenient(yt, pt));
    }
    rows.push_back({m, MetricReport::from_folds(per_fold)});
  }
  return rows;
}

/// Audits a provenance log: counts records where a model was fit on a sample
/// it then predicted, or on a sample from the outer test fold it belongs to.
inline std::size_t count_leakage_violations(const std::vector<FitEvent>& events, const FoldAssignment& outer) {
  std::size_t violations = 0;
  for (const auto& e : events) {
    std::vector<char> seen(outer.size(), 0);
    for (auto id : e.fit_ids) {
      seen[id] = 1;
      if (e.outer_fold >= 0 && outer.fold[id] == e.outer_fold) ++violations;
    }
    for (auto id : e.predicted_ids) violations += seen[id] ? 1 : 0;
  }
  return violations;
}

}  // namespace herdscale
