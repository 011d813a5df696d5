#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "herdscale/error.hpp"
#include "herdscale/rng.hpp"

namespace herdscale {

struct Metrics {
  double r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when fewer than 2 samples
  double mae = 0.0;   // kg
  double mape = 0.0;  // percent
};

namespace detail {

inline Metrics metrics_impl(std::span<const double> y, std::span<const double> yhat, bool strict) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(y.size()) + " targets vs " + std::to_string(yhat.size()) + " predictions");
  }
  if (y.empty()) throw Error(ErrorCode::LengthMismatch, "no samples");
  const auto n = static_cast<double>(y.size());
  double abs_sum = 0.0, pct_sum = 0.0, ss_res = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw Error(ErrorCode::NonPositiveTarget, "target " + std::to_string(i) + " is not positive");
    const double e = y[i] - yhat[i];
    abs_sum += std::abs(e);
    pct_sum += std::abs(e) / y[i];
    ss_res += e * e;
    mean += y[i];
  }
  Metrics m;
  m.mae = abs_sum / n;
  m.mape = 100.0 * pct_sum / n;
  if (y.size() < 2) return m;
  mean /= n;
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  if (ss_tot == 0.0) {
    if (ss_res == 0.0) {
      m.r2 = 0.0;
    } else if (strict) {
      throw Error(ErrorCode::ZeroVarianceTarget, "R^2 undefined: constant target, non-matching predictions");
    }
    return m;
  }
  m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

}  // namespace detail

/// R^2, MAE (kg) and MAPE (percent). A constant target gives R^2 = 0 only when
/// the predictions reproduce it exactly; otherwise ZeroVarianceTarget.
inline Metrics compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  return detail::metrics_impl(y, yhat, true);
}

/// Batch-run variant: a zero-variance fold reports R^2 as NaN instead of throwing.
inline Metrics compute_metrics_lenient(std::span<const double> y, std::span<const double> yhat) {
  return detail::metrics_impl(y, yhat, false);
}

struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold;  // fold index per sample

  std::size_t size() const noexcept { return fold.size(); }

  std::vector<std::size_t> test_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      if (fold[i] == f) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      if (fold[i] != f) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int f : fold) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
  }
};

/// Seeded shuffle, then contiguous blocks; the first n % k folds get one extra sample.
inline FoldAssignment kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " with n = " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.fold.assign(n, 0);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) out.fold[perm[pos++]] = f;
  }
  return out;
}

struct MetricSummary {
  std::vector<double> per_fold;
  double mean = 0.0;
  double std = 0.0;  // population (divisor = number of folds)
};

/// Mean and population std over the finite entries.
inline MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.per_fold = std::move(values);
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : s.per_fold) {
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) {
    s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (double v : s.per_fold) {
    if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(ss / static_cast<double>(count));
  return s;
}

struct MetricReport {
  MetricSummary r2;
  MetricSummary mae;
  MetricSummary mape;

  static MetricReport from_folds(const std::vector<Metrics>& folds) {
    std::vector<double> r2, mae, mape;
    for (const auto& m : folds) {
      r2.push_back(m.r2);
      mae.push_back(m.mae);
      mape.push_back(m.mape);
    }
    return {summarize(std::move(r2)), summarize(std::move(mae)), summarize(std::move(mape))};
  }
};

}  // namespace herdscale
