#pragma once

// Agreement-weighted fusion of per-view latent updates, the plain average
// baseline, and a surrogate sampler that produces agreement-vs-step traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/error.hpp"
#include "herdscale/io.hpp"
#include "herdscale/parallel.hpp"
#include "herdscale/rng.hpp"

namespace herdscale {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// V per-view updates, each an L x D tensor, stored view-major.
class ViewUpdateSet {
 public:
  ViewUpdateSet() = default;

  ViewUpdateSet(std::size_t views, std::size_t locations, std::size_t channels)
      : V_(views), L_(locations), D_(channels), data_(views * locations * channels, 0.0) {
    if (views == 0 || locations == 0 || channels == 0) {
      throw Error(ErrorCode::DimensionMismatch, "V, L and D must all be >= 1");
    }
  }

  /// One L x D matrix per view.
  static ViewUpdateSet from_views(const std::vector<RowMatrix>& views) {
    if (views.empty()) throw Error(ErrorCode::DimensionMismatch, "no views");
    const auto L = static_cast<std::size_t>(views[0].rows());
    const auto D = static_cast<std::size_t>(views[0].cols());
    ViewUpdateSet u(views.size(), L, D);
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (static_cast<std::size_t>(views[v].rows()) != L || static_cast<std::size_t>(views[v].cols()) != D) {
        throw Error(ErrorCode::DimensionMismatch, "view shapes differ", "view " + std::to_string(v));
      }
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t c = 0; c < D; ++c) u(v, l, c) = views[v](static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
      }
    }
    u.check_finite();
    return u;
  }

  std::size_t views() const noexcept { return V_; }
  std::size_t locations() const noexcept { return L_; }
  std::size_t channels() const noexcept { return D_; }

  double& operator()(std::size_t v, std::size_t l, std::size_t c) { return data_[(v * L_ + l) * D_ + c]; }
  double operator()(std::size_t v, std::size_t l, std::size_t c) const { return data_[(v * L_ + l) * D_ + c]; }

  const double* at(std::size_t v, std::size_t l) const { return data_.data() + (v * L_ + l) * D_; }

  RowMatrix view(std::size_t v) const {
    return Eigen::Map<const RowMatrix>(data_.data() + v * L_ * D_, static_cast<Eigen::Index>(L_),
                                       static_cast<Eigen::Index>(D_));
  }

  void check_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw Error(ErrorCode::NonFiniteInput, "non-finite update", "view " + std::to_string(i / (L_ * D_)));
      }
    }
  }

 private:
  std::size_t V_ = 0, L_ = 0, D_ = 0;
  std::vector<double> data_;
};

enum class CenterKind { Mean, Median };

struct FusionParams {
  double beta = 1.0;
  double eps = 1e-8;
  CenterKind center = CenterKind::Mean;
  int jobs = 1;  // partitions over locations; results are identical for any value

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidConfig, "beta must be finite and >= 0");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidConfig, "eps must be finite and > 0");
  }
};

struct FusionResult {
  RowMatrix fused;      // L x D
  RowMatrix weights;    // V x L
  RowMatrix agreement;  // V x L, exp(-beta d)
  RowMatrix deviation;  // V x L
  RowMatrix center;     // L x D
};

namespace detail {

inline void mean_center_at(const ViewUpdateSet& u, std::size_t l, double* out) {
  const std::size_t V = u.views(), D = u.channels();
  for (std::size_t c = 0; c < D; ++c) {
    // anchored on the first view so identical views give it back exactly
    const double x0 = u(0, l, c);
    double s = 0.0;
    for (std::size_t v = 1; v < V; ++v) s += u(v, l, c) - x0;
    out[c] = x0 + s / static_cast<double>(V);
  }
}

inline void median_center_at(const ViewUpdateSet& u, std::size_t l, double* out) {
  const std::size_t V = u.views(), D = u.channels();
  std::vector<double> col(V);
  for (std::size_t c = 0; c < D; ++c) {
    for (std::size_t v = 0; v < V; ++v) col[v] = u(v, l, c);
    std::sort(col.begin(), col.end());
    out[c] = V % 2 ? col[V / 2] : 0.5 * (col[V / 2 - 1] + col[V / 2]);
  }
}

inline double rms_deviation(const double* u, const double* m, std::size_t D, double eps) {
  double ss = 0.0;
  for (std::size_t c = 0; c < D; ++c) ss += (u[c] - m[c]) * (u[c] - m[c]);
  return std::sqrt(ss / static_cast<double>(D) + eps);
}

inline FusionResult allocate(const ViewUpdateSet& u) {
  const auto V = static_cast<Eigen::Index>(u.views());
  const auto L = static_cast<Eigen::Index>(u.locations());
  const auto D = static_cast<Eigen::Index>(u.channels());
  return {RowMatrix::Zero(L, D), RowMatrix::Zero(V, L), RowMatrix::Zero(V, L), RowMatrix::Zero(V, L),
          RowMatrix::Zero(L, D)};
}

}  // namespace detail

/// Per-location mean over views.
inline RowMatrix consensus_center(const ViewUpdateSet& u, CenterKind kind = CenterKind::Mean) {
  RowMatrix m(static_cast<Eigen::Index>(u.locations()), static_cast<Eigen::Index>(u.channels()));
  for (std::size_t l = 0; l < u.locations(); ++l) {
    double* row = m.data() + l * u.channels();
    kind == CenterKind::Mean ? detail::mean_center_at(u, l, row) : detail::median_center_at(u, l, row);
  }
  return m;
}

/// d(v, l) = sqrt(|u(v, l) - m(l)|^2 / D + eps).
inline RowMatrix deviations(const ViewUpdateSet& u, const RowMatrix& m, double eps) {
  if (static_cast<std::size_t>(m.rows()) != u.locations() || static_cast<std::size_t>(m.cols()) != u.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "center shape does not match updates");
  }
  RowMatrix d(static_cast<Eigen::Index>(u.views()), static_cast<Eigen::Index>(u.locations()));
  for (std::size_t v = 0; v < u.views(); ++v) {
    for (std::size_t l = 0; l < u.locations(); ++l) {
      d(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(l)) =
          detail::rms_deviation(u.at(v, l), m.data() + l * u.channels(), u.channels(), eps);
    }
  }
  return d;
}

/// Softmax over views of -beta d, per location, then the weighted sum of
/// updates. When all logits at a location coincide the plain view mean is
/// used, so beta = 0 reproduces average_fuse exactly.
inline FusionResult agreement_fuse(const ViewUpdateSet& u, const FusionParams& params = {}) {
  params.validate();
  const std::size_t V = u.views(), L = u.locations(), D = u.channels();
  auto r = detail::allocate(u);
  parallel_for(L, params.jobs, [&](std::size_t l) {
    const auto li = static_cast<Eigen::Index>(l);
    double* m = r.center.data() + l * D;
    params.center == CenterKind::Mean ? detail::mean_center_at(u, l, m) : detail::median_center_at(u, l, m);

    std::vector<double> logit(V);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < V; ++v) {
      const double d = detail::rms_deviation(u.at(v, l), m, D, params.eps);
      r.deviation(static_cast<Eigen::Index>(v), li) = d;
      r.agreement(static_cast<Eigen::Index>(v), li) = std::exp(-params.beta * d);
      logit[v] = -params.beta * d;
      top = std::max(top, logit[v]);
    }
    const bool uniform = std::all_of(logit.begin(), logit.end(), [&](double z) { return z == logit[0]; });

    double* out = r.fused.data() + l * D;
    if (uniform) {
      for (std::size_t v = 0; v < V; ++v) r.weights(static_cast<Eigen::Index>(v), li) = 1.0 / static_cast<double>(V);
      detail::mean_center_at(u, l, out);
      return;
    }
    double total = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      logit[v] = std::exp(logit[v] - top);
      total += logit[v];
    }
    for (std::size_t v = 0; v < V; ++v) {
      const double w = logit[v] / total;
      r.weights(static_cast<Eigen::Index>(v), li) = w;
      const double* uv = u.at(v, l);
      for (std::size_t c = 0; c < D; ++c) out[c] += w * uv[c];
    }
  });
  return r;
}

/// Uniform weights; deviations and agreement (beta = 1 scale) kept for diagnostics.
inline FusionResult average_fuse(const ViewUpdateSet& u, const FusionParams& diagnostics = {}) {
  FusionParams p = diagnostics;
  p.center = CenterKind::Mean;
  p.validate();
  auto r = detail::allocate(u);
  const std::size_t V = u.views(), D = u.channels();
  for (std::size_t l = 0; l < u.locations(); ++l) {
    detail::mean_center_at(u, l, r.center.data() + l * D);
    detail::mean_center_at(u, l, r.fused.data() + l * D);
    for (std::size_t v = 0; v < V; ++v) {
      const auto vi = static_cast<Eigen::Index>(v);
      const auto li = static_cast<Eigen::Index>(l);
      r.weights(vi, li) = 1.0 / static_cast<double>(V);
      r.deviation(vi, li) = detail::rms_deviation(u.at(v, l), r.center.data() + l * D, D, p.eps);
      r.agreement(vi, li) = std::exp(-p.beta * r.deviation(vi, li));
    }
  }
  return r;
}

using FusionStrategy = std::function<FusionResult(const ViewUpdateSet&, const FusionParams&)>;

/// Registered strategies: "agreement" and "average".
inline std::map<std::string, FusionStrategy>& fusion_strategies() {
  static std::map<std::string, FusionStrategy> registry = {
      {"agreement", [](const ViewUpdateSet& u, const FusionParams& p) { return agreement_fuse(u, p); }},
      {"average", [](const ViewUpdateSet& u, const FusionParams& p) { return average_fuse(u, p); }},
  };
  return registry;
}

inline const FusionStrategy& fusion_strategy(const std::string& name) {
  const auto& reg = fusion_strategies();
  auto it = reg.find(name);
  if (it == reg.end()) throw Error(ErrorCode::InvalidConfig, "unknown fusion strategy '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Surrogate trajectory

/// Per-step noise scale; must be non-negative and non-increasing.
struct NoiseSchedule {
  std::vector<double> sigma;
  std::string label;

  static NoiseSchedule geometric(double sigma0, double gamma, std::size_t steps) {
    NoiseSchedule s;
    double v = sigma0;
    for (std::size_t t = 0; t < steps; ++t, v *= gamma) s.sigma.push_back(v);
    s.label = "geometric(sigma0=" + detail::format_double(sigma0) + ";gamma=" + detail::format_double(gamma) + ")";
    return s;
  }

  static NoiseSchedule constant(double sigma, std::size_t steps) {
    NoiseSchedule s;
    s.sigma.assign(steps, sigma);
    s.label = "constant(sigma=" + detail::format_double(sigma) + ")";
    return s;
  }

  void validate() const {
    if (sigma.empty()) throw Error(ErrorCode::InvalidSchedule, "schedule needs at least one step");
    for (std::size_t t = 0; t < sigma.size(); ++t) {
      if (!std::isfinite(sigma[t]) || sigma[t] < 0.0) {
        throw Error(ErrorCode::InvalidSchedule, "sigma must be finite and >= 0", "step " + std::to_string(t + 1));
      }
      if (t > 0 && sigma[t] > sigma[t - 1]) {
        throw Error(ErrorCode::InvalidSchedule, "sigma must be non-increasing", "step " + std::to_string(t + 1));
      }
    }
  }
};

struct SimulationConfig {
  std::size_t views = 3;
  std::size_t locations = 16;
  std::size_t channels = 8;
  NoiseSchedule schedule = NoiseSchedule::geometric(1.0, 0.9, 60);
  RowMatrix target;  // L x D; empty means drawn from N(0, 1) with the seed
  double contraction = 0.1;
  std::vector<double> view_bias;  // per view, added to every channel; empty means none
  FusionParams fusion;
  std::uint64_t seed = 0;
  bool keep_results = false;
};

struct TrajectoryStep {
  std::size_t step = 0;  // 1-based
  std::vector<double> mean_agreement;  // per view, averaged over locations
  std::vector<double> mean_weight;     // per view, averaged over locations
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<FusionResult> results;  // per step, when keep_results
  RowMatrix final_state;

  /// Mean agreement over views at each step.
  std::vector<double> agreement_curve() const {
    std::vector<double> out;
    for (const auto& s : steps) {
      double a = 0.0;
      for (double v : s.mean_agreement) a += v;
      out.push_back(a / static_cast<double>(s.mean_agreement.size()));
    }
    return out;
  }
};

/// Each step synthesizes u(v) = contraction * (target - x) + sigma_t * noise(v)
/// + bias(v), fuses with agreement weights and advances x by the fused update.
inline Trajectory simulate_trajectory(const SimulationConfig& cfg) {
  cfg.schedule.validate();
  cfg.fusion.validate();
  if (cfg.views == 0 || cfg.locations == 0 || cfg.channels == 0) {
    throw Error(ErrorCode::InvalidConfig, "V, L and D must all be >= 1");
  }
  if (!cfg.view_bias.empty() && cfg.view_bias.size() != cfg.views) {
    throw Error(ErrorCode::InvalidConfig, "view_bias needs one entry per view");
  }
  const auto L = static_cast<Eigen::Index>(cfg.locations);
  const auto D = static_cast<Eigen::Index>(cfg.channels);

  RowMatrix target = cfg.target;
  if (target.size() == 0) {
    Rng rng(derive_seed(cfg.seed, 0));
    target.resize(L, D);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();
  } else if (target.rows() != L || target.cols() != D) {
    throw Error(ErrorCode::DimensionMismatch, "target must be L x D");
  }

  Rng noise(derive_seed(cfg.seed, 1));
  RowMatrix x = RowMatrix::Zero(L, D);
  Trajectory traj;
  for (std::size_t t = 0; t < cfg.schedule.sigma.size(); ++t) {
    const double sigma = cfg.schedule.sigma[t];
    ViewUpdateSet u(cfg.views, cfg.locations, cfg.channels);
    for (std::size_t v = 0; v < cfg.views; ++v) {
      const double bias = cfg.view_bias.empty() ? 0.0 : cfg.view_bias[v];
      for (std::size_t l = 0; l < cfg.locations; ++l) {
        for (std::size_t c = 0; c < cfg.channels; ++c) {
          const auto li = static_cast<Eigen::Index>(l), ci = static_cast<Eigen::Index>(c);
          u(v, l, c) = cfg.contraction * (target(li, ci) - x(li, ci)) + sigma * noise.normal() + bias;
        }
      }
    }
    auto r = agreement_fuse(u, cfg.fusion);
    x += r.fused;

    TrajectoryStep s;
    s.step = t + 1;
    for (std::size_t v = 0; v < cfg.views; ++v) {
      s.mean_agreement.push_back(r.agreement.row(static_cast<Eigen::Index>(v)).mean());
      s.mean_weight.push_back(r.weights.row(static_cast<Eigen::Index>(v)).mean());
    }
    traj.steps.push_back(std::move(s));
    if (cfg.keep_results) traj.results.push_back(std::move(r));
  }
  traj.final_state = std::move(x);
  return traj;
}

/// Trace CSV: a '#' header with the run parameters, then one row per (step, view).
inline std::string trajectory_csv(const Trajectory& traj, const SimulationConfig& cfg) {
  std::ostringstream os;
  os << "# beta=" << detail::format_double(cfg.fusion.beta) << " eps=" << detail::format_double(cfg.fusion.eps)
     << " V=" << cfg.views << " L=" << cfg.locations << " D=" << cfg.channels << " seed=" << cfg.seed
     << " schedule=" << (cfg.schedule.label.empty() ? "explicit" : cfg.schedule.label) << "\n";
  os << "step,view,mean_agreement,mean_weight\n";
  for (const auto& s : traj.steps) {
    for (std::size_t v = 0; v < s.mean_agreement.size(); ++v) {
      os << s.step << ',' << v << ',' << detail::format_double(s.mean_agreement[v]) << ','
         << detail::format_double(s.mean_weight[v]) << '\n';
    }
  }
  return os.str();
}

}  // namespace herdscale
