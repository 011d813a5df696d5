#include <gtest/gtest.h>

#include <numeric>

#include "herdscale/fusion.hpp"
#include "test_support.hpp"

using namespace herdscale;

namespace {

ViewUpdateSet scalar_views(std::initializer_list<double> values) {
  std::vector<RowMatrix> views;
  for (double v : values) views.push_back(RowMatrix::Constant(1, 1, v));
  return ViewUpdateSet::from_views(views);
}

ViewUpdateSet random_views(std::uint64_t seed, std::size_t V, std::size_t L, std::size_t D, double spread = 1.0) {
  Rng rng(seed);
  ViewUpdateSet u(V, L, D);
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t c = 0; c < D; ++c) u(v, l, c) = spread * rng.normal() + 0.3 * static_cast<double>(v);
    }
  }
  return u;
}

FusionParams with_beta(double beta, double eps = 1e-8) {
  FusionParams p;
  p.beta = beta;
  p.eps = eps;
  return p;
}

}  // namespace

TEST(Center, MeanExamples) {
  EXPECT_EQ(consensus_center(scalar_views({1.0, 3.0}))(0, 0), 2.0);
  EXPECT_EQ(consensus_center(scalar_views({0.0, 0.0, 3.0}))(0, 0), 1.0);
  EXPECT_EQ(consensus_center(scalar_views({0.0, 0.0, 3.0}), CenterKind::Median)(0, 0), 0.0);
  EXPECT_EQ(consensus_center(scalar_views({4.0, 1.0, 2.0, 9.0}), CenterKind::Median)(0, 0), 3.0);
}

TEST(Deviation, RmsNotL2) {
  RowMatrix a = RowMatrix::Ones(1, 4), b = RowMatrix::Zero(1, 4);
  const auto u = ViewUpdateSet::from_views({a, b});
  const RowMatrix m = RowMatrix::Zero(1, 4);
  const auto d = deviations(u, m, 1e-300);
  EXPECT_DOUBLE_EQ(d(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 1e-150);

  const auto s = scalar_views({3.0});
  EXPECT_DOUBLE_EQ(deviations(s, RowMatrix::Constant(1, 1, 1.0), 1e-300)(0, 0), 2.0);
}

TEST(AgreementFuse, HandDerivedThreeViewExample) {
  const auto r = agreement_fuse(scalar_views({0.0, 0.0, 3.0}), with_beta(1.0, 1e-300));
  EXPECT_DOUBLE_EQ(r.center(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.deviation(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.deviation(2, 0), 2.0);
  EXPECT_NEAR(r.agreement(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(r.agreement(2, 0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(r.weights(0, 0), 0.42232, 1e-5);
  EXPECT_NEAR(r.weights(1, 0), 0.42232, 1e-5);
  EXPECT_NEAR(r.weights(2, 0), 0.15536, 1e-5);
  EXPECT_NEAR(r.fused(0, 0), 0.46608, 1e-4);
  // exact closed form
  EXPECT_NEAR(r.fused(0, 0), 3.0 / (2.0 * std::exp(1.0) + 1.0), 1e-12);
}

TEST(AgreementFuse, WeightsNormalizedAndPositive) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto r = agreement_fuse(random_views(seed, 2 + seed % 5, 7, 3), with_beta(0.5 + seed));
    for (Eigen::Index l = 0; l < r.weights.cols(); ++l) {
      EXPECT_NEAR(r.weights.col(l).sum(), 1.0, 1e-12);
      EXPECT_GT(r.weights.col(l).minCoeff(), 0.0);
    }
  }
}

TEST(AgreementFuse, ZeroBetaMatchesAverageBitForBit) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = random_views(seed, 4, 9, 5);
    const auto a = agreement_fuse(u, with_beta(0.0));
    const auto b = average_fuse(u);
    EXPECT_EQ(a.fused, b.fused);
    for (Eigen::Index i = 0; i < a.weights.size(); ++i) EXPECT_EQ(a.weights.data()[i], 0.25);
  }
}

TEST(AgreementFuse, IdenticalViews) {
  const RowMatrix x = (RowMatrix(2, 3) << 1, -2, 0.5, 4, 0, 7).finished();
  const auto r = agreement_fuse(ViewUpdateSet::from_views({x, x, x}), with_beta(2.0));
  EXPECT_EQ(r.fused, x);
  for (Eigen::Index i = 0; i < r.weights.size(); ++i) {
    EXPECT_EQ(r.weights.data()[i], 1.0 / 3.0);
    EXPECT_NEAR(r.agreement.data()[i], std::exp(-2.0 * std::sqrt(1e-8)), 1e-15);
  }
}

TEST(AgreementFuse, MonotoneInDeviation) {
  const auto u = random_views(3, 5, 20, 4);
  const auto r = agreement_fuse(u, with_beta(1.5));
  for (Eigen::Index l = 0; l < 20; ++l) {
    for (Eigen::Index a = 0; a < 5; ++a) {
      for (Eigen::Index b = 0; b < 5; ++b) {
        if (r.deviation(a, l) < r.deviation(b, l)) {
          EXPECT_GT(r.weights(a, l), r.weights(b, l));
        }
      }
    }
  }
}

TEST(AgreementFuse, FusedUpdateIsConvex) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = random_views(seed, 3 + seed % 3, 6, 4, 5.0);
    const auto r = agreement_fuse(u, with_beta(0.7));
    for (std::size_t l = 0; l < 6; ++l) {
      for (std::size_t c = 0; c < 4; ++c) {
        double lo = u(0, l, c), hi = lo;
        for (std::size_t v = 1; v < u.views(); ++v) {
          lo = std::min(lo, u(v, l, c));
          hi = std::max(hi, u(v, l, c));
        }
        const double f = r.fused(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
        EXPECT_GE(f, lo - 1e-12);
        EXPECT_LE(f, hi + 1e-12);
      }
    }
  }
}

TEST(AgreementFuse, LargeBetaPicksArgmin) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = random_views(seed, 4, 10, 3);
    const auto r = agreement_fuse(u, with_beta(1e6));
    for (Eigen::Index l = 0; l < 10; ++l) {
      Eigen::Index best;
      r.deviation.col(l).minCoeff(&best);
      for (Eigen::Index v = 0; v < 4; ++v) EXPECT_NEAR(r.weights(v, l), v == best ? 1.0 : 0.0, 1e-6);
    }
  }
  // exact ties share the weight
  const auto r = agreement_fuse(scalar_views({0.0, 0.0, 3.0}), with_beta(1e6));
  EXPECT_NEAR(r.weights(0, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.weights(1, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.weights(2, 0), 0.0, 1e-6);
}

TEST(AgreementFuse, PermutingViewsPermutesWeights) {
  const auto u = random_views(5, 4, 8, 3);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<RowMatrix> views;
  for (auto p : perm) views.push_back(u.view(p));
  const auto a = agreement_fuse(u, with_beta(1.2));
  const auto b = agreement_fuse(ViewUpdateSet::from_views(views), with_beta(1.2));
  EXPECT_LE((a.fused - b.fused).cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_LE((b.weights.row(static_cast<Eigen::Index>(i)) - a.weights.row(static_cast<Eigen::Index>(perm[i]))).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(AgreementFuse, ShiftStability) {
  const auto u = random_views(6, 3, 8, 4);
  const double c = 2.5;
  ViewUpdateSet shifted = u;
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t l = 0; l < 8; ++l) {
      for (std::size_t ch = 0; ch < 4; ++ch) shifted(v, l, ch) += c;
    }
  }
  for (auto kind : {CenterKind::Mean, CenterKind::Median}) {
    auto p = with_beta(1.0);
    p.center = kind;
    const auto a = agreement_fuse(u, p);
    const auto b = agreement_fuse(shifted, p);
    EXPECT_LE((b.center.array() - a.center.array() - c).abs().maxCoeff(), 1e-12);
    EXPECT_LE((b.fused.array() - a.fused.array() - c).abs().maxCoeff(), 1e-12);
    EXPECT_LE((b.deviation - a.deviation).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((b.agreement - a.agreement).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((b.weights - a.weights).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AgreementFuse, PartitioningDoesNotChangeResults) {
  const auto u = random_views(7, 5, 101, 6);
  auto p = with_beta(0.8);
  const auto a = agreement_fuse(u, p);
  p.jobs = 7;
  const auto b = agreement_fuse(u, p);
  EXPECT_EQ(a.fused, b.fused);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(AverageFuse, Examples) {
  EXPECT_EQ(average_fuse(scalar_views({0.0, 0.0, 3.0})).fused(0, 0), 1.0);
  const RowMatrix x = RowMatrix::Constant(2, 2, 0.7);
  EXPECT_EQ(average_fuse(ViewUpdateSet::from_views({x})).fused, x);
  EXPECT_EQ(agreement_fuse(ViewUpdateSet::from_views({x})).fused, x);
}

TEST(Fusion, InputValidation) {
  auto code = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([] { ViewUpdateSet::from_views({RowMatrix::Zero(2, 2), RowMatrix::Zero(2, 3)}); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code([] { ViewUpdateSet(0, 1, 1); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code([] { scalar_views({1.0, std::nan("")}); }), ErrorCode::NonFiniteInput);
  EXPECT_EQ(code([] { agreement_fuse(scalar_views({1.0}), with_beta(-1.0)); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code([] { agreement_fuse(scalar_views({1.0}), with_beta(1.0, 0.0)); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code([] { fusion_strategy("entropy"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(fusion_strategy("average")(scalar_views({0.0, 0.0, 3.0}), {}).fused(0, 0), 1.0);
}

TEST(Schedule, Validation) {
  EXPECT_NO_THROW(NoiseSchedule::geometric(1.0, 0.9, 60).validate());
  NoiseSchedule rising{{0.1, 0.2}, "x"};
  EXPECT_THROW(rising.validate(), Error);
  NoiseSchedule negative{{-0.1}, "x"};
  EXPECT_THROW(negative.validate(), Error);
  EXPECT_THROW(NoiseSchedule{}.validate(), Error);
}

TEST(Trajectory, ZeroNoiseKeepsAgreementAtFloor) {
  SimulationConfig cfg;
  cfg.schedule = NoiseSchedule::constant(0.0, 30);
  cfg.seed = 4;
  const auto curve = simulate_trajectory(cfg).agreement_curve();
  ASSERT_EQ(curve.size(), 30u);
  for (double a : curve) EXPECT_NEAR(a, std::exp(-std::sqrt(1e-8)), 1e-12);
}

TEST(Trajectory, DecayingNoiseConverges) {
  std::vector<double> mean_curve(60, 0.0);
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimulationConfig cfg;
    cfg.seed = seed;
    const auto curve = simulate_trajectory(cfg).agreement_curve();
    converged += curve.back() >= 0.99;
    for (std::size_t t = 0; t < 60; ++t) mean_curve[t] += curve[t] / 20.0;
  }
  EXPECT_GE(converged, 19);
  auto window = [&](std::size_t from) {
    return std::accumulate(mean_curve.begin() + static_cast<std::ptrdiff_t>(from),
                           mean_curve.begin() + static_cast<std::ptrdiff_t>(from + 10), 0.0) / 10.0;
  };
  for (std::size_t w = 0; w + 20 <= 60; w += 10) EXPECT_LT(window(w), window(w + 10));
}

TEST(Trajectory, BiasedViewIsDownWeighted) {
  SimulationConfig cfg;
  cfg.schedule = NoiseSchedule::constant(0.01, 40);
  cfg.view_bias = {0.5, 0.0, 0.0};
  cfg.seed = 9;
  const auto traj = simulate_trajectory(cfg);
  for (const auto& s : traj.steps) EXPECT_LT(s.mean_weight[0], 1.0 / 3.0) << s.step;
}

TEST(Trajectory, ReproducibleAndTraceFormat) {
  SimulationConfig cfg;
  cfg.seed = 11;
  cfg.schedule = NoiseSchedule::geometric(1.0, 0.9, 12);
  const auto a = simulate_trajectory(cfg);
  const auto b = simulate_trajectory(cfg);
  EXPECT_EQ(a.final_state, b.final_state);
  const auto csv = trajectory_csv(a, cfg);
  EXPECT_EQ(csv, trajectory_csv(b, cfg));
  EXPECT_EQ(csv.rfind("# beta=1 eps=1e-08 V=3 L=16 D=8 seed=11 schedule=geometric(", 0), 0u);
  EXPECT_NE(csv.find("\nstep,view,mean_agreement,mean_weight\n1,0,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 12 * 3);
}

TEST(Trajectory, ConfigErrors) {
  SimulationConfig cfg;
  cfg.view_bias = {1.0};
  EXPECT_THROW(simulate_trajectory(cfg), Error);
  cfg = SimulationConfig{};
  cfg.target = RowMatrix::Zero(2, 2);
  EXPECT_THROW(simulate_trajectory(cfg), Error);
}
