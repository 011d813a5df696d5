#include <gtest/gtest.h>

#include "herdscale/regressors.hpp"
#include "test_support.hpp"

using namespace herdscale;

namespace {

ModelSpec spec(Family f, Hyperparameters params = {}, std::uint64_t seed = 0) {
  return {std::string(family_name(f)), f, std::move(params), seed};
}

struct Data {
  Matrix X;
  Vector y;
};

Data noisy_data(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  Rng rng(seed);
  Data out{Matrix(n, d), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double t = 50.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      out.X(i, j) = rng.uniform(0, 10);
      t += (j + 1) * out.X(i, j) + (j == 0 ? 0.3 * out.X(i, j) * out.X(i, j) : 0.0);
    }
    out.y[i] = t + rng.normal();
  }
  return out;
}

double train_mse(const FittedModel& m, const Data& d) { return (m.predict(d.X) - d.y).squaredNorm() / d.y.size(); }

}  // namespace

TEST(Regressors, OlsRecoversExactLine) {
  Matrix X(10, 1);
  Vector y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = i;
    y[i] = 2 * i + 1;
  }
  const auto m = fit(spec(Family::OLS), X, y);
  const auto [slope, intercept] = m.raw_linear_coefficients();
  EXPECT_NEAR(slope[0], 2.0, 1e-9);
  EXPECT_NEAR(intercept, 1.0, 1e-9);
}

TEST(Regressors, OlsRankDeficientDesignUsesPseudoInverse) {
  Matrix X(6, 2);
  Vector y(6);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = i;
    X(i, 1) = 2 * i;
    y[i] = 3 * i + 10;
  }
  const auto m = fit(spec(Family::OLS), X, y);
  EXPECT_NEAR((m.predict(X) - y).cwiseAbs().maxCoeff(), 0.0, 1e-9);
}

TEST(Regressors, RidgeSlopeMatchesClosedFormAndShrinks) {
  const auto d = noisy_data(2, 30, 1);
  const double xbar = d.X.col(0).mean(), ybar = d.y.mean();
  double sxx = 0, sxy = 0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    sxx += (d.X(i, 0) - xbar) * (d.X(i, 0) - xbar);
    sxy += (d.X(i, 0) - xbar) * (d.y[i] - ybar);
  }
  const double s2 = sxx / 30.0;  // squared population std of x
  double previous = std::numeric_limits<double>::infinity();
  for (double alpha : {0.0, 1.0, 10.0, 1000.0}) {
    const auto m = fit(spec(Family::Ridge, {{"alpha", alpha}}), d.X, d.y);
    const double slope = m.raw_linear_coefficients().first[0];
    EXPECT_NEAR(slope, sxy / (sxx + alpha * s2), 1e-9) << alpha;
    EXPECT_LT(std::abs(slope), previous);
    previous = std::abs(slope);
  }
}

TEST(Regressors, LargeLassoPenaltyGivesTrainingMean) {
  const auto d = noisy_data(3, 40, 4);
  const auto m = fit(spec(Family::Lasso, {{"alpha", 1e6}}), d.X, d.y);
  const auto& lin = std::get<LinearParams>(m.params());
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_EQ(lin.coef[j], 0.0);
  EXPECT_NEAR(m.predict(d.X)[5], d.y.mean(), 1e-9);
}

TEST(Regressors, ElasticNetAndHuberFitLinearData) {
  const auto d = noisy_data(4, 60, 3);
  for (Family f : {Family::ElasticNet, Family::Huber}) {
    const auto m = fit(spec(f, f == Family::ElasticNet ? Hyperparameters{{"alpha", 0.01}} : Hyperparameters{}), d.X, d.y);
    const double r = std::sqrt(train_mse(m, d));
    EXPECT_LT(r, 5.0) << family_name(f);
  }
}

TEST(Regressors, HuberResistsOutliers) {
  auto d = noisy_data(5, 50, 1);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] = 3.0 * d.X(i, 0) + 20.0;
  d.y[3] += 500;
  d.y[17] += 800;
  const auto ols = fit(spec(Family::OLS), d.X, d.y).raw_linear_coefficients().first[0];
  const auto hub = fit(spec(Family::Huber), d.X, d.y).raw_linear_coefficients().first[0];
  EXPECT_LT(std::abs(hub - 3.0), std::abs(ols - 3.0));
  EXPECT_NEAR(hub, 3.0, 0.05);
}

TEST(Regressors, DecisionTreeOnConstantTarget) {
  const auto d = noisy_data(6, 20, 3);
  const Vector y = Vector::Constant(20, 42.0);
  const auto m = fit(spec(Family::DecisionTree), d.X, y);
  const auto other = noisy_data(7, 15, 3);
  for (double p : m.predict(other.X)) EXPECT_EQ(p, 42.0);
}

TEST(Regressors, KnnOneAtTrainingPoint) {
  const auto d = noisy_data(8, 25, 2);
  const auto m = fit(spec(Family::KNN, {{"k", 1}}), d.X, d.y);
  EXPECT_EQ(m.predict(d.X), d.y);
}

TEST(Regressors, KnnDistanceTiesGoToLowerIndex) {
  Matrix X(3, 1);
  X << 0, 2, 4;
  Vector y(3);
  y << 10, 20, 30;
  const auto m = fit(spec(Family::KNN, {{"k", 1}}), X, y);
  Matrix q(2, 1);
  q << 1, 3;
  EXPECT_EQ(m.predict(q), (Vector(2) << 10, 20).finished());
}

TEST(Regressors, SingleUnprunedTreeReproducesTrainingTargets) {
  Matrix X(5, 2);
  X << 1, 5, 2, 3, 3, 9, 4, 1, 5, 7;
  Vector y(5);
  y << 10, 40, 20, 50, 30;
  const auto m = fit(spec(Family::RandomForest, {{"n_trees", 1}, {"bootstrap", 0}, {"max_features", 2}}), X, y);
  EXPECT_EQ(m.predict(X), y);
}

TEST(Regressors, ZeroBoostingRoundsPredictsMean) {
  const auto d = noisy_data(9, 30, 2);
  const auto m = fit(spec(Family::GradientBoosting, {{"n_rounds", 0}}), d.X, d.y);
  const auto other = noisy_data(10, 5, 2);
  for (double p : m.predict(other.X)) EXPECT_EQ(p, d.y.mean());
}

TEST(Regressors, TreeTrainingErrorFallsWithDepth) {
  const auto d = noisy_data(11, 80, 3);
  double previous = std::numeric_limits<double>::infinity();
  for (int depth : {1, 2, 3, 5, 8, 0}) {
    const double mse = train_mse(fit(spec(Family::DecisionTree, {{"max_depth", depth}}), d.X, d.y), d);
    EXPECT_LE(mse, previous) << depth;
    previous = mse;
  }
  EXPECT_EQ(previous, 0.0);
}

TEST(Regressors, BoostingTrainingErrorFallsWithRounds) {
  const auto d = noisy_data(12, 80, 3);
  double previous = std::numeric_limits<double>::infinity();
  for (int rounds : {0, 1, 5, 20, 100}) {
    const double mse = train_mse(fit(spec(Family::GradientBoosting, {{"n_rounds", rounds}}), d.X, d.y), d);
    EXPECT_LE(mse, previous) << rounds;
    previous = mse;
  }
}

TEST(Regressors, EveryFamilyIsDeterministicAndFinite) {
  const auto d = noisy_data(13, 40, 4);
  const auto q = noisy_data(14, 10, 4);
  for (const auto& s : default_model_specs(99)) {
    auto light = s;
    if (s.family == Family::RandomForest || s.family == Family::ExtraTrees) light.params["n_trees"] = 20;
    if (s.family == Family::AdaBoost || s.family == Family::GradientBoosting) light.params["n_rounds"] = 30;
    const Vector a = fit(light, d.X, d.y).predict(q.X);
    const Vector b = fit(light, d.X, d.y).predict(q.X);
    EXPECT_EQ(a, b) << s.id;
    EXPECT_TRUE(a.allFinite()) << s.id;
  }
}

TEST(Regressors, RowOrderDoesNotMatterForNonTreeFamilies) {
  const auto d = noisy_data(15, 40, 3);
  const auto q = noisy_data(16, 10, 3);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(1);
  rng.shuffle(perm);
  Matrix Xp(40, 3);
  Vector yp(40);
  for (std::size_t i = 0; i < 40; ++i) {
    Xp.row(static_cast<Eigen::Index>(i)) = d.X.row(static_cast<Eigen::Index>(perm[i]));
    yp[static_cast<Eigen::Index>(i)] = d.y[static_cast<Eigen::Index>(perm[i])];
  }
  for (Family f : {Family::OLS, Family::Ridge, Family::Lasso, Family::ElasticNet, Family::Huber, Family::KNN}) {
    const Vector a = fit(spec(f), d.X, d.y).predict(q.X);
    const Vector b = fit(spec(f), Xp, yp).predict(q.X);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9) << family_name(f);
  }
}

TEST(Regressors, InputValidation) {
  const auto d = noisy_data(17, 10, 2);
  auto code = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([&] { fit(spec(Family::Ridge, {{"alpha", -1}}), d.X, d.y); }), ErrorCode::InvalidHyperparameter);
  EXPECT_EQ(code([&] { fit(spec(Family::KNN, {{"k", 0}}), d.X, d.y); }), ErrorCode::InvalidHyperparameter);
  EXPECT_EQ(code([&] { fit(spec(Family::OLS, {{"alpha", 1}}), d.X, d.y); }), ErrorCode::InvalidHyperparameter);
  EXPECT_EQ(code([&] { fit(spec(Family::GradientBoosting, {{"learning_rate", 1.5}}), d.X, d.y); }),
            ErrorCode::InvalidHyperparameter);
  Vector neg = d.y;
  neg[0] = -1;
  EXPECT_EQ(code([&] { fit(spec(Family::OLS), d.X, neg); }), ErrorCode::NonPositiveTarget);
  Matrix bad = d.X;
  bad(1, 1) = std::nan("");
  EXPECT_EQ(code([&] { fit(spec(Family::OLS), bad, d.y); }), ErrorCode::NonFiniteInput);
  const auto m = fit(spec(Family::OLS), d.X, d.y);
  EXPECT_EQ(code([&] { m.predict(Matrix::Zero(2, 3)); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code([&] { m.predict(bad); }), ErrorCode::NonFiniteInput);
}

TEST(Regressors, PresetsAreGradientBoostingProfiles) {
  EXPECT_EQ(gradient_boosting_preset("gbC")->at("max_depth"), 6.0);
  EXPECT_FALSE(gradient_boosting_preset("gbZ"));
}
