#pragma once

// JSON round-trip for model specs, fitted base learners and stacked
// ensembles. Doubles are written with 17 significant digits, so a save/load
// cycle reproduces every parameter exactly.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "herdscale/error.hpp"
#include "herdscale/features.hpp"
#include "herdscale/regressors.hpp"
#include "herdscale/stacking.hpp"

namespace herdscale {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "herdscale-stack-v1";

namespace detail {

inline Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline Json matrix_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error(ErrorCode::ParseError, "matrix size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

inline std::string_view combine_name(Combine c) {
  switch (c) {
    case Combine::Mean: return "mean";
    case Combine::WeightedMedian: return "weighted_median";
    case Combine::Additive: return "additive";
  }
  return "";
}

inline Combine parse_combine(const std::string& s) {
  if (s == "mean") return Combine::Mean;
  if (s == "weighted_median") return Combine::WeightedMedian;
  if (s == "additive") return Combine::Additive;
  throw Error(ErrorCode::ParseError, "unknown ensemble combine rule '" + s + "'");
}

inline Json tree_json(const RegressionTree& tree) {
  Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
       value = Json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

inline RegressionTree tree_from(const Json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
    throw Error(ErrorCode::ParseError, "inconsistent tree arrays");
  }
  RegressionTree tree;
  for (std::size_t i = 0; i < n; ++i) {
    const bool leaf = feature[i] < 0;
    const auto bad_child = [&](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(n); };
    if (!leaf && (bad_child(left[i]) || bad_child(right[i]))) throw Error(ErrorCode::ParseError, "bad tree child index");
    tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
  }
  return tree;
}

}  // namespace detail

inline Json to_json(const ModelSpec& spec) {
  return {{"id", spec.id}, {"family", std::string(family_name(spec.family))}, {"params", spec.params}, {"seed", spec.seed}};
}

inline ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec spec;
  spec.id = j.at("id").get<std::string>();
  const auto fam = j.at("family").get<std::string>();
  const auto parsed = parse_family(fam);
  if (!parsed) throw Error(ErrorCode::InvalidConfig, "unknown model family '" + fam + "'", spec.id);
  spec.family = *parsed;
  if (j.contains("params")) spec.params = j.at("params").get<Hyperparameters>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

inline Json to_json(const FittedModel& model) {
  Json j = {{"spec", to_json(model.spec())},
            {"n_features", model.n_features()},
            {"standardizer", {{"mean", detail::vector_json(model.standardizer().mean)},
                              {"scale", detail::vector_json(model.standardizer().scale)}}}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          j["kind"] = "linear";
          j["coef"] = detail::vector_json(p.coef);
          j["intercept"] = p.intercept;
          j["iterations"] = p.iterations;
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          j["kind"] = "knn";
          j["k"] = p.k;
          j["train"] = detail::matrix_json(p.train);
          j["target"] = detail::vector_json(p.target);
        } else {
          j["kind"] = "trees";
          j["combine"] = std::string(detail::combine_name(p.combine));
          j["init"] = p.init;
          j["learning_rate"] = p.learning_rate;
          j["weights"] = p.weights;
          Json trees = Json::array();
          for (const auto& t : p.trees) trees.push_back(detail::tree_json(t));
          j["trees"] = trees;
        }
      },
      model.params());
  return j;
}

inline FittedModel fitted_model_from_json(const Json& j) {
  auto spec = model_spec_from_json(j.at("spec"));
  const auto d = j.at("n_features").get<Eigen::Index>();
  Standardizer st{detail::vector_from(j.at("standardizer").at("mean")),
                  detail::vector_from(j.at("standardizer").at("scale"))};
  if (st.mean.size() != d || st.scale.size() != d) throw Error(ErrorCode::ParseError, "standardizer size mismatch", spec.id);
  const auto kind = j.at("kind").get<std::string>();
  FittedModel::Params params;
  if (kind == "linear") {
    LinearParams p{detail::vector_from(j.at("coef")), j.at("intercept").get<double>(), j.at("iterations").get<int>()};
    if (p.coef.size() != d) throw Error(ErrorCode::ParseError, "coefficient count mismatch", spec.id);
    params = std::move(p);
  } else if (kind == "knn") {
    KnnParams p{detail::matrix_from(j.at("train")), detail::vector_from(j.at("target")), j.at("k").get<int>()};
    if (p.train.cols() != d || p.train.rows() != p.target.size()) throw Error(ErrorCode::ParseError, "knn shape mismatch", spec.id);
    params = std::move(p);
  } else if (kind == "trees") {
    TreeEnsemble e;
    e.combine = detail::parse_combine(j.at("combine").get<std::string>());
    e.init = j.at("init").get<double>();
    e.learning_rate = j.at("learning_rate").get<double>();
    e.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) e.trees.push_back(detail::tree_from(t));
    params = std::move(e);
  } else {
    throw Error(ErrorCode::ParseError, "unknown model kind '" + kind + "'", spec.id);
  }
  return FittedModel(std::move(spec), d, std::move(st), std::move(params));
}

inline Json to_json(const StackedEnsemble& ens) {
  Json bases = Json::array();
  for (const auto& b : ens.bases) bases.push_back(to_json(b));
  return {{"format", kModelFormat},
          {"feature_schema", kFeatureSchemaVersion},
          {"m_top", ens.m_top()},
          {"combiner",
           {{"weights", detail::vector_json(ens.combiner.weights)},
            {"intercept", ens.combiner.intercept},
            {"alpha", ens.combiner.alpha}}},
          {"bases", bases}};
}

inline StackedEnsemble stacked_ensemble_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw Error(ErrorCode::ParseError, "unsupported model format '" + j.at("format").get<std::string>() + "'");
    }
    if (j.at("feature_schema").get<std::string>() != kFeatureSchemaVersion) {
      throw Error(ErrorCode::ParseError, "feature schema mismatch");
    }
    StackedEnsemble ens;
    for (const auto& b : j.at("bases")) ens.bases.push_back(fitted_model_from_json(b));
    const auto& c = j.at("combiner");
    ens.combiner.weights = detail::vector_from(c.at("weights"));
    ens.combiner.intercept = c.at("intercept").get<double>();
    ens.combiner.alpha = c.at("alpha").get<double>();
    if (ens.bases.empty() || static_cast<std::size_t>(ens.combiner.weights.size()) != ens.bases.size()) {
      throw Error(ErrorCode::ParseError, "combiner weight count does not match base models");
    }
    return ens;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what(), "model file");
  }
}

inline void save_stacked_ensemble(const StackedEnsemble& ens, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open for writing", path);
  out << to_json(ens).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed", path);
}

inline StackedEnsemble load_stacked_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open", path);
  try {
    return stacked_ensemble_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what(), path);
  }
}

inline Json to_json(const MetricSummary& s) {
  Json per_fold = Json::array();
  for (double v : s.per_fold) per_fold.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
  return {{"per_fold", per_fold}, {"mean", std::isfinite(s.mean) ? Json(s.mean) : Json(nullptr)},
          {"std", std::isfinite(s.std) ? Json(s.std) : Json(nullptr)}};
}

/// {"r2": {...}, "mae": {...}, "mape": {...}}; non-finite values become null.
inline Json to_json(const MetricReport& r) {
  return {{"r2", to_json(r.r2)}, {"mae", to_json(r.mae)}, {"mape", to_json(r.mape)}};
}

}  // namespace herdscale
