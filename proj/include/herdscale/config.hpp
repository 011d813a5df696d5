#pragma once

// Pipeline configuration. One JSON document; every key the user may set
// appears in the resolved defaults, and anything else is rejected.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdscale/cleaning.hpp"
#include "herdscale/cross_validation.hpp"
#include "herdscale/features.hpp"
#include "herdscale/fusion.hpp"
#include "herdscale/model_spec.hpp"
#include "herdscale/serialization.hpp"

namespace herdscale {

inline constexpr const char* kToolVersion = "herdscale 1.0.0";

struct SimulationSettings {
  std::size_t views = 3;
  std::size_t locations = 16;
  std::size_t channels = 8;
  std::size_t steps = 60;
  double sigma0 = 1.0;
  double gamma = 0.9;
  std::vector<double> schedule;  // explicit sigma per step; overrides sigma0/gamma/steps when set
  double contraction = 0.1;
  std::vector<double> view_bias;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  RansacParams cleaning;
  std::string feature_schema{kFeatureSchemaVersion};
  std::vector<ModelSpec> models = default_model_specs();
  std::size_t m_top = 11;
  double alpha = 1.0;
  int inner_k = 5;
  int k = 5;
  std::uint64_t seed = 0;
  FusionParams fusion;
  std::string fusion_strategy = "agreement";
  SimulationSettings simulation;

  StackingOptions stacking_options(int jobs) const {
    StackingOptions opt;
    opt.specs = models;
    opt.m_top = m_top;
    opt.alpha = alpha;
    opt.inner_k = inner_k;
    opt.jobs = jobs;
    return opt;
  }

  SimulationConfig simulation_config() const {
    SimulationConfig c;
    c.views = simulation.views;
    c.locations = simulation.locations;
    c.channels = simulation.channels;
    if (simulation.schedule.empty()) {
      c.schedule = NoiseSchedule::geometric(simulation.sigma0, simulation.gamma, simulation.steps);
    } else {
      c.schedule.sigma = simulation.schedule;
      c.schedule.label = "explicit";
    }
    c.contraction = simulation.contraction;
    c.view_bias = simulation.view_bias;
    c.fusion = fusion;
    c.seed = simulation.seed;
    return c;
  }
};

namespace detail {

inline std::string_view center_name(CenterKind c) { return c == CenterKind::Mean ? "mean" : "median"; }

/// Recursively checks that every key of `user` exists in `schema`. Arrays and
/// values are not descended except where the schema holds an object.
inline void reject_unknown_keys(const Json& user, const Json& schema, const std::string& path) {
  if (!user.is_object()) throw Error(ErrorCode::InvalidConfig, "expected an object", path.empty() ? "<root>" : path);
  for (const auto& [key, value] : user.items()) {
    const auto here = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown key", here);
    if (schema.at(key).is_object() && key != "params") reject_unknown_keys(value, schema.at(key), here);
  }
}

inline Json model_entry_schema() {
  return {{"id", ""}, {"family", ""}, {"preset", ""}, {"params", Json::object()}, {"seed", 0}};
}

inline ModelSpec model_from_entry(const Json& j, std::uint64_t default_seed, std::size_t index) {
  const auto where = "models[" + std::to_string(index) + "]";
  reject_unknown_keys(j, model_entry_schema(), where);
  ModelSpec spec;
  Hyperparameters params;
  std::string family_str = j.value("family", std::string{});
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    const auto p = gradient_boosting_preset(preset);
    if (!p) throw Error(ErrorCode::InvalidConfig, "unknown preset '" + preset + "'", where);
    if (!family_str.empty() && family_str != family_name(Family::GradientBoosting)) {
      throw Error(ErrorCode::InvalidConfig, "presets apply to gradient_boosting only", where);
    }
    family_str = std::string(family_name(Family::GradientBoosting));
    params = *p;
    spec.id = preset;
  }
  const auto family = parse_family(family_str);
  if (!family) throw Error(ErrorCode::InvalidConfig, "unknown model family '" + family_str + "'", where);
  spec.family = *family;
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "hyperparameter must be a number", where + ".params." + k);
      params[k] = v.get<double>();
    }
  }
  spec.params = std::move(params);
  if (j.contains("id")) spec.id = j.at("id").get<std::string>();
  if (spec.id.empty()) spec.id = family_str;
  spec.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : default_seed;
  spec.validate();
  return spec;
}

/// Applies "a.b.c" = value to a JSON object, creating intermediate objects.
inline void set_path(Json& root, const std::string& dotted, const Json& value) {
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "empty key in '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = Json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace detail

/// The fully resolved configuration as JSON.
inline Json to_json(const PipelineConfig& c) {
  Json models = Json::array();
  for (const auto& m : c.models) {
    auto entry = to_json(m);
    entry["params"] = m.resolved();
    models.push_back(std::move(entry));
  }
  return {
      {"cleaning",
       {{"inlier_threshold", c.cleaning.inlier_threshold},
        {"relative_threshold", c.cleaning.relative_threshold},
        {"max_iterations", c.cleaning.max_iterations},
        {"min_plane_fraction", c.cleaning.min_plane_fraction},
        {"max_planes", c.cleaning.max_planes},
        {"seed", c.cleaning.seed}}},
      {"features", {{"schema", c.feature_schema}}},
      {"models", models},
      {"stacking", {{"m_top", c.m_top}, {"alpha", c.alpha}, {"inner_k", c.inner_k}}},
      {"evaluation", {{"k", c.k}, {"seed", c.seed}}},
      {"fusion",
       {{"beta", c.fusion.beta},
        {"eps", c.fusion.eps},
        {"center", std::string(detail::center_name(c.fusion.center))},
        {"strategy", c.fusion_strategy}}},
      {"simulation",
       {{"views", c.simulation.views},
        {"locations", c.simulation.locations},
        {"channels", c.simulation.channels},
        {"steps", c.simulation.steps},
        {"sigma0", c.simulation.sigma0},
        {"gamma", c.simulation.gamma},
        {"schedule", c.simulation.schedule},
        {"contraction", c.simulation.contraction},
        {"view_bias", c.simulation.view_bias},
        {"seed", c.simulation.seed}}},
  };
}

/// Builds a config from defaults overlaid with `user`. Unknown keys and
/// wrongly typed values raise InvalidConfig.
inline PipelineConfig config_from_json(const Json& user) {
  PipelineConfig c;
  const Json schema = to_json(c);
  detail::reject_unknown_keys(user, schema, "");
  try {
    auto section = [&](const char* name) { return user.contains(name) ? user.at(name) : Json::object(); };
    const auto cl = section("cleaning");
    c.cleaning.inlier_threshold = cl.value("inlier_threshold", c.cleaning.inlier_threshold);
    c.cleaning.relative_threshold = cl.value("relative_threshold", c.cleaning.relative_threshold);
    c.cleaning.max_iterations = cl.value("max_iterations", c.cleaning.max_iterations);
    c.cleaning.min_plane_fraction = cl.value("min_plane_fraction", c.cleaning.min_plane_fraction);
    c.cleaning.max_planes = cl.value("max_planes", c.cleaning.max_planes);
    c.cleaning.seed = cl.value("seed", c.cleaning.seed);
    c.cleaning.validate();

    c.feature_schema = section("features").value("schema", c.feature_schema);
    if (c.feature_schema != kFeatureSchemaVersion) {
      throw Error(ErrorCode::InvalidConfig, "unsupported feature schema '" + c.feature_schema + "'", "features.schema");
    }

    const auto ev = section("evaluation");
    c.k = ev.value("k", c.k);
    c.seed = ev.value("seed", c.seed);
    if (c.k < 2) throw Error(ErrorCode::InvalidConfig, "k must be >= 2", "evaluation.k");

    if (user.contains("models")) {
      const auto& list = user.at("models");
      if (!list.is_array() || list.empty()) throw Error(ErrorCode::InvalidConfig, "must be a non-empty array", "models");
      c.models.clear();
      for (std::size_t i = 0; i < list.size(); ++i) c.models.push_back(detail::model_from_entry(list[i], c.seed, i));
    } else {
      c.models = default_model_specs(c.seed);
    }
    std::set<std::string> ids;
    for (const auto& m : c.models) {
      if (!ids.insert(m.id).second) throw Error(ErrorCode::InvalidConfig, "duplicate model id '" + m.id + "'", "models");
    }

    const auto st = section("stacking");
    c.m_top = st.contains("m_top") ? st.at("m_top").get<std::size_t>() : std::min<std::size_t>(11, c.models.size());
    c.alpha = st.value("alpha", c.alpha);
    c.inner_k = st.value("inner_k", c.inner_k);
    if (c.m_top < 1 || c.m_top > c.models.size()) {
      throw Error(ErrorCode::InvalidConfig, "m_top must be in [1, number of models]", "stacking.m_top");
    }
    if (!(c.alpha >= 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be >= 0", "stacking.alpha");
    if (c.inner_k < 2) throw Error(ErrorCode::InvalidConfig, "inner_k must be >= 2", "stacking.inner_k");

    const auto fu = section("fusion");
    c.fusion.beta = fu.value("beta", c.fusion.beta);
    c.fusion.eps = fu.value("eps", c.fusion.eps);
    const auto center = fu.value("center", std::string("mean"));
    if (center != "mean" && center != "median") throw Error(ErrorCode::InvalidConfig, "must be mean or median", "fusion.center");
    c.fusion.center = center == "mean" ? CenterKind::Mean : CenterKind::Median;
    c.fusion_strategy = fu.value("strategy", c.fusion_strategy);
    fusion_strategy(c.fusion_strategy);
    c.fusion.validate();

    const auto si = section("simulation");
    auto& s = c.simulation;
    s.views = si.value("views", s.views);
    s.locations = si.value("locations", s.locations);
    s.channels = si.value("channels", s.channels);
    s.steps = si.value("steps", s.steps);
    s.sigma0 = si.value("sigma0", s.sigma0);
    s.gamma = si.value("gamma", s.gamma);
    s.schedule = si.value("schedule", s.schedule);
    s.contraction = si.value("contraction", s.contraction);
    s.view_bias = si.value("view_bias", s.view_bias);
    s.seed = si.value("seed", s.seed);
    if (s.views < 1 || s.locations < 1 || s.channels < 1) {
      throw Error(ErrorCode::InvalidConfig, "views, locations and channels must be >= 1", "simulation");
    }
    if (!s.view_bias.empty() && s.view_bias.size() != s.views) {
      throw Error(ErrorCode::InvalidConfig, "needs one entry per view", "simulation.view_bias");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

/// Parses a "key.path=value" override. The value is read as JSON when it
/// parses as JSON, otherwise as a plain string.
inline void apply_override(Json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::InvalidConfig, "override must look like key.path=value", assignment);
  }
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  detail::set_path(user, key, value);
}

inline Json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config file", path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "config is not valid JSON", path.string());
  return j;
}

/// Writes resolved_config.json and VERSION into `dir`.
inline void write_run_metadata(const PipelineConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "resolved_config.json", to_json(c).dump(2) + "\n");
  detail::write_file(dir / "VERSION", std::string(kToolVersion) + "\n");
}

}  // namespace herdscale
