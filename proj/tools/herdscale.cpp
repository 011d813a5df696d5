// herdscale command-line interface.
//
// Exit codes: 0 success, 1 data error or partial failure, 2 usage or config error.

#include <fnmatch.h>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "herdscale/cleaning.hpp"
#include "herdscale/config.hpp"
#include "herdscale/cross_validation.hpp"
#include "herdscale/dataset.hpp"
#include "herdscale/features.hpp"
#include "herdscale/fusion.hpp"
#include "herdscale/io.hpp"
#include "herdscale/serialization.hpp"
#include "herdscale/stacking.hpp"

namespace fs = std::filesystem;
using namespace herdscale;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<std::size_t> m_top;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> eps;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON pipeline config");
  cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set stacking.alpha=0.5")->take_all();
  cmd->add_option("--jobs,-j", o.jobs, "Worker threads; outputs do not depend on it")->check(CLI::PositiveNumber);
}

PipelineConfig resolve_config(const CommonOptions& o, const char* seed_key = "evaluation.seed") {
  Json user = o.config_path.empty() ? Json::object() : load_config_json(o.config_path);
  for (const auto& s : o.overrides) apply_override(user, s);
  auto put = [&](const char* key, const Json& v) { detail::set_path(user, key, v); };
  if (o.seed) put(seed_key, *o.seed);
  if (o.k) put("evaluation.k", *o.k);
  if (o.m_top) put("stacking.m_top", *o.m_top);
  if (o.alpha) put("stacking.alpha", *o.alpha);
  if (o.beta) put("fusion.beta", *o.beta);
  if (o.eps) put("fusion.eps", *o.eps);
  return config_from_json(user);
}

bool is_cloud_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".xyz" || ext == ".txt" || ext == ".csv" || ext == ".ply";
}

/// A directory (all point-cloud files in it) or a filename glob.
std::vector<fs::path> expand_inputs(const std::string& pattern) {
  std::vector<fs::path> out;
  const fs::path p(pattern);
  std::error_code ec;
  if (fs::is_directory(p, ec)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_regular_file() && is_cloud_file(e.path())) out.push_back(e.path());
    }
  } else if (fs::is_regular_file(p, ec)) {
    out.push_back(p);
  } else {
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    const auto glob = p.filename().string();
    if (fs::is_directory(dir, ec)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && fnmatch(glob.c_str(), e.path().filename().c_str(), 0) == 0) out.push_back(e.path());
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_file(path, text);
}

fs::path output_dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

int report_failures(const std::vector<std::pair<std::string, std::string>>& failures) {
  for (const auto& [id, what] : failures) std::cerr << "error: " << id << ": " << what << "\n";
  return failures.empty() ? kOk : kDataError;
}

// ---------------------------------------------------------------------------

int cmd_clean(const std::string& input, const fs::path& out_dir, const CommonOptions& o) {
  const auto cfg = resolve_config(o, "cleaning.seed");
  const auto files = expand_inputs(input);
  if (files.empty()) throw UsageError("no point-cloud files match '" + input + "'");
  fs::create_directories(out_dir);
  write_run_metadata(cfg, out_dir);

  struct Row {
    std::size_t before = 0, after = 0, planes = 0;
    std::string error;
  };
  std::vector<Row> rows(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    try {
      const auto format = detect_format(files[i]);
      const auto cloud = load_point_cloud(files[i], format);
      const auto res = remove_planes_detailed(cloud, cfg.cleaning);
      save_point_cloud(res.cloud, out_dir / files[i].filename(), format);
      rows[i] = {cloud.size(), res.cloud.size(), res.planes.size(), {}};
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });

  std::string summary = "id,points_before,points_after,planes_removed\n";
  std::vector<std::pair<std::string, std::string>> failures;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto id = files[i].stem().string();
    if (!rows[i].error.empty()) {
      failures.emplace_back(id, rows[i].error);
      continue;
    }
    summary += id + "," + std::to_string(rows[i].before) + "," + std::to_string(rows[i].after) + "," +
               std::to_string(rows[i].planes) + "\n";
  }
  write_text(out_dir / "clean_summary.csv", summary);
  return report_failures(failures);
}

int cmd_features(const std::string& input, const fs::path& weights_path, const fs::path& output, const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  const auto files = expand_inputs(input);
  if (files.empty()) throw UsageError("no point-cloud files match '" + input + "'");
  const auto weights = load_weights_csv(weights_path);

  std::vector<std::optional<FeatureVector>> features(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto id = files[i].stem().string();
    try {
      if (!weights.count(id)) throw Error(ErrorCode::MissingWeight, "no weight row", id);
      features[i] = extract_feature_vector(load_point_cloud(files[i], detect_format(files[i])));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<std::string> ids;
  std::vector<FeatureVector> rows;
  std::vector<double> kg;
  std::vector<std::pair<std::string, std::string>> failures;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto id = files[i].stem().string();
    if (!features[i]) {
      failures.emplace_back(id, errors[i]);
      continue;
    }
    ids.push_back(id);
    rows.push_back(*features[i]);
    kg.push_back(weights.at(id));
  }
  write_text(output, dataset_csv(make_dataset(ids, rows, kg)));
  write_run_metadata(cfg, output_dir_of(output));
  return report_failures(failures);
}

std::vector<std::size_t> parse_range(const std::string& text, std::size_t max_m) {
  std::size_t lo = 2, hi = max_m;
  if (!text.empty()) {
    const auto dots = text.find("..");
    try {
      if (dots == std::string::npos) {
        lo = hi = std::stoul(text);
      } else {
        lo = std::stoul(text.substr(0, dots));
        hi = std::stoul(text.substr(dots + 2));
      }
    } catch (const std::exception&) {
      throw UsageError("ensemble-size range must look like 2..11");
    }
  }
  if (lo < 1 || hi < lo || hi > max_m) {
    throw UsageError("ensemble-size range must lie within 1.." + std::to_string(max_m));
  }
  std::vector<std::size_t> out;
  for (auto m = lo; m <= hi; ++m) out.push_back(m);
  return out;
}

std::string pm(const MetricSummary& s, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << s.mean << "±" << s.std;
  return os.str();
}

int cmd_cv(const fs::path& dataset_path, const fs::path& out_dir, std::optional<std::string> sweep, const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  const auto ds = load_dataset_csv(dataset_path);
  if (sweep) parse_range(*sweep, cfg.models.size());  // reject a bad range before the long run
  const auto opt = cfg.stacking_options(o.jobs);
  fs::create_directories(out_dir);
  write_run_metadata(cfg, out_dir);

  const auto result = cross_validate(ds.X, ds.y, opt, cfg.k, cfg.seed);
  write_text(out_dir / "metrics.json", to_json(result.report).dump(2) + "\n");
  write_text(out_dir / "predictions.csv", predictions_csv(ds.ids, result.predictions));
  std::string table = "method,r2,mae_kg,mape_pct\n";
  table += "stacked_top" + std::to_string(cfg.m_top) + "," + pm(result.report.r2, 2) + "," + pm(result.report.mae, 2) +
           "," + pm(result.report.mape, 2) + "\n";
  write_text(out_dir / "table.csv", table);

  const auto ranking = rank_base_models(ds.X, ds.y, cfg.models, cfg.k, cfg.seed, o.jobs);
  write_text(out_dir / "ranking.csv", ranking_csv(ranking));

  if (sweep) {
    const auto rows = ensemble_size_sweep(ds.X, ds.y, opt, parse_range(*sweep, cfg.models.size()), cfg.k, cfg.seed);
    write_text(out_dir / "sweep.csv", sweep_csv(rows));
  }
  return kOk;
}

int cmd_train(const fs::path& dataset_path, const fs::path& model_path, const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  const auto ds = load_dataset_csv(dataset_path);
  const auto ranking = rank_base_models(ds.X, ds.y, cfg.models, cfg.inner_k, cfg.seed, o.jobs);
  const auto ens = fit_stack(ds.X, ds.y, ranking, cfg.m_top, cfg.inner_k, cfg.seed, cfg.alpha, o.jobs);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_stacked_ensemble(ens, model_path.string());
  write_text(output_dir_of(model_path) / "train_ranking.csv", ranking_csv(ranking));
  write_run_metadata(cfg, output_dir_of(model_path));
  return kOk;
}

int cmd_predict(const fs::path& model_path, const fs::path& features_path, const fs::path& output) {
  const auto ens = load_stacked_ensemble(model_path.string());
  const auto ds = load_dataset_csv(features_path, false, false);
  const auto pred = predict_stack(ens, ds.X);
  write_text(output, predictions_csv(ds.ids, pred));
  // the settings that matter here are the ones baked into the model
  PipelineConfig cfg;
  cfg.models.clear();
  for (const auto& b : ens.bases) cfg.models.push_back(b.spec());
  cfg.m_top = ens.m_top();
  cfg.alpha = ens.combiner.alpha;
  write_run_metadata(cfg, output_dir_of(output));
  return kOk;
}

int cmd_fuse_sim(const fs::path& output, std::optional<std::size_t> steps, std::optional<std::size_t> views,
                 const CommonOptions& o) {
  CommonOptions local = o;
  if (steps) local.overrides.push_back("simulation.steps=" + std::to_string(*steps));
  if (views) local.overrides.push_back("simulation.views=" + std::to_string(*views));
  const auto cfg = resolve_config(local, "simulation.seed");
  auto sim = cfg.simulation_config();
  sim.fusion.jobs = o.jobs;
  const auto traj = simulate_trajectory(sim);
  write_text(output, trajectory_csv(traj, sim));
  write_run_metadata(cfg, output_dir_of(output));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Live-weight estimation from 3D point clouds"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  CommonOptions common;

  auto* clean = app.add_subcommand("clean", "Remove dominant planes (floor, walls) from point clouds");
  std::string clean_input, clean_output;
  clean->add_option("input", clean_input, "Directory or filename glob")->required();
  clean->add_option("-o,--output", clean_output, "Output directory")->required();
  add_common(clean, common);
  clean->add_option("--seed", common.seed, "RANSAC seed");

  auto* features = app.add_subcommand("features", "Extract the 32-value feature vector per cloud");
  std::string feat_input, feat_weights, feat_output;
  features->add_option("input", feat_input, "Directory or filename glob")->required();
  features->add_option("-w,--weights", feat_weights, "CSV with id,weight_kg")->required();
  features->add_option("-o,--output", feat_output, "Dataset CSV to write")->required();
  add_common(features, common);

  std::string cv_dataset, cv_output;
  std::string sweep_range;
  auto add_cv_options = [&](CLI::App* cmd) {
    cmd->add_option("dataset", cv_dataset, "Dataset CSV")->required();
    cmd->add_option("-o,--output", cv_output, "Output directory")->required();
    cmd->add_option("--seed", common.seed, "Fold seed");
    cmd->add_option("-k,--folds", common.k, "Number of outer folds");
    cmd->add_option("--m-top", common.m_top, "Ensemble size");
    cmd->add_option("--alpha", common.alpha, "Self-learner ridge penalty");
    add_common(cmd, common);
  };
  auto* cv = app.add_subcommand("cv", "Nested cross-validation of the stacked ensemble");
  add_cv_options(cv);
  cv->add_option("--sweep", sweep_range, "Also sweep the ensemble size, e.g. 2..11")->expected(0, 1);
  auto* sweep = app.add_subcommand("sweep", "Same as cv --sweep");
  add_cv_options(sweep);
  sweep->add_option("--range", sweep_range, "Ensemble sizes, e.g. 2..11 (default 2..number of models)");

  auto* train = app.add_subcommand("train", "Fit the stacked ensemble on a dataset");
  std::string train_dataset, train_output;
  train->add_option("dataset", train_dataset, "Dataset CSV")->required();
  train->add_option("-o,--output", train_output, "Model file to write (JSON)")->required();
  train->add_option("--seed", common.seed, "Fold seed");
  train->add_option("--m-top", common.m_top, "Ensemble size");
  train->add_option("--alpha", common.alpha, "Self-learner ridge penalty");
  add_common(train, common);

  auto* predict = app.add_subcommand("predict", "Predict live weight with a trained model");
  std::string pred_model, pred_features, pred_output;
  predict->add_option("-m,--model", pred_model, "Model file from train")->required();
  predict->add_option("features", pred_features, "CSV with id and feature columns")->required();
  predict->add_option("-o,--output", pred_output, "Predictions CSV to write")->required();

  auto* fuse = app.add_subcommand("fuse-sim", "Simulate agreement-weighted fusion over sampling steps");
  std::string fuse_output;
  std::optional<std::size_t> fuse_steps, fuse_views;
  fuse->add_option("-o,--output", fuse_output, "Trace CSV to write")->required();
  fuse->add_option("--seed", common.seed, "Simulation seed");
  fuse->add_option("--beta", common.beta, "Agreement sharpness");
  fuse->add_option("--eps", common.eps, "Deviation floor");
  fuse->add_option("--steps", fuse_steps, "Number of steps");
  fuse->add_option("--views", fuse_views, "Number of views");
  add_common(fuse, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*clean) return cmd_clean(clean_input, clean_output, common);
    if (*features) return cmd_features(feat_input, feat_weights, feat_output, common);
    if (*cv) {
      const auto range = cv->count("--sweep") ? std::optional(sweep_range) : std::nullopt;
      return cmd_cv(cv_dataset, cv_output, range, common);
    }
    if (*sweep) return cmd_cv(cv_dataset, cv_output, sweep_range, common);
    if (*train) return cmd_train(train_dataset, train_output, common);
    if (*predict) return cmd_predict(pred_model, pred_features, pred_output);
    if (*fuse) return cmd_fuse_sim(fuse_output, fuse_steps, fuse_views, common);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool config = e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::InvalidHyperparameter ||
                        e.code() == ErrorCode::InvalidK || e.code() == ErrorCode::InvalidSchedule;
    return config ? kUsageError : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
