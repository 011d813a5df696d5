#pragma once

// Tabular handoff files: the herd dataset (id, features, weight_kg), the
// weights table (id, weight_kg) and the small report CSVs.

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "herdscale/cross_validation.hpp"
#include "herdscale/error.hpp"
#include "herdscale/features.hpp"
#include "herdscale/io.hpp"
#include "herdscale/stacking.hpp"

namespace herdscale {

struct HerdDataset {
  std::vector<std::string> ids;
  std::vector<std::string> columns;  // feature column names
  Matrix X;
  Vector y;  // kg; empty when the file has no weight_kg column

  std::size_t size() const noexcept { return ids.size(); }
  bool has_weights() const noexcept { return y.size() > 0; }
};

namespace detail {

inline std::vector<std::string> csv_cells(std::string_view line) {
  std::vector<std::string> out;
  for (auto cell : split_char(line, ',')) out.emplace_back(cell);
  return out;
}

}  // namespace detail

/// Reads "id,<feature columns...>[,weight_kg]". With `require_schema`, the
/// feature columns must be exactly the published feature names in order.
inline HerdDataset parse_dataset_csv(std::string_view text, bool require_schema = true, bool require_weights = true) {
  detail::LineReader reader(text);
  std::optional<std::string_view> header;
  while ((header = reader.next()) && detail::trim(*header).empty()) {
  }
  if (!header) throw Error(ErrorCode::ParseError, "empty dataset file");
  auto cols = detail::csv_cells(detail::trim(*header));
  if (cols.empty() || cols.front() != "id") throw detail::parse_error(reader.line(), "first column must be 'id'");
  const bool has_weight = cols.back() == "weight_kg";
  if (require_weights && !has_weight) throw detail::parse_error(reader.line(), "last column must be 'weight_kg'");

  HerdDataset ds;
  ds.columns.assign(cols.begin() + 1, cols.end() - (has_weight ? 1 : 0));
  if (require_schema) {
    if (ds.columns.size() != kFeatureCount) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(kFeatureCount) + " feature columns, got " + std::to_string(ds.columns.size()));
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (ds.columns[j] != kFeatureNames[j]) {
        throw detail::parse_error(reader.line(), "column " + std::to_string(j + 1) + " is '" + ds.columns[j] +
                                                     "', expected '" + std::string(kFeatureNames[j]) + "'");
      }
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
  std::set<std::string> seen;
  while (auto line = reader.next()) {
    const auto body = detail::trim(*line);
    if (body.empty()) continue;
    auto cells = detail::csv_cells(body);
    if (cells.size() != cols.size()) {
      throw detail::parse_error(reader.line(), "expected " + std::to_string(cols.size()) + " cells, got " +
                                                   std::to_string(cells.size()));
    }
    if (cells[0].empty()) throw detail::parse_error(reader.line(), "empty id");
    if (!seen.insert(cells[0]).second) throw detail::parse_error(reader.line(), "duplicate id '" + cells[0] + "'");
    std::vector<double> values;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const auto v = detail::parse_double(cells[j]);
      if (!v) throw detail::parse_error(reader.line(), "bad number '" + cells[j] + "'");
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteInput, "line " + std::to_string(reader.line()), cells[0]);
      values.push_back(*v);
    }
    if (has_weight) {
      if (!(values.back() > 0.0)) throw Error(ErrorCode::NonPositiveTarget, "weight_kg must be > 0", cells[0]);
      weights.push_back(values.back());
      values.pop_back();
    }
    ds.ids.push_back(cells[0]);
    rows.push_back(std::move(values));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(ds.columns.size());
  ds.X.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  if (has_weight) ds.y = Eigen::Map<const Vector>(weights.data(), n);
  return ds;
}

inline HerdDataset load_dataset_csv(const std::filesystem::path& path, bool require_schema = true,
                                    bool require_weights = true) {
  try {
    return parse_dataset_csv(detail::read_file(path), require_schema, require_weights);
  } catch (const Error& e) {
    e.rethrow_in(path.string());
  }
}

inline std::string dataset_csv(const HerdDataset& ds) {
  std::ostringstream os;
  os << "id";
  for (const auto& c : ds.columns) os << ',' << c;
  if (ds.has_weights()) os << ",weight_kg";
  os << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    os << ds.ids[i];
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) os << ',' << detail::format_double(ds.X(r, j));
    if (ds.has_weights()) os << ',' << detail::format_double(ds.y[r]);
    os << '\n';
  }
  return os.str();
}

/// Assembles a schema-conformant dataset from per-animal feature vectors.
inline HerdDataset make_dataset(const std::vector<std::string>& ids, const std::vector<FeatureVector>& features,
                                const std::vector<double>& weights) {
  if (ids.size() != features.size() || (!weights.empty() && weights.size() != ids.size())) {
    throw Error(ErrorCode::LengthMismatch, "ids, features and weights differ in length");
  }
  HerdDataset ds;
  ds.ids = ids;
  for (auto name : kFeatureNames) ds.columns.emplace_back(name);
  ds.X.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
  }
  if (!weights.empty()) ds.y = Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return ds;
}

/// "id,weight_kg" table.
inline std::map<std::string, double> parse_weights_csv(std::string_view text) {
  detail::LineReader reader(text);
  std::map<std::string, double> out;
  bool header_done = false;
  while (auto line = reader.next()) {
    const auto body = detail::trim(*line);
    if (body.empty()) continue;
    const auto cells = detail::csv_cells(body);
    if (!header_done) {
      header_done = true;
      if (cells.size() != 2 || cells[0] != "id" || cells[1] != "weight_kg") {
        throw detail::parse_error(reader.line(), "header must be 'id,weight_kg'");
      }
      continue;
    }
    if (cells.size() != 2) throw detail::parse_error(reader.line(), "expected 2 cells");
    const auto v = detail::parse_double(cells[1]);
    if (!v) throw detail::parse_error(reader.line(), "bad weight '" + cells[1] + "'");
    if (!(*v > 0.0) || !std::isfinite(*v)) throw Error(ErrorCode::NonPositiveTarget, "weight_kg must be finite and > 0", cells[0]);
    if (!out.emplace(cells[0], *v).second) throw detail::parse_error(reader.line(), "duplicate id '" + cells[0] + "'");
  }
  return out;
}

inline std::map<std::string, double> load_weights_csv(const std::filesystem::path& path) {
  try {
    return parse_weights_csv(detail::read_file(path));
  } catch (const Error& e) {
    e.rethrow_in(path.string());
  }
}

/// rank,model,r2,mae,mape (1-based rank).
inline std::string ranking_csv(const ModelRanking& ranking) {
  std::ostringstream os;
  os << "rank,model,r2,mae,mape\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    os << i + 1 << ',' << e.id << ',' << detail::format_double(e.r2) << ',' << detail::format_double(e.mae) << ','
       << detail::format_double(e.mape) << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "m,r2_mean,r2_std,mae_mean,mae_std,mape_mean,mape_std\n";
  for (const auto& r : rows) {
    os << r.m << ',' << detail::format_double(r.report.r2.mean) << ',' << detail::format_double(r.report.r2.std) << ','
       << detail::format_double(r.report.mae.mean) << ',' << detail::format_double(r.report.mae.std) << ','
       << detail::format_double(r.report.mape.mean) << ',' << detail::format_double(r.report.mape.std) << '\n';
  }
  return os.str();
}

inline std::string predictions_csv(const std::vector<std::string>& ids, const Vector& pred) {
  std::ostringstream os;
  os << "id,predicted_weight_kg\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << detail::format_double(pred[static_cast<Eigen::Index>(i)]) << '\n';
  return os.str();
}

}  // namespace herdscale
