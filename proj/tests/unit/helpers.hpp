#pragma once
#include <string>
#include <utility>
#include <vector>

#include "valmon/data_model.hpp"
#include "valmon/stats.hpp"

namespace valmon::test {

inline FeatureFrame frame_of(std::vector<std::pair<std::string, std::vector<double>>> cols) {
  std::vector<Column> columns;
  for (auto &[name, values] : cols) columns.emplace_back(make_numeric(name, std::move(values)));
  return FeatureFrame(std::move(columns));
}

inline ScoredDataset scored(FeatureFrame frame, std::vector<double> y_true, std::vector<double> y_pred) {
  ScoredDataset::Outcomes o;
  o.y_true = std::move(y_true);
  o.y_pred = std::move(y_pred);
  return ScoredDataset(std::move(frame), std::move(o));
}

inline std::vector<double> normal_sample(Rng &rng, std::size_t n, double mu = 0.0, double sd = 1.0) {
  std::vector<double> out(n);
  for (auto &v : out) v = mu + sd * standard_normal(rng);
  return out;
}

}  // namespace valmon::test
