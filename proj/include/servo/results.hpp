#pragma once

#include <optional>
#include <string>
#include <vector>

namespace servo {

// One evaluated method on one target split. Aggregates are always derived
// from the stored per-trajectory costs so every output recomputes them the
// same way.
struct ResultRow {
  std::string method;
  std::string tag;    // featurizer / dynamics identifier, empty for model-free laws
  std::string split;  // "train" or "novel"
  int train_trajectories = 0;
  std::optional<double> gain;  // tuned per-step gain, classical laws only
  std::vector<double> costs;

  int n() const { return static_cast<int>(costs.size()); }
  double mean_cost() const;
  double std_error() const;  // sample std (n-1 denominator) / sqrt(n), 0 when n < 2
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

// CSV and JSON spell shared fields with identical text: both go through the
// same JSON number serializer.
std::string result_table_csv(const ResultTable& table);
std::string result_table_json(const ResultTable& table);
void write_result_table(const std::string& csv_path, const std::string& json_path, const ResultTable& table);

}  // namespace servo
