#include "servo/results.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace servo {

namespace {

std::string number_text(double v) { return nlohmann::json(v).dump(); }

}  // namespace

double ResultRow::mean_cost() const {
  if (costs.empty()) return 0.0;
  double sum = 0.0;
  for (const double c : costs) sum += c;
  return sum / static_cast<double>(costs.size());
}

double ResultRow::std_error() const {
  const int count = n();
  if (count < 2) return 0.0;
  const double mean = mean_cost();
  double ss = 0.0;
  for (const double c : costs) ss += (c - mean) * (c - mean);
  return std::sqrt(ss / static_cast<double>(count - 1)) / std::sqrt(static_cast<double>(count));
}

std::string result_table_csv(const ResultTable& table) {
  std::string out = "method,tag,split,train-trajectories,gain,mean-cost,std-error,n\n";
  for (const ResultRow& row : table.rows) {
    out += row.method + "," + row.tag + "," + row.split + ",";
    out += std::to_string(row.train_trajectories) + ",";
    out += row.gain ? number_text(*row.gain) : std::string();
    out += "," + number_text(row.mean_cost());
    out += "," + number_text(row.std_error());
    out += "," + std::to_string(row.n()) + "\n";
  }
  return out;
}

std::string result_table_json(const ResultTable& table) {
  nlohmann::ordered_json j;
  j["schema-version"] = 1;
  j["rows"] = nlohmann::ordered_json::array();
  for (const ResultRow& row : table.rows) {
    nlohmann::ordered_json r;
    r["method"] = row.method;
    r["tag"] = row.tag;
    r["split"] = row.split;
    r["train-trajectories"] = row.train_trajectories;
    if (row.gain)
      r["gain"] = *row.gain;
    else
      r["gain"] = nullptr;
    r["mean-cost"] = row.mean_cost();
    r["std-error"] = row.std_error();
    r["n"] = row.n();
    r["costs"] = row.costs;
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

void write_result_table(const std::string& csv_path, const std::string& json_path, const ResultTable& table) {
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw std::runtime_error("results: cannot open for writing: " + csv_path);
  csv << result_table_csv(table);
  if (!csv) throw std::runtime_error("results: write failed: " + csv_path);
  std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw std::runtime_error("results: cannot open for writing: " + json_path);
  js << result_table_json(table);
  if (!js) throw std::runtime_error("results: write failed: " + json_path);
}

}  // namespace servo
