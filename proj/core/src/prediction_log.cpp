#include "falcon/prediction_log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "falcon/error.hpp"

namespace falcon {

namespace {
std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
}  // namespace

void write_prediction_log(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw ContractError("prediction log needs at least one record");
  const std::size_t classes = records.front().probs.size();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write prediction log " + path.string());
  out << "sample_id,perturbation,level,label,predicted,confidence,entropy";
  for (std::size_t j = 0; j < classes; ++j) out << ",p_" << j;
  out << '\n';
  for (const auto& r : records) {
    if (r.probs.size() != classes) throw ContractError("prediction records disagree on the class count");
    out << r.sample_id << ',' << r.perturbation << ',' << r.level << ',' << r.label << ',' << r.predicted << ','
        << g9(r.confidence()) << ',' << g9(predictive_entropy(r.probs));
    for (double p : r.probs) out << ',' << g9(p);
    out << '\n';
  }
  if (!out) throw IoError("failed writing prediction log " + path.string());
}

std::vector<PredictionRecord> read_prediction_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prediction log " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_id,perturbation,level,label,predicted,confidence,entropy", 0) != 0) {
    throw FormatError(path.string() + ": missing prediction log header");
  }
  std::size_t classes = 0;
  for (char c : line) classes += c == ',';
  classes -= 6;

  std::vector<PredictionRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7 + classes) throw FormatError(path.string() + ": row " + std::to_string(row) + " has wrong width");
    try {
      PredictionRecord r;
      r.sample_id = std::stoul(cells[0]);
      r.perturbation = cells[1];
      r.level = std::stoi(cells[2]);
      r.label = std::stoi(cells[3]);
      r.predicted = std::stoi(cells[4]);
      for (std::size_t j = 0; j < classes; ++j) r.probs.push_back(std::stod(cells[7 + j]));
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " is not numeric");
    }
  }
  return records;
}

}  // namespace falcon
