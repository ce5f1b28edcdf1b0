#include "falcon/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "falcon/error.hpp"

namespace falcon {

using nlohmann::json;

namespace {

json bins_to_json(const std::vector<BinStatistics>& bins) {
  json out = json::array();
  for (const auto& b : bins) {
    out.push_back({{"index", b.index},
                   {"lower", b.lower},
                   {"upper", b.upper},
                   {"count", b.count},
                   {"avg_confidence", b.avg_confidence ? json(*b.avg_confidence) : json()},
                   {"avg_accuracy", b.avg_accuracy ? json(*b.avg_accuracy) : json()}});
  }
  return out;
}

json cell_to_json(const CellMetrics& c) {
  return {{"perturbation", c.perturbation},
          {"level", c.level},
          {"n", c.n},
          {"accuracy", c.accuracy},
          {"ece", c.ece},
          {"mean_entropy", c.mean_entropy},
          {"nll", c.nll},
          {"mean_confidence", c.mean_confidence},
          {"bins", bins_to_json(c.bins)}};
}

CellMetrics cell_from_json(const json& c) {
  CellMetrics m;
  m.perturbation = c.at("perturbation");
  m.level = c.at("level");
  m.n = c.at("n");
  m.accuracy = c.at("accuracy");
  m.ece = c.at("ece");
  m.mean_entropy = c.at("mean_entropy");
  m.nll = c.at("nll");
  m.mean_confidence = c.at("mean_confidence");
  for (const auto& b : c.at("bins")) {
    BinStatistics s;
    s.index = b.at("index");
    s.lower = b.at("lower");
    s.upper = b.at("upper");
    s.count = b.at("count");
    if (b.contains("avg_confidence") && b.at("avg_confidence").is_number()) s.avg_confidence = b.at("avg_confidence").get<double>();
    if (b.contains("avg_accuracy") && b.at("avg_accuracy").is_number()) s.avg_accuracy = b.at("avg_accuracy").get<double>();
    m.bins.push_back(s);
  }
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

[[noreturn]] void schema_fail(const std::string& what) { throw SchemaError("report schema: " + what); }

void need(const json& j, const char* key, json::value_t type, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema_fail(where + " lacks '" + key + "'");
  const auto t = j.at(key).type();
  const bool numeric = type == json::value_t::number_float &&
                       (t == json::value_t::number_float || t == json::value_t::number_integer ||
                        t == json::value_t::number_unsigned);
  const bool integral = type == json::value_t::number_unsigned &&
                        (t == json::value_t::number_unsigned || t == json::value_t::number_integer);
  if (!(t == type || numeric || integral)) schema_fail(where + "." + key + " has the wrong type");
}

}  // namespace

json report_to_json(const CalibrationReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(cell_to_json(c));
  json micro = json::array();
  for (const auto& [name, value] : r.micro_ece) micro.push_back({{"perturbation", name}, {"micro_ece", value}});
  return {{"schema_version", kReportSchemaVersion},
          {"model_label", r.model_label},
          {"num_bins", r.num_bins},
          {"global", {{"test_accuracy", r.test_accuracy()}, {"in_domain_ece", r.in_domain_ece()}}},
          {"in_domain", cell_to_json(r.in_domain)},
          {"cells", cells},
          {"micro_ece", micro},
          {"provenance", r.provenance}};
}

void validate_report_json(const json& j) {
  using vt = json::value_t;
  if (!j.is_object()) schema_fail("document is not an object");
  need(j, "schema_version", vt::number_unsigned, "report");
  if (j.at("schema_version") != kReportSchemaVersion) schema_fail("unsupported schema_version");
  need(j, "model_label", vt::string, "report");
  need(j, "num_bins", vt::number_unsigned, "report");
  need(j, "global", vt::object, "report");
  for (const char* key : {"test_accuracy", "in_domain_ece"}) need(j.at("global"), key, vt::number_float, "global");
  need(j, "in_domain", vt::object, "report");
  need(j, "cells", vt::array, "report");
  std::vector<json> cells(j.at("cells").begin(), j.at("cells").end());
  cells.push_back(j.at("in_domain"));
  for (const auto& c : cells) {
    need(c, "perturbation", vt::string, "cell");
    need(c, "level", vt::number_unsigned, "cell");
    need(c, "n", vt::number_unsigned, "cell");
    for (const char* key : {"accuracy", "ece", "mean_entropy", "nll", "mean_confidence"}) need(c, key, vt::number_float, "cell");
    const double e = c.at("ece").get<double>(), a = c.at("accuracy").get<double>();
    if (e < 0.0 || e > 1.0 || a < 0.0 || a > 1.0) schema_fail("cell metric out of range");
    need(c, "bins", vt::array, "cell");
    if (c.at("bins").size() != j.at("num_bins").get<std::size_t>()) schema_fail("cell bin count differs from num_bins");
    for (const auto& b : c.at("bins")) {
      need(b, "index", vt::number_unsigned, "bin");
      need(b, "count", vt::number_unsigned, "bin");
      need(b, "lower", vt::number_float, "bin");
      need(b, "upper", vt::number_float, "bin");
    }
  }
  need(j, "micro_ece", vt::array, "report");
  for (const auto& m : j.at("micro_ece")) {
    need(m, "perturbation", vt::string, "micro_ece");
    need(m, "micro_ece", vt::number_float, "micro_ece");
  }
  need(j, "provenance", vt::object, "report");
}

CalibrationReport report_from_json(const json& j) {
  validate_report_json(j);
  CalibrationReport r;
  r.model_label = j.at("model_label");
  r.num_bins = j.at("num_bins");
  r.in_domain = cell_from_json(j.at("in_domain"));
  for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
  for (const auto& m : j.at("micro_ece")) r.micro_ece.emplace_back(m.at("perturbation"), m.at("micro_ece"));
  r.provenance = j.at("provenance");
  return r;
}

std::string dump_report(const CalibrationReport& report) { return report_to_json(report).dump(2) + "\n"; }

CalibrationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string() + " is not valid JSON");
  return report_from_json(j);
}

std::string comparison_csv(const std::vector<CalibrationReport>& reports) {
  std::ostringstream out;
  out << "model,perturbation,micro_ece,test_accuracy,in_domain_ece\n";
  for (const auto& r : reports) {
    for (const auto& [name, value] : r.micro_ece) {
      out << r.model_label << ',' << name << ',' << fmt(value) << ',' << fmt(r.test_accuracy()) << ','
          << fmt(r.in_domain_ece()) << '\n';
    }
  }
  return out.str();
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "step,epoch,epsilon,l_cce,l_s,l_adv\n";
  for (const auto& row : history.rows) {
    out << row.step << ',' << row.epoch << ',' << fmt(row.epsilon) << ',' << fmt(row.l_cce) << ','
        << (row.l_s ? fmt(*row.l_s) : "") << ',' << (row.l_adv ? fmt(*row.l_adv) : "") << '\n';
  }
  return out.str();
}

}  // namespace falcon
