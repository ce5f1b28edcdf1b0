#include <algorithm>
#include <cstdio>
#include <sstream>

#include "falcon/error.hpp"
#include "falcon/report.hpp"

namespace falcon {

using nlohmann::json;

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Provenance minus anything path-like.
json scrubbed(const json& provenance) {
  json p = provenance;
  if (p.contains("config") && p["config"].contains("data")) p["config"]["data"].erase("mnist_dir");
  return p;
}

class Svg {
 public:
  Svg(const std::string& title, const std::vector<const CalibrationReport*>& sources) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" font-family=\"sans-serif\" font-size=\"12\">\n<metadata>";
    json meta = json::array();
    for (const auto* r : sources) meta.push_back({{"model", r->model_label}, {"provenance", scrubbed(r->provenance)}});
    out_ << escape(meta.dump()) << "</metadata>\n"
         << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
         << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
         << "</text>\n";
  }

  double x(double fraction) const { return kLeft + fraction * (kWidth - kLeft - kRight); }
  double y(double fraction) const { return kHeight - kBottom - fraction * (kHeight - kTop - kBottom); }

  void axes(const std::string& xlabel, const std::string& ylabel, double ymax) {
    out_ << "<line x1=\"" << num(x(0)) << "\" y1=\"" << num(y(0)) << "\" x2=\"" << num(x(1)) << "\" y2=\"" << num(y(0))
         << "\" stroke=\"black\"/>\n"
         << "<line x1=\"" << num(x(0)) << "\" y1=\"" << num(y(0)) << "\" x2=\"" << num(x(0)) << "\" y2=\"" << num(y(1))
         << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double f = t / 4.0;
      out_ << "<text x=\"" << num(x(0) - 6) << "\" y=\"" << num(y(f) + 4) << "\" text-anchor=\"end\">" << num(f * ymax)
           << "</text>\n";
    }
    out_ << "<text x=\"" << num(x(0.5)) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">"
         << escape(xlabel) << "</text>\n"
         << "<text x=\"16\" y=\"" << num(y(0.5)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << num(y(0.5))
         << ")\">" << escape(ylabel) << "</text>\n";
  }

  void xtick(double fraction, const std::string& label) {
    out_ << "<text x=\"" << num(x(fraction)) << "\" y=\"" << num(y(0) + 16) << "\" text-anchor=\"middle\">"
         << escape(label) << "</text>\n";
  }

  void rect(double x0, double y0, double x1, double y1, const std::string& fill, const std::string& extra = "") {
    out_ << "<rect x=\"" << num(std::min(x0, x1)) << "\" y=\"" << num(std::min(y0, y1)) << "\" width=\""
         << num(std::abs(x1 - x0)) << "\" height=\"" << num(std::abs(y1 - y0)) << "\" fill=\"" << fill << "\"" << extra
         << "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, const std::string& extra = "") {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << extra << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
    out_ << "\"/>\n";
  }

  void legend(std::size_t slot, const std::string& color, const std::string& label) {
    const double ly = kTop + 4 + 16.0 * static_cast<double>(slot);
    rect(x(0) + 10, ly, x(0) + 22, ly + 10, color);
    out_ << "<text x=\"" << num(x(0) + 28) << "\" y=\"" << num(ly + 9) << "\">" << escape(label) << "</text>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

std::vector<const CalibrationReport*> pointers(const std::vector<CalibrationReport>& reports) {
  std::vector<const CalibrationReport*> out;
  for (const auto& r : reports) out.push_back(&r);
  return out;
}

double nice_max(double v) {
  for (double m : {0.1, 0.2, 0.25, 0.5, 0.75, 1.0}) {
    if (v <= m) return m;
  }
  return 1.0;
}

}  // namespace

std::string svg_ece_vs_level(const std::vector<CalibrationReport>& reports) {
  if (reports.empty()) throw ContractError("no reports to plot");
  double peak = 0.0;
  for (const auto& r : reports) {
    for (const auto& c : r.cells) peak = std::max(peak, c.ece);
  }
  const double ymax = nice_max(peak);
  Svg svg("ECE vs perturbation level", pointers(reports));
  svg.axes("perturbation level", "ECE", ymax);
  for (int level = 0; level <= 90; level += 10) svg.xtick(level / 90.0, std::to_string(level));
  std::size_t series = 0;
  for (const auto& r : reports) {
    for (const auto& [name, _] : r.micro_ece) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& c : r.cells) {
        if (c.perturbation == name) pts.emplace_back(svg.x(c.level / 90.0), svg.y(c.ece / ymax));
      }
      const std::string color = kPalette[series % 10];
      svg.polyline(pts, color);
      svg.legend(series, color, r.model_label + " / " + name);
      ++series;
    }
  }
  return svg.finish();
}

std::string svg_reliability(const CalibrationReport& report, const std::string& perturbation, int level) {
  const CellMetrics* cell = report.cell(perturbation, level);
  if (!cell) {
    throw ContractError("report '" + report.model_label + "' has no cell " + perturbation + " level " +
                        std::to_string(level));
  }
  Svg svg("Reliability: " + report.model_label + ", " + perturbation + " level " + std::to_string(level), {&report});
  svg.axes("confidence", "accuracy", 1.0);
  for (int t = 0; t <= 4; ++t) svg.xtick(t / 4.0, num(t / 4.0));
  for (const auto& b : cell->bins) {
    if (b.count == 0) continue;
    svg.rect(svg.x(b.lower), svg.y(0), svg.x(b.upper), svg.y(*b.avg_accuracy), "#1f77b4",
             " stroke=\"white\" data-bin=\"" + std::to_string(b.index) + "\" data-accuracy=\"" +
                 g9(*b.avg_accuracy) + "\" data-confidence=\"" + g9(*b.avg_confidence) + "\"");
    svg.rect(svg.x(b.lower), svg.y(*b.avg_accuracy), svg.x(b.upper), svg.y(*b.avg_confidence), "#d62728",
             " fill-opacity=\"0.3\"");
  }
  svg.polyline({{svg.x(0), svg.y(0)}, {svg.x(1), svg.y(1)}}, "gray", " stroke-dasharray=\"4 4\"");
  svg.legend(0, "#1f77b4", "accuracy");
  svg.legend(1, "#d62728", "gap to confidence");
  return svg.finish();
}

std::string svg_micro_ece_bars(const std::vector<CalibrationReport>& reports) {
  if (reports.empty()) throw ContractError("no reports to plot");
  std::vector<std::string> kinds;
  double peak = 0.0;
  for (const auto& r : reports) {
    for (const auto& [name, value] : r.micro_ece) {
      if (std::find(kinds.begin(), kinds.end(), name) == kinds.end()) kinds.push_back(name);
      peak = std::max(peak, value);
    }
  }
  const double ymax = nice_max(peak);
  Svg svg("Micro-averaged ECE per perturbation", pointers(reports));
  svg.axes("perturbation", "micro-averaged ECE", ymax);
  const double group = kinds.empty() ? 1.0 : 1.0 / static_cast<double>(kinds.size());
  const double bar = group * 0.8 / static_cast<double>(reports.size());
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    svg.xtick((static_cast<double>(k) + 0.5) * group, kinds[k]);
    for (std::size_t m = 0; m < reports.size(); ++m) {
      const auto value = reports[m].micro(kinds[k]);
      if (!value) continue;
      const double x0 = static_cast<double>(k) * group + 0.1 * group + static_cast<double>(m) * bar;
      svg.rect(svg.x(x0), svg.y(0), svg.x(x0 + bar), svg.y(*value / ymax), kPalette[m % 10]);
    }
  }
  for (std::size_t m = 0; m < reports.size(); ++m) svg.legend(m, kPalette[m % 10], reports[m].model_label);
  return svg.finish();
}

}  // namespace falcon
