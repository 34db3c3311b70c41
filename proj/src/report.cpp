#include "fusegate/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fusegate/config.hpp"
#include "fusegate/errors.hpp"

namespace fusegate {

namespace {

using nlohmann::json;

json trace_to_json(const std::vector<std::pair<std::size_t, double>>& trace) {
  json arr = json::array();
  for (const auto& [iter, value] : trace) {
    arr.push_back(json::array({iter, value}));
  }
  return arr;
}

std::vector<std::pair<std::size_t, double>> trace_from_json(const json& arr) {
  std::vector<std::pair<std::size_t, double>> trace;
  for (const auto& entry : arr) {
    trace.emplace_back(entry.at(0).get<std::size_t>(),
                       entry.at(1).get<double>());
  }
  return trace;
}

json report_to_json(const FusionReport& report) {
  json j;
  j["feature_weights"] = report.feature_weights;
  j["group_weights"] = report.group_weights;
  j["final_weights"] = report.final_weights;
  return j;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_run_result(const RunResult& result, const ExperimentConfig& config,
                      const std::string& path) {
  json payload;
  payload["architecture"] = result.architecture;
  payload["perturbation"] = result.perturbation_label;
  payload["seed"] = result.seed;
  payload["fingerprint"] = result.fingerprint;
  payload["accuracy"] = result.accuracy;
  payload["n_train"] = result.n_train;
  payload["n_test"] = result.n_test;
  payload["loss_trace"] = trace_to_json(result.loss_trace);
  payload["accuracy_trace"] = trace_to_json(result.accuracy_trace);
  payload["mean_report"] = report_to_json(result.mean_report);

  json meta;
  meta["wall_seconds"] = result.wall_seconds;
  meta["config"] = json::parse(serialize_experiment_config(config));

  json doc;
  doc["format_version"] = 1;
  doc["payload"] = std::move(payload);
  doc["meta"] = std::move(meta);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

RunResult read_run_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
  const json& payload = doc.at("payload");
  RunResult result;
  result.architecture = payload.at("architecture").get<std::string>();
  result.perturbation_label = payload.at("perturbation").get<std::string>();
  result.seed = payload.at("seed").get<std::uint64_t>();
  result.fingerprint = payload.at("fingerprint").get<std::string>();
  result.accuracy = payload.at("accuracy").get<double>();
  result.n_train = payload.at("n_train").get<std::size_t>();
  result.n_test = payload.at("n_test").get<std::size_t>();
  result.loss_trace = trace_from_json(payload.at("loss_trace"));
  result.accuracy_trace = trace_from_json(payload.at("accuracy_trace"));
  const json& report = payload.at("mean_report");
  result.mean_report.feature_weights =
      report.at("feature_weights").get<std::vector<double>>();
  result.mean_report.group_weights =
      report.at("group_weights").get<std::vector<double>>();
  result.mean_report.final_weights =
      report.at("final_weights").get<std::vector<double>>();
  result.wall_seconds = doc.at("meta").at("wall_seconds").get<double>();
  return result;
}

std::string run_result_payload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json doc;
  in >> doc;
  return doc.at("payload").dump();
}

void write_comparison_csv(const ComparisonTable& table,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "architecture,seed,fingerprint";
  for (const std::string& label : table.perturbation_labels) {
    out << ",accuracy:" << label;
  }
  out << '\n';
  for (const ComparisonRow& row : table.rows) {
    out << row.architecture << ',' << row.seed << ',' << row.fingerprint;
    for (const auto& [label, accuracy] : row.accuracy_by_perturbation) {
      out << ',' << format_double(accuracy);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

ComparisonTable read_comparison_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");

  auto split = [](const std::string& text) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : text) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    return fields;
  };

  auto header = split(line);
  if (header.size() < 4 || header[0] != "architecture") {
    throw DataError("'" + path + "': not a comparison table");
  }
  ComparisonTable table;
  for (std::size_t i = 3; i < header.size(); ++i) {
    const std::string prefix = "accuracy:";
    if (header[i].rfind(prefix, 0) != 0) {
      throw DataError("'" + path + "': bad accuracy column '" + header[i] + "'");
    }
    table.perturbation_labels.push_back(header[i].substr(prefix.size()));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    ComparisonRow row;
    row.architecture = fields[0];
    row.seed = std::stoull(fields[1]);
    row.fingerprint = fields[2];
    for (std::size_t i = 3; i < fields.size(); ++i) {
      row.accuracy_by_perturbation.emplace_back(
          table.perturbation_labels[i - 3], std::stod(fields[i]));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ComparisonTable single_run_table(const RunResult& result) {
  ComparisonTable table;
  table.perturbation_labels.push_back(result.perturbation_label);
  ComparisonRow row;
  row.architecture = result.architecture;
  row.seed = result.seed;
  row.fingerprint = result.fingerprint;
  row.accuracy_by_perturbation.emplace_back(result.perturbation_label,
                                            result.accuracy);
  table.rows.push_back(std::move(row));
  return table;
}

namespace {

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

void write_svg_header(std::ostream& out, const std::string& title) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <text x=\"" << kWidth / 2
      << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << escape_xml(title) << "</text>\n";
}

}  // namespace

void write_loss_svg(const std::vector<std::pair<std::size_t, double>>& trace,
                    const std::string& title, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_svg_header(out, title);

  if (!trace.empty()) {
    double lo = trace.front().second, hi = trace.front().second;
    std::size_t x_max = 1;
    for (const auto& [iter, v] : trace) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      x_max = std::max(x_max, iter);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](std::size_t iter) {
      return kMarginLeft + plot_w * static_cast<double>(iter) /
                               static_cast<double>(x_max);
    };
    auto py = [&](double v) {
      return kMarginTop + plot_h * (1.0 - (v - lo) / (hi - lo));
    };
    out << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
           "points=\"";
    for (const auto& [iter, v] : trace) {
      out << px(iter) << ',' << py(v) << ' ';
    }
    out << "\"/>\n";
    // Axes and extremal tick labels.
    out << "  <line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop
        << "\" x2=\"" << kMarginLeft << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n"
        << "  <line x1=\"" << kMarginLeft << "\" y1=\""
        << kHeight - kMarginBottom << "\" x2=\"" << kWidth - kMarginRight
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", hi);
    out << "  <text x=\"" << kMarginLeft - 6 << "\" y=\"" << kMarginTop + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", lo);
    out << "  <text x=\"" << kMarginLeft - 6 << "\" y=\""
        << kHeight - kMarginBottom + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << buf << "</text>\n";
    out << "  <text x=\"" << kWidth - kMarginRight << "\" y=\""
        << kHeight - kMarginBottom + 18
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">iteration "
        << x_max << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_accuracy_svg(
    const std::vector<std::pair<std::string, double>>& bars,
    const std::string& title, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_svg_header(out, title);

  if (!bars.empty()) {
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double slot = plot_w / static_cast<double>(bars.size());
    const double bar_w = slot * 0.6;
    for (std::size_t i = 0; i < bars.size(); ++i) {
      const double value = std::clamp(bars[i].second, 0.0, 1.0);
      const double h = plot_h * value;
      const double x = kMarginLeft + slot * (static_cast<double>(i) + 0.2);
      const double y = kMarginTop + plot_h - h;
      out << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w
          << "\" height=\"" << h << "\" fill=\"#2ca02c\"/>\n";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * bars[i].second);
      out << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 4
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"11\">"
          << buf << "</text>\n";
      out << "  <text x=\"" << x + bar_w / 2 << "\" y=\""
          << kHeight - kMarginBottom + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"11\">"
          << escape_xml(bars[i].first) << "</text>\n";
    }
    out << "  <line x1=\"" << kMarginLeft << "\" y1=\""
        << kHeight - kMarginBottom << "\" x2=\"" << kWidth - kMarginRight
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

void emit_reports(const RunResult& result, const ExperimentConfig& config,
                  const std::string& dir) {
  ensure_dir(dir);
  write_run_result(result, config, dir + "/results.json");
  write_comparison_csv(single_run_table(result), dir + "/table.csv");
  write_loss_svg(result.loss_trace,
                 "training loss (" + result.architecture + ")",
                 dir + "/loss.svg");
  write_accuracy_svg({{result.architecture, result.accuracy}},
                     "test accuracy (" + result.perturbation_label + ")",
                     dir + "/accuracy.svg");
}

}  // namespace fusegate
