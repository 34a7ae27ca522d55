#include "locoman/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace locoman {

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string to_json_line(const MetricRow& row) {
  std::string out = "{";
  bool first = true;
  for (const auto& [key, value] : row) {  // std::map: deterministic key order
    if (!first) out += ",";
    first = false;
    out += "\"" + json_escape(key) + "\":";
    if (std::holds_alternative<double>(value)) {
      out += fmt_double(std::get<double>(value));
    } else if (std::holds_alternative<long>(value)) {
      out += std::to_string(std::get<long>(value));
    } else if (std::holds_alternative<bool>(value)) {
      out += std::get<bool>(value) ? "true" : "false";
    } else {
      out += "\"" + json_escape(std::get<std::string>(value)) + "\"";
    }
  }
  out += "}";
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path) : path_(path) {
  if (path_.empty()) return;  // disabled sink
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("JsonlWriter: cannot open " + path_);
}

void JsonlWriter::write(const MetricRow& row) {
  if (path_.empty()) return;
  buffer_ += to_json_line(row);
  buffer_ += "\n";
  if (buffer_.size() > 1 << 16) flush();
}

void JsonlWriter::flush() {
  if (path_.empty() || buffer_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  out << buffer_;
  buffer_.clear();
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<double>& x, const std::vector<SvgSeries>& series,
                     int width, int height) {
  if (x.empty() || series.empty()) throw std::invalid_argument("write_svg_chart: empty data");
  double ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (ymax - ymin < 1e-12) {
    ymax += 1.0;
    ymin -= 1.0;
  }
  const double xmin = x.front(), xmax = x.back() == x.front() ? x.front() + 1 : x.back();
  const int ml = 60, mr = 20, mt = 40, mb = 40;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double v) { return ml + pw * (v - xmin) / (xmax - xmin); };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", width,
                height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">%s</text>\n",
                ml, title.c_str());
  svg += buf;
  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml,
                height - mb, width - mr, height - mb);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml, mt, ml,
                height - mb);
  svg += buf;
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"4\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">%.3g"
                  "</text>\n",
                  py(v) + 4, v);
    svg += buf;
  }

  for (size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    if (s.y.size() != x.size())
      throw std::invalid_argument("write_svg_chart: series length mismatch");
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += colors[si % 8];
    svg += "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(x[i]), py(s.y[i]));
      svg += buf;
    }
    svg += "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" "
                  "fill=\"%s\">%s</text>\n",
                  width - mr - 160, mt + 16 * static_cast<int>(si) + 4, colors[si % 8],
                  s.label.c_str());
    svg += buf;
  }
  svg += "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg_chart: cannot open " + path);
  out << svg;
}

}  // namespace locoman
