#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace locoman {

using MetricValue = std::variant<double, long, std::string, bool>;
using MetricRow = std::map<std::string, MetricValue>;

/// Append-only JSON-lines writer with deterministic key order and float
/// formatting (%.9g), so identical runs produce identical bytes.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::string& path);
  void write(const MetricRow& row);
  void flush();
  bool open() const { return !path_.empty(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buffer_;
};

std::string to_json_line(const MetricRow& row);

/// Minimal SVG line chart: one polyline per series over a shared x axis.
struct SvgSeries {
  std::string label;
  std::vector<double> y;
};

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<double>& x, const std::vector<SvgSeries>& series,
                     int width = 900, int height = 420);

}  // namespace locoman
