#pragma once

#include <string>
#include <vector>

namespace posbias::svg {

struct Series {
  std::string name;
  std::string color;
  std::string dash;  // stroke-dasharray, empty for solid
  std::vector<double> x;
  std::vector<double> y;
};

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per bar series; NaN = missing
};

std::string bar_chart(const std::string& title, const std::vector<std::string>& series_names,
                      const std::vector<std::string>& colors, const std::vector<BarGroup>& groups);

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series);

// Row-major values; cells coloured by `palette`: "log" (sequential, values are
// already log-scaled), or "diverging" (symmetric around zero).
std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::string>& col_colors, const std::vector<double>& values,
                    const std::string& palette);

std::string escape(const std::string& text);

}  // namespace posbias::svg
