#include "posbias/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace posbias::svg {

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

namespace {

std::string header(int width, int height, const std::string& title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
  return out.str();
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& series_names,
                      const std::vector<std::string>& colors, const std::vector<BarGroup>& groups) {
  const int left = 50, top = 40, plot_h = 240, bar_w = 22, gap = 30;
  const int n_series = static_cast<int>(series_names.size());
  const int group_w = n_series * bar_w + gap;
  const int width = left + std::max(1, static_cast<int>(groups.size())) * group_w + 140;
  const int height = top + plot_h + 50;
  std::ostringstream out;
  out << header(width, height, title);
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 140 << "\" y2=\""
      << top + plot_h << "\" stroke=\"#000\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h - plot_h * t / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << t * 25
        << "%</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int x0 = left + static_cast<int>(g) * group_w + gap / 2;
    for (int s = 0; s < n_series && s < static_cast<int>(groups[g].values.size()); ++s) {
      const double v = groups[g].values[s];
      if (std::isnan(v)) continue;
      const double h = plot_h * std::clamp(v, 0.0, 1.0);
      out << "<rect x=\"" << x0 + s * bar_w << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w - 2
          << "\" height=\"" << h << "\" fill=\"" << colors[s % colors.size()]
          << "\" stroke=\"#333\"><title>" << escape(series_names[s]) << ": " << v << "</title></rect>\n";
      out << "<text x=\"" << x0 + s * bar_w + bar_w / 2 << "\" y=\"" << top + plot_h - h - 3
          << "\" text-anchor=\"middle\" font-size=\"8\">" << std::lround(v * 1000) / 10.0 << "</text>\n";
    }
    out << "<text x=\"" << x0 + n_series * bar_w / 2 << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\">" << escape(groups[g].label) << "</text>\n";
  }
  for (int s = 0; s < n_series; ++s) {
    const int y = top + 10 + s * 16;
    out << "<rect x=\"" << width - 130 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << colors[s % colors.size()] << "\" stroke=\"#333\"/><text x=\"" << width - 115 << "\" y=\"" << y
        << "\">" << escape(series_names[s]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series) {
  const int left = 50, top = 40, plot_w = 360, plot_h = 240, legend_w = 200;
  const int width = left + plot_w + legend_w, height = top + plot_h + 50;
  double x_min = 0, x_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (double x : s.x) {
      if (first) {
        x_min = x_max = x;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  auto px = [&](double x) { return left + plot_w * (x - x_min) / (x_max - x_min); };
  auto py = [&](double y) { return top + plot_h - plot_h * std::clamp(y, 0.0, 1.0); };

  std::ostringstream out;
  out << header(width, height, title);
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#000\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(t / 4.0) + 4 << "\" text-anchor=\"end\">" << t * 25
        << "%</text>\n";
  }
  for (int x = static_cast<int>(x_min); x <= static_cast<int>(x_max); ++x) {
    out << "<text x=\"" << px(x) << "\" y=\"" << top + plot_h + 14 << "\" text-anchor=\"middle\">" << x
        << "</text>\n";
  }
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 32 << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
    if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
    out << " points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) out << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    out << "\"><title>" << escape(s.name) << "</title></polyline>\n";
    const int ly = top + 10 + static_cast<int>(i) * 15;
    out << "<line x1=\"" << left + plot_w + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + plot_w + 30
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
    if (!s.dash.empty()) out << " stroke-dasharray=\"" << s.dash << "\"";
    out << "/><text x=\"" << left + plot_w + 35 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels,
                    const std::vector<std::string>& col_colors, const std::vector<double>& values,
                    const std::string& palette) {
  const int cell = 18, left = 70, top = 40;
  const int rows = static_cast<int>(row_labels.size()), cols = static_cast<int>(col_labels.size());
  const int width = left + cols * cell + 20, height = top + rows * cell + 110;
  double lo = 0, hi = 0;
  bool first = true;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    if (first) {
      lo = hi = v;
      first = false;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = std::max(std::abs(lo), std::abs(hi));
  auto color = [&](double v) {
    char buf[8];
    if (palette == "diverging") {
      const double t = span > 0 ? std::clamp(v / span, -1.0, 1.0) : 0.0;
      const int r = t < 0 ? static_cast<int>(255 * (1 + t)) : 255;
      const int b = t > 0 ? static_cast<int>(255 * (1 - t)) : 255;
      const int g = static_cast<int>(255 * (1 - std::abs(t)));
      std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    } else {
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      const int c = static_cast<int>(255 * (1 - t));
      std::snprintf(buf, sizeof buf, "#%02x%02x%02x", 255, c, static_cast<int>(c * 0.6));
    }
    return std::string(buf);
  };
  std::ostringstream out;
  out << header(width, height, title);
  for (int r = 0; r < rows; ++r) {
    out << "<text x=\"" << left - 4 << "\" y=\"" << top + r * cell + 13 << "\" text-anchor=\"end\">"
        << escape(row_labels[r]) << "</text>\n";
    for (int c = 0; c < cols; ++c) {
      const double v = values[static_cast<std::size_t>(r) * cols + c];
      out << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << (std::isfinite(v) ? color(v) : "#cccccc")
          << "\"><title>" << escape(row_labels[r]) << " / " << escape(col_labels[c]) << ": " << v
          << "</title></rect>\n";
    }
  }
  for (int c = 0; c < cols; ++c) {
    const int x = left + c * cell + 12, y = top + rows * cell + 6;
    const std::string& fill = c < static_cast<int>(col_colors.size()) && !col_colors[c].empty() ? col_colors[c] : "#000";
    out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(60 " << x << ' ' << y
        << ")\" fill=\"" << fill << "\">" << escape(col_labels[c]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace posbias::svg
