#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "common.hpp"
#include "posbias/svg.hpp"

namespace posbias::attn {

namespace detail {

void check_units(const SpanMatrix& ref, const SpanMatrix& m) {
  if (m.axis != ref.axis || m.units != ref.units) throw ShapeError("matrices have different units");
  if (m.values.size() != m.rows() * m.cols()) throw ShapeError("matrix values do not match its labels");
}

std::vector<std::size_t> align_columns(const SpanMatrix& ref, const SpanMatrix& m) {
  if (m.cols() != ref.cols()) {
    throw ShapeError("span count " + std::to_string(m.cols()) + " differs from " + std::to_string(ref.cols()));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < m.cols(); ++s) {
    if (!index.emplace(m.spans[s].name, s).second) throw ShapeError("duplicate span " + m.spans[s].name);
  }
  std::vector<std::size_t> perm(ref.cols());
  for (std::size_t s = 0; s < ref.cols(); ++s) {
    const auto it = index.find(ref.spans[s].name);
    if (it == index.end()) throw ShapeError("span " + ref.spans[s].name + " missing from a matrix");
    perm[s] = it->second;
  }
  return perm;
}

}  // namespace detail

SpanMatrix diff(const SpanMatrix& a, const SpanMatrix& b) {
  detail::check_units(a, b);
  const auto perm = detail::align_columns(a, b);
  SpanMatrix out = a;
  for (std::size_t u = 0; u < a.rows(); ++u) {
    for (std::size_t s = 0; s < a.cols(); ++s) out.at(u, s) = a.at(u, s) - b.at(u, perm[s]);
  }
  std::fill(out.std_error.begin(), out.std_error.end(), 0.0);
  out.samples = std::min(a.samples, b.samples);
  out.low_sample = a.low_sample || b.low_sample;
  return out;
}

SpanMatrix doc_normalize(const SpanMatrix& m) {
  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s < m.cols(); ++s) {
    if (m.spans[s].kind == SpanKind::Document) keep.push_back(s);
  }
  if (keep.empty()) throw ShapeError("matrix has no document spans");
  SpanMatrix out;
  out.axis = m.axis;
  out.units = m.units;
  for (std::size_t s : keep) out.spans.push_back(m.spans[s]);
  out.values.assign(out.rows() * out.cols(), 0.0);
  out.std_error.assign(out.values.size(), 0.0);
  out.samples = m.samples;
  out.low_sample = m.low_sample;
  out.unnormalized.assign(out.rows(), false);
  for (std::size_t u = 0; u < m.rows(); ++u) {
    double total = 0.0;
    for (std::size_t s : keep) total += m.at(u, s);
    const bool zero = !(total > 0.0);
    out.unnormalized[u] = zero;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      out.at(u, k) = zero ? m.at(u, keep[k]) : m.at(u, keep[k]) / total;
      if (!m.std_error.empty()) {
        const double se = m.std_error[u * m.cols() + keep[k]];
        out.std_error[u * out.cols() + k] = zero ? se : se / total;
      }
    }
  }
  return out;
}

namespace {

std::string display_name(const SpanLabel& s) { return s.gold ? s.name + "*" : s.name; }

}  // namespace

std::string matrix_csv(const SpanMatrix& m, bool spans_as_rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (!spans_as_rows) {
    os << (m.axis == Axis::Layer ? "layer" : "head");
    for (const auto& s : m.spans) os << ',' << s.name;
    os << '\n';
    for (std::size_t u = 0; u < m.rows(); ++u) {
      os << m.units[u];
      for (std::size_t s = 0; s < m.cols(); ++s) os << ',' << m.at(u, s);
      os << '\n';
    }
  } else {
    os << "span,gold,instructed";
    for (const auto& u : m.units) os << ',' << u;
    os << '\n';
    for (std::size_t s = 0; s < m.cols(); ++s) {
      os << m.spans[s].name << ',' << (m.spans[s].gold ? 1 : 0) << ',' << (m.spans[s].instructed ? 1 : 0);
      for (std::size_t u = 0; u < m.rows(); ++u) os << ',' << m.at(u, s);
      os << '\n';
    }
  }
  return os.str();
}

std::string matrix_svg(const SpanMatrix& m, const std::string& title, bool log_scale, bool diverging) {
  std::vector<std::string> cols, colors;
  for (const auto& s : m.spans) {
    cols.push_back(display_name(s));
    colors.push_back(s.instructed ? "#c62828" : "#222222");
  }
  std::vector<double> values = m.values;
  if (log_scale && !diverging) {
    for (double& v : values) v = std::log10(std::max(v, kLogFloor));
  }
  std::string t = title;
  if (m.low_sample) t += " (n=" + std::to_string(m.samples) + ", low sample)";
  return svg::heatmap(t, m.units, cols, colors, values, diverging ? "diverging" : "log");
}

}  // namespace posbias::attn
