#include "posbias/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"
#include "posbias/svg.hpp"

namespace posbias {

using nlohmann::json;

std::string Group::label() const {
  if (protocol == Protocol::Spread) return bucket_name(first);
  return bucket_name(first) + "+" + bucket_name(second);
}

Group group_of(const Placement& p) {
  if (const auto* s = std::get_if<SpreadPlacement>(&p)) return {Protocol::Spread, s->bucket, -1};
  const auto& c = std::get<CrossPlacement>(p);
  return {Protocol::Cross, c.first, c.second};
}

int x_of(const Placement& p) {
  if (const auto* s = std::get_if<SpreadPlacement>(&p)) return s->distance;
  return std::get<CrossPlacement>(p).local_idx;
}

std::string to_string(Column c) {
  switch (c) {
    case Column::NA:
      return "na";
    case Column::Matched:
      return "matched";
    case Column::Unmatched:
      return "unmatched";
  }
  return "na";
}

Column column_of(const Condition& c) {
  switch (c.kind) {
    case ConditionKind::NA:
      return Column::NA;
    case ConditionKind::Matched:
      return Column::Matched;
    case ConditionKind::Unmatched:
      return Column::Unmatched;
  }
  return Column::NA;
}

namespace {

double mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

using PointMap = std::map<Group, std::map<Column, std::map<int, std::vector<double>>>>;

PointMap collect(const CellTable& table, Protocol protocol) {
  PointMap points;
  for (const auto& [cell, value] : table) {
    if (protocol_of(cell.placement) != protocol) continue;
    points[group_of(cell.placement)][column_of(cell.condition)][x_of(cell.placement)].push_back(
        value.accuracy);
  }
  return points;
}

std::vector<Curve> curves_for(const CellTable& table, Protocol protocol) {
  std::vector<Curve> out;
  for (const auto& [group, columns] : collect(table, protocol)) {
    for (const auto& [column, xs] : columns) {
      Curve c{group, column, {}, {}};
      for (const auto& [x, values] : xs) {
        c.x.push_back(x);
        c.y.push_back(mean(values));
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

// Unmatched variants expected per placement under the given geometry.
std::size_t variants_expected(Protocol protocol, const BucketSpec& spec) {
  return protocol == Protocol::Spread ? static_cast<std::size_t>(spec.n_buckets - 1) : 3;
}

}  // namespace

std::vector<Curve> distance_curves(const CellTable& table) { return curves_for(table, Protocol::Spread); }

std::vector<Curve> local_idx_curves(const CellTable& table) { return curves_for(table, Protocol::Cross); }

std::vector<BucketRow> bucket_table(const CellTable& table, const BucketSpec& spec) {
  std::vector<BucketRow> rows;
  for (Protocol protocol : {Protocol::Spread, Protocol::Cross}) {
    const std::size_t points_expected = static_cast<std::size_t>(
        protocol == Protocol::Spread ? spec.bucket_size() - 1 : spec.bucket_size());
    const PointMap points = collect(table, protocol);
    for (const auto& curve : curves_for(table, protocol)) {
      if (rows.empty() || rows.back().group != curve.group) rows.push_back({curve.group, {}, {}, {}, false});
      BucketRow& row = rows.back();
      const double value = mean(curve.y);
      switch (curve.column) {
        case Column::NA:
          row.na = value;
          break;
        case Column::Matched:
          row.matched = value;
          break;
        case Column::Unmatched:
          row.unmatched = value;
          for (const auto& [x, variants] : points.at(curve.group).at(Column::Unmatched)) {
            if (variants.size() < variants_expected(protocol, spec)) row.partial = true;
          }
          break;
      }
      if (curve.x.size() < points_expected) row.partial = true;
    }
  }
  return rows;
}

WeakestLinkReport weakest_link(const CellTable& table, double margin) {
  WeakestLinkReport report;
  report.margin = margin;
  std::map<BucketId, double> spread;
  for (const auto& c : distance_curves(table)) {
    if (c.column == Column::NA) spread[c.group.first] = mean(c.y);
  }
  std::vector<Curve> cross;
  for (auto& c : local_idx_curves(table)) {
    if (c.column == Column::NA) cross.push_back(std::move(c));
  }
  if (spread.empty() || cross.empty()) {
    report.notices.push_back("weakest-link skipped: needs NA cells from both Spread and Cross");
    return report;
  }
  for (const auto& c : cross) {
    const auto s1 = spread.find(c.group.first);
    const auto s2 = spread.find(c.group.second);
    if (s1 == spread.end() || s2 == spread.end()) {
      report.notices.push_back("weakest-link skipped for " + c.group.label() +
                               ": missing Spread NA cells");
      continue;
    }
    WeakestLinkRow row;
    row.first = c.group.first;
    row.second = c.group.second;
    row.cross_accuracy = mean(c.y);
    row.spread_first = s1->second;
    row.spread_second = s2->second;
    row.binding = row.spread_second < row.spread_first ? row.second : row.first;
    row.min_spread = std::min(row.spread_first, row.spread_second);
    row.deviation = row.cross_accuracy - row.min_spread;
    row.violation = row.deviation > margin;
    row.recognition_bound = std::sqrt(row.min_spread);
    row.bound_deviation = row.cross_accuracy - row.recognition_bound;
    report.rows.push_back(row);
  }
  return report;
}

std::vector<VarianceRow> variance_check(const CellTable& table) {
  std::vector<VarianceRow> out;
  for (const auto& c : distance_curves(table)) {
    VarianceRow row{c.group.first, c.column, c.y.size(), 0.0, 0.0};
    const auto [lo, hi] = std::minmax_element(c.y.begin(), c.y.end());
    row.range = *hi - *lo;
    const double m = mean(c.y);
    double ss = 0.0;
    for (double y : c.y) ss += (y - m) * (y - m);
    row.stddev = std::sqrt(ss / static_cast<double>(c.y.size()));
    out.push_back(row);
  }
  return out;
}

std::vector<LengthRow> length_signal(const CellTable& table) {
  struct Acc {
    double weighted = 0.0;
    double weight = 0.0;
  };
  std::map<Group, std::map<Column, Acc>> acc;
  for (const auto& [cell, v] : table) {
    const double w = v.n > 0 ? static_cast<double>(v.n) : 1.0;
    Acc& a = acc[group_of(cell.placement)][column_of(cell.condition)];
    a.weighted += v.mean_length * w;
    a.weight += w;
  }
  std::vector<LengthRow> out;
  for (const auto& [group, columns] : acc) {
    const auto na = columns.find(Column::NA);
    if (na == columns.end()) continue;
    LengthRow row;
    row.group = group;
    row.na_mean = na->second.weighted / na->second.weight;
    row.degenerate = row.na_mean == 0.0;
    if (const auto m = columns.find(Column::Matched); m != columns.end()) {
      row.matched_mean = m->second.weighted / m->second.weight;
      if (!row.degenerate) row.matched_ratio = *row.matched_mean / row.na_mean;
    }
    if (const auto u = columns.find(Column::Unmatched); u != columns.end()) {
      row.unmatched_mean = u->second.weighted / u->second.weight;
      if (!row.degenerate) row.unmatched_ratio = *row.unmatched_mean / row.na_mean;
    }
    out.push_back(row);
  }
  return out;
}

Report build_report(const CellTable& table, const BucketSpec& spec, double margin) {
  Report r;
  r.spec = spec;
  r.cells = table;
  r.buckets = bucket_table(table, spec);
  r.distance = distance_curves(table);
  r.local_idx = local_idx_curves(table);
  r.weakest = weakest_link(table, margin);
  r.variance = variance_check(table);
  r.lengths = length_signal(table);
  return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string{}; }

json curves_json(const std::vector<Curve>& curves) {
  json out = json::array();
  for (const auto& c : curves) {
    out.push_back({{"group", c.group.label()}, {"condition", to_string(c.column)}, {"x", c.x}, {"y", c.y}});
  }
  return out;
}

json buckets_json(const std::vector<BucketRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"protocol", to_string(r.group.protocol)},
                   {"group", r.group.label()},
                   {"na", opt(r.na)},
                   {"matched", opt(r.matched)},
                   {"unmatched", opt(r.unmatched)},
                   {"partial", r.partial}});
  }
  return out;
}

json weakest_json(const WeakestLinkReport& w) {
  json rows = json::array();
  for (const auto& r : w.rows) {
    rows.push_back({{"pair", bucket_name(r.first) + "+" + bucket_name(r.second)},
                    {"cross_accuracy", r.cross_accuracy},
                    {"spread_first", r.spread_first},
                    {"spread_second", r.spread_second},
                    {"min_spread", r.min_spread},
                    {"deviation", r.deviation},
                    {"binding", bucket_name(r.binding)},
                    {"violation", r.violation},
                    {"recognition_bound", r.recognition_bound},
                    {"bound_deviation", r.bound_deviation}});
  }
  return {{"margin", w.margin}, {"rows", rows}, {"notices", w.notices}};
}

json variance_json(const std::vector<VarianceRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"bucket", bucket_name(r.bucket)},
                   {"condition", to_string(r.column)},
                   {"cells", r.cells},
                   {"range", r.range},
                   {"stddev", r.stddev}});
  }
  return out;
}

json lengths_json(const std::vector<LengthRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"protocol", to_string(r.group.protocol)},
                   {"group", r.group.label()},
                   {"na_mean", r.na_mean},
                   {"matched_mean", opt(r.matched_mean)},
                   {"unmatched_mean", opt(r.unmatched_mean)},
                   {"matched_ratio", opt(r.matched_ratio)},
                   {"unmatched_ratio", opt(r.unmatched_ratio)},
                   {"degenerate", r.degenerate}});
  }
  return out;
}

void write(const std::filesystem::path& path, const std::string& text,
           std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write " + path.string());
  out << text;
  if (!out) throw ReportError("write failed for " + path.string());
  written.push_back(path);
}

const std::vector<std::string> kColumnColors{"#ffffff", "#4c72b0", "#c44e52"};
const std::vector<std::string> kGroupColors{"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

std::string bars_svg(const std::vector<BucketRow>& rows, Protocol protocol) {
  std::vector<svg::BarGroup> groups;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    if (r.group.protocol != protocol) continue;
    groups.push_back({r.group.label(), {r.na.value_or(nan), r.matched.value_or(nan), r.unmatched.value_or(nan)}});
  }
  return svg::bar_chart(to_string(protocol) + " accuracy by bucket", {"No MFAI", "Matched", "Unmatched"},
                        kColumnColors, groups);
}

std::string lines_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& x_label) {
  std::vector<svg::Series> series;
  std::map<Group, std::size_t> color;
  for (const auto& c : curves) {
    if (c.column == Column::Unmatched) continue;
    const std::size_t idx = color.emplace(c.group, color.size()).first->second;
    svg::Series s;
    s.name = c.group.label() + " " + to_string(c.column);
    s.color = kGroupColors[idx % kGroupColors.size()];
    s.dash = c.column == Column::Matched ? "6,4" : "";
    s.x.assign(c.x.begin(), c.x.end());
    s.y = c.y;
    series.push_back(std::move(s));
  }
  return svg::line_chart(title, x_label, series);
}

}  // namespace

std::string bucket_table_csv(const std::vector<BucketRow>& rows) {
  std::string out = "protocol,group,na,matched,unmatched,partial\n";
  for (const auto& r : rows) {
    out += to_string(r.group.protocol) + "," + r.group.label() + "," + fmt(r.na) + "," + fmt(r.matched) +
           "," + fmt(r.unmatched) + "," + (r.partial ? "true" : "false") + "\n";
  }
  return out;
}

std::string curves_csv(const std::vector<Curve>& curves) {
  std::string out = "group,condition,x,accuracy\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out += c.group.label() + "," + to_string(c.column) + "," + std::to_string(c.x[i]) + "," + fmt(c.y[i]) + "\n";
    }
  }
  return out;
}

json report_to_json(const Report& r) {
  return {{"buckets", buckets_json(r.buckets)},
          {"distance_curves", curves_json(r.distance)},
          {"local_idx_curves", curves_json(r.local_idx)},
          {"weakest_link", weakest_json(r.weakest)},
          {"variance", variance_json(r.variance)},
          {"length_signal", lengths_json(r.lengths)},
          {"aggregation", "macro over cells"}};
}

std::vector<std::filesystem::path> emit(const Report& report, const std::filesystem::path& out_dir,
                                        const std::set<std::string>& views) {
  if (report.cells.empty()) throw ReportError("empty judgment set; nothing to report");
  for (const auto& v : views) {
    if (!kAllViews.count(v)) throw ReportError("unknown report view: " + v);
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ReportError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  if (views.count("bucket")) {
    write(out_dir / "bucket_table.csv", bucket_table_csv(report.buckets), written);
    write(out_dir / "bucket_table.json", buckets_json(report.buckets).dump(2) + "\n", written);
    write(out_dir / "spread_buckets.svg", bars_svg(report.buckets, Protocol::Spread), written);
    write(out_dir / "cross_buckets.svg", bars_svg(report.buckets, Protocol::Cross), written);
  }
  if (views.count("curves")) {
    write(out_dir / "distance_curves.csv", curves_csv(report.distance), written);
    write(out_dir / "local_idx_curves.csv", curves_csv(report.local_idx), written);
    write(out_dir / "curves.json",
          json{{"distance", curves_json(report.distance)}, {"local_idx", curves_json(report.local_idx)}}.dump(2) + "\n",
          written);
    write(out_dir / "distance_curves.svg",
          lines_svg(report.distance, "Spread accuracy by inter-gold distance", "distance"), written);
    write(out_dir / "local_idx_curves.svg",
          lines_svg(report.local_idx, "Cross accuracy by local index", "local index"), written);
  }
  if (views.count("weakest-link")) {
    std::string csv = "pair,cross_accuracy,spread_first,spread_second,min_spread,deviation,binding,violation,"
                      "recognition_bound,bound_deviation\n";
    for (const auto& r : report.weakest.rows) {
      csv += bucket_name(r.first) + "+" + bucket_name(r.second) + "," + fmt(r.cross_accuracy) + "," +
             fmt(r.spread_first) + "," + fmt(r.spread_second) + "," + fmt(r.min_spread) + "," +
             fmt(r.deviation) + "," + bucket_name(r.binding) + "," + (r.violation ? "true" : "false") + "," +
             fmt(r.recognition_bound) + "," + fmt(r.bound_deviation) + "\n";
    }
    write(out_dir / "weakest_link.csv", csv, written);
    write(out_dir / "weakest_link.json", weakest_json(report.weakest).dump(2) + "\n", written);
  }
  if (views.count("variance")) {
    std::string csv = "bucket,condition,cells,range,stddev\n";
    for (const auto& r : report.variance) {
      csv += bucket_name(r.bucket) + "," + to_string(r.column) + "," + std::to_string(r.cells) + "," +
             fmt(r.range) + "," + fmt(r.stddev) + "\n";
    }
    write(out_dir / "variance.csv", csv, written);
    write(out_dir / "variance.json", variance_json(report.variance).dump(2) + "\n", written);
  }
  if (views.count("length")) {
    std::string csv = "protocol,group,na_mean,matched_mean,unmatched_mean,matched_ratio,unmatched_ratio,degenerate\n";
    for (const auto& r : report.lengths) {
      csv += to_string(r.group.protocol) + "," + r.group.label() + "," + fmt(r.na_mean) + "," +
             fmt(r.matched_mean) + "," + fmt(r.unmatched_mean) + "," + fmt(r.matched_ratio) + "," +
             fmt(r.unmatched_ratio) + "," + (r.degenerate ? "true" : "false") + "\n";
    }
    write(out_dir / "length_signal.csv", csv, written);
    write(out_dir / "length_signal.json", lengths_json(report.lengths).dump(2) + "\n", written);
  }
  return written;
}

}  // namespace posbias
