#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "posbias/judge.hpp"

namespace posbias {

// Row label of a bucket (Spread) or bucket pair (Cross).
struct Group {
  Protocol protocol = Protocol::Spread;
  BucketId first = 0;
  BucketId second = -1;  // Cross only

  std::string label() const;  // "Middle", "Beginning+Tail"
  friend auto operator<=>(const Group&, const Group&) = default;
};

Group group_of(const Placement& p);
int x_of(const Placement& p);  // distance (Spread) or local index (Cross)

// Condition column in the aggregated views; unmatched variants are merged.
enum class Column { NA, Matched, Unmatched };
std::string to_string(Column c);
Column column_of(const Condition& c);

struct Curve {
  Group group;
  Column column = Column::NA;
  std::vector<int> x;
  std::vector<double> y;  // unmatched points average their variants
};

std::vector<Curve> distance_curves(const CellTable& table);
std::vector<Curve> local_idx_curves(const CellTable& table);

struct BucketRow {
  Group group;
  std::optional<double> na;
  std::optional<double> matched;
  std::optional<double> unmatched;
  bool partial = false;  // fewer cells than the geometry implies
};

// Each entry is the macro mean of the matching curve's points.
std::vector<BucketRow> bucket_table(const CellTable& table, const BucketSpec& spec);

struct WeakestLinkRow {
  BucketId first = 0;
  BucketId second = 0;
  double cross_accuracy = 0.0;
  double spread_first = 0.0;
  double spread_second = 0.0;
  double min_spread = 0.0;
  double deviation = 0.0;  // cross - min_spread
  BucketId binding = 0;    // bucket with the lower spread accuracy
  bool violation = false;  // deviation > margin
  // sqrt(spread accuracy) of the binding bucket: a per-document recognition
  // estimate when both hops are recognised independently.
  double recognition_bound = 0.0;
  double bound_deviation = 0.0;  // cross - recognition_bound
};

struct WeakestLinkReport {
  double margin = 0.05;
  std::vector<WeakestLinkRow> rows;
  std::vector<std::string> notices;
};

// Uses the NA cells of both protocols.
WeakestLinkReport weakest_link(const CellTable& table, double margin = 0.05);

struct VarianceRow {
  BucketId bucket = 0;
  Column column = Column::NA;
  std::size_t cells = 0;
  double range = 0.0;   // max - min over distance cells
  double stddev = 0.0;  // population standard deviation
};

std::vector<VarianceRow> variance_check(const CellTable& table);

struct LengthRow {
  Group group;
  double na_mean = 0.0;
  std::optional<double> matched_mean;
  std::optional<double> unmatched_mean;
  std::optional<double> matched_ratio;
  std::optional<double> unmatched_ratio;
  bool degenerate = false;  // NA mean is zero; ratios omitted
};

std::vector<LengthRow> length_signal(const CellTable& table);

struct Report {
  BucketSpec spec;
  CellTable cells;
  std::vector<BucketRow> buckets;
  std::vector<Curve> distance;
  std::vector<Curve> local_idx;
  WeakestLinkReport weakest;
  std::vector<VarianceRow> variance;
  std::vector<LengthRow> lengths;
};

Report build_report(const CellTable& table, const BucketSpec& spec, double margin = 0.05);

inline const std::set<std::string> kAllViews{"bucket", "curves", "weakest-link", "variance", "length"};

// Writes CSV + JSON (+ SVG for bucket and curves). Throws ReportError on an
// empty report before writing anything.
std::vector<std::filesystem::path> emit(const Report& report, const std::filesystem::path& out_dir,
                                        const std::set<std::string>& views = kAllViews);

nlohmann::json report_to_json(const Report& report);
std::string bucket_table_csv(const std::vector<BucketRow>& rows);
std::string curves_csv(const std::vector<Curve>& curves);

}  // namespace posbias
