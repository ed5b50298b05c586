#include "gsadvisor/metric_schema.hpp"

#include <set>

#include "gsadvisor/error.hpp"

namespace gsadvisor {

std::string_view to_string(Direction d) { return d == Direction::kLowerBetter ? "lower_better" : "higher_better"; }

Direction parse_direction(std::string_view s) {
  if (s == "higher_better" || s == "higher") return Direction::kHigherBetter;
  if (s == "lower_better" || s == "lower") return Direction::kLowerBetter;
  throw Error(ErrorCode::kFormatError, "unknown metric direction '" + std::string(s) + "'");
}

MetricSchema::MetricSchema(std::vector<std::string> names, std::vector<Direction> directions)
    : names_(std::move(names)), directions_(std::move(directions)) {
  if (names_.empty()) throw Error(ErrorCode::kSchemaMismatch, "metric schema needs at least one metric");
  if (names_.size() != directions_.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "metric names and directions differ in length");
  }
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw Error(ErrorCode::kSchemaMismatch, "metric names must be unique");
}

std::ptrdiff_t MetricSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

MetricSchema MetricSchema::parse(std::string_view spec) {
  std::vector<std::string> names;
  std::vector<Direction> directions;
  while (!spec.empty()) {
    const auto comma = spec.find(',');
    auto item = spec.substr(0, comma);
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      names.emplace_back(item);
      directions.push_back(Direction::kHigherBetter);
    } else {
      names.emplace_back(item.substr(0, colon));
      directions.push_back(parse_direction(item.substr(colon + 1)));
    }
  }
  return MetricSchema(std::move(names), std::move(directions));
}

std::string MetricSchema::to_spec() const {
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (i) out += ',';
    out += names_[i];
    out += directions_[i] == Direction::kLowerBetter ? ":lower" : ":higher";
  }
  return out;
}

}  // namespace gsadvisor
