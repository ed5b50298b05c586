#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gsadvisor {

enum class Direction { kHigherBetter, kLowerBetter };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

// Ordered metric set. Stored and predicted quality vectors are oriented so
// that higher is better for every metric.
class MetricSchema {
 public:
  MetricSchema() = default;
  MetricSchema(std::vector<std::string> names, std::vector<Direction> directions);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Direction>& directions() const { return directions_; }

  // +1 for higher-better, -1 for lower-better.
  double sign(std::size_t m) const { return directions_[m] == Direction::kLowerBetter ? -1.0 : 1.0; }
  std::ptrdiff_t index_of(std::string_view name) const;

  // Parses "name:higher,name:lower,...".
  static MetricSchema parse(std::string_view spec);
  std::string to_spec() const;

  bool operator==(const MetricSchema&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Direction> directions_;
};

}  // namespace gsadvisor
