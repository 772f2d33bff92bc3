#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "edgebandit/sim.hpp"

namespace edgebandit {

struct ParsedMetrics {
  std::vector<std::string> columns;
  std::vector<MetricsRow> rows;
  std::vector<std::int64_t> thresholds;
};

ParsedMetrics read_metrics(std::istream& in);
ParsedMetrics read_metrics_file(const std::filesystem::path& path);

// Per-arm summary as an aligned text table: final reward, CTR, regret totals
// and slope over the second half, discoverable-corpus counts, mean latency.
void print_report(std::ostream& out, const ParsedMetrics& metrics);

}  // namespace edgebandit
