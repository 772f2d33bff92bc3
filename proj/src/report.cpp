#include "edgebandit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "edgebandit/io.hpp"

namespace edgebandit {

ParsedMetrics read_metrics(std::istream& in) {
  ParsedMetrics out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty metrics file");
  ++lineno;
  {
    std::istringstream header(line);
    std::string col;
    while (std::getline(header, col, '\t')) out.columns.push_back(col);
  }
  std::size_t first_disc = out.columns.size();
  for (std::size_t i = 0; i < out.columns.size(); ++i) {
    if (out.columns[i].rfind("disc_ge_", 0) == 0) {
      if (first_disc == out.columns.size()) first_disc = i;
      out.thresholds.push_back(parse_int(out.columns[i].substr(8), 1));
    }
  }
  const std::size_t expected = out.columns.size();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    std::string tok;
    while (std::getline(row, tok, '\t')) f.push_back(tok);
    if (f.size() != expected) throw ParseError(lineno, "column count mismatch");
    MetricsRow r;
    r.step = parse_int(f[0], lineno);
    r.arm = f[1];
    r.impressions = static_cast<std::uint64_t>(parse_int(f[2], lineno));
    r.explore_impressions = static_cast<std::uint64_t>(parse_int(f[3], lineno));
    r.exploit_impressions = static_cast<std::uint64_t>(parse_int(f[4], lineno));
    r.cum_reward = parse_double(f[5], lineno);
    r.explore_reward = parse_double(f[6], lineno);
    r.exploit_reward = parse_double(f[7], lineno);
    r.cum_policy_regret = parse_double(f[8], lineno);
    r.cum_coverage_regret = parse_double(f[9], lineno);
    r.ctr = parse_double(f[10], lineno);
    r.infinite_ucb_count = parse_int(f[11], lineno);
    for (std::size_t i = 0; i < out.thresholds.size(); ++i) {
      r.discoverable.push_back(parse_int(f[first_disc + i], lineno));
    }
    r.mean_policy_latency = parse_double(f.back(), lineno);
    out.rows.push_back(std::move(r));
  }
  return out;
}

ParsedMetrics read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_metrics(in);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells) {
  if (cells.empty()) return;
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i] << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    out << '\n';
  }
}

}  // namespace

void print_report(std::ostream& out, const ParsedMetrics& metrics) {
  std::map<std::string, std::vector<const MetricsRow*>> by_arm;
  std::vector<std::string> arm_order;
  for (const auto& r : metrics.rows) {
    auto [it, inserted] = by_arm.try_emplace(r.arm);
    if (inserted) arm_order.push_back(r.arm);
    it->second.push_back(&r);
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"arm",         "steps",      "impressions", "cum_reward",
                                     "reward/imp",  "ctr",        "policy_regret",
                                     "regret_slope", "coverage_regret"};
  for (std::int64_t th : metrics.thresholds) header.push_back("disc_ge_" + std::to_string(th));
  header.push_back("mean_latency");
  cells.push_back(header);

  for (const auto& arm : arm_order) {
    const auto& rows = by_arm[arm];
    const MetricsRow* last = rows.back();
    // Regret slope over the second half of the series.
    const MetricsRow* mid = rows[rows.size() / 2];
    double slope = 0.0;
    if (last->step > mid->step) {
      slope = (last->cum_policy_regret - mid->cum_policy_regret) /
              static_cast<double>(last->step - mid->step);
    }
    std::vector<std::string> row;
    row.push_back(arm);
    row.push_back(std::to_string(last->step));
    row.push_back(std::to_string(last->impressions));
    row.push_back(num(last->cum_reward));
    row.push_back(num(last->impressions == 0
                          ? 0.0
                          : last->cum_reward / static_cast<double>(last->impressions)));
    row.push_back(num(last->ctr));
    row.push_back(num(last->cum_policy_regret));
    row.push_back(num(slope));
    row.push_back(num(last->cum_coverage_regret));
    for (std::int64_t v : last->discoverable) row.push_back(std::to_string(v));
    row.push_back(num(last->mean_policy_latency));
    cells.push_back(std::move(row));
  }
  print_table(out, cells);
}

}  // namespace edgebandit
