#include "edgebandit/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

namespace edgebandit {

std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(const std::string& tok, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(line, "expected a number, got '" + tok + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& tok, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(line, "expected an integer, got '" + tok + "'");
  }
  return static_cast<std::int64_t>(v);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

AtomicFile::AtomicFile(const std::filesystem::path& path)
    : path_(path), tmp_(path.string() + ".tmp") {
  out_ = std::make_unique<std::ofstream>(tmp_);
  if (!*out_) {
    throw std::runtime_error("cannot open " + tmp_.string() + " for writing");
  }
}

AtomicFile::~AtomicFile() {
  if (!committed_) {
    out_.reset();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

std::ostream& AtomicFile::stream() { return *out_; }

void AtomicFile::commit() {
  out_->flush();
  if (!*out_) throw std::runtime_error("write failed for " + tmp_.string());
  out_.reset();
  std::filesystem::rename(tmp_, path_);
  committed_ = true;
}

void write_table(std::ostream& out, const IdTable& table) {
  out << "v1 " << table.ids.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i];
    for (double v : table.rows[i]) out << ' ' << fmt_double(v);
    out << '\n';
  }
}

void write_table_file(const std::filesystem::path& path, const IdTable& table) {
  AtomicFile f(path);
  write_table(f.stream(), table);
  f.commit();
}

IdTable read_table(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty table file");
  ++lineno;
  auto toks = split_ws(line);
  if (toks.size() != 3 || toks[0] != "v1") {
    throw ParseError(lineno, "expected header 'v1 <n> <d>'");
  }
  const auto n = parse_int(toks[1], lineno);
  const auto d = parse_int(toks[2], lineno);
  if (n < 0 || d <= 0) throw ParseError(lineno, "invalid table dimensions");

  IdTable table;
  table.ids.reserve(static_cast<std::size_t>(n));
  table.rows.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(lineno + 1, "truncated table: expected " + std::to_string(n) +
                                       " rows, got " + std::to_string(i));
    }
    ++lineno;
    auto row = split_ws(line);
    if (row.size() != static_cast<std::size_t>(d) + 1) {
      throw ParseError(lineno, "expected id plus " + std::to_string(d) + " values");
    }
    table.ids.push_back(parse_int(row[0], lineno));
    std::vector<double> vals(static_cast<std::size_t>(d));
    for (std::int64_t j = 0; j < d; ++j) {
      vals[static_cast<std::size_t>(j)] = parse_double(row[static_cast<std::size_t>(j) + 1], lineno);
    }
    table.rows.push_back(std::move(vals));
  }
  return table;
}

IdTable read_table_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_table(in);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

double normalize(std::vector<double>& v) {
  const double n = l2_norm(v);
  if (!(n > 1e-30)) throw std::runtime_error("cannot normalize a (near-)zero vector");
  for (double& x : v) x /= n;
  return n;
}

std::vector<double> normalized(std::vector<double> v) {
  normalize(v);
  return v;
}

}  // namespace edgebandit
