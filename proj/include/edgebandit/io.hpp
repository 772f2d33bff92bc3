#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgebandit {

// Thrown on malformed input files; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Shortest decimal that round-trips the double exactly.
std::string fmt_double(double v);

double parse_double(const std::string& tok, std::size_t line);
std::int64_t parse_int(const std::string& tok, std::size_t line);

std::vector<std::string> split_ws(const std::string& line);

// Writes to <path>.tmp and renames into place on commit(); the temp file is
// removed if the writer is destroyed without committing, so failed stages
// leave no partial outputs behind.
class AtomicFile {
 public:
  explicit AtomicFile(const std::filesystem::path& path);
  ~AtomicFile();
  std::ostream& stream();
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::unique_ptr<std::ofstream> out_;
  bool committed_ = false;
};

// Embedding-table file: header "v1 <n> <d>", then "id v_1 ... v_d" per row.
// Shared by exported user/item tables and cluster centroids.
struct IdTable {
  std::vector<std::int64_t> ids;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
};

void write_table(std::ostream& out, const IdTable& table);
void write_table_file(const std::filesystem::path& path, const IdTable& table);
IdTable read_table(std::istream& in);
IdTable read_table_file(const std::filesystem::path& path);

// Dense vector helpers used across the numeric modules.
double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);
// Returns the norm before scaling; throws on (near-)zero input.
double normalize(std::vector<double>& v);
std::vector<double> normalized(std::vector<double> v);

}  // namespace edgebandit
