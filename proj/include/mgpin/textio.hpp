#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mgpin::textio {

/// One `[name]` block of a sectioned text file. Lines with `=` are key/value
/// pairs (several may share a line, separated by commas); all other non-empty
/// lines are kept as whitespace-split rows. `#` starts a comment.
struct Section {
  std::string name;
  std::map<std::string, std::string> values;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;  // source line of each row, for diagnostics

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
};

struct Document {
  std::filesystem::path source;
  std::vector<Section> sections;

  const Section* find(std::string_view name) const;
  const Section& require(std::string_view name) const;
};

Document parse(std::string_view text, const std::filesystem::path& source = {});
Document parse_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

double to_double(std::string_view s);
int to_int(std::string_view s);

/// Shortest round-trip representation, locale independent.
std::string format_double(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace mgpin::textio
