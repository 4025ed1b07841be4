#include "mgpin/textio.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mgpin/error.hpp"

namespace mgpin::textio {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

static std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_double(std::string_view s) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf" || t == "infinity") return HUGE_VAL;
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("not a number: '" + t + "'");
  return v;
}

int to_int(std::string_view s) {
  const std::string t = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ParseError("not an integer: '" + t + "'");
  return v;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

const std::string& Section::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ParseError("[" + name + "] missing key '" + key + "'");
  return it->second;
}

double Section::get_double(const std::string& key) const { return to_double(get(key)); }

double Section::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Section::get_int(const std::string& key) const { return to_int(get(key)); }

int Section::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::string Section::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

const Section* Document::find(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const Section& Document::require(std::string_view name) const {
  const Section* s = find(name);
  if (s == nullptr) throw ParseError(source.string() + ": missing section [" + std::string(name) + "]");
  return *s;
}

Document parse(std::string_view text, const std::filesystem::path& source) {
  Document doc;
  doc.source = source;
  Section* current = nullptr;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(source.string() + ":" + std::to_string(line_no) + ": bad section header");
      doc.sections.push_back(Section{trim(std::string_view(line).substr(1, line.size() - 2)), {}, {}, {}});
      current = &doc.sections.back();
      continue;
    }
    if (current == nullptr)
      throw ParseError(source.string() + ":" + std::to_string(line_no) + ": content before first section");
    if (line.find('=') != std::string::npos) {
      for (const auto& item : split(line, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
          throw ParseError(source.string() + ":" + std::to_string(line_no) + ": expected key = value");
        current->values[trim(std::string_view(item).substr(0, eq))] =
            trim(std::string_view(item).substr(eq + 1));
      }
    } else {
      current->rows.push_back(split_ws(line));
      current->row_lines.push_back(line_no);
    }
  }
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Document parse_file(const std::filesystem::path& path) { return parse(read_file(path), path); }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mgpin::textio
