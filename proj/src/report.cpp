#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/scenario.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

namespace {

constexpr double kOmegaBand = 1e-4;
constexpr double kVoltageBand = 1e-3;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing artifact " + path.string());
  const std::string text = textio::read_file(path);
  Table t;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    auto cols = textio::split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cols);
    } else {
      t.rows.push_back(std::move(cols));
    }
  }
  if (t.header.empty()) throw ParseError(path.string() + " has no header");
  return t;
}

std::map<std::string, std::string> parse_payload(const std::string& payload) {
  std::map<std::string, std::string> kv;
  for (const auto& item : textio::split(payload, ';')) {
    const auto eq = item.find('=');
    if (eq != std::string::npos) kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

}  // namespace

std::string report(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "run.txt")) throw Error("missing artifact " + (dir / "run.txt").string());
  const textio::Document run = textio::parse_file(dir / "run.txt");
  const textio::Section& meta = run.require("run");
  const double omega_ref = meta.get_double("omega_ref");
  const double V_ref = meta.get_double("V_ref");
  const double rho_star = meta.get_double("rho_star");
  const int m = meta.get_int("dg_count");

  const Table ts = read_csv(dir / "timeseries.csv");
  const Table ev = read_csv(dir / "events.csv");
  if (static_cast<int>(ts.header.size()) != 1 + 5 * m) throw ParseError("timeseries.csv does not match dg_count");
  if (ts.rows.empty()) throw ParseError("timeseries.csv has no samples");

  const long n = static_cast<long>(ts.rows.size());
  std::vector<double> t(n), dev_w(n), dev_v(n);
  std::vector<double> final_mpP(m);
  for (long r = 0; r < n; ++r) {
    const auto& row = ts.rows[r];
    t[r] = textio::to_double(row[0]);
    double dw = 0.0, dv = 0.0;
    for (int k = 0; k < m; ++k) {
      dw = std::max(dw, std::abs(textio::to_double(row[1 + 5 * k]) - omega_ref));
      dv = std::max(dv, std::abs(textio::to_double(row[2 + 5 * k]) - V_ref));
      if (r == n - 1) final_mpP[k] = textio::to_double(row[5 + 5 * k]);
    }
    dev_w[r] = dw;
    dev_v[r] = dv;
  }

  std::string s;
  s += fmt::format("samples = {}, t_end = {:.6g} s\n", n, t.back());
  s += fmt::format("max |omega - omega_ref| = {:.6e} p.u.\n", *std::max_element(dev_w.begin(), dev_w.end()));
  s += fmt::format("max |V - V_ref| = {:.6e} p.u.\n", *std::max_element(dev_v.begin(), dev_v.end()));
  s += fmt::format("final max |omega - omega_ref| = {:.6e} p.u.\n", dev_w.back());
  s += fmt::format("final max |V - V_ref| = {:.6e} p.u.\n", dev_v.back());
  const auto [lo, hi] = std::minmax_element(final_mpP.begin(), final_mpP.end());
  double mean = 0.0;
  for (double v : final_mpP) mean += v;
  mean /= m;
  s += fmt::format("final mpP spread = {:.6e} ({:.4f}% of mean {:.6e})\n", *hi - *lo,
                   mean != 0.0 ? 100.0 * (*hi - *lo) / std::abs(mean) : 0.0, mean);

  // Settle time of each event: first instant after which omega stays within
  // kOmegaBand and V within kVoltageBand until the next event.
  std::vector<double> ev_t;
  for (const auto& row : ev.rows) ev_t.push_back(textio::to_double(row.at(0)));
  bool any_cyber = false;
  for (std::size_t i = 0; i < ev.rows.size(); ++i) {
    const auto& row = ev.rows[i];
    const std::string& kind = row.at(1);
    const double t0 = ev_t[i];
    const double t1 = i + 1 < ev_t.size() ? ev_t[i + 1] : t.back() + 1.0;
    double last_out = -1.0, peak_w = 0.0, peak_v = 0.0;
    bool window_end_inside = true;
    for (long r = 0; r < n; ++r) {
      if (t[r] < t0 || t[r] >= t1) continue;
      peak_w = std::max(peak_w, dev_w[r]);
      peak_v = std::max(peak_v, dev_v[r]);
      const bool out = dev_w[r] > kOmegaBand || dev_v[r] > kVoltageBand;
      if (out) last_out = t[r];
      window_end_inside = !out;
    }
    std::string settle;
    if (last_out < 0.0) {
      settle = "0 s";
    } else if (!window_end_inside) {
      settle = "not settled";
    } else {
      settle = fmt::format("{:.4f} s", last_out - t0);
    }
    const std::string payload = row.size() > 2 ? row[2] : "";
    s += fmt::format("event t={} {} [{}]: settle {}, peak |domega| {:.3e}, peak |dV| {:.3e}\n", row[0], kind, payload,
                     settle, peak_w, peak_v);
    if (kind == "cut_edges" || kind == "repin") {
      any_cyber = true;
      const auto kv = parse_payload(payload);
      const auto get = [&](const char* key) {
        auto it = kv.find(key);
        return it == kv.end() ? std::string("?") : it->second;
      };
      if (kind == "cut_edges")
        s += fmt::format("  rate {} -> {} after cut (rho* = {})\n", get("rate_before"), get("rate_cut"),
                         textio::format_double(rho_star));
      s += fmt::format("  rate after decision {} (repinned: {})\n", get("rate_after"), get("repinned"));
      s += fmt::format("  pins before: {}\n  pins after: {}\n", get("pins_before"), get("pins_after"));
    }
  }
  if (!any_cyber) s += "no cyber events\n";
  return s;
}

}  // namespace mgpin
