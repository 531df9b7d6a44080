#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "dpbayes/errors.hpp"
#include "dpbayes/harness.hpp"

namespace dpb {
namespace {

struct Series {
  const char* name;
  const char* color;
  const char* dash;
  double BoundReport::*field;
};

// gap is derived, handled separately
constexpr Series kSeries[] = {
    {"train error", "#1f77b4", "", &BoundReport::train_err01},
    {"test error", "#ff7f0e", "", &BoundReport::test_err01},
    {"Lever bound", "#d62728", "6,3", &BoundReport::risk_bound_lever},
    {"DP PAC-Bayes bound", "#2ca02c", "6,3", &BoundReport::risk_bound_dp},
};

struct Point {
  double tau = 0.0;
  double values[5] = {};  // train, test, lever, dp, gap
  int counts[5] = {};
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Final row per (seed, tau1, tau2): the one with the largest epoch.
std::vector<BoundReport> final_rows(const std::vector<BoundReport>& reports) {
  std::map<std::tuple<std::uint64_t, double, double>, BoundReport> last;
  for (const auto& r : reports) {
    const auto key = std::make_tuple(r.seed, r.tau1, r.tau2);
    auto it = last.find(key);
    if (it == last.end() || r.epoch >= it->second.epoch) last[key] = r;
  }
  std::vector<BoundReport> out;
  for (auto& [k, r] : last) out.push_back(r);
  return out;
}

std::vector<Point> aggregate(const std::vector<BoundReport>& reports) {
  std::map<double, Point> by_tau;
  for (const auto& r : final_rows(reports)) {
    if (r.failed() || !(r.tau2 > 0.0)) continue;
    Point& p = by_tau[r.tau2];
    p.tau = r.tau2;
    for (int s = 0; s < 4; ++s) {
      const double v = r.*(kSeries[s].field);
      if (!std::isnan(v)) {
        p.values[s] += v;
        ++p.counts[s];
      }
    }
    p.values[4] += r.test_err01 - r.train_err01;
    ++p.counts[4];
  }
  std::vector<Point> out;
  for (auto& [tau, p] : by_tau) {
    for (int s = 0; s < 5; ++s) {
      if (p.counts[s] > 0) p.values[s] /= p.counts[s];
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<BoundReport>& reports, const std::string& title,
                       const PlotSpec& spec) {
  if (reports.empty()) throw DomainError("cannot plot an empty report set");
  const auto points = aggregate(reports);

  const double left = 60, right = 170, top = 40, bottom = 50;
  const double W = spec.width, H = spec.height;
  const double pw = W - left - right, ph = H - top - bottom;

  double lo = 0.0, hi = 1.0;
  if (!points.empty()) {
    lo = std::floor(std::log10(points.front().tau));
    hi = std::ceil(std::log10(points.back().tau));
    if (hi <= lo) hi = lo + 1.0;
  }
  const auto X = [&](double tau) { return left + (std::log10(tau) - lo) / (hi - lo) * pw; };
  const auto Y = [&](double v) { return top + (1.0 - std::clamp(v, 0.0, 1.0)) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
       "\" viewBox=\"0 0 " + fmt(W) + " " + fmt(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"24\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" +
       fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(Y(v)) + "\" x2=\"" + fmt(left + pw) +
         "\" y2=\"" + fmt(Y(v)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(Y(v) + 4) + "\" text-anchor=\"end\">" +
         fmt(v).substr(0, 4) + "</text>\n";
  }
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
    const double x = X(std::pow(10.0, e));
    s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
         fmt(top + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">1e" +
         std::to_string(e) + "</text>\n";
  }
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(H - 10) +
       "\" text-anchor=\"middle\">tau (log scale)</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(top + ph / 2) + "\" transform=\"rotate(-90 16 " +
       fmt(top + ph / 2) + ")\" text-anchor=\"middle\">0-1 error</text>\n";

  struct Drawn {
    const char* name;
    const char* color;
    const char* dash;
    int index;
  };
  const Drawn drawn[] = {
      {kSeries[0].name, kSeries[0].color, kSeries[0].dash, 0},
      {kSeries[1].name, kSeries[1].color, kSeries[1].dash, 1},
      {"generalization gap", "#9467bd", "2,2", 4},
      {kSeries[2].name, kSeries[2].color, kSeries[2].dash, 2},
      {kSeries[3].name, kSeries[3].color, kSeries[3].dash, 3},
  };
  double legend_y = top + 10;
  for (const auto& d : drawn) {
    std::string pts;
    for (const auto& p : points) {
      if (p.counts[d.index] == 0) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt(X(p.tau)) + "," + fmt(Y(p.values[d.index]));
    }
    if (pts.empty()) continue;
    std::string style = "fill=\"none\" stroke=\"" + std::string(d.color) + "\" stroke-width=\"2\"";
    if (*d.dash) style += " stroke-dasharray=\"" + std::string(d.dash) + "\"";
    s += "<polyline points=\"" + pts + "\" " + style + "/>\n";
    for (const auto& p : points) {
      if (p.counts[d.index] == 0) continue;
      s += "<circle cx=\"" + fmt(X(p.tau)) + "\" cy=\"" + fmt(Y(p.values[d.index])) +
           "\" r=\"2.5\" fill=\"" + d.color + "\"/>\n";
    }
    const double lx = left + pw + 12;
    s += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(legend_y) + "\" x2=\"" + fmt(lx + 24) +
         "\" y2=\"" + fmt(legend_y) + "\" " + style + "/>\n";
    s += "<text x=\"" + fmt(lx + 30) + "\" y=\"" + fmt(legend_y + 4) + "\">" + d.name + "</text>\n";
    legend_y += 18;
  }
  s += "<text x=\"" + fmt(left + pw + 12) + "\" y=\"" + fmt(legend_y + 10) + "\">delta = " +
       fmt(spec.delta) + "</text>\n";
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_plots(const std::vector<BoundReport>& reports,
                                              const std::filesystem::path& out_dir,
                                              const PlotSpec& spec) {
  if (reports.empty()) throw DomainError("cannot plot an empty report set");
  std::filesystem::create_directories(out_dir);

  std::map<std::string, std::vector<BoundReport>> groups;
  for (const auto& r : reports) {
    std::string key = r.procedure == Procedure::OneStage
                          ? "one_stage_" + to_string(r.label_mode)
                          : "two_stage_" + to_string(r.label_mode);
    groups[key].push_back(r);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [key, rows] : groups) {
    const auto& first = rows.front();
    std::string title = first.dataset + ", " + to_string(first.procedure) + ", " +
                        to_string(first.label_mode) + " labels";
    const auto path = out_dir / ("fig_" + key + ".svg");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
    out << render_svg(rows, title, spec);
    written.push_back(path);
  }
  return written;
}

}  // namespace dpb
