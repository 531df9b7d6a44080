#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpbayes/errors.hpp"
#include "dpbayes/harness.hpp"

namespace dpb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void copy_ids(const RawRun& raw, BoundReport& r) {
  r.seed = raw.seed;
  r.dataset = raw.dataset;
  r.label_mode = raw.label_mode;
  r.procedure = raw.procedure;
  r.tau1 = raw.tau1;
  r.tau2 = raw.tau2;
  r.gamma = raw.gamma;
  r.epoch = raw.epoch;
  r.runtime_s = raw.runtime_s;
}

void apply_bounds(BoundReport& r, const AssemblyParams& p) {
  const double q = std::clamp(r.train_err01, 0.0, 1.0);
  r.rhs_lever = lever_bound(r.tau2, p.m, p.delta, p.lever_variant);
  r.risk_bound_lever = kl_inverse(q, r.rhs_lever);
  if (r.has_dp()) {
    const double beta =
        p.optimize_beta ? optimize_beta(r.kl_upper, p.m, p.delta, r.epsilon).beta : p.delta / 2.0;
    r.rhs_dp = dp_pacbayes_rhs(r.kl_upper, BoundParams{p.m, p.delta, beta, r.epsilon});
    r.risk_bound_dp = kl_inverse(q, r.rhs_dp);
  } else {
    r.rhs_dp = kNaN;
    r.risk_bound_dp = kNaN;
  }
}

}  // namespace

bool BoundReport::failed() const { return std::isnan(train_err01) || std::isnan(test_err01); }

bool BoundReport::has_dp() const { return !std::isnan(kl_upper) && !std::isnan(epsilon); }

BoundReport assemble_report(const RawRun& raw, const AssemblyParams& params) {
  if (raw.m != params.m) {
    throw ConfigError("run used m=" + std::to_string(raw.m) + " but bounds were requested for m=" +
                      std::to_string(params.m));
  }
  if (raw.kl.has_value() != raw.privacy.has_value()) {
    throw ConfigError("private-prior bound needs both a KL estimate and a privacy budget");
  }
  BoundReport r;
  copy_ids(raw, r);
  r.train_err01 = raw.train_err01;
  r.test_err01 = raw.test_err01;
  r.train_xent = raw.train_xent;
  if (raw.kl) {
    r.kl_upper_raw = raw.kl->kl_upper_raw;
    r.kl_upper = raw.kl->kl_upper;
    r.epsilon = raw.privacy->epsilon;
  } else {
    r.kl_upper_raw = kNaN;
    r.kl_upper = kNaN;
    r.epsilon = kNaN;
  }
  apply_bounds(r, params);
  return r;
}

void recompute_bounds(std::vector<BoundReport>& reports, const AssemblyParams& params) {
  for (auto& r : reports) {
    if (r.failed()) continue;
    apply_bounds(r, params);
  }
}

BoundReport failed_report(const RawRun& ids) {
  BoundReport r;
  copy_ids(ids, r);
  for (double* f : {&r.train_err01, &r.test_err01, &r.train_xent, &r.kl_upper_raw, &r.kl_upper,
                    &r.epsilon, &r.rhs_dp, &r.rhs_lever, &r.risk_bound_dp, &r.risk_bound_lever}) {
    *f = kNaN;
  }
  return r;
}

// --- CSV -------------------------------------------------------------------

namespace {

void put_real(std::string& out, double v) {
  if (std::isnan(v)) return;  // empty cell: not applicable
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

double parse_real(const std::string& cell, std::size_t line) {
  if (cell.empty()) return kNaN;
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw DataError(DataErrorKind::Format,
                    "report CSV line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& cell, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw DataError(DataErrorKind::Format,
                    "report CSV line " + std::to_string(line) + ": bad integer '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

std::string reports_to_csv(const std::vector<BoundReport>& reports) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const auto& r : reports) {
    out += std::to_string(r.seed);
    out += ',' + r.dataset + ',' + to_string(r.label_mode) + ',' + to_string(r.procedure) + ',';
    put_real(out, r.tau1);
    out += ',';
    put_real(out, r.tau2);
    out += ',';
    put_real(out, r.gamma);
    out += ',' + std::to_string(r.epoch);
    for (double v : {r.train_err01, r.test_err01, r.train_xent, r.kl_upper_raw, r.kl_upper,
                     r.epsilon, r.rhs_dp, r.rhs_lever, r.risk_bound_dp, r.risk_bound_lever,
                     r.runtime_s}) {
      out += ',';
      put_real(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<BoundReport> reports_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrorKind::Format, "empty report CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportCsvHeader) {
    throw DataError(DataErrorKind::Format, "unexpected report CSV header");
  }
  std::vector<BoundReport> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 19) {
      throw DataError(DataErrorKind::Format,
                      "report CSV line " + std::to_string(lineno) + ": expected 19 columns");
    }
    BoundReport r;
    r.seed = parse_int<std::uint64_t>(c[0], lineno);
    r.dataset = c[1];
    r.label_mode = label_mode_from_string(c[2]);
    r.procedure = procedure_from_string(c[3]);
    r.tau1 = parse_real(c[4], lineno);
    r.tau2 = parse_real(c[5], lineno);
    r.gamma = parse_real(c[6], lineno);
    r.epoch = parse_int<std::size_t>(c[7], lineno);
    double* fields[] = {&r.train_err01, &r.test_err01, &r.train_xent, &r.kl_upper_raw,
                        &r.kl_upper,    &r.epsilon,    &r.rhs_dp,     &r.rhs_lever,
                        &r.risk_bound_dp, &r.risk_bound_lever, &r.runtime_s};
    for (std::size_t i = 0; i < 11; ++i) *fields[i] = parse_real(c[8 + i], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void write_reports_csv(const std::vector<BoundReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << reports_to_csv(reports);
  if (!out) throw DataError(DataErrorKind::Io, "write failed: " + path.string());
}

std::vector<BoundReport> read_reports_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return reports_from_csv(ss.str());
}

}  // namespace dpb
