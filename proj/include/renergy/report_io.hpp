#pragma once

// JSON and CSV serialization of reports. JSON numbers carry 12 significant
// digits, CSV numbers 9; both are formatted with std::to_chars, so output does
// not depend on the locale.

#include <charconv>
#include <cmath>
#include <map>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "renergy/lattice_energy.hpp"
#include "renergy/obstacle.hpp"
#include "renergy/torus.hpp"
#include "renergy/version.hpp"

namespace renergy {

using Json = nlohmann::ordered_json;

inline constexpr int json_digits = 12;
inline constexpr int csv_digits = 9;

/// Nearest double to x written with `digits` significant digits.
inline double round_significant(double x, int digits = json_digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits);
  double out = x;
  std::from_chars(buf, res.ptr, out);
  return out;
}

/// Rounds every floating-point number in a JSON tree; NaN and infinities become null.
inline void round_numbers(Json& j, int digits = json_digits) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    j = std::isfinite(v) ? Json(round_significant(v, digits)) : Json(nullptr);
  } else if (j.is_structured()) {
    for (auto& child : j) round_numbers(child, digits);
  }
}

inline std::string dump_json(Json j, int digits = json_digits) {
  round_numbers(j, digits);
  return j.dump(2) + "\n";
}

inline std::string format_csv_number(double x, int digits = csv_digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

/// One CSV field: numbers, integers, booleans or RFC-4180-quoted text.
struct CsvField {
  std::string text;
  CsvField(double x) : text(format_csv_number(x)) {}
  CsvField(int x) : text(std::to_string(x)) {}
  CsvField(long x) : text(std::to_string(x)) {}
  CsvField(unsigned long x) : text(std::to_string(x)) {}
  CsvField(unsigned long long x) : text(std::to_string(x)) {}
  CsvField(bool x) : text(x ? "true" : "false") {}
  CsvField(const char* s) : CsvField(std::string(s)) {}
  CsvField(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
      text = s;
      return;
    }
    text = "\"";
    for (char c : s) {
      if (c == '"') text += '"';
      text += c;
    }
    text += '"';
  }
};

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { add(header); }

  template <class... Fields>
  void row(Fields&&... fields) {
    add(std::vector<CsvField>{CsvField(std::forward<Fields>(fields))...});
  }

  const std::string& str() const { return out_; }

 private:
  void add(const std::vector<std::string>& cells) {
    std::vector<CsvField> f;
    for (const auto& c : cells) f.emplace_back(c);
    add(f);
  }
  void add(const std::vector<CsvField>& cells) {
    if (cells.size() != width_) throw Error(ErrorKind::InvalidArgument, "CSV row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i].text;
    }
    out_ += "\r\n";
  }

  std::size_t width_;
  std::string out_;
};

/// Everything that determines a CLI run. Parameters keep the order in which they were set.
struct RunConfig {
  std::string subcommand;
  Json parameters = Json::object();
  std::string output_path;  // empty: stdout
  std::string format = "json";
  std::uint64_t seed = 0;
  SeriesControl series;
};

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }
inline Json to_json(Vec2 v) { return Json::array({v.x, v.y}); }

inline Json to_json(const SeriesControl& c) {
  return {{"truncation_order", c.truncation_order}, {"abs_tol", c.abs_tol}, {"max_terms", c.max_terms}};
}

inline Json to_json(const RunConfig& rc) {
  return {{"subcommand", rc.subcommand},
          {"parameters", rc.parameters},
          {"output", rc.output_path.empty() ? Json("-") : Json(rc.output_path)},
          {"format", rc.format},
          {"seed", rc.seed},
          {"series", to_json(rc.series)}};
}

/// Top-level document: version stamp, run configuration, then the result.
inline Json envelope(const RunConfig& rc, Json result) {
  return {{"version", version}, {"run_config", to_json(rc)}, {"result", std::move(result)}};
}

inline Json to_json(const EnergyReport& r) {
  return {{"value", r.value},
          {"route", std::string(to_string(r.route))},
          {"error_estimate", r.error_estimate},
          {"truncation", to_json(r.truncation)}};
}

inline Json to_json(const ScanPoint& p) { return {{"a", p.a}, {"b", p.b}, {"w", p.w}}; }

inline Json to_json(const ScanReport& r) {
  return {{"grid",
           {{"a_min", r.grid.a_min},
            {"a_max", r.grid.a_max},
            {"b_min", r.grid.b_min},
            {"b_max", r.grid.b_max},
            {"resolution", r.grid.resolution}}},
          {"density", r.density},
          {"points", r.points.size()},
          {"argmin", to_json(r.argmin)},
          {"min", r.argmin.w},
          {"refined", {{"tau", to_json(r.refined_tau)}, {"value", r.refined_value}, {"steps", r.refine_steps}}}};
}

inline const char* to_string(ThetaVerdict v) {
  switch (v) {
    case ThetaVerdict::Above: return "above";
    case ThetaVerdict::Tie: return "tie";
    case ThetaVerdict::Violation: return "violation";
  }
  return "unknown";
}

inline Json to_json(const ThetaProbeReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"alpha", row.alpha},
                    {"tau", to_json(row.tau)},
                    {"difference", row.difference},
                    {"noise", row.noise},
                    {"verdict", to_string(row.verdict)}});
  }
  return {{"covolume", r.covolume},
          {"violations", r.violations},
          {"inconclusive", r.inconclusive},
          {"above", r.above},
          {"rows", rows}};
}

inline Json to_json(const TorusSpec& t) {
  return {{"basis", Json::array({to_json(t.basis.u()), to_json(t.basis.v())})}, {"volume", t.volume()}};
}

inline Json to_json(const TorusConfig& c) {
  Json pts = Json::array();
  for (Vec2 p : c.points) pts.push_back(to_json(p));
  return {{"n", c.points.size()}, {"torus", to_json(c.torus)}, {"fractional_points", pts}};
}

inline Json to_json(const MinimizeResult& r) {
  Json restarts = Json::array();
  for (const auto& s : r.restarts) {
    restarts.push_back({{"seed", s.seed},
                        {"energy", s.energy},
                        {"grad_norm", s.grad_norm},
                        {"iterations", s.iterations},
                        {"converged", s.converged},
                        {"stalled", s.stalled}});
  }
  return {{"config", to_json(r.config)},
          {"energy", to_json(r.report)},
          {"grad_norm", r.grad_norm},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"stalled", r.stalled},
          {"restarts", restarts}};
}

inline Json to_json(const ElkiesReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"w_min", row.w_min},
                    {"pair_sum_min", row.pair_sum_min},
                    {"excess", row.excess},
                    {"converged", row.converged}});
  }
  return {{"rows", rows},
          {"band_low", r.band_low},
          {"band_high", r.band_high},
          {"band_width", r.band_width},
          {"band_limit", r.band_limit},
          {"within_band", r.within_band}};
}

inline Json to_json(const Conjecture1Report& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"n", row.n},
                    {"torus", row.torus_kind},
                    {"torus_tau", to_json(row.torus_tau)},
                    {"triangular_per_point", row.triangular_per_point},
                    {"embedded_per_point", row.embedded_per_point},
                    {"best_per_point", row.best_per_point},
                    {"gap", row.gap},
                    {"counterexample_candidate", row.counterexample_candidate}});
  }
  return {{"rows", rows}, {"tolerance", r.tolerance}, {"candidates", r.candidates}};
}

inline Json to_json(const CoincidenceMetrics& c) {
  return {{"empty", c.empty},
          {"cells", c.cells},
          {"area", c.area},
          {"length", std::sqrt(c.area)},
          {"centroid", to_json(c.centroid)},
          {"major", c.major},
          {"minor", c.minor},
          {"axis_ratio", c.axis_ratio},
          {"angle", c.angle}};
}

inline Json to_json(const Domain& d) {
  Json j = {{"shape", to_string(d.shape())}, {"area", d.area()}};
  if (d.shape() == Shape::Ellipse) j["semi_axes"] = Json::array({d.ax(), d.ay()});
  if (d.shape() == Shape::ConvexPolygon) {
    Json v = Json::array();
    for (Vec2 p : d.vertices()) v.push_back(to_json(p));
    j["vertices"] = v;
  }
  return j;
}

inline Json to_json(const H0Solution& s) {
  return {{"hbar0", s.hbar0},
          {"x0", to_json(s.x0)},
          {"lambda", 1.0 / (2.0 * (1.0 - s.hbar0))},
          {"residual", s.residual},
          {"sweeps", s.iters}};
}

inline Json to_json(const ObstacleField& f) {
  return {{"m", f.m},
          {"coincidence", to_json(coincidence_metrics(f))},
          {"residual", f.residual},
          {"sweeps", f.iters},
          {"tol", f.tol}};
}

inline Json to_json(const LevelSuiteReport& r) {
  return {{"hbar0", r.hbar0},
          {"x0", to_json(r.x0)},
          {"below_level", r.below_level},
          {"empty_below", r.empty_below},
          {"exterior_barrier_ok", r.exterior_barrier_ok},
          {"full_at_one", r.full_at_one},
          {"monotone", r.monotone},
          {"area_monotone", r.area_monotone},
          {"complementarity", r.complementarity},
          {"levels", r.levels},
          {"areas", r.areas},
          {"residuals", r.residuals},
          {"pass", r.pass()}};
}

inline Json to_json(const GradientBoundReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"m", row.m},
                    {"grad_sup", row.grad_sup},
                    {"ratio", row.ratio},
                    {"area_deficit", row.area_deficit},
                    {"deficit_ratio", row.deficit_ratio}});
  }
  return {{"rows", rows},
          {"ratio_spread", r.ratio_spread},
          {"deficit_spread", r.deficit_spread},
          {"bounded", r.bounded},
          {"deficit_bounded", r.deficit_bounded}};
}

inline Json to_json(const AsymptoticsReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"m", row.m},
                    {"offset", row.offset},
                    {"status", to_string(row.status)},
                    {"cells", row.cells},
                    {"area", row.area},
                    {"length", row.length},
                    {"prediction", row.prediction},
                    {"ratio", row.ratio},
                    {"axis_ratio", row.axis_ratio},
                    {"in_band", row.in_band}});
  }
  return {{"hbar0", r.hbar0},
          {"rows", rows},
          {"band", Json::array({r.band_low, r.band_high})},
          {"all_in_band", r.all_in_band},
          {"trend_toward_one", r.trend_toward_one},
          {"max_axis_ratio", r.max_axis_ratio}};
}

inline Json to_json(const EllipseReport& r) {
  return {{"length", r.length},
          {"center", to_json(r.center)},
          {"axis_ratio", r.axis_ratio},
          {"delta", r.delta},
          {"missing_inner", r.missing_inner},
          {"stray_outer", r.stray_outer},
          {"max_outside", r.max_outside},
          {"max_hole", r.max_hole},
          {"inclusions_hold", r.inclusions_hold},
          {"round", r.round}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string energy_csv(const EnergyReport& r) {
  CsvTable t({"route", "value", "error_estimate"});
  t.row(std::string(to_string(r.route)), r.value, r.error_estimate);
  return t.str();
}

inline std::string scan_csv(const ScanReport& r) {
  CsvTable t({"a", "b", "W"});
  for (const auto& p : r.points) t.row(p.a, p.b, p.w);
  return t.str();
}

inline std::string trace_csv(const MinimizeResult& r) {
  CsvTable t({"iter", "energy", "grad_norm"});
  for (const auto& row : r.trace) t.row(row.iter, row.energy, row.grad_norm);
  return t.str();
}

inline std::string elkies_csv(const ElkiesReport& r) {
  CsvTable t({"n", "w_min", "pair_sum_min", "excess", "converged"});
  for (const auto& row : r.rows) t.row(row.n, row.w_min, row.pair_sum_min, row.excess, row.converged);
  return t.str();
}

inline std::string conjecture1_csv(const Conjecture1Report& r) {
  CsvTable t({"n", "torus", "tau_a", "tau_b", "triangular_per_point", "embedded_per_point", "best_per_point", "gap",
              "counterexample_candidate"});
  for (const auto& row : r.rows) {
    t.row(row.n, row.torus_kind, row.torus_tau.real(), row.torus_tau.imag(), row.triangular_per_point,
          row.embedded_per_point, row.best_per_point, row.gap, row.counterexample_candidate);
  }
  return t.str();
}

/// Grid values of one or more fields: (m, x, y, H, active).
inline std::string fields_csv(std::span<const ObstacleField> fields) {
  CsvTable t({"m", "x", "y", "H", "active"});
  for (const auto& f : fields) {
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      const Vec2 p = f.grid->position(k);
      t.row(f.m, p.x, p.y, f.values[k], f.active[k] ? 1 : 0);
    }
  }
  return t.str();
}

inline std::string h0_csv(const H0Solution& s) {
  CsvTable t({"x", "y", "h0"});
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const Vec2 p = s.grid->position(k);
    t.row(p.x, p.y, s.values[k]);
  }
  return t.str();
}

inline std::string level_suite_csv(const LevelSuiteReport& r) {
  CsvTable t({"m", "area", "residual"});
  for (std::size_t i = 0; i < r.levels.size(); ++i) t.row(r.levels[i], r.areas[i], r.residuals[i]);
  return t.str();
}

inline std::string gradient_bound_csv(const GradientBoundReport& r) {
  CsvTable t({"m", "grad_sup", "ratio", "area_deficit", "deficit_ratio"});
  for (const auto& row : r.rows) t.row(row.m, row.grad_sup, row.ratio, row.area_deficit, row.deficit_ratio);
  return t.str();
}

inline std::string scale_law_csv(const AsymptoticsReport& r) {
  CsvTable t({"m", "offset", "status", "cells", "area", "length", "prediction", "ratio", "axis_ratio", "in_band"});
  for (const auto& row : r.rows) {
    t.row(row.m, row.offset, to_string(row.status), row.cells, row.area, row.length, row.prediction, row.ratio,
          row.axis_ratio, row.in_band);
  }
  return t.str();
}

inline std::string ellipse_csv(const EllipseReport& r) {
  CsvTable t({"length", "axis_ratio", "delta", "missing_inner", "stray_outer", "max_outside", "max_hole",
              "inclusions_hold", "round"});
  t.row(r.length, r.axis_ratio, r.delta, r.missing_inner, r.stray_outer, r.max_outside, r.max_hole,
        r.inclusions_hold, r.round);
  return t.str();
}

}  // namespace renergy
