#pragma once

// Fitting session behind the workbench. Handlers take and return JSON and
// know nothing about sockets; service_http.hpp mounts them on an HTTP server.
// Field names are listed in docs/fit-service-api.md.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mcrf/demo.hpp"
#include "mcrf/engine.hpp"
#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/fitting.hpp"
#include "mcrf/io.hpp"
#include "mcrf/models.hpp"
#include "mcrf/postprocess.hpp"
#include "mcrf/raster.hpp"

namespace mcrf {

struct FitSession {
  std::string dataset_id;
  ClassCatalog catalog;
  SampleSet samples;
  LagBinSpec spec;
  double radius = 30.0;
  ExperimentalTransiogramMatrix exp;
  TransiogramModelSet draft;
  std::vector<char> dirty;         ///< n*n, set by entry edits
  std::optional<Raster> reference;
  GridGeometry geometry;           ///< full-resolution grid previews are drawn on
};

/// Session over a sample set. Without a draft, a mathematical set from the
/// exponential suggestions is used. Without a reference, the preview grid
/// covers the samples' bounding box at `spec.pixel_size`.
inline FitSession make_session(std::string id, ClassCatalog catalog, SampleSet samples, LagBinSpec spec, double radius,
                               std::optional<TransiogramModelSet> draft = std::nullopt,
                               std::optional<Raster> reference = std::nullopt) {
  if (catalog.size() != samples.n_classes())
    fail(ErrorCategory::Configuration, "class catalog and samples disagree on the number of classes");
  if (!(radius > 0.0)) fail(ErrorCategory::Argument, "radius must be positive");
  FitSession s;
  s.dataset_id = std::move(id);
  s.catalog = std::move(catalog);
  s.samples = std::move(samples);
  s.spec = spec;
  s.radius = radius;
  s.exp = estimate_experimental(s.samples, spec);
  const auto p = class_proportions(s.samples);
  if (draft) {
    if (draft->n_classes() != s.catalog.size())
      fail(ErrorCategory::Configuration, "draft model set has the wrong number of classes");
    s.draft = std::move(*draft);
  } else {
    ModelSetInputs in;
    in.method = JointMethod::Mathematical;
    in.marginals = p;
    in.descriptors = suggest_exponential_descriptors(s.exp, p, radius);
    s.draft = build_model_set(s.exp, in);
  }
  s.dirty.assign(static_cast<std::size_t>(s.catalog.size() * s.catalog.size()), 0);
  if (reference) {
    s.geometry = reference->geometry();
    s.reference = std::move(reference);
  } else {
    double x0 = HUGE_VAL, y0 = HUGE_VAL, x1 = -HUGE_VAL, y1 = -HUGE_VAL;
    for (const auto& q : s.samples.points()) {
      x0 = std::min(x0, q.x), y0 = std::min(y0, q.y), x1 = std::max(x1, q.x), y1 = std::max(y1, q.y);
    }
    const double cs = spec.pixel_size;
    s.geometry = GridGeometry{static_cast<int>(std::floor((y1 - y0) / cs)) + 1, static_cast<int>(std::floor((x1 - x0) / cs)) + 1,
                              cs, x0 - 0.5 * cs, y0 - 0.5 * cs};
  }
  return s;
}

/// Session on the demo's dense dataset, drafted with the mixed method.
inline FitSession make_demo_session(const DemoConfig& cfg = {}) {
  auto res = prepare_demo(cfg);
  auto& d = res.datasets[0];
  auto set = build_model_set(d.exp, demo_inputs(d, JointMethod::Mixed));
  return make_session("demo-dense", res.catalog, d.samples, d.spec, d.radius, std::move(set), std::move(res.reference));
}

struct ServiceResponse {
  int status = 200;
  json body;
};

namespace detail {

inline int status_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::NotFound: return 404;
    case ErrorCategory::Configuration:
    case ErrorCategory::UnreliableEntry: return 409;
    default: return 400;
  }
}

inline ServiceResponse error_response(int status, const std::string& category, const std::string& message) {
  return {status, json{{"error", {{"category", category}, {"message", message}}}}};
}

inline ServiceResponse field_errors(const std::vector<FieldError>& errs) {
  json f = json::array();
  for (const auto& e : errs) f.push_back({{"field", e.field}, {"message", e.message}});
  return {422, json{{"error", {{"category", "validation"}, {"message", "invalid request fields"}}}, {"fields", f}}};
}

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Descriptor from a request, collecting problems instead of throwing.
inline ModelDescriptor parse_descriptor_fields(const json& j, std::vector<FieldError>& errs) {
  ModelDescriptor d;
  if (!j.is_object()) {
    errs.push_back({"descriptor", "must be an object"});
    return d;
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    errs.push_back({"descriptor.kind", "required"});
    return d;
  }
  const auto k = model_kind_from_string(j.at("kind").get<std::string>());
  if (!k) {
    errs.push_back({"descriptor.kind", "unknown model kind '" + j.at("kind").get<std::string>() + "'"});
    return d;
  }
  d.kind = *k;
  auto number = [&](const char* name, double& out) {
    if (!j.contains(name)) {
      errs.push_back({std::string("descriptor.") + name, "required for " + std::string(to_string(d.kind))});
    } else if (!j.at(name).is_number()) {
      errs.push_back({std::string("descriptor.") + name, "must be a number"});
    } else {
      out = j.at(name).get<double>();
    }
  };
  if (is_basic(d.kind) || is_gamma(d.kind)) {
    number("sill", d.sill);
    number("range", d.range);
  }
  if (is_gamma(d.kind)) {
    number("alpha", d.alpha);
    number("theta", d.theta);
    number("weight", d.weight);
  }
  if (d.kind == ModelKind::Interpolated) {
    if (!j.contains("knots") || !j.at("knots").is_array()) {
      errs.push_back({"descriptor.knots", "required for interpolated"});
    } else {
      for (const auto& kn : j.at("knots")) {
        if (!kn.is_array() || kn.size() != 2 || !kn[0].is_number() || !kn[1].is_number()) {
          errs.push_back({"descriptor.knots", "must be [lag, value] pairs"});
          break;
        }
        d.knots.push_back({kn[0].get<double>(), kn[1].get<double>()});
      }
    }
  }
  if (errs.empty())
    for (auto e : descriptor_errors(d)) errs.push_back({"descriptor." + e.field, e.message});
  return d;
}

inline std::optional<int> int_field(const json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_number_integer()) return std::nullopt;
  return j.at(name).get<int>();
}

}  // namespace detail

inline json report_to_json(const ValidationReport& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.row_max_deviation.size(); ++i)
    rows.push_back({{"tail", i}, {"max_deviation", r.row_max_deviation[i]}, {"worst_lag", r.row_worst_lag[i]}});
  json issues = json::array();
  for (const auto& is : r.issues)
    issues.push_back({{"tail", is.tail},
                      {"head", is.head < 0 ? json(nullptr) : json(is.head)},
                      {"lag", is.lag},
                      {"value", is.value},
                      {"what", is.what}});
  return {{"valid", r.valid},
          {"lag_max", r.lag_max},
          {"step", r.step},
          {"rows", rows},
          {"min", {{"value", r.min_value}, {"tail", r.min_tail}, {"head", r.min_head}, {"lag", r.min_lag}}},
          {"max", {{"value", r.max_value}, {"tail", r.max_tail}, {"head", r.max_head}, {"lag", r.max_lag}}},
          {"issues", issues}};
}

/// Majority class per block of f x f cells (smallest id on ties); blocks
/// without labelled cells become NODATA.
inline Raster downscale_majority(const Raster& r, int f, int n_classes) {
  const auto& g = r.geometry();
  GridGeometry cg{(g.nrows + f - 1) / f, (g.ncols + f - 1) / f, g.cell_size * f, g.origin_x, g.origin_y};
  Raster out(cg, kNoData);
  std::vector<int> votes(static_cast<std::size_t>(n_classes));
  for (int R = 0; R < cg.nrows; ++R)
    for (int C = 0; C < cg.ncols; ++C) {
      std::fill(votes.begin(), votes.end(), 0);
      bool any = false;
      for (int r0 = R * f; r0 < std::min(g.nrows, (R + 1) * f); ++r0)
        for (int c0 = C * f; c0 < std::min(g.ncols, (C + 1) * f); ++c0) {
          const auto v = r.at(r0, c0);
          if (v < 0 || v >= n_classes) continue;
          ++votes[static_cast<std::size_t>(v)];
          any = true;
        }
      if (any) out.set(R, C, static_cast<ClassId>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
    }
  return out;
}

/// Rows listed top row first, as in ASCII grids.
inline json grid_to_json(const Raster& r) {
  json rows = json::array();
  for (int row = r.nrows() - 1; row >= 0; --row) {
    json line = json::array();
    for (int col = 0; col < r.ncols(); ++col) line.push_back(r.at(row, col));
    rows.push_back(std::move(line));
  }
  return rows;
}

inline constexpr int kPreviewMaxCells = 64;   ///< per side
inline constexpr int kPreviewMinCells = 8;    ///< per side, bounds the downscale factor from above

class FitService {
 public:
  explicit FitService(std::filesystem::path persist_path = "modelset.json") : persist_path_(std::move(persist_path)) {}

  void load(FitSession s) {
    std::unique_lock lock(mu_);
    session_ = std::move(s);
    persisted_ = false;
  }

  bool has_session() const {
    std::shared_lock lock(mu_);
    return session_.has_value();
  }

  const std::filesystem::path& persist_path() const { return persist_path_; }

  /// Routes one request. `query` holds decoded query parameters.
  ServiceResponse handle(const std::string& method, const std::string& path,
                         const std::map<std::string, std::string>& query, const std::string& body) {
    try {
      json j;
      if (!body.empty()) {
        try {
          j = json::parse(body);
        } catch (const json::parse_error& e) {
          return detail::error_response(400, "parse", std::string("request body is not JSON: ") + e.what());
        }
      }
      if (method == "GET" && path == "/session/summary") return summary();
      if (method == "GET" && path == "/transiogram") {
        auto get = [&](const char* k) -> std::optional<std::string> {
          const auto it = query.find(k);
          if (it == query.end()) return std::nullopt;
          return it->second;
        };
        return transiogram(get("tail"), get("head"));
      }
      if (method == "POST" && path == "/model/evaluate") return evaluate(j);
      if (method == "PUT" && path == "/draft/entry") return put_entry(j);
      if (method == "GET" && path == "/modelset") return get_modelset();
      if (method == "PUT" && path == "/modelset") return put_modelset(j);
      if (method == "POST" && path == "/preview") return preview(j);
      return detail::error_response(404, "not_found", "no route " + method + " " + path);
    } catch (const Error& e) {
      return detail::error_response(detail::status_for(e.category()), to_string(e.category()), e.what());
    } catch (const json::exception& e) {
      return detail::error_response(400, "schema", e.what());
    }
  }

  ServiceResponse summary() const {
    std::shared_lock lock(mu_);
    if (!session_) return no_session();
    const auto& s = *session_;
    const auto p = class_proportions(s.samples);
    json classes = json::array();
    for (const auto& c : s.catalog.classes())
      classes.push_back({{"id", c.id}, {"name", c.name}, {"role", to_string(c.role)}});
    return {200,
            {{"dataset", s.dataset_id},
             {"classes", classes},
             {"proportions", std::vector<double>(p.values().begin(), p.values().end())},
             {"counts", s.samples.class_counts()},
             {"n_samples", s.samples.size()},
             {"estimation", {{"bin_width", s.spec.bin_width}, {"max_lag", s.spec.max_lag}, {"pixel_size", s.spec.pixel_size}}},
             {"radius", s.radius},
             {"validation_lag", 2.0 * s.radius},
             {"has_reference", s.reference.has_value()},
             {"grid", {{"nrows", s.geometry.nrows}, {"ncols", s.geometry.ncols}}}}};
  }

  ServiceResponse transiogram(const std::optional<std::string>& tail_s, const std::optional<std::string>& head_s) const {
    std::shared_lock lock(mu_);
    if (!session_) return no_session();
    const auto& s = *session_;
    const int n = s.catalog.size();
    std::vector<FieldError> errs;
    auto index = [&](const std::optional<std::string>& v, const char* name) {
      if (!v) {
        errs.push_back({name, "required"});
        return 0;
      }
      const auto x = parse_int(*v);
      if (!x || *x < 0 || *x >= n) {
        errs.push_back({name, "must be a class id in [0, " + std::to_string(n - 1) + "]"});
        return 0;
      }
      return static_cast<int>(*x);
    };
    const int t = index(tail_s, "tail"), h = index(head_s, "head");
    if (!errs.empty()) return detail::field_errors(errs);
    json bins = json::array();
    for (int b = 0; b < s.exp.bin_count(); ++b) {
      const auto p = s.exp.probability(t, h, b);
      bins.push_back({{"lag", s.exp.lag(b)},
                      {"probability", p ? json(*p) : json(nullptr)},
                      {"count", s.exp.count(t, h, b)},
                      {"tail_total", s.exp.tail_total(t, b)},
                      {"missing", !p.has_value()}});
    }
    return {200, {{"tail", t}, {"head", h}, {"bins", bins}}};
  }

  ServiceResponse evaluate(const json& j) const {
    std::shared_lock lock(mu_);
    if (!session_) return no_session();
    const auto& s = *session_;
    std::vector<FieldError> errs;
    const auto parsed = parse_entry_request(j, errs);
    double lag_max = 2.0 * s.radius, step = 0.5;
    if (j.contains("lag_max")) {
      if (!j.at("lag_max").is_number() || !(j.at("lag_max").get<double>() > 0.0)) errs.push_back({"lag_max", "must be positive"});
      else lag_max = j.at("lag_max").get<double>();
    }
    if (j.contains("step")) {
      if (!j.at("step").is_number() || !(j.at("step").get<double>() > 0.0)) errs.push_back({"step", "must be positive"});
      else step = j.at("step").get<double>();
    }
    if (errs.empty() && lag_max / step > 200000.0) errs.push_back({"step", "too many curve points"});
    if (!errs.empty()) return detail::field_errors(errs);
    const auto& [t, h, d] = *parsed;

    // Candidate substituted into the draft row; the closure entry is
    // recomputed from it.
    std::vector<ModelDescriptor> row(s.draft.row(t).begin(), s.draft.row(t).end());
    row[static_cast<std::size_t>(h)] = d;
    const int rest = s.draft.rest_head(t);
    const int n = s.catalog.size();
    json curve = json::array(), row_sum = json::array(), rest_curve = json::array(), violations = json::array();
    const auto steps = static_cast<long>(std::floor(lag_max / step + 1e-9));
    for (long k = 0; k <= steps + 1; ++k) {
      double x = static_cast<double>(k) * step;
      if (k == steps + 1) {
        if (lag_max - static_cast<double>(steps) * step <= 1e-12) break;
        x = lag_max;
      }
      double others = 0.0;
      std::vector<double> vals(static_cast<std::size_t>(n));
      for (int c = 0; c < n; ++c) {
        if (c == rest) continue;
        vals[static_cast<std::size_t>(c)] = evaluate_entry(row[static_cast<std::size_t>(c)], x);
        others += vals[static_cast<std::size_t>(c)];
      }
      vals[static_cast<std::size_t>(rest)] = 1.0 - others;
      curve.push_back({x, vals[static_cast<std::size_t>(h)]});
      row_sum.push_back({x, others});
      rest_curve.push_back({x, 1.0 - others});
      for (int c = 0; c < n && violations.size() < 50; ++c) {
        const double v = vals[static_cast<std::size_t>(c)];
        if (v < -kConstraintTolerance) violations.push_back({{"lag", x}, {"head", c}, {"value", v}, {"what", "negative value"}});
        else if (v > 1.0 + kConstraintTolerance)
          violations.push_back({{"lag", x}, {"head", c}, {"value", v}, {"what", "value above 1"}});
      }
    }
    json out{{"tail", t}, {"head", h}, {"rest_head", rest}, {"curve", curve}, {"row_sum", row_sum},
             {"rest", rest_curve}, {"violations", violations}, {"low_lag_cutoff", s.radius}};
    const auto knots = s.exp.knots(t, h);
    if (knots.empty() || d.kind == ModelKind::Rest) {
      out["rmse_all"] = nullptr;
      out["rmse_low"] = nullptr;
      if (d.kind != ModelKind::Rest) out["notice"] = "entry has no experimental data";
    } else {
      const auto score = fit_rmse(d, knots, s.radius);
      out["rmse_all"] = score.rmse_all;
      out["rmse_low"] = score.rmse_low ? json(*score.rmse_low) : json(nullptr);
    }
    if (d.kind == ModelKind::Rest && !knots.empty()) {
      const auto score = fit_rmse(
          [&](double x) {
            double others = 0.0;
            for (int c = 0; c < n; ++c)
              if (c != rest) others += evaluate_entry(row[static_cast<std::size_t>(c)], x);
            return 1.0 - others;
          },
          knots, s.radius);
      out["rmse_all"] = score.rmse_all;
      out["rmse_low"] = score.rmse_low ? json(*score.rmse_low) : json(nullptr);
    }
    return {200, out};
  }

  ServiceResponse put_entry(const json& j) {
    std::unique_lock lock(mu_);
    if (!session_) return no_session();
    auto& s = *session_;
    std::vector<FieldError> errs;
    const auto parsed = parse_entry_request(j, errs);
    if (!errs.empty()) return detail::field_errors(errs);
    const auto& [t, h, d] = *parsed;
    const int n = s.catalog.size();
    std::vector<ModelDescriptor> entries(s.draft.entries().begin(), s.draft.entries().end());
    entries[static_cast<std::size_t>(t * n + h)] = d;
    s.draft = TransiogramModelSet(n, std::move(entries), s.draft.marginals());
    s.dirty[static_cast<std::size_t>(t * n + h)] = 1;
    persisted_ = false;
    return {200, {{"tail", t}, {"head", h}, {"descriptor", descriptor_to_json(d)}, {"dirty", true}}};
  }

  ServiceResponse get_modelset() const {
    std::shared_lock lock(mu_);
    if (!session_) return no_session();
    const auto& s = *session_;
    const int n = s.catalog.size();
    json dirty = json::array();
    for (int t = 0; t < n; ++t)
      for (int h = 0; h < n; ++h)
        if (s.dirty[static_cast<std::size_t>(t * n + h)]) dirty.push_back({t, h});
    return {200,
            {{"document", modelset_to_json(s.draft)},
             {"dirty", dirty},
             {"persisted", persisted_},
             {"path", persist_path_.string()}}};
  }

  /// Optional body: {"document": <model-set document>, "lag_max": number}.
  ServiceResponse put_modelset(const json& j) {
    std::unique_lock lock(mu_);
    if (!session_) return no_session();
    auto& s = *session_;
    const int n = s.catalog.size();
    if (!j.is_null() && !j.is_object()) return detail::field_errors({{"body", "must be an object"}});
    double lag_max = 2.0 * s.radius;
    if (j.is_object() && j.contains("lag_max")) {
      if (!j.at("lag_max").is_number() || !(j.at("lag_max").get<double>() > 0.0))
        return detail::field_errors({{"lag_max", "must be positive"}});
      lag_max = j.at("lag_max").get<double>();
    }
    if (j.is_object() && j.contains("document")) {
      TransiogramModelSet doc;
      try {
        doc = modelset_from_json(j.at("document"));
      } catch (const Error& e) {
        return detail::field_errors({{"document", e.what()}});
      }
      if (doc.n_classes() != n) return detail::field_errors({{"document", "wrong number of classes"}});
      s.draft = std::move(doc);
      std::fill(s.dirty.begin(), s.dirty.end(), 1);
      persisted_ = false;
    }
    TransiogramModelSet candidate = s.draft;
    const auto rep = validate_model_set(candidate, lag_max);
    json out{{"report", report_to_json(rep)}, {"persisted", false}, {"path", persist_path_.string()}};
    if (!rep.valid) return {422, out};
    write_modelset(persist_path_, candidate);
    s.draft = std::move(candidate);
    std::fill(s.dirty.begin(), s.dirty.end(), 0);
    persisted_ = true;
    out["persisted"] = true;
    return {200, out};
  }

  /// Body: {"seed": int, "radius": number (pixel lengths), "downscale": int}.
  ServiceResponse preview(const json& j) const {
    std::shared_lock lock(mu_);
    if (!session_) return no_session();
    const auto& s = *session_;
    const int n = s.catalog.size();
    std::vector<FieldError> errs;
    if (!j.is_object()) return detail::field_errors({{"body", "must be an object"}});
    std::uint64_t seed = 0;
    if (!j.contains("seed") || !j.at("seed").is_number_integer()) errs.push_back({"seed", "required integer"});
    else seed = j.at("seed").get<std::uint64_t>();
    double radius = s.radius;
    if (j.contains("radius")) {
      if (!j.at("radius").is_number() || !(j.at("radius").get<double>() > 0.0)) errs.push_back({"radius", "must be positive"});
      else radius = j.at("radius").get<double>();
    }
    const auto& g = s.geometry;
    const int f_min = std::max(1, (std::max(g.nrows, g.ncols) + kPreviewMaxCells - 1) / kPreviewMaxCells);
    const int f_max = std::max(f_min, std::min(g.nrows, g.ncols) / kPreviewMinCells);
    int f = f_min;
    json notices = json::array();
    if (j.contains("downscale")) {
      if (!j.at("downscale").is_number_integer() || j.at("downscale").get<long long>() < 1) {
        errs.push_back({"downscale", "must be a positive integer"});
      } else {
        const auto want = j.at("downscale").get<long long>();
        f = static_cast<int>(std::clamp<long long>(want, f_min, f_max));
        if (f != want)
          notices.push_back("downscale " + std::to_string(want) + " capped to " + std::to_string(f) + " (preview grids are " +
                            std::to_string(kPreviewMinCells) + " to " + std::to_string(kPreviewMaxCells) + " cells a side)");
      }
    }
    if (!errs.empty()) return detail::field_errors(errs);

    TransiogramModelSet set = s.draft;
    const auto rep = validate_model_set(set, std::max(2.0 * s.radius, radius));
    if (!rep.valid) return {422, {{"error", {{"category", "validation"}, {"message", "draft model set is invalid"}}}, {"report", report_to_json(rep)}}};

    GridGeometry cg{(g.nrows + f - 1) / f, (g.ncols + f - 1) / f, g.cell_size * f, g.origin_x, g.origin_y};
    std::optional<Raster> coarse_ref;
    Raster target(cg, 0);
    if (s.reference) {
      coarse_ref = downscale_majority(*s.reference, f, n);
      target = *coarse_ref;
    }
    // One sample per coarse cell; the first listed wins.
    std::vector<SamplePoint> pts;
    std::vector<char> taken(cg.cell_count(), 0);
    std::size_t merged = 0;
    for (const auto& q : s.samples.points()) {
      const auto c = cell_of(cg, {q.x, q.y});
      if (!c) continue;
      const auto idx = static_cast<std::size_t>(c->row) * static_cast<std::size_t>(cg.ncols) + static_cast<std::size_t>(c->col);
      if (taken[idx] || target[idx] == kNoData) {
        ++merged;
        continue;
      }
      taken[idx] = 1;
      const auto xy = cell_center(cg, c->row, c->col);
      pts.push_back({xy.x, xy.y, q.cls});
    }
    if (merged) notices.push_back(std::to_string(merged) + " samples share a preview cell with an earlier sample and were dropped");
    SampleSet coarse_samples(std::move(pts), n);
    double radius_cells = radius / f;
    if (radius_cells < 1.0) {
      radius_cells = 1.0;
      notices.push_back("search radius raised to one preview cell");
    }
    const LagTable table(set, radius_cells, static_cast<double>(f));
    const Raster real = simulate_realization(place_samples(target, coarse_samples), table, radius_cells, seed);

    json out{{"nrows", cg.nrows},  {"ncols", cg.ncols},   {"cell_size", cg.cell_size},     {"downscale", f},
             {"seed", seed},       {"radius", radius},    {"radius_cells", radius_cells},  {"grid", grid_to_json(real)},
             {"notices", notices}, {"samples_used", coarse_samples.size()}};
    if (coarse_ref) {
      const auto acc = accuracy(real, *coarse_ref, coarse_samples, DenominatorPolicy::ExcludeSamples, n);
      json per = json::array();
      for (double v : acc.per_class) per.push_back(detail::nullable(v));
      out["reference_grid"] = grid_to_json(*coarse_ref);
      out["accuracy"] = {{"overall", acc.overall}, {"per_class", per}, {"policy", to_string(acc.policy)}};
    } else {
      out["accuracy"] = nullptr;
    }
    return {200, out};
  }

 private:
  struct EntryRequest {
    int tail, head;
    ModelDescriptor descriptor;
  };

  static ServiceResponse no_session() { return detail::error_response(404, "not_found", "no session loaded"); }

  static double evaluate_entry(const ModelDescriptor& d, double h) { return mcrf::evaluate(d, h); }

  /// tail/head/descriptor with kind rules: the row's closure entry only takes
  /// kind "rest", auto entries take exponential_auto or interpolated, cross
  /// entries any cross shape or interpolated.
  std::optional<EntryRequest> parse_entry_request(const json& j, std::vector<FieldError>& errs) const {
    const auto& s = *session_;
    const int n = s.catalog.size();
    if (!j.is_object()) {
      errs.push_back({"body", "must be an object"});
      return std::nullopt;
    }
    const auto t = detail::int_field(j, "tail"), h = detail::int_field(j, "head");
    if (!t || *t < 0 || *t >= n) errs.push_back({"tail", "must be a class id in [0, " + std::to_string(n - 1) + "]"});
    if (!h || *h < 0 || *h >= n) errs.push_back({"head", "must be a class id in [0, " + std::to_string(n - 1) + "]"});
    if (!j.contains("descriptor")) {
      errs.push_back({"descriptor", "required"});
      return std::nullopt;
    }
    auto d = detail::parse_descriptor_fields(j.at("descriptor"), errs);
    if (!errs.empty()) return std::nullopt;
    const bool is_rest = s.draft.rest_head(*t) == *h;
    if (is_rest && d.kind != ModelKind::Rest) errs.push_back({"descriptor.kind", "entry is the row's closure; kind must be rest"});
    if (!is_rest && d.kind == ModelKind::Rest)
      errs.push_back({"descriptor.kind", "rest is reserved for the row's closure entry (head " +
                                             std::to_string(s.draft.rest_head(*t)) + ")"});
    if (!is_rest && *t == *h && d.kind != ModelKind::ExponentialAuto && d.kind != ModelKind::Interpolated)
      errs.push_back({"descriptor.kind", "auto entries take exponential_auto or interpolated"});
    if (*t != *h && d.kind == ModelKind::ExponentialAuto)
      errs.push_back({"descriptor.kind", "exponential_auto is only for auto entries"});
    if (!errs.empty()) return std::nullopt;
    return EntryRequest{*t, *h, std::move(d)};
  }

  std::filesystem::path persist_path_;
  mutable std::shared_mutex mu_;
  std::optional<FitSession> session_;
  bool persisted_ = false;
};

}  // namespace mcrf
