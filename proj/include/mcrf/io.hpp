#pragma once

// Text file formats:
//   * ASCII grids (ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value
//     header, rows listed top-down)
//   * sample CSV with header `x,y,class`
//   * model-set documents and dataset descriptors (JSON)
//
// Class ids are 0-based everywhere.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/format.hpp"
#include "mcrf/models.hpp"
#include "mcrf/raster.hpp"

namespace mcrf {

using json = nlohmann::json;

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] inline void parse_error(const std::string& source, std::size_t line, const std::string& msg) {
  fail(ErrorCategory::Parse, source + ":" + std::to_string(line) + ": " + msg);
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorCategory::NotFound, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorCategory::NotFound, "cannot write " + p.string());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ASCII grid

inline constexpr long long kDefaultNoDataValue = -9999;

inline Raster read_ascii_grid(std::istream& in, const std::string& source = "<grid>") {
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::string> pending;
  static const char* const keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto tok = detail::split_ws(line);
    const auto key = detail::lower(tok[0]);
    if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys)) {
      pending = line;
      break;
    }
    if (tok.size() != 2) detail::parse_error(source, lineno, "header line '" + std::string(tok[0]) + "' needs one value");
    if (header.count(key)) detail::parse_error(source, lineno, "duplicate header key " + key);
    header[key] = std::string(tok[1]);
  }
  for (const char* k : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"})
    if (!header.count(k)) detail::parse_error(source, lineno, std::string("missing header key ") + k);

  const auto ncols = parse_int(header["ncols"]);
  const auto nrows = parse_int(header["nrows"]);
  const auto xll = parse_double(header["xllcorner"]);
  const auto yll = parse_double(header["yllcorner"]);
  const auto cs = parse_double(header["cellsize"]);
  if (!ncols || *ncols <= 0 || !nrows || *nrows <= 0) detail::parse_error(source, lineno, "ncols/nrows must be positive integers");
  if (!xll || !yll) detail::parse_error(source, lineno, "xllcorner/yllcorner must be numbers");
  if (!cs || !(*cs > 0.0)) detail::parse_error(source, lineno, "cellsize must be a positive number");
  long long nodata = kDefaultNoDataValue;
  if (header.count("nodata_value")) {
    const auto nd = parse_int(header["nodata_value"]);
    if (!nd) detail::parse_error(source, lineno, "NODATA_value must be an integer");
    nodata = *nd;
  }

  GridGeometry g{static_cast<int>(*nrows), static_cast<int>(*ncols), *cs, *xll, *yll};
  Raster r(g, kNoData);
  long long file_row = 0;  // 0 = top
  auto take_row = [&](const std::string& text, std::size_t ln) {
    const auto tok = detail::split_ws(text);
    if (file_row >= *nrows) detail::parse_error(source, ln, "more than " + std::to_string(*nrows) + " data rows");
    if (static_cast<long long>(tok.size()) != *ncols)
      detail::parse_error(source, ln, "expected " + std::to_string(*ncols) + " values, found " + std::to_string(tok.size()));
    const int row = static_cast<int>(*nrows - 1 - file_row);
    for (long long c = 0; c < *ncols; ++c) {
      const auto v = parse_int(tok[static_cast<std::size_t>(c)]);
      if (!v) detail::parse_error(source, ln, "non-integer label '" + std::string(tok[static_cast<std::size_t>(c)]) + "'");
      if (*v == nodata) continue;
      if (*v < 0 || *v > 1'000'000) detail::parse_error(source, ln, "invalid class label " + std::to_string(*v));
      r.set(row, static_cast<int>(c), static_cast<ClassId>(*v));
    }
    ++file_row;
  };
  if (pending) take_row(*pending, lineno);
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    take_row(line, lineno);
  }
  if (file_row != *nrows)
    detail::parse_error(source, lineno, "expected " + std::to_string(*nrows) + " data rows, found " + std::to_string(file_row));
  return r;
}

inline void write_ascii_grid(std::ostream& os, const Raster& r, long long nodata_value = kDefaultNoDataValue) {
  const auto& g = r.geometry();
  os << "ncols " << g.ncols << '\n'
     << "nrows " << g.nrows << '\n'
     << "xllcorner " << format_double(g.origin_x) << '\n'
     << "yllcorner " << format_double(g.origin_y) << '\n'
     << "cellsize " << format_double(g.cell_size) << '\n'
     << "NODATA_value " << nodata_value << '\n';
  for (int row = g.nrows - 1; row >= 0; --row) {
    for (int col = 0; col < g.ncols; ++col) {
      if (col) os << ' ';
      const ClassId v = r.at(row, col);
      if (v < 0) os << nodata_value;
      else os << v;
    }
    os << '\n';
  }
}

inline Raster read_ascii_grid(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  return read_ascii_grid(in, p.string());
}

inline void write_ascii_grid(const std::filesystem::path& p, const Raster& r, long long nodata_value = kDefaultNoDataValue) {
  auto out = detail::open_out(p);
  write_ascii_grid(out, r, nodata_value);
}

// ---------------------------------------------------------------------------
// Sample CSV

/// n_classes <= 0 infers the class count from the largest label.
inline SampleSet read_samples_csv(std::istream& in, int n_classes = 0, const std::string& source = "<samples>") {
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<SamplePoint> pts;
  std::map<std::pair<double, double>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank(line)) continue;
    if (!have_header) {
      std::string h = line;
      h.erase(std::remove_if(h.begin(), h.end(), [](unsigned char c) { return std::isspace(c); }), h.end());
      if (detail::lower(h) != "x,y,class") detail::parse_error(source, lineno, "expected header 'x,y,class'");
      have_header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      const auto a = cell.find_first_not_of(" \t"), b = cell.find_last_not_of(" \t");
      f.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    if (f.size() != 3) detail::parse_error(source, lineno, "expected 3 fields, found " + std::to_string(f.size()));
    const auto x = parse_double(f[0]);
    const auto y = parse_double(f[1]);
    const auto c = parse_int(f[2]);
    if (!x || !y) detail::parse_error(source, lineno, "coordinates must be numbers");
    if (!c) detail::parse_error(source, lineno, "class must be an integer");
    if (*c < 0 || (n_classes > 0 && *c >= n_classes))
      fail(ErrorCategory::Data, source + ":" + std::to_string(lineno) + ": unknown class " + std::to_string(*c));
    const auto [it, fresh] = seen.emplace(std::make_pair(*x, *y), lineno);
    if (!fresh)
      fail(ErrorCategory::Data, source + ":" + std::to_string(lineno) + ": duplicate coordinates (first seen on line " +
                                    std::to_string(it->second) + ")");
    pts.push_back({*x, *y, static_cast<ClassId>(*c)});
  }
  if (pts.empty()) fail(ErrorCategory::EmptyInput, source + ": no sample points");
  if (n_classes <= 0) {
    for (const auto& p : pts) n_classes = std::max(n_classes, p.cls + 1);
  }
  return SampleSet(std::move(pts), n_classes);
}

inline void write_samples_csv(std::ostream& os, const SampleSet& s) {
  os << "x,y,class\n";
  for (const auto& p : s.points()) os << format_double(p.x) << ',' << format_double(p.y) << ',' << p.cls << '\n';
}

inline SampleSet read_samples_csv(const std::filesystem::path& p, int n_classes = 0) {
  auto in = detail::open_in(p);
  return read_samples_csv(in, n_classes, p.string());
}

inline void write_samples_csv(const std::filesystem::path& p, const SampleSet& s) {
  auto out = detail::open_out(p);
  write_samples_csv(out, s);
}

// ---------------------------------------------------------------------------
// Model descriptors as JSON

namespace detail {

inline double require_number(const json& j, const char* field, const std::string& where) {
  if (!j.contains(field)) fail(ErrorCategory::Schema, where + ": missing field '" + field + "'");
  if (!j.at(field).is_number()) fail(ErrorCategory::Schema, where + ": field '" + field + "' must be a number");
  return j.at(field).get<double>();
}

inline ModelKind require_kind(const json& j, const std::string& where) {
  if (!j.contains("kind") || !j.at("kind").is_string()) fail(ErrorCategory::Schema, where + ": missing field 'kind'");
  const auto name = j.at("kind").get<std::string>();
  const auto k = model_kind_from_string(name);
  if (!k) fail(ErrorCategory::Parse, where + ": unknown model kind '" + name + "'");
  return *k;
}

}  // namespace detail

inline json descriptor_to_json(const ModelDescriptor& d) {
  json j;
  j["kind"] = to_string(d.kind);
  if (is_basic(d.kind) || is_gamma(d.kind)) {
    j["sill"] = d.sill;
    j["range"] = d.range;
  }
  if (is_gamma(d.kind)) {
    j["alpha"] = d.alpha;
    j["theta"] = d.theta;
    j["weight"] = d.weight;
  }
  if (d.kind == ModelKind::Interpolated) {
    j["knots"] = json::array();
    for (const auto& k : d.knots) j["knots"].push_back({k.lag, k.value});
  }
  return j;
}

/// Reads the fields relevant to the kind; a missing field is a schema error
/// naming `where`.
inline ModelDescriptor descriptor_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorCategory::Schema, where + ": descriptor must be an object");
  ModelDescriptor d;
  d.kind = detail::require_kind(j, where);
  if (is_basic(d.kind) || is_gamma(d.kind)) {
    d.sill = detail::require_number(j, "sill", where);
    d.range = detail::require_number(j, "range", where);
  }
  if (is_gamma(d.kind)) {
    d.alpha = detail::require_number(j, "alpha", where);
    d.theta = detail::require_number(j, "theta", where);
    d.weight = detail::require_number(j, "weight", where);
  }
  if (d.kind == ModelKind::Interpolated) {
    if (!j.contains("knots") || !j.at("knots").is_array()) fail(ErrorCategory::Schema, where + ": missing field 'knots'");
    for (const auto& k : j.at("knots")) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
        fail(ErrorCategory::Schema, where + ": knots must be [lag, value] pairs");
      d.knots.push_back({k[0].get<double>(), k[1].get<double>()});
    }
  }
  return d;
}

inline json entry_model_to_json(const EntryModel& m) {
  json j;
  j["kind"] = to_string(m.kind);
  if (m.sill) j["sill"] = *m.sill;
  j["range"] = m.range;
  if (is_gamma(m.kind)) {
    j["alpha"] = m.alpha;
    j["theta"] = m.theta;
    j["weight"] = m.weight;
  }
  return j;
}

inline EntryModel entry_model_from_json(const json& j, const std::string& where) {
  EntryModel m;
  m.kind = detail::require_kind(j, where);
  if (j.contains("sill") && !j.at("sill").is_null()) m.sill = detail::require_number(j, "sill", where);
  m.range = detail::require_number(j, "range", where);
  if (is_gamma(m.kind)) {
    m.alpha = detail::require_number(j, "alpha", where);
    m.theta = detail::require_number(j, "theta", where);
    m.weight = detail::require_number(j, "weight", where);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model-set documents

inline constexpr const char* kModelSetFormat = "mcrf-modelset/1";
inline constexpr double kDefaultValidationLag = 100.0;

inline json modelset_to_json(const TransiogramModelSet& set) {
  json j;
  j["format"] = kModelSetFormat;
  j["n_classes"] = set.n_classes();
  j["marginals"] = std::vector<double>(set.marginals().values().begin(), set.marginals().values().end());
  j["rest_head"] = std::vector<int>(set.rest_heads().begin(), set.rest_heads().end());
  if (set.validated()) j["validated_lag_max"] = set.validated_lag_max();
  j["entries"] = json::array();
  for (int i = 0; i < set.n_classes(); ++i)
    for (int k = 0; k < set.n_classes(); ++k) {
      json e = descriptor_to_json(set.entry(i, k));
      e["tail"] = i;
      e["head"] = k;
      j["entries"].push_back(std::move(e));
    }
  return j;
}

/// Structure-checked model set (not yet validated numerically).
inline TransiogramModelSet modelset_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCategory::Schema, "model-set document must be a JSON object");
  if (!j.contains("n_classes") || !j.at("n_classes").is_number_integer())
    fail(ErrorCategory::Schema, "model-set document needs integer 'n_classes'");
  const int n = j.at("n_classes").get<int>();
  if (n <= 0) fail(ErrorCategory::Schema, "n_classes must be positive");
  if (!j.contains("marginals") || !j.at("marginals").is_array())
    fail(ErrorCategory::Schema, "model-set document needs a 'marginals' array");
  std::vector<double> marg;
  for (const auto& v : j.at("marginals")) {
    if (!v.is_number()) fail(ErrorCategory::Schema, "marginals must be numbers");
    marg.push_back(v.get<double>());
  }
  if (marg.size() != static_cast<std::size_t>(n)) fail(ErrorCategory::Schema, "marginals length differs from n_classes");
  if (!j.contains("entries") || !j.at("entries").is_array())
    fail(ErrorCategory::Schema, "model-set document needs an 'entries' array");

  std::vector<std::optional<ModelDescriptor>> slots(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (const auto& e : j.at("entries")) {
    if (!e.is_object() || !e.contains("tail") || !e.contains("head") || !e.at("tail").is_number_integer() ||
        !e.at("head").is_number_integer())
      fail(ErrorCategory::Schema, "every entry needs integer 'tail' and 'head'");
    const int t = e.at("tail").get<int>(), h = e.at("head").get<int>();
    const std::string where = "entry (" + std::to_string(t) + "," + std::to_string(h) + ")";
    if (t < 0 || t >= n || h < 0 || h >= n) fail(ErrorCategory::Schema, where + ": class index out of range");
    auto& slot = slots[static_cast<std::size_t>(t) * static_cast<std::size_t>(n) + static_cast<std::size_t>(h)];
    if (slot) fail(ErrorCategory::Schema, where + ": listed twice");
    slot = descriptor_from_json(e, where);
    check_descriptor(*slot, where);
  }
  std::vector<ModelDescriptor> entries;
  for (int t = 0; t < n; ++t)
    for (int h = 0; h < n; ++h) {
      auto& slot = slots[static_cast<std::size_t>(t) * static_cast<std::size_t>(n) + static_cast<std::size_t>(h)];
      if (!slot) fail(ErrorCategory::Schema, "entry (" + std::to_string(t) + "," + std::to_string(h) + ") is missing");
      entries.push_back(std::move(*slot));
    }
  ProportionVector p = [&] {
    try {
      return ProportionVector(marg);
    } catch (const Error& e) {
      fail(ErrorCategory::Schema, std::string("marginals: ") + e.what());
    }
  }();
  TransiogramModelSet set = [&] {
    try {
      return TransiogramModelSet(n, std::move(entries), std::move(p));
    } catch (const Error& e) {
      fail(ErrorCategory::Schema, e.what());
    }
  }();
  if (j.contains("rest_head")) {
    const auto& rh = j.at("rest_head");
    if (!rh.is_array() || rh.size() != static_cast<std::size_t>(n))
      fail(ErrorCategory::Schema, "rest_head must list one class per row");
    for (int i = 0; i < n; ++i)
      if (!rh[static_cast<std::size_t>(i)].is_number_integer() || rh[static_cast<std::size_t>(i)].get<int>() != set.rest_head(i))
        fail(ErrorCategory::Schema, "rest_head of row " + std::to_string(i) + " does not match its rest entry");
  }
  return set;
}

struct LoadedModelSet {
  TransiogramModelSet set;
  ValidationReport report;
};

/// Parses and validates over [0, validated_lag_max] from the document, or
/// over [0, default_lag_max] when the document does not say.
inline LoadedModelSet load_modelset(const json& j, double default_lag_max = kDefaultValidationLag) {
  LoadedModelSet out{modelset_from_json(j), {}};
  double lag_max = default_lag_max;
  if (j.contains("validated_lag_max")) {
    if (!j.at("validated_lag_max").is_number() || !(j.at("validated_lag_max").get<double>() > 0.0))
      fail(ErrorCategory::Schema, "validated_lag_max must be a positive number");
    lag_max = j.at("validated_lag_max").get<double>();
  }
  out.report = validate_model_set(out.set, lag_max);
  return out;
}

inline json read_json_file(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::Parse, p.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
  auto out = detail::open_out(p);
  out << j.dump(2) << '\n';
}

inline LoadedModelSet read_modelset(const std::filesystem::path& p, double default_lag_max = kDefaultValidationLag) {
  return load_modelset(read_json_file(p), default_lag_max);
}

inline void write_modelset(const std::filesystem::path& p, const TransiogramModelSet& set) {
  write_json_file(p, modelset_to_json(set));
}

// ---------------------------------------------------------------------------
// Dataset descriptor: class names and roles, estimation settings, closure
// heads and mathematical descriptors for a sample dataset.

struct DatasetDescriptor {
  ClassCatalog catalog;
  LagBinSpec estimation;
  std::vector<ClassId> rest_heads;
  std::map<EntryKey, EntryModel> descriptors;
  std::optional<std::vector<double>> marginals;
};

inline json dataset_to_json(const DatasetDescriptor& d) {
  json j;
  j["classes"] = json::array();
  for (const auto& c : d.catalog.classes()) j["classes"].push_back({{"name", c.name}, {"role", to_string(c.role)}});
  j["estimation"] = {{"bin_width", d.estimation.bin_width},
                     {"max_lag", d.estimation.max_lag},
                     {"pixel_size", d.estimation.pixel_size}};
  if (!d.rest_heads.empty()) j["rest_heads"] = std::vector<int>(d.rest_heads.begin(), d.rest_heads.end());
  if (d.marginals) j["marginals"] = *d.marginals;
  j["descriptors"] = json::array();
  for (const auto& [key, m] : d.descriptors) {
    json e = entry_model_to_json(m);
    e["tail"] = key.tail;
    e["head"] = key.head;
    j["descriptors"].push_back(std::move(e));
  }
  return j;
}

inline DatasetDescriptor dataset_from_json(const json& j) {
  if (!j.is_object() || !j.contains("classes") || !j.at("classes").is_array())
    fail(ErrorCategory::Schema, "dataset descriptor needs a 'classes' array");
  DatasetDescriptor d;
  std::vector<ClassInfo> classes;
  for (const auto& c : j.at("classes")) {
    ClassInfo info;
    info.id = static_cast<ClassId>(classes.size());
    info.name = c.value("name", "class_" + std::to_string(info.id));
    info.role = class_role_from_string(c.value("role", std::string("major")));
    classes.push_back(std::move(info));
  }
  d.catalog = ClassCatalog(std::move(classes));
  const int n = d.catalog.size();
  if (j.contains("estimation")) {
    const auto& e = j.at("estimation");
    d.estimation.bin_width = detail::require_number(e, "bin_width", "estimation");
    d.estimation.max_lag = detail::require_number(e, "max_lag", "estimation");
    d.estimation.pixel_size = e.value("pixel_size", 1.0);
    d.estimation.check();
  }
  if (j.contains("rest_heads")) {
    for (const auto& v : j.at("rest_heads")) {
      if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() >= n)
        fail(ErrorCategory::Schema, "rest_heads entries must be class ids");
      d.rest_heads.push_back(v.get<int>());
    }
    if (d.rest_heads.size() != static_cast<std::size_t>(n)) fail(ErrorCategory::Schema, "rest_heads needs one entry per class");
  }
  if (j.contains("marginals")) d.marginals = j.at("marginals").get<std::vector<double>>();
  if (j.contains("descriptors")) {
    for (const auto& e : j.at("descriptors")) {
      if (!e.contains("tail") || !e.contains("head")) fail(ErrorCategory::Schema, "descriptor needs 'tail' and 'head'");
      const int t = e.at("tail").get<int>(), h = e.at("head").get<int>();
      const std::string where = "descriptor (" + std::to_string(t) + "," + std::to_string(h) + ")";
      if (t < 0 || t >= n || h < 0 || h >= n) fail(ErrorCategory::Schema, where + ": class index out of range");
      d.descriptors[{t, h}] = entry_model_from_json(e, where);
    }
  }
  return d;
}

}  // namespace mcrf
