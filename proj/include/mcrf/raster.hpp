#pragma once

// Raster and sample-point data model, class bookkeeping, random sampling and
// a synthetic reference-map generator.
//
// Grid convention: row 0 is the BOTTOM row, so (row, col) grows north/east
// from the lower-left origin. ASCII grid files list rows top-down; the
// reader/writer in io.hpp performs the flip.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcrf/error.hpp"
#include "mcrf/rng.hpp"

namespace mcrf {

using ClassId = std::int32_t;

/// Cell with no value (outside the study area).
inline constexpr ClassId kNoData = -1;
/// Cell awaiting simulation; only ever present inside the engine.
inline constexpr ClassId kUnsimulated = -2;

enum class ClassRole { Major, Moderate, Minor };

inline const char* to_string(ClassRole r) {
  switch (r) {
    case ClassRole::Major: return "major";
    case ClassRole::Moderate: return "moderate";
    case ClassRole::Minor: return "minor";
  }
  return "major";
}

inline ClassRole class_role_from_string(const std::string& s) {
  if (s == "major") return ClassRole::Major;
  if (s == "moderate") return ClassRole::Moderate;
  if (s == "minor") return ClassRole::Minor;
  fail(ErrorCategory::Schema, "unknown class role '" + s + "'");
}

struct ClassInfo {
  ClassId id = 0;
  std::string name;
  ClassRole role = ClassRole::Major;
};

/// Dense class table, ids 0..n-1.
class ClassCatalog {
 public:
  ClassCatalog() = default;
  explicit ClassCatalog(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i].id != static_cast<ClassId>(i))
        fail(ErrorCategory::Schema, "class ids must be dense 0..n-1; entry " + std::to_string(i) +
                                        " has id " + std::to_string(classes_[i].id));
    }
  }

  /// Unnamed catalog with every class marked major.
  static ClassCatalog anonymous(int n_classes) {
    std::vector<ClassInfo> v;
    for (int i = 0; i < n_classes; ++i) v.push_back({i, "class_" + std::to_string(i + 1), ClassRole::Major});
    return ClassCatalog(std::move(v));
  }

  int size() const { return static_cast<int>(classes_.size()); }
  const ClassInfo& operator[](ClassId id) const { return classes_.at(static_cast<std::size_t>(id)); }
  std::span<const ClassInfo> classes() const { return classes_; }

  std::vector<ClassRole> roles() const {
    std::vector<ClassRole> r;
    for (const auto& c : classes_) r.push_back(c.role);
    return r;
  }

 private:
  std::vector<ClassInfo> classes_;
};

struct GridGeometry {
  int nrows = 0;
  int ncols = 0;
  double cell_size = 1.0;
  double origin_x = 0.0;  ///< ground x of the lower-left corner
  double origin_y = 0.0;  ///< ground y of the lower-left corner

  std::size_t cell_count() const { return static_cast<std::size_t>(nrows) * static_cast<std::size_t>(ncols); }

  void check() const {
    if (nrows <= 0 || ncols <= 0)
      fail(ErrorCategory::Argument, "grid dimensions must be positive (" + std::to_string(nrows) + "x" +
                                        std::to_string(ncols) + ")");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
      fail(ErrorCategory::Argument, "cell_size must be positive");
  }

  bool operator==(const GridGeometry&) const = default;
};

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

/// Rectangular grid of class labels (or kNoData), stored row-major with row 0
/// at the bottom.
class Raster {
 public:
  Raster() = default;

  explicit Raster(GridGeometry geometry, ClassId fill = kNoData)
      : geometry_(geometry), labels_((geometry.check(), geometry.cell_count()), fill) {}

  Raster(GridGeometry geometry, std::vector<ClassId> labels) : geometry_(geometry), labels_(std::move(labels)) {
    geometry_.check();
    if (labels_.size() != geometry_.cell_count())
      fail(ErrorCategory::Argument, "label array has " + std::to_string(labels_.size()) + " values, expected " +
                                        std::to_string(geometry_.cell_count()));
  }

  const GridGeometry& geometry() const { return geometry_; }
  int nrows() const { return geometry_.nrows; }
  int ncols() const { return geometry_.ncols; }
  double cell_size() const { return geometry_.cell_size; }
  std::size_t size() const { return labels_.size(); }

  bool contains(int row, int col) const { return row >= 0 && row < nrows() && col >= 0 && col < ncols(); }

  std::size_t index(int row, int col) const {
    if (!contains(row, col))
      fail(ErrorCategory::Index, "cell (" + std::to_string(row) + ", " + std::to_string(col) + ") outside " +
                                     std::to_string(nrows()) + "x" + std::to_string(ncols()) + " grid");
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols()) + static_cast<std::size_t>(col);
  }

  CellIndex cell(std::size_t index) const {
    return {static_cast<int>(index / static_cast<std::size_t>(ncols())),
            static_cast<int>(index % static_cast<std::size_t>(ncols()))};
  }

  ClassId at(int row, int col) const { return labels_[index(row, col)]; }
  void set(int row, int col, ClassId label) { labels_[index(row, col)] = label; }

  // Unchecked flat access for hot loops.
  ClassId operator[](std::size_t i) const { return labels_[i]; }
  ClassId& operator[](std::size_t i) { return labels_[i]; }

  std::span<const ClassId> labels() const { return labels_; }

  /// Largest label + 1 (0 if the raster has no labelled cells).
  int max_class_count() const {
    ClassId m = -1;
    for (auto v : labels_) m = std::max(m, v);
    return m + 1;
  }

  std::size_t labelled_count() const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](ClassId v) { return v >= 0; }));
  }

  /// Throws a data error if any label falls outside [0, n_classes).
  void check_classes(int n_classes) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const ClassId v = labels_[i];
      if (v != kNoData && (v < 0 || v >= n_classes)) {
        const auto c = cell(i);
        fail(ErrorCategory::Data, "label " + std::to_string(v) + " at cell (" + std::to_string(c.row) + ", " +
                                      std::to_string(c.col) + ") is not a class in [0, " +
                                      std::to_string(n_classes) + ")");
      }
    }
  }

  bool operator==(const Raster&) const = default;

 private:
  GridGeometry geometry_;
  std::vector<ClassId> labels_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Ground coordinates of the centre of (row, col); row 0 is the bottom row.
inline Point2 cell_center(const GridGeometry& g, int row, int col) {
  if (row < 0 || row >= g.nrows || col < 0 || col >= g.ncols)
    fail(ErrorCategory::Index, "cell (" + std::to_string(row) + ", " + std::to_string(col) + ") outside grid");
  return {g.origin_x + (col + 0.5) * g.cell_size, g.origin_y + (row + 0.5) * g.cell_size};
}

inline Point2 cell_center(const Raster& r, int row, int col) { return cell_center(r.geometry(), row, col); }

/// Cell containing a ground point, or nullopt outside the grid.
inline std::optional<CellIndex> cell_of(const GridGeometry& g, Point2 p) {
  const double fc = std::floor((p.x - g.origin_x) / g.cell_size);
  const double fr = std::floor((p.y - g.origin_y) / g.cell_size);
  if (fc < 0 || fr < 0 || fc >= g.ncols || fr >= g.nrows) return std::nullopt;
  return CellIndex{static_cast<int>(fr), static_cast<int>(fc)};
}

struct SamplePoint {
  double x = 0.0;
  double y = 0.0;
  ClassId cls = 0;
  bool operator==(const SamplePoint&) const = default;
};

/// Point observations. Coordinates are unique; classes lie in [0, n_classes).
class SampleSet {
 public:
  SampleSet() = default;

  SampleSet(std::vector<SamplePoint> points, int n_classes) : points_(std::move(points)), n_classes_(n_classes) {
    if (n_classes_ <= 0) fail(ErrorCategory::Argument, "n_classes must be positive");
    std::set<std::pair<double, double>> seen;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.cls < 0 || p.cls >= n_classes_)
        fail(ErrorCategory::Data, "sample " + std::to_string(i) + " has class " + std::to_string(p.cls) +
                                      " outside [0, " + std::to_string(n_classes_) + ")");
      if (!seen.emplace(p.x, p.y).second)
        fail(ErrorCategory::Data, "sample " + std::to_string(i) + " duplicates coordinates of an earlier point");
    }
  }

  std::span<const SamplePoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int n_classes() const { return n_classes_; }
  const SamplePoint& operator[](std::size_t i) const { return points_[i]; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes_), 0);
    for (const auto& p : points_) ++counts[static_cast<std::size_t>(p.cls)];
    return counts;
  }

  /// Classes that have no sample at all (permitted, but worth flagging).
  std::vector<ClassId> empty_classes() const {
    std::vector<ClassId> out;
    const auto counts = class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
      if (counts[k] == 0) out.push_back(static_cast<ClassId>(k));
    return out;
  }

  bool operator==(const SampleSet&) const = default;

 private:
  std::vector<SamplePoint> points_;
  int n_classes_ = 0;
};

/// Class proportions: nonnegative, summing to one.
class ProportionVector {
 public:
  ProportionVector() = default;

  explicit ProportionVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) fail(ErrorCategory::Argument, "proportion vector is empty");
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCategory::Argument, "proportions must be finite and >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      fail(ErrorCategory::Argument, "proportions sum to " + std::to_string(sum) + ", not 1");
  }

  /// Normalizes arbitrary nonnegative weights.
  static ProportionVector from_weights(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v;
    if (!(s > 0.0)) fail(ErrorCategory::Argument, "weights sum to zero");
    std::vector<double> p(w.begin(), w.end());
    for (double& v : p) v /= s;
    return ProportionVector(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t k) const { return p_[k]; }
  std::span<const double> values() const { return p_; }

  bool operator==(const ProportionVector&) const = default;

 private:
  std::vector<double> p_;
};

inline ProportionVector class_proportions(const SampleSet& samples) {
  if (samples.empty()) fail(ErrorCategory::EmptyInput, "cannot compute proportions of an empty sample set");
  const auto counts = samples.class_counts();
  std::vector<double> p(counts.size());
  const double total = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = static_cast<double>(counts[k]) / total;
  return ProportionVector(std::move(p));
}

/// Suggested role when the user has not declared one: minor below 5%.
inline ClassRole suggest_role(double proportion) {
  return proportion < 0.05 ? ClassRole::Minor : ClassRole::Major;
}

/// Draws n distinct labelled cells uniformly without replacement; points sit
/// at cell centres. The first n entries of a seeded Fisher-Yates pass over
/// the labelled cells (in index order) are taken.
inline SampleSet random_sample(const Raster& reference, std::size_t n, std::uint64_t seed, int n_classes = 0) {
  std::vector<std::size_t> cells;
  cells.reserve(reference.size());
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (reference[i] >= 0) cells.push_back(i);
  if (n > cells.size())
    fail(ErrorCategory::Capacity, "requested " + std::to_string(n) + " samples but only " +
                                      std::to_string(cells.size()) + " labelled cells exist");
  if (n_classes <= 0) n_classes = reference.max_class_count();

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(cells.size() - i));
    std::swap(cells[i], cells[j]);
  }
  std::vector<SamplePoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = reference.cell(cells[i]);
    const auto p = cell_center(reference, c.row, c.col);
    pts.push_back({p.x, p.y, reference[cells[i]]});
  }
  return SampleSet(std::move(pts), n_classes);
}

/// Patchy class mosaic: n_seeds sites at uniform random positions, each with
/// a class drawn from `class_weights`; every cell takes the class of its
/// nearest site (lowest site index on ties).
inline Raster generate_blob_reference(int nrows, int ncols, int n_classes, const ProportionVector& class_weights,
                                      int n_seeds, std::uint64_t seed, double cell_size = 1.0) {
  if (nrows <= 0 || ncols <= 0) fail(ErrorCategory::Argument, "grid dimensions must be positive");
  if (n_classes <= 0) fail(ErrorCategory::Argument, "n_classes must be positive");
  if (class_weights.size() != static_cast<std::size_t>(n_classes))
    fail(ErrorCategory::Argument, "class_weights length differs from n_classes");
  if (n_seeds < 1) fail(ErrorCategory::Argument, "n_seeds must be at least 1");

  Rng rng(seed);
  struct Site {
    double r, c;
    ClassId cls;
  };
  std::vector<Site> sites;
  sites.reserve(static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < n_seeds; ++s) {
    const double r = rng.uniform01() * nrows;
    const double c = rng.uniform01() * ncols;
    const double u = rng.uniform01();
    ClassId cls = n_classes - 1;
    double acc = 0.0;
    for (int k = 0; k < n_classes; ++k) {
      acc += class_weights[static_cast<std::size_t>(k)];
      if (u < acc && class_weights[static_cast<std::size_t>(k)] > 0.0) {
        cls = k;
        break;
      }
    }
    while (class_weights[static_cast<std::size_t>(cls)] <= 0.0) --cls;
    sites.push_back({r, c, cls});
  }

  Raster out(GridGeometry{nrows, ncols, cell_size, 0.0, 0.0}, kNoData);
  for (int row = 0; row < nrows; ++row) {
    for (int col = 0; col < ncols; ++col) {
      const double pr = row + 0.5, pc = col + 0.5;
      double best = std::numeric_limits<double>::infinity();
      ClassId cls = 0;
      for (const auto& s : sites) {
        const double d = (s.r - pr) * (s.r - pr) + (s.c - pc) * (s.c - pc);
        if (d < best) {
          best = d;
          cls = s.cls;
        }
      }
      out.set(row, col, cls);
    }
  }
  return out;
}

/// Per-class share of labelled cells.
inline std::vector<double> raster_proportions(const Raster& r, int n_classes) {
  std::vector<double> p(static_cast<std::size_t>(n_classes), 0.0);
  std::size_t total = 0;
  for (auto v : r.labels()) {
    if (v < 0) continue;
    if (v >= n_classes) fail(ErrorCategory::Data, "label " + std::to_string(v) + " exceeds class count");
    p[static_cast<std::size_t>(v)] += 1.0;
    ++total;
  }
  if (total == 0) fail(ErrorCategory::EmptyInput, "raster has no labelled cells");
  for (double& v : p) v /= static_cast<double>(total);
  return p;
}

}  // namespace mcrf
