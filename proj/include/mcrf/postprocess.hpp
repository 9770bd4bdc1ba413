#pragma once

// Ensemble summaries: occurrence probabilities, optimal maps, accuracy and
// class-proportion tables, patch counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcrf/engine.hpp"
#include "mcrf/error.hpp"
#include "mcrf/format.hpp"
#include "mcrf/raster.hpp"

namespace mcrf {

inline void check_same_geometry(const Raster& a, const Raster& b, const std::string& what) {
  if (a.geometry() != b.geometry()) fail(ErrorCategory::Data, what + ": raster geometries differ");
}

/// Per-class occurrence frequencies across realizations. NODATA cells carry
/// zero counts and are skipped by consumers.
class ProbabilityCube {
 public:
  ProbabilityCube(GridGeometry g, int n_classes, std::size_t n_real)
      : geometry_(g),
        n_classes_(n_classes),
        n_real_(n_real),
        counts_(static_cast<std::size_t>(n_classes) * g.cell_count(), 0),
        mask_(g.cell_count(), 0) {}

  const GridGeometry& geometry() const { return geometry_; }
  int n_classes() const { return n_classes_; }
  std::size_t n_real() const { return n_real_; }
  std::size_t cell_count() const { return mask_.size(); }
  bool has_data(std::size_t cell) const { return mask_[cell] != 0; }

  std::uint32_t count(int k, std::size_t cell) const { return counts_[index(k, cell)]; }
  double q(int k, std::size_t cell) const {
    return static_cast<double>(count(k, cell)) / static_cast<double>(n_real_);
  }

  void add(int k, std::size_t cell) {
    ++counts_[index(k, cell)];
    mask_[cell] = 1;
  }

  /// Probability grid of one class, NODATA cells as NaN.
  std::vector<double> layer(int k) const {
    std::vector<double> out(cell_count(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < cell_count(); ++c)
      if (has_data(c)) out[c] = q(k, c);
    return out;
  }

 private:
  std::size_t index(int k, std::size_t cell) const {
    return static_cast<std::size_t>(k) * mask_.size() + cell;
  }

  GridGeometry geometry_;
  int n_classes_;
  std::size_t n_real_;
  std::vector<std::uint32_t> counts_;
  std::vector<char> mask_;
};

inline ProbabilityCube occurrence_probability(std::span<const Raster> realizations, int n_classes) {
  if (realizations.empty()) fail(ErrorCategory::EmptyInput, "ensemble has no realizations");
  const auto& first = realizations.front();
  ProbabilityCube cube(first.geometry(), n_classes, realizations.size());
  for (const auto& r : realizations) {
    check_same_geometry(first, r, "occurrence_probability");
    for (std::size_t c = 0; c < r.size(); ++c) {
      const ClassId v = r[c];
      if (v < 0) continue;
      if (v >= n_classes) fail(ErrorCategory::Data, "label " + std::to_string(v) + " exceeds class count");
      cube.add(v, c);
    }
  }
  return cube;
}

inline ProbabilityCube occurrence_probability(const Ensemble& ens, int n_classes) {
  return occurrence_probability(std::span<const Raster>(ens.realizations), n_classes);
}

/// Per-cell most frequent class; ties go to the smallest class id.
inline Raster optimal_map(const ProbabilityCube& cube) {
  Raster out(cube.geometry(), kNoData);
  for (std::size_t c = 0; c < cube.cell_count(); ++c) {
    if (!cube.has_data(c)) continue;
    int best = 0;
    for (int k = 1; k < cube.n_classes(); ++k)
      if (cube.count(k, c) > cube.count(best, c)) best = k;
    out[c] = best;
  }
  return out;
}

enum class DenominatorPolicy { AllCells, ExcludeSamples };

inline const char* to_string(DenominatorPolicy p) {
  return p == DenominatorPolicy::AllCells ? "all_cells" : "exclude_samples";
}

inline DenominatorPolicy denominator_policy_from_string(const std::string& s) {
  if (s == "all_cells") return DenominatorPolicy::AllCells;
  if (s == "exclude_samples") return DenominatorPolicy::ExcludeSamples;
  fail(ErrorCategory::Argument, "unknown denominator policy '" + s + "' (expected all_cells or exclude_samples)");
}

/// Percent correct, overall and per reference class (producer's accuracy).
/// Classes absent from the evaluated reference cells get NaN.
struct AccuracyReport {
  double overall = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> class_cells;  ///< evaluated reference cells per class
  std::size_t evaluated = 0;
  DenominatorPolicy policy = DenominatorPolicy::ExcludeSamples;
};

inline AccuracyReport accuracy(const Raster& map, const Raster& reference, const SampleSet& samples,
                               DenominatorPolicy policy, int n_classes) {
  check_same_geometry(map, reference, "accuracy");
  std::vector<char> skip(reference.size(), 0);
  if (policy == DenominatorPolicy::ExcludeSamples) {
    for (const auto& p : samples.points())
      if (auto c = cell_of(reference.geometry(), {p.x, p.y})) skip[reference.index(c->row, c->col)] = 1;
  }
  AccuracyReport rep;
  rep.policy = policy;
  rep.class_cells.assign(static_cast<std::size_t>(n_classes), 0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(n_classes), 0);
  std::size_t total_correct = 0;
  for (std::size_t c = 0; c < reference.size(); ++c) {
    const ClassId ref = reference[c];
    if (ref < 0 || skip[c]) continue;
    if (ref >= n_classes) fail(ErrorCategory::Data, "reference label exceeds class count");
    ++rep.class_cells[static_cast<std::size_t>(ref)];
    ++rep.evaluated;
    if (map[c] == ref) {
      ++correct[static_cast<std::size_t>(ref)];
      ++total_correct;
    }
  }
  if (rep.evaluated == 0) fail(ErrorCategory::EmptyInput, "no reference cells to evaluate");
  rep.overall = 100.0 * static_cast<double>(total_correct) / static_cast<double>(rep.evaluated);
  for (int k = 0; k < n_classes; ++k) {
    const auto n = rep.class_cells[static_cast<std::size_t>(k)];
    rep.per_class.push_back(n == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : 100.0 * static_cast<double>(correct[static_cast<std::size_t>(k)]) / static_cast<double>(n));
  }
  return rep;
}

/// Mean of per-realization accuracies (overall and per class).
inline AccuracyReport mean_accuracy(std::span<const Raster> realizations, const Raster& reference,
                                    const SampleSet& samples, DenominatorPolicy policy, int n_classes) {
  if (realizations.empty()) fail(ErrorCategory::EmptyInput, "ensemble has no realizations");
  AccuracyReport mean;
  for (std::size_t r = 0; r < realizations.size(); ++r) {
    const auto rep = accuracy(realizations[r], reference, samples, policy, n_classes);
    if (r == 0) {
      mean = rep;
      continue;
    }
    mean.overall += rep.overall;
    for (std::size_t k = 0; k < rep.per_class.size(); ++k) mean.per_class[k] += rep.per_class[k];
  }
  const auto n = static_cast<double>(realizations.size());
  mean.overall /= n;
  for (auto& v : mean.per_class) v /= n;
  return mean;
}

/// Class proportions in percent of labelled cells.
inline std::vector<double> proportions_percent(const Raster& r, int n_classes) {
  auto p = raster_proportions(r, n_classes);
  for (auto& v : p) v *= 100.0;
  return p;
}

inline std::vector<double> proportions_percent(const SampleSet& s) {
  const auto p = class_proportions(s);
  std::vector<double> out(p.values().begin(), p.values().end());
  for (auto& v : out) v *= 100.0;
  return out;
}

/// Mean class proportions (percent) over realizations.
inline std::vector<double> proportions_percent(std::span<const Raster> realizations, int n_classes) {
  if (realizations.empty()) fail(ErrorCategory::EmptyInput, "ensemble has no realizations");
  std::vector<double> acc(static_cast<std::size_t>(n_classes), 0.0);
  for (const auto& r : realizations) {
    const auto p = proportions_percent(r, n_classes);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  for (auto& v : acc) v /= static_cast<double>(realizations.size());
  return acc;
}

struct ReportRow {
  std::string group;   ///< e.g. dataset name, empty for the reference row
  std::string label;   ///< e.g. "Reference map", "Sample data", method name
  double overall = std::numeric_limits<double>::quiet_NaN();  ///< accuracy tables only
  std::vector<double> values;
};

/// Method x class grid of percentages. Written as CSV with fixed 2-decimal
/// values; NaN becomes an empty field.
struct ReportTable {
  int n_classes = 0;
  bool with_overall = false;
  std::vector<ReportRow> rows;

  void write_csv(std::ostream& os) const {
    os << "group,row";
    if (with_overall) os << ",overall";
    for (int k = 0; k < n_classes; ++k) os << ",class_" << k;
    os << '\n';
    auto cell = [&](double v) {
      if (!std::isnan(v)) os << format_fixed(v, 2);
    };
    for (const auto& r : rows) {
      os << r.group << ',' << r.label;
      if (with_overall) {
        os << ',';
        cell(r.overall);
      }
      for (double v : r.values) {
        os << ',';
        cell(v);
      }
      os << '\n';
    }
  }
};

/// Proportion table: reference row (when given), sample row, then one row per
/// named map or ensemble.
struct NamedRealizations {
  std::string label;
  std::span<const Raster> rasters;
};

inline ReportTable proportion_report(const Raster* reference, const SampleSet& samples,
                                     std::span<const NamedRealizations> runs, const std::string& group = {}) {
  const int n = samples.n_classes();
  ReportTable t;
  t.n_classes = n;
  if (reference) t.rows.push_back({"", "Reference map", std::numeric_limits<double>::quiet_NaN(), proportions_percent(*reference, n)});
  t.rows.push_back({group, "Sample data", std::numeric_limits<double>::quiet_NaN(), proportions_percent(samples)});
  for (const auto& run : runs)
    t.rows.push_back({group, run.label, std::numeric_limits<double>::quiet_NaN(), proportions_percent(run.rasters, n)});
  return t;
}

/// Number of 4-connected same-label patches (NODATA ignored).
inline std::size_t count_patches(const Raster& r) {
  std::vector<char> seen(r.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t patches = 0;
  const int nr = r.nrows(), nc = r.ncols();
  for (std::size_t start = 0; start < r.size(); ++start) {
    if (seen[start] || r[start] < 0) continue;
    ++patches;
    const ClassId label = r[start];
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      const int row = static_cast<int>(c / static_cast<std::size_t>(nc));
      const int col = static_cast<int>(c % static_cast<std::size_t>(nc));
      const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int rr = row + dr[d], cc = col + dc[d];
        if (rr < 0 || rr >= nr || cc < 0 || cc >= nc) continue;
        const auto n = static_cast<std::size_t>(rr) * static_cast<std::size_t>(nc) + static_cast<std::size_t>(cc);
        if (!seen[n] && r[n] == label) {
          seen[n] = 1;
          stack.push_back(n);
        }
      }
    }
  }
  return patches;
}

}  // namespace mcrf
