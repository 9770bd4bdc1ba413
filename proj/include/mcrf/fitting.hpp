#pragma once

// Starting-point descriptors for the mathematical entries, and a repair loop
// that stretches ranges in rows that break the constraints. Stands in for the
// expert when no hand-fitted parameters exist.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/models.hpp"

namespace mcrf {

/// Geometric grid of candidate ranges, 1 .. 400 pixel lengths.
inline std::vector<double> default_range_candidates() {
  std::vector<double> out;
  for (double d = 1.0; d <= 400.0; d *= 1.04) out.push_back(d);
  return out;
}

/// Range minimizing the low-lag RMSE (all knots if none is that short).
/// Returns `fallback` when the entry has no knots.
inline double best_range(ModelKind kind, double sill, std::span<const Knot> knots, double low_lag_cutoff,
                         double fallback, const std::vector<double>& candidates = default_range_candidates()) {
  if (knots.empty()) return fallback;
  double best = fallback, best_err = std::numeric_limits<double>::infinity();
  for (double d : candidates) {
    const auto desc = ModelDescriptor::basic(kind, sill, d);
    const auto s = fit_rmse(desc, knots, low_lag_cutoff);
    const double e = s.rmse_low ? *s.rmse_low : s.rmse_all;
    if (e < best_err) {
      best_err = e;
      best = d;
    }
  }
  return best;
}

/// Exponential descriptor for every entry, sill = head proportion, range by
/// best_range. Entries with a zero head proportion are skipped.
inline std::map<EntryKey, EntryModel> suggest_exponential_descriptors(const ExperimentalTransiogramMatrix& exp,
                                                                      const ProportionVector& marginals,
                                                                      double low_lag_cutoff) {
  std::map<EntryKey, EntryModel> out;
  const int n = exp.n_classes();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double c = marginals[static_cast<std::size_t>(j)];
      if (!(c > 0.0) || !(c < 1.0)) continue;
      EntryModel m;
      m.kind = i == j ? ModelKind::ExponentialAuto : ModelKind::ExponentialCross;
      m.sill = c;
      const auto knots = exp.knots(i, j);
      m.range = best_range(m.kind, c, knots, low_lag_cutoff, low_lag_cutoff);
      out[{i, j}] = m;
    }
  return out;
}

/// Scales every range of row `tail` by one common factor so that the row,
/// its closure entry included, best matches the experimental knots up to
/// `low_lag_cutoff`. Entries missing from `descriptors` are left alone.
inline double refine_row_ranges(std::map<EntryKey, EntryModel>& descriptors, const ExperimentalTransiogramMatrix& exp,
                                int tail, ClassId rest_head, double low_lag_cutoff) {
  const int n = exp.n_classes();
  bool any = false;
  for (int b = 0; b < exp.bin_count(); ++b) any = any || (exp.lag(b) <= low_lag_cutoff && !exp.missing(tail, 0, b));
  if (!any) return 1.0;
  std::vector<ModelDescriptor> row(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    if (j == rest_head) continue;
    const auto it = descriptors.find({tail, j});
    if (it == descriptors.end() || !it->second.sill) return 1.0;
    const auto& m = it->second;
    row[static_cast<std::size_t>(j)] = ModelDescriptor::basic(m.kind, *m.sill, m.range);
    if (is_gamma(m.kind)) return 1.0;
  }
  auto error = [&](double s) {
    double e = 0.0;
    for (std::size_t b = 0; b < static_cast<std::size_t>(exp.bin_count()); ++b) {
      const double h = exp.lag(static_cast<int>(b));
      if (h > low_lag_cutoff || exp.missing(tail, 0, static_cast<int>(b))) continue;
      double others = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == rest_head) continue;
        auto d = row[static_cast<std::size_t>(j)];
        d.range *= s;
        const double v = evaluate(d, h);
        others += v;
        const double r = v - *exp.probability(tail, j, static_cast<int>(b));
        e += r * r;
      }
      const double r = (1.0 - others) - *exp.probability(tail, rest_head, static_cast<int>(b));
      e += r * r;
    }
    return e;
  };
  double best = 1.0, best_e = error(1.0);
  for (double s = 0.25; s <= 4.0; s *= 1.02) {
    const double e = error(s);
    if (e < best_e) {
      best_e = e;
      best = s;
    }
  }
  for (int j = 0; j < n; ++j)
    if (j != rest_head) descriptors[{tail, j}].range *= best;
  return best;
}

struct RepairLog {
  int rounds = 0;
  std::vector<std::string> notes;
};

/// Builds and validates; while rows fail, first lifts each cross range in the
/// row to at least the auto range, then stretches the row's cross ranges by
/// 25% per round. Only entries taken from `in.descriptors` are touched, so a
/// failing row with no mathematical entries is a configuration error.
inline TransiogramModelSet build_valid_model_set(const ExperimentalTransiogramMatrix& exp, ModelSetInputs in,
                                                 double lag_max, ValidationReport* report = nullptr,
                                                 RepairLog* log = nullptr, int max_rounds = 60) {
  const int n = static_cast<int>(in.marginals.size());
  const auto rest = in.rest_heads.empty() ? default_rest_heads(in.marginals) : in.rest_heads;
  auto is_math = [&](int i, int j) {
    if (j == rest[static_cast<std::size_t>(i)]) return false;
    if (in.method == JointMethod::Linear) return false;
    if (in.method == JointMethod::Mathematical) return true;
    return in.roles[static_cast<std::size_t>(i)] == ClassRole::Minor || in.roles[static_cast<std::size_t>(j)] == ClassRole::Minor;
  };
  std::set<int> lifted;
  for (int round = 0;; ++round) {
    auto set = build_model_set(exp, in);
    auto rep = validate_model_set(set, lag_max);
    if (rep.valid || round == max_rounds) {
      if (report) *report = rep;
      if (log) log->rounds = round;
      if (!rep.valid)
        fail(ErrorCategory::Configuration, "model set still violates constraints after " + std::to_string(round) +
                                               " repair rounds (row " + std::to_string(rep.issues.front().tail) + ")");
      return set;
    }
    std::set<int> rows;
    for (const auto& is : rep.issues) rows.insert(is.tail);
    for (int i : rows) {
      bool touched = false;
      const auto auto_it = in.descriptors.find({i, i});
      const bool lift = !lifted.count(i) && is_math(i, i) && auto_it != in.descriptors.end();
      for (int j = 0; j < n; ++j) {
        if (j == i || !is_math(i, j)) continue;
        auto it = in.descriptors.find({i, j});
        if (it == in.descriptors.end()) continue;
        if (lift) it->second.range = std::max(it->second.range, auto_it->second.range);
        else it->second.range *= 1.25;
        touched = true;
      }
      if (!touched)
        fail(ErrorCategory::Configuration, "row " + std::to_string(i) +
                                               " violates constraints and has no mathematical cross entries to adjust");
      lifted.insert(i);
      if (log) log->notes.push_back("round " + std::to_string(round) + ": row " + std::to_string(i) +
                                    (lift ? " cross ranges lifted to the auto range" : " cross ranges stretched"));
    }
  }
}

}  // namespace mcrf
