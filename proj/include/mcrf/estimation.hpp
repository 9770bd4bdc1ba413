#pragma once

// Omnidirectional experimental transiograms.
//
// Every ordered pair of distinct points (a, b) whose separation falls in lag
// bin k adds one transition class(a) -> class(b) to F(k). Both orientations
// of a pair are counted, so F_ij(k) == F_ji(k) always holds. Transition
// probabilities are F row-normalized per tail class and bin.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcrf/error.hpp"
#include "mcrf/format.hpp"
#include "mcrf/raster.hpp"

namespace mcrf {

/// Lag bins [k*w - w/2, k*w + w/2) for k = 1..floor(max_lag / w). Lags are in
/// pixel lengths; `pixel_size` converts ground distances.
struct LagBinSpec {
  double bin_width = 1.0;
  double max_lag = 1.0;
  double pixel_size = 1.0;

  void check() const {
    if (!(bin_width > 0.0)) fail(ErrorCategory::Argument, "bin_width must be positive");
    if (!(max_lag >= bin_width)) fail(ErrorCategory::Argument, "max_lag must be at least bin_width");
    if (!(pixel_size > 0.0)) fail(ErrorCategory::Argument, "pixel_size must be positive");
  }

  int bin_count() const { return static_cast<int>(std::floor(max_lag / bin_width + 1e-12)); }
  double center(int k) const { return k * bin_width; }

  /// 1-based bin of a lag, or 0 when it falls outside every bin.
  int bin_of(double lag) const {
    const double w = bin_width;
    auto k = static_cast<long long>(std::floor(lag / w + 0.5));
    // Settle floating-point edge cases against the literal interval bounds.
    if (lag < (static_cast<double>(k) - 0.5) * w) --k;
    else if (lag >= (static_cast<double>(k) + 0.5) * w) ++k;
    if (k < 1 || k > bin_count()) return 0;
    return static_cast<int>(k);
  }
};

struct Knot {
  double lag = 0.0;
  double value = 0.0;
  bool operator==(const Knot&) const = default;
};

class ExperimentalTransiogramMatrix {
 public:
  ExperimentalTransiogramMatrix() = default;

  /// Empty matrix with zero counts (every probability missing).
  ExperimentalTransiogramMatrix(int n_classes, std::vector<double> lags)
      : n_(n_classes),
        lags_(std::move(lags)),
        counts_(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_) * lags_.size(), 0),
        tail_totals_(static_cast<std::size_t>(n_) * lags_.size(), 0),
        prob_(counts_.size(), std::numeric_limits<double>::quiet_NaN()) {}

  int n_classes() const { return n_; }
  int bin_count() const { return static_cast<int>(lags_.size()); }
  std::span<const double> lags() const { return lags_; }
  double lag(int bin) const { return lags_[static_cast<std::size_t>(bin)]; }

  std::uint64_t count(int tail, int head, int bin) const { return counts_[at(tail, head, bin)]; }
  std::uint64_t tail_total(int tail, int bin) const {
    return tail_totals_[static_cast<std::size_t>(tail) * lags_.size() + static_cast<std::size_t>(bin)];
  }

  bool missing(int tail, int head, int bin) const { return std::isnan(prob_[at(tail, head, bin)]); }

  /// p̂_ij at bin, or nullopt when the tail class has no pairs there.
  std::optional<double> probability(int tail, int head, int bin) const {
    const double v = prob_[at(tail, head, bin)];
    if (std::isnan(v)) return std::nullopt;
    return v;
  }

  /// Defined (lag, p̂) pairs of one entry, in lag order.
  std::vector<Knot> knots(int tail, int head) const {
    std::vector<Knot> out;
    for (int b = 0; b < bin_count(); ++b)
      if (auto p = probability(tail, head, b)) out.push_back({lag(b), *p});
    return out;
  }

  void add_count(int tail, int head, int bin, std::uint64_t n = 1) {
    counts_[at(tail, head, bin)] += n;
    tail_totals_[static_cast<std::size_t>(tail) * lags_.size() + static_cast<std::size_t>(bin)] += n;
  }

  /// Recomputes probabilities from counts; MISSING where the tail total is 0.
  void normalize() {
    for (int i = 0; i < n_; ++i)
      for (int b = 0; b < bin_count(); ++b) {
        const auto total = tail_total(i, b);
        for (int j = 0; j < n_; ++j)
          prob_[at(i, j, b)] = total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                          : static_cast<double>(count(i, j, b)) / static_cast<double>(total);
      }
  }

  /// Overrides a probability directly (hand-built matrices); nullopt = MISSING.
  void set_probability(int tail, int head, int bin, std::optional<double> p) {
    prob_[at(tail, head, bin)] = p ? *p : std::numeric_limits<double>::quiet_NaN();
  }

  bool operator==(const ExperimentalTransiogramMatrix& o) const {
    if (n_ != o.n_ || lags_ != o.lags_ || counts_ != o.counts_ || tail_totals_ != o.tail_totals_) return false;
    for (std::size_t i = 0; i < prob_.size(); ++i) {
      const bool a = std::isnan(prob_[i]), b = std::isnan(o.prob_[i]);
      if (a != b || (!a && prob_[i] != o.prob_[i])) return false;
    }
    return true;
  }

 private:
  std::size_t at(int tail, int head, int bin) const {
    if (tail < 0 || tail >= n_ || head < 0 || head >= n_ || bin < 0 || bin >= bin_count())
      fail(ErrorCategory::Index, "transiogram index (" + std::to_string(tail) + ", " + std::to_string(head) + ", " +
                                     std::to_string(bin) + ") out of range");
    return (static_cast<std::size_t>(tail) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(head)) *
               lags_.size() +
           static_cast<std::size_t>(bin);
  }

  int n_ = 0;
  std::vector<double> lags_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> tail_totals_;
  std::vector<double> prob_;
};

inline ExperimentalTransiogramMatrix estimate_experimental(const SampleSet& samples, const LagBinSpec& spec) {
  spec.check();
  if (samples.size() < 2) fail(ErrorCategory::EmptyInput, "need at least 2 sample points to estimate transiograms");

  std::vector<double> lags;
  for (int k = 1; k <= spec.bin_count(); ++k) lags.push_back(spec.center(k));
  ExperimentalTransiogramMatrix m(samples.n_classes(), std::move(lags));

  const auto pts = samples.points();
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double dx = pts[b].x - pts[a].x;
      const double dy = pts[b].y - pts[a].y;
      const double d = std::sqrt(dx * dx + dy * dy) / spec.pixel_size;
      const int k = spec.bin_of(d);
      if (k == 0) continue;
      m.add_count(pts[a].cls, pts[b].cls, k - 1);
      m.add_count(pts[b].cls, pts[a].cls, k - 1);
    }
  }
  m.normalize();
  return m;
}

/// max |p̂_ij p_i - p̂_ji p_j| over defined entries, with fixed proportions.
inline double reversibility_residual(const ExperimentalTransiogramMatrix& m, const ProportionVector& p) {
  double worst = 0.0;
  for (int b = 0; b < m.bin_count(); ++b)
    for (int i = 0; i < m.n_classes(); ++i)
      for (int j = 0; j < m.n_classes(); ++j) {
        const auto pij = m.probability(i, j, b);
        const auto pji = m.probability(j, i, b);
        if (!pij || !pji) continue;
        worst = std::max(worst, std::abs(*pij * p[static_cast<std::size_t>(i)] - *pji * p[static_cast<std::size_t>(j)]));
      }
  return worst;
}

/// Same residual, with p_i taken per bin as the tail-pair share F_i. / F..
inline double reversibility_residual(const ExperimentalTransiogramMatrix& m) {
  double worst = 0.0;
  for (int b = 0; b < m.bin_count(); ++b) {
    std::uint64_t all = 0;
    for (int i = 0; i < m.n_classes(); ++i) all += m.tail_total(i, b);
    if (all == 0) continue;
    for (int i = 0; i < m.n_classes(); ++i)
      for (int j = 0; j < m.n_classes(); ++j) {
        const auto pij = m.probability(i, j, b);
        const auto pji = m.probability(j, i, b);
        if (!pij || !pji) continue;
        const double pi = static_cast<double>(m.tail_total(i, b)) / static_cast<double>(all);
        const double pj = static_cast<double>(m.tail_total(j, b)) / static_cast<double>(all);
        worst = std::max(worst, std::abs(*pij * pi - *pji * pj));
      }
  }
  return worst;
}

/// CSV with columns tail,head,lag,count,probability (empty when MISSING).
/// Class ids are 0-based.
inline void write_experimental_csv(std::ostream& os, const ExperimentalTransiogramMatrix& m) {
  os << "tail,head,lag,count,probability\n";
  for (int i = 0; i < m.n_classes(); ++i)
    for (int j = 0; j < m.n_classes(); ++j)
      for (int b = 0; b < m.bin_count(); ++b) {
        os << i << ',' << j << ',' << format_double(m.lag(b)) << ',' << m.count(i, j, b) << ',';
        if (auto p = m.probability(i, j, b)) os << format_double(*p);
        os << '\n';
      }
}

}  // namespace mcrf
