#pragma once

// Markov chain random field simulation on a raster.
//
// The local conditional distribution at a cell u with quadrant neighbours
// l_1..l_m at lags h_1..h_m is
//
//   P(k) ∝ p_{l1,k}(h1) * prod_{i>=2} p_{k,li}(hi)
//
// where l_1 is the nearest neighbour. Cells are visited along a seeded random
// path and each drawn value immediately joins the conditioning data.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mcrf/error.hpp"
#include "mcrf/models.hpp"
#include "mcrf/raster.hpp"
#include "mcrf/rng.hpp"

namespace mcrf {

/// Quadrants by direction angle from target to datum (x east, y north):
/// 0 = [0, 90), 1 = [90, 180), 2 = [180, 270), 3 = [270, 360).
inline int quadrant_of(long dx, long dy) {
  if (dx > 0 && dy >= 0) return 0;
  if (dx <= 0 && dy > 0) return 1;
  if (dx < 0 && dy <= 0) return 2;
  return 3;  // dx >= 0 && dy < 0; (0, 0) never reaches here in practice
}

struct Neighbor {
  ClassId cls = 0;
  double lag = 0.0;        ///< pixel lengths
  int quadrant = 0;
  std::int64_t d2 = -1;    ///< squared lag in cells when on the grid, else -1
  CellIndex cell{};

  bool operator==(const Neighbor&) const = default;
};

/// At most one neighbour per quadrant, kept in quadrant order.
class Neighborhood {
 public:
  Neighborhood() = default;

  /// From an explicit list (tests, previews). Designates the minimum-lag
  /// entry, earliest in list order on ties.
  explicit Neighborhood(std::span<const Neighbor> list) {
    if (list.size() > 4) fail(ErrorCategory::Argument, "a quadrantal neighborhood holds at most 4 neighbors");
    for (const auto& n : list) push(n);
  }

  void push(const Neighbor& n) {
    items_[static_cast<std::size_t>(count_)] = n;
    if (count_ == 0 || n.lag < items_[static_cast<std::size_t>(designated_)].lag) designated_ = count_;
    ++count_;
  }

  int size() const { return count_; }
  bool empty() const { return count_ == 0; }
  int designated_from() const { return designated_; }
  const Neighbor& operator[](int i) const { return items_[static_cast<std::size_t>(i)]; }
  std::span<const Neighbor> items() const { return std::span<const Neighbor>(items_.data(), static_cast<std::size_t>(count_)); }

 private:
  std::array<Neighbor, 4> items_{};
  int count_ = 0;
  int designated_ = 0;
};

/// Nearest known cell (label >= 0) per quadrant within `radius` pixel
/// lengths, found by scanning square rings of growing Chebyshev radius.
///
/// A quadrant is settled once its best squared distance is below r^2 for the
/// next ring r, since no cell of ring r or beyond can be closer. Ties on
/// distance go to the lower (row, col).
inline Neighborhood find_neighbors(const Raster& grid, CellIndex target, double radius) {
  if (!(radius > 0.0)) fail(ErrorCategory::Argument, "search radius must be positive");
  constexpr auto kNone = std::numeric_limits<std::int64_t>::max();
  struct Best {
    std::int64_t d2 = kNone;
    int row = 0, col = 0;
    ClassId cls = 0;
  };
  std::array<Best, 4> best{};

  const double r2max = radius * radius;
  const int tr = target.row, tc = target.col;
  const int nrows = grid.nrows(), ncols = grid.ncols();
  const int grid_reach = std::max({tr, nrows - 1 - tr, tc, ncols - 1 - tc});
  const int max_ring = std::min(static_cast<int>(std::floor(radius)), grid_reach);

  auto consider = [&](int dr, int dc) {
    const int row = tr + dr, col = tc + dc;
    if (row < 0 || row >= nrows || col < 0 || col >= ncols) return;
    const ClassId label = grid[static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols) + static_cast<std::size_t>(col)];
    if (label < 0) return;
    const std::int64_t d2 = static_cast<std::int64_t>(dr) * dr + static_cast<std::int64_t>(dc) * dc;
    if (static_cast<double>(d2) > r2max) return;
    auto& b = best[static_cast<std::size_t>(quadrant_of(dc, dr))];
    if (d2 < b.d2 || (d2 == b.d2 && (row < b.row || (row == b.row && col < b.col)))) b = {d2, row, col, label};
  };

  for (int r = 1; r <= max_ring; ++r) {
    const std::int64_t r2 = static_cast<std::int64_t>(r) * r;
    if (std::all_of(best.begin(), best.end(), [&](const Best& b) { return b.d2 < r2; })) break;
    for (int dc = -r; dc <= r; ++dc) {
      consider(-r, dc);
      consider(r, dc);
    }
    for (int dr = -r + 1; dr <= r - 1; ++dr) {
      consider(dr, -r);
      consider(dr, r);
    }
  }

  Neighborhood out;
  for (int q = 0; q < 4; ++q) {
    const auto& b = best[static_cast<std::size_t>(q)];
    if (b.d2 == kNone) continue;
    out.push({b.cls, std::sqrt(static_cast<double>(b.d2)), q, b.d2, {b.row, b.col}});
  }
  return out;
}

/// Pre-evaluated model rows at every squared integer lag 0..floor(radius^2),
/// clamped and renormalized. Grid lags are always sqrt of an integer, so
/// lookups are exact.
class LagTable {
 public:
  LagTable(const TransiogramModelSet& set, double radius, double lag_scale = 1.0)
      : n_(set.n_classes()), lag_scale_(lag_scale), marginals_(set.marginals().values().begin(), set.marginals().values().end()) {
    if (!(radius > 0.0)) fail(ErrorCategory::Argument, "search radius must be positive");
    if (!(lag_scale > 0.0)) fail(ErrorCategory::Argument, "lag scale must be positive");
    if (!set.validated()) fail(ErrorCategory::Configuration, "model set has not been validated");
    if (set.validated_lag_max() + 1e-9 < radius * lag_scale)
      fail(ErrorCategory::Configuration, "model set validated to lag " + std::to_string(set.validated_lag_max()) +
                                             " but the search radius needs " + std::to_string(radius * lag_scale));
    max_d2_ = static_cast<std::int64_t>(std::floor(radius * radius + 1e-9));
    const auto nn = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    values_.resize(static_cast<std::size_t>(max_d2_ + 1) * nn);
    for (std::int64_t d2 = 0; d2 <= max_d2_; ++d2) {
      const double h = lag_scale * std::sqrt(static_cast<double>(d2));
      for (int i = 0; i < n_; ++i)
        set.row_probabilities(i, h, std::span<double>(values_).subspan(static_cast<std::size_t>(d2) * nn +
                                                                         static_cast<std::size_t>(i) * static_cast<std::size_t>(n_),
                                                                     static_cast<std::size_t>(n_)));
    }
  }

  int n_classes() const { return n_; }
  double marginal(int k) const { return marginals_[static_cast<std::size_t>(k)]; }
  std::span<const double> marginals() const { return marginals_; }
  std::int64_t max_d2() const { return max_d2_; }

  double at(int tail, int head, std::int64_t d2) const {
    if (d2 < 0 || d2 > max_d2_) fail(ErrorCategory::Configuration, "squared lag " + std::to_string(d2) + " outside lag table");
    return values_[(static_cast<std::size_t>(d2) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(tail)) *
                       static_cast<std::size_t>(n_) +
                   static_cast<std::size_t>(head)];
  }

 private:
  int n_ = 0;
  double lag_scale_ = 1.0;
  std::int64_t max_d2_ = 0;
  std::vector<double> marginals_;
  std::vector<double> values_;
};

inline double transition(const TransiogramModelSet& s, int tail, int head, const Neighbor& nb) {
  return s.probability(tail, head, nb.lag);
}

inline double transition(const LagTable& t, int tail, int head, const Neighbor& nb) { return t.at(tail, head, nb.d2); }

/// Anything that supplies p_ij at a neighbour's lag plus class marginals.
template <class S>
concept TransitionSource = requires(const S& s, int i, int j, const Neighbor& nb) {
  { s.n_classes() } -> std::convertible_to<int>;
  { s.marginal(i) } -> std::convertible_to<double>;
  { transition(s, i, j, nb) } -> std::convertible_to<double>;
};

struct ConditionalDistribution {
  std::vector<double> probs;
  bool fallback = false;  ///< every numerator was zero; marginals used
};

/// Writes the normalized distribution into `out`; returns true when every
/// numerator vanished and the marginals were substituted.
template <TransitionSource S>
bool local_cpd_into(const Neighborhood& neigh, const S& src, std::span<double> out) {
  if (neigh.empty()) fail(ErrorCategory::Argument, "local_cpd needs at least one neighbor");
  const int n = src.n_classes();
  const auto& from = neigh[neigh.designated_from()];
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    double v = transition(src, from.cls, k, from);
    for (int i = 0; i < neigh.size() && v > 0.0; ++i) {
      if (i == neigh.designated_from()) continue;
      v *= transition(src, k, neigh[i].cls, neigh[i]);
    }
    out[static_cast<std::size_t>(k)] = v;
    total += v;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = src.marginal(k);
    return true;
  }
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] /= total;
  return false;
}

template <TransitionSource S>
ConditionalDistribution local_cpd(const Neighborhood& neigh, const S& src) {
  ConditionalDistribution d;
  d.probs.resize(static_cast<std::size_t>(src.n_classes()));
  d.fallback = local_cpd_into(neigh, src, d.probs);
  return d;
}

/// The three algebraically equivalent forms of the conditional distribution:
/// [0] nearest-datum form, [1] p_k * prod p_{k,li}, [2] p_k^(1-m) * prod p_{li,k}.
/// They agree when the model set is reversible (p_ij p_i = p_ji p_j).
template <TransitionSource S>
std::array<ConditionalDistribution, 3> eq6_forms(const Neighborhood& neigh, const S& src) {
  const int n = src.n_classes();
  const int m = neigh.size();
  std::array<ConditionalDistribution, 3> out;
  out[0] = local_cpd(neigh, src);
  for (int f = 1; f < 3; ++f) out[static_cast<std::size_t>(f)].probs.assign(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) {
    const double pk = src.marginal(k);
    double a = pk, b = pk > 0.0 ? std::pow(pk, 1.0 - m) : 0.0;
    for (int i = 0; i < m; ++i) {
      a *= transition(src, k, neigh[i].cls, neigh[i]);
      b *= transition(src, neigh[i].cls, k, neigh[i]);
    }
    out[1].probs[static_cast<std::size_t>(k)] = a;
    out[2].probs[static_cast<std::size_t>(k)] = b;
  }
  for (int f = 1; f < 3; ++f) {
    auto& d = out[static_cast<std::size_t>(f)];
    double s = 0.0;
    for (double v : d.probs) s += v;
    if (s > 0.0) {
      for (double& v : d.probs) v /= s;
    } else {
      d.fallback = true;
      for (int k = 0; k < n; ++k) d.probs[static_cast<std::size_t>(k)] = src.marginal(k);
    }
  }
  return out;
}

/// Inverse-CDF draw: the first class whose cumulative probability exceeds u.
inline ClassId draw_class(std::span<const double> probs, double u) {
  double acc = 0.0;
  ClassId last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = static_cast<ClassId>(k);
    if (u < acc) return last_positive;
  }
  return last_positive;  // u at the rounding edge of 1
}

inline ClassId draw_class(const ConditionalDistribution& d, Rng& rng) { return draw_class(d.probs, rng.uniform01()); }

struct RealizationStats {
  std::uint64_t seed = 0;
  std::size_t cells_simulated = 0;
  std::size_t no_neighbor_count = 0;     ///< cells drawn from the marginals (m = 0)
  std::size_t zero_numerator_count = 0;  ///< cells where every numerator was zero
  double wall_ms = 0.0;
};

/// Copy of `target`'s geometry with samples written in and every other
/// labelled-or-unlabelled non-NODATA cell set to kUnsimulated.
inline Raster place_samples(const Raster& target, const SampleSet& samples) {
  Raster grid(target.geometry(), kUnsimulated);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (target[i] == kNoData) grid[i] = kNoData;
  std::vector<char> is_sample(grid.size(), 0);
  for (const auto& p : samples.points()) {
    const auto c = cell_of(target.geometry(), {p.x, p.y});
    if (!c) fail(ErrorCategory::Data, "sample (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") lies outside the grid");
    const auto idx = grid.index(c->row, c->col);
    const std::string where = "cell (" + std::to_string(c->row) + ", " + std::to_string(c->col) + ")";
    if (grid[idx] == kNoData) fail(ErrorCategory::Data, "sample falls on NODATA " + where);
    if (is_sample[idx] && grid[idx] != p.cls)
      fail(ErrorCategory::Data, "samples of classes " + std::to_string(grid[idx]) + " and " + std::to_string(p.cls) +
                                    " collide on " + where);
    grid[idx] = p.cls;
    is_sample[idx] = 1;
  }
  return grid;
}

/// One realization from a grid holding conditioning labels and kUnsimulated
/// cells. The RNG first shuffles the path, then supplies one uniform per cell.
inline Raster simulate_realization(Raster grid, const LagTable& table, double radius, std::uint64_t seed,
                                   RealizationStats* stats = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  std::vector<std::size_t> path;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == kUnsimulated) path.push_back(i);
  rng.shuffle(std::span<std::size_t>(path));

  RealizationStats st;
  st.seed = seed;
  std::vector<double> probs(static_cast<std::size_t>(table.n_classes()));
  for (const auto idx : path) {
    const auto nb = find_neighbors(grid, grid.cell(idx), radius);
    if (nb.empty()) {
      std::copy(table.marginals().begin(), table.marginals().end(), probs.begin());
      ++st.no_neighbor_count;
    } else if (local_cpd_into(nb, table, probs)) {
      ++st.zero_numerator_count;
    }
    grid[idx] = draw_class(probs, rng.uniform01());
    ++st.cells_simulated;
  }
  st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (stats) *stats = st;
  return grid;
}

/// Conditional realization over `target`'s geometry (its NODATA cells are
/// left out). The model set must be validated to at least `radius`.
inline Raster simulate_realization(const Raster& target, const SampleSet& samples, const TransiogramModelSet& models,
                                   double radius, std::uint64_t seed, RealizationStats* stats = nullptr) {
  if (samples.n_classes() != models.n_classes())
    fail(ErrorCategory::Configuration, "sample set and model set disagree on the number of classes");
  const LagTable table(models, radius);
  return simulate_realization(place_samples(target, samples), table, radius, seed, stats);
}

struct Ensemble {
  std::vector<Raster> realizations;
  std::vector<std::uint64_t> seeds;
  std::vector<RealizationStats> stats;
  std::string config_digest;

  std::size_t n_real() const { return realizations.size(); }
};

namespace detail {

inline void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
}

}  // namespace detail

/// FNV-1a digest of the simulation inputs.
inline std::string config_digest(const Raster& target, const SampleSet& samples, const TransiogramModelSet& models,
                                 double radius, std::uint64_t base_seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto& g = target.geometry();
  detail::fnv_mix(h, &g.nrows, sizeof g.nrows);
  detail::fnv_mix(h, &g.ncols, sizeof g.ncols);
  detail::fnv_mix(h, &g.cell_size, sizeof g.cell_size);
  for (const auto& p : samples.points()) {
    detail::fnv_mix(h, &p.x, sizeof p.x);
    detail::fnv_mix(h, &p.y, sizeof p.y);
    detail::fnv_mix(h, &p.cls, sizeof p.cls);
  }
  for (const auto& e : models.entries()) {
    const int k = static_cast<int>(e.kind);
    detail::fnv_mix(h, &k, sizeof k);
    for (double v : {e.sill, e.range, e.alpha, e.theta, e.weight}) detail::fnv_mix(h, &v, sizeof v);
    for (const auto& kn : e.knots) {
      detail::fnv_mix(h, &kn.lag, sizeof kn.lag);
      detail::fnv_mix(h, &kn.value, sizeof kn.value);
    }
  }
  detail::fnv_mix(h, &radius, sizeof radius);
  detail::fnv_mix(h, &base_seed, sizeof base_seed);
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

/// n_real realizations; member r uses derive_seed(base_seed, r). Members run
/// on up to `threads` workers with private RNGs, so the result does not
/// depend on scheduling.
inline Ensemble simulate_ensemble(const Raster& target, const SampleSet& samples, const TransiogramModelSet& models,
                                  double radius, int n_real, std::uint64_t base_seed, int threads = 1) {
  if (n_real < 1) fail(ErrorCategory::Argument, "n_real must be at least 1");
  if (samples.n_classes() != models.n_classes())
    fail(ErrorCategory::Configuration, "sample set and model set disagree on the number of classes");
  const LagTable table(models, radius);
  const Raster conditioned = place_samples(target, samples);

  Ensemble ens;
  ens.realizations.resize(static_cast<std::size_t>(n_real));
  ens.stats.resize(static_cast<std::size_t>(n_real));
  for (int r = 0; r < n_real; ++r) ens.seeds.push_back(derive_seed(base_seed, static_cast<std::uint64_t>(r)));
  ens.config_digest = config_digest(target, samples, models, radius, base_seed);

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_real));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < n_real; r = next++) {
      const auto i = static_cast<std::size_t>(r);
      try {
        ens.realizations[i] = simulate_realization(conditioned, table, radius, ens.seeds[i], &ens.stats[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, n_real);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (int r = 0; r < n_real; ++r) {
    if (!errors[static_cast<std::size_t>(r)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(r)]);
    } catch (const Error& e) {
      fail(e.category(), "realization " + std::to_string(r) + ": " + e.what());
    }
  }
  return ens;
}

/// One line per realization. Wall time is optional so that logs written
/// into output trees stay reproducible.
inline std::string format_run_log(const Ensemble& ens, bool with_timing) {
  std::ostringstream os;
  os << "# config_digest=" << ens.config_digest << " n_real=" << ens.n_real() << '\n';
  for (std::size_t r = 0; r < ens.stats.size(); ++r) {
    const auto& s = ens.stats[r];
    os << "realization=" << r << " seed=" << s.seed << " cells=" << s.cells_simulated
       << " no_neighbor=" << s.no_neighbor_count << " zero_numerator=" << s.zero_numerator_count;
    if (with_timing) os << " wall_ms=" << static_cast<long long>(std::llround(s.wall_ms));
    os << '\n';
  }
  return os.str();
}

}  // namespace mcrf
