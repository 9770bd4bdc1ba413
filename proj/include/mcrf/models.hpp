#pragma once

// Continuous-lag transiogram models and joint model sets.
//
// A model set is an n x n matrix of entries; in each row exactly one entry is
// the closure ("Rest") entry, evaluated as one minus the other entries of the
// row, which makes every row sum to one at every lag. All lags are in pixel
// lengths.

#include <algorithm>
#include <cmath>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/raster.hpp"

namespace mcrf {

enum class ModelKind {
  ExponentialAuto,
  ExponentialCross,
  GaussianCross,
  SphericalCross,
  GammaExponential,
  GammaGaussian,
  GammaSpherical,
  Interpolated,
  Rest,
};

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ExponentialAuto: return "exponential_auto";
    case ModelKind::ExponentialCross: return "exponential_cross";
    case ModelKind::GaussianCross: return "gaussian_cross";
    case ModelKind::SphericalCross: return "spherical_cross";
    case ModelKind::GammaExponential: return "gamma_exponential";
    case ModelKind::GammaGaussian: return "gamma_gaussian";
    case ModelKind::GammaSpherical: return "gamma_spherical";
    case ModelKind::Interpolated: return "interpolated";
    case ModelKind::Rest: return "rest";
  }
  return "rest";
}

inline std::optional<ModelKind> model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::ExponentialAuto, ModelKind::ExponentialCross, ModelKind::GaussianCross,
                 ModelKind::SphericalCross, ModelKind::GammaExponential, ModelKind::GammaGaussian,
                 ModelKind::GammaSpherical, ModelKind::Interpolated, ModelKind::Rest})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline bool is_basic(ModelKind k) {
  return k == ModelKind::ExponentialAuto || k == ModelKind::ExponentialCross || k == ModelKind::GaussianCross ||
         k == ModelKind::SphericalCross;
}

inline bool is_gamma(ModelKind k) {
  return k == ModelKind::GammaExponential || k == ModelKind::GammaGaussian || k == ModelKind::GammaSpherical;
}

/// Kinds whose value at lag 0 is 0 (cross-transiogram shapes).
inline bool is_cross_shape(ModelKind k) { return k != ModelKind::ExponentialAuto && (is_basic(k) || is_gamma(k)); }

struct ModelDescriptor {
  ModelKind kind = ModelKind::Rest;
  double sill = 0.0;    ///< c
  double range = 0.0;   ///< d, pixel lengths
  double alpha = 0.0;   ///< gamma shape
  double theta = 0.0;   ///< gamma scale
  double weight = 0.0;  ///< gamma weight w
  std::vector<Knot> knots;

  static ModelDescriptor rest() { return {}; }
  static ModelDescriptor basic(ModelKind kind, double sill, double range) {
    ModelDescriptor d;
    d.kind = kind;
    d.sill = sill;
    d.range = range;
    return d;
  }
  static ModelDescriptor gamma(ModelKind kind, double sill, double range, double alpha, double theta,
                               double weight) {
    ModelDescriptor d = basic(kind, sill, range);
    d.alpha = alpha;
    d.theta = theta;
    d.weight = weight;
    return d;
  }
  static ModelDescriptor interpolated(std::vector<Knot> knots) {
    ModelDescriptor d;
    d.kind = ModelKind::Interpolated;
    d.knots = std::move(knots);
    return d;
  }

  bool operator==(const ModelDescriptor&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Parameter-domain problems of a descriptor; empty when valid.
inline std::vector<FieldError> descriptor_errors(const ModelDescriptor& d) {
  std::vector<FieldError> errs;
  const auto finite = [](double v) { return std::isfinite(v); };
  if (is_basic(d.kind) || is_gamma(d.kind)) {
    if (!finite(d.sill) || !(d.sill > 0.0 && d.sill < 1.0)) errs.push_back({"sill", "must lie in (0, 1)"});
    if (!finite(d.range) || !(d.range > 0.0)) errs.push_back({"range", "must be positive"});
  }
  if (is_gamma(d.kind)) {
    if (!finite(d.alpha) || !(d.alpha > 1.0)) errs.push_back({"alpha", "must be > 1 for gamma-composite kinds"});
    if (!finite(d.theta) || !(d.theta > 0.0)) errs.push_back({"theta", "must be positive"});
    if (!finite(d.weight) || !(d.weight >= 0.0)) errs.push_back({"weight", "must be nonnegative"});
  }
  if (d.kind == ModelKind::Interpolated) {
    if (d.knots.empty()) errs.push_back({"knots", "must not be empty"});
    for (std::size_t i = 0; i < d.knots.size(); ++i) {
      const auto& k = d.knots[i];
      if (!finite(k.lag) || k.lag < 0.0 || (i > 0 && !(k.lag > d.knots[i - 1].lag)))
        errs.push_back({"knots", "lags must be nonnegative and strictly increasing"});
      if (!finite(k.value) || k.value < 0.0 || k.value > 1.0)
        errs.push_back({"knots", "values must lie in [0, 1]"});
    }
  }
  return errs;
}

inline void check_descriptor(const ModelDescriptor& d, const std::string& where = {}) {
  const auto errs = descriptor_errors(d);
  if (errs.empty()) return;
  std::string msg = where.empty() ? std::string(to_string(d.kind)) : where;
  for (const auto& e : errs) msg += "; " + e.field + " " + e.message;
  fail(ErrorCategory::Argument, msg);
}

inline void check_lag(double h) {
  if (!(h >= 0.0)) fail(ErrorCategory::Argument, "lag must be nonnegative (got " + std::to_string(h) + ")");
}

/// Exponential auto/cross, Gaussian cross and spherical cross models.
inline double eval_basic(const ModelDescriptor& d, double h) {
  check_lag(h);
  if (!is_basic(d.kind)) fail(ErrorCategory::Argument, std::string("eval_basic: unsupported kind ") + to_string(d.kind));
  const double c = d.sill, r = d.range;
  switch (d.kind) {
    case ModelKind::ExponentialAuto: return 1.0 - (1.0 - c) * (1.0 - std::exp(-3.0 * h / r));
    case ModelKind::ExponentialCross: return c * (1.0 - std::exp(-3.0 * h / r));
    case ModelKind::GaussianCross: {
      const double a = 3.0 * h / r;
      return c * (1.0 - std::exp(-a * a));
    }
    case ModelKind::SphericalCross: {
      if (h >= r) return c;
      const double x = h / r;
      return c * (1.5 * x - 0.5 * x * x * x);
    }
    default: break;
  }
  return 0.0;
}

/// Gamma probability density f(x | alpha, theta).
inline double gamma_pdf(double x, double alpha, double theta) {
  if (!(alpha > 0.0) || !(theta > 0.0))
    fail(ErrorCategory::Argument, "gamma_pdf: alpha and theta must be positive");
  if (!(x >= 0.0)) fail(ErrorCategory::Argument, "gamma_pdf: x must be nonnegative");
  if (x == 0.0) {
    if (alpha < 1.0) return HUGE_VAL;
    if (alpha == 1.0) return 1.0 / theta;
    return 0.0;
  }
  return std::pow(x, alpha - 1.0) * std::exp(-x / theta) / (std::tgamma(alpha) * std::pow(theta, alpha));
}

/// Gamma-composite cross models: c * [base(h) + w f(h/d | alpha, theta)].
/// The spherical variant's base term is 1 for h >= d.
inline double eval_gamma_composite(const ModelDescriptor& d, double h) {
  check_lag(h);
  if (!is_gamma(d.kind))
    fail(ErrorCategory::Argument, std::string("eval_gamma_composite: unsupported kind ") + to_string(d.kind));
  if (!(d.alpha > 1.0) || !(d.theta > 0.0) || !(d.weight >= 0.0) || !(d.range > 0.0))
    fail(ErrorCategory::Argument, "gamma-composite parameters require alpha > 1, theta > 0, weight >= 0, range > 0");
  const double x = h / d.range;
  double base = 0.0;
  switch (d.kind) {
    case ModelKind::GammaExponential: base = 1.0 - std::exp(-3.0 * x); break;
    case ModelKind::GammaGaussian: base = 1.0 - std::exp(-(3.0 * x) * (3.0 * x)); break;
    case ModelKind::GammaSpherical: base = x < 1.0 ? 1.5 * x - 0.5 * x * x * x : 1.0; break;
    default: break;
  }
  return d.sill * (base + d.weight * gamma_pdf(x, d.alpha, d.theta));
}

/// Prepends the analytic lag-0 knot (1 for auto entries, 0 for cross).
inline std::vector<Knot> with_origin_knot(std::vector<Knot> knots, bool auto_entry) {
  if (knots.empty() || knots.front().lag > 0.0) knots.insert(knots.begin(), Knot{0.0, auto_entry ? 1.0 : 0.0});
  return knots;
}

/// Piecewise-linear interpolation; flat outside the knot range.
inline double interpolate_empirical(std::span<const Knot> knots, double h) {
  check_lag(h);
  if (knots.empty()) fail(ErrorCategory::UnreliableEntry, "interpolated model has no knots");
  if (h <= knots.front().lag) return knots.front().value;
  if (h >= knots.back().lag) return knots.back().value;
  const auto it = std::upper_bound(knots.begin(), knots.end(), h, [](double v, const Knot& k) { return v < k.lag; });
  const Knot& hi = *it;
  const Knot& lo = *(it - 1);
  return (lo.value * (hi.lag - h) + hi.value * (h - lo.lag)) / (hi.lag - lo.lag);
}

/// Value of any stand-alone entry (everything except Rest).
inline double evaluate(const ModelDescriptor& d, double h) {
  if (is_basic(d.kind)) return eval_basic(d, h);
  if (is_gamma(d.kind)) return eval_gamma_composite(d, h);
  if (d.kind == ModelKind::Interpolated) return interpolate_empirical(d.knots, h);
  fail(ErrorCategory::Argument, "a Rest entry can only be evaluated within its row");
}

/// Raw values of one row at lag h. A single Rest entry takes 1 - others; a
/// row without one is evaluated as is. More than one Rest is a schema error.
inline void evaluate_row(std::span<const ModelDescriptor> row, double h, std::span<double> out) {
  int rest = -1;
  double others = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j].kind == ModelKind::Rest) {
      if (rest >= 0) fail(ErrorCategory::Schema, "row has more than one Rest entry");
      rest = static_cast<int>(j);
      continue;
    }
    out[j] = evaluate(row[j], h);
    others += out[j];
  }
  if (rest >= 0) out[static_cast<std::size_t>(rest)] = 1.0 - others;
}

class TransiogramModelSet {
 public:
  TransiogramModelSet() = default;

  /// `entries` is row-major (tail-major) n x n.
  TransiogramModelSet(int n_classes, std::vector<ModelDescriptor> entries, ProportionVector marginals)
      : n_(n_classes), entries_(std::move(entries)), marginals_(std::move(marginals)) {
    if (n_ <= 0) fail(ErrorCategory::Schema, "n_classes must be positive");
    if (entries_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_))
      fail(ErrorCategory::Schema, "model set needs n*n entries");
    if (marginals_.size() != static_cast<std::size_t>(n_))
      fail(ErrorCategory::Schema, "marginals length differs from n_classes");
    rest_head_.assign(static_cast<std::size_t>(n_), -1);
    for (int i = 0; i < n_; ++i) {
      int count = 0;
      for (int j = 0; j < n_; ++j)
        if (entry(i, j).kind == ModelKind::Rest) {
          ++count;
          rest_head_[static_cast<std::size_t>(i)] = j;
        }
      if (count != 1)
        fail(ErrorCategory::Schema, "row " + std::to_string(i) + " has " + std::to_string(count) +
                                        " Rest entries; exactly one is required");
    }
  }

  int n_classes() const { return n_; }
  const ModelDescriptor& entry(int tail, int head) const {
    return entries_[static_cast<std::size_t>(tail) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(head)];
  }
  std::span<const ModelDescriptor> row(int tail) const {
    return std::span<const ModelDescriptor>(entries_).subspan(static_cast<std::size_t>(tail) * static_cast<std::size_t>(n_),
                                                               static_cast<std::size_t>(n_));
  }
  std::span<const ModelDescriptor> entries() const { return entries_; }
  ClassId rest_head(int tail) const { return rest_head_[static_cast<std::size_t>(tail)]; }
  std::span<const ClassId> rest_heads() const { return rest_head_; }
  const ProportionVector& marginals() const { return marginals_; }
  double marginal(int k) const { return marginals_[static_cast<std::size_t>(k)]; }

  /// 0 until a successful validation.
  double validated_lag_max() const { return validated_lag_max_; }
  bool validated() const { return validated_lag_max_ > 0.0; }
  void mark_validated(double lag_max) { validated_lag_max_ = lag_max; }

  /// Raw entry value (Rest computed from its row); may be slightly negative.
  double value(int tail, int head, double h) const {
    const auto& e = entry(tail, head);
    if (e.kind != ModelKind::Rest) return evaluate(e, h);
    double others = 0.0;
    for (int j = 0; j < n_; ++j)
      if (j != head) others += evaluate(entry(tail, j), h);
    return 1.0 - others;
  }

  void raw_row(int tail, double h, std::span<double> out) const { evaluate_row(row(tail), h, out); }

  /// Row used for simulation: negatives clamped to 0, then renormalized.
  void row_probabilities(int tail, double h, std::span<double> out) const {
    raw_row(tail, h, out);
    double s = 0.0;
    for (auto& v : out) {
      v = std::max(v, 0.0);
      s += v;
    }
    if (s > 0.0 && s != 1.0)
      for (auto& v : out) v /= s;
  }

  /// Clamped transition probability; requires validation covering h.
  double probability(int tail, int head, double h) const {
    if (!validated()) fail(ErrorCategory::Configuration, "model set has not been validated");
    if (h > validated_lag_max_ + 1e-9)
      fail(ErrorCategory::Configuration, "lag " + std::to_string(h) + " beyond validated range " +
                                             std::to_string(validated_lag_max_));
    std::vector<double> r(static_cast<std::size_t>(n_));
    row_probabilities(tail, h, r);
    return r[static_cast<std::size_t>(head)];
  }

  bool operator==(const TransiogramModelSet&) const = default;

 private:
  int n_ = 0;
  std::vector<ModelDescriptor> entries_;
  std::vector<ClassId> rest_head_;
  ProportionVector marginals_;
  double validated_lag_max_ = 0.0;
};

/// Closure entry of a row: one minus the row's other entries.
inline double eval_rest(const TransiogramModelSet& set, int tail, double h) {
  return set.value(tail, set.rest_head(tail), h);
}

inline constexpr double kConstraintTolerance = 1e-9;
inline constexpr double kValidationStep = 0.25;

struct ValidationIssue {
  int tail = 0;
  int head = -1;  ///< -1 for a row-sum failure
  double lag = 0.0;
  double value = 0.0;
  std::string what;
};

struct ValidationReport {
  bool valid = false;
  double lag_max = 0.0;
  double step = 0.0;
  std::vector<double> row_max_deviation;  ///< max |row sum - 1|
  std::vector<double> row_worst_lag;      ///< lag of that maximum
  double min_value = 0.0;
  int min_tail = 0, min_head = 0;
  double min_lag = 0.0;
  double max_value = 0.0;
  int max_tail = 0, max_head = 0;
  double max_lag = 0.0;
  std::vector<ValidationIssue> issues;  ///< first failing lag per (row, kind of failure)
};

/// Sweeps h over [0, lag_max] at step <= 0.25 checking nonnegativity,
/// entries <= 1 and sum-to-unity, each within 1e-9. Does not modify the set.
inline ValidationReport check_model_set(const TransiogramModelSet& set, double lag_max) {
  if (!(lag_max > 0.0)) fail(ErrorCategory::Argument, "lag_max must be positive");
  const int n = set.n_classes();
  const auto steps = static_cast<long>(std::ceil(lag_max / kValidationStep - 1e-12));
  ValidationReport rep;
  rep.lag_max = lag_max;
  rep.step = lag_max / static_cast<double>(steps);
  rep.row_max_deviation.assign(static_cast<std::size_t>(n), 0.0);
  rep.row_worst_lag.assign(static_cast<std::size_t>(n), 0.0);
  rep.min_value = HUGE_VAL;
  rep.max_value = -HUGE_VAL;

  std::vector<bool> sum_flag(static_cast<std::size_t>(n), false), neg_flag(static_cast<std::size_t>(n), false),
      big_flag(static_cast<std::size_t>(n), false);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (long s = 0; s <= steps; ++s) {
    const double h = s == steps ? lag_max : static_cast<double>(s) * rep.step;
    for (int i = 0; i < n; ++i) {
      set.raw_row(i, h, row);
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        const double v = row[static_cast<std::size_t>(j)];
        sum += v;
        if (v < rep.min_value) {
          rep.min_value = v;
          rep.min_tail = i;
          rep.min_head = j;
          rep.min_lag = h;
        }
        if (v > rep.max_value) {
          rep.max_value = v;
          rep.max_tail = i;
          rep.max_head = j;
          rep.max_lag = h;
        }
        if (!(v >= -kConstraintTolerance) && !neg_flag[static_cast<std::size_t>(i)]) {
          neg_flag[static_cast<std::size_t>(i)] = true;
          rep.issues.push_back({i, j, h, v, "negative value"});
        }
        if (!(v <= 1.0 + kConstraintTolerance) && !big_flag[static_cast<std::size_t>(i)]) {
          big_flag[static_cast<std::size_t>(i)] = true;
          rep.issues.push_back({i, j, h, v, "value above 1"});
        }
      }
      const double dev = std::abs(sum - 1.0);
      if (!(dev <= rep.row_max_deviation[static_cast<std::size_t>(i)])) {
        rep.row_max_deviation[static_cast<std::size_t>(i)] = dev;
        rep.row_worst_lag[static_cast<std::size_t>(i)] = h;
      }
      if (!(dev <= kConstraintTolerance) && !sum_flag[static_cast<std::size_t>(i)]) {
        sum_flag[static_cast<std::size_t>(i)] = true;
        rep.issues.push_back({i, -1, h, sum, "row sum differs from 1"});
      }
    }
  }
  rep.valid = rep.issues.empty();
  return rep;
}

/// check_model_set, recording lag_max on the set when valid.
inline ValidationReport validate_model_set(TransiogramModelSet& set, double lag_max) {
  auto rep = check_model_set(set, lag_max);
  if (rep.valid) set.mark_validated(lag_max);
  return rep;
}

enum class JointMethod { Linear, Mathematical, Mixed };

inline const char* to_string(JointMethod m) {
  switch (m) {
    case JointMethod::Linear: return "linear";
    case JointMethod::Mathematical: return "math";
    case JointMethod::Mixed: return "mixed";
  }
  return "linear";
}

inline JointMethod joint_method_from_string(const std::string& s) {
  if (s == "linear") return JointMethod::Linear;
  if (s == "math" || s == "mathematical") return JointMethod::Mathematical;
  if (s == "mixed") return JointMethod::Mixed;
  fail(ErrorCategory::Argument, "unknown joint modeling method '" + s + "' (expected linear, math or mixed)");
}

struct EntryKey {
  int tail = 0;
  int head = 0;
  auto operator<=>(const EntryKey&) const = default;
};

/// User-supplied mathematical model for one entry; the sill defaults to the
/// head-class proportion when left unset.
struct EntryModel {
  ModelKind kind = ModelKind::ExponentialCross;
  std::optional<double> sill;
  double range = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  double weight = 0.0;

  bool operator==(const EntryModel&) const = default;
};

struct ModelSetInputs {
  JointMethod method = JointMethod::Linear;
  std::map<EntryKey, EntryModel> descriptors;
  ProportionVector marginals;
  std::vector<ClassId> rest_heads;  ///< per row; empty = most abundant class
  std::vector<ClassRole> roles;     ///< per class; needed by Mixed
};

/// Most abundant class (lowest id on ties) for every row.
inline std::vector<ClassId> default_rest_heads(const ProportionVector& p) {
  const auto v = p.values();
  const auto big = static_cast<ClassId>(std::max_element(v.begin(), v.end()) - v.begin());
  return std::vector<ClassId>(p.size(), big);
}

namespace detail {

inline std::string entry_name(int tail, int head) {
  return "(" + std::to_string(tail) + "," + std::to_string(head) + ")";
}

inline ModelDescriptor resolve_entry(const EntryModel& m, int tail, int head, const ProportionVector& marginals) {
  if (m.kind == ModelKind::Interpolated || m.kind == ModelKind::Rest)
    fail(ErrorCategory::Schema, "entry " + entry_name(tail, head) + ": mathematical descriptor cannot be of kind " +
                                    to_string(m.kind));
  if (tail == head && m.kind != ModelKind::ExponentialAuto)
    fail(ErrorCategory::Schema, "entry " + entry_name(tail, head) + ": auto-transiogram must use exponential_auto");
  if (tail != head && m.kind == ModelKind::ExponentialAuto)
    fail(ErrorCategory::Schema, "entry " + entry_name(tail, head) + ": exponential_auto is only for auto entries");
  ModelDescriptor d;
  d.kind = m.kind;
  d.sill = m.sill ? *m.sill : marginals[static_cast<std::size_t>(head)];
  d.range = m.range;
  d.alpha = m.alpha;
  d.theta = m.theta;
  d.weight = m.weight;
  if (!m.sill && !(d.sill > 0.0))
    fail(ErrorCategory::Configuration, "entry " + entry_name(tail, head) +
                                           ": sill unspecified and the head-class proportion is zero");
  check_descriptor(d, "entry " + entry_name(tail, head));
  return d;
}

}  // namespace detail

/// Builds a joint model set by linear interpolation, mathematical models, or
/// the mixed method (interpolated iff both tail and head are non-minor).
inline TransiogramModelSet build_model_set(const ExperimentalTransiogramMatrix& exp, const ModelSetInputs& in) {
  const int n = static_cast<int>(in.marginals.size());
  if (n == 0) fail(ErrorCategory::Configuration, "marginals are required");
  if (in.method != JointMethod::Mathematical && exp.n_classes() != n)
    fail(ErrorCategory::Configuration, "experimental matrix has " + std::to_string(exp.n_classes()) +
                                           " classes, marginals have " + std::to_string(n));
  const auto rest = in.rest_heads.empty() ? default_rest_heads(in.marginals) : in.rest_heads;
  if (rest.size() != static_cast<std::size_t>(n))
    fail(ErrorCategory::Configuration, "rest_heads needs one entry per class");
  for (auto r : rest)
    if (r < 0 || r >= n) fail(ErrorCategory::Configuration, "rest head " + std::to_string(r) + " out of range");
  if (in.method == JointMethod::Mixed && in.roles.size() != static_cast<std::size_t>(n))
    fail(ErrorCategory::Configuration, "mixed method needs a role for every class");

  auto minor = [&](int k) { return in.roles[static_cast<std::size_t>(k)] == ClassRole::Minor; };

  std::vector<ModelDescriptor> entries(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  std::vector<std::string> unreliable, missing;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      auto& slot = entries[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
      if (j == rest[static_cast<std::size_t>(i)]) {
        slot = ModelDescriptor::rest();
        continue;
      }
      const bool interpolate = in.method == JointMethod::Linear ||
                               (in.method == JointMethod::Mixed && !minor(i) && !minor(j));
      if (interpolate) {
        auto knots = exp.knots(i, j);
        if (knots.empty()) {
          unreliable.push_back(detail::entry_name(i, j));
          continue;
        }
        slot = ModelDescriptor::interpolated(with_origin_knot(std::move(knots), i == j));
      } else {
        const auto it = in.descriptors.find({i, j});
        if (it == in.descriptors.end()) {
          missing.push_back(detail::entry_name(i, j));
          continue;
        }
        slot = detail::resolve_entry(it->second, i, j, in.marginals);
      }
    }
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!unreliable.empty())
    fail(ErrorCategory::UnreliableEntry,
         "no experimental data for entries " + join(unreliable) + "; use mathematical models for them");
  if (!missing.empty()) fail(ErrorCategory::Configuration, "missing mathematical descriptors for entries " + join(missing));
  return TransiogramModelSet(n, std::move(entries), in.marginals);
}

struct FitScore {
  double rmse_all = 0.0;
  std::optional<double> rmse_low;  ///< nullopt when no knot lies at or below the cutoff
};

/// RMS deviation between a model curve and experimental knots, overall and
/// over the low-lag section (lag <= cutoff).
inline FitScore fit_rmse(const std::function<double(double)>& model, std::span<const Knot> knots,
                         double low_lag_cutoff) {
  if (knots.empty()) fail(ErrorCategory::EmptyInput, "fit_rmse needs at least one knot");
  double all = 0.0, low = 0.0;
  std::size_t n_low = 0;
  for (const auto& k : knots) {
    const double e = model(k.lag) - k.value;
    all += e * e;
    if (k.lag <= low_lag_cutoff) {
      low += e * e;
      ++n_low;
    }
  }
  FitScore s;
  s.rmse_all = std::sqrt(all / static_cast<double>(knots.size()));
  if (n_low > 0) s.rmse_low = std::sqrt(low / static_cast<double>(n_low));
  return s;
}

inline FitScore fit_rmse(const ModelDescriptor& d, std::span<const Knot> knots, double low_lag_cutoff) {
  return fit_rmse([&](double h) { return evaluate(d, h); }, knots, low_lag_cutoff);
}

}  // namespace mcrf
