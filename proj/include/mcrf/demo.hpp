#pragma once

// Synthetic case study: a patchy 7-class reference map with one minor class,
// a dense (~3%) and a sparse (~0.8%) random sample, three joint modeling
// methods per sample set, ensembles, optimal maps and summary tables.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mcrf/engine.hpp"
#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/fitting.hpp"
#include "mcrf/io.hpp"
#include "mcrf/models.hpp"
#include "mcrf/postprocess.hpp"
#include "mcrf/raster.hpp"
#include "mcrf/rng.hpp"

namespace mcrf {

struct DemoConfig {
  int nrows = 150;
  int ncols = 150;
  int n_sites = 100;
  std::vector<double> class_weights{0.1284, 0.1875, 0.0978, 0.0631, 0.0194, 0.0980, 0.4058};
  int minor_class = 4;
  double minor_min = 0.005, minor_max = 0.02;  // accepted reference share of the minor class
  double share_tolerance = 0.03;               // max |share - weight| for the other classes

  double dense_fraction = 0.03;
  double dense_bin = 3.0, dense_max_lag = 90.0, dense_radius = 30.0;
  double sparse_fraction = 0.008;
  double sparse_bin = 7.0, sparse_max_lag = 105.0, sparse_radius = 50.0;
  std::size_t sparse_minor_max = 2;

  double validation_lag = 100.0;
  int n_real = 100;
  std::uint64_t seed = 7;
  int threads = 1;
  DenominatorPolicy policy = DenominatorPolicy::ExcludeSamples;
};

struct DemoDataset {
  std::string name;
  SampleSet samples;
  LagBinSpec spec;
  double radius = 0.0;
  ExperimentalTransiogramMatrix exp;
  DatasetDescriptor descriptor;
};

struct DemoRun {
  JointMethod method = JointMethod::Linear;
  TransiogramModelSet set;
  ValidationReport report;
  RepairLog repair;
  std::string run_log;
  double wall_ms = 0.0;
  Raster optimal;
  AccuracyReport optimal_accuracy;
  AccuracyReport mean_accuracy;
  std::vector<double> proportions;  ///< mean realization proportions, percent
};

struct DemoResult {
  DemoConfig config;
  ClassCatalog catalog;
  Raster reference;
  std::uint64_t reference_seed = 0;
  std::vector<DemoDataset> datasets;         ///< dense, sparse
  std::vector<std::vector<DemoRun>> runs;    ///< [dataset][linear, math, mixed]
};

inline constexpr JointMethod kDemoMethods[] = {JointMethod::Linear, JointMethod::Mathematical, JointMethod::Mixed};

/// Blob reference whose minor-class share lands in [minor_min, minor_max);
/// site seeds are retried deterministically until it does.
inline Raster make_demo_reference(const DemoConfig& cfg, std::uint64_t* used_seed = nullptr) {
  const auto weights = ProportionVector::from_weights(cfg.class_weights);
  const int n = static_cast<int>(cfg.class_weights.size());
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    const auto s = derive_seed(cfg.seed, 1000 + attempt);
    auto ref = generate_blob_reference(cfg.nrows, cfg.ncols, n, weights, cfg.n_sites, s);
    const auto p = raster_proportions(ref, n);
    const double pm = p[static_cast<std::size_t>(cfg.minor_class)];
    bool close = true;
    for (int k = 0; k < n; ++k)
      close = close && p[static_cast<std::size_t>(k)] > 0.0 &&
              std::abs(p[static_cast<std::size_t>(k)] - weights[static_cast<std::size_t>(k)]) <= cfg.share_tolerance;
    if (close && pm >= cfg.minor_min && pm < cfg.minor_max) {
      if (used_seed) *used_seed = s;
      return ref;
    }
  }
  fail(ErrorCategory::Configuration, "no reference with the requested class shares in 1000 attempts");
}

inline ClassCatalog demo_catalog(const Raster& reference, int n_classes) {
  const auto p = raster_proportions(reference, n_classes);
  std::vector<ClassInfo> classes;
  for (int k = 0; k < n_classes; ++k)
    classes.push_back({k, "class_" + std::to_string(k), suggest_role(p[static_cast<std::size_t>(k)])});
  return ClassCatalog(std::move(classes));
}

/// Sparse sample with the minor class thinned to at most `keep` points (and
/// at least one, taken from the reference, so the class stays represented).
inline SampleSet thin_minor_class(const SampleSet& s, const Raster& reference, ClassId minor, std::size_t keep,
                                  std::uint64_t seed) {
  std::vector<SamplePoint> pts;
  std::size_t kept = 0;
  for (const auto& p : s.points()) {
    if (p.cls == minor) {
      if (kept >= keep) continue;
      ++kept;
    }
    pts.push_back(p);
  }
  if (kept == 0) {
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < reference.size(); ++i)
      if (reference[i] == minor) cells.push_back(i);
    if (cells.empty()) fail(ErrorCategory::Data, "minor class absent from the reference");
    Rng rng(seed);
    const auto c = reference.cell(cells[static_cast<std::size_t>(rng.uniform_index(cells.size()))]);
    const auto xy = cell_center(reference, c.row, c.col);
    pts.push_back({xy.x, xy.y, minor});
  }
  return SampleSet(std::move(pts), s.n_classes());
}

inline DemoDataset make_demo_dataset(std::string name, SampleSet samples, const ClassCatalog& catalog, double bin,
                                     double max_lag, double radius) {
  DemoDataset d;
  d.name = std::move(name);
  d.samples = std::move(samples);
  d.spec = LagBinSpec{bin, max_lag, 1.0};
  d.radius = radius;
  d.exp = estimate_experimental(d.samples, d.spec);
  d.descriptor.catalog = catalog;
  d.descriptor.estimation = d.spec;
  const auto p = class_proportions(d.samples);
  d.descriptor.rest_heads = default_rest_heads(p);
  d.descriptor.descriptors = suggest_exponential_descriptors(d.exp, p, radius);
  for (int i = 0; i < catalog.size(); ++i)
    refine_row_ranges(d.descriptor.descriptors, d.exp, i, d.descriptor.rest_heads[static_cast<std::size_t>(i)], radius);
  return d;
}

/// Reference, catalog and both datasets with descriptors; no simulation.
inline DemoResult prepare_demo(const DemoConfig& cfg) {
  DemoResult res;
  res.config = cfg;
  const int n = static_cast<int>(cfg.class_weights.size());
  res.reference = make_demo_reference(cfg, &res.reference_seed);
  res.catalog = demo_catalog(res.reference, n);
  const auto cells = res.reference.labelled_count();

  const auto n_dense = static_cast<std::size_t>(std::llround(cfg.dense_fraction * static_cast<double>(cells)));
  const auto n_sparse = static_cast<std::size_t>(std::llround(cfg.sparse_fraction * static_cast<double>(cells)));
  auto dense = random_sample(res.reference, n_dense, derive_seed(cfg.seed, 2000), n);
  auto sparse = thin_minor_class(random_sample(res.reference, n_sparse, derive_seed(cfg.seed, 2001), n), res.reference,
                                 cfg.minor_class, cfg.sparse_minor_max, derive_seed(cfg.seed, 2002));

  res.datasets.push_back(make_demo_dataset("dense", std::move(dense), res.catalog, cfg.dense_bin, cfg.dense_max_lag,
                                           cfg.dense_radius));
  res.datasets.push_back(make_demo_dataset("sparse", std::move(sparse), res.catalog, cfg.sparse_bin, cfg.sparse_max_lag,
                                           cfg.sparse_radius));

  // Sparse entries touching the minor class reuse the dense fits; the minor
  // sill is the dense-sample share.
  const auto& dd = res.datasets[0].descriptor.descriptors;
  auto& sd = res.datasets[1].descriptor.descriptors;
  const double dense_minor = class_proportions(res.datasets[0].samples)[static_cast<std::size_t>(cfg.minor_class)];
  const auto sparse_p = class_proportions(res.datasets[1].samples);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i != cfg.minor_class && j != cfg.minor_class) continue;
      const auto it = dd.find({i, j});
      if (it == dd.end()) continue;
      EntryModel m = it->second;
      m.sill = j == cfg.minor_class ? dense_minor : sparse_p[static_cast<std::size_t>(j)];
      sd[{i, j}] = m;
    }
  return res;
}

inline ModelSetInputs demo_inputs(const DemoDataset& d, JointMethod method) {
  ModelSetInputs in;
  in.method = method;
  in.descriptors = d.descriptor.descriptors;
  in.marginals = class_proportions(d.samples);
  in.rest_heads = d.descriptor.rest_heads;
  in.roles = d.descriptor.catalog.roles();
  return in;
}

/// Joint model set for one dataset and method, repaired and validated.
inline DemoRun build_demo_model(const DemoDataset& d, JointMethod method, double validation_lag) {
  DemoRun run;
  run.method = method;
  run.set = build_valid_model_set(d.exp, demo_inputs(d, method), std::max(validation_lag, 2.0 * d.radius), &run.report,
                                  &run.repair);
  return run;
}

inline std::uint64_t demo_ensemble_seed(std::uint64_t seed, std::size_t dataset, std::size_t method) {
  return derive_seed(seed, 3000 + 10 * dataset + method);
}

/// Full study. `progress` (optional) receives one line per finished run.
inline DemoResult run_demo(const DemoConfig& cfg, const std::function<void(const std::string&)>& progress = {}) {
  DemoResult res = prepare_demo(cfg);
  const int n = res.catalog.size();
  for (std::size_t di = 0; di < res.datasets.size(); ++di) {
    const auto& d = res.datasets[di];
    std::vector<DemoRun> runs;
    for (std::size_t mi = 0; mi < std::size(kDemoMethods); ++mi) {
      auto run = build_demo_model(d, kDemoMethods[mi], cfg.validation_lag);
      const auto t0 = std::chrono::steady_clock::now();
      auto ens = simulate_ensemble(res.reference, d.samples, run.set, d.radius, cfg.n_real,
                                   demo_ensemble_seed(cfg.seed, di, mi), cfg.threads);
      run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      run.run_log = format_run_log(ens, false);
      const auto cube = occurrence_probability(ens, n);
      run.optimal = optimal_map(cube);
      run.optimal_accuracy = accuracy(run.optimal, res.reference, d.samples, cfg.policy, n);
      run.mean_accuracy = mean_accuracy(ens.realizations, res.reference, d.samples, cfg.policy, n);
      run.proportions = proportions_percent(std::span<const Raster>(ens.realizations), n);
      if (progress) {
        std::ostringstream os;
        os << d.name << '/' << to_string(run.method) << ": " << cfg.n_real << " realizations in "
           << static_cast<long long>(run.wall_ms) << " ms, optimal map accuracy " << format_fixed(run.optimal_accuracy.overall, 2)
           << '%';
        progress(os.str());
      }
      runs.push_back(std::move(run));
    }
    res.runs.push_back(std::move(runs));
  }
  return res;
}

inline ReportTable demo_accuracy_table(const DemoResult& res, bool optimal) {
  ReportTable t;
  t.n_classes = res.catalog.size();
  t.with_overall = true;
  for (std::size_t di = 0; di < res.datasets.size(); ++di)
    for (const auto& run : res.runs[di]) {
      const auto& a = optimal ? run.optimal_accuracy : run.mean_accuracy;
      t.rows.push_back({res.datasets[di].name, to_string(run.method), a.overall, a.per_class});
    }
  return t;
}

inline ReportTable demo_proportion_table(const DemoResult& res) {
  ReportTable t;
  const int n = res.catalog.size();
  t.n_classes = n;
  t.rows.push_back({"", "reference", std::numeric_limits<double>::quiet_NaN(), proportions_percent(res.reference, n)});
  for (std::size_t di = 0; di < res.datasets.size(); ++di) {
    t.rows.push_back({res.datasets[di].name, "samples", std::numeric_limits<double>::quiet_NaN(),
                      proportions_percent(res.datasets[di].samples)});
    for (const auto& run : res.runs[di])
      t.rows.push_back({res.datasets[di].name, to_string(run.method), std::numeric_limits<double>::quiet_NaN(), run.proportions});
  }
  return t;
}

inline json demo_summary_json(const DemoResult& res) {
  json j;
  const auto& c = res.config;
  j["config"] = {{"nrows", c.nrows}, {"ncols", c.ncols}, {"n_sites", c.n_sites}, {"seed", c.seed},
                 {"reference_seed", res.reference_seed}, {"n_real", c.n_real}, {"minor_class", c.minor_class},
                 {"denominator_policy", to_string(c.policy)}};
  j["datasets"] = json::array();
  for (std::size_t di = 0; di < res.datasets.size(); ++di) {
    const auto& d = res.datasets[di];
    json jd{{"name", d.name}, {"n_samples", d.samples.size()}, {"bin_width", d.spec.bin_width},
            {"max_lag", d.spec.max_lag}, {"radius", d.radius}, {"class_counts", d.samples.class_counts()}};
    jd["runs"] = json::array();
    for (const auto& run : res.runs[di])
      jd["runs"].push_back({{"method", to_string(run.method)},
                            {"repair_rounds", run.repair.rounds},
                            {"optimal_overall", run.optimal_accuracy.overall},
                            {"mean_overall", run.mean_accuracy.overall},
                            {"optimal_minor", run.optimal_accuracy.per_class[static_cast<std::size_t>(c.minor_class)]}});
    j["datasets"].push_back(std::move(jd));
  }
  return j;
}

/// Writes the study into `dir`. Every file is a pure function of the config;
/// timings are left out so repeated runs produce identical trees.
inline void write_demo_outputs(const DemoResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_ascii_grid(dir / "reference.asc", res.reference);
  std::ostringstream log;
  log << "# mcrf demo seed=" << res.config.seed << " reference_seed=" << res.reference_seed << '\n';
  for (std::size_t di = 0; di < res.datasets.size(); ++di) {
    const auto& d = res.datasets[di];
    const auto sub = dir / d.name;
    write_samples_csv(sub / "samples.csv", d.samples);
    write_json_file(sub / "dataset.json", dataset_to_json(d.descriptor));
    {
      auto out = detail::open_out(sub / "experimental.csv");
      write_experimental_csv(out, d.exp);
    }
    for (const auto& run : res.runs[di]) {
      const std::string m = to_string(run.method);
      write_modelset(sub / ("modelset_" + m + ".json"), run.set);
      write_ascii_grid(sub / ("optimal_" + m + ".asc"), run.optimal);
      log << "## " << d.name << ' ' << m << " repair_rounds=" << run.repair.rounds << '\n';
      for (const auto& note : run.repair.notes) log << "# " << note << '\n';
      log << run.run_log;
    }
  }
  {
    auto out = detail::open_out(dir / "accuracy_optimal.csv");
    demo_accuracy_table(res, true).write_csv(out);
  }
  {
    auto out = detail::open_out(dir / "accuracy_realizations.csv");
    demo_accuracy_table(res, false).write_csv(out);
  }
  {
    auto out = detail::open_out(dir / "proportions.csv");
    demo_proportion_table(res).write_csv(out);
  }
  write_json_file(dir / "summary.json", demo_summary_json(res));
  auto out = detail::open_out(dir / "run.log");
  out << log.str();
}

}  // namespace mcrf
