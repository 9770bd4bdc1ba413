// mcrf: command-line pipeline  sample -> estimate -> modelset -> simulate -> optimal/accuracy/report
//
// Every subcommand writes its outputs under --out-dir (default $MCRF_OUTPUT_DIR,
// else ./mcrf_out), appends a plain-text log there, and prints a JSON summary
// on stdout. Failures exit nonzero with a code per error category.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcrf/demo.hpp"
#include "mcrf/engine.hpp"
#include "mcrf/error.hpp"
#include "mcrf/estimation.hpp"
#include "mcrf/fitting.hpp"
#include "mcrf/io.hpp"
#include "mcrf/models.hpp"
#include "mcrf/postprocess.hpp"
#include "mcrf/service_http.hpp"

namespace fs = std::filesystem;
using namespace mcrf;

namespace {

constexpr int kExitInvalidModelSet = 20;

int exit_code(ErrorCategory c) { return 10 + static_cast<int>(c); }

fs::path default_out_dir() {
  if (const char* env = std::getenv("MCRF_OUTPUT_DIR"); env && *env) return env;
  return "mcrf_out";
}

void append_log(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  std::ofstream out(dir / (name + ".log"), std::ios::app);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<fs::path> grids_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) fail(ErrorCategory::NotFound, "no directory " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".asc") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorCategory::EmptyInput, "no .asc grids in " + dir.string());
  return out;
}

std::vector<Raster> read_grids(const std::vector<fs::path>& paths) {
  std::vector<Raster> out;
  for (const auto& p : paths) out.push_back(read_ascii_grid(p));
  return out;
}

json accuracy_json(const AccuracyReport& a) {
  json per = json::array();
  for (double v : a.per_class) per.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  return {{"overall", a.overall}, {"per_class", per}, {"evaluated", a.evaluated}, {"policy", to_string(a.policy)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov chain random field simulation of categorical rasters"};
  app.require_subcommand(1);
  fs::path out_dir = default_out_dir();
  app.add_option("--out-dir", out_dir, "output directory (default $MCRF_OUTPUT_DIR or ./mcrf_out)");
  std::function<int()> action;

  // sample ------------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "random sample of a reference grid");
  struct {
    fs::path reference;
    std::size_t count = 0;
    double fraction = 0.0;
    std::uint64_t seed = 1;
    int classes = 0;
  } sa;
  sample->add_option("--reference", sa.reference, "reference ASCII grid")->required();
  auto* count_opt = sample->add_option("--count", sa.count, "number of sample points");
  sample->add_option("--fraction", sa.fraction, "sample fraction of labelled cells")->excludes(count_opt);
  sample->add_option("--seed", sa.seed, "random seed");
  sample->add_option("--classes", sa.classes, "class count (default: from the grid)");
  sample->callback([&] {
    action = [&] {
      const auto ref = read_ascii_grid(sa.reference);
      std::size_t n = sa.count;
      if (n == 0) {
        if (!(sa.fraction > 0.0 && sa.fraction <= 1.0)) fail(ErrorCategory::Argument, "give --count or --fraction in (0, 1]");
        n = static_cast<std::size_t>(std::llround(sa.fraction * static_cast<double>(ref.labelled_count())));
      }
      const auto s = random_sample(ref, n, sa.seed, sa.classes);
      write_samples_csv(out_dir / "samples.csv", s);
      append_log(out_dir, "sample", "sample reference=" + sa.reference.string() + " n=" + std::to_string(n) +
                                        " seed=" + std::to_string(sa.seed));
      std::cout << json{{"samples", (out_dir / "samples.csv").string()}, {"n", s.size()}, {"class_counts", s.class_counts()}}.dump()
                << '\n';
      return 0;
    };
  });

  // estimate ----------------------------------------------------------------
  auto* estimate = app.add_subcommand("estimate", "experimental transiograms of a sample set");
  struct {
    fs::path samples;
    double bin_width = 1.0, max_lag = 0.0, pixel_size = 1.0;
    int classes = 0;
  } ea;
  estimate->add_option("--samples", ea.samples, "sample CSV (x,y,class)")->required();
  estimate->add_option("--bin-width", ea.bin_width, "lag bin width (pixel lengths)")->required();
  estimate->add_option("--max-lag", ea.max_lag, "largest lag (pixel lengths)")->required();
  estimate->add_option("--pixel-size", ea.pixel_size, "ground length of one pixel");
  estimate->add_option("--classes", ea.classes, "class count (default: largest label + 1)");
  estimate->callback([&] {
    action = [&] {
      const auto s = read_samples_csv(ea.samples, ea.classes);
      const LagBinSpec spec{ea.bin_width, ea.max_lag, ea.pixel_size};
      const auto m = estimate_experimental(s, spec);
      fs::create_directories(out_dir);
      std::ofstream out(out_dir / "experimental.csv");
      write_experimental_csv(out, m);
      append_log(out_dir, "estimate", "estimate samples=" + ea.samples.string() + " bins=" + std::to_string(m.bin_count()));
      std::cout << json{{"experimental", (out_dir / "experimental.csv").string()},
                        {"bins", m.bin_count()},
                        {"reversibility_residual", reversibility_residual(m)}}
                       .dump()
                << '\n';
      return 0;
    };
  });

  // modelset build / validate -----------------------------------------------
  auto* modelset = app.add_subcommand("modelset", "build or validate joint model sets");
  modelset->require_subcommand(1);
  auto* build = modelset->add_subcommand("build", "joint model set from samples and a dataset descriptor");
  struct {
    fs::path samples, dataset;
    std::string method = "mixed";
    double lag_max = 100.0;
    bool repair = false, suggest = false;
  } ba;
  build->add_option("--samples", ba.samples, "sample CSV")->required();
  build->add_option("--dataset", ba.dataset, "dataset descriptor JSON (classes, estimation, descriptors)")->required();
  build->add_option("--method", ba.method, "linear, math or mixed");
  build->add_option("--lag-max", ba.lag_max, "validation horizon (pixel lengths)");
  build->add_flag("--repair", ba.repair, "stretch ranges of failing rows until the set validates");
  build->add_flag("--suggest", ba.suggest, "fill missing mathematical descriptors with exponential fits");
  build->callback([&] {
    action = [&] {
      const auto ds = dataset_from_json(read_json_file(ba.dataset));
      const auto s = read_samples_csv(ba.samples, ds.catalog.size());
      const auto exp = estimate_experimental(s, ds.estimation);
      ModelSetInputs in;
      in.method = joint_method_from_string(ba.method);
      in.marginals = ds.marginals ? ProportionVector(*ds.marginals) : class_proportions(s);
      in.rest_heads = ds.rest_heads;
      in.roles = ds.catalog.roles();
      if (ba.suggest)
        in.descriptors = suggest_exponential_descriptors(exp, in.marginals,
                                                         std::min(ds.estimation.max_lag, ba.lag_max / 2.0));
      for (const auto& [k, v] : ds.descriptors) in.descriptors[k] = v;
      ValidationReport rep;
      RepairLog log;
      TransiogramModelSet set;
      if (ba.repair) {
        set = build_valid_model_set(exp, in, ba.lag_max, &rep, &log);
      } else {
        set = build_model_set(exp, in);
        rep = validate_model_set(set, ba.lag_max);
      }
      const auto path = out_dir / ("modelset_" + std::string(to_string(in.method)) + ".json");
      std::string text = "modelset build method=" + std::string(to_string(in.method)) +
                         " valid=" + (rep.valid ? "true" : "false") + " repair_rounds=" + std::to_string(log.rounds);
      for (const auto& n : log.notes) text += "\n# " + n;
      append_log(out_dir, "modelset", text);
      json out{{"report", report_to_json(rep)}};
      if (rep.valid) {
        write_modelset(path, set);
        out["modelset"] = path.string();
      }
      std::cout << out.dump() << '\n';
      return rep.valid ? 0 : kExitInvalidModelSet;
    };
  });
  auto* validate = modelset->add_subcommand("validate", "check row sums and nonnegativity over [0, lag-max]");
  struct {
    fs::path modelset;
    double lag_max = 100.0;
  } va;
  validate->add_option("--modelset", va.modelset, "model-set JSON")->required();
  validate->add_option("--lag-max", va.lag_max, "validation horizon (pixel lengths)");
  validate->callback([&] {
    action = [&] {
      auto doc = read_json_file(va.modelset);
      doc.erase("validated_lag_max");
      const auto loaded = load_modelset(doc, va.lag_max);
      append_log(out_dir, "modelset", "modelset validate " + va.modelset.string() +
                                          " valid=" + (loaded.report.valid ? "true" : "false"));
      std::cout << report_to_json(loaded.report).dump() << '\n';
      return loaded.report.valid ? 0 : kExitInvalidModelSet;
    };
  });

  // simulate ------------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "conditional MCRF realizations");
  struct {
    fs::path grid, samples, modelset;
    double radius = 30.0;
    int n_real = 100, threads = 1;
    std::uint64_t seed = 1;
  } si;
  simulate->add_option("--grid", si.grid, "ASCII grid giving the target geometry and NODATA mask")->required();
  simulate->add_option("--samples", si.samples, "conditioning sample CSV")->required();
  simulate->add_option("--modelset", si.modelset, "model-set JSON")->required();
  simulate->add_option("--radius", si.radius, "neighbour search radius (pixel lengths)");
  simulate->add_option("--n-real", si.n_real, "number of realizations");
  simulate->add_option("--seed", si.seed, "base seed");
  simulate->add_option("--threads", si.threads, "worker threads (caps ensemble concurrency)");
  simulate->callback([&] {
    action = [&] {
      const auto grid = read_ascii_grid(si.grid);
      const auto loaded = read_modelset(si.modelset, std::max(kDefaultValidationLag, 2.0 * si.radius));
      if (!loaded.report.valid) {
        std::cout << report_to_json(loaded.report).dump() << '\n';
        return kExitInvalidModelSet;
      }
      const auto s = read_samples_csv(si.samples, loaded.set.n_classes());
      const auto t0 = std::chrono::steady_clock::now();
      const auto ens = simulate_ensemble(grid, s, loaded.set, si.radius, si.n_real, si.seed, si.threads);
      const double ms = elapsed_ms(t0);
      const auto dir = out_dir / "realizations";
      fs::create_directories(dir);
      for (std::size_t r = 0; r < ens.n_real(); ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "real_%04zu.asc", r);
        write_ascii_grid(dir / name, ens.realizations[r]);
      }
      append_log(out_dir, "simulate", format_run_log(ens, true) + "# total_wall_ms=" + std::to_string(std::llround(ms)));
      std::cout << json{{"realizations", dir.string()}, {"n_real", ens.n_real()}, {"config_digest", ens.config_digest},
                        {"wall_ms", std::llround(ms)}}
                       .dump()
                << '\n';
      return 0;
    };
  });

  // optimal -------------------------------------------------------------------
  auto* optimal = app.add_subcommand("optimal", "per-cell most frequent class over realizations");
  struct {
    fs::path dir;
    int classes = 0;
  } oa;
  optimal->add_option("--realizations", oa.dir, "directory of realization grids")->required();
  optimal->add_option("--classes", oa.classes, "class count (default: from the grids)");
  optimal->callback([&] {
    action = [&] {
      const auto rs = read_grids(grids_in(oa.dir));
      int n = oa.classes;
      if (n <= 0)
        for (const auto& r : rs) n = std::max(n, r.max_class_count());
      const auto cube = occurrence_probability(std::span<const Raster>(rs), n);
      const auto map = optimal_map(cube);
      write_ascii_grid(out_dir / "optimal.asc", map);
      append_log(out_dir, "optimal", "optimal realizations=" + std::to_string(rs.size()));
      std::cout << json{{"optimal", (out_dir / "optimal.asc").string()}, {"n_real", rs.size()}}.dump() << '\n';
      return 0;
    };
  });

  // accuracy ------------------------------------------------------------------
  auto* acc = app.add_subcommand("accuracy", "percent correct against a reference grid");
  struct {
    fs::path map, reference, samples;
    int classes = 0;
    std::string policy = "exclude_samples";
  } aa;
  acc->add_option("--map", aa.map, "map to score (ASCII grid)")->required();
  acc->add_option("--reference", aa.reference, "reference grid")->required();
  acc->add_option("--samples", aa.samples, "sample CSV (cells left out under exclude_samples)")->required();
  acc->add_option("--classes", aa.classes, "class count (default: from the reference)");
  acc->add_option("--policy", aa.policy, "all_cells or exclude_samples");
  acc->callback([&] {
    action = [&] {
      const auto map = read_ascii_grid(aa.map);
      const auto ref = read_ascii_grid(aa.reference);
      const int n = aa.classes > 0 ? aa.classes : std::max(ref.max_class_count(), map.max_class_count());
      const auto s = read_samples_csv(aa.samples, n);
      const auto rep = accuracy(map, ref, s, denominator_policy_from_string(aa.policy), n);
      ReportTable t{n, true, {{"", aa.map.filename().string(), rep.overall, rep.per_class}}};
      fs::create_directories(out_dir);
      std::ofstream out(out_dir / "accuracy.csv");
      t.write_csv(out);
      append_log(out_dir, "accuracy", "accuracy map=" + aa.map.string() + " overall=" + format_fixed(rep.overall, 2));
      std::cout << accuracy_json(rep).dump() << '\n';
      return 0;
    };
  });

  // report --------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "class-proportion and mean-accuracy tables for an ensemble");
  struct {
    fs::path dir, samples, reference;
    std::string label = "realizations", policy = "exclude_samples";
    int classes = 0;
  } ra;
  report->add_option("--realizations", ra.dir, "directory of realization grids")->required();
  report->add_option("--samples", ra.samples, "sample CSV")->required();
  report->add_option("--reference", ra.reference, "reference grid (adds reference and accuracy rows)");
  report->add_option("--label", ra.label, "row label for the ensemble");
  report->add_option("--classes", ra.classes, "class count (default: from the data)");
  report->add_option("--policy", ra.policy, "all_cells or exclude_samples");
  report->callback([&] {
    action = [&] {
      const auto rs = read_grids(grids_in(ra.dir));
      std::optional<Raster> ref;
      if (!ra.reference.empty()) ref = read_ascii_grid(ra.reference);
      int n = ra.classes;
      if (n <= 0) {
        for (const auto& r : rs) n = std::max(n, r.max_class_count());
        if (ref) n = std::max(n, ref->max_class_count());
      }
      const auto s = read_samples_csv(ra.samples, n);
      const NamedRealizations runs[] = {{ra.label, rs}};
      const auto t = proportion_report(ref ? &*ref : nullptr, s, runs);
      fs::create_directories(out_dir);
      {
        std::ofstream out(out_dir / "proportions.csv");
        t.write_csv(out);
      }
      json out{{"proportions", (out_dir / "proportions.csv").string()}};
      if (ref) {
        const auto m = mean_accuracy(rs, *ref, s, denominator_policy_from_string(ra.policy), n);
        ReportTable at{n, true, {{"", ra.label, m.overall, m.per_class}}};
        std::ofstream f(out_dir / "accuracy_realizations.csv");
        at.write_csv(f);
        out["mean_accuracy"] = accuracy_json(m);
      }
      append_log(out_dir, "report", "report realizations=" + std::to_string(rs.size()));
      std::cout << out.dump() << '\n';
      return 0;
    };
  });

  // demo ----------------------------------------------------------------------
  auto* demo = app.add_subcommand("demo", "synthetic case study end to end");
  DemoConfig dc;
  demo->add_option("--seed", dc.seed, "study seed");
  demo->add_option("--n-real", dc.n_real, "realizations per method and dataset");
  demo->add_option("--threads", dc.threads, "worker threads");
  demo->callback([&] {
    action = [&] {
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = run_demo(dc, [](const std::string& line) { std::cerr << line << '\n'; });
      write_demo_outputs(res, out_dir);
      std::cerr << "demo finished in " << std::llround(elapsed_ms(t0)) << " ms\n";
      std::cout << demo_summary_json(res).dump() << '\n';
      return 0;
    };
  });

  // fit --serve ---------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "transiogram fitting service for the workbench");
  struct {
    bool serve = false, demo = false;
    fs::path samples, dataset, reference, modelset, persist;
    double radius = 30.0;
    std::string host = "127.0.0.1";
    int port = 8750;
    std::uint64_t seed = 7;
  } fa;
  fit->add_flag("--serve", fa.serve, "start the HTTP service")->required();
  fit->add_flag("--demo", fa.demo, "load the demo's dense dataset");
  fit->add_option("--seed", fa.seed, "demo seed");
  fit->add_option("--samples", fa.samples, "sample CSV");
  fit->add_option("--dataset", fa.dataset, "dataset descriptor JSON");
  fit->add_option("--reference", fa.reference, "reference grid (enables preview accuracy)");
  fit->add_option("--modelset", fa.modelset, "initial draft model set");
  fit->add_option("--persist", fa.persist, "where PUT /modelset writes (default <out-dir>/modelset.json)");
  fit->add_option("--radius", fa.radius, "search radius; validation runs to twice this");
  fit->add_option("--host", fa.host, "listen address");
  fit->add_option("--port", fa.port, "listen port");
  fit->callback([&] {
    action = [&] {
      FitService svc(fa.persist.empty() ? out_dir / "modelset.json" : fa.persist);
      if (fa.demo) {
        DemoConfig cfg;
        cfg.seed = fa.seed;
        svc.load(make_demo_session(cfg));
      } else {
        if (fa.samples.empty() || fa.dataset.empty()) fail(ErrorCategory::Argument, "give --demo or --samples with --dataset");
        const auto ds = dataset_from_json(read_json_file(fa.dataset));
        auto s = read_samples_csv(fa.samples, ds.catalog.size());
        std::optional<TransiogramModelSet> draft;
        if (!fa.modelset.empty()) draft = modelset_from_json(read_json_file(fa.modelset));
        std::optional<Raster> ref;
        if (!fa.reference.empty()) ref = read_ascii_grid(fa.reference);
        svc.load(make_session(fa.dataset.stem().string(), ds.catalog, std::move(s), ds.estimation, fa.radius,
                              std::move(draft), std::move(ref)));
      }
      std::cerr << "fit service on http://" << fa.host << ':' << fa.port << '\n';
      return serve(svc, fa.host, fa.port) ? 0 : exit_code(ErrorCategory::Configuration);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "mcrf: " << to_string(e.category()) << " error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "mcrf: error: " << e.what() << '\n';
    return 1;
  }
}
