// Batch front end: one subcommand per library operation. JSON goes to --out
// (stdout otherwise), a run manifest to <out>.manifest.json, plot data to
// <out stem>.csv, and a short text summary to stdout.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "longtail/bayes.hpp"
#include "longtail/diagnostics.hpp"
#include "longtail/io.hpp"
#include "longtail/lexis.hpp"
#include "longtail/likelihood.hpp"
#include "longtail/nonparam.hpp"
#include "longtail/parallel.hpp"
#include "longtail/simlab.hpp"
#include "longtail/version.hpp"

namespace fs = std::filesystem;
using namespace longtail;

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Input {
  std::vector<LifetimeRecord> records;  // excess years above origin
  double origin = 105.0;
};

struct Run {
  std::string command;
  Json config = Json::object();
  Json inputs = Json::array();
  std::optional<std::uint64_t> seed;
  std::string out;

  void add_input(const std::string& path, const std::string& bytes) {
    inputs.push_back({{"path", path}, {"fnv1a64", fnv1a_hex(bytes)}, {"bytes", bytes.size()}});
  }
};

Input load_input(Run& run, const std::string& data, const std::string& frames, std::optional<double> origin) {
  Input in;
  const std::string bytes = read_text(data);
  run.add_input(data, bytes);
  if (fs::path(data).extension() == ".json") {
    Json j;
    try {
      j = Json::parse(bytes);
    } catch (const Json::parse_error& e) {
      throw DataError("malformed JSON in '" + data + "': " + e.what());
    }
    const std::string units = j.value("units", "years");
    in.origin = j.contains("origin") ? number_from_json(j.at("origin")) : 105.0;
    try {
      in.records = j.at("records").get<std::vector<LifetimeRecord>>();
    } catch (const Json::exception& e) {
      throw DataError("'" + data + "' is not a records document: " + e.what());
    }
    if (units == "days") {
      in.records = rescale_times(in.records, 1.0 / kDaysPerYear);
    } else if (units != "years") {
      throw DataError("unknown units '" + units + "' (use days or years)");
    }
  } else {
    if (frames.empty()) {
      throw DataError("missing frame metadata: pass --frames <file.json> describing every frame_id in '" +
                      data + "'");
    }
    run.add_input(frames, read_text(frames));
    const auto fm = load_frames(frames);
    IngestResult ing = ingest_csv_text(bytes, fm);
    for (const auto& d : ing.diagnostics) {
      std::cerr << "warning: row " << d.row << " (" << d.id << "): " << d.message << '\n';
    }
    std::optional<double> u0;
    for (const auto& [id, f] : fm) {
      if (u0 && *u0 != f.origin_age) throw DataError("frames disagree on the origin age");
      u0 = f.origin_age;
    }
    in.origin = u0.value_or(105.0);
    in.records = rescale_times(ing.records, 1.0 / kDaysPerYear);
  }
  if (origin) in.origin = *origin;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    if (auto why = in.records[i].violation()) {
      throw DataError("record " + std::to_string(i) + " ('" + in.records[i].id + "'): " + *why);
    }
  }
  return in;
}

std::vector<double> parse_range(const std::string& s) {
  // a:b[:step] inclusive, or a comma list
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(std::stod(tok));
    if (parts.size() < 2 || parts.size() > 3) throw DataError("range must be a:b or a:b:step");
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0.0) || parts[1] < parts[0]) throw DataError("range needs a <= b and step > 0");
    for (double v = parts[0]; v <= parts[1] + 1e-9 * step; v += step) out.push_back(v);
  } else {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  return out;
}

std::uint64_t resolve_seed(Run& run, std::optional<std::uint64_t> seed) {
  if (!seed) {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << *seed << " (generated; pass --seed to reproduce)\n";
  }
  run.seed = seed;
  return *seed;
}

fs::path sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

void emit(const Run& run, const Json& result, double seconds, const std::string& csv = {}) {
  Json manifest{{"command", run.command},
                {"config", run.config},
                {"inputs", run.inputs},
                {"seed", run.seed ? Json(*run.seed) : Json(nullptr)},
                {"version", kVersion},
                {"threads", thread_count()},
                {"wall_time_s", seconds}};
  if (run.out.empty()) {
    std::cout << result.dump(2) << '\n';
    std::cerr << manifest.dump(2) << '\n';
    return;
  }
  write_json(run.out, result);
  write_json(run.out + ".manifest.json", manifest);
  if (!csv.empty()) write_text(sibling(run.out, ".csv"), csv);
}

ModelSpec spec_for(const std::string& family, const std::vector<double>& pieces) {
  ModelSpec spec = ModelSpec::of(family_from_string(family));
  if (spec.family == Family::piecewise_gp) {
    if (pieces.empty()) throw DataError("piecewise_gp needs --pieces");
    spec.pieces = pieces;
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifetime analysis under truncation and censoring"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (LONGTAIL_THREADS otherwise)");
  app.set_version_flag("--version", kVersion);

  Run run;

  // Shared options.
  std::string data, frames, family = "gen_pareto", pieces_arg;
  std::optional<double> origin, threshold;
  std::optional<std::uint64_t> seed;
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data, "lifetime CSV or records JSON")->required();
    sub->add_option("--frames", frames, "frame metadata JSON (required for CSV)");
    sub->add_option("--origin", origin, "origin age u0 of the excess times (years)");
    sub->add_option("--out", run.out, "result JSON path");
  };
  auto excess = [&](const Input& in, std::optional<double> age) {
    const double v = age ? *age - in.origin : 0.0;
    if (v < 0.0) throw DataError("threshold lies below the origin age " + std::to_string(in.origin));
    return v;
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a CSV and write a records document");
  std::string units = "years";
  add_data(ingest);
  ingest->add_option("--units", units, "output units")->check(CLI::IsMember({"days", "years"}));

  // fit
  auto* fit = app.add_subcommand("fit", "maximum likelihood fit above a threshold age");
  std::string scan;
  add_data(fit);
  fit->add_option("--family", family, "model family");
  fit->add_option("--threshold", threshold, "threshold age (years)");
  fit->add_option("--threshold-scan", scan, "ages a:b[:step] or a comma list");
  fit->add_option("--pieces", pieces_arg, "piecewise_gp breakpoints as excess years above the threshold");
  int starts = 5;
  fit->add_option("--starts", starts, "multistart count");

  // profile
  auto* prof = app.add_subcommand("profile", "profile likelihood for the GP endpoint");
  std::string grid_arg, levels_arg = "0.95";
  add_data(prof);
  prof->add_option("--threshold", threshold, "threshold age (years)");
  prof->add_option("--grid", grid_arg, "endpoint ages a:b:step or a comma list");
  prof->add_option("--levels", levels_arg, "confidence levels, comma separated");

  // test
  auto* test = app.add_subcommand("test", "nested-model, shape-constancy or group comparison test");
  std::string null_family = "exponential", alt_family = "gen_pareto", shape_arg, group, method = "lrt";
  std::size_t B = 0;
  add_data(test);
  test->add_option("--threshold", threshold, "threshold age (years)");
  test->add_option("--null", null_family, "null family");
  test->add_option("--alt", alt_family, "alternative family");
  test->add_option("--bootstrap", B, "parametric bootstrap replicates (0 = asymptotic only)");
  test->add_option("--seed", seed, "bootstrap seed");
  test->add_option("--shape-thresholds", shape_arg, "piecewise shape test at these ages");
  test->add_option("--group", group, "covariate column defining groups");
  test->add_option("--method", method, "group test method")->check(CLI::IsMember({"lrt", "wald"}));
  test->add_option("--family", family, "family compared across groups");

  // np
  auto* np = app.add_subcommand("np", "nonparametric survivor estimate");
  std::string np_method = "auto";
  add_data(np);
  np->add_option("--threshold", threshold, "threshold age (years)");
  np->add_option("--method", np_method, "auto, km or turnbull")->check(CLI::IsMember({"auto", "km", "turnbull"}));

  // bayes
  auto* bayes = app.add_subcommand("bayes", "posterior draws under the MDI prior");
  std::size_t draws = 10000;
  std::string hazard_grid;
  double level = 0.5;
  add_data(bayes);
  bayes->add_option("--family", family, "exponential, gompertz or gen_pareto");
  bayes->add_option("--threshold", threshold, "threshold age (years)");
  bayes->add_option("--draws", draws, "posterior draws");
  bayes->add_option("--seed", seed, "sampler seed");
  bayes->add_option("--hazard-grid", hazard_grid, "excess years a:b:step for a hazard band");
  bayes->add_option("--level", level, "hazard band level");

  // qq
  auto* qq = app.add_subcommand("qq", "truncation-aware Q-Q positions and bootstrap band");
  std::string strategy = "adjusted";
  std::size_t band_B = 0;
  double qq_level = 0.9;
  add_data(qq);
  qq->add_option("--family", family, "reference family");
  qq->add_option("--threshold", threshold, "threshold age (years)");
  qq->add_option("--strategy", strategy, "adjusted or transformed");
  qq->add_option("--band", band_B, "bootstrap replicates for a pointwise band");
  qq->add_option("--level", qq_level, "band level");
  qq->add_option("--seed", seed, "band seed");

  // simulate
  auto* sim = app.add_subcommand("simulate", "named simulation experiment");
  std::string experiment, config_path;
  std::optional<std::size_t> reps;
  sim->add_option("--experiment", experiment, "appendix_b or japan_tabulation");
  sim->add_option("--config", config_path, "experiment config JSON");
  sim->add_option("--replicates", reps, "override the replicate count");
  sim->add_option("--seed", seed, "experiment seed");
  sim->add_option("--out", run.out, "result JSON path");

  Json result;
  std::string csv;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (threads > 0) set_thread_count(threads);
    CLI::App* sub = app.get_subcommands().front();
    run.command = sub->get_name();
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->count() == 0) continue;
      run.config[opt->get_name()] = opt->as<std::string>();
    }
    const std::vector<double> pieces = pieces_arg.empty() ? std::vector<double>{} : parse_range(pieces_arg);

    if (run.command == "ingest") {
      Input in = load_input(run, data, frames, origin);
      auto recs = units == "days" ? rescale_times(in.records, kDaysPerYear) : in.records;
      result = Json{{"units", units}, {"origin", json_number(in.origin)}, {"records", recs}};
      std::cout << recs.size() << " records\n";
    } else if (run.command == "fit") {
      Input in = load_input(run, data, frames, origin);
      const ModelSpec spec = spec_for(family, pieces);
      FitOptions fo;
      fo.starts = starts;
      std::vector<FitResult> fits;
      if (!scan.empty()) {
        std::vector<double> v;
        for (double age : parse_range(scan)) v.push_back(excess(in, age));
        fits = threshold_scan(spec, in.records, v, fo);
      } else {
        fits.push_back(fit_mle(spec, in.records, excess(in, threshold), fo));
      }
      for (auto& f : fits) f.threshold += in.origin;  // report ages
      std::cout << fit_table(fits);
      result = scan.empty() ? Json(fits.front()) : Json(fits);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      emit(run, result, secs);
      for (const auto& f : fits) {
        if (!f.converged) {
          std::cerr << "error: fit did not converge: " << f.message << '\n';
          return 3;
        }
      }
      return 0;
    } else if (run.command == "profile") {
      Input in = load_input(run, data, frames, origin);
      std::vector<double> grid = grid_arg.empty() ? std::vector<double>{} : parse_range(grid_arg);
      const ProfileTrace p = profile_endpoint(in.records, excess(in, threshold), in.origin, grid,
                                              parse_range(levels_arg));
      std::cout << "psi_hat " << p.psi_hat << "  xi_hat " << p.xi_hat << '\n';
      for (const auto& l : p.limits) {
        std::cout << l.level << " interval [" << l.lower << ", " << l.upper << "]"
                  << (l.upper_unbounded ? " upper unbounded" : "") << '\n';
      }
      result = p;
      csv = profile_csv(p);
    } else if (run.command == "test") {
      Input in = load_input(run, data, frames, origin);
      const double v = excess(in, threshold);
      if (!shape_arg.empty()) {
        std::vector<double> ts;
        for (double age : parse_range(shape_arg)) ts.push_back(excess(in, age));
        const ShapeTestResult r = nc_fit_and_shape_test(in.records, ts);
        for (const auto& t : r.tests) {
          std::cout << t.null_model << "  w=" << t.statistic << "  df=" << t.df << "  p=" << t.p_asymptotic
                    << '\n';
        }
        result = r;
      } else if (!group.empty()) {
        std::vector<std::string> labels;
        for (const auto& r : in.records) {
          const auto it = r.covariates.find(group);
          if (it == r.covariates.end()) throw DataError("record '" + r.id + "' lacks covariate '" + group + "'");
          labels.push_back(it->second);
        }
        const TestResult t = group_comparison(in.records, labels, ModelSpec::of(family_from_string(family)), v,
                                              method == "wald" ? GroupMethod::wald : GroupMethod::lrt);
        std::cout << t.method << "  w=" << t.statistic << "  df=" << t.df << "  p=" << t.p_asymptotic << '\n';
        result = t;
      } else {
        const ModelSpec s0 = ModelSpec::of(family_from_string(null_family));
        const ModelSpec s1 = ModelSpec::of(family_from_string(alt_family));
        TestResult t = B > 0 ? bootstrap_lrt(s0, s1, in.records, B, resolve_seed(run, seed), v)
                             : lrt_nested(s0, s1, in.records, v);
        std::cout << t.null_model << " vs " << t.alt_model << "  w=" << t.statistic << "  p("
                  << to_string(t.calibration) << ")=" << t.p_asymptotic;
        if (t.p_bootstrap) std::cout << "  p(bootstrap)=" << *t.p_bootstrap;
        std::cout << '\n';
        result = t;
      }
    } else if (run.command == "np") {
      Input in = load_input(run, data, frames, origin);
      const ThresholdedData d = above_threshold(in.records, excess(in, threshold));
      const NPEstimate e = np_method == "km"         ? kaplan_meier(d.records)
                           : np_method == "turnbull" ? turnbull_em(d.records, {})
                                                     : np_estimate_auto(d.records);
      std::cout << e.method << ": " << e.support.size() << " support points"
                << (e.mass_deficit ? ", mass deficit " + std::to_string(e.deficit) : std::string{}) << '\n';
      result = e;
      csv = np_csv(e);
    } else if (run.command == "bayes") {
      Input in = load_input(run, data, frames, origin);
      const ModelSpec spec = ModelSpec::of(family_from_string(family));
      const PosteriorSample s = posterior_sample(spec, in.records, excess(in, threshold), draws,
                                                 resolve_seed(run, seed));
      std::cout << s.draws.size() << " draws, acceptance " << s.acceptance_rate << '\n';
      result = Json{{"sample", s}};
      csv = draws_csv(s);
      if (!hazard_grid.empty()) {
        const auto g = parse_range(hazard_grid);
        result["hazard_band"] = posterior_hazard_band(s, spec, g, level);
      }
    } else if (run.command == "qq") {
      Input in = load_input(run, data, frames, origin);
      const ModelSpec spec = ModelSpec::of(family_from_string(family));
      const FitResult f = fit_mle(spec, in.records, excess(in, threshold));
      if (!f.converged) throw NumericError("reference fit did not converge: " + f.message);
      QQBandOptions o;
      o.B = band_B;
      o.level = qq_level;
      o.strategy = qq_strategy_from_string(strategy);
      if (band_B > 0) o.seed = resolve_seed(run, seed);
      const QQData q = qq_bootstrap_band(f, in.records, o);
      std::cout << q.points.size() << " points, " << q.skipped.size() << " skipped\n";
      result = Json{{"fit", f}, {"qq", q}};
      csv = qq_csv(q);
    } else if (run.command == "simulate") {
      Json cfg;
      if (!config_path.empty()) {
        const std::string bytes = read_text(config_path);
        run.add_input(config_path, bytes);
        cfg = Json::parse(bytes);
        if (experiment.empty()) experiment = cfg.value("experiment", "");
      }
      if (experiment == "appendix_b") {
        CohortSimConfig c = config_path.empty() ? appendix_b_config() : cfg.get<CohortSimConfig>();
        if (reps) c.replicates = *reps;
        c.seed = resolve_seed(run, seed ? seed : (config_path.empty() ? std::nullopt : std::optional(c.seed)));
        run.config["resolved"] = c;
        const ExtinctCohortResult r = extinct_cohort_experiment(c);
        for (const auto& e : r.estimators) {
          std::cout << e.name << "  mean=" << e.mean << "  bias=" << e.bias << "  z=" << e.z_bias
                    << "  var=" << e.variance << '\n';
        }
        result = r;
        csv = extinct_csv(r);
      } else if (experiment == "japan_tabulation") {
        TabulationConfig c = config_path.empty() ? japan_tabulation_config() : cfg.get<TabulationConfig>();
        if (reps) c.replicates = *reps;
        c.seed = resolve_seed(run, seed ? seed : (config_path.empty() ? std::nullopt : std::optional(c.seed)));
        run.config["resolved"] = c;
        const TabulationResult r = tabulation_experiment(c);
        std::cout << "median exact " << r.median_exact << ", binned " << r.median_binned << "; above 150: "
                  << r.frac_exact_above_150 << " / " << r.frac_binned_above_150 << "; KS " << r.ks_distance
                  << '\n';
        result = r;
        csv = tabulation_csv(r);
      } else {
        throw DataError("unknown experiment '" + experiment + "' (appendix_b or japan_tabulation)");
      }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit(run, result, secs, csv);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const InternalError& e) {
    std::cerr << "internal invariant violated: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
