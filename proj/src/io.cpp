#include "longtail/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace longtail {

Json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return kNaN;
  }
  if (j.is_null()) return kNaN;
  throw DataError("expected a number, got " + j.dump());
}

namespace {

Json nums(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(json_number(x));
  return a;
}

std::vector<double> get_nums(const Json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number_from_json(x));
  return out;
}

Json matrix(const std::vector<std::vector<double>>& m) {
  Json a = Json::array();
  for (const auto& row : m) a.push_back(nums(row));
  return a;
}

std::vector<std::vector<double>> get_matrix(const Json& j) {
  std::vector<std::vector<double>> out;
  for (const auto& row : j) out.push_back(get_nums(row));
  return out;
}

double num_at(const Json& j, const char* key, double fallback = kNaN) {
  return j.contains(key) ? number_from_json(j.at(key)) : fallback;
}

std::vector<double> nums_at(const Json& j, const char* key) {
  return j.contains(key) ? get_nums(j.at(key)) : std::vector<double>{};
}

template <class T>
T value_at(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

// ---------------------------------------------------------------------------
// Records and models

void to_json(Json& j, const Interval& v) { j = Json::array({json_number(v.lo), json_number(v.hi)}); }
void from_json(const Json& j, Interval& v) {
  if (!j.is_array() || j.size() != 2) throw DataError("interval must be [lo, hi]");
  v.lo = number_from_json(j[0]);
  v.hi = number_from_json(j[1]);
}

void to_json(Json& j, const IntervalSet& v) {
  j = Json::array();
  for (const auto& iv : v.parts()) j.push_back(iv);
}
void from_json(const Json& j, IntervalSet& v) {
  v = IntervalSet{};
  for (const auto& iv : j) v.add(iv.get<Interval>());
}

void to_json(Json& j, const LifetimeRecord& v) {
  j = Json{{"id", v.id},
           {"censoring", std::string(to_string(v.censoring))},
           {"time", json_number(v.time)},
           {"time_upper", json_number(v.time_upper)},
           {"truncation", v.truncation},
           {"censor_limit", json_number(v.censor_limit)}};
  if (v.entry_date) j["entry_date"] = v.entry_date->iso();
  if (!v.covariates.empty()) j["covariates"] = v.covariates;
}
void from_json(const Json& j, LifetimeRecord& v) {
  v = LifetimeRecord{};
  v.id = value_at<std::string>(j, "id", "");
  v.censoring = censoring_from_string(value_at<std::string>(j, "censoring", "observed"));
  v.time = num_at(j, "time");
  v.time_upper = num_at(j, "time_upper", kInf);
  if (j.contains("truncation")) v.truncation = j.at("truncation").get<IntervalSet>();
  v.censor_limit = num_at(j, "censor_limit", kInf);
  if (j.contains("entry_date")) v.entry_date = CalendarDate::parse(j.at("entry_date").get<std::string>());
  if (j.contains("covariates")) v.covariates = j.at("covariates").get<std::map<std::string, std::string>>();
}

void to_json(Json& j, const ModelSpec& v) {
  j = Json{{"family", std::string(to_string(v.family))}, {"threshold", json_number(v.threshold)}};
  if (!v.pieces.empty()) j["pieces"] = nums(v.pieces);
}
void from_json(const Json& j, ModelSpec& v) {
  v.family = family_from_string(j.at("family").get<std::string>());
  v.threshold = num_at(j, "threshold", 0.0);
  v.pieces = nums_at(j, "pieces");
}

void to_json(Json& j, const ParamVector& v) { j = nums(v.values); }
void from_json(const Json& j, ParamVector& v) { v.values = get_nums(j); }

// ---------------------------------------------------------------------------
// Likelihood results

void to_json(Json& j, const FitResult& v) {
  j = Json{{"spec", v.spec},
           {"params", param_names(v.spec)},
           {"mle", v.mle},
           {"loglik", json_number(v.loglik)},
           {"observed_information", matrix(v.observed_information)},
           {"free_params", v.free_params},
           {"covariance", matrix(v.covariance)},
           {"std_errors", nums(v.std_errors)},
           {"converged", v.converged},
           {"at_boundary", v.at_boundary},
           {"boundary_params", v.boundary_params},
           {"n_used", v.n_used},
           {"n_dropped", v.n_dropped},
           {"n_ties", v.n_ties},
           {"threshold", json_number(v.threshold)},
           {"gradient_norm", json_number(v.gradient_norm)},
           {"evaluations", v.evaluations},
           {"message", v.message}};
}
void from_json(const Json& j, FitResult& v) {
  v = FitResult{};
  v.spec = j.at("spec").get<ModelSpec>();
  v.mle = j.at("mle").get<ParamVector>();
  v.loglik = num_at(j, "loglik");
  if (j.contains("observed_information")) v.observed_information = get_matrix(j.at("observed_information"));
  v.free_params = value_at<std::vector<std::size_t>>(j, "free_params", {});
  if (j.contains("covariance")) v.covariance = get_matrix(j.at("covariance"));
  v.std_errors = nums_at(j, "std_errors");
  v.converged = value_at(j, "converged", false);
  v.at_boundary = value_at(j, "at_boundary", false);
  v.boundary_params = value_at<std::vector<std::string>>(j, "boundary_params", {});
  v.n_used = value_at<std::size_t>(j, "n_used", 0);
  v.n_dropped = value_at<std::size_t>(j, "n_dropped", 0);
  v.n_ties = value_at<std::size_t>(j, "n_ties", 0);
  v.threshold = num_at(j, "threshold", 0.0);
  v.gradient_norm = num_at(j, "gradient_norm", 0.0);
  v.evaluations = value_at(j, "evaluations", 0);
  v.message = value_at<std::string>(j, "message", "");
}

void to_json(Json& j, const ProfileLimit& v) {
  j = Json{{"level", json_number(v.level)},
           {"lower", json_number(v.lower)},
           {"upper", json_number(v.upper)},
           {"lower_at_grid_edge", v.lower_at_grid_edge},
           {"upper_unbounded", v.upper_unbounded}};
}
void from_json(const Json& j, ProfileLimit& v) {
  v.level = num_at(j, "level");
  v.lower = num_at(j, "lower");
  v.upper = num_at(j, "upper");
  v.lower_at_grid_edge = value_at(j, "lower_at_grid_edge", false);
  v.upper_unbounded = value_at(j, "upper_unbounded", false);
}

void to_json(Json& j, const ProfileTrace& v) {
  j = Json{{"parameter", v.parameter},   {"origin", json_number(v.origin)},
           {"threshold", json_number(v.threshold)}, {"grid", nums(v.grid)},
           {"values", nums(v.values)},   {"sigma", nums(v.sigma)},
           {"psi_hat", json_number(v.psi_hat)}, {"loglik_max", json_number(v.loglik_max)},
           {"xi_hat", json_number(v.xi_hat)}, {"limits", v.limits}};
}
void from_json(const Json& j, ProfileTrace& v) {
  v.parameter = value_at<std::string>(j, "parameter", "psi");
  v.origin = num_at(j, "origin");
  v.threshold = num_at(j, "threshold");
  v.grid = nums_at(j, "grid");
  v.values = nums_at(j, "values");
  v.sigma = nums_at(j, "sigma");
  v.psi_hat = num_at(j, "psi_hat");
  v.loglik_max = num_at(j, "loglik_max");
  v.xi_hat = num_at(j, "xi_hat");
  v.limits = value_at<std::vector<ProfileLimit>>(j, "limits", {});
}

void to_json(Json& j, const TestResult& v) {
  j = Json{{"null_model", v.null_model},
           {"alt_model", v.alt_model},
           {"method", v.method},
           {"statistic", json_number(v.statistic)},
           {"df", json_number(v.df)},
           {"calibration", std::string(to_string(v.calibration))},
           {"p_asymptotic", json_number(v.p_asymptotic)},
           {"p_bootstrap", v.p_bootstrap ? json_number(*v.p_bootstrap) : Json(nullptr)},
           {"B", v.B},
           {"seed", v.seed},
           {"failures", v.failures},
           {"degenerate", v.degenerate},
           {"loglik0", json_number(v.loglik0)},
           {"loglik1", json_number(v.loglik1)},
           {"replicate_statistics", nums(v.replicate_statistics)}};
}
void from_json(const Json& j, TestResult& v) {
  v = TestResult{};
  v.null_model = value_at<std::string>(j, "null_model", "");
  v.alt_model = value_at<std::string>(j, "alt_model", "");
  v.method = value_at<std::string>(j, "method", "lrt");
  v.statistic = num_at(j, "statistic");
  v.df = num_at(j, "df");
  v.calibration = calibration_from_string(j.at("calibration").get<std::string>());
  v.p_asymptotic = num_at(j, "p_asymptotic");
  if (j.contains("p_bootstrap") && !j.at("p_bootstrap").is_null()) v.p_bootstrap = number_from_json(j.at("p_bootstrap"));
  v.B = value_at<std::size_t>(j, "B", 0);
  v.seed = value_at<std::uint64_t>(j, "seed", 0);
  v.failures = value_at<std::size_t>(j, "failures", 0);
  v.degenerate = value_at(j, "degenerate", false);
  v.loglik0 = num_at(j, "loglik0");
  v.loglik1 = num_at(j, "loglik1");
  v.replicate_statistics = nums_at(j, "replicate_statistics");
}

void to_json(Json& j, const ShapeTestResult& v) {
  j = Json{{"fit", v.fit}, {"nulls", v.nulls}, {"tests", v.tests}};
}
void from_json(const Json& j, ShapeTestResult& v) {
  v.fit = j.at("fit").get<FitResult>();
  v.nulls = j.at("nulls").get<std::vector<FitResult>>();
  v.tests = j.at("tests").get<std::vector<TestResult>>();
}

// ---------------------------------------------------------------------------
// Nonparametric, Bayesian, diagnostics

void to_json(Json& j, const NPEstimate& v) {
  j = Json{{"method", v.method},
           {"support", nums(v.support)},
           {"mass", nums(v.mass)},
           {"survivor", nums(v.survivor)},
           {"cum_hazard", nums(v.cum_hazard)},
           {"variance", nums(v.variance)},
           {"at_risk", nums(v.at_risk)},
           {"events", nums(v.events)},
           {"interior", v.interior},
           {"loglik", json_number(v.loglik)},
           {"iterations", v.iterations},
           {"converged", v.converged},
           {"mass_deficit", v.mass_deficit},
           {"deficit", json_number(v.deficit)},
           {"loglik_trace", nums(v.loglik_trace)}};
}
void from_json(const Json& j, NPEstimate& v) {
  v = NPEstimate{};
  v.method = value_at<std::string>(j, "method", "");
  v.support = nums_at(j, "support");
  v.mass = nums_at(j, "mass");
  v.survivor = nums_at(j, "survivor");
  v.cum_hazard = nums_at(j, "cum_hazard");
  v.variance = nums_at(j, "variance");
  v.at_risk = nums_at(j, "at_risk");
  v.events = nums_at(j, "events");
  v.interior = value_at<std::vector<bool>>(j, "interior", {});
  v.loglik = num_at(j, "loglik");
  v.iterations = value_at<long>(j, "iterations", 0);
  v.converged = value_at(j, "converged", true);
  v.mass_deficit = value_at(j, "mass_deficit", false);
  v.deficit = num_at(j, "deficit", 0.0);
  v.loglik_trace = nums_at(j, "loglik_trace");
}

void to_json(Json& j, const PosteriorSample& v) {
  j = Json{{"dim", v.dim},
           {"names", v.names},
           {"draws", matrix(v.draws)},
           {"log_posterior", nums(v.log_posterior)},
           {"acceptance_rate", json_number(v.acceptance_rate)},
           {"seed", v.seed},
           {"proposals", v.proposals}};
}
void from_json(const Json& j, PosteriorSample& v) {
  v.dim = j.at("dim").get<std::size_t>();
  v.names = value_at<std::vector<std::string>>(j, "names", {});
  v.draws = get_matrix(j.at("draws"));
  v.log_posterior = nums_at(j, "log_posterior");
  v.acceptance_rate = num_at(j, "acceptance_rate");
  v.seed = value_at<std::uint64_t>(j, "seed", 0);
  v.proposals = value_at<std::size_t>(j, "proposals", 0);
}

void to_json(Json& j, const HazardBand& v) {
  j = Json{{"t", nums(v.t)},       {"median", nums(v.median)}, {"lo", nums(v.lo)},
           {"hi", nums(v.hi)},     {"beyond_support", v.beyond_support},
           {"level", json_number(v.level)}};
}
void from_json(const Json& j, HazardBand& v) {
  v.t = nums_at(j, "t");
  v.median = nums_at(j, "median");
  v.lo = nums_at(j, "lo");
  v.hi = nums_at(j, "hi");
  v.beyond_support = value_at<std::vector<bool>>(j, "beyond_support", {});
  v.level = num_at(j, "level");
}

void to_json(Json& j, const QQPoint& v) {
  j = Json{{"id", v.id},
           {"record", v.record},
           {"x", json_number(v.x)},
           {"y", json_number(v.y)},
           {"lo", json_number(v.lo)},
           {"hi", json_number(v.hi)}};
}
void from_json(const Json& j, QQPoint& v) {
  v.id = value_at<std::string>(j, "id", "");
  v.record = value_at<std::size_t>(j, "record", 0);
  v.x = num_at(j, "x");
  v.y = num_at(j, "y");
  v.lo = num_at(j, "lo");
  v.hi = num_at(j, "hi");
}

void to_json(Json& j, const QQData& v) {
  j = Json{{"strategy", std::string(to_string(v.strategy))},
           {"points", v.points},
           {"skipped", v.skipped},
           {"notes", v.notes}};
}
void from_json(const Json& j, QQData& v) {
  v.strategy = qq_strategy_from_string(j.at("strategy").get<std::string>());
  v.points = j.at("points").get<std::vector<QQPoint>>();
  v.skipped = value_at<std::vector<std::size_t>>(j, "skipped", {});
  v.notes = value_at<std::vector<std::string>>(j, "notes", {});
}

// ---------------------------------------------------------------------------
// Simulation

void to_json(Json& j, const RateFunction& v) {
  j = Json{{"knots", nums(v.knots())}, {"values", nums(v.values())}};
}
void from_json(const Json& j, RateFunction& v) {
  try {
    v = RateFunction(get_nums(j.at("knots")), get_nums(j.at("values")));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

void to_json(Json& j, const CohortSimConfig& v) {
  j = Json{{"experiment", "appendix_b"},
           {"years", json_number(v.years)},
           {"mean_annual", json_number(v.mean_annual)},
           {"law", v.law},
           {"params", v.params},
           {"c1", json_number(v.c1)},
           {"c2", json_number(v.c2)},
           {"seed", v.seed},
           {"replicates", v.replicates}};
  if (v.entry_rate) j["entry_rate"] = *v.entry_rate;
}
void from_json(const Json& j, CohortSimConfig& v) {
  v = CohortSimConfig{};
  v.years = num_at(j, "years", v.years);
  v.mean_annual = num_at(j, "mean_annual", v.mean_annual);
  if (j.contains("law")) v.law = j.at("law").get<ModelSpec>();
  if (j.contains("params")) v.params = j.at("params").get<ParamVector>();
  if (j.contains("entry_rate")) v.entry_rate = j.at("entry_rate").get<RateFunction>();
  v.c1 = num_at(j, "c1", v.c1);
  v.c2 = num_at(j, "c2", v.c2);
  v.seed = value_at<std::uint64_t>(j, "seed", v.seed);
  v.replicates = value_at<std::size_t>(j, "replicates", v.replicates);
}

void to_json(Json& j, const TabulationConfig& v) {
  j = Json{{"experiment", "japan_tabulation"},
           {"n", v.n},
           {"sigma", json_number(v.sigma)},
           {"xi", json_number(v.xi)},
           {"origin", json_number(v.origin)},
           {"entry_span", json_number(v.entry_span)},
           {"c2", json_number(v.c2)},
           {"bin_width", json_number(v.bin_width)},
           {"replicates", v.replicates},
           {"seed", v.seed}};
}
void from_json(const Json& j, TabulationConfig& v) {
  v = TabulationConfig{};
  v.n = value_at<std::size_t>(j, "n", v.n);
  v.sigma = num_at(j, "sigma", v.sigma);
  v.xi = num_at(j, "xi", v.xi);
  v.origin = num_at(j, "origin", v.origin);
  v.entry_span = num_at(j, "entry_span", v.entry_span);
  v.c2 = num_at(j, "c2", v.c2);
  v.bin_width = num_at(j, "bin_width", v.bin_width);
  v.replicates = value_at<std::size_t>(j, "replicates", v.replicates);
  v.seed = value_at<std::uint64_t>(j, "seed", v.seed);
}

void to_json(Json& j, const EstimatorSummary& v) {
  j = Json{{"name", v.name},         {"n", v.estimates.size()},
           {"mean", json_number(v.mean)}, {"bias", json_number(v.bias)},
           {"variance", json_number(v.variance)}, {"se_mean", json_number(v.se_mean)},
           {"z_bias", json_number(v.z_bias)}, {"min", json_number(v.min)},
           {"q25", json_number(v.q25)},   {"median", json_number(v.median)},
           {"q75", json_number(v.q75)},   {"max", json_number(v.max)},
           {"estimates", nums(v.estimates)}};
}
void from_json(const Json& j, EstimatorSummary& v) {
  v.name = value_at<std::string>(j, "name", "");
  v.estimates = nums_at(j, "estimates");
  v.mean = num_at(j, "mean");
  v.bias = num_at(j, "bias");
  v.variance = num_at(j, "variance");
  v.se_mean = num_at(j, "se_mean");
  v.z_bias = num_at(j, "z_bias");
  v.min = num_at(j, "min");
  v.q25 = num_at(j, "q25");
  v.median = num_at(j, "median");
  v.q75 = num_at(j, "q75");
  v.max = num_at(j, "max");
}

void to_json(Json& j, const ExtinctCohortResult& v) {
  j = Json{{"truth", json_number(v.truth)},
           {"estimators", v.estimators},
           {"replicates", v.replicates},
           {"dropped", v.dropped},
           {"replicate_index", v.replicate_index}};
}
void from_json(const Json& j, ExtinctCohortResult& v) {
  v.truth = num_at(j, "truth");
  v.estimators = j.at("estimators").get<std::vector<EstimatorSummary>>();
  v.replicates = value_at<std::size_t>(j, "replicates", 0);
  v.dropped = value_at<std::size_t>(j, "dropped", 0);
  v.replicate_index = value_at<std::vector<std::size_t>>(j, "replicate_index", {});
}

void to_json(Json& j, const TabulationResult& v) {
  j = Json{{"psi_true", json_number(v.psi_true)},
           {"median_exact", json_number(v.median_exact)},
           {"median_binned", json_number(v.median_binned)},
           {"exact_75", nums({v.exact_75_lo, v.exact_75_hi})},
           {"exact_95", nums({v.exact_95_lo, v.exact_95_hi})},
           {"binned_75", nums({v.binned_75_lo, v.binned_75_hi})},
           {"binned_95", nums({v.binned_95_lo, v.binned_95_hi})},
           {"frac_exact_above_150", json_number(v.frac_exact_above_150)},
           {"frac_binned_above_150", json_number(v.frac_binned_above_150)},
           {"ks_distance", json_number(v.ks_distance)},
           {"failures", v.failures},
           {"exact", nums(v.exact)},
           {"binned", nums(v.binned)},
           {"xi_exact", nums(v.xi_exact)},
           {"xi_binned", nums(v.xi_binned)}};
}
void from_json(const Json& j, TabulationResult& v) {
  v.psi_true = num_at(j, "psi_true");
  v.median_exact = num_at(j, "median_exact");
  v.median_binned = num_at(j, "median_binned");
  auto pair = [&](const char* key, double& lo, double& hi) {
    const auto xs = nums_at(j, key);
    if (xs.size() == 2) {
      lo = xs[0];
      hi = xs[1];
    }
  };
  pair("exact_75", v.exact_75_lo, v.exact_75_hi);
  pair("exact_95", v.exact_95_lo, v.exact_95_hi);
  pair("binned_75", v.binned_75_lo, v.binned_75_hi);
  pair("binned_95", v.binned_95_lo, v.binned_95_hi);
  v.frac_exact_above_150 = num_at(j, "frac_exact_above_150");
  v.frac_binned_above_150 = num_at(j, "frac_binned_above_150");
  v.ks_distance = num_at(j, "ks_distance");
  v.failures = value_at<std::size_t>(j, "failures", 0);
  v.exact = nums_at(j, "exact");
  v.binned = nums_at(j, "binned");
  v.xi_exact = nums_at(j, "xi_exact");
  v.xi_binned = nums_at(j, "xi_binned");
}

// ---------------------------------------------------------------------------
// Files

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<LifetimeRecord> read_records(const std::filesystem::path& path, std::string* units) {
  const Json j = read_json(path);
  try {
    if (units) *units = value_at<std::string>(j, "units", "days");
    auto recs = j.at("records").get<std::vector<LifetimeRecord>>();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (auto why = recs[i].violation()) {
        throw DataError("record " + std::to_string(i) + " ('" + recs[i].id + "'): " + *why);
      }
    }
    return recs;
  } catch (const Json::exception& e) {
    throw DataError("'" + path.string() + "' is not a records document: " + e.what());
  }
}

void write_records(const std::filesystem::path& path, std::span<const LifetimeRecord> records,
                   const std::string& units) {
  Json j{{"units", units}, {"records", Json::array()}};
  for (const auto& r : records) j["records"].push_back(r);
  write_json(path, j);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss << std::setprecision(12) << x;
  return ss.str();
}

double at_or_nan(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : kNaN; }

}  // namespace

std::string np_csv(const NPEstimate& np) {
  std::ostringstream ss;
  ss << "support,mass,survivor,cum_hazard,variance,at_risk,events\n";
  for (std::size_t i = 0; i < np.support.size(); ++i) {
    ss << fmt(np.support[i]) << ',' << fmt(at_or_nan(np.mass, i)) << ',' << fmt(at_or_nan(np.survivor, i))
       << ',' << fmt(at_or_nan(np.cum_hazard, i)) << ',' << fmt(at_or_nan(np.variance, i)) << ','
       << fmt(at_or_nan(np.at_risk, i)) << ',' << fmt(at_or_nan(np.events, i)) << '\n';
  }
  return ss.str();
}

std::string qq_csv(const QQData& qq) {
  std::ostringstream ss;
  ss << "position,value,lo,hi,record_id\n";
  for (const auto& p : qq.points) {
    ss << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.lo) << ',' << fmt(p.hi) << ',' << p.id << '\n';
  }
  return ss.str();
}

std::string profile_csv(const ProfileTrace& p) {
  std::ostringstream ss;
  ss << "psi,profile_loglik,sigma\n";
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    ss << fmt(p.grid[i]) << ',' << fmt(at_or_nan(p.values, i)) << ',' << fmt(at_or_nan(p.sigma, i)) << '\n';
  }
  return ss.str();
}

std::string hazard_band_csv(const HazardBand& b) {
  std::ostringstream ss;
  ss << "t,median,lo,hi,beyond_support\n";
  for (std::size_t i = 0; i < b.t.size(); ++i) {
    ss << fmt(b.t[i]) << ',' << fmt(b.median[i]) << ',' << fmt(b.lo[i]) << ',' << fmt(b.hi[i]) << ','
       << (b.beyond_support[i] ? 1 : 0) << '\n';
  }
  return ss.str();
}

std::string draws_csv(const PosteriorSample& s) {
  std::ostringstream ss;
  for (std::size_t k = 0; k < s.dim; ++k) ss << (k < s.names.size() ? s.names[k] : "p" + std::to_string(k)) << ',';
  ss << "log_posterior\n";
  for (std::size_t i = 0; i < s.draws.size(); ++i) {
    for (double x : s.draws[i]) ss << fmt(x) << ',';
    ss << fmt(at_or_nan(s.log_posterior, i)) << '\n';
  }
  return ss.str();
}

std::string extinct_csv(const ExtinctCohortResult& r) {
  std::ostringstream ss;
  ss << "replicate";
  for (const auto& e : r.estimators) ss << ',' << e.name;
  ss << '\n';
  for (std::size_t i = 0; i < r.replicate_index.size(); ++i) {
    ss << r.replicate_index[i];
    for (const auto& e : r.estimators) ss << ',' << fmt(at_or_nan(e.estimates, i));
    ss << '\n';
  }
  return ss.str();
}

std::string tabulation_csv(const TabulationResult& r) {
  std::ostringstream ss;
  ss << "replicate,psi_exact,psi_binned\n";
  const std::size_t n = std::max(r.exact.size(), r.binned.size());
  for (std::size_t i = 0; i < n; ++i) {
    ss << i << ',' << fmt(at_or_nan(r.exact, i)) << ',' << fmt(at_or_nan(r.binned, i)) << '\n';
  }
  return ss.str();
}

std::string fit_table(std::span<const FitResult> fits) {
  std::ostringstream ss;
  ss << std::left << std::setw(18) << "family" << std::right << std::setw(10) << "threshold" << std::setw(8)
     << "n_u" << std::setw(14) << "loglik" << "  estimates (se)\n";
  for (const auto& f : fits) {
    ss << std::left << std::setw(18) << to_string(f.spec.family) << std::right << std::setw(10)
       << fmt(f.threshold) << std::setw(8) << f.n_used << std::setw(14) << std::fixed << std::setprecision(3)
       << f.loglik << std::defaultfloat << "  ";
    const auto names = param_names(f.spec);
    for (std::size_t k = 0; k < f.mle.size(); ++k) {
      ss << names[k] << '=' << std::setprecision(4) << f.mle[k];
      if (k < f.std_errors.size() && std::isfinite(f.std_errors[k])) ss << " (" << f.std_errors[k] << ')';
      ss << (k + 1 < f.mle.size() ? "  " : "");
    }
    if (!f.converged) ss << "  [not converged]";
    if (f.at_boundary) ss << "  [boundary]";
    ss << '\n';
  }
  return ss.str();
}

}  // namespace longtail
