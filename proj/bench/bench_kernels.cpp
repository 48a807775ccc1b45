// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "longtail/likelihood.hpp"
#include "longtail/nonparam.hpp"
#include "longtail/parallel.hpp"

using namespace longtail;

namespace {

std::vector<LifetimeRecord> truncated_gp(std::size_t n, std::uint64_t seed) {
  const Model law(ModelSpec::of(Family::gen_pareto), {1.5, -0.1});
  Rng rng(seed);
  std::vector<LifetimeRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * rng.uniform();
    const IntervalSet trunc{Interval{a, a + 4.0 + 4.0 * rng.uniform()}};
    const double t = law.draw(rng, trunc);
    if (i % 3 == 0) {
      const double lo = std::floor(t * 4.0) / 4.0;
      out.push_back(LifetimeRecord::interval_censored(std::max(lo, a), std::min(lo + 0.25, trunc.upper()), trunc));
    } else {
      out.push_back(LifetimeRecord::observed(t, trunc));
    }
  }
  return out;
}

struct EmFixture {
  IndexedData data;
  std::vector<double> f, out;
  explicit EmFixture(std::size_t n) {
    const auto recs = truncated_gp(n, 11);
    const auto support = turnbull_support(recs);
    data = index_records(recs, support);
    f.assign(data.J, 1.0 / static_cast<double>(data.J));
    out.resize(data.J);
  }
};

void BM_EmStepSerial(benchmark::State& st) {
  EmFixture fx(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    em_step_serial(fx.data, fx.f, fx.out);
    benchmark::DoNotOptimize(fx.out.data());
  }
}

void BM_EmStepParallel(benchmark::State& st) {
  EmFixture fx(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    em_step_parallel(fx.data, fx.f, fx.out);
    benchmark::DoNotOptimize(fx.out.data());
  }
}

void BM_LoglikSerial(benchmark::State& st) {
  const auto recs = truncated_gp(static_cast<std::size_t>(st.range(0)), 5);
  const Model m(ModelSpec::of(Family::gen_pareto), {1.4, -0.08});
  for (auto _ : st) benchmark::DoNotOptimize(loglik_serial(m, recs));
}

void BM_LoglikParallel(benchmark::State& st) {
  const auto recs = truncated_gp(static_cast<std::size_t>(st.range(0)), 5);
  const Model m(ModelSpec::of(Family::gen_pareto), {1.4, -0.08});
  for (auto _ : st) benchmark::DoNotOptimize(loglik(m, recs));
}

// One bootstrap replicate: simulate from the null, refit both models.
double replicate(const std::vector<LifetimeRecord>& recs, const Model& null, std::size_t b) {
  Rng rng(3, b);
  const auto sim = simulate_like(null, recs, rng);
  FitOptions fo;
  fo.starts = 1;
  fo.information = false;
  const auto f0 = fit_mle(ModelSpec::of(Family::exponential), sim, 0.0, fo);
  const auto f1 = fit_mle(ModelSpec::of(Family::gen_pareto), sim, 0.0, fo);
  return 2.0 * (f1.loglik - f0.loglik);
}

void BM_BootstrapSerial(benchmark::State& st) {
  const auto recs = truncated_gp(200, 9);
  const Model null(ModelSpec::of(Family::exponential), {1.4});
  for (auto _ : st) {
    auto w = serial_map<double>(32, [&](std::size_t b) { return replicate(recs, null, b); });
    benchmark::DoNotOptimize(w.data());
  }
}

void BM_BootstrapParallel(benchmark::State& st) {
  const auto recs = truncated_gp(200, 9);
  const Model null(ModelSpec::of(Family::exponential), {1.4});
  for (auto _ : st) {
    auto w = parallel_map<double>(32, [&](std::size_t b) { return replicate(recs, null, b); });
    benchmark::DoNotOptimize(w.data());
  }
}

}  // namespace

BENCHMARK(BM_EmStepSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_EmStepParallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_LoglikSerial)->Arg(10000)->Arg(100000);
BENCHMARK(BM_LoglikParallel)->Arg(10000)->Arg(100000);
BENCHMARK(BM_BootstrapSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
