#include "mlkbf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mlkbf/errors.hpp"

namespace mlkbf {

int worker_count() {
  if (const char* env = std::getenv("MLKBF_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  const int workers = std::min<std::int64_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double kahan_sum(std::span<const double> xs) {
  // Neumaier variant: compensates in both directions, so cancellation of
  // large terms against a small running sum is handled too.
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double kahan_mean(std::span<const double> xs) {
  if (xs.empty()) throw DimensionMismatch("mean of an empty sample");
  return kahan_sum(xs) / double(xs.size());
}

double mean_squared_deviation(std::span<const double> xs, double center) {
  if (xs.empty()) throw DimensionMismatch("mean of an empty sample");
  std::vector<double> sq(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - center;
    sq[i] = d * d;
  }
  return kahan_sum(sq) / double(xs.size());
}

std::pair<double, double> fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw NonPositivePoint("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw NonPositivePoint("slope fit needs positive coordinates");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = double(points.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw NonPositivePoint("slope fit is degenerate: all x equal");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

void RateExperimentConfig::validate() const {
  if (L_list.empty()) throw ConfigError("rate experiment needs at least one target level");
  int l_max = L_list[0];
  for (int L : L_list) {
    l_max = std::max(l_max, L);
    if (L < l_star) throw ConfigError("every target level must be >= l_star");
  }
  if (l_ref <= l_max) throw ConfigError("l_ref must exceed every target level");
  if (repetitions < 2) throw ConfigError("need at least two repetitions");
  if (ref_repetitions < 2) throw ConfigError("need at least two reference repetitions");
  if (ref_particles < 2) throw ConfigError("need at least two reference particles");
  if (horizon < 1) throw ConfigError("horizon must be at least one time unit");
  if (data_level() < l_ref) throw ConfigError("l_data must be at least l_ref");
}

double reference_value(const ModelSpec& model, const IncrementPath& obs, int l_ref,
                       int ref_repetitions, int ref_particles, VariantId variant,
                       std::uint64_t seed) {
  std::vector<double> values(static_cast<size_t>(ref_repetitions));
  parallel_for(ref_repetitions, [&](std::int64_t r) {
    values[size_t(r)] =
        enkbf_run(model, obs, l_ref, ref_particles, variant, {seed, std::uint32_t(r)}).log_nc.u;
  });
  return kahan_mean(values);
}

std::vector<ExperimentRecord> run_rate_experiment(const RateExperimentConfig& config,
                                                  const ModelSpec& model) {
  config.validate();
  auto [sig, obs] = simulate_truth_and_obs(model, config.data_level(), config.horizon, config.seed);
  (void)sig;
  return run_rate_experiment(config, model, obs);
}

std::vector<ExperimentRecord> run_rate_experiment(const RateExperimentConfig& config,
                                                  const ModelSpec& model,
                                                  const IncrementPath& obs) {
  config.validate();
  const double ref = reference_value(model, obs, config.l_ref, config.ref_repetitions,
                                     config.ref_particles, config.variant, config.seed);

  std::vector<ExperimentRecord> records;
  for (int L : config.L_list) {
    const std::vector<int> alloc = sample_allocation(config.c0, config.l_star, L);
    const int n_single = alloc.back();

    std::vector<double> sl(static_cast<size_t>(config.repetitions));
    std::vector<double> ml(static_cast<size_t>(config.repetitions));
    parallel_for(config.repetitions, [&](std::int64_t r) {
      const RunContext ctx{config.seed, std::uint32_t(r)};
      sl[size_t(r)] = enkbf_run(model, obs, L, n_single, config.variant, ctx).log_nc.u;
      MLConfig mlc{config.l_star, L, alloc, config.variant};
      ml[size_t(r)] = ml_log_nc(model, obs, mlc, ctx).u_ml;
    });

    const double horizon = double(obs.horizon);
    ExperimentRecord rec_sl{"SL", config.variant, L, mean_squared_deviation(sl, ref),
                            double(n_single) * std::ldexp(1.0, L) * horizon, config.repetitions};
    double ml_cost = 0.0;
    for (size_t i = 0; i < alloc.size(); ++i) {
      ml_cost += double(alloc[i]) * std::ldexp(1.0, config.l_star + int(i)) * horizon;
    }
    ExperimentRecord rec_ml{"ML", config.variant, L, mean_squared_deviation(ml, ref), ml_cost,
                            config.repetitions};
    records.push_back(std::move(rec_sl));
    records.push_back(std::move(rec_ml));
  }
  return records;
}

}  // namespace mlkbf
