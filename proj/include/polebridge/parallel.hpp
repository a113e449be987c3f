#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "polebridge/errors.hpp"

namespace polebridge {

inline constexpr double kFailureBudget = 1e-3;

/// Worker count: explicit request, else POLEBRIDGE_JOBS, else the hardware count.
inline int resolve_jobs(std::optional<int> requested = std::nullopt) {
  if (requested) {
    if (*requested < 1) throw InputError("jobs must be >= 1");
    return *requested;
  }
  if (const char* env = std::getenv("POLEBRIDGE_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw InputError(std::string("POLEBRIDGE_JOBS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [0, count) on `jobs` threads. Work is handed out in
/// fixed index chunks; callers write results by index, so the outcome does not
/// depend on scheduling. The first exception thrown by any body is rethrown.
template <class Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
  constexpr std::size_t chunk = 16;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(chunks, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks || stop.load()) return;
      try {
        for (std::size_t i = c * chunk; i < std::min(count, (c + 1) * chunk); ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

/// Per-path outcomes: results by index, with failed simulations left empty.
template <class Result>
struct PathResults {
  std::vector<std::optional<Result>> items;
  std::size_t failed = 0;

  /// Successful results in index order.
  std::vector<Result> successes() const {
    std::vector<Result> out;
    out.reserve(items.size() - failed);
    for (const auto& r : items)
      if (r) out.push_back(*r);
    return out;
  }
};

/// Evaluates fn(i) for every path. SimulationError and NumericalError mark the
/// path as failed; more than kFailureBudget of failures raises FailureBudgetError.
template <class Result, class Fn>
PathResults<Result> run_paths(std::size_t n_paths, int jobs, Fn&& fn) {
  PathResults<Result> out;
  out.items.resize(n_paths);
  std::vector<char> failed(n_paths, 0);
  parallel_for(n_paths, jobs, [&](std::size_t i) {
    try {
      out.items[i] = fn(i);
    } catch (const SimulationError&) {
      failed[i] = 1;
    } catch (const NumericalError&) {
      failed[i] = 1;
    }
  });
  for (char f : failed) out.failed += static_cast<std::size_t>(f);
  if (static_cast<double>(out.failed) > kFailureBudget * static_cast<double>(n_paths))
    throw FailureBudgetError(out.failed, n_paths);
  return out;
}

}  // namespace polebridge
