#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hardylab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Deterministic counter-based random source.
//
// Every random draw is a pure function of (seed, stream, counter), so results
// never depend on thread scheduling or call order.
// ---------------------------------------------------------------------------
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t x = seed_;
    x = mix(x ^ mix(stream + 0x9e3779b97f4a7c15ull));
    x = mix(x ^ mix(counter + 0xbf58476d1ce4e5b9ull));
    return x;
  }

  // uniform in [0,1)
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream, std::uint64_t counter, double a, double b) const {
    return a + (b - a) * uniform(stream, counter);
  }

  double log_uniform(std::uint64_t stream, std::uint64_t counter, double a, double b) const {
    return a * std::exp(uniform(stream, counter) * std::log(b / a));
  }

  int uniform_int(std::uint64_t stream, std::uint64_t counter, int n) const {
    return static_cast<int>(bits(stream, counter) % static_cast<std::uint64_t>(n));
  }

  // standard normal via Box-Muller on two counter slots
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    double u1 = uniform(stream, 2 * counter);
    double u2 = uniform(stream, 2 * counter + 1);
    u1 = std::max(u1, 0x1.0p-60);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  static std::uint64_t stream_of(const std::string& tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Parallel helpers. HARDY_LAB_THREADS caps the worker count. Work is split
// into fixed chunks and partial results merge in chunk order, so reductions
// are bit-reproducible regardless of the actual thread count.
// ---------------------------------------------------------------------------
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  int n = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("HARDY_LAB_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, n);
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  int workers = worker_count();
  if (workers <= 1 || n < 64) {
    body(0, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = std::min(n, w * chunk);
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// Reduce over [0,n) with per-chunk partials merged in chunk order.
template <typename T, typename ChunkFn, typename MergeFn>
T parallel_reduce(std::size_t n, T init, ChunkFn chunk_fn, MergeFn merge) {
  int workers = worker_count();
  if (workers <= 1 || n < 64) return chunk_fn(0, n, init);
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<T> partial;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = std::min(n, w * chunk);
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    ranges.emplace_back(lo, hi);
    partial.push_back(init);
  }
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    pool.emplace_back([&, k] { partial[k] = chunk_fn(ranges[k].first, ranges[k].second, init); });
  }
  for (auto& t : pool) t.join();
  T acc = init;
  for (const T& p : partial) acc = merge(acc, p);
  return acc;
}

// ---------------------------------------------------------------------------
// Geometric grids. Anchored at the top end so the grid always contains `hi`
// exactly; used for every sup-over-t and sup-over-r computation.
// ---------------------------------------------------------------------------
inline std::vector<double> geometric_grid(double lo, double hi, double ratio) {
  if (!(lo > 0.0) || !(hi >= lo) || !(ratio > 1.0))
    throw std::invalid_argument("geometric_grid: need 0 < lo <= hi and ratio > 1");
  std::vector<double> g;
  double t = hi;
  while (t > lo * (1.0 + 1e-12)) {
    g.push_back(t);
    t /= ratio;
  }
  g.push_back(lo);
  std::reverse(g.begin(), g.end());
  return g;
}

// default grid ratio: eighth-octave
inline constexpr double kGridRatio = 1.0905077326652577;  // 2^(1/8)

struct RunningMax {
  double value = -kInf;
  std::string witness;

  void offer(double v, const std::string& w) {
    if (v > value) {
      value = v;
      witness = w;
    }
  }
  void offer(double v) {
    if (v > value) value = v;
  }
  // ties resolve lexicographically so the merge order cannot matter
  static RunningMax merge(const RunningMax& a, const RunningMax& b) {
    if (b.value > a.value) return b;
    if (b.value == a.value && b.witness < a.witness) return b;
    return a;
  }
};

inline double sq(double x) { return x * x; }

}  // namespace hardylab
