#include "conformal_lab/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace conformal_lab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::domain: return "domain";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::mismatch: return "mismatch";
    case ErrorKind::parse: return "parse";
    case ErrorKind::not_homeomorphism: return "not_homeomorphism";
    case ErrorKind::unsupported_profile: return "unsupported_profile";
    case ErrorKind::inadmissible_map: return "inadmissible_map";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::composition: return "composition";
    case ErrorKind::singular_argument: return "singular_argument";
    case ErrorKind::init: return "init";
    case ErrorKind::stall: return "stall";
    case ErrorKind::solver: return "solver";
  }
  return "unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::inadmissible_map:
    case ErrorKind::coverage:
    case ErrorKind::composition:
    case ErrorKind::singular_argument:
    case ErrorKind::init:
    case ErrorKind::stall:
    case ErrorKind::solver:
      return true;
    default:
      return false;
  }
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }
int thread_count() { return g_threads.load(); }

namespace detail {

void parallel_chunks(std::size_t n, std::size_t min_chunk,
                     void (*body)(void*, std::size_t, std::size_t), void* ctx) {
  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(thread_count()),
      std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    body(ctx, 0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([=] { body(ctx, begin, end); });
  }
  body(ctx, 0, std::min(n, chunk));
}

}  // namespace detail

namespace {
template <class T>
T pairwise(const T* v, std::size_t n) {
  if (n <= 16) {
    T s{};
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise(v, half) + pairwise(v + half, n - half);
}
}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise(values.data(), values.size());
}

Complex pairwise_sum(std::span<const Complex> values) {
  return pairwise(values.data(), values.size());
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) {
    x = mix64(x);
    s = x;
  }
}

std::uint64_t Rng::next() {
  auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace conformal_lab
