#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace conformal_lab {

inline constexpr std::string_view kVersion = "0.3.0";

/// Points of the plane and values of maps are both stored as complex numbers.
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
  bounds,
  domain,
  geometry,
  mismatch,
  parse,
  not_homeomorphism,
  unsupported_profile,
  inadmissible_map,
  coverage,
  composition,
  singular_argument,
  init,
  stall,
  solver,
};

std::string_view to_string(ErrorKind kind);

/// Numerical failures (exit code 3 in the CLI) as opposed to invalid input.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Worker cap used by every parallel loop in the library. Results never
/// depend on it: loops write into per-index slots and reductions use a fixed
/// summation tree.
void set_thread_count(int n);
int thread_count();

namespace detail {
void parallel_chunks(std::size_t n, std::size_t min_chunk,
                     void (*body)(void*, std::size_t, std::size_t), void* ctx);
}

/// Calls f(i) for i in [0, n). f must only write state owned by index i.
template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t min_chunk = 2048) {
  auto body = [](void* ctx, std::size_t begin, std::size_t end) {
    auto& fn = *static_cast<std::remove_reference_t<F>*>(ctx);
    for (std::size_t i = begin; i < end; ++i) fn(i);
  };
  detail::parallel_chunks(n, min_chunk, body, static_cast<void*>(&f));
}

/// Sum with a fixed pairwise tree; bit-identical for a given input order.
double pairwise_sum(std::span<const double> values);
Complex pairwise_sum(std::span<const Complex> values);

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// splitmix64 mixing step.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent seed for a named substream of a master seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

/// Small portable generator (xoshiro256**); distributions are computed by
/// hand so that streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t s_[4];
};

}  // namespace conformal_lab
