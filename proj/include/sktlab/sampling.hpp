#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sktlab/errors.hpp"
#include "sktlab/polynomial.hpp"

namespace sktlab {

/// Axis-aligned sampling box in R^m.
struct Box {
  Vec lo;
  Vec hi;

  static Box symmetric(int m, double U) { return {Vec::Constant(m, -U), Vec::Constant(m, U)}; }
  static Box orthant(int m, double U) { return {Vec::Zero(m), Vec::Constant(m, U)}; }

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size()) throw InputError("sampling box has inconsistent dimensions");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!(hi[i] > lo[i])) throw InputError("sampling box is degenerate along axis " + std::to_string(i));
    }
  }
};

namespace detail {

inline double radical_inverse(std::uint64_t n, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (n > 0) {
    r += f * static_cast<double>(n % base);
    n /= base;
    f *= inv;
  }
  return r;
}

inline constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace detail

/// Deterministic sample set: the first half is a Halton sequence (offset by a
/// seed-dependent start index), the second half uniform points from a seeded
/// mt19937_64. Box corners are always included.
inline std::vector<Vec> sample_box(const Box& box, std::size_t n, std::uint64_t seed) {
  box.validate();
  const int m = box.dim();
  if (m > static_cast<int>(std::size(detail::kPrimes))) throw InputError("sampling supports m <= 16");
  if (n == 0) throw InputError("sample count must be >= 1");
  std::vector<Vec> out;
  out.reserve(n);
  const Vec span = box.hi - box.lo;

  const std::size_t corners = (m <= 4) ? (std::size_t{1} << m) : 0;
  for (std::size_t c = 0; c < corners && out.size() < n; ++c) {
    Vec u(m);
    for (int i = 0; i < m; ++i) u[i] = ((c >> i) & 1u) ? box.hi[i] : box.lo[i];
    out.push_back(u);
  }
  const std::size_t n_halton = (n - out.size()) / 2 + (n - out.size()) % 2;
  const std::uint64_t start = 1 + (seed % 9973);
  for (std::size_t k = 0; k < n_halton; ++k) {
    Vec u(m);
    for (int i = 0; i < m; ++i) u[i] = box.lo[i] + span[i] * detail::radical_inverse(start + k, detail::kPrimes[i]);
    out.push_back(u);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (out.size() < n) {
    Vec u(m);
    for (int i = 0; i < m; ++i) u[i] = box.lo[i] + span[i] * unif(rng);
    out.push_back(u);
  }
  return out;
}

}  // namespace sktlab
