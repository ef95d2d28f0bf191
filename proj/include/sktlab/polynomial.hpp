#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sktlab/errors.hpp"

namespace sktlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

inline double ipow(double x, int e) {
  double r = 1.0;
  double b = x;
  while (e > 0) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

}  // namespace detail

/// coef * prod_i u_i^exps[i]
struct Monomial {
  double coef = 0.0;
  std::vector<int> exps;

  int degree() const {
    int d = 0;
    for (int e : exps) d += e;
    return d;
  }

  double eval(const Vec& u) const {
    double r = coef;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] != 0) r *= detail::ipow(u[static_cast<Eigen::Index>(i)], exps[i]);
    }
    return r;
  }

  /// d/du_j of this monomial.
  double derivative(const Vec& u, std::size_t j) const {
    if (exps[j] == 0) return 0.0;
    double r = coef * exps[j];
    for (std::size_t i = 0; i < exps.size(); ++i) {
      const int e = (i == j) ? exps[i] - 1 : exps[i];
      if (e != 0) r *= detail::ipow(u[static_cast<Eigen::Index>(i)], e);
    }
    return r;
  }
};

using Polynomial = std::vector<Monomial>;

namespace detail {

inline void check_terms(const Polynomial& terms, int m, const std::string& where) {
  for (const auto& t : terms) {
    if (static_cast<int>(t.exps.size()) != m) {
      throw ModelError(where + ": exponent vector has length " + std::to_string(t.exps.size()) +
                       ", expected " + std::to_string(m));
    }
    for (int e : t.exps) {
      if (e < 0) throw ModelError(where + ": negative exponent");
    }
    if (!std::isfinite(t.coef)) throw ModelError(where + ": non-finite coefficient");
  }
}

inline double eval_poly(const Polynomial& p, const Vec& u) {
  double s = 0.0;
  for (const auto& t : p) s += t.eval(u);
  return s;
}

/// Multiplies the coefficient of every term of degree d by factor(d).
template <class F>
Polynomial rescale(const Polynomial& p, F&& factor) {
  Polynomial out = p;
  for (auto& t : out) t.coef *= factor(t.degree());
  return out;
}

}  // namespace detail

/// A map R^m -> R^m whose components are polynomials.
class PolynomialMap {
 public:
  PolynomialMap() = default;

  PolynomialMap(int m, std::vector<Polynomial> components) : m_(m), comps_(std::move(components)) {
    if (m_ < 1) throw ModelError("polynomial map needs m >= 1");
    if (static_cast<int>(comps_.size()) != m_) {
      throw ModelError("polynomial map has " + std::to_string(comps_.size()) +
                       " components, expected " + std::to_string(m_));
    }
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      detail::check_terms(comps_[c], m_, "component " + std::to_string(c));
    }
  }

  /// The zero map on R^m.
  static PolynomialMap zero(int m) { return PolynomialMap(m, std::vector<Polynomial>(m)); }

  /// The identity map scaled by `scale`.
  static PolynomialMap identity(int m, double scale = 1.0) {
    std::vector<Polynomial> comps(m);
    for (int c = 0; c < m; ++c) {
      std::vector<int> e(m, 0);
      e[c] = 1;
      comps[c].push_back({scale, e});
    }
    return PolynomialMap(m, std::move(comps));
  }

  int dim() const { return m_; }
  const std::vector<Polynomial>& components() const { return comps_; }

  int max_degree() const {
    int d = 0;
    for (const auto& p : comps_)
      for (const auto& t : p) d = std::max(d, t.degree());
    return d;
  }

  bool has_constant_term() const {
    for (const auto& p : comps_)
      for (const auto& t : p)
        if (t.degree() == 0 && t.coef != 0.0) return true;
    return false;
  }

  Vec operator()(const Vec& u) const {
    check_arg(u);
    Vec out(m_);
    for (int c = 0; c < m_; ++c) out[c] = detail::eval_poly(comps_[c], u);
    return out;
  }

  /// Analytic Jacobian, row c = gradient of component c.
  Mat jacobian(const Vec& u) const {
    check_arg(u);
    Mat J = Mat::Zero(m_, m_);
    for (int c = 0; c < m_; ++c) {
      for (const auto& t : comps_[c]) {
        for (int j = 0; j < m_; ++j) J(c, j) += t.derivative(u, static_cast<std::size_t>(j));
      }
    }
    return J;
  }

  template <class F>
  PolynomialMap rescaled(F&& factor) const {
    std::vector<Polynomial> comps;
    comps.reserve(comps_.size());
    for (const auto& p : comps_) comps.push_back(detail::rescale(p, factor));
    return PolynomialMap(m_, std::move(comps));
  }

 private:
  void check_arg(const Vec& u) const {
    if (u.size() != m_) {
      throw ModelError("argument has dimension " + std::to_string(u.size()) + ", expected " +
                       std::to_string(m_));
    }
  }

  int m_ = 0;
  std::vector<Polynomial> comps_;
};

/// Matrix whose entries are polynomials in u in R^m. An empty entry list is
/// the zero polynomial; a default-constructed map (rows = cols = 0) is
/// treated as the zero matrix by callers.
class MatrixPolynomial {
 public:
  MatrixPolynomial() = default;

  MatrixPolynomial(int m, int rows, int cols, std::vector<Polynomial> entries_row_major)
      : m_(m), rows_(rows), cols_(cols), entries_(std::move(entries_row_major)) {
    if (rows_ < 0 || cols_ < 0) throw ModelError("negative matrix shape");
    if (static_cast<int>(entries_.size()) != rows_ * cols_) {
      throw ModelError("matrix polynomial has " + std::to_string(entries_.size()) +
                       " entries, expected " + std::to_string(rows_ * cols_));
    }
    for (const auto& e : entries_) detail::check_terms(e, m_, "matrix entry");
  }

  /// Constant matrix as a polynomial matrix in R^m.
  static MatrixPolynomial constant(int m, const Mat& M) {
    std::vector<Polynomial> entries(static_cast<std::size_t>(M.rows() * M.cols()));
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        if (M(r, c) != 0.0) {
          entries[static_cast<std::size_t>(r * M.cols() + c)].push_back(
              {M(r, c), std::vector<int>(m, 0)});
        }
      }
    }
    return MatrixPolynomial(m, static_cast<int>(M.rows()), static_cast<int>(M.cols()),
                            std::move(entries));
  }

  bool empty() const { return rows_ == 0 || cols_ == 0; }
  int dim() const { return m_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<Polynomial>& entries() const { return entries_; }
  const Polynomial& entry(int r, int c) const { return entries_[static_cast<std::size_t>(r * cols_ + c)]; }

  Mat operator()(const Vec& u) const {
    Mat M(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) M(r, c) = detail::eval_poly(entry(r, c), u);
    return M;
  }

  template <class F>
  MatrixPolynomial rescaled(F&& factor) const {
    std::vector<Polynomial> entries;
    entries.reserve(entries_.size());
    for (const auto& p : entries_) entries.push_back(detail::rescale(p, factor));
    return MatrixPolynomial(m_, rows_, cols_, std::move(entries));
  }

 private:
  int m_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Polynomial> entries_;
};

}  // namespace sktlab
