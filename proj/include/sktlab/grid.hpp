#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sktlab/errors.hpp"
#include "sktlab/model.hpp"

namespace sktlab {

enum class Boundary { NeumannZero, DirichletZero };

inline const char* to_string(Boundary b) { return b == Boundary::NeumannZero ? "neumann" : "dirichlet"; }

/// Cell-centred uniform grid on [0,Lx] x [0,Ly].
struct Grid2D {
  double Lx = 1.0, Ly = 1.0;
  int Nx = 2, Ny = 2;
  double hx = 0.5, hy = 0.5;
  Boundary bc = Boundary::NeumannZero;

  std::size_t cells() const { return static_cast<std::size_t>(Nx) * static_cast<std::size_t>(Ny); }
  double cell_area() const { return hx * hy; }
  double area() const { return Lx * Ly; }
  double x(int i) const { return (i + 0.5) * hx; }
  double y(int j) const { return (j + 0.5) * hy; }
  std::size_t cell(int i, int j) const { return static_cast<std::size_t>(j) * Nx + i; }

  bool operator==(const Grid2D&) const = default;
};

inline Grid2D build_grid(double Lx, double Ly, int Nx, int Ny, Boundary bc) {
  if (!(Lx > 0.0) || !(Ly > 0.0)) throw InputError("domain lengths must be positive");
  if (Nx < 2 || Ny < 2) throw InputError("grid needs at least 2 cells per direction");
  return Grid2D{Lx, Ly, Nx, Ny, Lx / Nx, Ly / Ny, bc};
}

/// m-component grid function. Values are stored component-major, each
/// component row-major in (j, i): index = (c * Ny + j) * Nx + i.
class Field {
 public:
  Field() = default;
  Field(const Grid2D& grid, int m, double value = 0.0)
      : grid_(grid), m_(m), v_(static_cast<std::size_t>(m) * grid.cells(), value) {
    if (m < 1) throw InputError("field needs m >= 1");
  }

  /// Field with u_c(x, y) = f(c, x, y) at cell centres.
  static Field from_function(const Grid2D& grid, int m, const std::function<double(int, double, double)>& f) {
    Field u(grid, m);
    for (int c = 0; c < m; ++c)
      for (int j = 0; j < grid.Ny; ++j)
        for (int i = 0; i < grid.Nx; ++i) u(c, i, j) = f(c, grid.x(i), grid.y(j));
    return u;
  }

  const Grid2D& grid() const { return grid_; }
  int components() const { return m_; }
  std::size_t size() const { return v_.size(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator()(int c, int i, int j) { return v_[index(c, i, j)]; }
  double operator()(int c, int i, int j) const { return v_[index(c, i, j)]; }

  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * grid_.Ny + j) * grid_.Nx + i;
  }

  Vec state(int i, int j) const {
    Vec s(m_);
    for (int c = 0; c < m_; ++c) s[c] = (*this)(c, i, j);
    return s;
  }

  void set_state(int i, int j, const Vec& s) {
    for (int c = 0; c < m_; ++c) (*this)(c, i, j) = s[c];
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double max_abs() const {
    double r = 0.0;
    for (double x : v_) r = std::max(r, std::abs(x));
    return r;
  }

  /// Area-weighted integral of component c.
  double integral(int c) const {
    double s = 0.0;
    const std::size_t n = grid_.cells();
    for (std::size_t k = 0; k < n; ++k) s += v_[c * n + k];
    return s * grid_.cell_area();
  }

  Field& operator+=(const Field& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

 private:
  Grid2D grid_;
  int m_ = 0;
  std::vector<double> v_;
};

namespace detail {

inline void require_finite(const Field& u, const char* where) {
  if (!u.all_finite()) throw NumericalStateError(std::string(where) + ": non-finite input field");
}

inline void require_model_dim(const Field& u, const ModelSpec& spec) {
  if (u.components() != spec.dim())
    throw ModelError("field has " + std::to_string(u.components()) + " components, model has m = " +
                     std::to_string(spec.dim()));
}

/// Ghost state across a boundary face: even reflection (Neumann) or odd
/// reflection through 0 (Dirichlet).
inline Vec ghost(const Vec& inner, Boundary bc) { return bc == Boundary::NeumannZero ? inner : Vec(-inner); }

}  // namespace detail

/// Conservative flux form of Div(A(u) Du): the flux through each face is
/// A(face-average state) times the two-point difference quotient.
inline Field div_A_grad(const Field& u, const ModelSpec& spec) {
  detail::require_finite(u, "div_A_grad");
  detail::require_model_dim(u, spec);
  const Grid2D& g = u.grid();
  const int m = u.components();
  Field out(g, m);
  auto add = [&](int i, int j, const Vec& v) {
    for (int c = 0; c < m; ++c) out(c, i, j) += v[c];
  };
  // x faces, including the two boundary columns.
  for (int j = 0; j < g.Ny; ++j) {
    for (int i = -1; i < g.Nx; ++i) {
      const bool left_in = i >= 0, right_in = i + 1 < g.Nx;
      const Vec uL = left_in ? u.state(i, j) : detail::ghost(u.state(0, j), g.bc);
      const Vec uR = right_in ? u.state(i + 1, j) : detail::ghost(u.state(g.Nx - 1, j), g.bc);
      const Vec flux = eval_A(spec, 0.5 * (uL + uR)) * (uR - uL) / g.hx;
      if (left_in) add(i, j, flux / g.hx);
      if (right_in) add(i + 1, j, -flux / g.hx);
    }
  }
  for (int j = -1; j < g.Ny; ++j) {
    for (int i = 0; i < g.Nx; ++i) {
      const bool low_in = j >= 0, high_in = j + 1 < g.Ny;
      const Vec uL = low_in ? u.state(i, j) : detail::ghost(u.state(i, 0), g.bc);
      const Vec uR = high_in ? u.state(i, j + 1) : detail::ghost(u.state(i, g.Ny - 1), g.bc);
      const Vec flux = eval_A(spec, 0.5 * (uL + uR)) * (uR - uL) / g.hy;
      if (low_in) add(i, j, flux / g.hy);
      if (high_in) add(i, j + 1, -flux / g.hy);
    }
  }
  return out;
}

/// Five-point Laplacian of the grid function P(u), with the ghost convention
/// of div_A_grad applied to P(u) itself (P(0) = 0 is the Dirichlet value).
inline Field laplacian_of_P(const Field& u, const ModelSpec& spec) {
  detail::require_finite(u, "laplacian_of_P");
  detail::require_model_dim(u, spec);
  const Grid2D& g = u.grid();
  const int m = u.components();
  Field Pu(g, m);
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i) Pu.set_state(i, j, eval_P(spec, u.state(i, j)));

  Field out(g, m);
  auto add = [&](int i, int j, const Vec& v) {
    for (int c = 0; c < m; ++c) out(c, i, j) += v[c];
  };
  for (int j = 0; j < g.Ny; ++j) {
    for (int i = -1; i < g.Nx; ++i) {
      const bool left_in = i >= 0, right_in = i + 1 < g.Nx;
      const Vec pL = left_in ? Pu.state(i, j) : detail::ghost(Pu.state(0, j), g.bc);
      const Vec pR = right_in ? Pu.state(i + 1, j) : detail::ghost(Pu.state(g.Nx - 1, j), g.bc);
      const Vec flux = (pR - pL) / g.hx;
      if (left_in) add(i, j, flux / g.hx);
      if (right_in) add(i + 1, j, -flux / g.hx);
    }
  }
  for (int j = -1; j < g.Ny; ++j) {
    for (int i = 0; i < g.Nx; ++i) {
      const bool low_in = j >= 0, high_in = j + 1 < g.Ny;
      const Vec pL = low_in ? Pu.state(i, j) : detail::ghost(Pu.state(i, 0), g.bc);
      const Vec pR = high_in ? Pu.state(i, j + 1) : detail::ghost(Pu.state(i, g.Ny - 1), g.bc);
      const Vec flux = (pR - pL) / g.hy;
      if (low_in) add(i, j, flux / g.hy);
      if (high_in) add(i, j + 1, -flux / g.hy);
    }
  }
  return out;
}

/// Per-cell m x 2 gradients.
class GradientField {
 public:
  GradientField(const Grid2D& g, int m) : grid_(g), m_(m), d_(2 * static_cast<std::size_t>(m) * g.cells(), 0.0) {}

  Gradient at(int i, int j) const {
    Gradient G(m_, 2);
    const std::size_t base = 2 * static_cast<std::size_t>(m_) * grid_.cell(i, j);
    for (int d = 0; d < 2; ++d)
      for (int c = 0; c < m_; ++c) G(c, d) = d_[base + d * m_ + c];
    return G;
  }
  double& operator()(int c, int d, int i, int j) {
    return d_[2 * static_cast<std::size_t>(m_) * grid_.cell(i, j) + d * m_ + c];
  }
  double operator()(int c, int d, int i, int j) const {
    return d_[2 * static_cast<std::size_t>(m_) * grid_.cell(i, j) + d * m_ + c];
  }
  /// |Du|^2 at a cell (Frobenius norm over components and directions).
  double squared_norm(int i, int j) const {
    const std::size_t base = 2 * static_cast<std::size_t>(m_) * grid_.cell(i, j);
    double s = 0.0;
    for (std::size_t k = 0; k < 2 * static_cast<std::size_t>(m_); ++k) s += d_[base + k] * d_[base + k];
    return s;
  }
  const Grid2D& grid() const { return grid_; }
  int components() const { return m_; }

 private:
  Grid2D grid_;
  int m_;
  std::vector<double> d_;
};

/// Central differences, closed at the boundary with the ghost convention.
inline GradientField cell_gradient(const Field& u) {
  detail::require_finite(u, "cell_gradient");
  const Grid2D& g = u.grid();
  const int m = u.components();
  const double sgn = g.bc == Boundary::NeumannZero ? 1.0 : -1.0;
  GradientField G(g, m);
  for (int c = 0; c < m; ++c) {
    for (int j = 0; j < g.Ny; ++j) {
      for (int i = 0; i < g.Nx; ++i) {
        const double w = i > 0 ? u(c, i - 1, j) : sgn * u(c, 0, j);
        const double e = i + 1 < g.Nx ? u(c, i + 1, j) : sgn * u(c, g.Nx - 1, j);
        const double s = j > 0 ? u(c, i, j - 1) : sgn * u(c, i, 0);
        const double n = j + 1 < g.Ny ? u(c, i, j + 1) : sgn * u(c, i, g.Ny - 1);
        G(c, 0, i, j) = (e - w) / (2.0 * g.hx);
        G(c, 1, i, j) = (n - s) / (2.0 * g.hy);
      }
    }
  }
  return G;
}

}  // namespace sktlab
