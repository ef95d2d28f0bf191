#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include "sktlab/errors.hpp"
#include "sktlab/polynomial.hpp"

namespace sktlab {

/// Gradients are m x 2 matrices, column d holding d/dx_d of every component.
/// Where a gradient multiplies a coefficient matrix it is flattened
/// column-major: (d_x u_1..d_x u_m, d_y u_1..d_y u_m).
using Gradient = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline Vec flatten(const Gradient& g) { return Eigen::Map<const Vec>(g.data(), g.size()); }

/// Coercivity envelope lambda(u) = lambda0 + lambda1 |u|^k.
struct LambdaSpec {
  double lambda0 = 1.0;
  double lambda1 = 0.0;
  double k = 1.0;

  void validate() const {
    if (!(lambda0 > 0.0)) throw ModelError("lambda0 must be > 0");
    if (!(lambda1 >= 0.0)) throw ModelError("lambda1 must be >= 0");
    if (!(k >= 0.0)) throw ModelError("k must be >= 0");
  }

  double operator()(const Vec& u) const {
    if (lambda1 == 0.0) return lambda0;
    return lambda0 + lambda1 * std::pow(u.norm(), k);
  }

  /// Gradient of lambda in u. At u = 0 the zero vector is returned (the
  /// gradient is only singular there when k < 1).
  Vec gradient(const Vec& u) const {
    const double r = u.norm();
    if (lambda1 == 0.0 || k == 0.0 || r == 0.0) return Vec::Zero(u.size());
    return (lambda1 * k * std::pow(r, k - 2.0)) * u;
  }

  double lambda_S() const { return lambda0 + lambda1; }
};

/// f^(u, g) = B(u) vec(g) + K u - G(u) u,
/// with G(u) = G_poly(u) + |u|^kappa G_norm.
struct CompetitiveReaction {
  Mat K;
  MatrixPolynomial B;
  MatrixPolynomial G;
  Mat G_norm;
  double kappa = 1.0;
  double c0 = 1.0;

  Mat G_at(const Vec& u) const {
    const auto m = u.size();
    Mat out = G.empty() ? Mat::Zero(m, m) : G(u);
    if (G_norm.size() != 0) {
      const double r = u.norm();
      out += (kappa == 0.0 ? 1.0 : std::pow(r, kappa)) * G_norm;
    }
    return out;
  }
};

/// f^(u, g) = B(u) vec(g) + f(u) for a polynomial map f.
struct GeneralReaction {
  MatrixPolynomial B;
  PolynomialMap f;
};

using ReactionSpec = std::variant<CompetitiveReaction, GeneralReaction>;

struct ModelSpec {
  std::string name;
  PolynomialMap P;
  LambdaSpec lambda;
  ReactionSpec reaction;
  double C_f = 1.0;

  int dim() const { return P.dim(); }
  bool competitive() const { return std::holds_alternative<CompetitiveReaction>(reaction); }

  void validate() const {
    const int m = P.dim();
    if (m < 1) throw ModelError("P must be defined (m >= 1)");
    if (P.has_constant_term()) throw ModelError("P has a constant term (P(0) must vanish)");
    lambda.validate();
    if (!(C_f > 0.0)) throw ModelError("C_f must be > 0");
    auto check_B = [m](const MatrixPolynomial& B) {
      if (B.empty()) return;
      if (B.dim() != m || B.rows() != m || B.cols() != 2 * m)
        throw ModelError("B must be an m x 2m matrix polynomial in R^m");
    };
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          check_B(r.B);
          if constexpr (std::is_same_v<T, CompetitiveReaction>) {
            if (r.K.rows() != m || r.K.cols() != m) throw ModelError("K must be m x m");
            if (!r.G.empty() && (r.G.dim() != m || r.G.rows() != m || r.G.cols() != m))
              throw ModelError("G must be an m x m matrix polynomial in R^m");
            if (r.G_norm.size() != 0 && (r.G_norm.rows() != m || r.G_norm.cols() != m))
              throw ModelError("G_norm must be m x m");
            if (!(r.kappa > 0.0)) throw ModelError("kappa must be > 0");
            if (r.kappa > lambda.k) throw ModelError("kappa must not exceed k");
            if (!(r.c0 > 0.0)) throw ModelError("c0 must be > 0");
          } else {
            if (r.f.dim() != m) throw ModelError("reaction map f has the wrong dimension");
          }
        },
        reaction);
  }
};

inline void check_dim(const ModelSpec& spec, const Vec& u) {
  if (u.size() != spec.dim()) {
    throw ModelError("state has dimension " + std::to_string(u.size()) + ", model has m = " +
                     std::to_string(spec.dim()));
  }
}

inline Vec eval_P(const ModelSpec& spec, const Vec& u) { return spec.P(u); }

inline Mat eval_A(const ModelSpec& spec, const Vec& u) { return spec.P.jacobian(u); }

inline double eval_lambda(const ModelSpec& spec, const Vec& u) {
  check_dim(spec, u);
  return spec.lambda(u);
}

/// Zero-order part f(u) of the reaction (the gradient-free terms).
inline Vec eval_zero_order(const ModelSpec& spec, const Vec& u) {
  check_dim(spec, u);
  return std::visit(
      [&](const auto& r) -> Vec {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, CompetitiveReaction>) {
          return r.K * u - r.G_at(u) * u;
        } else {
          return r.f(u);
        }
      },
      spec.reaction);
}

/// Gradient coefficient B(u) (m x 2m); zero when the model declares none.
inline Mat eval_B(const ModelSpec& spec, const Vec& u) {
  const auto& B = std::visit([](const auto& r) -> const MatrixPolynomial& { return r.B; }, spec.reaction);
  if (B.empty()) return Mat::Zero(spec.dim(), 2 * spec.dim());
  return B(u);
}

inline Vec eval_reaction(const ModelSpec& spec, const Vec& u, const Gradient& g) {
  check_dim(spec, u);
  if (g.rows() != spec.dim()) throw ModelError("gradient has the wrong number of rows");
  Vec out = eval_zero_order(spec, u);
  const auto& B = std::visit([](const auto& r) -> const MatrixPolynomial& { return r.B; }, spec.reaction);
  if (!B.empty()) out += B(u) * flatten(g);
  return out;
}

/// True when the reaction is identically zero (no B, no zero-order terms).
inline bool reaction_is_zero(const ModelSpec& spec) {
  return std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        auto zero_poly = [](const MatrixPolynomial& M) {
          for (const auto& e : M.entries())
            for (const auto& t : e)
              if (t.coef != 0.0) return false;
          return true;
        };
        if (!zero_poly(r.B)) return false;
        if constexpr (std::is_same_v<T, CompetitiveReaction>) {
          return r.K.isZero(0.0) && zero_poly(r.G) && (r.G_norm.size() == 0 || r.G_norm.isZero(0.0));
        } else {
          for (const auto& c : r.f.components())
            for (const auto& t : c)
              if (t.coef != 0.0) return false;
          return true;
        }
      },
      spec.reaction);
}

/// The model with A(sigma u) and f^(sigma u, sigma Du) in place of A and f^,
/// realised exactly by rescaling polynomial coefficients:
/// P_sigma(u) = P(sigma u)/sigma (so that its Jacobian is A(sigma u)).
inline ModelSpec with_sigma(const ModelSpec& spec, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw InputError("sigma must lie in [0,1]");
  if (sigma == 1.0) return spec;
  auto spow = [sigma](double e) { return e == 0.0 ? 1.0 : std::pow(sigma, e); };
  ModelSpec out = spec;
  out.name = spec.name + "@sigma";
  out.P = spec.P.rescaled([&](int d) { return spow(d - 1); });
  out.lambda.lambda1 = spec.lambda.lambda1 * spow(spec.lambda.k);
  out.reaction = std::visit(
      [&](const auto& r) -> ReactionSpec {
        using T = std::decay_t<decltype(r)>;
        T s = r;
        if (!r.B.empty()) s.B = r.B.rescaled([&](int d) { return spow(d + 1); });
        if constexpr (std::is_same_v<T, CompetitiveReaction>) {
          s.K = sigma * r.K;
          if (!r.G.empty()) s.G = r.G.rescaled([&](int d) { return spow(d + 1); });
          if (r.G_norm.size() != 0) s.G_norm = spow(r.kappa + 1.0) * r.G_norm;
        } else {
          s.f = r.f.rescaled([&](int d) { return spow(d); });
        }
        return s;
      },
      spec.reaction);
  return out;
}

inline GeneralReaction zero_reaction(int m) { return GeneralReaction{MatrixPolynomial{}, PolynomialMap::zero(m)}; }

/// P = scale * identity, lambda = scale, no reaction.
inline ModelSpec heat_model(int m = 1, double scale = 1.0) {
  ModelSpec s;
  s.name = "heat";
  s.P = PolynomialMap::identity(m, scale);
  s.lambda = LambdaSpec{scale, 0.0, 1.0};
  s.reaction = zero_reaction(m);
  s.C_f = 1.0;
  return s;
}

/// Competitive Lotka-Volterra reaction
///   f_1 = u (r1 - b11 u - b12 v),  f_2 = v (r2 - b21 u - b22 v).
struct LotkaVolterra {
  double r1 = 1.0, r2 = 1.0;
  double b11 = 1.0, b12 = 0.5, b21 = 0.5, b22 = 1.0;
};

struct SktParameters {
  double a1 = 1.0, a2 = 1.0;
  double alpha11 = 0.0, alpha12 = 0.0, alpha21 = 0.0, alpha22 = 0.0;
  /// Drift b_i u_i grad(Phi) for a potential with constant gradient.
  double b1 = 0.0, b2 = 0.0;
  double phi_x = 0.0, phi_y = 0.0;
  std::optional<LotkaVolterra> lotka_volterra;
  /// When unset, a C_f valid on the positive orthant is derived.
  std::optional<double> C_f;
};

namespace detail {

/// Smallest eigenvalue of the symmetric part of a 2x2 matrix.
inline double min_sym_eig2(const Eigen::Matrix2d& M) {
  const double a = M(0, 0), d = M(1, 1), b = 0.5 * (M(0, 1) + M(1, 0));
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

}  // namespace detail

/// The two-species SKT model: P = (a1 u + a11 u^2 + a12 u v, a2 v + a21 u v + a22 v^2).
///
/// lambda(u) = lambda0 + lambda1 |u| with lambda0 = min(a1, a2) and lambda1 a
/// lower bound, over directions in the closed positive quadrant, of the
/// smallest eigenvalue of the symmetrised linear part of A. By Weyl's
/// inequality this makes lambda a lower ellipticity envelope for u, v >= 0.
inline ModelSpec classic_skt(const SktParameters& p) {
  using M2 = Eigen::Matrix2d;
  const std::vector<int> u1{1, 0}, v1{0, 1}, uu{2, 0}, uv{1, 1}, vv{0, 2};
  std::vector<Polynomial> comps(2);
  auto push = [](Polynomial& poly, double c, const std::vector<int>& e) {
    if (c != 0.0) poly.push_back({c, e});
  };
  push(comps[0], p.a1, u1);
  push(comps[0], p.alpha11, uu);
  push(comps[0], p.alpha12, uv);
  push(comps[1], p.a2, v1);
  push(comps[1], p.alpha21, uv);
  push(comps[1], p.alpha22, vv);

  ModelSpec s;
  s.name = "classic_skt";
  s.P = PolynomialMap(2, std::move(comps));

  double slope = std::numeric_limits<double>::infinity();
  constexpr int kAngles = 2001;
  for (int i = 0; i < kAngles; ++i) {
    const double th = 0.5 * std::numbers::pi * i / (kAngles - 1);
    const double c = std::cos(th), sn = std::sin(th);
    M2 L;
    L << 2 * p.alpha11 * c + p.alpha12 * sn, p.alpha12 * c, p.alpha21 * sn, p.alpha21 * c + 2 * p.alpha22 * sn;
    slope = std::min(slope, detail::min_sym_eig2(L));
  }
  s.lambda = LambdaSpec{std::min(p.a1, p.a2), std::max(0.0, 0.98 * slope), 1.0};

  if (p.lotka_volterra) {
    const auto& lv = *p.lotka_volterra;
    CompetitiveReaction r;
    r.K = Mat::Zero(2, 2);
    r.K(0, 0) = lv.r1;
    r.K(1, 1) = lv.r2;
    std::vector<Polynomial> g(4);
    push(g[0], lv.b11, u1);
    push(g[0], lv.b12, v1);
    push(g[3], lv.b21, u1);
    push(g[3], lv.b22, v1);
    r.G = MatrixPolynomial(2, 2, 2, std::move(g));
    r.kappa = 1.0;
    r.c0 = std::min({lv.b11, lv.b12, lv.b21, lv.b22});
    if (!(r.c0 > 0.0)) r.c0 = std::numeric_limits<double>::min();
    if (p.b1 != 0.0 || p.b2 != 0.0) {
      Mat B = Mat::Zero(2, 4);
      B(0, 0) = p.b1 * p.phi_x;
      B(0, 2) = p.b1 * p.phi_y;
      B(1, 1) = p.b2 * p.phi_x;
      B(1, 3) = p.b2 * p.phi_y;
      r.B = MatrixPolynomial::constant(2, B);
    }
    s.reaction = r;
    if (p.C_f) {
      s.C_f = *p.C_f;
    } else {
      // |f(u)| <= (max|r_i| + g |u|) |u| with g = max_i |(b_i1, b_i2)|.
      const double rmax = std::max(std::abs(lv.r1), std::abs(lv.r2));
      const double gmax = std::max(std::hypot(lv.b11, lv.b12), std::hypot(lv.b21, lv.b22));
      const double lam0 = s.lambda.lambda0, lam1 = s.lambda.lambda1;
      double need = rmax / lam0;
      if (gmax > 0.0) need = std::max(need, lam1 > 0.0 ? gmax / lam1 : 1e300);
      s.C_f = std::max(need * s.lambda.lambda_S(), 1e-12);
    }
  } else {
    GeneralReaction r = zero_reaction(2);
    if (p.b1 != 0.0 || p.b2 != 0.0) {
      Mat B = Mat::Zero(2, 4);
      B(0, 0) = p.b1 * p.phi_x;
      B(0, 2) = p.b1 * p.phi_y;
      B(1, 1) = p.b2 * p.phi_x;
      B(1, 3) = p.b2 * p.phi_y;
      r.B = MatrixPolynomial::constant(2, B);
    }
    s.reaction = r;
    s.C_f = p.C_f.value_or(1.0);
  }
  s.validate();
  return s;
}

}  // namespace sktlab
