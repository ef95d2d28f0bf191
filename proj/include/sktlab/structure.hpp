#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "sktlab/model.hpp"
#include "sktlab/sampling.hpp"

namespace sktlab {

struct StructureOptions {
  /// SG') constant; only some delta_k < 1 is required.
  double delta_k = 0.99;
  /// Relative tolerance of the ellipticity test mineig >= lambda (1 - tol).
  double tol_ell = 1e-9;
  /// Relative step of the central differences used for f_u.
  double fd_step = 1e-6;
};

/// Sampled certificates for the structural hypotheses of a model.
struct StructuralReport {
  Box region;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  double delta_k = 0.99;
  double tol_ell = 1e-9;

  // Ellipticity: mineig((A + A^T)/2) / lambda over the samples.
  double lambda_ratio_min = std::numeric_limits<double>::infinity();
  double lambda_ratio_max = -std::numeric_limits<double>::infinity();
  double mineig_min = std::numeric_limits<double>::infinity();
  // mineig / (1 + sum_i |u_i|): comparability with a linear envelope.
  double envelope_ratio_min = std::numeric_limits<double>::infinity();
  double envelope_ratio_max = -std::numeric_limits<double>::infinity();
  std::size_t ellipticity_violations = 0;
  std::ptrdiff_t first_violation = -1;

  double C_star_hat = 0.0;        // sup |A(u)|_2 / lambda(u)
  double Lambda_hat = 0.0;        // sup |lambda_u| / lambda
  double Lambda1_hat = 0.0;       // sup |lambda_u| / lambda^(1 - eps0)
  double eps0_hat = 1.0;
  double P_growth_hat = 0.0;      // sup |P(u)| / (lambda |u|)
  double C_f_hat = 0.0;           // sup |f(u)| lambda_S / (|u| lambda)
  double f_lipschitz_hat = 0.0;   // sup |f_u(u)|_2 / lambda
  double B_ratio_hat = 0.0;       // sup |B(u)|_2 / lambda^(1/2)
  double G_coercivity_min = std::numeric_limits<double>::infinity();  // inf mineig(sym G(w)) / |w|^kappa

  bool ellipticity_pass = false;
  bool sg_pass = true;            // (n-2)/n < 1/C_*; n = 2 makes the left side 0
  bool sg_prime_pass = false;
  bool f_prime_pass = false;
  bool g_pass = true;
  bool all_pass = false;

  std::map<double, double> lambda_l;
};

namespace detail {

inline double min_sym_eig(const Mat& A) {
  const Mat S = 0.5 * (A + A.transpose());
  if (S.rows() == 1) return S(0, 0);
  if (S.rows() == 2) return detail::min_sym_eig2(S);
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

inline double op_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  if (A.rows() == 1 && A.cols() == 1) return std::abs(A(0, 0));
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()[0];
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& u, double rel) {
  const auto m = u.size();
  Mat J(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h = rel * (1.0 + std::abs(u[j]));
    Vec up = u, dn = u;
    up[j] += h;
    dn[j] -= h;
    J.col(j) = (f(up) - f(dn)) / (2.0 * h);
  }
  return J;
}

}  // namespace detail

inline bool sg_prime_holds(double k, double delta_k, double C_star) {
  if (k <= 2.0) return true;
  return delta_k < 1.0 && (k - 2.0) / k <= delta_k / C_star;
}

/// Samples u over `region` and aggregates the structural certificates.
inline StructuralReport verify_structure(const ModelSpec& spec, const Box& region, std::size_t n,
                                         std::uint64_t seed, const StructureOptions& opt = {}) {
  spec.validate();
  region.validate();
  if (region.dim() != spec.dim()) throw InputError("sampling region dimension differs from model m");
  const auto samples = sample_box(region, n, seed);

  StructuralReport rep;
  rep.region = region;
  rep.sample_count = samples.size();
  rep.seed = seed;
  rep.delta_k = opt.delta_k;
  rep.tol_ell = opt.tol_ell;

  const auto& lam = spec.lambda;
  rep.eps0_hat = (lam.lambda1 > 0.0 && lam.k > 0.0) ? std::min(1.0, 1.0 / lam.k) : 1.0;
  const double lamS = lam.lambda_S();
  const auto* comp = std::get_if<CompetitiveReaction>(&spec.reaction);
  auto f0 = [&](const Vec& v) { return eval_zero_order(spec, v); };

  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Vec& u = samples[s];
    const Mat A = eval_A(spec, u);
    const double l = lam(u);
    const double mineig = detail::min_sym_eig(A);
    const double ratio = mineig / l;
    rep.mineig_min = std::min(rep.mineig_min, mineig);
    rep.lambda_ratio_min = std::min(rep.lambda_ratio_min, ratio);
    rep.lambda_ratio_max = std::max(rep.lambda_ratio_max, ratio);
    const double env = mineig / (1.0 + u.cwiseAbs().sum());
    rep.envelope_ratio_min = std::min(rep.envelope_ratio_min, env);
    rep.envelope_ratio_max = std::max(rep.envelope_ratio_max, env);
    if (!(mineig > 0.0) || mineig < l * (1.0 - opt.tol_ell)) {
      if (rep.ellipticity_violations == 0) rep.first_violation = static_cast<std::ptrdiff_t>(s);
      ++rep.ellipticity_violations;
    }
    rep.C_star_hat = std::max(rep.C_star_hat, detail::op_norm(A) / l);

    const double lu = lam.gradient(u).norm();
    rep.Lambda_hat = std::max(rep.Lambda_hat, lu / l);
    rep.Lambda1_hat = std::max(rep.Lambda1_hat, lu / std::pow(l, 1.0 - rep.eps0_hat));

    const double r = u.norm();
    if (r > 0.0) {
      rep.P_growth_hat = std::max(rep.P_growth_hat, eval_P(spec, u).norm() / (l * r));
      rep.C_f_hat = std::max(rep.C_f_hat, f0(u).norm() * lamS / (r * l));
    }
    rep.f_lipschitz_hat = std::max(rep.f_lipschitz_hat, detail::op_norm(detail::fd_jacobian(f0, u, opt.fd_step)) / l);
    rep.B_ratio_hat = std::max(rep.B_ratio_hat, detail::op_norm(eval_B(spec, u)) / std::sqrt(l));
    if (comp != nullptr && r > 0.0) {
      const double g = detail::min_sym_eig(comp->G_at(u)) / std::pow(r, comp->kappa);
      rep.G_coercivity_min = std::min(rep.G_coercivity_min, g);
    }
  }

  rep.ellipticity_pass = rep.ellipticity_violations == 0;
  rep.sg_pass = true;
  rep.sg_prime_pass = sg_prime_holds(lam.k, opt.delta_k, rep.C_star_hat);
  rep.f_prime_pass = rep.C_f_hat <= spec.C_f * (1.0 + 1e-12);
  if (comp != nullptr) rep.g_pass = rep.G_coercivity_min >= comp->c0 * (1.0 - 1e-12);
  rep.all_pass = rep.ellipticity_pass && rep.sg_pass && rep.sg_prime_pass && rep.f_prime_pass && rep.g_pass;
  return rep;
}

struct LambdaLResult {
  double l = 0.0;
  double value = std::numeric_limits<double>::infinity();
  bool gate_applicable = false;  // l > 0
  double gate_lhs = 0.0;         // l / (l + 2)
  double gate_rhs = 0.0;         // delta / C_*
  bool gate_pass = true;
  double C_star_hat = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

/// Sampled infimum over (u, q) of <A(u) q, M_l(u) q> / (lambda(u) |u|^l |q|^2),
/// M_l(u) = |u|^l Id + l |u|^(l-2) u (x) u the Jacobian of u -> |u|^l u and q
/// an m x 2 direction. Per u the direction set holds `random_dirs` Gaussian
/// samples plus the minimising eigenvector of sym(A^T M_l), so the inner
/// infimum over q is attained exactly.
template <class AFn, class LambdaFn>
LambdaLResult lambda_l_infimum(AFn&& A_of, LambdaFn&& lambda_of, const std::vector<Vec>& samples, double l,
                               std::size_t random_dirs, std::uint64_t seed, double delta_k = 0.99) {
  if (!(l >= 0.0)) throw InputError("l must be >= 0");
  LambdaLResult res;
  res.l = l;
  res.gate_applicable = l > 0.0;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (const Vec& u : samples) {
    const auto m = u.size();
    const Mat A = A_of(u);
    const double lam = lambda_of(u);
    res.C_star_hat = std::max(res.C_star_hat, detail::op_norm(A) / lam);
    const double r = u.norm();
    if (l > 0.0 && r == 0.0) {
      ++res.skipped;
      continue;
    }
    Mat Ml = Mat::Identity(m, m);  // M_l / |u|^l
    if (l > 0.0) Ml += (l / (r * r)) * (u * u.transpose());
    const Mat AtM = A.transpose() * Ml;
    auto quotient = [&](const Gradient& q) {
      double num = 0.0;
      for (int c = 0; c < 2; ++c) num += q.col(c).dot(AtM * q.col(c));
      return num / (lam * q.squaredNorm());
    };
    const Mat S = 0.5 * (AtM + AtM.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    Gradient q = Gradient::Zero(m, 2);
    q.col(0) = es.eigenvectors().col(0);
    res.value = std::min(res.value, quotient(q));
    ++res.pairs;
    for (std::size_t d = 0; d < random_dirs; ++d) {
      for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = gauss(rng);
      if (q.squaredNorm() == 0.0) continue;
      res.value = std::min(res.value, quotient(q));
      ++res.pairs;
    }
  }
  if (res.pairs == 0) throw InputError("every sample was skipped (u = 0 with l > 0)");
  if (res.gate_applicable) {
    res.gate_lhs = l / (l + 2.0);
    res.gate_rhs = delta_k / res.C_star_hat;
    res.gate_pass = res.gate_lhs <= res.gate_rhs;
  }
  return res;
}

/// lambda_l certificate for a model over `region`.
inline LambdaLResult compute_lambda_l(const ModelSpec& spec, double l, const Box& region, std::size_t n,
                                      std::uint64_t seed, double delta_k = 0.99, std::size_t random_dirs = 4) {
  spec.validate();
  if (region.dim() != spec.dim()) throw InputError("sampling region dimension differs from model m");
  const auto samples = sample_box(region, n, seed);
  return lambda_l_infimum([&](const Vec& u) { return eval_A(spec, u); },
                          [&](const Vec& u) { return spec.lambda(u); }, samples, l, random_dirs, seed, delta_k);
}

}  // namespace sktlab
