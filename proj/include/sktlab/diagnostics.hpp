#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sktlab/grid.hpp"
#include "sktlab/model.hpp"

namespace sktlab {

struct DiagnosticsConfig {
  /// Exponent of the lambda moment int lambda(u)^s0.
  double s0 = 1.0;
  /// L^{qk} is always recorded; q > 1.
  double q = 2.0;
  /// Additional L^p norms.
  std::vector<double> p_list;
  /// Physical radii of the BMO and Morrey windows.
  std::vector<double> bmo_radii;
  std::vector<double> morrey_radii;
  double mu0 = 0.1;
  /// Lambda used in the M') product; defaults to sup |lambda_u|/lambda over
  /// the sampled states when unset.
  std::optional<double> Lambda_hat;

  bool operator==(const DiagnosticsConfig&) const = default;
};

struct NormRecord {
  double t = 0.0;
  std::vector<double> mass;
  double L1 = 0.0;
  double L2 = 0.0;
  double Lqk = 0.0;
  std::vector<double> Lp;  // aligned with DiagnosticsConfig::p_list
  double grad_L2 = 0.0;    // |Du|_{L^2}
  double W12 = 0.0;        // L2 + |Du|_{L^2}
  double energy_y = 0.0;   // int |A(u) Du|^2
  double lambda_moment = 0.0;
  std::vector<double> bmo;     // aligned with bmo_radii
  std::vector<double> morrey;  // aligned with morrey_radii
};

namespace detail {

/// Row-segment description of the discrete ball: all cells whose centres lie
/// within Euclidean distance R of the centre cell.
struct BallStencil {
  std::vector<int> dj;
  std::vector<int> half_width;

  BallStencil(const Grid2D& g, double R) {
    const int rj = static_cast<int>(std::floor(R / g.hy + 1e-12));
    for (int d = -rj; d <= rj; ++d) {
      const double rem = R * R - (d * g.hy) * (d * g.hy);
      if (rem < -1e-14 * R * R) continue;
      dj.push_back(d);
      half_width.push_back(static_cast<int>(std::floor(std::sqrt(std::max(0.0, rem)) / g.hx + 1e-12)));
    }
  }
};

/// Per-row prefix sums of a cell array (row-major j, i).
struct RowPrefix {
  int Nx, Ny;
  std::vector<double> p;  // (Nx + 1) per row

  RowPrefix(const Grid2D& g, std::span<const double> cells) : Nx(g.Nx), Ny(g.Ny), p((g.Nx + 1) * static_cast<std::size_t>(g.Ny), 0.0) {
    for (int j = 0; j < Ny; ++j) {
      const std::size_t b = static_cast<std::size_t>(j) * (Nx + 1);
      for (int i = 0; i < Nx; ++i) p[b + i + 1] = p[b + i] + cells[static_cast<std::size_t>(j) * Nx + i];
    }
  }

  /// Sum and cell count over the ball (intersected with the grid).
  std::pair<double, std::size_t> ball(const BallStencil& st, int i0, int j0) const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < st.dj.size(); ++r) {
      const int j = j0 + st.dj[r];
      if (j < 0 || j >= Ny) continue;
      const int lo = std::max(0, i0 - st.half_width[r]);
      const int hi = std::min(Nx - 1, i0 + st.half_width[r]);
      const std::size_t b = static_cast<std::size_t>(j) * (Nx + 1);
      s += p[b + hi + 1] - p[b + lo];
      n += static_cast<std::size_t>(hi - lo + 1);
    }
    return {s, n};
  }
};

inline double state_norm_pow(const Field& u, int i, int j, double p) {
  double s = 0.0;
  for (int c = 0; c < u.components(); ++c) s += u(c, i, j) * u(c, i, j);
  return std::pow(s, 0.5 * p);
}

}  // namespace detail

/// Instantaneous Morrey quotient max_x R^{-2} int int_{Q_R} |Du|^2 with |Du|^2
/// frozen over the cylinder's time extent R^2, so that it reduces to
/// max_x int_{B_R(x) n Omega} |Du|^2. MorreyTracker integrates the true
/// cylinder along a trajectory.
inline double morrey_frozen(const GradientField& G, double R) {
  const Grid2D& g = G.grid();
  std::vector<double> cells(g.cells());
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i) cells[g.cell(i, j)] = G.squared_norm(i, j) * g.cell_area();
  const detail::RowPrefix pre(g, cells);
  const detail::BallStencil st(g, R);
  double best = 0.0;
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i) best = std::max(best, pre.ball(st, i, j).first);
  return best;
}

/// Mean oscillation sup over centres of |B|^{-1} int_B |u - u_B|, maximised over
/// components; balls are intersected with Omega.
inline double mean_oscillation(const Field& u, double R) {
  const Grid2D& g = u.grid();
  const detail::BallStencil st(g, R);
  double best = 0.0;
  std::vector<double> comp(g.cells());
  for (int c = 0; c < u.components(); ++c) {
    // shifting by one cell value leaves the oscillation unchanged and makes constants exact zeros
    const double ref = u(c, 0, 0);
    for (int j = 0; j < g.Ny; ++j)
      for (int i = 0; i < g.Nx; ++i) comp[g.cell(i, j)] = u(c, i, j) - ref;
    const detail::RowPrefix pre(g, comp);
    for (int j0 = 0; j0 < g.Ny; ++j0) {
      for (int i0 = 0; i0 < g.Nx; ++i0) {
        const auto [sum, n] = pre.ball(st, i0, j0);
        const double mean = sum / static_cast<double>(n);
        double dev = 0.0;
        for (std::size_t r = 0; r < st.dj.size(); ++r) {
          const int j = j0 + st.dj[r];
          if (j < 0 || j >= g.Ny) continue;
          const int lo = std::max(0, i0 - st.half_width[r]);
          const int hi = std::min(g.Nx - 1, i0 + st.half_width[r]);
          for (int i = lo; i <= hi; ++i) dev += std::abs(comp[g.cell(i, j)] - mean);
        }
        best = std::max(best, dev / static_cast<double>(n));
      }
    }
  }
  return best;
}

inline NormRecord norms(const Field& u, const ModelSpec& spec, const DiagnosticsConfig& cfg, double t = 0.0) {
  detail::require_finite(u, "norms");
  detail::require_model_dim(u, spec);
  const Grid2D& g = u.grid();
  const int m = u.components();
  const double dA = g.cell_area();
  const double qk = cfg.q * spec.lambda.k;
  const auto G = cell_gradient(u);

  NormRecord rec;
  rec.t = t;
  rec.mass.resize(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) rec.mass[c] = u.integral(c);
  rec.Lp.assign(cfg.p_list.size(), 0.0);
  double l1 = 0.0, l2 = 0.0, lqk = 0.0, grad2 = 0.0, ey = 0.0, lm = 0.0;
  for (int j = 0; j < g.Ny; ++j) {
    for (int i = 0; i < g.Nx; ++i) {
      const Vec s = u.state(i, j);
      const double r = s.norm();
      l1 += r;
      l2 += r * r;
      if (qk > 0.0) lqk += std::pow(r, qk);
      for (std::size_t k = 0; k < cfg.p_list.size(); ++k) rec.Lp[k] += std::pow(r, cfg.p_list[k]);
      const Gradient Du = G.at(i, j);
      grad2 += Du.squaredNorm();
      ey += (eval_A(spec, s) * Du).squaredNorm();
      lm += std::pow(spec.lambda(s), cfg.s0);
    }
  }
  rec.L1 = l1 * dA;
  rec.L2 = std::sqrt(l2 * dA);
  rec.Lqk = qk > 0.0 ? std::pow(lqk * dA, 1.0 / qk) : std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < cfg.p_list.size(); ++k) rec.Lp[k] = std::pow(rec.Lp[k] * dA, 1.0 / cfg.p_list[k]);
  rec.grad_L2 = std::sqrt(grad2 * dA);
  rec.W12 = rec.L2 + rec.grad_L2;
  rec.energy_y = ey * dA;
  rec.lambda_moment = lm * dA;
  for (double R : cfg.bmo_radii) {
    const double lim = std::max(g.Lx, g.Ly);
    rec.bmo.push_back(R > lim ? std::numeric_limits<double>::quiet_NaN() : mean_oscillation(u, R));
  }
  for (double R : cfg.morrey_radii) rec.morrey.push_back(morrey_frozen(G, R));
  return rec;
}

struct BmoReport {
  std::vector<double> radii;
  std::vector<double> oscillation;
  std::vector<double> product;  // Lambda^2 osc^2
  std::vector<bool> below_mu0;
  std::vector<bool> skipped;
  double Lambda_hat = 0.0;
  double mu0 = 0.0;
  std::vector<std::string> notes;
};

inline BmoReport bmo_profile(const Field& u, const std::vector<double>& radii, double Lambda_hat, double mu0) {
  detail::require_finite(u, "bmo_profile");
  const Grid2D& g = u.grid();
  const double hmax = std::max(g.hx, g.hy);
  BmoReport rep;
  rep.Lambda_hat = Lambda_hat;
  rep.mu0 = mu0;
  for (double R : radii) {
    if (R < 2.0 * hmax * (1.0 - 1e-12)) {
      throw InputError("BMO radius " + std::to_string(R) + " is below two cells");
    }
    rep.radii.push_back(R);
    if (R > std::max(g.Lx, g.Ly)) {
      rep.oscillation.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.product.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.below_mu0.push_back(false);
      rep.skipped.push_back(true);
      rep.notes.push_back("radius " + std::to_string(R) + " exceeds the domain; skipped");
      continue;
    }
    const double osc = mean_oscillation(u, R);
    const double prod = Lambda_hat * Lambda_hat * osc * osc;
    rep.oscillation.push_back(osc);
    rep.product.push_back(prod);
    rep.below_mu0.push_back(prod <= mu0);
    rep.skipped.push_back(false);
  }
  return rep;
}

/// Parabolic Morrey quotient max over windows of R^{-2} int int_{Q_R} |Du|^2,
/// Q_R = B_R(x) x (t - R^2, t] intersected with Omega x (t_first, t]. The time
/// integral uses the backward rectangle rule over the pushed records.
class MorreyTracker {
 public:
  explicit MorreyTracker(std::vector<double> radii) : radii_(std::move(radii)) {}

  void push(double t, const GradientField& G) {
    const Grid2D& g = G.grid();
    std::vector<double> cells(g.cells());
    for (int j = 0; j < g.Ny; ++j)
      for (int i = 0; i < g.Nx; ++i) cells[g.cell(i, j)] = G.squared_norm(i, j) * g.cell_area();
    std::vector<double> cum = cum_.empty() ? std::vector<double>(cells.size(), 0.0) : cum_.back();
    if (!times_.empty()) {
      const double w = t - times_.back();
      for (std::size_t k = 0; k < cells.size(); ++k) cum[k] += w * cells[k];
    }
    times_.push_back(t);
    values_.push_back(std::move(cells));
    cum_.push_back(std::move(cum));
    grid_ = g;
  }

  /// Quotients for every radius at the latest pushed time.
  std::vector<double> current() const {
    std::vector<double> out;
    if (times_.empty()) return std::vector<double>(radii_.size(), 0.0);
    const std::size_t last = times_.size() - 1;
    const double t = times_[last];
    for (double R : radii_) {
      const double a = t - R * R;
      // first record whose interval (t_{s-1}, t_s] reaches past a
      std::size_t s = 1;
      while (s <= last && times_[s] <= a) ++s;
      std::vector<double> integ(values_[last].size(), 0.0);
      if (s <= last) {
        const double part = times_[s] - std::max(times_[s - 1], a);
        for (std::size_t k = 0; k < integ.size(); ++k)
          integ[k] = cum_[last][k] - cum_[s][k] + part * values_[s][k];
      }
      const detail::RowPrefix pre(grid_, integ);
      const detail::BallStencil st(grid_, R);
      double best = 0.0;
      for (int j = 0; j < grid_.Ny; ++j)
        for (int i = 0; i < grid_.Nx; ++i) best = std::max(best, pre.ball(st, i, j).first);
      out.push_back(best / (R * R));
    }
    return out;
  }

  const std::vector<double>& radii() const { return radii_; }

 private:
  std::vector<double> radii_;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> cum_;
  Grid2D grid_;
};

/// Least-squares slope of log(value) against log(radius), over positive values.
inline double loglog_slope(const std::vector<double>& radii, const std::vector<double>& values) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < radii.size() && k < values.size(); ++k) {
    if (!(values[k] > 0.0) || !(radii[k] > 0.0)) continue;
    const double x = std::log(radii[k]), y = std::log(values[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// p in R^{2(1 - 2/p)} matching a measured slope; infinity once the slope reaches 2.
inline double morrey_exponent_from_slope(double slope) {
  if (!(slope > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (slope >= 2.0) return std::numeric_limits<double>::infinity();
  return 4.0 / (2.0 - slope);
}

// ---------------------------------------------------------------------------
// Inequality fitting

struct EntryTime {
  double M1 = 0.0;
  double T_star = std::numeric_limits<double>::quiet_NaN();
  double empirical = std::numeric_limits<double>::quiet_NaN();  // NaN: never entered
};

struct InequalityReport {
  std::string name;
  std::map<std::string, double> constants;
  std::vector<double> margins;
  double pass_fraction = 1.0;
  bool feasible = true;
  bool holds = true;
  std::optional<std::size_t> violating_step;
  std::vector<EntryTime> entries;
  std::vector<std::string> notes;
};

namespace detail {

/// Golden-section search for the minimiser of a convex function on [lo, hi].
/// Ties move right, so a flat objective returns the upper end.
template <class F>
double minimize_convex(F&& f, double lo, double hi, int iters = 200) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++k) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  const double mid = 0.5 * (a + b);
  // the endpoints can win for functions that are monotone on the bracket
  double best = mid, fb = f(mid);
  if (const double fl = f(lo); fl < fb) best = lo, fb = fl;
  if (const double fh = f(hi); fh < fb) best = hi;
  return best;
}

/// Upper end of a bracket containing the minimiser of a convex function on [0, inf).
template <class F>
double bracket_convex(F&& f) {
  double hi = 1.0;
  while (hi < 1e12 && f(2.0 * hi) < f(hi)) hi *= 2.0;
  return 2.0 * hi;
}

inline void finish_margins(InequalityReport& rep, double tol) {
  std::size_t ok = 0;
  for (std::size_t k = 0; k < rep.margins.size(); ++k) {
    if (rep.margins[k] >= -tol) {
      ++ok;
    } else if (!rep.violating_step) {
      rep.violating_step = k;
    }
  }
  rep.pass_fraction = rep.margins.empty() ? 1.0 : static_cast<double>(ok) / rep.margins.size();
  rep.holds = rep.feasible && ok == rep.margins.size();
}

}  // namespace detail

/// Tightest (C1, C2 >= 0) with y'_k <= C1 y_k + C2 at every step: C2 is the
/// least value for the chosen C1, and C1 minimises the averaged bound
/// C1 mean(y) + C2.
inline std::pair<double, double> fit_linear_growth(std::span<const double> dydt, std::span<const double> y) {
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(std::max<std::size_t>(1, y.size()));
  auto c2_of = [&](double c1) {
    double c2 = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) c2 = std::max(c2, dydt[k] - c1 * y[k]);
    return c2;
  };
  double c1max = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k)
    if (y[k] > 0.0) c1max = std::max(c1max, dydt[k] / y[k]);
  double c1 = 0.0;
  if (c1max > 0.0) c1 = detail::minimize_convex([&](double c) { return c * ybar + c2_of(c); }, 0.0, c1max);
  return {c1, c2_of(c1)};
}

/// Energy inequality with eta = 1:
///   int lambda(u)|u_t|^2 + d/dt int |A(u)Du|^2 <= C int [ |A(u)Du|^2 + lambda(u)|f(u)|^2 ],
/// evaluated per step with backward differences, plus the Gronwall form
/// y' <= C1 y + C2 for y = int |A(u)Du|^2.
inline InequalityReport energy_inequality_check(std::span<const double> times, std::span<const Field> states,
                                                const ModelSpec& spec) {
  if (times.size() != states.size()) throw InputError("energy check: times and states differ in length");
  if (states.size() < 3) throw InputError("energy check needs at least 3 records");
  const std::size_t n = states.size();
  std::vector<double> y(n), react(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Field& u = states[k];
    const Grid2D& g = u.grid();
    const auto G = cell_gradient(u);
    double ey = 0.0, rf = 0.0;
    for (int j = 0; j < g.Ny; ++j) {
      for (int i = 0; i < g.Nx; ++i) {
        const Vec s = u.state(i, j);
        ey += (eval_A(spec, s) * G.at(i, j)).squaredNorm();
        rf += spec.lambda(s) * eval_zero_order(spec, s).squaredNorm();
      }
    }
    y[k] = ey * g.cell_area();
    react[k] = rf * g.cell_area();
  }

  InequalityReport rep;
  rep.name = "energy_inequality";
  std::vector<double> lhs(n - 1), rhs(n - 1), dydt(n - 1), ymid(n - 1);
  double C = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = times[k + 1] - times[k];
    if (!(dt > 0.0)) throw InputError("energy check: times must be strictly increasing");
    const Field& a = states[k];
    const Field& b = states[k + 1];
    const Grid2D& g = b.grid();
    double lut = 0.0;
    for (int j = 0; j < g.Ny; ++j) {
      for (int i = 0; i < g.Nx; ++i) {
        const Vec sb = b.state(i, j);
        lut += spec.lambda(sb) * ((sb - a.state(i, j)) / dt).squaredNorm();
      }
    }
    lut *= g.cell_area();
    dydt[k] = (y[k + 1] - y[k]) / dt;
    ymid[k] = y[k + 1];
    lhs[k] = lut + dydt[k];
    rhs[k] = y[k + 1] + react[k + 1];
    if (rhs[k] > 0.0) {
      C = std::max(C, lhs[k] / rhs[k]);
    } else if (lhs[k] > 0.0) {
      rep.feasible = false;
      if (!rep.violating_step) rep.violating_step = k;
    }
  }
  // round C up until every margin is nonnegative in floating point
  for (std::size_t k = 0; k + 1 < n; ++k)
    while (rhs[k] > 0.0 && C * rhs[k] - lhs[k] < 0.0) C = std::nextafter(C, std::numeric_limits<double>::infinity());
  rep.constants["C"] = C;
  for (std::size_t k = 0; k + 1 < n; ++k) rep.margins.push_back(C * rhs[k] - lhs[k]);
  const auto [C1, C2] = fit_linear_growth(dydt, ymid);
  rep.constants["C1"] = C1;
  rep.constants["C2"] = C2;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) worst = std::min(worst, C1 * ymid[k] + C2 - dydt[k]);
  rep.constants["gronwall_min_margin"] = worst;
  double scale = 0.0;
  for (double v : lhs) scale = std::max(scale, std::abs(v));
  detail::finish_margins(rep, 1e-12 * std::max(1.0, scale));
  return rep;
}

namespace detail {

/// Forward differences and trapezoid averages of a sampled series.
struct SeriesSteps {
  std::vector<double> dydt, avg, avg_pow;
};

inline SeriesSteps series_steps(std::span<const double> t, std::span<const double> y, double p) {
  SeriesSteps s;
  for (std::size_t k = 0; k + 1 < y.size(); ++k) {
    const double dt = t[k + 1] - t[k];
    if (!(dt > 0.0)) throw InputError("times must be strictly increasing");
    s.dydt.push_back((y[k + 1] - y[k]) / dt);
    s.avg.push_back(0.5 * (y[k] + y[k + 1]));
    s.avg_pow.push_back(0.5 * (std::pow(y[k], p) + std::pow(y[k + 1], p)));
  }
  return s;
}

}  // namespace detail

/// Fits y' + c3 y^p <= c2 (the tightest positive pair: least total slack over
/// the steps) and checks the decay bound
///   y(t) <= (c2/c3)^{1/p} + (c3 (p-1) t)^{-1/(p-1)},
/// t measured from the first sample. Entry times T_*(M1) are compared with the
/// first sample at which y <= M1.
inline InequalityReport decay_bound_check(std::span<const double> times, std::span<const double> y, double p,
                                          const std::vector<double>& M1_targets = {}) {
  if (times.size() != y.size() || y.size() < 2) throw InputError("decay check needs at least 2 samples");
  if (!(p > 1.0)) throw InputError("decay check needs p > 1");
  for (double v : y)
    if (!(v >= 0.0)) throw InputError("decay check needs a nonnegative series");
  const auto st = detail::series_steps(times, y, p);
  const std::size_t n = st.dydt.size();
  auto c2_of = [&](double c3) {
    double c2 = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) c2 = std::max(c2, st.dydt[k] + c3 * st.avg_pow[k]);
    return c2;
  };
  auto slack = [&](double c3) {
    const double c2 = c2_of(c3);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += c2 - st.dydt[k] - c3 * st.avg_pow[k];
    return s;
  };
  const double hi = detail::bracket_convex(slack);
  const double c3 = detail::minimize_convex(slack, 0.0, hi);
  double c2 = c2_of(c3);

  InequalityReport rep;
  rep.name = "decay_bound";
  rep.constants["p"] = p;
  if (!(c3 > 1e-12 * hi)) {
    rep.feasible = false;
    std::size_t worst = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (st.dydt[k] > st.dydt[worst]) worst = k;
    rep.violating_step = worst;
    rep.notes.push_back("no positive c3 is consistent with the series (y grows)");
    rep.constants["c2"] = c2;
    rep.constants["c3"] = c3;
    rep.holds = false;
    rep.pass_fraction = 0.0;
    return rep;
  }
  if (c2 < 0.0) {
    rep.notes.push_back("c2 fit is negative; using c2 = 0");
    c2 = 0.0;
  }
  const double eq = std::pow(c2 / c3, 1.0 / p);
  rep.constants["c2"] = c2;
  rep.constants["c3"] = c3;
  rep.constants["equilibrium"] = eq;
  const double t0 = times[0];
  double scale = 1.0;
  for (double v : y) scale = std::max(scale, v);
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double tau = times[i] - t0;
    const double bound = eq + std::pow(c3 * (p - 1.0) * tau, -1.0 / (p - 1.0));
    rep.margins.push_back(bound - y[i]);
  }
  for (double M1 : M1_targets) {
    EntryTime e;
    e.M1 = M1;
    if (M1 > eq) {
      e.T_star = std::pow(M1 - eq, 1.0 - p) / (c3 * (p - 1.0));
    } else {
      rep.notes.push_back("M1 = " + std::to_string(M1) + " is not above the equilibrium level");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] <= M1) {
        e.empirical = times[i] - t0;
        break;
      }
    }
    rep.entries.push_back(e);
  }
  detail::finish_margins(rep, 1e-12 * scale);
  return rep;
}

struct YStarReport {
  double C1 = 0.0;
  double C3 = 0.0;
  double p = 1.5;
  double y_star = 0.0;
  double y0 = 0.0;
  double y_max = 0.0;
  double tol = 0.05;
  bool feasible = true;
  bool dominated = true;
  std::optional<std::size_t> violating_step;
};

/// Fits y' <= C1 y - C3 y^p (least total slack, C3 > 0), sets
/// y_* = (C1/C3)^{1/(p-1)} and checks y(t) <= max{y(0), y_*} (1 + tol).
inline YStarReport ystar_dominance(std::span<const double> times, std::span<const double> y, double kappa,
                                   double tol = 0.05) {
  if (times.size() != y.size() || y.size() < 2) throw InputError("y_* check needs at least 2 samples");
  YStarReport rep;
  rep.p = 0.5 * (kappa + 2.0);
  rep.tol = tol;
  rep.y0 = y[0];
  for (double v : y) rep.y_max = std::max(rep.y_max, v);
  const auto st = detail::series_steps(times, y, rep.p);
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < st.avg.size(); ++k)
    if (st.avg[k] > 0.0) active.push_back(k);
  if (!active.empty()) {
    auto c1_of = [&](double c3) {
      double c1 = -std::numeric_limits<double>::infinity();
      for (std::size_t k : active) c1 = std::max(c1, (st.dydt[k] + c3 * st.avg_pow[k]) / st.avg[k]);
      return c1;
    };
    auto slack = [&](double c3) {
      const double c1 = c1_of(c3);
      double s = 0.0;
      for (std::size_t k : active) s += c1 * st.avg[k] - c3 * st.avg_pow[k] - st.dydt[k];
      return s;
    };
    const double hi = detail::bracket_convex(slack);
    rep.C3 = std::max(detail::minimize_convex(slack, 0.0, hi), 1e-12 * hi);
    rep.C1 = c1_of(rep.C3);
    rep.y_star = rep.C1 > 0.0 ? std::pow(rep.C1 / rep.C3, 1.0 / (rep.p - 1.0)) : 0.0;
    for (std::size_t k : active) {
      if (st.dydt[k] > rep.C1 * st.avg[k] - rep.C3 * st.avg_pow[k] + 1e-9 * std::abs(st.dydt[k]) + 1e-300) {
        rep.feasible = false;
        rep.violating_step = k;
        break;
      }
    }
  }
  const double cap = std::max(rep.y0, rep.y_star) * (1.0 + tol);
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] > cap) {
      rep.dominated = false;
      if (!rep.violating_step) rep.violating_step = k;
      break;
    }
  }
  return rep;
}

/// Smallest C with int |u|^{q+2} <= eps int |u|^q |Du|^2 + C |u|_{L^1}^{q+2}
/// over a family of fields.
inline InequalityReport interpolation_check(std::span<const Field> fields, double q, double eps) {
  if (fields.empty()) throw InputError("interpolation check needs at least one field");
  std::vector<double> lhs, grad, l1;
  for (const Field& u : fields) {
    const Grid2D& g = u.grid();
    const auto G = cell_gradient(u);
    double a = 0.0, b = 0.0, c = 0.0;
    for (int j = 0; j < g.Ny; ++j) {
      for (int i = 0; i < g.Nx; ++i) {
        const double r = u.state(i, j).norm();
        a += std::pow(r, q + 2.0);
        b += std::pow(r, q) * G.squared_norm(i, j);
        c += r;
      }
    }
    lhs.push_back(a * g.cell_area());
    grad.push_back(b * g.cell_area());
    l1.push_back(c * g.cell_area());
  }
  InequalityReport rep;
  rep.name = "interpolation";
  double C = 0.0;
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    if (l1[k] > 0.0) C = std::max(C, (lhs[k] - eps * grad[k]) / std::pow(l1[k], q + 2.0));
  }
  rep.constants["C"] = C;
  rep.constants["q"] = q;
  rep.constants["eps"] = eps;
  double scale = 0.0;
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    rep.margins.push_back(eps * grad[k] + C * std::pow(l1[k], q + 2.0) - lhs[k]);
    scale = std::max(scale, lhs[k]);
  }
  detail::finish_margins(rep, 1e-12 * std::max(1.0, scale));
  return rep;
}

/// |a - b| / max(|a|, |b|), 0 when both vanish.
inline double relative_change(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace sktlab
