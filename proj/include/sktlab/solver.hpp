#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sktlab/diagnostics.hpp"
#include "sktlab/grid.hpp"
#include "sktlab/model.hpp"
#include "sktlab/structure.hpp"

namespace sktlab {

enum class Scheme { ExplicitEuler, ImexLagged, NewtonImplicit };
enum class Termination { ReachedTend, BlowupDetected, NonFinite };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::ExplicitEuler: return "explicit_euler";
    case Scheme::ImexLagged: return "imex_lagged";
    case Scheme::NewtonImplicit: return "newton_implicit";
  }
  return "?";
}

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::ReachedTend: return "reached_t_end";
    case Termination::BlowupDetected: return "blowup_detected";
    case Termination::NonFinite: return "non_finite";
  }
  return "?";
}

struct SolverConfig {
  Scheme scheme = Scheme::NewtonImplicit;
  double dt0 = 1e-3;
  double dt_min = 1e-10;
  double dt_max = 1e-2;
  double cfl_safety = 0.9;
  double t_end = 1.0;
  double newton_abs_tol = 1e-10;
  double newton_rel_tol = 1e-10;
  int max_newton = 25;
  double linear_tol = 1e-10;
  int record_every = 1;
  std::vector<double> snapshot_times;
  /// Evaluate A and f^ at sigma u (sigma in [0,1]).
  double sigma = 1.0;
  /// Cap dt by cfl_safety / max |f_u| so the explicit reaction stays stable.
  bool reaction_dt_limit = true;
  /// Keep every recorded state in the trajectory.
  bool keep_states = false;

  void validate() const {
    if (!(dt_min > 0.0) || !(dt_min <= dt0) || !(dt0 <= dt_max))
      throw InputError("time steps must satisfy 0 < dt_min <= dt0 <= dt_max");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw InputError("cfl_safety must lie in (0,1]");
    if (!(t_end > 0.0)) throw InputError("t_end must be > 0");
    if (!(newton_abs_tol > 0.0) || !(newton_rel_tol > 0.0) || !(linear_tol > 0.0))
      throw InputError("tolerances must be > 0");
    if (max_newton < 1) throw InputError("max_newton must be >= 1");
    if (record_every < 1) throw InputError("record_every must be >= 1");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw InputError("sigma must lie in [0,1]");
    for (double s : snapshot_times)
      if (!(s >= 0.0)) throw InputError("snapshot times must be >= 0");
  }

  bool operator==(const SolverConfig&) const = default;
};

struct StepStats {
  bool converged = true;
  int newton_iterations = 0;
  double residual = 0.0;
  double linear_residual = 0.0;
};

/// cfl_safety * min(hx, hy)^2 / (8 max_cells |A(u)|_2).
inline double stable_dt(const Field& u, const ModelSpec& spec, double cfl_safety) {
  detail::require_finite(u, "stable_dt");
  const Grid2D& g = u.grid();
  double amax = 0.0;
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i) amax = std::max(amax, detail::op_norm(eval_A(spec, u.state(i, j))));
  const double h = std::min(g.hx, g.hy);
  if (amax == 0.0) return std::numeric_limits<double>::infinity();
  return cfl_safety * h * h / (8.0 * amax);
}

/// cfl_safety / max_cells |f_u(u)|_2 for the zero-order reaction part.
inline double reaction_dt(const Field& u, const ModelSpec& spec, double cfl_safety) {
  const Grid2D& g = u.grid();
  auto f0 = [&](const Vec& v) { return eval_zero_order(spec, v); };
  double fmax = 0.0;
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i)
      fmax = std::max(fmax, detail::op_norm(detail::fd_jacobian(f0, u.state(i, j), 1e-6)));
  return fmax == 0.0 ? std::numeric_limits<double>::infinity() : cfl_safety / fmax;
}

/// f^(u, Du) on every cell.
inline Field reaction_field(const Field& u, const ModelSpec& spec) {
  const Grid2D& g = u.grid();
  Field out(g, u.components());
  if (reaction_is_zero(spec)) return out;
  const auto G = cell_gradient(u);
  for (int j = 0; j < g.Ny; ++j)
    for (int i = 0; i < g.Nx; ++i) out.set_state(i, j, eval_reaction(spec, u.state(i, j), G.at(i, j)));
  return out;
}

/// One-step integrator. The implicit schemes share a sparse pattern (identity
/// plus full m x m blocks on the 5-point stencil), so the LU symbolic
/// analysis is done once per grid. Unknowns are ordered cell * m + component.
class Stepper {
 public:
  Stepper(ModelSpec spec, const Grid2D& grid, SolverConfig cfg)
      : spec_(std::move(spec)), g_(grid), cfg_(std::move(cfg)), m_(spec_.dim()) {
    const auto n = static_cast<Eigen::Index>(g_.cells()) * m_;
    M_.resize(n, n);
  }

  const ModelSpec& spec() const { return spec_; }

  std::pair<Field, StepStats> step(const Field& u, double dt) {
    if (!(dt > 0.0)) throw InputError("dt must be > 0");
    detail::require_finite(u, "step");
    detail::require_model_dim(u, spec_);
    switch (cfg_.scheme) {
      case Scheme::ExplicitEuler: return explicit_step(u, dt);
      case Scheme::ImexLagged: return imex_step(u, dt);
      case Scheme::NewtonImplicit: return newton_step(u, dt);
    }
    return {u, {}};
  }

 private:
  Vec pack(const Field& u) const {
    Vec x(static_cast<Eigen::Index>(g_.cells()) * m_);
    for (int j = 0; j < g_.Ny; ++j)
      for (int i = 0; i < g_.Nx; ++i)
        for (int c = 0; c < m_; ++c) x[static_cast<Eigen::Index>(g_.cell(i, j)) * m_ + c] = u(c, i, j);
    return x;
  }

  Field unpack(const Vec& x) const {
    Field u(g_, m_);
    for (int j = 0; j < g_.Ny; ++j)
      for (int i = 0; i < g_.Nx; ++i)
        for (int c = 0; c < m_; ++c) u(c, i, j) = x[static_cast<Eigen::Index>(g_.cell(i, j)) * m_ + c];
    return u;
  }

  void add_block(std::size_t row_cell, std::size_t col_cell, const Mat& B) {
    for (int r = 0; r < m_; ++r)
      for (int c = 0; c < m_; ++c)
        trip_.emplace_back(static_cast<int>(row_cell) * m_ + r, static_cast<int>(col_cell) * m_ + c, B(r, c));
  }

  struct Neighbor {
    int i, j;
    double inv_h2;
  };

  /// Interior neighbours of (i, j) and the summed boundary-face weight
  /// (2/h^2 per Dirichlet face, 0 for Neumann).
  std::pair<std::vector<Neighbor>, double> stencil(int i, int j) const {
    std::vector<Neighbor> nb;
    double bdry = 0.0;
    const double wx = 1.0 / (g_.hx * g_.hx), wy = 1.0 / (g_.hy * g_.hy);
    const double bfac = g_.bc == Boundary::DirichletZero ? 2.0 : 0.0;
    auto consider = [&](int ii, int jj, double w) {
      if (ii >= 0 && ii < g_.Nx && jj >= 0 && jj < g_.Ny) {
        nb.push_back({ii, jj, w});
      } else {
        bdry += bfac * w;
      }
    };
    consider(i - 1, j, wx);
    consider(i + 1, j, wx);
    consider(i, j - 1, wy);
    consider(i, j + 1, wy);
    return {nb, bdry};
  }

  bool factorize_and_solve(const Vec& rhs, Vec& x, double& rel_residual) {
    M_.setFromTriplets(trip_.begin(), trip_.end());
    M_.makeCompressed();
    if (!analyzed_) {
      lu_.analyzePattern(M_);
      analyzed_ = true;
    }
    lu_.factorize(M_);
    if (lu_.info() != Eigen::Success) return false;
    x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !x.allFinite()) return false;
    const double bn = rhs.norm();
    rel_residual = (M_ * x - rhs).norm() / (bn > 0.0 ? bn : 1.0);
    return true;
  }

  std::pair<Field, StepStats> explicit_step(const Field& u, double dt) {
    Field out = u;
    Field rate = div_A_grad(u, spec_);
    rate += reaction_field(u, spec_);
    for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += dt * rate.values()[k];
    return {out, {}};
  }

  std::pair<Field, StepStats> imex_step(const Field& u, double dt) {
    StepStats st;
    trip_.clear();
    const Mat I = Mat::Identity(m_, m_);
    const Mat A0 = eval_A(spec_, Vec::Zero(m_));
    for (int j = 0; j < g_.Ny; ++j) {
      for (int i = 0; i < g_.Nx; ++i) {
        const std::size_t p = g_.cell(i, j);
        const Vec up = u.state(i, j);
        const auto [nb, bdry] = stencil(i, j);
        Mat diag = I + dt * bdry * A0;
        for (const auto& n : nb) {
          const Mat Af = eval_A(spec_, 0.5 * (up + u.state(n.i, n.j)));
          diag += dt * n.inv_h2 * Af;
          add_block(p, g_.cell(n.i, n.j), -dt * n.inv_h2 * Af);
        }
        add_block(p, p, diag);
      }
    }
    Field rhs = reaction_field(u, spec_);
    rhs *= dt;
    rhs += u;
    Vec x;
    if (!factorize_and_solve(pack(rhs), x, st.linear_residual) || st.linear_residual > cfg_.linear_tol) {
      st.converged = false;
      return {u, st};
    }
    return {unpack(x), st};
  }

  std::pair<Field, StepStats> newton_step(const Field& u, double dt) {
    StepStats st;
    Field forcing = reaction_field(u, spec_);
    const double tol = cfg_.newton_abs_tol + cfg_.newton_rel_tol * u.max_abs();
    Field w = u;
    auto residual = [&](const Field& v) {
      Field r = laplacian_of_P(v, spec_);
      r += forcing;
      r *= -dt;
      r += v;
      r -= u;
      return r;
    };
    Field R = residual(w);
    st.residual = R.max_abs();
    while (st.residual > tol) {
      if (st.newton_iterations >= cfg_.max_newton) {
        st.converged = false;
        return {u, st};
      }
      assemble_newton_jacobian(w, dt);
      Vec delta;
      double lin = 0.0;
      if (!factorize_and_solve(-pack(R), delta, lin)) {
        st.converged = false;
        return {u, st};
      }
      st.linear_residual = std::max(st.linear_residual, lin);
      Vec x = pack(w) + delta;
      w = unpack(x);
      ++st.newton_iterations;
      if (!w.all_finite() || w.max_abs() > 1e12) {
        st.converged = false;
        return {u, st};
      }
      R = residual(w);
      st.residual = R.max_abs();
    }
    return {w, st};
  }

  void assemble_newton_jacobian(const Field& w, double dt) {
    trip_.clear();
    std::vector<Mat> A(g_.cells());
    for (int j = 0; j < g_.Ny; ++j)
      for (int i = 0; i < g_.Nx; ++i) A[g_.cell(i, j)] = eval_A(spec_, w.state(i, j));
    const Mat I = Mat::Identity(m_, m_);
    for (int j = 0; j < g_.Ny; ++j) {
      for (int i = 0; i < g_.Nx; ++i) {
        const std::size_t p = g_.cell(i, j);
        const auto [nb, bdry] = stencil(i, j);
        double wsum = bdry;
        for (const auto& n : nb) {
          wsum += n.inv_h2;
          const std::size_t q = g_.cell(n.i, n.j);
          add_block(p, q, -dt * n.inv_h2 * A[q]);
        }
        add_block(p, p, I + dt * wsum * A[p]);
      }
    }
  }

  ModelSpec spec_;
  Grid2D g_;
  SolverConfig cfg_;
  int m_;
  Eigen::SparseMatrix<double> M_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool analyzed_ = false;
  std::vector<Eigen::Triplet<double>> trip_;
};

/// Single step with a fresh stepper.
inline std::pair<Field, StepStats> step(const Field& u, double dt, const ModelSpec& spec, const SolverConfig& cfg) {
  Stepper s(with_sigma(spec, cfg.sigma), u.grid(), cfg);
  return s.step(u, dt);
}

struct Trajectory {
  std::vector<double> times;
  std::vector<NormRecord> records;
  std::vector<Field> states;  // aligned with times when keep_states is set
  std::vector<std::pair<double, Field>> snapshots;
  std::vector<int> newton_iterations;  // per accepted step
  std::vector<double> dt_history;      // per accepted step
  std::size_t rejections = 0;
  std::size_t steps = 0;
  Termination terminated_reason = Termination::ReachedTend;
  std::string message;
  std::optional<double> first_negative_time;
  Field final_state;
};

using RecordHook = std::function<void(const NormRecord&, const Field&)>;

/// Integrates from u0 to t_end. Steps are clipped to hit t_end and each
/// snapshot time exactly. Failed steps halve dt; successful ones grow it by
/// 1.2 up to dt_max. The partial trajectory is always returned.
inline Trajectory run(const Field& u0, const ModelSpec& spec, const SolverConfig& cfg,
                      const DiagnosticsConfig& dcfg = {}, const RecordHook& hook = {}) {
  cfg.validate();
  spec.validate();
  detail::require_model_dim(u0, spec);
  detail::require_finite(u0, "run");
  const ModelSpec stepping = with_sigma(spec, cfg.sigma);
  Stepper stepper(stepping, u0.grid(), cfg);

  DiagnosticsConfig dc = dcfg;
  std::optional<MorreyTracker> morrey;
  if (!dc.morrey_radii.empty()) {
    morrey.emplace(dc.morrey_radii);
    dc.morrey_radii.clear();
  }

  Trajectory tr;
  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  const double eps = 1e-12 * std::max(1.0, cfg.t_end);

  Field u = u0;
  double t = 0.0;
  auto record = [&]() {
    NormRecord rec = norms(u, spec, dc, t);
    if (morrey) {
      morrey->push(t, cell_gradient(u));
      rec.morrey = morrey->current();
    }
    if (hook) hook(rec, u);
    tr.times.push_back(t);
    tr.records.push_back(std::move(rec));
    if (cfg.keep_states) tr.states.push_back(u);
  };
  auto take_snapshots = [&]() {
    while (next_snap < snaps.size() && snaps[next_snap] <= t + eps) {
      tr.snapshots.emplace_back(t, u);
      ++next_snap;
    }
  };
  auto check_negative = [&]() {
    if (tr.first_negative_time) return;
    for (double x : u.values())
      if (x < 0.0) {
        tr.first_negative_time = t;
        return;
      }
  };

  record();
  take_snapshots();
  check_negative();
  double dt = cfg.dt0;
  while (t < cfg.t_end - eps) {
    double dt_try = std::min(dt, cfg.dt_max);
    if (cfg.scheme == Scheme::ExplicitEuler) {
      const double sdt = stable_dt(u, stepping, cfg.cfl_safety);
      if (sdt < cfg.dt_min) {
        tr.terminated_reason = Termination::BlowupDetected;
        tr.message = "explicit stability limit fell below dt_min at t = " + std::to_string(t);
        break;
      }
      dt_try = std::min(dt_try, sdt);
    }
    if (cfg.reaction_dt_limit && !reaction_is_zero(stepping)) {
      const double rdt = reaction_dt(u, stepping, cfg.cfl_safety);
      if (rdt < cfg.dt_min) {
        tr.terminated_reason = Termination::BlowupDetected;
        tr.message = "reaction step limit fell below dt_min at t = " + std::to_string(t);
        break;
      }
      dt_try = std::min(dt_try, rdt);
    }
    bool clipped = false;
    if (t + dt_try > cfg.t_end - eps) {
      dt_try = cfg.t_end - t;
      clipped = true;
    }
    if (next_snap < snaps.size() && t + dt_try > snaps[next_snap] + eps && snaps[next_snap] > t + eps) {
      dt_try = snaps[next_snap] - t;
      clipped = true;
    }

    auto [next, stats] = stepper.step(u, dt_try);
    if (!stats.converged) {
      ++tr.rejections;
      dt = 0.5 * dt_try;
      if (dt < cfg.dt_min) {
        tr.terminated_reason = Termination::BlowupDetected;
        tr.message = "step failed at dt_min near t = " + std::to_string(t);
        break;
      }
      continue;
    }
    if (!next.all_finite()) {
      tr.terminated_reason = Termination::NonFinite;
      tr.message = "non-finite state at t = " + std::to_string(t + dt_try);
      break;
    }
    u = std::move(next);
    t = clipped && std::abs(t + dt_try - cfg.t_end) <= eps ? cfg.t_end : t + dt_try;
    ++tr.steps;
    tr.newton_iterations.push_back(stats.newton_iterations);
    tr.dt_history.push_back(dt_try);
    check_negative();
    if (u.max_abs() > 1e12) {
      tr.terminated_reason = Termination::BlowupDetected;
      tr.message = "|u|_inf exceeded 1e12 at t = " + std::to_string(t);
      record();
      break;
    }
    const bool at_end = t >= cfg.t_end - eps;
    if (at_end || tr.steps % static_cast<std::size_t>(cfg.record_every) == 0) record();
    take_snapshots();
    if (!clipped) dt = std::min(1.2 * dt_try, cfg.dt_max);
  }
  tr.final_state = u;
  return tr;
}

/// Energy inequality over the stored states of a trajectory.
inline InequalityReport energy_inequality_check(const Trajectory& tr, const ModelSpec& spec) {
  if (tr.states.size() != tr.times.size())
    throw InputError("energy check needs a trajectory run with keep_states");
  return energy_inequality_check(std::span<const double>(tr.times), std::span<const Field>(tr.states), spec);
}

/// y(t) = |u(t)|_{L^2}^2 along the records.
inline std::vector<double> l2_squared_series(const Trajectory& tr) {
  std::vector<double> y;
  for (const auto& r : tr.records) y.push_back(r.L2 * r.L2);
  return y;
}

/// y_* dominance along the squared L^2 series, p = (kappa + 2)/2.
inline YStarReport ystar_dominance(const Trajectory& tr, const ModelSpec& spec, double tol = 0.05) {
  const auto* comp = std::get_if<CompetitiveReaction>(&spec.reaction);
  if (comp == nullptr) throw InputError("y_* check needs a competitive reaction");
  const auto y = l2_squared_series(tr);
  return ystar_dominance(std::span<const double>(tr.times), std::span<const double>(y), comp->kappa, tol);
}

}  // namespace sktlab
