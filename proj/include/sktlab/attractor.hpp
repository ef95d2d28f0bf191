#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sktlab/diagnostics.hpp"
#include "sktlab/grid.hpp"
#include "sktlab/model.hpp"
#include "sktlab/solver.hpp"

namespace sktlab {

enum class InitialFamily { Constant, Eigenmode, Fourier };

inline const char* to_string(InitialFamily f) {
  switch (f) {
    case InitialFamily::Constant: return "constant";
    case InitialFamily::Eigenmode: return "eigenmode";
    case InitialFamily::Fourier: return "fourier";
  }
  return "?";
}

inline InitialFamily parse_initial_family(const std::string& s) {
  if (s == "constant") return InitialFamily::Constant;
  if (s == "eigenmode") return InitialFamily::Eigenmode;
  if (s == "fourier") return InitialFamily::Fourier;
  throw InputError("unknown initial family '" + s + "'");
}

/// Nonnegative initial data of size `amplitude`:
///  constant   u_c = amplitude;
///  eigenmode  amplitude sin(pi x/Lx) sin(pi y/Ly) (Dirichlet), or
///             amplitude (1 + cos(pi x/Lx) cos(pi y/Ly)/2) (Neumann);
///  fourier    the eigenmode profile times 1 + phi/2, phi a seeded random
///             cosine series with 1/(1 + |k|^2) damping and max |phi| = 1.
inline Field make_initial(const Grid2D& g, int m, InitialFamily family, double amplitude, std::uint64_t seed,
                          int modes = 4) {
  if (!(amplitude >= 0.0)) throw InputError("amplitude must be >= 0");
  const double pi = std::numbers::pi;
  const bool dir = g.bc == Boundary::DirichletZero;
  auto base = [&](double x, double y) {
    return dir ? std::sin(pi * x / g.Lx) * std::sin(pi * y / g.Ly)
               : 1.0 + 0.5 * std::cos(pi * x / g.Lx) * std::cos(pi * y / g.Ly);
  };
  Field u(g, m);
  if (family == InitialFamily::Constant) {
    for (double& v : u.values()) v = amplitude;
    return u;
  }
  if (family == InitialFamily::Eigenmode) {
    return Field::from_function(g, m, [&](int, double x, double y) { return amplitude * base(x, y); });
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int c = 0; c < m; ++c) {
    std::vector<double> a(static_cast<std::size_t>((modes + 1) * (modes + 1)));
    for (int kx = 0; kx <= modes; ++kx)
      for (int ky = 0; ky <= modes; ++ky)
        a[static_cast<std::size_t>(kx * (modes + 1) + ky)] =
            (kx + ky == 0) ? 0.0 : gauss(rng) / (1.0 + kx * kx + ky * ky);
    std::vector<double> phi(g.cells(), 0.0);
    double pmax = 0.0;
    for (int j = 0; j < g.Ny; ++j) {
      for (int i = 0; i < g.Nx; ++i) {
        double s = 0.0;
        for (int kx = 0; kx <= modes; ++kx)
          for (int ky = 0; ky <= modes; ++ky)
            s += a[static_cast<std::size_t>(kx * (modes + 1) + ky)] * std::cos(kx * pi * g.x(i) / g.Lx) *
                 std::cos(ky * pi * g.y(j) / g.Ly);
        phi[g.cell(i, j)] = s;
        pmax = std::max(pmax, std::abs(s));
      }
    }
    for (int j = 0; j < g.Ny; ++j)
      for (int i = 0; i < g.Nx; ++i) {
        const double p = pmax > 0.0 ? phi[g.cell(i, j)] / pmax : 0.0;
        u(c, i, j) = amplitude * base(g.x(i), g.y(j)) * (1.0 + 0.5 * p);
      }
  }
  return u;
}

struct EnsembleSpec {
  ModelSpec model;
  Grid2D grid;
  SolverConfig solver;
  DiagnosticsConfig diagnostics;
  InitialFamily family = InitialFamily::Fourier;
  double amp_min = 0.1;
  double amp_max = 100.0;
  int count = 10;
  std::uint64_t seed = 1;
  /// Start of the tail window; t_end / 2 when unset.
  std::optional<double> T_observe;
  std::vector<double> M1_targets;
  /// Relative spread of the tail L^2 suprema accepted as a common ball.
  double common_tolerance = 0.10;
  double ystar_tolerance = 0.05;
  int threads = 1;

  void validate() const {
    if (count < 1) throw InputError("ensemble count must be >= 1");
    if (!(amp_min > 0.0) || !(amp_max >= amp_min)) throw InputError("amplitude range must be positive and ordered");
    if (threads < 1) throw InputError("threads must be >= 1");
    if (T_observe && !(*T_observe >= 0.0 && *T_observe <= solver.t_end))
      throw InputError("T_observe must lie in [0, t_end]");
  }

  std::vector<double> amplitudes() const {
    std::vector<double> a;
    for (int k = 0; k < count; ++k) {
      if (count == 1) {
        a.push_back(amp_min);
      } else {
        a.push_back(amp_min * std::pow(amp_max / amp_min, static_cast<double>(k) / (count - 1)));
      }
    }
    return a;
  }
};

struct MemberResult {
  int index = 0;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  Termination termination = Termination::ReachedTend;
  std::string message;
  bool excluded = false;
  double y0 = 0.0;
  double tail_sup_W12 = 0.0;
  double tail_sup_lambda_moment = 0.0;
  double tail_sup_L2 = 0.0;
  double tail_sup_Lqk = 0.0;
  std::vector<EntryTime> entries;
  std::optional<double> c2, c3;
  std::optional<YStarReport> ystar;
  std::size_t steps = 0;
};

struct AbsorbingBallReport {
  std::vector<MemberResult> members;
  double T_observe = 0.0;
  double M_hat = 0.0;          // max tail sup of W12
  double M_hat_lambda = 0.0;   // max tail sup of the lambda moment
  double M_hat_L2 = 0.0;
  double L2_spread = 0.0;      // (max - min) / max over tail L^2 suprema
  double W12_spread = 0.0;
  bool common_ball = false;
  bool all_reached_t_end = true;
  bool ystar_dominated = true;
  bool entry_consistent = true;  // empirical entry <= 2 T_* for members started above M1
  double y_star_max = 0.0;
  std::vector<int> excluded;
  std::vector<std::string> notes;
};

namespace detail {

inline MemberResult run_member(const EnsembleSpec& spec, int index, double amplitude, double T_obs) {
  MemberResult r;
  r.index = index;
  r.amplitude = amplitude;
  r.seed = spec.seed + 7919ULL * static_cast<std::uint64_t>(index);
  const Field u0 = make_initial(spec.grid, spec.model.dim(), spec.family, amplitude, r.seed);
  const Trajectory tr = run(u0, spec.model, spec.solver, spec.diagnostics);
  r.termination = tr.terminated_reason;
  r.message = tr.message;
  r.steps = tr.steps;
  r.excluded = tr.terminated_reason != Termination::ReachedTend;
  r.y0 = tr.records.front().L2 * tr.records.front().L2;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    if (tr.times[k] + 1e-12 < T_obs) continue;
    const auto& rec = tr.records[k];
    r.tail_sup_W12 = std::max(r.tail_sup_W12, rec.W12);
    r.tail_sup_lambda_moment = std::max(r.tail_sup_lambda_moment, rec.lambda_moment);
    r.tail_sup_L2 = std::max(r.tail_sup_L2, rec.L2);
    if (std::isfinite(rec.Lqk)) r.tail_sup_Lqk = std::max(r.tail_sup_Lqk, rec.Lqk);
  }
  const auto* comp = std::get_if<CompetitiveReaction>(&spec.model.reaction);
  if (comp != nullptr && !r.excluded && tr.times.size() >= 3) {
    const auto y = l2_squared_series(tr);
    const double p = 0.5 * (comp->kappa + 2.0);
    const auto dec = decay_bound_check(tr.times, y, p, spec.M1_targets);
    if (dec.feasible) {
      r.c2 = dec.constants.at("c2");
      r.c3 = dec.constants.at("c3");
    }
    r.entries = dec.entries;
    r.ystar = ystar_dominance(tr, spec.model, spec.ystar_tolerance);
  }
  return r;
}

}  // namespace detail

/// Runs every ensemble member and summarises the tails over [T_observe, t_end].
/// Members are independent; with threads > 1 they run concurrently and are
/// merged by index.
inline AbsorbingBallReport ensemble_absorbing_ball(const EnsembleSpec& spec) {
  spec.validate();
  spec.model.validate();
  spec.solver.validate();
  const auto amps = spec.amplitudes();
  const double T_obs = spec.T_observe.value_or(0.5 * spec.solver.t_end);
  std::vector<MemberResult> results(amps.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(amps.size());
  auto worker = [&]() {
    for (std::size_t k = next++; k < amps.size(); k = next++) {
      try {
        results[k] = detail::run_member(spec, static_cast<int>(k), amps[k], T_obs);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int nt = std::min<int>(spec.threads, static_cast<int>(amps.size()));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  AbsorbingBallReport rep;
  rep.T_observe = T_obs;
  rep.members = std::move(results);
  double l2_min = std::numeric_limits<double>::infinity(), w_min = l2_min;
  for (const auto& m : rep.members) {
    if (m.excluded) {
      rep.all_reached_t_end = false;
      rep.excluded.push_back(m.index);
      rep.notes.push_back("member " + std::to_string(m.index) + " excluded: " + to_string(m.termination));
      continue;
    }
    rep.M_hat = std::max(rep.M_hat, m.tail_sup_W12);
    rep.M_hat_lambda = std::max(rep.M_hat_lambda, m.tail_sup_lambda_moment);
    rep.M_hat_L2 = std::max(rep.M_hat_L2, m.tail_sup_L2);
    l2_min = std::min(l2_min, m.tail_sup_L2);
    w_min = std::min(w_min, m.tail_sup_W12);
    if (m.ystar) {
      rep.y_star_max = std::max(rep.y_star_max, m.ystar->y_star);
      if (!m.ystar->dominated) rep.ystar_dominated = false;
    }
    for (const auto& e : m.entries) {
      if (m.y0 <= e.M1) continue;
      if (!std::isfinite(e.T_star) || !std::isfinite(e.empirical) || e.empirical > 2.0 * e.T_star)
        rep.entry_consistent = false;
    }
  }
  const bool any = rep.excluded.size() < rep.members.size();
  if (any) {
    rep.L2_spread = rep.M_hat_L2 > 0.0 ? (rep.M_hat_L2 - l2_min) / rep.M_hat_L2 : 0.0;
    rep.W12_spread = rep.M_hat > 0.0 ? (rep.M_hat - w_min) / rep.M_hat : 0.0;
    rep.common_ball = rep.L2_spread <= spec.common_tolerance;
  } else {
    rep.notes.push_back("every member was excluded");
  }
  return rep;
}

}  // namespace sktlab
