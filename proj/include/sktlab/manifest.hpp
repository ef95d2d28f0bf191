#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sktlab/io.hpp"

namespace sktlab {

inline constexpr const char* kSchema = "sktlab/1";

struct InitialConfig {
  /// constant | eigenmode | fourier | snapshot
  std::string family = "eigenmode";
  double amplitude = 1.0;
  std::uint64_t seed = 1;
  int modes = 4;
  std::string path;             // snapshot family only
  std::string format = "csv";   // snapshot family only
};

struct VerifyConfig {
  Box region;
  std::size_t samples = 10000;
  StructureOptions options;
  std::vector<double> lambda_l;
  std::size_t lambda_l_samples = 10000;
  /// Run simulate/attractor even when verification fails.
  bool waive = false;
};

struct OutputsConfig {
  std::string dir = "out";
  std::string format = "csv";  // snapshot format: csv | bin
  /// Snapshot cadence in model time; 0 disables periodic snapshots.
  double snapshot_every = 0.0;
};

struct EnsembleConfig {
  std::string family = "fourier";
  double amp_min = 0.1;
  double amp_max = 100.0;
  int count = 10;
  std::optional<double> T_observe;
  std::vector<double> M1_targets;
  double common_tolerance = 0.10;
  double ystar_tolerance = 0.05;
};

struct SweepConfig {
  /// JSON pointer into the echoed manifest, e.g. "/model/lambda/lambda1".
  std::string pointer;
  std::vector<json> values;
};

struct RunManifest {
  ModelSpec model;
  json model_source;  // the model object as written, echoed verbatim
  Grid2D grid;
  SolverConfig solver;
  DiagnosticsConfig diagnostics;
  InitialConfig initial;
  VerifyConfig verify;
  OutputsConfig outputs;
  std::uint64_t seed = 1;
  std::optional<EnsembleConfig> ensemble;
  std::optional<SweepConfig> sweep;
};

inline Boundary parse_boundary(const std::string& s) {
  if (s == "neumann") return Boundary::NeumannZero;
  if (s == "dirichlet") return Boundary::DirichletZero;
  throw InputError("unknown boundary condition '" + s + "'");
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "explicit_euler") return Scheme::ExplicitEuler;
  if (s == "imex_lagged") return Scheme::ImexLagged;
  if (s == "newton_implicit") return Scheme::NewtonImplicit;
  throw InputError("unknown scheme '" + s + "'");
}

inline SnapshotFormat parse_format(const std::string& s) {
  if (s == "csv") return SnapshotFormat::Csv;
  if (s == "bin") return SnapshotFormat::Binary;
  throw InputError("unknown format '" + s + "' (csv | bin)");
}

namespace detail {

inline Box region_from(const json& j, int m) {
  if (j.contains("orthant")) return Box::orthant(m, j.at("orthant").get<double>());
  if (j.contains("symmetric")) return Box::symmetric(m, j.at("symmetric").get<double>());
  Box b{vec_from(require(j, "lo", "verify.region"), "verify.region.lo"),
        vec_from(require(j, "hi", "verify.region"), "verify.region.hi")};
  b.validate();
  if (b.dim() != m) throw InputError("verify.region dimension differs from model m");
  return b;
}

inline std::vector<double> doubles(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::vector<double>>();
}

}  // namespace detail

/// Parses a run manifest. Relative model and snapshot paths resolve against
/// `base_dir`.
inline RunManifest parse_manifest(const json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_or;
  try {
    if (!j.is_object()) throw InputError("manifest must be a JSON object");
    const auto schema = get_or<std::string>(j, "schema", "");
    if (schema != kSchema) throw InputError("manifest schema must be \"" + std::string(kSchema) + "\"");
    RunManifest r;
    r.seed = get_or<std::uint64_t>(j, "seed", 1);

    json model = detail::require(j, "model", "manifest");
    if (model.is_string()) {
      std::filesystem::path p = model.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      model = load_json_file(p.string());
    }
    r.model = model_from_json(model);
    r.model_source = model;
    const int m = r.model.dim();

    const json& g = detail::require(j, "grid", "manifest");
    r.grid = build_grid(get_or(g, "Lx", 1.0), get_or(g, "Ly", 1.0), detail::require(g, "Nx", "grid").get<int>(),
                        detail::require(g, "Ny", "grid").get<int>(),
                        parse_boundary(get_or<std::string>(g, "bc", "neumann")));

    const json s = j.value("solver", json::object());
    SolverConfig& c = r.solver;
    c.scheme = parse_scheme(get_or<std::string>(s, "scheme", to_string(c.scheme)));
    c.dt0 = get_or(s, "dt0", c.dt0);
    c.dt_min = get_or(s, "dt_min", c.dt_min);
    c.dt_max = get_or(s, "dt_max", c.dt_max);
    c.cfl_safety = get_or(s, "cfl_safety", c.cfl_safety);
    c.t_end = get_or(s, "t_end", c.t_end);
    c.newton_abs_tol = get_or(s, "newton_abs_tol", c.newton_abs_tol);
    c.newton_rel_tol = get_or(s, "newton_rel_tol", c.newton_rel_tol);
    c.max_newton = get_or(s, "max_newton", c.max_newton);
    c.linear_tol = get_or(s, "linear_tol", c.linear_tol);
    c.record_every = get_or(s, "record_every", c.record_every);
    c.snapshot_times = detail::doubles(s, "snapshot_times");
    c.sigma = get_or(s, "sigma", c.sigma);
    c.reaction_dt_limit = get_or(s, "reaction_dt_limit", c.reaction_dt_limit);
    c.validate();

    const json d = j.value("diagnostics", json::object());
    DiagnosticsConfig& dc = r.diagnostics;
    dc.s0 = get_or(d, "s0", dc.s0);
    dc.q = get_or(d, "q", dc.q);
    dc.p_list = detail::doubles(d, "p_list");
    dc.bmo_radii = detail::doubles(d, "bmo_radii");
    dc.morrey_radii = detail::doubles(d, "morrey_radii");
    dc.mu0 = get_or(d, "mu0", dc.mu0);
    if (d.contains("Lambda_hat") && !d.at("Lambda_hat").is_null()) dc.Lambda_hat = d.at("Lambda_hat").get<double>();
    if (!(dc.s0 > 0.0)) throw InputError("diagnostics.s0 must be > 0");
    if (!(dc.q > 1.0)) throw InputError("diagnostics.q must be > 1");
    for (double p : dc.p_list)
      if (!(p > 0.0)) throw InputError("diagnostics.p_list entries must be > 0");
    const double hmax = std::max(r.grid.hx, r.grid.hy);
    for (double R : dc.bmo_radii)
      if (R < 2.0 * hmax * (1.0 - 1e-12)) throw InputError("diagnostics.bmo_radii must be at least two cells");
    for (double R : dc.morrey_radii)
      if (!(R > 0.0)) throw InputError("diagnostics.morrey_radii must be > 0");

    const json in = j.value("initial", json::object());
    InitialConfig& ic = r.initial;
    ic.family = get_or<std::string>(in, "family", ic.family);
    ic.amplitude = get_or(in, "amplitude", ic.amplitude);
    ic.seed = get_or<std::uint64_t>(in, "seed", r.seed);
    ic.modes = get_or(in, "modes", ic.modes);
    ic.format = get_or<std::string>(in, "format", ic.format);
    if (ic.family == "snapshot") {
      std::filesystem::path p = detail::require(in, "path", "initial").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) throw InputError("initial snapshot " + p.string() + " does not exist");
      ic.path = p.string();
      parse_format(ic.format);
    } else {
      parse_initial_family(ic.family);
    }

    const json v = j.value("verify", json::object());
    VerifyConfig& vc = r.verify;
    const bool skt = model.is_object() && model.contains("classic_skt");
    vc.region = v.contains("region") ? detail::region_from(v.at("region"), m)
                                     : (skt ? Box::orthant(m, 10.0) : Box::symmetric(m, 10.0));
    vc.samples = get_or<std::size_t>(v, "samples", vc.samples);
    vc.options.delta_k = get_or(v, "delta_k", vc.options.delta_k);
    vc.options.tol_ell = get_or(v, "tol_ell", vc.options.tol_ell);
    vc.options.fd_step = get_or(v, "fd_step", vc.options.fd_step);
    vc.lambda_l = detail::doubles(v, "lambda_l");
    vc.lambda_l_samples = get_or<std::size_t>(v, "lambda_l_samples", vc.lambda_l_samples);
    vc.waive = get_or(v, "waive", vc.waive);
    if (!(vc.options.delta_k > 0.0 && vc.options.delta_k < 1.0)) throw InputError("verify.delta_k must lie in (0,1)");

    const json o = j.value("outputs", json::object());
    r.outputs.dir = get_or<std::string>(o, "dir", r.outputs.dir);
    r.outputs.format = get_or<std::string>(o, "format", r.outputs.format);
    r.outputs.snapshot_every = get_or(o, "snapshot_every", r.outputs.snapshot_every);
    parse_format(r.outputs.format);

    if (j.contains("ensemble") && !j.at("ensemble").is_null()) {
      const json& e = j.at("ensemble");
      EnsembleConfig ec;
      ec.family = get_or<std::string>(e, "family", ec.family);
      parse_initial_family(ec.family);
      ec.amp_min = get_or(e, "amp_min", ec.amp_min);
      ec.amp_max = get_or(e, "amp_max", ec.amp_max);
      ec.count = get_or(e, "count", ec.count);
      if (e.contains("T_observe") && !e.at("T_observe").is_null()) ec.T_observe = e.at("T_observe").get<double>();
      ec.M1_targets = detail::doubles(e, "M1_targets");
      ec.common_tolerance = get_or(e, "common_tolerance", ec.common_tolerance);
      ec.ystar_tolerance = get_or(e, "ystar_tolerance", ec.ystar_tolerance);
      r.ensemble = ec;
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
      const json& sw = j.at("sweep");
      SweepConfig sc;
      sc.pointer = detail::require(sw, "pointer", "sweep").get<std::string>();
      const json& vals = detail::require(sw, "values", "sweep");
      if (!vals.is_array() || vals.empty()) throw InputError("sweep.values must be a nonempty array");
      for (const auto& x : vals) sc.values.push_back(x);
      r.sweep = sc;
    }
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

/// Complete manifest with every default spelled out; parsing the echo gives
/// back the same configuration.
inline json manifest_to_json(const RunManifest& r) {
  const SolverConfig& c = r.solver;
  const DiagnosticsConfig& d = r.diagnostics;
  json j = {
      {"schema", kSchema},
      {"seed", r.seed},
      {"model", r.model_source},
      {"grid", {{"Lx", r.grid.Lx}, {"Ly", r.grid.Ly}, {"Nx", r.grid.Nx}, {"Ny", r.grid.Ny}, {"bc", to_string(r.grid.bc)}}},
      {"solver",
       {{"scheme", to_string(c.scheme)},
        {"dt0", c.dt0},
        {"dt_min", c.dt_min},
        {"dt_max", c.dt_max},
        {"cfl_safety", c.cfl_safety},
        {"t_end", c.t_end},
        {"newton_abs_tol", c.newton_abs_tol},
        {"newton_rel_tol", c.newton_rel_tol},
        {"max_newton", c.max_newton},
        {"linear_tol", c.linear_tol},
        {"record_every", c.record_every},
        {"snapshot_times", c.snapshot_times},
        {"sigma", c.sigma},
        {"reaction_dt_limit", c.reaction_dt_limit}}},
      {"diagnostics",
       {{"s0", d.s0},
        {"q", d.q},
        {"p_list", d.p_list},
        {"bmo_radii", d.bmo_radii},
        {"morrey_radii", d.morrey_radii},
        {"mu0", d.mu0},
        {"Lambda_hat", d.Lambda_hat ? json(*d.Lambda_hat) : json(nullptr)}}},
      {"initial",
       {{"family", r.initial.family},
        {"amplitude", r.initial.amplitude},
        {"seed", r.initial.seed},
        {"modes", r.initial.modes},
        {"format", r.initial.format}}},
      {"verify",
       {{"region", {{"lo", detail::vec_json(r.verify.region.lo)}, {"hi", detail::vec_json(r.verify.region.hi)}}},
        {"samples", r.verify.samples},
        {"delta_k", r.verify.options.delta_k},
        {"tol_ell", r.verify.options.tol_ell},
        {"fd_step", r.verify.options.fd_step},
        {"lambda_l", r.verify.lambda_l},
        {"lambda_l_samples", r.verify.lambda_l_samples},
        {"waive", r.verify.waive}}},
      {"outputs", {{"dir", r.outputs.dir}, {"format", r.outputs.format}, {"snapshot_every", r.outputs.snapshot_every}}},
  };
  if (r.initial.family == "snapshot") j["initial"]["path"] = r.initial.path;
  if (r.ensemble) {
    const auto& e = *r.ensemble;
    j["ensemble"] = {{"family", e.family},
                     {"amp_min", e.amp_min},
                     {"amp_max", e.amp_max},
                     {"count", e.count},
                     {"T_observe", e.T_observe ? json(*e.T_observe) : json(nullptr)},
                     {"M1_targets", e.M1_targets},
                     {"common_tolerance", e.common_tolerance},
                     {"ystar_tolerance", e.ystar_tolerance}};
  }
  if (r.sweep) j["sweep"] = {{"pointer", r.sweep->pointer}, {"values", r.sweep->values}};
  return j;
}

inline std::string manifest_hash(const RunManifest& r) { return fnv1a_hex(manifest_to_json(r).dump()); }

inline Field initial_field(const RunManifest& r) {
  if (r.initial.family == "snapshot") {
    Field u = load_field(r.initial.path, parse_format(r.initial.format), r.grid.bc);
    if (!(u.grid() == r.grid)) throw InputError("initial snapshot grid differs from the manifest grid");
    if (u.components() != r.model.dim()) throw InputError("initial snapshot has the wrong component count");
    return u;
  }
  return make_initial(r.grid, r.model.dim(), parse_initial_family(r.initial.family), r.initial.amplitude,
                      r.initial.seed, r.initial.modes);
}

inline EnsembleSpec ensemble_spec(const RunManifest& r, int threads = 1) {
  if (!r.ensemble) throw InputError("manifest has no ensemble section");
  const auto& e = *r.ensemble;
  EnsembleSpec s;
  s.model = r.model;
  s.grid = r.grid;
  s.solver = r.solver;
  s.diagnostics = r.diagnostics;
  s.family = parse_initial_family(e.family);
  s.amp_min = e.amp_min;
  s.amp_max = e.amp_max;
  s.count = e.count;
  s.seed = r.seed;
  s.T_observe = e.T_observe;
  s.M1_targets = e.M1_targets;
  s.common_tolerance = e.common_tolerance;
  s.ystar_tolerance = e.ystar_tolerance;
  s.threads = threads;
  return s;
}

}  // namespace sktlab
