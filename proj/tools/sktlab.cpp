// sktlab command-line driver: verify / simulate / diagnose / attractor / sweep.
//
// Exit codes: 0 success, 1 hypothesis or assertion failure, 2 input error,
// 3 runtime termination (blow-up or non-finite state).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sktlab/sktlab.hpp"

namespace fs = std::filesystem;
using namespace sktlab;

namespace {

constexpr int kOk = 0;
constexpr int kHypothesis = 1;
constexpr int kInput = 2;
constexpr int kRuntime = 3;

struct Options {
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string format;
};

struct Context {
  RunManifest manifest;
  fs::path out;
  std::string hash;
  std::uint64_t seed = 1;
};

Context load_context(const Options& o) {
  const fs::path mpath = o.manifest;
  Context ctx;
  ctx.manifest = parse_manifest(load_json_file(mpath.string()), mpath.parent_path());
  RunManifest& m = ctx.manifest;
  if (o.seed) {
    m.seed = *o.seed;
    m.initial.seed = *o.seed;
  }
  if (!o.format.empty()) {
    parse_format(o.format);
    m.outputs.format = o.format;
  }
  ctx.seed = m.seed;
  if (!o.out.empty()) {
    ctx.out = o.out;
  } else if (const char* root = std::getenv("SKTLAB_OUT"); root != nullptr && *root != '\0') {
    ctx.out = fs::path(root) / m.outputs.dir;
  } else {
    ctx.out = m.outputs.dir;
  }
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec || !fs::is_directory(ctx.out)) throw InputError("output directory " + ctx.out.string() + " is not writable");
  ctx.hash = manifest_hash(m);
  save_json_file((ctx.out / "manifest.json").string(), manifest_to_json(m));
  return ctx;
}

json provenance(const Context& ctx) { return {{"manifest_hash", ctx.hash}, {"seed", ctx.seed}}; }

std::vector<std::pair<std::string, std::string>> csv_meta(const Context& ctx) {
  return {{"manifest_hash", ctx.hash}, {"seed", std::to_string(ctx.seed)}};
}

StructuralReport verify_model(const Context& ctx) {
  const RunManifest& m = ctx.manifest;
  StructuralReport rep = verify_structure(m.model, m.verify.region, m.verify.samples, ctx.seed, m.verify.options);
  for (double l : m.verify.lambda_l) {
    const auto ll = compute_lambda_l(m.model, l, m.verify.region, m.verify.lambda_l_samples, ctx.seed,
                                     m.verify.options.delta_k);
    rep.lambda_l[l] = ll.value;
    if (!(ll.value > 0.0) || !ll.gate_pass) rep.all_pass = false;
  }
  return rep;
}

/// Verification gate shared by the commands that integrate the model.
bool gate(const Context& ctx) {
  if (ctx.manifest.verify.waive) return true;
  const auto rep = verify_model(ctx);
  json j = to_json(rep);
  j["provenance"] = provenance(ctx);
  save_json_file((ctx.out / "verify_report.json").string(), j);
  if (!rep.all_pass) std::cerr << "model fails structural verification (set verify.waive to run anyway)\n";
  return rep.all_pass;
}

SolverConfig with_snapshots(const RunManifest& m) {
  SolverConfig c = m.solver;
  if (m.outputs.snapshot_every > 0.0) {
    for (double t = m.outputs.snapshot_every; t <= c.t_end * (1 + 1e-12); t += m.outputs.snapshot_every)
      c.snapshot_times.push_back(t);
  }
  return c;
}

void write_run(const fs::path& dir, const Context& ctx, const RunManifest& m, const Trajectory& tr) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "trajectory.csv");
    write_trajectory_csv(os, tr, m.model.dim(), m.diagnostics, csv_meta(ctx));
  }
  const SnapshotFormat fmt = parse_format(m.outputs.format);
  json snaps = json::array();
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
    const std::string name = "snapshot_" + std::to_string(k) + (fmt == SnapshotFormat::Csv ? ".csv" : ".bin");
    save_field((dir / name).string(), tr.snapshots[k].second, fmt);
    snaps.push_back({{"t", tr.snapshots[k].first}, {"file", name}});
  }
  json s = {{"terminated_reason", to_string(tr.terminated_reason)},
            {"message", tr.message},
            {"t_final", tr.times.empty() ? 0.0 : tr.times.back()},
            {"steps", tr.steps},
            {"rejections", tr.rejections},
            {"records", tr.records.size()},
            {"first_negative_time", tr.first_negative_time ? json(*tr.first_negative_time) : json(nullptr)},
            {"snapshots", snaps},
            {"provenance", provenance(ctx)}};
  save_json_file((dir / "run_summary.json").string(), s);
}

int cmd_verify(const Options& o) {
  const Context ctx = load_context(o);
  const auto rep = verify_model(ctx);
  json j = to_json(rep);
  j["provenance"] = provenance(ctx);
  save_json_file((ctx.out / "verify_report.json").string(), j);
  std::cout << "ellipticity " << (rep.ellipticity_pass ? "pass" : "FAIL") << ", SG' "
            << (rep.sg_prime_pass ? "pass" : "FAIL") << ", F' " << (rep.f_prime_pass ? "pass" : "FAIL") << ", G "
            << (rep.g_pass ? "pass" : "FAIL") << "; C_* = " << rep.C_star_hat << '\n';
  return rep.all_pass ? kOk : kHypothesis;
}

int cmd_simulate(const Options& o) {
  const Context ctx = load_context(o);
  if (!gate(ctx)) return kHypothesis;
  const RunManifest& m = ctx.manifest;
  const Trajectory tr = run(initial_field(m), m.model, with_snapshots(m), m.diagnostics);
  write_run(ctx.out, ctx, m, tr);
  std::cout << to_string(tr.terminated_reason) << " after " << tr.steps << " steps\n";
  return tr.terminated_reason == Termination::ReachedTend ? kOk : kRuntime;
}

int cmd_diagnose(const Options& o) {
  const Context ctx = load_context(o);
  if (!gate(ctx)) return kHypothesis;
  const RunManifest& m = ctx.manifest;
  SolverConfig cfg = with_snapshots(m);
  cfg.keep_states = true;
  const Trajectory tr = run(initial_field(m), m.model, cfg, m.diagnostics);
  write_run(ctx.out, ctx, m, tr);
  if (tr.terminated_reason != Termination::ReachedTend) {
    std::cerr << "run terminated early: " << tr.message << '\n';
    return kRuntime;
  }
  json j;
  j["provenance"] = provenance(ctx);
  int code = kOk;
  if (tr.states.size() >= 3) {
    const auto energy = energy_inequality_check(tr, m.model);
    j["energy_inequality"] = to_json(energy);
    if (!energy.holds) code = kHypothesis;
  }
  const auto y = l2_squared_series(tr);
  if (const auto* comp = std::get_if<CompetitiveReaction>(&m.model.reaction)) {
    const double p = 0.5 * (comp->kappa + 2.0);
    const std::vector<double> M1 = m.ensemble ? m.ensemble->M1_targets : std::vector<double>{};
    j["decay_bound"] = to_json(decay_bound_check(tr.times, y, p, M1));
    const auto ys = ystar_dominance(tr, m.model);
    j["ystar"] = to_json(ys);
    if (!ys.dominated) code = kHypothesis;
  }
  if (!m.diagnostics.bmo_radii.empty()) {
    const double Lam = m.diagnostics.Lambda_hat.value_or(
        verify_structure(m.model, m.verify.region, 1000, ctx.seed, m.verify.options).Lambda_hat);
    j["bmo_final"] = to_json(bmo_profile(tr.final_state, m.diagnostics.bmo_radii, Lam, m.diagnostics.mu0));
  }
  j["interpolation"] = to_json(interpolation_check(tr.states, m.diagnostics.q, 0.1));
  if (!m.diagnostics.morrey_radii.empty()) {
    const auto& last = tr.records.back().morrey;
    const double slope = loglog_slope(m.diagnostics.morrey_radii, last);
    j["morrey"] = {{"radii", m.diagnostics.morrey_radii},
                   {"quotient", last},
                   {"loglog_slope", detail::num(slope)},
                   {"fitted_p", detail::num(morrey_exponent_from_slope(slope))}};
  }
  save_json_file((ctx.out / "diagnostics.json").string(), j);
  return code;
}

int cmd_attractor(const Options& o) {
  const Context ctx = load_context(o);
  if (!gate(ctx)) return kHypothesis;
  const EnsembleSpec spec = ensemble_spec(ctx.manifest, o.threads);
  const auto rep = ensemble_absorbing_ball(spec);
  json j = to_json(rep);
  j["provenance"] = provenance(ctx);
  save_json_file((ctx.out / "attractor_report.json").string(), j);
  std::ofstream os(ctx.out / "attractor_summary.csv");
  os << "# manifest_hash=" << ctx.hash << "\n# seed=" << ctx.seed << '\n';
  os << "index,amplitude,excluded,tail_sup_W12,tail_sup_lambda_moment,tail_sup_L2,y_star\n";
  for (const auto& mem : rep.members) {
    os << mem.index << ',' << fmt17(mem.amplitude) << ',' << (mem.excluded ? 1 : 0) << ','
       << fmt17(mem.tail_sup_W12) << ',' << fmt17(mem.tail_sup_lambda_moment) << ',' << fmt17(mem.tail_sup_L2)
       << ',' << fmt17(mem.ystar ? mem.ystar->y_star : std::numeric_limits<double>::quiet_NaN()) << '\n';
  }
  for (int idx : rep.excluded) std::cerr << "FAILED member " << idx << " (excluded from the ball estimate)\n";
  std::cout << "M_hat = " << rep.M_hat << ", L2 spread = " << rep.L2_spread
            << ", common ball: " << (rep.common_ball ? "yes" : "no") << '\n';
  return rep.excluded.empty() ? kOk : kHypothesis;
}

int cmd_sweep(const Options& o) {
  const Context ctx = load_context(o);
  const RunManifest& base = ctx.manifest;
  if (!base.sweep) throw InputError("manifest has no sweep section");
  const json echo = manifest_to_json(base);
  const json::json_pointer ptr(base.sweep->pointer);
  if (!echo.contains(ptr)) throw InputError("sweep pointer " + base.sweep->pointer + " is not in the manifest");

  // Parse every variant up front so that input errors surface before any run.
  std::vector<RunManifest> variants;
  for (const auto& v : base.sweep->values) {
    json j = echo;
    j[ptr] = v;
    j.erase("sweep");
    variants.push_back(parse_manifest(j));
  }
  std::vector<Trajectory> results(variants.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < variants.size(); k = next++) {
      const RunManifest& m = variants[k];
      results[k] = run(initial_field(m), m.model, with_snapshots(m), m.diagnostics);
    }
  };
  const int nt = std::max(1, std::min<int>(o.threads, static_cast<int>(variants.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ofstream os(ctx.out / "sweep_summary.csv");
  os << "# manifest_hash=" << ctx.hash << "\n# seed=" << ctx.seed << "\n# pointer=" << base.sweep->pointer << '\n';
  os << "index,value,terminated,t_final,L2_final,W12_max,energy_y_final\n";
  int code = kOk;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const Trajectory& tr = results[k];
    write_run(ctx.out / ("run_" + std::to_string(k)), ctx, variants[k], tr);
    double wmax = 0.0;
    for (const auto& r : tr.records) wmax = std::max(wmax, r.W12);
    const auto& last = tr.records.back();
    const json& v = base.sweep->values[k];
    os << k << ',' << (v.is_number() ? fmt17(v.get<double>()) : v.dump()) << ','
       << (tr.terminated_reason == Termination::ReachedTend ? 0 : 1) << ',' << fmt17(last.t) << ','
       << fmt17(last.L2) << ',' << fmt17(wmax) << ',' << fmt17(last.energy_y) << '\n';
    if (tr.terminated_reason != Termination::ReachedTend) code = kRuntime;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sktlab: cross-diffusion model verification, simulation and diagnostics"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", opt.manifest, "JSON run manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (default: $SKTLAB_OUT/<outputs.dir> or outputs.dir)");
    sub->add_option("--seed", opt.seed, "seed override");
    sub->add_option("--threads", opt.threads, "worker threads for ensemble and sweep runs")->check(CLI::PositiveNumber);
    sub->add_option("--format", opt.format, "snapshot format")->check(CLI::IsMember({"csv", "bin"}));
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> cmds = {
      {app.add_subcommand("verify", "certify the structural hypotheses of the model"), cmd_verify},
      {app.add_subcommand("simulate", "integrate the model and write the trajectory"), cmd_simulate},
      {app.add_subcommand("diagnose", "simulate and fit the energy and decay inequalities"), cmd_diagnose},
      {app.add_subcommand("attractor", "run the absorbing-ball ensemble"), cmd_attractor},
      {app.add_subcommand("sweep", "simulate over a list of values of one manifest field"), cmd_sweep},
  };
  for (auto& [sub, fn] : cmds) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }
  try {
    for (auto& [sub, fn] : cmds)
      if (sub->parsed()) return fn(opt);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ModelError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const NumericalStateError& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kInput;
}
