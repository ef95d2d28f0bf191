#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "sktlab/manifest.hpp"

using namespace sktlab;
namespace fs = std::filesystem;

namespace {

const fs::path kManifests = SKTLAB_MANIFESTS;

json minimal() {
  return json::parse(R"({
    "schema": "sktlab/1",
    "model": {"m": 1, "P": [[[1.0, 1]]], "lambda": {"lambda0": 1.0, "lambda1": 0.0, "k": 0.0}},
    "grid": {"Nx": 8, "Ny": 8}
  })");
}

}  // namespace

TEST(ModelJson, RoundTripPreservesEvaluation) {
  SktParameters p;
  p.a1 = 1.5;
  p.alpha11 = 1.0;
  p.alpha12 = 0.25;
  p.alpha21 = 0.7;
  p.alpha22 = 2.0;
  p.b1 = 0.3;
  p.phi_x = 1.0;
  p.lotka_volterra = LotkaVolterra{};
  const auto s = classic_skt(p);
  const auto t = model_from_json(model_to_json(s));
  const Vec u = (Vec(2) << 0.4, 1.7).finished();
  Gradient g(2, 2);
  g << 0.1, -0.2, 0.3, 0.4;
  EXPECT_EQ(eval_P(s, u), eval_P(t, u));
  EXPECT_EQ(eval_A(s, u), eval_A(t, u));
  EXPECT_EQ(eval_reaction(s, u, g), eval_reaction(t, u, g));
  EXPECT_EQ(s.lambda(u), t.lambda(u));
  EXPECT_EQ(s.C_f, t.C_f);
}

TEST(ModelJson, ClassicShorthandMatchesBuilder) {
  const auto j = json::parse(R"({"classic_skt": {"alpha11": 1.0, "alpha12": 0.5, "lotka_volterra": {}}})");
  SktParameters p;
  p.alpha11 = 1.0;
  p.alpha12 = 0.5;
  p.lotka_volterra = LotkaVolterra{};
  const Vec u = (Vec(2) << 2.0, 3.0).finished();
  EXPECT_EQ(eval_A(model_from_json(j), u), eval_A(classic_skt(p), u));
}

TEST(ModelJson, MalformedInputIsInputError) {
  EXPECT_THROW(model_from_json(json::parse(R"({"m": 1})")), InputError);
  EXPECT_THROW(model_from_json(json::parse(R"({"m": 1, "P": [[[1.0, 1, 2]]], "lambda": {}})")), InputError);
  EXPECT_THROW(model_from_json(json::parse(R"({"m": 1, "P": [[[1.0, -1]]], "lambda": {}})")), InputError);
  EXPECT_THROW(model_from_json(json::parse(R"({"m": 1, "P": [[["a", 1]]], "lambda": {}})")), InputError);
  EXPECT_THROW(
      model_from_json(json::parse(R"({"m": 1, "P": [[[1.0, 1]]], "lambda": {}, "reaction": {"type": "magic"}})")),
      InputError);
}

TEST(ModelJson, NonFiniteNumbersBecomeStrings) {
  EXPECT_EQ(detail::num(INFINITY), json("inf"));
  EXPECT_EQ(detail::num(-INFINITY), json("-inf"));
  EXPECT_EQ(detail::num(NAN), json("nan"));
  EXPECT_EQ(detail::num(1.5), json(1.5));
}

TEST(Manifest, DefaultsAreFilledIn) {
  const auto r = parse_manifest(minimal());
  EXPECT_EQ(r.solver, SolverConfig{});
  EXPECT_EQ(r.grid.Lx, 1.0);
  EXPECT_EQ(r.grid.bc, Boundary::NeumannZero);
  EXPECT_EQ(r.initial.family, "eigenmode");
  EXPECT_EQ(r.verify.region.hi[0], 10.0);
  EXPECT_EQ(r.verify.region.lo[0], -10.0);
  EXPECT_FALSE(r.ensemble.has_value());
}

TEST(Manifest, EchoRoundTripIsAFixedPoint) {
  for (const auto& entry : fs::directory_iterator(kManifests)) {
    const auto r = parse_manifest(load_json_file(entry.path().string()), kManifests);
    const json e1 = manifest_to_json(r);
    const auto r2 = parse_manifest(e1);
    EXPECT_EQ(e1, manifest_to_json(r2)) << entry.path();
    EXPECT_EQ(manifest_hash(r), manifest_hash(r2)) << entry.path();
    EXPECT_EQ(r.solver, r2.solver);
    EXPECT_EQ(r.diagnostics, r2.diagnostics);
    EXPECT_EQ(r.grid, r2.grid);
  }
}

TEST(Manifest, HashChangesWithContent) {
  auto j = minimal();
  const auto a = manifest_hash(parse_manifest(j));
  j["solver"] = {{"t_end", 2.0}};
  EXPECT_NE(a, manifest_hash(parse_manifest(j)));
}

TEST(Manifest, InputErrors) {
  auto bad = [](auto edit) {
    json j = minimal();
    edit(j);
    return j;
  };
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["schema"] = "other/2"; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j.erase("grid"); })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["grid"]["Nx"] = 1; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["grid"]["bc"] = "periodic"; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["solver"] = {{"scheme", "rk4"}}; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["solver"] = {{"dt0", 1.0}, {"dt_max", 0.1}}; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["diagnostics"] = {{"bmo_radii", {0.1}}}; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["initial"] = {{"family", "snapshot"}, {"path", "/nonexistent"}}; })),
               InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["outputs"] = {{"format", "hdf5"}}; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["solver"] = {{"t_end", "soon"}}; })), InputError);
  EXPECT_THROW(parse_manifest(bad([](json& j) { j["sweep"] = {{"pointer", "/seed"}, {"values", json::array()}}; })),
               InputError);
}

TEST(Manifest, SnapshotInitialData) {
  const auto dir = fs::temp_directory_path() / "sktlab_io_snapshot";
  fs::create_directories(dir);
  const auto g = build_grid(1, 1, 8, 8, Boundary::NeumannZero);
  const Field u = make_initial(g, 1, InitialFamily::Fourier, 2.0, 9);
  save_field((dir / "u0.bin").string(), u, SnapshotFormat::Binary);
  json j = minimal();
  j["initial"] = {{"family", "snapshot"}, {"path", "u0.bin"}, {"format", "bin"}};
  const auto r = parse_manifest(j, dir);
  EXPECT_EQ(initial_field(r).values(), u.values());
  j["grid"]["Nx"] = 16;
  EXPECT_THROW(initial_field(parse_manifest(j, dir)), InputError);
  fs::remove_all(dir);
}

TEST(Manifest, EnsembleSpecCarriesSettings) {
  const auto r = parse_manifest(load_json_file((kManifests / "skt_ensemble.json").string()));
  const auto e = ensemble_spec(r, 3);
  EXPECT_EQ(e.count, 10);
  EXPECT_EQ(e.threads, 3);
  EXPECT_EQ(e.seed, 11u);
  ASSERT_TRUE(e.T_observe.has_value());
  EXPECT_EQ(*e.T_observe, 10.0);
  EXPECT_EQ(e.M1_targets, (std::vector<double>{2.0, 5.0}));
  EXPECT_THROW(ensemble_spec(parse_manifest(minimal())), InputError);
}

TEST(TrajectoryCsv, ParsesBackExactly) {
  const auto g = build_grid(1, 1, 8, 8, Boundary::DirichletZero);
  SolverConfig c;
  c.dt0 = c.dt_max = 1e-3;
  c.t_end = 0.01;
  DiagnosticsConfig d;
  d.p_list = {3.0};
  d.bmo_radii = {0.25};
  d.morrey_radii = {0.25, 0.5};
  const auto tr = run(make_initial(g, 1, InitialFamily::Eigenmode, 1.0, 1), heat_model(1), c, d);
  std::stringstream ss;
  write_trajectory_csv(ss, tr, 1, d, {{"manifest_hash", "abc"}, {"seed", "4"}});
  const auto t = read_csv(ss);
  ASSERT_EQ(t.meta.size(), 2u);
  EXPECT_EQ(t.meta[1].second, "4");
  EXPECT_EQ(t.columns, trajectory_columns(1, d));
  ASSERT_EQ(t.rows.size(), tr.records.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_EQ(t.rows[k][t.column("t")], tr.records[k].t);
    EXPECT_EQ(t.rows[k][t.column("L2")], tr.records[k].L2);
    EXPECT_EQ(t.rows[k][t.column("energy_y")], tr.records[k].energy_y);
    EXPECT_EQ(t.rows[k][t.column("L3")], tr.records[k].Lp[0]);
    EXPECT_EQ(t.rows[k][t.column("morrey@0.5")], tr.records[k].morrey[1]);
  }
}

TEST(TrajectoryCsv, RaggedRowIsInputError) {
  std::stringstream ss("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(ss), InputError);
}

TEST(Reports, JsonHasExpectedKeys) {
  const auto rep = verify_structure(heat_model(2), Box::symmetric(2, 1.0), 50, 1);
  const json j = to_json(rep);
  for (const char* k : {"ellipticity_pass", "sg_prime_pass", "C_star_hat", "all_pass"}) EXPECT_TRUE(j.contains(k)) << k;
  std::vector<double> t{0, 1, 2}, y{3, 2, 1.5};
  const json d = to_json(decay_bound_check(t, y, 2.0, {2.0}));
  EXPECT_TRUE(d.contains("constants"));
  EXPECT_TRUE(d.contains("margins"));
}
