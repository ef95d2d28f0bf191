#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sktlab/attractor.hpp"
#include "sktlab/diagnostics.hpp"
#include "sktlab/field_io.hpp"
#include "sktlab/model.hpp"
#include "sktlab/solver.hpp"
#include "sktlab/structure.hpp"

namespace sktlab {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("field '") + key + "': " + e.what());
  }
}

/// Non-finite numbers are written as the strings "inf", "-inf", "nan".
inline json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

inline Vec vec_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline json mat_json(const Mat& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    a.push_back(row);
  }
  return a;
}

inline Mat mat_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].size();
  Mat M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InputError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return M;
}

/// A polynomial is a list of terms [coef, e_1, ..., e_m].
inline json poly_json(const Polynomial& p) {
  json a = json::array();
  for (const auto& t : p) {
    json term = json::array({t.coef});
    for (int e : t.exps) term.push_back(e);
    a.push_back(term);
  }
  return a;
}

inline Polynomial poly_from(const json& j, int m, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": polynomial must be a list of terms");
  Polynomial p;
  for (const auto& term : j) {
    if (!term.is_array() || static_cast<int>(term.size()) != m + 1)
      throw InputError(where + ": each term must be [coef, e_1, ..., e_m] with m = " + std::to_string(m));
    Monomial mono;
    mono.coef = term[0].get<double>();
    for (int i = 1; i <= m; ++i) {
      if (!term[i].is_number_integer() || term[i].get<int>() < 0)
        throw InputError(where + ": exponents must be nonnegative integers");
      mono.exps.push_back(term[i].get<int>());
    }
    p.push_back(std::move(mono));
  }
  return p;
}

inline json matpoly_json(const MatrixPolynomial& M) {
  if (M.empty()) return nullptr;
  json entries = json::array();
  for (const auto& e : M.entries()) entries.push_back(poly_json(e));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"entries", entries}};
}

/// Either {"rows", "cols", "entries": [polynomial, ...] row-major} or
/// {"constant": [[...], ...]}.
inline MatrixPolynomial matpoly_from(const json& j, int m, const std::string& where) {
  if (j.is_null()) return {};
  if (j.contains("constant")) return MatrixPolynomial::constant(m, mat_from(j.at("constant"), where));
  const int rows = require(j, "rows", where).get<int>();
  const int cols = require(j, "cols", where).get<int>();
  const json& e = require(j, "entries", where);
  std::vector<Polynomial> entries;
  for (const auto& p : e) entries.push_back(poly_from(p, m, where));
  return MatrixPolynomial(m, rows, cols, std::move(entries));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

inline json model_to_json(const ModelSpec& s) {
  json P = json::array();
  for (const auto& c : s.P.components()) P.push_back(detail::poly_json(c));
  json j = {{"name", s.name},
            {"m", s.dim()},
            {"P", P},
            {"lambda", {{"lambda0", s.lambda.lambda0}, {"lambda1", s.lambda.lambda1}, {"k", s.lambda.k}}},
            {"C_f", s.C_f}};
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, CompetitiveReaction>) {
          j["reaction"] = {{"type", "competitive"},
                           {"K", detail::mat_json(r.K)},
                           {"B", detail::matpoly_json(r.B)},
                           {"G", detail::matpoly_json(r.G)},
                           {"G_norm", r.G_norm.size() ? detail::mat_json(r.G_norm) : json(nullptr)},
                           {"kappa", r.kappa},
                           {"c0", r.c0}};
        } else {
          json f = json::array();
          for (const auto& c : r.f.components()) f.push_back(detail::poly_json(c));
          j["reaction"] = {{"type", "general"}, {"B", detail::matpoly_json(r.B)}, {"f", f}};
        }
      },
      s.reaction);
  return j;
}

inline SktParameters skt_parameters_from(const json& j) {
  SktParameters p;
  p.a1 = detail::get_or(j, "a1", 1.0);
  p.a2 = detail::get_or(j, "a2", 1.0);
  p.alpha11 = detail::get_or(j, "alpha11", 0.0);
  p.alpha12 = detail::get_or(j, "alpha12", 0.0);
  p.alpha21 = detail::get_or(j, "alpha21", 0.0);
  p.alpha22 = detail::get_or(j, "alpha22", 0.0);
  p.b1 = detail::get_or(j, "b1", 0.0);
  p.b2 = detail::get_or(j, "b2", 0.0);
  p.phi_x = detail::get_or(j, "phi_x", 0.0);
  p.phi_y = detail::get_or(j, "phi_y", 0.0);
  if (j.contains("lotka_volterra") && !j.at("lotka_volterra").is_null()) {
    const json& l = j.at("lotka_volterra");
    LotkaVolterra lv;
    lv.r1 = detail::get_or(l, "r1", lv.r1);
    lv.r2 = detail::get_or(l, "r2", lv.r2);
    lv.b11 = detail::get_or(l, "b11", lv.b11);
    lv.b12 = detail::get_or(l, "b12", lv.b12);
    lv.b21 = detail::get_or(l, "b21", lv.b21);
    lv.b22 = detail::get_or(l, "b22", lv.b22);
    p.lotka_volterra = lv;
  }
  if (j.contains("C_f") && !j.at("C_f").is_null()) p.C_f = j.at("C_f").get<double>();
  return p;
}

/// Inline model object, or {"classic_skt": {...}} shorthand.
inline ModelSpec model_from_json(const json& j) {
  const std::string where = "model";
  try {
    if (j.contains("classic_skt")) return classic_skt(skt_parameters_from(j.at("classic_skt")));
    ModelSpec s;
    s.name = detail::get_or<std::string>(j, "name", "model");
    const int m = detail::require(j, "m", where).get<int>();
    if (m < 1) throw InputError("model: m must be >= 1");
    const json& P = detail::require(j, "P", where);
    if (!P.is_array() || static_cast<int>(P.size()) != m) throw InputError("model: P needs m components");
    std::vector<Polynomial> comps;
    for (const auto& c : P) comps.push_back(detail::poly_from(c, m, "model.P"));
    s.P = PolynomialMap(m, std::move(comps));
    const json& L = detail::require(j, "lambda", where);
    s.lambda = LambdaSpec{detail::get_or(L, "lambda0", 1.0), detail::get_or(L, "lambda1", 0.0),
                          detail::get_or(L, "k", 1.0)};
    s.C_f = detail::get_or(j, "C_f", 1.0);
    const json R = j.contains("reaction") ? j.at("reaction") : json(nullptr);
    const std::string type = R.is_null() ? "general" : detail::get_or<std::string>(R, "type", "competitive");
    if (type == "competitive") {
      CompetitiveReaction r;
      r.K = R.contains("K") ? detail::mat_from(R.at("K"), "reaction.K") : Mat::Zero(m, m);
      r.B = detail::matpoly_from(R.value("B", json(nullptr)), m, "reaction.B");
      r.G = detail::matpoly_from(R.value("G", json(nullptr)), m, "reaction.G");
      if (R.contains("G_norm") && !R.at("G_norm").is_null()) r.G_norm = detail::mat_from(R.at("G_norm"), "reaction.G_norm");
      r.kappa = detail::get_or(R, "kappa", 1.0);
      r.c0 = detail::get_or(R, "c0", 1.0);
      s.reaction = r;
    } else if (type == "general") {
      GeneralReaction r = zero_reaction(m);
      if (!R.is_null()) {
        r.B = detail::matpoly_from(R.value("B", json(nullptr)), m, "reaction.B");
        if (R.contains("f") && !R.at("f").is_null()) {
          std::vector<Polynomial> f;
          for (const auto& c : R.at("f")) f.push_back(detail::poly_from(c, m, "reaction.f"));
          if (static_cast<int>(f.size()) != m) throw InputError("reaction.f needs m components");
          r.f = PolynomialMap(m, std::move(f));
        }
      }
      s.reaction = r;
    } else {
      throw InputError("unknown reaction type '" + type + "'");
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const StructuralReport& r) {
  json ll = json::object();
  for (const auto& [l, v] : r.lambda_l) ll[fmt17(l)] = detail::num(v);
  return {{"region", {{"lo", detail::vec_json(r.region.lo)}, {"hi", detail::vec_json(r.region.hi)}}},
          {"sample_count", r.sample_count},
          {"seed", r.seed},
          {"delta_k", r.delta_k},
          {"tol_ell", r.tol_ell},
          {"lambda_ratio_min", detail::num(r.lambda_ratio_min)},
          {"lambda_ratio_max", detail::num(r.lambda_ratio_max)},
          {"mineig_min", detail::num(r.mineig_min)},
          {"envelope_ratio_min", detail::num(r.envelope_ratio_min)},
          {"envelope_ratio_max", detail::num(r.envelope_ratio_max)},
          {"ellipticity_violations", r.ellipticity_violations},
          {"first_violation", r.first_violation},
          {"C_star_hat", detail::num(r.C_star_hat)},
          {"Lambda_hat", detail::num(r.Lambda_hat)},
          {"Lambda1_hat", detail::num(r.Lambda1_hat)},
          {"eps0_hat", detail::num(r.eps0_hat)},
          {"P_growth_hat", detail::num(r.P_growth_hat)},
          {"C_f_hat", detail::num(r.C_f_hat)},
          {"f_lipschitz_hat", detail::num(r.f_lipschitz_hat)},
          {"B_ratio_hat", detail::num(r.B_ratio_hat)},
          {"G_coercivity_min", detail::num(r.G_coercivity_min)},
          {"ellipticity_pass", r.ellipticity_pass},
          {"sg_pass", r.sg_pass},
          {"sg_prime_pass", r.sg_prime_pass},
          {"f_prime_pass", r.f_prime_pass},
          {"g_pass", r.g_pass},
          {"all_pass", r.all_pass},
          {"lambda_l", ll}};
}

inline json to_json(const LambdaLResult& r) {
  return {{"l", r.l},
          {"value", detail::num(r.value)},
          {"gate_applicable", r.gate_applicable},
          {"gate_lhs", r.gate_lhs},
          {"gate_rhs", detail::num(r.gate_rhs)},
          {"gate_pass", r.gate_pass},
          {"C_star_hat", detail::num(r.C_star_hat)},
          {"pairs", r.pairs},
          {"skipped", r.skipped}};
}

inline json to_json(const InequalityReport& r) {
  json c = json::object();
  for (const auto& [k, v] : r.constants) c[k] = detail::num(v);
  json margins = json::array();
  for (double v : r.margins) margins.push_back(detail::num(v));
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"M1", e.M1}, {"T_star", detail::num(e.T_star)}, {"empirical", detail::num(e.empirical)}});
  return {{"name", r.name},
          {"constants", c},
          {"margins", margins},
          {"pass_fraction", r.pass_fraction},
          {"feasible", r.feasible},
          {"holds", r.holds},
          {"violating_step", r.violating_step ? json(*r.violating_step) : json(nullptr)},
          {"entries", entries},
          {"notes", r.notes}};
}

inline json to_json(const YStarReport& r) {
  return {{"C1", detail::num(r.C1)},
          {"C3", detail::num(r.C3)},
          {"p", r.p},
          {"y_star", detail::num(r.y_star)},
          {"y0", r.y0},
          {"y_max", r.y_max},
          {"tol", r.tol},
          {"feasible", r.feasible},
          {"dominated", r.dominated},
          {"violating_step", r.violating_step ? json(*r.violating_step) : json(nullptr)}};
}

inline json to_json(const BmoReport& r) {
  json rows = json::array();
  for (std::size_t k = 0; k < r.radii.size(); ++k) {
    rows.push_back({{"radius", r.radii[k]},
                    {"oscillation", detail::num(r.oscillation[k])},
                    {"product", detail::num(r.product[k])},
                    {"below_mu0", r.below_mu0[k]},
                    {"skipped", static_cast<bool>(r.skipped[k])}});
  }
  return {{"Lambda_hat", r.Lambda_hat}, {"mu0", r.mu0}, {"radii", rows}, {"notes", r.notes}};
}

inline json to_json(const AbsorbingBallReport& r) {
  json members = json::array();
  for (const auto& m : r.members) {
    json entries = json::array();
    for (const auto& e : m.entries)
      entries.push_back({{"M1", e.M1}, {"T_star", detail::num(e.T_star)}, {"empirical", detail::num(e.empirical)}});
    members.push_back({{"index", m.index},
                       {"amplitude", m.amplitude},
                       {"seed", m.seed},
                       {"terminated_reason", to_string(m.termination)},
                       {"message", m.message},
                       {"excluded", m.excluded},
                       {"steps", m.steps},
                       {"y0", m.y0},
                       {"tail_sup_W12", m.tail_sup_W12},
                       {"tail_sup_lambda_moment", m.tail_sup_lambda_moment},
                       {"tail_sup_L2", m.tail_sup_L2},
                       {"tail_sup_Lqk", m.tail_sup_Lqk},
                       {"c2", m.c2 ? json(*m.c2) : json(nullptr)},
                       {"c3", m.c3 ? json(*m.c3) : json(nullptr)},
                       {"entries", entries},
                       {"ystar", m.ystar ? to_json(*m.ystar) : json(nullptr)}});
  }
  return {{"T_observe", r.T_observe},     {"M_hat", r.M_hat},
          {"M_hat_lambda", r.M_hat_lambda}, {"M_hat_L2", r.M_hat_L2},
          {"L2_spread", r.L2_spread},     {"W12_spread", r.W12_spread},
          {"common_ball", r.common_ball}, {"all_reached_t_end", r.all_reached_t_end},
          {"ystar_dominated", r.ystar_dominated}, {"entry_consistent", r.entry_consistent},
          {"y_star_max", r.y_star_max},   {"excluded", r.excluded},
          {"notes", r.notes},             {"members", members}};
}

// ---------------------------------------------------------------------------
// Trajectory CSV

inline std::vector<std::string> trajectory_columns(int m, const DiagnosticsConfig& d) {
  std::vector<std::string> cols{"t"};
  for (int c = 0; c < m; ++c) cols.push_back("mass_" + std::to_string(c + 1));
  for (const char* s : {"L1", "L2", "Lqk", "W12", "energy_y", "lambda_moment"}) cols.emplace_back(s);
  for (double p : d.p_list) cols.push_back("L" + fmt17(p));
  for (double R : d.bmo_radii) cols.push_back("bmo@" + fmt17(R));
  for (double R : d.morrey_radii) cols.push_back("morrey@" + fmt17(R));
  return cols;
}

/// Comment lines `# key=value` carry provenance; then a header row and one
/// row per record, numbers at 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int m, const DiagnosticsConfig& d,
                                 const std::vector<std::pair<std::string, std::string>>& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
  const auto cols = trajectory_columns(m, d);
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& r : tr.records) {
    os << fmt17(r.t);
    for (double v : r.mass) os << ',' << fmt17(v);
    for (double v : {r.L1, r.L2, r.Lqk, r.W12, r.energy_y, r.lambda_moment}) os << ',' << fmt17(v);
    for (double v : r.Lp) os << ',' << fmt17(v);
    for (double v : r.bmo) os << ',' << fmt17(v);
    for (double v : r.morrey) os << ',' << fmt17(v);
    os << '\n';
  }
}

struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw InputError("CSV has no column '" + name + "'");
  }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError("CSV cell '" + cell + "' is not a number");
      }
    }
    if (row.size() != t.columns.size()) throw InputError("CSV row width differs from the header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Files

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

/// FNV-1a 64 of a string, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sktlab
