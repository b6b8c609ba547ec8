// Command line driver. Reads a JSON experiment description, runs the
// requested study, and writes CSV/JSON artifacts plus a run manifest into
// the output directory. Everything numerical lives in the headers; this
// file only parses configs, dispatches, and serializes.
//
// Exit codes: 0 success, 2 configuration or usage error (bad JSON, unknown
// keys, invalid parameters, missing files), 3 numerical budget exceeded
// (averaging budget, ODE step rejection, unresolvable lattice, shortened
// sweep ladder). Partial results are still written and their manifest
// entries marked incomplete.
//
// QFLAB_THREADS caps the worker pool for sweeps; results do not depend on
// its value.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <qflab/averaging.hpp>
#include <qflab/common.hpp>
#include <qflab/dynamics.hpp>
#include <qflab/field.hpp>
#include <qflab/fock.hpp>
#include <qflab/gfcalc.hpp>
#include <qflab/profiles.hpp>
#include <qflab/scattering.hpp>
#include <qflab/serialize.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigExit = 2;
constexpr int kBudgetExit = 3;

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Schema helpers. Every object is checked against its full key list, so a
// misspelled or stray key fails the run instead of being ignored.

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

const json* find_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double num_req(const json& obj, const std::string& where, const char* key) {
  const json* v = find_key(obj, key);
  if (!v || !v->is_number())
    throw ConfigError(where + ": \"" + key + "\" must be a number");
  return v->get<double>();
}

double num_or(const json& obj, const std::string& where, const char* key,
              double def) {
  return find_key(obj, key) ? num_req(obj, where, key) : def;
}

int int_req(const json& obj, const std::string& where, const char* key) {
  const json* v = find_key(obj, key);
  if (!v || !v->is_number_integer())
    throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return v->get<int>();
}

int int_or(const json& obj, const std::string& where, const char* key,
           int def) {
  return find_key(obj, key) ? int_req(obj, where, key) : def;
}

bool bool_or(const json& obj, const std::string& where, const char* key,
             bool def) {
  const json* v = find_key(obj, key);
  if (!v) return def;
  if (!v->is_boolean())
    throw ConfigError(where + ": \"" + key + "\" must be a boolean");
  return v->get<bool>();
}

std::string str_req(const json& obj, const std::string& where,
                    const char* key) {
  const json* v = find_key(obj, key);
  if (!v || !v->is_string())
    throw ConfigError(where + ": \"" + key + "\" must be a string");
  return v->get<std::string>();
}

std::string str_or(const json& obj, const std::string& where, const char* key,
                   const std::string& def) {
  return find_key(obj, key) ? str_req(obj, where, key) : def;
}

std::vector<double> num_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty())
    throw ConfigError(where + ": expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// an integer scalar is accepted wherever a list of integers is, so sweeps
// over one grid read naturally
std::vector<int> int_list(const json& v, const std::string& where) {
  if (v.is_number_integer()) return {v.get<int>()};
  if (!v.is_array() || v.empty())
    throw ConfigError(where + ": expected an integer or array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(where + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named profile lookups.

qflab::Mollifier mollifier_by_label(const std::string& label) {
  for (const auto& m : qflab::Mollifier::stock())
    if (m.label() == label) return m;
  throw ConfigError("unknown mollifier \"" + label +
                    "\" (stock: exp_step, gauss_step, tanh_step)");
}

qflab::Cutoff cutoff_by_label(const std::string& label) {
  for (const auto& p : qflab::PlateauBump::stock())
    if (p.label() == label) return qflab::Cutoff(p);
  throw ConfigError("unknown cutoff \"" + label +
                    "\" (stock: exp_step, gauss_step, tanh_step)");
}

qflab::TransitionProfile transition_by_label(const std::string& label) {
  for (const auto& h : qflab::TransitionProfile::stock())
    if (h.label() == label) return h;
  if (qflab::TransitionProfile::algebraic().label() == label)
    return qflab::TransitionProfile::algebraic();
  throw ConfigError("unknown transition profile \"" + label +
                    "\" (tanh_sig, erf_sig, logistic_sig, algebraic_sig)");
}

// eps = 0 asks for the sharp configuration: comfortably inside the plateau
// on every grid mode, or an arbitrary scale when only the zero mode exists
double sharp_or(const qflab::ModeGrid& grid, const qflab::Mollifier& mol,
                double eps) {
  if (eps != 0.0) return eps;
  double se = qflab::sharp_epsilon(grid, mol);
  return std::isfinite(se) ? 0.9 * se : 0.5;
}

qflab::ModelParams parse_model(const json& m, const std::string& where) {
  check_keys(m, where,
             {"dim", "box_length", "j_max", "mass", "n_max", "mollifier",
              "eps", "cutoff", "coupling", "power", "tau", "quad_points"});
  int dim = int_or(m, where, "dim", 1);
  double box = num_or(m, where, "box_length", 2.0 * M_PI);
  int j_max = int_req(m, where, "j_max");
  double mass = num_or(m, where, "mass", 1.0);
  qflab::ModelParams p{qflab::ModeGrid(dim, box, j_max, mass),
                       int_req(m, where, "n_max"),
                       mollifier_by_label(str_or(m, where, "mollifier",
                                                 "exp_step")),
                       std::nullopt,
                       0.0,
                       num_or(m, where, "coupling", 0.0),
                       int_or(m, where, "power", 1),
                       num_or(m, where, "tau", 0.0),
                       int_or(m, where, "quad_points", 0)};
  p.eps = sharp_or(p.grid, p.mollifier, num_or(m, where, "eps", 0.0));
  if (const json* c = find_key(m, "cutoff"))
    p.cutoff = cutoff_by_label(c->get<std::string>());
  p.validate();
  return p;
}

std::vector<double> position_req(const json& obj, const std::string& where,
                                 const char* key, int dim) {
  const json* v = find_key(obj, key);
  if (!v) throw ConfigError(where + ": missing \"" + std::string(key) + "\"");
  auto x = num_list(*v, where + "." + key);
  if (int(x.size()) != dim)
    throw ConfigError(where + "." + key + ": expected " +
                      std::to_string(dim) + " coordinates");
  return x;
}

qflab::StateRecipe parse_recipe(const json& r, const std::string& where,
                                int dim) {
  check_keys(r, where, {"center", "width", "shift", "label"});
  qflab::StateRecipe out;
  out.center = position_req(r, where, "center", dim);
  out.width = num_req(r, where, "width");
  if (const json* s = find_key(r, "shift"))
    out.shift = num_list(*s, where + ".shift");
  out.label = str_or(r, where, "label", "packet");
  out.validate(dim);
  return out;
}

// ---------------------------------------------------------------------------
// Run context: collects artifacts, then writes the manifest.

struct RunContext {
  fs::path out_dir;
  std::string experiment;
  std::string label;
  std::uint64_t seed = 0;
  json config;
  std::vector<qflab::Artifact> artifacts;
  bool partial = false;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  void add(const std::string& name, const std::string& kind,
           const std::string& content, bool incomplete = false) {
    fs::path p = out_dir / name;
    qflab::write_text(p.string(), content);
    artifacts.push_back(qflab::Artifact{
        name, kind, qflab::hash_hex(qflab::fnv1a(content)), incomplete});
    if (incomplete) partial = true;
    std::printf("wrote %s\n", p.string().c_str());
  }

  int finish() {
    double wall = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    json man = qflab::manifest_json(experiment, label, config, seed, wall,
                                    artifacts);
    man["status"] = partial ? "partial" : "complete";
    fs::path p = out_dir / "manifest.json";
    qflab::write_text(p.string(), qflab::dump_sorted(man));
    std::printf("manifest %s (%s, %.2f s)\n", p.string().c_str(),
                partial ? "partial" : "complete", wall);
    return partial ? kBudgetExit : kOk;
  }
};

// ---------------------------------------------------------------------------
// average: ladder association of a scalar eps-family.

int run_average(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where,
             {"family", "power", "powers", "value", "eta_start", "eta_count",
              "eta_factor", "tolerance", "hint"});
  std::string family = str_or(params, where, "family", "abs_cos");
  bool log_family = family == "abs_cos_log";
  double eta_start = num_or(params, where, "eta_start", log_family ? 0.5 : 0.1);
  int eta_count = int_or(params, where, "eta_count", log_family ? 12 : 14);
  double eta_factor =
      num_or(params, where, "eta_factor", log_family ? 0.35 : 0.4);
  double tol = num_or(params, where, "tolerance", log_family ? 1e-4 : 2e-5);
  bool hint = bool_or(params, where, "hint", true);
  auto ladder = qflab::eta_ladder(eta_start, eta_count, eta_factor);

  json report;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;

  if (family == "abs_cos") {
    auto abs_cos = [](double u) { return std::abs(std::cos(u)); };
    if (const json* pw = find_key(params, "powers")) {
      auto powers = num_list(*pw, where + ".powers");
      auto study = qflab::p_rescaling_study(
          abs_cos, hint ? std::optional<double>(M_PI) : std::nullopt, powers,
          ladder, tol, 1.0);
      report = study;
      header = {"p", "eta", "a_value"};
      for (std::size_t i = 0; i < powers.size(); ++i)
        for (std::size_t r = 0; r < study.reports[i].eta_ladder.size(); ++r)
          rows.push_back({qflab::fmt_g(powers[i]),
                          qflab::fmt_g(study.reports[i].eta_ladder[r]),
                          qflab::fmt_g(study.reports[i].a_values[r])});
    } else {
      double p = num_or(params, where, "power", 1.0);
      qflab::GeneralizedNumber gn(
          "abs_cos p=" + qflab::fmt_g(p),
          [p](double e) { return std::abs(std::cos(std::pow(1.0 / e, p))); });
      gn.with_bound(1.0);
      if (hint) gn.with_hint(qflab::OscillationHint{p, M_PI, 0.0});
      auto rep = qflab::associated_value(gn, ladder, tol);
      report = rep;
      header = {"eta", "a_value"};
      for (std::size_t r = 0; r < rep.eta_ladder.size(); ++r)
        rows.push_back({qflab::fmt_g(rep.eta_ladder[r]),
                        qflab::fmt_g(rep.a_values[r])});
    }
  } else if (family == "abs_cos_log") {
    if (find_key(params, "power") || find_key(params, "powers"))
      throw ConfigError("abs_cos_log does not take a substitution power");
    qflab::GeneralizedNumber gn("abs_cos_log", [](double e) {
      return std::abs(std::cos(std::log(1.0 / e)));
    });
    gn.with_bound(1.0);
    auto rep = qflab::associated_value(gn, ladder, tol);
    report = rep;
    header = {"eta", "a_value"};
    for (std::size_t r = 0; r < rep.eta_ladder.size(); ++r)
      rows.push_back(
          {qflab::fmt_g(rep.eta_ladder[r]), qflab::fmt_g(rep.a_values[r])});
  } else if (family == "constant") {
    double c = num_req(params, where, "value");
    qflab::GeneralizedNumber gn("constant", [c](double) { return c; });
    auto rep = qflab::associated_value(gn, ladder, tol);
    report = rep;
    header = {"eta", "a_value"};
    for (std::size_t r = 0; r < rep.eta_ladder.size(); ++r)
      rows.push_back(
          {qflab::fmt_g(rep.eta_ladder[r]), qflab::fmt_g(rep.a_values[r])});
  } else {
    throw ConfigError("unknown family \"" + family +
                      "\" (abs_cos, abs_cos_log, constant)");
  }

  ctx.add("average.json", "json", qflab::dump_sorted(report));
  ctx.add("average.csv", "csv", qflab::csv_table(header, rows));
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// heaviside: jump-function power pairings and the infinitesimal check.

int run_heaviside(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where, {"profiles", "eps", "n1", "n2", "infinitesimal"});
  std::vector<qflab::TransitionProfile> profiles;
  if (const json* pr = find_key(params, "profiles")) {
    if (!pr->is_array() || pr->empty())
      throw ConfigError("params.profiles: expected a non-empty array");
    for (const auto& e : *pr)
      profiles.push_back(transition_by_label(e.get<std::string>()));
  } else {
    profiles = qflab::TransitionProfile::stock();
  }
  std::vector<double> eps = {1.0, 1e-2, 1e-4};
  if (const json* e = find_key(params, "eps"))
    eps = num_list(*e, where + ".eps");
  int n1 = int_or(params, where, "n1", 2);
  int n2 = int_or(params, where, "n2", 1);
  bool infinitesimal = bool_or(params, where, "infinitesimal", true);
  double expected = 1.0 / (n1 + 1) - 1.0 / (n2 + 1);

  std::vector<std::vector<std::string>> rows;
  double max_defect = 0.0;
  json jrows = json::array();
  for (const auto& h : profiles)
    for (double e : eps) {
      double v = qflab::heaviside_jump_integral(h, e, n1, n2);
      double defect = std::abs(v - expected);
      max_defect = std::max(max_defect, defect);
      rows.push_back({h.label(), qflab::fmt_g(e), qflab::fmt_g(v),
                      qflab::fmt_g(defect)});
      jrows.push_back(json{{"profile", h.label()},
                           {"eps", e},
                           {"value", v},
                           {"defect", defect}});
    }

  json report{{"n1", n1},
              {"n2", n2},
              {"expected", expected},
              {"max_defect", max_defect},
              {"rows", jrows}};

  if (infinitesimal) {
    std::vector<qflab::TestFunction> tests = {
        qflab::TestFunction::gaussian(0.0, 1.0),
        qflab::TestFunction::bump(0.5, 1.5)};
    auto ladder = qflab::default_eps_ladder();
    json verdicts = json::array();
    for (const auto& h : profiles) {
      qflab::SmoothedHeaviside H(h, 1.0);
      auto rep = H.to_representative();
      qflab::Representative diff("H^2-H", [rep](double e, double x) {
        double v = rep(e, x);
        return v * v - v;
      });
      json entry = qflab::is_infinitesimal(diff, tests, ladder);
      entry["profile"] = h.label();
      verdicts.push_back(std::move(entry));
    }
    report["square_minus_self_infinitesimal"] = std::move(verdicts);
  }

  ctx.add("heaviside.json", "json", qflab::dump_sorted(report));
  ctx.add("heaviside.csv", "csv",
          qflab::csv_table({"profile", "eps", "value", "defect"}, rows));
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// ccr: equal-time commutators, dispersion and translation identities over a
// (j_max, n_max) grid of free fields.

int run_ccr(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where,
             {"dim", "box_length", "mass", "j_max", "n_max", "mollifier",
              "eps", "points", "time"});
  int dim = int_or(params, where, "dim", 1);
  double box = num_or(params, where, "box_length", 2.0 * M_PI);
  double mass = num_or(params, where, "mass", 1.0);
  auto j_list = find_key(params, "j_max")
                    ? int_list(params.at("j_max"), where + ".j_max")
                    : std::vector<int>{1, 2, 3};
  auto n_list = find_key(params, "n_max")
                    ? int_list(params.at("n_max"), where + ".n_max")
                    : std::vector<int>{2, 3, 4};
  qflab::Mollifier mol =
      mollifier_by_label(str_or(params, where, "mollifier", "exp_step"));
  double eps_in = num_or(params, where, "eps", 0.0);
  double t = num_or(params, where, "time", 0.0);

  std::vector<std::pair<std::vector<double>, std::vector<double>>> points;
  if (const json* pts = find_key(params, "points")) {
    if (!pts->is_array() || pts->empty())
      throw ConfigError("params.points: expected a non-empty array of pairs");
    for (const auto& pair : *pts) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("params.points: each entry is [x, y]");
      auto x = num_list(pair[0], where + ".points.x");
      auto y = num_list(pair[1], where + ".points.y");
      if (int(x.size()) != dim || int(y.size()) != dim)
        throw ConfigError("params.points: coordinates must have dim entries");
      points.emplace_back(std::move(x), std::move(y));
    }
  } else {
    std::vector<double> origin(std::size_t(dim), 0.0);
    std::vector<double> quarter(std::size_t(dim), 0.0);
    quarter[0] = box / 4.0;
    points.emplace_back(origin, origin);
    points.emplace_back(origin, quarter);
  }

  std::vector<std::vector<std::string>> rows;
  json jrows = json::array();
  double max_ccr = 0.0, max_like = 0.0, max_kg = 0.0, max_transl = 0.0;
  for (int j : j_list)
    for (int n : n_list) {
      qflab::ModeGrid grid(dim, box, j, mass);
      qflab::FockBasis basis(grid, n);
      double eps = sharp_or(grid, mol, eps_in);
      qflab::RegularizedField rf(basis, mol, eps);

      for (const auto& [x, y] : points) {
        auto rep = qflab::ccr_check(rf, x, y, t);
        max_ccr = std::max(max_ccr, rep.defect);
        max_like =
            std::max({max_like, rep.field_field, rep.momentum_momentum});
        rows.push_back({std::to_string(j), std::to_string(n),
                        std::to_string(basis.size()), qflab::fmt_g(eps),
                        qflab::fmt_g(x[0]), qflab::fmt_g(y[0]),
                        qflab::fmt_g(rep.target), qflab::fmt_g(rep.defect),
                        qflab::fmt_g(rep.field_field),
                        qflab::fmt_g(rep.momentum_momentum)});
        json entry = rep;
        entry["j_max"] = j;
        entry["n_max"] = n;
        entry["x"] = x;
        entry["y"] = y;
        jrows.push_back(std::move(entry));
      }

      // single-point identities: Klein-Gordon dispersion and one full
      // box-period translation
      const auto& x0 = points.front().first;
      max_kg = std::max(max_kg,
                        qflab::dispersion_defect(rf, x0, t).max_abs());
      std::vector<double> shifted = x0;
      shifted[0] += box;
      max_transl = std::max(max_transl,
                            (qflab::free_field(rf, shifted, t) -
                             qflab::free_field(rf, x0, t))
                                .max_abs());
    }

  json report{{"rows", jrows},
              {"max_ccr_defect", max_ccr},
              {"max_like_commutator", max_like},
              {"max_dispersion_defect", max_kg},
              {"max_translation_defect", max_transl}};
  ctx.add("ccr.json", "json", qflab::dump_sorted(report));
  ctx.add("ccr.csv", "csv",
          qflab::csv_table({"j_max", "n_max", "dim", "eps", "x", "y", "target",
                            "ccr_defect", "field_field", "momentum_momentum"},
                           rows));
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// evolve: Hamiltonian assembly, field equations at a quadrature node, the
// conjugation identity, the Heisenberg derivative, and optionally the
// unsmeared residual along the co-scaled ladder.

int run_evolve(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where,
             {"model", "time", "x", "x_index", "heisenberg_step",
              "residual_rungs", "residual_dim_cap"});
  const json* m = find_key(params, "model");
  if (!m) throw ConfigError("params: missing \"model\"");
  qflab::ModelParams p = parse_model(*m, where + ".model");
  double t = num_or(params, where, "time", p.tau);
  double h_step = num_or(params, where, "heisenberg_step", 1e-3);
  int residual_rungs = int_or(params, where, "residual_rungs", 0);
  auto cap = std::size_t(int_or(params, where, "residual_dim_cap", 100000));

  std::vector<double> x;
  if (const json* xv = find_key(params, "x")) {
    x = num_list(*xv, where + ".x");
    if (int(x.size()) != p.grid.dim())
      throw ConfigError("params.x: expected dim coordinates");
  } else {
    auto quad = qflab::detail::box_quadrature(p.grid, p.quadrature());
    std::size_t idx = std::size_t(int_or(params, where, "x_index", 0));
    if (idx >= quad.points.size())
      throw ConfigError("params.x_index: beyond the quadrature grid");
    x = quad.points[idx];
  }

  qflab::HamiltonianBundle b = qflab::assemble_hamiltonian(p);
  json report{{"e_zp", b.e_zp},
              {"basis_dim", b.basis().size()},
              {"q_defect_safe", b.q_defect.max_abs(b.basis().safe_size(1))},
              {"x", x},
              {"time", t}};

  report["field_equation"] = qflab::field_equation_check(p, b, x, t);
  report["conjugation_defect"] = qflab::theorem2_check(p, b, x, t);
  if (h_step > 0.0)
    report["heisenberg"] = qflab::heisenberg_derivative_check(p, b, x, t,
                                                              h_step);

  std::vector<std::vector<std::string>> rows;
  if (residual_rungs > 0) {
    auto ladder = qflab::co_scaled_ladder(p.grid, p.mollifier, p.n_max,
                                          residual_rungs, cap);
    json curve = json::array();
    for (const auto& rung : ladder) {
      qflab::ModelParams q = p;
      q.grid = qflab::ModeGrid(p.grid.dim(), p.grid.box_length(), rung.j_max,
                               p.grid.mass());
      q.eps = rung.eps;
      qflab::HamiltonianBundle rb = qflab::assemble_hamiltonian(q);
      auto node =
          qflab::detail::box_quadrature(q.grid, q.quadrature()).points.front();
      auto fe = qflab::field_equation_check(q, rb, node, q.tau);
      json entry = rung;
      entry["field_defect"] = fe.field_defect;
      entry["unsmeared_residual"] = fe.unsmeared_residual;
      entry["safe_states"] = fe.safe_states;
      curve.push_back(std::move(entry));
      rows.push_back({std::to_string(rung.index), qflab::fmt_g(rung.eps),
                      std::to_string(rung.j_max),
                      std::to_string(rung.basis_dim),
                      qflab::fmt_g(fe.unsmeared_residual),
                      qflab::fmt_g(fe.field_defect)});
    }
    report["residual_curve"] = std::move(curve);
    if (int(ladder.size()) < residual_rungs) ctx.partial = true;
  }

  ctx.add("evolve.json", "json", qflab::dump_sorted(report), ctx.partial);
  if (!rows.empty())
    ctx.add("evolve.csv", "csv",
            qflab::csv_table({"index", "eps", "j_max", "dim",
                              "unsmeared_residual", "field_defect"},
                             rows),
            ctx.partial);
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// smatrix: scattering operator via direct product and ODE integration, the
// generator decomposition, and the resolvent-power approximants.

int run_smatrix(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where,
             {"model", "time", "dt", "halving", "generator_check",
              "resolvent"});
  const json* m = find_key(params, "model");
  if (!m) throw ConfigError("params: missing \"model\"");
  qflab::ModelParams p = parse_model(*m, where + ".model");
  double t = num_req(params, where, "time");
  double dt = num_or(params, where, "dt", 0.0);
  bool halving = bool_or(params, where, "halving", false);
  bool generator_check = bool_or(params, where, "generator_check", true);

  qflab::HamiltonianBundle b = qflab::assemble_hamiltonian(p);
  json report{{"e_zp", b.e_zp},
              {"basis_dim", b.basis().size()},
              {"q_defect_safe", b.q_defect.max_abs(b.basis().safe_size(1))},
              {"time", t}};

  qflab::FieldOperator s = qflab::s_matrix(p, b, t);
  report["s_unitarity_defect"] =
      (s * s.adjoint() - qflab::FieldOperator::identity(b.basis())).max_abs();

  if (dt > 0.0) {
    auto ode = qflab::s_matrix_ode(p, b, t, dt);
    json jode = ode;
    jode["dt"] = dt;
    if (halving) {
      auto fine = qflab::s_matrix_ode(p, b, t, dt / 2.0);
      jode["reference_defect_halved"] = fine.reference_defect;
      jode["halving_ratio"] = ode.reference_defect / fine.reference_defect;
    }
    report["ode"] = std::move(jode);
  }

  if (generator_check)
    report["generator"] = qflab::theorem3_generator(p, b, t);

  std::vector<std::vector<std::string>> rows;
  if (const json* res = find_key(params, "resolvent")) {
    qflab::FieldOperator exact = b.propagator->unitary(-(t - p.tau));
    json jres = json::array();
    for (int n : int_list(*res, where + ".resolvent")) {
      double err =
          (qflab::hille_yoshida_approx(b.h0, t - p.tau, n) - exact).max_abs();
      jres.push_back(json{{"n", n}, {"error", err}});
      rows.push_back({std::to_string(n), qflab::fmt_g(err)});
    }
    report["resolvent"] = std::move(jres);
  }

  ctx.add("smatrix.json", "json", qflab::dump_sorted(report));
  if (!rows.empty())
    ctx.add("smatrix.csv", "csv", qflab::csv_table({"n", "error"}, rows));
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// sweep: transition amplitudes along a refinement ladder, with optional
// association of the resulting eps-family.

int run_sweep(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where,
             {"model", "time", "rungs", "dim_cap", "eps_list", "initial",
              "final", "mollifiers", "associate"});
  const json* m = find_key(params, "model");
  if (!m) throw ConfigError("params: missing \"model\"");
  qflab::ModelParams p = parse_model(*m, where + ".model");
  double t = num_req(params, where, "time");

  const json* ji = find_key(params, "initial");
  const json* jf = find_key(params, "final");
  if (!ji || !jf) throw ConfigError("params: missing \"initial\"/\"final\"");
  qflab::StateRecipe initial = parse_recipe(*ji, where + ".initial",
                                            p.grid.dim());
  qflab::StateRecipe final_state = parse_recipe(*jf, where + ".final",
                                                p.grid.dim());

  std::vector<qflab::Mollifier> mols;
  if (const json* jm = find_key(params, "mollifiers")) {
    if (!jm->is_array() || jm->empty())
      throw ConfigError("params.mollifiers: expected a non-empty array");
    for (const auto& e : *jm)
      mols.push_back(mollifier_by_label(e.get<std::string>()));
  } else {
    mols = qflab::Mollifier::stock();
  }

  int requested = int_or(params, where, "rungs", 4);
  std::vector<qflab::LadderRung> ladder;
  if (const json* je = find_key(params, "eps_list")) {
    if (find_key(params, "rungs") || find_key(params, "dim_cap"))
      throw ConfigError("params: eps_list replaces rungs/dim_cap");
    auto eps = num_list(*je, where + ".eps_list");
    auto dim = qflab::detail::truncated_dimension(p.grid.mode_count(),
                                                  p.n_max);
    for (std::size_t i = 0; i < eps.size(); ++i)
      ladder.push_back(
          qflab::LadderRung{int(i), eps[i], p.grid.j_max(), dim});
    requested = int(eps.size());
  } else {
    auto cap = std::size_t(int_or(params, where, "dim_cap", 200000));
    ladder = qflab::co_scaled_ladder(p.grid, mols.front(), p.n_max, requested,
                                     cap);
  }

  auto sweep = qflab::amplitude_sweep(p, ladder, final_state, initial, t,
                                      mols, requested, ctx.seed);
  json report = sweep;

  // per-mollifier value spread, and the spread across mollifiers of the
  // whole record list; both are the quantities the free and sharp claims
  // bound
  {
    json spreads = json::object();
    double cross = 0.0;
    for (const auto& mol : mols) {
      double lo = 1e300, hi = -1e300;
      for (const auto& r : sweep.records)
        if (r.mollifier == mol.label()) {
          lo = std::min(lo, r.value);
          hi = std::max(hi, r.value);
        }
      if (hi >= lo) spreads[mol.label()] = hi - lo;
    }
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      double lo = 1e300, hi = -1e300;
      for (const auto& r : sweep.records)
        if (r.ladder_index == int(i)) {
          lo = std::min(lo, r.value);
          hi = std::max(hi, r.value);
        }
      if (hi >= lo) cross = std::max(cross, hi - lo);
    }
    report["value_spread_per_mollifier"] = std::move(spreads);
    report["value_spread_across_mollifiers"] = cross;
  }

  if (const json* ja = find_key(params, "associate")) {
    check_keys(*ja, where + ".associate", {"mode", "tolerance"});
    std::string mode = str_or(*ja, where + ".associate", "mode", "trapezoid");
    if (mode != "trapezoid" && mode != "random_subsample")
      throw ConfigError("associate.mode: trapezoid or random_subsample");
    double tol = num_or(*ja, where + ".associate", "tolerance", 1e-3);
    report["association"] = qflab::associate_amplitude(
        sweep.records,
        mode == "trapezoid" ? qflab::SweepMode::trapezoid
                            : qflab::SweepMode::random_subsample,
        tol);
  }

  ctx.partial = sweep.partial;
  ctx.add("sweep.csv", "csv", qflab::amplitude_csv(sweep.records),
          sweep.partial);
  ctx.add("sweep.json", "json", qflab::dump_sorted(report), sweep.partial);
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// dyson: partial sums against the scattering operator over a coupling list.

int run_dyson(const json& params, RunContext& ctx) {
  const std::string where = "params";
  check_keys(params, where, {"model", "time", "orders", "couplings",
                             "margin"});
  const json* m = find_key(params, "model");
  if (!m) throw ConfigError("params: missing \"model\"");
  qflab::ModelParams base = parse_model(*m, where + ".model");
  double t = num_req(params, where, "time");
  std::vector<int> orders = {1, 2};
  if (const json* jo = find_key(params, "orders"))
    orders = int_list(*jo, where + ".orders");
  std::vector<double> couplings = {base.coupling, base.coupling / 2.0};
  if (const json* jc = find_key(params, "couplings"))
    couplings = num_list(*jc, where + ".couplings");
  int margin = int_or(params, where, "margin", base.n_max - 1);

  std::vector<std::vector<std::string>> rows;
  json jrows = json::array();
  // errors[k][i]: order k partial sum at coupling i
  std::vector<std::vector<double>> errors(orders.size());
  std::size_t cols = 0;
  for (double g : couplings) {
    qflab::ModelParams p = base;
    p.coupling = g;
    p.validate();
    qflab::HamiltonianBundle b = qflab::assemble_hamiltonian(p);
    cols = b.basis().safe_size(margin);
    Eigen::MatrixXcd ref =
        std::exp(std::complex<double>(0.0, (t - p.tau) * b.e_zp)) *
        qflab::s_matrix(p, b, t).matrix();
    for (std::size_t k = 0; k < orders.size(); ++k) {
      Eigen::MatrixXcd diff =
          qflab::dyson_series(p, b, t, orders[k]).matrix() - ref;
      double err =
          qflab::FieldOperator(b.basis(), std::move(diff)).max_abs(cols);
      errors[k].push_back(err);
      rows.push_back({qflab::fmt_g(g), std::to_string(orders[k]),
                      qflab::fmt_g(err)});
      jrows.push_back(
          json{{"coupling", g}, {"order", orders[k]}, {"error", err}});
    }
  }

  json ratios = json::array();
  for (std::size_t k = 0; k < orders.size(); ++k)
    for (std::size_t i = 0; i + 1 < couplings.size(); ++i) {
      double expected =
          std::pow(couplings[i] / couplings[i + 1], orders[k] + 1);
      ratios.push_back(json{{"order", orders[k]},
                            {"coupling_hi", couplings[i]},
                            {"coupling_lo", couplings[i + 1]},
                            {"ratio", errors[k][i] / errors[k][i + 1]},
                            {"expected", expected}});
    }

  json report{{"rows", jrows},
              {"ratios", ratios},
              {"measured_columns", cols},
              {"margin", margin},
              {"time", t}};
  ctx.add("dyson.json", "json", qflab::dump_sorted(report));
  ctx.add("dyson.csv", "csv",
          qflab::csv_table({"coupling", "order", "error"}, rows));
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// Dispatch.

int run_experiment(const std::string& config_path,
                   const std::string& out_override) {
  std::ifstream in(config_path);
  if (!in.good()) {
    std::fprintf(stderr, "error: cannot read config %s\n",
                 config_path.c_str());
    return kConfigExit;
  }
  RunContext ctx;
  try {
    json config = json::parse(in);
    check_keys(config, "config",
               {"experiment", "label", "seed", "out_dir", "params"});
    ctx.experiment = str_req(config, "config", "experiment");
    ctx.label = str_or(config, "config", "label", ctx.experiment);
    const json* js = find_key(config, "seed");
    if (js) {
      if (!js->is_number_unsigned())
        throw ConfigError("config: \"seed\" must be a non-negative integer");
      ctx.seed = js->get<std::uint64_t>();
    }
    ctx.config = config;
    std::string out = out_override.empty()
                          ? str_or(config, "config", "out_dir",
                                   "runs/" + ctx.label)
                          : out_override;
    ctx.out_dir = out;
    fs::create_directories(ctx.out_dir);

    const json* params = find_key(config, "params");
    json empty = json::object();
    const json& pj = params ? *params : empty;

    if (ctx.experiment == "average") return run_average(pj, ctx);
    if (ctx.experiment == "heaviside") return run_heaviside(pj, ctx);
    if (ctx.experiment == "ccr") return run_ccr(pj, ctx);
    if (ctx.experiment == "evolve") return run_evolve(pj, ctx);
    if (ctx.experiment == "smatrix") return run_smatrix(pj, ctx);
    if (ctx.experiment == "sweep") return run_sweep(pj, ctx);
    if (ctx.experiment == "dyson") return run_dyson(pj, ctx);
    throw ConfigError("unknown experiment \"" + ctx.experiment +
                      "\" (see list-experiments)");
  } catch (const qflab::budget_error& e) {
    std::fprintf(stderr, "numerical budget exceeded: %s\n", e.what());
  } catch (const qflab::step_size_error& e) {
    std::fprintf(stderr, "numerical budget exceeded: %s\n", e.what());
  } catch (const qflab::resolution_error& e) {
    std::fprintf(stderr, "numerical budget exceeded: %s\n", e.what());
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigExit;
  }

  // budget failures fall through here: keep whatever was produced, marked
  // incomplete, so the run can be inspected
  if (!ctx.out_dir.empty() && !ctx.experiment.empty()) {
    for (auto& a : ctx.artifacts) a.incomplete = true;
    ctx.partial = true;
    ctx.finish();
  }
  return kBudgetExit;
}

// ---------------------------------------------------------------------------
// report: tabulate a manifest and the scalar content of its JSON artifacts.

void print_json_summary(const json& j, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (v.is_number() || v.is_boolean() || v.is_string()) {
      std::printf("    %-42s %s\n", name.c_str(), v.dump().c_str());
    } else if (v.is_null()) {
      std::printf("    %-42s null\n", name.c_str());
    } else if (v.is_object() && prefix.empty()) {
      print_json_summary(v, name);
    } else if (v.is_array()) {
      std::printf("    %-42s [%zu entries]\n", name.c_str(), v.size());
    }
  }
}

int run_report(const std::string& manifest_path) {
  fs::path mp = manifest_path;
  if (fs::is_directory(mp)) mp /= "manifest.json";
  std::ifstream in(mp);
  if (!in.good()) {
    std::fprintf(stderr, "error: cannot read manifest %s\n",
                 mp.string().c_str());
    return kConfigExit;
  }
  json man;
  try {
    man = json::parse(in);
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: manifest does not parse: %s\n", e.what());
    return kConfigExit;
  }

  auto field = [&man](const char* key) -> std::string {
    auto it = man.find(key);
    if (it == man.end()) return "?";
    return it->is_string() ? it->get<std::string>() : it->dump();
  };
  std::printf("experiment   %s\n", field("experiment").c_str());
  std::printf("label        %s\n", field("label").c_str());
  std::printf("status       %s\n", field("status").c_str());
  std::printf("config hash  %s   seed %s\n", field("config_hash").c_str(),
              field("seed").c_str());
  std::printf("versions     %s\n", field("versions").c_str());
  std::printf("wall         %s s   written %s\n", field("wall_seconds").c_str(),
              field("written_at").c_str());

  auto arts = man.find("artifacts");
  if (arts == man.end() || !arts->is_array() || arts->empty()) {
    std::printf("no artifacts\n");
    return kOk;
  }
  std::printf("artifacts    %zu\n", arts->size());
  for (const auto& a : *arts) {
    std::string path = a.value("path", "?");
    std::printf("  %-6s %-24s %s%s\n", a.value("kind", "?").c_str(),
                path.c_str(), a.value("content_hash", "?").c_str(),
                a.value("incomplete", false) ? "  INCOMPLETE" : "");
  }
  for (const auto& a : *arts) {
    if (a.value("kind", "") != "json") continue;
    fs::path ap = mp.parent_path() / a.value("path", "");
    std::ifstream af(ap);
    if (!af.good()) {
      std::printf("  (missing %s)\n", ap.string().c_str());
      continue;
    }
    try {
      json j = json::parse(af);
      std::printf("  %s:\n", a.value("path", "").c_str());
      print_json_summary(j, "");
    } catch (const json::exception&) {
      std::printf("  (%s does not parse)\n", ap.string().c_str());
    }
  }
  return kOk;
}

int run_list() {
  std::printf(
      "average    ladder association of a scalar eps-family\n"
      "           families: abs_cos (power/powers), abs_cos_log, constant\n"
      "heaviside  jump-function power pairings across transition profiles\n"
      "           keys: profiles, eps, n1, n2, infinitesimal\n"
      "ccr        equal-time commutators, dispersion and translation\n"
      "           identities over a (j_max, n_max) grid\n"
      "evolve     Hamiltonian assembly, field equations at a grid node,\n"
      "           conjugation identity, Heisenberg derivative, optional\n"
      "           co-scaled residual curve (residual_rungs)\n"
      "smatrix    scattering operator: direct product vs ODE (dt, halving),\n"
      "           generator decomposition, resolvent approximants\n"
      "sweep      amplitude records over a refinement ladder (rungs) or a\n"
      "           fixed-grid eps_list; optional association\n"
      "dyson      perturbative partial sums against the scattering operator\n"
      "           over a coupling list\n"
      "\n"
      "common config keys: experiment, label, seed, out_dir, params\n"
      "model block: dim, box_length, j_max, mass, n_max, mollifier, eps\n"
      "             (0 = sharp), cutoff, coupling, power, tau, quad_points\n"
      "environment: QFLAB_THREADS caps sweep workers (default 1)\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"truncated Fock-space field laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_override, manifest_path;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "JSON experiment description")
      ->required();
  run->add_option("--out", out_override,
                  "artifact directory (overrides config out_dir)");
  CLI::App* rep = app.add_subcommand("report", "summarize a run manifest");
  rep->add_option("manifest", manifest_path,
                  "manifest.json or its directory")
      ->required();
  app.add_subcommand("list-experiments", "print the experiment kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  if (run->parsed()) return run_experiment(config_path, out_override);
  if (rep->parsed()) return run_report(manifest_path);
  return run_list();
}
