// SPDX-License-Identifier: MIT
//
// mfk: command-line front end for the exact matrix-factorization calculus.
// Subcommands exchange the JSON factorization / morphism / Clifford-module
// schemas through files, so pipelines compose by feeding one command's
// output to the next.  Exit codes: 0 success, 1 domain error (machine-
// readable JSON on stderr), 2 usage error.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfk/clifford.hpp"
#include "mfk/homotopy.hpp"
#include "mfk/knoerrer.hpp"
#include "mfk/mf.hpp"
#include "mfk/milnor.hpp"
#include "mfk/theta.hpp"

namespace {

using nlohmann::json;
using namespace mfk;

/// Invocation-shape problems discovered after flag parsing (mutually
/// exclusive flag groups, malformed flag values).  Reported like CLI11
/// parse errors with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Resolved run configuration, echoed into every report
// ---------------------------------------------------------------------------

struct Config {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::string mode;  ///< resolved scalar mode; empty when not applicable
  std::string format = "text";
  std::optional<long> degree_bound;  ///< resolved ansatz-degree override
  std::optional<long> window_cap;    ///< resolved scan-window override
  unsigned threads = 1;
};

json config_json(const Config& c) {
  json j;
  j["subcommand"] = c.subcommand;
  j["inputs"] = c.inputs;
  j["mode"] = c.mode.empty() ? json() : json(c.mode);
  j["format"] = c.format;
  j["degree_bound"] = c.degree_bound ? json(*c.degree_bound) : json();
  j["window_cap"] = c.window_cap ? json(*c.window_cap) : json();
  j["threads"] = c.threads;
  return j;
}

std::string config_line(const Config& c) {
  std::ostringstream os;
  os << "config: subcommand=" << c.subcommand;
  os << " inputs=";
  for (size_t i = 0; i < c.inputs.size(); ++i)
    os << (i ? "," : "") << c.inputs[i];
  if (c.inputs.empty()) os << "-";
  if (!c.mode.empty()) os << " mode=" << c.mode;
  os << " format=" << c.format;
  os << " degree_bound="
     << (c.degree_bound ? std::to_string(*c.degree_bound) : "default");
  os << " window_cap="
     << (c.window_cap ? std::to_string(*c.window_cap) : "default");
  os << " threads=" << c.threads;
  return os.str();
}

/// Prints the payload: JSON mode embeds the resolved config into the object
/// (loaders ignore unknown keys, so factorization outputs stay valid inputs
/// for every other subcommand); text mode runs the renderer and appends one
/// config line.
void emit(const Config& cfg, json payload,
          const std::function<void(std::ostream&)>& text) {
  if (cfg.format == "json") {
    payload["config"] = config_json(cfg);
    std::cout << payload.dump(2) << "\n";
  } else {
    text(std::cout);
    std::cout << config_line(cfg) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Input loading and scalar-mode dispatch
// ---------------------------------------------------------------------------

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MfkError("io_error", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw MfkError("bad_json", path + ": " + e.what());
  }
  if (!j.is_object())
    throw MfkError("bad_json", path + ": top-level value must be an object");
  return j;
}

std::string mode_of(const json& j) {
  if (j.contains("mode") && j["mode"].is_string())
    return j["mode"].get<std::string>();
  if (j.contains("source") && j["source"].is_object() &&
      j["source"].contains("mode") && j["source"]["mode"].is_string())
    return j["source"]["mode"].get<std::string>();
  throw MfkError("bad_json", "cannot determine the scalar mode of the input");
}

template <class F>
void with_mode(const std::string& mode, F&& f) {
  if (mode == "rational")
    f(std::type_identity<Rational>{});
  else if (mode == "gaussian")
    f(std::type_identity<GaussianRational>{});
  else
    throw MfkError("bad_json", "unknown scalar mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// Flag-value parsing
// ---------------------------------------------------------------------------

long parse_long(const std::string& s, const char* what) {
  try {
    size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string(what) + ": '" + s + "' is not an integer");
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::vector<long> parse_longs_csv(const std::string& s, const char* what) {
  std::vector<long> out;
  for (const std::string& tok : split_csv(s)) out.push_back(parse_long(tok, what));
  return out;
}

/// Parses one diagonal-form coefficient: an integer or a fraction (the
/// polynomial grammar with no variables in scope).
Rational parse_rational(const std::string& tok) {
  Poly<Rational> p;
  try {
    p = parse_poly<Rational>(tok, {});
  } catch (const MfkError& e) {
    throw UsageError("--form: '" + tok + "': " + e.what());
  }
  if (p.is_zero()) return Rational(0);
  return p.terms().begin()->second;
}

/// Variable names in order of first appearance in a polynomial expression;
/// 'i' is the imaginary constant in gaussian mode, never a variable.
std::vector<std::string> infer_vars(const std::string& text, bool gaussian) {
  std::vector<std::string> vars;
  auto is_head = [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  };
  auto is_tail = [&](char c) {
    return is_head(c) || std::isdigit(static_cast<unsigned char>(c));
  };
  for (size_t i = 0; i < text.size();) {
    if (!is_head(text[i])) {
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < text.size() && is_tail(text[j])) ++j;
    std::string name = text.substr(i, j - i);
    i = j;
    if (gaussian && name == "i") continue;
    if (std::find(vars.begin(), vars.end(), name) == vars.end())
      vars.push_back(name);
  }
  return vars;
}

/// Global scan/ansatz override: flag wins over MFK_DEGREE_BOUND, which wins
/// over the per-command default.
std::optional<long> resolve_bound(const std::optional<long>& flag) {
  if (flag) return flag;
  const char* env = std::getenv("MFK_DEGREE_BOUND");
  if (!env || !*env) return std::nullopt;
  try {
    size_t used = 0;
    long v = std::stol(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw MfkError("bad_env",
                   "MFK_DEGREE_BOUND is set to a non-integer value");
  }
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

json summary_json(const FactorizationSummary& s) {
  return {{"rank1", s.rank1},
          {"rank0", s.rank0},
          {"variables", s.variables},
          {"graded", s.graded}};
}

template <class K>
void mf_text(const MatrixFactorization<K>& p, std::ostream& os) {
  os << "matrix factorization\n";
  os << "  mode:   " << scalar_traits<K>::mode_name() << "\n";
  os << "  f:      " << print_poly(p.f, p.vars) << "\n";
  os << "  vars:   ";
  for (size_t i = 0; i < p.vars.size(); ++i) os << (i ? ", " : "") << p.vars[i];
  os << "\n";
  os << "  rank1:  " << p.rank1() << "\n";
  os << "  rank0:  " << p.rank0() << "\n";
  os << "  graded: " << (p.grading ? "yes" : "no") << "\n";
}

json class_json(const AbsClass& c) {
  return {{"torsion_orders", c.torsion_orders},
          {"torsion_coords", c.torsion_coords},
          {"free_rank", c.free_rank},
          {"free_coords", c.free_coords},
          {"zero", c.is_zero()}};
}

std::string group_text(const AbsClass& c) {
  std::ostringstream os;
  bool first = true;
  for (long long d : c.torsion_orders) {
    os << (first ? "" : " + ") << "Z/" << d;
    first = false;
  }
  if (c.free_rank > 0) {
    os << (first ? "" : " + ") << "Z";
    if (c.free_rank > 1) os << "^" << c.free_rank;
    first = false;
  }
  if (first) os << "0";
  return os.str();
}

std::string class_text(const AbsClass& c) {
  std::ostringstream os;
  os << "torsion [";
  for (size_t i = 0; i < c.torsion_coords.size(); ++i)
    os << (i ? ", " : "") << c.torsion_coords[i] << " mod "
       << c.torsion_orders[i];
  os << "] free [";
  for (size_t i = 0; i < c.free_coords.size(); ++i)
    os << (i ? ", " : "") << c.free_coords[i];
  os << "]";
  return os.str();
}

json homology_json(const HomologyResult& h) {
  json slices = json::array();
  for (const HomologySliceRow& r : h.slices)
    slices.push_back({{"t", r.t},
                      {"dim_even", r.dim_even},
                      {"dim_odd", r.dim_odd},
                      {"rank_even", r.rank_even},
                      {"rank_odd", r.rank_odd},
                      {"h0", r.h0},
                      {"h1", r.h1}});
  return {{"h0", h.h0_total},
          {"h1", h.h1_total},
          {"complete", h.complete},
          {"margin", h.margin},
          {"engine", h.engine_summary},
          {"slices", std::move(slices)}};
}

template <class K>
json matrix_json(const DenseMatrix<Poly<K>>& m,
                 const std::vector<std::string>& vars) {
  json rows = json::array();
  for (size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (size_t j = 0; j < m.cols(); ++j)
      row.push_back(print_poly(m.at(i, j), vars));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class K>
json homotopy_json(const Homotopy<K>& h, const std::vector<std::string>& vars) {
  return {{"u", matrix_json(h.u, vars)}, {"v", matrix_json(h.v, vars)}};
}

json theta_json(const ThetaReport& r) {
  json slices = json::array();
  for (const ThetaSliceRow& s : r.slices)
    slices.push_back({{"degree", s.degree},
                      {"h1", s.h1},
                      {"h2", s.h2},
                      {"h3", s.h3},
                      {"h4", s.h4}});
  return {{"theta", r.theta},
          {"tor1", r.tor1},
          {"tor2", r.tor2},
          {"periodic_1_3", r.periodic_1_3},
          {"periodic_2_4", r.periodic_2_4},
          {"valid", r.valid},
          {"scan_min", r.scan_min},
          {"scan_max", r.scan_max},
          {"slices", std::move(slices)}};
}

json knoerrer_report_json(const KnoerrerReport& r) {
  return {{"input", summary_json(r.input)},
          {"output", summary_json(r.output)},
          {"rank_multiplier", r.rank_multiplier},
          {"output_valid", r.output_valid},
          {"grading_dropped", r.grading_dropped},
          {"note", r.note}};
}

json periodicity_json(const PeriodicityReport& r) {
  return {{"mode", r.mode},
          {"input_generators", r.input_generators},
          {"output_generators", r.output_generators},
          {"input_class", class_json(r.input_class)},
          {"output_class", class_json(r.output_class)},
          {"pairing_class", class_json(r.pairing_class)},
          {"conclusive", r.conclusive},
          {"commutes", r.commutes},
          {"note", r.note}};
}

json endo_json(const EndomorphismVerification& v) {
  json checks = json::array();
  for (const EndomorphismCheck& c : v.checks)
    checks.push_back({{"name", c.name},
                      {"h0", c.h0},
                      {"h1", c.h1},
                      {"expected_h0", c.expected_h0},
                      {"expected_h1", c.expected_h1},
                      {"complete", c.complete}});
  return {{"passed", v.passed}, {"checks", std::move(checks)}};
}

json milnor_json(const MilnorReport& r) {
  json dims = json::array();
  for (const auto& [deg, dim] : r.degree_dims) dims.push_back({deg, dim});
  return {{"isolated", r.isolated},
          {"milnor_number", r.milnor_number},
          {"degree_dims", std::move(dims)}};
}

// ---------------------------------------------------------------------------
// Common state shared by the subcommand handlers
// ---------------------------------------------------------------------------

struct CommandState {
  Config cfg;
  std::vector<std::string> inputs;
  std::optional<long> bound_flag;   ///< --degree-bound / --max-* value
  bool skip_exterior = false;       ///< verify-x8
  bool positive_form = false;       ///< knorrer-real8
  std::string f_text;               ///< stabilize / milnor
  std::string vars_csv;             ///< stabilize / milnor
  std::string weights_csv;          ///< stabilize / milnor
  long degree = 0;                  ///< stabilize / milnor
  bool degree_set = false;
  std::vector<std::string> cofactors;  ///< stabilize
  std::string form_csv;             ///< clifford-classify
  std::string mode_flag = "rational";  ///< stabilize / milnor
  long max_candidates = 0;          ///< equiv (0 = library default)
};

void add_common_flags(CLI::App* sc, CommandState& st) {
  sc->add_option("--format", st.cfg.format, "output format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();
  sc->add_option("--threads", st.cfg.threads,
                 "parallelism degree (results never depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void require_inputs(const CommandState& st, size_t lo, size_t hi) {
  if (st.inputs.size() < lo || st.inputs.size() > hi)
    throw UsageError("expected " + std::to_string(lo) +
                     (hi > lo ? ".." + std::to_string(hi) : "") +
                     " input file(s), got " + std::to_string(st.inputs.size()));
}

template <class K>
MatrixFactorization<K> load_mf(const json& j) {
  MatrixFactorization<K> p = mf_from_json<K>(j);
  ValidationReport rep = validate(p);
  if (!rep.valid) throw MfkError("invalid_factorization", rep.message);
  return p;
}

template <class K>
MFMorphism<K> load_morphism(const json& j) {
  MFMorphism<K> a = morphism_from_json<K>(j);
  ValidationReport rs = validate(a.source);
  if (!rs.valid)
    throw MfkError("invalid_factorization", "source: " + rs.message);
  ValidationReport rt = validate(a.target);
  if (!rt.valid)
    throw MfkError("invalid_factorization", "target: " + rt.message);
  ValidationReport rep = validate(a);
  if (!rep.valid) throw MfkError("invalid_morphism", rep.message);
  return a;
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

void run_validate(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  const std::string kind = j.contains("alpha1")  ? "morphism"
                           : j.contains("rho") ? "clifford_module"
                                               : "factorization";
  json payload;
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    if (kind == "factorization") {
      MatrixFactorization<K> p = load_mf<K>(j);
      payload = {{"valid", true},
                 {"kind", kind},
                 {"rank1", p.rank1()},
                 {"rank0", p.rank0()},
                 {"variables", p.nvars()},
                 {"graded", p.grading.has_value()}};
    } else if (kind == "morphism") {
      MFMorphism<K> a = load_morphism<K>(j);
      payload = {{"valid", true},
                 {"kind", kind},
                 {"source_rank1", a.source.rank1()},
                 {"target_rank1", a.target.rank1()},
                 {"graded", morphism_is_graded(a)}};
    } else {
      auto [m, q] = module_from_json<K>(j);
      validate(m, q);
      payload = {{"valid", true},
                 {"kind", kind},
                 {"n", q.n()},
                 {"m1", m.m1},
                 {"m0", m.m0}};
    }
  });
  emit(st.cfg, payload, [&](std::ostream& os) {
    os << "valid\n" << "kind: " << kind << "\n";
  });
}

/// Shared tail for every handler whose result is one factorization.
template <class K>
void emit_mf(CommandState& st, const MatrixFactorization<K>& result,
             json extra = json::object()) {
  json payload = mf_to_json(result);
  for (auto& [k, v] : extra.items()) payload[k] = v;
  emit(st.cfg, std::move(payload), [&](std::ostream& os) {
    mf_text(result, os);
    if (extra.contains("report")) {
      const json& r = extra["report"];
      os << "  rank multiplier: " << r["rank_multiplier"] << "\n";
      os << "  grading dropped: "
         << (r["grading_dropped"].get<bool>() ? "yes" : "no") << "\n";
      if (!r["note"].get<std::string>().empty())
        os << "  note: " << r["note"].get<std::string>() << "\n";
    }
  });
}

void run_unop(CommandState& st, const std::string& which) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MatrixFactorization<K> p = load_mf<K>(j);
    MatrixFactorization<K> r;
    json extra = json::object();
    if (which == "shift") {
      r = shift(p);
    } else if (which == "strip") {
      r = strip_trivial_summands(p);
    } else if (which == "knorrer") {
      r = knorrer_complex(p);
      extra["report"] = knoerrer_report_json(describe_knoerrer(p, r));
    } else {
      r = knorrer_real8(p, st.positive_form);
      extra["report"] = knoerrer_report_json(describe_knoerrer(p, r));
    }
    emit_mf(st, r, std::move(extra));
  });
}

void run_binop(CommandState& st, const std::string& which) {
  require_inputs(st, 2, 2);
  json j1 = load_json(st.inputs[0]);
  json j2 = load_json(st.inputs[1]);
  st.cfg.mode = mode_of(j1);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MatrixFactorization<K> p = load_mf<K>(j1);
    MatrixFactorization<K> q = load_mf<K>(j2);
    MatrixFactorization<K> r =
        which == "sum" ? direct_sum(p, q) : tensor_product(p, q);
    emit_mf(st, r);
  });
}

void run_cone(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    emit_mf(st, cone(load_morphism<K>(j)));
  });
}

void run_stabilize(CommandState& st) {
  if (st.f_text.empty()) throw UsageError("stabilize requires --f");
  st.cfg.mode = st.mode_flag;
  const bool have_ws = !st.weights_csv.empty() || st.degree_set;
  if (!st.weights_csv.empty() != st.degree_set)
    throw UsageError("--weights and --degree must be given together");
  if (!have_ws && st.cofactors.empty())
    throw UsageError(
        "stabilize needs --weights/--degree (quasi-homogeneous splitting) "
        "or an explicit --cofactor list");
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    std::vector<std::string> vars =
        st.vars_csv.empty()
            ? infer_vars(st.f_text, scalar_traits<K>::is_gaussian)
            : split_csv(st.vars_csv);
    if (vars.empty()) throw UsageError("no variables found; pass --vars");
    Poly<K> f = parse_poly<K>(st.f_text, vars);
    std::optional<WeightSystem> ws;
    if (have_ws) {
      WeightSystem w;
      w.weights = parse_longs_csv(st.weights_csv, "--weights");
      w.degree = st.degree;
      if (w.weights.size() != vars.size())
        throw MfkError("dimension_mismatch",
                       "need one weight per variable (" +
                           std::to_string(vars.size()) + " variables)");
      ws = w;
    }
    std::vector<Poly<K>> gs;
    if (!st.cofactors.empty()) {
      for (const std::string& g : st.cofactors)
        gs.push_back(parse_poly<K>(g, vars));
    } else {
      gs = euler_decomposition(f, *ws);
    }
    KoszulResult<K> res = koszul_stabilization(vars, f, gs, ws);
    emit_mf(st, res.mf);
  });
}

void run_homology(CommandState& st) {
  require_inputs(st, 1, 2);
  json j1 = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j1);
  st.cfg.window_cap = resolve_bound(st.bound_flag);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MatrixFactorization<K> p = load_mf<K>(j1);
    MatrixFactorization<K> q =
        st.inputs.size() == 2 ? load_mf<K>(load_json(st.inputs[1])) : p;
    HomOptions opts;
    if (st.cfg.window_cap) opts.max_slices = size_t(*st.cfg.window_cap);
    HomologyResult h = hom_homology_dims(p, q, opts);
    emit(st.cfg, homology_json(h), [&](std::ostream& os) {
      os << "h0 = " << h.h0_total << "\n";
      os << "h1 = " << h.h1_total << "\n";
      os << "complete: " << (h.complete ? "yes" : "no") << "\n";
      os << "engine: " << h.engine_summary << "\n";
      if (!h.slices.empty()) {
        os << std::setw(8) << "t" << std::setw(10) << "dim_even"
           << std::setw(10) << "dim_odd" << std::setw(6) << "h0"
           << std::setw(6) << "h1" << "\n";
        for (const HomologySliceRow& r : h.slices)
          os << std::setw(8) << r.t << std::setw(10) << r.dim_even
             << std::setw(10) << r.dim_odd << std::setw(6) << r.h0
             << std::setw(6) << r.h1 << "\n";
      }
    });
  });
}

void run_null_homotopy(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  st.cfg.degree_bound = resolve_bound(st.bound_flag);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MFMorphism<K> a = load_morphism<K>(j);
    NullHomotopyOptions opts;
    opts.degree_bound = st.cfg.degree_bound;
    NullHomotopyOutcome<K> out = find_null_homotopy(a, opts);
    json payload = {{"found", out.found}, {"conclusive", out.conclusive}};
    if (out.homotopy)
      payload["homotopy"] = homotopy_json(*out.homotopy, a.source.vars);
    emit(st.cfg, std::move(payload), [&](std::ostream& os) {
      os << "null-homotopic: " << (out.found ? "yes" : "no") << "\n";
      os << "conclusive: " << (out.conclusive ? "yes" : "no") << "\n";
    });
  });
}

void run_equiv(CommandState& st) {
  require_inputs(st, 2, 2);
  json j1 = load_json(st.inputs[0]);
  json j2 = load_json(st.inputs[1]);
  st.cfg.mode = mode_of(j1);
  st.cfg.degree_bound = resolve_bound(st.bound_flag);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MatrixFactorization<K> p = load_mf<K>(j1);
    MatrixFactorization<K> q = load_mf<K>(j2);
    EquivOptions opts;
    opts.degree_bound = st.cfg.degree_bound;
    if (st.max_candidates > 0) opts.max_candidates = size_t(st.max_candidates);
    EquivalenceResult<K> res = find_homotopy_equivalence(p, q, opts);
    json payload = {{"equivalent", res.equivalent},
                    {"conclusive", res.conclusive},
                    {"detail", res.detail}};
    if (res.forward) payload["forward"] = morphism_to_json(*res.forward);
    if (res.backward) payload["backward"] = morphism_to_json(*res.backward);
    if (res.h_source)
      payload["homotopy_source"] = homotopy_json(*res.h_source, p.vars);
    if (res.h_target)
      payload["homotopy_target"] = homotopy_json(*res.h_target, p.vars);
    emit(st.cfg, std::move(payload), [&](std::ostream& os) {
      os << "equivalent: " << (res.equivalent ? "yes" : "no") << "\n";
      os << "conclusive: " << (res.conclusive ? "yes" : "no") << "\n";
      if (!res.detail.empty()) os << "detail: " << res.detail << "\n";
    });
  });
}

void run_classify(CommandState& st) {
  if (st.form_csv.empty()) throw UsageError("clifford-classify requires --form");
  st.cfg.mode = "rational";
  DiagonalForm<Rational> q;
  for (const std::string& tok : split_csv(st.form_csv))
    q.coefficients.push_back(parse_rational(tok));
  CliffordClassification cls = classify(q);
  const char* base = cls.base == CliffordBase::R   ? "R"
                     : cls.base == CliffordBase::C ? "C"
                                                   : "H";
  json payload = {{"base", base},
                  {"matrix_size", cls.matrix_size},
                  {"twofold", cls.twofold},
                  {"text", cls.text()}};
  emit(st.cfg, std::move(payload),
       [&](std::ostream& os) { os << cls.text() << "\n"; });
}

void run_beh(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    auto [m, q] = module_from_json<K>(j);
    emit_mf(st, beh_theta(m, q));
  });
}

void run_abs_class(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    auto [m, q] = module_from_json<K>(j);
    (void)q;  // the class group fixes its own (negative definite) form
    AbsClass cls = abs_class(m);
    json payload = class_json(cls);
    payload["n"] = m.n();
    payload["group"] = group_text(cls);
    emit(st.cfg, std::move(payload), [&](std::ostream& os) {
      os << "group: " << group_text(cls) << "\n";
      os << "class: " << class_text(cls) << "\n";
      os << "zero: " << (cls.is_zero() ? "yes" : "no") << "\n";
    });
  });
}

void run_verify_x8(CommandState& st) {
  st.cfg.mode = "rational";
  st.cfg.window_cap = resolve_bound(st.bound_flag);
  X8VerifyOptions opts;
  opts.include_exterior_check = !st.skip_exterior;
  if (st.cfg.window_cap) opts.hom.max_slices = size_t(*st.cfg.window_cap);
  EndomorphismVerification v = verify_x8_endomorphisms(opts);
  emit(st.cfg, endo_json(v), [&](std::ostream& os) {
    for (const EndomorphismCheck& c : v.checks)
      os << c.name << ": (" << c.h0 << ", " << c.h1 << ") expected ("
         << c.expected_h0 << ", " << c.expected_h1 << ")"
         << (c.complete ? "" : " [incomplete]") << "\n";
    os << "passed: " << (v.passed ? "yes" : "no") << "\n";
  });
}

void run_verify_periodicity(CommandState& st) {
  require_inputs(st, 1, 1);
  json j = load_json(st.inputs[0]);
  st.cfg.mode = mode_of(j);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    auto [m, q] = module_from_json<K>(j);
    PeriodicityReport r = verify_periodicity_diagram_quadratic(m, q);
    emit(st.cfg, periodicity_json(r), [&](std::ostream& os) {
      os << "mode: " << r.mode << "\n";
      os << "generators: " << r.input_generators << " -> "
         << r.output_generators << "\n";
      os << "input class:   " << class_text(r.input_class) << "\n";
      os << "output class:  " << class_text(r.output_class) << "\n";
      os << "pairing class: " << class_text(r.pairing_class) << "\n";
      os << "conclusive: " << (r.conclusive ? "yes" : "no") << "\n";
      os << "commutes: " << (r.commutes ? "yes" : "no") << "\n";
      if (!r.note.empty()) os << "note: " << r.note << "\n";
    });
  });
}

void run_theta(CommandState& st) {
  require_inputs(st, 2, 2);
  json j1 = load_json(st.inputs[0]);
  json j2 = load_json(st.inputs[1]);
  st.cfg.mode = mode_of(j1);
  st.cfg.window_cap = resolve_bound(st.bound_flag);
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    MatrixFactorization<K> p = load_mf<K>(j1);
    MatrixFactorization<K> q = load_mf<K>(j2);
    ThetaOptions opts;
    if (st.cfg.window_cap) opts.max_degrees = *st.cfg.window_cap;
    ThetaReport r = theta(p, q, opts);
    emit(st.cfg, theta_json(r), [&](std::ostream& os) {
      os << "theta = " << r.theta << "\n";
      os << "tor1 = " << r.tor1 << ", tor2 = " << r.tor2 << "\n";
      os << "valid: " << (r.valid ? "yes" : "no") << "\n";
      os << "scanned degrees " << r.scan_min << ".." << r.scan_max << "\n";
      if (!r.slices.empty()) {
        os << std::setw(8) << "degree" << std::setw(6) << "h1" << std::setw(6)
           << "h2" << std::setw(6) << "h3" << std::setw(6) << "h4" << "\n";
        for (const ThetaSliceRow& s : r.slices)
          os << std::setw(8) << s.degree << std::setw(6) << s.h1
             << std::setw(6) << s.h2 << std::setw(6) << s.h3 << std::setw(6)
             << s.h4 << "\n";
      }
    });
  });
}

void run_milnor(CommandState& st) {
  if (st.f_text.empty()) throw UsageError("milnor requires --f");
  if (st.weights_csv.empty() || !st.degree_set)
    throw UsageError("milnor requires --weights and --degree");
  st.cfg.mode = st.mode_flag;
  with_mode(st.cfg.mode, [&](auto tag) {
    using K = typename decltype(tag)::type;
    std::vector<std::string> vars =
        st.vars_csv.empty()
            ? infer_vars(st.f_text, scalar_traits<K>::is_gaussian)
            : split_csv(st.vars_csv);
    if (vars.empty()) throw UsageError("no variables found; pass --vars");
    WeightSystem ws;
    ws.weights = parse_longs_csv(st.weights_csv, "--weights");
    ws.degree = st.degree;
    if (ws.weights.size() != vars.size())
      throw MfkError("dimension_mismatch",
                     "need one weight per variable (" +
                         std::to_string(vars.size()) + " variables)");
    Poly<K> f = parse_poly<K>(st.f_text, vars);
    MilnorReport r = milnor_number(f, ws);
    emit(st.cfg, milnor_json(r), [&](std::ostream& os) {
      if (r.isolated)
        os << r.milnor_number << "\n";
      else
        os << "not isolated\n";
      for (const auto& [deg, dim] : r.degree_dims)
        os << "  degree " << deg << ": " << dim << "\n";
    });
  });
}

// ---------------------------------------------------------------------------
// Command registration
// ---------------------------------------------------------------------------

struct Registered {
  std::shared_ptr<CommandState> state;
};

std::shared_ptr<CommandState> add_command(
    CLI::App& app, const std::string& name, const std::string& help,
    int min_inputs, int max_inputs,
    std::function<void(CommandState&)> handler) {
  auto st = std::make_shared<CommandState>();
  st->cfg.subcommand = name;
  CLI::App* sc = app.add_subcommand(name, help);
  if (max_inputs > 0) {
    sc->add_option("inputs", st->inputs, "input JSON file(s)")
        ->expected(min_inputs, max_inputs);
  }
  add_common_flags(sc, *st);
  sc->callback([st, handler]() {
    st->cfg.inputs = st->inputs;
    handler(*st);
  });
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "exact calculus of matrix factorizations: triangulated operations, "
      "Clifford-module classification, stabilization functors, and the "
      "intersection pairing"};
  app.require_subcommand(1);

  std::vector<std::shared_ptr<CommandState>> keep;

  keep.push_back(add_command(
      app, "validate",
      "check a factorization, morphism, or Clifford-module JSON file", 1, 1,
      run_validate));
  keep.push_back(add_command(app, "shift",
                             "suspension: swap the two halves", 1, 1,
                             [](CommandState& s) { run_unop(s, "shift"); }));
  keep.push_back(add_command(app, "cone",
                             "mapping cone of a morphism JSON file", 1, 1,
                             run_cone));
  keep.push_back(add_command(app, "sum",
                             "direct sum of two factorizations", 2, 2,
                             [](CommandState& s) { run_binop(s, "sum"); }));
  keep.push_back(add_command(
      app, "tensor",
      "tensor product: factorizations of f and g give one of f+g", 2, 2,
      [](CommandState& s) { run_binop(s, "tensor"); }));

  {
    auto st = add_command(
        app, "stabilize",
        "Koszul stabilization of f from a splitting f = sum g_i * x_i", 0, 0,
        run_stabilize);
    CLI::App* sc = app.get_subcommand("stabilize");
    sc->add_option("--f", st->f_text, "potential (polynomial expression)");
    sc->add_option("--vars", st->vars_csv,
                   "comma-separated variables (default: inferred from --f)");
    sc->add_option("--weights", st->weights_csv,
                   "comma-separated positive weights, one per variable");
    sc->add_option("--degree", st->degree, "weighted degree of the potential")
        ->each([st](const std::string&) { st->degree_set = true; });
    sc->add_option("--cofactor", st->cofactors,
                   "explicit cofactor g_i (repeat once per variable)");
    sc->add_option("--mode", st->mode_flag, "scalar mode")
        ->check(CLI::IsMember({"rational", "gaussian"}))
        ->capture_default_str();
    keep.push_back(st);
  }

  keep.push_back(add_command(app, "strip",
                             "remove trivial direct summands", 1, 1,
                             [](CommandState& s) { run_unop(s, "strip"); }));

  {
    auto st = add_command(app, "homology",
                          "graded homology of Hom(P, Q); one file means "
                          "endomorphisms of P",
                          1, 2, run_homology);
    app.get_subcommand("homology")
        ->add_option("--max-slices", st->bound_flag,
                     "cap on scanned degree slices (default 256; "
                     "MFK_DEGREE_BOUND overrides)");
    keep.push_back(st);
  }
  {
    auto st = add_command(app, "null-homotopy",
                          "search for a verified null-homotopy of a morphism",
                          1, 1, run_null_homotopy);
    app.get_subcommand("null-homotopy")
        ->add_option("--degree-bound", st->bound_flag,
                     "pin the ansatz degree bound (MFK_DEGREE_BOUND "
                     "overrides the default)");
    keep.push_back(st);
  }
  {
    auto st = add_command(app, "equiv",
                          "search for a verified homotopy equivalence", 2, 2,
                          run_equiv);
    CLI::App* sc = app.get_subcommand("equiv");
    sc->add_option("--degree-bound", st->bound_flag,
                   "pin the ansatz degree bound");
    sc->add_option("--max-candidates", st->max_candidates,
                   "cap on tried candidate morphisms");
    keep.push_back(st);
  }

  {
    auto st = add_command(
        app, "clifford-classify",
        "algebra type of the Clifford algebra of a diagonal form", 0, 0,
        run_classify);
    app.get_subcommand("clifford-classify")
        ->add_option("--form", st->form_csv,
                     "comma-separated +1/-1 coefficients");
    keep.push_back(st);
  }
  keep.push_back(add_command(
      app, "beh",
      "factorization of the form's quadric from a graded Clifford module", 1,
      1, run_beh));
  keep.push_back(add_command(
      app, "abs-class",
      "class of a graded Clifford module in the restriction-quotient group",
      1, 1, run_abs_class));

  keep.push_back(add_command(app, "knorrer",
                             "two-variable stabilization (gaussian mode): "
                             "tensor with the fixed rank-one factor of "
                             "u^2 + v^2",
                             1, 1,
                             [](CommandState& s) { run_unop(s, "knorrer"); }));
  {
    auto st = add_command(app, "knorrer-real8",
                          "eight-variable stabilization (rational mode): "
                          "tensor with the sixteen-generator column factor",
                          1, 1,
                          [](CommandState& s) { run_unop(s, "knorrer-real8"); });
    app.get_subcommand("knorrer-real8")
        ->add_flag("--positive-form", st->positive_form,
                   "stabilize by +(u1^2+...+u8^2) instead of the negative "
                   "definite form");
    keep.push_back(st);
  }

  {
    auto st = add_command(app, "verify-x8",
                          "certify the endomorphism homology behind the "
                          "stabilization functors",
                          0, 0, run_verify_x8);
    CLI::App* sc = app.get_subcommand("verify-x8");
    sc->add_flag("--skip-exterior", st->skip_exterior,
                 "skip the heavyweight eight-variable exterior scan");
    sc->add_option("--max-slices", st->bound_flag,
                   "cap on scanned degree slices per check");
    keep.push_back(st);
  }
  keep.push_back(add_command(
      app, "verify-periodicity",
      "check that stabilization commutes with the module-level pairing on "
      "the class groups",
      1, 1, run_verify_periodicity));

  {
    auto st = add_command(app, "theta",
                          "intersection pairing of two graded factorizations "
                          "of one isolated potential",
                          2, 2, run_theta);
    app.get_subcommand("theta")
        ->add_option("--max-degrees", st->bound_flag,
                     "cap on scanned degrees (default 200; MFK_DEGREE_BOUND "
                     "overrides)");
    keep.push_back(st);
  }

  {
    auto st = add_command(app, "milnor",
                          "Milnor number of a quasi-homogeneous polynomial",
                          0, 0, run_milnor);
    CLI::App* sc = app.get_subcommand("milnor");
    sc->add_option("--f", st->f_text, "polynomial expression");
    sc->add_option("--vars", st->vars_csv,
                   "comma-separated variables (default: inferred from --f)");
    sc->add_option("--weights", st->weights_csv,
                   "comma-separated positive weights, one per variable");
    sc->add_option("--degree", st->degree, "weighted degree of the potential")
        ->each([st](const std::string&) { st->degree_set = true; });
    sc->add_option("--mode", st->mode_flag, "scalar mode")
        ->check(CLI::IsMember({"rational", "gaussian"}))
        ->capture_default_str();
    keep.push_back(st);
  }

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err = {{"error", "usage"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const UsageError& e) {
    json err = {{"error", "usage"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const MfkError& e) {
    json err = {{"error", e.code()}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err = {{"error", "internal_error"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
