// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/run.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "perfhom/lab.hpp"
#include "perfhom/rng.hpp"
#include "perfhom/spectral.hpp"

namespace perfhom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kVersion = "perfhom 0.1.0";
}

Complex parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty())
    throw_error(Error::Code::Validation, "empty complex literal");

  // forms: "a", "bi", "a+bi", "a-bi" with a, b decimal literals
  auto parse_num = [](const std::string& t, size_t& pos) -> double {
    size_t used = 0;
    double v;
    try {
      v = std::stod(t.substr(pos), &used);
    } catch (...) {
      throw_error(Error::Code::Validation, "bad complex literal: " + t);
    }
    pos += used;
    return v;
  };

  size_t pos = 0;
  double first = 0.0;
  bool first_is_imag = false;
  if (s[pos] == 'i' || s[pos] == 'I') {
    first = 1.0;
    first_is_imag = true;
    ++pos;
  } else {
    first = parse_num(s, pos);
    if (pos < s.size() && (s[pos] == 'i' || s[pos] == 'I')) {
      first_is_imag = true;
      ++pos;
    }
  }
  if (pos == s.size())
    return first_is_imag ? Complex(0.0, first) : Complex(first, 0.0);
  if (first_is_imag)
    throw_error(Error::Code::Validation,
                "ambiguous complex literal (imaginary part first): " + text);
  if (s[pos] != '+' && s[pos] != '-')
    throw_error(Error::Code::Validation, "bad complex literal: " + text);

  double second;
  if ((s[pos] == '+' || s[pos] == '-') && pos + 1 < s.size() &&
      (s[pos + 1] == 'i' || s[pos + 1] == 'I')) {
    second = (s[pos] == '-') ? -1.0 : 1.0;  // bare "+i" / "-i"
    pos += 2;
    if (pos != s.size())
      throw_error(Error::Code::Validation, "bad complex literal: " + text);
    return Complex(first, second);
  }
  second = parse_num(s, pos);
  if (pos >= s.size() || (s[pos] != 'i' && s[pos] != 'I') || pos + 1 != s.size())
    throw_error(Error::Code::Validation,
                "bad complex literal (expected trailing i): " + text);
  return Complex(first, second);
}

std::string format_complex(Complex z) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

int log_level() {
  const char* env = std::getenv("PERFHOM_LOG");
  if (!env) return 0;
  const std::string v = env;
  if (v == "debug") return 2;
  if (v.empty() || v == "0" || v == "quiet") return 0;
  return 1;
}

bool timing_enabled() {
  const char* env = std::getenv("PERFHOM_TIMING");
  return env && std::string(env) == "1";
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[perfhom] " << msg << "\n";
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// ---- schema ----

void require_keys(const json& obj, const std::string& where,
                  const std::vector<std::string>& allowed) {
  if (!obj.is_object())
    throw_error(Error::Code::Validation, where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw_error(Error::Code::Validation,
                  "unknown key '" + it.key() + "' in " + where);
  }
}

double num_at(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (obj[key].is_boolean()) return obj[key].get<bool>() ? 1.0 : 0.0;
  if (!obj[key].is_number())
    throw_error(Error::Code::Validation, "'" + key + "' must be a number");
  return obj[key].get<double>();
}

// ---- config -> domain objects ----

DomainSpec domain_from(const json& cfg) {
  DomainSpec d;
  d.dim = 2;
  d.box = {1.0, 1.0};
  if (cfg.contains("domain")) {
    const json& j = cfg["domain"];
    require_keys(j, "domain", {"dim", "box", "shape"});
    d.dim = static_cast<int>(num_at(j, "dim", 2));
    if (j.contains("box")) {
      if (!j["box"].is_array())
        throw_error(Error::Code::Validation, "domain.box must be an array");
      d.box.clear();
      for (const auto& e : j["box"]) d.box.push_back(e.get<double>());
    } else if (d.dim == 3) {
      d.box = {1.0, 1.0, 1.0};
    }
    if (j.contains("shape")) {
      const std::string s = j["shape"].get<std::string>();
      if (s == "rectangle")
        d.shape = DomainShape::Rectangle;
      else if (s == "strip")
        d.shape = DomainShape::Strip;
      else
        throw_error(Error::Code::Validation, "unknown domain shape " + s);
    }
  }
  d.validate();
  return d;
}

BoundaryKind bc_from(const json& cfg) {
  BoundaryKind bc = BoundaryKind::robin({1.0, 0.0});
  if (cfg.contains("bc")) {
    const json& j = cfg["bc"];
    require_keys(j, "bc", {"kind", "alpha"});
    const std::string kind =
        j.contains("kind") ? j["kind"].get<std::string>() : "robin";
    if (kind == "dirichlet")
      bc = BoundaryKind::dirichlet();
    else if (kind == "neumann")
      bc = BoundaryKind::neumann();
    else if (kind == "robin")
      bc = BoundaryKind::robin(
          j.contains("alpha") ? parse_complex(j["alpha"].get<std::string>())
                              : Complex(1.0, 0.0));
    else
      throw_error(Error::Code::Validation, "unknown bc kind " + kind);
  }
  bc.validate();
  return bc;
}

PerforationSpec spec_from(const json& cfg) {
  PerforationSpec s;
  s.domain = domain_from(cfg);
  s.bc = bc_from(cfg);
  s.epsilon = num_at(cfg, "epsilon", 0.25);
  s.neumann_exponent = num_at(cfg, "neumann_exponent", 2.0);
  if (cfg.contains("radius_override"))
    s.radius_override = cfg["radius_override"].get<double>();
  s.validate();
  return s;
}

MeshPolicy mesh_from(const json& cfg) {
  MeshPolicy p;
  if (cfg.contains("mesh")) {
    const json& j = cfg["mesh"];
    require_keys(j, "mesh",
                 {"h_far_factor", "h_far_cap", "grading", "tol_rel",
                  "resolve_floor", "min_angle"});
    p.h_far_factor = num_at(j, "h_far_factor", p.h_far_factor);
    p.h_far_cap = num_at(j, "h_far_cap", p.h_far_cap);
    p.grading = num_at(j, "grading", p.grading);
    p.options.tol_rel = num_at(j, "tol_rel", p.options.tol_rel);
    p.options.resolve_floor = num_at(j, "resolve_floor", p.options.resolve_floor);
    p.options.min_angle_deg = num_at(j, "min_angle", p.options.min_angle_deg);
  }
  return p;
}

SourceSpec source_from(const json& cfg) {
  SourceSpec s;
  s.name = "sin2d";
  if (cfg.contains("source")) {
    const json& j = cfg["source"];
    require_keys(j, "source", {"name", "cx", "cy", "sigma", "cube"});
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    s.cx = num_at(j, "cx", s.cx);
    s.cy = num_at(j, "cy", s.cy);
    s.sigma = num_at(j, "sigma", s.sigma);
    s.cube = static_cast<int>(num_at(j, "cube", s.cube));
  }
  return s;
}

struct Tolerances {
  double solve = 1e-10, eigs = 1e-8, opnorm = 1e-3, expm = 1e-4,
         norm_est = 1e-2;
};

Tolerances tol_from(const json& cfg) {
  Tolerances t;
  if (cfg.contains("tolerances")) {
    const json& j = cfg["tolerances"];
    require_keys(j, "tolerances", {"solve", "eigs", "opnorm", "expm",
                                   "norm_est"});
    t.solve = num_at(j, "solve", t.solve);
    t.eigs = num_at(j, "eigs", t.eigs);
    t.opnorm = num_at(j, "opnorm", t.opnorm);
    t.expm = num_at(j, "expm", t.expm);
    t.norm_est = num_at(j, "norm_est", t.norm_est);
  }
  return t;
}

// ---- outputs ----

struct RunContext {
  std::string subcommand;
  json cfg;               // effective config (defaults merged)
  fs::path out_dir;
  std::uint64_t config_hash = 0;
  std::string started, finished;
  json rows = json::array();
  std::vector<std::string> outputs;
  bool timing = false;

  std::string hash_hex() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    return buf;
  }

  void add_row(int id, const std::string& status, double seconds) {
    rows.push_back({{"id", id}, {"status", status}, {"seconds", seconds}});
  }

  double csv_seconds(double measured) const { return timing ? measured : 0.0; }

  void write_csv(const std::string& name, const std::string& header,
                 const std::vector<std::string>& lines) {
    fs::create_directories(out_dir);
    const fs::path path = out_dir / name;
    const fs::path tmp = out_dir / (name + ".tmp");
    {
      std::ofstream os(tmp);
      if (!os)
        throw_error(Error::Code::Resource, "cannot write " + tmp.string());
      os << "# manifest_hash=" << hash_hex() << "\n";
      os << header << "\n";
      for (const auto& l : lines) os << l << "\n";
    }
    fs::rename(tmp, path);
    outputs.push_back(name);
    log_info("wrote " + path.string());
  }

  void write_manifest() {
    finished = iso_now();
    json m;
    m["artifact"] = kVersion;
    m["subcommand"] = subcommand;
    m["config_hash"] = hash_hex();
    m["started"] = started;
    m["finished"] = finished;
    m["effective_config"] = cfg;
    m["rows"] = rows;
    m["outputs"] = outputs;
    fs::create_directories(out_dir);
    const fs::path tmp = out_dir / "manifest.json.tmp";
    {
      std::ofstream os(tmp);
      os << m.dump(2) << "\n";
    }
    fs::rename(tmp, out_dir / "manifest.json");
  }
};

// ---- subcommands ----

int cmd_mu(RunContext& ctx) {
  const BoundaryKind bc = bc_from(ctx.cfg);
  const int dim = static_cast<int>(num_at(ctx.cfg, "dim", 2));
  const StrangeTerm st = strange_term(bc, dim);

  bool exact_identity = true;
  if (bc.kind == BcKind::Robin) {
    for (double eps : {0.25, 0.125, 0.0625, 0.03125}) {
      const Complex m = mu_percell(bc, eps, dim, /*unit_trace=*/true);
      if (std::abs(m - st.mu) > 1e-14 * std::abs(st.mu)) exact_identity = false;
    }
  }
  std::cout << "mu = " << fmt(st.mu.real());
  if (st.mu.imag() != 0.0) std::cout << " " << format_complex(st.mu);
  std::cout << "\nexact_identity = " << (exact_identity ? "true" : "false")
            << "\n";
  if (ctx.cfg.contains("epsilon")) {
    const double eps = ctx.cfg["epsilon"].get<double>();
    const Complex mpc = mu_percell(bc, eps, dim, false,
                                   num_at(ctx.cfg, "neumann_exponent", 2.0));
    std::cout << "mu_percell(eps=" << fmt(eps) << ") = " << format_complex(mpc)
              << "\n";
  }
  ctx.write_csv("mu.csv", "bc,dim,mu_re,mu_im,exact_identity",
                {std::string(bc.name()) + "," + std::to_string(dim) + "," +
                 fmt(st.mu.real()) + "," + fmt(st.mu.imag()) + "," +
                 (exact_identity ? "true" : "false")});
  ctx.add_row(0, "ok", 0.0);
  return 0;
}

int cmd_capacity(RunContext& ctx) {
  const int dim = static_cast<int>(num_at(ctx.cfg, "dim", 3));
  const double r_trunc = num_at(ctx.cfg, "r_trunc", 100.0);
  const int nodes = static_cast<int>(num_at(ctx.cfg, "nodes", 2000));
  const RadialGrid grid = radial_grid(1.0, r_trunc, nodes - 1, true);
  const double e = capacity_variational(dim, r_trunc, grid);
  const double einf = capacity_extrapolated(dim, r_trunc, nodes);
  std::cout << "energy = " << fmt(e) << "\nextrapolated = " << fmt(einf)
            << "\nmu_D = " << fmt(einf / std::pow(2.0, dim)) << "\n";
  ctx.write_csv("capacity.csv", "dim,r_trunc,nodes,energy,extrapolated",
                {std::to_string(dim) + "," + fmt(r_trunc) + "," +
                 std::to_string(nodes) + "," + fmt(e) + "," + fmt(einf)});
  ctx.add_row(0, "ok", 0.0);
  return 0;
}

int cmd_corrector(RunContext& ctx) {
  const BoundaryKind bc = bc_from(ctx.cfg);
  const int dim = static_cast<int>(num_at(ctx.cfg, "dim", 2));
  const double eps = num_at(ctx.cfg, "epsilon", 0.25);
  double a = num_at(ctx.cfg, "a", 0.0);
  if (a <= 0.0) {
    PerforationSpec s;
    s.domain.dim = dim;
    s.domain.box = std::vector<double>(dim, 1.0);
    s.epsilon = eps;
    s.bc = bc;
    s.neumann_exponent = num_at(ctx.cfg, "neumann_exponent", 2.0);
    a = hole_radius(s);
  }
  const int nodes = static_cast<int>(num_at(ctx.cfg, "nodes", 400));
  const CorrectorSolution w = corrector_radial(bc, a, eps, dim, nodes);
  std::cout << "flux_outer = " << format_complex(w.flux_outer)
            << "\nw(a) = " << format_complex(w.w_at_hole)
            << "\nmax_nodal_error = " << fmt(w.max_nodal_error) << "\n";
  std::vector<std::string> lines;
  for (Index i = 0; i < w.grid.n_nodes(); ++i)
    lines.push_back(fmt(w.grid.nodes[i]) + "," + fmt(w.values[i].real()) +
                    "," + fmt(w.values[i].imag()));
  ctx.write_csv("corrector.csv", "r,w_re,w_im", lines);
  ctx.add_row(0, "ok", 0.0);
  return 0;
}

int cmd_solve(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Tolerances tol = tol_from(ctx.cfg);
  const ResolventPair rp(spec, policy, tol.solve);
  const ScalarField f = make_source(source_from(ctx.cfg));
  const Vec u = rp.solve_eps(f);
  std::vector<std::string> lines;
  lines.reserve(u.size());
  for (Index v = 0; v < u.size(); ++v)
    lines.push_back(fmt(rp.perforated().vertices(v, 0)) + "," +
                    fmt(rp.perforated().vertices(v, 1)) + "," +
                    fmt(u[v].real()) + "," + fmt(u[v].imag()));
  ctx.write_csv("solution.csv", "x,y,u_re,u_im", lines);
  if (num_at(ctx.cfg, "dump_system", 0.0) != 0.0) {
    fs::create_directories(ctx.out_dir);
    std::ofstream os(ctx.out_dir / "system.txt");
    export_matrix_coord(os, rp.op_eps().A_full);
    ctx.outputs.push_back("system.txt");
  }
  if (num_at(ctx.cfg, "dump_mesh", 0.0) != 0.0) {
    fs::create_directories(ctx.out_dir);
    write_pdmesh_file((ctx.out_dir / "mesh.pdmesh").string(), rp.perforated());
    ctx.outputs.push_back("mesh.pdmesh");
  }
  ctx.add_row(0, "ok", wall_seconds() - t0);
  return 0;
}

int cmd_sweep(RunContext& ctx) {
  SweepConfig cfg;
  cfg.base = spec_from(ctx.cfg);
  if (!ctx.cfg.contains("epsilons") || !ctx.cfg["epsilons"].is_array() ||
      ctx.cfg["epsilons"].empty())
    throw_error(Error::Code::Validation,
                "resolvent-sweep requires a nonempty 'epsilons' array");
  for (const auto& e : ctx.cfg["epsilons"])
    cfg.eps_list.push_back(e.get<double>());
  cfg.source = source_from(ctx.cfg);
  cfg.mesh = mesh_from(ctx.cfg);
  cfg.compute_delta = num_at(ctx.cfg, "compute_delta", 1.0) != 0.0;
  cfg.compute_lambda1 = num_at(ctx.cfg, "compute_lambda1", 0.0) != 0.0;
  const Tolerances tol = tol_from(ctx.cfg);
  cfg.solve_tol = tol.solve;
  cfg.delta_tol = tol.opnorm;
  cfg.seed = static_cast<std::uint64_t>(num_at(ctx.cfg, "seed", 1.0));
  cfg.threads = static_cast<int>(num_at(ctx.cfg, "threads", 1.0));

  const auto rows = resolvent_sweep(cfg);
  std::vector<std::string> lines;
  bool any_failed = false;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool ok = r.status == "ok";
    any_failed = any_failed || !ok;
    // failed rows never carry partial numbers in the value columns
    lines.push_back(
        fmt(r.epsilon) + "," + fmt(r.h_far) + "," +
        (ok ? std::to_string(r.dofs) : "") + "," + (ok ? fmt(r.defect) : "") +
        "," + (ok && std::isfinite(r.delta_eps) ? fmt(r.delta_eps) : "") +
        "," + (ok && cfg.compute_lambda1 ? fmt(r.lambda1.real()) : "") + "," +
        (ok && cfg.compute_lambda1 ? fmt(r.lambda1.imag()) : "") + "," +
        r.status + "," + fmt3(ctx.csv_seconds(r.seconds)));
    ctx.add_row(static_cast<int>(i), r.status, r.seconds);
    std::cout << "eps=" << fmt(r.epsilon) << " defect="
              << (ok ? fmt(r.defect) : "failed") << " delta="
              << (ok && std::isfinite(r.delta_eps) ? fmt(r.delta_eps) : "-")
              << "\n";
  }
  ctx.write_csv("sweep.csv",
                "epsilon,h_far,dofs,defect,delta_eps,lambda1_re,lambda1_im,"
                "status,seconds",
                lines);
  return any_failed ? 3 : 0;
}

int cmd_spectrum(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Tolerances tol = tol_from(ctx.cfg);
  const double lo = num_at(ctx.cfg, "window_lo", 1.0);
  const double hi = num_at(ctx.cfg, "window_hi", 30.0);
  const int k_max = static_cast<int>(num_at(ctx.cfg, "k_max", 32));

  const ResolventPair rp(spec, policy, tol.solve);
  auto dump = [&](const DiscreteOperator& op, const std::string& name) {
    const EigenResult res = eigs_window(op, lo, hi, k_max, tol.eigs);
    std::vector<std::string> lines;
    std::vector<Complex> vals;
    for (const auto& p : res.pairs) {
      lines.push_back(fmt(p.lambda.real()) + "," + fmt(p.lambda.imag()) + "," +
                      fmt(p.residual));
      vals.push_back(p.lambda);
    }
    ctx.write_csv(name, "re,im,residual", lines);
    if (!res.converged)
      throw_error(Error::Code::Numerical,
                  "eigensolver coverage incomplete over the window");
    return vals;
  };
  const auto v_eps = dump(rp.op_eps(), "spectrum_eps.csv");
  const auto v_lim = dump(rp.op_limit(), "spectrum_limit.csv");
  const double dist = hausdorff_distance(v_eps, v_lim);
  std::cout << "hausdorff = " << fmt(dist) << "\n";
  ctx.cfg["result_hausdorff"] = dist;
  ctx.add_row(0, "ok", wall_seconds() - t0);
  return 0;
}

int cmd_gap(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Tolerances tol = tol_from(ctx.cfg);
  const double delta = num_at(ctx.cfg, "delta", 0.2);

  auto owned = std::make_shared<MeshPair>(mesh_perforated_pair(
      spec, policy.h_for(spec.epsilon), policy.grading, policy.options));
  auto mesh = std::shared_ptr<const Mesh>(owned, &owned->perforated);
  auto opb = build_operator(mesh, spec.bc, 0.0, Complex(-1.0, 0.0));
  const Complex mu = strange_term(spec.bc, spec.domain.dim).mu;
  const GapCheck gap = spectral_gap_check(opb, delta, mu, tol.eigs);

  std::vector<std::string> lines;
  for (Complex v : gap.violators)
    lines.push_back(fmt(v.real()) + "," + fmt(v.imag()));
  ctx.write_csv("gap.csv", "re,im", lines);
  std::cout << "gap_free = " << (gap.ok ? "true" : "false") << " (delta="
            << fmt(delta) << ", Re mu=" << fmt(mu.real()) << ")\n";
  ctx.add_row(0, gap.ok ? "ok" : "violated", wall_seconds() - t0);
  return 0;
}

int cmd_numrange(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const int samples = static_cast<int>(num_at(ctx.cfg, "samples", 200));
  const std::uint64_t seed =
      static_cast<std::uint64_t>(num_at(ctx.cfg, "seed", 1.0));

  auto owned = std::make_shared<MeshPair>(mesh_perforated_pair(
      spec, policy.h_for(spec.epsilon), policy.grading, policy.options));
  auto mesh = std::shared_ptr<const Mesh>(owned, &owned->perforated);
  auto opb = build_operator(mesh, spec.bc, 0.0, Complex(-1.0, 0.0));

  const auto zs = numerical_range_sample(opb, samples, seed);
  int violations = 0;
  double theta = 0.0;
  if (spec.bc.kind == BcKind::Robin && spec.bc.alpha.real() > 0.0) {
    const SectorSpec sector =
        sector_angle(spec.bc.alpha, 0.0, spec.domain.dim, 0.0,
                     SectorVariant::Theta0);
    theta = sector.half_angle;
    for (Complex z : zs)
      if (!sector.contains(z, 1e-12 * std::abs(z))) ++violations;
  }
  std::vector<std::string> lines;
  for (Complex z : zs) lines.push_back(fmt(z.real()) + "," + fmt(z.imag()));
  ctx.write_csv("numrange.csv", "re,im", lines);
  ctx.write_csv("sector.csv", "theta,violations",
                {fmt(theta) + "," + std::to_string(violations)});
  std::cout << "theta_0 = " << fmt(theta) << " violations = " << violations
            << "\n";
  ctx.add_row(0, violations == 0 ? "ok" : "violated", wall_seconds() - t0);
  return 0;
}

int cmd_semigroup(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Tolerances tol = tol_from(ctx.cfg);
  const double t_max = num_at(ctx.cfg, "t_max", 5.0);
  const double t_step = num_at(ctx.cfg, "t_step", 0.5);
  const std::uint64_t seed =
      static_cast<std::uint64_t>(num_at(ctx.cfg, "seed", 1.0));
  if (!(t_step > 0.0) || !(t_max >= 0.0))
    throw_error(Error::Code::Validation, "bad t grid");

  auto owned = std::make_shared<MeshPair>(mesh_perforated_pair(
      spec, policy.h_for(spec.epsilon), policy.grading, policy.options));
  auto mesh = std::shared_ptr<const Mesh>(owned, &owned->perforated);
  auto opb = build_operator(mesh, spec.bc, 0.0, Complex(-1.0, 0.0));
  if (spec.bc.kind == BcKind::Robin && !(spec.bc.alpha.real() > 0.0))
    throw_error(Error::Code::Validation,
                "semigroup experiments require Re(alpha) > 0");

  std::vector<double> grid;
  for (double t = 0.0; t <= t_max + 1e-12; t += t_step) grid.push_back(t);
  const DecayCurve curve = semigroup_decay_curve(opb, grid, tol.norm_est, seed);

  std::vector<std::string> lines;
  for (size_t i = 0; i < grid.size(); ++i)
    lines.push_back(fmt(curve.t[i]) + "," + fmt(curve.norm[i]) + "," +
                    fmt(curve.fitted_m *
                        std::exp(-curve.fitted_lambda * curve.t[i])));
  ctx.write_csv("semigroup.csv", "t,norm,bound", lines);
  std::cout << "fitted_M = " << fmt(curve.fitted_m)
            << " fitted_lambda = " << fmt(curve.fitted_lambda) << "\n";
  ctx.add_row(0, "ok", wall_seconds() - t0);
  return 0;
}

int cmd_decay(RunContext& ctx) {
  const double t0 = wall_seconds();
  DecayCheckConfig cfg;
  cfg.strip = domain_from(ctx.cfg);
  if (!ctx.cfg.contains("domain")) {
    cfg.strip.box = {8.0, 1.0};
    cfg.strip.shape = DomainShape::Strip;
  }
  cfg.lambda = num_at(ctx.cfg, "lambda", 1.0);
  cfg.bc = bc_from(ctx.cfg);
  cfg.cube_index = static_cast<int>(num_at(ctx.cfg, "cube", 3));
  cfg.h = num_at(ctx.cfg, "h", 1.0 / 32.0);
  cfg.tol_disc = num_at(ctx.cfg, "tol_disc", 0.05);
  const int seeds = static_cast<int>(num_at(ctx.cfg, "seeds", 20));
  const std::uint64_t seed0 =
      static_cast<std::uint64_t>(num_at(ctx.cfg, "seed", 1.0));

  std::vector<std::string> lines;
  bool all_pass = true;
  for (int s = 0; s < seeds; ++s) {
    const auto rep = weighted_decay_check(cfg, Rng::substream(seed0, s));
    all_pass = all_pass && rep.pass();
    lines.push_back(std::to_string(s) + "," + fmt(rep.r1) + "," + fmt(rep.r2) +
                    "," + fmt(rep.big_m) + "," +
                    (rep.pass1 ? "true" : "false") + "," +
                    (rep.pass2 ? "true" : "false"));
  }
  ctx.write_csv("decay_check.csv", "seed,r1,r2,big_m,pass1,pass2", lines);
  std::cout << "all_pass = " << (all_pass ? "true" : "false") << "\n";
  ctx.add_row(0, all_pass ? "ok" : "violated", wall_seconds() - t0);
  return 0;
}

int cmd_interaction(RunContext& ctx) {
  const double t0 = wall_seconds();
  json cfgd = ctx.cfg;
  if (!cfgd.contains("domain")) {
    ctx.cfg["domain"] = {{"dim", 2}, {"box", {10.0, 1.0}}, {"shape", "strip"}};
  }
  PerforationSpec spec = spec_from(ctx.cfg);
  spec.epsilon = num_at(ctx.cfg, "epsilon", 0.125);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Tolerances tol = tol_from(ctx.cfg);
  const int ci = static_cast<int>(num_at(ctx.cfg, "cube_i", 0));
  std::vector<int> cjs;
  if (ctx.cfg.contains("cube_j_list"))
    for (const auto& e : ctx.cfg["cube_j_list"]) cjs.push_back(e.get<int>());
  else
    cjs.push_back(static_cast<int>(num_at(ctx.cfg, "cube_j", 2)));

  const ResolventPair rp(spec, policy, tol.solve);
  const ScalarField one = make_source({.name = "one"});
  std::vector<std::string> lines;
  for (size_t k = 0; k < cjs.size(); ++k) {
    const auto res = interaction_decay(rp, ci, cjs[k], one, one);
    lines.push_back(std::to_string(ci) + "," + std::to_string(cjs[k]) + "," +
                    std::to_string(std::abs(ci - cjs[k])) + "," +
                    fmt(res.inner.real()) + "," + fmt(res.inner.imag()) + "," +
                    fmt(res.ratio));
    ctx.add_row(static_cast<int>(k), "ok", 0.0);
    std::cout << "|i-j|=" << std::abs(ci - cjs[k]) << " ratio=" << fmt(res.ratio)
              << "\n";
  }
  ctx.write_csv("interaction.csv", "cube_i,cube_j,dist,inner_re,inner_im,ratio",
                lines);
  ctx.rows.back()["seconds"] = wall_seconds() - t0;
  return 0;
}

int cmd_decompose(RunContext& ctx) {
  const double t0 = wall_seconds();
  if (!ctx.cfg.contains("domain"))
    ctx.cfg["domain"] = {{"dim", 2}, {"box", {8.0, 1.0}}, {"shape", "strip"}};
  PerforationSpec spec = spec_from(ctx.cfg);
  spec.epsilon = num_at(ctx.cfg, "epsilon", 0.125);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const int n = static_cast<int>(num_at(ctx.cfg, "n", 3));
  std::vector<int> cubes;
  if (ctx.cfg.contains("cubes"))
    for (const auto& e : ctx.cfg["cubes"]) cubes.push_back(e.get<int>());
  else
    cubes = {0, 1, 2, 3, 4, 5};

  const ResolventPair rp(spec, policy);
  const auto rep = decomposition_inequality_check(
      rp, make_source(source_from(ctx.cfg)), cubes, n);
  ctx.write_csv("decompose.csv", "n,n_cubes,lhs,sum_norms2,f_norm,c_min",
                {std::to_string(rep.n) + "," + std::to_string(rep.n_cubes) +
                 "," + fmt(rep.lhs) + "," + fmt(rep.sum_norms2) + "," +
                 fmt(rep.f_norm) + "," + fmt(rep.c_min)});
  std::cout << "C_min = " << fmt(rep.c_min) << "\n";
  ctx.add_row(0, "ok", wall_seconds() - t0);
  return 0;
}

int cmd_mesh_audit(RunContext& ctx) {
  const double t0 = wall_seconds();
  const PerforationSpec spec = spec_from(ctx.cfg);
  const MeshPolicy policy = mesh_from(ctx.cfg);
  const Mesh mesh = mesh_perforated(spec, policy.h_for(spec.epsilon),
                                    policy.grading, policy.options);
  audit_mesh(mesh, policy.options);
  const MeshQualityReport rep = mesh_quality(mesh);
  fs::create_directories(ctx.out_dir);
  write_pdmesh_file((ctx.out_dir / "mesh.pdmesh").string(), mesh);
  ctx.outputs.push_back("mesh.pdmesh");
  ctx.write_csv(
      "mesh_quality.csv",
      "vertices,triangles,boundary_edges,min_angle,max_aspect,size_ratio,"
      "boundary_fit,h_max,h_min",
      {std::to_string(rep.n_vertices) + "," + std::to_string(rep.n_triangles) +
       "," + std::to_string(rep.n_boundary_edges) + "," +
       fmt(rep.min_angle_deg) + "," + fmt(rep.max_aspect) + "," +
       fmt(rep.max_size_ratio) + "," + fmt(rep.boundary_fit) + "," +
       fmt(mesh.h_max) + "," + fmt(mesh.h_min)});
  std::cout << "audit = pass  " << rep.to_string() << "\n";
  ctx.add_row(0, "ok", wall_seconds() - t0);
  return 0;
}

// ---- plot script generation (pure text templating) ----

int cmd_plot(RunContext& ctx) {
  const std::string csv = ctx.cfg.value("csv", "");
  std::string kind = ctx.cfg.value("kind", "");
  const double theta = num_at(ctx.cfg, "theta", 0.0);
  if (csv.empty())
    throw_error(Error::Code::Validation, "plot requires a csv path");
  std::ifstream is(csv);
  if (!is) throw_error(Error::Code::Validation, "cannot open " + csv);
  std::string line, header;
  int data_rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty())
      header = line;
    else
      ++data_rows;
  }
  if (kind.empty()) {
    if (header.rfind("epsilon,", 0) == 0) kind = "sweep";
    else if (header == "re,im,residual") kind = "spectra";
    else if (header == "re,im") kind = "numrange";
    else if (header == "t,norm,bound") kind = "decay";
    else
      throw_error(Error::Code::Validation,
                  "unrecognized CSV header: " + header);
  }
  if (kind != "sweep" && kind != "spectra" && kind != "numrange" &&
      kind != "decay")
    throw_error(Error::Code::Validation, "unknown plot kind " + kind);

  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
     << "import csv\n"
     << "import matplotlib\n"
     << "matplotlib.use('Agg')\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "rows = []\n"
     << "with open(" << json(csv).dump() << ") as fh:\n"
     << "    for row in csv.reader(l for l in fh if not l.startswith('#')):\n"
     << "        rows.append(row)\n"
     << "header, data = rows[0], rows[1:]\n"
     << "data = [r for r in data if all(c != '' for c in r[:2])]\n"
     << "fig, ax = plt.subplots()\n";
  if (data_rows == 0) {
    py << "ax.annotate('no data', (0.5, 0.5), ha='center')\n";
  } else if (kind == "sweep") {
    py << "eps = [float(r[0]) for r in data]\n"
       << "defect = [float(r[3]) for r in data if r[3] != '']\n"
       << "ax.loglog(eps[:len(defect)], defect, 'o-', label='defect')\n"
       << "delta = [(float(r[0]), float(r[4])) for r in data if r[4] != '']\n"
       << "if delta:\n"
       << "    ax.loglog([d[0] for d in delta], [d[1] for d in delta], "
          "'s--', label='delta_eps')\n"
       << "ax.set_xlabel('epsilon')\n"
       << "ax.set_ylabel('L2 resolvent defect')\n"
       << "ax.legend()\n";
  } else if (kind == "spectra" || kind == "numrange") {
    py << "re = [float(r[0]) for r in data]\n"
       << "im = [float(r[1]) for r in data]\n"
       << "ax.scatter(re, im, s=12)\n"
       << "ax.set_xlabel('Re')\n"
       << "ax.set_ylabel('Im')\n";
    if (kind == "numrange" && theta > 0.0) {
      py << "import math\n"
         << "t = " << fmt(theta) << "\n"
         << "xmax = max(re) if re else 1.0\n"
         << "ax.plot([0, xmax], [0, math.tan(t) * xmax], 'k--')\n"
         << "ax.plot([0, xmax], [0, -math.tan(t) * xmax], 'k--')\n";
    }
  } else if (kind == "decay") {
    py << "t = [float(r[0]) for r in data]\n"
       << "norm = [float(r[1]) for r in data]\n"
       << "bound = [float(r[2]) for r in data]\n"
       << "ax.semilogy(t, norm, 'o-', label='||exp(-tB)||')\n"
       << "ax.semilogy(t, bound, 'k--', label='M exp(-lambda t)')\n"
       << "ax.set_xlabel('t')\n"
       << "ax.legend()\n";
  }
  py << "fig.savefig(" << json(csv + ".png").dump() << ", dpi=150)\n"
     << "print('wrote " << csv << ".png')\n";

  const std::string script = ctx.cfg.value("script", csv + "_plot.py");
  std::ofstream os(script);
  if (!os) throw_error(Error::Code::Resource, "cannot write " + script);
  os << py.str();
  std::cout << "wrote " << script << "\n";
  ctx.add_row(0, "ok", 0.0);
  return 0;
}

// ---- argument handling ----

struct ArgSpec {
  std::vector<std::string> allowed_keys;
  int (*handler)(RunContext&);
};

const std::vector<std::string> kCommonKeys = {
    "domain", "bc",         "mesh",   "source", "tolerances",
    "seed",   "threads",    "epsilon", "neumann_exponent", "radius_override"};

std::map<std::string, ArgSpec> command_table() {
  std::map<std::string, ArgSpec> t;
  auto common_plus = [](std::vector<std::string> extra) {
    extra.insert(extra.end(), kCommonKeys.begin(), kCommonKeys.end());
    return extra;
  };
  t["mu"] = {common_plus({"dim"}), cmd_mu};
  t["capacity"] = {common_plus({"dim", "r_trunc", "nodes"}), cmd_capacity};
  t["corrector"] = {common_plus({"dim", "a", "nodes"}), cmd_corrector};
  t["solve"] = {common_plus({"dump_system", "dump_mesh"}), cmd_solve};
  t["resolvent-sweep"] = {
      common_plus({"epsilons", "compute_delta", "compute_lambda1"}), cmd_sweep};
  t["spectrum"] = {common_plus({"window_lo", "window_hi", "k_max",
                                "result_hausdorff"}),
                   cmd_spectrum};
  t["gap"] = {common_plus({"delta"}), cmd_gap};
  t["numrange"] = {common_plus({"samples"}), cmd_numrange};
  t["semigroup"] = {common_plus({"t_max", "t_step"}), cmd_semigroup};
  t["decay"] = {common_plus({"lambda", "cube", "h", "tol_disc", "seeds"}),
                cmd_decay};
  t["interaction"] = {common_plus({"cube_i", "cube_j", "cube_j_list"}),
                      cmd_interaction};
  t["decompose"] = {common_plus({"cubes", "n"}), cmd_decompose};
  t["mesh-audit"] = {common_plus({}), cmd_mesh_audit};
  t["plot"] = {{"csv", "kind", "theta", "script"}, cmd_plot};
  return t;
}

void usage() {
  std::cout
      << kVersion << "\n"
      << "usage: perfhom <subcommand> [--config file.json] [--out dir]\n"
      << "               [--seed n] [--threads n] [--set key=value ...]\n"
      << "subcommands: mu capacity corrector solve resolvent-sweep spectrum\n"
      << "             gap numrange semigroup decay interaction decompose\n"
      << "             mesh-audit plot\n"
      << "Config keys are documented in README.md; --set overrides one\n"
      << "top-level key with a JSON value, e.g. --set epsilon=0.125 or\n"
      << "--set bc='{\"kind\":\"robin\",\"alpha\":\"1+1i\"}'.\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  RunContext ctx;
  ctx.started = iso_now();
  ctx.timing = timing_enabled();

  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
      usage();
      return args.empty() ? 2 : 0;
    }
    const auto table = command_table();
    const auto it = table.find(args[0]);
    if (it == table.end())
      throw_error(Error::Code::Validation, "unknown subcommand: " + args[0]);
    ctx.subcommand = args[0];

    // flags: --config, --out, --seed, --threads, plus shortcut overrides
    json cfg = json::object();
    std::string out_dir = "out";
    for (size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      auto next = [&]() -> std::string {
        if (i + 1 >= args.size())
          throw_error(Error::Code::Validation, "missing value after " + a);
        return args[++i];
      };
      if (a == "--config") {
        std::ifstream is(next());
        if (!is)
          throw_error(Error::Code::Validation, "cannot open config file");
        json file_cfg;
        try {
          is >> file_cfg;
        } catch (const std::exception& e) {
          throw_error(Error::Code::Validation,
                      std::string("config parse error: ") + e.what());
        }
        for (auto& [k, v] : file_cfg.items()) cfg[k] = v;
      } else if (a == "--out") {
        out_dir = next();
      } else if (a == "--seed") {
        cfg["seed"] = std::stod(next());
      } else if (a == "--threads") {
        cfg["threads"] = std::stod(next());
      } else if (a == "--eps") {
        cfg["epsilon"] = std::stod(next());
      } else if (a == "--dim") {
        cfg["dim"] = std::stod(next());
      } else if (a == "--bc") {
        json bc = cfg.contains("bc") ? cfg["bc"] : json::object();
        bc["kind"] = next();
        cfg["bc"] = bc;
      } else if (a == "--alpha") {
        json bc = cfg.contains("bc") ? cfg["bc"] : json::object();
        if (!bc.contains("kind")) bc["kind"] = "robin";
        bc["alpha"] = next();
        cfg["bc"] = bc;
      } else if (a == "--source") {
        cfg["source"] = {{"name", next()}};
      } else if (a == "--csv") {
        cfg["csv"] = next();
      } else if (a == "--kind") {
        cfg["kind"] = next();
      } else if (a == "--set") {
        const std::string kv = next();
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw_error(Error::Code::Validation, "--set expects key=value");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        try {
          cfg[key] = json::parse(val);
        } catch (...) {
          cfg[key] = val;  // plain string value
        }
      } else {
        throw_error(Error::Code::Validation, "unknown flag: " + a);
      }
    }

    require_keys(cfg, "config", it->second.allowed_keys);
    ctx.cfg = std::move(cfg);
    ctx.out_dir = out_dir;
    // schema-check nested blocks before any computation
    if (ctx.subcommand != "plot") {
      (void)domain_from(ctx.cfg);
      (void)bc_from(ctx.cfg);
      (void)mesh_from(ctx.cfg);
      (void)source_from(ctx.cfg);
      (void)tol_from(ctx.cfg);
    }
    ctx.config_hash = fnv1a64(ctx.subcommand + "\n" + ctx.cfg.dump());

    const int rc = it->second.handler(ctx);
    ctx.write_manifest();
    return rc;
  } catch (const Error& e) {
    std::cerr << "perfhom: " << error_code_name(e.code) << " error: "
              << e.what() << "\n";
    const bool numerical =
        e.code == Error::Code::Solver || e.code == Error::Code::Numerical;
    if (numerical) {
      // retain partial outputs plus the manifest for post-mortems
      try {
        ctx.add_row(-1, std::string("failed:") + error_code_name(e.code), 0.0);
        ctx.write_manifest();
      } catch (...) {
      }
      return 3;
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "perfhom: error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace perfhom
