#include "fibergap/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "fibergap/error.hpp"
#include "fibergap/render.hpp"
#include "fibergap/rng.hpp"
#include "fibergap/selftest.hpp"
#include "fibergap/spectral.hpp"
#include "fibergap/stability.hpp"

namespace fibergap {

namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIoError, "cannot read " + path);
  const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

namespace {

struct Context {
  const ExperimentConfig& cfg;
  fs::path dir;
  std::vector<std::string> files;
  std::vector<std::string> failures;

  std::string path(const std::string& name) {
    files.push_back(name);
    return (dir / name).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << text;
}

DisintegratedMeasure with_params(DisintegratedMeasure mu, const ExperimentConfig& cfg) {
  mu.set_norm_params(cfg.p, cfg.A1);
  return mu;
}

std::vector<DisintegratedMeasure> zero_mass_seeds(const ExperimentConfig& cfg) {
  Rng rng(cfg.rng_seed);
  std::vector<DisintegratedMeasure> seeds;
  for (std::size_t s = 0; s < cfg.seeds; ++s) seeds.push_back(random_zero_mass_measure(cfg.n, rng, 8, cfg.p, cfg.A1));
  return seeds;
}

// Zero-mean base densities: library members with their mean removed.
std::vector<GridDensity> base_seeds(const ExperimentConfig& cfg) {
  std::vector<GridDensity> lib = test_density_library(cfg.n, cfg.p, cfg.A1);
  std::vector<GridDensity> out;
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    GridDensity g = lib[(4 + s) % lib.size()];
    const double m = integral(g);
    for (double& v : g.values) v -= m;
    out.push_back(std::move(g));
  }
  return out;
}

void run_invariant(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const TransferOperator op(make_system(cfg.system), cfg.n);
  const DisintegratedMeasure start = lebesgue_square(cfg.n, 32, cfg.p, cfg.A1);
  const InvariantResult inv = invariant_measure(op, start, cfg.tol, cfg.n_max);
  write_measure_csv(inv.measure, ctx.path("invariant.csv"));
  const TransferRun run = transfer_n(op, start, cfg.steps, cfg.system.eta);
  write_diagnostics_csv(run.diagnostics, ctx.path("diagnostics.csv"));

  ConstantLedger led;
  led.set("n", static_cast<double>(cfg.n), Provenance::kConfigured);
  led.set("tol", cfg.tol, Provenance::kConfigured);
  led.set("steps", inv.steps, Provenance::kMeasured);
  led.set("residual", inv.residual, Provenance::kMeasured);
  led.set("converged", inv.converged ? 1.0 : 0.0, Provenance::kMeasured);
  led.set("mass", inv.measure.total_mass(), Provenance::kMeasured);
  led.set("var", path_variation(inv.measure), Provenance::kMeasured);
  led.set("s1_norm", norm_S1(inv.measure), Provenance::kMeasured);
  led.set("atoms_total", static_cast<double>(inv.measure.atom_count()), Provenance::kMeasured);
  led.write(ctx.path("ledger.txt"));
  if (!inv.converged) {
    ctx.failures.push_back(fmt::format("NotConverged: increment above {} after {} steps", cfg.tol, inv.steps));
  }
}

void run_rates(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const FiberSystem F = make_system(cfg.system);
  const RateEstimate base = base_convergence_rate(F.base, base_seeds(cfg), cfg.steps);
  const TransferOperator op(F, cfg.n);
  const EquilibriumRate eq = equilibrium_rate(op, zero_mass_seeds(cfg), cfg.steps);

  std::string csv = "kind,seed,step,norm\n";
  for (std::size_t s = 0; s < base.norms.size(); ++s) {
    for (std::size_t k = 0; k < base.norms[s].size(); ++k) csv += fmt::format("base,{},{},{}\n", s, k, base.norms[s][k]);
  }
  for (std::size_t s = 0; s < eq.norms.size(); ++s) {
    for (std::size_t k = 0; k < eq.norms[s].size(); ++k) csv += fmt::format("fiber,{},{},{}\n", s, k, eq.norms[s][k]);
  }
  write_text(ctx.path("rates.csv"), csv);

  const double bound = std::max(std::sqrt(cfg.system.alpha), std::sqrt(base.r));
  ConstantLedger led;
  led.set("alpha", cfg.system.alpha, Provenance::kConfigured);
  led.set("r", base.r, Provenance::kMeasured);
  led.set("D", base.D, Provenance::kMeasured);
  led.set("beta1_hat", eq.beta1_hat, Provenance::kMeasured);
  led.set("D2_hat", eq.D2_hat, Provenance::kMeasured);
  led.set("beta1_bound", bound, Provenance::kFormula);
  led.write(ctx.path("ledger.txt"));

  PlotSpec plot{"decay of zero-mass seeds", "step", "norm", false, true, {}};
  Series b{"base |P^n phi|_s (seed 0)", {}, {}, true};
  Series f{"fiber ||F^n mu||_1 (seed 0)", {}, {}, true};
  for (std::size_t k = 0; k < base.norms[0].size(); ++k) {
    b.x.push_back(static_cast<double>(k));
    b.y.push_back(base.norms[0][k]);
  }
  for (std::size_t k = 0; k < eq.norms[0].size(); ++k) {
    f.x.push_back(static_cast<double>(k));
    f.y.push_back(eq.norms[0][k]);
  }
  plot.series = {b, f};
  write_svg(plot, ctx.path("rates.svg"));

  if (eq.beta1_hat > bound + 0.05) {
    ctx.failures.push_back(fmt::format("beta1_hat {} exceeds max(sqrt alpha, sqrt r) + 0.05 = {}", eq.beta1_hat,
                                       bound + 0.05));
  }
}

// Measured and configured inputs for the gap chain.
GapInputs gap_inputs(const ExperimentConfig& cfg, const FiberSystem& F, const TransferOperator& op, double* var_mu0) {
  const int k = select_iterate(F.base, cfg.k_max);
  const LyBaseConstants ly = ly_base_constants(F.base, k, LyOptions{std::max<std::size_t>(cfg.n, 256), cfg.p, cfg.A1});
  const RateEstimate base = base_convergence_rate(F.base, base_seeds(cfg), cfg.steps);
  const InvariantResult inv = invariant_measure(op, cfg.tol, cfg.n_max);
  GapInputs in;
  in.alpha = F.alpha;
  in.r = base.r;
  in.D = base.D;
  in.beta0 = ly.beta0;
  in.C = ly.C;
  in.k = ly.k;
  in.M1 = ly.M1;
  in.p = cfg.p;
  in.A1 = cfg.A1;
  in.mu0_s1_norm = norm_S1(with_params(inv.measure, cfg));
  if (var_mu0) *var_mu0 = path_variation(inv.measure);
  return in;
}

void run_gap(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const FiberSystem F = make_system(cfg.system);
  const TransferOperator op(F, cfg.n);
  double var_mu0 = 0.0;
  const GapInputs in = gap_inputs(cfg, F, op, &var_mu0);
  ConstantLedger led = gap_constants(in);

  const std::vector<double> xs = linspace(0.0, 1.0, 257);
  const VarDiamond vd = var_diamond(F.G, xs, xs);
  const double K3 = k3_constant(branch_data(F.base), vd.surrogate);
  const double C0 = c0_constant(K3, led.get("K2"), led.get("beta0"));
  led.set("var_diamond", vd.surrogate, Provenance::kMeasured);
  led.set("K3", K3, Provenance::kFormula);
  led.set("C0", C0, Provenance::kFormula);
  led.set("var_mu0", var_mu0, Provenance::kMeasured);

  const GapDecayReport rep = verify_gap_decay(op, led.get("xi"), led.get("K"), zero_mass_seeds(cfg), cfg.steps);
  led.set("max_decay_ratio", rep.max_ratio, Provenance::kMeasured);
  led.write(ctx.path("ledger.txt"));

  std::string csv = "seed,step,s1_norm,ratio\n";
  for (std::size_t s = 0; s < rep.s1_norms.size(); ++s) {
    for (std::size_t k = 0; k < rep.s1_norms[s].size(); ++k) {
      csv += fmt::format("{},{},{},{}\n", s, k, rep.s1_norms[s][k], rep.ratios[s][k]);
    }
  }
  write_text(ctx.path("decay.csv"), csv);
  if (rep.max_ratio > 1.05) ctx.failures.push_back(fmt::format("gap decay ratio {} exceeds 1.05", rep.max_ratio));
}

void run_ly_check(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const FiberSystem F = make_system(cfg.system);
  std::string csv = "k,est1,cylinders\n";
  int chosen = 0;
  for (int k = 1; k <= cfg.k_max; ++k) {
    const Est1Result e = est1_quantity(F.base, k);
    csv += fmt::format("{},{},{}\n", k, e.est1, e.cylinders.size());
    if (e.est1 < 1.0) {
      chosen = k;
      break;
    }
  }
  write_text(ctx.path("ly.csv"), csv);
  ConstantLedger led;
  if (chosen == 0) {
    led.set("k_max", cfg.k_max, Provenance::kConfigured);
    led.write(ctx.path("ledger.txt"));
    ctx.failures.push_back(fmt::format("InsufficientIterate: est1 >= 1 for all k <= {}", cfg.k_max));
    return;
  }
  const LyBaseConstants ly =
      ly_base_constants(F.base, chosen, LyOptions{std::max<std::size_t>(cfg.n, 256), cfg.p, cfg.A1});
  led.set("k", ly.k, Provenance::kMeasured);
  led.set("est1", ly.est1, Provenance::kMeasured);
  led.set("beta0", ly.beta0, Provenance::kMeasured);
  led.set("C", ly.C, Provenance::kMeasured);
  led.set("M1", ly.M1, Provenance::kMeasured);
  led.write(ctx.path("ledger.txt"));
}

void run_stability(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const PerturbationFamily fam(cfg.system, cfg.perturbation);
  const StabilityCurve curve = stability_curve(fam, cfg.deltas, StabilityOptions{cfg.n, cfg.stability_tol,
                                                                                 cfg.stability_n_max});
  write_stability_csv(curve.rows, ctx.path("stability.csv"));
  const ModulusFit fit = fit_modulus(curve.rows);

  ConstantLedger led;
  led.set("c1", fit.c1, Provenance::kMeasured);
  led.set("c2", fit.c2, Provenance::kMeasured);
  led.set("relative_residual", fit.quality, Provenance::kMeasured);
  led.set("tol", cfg.stability_tol, Provenance::kConfigured);
  led.set("f0_residual", curve.f0_residual, Provenance::kMeasured);
  bool dominated = true, monotone = true;
  for (std::size_t i = 0; i < curve.rows.size(); ++i) {
    const StabilityRow& r = curve.rows[i];
    if (r.l1_diff > fit.predict(r.delta) + 2.0 * cfg.stability_tol) dominated = false;
    if (i > 0 && r.l1_diff > curve.rows[i - 1].l1_diff) monotone = false;
  }
  led.set("dominated", dominated ? 1.0 : 0.0, Provenance::kMeasured);
  led.set("monotone", monotone ? 1.0 : 0.0, Provenance::kMeasured);
  led.write(ctx.path("fit.txt"));

  PlotSpec plot{"stability modulus", "delta", "||f_delta - f_0||_1", true, true, {}};
  Series meas{"measured", {}, {}, true};
  for (const StabilityRow& r : curve.rows) {
    meas.x.push_back(r.delta);
    meas.y.push_back(r.l1_diff);
  }
  Series model{"c1 d|log d| + c2 d", {}, {}, false};
  const double lo = cfg.deltas.back(), hi = cfg.deltas.front();
  for (int i = 0; i <= 32; ++i) {
    const double d = lo * std::pow(hi / lo, i / 32.0);
    model.x.push_back(d);
    model.y.push_back(fit.predict(d));
  }
  plot.series = {meas, model};
  write_svg(plot, ctx.path("stability.svg"));

  if (!curve.f0_converged) ctx.failures.push_back("NotConverged: f0");
  for (const StabilityRow& r : curve.rows) {
    if (!r.converged) ctx.failures.push_back(fmt::format("NotConverged: f_delta at delta={}", r.delta));
  }
}

void run_norms_selftest(Context& ctx) {
  SelftestOptions o;
  o.seed = ctx.cfg.rng_seed;
  const std::vector<SelftestRow> rows = norm_selftest(o);
  write_selftest_csv(rows, ctx.path("selftest.csv"));
  for (const SelftestRow& r : rows) {
    if (!r.pass) ctx.failures.push_back(fmt::format("selftest {} failed: {} > {}", r.check, r.max_error, r.bound));
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  validate_config(cfg);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", out_dir, ec.message()));

  Context ctx{cfg, fs::path(out_dir), {}, {}};
  RunResult res;
  try {
    if (cfg.experiment == "invariant") run_invariant(ctx);
    else if (cfg.experiment == "rates") run_rates(ctx);
    else if (cfg.experiment == "gap") run_gap(ctx);
    else if (cfg.experiment == "ly_check") run_ly_check(ctx);
    else if (cfg.experiment == "stability") run_stability(ctx);
    else if (cfg.experiment == "norms_selftest") run_norms_selftest(ctx);
    else throw Error(ErrorCode::kConfigError, "unknown experiment " + cfg.experiment);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError || e.code() == ErrorCode::kIoError) throw;
    ctx.failures.push_back(e.what());
  }

  write_text(ctx.path("config.yaml"), serialize_config(cfg));
  std::vector<std::string> names = ctx.files;
  std::sort(names.begin(), names.end());
  std::string manifest;
  for (const std::string& f : names) {
    const std::string h = sha256_file((ctx.dir / f).string());
    res.manifest.push_back({f, h});
    manifest += fmt::format("{}  {}\n", h, f);
  }
  write_text((ctx.dir / "manifest.txt").string(), manifest);

  if (!ctx.failures.empty()) {
    res.status = 1;
    for (const std::string& f : ctx.failures) res.message += (res.message.empty() ? "" : "; ") + f;
  }
  return res;
}

}  // namespace fibergap
