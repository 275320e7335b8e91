#include "fibergap/fibergap.h"

#include <cstdlib>
#include <cstring>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "fibergap/config.hpp"
#include "fibergap/error.hpp"
#include "fibergap/experiment.hpp"
#include "fibergap/parallel.hpp"
#include "fibergap/selftest.hpp"
#include "fibergap/spectral.hpp"

struct fg_atoms {
  fibergap::SignedAtoms mu;
};
struct fg_system {
  fibergap::FiberSystem F;
};
struct fg_measure {
  fibergap::DisintegratedMeasure mu;
};

namespace {

thread_local std::string g_last_error;

fg_status to_status(fibergap::ErrorCode c) {
  // ErrorCode and fg_status share their order, offset by FG_OK.
  return static_cast<fg_status>(static_cast<int>(c) + 1);
}

template <typename Fn>
fg_status guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const fibergap::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FG_INTERNAL_ERROR;
  }
}

fg_status null_arg(const char* name) {
  g_last_error = fmt::format("null argument: {}", name);
  return FG_NULL_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* fg_status_name(fg_status s) {
  switch (s) {
    case FG_OK: return "Ok";
    case FG_NULL_ARGUMENT: return "NullArgument";
    case FG_INTERNAL_ERROR: return "InternalError";
    default:
      if (s > FG_OK && s <= FG_IO_ERROR) {
        static thread_local std::string name;
        name = std::string(fibergap::error_name(static_cast<fibergap::ErrorCode>(s - 1)));
        return name.c_str();
      }
      return "Unknown";
  }
}

const char* fg_last_error(void) { return g_last_error.c_str(); }

fg_status fg_atoms_create(fg_atoms** out) {
  if (!out) return null_arg("out");
  return guard([&] {
    *out = new fg_atoms{};
    return FG_OK;
  });
}

fg_status fg_atoms_add(fg_atoms* mu, double pos, double weight) {
  if (!mu) return null_arg("mu");
  return guard([&] {
    if (!(pos >= 0.0 && pos <= 1.0) || !std::isfinite(weight)) {
      throw fibergap::Error(fibergap::ErrorCode::kBadInput, "atom outside [0,1] or non-finite weight");
    }
    mu->mu.add(pos, weight);
    return FG_OK;
  });
}

fg_status fg_atoms_bl_norm(const fg_atoms* mu, double* out) {
  if (!mu || !out) return null_arg("mu/out");
  return guard([&] {
    *out = fibergap::bl_norm(mu->mu);
    return FG_OK;
  });
}

fg_status fg_atoms_bl_norm_oracle(const fg_atoms* mu, size_t grid_n, double* out) {
  if (!mu || !out) return null_arg("mu/out");
  return guard([&] {
    *out = fibergap::bl_norm_oracle(mu->mu, grid_n);
    return FG_OK;
  });
}

fg_status fg_atoms_cdf_distance(const fg_atoms* a, const fg_atoms* b, double* out) {
  if (!a || !b || !out) return null_arg("a/b/out");
  return guard([&] {
    *out = fibergap::bl_distance_equal_mass(a->mu, b->mu);
    return FG_OK;
  });
}

void fg_atoms_destroy(fg_atoms* mu) { delete mu; }

fg_status fg_system_create(const char* family, double kappa, double alpha, const double* q, size_t q_len,
                           fg_system** out) {
  if (!family || !out || (!q && q_len)) return null_arg("family/q/out");
  return guard([&] {
    fibergap::SystemSpec spec = fibergap::default_spec(family);
    spec.kappa = kappa;
    spec.alpha = alpha;
    if (q_len) spec.q.assign(q, q + q_len);
    *out = new fg_system{fibergap::make_system(spec)};
    return FG_OK;
  });
}

fg_status fg_system_create_default(const char* family, fg_system** out) {
  if (!family || !out) return null_arg("family/out");
  return guard([&] {
    *out = new fg_system{fibergap::make_system(fibergap::default_spec(family))};
    return FG_OK;
  });
}

void fg_system_destroy(fg_system* s) { delete s; }

fg_status fg_measure_lebesgue(size_t n, size_t atoms, fg_measure** out) {
  if (!out) return null_arg("out");
  return guard([&] {
    if (n < 1 || atoms < 1) throw fibergap::Error(fibergap::ErrorCode::kBadInput, "n and atoms must be positive");
    *out = new fg_measure{fibergap::lebesgue_square(n, atoms)};
    return FG_OK;
  });
}

fg_status fg_measure_lebesgue_dirac(size_t n, double c, fg_measure** out) {
  if (!out) return null_arg("out");
  return guard([&] {
    if (n < 1) throw fibergap::Error(fibergap::ErrorCode::kBadInput, "n must be positive");
    *out = new fg_measure{fibergap::lebesgue_times_dirac(n, c)};
    return FG_OK;
  });
}

fg_status fg_transfer(const fg_system* s, const fg_measure* mu, int steps, fg_measure** out) {
  if (!s || !mu || !out) return null_arg("s/mu/out");
  return guard([&] {
    if (steps < 0) throw fibergap::Error(fibergap::ErrorCode::kBadInput, "negative step count");
    const fibergap::TransferOperator op(s->F, mu->mu.size());
    auto run = fibergap::transfer_n(op, mu->mu, steps, s->F.eta, false);
    *out = new fg_measure{std::move(run.measure)};
    return FG_OK;
  });
}

fg_status fg_invariant_measure(const fg_system* s, size_t n, double tol, int n_max, fg_measure** out,
                               double* residual) {
  if (!s || !out) return null_arg("s/out");
  return guard([&] {
    const fibergap::TransferOperator op(s->F, n);
    auto r = fibergap::invariant_measure(op, tol, n_max);
    if (residual) *residual = r.residual;
    *out = new fg_measure{std::move(r.measure)};
    if (!r.converged) {
      g_last_error = fmt::format("NotConverged: increment above {} after {} steps", tol, r.steps);
      return FG_NOT_CONVERGED;
    }
    return FG_OK;
  });
}

fg_status fg_measure_norms(const fg_measure* mu, fg_norms* out) {
  if (!mu || !out) return null_arg("mu/out");
  return guard([&] {
    out->l1 = fibergap::norm_weak_L1(mu->mu);
    out->linf = fibergap::norm_Linf(mu->mu);
    out->s1 = fibergap::norm_S1(mu->mu);
    out->var = fibergap::path_variation(mu->mu);
    out->mass = mu->mu.total_mass();
    out->atoms = mu->mu.atom_count();
    return FG_OK;
  });
}

fg_status fg_measure_distance_l1(const fg_measure* a, const fg_measure* b, double* out) {
  if (!a || !b || !out) return null_arg("a/b/out");
  return guard([&] {
    *out = fibergap::distance_L1(a->mu, b->mu);
    return FG_OK;
  });
}

fg_status fg_measure_write_csv(const fg_measure* mu, const char* path) {
  if (!mu || !path) return null_arg("mu/path");
  return guard([&] {
    fibergap::write_measure_csv(mu->mu, path);
    return FG_OK;
  });
}

void fg_measure_destroy(fg_measure* mu) { delete mu; }

fg_status fg_validate_config(const char* path) {
  if (!path) return null_arg("path");
  return guard([&] {
    fibergap::load_config(path);
    return FG_OK;
  });
}

fg_status fg_run_experiment(const char* config_path, const char* out_dir, char** manifest) {
  if (!config_path) return null_arg("config_path");
  return guard([&] {
    const fibergap::ExperimentConfig cfg = fibergap::load_config(config_path);
    const std::string dir = out_dir ? out_dir : cfg.output;
    const fibergap::RunResult r = fibergap::run_experiment(cfg, dir);
    if (manifest) {
      std::string text;
      for (const auto& e : r.manifest) text += fmt::format("{}  {}\n", e.sha256, e.file);
      *manifest = dup(text);
    }
    if (r.status != 0) {
      g_last_error = r.message;
      return FG_EXPERIMENT_ERROR;
    }
    return FG_OK;
  });
}

fg_status fg_selftest(char** report) {
  return guard([&] {
    const auto rows = fibergap::norm_selftest();
    std::string text = "check,cases,max_error,bound,pass\n";
    bool ok = true;
    for (const auto& r : rows) {
      text += fmt::format("{},{},{},{},{}\n", r.check, r.cases, r.max_error, r.bound, r.pass ? 1 : 0);
      ok = ok && r.pass;
    }
    if (report) *report = dup(text);
    if (!ok) {
      g_last_error = "norm selftest failed";
      return FG_EXPERIMENT_ERROR;
    }
    return FG_OK;
  });
}

void fg_set_threads(unsigned n) { fibergap::set_worker_count(n); }

void fg_string_free(char* s) { std::free(s); }

}  // extern "C"
