"""Command-line front end: deterministic batch experiments.

Subcommands: solve, recover, verify-spectrum, mlf-eval, asymptotics,
verify-phi. Exit codes: 0 success, 2 configuration error, 3 numerical
failure (the message names the violated contract). Artifacts are written
atomically (temp file + rename); identical config and seed give
byte-identical data artifacts, while the manifest carries wall-times and
is excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
import warnings

import numpy as np

from . import __version__, kernel_backend
from .asymptote import leading_term, leading_term_per_cluster, remainder_fit
from .config import (RunConfig, config_digest, load_config, serialize_config,
                     to_problem_spec)
from .errors import (ConditionViolatedWarning, ConfigError, DegenerateSeries,
                     FracorderError, SpecError, WindowSuspect)
from .inversion import (recover_order_fit, recover_order_loglog,
                        uniqueness_gap, with_noise)
from .mlf import MlfParams, mlf_eval
from .operator import (check_condition_18, check_ellipticity, discretize,
                       interpolation_weights, poincare_constant)
from .solver import (ObservationSeries, default_grading, field_to_csv,
                     log_times, observe, series_from_csv, series_to_csv,
                     series_to_json, solve_l1, solve_spectral)
from .spectral import eigendecompose
from .theta import build_theta, phi_normalized_exact, phi_sequence


def _atomic_write(path: str, writer) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(path: str, payload) -> None:
    _atomic_write(path, lambda p: open(p, "w").write(
        json.dumps(payload, indent=1, sort_keys=True) + "\n"))


def _manifest(cfg: RunConfig, command: str, timings: dict) -> dict:
    import scipy

    return {
        "command": command,
        "config_sha256": config_digest(cfg),
        "fracorder_version": __version__,
        "kernel_backend": kernel_backend,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "timings_s": timings,
    }


def _pipeline(cfg: RunConfig):
    """Config -> (spec, operator, decomposition, initial vector)."""
    spec = to_problem_spec(cfg)
    op = discretize(spec)
    a = spec.initial_on(op)
    dec = eigendecompose(op)
    return spec, op, dec, a


def _observation(cfg: RunConfig):
    spec, op, dec, a = _pipeline(cfg)
    times = log_times(cfg.solver_t_min, cfg.solver_t_max,
                      cfg.solver_points_per_decade)
    alpha = float(spec.alpha)
    if cfg.solver_method == "l1":
        grading = cfg.solver_grading or default_grading(alpha)
        f = solve_l1(op, a, alpha, cfg.solver_t_final, cfg.solver_n_steps,
                     grading)
    else:
        f = solve_spectral(dec, a, alpha, times)
    return spec, op, dec, a, f, observe(f, spec.x0)


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    spec, op, dec, a, f, obs = _observation(cfg)
    elapsed = time.perf_counter() - t0
    out = cfg.output_directory
    timings = {"solve": round(elapsed, 6)}
    if "csv" in cfg.output_formats:
        _atomic_write(os.path.join(out, "solution.csv"),
                      lambda p: field_to_csv(f, p))
        _atomic_write(os.path.join(out, "observation.csv"),
                      lambda p: series_to_csv(obs, p))
    if "json" in cfg.output_formats:
        _atomic_write(os.path.join(out, "observation.json"),
                      lambda p: series_to_json(obs, p))
    _write_json(os.path.join(out, "manifest.json"),
                _manifest(cfg, "solve", timings))
    print(f"solved {cfg.solver_method} on {op.size} nodes, "
          f"{f.times.size} output times -> {out}/")
    return 0


def _recover_payload(obs: ObservationSeries, cfg: RunConfig) -> dict:
    window = cfg.recovery_window
    rng = np.random.default_rng(cfg.seed)
    runs = []
    for s in range(cfg.recovery_seeds):
        series = obs if cfg.recovery_noise == 0.0 else with_noise(
            obs, cfg.recovery_noise, rng)
        r0 = recover_order_loglog(series, window)
        entry = {"loglog": r0.to_dict()}
        try:
            r1 = recover_order_fit(series, r0)
            entry["two_term"] = r1.to_dict()
            entry["alpha_hat"] = r1.alpha_hat
        except WindowSuspect as exc:
            entry["two_term_error"] = str(exc)
            entry["alpha_hat"] = r0.alpha_hat
        runs.append(entry)
    payload = {"runs": runs, "noise": cfg.recovery_noise,
               "seeds": cfg.recovery_seeds,
               "alpha_hat": runs[0]["alpha_hat"]}
    if cfg.recovery_seeds > 1:
        hats = [r["alpha_hat"] for r in runs]
        payload["alpha_hat_mean"] = float(np.mean(hats))
        payload["alpha_hat_std"] = float(np.std(hats))
    return payload


def cmd_recover(args) -> int:
    path = args.input
    if path.endswith(".csv"):
        obs = series_from_csv(path)
        cfg = RunConfig()
        payload = _recover_payload(obs, cfg)
    else:
        cfg = load_config(path)
        spec, op, dec, a, f, obs = _observation(cfg)
        payload = _recover_payload(obs, cfg)
        out = cfg.output_directory
        _write_json(os.path.join(out, "recovery.json"), payload)
        _write_json(os.path.join(out, "manifest.json"),
                    _manifest(cfg, "recover", {}))
    print(json.dumps(payload, indent=1, sort_keys=True))
    return 0


def cmd_verify_spectrum(args) -> int:
    cfg = load_config(args.config)
    spec = to_problem_spec(cfg)
    violated = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cond = check_condition_18(spec)
        sigma = check_ellipticity(spec)
        op = discretize(spec)
        dec = eigendecompose(op)
        for w in caught:
            if issubclass(w.category, ConditionViolatedWarning):
                violated = True
            print(f"warning: {w.message}")
    eigs = np.concatenate([c.members for c in dec.clusters])
    min_re = float(eigs.real.min())
    n = dec.size
    sum_resid = float(np.linalg.norm(dec.projector_sum() - np.eye(n), 2))
    idem = max(float(np.linalg.norm(c.P @ c.P - c.P, 2)) for c in dec.clusters)
    print(f"nodes: {n}")
    print(f"ellipticity sigma: {sigma:.6g}")
    print(f"poincare constant: {poincare_constant(spec):.6g}")
    print(f"condition-(positivity) value: {cond:.6g}"
          + ("  [VIOLATED]" if violated else ""))
    print(f"min Re lambda: {min_re:.6g}")
    print(f"projector sum residual: {sum_resid:.3e}")
    print(f"worst idempotence residual: {idem:.3e}")
    if args.export:
        _atomic_write(args.export, dec.save)
        print(f"decomposition dump -> {args.export}")
    if not violated and min_re <= 0.0:
        print("CONTRACT VIOLATION: positivity condition holds but "
              "an eigenvalue has Re lambda <= 0", file=sys.stderr)
        return 3
    return 0


def cmd_mlf_eval(args) -> int:
    params = MlfParams(args.alpha, args.beta)
    z = complex(args.z_re, args.z_im)
    v = mlf_eval(params, z, tol=args.tol)
    if z.imag == 0 and abs(v.imag) < 1e-14 * max(abs(v.real), 1e-300):
        print(f"{v.real:.17g}")
    else:
        print(f"{v.real:.17g}{v.imag:+.17g}j")
    return 0


def cmd_asymptotics(args) -> int:
    cfg = load_config(args.config)
    spec, op, dec, a, f, obs = _observation(cfg)
    alpha = float(spec.alpha)
    iw = interpolation_weights(op, spec.x0)
    lead = leading_term(dec, a, iw, alpha)
    per = leading_term_per_cluster(dec, a, iw, alpha)
    direct = np.linalg.solve(op.matrix, a)
    direct_val = float(direct[iw[0]] @ iw[1]) / math.gamma(1.0 - alpha)
    t_min = obs.times[-1] / 100.0
    report = {
        "alpha": alpha,
        "leading_coeff": lead,
        "leading_coeff_direct_solve": direct_val,
        "leading_agreement_rel": abs(lead - direct_val) / max(abs(direct_val),
                                                              1e-300),
        "per_cluster_first_5": [float(v) for v in per[:5]],
    }
    try:
        rf = remainder_fit(obs, lead, alpha, t_min)
        report["remainder_scale"] = rf.scale
        report["remainder_slope"] = rf.slope
        report["remainder_slope_bound"] = -2.0 * alpha
    except FracorderError as exc:
        report["remainder_error"] = str(exc)
    print(json.dumps(report, indent=1, sort_keys=True))
    out = cfg.output_directory
    _write_json(os.path.join(out, "asymptotics.json"), report)
    return 0


def cmd_verify_phi(args) -> int:
    table = build_theta(args.alpha, args.max_j)
    phi = phi_sequence(table)
    exact = phi_normalized_exact(table)
    g = math.gamma(1.0 - args.alpha)
    print(f"alpha = {args.alpha}, Gamma(1-alpha) = {g:.12g}")
    ok = True
    for j, (v, ex) in enumerate(zip(phi.values, exact), start=1):
        dev = abs(v * g - 1.0)
        exact_ok = (ex == 1)
        ok = ok and exact_ok and dev <= 1e-8
        print(f"j={j:2d}  Phi_j*Gamma(1-a)-1 = {dev:9.2e}   "
              f"exact: {'1' if exact_ok else str(ex)}")
    if not ok:
        print("collapse identity FAILED", file=sys.stderr)
        return 3
    print("collapse identity holds (float <= 1e-8, rational exact)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fracorder",
        description="time-fractional advection-diffusion runs and "
                    "fractional-order recovery")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the forward solver per config")
    s.add_argument("config")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("recover", help="recover alpha from a config run "
                                       "or an observation CSV")
    s.add_argument("input")
    s.set_defaults(fn=cmd_recover)

    s = sub.add_parser("verify-spectrum",
                       help="report spectral positivity diagnostics")
    s.add_argument("config")
    s.add_argument("--export", default="",
                   help="write the decomposition dump (.npz)")
    s.set_defaults(fn=cmd_verify_spectrum)

    s = sub.add_parser("mlf-eval", help="evaluate E_{alpha,beta}(z)")
    s.add_argument("alpha", type=float)
    s.add_argument("beta", type=float)
    s.add_argument("z_re", type=float)
    s.add_argument("z_im", type=float, nargs="?", default=0.0)
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(fn=cmd_mlf_eval)

    s = sub.add_parser("asymptotics",
                       help="leading long-time term and remainder fit")
    s.add_argument("config")
    s.set_defaults(fn=cmd_asymptotics)

    s = sub.add_parser("verify-phi",
                       help="check the collapse identity Phi_j = Phi_1")
    s.add_argument("alpha", type=float)
    s.add_argument("--max-j", type=int, default=10)
    s.set_defaults(fn=cmd_verify_phi)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SpecError, FileNotFoundError, DegenerateSeries) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FracorderError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
