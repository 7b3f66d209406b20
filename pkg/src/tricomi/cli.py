"""Command-line interface.

Subcommands: classify, verify-specfun, verify-kernels, solve-linear,
solve.  Effective option values resolve as flags over config file over
defaults, and every run echoes its effective configuration into the
manifest.  Exit codes: 0 success, 1 domain/validation error, 2 accuracy
or contraction failure (diagnostics are still written).  Every failure
path prints a machine-parseable line starting with "REASON:".
"""

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from . import admissibility, elliptic, hyperbolic, kernels, reports
from .errors import AccuracyError, ContractionError, DomainError, TricomiError
from .grid import (SpatialField, TimeGrid, TorusGrid, forward_transform,
                   lp_norm, sobolev_norm, write_field)
from .specfun import (DEFAULT_CONFIG, bessel_k, bessel_k_integral_oracle,
                      kummer_m, lambda_value, log_lambda)

_DEFAULTS = {
    "classify": {"n": 2, "l": 1, "s": "0.5", "mu": "1"},
    "verify-specfun": {"quick": False, "out_dir": "tricomi-out"},
    "verify-kernels": {"quick": False, "out_dir": "tricomi-out", "seed": 0,
                       "threads": 1},
    "solve-linear": {"side": "elliptic", "l": 1, "nu": 1.0, "grid": 32,
                     "period": 8.0, "t_end": 1.0, "p": 4.0, "panels": 6,
                     "nodes_per_panel": 6, "out_dir": "tricomi-out"},
    "solve": {"n": 2, "l": 1, "s": "0.5", "mu": "2", "t0": 0.4, "grid": 32,
              "period": 8.0, "f_preset": "power", "coupling": 1.0,
              "seed": 0, "out_dir": "tricomi-out", "picard_tol": 1e-9,
              "panels": 5, "nodes_per_panel": 6},
}


def _read_config(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DomainError(f"config line without '=': {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _effective(args, sub):
    """flags > config file > defaults; returns a plain dict."""
    cfg = dict(_DEFAULTS[sub])
    if getattr(args, "config", None):
        file_cfg = _read_config(args.config)
        for k, v in file_cfg.items():
            if k in cfg:
                cfg[k] = type(cfg[k])(v) if not isinstance(cfg[k], bool) \
                    else v.lower() in ("1", "true", "yes")
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["no_figures"] = bool(getattr(args, "no_figures", False))
    return cfg


def _build_parser():
    p = argparse.ArgumentParser(prog="tricomi", description=__doc__)
    p.add_argument("--config", help="flat key = value config file")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="exponent profile and iteration case")
    for flag in ("--s", "--mu"):
        c.add_argument(flag, type=str)
    c.add_argument("--n", type=int)
    c.add_argument("--l", type=int)

    v = sub.add_parser("verify-specfun", help="special-function residual report")
    v.add_argument("--quick", action="store_true", default=None)
    v.add_argument("--out-dir", dest="out_dir")
    v.add_argument("--no-figures", action="store_true")

    k = sub.add_parser("verify-kernels", help="kernel bound verification report")
    k.add_argument("--quick", action="store_true", default=None)
    k.add_argument("--seed", type=int)
    k.add_argument("--threads", type=int)
    k.add_argument("--out-dir", dest="out_dir")
    k.add_argument("--no-figures", action="store_true")

    sl = sub.add_parser("solve-linear", help="one-sided linear solve with reports")
    sl.add_argument("--side", choices=("elliptic", "hyperbolic"))
    sl.add_argument("--l", type=int)
    sl.add_argument("--nu", type=float)
    sl.add_argument("--grid", type=int)
    sl.add_argument("--period", type=float)
    sl.add_argument("--t-end", dest="t_end", type=float)
    sl.add_argument("--p", type=float)
    sl.add_argument("--panels", type=int)
    sl.add_argument("--nodes-per-panel", dest="nodes_per_panel", type=int)
    sl.add_argument("--out-dir", dest="out_dir")
    sl.add_argument("--no-figures", action="store_true")

    s = sub.add_parser("solve", help="two-sided semilinear solve")
    s.add_argument("--n", type=int)
    s.add_argument("--l", type=int)
    s.add_argument("--s", type=str)
    s.add_argument("--mu", type=str)
    s.add_argument("--T0", dest="t0", type=float)
    s.add_argument("--grid", type=int)
    s.add_argument("--period", type=float)
    s.add_argument("--f-preset", dest="f_preset",
                   choices=("zero", "linear", "power", "manufactured"))
    s.add_argument("--coupling", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--picard-tol", dest="picard_tol", type=float)
    s.add_argument("--panels", type=int)
    s.add_argument("--nodes-per-panel", dest="nodes_per_panel", type=int)
    s.add_argument("--out-dir", dest="out_dir")
    s.add_argument("--no-figures", action="store_true")
    return p


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def _cmd_classify(cfg):
    profile = admissibility.exponent_profile(
        cfg["n"], cfg["l"], Fraction(cfg["s"]), Fraction(cfg["mu"]))
    print(f"parameters: n={cfg['n']} l={cfg['l']} s={cfg['s']} mu={cfg['mu']}")
    for name, val in profile.table():
        print(f"  {name:>6} = {val}")
    c1 = admissibility.c1_regularity_exponents(cfg["l"])
    print(f"  C1 trace loss: stated {c1['stated_loss']} "
          f"(elliptic-side proof value {c1['elliptic_side_loss']}; "
          f"hyperbolic half is binding)")
    for fl in profile.flags:
        print(f"  note: {fl}")
    gate = admissibility.solvability_gate(profile)
    if not gate.admissible:
        print(f"gate: REJECTED ({gate.reason})")
        print(f"REASON: {gate.reason}")
        return 1
    print(f"gate: admissible ({gate.reason})")
    label = admissibility.classify_case(profile)
    print(f"case: {label.case_id} (regime {label.regime}), "
          f"target space {label.target_space}")
    for note in label.notes:
        print(f"  note: {note}")
    return 0


# ---------------------------------------------------------------------------
# verify-specfun
# ---------------------------------------------------------------------------

def _richardson_second_derivative(f, t, h):
    def d2(hh):
        return (f(t + hh) - 2.0 * f(t) + f(t - hh)) / (hh * hh)

    return (4.0 * d2(h / 2) - d2(h)) / 3.0


def _cmd_verify_specfun(cfg):
    out = reports.ensure_dir(cfg["out_dir"])
    rows = []
    failures = 0
    m_list = (0, 1) if cfg["quick"] else (0, 1, 3, 5)
    t_grid = np.geomspace(1e-3, 10.0, 12 if cfg["quick"] else 24)

    for m in m_list:
        for t in t_grid:
            lam = lambda_value(m, t)
            if lam > 1e-290:
                d2 = _richardson_second_derivative(lambda x: lambda_value(m, x),
                                                   t, 1e-3 * max(t, 0.05))
                resid = abs(d2 - t ** m * lam) / (1.0 + abs(d2))
            else:
                # log form: (log lam)'' + ((log lam)')^2 = t^m
                h = 1e-3 * t
                lg = lambda x: log_lambda(m, x)
                d1 = (lg(t + h) - lg(t - h)) / (2 * h)
                d2 = _richardson_second_derivative(lg, t, h)
                resid = abs(d2 + d1 * d1 - t ** m) / (1.0 + t ** m)
            rows.append(["lambda_ode", m, t, resid])
            failures += resid > 1e-6

    for nu in (0.25, 1.0 / 3.0, 0.5, 0.75):
        for x in (0.3, 1.0, 2.0, 5.0):
            gap = abs(bessel_k(nu, x) - bessel_k_integral_oracle(nu, x)) / bessel_k(nu, x)
            rows.append(["bessel_k_vs_integral", nu, x, gap])
            failures += gap > 1e-9

    for l in (1, 2):
        g0 = (2 * l - 1) / (2.0 * (2 * l + 1))
        for (a, b) in ((g0, 2 * g0), (1 - g0, 2 * (1 - g0))):
            for y in np.linspace(0.5, 30.0, 8 if cfg["quick"] else 16):
                resid = _kummer_ode_residual(a, b, y)
                rows.append(["kummer_ode", f"a={a:.6g};b={b:.6g}", y, resid])
                failures += resid > 1e-6
    for y in (1.0, 10.0, 25.0):
        gap = abs(kummer_m(0.5, 0.5, 1j * y) - np.exp(1j * y))
        rows.append(["kummer_exp_identity", "a=b=0.5", y, gap])
        failures += gap > 1e-9

    path = os.path.join(out, "specfun_residuals.csv")
    reports.write_csv(path, ["function", "m_or_params", "t_or_z", "residual"], rows)
    print(f"wrote {path} ({len(rows)} rows)")
    if not cfg["no_figures"]:
        lam_rows = [r for r in rows if r[0] == "lambda_ode"]
        reports.scatter_figure(os.path.join(out, "specfun_lambda_residuals.png"),
                               [r[2] for r in lam_rows],
                               [max(r[3], 1e-18) for r in lam_rows],
                               "t", "scaled ODE residual",
                               "profile ODE residuals", hline=1e-6)
    if failures:
        print(f"REASON: {failures} specfun residuals exceeded tolerance")
        return 2
    return 0


def _kummer_ode_residual(a, b, y, h=None):
    if h is None:
        h = 0.03 if y < 4 else 0.1
    f = lambda yy: kummer_m(a, b, 1j * yy)
    d1 = (f(y - 2 * h) - 8 * f(y - h) + 8 * f(y + h) - f(y + 2 * h)) / (12 * h) / 1j
    d2 = -(-f(y - 2 * h) + 16 * f(y - h) - 30 * f(y) + 16 * f(y + h)
           - f(y + 2 * h)) / (12 * h * h)
    z = 1j * y
    r = z * d2 + (b - z) * d1 - a * f(y)
    return abs(r) / (1.0 + abs(z * d2))


# ---------------------------------------------------------------------------
# verify-kernels
# ---------------------------------------------------------------------------

def _cmd_verify_kernels(cfg):
    out = reports.ensure_dir(cfg["out_dir"])
    n_cal, n_val = (16, 32) if cfg["quick"] else (60, 120)
    report = kernels.run_kernel_verification(
        seed=cfg["seed"], n_calibration=n_cal, n_validation=n_val,
        m_values=(0, 1) if cfg["quick"] else (0, 1, 3),
        weighted=((1, 0.5),) if cfg["quick"] else ((1, 0.5), (3, 1.0)),
        threads=cfg["threads"])

    rows = []
    for r in report.rows:
        rows.append([r.get("family", ""), r["m"], r.get("nu", ""), r["a"], r["b"],
                     r["s"], r.get("measured", r.get("full", "")),
                     r.get("bound", r.get("p6", "")), r["ratio"]])
    csv_path = os.path.join(out, "kernel_probes.csv")
    reports.write_csv(csv_path,
                      ["family", "m", "nu", "a", "b", "s", "measured", "bound",
                       "ratio"], rows)

    # row-integral identity block
    id_rows = []
    for m in ((0, 1) if cfg["quick"] else (0, 1, 3)):
        for ts in np.geomspace(0.1, 5.0, 8):
            meas, exact = kernels.check_row_integral(m, float(ts), 1.0)
            id_rows.append([m, float(ts), meas, exact, abs(meas - exact)])
    reports.write_csv(os.path.join(out, "kernel_row_identity.csv"),
                      ["m", "ts", "measured", "exact", "abs_error"], id_rows)

    summary = report.summary_lines()
    with open(os.path.join(out, "kernel_summary.txt"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    for line in summary:
        print(line)

    if not cfg["no_figures"]:
        reports.scatter_figure(os.path.join(out, "kernel_ratios.png"),
                               list(range(len(rows))),
                               [max(float(r[-1]), 1e-18) for r in rows],
                               "probe index", "measured / fitted bound",
                               "validation ratios", hline=1.0)
    bad = [c.name for c in report.checks if not c.passed]
    if bad:
        print(f"REASON: bound validation failed for {', '.join(bad)}")
        return 2
    return 0


# ---------------------------------------------------------------------------
# solve-linear
# ---------------------------------------------------------------------------

def _linear_source(grid, t_end):
    from .semilinear import _RampProfile, bump_field

    B = bump_field(grid)
    ramp = _RampProfile(0.5 * t_end)

    def g(tau):
        return SpatialField(grid, ramp.value(tau - 0.5 * t_end) * B.values)

    return g


def _cmd_solve_linear(cfg):
    out = reports.ensure_dir(cfg["out_dir"])
    grid = TorusGrid(2, cfg["grid"], cfg["period"])
    l = cfg["l"]
    m = 2 * l - 1
    t_end = cfg["t_end"]
    tgrid = TimeGrid(0.0, t_end, cfg["panels"], cfg["nodes_per_panel"])
    g = _linear_source(grid, t_end)
    norm_rows = []
    if cfg["side"] == "elliptic":
        nu = cfg["nu"]
        if not 0 <= nu <= m:
            raise DomainError(f"nu={nu} outside [0, m={m}]")
        sol = elliptic.solve_inhomogeneous(m, nu, g, grid, tgrid=tgrid)
        for i, tau in enumerate(sol.eval_times):
            f = sol.snapshots[i]
            F = forward_transform(f)
            norm_rows.append([float(tau), lp_norm(f, 2), lp_norm(f, cfg["p"]),
                              sobolev_norm(F, 1.0)])
            write_field(os.path.join(out, f"elliptic_snapshot_{i:03d}.fld"), f)
        write_field(os.path.join(out, "elliptic_initial_slope.fld"),
                    sol.initial_slope)
    else:
        from .semilinear import bump_field

        rule = tgrid.rule()
        rho = grid.freq_modulus().ravel()
        f_hats = np.array([forward_transform(g(t)).values.ravel()
                           for t in rule.nodes])
        phi = bump_field(grid)
        phi_hat = forward_transform(phi).values.ravel()
        psi_hat = 0.4 * phi_hat
        bps = np.array(tgrid.breakpoints)
        cache = hyperbolic.SymbolCache(l, bps, rho)
        Tf = hyperbolic.duhamel_T(l, f_hats, tgrid, eval_times=bps, rho=rho)
        for i, t in enumerate(bps):
            hat = cache.v1_row(i) * phi_hat + cache.v2_row(i) * psi_hat + Tf[i]
            F_ = hat.reshape(grid.shape)
            f = SpatialField(grid, np.fft.ifftn(F_, norm="ortho").real)
            from .grid import SpectralField

            norm_rows.append([float(t), lp_norm(f, 2), lp_norm(f, cfg["p"]),
                              sobolev_norm(SpectralField(grid, F_), 1.0)])
            write_field(os.path.join(out, f"hyperbolic_snapshot_{i:03d}.fld"), f)

    csv_path = os.path.join(out, "norms.csv")
    reports.write_csv(csv_path, ["tau", "L2", "Lp", "Hs"], norm_rows)
    print(f"wrote {csv_path} ({len(norm_rows)} snapshots)")
    if not cfg["no_figures"]:
        reports.line_figure(os.path.join(out, "norms.png"),
                            [r[0] for r in norm_rows],
                            {"L2": [r[1] for r in norm_rows],
                             "Lp": [r[2] for r in norm_rows],
                             "Hs": [r[3] for r in norm_rows]},
                            "tau", "norm", f'{cfg["side"]} linear solve norms')
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _cmd_solve(cfg):
    from . import semilinear as sl

    out = reports.ensure_dir(cfg["out_dir"])
    if cfg["n"] != 2:
        raise DomainError("the solve CLI currently drives 2-D grids (n=2)")
    grid = TorusGrid(2, cfg["grid"], cfg["period"])
    rng = np.random.default_rng(cfg["seed"])
    s_frac = Fraction(cfg["s"])
    mu_frac = Fraction(cfg["mu"])

    u_exact = None
    if cfg["f_preset"] == "manufactured":
        problem, u_exact, _ = sl.manufactured_problem(
            grid, cfg["l"], cfg["t0"], s=float(s_frac), coupling=cfg["coupling"])
    else:
        phi = sl.bump_field(grid, amplitude=1.0, band_limit=max(4, cfg["grid"] // 6))
        f = sl.preset_nonlinearity(cfg["f_preset"], grid, mu=float(mu_frac),
                                   coupling=cfg["coupling"])
        problem = sl.ProblemSpec(grid, cfg["l"], float(s_frac), phi, f)

    profile = admissibility.exponent_profile(cfg["n"], cfg["l"], s_frac, mu_frac)
    gate = admissibility.solvability_gate(profile)
    if not gate.admissible:
        raise DomainError(f"inadmissible profile: {gate.reason}")

    config = sl.SolveConfig(T0=cfg["t0"], picard_tol=cfg["picard_tol"],
                            panels=cfg["panels"],
                            nodes_per_panel=cfg["nodes_per_panel"])
    sol = sl.solve_mixed(problem, config)

    norm_rows = [[r["t"], r["L2"], r.get("Lp0", ""), r["Lp1"], r["Hs"]]
                 for r in sol.norms]
    reports.write_csv(os.path.join(out, "norms.csv"),
                      ["t", "L2", "Lp0", "Lp1", "Hs"], norm_rows)
    trace_rows = []
    for side, trace in (("elliptic", sol.elliptic.trace),
                        ("hyperbolic", sol.hyperbolic.trace)):
        for r in trace.rows:
            trace_rows.append([side, r["iter"], r["diff"],
                               "" if r["ratio"] is None else r["ratio"]])
    reports.write_csv(os.path.join(out, "trace.csv"),
                      ["side", "iter", "diff_norm", "ratio"], trace_rows)
    for i, (t, snap) in enumerate(zip(sol.times, sol.snapshots)):
        write_field(os.path.join(out, f"snapshot_{i:03d}.fld"), snap)
    write_field(os.path.join(out, "slope_at_zero.fld"), sol.slope_at_zero)

    manifest = {
        "command": "solve", "n": cfg["n"], "l": cfg["l"], "s": cfg["s"],
        "mu": cfg["mu"], "grid": cfg["grid"], "period": cfg["period"],
        "f_preset": cfg["f_preset"], "coupling": cfg["coupling"],
        "seed": cfg["seed"], "T0_requested": cfg["t0"], "T0_final": sol.T0,
        "case": sol.case.case_id, "regime": sol.case.regime,
        "target_space": sol.case.target_space,
        "elliptic_fitted_ratio": sol.elliptic.trace.fitted_ratio(),
        "hyperbolic_fitted_ratio": sol.hyperbolic.trace.fitted_ratio(),
        "patch_value_gap": sol.patch_value_gap,
        "patch_slope_gap": sol.patch_slope_gap,
        "picard_tol": cfg["picard_tol"],
    }
    if u_exact is not None:
        errs = [lp_norm(SpatialField(grid, f.values - u_exact(t)), 2)
                for t, f in zip(sol.times, sol.snapshots)]
        manifest["manufactured_max_L2_error"] = float(max(errs))
    reports.write_manifest(os.path.join(out, "manifest.txt"), manifest)
    print(f"solved: T0={sol.T0} case={sol.case.case_id} "
          f"ratios=({manifest['elliptic_fitted_ratio']}, "
          f"{manifest['hyperbolic_fitted_ratio']})")
    if not cfg["no_figures"]:
        reports.line_figure(os.path.join(out, "norms.png"),
                            [r[0] for r in norm_rows],
                            {"L2": [r[1] for r in norm_rows],
                             "Lp1": [r[3] for r in norm_rows]},
                            "t", "norm", "mixed solution norm series")
        reports.trace_figure(os.path.join(out, "trace.png"),
                             {"elliptic": sol.elliptic.trace,
                              "hyperbolic": sol.hyperbolic.trace},
                             "fixed-point difference norms")
    return 0


_COMMANDS = {
    "classify": _cmd_classify,
    "verify-specfun": _cmd_verify_specfun,
    "verify-kernels": _cmd_verify_kernels,
    "solve-linear": _cmd_solve_linear,
    "solve": _cmd_solve,
}


def parse_and_dispatch(argv):
    parser = _build_parser()
    args = parser.parse_args(argv)
    cfg = _effective(args, args.command)
    try:
        return _COMMANDS[args.command](cfg)
    except DomainError as e:
        print(f"REASON: {e}")
        return 1
    except (AccuracyError, ContractionError) as e:
        print(f"REASON: {e}")
        return 2
    except TricomiError as e:
        print(f"REASON: {e}")
        return 2


def main():
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
