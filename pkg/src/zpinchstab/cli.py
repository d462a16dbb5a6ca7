"""Command-line interface: subcommand dispatch and structured outputs.

Every emitted file embeds the config hash; JSON reports share a common
envelope (artifact version, config echo, null timestamp) and CSV files
carry a `# config_sha256=...` comment line above the header.  Outputs are
byte-identical across runs with the same config and seeds.  Log verbosity
is controlled only by the ZPINCHSTAB_LOG environment variable.

Exit codes: 0 ok, 1 validation problem, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .equilibrium import check_admissibility
from .errors import (
    BadGrading,
    InsufficientModes,
    InvalidGrid,
    ModeSpaceMismatch,
    NegativeFieldSquare,
    NonAdmissibleProfile,
    NonPositiveViscosity,
    ParseError,
    ValidationError,
    ZpinchError,
)
from .evolve import growth_bound_check, integrate
from .forms import ModePair, assemble_mode_forms, vacuum_operator
from .growthrate import lambda_curve, solve_fixed_point
from .mesh import make_grid, plasma_space, quadrature, vacuum_space
from .eigensolver import smallest_eigenpair, verify_minimizer_euler_lagrange
from .scan import decay_check, dissipation_scaling_check, scan_modes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

_VALIDATION_ERRORS = (
    ParseError,
    ValidationError,
    NonAdmissibleProfile,
    NonPositiveViscosity,
    NegativeFieldSquare,
    InvalidGrid,
    BadGrading,
    ModeSpaceMismatch,
)


def _fmt(value) -> str:
    """Fixed 17-significant-digit text for floats; plain text otherwise."""
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _write_csv(path: Path, cfg: RunConfig, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(f"# config_sha256={cfg.sha256()}\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    envelope = {
        "artifact_version": __version__,
        "config_sha256": cfg.sha256(),
        "config": cfg.as_dict(),
        "timestamp": None,
        "payload": payload,
    }
    with open(path, "w") as handle:
        json.dump(envelope, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _mode_forms(cfg: RunConfig, eq, m: int, k: int):
    """Assemble the forms of a single mode on the configured meshes."""
    grid = make_grid("plasma", cfg.n_elements_plasma, cfg.grading_ratio, r0=eq.r0)
    space = plasma_space(grid, cfg.fem_order, m)
    vac = None
    if m != 0:
        vgrid = make_grid(
            "vacuum", cfg.n_elements_vacuum, cfg.grading_ratio, r0=eq.r0, rw=eq.rw
        )
        vac = vacuum_space(vgrid, cfg.fem_order)
    return assemble_mode_forms(
        eq, space, ModePair(m, k), cfg.epsilon, cfg.delta, vac_space=vac
    )


def _solver_kwargs(cfg: RunConfig) -> dict:
    return dict(
        s_max=cfg.s_max,
        lambda_zero_tol=cfg.lambda_zero_tol,
        eig_tol=cfg.eig_tol,
        eig_max_iter=cfg.eig_max_iter,
        dense_threshold=cfg.dense_threshold,
        seed=cfg.eigen_seed,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_equilibrium(cfg: RunConfig, args) -> int:
    eq = cfg.build_equilibrium()
    r_in = np.linspace(0.0, eq.r0, 513)
    r_out = np.linspace(eq.r0, eq.rw, 129)[1:]
    rows = [
        (
            float(r),
            float(eq.p(np.array([r]))[0]),
            float(eq.dp(np.array([r]))[0]),
            float(eq.btheta(np.array([r]))[0]),
            float(eq.jz(np.array([r]))[0]),
            float(eq.rho(np.array([r]))[0]),
            None,
        )
        for r in r_in
    ] + [
        (float(r), 0.0, 0.0, None, 0.0, 0.0, float(eq.bhat(np.array([r]))[0]))
        for r in r_out
    ]
    path = Path(args.output) / "equilibrium.csv"
    _write_csv(path, cfg, ["r", "p", "dp", "Btheta", "Jz", "rho", "Bhat_theta"], rows)
    logger.info("wrote %s", path)
    return EXIT_OK


def cmd_growth(cfg: RunConfig, args) -> int:
    eq = cfg.build_equilibrium()
    forms = _mode_forms(cfg, eq, args.m, args.k)
    res = solve_fixed_point(forms, **_solver_kwargs(cfg))
    payload = {
        "m": args.m,
        "k": args.k,
        "status": res.status,
        "mu": res.mu,
        "lambda": res.lambda_at_star,
        "s_star": res.s_star,
        "lambda_samples": [[s, lam] for s, lam in res.lambda_samples],
        "residuals": {
            "fixed_point": res.fixed_point_residual,
            "quadratic": res.quadratic_residual,
        },
        "eigen_iterations": res.eigen_iterations,
    }
    out = Path(args.output)
    _write_json(out / "growth.json", cfg, payload)
    if args.curve_csv:
        _write_csv(
            Path(args.curve_csv),
            cfg,
            ["s", "lambda"],
            [(float(s), float(lam)) for s, lam in res.lambda_samples],
        )
    logger.info("mode (%d,%d): %s mu=%g", args.m, args.k, res.status, res.mu)
    return EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    eq = cfg.build_equilibrium()
    report = scan_modes(eq, cfg.m_range, cfg.k_range, cfg)
    try:
        fit = dissipation_scaling_check(report)
    except InsufficientModes as exc:
        logger.warning("envelope fit skipped: %s", exc)
        fit = None
    decays = decay_check(report, fit)

    d_of = {(m, k): d for m, k, d, _ in report.dissipation_table}
    rows = [
        (
            r.mode.m,
            r.mode.k,
            r.status,
            r.mu,
            r.lambda_at_star,
            d_of.get((r.mode.m, r.mode.k), 0.0),
            r.eigen_iterations,
        )
        for r in report.modes
    ]
    out = Path(args.output)
    _write_csv(
        out / "scan.csv",
        cfg,
        ["m", "k", "status", "mu", "lambda", "D", "iterations"],
        rows,
    )
    payload = {
        "Lambda": report.Lambda,
        "argmax": {"m": report.argmax.m, "k": report.argmax.k},
        "fit": None
        if fit is None
        else {
            "c": fit.c,
            "C": fit.C,
            "kink_c": fit.kink_c,
            "kink_C": fit.kink_C,
            "n_points": fit.n_points,
            "n_kink_points": fit.n_kink_points,
        },
        "decay_check": decays,
        "rectangle_ok": report.rectangle_ok,
        "unresolved": [
            {"m": mode.m, "k": mode.k, "reason": reason}
            for mode, reason in report.unresolved
        ],
        "n_modes": len(report.modes),
    }
    _write_json(out / "report.json", cfg, payload)
    if report.argmax_contaminated:
        logger.error("unresolved mode adjacent to the scan argmax")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, args) -> int:
    eq = cfg.build_equilibrium()
    forms = _mode_forms(cfg, eq, args.m, args.k)
    if args.init == "eigenmode":
        res = solve_fixed_point(forms, **_solver_kwargs(cfg))
        g0 = res.minimizer
        g0_t = res.mu * res.minimizer
    else:
        seed = cfg.evolve_seed
        if ":" in args.init:
            seed = int(args.init.split(":", 1)[1])
        rng = np.random.default_rng(seed)
        g0 = rng.standard_normal(forms.n_free)
        g0_t = rng.standard_normal(forms.n_free)
        for vec in (g0, g0_t):
            vec /= np.sqrt(vec @ (forms.M @ vec))
    state = integrate(forms, g0, g0_t, args.t_final, args.dt)
    rows = [
        (t, nm, kin, pot, diss)
        for (t, kin, pot, diss), nm in zip(state.energy_history, state.norm_history)
    ]
    path = Path(args.output) / "trajectory.csv"
    _write_csv(path, cfg, ["t", "norm_M", "kinetic", "potential", "dissipated"], rows)
    logger.info(
        "integrated (%d,%d) to t=%g; energy-balance residual %.3e",
        args.m, args.k, state.t, state.energy_balance_residual(),
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify umbrella


def _check(checks: list, name: str, passed: bool, detail: str) -> None:
    checks.append({"name": name, "passed": bool(passed), "detail": detail})
    logger.info("%-28s %s  %s", name, "PASS" if passed else "FAIL", detail)


def _verify_equilibrium(checks, eq) -> None:
    rep = check_admissibility(eq)
    sample = np.linspace(1e-3 * eq.r0, eq.r0 * (1.0 - 1e-12), 400)
    fb = float(np.max(eq.force_balance_residual(sample)))
    _check(
        checks,
        "equilibrium_invariants",
        rep.admissible and fb <= 1e-8,
        f"admissible={rep.admissible} max force-balance residual={fb:.3e}",
    )


def _verify_quadrature(checks, eq, cfg) -> None:
    grid = make_grid("plasma", 8, cfg.grading_ratio, r0=eq.r0)
    space = plasma_space(grid, cfg.fem_order, 1)
    pts = quadrature(space)
    worst = 0.0
    degree_max = 2 * (cfg.fem_order + 3) - 1
    for d in range(degree_max + 1):
        approx = sum(w * r**d for r, w in pts)
        exact = eq.r0 ** (d + 1) / (d + 1)
        worst = max(worst, abs(approx - exact) / abs(exact))
    _check(
        checks,
        "quadrature_exactness",
        worst <= 1e-13,
        f"max relative defect {worst:.3e} through degree {degree_max}",
    )


def _verify_forms(checks, eq, cfg) -> None:
    grid = make_grid("plasma", 16, cfg.grading_ratio, r0=eq.r0)
    vgrid = make_grid("vacuum", 8, cfg.grading_ratio, r0=eq.r0, rw=eq.rw)
    space = plasma_space(grid, cfg.fem_order, 1)
    forms = assemble_mode_forms(
        eq, space, ModePair(1, 1), cfg.epsilon, cfg.delta,
        vac_space=vacuum_space(vgrid, cfg.fem_order),
    )
    asym = max(
        float(np.abs(a - a.T).max() / max(np.abs(a).max(), 1e-300))
        for a in (forms.K0, forms.K1, forms.M)
    )
    try:
        np.linalg.cholesky(forms.M)
        spd = True
    except np.linalg.LinAlgError:
        spd = False
    k1_min = float(np.linalg.eigvalsh(forms.K1)[0])
    k1_ok = k1_min >= -1e-10 * np.abs(forms.K1).max()
    _check(
        checks,
        "form_structure",
        asym <= 1e-12 and spd and k1_ok,
        f"asymmetry={asym:.3e} M-SPD={spd} min-eig(K1)={k1_min:.3e}",
    )


def _verify_lambda_curve(checks, eq, cfg) -> None:
    s_grid = [1e-3 * 4.0**j for j in range(5)]
    worst_mono = 0.0
    worst_sandwich = -np.inf
    for m, k in ((0, 1), (1, 1), (2, 1)):
        forms = _mode_forms(cfg, eq, m, k)
        samples = lambda_curve(forms, s_grid, dense_threshold=cfg.dense_threshold,
                               eig_tol=cfg.eig_tol, seed=cfg.eigen_seed)
        for (s1, l1, e1), (s2, l2, _) in zip(samples, samples[1:]):
            worst_mono = max(worst_mono, l1 - l2)
            worst_sandwich = max(worst_sandwich, l2 - (l1 + (s2 - s1) * e1))
    ok = worst_mono <= 1e-9 and worst_sandwich <= 1e-9
    _check(
        checks,
        "lambda_monotone_sandwich",
        ok,
        f"max decrease={worst_mono:.3e} max sandwich excess={worst_sandwich:.3e}",
    )


def _verify_fixed_points(checks, eq, cfg) -> None:
    worst_fp = 0.0
    worst_q = 0.0
    for m, k in ((0, 1), (1, 1)):
        forms = _mode_forms(cfg, eq, m, k)
        res = solve_fixed_point(forms, **_solver_kwargs(cfg))
        if res.status != "unstable":
            _check(checks, "fixed_point_residuals", False,
                   f"mode ({m},{k}) unexpectedly {res.status}")
            return
        scale = float(
            np.abs(forms.K0).max()
            + res.mu * np.abs(forms.K1).max()
            + res.mu**2 * np.abs(forms.M).max()
        )
        worst_fp = max(worst_fp, res.fixed_point_residual)
        worst_q = max(worst_q, res.quadratic_residual / scale)
    ok = worst_fp <= 1e-6 and worst_q <= 1e-6
    _check(
        checks,
        "fixed_point_residuals",
        ok,
        f"max |Phi-1|={worst_fp:.3e} max quadratic residual={worst_q:.3e} (rel)",
    )


def _verify_vacuum(checks, eq, cfg) -> None:
    vgrid = make_grid("vacuum", 64, 1.0, r0=eq.r0, rw=eq.rw)
    vac = vacuum_operator(eq, vacuum_space(vgrid, cfg.fem_order), ModePair(2, 0))
    numeric = vac.interior_nodal(1.0)
    # k=0 interior solutions are spanned by r^(m-1), r^(-m-1); m=2 gives r, r^-3
    r_nodes = vac.space.node_positions
    q0 = vac.couple * 1.0
    a = np.array([[eq.r0, eq.r0**-3], [eq.rw, eq.rw**-3]])
    alpha, beta = np.linalg.solve(a, [q0, 0.0])
    exact = alpha * r_nodes + beta * r_nodes**-3
    err = float(np.max(np.abs(numeric - exact)) / np.max(np.abs(exact)))
    _check(
        checks,
        "vacuum_analytic_k0",
        err <= 1e-6,
        f"max relative deviation from the r,r^-3 solution: {err:.3e}",
    )


def _verify_euler_lagrange(checks, eq, cfg) -> None:
    mode = ModePair(0, 1)
    mids = make_grid("plasma", 64, 1.0, r0=eq.r0)
    forms64 = assemble_mode_forms(
        eq, plasma_space(mids, cfg.fem_order, 0), mode, cfg.epsilon, cfg.delta
    )
    s_star = solve_fixed_point(forms64, **_solver_kwargs(cfg)).s_star
    vals = {}
    for n in (32, 64, 128):
        grid = make_grid("plasma", n, 1.0, r0=eq.r0)
        forms = assemble_mode_forms(
            eq, plasma_space(grid, cfg.fem_order, 0), mode, cfg.epsilon, cfg.delta
        )
        eig = smallest_eigenpair(
            forms, s_star, tol=cfg.eig_tol, dense_threshold=cfg.dense_threshold,
            seed=cfg.eigen_seed,
        )
        vals[n] = verify_minimizer_euler_lagrange(forms, eq, eig, s_star).interior_total
    chain = vals[32] / vals[128]
    ok = chain >= 16.0
    _check(
        checks,
        "euler_lagrange_refinement",
        ok,
        f"interior residual 32->128 dropped {chain:.4f}x "
        f"(steps {vals[32]/vals[64]:.4f}, {vals[64]/vals[128]:.4f}; need 16)",
    )


def _verify_evolve(checks, eq, cfg) -> None:
    forms = _mode_forms(cfg, eq, 0, 1)
    res = solve_fixed_point(forms, **_solver_kwargs(cfg))
    state = integrate(forms, res.minimizer, res.mu * res.minimizer, 1.0, 1e-3)
    resid = state.energy_balance_residual() / max(state.t, 1.0)
    ok = resid <= 1e-8 and growth_bound_check(state, res.mu)
    _check(
        checks,
        "evolve_energy_identity",
        ok,
        f"energy-balance residual per unit time {resid:.3e}",
    )


def cmd_verify(cfg: RunConfig, args) -> int:
    eq = cfg.build_equilibrium()
    if cfg.profile_kind == "hollow-current":
        pedestal = cfg.profile_params.get("pedestal", 1e-2)
        logger.info(
            "hollow-current profile: pressure includes the %.3g pedestal, so "
            "edge-layer quantities carry that offset", pedestal,
        )
    checks: list[dict] = []
    _verify_equilibrium(checks, eq)
    _verify_quadrature(checks, eq, cfg)
    _verify_forms(checks, eq, cfg)
    _verify_lambda_curve(checks, eq, cfg)
    _verify_fixed_points(checks, eq, cfg)
    _verify_vacuum(checks, eq, cfg)
    _verify_euler_lagrange(checks, eq, cfg)
    _verify_evolve(checks, eq, cfg)
    all_passed = all(c["passed"] for c in checks)
    _write_json(
        Path(args.output) / "verify.json",
        cfg,
        {"checks": checks, "all_passed": all_passed},
    )
    return EXIT_OK if all_passed else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# dispatch


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems with exit code 1 (validation)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zpinchstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--output", default=".", help="output directory")

    common(sub.add_parser("equilibrium", help="tabulate the steady state"))

    p_growth = sub.add_parser("growth", help="growth rate of one mode")
    common(p_growth)
    p_growth.add_argument("--m", type=int, required=True)
    p_growth.add_argument("--k", type=int, required=True)
    p_growth.add_argument(
        "--curve-csv", default=None, help="also write the lambda(s) samples here"
    )

    p_scan = sub.add_parser("scan", help="sweep a rectangle of modes")
    common(p_scan)
    p_scan.add_argument("--m-range", default=None, help="override config, lo:hi")
    p_scan.add_argument("--k-range", default=None, help="override config, lo:hi")
    p_scan.add_argument("--workers", type=int, default=None, help="override config")

    p_evolve = sub.add_parser("evolve", help="integrate one mode in time")
    common(p_evolve)
    p_evolve.add_argument("--m", type=int, required=True)
    p_evolve.add_argument("--k", type=int, required=True)
    p_evolve.add_argument("--t-final", type=float, required=True)
    p_evolve.add_argument("--dt", type=float, required=True)
    p_evolve.add_argument(
        "--init", default="eigenmode",
        help="'eigenmode' or 'random[:seed]' initial data",
    )

    common(sub.add_parser("verify", help="run the invariant suite"))
    return parser


_HANDLERS = {
    "equilibrium": cmd_equilibrium,
    "growth": cmd_growth,
    "scan": cmd_scan,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def _range_override(text: str, what: str) -> tuple[int, int]:
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise ValidationError([f"{what}: expected lo:hi integers, got {text!r}"])
    if lo > hi:
        raise ValidationError([f"{what}: lower bound exceeds upper bound"])
    return (lo, hi)


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("ZPINCHSTAB_LOG", "WARNING").upper(),
                      logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        overrides = {}
        if getattr(args, "m_range", None):
            overrides["m_range"] = _range_override(args.m_range, "--m-range")
        if getattr(args, "k_range", None):
            overrides["k_range"] = _range_override(args.k_range, "--k-range")
        if getattr(args, "workers", None):
            if args.workers < 1:
                raise ValidationError(["--workers: need >= 1"])
            overrides["workers"] = args.workers
        if overrides:
            from dataclasses import replace

            cfg = replace(cfg, **overrides)
        os.makedirs(args.output, exist_ok=True)
        return _HANDLERS[args.command](cfg, args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ZpinchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
