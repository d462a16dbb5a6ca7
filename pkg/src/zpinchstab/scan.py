"""Mode-rectangle sweep: growth rates, the largest growing mode, and the
structural checks that make the sweep trustworthy (reflection symmetry,
dissipation scaling with m^2 + k^2, decay of mu toward the rectangle edge).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BracketExhausted, InsufficientModes
from .forms import ModeForms, ModePair, assemble_mode_forms
from .growthrate import GrowthResult, solve_fixed_point
from .mesh import XI, make_grid, plasma_space, vacuum_space

logger = logging.getLogger(__name__)

__all__ = [
    "ScanReport",
    "FitResult",
    "scan_modes",
    "dissipation_scaling_check",
    "decay_check",
]


def _cfg(config, name: str, default):
    return default if config is None else getattr(config, name, default)


def _order_key(mode: ModePair):
    return (abs(mode.m), abs(mode.k), mode.m, mode.k)


def _expand(rng) -> list[int]:
    vals = list(rng)
    if len(vals) == 2 and vals[0] <= vals[1]:
        return list(range(int(vals[0]), int(vals[1]) + 1))
    return [int(v) for v in vals]


@dataclass(frozen=True)
class ScanReport:
    """Outcome of one rectangle sweep.

    `modes` holds one GrowthResult per scanned pair in deterministic order;
    `Lambda` is the largest mu over resolved modes (0 when none grow) and
    `argmax` its pair, ties broken by smallest (|m|, |k|, m, k);
    `dissipation_table` lists (m, k, D(minimizer), m^2+k^2) with D the
    viscous form of the mass-normalized minimizer; `decay_profile` gives
    (m, k, mu) along the rectangle boundary; `unresolved` lists pairs whose
    bracketing failed, and `rectangle_ok` is False when a boundary mode
    grows at more than half of Lambda (rectangle too small).
    """

    modes: list[GrowthResult]
    Lambda: float
    argmax: ModePair
    dissipation_table: list[tuple[int, int, float, int]]
    decay_profile: list[tuple[int, int, float]]
    unresolved: list[tuple[ModePair, str]]
    rectangle_ok: bool
    epsilon: float
    delta: float

    @property
    def argmax_contaminated(self) -> bool:
        """True when an unresolved pair neighbors the argmax (Lambda dubious)."""
        return any(
            max(abs(p.m - self.argmax.m), abs(p.k - self.argmax.k)) <= 1
            for p, _ in self.unresolved
        )


def reflection_signature(space) -> np.ndarray:
    """Free-dof sign vector S of the reflection (m,k) -> (-m,-k): the forms
    obey K(-m,-k) = S K(m,k) S with S = +1 on xi dofs and -1 on eta, zeta
    dofs (m and k enter through squares and mixed products that flip sign
    together with those two fields)."""
    sg = np.empty(space.n_free)
    fi = space.free_index
    for f in range(space.nfields):
        idx = fi[:, f]
        idx = idx[idx >= 0]
        sg[idx] = 1.0 if f == XI else -1.0
    return sg


def scan_modes(eq, m_range, k_range, config=None) -> ScanReport:
    """Solve every (m, k) in the rectangle and assemble a ScanReport.

    The reflection (m, k) -> (-m, -k) conjugates all three forms by a
    fixed sign vector (see reflection_signature), leaving mu unchanged, so
    only one member of each pair is solved; the partner reuses the result
    with the minimizer sign-flipped, and the conjugation identity is
    spot-checked at matrix level on the argmax pair.
    """
    ms, ks = _expand(m_range), _expand(k_range)
    if not ms or not ks:
        raise ValueError("mode ranges must be nonempty")
    pairs = sorted((ModePair(m, k) for m in ms for k in ks), key=_order_key)

    n_p = int(_cfg(config, "n_elements_plasma", 64))
    n_v = int(_cfg(config, "n_elements_vacuum", 16))
    order = int(_cfg(config, "fem_order", 2))
    q = float(_cfg(config, "grading_ratio", 1.05))
    eps = float(_cfg(config, "epsilon", 0.1))
    delta = float(_cfg(config, "delta", 0.1))
    solver_kwargs = dict(
        s_max=float(_cfg(config, "s_max", 10.0)),
        lambda_zero_tol=float(_cfg(config, "lambda_zero_tol", 1e-10)),
        eig_tol=float(_cfg(config, "eig_tol", 1e-10)),
        eig_max_iter=int(_cfg(config, "eig_max_iter", 500)),
        dense_threshold=int(_cfg(config, "dense_threshold", 300)),
        seed=int(_cfg(config, "eigen_seed", 2718281828)),
    )
    use_symmetry = bool(_cfg(config, "use_symmetry", True))
    workers = int(_cfg(config, "workers", 1))

    grid = make_grid("plasma", n_p, q, r0=eq.r0)
    vgrid = make_grid("vacuum", n_v, q, r0=eq.r0, rw=eq.rw)
    vspace = vacuum_space(vgrid, order)
    spaces = {True: plasma_space(grid, order, 0), False: plasma_space(grid, order, 1)}

    def forms_for(mode: ModePair) -> ModeForms:
        return assemble_mode_forms(
            eq,
            spaces[mode.m == 0],
            mode,
            eps,
            delta,
            vac_space=None if mode.m == 0 else vspace,
        )

    pair_set = set(pairs)
    reps: list[ModePair] = []
    seen: set[ModePair] = set()
    for mode in pairs:
        if mode in seen:
            continue
        seen.add(mode)
        if use_symmetry:
            seen.add(ModePair(-mode.m, -mode.k))
        reps.append(mode)

    def solve_one(mode: ModePair):
        try:
            return solve_fixed_point(forms_for(mode), **solver_kwargs), None
        except BracketExhausted as exc:
            return None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = dict(zip(reps, pool.map(solve_one, reps)))
    else:
        outcomes = {mode: solve_one(mode) for mode in reps}

    # reduce in scan order so ties and report layout ignore completion order
    results: dict[ModePair, GrowthResult] = {}
    unresolved: list[tuple[ModePair, str]] = []
    for mode in reps:
        res, err = outcomes[mode]
        partner = ModePair(-mode.m, -mode.k)
        has_partner = use_symmetry and partner in pair_set and partner != mode
        if err is not None:
            unresolved.append((mode, err))
            if has_partner:
                unresolved.append((partner, err))
            continue
        results[mode] = res
        if has_partner:
            sg = reflection_signature(spaces[mode.m == 0])
            results[partner] = GrowthResult(
                partner,
                res.status,
                res.s_star,
                res.mu,
                res.lambda_at_star,
                res.lambda_samples,
                sg * res.minimizer,
                res.fixed_point_residual,
                res.quadratic_residual,
                0,
            )

    modes = [results[p] for p in pairs if p in results]
    Lambda, argmax = 0.0, ModePair(0, 0)
    for res in modes:  # pairs are already in tie-break order
        if res.mu > Lambda:
            Lambda, argmax = res.mu, res.mode
    if Lambda > 0.0 and use_symmetry:
        # spot-check the conjugation identity K(-m,-k) = S K(m,k) S on the argmax
        fa = forms_for(argmax)
        fb = forms_for(ModePair(-argmax.m, -argmax.k))
        sg = reflection_signature(spaces[argmax.m == 0])
        for a, b in ((fa.K0, fb.K0), (fa.K1, fb.K1), (fa.M, fb.M)):
            conj = sg[:, None] * a * sg[None, :]
            if not np.allclose(conj, b, rtol=0.0, atol=1e-8 * (1.0 + np.abs(a).max())):
                raise AssertionError("mode reflection symmetry violated at matrix level")

    # D per mode from the representative K1; a mode whose canonical partner was
    # assembled instead needs its minimizer conjugated (S is an involution, so
    # D = (S v)^T K1_rep (S v) exactly)
    table = []
    k1_cache: dict[ModePair, np.ndarray] = {}
    for res in modes:
        partner = ModePair(-res.mode.m, -res.mode.k)
        key = min(res.mode, partner, key=_order_key)
        if key not in k1_cache:
            k1_cache[key] = forms_for(key).K1
        w = res.minimizer
        if key != res.mode:
            w = reflection_signature(spaces[res.mode.m == 0]) * w
        d_val = float(w @ (k1_cache[key] @ w))
        table.append((res.mode.m, res.mode.k, d_val, res.mode.m**2 + res.mode.k**2))

    m_lo, m_hi, k_lo, k_hi = min(ms), max(ms), min(ks), max(ks)
    boundary = [
        (r.mode.m, r.mode.k, r.mu)
        for r in modes
        if r.mode.m in (m_lo, m_hi) or r.mode.k in (k_lo, k_hi)
    ]
    rectangle_ok = all(mu < 0.5 * Lambda for _, _, mu in boundary) if Lambda > 0 else True
    return ScanReport(
        modes, Lambda, argmax, table, boundary, unresolved, rectangle_ok, eps, delta
    )


@dataclass(frozen=True)
class FitResult:
    """Two-parameter lower-envelope fits of the dissipation table.

    Main fit: D >= c*(m^2+k^2) - C over modes with |m| != 1.  Kink fit:
    D >= kink_c*k^2 - kink_C over |m| = 1 modes (their dissipation has no
    m^2 floor).  Both lines touch the envelope from below.
    """

    c: float
    C: float
    kink_c: float
    kink_C: float
    n_points: int
    n_kink_points: int


def _lower_envelope(points: list[tuple[float, float]]) -> tuple[float, float]:
    """Slope of the rightmost lower-convex-hull edge and the offset making
    the line a global lower bound: D >= c*x - C on all points."""
    # distinct modes can share an abscissa (reflection partners, or equal
    # m^2 + k^2); only the lowest D at each x can touch the envelope
    lowest: dict[float, float] = {}
    for x, d in points:
        if x not in lowest or d < lowest[x]:
            lowest[x] = d
    pts = sorted(lowest.items())
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2 and (
            (hull[-1][1] - hull[-2][1]) * (p[0] - hull[-2][0])
            >= (p[1] - hull[-2][1]) * (hull[-1][0] - hull[-2][0])
        ):
            hull.pop()
        hull.append(p)
    if len(hull) >= 2:
        (x1, d1), (x2, d2) = hull[-2], hull[-1]
        c = (d2 - d1) / (x2 - x1)
    else:
        c = 0.0
    C = max(c * x - d for x, d in pts)
    return c, C


def dissipation_scaling_check(report: ScanReport) -> FitResult:
    """Fit the growth of the minimizer dissipation rate with m^2 + k^2."""
    main = [(float(x), d) for m, k, d, x in report.dissipation_table if abs(m) != 1]
    kink = [(float(k * k), d) for m, k, d, _ in report.dissipation_table if abs(m) == 1]
    if len(main) + len(kink) < 6:
        raise InsufficientModes(
            f"need at least 6 modes for the envelope fit, have {len(main) + len(kink)}"
        )
    c, C = _lower_envelope(main) if len(main) >= 2 else (0.0, 0.0)
    kc, kC = _lower_envelope(kink) if len(kink) >= 2 else (0.0, 0.0)
    return FitResult(c, C, kc, kC, len(main), len(kink))


def decay_check(report: ScanReport, fit: FitResult | None = None) -> bool:
    """True iff every rectangle-boundary mode grows at most half as fast as
    the largest mode (vacuously true for a stable rectangle).

    Also logs the hyperbola diagnostic mu <= (C0 + C)/D per unstable mode,
    with C0 the largest mu^2 + mu*D over the scan (at a fixed point the
    ideal energy is -(mu^2 + mu*D), so this bound holds by construction)
    and C from the envelope fit.
    """
    if report.Lambda > 0.0:
        if fit is None:
            try:
                fit = dissipation_scaling_check(report)
            except InsufficientModes:
                fit = None
        if fit is not None:
            d_of = {(m, k): d for m, k, d, _ in report.dissipation_table}
            grow = [
                (r.mode, r.mu, d_of[(r.mode.m, r.mode.k)])
                for r in report.modes
                if r.mu > 0.0 and d_of.get((r.mode.m, r.mode.k), 0.0) > 0.0
            ]
            c0 = max((mu * mu + mu * d for _, mu, d in grow), default=0.0)
            for mode, mu, d in grow:
                off = fit.kink_C if abs(mode.m) == 1 else fit.C
                logger.info(
                    "hyperbola bound (%d,%d): mu=%.6f <= (C0+C)/D=%.6f",
                    mode.m, mode.k, mu, (c0 + max(off, 0.0)) / d,
                )
    if report.Lambda <= 0.0:
        return True
    if not report.decay_profile:
        return False
    return max(mu for _, _, mu in report.decay_profile) <= 0.5 * report.Lambda
