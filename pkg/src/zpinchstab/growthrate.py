"""Per-mode growth rate via the fixed point of s -> sqrt(-lambda(s)).

lambda(s) is the smallest eigenvalue of the viscosity-s energy pencil; it is
continuous and nondecreasing in s, so Phi(s) = s / sqrt(-lambda(s)) is
strictly increasing wherever lambda(s) < 0 and the equation Phi(s) = 1 has
at most one root.  A mode is stable when lambda is already nonnegative at a
tiny floor viscosity; otherwise the root is bracketed by doubling from the
floor and polished by bisection.  The returned rate mu equals the root s*,
and the minimizer there satisfies the quadratic pencil relation
(K0 + mu K1 + mu^2 M) v ~ 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigensolver import EigenResult, smallest_eigenpair
from .errors import BracketExhausted
from .forms import ModeForms, ModePair

__all__ = ["GrowthResult", "lambda_curve", "solve_fixed_point"]

S_FLOOR = 1e-6


@dataclass(frozen=True)
class GrowthResult:
    """Growth classification of one mode.

    status is "unstable" (fixed point found, mu = s_star > 0), "stable"
    (lambda nonnegative at the floor viscosity, mu = 0), or "degenerate"
    (lambda reaches 0 with no Phi = 1 root below; mu = 0).
    `lambda_samples` records every (s, lambda(s)) evaluated, sorted in s;
    `fixed_point_residual` is |Phi(s_star) - 1| for unstable modes, 0.0
    otherwise; `quadratic_residual` is ||(K0 + mu K1 + mu^2 M) v||_2 at the
    returned minimizer (the self-consistency of the quadratic eigenrelation).
    """

    mode: ModePair
    status: str
    s_star: float
    mu: float
    lambda_at_star: float
    lambda_samples: list[tuple[float, float]]
    minimizer: np.ndarray
    fixed_point_residual: float
    quadratic_residual: float = 0.0
    eigen_iterations: int = 0


class _Curve:
    """Memoized lambda(s) evaluations with warm-started eigensolves."""

    def __init__(self, forms: ModeForms, eig_kwargs: dict):
        self.forms = forms
        self.eig_kwargs = eig_kwargs
        self.cache: dict[float, EigenResult] = {}
        self.x0: np.ndarray | None = None
        self.iterations = 0

    def __call__(self, s: float) -> EigenResult:
        hit = self.cache.get(s)
        if hit is not None:
            return hit
        res = smallest_eigenpair(self.forms, s, x0=self.x0, **self.eig_kwargs)
        self.cache[s] = res
        self.x0 = res.vector
        self.iterations += res.iterations
        return res

    def samples(self) -> list[tuple[float, float]]:
        return [(s, self.cache[s].lambda_) for s in sorted(self.cache)]


def lambda_curve(
    forms: ModeForms,
    s_values,
    *,
    eig_tol: float = 1e-10,
    eig_max_iter: int = 500,
    dense_threshold: int = 300,
    seed: int = 2718281828,
) -> list[tuple[float, float, float]]:
    """Evaluate s -> (s, lambda(s), E1(minimizer)) on sorted positive s.

    E1 is the unit-strength dissipation quadratic form of the minimizer at
    that s; by two-sided minimality it bounds the forward difference of
    lambda: lambda(s2) <= lambda(s1) + (s2 - s1) E1(v at s1).
    """
    s_values = [float(s) for s in s_values]
    if any(s <= 0 for s in s_values) or sorted(s_values) != s_values:
        raise ValueError("s_values must be sorted and positive")
    curve = _Curve(
        forms,
        dict(tol=eig_tol, max_iter=eig_max_iter, dense_threshold=dense_threshold, seed=seed),
    )
    out = []
    for s in s_values:
        res = curve(s)
        e1 = float(res.vector @ (forms.K1 @ res.vector))
        out.append((s, res.lambda_, e1))
    return out


def _phi(s: float, lam: float) -> float:
    return s / np.sqrt(-lam)


def solve_fixed_point(
    forms: ModeForms,
    s_max: float = 10.0,
    *,
    s_floor: float = S_FLOOR,
    lambda_zero_tol: float = 1e-10,
    fp_tol: float = 1e-8,
    eig_tol: float = 1e-10,
    eig_max_iter: int = 500,
    dense_threshold: int = 300,
    seed: int = 2718281828,
) -> GrowthResult:
    """Classify one mode and solve s = sqrt(-lambda(s)) when it is unstable.

    Doubling from s_floor brackets the unique root of Phi(s) = 1
    (Phi = s/sqrt(-lambda), increasing); bisection then reduces |Phi - 1|
    below fp_tol.  If lambda reaches zero numerically before Phi exceeds 1,
    the lambda sign boundary is bisected instead and the mode is reported
    degenerate only when no Phi = 1 root emerges after 80 bisections.
    """
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    curve = _Curve(
        forms,
        dict(tol=eig_tol, max_iter=eig_max_iter, dense_threshold=dense_threshold, seed=seed),
    )

    def finish(status, s_star, res, fp_res):
        mu = s_star if status == "unstable" else 0.0
        v = res.vector
        qres = float(
            np.linalg.norm((forms.K0 + mu * forms.K1 + mu * mu * forms.M) @ v)
        ) if status == "unstable" else 0.0
        return GrowthResult(
            forms.mode,
            status,
            s_star,
            mu,
            res.lambda_,
            curve.samples(),
            v,
            fp_res,
            qres,
            curve.iterations,
        )

    base = curve(s_floor)
    if base.lambda_ >= -lambda_zero_tol:
        return finish("stable", 0.0, base, 0.0)

    # bracket Phi = 1 by doubling; lambda < 0 throughout or we hit the
    # degenerate branch below
    s_lo, lam_lo = s_floor, base.lambda_
    s_hi = None
    s = s_floor
    while s < s_max:
        s = min(2.0 * s, s_max)
        res = curve(s)
        if res.lambda_ >= -lambda_zero_tol:
            # lambda reached zero before Phi exceeded 1: bisect the sign
            # boundary, watching for a Phi = 1 root below it
            lo, hi = s_lo, s
            root = None
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                rmid = curve(mid)
                if rmid.lambda_ >= -lambda_zero_tol:
                    hi = mid
                else:
                    if _phi(mid, rmid.lambda_) >= 1.0:
                        root = mid
                        break
                    lo = mid
            if root is None:
                return finish("degenerate", hi, curve(hi), 0.0)
            s_lo, s_hi = lo, root
            break
        if _phi(s, res.lambda_) >= 1.0:
            s_hi = s
            break
        s_lo, lam_lo = s, res.lambda_
    if s_hi is None:
        last = curve.cache[s_lo]
        raise BracketExhausted(
            f"mode {forms.mode}: Phi < 1 and lambda < 0 up to s_max={s_max:g} "
            f"(lambda={last.lambda_:.6g})"
        )

    # bisect Phi - 1 on [s_lo, s_hi]
    best = None
    for _ in range(200):
        mid = 0.5 * (s_lo + s_hi)
        rmid = curve(mid)
        if rmid.lambda_ >= -lambda_zero_tol:
            # numerically nonnegative lambda inside the bracket: shrink right
            s_hi = mid
            continue
        fp = _phi(mid, rmid.lambda_) - 1.0
        if best is None or abs(fp) < best[1]:
            best = (mid, abs(fp), rmid)
        if abs(fp) <= fp_tol:
            return finish("unstable", mid, rmid, abs(fp))
        if fp > 0:
            s_hi = mid
        else:
            s_lo = mid
    if best is not None:
        return finish("unstable", best[0], best[2], best[1])
    return finish("degenerate", s_hi, curve(s_hi), 0.0)
