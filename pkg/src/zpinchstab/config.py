"""Run configuration: INI schema, validation, canonical hashing.

The file format is INI with six sections; every key has a default, so an
empty file describes the parabolic reference column.  Unknown sections or
keys are rejected, and validation reports every violation at once rather
than stopping at the first.

    [profile]         kind and the shape parameters of that kind
    [geometry]        r0, rw
    [physics]         gamma, A, epsilon, delta
    [discretization]  n_elements_plasma, n_elements_vacuum, fem_order,
                      grading_ratio
    [solver]          eig_tol, eig_max_iter, dense_threshold, s_max,
                      lambda_zero_tol
    [scan]            m_range, k_range, use_symmetry, workers
    [seeds]           eigen, evolve

epsilon = 0 is accepted here on purpose: zero viscosity is a property of
the quadratic forms, and the assembly layer reports it as
NonPositiveViscosity where it actually bites.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

__all__ = ["RunConfig", "parse_config"]

_PROFILE_KEYS = {
    "parabolic": ("p0",),
    "powerlaw": ("p0", "nu"),
    "hollow-current": ("j0", "a", "b", "pedestal"),
    "table": ("path",),
}

_SHAPE_DEFAULTS = {
    "p0": 1.0,
    "nu": 2.0,
    "j0": 1.0,
    "a": 0.3,
    "b": 0.7,
    "pedestal": 1.0e-2,
    "path": "",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; attribute names match the config keys."""

    profile_kind: str = "parabolic"
    profile_params: dict = field(default_factory=dict)
    r0: float = 1.0
    rw: float = 2.0
    gamma: float = 5.0 / 3.0
    A: float = 1.0
    epsilon: float = 0.1
    delta: float = 0.1
    n_elements_plasma: int = 64
    n_elements_vacuum: int = 16
    fem_order: int = 2
    grading_ratio: float = 1.05
    eig_tol: float = 1.0e-10
    eig_max_iter: int = 500
    dense_threshold: int = 300
    s_max: float = 10.0
    lambda_zero_tol: float = 1.0e-10
    m_range: tuple[int, int] = (-3, 3)
    k_range: tuple[int, int] = (-8, 8)
    use_symmetry: bool = True
    workers: int = 1
    eigen_seed: int = 2718281828
    evolve_seed: int = 1234

    def as_dict(self) -> dict:
        """Section -> key -> value echo used in reports."""
        shape = {
            key: self.profile_params.get(key, _SHAPE_DEFAULTS[key])
            for key in _PROFILE_KEYS[self.profile_kind]
        }
        return {
            "profile": {"kind": self.profile_kind, **shape},
            "geometry": {"r0": self.r0, "rw": self.rw},
            "physics": {
                "gamma": self.gamma,
                "A": self.A,
                "epsilon": self.epsilon,
                "delta": self.delta,
            },
            "discretization": {
                "n_elements_plasma": self.n_elements_plasma,
                "n_elements_vacuum": self.n_elements_vacuum,
                "fem_order": self.fem_order,
                "grading_ratio": self.grading_ratio,
            },
            "solver": {
                "eig_tol": self.eig_tol,
                "eig_max_iter": self.eig_max_iter,
                "dense_threshold": self.dense_threshold,
                "s_max": self.s_max,
                "lambda_zero_tol": self.lambda_zero_tol,
            },
            "scan": {
                "m_range": f"{self.m_range[0]}:{self.m_range[1]}",
                "k_range": f"{self.k_range[0]}:{self.k_range[1]}",
                "use_symmetry": self.use_symmetry,
                "workers": self.workers,
            },
            "seeds": {"eigen": self.eigen_seed, "evolve": self.evolve_seed},
        }

    def sha256(self) -> str:
        """Hash of the canonical key=value listing (not the raw file), so
        comment or ordering changes do not alter the identity."""
        lines = []
        for section, keys in sorted(self.as_dict().items()):
            for key, value in sorted(keys.items()):
                lines.append(f"{section}.{key}={_canon(value)}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()

    def build_equilibrium(self):
        """Construct the equilibrium this config describes."""
        from .equilibrium import PressureProfile, build_equilibrium

        params = {**{k: _SHAPE_DEFAULTS[k] for k in _PROFILE_KEYS[self.profile_kind]},
                  **self.profile_params}
        if self.profile_kind == "parabolic":
            profile = PressureProfile.parabolic(params["p0"], self.r0)
        elif self.profile_kind == "powerlaw":
            profile = PressureProfile.powerlaw(params["p0"], params["nu"], self.r0)
        elif self.profile_kind == "hollow-current":
            profile = PressureProfile.hollow_current(
                params["j0"], params["a"], params["b"], params["pedestal"], self.r0
            )
        else:
            nodes = np.loadtxt(params["path"], delimiter=",", ndmin=2)
            profile = PressureProfile.table(nodes[:, 0], nodes[:, 1], self.r0)
        return build_equilibrium(profile, self.rw, self.gamma, self.A)


def _canon(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


_SCHEMA = {
    "profile": {"kind", *_SHAPE_DEFAULTS},
    "geometry": {"r0", "rw"},
    "physics": {"gamma", "A", "epsilon", "delta"},
    "discretization": {
        "n_elements_plasma",
        "n_elements_vacuum",
        "fem_order",
        "grading_ratio",
    },
    "solver": {"eig_tol", "eig_max_iter", "dense_threshold", "s_max", "lambda_zero_tol"},
    "scan": {"m_range", "k_range", "use_symmetry", "workers"},
    "seeds": {"eigen", "evolve"},
}


class _Collector:
    """Typed readers that record every violation instead of raising."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.violations: list[str] = []

    def bad(self, message: str) -> None:
        self.violations.append(message)

    def _raw(self, section: str, key: str):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return None

    def floatv(self, section, key, default, check=None, what=""):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            self.bad(f"{section}.{key}: not a number: {raw!r}")
            return default
        if not np.isfinite(value):
            self.bad(f"{section}.{key}: must be finite")
            return default
        if check is not None and not check(value):
            self.bad(f"{section}.{key}: {what}")
            return default
        return value

    def intv(self, section, key, default, check=None, what=""):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            self.bad(f"{section}.{key}: not an integer: {raw!r}")
            return default
        if check is not None and not check(value):
            self.bad(f"{section}.{key}: {what}")
            return default
        return value

    def boolv(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self.bad(f"{section}.{key}: not a boolean: {raw!r}")
        return default

    def rangev(self, section, key, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        parts = raw.split(":")
        try:
            lo, hi = (int(p) for p in parts)
        except ValueError:
            self.bad(f"{section}.{key}: expected lo:hi integers, got {raw!r}")
            return default
        if lo > hi:
            self.bad(f"{section}.{key}: lower bound exceeds upper bound")
            return default
        return (lo, hi)


def parse_config(path) -> RunConfig:
    """Read and validate a run configuration file.

    Raises
    ------
    ParseError
        If the file is missing or not valid INI (message carries the
        parser's line information).
    ValidationError
        Listing every schema or range violation found.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # keep key case ("A" is not "a")
    try:
        with open(path) as handle:
            parser.read_file(handle, source=str(path))
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    col = _Collector(parser)
    for section in parser.sections():
        if section not in _SCHEMA:
            col.bad(f"unknown section [{section}]")
            continue
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                col.bad(f"unknown key {section}.{key}")

    kind = "parabolic"
    if parser.has_option("profile", "kind"):
        kind = parser.get("profile", "kind").strip()
        if kind not in _PROFILE_KEYS:
            col.bad(
                f"profile.kind: unknown kind {kind!r} "
                f"(expected one of {sorted(_PROFILE_KEYS)})"
            )
            kind = "parabolic"
    if parser.has_section("profile"):
        allowed = set(_PROFILE_KEYS[kind])
        for key in parser.options("profile"):
            if key in _SHAPE_DEFAULTS and key not in allowed:
                col.bad(f"profile.{key}: not a parameter of kind {kind!r}")

    params: dict = {}
    for key in _PROFILE_KEYS[kind]:
        if key == "path":
            raw = col._raw("profile", "path")
            if raw is not None:
                params["path"] = raw.strip()
            elif kind == "table":
                col.bad("profile.path: required for kind 'table'")
        elif col._raw("profile", key) is not None:
            params[key] = col.floatv("profile", key, _SHAPE_DEFAULTS[key])

    r0 = col.floatv("geometry", "r0", 1.0, lambda v: v > 0, "must be positive")
    rw = col.floatv("geometry", "rw", 2.0, lambda v: v > 0, "must be positive")
    if rw <= r0:
        col.bad("geometry.rw: wall radius must exceed r0")

    gamma = col.floatv("physics", "gamma", 5.0 / 3.0, lambda v: v > 1, "gamma must exceed 1")
    entropy = col.floatv("physics", "A", 1.0, lambda v: v > 0, "must be positive")
    epsilon = col.floatv("physics", "epsilon", 0.1, lambda v: v >= 0, "must be nonnegative")
    delta = col.floatv("physics", "delta", 0.1, lambda v: v >= 0, "must be nonnegative")

    n_p = col.intv("discretization", "n_elements_plasma", 64, lambda v: v >= 1, "need >= 1")
    n_v = col.intv("discretization", "n_elements_vacuum", 16, lambda v: v >= 1, "need >= 1")
    order = col.intv("discretization", "fem_order", 2, lambda v: v in (1, 2), "must be 1 or 2")
    grading = col.floatv(
        "discretization", "grading_ratio", 1.05, lambda v: v > 0, "must be positive"
    )

    eig_tol = col.floatv("solver", "eig_tol", 1e-10, lambda v: v > 0, "must be positive")
    eig_max_iter = col.intv("solver", "eig_max_iter", 500, lambda v: v >= 1, "need >= 1")
    dense_threshold = col.intv(
        "solver", "dense_threshold", 300, lambda v: v >= 0, "must be nonnegative"
    )
    s_max = col.floatv("solver", "s_max", 10.0, lambda v: v > 0, "must be positive")
    lam_tol = col.floatv(
        "solver", "lambda_zero_tol", 1e-10, lambda v: v >= 0, "must be nonnegative"
    )

    m_range = col.rangev("scan", "m_range", (-3, 3))
    k_range = col.rangev("scan", "k_range", (-8, 8))
    use_symmetry = col.boolv("scan", "use_symmetry", True)
    workers = col.intv("scan", "workers", 1, lambda v: v >= 1, "need >= 1")

    eigen_seed = col.intv("seeds", "eigen", 2718281828, lambda v: v >= 0, "must be nonnegative")
    evolve_seed = col.intv("seeds", "evolve", 1234, lambda v: v >= 0, "must be nonnegative")

    if col.violations:
        raise ValidationError(col.violations)
    return RunConfig(
        profile_kind=kind,
        profile_params=params,
        r0=r0,
        rw=rw,
        gamma=gamma,
        A=entropy,
        epsilon=epsilon,
        delta=delta,
        n_elements_plasma=n_p,
        n_elements_vacuum=n_v,
        fem_order=order,
        grading_ratio=grading,
        eig_tol=eig_tol,
        eig_max_iter=eig_max_iter,
        dense_threshold=dense_threshold,
        s_max=s_max,
        lambda_zero_tol=lam_tol,
        m_range=m_range,
        k_range=k_range,
        use_symmetry=use_symmetry,
        workers=workers,
        eigen_seed=eigen_seed,
        evolve_seed=evolve_seed,
    )
