"""Potential data model, support geometry and the predicted growth constants.

A potential is a real n x n matrix function that is constant on each cell of
a finite breakpoint grid and zero outside it.  Everything here is pure and
works on immutable inputs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

MAX_PERMUTATION_N = 8


class PotentialError(ValueError):
    """Raised for malformed potential configurations."""


@dataclass(frozen=True)
class PotentialSpec:
    """Piecewise-constant real matrix potential.

    ``pieces[j]`` is the value of V on ``[breakpoints[j], breakpoints[j+1])``.
    """

    n: int
    breakpoints: np.ndarray
    pieces: np.ndarray  # shape (m, n, n)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise PotentialError(f"n must be a positive integer, got {n!r}")
        bp = np.asarray(self.breakpoints)
        if bp.dtype.kind == "c" or bp.dtype == object:
            raise PotentialError("breakpoints must be real numbers")
        bp = np.array(bp, dtype=float).reshape(-1)
        if not np.all(np.isfinite(bp)):
            raise PotentialError("breakpoints must be finite")
        if bp.size > 1 and np.any(np.diff(bp) <= 0):
            raise PotentialError("breakpoints not increasing")
        pieces = np.asarray(self.pieces)
        m = max(bp.size - 1, 0)
        if pieces.size == 0 and m == 0:
            pieces = np.zeros((0, n, n))
        if pieces.dtype.kind == "c" or pieces.dtype == object:
            raise PotentialError("potential entries must be real")
        if pieces.ndim != 3 or pieces.shape[1:] != (n, n):
            raise PotentialError(
                f"pieces must be a list of {n}x{n} matrices, got shape {pieces.shape}")
        if pieces.shape[0] != m:
            raise PotentialError(
                f"piece count {pieces.shape[0]} != breakpoint count - 1 = {m}")
        pieces = np.array(pieces, dtype=float)
        if not np.all(np.isfinite(pieces)):
            raise PotentialError("potential entries must be finite")
        bp.setflags(write=False)
        pieces.setflags(write=False)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", pieces)

    @property
    def m(self) -> int:
        return self.pieces.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def left(self) -> float:
        return float(self.breakpoints[0]) if self.breakpoints.size else 0.0

    @property
    def right(self) -> float:
        return float(self.breakpoints[-1]) if self.breakpoints.size else 0.0

    def is_zero(self) -> bool:
        return not np.any(self.pieces)

    def __call__(self, x: float) -> np.ndarray:
        bp = self.breakpoints
        if self.m == 0 or x < bp[0] or x >= bp[-1]:
            return np.zeros((self.n, self.n))
        j = int(np.searchsorted(bp, x, side="right")) - 1
        return self.pieces[j]

    def refined(self, splits: int) -> "PotentialSpec":
        """Same potential with every piece cut into ``splits`` equal sub-pieces."""
        if self.m == 0 or splits == 1:
            return self
        bps = [self.breakpoints[0]]
        for a, b in zip(self.breakpoints[:-1], self.breakpoints[1:]):
            bps.extend(np.linspace(a, b, splits + 1)[1:])
        return PotentialSpec(self.n, np.array(bps), np.repeat(self.pieces, splits, axis=0))

    def shifted(self, s: float) -> "PotentialSpec":
        return PotentialSpec(self.n, self.breakpoints + s, self.pieces)

    def permuted(self, perm) -> "PotentialSpec":
        perm = list(perm)
        return PotentialSpec(self.n, self.breakpoints, self.pieces[:, perm][:, :, perm])

    def to_dict(self) -> dict:
        return {"n": self.n, "breakpoints": self.breakpoints.tolist(),
                "pieces": self.pieces.tolist()}


def load_potential(text: str) -> PotentialSpec:
    """Parse a JSON/YAML potential config with fields n, breakpoints, pieces."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PotentialError(f"cannot parse potential config: {exc}") from exc
    if not isinstance(data, dict):
        raise PotentialError("potential config must be a mapping")
    missing = [key for key in ("n", "breakpoints", "pieces") if key not in data]
    if missing:
        raise PotentialError(f"missing fields: {', '.join(missing)}")
    n = data["n"]
    bps = data["breakpoints"]
    pieces = data["pieces"]
    if not isinstance(bps, list) or not isinstance(pieces, list):
        raise PotentialError("breakpoints and pieces must be arrays")
    for value in _flatten(bps) + _flatten(pieces):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise PotentialError(f"non-real entry {value!r}")
    try:
        arr = np.array(pieces, dtype=float) if pieces else np.zeros((0, n, n))
    except (ValueError, TypeError) as exc:
        raise PotentialError(f"ragged or non-numeric pieces: {exc}") from exc
    return PotentialSpec(n, np.array(bps, dtype=float), arr)


def _flatten(obj) -> list:
    if isinstance(obj, list):
        out = []
        for item in obj:
            out.extend(_flatten(item))
        return out
    return [obj]


def load_potential_file(path) -> PotentialSpec:
    with open(path, encoding="utf-8") as fh:
        return load_potential(fh.read())


@dataclass(frozen=True)
class SupportGeometry:
    """Per-entry support edges; zero entries carry the (+inf, -inf) sentinel."""

    t: np.ndarray
    u: np.ndarray
    diameter: float

    @property
    def nonzero(self) -> np.ndarray:
        return np.isfinite(self.t)


def support_geometry(p: PotentialSpec) -> SupportGeometry:
    n = p.n
    t = np.full((n, n), np.inf)
    u = np.full((n, n), -np.inf)
    bp = p.breakpoints
    for j in range(p.m):
        mask = p.pieces[j] != 0
        t = np.where(mask & np.isinf(t), bp[j], t)
        u = np.where(mask, bp[j + 1], u)
    nz = np.isfinite(t)
    diameter = float(u[nz].max() - t[nz].min()) if nz.any() else 0.0
    return SupportGeometry(t, u, diameter)


@dataclass
class H2Check:
    value: float
    literal_value: float
    nonnegative: bool
    unique_sigma: bool
    strict_gap: bool
    unique_selectors: bool
    sigma0: list
    selectors: list

    @property
    def holds(self) -> bool:
        return self.nonnegative and self.unique_sigma and self.strict_gap and self.unique_selectors


@dataclass
class ConstantReport:
    upper_bound: float
    upper_bound_theorem_form: float
    triangular: float | None = None
    h2: H2Check | None = None
    scalar_diameter: float | None = None
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.h2 is not None:
            d["h2"]["holds"] = self.h2.holds
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj))


def _pair_table(g: SupportGeometry, distinct: bool = False) -> np.ndarray:
    """A[i, j] = sup over valid (p, p') of u[i, p] - t[p', j]; -inf if no pair."""
    n = g.t.shape[0]
    out = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(n):
            best = -np.inf
            for p in range(n):
                if not np.isfinite(g.u[i, p]):
                    continue
                for q in range(n):
                    if distinct and p == q or not np.isfinite(g.t[q, j]):
                        continue
                    best = max(best, g.u[i, p] - g.t[q, j])
            out[i, j] = best
    return out


def _permutation_sums(table: np.ndarray):
    n = table.shape[0]
    if n > MAX_PERMUTATION_N:
        raise ValueError(f"permutation enumeration limited to n <= {MAX_PERMUTATION_N}, got {n}")
    rows = np.arange(n)
    perms = np.array(list(itertools.permutations(range(n))))
    with np.errstate(invalid="ignore"):
        sums = table[rows, perms].sum(axis=1)
    return perms, sums


def predicted_constants(g: SupportGeometry, pieces: np.ndarray | None = None) -> ConstantReport:
    """Evaluate every closed-form C(V) candidate for the given support geometry.

    ``pieces`` (the raw potential values) is only needed for the triangular and
    sign checks; without it those branches are skipped.
    """
    n = g.t.shape[0]
    nz = g.nonzero
    diagnostics = []

    table = _pair_table(g)
    # the identity term of tau22 = I + ... gives every diagonal entry type >= 0
    table[np.diag_indices(n)] = np.maximum(np.diag(table), 0.0)
    _, sums = _permutation_sums(table)
    upper = float(np.max(sums)) / math.pi if nz.any() else 0.0
    theorem_form = float(np.sum(np.max(table, axis=1))) / math.pi if nz.any() else 0.0

    scalar = None
    if n == 1:
        scalar = g.diameter / math.pi

    triangular = None
    if pieces is not None and _is_triangular(pieces):
        diag = np.diag(nz)
        if not diag.any():
            diagnostics.append("triangular potential with identically zero diagonal")
        else:
            triangular = float(np.sum((np.diag(g.u) - np.diag(g.t))[diag])) / math.pi

    h2 = _h2_check(g, pieces) if nz.any() else None
    return ConstantReport(upper, theorem_form, triangular, h2, scalar, diagnostics)


def _is_triangular(pieces: np.ndarray) -> bool:
    if pieces.shape[0] == 0:
        return False
    upper = all(np.allclose(np.tril(v, -1), 0, atol=0) for v in pieces)
    lower = all(np.allclose(np.triu(v, 1), 0, atol=0) for v in pieces)
    return upper or lower


def _h2_check(g: SupportGeometry, pieces: np.ndarray | None) -> H2Check:
    n = g.t.shape[0]
    # same-index table: sup_p u[i,p] - t[p,j] and which p attain it
    same = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(n):
            vals = g.u[i, :] - g.t[:, j]
            vals = np.where(np.isfinite(g.u[i, :]) & np.isfinite(g.t[:, j]), vals, -np.inf)
            same[i, j] = vals.max()
    perms, sums = _permutation_sums(same)
    best = sums.max()
    winners = np.flatnonzero(np.isclose(sums, best, rtol=0, atol=1e-12))
    sigma0 = perms[winners[0]]
    cross = _pair_table(g, distinct=True)
    _, cross_sums = _permutation_sums(cross)
    strict = bool(np.all(~np.isfinite(cross_sums) | (cross_sums < best - 1e-12)))
    selectors = []
    unique_sel = True
    for i in range(n):
        j = sigma0[i]
        vals = np.where(np.isfinite(g.u[i, :]) & np.isfinite(g.t[:, j]),
                        g.u[i, :] - g.t[:, j], -np.inf)
        hits = np.flatnonzero(np.isclose(vals, vals.max(), rtol=0, atol=1e-12))
        unique_sel &= hits.size == 1
        selectors.append(int(hits[0]))
    # literal signed variant: -sup_sigma sum_i sup_p (t[i,p] - u[p,sigma(i)])
    lit = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(n):
            ok = np.isfinite(g.t[i, :]) & np.isfinite(g.u[:, j])
            if ok.any():
                lit[i, j] = np.max((g.t[i, :] - g.u[:, j])[ok])
    _, lit_sums = _permutation_sums(lit)
    nonneg = bool(pieces is not None and pieces.size and np.all(pieces >= 0))
    return H2Check(
        value=float(best) / math.pi,
        literal_value=float(-lit_sums.max()) / math.pi,
        nonnegative=nonneg,
        unique_sigma=bool(winners.size == 1),
        strict_gap=strict,
        unique_selectors=bool(unique_sel),
        sigma0=[int(s) for s in sigma0],
        selectors=selectors,
    )


def constants_for(p: PotentialSpec) -> ConstantReport:
    return predicted_constants(support_geometry(p), p.pieces)


def l1_norm(p: PotentialSpec) -> float:
    """Sum over pieces and entries of |V_ij| times the piece width."""
    if p.m == 0:
        return 0.0
    return float(np.sum(np.abs(p.pieces).sum(axis=(1, 2)) * p.widths))


def random_potential(rng: np.random.Generator, n: int, pieces: int = 2,
                     span: float = 1.0, l1_max: float = 10.0,
                     symmetric: bool = True, full: bool = True) -> PotentialSpec:
    """Random test potential with ``l1_norm <= l1_max``."""
    cuts = np.sort(rng.uniform(0, span, pieces - 1))
    bps = np.concatenate([[0.0], cuts, [span]])
    vals = rng.normal(size=(pieces, n, n))
    if symmetric:
        vals = 0.5 * (vals + vals.transpose(0, 2, 1))
    if full:
        vals = np.where(np.abs(vals) < 0.1, 0.1 * np.sign(vals + 1e-300), vals)
    p = PotentialSpec(n, bps, vals)
    norm = l1_norm(p)
    target = rng.uniform(0.3, 1.0) * l1_max
    return PotentialSpec(n, bps, vals * (target / norm))
