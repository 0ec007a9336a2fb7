"""Resonances as zeros of det tau22 in the lower half k-plane.

Zeros are counted with the argument principle on rectangle boundaries and
isolated by recursive quadrisection; simple zeros are polished by Newton's
method with a central-difference derivative.

Functions are handled through their logarithm ``log f`` (any branch of the
imaginary part), since det tau22 spans hundreds of orders of magnitude deep
in the lower half plane.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import PotentialSpec, support_geometry
from .transfer import log_det_tau

LogHandle = Callable[[np.ndarray], np.ndarray]

EPS0 = 1e-2
_SPLIT_FRACTIONS = (0.5, 0.5137, 0.4781, 0.5423, 0.4529)
_MAX_DILATIONS = 5


class ResonanceSearchError(RuntimeError):
    pass


class BoundaryZero(ResonanceSearchError):
    """A zero of f lies on (or numerically at) a contour segment."""


class NewtonError(ResonanceSearchError):
    pass


def log_handle(f: Callable) -> LogHandle:
    """Wrap a plain analytic function into a log handle."""
    def h(k):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(f(np.asarray(k, dtype=complex)), dtype=complex))
    return h


def tau22_handle(p: PotentialSpec) -> LogHandle:
    return lambda k: log_det_tau(k, p, "22")


def contour_handle(p: PotentialSpec) -> LogHandle:
    """log of k^n det tau22: the pole of det tau22 at k = 0 is removed, so a
    zero close to the origin cannot hide behind it between boundary samples.
    Zeros away from k = 0 are unchanged."""
    def h(k):
        k = np.asarray(k, dtype=complex)
        return log_det_tau(k, p, "22") + p.n * np.log(k)
    return h


@dataclass(frozen=True)
class SearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    density: float = 4.0  # boundary samples per unit length

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def corners(self):
        return (complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max))

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    @property
    def symmetric(self) -> bool:
        return math.isclose(self.re_min, -self.re_max, rel_tol=0, abs_tol=1e-12)

    def contains(self, k: complex, margin: float = 0.0) -> bool:
        return (self.re_min - margin <= k.real <= self.re_max + margin
                and self.im_min - margin <= k.imag <= self.im_max + margin)

    def dilated(self, factor: float) -> "SearchRegion":
        cx = 0.5 * (self.re_min + self.re_max)
        cy = 0.5 * (self.im_min + self.im_max)
        hx = 0.5 * (self.re_max - self.re_min) * factor
        hy = 0.5 * (self.im_max - self.im_min) * factor
        return replace(self, re_min=cx - hx, re_max=cx + hx, im_min=cy - hy, im_max=cy + hy)

    def split(self, fx: float = 0.5, fy: float = 0.5):
        xm = self.re_min + fx * (self.re_max - self.re_min)
        ym = self.im_min + fy * (self.im_max - self.im_min)
        return [
            replace(self, re_max=xm, im_max=ym), replace(self, re_min=xm, im_max=ym),
            replace(self, re_max=xm, im_min=ym), replace(self, re_min=xm, im_min=ym),
        ]


class Contour:
    """Phase increments of log f along segments, cached so that shared edges
    of neighbouring cells are sampled once."""

    def __init__(self, handle: LogHandle, density: float, min_step: float = 1e-10,
                 max_points: int = 200_000):
        self.h = handle
        self.density = density
        self.min_step = min_step
        self.max_points = max_points
        self._cache: dict = {}
        self.evaluations = 0

    def _eval(self, k):
        self.evaluations += np.size(k)
        return self.h(k)

    def segment(self, a: complex, b: complex):
        """(phase increment, int k dlog f) along the straight segment a -> b."""
        if (a, b) in self._cache:
            return self._cache[(a, b)]
        if (b, a) in self._cache:
            dphi, mom = self._cache[(b, a)]
            return -dphi, -mom
        length = abs(b - a)
        npts = max(9, math.ceil(length * self.density) + 1)
        t = np.linspace(0.0, 1.0, npts)
        vals = self._eval(a + t * (b - a))
        while True:
            if np.any(np.isneginf(vals.real)) or np.any(~np.isfinite(vals)):
                raise BoundaryZero(f"f vanishes or is singular on segment {a} -> {b}")
            steps = np.angle(np.exp(1j * np.diff(vals.imag)))
            # fast modulus change flags a nearby zero or pole whose phase
            # swing the samples may otherwise alias
            bad = np.flatnonzero((np.abs(steps) >= 0.5 * math.pi)
                                 | (np.abs(np.diff(vals.real)) >= 1.0))
            if bad.size == 0:
                break
            dt = t[bad + 1] - t[bad]
            if np.min(dt) * length < self.min_step * max(1.0, abs(a), abs(b)) or t.size > self.max_points:
                raise BoundaryZero(f"phase not resolved near {a + t[bad[0]] * (b - a)}")
            tm = 0.5 * (t[bad] + t[bad + 1])
            vm = self._eval(a + tm * (b - a))
            t = np.concatenate([t, tm])
            vals = np.concatenate([vals, vm])
            order = np.argsort(t, kind="stable")
            t, vals = t[order], vals[order]
        dlog = np.diff(vals.real) + 1j * steps
        kmid = a + 0.5 * (t[1:] + t[:-1]) * (b - a)
        out = (float(steps.sum()), complex(np.sum(kmid * dlog)))
        self._cache[(a, b)] = out
        return out

    def winding(self, r: SearchRegion):
        """(winding number, sum of enclosed zeros estimated from the moment)."""
        c = r.corners
        total, mom = 0.0, 0.0j
        for a, b in zip(c, c[1:] + c[:1]):
            dphi, m = self.segment(a, b)
            total += dphi
            mom += m
        w = total / (2 * math.pi)
        wi = round(w)
        if abs(w - wi) > 0.05:
            raise ResonanceSearchError(f"non-integer winding {w:.4f} on {r}")
        return int(wi), mom / (2j * math.pi)


def winding_number(f: LogHandle, r: SearchRegion, max_dilations: int = _MAX_DILATIONS,
                   dilation: float = 1e-3) -> int:
    """Winding number of f around the rectangle r; f is a log handle."""
    region = r
    for attempt in range(max_dilations + 1):
        try:
            return Contour(f, region.density).winding(region)[0]
        except BoundaryZero:
            region = r.dilated(1.0 + dilation * (attempt + 1))
    raise BoundaryZero(f"zero on the boundary of {r} not resolved after {max_dilations} dilations")


@dataclass(frozen=True)
class Zero:
    k: complex
    residual: float          # |det tau22(k)|
    multiplicity: int = 1
    step: float = 0.0        # size of the last Newton correction


@dataclass
class ResonanceSet:
    zeros: list
    region: SearchRegion
    total_winding: int
    evaluations: int = 0
    cells: list = field(default_factory=list)  # (region, winding) of every examined cell

    @property
    def ks(self) -> np.ndarray:
        return np.array([z.k for z in self.zeros], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([z.multiplicity for z in self.zeros], dtype=int)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_k", "im_k", "abs_k", "residual", "multiplicity"])
        for z in self.zeros:
            w.writerow([_g17(z.k.real), _g17(z.k.imag), _g17(abs(z.k)), _g17(z.residual),
                        z.multiplicity])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, region: SearchRegion) -> "ResonanceSet":
        rows = list(csv.DictReader(io.StringIO(text)))
        zeros = [Zero(complex(float(r["re_k"]), float(r["im_k"])), float(r["residual"]),
                      int(r["multiplicity"])) for r in rows]
        return cls(zeros, region, sum(z.multiplicity for z in zeros))


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _newton(h: LogHandle, k0: complex, tol: float, max_iter: int = 60,
            step_tol: float = 1e-12):
    """Newton iteration on f = exp(log f).

    Returns (k, residual, iterations, last step).  Stops when |f| <= tol or
    the correction drops to step_tol; the latter is what ends the iteration
    when |f| is large in absolute terms (other channels growing like
    exp(2 |Im k| width) multiply the determinant).
    """
    k = complex(k0)
    res = float(np.exp(h(np.array([k])).real[0]))
    if res <= tol:
        return k, res, 0, 0.0
    for it in range(1, max_iter + 1):
        dk = 1e-6 * max(1.0, abs(k))
        L = h(np.array([k, k + dk, k - dk]))
        if not np.all(np.isfinite(L)):
            raise NewtonError(f"non-finite determinant near {k}")
        s = L.real.max()
        f = np.exp(L - s)
        fp = (f[1] - f[2]) / (2 * dk)
        if fp == 0 or not np.isfinite(fp):
            raise NewtonError(f"zero derivative at {k}")
        step = -f[0] / fp
        knew = k + step
        if knew.imag >= 0:
            raise NewtonError(f"Newton left the lower half plane at {knew}")
        new_res = float(np.exp(h(np.array([knew])).real[0]))
        if it == 1 and new_res > res:
            raise NewtonError(f"residual increased on the first step from {k0}")
        k, res = knew, new_res
        if abs(step) <= step_tol:
            return k, res, it, abs(step)
        if res <= tol:
            # one more step: quadratic convergence makes it nearly free
            return _polish(h, k, res, it, abs(step))
    raise NewtonError(f"no convergence after {max_iter} iterations from {k0}")


def _polish(h: LogHandle, k: complex, res: float, it: int, last: float):
    dk = 1e-6 * max(1.0, abs(k))
    L = h(np.array([k, k + dk, k - dk]))
    if np.all(np.isfinite(L)):
        f = np.exp(L - L.real.max())
        fp = (f[1] - f[2]) / (2 * dk)
        if fp != 0 and np.isfinite(fp):
            step = -f[0] / fp
            knew = k + step
            new_res = float(np.exp(h(np.array([knew])).real[0]))
            if knew.imag < 0 and new_res <= res:
                return knew, new_res, it + 1, abs(step)
    return k, res, it, last


def refine_zero(p: PotentialSpec, k0: complex, tol: float = 1e-8) -> complex:
    """Newton-polish an approximate zero of det tau22."""
    return _newton(tau22_handle(p), k0, tol)[0]


def default_density(p: PotentialSpec) -> float:
    # phase of det tau22 turns at up to 2 n diam per unit of Re k
    g = support_geometry(p)
    return max(4.0, 2.0 * p.n * g.diameter)


def locate_resonances(p: PotentialSpec, r: SearchRegion, tol: float = 1e-8,
                      min_size: float = 1e-7, handle: LogHandle | None = None) -> ResonanceSet:
    """All zeros of det tau22 (or of ``handle``) inside the rectangle r."""
    if r.im_max > 0:
        raise ValueError("search region must lie in the lower half plane")
    h = handle or tau22_handle(p)
    density = max(r.density, default_density(p))
    region = replace(r, density=density)
    contour = Contour(handle or contour_handle(p), density)
    for attempt in range(_MAX_DILATIONS + 1):
        try:
            total, moment = contour.winding(region)
            break
        except BoundaryZero:
            region = replace(r, density=density).dilated(1.0 + 1e-3 * (attempt + 1))
            if region.im_max > 0:
                region = replace(region, im_max=r.im_max)
    else:
        raise BoundaryZero(f"zero on the boundary of {r} not resolved")

    zeros: list[Zero] = []
    cells = [(region, total)]
    stack = [(region, total, moment)]
    while stack:
        cell, w, mom = stack.pop()
        if w == 0:
            continue
        if w < 0:
            raise ResonanceSearchError(f"negative winding {w} on {cell}: pole inside?")
        if w == 1:
            seed = mom if cell.contains(mom) else complex(
                0.5 * (cell.re_min + cell.re_max), 0.5 * (cell.im_min + cell.im_max))
            try:
                k, res, _, last = _newton(h, seed, tol)
            except NewtonError:
                k = None
            if k is not None and cell.contains(k):
                zeros.append(Zero(k, res, 1, last))
                continue
        if cell.size < min_size * max(1.0, abs(mom / max(w, 1))):
            kc = mom / w
            res = float(np.exp(h(np.array([kc])).real[0]))
            zeros.append(Zero(kc, res, w, cell.size))
            continue
        children = _split_cell(contour, cell, w)
        cells.extend((c, cw) for c, cw, _ in children)
        stack.extend(children)

    zeros.sort(key=lambda z: (z.k.real, z.k.imag))
    found = sum(z.multiplicity for z in zeros)
    if found != total:
        raise ResonanceSearchError(f"located {found} zeros but winding is {total}")
    return ResonanceSet(zeros, region, total, contour.evaluations, cells)


def _split_cell(contour: Contour, cell: SearchRegion, w: int):
    last = None
    for fx in _SPLIT_FRACTIONS:
        for fy in _SPLIT_FRACTIONS[:2]:
            try:
                kids = [(c, *contour.winding(c)) for c in cell.split(fx, fy)]
            except BoundaryZero as exc:
                last = exc
                continue
            if sum(cw for _, cw, _ in kids) == w:
                return kids
            last = ResonanceSearchError(
                f"winding not additive on {cell}: {w} vs {[cw for _, cw, _ in kids]}")
    raise ResonanceSearchError(f"lost zero while splitting {cell}: {last}")
