"""Counting functions, growth-constant fits and exponential-type estimates.

Resonances live in the lower half plane; sectors are described in the
conjugated (upper) half plane, so a zero k belongs to the sector about R+
with half-angle eps when 0 <= arg(conj k) <= eps, about R- when
pi - eps <= arg(conj k) <= pi, and to an interior sector [t1, t2] when
t1 <= arg(conj k) <= t2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .geometry import PotentialSpec
from .resonances import EPS0, ResonanceSet, SearchRegion
from .transfer import log_det_tau

DEFAULT_EPS = 0.3
DEFAULT_RMAX = 200.0


class CoverageError(ValueError):
    pass


class TypeEstimateError(RuntimeError):
    pass


@dataclass(frozen=True)
class Sector:
    """Angular sector in the conjugated half plane."""

    axis: str = "positive"        # positive | negative | interior
    eps: float = DEFAULT_EPS
    theta: tuple | None = None    # (t1, t2) for interior sectors

    def __post_init__(self):
        if self.axis not in ("positive", "negative", "interior"):
            raise ValueError(f"unknown sector axis {self.axis!r}")
        if self.axis == "interior":
            if self.theta is None or not 0 <= self.theta[0] < self.theta[1] <= math.pi:
                raise ValueError("interior sector needs 0 <= t1 < t2 <= pi")
        elif not 0 < self.eps < math.pi / 2:
            raise ValueError("eps must lie in (0, pi/2)")

    @classmethod
    def interior(cls, t1: float, t2: float) -> "Sector":
        return cls("interior", 0.0, (float(t1), float(t2)))

    @property
    def bounds(self) -> tuple:
        if self.axis == "positive":
            return 0.0, self.eps
        if self.axis == "negative":
            return math.pi - self.eps, math.pi
        return self.theta

    def contains(self, k) -> np.ndarray:
        phi = np.angle(np.conj(np.asarray(k, dtype=complex)))
        lo, hi = self.bounds
        return (phi >= lo) & (phi <= hi)

    def label(self) -> str:
        if self.axis == "interior":
            return f"interior[{self.theta[0]:.6g},{self.theta[1]:.6g}]"
        return self.axis


def covers(region: SearchRegion, sector: Sector, rmax: float, eps0: float = EPS0) -> bool:
    """Does the rectangle contain {|k| <= rmax} within the sector, up to the
    strip |Im k| < eps0 at the real axis?"""
    lo, hi = sector.bounds
    angles = [lo, hi] + [a for a in (0.0, 0.5 * math.pi, math.pi) if lo < a < hi]
    pts = [0j] + [rmax * np.exp(-1j * a) for a in angles]
    re = [p.real for p in pts]
    im = [p.imag for p in pts]
    tol = 1e-9 * max(1.0, rmax)
    return (region.re_min <= min(re) + tol and region.re_max >= max(re) - tol
            and region.im_min <= min(im) + tol and region.im_max >= -eps0 - tol)


@dataclass
class SectorCountSeries:
    sector: Sector
    radii: np.ndarray
    counts: np.ndarray
    fitted_slope: float
    fit_residual: float
    intercept: float = 0.0
    half_width: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "count", "sector_axis", "eps"])
        eps = self.sector.eps if self.sector.axis != "interior" else float("nan")
        for r, c in zip(self.radii, self.counts):
            w.writerow([format(float(r), ".17g"), int(c), self.sector.label(),
                        format(float(eps), ".17g")])
        return buf.getvalue()


def default_radii(rmax: float = DEFAULT_RMAX, num: int = 20) -> np.ndarray:
    """Geometric grid from rmax/10 to rmax."""
    return np.geomspace(rmax / 10.0, rmax, num)


def _fit(r: np.ndarray, y: np.ndarray):
    """Least-squares line over the upper half of the grid.

    Returns (slope, intercept, rms residual, 95% half-width of the slope)."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if r.size < 5:
        raise ValueError("need at least 5 radii")
    if np.any(np.diff(r) <= 0) or not np.all(np.isfinite(r)):
        raise ValueError("radii must be finite and strictly increasing")
    sel = slice(r.size // 2, None)
    rs, ys = r[sel], y[sel]
    if np.ptp(rs) == 0:
        raise ValueError("degenerate radii grid")
    fit = stats.linregress(rs, ys)
    resid = ys - (fit.intercept + fit.slope * rs)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    dof = rs.size - 2
    half = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else math.inf
    return float(fit.slope), float(fit.intercept), rms, half


def counting_function(rs: ResonanceSet, sector: Sector, radii=None,
                      check_coverage: bool = True) -> SectorCountSeries:
    """n(r) for the sector, with multiplicity, and the fitted growth slope."""
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    if check_coverage and not covers(rs.region, sector, float(np.max(radii))):
        raise CoverageError(f"{rs.region} does not cover the sector {sector.label()} "
                            f"up to r = {np.max(radii):.6g}")
    ks = rs.ks
    mult = rs.multiplicities
    inside = sector.contains(ks) if ks.size else np.zeros(0, dtype=bool)
    mods = np.abs(ks)
    counts = np.array([int(np.sum(mult[inside & (mods <= r)])) for r in radii])
    slope, icpt, rms, half = _fit(radii, counts)
    return SectorCountSeries(sector, radii, counts, max(slope, 0.0), rms, icpt, half)


def slope_estimate(series: SectorCountSeries) -> tuple[float, float]:
    """(C_hat, half-width of the 95% interval) from the outer half of the grid."""
    slope, _, _, half = _fit(series.radii, series.counts)
    return max(slope, 0.0), half


# --- exponential type --------------------------------------------------------

_FUNCTIONS = ("detS", "det_tau11", "det_tau22")


def log_abs(p: PotentialSpec, f: str, k) -> np.ndarray:
    """ln |f(k)| for f in detS, det_tau11, det_tau22."""
    if f == "det_tau22":
        return log_det_tau(k, p, "22").real
    if f == "det_tau11":
        return log_det_tau(k, p, "11").real
    if f == "detS":
        return (log_det_tau(k, p, "11") - log_det_tau(k, p, "22")).real
    raise ValueError(f"f must be one of {_FUNCTIONS}, got {f!r}")


@dataclass
class TypeEstimate:
    theta: float
    tau_hat: float
    residual: float
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def default_type_radii(rmin: float = 20.0, rmax: float = 200.0, num: int = 24) -> np.ndarray:
    return np.geomspace(rmin, rmax, num)


def type_estimate(p: PotentialSpec, f: str, theta: float, radii=None,
                  dip: float = 3.0, max_resample: int = 4) -> TypeEstimate:
    """Slope of ln|f(r e^{i theta})| against r over the outer half of the radii.

    A sample sitting on or near a zero of f shows up as a dip below the
    trend; it is moved along the ray (by fractions of the local spacing)
    until the dip disappears.
    """
    if f not in _FUNCTIONS:
        raise ValueError(f"f must be one of {_FUNCTIONS}, got {f!r}")
    r = default_type_radii() if radii is None else np.array(radii, dtype=float)
    if r.size < 5 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise ValueError("need at least 5 positive, strictly increasing radii")
    ray = np.exp(1j * theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = log_abs(p, f, r * ray)
    gaps = np.diff(r)
    spacing = np.concatenate([gaps[:1], np.minimum(gaps[:-1], gaps[1:]), gaps[-1:]])
    for attempt in range(max_resample + 1):
        finite = np.isfinite(y)
        if finite.sum() >= 3:
            fit = np.polyfit(r[finite], y[finite], 1)
            trend = np.polyval(fit, r)
            bad = ~finite | (y < trend - dip)
        else:
            bad = ~finite
        if not bad.any():
            break
        if attempt == max_resample:
            raise TypeEstimateError(f"samples on the ray theta = {theta:.6g} keep hitting "
                                    f"zeros of {f} near r = {r[bad]}")
        shift = 0.25 * (attempt + 1) / (max_resample + 1)
        r = r.copy()
        r[bad] = r[bad] + shift * spacing[bad]
        with np.errstate(divide="ignore", invalid="ignore"):
            y[bad] = log_abs(p, f, r[bad] * ray)
    slope, _, rms, _ = _fit(r, y)
    return TypeEstimate(float(theta), slope, rms, r, y)


@dataclass
class TypeProfile:
    f: str
    angles: np.ndarray
    radii: np.ndarray
    estimates: np.ndarray
    residuals: np.ndarray

    def normalized(self) -> np.ndarray:
        """tau_hat(theta) / |sin theta|."""
        return self.estimates / np.abs(np.sin(self.angles))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "tau_hat", "residual"])
        for t, e, s in zip(self.angles, self.estimates, self.residuals):
            w.writerow([format(float(t), ".17g"), format(float(e), ".17g"), format(float(s), ".17g")])
        return buf.getvalue()


def type_profile(p: PotentialSpec, f: str = "det_tau22", angles=None, radii=None) -> TypeProfile:
    angles = (np.array([-2 * math.pi / 3, -math.pi / 2, -math.pi / 3])
              if angles is None else np.asarray(angles, dtype=float))
    radii = default_type_radii() if radii is None else np.asarray(radii, dtype=float)
    est = [type_estimate(p, f, t, radii) for t in angles]
    return TypeProfile(f, angles, radii, np.array([e.tau_hat for e in est]),
                       np.array([e.residual for e in est]))


def region_for(sectors, rmax: float, eps0: float = EPS0, margin: float = 0.5) -> SearchRegion:
    """Smallest convenient rectangle covering the given sectors up to rmax."""
    re_lo, re_hi, im_lo = -margin, margin, -margin
    for s in sectors:
        lo, hi = s.bounds
        angles = [lo, hi] + [a for a in (0.0, 0.5 * math.pi, math.pi) if lo < a < hi]
        for a in angles:
            z = rmax * np.exp(-1j * a)
            re_lo, re_hi, im_lo = min(re_lo, z.real), max(re_hi, z.real), min(im_lo, z.imag)
    return SearchRegion(re_lo - margin, re_hi + margin, im_lo - margin, -eps0)
