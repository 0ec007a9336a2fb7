"""Iterative (Born / WKB) construction of the transmission matrix.

The first-order system for the amplitudes gamma^-, gamma^+ is solved by
iterating the Volterra operators

    J^- f(x) = -i int_{y >= x} V(y)/(2k) f(y) dy
    J^+ f(x) = -i int_{y >= x} e^{2ik(x-y)} V(y)/(2k) f(y) dy

on functions sampled at Gauss-Legendre nodes of each piece.  Cumulative
integrals use the Legendre interpolant of the integrand on each piece; the
oscillating factor is centred on the piece midpoint so that it stays bounded
for Im k <= 0.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as leg

from .geometry import PotentialSpec, l1_norm
from .transfer import TransmissionMatrix


class BornError(ValueError):
    pass


@dataclass(frozen=True)
class BornConfig:
    order: int = 3
    grid: int = 32
    k_min: float | None = None  # default 2 * ||V||_1

    def kmin_for(self, p: PotentialSpec) -> float:
        if self.k_min is not None:
            return self.k_min
        return 2.0 * l1_norm(p)


@functools.lru_cache(maxsize=64)
def _legendre_rule(q: int):
    """Nodes, weights and the matrix f -> int_{xi_i}^{1} f on [-1, 1]."""
    xi, w = leg.leggauss(q)
    # coefficients of the degree q-1 interpolant from nodal values (exact by Gauss)
    vander = leg.legvander(xi, q - 1)  # (q, q)
    to_coef = (vander * w[:, None]).T * ((2 * np.arange(q) + 1) / 2.0)[:, None]
    anti = leg.legint(to_coef, lbnd=-1, axis=0)  # (q+1, q)
    at_nodes = leg.legvander(xi, q) @ anti
    right = w[None, :] - at_nodes
    for arr in (xi, w, right):
        arr.setflags(write=False)
    return xi, w, right


@dataclass
class BornGrid:
    """Sample points of the support: per panel its left edge then its nodes,
    closed by the right edge x_m.  Pieces are cut into panels when Im k != 0."""

    p: PotentialSpec
    k: complex
    x: np.ndarray
    piece_rows: list = field(default_factory=list)  # (edge_row, node_slice, q, a, b, piece)

    @classmethod
    def build(cls, p: PotentialSpec, k: complex, grid: int = 32) -> "BornGrid":
        xs = []
        rows = []
        # panels keep |e^{2ik(c-y)}| <= e^2 across each half panel
        panel = 2.0 / abs(complex(k).imag) if complex(k).imag else math.inf
        for j in range(p.m):
            a0, b0 = p.breakpoints[j], p.breakpoints[j + 1]
            cuts = np.linspace(a0, b0, max(1, math.ceil((b0 - a0) / panel)) + 1)
            for a, b in zip(cuts[:-1], cuts[1:]):
                q = max(grid, math.ceil(4 * abs(k) * (b - a)))
                xi, _, _ = _legendre_rule(q)
                edge = len(xs)
                xs.append(a)
                xs.extend(0.5 * (a + b) + 0.5 * (b - a) * xi)
                rows.append((edge, slice(edge + 1, edge + 1 + q), q, a, b, j))
        xs.append(p.right)
        return cls(p, complex(k), np.array(xs), rows)

    @property
    def size(self) -> int:
        return self.x.size

    def zeros(self, cols: int) -> np.ndarray:
        return np.zeros((self.size, self.p.n, cols), dtype=complex)


def apply_J(kind: str, k: complex, f: np.ndarray, grid: BornGrid, k_min: float = 0.0) -> np.ndarray:
    """Apply J^- (kind='minus') or J^+ (kind='plus') to samples f of shape (points, n, cols).

    Input values at edge rows are ignored; the output is returned at every row.
    """
    if kind not in ("minus", "plus"):
        raise ValueError(f"kind must be 'minus' or 'plus', got {kind!r}")
    if abs(k) < k_min or k == 0:
        raise BornError(f"|k| = {abs(k):.4g} below k_min = {k_min:.4g}")
    p = grid.p
    out = np.zeros_like(f, dtype=complex)
    tail = np.zeros(f.shape[1:], dtype=complex)  # value of the integral from b to infinity
    for edge, sl, q, a, b, j in reversed(grid.piece_rows):
        _, w, right = _legendre_rule(q)
        h = 0.5 * (b - a)
        g = np.einsum("ij,qjc->qic", p.pieces[j], f[sl])
        if kind == "minus":
            inner = h * np.einsum("qr,ric->qic", right, g)
            out[sl] = inner + tail
            tail = h * np.einsum("r,ric->ic", w, g) + tail
        else:
            c = 0.5 * (a + b)
            y = grid.x[sl]
            gt = np.exp(2j * k * (c - y))[:, None, None] * g
            inner = h * np.einsum("qr,ric->qic", right, gt)
            out[sl] = (np.exp(2j * k * (y - c))[:, None, None] * inner
                       + np.exp(2j * k * (y - b))[:, None, None] * tail)
            tail = (np.exp(2j * k * (a - c)) * h * np.einsum("r,ric->ic", w, gt)
                    + np.exp(2j * k * (a - b)) * tail)
        out[edge] = tail
    return out * (-1j / (2 * k))


def continue_left(kind: str, k: complex, value_at_x0, x0: float, x: float):
    """Value of J^{kind} f at x <= x0 from its value at the support edge x0."""
    if x > x0:
        raise ValueError("x must lie left of the support")
    if kind == "minus":
        return value_at_x0
    return np.exp(2j * k * (x - x0)) * value_at_x0


@dataclass
class BornExpansion:
    """Per-order contributions to T(k) in the plane-wave convention of
    :mod:`matres.transfer`, plus the tail bound for the truncation."""

    k: complex
    terms: list  # list of TransmissionMatrix, index = order
    remainder_bound: float

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def partial_sum(self, order: int | None = None) -> TransmissionMatrix:
        order = self.order if order is None else order
        acc = self.terms[0]
        for t in self.terms[1: order + 1]:
            acc = TransmissionMatrix(acc.tau11 + t.tau11, acc.tau12 + t.tau12,
                                     acc.tau21 + t.tau21, acc.tau22 + t.tau22, self.k)
        return acc


def born_series(k: complex, p: PotentialSpec, order: int, grid: BornGrid | None = None,
                k_min: float = 0.0):
    """gamma^-_n, gamma^+_n for n = 0..order for both incoming families.

    Columns 0..n-1 carry gamma_0 = (c, 0) and columns n..2n-1 carry
    gamma_0 = (0, d e^{2ikx}), with c, d running over the standard basis.
    """
    grid = grid or BornGrid.build(p, k)
    n = p.n
    gm = grid.zeros(2 * n)
    gp = grid.zeros(2 * n)
    gm[:, :, :n] = np.eye(n)
    gp[:, :, n:] = np.exp(2j * k * grid.x)[:, None, None] * np.eye(n)
    minus, plus = [gm], [gp]
    for _ in range(order):
        delta = minus[-1] - plus[-1]
        minus.append(apply_J("minus", k, delta, grid, k_min))
        plus.append(apply_J("plus", k, delta, grid, k_min))
    return grid, minus, plus


def difference_power(k: complex, grid: BornGrid, n_steps: int, k_min: float = 0.0):
    """(J^- - J^+)^n applied to gamma^-_0 - gamma^+_0, for n = 0..n_steps."""
    n = grid.p.n
    delta = grid.zeros(2 * n)
    delta[:, :, :n] = np.eye(n)
    delta[:, :, n:] = -np.exp(2j * k * grid.x)[:, None, None] * np.eye(n)
    out = [delta]
    for _ in range(n_steps):
        d = out[-1]
        out.append(apply_J("minus", k, d, grid, k_min) - apply_J("plus", k, d, grid, k_min))
    return out


def born_transmission(k: complex, p: PotentialSpec, cfg: BornConfig = BornConfig()) -> BornExpansion:
    """Truncated Born series for T(k) up to cfg.order.

    The iteration produces blocks in the amplitude basis of the first-order
    system; its off-diagonal blocks differ from the plane-wave basis by a sign
    (the basis vectors scale by -2ik and +2ik), which is undone here.
    """
    k = complex(k)
    kmin = cfg.kmin_for(p)
    if abs(k) < kmin or k == 0:
        raise BornError(f"|k| = {abs(k):.4g} below k_min = {kmin:.4g}")
    n = p.n
    if p.m == 0 or p.is_zero():
        eye, zero = np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex)
        terms = [TransmissionMatrix(eye, zero, zero, eye, k)]
        terms += [TransmissionMatrix(zero, zero, zero, zero, k) for _ in range(cfg.order)]
        return BornExpansion(k, terms, 0.0)
    grid = BornGrid.build(p, k, cfg.grid)
    _, minus, plus = born_series(k, p, cfg.order, grid)
    x0 = p.left
    back = np.exp(-2j * k * x0)
    terms = []
    prev = None
    for order_n, (gm, gp) in enumerate(zip(minus, plus)):
        lm = gm[0]  # row 0 is the left edge x0
        lp = back * gp[0]
        t = TransmissionMatrix(lm[:, :n], -lm[:, n:], -lp[:, :n], lp[:, n:], k)
        if order_n >= 2:
            size = np.abs(t.full()).max()
            if prev is not None and size > 2.0 * prev and size > 1e-300:
                raise BornError(f"Born series diverging at order {order_n} (|k| = {abs(k):.4g})")
            prev = size
        elif order_n == 1:
            prev = np.abs(t.full()).max()
        terms.append(t)
    return BornExpansion(k, terms, remainder_bound(k, p, cfg.order + 1))


def remainder_bound(k: complex, p: PotentialSpec, N: int) -> float:
    """||V||_1^{N-1} / (2|k|)^N * ||V||_1: bound on the tail after N-1 terms."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if k == 0:
        raise ValueError("k = 0 is excluded")
    l1 = l1_norm(p)
    return l1 ** (N - 1) / (2 * abs(k)) ** N * l1


@dataclass
class ConvergenceRow:
    k: complex
    order: int
    error: float
    bound: float


def block_error(a: TransmissionMatrix, b: TransmissionMatrix) -> float:
    """Largest infinity-operator norm over the four blocks of a - b."""
    d = a - b
    return float(max(np.abs(x).sum(axis=1).max() for x in (d.tau11, d.tau12, d.tau21, d.tau22)))


def convergence_study(p: PotentialSpec, ks, orders=(1, 2, 3), grid: int = 32):
    """Order-N truncation error against the exact transfer matrix at each k.

    Returns (rows, slopes) with slopes[N] the least-squares slope of
    log(error) against log|k|.
    """
    from .transfer import transmission_matrix

    ks = [complex(k) for k in ks]
    top = max(orders)
    rows = []
    for k in ks:
        exact = transmission_matrix(k, p)
        exp_ = born_transmission(k, p, BornConfig(order=top, grid=grid, k_min=0.0))
        for N in orders:
            rows.append(ConvergenceRow(k, N, block_error(exp_.partial_sum(N), exact),
                                       remainder_bound(k, p, N + 1)))
    slopes = {}
    for N in orders:
        sel = [r for r in rows if r.order == N]
        x = np.log([abs(r.k) for r in sel])
        y = np.log([max(r.error, 1e-300) for r in sel])
        slopes[N] = float(np.polyfit(x, y, 1)[0]) if len(sel) >= 2 else float("nan")
    return rows, slopes
