"""Property suite for the algebraic identities of T(k) and S(k).

Identities checked (maximum deviation over the samples):

    unitarity      | |det S(k)| - 1 |                       real k
    conjugation    || tau22(k) - conj tau11(conj k) ||_F    complex k
                   || tau12(k) - conj tau21(conj k) ||_F   (relative to ||T||_F)
    reciprocity    | conj det S(conj k) * det S(k) - 1 |    complex k
    wronskian      variation in x of t(P Y_u) J (P Y_v)      per projector P
    projector_det  | |det (P T P on range P)| - 1 |          real k, per P

Here Y = (u, u'), P = diag(P, P) and J = [[0, I], [-I, 0]].  A projector
is used only when P V = tV P on every piece; otherwise it is skipped and
reported.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import PotentialSpec
from .transfer import log_det_tau, propagate, scattering_matrix, transmission_blocks

DEFAULT_TOL = 1e-8
IDENTITIES = ("unitarity", "conjugation", "reciprocity", "wronskian", "projector_det")


@dataclass
class SymmetryReport:
    deviations: dict
    tolerances: dict
    passed: dict
    samples: dict
    skipped: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _is_real(k: np.ndarray) -> np.ndarray:
    return np.abs(k.imag) <= 1e-14 * np.maximum(1.0, np.abs(k))


def projector_compatible(p: PotentialSpec, P: np.ndarray, tol: float = 1e-12) -> bool:
    P = np.asarray(P, dtype=float)
    if P.shape != (p.n, p.n) or not np.allclose(P @ P, P, atol=tol):
        return False
    return all(np.allclose(P @ v, v.T @ P, atol=tol * max(1.0, np.abs(v).max()))
               for v in p.pieces)


def _range_basis(P2: np.ndarray) -> np.ndarray:
    u, s, _ = np.linalg.svd(P2)
    return u[:, s > 1e-10 * max(1.0, s[0])]


def unitarity_deviation(p: PotentialSpec, ks) -> float:
    ks = np.asarray(ks, dtype=complex).reshape(-1)
    if ks.size == 0:
        return 0.0
    d = [abs(abs(scattering_matrix(k, p, check=False).detS) - 1.0) for k in ks]
    return float(max(d))


def conjugation_deviation(p: PotentialSpec, ks) -> float:
    ks = np.asarray(ks, dtype=complex).reshape(-1)
    if ks.size == 0:
        return 0.0
    a11, a12, a21, a22 = transmission_blocks(ks, p)
    b11, b12, b21, b22 = transmission_blocks(np.conj(ks), p)
    scale = np.maximum(1.0, np.sqrt(sum(np.linalg.norm(x, axis=(1, 2)) ** 2
                                        for x in (a11, a12, a21, a22))))
    d1 = np.linalg.norm(a22 - np.conj(b11), axis=(1, 2)) / scale
    d2 = np.linalg.norm(a12 - np.conj(b21), axis=(1, 2)) / scale
    return float(max(d1.max(), d2.max()))


def reciprocity_deviation(p: PotentialSpec, ks) -> float:
    ks = np.asarray(ks, dtype=complex).reshape(-1)
    if ks.size == 0:
        return 0.0

    def log_s(k):
        return (log_det_tau(k, p, "11", method="series")
                - log_det_tau(k, p, "22", method="series"))

    z = np.conj(log_s(np.conj(ks))) + log_s(ks)
    return float(np.max(np.abs(np.expm1(z))))


def wronskian_deviation(p: PotentialSpec, ks, P: np.ndarray, rng: np.random.Generator,
                        points: int = 10) -> float:
    n = p.n
    ks = np.asarray(ks, dtype=complex).reshape(-1)
    if ks.size == 0 or p.m == 0:
        return 0.0
    P2 = np.kron(np.eye(2), np.asarray(P, dtype=float))
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    xs = np.linspace(p.left, p.right, points + 2)[1:-1]
    worst = 0.0
    for k in ks:
        y0 = rng.normal(size=(2, 2 * n)) + 1j * rng.normal(size=(2, 2 * n))
        vals, scale = [], 0.0
        for x in np.concatenate([[p.left], xs]):
            F = propagate(p, k, x)
            yu, yv = P2 @ (F @ y0[0]), P2 @ (F @ y0[1])
            vals.append(yu @ J @ yv)
            scale = max(scale, np.linalg.norm(yu) * np.linalg.norm(yv))
        vals = np.array(vals)
        worst = max(worst, float(np.max(np.abs(vals - vals[0])) / max(scale, 1e-300)))
    return worst


def projector_det_deviation(p: PotentialSpec, ks, P: np.ndarray) -> float:
    ks = np.asarray(ks, dtype=complex).reshape(-1)
    if ks.size == 0:
        return 0.0
    P2 = np.kron(np.eye(2), np.asarray(P, dtype=float))
    B = _range_basis(P2)
    if B.shape[1] == 0:
        return 0.0
    Bp = np.linalg.pinv(B)
    t11, t12, t21, t22 = transmission_blocks(ks, p)
    T = np.block([[t11, t12], [t21, t22]])
    R = Bp @ P2 @ T @ P2 @ B
    return float(np.max(np.abs(np.abs(np.linalg.det(R)) - 1.0)))


def run_symmetry_suite(p: PotentialSpec, k_samples, tolerances: dict | None = None,
                       projectors=None, seed: int = 0) -> SymmetryReport:
    """Evaluate every identity on the samples; real k are detected automatically."""
    ks = np.asarray(k_samples, dtype=complex).reshape(-1)
    if np.any(ks == 0):
        raise ValueError("k = 0 is excluded")
    tol = {name: DEFAULT_TOL for name in IDENTITIES}
    tol.update(tolerances or {})
    real = ks[_is_real(ks)].real.astype(complex)
    cplx = ks[~_is_real(ks)]
    projectors = [np.eye(p.n)] if projectors is None else [np.asarray(P, float) for P in projectors]
    rng = np.random.default_rng(seed)

    dev = {
        "unitarity": unitarity_deviation(p, real),
        "conjugation": conjugation_deviation(p, cplx),
        "reciprocity": reciprocity_deviation(p, cplx),
        "wronskian": 0.0,
        "projector_det": 0.0,
    }
    skipped = []
    for i, P in enumerate(projectors):
        if not projector_compatible(p, P):
            skipped.append(f"projector {i}: P V != tV P (or not a projector); identity skipped")
            continue
        dev["wronskian"] = max(dev["wronskian"], wronskian_deviation(p, ks, P, rng))
        dev["projector_det"] = max(dev["projector_det"], projector_det_deviation(p, real, P))
    passed = {name: bool(dev[name] <= tol[name]) for name in IDENTITIES}
    samples = {
        "n_real": int(real.size), "n_complex": int(cplx.size), "n_projectors": len(projectors),
        "abs_k_range": [float(np.abs(ks).min()), float(np.abs(ks).max())] if ks.size else [],
        "l1_norm": float(np.sum(np.abs(p.pieces).sum(axis=(1, 2)) * p.widths)) if p.m else 0.0,
    }
    return SymmetryReport(dev, tol, passed, samples, skipped)
