"""Fundamental solutions, transmission and scattering matrices.

Solutions of ``-u'' + V u = k^2 u`` are propagated piece by piece with the
exact propagator of a constant-coefficient second-order system,

    [[C, S], [-N S, C]],   N = k^2 - V,  C = cos(a sqrt N),  S = sin(a sqrt N)/sqrt N,

where C and S are evaluated as power series in N (no square root branch).
Plane-wave coefficients (c, d) of ``u = e^{-ikx} c + e^{ikx} d`` are referenced
to x = 0.

All evaluators accept a scalar k or an array of k and vectorize over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PotentialSpec

_TAYLOR_TERMS = 14
# growth e^{|Im sqrt N| a} of one propagator is kept below e^{_MAX_GROWTH}
_MAX_GROWTH = 150.0
COND_LIMIT = 1e12


class NearResonance(ArithmeticError):
    """tau22 is numerically singular at the requested k."""

    def __init__(self, k, cond):
        super().__init__(f"tau22 ill-conditioned at k={k} (cond={cond:.3g})")
        self.k = k
        self.cond = cond


def _check_k(k) -> np.ndarray:
    k = np.asarray(k, dtype=complex)
    if np.any(k == 0):
        raise ValueError("k = 0 is excluded")
    if not np.all(np.isfinite(k)):
        raise ValueError("k must be finite")
    return k


def cos_sinc(nmat: np.ndarray, a: float):
    """C = cos(a sqrt N), S = sin(a sqrt N)/sqrt N for a stack of matrices N.

    Scaling by 4^-s, a truncated Taylor series, then s double-angle steps
    C <- 2C^2 - I, S <- 2SC.
    """
    nmat = np.asarray(nmat, dtype=complex)
    K, n, _ = nmat.shape
    eye = np.eye(n)
    norms = np.abs(nmat).sum(axis=1).max(axis=1) * a * a
    s_all = np.maximum(0, np.ceil(np.log(np.maximum(norms, 1e-300)) / math.log(4.0))).astype(int)
    C = np.empty_like(nmat)
    S = np.empty_like(nmat)
    for s in np.unique(s_all):
        idx = np.flatnonzero(s_all == s)
        h = a / 2.0 ** s
        A = -(h * h) * nmat[idx]  # cos series in -h^2 N
        c = np.broadcast_to(eye, A.shape).astype(complex)
        sn = c.copy()
        # Horner: sum_j A^j/(2j)! and sum_j A^j/(2j+1)!
        for j in range(_TAYLOR_TERMS, 0, -1):
            c = eye + (A @ c) / ((2 * j) * (2 * j - 1))
            sn = eye + (A @ sn) / ((2 * j + 1) * (2 * j))
        sn = h * sn
        for _ in range(s):
            sn = 2.0 * (sn @ c)
            c = 2.0 * (c @ c) - eye
        C[idx] = c
        S[idx] = sn
    return C, S


def _subdivided(p: PotentialSpec, k: np.ndarray):
    """Yield (width, V) per propagation step, splitting wide pieces."""
    kmax = float(np.max(np.abs(k.imag))) if k.size else 0.0
    for j in range(p.m):
        a = float(p.widths[j])
        vnorm = float(np.abs(p.pieces[j]).sum(axis=0).max())
        growth = a * (kmax + math.sqrt(vnorm))
        parts = max(1, math.ceil(growth / _MAX_GROWTH))
        for _ in range(parts):
            yield a / parts, p.pieces[j]


def piece_propagator(k, v: np.ndarray, a: float, inverse: bool = False) -> np.ndarray:
    """Propagator of (u, u') across one constant piece of width a."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    n = v.shape[0]
    N = k[:, None, None] ** 2 * np.eye(n) - v
    C, S = cos_sinc(N, a)
    out = np.empty((k.size, 2 * n, 2 * n), dtype=complex)
    sign = -1.0 if inverse else 1.0
    out[:, :n, :n] = C
    out[:, :n, n:] = sign * S
    out[:, n:, :n] = -sign * (N @ S)
    out[:, n:, n:] = C
    return out


def _product(p: PotentialSpec, k: np.ndarray, inverse: bool):
    """Normalized ordered product of piece propagators and its log scale."""
    n = p.n
    G = np.broadcast_to(np.eye(2 * n, dtype=complex), (k.size, 2 * n, 2 * n)).copy()
    logscale = np.zeros(k.size)
    for a, v in _subdivided(p, k):
        P = piece_propagator(k, v, a, inverse=inverse)
        # forward: F = P_m ... P_1; inverse: G = P_1^-1 ... P_m^-1
        G = G @ P if inverse else P @ G
        scale = np.abs(G).max(axis=(1, 2))
        G /= scale[:, None, None]
        logscale += np.log(scale)
    return G, logscale


def fundamental_matrix(k, p: PotentialSpec) -> np.ndarray:
    """Map (u, u')(x0) -> (u, u')(x_m) for solutions at wavenumber k."""
    kk = _check_k(k)
    flat = kk.reshape(-1)
    G, logscale = _product(p, flat, inverse=False)
    with np.errstate(over="ignore", invalid="ignore"):
        F = G * np.exp(logscale)[:, None, None]
    if not np.all(np.isfinite(F)):
        raise OverflowError("fundamental matrix overflows; |Im k| * width too large")
    return F.reshape(kk.shape + F.shape[1:])


def propagate(p: PotentialSpec, k: complex, x: float) -> np.ndarray:
    """Fundamental matrix from the left support edge x0 to the point x."""
    if x <= p.left or p.m == 0:
        return np.eye(2 * p.n, dtype=complex)
    x = min(x, p.right)
    bp = p.breakpoints
    j = int(np.searchsorted(bp, x, side="right")) - 1
    j = min(j, p.m - 1)
    bps = np.append(bp[: j + 1], x)
    if bps[-1] <= bps[-2]:
        bps = bps[:-1]
    sub = PotentialSpec(p.n, bps, p.pieces[: bps.size - 1])
    return fundamental_matrix(k, sub)


@dataclass(frozen=True)
class _Core:
    """T blocks as exp(logscale + phase_ab) * core_ab, overflow-free."""

    k: np.ndarray
    logscale: np.ndarray
    core: np.ndarray  # (K, 2, 2, n, n)
    x0: float
    xm: float

    def phase(self, a: int, b: int) -> np.ndarray:
        # tau_11 ~ e^{-ik(xm-x0)}, tau_12 ~ e^{ik(x0+xm)}, tau_21 ~ e^{-ik(x0+xm)}, tau_22 ~ e^{ik(xm-x0)}
        s = (+1 if a == 0 else -1, -1 if b == 0 else +1)
        return 1j * self.k * (s[0] * self.x0 + s[1] * self.xm)

    def log_det(self, a: int, b: int) -> np.ndarray:
        n = self.core.shape[-1]
        sign, logabs = np.linalg.slogdet(self.core[:, a, b])
        with np.errstate(divide="ignore"):
            return n * (self.logscale + self.phase(a, b)) + logabs + 1j * np.angle(sign)

    def block(self, a: int, b: int) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            fac = np.exp(self.logscale + self.phase(a, b))
            out = fac[:, None, None] * self.core[:, a, b]
        if not np.all(np.isfinite(out)):
            raise OverflowError("transmission matrix overflows; |Im k| * width too large")
        return out


def _core(k: np.ndarray, p: PotentialSpec) -> _Core:
    n = p.n
    K = k.size
    G, logscale = _product(p, k, inverse=True)
    ik = 1j * k[:, None, None]
    # W(x)^-1 = diag(e^{ikx}, e^{-ikx}) L,  W(x) = R diag(e^{-ikx}, e^{ikx})
    G11, G12 = G[:, :n, :n], G[:, :n, n:]
    G21, G22 = G[:, n:, :n], G[:, n:, n:]
    # L = [[I/2, -I/(2ik)], [I/2, I/(2ik)]],  R = [[I, I], [-ik I, ik I]]
    GR_1 = G11 - ik * G12  # G R, first block column
    GR_2 = G11 + ik * G12
    GR_3 = G21 - ik * G22
    GR_4 = G21 + ik * G22
    core = np.empty((K, 2, 2, n, n), dtype=complex)
    core[:, 0, 0] = 0.5 * GR_1 - GR_3 / (2 * ik)
    core[:, 0, 1] = 0.5 * GR_2 - GR_4 / (2 * ik)
    core[:, 1, 0] = 0.5 * GR_1 + GR_3 / (2 * ik)
    core[:, 1, 1] = 0.5 * GR_2 + GR_4 / (2 * ik)
    return _Core(k, logscale, core, p.left, p.right)


@dataclass(frozen=True)
class TransmissionMatrix:
    tau11: np.ndarray
    tau12: np.ndarray
    tau21: np.ndarray
    tau22: np.ndarray
    k: complex

    def full(self) -> np.ndarray:
        return np.block([[self.tau11, self.tau12], [self.tau21, self.tau22]])

    def __sub__(self, other: "TransmissionMatrix") -> "TransmissionMatrix":
        return TransmissionMatrix(self.tau11 - other.tau11, self.tau12 - other.tau12,
                                  self.tau21 - other.tau21, self.tau22 - other.tau22, self.k)


def transmission_blocks(k, p: PotentialSpec):
    """Vectorized T(k): returns tau11, tau12, tau21, tau22 stacked over k."""
    kk = _check_k(k).reshape(-1)
    if p.m == 0 or p.is_zero():
        # exact; the plane-wave products would cancel terms ~ e^{2|Im k| width}
        eye = np.broadcast_to(np.eye(p.n, dtype=complex), (kk.size, p.n, p.n)).copy()
        zero = np.zeros_like(eye)
        return eye, zero, zero.copy(), eye.copy()
    c = _core(kk, p)
    return c.block(0, 0), c.block(0, 1), c.block(1, 0), c.block(1, 1)


def transmission_matrix(k: complex, p: PotentialSpec) -> TransmissionMatrix:
    t11, t12, t21, t22 = transmission_blocks(k, p)
    return TransmissionMatrix(t11[0], t12[0], t21[0], t22[0], complex(k))


def log_det_tau(k, p: PotentialSpec, block: str = "22", method: str = "layered") -> np.ndarray:
    """log det tau_11 or tau_22 (arbitrary branch of the imaginary part).

    Never overflows, which matters deep in the lower half plane where the
    entries grow like exp(2 |Im k| width).  method='layered' (default) uses
    the stable mode recursion and falls back to the series propagator when a
    piece of V is not diagonalizable; method='series' forces the latter.
    det tau_11(k) = conj det tau_22(conj k) for real V.
    """
    if block not in ("11", "22"):
        raise ValueError(f"block must be '11' or '22', got {block!r}")
    if method not in ("layered", "series"):
        raise ValueError(f"unknown method {method!r}")
    kk = _check_k(k)
    flat = kk.reshape(-1)
    if p.m == 0 or p.is_zero():
        return np.zeros(kk.shape, dtype=complex)
    if method == "layered":
        arg = flat if block == "22" else np.conj(flat)
        out = log_det_tau22_layered(arg, p)
        if out is not None:
            out = out if block == "22" else np.conj(out)
            return out.reshape(kk.shape)
    c = _core(flat, p)
    a = {"11": 0, "22": 1}[block]
    return c.log_det(a, a).reshape(kk.shape)


def det_tau22(k, p: PotentialSpec) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(log_det_tau(k, p, "22"))


def log_det_S(k, p: PotentialSpec) -> np.ndarray:
    return log_det_tau(k, p, "11") - log_det_tau(k, p, "22")


@dataclass(frozen=True)
class ScatteringData:
    S: np.ndarray
    detS: complex
    det_tau11: complex
    det_tau22: complex
    cond_tau22: float


def scattering_matrix(k: complex, p: PotentialSpec, check: bool = True) -> ScatteringData:
    """S from the blocks of T; raises NearResonance if tau22 is near singular."""
    T = transmission_matrix(k, p)
    # condition of tau22 measured against the scale of T, so that a 1x1
    # tau22 close to zero is also flagged
    with np.errstate(divide="ignore"):
        smin = np.linalg.svd(T.tau22, compute_uv=False)[-1]
        cond = float(np.linalg.norm(T.full(), 2) / smin) if smin > 0 else np.inf
    if check and not cond < COND_LIMIT:
        raise NearResonance(k, cond)
    # LAPACK gesv: LU with partial pivoting
    inv22_t21 = np.linalg.solve(T.tau22, T.tau21)
    inv22 = np.linalg.solve(T.tau22, np.eye(p.n))
    S = np.block([
        [T.tau11 - T.tau12 @ inv22_t21, T.tau12 @ inv22],
        [-inv22_t21, inv22],
    ])
    d11 = complex(np.linalg.det(T.tau11))
    d22 = complex(np.linalg.det(T.tau22))
    return ScatteringData(S, d11 / d22, d11, d22, cond)


# --- stable determinant for resonance work ---------------------------------
#
# In the lower half plane the series propagator produces det tau22 as a
# difference of terms ~exp(2|Im k| width) larger than the result.  The
# layered evaluation below expands each piece in eigenmodes exp(+-i q x) with
# Im q >= 0, references every mode at the end it decays from, and chains
# the per-interface scattering matrices with the star product, so only
# bounded quantities are ever combined.

_EIG_COND_LIMIT = 1e8


@dataclass(frozen=True)
class _Modes:
    Q: np.ndarray       # eigenvectors of V (n, n)
    lam: np.ndarray     # eigenvalues of V (n,)


def _piece_modes(p: PotentialSpec):
    modes = []
    for v in p.pieces:
        lam, Q = np.linalg.eig(v)
        if np.linalg.cond(Q) > _EIG_COND_LIMIT:
            return None
        modes.append(_Modes(Q.astype(complex), lam.astype(complex)))
    return modes


def _star(A, B):
    """Redheffer star product of S = (r, t', t, r') tuples, batched over k."""
    rA, tpA, tA, rpA = A
    rB, tpB, tB, rpB = B
    n = rA.shape[-1]
    eye = np.eye(n)
    X = np.linalg.solve(eye - rpA @ rB, tA)              # (I - r'_A r_B)^-1 t_A
    Y = np.linalg.solve(eye - rB @ rpA, tpB)             # (I - r_B r'_A)^-1 t'_B
    return (rA + tpA @ (rB @ X), tpA @ Y, tB @ X, rpB + tB @ (rpA @ Y))


def _mode_q(k: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Wavenumbers q with q^2 = k^2 - lam and Im q >= 0, shape (K, n)."""
    return 1j * np.sqrt(lam[None, :] - k[:, None] ** 2)


def _diff(q2, q1, lam2, lam1):
    """q2_i - q1_j without cancellation, using q2^2 - q1^2 = lam1 - lam2."""
    s = q2[:, :, None] + q1[:, None, :]
    d = q2[:, :, None] - q1[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        alt = (lam1[None, None, :] - lam2[None, :, None]) / s
    return np.where(np.abs(s) >= np.abs(d), alt, d), s


def _interface(left, right):
    """S of the junction from (Q1, lam1, q1) to (Q2, lam2, q2).

    With G = Q2^-1 Q1 and H = q2^-1 G q1, continuity of (u, u') gives
    a'+b' = G(a+b), a'-b' = H(a-b); the blocks follow in closed form and
    vanish exactly when both sides carry the same modes.
    """
    (G, lam1, q1), (lam2, q2) = left, right
    d, s = _diff(q2, q1, lam2, lam1)
    Gm = G[None] * d / q2[:, :, None]          # G - H
    Gp = G[None] * s / q2[:, :, None]          # G + H
    n = G.shape[-1]
    inv = np.linalg.inv(Gp)
    r = -inv @ Gm
    tp = 2.0 * inv
    rp = Gm @ inv
    t = 0.5 * (Gp + Gm @ r)
    return r, tp, t, rp


def _layered_S(k: np.ndarray, p: PotentialSpec, modes):
    """Global S in decaying-mode amplitudes referenced at x0 and x_m.

    Returns the S blocks and q of the free region (+k or -k per sample)."""
    n = p.n
    K = k.size
    eye = np.eye(n, dtype=complex)
    lam0 = np.zeros(n, dtype=complex)
    q0 = _mode_q(k, lam0)
    zero = np.zeros((K, n, n), dtype=complex)
    idx = np.arange(n)
    prevQ, prevlam, prevq = eye, lam0, q0
    S = None
    for j, md in enumerate(modes):
        q = _mode_q(k, md.lam)
        G = np.linalg.solve(md.Q, prevQ)
        iface = _interface((G, prevlam, prevq), (md.lam, q))
        S = iface if S is None else _star(S, iface)
        E = zero.copy()
        E[:, idx, idx] = np.exp(1j * q * p.widths[j])
        S = _star(S, (zero, E, E, zero))
        prevQ, prevlam, prevq = md.Q, md.lam, q
    S = _star(S, _interface((prevQ, prevlam, prevq), (lam0, q0)))
    return S, q0[:, 0]


def log_det_tau22_layered(k, p: PotentialSpec) -> np.ndarray:
    """log det tau22 via the layered scattering recursion; None if some piece
    of V is not diagonalizable."""
    kk = _check_k(k)
    flat = kk.reshape(-1)
    if p.m == 0 or p.is_zero():
        return np.zeros(kk.shape, dtype=complex)
    modes = _piece_modes(p)
    if modes is None:
        return None
    n = p.n
    (r, tp, t, rp), kappa = _layered_S(flat, p, modes)
    phase = n * 1j * flat * (p.right - p.left)
    sign_t, log_t = np.linalg.slogdet(t)
    log_det_t = log_t + 1j * np.angle(sign_t)
    full = np.concatenate([np.concatenate([r, tp], axis=-1),
                           np.concatenate([t, rp], axis=-1)], axis=-2)
    sign_s, log_s = np.linalg.slogdet(full)
    with np.errstate(divide="ignore"):
        log_det_s = log_s + 1j * np.angle(sign_s)
    lower = phase + log_det_s - log_det_t + (1j * math.pi * n if n % 2 else 0.0)
    upper = phase - log_det_t
    # kappa = -k: forward modes carry c, backward d; kappa = +k: the reverse
    flipped = np.abs(kappa + flat) < np.abs(kappa - flat)
    return np.where(flipped, lower, upper).reshape(kk.shape)
