"""Distances, fidelities, diamond-norm estimation, and channel deficits.

All optimizers here return certified lower bounds: every estimate is the
objective value at a stored witness, re-evaluated on construction. Upper
bounds would need an SDP and are deliberately out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .channels import Channel

F_VS_D_TOL = 1e-9
WITNESS_TOL = 1e-9


def trace_norm(x) -> float:
    """Sum of singular values."""
    x = np.asarray(x, dtype=complex)
    return float(np.linalg.svd(x, compute_uv=False).sum())


def _herm_trace_norm(x) -> float:
    # cheaper path for Hermitian arguments
    return float(np.abs(np.linalg.eigvalsh(x)).sum())


def sqrt_fidelity(rho, sigma, validate: bool = True) -> float:
    """|| sqrt(rho) sqrt(sigma) ||_1; accepts subnormalized PSD operators."""
    if validate:
        rho = hilbert.require_psd(rho, what="rho")
        sigma = hilbert.require_psd(sigma, what="sigma")
    rs = hilbert.psd_sqrt(rho)
    m = rs @ np.asarray(sigma, dtype=complex) @ rs
    w = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0.0, None)
    return float(np.sqrt(w).sum())


def fidelity(rho, sigma, validate: bool = True) -> float:
    """Squared-convention fidelity, F(phi, psi) = tr(phi psi) for pure states."""
    return sqrt_fidelity(rho, sigma, validate=validate) ** 2


@dataclass(frozen=True)
class FidelityTraceBounds:
    lower: float          # 1 - sqrt(F)
    trace_distance: float  # (1/2) ||rho - sigma||_1
    upper: float          # sqrt(1 - F)


def check_f_vs_d(rho, sigma) -> FidelityTraceBounds:
    """Evaluate 1 - sqrt(F) <= T <= sqrt(1 - F) for normalized states.

    Raises on unnormalized input (the chain can fail there) and on violation
    beyond numerical tolerance.
    """
    rho = hilbert.require_density(rho, what="rho")
    sigma = hilbert.require_density(sigma, what="sigma")
    sf = min(sqrt_fidelity(rho, sigma, validate=False), 1.0)
    t = 0.5 * _herm_trace_norm(rho - sigma)
    b = FidelityTraceBounds(1.0 - sf, t, float(np.sqrt(max(0.0, 1.0 - sf * sf))))
    if not (b.lower <= b.trace_distance + F_VS_D_TOL and b.trace_distance <= b.upper + F_VS_D_TOL):
        raise AssertionError(f"fidelity/trace-distance chain violated: {b}")
    return b


def overlap_trace_norm(phi, psi, dims) -> float:
    """|| tr_B |phi><psi| ||_1 for kets on B (x) E with dims = (dB, dE).

    Its square equals the fidelity of the B-marginals.
    """
    phi = np.asarray(phi, dtype=complex).ravel()
    psi = np.asarray(psi, dtype=complex).ravel()
    db, de = int(dims[0]), int(dims[1])
    if phi.size != db * de or psi.size != db * de:
        raise ValueError(f"kets do not match dims {dims}")
    a = phi.reshape(db, de)
    b = psi.reshape(db, de)
    # tr_B |phi><psi| [e, e'] = sum_b phi[b, e] conj(psi[b, e'])
    return trace_norm(a.T @ b.conj())


# ---------------------------------------------------------------------------
# superoperators and the diamond-norm ascent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearMap:
    """Hermitian-preserving linear map stored by its (unnormalized) Choi matrix."""

    in_dim: int
    out_dim: int
    choi: np.ndarray = field(repr=False)

    @classmethod
    def from_channel(cls, ch: Channel) -> "LinearMap":
        return cls(ch.in_dim, ch.out_dim, ch.choi.copy())

    @classmethod
    def difference(cls, a: Channel, b: Channel) -> "LinearMap":
        if a.in_dim != b.in_dim or a.out_dim != b.out_dim:
            raise ValueError("channel difference needs matching dimensions")
        return cls(a.in_dim, a.out_dim, a.choi - b.choi)

    @classmethod
    def transpose_map(cls, d: int) -> "LinearMap":
        j = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for k in range(d):
                j[i * d + k, k * d + i] = 1.0  # Choi of transposition is SWAP
        return cls(d, d, j)

    @classmethod
    def zero(cls, d: int) -> "LinearMap":
        return cls(d, d, np.zeros((d * d, d * d), dtype=complex))

    def require_hermitian_preserving(self, tol: float = 1e-8) -> None:
        if np.abs(self.choi - self.choi.conj().T).max() > tol:
            raise ValueError("map is not Hermitian-preserving (Choi not Hermitian)")

    def apply(self, x) -> np.ndarray:
        jr = self.choi.reshape(self.in_dim, self.out_dim, self.in_dim, self.out_dim)
        return np.einsum("abcd,ac->bd", jr, np.asarray(x, dtype=complex))


def _lifted_output(jr, v_mat) -> np.ndarray:
    """(id_k (x) Gamma)(|v><v|) for v reshaped to (k, in_dim)."""
    k, _ = v_mat.shape
    out_dim = jr.shape[1]
    m = np.einsum("abcd,ia,jc->ibjd", jr, v_mat, v_mat.conj(), optimize=True)
    return m.reshape(k * out_dim, k * out_dim)


def _lifted_adjoint(jr, w, k) -> np.ndarray:
    """(id_k (x) Gamma^dag)(W) for W on C^k (x) out."""
    in_dim, out_dim = jr.shape[0], jr.shape[1]
    wr = w.reshape(k, out_dim, k, out_dim)
    q = np.einsum("abcd,ibjd->iajc", jr.conj(), wr, optimize=True)
    return q.reshape(k * in_dim, k * in_dim)


@dataclass(frozen=True)
class DiamondEstimate:
    value: float
    witness: np.ndarray = field(repr=False)
    restarts: int = 0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "witness", np.asarray(self.witness, dtype=complex).ravel())


@dataclass
class SearchConfig:
    """Shared knobs for the stochastic optimizers (one record, all tolerances)."""

    restarts: int = 32
    iters: int = 400
    samples: int = 256
    seed: int = 0
    tol_rel: float = 1e-7
    step0: float = 0.5
    fail_limit: int = 8
    slack: float = 0.05


def _ascend_diamond(jr, k, v0, iters, tol_rel):
    """Witness/eigenvector alternation from start v0; monotone in the objective."""
    in_dim, out_dim = jr.shape[0], jr.shape[1]
    v = v0 / np.linalg.norm(v0)
    best = -np.inf
    for _ in range(iters):
        m = _lifted_output(jr, v.reshape(k, in_dim))
        m = (m + m.conj().T) / 2
        w, u = np.linalg.eigh(m)
        val = float(np.abs(w).sum())
        sign = np.where(w >= 0, 1.0, -1.0)
        witness = (u * sign) @ u.conj().T
        q = _lifted_adjoint(jr, witness, k)
        q = (q + q.conj().T) / 2
        _, uq = np.linalg.eigh(q)
        v = uq[:, -1]
        if val <= best * (1 + tol_rel) + 1e-15:
            best = max(best, val)
            break
        best = val
    # one final exact evaluation at the current iterate
    m = _lifted_output(jr, v.reshape(k, in_dim))
    final = _herm_trace_norm((m + m.conj().T) / 2)
    return (final, v) if final >= best else (best, v)


def _diamond_starts(in_dim, k, restarts, rng):
    starts = []
    if k == in_dim:
        gamma = np.eye(in_dim, dtype=complex).reshape(-1) / np.sqrt(in_dim)
        starts.append(gamma)  # maximally entangled, the generic extremizer
    for i in range(min(k * in_dim, 3)):
        e = np.zeros(k * in_dim, dtype=complex)
        e[i] = 1.0
        starts.append(e)
    while len(starts) < restarts:
        starts.append(hilbert.haar_state(k * in_dim, rng))
    return starts[:restarts]


def diamond_norm_estimate(gamma: LinearMap, cfg: SearchConfig | None = None,
                          k: int | None = None) -> DiamondEstimate:
    """Multi-start lower-bound estimate of ||Gamma||_diamond.

    Maximizes ||(id_k (x) Gamma)|v><v| ||_1 over pure v; k defaults to the
    input dimension, which suffices for Hermitian-preserving maps.
    """
    cfg = cfg or SearchConfig()
    gamma.require_hermitian_preserving()
    k = gamma.in_dim if k is None else int(k)
    jr = gamma.choi.reshape(gamma.in_dim, gamma.out_dim, gamma.in_dim, gamma.out_dim)
    rng = np.random.default_rng(cfg.seed)
    best_val, best_v = -np.inf, None
    for v0 in _diamond_starts(gamma.in_dim, k, cfg.restarts, rng):
        val, v = _ascend_diamond(jr, k, v0, cfg.iters, cfg.tol_rel)
        if val > best_val:
            best_val, best_v = val, v
    est = DiamondEstimate(value=best_val, witness=best_v, restarts=cfg.restarts, seed=cfg.seed)
    check = _herm_trace_norm(_lifted_output(jr, best_v.reshape(k, gamma.in_dim)))
    if abs(check - est.value) > WITNESS_TOL * max(1.0, abs(est.value)):
        raise AssertionError("diamond witness does not reproduce its value")
    return est


@dataclass(frozen=True)
class CbRatioRecord:
    t: int
    value_t: float
    value_1: float
    ratio: float
    pass_bound: bool


def cb_ratio_check(gamma: LinearMap, t: int, cfg: SearchConfig | None = None,
                   tol: float = 1e-3) -> CbRatioRecord:
    """Estimate ||Gamma||^(t) and ||Gamma||^(1) and check the factor-t bound."""
    if t < 1:
        raise ValueError("t must be >= 1")
    cfg = cfg or SearchConfig()
    if np.abs(gamma.choi).max() == 0.0:
        return CbRatioRecord(t, 0.0, 0.0, 0.0, True)
    est_t = diamond_norm_estimate(gamma, cfg, k=t)
    est_1 = diamond_norm_estimate(gamma, cfg, k=1)
    ratio = est_t.value / est_1.value if est_1.value > 0 else np.inf
    ok = est_t.value <= t * est_1.value + tol
    return CbRatioRecord(t, est_t.value, est_1.value, ratio, bool(ok))


# ---------------------------------------------------------------------------
# channel deficits via pair search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeficitEstimate:
    value: float
    witness: tuple = field(repr=False)  # (phi, psi) kets on the input space
    restarts: int = 0
    samples: int = 0
    seed: int | None = None


def _structured_pairs(d: int):
    """Deterministic seed pairs: computational, Fourier, and qubit Y bases."""
    eye = np.eye(d, dtype=complex)
    f = np.exp(2j * np.pi * np.outer(np.arange(d), np.arange(d)) / d) / np.sqrt(d)
    pairs = []
    for i in range(d):
        for j in range(i + 1, d):
            pairs.append((eye[:, i], eye[:, j]))
            pairs.append((f[:, i], f[:, j]))
    if d == 2:
        y0 = np.array([1.0, 1j], dtype=complex) / np.sqrt(2)
        y1 = np.array([1.0, -1j], dtype=complex) / np.sqrt(2)
        pairs.append((y0, y1))
    return pairs


def _polish_pair(objective, phi, psi, cfg, rng):
    val = objective(phi, psi)
    step = cfg.step0
    fails = 0
    for _ in range(cfg.iters):
        which = rng.integers(2)
        d = len(phi)
        delta = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        if which == 0:
            cand_phi = phi + step * delta
            cand_phi /= np.linalg.norm(cand_phi)
            cand = (cand_phi, psi)
        else:
            cand_psi = psi + step * delta
            cand_psi /= np.linalg.norm(cand_psi)
            cand = (phi, cand_psi)
        cand_val = objective(*cand)
        if cand_val > val + cfg.tol_rel * max(1.0, abs(val)):
            phi, psi = cand
            val = cand_val
            fails = 0
        else:
            fails += 1
            if fails >= cfg.fail_limit:
                step *= 0.5
                fails = 0
                if step < 1e-8:
                    break
    return val, phi, psi


def _pair_search(objective, dim, cfg) -> DeficitEstimate:
    rng = np.random.default_rng(cfg.seed)
    cands = list(_structured_pairs(dim))
    for _ in range(cfg.samples):
        cands.append((hilbert.haar_state(dim, rng), hilbert.haar_state(dim, rng)))
    scored = sorted(cands, key=lambda p: objective(*p), reverse=True)
    best = (-np.inf, None, None)
    for phi, psi in scored[: cfg.restarts]:
        val, phi, psi = _polish_pair(objective, phi, psi, cfg, rng)
        if val > best[0]:
            best = (val, phi, psi)
    val, phi, psi = best
    if abs(objective(phi, psi) - val) > WITNESS_TOL * max(1.0, abs(val)):
        raise AssertionError("deficit witness does not reproduce its value")
    return DeficitEstimate(value=float(val), witness=(phi, psi), restarts=cfg.restarts,
                           samples=cfg.samples, seed=cfg.seed)


def _pure_trace_dist(phi, psi) -> float:
    ov = abs(np.vdot(phi, psi)) ** 2
    return 2.0 * np.sqrt(max(0.0, 1.0 - ov))


def geometry_deficit(ch: Channel, cfg: SearchConfig | None = None) -> DeficitEstimate:
    """sup over pure pairs of ||phi - psi||_1 - ||N(phi) - N(psi)||_1."""
    cfg = cfg or SearchConfig()

    def objective(phi, psi):
        out = ch.apply(hilbert.pure_dm(phi)) - ch.apply(hilbert.pure_dm(psi))
        return _pure_trace_dist(phi, psi) - _herm_trace_norm(out)

    return _pair_search(objective, ch.in_dim, cfg)


def forgetfulness_deficit(ch: Channel, cfg: SearchConfig | None = None) -> DeficitEstimate:
    """sup over pure pairs of ||N(phi) - N(psi)||_1 (N is usually a complement)."""
    cfg = cfg or SearchConfig()

    def objective(phi, psi):
        out = ch.apply(hilbert.pure_dm(phi)) - ch.apply(hilbert.pure_dm(psi))
        return _herm_trace_norm(out)

    return _pair_search(objective, ch.in_dim, cfg)
