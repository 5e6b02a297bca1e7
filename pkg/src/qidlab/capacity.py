"""Entropic quantities and capacity formulas: mutual information ascent,
the one-shot identification rate, amortized rate arithmetic, and the
antidegradability test.

Entropies are base 2 throughout. For a channel input rho with purification
phi, the joint state is rho_AB = (id (x) N)(phi); since ABE is pure,
H(AB) = H(E) and everything reduces to spectra of small marginals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .channels import Channel

LN2 = float(np.log(2.0))
EIG_FLOOR = 1e-12
ENTROPY_PSD_TOL = 1e-9


def entropy(rho, tol: float = ENTROPY_PSD_TOL) -> float:
    """von Neumann entropy in bits; eigenvalues below 1e-12 count as zero."""
    rho = hilbert.require_psd(rho, tol=tol)
    w = np.linalg.eigvalsh(rho)
    w = w[w > EIG_FLOOR]
    return float(-(w * np.log2(w)).sum())


def _entropy_spectrum(w) -> float:
    w = w[w > EIG_FLOOR]
    return float(-(w * np.log2(w)).sum())


@dataclass(frozen=True)
class CapacityPoint:
    """Entropic data of one channel input (reference A, output B)."""

    purification: np.ndarray = field(repr=False)
    joint_ab: np.ndarray = field(repr=False)
    h_a: float = 0.0
    h_b: float = 0.0
    h_ab: float = 0.0

    @property
    def mutual_info(self) -> float:
        return self.h_a + self.h_b - self.h_ab

    @property
    def coherent_info(self) -> float:
        return self.h_b - self.h_ab

    @property
    def cond_entropy(self) -> float:
        return self.h_ab - self.h_b

    def __post_init__(self):
        if self.h_a < -1e-9 or self.h_b < -1e-9 or self.h_ab < -1e-9:
            raise ValueError("negative entropy")
        if self.mutual_info > 2.0 * min(self.h_a, self.h_b) + 1e-9:
            raise ValueError("mutual information exceeds 2 min(H(A), H(B))")


def capacity_point(ch: Channel, rho_in) -> CapacityPoint:
    """Push a purification of the input through the channel and collect entropies."""
    rho_in = hilbert.require_density(rho_in)
    w, u = hilbert.eigh_clipped(rho_in)
    d = ch.in_dim
    # |phi> = sum_a sqrt(w_a) |a>_A |u_a>_A', channel acts on the second factor
    phi = (np.sqrt(w)[:, None] * u.T).reshape(-1)  # index (a, a')
    joint = np.zeros((d * ch.out_dim, d * ch.out_dim), dtype=complex)
    phi_mat = phi.reshape(d, d)
    for k in ch.kraus:
        m = phi_mat @ k.T  # (A, B) amplitudes of (I (x) K)|phi>
        v = m.reshape(-1)
        joint += np.outer(v, v.conj())
    h_a = _entropy_spectrum(w)
    h_b = entropy(hilbert.partial_trace(joint, (d, ch.out_dim), keep=1), tol=1e-7)
    h_ab = _entropy_spectrum(np.clip(np.linalg.eigvalsh(joint), 0.0, None))
    return CapacityPoint(purification=phi, joint_ab=joint, h_a=h_a, h_b=h_b, h_ab=h_ab)


def mutual_info(ch: Channel, rho_in) -> float:
    """I(A:B) = H(rho) + H(N(rho)) - H(N^c(rho)), using purity of ABE."""
    comp = _cached_complement(ch)
    return (_entropy_psd(rho_in) + _entropy_psd(ch.apply(rho_in))
            - _entropy_psd(comp.apply(rho_in)))


def coherent_info(ch: Channel, rho_in) -> float:
    comp = _cached_complement(ch)
    return _entropy_psd(ch.apply(rho_in)) - _entropy_psd(comp.apply(rho_in))


def _cached_complement(ch: Channel) -> Channel:
    comp = getattr(ch, "_complement_cache", None)
    if comp is None:
        comp = ch.complement()
        object.__setattr__(ch, "_complement_cache", comp)
    return comp


def _entropy_psd(rho) -> float:
    w = np.clip(np.linalg.eigvalsh((rho + rho.conj().T) / 2), 0.0, None)
    return _entropy_spectrum(w)


def mutual_info_gradient(ch: Channel, rho_in) -> np.ndarray:
    """Euclidean gradient of I(A:B) at a full-rank input.

    d/drho of H(M(rho)) is -M^dag(log2 M(rho)) - I/ln2 for trace-preserving M;
    the affine terms matter only for the finite-difference cross-check.
    """
    comp = _cached_complement(ch)

    def log_term(mapped):
        w, u = np.linalg.eigh((mapped + mapped.conj().T) / 2)
        w = np.clip(w, EIG_FLOOR, None)
        return (u * np.log2(w)) @ u.conj().T

    g = -log_term(np.asarray(rho_in, dtype=complex))
    g = g - ch.adjoint_apply(log_term(ch.apply(rho_in)))
    g = g + comp.adjoint_apply(log_term(comp.apply(rho_in)))
    g = g - np.eye(ch.in_dim) / LN2
    return (g + g.conj().T) / 2


def _project_simplex(w: np.ndarray) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    idx = np.nonzero(u * np.arange(1, len(w) + 1) > (css - 1.0))[0][-1]
    theta = (css[idx] - 1.0) / (idx + 1.0)
    return np.maximum(w - theta, 0.0)


def _project_density(m: np.ndarray, floor: float = 1e-13) -> np.ndarray:
    w, u = np.linalg.eigh((m + m.conj().T) / 2)
    w = _project_simplex(w)
    w = np.maximum(w, floor)
    w = w / w.sum()
    return (u * w) @ u.conj().T


@dataclass
class AscentConfig:
    restarts: int = 4
    iters: int = 400
    seed: int = 0
    tol: float = 1e-11


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    argmax: np.ndarray = field(repr=False)
    restart_values: tuple = ()


def _ascend_mutual_info(ch: Channel, rho0, iters, tol):
    rho = _project_density(np.asarray(rho0, dtype=complex))
    val = mutual_info(ch, rho)
    step = 1.0
    for _ in range(iters):
        g = mutual_info_gradient(ch, rho)
        improved = False
        while step > 1e-13:
            cand = _project_density(rho + step * g)
            cv = mutual_info(ch, cand)
            if cv > val + tol:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rho, val = cand, cv
        step = min(step * 4.0, 8.0)
    return val, rho


def entanglement_assisted_capacity(ch: Channel, cfg: AscentConfig | None = None) -> CapacityEstimate:
    """Maximize I(A:B) over inputs by projected gradient ascent (concave)."""
    cfg = cfg or AscentConfig()
    rng = np.random.default_rng(cfg.seed)
    d = ch.in_dim
    starts = [np.eye(d, dtype=complex) / d]
    for _ in range(cfg.restarts - 1):
        v = hilbert.haar_state(d, rng)
        starts.append(0.7 * hilbert.pure_dm(v) + 0.3 * np.eye(d) / d)
    vals, best = [], None
    for rho0 in starts:
        val, rho = _ascend_mutual_info(ch, rho0, cfg.iters, cfg.tol)
        vals.append(val)
        if best is None or val > best[0]:
            best = (val, rho)
    return CapacityEstimate(value=best[0], argmax=best[1], restart_values=tuple(vals))


def q_id_one_shot(ch: Channel, cfg: AscentConfig | None = None,
                  coh_tol: float = 1e-6) -> float:
    """sup I(A:B) over inputs with strictly positive coherent information.

    Runs the unconstrained ascent first; if its argmax is feasible the
    answer is the full capacity. Otherwise feasible sampled inputs are
    pushed toward the capacity argmax by line search while they stay
    feasible. Returns 0 when nothing feasible is found.
    """
    cfg = cfg or AscentConfig()
    est = entanglement_assisted_capacity(ch, cfg)
    if coherent_info(ch, est.argmax) > coh_tol:
        return est.value
    rng = np.random.default_rng(cfg.seed + 1)
    d = ch.in_dim
    candidates = [np.eye(d, dtype=complex) / d]
    for _ in range(32):
        v = hilbert.haar_state(d, rng)
        w = rng.uniform(0.2, 1.0)
        candidates.append(w * hilbert.pure_dm(v) + (1 - w) * np.eye(d) / d)
    feasible = [r for r in candidates if coherent_info(ch, r) > coh_tol]
    if not feasible:
        return 0.0
    best = 0.0
    for rho in feasible:
        val = mutual_info(ch, rho)
        # walk toward the capacity argmax while the constraint stays active
        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = (lo + hi) / 2
            cand = (1 - mid) * rho + mid * est.argmax
            if coherent_info(ch, cand) > coh_tol:
                lo = mid
                val = max(val, mutual_info(ch, cand))
            else:
                hi = mid
        best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# amortized rate arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateParams:
    """Block-length bookkeeping: rate = (log|S| - 2 log|C|) / n."""

    n: int
    log_s: float
    log_c: float
    log_f: float
    rate: float

    def __post_init__(self):
        expect = (self.log_s - 2.0 * self.log_c) / self.n
        if abs(self.rate - expect) > 1e-12:
            raise ValueError(f"rate {self.rate} != (log_s - 2 log_c)/n = {expect}")


def amortized_rate(params: RateParams) -> float:
    return params.rate


def direct_coding_params(point: CapacityPoint, delta: float, n: int = 1,
                         c: float = 1.0) -> RateParams:
    """Register sizes of the random-subspace construction at one input point.

    Case 1 (positive coherent information, H(E) < H(B)): no amortization,
    discard register f = H(B) - H(E) - (7+c) delta. Case 2: amortization
    rate R = H(E) - H(B) + (7+c) delta, nothing discarded. Either way
    log|S| = n (H(A) + R + f - 8 delta) and the rate lands on
    I(A:B) - (15+c) delta.
    """
    h_a, h_b = point.h_a, point.h_b
    h_e = point.h_ab  # ABE pure
    if h_e < h_b:
        r, f = 0.0, h_b - h_e - (7.0 + c) * delta
    else:
        r, f = h_e - h_b + (7.0 + c) * delta, 0.0
    log_s = n * (h_a + r + f - 8.0 * delta)
    log_c = n * r
    rate = (log_s - 2.0 * log_c) / n
    return RateParams(n=n, log_s=log_s, log_c=log_c, log_f=n * f, rate=rate)


# ---------------------------------------------------------------------------
# antidegradability
# ---------------------------------------------------------------------------

def _project_cptp_choi(j: np.ndarray, d_in: int, d_out: int, rounds: int = 30) -> np.ndarray:
    """Alternate PSD clipping and the trace-preservation affine correction."""
    eye = np.eye(d_in, dtype=complex)
    for _ in range(rounds):
        w, u = np.linalg.eigh((j + j.conj().T) / 2)
        j = (u * np.clip(w, 0.0, None)) @ u.conj().T
        marg = hilbert.partial_trace(j, (d_in, d_out), keep=0)
        j = j - np.kron((marg - eye) / d_out, np.eye(d_out, dtype=complex))
    w, u = np.linalg.eigh((j + j.conj().T) / 2)
    return (u * np.clip(w, 0.0, None)) @ u.conj().T


def antidegradability_gap(ch: Channel, iters: int = 400) -> float:
    """Residual || Choi(T . N^c) - Choi(N) ||_2 minimized over CPTP T.

    Projected gradient on the Choi matrix of T with alternating-projection
    feasibility; a residual near zero flags the channel as antidegradable.
    The returned value is evaluated at a strictly feasible iterate, so it is
    an upper bound on the true gap (a heuristic certificate, not an SDP one).
    """
    comp = ch.complement()
    d_a, d_b, d_e = ch.in_dim, ch.out_dim, ch.env_dim
    cc = comp.choi.reshape(d_a, d_e, d_a, d_e)  # N^c as (A, E, A, E)
    target = ch.choi

    def forward(j_t):
        jt = j_t.reshape(d_e, d_b, d_e, d_b)
        out = np.einsum("ebfd,iejf->ibjd", jt, cc, optimize=True)
        return out.reshape(d_a * d_b, d_a * d_b)

    def adjoint(y):
        yr = y.reshape(d_a, d_b, d_a, d_b)
        out = np.einsum("iejf,ibjd->ebfd", cc.conj(), yr, optimize=True)
        return out.reshape(d_e * d_b, d_e * d_b)

    # Lipschitz constant of the quadratic objective via power iteration
    v = np.eye(d_e * d_b, dtype=complex) / (d_e * d_b)
    lam = 1.0
    for _ in range(25):
        v = adjoint(forward(v))
        lam = np.linalg.norm(v)
        if lam == 0:
            break
        v = v / lam
    step = 1.0 / max(lam, 1e-12)

    j_t = np.kron(np.eye(d_e, dtype=complex), np.eye(d_b, dtype=complex) / d_b)
    for _ in range(iters):
        grad = adjoint(forward(j_t) - target)
        j_t = _project_cptp_choi(j_t - step * grad, d_e, d_b)
    j_t = _project_cptp_choi(j_t, d_e, d_b, rounds=200)
    return float(np.linalg.norm(forward(j_t) - target))
