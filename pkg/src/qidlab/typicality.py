"""Type and typical projectors for n-fold product states, with the
property checks used by the direct-coding construction.

The n-copy state of a tripartite pure state never gets materialized:
writing |rho> = sum_a sqrt(p_a) |a>_A |w_a>_BE in the Schmidt basis of A,
the type-projected state is an equal superposition over the type class,
and all marginals reduce to Gram matrices of per-copy tensor factors on
B^n and E^n separately (each of which stays desk-sized).

Type alphabets index the spectrum in nonincreasing order: symbol 0 is the
largest eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hilbert

OP_CAP = 1024       # explicit projector matrices (spec'd 2^10 default)
BUNDLE_CAP = 4096   # per-system dimension cap inside bundles
EIG_CUT = 1e-12


def multiset_permutations(counts):
    """Distinct arrangements of a multiset given per-symbol counts."""
    counts = list(counts)
    n = sum(counts)
    if n == 0:
        yield ()
        return
    for sym, c in enumerate(counts):
        if c > 0:
            counts[sym] -= 1
            for rest in multiset_permutations(counts):
                yield (sym,) + rest
            counts[sym] += 1


def closest_type(spectrum, n: int) -> tuple:
    """Integer frequency vector nearest to n * spectrum (largest remainder)."""
    p = np.asarray(spectrum, dtype=float)
    scaled = n * p
    base = np.floor(scaled).astype(int)
    short = n - base.sum()
    order = np.argsort(scaled - base)[::-1]
    for i in range(short):
        base[order[i]] += 1
    return tuple(int(b) for b in base)


def _descending_spectrum(rho):
    w, u = np.linalg.eigh(hilbert.require_psd(rho))
    return w[::-1].copy(), u[:, ::-1].copy()


def _sequence_digits(d: int, n: int) -> np.ndarray:
    """(d^n, n) array of base-d digit strings, most significant first."""
    idx = np.arange(d ** n)
    digits = np.empty((d ** n, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        digits[:, pos] = idx % d
        idx //= d
    return digits


def type_projector(rho_a, n: int, type_counts=None, cap: int = OP_CAP) -> np.ndarray:
    """Projector onto the span of eigenbasis sequences of a fixed type."""
    w, u = _descending_spectrum(rho_a)
    d = rho_a.shape[0]
    if d ** n > cap:
        raise ValueError(f"total dimension {d ** n} exceeds cap {cap}")
    if type_counts is None:
        type_counts = closest_type(w / w.sum(), n)
    type_counts = tuple(int(t) for t in type_counts)
    if len(type_counts) != d or sum(type_counts) != n or min(type_counts) < 0:
        raise ValueError(f"invalid type {type_counts} for alphabet {d}, n = {n}")
    digits = _sequence_digits(d, n)
    mask = np.ones(d ** n, dtype=bool)
    for sym in range(d):
        mask &= (digits == sym).sum(axis=1) == type_counts[sym]
    lift = hilbert.kron_all([u] * n)
    cols = lift[:, mask]
    return cols @ cols.conj().T


def _typical_mask(spectrum, n: int, delta: float):
    """Boolean mask over eigenbasis sequences with near-entropic probability."""
    p = np.asarray(spectrum, dtype=float)
    h = float(-(p[p > EIG_CUT] * np.log2(p[p > EIG_CUT])).sum())
    with np.errstate(divide="ignore"):
        logs = np.where(p > EIG_CUT, -np.log2(np.where(p > EIG_CUT, p, 1.0)), np.inf)
    total = np.zeros(1)
    for _ in range(n):
        total = (total[:, None] + logs[None, :]).reshape(-1)
    with np.errstate(invalid="ignore"):
        mask = np.abs(total / n - h) <= delta
    return mask, h


def typical_projector(rho_x, n: int, delta: float, cap: int = OP_CAP) -> np.ndarray:
    """Entropy-typical projector of the n-fold eigenbasis of a state."""
    w, u = _descending_spectrum(rho_x)
    d = rho_x.shape[0]
    if d ** n > cap:
        raise ValueError(f"total dimension {d ** n} exceeds cap {cap}")
    mask, _ = _typical_mask(w / w.sum(), n, delta)
    lift = hilbert.kron_all([u] * n)
    cols = lift[:, mask]
    return cols @ cols.conj().T


def eigen_floor_projector(xi, threshold: float) -> np.ndarray:
    """Projector onto eigenspaces of a PSD operator above the threshold."""
    xi = hilbert.require_psd(xi)
    w, u = np.linalg.eigh(xi)
    keep = w > threshold
    return u[:, keep] @ u[:, keep].conj().T


def _rank2_trace_norm(norm_v: float, overlap: complex) -> float:
    """|| u u^dag - v v^dag ||_1 for unit u and subnormalized v, from Gram data."""
    a = overlap
    b = np.sqrt(max(norm_v - abs(a) ** 2, 0.0))
    m = np.array([[1.0 - abs(a) ** 2, -a * b], [-np.conj(a) * b, -b * b]])
    return float(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)).sum())


@dataclass(frozen=True)
class TypicalityBundle:
    """Projected n-copy data: projector ranks, marginals, and spectra."""

    n: int
    delta: float
    epsilon: float
    c: float
    dims: tuple
    type_counts: tuple
    entropies: dict = field(repr=False)
    type_rank: int = 0
    rank_b: int = 0
    rank_e1: int = 0
    rank_e2: int = 0
    marg_tilde_a: np.ndarray = field(default=None, repr=False)
    marg_tilde_b: np.ndarray = field(default=None, repr=False)
    marg_tilde_e: np.ndarray = field(default=None, repr=False)
    marg_t_a_dev: float = 0.0       # max deviation of psi_t^{A^n} from Pi_t / rank
    dist_t_tilde: float = 0.0       # || psi_t - psi_tilde ||_1
    tilde_trace: float = 0.0
    floor_threshold: float = 0.0
    floor_discarded: float = 0.0


def build_bundle(rho_abe, dims, n: int, delta: float, epsilon: float,
                 c: float = 1.0, type_counts=None, cap: int = BUNDLE_CAP) -> TypicalityBundle:
    """Construct the projected states of one base state at block length n."""
    da, db, de = (int(x) for x in dims)
    if da ** n > cap or db ** n > cap or de ** n > cap:
        raise ValueError(f"per-system dimension exceeds cap {cap}")
    vec = hilbert.require_unit_vector(rho_abe, tol=1e-9)

    m = vec.reshape(da, db * de)
    u_a, s, vh = np.linalg.svd(m, full_matrices=False)
    p = s * s  # descending; A-Schmidt spectrum
    w_syms = [vh[k].reshape(db, de) for k in range(len(s))]

    if type_counts is None:
        type_counts = closest_type(p / p.sum(), n)
    type_counts = tuple(int(t) for t in type_counts)
    if len(type_counts) > len(p):
        type_counts = type_counts[: len(p)]
    if sum(type_counts) != n or min(type_counts) < 0:
        raise ValueError(f"invalid type {type_counts} for n = {n}")
    if any(t > 0 and p[i] <= EIG_CUT for i, t in enumerate(type_counts)):
        raise ValueError("type uses a zero-probability symbol")

    # per-copy output/environment eigendata, with factors rotated into them
    rho_b = sum(p[a] * w_syms[a] @ w_syms[a].conj().T for a in range(len(p)))
    rho_e = sum(p[a] * w_syms[a].T @ w_syms[a].conj() for a in range(len(p)))
    q_b, u_b = _descending_spectrum(rho_b)
    q_e, u_e = _descending_spectrum(rho_e)
    w_rot = [u_b.conj().T @ w @ u_e.conj() for w in w_syms]

    h_a = float(-(p[p > EIG_CUT] * np.log2(p[p > EIG_CUT])).sum())
    mask_b, h_b = _typical_mask(q_b, n, delta)
    mask_e, h_e = _typical_mask(q_e, n, delta)

    seqs = list(multiset_permutations(type_counts))
    n_t = len(seqs)
    w_seq = np.stack([hilbert.kron_all([w_rot[a] for a in seq]) for seq in seqs])

    def marg_e_of(batch):
        x = batch.reshape(-1, batch.shape[-1])
        return (x.T @ x.conj()) / n_t

    def marg_b_of(batch):
        x = batch.transpose(0, 2, 1).reshape(-1, batch.shape[1])
        return (x.T @ x.conj()) / n_t

    # environment state after the B and E typical projections, for the floor cut
    w_mid = w_seq * mask_b[None, :, None] * mask_e[None, None, :]
    xi = marg_e_of(w_mid)
    xi = (xi + xi.conj().T) / 2
    xi_eigs = np.linalg.eigvalsh(xi)
    xi_rank = int((xi_eigs > EIG_CUT).sum())
    threshold = 2.0 ** (-2 * n * delta) / max(xi_rank, 1)
    we, ue = np.linalg.eigh(xi)
    keep = we > threshold
    rank_e2 = int(keep.sum())
    discarded = float(np.clip(we[(we > EIG_CUT) & ~keep], 0.0, None).sum())
    k_e = (ue[:, keep] @ ue[:, keep].conj().T) @ np.diag(mask_e.astype(float))

    w_tilde = (w_seq * mask_b[None, :, None]) @ k_e.T

    flat = w_seq.reshape(n_t, -1)
    flat_t = w_tilde.reshape(n_t, -1)
    gram_t = flat.conj() @ flat.T
    gram_tilde = flat_t.conj() @ flat_t.T

    marg_t_a_dev = float(np.abs(gram_t / n_t - np.eye(n_t) / n_t).max())
    overlap = complex(np.einsum("mi,mi->", flat.conj(), flat_t) / n_t)
    tilde_trace = float(np.trace(gram_tilde).real / n_t)
    dist = _rank2_trace_norm(tilde_trace, overlap)

    marg_tilde_b = marg_b_of(w_tilde)
    marg_tilde_e = marg_e_of(w_tilde)

    return TypicalityBundle(
        n=n, delta=delta, epsilon=epsilon, c=c, dims=(da, db, de),
        type_counts=type_counts,
        entropies={"a": h_a, "b": h_b, "e": h_e},
        type_rank=n_t, rank_b=int(mask_b.sum()), rank_e1=int(mask_e.sum()),
        rank_e2=rank_e2,
        marg_tilde_a=(gram_tilde.T / n_t), marg_tilde_b=marg_tilde_b,
        marg_tilde_e=marg_tilde_e,
        marg_t_a_dev=marg_t_a_dev, dist_t_tilde=dist, tilde_trace=tilde_trace,
        floor_threshold=threshold, floor_discarded=discarded)


def _purity(m) -> float:
    return float(np.trace(m @ m).real)


def typicality_report(rho_abe, dims, n: int, delta: float, epsilon: float,
                      c: float = 1.0, type_counts=None,
                      assert_all: bool = False) -> dict:
    """Check the six properties of the projected states at one block length.

    Properties 2 through 6 hold only for sufficiently large n; each record
    carries a pass flag and the report never raises unless ``assert_all``.
    Property 1 is exact at every n.
    """
    b = build_bundle(rho_abe, dims, n, delta, epsilon, c=c, type_counts=type_counts)
    h = b.entropies
    scale = 1.0 / (1.0 - 3.0 * epsilon)
    props = []

    props.append({"prop": 1, "system": "a", "lhs": b.marg_t_a_dev, "rhs": 1e-10,
                  "pass": b.marg_t_a_dev <= 1e-10,
                  "note": "exact type-marginal identity, any n"})
    props.append({"prop": 2, "system": "abe", "lhs": b.dist_t_tilde, "rhs": epsilon,
                  "pass": b.dist_t_tilde <= epsilon,
                  "note": "sufficiently large n"})
    for sys_name, marg, h_x in (("a", b.marg_tilde_a, h["a"]),
                                ("b", b.marg_tilde_b, h["b"]),
                                ("e", b.marg_tilde_e, h["e"])):
        rhs = 3.0 * scale * 2.0 ** (-n * (h_x - c * delta))
        lhs = _purity(marg)
        props.append({"prop": 3, "system": sys_name, "lhs": lhs, "rhs": rhs,
                      "pass": lhs <= rhs, "note": "sufficiently large n"})
    for sys_name, rank, h_x in (("a", b.type_rank, h["a"]),
                                ("b", b.rank_b, h["b"]),
                                ("e", b.rank_e2, h["e"])):
        lo = 2.0 ** (n * (h_x - delta))
        hi = 2.0 ** (n * (h_x + delta))
        ok = lo <= rank <= hi
        props.append({"prop": 4, "system": sys_name, "lhs": float(rank),
                      "rhs": hi, "lower": lo, "pass": bool(ok),
                      "note": "sufficiently large n"})
    eigs_e = np.linalg.eigvalsh(b.marg_tilde_e)
    nz = eigs_e[eigs_e > EIG_CUT]
    max_eig = float(nz.max()) if len(nz) else 0.0
    rhs5 = scale * 2.0 ** (-n * (h["e"] - c * delta))
    props.append({"prop": 5, "system": "e", "lhs": max_eig, "rhs": rhs5,
                  "pass": max_eig <= rhs5, "note": "sufficiently large n"})
    ratio = float(nz.max() / nz.min()) if len(nz) else 1.0
    rhs6 = 2.0 ** (2 * n * delta)
    props.append({"prop": 6, "system": "e", "lhs": ratio, "rhs": rhs6,
                  "pass": ratio <= rhs6 * (1 + 1e-9), "note": "floor construction algebra"})

    floor_ok = b.floor_discarded <= 2.0 ** (-2 * n * delta)
    small_n_ok = 2.0 ** (-2 * n * delta) * scale <= 2.0 ** (-n * delta)
    report = {
        "n": n, "delta": delta, "epsilon": epsilon, "c": c,
        "type_counts": list(b.type_counts), "type_rank": b.type_rank,
        "ranks": {"b": b.rank_b, "e1": b.rank_e1, "e2": b.rank_e2},
        "entropies": h, "tilde_trace": b.tilde_trace,
        "floor": {"threshold": b.floor_threshold, "discarded": b.floor_discarded,
                  "mass_ok": bool(floor_ok), "threshold_regime_ok": bool(small_n_ok)},
        "properties": props,
        "all_pass": bool(all(p["pass"] for p in props)),
    }
    if assert_all and not report["all_pass"]:
        bad = [p for p in props if not p["pass"]]
        raise AssertionError(f"typicality properties failed: {bad}")
    return report
