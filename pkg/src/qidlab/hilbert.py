"""Dense complex linear algebra on composite Hilbert spaces.

States are unit complex vectors, operators are square complex matrices;
subsystem structure is carried explicitly as a tuple of dimensions.
All randomness flows through an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Tolerances for structural checks. Flags are only enforced where a caller
# asks for them; eigenvalues in [-PSD_TOL, 0) are clipped, below is an error.
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
UNIT_TOL = 1e-12
FRAME_TOL = 1e-10


def as_operator(x) -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def require_hermitian(m, tol: float = HERMITIAN_TOL, what: str = "operator") -> np.ndarray:
    m = as_operator(m)
    if np.abs(m - m.conj().T).max() > tol:
        raise ValueError(f"{what} is not Hermitian within {tol}")
    return m


def require_psd(m, tol: float = PSD_TOL, what: str = "operator") -> np.ndarray:
    m = require_hermitian(m, what=what)
    w = np.linalg.eigvalsh(m)
    if w.min() < -tol:
        raise ValueError(f"{what} has negative eigenvalue {w.min():.3e} below -{tol}")
    return m


def require_density(rho, tol: float = PSD_TOL, what: str = "state") -> np.ndarray:
    rho = require_psd(rho, tol=tol, what=what)
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"{what} has trace {np.trace(rho).real!r}, expected 1")
    return rho


def require_unit_vector(v, tol: float = UNIT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    n2 = float(np.vdot(v, v).real)
    if abs(n2 - 1.0) > tol:
        raise ValueError(f"state vector has squared norm {n2!r}, expected 1")
    return v


def pure_dm(v) -> np.ndarray:
    """Rank-one projector |v><v| of a ket."""
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product; subsystem dim lists concatenate."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(ops) -> np.ndarray:
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def partial_trace(op, dims, keep) -> np.ndarray:
    """Trace out all subsystems not in ``keep``.

    ``op`` is a matrix on the tensor product of ``dims``; ``keep`` is an int
    or iterable of subsystem indices. Works for non-Hermitian inputs, e.g.
    transition operators |phi><psi|.
    """
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    if isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep={keep} out of range for {n} subsystems")
    m = np.asarray(op, dtype=complex)
    d_total = int(np.prod(dims))
    if m.shape != (d_total, d_total):
        raise ValueError(f"operator shape {m.shape} does not match dims {dims}")
    a = m.reshape(dims + dims)
    row = list(range(n))
    col = [i if i not in keep else i + n for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(a, row + col, out).reshape(d_keep, d_keep)


def eigh_clipped(rho, tol: float = PSD_TOL):
    """Hermitian eigendecomposition with small negative eigenvalues clipped.

    Eigenvalues in [-tol, 0) are set to 0; anything below -tol raises.
    """
    rho = require_hermitian(rho)
    w, u = np.linalg.eigh(rho)
    if w.min() < -tol:
        raise ValueError(f"eigenvalue {w.min():.3e} below -{tol}; not PSD")
    return np.clip(w, 0.0, None), u


def psd_sqrt(rho, tol: float = PSD_TOL) -> np.ndarray:
    w, u = eigh_clipped(rho, tol)
    return (u * np.sqrt(w)) @ u.conj().T


def psd_inv_sqrt(rho, floor: float = 1e-10, tol: float = PSD_TOL) -> np.ndarray:
    """Pseudo-inverse square root on the part of the spectrum above ``floor``."""
    w, u = eigh_clipped(rho, tol)
    inv = np.where(w > floor, 1.0 / np.sqrt(np.where(w > floor, w, 1.0)), 0.0)
    return (u * inv) @ u.conj().T


def purify(rho, tol: float = PSD_TOL) -> np.ndarray:
    """Purification of a density matrix on A into a ket on A (x) A'.

    The partial trace of the result over the second factor recovers ``rho``;
    Schmidt coefficients are the square roots of the spectrum.
    """
    rho = as_operator(rho)
    w, u = eigh_clipped(rho, tol)
    d = rho.shape[0]
    # |phi> = sum_i sqrt(w_i) |u_i> (x) |i>
    return (u * np.sqrt(w)).reshape(d * d)  # rows index A, columns A'


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ket: normalized complex Gaussian vector."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if dim == 1:
        return np.ones(1, dtype=complex)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def haar_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent Haar kets as rows of a (count, dim) array."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def haar_mixed(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix induced by tracing out a ``rank``-dim environment."""
    rank = dim if rank is None else max(1, int(rank))
    v = haar_state(dim * rank, rng).reshape(dim, rank)
    return v @ v.conj().T


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with the R-phases divided out."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class Subspace:
    """A subspace of a composite space, stored as an orthonormal frame.

    ``frame`` has shape (ambient_dim, dim); columns are an orthonormal basis.
    """

    dims: tuple
    frame: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        frame = np.asarray(self.frame, dtype=complex)
        object.__setattr__(self, "frame", frame)
        if frame.ndim != 2 or frame.shape[0] != self.ambient_dim:
            raise ValueError(f"frame shape {frame.shape} does not match dims {self.dims}")
        gram = frame.conj().T @ frame
        if np.abs(gram - np.eye(frame.shape[1])).max() > FRAME_TOL:
            raise ValueError(f"frame columns are not orthonormal within {FRAME_TOL}")

    @property
    def ambient_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def embed(self, coeffs) -> np.ndarray:
        """Map coefficient vector(s) in C^dim to ambient kets."""
        c = np.asarray(coeffs, dtype=complex)
        return self.frame @ c

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.conj().T


def haar_subspace(ambient_dim: int, sub_dim: int, rng: np.random.Generator,
                  dims=None) -> Subspace:
    """Unitarily invariant random subspace (first columns of a Haar unitary)."""
    if sub_dim > ambient_dim:
        raise ValueError(f"sub_dim {sub_dim} exceeds ambient_dim {ambient_dim}")
    if sub_dim < 1:
        raise ValueError("sub_dim must be >= 1")
    z = rng.standard_normal((ambient_dim, sub_dim)) + 1j * rng.standard_normal((ambient_dim, sub_dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    frame = q * (d / np.abs(d))
    return Subspace(dims=tuple(dims) if dims is not None else (ambient_dim,), frame=frame)


def pure_trace_distance_sq_overlap(net: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Trace-norm distance ||phi - psi||_1 = 2 sqrt(1 - |<phi|psi>|^2), pairwise.

    ``net`` is (m, d), ``states`` is (k, d); returns (k,) min distance to net.
    """
    overlap = np.abs(states @ net.conj().T) ** 2
    best = overlap.max(axis=1)
    return 2.0 * np.sqrt(np.clip(1.0 - best, 0.0, None))


def epsilon_net(sub_dim: int, eta: float, rng: np.random.Generator | None = None,
                cap: float = 1e6, batch: int = 256, stall_batches: int = 12,
                check_samples: int = 2000) -> list:
    """Covering net for pure states of a ``sub_dim``-dimensional space.

    Every pure state ends up within trace norm ``eta`` of some element
    (spot-checked by sampling). Built by greedy maximin sampling; the
    cardinality stays under (5/eta)^(2 sub_dim), which must not exceed ``cap``.
    """
    if not (0.0 < eta <= 2.0):
        raise ValueError(f"eta must lie in (0, 2], got {eta}")
    bound = (5.0 / eta) ** (2 * sub_dim)
    if bound > cap:
        raise ValueError(f"cardinality bound (5/eta)^(2k) = {bound:.3e} exceeds cap {cap:.3e}")
    if sub_dim == 1:
        return [np.ones(1, dtype=complex)]
    if rng is None:
        rng = np.random.default_rng(0)

    net = np.zeros((1, sub_dim), dtype=complex)
    net[0, 0] = 1.0
    stall = 0
    while stall < stall_batches:
        cand = haar_states(sub_dim, batch, rng)
        dist = pure_trace_distance_sq_overlap(net, cand)
        order = np.argsort(dist)[::-1]
        added = []
        for i in order:
            if dist[i] <= eta:
                break
            c = cand[i]
            if added:
                d_new = pure_trace_distance_sq_overlap(np.array(added), c[None, :])[0]
                if d_new <= eta:
                    continue
            added.append(c)
        if added:
            net = np.vstack([net] + [a[None, :] for a in added])
            stall = 0
        else:
            stall += 1
    # covering spot check; grow the net if sampling still finds holes
    for _ in range(50):
        probes = haar_states(sub_dim, check_samples, rng)
        dist = pure_trace_distance_sq_overlap(net, probes)
        bad = np.where(dist > eta)[0]
        if len(bad) == 0:
            break
        net = np.vstack([net, probes[bad]])
    if len(net) > bound:
        raise RuntimeError(f"net of size {len(net)} exceeds the cardinality bound {bound:.3e}")
    return [net[i] for i in range(len(net))]


def spawn_rngs(seed: int, count: int) -> list:
    """Independent child generators, deterministic regardless of use order."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]
