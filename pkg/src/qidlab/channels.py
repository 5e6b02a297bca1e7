"""Quantum channels: Kraus / Stinespring-isometry / Choi representations.

Conventions:
  * A channel maps operators on A (in_dim) to operators on B (out_dim).
  * The Stinespring isometry V maps A into B (x) E with the environment
    index varying fastest (row index b * env_dim + e).
  * The Choi matrix is unnormalized, J = sum_ij |i><j| (x) N(|i><j|) on
    A (x) B, so trace preservation reads tr_B J = I_A.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import hilbert

TP_TOL = 1e-6  # construction-time trace-preservation tolerance
DIM_CAP = 4096  # tensor powers refuse to build anything larger than this


class ChannelError(ValueError):
    pass


def _kraus_to_isometry(kraus) -> np.ndarray:
    out_dim, in_dim = kraus[0].shape
    env = len(kraus)
    v = np.zeros((out_dim * env, in_dim), dtype=complex)
    for e, k in enumerate(kraus):
        v[e::env, :] = k  # row (b, e) = b * env + e
    return v


def _kraus_to_choi(kraus) -> np.ndarray:
    out_dim, in_dim = kraus[0].shape
    j = np.zeros((in_dim * out_dim, in_dim * out_dim), dtype=complex)
    for k in kraus:
        w = k.T.reshape(-1)  # w[(i, b)] = K[b, i]
        j += np.outer(w, w.conj())
    return j


@dataclass(frozen=True)
class Channel:
    """Completely positive trace-preserving map with cached representations."""

    kraus: tuple = field(repr=False)
    spec: str = ""
    isometry: np.ndarray = field(default=None, repr=False)
    choi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ChannelError("need at least one Kraus operator")
        shape = ks[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ks):
            raise ChannelError("Kraus operators must share a common 2-d shape")
        total = sum(k.conj().T @ k for k in ks)
        dev = np.abs(total - np.eye(shape[1])).max()
        if dev > TP_TOL:
            raise ChannelError(f"sum K^dag K deviates from identity by {dev:.3e} > {TP_TOL}")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "isometry", _kraus_to_isometry(ks))
        object.__setattr__(self, "choi", _kraus_to_choi(ks))

    @property
    def in_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def env_dim(self) -> int:
        return len(self.kraus)

    def apply(self, rho) -> np.ndarray:
        """N(rho) as the Kraus sum."""
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.in_dim, self.in_dim):
            raise ChannelError(f"input shape {rho.shape} does not match in_dim {self.in_dim}")
        out = np.zeros((self.out_dim, self.out_dim), dtype=complex)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out

    def __call__(self, rho) -> np.ndarray:
        return self.apply(rho)

    def apply_stinespring(self, rho) -> np.ndarray:
        v = self.isometry
        big = v @ np.asarray(rho, dtype=complex) @ v.conj().T
        return hilbert.partial_trace(big, (self.out_dim, self.env_dim), keep=0)

    def apply_choi(self, rho) -> np.ndarray:
        a, b = self.in_dim, self.out_dim
        jr = self.choi.reshape(a, b, a, b)
        return np.einsum("abcd,ac->bd", jr, np.asarray(rho, dtype=complex))

    def complement(self) -> "Channel":
        """Complementary channel tr_B V rho V^dag, from the stored isometry."""
        kr = np.stack(self.kraus)  # (env, out, in)
        comp = tuple(kr[:, b, :] for b in range(self.out_dim))
        return Channel(kraus=comp, spec=f"complement({self.spec})" if self.spec else "complement")

    def adjoint_apply(self, x) -> np.ndarray:
        """Heisenberg-picture adjoint, sum K^dag X K."""
        x = np.asarray(x, dtype=complex)
        out = np.zeros((self.in_dim, self.in_dim), dtype=complex)
        for k in self.kraus:
            out += k.conj().T @ x @ k
        return out

    def minimal(self, tol: float = 1e-9) -> "Channel":
        """Equivalent channel whose environment dimension is the Choi rank."""
        w, u = np.linalg.eigh((self.choi + self.choi.conj().T) / 2)
        ks = []
        for i in range(len(w) - 1, -1, -1):
            if w[i] <= tol:
                break
            ks.append(np.sqrt(w[i]) * u[:, i].reshape(self.in_dim, self.out_dim).T)
        return Channel(kraus=tuple(ks), spec=self.spec)


def from_kraus(kraus, spec: str = "") -> Channel:
    return Channel(kraus=tuple(kraus), spec=spec)


def compose(after: Channel, before: Channel, spec: str = "") -> Channel:
    """Channel ``after . before`` (apply ``before`` first)."""
    if before.out_dim != after.in_dim:
        raise ChannelError(f"cannot compose: {before.out_dim} -> {after.in_dim}")
    ks = tuple(a @ b for a in after.kraus for b in before.kraus)
    return Channel(kraus=ks, spec=spec or f"({after.spec} . {before.spec})")


def tensor(a: Channel, b: Channel, spec: str = "") -> Channel:
    ks = tuple(np.kron(ka, kb) for ka in a.kraus for kb in b.kraus)
    return Channel(kraus=ks, spec=spec or f"({a.spec} x {b.spec})")


def tensor_pow(ch: Channel, n: int, cap: int = DIM_CAP) -> Channel:
    if n < 1:
        raise ChannelError("n must be >= 1")
    if ch.in_dim ** n > cap or ch.out_dim ** n > cap or ch.env_dim ** n > cap:
        raise ChannelError(f"tensor power dimension exceeds cap {cap}")
    out = ch
    for _ in range(n - 1):
        out = tensor(out, ch)
    return Channel(kraus=out.kraus, spec=f"{ch.spec}^{n}" if ch.spec else f"pow{n}")


def purified_channel_state(ch: Channel, rho_in) -> tuple:
    """Tripartite ket |rho>^(ABE) = (I (x) V)|phi_in> with A the reference.

    Returns (vector, dims) with dims = (in_dim, out_dim, env_dim). The
    reference basis is the eigenbasis of ``rho_in``, so the channel input
    marginal is exactly ``rho_in``.
    """
    rho_in = hilbert.require_density(rho_in)
    w, u = hilbert.eigh_clipped(rho_in)
    d = ch.in_dim
    # |phi> = sum_a sqrt(w_a) |a>_A |u_a>_A'
    vec = np.zeros(d * ch.out_dim * ch.env_dim, dtype=complex)
    cols = ch.isometry @ (u * np.sqrt(w))  # column a = sqrt(w_a) V|u_a>
    vec = cols.T.reshape(-1)  # index (a, (b, e))
    return vec, (d, ch.out_dim, ch.env_dim)


# ---------------------------------------------------------------------------
# named families
# ---------------------------------------------------------------------------

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _weyl_ops(d: int):
    """Discrete displacement operators X^a Z^b on dimension d."""
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            ops.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return ops


def identity_channel(d: int = 2) -> Channel:
    return Channel(kraus=(np.eye(d, dtype=complex),), spec=f"identity:{d}")


def unitary_channel(u, spec: str = "unitary") -> Channel:
    u = np.asarray(u, dtype=complex)
    return Channel(kraus=(u,), spec=spec)


def dephasing_channel(p: float = 1.0, d: int = 2) -> Channel:
    """rho -> (1-p) rho + p diag(rho); p = 1 is the completely dephasing map."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"dephasing strength {p} outside [0, 1]")
    ks = []
    if p < 1.0:
        ks.append(np.sqrt(1.0 - p) * np.eye(d, dtype=complex))
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = np.sqrt(p)
        ks.append(e)
    return Channel(kraus=tuple(ks), spec=f"dephasing:{p}" + (f",{d}" if d != 2 else ""))


def depolarizing_channel(p: float, d: int = 2) -> Channel:
    """rho -> (1-p) rho + p * I/d, via the Weyl twirl."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"depolarizing strength {p} outside [0, 1]")
    ks = [np.sqrt(1.0 - p + p / d**2) * np.eye(d, dtype=complex)]
    for w in _weyl_ops(d)[1:]:
        ks.append(np.sqrt(p) / d * w)
    return Channel(kraus=tuple(ks), spec=f"depolarizing:{p}" + (f",{d}" if d != 2 else ""))


def erasure_channel(p: float, d: int = 2) -> Channel:
    """Transmit with probability 1-p, else emit the orthogonal erasure flag."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"erasure probability {p} outside [0, 1]")
    embed = np.zeros((d + 1, d), dtype=complex)
    embed[:d, :] = np.eye(d)
    ks = [np.sqrt(1.0 - p) * embed]
    for i in range(d):
        f = np.zeros((d + 1, d), dtype=complex)
        f[d, i] = np.sqrt(p)
        ks.append(f)
    return Channel(kraus=tuple(ks), spec=f"erasure:{p}" + (f",{d}" if d != 2 else ""))


def constant_channel(sigma, in_dim: int | None = None, spec: str = "") -> Channel:
    """rho -> tr(rho) * sigma."""
    sigma = hilbert.require_density(sigma)
    d_out = sigma.shape[0]
    d_in = in_dim if in_dim is not None else d_out
    w, u = hilbert.eigh_clipped(sigma)
    ks = []
    for j in range(d_out):
        if w[j] <= 0:
            continue
        for i in range(d_in):
            k = np.zeros((d_out, d_in), dtype=complex)
            k[:, i] = np.sqrt(w[j]) * u[:, j]
            ks.append(k)
    return Channel(kraus=tuple(ks), spec=spec or f"constant:{d_in}")


def cq_channel(outputs=None, d: int = 2) -> Channel:
    """Measure in the computational basis, then prepare the designated state."""
    if outputs is None:
        outputs = [np.eye(d, dtype=complex)[:, [i]] @ np.eye(d, dtype=complex)[:, [i]].conj().T
                   for i in range(d)]
    outputs = [hilbert.require_density(s) for s in outputs]
    d = len(outputs)
    d_out = outputs[0].shape[0]
    ks = []
    for i, s in enumerate(outputs):
        w, u = hilbert.eigh_clipped(s)
        for j in range(d_out):
            if w[j] <= 0:
                continue
            k = np.zeros((d_out, d), dtype=complex)
            k[:, i] = np.sqrt(w[j]) * u[:, j]
            ks.append(k)
    return Channel(kraus=tuple(ks), spec=f"cq:{d}")


def amplitude_damping_channel(gamma: float) -> Channel:
    if not 0.0 <= gamma <= 1.0:
        raise ChannelError(f"damping rate {gamma} outside [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return Channel(kraus=(k0, k1), spec=f"amplitude-damping:{gamma}")


def haar_channel(in_dim: int, out_dim: int, env_dim: int, rng: np.random.Generator,
                 spec: str = "") -> Channel:
    """Channel from a Haar-random Stinespring isometry A -> B (x) E."""
    if out_dim * env_dim < in_dim:
        raise ChannelError("out_dim * env_dim must be >= in_dim")
    frame = hilbert.haar_subspace(out_dim * env_dim, in_dim, rng).frame
    kr = frame.reshape(out_dim, env_dim, in_dim)
    ks = tuple(kr[:, e, :] for e in range(env_dim))
    return Channel(kraus=ks, spec=spec or f"haar:{in_dim},{out_dim},{env_dim}")


def make_named(name: str, **params) -> Channel:
    name = name.replace("_", "-")
    if name == "identity":
        return identity_channel(int(params.get("d", 2)))
    if name == "unitary":
        if "matrix" in params:
            return unitary_channel(params["matrix"])
        seed = int(params.get("seed", 0))
        d = int(params.get("d", 2))
        u = hilbert.haar_unitary(d, np.random.default_rng(seed))
        return unitary_channel(u, spec=f"unitary:seed={seed}" + (f",{d}" if d != 2 else ""))
    if name == "dephasing":
        return dephasing_channel(float(params.get("p", 1.0)), int(params.get("d", 2)))
    if name == "depolarizing":
        return depolarizing_channel(float(params["p"]), int(params.get("d", 2)))
    if name == "erasure":
        return erasure_channel(float(params["p"]), int(params.get("d", 2)))
    if name == "constant":
        d = int(params.get("d", 2))
        sigma = params.get("sigma", np.eye(d, dtype=complex) / d)
        return constant_channel(sigma, in_dim=d)
    if name == "cq":
        return cq_channel(params.get("outputs"), int(params.get("d", 2)))
    if name == "amplitude-damping":
        return amplitude_damping_channel(float(params["p"]))
    if name == "haar":
        seed = int(params.get("seed", 0))
        return haar_channel(int(params["in_dim"]), int(params["out_dim"]),
                            int(params["env_dim"]), np.random.default_rng(seed))
    raise ChannelError(f"unknown channel family {name!r}")


def _kraus_from_json_file(path: str) -> Channel:
    with open(path) as f:
        data = json.load(f)
    ks = []
    for mat in data["kraus"]:
        ks.append(np.array([[complex(re, im) for re, im in row] for row in mat]))
    return Channel(kraus=tuple(ks), spec=f"kraus:file={path}")


def channel_from_spec(spec: str) -> Channel:
    """Parse a channel spec string.

    Forms: "identity:4", "dephasing:1.0", "dephasing:0.5,3",
    "depolarizing:0.3", "erasure:0.5,2", "constant:2", "cq:2",
    "amplitude-damping:0.3", "unitary:seed=7", "haar:2,2,2,seed=5",
    "kraus:file=path.json".
    """
    spec = spec.strip()
    name, _, arg = spec.partition(":")
    name = name.replace("_", "-")
    try:
        if name == "kraus":
            key, _, path = arg.partition("=")
            if key != "file" or not path:
                raise ChannelError(f"bad kraus spec {spec!r}")
            return _kraus_from_json_file(path)
        if name == "unitary":
            params = {}
            for part in filter(None, arg.split(",")):
                if "=" in part:
                    k, _, v = part.partition("=")
                    params[k] = v
                else:
                    params["d"] = part
            return make_named("unitary", **{k: float(v) if k == "p" else v for k, v in params.items()})
        if name == "haar":
            parts = [p for p in arg.split(",") if p]
            dims = [int(p) for p in parts if "=" not in p]
            seed = 0
            for p in parts:
                if p.startswith("seed="):
                    seed = int(p.partition("=")[2])
            if len(dims) != 3:
                raise ChannelError(f"haar spec needs three dims, got {spec!r}")
            return make_named("haar", in_dim=dims[0], out_dim=dims[1], env_dim=dims[2], seed=seed)
        if name in ("identity", "constant", "cq"):
            return make_named(name, d=int(arg) if arg else 2)
        if name in ("dephasing", "depolarizing", "erasure", "amplitude-damping"):
            parts = [p for p in arg.split(",") if p]
            if not parts:
                raise ChannelError(f"spec {spec!r} needs a parameter")
            p = float(parts[0])
            d = int(parts[1]) if len(parts) > 1 else 2
            return make_named(name, p=p, d=d)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ChannelError):
            raise
        raise ChannelError(f"malformed channel spec {spec!r}: {exc}") from exc
    raise ChannelError(f"unknown channel spec {spec!r}")
