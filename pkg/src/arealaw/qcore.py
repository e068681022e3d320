"""Dense quantum-information primitives on labeled tensor-product spaces.

States and operators are numpy arrays paired with a :class:`HilbertFactorization`
that names every tensor factor.  Subsystem operations (partial trace, embeddings,
entropies, Schmidt splits) address factors by label instead of by position, so
shifting subsystem layouts never require manual index bookkeeping.

All entropies and mutual informations are in bits (log base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Validation tolerances.  Hermiticity/unitarity are relative Frobenius norms,
# trace/PSD are absolute (states are unit trace), the entropy clip removes
# eigenvalues that are zero up to eigensolver noise.
TOL_HERM = 1e-9
TOL_UNITARY = 1e-9
TOL_TRACE = 1e-9
TOL_PSD = 1e-9
TOL_EIG = 1e-12


# ---------------------------------------------------------------------------
# labeled tensor factorizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HilbertFactorization:
    """Ordered list of named tensor factors defining a composite Hilbert space."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [lab for lab, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        for lab, d in self.factors:
            if d < 1:
                raise ValueError(f"factor {lab!r} has nonpositive dimension {d}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index(self, label: str) -> int:
        for i, (lab, _) in enumerate(self.factors):
            if lab == label:
                return i
        raise ValueError(f"unknown label {label!r}; have {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.factors[self.index(label)][1]

    def axes_of(self, labels: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index(lab) for lab in labels)

    def restrict(self, labels: Iterable[str]) -> "HilbertFactorization":
        """Sub-factorization of the given labels, kept in this space's order."""
        want = set(labels)
        missing = want - set(self.labels)
        if missing:
            raise ValueError(f"unknown labels {sorted(missing)}")
        return HilbertFactorization(tuple(f for f in self.factors if f[0] in want))

    def concat(self, other: "HilbertFactorization") -> "HilbertFactorization":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise ValueError(f"label collision on {sorted(clash)}")
        return HilbertFactorization(self.factors + other.factors)

    def drop(self, labels: Iterable[str]) -> "HilbertFactorization":
        gone = set(labels)
        return HilbertFactorization(tuple(f for f in self.factors if f[0] not in gone))


def space(*factors: tuple[str, int]) -> HilbertFactorization:
    """Convenience constructor: ``space(("a", 2), ("b", 3))``."""
    return HilbertFactorization(tuple(factors))


def _rel_fro(delta: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(delta) / max(1.0, np.linalg.norm(ref)))


def _as_complex(a) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# state and operator types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PureState:
    """Unit-norm complex amplitude vector over a labeled factorization."""

    space: HilbertFactorization
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _as_complex(self.amplitudes).reshape(-1))
        if self.amplitudes.shape != (self.space.total_dim,):
            raise ValueError(
                f"amplitude length {self.amplitudes.shape} != total dim {self.space.total_dim}"
            )
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > TOL_TRACE:
            raise ValueError(f"state norm {norm} is not 1")

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive-semidefinite, unit-trace operator on a labeled space."""

    space: HilbertFactorization
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_complex(self.entries))
        d = self.space.total_dim
        if self.entries.shape != (d, d):
            raise ValueError(f"shape {self.entries.shape} != ({d}, {d})")
        if _rel_fro(self.entries - self.entries.conj().T, self.entries) > TOL_HERM:
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(self.entries))
        if abs(tr - 1.0) > TOL_TRACE:
            raise ValueError(f"trace {tr} is not 1")
        eigs = np.linalg.eigvalsh((self.entries + self.entries.conj().T) / 2.0)
        if eigs.min() < -TOL_PSD:
            raise ValueError(f"negative eigenvalue {eigs.min()} below -{TOL_PSD}")
        object.__setattr__(self, "_eigs", eigs)

    def eigenvalues(self) -> np.ndarray:
        return self._eigs  # type: ignore[attr-defined]


@dataclass(frozen=True)
class HermitianOperator:
    space: HilbertFactorization
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_complex(self.entries))
        d = self.space.total_dim
        if self.entries.shape != (d, d):
            raise ValueError(f"shape {self.entries.shape} != ({d}, {d})")
        if _rel_fro(self.entries - self.entries.conj().T, self.entries) > TOL_HERM:
            raise ValueError("operator is not Hermitian within tolerance")


@dataclass(frozen=True)
class UnitaryOperator:
    space: HilbertFactorization
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_complex(self.entries))
        d = self.space.total_dim
        if self.entries.shape != (d, d):
            raise ValueError(f"shape {self.entries.shape} != ({d}, {d})")
        resid = np.linalg.norm(self.entries @ self.entries.conj().T - np.eye(d))
        if resid / math.sqrt(d) > TOL_UNITARY:
            raise ValueError(f"operator is not unitary (residual {resid})")


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Finite outcome distribution; labels may be tuples for joint outcomes."""

    outcomes: tuple[tuple[object, float], ...]

    def __post_init__(self):
        probs = np.array([p for _, p in self.outcomes], dtype=float)
        if probs.size and probs.min() < -TOL_TRACE:
            raise ValueError(f"negative probability {probs.min()}")
        if abs(probs.sum() - 1.0) > TOL_TRACE:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.outcomes)

    def probability(self, label) -> float:
        for lab, p in self.outcomes:
            if lab == label:
                return p
        return 0.0

    def as_dict(self) -> dict:
        return {lab: p for lab, p in self.outcomes}


# ---------------------------------------------------------------------------
# raw-array helpers (shared by the typed operations and the evolution engines)
# ---------------------------------------------------------------------------


def _front_perm(spc: HilbertFactorization, labels: Sequence[str]):
    """Axes permutation bringing `labels` (in the given order) to the front."""
    axes = spc.axes_of(labels)
    rest = [i for i in range(len(spc.factors)) if i not in axes]
    front_dim = int(np.prod([spc.dims[i] for i in axes], dtype=np.int64)) if axes else 1
    rest_dim = spc.total_dim // front_dim
    return list(axes), rest, front_dim, rest_dim


def vector_permuted(spc: HilbertFactorization, vec: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Reshape `vec` to a (dim(labels), dim(rest)) matrix with `labels` leading."""
    axes, rest, front_dim, rest_dim = _front_perm(spc, labels)
    t = vec.reshape(spc.dims if spc.factors else (1,))
    t = np.transpose(t, axes + rest) if spc.factors else t
    return t.reshape(front_dim, rest_dim)


def vector_apply(spc: HilbertFactorization, vec: np.ndarray, mat: np.ndarray,
                 labels: Sequence[str]) -> np.ndarray:
    """Apply a square matrix acting on the given factors to a state vector."""
    axes, rest, front_dim, _ = _front_perm(spc, labels)
    if mat.shape != (front_dim, front_dim):
        raise ValueError(f"operator shape {mat.shape} does not match factors {labels}")
    t = vec.reshape(spc.dims)
    t = np.transpose(t, axes + rest)
    shape = t.shape
    t = mat @ t.reshape(front_dim, -1)
    t = t.reshape(shape)
    inv = np.argsort(axes + rest)
    return np.transpose(t, inv).reshape(-1)


def vector_apply_isometry(spc: HilbertFactorization, vec: np.ndarray, iso: np.ndarray,
                          in_labels: Sequence[str],
                          out_factors: Sequence[tuple[str, int]]):
    """Apply an isometry replacing `in_labels` with `out_factors`.

    Returns ``(new_space, new_vector)``; output factors lead the new ordering.
    """
    axes, rest, front_dim, rest_dim = _front_perm(spc, in_labels)
    out_dim = int(np.prod([d for _, d in out_factors], dtype=np.int64))
    if iso.shape != (out_dim, front_dim):
        raise ValueError(f"isometry shape {iso.shape}, expected ({out_dim}, {front_dim})")
    t = vec.reshape(spc.dims)
    t = np.transpose(t, axes + rest).reshape(front_dim, rest_dim)
    new_vec = (iso @ t).reshape(-1)
    kept = HilbertFactorization(tuple(spc.factors[i] for i in rest))
    new_space = HilbertFactorization(tuple(out_factors)).concat(kept)
    return new_space, new_vec


def vector_marginal(spc: HilbertFactorization, vec: np.ndarray,
                    keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix (raw array) of the kept factors, in the given order."""
    m = vector_permuted(spc, vec, keep)
    return m @ m.conj().T


def vector_entropy(spc: HilbertFactorization, vec: np.ndarray,
                   labels: Sequence[str]) -> float:
    """Entanglement entropy in bits of the given factors, via singular values."""
    m = vector_permuted(spc, vec, labels)
    if m.shape[0] > m.shape[1]:
        m = m.T
    s = np.linalg.svd(m, compute_uv=False)
    return entropy_bits(s * s)


def vector_diagonal(spc: HilbertFactorization, vec: np.ndarray,
                    labels: Sequence[str]) -> np.ndarray:
    """Joint diagonal probabilities over the given factors (tensor-shaped)."""
    axes, rest, front_dim, _ = _front_perm(spc, labels)
    p = (vec.real**2 + vec.imag**2).reshape(spc.dims)
    p = np.transpose(p, axes + rest).reshape(front_dim, -1).sum(axis=1)
    return p.reshape([spc.dims[i] for i in axes])


def _apply_rows(spc: HilbertFactorization, arr: np.ndarray, mat: np.ndarray,
                labels: Sequence[str]) -> np.ndarray:
    """Apply an operator on the row index of a (total_dim, k) stack."""
    axes, rest, front_dim, _ = _front_perm(spc, labels)
    k = arr.shape[1]
    t = arr.reshape(tuple(spc.dims) + (k,))
    order = axes + rest + [len(spc.factors)]
    t = np.transpose(t, order)
    shape = t.shape
    t = mat @ t.reshape(front_dim, -1)
    if mat.shape[0] != front_dim:
        # rows become (out_factors, rest...) flattened; caller tracks the space
        return t.reshape(-1, k)
    t = t.reshape(shape)
    inv = np.argsort(order)
    return np.transpose(t, inv).reshape(-1, k)


def dm_apply(spc: HilbertFactorization, rho: np.ndarray, op: np.ndarray,
             labels: Sequence[str]) -> np.ndarray:
    """Conjugate a (raw) density matrix by an operator on the given factors."""
    tmp = _apply_rows(spc, rho, op, labels)
    return _apply_rows(spc, tmp.conj().T, op, labels).conj().T


def dm_apply_kraus(spc: HilbertFactorization, rho: np.ndarray,
                   kraus: Sequence[np.ndarray], labels: Sequence[str]) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus:
        out += dm_apply(spc, rho, k, labels)
    return out


def dm_marginal(spc: HilbertFactorization, rho: np.ndarray,
                keep: Sequence[str]) -> np.ndarray:
    axes, rest, dk, dt = _front_perm(spc, keep)
    n = len(spc.factors)
    t = rho.reshape(tuple(spc.dims) * 2)
    order = axes + rest + [a + n for a in axes] + [r + n for r in rest]
    t = np.transpose(t, order).reshape(dk, dt, dk, dt)
    return np.einsum("aibi->ab", t)


def dm_diagonal(spc: HilbertFactorization, rho: np.ndarray,
                labels: Sequence[str]) -> np.ndarray:
    axes, rest, front_dim, _ = _front_perm(spc, labels)
    p = np.real(np.diagonal(rho)).reshape(spc.dims)
    p = np.transpose(p, axes + rest).reshape(front_dim, -1).sum(axis=1)
    return p.reshape([spc.dims[i] for i in axes])


def embed_operator(mat: np.ndarray, labels: Sequence[str],
                   spc: HilbertFactorization) -> np.ndarray:
    """Embed an operator on the given factors into the full space (space order)."""
    axes, rest, front_dim, rest_dim = _front_perm(spc, labels)
    if mat.shape != (front_dim, front_dim):
        raise ValueError(f"operator shape {mat.shape} does not match factors {labels}")
    full = np.kron(mat, np.eye(rest_dim, dtype=np.complex128))
    n = len(spc.factors)
    order = axes + rest
    dims_perm = [spc.dims[i] for i in order]
    t = full.reshape(dims_perm + dims_perm)
    inv = list(np.argsort(order))
    t = np.transpose(t, inv + [i + n for i in inv])
    d = spc.total_dim
    return t.reshape(d, d)


def entropy_bits(probs: np.ndarray) -> float:
    """Shannon entropy in bits; eigenvalues below the clip are treated as zero."""
    p = np.asarray(probs, dtype=float)
    if p.size and p.min() < -TOL_PSD:
        raise ValueError(f"negative probability/eigenvalue {p.min()}")
    p = p[p > TOL_EIG]
    if p.size == 0:
        return 0.0
    return float(-(p * np.log2(p)).sum())


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def tensor_product(a, b):
    """Tensor product of two states or two operators on disjoint label sets."""
    spc = a.space.concat(b.space)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(spc, np.kron(a.amplitudes, b.amplitudes))
    pairs = {
        DensityMatrix: "entries",
        HermitianOperator: "entries",
        UnitaryOperator: "entries",
    }
    for cls, attr in pairs.items():
        if isinstance(a, cls) and isinstance(b, cls):
            return cls(spc, np.kron(getattr(a, attr), getattr(b, attr)))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Trace out all factors not in `keep`; preserves trace and positivity."""
    keep_ordered = [lab for lab in rho.space.labels if lab in set(keep)]
    missing = set(keep) - set(rho.space.labels)
    if missing:
        raise ValueError(f"unknown labels {sorted(missing)}")
    reduced = dm_marginal(rho.space, rho.entries, keep_ordered)
    return DensityMatrix(rho.space.restrict(keep_ordered), reduced)


def partial_trace_pure(psi: PureState, keep: Iterable[str]) -> DensityMatrix:
    keep_ordered = [lab for lab in psi.space.labels if lab in set(keep)]
    reduced = vector_marginal(psi.space, psi.amplitudes, keep_ordered)
    return DensityMatrix(psi.space.restrict(keep_ordered), reduced)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(rho) = -tr rho log2 rho, in bits."""
    return entropy_bits(rho.eigenvalues())


def quantum_mutual_information(rho: DensityMatrix,
                               partition: tuple[Iterable[str], Iterable[str]]) -> float:
    """I(A:B) = S(A) + S(B) - S(AB) in bits for a bipartition of the factors."""
    side_a, side_b = set(partition[0]), set(partition[1])
    all_labels = set(rho.space.labels)
    if side_a & side_b or (side_a | side_b) != all_labels:
        raise ValueError("partition must be a disjoint cover of the factor labels")
    s_a = von_neumann_entropy(partial_trace(rho, side_a))
    s_b = von_neumann_entropy(partial_trace(rho, side_b))
    return s_a + s_b - von_neumann_entropy(rho)


def classical_mutual_information(joint: ProbabilityDistribution) -> float:
    """Mutual information in bits of a joint distribution labeled by pairs."""
    pa: dict = {}
    pb: dict = {}
    for lab, p in joint.outcomes:
        if not isinstance(lab, tuple) or len(lab) != 2:
            raise ValueError(f"joint outcome label {lab!r} is not a pair")
        pa[lab[0]] = pa.get(lab[0], 0.0) + p
        pb[lab[1]] = pb.get(lab[1], 0.0) + p
    h = lambda ps: entropy_bits(np.array(list(ps), dtype=float))
    h_ab = h(p for _, p in joint.outcomes)
    return h(pa.values()) + h(pb.values()) - h_ab


def hermitian_exponential(h: HermitianOperator, t: float) -> UnitaryOperator:
    """exp(-i t h) computed by eigendecomposition (exact at double precision)."""
    sym = (h.entries + h.entries.conj().T) / 2.0
    w, v = np.linalg.eigh(sym)
    u = (v * np.exp(-1j * t * w)) @ v.conj().T
    return UnitaryOperator(h.space, u)


def schmidt_decomposition(psi: PureState,
                          partition: tuple[Iterable[str], Iterable[str]]):
    """Schmidt split across a bipartition.

    Returns ``(coeffs, left, right)`` with coefficients sorted descending and
    ``psi ~= sum_k coeffs[k] * left[:, k] (x) right[k, :]`` in the ordering
    (left labels, right labels), each side kept in the original factor order.
    """
    side_a = [lab for lab in psi.space.labels if lab in set(partition[0])]
    side_b = [lab for lab in psi.space.labels if lab in set(partition[1])]
    if set(side_a) | set(side_b) != set(psi.space.labels) or set(side_a) & set(side_b):
        raise ValueError("partition must be a disjoint cover of the factor labels")
    m = vector_permuted(psi.space, psi.amplitudes, side_a + side_b)
    m = m.reshape(
        int(np.prod([psi.space.dim_of(l) for l in side_a], dtype=np.int64)) or 1, -1
    )
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = max(1, int(np.sum(s > TOL_EIG)))
    return s[:keep], u[:, :keep], vh[:keep, :]


def operator_norm(h: HermitianOperator) -> float:
    """Largest absolute eigenvalue."""
    sym = (h.entries + h.entries.conj().T) / 2.0
    return float(np.max(np.abs(np.linalg.eigvalsh(sym)))) if sym.size else 0.0


# ---------------------------------------------------------------------------
# constructors and sampling helpers
# ---------------------------------------------------------------------------

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def basis_state(spc: HilbertFactorization, indices: Sequence[int]) -> PureState:
    """Computational basis state |i1 i2 ...> with one index per factor."""
    if len(indices) != len(spc.factors):
        raise ValueError("need one basis index per factor")
    vec = np.zeros(spc.total_dim, dtype=np.complex128)
    flat = 0
    for (_, d), i in zip(spc.factors, indices):
        if not 0 <= i < d:
            raise ValueError(f"basis index {i} out of range for dim {d}")
        flat = flat * d + i
    vec[flat] = 1.0
    return PureState(spc, vec)


def zero_state(spc: HilbertFactorization) -> PureState:
    return basis_state(spc, [0] * len(spc.factors))


def bell_state(spc: HilbertFactorization) -> PureState:
    """Maximally entangled state across two equal-dimension factors."""
    if len(spc.factors) != 2 or spc.dims[0] != spc.dims[1]:
        raise ValueError("bell_state needs exactly two equal-dimension factors")
    d = spc.dims[0]
    vec = np.zeros(d * d, dtype=np.complex128)
    vec[:: d + 1] = 1.0 / math.sqrt(d)
    return PureState(spc, vec)


def haar_isometry(rng: np.random.Generator, d_from: int, d_to: int) -> np.ndarray:
    """Haar-random isometry of shape (d_to, d_from), d_to >= d_from."""
    if d_to < d_from:
        raise ValueError("isometry requires d_to >= d_from")
    g = rng.normal(size=(d_to, d_from)) + 1j * rng.normal(size=(d_to, d_from))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r).copy()
    phases[np.abs(phases) < 1e-12] = 1.0
    return q * (phases / np.abs(phases)).conj()


def random_pure_state(rng: np.random.Generator, spc: HilbertFactorization) -> PureState:
    d = spc.total_dim
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState(spc, v / np.linalg.norm(v))


def random_density_matrix(rng: np.random.Generator, spc: HilbertFactorization,
                          rank: int | None = None) -> DensityMatrix:
    d = spc.total_dim
    r = rank if rank is not None else d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityMatrix(spc, m / np.trace(m))


def random_hermitian(rng: np.random.Generator, dim: int,
                     norm: float | None = None) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (g + g.conj().T) / 2.0
    if norm is not None:
        top = float(np.max(np.abs(np.linalg.eigvalsh(h))))
        h = h * (norm / top) if top > 0 else h
    return h


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic per-(site, time) substream of a single 64-bit seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
