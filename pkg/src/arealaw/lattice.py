"""Finite-range lattice Hamiltonians: geometry, boundary counting, evolution.

Sites live on a D-dimensional integer lattice with open (optionally periodic)
boundaries and graph (L1) distance.  A Hamiltonian is a list of Hermitian terms
with declared site supports and an interaction range R; the module exposes the
geometric quantities entering the entangling-rate bounds: the ball size n(D,R),
the boundary of a site region, and the count of terms crossing it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import qcore
from .qcore import HermitianOperator, HilbertFactorization, UnitaryOperator

DEFAULT_DIM_CAP = 2**14

Site = tuple[int, ...]


class DimensionCapError(RuntimeError):
    """Total Hilbert-space dimension exceeds the configured cap."""


def check_dim_cap(dim: int, cap: int = DEFAULT_DIM_CAP) -> None:
    if dim > cap:
        raise DimensionCapError(f"total dimension {dim} exceeds cap {cap}")


@dataclass(frozen=True)
class LatticeSpec:
    """D-dimensional spin lattice with open/periodic boundary per axis."""

    dimension: int
    extents: tuple[int, ...]
    local_dim: int = 2
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.dimension < 1 or len(self.extents) != self.dimension:
            raise ValueError("extents must list one positive size per dimension")
        if any(e < 1 for e in self.extents):
            raise ValueError("extents must be positive")
        if self.local_dim < 2:
            raise ValueError("local dimension must be at least 2")
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * self.dimension)
        elif len(self.periodic) != self.dimension:
            raise ValueError("periodic flags must match the dimension")

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    def sites(self) -> list[Site]:
        return [tuple(s) for s in itertools.product(*(range(e) for e in self.extents))]

    def site_label(self, site: Site) -> str:
        return "s" + "_".join(str(c) for c in site)

    def space(self) -> HilbertFactorization:
        return HilbertFactorization(
            tuple((self.site_label(s), self.local_dim) for s in self.sites())
        )

    def distance(self, a: Site, b: Site) -> int:
        total = 0
        for x, y, e, per in zip(a, b, self.extents, self.periodic):
            d = abs(x - y)
            if per:
                d = min(d, e - d)
            total += d
        return total


@dataclass(frozen=True)
class LatticeTerm:
    """One Hermitian interaction term; matrix axes follow the listed site order."""

    sites: tuple[Site, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.array(self.matrix, dtype=np.complex128))
        self.matrix.setflags(write=False)
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("term support lists a site twice")


@dataclass(frozen=True)
class LocalHamiltonian:
    """Sum of finite-range Hermitian terms on a lattice."""

    lattice: LatticeSpec
    terms: tuple[LatticeTerm, ...]
    interaction_range: int

    def __post_init__(self):
        d = self.lattice.local_dim
        for term in self.terms:
            dim = d ** len(term.sites)
            if term.matrix.shape != (dim, dim):
                raise ValueError(
                    f"term on {term.sites} has shape {term.matrix.shape}, expected {(dim, dim)}"
                )
            if np.linalg.norm(term.matrix - term.matrix.conj().T) > qcore.TOL_HERM * max(
                1.0, np.linalg.norm(term.matrix)
            ):
                raise ValueError(f"term on {term.sites} is not Hermitian")
            if not self._fits_in_ball(term.sites):
                raise ValueError(
                    f"term support {term.sites} does not fit a radius-{self.interaction_range} ball"
                )

    def _fits_in_ball(self, support: tuple[Site, ...]) -> bool:
        return any(
            all(self.lattice.distance(c, s) <= self.interaction_range for s in support)
            for c in self.lattice.sites()
        )

    @property
    def max_support_size(self) -> int:
        """Largest number of sites any single term touches (n in the rate bounds)."""
        return max((len(t.sites) for t in self.terms), default=1)

    def total_matrix(self, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
        spc = self.lattice.space()
        check_dim_cap(spc.total_dim, dim_cap)
        total = np.zeros((spc.total_dim, spc.total_dim), dtype=np.complex128)
        for term in self.terms:
            labels = [self.lattice.site_label(s) for s in term.sites]
            total += qcore.embed_operator(term.matrix, labels, spc)
        return total

    def as_operator(self, dim_cap: int = DEFAULT_DIM_CAP) -> HermitianOperator:
        return HermitianOperator(self.lattice.space(), self.total_matrix(dim_cap))


@dataclass(frozen=True)
class RegionSplit:
    """A site region, its complement, and the boundary sites within range R."""

    lattice: LatticeSpec
    sigma: frozenset[Site]
    complement: frozenset[Site]
    boundary: frozenset[Site]

    def __post_init__(self):
        all_sites = set(self.lattice.sites())
        if self.sigma | self.complement != all_sites or self.sigma & self.complement:
            raise ValueError("sigma and complement must partition the lattice sites")
        if not self.boundary <= self.sigma:
            raise ValueError("boundary must be a subset of sigma")


def region_split(lattice: LatticeSpec, sigma: Iterable[Site],
                 interaction_range: int) -> RegionSplit:
    """Split the lattice into sigma / complement, marking the range-R boundary."""
    sig = frozenset(tuple(s) for s in sigma)
    unknown = sig - set(lattice.sites())
    if unknown:
        raise ValueError(f"sites {sorted(unknown)} are not on the lattice")
    comp = frozenset(set(lattice.sites()) - sig)
    boundary = frozenset(
        s for s in sig if any(lattice.distance(s, c) <= interaction_range for c in comp)
    )
    return RegionSplit(lattice, sig, comp, boundary)


# ---------------------------------------------------------------------------
# geometric and spectral queries
# ---------------------------------------------------------------------------


def strength_norm(h: LocalHamiltonian) -> float:
    """Largest operator norm over the terms; 0 for an empty term list."""
    best = 0.0
    for term in h.terms:
        sym = (term.matrix + term.matrix.conj().T) / 2.0
        best = max(best, float(np.max(np.abs(np.linalg.eigvalsh(sym)))))
    return best


def ball_size(lattice: LatticeSpec, radius: int) -> int:
    """Largest number of lattice sites within graph distance `radius` of a site."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    sites = lattice.sites()
    return max(
        sum(1 for y in sites if lattice.distance(x, y) <= radius) for x in sites
    )


def boundary_terms(h: LocalHamiltonian, split: RegionSplit) -> list[LatticeTerm]:
    """Terms whose support intersects both sides of the split (count M)."""
    out = []
    for term in h.terms:
        supp = set(term.sites)
        if supp & split.sigma and supp & split.complement:
            out.append(term)
    return out


def split_hamiltonian(h: LocalHamiltonian, split: RegionSplit):
    """Partition terms into (inside sigma, inside complement, crossing)."""
    inside, outside, crossing = [], [], []
    for term in h.terms:
        supp = set(term.sites)
        if supp <= split.sigma:
            inside.append(term)
        elif supp <= split.complement:
            outside.append(term)
        else:
            crossing.append(term)
    mk = lambda ts: LocalHamiltonian(h.lattice, tuple(ts), h.interaction_range)
    return mk(inside), mk(outside), crossing


def evolution_unitary(h: LocalHamiltonian, dt: float,
                      dim_cap: int = DEFAULT_DIM_CAP) -> UnitaryOperator:
    """exp(-i dt H) on the full lattice space via Hermitian eigendecomposition."""
    return qcore.hermitian_exponential(h.as_operator(dim_cap), dt)


def trotter_sequence(parts: Sequence[HermitianOperator], dt: float,
                     order: str = "first") -> list[UnitaryOperator]:
    """Ordered gate list approximating exp(-i dt sum(parts)).

    ``first`` emits one exponential per part with the full step.  ``symmetric``
    emits every part with dt/2 followed by the mirrored ordering, i.e. the
    Strang splitting; gates are listed in application order (first gate first).
    """
    if not parts:
        raise ValueError("no Hamiltonian parts given")
    spc = parts[0].space
    if any(p.space != spc for p in parts):
        raise ValueError("all parts must share one space")
    if order == "first":
        return [qcore.hermitian_exponential(p, dt) for p in parts]
    if order == "symmetric":
        halves = [qcore.hermitian_exponential(p, dt / 2.0) for p in parts]
        return halves + halves[::-1]
    raise ValueError(f"unknown order {order!r}")


# ---------------------------------------------------------------------------
# builtin Hamiltonian builders
# ---------------------------------------------------------------------------


def _bonds(lattice: LatticeSpec) -> list[tuple[Site, Site]]:
    bonds = []
    for a in lattice.sites():
        for axis in range(lattice.dimension):
            b = list(a)
            b[axis] += 1
            if b[axis] >= lattice.extents[axis]:
                if not lattice.periodic[axis] or lattice.extents[axis] <= 2:
                    continue
                b[axis] %= lattice.extents[axis]
            bonds.append((a, tuple(b)))
    return bonds


def ising(lattice: LatticeSpec, coupling: float = 1.0) -> LocalHamiltonian:
    """Nearest-neighbor sigma_z sigma_z chain/lattice (qubit sites only)."""
    if lattice.local_dim != 2:
        raise ValueError("ising template requires local dimension 2")
    zz = coupling * np.kron(qcore.PAULI_Z, qcore.PAULI_Z)
    terms = [LatticeTerm((a, b), zz) for a, b in _bonds(lattice)]
    return LocalHamiltonian(lattice, tuple(terms), interaction_range=1)


def heisenberg(lattice: LatticeSpec, coupling: float = 1.0) -> LocalHamiltonian:
    """Nearest-neighbor XX+YY+ZZ exchange, scaled so each term has norm |coupling|."""
    if lattice.local_dim != 2:
        raise ValueError("heisenberg template requires local dimension 2")
    ex = sum(np.kron(p, p) for p in (qcore.PAULI_X, qcore.PAULI_Y, qcore.PAULI_Z))
    ex = coupling * ex / 3.0
    terms = [LatticeTerm((a, b), ex) for a, b in _bonds(lattice)]
    return LocalHamiltonian(lattice, tuple(terms), interaction_range=1)


def transverse_field(lattice: LatticeSpec, strength: float = 1.0) -> LocalHamiltonian:
    if lattice.local_dim != 2:
        raise ValueError("transverse_field template requires local dimension 2")
    terms = [LatticeTerm((s,), strength * qcore.PAULI_X) for s in lattice.sites()]
    return LocalHamiltonian(lattice, tuple(terms), interaction_range=0)


def random_local(lattice: LatticeSpec, interaction_range: int, strength: float,
                 rng: np.random.Generator) -> LocalHamiltonian:
    """One GUE term per anchor site, supported on its radius-R ball, norm `strength`."""
    d = lattice.local_dim
    terms = []
    for anchor in lattice.sites():
        supp = tuple(
            s for s in lattice.sites() if lattice.distance(anchor, s) <= interaction_range
        )
        mat = qcore.random_hermitian(rng, d ** len(supp), norm=strength)
        terms.append(LatticeTerm(supp, mat))
    return LocalHamiltonian(lattice, tuple(terms), interaction_range=interaction_range)


def scaled_to(h: LocalHamiltonian, h_norm: float) -> LocalHamiltonian:
    """Rescale all terms so the strength norm equals `h_norm` (no-op on zero H)."""
    current = strength_norm(h)
    if current == 0.0:
        return h
    factor = h_norm / current
    terms = tuple(LatticeTerm(t.sites, t.matrix * factor) for t in h.terms)
    return LocalHamiltonian(h.lattice, terms, h.interaction_range)


HAMILTONIAN_TEMPLATES: dict[str, Callable] = {
    "ising": ising,
    "heisenberg": heisenberg,
    "transverse-field": transverse_field,
    "random-local": random_local,
}


def hamiltonian_from_config(lattice: LatticeSpec, cfg: dict,
                            rng: np.random.Generator) -> LocalHamiltonian:
    """Build a Hamiltonian from a config mapping (template + parameters)."""
    name = cfg.get("template")
    if name == "zero":
        return LocalHamiltonian(lattice, (), interaction_range=int(cfg.get("range", 1)))
    if name == "ising":
        h = ising(lattice, float(cfg.get("coupling", 1.0)))
    elif name == "heisenberg":
        h = heisenberg(lattice, float(cfg.get("coupling", 1.0)))
    elif name == "transverse-field":
        h = transverse_field(lattice, float(cfg.get("coupling", 1.0)))
    elif name == "random-local":
        h = random_local(lattice, int(cfg.get("range", 1)),
                         float(cfg.get("coupling", 1.0)), rng)
    else:
        raise ValueError(f"unknown Hamiltonian template {name!r}")
    if "h_norm" in cfg:
        h = scaled_to(h, float(cfg["h_norm"]))
    return h
