"""Two finite detectors coupled to a lattice through a switched Hamiltonian.

Detector b may couple to the complement region at all times and to the region
itself outside a switching window; detector a couples to the region only inside
the window.  Inside the window the evolution uses the symmetric (Strang)
product formula over m equal slices with couplings sampled at slice midpoints;
outside it, piecewise-constant segments are exponentiated exactly.  The mutual
information the detectors harvest is bounded by the same spacetime area law as
the scheduled-measurement experiment, with T the window length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import lattice as lat
from . import qcore
from .experiment import AreaLawParams, RegionGeometry, area_law_bound
from .lattice import DEFAULT_DIM_CAP, LatticeSpec, LocalHamiltonian, Site, check_dim_cap
from .qcore import PureState


@dataclass(frozen=True)
class DetectorSpec:
    label: str
    dim: int = 2

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("detector dimension must be at least 2")


@dataclass(frozen=True)
class DetectorCoupling:
    """Interaction between one detector and a set of lattice sites.

    The operator acts on detector (x) sites (detector factor first, site factors
    in the listed order); it may be a constant matrix or a callable of time.
    """

    detector: str
    sites: tuple[Site, ...]
    operator: np.ndarray | Callable[[float], np.ndarray]

    @property
    def time_dependent(self) -> bool:
        return callable(self.operator)

    def matrix_at(self, t: float, dim: int) -> np.ndarray:
        mat = self.operator(t) if callable(self.operator) else self.operator
        mat = np.asarray(mat, dtype=np.complex128)
        if mat.shape != (dim, dim):
            raise ValueError(f"coupling matrix shape {mat.shape}, expected ({dim}, {dim})")
        if np.linalg.norm(mat - mat.conj().T) > qcore.TOL_HERM * max(1.0, np.linalg.norm(mat)):
            raise ValueError(f"coupling for detector {self.detector!r} is not Hermitian at t={t}")
        return mat


@dataclass(frozen=True)
class SwitchedHamiltonian:
    """H(t) = H0 + H_{b,comp} + (1 - w(t)) H_{b,region} + w(t) H_{a,region},
    with w the indicator of the switching window."""

    h0: LocalHamiltonian
    region_sites: tuple[Site, ...]
    t_window: tuple[float, float]
    coupling_b_complement: DetectorCoupling | None = None
    coupling_b_region: DetectorCoupling | None = None
    coupling_a_region: DetectorCoupling | None = None

    def __post_init__(self):
        t0, t1 = self.t_window
        if t1 <= t0:
            raise ValueError("switching window must have positive duration")
        region = set(tuple(s) for s in self.region_sites)
        comp = set(self.h0.lattice.sites()) - region
        if self.coupling_b_complement and not set(self.coupling_b_complement.sites) <= comp:
            raise ValueError("b-complement coupling touches region sites")
        if self.coupling_b_region and not set(self.coupling_b_region.sites) <= region:
            raise ValueError("b-region coupling leaves the region")
        if self.coupling_a_region and not set(self.coupling_a_region.sites) <= region:
            raise ValueError("a-region coupling leaves the region")

    def geometry(self) -> RegionGeometry:
        split = lat.region_split(self.h0.lattice, self.region_sites,
                                 self.h0.interaction_range)
        t0, t1 = self.t_window
        return RegionGeometry(len(self.region_sites), len(split.boundary),
                              t1 - t0, len(self.region_sites))


@dataclass(frozen=True)
class Trajectory:
    detector_labels: tuple[str, str]
    samples: tuple[tuple[float, PureState], ...]
    t_window: tuple[float, float]

    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.samples)

    def state_at(self, t: float, tol: float = 1e-9) -> PureState:
        for ts, state in self.samples:
            if abs(ts - t) <= tol:
                return state
        raise ValueError(f"no recorded state at t={t}; have {self.times()}")

    def terminal(self) -> PureState:
        return self.samples[-1][1]


def _coupling_labels(lattice: LatticeSpec, det: str, sites: Sequence[Site]) -> list[str]:
    return [det] + [lattice.site_label(tuple(s)) for s in sites]


def _half_gate(mat: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


def evolve_switched(spec: SwitchedHamiltonian, detectors: tuple[DetectorSpec, DetectorSpec],
                    psi0: PureState, t_end: float, m: int,
                    sample_times: Sequence[float] = (),
                    dim_cap: int = DEFAULT_DIM_CAP) -> Trajectory:
    """Evolve |psi0> (x) |0>_a (x) |0>_b under the switched Hamiltonian.

    Inside the window: m symmetric product-formula slices, couplings sampled at
    slice midpoints, factor ordering (H0, b-complement coupling, a-region
    coupling) then mirrored, each with half the slice duration.  Outside:
    piecewise-constant exact exponentials (time-dependent couplings are sampled
    at segment midpoints).  States are recorded at the window edges, at every
    in-window slice boundary, at t_end, and at any requested sample times
    (in-window requests must land on slice boundaries).
    """
    t_alpha, t_beta = spec.t_window
    if t_end < t_beta:
        raise ValueError("t_end must not precede the window end")
    if m < 1:
        raise ValueError("need at least one product-formula slice")
    det_a, det_b = detectors
    lattice = spec.h0.lattice
    site_labels = [lattice.site_label(s) for s in lattice.sites()]
    if set(psi0.space.labels) != set(site_labels):
        raise ValueError("psi0 must cover exactly the lattice sites")

    full = qcore.tensor_product(
        qcore.tensor_product(psi0, qcore.zero_state(qcore.space((det_a.label, det_a.dim)))),
        qcore.zero_state(qcore.space((det_b.label, det_b.dim))),
    )
    check_dim_cap(full.space.total_dim, dim_cap)
    spc = full.space
    vec = full.amplitudes.copy()

    window_len = t_beta - t_alpha
    slice_len = window_len / m

    def coupling_dim(cpl: DetectorCoupling) -> int:
        labels = _coupling_labels(lattice, cpl.detector, cpl.sites)
        return int(np.prod([spc.dim_of(l) for l in labels]))

    def apply_symmetric_slice(active: list[DetectorCoupling | None], t_mid: float,
                              duration: float, h0_half: np.ndarray | None):
        nonlocal vec
        gates = []
        if spec.h0.terms:
            half = h0_half if h0_half is not None else _half_gate(
                spec.h0.total_matrix(dim_cap), duration / 2.0)
            gates.append((half, site_labels))
        for cpl in active:
            if cpl is None:
                continue
            labels = _coupling_labels(lattice, cpl.detector, cpl.sites)
            gate = _half_gate(cpl.matrix_at(t_mid, coupling_dim(cpl)), duration / 2.0)
            gates.append((gate, labels))
        for gate, labels in gates + gates[::-1]:
            vec = qcore.vector_apply(spc, vec, gate, labels)

    def apply_exact_segment(active: list[DetectorCoupling | None], t0: float, t1: float):
        nonlocal vec
        if t1 <= t0:
            return
        couplings = [c for c in active if c is not None]
        if any(c.time_dependent for c in couplings):
            n_slices = max(1, math.ceil((t1 - t0) / slice_len))
            sub = (t1 - t0) / n_slices
            for k in range(n_slices):
                apply_symmetric_slice(couplings, t0 + (k + 0.5) * sub, sub, None)
            return
        total = np.zeros((spc.total_dim, spc.total_dim), dtype=np.complex128)
        if spec.h0.terms:
            total += qcore.embed_operator(spec.h0.total_matrix(dim_cap), site_labels, spc)
        for cpl in couplings:
            labels = _coupling_labels(lattice, cpl.detector, cpl.sites)
            total += qcore.embed_operator(cpl.matrix_at(t0, coupling_dim(cpl)), labels, spc)
        w, v = np.linalg.eigh((total + total.conj().T) / 2.0)
        vec = (v * np.exp(-1j * (t1 - t0) * w)) @ (v.conj().T @ vec)

    outside = [spec.coupling_b_complement, spec.coupling_b_region]
    inside = [spec.coupling_b_complement, spec.coupling_a_region]

    samples: list[tuple[float, PureState]] = []

    def record(t: float):
        samples.append((t, PureState(spc, vec / np.linalg.norm(vec))))

    record(0.0)
    requested = sorted(set(float(t) for t in sample_times))
    for t in requested:
        if t_alpha < t < t_beta:
            k = (t - t_alpha) / slice_len
            if abs(k - round(k)) > 1e-9:
                raise ValueError(
                    f"in-window sample time {t} does not land on a slice boundary")

    pre_marks = [t for t in requested if 0.0 < t < t_alpha]
    cursor = 0.0
    for t in pre_marks:
        apply_exact_segment(outside, cursor, t)
        record(t)
        cursor = t
    apply_exact_segment(outside, cursor, t_alpha)
    if t_alpha > 0.0:
        record(t_alpha)

    h0_half = (_half_gate(spec.h0.total_matrix(dim_cap), slice_len / 2.0)
               if spec.h0.terms else None)
    in_marks = {round((t - t_alpha) / slice_len) for t in requested if t_alpha < t < t_beta}
    for l in range(1, m + 1):
        t_mid = t_alpha + l * window_len / m - window_len / (2 * m)
        apply_symmetric_slice(inside, t_mid, slice_len, h0_half)
        t_edge = t_alpha + l * slice_len
        if l in in_marks or l == m:
            record(t_beta if l == m else t_edge)

    post_marks = [t for t in requested if t_beta < t < t_end]
    cursor = t_beta
    for t in post_marks:
        apply_exact_segment(outside, cursor, t)
        record(t)
        cursor = t
    if t_end > cursor:
        apply_exact_segment(outside, cursor, t_end)
    if not any(abs(t - t_end) <= 1e-12 for t, _ in samples):
        record(t_end)

    return Trajectory((det_a.label, det_b.label), tuple(samples), spec.t_window)


def detector_mutual_information(traj: Trajectory, t: float) -> float:
    """I(a:b) in bits of the detector marginal at a recorded time t >= t_beta."""
    if t < traj.t_window[1] - 1e-12:
        raise ValueError("detector mutual information is evaluated at t >= the window end")
    state = traj.state_at(t)
    a, b = traj.detector_labels
    rho = qcore.partial_trace_pure(state, [a, b])
    return qcore.quantum_mutual_information(rho, ((a,), (b,)))


def harvesting_bound(p: AreaLawParams) -> float:
    """C ||h|| (2|Sigma| + T |dSigma|) log2 d with T the switching-window length."""
    return area_law_bound(p)
