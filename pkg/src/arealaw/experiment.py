"""Scheduled instruments interleaved with Hamiltonian evolution on a spin lattice.

A spacetime region (a site set crossed with a time window) assigns ownership of
every (site, time) measurement point: Alice owns the points inside the region,
Bob the rest.  Each instrument is purified, so the run is a pure-state circuit
of evolution unitaries and isometries onto fresh ancillas; projective readout
of the ancillas is deferred to the end.  The module computes the mutual
information carried by Alice's ancillas, the per-step entangling-rate bounds,
the spacetime area-law bound, classical outcome correlations, and the signaling
capacity from setting choices to remote outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import instruments as instr
from . import lattice as lat
from . import qcore
from .instruments import Instrument, PurifiedInstrument, SettingDistribution
from .lattice import (DEFAULT_DIM_CAP, LatticeSpec, LocalHamiltonian,
                      RegionSplit, Site, check_dim_cap)
from .qcore import DensityMatrix, HilbertFactorization, PureState


# ---------------------------------------------------------------------------
# regions, schedules, parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpacetimeRegion:
    """Site set Sigma crossed with an open time window (t_start, t_end)."""

    sigma: tuple[Site, ...]
    t_start: float
    t_end: float
    t_steps: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("region must have positive duration")
        if self.t_steps < 1:
            raise ValueError("need at least one time step")
        if len(set(self.sigma)) != len(self.sigma):
            raise ValueError("duplicate sites in the region")

    @property
    def t_tot(self) -> float:
        return self.t_end - self.t_start

    @property
    def dt(self) -> float:
        return self.t_tot / self.t_steps

    @property
    def x(self) -> int:
        return len(self.sigma)

    def step_times(self) -> tuple[float, ...]:
        """Measurement times, centered in each of the t_steps sub-intervals."""
        return tuple(self.t_start + (k + 0.5) * self.dt for k in range(self.t_steps))

    def owns(self, site: Site, time: float) -> bool:
        return tuple(site) in set(self.sigma) and self.t_start < time < self.t_end


@dataclass(frozen=True)
class ScheduleEntry:
    """One instrument application: (time, target sites, optional registers)."""

    time: float
    sites: tuple[Site, ...]
    instrument: Instrument
    registers: tuple[str, ...] = ()


@dataclass(frozen=True)
class MeasurementSchedule:
    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        by_time: dict[float, set] = {}
        for e in self.entries:
            taken = by_time.setdefault(e.time, set())
            if taken & set(e.sites):
                raise ValueError(
                    f"overlapping instrument supports at time {e.time}: {sorted(taken & set(e.sites))}"
                )
            taken |= set(e.sites)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(sorted({e.time for e in self.entries}))

    def entries_at(self, time: float) -> tuple[ScheduleEntry, ...]:
        return tuple(e for e in self.entries if e.time == time)

    def owner_of(self, entry: ScheduleEntry, region: SpacetimeRegion) -> str:
        inside = [region.owns(s, entry.time) for s in entry.sites]
        if all(inside):
            return "alice"
        if not any(inside):
            return "bob"
        raise ValueError(
            f"collective instrument at t={entry.time} straddles the region boundary"
        )


def uniform_schedule(lattice: LatticeSpec, region: SpacetimeRegion,
                     alice_instrument, bob_points: Sequence[tuple[float, Site, Instrument]] = ()
                     ) -> MeasurementSchedule:
    """Instruments at every region point (one per site and step), plus Bob extras.

    `alice_instrument` is either an Instrument applied everywhere or a callable
    ``(site, step_index) -> Instrument`` for per-point choices.
    """
    on_lattice = set(lattice.sites())
    stray = (set(tuple(s) for s in region.sigma) |
             {tuple(site) for _, site, _ in bob_points}) - on_lattice
    if stray:
        raise ValueError(f"sites {sorted(stray)} are not on the lattice")
    entries = []
    for k, t in enumerate(region.step_times()):
        for site in region.sigma:
            ins = alice_instrument(site, k) if callable(alice_instrument) else alice_instrument
            entries.append(ScheduleEntry(t, (tuple(site),), ins))
    for t, site, ins in bob_points:
        entries.append(ScheduleEntry(t, (tuple(site),), ins))
    return MeasurementSchedule(tuple(entries))


@dataclass(frozen=True)
class TripartiteSplit:
    """Alice ancilla labels / region spin labels / everything else."""

    a_labels: tuple[str, ...]
    b_labels: tuple[str, ...]
    c_labels: tuple[str, ...]

    def __post_init__(self):
        groups = [set(self.a_labels), set(self.b_labels), set(self.c_labels)]
        if sum(len(g) for g in groups) != len(set().union(*groups)):
            raise ValueError("tripartite label groups must be disjoint")


@dataclass(frozen=True)
class RegionGeometry:
    sigma_size: int
    boundary_size: int
    t_tot: float
    x: int

    def boundary_area(self) -> float:
        """Spacetime boundary size 2|Sigma| + T |dSigma|."""
        return 2.0 * self.sigma_size + self.t_tot * self.boundary_size


@dataclass(frozen=True)
class AreaLawParams:
    """Prefactors and geometry entering the area-law and step bounds."""

    c_const: float
    c_sie: float
    h_norm: float
    d: int
    geometry: RegionGeometry

    def __post_init__(self):
        if self.c_const <= 0 or self.c_sie <= 0 or self.h_norm <= 0 or self.d < 2:
            raise ValueError("bound parameters must be positive (d >= 2)")

    @property
    def absorption_holds(self) -> bool:
        """Whether the spin-entropy term can be absorbed into the bound prefactor."""
        return self.c_const * self.h_norm >= 1.0

    @classmethod
    def from_sie(cls, c_sie: float, n: int, h_norm: float, d: int,
                 geometry: RegionGeometry) -> "AreaLawParams":
        return cls(2.0 * c_sie * (max(n, 2) - 1) ** 2, c_sie, h_norm, d, geometry)


def area_law_bound(p: AreaLawParams) -> float:
    """C ||h|| (2|Sigma| + T_tot |dSigma|) log2 d, in bits."""
    return p.c_const * p.h_norm * p.geometry.boundary_area() * math.log2(p.d)


def area_law_bound_1d(p: AreaLawParams) -> float:
    """One-dimensional specialization C ||h|| (2X + 2T_tot) log2 d."""
    return p.c_const * p.h_norm * (2.0 * p.geometry.x + 2.0 * p.geometry.t_tot) * math.log2(p.d)


def sie_step_bound(h: LocalHamiltonian, split: RegionSplit, dt: float,
                   p: AreaLawParams) -> float:
    """Entropy change bound c dt M (n-1) ||h|| log2 d for one evolution step."""
    m = len(lat.boundary_terms(h, split))
    n = h.max_support_size
    return p.c_sie * abs(dt) * m * max(n - 1, 0) * p.h_norm * math.log2(p.d)


# ---------------------------------------------------------------------------
# the state carrier (pure until an eager trace forces mixing)
# ---------------------------------------------------------------------------


class StateCarrier:
    """Labeled state that stays a pure vector until a partial trace mixes it."""

    def __init__(self, space: HilbertFactorization, vec: np.ndarray | None = None,
                 mat: np.ndarray | None = None):
        if (vec is None) == (mat is None):
            raise ValueError("provide exactly one of vec/mat")
        self.space = space
        self.vec = vec
        self.mat = mat

    @classmethod
    def from_state(cls, state: PureState | DensityMatrix) -> "StateCarrier":
        if isinstance(state, PureState):
            return cls(state.space, vec=state.amplitudes.copy())
        return cls(state.space, mat=state.entries.copy())

    @property
    def is_pure(self) -> bool:
        return self.vec is not None

    @property
    def total_dim(self) -> int:
        return self.space.total_dim

    def apply_unitary(self, mat: np.ndarray, labels: Sequence[str]) -> None:
        if self.is_pure:
            self.vec = qcore.vector_apply(self.space, self.vec, mat, labels)
        else:
            self.mat = qcore.dm_apply(self.space, self.mat, mat, labels)

    def apply_isometry(self, iso: np.ndarray, in_labels: Sequence[str],
                       out_factors: Sequence[tuple[str, int]]) -> None:
        if self.is_pure:
            self.space, self.vec = qcore.vector_apply_isometry(
                self.space, self.vec, iso, in_labels, out_factors)
            return
        axes, rest, front_dim, _ = qcore._front_perm(self.space, in_labels)
        tmp = qcore._apply_rows(self.space, self.mat, iso, in_labels)
        out = qcore._apply_rows(self.space, tmp.conj().T, iso, in_labels).conj().T
        kept = HilbertFactorization(tuple(self.space.factors[i] for i in rest))
        self.space = HilbertFactorization(tuple(out_factors)).concat(kept)
        self.mat = out

    def apply_kraus(self, kraus: Sequence[np.ndarray], labels: Sequence[str]) -> None:
        if self.is_pure:
            self.mat = np.outer(self.vec, self.vec.conj())
            self.vec = None
        self.mat = qcore.dm_apply_kraus(self.space, self.mat, kraus, labels)

    def trace_out(self, labels: Sequence[str]) -> None:
        keep = [lab for lab in self.space.labels if lab not in set(labels)]
        if self.is_pure:
            self.mat = qcore.vector_marginal(self.space, self.vec, keep)
            self.vec = None
        else:
            self.mat = qcore.dm_marginal(self.space, self.mat, keep)
        self.space = self.space.restrict(keep)

    def entropy_of(self, labels: Sequence[str]) -> float:
        present = [lab for lab in labels if lab in set(self.space.labels)]
        if not present:
            return 0.0
        if self.is_pure:
            return qcore.vector_entropy(self.space, self.vec, present)
        reduced = qcore.dm_marginal(self.space, self.mat, present)
        return qcore.entropy_bits(np.linalg.eigvalsh((reduced + reduced.conj().T) / 2))

    def diagonal(self, labels: Sequence[str]) -> np.ndarray:
        if self.is_pure:
            return qcore.vector_diagonal(self.space, self.vec, labels)
        return qcore.dm_diagonal(self.space, self.mat, labels)

    def as_state(self) -> PureState | DensityMatrix:
        if self.is_pure:
            return PureState(self.space, self.vec / np.linalg.norm(self.vec))
        mat = (self.mat + self.mat.conj().T) / 2
        return DensityMatrix(self.space, mat / np.trace(mat).real)

    def snapshot(self) -> "StateCarrier":
        return StateCarrier(self.space,
                            vec=None if self.vec is None else self.vec.copy(),
                            mat=None if self.mat is None else self.mat.copy())


# ---------------------------------------------------------------------------
# running the experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AncillaRecord:
    label: str
    owner: str
    entry: ScheduleEntry
    purified: PurifiedInstrument
    traced: bool


@dataclass(frozen=True)
class RunEvent:
    kind: str  # "evolve" or "instrument"
    t_start: float
    t_end: float
    owner: str | None = None
    ancilla_label: str | None = None
    pre: StateCarrier | None = None
    post: StateCarrier | None = None


@dataclass(frozen=True)
class ExperimentResult:
    state: PureState | DensityMatrix
    lattice: LatticeSpec
    region: SpacetimeRegion
    schedule: MeasurementSchedule
    track: str
    ancillas: tuple[AncillaRecord, ...]
    events: tuple[RunEvent, ...] = ()

    def spin_labels(self) -> tuple[str, ...]:
        return tuple(self.lattice.site_label(s) for s in self.lattice.sites())

    def region_spin_labels(self) -> tuple[str, ...]:
        return tuple(self.lattice.site_label(s) for s in self.region.sigma)

    def alice_registers(self) -> tuple[str, ...]:
        regs: list[str] = []
        for rec in self.ancillas:
            if rec.owner == "alice":
                for r in rec.entry.registers:
                    if r not in regs:
                        regs.append(r)
        return tuple(regs)

    def alice_labels(self) -> tuple[str, ...]:
        anc = tuple(r.label for r in self.ancillas if r.owner == "alice" and not r.traced)
        return anc + self.alice_registers()

    def bob_labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.ancillas if r.owner == "bob" and not r.traced)

    def tripartite_split(self) -> TripartiteSplit:
        a = self.alice_labels()
        b = self.region_spin_labels()
        c = tuple(lab for lab in self.state.space.labels if lab not in set(a) | set(b))
        return TripartiteSplit(a, b, c)

    def measured_ancillas(self, owner: str | None = None):
        out = []
        for rec in self.ancillas:
            if rec.traced:
                continue
            if owner is None or rec.owner == owner:
                out.append((rec.purified, rec.label))
        return out


def run_experiment(rho0: PureState | DensityMatrix, h: LocalHamiltonian,
                   sched: MeasurementSchedule, region: SpacetimeRegion,
                   track: str = "alice_only", t_init: float = 0.0,
                   dim_cap: int = DEFAULT_DIM_CAP,
                   record_chain: bool = False) -> ExperimentResult:
    """Alternate Hamiltonian evolution with purified scheduled instruments.

    With ``track="alice_only"`` every Bob ancilla is traced out immediately
    after its instrument acts (the reduced state of Alice's ancillas is
    unaffected); ``"alice_and_bob"`` keeps everything, so a pure initial state
    stays globally pure.
    """
    if track not in ("alice_only", "alice_and_bob"):
        raise ValueError(f"unknown track mode {track!r}")
    if record_chain and not isinstance(rho0, PureState):
        raise ValueError("chain recording requires a pure initial state")
    site_labels = [h.lattice.site_label(s) for s in h.lattice.sites()]
    missing = set(site_labels) - set(rho0.space.labels)
    if missing:
        raise ValueError(f"initial state lacks site factors {sorted(missing)}")
    times = sched.times
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("schedule times must be strictly increasing")
    if times and times[0] < t_init:
        raise ValueError("schedule starts before the initial time")

    carrier = StateCarrier.from_state(rho0)
    check_dim_cap(carrier.total_dim, dim_cap)
    gate_cache: dict[float, np.ndarray] = {}

    def evolution_gate(gap: float) -> np.ndarray:
        key = round(gap, 12)
        if key not in gate_cache:
            gate_cache[key] = lat.evolution_unitary(h, gap, dim_cap).entries
        return gate_cache[key]

    events: list[RunEvent] = []
    records: list[AncillaRecord] = []
    purified_cache: dict[int, PurifiedInstrument] = {}
    prev_t = t_init
    counter = 0
    for t in times:
        gap = t - prev_t
        if gap > 0 and h.terms:
            pre = carrier.snapshot() if record_chain else None
            carrier.apply_unitary(evolution_gate(gap), site_labels)
            events.append(RunEvent("evolve", prev_t, t, pre=pre,
                                   post=carrier.snapshot() if record_chain else None))
        for entry in sched.entries_at(t):
            owner = sched.owner_of(entry, region)
            key = id(entry.instrument)
            if key not in purified_cache:
                purified_cache[key] = instr.purify(entry.instrument)
            pur = purified_cache[key]
            in_labels = list(entry.registers) + [h.lattice.site_label(s) for s in entry.sites]
            in_dim = int(np.prod([carrier.space.dim_of(l) for l in in_labels]))
            if in_dim != pur.input_space.total_dim:
                raise ValueError(
                    f"instrument at t={t} expects input dim {pur.input_space.total_dim}, "
                    f"targets have dim {in_dim}"
                )
            if pur.output_space.total_dim != in_dim:
                raise ValueError(
                    f"instrument at t={t} changes the system dimension "
                    f"({in_dim} -> {pur.output_space.total_dim}); site factors must keep their size"
                )
            anc_label = f"anc{counter}"
            counter += 1
            check_dim_cap(carrier.total_dim * pur.ancilla_dim, dim_cap)
            out_factors = [(lab, carrier.space.dim_of(lab)) for lab in in_labels]
            out_factors.append((anc_label, pur.ancilla_dim))
            pre = carrier.snapshot() if record_chain else None
            carrier.apply_isometry(pur.isometry, in_labels, out_factors)
            traced = track == "alice_only" and owner == "bob"
            if traced:
                carrier.trace_out([anc_label])
            records.append(AncillaRecord(anc_label, owner, entry, pur, traced))
            events.append(RunEvent("instrument", t, t, owner=owner, ancilla_label=anc_label,
                                   pre=pre, post=carrier.snapshot() if record_chain else None))
        prev_t = t

    return ExperimentResult(
        state=carrier.as_state(),
        lattice=h.lattice,
        region=region,
        schedule=sched,
        track=track,
        ancillas=tuple(records),
        events=tuple(events),
    )


def alice_mutual_information(state: PureState | DensityMatrix | ExperimentResult,
                             split: TripartiteSplit | None = None) -> float:
    """I(A : rest) = 2 S(rho_A) in bits for the purified construction.

    The value refers to the globally purified run (pure initial state, purified
    instruments); it is unchanged by having traced Bob's ancillas eagerly since
    the reduced state of A does not depend on operations elsewhere.
    """
    if isinstance(state, ExperimentResult):
        split = state.tripartite_split() if split is None else split
        state = state.state
    if split is None:
        raise ValueError("need a tripartite split")
    present = [lab for lab in split.a_labels if lab in set(state.space.labels)]
    if len(present) != len(split.a_labels):
        raise ValueError("some Alice labels are missing from the state")
    if not present:
        return 0.0
    if isinstance(state, PureState):
        return 2.0 * qcore.vector_entropy(state.space, state.amplitudes, present)
    reduced = qcore.dm_marginal(state.space, state.entries, present)
    return 2.0 * qcore.entropy_bits(np.linalg.eigvalsh((reduced + reduced.conj().T) / 2))


# ---------------------------------------------------------------------------
# entangling-rate measurements and the inequality chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyStep:
    s_before: float
    s_after: float

    @property
    def delta(self) -> float:
        return self.s_after - self.s_before


def measure_entropy_step(state: PureState | DensityMatrix, h: LocalHamiltonian,
                         split: RegionSplit, dt: float,
                         dim_cap: int = DEFAULT_DIM_CAP) -> EntropyStep:
    """Entropy of the complement side before and after one evolution step.

    The complement side consists of the complement sites plus every non-site
    factor of the state (ancillas and registers count as environment).
    """
    carrier = StateCarrier.from_state(state)
    check_dim_cap(carrier.total_dim, dim_cap)
    site_labels = [h.lattice.site_label(s) for s in h.lattice.sites()]
    comp_labels = [h.lattice.site_label(s) for s in sorted(split.complement)]
    extra = [lab for lab in state.space.labels if lab not in set(site_labels)]
    c_side = comp_labels + extra
    s0 = carrier.entropy_of(c_side)
    carrier.apply_unitary(lat.evolution_unitary(h, dt, dim_cap).entries, site_labels)
    s1 = carrier.entropy_of(c_side)
    return EntropyStep(s0, s1)


@dataclass(frozen=True)
class ChainCheck:
    name: str
    ok: bool | None
    margin: float | None = None
    residual: float | None = None


@dataclass(frozen=True)
class ChainReport:
    checks: tuple[ChainCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks if c.ok is not None)

    def named(self, prefix: str) -> list[ChainCheck]:
        return [c for c in self.checks if c.name.startswith(prefix)]


RESIDUAL_TOL = 1e-9


def entropy_chain_report(result: ExperimentResult, h: LocalHamiltonian,
                         params: AreaLawParams) -> ChainReport:
    """Numerically verify the entropy-inequality chain on a recorded run.

    Requires a run with ``record_chain=True`` and full tracking.  Checks, in
    order: the region subsystem starts in a product state; every evolution step
    inside the measurement window obeys the entangling-rate bound; instruments
    leave the complement spectrum unchanged; the chained total; the entropy
    triangle inequality; the spin-entropy cap; the frozen ancilla entropy after
    the window; and the assembled area-law form.
    """
    if not result.events or any(e.post is None for e in result.events):
        raise ValueError("run was not recorded with record_chain=True")
    split = lat.region_split(result.lattice, result.region.sigma, h.interaction_range)
    m = len(lat.boundary_terms(h, split))
    n = h.max_support_size
    rate = params.c_sie * m * max(n - 1, 0) * params.h_norm * math.log2(params.d)
    b_labels = list(result.region_spin_labels())
    alice_anc = [r.label for r in result.ancillas if r.owner == "alice"]
    alice_regs = list(result.alice_registers())

    def s_ab(carrier: StateCarrier) -> float:
        labels = [lab for lab in alice_anc + alice_regs if lab in set(carrier.space.labels)]
        return carrier.entropy_of(labels + b_labels)

    def s_a(carrier: StateCarrier) -> float:
        labels = [lab for lab in alice_anc + alice_regs if lab in set(carrier.space.labels)]
        return carrier.entropy_of(labels)

    alice_events = [e for e in result.events
                    if e.kind == "instrument" and e.owner == "alice"]
    if not alice_events:
        raise ValueError("no measurements inside the region; nothing to chain")
    t1 = alice_events[0].t_start
    t_last = alice_events[-1].t_end
    first_idx = result.events.index(alice_events[0])
    last_idx = result.events.index(alice_events[-1])

    checks: list[ChainCheck] = []
    start = result.events[first_idx].pre
    resid = abs(s_ab(start) - start.entropy_of(b_labels))
    checks.append(ChainCheck("product_start", resid <= RESIDUAL_TOL, residual=resid))

    x_cap = result.region.x * math.log2(params.d)
    s_b0 = start.entropy_of(b_labels)
    checks.append(ChainCheck("spin_cap_start", s_b0 <= x_cap + RESIDUAL_TOL,
                             margin=x_cap - s_b0))

    total_bound = 0.0
    total_time = 0.0
    for i in range(first_idx, last_idx + 1):
        e = result.events[i]
        if e.kind == "evolve":
            ds = abs(s_ab(e.post) - s_ab(e.pre))
            bound = rate * (e.t_end - e.t_start)
            total_bound += bound
            total_time += e.t_end - e.t_start
            checks.append(ChainCheck(f"step_rate[{e.t_start:.6g},{e.t_end:.6g}]",
                                     ds <= bound + RESIDUAL_TOL, margin=bound - ds))
        else:
            resid = abs(s_ab(e.post) - s_ab(e.pre))
            checks.append(ChainCheck(f"instrument_keeps_complement[{e.t_start:.6g}]",
                                     resid <= RESIDUAL_TOL, residual=resid))

    end = result.events[last_idx].post
    s_ab_end = s_ab(end)
    chained = s_ab(start) + total_bound
    checks.append(ChainCheck("chained_total", s_ab_end <= chained + RESIDUAL_TOL,
                             margin=chained - s_ab_end))

    s_a_end, s_b_end = s_a(end), end.entropy_of(b_labels)
    al = s_ab_end - abs(s_a_end - s_b_end)
    checks.append(ChainCheck("entropy_triangle", al >= -RESIDUAL_TOL, margin=al))
    checks.append(ChainCheck("spin_cap_end", s_b_end <= x_cap + RESIDUAL_TOL,
                             margin=x_cap - s_b_end))

    final = result.events[-1].post
    s_a_final = s_a(final)
    resid = abs(s_a_final - s_a_end)
    checks.append(ChainCheck("ancilla_entropy_frozen", resid <= RESIDUAL_TOL, residual=resid))

    assembly = 2.0 * x_cap + rate * total_time
    checks.append(ChainCheck("assembly", s_a_final <= assembly + RESIDUAL_TOL,
                             margin=assembly - s_a_final))

    geometry = RegionGeometry(result.region.x, len(split.boundary),
                              result.region.t_tot, result.region.x)
    full = AreaLawParams(params.c_const, params.c_sie, params.h_norm, params.d, geometry)
    bound = area_law_bound(full)
    mi = 2.0 * s_a_final
    if full.absorption_holds:
        checks.append(ChainCheck("area_law_form", mi <= bound + RESIDUAL_TOL,
                                 margin=bound - mi))
    else:
        checks.append(ChainCheck("area_law_form", None, margin=bound - mi))
    return ChainReport(tuple(checks))


# ---------------------------------------------------------------------------
# outcome statistics
# ---------------------------------------------------------------------------


def outcome_correlations(result: ExperimentResult):
    """Joint (Alice outcomes, Bob outcomes) distribution and its classical MI."""
    if result.track != "alice_and_bob":
        raise ValueError("outcome correlations require track='alice_and_bob'")
    alice = result.measured_ancillas("alice")
    bob = result.measured_ancillas("bob")
    joint = instr.deferred_outcome_distribution(result.state, alice + bob)
    n_a = len(alice)
    paired: dict[tuple, float] = {}
    for key, p in joint.outcomes:
        k = (tuple(key[:n_a]), tuple(key[n_a:]))
        paired[k] = paired.get(k, 0.0) + p
    paired_pd = qcore.ProbabilityDistribution(
        tuple(sorted(paired.items(), key=lambda kv: str(kv[0]))))
    return paired_pd, qcore.classical_mutual_information(paired_pd)


@dataclass(frozen=True)
class SignalingReport:
    mutual_information_bits: float
    bound_bits: float
    joint: qcore.ProbabilityDistribution
    note: str = ("the bound does not depend on the setting distribution: it is "
                 "independent of the initial ancilla state")

    @property
    def ok(self) -> bool:
        return self.mutual_information_bits <= self.bound_bits + RESIDUAL_TOL


def signaling_capacity_bound(rho0: PureState, h: LocalHamiltonian,
                             region: SpacetimeRegion, sched: MeasurementSchedule,
                             controlled: Mapping[tuple[float, tuple[Site, ...]],
                                                 Mapping[object, Instrument]],
                             setting: SettingDistribution,
                             params: AreaLawParams,
                             dim_cap: int = DEFAULT_DIM_CAP) -> SignalingReport:
    """Classical MI between Alice's setting choice and Bob's outcomes, vs bound.

    The setting distribution is encoded in an extra register (square-root
    amplitudes); instruments at the listed schedule points become controlled by
    the register.  The joint distribution of (setting readout, Bob outcomes) is
    computed exactly from the deferred measurements.
    """
    reg_label = "setting"
    entries = []
    consumed = set()
    for e in sched.entries:
        key = (e.time, tuple(tuple(s) for s in e.sites))
        if key in controlled:
            ctrl = instr.controlled_instrument(setting, controlled[key], reg_label)
            entries.append(ScheduleEntry(e.time, e.sites, ctrl, registers=(reg_label,)))
            consumed.add(key)
        else:
            entries.append(e)
    unmatched = set(controlled) - consumed
    if unmatched:
        raise ValueError(f"controlled points {sorted(unmatched)} match no schedule entry")
    full_sched = MeasurementSchedule(tuple(entries))
    rho_full = qcore.tensor_product(rho0, setting.state(reg_label))
    result = run_experiment(rho_full, h, full_sched, region,
                            track="alice_and_bob", dim_cap=dim_cap)
    bob = result.measured_ancillas("bob")
    labels = [reg_label] + [anc for _, anc in bob]
    state = result.state
    diag = (qcore.vector_diagonal(state.space, state.amplitudes, labels)
            if isinstance(state, PureState)
            else qcore.dm_diagonal(state.space, state.entries, labels))
    outcomes: dict[tuple, float] = {}
    for idx in np.ndindex(*diag.shape):
        p = float(diag[idx])
        s_lab = setting.labels[idx[0]]
        b_lab = tuple(pur.block_of(i) for (pur, _), i in zip(bob, idx[1:]))
        key = (s_lab, b_lab)
        outcomes[key] = outcomes.get(key, 0.0) + p
    total = sum(outcomes.values())
    joint = qcore.ProbabilityDistribution(
        tuple(sorted(((k, v / total) for k, v in outcomes.items()), key=lambda kv: str(kv[0]))))
    mi = qcore.classical_mutual_information(joint)
    return SignalingReport(mi, area_law_bound(params), joint)
