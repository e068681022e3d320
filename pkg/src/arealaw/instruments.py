"""Quantum instruments, their validation, and purification into isometries.

An instrument is a finite collection of completely positive branch maps (stored
as Choi matrices) summing to a trace-preserving map.  Purifying it yields an
isometry from the input to output (x) fresh ancilla, with a projective block
decomposition of the ancilla carrying the recorded outcome; the projective
readout can then be deferred to the end of a multi-step experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import qcore
from .processmatrix import (ChoiMatrix, CheckResult, ValidityReport,
                            choi_from_kraus, kraus_from_choi)
from .qcore import DensityMatrix, HilbertFactorization, PureState


@dataclass(frozen=True)
class Instrument:
    """Outcome-labeled CP branches summing to a CPTP map."""

    input_space: HilbertFactorization
    output_space: HilbertFactorization
    branches: tuple[tuple[object, ChoiMatrix], ...]

    def __post_init__(self):
        for label, choi in self.branches:
            if choi.d_in != self.d_in or choi.d_out != self.d_out:
                raise ValueError(f"branch {label!r} has mismatched dimensions")
        labels = [lab for lab, _ in self.branches]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate outcome labels")

    @property
    def d_in(self) -> int:
        return self.input_space.total_dim

    @property
    def d_out(self) -> int:
        return self.output_space.total_dim

    def outcome_labels(self) -> tuple:
        return tuple(lab for lab, _ in self.branches)

    def branch(self, label) -> ChoiMatrix:
        for lab, choi in self.branches:
            if lab == label:
                return choi
        raise ValueError(f"no branch {label!r}")

    def apply_branch(self, label, rho: np.ndarray) -> np.ndarray:
        return self.branch(label).apply(rho)

    def apply_total(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros((self.d_out, self.d_out), dtype=np.complex128)
        for _, choi in self.branches:
            out += choi.apply(rho)
        return out


def validate_instrument(ins: Instrument) -> ValidityReport:
    """Per-branch CP checks plus the sum-CPTP check, with residuals."""
    checks = []
    total = np.zeros((ins.d_in * ins.d_out,) * 2, dtype=np.complex128)
    for label, choi in ins.branches:
        ok, resid = choi.is_cp()
        checks.append(CheckResult(f"branch[{label}]_cp", ok, resid))
        total += choi.matrix
    t = total.reshape(ins.d_in, ins.d_out, ins.d_in, ins.d_out)
    marg = np.einsum("iaja->ij", t)
    resid = float(np.linalg.norm(marg - np.eye(ins.d_in)))
    checks.append(CheckResult("sum_cptp", resid <= 1e-8 * max(1.0, math.sqrt(ins.d_in)), resid))
    return ValidityReport(tuple(checks))


@dataclass(frozen=True)
class PurifiedInstrument:
    """Isometry V: input -> output (x) ancilla with outcome blocks on the ancilla.

    The ancilla basis is indexed by (branch, kraus index); each outcome projector
    is the rank-(kraus rank) block of its branch.  Projecting the ancilla onto a
    block and tracing it reproduces the branch map exactly.
    """

    input_space: HilbertFactorization
    output_space: HilbertFactorization
    ancilla_dim: int
    isometry: np.ndarray  # shape (d_out * ancilla_dim, d_in)
    outcome_blocks: tuple[tuple[object, int, int], ...]  # (label, start, stop)

    def __post_init__(self):
        object.__setattr__(self, "isometry", np.array(self.isometry, dtype=np.complex128))
        self.isometry.setflags(write=False)
        d_in = self.input_space.total_dim
        d_out = self.output_space.total_dim
        if self.isometry.shape != (d_out * self.ancilla_dim, d_in):
            raise ValueError("isometry shape does not match spaces")
        resid = np.linalg.norm(self.isometry.conj().T @ self.isometry - np.eye(d_in))
        if resid > qcore.TOL_UNITARY * math.sqrt(d_in):
            raise ValueError(f"not an isometry (residual {resid})")

    @property
    def outcome_labels(self) -> tuple:
        return tuple(lab for lab, _, _ in self.outcome_blocks)

    def outcome_projectors(self) -> tuple[tuple[object, np.ndarray], ...]:
        out = []
        for lab, start, stop in self.outcome_blocks:
            p = np.zeros((self.ancilla_dim, self.ancilla_dim), dtype=np.complex128)
            for k in range(start, stop):
                p[k, k] = 1.0
            out.append((lab, p))
        return tuple(out)

    def block_of(self, ancilla_index: int):
        for lab, start, stop in self.outcome_blocks:
            if start <= ancilla_index < stop:
                return lab
        raise ValueError(f"ancilla index {ancilla_index} outside all outcome blocks")


def purify(ins: Instrument, tol: float = 1e-11) -> PurifiedInstrument:
    """Stinespring-style dilation with ancilla dimension = sum of Kraus ranks."""
    report = validate_instrument(ins)
    if not report.ok:
        raise ValueError(f"cannot purify an invalid instrument: {report.failures()}")
    branch_kraus = []
    for label, choi in ins.branches:
        ops = kraus_from_choi(choi.matrix, ins.d_in, ins.d_out, tol)
        branch_kraus.append((label, ops))
    anc_dim = sum(len(ops) for _, ops in branch_kraus)
    if anc_dim == 0:
        raise ValueError("instrument has no nonzero branch")
    iso = np.zeros((ins.d_out, anc_dim, ins.d_in), dtype=np.complex128)
    blocks = []
    cursor = 0
    for label, ops in branch_kraus:
        for k, op in enumerate(ops):
            iso[:, cursor + k, :] = op
        blocks.append((label, cursor, cursor + len(ops)))
        cursor += len(ops)
    return PurifiedInstrument(
        input_space=ins.input_space,
        output_space=ins.output_space,
        ancilla_dim=anc_dim,
        isometry=iso.reshape(ins.d_out * anc_dim, ins.d_in),
        outcome_blocks=tuple(blocks),
    )


# ---------------------------------------------------------------------------
# deferred outcome statistics
# ---------------------------------------------------------------------------


def deferred_outcome_distribution(
    state: PureState | DensityMatrix,
    measured: Sequence[tuple[PurifiedInstrument, str]],
) -> qcore.ProbabilityDistribution:
    """Joint outcome distribution from projecting each listed ancilla's blocks.

    The state is the final state of a run with the projective readouts deferred;
    the joint equals the sequential-measurement statistics.
    """
    if not measured:
        return qcore.ProbabilityDistribution((((), 1.0),))
    labels = [anc for _, anc in measured]
    for pur, anc in measured:
        if anc not in state.space.labels:
            raise ValueError(f"ancilla label {anc!r} missing from the state")
        if state.space.dim_of(anc) != pur.ancilla_dim:
            raise ValueError(f"ancilla {anc!r} dimension mismatch")
    if isinstance(state, PureState):
        diag = qcore.vector_diagonal(state.space, state.amplitudes, labels)
    else:
        diag = qcore.dm_diagonal(state.space, state.entries, labels)
    outcomes: dict[tuple, float] = {}
    it = np.ndindex(*diag.shape)
    for idx in it:
        p = float(diag[idx])
        key = tuple(pur.block_of(i) for (pur, _), i in zip(measured, idx))
        outcomes[key] = outcomes.get(key, 0.0) + p
    total = sum(outcomes.values())
    if total > 0:
        outcomes = {k: v / total for k, v in outcomes.items()}
    return qcore.ProbabilityDistribution(tuple(sorted(outcomes.items(), key=lambda kv: str(kv[0]))))


# ---------------------------------------------------------------------------
# setting-controlled instruments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SettingDistribution:
    """Distribution over instrument settings, encoded as sqrt-amplitude state."""

    settings: tuple[tuple[object, float], ...]

    def __post_init__(self):
        probs = [p for _, p in self.settings]
        if any(p < -qcore.TOL_TRACE for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("setting probabilities must be nonnegative and sum to 1")

    @property
    def n(self) -> int:
        return len(self.settings)

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.settings)

    def state(self, label: str = "setting") -> PureState:
        amps = np.sqrt(np.array([max(p, 0.0) for _, p in self.settings], dtype=float))
        return PureState(qcore.space((label, self.n)), amps.astype(np.complex128))

    def distribution(self) -> qcore.ProbabilityDistribution:
        return qcore.ProbabilityDistribution(self.settings)


def controlled_instrument(setting: SettingDistribution,
                          per_setting: Mapping[object, Instrument],
                          setting_label: str = "setting") -> Instrument:
    """Block-controlled instrument on setting-register (x) system.

    Kraus operators of matching index are summed over control blocks
    (shorter Kraus lists are zero-padded), so setting coherences survive where
    the per-setting channels allow it; tracing the register reduces the action
    on the system to the probability mixture of the per-setting instruments.
    """
    instruments = [per_setting[lab] for lab in setting.labels]
    first = instruments[0]
    if any(i.d_in != first.d_in or i.d_out != first.d_out for i in instruments):
        raise ValueError("per-setting instruments must share input/output spaces")
    all_outcomes: list = []
    for ins in instruments:
        for lab in ins.outcome_labels():
            if lab not in all_outcomes:
                all_outcomes.append(lab)
    n = setting.n
    in_space = qcore.space((setting_label, n)).concat(first.input_space)
    out_space = qcore.space((setting_label, n)).concat(first.output_space)
    branches = []
    for outcome in all_outcomes:
        kraus_lists = []
        for ins in instruments:
            if outcome in ins.outcome_labels():
                kraus_lists.append(ins.branch(outcome).kraus())
            else:
                kraus_lists.append([])
        depth = max((len(ks) for ks in kraus_lists), default=0)
        ctrl_kraus = []
        for k in range(depth):
            op = np.zeros((n * first.d_out, n * first.d_in), dtype=np.complex128)
            for s, ks in enumerate(kraus_lists):
                if k < len(ks):
                    op[s * first.d_out:(s + 1) * first.d_out,
                       s * first.d_in:(s + 1) * first.d_in] = ks[k]
            ctrl_kraus.append(op)
        branches.append((outcome, choi_from_kraus(ctrl_kraus, in_space, out_space)))
    return Instrument(in_space, out_space, tuple(branches))


# ---------------------------------------------------------------------------
# instrument templates
# ---------------------------------------------------------------------------


def _site_spaces(d: int):
    return qcore.space(("in", d)), qcore.space(("out", d))


def identity_instrument(d: int = 2) -> Instrument:
    in_spc, out_spc = _site_spaces(d)
    return Instrument(in_spc, out_spc,
                      ((0, choi_from_kraus([np.eye(d)], in_spc, out_spc)),))


def unitary_instrument(u: np.ndarray) -> Instrument:
    d = u.shape[0]
    in_spc, out_spc = _site_spaces(d)
    return Instrument(in_spc, out_spc, ((0, choi_from_kraus([u], in_spc, out_spc)),))


def projective_z(d: int = 2) -> Instrument:
    in_spc, out_spc = _site_spaces(d)
    branches = []
    for a in range(d):
        p = np.zeros((d, d), dtype=np.complex128)
        p[a, a] = 1.0
        branches.append((a, choi_from_kraus([p], in_spc, out_spc)))
    return Instrument(in_spc, out_spc, tuple(branches))


def projective_x(d: int = 2) -> Instrument:
    """Projective measurement in the Fourier (for d=2: Hadamard) basis."""
    in_spc, out_spc = _site_spaces(d)
    f = np.array([[np.exp(2j * np.pi * j * k / d) for k in range(d)] for j in range(d)])
    f /= math.sqrt(d)
    branches = []
    for a in range(d):
        v = f[:, a]
        branches.append((a, choi_from_kraus([np.outer(v, v.conj())], in_spc, out_spc)))
    return Instrument(in_spc, out_spc, tuple(branches))


def swap_with_ancilla(d: int = 2) -> Instrument:
    """Move the system state into the fresh ancilla, leave |0> behind."""
    in_spc, out_spc = _site_spaces(d)
    kraus = []
    for i in range(d):
        k = np.zeros((d, d), dtype=np.complex128)
        k[0, i] = 1.0
        kraus.append(k)
    return Instrument(in_spc, out_spc, ((0, choi_from_kraus(kraus, in_spc, out_spc)),))


def depolarizing(p: float, d: int = 2) -> Instrument:
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength must be in [0, 1]")
    in_spc, out_spc = _site_spaces(d)
    kraus = [math.sqrt(1.0 - p) * np.eye(d, dtype=np.complex128)]
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=np.complex128)
            k[i, j] = math.sqrt(p / d)
            kraus.append(k)
    return Instrument(in_spc, out_spc, ((0, choi_from_kraus(kraus, in_spc, out_spc)),))


def amplitude_damping(gamma: float) -> Instrument:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("damping rate must be in [0, 1]")
    in_spc, out_spc = _site_spaces(2)
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=np.complex128)
    k1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=np.complex128)
    return Instrument(in_spc, out_spc, ((0, choi_from_kraus([k0, k1], in_spc, out_spc)),))


def random_isometry_instrument(rng: np.random.Generator, d: int = 2,
                               anc_dim: int = 2) -> Instrument:
    """Haar-random isometry split into one rank-1 branch per ancilla level."""
    in_spc, out_spc = _site_spaces(d)
    iso = qcore.haar_isometry(rng, d, d * anc_dim).reshape(d, anc_dim, d)
    branches = []
    for a in range(anc_dim):
        branches.append((a, choi_from_kraus([iso[:, a, :]], in_spc, out_spc)))
    return Instrument(in_spc, out_spc, tuple(branches))


INSTRUMENT_TEMPLATES = (
    "identity", "projective-z", "projective-x", "swap-with-ancilla",
    "depolarize", "amplitude-damp", "random-isometry", "flip",
)


def instrument_from_template(name: str, d: int,
                             rng: np.random.Generator | None = None,
                             **params) -> Instrument:
    if name == "identity":
        return identity_instrument(d)
    if name == "projective-z":
        return projective_z(d)
    if name == "projective-x":
        return projective_x(d)
    if name == "swap-with-ancilla":
        return swap_with_ancilla(d)
    if name == "depolarize":
        return depolarizing(float(params.get("p", 0.5)), d)
    if name == "amplitude-damp":
        if d != 2:
            raise ValueError("amplitude-damp template is qubit-only")
        return amplitude_damping(float(params.get("gamma", 0.5)))
    if name == "random-isometry":
        if rng is None:
            raise ValueError("random-isometry template needs a seeded generator")
        return random_isometry_instrument(rng, d, int(params.get("anc_dim", 2)))
    if name == "flip":
        if d != 2:
            raise ValueError("flip template is qubit-only")
        return unitary_instrument(qcore.PAULI_X)
    raise ValueError(f"unknown instrument template {name!r}")


# ---------------------------------------------------------------------------
# JSON import/export (shared with the CLI `validate` surface)
# ---------------------------------------------------------------------------


def instrument_to_json(ins: Instrument) -> dict:
    from .processmatrix import _matrix_to_json
    return {
        "kind": "instrument",
        "d_in": ins.d_in,
        "d_out": ins.d_out,
        "branches": [
            {"outcome": str(lab), "choi": _matrix_to_json(choi.matrix)}
            for lab, choi in ins.branches
        ],
    }


def instrument_from_json(doc: dict) -> Instrument:
    from .processmatrix import _matrix_from_json
    d_in, d_out = int(doc["d_in"]), int(doc["d_out"])
    in_spc, out_spc = qcore.space(("in", d_in)), qcore.space(("out", d_out))
    branches = []
    for b in doc["branches"]:
        mat = _matrix_from_json(b["choi"], d_in * d_out)
        branches.append((b["outcome"], ChoiMatrix(in_spc, out_spc, mat)))
    return Instrument(in_spc, out_spc, tuple(branches))
