"""Choi calculus, process matrices, and the probed-correlation measure.

Conventions (fixed throughout the package):

* The Choi matrix of a map ``M: B(H_in) -> B(H_out)`` lives on ``H_in (x) H_out``
  with the input factor first: ``C = sum_ij |i><j| (x) M(|i><j|)``.
* The inverse map uses the computational-basis transpose:
  ``M(rho) = tr_in[C (rho^T (x) I_out)]``.
* A two-party process matrix W lives on ``A_in (x) A_out (x) B_in (x) B_out``
  (N parties interleave the same way); outcome probabilities contract the
  parties' instrument Choi matrices against ``W^T``.

The correlation measure of a process across a bipartition of its parties is the
largest mutual information obtainable between local probing ancillas, reported
as a certified lower bound from an isometry-parameterized optimizer together
with the dimension-derived cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from . import qcore
from .qcore import DensityMatrix, HilbertFactorization

KRAUS_TOL = 1e-12


# ---------------------------------------------------------------------------
# Choi matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi representation of a linear map, input factor first."""

    in_space: HilbertFactorization
    out_space: HilbertFactorization
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.array(self.matrix, dtype=np.complex128))
        self.matrix.setflags(write=False)
        d = self.d_in * self.d_out
        if self.matrix.shape != (d, d):
            raise ValueError(f"Choi shape {self.matrix.shape}, expected ({d}, {d})")

    @property
    def d_in(self) -> int:
        return self.in_space.total_dim

    @property
    def d_out(self) -> int:
        return self.out_space.total_dim

    def is_cp(self, tol: float = qcore.TOL_PSD) -> tuple[bool, float]:
        sym = (self.matrix + self.matrix.conj().T) / 2.0
        herm_resid = float(np.linalg.norm(self.matrix - sym))
        lo = float(np.linalg.eigvalsh(sym).min()) if sym.size else 0.0
        resid = max(herm_resid, -min(lo, 0.0))
        return resid <= tol, resid

    def is_tp(self, tol: float = qcore.TOL_TRACE) -> tuple[bool, float]:
        t = self.matrix.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        marg = np.einsum("iaja->ij", t)
        resid = float(np.linalg.norm(marg - np.eye(self.d_in)))
        return resid <= tol * max(1.0, math.sqrt(self.d_in)), resid

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return map_from_choi(self, rho)

    def kraus(self, tol: float = KRAUS_TOL) -> list[np.ndarray]:
        return kraus_from_choi(self.matrix, self.d_in, self.d_out, tol)


def choi_from_map(action: Callable[[np.ndarray], np.ndarray],
                  in_space: HilbertFactorization,
                  out_space: HilbertFactorization) -> ChoiMatrix:
    """Choi matrix of a map given as a matrix-action oracle."""
    d_in, d_out = in_space.total_dim, out_space.total_dim
    m = np.zeros((d_in, d_out, d_in, d_out), dtype=np.complex128)
    for i in range(d_in):
        for j in range(d_in):
            unit = np.zeros((d_in, d_in), dtype=np.complex128)
            unit[i, j] = 1.0
            m[i, :, j, :] = action(unit)
    return ChoiMatrix(in_space, out_space, m.reshape(d_in * d_out, d_in * d_out))


def map_from_choi(choi: ChoiMatrix, rho: np.ndarray) -> np.ndarray:
    """Apply the map: tr_in[C (rho^T (x) I_out)]."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (choi.d_in, choi.d_in):
        raise ValueError(f"state shape {rho.shape} does not match input dim {choi.d_in}")
    t = choi.matrix.reshape(choi.d_in, choi.d_out, choi.d_in, choi.d_out)
    return np.einsum("iajb,ij->ab", t, rho)


def kraus_from_choi(matrix: np.ndarray, d_in: int, d_out: int,
                    tol: float = KRAUS_TOL) -> list[np.ndarray]:
    """Kraus operators of a CP map from its Choi eigendecomposition."""
    sym = (matrix + matrix.conj().T) / 2.0
    w, v = np.linalg.eigh(sym)
    if w.size and w.min() < -qcore.TOL_PSD:
        raise ValueError(f"Choi matrix is not PSD (eigenvalue {w.min()})")
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= tol:
            break
        ops.append(math.sqrt(lam) * vec.reshape(d_in, d_out).T)
    return ops


def choi_from_kraus(kraus: Sequence[np.ndarray], in_space: HilbertFactorization,
                    out_space: HilbertFactorization) -> ChoiMatrix:
    d_in, d_out = in_space.total_dim, out_space.total_dim
    m = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for k in kraus:
        vec = np.asarray(k, dtype=np.complex128).T.reshape(-1)
        m += np.outer(vec, vec.conj())
    return ChoiMatrix(in_space, out_space, m)


def choi_from_isometry(iso: np.ndarray, in_space: HilbertFactorization,
                       out_space: HilbertFactorization) -> ChoiMatrix:
    """Choi of the isometric channel rho -> V rho V^dagger."""
    return choi_from_kraus([iso], in_space, out_space)


# ---------------------------------------------------------------------------
# process matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Party:
    name: str
    d_in: int
    d_out: int

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ValueError("party dimensions must be positive")


@dataclass(frozen=True)
class ProcessMatrix:
    """Positive operator on the interleaved in/out spaces of N parties."""

    parties: tuple[Party, ...]
    matrix: np.ndarray
    validated: bool = True

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.array(self.matrix, dtype=np.complex128))
        self.matrix.setflags(write=False)
        d = self.total_dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"shape {self.matrix.shape}, expected ({d}, {d})")
        if len({p.name for p in self.parties}) != len(self.parties):
            raise ValueError("duplicate party names")
        if self.validated:
            report = validate_process(self, probes=0)
            if not report.ok:
                raise ValueError(f"invalid process matrix: {report.failures()}")

    @classmethod
    def unchecked(cls, parties, matrix) -> "ProcessMatrix":
        return cls(tuple(parties), matrix, validated=False)

    @property
    def total_dim(self) -> int:
        return int(np.prod([p.d_in * p.d_out for p in self.parties], dtype=np.int64))

    @property
    def out_dim(self) -> int:
        return int(np.prod([p.d_out for p in self.parties], dtype=np.int64))

    def party(self, name: str) -> Party:
        for p in self.parties:
            if p.name == name:
                return p
        raise ValueError(f"unknown party {name!r}")

    def io_space(self) -> HilbertFactorization:
        factors = []
        for p in self.parties:
            factors.append((f"{p.name}_in", p.d_in))
            factors.append((f"{p.name}_out", p.d_out))
        return HilbertFactorization(tuple(factors))

    def normalized_state(self) -> DensityMatrix:
        return DensityMatrix(self.io_space(), self.matrix / np.trace(self.matrix))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool | None  # None: not checked
    residual: float | None = None


@dataclass(frozen=True)
class ValidityReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.passed is not None)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if c.passed is False]


def _random_cptp_choi(rng: np.random.Generator, d_in: int, d_out: int,
                      branches: int) -> list[ChoiMatrix]:
    """A random complete instrument: `branches` CP maps summing to CPTP."""
    per = max(1, math.ceil(d_in / d_out))  # kraus rank per branch, enough for TP
    iso = qcore.haar_isometry(rng, d_in, d_out * branches * per)
    in_spc = qcore.space(("in", d_in))
    out_spc = qcore.space(("out", d_out))
    resh = iso.reshape(d_out, branches * per, d_in)
    chois = []
    for b in range(branches):
        ks = [resh[:, b * per + j, :] for j in range(per)]
        chois.append(choi_from_kraus(ks, in_spc, out_spc))
    return chois


def validate_process(w: ProcessMatrix, probes: int = 20,
                     seed: int = 0) -> ValidityReport:
    """Check positivity, trace normalization, and randomized probability sums.

    The full linear-subspace characterization of valid processes is not
    implemented; the corresponding check is reported as not checked.
    """
    sym = (w.matrix + w.matrix.conj().T) / 2.0
    herm_resid = float(np.linalg.norm(w.matrix - sym)) / max(1.0, float(np.linalg.norm(w.matrix)))
    lo = float(np.linalg.eigvalsh(sym).min()) if sym.size else 0.0
    psd_resid = max(herm_resid, -min(lo, 0.0))
    checks = [CheckResult("psd", psd_resid <= qcore.TOL_PSD, psd_resid)]
    tr_resid = abs(complex(np.trace(w.matrix)) - w.out_dim)
    checks.append(CheckResult("trace", tr_resid <= qcore.TOL_TRACE * max(1.0, w.out_dim), tr_resid))
    if probes > 0:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            per_party = [
                _random_cptp_choi(rng, p.d_in, p.d_out, branches=int(rng.integers(1, 3)))
                for p in w.parties
            ]
            total = 0.0
            for combo in _outcome_combos(per_party):
                total += probability_rule(w, combo)
            worst = max(worst, abs(total - 1.0))
        checks.append(CheckResult("probability_normalization", worst <= 1e-8, worst))
    checks.append(CheckResult("valid_subspace", None, None))
    return ValidityReport(tuple(checks))


def _outcome_combos(per_party: list[list[ChoiMatrix]]):
    if not per_party:
        yield ()
        return
    for head in per_party[0]:
        for tail in _outcome_combos(per_party[1:]):
            yield (head,) + tail


def probability_rule(w: ProcessMatrix, branch_chois: Sequence[ChoiMatrix]) -> float:
    """p(outcomes) = tr[(M_1 (x) ... (x) M_N) W^T] for one branch per party."""
    if len(branch_chois) != len(w.parties):
        raise ValueError("need one instrument branch per party")
    op = np.array([[1.0]], dtype=np.complex128)
    for p, choi in zip(w.parties, branch_chois):
        if choi.d_in != p.d_in or choi.d_out != p.d_out:
            raise ValueError(f"branch dims {(choi.d_in, choi.d_out)} do not match party {p.name}")
        op = np.kron(op, choi.matrix)
    val = complex(np.trace(op @ w.matrix.T))
    if abs(val.imag) > 1e-8:
        raise ValueError(f"probability has imaginary part {val.imag}")
    return float(val.real)


def process_from_state(omega: DensityMatrix, out_dims: Sequence[int] | None = None,
                       names: Sequence[str] = ("A", "B")) -> ProcessMatrix:
    """Process matrix of a shared state: W = omega_{inputs} (x) I_{outputs}.

    `omega` must have one factor per party (the party input spaces).
    """
    if len(omega.space.factors) != len(names):
        raise ValueError("state must have one factor per party")
    out_dims = tuple(out_dims) if out_dims is not None else (1,) * len(names)
    parties = tuple(
        Party(name, d_in, d_out)
        for name, (_, d_in), d_out in zip(names, omega.space.factors, out_dims)
    )
    factors = []
    for p in parties:
        factors.append((f"{p.name}_in", p.d_in))
        factors.append((f"{p.name}_out", p.d_out))
    spc = HilbertFactorization(tuple(factors))
    in_labels = [f"{p.name}_in" for p in parties]
    mat = qcore.embed_operator(omega.entries, in_labels, spc)
    return ProcessMatrix(parties, mat)


def process_from_channel(channel: ChoiMatrix,
                         names: Sequence[str] = ("A", "B")) -> ProcessMatrix:
    """Process matrix of a channel from party 1's output to party 2's input.

    Party 1's input and party 2's output are trivial one-dimensional spaces.
    """
    ok_tp, resid = channel.is_tp()
    ok_cp, cp_resid = channel.is_cp()
    if not (ok_tp and ok_cp):
        raise ValueError(f"channel is not CPTP (tp residual {resid}, cp residual {cp_resid})")
    parties = (
        Party(names[0], 1, channel.d_in),
        Party(names[1], channel.d_out, 1),
    )
    # channel Choi on (sender_out, receiver_in) is already in interleaved order
    return ProcessMatrix(parties, channel.matrix)


def correlation_gap_process() -> ProcessMatrix:
    """Two-party causally ordered process whose probed correlations exceed the
    mutual information of its normalized matrix (1 bit vs 2 bits)."""
    parties = (Party("A", 2, 2), Party("B", 2, 1))
    spc = qcore.space(("A_in", 2), ("A_out", 2), ("B_in", 2))
    phi = qcore.bell_state(qcore.space(("A_in", 2), ("B_in", 2)))
    phi_mat = np.outer(phi.amplitudes, phi.amplitudes.conj())
    ket0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
    ket1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
    term1 = qcore.embed_operator(phi_mat, ["A_in", "B_in"], spc) @ \
        qcore.embed_operator(ket0, ["A_out"], spc)
    term2 = 0.25 * qcore.embed_operator(np.eye(4, dtype=np.complex128), ["A_in", "B_in"], spc) @ \
        qcore.embed_operator(ket1, ["A_out"], spc)
    return ProcessMatrix(parties, term1 + term2)


# ---------------------------------------------------------------------------
# probing schemes and the final ancilla state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartyProbe:
    """A CPTP probing map for one party: input -> output (x) ancilla (Choi form)."""

    party: str
    ancilla_dim: int
    choi: ChoiMatrix  # in_space = party input; out_space = (party output, ancilla)

    def __post_init__(self):
        if self.ancilla_dim < 1:
            raise ValueError("ancilla dimension must be at least 1")
        cp_ok, cp_resid = self.choi.is_cp(tol=1e-8)
        tp_ok, tp_resid = self.choi.is_tp(tol=1e-8)
        if not (cp_ok and tp_ok):
            raise ValueError(f"probe for party {self.party!r} is not CPTP "
                             f"(cp residual {cp_resid:.2e}, tp residual {tp_resid:.2e})")


@dataclass(frozen=True)
class ProbingScheme:
    probes: tuple[PartyProbe, ...]

    def probe_for(self, name: str) -> PartyProbe:
        for p in self.probes:
            if p.party == name:
                return p
        raise ValueError(f"no probe for party {name!r}")


def isometry_probe(party: Party, iso: np.ndarray, ancilla_dim: int) -> PartyProbe:
    """Probe applying the isometry V: d_in -> d_out * ancilla_dim."""
    in_spc = qcore.space((f"{party.name}_in", party.d_in))
    out_spc = qcore.space((f"{party.name}_out", party.d_out),
                          (f"{party.name}_anc", ancilla_dim))
    return PartyProbe(party.name, ancilla_dim, choi_from_isometry(iso, in_spc, out_spc))


def teleport_probe(party: Party) -> PartyProbe:
    """Copy-in / feed-forward probe: keeps the input in one ancilla register and
    feeds half of a maximally entangled pair into the party output.

    Probing every party this way leaves the ancillas in the normalized process
    matrix itself.
    """
    d_in, d_out = party.d_in, party.d_out
    anc = d_in * d_out
    phi = qcore.bell_state(qcore.space(("o", d_out), ("a2", d_out))).amplitudes \
        if d_out > 1 else np.array([1.0], dtype=np.complex128)
    # V |psi> = |psi>_{a1} (x) |phi+>_{out, a2}, output factor order (out, a1, a2)
    iso = np.zeros((d_out * anc, d_in), dtype=np.complex128)
    for i in range(d_in):
        block = np.zeros((d_out, d_in, d_out), dtype=np.complex128)
        phi_t = phi.reshape(d_out, d_out)
        block[:, i, :] = phi_t
        iso[:, i] = block.reshape(-1)
    return isometry_probe(party, iso, anc)


def discard_probe(party: Party) -> PartyProbe:
    """Trace the input, emit fixed |0> states on the output and a qubit ancilla."""
    d_in, d_out = party.d_in, party.d_out
    kraus = [np.zeros((d_out * 2, d_in), dtype=np.complex128) for _ in range(d_in)]
    for i in range(d_in):
        kraus[i][0, i] = 1.0  # (out=0, anc=0) <- i
    in_spc = qcore.space((f"{party.name}_in", d_in))
    out_spc = qcore.space((f"{party.name}_out", d_out), (f"{party.name}_anc", 2))
    return PartyProbe(party.name, 2, choi_from_kraus(kraus, in_spc, out_spc))


def keep_input_probe(party: Party) -> PartyProbe:
    """Move the party input into the ancilla; emit |0> on the party output."""
    d_in, d_out = party.d_in, party.d_out
    iso = np.zeros((d_out * d_in, d_in), dtype=np.complex128)
    for i in range(d_in):
        iso[0 * d_in + i, i] = 1.0  # (out=0, anc=i) <- i
    return isometry_probe(party, iso, d_in)


def final_ancilla_state(w: ProcessMatrix, scheme: ProbingScheme) -> DensityMatrix:
    """State of the probing ancillas after all parties acted on the process."""
    factors = []
    for p in w.parties:
        factors.append((f"{p.name}_in", p.d_in))
        factors.append((f"{p.name}_out", p.d_out))
    anc_factors = []
    for p in w.parties:
        probe = scheme.probe_for(p.name)
        if probe.choi.d_in != p.d_in or probe.choi.d_out != p.d_out * probe.ancilla_dim:
            raise ValueError(f"probe dims do not match party {p.name}")
        anc_factors.append((f"{p.name}_anc", probe.ancilla_dim))
    spc = HilbertFactorization(tuple(factors + anc_factors))
    w_emb = qcore.embed_operator(w.matrix.T, [lab for lab, _ in factors], spc)
    probe_prod = np.eye(spc.total_dim, dtype=np.complex128)
    for p in w.parties:
        probe = scheme.probe_for(p.name)
        labels = [f"{p.name}_in", f"{p.name}_out", f"{p.name}_anc"]
        probe_prod = probe_prod @ qcore.embed_operator(probe.choi.matrix, labels, spc)
    product = w_emb @ probe_prod
    anc_labels = [lab for lab, _ in anc_factors]
    rho = qcore.dm_marginal(spc, product, anc_labels)
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(spc.restrict(anc_labels), rho)


# ---------------------------------------------------------------------------
# the correlation measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerBudget:
    restarts: int = 3
    maxiter: int = 200
    max_evals: int | None = None
    ancilla_dims: tuple[int, ...] | None = None  # default: doubling up to the rank bound
    seed: int = 0
    jobs: int = 1


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    cap: float
    scheme: ProbingScheme
    trace: tuple[dict, ...]
    incomplete: bool = False


def correlation_cap(w: ProcessMatrix, bipartition: tuple[Sequence[str], Sequence[str]]) -> float:
    """Dimension cap 2 log2 min(prod d_in d_out) over the two sides."""
    prods = []
    for side in bipartition:
        prods.append(int(np.prod([w.party(n).d_in * w.party(n).d_out for n in side])))
    return 2.0 * math.log2(min(prods))


def _check_bipartition(w: ProcessMatrix, bipartition) -> tuple[tuple[str, ...], tuple[str, ...]]:
    left, right = tuple(bipartition[0]), tuple(bipartition[1])
    names = {p.name for p in w.parties}
    if set(left) & set(right) or set(left) | set(right) != names:
        raise ValueError("bipartition must be a disjoint cover of the parties")
    if not left or not right:
        raise ValueError("both sides of the bipartition must be nonempty")
    return left, right


def ancilla_mutual_information(w: ProcessMatrix, scheme: ProbingScheme,
                               bipartition) -> float:
    left, right = _check_bipartition(w, bipartition)
    rho = final_ancilla_state(w, scheme)
    side_a = [f"{n}_anc" for n in left]
    side_b = [f"{n}_anc" for n in right]
    return qcore.quantum_mutual_information(rho, (side_a, side_b))


def _pack_hermitian(dim: int, theta: np.ndarray) -> np.ndarray:
    g = np.zeros((dim, dim), dtype=np.complex128)
    idx = 0
    for i in range(dim):
        g[i, i] = theta[idx]
        idx += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            g[i, j] = theta[idx] + 1j * theta[idx + 1]
            g[j, i] = theta[idx] - 1j * theta[idx + 1]
            idx += 2
    return g


def _n_params(dim: int) -> int:
    return dim * dim


def _iso_from_theta(party: Party, anc_dim: int, theta: np.ndarray) -> np.ndarray:
    dim = party.d_out * anc_dim
    u = scipy.linalg.expm(1j * _pack_hermitian(dim, theta))
    return u[:, : party.d_in]


def _theta_from_iso(party: Party, anc_dim: int, iso: np.ndarray) -> np.ndarray | None:
    """Recover generator parameters reproducing a given isometry, if possible."""
    dim = party.d_out * anc_dim
    if iso.shape != (dim, party.d_in):
        return None
    # complete the isometry to a unitary, take a Hermitian logarithm
    q, _ = np.linalg.qr(
        np.concatenate([iso, np.random.default_rng(0).normal(size=(dim, dim - party.d_in))
                        + 1j * np.random.default_rng(1).normal(size=(dim, dim - party.d_in))], axis=1)
        if dim > party.d_in else iso
    )
    # keep the first columns exactly equal to iso
    u = q.copy()
    u[:, : party.d_in] = iso
    # re-orthonormalize the completion against iso
    if dim > party.d_in:
        rest = q[:, party.d_in:]
        rest = rest - iso @ (iso.conj().T @ rest)
        rq, _ = np.linalg.qr(rest)
        u[:, party.d_in:] = rq
    g = scipy.linalg.logm(u) / 1j
    g = (g + g.conj().T) / 2.0
    check = scipy.linalg.expm(1j * g)[:, : party.d_in]
    if np.linalg.norm(check - iso) > 1e-6:
        return None
    theta = np.zeros(_n_params(dim))
    idx = 0
    for i in range(dim):
        theta[idx] = g[i, i].real
        idx += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            theta[idx] = g[i, j].real
            theta[idx + 1] = g[i, j].imag
            idx += 2
    return theta


def estimate_max_correlation(w: ProcessMatrix, bipartition,
                             budget: OptimizerBudget | None = None) -> CorrelationEstimate:
    """Lower-bound the probed-correlation measure by local-ascent optimization.

    Probing maps are isometries ``V_j: in_j -> out_j (x) anc_j`` parameterized by
    Hermitian generators; ancilla dimensions follow a doubling schedule up to the
    rank bound ``d_in * d_out`` per party.  The copy-in/feed-forward probe is
    always evaluated as a deterministic candidate (and used as a polish start),
    so the returned value never falls below the mutual information of the
    normalized process matrix.
    """
    budget = budget or OptimizerBudget()
    left, right = _check_bipartition(w, bipartition)
    cap = correlation_cap(w, (left, right))
    rank_bounds = {p.name: p.d_in * p.d_out for p in w.parties}

    if budget.ancilla_dims is not None:
        dim_steps = list(budget.ancilla_dims)
    else:
        top = max(rank_bounds.values())
        dim_steps, d = [], 1
        while d < top:
            dim_steps.append(d)
            d *= 2
        dim_steps.append(top)

    evals = {"n": 0}
    exhausted = {"flag": False}

    def objective_factory(anc_dims: dict[str, int]):
        sizes = {p.name: _n_params(p.d_out * anc_dims[p.name]) for p in w.parties}
        order = [p.name for p in w.parties]

        def split(theta):
            out, ofs = {}, 0
            for name in order:
                out[name] = theta[ofs: ofs + sizes[name]]
                ofs += sizes[name]
            return out

        def value(theta: np.ndarray) -> float:
            if budget.max_evals is not None and evals["n"] >= budget.max_evals:
                exhausted["flag"] = True
                raise StopIteration
            evals["n"] += 1
            parts = split(theta)
            probes = tuple(
                isometry_probe(p, _iso_from_theta(p, anc_dims[p.name], parts[p.name]),
                               anc_dims[p.name])
                for p in w.parties
            )
            return ancilla_mutual_information(w, ProbingScheme(probes), (left, right))

        total = sum(sizes.values())
        return value, total, split

    best_value = -1.0
    best_scheme: ProbingScheme | None = None
    trace: list[dict] = []
    rng = np.random.default_rng(budget.seed)

    for step, base_dim in enumerate(dim_steps):
        anc_dims = {name: max(1, min(base_dim, rb)) for name, rb in rank_bounds.items()}
        # isometries need d_out * anc >= d_in
        feasible = all(
            w.party(name).d_out * anc_dims[name] >= w.party(name).d_in
            for name in rank_bounds
        )
        if not feasible:
            continue
        value_fn, n_total, _ = objective_factory(anc_dims)

        starts: list[tuple[str, np.ndarray]] = []
        if all(anc_dims[name] == rank_bounds[name] for name in rank_bounds):
            thetas = []
            for p in w.parties:
                probe = teleport_probe(p)
                iso = probe.choi.kraus()[0]
                thetas.append(_theta_from_iso(p, anc_dims[p.name], iso))
            if all(t is not None for t in thetas):
                starts.append(("teleport", np.concatenate(thetas)))
        for r in range(budget.restarts):
            starts.append((f"random{r}", rng.normal(scale=0.6, size=n_total)))

        def run_start(item):
            tag, theta0 = item
            try:
                v0 = value_fn(theta0)
            except StopIteration:
                return None
            v, theta_best, nit = v0, theta0, 0
            try:
                res = scipy.optimize.minimize(
                    lambda th: -value_fn(th), theta0, method="L-BFGS-B",
                    options={"maxiter": budget.maxiter, "ftol": 1e-12, "gtol": 1e-10},
                )
                if -float(res.fun) > v:
                    v, theta_best, nit = -float(res.fun), res.x, int(res.nit)
            except StopIteration:
                pass  # budget ran out mid-polish; keep the start value
            return tag, v, theta_best, nit

        # restarts are independent; a strict evaluation budget forces sequential
        # execution so the cutoff point is deterministic
        if budget.jobs > 1 and budget.max_evals is None:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=budget.jobs) as pool:
                results = list(pool.map(run_start, starts))
        else:
            results = [run_start(s) for s in starts]

        for outcome in results:  # merge in fixed start order: ties keep the earliest
            if outcome is None:
                break
            tag, v, theta_best, nit = outcome
            trace.append({"ancilla_dims": dict(anc_dims), "start": tag,
                          "value_bits": v, "iterations": nit})
            if v > best_value + 1e-12:
                best_value = v
                parts_sizes = [_n_params(w.party(n).d_out * anc_dims[n]) for n in
                               [p.name for p in w.parties]]
                ofs, probes = 0, []
                for p, sz in zip(w.parties, parts_sizes):
                    probes.append(isometry_probe(
                        p, _iso_from_theta(p, anc_dims[p.name], theta_best[ofs: ofs + sz]),
                        anc_dims[p.name]))
                    ofs += sz
                best_scheme = ProbingScheme(tuple(probes))
        if exhausted["flag"]:
            break

    if best_scheme is None:
        if exhausted["flag"]:
            raise ValueError("evaluation budget exhausted before any probing scheme "
                             "was evaluated")
        raise RuntimeError("no feasible probing dimensions for this process")
    return CorrelationEstimate(
        value=min(best_value, cap),
        cap=cap,
        scheme=best_scheme,
        trace=tuple(trace),
        incomplete=exhausted["flag"],
    )


# ---------------------------------------------------------------------------
# JSON import/export
# ---------------------------------------------------------------------------


def _matrix_to_json(m: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in m.reshape(-1)]


def _matrix_from_json(entries, dim: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    if flat.size != dim * dim:
        raise ValueError(f"expected {dim * dim} entries, got {flat.size}")
    return flat.reshape(dim, dim)


def process_to_json(w: ProcessMatrix) -> dict:
    return {
        "kind": "process_matrix",
        "parties": [{"name": p.name, "d_in": p.d_in, "d_out": p.d_out} for p in w.parties],
        "entries": _matrix_to_json(w.matrix),
    }


def process_from_json(doc: dict) -> ProcessMatrix:
    parties = tuple(Party(p["name"], int(p["d_in"]), int(p["d_out"]))
                    for p in doc["parties"])
    dim = int(np.prod([p.d_in * p.d_out for p in parties], dtype=np.int64))
    return ProcessMatrix.unchecked(parties, _matrix_from_json(doc["entries"], dim))


def scheme_to_json(scheme: ProbingScheme) -> dict:
    return {
        "kind": "probing_scheme",
        "probes": [
            {
                "party": p.party,
                "ancilla_dim": p.ancilla_dim,
                "d_in": p.choi.d_in,
                "d_out": p.choi.d_out,
                "choi": _matrix_to_json(p.choi.matrix),
            }
            for p in scheme.probes
        ],
    }
