import dataclasses
import math

import numpy as np
import pytest

from arealaw import experiment as exp
from arealaw import instruments as instr
from arealaw import lattice as lat
from arealaw import qcore
from arealaw.qcore import space
from conftest import random_cptp_instrument


def chain(n, d=2):
    return lat.LatticeSpec(1, (n,), d)


def params_for(h, region, c_sie=18.0, d=2):
    split = lat.region_split(h.lattice, region.sigma, h.interaction_range)
    geo = exp.RegionGeometry(region.x, len(split.boundary), region.t_tot, region.x)
    return exp.AreaLawParams.from_sie(c_sie, h.max_support_size,
                                      max(lat.strength_norm(h), 1e-6), d, geo)


def random_alice(seed):
    def make(site, step):
        rng = qcore.stream_rng(seed, site[0], step)
        return instr.random_isometry_instrument(rng, 2, 2)
    return make


# ---------------------------------------------------------------------------
# region / schedule / params plumbing
# ---------------------------------------------------------------------------


def test_region_invariants():
    r = exp.SpacetimeRegion(((0,), (1,)), 0.0, 1.0, 4)
    assert r.t_tot == pytest.approx(1.0)
    assert r.dt == pytest.approx(0.25)
    assert r.x == 2
    assert len(r.step_times()) == 4
    assert all(0.0 < t < 1.0 for t in r.step_times())
    with pytest.raises(ValueError):
        exp.SpacetimeRegion(((0,),), 1.0, 0.5, 1)


def test_region_ownership_is_open_interval():
    r = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
    assert r.owns((0,), 0.5)
    assert not r.owns((0,), 0.0)
    assert not r.owns((0,), 1.0)
    assert not r.owns((1,), 0.5)


def test_schedule_rejects_overlap():
    ins = instr.identity_instrument(2)
    with pytest.raises(ValueError, match="overlap"):
        exp.MeasurementSchedule((
            exp.ScheduleEntry(0.5, ((0,), (1,)), ins),
            exp.ScheduleEntry(0.5, ((1,),), ins),
        ))


def test_schedule_owner_straddle_rejected():
    l = chain(3)
    r = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
    zz_ins = instr.identity_instrument(4)
    sched = exp.MeasurementSchedule((exp.ScheduleEntry(0.5, ((0,), (1,)), zz_ins),))
    with pytest.raises(ValueError, match="straddle"):
        sched.owner_of(sched.entries[0], r)


def test_area_law_bound_fixture():
    # 1-D: X=2, T_tot=3, |dSigma|=2, C ||h|| log2 d = 1 -> |dA| = 10
    geo = exp.RegionGeometry(2, 2, 3.0, 2)
    p = exp.AreaLawParams(c_const=1.0, c_sie=1.0, h_norm=1.0, d=2, geometry=geo)
    assert exp.area_law_bound(p) == pytest.approx(10.0)
    assert exp.area_law_bound_1d(p) == pytest.approx(10.0)


def test_area_law_bound_zero_duration_limit():
    geo = exp.RegionGeometry(3, 2, 0.0, 3)
    p = exp.AreaLawParams(1.0, 1.0, 1.0, 2, geo)
    assert exp.area_law_bound(p) == pytest.approx(6.0)  # 2|Sigma| term only


def test_area_law_bound_2d_block():
    # 2x2 block with |dSigma|=4, T_tot=1: 8 + 4 = 12
    geo = exp.RegionGeometry(4, 4, 1.0, 4)
    p = exp.AreaLawParams(1.0, 1.0, 1.0, 2, geo)
    assert exp.area_law_bound(p) == pytest.approx(12.0)


def test_sie_step_bound_fixture():
    l = chain(6)
    h = lat.ising(l, 1.0)
    split = lat.region_split(l, [(2,), (3,)], 1)
    geo = exp.RegionGeometry(2, 2, 0.1, 2)
    p = exp.AreaLawParams(c_const=2.0, c_sie=1.0, h_norm=1.0, d=2, geometry=geo)
    # c dt M (n-1) ||h|| log2 d = 1 * 0.1 * 2 * 1 * 1 * 1
    assert exp.sie_step_bound(h, split, 0.1, p) == pytest.approx(0.2)
    assert exp.sie_step_bound(h, split, 0.0, p) == 0.0


# ---------------------------------------------------------------------------
# running experiments
# ---------------------------------------------------------------------------


def test_trivial_run_stays_product():
    l = chain(3)
    h = lat.LocalHamiltonian(l, (), 1)
    region = exp.SpacetimeRegion(((1,),), 0.0, 1.0, 2)
    sched = exp.uniform_schedule(l, region, instr.identity_instrument(2))
    psi0 = qcore.zero_state(l.space())
    res = exp.run_experiment(psi0, h, sched, region)
    assert exp.alice_mutual_information(res) == pytest.approx(0.0, abs=1e-12)


def test_bell_swap_two_bits():
    l = chain(2)
    h = lat.LocalHamiltonian(l, (), 1)
    region = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
    sched = exp.uniform_schedule(l, region, instr.swap_with_ancilla(2))
    psi0 = qcore.bell_state(l.space())
    res = exp.run_experiment(psi0, h, sched, region)
    mi = exp.alice_mutual_information(res)
    assert mi == pytest.approx(2.0, abs=1e-9)  # = 2 |Sigma| log2 d


def test_tracking_mode_invariance():
    # Bob measures too; S_A identical whether his ancillas are kept or traced
    l = chain(3)
    h = lat.heisenberg(l, 0.8)
    region = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 2)
    bob = [(0.75, (2,), instr.projective_z(2)), (1.25, (1,), instr.projective_x(2))]
    sched = exp.uniform_schedule(l, region, random_alice(5), bob)
    psi0 = qcore.random_pure_state(np.random.default_rng(1), l.space())
    mis = []
    for track in ("alice_only", "alice_and_bob"):
        res = exp.run_experiment(psi0, h, sched, region, track=track)
        mis.append(exp.alice_mutual_information(res))
    assert abs(mis[0] - mis[1]) < 1e-9


def test_bound_holds_on_seeded_runs():
    l = chain(4)
    h = lat.ising(l, 1.0)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 0.6, 2)
    params = params_for(h, region)
    bound = exp.area_law_bound(params)
    for seed in range(5):
        sched = exp.uniform_schedule(l, region, random_alice(seed))
        psi0 = qcore.random_pure_state(np.random.default_rng(seed), l.space())
        res = exp.run_experiment(psi0, h, sched, region)
        assert exp.alice_mutual_information(res) <= bound + 1e-9


def test_trivial_caps():
    l = chain(4)
    h = lat.heisenberg(l, 1.0)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 0.8, 2)
    sched = exp.uniform_schedule(l, region, random_alice(11))
    psi0 = qcore.random_pure_state(np.random.default_rng(2), l.space())
    res = exp.run_experiment(psi0, h, sched, region)
    mi = exp.alice_mutual_information(res)
    assert mi <= 2 * region.x * region.t_steps * math.log2(2) + 1e-9


def test_dim_cap_enforced():
    l = chain(4)
    h = lat.ising(l)
    region = exp.SpacetimeRegion(((0,), (1,), (2,), (3,)), 0.0, 1.0, 2)
    sched = exp.uniform_schedule(l, region, random_alice(0))
    psi0 = qcore.zero_state(l.space())
    with pytest.raises(lat.DimensionCapError):
        exp.run_experiment(psi0, h, sched, region, dim_cap=64)


def test_same_time_disjoint_reordering():
    l = chain(4)
    h = lat.ising(l, 0.5)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 0.5, 1)
    t = region.step_times()[0]
    a1 = instr.random_isometry_instrument(np.random.default_rng(3), 2, 2)
    a2 = instr.random_isometry_instrument(np.random.default_rng(4), 2, 2)
    psi0 = qcore.random_pure_state(np.random.default_rng(5), l.space())
    orders = []
    for entries in (((t, ((1,),), a1), (t, ((2,),), a2)),
                    ((t, ((2,),), a2), (t, ((1,),), a1))):
        sched = exp.MeasurementSchedule(tuple(exp.ScheduleEntry(tt, ss, ii)
                                              for tt, ss, ii in entries))
        res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")
        # order ancilla factors by the (time, sites) they were attached to
        anc = sorted(res.ancillas, key=lambda r: (r.entry.time, r.entry.sites))
        labels = sorted(l.site_label(s) for s in l.sites()) + [r.label for r in anc]
        orders.append(qcore.vector_permuted(res.state.space, res.state.amplitudes,
                                            labels).reshape(-1))
    assert np.linalg.norm(orders[0] - orders[1]) < 1e-10


def test_monotone_t_sweep():
    l = chain(4)
    h = lat.ising(l, 1.0)
    dt = 0.3
    bounds, mis = [], []
    for steps in (1, 2, 3):
        region = exp.SpacetimeRegion(((1,), (2,)), 0.0, steps * dt, steps)
        params = params_for(h, region)
        sched = exp.uniform_schedule(l, region, random_alice(8))
        psi0 = qcore.random_pure_state(np.random.default_rng(8), l.space())
        res = exp.run_experiment(psi0, h, sched, region)
        mis.append(exp.alice_mutual_information(res))
        bounds.append(exp.area_law_bound(params))
    slope = params_for(h, exp.SpacetimeRegion(((1,), (2,)), 0.0, dt, 1))
    expected_slope = slope.c_const * slope.h_norm * slope.geometry.boundary_size * dt
    for b1, b2 in zip(bounds, bounds[1:]):
        assert b2 - b1 == pytest.approx(expected_slope, rel=1e-9)
    assert all(m <= b + 1e-9 for m, b in zip(mis, bounds))


# ---------------------------------------------------------------------------
# entropy steps and the chain report
# ---------------------------------------------------------------------------


def test_measure_entropy_step_no_crossing_terms():
    l = chain(4)
    zz = np.kron(qcore.PAULI_Z, qcore.PAULI_X)
    h = lat.LocalHamiltonian(l, (
        lat.LatticeTerm(((0,), (1,)), zz),
        lat.LatticeTerm(((2,), (3,)), zz),
    ), 1)
    split = lat.region_split(l, [(0,), (1,)], 1)
    assert len(lat.boundary_terms(h, split)) == 0
    psi0 = qcore.random_pure_state(np.random.default_rng(0), l.space())
    step = exp.measure_entropy_step(psi0, h, split, 0.4)
    assert abs(step.delta) < 1e-9


def test_measure_entropy_step_rate_bounded():
    l = chain(4)
    rng = np.random.default_rng(9)
    for _ in range(10):
        h = lat.random_local(l, 1, 1.0, rng)
        split = lat.region_split(l, [(0,), (1,)], 1)
        psi0 = qcore.random_pure_state(rng, l.space())
        dt = 1e-3
        step = exp.measure_entropy_step(psi0, h, split, dt)
        geo = exp.RegionGeometry(2, len(split.boundary), dt, 2)
        p = exp.AreaLawParams.from_sie(18.0, h.max_support_size,
                                       lat.strength_norm(h), 2, geo)
        assert abs(step.delta) <= exp.sie_step_bound(h, split, dt, p) + 1e-9


def test_entropy_step_chaining():
    l = chain(4)
    h = lat.heisenberg(l, 1.0)
    split = lat.region_split(l, [(1,), (2,)], 1)
    geo = exp.RegionGeometry(2, 2, 1.0, 2)
    p = exp.AreaLawParams.from_sie(18.0, 2, 1.0, 2, geo)
    dt = 0.05
    state = qcore.random_pure_state(np.random.default_rng(4), l.space())
    bound_step = exp.sie_step_bound(h, split, dt, p)
    comp = [l.site_label(s) for s in sorted(split.complement)]
    s0 = qcore.vector_entropy(state.space, state.amplitudes, comp)
    u = lat.evolution_unitary(h, dt).entries
    vec = state.amplitudes
    for k in range(1, 6):
        vec = qcore.vector_apply(state.space, vec, u, list(state.space.labels))
        s_k = qcore.vector_entropy(state.space, vec, comp)
        assert s_k <= s0 + k * bound_step + 1e-9


def chain_run(seed=3, steps=2, h_builder=None):
    l = chain(4)
    h = h_builder(l) if h_builder else lat.ising(l, 1.0)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 0.4 * steps, steps)
    sched = exp.uniform_schedule(l, region, random_alice(seed))
    psi0 = qcore.random_pure_state(np.random.default_rng(seed), l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob",
                             record_chain=True)
    return res, h, params_for(h, region)


def test_chain_report_all_hold():
    res, h, params = chain_run()
    report = exp.entropy_chain_report(res, h, params)
    assert report.ok
    names = [c.name for c in report.checks]
    assert "product_start" in names
    assert "chained_total" in names
    assert "entropy_triangle" in names
    assert "assembly" in names
    assert any(n.startswith("step_rate") for n in names)
    for c in report.checks:
        if c.margin is not None:
            assert c.margin >= -1e-9


def test_chain_report_zero_hamiltonian():
    res, h, params = chain_run(h_builder=lambda l: lat.LocalHamiltonian(l, (), 1))
    report = exp.entropy_chain_report(res, h, params)
    assert report.ok
    # no evolution events at all: S_A is capped by the spin entropy terms alone
    assembly = [c for c in report.checks if c.name == "assembly"][0]
    assert assembly.ok


def test_chain_report_flags_corrupted_snapshot():
    res, h, params = chain_run()
    events = list(res.events)
    # corrupt an instrument snapshot: instruments must preserve the complement
    # spectrum exactly, so any entangling tampering is flagged
    idx = next(i for i, e in enumerate(events)
               if e.kind == "instrument" and e.owner == "alice")
    bad = events[idx].post.snapshot()
    rng = np.random.default_rng(0)
    g = qcore.haar_isometry(rng, bad.space.total_dim, bad.space.total_dim)
    bad.vec = g @ bad.vec  # scrambles entropies across every cut
    events[idx] = dataclasses.replace(events[idx], post=bad)
    doctored = dataclasses.replace(res, events=tuple(events))
    report = exp.entropy_chain_report(doctored, h, params)
    assert not report.ok


def test_chain_report_requires_recording():
    l = chain(3)
    h = lat.ising(l)
    region = exp.SpacetimeRegion(((1,),), 0.0, 0.4, 1)
    sched = exp.uniform_schedule(l, region, random_alice(0))
    res = exp.run_experiment(qcore.zero_state(l.space()), h, sched, region)
    with pytest.raises(ValueError, match="record_chain"):
        exp.entropy_chain_report(res, h, params_for(h, region))


def test_non_uniform_time_gaps():
    # arbitrary increasing measurement times; the chain charges actual gaps
    l = chain(4)
    h = lat.ising(l, 1.0)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 1.0, 2)
    a1 = instr.random_isometry_instrument(np.random.default_rng(1), 2, 2)
    a2 = instr.random_isometry_instrument(np.random.default_rng(2), 2, 2)
    sched = exp.MeasurementSchedule((
        exp.ScheduleEntry(0.13, ((1,),), a1),
        exp.ScheduleEntry(0.13, ((2,),), a2),
        exp.ScheduleEntry(0.81, ((1,),), a2),
        exp.ScheduleEntry(0.81, ((2,),), a1),
    ))
    psi0 = qcore.random_pure_state(np.random.default_rng(3), l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob",
                             record_chain=True)
    params = params_for(h, region)
    rep = exp.entropy_chain_report(res, h, params)
    assert rep.ok
    mi = exp.alice_mutual_information(res)
    assert mi <= exp.area_law_bound(params) + 1e-9


def test_two_dimensional_lattice_run():
    l = lat.LatticeSpec(2, (2, 2), 2)
    h = lat.random_local(l, 1, 0.8, np.random.default_rng(6))
    region = exp.SpacetimeRegion(((0, 0),), 0.0, 0.6, 2)
    sched = exp.uniform_schedule(l, region, random_alice(6))
    psi0 = qcore.random_pure_state(np.random.default_rng(7), l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob",
                             record_chain=True)
    mi = exp.alice_mutual_information(res)
    split = lat.region_split(l, region.sigma, h.interaction_range)
    geo = exp.RegionGeometry(1, len(split.boundary), region.t_tot, 1)
    params = exp.AreaLawParams.from_sie(18.0, h.max_support_size,
                                        lat.strength_norm(h), 2, geo)
    assert mi <= exp.area_law_bound(params) + 1e-9
    assert exp.entropy_chain_report(res, h, params).ok


def _dilation_unitary(pur):
    """Unitary on (site (x) ancilla) acting as the isometry on the |0> sector."""
    d_in = pur.input_space.total_dim
    anc = pur.ancilla_dim
    dim = d_in * anc
    u = np.zeros((dim, dim), dtype=complex)
    for i in range(d_in):
        u[:, i * anc] = pur.isometry[:, i]  # input (site=i, anc=0)
    # complete the remaining columns to an orthonormal basis
    rng = np.random.default_rng(0)
    rest = rng.normal(size=(dim, dim - d_in)) + 1j * rng.normal(size=(dim, dim - d_in))
    basis = u[:, [i * anc for i in range(d_in)]]
    rest = rest - basis @ (basis.conj().T @ rest)
    q, _ = np.linalg.qr(rest)
    free = [c for c in range(dim) if c not in [i * anc for i in range(d_in)]]
    for k, c in enumerate(free):
        u[:, c] = q[:, k]
    assert np.linalg.norm(u @ u.conj().T - np.eye(dim)) < 1e-10
    return u


def test_engine_matches_dense_circuit_oracle():
    # independent path: allocate every ancilla upfront in |0>, apply dilated
    # instrument unitaries and evolution on the fixed full space, and compare
    l = chain(2)
    h = lat.ising(l, 0.9)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    t_a = region.step_times()[0]
    ins_a = instr.random_isometry_instrument(np.random.default_rng(1), 2, 2)
    ins_b = instr.projective_x(2)
    sched = exp.MeasurementSchedule((
        exp.ScheduleEntry(t_a, ((0,),), ins_a),
        exp.ScheduleEntry(0.8, ((1,),), ins_b),
    ))
    psi0 = qcore.random_pure_state(np.random.default_rng(2), l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")

    pur_a, pur_b = instr.purify(ins_a), instr.purify(ins_b)
    full = qcore.space(("s0", 2), ("s1", 2),
                       ("anc0", pur_a.ancilla_dim), ("anc1", pur_b.ancilla_dim))
    vec = np.kron(psi0.amplitudes,
                  qcore.zero_state(qcore.space(("anc0", pur_a.ancilla_dim),
                                               ("anc1", pur_b.ancilla_dim))).amplitudes)
    u_gap1 = lat.evolution_unitary(h, t_a).entries
    vec = qcore.vector_apply(full, vec, u_gap1, ["s0", "s1"])
    vec = qcore.vector_apply(full, vec, _dilation_unitary(pur_a), ["s0", "anc0"])
    u_gap2 = lat.evolution_unitary(h, 0.8 - t_a).entries
    vec = qcore.vector_apply(full, vec, u_gap2, ["s0", "s1"])
    vec = qcore.vector_apply(full, vec, _dilation_unitary(pur_b), ["s1", "anc1"])

    got = qcore.vector_permuted(res.state.space, res.state.amplitudes,
                                list(full.labels)).reshape(-1)
    assert np.linalg.norm(got - vec) < 1e-10


def test_mixed_initial_state_run():
    # a mixed rho0 runs on the density-matrix path; the purification argument
    # still bounds I via the pure-state value of any purifying extension
    l = chain(3)
    h = lat.ising(l, 0.8)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    sched = exp.uniform_schedule(l, region, instr.swap_with_ancilla(2))
    rho0 = qcore.random_density_matrix(np.random.default_rng(9), l.space(), rank=2)
    res = exp.run_experiment(rho0, h, sched, region, track="alice_and_bob")
    assert isinstance(res.state, qcore.DensityMatrix)
    mi = exp.alice_mutual_information(res)
    assert 0.0 <= mi <= 2.0 + 1e-9  # 2 log2(ancilla dim)


def test_qutrit_sites_run():
    l = lat.LatticeSpec(1, (2,), 3)
    h = lat.random_local(l, 1, 0.5, np.random.default_rng(4))
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    sched = exp.uniform_schedule(
        l, region,
        lambda site, step: instr.random_isometry_instrument(
            qcore.stream_rng(4, site[0], step), 3, 2))
    psi0 = qcore.random_pure_state(np.random.default_rng(5), l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")
    mi = exp.alice_mutual_information(res)
    split = lat.region_split(l, region.sigma, 1)
    geo = exp.RegionGeometry(1, len(split.boundary), region.t_tot, 1)
    params = exp.AreaLawParams.from_sie(18.0, h.max_support_size,
                                        lat.strength_norm(h), 3, geo)
    assert mi <= exp.area_law_bound(params) + 1e-9


def test_dimension_changing_instrument_rejected():
    l = chain(2)
    h = lat.LocalHamiltonian(l, (), 1)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    # a valid instrument from a qubit to a qutrit cannot be bound to a site
    in_spc, out_spc = qcore.space(("in", 2)), qcore.space(("out", 3))
    iso = qcore.haar_isometry(np.random.default_rng(0), 2, 3)
    from arealaw.processmatrix import choi_from_kraus
    grow = instr.Instrument(in_spc, out_spc,
                            ((0, choi_from_kraus([iso], in_spc, out_spc)),))
    sched = exp.uniform_schedule(l, region, grow)
    with pytest.raises(ValueError, match="system dimension"):
        exp.run_experiment(qcore.zero_state(l.space()), h, sched, region)


def test_two_dimensional_bound_sweep():
    # the general-form bound 2|Sigma| + T|dSigma| on randomized 2-D regions
    for seed in range(20):
        rng = qcore.stream_rng(555, seed)
        ny = int(rng.integers(2, 4))
        l = lat.LatticeSpec(2, (2, ny), 2)
        h = lat.scaled_to(lat.random_local(l, 1, 1.0, rng), float(rng.uniform(0.2, 1.0)))
        sites = l.sites()
        x = int(rng.integers(1, 3))
        sigma = tuple(sites[i] for i in rng.choice(len(sites), size=x, replace=False))
        t_steps = int(rng.integers(1, 3))
        region = exp.SpacetimeRegion(sigma, 0.0, 0.3 * t_steps, t_steps)

        def alice(site, step, seed=seed):
            return instr.random_isometry_instrument(
                qcore.stream_rng(555, seed, sites.index(tuple(site)) + 1, step), 2, 2)

        sched = exp.uniform_schedule(l, region, alice)
        psi0 = qcore.random_pure_state(rng, l.space())
        res = exp.run_experiment(psi0, h, sched, region)
        mi = exp.alice_mutual_information(res)
        split = lat.region_split(l, sigma, h.interaction_range)
        geo = exp.RegionGeometry(x, len(split.boundary), region.t_tot, x)
        params = exp.AreaLawParams.from_sie(18.0, h.max_support_size,
                                            lat.strength_norm(h), 2, geo)
        assert mi <= exp.area_law_bound(params) + 1e-9


def test_collective_instrument_run():
    # one two-site collective instrument on Alice's pair
    l = chain(4)
    h = lat.heisenberg(l, 0.7)
    region = exp.SpacetimeRegion(((1,), (2,)), 0.0, 0.5, 1)
    t = region.step_times()[0]
    rng = np.random.default_rng(12)
    collective = instr.random_isometry_instrument(rng, 4, 2)
    sched = exp.MeasurementSchedule((exp.ScheduleEntry(t, ((1,), (2,)), collective),))
    psi0 = qcore.random_pure_state(rng, l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob",
                             record_chain=True)
    assert sched.owner_of(sched.entries[0], region) == "alice"
    params = params_for(h, region)
    assert exp.alice_mutual_information(res) <= exp.area_law_bound(params) + 1e-9
    assert exp.entropy_chain_report(res, h, params).ok


# ---------------------------------------------------------------------------
# outcome statistics
# ---------------------------------------------------------------------------


def test_outcome_correlations_identity_instruments():
    l = chain(2)
    h = lat.ising(l, 0.5)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    sched = exp.uniform_schedule(l, region, instr.identity_instrument(2),
                                 [(0.75, (1,), instr.identity_instrument(2))])
    psi0 = qcore.bell_state(l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")
    _, mi = exp.outcome_correlations(res)
    assert mi == pytest.approx(0.0, abs=1e-10)


def test_outcome_correlations_bell_measurements():
    l = chain(2)
    h = lat.LocalHamiltonian(l, (), 1)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    sched = exp.uniform_schedule(l, region, instr.projective_z(2),
                                 [(0.75, (1,), instr.projective_z(2))])
    psi0 = qcore.bell_state(l.space())
    res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")
    joint, mi = exp.outcome_correlations(res)
    assert mi == pytest.approx(1.0, abs=1e-9)
    quantum = exp.alice_mutual_information(res)
    assert quantum == pytest.approx(2.0, abs=1e-9)
    assert mi <= quantum + 1e-9


def test_outcome_correlations_require_full_tracking():
    l = chain(2)
    h = lat.LocalHamiltonian(l, (), 1)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.5, 1)
    sched = exp.uniform_schedule(l, region, instr.projective_z(2),
                                 [(0.75, (1,), instr.projective_z(2))])
    res = exp.run_experiment(qcore.bell_state(l.space()), h, sched, region,
                             track="alice_only")
    with pytest.raises(ValueError, match="alice_and_bob"):
        exp.outcome_correlations(res)


def test_classical_mi_below_quantum_seeded():
    l = chain(3)
    h = lat.heisenberg(l, 1.0)
    region = exp.SpacetimeRegion(((0,),), 0.0, 0.8, 2)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        sched = exp.uniform_schedule(
            l, region, lambda site, step: random_cptp_instrument(
                qcore.stream_rng(seed, site[0], step), 2, 2),
            [(1.0, (2,), random_cptp_instrument(rng, 2, 2))])
        psi0 = qcore.random_pure_state(rng, l.space())
        res = exp.run_experiment(psi0, h, sched, region, track="alice_and_bob")
        _, classical = exp.outcome_correlations(res)
        quantum = exp.alice_mutual_information(res)
        assert classical <= quantum + 1e-9


# ---------------------------------------------------------------------------
# signaling
# ---------------------------------------------------------------------------


def signaling_setup(h_builder, bob_time=2.0, coupling=1.0):
    l = chain(3)
    h = h_builder(l)
    region = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
    sched = exp.uniform_schedule(l, region, instr.identity_instrument(2),
                                 [(bob_time, (2,), instr.projective_z(2))])
    t0 = region.step_times()[0]
    setting = instr.SettingDistribution((("flip", 0.5), ("stay", 0.5)))
    controlled = {(t0, ((0,),)): {"flip": instr.unitary_instrument(qcore.PAULI_X),
                                  "stay": instr.identity_instrument(2)}}
    psi0 = qcore.zero_state(l.space())
    params = exp.AreaLawParams.from_sie(18.0, 2, max(lat.strength_norm(h), 0.1), 2,
                                        exp.RegionGeometry(1, 1, 1.0, 1))
    return psi0, h, region, sched, controlled, setting, params


def test_signaling_no_hamiltonian_no_signal():
    args = signaling_setup(lambda l: lat.LocalHamiltonian(l, (), 1))
    report = exp.signaling_capacity_bound(*args)
    assert report.mutual_information_bits == pytest.approx(0.0, abs=1e-10)
    assert report.ok


def test_signaling_identical_settings_no_signal():
    l = chain(3)
    h = lat.heisenberg(l, 1.0)
    region = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
    sched = exp.uniform_schedule(l, region, instr.identity_instrument(2),
                                 [(2.0, (2,), instr.projective_z(2))])
    t0 = region.step_times()[0]
    setting = instr.SettingDistribution((("a", 0.5), ("b", 0.5)))
    controlled = {(t0, ((0,),)): {"a": instr.identity_instrument(2),
                                  "b": instr.identity_instrument(2)}}
    params = exp.AreaLawParams.from_sie(18.0, 2, 1.0, 2, exp.RegionGeometry(1, 1, 1.0, 1))
    report = exp.signaling_capacity_bound(qcore.zero_state(l.space()), h, region,
                                          sched, controlled, setting, params)
    assert report.mutual_information_bits == pytest.approx(0.0, abs=1e-10)


def test_signaling_strong_coupling_transmits():
    report = exp.signaling_capacity_bound(
        *signaling_setup(lambda l: lat.heisenberg(l, 1.0)))
    assert report.mutual_information_bits > 0.05
    assert report.ok
    assert "does not depend" in report.note


def test_signaling_bound_holds_seeded():
    for seed in range(10):
        l = chain(3)
        h = lat.scaled_to(lat.random_local(l, 1, 1.0, np.random.default_rng(seed)), 1.0)
        region = exp.SpacetimeRegion(((0,),), 0.0, 1.0, 1)
        sched = exp.uniform_schedule(l, region, instr.identity_instrument(2),
                                     [(1.8, (2,), instr.projective_z(2))])
        t0 = region.step_times()[0]
        setting = instr.SettingDistribution((("flip", 0.3), ("stay", 0.7)))
        controlled = {(t0, ((0,),)): {"flip": instr.unitary_instrument(qcore.PAULI_X),
                                      "stay": instr.identity_instrument(2)}}
        params = exp.AreaLawParams.from_sie(18.0, h.max_support_size,
                                            lat.strength_norm(h), 2,
                                            exp.RegionGeometry(1, 1, 1.0, 1))
        report = exp.signaling_capacity_bound(
            qcore.random_pure_state(np.random.default_rng(seed + 100), l.space()),
            h, region, sched, controlled, setting, params)
        assert report.ok
