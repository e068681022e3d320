import numpy as np
import pytest

from arealaw import qcore


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_cptp_instrument(rng, d=2, branches=2, kraus_per_branch=1):
    """Random complete instrument with the given branch structure."""
    from arealaw import instruments as instr
    from arealaw.processmatrix import choi_from_kraus

    env = branches * kraus_per_branch
    iso = qcore.haar_isometry(rng, d, d * env).reshape(d, env, d)
    in_spc, out_spc = qcore.space(("in", d)), qcore.space(("out", d))
    out = []
    for b in range(branches):
        ks = [iso[:, b * kraus_per_branch + j, :] for j in range(kraus_per_branch)]
        out.append((b, choi_from_kraus(ks, in_spc, out_spc)))
    return instr.Instrument(in_spc, out_spc, tuple(out))


def sequential_outcome_oracle(spc, rho, steps):
    """Brute-force sequential statistics: apply branch maps one at a time.

    `steps` is a list of ("evolve", matrix, labels) or ("measure", instrument,
    labels) items; returns a dict mapping outcome tuples to probabilities.
    """
    results = {}

    def rec(mat, i, prefix, prob):
        if i == len(steps):
            results[prefix] = results.get(prefix, 0.0) + prob
            return
        kind = steps[i][0]
        if kind == "evolve":
            _, u, labels = steps[i]
            rec(qcore.dm_apply(spc, mat, u, labels), i + 1, prefix, prob)
            return
        _, ins, labels = steps[i]
        for lab in ins.outcome_labels():
            ks = ins.branch(lab).kraus()
            out = qcore.dm_apply_kraus(spc, mat, ks, labels)
            p = float(np.trace(out).real)
            if p > 1e-13:
                rec(out / p, i + 1, prefix + (lab,), prob * p)

    rec(rho, 0, (), 1.0)
    return results
