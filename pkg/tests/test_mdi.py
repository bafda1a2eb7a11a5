import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from mdiew import mdi, states, witness
from mdiew.states import ancilla

R3 = math.sqrt(3)
v_sym = sp.symbols("v", real=True)


# ---- symbolic oracle: 16x16 construction in sympy --------------------------

def _sym_ancilla(label):
    s3 = 1 / sp.sqrt(3)
    bloch = {
        "0": (0, 0, 0), "1": (1, 0, 0), "2": (0, 1, 0), "3": (0, 0, 1),
        "4": (s3, s3, s3), "4'": (-s3, -s3, s3),
    }[label]
    x, y, z = bloch
    return sp.Matrix([[1 + z, x - sp.I * y], [x + sp.I * y, 1 - z]]) / 2


def _sym_rho():
    psi = sp.Matrix([0, 1, -1, 0]) / sp.sqrt(2)
    return (1 - v_sym) * psi * psi.T + v_sym / 2 * sp.diag(1, 0, 0, 1)


def _sym_phi(sign):
    k = sp.Matrix([1, 0, 0, sign]) / sp.sqrt(2)
    return k * k.T


def sym_probability(s, t, outcome):
    from sympy.physics.quantum import TensorProduct as TP

    x = TP(TP(_sym_ancilla(s), _sym_rho()), _sym_ancilla(t))
    m = TP(_sym_phi(1 if outcome[0] == "+" else -1), _sym_phi(1 if outcome[1] == "+" else -1))
    return sp.nsimplify(sp.simplify((m * x).trace()))


SYM_CASES = [(s, t, c) for s, t in states.all_settings() for c in ("++", "+-")]


@pytest.fixture(scope="module")
def sym_table():
    return {case: sym_probability(*case) for case in SYM_CASES}


def test_bsm_probability_matches_symbolic_oracle(sym_table):
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        rho = states.rho_v(v)
        for (s, t, c), expr in sym_table.items():
            want = float(expr.subs(v_sym, v))
            assert abs(mdi.bsm_probability(rho, ancilla(s), ancilla(t), c) - want) < 1e-12


def test_bsm_probability_closed_forms(sym_table):
    assert sym_table[("0", "0", "++")] == sp.Rational(1, 16)
    assert sp.simplify(sym_table[("3", "3", "++")] - v_sym / 8) == 0
    assert sp.simplify(sym_table[("1", "1", "+-")] - (2 - v_sym) / 16) == 0
    assert sym_table[("0", "4", "++")] == sp.Rational(1, 16)


def test_probability_is_quarter_trace_with_basis_operator(rng):
    for _ in range(20):
        rho = states.TwoQubitState(states.random_density_matrix(rng))
        for s, t in states.all_settings():
            for c in mdi.OUTCOME_CLASSES:
                op = mdi.basis_operator(ancilla(s), ancilla(t), c)
                want = 0.25 * np.trace(op @ rho.matrix).real
                assert abs(mdi.bsm_probability(rho, ancilla(s), ancilla(t), c) - want) < 1e-12


def test_outcomes_complete(rng):
    povm = mdi.bell_povm()
    assert np.allclose(sum(povm.values()), np.eye(4))
    for _ in range(10):
        rho = states.TwoQubitState(states.random_density_matrix(rng))
        for s, t in states.all_settings():
            p = mdi.outcome_probabilities(rho, ancilla(s), ancilla(t))
            assert len(p) == 16
            assert abs(sum(p.values()) - 1) < 1e-12
            assert abs(p[("+", "-")] - mdi.bsm_probability(rho, ancilla(s), ancilla(t), ("+", "-"))) < 1e-14


def test_class_of():
    assert mdi.class_of("++") == mdi.class_of("--") == states.SAME_SIGN
    assert mdi.class_of("+-") == mdi.class_of("-+") == states.MIXED_SIGN
    with pytest.raises(ValueError):
        mdi.class_of("+0")


# ---- coefficient tables ----------------------------------------------------

def test_solve_beta_recovers_sparse_tables():
    solved = mdi.solved_tables()
    ref = mdi.reference_tables()
    for c in mdi.OUTCOME_CLASSES:
        for key in set(solved[c].beta) | set(ref[c].beta):
            assert abs(solved[c].get(*key) - ref[c].get(*key)) < 1e-10
    assert abs(ref["++"].get("0", "0") - (2 * R3 - 2)) < 1e-15
    assert abs(ref["+-"].get("0", "0") - (2 * R3 + 2)) < 1e-15
    assert ref["+-"].get("1", "1") == ref["+-"].get("2", "2") == -1


@pytest.mark.parametrize("sparse", [True, False])
def test_tables_reconstruct_witness(sparse):
    tables = mdi.reference_tables(sparse)
    for c in mdi.OUTCOME_CLASSES:
        assert tables[c].residual() < 1e-10
    assert tables["++"].beta == tables["--"].beta
    assert tables["+-"].beta == tables["-+"].beta


def test_solve_beta_zero_operator():
    basis = states.ancilla_set(states.SAME_SIGN)
    table = mdi.solve_beta(np.zeros((4, 4)), basis, "++")
    assert all(abs(b) < 1e-15 for b in table.beta.values())


def test_solve_beta_over_complete_basis_still_expresses_w():
    labels = ["0", "1", "2", "3", "4"]
    basis = [(ancilla(s), ancilla(t)) for s in labels for t in labels]
    table = mdi.solve_beta(witness.W, basis, "++")
    assert table.residual() < 1e-10


def test_solve_beta_rejects_deficient_basis():
    basis = [(ancilla("0"), ancilla("0")), (ancilla("3"), ancilla("3"))]
    with pytest.raises(mdi.BasisError) as err:
        mdi.solve_beta(witness.W, basis, "++")
    assert err.value.residual > 1e-10


def test_table_serialisation_round_trip():
    tables = mdi.reference_tables()
    text = mdi.write_tables(tables)
    assert text.splitlines()[0] == "class,s,t,beta"
    back = mdi.read_tables(text)
    for c in mdi.OUTCOME_CLASSES:
        assert back[c].beta == tables[c].beta
    with pytest.raises(ValueError):
        mdi.read_tables("a,b\n1,2\n")


# ---- J values ---------------------------------------------------------------

@pytest.mark.parametrize("v,want", [(0, -0.125), (0.5, 0.0), (1, 0.125)])
def test_j_value_exact_examples(v, want):
    assert abs(mdi.j_value_exact(states.rho_v(v)).j_value - want) < 1e-12


def test_single_class_is_quarter_witness(rng):
    for _ in range(100):
        rho = states.TwoQubitState(states.random_density_matrix(rng))
        quarter = witness.witness_value_exact(rho) / 4
        for sparse in (True, False):
            tables = mdi.reference_tables(sparse)
            for c in mdi.OUTCOME_CLASSES:
                res = mdi.j_value_exact(rho, tables, combined=False, outcome=c)
                assert abs(res.j_value - quarter) < 1e-12


def test_result_is_sum_of_contributions():
    res = mdi.j_value_exact(states.rho_v(0.3))
    assert abs(res.j_value - 0.25 * sum(res.contributions.values())) < 1e-12
    assert set(res.per_class) == set(mdi.OUTCOME_CLASSES)


def test_single_class_needs_outcome():
    with pytest.raises(ValueError):
        mdi.j_value_exact(states.rho_v(0.3), combined=False)


def test_counts_deterministic_and_complete():
    rho = states.rho_v(0.2)
    a = mdi.simulate_counts(rho, states.all_settings(), 5000, seed=3)
    b = mdi.simulate_counts(rho, states.all_settings(), 5000, seed=3)
    assert {k: r.counts for k, r in a.items()} == {k: r.counts for k, r in b.items()}
    ra, rb = mdi.j_value_from_counts(a), mdi.j_value_from_counts(b)
    assert ra.j_value == rb.j_value and ra.stderr == rb.stderr
    for rec in a.values():
        assert sum(rec.counts.values()) < rec.trials


def test_missing_setting_is_named():
    recs = mdi.simulate_counts(states.rho_v(0.2), states.all_settings(), 100, seed=3)
    del recs[("0", "4'")]
    with pytest.raises(mdi.MissingSettingError) as err:
        mdi.j_value_from_counts(recs)
    assert "4'" in str(err.value)


def test_monte_carlo_singlet_within_four_se():
    recs = mdi.simulate_counts(states.rho_v(0), states.all_settings(), 10**6, seed=8)
    res = mdi.j_value_from_counts(recs)
    assert abs(res.j_value + 0.125) < 4 * res.stderr


def test_standard_error_matches_empirical_spread():
    rho = states.rho_v(0.6)
    root = np.random.SeedSequence(123)
    vals, ses = [], []
    for child in root.spawn(300):
        res = mdi.j_value_from_counts(mdi.simulate_counts(rho, states.all_settings(), 2000, child))
        vals.append(res.j_value)
        ses.append(res.stderr)
    ratio = np.std(vals, ddof=1) / np.mean(ses)
    # 300 samples: relative sd of the sample sd is about 4%
    assert 0.85 < ratio < 1.15


# ---- adversarial relay ------------------------------------------------------

def test_adversarial_with_honest_povm():
    povm = {"+": mdi.bell_povm()["+"], "-": mdi.bell_povm()["-"],
            mdi.DISCARD: mdi.bell_povm()["psi+"] + mdi.bell_povm()["psi-"]}
    res = mdi.j_value_adversarial(states.rho_v(0.75), povm, povm)
    assert abs(res.j_value - 0.0625) < 1e-12


def test_always_plus_relay_is_nonnegative(rng):
    povm = {"+": np.eye(4), "-": np.zeros((4, 4))}
    for _ in range(50):
        sigma = states.random_separable_state(rng)
        res = mdi.j_value_adversarial(sigma, povm, povm)
        assert res.j_value >= -1e-9
        assert res.per_class["++"] >= -1e-9


def test_invalid_povm_rejected():
    with pytest.raises(ValueError):
        mdi.j_value_adversarial(states.rho_v(1), {"+": np.eye(4) * 0.5}, {"+": np.eye(4)})
    with pytest.raises(ValueError):
        mdi.validate_povm({"+": np.diag([2, -1, 1, 1]), "-": np.zeros((4, 4))})
    with pytest.raises(ValueError):
        mdi.validate_povm({})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**63 - 1), st.booleans())
def test_mdi_guarantee_property(seed, projective):
    rng = np.random.default_rng(seed)
    sigma = states.random_separable_state(rng)
    ma = mdi.random_povm(rng, projective=projective)
    mb = mdi.random_povm(rng, projective=projective)
    mdi.validate_povm(ma)
    res = mdi.j_value_adversarial(sigma, ma, mb)
    assert res.j_value >= -1e-9
    assert min(res.per_class.values()) >= -1e-9


def test_entangled_state_can_be_detected_by_honest_relay():
    povm = {"+": mdi.bell_povm()["+"], "-": mdi.bell_povm()["-"],
            mdi.DISCARD: mdi.bell_povm()["psi+"] + mdi.bell_povm()["psi-"]}
    assert mdi.j_value_adversarial(states.rho_v(0), povm, povm).j_value < 0


def test_sweep_is_reproducible():
    a = mdi.adversarial_sweep(20, seed=4)
    b = mdi.adversarial_sweep(20, seed=4)
    assert a.j_combined == b.j_combined
    assert a.min_combined >= -1e-9 and a.min_single >= -1e-9
