import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from histlogic.errors import (
    CountMismatch,
    GridError,
    InconsistentFamily,
    NonHermitian,
    NonUnitaryStep,
    NotAProjector,
    TooLarge,
    ZeroWeightCondition,
)
from histlogic.framework import And, Not, Or
from histlogic.histories import (
    GeneralizedHistory,
    PropagatorSet,
    SimpleHistory,
    TimeGrid,
    Verdict,
    build_family,
    chain_operator_general,
    chain_operator_simple,
    conditional_probability,
    consistency_functional,
    families_compatible,
    history_projector,
    infer_histories,
    lift_history,
    propagators_explicit,
    propagators_from_hamiltonian,
    simple_history,
    weight,
)
from histlogic.linalg import identity, tensor
from histlogic.logic import Reason
from histlogic.models import build_spin_measurement_model, build_two_device_model
from qtools import random_commuting_projectors, random_hermitian, random_projector, random_unitary, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ_PLUS = np.diag([1.0, 0.0]).astype(complex)
SZ_MINUS = np.diag([0.0, 1.0]).astype(complex)


def _grid(n):
    return TimeGrid(tuple(float(t) for t in range(n)))


def _props(rng, d, n):
    return propagators_explicit(_grid(n), [random_unitary(rng, d) for _ in range(n - 1)], dim=d)


def _chain_oracle(a, props):
    """Matrix elements of the chain operator summed index by index."""
    d, n = props.dim, props.n
    back = props.backward_steps
    t = a.reshape((d,) * (2 * n))
    k = np.zeros((d, d), dtype=complex)
    for i, j in itertools.product(range(d), repeat=2):
        total = 0
        for ks in itertools.product(range(d), repeat=n - 1):
            for ls in itertools.product(range(d), repeat=n - 1):
                amp = t[(i, *ks, *ls, j)]
                for m in range(n - 1):
                    amp = amp * back[m][ls[m], ks[m]]
                total += amp
        k[i, j] = total
    return k


# -- grids and propagators ---------------------------------------------------

def test_time_grid():
    g = TimeGrid((0.0, 1.5, 2.0))
    assert g.labels == ("t1", "t2", "t3")
    assert g.index("t2") == 1 and g.index(2.0) == 2
    assert g.contains(TimeGrid((0.0, 2.0)))
    assert not g.contains(TimeGrid((0.0, 3.0)))
    with pytest.raises(GridError):
        TimeGrid((1.0, 1.0))
    with pytest.raises(GridError):
        TimeGrid(())
    with pytest.raises(GridError):
        g.index("t9")


def test_propagators_from_hamiltonian_examples():
    props = propagators_from_hamiltonian(np.zeros((2, 2)), _grid(3))
    assert all(np.allclose(u, identity(2)) for u in props.steps)
    single = propagators_from_hamiltonian(SX, TimeGrid((0.0,)))
    assert single.steps == () and np.allclose(single.T(0, 0), identity(2))
    props = propagators_from_hamiltonian(SX, TimeGrid((0.0, np.pi / 2)))
    assert np.allclose(props.steps[0], -1j * SX, atol=1e-12)
    with pytest.raises(NonHermitian):
        propagators_from_hamiltonian(np.array([[0, 1], [0, 0]]), _grid(2))


def test_propagators_explicit_examples():
    props = propagators_explicit(_grid(2), [identity(2)])
    assert np.allclose(props.T(0, 1), identity(2))
    with pytest.raises(NonUnitaryStep):
        propagators_explicit(_grid(2), [np.diag([1.0, 0.5])])
    with pytest.raises(CountMismatch):
        propagators_explicit(_grid(3), [identity(2)])


@given(seeds)
def test_composition_conventions(seed):
    rng = np.random.default_rng(seed)
    u, v = random_unitary(rng, 3), random_unitary(rng, 3)
    fwd = propagators_explicit(_grid(3), [u, v])
    assert np.allclose(fwd.T(2, 0), v @ u)
    assert np.allclose(fwd.T(0, 2), (v @ u).conj().T)
    back = propagators_explicit(_grid(3), [u, v], backward=True)
    assert np.allclose(back.T(0, 2), u @ v)
    for a, b, c in itertools.product(range(3), repeat=3):
        assert np.allclose(fwd.T(a, b) @ fwd.T(b, c), fwd.T(a, c))
    assert np.allclose(fwd.T(1, 1), identity(3))


# -- histories and chain operators ------------------------------------------

def test_lift_history_examples():
    p = random_projector(np.random.default_rng(1), 2, 1)
    small, big = TimeGrid((0.0,)), TimeGrid((0.0, 1.0))
    lifted = lift_history(SimpleHistory((p,)), small, big)
    assert np.allclose(lifted.projectors[0], p) and np.allclose(lifted.projectors[1], identity(2))
    same = lift_history(lifted, big, big)
    assert all(np.allclose(a, b) for a, b in zip(same.projectors, lifted.projectors))
    with pytest.raises(GridError):
        lift_history(SimpleHistory((p,)), TimeGrid((5.0,)), big)
    gen = GeneralizedHistory(tensor(p, identity(2)), 2, 2)
    with pytest.raises(GridError):
        lift_history(gen, big, TimeGrid((0.0, 1.0, 2.0)))


@given(seeds, st.integers(1, 3))
def test_weight_invariant_under_lift(seed, d):
    rng = np.random.default_rng(seed)
    coarse = TimeGrid((0.0, 2.0))
    fine = TimeGrid((0.0, 1.0, 2.0, 3.0))
    steps = [random_unitary(rng, d) for _ in range(3)]
    fine_props = propagators_explicit(fine, steps)
    coarse_props = propagators_explicit(coarse, [steps[1] @ steps[0]])
    h = SimpleHistory((random_projector(rng, d), random_projector(rng, d)))
    k_coarse = chain_operator_simple(h, coarse_props)
    k_fine = chain_operator_simple(lift_history(h, coarse, fine), fine_props)
    assert abs(np.vdot(k_coarse, k_coarse) - np.vdot(k_fine, k_fine)) <= 1e-9


def test_history_projector_examples():
    spin = build_spin_measurement_model()
    assert np.array_equal(history_projector(SimpleHistory((identity(2),) * 3)), identity(8))
    p = random_projector(np.random.default_rng(2), 3, 2)
    assert np.array_equal(history_projector(SimpleHistory((p,))), p)
    a, xp = spin.symbols["alpha"], spin.symbols["X+"]
    hp = history_projector(SimpleHistory((a, xp)))
    assert round(np.trace(hp).real) == round(np.trace(a).real) * round(np.trace(xp).real)


def test_chain_operator_simple_examples():
    rng = np.random.default_rng(3)
    props = _props(rng, 3, 3)
    assert np.allclose(chain_operator_simple(SimpleHistory((identity(3),) * 3), props), props.T(0, 2))
    p = random_projector(rng, 3)
    one = propagators_explicit(TimeGrid((0.0,)), [], dim=3)
    assert np.array_equal(chain_operator_simple(SimpleHistory((p,)), one), p)
    with pytest.raises(CountMismatch):
        chain_operator_simple(SimpleHistory((p, p)), one)

    spin = build_spin_measurement_model()
    s = spin.symbols
    h = spin.history({"t1": "gamma", "t2": "X+"})
    h = SimpleHistory((h.projectors[0] @ s["X"], *h.projectors[1:]))
    k = chain_operator_simple(h, spin.propagators)
    assert abs(np.vdot(k, k).real - 0.5) <= 1e-12


def test_chain_operator_general_examples():
    rng = np.random.default_rng(4)
    props = _props(rng, 2, 3)
    assert np.allclose(chain_operator_general(identity(8), props), props.T(0, 2))
    a = SimpleHistory((SZ_PLUS, identity(2), SZ_PLUS))
    b = SimpleHistory((SZ_MINUS, SZ_PLUS, identity(2)))
    both = history_projector(a) + history_projector(b)
    assert np.allclose(chain_operator_general(both, props),
                       chain_operator_simple(a, props) + chain_operator_simple(b, props))


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_general_chain_matches_index_sum(seed, d, n):
    rng = np.random.default_rng(seed)
    props = _props(rng, d, n)
    m = d ** n
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    assert np.max(np.abs(chain_operator_general(a, props) - _chain_oracle(a, props))) <= 1e-9


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_general_chain_linear_and_matches_simple(seed, d, n):
    rng = np.random.default_rng(seed)
    props = _props(rng, d, n)
    m = d ** n
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    b = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    x, y = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = chain_operator_general(x * a + y * b, props)
    rhs = x * chain_operator_general(a, props) + y * chain_operator_general(b, props)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9
    h = SimpleHistory(tuple(random_projector(rng, d) for _ in range(n)))
    assert np.max(np.abs(chain_operator_general(history_projector(h), props) - chain_operator_simple(h, props))) \
        <= 1e-9


def test_consistency_functional_examples():
    rng = np.random.default_rng(5)
    props = _props(rng, 3, 2)
    assert abs(consistency_functional(identity(9), identity(9), props) - 3) <= 1e-12
    one = propagators_explicit(TimeGrid((0.0,)), [], dim=2)
    assert consistency_functional(SZ_PLUS, SZ_MINUS, one) == 0


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_consistency_functional_hermitian_and_positive(seed, d, n):
    rng = np.random.default_rng(seed)
    props = _props(rng, d, n)
    m = d ** n
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    b = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    assert abs(consistency_functional(a, b, props) - np.conj(consistency_functional(b, a, props))) <= 1e-10
    caa = consistency_functional(a, a, props)
    assert caa.real >= -1e-12 and abs(caa.imag) <= 1e-10


# -- families ----------------------------------------------------------------

def _random_family(rng, d, n, k=2, dense=None):
    props = _props(rng, d, n)
    per_time = [random_commuting_projectors(rng, d, k) for _ in range(n)]
    gens = {}
    for t in range(n):
        for i, p in enumerate(per_time[t]):
            projs = [identity(d)] * n
            projs[t] = p
            gens[f"g{i}@{t}"] = SimpleHistory(tuple(projs))
    return build_family(props, gens, dense=dense)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_product_and_dense_backends_agree(seed, d, n):
    rng = np.random.default_rng(seed)
    state = rng.bit_generator.state
    fam = _random_family(rng, d, n)
    rng.bit_generator.state = state
    dense = _random_family(rng, d, n, dense=True)
    assert fam.signs == dense.signs
    assert np.max(np.abs(fam.report.gram - dense.report.gram)) <= 1e-9
    assert fam.report.verdict == dense.report.verdict
    for a in range(len(fam.atoms)):
        assert np.max(np.abs(fam.realize(1 << a) - dense.realize(1 << a))) <= 1e-9


@given(seeds, st.integers(1, 3), st.integers(1, 4))
def test_weights_sum_to_dimension(seed, d, n):
    fam = _random_family(np.random.default_rng(seed), d, n)
    if fam.consistent:
        assert abs(sum(fam.report.weights) - d) <= 1e-8
    gram = fam.report.gram
    assert np.max(np.abs(gram - gram.conj().T)) <= 1e-10
    assert min(fam.report.weights) >= -1e-9


@given(seeds, st.integers(1, 3))
def test_one_and_two_time_families_consistent(seed, d):
    rng = np.random.default_rng(seed)
    assert _random_family(rng, d, 1, k=3).consistent
    assert _random_family(rng, d, 2, k=3).consistent


@given(seeds, st.integers(1, 3), st.integers(1, 4))
def test_time_reversal_preserves_weights(seed, d, n):
    rng = np.random.default_rng(seed)
    fam = _random_family(rng, d, n)
    rev = build_family(fam.props.reversed(), {k: h.reversed() for k, h in fam.generators.items()})
    assert rev.signs == fam.signs
    assert np.max(np.abs(np.array(rev.report.weights) - np.array(fam.report.weights))) <= 1e-8
    assert np.max(np.abs(rev.report.gram - fam.report.gram.conj())) <= 1e-8


def test_weight_examples():
    rng = np.random.default_rng(6)
    one = propagators_explicit(TimeGrid((0.0,)), [], dim=4)
    p = random_projector(rng, 4, 3)
    fam = build_family(one, {"p": SimpleHistory((p,))})
    assert abs(weight("p", fam) - 3) <= 1e-9
    assert abs(weight(Or("p", Not("p")), fam) - 4) <= 1e-9
    assert weight(And("p", Not("p")), fam) == 0
    assert abs(weight(SimpleHistory((p,)), fam) - 3) <= 1e-9
    assert conditional_probability("p", "p", fam) == pytest.approx(1)
    with pytest.raises(ZeroWeightCondition):
        conditional_probability("p", And("p", Not("p")), fam)


def test_generator_validation():
    props = propagators_explicit(_grid(2), [identity(2)])
    with pytest.raises(CountMismatch):
        build_family(props, {"a": SimpleHistory((SZ_PLUS,))})
    with pytest.raises(NotAProjector):
        build_family(props, {"a": SimpleHistory((SX, identity(2)))})
    big = propagators_explicit(TimeGrid(tuple(range(13))), [identity(2)] * 12)
    gen = SimpleHistory((SZ_PLUS,) + (identity(2),) * 12)
    fam = build_family(big, {"a": gen})  # factored storage never builds the 8192-dim space
    assert abs(weight("a", fam) - 1) <= 1e-9
    with pytest.raises(TooLarge):
        build_family(big, {"a": gen}, dense=True)


def test_generalized_history_family():
    """A generator that is not a simple history: 'same S_z at both times'."""
    props = propagators_from_hamiltonian(0.3 * SX, _grid(2))
    same = tensor(SZ_PLUS, SZ_PLUS) + tensor(SZ_MINUS, SZ_MINUS)
    fam = build_family(props, {"same": GeneralizedHistory(same, 2, 2),
                               "up": SimpleHistory((SZ_PLUS, identity(2)))})
    assert fam.consistent
    u = props.steps[0]
    stay = abs(u[0, 0]) ** 2
    assert abs(conditional_probability("same", "up", fam) - stay) <= 1e-9
    assert abs(sum(fam.report.weights) - 2) <= 1e-9


def test_inconsistent_family_refuses_probabilities():
    h = 0.9 * SX
    props = propagators_from_hamiltonian(h, _grid(3))
    gens = {"z@1": SimpleHistory((SZ_PLUS, identity(2), identity(2))),
            "z@2": SimpleHistory((identity(2), SZ_PLUS, identity(2))),
            "z@3": SimpleHistory((identity(2), identity(2), SZ_PLUS))}
    fam = build_family(props, gens)
    assert fam.report.verdict is Verdict.INCONSISTENT
    with pytest.raises(InconsistentFamily):
        weight("z@1", fam)
    with pytest.raises(InconsistentFamily):
        conditional_probability("z@2", "z@1", fam)
    loose = build_family(props, gens, eps_consistency=1.0)
    assert loose.consistent


def test_infer_histories_examples():
    spin = build_spin_measurement_model()
    f1 = spin.family("F1")
    v = infer_histories([(f1, "X+@t2")], [(f1, "alpha@t1")])
    assert v.reason is Reason.PROVEN and v.probabilities == pytest.approx((1.0,))
    v = infer_histories([(f1, "X+@t2")], [(f1, "beta@t1")])
    assert v.reason is Reason.NOT_ENTAILED and v.probabilities == pytest.approx((0.0,))
    v = infer_histories([(f1, "X+@t2"), (f1, "beta@t1")], [(f1, "alpha@t1")])
    assert v.reason is Reason.CONTRADICTORY


def test_families_compatible_examples():
    two = build_two_device_model()
    f1, f2, f3 = (two.family(k) for k in ("F1", "F2", "F3"))
    same = families_compatible([f1, f1])
    assert same and same.generated is f1
    both = families_compatible([f1, f2])
    assert both and set(both.generated.names) == set(f2.names)
    no = families_compatible([f2, f3])
    assert not no and set(no.pair) == {"alpha@t2", "gamma@t2"}


def test_families_on_subgrid_are_lifted():
    spin = build_spin_measurement_model()
    full = spin.family("F1")
    sub_grid = TimeGrid((1.0, 2.0), ("t1", "t2"))
    props = PropagatorSet(sub_grid, (spin.propagators.forward(0, 2),))
    s = spin.symbols
    sub = build_family(props, {"alpha@t1": simple_history(sub_grid, {"t1": s["alpha"]}),
                               "X+@t2": simple_history(sub_grid, {"t2": s["X+"]})}, name="sub")
    res = families_compatible([full, sub])
    assert res and res.generated.grid == spin.grid
    v = infer_histories([(sub, "X+@t2")], [(full, "alpha@t1")])
    assert v.valid


def test_families_conflicts():
    spin = build_spin_measurement_model()
    f1 = spin.family("F1")
    grid = spin.grid
    other = build_family(spin.propagators, {"alpha@t1": simple_history(grid, {"t1": spin.symbols["beta"]})})
    res = families_compatible([f1, other])
    assert not res and "notation" in res.reason
    shifted = propagators_explicit(grid, [identity(6), identity(6)])
    fam = build_family(shifted, {"a": simple_history(grid, {"t1": spin.symbols["alpha"]})})
    res = families_compatible([f1, fam])
    assert not res and "grid" in res.reason
