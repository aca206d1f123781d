import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abl_lab import (
    BlochDirection,
    DimensionError,
    Observable,
    Outcome,
    Projector,
    StateVector,
    X_AXIS,
    Z_AXIS,
    apply_projector,
    born_probability,
    inner_product,
    projector_observable,
    spin_observable,
)
from abl_lab.quantum import TOL

from conftest import C45, bloch_angle, random_direction, random_observable, random_state


def test_inner_product_examples():
    up, down = Z_AXIS.up(), Z_AXIS.down()
    assert inner_product(up, up) == pytest.approx(1 + 0j, abs=1e-15)
    assert abs(inner_product(up, down)) < 1e-15
    ip = inner_product(X_AXIS.up(), up)
    assert ip.real == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert ip.imag == pytest.approx(0, abs=1e-15)


def test_inner_product_conjugates_first_argument():
    x = StateVector([1j, 0])
    y = StateVector([1, 0])
    assert inner_product(x, y) == pytest.approx(-1j)


def test_inner_product_dimension_mismatch_names_dims():
    with pytest.raises(DimensionError, match="2 vs 3"):
        inner_product(Z_AXIS.up(), StateVector.basis(3, 0))


def test_apply_projector_examples():
    p = Projector.onto(Z_AXIS.up())
    v, n2 = apply_projector(p, Z_AXIS.up())
    assert n2 == pytest.approx(1.0) and np.allclose(v, [1, 0])
    v, n2 = apply_projector(p, Z_AXIS.down())
    assert n2 == 0.0 and np.allclose(v, 0)
    v, n2 = apply_projector(p, X_AXIS.up())
    assert n2 == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(v, [1 / math.sqrt(2), 0], atol=1e-15)


def test_born_probability_examples():
    up = Z_AXIS.up()
    assert born_probability(up, Projector.onto(up)) == pytest.approx(1.0, abs=1e-15)
    assert born_probability(up, Projector.onto(X_AXIS.up())) == pytest.approx(0.5, abs=1e-15)
    # explicit 2x2 arithmetic: P = v v^T with v = (cos 22.5deg, sin 22.5deg)
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    p_explicit = [[c * c, c * s], [s * c, s * s]]
    expected = p_explicit[0][0]
    assert expected == pytest.approx((1 + math.cos(math.pi / 4)) / 2, abs=1e-15)
    assert born_probability(up, Projector.onto(C45.up())) == pytest.approx(0.85355339, abs=1e-8)
    assert born_probability(up, Projector.onto(C45.up())) == pytest.approx(expected, abs=1e-15)


def test_spin_observable_eigenstates():
    z = spin_observable(Z_AXIS)
    assert z.labels == ("up", "down")
    assert [o.eigenvalue for o in z.outcomes] == [1.0, -1.0]
    assert np.allclose(z.projector("up").matrix, [[1, 0], [0, 0]])
    assert np.allclose(z.projector("down").matrix, [[0, 0], [0, 1]])
    x_up = X_AXIS.up().amplitudes
    assert np.allclose(x_up, np.array([1, 1]) / math.sqrt(2))
    assert np.allclose(C45.up().amplitudes, [0.92388, 0.38268], atol=1e-5)


def test_projector_observable_examples():
    ident = projector_observable(Projector.identity(3), "all")
    for seed in range(5):
        s = random_state(np.random.default_rng(seed), 3)
        assert born_probability(s, ident.projector("yes")) == pytest.approx(1.0, abs=1e-12)
    one = projector_observable(Projector.onto_basis(3, [1]), "box2")
    assert one.projector("no").rank == 2
    box1 = projector_observable(Projector.onto_basis(3, [0]), "box1")
    psi = StateVector.normalized([1, 1, 1])
    assert born_probability(psi, box1.projector("yes")) == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("amps", [[1, 1], [0.5, 0], [np.nan, 1], [1]])
def test_state_vector_rejects_bad_input(amps):
    with pytest.raises(ValueError):
        StateVector(amps)


def test_state_vector_normalize_opt_in():
    s = StateVector.normalized([3, 4j])
    assert np.allclose(s.amplitudes, [0.6, 0.8j])
    with pytest.raises(ValueError):
        StateVector.normalized([0, 0])


def test_dimension_cap():
    with pytest.raises(ValueError, match="maximum"):
        StateVector.basis(17, 0)
    StateVector.basis(16, 15)


def test_state_is_immutable():
    s = Z_AXIS.up()
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


@pytest.mark.parametrize(
    "matrix, msg",
    [
        ([[1, 1], [0, 0]], "Hermitian"),
        ([[2, 0], [0, 0]], "idempotent"),
        ([[0.5, 0], [0, 0.5]], "idempotent"),
    ],
)
def test_projector_validation(matrix, msg):
    with pytest.raises(ValueError, match=msg):
        Projector(np.array(matrix, dtype=complex))


def test_observable_validation():
    p0 = Projector.onto_basis(2, [0])
    with pytest.raises(ValueError, match="identity"):
        Observable("bad", (Outcome(1, "a", p0),))
    with pytest.raises(ValueError, match="duplicate"):
        Observable("bad", (Outcome(1, "a", p0), Outcome(-1, "a", p0.complement())))
    overlap = Projector.onto(X_AXIS.up())
    with pytest.raises(ValueError):
        Observable("bad", (Outcome(1, "a", p0), Outcome(0, "b", overlap)))


@pytest.mark.parametrize("theta, phi", [(-0.1, 0), (3.2, 0), (1, 2 * math.pi), (1, -0.1), (math.nan, 0)])
def test_bloch_direction_ranges(theta, phi):
    with pytest.raises(ValueError):
        BlochDirection(theta, phi)


def _check_observable(q):
    eye = np.eye(q.dim)
    assert np.max(np.abs(sum(o.projector.matrix for o in q.outcomes) - eye)) <= TOL
    for i, oi in enumerate(q.outcomes):
        m = oi.projector.matrix
        assert np.max(np.abs(m - m.conj().T)) <= TOL
        for j, oj in enumerate(q.outcomes):
            prod = m @ oj.projector.matrix
            target = m if i == j else 0
            assert np.max(np.abs(prod - target)) <= TOL


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(0, math.pi), phi=st.floats(0, 2 * math.pi, exclude_max=True))
def test_spin_observable_invariants(theta, phi):
    q = spin_observable(BlochDirection(theta, phi))
    _check_observable(q)
    up = BlochDirection(theta, phi).up()
    assert born_probability(up, q.projector("up")) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 4))
def test_born_sums_to_one_and_matches_projected_norm(seed, dim):
    rng = np.random.default_rng(seed)
    x = random_state(rng, dim)
    q = random_observable(rng, dim)
    _check_observable(q)
    probs = [born_probability(x, o.projector) for o in q.outcomes]
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
    for o, p in zip(q.outcomes, probs):
        v, n2 = apply_projector(o.projector, x)
        assert p == pytest.approx(n2, abs=1e-12)
        assert p == pytest.approx(float(np.linalg.norm(v)) ** 2, abs=1e-12)


def test_spin_overlap_is_half_angle_cosine(rng):
    for _ in range(100):
        m, n = random_direction(rng), random_direction(rng)
        gamma = bloch_angle(m, n)
        p = born_probability(m.up(), spin_observable(n).projector("up"))
        assert p == pytest.approx(math.cos(gamma / 2) ** 2, abs=1e-10)
