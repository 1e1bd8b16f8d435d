import math

import numpy as np
import pytest

from nonlocal_heat import EvaluationError, Field, Grid, Potential, catalog, lipschitz_on, nemytskii


GRID = Grid((1.0,), (11,))


# ---------------------------------------------------------------- catalog

def test_catalog_zero():
    phi = catalog("zero")
    assert phi.nonnegative
    assert phi.growth == 0.0
    assert lipschitz_on(phi, 5.0) == 0.0
    assert np.all(phi(np.linspace(-3, 3, 7)) == 0.0)


@pytest.mark.parametrize("c,nonneg", [(2.0, True), (0.0, True), (-1.5, False)])
def test_catalog_constant(c, nonneg):
    phi = catalog("constant", [c])
    assert phi.nonnegative is nonneg
    assert np.all(phi(np.array([-1.0, 0.0, 7.0])) == c)
    assert lipschitz_on(phi, 10.0) == 0.0
    assert (phi.growth == c) if c >= 0 else (phi.growth is None)


def test_catalog_quadratic():
    phi = catalog("quadratic")
    assert phi.nonnegative
    assert phi.growth is None
    assert np.allclose(phi(np.array([-2.0, 0.5])), [4.0, 0.25])
    assert lipschitz_on(phi, 2.0) == 4.0


def test_catalog_absval():
    phi = catalog("absval")
    assert phi.nonnegative and phi.growth == 1.0
    assert lipschitz_on(phi, 3.0) == 1.0
    assert lipschitz_on(phi, 0.0) == 0.0


def test_catalog_bounded_sine():
    phi = catalog("bounded_sine")
    s = np.linspace(-20, 20, 401)
    assert np.all(phi(s) >= 0.0)
    assert np.max(phi(s)) <= 2.0
    assert lipschitz_on(phi, 10.0) == 1.0
    scaled = catalog("bounded_sine", [2.5])
    assert lipschitz_on(scaled, 1.0) == 2.5
    assert scaled.growth == 5.0


def test_catalog_linear_growth():
    phi = catalog("linear_growth", [3.0])
    s = np.array([-2.0, 0.0, 4.0])
    assert np.allclose(phi(s), 1.5 * (1.0 + np.abs(s)))
    assert phi.growth == 3.0
    assert lipschitz_on(phi, 1.0) == 1.5
    with pytest.raises(ValueError):
        catalog("linear_growth", [-1.0])


def test_catalog_unknown_and_bad_params():
    with pytest.raises(ValueError):
        catalog("cubic")
    with pytest.raises(ValueError):
        catalog("constant", [])
    with pytest.raises(ValueError):
        catalog("quadratic", [1.0])


# --------------------------------------------------------------- nemytskii

def test_nemytskii_zero_potential():
    v = Field.from_function(GRID, lambda x: x)
    out = nemytskii(catalog("zero"), v)
    assert np.all(out.values == 0.0)


def test_nemytskii_pointwise_square():
    v = Field.from_function(GRID, lambda x: np.sin(math.pi * x))
    out = nemytskii(catalog("quadratic"), v)
    assert np.array_equal(out.values, v.values**2)


def test_nemytskii_absval_on_negative_constant():
    v = Field.constant(GRID, -3.0)
    out = nemytskii(catalog("absval"), v)
    assert np.all(out.values == 3.0)


def test_nemytskii_nonfinite_names_node():
    phi = Potential(name="reciprocal", evaluator=lambda s: 1.0 / s)
    values = np.ones(GRID.num_nodes)
    values[4] = 0.0
    with np.errstate(divide="ignore"):
        with pytest.raises(EvaluationError, match="node 4"):
            nemytskii(phi, Field(GRID, values))


def test_nemytskii_rejects_broken_nonnegative_certificate():
    lying = Potential(name="identity", evaluator=lambda s: s, nonnegative=True)
    v = Field.constant(GRID, -1.0)
    with pytest.raises(EvaluationError, match="nonnegative"):
        nemytskii(lying, v)


def test_nemytskii_rejects_broken_growth_certificate():
    lying = Potential(name="square", evaluator=lambda s: s * s, growth=1.0)
    v = Field.constant(GRID, 10.0)
    with pytest.raises(EvaluationError, match="growth"):
        nemytskii(lying, v)


def test_nemytskii_nonnegative_certificate_tolerance():
    # a -1e-15 wiggle is inside the certificate slack
    phi = Potential(name="wiggle", evaluator=lambda s: np.full_like(s, -1e-15),
                    nonnegative=True)
    out = nemytskii(phi, Field.constant(GRID, 0.0))
    assert np.all(out.values >= -1e-14)


def test_nemytskii_output_nonnegative_for_certified_catalog():
    rng = np.random.default_rng(9)
    v = Field(GRID, rng.standard_normal(GRID.num_nodes) * 5)
    for name in ("zero", "quadratic", "absval", "bounded_sine"):
        out = nemytskii(catalog(name), v)
        assert np.min(out.values) >= -1e-14


# ------------------------------------------------------------- lipschitz

def test_lipschitz_sampled_sine_estimate():
    # oracle: sup |cos| on [-10, 10] is 1 (attained at 0)
    phi = Potential(name="sine", evaluator=np.sin)
    est = lipschitz_on(phi, 10.0)
    assert 0.999 <= est <= 1.0
    assert not phi.lipschitz_exact


def test_lipschitz_sampled_zero_interval():
    phi = Potential(name="sine", evaluator=np.sin)
    assert lipschitz_on(phi, 0.0) == 0.0


def test_lipschitz_rejects_negative_interval():
    with pytest.raises(ValueError):
        lipschitz_on(catalog("zero"), -1.0)


def test_lipschitz_monotone_in_interval_for_catalog():
    for name, params in [("quadratic", []), ("absval", []), ("bounded_sine", []),
                         ("linear_growth", [2.0]), ("constant", [3.0])]:
        phi = catalog(name, params)
        values = [lipschitz_on(phi, s0) for s0 in (0.0, 0.5, 1.0, 4.0, 16.0)]
        assert all(a <= b for a, b in zip(values, values[1:]))


def test_lipschitz_exact_flag():
    assert catalog("quadratic").lipschitz_exact
    assert not Potential(name="f", evaluator=np.sin).lipschitz_exact


def test_non_estimable_marker():
    rough = Potential(name="rough", evaluator=np.sign, lipschitz_estimable=False)
    assert not rough.lipschitz_estimable
