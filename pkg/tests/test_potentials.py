import numpy as np
import pytest
from scipy.optimize import brentq

from membrane_patterns.errors import InvalidParameterError
from membrane_patterns.potentials import (PotentialSpec, eval_split, log_convex_exact, log_extended,
                                          membrane_potential, moreau_yosida, moreau_yosida_eval,
                                          polynomial, resolvent)

SPECS = [polynomial(), log_extended(), moreau_yosida(0.05)]


def test_log_extended_at_zero(flavour):
    assert eval_split(membrane_potential(), 0.0) == (0.0, 0.0, 0.0, 0.0)


def test_minima_near_071(flavour):
    pot = membrane_potential()
    for s in (0.71, -0.71):
        assert abs(float(pot.dW(s))) <= 5e-3


def test_polynomial_direct():
    pot = polynomial(a4=1.0, a2=2.0)
    assert float(pot.W(1.0)) == -1.0
    assert float(pot.dW(1.0)) == 0.0


def test_seams_are_c1_and_w1_is_c2(flavour):
    pot = log_extended()
    a = pot.seam
    for side in (a, -a):
        lo, hi = side - 1e-13, side + 1e-13
        vals = pot.convex(np.array([lo, hi]))
        assert abs(pot.W(lo) - pot.W(hi)) <= 1e-12
        assert abs(pot.dW(lo) - pot.dW(hi)) <= 1e-10
        assert abs(vals[2][0] - vals[2][1]) <= 1e-8 * vals[2][0]


def test_extension_constants_follow_delta():
    for delta in (0.02, 0.1):
        pot = log_extended(delta=delta)
        s = 1 - delta
        exact = log_convex_exact(pot, s)
        assert float(pot.convex(s)[0]) == pytest.approx(float(exact), rel=1e-14)


@pytest.mark.parametrize("pot", SPECS, ids=lambda p: p.variant)
def test_convexity_of_w1(pot, rng):
    s = rng.uniform(-1.4, 1.4, 1000)
    e = 1e-4
    second = (pot.convex(s + e)[0] - 2 * pot.convex(s)[0] + pot.convex(s - e)[0]) / e**2
    assert second.min() >= -1e-8 * max(1.0, np.abs(second).max()) - 1e-5
    assert np.all(pot.convex(s)[2] >= 0)


@pytest.mark.parametrize("pot", SPECS, ids=lambda p: p.variant)
def test_derivative_consistency(pot, rng):
    s = rng.uniform(-0.95, 0.95, 100)
    e = 1e-5
    fd = (pot.W(s + e) - pot.W(s - e)) / (2 * e)
    exact = pot.dW(s)
    assert np.all(np.abs(fd - exact) <= 1e-5 * np.maximum(1.0, np.abs(exact)))


def test_split_sums_to_total(rng):
    pot = membrane_potential()
    s = rng.uniform(-1.2, 1.2, 50)
    w1, w2, d1, d2 = eval_split(pot, s)
    assert np.allclose(w1 + w2, pot.W(s)) and np.allclose(d1 + d2, pot.dW(s))


def test_invalid_specs():
    with pytest.raises(InvalidParameterError):
        PotentialSpec("obstacle")
    with pytest.raises(InvalidParameterError):
        polynomial(a4=-1.0)
    with pytest.raises(InvalidParameterError):
        log_extended(theta=6.0, theta_c=5.0)
    with pytest.raises(InvalidParameterError):
        moreau_yosida(0.0)


def test_resolvent_examples(flavour):
    base = log_extended()
    assert resolvent(base, 0.3, 0.0) == 0.0
    assert abs(resolvent(base, 1e-8, 0.5) - 0.5) <= 1e-6
    root = brentq(lambda s: s + 2 * np.log((1 + s) / (1 - s)) - 2, -0.999999, 0.999999,
                  xtol=1e-15)
    assert abs(resolvent(base, 1.0, 2.0) - root) <= 1e-12


def test_resolvent_solves_its_equation(rng, flavour):
    base = log_extended()
    r = rng.uniform(-20, 20, 200)
    for lam in (1.0, 0.1, 0.01):
        s = resolvent(base, lam, r)
        assert np.all(np.abs(s) < 1)
        # away from float saturation at +-1 the defining equation holds
        ok = np.abs(s) < 1 - 1e-9
        resid = s + lam * 2.0 * (np.log1p(s) - np.log1p(-s)) - r
        slope = 1.0 + lam * 4.0 / ((1 - s) * (1 + s))
        # backward error in s, since the equation is stiff near the endpoints
        assert np.abs(resid[ok] / slope[ok]).max() <= 1e-12
        assert np.all(np.diff(s[np.argsort(r)]) >= 0)


def test_moreau_yosida_examples():
    base = log_extended()
    assert moreau_yosida_eval(base, 0.1, 0.0) == (0.0, 0.0)
    limit = 2 * (1.5 * np.log(1.5) + 0.5 * np.log(0.5))
    vals = [moreau_yosida_eval(base, lam, 0.5)[0] for lam in (1.0, 0.1, 0.01)]
    assert vals[0] < vals[1] < vals[2] <= limit


def test_moreau_yosida_converges_monotonically(rng):
    base = log_extended()
    r = rng.uniform(-0.97, 0.97, 200)
    prev = np.full(r.shape, -np.inf)
    for lam in (1.0, 0.1, 0.01, 0.001):
        v = moreau_yosida_eval(base, lam, r)[0]
        assert np.all(v >= prev - 1e-12)
        prev = v
    assert np.allclose(prev, log_convex_exact(base, r), atol=5e-2)
    assert np.all(prev <= log_convex_exact(base, r) + 1e-12)


def test_moreau_yosida_variant_matches_eval(rng):
    pot = moreau_yosida(0.05)
    r = rng.uniform(-2, 2, 50)
    w, dw = moreau_yosida_eval(log_extended(), 0.05, r)
    assert np.allclose(pot.convex(r)[0], w) and np.allclose(pot.convex(r)[1], dw)
