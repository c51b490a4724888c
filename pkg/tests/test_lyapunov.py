import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dinavd import analysis as an
from dinavd import lyapunov as ly
from dinavd.dynamics import DynamicsSpec, Sampling, State, integrate
from dinavd.errors import BoundNotApplicable, DomainError, InvalidArgument
from dinavd.objectives import make_power_norm, make_quadratic


def _positive_root(c0):
    r = np.roots([1, -(1 + c0), -2 * (1 + math.sqrt(2)), -4])
    return max(x.real for x in r if abs(x.imag) < 1e-9 and x.real > 0)


def _bisect(c0, lo=0.0, hi=None):
    hi = hi or 4 * (1 + c0) + 20
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ly.r_poly(mid, c0) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


# -- r* --------------------------------------------------------------------

@pytest.mark.parametrize("c0", [0.0, 0.1, 1.0, 10.0])
def test_r_star_residual(c0):
    r = ly.solve_r_star(c0)
    assert abs(ly.r_poly(r, c0)) <= 1e-12
    assert r == pytest.approx(_bisect(c0), rel=1e-13)
    assert r == pytest.approx(_positive_root(c0), rel=1e-10)
    assert ly.r_poly(r / 2, c0) < 0 < ly.r_poly(2 * r, c0)


def test_r_star_examples():
    assert 3.0 < ly.solve_r_star(0.0) < 3.1
    assert ly.solve_r_star(10.0) > 11
    with pytest.raises(InvalidArgument):
        ly.solve_r_star(-1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1e4))
def test_r_star_bracket_property(c0):
    r = ly.solve_r_star(c0)
    assert abs(ly.r_poly(r, c0)) <= 1e-12 * max(1.0, r ** 3)
    assert ly.r_poly(r / 2, c0) < 0 < ly.r_poly(2 * r, c0)


# -- sharp constants -------------------------------------------------------

def test_sharp_constants_formulas():
    c = ly.sharp_constants(2.0, 4.0, 0.5, 1.0)
    assert c.lam == 2.0 and c.rate == 4.0 and c.k_alpha == 2.0
    assert c.c0 == pytest.approx(0.5 * 2 * 3 / 2)
    r = c.r_star
    assert c.c1 == pytest.approx((1 + 2 / r) ** 2)
    assert c.c2 == pytest.approx((1 + c.c0) / r + (1 + math.sqrt(2)) / r ** 2 + 4 / (3 * r ** 3))
    assert c.u1 == pytest.approx(4 * r / 4)
    assert c.t1 == pytest.approx(c.u1 + 0.5 * 2)
    assert c.shift == -1.0 and not c.critical
    d = c.to_dict()
    assert d["lambda"] == 2.0 and d["poly_residual"] <= 1e-12


def test_critical_constants():
    c = ly.sharp_constants(2.0, 2.0, 1.0, 1.0)
    assert c.critical and c.k_alpha == 0.0 and math.isinf(c.c0) and math.isnan(c.r_star)
    assert c.to_dict()["c0"] is None
    assert ly.phi_primitive(3.0, c) == 0.0 and ly.phi_density(3.0, c) == 0.0


def test_sharp_constants_validation():
    for args in [(0.5, 4, 1, 1), (2, 0, 1, 1), (2, 4, -1, 1), (2, 4, 1, 0)]:
        with pytest.raises(InvalidArgument):
            ly.sharp_constants(*args)


# -- Phi -------------------------------------------------------------------

@pytest.mark.parametrize("args", [(2.0, 4.0, 0.5, 1.0), (2.0, 3.0, 1.0, 0.01), (3.0, 6.0, 2.0, 0.3)])
def test_phi_density_is_derivative(args):
    c = ly.sharp_constants(*args)
    for t in (1.0, 5.0, 20.0):
        h = 1e-4 * t
        fd = (ly.phi_primitive(t + h, c) - ly.phi_primitive(t - h, c)) / (2 * h)
        assert fd == pytest.approx(ly.phi_density(t, c), rel=1e-6)


def test_phi_sign_and_limit():
    c = ly.sharp_constants(2.0, 4.0, 0.5, 1.0)
    ts = np.geomspace(0.1, 1e8, 50)
    vals = ly.phi_primitive(ts, c)
    assert np.all(vals <= 0) and np.all(np.diff(vals) > 0) and vals[-1] > -1e-7
    with pytest.raises(DomainError):
        ly.phi_primitive(0.0, c)
    with pytest.raises(DomainError):
        ly.phi_density(-1.0, c)


# -- energies --------------------------------------------------------------

def test_energy_sharp_examples():
    q = make_quadratic(1, 1.0)
    c = ly.sharp_constants(2.0, 4.0, 1.0, 1.0)
    s = State(10.0, np.array([0.1]), np.array([0.01]))
    assert ly.energy_sharp(s, q, c) == pytest.approx(0.445, rel=1e-14)
    assert ly.energy_sharp(State(3.0, np.zeros(1), np.zeros(1)), q, c) == 0.0
    t = -c.shift
    y = np.array([0.3])
    assert ly.energy_sharp(State(t, np.zeros(1), y), q, c) == pytest.approx(0.5 * (t * 0.3) ** 2)
    assert ly.energy_H_sharp(State(5.0, np.zeros(1), np.zeros(1)), q, c) == 0.0


def test_energy_H_beta_zero():
    q = make_quadratic(1, 1.0)
    c = ly.sharp_constants(2.0, 4.0, 0.0, 1.0)
    s = State(7.0, np.array([0.2]), np.array([-0.1]))
    e = ly.energy_sharp(s, q, c)
    expected = e * 7.0 ** (c.rate - 2) * math.exp(-ly.phi_primitive(7.0, c))
    assert ly.energy_H_sharp(s, q, c) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        ly.energy_H_sharp(State(0.5, np.zeros(1), np.zeros(1)), q, ly.sharp_constants(2, 4, 1, 1))


def test_energy_flat_examples():
    p = make_power_norm(2, 4.0, 0.5)
    c = ly.flat_constants(4.0, 4.0, 3.0, 1.0, 0.5)
    assert ly.energy_flat(State(3.0, np.zeros(2), np.zeros(2)), p, c) == 0.0
    # xi = 0 when alpha = lambda + 1: flat energy equals the sharp form with the same lambda
    c0 = ly.flat_constants(4.0, 4.0, 2.0, 0.5, 0.5)
    assert c0.xi == 0.0
    s = State(4.0, np.array([0.3, -0.2]), np.array([0.1, 0.05]))
    d, w = s.x, c0.lam * s.x + 4.0 * s.y
    sharp_form = (16 + 4 * c0.shift) * p.f_gap(s.x) + 0.5 * float(w @ w)
    assert ly.energy_flat(s, p, c0) == pytest.approx(sharp_form, rel=1e-14)
    a, b, cc = ly.energy_flat_parts(s, p, c)
    assert (4 + c.shift) * a + 4 * (b + c.xi * cc) == pytest.approx(ly.energy_flat(s, p, c))
    assert ly.energy_H_flat(s, p, c) == pytest.approx(16 * ly.energy_flat(s, p, c))


def test_flat_constants_example():
    c = ly.flat_constants(4.0, 4.0, 3.0, 1.0, 0.5)
    assert (c.p, c.lam, c.xi, c.c1_flat, c.k_growth) == (2.0, 1.0, -1.0, 6.0, 0.25)
    assert c.rate == 4.0
    # t_m solves beta C1 t^p = (t + shift)^(p+1) / 2
    lhs = c.beta * c.c1_flat * c.t_m ** c.p
    assert lhs == pytest.approx(0.5 * (c.t_m + c.shift) ** (c.p + 1), rel=1e-10)
    assert c.t1 == max(1.0, 1.0 * (2 * 2 - 1), c.t_m)
    u1 = c.t1 + c.shift
    assert c.c2_flat == pytest.approx(-c.t1 ** 1.5 / u1 ** 1.5 * (-1) / (2 * 0.25 ** 0.5))
    assert json.loads(ly.constants_json(c))["flat"]["lambda"] == 1.0
    with pytest.raises(InvalidArgument):
        ly.flat_constants(2.0, 2.0, 3.0, 1.0, 0.5)


# -- explicit bounds -------------------------------------------------------

def test_closed_form_K_beta_zero():
    c = ly.sharp_constants(2.0, 4.0, 0.0, 1.0)
    em0 = 0.7
    r = c.r_star
    lam = 2 * 4 / 4
    # prior-work form: C1 exp(2 gamma C2 (alpha - 1 - 2/gamma)/(gamma+2)) E_m (alpha r/((gamma+2) sqrt mu))^(gamma lam)
    c1 = (1 + 2 / r) ** 2
    c2 = 1 / r + (1 + math.sqrt(2)) / r ** 2 + 4 / (3 * r ** 3)
    ref = c1 * math.exp(2 * 2 * c2 * (4 - 2) / 4) * em0 * (4 * r / 4) ** (2 * lam)
    assert ly.closed_form_K(c, em0, 1.0) == pytest.approx(ref, rel=1e-12)
    assert ly.closed_form_K(c, em0, 1.0, strict=True) == ly.closed_form_K(c, em0, 1.0)


def test_bounds_zero_energy_and_domain():
    c = ly.sharp_constants(2.0, 4.0, 0.5, 1.0)
    assert ly.bound_sharp_general(c.t1 * 2, c, 0.0, 1.0) == 0.0
    with pytest.raises(BoundNotApplicable):
        ly.bound_sharp_general(c.t1 / 2, c, 1.0, 1.0)
    with pytest.raises(BoundNotApplicable):
        ly.closed_form_K(c, 1.0, c.u1 * 2)
    with pytest.raises(BoundNotApplicable):
        ly.bound_sharp_critical(10.0, c, 1.0, 1.0)
    cc = ly.sharp_constants(2.0, 2.0, 1.0, 1.0)
    with pytest.raises(BoundNotApplicable):
        ly.closed_form_K(cc, 1.0, 1.0)
    assert ly.bound_sharp_critical(5.0, cc, 0.0, 1.0) == 0.0
    with pytest.raises(BoundNotApplicable):
        ly.bound_sharp_critical(1.5, cc, 1.0, 1.0)


def test_critical_bound_beta_zero():
    c = ly.sharp_constants(2.0, 2.0, 0.0, 1.0)
    t = np.array([2.0, 10.0])
    ref = (1.0 + (1.0 + 1.0) / 1.0) * 0.3 / t ** 2
    np.testing.assert_allclose(ly.bound_sharp_critical(t, c, 0.3, 1.0), ref, rtol=1e-14)


def test_sharp_run_bound_and_certificates(sharp_run):
    tr, obj = sharp_run
    c = ly.sharp_constants(2.0, 4.0, 0.5, 1.0)
    em0 = ly.energy_m_initial(obj, tr.spec.x0, 1.0, 4.0, 0.5)
    m = tr.t >= c.t1
    b = ly.bound_sharp_general(tr.t[m], c, em0, 1.0)
    assert np.all(b >= tr.f_gap[m] - 1e-9)
    t, H, G = ly.sharp_certificates(tr, obj, c)
    assert t[0] >= 1.0 - c.shift
    assert an.non_increasing(H, 1e-6 * H[0])[0] and an.non_increasing(G, 1e-6 * G[0])[0]
    # the abstract bound anchored at any sample dominates the later gap
    i = np.searchsorted(tr.t, 3.0)
    Ha = ly.energy_H_sharp(tr.state(i), obj, c)
    later = tr.t >= tr.t[i]
    ab = ly.bound_sharp_abstract(tr.t[later], c, Ha, tr.t[i])
    assert np.all(ab >= tr.f_gap[later] - 1e-12)


def test_critical_run_bound(critical_run):
    tr, obj = critical_run
    c = ly.sharp_constants(2.0, 2.0, 1.0, 1.0)
    em0 = ly.energy_m_initial(obj, tr.spec.x0, 1.0, 2.0, 1.0)
    m = (tr.t >= 2.0) & (tr.t <= 500)
    assert np.all(ly.bound_sharp_critical(tr.t[m], c, em0, 1.0) >= tr.f_gap[m])


@settings(max_examples=12, deadline=None)
@given(alpha=st.floats(2.2, 7.0), beta=st.floats(0.0, 4.0), mu=st.sampled_from([0.01, 0.1, 1.0]))
def test_general_bound_property(alpha, beta, mu):
    obj = make_quadratic(2, mu)
    c = ly.sharp_constants(2.0, alpha, beta, mu)
    if c.u1 < 1.0:
        return
    # dense sampling: the G integral is a trapezoid sum over an oscillating integrand
    spec = DynamicsSpec("DIN_AVD", alpha, beta, 1.0, [1.0, -1.0], 50 * c.t1,
                        Sampling.log_spaced(2000), 1e-10, 1e-300)
    tr = integrate(spec, obj)
    em0 = ly.energy_m_initial(obj, spec.x0, 1.0, alpha, beta)
    m = tr.t >= c.t1
    strict = ly.bound_sharp_general(tr.t[m], c, em0, 1.0, strict=True)
    assert np.all(strict >= tr.f_gap[m] - 1e-9)
    _, H, G = ly.sharp_certificates(tr, obj, c)
    assert an.non_increasing(G, 1e-6 * G[0])[0]


def test_flat_certificates(flat_run):
    tr, obj = flat_run
    c = ly.flat_constants(4.0, 4.0, 3.0, 1.0, 0.5)
    cert = ly.flat_certificates(tr, obj, c)
    assert cert["t"][0] >= c.t1
    assert an.non_increasing(cert["G"], 1e-6 * cert["G"][0])[0]
    assert an.non_increasing(cert["F"], 1e-6 * cert["F"][0])[0]
    assert an.v_bounded(cert["t"], cert["v"], tr.spec.t_end)
    np.testing.assert_allclose(cert["H"], cert["t"] ** 2 * cert["E"])
