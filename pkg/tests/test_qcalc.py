import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from braidline import (
    G1,
    G2,
    LatticeFunction,
    QContext,
    braided_line,
    crossing_transform,
    jackson_derivative,
    jackson_integral,
    kappa_scale,
    make_lattice,
    q_exponential,
    q_factorial,
    q_number,
    sesquilinear,
)
from braidline.qcalc import derivative_matrix

Q = 0.9


@pytest.fixture(scope="module")
def ctx():
    return braided_line(Q)


@pytest.fixture(scope="module")
def lattice():
    return make_lattice(Q)


# ---------------------------------------------------------------------------
# contexts

def test_braided_line_parameters(ctx):
    assert ctx.q == Q
    assert ctx.kappa == Q
    assert ctx.zeta == -1
    assert ctx.geometry == G1
    assert not ctx.barred


def test_context_rejects_bad_q():
    with pytest.raises(ValueError):
        QContext(q=1.0, kappa=1.0, zeta=-1)
    with pytest.raises(ValueError):
        QContext(q=-0.5, kappa=0.5, zeta=-1)
    with pytest.raises(ValueError):
        braided_line(1.2)


def test_crossing_transform_values(ctx):
    c2 = crossing_transform(ctx)
    assert c2.q == pytest.approx(1.0 / Q)
    assert c2.kappa == pytest.approx(1.0 / Q)
    assert c2.zeta == 1
    assert c2.geometry == G2
    assert c2.barred


def test_crossing_transform_is_involution(ctx):
    back = crossing_transform(crossing_transform(ctx))
    assert back.q == pytest.approx(ctx.q)
    assert back.kappa == pytest.approx(ctx.kappa)
    assert back.zeta == ctx.zeta
    assert back.geometry == ctx.geometry
    assert back.barred == ctx.barred


def test_shift_factor_by_geometry(ctx):
    assert ctx.shift_factor == Q
    assert crossing_transform(ctx).shift_factor == pytest.approx(Q)


# ---------------------------------------------------------------------------
# lattice

def test_lattice_layout(lattice):
    assert lattice.size == 50
    assert np.all(np.diff(lattice.points) > 0)
    # symmetric under x -> -x as an index reversal
    assert np.allclose(lattice.points, -lattice.points[::-1])
    assert np.allclose(lattice.weights, (1 - Q) * np.abs(lattice.points))


def test_lattice_base_normalised():
    a = make_lattice(Q)
    b = make_lattice(1.0 / Q)
    assert np.allclose(a.points, b.points)


def test_lattice_shift_map_roundtrip(lattice):
    idx, ok = lattice.shift_map(1)
    x = lattice.points
    assert np.allclose(x[idx[ok]], Q * x[ok])
    # innermost points fall off the lattice
    assert np.count_nonzero(~ok) == 2
    idx0, ok0 = lattice.shift_map(0)
    assert np.all(ok0)
    assert np.all(idx0 == np.arange(lattice.size))


def test_lattice_validation():
    with pytest.raises(ValueError):
        make_lattice(Q, x0=-1.0)
    with pytest.raises(ValueError):
        make_lattice(Q, j_min=3, j_max=1)


# ---------------------------------------------------------------------------
# q-numbers and the q-exponential

def test_q_number_closed_form():
    for n in range(8):
        assert q_number(n, Q) == pytest.approx((1 - Q**n) / (1 - Q))
    assert q_number(0, Q) == 0.0
    assert q_number(1, Q) == 1.0


def test_q_factorial_product_oracle():
    for n in range(1, 9):
        prod = 1.0
        for k in range(1, n + 1):
            prod *= q_number(k, Q)
        assert q_factorial(n, Q) == pytest.approx(prod, rel=1e-14)
    assert q_factorial(0, Q) == 1.0


def test_q_number_classical_limit():
    assert q_number(5, 1 - 1e-9) == pytest.approx(5.0, rel=1e-6)


def test_q_exponential_series_oracle():
    # partial sums computed independently
    z = 0.3 + 0.1j
    total = 1.0
    term = 1.0
    for n in range(1, 31):
        term = term * z / q_number(n, Q)
        total += term
    res = q_exponential(z, Q, 30)
    assert res.converged
    assert res.value == pytest.approx(total, rel=1e-13)


def test_q_exponential_overflow_flagged():
    res = q_exponential(1e200, Q, 400)
    assert not res.converged


def test_q_exponential_rejects_bad_truncation():
    with pytest.raises(ValueError):
        q_exponential(1.0, Q, 0)


# ---------------------------------------------------------------------------
# derivative and integral

def test_derivative_of_monomials(lattice, ctx):
    # D x**n = [n]_q x**(n-1) away from the zero-filled boundary
    x = lattice.points
    for n in range(1, 5):
        f = LatticeFunction(lattice, x.astype(complex) ** n)
        df = jackson_derivative(f, ctx)
        expect = q_number(n, Q) * x ** (n - 1)
        assert np.allclose(df.values[df.valid], expect[df.valid], rtol=1e-11)


def test_derivative_flags_boundary(lattice, ctx):
    f = LatticeFunction(lattice, np.ones(lattice.size, dtype=complex))
    df = jackson_derivative(f, ctx)
    assert np.count_nonzero(~df.valid) == 2
    assert np.allclose(df.values[df.valid], 0.0)


def test_derivative_matrix_requires_matching_base(lattice):
    other = QContext(q=0.8, kappa=0.8, zeta=-1)
    with pytest.raises(ValueError):
        derivative_matrix(lattice, other)


def test_integral_geometric_series_oracle(lattice):
    # int_0^x0 t**2 dt -> x0**3 / [3]_q on the half lattice; the truncation
    # error of the tail is q**(3*(j_max+1)) relative
    x = lattice.points
    vals = np.where(x > 0, x.astype(complex) ** 2, 0.0)
    f = LatticeFunction(lattice, vals)
    # restrict to the segment [0, x0]
    f.values[np.abs(x) > 1.0] = 0.0
    got = jackson_integral(f).real
    expect = 1.0 / q_number(3, Q)
    rel = abs(got - expect) / expect
    # the truncated geometric tail is exactly q**(3*(j_max - j_min + 1))
    assert rel == pytest.approx(Q ** 39, rel=1e-9)


def test_integral_of_derivative_telescopes(lattice, ctx):
    # fundamental theorem on the positive half: the Jackson sum of D f
    # telescopes to the boundary values
    x = lattice.points
    vals = np.where(x > 0, np.exp(-x), 0.0).astype(complex)
    f = LatticeFunction(lattice, vals)
    df = jackson_derivative(f, ctx)
    df.values[x < 0] = 0.0
    got = jackson_integral(df).real
    pos = x[x > 0]
    # the weighted sum telescopes between the outermost point and the
    # innermost point still referenced by a valid row
    expect = np.exp(-pos.max()) - np.exp(-pos.min())
    assert got == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------------------
# kappa scaling

def test_kappa_scale_matches_point_shift(lattice, ctx):
    x = lattice.points
    f = LatticeFunction(lattice, np.exp(-(x**2)).astype(complex))
    g = kappa_scale(f, 1, ctx)
    assert np.allclose(g.values[g.valid], np.exp(-((Q * x[g.valid]) ** 2)))


def test_kappa_scale_inverse_shift(lattice, ctx):
    x = lattice.points
    f = LatticeFunction(lattice, (x.astype(complex)) ** 3)
    g = kappa_scale(f, -1, ctx)
    assert np.allclose(g.values[g.valid], (x[g.valid] / Q) ** 3)


def test_kappa_scale_roundtrip_interior(lattice, ctx):
    rng = np.random.default_rng(3)
    f = LatticeFunction(lattice, rng.normal(size=lattice.size) + 0j)
    back = kappa_scale(kappa_scale(f, 1, ctx), -1, ctx)
    assert np.allclose(back.values[back.valid], f.values[back.valid])
    # the outermost point of each branch never returns
    assert np.count_nonzero(~back.valid) == 2


def test_kappa_scale_rejects_incommensurate():
    lat = make_lattice(Q)
    odd = QContext(q=Q, kappa=0.77, zeta=-1)
    f = LatticeFunction(lat, np.ones(lat.size, dtype=complex))
    with pytest.raises(ValueError):
        kappa_scale(f, 1, odd)


def test_kappa_scaled_integral_jacobian(lattice, ctx):
    # int f(kappa x) d_q x = kappa**-1 int f(x) d_q x up to truncation
    x = lattice.points
    f = LatticeFunction(lattice, np.exp(-(x**2)).astype(complex))
    g = kappa_scale(f, 1, ctx)
    lhs = jackson_integral(g).real
    # integrate f over the image of the shift only
    idx, ok = lattice.shift_map(1)
    fv = f.values.copy()
    mask = np.zeros(lattice.size, dtype=bool)
    mask[idx[ok]] = True
    fv[~mask] = 0.0
    rhs = jackson_integral(LatticeFunction(lattice, fv)).real / Q
    assert lhs == pytest.approx(rhs, rel=1e-12)


# ---------------------------------------------------------------------------
# inner product properties

@st.composite
def lattice_values(draw):
    vals = draw(
        st.lists(
            st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False),
            min_size=50,
            max_size=50,
        )
    )
    return np.array(vals)


@given(lattice_values(), lattice_values())
@settings(max_examples=25, deadline=None)
def test_sesquilinear_conjugate_symmetry(a, b):
    lat = make_lattice(Q)
    f = LatticeFunction(lat, a)
    g = LatticeFunction(lat, b)
    assert sesquilinear(f, g) == pytest.approx(np.conj(sesquilinear(g, f)), abs=1e-9)


@given(lattice_values())
@settings(max_examples=25, deadline=None)
def test_sesquilinear_positivity(a):
    lat = make_lattice(Q)
    f = LatticeFunction(lat, a)
    norm2 = sesquilinear(f, f)
    assert abs(norm2.imag) < 1e-9
    assert norm2.real >= 0.0


@given(lattice_values(), lattice_values())
@settings(max_examples=25, deadline=None)
def test_sesquilinear_cauchy_schwarz(a, b):
    lat = make_lattice(Q)
    f = LatticeFunction(lat, a)
    g = LatticeFunction(lat, b)
    lhs = abs(sesquilinear(f, g)) ** 2
    rhs = sesquilinear(f, f).real * sesquilinear(g, g).real
    assert lhs <= rhs * (1 + 1e-9) + 1e-9


@given(lattice_values(), lattice_values(), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_derivative_linearity(a, b, ca, cb):
    lat = make_lattice(Q)
    ctx = braided_line(Q)
    fa = LatticeFunction(lat, a)
    fb = LatticeFunction(lat, b)
    combo = LatticeFunction(lat, ca * a + cb * b)
    d_combo = jackson_derivative(combo, ctx)
    d_split = ca * jackson_derivative(fa, ctx).values + cb * jackson_derivative(fb, ctx).values
    scale = max(1.0, np.max(np.abs(d_split)))
    assert np.allclose(d_combo.values, d_split, atol=1e-7 * scale)
