"""Product-norm inequality, frozen-pair comparison, trace ratios, the
concentration sweep, and the per-patch chain of discrete inequalities."""

import math

import numpy as np
import pytest

import fraclab as fl
from fraclab.embeddings import OK, REJECTED
from fraclab.errors import ConjugacyError, FamilyError, ParameterRangeError


def fn(dom, callable_):
    return fl.GridFunction.from_callable(dom, callable_)


# -- pointwise-conjugate product inequality ----------------------------------


def test_holder_rejects_nonconjugate_exponents(interval64):
    f = fn(interval64, lambda x: x[:, 0])
    with pytest.raises(ConjugacyError, match="not conjugate at"):
        fl.holder_check(f, f, fl.constant_field(2.0), fl.constant_field(2.0), fl.constant_field(1.5))


def test_holder_classical_pair(interval64):
    f = fn(interval64, lambda x: x[:, 0])
    g = fn(interval64, lambda x: 1.0 - x[:, 0])
    rep = fl.holder_check(f, g, fl.constant_field(2.0), fl.constant_field(2.0), fl.constant_field(1.0))
    assert rep.status == OK
    # constant exponents reduce to the classical inequality, constant 1
    assert rep.ratio <= 1.0 + 1e-12
    assert rep.product_norm <= rep.factor_norms[0] * rep.factor_norms[1] * (1.0 + 1e-12)


def test_holder_unit_functions_are_extremal(interval64):
    one = fn(interval64, lambda x: np.ones(x.shape[0]))
    p = fl.parse_field("2 + x", fl.POINT)
    q = fl.conjugate_field(p, fl.constant_field(1.0))
    rep = fl.holder_check(one, one, p, q, fl.constant_field(1.0))
    # every norm of the unit function on unit measure is exactly 1
    assert rep.ratio == 1.0


def test_holder_variable_conjugates_stay_below_split_bound(interval64):
    p = fl.parse_field("2 + x", fl.POINT)
    q = fl.parse_field("(2 + x)/(1 + x)", fl.POINT)
    r = fl.constant_field(1.0)
    for src in ["1", "x", "sin(3.141592653589793*x)", "exp(-x)", "1 + x*x"]:
        f = fl.function_on_domain(fl.parse_field(src, fl.POINT), interval64)
        g = fn(interval64, lambda x: np.cos(x[:, 0]) + 1.5)
        rep = fl.holder_check(f, g, p, q, r)
        if rep.status == OK:
            # the two-term splitting argument caps the constant at 2
            assert rep.ratio <= 2.0


def test_holder_boundary_scope(square16):
    f = fn(square16, lambda x: x[:, 0] + 1.0)
    g = fn(square16, lambda x: x[:, 1] + 1.0)
    rep = fl.holder_check(
        f, g,
        fl.constant_field(3.0, fl.BOUNDARY),
        fl.constant_field(1.5, fl.BOUNDARY),
        fl.constant_field(1.0, fl.BOUNDARY),
        scope="boundary",
    )
    assert rep.status == OK
    assert rep.ratio <= 1.0 + 1e-12


def test_holder_zero_factor(interval64):
    z = fn(interval64, lambda x: np.zeros(x.shape[0]))
    f = fn(interval64, lambda x: x[:, 0] + 1.0)
    rep = fl.holder_check(z, f, fl.constant_field(2.0), fl.constant_field(2.0), fl.constant_field(1.0))
    assert rep.status == fl.ZERO_FUNCTION
    assert rep.ratio is None


# -- frozen-pair embedding comparison ----------------------------------------


def test_embed_kernel_integral_golden():
    """(s - t) r p / (p - r) - n = 1/2 here, and the double integral of
    |x - y|^(1/2) over the unit square is 8/15."""
    dom = fl.build_interval(0.0, 1.0, 256)
    f = fn(dom, lambda x: np.sin(2.0 * np.pi * x[:, 0]))
    rep = fl.embedding_check(f, fl.constant_field(3.0, fl.PAIR), 0.5, 0.25, 2.0)
    assert abs(rep.kernel_bound - 8.0 / 15.0) < 2e-3
    assert rep.kernel_bound == pytest.approx(0.5332293318647131, rel=1e-12)
    assert not rep.zero_function
    assert math.isfinite(rep.lebesgue_ratio) and rep.lebesgue_ratio > 0
    assert math.isfinite(rep.seminorm_ratio) and rep.seminorm_ratio > 0


def test_embed_accepts_point_exponent(interval64):
    f = fn(interval64, lambda x: x[:, 0])
    rep = fl.embedding_check(f, fl.parse_field("2.5 + x/2", fl.POINT), 0.5, 0.25, 1.5)
    assert math.isfinite(rep.seminorm_ratio)


@pytest.mark.parametrize(
    "t,r,fragment",
    [
        (0.5, 2.0, "infimum of s"),   # t must sit strictly below s
        (0.6, 2.0, "infimum of s"),
        (0.25, 1.0, "infimum of p"),  # r must exceed 1
        (0.25, 3.0, "infimum of p"),  # and stay below p
    ],
)
def test_embed_parameter_range(interval64, t, r, fragment):
    f = fn(interval64, lambda x: x[:, 0])
    with pytest.raises(ParameterRangeError, match=fragment):
        fl.embedding_check(f, fl.constant_field(3.0, fl.PAIR), 0.5, t, r)


def test_embed_zero_function(interval64):
    z = fn(interval64, lambda x: np.zeros(x.shape[0]))
    rep = fl.embedding_check(z, fl.constant_field(3.0, fl.PAIR), 0.5, 0.25, 2.0)
    assert rep.zero_function
    assert rep.lebesgue_ratio == 1.0
    assert rep.seminorm_ratio == 1.0


# -- trace ratio -------------------------------------------------------------


def test_trace_unit_function_closed_form(square16):
    one = fn(square16, lambda x: np.ones(x.shape[0]))
    rep = fl.trace_check(one, fl.constant_field(2.0, fl.PAIR), fl.constant_field(1.5, fl.BOUNDARY), 0.5)
    # boundary: root of 4 (1/lam)^1.5 = 1; interior: unit norm, zero seminorm
    assert rep.full_norm == pytest.approx(1.0, rel=1e-12)
    assert rep.ratio == pytest.approx(4.0 ** (2.0 / 3.0), abs=1e-6)
    assert rep.subcritical
    assert rep.gap_k == 0.5
    assert rep.status == OK


def test_trace_supercritical_flag(square8):
    f = fn(square8, lambda x: x[:, 0] + 0.5)
    rep = fl.trace_check(f, fl.constant_field(2.0, fl.PAIR), fl.constant_field(3.0, fl.BOUNDARY), 0.5)
    assert not rep.subcritical
    assert rep.gap_k is None
    assert rep.ratio is not None


def test_trace_zero_function(square8):
    z = fn(square8, lambda x: np.zeros(x.shape[0]))
    rep = fl.trace_check(z, fl.constant_field(2.0, fl.PAIR), fl.constant_field(1.5, fl.BOUNDARY), 0.5)
    assert rep.status == fl.ZERO_FUNCTION
    assert rep.ratio is None


# -- concentration families --------------------------------------------------


def test_mollifier_profile_shape():
    z = np.array([[0.0], [0.5], [1.0], [2.0]])
    v = fl.mollifier_profile(z)
    assert v[0] == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert v[2] == 0.0 and v[3] == 0.0
    assert np.array_equal(v, fl.mollifier_profile(-z))
    assert np.all(np.diff(v) <= 0)


def test_family_values_scale_amplitude(square16):
    fam = fl.ConcentrationFamily(center=(0.5, 0.0), a=0.45, scales=(2.0,))
    f = fam.values(square16, 2.0)
    direct = 2.0**0.45 * fl.mollifier_profile(2.0 * (square16.cell_centroids - np.array([0.5, 0.0])))
    assert np.array_equal(f.interior, direct)
    # tighter bumps touch fewer cells
    assert fam.support_cells(square16, 8.0) < fam.support_cells(square16, 2.0)


def test_sweep_subcritical_control(square16):
    fam = fl.ConcentrationFamily(center=(0.5, 0.0), a=0.2, scales=(1.0, 2.0, 8.0, 64.0))
    rows = fl.sharpness_sweep(
        fam, fl.constant_field(2.0, fl.PAIR), fl.constant_field(1.5, fl.BOUNDARY), 0.5, square16
    )
    assert [r.status for r in rows] == [OK, OK, OK, REJECTED]
    # the bump at scale 64 covers no cells at this resolution
    assert rows[3].ratio is None and rows[3].boundary_norm is None
    for row in rows[:3]:
        assert row.subcritical
        assert row.ratio > 0
        assert row.case_id == "sweep"


def test_sweep_supercritical_requires_blowup_exponent(square16):
    p = fl.constant_field(2.0, fl.PAIR)
    fam = fl.ConcentrationFamily(center=(0.5, 0.0), a=0.2, scales=(2.0,))
    with pytest.raises(FamilyError, match="blow-up condition fails"):
        fl.sharpness_sweep(fam, p, fl.constant_field(3.0, fl.BOUNDARY), 0.5, square16)


def test_sweep_blowup_precondition_scoped_to_supercritical(square16):
    """The same amplitude exponent that is rejected at q = 3 must run as a
    bounded control at q = 1.5 < the critical value 2."""
    p = fl.constant_field(2.0, fl.PAIR)
    fam = fl.ConcentrationFamily(center=(0.5, 0.0), a=0.2, scales=(2.0,))
    rows = fl.sharpness_sweep(fam, p, fl.constant_field(1.5, fl.BOUNDARY), 0.5, square16)
    assert rows[0].status == OK


def test_sweep_interior_admissibility(square16):
    fam = fl.ConcentrationFamily(center=(0.5, 0.0), a=2.0, scales=(2.0,))
    with pytest.raises(FamilyError, match="interior admissibility fails"):
        fl.sharpness_sweep(
            fam, fl.constant_field(2.0, fl.PAIR), fl.constant_field(1.5, fl.BOUNDARY), 0.5, square16
        )


def test_sweep_anchor_must_touch_boundary(square16):
    fam = fl.ConcentrationFamily(center=(0.5, 0.5), a=0.2, scales=(2.0,))
    with pytest.raises(FamilyError, match="anchor ball contains no boundary samples"):
        fl.sharpness_sweep(
            fam, fl.constant_field(2.0, fl.PAIR), fl.constant_field(1.5, fl.BOUNDARY), 0.5, square16
        )


# -- frozen-exponent chain on certificate patches ----------------------------


@pytest.fixture
def canonical_cert(square16):
    p = fl.constant_field(2.0, fl.PAIR)
    q = fl.constant_field(1.5, fl.BOUNDARY)
    cert = fl.covering_partition(p, q, 0.5, square16, 0.5)
    return square16, p, cert


def test_chain_inequalities_hold_exactly(canonical_cert):
    dom, p, cert = canonical_cert
    f = fn(dom, lambda x: x[:, 0] * x[:, 1] + 0.5)
    rep = fl.proof_chain_check(f, cert, p, 0.5)
    assert rep.domain_seminorm > 0
    checked = 0
    for row in rep.rows:
        if row.status != OK:
            continue
        checked += 1
        assert row.second_exact is True
        assert row.monotone_exact is True
        assert row.mu_norm <= row.patch_seminorm <= rep.domain_seminorm
        assert row.frozen_seminorm > 0
        assert row.holder_scale > 0
        assert row.first_ratio == pytest.approx(row.frozen_seminorm / row.mu_norm, rel=1e-15)
    assert checked > 0


def test_chain_accepts_point_exponents(square16):
    """Point-arity exponents are extended by the symmetric mean, and the
    chain inequalities hold when the certificate is built for the same
    configuration (its auxiliary order then sits below s everywhere)."""
    f = fn(square16, lambda x: np.sin(x[:, 0]) + x[:, 1])
    p_pt = fl.parse_field("2 + x1/2", fl.POINT)
    s_pt = fl.parse_field("0.4 + 0.1*x2", fl.POINT)
    q = fl.constant_field(1.2, fl.BOUNDARY)
    pm = fl.extend_symmetric_mean(p_pt)
    k = fl.subcritical_gap(pm, q, s_pt, square16)
    cert = fl.covering_partition(pm, q, s_pt, square16, k)
    assert fl.verify_certificate(cert, pm, q, s_pt, square16)
    rep = fl.proof_chain_check(f, cert, p_pt, s_pt)
    assert any(r.status == OK for r in rep.rows)
    for row in rep.rows:
        if row.status == OK:
            assert row.second_exact and row.monotone_exact


def test_chain_constant_function_rows_skipped(canonical_cert):
    dom, p, cert = canonical_cert
    c = fn(dom, lambda x: np.full(x.shape[0], 2.0))
    rep = fl.proof_chain_check(c, cert, p, 0.5)
    assert rep.domain_seminorm == 0.0
    assert {r.status for r in rep.rows} == {"skipped-constant"}


def test_boundary_patch_norm(square16):
    f = fn(square16, lambda x: x[:, 0] + 1.0)
    q = fl.constant_field(1.5, fl.BOUNDARY)
    val = fl.boundary_patch_norm(f, q, square16, (0.0, -0.1), (0.5, 0.1))
    assert val is not None and val > 0
    idx = fl.facets_in_box(square16, np.array([0.0, -0.1]), np.array([0.5, 0.1]))
    from fraclab.modular import luxemburg_weighted

    want = luxemburg_weighted(
        f.boundary[idx],
        square16.facet_measures[idx],
        q.eval_points(square16.facet_centroids[idx]),
    ).lambda_star
    assert val == want
    assert fl.boundary_patch_norm(f, q, square16, (0.4, 0.4), (0.6, 0.6)) is None
