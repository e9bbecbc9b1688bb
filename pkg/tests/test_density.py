import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarkit.bec_exact import evolve_joint
from polarkit.channels import ChannelModel, llr_density
from polarkit.density import (
    JointLlrDensity,
    LlrDensity,
    NumericGuardError,
    QuantizationSpec,
    bhattacharyya,
    boxplus,
    chk_conv,
    erasure_mass,
    error_prob,
    joint_conv,
    joint_density_evolution,
    joint_event_probs,
    var_conv,
)

Q = QuantizationSpec()
SMALL = QuantizationSpec(0.25, 4.0)
INF = math.inf


def bec(eps, q=Q):
    return LlrDensity.from_atoms(q, [(0.0, eps), (INF, 1.0 - eps)])


@st.composite
def densities(draw, q=SMALL, atoms=True):
    """Random densities on a small grid, with optional infinite atoms."""
    slots = q.size + 2 if atoms else q.size
    picks = draw(st.lists(st.integers(0, slots - 1), min_size=1, max_size=6, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(picks), max_size=len(picks)))
    mass = np.zeros(q.size + 2)
    offset = 0 if atoms else 1
    mass[np.array(picks) + offset] = weights
    return LlrDensity(q, mass / mass.sum())


# ---------------------------------------------------------------------------
# quantization and boxplus


def test_quantize_ties_toward_zero_and_saturation():
    q = SMALL
    vals = q.extended_values
    assert vals[q.quantize(0.125)] == 0.0
    assert vals[q.quantize(-0.125)] == 0.0
    assert vals[q.quantize(0.375)] == 0.25
    assert vals[q.quantize(-0.375)] == -0.25
    assert vals[q.quantize(0.126)] == 0.25
    assert vals[q.quantize(4.1)] == 4.0
    assert q.quantize(4.2) == q.size + 1
    assert q.quantize(-4.2) == 0
    assert q.quantize(4.125) == q.size  # rounds to +4, stays on the grid
    with pytest.raises(NumericGuardError):
        q.quantize(math.nan)


def test_quantization_spec_validation():
    with pytest.raises(ValueError):
        QuantizationSpec(0.3, 1.0)
    with pytest.raises(ValueError):
        QuantizationSpec(0.0, 1.0)
    assert QuantizationSpec().size == 1281


def test_boxplus_matches_tanh_rule():
    rng = np.random.default_rng(3)
    a, b = rng.uniform(-12, 12, (2, 500))
    ref = 2 * np.arctanh(np.tanh(a / 2) * np.tanh(b / 2))
    assert np.allclose(boxplus(a, b), ref, atol=1e-9)


def test_boxplus_special_values():
    assert boxplus(INF, 3.0) == 3.0
    assert boxplus(-INF, 3.0) == -3.0
    assert boxplus(INF, -INF) == -INF
    assert boxplus(0.0, INF) == 0.0
    assert boxplus(800.0, 900.0) == pytest.approx(800.0)


# ---------------------------------------------------------------------------
# variable convolution


def test_var_conv_bec():
    out = var_conv(bec(0.3), bec(0.3))
    assert out.is_bec_closed()
    assert erasure_mass(out) == pytest.approx(0.09, abs=1e-15)
    assert out.atom_pos_inf == pytest.approx(0.91, abs=1e-15)


def test_var_conv_bsc_by_hand():
    a = llr_density(ChannelModel.bsc(0.1))
    m = a.support()[1][0]
    out = var_conv(a, a)
    got = dict(out.support())
    assert set(got) == {-2 * m, 0.0, 2 * m}
    assert got[2 * m] == pytest.approx(0.81, abs=1e-15)
    assert got[0.0] == pytest.approx(0.18, abs=1e-15)
    assert got[-2 * m] == pytest.approx(0.01, abs=1e-15)


@given(densities(atoms=False))
def test_var_conv_infinity_absorbs_finite(b):
    out = var_conv(LlrDensity.point(b.quant, INF), b)
    assert out.atom_pos_inf == pytest.approx(1.0 - b.atom_neg_inf, abs=1e-12)
    assert out.support() == [(INF, out.atom_pos_inf)]


@given(densities())
def test_var_conv_infinity_clash_splits(b):
    out = var_conv(LlrDensity.point(b.quant, INF), b)
    # a -inf partner meets +inf: half of that mass goes to each atom
    assert out.atom_pos_inf == pytest.approx(1.0 - 0.5 * b.atom_neg_inf, abs=1e-12)
    assert out.atom_neg_inf == pytest.approx(0.5 * b.atom_neg_inf, abs=1e-12)


@given(densities())
def test_var_conv_zero_point_is_identity(a):
    assert var_conv(LlrDensity.point(a.quant, 0.0), a).array_equal(a)


# ---------------------------------------------------------------------------
# check convolution


def test_chk_conv_bec():
    out = chk_conv(bec(0.3), bec(0.3))
    assert out.is_bec_closed()
    assert erasure_mass(out) == pytest.approx(2 * 0.3 - 0.09, abs=1e-15)
    assert out.atom_pos_inf == pytest.approx(0.49, abs=1e-15)


@given(densities())
def test_chk_conv_identity(a):
    assert chk_conv(LlrDensity.point(a.quant, INF), a).array_equal(a)


def test_chk_conv_absorbing_zero():
    q = SMALL
    a = LlrDensity.from_atoms(q, [(-1.0, 0.25), (0.5, 0.25), (INF, 0.5)])
    assert chk_conv(LlrDensity.point(q, 0.0), a).array_equal(LlrDensity.point(q, 0.0))


@given(densities())
def test_chk_conv_absorbing_zero_any(a):
    out = chk_conv(LlrDensity.point(a.quant, 0.0), a)
    assert out.is_bec_closed() and out.atom_pos_inf == 0.0
    assert erasure_mass(out) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# algebraic invariants


@given(densities(), densities())
def test_commutativity_bitwise(a, b):
    assert np.array_equal(var_conv(a, b).mass, var_conv(b, a).mass)
    assert np.array_equal(chk_conv(a, b).mass, chk_conv(b, a).mass)


@given(densities(), densities())
def test_mass_conservation(a, b):
    assert abs(var_conv(a, b).total - 1.0) < 1e-10
    assert abs(chk_conv(a, b).total - 1.0) < 1e-10


@given(st.floats(0, 1), st.floats(0, 1))
def test_bec_closure(e1, e2):
    for out in (var_conv(bec(e1), bec(e2)), chk_conv(bec(e1), bec(e2))):
        assert out.is_bec_closed()
        assert error_prob(out) == 0.5 * erasure_mass(out)


def symmetric_atoms(q, points):
    """Symmetric density with one pair of atoms at +/-x for each grid point x."""
    atoms = []
    for x, w in points:
        atoms += [(x, w / (1 + math.exp(-x))), (-x, w / (1 + math.exp(x)))]
    return LlrDensity.from_atoms(q, atoms)


def symmetry_defect(a):
    grid = a.quant.grid
    m = a.bin_mass
    return m - np.exp(grid) * m[::-1]


@pytest.mark.parametrize("points", [[(1.0, 1.0)], [(0.5, 0.3), (2.0, 0.7)], [(0.25, 0.5), (3.0, 0.5)]])
def test_symmetry_preserved(points):
    a = symmetric_atoms(Q, points)
    assert np.max(np.abs(symmetry_defect(a))) < 1e-12
    assert np.max(np.abs(symmetry_defect(var_conv(a, a)))) < 1e-9
    c = chk_conv(a, a)
    bound = c.bin_mass * (math.exp(Q.step) - 1.0)
    assert np.all(np.abs(symmetry_defect(c)) <= bound + 1e-12)
    bec_like = bec(0.4)
    assert np.max(np.abs(symmetry_defect(var_conv(bec_like, bec_like)))) == 0.0


# ---------------------------------------------------------------------------
# functionals


def test_error_prob_examples():
    assert error_prob(LlrDensity.point(Q, INF)) == 0.0
    assert error_prob(LlrDensity.point(Q, 0.0)) == 0.5
    assert error_prob(bec(0.3)) == 0.15


def test_bhattacharyya_examples():
    assert bhattacharyya(LlrDensity.point(Q, 0.0)) == 1.0
    assert bhattacharyya(bec(0.3)) == pytest.approx(0.3, abs=1e-15)
    # grid rounding moves the atoms from log 9 to the nearest multiple of 1/16
    assert bhattacharyya(llr_density(ChannelModel.bsc(0.1))) == pytest.approx(0.6, abs=1e-4)
    fine = QuantizationSpec(2.0**-12, 8.0)
    assert bhattacharyya(llr_density(ChannelModel.bsc(0.1), fine)) == pytest.approx(0.6, abs=1e-7)


def test_bhattacharyya_rejects_negative_infinity():
    a = LlrDensity.from_atoms(Q, [(-INF, 0.01), (INF, 0.99)])
    with pytest.raises(NumericGuardError):
        bhattacharyya(a)


def test_mean_guard():
    with pytest.raises(NumericGuardError):
        bec(0.5).mean()


def test_dump_round_trip():
    for ch in [ChannelModel.bec(0.2), ChannelModel.bsc(0.1), ChannelModel.biawgn(1.0)]:
        a = llr_density(ch)
        b = LlrDensity.loads(a.dumps(), Q)
        assert b.array_equal(a)
    text = bec(0.5).dumps()
    assert text.splitlines() == ["0.0\t0.5", "+inf\t0.5"]


def test_density_validation():
    with pytest.raises(ValueError):
        LlrDensity(Q, np.zeros(5))
    m = np.zeros(Q.size + 2)
    m[0] = -1
    with pytest.raises(ValueError):
        LlrDensity(Q, m)
    with pytest.raises(ValueError):
        var_conv(bec(0.1), bec(0.1, SMALL))


# ---------------------------------------------------------------------------
# joint densities

JQ = QuantizationSpec.joint_default()


def test_joint_event_probs_examples():
    zero = LlrDensity.point(JQ, 0.0)
    assert joint_event_probs(JointLlrDensity.product(zero, zero)) == (0.25, 0.25, 0.25, 0.25)
    inf = LlrDensity.point(JQ, INF)
    assert joint_event_probs(JointLlrDensity.product(inf, inf)) == (0.0, 0.0, 0.0, 1.0)
    for eps in (0.1, 0.5, 0.9):
        p_ee = joint_event_probs(JointLlrDensity.diagonal(bec(eps, JQ)))[0]
        assert p_ee == pytest.approx(eps / 4, abs=1e-15)


def test_joint_vv_diagonal_bec():
    out = joint_conv(JointLlrDensity.diagonal(bec(0.3, JQ)), "VV")
    z, top = JQ.zero_index, JQ.size + 1
    assert np.count_nonzero(out.mass) == 2
    assert out.mass[z, z] == pytest.approx(0.09, abs=1e-15)
    assert out.mass[top, top] == pytest.approx(0.91, abs=1e-15)


def test_joint_cv_matches_exact_pair():
    out = joint_conv(JointLlrDensity.diagonal(bec(0.5, JQ)), "CV")
    z, top = JQ.zero_index, JQ.size + 1
    exact = evolve_joint(0.5, 1, 1, 2)
    assert exact.as_tuple() == (0.25, 0.5, 0.0, 0.25)
    got = (out.mass[z, z], out.mass[z, top], out.mass[top, z], out.mass[top, top])
    assert np.allclose(got, exact.as_tuple(), atol=1e-15)
    assert abs(out.total - 1.0) < 1e-8


@st.composite
def joint_densities(draw, q=SMALL):
    n = q.size + 2
    cells = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=1, max_size=5, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(cells), max_size=len(cells)))
    mass = np.zeros((n, n))
    for (x, y), w in zip(cells, weights):
        mass[x, y] = w
    return JointLlrDensity(q, mass / mass.sum())


RULES = {"V": var_conv, "C": chk_conv}


@settings(max_examples=40, deadline=None)
@given(joint_densities(), st.sampled_from(["VV", "VC", "CV", "CC"]))
def test_joint_marginals_commute(j, mode):
    out = joint_conv(j, mode)
    assert abs(out.total - 1.0) < 1e-8
    mx, my = j.marginal_x(), j.marginal_y()
    assert np.allclose(out.marginal_x().mass, RULES[mode[0]](mx, mx).mass, atol=1e-12)
    assert np.allclose(out.marginal_y().mass, RULES[mode[1]](my, my).mass, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_joint_density_evolution_reproduces_bec_pairs(n):
    base = bec(0.4, JQ)
    z, top = JQ.zero_index, JQ.size + 1
    cache = {}
    for i in range(1, (1 << n) + 1):
        for j in range(1, (1 << n) + 1):
            d = joint_density_evolution(base, n, i, j, cache)
            got = (d.mass[z, z], d.mass[z, top], d.mass[top, z], d.mass[top, top])
            assert np.allclose(got, evolve_joint(0.4, n, i, j).as_tuple(), atol=1e-12)
