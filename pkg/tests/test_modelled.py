import math

import numpy as np
import pytest

from rsbesov import besov, modelled as md, structures as rs
from conftest import make_sin_lift

INF = math.inf

# dbar/d norm ratio of the sin lift, measured once at N=6..10 and frozen;
# the drift across refinements stays within twenty percent of this value
SIN_DBAR_RATIO = 0.99


def make_xi_md(sc, fam, N, gamma=1.25, alpha=-0.5, seed=3):
    xi = besov.synthesize("random_besov", sc, N, fam, alpha=alpha, seed=seed)
    st, model = rs.noise_structure(alpha, xi, gamma, fam)
    vals = np.zeros((*sc.grid_shape(N), st.dim))
    vals[..., st.index("Xi")] = 1.0
    return xi, st, model, md.ModelledDistribution(st, gamma, N, vals)


def test_zero_norms(sin_setup_n8):
    st, model, f = sin_setup_n8
    z = md.ModelledDistribution(st, f.gamma, f.N, np.zeros_like(f.values))
    rep = md.d_norm(z, model, 2.0, 2.0)
    assert rep.total == 0.0


def test_md_requires_gamma_off_homogeneities(sin_setup_n8):
    st, model, f = sin_setup_n8
    with pytest.raises(ValueError):
        md.ModelledDistribution(st, 2.0, f.N, np.zeros_like(f.values))


def test_md_rejects_coefficients_above_gamma(sin_setup_n8):
    st, model, f = sin_setup_n8
    vals = np.zeros_like(f.values)
    vals[..., st.index("X^2")] = 1.0
    with pytest.raises(ValueError):
        md.ModelledDistribution(st, 1.5, f.N, vals)


def test_sin_lift_translation_bounded_with_slope(sin_setup_n8):
    st, model, f = sin_setup_n8
    rep = md.d_norm(f, model, INF, INF)
    # normalized terms stay bounded across levels
    for z, arr in rep.translation.items():
        assert arr.max() <= arr[0] + 1e-9 or arr.max() < 25.0
    # raw numerator at the function level decays at least like 2^{-n gamma}
    assert rep.translation_slope(0.0) >= f.gamma - 0.1


def test_xi_translation_vanishes_at_alpha(sc1, fam6):
    xi, st, model, f = make_xi_md(sc1, fam6, 8)
    rep = md.d_norm(f, model, 2.0, INF)
    np.testing.assert_allclose(rep.translation[-0.5], 0.0, atol=1e-14)


def test_norm_homogeneity_and_triangle(sin_setup_n8):
    st, model, f = sin_setup_n8
    n1 = md.d_norm(f, model, 2.0, 2.0).total
    n3 = md.d_norm(f.scaled(-3.0), model, 2.0, 2.0).total
    assert n3 == pytest.approx(3.0 * n1, rel=1e-12)
    g = f.scaled(0.7)
    nfg = md.d_norm(f.plus(g), model, 2.0, 2.0).total
    assert nfg <= n1 + md.d_norm(g, model, 2.0, 2.0).total + 1e-9


def test_average_of_constants(sin_setup_n8):
    st, model, f = sin_setup_n8
    vals = np.zeros_like(f.values)
    vals[..., st.index("1")] = 1.5
    cf = md.ModelledDistribution(st, f.gamma, f.N, vals)
    fbar = md.average(cf, model)
    for lv in fbar.levels:
        np.testing.assert_allclose(lv[..., st.index("1")], 1.5, atol=1e-12)
        assert np.max(np.abs(lv[..., st.index("X^1")])) < 1e-12
    back, _ = md.unaverage(fbar, model)
    assert np.max(np.abs(back.values - cf.values)) < 1e-12


def test_average_of_xi_is_constant(sc1, fam6):
    xi, st, model, f = make_xi_md(sc1, fam6, 7)
    fbar = md.average(f, model)
    for lv in fbar.levels:
        np.testing.assert_allclose(lv[..., st.index("Xi")], 1.0, atol=1e-13)
    back, _ = md.unaverage(fbar, model)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_average_matches_quadrature_of_sin(sin_setup_n8):
    # the function-level component of the average is the plain ball average
    st, model, f = sin_setup_n8
    fbar = md.average(f, model)
    n = 5
    N = f.N
    x = 0.25
    r = 2 ** (N - n)
    idx = (np.arange(-r, r + 1) + int(x * 2**N)) % 2**N
    pts = idx / 2**N
    # transported function component: sin(y) - (y-x) f_1 ... evaluated exactly
    y = np.where(pts - x > 0.5, pts - 1.0, np.where(pts - x < -0.5, pts + 1.0, pts))
    vals = (
        np.sin(2 * np.pi * y)
        + (x - y) * 2 * np.pi * np.cos(2 * np.pi * y)
        + (x - y) ** 2 * (-(2 * np.pi) ** 2) * np.sin(2 * np.pi * y) / 2.0
    )
    want = np.mean(vals)
    got = fbar.levels[n][int(x * 2**n), st.index("1")]
    assert abs(got - want) < 1e-8


def test_average_linear(sin_setup_n8):
    st, model, f = sin_setup_n8
    g = f.scaled(-0.3)
    ab = md.average(f.plus(g), model)
    a = md.average(f, model)
    b = md.average(g, model)
    for la, lb, lab in zip(a.levels, b.levels, ab.levels):
        np.testing.assert_allclose(lab, la + lb, atol=1e-12)


def test_roundtrip_convergence_orders(sc1, fam6):
    st, model, f = make_sin_lift(sc1, fam6, 10)
    fbar = md.average(f, model)
    back, rep = md.unaverage(fbar, model, p=2.0)
    assert np.max(np.abs(back.values - f.values)) == 0.0
    for z in st.sectors_below(f.gamma):
        assert rep.slopes[z] >= f.gamma - z - 0.1


def test_dbar_zero_and_constants(sin_setup_n8):
    st, model, f = sin_setup_n8
    vals = np.zeros_like(f.values)
    vals[..., st.index("1")] = 2.0
    cf = md.ModelledDistribution(st, f.gamma, f.N, vals)
    rep = md.dbar_norm(md.average(cf, model), model, INF, INF)
    for z in rep.translation:
        assert np.max(rep.translation[z]) < 1e-12
        assert np.max(rep.consistency[z]) < 1e-12


def test_dbar_vs_d_ratio_frozen(sc1, fam6):
    ratios = []
    for N in (6, 8, 10):
        st, model, f = make_sin_lift(sc1, fam6, N)
        dn = md.d_norm(f, model, INF, INF).total
        dbn = md.dbar_norm(md.average(f, model), model, INF, INF).total
        ratios.append(dbn / dn)
    for r in ratios:
        assert abs(r - SIN_DBAR_RATIO) <= 0.2 * SIN_DBAR_RATIO
    assert max(ratios) <= 1.2 * min(ratios)


def test_distance_identical_zero(sin_setup_n8):
    st, model, f = sin_setup_n8
    rep = md.md_distance(f, model, f, model, 2.0, 2.0)
    assert rep.total == 0.0


def test_distance_to_zero_is_norm(sin_setup_n8):
    st, model, f = sin_setup_n8
    z = md.ModelledDistribution(st, f.gamma, f.N, np.zeros_like(f.values))
    dist = md.md_distance(f, model, z, model, 2.0, 2.0)
    norm = md.d_norm(f, model, 2.0, 2.0)
    assert dist.total == pytest.approx(norm.total, rel=1e-12)


def test_distance_symmetry(sin_setup_n8):
    st, model, f = sin_setup_n8
    g = f.scaled(0.5)
    d1 = md.md_distance(f, model, g, model, 2.0, 2.0).total
    d2 = md.md_distance(g, model, f, model, 2.0, 2.0).total
    assert d1 == pytest.approx(d2, rel=1e-13)


def test_restriction_property(sin_setup_n8):
    st, model, f = sin_setup_n8
    g = f.restrict(1.5)
    rep = md.d_norm(g, model, 2.0, 2.0)
    base = md.d_norm(f, model, 2.0, 2.0)
    local_sum = sum(base.local.values())
    assert rep.total <= 40.0 * (base.total + local_sum)
    # restriction never increases any local term
    for z, v in rep.local.items():
        assert v <= base.local[z] + 1e-12


def test_local_propagation(sc1, fam6):
    st, model, f = make_sin_lift(sc1, fam6, 8)
    rep = md.check_local_propagation(md.average(f, model), model, INF, INF)
    assert rep.max_K() <= 10.0
    # constants: equality with a vanishing K-term
    vals = np.zeros_like(f.values)
    vals[..., st.index("1")] = 1.0
    cf = md.ModelledDistribution(st, f.gamma, f.N, vals)
    crep = md.check_local_propagation(md.average(cf, model), model, INF, INF)
    assert crep.max_K() == 0.0


def test_local_propagation_random_ensemble(sc1, fam6):
    st, model, _ = make_sin_lift(sc1, fam6, 6)
    rng = np.random.default_rng(0)
    for _ in range(5):
        levels = []
        prev = None
        for n in range(7):
            if prev is None:
                lv = rng.uniform(-1, 1, (1, st.dim))
            else:
                up = np.repeat(prev, 2, axis=0)
                decay = np.array(
                    [2.0 ** (-n * (2.5 - s.zeta)) for s in st.symbols]
                )
                lv = up + rng.uniform(-1, 1, (2**n, st.dim)) * decay
            levels.append(lv)
            prev = lv
        fbar = md.AveragedMD(st, 2.5, 6, levels)
        rep = md.check_local_propagation(fbar, model, 2.0, INF)
        for z, K in rep.required_K.items():
            assert np.isfinite(K) and K < 50.0
