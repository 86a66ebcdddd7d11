"""Tests for level-set extraction, box counting, and capacity diagnostics.

Oracles: closed-form zero sets of single sine modes, brute-force lattice and
double-sum loops at small sizes, exact quadrature of Gaussian masses against
scipy.integrate, and hand-built saddle configurations for the marching
squares disambiguation rule.
"""

import numpy as np
import pytest
import scipy.integrate

from levelset_lab.fractal import (
    BoxCountCurve,
    LevelSet,
    box_count,
    covariance_det_check,
    estimate_dimension,
    extract_level_set,
    frostman_energy,
    frostman_energy_diagonal_bound,
    frostman_mass,
    frostman_n_max,
    h_gamma,
    occupation_fraction,
    sin_sum,
    structure_function_empirical,
    torus_distance,
)
from levelset_lab.linear import ModelParams, sample_exact, structure_function_analytic
from levelset_lab.noise import SeedSpec
from levelset_lab.spectral import (
    GridField,
    TORUS_AREA,
    grid_axis,
    mode_set,
    synthesize,
)


def sine_field(resolution: int) -> GridField:
    ax = grid_axis(resolution)
    return GridField(np.sin(ax)[:, None] + 0.0 * ax[None, :])


def random_band_field(resolution: int, radius: int, seed: int) -> GridField:
    """Band-limited random field, rough enough to exercise all 14 configs."""
    modes = mode_set(radius)
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=modes.k.shape[0]) * modes.ksq ** (-0.8)
    from levelset_lab.spectral import SpectralField

    return synthesize(SpectralField(modes, coeffs), resolution)


def bilinear(g: GridField, p: np.ndarray) -> float:
    """Periodic bilinear interpolation; linear along cell edges."""
    h = g.cell_size
    u = (p[0] + np.pi) / h
    v = (p[1] + np.pi) / h
    i0, j0 = int(np.floor(u)), int(np.floor(v))
    fu, fv = u - i0, v - j0
    n = g.resolution
    i0 %= n
    j0 %= n
    i1, j1 = (i0 + 1) % n, (j0 + 1) % n
    vals = g.values
    return float(
        vals[i0, j0] * (1 - fu) * (1 - fv)
        + vals[i1, j0] * fu * (1 - fv)
        + vals[i0, j1] * (1 - fu) * fv
        + vals[i1, j1] * fu * fv
    )


# ---------------------------------------------------------------------------
# Torus metric


def test_torus_distance_wraps():
    assert torus_distance(np.array([2.0 * np.pi - 0.1, 0.0])) == pytest.approx(0.1)
    assert torus_distance(np.array([0.0, -2.0 * np.pi + 0.3])) == pytest.approx(0.3)
    r = np.array([[0.2, 0.0], [np.pi, np.pi]])
    d = torus_distance(r)
    assert d[0] == pytest.approx(0.2)
    assert d[1] == pytest.approx(np.pi * np.sqrt(2.0))


# ---------------------------------------------------------------------------
# Level-set extraction


def test_constant_field_empty():
    g = GridField(np.full((32, 32), 1.7))
    ls = extract_level_set(g, 0.3)
    assert ls.is_empty
    assert ls.segments.shape == (0, 2, 2)
    assert ls.crossing_cells.shape == (0, 2)


def test_level_above_max_empty():
    g = sine_field(64)
    assert extract_level_set(g, 2.0).is_empty
    assert extract_level_set(g, -2.0).is_empty


def test_sine_zero_set_two_lines():
    g = sine_field(256)
    ls = extract_level_set(g, 0.0)
    # zero set of sin(x1): the lines x1 = 0 and x1 = +-pi (identified)
    cols = np.unique(ls.crossing_cells[:, 0])
    assert cols.size == 2
    assert ls.crossing_cells.shape[0] == 2 * 256
    assert ls.total_length() == pytest.approx(4.0 * np.pi, rel=1e-12)
    # every segment is vertical (constant x1)
    assert np.max(np.abs(ls.segments[:, 0, 0] - ls.segments[:, 1, 0])) < 1e-9


def test_endpoints_interpolate_to_level():
    g = random_band_field(64, 9, seed=5)
    scale = float(np.max(np.abs(g.values)))
    for y in (0.0, 0.4 * scale, -0.3 * scale):
        ls = extract_level_set(g, y)
        assert not ls.is_empty
        for seg in ls.segments[::7]:
            for p in seg:
                assert abs(bilinear(g, p) - y) < 1e-12 * max(scale, 1.0)


def test_crossing_cells_match_segments():
    g = random_band_field(64, 9, seed=12)
    for y in (0.0, 0.25):
        ls = extract_level_set(g, y)
        h = g.cell_size
        mids = 0.5 * (ls.segments[:, 0, :] + ls.segments[:, 1, :])
        cells = np.floor((mids + np.pi) / h).astype(np.int64) % 64
        recovered = np.unique(cells, axis=0)
        np.testing.assert_array_equal(recovered, ls.crossing_cells)


def test_crossing_cells_sorted_unique():
    g = random_band_field(32, 6, seed=3)
    ls = extract_level_set(g, 0.1)
    cells = ls.crossing_cells
    order = np.lexsort((cells[:, 1], cells[:, 0]))
    np.testing.assert_array_equal(order, np.arange(cells.shape[0]))


def test_saddle_center_rule():
    # Checkerboard +3/-1: every cell is a saddle with center mean +1 >= 0,
    # so the contour cuts off the two negative corners: two short segments
    # per cell, each at interpolation parameter 3/4 from the positive corner.
    n = 8
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    vals = np.where((ii + jj) % 2 == 0, 3.0, -1.0)
    ls = extract_level_set(GridField(vals), 0.0)
    assert ls.segments.shape[0] == 2 * n * n
    assert ls.crossing_cells.shape[0] == n * n
    h = 2.0 * np.pi / n
    lengths = np.linalg.norm(ls.segments[:, 1] - ls.segments[:, 0], axis=1)
    np.testing.assert_allclose(lengths, 0.25 * np.sqrt(2.0) * h, rtol=1e-12)

    # Flip the center: +1/-3 checkerboard has negative centers, so the
    # contour cuts off the two positive corners instead; still 2 segments
    # per cell but now at parameter 1/4 from the positive corner.
    vals2 = np.where((ii + jj) % 2 == 0, 1.0, -3.0)
    ls2 = extract_level_set(GridField(vals2), 0.0)
    assert ls2.segments.shape[0] == 2 * n * n
    lengths2 = np.linalg.norm(ls2.segments[:, 1] - ls2.segments[:, 0], axis=1)
    np.testing.assert_allclose(lengths2, 0.25 * np.sqrt(2.0) * h, rtol=1e-12)
    # distinguish the branches by where endpoints sit: for +3/-1 the segment
    # midpoints hug the negative corners; for +1/-3 the positive ones.
    axis = grid_axis(n)
    corners_pos = np.stack(
        [axis[ii[(ii + jj) % 2 == 0]], axis[jj[(ii + jj) % 2 == 0]]], axis=1
    )
    mids1 = 0.5 * (ls.segments[:, 0] + ls.segments[:, 1])
    d1 = np.min(torus_distance(mids1[:, None, :] - corners_pos[None, :, :]), axis=1)
    mids2 = 0.5 * (ls2.segments[:, 0] + ls2.segments[:, 1])
    d2 = np.min(torus_distance(mids2[:, None, :] - corners_pos[None, :, :]), axis=1)
    # +3/-1: midpoints far from positive corners; +1/-3: near them
    assert np.min(d1) > 0.5 * h
    assert np.max(d2) < 0.5 * h


def test_level_set_validation():
    with pytest.raises(ValueError, match="crossing_cells"):
        LevelSet(0.0, 16, np.zeros((3, 3), dtype=int), np.empty((0, 2, 2)))
    with pytest.raises(ValueError, match="segments"):
        LevelSet(0.0, 16, np.zeros((0, 2), dtype=int), np.empty((0, 4)))
    with pytest.raises(ValueError, match="out of range"):
        LevelSet(0.0, 16, np.array([[0, 16]]), np.empty((0, 2, 2)))
    with pytest.raises(ValueError, match="finite"):
        extract_level_set(sine_field(16), np.nan)


# ---------------------------------------------------------------------------
# Box counting


def test_box_count_empty_zero():
    ls = LevelSet(0.0, 64, np.empty((0, 2), dtype=np.int64), np.empty((0, 2, 2)))
    curve = box_count(ls)
    assert np.all(curve.counts == 0)
    np.testing.assert_array_equal(curve.ks, np.arange(0, 5))


def test_box_count_window_refused_with_bound():
    ls = LevelSet(0.0, 64, np.empty((0, 2), dtype=np.int64), np.empty((0, 2, 2)))
    with pytest.raises(ValueError, match="resolution >= 512"):
        box_count(ls, k_range=(0, 7))
    with pytest.raises(ValueError, match="bad scale range"):
        box_count(ls, k_range=(3, 2))


def test_box_count_single_cell():
    ls = LevelSet(0.0, 64, np.array([[13, 57]]), np.empty((0, 2, 2)))
    curve = box_count(ls)
    assert np.all(curve.counts == 1)


def test_box_count_curve_validation():
    with pytest.raises(ValueError, match="nondecreasing"):
        BoxCountCurve(np.array([0, 1, 2]), np.array([1, 4, 2]), 64)
    with pytest.raises(ValueError, match=r"\[0, 4\^k\]"):
        BoxCountCurve(np.array([0, 1]), np.array([1, 5]), 64)
    with pytest.raises(ValueError, match="strictly increasing"):
        BoxCountCurve(np.array([1, 1]), np.array([1, 1]), 64)


def test_estimate_dimension_window_rule():
    ls = LevelSet(0.0, 256, np.array([[0, j] for j in range(256)]), np.empty((0, 2, 2)))
    est = estimate_dimension(box_count(ls))
    assert est.window == (2, 6)
    assert est.n_scales == 5
    assert est.dimension == pytest.approx(1.0, abs=1e-12)
    assert est.stderr == pytest.approx(0.0, abs=1e-12)
    assert est.fit_residual < 1e-12


def test_estimate_dimension_insufficient_scales():
    ls = LevelSet(0.0, 32, np.array([[0, 0]]), np.empty((0, 2, 2)))
    with pytest.raises(ValueError, match="usable scales"):
        estimate_dimension(box_count(ls))
    # empty set: counts all zero -> no usable scales either
    empty = LevelSet(0.0, 256, np.empty((0, 2), dtype=np.int64), np.empty((0, 2, 2)))
    with pytest.raises(ValueError, match="usable scales"):
        estimate_dimension(box_count(empty))


# ---------------------------------------------------------------------------
# Empirical structure function


def test_structure_function_zero_lag_and_errors():
    fields = [random_band_field(32, 4, seed=s) for s in range(50)]
    h = fields[0].cell_size
    est = structure_function_empirical(fields, [(0.0, 0.0), (h, 0.0)])
    assert est.values[0] == 0.0
    assert est.values[1] > 0.0
    with pytest.raises(ValueError, match="at least 50"):
        structure_function_empirical(fields[:10], [(h, 0.0)])
    with pytest.raises(ValueError, match="integer multiple"):
        structure_function_empirical(fields, [(0.5 * h, 0.0)])
    mixed = fields[:-1] + [random_band_field(64, 4, seed=0)]
    with pytest.raises(ValueError, match="one resolution"):
        structure_function_empirical(mixed, [(h, 0.0)])


def test_structure_function_matches_analytic_series():
    params = ModelParams()
    radius, res, t = 24, 64, 1.0
    modes = mode_set(radius)
    fields = [
        synthesize(sample_exact(params, modes, t, SeedSpec(77, r)), res)
        for r in range(120)
    ]
    h = fields[0].cell_size
    lags = np.array([(h, 0.0), (0.0, 2 * h), (3 * h, 3 * h), (8 * h, 0.0), (0.0, 16 * h)])
    est = structure_function_empirical(fields, lags)
    # oracle: the analytic series at the experiment's own truncation radius
    exact = structure_function_analytic(
        params, lags, t, cutoff=radius, tail_correction=False
    )
    np.testing.assert_allclose(est.values, exact, rtol=0.05)
    assert est.n_samples == 120
    assert np.isfinite(est.slope)
    assert est.slope > 0


# ---------------------------------------------------------------------------
# Sin-sum lemma oracle


def sin_sum_direct(x, gamma, cutoff):
    total = 0.0
    for k1 in range(-cutoff, cutoff + 1):
        for k2 in range(-cutoff, cutoff + 1):
            ksq = k1 * k1 + k2 * k2
            if ksq == 0 or ksq > cutoff * cutoff:
                continue
            total += ksq ** (-0.5 * (2.0 + gamma)) * np.sin(k1 * x[0] + k2 * x[1]) ** 2
    return total


def test_sin_sum_matches_direct_loop():
    x = np.array([0.3, -0.7])
    for gamma in (0.5, 1.0, 1.9, 3.0):
        assert sin_sum(x, gamma, d=2, cutoff=12) == pytest.approx(
            sin_sum_direct(x, gamma, 12), rel=1e-13
        )


def test_sin_sum_one_dimensional():
    x, gamma, cutoff = 0.47, 1.2, 40
    direct = 2.0 * sum(
        k ** (-1.0 - gamma) * np.sin(k * x) ** 2 for k in range(1, cutoff + 1)
    )
    assert sin_sum(x, gamma, d=1, cutoff=cutoff) == pytest.approx(direct, rel=1e-13)


def test_sin_sum_zero_and_validation():
    assert sin_sum(np.zeros(2), 1.0, cutoff=8) == 0.0
    with pytest.raises(ValueError, match="gamma"):
        sin_sum(np.array([0.1, 0.1]), 0.0)
    with pytest.raises(ValueError, match="d must be"):
        sin_sum(np.array([0.1, 0.1]), 1.0, d=3)
    with pytest.raises(ValueError, match="2-vector"):
        sin_sum(np.array([0.1, 0.1, 0.1]), 1.0, d=2)


def test_sin_sum_band_gamma_one():
    # Lemma: sum ~ h_gamma; the ratio stays in a narrow band across scales.
    rng = np.random.default_rng(2)
    ratios = []
    for r in np.geomspace(0.02, 0.5, 8):
        a = rng.uniform(0.0, 2.0 * np.pi)
        x = r * np.array([np.cos(a), np.sin(a)])
        ratios.append(sin_sum(x, 1.0, cutoff=512) / h_gamma(x, 1.0))
    assert max(ratios) / min(ratios) < 10.0
    assert max(ratios) / min(ratios) < 1.5  # measured band is much tighter


def test_h_gamma_values():
    assert h_gamma(np.zeros(2), 1.3) == 0.0
    r = 0.2
    x = np.array([r, 0.0])
    assert h_gamma(x, 0.5) == pytest.approx(r**0.5)
    assert h_gamma(x, 1.7) == pytest.approx(r**1.7)
    assert h_gamma(x, 2.0) == pytest.approx(-(r**2) * np.log(r))
    assert h_gamma(x, 3.0) == pytest.approx(r**2)


# ---------------------------------------------------------------------------
# Frostman mass


def test_frostman_mass_constant_field():
    g = GridField(np.full((32, 32), 0.7))
    for n in (10.0, 1e4, 1e8):
        assert frostman_mass(g, 0.7, n) == pytest.approx(
            np.sqrt(2.0 * np.pi * n) * TORUS_AREA, rel=1e-14
        )
    assert frostman_n_max(g) == np.inf


def test_frostman_mass_sine_quadrature():
    g = sine_field(512)
    for n in (10.0, 100.0):
        exact = (
            np.sqrt(2.0 * np.pi * n)
            * scipy.integrate.quad(
                lambda x: np.exp(-0.5 * n * np.sin(x) ** 2), -np.pi, np.pi
            )[0]
            * 2.0
            * np.pi
        )
        assert frostman_mass(g, 0.0, n) == pytest.approx(exact, rel=1e-12)


def test_frostman_mass_resolution_guard():
    g = sine_field(64)
    n_max = frostman_n_max(g)
    assert frostman_mass(g, 0.0, 0.99 * n_max) > 0
    with pytest.raises(ValueError, match="n_max"):
        frostman_mass(g, 0.0, 1.01 * n_max)
    with pytest.raises(ValueError, match="positive"):
        frostman_mass(g, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Frostman energy


def brute_force_energy(g, y, n, gamma):
    res = g.resolution
    h = g.cell_size
    w = np.sqrt(2.0 * np.pi * n) * np.exp(-0.5 * n * (g.values - y) ** 2) * h * h
    total = 0.0
    for i1 in range(res):
        for j1 in range(res):
            for i2 in range(res):
                for j2 in range(res):
                    if i1 == i2 and j1 == j2:
                        continue
                    d1 = min(abs(i1 - i2), res - abs(i1 - i2)) * h
                    d2 = min(abs(j1 - j2), res - abs(j1 - j2)) * h
                    total += w[i1, j1] * w[i2, j2] * (d1 * d1 + d2 * d2) ** (
                        -0.5 * gamma
                    )
    return total


def test_energy_matches_brute_force():
    rng = np.random.default_rng(3)
    g = GridField(rng.normal(size=(16, 16)))
    val = frostman_energy(g, 0.1, 4.0, 0.9)
    assert val == pytest.approx(brute_force_energy(g, 0.1, 4.0, 0.9), rel=1e-12)


def test_energy_uniform_measure():
    # g identically y gives the uniform measure; gamma = 0.5 oracle
    g = GridField(np.zeros((16, 16)))
    val = frostman_energy(g, 0.0, 2.0, 0.5)
    assert val == pytest.approx(brute_force_energy(g, 0.0, 2.0, 0.5), rel=1e-12)
    assert val > 0


def test_energy_gamma_refused():
    g = GridField(np.zeros((16, 16)))
    for gamma in (2.0, 2.5, 0.0, -1.0):
        with pytest.raises(ValueError, match="gamma"):
            frostman_energy(g, 0.0, 1.0, gamma)
        with pytest.raises(ValueError, match="gamma"):
            frostman_energy_diagonal_bound(g, 0.0, 1.0, gamma)


def test_energy_monotone_in_gamma_small_ball():
    # Monotonicity in gamma holds when all pairwise distances are <= 1:
    # build a measure concentrated in a ball of radius << 1/2 via a cone
    # field with a sharp kernel.
    res = 256
    ax = grid_axis(res)
    x0 = (0.5, -0.3)
    # torus cone: periodic, so the seam does not inflate the increment guard
    d1 = np.mod(ax[:, None] - x0[0] + np.pi, 2.0 * np.pi) - np.pi
    d2 = np.mod(ax[None, :] - x0[1] + np.pi, 2.0 * np.pi) - np.pi
    g = GridField(np.sqrt(d1**2 + d2**2 + 0.0 * (d1 + d2)))
    n = 5000.0
    assert n < frostman_n_max(g)
    # effective support: exp(-n d^2 / 2) ~ 0 beyond d ~ 0.35
    energies = [frostman_energy(g, 0.0, n, gm) for gm in (0.3, 0.7, 1.1, 1.5, 1.9)]
    assert all(b > a for a, b in zip(energies, energies[1:]))


def test_diagonal_bound_unit_cell_integral():
    # MC oracle for the unit-cell pair integral inside the diagonal bound
    from levelset_lab.fractal import _unit_cell_pair_integral

    rng = np.random.default_rng(9)
    for gamma in (0.5, 1.1):
        u = rng.uniform(size=(400_000, 2))
        v = rng.uniform(size=(400_000, 2))
        mc = np.mean(np.sum((u - v) ** 2, axis=1) ** (-0.5 * gamma))
        j = _unit_cell_pair_integral(gamma)
        se = np.std(np.sum((u - v) ** 2, axis=1) ** (-0.5 * gamma)) / np.sqrt(4e5)
        assert abs(j - mc) < 5.0 * se


def test_diagonal_bound_scales():
    g = GridField(np.zeros((16, 16)))
    b16 = frostman_energy_diagonal_bound(g, 0.0, 2.0, 1.0)
    g2 = GridField(np.zeros((32, 32)))
    b32 = frostman_energy_diagonal_bound(g2, 0.0, 2.0, 1.0)
    # uniform measure: sum m^2 ~ res^-2, h^-gamma ~ res; bound ~ res^(gamma-2)
    assert b32 / b16 == pytest.approx(0.5, rel=1e-12)
    # and it is small next to the off-diagonal energy at this resolution
    assert b16 < 0.1 * frostman_energy(g, 0.0, 2.0, 1.0)


# ---------------------------------------------------------------------------
# Occupation fraction


def test_occupation_sine_oracle():
    g = sine_field(1024)
    for eps in (0.05, 0.1, 0.3, 0.7):
        exact = (2.0 / np.pi) * np.arcsin(eps)
        assert occupation_fraction(g, eps) == pytest.approx(exact, abs=2.5e-3)


def test_occupation_extremes():
    g = sine_field(64)
    assert occupation_fraction(g, 1.5) == 1.0
    assert occupation_fraction(g, 1.0) == 1.0
    with pytest.raises(ValueError, match="positive"):
        occupation_fraction(g, 0.0)


# ---------------------------------------------------------------------------
# Covariance determinant check


def test_det_check_positive_and_deterministic():
    params = ModelParams()
    s1 = covariance_det_check(params, 1.0, n_pairs=50, cutoff=96, seed=SeedSpec(5))
    s2 = covariance_det_check(params, 1.0, n_pairs=50, cutoff=96, seed=SeedSpec(5))
    np.testing.assert_array_equal(s1.ratios, s2.ratios)
    assert s1.exponent == pytest.approx(1.5)
    assert np.all(s1.ratios > 0)
    assert s1.min_ratio == np.min(s1.ratios)
    assert s1.median_ratio == np.median(s1.ratios)
    assert np.all(s1.separations >= 0.02 * (1 - 1e-12))
    assert np.all(s1.separations <= np.pi * np.sqrt(2.0))
    s3 = covariance_det_check(params, 1.0, n_pairs=50, cutoff=96, seed=SeedSpec(6))
    assert not np.array_equal(s1.ratios, s3.ratios)


def test_det_check_cutoff_stability():
    # away from the truncation scale the ratio field is cutoff-converged
    params = ModelParams()
    kw = dict(t=1.0, n_pairs=40, seed=SeedSpec(8), min_separation=0.1)
    a = covariance_det_check(params, cutoff=128, **kw)
    b = covariance_det_check(params, cutoff=256, **kw)
    np.testing.assert_allclose(a.ratios, b.ratios, rtol=0.1)
    assert abs(a.min_ratio - b.min_ratio) <= 0.1 * b.min_ratio


def test_det_check_validation():
    with pytest.raises(ValueError, match="pair"):
        covariance_det_check(ModelParams(), 1.0, n_pairs=0)
    with pytest.raises(ValueError, match="min_separation"):
        covariance_det_check(ModelParams(), 1.0, n_pairs=2, min_separation=0.0)
