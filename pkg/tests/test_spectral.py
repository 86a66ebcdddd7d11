"""Tests for the Fourier-lattice state and spectral operators.

Oracle values are computed independently (scalar loops, closed forms, hand
derivations) and frozen here; the fast FFT paths must reproduce them.
"""

import numpy as np
import pytest

from levelset_lab.spectral import (
    BASIS_AMPLITUDE,
    GridField,
    ModeIndexSet,
    ResolutionError,
    SpectralField,
    VelocityField,
    WaveVector,
    analyze,
    apply_fractional_laplacian,
    divergence,
    evaluate_basis_direct,
    grid_axis,
    l2_inner,
    mode_set,
    perp_gradient_inverse,
    project,
    sobolev_inner,
    synthesize,
)

# Frozen: sqrt(2)/(2 pi) and its reciprocal.
C_BASIS = 0.22507907903927654
C_BASIS_INV = 4.442882938158366


def random_field(modes, seed):
    rng = np.random.default_rng(seed)
    return SpectralField(modes, rng.standard_normal(len(modes)))


def brute_force_mode_count(radius, shape):
    """Scalar-loop count of the punctured truncation set."""
    n = 0
    for k1 in range(-radius, radius + 1):
        for k2 in range(-radius, radius + 1):
            if k1 == 0 and k2 == 0:
                continue
            if shape == "euclidean_ball" and k1 * k1 + k2 * k2 > radius * radius:
                continue
            n += 1
    return n


class TestWaveVector:
    def test_norm(self):
        assert WaveVector(3, 4).norm == 5.0
        assert WaveVector(2, 1).norm_sq == 5

    def test_positive_half_membership(self):
        assert WaveVector(0, 1).in_positive_half
        assert WaveVector(-3, 2).in_positive_half
        assert WaveVector(1, 0).in_positive_half
        assert not WaveVector(-1, 0).in_positive_half
        assert not WaveVector(0, -1).in_positive_half
        assert not WaveVector(3, -2).in_positive_half

    def test_negation(self):
        assert -WaveVector(2, -3) == WaveVector(-2, 3)


class TestModeIndexSet:
    def test_smallest_ball(self):
        ms = mode_set(1)
        assert len(ms) == 4
        assert [tuple(k) for k in ms.k] == [(-1, 0), (0, -1), (0, 1), (1, 0)]

    def test_smallest_square(self):
        ms = mode_set(1, shape="square")
        assert len(ms) == 8
        assert (0, 0) not in ms
        assert (1, 1) in ms and (-1, -1) in ms

    def test_counts_match_brute_force(self):
        for radius in (1, 2, 3, 7, 16):
            for shape in ModeIndexSet.SHAPES:
                assert len(mode_set(radius, shape)) == brute_force_mode_count(
                    radius, shape
                )

    def test_default_experiment_ball_count(self):
        # Frozen from a scalar-loop count at radius 85.
        assert len(mode_set(85)) == 22700

    def test_closed_under_negation(self):
        ms = mode_set(6)
        for k1, k2 in ms.k:
            assert (-k1, -k2) in ms

    def test_pair_indices(self):
        ms = mode_set(5)
        assert len(ms.pos) * 2 == len(ms)
        total = ms.k[ms.pos] + ms.k[ms.neg]
        assert np.all(total == 0)

    def test_lexicographic_order(self):
        ms = mode_set(4)
        pairs = [tuple(k) for k in ms.k]
        assert pairs == sorted(pairs)

    def test_index_of_round_trip(self):
        ms = mode_set(7)
        for i in (0, 3, 17, len(ms) - 1):
            assert ms.index_of(tuple(ms.k[i])) == i

    def test_interned(self):
        assert mode_set(5) is mode_set(5)
        assert mode_set(5) is not mode_set(5, shape="square")

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            ModeIndexSet(0)
        with pytest.raises(ValueError):
            ModeIndexSet(3, shape="hexagon")


class TestTransforms:
    def test_single_sine_mode_on_grid(self):
        ms = mode_set(2)
        g = synthesize(SpectralField.unit(ms, (1, 0)), 16)
        x = grid_axis(16)
        expected = C_BASIS * np.sin(x)[:, None] * np.ones(16)[None, :]
        np.testing.assert_allclose(g.values, expected, atol=1e-14)
        # Row-major convention: first index moves the first coordinate.
        assert g.values[4, 0] == pytest.approx(-C_BASIS, abs=1e-14)

    def test_single_cosine_mode_on_grid(self):
        ms = mode_set(2)
        g = synthesize(SpectralField.unit(ms, (0, -1)), 16)
        x = grid_axis(16)
        expected = C_BASIS * np.ones(16)[:, None] * np.cos(x)[None, :]
        np.testing.assert_allclose(g.values, expected, atol=1e-14)

    def test_analyze_plain_cosine(self):
        x = grid_axis(32)
        g = GridField(np.ones(32)[:, None] * np.cos(x)[None, :])
        f = analyze(g, mode_set(3))
        assert f.coeff((0, -1)) == pytest.approx(C_BASIS_INV, abs=1e-12)
        rest = f.coeffs.copy()
        rest[f.modes.index_of((0, -1))] = 0.0
        assert np.max(np.abs(rest)) < 1e-12

    def test_round_trip(self):
        ms = mode_set(20)
        f = random_field(ms, 1234)
        g = analyze(synthesize(f, 64), ms)
        np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-12)

    def test_round_trip_square_modes(self):
        ms = mode_set(10, shape="square")
        f = random_field(ms, 99)
        g = analyze(synthesize(f, 32), ms)
        np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-12)

    def test_parseval(self):
        ms = mode_set(25)
        f = random_field(ms, 7)
        g = synthesize(f, 128)
        lhs = np.sum(f.coeffs**2)
        rhs = np.mean(g.values**2) * (2 * np.pi) ** 2
        assert abs(lhs - rhs) <= 1e-10 * lhs

    def test_synthesized_field_has_zero_mean(self):
        f = random_field(mode_set(12), 3)
        assert abs(synthesize(f, 64).mean()) < 1e-13

    def test_matches_direct_basis_evaluation(self):
        ms = mode_set(4)
        f = random_field(ms, 11)
        n = 16
        g = synthesize(f, n)
        x = grid_axis(n)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
        direct = evaluate_basis_direct(ms, pts) @ f.coeffs
        np.testing.assert_allclose(g.values.ravel(), direct, atol=1e-10)

    def test_resolution_guard(self):
        f = SpectralField.zeros(mode_set(8))
        with pytest.raises(ResolutionError):
            synthesize(f, 16)  # needs n_grid >= 18
        with pytest.raises(ResolutionError):
            analyze(GridField(np.zeros((16, 16))), mode_set(8))

    def test_grid_field_validation(self):
        with pytest.raises(ValueError):
            GridField(np.zeros((8, 4)))
        with pytest.raises(ValueError):
            GridField(np.zeros((12, 12)))  # not a power of two
        assert GridField(np.zeros((8, 8))).cell_size == pytest.approx(np.pi / 4)


class TestFractionalLaplacian:
    def test_half_power_multiplier(self):
        # |k|^(2 * 0.5) = |k| = sqrt(5) on k = (2, 1).
        ms = mode_set(3)
        f = apply_fractional_laplacian(SpectralField.unit(ms, (2, 1)), 0.5)
        assert f.coeff((2, 1)) == pytest.approx(2.2360679774997896, abs=1e-14)

    def test_semigroup_property(self):
        f = random_field(mode_set(10), 21)
        for g1, g2 in [(0.75, 0.75), (1.5, -0.5), (-1.0, 2.5)]:
            a = apply_fractional_laplacian(apply_fractional_laplacian(f, g1), g2)
            b = apply_fractional_laplacian(f, g1 + g2)
            np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=0)

    def test_inverse(self):
        f = random_field(mode_set(10), 22)
        g = apply_fractional_laplacian(apply_fractional_laplacian(f, 1.5), -1.5)
        np.testing.assert_allclose(g.coeffs, f.coeffs, rtol=1e-12, atol=0)

    def test_norm_shift_identity(self):
        # ||A^-M theta||_gamma = ||theta||_(gamma - 2M)
        theta = random_field(mode_set(15), 23)
        for M in (1.0, 2.0):
            for gamma in (0.0, 0.5, 2.0):
                lhs = apply_fractional_laplacian(theta, -M).norm(gamma)
                rhs = theta.norm(gamma - 2 * M)
                assert lhs == pytest.approx(rhs, rel=1e-12)


class TestVelocityMap:
    def test_single_sine_mode_by_hand(self):
        # theta = c sin(x1): stream function A^-1 theta = c sin(x1),
        # u = (-d2, d1) of it = (0, c cos(x1)).
        ms = mode_set(2)
        u = perp_gradient_inverse(SpectralField.unit(ms, (1, 0)), M=1.0)
        assert np.max(np.abs(u.u1.coeffs)) == 0.0
        assert u.u2.coeff((-1, 0)) == pytest.approx(1.0, abs=1e-14)
        other = u.u2.coeffs.copy()
        other[ms.index_of((-1, 0))] = 0.0
        assert np.max(np.abs(other)) == 0.0

    def test_single_cosine_mode_by_hand(self):
        # theta = c cos(2 x2): |k|^2 = 4, u = (c sin(2 x2)/2, 0).
        ms = mode_set(2)
        u = perp_gradient_inverse(SpectralField.unit(ms, (0, -2)), M=1.0)
        assert np.max(np.abs(u.u2.coeffs)) == 0.0
        assert u.u1.coeff((0, 2)) == pytest.approx(0.5, abs=1e-14)

    def test_divergence_free(self):
        # Exact cancellation up to one rounding of k1*(k2*psi) vs k2*(k1*psi).
        for seed in range(10):
            theta = random_field(mode_set(12), 100 + seed)
            u = perp_gradient_inverse(theta, M=1.0)
            assert u.max_divergence_coeff() < 1e-12

    def test_velocity_norm_identity(self):
        # ||u||_L2^2 = sum |k|^(2-4M) theta_k^2 = ||theta||_(1-2M)^2
        theta = random_field(mode_set(12), 31)
        for M in (1.0, 1.5):
            u = perp_gradient_inverse(theta, M=M)
            l2 = np.sqrt(u.u1.norm() ** 2 + u.u2.norm() ** 2)
            assert l2 == pytest.approx(theta.norm(1.0 - 2.0 * M), rel=1e-12)

    def test_divergence_of_generic_pair_is_nonzero(self):
        # A velocity field that is not built from a stream function should
        # have nonzero spectral divergence, so the identity check has teeth.
        ms = mode_set(3)
        w = VelocityField(
            SpectralField.unit(ms, (1, 0)), SpectralField.unit(ms, (0, 1))
        )
        assert np.max(np.abs(divergence(w).coeffs)) > 0.5


class TestProject:
    def test_truncation_zeroes_outside_ball(self):
        f = random_field(mode_set(8), 41)
        p = project(f, 4)
        inside = f.modes.ksq <= 16
        np.testing.assert_array_equal(p.coeffs[inside], f.coeffs[inside])
        assert np.all(p.coeffs[~inside] == 0.0)

    def test_idempotent(self):
        f = random_field(mode_set(8), 42)
        p = project(f, 5)
        np.testing.assert_array_equal(project(p, 5).coeffs, p.coeffs)

    def test_square_shape(self):
        f = random_field(mode_set(4), 43)
        p = project(f, 2, shape="square")
        assert p.coeff((3, 1)) == 0.0 if (3, 1) in f.modes else True
        assert p.coeff((2, 2)) == f.coeff((2, 2))


class TestInnerProducts:
    def test_basis_orthonormality(self):
        ms = mode_set(3)
        e1 = SpectralField.unit(ms, (2, 1))
        e2 = SpectralField.unit(ms, (-2, -1))
        assert l2_inner(e1, e1) == 1.0
        assert l2_inner(e1, e2) == 0.0

    def test_quadrature_orthonormality(self):
        # Grid quadrature reproduces <e_k, e_j> = delta for a sample of pairs.
        ms = mode_set(3)
        n = 16
        for kv, jv in [((2, 1), (2, 1)), ((2, 1), (1, 2)), ((1, 0), (-1, 0))]:
            gk = synthesize(SpectralField.unit(ms, kv), n)
            gj = synthesize(SpectralField.unit(ms, jv), n)
            quad = np.mean(gk.values * gj.values) * (2 * np.pi) ** 2
            expected = 1.0 if kv == jv else 0.0
            assert quad == pytest.approx(expected, abs=1e-13)

    def test_sobolev_inner_matches_multiplier(self):
        ms = mode_set(3)
        f = SpectralField.unit(ms, (2, 1))
        assert sobolev_inner(f, f, 1.0) == pytest.approx(5.0, rel=1e-14)
