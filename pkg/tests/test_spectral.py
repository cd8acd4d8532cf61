import numpy as np
import pytest
from numpy.testing import assert_allclose

from hyprelax.chapman import compute_parabolic_limit, exact_group_projection
from hyprelax.model import HyperbolicSystem
from hyprelax.spectral import (
    FREQUENCY,
    PHYSICAL,
    CutoffSpec,
    FrequencySplitter,
    GridField,
    PeriodicGrid,
    SupportTooWideError,
    WrongRepresentationError,
    default_cutoff,
    evolve_hyperbolic,
    evolve_parabolic_phi,
    evolve_parabolic_psi,
    imaginary_residual,
    load_field,
    lp_norm,
    make_initial_data,
    save_field,
    smooth_step,
    split_frequencies,
    to_frequency,
    to_physical,
)
from hyprelax.systems import damped_euler_2d, goldstein_kac_1d


def gaussian_field(grid: PeriodicGrid, amplitudes, sigma: float = 1.0) -> GridField:
    return make_initial_data(
        grid, len(amplitudes), "gaussian", amplitudes=tuple(amplitudes), sigma=sigma
    ).field


class TestPeriodicGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            PeriodicGrid(dimension=0, points=8, half_width=1.0)
        with pytest.raises(ValueError):
            PeriodicGrid(dimension=1, points=100, half_width=1.0)
        with pytest.raises(ValueError):
            PeriodicGrid(dimension=1, points=4, half_width=1.0)
        with pytest.raises(ValueError):
            PeriodicGrid(dimension=1, points=8, half_width=0.0)

    def test_axes_and_measures(self):
        grid = PeriodicGrid(dimension=2, points=16, half_width=4.0)
        assert grid.spacing == pytest.approx(0.5)
        assert grid.cell_volume == pytest.approx(0.25)
        assert grid.total_points == 256
        x = grid.x_axis()
        assert x[0] == pytest.approx(-4.0)
        assert x[-1] == pytest.approx(4.0 - 0.5)
        assert 0.0 in x
        k = grid.frequency_axis()
        assert k[0] == 0.0
        assert k[1] == pytest.approx(np.pi / 4.0)

    def test_frequency_vectors_are_c_ordered_meshgrid(self):
        grid = PeriodicGrid(dimension=2, points=8, half_width=2.0)
        vectors = grid.frequency_vectors()
        assert vectors.shape == (64, 2)
        axis = grid.frequency_axis()
        assert_allclose(vectors[:8, 0], axis[0])
        assert_allclose(vectors[:8, 1], axis)
        assert_allclose(vectors[8, 0], axis[1])

    def test_radius_squared(self):
        grid = PeriodicGrid(dimension=2, points=8, half_width=2.0)
        r2 = grid.radius_squared()
        assert r2.shape == (8, 8)
        assert r2[4, 4] == 0.0
        assert r2[0, 0] == pytest.approx(8.0)


class TestGridField:
    def test_shape_validation(self):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        with pytest.raises(ValueError):
            GridField(grid, np.zeros(8), PHYSICAL)
        with pytest.raises(ValueError):
            GridField(grid, np.zeros((2, 9)), PHYSICAL)
        with pytest.raises(ValueError):
            GridField(grid, np.zeros((2, 8)), "fourier")

    def test_transform_round_trip(self):
        grid = PeriodicGrid(dimension=2, points=32, half_width=8.0)
        field = gaussian_field(grid, (1.0, -0.5))
        back = to_physical(to_frequency(field))
        assert_allclose(back.values, field.values, atol=1e-12)

    def test_transform_requires_matching_representation(self):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        field = GridField(grid, np.zeros((1, 8)), FREQUENCY)
        with pytest.raises(WrongRepresentationError):
            to_frequency(field)
        with pytest.raises(WrongRepresentationError):
            to_physical(GridField(grid, np.zeros((1, 8)), PHYSICAL))
        with pytest.raises(WrongRepresentationError):
            lp_norm(field, 2)

    def test_parseval(self):
        grid = PeriodicGrid(dimension=1, points=64, half_width=8.0)
        field = gaussian_field(grid, (1.0, 0.3))
        spectrum = to_frequency(field)
        physical_sq = lp_norm(field, 2) ** 2
        frequency_sq = grid.cell_volume * np.sum(np.abs(spectrum.values) ** 2)
        assert physical_sq == pytest.approx(frequency_sq, rel=1e-12)

    def test_shifted_gaussian_spectrum_modulus(self):
        grid = PeriodicGrid(dimension=1, points=256, half_width=20.0)
        sigma, shift = 1.0, 3.0
        values = np.exp(-((grid.x_axis() - shift) ** 2) / (2.0 * sigma**2))
        field = GridField(grid, values[None], PHYSICAL)
        spectrum = to_frequency(field)
        k = grid.frequency_axis()
        # Continuum transform sampled on the grid, ortho-DFT scaling.
        expected = (
            sigma
            * np.sqrt(2.0 * np.pi)
            * np.exp(-(sigma**2) * k**2 / 2.0)
            / (np.sqrt(grid.points) * grid.spacing)
        )
        assert_allclose(np.abs(spectrum.values[0]), expected, atol=1e-8)

    def test_imaginary_residual(self):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        real = GridField(grid, np.ones((1, 8)), PHYSICAL)
        assert imaginary_residual(real) == 0.0
        shifted = GridField(grid, np.ones((1, 8)) + 0.5j, PHYSICAL)
        assert imaginary_residual(shifted) == pytest.approx(0.5)


class TestLpNorm:
    def test_closed_form_gaussian_norms(self):
        grid = PeriodicGrid(dimension=1, points=512, half_width=12.0)
        sigma = 1.0
        amplitudes = (1.0, -0.5)
        data = make_initial_data(
            grid, 2, "gaussian", amplitudes=amplitudes, sigma=sigma
        )
        magnitude = np.hypot(*amplitudes)
        assert data.norms["l1"] == pytest.approx(
            magnitude * sigma * np.sqrt(2.0 * np.pi), rel=1e-6
        )
        assert data.norms["l2"] == pytest.approx(
            magnitude * (sigma * np.sqrt(np.pi)) ** 0.5, rel=1e-6
        )
        assert data.norms["linf"] == pytest.approx(magnitude, rel=1e-12)

    def test_validation(self):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        field = GridField(grid, np.ones((1, 8)), PHYSICAL)
        with pytest.raises(ValueError):
            lp_norm(field, 0.5)


class TestCutoffs:
    def test_smooth_step_plateaus(self):
        s = np.linspace(-1.0, 2.0, 301)
        values = smooth_step(s)
        assert_allclose(values[s <= 0.0], 1.0)
        assert_allclose(values[s >= 1.0], 0.0)
        inside = values[(s > 0.0) & (s < 1.0)]
        assert np.all(np.diff(inside) <= 0.0)
        mid = smooth_step(np.array([0.3, 0.5, 0.7]))
        assert mid[0] > mid[1] > mid[2]
        assert mid[1] == pytest.approx(0.5)

    def test_partition_of_unity(self):
        cut = CutoffSpec(inner=0.2, outer=10.0)
        s = np.linspace(0.0, 25.0, 500)
        total = cut.chi1(s) + cut.chi2(s) + cut.chi3(s)
        assert_allclose(total, 1.0, atol=1e-15)
        assert_allclose(cut.chi1(s[s <= 0.1]), 1.0)
        assert_allclose(cut.chi1(s[s >= 0.2]), 0.0)
        assert_allclose(cut.chi3(s[s <= 10.0]), 0.0)
        assert_allclose(cut.chi3(s[s >= 20.0]), 1.0)
        for chi in (cut.chi1(s), cut.chi2(s), cut.chi3(s)):
            assert np.all(chi >= 0.0) and np.all(chi <= 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            CutoffSpec(inner=0.0, outer=1.0)
        with pytest.raises(ValueError):
            CutoffSpec(inner=2.0, outer=1.0)

    def test_default_cutoff_values(self):
        cut = default_cutoff(goldstein_kac_1d())
        assert cut.inner == pytest.approx(0.42044820762685775 / 2.0, rel=1e-12)
        assert cut.outer == pytest.approx(20.0, rel=1e-12)


class TestEvolveHyperbolic:
    def test_zero_time_is_identity(self):
        grid = PeriodicGrid(dimension=1, points=128, half_width=10.0)
        field = gaussian_field(grid, (1.0, -0.5))
        evolved = evolve_hyperbolic(goldstein_kac_1d(), field, 0.0)
        assert_allclose(evolved.values, field.values, atol=1e-12)

    def test_negative_time_rejected(self):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        field = GridField(grid, np.zeros((2, 8)), PHYSICAL)
        with pytest.raises(ValueError):
            evolve_hyperbolic(goldstein_kac_1d(), field, -1.0)

    def test_pure_transport_shifts_cells(self):
        transport = HyperbolicSystem(
            advections=(np.diag([1.0, -1.0]),), relaxation=np.zeros((2, 2))
        )
        grid = PeriodicGrid(dimension=1, points=128, half_width=12.0)
        field = gaussian_field(grid, (1.0, 0.7), sigma=1.5)
        shift = 16
        t = shift * grid.spacing
        evolved = evolve_hyperbolic(transport, field, t)
        assert_allclose(
            evolved.values[0], np.roll(field.values[0], shift), atol=1e-10
        )
        assert_allclose(
            evolved.values[1], np.roll(field.values[1], -shift), atol=1e-10
        )

    def test_zero_frequency_mode_follows_relaxation_flow(self):
        from scipy.linalg import expm

        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=64, half_width=10.0)
        field = gaussian_field(grid, (1.0, -0.4))
        t = 0.8
        evolved = to_frequency(evolve_hyperbolic(system, field, t))
        initial = to_frequency(field)
        assert_allclose(
            evolved.values[:, 0],
            expm(-t * system.relaxation) @ initial.values[:, 0],
            atol=1e-12,
        )

    def test_runge_kutta_oracle_on_random_modes(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=128, half_width=10.0)
        field = gaussian_field(grid, (1.0, -0.5))
        t = 0.7
        evolved = to_frequency(evolve_hyperbolic(system, field, t))
        initial = to_frequency(field)
        rng = np.random.default_rng(7)
        modes = rng.choice(grid.points, size=16, replace=False)
        vectors = grid.frequency_vectors()[modes]
        state = initial.values[:, modes].T.copy()
        symbols = system.symbol_stack(vectors)
        steps = 8000
        dt = t / steps
        for _ in range(steps):
            k1 = -np.einsum("fij,fj->fi", symbols, state)
            k2 = -np.einsum("fij,fj->fi", symbols, state + 0.5 * dt * k1)
            k3 = -np.einsum("fij,fj->fi", symbols, state + 0.5 * dt * k2)
            k4 = -np.einsum("fij,fj->fi", symbols, state + dt * k3)
            state = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        assert np.max(np.abs(evolved.values[:, modes].T - state)) < 1e-8

    def test_semigroup(self):
        system = damped_euler_2d()
        grid = PeriodicGrid(dimension=2, points=32, half_width=8.0)
        field = gaussian_field(grid, (1.0, 0.3, -0.2))
        once = evolve_hyperbolic(system, field, 1.3)
        twice = evolve_hyperbolic(system, once, 0.9)
        direct = evolve_hyperbolic(system, field, 2.2)
        norm = lp_norm(field, 2)
        difference = np.sqrt(
            grid.cell_volume * np.sum(np.abs(direct.values - twice.values) ** 2)
        )
        assert difference <= 1e-8 * norm

    def test_linearity(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=64, half_width=10.0)
        f = gaussian_field(grid, (1.0, -0.5))
        g = gaussian_field(grid, (0.3, 0.8), sigma=1.2)
        combined = GridField(grid, 2.0 * f.values - 0.7 * g.values, PHYSICAL)
        lhs = evolve_hyperbolic(system, combined, 1.1).values
        rhs = (
            2.0 * evolve_hyperbolic(system, f, 1.1).values
            - 0.7 * evolve_hyperbolic(system, g, 1.1).values
        )
        assert_allclose(lhs, rhs, atol=1e-12)


class TestFrequencySplitter:
    def test_grid_dimension_must_match(self):
        grid = PeriodicGrid(dimension=2, points=8, half_width=1.0)
        with pytest.raises(ValueError):
            FrequencySplitter(goldstein_kac_1d(), grid)

    def test_split_is_additively_exact(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=256, half_width=40.0)
        splitter = FrequencySplitter(system, grid)
        field = gaussian_field(grid, (1.0, -0.5))
        u, u1, u2 = splitter.decompose(field, 3.0)
        assert_allclose(u1.values + u2.values, u.values, atol=1e-14)
        direct = evolve_hyperbolic(system, field, 3.0)
        assert_allclose(u.values, direct.values, atol=1e-12)

    def test_projected_band_data_has_no_remainder(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=512, half_width=100.0)
        cut = default_cutoff(system)
        spectrum = to_frequency(gaussian_field(grid, (1.0, -0.5)))
        vectors = grid.frequency_vectors()
        moduli = np.linalg.norm(vectors, axis=-1)
        flat = np.zeros_like(spectrum.flat())
        for index in np.flatnonzero(cut.chi1(moduli) >= 1.0):
            projection = exact_group_projection(system, vectors[index])
            flat[:, index] = projection @ spectrum.flat()[:, index]
        prepared = GridField(grid, flat.reshape(spectrum.values.shape), FREQUENCY)
        u1, u2 = split_frequencies(system, prepared, 0.0)
        scale = np.max(np.abs(prepared.values))
        assert np.max(np.abs(u2.values)) <= 1e-10 * scale
        assert_allclose(u1.values, prepared.values, atol=1e-10 * scale)

    def test_high_band_data_has_no_projected_part(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=256, half_width=40.0)
        cut = default_cutoff(system)
        spectrum = to_frequency(gaussian_field(grid, (1.0, -0.5)))
        moduli = np.linalg.norm(grid.frequency_vectors(), axis=-1)
        flat = spectrum.flat().copy()
        flat[:, cut.chi1(moduli) > 0.0] = 0.0
        prepared = GridField(grid, flat.reshape(spectrum.values.shape), FREQUENCY)
        u1, _ = split_frequencies(system, prepared, 1.0)
        assert np.max(np.abs(u1.values)) == 0.0

    def test_thread_count_does_not_change_results(self):
        system = goldstein_kac_1d()
        grid = PeriodicGrid(dimension=1, points=256, half_width=40.0)
        field = gaussian_field(grid, (1.0, -0.5))
        serial = FrequencySplitter(system, grid, threads=1).decompose(field, 2.0)
        threaded = FrequencySplitter(system, grid, threads=4).decompose(field, 2.0)
        for a, b in zip(serial, threaded):
            assert np.array_equal(a.values, b.values)


class TestParabolicProfiles:
    def test_heat_kernel_closed_form(self):
        limit = compute_parabolic_limit(damped_euler_2d())
        grid = PeriodicGrid(dimension=2, points=128, half_width=20.0)
        amplitudes = (0.8, 0.3, -0.2)
        field = gaussian_field(grid, amplitudes)
        t = 2.0
        evolved = evolve_parabolic_phi(limit, field, t)
        spread = 1.0 + 2.0 * t
        expected = (
            amplitudes[0] / spread * np.exp(-grid.radius_squared() / (2.0 * spread))
        )
        assert_allclose(evolved.values[0].real, expected, atol=1e-8)
        assert np.max(np.abs(evolved.values[1:])) < 1e-10

    def test_drift_translates_profile(self):
        relaxation = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]])
        drifting = HyperbolicSystem(
            advections=(np.diag([2.0, 0.0]),), relaxation=relaxation
        )
        centered = HyperbolicSystem(
            advections=(np.diag([1.0, -1.0]),), relaxation=relaxation
        )
        moving = compute_parabolic_limit(drifting)
        still = compute_parabolic_limit(centered)
        assert moving.drift[0] == pytest.approx(1.0, abs=1e-12)
        assert moving.diffusion[0, 0] == pytest.approx(still.diffusion[0, 0], abs=1e-12)
        grid = PeriodicGrid(dimension=1, points=256, half_width=40.0)
        field = gaussian_field(grid, (1.0, -0.5))
        shift = 10
        t = shift * grid.spacing
        with_drift = evolve_parabolic_phi(moving, field, t)
        without = evolve_parabolic_phi(still, field, t)
        assert_allclose(
            with_drift.values, np.roll(without.values, shift, axis=1), atol=1e-10
        )

    def test_refined_profile_matches_moment_closed_form(self):
        limit = compute_parabolic_limit(damped_euler_2d())
        grid = PeriodicGrid(dimension=2, points=128, half_width=20.0)
        a0, a1, a2 = 0.8, 0.3, -0.2
        field = gaussian_field(grid, (a0, a1, a2))
        t = 2.0
        evolved = evolve_parabolic_psi(limit, field, t)
        s2 = 1.0 + 2.0 * t
        x = grid.x_axis()
        x1 = x[:, None]
        x2 = x[None, :]
        heat = np.exp(-grid.radius_squared() / (2.0 * s2))
        # Component 0 carries the heat evolution of rho0 - d1 v1 - d2 v2;
        # components 1, 2 carry minus the gradient of the evolved rho0.
        expected0 = (a0 / s2 + (a1 * x1 + a2 * x2) / s2**2) * heat
        assert_allclose(evolved.values[0].real, expected0, atol=1e-8)
        assert_allclose(
            evolved.values[1].real, a0 * x1 / s2**2 * heat, atol=1e-8
        )
        assert_allclose(
            evolved.values[2].real, a0 * x2 / s2**2 * heat, atol=1e-8
        )

    def test_mean_mode_is_projected_not_damped(self):
        limit = compute_parabolic_limit(goldstein_kac_1d())
        grid = PeriodicGrid(dimension=1, points=64, half_width=10.0)
        field = gaussian_field(grid, (1.0, -0.4))
        spectrum = to_frequency(field)
        for profile in (evolve_parabolic_phi, evolve_parabolic_psi):
            out = to_frequency(profile(limit, field, 5.0))
            assert_allclose(
                out.values[:, 0],
                limit.projection @ spectrum.values[:, 0],
                atol=1e-12,
            )

    def test_dimension_mismatch_and_negative_time(self):
        limit = compute_parabolic_limit(goldstein_kac_1d())
        grid = PeriodicGrid(dimension=2, points=8, half_width=1.0)
        field = GridField(grid, np.zeros((2, 8, 8)), PHYSICAL)
        with pytest.raises(ValueError):
            evolve_parabolic_phi(limit, field, 1.0)
        grid1 = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        field1 = GridField(grid1, np.zeros((2, 8)), PHYSICAL)
        with pytest.raises(ValueError):
            evolve_parabolic_psi(limit, field1, -0.5)


class TestInitialData:
    def test_bump_support_and_peak(self):
        grid = PeriodicGrid(dimension=1, points=256, half_width=10.0)
        data = make_initial_data(
            grid, 1, "bump", amplitudes=(2.0,), radius=3.0
        )
        values = data.field.values[0].real
        x = grid.x_axis()
        assert np.all(values[np.abs(x) >= 3.0] == 0.0)
        assert values[np.argmin(np.abs(x))] == pytest.approx(2.0)

    def test_random_band_is_annulus_confined(self):
        grid = PeriodicGrid(dimension=2, points=32, half_width=8.0)
        data = make_initial_data(grid, 2, "random-band", seed=3, band=(0.5, 1.5))
        spectrum = to_frequency(data.field)
        moduli = np.linalg.norm(grid.frequency_vectors(), axis=-1)
        outside = (moduli < 0.5) | (moduli > 1.5)
        flat = spectrum.flat()
        scale = np.max(np.abs(flat))
        assert np.max(np.abs(flat[:, outside])) < 1e-12 * scale

    def test_deterministic_in_seed(self):
        grid = PeriodicGrid(dimension=1, points=64, half_width=5.0)
        a = make_initial_data(grid, 2, "random-band", seed=5)
        b = make_initial_data(grid, 2, "random-band", seed=5)
        c = make_initial_data(grid, 2, "random-band", seed=6)
        assert np.array_equal(a.field.values, b.field.values)
        assert not np.array_equal(a.field.values, c.field.values)

    def test_support_guards(self):
        grid = PeriodicGrid(dimension=1, points=64, half_width=5.0)
        with pytest.raises(SupportTooWideError):
            make_initial_data(grid, 1, "gaussian", sigma=2.0)
        with pytest.raises(SupportTooWideError):
            make_initial_data(grid, 1, "bump", radius=5.0)

    def test_validation(self):
        grid = PeriodicGrid(dimension=1, points=64, half_width=5.0)
        with pytest.raises(ValueError):
            make_initial_data(grid, 0, "gaussian")
        with pytest.raises(ValueError):
            make_initial_data(grid, 1, "plane-wave")
        with pytest.raises(ValueError):
            make_initial_data(grid, 2, "gaussian", amplitudes=(1.0,))
        with pytest.raises(ValueError):
            make_initial_data(grid, 1, "random-band", band=(1.5, 0.5))


class TestSnapshots:
    @pytest.mark.parametrize("representation", [PHYSICAL, FREQUENCY])
    def test_round_trip(self, tmp_path, representation):
        grid = PeriodicGrid(dimension=2, points=16, half_width=3.0)
        rng = np.random.default_rng(2)
        values = rng.normal(size=(3, 16, 16)) + 1j * rng.normal(size=(3, 16, 16))
        field = GridField(grid, values, representation)
        path = tmp_path / "snapshot.bin"
        save_field(field, path, time=4.25)
        loaded, time = load_field(path)
        assert time == 4.25
        assert loaded.representation == representation
        assert loaded.grid == grid
        assert np.array_equal(loaded.values, field.values)

    def test_truncated_payload_rejected(self, tmp_path):
        grid = PeriodicGrid(dimension=1, points=8, half_width=1.0)
        field = GridField(grid, np.ones((1, 8)), PHYSICAL)
        path = tmp_path / "snapshot.bin"
        save_field(field, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-16])
        with pytest.raises(ValueError):
            load_field(path)

    def test_header_too_short_rejected(self, tmp_path):
        path = tmp_path / "snapshot.bin"
        path.write_bytes(b"abc")
        with pytest.raises(ValueError):
            load_field(path)
