import numpy as np
import pytest

from coltherm.model import TwoQubitParams, build_two_qubit, spectral_data
from coltherm.reservoir import (
    CollisionRecord,
    QuadratureError,
    ReservoirError,
    ReservoirSpec,
    effusion_cdf,
    entropy_production,
    gibbs_weights,
    integrated_rates,
    run_trajectories,
    sample_effusion,
    sample_internal,
    steady_state,
)
from coltherm.thermostats import make_provider


def fig2_model(j_x=1.0, j_y=0.0):
    return build_two_qubit(TwoQubitParams(1.0, 1.0, j_x, j_y), mass=0.1, length=50.0)


def free_model():
    return build_two_qubit(TwoQubitParams(1.0, 1.0, 0.0, 0.0), mass=0.1, length=50.0)


class TestReservoirSpec:
    def test_temperatures_roundtrip(self):
        spec = ReservoirSpec.from_temperatures(2.0, 5.0)
        assert spec.beta_kin == 0.5 and spec.beta_int == 0.2
        assert spec.t_kin == 2.0 and spec.t_int == 5.0

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_beta(self, bad):
        with pytest.raises(ReservoirError):
            ReservoirSpec(beta_kin=bad, beta_int=1.0)


class TestEffusion:
    def test_mean_kinetic_energy(self):
        # closed form: substituting u = beta p^2 / 2m gives <p^2/2m> = 1/beta
        rng = np.random.default_rng(4)
        beta, mass, n = 2.0, 0.7, 200_000
        samples = np.array([sample_effusion(beta, mass, rng) for _ in range(n)])
        e_kin = samples**2 / (2.0 * mass)
        se = e_kin.std(ddof=1) / np.sqrt(n)
        assert abs(e_kin.mean() - 1.0 / beta) <= 3.0 * se

    def test_matches_analytic_cdf(self):
        rng = np.random.default_rng(8)
        beta, mass, n = 1.0, 0.1, 200_000
        samples = np.sort([sample_effusion(beta, mass, rng) for _ in range(n)])
        cdf = effusion_cdf(samples, beta, mass)
        grid = np.arange(1, n + 1) / n
        ks = np.max(np.maximum(np.abs(grid - cdf), np.abs(grid - 1.0 / n - cdf)))
        assert ks < 0.005

    def test_nonnegative_with_zero_boundary(self):
        assert effusion_cdf(0.0, 1.0, 1.0) == 0.0
        rng = np.random.default_rng(0)
        assert min(sample_effusion(1.0, 1.0, rng) for _ in range(1000)) >= 0.0


class TestSampleInternal:
    def test_cold_limit_picks_ground(self):
        rng = np.random.default_rng(1)
        m = fig2_model()
        draws = {sample_internal(200.0, m, rng) for _ in range(200)}
        assert draws == {1}  # lower unit level

    def test_infinite_temperature_uniform(self):
        rng = np.random.default_rng(2)
        m = fig2_model()
        draws = np.array([sample_internal(0.0, m, rng) for _ in range(4000)])
        assert abs(draws.mean() - 0.5) < 0.05

    def test_gibbs_ratio(self):
        w = gibbs_weights(fig2_model().unit_energies, 1.0)
        assert w[1] / w[0] == pytest.approx(np.exp(2.0))


class TestIntegratedRates:
    def test_free_model_identity(self):
        rates = integrated_rates(make_provider("wvo", free_model()), ReservoirSpec(1.0, 1.0))
        assert np.max(np.abs(rates.full - np.eye(4))) <= 1e-8

    @pytest.mark.parametrize("kind", ["wvo", "rit", "exact"])
    def test_local_detailed_balance(self, kind):
        m = fig2_model()
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        rates = integrated_rates(make_provider(kind, m), spec)
        e0 = m.h0_diag
        for j in range(4):
            for jp in range(4):
                if j == jp or rates.full[j, jp] < 1e-10:
                    continue
                expected = np.exp(-spec.beta_kin * (e0[jp] - e0[j]))
                assert rates.full[j, jp] / rates.full[jp, j] == pytest.approx(
                    expected, rel=1e-5
                )

    def test_system_detailed_balance(self, ):
        m = fig2_model()
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        rates = integrated_rates(make_provider("wvo", m), spec)
        es = m.system_energies
        ratio = rates.system[0, 1] / rates.system[1, 0]
        assert ratio == pytest.approx(np.exp(-spec.beta_kin * (es[1] - es[0])), rel=1e-5)

    def test_change_of_variables_identity(self):
        # the shifted-momentum form of an uphill rate equals the plain form,
        # checked with an independent trapezoid quadrature; below the model's
        # identity switch the off-diagonal integrand is exactly zero, so the
        # grids start at the switch
        m = fig2_model()
        provider = make_provider("wvo", m)
        sd = spectral_data(m)
        beta, mass = 1.0, m.mass
        j, jp = 3, 0  # -2 -> +2, gap 4
        gap = m.h0_diag[jp] - m.h0_diag[j]

        def prob(p0s):
            return provider.probability_columns(p0s, np.full(p0s.size, j))[:, jp]

        p_switch = np.sqrt(2 * mass * (sd.e_max - m.h0_diag[j])) + 1e-9
        p_grid = np.linspace(p_switch, 18.0, 400_001)
        mu = beta * p_grid / mass * np.exp(-beta * p_grid**2 / (2 * mass))
        direct = np.trapezoid(mu * prob(p_grid), p_grid)
        # map the same grid through the substitution to align both endpoints
        q_grid = np.sqrt(p_grid**2 - 2 * mass * gap)
        mu_q = beta * q_grid / mass * np.exp(-beta * q_grid**2 / (2 * mass))
        shifted = np.exp(-beta * gap) * np.trapezoid(
            mu_q * prob(np.sqrt(q_grid**2 + 2 * mass * gap)), q_grid
        )
        assert direct == pytest.approx(shifted, rel=1e-5)
        rates = integrated_rates(provider, ReservoirSpec(beta, beta))
        assert rates.full[j, jp] == pytest.approx(direct, rel=1e-4)

    def test_rows_stochastic(self):
        rates = integrated_rates(make_provider("rit", fig2_model()), ReservoirSpec(0.5, 0.5))
        assert np.max(np.abs(rates.full.sum(axis=1) - 1.0)) <= 1e-8

    def test_quadrature_failure_reported(self):
        class NoisyProvider:
            def __init__(self, model):
                self.model = model
                self.spectral = spectral_data(model)
                self.kind = "noisy"
                self.rng = np.random.default_rng(0)

            def probability_columns(self, p0s, incident):
                out = self.rng.random((np.size(p0s), self.model.dim))
                return out / out.sum(axis=1, keepdims=True)

        with pytest.raises(QuadratureError, match="did not converge"):
            integrated_rates(NoisyProvider(free_model()), ReservoirSpec(1.0, 1.0))


class TestSteadyState:
    def test_identity_chain_reported_reducible(self):
        ss = steady_state(np.eye(3))
        assert not ss.unique
        assert len(ss.classes) == 3

    def test_two_state_closed_form(self):
        a, b = 0.3, 0.1
        p = np.array([[1 - a, a], [b, 1 - b]])
        ss = steady_state(p)
        assert ss.unique
        assert np.allclose(ss.pi, [b / (a + b), a / (a + b)], atol=1e-9)
        assert ss.residual <= 1e-10

    def test_gibbs_fixed_point(self):
        beta = 1.0
        m = fig2_model()
        rates = integrated_rates(make_provider("wvo", m), ReservoirSpec(beta, beta))
        ss = steady_state(rates)
        expected = np.exp(beta) / (2.0 * np.cosh(beta))
        assert ss.pi[1] == pytest.approx(expected, abs=1e-7)

    def test_rejects_non_stochastic(self):
        with pytest.raises(ReservoirError, match="sum to 1"):
            steady_state(np.array([[0.5, 0.2], [0.1, 0.9]]))


class TestTrajectories:
    def test_bit_reproducible(self):
        m = fig2_model()
        provider = make_provider("wvo", m)
        spec = ReservoirSpec.from_temperatures(2.0, 2.0)
        a = run_trajectories(provider, spec, None, 8, 60, seed=123)
        b = run_trajectories(provider, spec, None, 8, 60, seed=123)
        assert np.array_equal(a.series, b.series)
        assert a.mean_heat == b.mean_heat
        assert np.array_equal(a.steady_populations, b.steady_populations)
        c = run_trajectories(provider, spec, None, 8, 60, seed=124)
        assert not np.array_equal(a.series, c.series)

    def test_thermalizes_to_gibbs(self):
        m = fig2_model()
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        expected = np.exp(1.0) / (2.0 * np.cosh(1.0))
        for kind in ("wvo", "exact"):
            stats = run_trajectories(make_provider(kind, m), spec, None, 60, 600, seed=5)
            z = abs(stats.steady_populations[1] - expected) / stats.steady_se[1]
            assert z <= 3.0

    def test_zero_mean_heat_at_equilibrium(self):
        m = fig2_model()
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        stats = run_trajectories(make_provider("rit", m), spec, None, 60, 600, seed=6)
        assert abs(stats.mean_heat) <= 2.0 * stats.heat_se

    def test_population_inversion_of_packet_control(self):
        m = fig2_model(j_y=-1.0)
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        stats = run_trajectories(make_provider("rit-packet", m), spec, None, 60, 600, seed=7)
        assert stats.steady_populations[1] + 3 * stats.steady_se[1] < 0.5

    @pytest.mark.parametrize("kind", ["exact", "wvo", "rit", "rit-packet"])
    def test_matches_master_equation_fixed_point(self, kind):
        m = fig2_model(j_y=-1.0)
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        provider = make_provider(kind, m)
        ss = steady_state(integrated_rates(provider, spec))
        stats = run_trajectories(provider, spec, None, 80, 800, seed=8)
        for s in range(m.dim_s):
            margin = 3.0 * stats.steady_se[s] + 1e-4
            assert abs(stats.steady_populations[s] - ss.pi[s]) <= margin

    def test_packet_control_violates_system_detailed_balance(self):
        # must-fail guard: the broken thermostat cannot satisfy the
        # population detailed-balance ratio
        m = fig2_model(j_y=-1.0)
        spec = ReservoirSpec.from_temperatures(1.0, 1.0)
        rates = integrated_rates(make_provider("rit-packet", m), spec)
        es = m.system_energies
        ratio = rates.system[0, 1] / rates.system[1, 0]
        expected = np.exp(-spec.beta_kin * (es[1] - es[0]))
        assert abs(ratio / expected - 1.0) > 0.5

    def test_series_shape_and_burn_in(self):
        m = fig2_model()
        stats = run_trajectories(
            make_provider("wvo", m), ReservoirSpec(1.0, 1.0), None, 4, 50,
            seed=9, burn_in_fraction=0.4,
        )
        assert stats.series.shape == (51, 2)
        assert stats.burn_in == 20
        assert np.allclose(stats.series.sum(axis=1), 1.0)

    def test_initial_state_forms(self):
        m = fig2_model()
        provider = make_provider("wvo", m)
        spec = ReservoirSpec(1.0, 1.0)
        vec = run_trajectories(provider, spec, [1.0, 0.0], 4, 30, seed=1)
        assert vec.series[0, 0] == 1.0
        rho_s = np.diag([0.0, 1.0]).astype(complex)
        sys_rho = run_trajectories(provider, spec, rho_s, 4, 30, seed=1)
        assert sys_rho.series[0, 1] == 1.0
        rho_full = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
        full = run_trajectories(provider, spec, rho_full, 16, 30, seed=1)
        assert abs(full.series[0, 0] - 0.5) <= 0.3

    def test_rejects_bad_inputs(self):
        m = fig2_model()
        provider = make_provider("wvo", m)
        with pytest.raises(ReservoirError):
            run_trajectories(provider, ReservoirSpec(1.0, 1.0), None, 0, 10, seed=1)
        with pytest.raises(ReservoirError):
            run_trajectories(provider, ReservoirSpec(1.0, 1.0), [0.7, 0.7], 2, 10, seed=1)


class TestEntropyProduction:
    def test_zero_at_equal_temperatures(self):
        m = build_two_qubit(TwoQubitParams(1.0, 1.0, 1.0, 0.0), mass=1.0, length=50.0)
        ep = entropy_production(make_provider("wvo", m), ReservoirSpec.from_temperatures(20.0, 20.0),
                                n_trajectories=10, n_collisions=100, seed=2)
        assert ep.delta_s == 0.0 and ep.delta_s_se == 0.0

    def test_positive_under_temperature_gradient(self):
        m = build_two_qubit(TwoQubitParams(1.0, 1.0, 1.0, 0.0), mass=1.0, length=50.0)
        for t_kin in (5.0, 60.0):
            spec = ReservoirSpec.from_temperatures(t_kin, 20.0)
            ep = entropy_production(make_provider("wvo", m), spec, 40, 500, seed=3)
            assert ep.delta_s >= -3.0 * ep.delta_s_se
        # heat flows from the hot internal bath into the cold kinetic one
        spec = ReservoirSpec.from_temperatures(5.0, 20.0)
        ep = entropy_production(make_provider("wvo", m), spec, 40, 500, seed=4)
        assert ep.heat > 0.0

    def test_collision_record_heat_convention(self):
        rec = CollisionRecord(p0=1.0, unit_in=0, unit_out=1, system_in=0, system_out=1,
                              heat=2.0)
        assert rec.heat == 2.0
