import numpy as np
import pytest

from coltherm.collision_map import (
    MapError,
    TraceWarning,
    apply_kraus,
    apply_map,
    bohr_frequencies,
    build_map,
    choi_matrix,
    kraus_set,
    narrow_packet_check,
    transition_probabilities,
    validate_density,
)
from coltherm.linalg import eig_hermitian, max_abs
from coltherm.model import InternalModel, TwoQubitParams, build_two_qubit
from coltherm.thermostats import ExactProvider, RITProvider, WVOProvider, make_provider


def fig2_model(j_x=1.0, j_y=0.0):
    return build_two_qubit(TwoQubitParams(1.0, 1.0, j_x, j_y), mass=0.1, length=50.0)


def free_model():
    return build_two_qubit(TwoQubitParams(1.0, 1.0, 0.0, 0.0), mass=0.1, length=50.0)


def random_density(rng, dim):
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = raw @ raw.conj().T
    return rho / np.trace(rho).real


P0_REF = float(np.sqrt(2.0 * 0.1 * 10.0))  # kinetic energy 10 on the reference model


class TestValidateDensity:
    def test_accepts_valid(self):
        rng = np.random.default_rng(0)
        validate_density(random_density(rng, 4))

    def test_rejects_bad_trace(self):
        with pytest.raises(MapError, match="trace"):
            validate_density(0.5 * np.eye(3))

    def test_rejects_non_hermitian(self):
        rho = np.eye(2, dtype=complex) / 2
        rho[0, 1] = 0.1
        with pytest.raises(MapError, match="Hermitian"):
            validate_density(rho)

    def test_rejects_negative_eigenvalue(self):
        rho = np.diag([1.2, -0.2]).astype(complex)
        with pytest.raises(MapError, match="negative"):
            validate_density(rho)


class TestBuildApply:
    def test_free_model_identity_on_populations(self):
        tensor = build_map(WVOProvider(free_model()), P0_REF)
        for j in range(4):
            assert tensor.entries[(j, j, j, j)] == pytest.approx(1.0)
        rho = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
        assert max_abs(apply_map(tensor, rho) - rho) <= 1e-12

    @pytest.mark.parametrize("kind", ["exact", "wvo", "rit"])
    def test_population_block_equals_transition_matrix(self, kind):
        provider = make_provider(kind, fig2_model())
        tensor = build_map(provider, P0_REF)
        p = transition_probabilities(provider, P0_REF)
        assert max_abs(tensor.population_matrix() - p) <= 1e-10

    def test_apply_to_pure_state_matches_columns(self):
        provider = ExactProvider(fig2_model())
        tensor = build_map(provider, P0_REF)
        p = transition_probabilities(provider, P0_REF)
        rho = np.zeros((4, 4), dtype=complex)
        rho[0, 0] = 1.0
        out = apply_map(tensor, rho)
        assert np.allclose(np.diag(out).real, p[:, 0], atol=1e-10)

    def test_trace_preserved_on_mixed_state(self):
        rng = np.random.default_rng(5)
        tensor = build_map(WVOProvider(fig2_model()), P0_REF)
        rho = random_density(rng, 4)
        out = apply_map(tensor, rho)
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)

    def test_coherences_between_unequal_jumps_are_erased(self):
        provider = WVOProvider(fig2_model())
        tensor = build_map(provider, P0_REF)
        e0 = fig2_model().h0_diag
        rho = np.full((4, 4), 0.25, dtype=complex)  # coherences everywhere
        out = apply_map(tensor, rho)
        # a surviving coherence (J',K') needs some input (J,K) with the same
        # Bohr jump on both sides: e_J' - e_J = e_K' - e_K
        for jp in range(4):
            for kp in range(4):
                allowed = any(
                    abs((e0[jp] - e0[j]) - (e0[kp] - e0[k])) < 1e-9
                    for j in range(4)
                    for k in range(4)
                )
                if not allowed:
                    assert abs(out[jp, kp]) <= 1e-12

    def test_population_closure_with_system_coherences(self):
        # unit in an energy eigenstate, system carrying coherences: the
        # populations evolve by the transition matrix alone
        provider = ExactProvider(fig2_model())
        tensor = build_map(provider, P0_REF)
        p = transition_probabilities(provider, P0_REF)
        rho_s = np.array([[0.7, 0.25 + 0.1j], [0.25 - 0.1j, 0.3]])
        rho_u = np.diag([1.0, 0.0])
        rho = np.kron(rho_u, rho_s).astype(complex)
        out = apply_map(tensor, rho)
        assert np.allclose(np.diag(out).real, p @ np.diag(rho).real, atol=1e-10)

    def test_off_diagonal_contraction_under_repeated_collisions(self):
        # needs a nondegenerate free spectrum: at resonance the populations
        # legitimately regenerate the degenerate (01, 10) coherence
        rng = np.random.default_rng(9)
        m = build_two_qubit(TwoQubitParams(1.0, 1.6, 1.0, 0.3), mass=0.1, length=50.0)
        provider = WVOProvider(m)
        rho = random_density(rng, 4)

        def offdiag_norm(r):
            return float(np.linalg.norm(r - np.diag(np.diag(r))))

        norms = [offdiag_norm(rho)]
        for _ in range(6):
            p0 = float(np.sqrt(2.0 * 0.1 * rng.uniform(3.0, 30.0)))
            rho = apply_map(build_map(provider, p0), rho)
            norms.append(offdiag_norm(rho))
        assert all(b <= a + 1e-10 for a, b in zip(norms, norms[1:]))
        assert norms[-1] < norms[0]

    def test_trace_warning_for_subunitary_table(self):
        # the packet-time control with blocked transitions loses weight at the
        # tensor level (the fold lives in the probability path)
        m = fig2_model(j_y=-1.0)
        provider = make_provider("rit-packet", m)
        p0 = float(np.sqrt(2.0 * m.mass * 3.4))  # above cutoff, below max jump
        tensor = build_map(provider, p0)
        rho = np.zeros((4, 4), dtype=complex)
        rho[3, 3] = 1.0
        with pytest.warns(TraceWarning):
            apply_map(tensor, rho)

    def test_dimension_mismatch(self):
        tensor = build_map(WVOProvider(fig2_model()), P0_REF)
        with pytest.raises(MapError, match="dimension"):
            apply_map(tensor, np.eye(3, dtype=complex) / 3)

    def test_rejects_bad_momentum(self):
        with pytest.raises(MapError, match="momentum"):
            build_map(WVOProvider(fig2_model()), -1.0)


class TestTransitionProbabilities:
    def test_free_model_identity(self):
        p = transition_probabilities(WVOProvider(free_model()), P0_REF)
        assert np.allclose(p, np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("kind", ["exact", "wvo", "rit"])
    def test_columns_stochastic(self, kind):
        provider = make_provider(kind, fig2_model())
        for e_kin in (0.3, 2.0, 10.0):
            p = transition_probabilities(provider, float(np.sqrt(2 * 0.1 * e_kin)))
            assert np.all(p >= 0.0)
            assert np.allclose(p.sum(axis=0), 1.0, atol=1e-6)

    def test_column_sum_breach_rejected(self):
        from coltherm.model import spectral_data

        class LeakyProvider:
            kind = "leaky"

            def __init__(self, model):
                self.model = model
                self.spectral = spectral_data(model)

            def probability_columns(self, p0s, incident):
                out = np.zeros((np.size(p0s), self.model.dim))
                out[np.arange(np.size(p0s)), incident] = 0.98  # loses weight
                return out

        with pytest.raises(MapError, match="unitarity breach"):
            transition_probabilities(LeakyProvider(fig2_model()), 1.0)

    def test_threshold_zeroing(self):
        # jumps steeper than the available kinetic energy are closed
        provider = ExactProvider(fig2_model())
        e_kin = 1.0  # below the 2 and 4 jumps from the bottom level
        p = transition_probabilities(provider, float(np.sqrt(2 * 0.1 * e_kin)))
        assert p[0, 3] == 0.0  # -2 -> +2 blocked
        assert p[1, 3] == 0.0 and p[2, 3] == 0.0  # -2 -> 0 blocked at 1.0


class TestKraus:
    def test_free_model_single_diagonal_unitary(self):
        ks = kraus_set(WVOProvider(free_model()), P0_REF)
        assert len(ks.operators) == 1
        op = ks.operators[0]
        assert max_abs(np.abs(op) - np.eye(4)) <= 1e-12
        assert ks.completeness_residual() <= 1e-12

    @pytest.mark.parametrize("kind", ["wvo", "rit"])
    def test_completeness(self, kind):
        rng = np.random.default_rng(13)
        for _ in range(5):
            p0 = float(np.sqrt(2 * 0.1 * rng.uniform(0.5, 40.0)))
            ks = kraus_set(make_provider(kind, fig2_model()), p0)
            assert ks.completeness_residual() <= 1e-10

    @pytest.mark.parametrize("kind", ["wvo", "rit"])
    def test_kraus_tensor_equivalence(self, kind):
        rng = np.random.default_rng(17)
        provider = make_provider(kind, fig2_model())
        tensor = build_map(provider, P0_REF)
        ks = kraus_set(provider, P0_REF)
        for _ in range(3):
            rho = random_density(rng, 4)
            assert max_abs(apply_map(tensor, rho) - apply_kraus(ks, rho)) <= 1e-10

    def test_entries_are_transmission_amplitudes(self):
        # each operator holds the t entries of its Bohr-frequency class,
        # at the incident level's total energy
        m = fig2_model()
        provider = RITProvider(m)
        ks = kraus_set(provider, P0_REF)
        e0 = m.h0_diag
        e_kin = P0_REF**2 / (2.0 * m.mass)
        acc = np.zeros((4, 4), dtype=complex)
        for op in ks.operators:
            acc += op
        for j in range(4):
            tab = provider.table(e_kin + e0[j])
            col = tab.open_channels.index(j)
            for a, jp in enumerate(tab.open_channels):
                assert acc[jp, j] == pytest.approx(tab.t[a, col], abs=1e-12)

    def test_one_operator_per_bohr_frequency(self):
        m = fig2_model()
        ks = kraus_set(WVOProvider(m), P0_REF)
        freqs = bohr_frequencies(m.h0_diag)
        assert len(ks.operators) <= len(freqs)
        assert len(set(np.round(ks.bohr_frequencies, 9))) == len(ks.operators)


class TestChoi:
    @pytest.mark.parametrize("kind", ["wvo", "rit"])
    def test_complete_positivity(self, kind):
        tensor = build_map(make_provider(kind, fig2_model()), P0_REF)
        w = eig_hermitian(choi_matrix(tensor)).eigenvalues
        assert w.min() >= -1e-8


class TestNarrowPacket:
    def test_reference_bound(self):
        # independent enumeration of the level-difference spectrum
        m = fig2_model()
        e0 = m.h0_diag
        diffs = sorted({round(a - b, 12) for a in e0 for b in e0})
        seps = [
            abs(x - y)
            for i, x in enumerate(diffs)
            for y in diffs[i + 1 :]
            if abs(x - y) > 1e-9
        ]
        expected = m.mass * min(seps) / (2.0 * np.sqrt(2.0))
        report = narrow_packet_check(m, p0=np.sqrt(2.0), sigma_p=0.005)
        assert report.min_bound == pytest.approx(expected)
        assert report.min_bound == pytest.approx(0.1 / np.sqrt(2.0))
        assert report.passed

    def test_wide_packet_fails(self):
        report = narrow_packet_check(fig2_model(), p0=np.sqrt(2.0), sigma_p=0.05)
        assert not report.passed

    def test_single_bohr_frequency_vacuous(self):
        m = InternalModel(
            unit_energies=[0.0], system_energies=[3.0],
            h_us=np.zeros((1, 1)), mass=1.0, length=1.0,
        )
        report = narrow_packet_check(m, p0=1.0, sigma_p=100.0)
        assert report.passed and report.min_bound == np.inf
        assert report.constraining_pairs == 0

    def test_vanishing_spread_always_passes(self):
        report = narrow_packet_check(fig2_model(), p0=3.0, sigma_p=1e-12)
        assert report.passed and report.ratio < 1e-9

    def test_rejects_bad_inputs(self):
        with pytest.raises(MapError):
            narrow_packet_check(fig2_model(), p0=1.0, sigma_p=0.0)
        with pytest.raises(MapError):
            narrow_packet_check(fig2_model(), p0=0.0, sigma_p=0.1)
