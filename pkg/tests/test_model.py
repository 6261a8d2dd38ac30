import numpy as np
import pytest

from coltherm.linalg import max_abs
from coltherm.model import (
    DegenerateSystemWarning,
    InternalModel,
    ModelError,
    TwoQubitParams,
    build_two_qubit,
    shift_energy_zero,
    spectral_data,
)


def fig2_model(j_x=1.0, j_y=0.0, mass=0.1, length=50.0):
    return build_two_qubit(TwoQubitParams(1.0, 1.0, j_x, j_y), mass=mass, length=length)


class TestTwoQubitBuilder:
    def test_resonant_x_coupling(self):
        m = fig2_model()
        assert np.allclose(m.h0_diag, [2.0, 0.0, 0.0, -2.0])
        h_us = m.h_us
        assert h_us[0, 3] == 1.0 and h_us[3, 0] == 1.0
        assert h_us[1, 2] == 1.0 and h_us[2, 1] == 1.0
        assert np.count_nonzero(h_us) == 4

    def test_zero_coupling(self):
        m = fig2_model(j_x=0.0, j_y=0.0)
        assert max_abs(m.h_us) == 0.0
        assert max_abs(m.h - m.h0) == 0.0

    def test_e_max_at_resonance(self):
        sd = spectral_data(fig2_model())
        assert sd.e_max == pytest.approx(np.sqrt(5.0), abs=1e-12)

    def test_real_symmetric_in_stored_basis(self):
        # conjugation in this basis is a time-reversal symmetry
        m = fig2_model(j_x=0.7, j_y=-0.3)
        assert max_abs(m.h_us.imag) <= 1e-14
        assert max_abs(m.h.imag) <= 1e-14
        assert max_abs(m.h - m.h.T) <= 1e-14

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ModelError):
            TwoQubitParams(omega_s=0.0, omega_u=1.0, j_x=0.0, j_y=0.0)

    def test_labels_and_index_roundtrip(self):
        m = fig2_model()
        assert m.basis_labels() == ["00", "01", "10", "11"]
        for j in range(m.dim):
            ju, js = m.level_pair(j)
            assert m.level_index(ju, js) == j


class TestSpectralData:
    def test_coupled_eigenvalues(self):
        sd = spectral_data(fig2_model())
        r5 = np.sqrt(5.0)
        assert np.allclose(sd.e_prime, [-r5, -1.0, 1.0, r5], atol=1e-12)

    def test_free_limit_is_sorted_permutation(self):
        m = fig2_model(j_x=0.0, j_y=0.0)
        sd = spectral_data(m)
        assert np.allclose(sd.e_prime, np.sort(m.h0_diag))
        perm = np.abs(sd.v_prime)
        assert np.allclose(perm @ perm.T, np.eye(4))
        assert np.allclose(np.sort(perm.reshape(-1))[-4:], 1.0)

    def test_equal_couplings(self):
        # sum/difference combinations: (2, 0) and (0, 2) -> both branches +-2
        sd = spectral_data(fig2_model(j_x=1.0, j_y=1.0))
        assert np.allclose(sd.e_prime, [-2.0, -2.0, 2.0, 2.0], atol=1e-12)


class TestShiftEnergyZero:
    def test_symmetric_spectrum_unchanged(self):
        m = fig2_model()
        shifted, s = shift_energy_zero(m)
        assert s == 0.0
        assert shifted is m

    def test_midpoint_shift(self):
        m = InternalModel(
            unit_energies=[0.0], system_energies=[0.0, 4.0],
            h_us=np.zeros((2, 2)), mass=1.0, length=1.0,
        )
        shifted, s = shift_energy_zero(m)
        assert s == pytest.approx(2.0)
        assert np.allclose(spectral_data(shifted).e_prime, [-2.0, 2.0])

    def test_detuned_two_qubit_still_centered(self):
        # spectrum +-sqrt(10), +-sqrt(2) is symmetric about zero
        m = build_two_qubit(TwoQubitParams(1.0, 2.0, 1.0, 0.0), 0.1, 50.0)
        _, s = shift_energy_zero(m)
        assert s == 0.0

    def test_negative_spectrum_recentered(self):
        m = InternalModel(
            unit_energies=[-5.0], system_energies=[-3.0, -2.0],
            h_us=np.zeros((2, 2)), mass=1.0, length=1.0,
        )
        shifted, s = shift_energy_zero(m)
        assert s == pytest.approx(-7.5)
        assert spectral_data(shifted).e_max == pytest.approx(0.5)

    def test_emax_clamp_for_degenerate_spectrum(self):
        # centering a single-level spectrum would put e_max at 0; the clamp
        # keeps it strictly positive
        m = InternalModel(
            unit_energies=[-5.0], system_energies=[0.0],
            h_us=np.zeros((1, 1)), mass=1.0, length=1.0,
        )
        shifted, s = shift_energy_zero(m)
        sd = spectral_data(shifted)
        assert sd.e_max > 0.0
        assert sd.e_max == pytest.approx(1e-6, rel=1e-6)

    def test_observables_invariant(self):
        m = InternalModel(
            unit_energies=[0.0, 3.0], system_energies=[1.0, 2.0],
            h_us=0.1 * np.ones((4, 4)), mass=1.0, length=1.0,
        )
        shifted, s = shift_energy_zero(m)
        assert np.allclose(np.diff(shifted.unit_energies), np.diff(m.unit_energies))
        assert np.allclose(shifted.h0_diag, m.h0_diag - s)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_spectral_norm_minimality(self, seed):
        rng = np.random.default_rng(seed)
        h_us = rng.normal(size=(4, 4))
        h_us = 0.5 * (h_us + h_us.T)
        m = InternalModel(
            unit_energies=rng.normal(size=2) + 2.0, system_energies=rng.normal(size=2),
            h_us=h_us, mass=1.0, length=1.0,
        )
        shifted, s = shift_energy_zero(m)
        e_prime = spectral_data(m).e_prime

        def spectral_norm(shift):
            return np.max(np.abs(e_prime - shift))

        for delta in (1e-6, 1e-3, 0.1, -1e-6, -0.1):
            assert spectral_norm(s + delta) >= spectral_norm(s) - 1e-12


class TestValidation:
    def test_complex_coupling_rejected(self):
        h_us = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
        with pytest.raises(ModelError, match="micro-reversibility"):
            InternalModel(
                unit_energies=[0.0], system_energies=[0.0, 1.0],
                h_us=h_us, mass=1.0, length=1.0,
            )

    def test_escape_hatch_flag(self):
        h_us = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
        m = InternalModel(
            unit_energies=[0.0], system_energies=[0.0, 1.0],
            h_us=h_us, mass=1.0, length=1.0, allow_broken_time_reversal=True,
        )
        assert not m.time_reversal_ok

    def test_degenerate_system_warns(self):
        with pytest.warns(DegenerateSystemWarning):
            InternalModel(
                unit_energies=[0.0], system_energies=[1.0, 1.0 + 1e-10],
                h_us=np.zeros((2, 2)), mass=1.0, length=1.0,
            )

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mass=-1.0, length=1.0),
            dict(mass=1.0, length=0.0),
        ],
    )
    def test_rejects_bad_geometry(self, kwargs):
        with pytest.raises(ModelError):
            InternalModel(
                unit_energies=[0.0], system_energies=[0.0, 1.0],
                h_us=np.zeros((2, 2)), **kwargs,
            )

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ModelError, match="shape"):
            InternalModel(
                unit_energies=[0.0, 1.0], system_energies=[0.0, 1.0],
                h_us=np.zeros((3, 3)), mass=1.0, length=1.0,
            )

    def test_generic_from_h0_diag(self):
        m = InternalModel.from_h0_diag([0.0, 1.5], [[0.0, 0.3], [0.3, 0.0]], 1.0, 2.0)
        assert m.dim_u == 1 and m.dim_s == 2
        assert np.allclose(m.h0_diag, [0.0, 1.5])
