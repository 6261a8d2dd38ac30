"""Internal Hamiltonians of the colliding pair and their spectral bookkeeping.

A scatterer model couples the internal levels of a mobile unit (ladder
``unit_energies``) to a fixed finite system (``system_energies``) through a
coupling matrix that acts only inside a flat interaction window of length
``length``.  The stored basis is the product eigenbasis of the free
Hamiltonian, ordered unit-major: J = (j_U, j_S) -> j_U * dim_S + j_S.
Units: hbar = 1 throughout; energies, masses and lengths share one consistent
unit system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import HermitianEigen, check_hermitian, eig_hermitian, max_abs

__all__ = [
    "ModelError",
    "DegenerateSystemWarning",
    "InternalModel",
    "SpectralData",
    "TwoQubitParams",
    "build_two_qubit",
    "spectral_data",
    "shift_energy_zero",
]

TIME_REVERSAL_TOL = 1e-14
DEGENERACY_TOL = 1e-9
EPS_POSITIVE = 1e-6  # floor for e_max after an energy-zero shift


class ModelError(ValueError):
    pass


class DegenerateSystemWarning(UserWarning):
    """Two system levels coincide: populations and coherences couple."""


@dataclass(frozen=True)
class InternalModel:
    """Free level structure + interaction of the unit/system pair.

    ``h_us`` must be real symmetric in the stored basis unless
    ``allow_broken_time_reversal`` is set: real symmetry is exactly the
    condition that conjugation in this basis is a time-reversal symmetry of
    the collision, which the thermalization guarantees rest on.
    """

    unit_energies: np.ndarray
    system_energies: np.ndarray
    h_us: np.ndarray
    mass: float
    length: float
    allow_broken_time_reversal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "unit_energies", np.asarray(self.unit_energies, dtype=float))
        object.__setattr__(self, "system_energies", np.asarray(self.system_energies, dtype=float))
        object.__setattr__(self, "h_us", np.asarray(self.h_us, dtype=complex))
        if self.unit_energies.ndim != 1 or self.unit_energies.size < 1:
            raise ModelError("unit_energies must be a non-empty 1-D array")
        if self.system_energies.ndim != 1 or self.system_energies.size < 1:
            raise ModelError("system_energies must be a non-empty 1-D array")
        if not (np.isfinite(self.unit_energies).all() and np.isfinite(self.system_energies).all()):
            raise ModelError("level energies must be finite")
        if not (np.isfinite(self.mass) and self.mass > 0.0):
            raise ModelError(f"mass must be positive, got {self.mass}")
        if not (np.isfinite(self.length) and self.length > 0.0):
            raise ModelError(f"length must be positive, got {self.length}")
        dim = self.dim
        if self.h_us.shape != (dim, dim):
            raise ModelError(
                f"h_us has shape {self.h_us.shape}, expected {(dim, dim)}"
                " (product dimension dim_U * dim_S)"
            )
        check_hermitian(self.h_us)
        if not self.allow_broken_time_reversal:
            imag = max_abs(self.h_us.imag)
            if imag > TIME_REVERSAL_TOL:
                raise ModelError(
                    "h_us is not real symmetric in the stored basis "
                    f"(max imaginary part {imag:.3e}); this breaks micro-reversibility. "
                    "Pass allow_broken_time_reversal=True to build it anyway."
                )
        gaps = np.abs(self.system_energies[:, None] - self.system_energies[None, :])
        iu = np.triu_indices(self.dim_s, k=1)
        if iu[0].size and gaps[iu].min() < DEGENERACY_TOL:
            warnings.warn(
                "system Hamiltonian has (near-)degenerate levels: populations no longer "
                "decouple from coherences and population-only simulations are invalid",
                DegenerateSystemWarning,
                stacklevel=3,
            )

    @property
    def dim_u(self) -> int:
        return self.unit_energies.size

    @property
    def dim_s(self) -> int:
        return self.system_energies.size

    @property
    def dim(self) -> int:
        return self.dim_u * self.dim_s

    @property
    def h0_diag(self) -> np.ndarray:
        """Free eigenvalues e_J = e_U(j_U) + e_S(j_S), unit-major order."""
        return np.add.outer(self.unit_energies, self.system_energies).reshape(-1)

    @property
    def h0(self) -> np.ndarray:
        return np.diag(self.h0_diag.astype(complex))

    @property
    def h(self) -> np.ndarray:
        return self.h0 + self.h_us

    def level_pair(self, j: int) -> tuple[int, int]:
        """Global index -> (j_U, j_S)."""
        return divmod(int(j), self.dim_s)

    def level_index(self, j_u: int, j_s: int) -> int:
        return int(j_u) * self.dim_s + int(j_s)

    def basis_labels(self) -> list[str]:
        """Human-readable labels, '<j_U><j_S>' when both digits fit."""
        if self.dim_u <= 10 and self.dim_s <= 10:
            return [f"{u}{s}" for u in range(self.dim_u) for s in range(self.dim_s)]
        return [f"{u}-{s}" for u in range(self.dim_u) for s in range(self.dim_s)]

    @property
    def time_reversal_ok(self) -> bool:
        return max_abs(self.h_us.imag) <= TIME_REVERSAL_TOL

    @classmethod
    def from_h0_diag(
        cls,
        h0_diag,
        h_us,
        mass: float,
        length: float,
        allow_broken_time_reversal: bool = False,
    ) -> "InternalModel":
        """Generic model without a unit/system factorization (single-level unit)."""
        return cls(
            unit_energies=np.zeros(1),
            system_energies=np.asarray(h0_diag, dtype=float),
            h_us=h_us,
            mass=mass,
            length=length,
            allow_broken_time_reversal=allow_broken_time_reversal,
        )


@dataclass(frozen=True)
class SpectralData:
    """Eigen-data of the free and full internal Hamiltonians."""

    e0: np.ndarray          # free eigenvalues, stored-basis order
    e_prime: np.ndarray     # full-Hamiltonian eigenvalues, ascending
    v_prime: np.ndarray     # columns: eigenvectors of H in the stored basis
    e_max: float            # max over both spectra


def spectral_data(model: InternalModel) -> SpectralData:
    eig: HermitianEigen = eig_hermitian(model.h)
    e0 = model.h0_diag
    e_max = float(max(e0.max(), eig.eigenvalues.max()))
    return SpectralData(e0=e0, e_prime=eig.eigenvalues, v_prime=eig.eigenvectors, e_max=e_max)


@dataclass(frozen=True)
class TwoQubitParams:
    """One qubit for the unit, one for the system, XX + YY coupling."""

    omega_s: float
    omega_u: float
    j_x: float
    j_y: float

    def __post_init__(self):
        for name in ("omega_s", "omega_u", "j_x", "j_y"):
            if not np.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if self.omega_s <= 0.0 or self.omega_u <= 0.0:
            raise ModelError("qubit frequencies must be positive")

    @property
    def omega_sum(self) -> float:
        return self.omega_s + self.omega_u

    @property
    def omega_diff(self) -> float:
        return self.omega_u - self.omega_s

    @property
    def coupling_sum(self) -> float:
        return self.j_x + self.j_y

    @property
    def coupling_diff(self) -> float:
        return self.j_x - self.j_y


def build_two_qubit(params: TwoQubitParams, mass: float, length: float) -> InternalModel:
    """Two-qubit model in the basis {|00>, |01>, |10>, |11>} (unit digit first).

    Free part diag(W, dw, -dw, -W) with W = omega_s + omega_u,
    dw = omega_u - omega_s; the coupling only connects |00><->|11|
    (strength j_x - j_y) and |01><->|10| (strength j_x + j_y).
    """
    xi = params.coupling_diff
    big_xi = params.coupling_sum
    h_us = np.zeros((4, 4), dtype=complex)
    h_us[0, 3] = h_us[3, 0] = xi
    h_us[1, 2] = h_us[2, 1] = big_xi
    return InternalModel(
        unit_energies=np.array([params.omega_u, -params.omega_u]),
        system_energies=np.array([params.omega_s, -params.omega_s]),
        h_us=h_us,
        mass=mass,
        length=length,
    )


def shift_energy_zero(model: InternalModel) -> tuple[InternalModel, float]:
    """Recenter the energy zero to minimize the spectral norm of H.

    The shift s is the midpoint of the full spectrum, clamped so that the
    shifted e_max stays positive (floor EPS_POSITIVE).  The whole shift is
    carried by the unit ladder, which leaves every observable energy
    difference, Gibbs weight and heat unchanged.  Returns (shifted model, s).
    """
    sd = spectral_data(model)
    s = 0.5 * (float(sd.e_prime.max()) + float(sd.e_prime.min()))
    if sd.e_max - s < EPS_POSITIVE:
        s = sd.e_max - EPS_POSITIVE
    scale = max(1.0, float(np.max(np.abs(sd.e_prime))))
    if abs(s) <= 1e-12 * scale:
        return model, 0.0
    shifted = InternalModel(
        unit_energies=model.unit_energies - s,
        system_energies=model.system_energies,
        h_us=model.h_us,
        mass=model.mass,
        length=model.length,
        allow_broken_time_reversal=model.allow_broken_time_reversal,
    )
    return shifted, float(s)
