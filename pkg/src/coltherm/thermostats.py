"""Amplitude providers: the exact solver and the effective thermostat models.

All providers answer the same question: given the total energy of a collision
(kinetic + internal), what are the transmission/reflection amplitude matrices
over the open channels?

* ``exact`` evaluates the full multichannel scattering problem.
* ``wvo`` (wave-vector operator) keeps the interior propagation operator
  e^{i L sqrt(2m(E - H))} but drops reflections; valid for long scatterers.
* ``rit`` (random interaction time) further expands the square root at high
  energy: the internal state evolves under H for the classical crossing time
  tau(E) = L sqrt(m / 2E).  Both wvo and rit switch to the identity below the
  top of the combined spectrum (e_max), stay unitary and symmetric, and
  therefore thermalize the system.
* ``rit-packet`` is the deliberately broken control: same form as rit but the
  time is computed from the incident packet momentum, tau = L m / p0, which
  violates micro-reversibility.  Its low-energy cutoff is on the kinetic
  energy alone (p0^2/2m <= e_max), the form under which its stationary-state
  anomalies (population inversion for j_x = -j_y) have closed-form rates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import InternalModel, shift_energy_zero, spectral_data
from .scattering import (
    EPS_THRESHOLD,
    ChannelSet,
    ScatteringError,
    ThresholdWarning,
    channels,
    scattering_solution,
    stable_columns,
)

__all__ = [
    "PROVIDER_KINDS",
    "AmplitudeTable",
    "AmplitudeProvider",
    "ExactProvider",
    "WVOProvider",
    "RITProvider",
    "RITPacketProvider",
    "make_provider",
    "wvo_amplitudes",
    "rit_amplitudes",
    "rit_packet_amplitudes",
    "crossing_time",
]

PROVIDER_KINDS = ("exact", "wvo", "rit", "rit-packet")
COLUMN_SUM_TOL = 1e-6


@dataclass(frozen=True)
class AmplitudeTable:
    """Open-channel t/r matrices at one total energy (columns: incident)."""

    kind: str
    total_energy: float
    open_channels: tuple[int, ...]
    t: np.ndarray
    r: np.ndarray
    unitarity_res: float

    @property
    def n_open(self) -> int:
        return len(self.open_channels)


def crossing_time(total_energy: float, mass: float, length: float) -> float:
    """Classical traversal time L / v_E with v_E = sqrt(2 E / m); requires E > 0."""
    if total_energy <= 0.0:
        raise ValueError(f"crossing time undefined for total energy {total_energy!r} <= 0")
    return length * np.sqrt(mass / (2.0 * total_energy))


def _unitary_residual(t: np.ndarray, r: np.ndarray) -> float:
    n = t.shape[0]
    if n == 0:
        return 0.0
    s = np.block([[r, t], [t, r]])
    return float(np.max(np.abs(s.conj().T @ s - np.eye(2 * n))))


class AmplitudeProvider:
    """Shared plumbing: cached spectral data and the probability fast path."""

    kind: str = "abstract"

    def __init__(self, model: InternalModel):
        self.model = model
        self.spectral = spectral_data(model)

    # -- main surface -------------------------------------------------------

    def table(self, total_energy: float, p0: float | None = None) -> AmplitudeTable:
        raise NotImplementedError

    def probability_columns(self, p0s, incident) -> np.ndarray:
        """Transition-probability columns P[.|incident_b](p0_b), shape (B, dim).

        Default: one table per sample.  Subclasses override with batched
        closed forms; results are identical.
        """
        p0s = np.asarray(p0s, dtype=float)
        incident = np.asarray(incident, dtype=int)
        e0 = self.spectral.e0
        out = np.zeros((p0s.size, self.model.dim))
        for b, (p0, j0) in enumerate(zip(p0s, incident)):
            e_kin = p0 * p0 / (2.0 * self.model.mass)
            if e_kin <= EPS_THRESHOLD:
                out[b, j0] = 1.0
                continue
            tab = self.table(e_kin + e0[j0], p0=p0)
            if j0 not in tab.open_channels:
                out[b, j0] = 1.0
                continue
            col = tab.open_channels.index(j0)
            probs = np.abs(tab.t[:, col]) ** 2 + np.abs(tab.r[:, col]) ** 2
            out[b, list(tab.open_channels)] = probs
        return out

    # -- helpers ------------------------------------------------------------

    def _identity_table(self, cs: ChannelSet) -> AmplitudeTable:
        n = cs.n_open
        return AmplitudeTable(
            kind=self.kind,
            total_energy=cs.total_energy,
            open_channels=cs.open_channels,
            t=np.eye(n, dtype=complex),
            r=np.zeros((n, n), dtype=complex),
            unitarity_res=0.0,
        )

    @property
    def e_max(self) -> float:
        return self.spectral.e_max


class ExactProvider(AmplitudeProvider):
    """Amplitudes from the exact scattering solution.

    method="stable" (default) uses the rescaled interface solve, which stays
    accurate for opaque scatterers; method="transfer" extracts them from the
    transfer matrix.
    """

    kind = "exact"

    def __init__(self, model: InternalModel, method: str = "stable"):
        super().__init__(model)
        if method not in ("stable", "transfer"):
            raise ValueError(f"unknown exact method {method!r}")
        self.method = method

    def table(self, total_energy: float, p0: float | None = None) -> AmplitudeTable:
        cs = channels(self.model, total_energy, self.spectral)
        sol = scattering_solution(self.model, cs, self.spectral, method=self.method)
        return AmplitudeTable(
            kind=self.kind,
            total_energy=cs.total_energy,
            open_channels=cs.open_channels,
            t=sol.t,
            r=sol.r,
            unitarity_res=sol.unitarity_res,
        )

    def probability_columns(self, p0s, incident) -> np.ndarray:
        p0s = np.asarray(p0s, dtype=float)
        incident = np.asarray(incident, dtype=int)
        mass = self.model.mass
        e0 = self.spectral.e0
        energies = p0s * p0s / (2.0 * mass) + e0[incident]
        trivial = (p0s * p0s / (2.0 * mass)) <= EPS_THRESHOLD
        out = np.zeros((p0s.size, self.model.dim))
        if np.any(~trivial):
            t, r, open_mask = stable_columns(
                self.spectral, mass, self.model.length,
                energies[~trivial], incident[~trivial],
            )
            probs = np.abs(t) ** 2 + np.abs(r) ** 2
            sums = probs.sum(axis=1)
            bad = np.abs(sums - 1.0) > COLUMN_SUM_TOL
            if np.any(bad):
                gaps = np.abs(energies[~trivial][bad, None] - e0[None, :])
                if np.all(gaps.min(axis=1) < 1e-4):
                    warnings.warn(
                        "renormalized near-threshold probability columns "
                        f"(worst defect {np.max(np.abs(sums - 1.0)):.2e})",
                        ThresholdWarning,
                        stacklevel=2,
                    )
                else:
                    raise ScatteringError(
                        "probability column sum defect "
                        f"{np.max(np.abs(sums - 1.0)):.3e} exceeds {COLUMN_SUM_TOL:.0e}"
                    )
            out[~trivial] = probs / sums[:, None]
        if np.any(trivial):
            idx = np.nonzero(trivial)[0]
            out[idx, incident[idx]] = 1.0
        return out


class WVOProvider(AmplitudeProvider):
    """Reflectionless thermostat built on the interior wave-vector operator."""

    kind = "wvo"

    def table(self, total_energy: float, p0: float | None = None) -> AmplitudeTable:
        cs = channels(self.model, total_energy, self.spectral)
        if total_energy <= self.e_max:
            return self._identity_table(cs)
        sd = self.spectral
        m, length = self.model.mass, self.model.length
        k = np.sqrt(2.0 * m * (total_energy - sd.e0))
        kp = np.sqrt(2.0 * m * (total_energy - sd.e_prime))
        core = (sd.v_prime * np.exp(1j * kp * length)) @ sd.v_prime.conj().T
        phases = np.exp(-1j * 0.5 * length * k)
        t = phases[:, None] * core * phases[None, :]
        idx = list(cs.open_channels)
        t = t[np.ix_(idx, idx)]
        r = np.zeros_like(t)
        return AmplitudeTable(
            kind=self.kind, total_energy=total_energy,
            open_channels=cs.open_channels, t=t, r=r,
            unitarity_res=_unitary_residual(t, r),
        )

    def _interior_phases(self, energies: np.ndarray) -> np.ndarray:
        kp = np.sqrt(2.0 * self.model.mass * (energies[:, None] - self.spectral.e_prime[None, :]))
        return np.exp(1j * kp * self.model.length)

    def probability_columns(self, p0s, incident) -> np.ndarray:
        return _unitary_columns(self, p0s, incident, self._interior_phases)


class RITProvider(AmplitudeProvider):
    """Thermostat with a total-energy-dependent random interaction time.

    Evaluated on the energy-shifted model by default (the shift recenters the
    spectrum to minimize the expansion error); reported energies stay in the
    caller's original zero.
    """

    kind = "rit"

    def __init__(self, model: InternalModel, apply_shift: bool = True):
        if apply_shift:
            shifted, shift = shift_energy_zero(model)
        else:
            shifted, shift = model, 0.0
        super().__init__(shifted)
        self.original_model = model
        self.energy_shift = shift
        self.apply_shift = apply_shift

    def table(self, total_energy: float, p0: float | None = None) -> AmplitudeTable:
        e_shifted = total_energy - self.energy_shift
        cs = channels(self.model, e_shifted, self.spectral)
        cs_out = ChannelSet(
            total_energy=float(total_energy),
            k=cs.k, k_prime=cs.k_prime,
            open_channels=cs.open_channels, near_threshold=cs.near_threshold,
        )
        if e_shifted <= self.e_max:
            return self._identity_table(cs_out)
        sd = self.spectral
        tau = crossing_time(e_shifted, self.model.mass, self.model.length)
        core = (sd.v_prime * np.exp(-1j * tau * sd.e_prime)) @ sd.v_prime.conj().T
        phases = np.exp(1j * 0.5 * tau * sd.e0)
        t = phases[:, None] * core * phases[None, :]
        idx = list(cs.open_channels)
        t = t[np.ix_(idx, idx)]
        r = np.zeros_like(t)
        return AmplitudeTable(
            kind=self.kind, total_energy=float(total_energy),
            open_channels=cs_out.open_channels, t=t, r=r,
            unitarity_res=_unitary_residual(t, r),
        )

    def _interior_phases(self, energies: np.ndarray) -> np.ndarray:
        taus = self.model.length * np.sqrt(self.model.mass / (2.0 * energies))
        return np.exp(-1j * taus[:, None] * self.spectral.e_prime[None, :])

    def probability_columns(self, p0s, incident) -> np.ndarray:
        # the shift moves e0 and the thresholds consistently, so working in
        # shifted energies throughout gives the same probabilities
        return _unitary_columns(self, p0s, incident, self._interior_phases)


class RITPacketProvider(AmplitudeProvider):
    """Broken control: interaction time from the packet velocity, tau = L m / p0.

    Uses a kinetic-energy cutoff (identity for p0^2/2m <= e_max).  Because the
    time ignores the internal energy, micro-reversibility fails and the
    stationary state is generally not thermal.  Columns can lose weight to
    energetically forbidden transitions; the deficit is returned to the
    diagonal (unit passes without affecting the system).
    """

    kind = "rit-packet"

    def table(self, total_energy: float, p0: float | None = None) -> AmplitudeTable:
        if p0 is None or p0 <= 0.0:
            raise ValueError("rit-packet amplitudes need the incident momentum p0 > 0")
        cs = channels(self.model, total_energy, self.spectral)
        if p0 * p0 / (2.0 * self.model.mass) <= self.e_max:
            return self._identity_table(cs)
        sd = self.spectral
        tau = self.model.length * self.model.mass / p0
        core = (sd.v_prime * np.exp(-1j * tau * sd.e_prime)) @ sd.v_prime.conj().T
        phases = np.exp(1j * 0.5 * tau * sd.e0)
        t = phases[:, None] * core * phases[None, :]
        idx = list(cs.open_channels)
        t = t[np.ix_(idx, idx)]
        r = np.zeros_like(t)
        return AmplitudeTable(
            kind=self.kind, total_energy=float(total_energy),
            open_channels=cs.open_channels, t=t, r=r,
            unitarity_res=_unitary_residual(t, r),
        )

    def probability_columns(self, p0s, incident) -> np.ndarray:
        p0s = np.asarray(p0s, dtype=float)
        incident = np.asarray(incident, dtype=int)
        mass = self.model.mass
        sd = self.spectral
        dim = self.model.dim
        e_kin = p0s * p0s / (2.0 * mass)
        out = np.zeros((p0s.size, dim))
        low = e_kin <= self.e_max
        rows = np.arange(p0s.size)
        out[rows[low], incident[low]] = 1.0
        if np.any(~low):
            taus = self.model.length * mass / p0s[~low]
            inc = incident[~low]
            weights = np.exp(-1j * taus[:, None] * sd.e_prime[None, :]) * np.conj(sd.v_prime)[inc, :]
            cols = weights @ sd.v_prime.T
            probs = np.abs(cols) ** 2
            # zero energetically forbidden transitions, return the weight to
            # the diagonal: the unit is treated as passing without effect
            allowed = (e_kin[~low, None] + sd.e0[inc][:, None] - sd.e0[None, :]) > EPS_THRESHOLD
            probs = np.where(allowed, probs, 0.0)
            deficit = 1.0 - probs.sum(axis=1)
            sub = np.arange(probs.shape[0])
            probs[sub, inc] += np.maximum(deficit, 0.0)
            out[~low] = probs / probs.sum(axis=1)[:, None]
        return out


def _unitary_columns(provider, p0s, incident, interior_phases) -> np.ndarray:
    """Shared batched path for the reflectionless unitary models (wvo/rit).

    interior_phases(E_array) -> per-mode phase factors; probabilities are the
    squared entries of the rotated columns, exactly column-stochastic.
    """
    p0s = np.asarray(p0s, dtype=float)
    incident = np.asarray(incident, dtype=int)
    sd = provider.spectral
    mass = provider.model.mass
    dim = provider.model.dim
    energies = p0s * p0s / (2.0 * mass) + sd.e0[incident]  # shifted zero if provider shifted
    out = np.zeros((p0s.size, dim))
    low = energies <= provider.e_max
    rows = np.arange(p0s.size)
    out[rows[low], incident[low]] = 1.0
    if np.any(~low):
        phases = interior_phases(energies[~low])
        weights = phases * np.conj(sd.v_prime)[incident[~low], :]
        cols = weights @ sd.v_prime.T
        out[~low] = np.abs(cols) ** 2
    return out


def make_provider(kind: str, model: InternalModel, **options) -> AmplitudeProvider:
    """Provider factory keyed by the config value: exact | wvo | rit | rit-packet."""
    kind = kind.lower().replace("_", "-")
    if kind == "exact":
        return ExactProvider(model, **options)
    if kind == "wvo":
        return WVOProvider(model, **options)
    if kind == "rit":
        return RITProvider(model, **options)
    if kind == "rit-packet":
        return RITPacketProvider(model, **options)
    raise ValueError(f"unknown provider kind {kind!r}; expected one of {PROVIDER_KINDS}")


def wvo_amplitudes(model: InternalModel, total_energy: float) -> AmplitudeTable:
    return WVOProvider(model).table(total_energy)


def rit_amplitudes(
    model: InternalModel, total_energy: float, apply_shift: bool = True
) -> AmplitudeTable:
    return RITProvider(model, apply_shift=apply_shift).table(total_energy)


def rit_packet_amplitudes(
    model: InternalModel, p0: float, e_incident: float
) -> AmplitudeTable:
    if p0 <= 0.0:
        raise ValueError(f"incident momentum must be positive, got {p0}")
    total = p0 * p0 / (2.0 * model.mass) + e_incident
    return RITPacketProvider(model).table(total, p0=p0)
