"""The narrow-packet collision map on the internal state.

A single collision at incident momentum p0 maps the internal density matrix
through a 4-index tensor built from amplitude tables evaluated at the
per-level total energies E(p0) + e_J.  A matrix element survives only when the
two transitions it connects release the same energy (equal Bohr jumps), which
is what narrow packets enforce; coherences between unequal jumps are erased.
For reflectionless providers the same map factorizes into one Kraus operator
per Bohr frequency of the free Hamiltonian.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import eig_hermitian, max_abs
from .model import InternalModel
from .thermostats import AmplitudeProvider

__all__ = [
    "MapError",
    "TraceWarning",
    "BOHR_TOL",
    "validate_density",
    "ScatteringMapTensor",
    "build_map",
    "apply_map",
    "transition_probabilities",
    "KrausSet",
    "kraus_set",
    "apply_kraus",
    "choi_matrix",
    "NarrowPacketReport",
    "narrow_packet_check",
]

logger = logging.getLogger(__name__)

BOHR_TOL = 1e-9
COLUMN_SUM_TOL = 1e-6
TRACE_TOL = 1e-8


class MapError(Exception):
    pass


class TraceWarning(UserWarning):
    pass


def validate_density(rho: np.ndarray, positivity_floor: float = -1e-10) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise MapError(f"density matrix must be square, got shape {rho.shape}")
    herm = max_abs(rho - rho.conj().T)
    if herm > 1e-12:
        raise MapError(f"density matrix not Hermitian: asymmetry {herm:.3e}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-10:
        raise MapError(f"density matrix trace {tr!r} deviates from 1")
    w = eig_hermitian(0.5 * (rho + rho.conj().T)).eigenvalues
    if w.min() < positivity_floor:
        raise MapError(f"density matrix has negative eigenvalue {w.min():.3e}")
    return rho


def _amplitude_columns(provider: AmplitudeProvider, p0: float):
    """Full-basis t/r columns at the per-level energies E(p0) + e_J."""
    model = provider.model
    e0 = provider.spectral.e0
    dim = model.dim
    e_kin = p0 * p0 / (2.0 * model.mass)
    t_cols = np.zeros((dim, dim), dtype=complex)
    r_cols = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        tab = provider.table(e_kin + e0[j], p0=p0)
        if j not in tab.open_channels:
            t_cols[j, j] = 1.0  # incident channel at threshold: pass-through
            continue
        col = tab.open_channels.index(j)
        idx = list(tab.open_channels)
        t_cols[idx, j] = tab.t[:, col]
        r_cols[idx, j] = tab.r[:, col]
    return t_cols, r_cols


@dataclass(frozen=True)
class ScatteringMapTensor:
    """Sparse 4-index map: entries[(J', K', J, K)] -> amplitude.

    rho'[J', K'] = sum entries[(J', K', J, K)] * rho[J, K]; only index
    quadruples passing the equal-Bohr-jump selection rule are stored.
    """

    dim: int
    p0: float
    kind: str
    entries: dict

    def population_matrix(self) -> np.ndarray:
        """P[J', J] = tensor element mapping rho_JJ to rho_J'J'."""
        p = np.zeros((self.dim, self.dim))
        for (jp, kp, j, k), amp in self.entries.items():
            if jp == kp and j == k:
                p[jp, j] = amp.real
        return p


def build_map(provider: AmplitudeProvider, p0: float) -> ScatteringMapTensor:
    """Assemble the collision map tensor at incident momentum p0."""
    if not (np.isfinite(p0) and p0 > 0.0):
        raise MapError(f"incident momentum must be positive, got {p0!r}")
    model = provider.model
    e0 = provider.spectral.e0
    dim = model.dim
    e_kin = p0 * p0 / (2.0 * model.mass)
    t_cols, r_cols = _amplitude_columns(provider, p0)
    open_from = e_kin + e0[:, None] - e0[None, :]  # [J, J'] = E_J - e_J'
    entries: dict = {}
    for j in range(dim):
        for k in range(dim):
            for jp in range(dim):
                if open_from[j, jp] <= 0.0 and jp != j:
                    continue
                d_j = e0[jp] - e0[j]
                for kp in range(dim):
                    if abs(d_j - (e0[kp] - e0[k])) > BOHR_TOL:
                        continue
                    amp = t_cols[jp, j] * np.conj(t_cols[kp, k]) + r_cols[jp, j] * np.conj(
                        r_cols[kp, k]
                    )
                    if amp != 0.0:
                        entries[(jp, kp, j, k)] = complex(amp)
    return ScatteringMapTensor(dim=dim, p0=float(p0), kind=provider.kind, entries=entries)


def apply_map(tensor: ScatteringMapTensor, rho: np.ndarray, check: bool = True) -> np.ndarray:
    """rho' = S rho; the output is re-validated (trace defects are flagged)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (tensor.dim, tensor.dim):
        raise MapError(f"state shape {rho.shape} does not match map dimension {tensor.dim}")
    out = np.zeros_like(rho)
    for (jp, kp, j, k), amp in tensor.entries.items():
        out[jp, kp] += amp * rho[j, k]
    if check:
        defect = abs(float(np.trace(out).real) - float(np.trace(rho).real))
        if defect > TRACE_TOL:
            warnings.warn(
                f"collision map changed the trace by {defect:.3e} "
                "(non-unitary amplitude table, e.g. near a channel threshold)",
                TraceWarning,
                stacklevel=2,
            )
        herm = max_abs(out - out.conj().T)
        if herm > 1e-10:
            raise MapError(f"collision map output not Hermitian: asymmetry {herm:.3e}")
    return out


def transition_probabilities(provider: AmplitudeProvider, p0: float) -> np.ndarray:
    """Column-stochastic matrix P[J', J](p0) of population transfer per collision."""
    if not (np.isfinite(p0) and p0 > 0.0):
        raise MapError(f"incident momentum must be positive, got {p0!r}")
    dim = provider.model.dim
    cols = provider.probability_columns(np.full(dim, p0), np.arange(dim))
    p = cols.T
    defect = np.max(np.abs(p.sum(axis=0) - 1.0))
    if defect > COLUMN_SUM_TOL:
        raise MapError(
            f"transition probability columns sum to 1 +- {defect:.3e} "
            f"(> {COLUMN_SUM_TOL:.0e}): unitarity breach"
        )
    return p


@dataclass(frozen=True)
class KrausSet:
    """One operator per distinct Bohr frequency of the free Hamiltonian."""

    p0: float
    kind: str
    bohr_frequencies: np.ndarray
    operators: list

    def completeness_residual(self) -> float:
        dim = self.operators[0].shape[0]
        acc = np.zeros((dim, dim), dtype=complex)
        for m in self.operators:
            acc += m.conj().T @ m
        return max_abs(acc - np.eye(dim))


def _cluster(values: np.ndarray, tol: float) -> list[float]:
    out: list[float] = []
    for v in np.sort(values):
        if not out or v - out[-1] > tol:
            out.append(float(v))
    return out


def bohr_frequencies(e0: np.ndarray, tol: float = BOHR_TOL) -> list[float]:
    diffs = (e0[:, None] - e0[None, :]).reshape(-1)
    return _cluster(diffs, tol)


def kraus_set(provider: AmplitudeProvider, p0: float) -> KrausSet:
    """Kraus factorization of the collision map, reflections neglected.

    Exact for the reflectionless providers; for the exact solver the dropped
    reflected weight is logged and the factorization is an approximation.
    """
    e0 = provider.spectral.e0
    dim = provider.model.dim
    t_cols, r_cols = _amplitude_columns(provider, p0)
    dropped = float(np.sum(np.abs(r_cols) ** 2))
    if dropped > 1e-12:
        logger.warning(
            "kraus_set(%s, p0=%g): dropped reflected probability mass %.3e",
            provider.kind, p0, dropped,
        )
    jumps = e0[:, None] - e0[None, :]  # [J', J] = Bohr jump of the transition
    ops = []
    kept = []
    for freq in bohr_frequencies(e0):
        mask = np.abs(jumps - freq) <= BOHR_TOL
        op = np.where(mask, t_cols, 0.0)
        if max_abs(op) > 0.0:
            ops.append(op)
            kept.append(freq)
    return KrausSet(p0=float(p0), kind=provider.kind, bohr_frequencies=np.array(kept), operators=ops)


def apply_kraus(ks: KrausSet, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for m in ks.operators:
        out += m @ rho @ m.conj().T
    return out


def choi_matrix(tensor: ScatteringMapTensor) -> np.ndarray:
    """Choi matrix C[(J,J'),(K,K')] = S^{JK}_{J'K'}; PSD iff the map is CP."""
    d = tensor.dim
    choi = np.zeros((d * d, d * d), dtype=complex)
    for (jp, kp, j, k), amp in tensor.entries.items():
        choi[j * d + jp, k * d + kp] = amp
    return choi


@dataclass(frozen=True)
class NarrowPacketReport:
    """Outcome of the packet-width admissibility check.

    The collision map is valid when the momentum spread is well below
    mass * |difference of Bohr jumps| / (2 p0) for every pair of transitions
    with distinct jumps; `ratio` is sigma_p over the tightest such bound.
    """

    p0: float
    sigma_p: float
    min_bound: float
    ratio: float
    passed: bool
    constraining_pairs: int

    PASS_RATIO = 0.1


def narrow_packet_check(model: InternalModel, p0: float, sigma_p: float) -> NarrowPacketReport:
    if sigma_p <= 0.0:
        raise MapError(f"momentum spread must be positive, got {sigma_p!r}")
    if p0 <= 0.0:
        raise MapError(f"incident momentum must be positive, got {p0!r}")
    freqs = np.array(bohr_frequencies(model.h0_diag))
    seps = np.abs(freqs[:, None] - freqs[None, :])
    distinct = seps[seps > BOHR_TOL]
    if distinct.size == 0:
        return NarrowPacketReport(
            p0=p0, sigma_p=sigma_p, min_bound=np.inf, ratio=0.0,
            passed=True, constraining_pairs=0,
        )
    min_bound = float(model.mass * distinct.min() / (2.0 * p0))
    ratio = sigma_p / min_bound
    return NarrowPacketReport(
        p0=p0, sigma_p=sigma_p, min_bound=min_bound, ratio=ratio,
        passed=ratio < NarrowPacketReport.PASS_RATIO,
        constraining_pairs=int(distinct.size // 2),
    )
