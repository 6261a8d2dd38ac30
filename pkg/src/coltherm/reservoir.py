"""Thermal reservoir statistics and repeated-collision dynamics.

Units leave the reservoir with momenta drawn from the effusion law
mu(p) = (beta p / m) exp(-beta p^2 / 2m) and internal levels drawn from a
Gibbs state; the two temperatures may differ (non-equilibrium drive).  Rates
are effusion-weighted integrals of the per-collision transition
probabilities; trajectories sample the same kernel collision by collision.

Quadrature: the substitution u = beta p^2 / 2m turns the effusion weight into
exactly e^{-u}; panels split at every channel-opening energy and refine
adaptively (Gauss-Legendre, bisection error estimate) until each matrix
element converges in relative terms.  The tail beyond u = 40 is below every
tolerance used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InternalModel
from .thermostats import AmplitudeProvider

__all__ = [
    "ReservoirError",
    "QuadratureError",
    "ReservoirSpec",
    "CollisionRecord",
    "effusion_cdf",
    "sample_effusion",
    "gibbs_weights",
    "sample_internal",
    "RateMatrix",
    "integrated_rates",
    "SteadyState",
    "steady_state",
    "TrajectoryStats",
    "run_trajectories",
    "EntropyProduction",
    "entropy_production",
]

U_TAIL = 40.0
GL_ORDER = 15
MAX_DEPTH = 34
RATE_REL_TOL = 1e-7
RATE_ABS_TOL = 1e-14


class ReservoirError(Exception):
    pass


class QuadratureError(ReservoirError):
    pass


@dataclass(frozen=True)
class ReservoirSpec:
    """Inverse temperatures of the momentum (kinetic) and internal baths."""

    beta_kin: float
    beta_int: float

    def __post_init__(self):
        for name in ("beta_kin", "beta_int"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ReservoirError(f"{name} must be positive and finite, got {v!r}")

    @classmethod
    def from_temperatures(cls, t_kin: float, t_int: float) -> "ReservoirSpec":
        if t_kin <= 0.0 or t_int <= 0.0:
            raise ReservoirError(f"temperatures must be positive, got {t_kin}, {t_int}")
        return cls(beta_kin=1.0 / t_kin, beta_int=1.0 / t_int)

    @property
    def t_kin(self) -> float:
        return 1.0 / self.beta_kin

    @property
    def t_int(self) -> float:
        return 1.0 / self.beta_int


@dataclass(frozen=True)
class CollisionRecord:
    """One collision: sampled inputs, sampled outcome, heat released by the unit."""

    p0: float
    unit_in: int
    unit_out: int
    system_in: int
    system_out: int
    heat: float  # e_U(unit_in) - e_U(unit_out)


def effusion_cdf(p, beta_kin: float, mass: float):
    p = np.asarray(p, dtype=float)
    return 1.0 - np.exp(-beta_kin * p * p / (2.0 * mass))


def sample_effusion(beta_kin: float, mass: float, rng: np.random.Generator) -> float:
    """One momentum from the effusion law, by inverse CDF."""
    u = rng.random()
    return float(np.sqrt(-2.0 * mass * np.log1p(-u) / beta_kin))


def gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    """Normalized Boltzmann weights; beta = 0 gives the uniform limit."""
    energies = np.asarray(energies, dtype=float)
    if beta == 0.0:
        return np.full(energies.size, 1.0 / energies.size)
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def sample_internal(beta_int: float, model: InternalModel, rng: np.random.Generator) -> int:
    """One unit level index from the internal Gibbs state."""
    cum = np.cumsum(gibbs_weights(model.unit_energies, beta_int))
    return int(np.searchsorted(cum, rng.random(), side="right"))


# ---------------------------------------------------------------------------
# rate integrals
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _panel(f, a: float, b: float) -> np.ndarray:
    x, w = _gl_nodes(GL_ORDER)
    u = 0.5 * (b - a) * x + 0.5 * (b + a)
    vals = f(u)
    return 0.5 * (b - a) * (w @ vals)


def _adaptive_panel(f, a: float, b: float, rel_tol: float, abs_tol: float, depth: int) -> np.ndarray:
    whole = _panel(f, a, b)
    mid = 0.5 * (a + b)
    left = _panel(f, a, mid)
    right = _panel(f, mid, b)
    refined = left + right
    err = np.abs(whole - refined)
    if np.all(err <= rel_tol * np.abs(refined) + abs_tol):
        return refined
    if depth <= 0:
        raise QuadratureError(
            f"rate quadrature did not converge on panel [{a:.6g}, {b:.6g}]: "
            f"max error {err.max():.3e}"
        )
    return _adaptive_panel(f, a, mid, rel_tol, abs_tol, depth - 1) + _adaptive_panel(
        f, mid, b, rel_tol, abs_tol, depth - 1
    )


def _column_breakpoints(provider: AmplitudeProvider, spec: ReservoirSpec, j: int) -> list[float]:
    sd = provider.spectral
    beta = spec.beta_kin
    cand = set()
    for e in np.concatenate([sd.e0, sd.e_prime, [sd.e_max]]):
        u = beta * (float(e) - float(sd.e0[j]))
        if 0.0 < u < U_TAIL:
            cand.add(u)
    u = beta * sd.e_max  # kinetic cutoff of the packet-time control
    if 0.0 < u < U_TAIL:
        cand.add(u)
    return [0.0] + sorted(cand) + [U_TAIL]


@dataclass(frozen=True)
class RateMatrix:
    """Effusion-averaged transition rates.

    full[J, J'] = p(J -> J') over the combined unit+system levels
    (row-stochastic); system[s, s'] is the reduction over a Gibbs-weighted
    unit, the kernel of the population evolution p'(s') = sum_s p(s) p(s->s').
    """

    full: np.ndarray
    system: np.ndarray
    spec: ReservoirSpec
    kind: str


def integrated_rates(
    provider: AmplitudeProvider,
    spec: ReservoirSpec,
    rel_tol: float = RATE_REL_TOL,
) -> RateMatrix:
    """Integrate mu(p0) P_{J'J}(p0) over incident momenta for every level pair."""
    model = provider.model
    dim = model.dim
    beta = spec.beta_kin
    mass = model.mass
    full = np.zeros((dim, dim))
    for j in range(dim):
        def integrand(us: np.ndarray, _j=j) -> np.ndarray:
            p0 = np.sqrt(2.0 * mass * us / beta)
            cols = provider.probability_columns(p0, np.full(us.size, _j, dtype=int))
            return np.exp(-us)[:, None] * cols

        edges = _column_breakpoints(provider, spec, j)
        total = np.zeros(dim)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a <= 0.0:
                continue
            total += _adaptive_panel(integrand, a, b, rel_tol, RATE_ABS_TOL, MAX_DEPTH)
        full[j, :] = total
    row_defect = float(np.max(np.abs(full.sum(axis=1) - 1.0)))
    if row_defect > 1e-8:
        raise QuadratureError(f"rate rows deviate from stochasticity by {row_defect:.3e}")
    w_int = gibbs_weights(model.unit_energies, spec.beta_int)
    dim_s = model.dim_s
    system = np.zeros((dim_s, dim_s))
    for ju in range(model.dim_u):
        for js in range(dim_s):
            row = full[model.level_index(ju, js)].reshape(model.dim_u, dim_s)
            system[js, :] += w_int[ju] * row.sum(axis=0)
    return RateMatrix(full=full, system=system, spec=spec, kind=provider.kind)


# ---------------------------------------------------------------------------
# stationary distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    """Fixed point(s) of a row-stochastic kernel pi = pi P."""

    pi: np.ndarray | None
    residual: float
    unique: bool
    classes: list


def _recurrent_classes(p: np.ndarray, tol: float = 1e-14) -> list[list[int]]:
    n = p.shape[0]
    adj = p > tol
    np.fill_diagonal(adj, True)
    reach = adj.copy()
    for _ in range(int(np.ceil(np.log2(max(n, 2)))) + 1):
        reach = reach | (reach @ reach)
    classes: list[list[int]] = []
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        mutual = reach[i] & reach[:, i]
        members = list(np.nonzero(mutual)[0])
        for m in members:
            seen[m] = True
        outside = reach[i] & ~mutual
        if not outside.any():  # no escape: recurrent class
            classes.append(members)
    return classes


def _power_iterate(p: np.ndarray, tol: float = 1e-10, max_iter: int = 200000) -> np.ndarray:
    n = p.shape[0]
    damped = 0.5 * (p + np.eye(n))  # kills periodicity, keeps the fixed point
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = pi @ damped
        new /= new.sum()
        if np.abs(new @ p - new).sum() <= tol:
            return new
        pi = new
    raise ReservoirError("power iteration for the stationary distribution did not converge")


def steady_state(rates: RateMatrix | np.ndarray) -> SteadyState:
    """Stationary distribution of the system-level kernel (or a raw matrix).

    Reducible chains are reported as non-unique with one stationary vector
    per recurrent class (embedded in the full index space).
    """
    p = rates.system if isinstance(rates, RateMatrix) else np.asarray(rates, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ReservoirError(f"rate matrix must be square, got {p.shape}")
    if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-8:
        raise ReservoirError("rate matrix rows must sum to 1")
    n = p.shape[0]
    classes = _recurrent_classes(p)
    if len(classes) == 1 and len(classes[0]) == n:
        pi = _power_iterate(p)
        return SteadyState(pi=pi, residual=float(np.abs(pi @ p - pi).sum()), unique=True,
                           classes=[(classes[0], pi)])
    out = []
    for members in classes:
        sub = p[np.ix_(members, members)]
        sub = sub / sub.sum(axis=1, keepdims=True)
        pi_sub = _power_iterate(sub)
        pi_full = np.zeros(n)
        pi_full[members] = pi_sub
        out.append((members, pi_full))
    if len(out) == 1:
        pi = out[0][1]
        return SteadyState(pi=pi, residual=float(np.abs(pi @ p - pi).sum()), unique=True,
                           classes=out)
    return SteadyState(pi=None, residual=np.nan, unique=False, classes=out)


# ---------------------------------------------------------------------------
# Monte-Carlo trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStats:
    """Ensemble summary of repeated-collision trajectories.

    series[k, s] is the ensemble population of system level s after k
    collisions; steady values average over the post-burn-in window with
    standard errors taken across independent trajectories.
    """

    series: np.ndarray
    steady_populations: np.ndarray
    steady_se: np.ndarray
    mean_heat: float
    heat_se: float
    n_trajectories: int
    n_collisions: int
    burn_in: int
    seed: int


def _traj_rngs(seed: int, n: int) -> list[np.random.Generator]:
    # counter-based Philox streams keyed by (seed, trajectory): reordering or
    # parallelizing trajectories cannot change any stream
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,))))
        for i in range(n)
    ]


def _initial_system_populations(model: InternalModel, rho0) -> np.ndarray:
    dim_s = model.dim_s
    if rho0 is None:
        return np.full(dim_s, 1.0 / dim_s)
    rho0 = np.asarray(rho0)
    if rho0.ndim == 1 and rho0.size == dim_s:
        pops = rho0.astype(float)
    elif rho0.ndim == 2 and rho0.shape == (dim_s, dim_s):
        pops = np.diag(rho0).real
    elif rho0.ndim == 2 and rho0.shape == (model.dim, model.dim):
        pops = np.diag(rho0).real.reshape(model.dim_u, dim_s).sum(axis=0)
    else:
        raise ReservoirError(f"cannot interpret initial state of shape {rho0.shape}")
    if pops.min() < -1e-12 or abs(pops.sum() - 1.0) > 1e-8:
        raise ReservoirError("initial populations must be a probability vector")
    return np.clip(pops, 0.0, None) / pops.sum()


def run_trajectories(
    provider: AmplitudeProvider,
    spec: ReservoirSpec,
    rho0,
    n_trajectories: int,
    n_collisions: int,
    seed: int,
    burn_in_fraction: float = 0.5,
) -> TrajectoryStats:
    """Simulate repeated collisions with freshly drawn units.

    Each collision draws (p0, unit level), samples the outgoing combined level
    from the transition-probability column, and records the heat released by
    the unit's internal state.  One Philox stream per trajectory makes the
    result bit-reproducible for a given seed, independent of batching.
    """
    if n_trajectories < 1 or n_collisions < 1:
        raise ReservoirError("need at least one trajectory and one collision")
    model = provider.model
    dim_s, dim_u = model.dim_s, model.dim_u
    rngs = _traj_rngs(seed, n_trajectories)
    cum_int = np.cumsum(gibbs_weights(model.unit_energies, spec.beta_int))
    pops0 = np.cumsum(_initial_system_populations(model, rho0))
    states = np.array([int(np.searchsorted(pops0, rng.random(), side="right")) for rng in rngs])
    burn_in = int(burn_in_fraction * n_collisions)
    n_post = n_collisions - burn_in
    if n_post < 1:
        raise ReservoirError("burn-in leaves no post-burn-in collisions")
    series = np.zeros((n_collisions + 1, dim_s))
    np.add.at(series[0], states, 1.0)
    occupancy = np.zeros((n_trajectories, dim_s))
    heat = np.zeros(n_trajectories)
    e_unit = model.unit_energies
    two_m = 2.0 * model.mass
    for step in range(1, n_collisions + 1):
        u_eff = np.array([rng.random() for rng in rngs])
        p0s = np.sqrt(-two_m * np.log1p(-u_eff) / spec.beta_kin)
        units = np.array(
            [int(np.searchsorted(cum_int, rng.random(), side="right")) for rng in rngs]
        )
        incident = units * dim_s + states
        cols = provider.probability_columns(p0s, incident)
        cols = cols / cols.sum(axis=1, keepdims=True)
        draws = np.array([rng.random() for rng in rngs])
        cum = np.cumsum(cols, axis=1)
        outcome = (cum < draws[:, None]).sum(axis=1)
        outcome = np.minimum(outcome, model.dim - 1)
        units_out, states = np.divmod(outcome, dim_s)
        np.add.at(series[step], states, 1.0)
        if step > burn_in:
            heat += e_unit[units] - e_unit[units_out]
            occupancy[np.arange(n_trajectories), states] += 1.0
    series /= n_trajectories
    occupancy /= n_post
    heat /= n_post
    steady = occupancy.mean(axis=0)
    if n_trajectories > 1:
        steady_se = occupancy.std(axis=0, ddof=1) / np.sqrt(n_trajectories)
        heat_se = float(heat.std(ddof=1) / np.sqrt(n_trajectories))
    else:
        steady_se = np.full(dim_s, np.nan)
        heat_se = float("nan")
    return TrajectoryStats(
        series=series,
        steady_populations=steady,
        steady_se=steady_se,
        mean_heat=float(heat.mean()),
        heat_se=heat_se,
        n_trajectories=n_trajectories,
        n_collisions=n_collisions,
        burn_in=burn_in,
        seed=seed,
    )


@dataclass(frozen=True)
class EntropyProduction:
    """Per-collision heat flow and the entropy it produces.

    heat is the post-burn-in average of the energy released by the units'
    internal states; delta_s = heat * (1/T_kin - 1/T_int), which equals
    Q |1/T_int - 1/T_kin| with Q counted hot-to-cold, and is non-negative in
    the steady state up to statistical error.
    """

    heat: float
    heat_se: float
    delta_s: float
    delta_s_se: float
    stats: TrajectoryStats


def entropy_production(
    provider: AmplitudeProvider,
    spec: ReservoirSpec,
    n_trajectories: int,
    n_collisions: int,
    seed: int,
    rho0=None,
    burn_in_fraction: float = 0.5,
) -> EntropyProduction:
    stats = run_trajectories(
        provider, spec, rho0, n_trajectories, n_collisions, seed,
        burn_in_fraction=burn_in_fraction,
    )
    factor = 1.0 / spec.t_kin - 1.0 / spec.t_int
    return EntropyProduction(
        heat=stats.mean_heat,
        heat_se=stats.heat_se,
        delta_s=stats.mean_heat * factor,
        delta_s_se=stats.heat_se * abs(factor),
        stats=stats,
    )
