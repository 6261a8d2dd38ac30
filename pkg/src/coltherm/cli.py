"""Command-line front end.

Subcommands:

* ``transition-prob`` -- per-collision transition probability vs kinetic
  energy (or momentum) for the exact solver and both thermostat models;
* ``thermalize``      -- stationary system populations vs bath temperature,
  including the broken packet-time control and the thermal reference;
* ``entropy``         -- entropy production per collision vs the kinetic
  temperature at fixed internal temperature;
* ``amplitudes``      -- dump the t/r amplitude tables at one total energy;
* ``validate``        -- run the invariant suite and emit a JSON report.

Report commands write CSV (or JSON) with a metadata header carrying the
config hash and seed, plus a rendered PNG figure next to the table
(``--no-plot`` or ``output.plot: false`` disables it).  Exit codes: 0 success,
1 validation failure, 2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .collision_map import (
    apply_kraus,
    apply_map,
    build_map,
    choi_matrix,
    kraus_set,
    transition_probabilities,
    validate_density,
)
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .linalg import LinAlgError, eig_hermitian, max_abs
from .model import InternalModel, TwoQubitParams, build_two_qubit
from .output import write_result
from .reservoir import (
    ReservoirError,
    ReservoirSpec,
    effusion_cdf,
    entropy_production,
    gibbs_weights,
    integrated_rates,
    run_trajectories,
)
from .scattering import ScatteringError, channels, scattering_solution
from .thermostats import AmplitudeProvider, make_provider

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coltherm",
        description="Collisional quantum thermostats: scattering, thermalization, entropy production.",
    )
    parser.add_argument("--version", action="version", version=f"coltherm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the YAML experiment config")
    common.add_argument("--seed", type=int, default=None, help="override run.seed")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--out", default=None, help="override output.path")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="override output.format")
    common.add_argument("--no-plot", action="store_true", help="skip the figure render")
    for name, help_text in (
        ("transition-prob", "transition probability vs kinetic energy"),
        ("thermalize", "stationary populations vs temperature"),
        ("entropy", "entropy production vs kinetic temperature"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    amp = sub.add_parser("amplitudes", parents=[common], help="dump t/r tables at one energy")
    amp.add_argument("--energy", type=float, required=True, help="total collision energy")
    amp.add_argument("--p0", type=float, default=None,
                     help="incident momentum (required for rit-packet)")
    sub.add_parser("validate", parents=[common], help="run the invariant suite")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    run = cfg.run if args.seed is None else replace(cfg.run, seed=args.seed)
    output = cfg.output
    if args.out is not None:
        output = replace(output, path=args.out)
    if args.format is not None:
        output = replace(output, format=args.format)
    if getattr(args, "no_plot", False):
        output = replace(output, plot=False)
    return replace(cfg, run=run, output=output)


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "tool": f"coltherm {__version__}",
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg.run.seed,
    }


def _point_seed(base_seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=tuple(key)).generate_state(1)[0])


def _parse_transition(model: InternalModel, cfg: ExperimentConfig) -> tuple[int, int]:
    labels = model.basis_labels()
    frm = cfg.sweep.transition_from if cfg.sweep.transition_from is not None else labels[0]
    to = cfg.sweep.transition_to if cfg.sweep.transition_to is not None else labels[-1]
    try:
        return labels.index(str(frm)), labels.index(str(to))
    except ValueError:
        raise ConfigError(
            f"unknown transition label ({frm!r} -> {to!r}); valid labels: {labels}"
        ) from None


def _sweep_momenta(cfg: ExperimentConfig, model: InternalModel) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(cfg.sweep.values)
    if cfg.sweep.variable == "kinetic_energy":
        e_kin = values
    elif cfg.sweep.variable == "p0":
        e_kin = values * values / (2.0 * model.mass)
    else:
        raise ConfigError(
            "transition-prob sweeps over 'kinetic_energy' or 'p0', "
            f"got {cfg.sweep.variable!r}"
        )
    if np.any(e_kin <= 0.0):
        raise ConfigError("kinetic energies in the sweep must be positive")
    return e_kin, np.sqrt(2.0 * model.mass * e_kin)


def cmd_transition_prob(cfg: ExperimentConfig):
    if cfg.sweep is None:
        raise ConfigError("transition-prob needs a sweep section")
    model = cfg.build_model()
    j_in, j_out = _parse_transition(model, cfg)
    e_kin, p0s = _sweep_momenta(cfg, model)
    incident = np.full(p0s.size, j_in, dtype=int)
    columns = ["kinetic_energy", "P_exact", "P_wvo", "P_rit"]
    series = {}
    for kind in ("exact", "wvo", "rit"):
        provider = make_provider(kind, model)
        series[kind] = provider.probability_columns(p0s, incident)[:, j_out]
    rows = [
        (float(e_kin[i]), float(series["exact"][i]), float(series["wvo"][i]),
         float(series["rit"][i]))
        for i in range(p0s.size)
    ]
    return columns, rows


def _packet_tag(j_y: float) -> str:
    return f"jy{j_y:g}"


def cmd_thermalize(cfg: ExperimentConfig, threads: int = 1):
    if cfg.sweep is None or cfg.sweep.variable != "temperature":
        raise ConfigError("thermalize sweeps over 'temperature'")
    model = cfg.build_model()
    ground = int(np.argmin(model.system_energies))
    providers: list[tuple[str, AmplitudeProvider]] = [
        (kind, make_provider(kind, model)) for kind in ("exact", "wvo", "rit")
    ]
    packet_jy = cfg.run.rit_packet_j_y
    if packet_jy is None and cfg.system.kind == "two_qubit":
        packet_jy = (cfg.system.params["j_y"],)
    if cfg.system.kind == "two_qubit":
        for j_y in packet_jy:
            pm = build_two_qubit(
                TwoQubitParams(
                    omega_s=cfg.system.params["omega_s"],
                    omega_u=cfg.system.params["omega_u"],
                    j_x=cfg.system.params["j_x"],
                    j_y=j_y,
                ),
                mass=model.mass, length=model.length,
            )
            providers.append((f"rit_packet_{_packet_tag(j_y)}", make_provider("rit-packet", pm)))
    else:
        providers.append(("rit_packet", make_provider("rit-packet", model)))
    columns = ["T"]
    for name, _ in providers:
        short = {"exact": "exact", "wvo": "wvo", "rit": "rit"}.get(name, name)
        columns += [f"pop_{short}", f"err_{short}"]
    columns.append("pop_gibbs")

    def one_point(i: int):
        temp = cfg.sweep.values[i]
        spec = ReservoirSpec.from_temperatures(temp, temp)
        row = [float(temp)]
        for j, (_, provider) in enumerate(providers):
            stats = run_trajectories(
                provider, spec, None, cfg.run.trajectories, cfg.run.collisions,
                seed=_point_seed(cfg.run.seed, i, j),
                burn_in_fraction=cfg.run.burn_in,
            )
            row += [float(stats.steady_populations[ground]), float(stats.steady_se[ground])]
        row.append(float(gibbs_weights(model.system_energies, 1.0 / temp)[ground]))
        return tuple(row)

    rows = _run_points(one_point, len(cfg.sweep.values), threads)
    return columns, rows


def cmd_entropy(cfg: ExperimentConfig, threads: int = 1):
    if cfg.sweep is None or cfg.sweep.variable != "t_kin":
        raise ConfigError("entropy sweeps over 't_kin' with reservoir.t_int fixed")
    if cfg.reservoir is None:
        raise ConfigError("entropy needs a reservoir section fixing t_int")
    model = cfg.build_model()
    t_int = cfg.reservoir.t_int
    providers = [(kind, make_provider(kind, model)) for kind in ("exact", "wvo", "rit")]
    columns = ["T_kin"]
    for name, _ in providers:
        columns += [f"dS_{name}", f"err_{name}"]

    def one_point(i: int):
        t_kin = cfg.sweep.values[i]
        spec = ReservoirSpec.from_temperatures(t_kin, t_int)
        row = [float(t_kin)]
        for j, (_, provider) in enumerate(providers):
            ep = entropy_production(
                provider, spec, cfg.run.trajectories, cfg.run.collisions,
                seed=_point_seed(cfg.run.seed, i, j),
                burn_in_fraction=cfg.run.burn_in,
            )
            row += [float(ep.delta_s), float(ep.delta_s_se)]
        return tuple(row)

    rows = _run_points(one_point, len(cfg.sweep.values), threads)
    return columns, rows


def _run_points(task, n_points: int, threads: int = 1):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(task, range(n_points)))
    return [task(i) for i in range(n_points)]


def cmd_amplitudes(cfg: ExperimentConfig, energy: float, p0: float | None):
    model = cfg.build_model()
    provider = make_provider(cfg.provider_kind, model)
    if cfg.provider_kind == "rit-packet" and p0 is None:
        raise ConfigError("the rit-packet provider needs --p0")
    table = provider.table(energy, p0=p0)
    labels = model.basis_labels()
    columns = ["out", "in", "t_re", "t_im", "r_re", "r_im"]
    rows = []
    for a, ja in enumerate(table.open_channels):
        for b, jb in enumerate(table.open_channels):
            rows.append(
                (labels[ja], labels[jb],
                 float(table.t[a, b].real), float(table.t[a, b].imag),
                 float(table.r[a, b].real), float(table.r[a, b].imag))
            )
    return columns, rows


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------


def _check(name, passed, value, tolerance, detail="", skipped=False):
    return {
        "name": name,
        "passed": bool(passed) if not skipped else True,
        "skipped": bool(skipped),
        "value": None if value is None else float(value),
        "tolerance": None if tolerance is None else float(tolerance),
        "detail": detail,
    }


def _microrev_violation(provider: AmplitudeProvider, momenta) -> float:
    model = provider.model
    e0 = provider.spectral.e0
    worst = 0.0
    for p0 in momenta:
        p = transition_probabilities(provider, p0)
        for j in range(model.dim):
            for jp in range(model.dim):
                q2 = p0 * p0 - 2.0 * model.mass * (e0[jp] - e0[j])
                if q2 <= 1e-9:
                    continue
                p_rev = transition_probabilities(provider, float(np.sqrt(q2)))
                worst = max(worst, abs(p[jp, j] - p_rev[j, jp]))
    return worst


def run_validation(cfg: ExperimentConfig) -> dict:
    model = cfg.build_model()
    tr_ok = model.time_reversal_ok
    checks = []
    captured: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        exact = make_provider("exact", model)
        sd = exact.spectral
        e_top = max(sd.e_max, 0.0)
        energies = e_top + np.array([0.6, 1.7, 3.4, 7.9, 16.3, 33.1])

        worst_unit = worst_blocks = worst_sym = 0.0
        for e in energies:
            cs = channels(model, float(e), sd)
            sol = scattering_solution(model, cs, sd, method="transfer")
            worst_unit = max(worst_unit, sol.unitarity_res)
            n = model.dim
            sf = sol.s_full
            worst_blocks = max(
                worst_blocks,
                max_abs(sf[:n, :n] - sf[n:, n:]),
                max_abs(sf[:n, n:] - sf[n:, :n]),
            )
            worst_sym = max(worst_sym, max_abs(sol.t - sol.t.T), max_abs(sol.r - sol.r.T))
        checks.append(_check("exact_unitarity", worst_unit <= 1e-8, worst_unit, 1e-8))
        checks.append(_check("spatial_symmetry", worst_blocks <= 1e-8, worst_blocks, 1e-8))
        checks.append(_check(
            "amplitude_symmetry", worst_sym <= 1e-8, worst_sym if tr_ok else None, 1e-8,
            detail="" if tr_ok else "time-reversal gate disabled for this model",
            skipped=not tr_ok,
        ))

        momenta = np.sqrt(2.0 * model.mass * (e_top + np.array([0.9, 2.3, 6.1])))
        for kind in ("exact", "wvo", "rit"):
            prov = exact if kind == "exact" else make_provider(kind, model)
            v = _microrev_violation(prov, momenta) if tr_ok else None
            checks.append(_check(
                f"micro_reversibility_{kind}", (v is not None and v <= 1e-8), v, 1e-8,
                detail="" if tr_ok else "time-reversal gate disabled for this model",
                skipped=not tr_ok,
            ))

        packet = make_provider("rit-packet", model)
        p_probe = transition_probabilities(packet, float(momenta[-1]))
        has_offdiag = float(np.max(p_probe - np.diag(np.diag(p_probe)))) > 1e-6
        if has_offdiag and tr_ok:
            v = _microrev_violation(packet, momenta)
            checks.append(_check(
                "rit_packet_breaks_micro_reversibility", v >= 1e-3, v, 1e-3,
                detail="must-fail control: a violation this large is required",
            ))
        else:
            checks.append(_check(
                "rit_packet_breaks_micro_reversibility", True, None, 1e-3,
                detail="no off-diagonal transitions to test on this model",
                skipped=True,
            ))

        p0_map = float(momenta[0])
        worst_kraus = worst_equiv = worst_trace = 0.0
        worst_choi = np.inf
        rng = np.random.default_rng(20240811)
        for kind in ("wvo", "rit"):
            prov = make_provider(kind, model)
            ks = kraus_set(prov, p0_map)
            worst_kraus = max(worst_kraus, ks.completeness_residual())
            tensor = build_map(prov, p0_map)
            raw = rng.normal(size=(model.dim, model.dim)) + 1j * rng.normal(size=(model.dim, model.dim))
            rho = raw @ raw.conj().T
            rho /= np.trace(rho).real
            rho = validate_density(rho)
            out_t = apply_map(tensor, rho)
            worst_equiv = max(worst_equiv, max_abs(out_t - apply_kraus(ks, rho)))
            worst_trace = max(worst_trace, abs(np.trace(out_t).real - 1.0))
            worst_choi = min(worst_choi, float(eig_hermitian(choi_matrix(tensor)).eigenvalues.min()))
        checks.append(_check("kraus_completeness", worst_kraus <= 1e-10, worst_kraus, 1e-10))
        checks.append(_check("kraus_tensor_equivalence", worst_equiv <= 1e-10, worst_equiv, 1e-10))
        checks.append(_check("trace_preservation", worst_trace <= 1e-10, worst_trace, 1e-10))
        checks.append(_check("choi_positivity", worst_choi >= -1e-8, worst_choi, -1e-8))

        res_cfg = cfg.reservoir
        spec = ReservoirSpec.from_temperatures(
            res_cfg.t_kin if res_cfg else 1.0, res_cfg.t_kin if res_cfg else 1.0
        )
        worst_db = 0.0
        if tr_ok:
            for kind in ("wvo", "rit", "exact"):
                prov = exact if kind == "exact" else make_provider(kind, model)
                rates = integrated_rates(prov, spec)
                e0 = sd.e0
                for j in range(model.dim):
                    for jp in range(model.dim):
                        if j == jp or rates.full[j, jp] <= 1e-12 or rates.full[jp, j] <= 1e-12:
                            continue
                        expected = np.exp(-spec.beta_kin * (e0[jp] - e0[j]))
                        worst_db = max(
                            worst_db,
                            abs(rates.full[j, jp] / rates.full[jp, j] - expected) / expected,
                        )
            checks.append(_check("detailed_balance", worst_db <= 1e-5, worst_db, 1e-5))
        else:
            checks.append(_check(
                "detailed_balance", True, None, 1e-5,
                detail="time-reversal gate disabled for this model", skipped=True,
            ))

        rng_eff = np.random.default_rng(cfg.run.seed)
        n_samples = 1_000_000
        u = rng_eff.random(n_samples)
        samples = np.sqrt(-2.0 * model.mass * np.log1p(-u) / spec.beta_kin)
        samples.sort()
        grid = (np.arange(1, n_samples + 1)) / n_samples
        cdf = effusion_cdf(samples, spec.beta_kin, model.mass)
        ks_stat = float(np.max(np.maximum(np.abs(grid - cdf), np.abs(grid - 1.0 / n_samples - cdf))))
        checks.append(_check("effusion_ks", ks_stat < 0.002, ks_stat, 0.002))
        e_kin = samples**2 / (2.0 * model.mass)
        mean_err = abs(e_kin.mean() - spec.t_kin) / (e_kin.std(ddof=1) / np.sqrt(n_samples))
        checks.append(_check(
            "effusion_mean_energy", mean_err <= 3.0, mean_err, 3.0,
            detail="deviation from 1/beta in standard errors",
        ))
        captured = sorted({f"{w.category.__name__}: {w.message}" for w in caught})

    return {
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "warnings": captured,
    }


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _emit(cfg: ExperimentConfig, command: str, columns, rows) -> None:
    meta = _metadata(cfg, command)
    fmt = cfg.output.format
    text = write_result(cfg.output.path, columns, rows, meta, fmt=fmt)
    if cfg.output.path is None:
        sys.stdout.write(text)
        return
    print(f"wrote {cfg.output.path}")
    if cfg.output.plot:
        from .plotting import figure_path, render_figure

        fig = figure_path(cfg.output.path)
        render_figure(command, columns, rows, fig, meta)
        print(f"wrote {fig}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        threads = max(1, args.threads)
        if args.command == "validate":
            report = run_validation(cfg)
            text = json.dumps(report, indent=2) + "\n"
            if args.out:  # the config's output.path belongs to the report commands
                from pathlib import Path

                Path(args.out).write_text(text)
                print(f"wrote {args.out}")
            else:
                sys.stdout.write(text)
            return EXIT_OK if report["passed"] else EXIT_VALIDATION
        if args.command == "amplitudes":
            columns, rows = cmd_amplitudes(cfg, args.energy, args.p0)
        elif args.command == "transition-prob":
            columns, rows = cmd_transition_prob(cfg)
        elif args.command == "thermalize":
            columns, rows = cmd_thermalize(cfg, threads=threads)
        elif args.command == "entropy":
            columns, rows = cmd_entropy(cfg, threads=threads)
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command}")
        _emit(cfg, args.command, columns, rows)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LinAlgError, ScatteringError, ReservoirError, OverflowError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
