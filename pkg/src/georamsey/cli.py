"""Scenario runner: reproduces each figure's data set and writes CSV + JSON.

Every scenario writes one or more CSV tables (header names carry a unit
suffix, floats with 17 significant digits) and a ``<scenario>_summary.json``
holding the resolved configuration, fitted parameters and acceptance flags.
Flags are computed from the emitted tables only.

Exit codes: 0 all flags pass, 1 at least one flag failed, 2 numerical
non-convergence, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .analysis import (decoherence_time, fit_cosine, fit_damped_cosine, polar_deviation_scan)
from .core import ConvergenceError, DomainError, PulseSchedule, strontium87
from .ensemble import DEFAULT_SEED, doppler_order, ensemble_average, scan, thermal_grid

SCENARIOS = ("fig2d", "fig3a", "fig3b", "fig4", "custom")
MODEL_CHOICES = ("bare", "effective", "both")
SWEEPABLE = ("T", "sigma_t", "eta", "phase_jump", "temperature")
OUT_ENV = "GEORAMSEY_OUT"

EXIT_OK, EXIT_FLAGS, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3

# acceptance thresholds checked by the scenarios
FREQ_TOL = 0.02
TAU_BAND_50NK = (30e-6, 90e-6)
P1_MAX = 0.05
PE_MAX = 0.03
COSINE_RMS_MAX = 0.02
DTHETA_MIN_1US = 0.05
PORT_MIN = 0.9


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str = "fig2d"
    rabi1_hz: float = 260e3
    rabi2_hz: float = 260e3
    rabi3_hz: float = 130e3
    sigma_t_s: float = 2.5e-6
    eta: float = 1.8
    T_s: float = 6e-6
    phase_jump_rad: float = 0.0
    temperature_K: float = 50e-9
    model: str = "both"
    sweep_var: str = ""
    sweep_start: float = math.nan
    sweep_stop: float = math.nan
    sweep_points: int = 0
    scheme: str = "gauss-hermite"
    gh_order: int = 0
    mc_size: int = 4096
    seed: int = DEFAULT_SEED
    record_every: int = 50
    snapshot_times_s: list = field(default_factory=lambda: [0.0, 18e-6, 48e-6])

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; valid scenarios: {', '.join(SCENARIOS)}")
        if self.model not in MODEL_CHOICES:
            raise ConfigError(f"unknown model {self.model!r}; valid models: {', '.join(MODEL_CHOICES)}")
        if not self.temperature_K >= 0:
            raise ConfigError(f"temperature_K must be >= 0, got {self.temperature_K}")
        if self.scheme not in ("gauss-hermite", "monte-carlo"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.scenario == "custom":
            if self.sweep_var not in SWEEPABLE:
                raise ConfigError(f"custom sweep needs sweep_var in {SWEEPABLE}, got {self.sweep_var!r}")
        if self.scenario == "custom" and not (math.isfinite(self.sweep_start) and math.isfinite(self.sweep_stop)
                                              and self.sweep_points):
            raise ConfigError("custom sweep needs sweep_start, sweep_stop and sweep_points")
        if self.sweep_points and int(self.sweep_points) < 2:
            raise ConfigError(f"sweep_points must be >= 2, got {self.sweep_points}")
        if math.isfinite(self.sweep_start) and math.isfinite(self.sweep_stop) and not self.sweep_stop > self.sweep_start:
            raise ConfigError("sweep range is empty (sweep_stop must exceed sweep_start)")
        try:
            self.schedule()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def schedule(self) -> PulseSchedule:
        two_pi = 2 * math.pi
        return PulseSchedule(omega0=(two_pi * self.rabi1_hz, two_pi * self.rabi2_hz, two_pi * self.rabi3_hz),
                             sigma_t=self.sigma_t_s, eta=self.eta, T=self.T_s, phase_jump=self.phase_jump_rad)

    def models(self) -> tuple[str, ...]:
        return ("bare", "effective") if self.model == "both" else (self.model,)

    def sweep(self, start, stop, points) -> np.ndarray:
        """Scenario default range, with any of start/stop/points overridden."""
        if math.isfinite(self.sweep_start):
            start = self.sweep_start
        if math.isfinite(self.sweep_stop):
            stop = self.sweep_stop
        if not stop > start:
            raise ConfigError(f"sweep range is empty ({start} to {stop})")
        return np.linspace(start, stop, int(self.sweep_points or points))

    def grid(self, temperature, t_max):
        species = strontium87()
        if temperature == 0:
            return thermal_grid(0.0, species)
        order = self.gh_order or doppler_order(temperature, t_max, species)
        return thermal_grid(temperature, species, scheme=self.scheme, order=order, size=self.mc_size,
                            seed=int(self.seed))


def _coerce(cfg_field, value):
    kind = cfg_field.type
    if kind in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{cfg_field.name} expects a number, got {value!r}")
        return float(value)
    if kind in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{cfg_field.name} expects an integer, got {value!r}")
        return value
    if kind in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{cfg_field.name} expects a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{cfg_field.name} expects a list, got {value!r}")
    return [float(v) for v in value]


def apply_settings(config: ScenarioConfig, settings: dict) -> ScenarioConfig:
    fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    changes = {}
    for key, value in settings.items():
        if key not in fields:
            raise ConfigError(f"unknown configuration key {key!r}")
        changes[key] = _coerce(fields[key], value)
    return dataclasses.replace(config, **changes)


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with a TOML value; bare words are taken as strings."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat key/value pairs; found tables {nested}")
    return data


# ----------------------------------------------------------------- output


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def _json(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(_json(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def write_json(path: Path, obj) -> None:
    Path(path).write_text(_json(obj) + "\n")


def _label(temperature) -> str:
    return f"{temperature * 1e9:g}nK".replace(".", "p")


def _nearest(times, value) -> int:
    return int(np.argmin(np.abs(np.asarray(times) - value)))


# -------------------------------------------------------------- scenarios


def run_fig2d(cfg: ScenarioConfig, out: Path):
    schedule = cfg.schedule()
    t_stop = max(schedule.duration + 4 * schedule.sigma_t, max(cfg.snapshot_times_s))
    temps = sorted({0.0, cfg.temperature_K or 50e-9})
    files, flags, results = [], {}, {}
    for model in cfg.models():
        for T0 in temps:
            grid = cfg.grid(T0, t_stop)
            res = ensemble_average(schedule, grid, model, t_stop=t_stop, record_every=cfg.record_every)
            name = f"fig2d_{model}_{_label(T0)}.csv"
            write_csv(out / name, ["t_s", "P1", "P2", "P3", "Pe"],
                      (np.column_stack([res.times, res.populations])))
            files.append(name)
            _, table = read_csv(out / name)
            t, P = table[:, 0], table[:, 1:]
            key = f"{model}_{_label(T0)}"
            snaps = {fmt(ts): P[_nearest(t, ts)].tolist() for ts in cfg.snapshot_times_s}
            i0, i1, i2 = (_nearest(t, ts) for ts in cfg.snapshot_times_s[:3])
            results[key] = {"snapshots": snaps, "max_Pe": float(P[:, 3].max()),
                            "final_P": P[_nearest(t, schedule.duration)].tolist()}
            flags[f"{key}_start_in_3"] = bool(P[i0, 2] > PORT_MIN)
            flags[f"{key}_split_into_1_3"] = bool(P[i1, 0] + P[i1, 2] > PORT_MIN)
            flags[f"{key}_exit_via_2_3"] = bool(P[i2, 1] + P[i2, 2] > PORT_MIN)
            flags[f"{key}_final_P1_below_{P1_MAX:g}"] = bool(P[_nearest(t, schedule.duration), 0] < P1_MAX)
            if model == "bare" and T0 == 0:
                flags[f"{key}_max_Pe_below_{PE_MAX:g}"] = bool(P[:, 3].max() < PE_MAX)
    return files, results, flags


def run_fig3a(cfg: ScenarioConfig, out: Path):
    schedule = cfg.schedule()
    phis = cfg.sweep(0.0, 4 * math.pi, 41)
    grid = cfg.grid(cfg.temperature_K, schedule.duration)
    files, flags, results = [], {}, {}
    for model in cfg.models():
        P = scan(schedule, "phase_jump", phis, grid, model)
        name = f"fig3a_{model}.csv"
        write_csv(out / name, ["Phi_rad", "P1", "P2", "P3", "Pe"], np.column_stack([phis, P]))
        files.append(name)
        _, table = read_csv(out / name)
        fit = fit_cosine(table[:, 0], table[:, 3])
        results[model] = dataclasses.asdict(fit)
        flags[f"{model}_cosine_rms_below_{COSINE_RMS_MAX:g}"] = bool(fit.residual_rms < COSINE_RMS_MAX)
    return files, results, flags


def run_fig3b(cfg: ScenarioConfig, out: Path):
    schedule = cfg.schedule()
    Ts = cfg.sweep(0.0, 120e-6, 49)
    grid = cfg.grid(cfg.temperature_K, schedule.replace(T=float(Ts.max())).duration)
    species = strontium87()
    files, flags, results = [], {}, {}
    for model in cfg.models():
        P = scan(schedule, "T", Ts, grid, model)
        name = f"fig3b_{model}.csv"
        write_csv(out / name, ["T_s", "P1", "P2", "P3", "Pe"], np.column_stack([Ts, P]))
        files.append(name)
        _, table = read_csv(out / name)
        fit = fit_damped_cosine(table[:, 0], table[:, 3])
        if not fit.converged:
            raise ConvergenceError(f"damped-cosine fit of the {model} fringe did not converge")
        entry = dataclasses.asdict(fit)
        entry["frequency_hz"] = fit.frequency
        results[model] = entry
        if cfg.temperature_K == 0:
            target = species.fringe_frequency
            flags[f"{model}_frequency_within_{FREQ_TOL:g}"] = bool(abs(fit.omega / target - 1) < FREQ_TOL)
        else:
            entry["tau_typ_s"] = decoherence_time(cfg.temperature_K, species)
            scale = math.sqrt(50e-9 / cfg.temperature_K)
            lo, hi = TAU_BAND_50NK
            flags[f"{model}_tau_in_band"] = bool(lo * scale <= fit.tau <= hi * scale)
    return files, results, flags


def run_fig4(cfg: ScenarioConfig, out: Path):
    schedule = cfg.schedule()
    sigmas = cfg.sweep(0.5e-6, 25e-6, 50)
    cols, header = [sigmas], ["sigma_t_s"]
    models = [m for m in ("bare", "effective") if m in cfg.models()]
    for model in models:
        cols.append(polar_deviation_scan(schedule, sigmas, model))
        header.append(f"dtheta_{model}_rad")
    name = "fig4.csv"
    write_csv(out / name, header, np.column_stack(cols))
    _, table = read_csv(out / name)
    flags, results = {}, {}
    for j, model in enumerate(models, start=1):
        i = _nearest(table[:, 0], 1e-6)
        results[model] = {"sigma_t_s": table[i, 0], "dtheta_rad": table[i, j]}
        if model == "bare" and abs(table[i, 0] - 1e-6) < 1e-9:
            flags[f"bare_dtheta_at_1us_above_{DTHETA_MIN_1US:g}"] = bool(abs(table[i, j]) > DTHETA_MIN_1US)
    return [name], results, flags


def run_custom(cfg: ScenarioConfig, out: Path):
    schedule = cfg.schedule()
    values = cfg.sweep(cfg.sweep_start, cfg.sweep_stop, cfg.sweep_points)
    files, results = [], {}
    for model in cfg.models():
        if cfg.sweep_var == "temperature":
            rows = []
            for T0 in values:
                grid = cfg.grid(float(T0), schedule.duration)
                rows.append(ensemble_average(schedule, grid, model).final_populations)
            P = np.array(rows)
        else:
            grid = cfg.grid(cfg.temperature_K, schedule.duration if cfg.sweep_var != "T"
                            else schedule.replace(T=float(values.max())).duration)
            P = scan(schedule, cfg.sweep_var, values, grid, model)
        unit = {"T": "_s", "sigma_t": "_s", "eta": "", "phase_jump": "_rad", "temperature": "_K"}[cfg.sweep_var]
        name = f"custom_{model}.csv"
        write_csv(out / name, [cfg.sweep_var + unit, "P1", "P2", "P3", "Pe"], np.column_stack([values, P]))
        files.append(name)
        results[model] = {"points": len(values)}
    return files, results, {}


RUNNERS = {"fig2d": run_fig2d, "fig3a": run_fig3a, "fig3b": run_fig3b, "fig4": run_fig4, "custom": run_custom}


def run_scenario(cfg: ScenarioConfig, out) -> dict:
    """Run one scenario, write its files into ``out`` and return the summary."""
    cfg.validate()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files, results, flags = RUNNERS[cfg.scenario](cfg, out)
    summary = {"scenario": cfg.scenario, "config": dataclasses.asdict(cfg), "files": files,
               "results": results, "flags": flags, "all_pass": all(flags.values())}
    write_json(out / f"{cfg.scenario}_summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="georamsey", description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)}")
    ap.add_argument("--config", help="flat TOML file of configuration keys")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a key")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./georamsey-out)")
    ap.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
    ap.add_argument("--model", choices=MODEL_CHOICES)
    ap.add_argument("--temp-nk", type=float, help="gas temperature in nK")
    return ap


def config_from_args(args) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if args.config:
        cfg = apply_settings(cfg, load_config(args.config))
    cfg = apply_settings(cfg, dict(parse_override(s) for s in args.set))
    direct = {"scenario": args.scenario, "model": args.model, "seed": args.seed,
              "temperature_K": None if args.temp_nk is None else args.temp_nk * 1e-9}
    cfg = apply_settings(cfg, {k: v for k, v in direct.items() if v is not None})
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.environ.get(OUT_ENV) or "georamsey-out"
    try:
        summary = run_scenario(cfg, out)
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, ok in summary["flags"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"wrote {len(summary['files']) + 1} files to {out}")
    return EXIT_OK if summary["all_pass"] else EXIT_FLAGS


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
