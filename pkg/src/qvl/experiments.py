"""Configuration-driven experiment orchestration.

Loads TOML configs, expands (noise model x p_phys x f_anc x rounds x seed)
grids into an embarrassingly parallel work queue, and writes plot-ready
CSV.  Every CSV is a pure function of (config, build): rows are emitted in
sorted grid order, floats are rendered with repr, and files are written
atomically, so reruns at any worker count are byte-identical.  Wall-clock
metadata lives in a separate JSON sidecar to keep it that way.
"""
from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:                       # Python 3.10
    import tomli as tomllib

from .fidelity import (FidelityRecord, FidelitySummary, InconclusiveSweepError,
                       SweepPoint, estimate_threshold, fidelity_campaign,
                       summarize_records)
from .noise import NoiseConfig, StreamKey
from .training import (ShotPolicy, TrainRunConfig, mean_final_accuracy, train)

SCHEMA_TRAIN = "qvl.train.v1"
SCHEMA_TRAIN_SUMMARY = "qvl.train-summary.v1"
SCHEMA_FIDELITY = "qvl.fidelity.v1"
SCHEMA_FIDELITY_SUMMARY = "qvl.fidelity-summary.v1"
SCHEMA_FIDELITY_HIST = "qvl.fidelity-hist.v1"
SCHEMA_THRESHOLD = "qvl.threshold.v1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridPoint:
    model: str
    p_phys: float
    f_anc: float
    rounds: int

    @property
    def p_anc(self) -> float:
        return self.p_phys * self.f_anc

    def tag(self) -> str:
        return f"{self.model}_p{self.p_phys!r}_f{self.f_anc!r}_r{self.rounds}"

    def sort_key(self):
        return (self.model, self.p_phys, self.f_anc, self.rounds)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    noise_model: str
    p_phys: tuple[float, ...]
    f_anc: tuple[float, ...]
    rounds: tuple[int, ...]
    seeds: tuple[int, ...]
    encoded: bool
    shots: int
    mode: str
    max_reruns: int
    iterations: int
    batch_size: int
    learning_rate: float
    fd_delta: float
    optimizer: str
    accuracy_metric: str
    dataset_seed: int
    fidelity_theta: float | None
    fidelity_shots_per_label: int
    fidelity_max_reruns: int
    fidelity_seed: int
    threshold_accuracy_floor: float
    threshold_std_ceiling: float
    threshold_fidelity_rounds: tuple[int, ...]

    def grid(self) -> list[GridPoint]:
        points = [GridPoint(self.noise_model, p, f, r)
                  for p in self.p_phys for f in self.f_anc
                  for r in self.rounds]
        return sorted(points, key=GridPoint.sort_key)

    def train_run_config(self, point: GridPoint) -> TrainRunConfig:
        return TrainRunConfig(
            noise=NoiseConfig(model=point.model, p_phys=point.p_phys,
                              f_anc=point.f_anc),
            encoded=self.encoded,
            rounds=point.rounds,
            policy=ShotPolicy(shots=self.shots, mode=self.mode,
                              max_reruns=self.max_reruns),
            iterations=self.iterations,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            fd_delta=self.fd_delta,
            optimizer=self.optimizer,
            accuracy_metric=self.accuracy_metric,
            dataset_seed=self.dataset_seed,
        )


def _require(table: dict, section: str, key: str):
    if key not in table:
        raise ConfigError(f"config section [{section}] is missing "
                          f"required field {key!r}")
    return table[key]


def load_config(path: str | Path, seed_offset: int = 0) -> ExperimentConfig:
    """Parse and validate a TOML experiment config.

    Physics parameters (noise model, rates, rounds, fidelity theta) have no
    implicit defaults; only execution knobs (shots, workers, paths) do.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc

    noise = raw.get("noise")
    if noise is None:
        raise ConfigError(f"{path}: missing required [noise] section")
    detection = raw.get("detection")
    if detection is None:
        raise ConfigError(f"{path}: missing required [detection] section")
    train_t = raw.get("train", {})
    fid = raw.get("fidelity", {})
    thr = raw.get("threshold", {})

    model = _require(noise, "noise", "model")
    if model not in ("gate", "environmental", "none"):
        raise ConfigError(f"[noise] model={model!r} must be gate, "
                          "environmental or none")
    p_phys = tuple(float(p) for p in _require(noise, "noise", "p_phys"))
    f_anc = tuple(float(f) for f in _require(noise, "noise", "f_anc"))
    rounds = tuple(int(r) for r in _require(detection, "detection", "rounds"))
    for p in p_phys:
        if not 0 <= p <= 1:
            raise ConfigError(f"[noise] p_phys value {p} outside [0, 1]")
    for f in f_anc:
        if f < 0:
            raise ConfigError(f"[noise] f_anc value {f} must be >= 0")
    for r in rounds:
        if not 0 <= r <= 5:
            raise ConfigError(f"[detection] rounds value {r} outside 0..5")

    seeds = tuple(int(s) + seed_offset
                  for s in train_t.get("seeds", list(range(10))))
    if len(set(seeds)) != len(seeds):
        raise ConfigError("[train] seeds must be distinct")

    theta = fid.get("theta")
    config = ExperimentConfig(
        name=str(raw.get("experiment", {}).get("name", path.stem)),
        noise_model=model,
        p_phys=p_phys,
        f_anc=f_anc,
        rounds=rounds,
        seeds=seeds,
        encoded=bool(train_t.get("encoded", True)),
        shots=int(train_t.get("shots", 1000)),
        mode=str(train_t.get("mode", "per_shot")),
        max_reruns=int(train_t.get("max_reruns", 1000)),
        iterations=int(train_t.get("iterations", 100)),
        batch_size=int(train_t.get("batch_size", 8)),
        learning_rate=float(train_t.get("learning_rate", 0.3)),
        fd_delta=float(train_t.get("fd_delta", 1.5707963267948966)),
        optimizer=str(train_t.get("optimizer", "adam")),
        accuracy_metric=str(train_t.get("accuracy_metric", "single_shot")),
        dataset_seed=int(train_t.get("dataset_seed", 20250101)),
        fidelity_theta=None if theta is None else float(theta),
        fidelity_shots_per_label=int(fid.get("shots_per_label", 1000)),
        fidelity_max_reruns=int(fid.get("max_reruns", 1000)),
        fidelity_seed=int(fid.get("seed", 424242)),
        threshold_accuracy_floor=float(thr.get("accuracy_floor", 0.90)),
        threshold_std_ceiling=float(thr.get("std_ceiling", 0.05)),
        threshold_fidelity_rounds=tuple(
            int(r) for r in thr.get("fidelity_rounds", (1, 2, 3, 5))),
    )
    # Surface invalid (model, rate) combinations now, not inside a worker.
    for point in config.grid():
        NoiseConfig(model=point.model, p_phys=point.p_phys, f_anc=point.f_anc)
    if config.mode not in ("per_shot", "exact"):
        raise ConfigError(f"[train] mode={config.mode!r} must be per_shot "
                          "or exact")
    return config


def resolve_workers(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get("QVL_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QVL_WORKERS={env!r} is not an integer") from exc
    return max(1, os.cpu_count() or 1)


# -- CSV plumbing ------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


def write_csv(path: Path, schema: str, header: list[str],
              rows: list[list]) -> None:
    """Atomic CSV write with a schema tag comment line."""
    buf = io.StringIO()
    buf.write(f"# schema={schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    """Read a schema-tagged CSV back into dict rows."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        schema = first.removeprefix("# schema=") if first.startswith("#") else ""
        reader = csv.DictReader(fh)
        return schema, list(reader)


# -- worker entry points (module-level for pickling) -------------------------

def _train_unit(args) -> tuple:
    config, point, seed = args
    try:
        state = train(config.train_run_config(point), seed)
        rows = [
            [seed, i + 1, state.theta_history[i], state.loss_history[i],
             state.accuracy_history[i], state.test_accuracy_history[i],
             state.acceptance_history[i]]
            for i in range(len(state.accuracy_history))
        ]
        return (point, seed, "ok", rows, state.accuracy_history)
    except Exception:
        return (point, seed, "failed", traceback.format_exc(), None)


def _fidelity_unit(args) -> tuple:
    config, point, point_index = args
    try:
        noise = NoiseConfig(model=point.model, p_phys=point.p_phys,
                            f_anc=point.f_anc)
        records, summaries = fidelity_campaign(
            noise, point.rounds, config.fidelity_theta,
            stream=StreamKey(config.fidelity_seed).child(point_index),
            shots_per_label=config.fidelity_shots_per_label,
            max_reruns=config.fidelity_max_reruns)
        return (point, "ok", records, summaries)
    except Exception:
        return (point, "failed", traceback.format_exc(), None)


def _run_units(units: list, worker, workers: int) -> list:
    if workers <= 1 or len(units) <= 1:
        return [worker(u) for u in units]
    with ProcessPoolExecutor(max_workers=min(workers, len(units))) as ex:
        return list(ex.map(worker, units))


# -- commands ----------------------------------------------------------------

def run_train_command(config: ExperimentConfig, out_dir: str | Path,
                      workers: int = 1, log=print) -> Path:
    """Train every (grid point, seed); write per-point and summary CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    grid = config.grid()
    units = [(config, point, seed) for point in grid for seed in config.seeds]
    results = _run_units(units, _train_unit, workers)

    by_point: dict[GridPoint, dict[int, tuple]] = {}
    for point, seed, status, payload, history in results:
        by_point.setdefault(point, {})[seed] = (status, payload, history)

    summary_rows = []
    failures = []
    for point in grid:
        seed_results = by_point[point]
        rows = []
        histories = []
        statuses = []
        for seed in sorted(seed_results):
            status, payload, history = seed_results[seed]
            statuses.append(status)
            if status == "ok":
                rows.extend(payload)
                histories.append(history)
            else:
                failures.append((point, seed, payload))
                log(f"[train] FAILED {point.tag()} seed={seed}; skipping")
        if rows:
            write_csv(out / f"train_{point.tag()}.csv", SCHEMA_TRAIN,
                      ["seed", "iteration", "theta", "loss", "train_accuracy",
                       "test_accuracy", "acceptance_rate"], rows)
        if histories and all(len(h) >= 100 for h in histories):
            mean, std = mean_final_accuracy(histories)
        elif histories:
            mean = sum(sum(h[-40:]) / len(h[-40:]) for h in histories) / len(histories)
            std = 0.0
        else:
            mean, std = float("nan"), float("nan")
        status = "ok" if all(s == "ok" for s in statuses) else (
            "partial" if any(s == "ok" for s in statuses) else "failed")
        summary_rows.append([point.model, point.p_phys, point.f_anc,
                             point.p_anc, point.rounds, len(histories),
                             status, mean, std])
    write_csv(out / "train_summary.csv", SCHEMA_TRAIN_SUMMARY,
              ["model", "p_phys", "f_anc", "p_anc", "rounds", "n_seeds",
               "status", "mean_final_accuracy", "std_final_accuracy"],
              summary_rows)
    _write_meta(out, "train", config, started, failures)
    return out / "train_summary.csv"


def run_fidelity_command(config: ExperimentConfig, out_dir: str | Path,
                         workers: int = 1, log=print) -> Path:
    """Fidelity campaign per grid point; per-shot, summary and histogram CSVs."""
    if config.fidelity_theta is None:
        raise ConfigError("[fidelity] theta is required for the fidelity "
                          "command (physics parameters have no defaults)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    grid = config.grid()
    units = [(config, point, i) for i, point in enumerate(grid)]
    results = _run_units(units, _fidelity_unit, workers)

    summary_rows = []
    hist_rows = []
    failures = []
    by_point = {point: (status, payload, summaries)
                for point, status, payload, summaries in results}
    for point in grid:
        status, payload, summaries = by_point[point]
        if status != "ok":
            failures.append((point, "-", payload))
            log(f"[fidelity] FAILED {point.tag()}; skipping")
            summary_rows.append([point.model, point.p_phys, point.f_anc,
                                 point.p_anc, point.rounds, "-", "failed",
                                 0, "nan", "nan", "nan", "nan"])
            continue
        records: list[FidelityRecord] = payload
        shot_rows = [
            ["".join(str(b) for b in r.input_label), r.F_full, r.F_phys,
             r.F_anc, r.accepted]
            for r in records
        ]
        write_csv(out / f"fidelity_{point.tag()}.csv", SCHEMA_FIDELITY,
                  ["input_label", "F_full", "F_phys", "F_anc", "accepted"],
                  shot_rows)
        for register, summary in sorted(summaries.items()):
            summary_rows.append([point.model, point.p_phys, point.f_anc,
                                 point.p_anc, point.rounds, register, "ok",
                                 summary.count, summary.mean, summary.std,
                                 summary.frac_below_002,
                                 summary.frac_above_098])
            for b, count in enumerate(summary.histogram):
                hist_rows.append([point.model, point.p_phys, point.f_anc,
                                  point.rounds, register, 0.02 * b,
                                  0.02 * (b + 1), count])
    write_csv(out / "fidelity_summary.csv", SCHEMA_FIDELITY_SUMMARY,
              ["model", "p_phys", "f_anc", "p_anc", "rounds", "register",
               "status", "count", "mean", "std", "frac_below_002",
               "frac_above_098"], summary_rows)
    write_csv(out / "fidelity_hist.csv", SCHEMA_FIDELITY_HIST,
              ["model", "p_phys", "f_anc", "rounds", "register", "bin_lo",
               "bin_hi", "count"], hist_rows)
    _write_meta(out, "fidelity", config, started, failures)
    return out / "fidelity_summary.csv"


def run_threshold_command(train_summary: str | Path,
                          fidelity_summary: str | Path | None,
                          out_dir: str | Path,
                          accuracy_floor: float = 0.90,
                          std_ceiling: float = 0.05,
                          fidelity_rounds: tuple[int, ...] = (1, 2, 3, 5),
                          log=print) -> Path:
    """Estimate threshold ancilla rates from existing sweep CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, rows = read_csv(Path(train_summary))
    if schema != SCHEMA_TRAIN_SUMMARY:
        raise ConfigError(f"{train_summary}: expected schema "
                          f"{SCHEMA_TRAIN_SUMMARY}, found {schema!r}")
    fid_rows: list[dict[str, str]] = []
    if fidelity_summary is not None:
        fid_schema, fid_rows = read_csv(Path(fidelity_summary))
        if fid_schema != SCHEMA_FIDELITY_SUMMARY:
            raise ConfigError(f"{fidelity_summary}: expected schema "
                              f"{SCHEMA_FIDELITY_SUMMARY}, found {fid_schema!r}")

    models = sorted({r["model"] for r in rows})
    report_rows = []
    support_rows = []
    for model in models:
        sweep = [
            SweepPoint(p_anc=float(r["p_anc"]),
                       mean_final_accuracy=float(r["mean_final_accuracy"]),
                       std=float(r["std_final_accuracy"]),
                       rounds=int(r["rounds"]))
            for r in rows if r["model"] == model and r["status"] == "ok"
        ]
        fidelity_data = [
            (float(r["p_anc"]), int(r["rounds"]), float(r["mean"]))
            for r in fid_rows
            if r["model"] == model and r["register"] == "anc"
            and r["status"] == "ok"
        ] or None
        try:
            report = estimate_threshold(
                sweep, accuracy_floor=accuracy_floor, std_ceiling=std_ceiling,
                fidelity_rows=fidelity_data, fidelity_rounds=fidelity_rounds)
            f_anc = "" if report.threshold_f_anc is None else report.threshold_f_anc
            report_rows.append([model, "ok", report.threshold_p_anc, f_anc])
            for rate in report.qualifying:
                support_rows.append([model, rate, "qualifying"])
            for rate in report.failing:
                support_rows.append([model, rate, "failing"])
        except InconclusiveSweepError as exc:
            log(f"[threshold] {model}: inconclusive ({exc})")
            report_rows.append([model, f"inconclusive: {exc}", "", ""])
    write_csv(out / "threshold_report.csv", SCHEMA_THRESHOLD,
              ["model", "status", "threshold_p_anc", "threshold_f_anc"],
              report_rows)
    write_csv(out / "threshold_support.csv", SCHEMA_THRESHOLD,
              ["model", "p_anc", "verdict"], support_rows)
    return out / "threshold_report.csv"


def _write_meta(out: Path, command: str, config: ExperimentConfig,
                started: float, failures: list) -> None:
    # Non-deterministic sidecar; CSVs stay a pure function of (config, build).
    meta = {
        "command": command,
        "config": asdict(config),
        "wall_clock_seconds": time.time() - started,
        "failures": [
            {"point": point.tag(), "seed": str(seed),
             "traceback": str(tb).splitlines()[-1] if tb else ""}
            for point, seed, tb in failures
        ],
    }
    (out / f"{command}_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
