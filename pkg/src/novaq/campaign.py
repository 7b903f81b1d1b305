"""Experiment orchestration and report files.

All outputs are plain CSV/JSON and depend only on the configuration and the
master seed, so a replay reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from novaq import __version__
from novaq.archive import GridArchive
from novaq.circuits import BENCHMARK_NAMES, get_benchmark, initial_states
from novaq.errors import ConfigurationError, InputArtifactError
from novaq.faults import DetectionConfig, detection_flags, fault_pool, output_probabilities
from novaq.generator import CampaignConfig, IterationLog, TestCase, baseline_generate, evolve
from novaq.metrics import METRIC_VERSION

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "novaq-manifest/1"
CASES_SCHEMA = "novaq-cases/1"

CAMPAIGN_KEYS = {f.name: f.type for f in dataclasses.fields(CampaignConfig)}
DETECTION_KEYS = {
    "shots": int,
    "alpha": float,
    "detection_mode": str,
    "exact_tvd_threshold": float,
    "fault_pool_size": int,
}


@dataclass(frozen=True)
class RunSettings:
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    fault_pool_size: int = 20

    def to_dict(self) -> dict:
        return {
            "campaign": dataclasses.asdict(self.campaign),
            "detection": dataclasses.asdict(self.detection),
            "fault_pool_size": self.fault_pool_size,
        }


def _coerce(key: str, raw: str, kind):
    kind = {"int": int, "float": float, "str": str}.get(kind, kind)
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> RunSettings:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    campaign, detection = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in CAMPAIGN_KEYS:
            campaign[key] = _coerce(key, raw, CAMPAIGN_KEYS[key])
        elif key in DETECTION_KEYS:
            detection[key] = _coerce(key, raw, DETECTION_KEYS[key])
        else:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
    pool_size = detection.pop("fault_pool_size", 20)
    if "detection_mode" in detection:
        detection["mode"] = detection.pop("detection_mode")
    settings = RunSettings(CampaignConfig(**campaign), DetectionConfig(**detection), pool_size)
    settings.campaign.validate()
    settings.detection.validate()
    if pool_size < 1:
        raise ConfigurationError("fault_pool_size must be positive")
    return settings


def load_config(path: str | Path | None) -> RunSettings:
    if path is None:
        return RunSettings()
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {p} not found")
    return parse_config(p.read_text())


# --------------------------------------------------------------------------- generation

@dataclass
class GenerateResult:
    config: CampaignConfig
    cases: list[TestCase]
    archive: GridArchive
    checkpoints: list[tuple[int, int, float]]
    iterations: list[IterationLog]


def run_generate(config: CampaignConfig, checkpoint_interval: int = 100) -> GenerateResult:
    config.validate()
    if checkpoint_interval < 1:
        raise ConfigurationError("checkpoint interval must be positive")
    archive = GridArchive(config.bins_per_dim)
    iterations: list[IterationLog] = []
    stream = evolve(config, archive, iterations) if config.mode == "novaq" else baseline_generate(config, archive)
    cases, checkpoints = [], []
    # cases are yielded after their whole block is recorded, so coverage is
    # recomputed from per-case cells rather than read off the archive
    seen: set = set()
    for case in stream:
        cases.append(case)
        seen.add(case.cell)
        if len(cases) % checkpoint_interval == 0:
            occ = len(seen)
            checkpoints.append((len(cases), occ, occ / archive.n_cells))
    return GenerateResult(config, cases, archive, checkpoints, iterations)


def growth_curves(config: CampaignConfig, checkpoint_interval: int = 100) -> list[tuple[int, int, int]]:
    """(cases, novaq occupied, baseline occupied) at every checkpoint, same master seed."""
    nov = run_generate(dataclasses.replace(config, mode="novaq"), checkpoint_interval)
    base = run_generate(dataclasses.replace(config, mode="baseline"), checkpoint_interval)
    return [(a[0], a[1], b[1]) for a, b in zip(nov.checkpoints, base.checkpoints)]


# --------------------------------------------------------------------------- fault detection

@dataclass
class ProgramDetection:
    program: str
    n_cases: int
    variants: list[dict]
    rates: list[float]
    detections: list[int]

    @property
    def accuracy(self) -> float:
        return float(sum(self.detections) / (self.n_cases * len(self.detections)))

    @property
    def bugs_found(self) -> float:
        return float(np.mean(self.detections))


def evaluate_program(name: str, states: np.ndarray, settings: RunSettings, master_seed: int) -> ProgramDetection:
    program = get_benchmark(name)
    if states.shape[1] != 2**program.n:
        raise InputArtifactError(
            f"suite has {int(np.log2(states.shape[1]))} qubits but {name} needs {program.n}"
        )
    if states.shape[0] == 0:
        raise InputArtifactError("empty test suite")
    pool = fault_pool(program, settings.fault_pool_size, master_seed)
    base_probs = output_probabilities(program, states)
    rates, detections = [], []
    for v, mutant in enumerate(pool):
        flags = detection_flags(states, program, mutant, settings.detection, master_seed, v, base_probs)
        detections.append(int(flags.sum()))
        rates.append(float(flags.mean()))
        log.info("%s variant %d %s: %.4f", name, v, mutant.fault_note, rates[-1])
    return ProgramDetection(name, states.shape[0], [m.to_record() for m in pool], rates, detections)


def programs_for_width(n: int) -> list[str]:
    return [p for p in BENCHMARK_NAMES if get_benchmark(p).n == n]


# --------------------------------------------------------------------------- files

def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def case_header(n: int) -> list[str]:
    params = [f"{name}_{q}" for q in range(n) for name in ("theta", "phi", "lambda")]
    return (["case", "iteration", "seed_id", "seed_mean", "seed_variance"] + params
            + ["magnitude", "phase", "entanglement", "cell_m", "cell_p", "cell_e", "novelty"])


def cases_csv(cases: Sequence[TestCase], n: int) -> str:
    def rows():
        for c in cases:
            mean = c.seed.mean if c.seed is not None else ""
            var = c.seed.variance if c.seed is not None else ""
            yield ([c.index, c.iteration, c.seed_id, mean, var] + [float(p) for p in c.params]
                   + list(c.metrics) + list(c.cell) + [c.novelty])
    return _csv_text(case_header(n), rows())


def coverage_csv(checkpoints) -> str:
    return _csv_text(["cases", "occupied_cells", "coverage_rate"], checkpoints)


def projections_csv(archive: GridArchive) -> str:
    rows = []
    for view, grid in archive.projections().items():
        for (i, j), count in np.ndenumerate(grid):
            rows.append([view, i, j, int(count)])
    return _csv_text(["view", "i", "j", "count"], rows)


def generate_files(result: GenerateResult, settings: RunSettings, checkpoint_interval: int) -> dict[str, str]:
    cfg = result.config
    occupied, rate = result.archive.coverage()
    summary = {
        "mode": cfg.mode,
        "n_qubits": cfg.n_qubits,
        "cases": len(result.cases),
        "occupied_cells": occupied,
        "coverage_rate": rate,
        "marginal_occupancy": result.archive.marginal_occupancy(),
        "out_of_range": result.archive.out_of_range,
        "metric_version": METRIC_VERSION,
    }
    files = {
        "cases.csv": cases_csv(result.cases, cfg.n_qubits),
        "coverage.csv": coverage_csv(result.checkpoints),
        "projections.csv": projections_csv(result.archive),
        "archive.json": _json_text({"bins_per_dim": cfg.bins_per_dim, "order": "eta_m,eta_p,eta_e",
                                    "counts": result.archive.to_flat()}),
        "summary.json": _json_text(summary),
    }
    if result.iterations:
        files["iterations.csv"] = _csv_text(
            ["iteration", "slot", "seed_id", "seed_mean", "seed_variance", "mean_novelty", "survived"],
            [[it.iteration, slot, it.seed_ids[slot], it.seeds[slot].mean, it.seeds[slot].variance,
              it.fitness[slot], int(slot in it.survivors)]
             for it in result.iterations for slot in range(len(it.fitness))],
        )
    files["manifest.json"] = manifest_text("generate", settings, files,
                                           checkpoint_interval=checkpoint_interval)
    return files


def detection_files(results: Sequence[ProgramDetection], settings: RunSettings, suite_path: str) -> dict[str, str]:
    variant_rows, table_rows, pool = [], [], []
    for r in results:
        for v, (rec, rate, hits) in enumerate(zip(r.variants, r.rates, r.detections)):
            variant_rows.append([r.program, v, rec["position"], rec["original"], rec["replacement"],
                                 r.n_cases, hits, rate])
            pool.append(dict(rec, variant=v))
        table_rows.append([r.program, r.n_cases, len(r.variants), r.bugs_found, r.accuracy])
    files = {
        "detection.csv": _csv_text(
            ["program", "variant", "position", "original", "replacement", "cases", "detected", "rate"],
            variant_rows),
        "table.csv": _csv_text(["program", "cases", "variants", "bugs_found", "accuracy"], table_rows),
        "fault_pool.json": _json_text(pool),
    }
    files["manifest.json"] = manifest_text("faults", settings, files, fault_pool=pool,
                                           suite=Path(suite_path).name)
    return files


def growth_files(curve, settings: RunSettings, checkpoint_interval: int) -> dict[str, str]:
    files = {"growth.csv": _csv_text(["cases", "novaq_occupied", "baseline_occupied"], curve)}
    files["manifest.json"] = manifest_text("growth", settings, files, checkpoint_interval=checkpoint_interval)
    return files


def manifest_text(command: str, settings: RunSettings, files: dict[str, str], **extra) -> str:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "artifact_version": __version__,
        "metric_version": METRIC_VERSION,
        "master_seed": settings.campaign.seed,
        "config": settings.to_dict(),
        "files": {name: hashlib.sha256(body.encode()).hexdigest() for name, body in sorted(files.items())},
    }
    manifest.update(extra)
    return _json_text(manifest)


def write_files(out_dir: str | Path, files: dict[str, str]) -> None:
    """Write every file or none: contents go to temporary names first."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, body in files.items():
            tmp = out / f".{name}.partial"
            tmp.write_text(body)
            staged.append((tmp, out / name))
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        tmp.replace(final)


def read_suite(path: str | Path) -> np.ndarray:
    """Input states of a cases.csv (or of the run directory holding one)."""
    p = Path(path)
    if p.is_dir():
        p = p / "cases.csv"
    if not p.is_file():
        raise InputArtifactError(f"suite file {p} not found")
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputArtifactError(f"suite file {p} is empty") from None
        cols = [i for i, h in enumerate(header) if h.split("_")[0] in ("theta", "phi", "lambda")]
        if not cols or len(cols) % 3:
            raise InputArtifactError(f"suite file {p} has no parameter columns")
        n = len(cols) // 3
        if header != case_header(n):
            raise InputArtifactError(f"suite file {p} does not follow {CASES_SCHEMA}")
        try:
            params = [[float(row[i]) for i in cols] for row in reader if row]
        except (ValueError, IndexError) as exc:
            raise InputArtifactError(f"suite file {p}: {exc}") from None
    if not params:
        raise InputArtifactError(f"suite file {p} has no test cases")
    return initial_states(np.array(params))


# --------------------------------------------------------------------------- consolidated report

def load_run(run_dir: str | Path) -> dict:
    d = Path(run_dir)
    path = d / "manifest.json"
    if not path.is_file():
        raise InputArtifactError(f"no manifest.json in {d}")
    manifest = json.loads(path.read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise InputArtifactError(f"{path} has schema {manifest.get('schema')!r}, expected {MANIFEST_SCHEMA}")
    run = {"dir": str(d), "manifest": manifest}
    if (d / "summary.json").is_file():
        run["summary"] = json.loads((d / "summary.json").read_text())
    if (d / "table.csv").is_file():
        with (d / "table.csv").open(newline="") as fh:
            run["table"] = list(csv.DictReader(fh))
    if (d / "growth.csv").is_file():
        with (d / "growth.csv").open(newline="") as fh:
            run["growth"] = list(csv.DictReader(fh))
    return run


def _config_key(manifest: dict) -> str:
    cfg = json.loads(json.dumps(manifest["config"]))
    cfg["campaign"].pop("seed", None)
    return json.dumps({"command": manifest["command"], "config": cfg}, sort_keys=True)


def consolidate(run_dirs: Sequence[str | Path]) -> tuple[dict, str]:
    """Merge runs; runs sharing a config (seed aside) are summarised by medians."""
    if not run_dirs:
        raise InputArtifactError("no run directories given")
    runs = [load_run(d) for d in run_dirs]
    warnings = []
    versions = sorted({r["manifest"].get("metric_version") for r in runs})
    if len(versions) > 1:
        warnings.append(f"runs use different metric versions: {versions}")
    groups: dict[str, list[dict]] = {}
    for r in runs:
        groups.setdefault(_config_key(r["manifest"]), []).append(r)
    out_groups = []
    for key, members in groups.items():
        info = json.loads(key)
        entry = {
            "command": info["command"],
            "config": info["config"],
            "runs": [m["dir"] for m in members],
            "seeds": [m["manifest"]["master_seed"] for m in members],
        }
        summaries = [m["summary"] for m in members if "summary" in m]
        if summaries:
            entry["median_occupied_cells"] = statistics.median(s["occupied_cells"] for s in summaries)
            entry["median_coverage_rate"] = statistics.median(s["coverage_rate"] for s in summaries)
            entry["median_marginal_occupancy"] = {
                dim: statistics.median(s["marginal_occupancy"][dim] for s in summaries)
                for dim in ("magnitude", "phase", "entanglement")
            }
        tables = [m["table"] for m in members if "table" in m]
        if tables:
            acc: dict[str, list[float]] = {}
            for t in tables:
                for row in t:
                    acc.setdefault(row["program"], []).append(float(row["accuracy"]))
            entry["median_accuracy"] = {p: statistics.median(v) for p, v in sorted(acc.items())}
        curves = [m["growth"] for m in members if "growth" in m]
        if curves:
            entry["final_growth"] = [
                {"novaq": int(c[-1]["novaq_occupied"]), "baseline": int(c[-1]["baseline_occupied"])}
                for c in curves
            ]
        out_groups.append(entry)
    report = {"schema": "novaq-report/1", "metric_versions": versions, "warnings": warnings, "groups": out_groups}
    return report, _markdown(report)


def _markdown(report: dict) -> str:
    lines = ["# NovaQ run summary", ""]
    for w in report["warnings"]:
        lines.append(f"**Warning:** {w}")
        lines.append("")
    lines.append(f"Metric definitions: {', '.join(str(v) for v in report['metric_versions'])}")
    lines.append("")
    for g in report["groups"]:
        camp = g["config"]["campaign"]
        lines.append(f"## {g['command']}: mode={camp['mode']} n={camp['n_qubits']} budget={camp['total_budget']}")
        lines.append("")
        lines.append(f"- runs: {len(g['runs'])} (seeds {', '.join(str(s) for s in g['seeds'])})")
        if "median_occupied_cells" in g:
            lines.append(f"- median occupied cells: {g['median_occupied_cells']} "
                         f"({100 * g['median_coverage_rate']:.1f}%)")
            marg = g["median_marginal_occupancy"]
            lines.append(f"- median marginal bins: magnitude {marg['magnitude']}, "
                         f"phase {marg['phase']}, entanglement {marg['entanglement']}")
        for prog, acc in g.get("median_accuracy", {}).items():
            lines.append(f"- {prog}: median accuracy {100 * acc:.1f}%")
        for c in g.get("final_growth", []):
            lines.append(f"- growth end point: novaq {c['novaq']}, baseline {c['baseline']}")
        lines.append("")
    return "\n".join(lines)
