"""Repeated-split evaluation harness and report writer.

One run = one seeded stratified split, one dictionary, every test sequence
classified, one confusion matrix.  Run ``r`` uses seed ``base_seed + r``.
"""
from __future__ import annotations

import configparser
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import (ConfusionMatrix, ConfusionSummary,
                       accumulate_confusion, aggregate_runs, default_components,
                       eigenface_classify, eigenface_fit, format_table, residual_classify,
                       src_classify, to_csv)
from .dataio import (EmotionSequence, build_dictionary, build_test_unit, class_order,
                     emotion_image, generate_synthetic_sequences, load_sequence_dir,
                     split_train_test)
from .errors import InvalidConfig, NonFiniteIterate
from .solvers import SolverConfig, admm_solve, sparsity_from_fraction

log = logging.getLogger(__name__)

EXPERIMENT_MODELS = ("chislr", "slr", "src", "eigenface_nn", "eigenface_ns")


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 0
    d: int = 128
    classes: int = 7
    per_class: int = 25
    frames: int = 10
    noise: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "chislr"
    data_path: str = ""
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    tau_trn: int = 4
    tau_tst: int = 8
    train_per_class: int = 15
    test_per_class: int = 10
    runs: int = 20
    base_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    src_sparsity: float = 0.35
    eigen_components: int = 0  # 0: min(50, n_train - 1)
    workers: int = 1

    def __post_init__(self):
        if self.model not in EXPERIMENT_MODELS:
            raise InvalidConfig(f"unknown model {self.model!r}; expected one of {EXPERIMENT_MODELS}")
        if self.runs < 1 or self.workers < 1:
            raise InvalidConfig("runs and workers must be >= 1")
        if self.tau_trn < 1 or self.tau_tst < 1:
            raise InvalidConfig("tau_trn and tau_tst must be >= 1")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise InvalidConfig("per-class train/test counts must be >= 1")
        if not 0 < self.src_sparsity <= 1:
            raise InvalidConfig("src sparsity fraction must lie in (0, 1]")
        if self.eigen_components < 0:
            raise InvalidConfig("eigenface components must be >= 0")
        if self.model == "slr" and self.solver.lambda_g != 0:
            raise InvalidConfig("model=slr requires lambda_g = 0")
        if self.model == "chislr" and self.solver.lambda_g == 0:
            raise InvalidConfig("model=chislr requires lambda_g > 0 (use model=slr)")


# ---------------------------------------------------------------- config files

_SOLVER_KEYS = {f.name: f.type for f in fields(SolverConfig)}


def _coerce(value: str, kind):
    kind = kind if isinstance(kind, str) else getattr(kind, "__name__", str(kind))
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise InvalidConfig(f"cannot parse {value!r} as {kind}") from None
    return value


def resolve_config(file_values: dict | None = None, overrides: dict | None = None
                   ) -> ExperimentConfig:
    """Merge ``section.key -> str`` values from a file with flag overrides (flags win).

    Solver defaults depend on the model: SLR starts from ``lambda_g = 0`` and
    100 outer iterations.
    """
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = ({f"experiment.{n}" for n in ("model", "runs", "base_seed", "tau_trn", "tau_tst",
                                          "train_per_class", "test_per_class", "workers")}
             | {"data.path", "src.sparsity_fraction", "eigenface.components"}
             | {f"synthetic.{f.name}" for f in fields(SyntheticSpec)}
             | {f"solver.{k}" for k in _SOLVER_KEYS})
    unknown = sorted(set(merged) - known)
    if unknown:
        raise InvalidConfig(f"unknown configuration key(s): {', '.join(unknown)}")

    def get(key, default, kind):
        return _coerce(str(merged[key]), kind) if key in merged else default

    model = str(merged.get("experiment.model", "chislr")).strip()
    if model in ("chislr", "slr"):
        base = SolverConfig.for_model(model)
    else:
        base = SolverConfig()
    solver_over = {k: _coerce(str(merged[f"solver.{k}"]), t)
                   for k, t in _SOLVER_KEYS.items() if f"solver.{k}" in merged}
    solver = replace(base, **solver_over)
    synth = SyntheticSpec(**{f.name: get(f"synthetic.{f.name}", f.default, f.type)
                             for f in fields(SyntheticSpec)})
    return ExperimentConfig(
        model=model,
        data_path=str(merged.get("data.path", "")).strip(),
        synthetic=synth,
        tau_trn=get("experiment.tau_trn", 4, "int"),
        tau_tst=get("experiment.tau_tst", 8, "int"),
        train_per_class=get("experiment.train_per_class", 15, "int"),
        test_per_class=get("experiment.test_per_class", 10, "int"),
        runs=get("experiment.runs", 20, "int"),
        base_seed=get("experiment.base_seed", 0, "int"),
        solver=solver,
        src_sparsity=get("src.sparsity_fraction", 0.35, "float"),
        eigen_components=get("eigenface.components", 0, "int"),
        workers=get("experiment.workers", 1, "int"),
    )


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    return {f"{sec}.{key}": val for sec in parser.sections() for key, val in parser[sec].items()}


def config_to_ini(cfg: ExperimentConfig) -> str:
    """Every resolved value, defaults included, in the same format the loader reads."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["experiment"] = {
        "model": cfg.model, "runs": str(cfg.runs), "base_seed": str(cfg.base_seed),
        "tau_trn": str(cfg.tau_trn), "tau_tst": str(cfg.tau_tst),
        "train_per_class": str(cfg.train_per_class), "test_per_class": str(cfg.test_per_class),
        "workers": str(cfg.workers),
    }
    parser["data"] = {"path": cfg.data_path}
    parser["synthetic"] = {f.name: repr(getattr(cfg.synthetic, f.name))
                           for f in fields(SyntheticSpec)}
    parser["solver"] = {k: repr(v) for k, v in cfg.solver.as_dict().items()}
    parser["src"] = {"sparsity_fraction": repr(cfg.src_sparsity)}
    parser["eigenface"] = {"components": str(cfg.eigen_components)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------- running

def load_sequences(cfg: ExperimentConfig) -> list[EmotionSequence]:
    if cfg.data_path:
        return load_sequence_dir(cfg.data_path)
    s = cfg.synthetic
    return generate_synthetic_sequences(s.seed, d=s.d, k=s.classes, per_class=s.per_class,
                                        n_frames=s.frames, noise_sigma=s.noise)


def _classify_admm(args):
    y, dictionary, solver = args
    result = admm_solve(y, dictionary, solver)
    return residual_classify(y, dictionary, result), result.iterations_run


@dataclass(frozen=True)
class RunResult:
    seed: int
    confusion: ConfusionMatrix
    mean_iterations: float = float("nan")


def run_once(cfg: ExperimentConfig, sequences: Sequence[EmotionSequence], run_index: int,
             labels: Sequence[str], pool: ProcessPoolExecutor | None = None) -> RunResult:
    seed = cfg.base_seed + run_index
    train, test = split_train_test(sequences, cfg.train_per_class, cfg.test_per_class, seed)
    index = {lab: i for i, lab in enumerate(labels)}
    truths = [index[s.label] for s in test]
    iters = float("nan")
    if cfg.model in ("chislr", "slr"):
        dictionary = build_dictionary(train, cfg.tau_trn, labels)
        jobs = [(build_test_unit(s, cfg.tau_tst), dictionary, cfg.solver) for s in test]
        mapped = list(pool.map(_classify_admm, jobs) if pool else map(_classify_admm, jobs))
        reports = [m[0] for m in mapped]
        iters = float(np.mean([m[1] for m in mapped]))
    elif cfg.model == "src":
        dictionary = build_dictionary(train, 1, labels)
        sparsity = sparsity_from_fraction(cfg.src_sparsity, dictionary.n)
        reports = [src_classify(emotion_image(s), dictionary, sparsity) for s in test]
    else:
        train_mat = np.column_stack([emotion_image(s) for s in train])
        train_lab = [index[s.label] for s in train]
        k = cfg.eigen_components or default_components(len(train))
        model = eigenface_fit(train_mat, k, train_lab, n_classes=len(labels))
        mode = "nearest_neighbor" if cfg.model == "eigenface_nn" else "nearest_subspace"
        reports = [eigenface_classify(emotion_image(s), model, mode) for s in test]
    cm = accumulate_confusion(zip(truths, reports), len(labels), labels)
    log.info("run %d (seed %d): rate %.4f", run_index, seed, cm.total_rate)
    return RunResult(seed, cm, iters)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    runs: tuple
    complete: bool = True
    error: str = ""

    @property
    def summary(self) -> ConfusionSummary | None:
        return aggregate_runs([r.confusion for r in self.runs]) if self.runs else None


def run_experiment(cfg: ExperimentConfig, sequences: Sequence[EmotionSequence] | None = None
                   ) -> ExperimentResult:
    """Run every split; a solver divergence ends the experiment with a partial result."""
    sequences = list(sequences) if sequences is not None else load_sequences(cfg)
    labels = class_order(sequences)
    runs = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for r in range(cfg.runs):
            try:
                runs.append(run_once(cfg, sequences, r, labels, pool))
            except NonFiniteIterate as exc:
                log.error("run %d diverged: %s", r, exc)
                return ExperimentResult(cfg, tuple(runs), complete=False, error=str(exc))
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentResult(cfg, tuple(runs))


# ---------------------------------------------------------------- reports

def _model_name(model: str) -> str:
    return {"chislr": "C-HiSLR", "slr": "SLR", "src": "SRC", "eigenface_nn": "Eigenface-NN",
            "eigenface_ns": "Eigenface-NS"}[model]


def write_reports(result: ExperimentResult, out_dir) -> Path:
    """Write the resolved config, per-run and aggregate confusion matrices and a summary.

    Contents depend only on the configuration and data, so repeated runs are
    byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    (out / "config.ini").write_text(config_to_ini(cfg))
    for i, run in enumerate(result.runs):
        cm = run.confusion
        stem = out / f"run_{i:03d}"
        (stem.with_name(stem.name + "_confusion.txt")).write_text(
            f"# run {i} seed {run.seed} rate {cm.total_rate:.4f}\n"
            + format_table(cm.counts, cm.labels, fmt="{:.0f}", corner="truth"))
        (stem.with_name(stem.name + "_confusion.csv")).write_text(
            to_csv(cm.counts, cm.labels, fmt="{:d}"))
    lines = [f"model: {_model_name(cfg.model)}",
             f"status: {'complete' if result.complete else 'INCOMPLETE: ' + result.error}",
             f"runs: {len(result.runs)} of {cfg.runs}"]
    summary = result.summary
    if summary is not None:
        labels = summary.labels
        mean_norm = summary.mean_normalized
        (out / "aggregate_confusion.txt").write_text(
            "# rows: ground truth, columns: prediction; row-normalised, averaged over runs\n"
            + format_table(mean_norm, labels, corner="truth"))
        (out / "aggregate_confusion.csv").write_text(to_csv(mean_norm, labels))
        (out / "aggregate_counts.csv").write_text(
            to_csv(summary.pooled.counts, labels, fmt="{:d}"))
        sens = summary.sensitivity_mean
        lines += [f"total recognition rate: {summary.rate_mean:.4f} +/- {summary.rate_std:.4f} (std over runs)",
                  "per-run rates: " + " ".join(f"{r:.4f}" for r in summary.rates),
                  "", "sensitivity:",
                  format_table(sens[None, :], labels, corner="Model",
                               row_labels=[_model_name(cfg.model)]).rstrip("\n")]
        (out / "sensitivity.csv").write_text(
            "model," + ",".join(labels) + "\n"
            + _model_name(cfg.model) + "," + ",".join(f"{v:.17g}" for v in sens) + "\n")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return out
