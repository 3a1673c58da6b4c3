"""
Multi-length evaluation, the source-only ablation, and benchmark sweeps over the
number of seen classes and the unlabeled-set size.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional

from pydantic import ValidationError

from ..exceptions import ConfigurationError, DataError
from ..schemas.config import SynthSpec, TrainConfig
from ..schemas.metrics import BenchmarkLine, MetricLine
from . import retrieval, synthdata
from .synthdata import EvaluationData, TrainingData
from .trainer import METRICS_FILE, Trainer, encode_index

logger = logging.getLogger(__name__)

DEFAULT_BITS = (16, 32, 64, 96, 128)

# SynthSpec field -> default levels
BENCHMARK_FACTORS = {
    "n_seen": (2, 4, 6, 8),
    "n_unlabeled": (256, 512, 1024, 1600),
}


def with_code_bits(cfg: TrainConfig, bits: int) -> TrainConfig:
    """Copy of ``cfg`` at another code length; unset margin and thresholds follow the new length."""
    values = cfg.model_dump()
    values["code_bits"] = bits
    return TrainConfig.model_validate(values)


def source_only(cfg: TrainConfig) -> TrainConfig:
    """Ablation: no mined target rows enter the fine or hash losses."""
    return cfg.model_copy(update={"mine_targets": False})


def with_benchmark(spec: SynthSpec, factor: str, level: int) -> SynthSpec:
    """Copy of ``spec`` with one field changed; a pairing that no longer fits falls back to the default."""
    if factor not in BENCHMARK_FACTORS:
        raise ConfigurationError(f"unknown benchmark factor {factor!r}; expected one of {sorted(BENCHMARK_FACTORS)}")
    values = spec.model_dump()
    values[factor] = level
    if factor == "n_seen" and any(p >= level for p in values["pairing"]):
        values["pairing"] = None
    try:
        return SynthSpec.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"{factor}={level}: {e.errors()[0]['msg']}") from e


def _write_lines(path: Path, lines: Iterable[MetricLine]) -> None:
    with path.open("w", encoding="utf-8") as f:
        for line in lines:
            f.write(line.to_line() + "\n")


def train_and_evaluate(
    cfg: TrainConfig, data: TrainingData, evaluation: EvaluationData, out_dir: str | Path
) -> List[MetricLine]:
    params = Trainer(cfg, data, evaluation).fit(out_dir)
    q = encode_index(params, evaluation.queries)
    db = encode_index(params, evaluation.database)
    return retrieval.evaluate(q, db, cfg.eval_radius)


def sweep(
    cfg: TrainConfig,
    data: TrainingData,
    evaluation: EvaluationData,
    out_dir: str | Path,
    bits: Iterable[int] = DEFAULT_BITS,
) -> List[MetricLine]:
    """One model per code length; all metric lines are also written to ``<out>/sweep.jsonl``."""
    if evaluation is None:
        raise DataError("sweep needs an evaluation split (eval/queries.feat, eval/database.feat)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines: List[MetricLine] = []
    for b in bits:
        run_cfg = with_code_bits(cfg, b)
        logger.info(f"sweep: training {b}-bit model")
        lines.extend(train_and_evaluate(run_cfg, data, evaluation, out / f"bits_{b}"))
    _write_lines(out / "sweep.jsonl", lines)
    logger.info(f"sweep finished; per-epoch metrics under {out}/bits_*/{METRICS_FILE}")
    return lines


def benchmark_sweep(
    cfg: TrainConfig,
    spec: SynthSpec,
    factor: str,
    out_dir: str | Path,
    levels: Optional[Iterable[int]] = None,
) -> List[BenchmarkLine]:
    """Regenerate the benchmark at each level of ``factor`` and train one model per level.

    Metric lines go to ``<out>/<factor>.jsonl``; each run's files to ``<out>/<factor>_<level>/``.
    """
    if factor not in BENCHMARK_FACTORS:
        raise ConfigurationError(f"unknown benchmark factor {factor!r}; expected one of {sorted(BENCHMARK_FACTORS)}")
    levels = list(levels) if levels is not None else list(BENCHMARK_FACTORS[factor])
    specs = [with_benchmark(spec, factor, level) for level in levels]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines: List[BenchmarkLine] = []
    for level, run_spec in zip(levels, specs):
        logger.info(f"benchmark sweep: {factor}={level}")
        dataset = synthdata.generate(run_spec)
        for line in train_and_evaluate(cfg, dataset.training, dataset.evaluation, out / f"{factor}_{level}"):
            lines.append(BenchmarkLine(**line.model_dump(), factor=factor, level=level))
    _write_lines(out / f"{factor}.jsonl", lines)
    return lines
