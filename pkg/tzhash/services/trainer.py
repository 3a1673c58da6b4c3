"""
Joint training: one step runs the shared network on both streams, mines the coarse and fine
selections, builds pair labels, and takes one SGD step on the weighted sum of the three losses.
"""

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from ..config import dump_flat, get_settings
from ..exceptions import ConfigurationError, DataError, NumericFailure
from ..models.batch import FeatureBatch
from ..models.code_index import CodeIndex
from ..models.params import ParamStore
from ..schemas.config import TrainConfig
from ..schemas.metrics import LossBreakdown, MetricsRecord
from ..utils import diffcore
from ..utils.diffcore import Tape
from . import backbone, coarse_miner, fine_miner, hash_loss, retrieval
from .coarse_miner import CoarseScores, CoarseSelection
from .fine_miner import SoftLabelTable
from .hash_loss import HashBatch
from .synthdata import EvaluationData, TrainingData

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.tzsh"
METRICS_FILE = "metrics.jsonl"
CONFIG_FILE = "config.conf"
DIAGNOSTIC_FILE = "diagnostic.json"


@dataclass(frozen=True)
class MinedBatch:
    """Discrete decisions of one forward pass.

    ``coarse`` indexes the unlabeled batch; ``fine`` indexes the m coarse-selected rows, one
    entry per novel class; ``target_classes`` are the vocabulary ids given to the fine rows.
    """

    coarse: CoarseSelection
    fine: np.ndarray
    soft_labels: np.ndarray
    target_classes: np.ndarray
    pair_labels: np.ndarray


@dataclass(frozen=True)
class StepResult:
    losses: LossBreakdown
    mined: MinedBatch


def init_params(cfg: TrainConfig, d_in: int, n_y: int) -> ParamStore:
    """All weights from one RNG seeded with ``cfg.seed``, in a fixed order."""
    rng = np.random.default_rng(cfg.seed)
    params = ParamStore()
    bb = cfg.backbone(d_in)
    backbone.init_backbone(params, bb, rng)
    coarse_miner.init_coarse_head(params, bb.d_f, rng)
    fine_miner.init_fine_head(params, bb.d_f, n_y, rng)
    hash_loss.init_hash_head(params, bb.d_f, cfg.code_bits, rng)
    return params


def loss_weights(cfg: TrainConfig, step: int) -> tuple[float, float, float]:
    if step < cfg.warmup_steps:
        return cfg.lambda_coarse, 0.0, 0.0
    return cfg.lambda_coarse, cfg.lambda_fine, cfg.lambda_hash


def _check_geometry(src: FeatureBatch, unl: FeatureBatch, cfg: TrainConfig, table: SoftLabelTable) -> None:
    if len(src) != cfg.source_batch or len(unl) != cfg.unlabeled_batch:
        raise ConfigurationError(
            f"batches of {len(src)}/{len(unl)} rows, config expects {cfg.source_batch}/{cfg.unlabeled_batch}"
        )
    if cfg.n_novel is not None and cfg.n_novel != table.n_novel:
        raise ConfigurationError(f"config n_novel={cfg.n_novel} but the vocabulary has {table.n_novel} novel classes")


def compute_losses(
    src: FeatureBatch,
    unl: FeatureBatch,
    params: ParamStore,
    cfg: TrainConfig,
    table: SoftLabelTable,
    frozen: Optional[MinedBatch] = None,
) -> tuple[diffcore.Var, LossBreakdown, MinedBatch, Tape]:
    """Forward pass; mining decisions come from ``frozen`` when given."""
    _check_geometry(src, unl, cfg, table)
    tape = Tape()
    f_s, f_u = backbone.embed_pair_on_tape(tape, src, unl, params)

    # coarse
    c_s = coarse_miner.score_on_tape(tape, f_s, params)
    c_u = coarse_miner.score_on_tape(tape, f_u, params)
    selection = frozen.coarse if frozen else coarse_miner.select(CoarseScores(c_u.value, c_s.value), cfg.groups)
    l_coarse = coarse_miner.coarse_loss_on_tape(tape, c_u, c_s, selection)

    # fine
    f_sel = tape.gather_rows(f_u, selection.indices)
    p_s = fine_miner.score_on_tape(tape, f_s, params)
    p_u = fine_miner.score_on_tape(tape, f_sel, params)
    fine_idx = frozen.fine if frozen else fine_miner.assign(p_u.value)
    soft = table(src.labels)
    l_fine = fine_miner.fine_loss_on_tape(tape, p_s, p_u, fine_idx, soft, include_targets=cfg.mine_targets)

    # hash
    novel_ids = table.vocab.novel_ids
    if cfg.mine_targets:
        f_tgt = tape.gather_rows(f_sel, fine_idx)
        h = hash_loss.codes_on_tape(tape, tape.concat_rows([f_s, f_tgt]), params)
        target_classes = novel_ids[p_u.value[fine_idx].argmax(axis=1)]
    else:
        h = hash_loss.codes_on_tape(tape, f_s, params)
        target_classes = np.empty(0, dtype=np.int64)
    if frozen:
        labels = frozen.pair_labels
    else:
        batch = HashBatch(
            h.value,
            np.r_[np.zeros(len(src), dtype=bool), np.ones(target_classes.size, dtype=bool)],
            np.r_[src.labels, target_classes],
        )
        labels = hash_loss.pair_labels(batch, cfg.effective_tau_sim, cfg.effective_tau_dis)
    l_hash = hash_loss.contrastive_on_tape(tape, h, labels, cfg.effective_margin)

    lam_c, lam_f, lam_h = loss_weights(cfg, params.step)
    total = tape.weighted_sum([(l_coarse, lam_c), (l_fine, lam_f), (l_hash, lam_h)])
    losses = LossBreakdown(coarse=l_coarse.item(), fine=l_fine.item(), hash=l_hash.item(), total=total.item())
    mined = MinedBatch(selection, fine_idx, soft, target_classes, labels)
    return total, losses, mined, tape


def _diagnostics(params: ParamStore, losses: LossBreakdown, cfg: TrainConfig) -> dict:
    return {
        "step": params.step,
        "epoch": params.epoch,
        "losses": losses.model_dump(),
        "param_norms": {k: float(np.linalg.norm(v)) for k, v in params.items()},
        "param_finite": {k: bool(np.all(np.isfinite(v))) for k, v in params.items()},
        "config": cfg.model_dump(),
    }


def train_step(
    src: FeatureBatch,
    unl: FeatureBatch,
    params: ParamStore,
    cfg: TrainConfig,
    table: SoftLabelTable,
    frozen: Optional[MinedBatch] = None,
) -> StepResult:
    """Forward, routed backward, and one SGD step on λc·Lc + λf·Lf + λh·Lh."""
    params.zero_grad()
    total, losses, mined, tape = compute_losses(src, unl, params, cfg, table, frozen)
    if not all(math.isfinite(v) for v in losses.model_dump().values()):
        raise NumericFailure(f"non-finite loss at step {params.step}: {losses}", _diagnostics(params, losses, cfg))
    tape.backward(total)
    diffcore.sgd_step(params, cfg.lr)
    return StepResult(losses, mined)


# --- inference ---

def encode(params: ParamStore, batch: FeatureBatch) -> np.ndarray:
    """Relaxed codes h for every row of ``batch``."""
    return hash_loss.relaxed_codes(backbone.embed(batch, params), params)


def encode_index(params: ParamStore, batch: FeatureBatch) -> CodeIndex:
    return retrieval.binarize(encode(params, batch), batch.labels)


def novel_probability(params: ParamStore, batch: FeatureBatch) -> np.ndarray:
    f = backbone.embed(batch, params)
    return coarse_miner.score(f, f, params).c_u[:, coarse_miner.NOVEL_COL]


# --- sampling ---

def stratified_order(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle within each class, then interleave classes so consecutive blocks are balanced."""
    pools = [rng.permutation(np.flatnonzero(labels == c)) for c in rng.permutation(np.unique(labels))]
    longest = max(len(p) for p in pools)
    order = [p[i] for i in range(longest) for p in pools if i < len(p)]
    return np.asarray(order, dtype=np.int64)


class Trainer:
    """Runs epochs over a dataset, writing metrics and checkpoints to an output directory."""

    def __init__(
        self,
        cfg: TrainConfig,
        data: TrainingData,
        evaluation: Optional[EvaluationData] = None,
        record_wall_time: Optional[bool] = None,
    ):
        self.cfg = cfg
        self.data = data
        self.evaluation = evaluation
        self.table = SoftLabelTable(data.vocab)
        self.record_wall_time = get_settings().record_wall_time if record_wall_time is None else record_wall_time
        if len(data.unlabeled) < cfg.unlabeled_batch:
            raise ConfigurationError(
                f"unlabeled set has {len(data.unlabeled)} rows, fewer than one batch of {cfg.unlabeled_batch}"
            )
        if len(data.source) < 1:
            raise DataError("source set is empty")
        self.steps_per_epoch = len(data.unlabeled) // cfg.unlabeled_batch

    def init_params(self) -> ParamStore:
        return init_params(self.cfg, self.data.source.width, self.table.n_novel)

    def epoch_batches(self, epoch: int) -> Iterator[Tuple[FeatureBatch, FeatureBatch, np.ndarray]]:
        """(source batch, unlabeled batch, unlabeled-set row ids) per step; depends only on (seed, epoch)."""
        rng = np.random.default_rng([self.cfg.seed, epoch])
        unl_order = rng.permutation(len(self.data.unlabeled))
        src_order = stratified_order(self.data.source.labels, rng)
        need = self.steps_per_epoch * self.cfg.source_batch
        src_order = np.resize(src_order, need)
        for s in range(self.steps_per_epoch):
            unl_rows = unl_order[s * self.cfg.unlabeled_batch:(s + 1) * self.cfg.unlabeled_batch]
            src_rows = src_order[s * self.cfg.source_batch:(s + 1) * self.cfg.source_batch]
            yield self.data.source.take(src_rows), self.data.unlabeled.take(unl_rows), unl_rows

    def run_epoch(self, params: ParamStore) -> MetricsRecord:
        started = time.perf_counter()
        sums = np.zeros(4)
        selected_rows: List[np.ndarray] = []
        for src, unl, unl_rows in self.epoch_batches(params.epoch):
            result = train_step(src, unl, params, self.cfg, self.table)
            l = result.losses
            sums += (l.coarse, l.fine, l.hash, l.total)
            selected_rows.append(unl_rows[result.mined.coarse.indices])
        params.epoch += 1
        mean = sums / max(self.steps_per_epoch, 1)
        scores = {}
        if self.evaluation is not None:
            q = encode_index(params, self.evaluation.queries)
            db = encode_index(params, self.evaluation.database)
            scores["map"] = retrieval.mean_average_precision(q, db)
            scores["precision_at_radius"] = retrieval.precision_at_radius(q, db, self.cfg.eval_radius)
            if self.evaluation.oracle is not None and selected_rows:
                scores["coarse_precision"] = self.evaluation.oracle.novel_fraction(np.concatenate(selected_rows))
        elapsed = time.perf_counter() - started
        record = MetricsRecord(
            epoch=params.epoch,
            step=params.step,
            losses=LossBreakdown(coarse=mean[0], fine=mean[1], hash=mean[2], total=mean[3]),
            wall_time=elapsed if self.record_wall_time else None,
            **scores,
        )
        logger.info(
            f"epoch {record.epoch}: loss {record.losses.total:.4f} "
            f"(coarse {record.losses.coarse:.4f}, fine {record.losses.fine:.4f}, hash {record.losses.hash:.4f}) "
            f"map={record.map} p@{self.cfg.eval_radius}={record.precision_at_radius} in {elapsed:.2f}s"
        )
        return record

    def fit(self, out_dir: str | Path, resume: Optional[str | Path] = None) -> ParamStore:
        """Train up to ``cfg.epochs`` total epochs; resuming appends to the existing metrics file."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        params = self.init_params()
        metrics_path = out / METRICS_FILE
        if resume is not None:
            loaded = ParamStore.load(resume)
            params.check_compatible(loaded)
            params = loaded
            logger.info(f"resuming from {resume} at epoch {params.epoch}, step {params.step}")
            mode = "a"
        else:
            mode = "w"
        (out / CONFIG_FILE).write_text(dump_flat(self.cfg), encoding="utf-8")
        with metrics_path.open(mode, encoding="utf-8") as f:
            while params.epoch < self.cfg.epochs:
                record = self.run_epoch(params)
                f.write(record.to_line() + "\n")
                f.flush()
                params.save(out / CHECKPOINT_FILE)
        params.save(out / CHECKPOINT_FILE)
        return params
