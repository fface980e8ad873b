"""Training loop, configuration, checkpoint bookkeeping and loss evaluation."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import numerics as nx
from .analysis import consistency_from_teacher_forcing
from .corpus.oracle import make_oracle_labels
from .corpus.types import TimelineExample
from .corpus.vocab import RESERVED, Vocab
from .model import UTS, ModelConfig, init_params
from .numerics import checkpoint

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "l_abs", "l_ext", "l_inc", "total", "val_total", "val_l_abs_per_token", "consistency")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch_id: int, cause: Exception | str):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_id}: {cause}")
        self.epoch = epoch
        self.batch_id = batch_id


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    hidden_dim: int = 256
    embed_dim: int = 128
    key_dim: int = 128
    global_dim: int = 512
    local_dim: int = 256
    batch_size: int = 16
    max_events: int = 8
    lr: float = 0.15
    clip_norm: float = 2.0
    beam: int = 4
    K: int = 3
    lambda_inc: float = 1.0
    init_range: float = 0.02
    seed: int = 0
    max_epochs: int = 30
    patience: int = 3
    polish_iters: int = 2
    use_graph: bool = True
    use_copy: bool = True
    re_residual: bool = False
    adagrad_init: float = 0.01
    dtype: str = "float64"
    vocab_cap: int = 50_000
    max_selected: int = 4
    max_len: int = 70
    keep_checkpoints: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("hidden_dim", "embed_dim", "key_dim", "global_dim", "local_dim", "batch_size", "max_events",
                     "beam", "K", "max_epochs", "patience", "polish_iters", "vocab_cap", "max_selected", "max_len",
                     "keep_checkpoints"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.init_range <= 0:
            raise ConfigError("init_range must be positive")
        if self.lr <= 0 or self.clip_norm <= 0:
            raise ConfigError("lr and clip_norm must be positive")
        if self.lambda_inc < 0 or self.adagrad_init < 0:
            raise ConfigError("lambda_inc and adagrad_init must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, embed_dim=self.embed_dim, hidden_dim=self.hidden_dim, key_dim=self.key_dim,
            global_dim=self.global_dim, local_dim=self.local_dim, max_events=self.max_events,
            polish_iters=self.polish_iters, use_graph=self.use_graph, re_residual=self.re_residual,
            use_copy=self.use_copy, init_range=self.init_range,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def field_types() -> dict[str, type]:
    return {f.name: {"int": int, "float": float, "bool": bool, "str": str}[f.type] for f in dataclasses.fields(TrainConfig)}


def coerce(name: str, raw: str):
    types = field_types()
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        return kind(raw.strip())
    except (KeyError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    return TrainConfig(**values)


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


@dataclass
class TrainState:
    epoch: int = 0
    best_val_loss: float = math.inf
    epochs_since_best: int = 0
    top_checkpoints: list[tuple[float, str]] = field(default_factory=list)

    def update_val(self, val_loss: float) -> None:
        if val_loss < self.best_val_loss:
            self.best_val_loss = val_loss
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1

    def should_stop(self, patience: int) -> bool:
        return self.epochs_since_best >= patience

    def offer(self, val_loss: float, path: str, keep: int = 3) -> tuple[bool, list[str]]:
        """Insert (val_loss, path) if it ranks in the best ``keep``; returns (kept, evicted paths)."""
        ranked = sorted(self.top_checkpoints + [(val_loss, path)], key=lambda x: (x[0], x[1]))
        self.top_checkpoints, evicted = ranked[:keep], ranked[keep:]
        return any(p == path for _, p in self.top_checkpoints), [p for _, p in evicted]


@dataclass
class EpochLog:
    epoch: int
    l_abs: float
    l_ext: float
    l_inc: float
    total: float
    val_total: float
    val_l_abs_per_token: float
    consistency: float

    def row(self) -> list:
        return [self.epoch] + [f"{getattr(self, c):.6f}" for c in LOG_COLUMNS[1:]]


@dataclass
class TrainResult:
    state: TrainState
    model: UTS
    history: list[EpochLog]


def build_vocab_from_examples(examples: Iterable[TimelineExample], cap: int) -> Vocab:
    def tokens():
        for ex in examples:
            for ev in ex.events:
                yield from ev.words
            yield from ex.summary_words
    return Vocab.from_counts(tokens(), cap)


def ensure_oracle(examples: list[TimelineExample], max_selected: int) -> list[TimelineExample]:
    for ex in examples:
        if ex.oracle_labels is None:
            ex.oracle_labels = make_oracle_labels(ex, max_selected)
    return examples


def batches(examples: list, size: int) -> list[list]:
    return [examples[i:i + size] for i in range(0, len(examples), size)]


def evaluate_losses(model: UTS, examples: list[TimelineExample], cfg: TrainConfig) -> dict[str, float]:
    """Teacher-forced losses (example means) and the word/event consistency diagnostic, no gradients."""
    sums = dict(l_abs=0.0, l_ext=0.0, l_inc=0.0, total=0.0, l_abs_per_token=0.0, consistency=0.0)
    n = 0
    with nx.no_grad():
        for chunk in batches(examples, cfg.batch_size):
            batch = model.batch(chunk)
            tf = model.abstractive_pass(batch)
            ext = model.extractive_pass(batch)
            jl = model.combine(batch, tf, ext, cfg.lambda_inc, cfg.K)
            B = batch.size
            sums["l_abs"] += float(jl.l_abs.data.sum())
            sums["l_ext"] += float(jl.l_ext.data.sum())
            sums["l_inc"] += float(jl.l_inc.data.sum())
            sums["total"] += float(jl.total.data) * B
            sums["l_abs_per_token"] += float((jl.l_abs.data / jl.n_tokens).sum())
            sums["consistency"] += float(consistency_from_teacher_forcing(tf, batch).sum())
            n += B
    return {k: v / max(n, 1) for k, v in sums.items()}


def checkpoint_meta(model: UTS, cfg: TrainConfig, epoch: int, val_loss: float) -> dict:
    return {
        "model_config": model.cfg.to_dict(),
        "train_config": cfg.to_dict(),
        "vocab": model.vocab.itos[len(RESERVED):],
        "epoch": epoch,
        "val_loss": val_loss,
    }


def save_model(path, model: UTS, cfg: TrainConfig, epoch: int = 0, val_loss: float = math.nan) -> None:
    checkpoint.save(path, model.params, checkpoint_meta(model, cfg, epoch, val_loss))


def load_model(path) -> tuple[UTS, dict]:
    params, meta = checkpoint.load(path)
    try:
        mcfg = ModelConfig(**meta["model_config"])
        vocab = Vocab(meta["vocab"])
    except (KeyError, TypeError) as e:
        raise checkpoint.CheckpointError(f"{path}: checkpoint metadata incomplete ({e})") from None
    ref = init_params(mcfg, dtype=params.dtype)
    expected = set(ref.names())
    if set(params.names()) != expected:
        raise checkpoint.CheckpointError(f"{path}: parameter names do not match the stored model config")
    for name in expected:
        if ref[name].shape != params[name].shape:
            raise checkpoint.CheckpointError(
                f"{path}: {name} has shape {params[name].shape}, config implies {ref[name].shape}")
    return UTS(mcfg, params, vocab), meta


def train_epoch(model: UTS, examples: list[TimelineExample], cfg: TrainConfig, rng: np.random.Generator,
                epoch: int) -> dict[str, float]:
    order = rng.permutation(len(examples))
    sums = dict(l_abs=0.0, l_ext=0.0, l_inc=0.0, total=0.0)
    n = 0
    for batch_id, idx in enumerate(batches(list(order), cfg.batch_size)):
        batch = model.batch([examples[i] for i in idx])
        model.params.zero_grad()
        nx.get_tape().clear()
        try:
            jl = model.joint_loss(batch, cfg.lambda_inc, cfg.K)
            if not np.isfinite(jl.total.data):
                raise nx.NumericalError("loss is not finite")
            nx.backward(jl.total)
            grads = model.params.grads()
            if not all(np.isfinite(g).all() for g in grads.values()):
                raise nx.NumericalError("gradient is not finite")
        except nx.NumericalError as e:
            nx.get_tape().clear()
            raise TrainingDiverged(epoch, batch_id, e) from e
        nx.adagrad_step(model.params, cfg.lr, cfg.clip_norm)
        B = batch.size
        sums["l_abs"] += float(jl.l_abs.data.sum())
        sums["l_ext"] += float(jl.l_ext.data.sum())
        sums["l_inc"] += float(jl.l_inc.data.sum())
        sums["total"] += float(jl.total.data) * B
        n += B
    return {k: v / n for k, v in sums.items()}


def train(
    cfg: TrainConfig,
    train_examples: list[TimelineExample],
    val_examples: list[TimelineExample],
    out_dir=None,
    vocab: Vocab | None = None,
    on_epoch: Callable[[EpochLog, UTS], None] | None = None,
) -> TrainResult:
    """Seeded training with validation early stopping and top-k checkpoint retention."""
    if not train_examples or not val_examples:
        raise ValueError("need non-empty training and validation sets")
    ensure_oracle(train_examples, cfg.max_selected)
    ensure_oracle(val_examples, cfg.max_selected)
    dtype = np.dtype(cfg.dtype).type
    if vocab is None:
        vocab = build_vocab_from_examples(train_examples, cfg.vocab_cap)
    too_long = [ex.id for ex in train_examples + val_examples if len(ex.events) > cfg.max_events]
    if too_long:
        raise ValueError(f"{len(too_long)} examples exceed max_events={cfg.max_events}, e.g. {too_long[0]}")
    model = UTS.create(cfg.model_config(len(vocab)), vocab, seed=cfg.seed, dtype=dtype)
    model.params.fill_accumulators(cfg.adagrad_init)
    rng = np.random.default_rng(cfg.seed)

    out = Path(out_dir) if out_dir is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(dump_config(cfg))
        log_file = open(out / "losses.tsv", "w", newline="")
        writer = csv.writer(log_file, delimiter="\t")
        writer.writerow(LOG_COLUMNS)

    state = TrainState()
    history: list[EpochLog] = []
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            tr = train_epoch(model, train_examples, cfg, rng, epoch)
            val = evaluate_losses(model, val_examples, cfg)
            entry = EpochLog(epoch, tr["l_abs"], tr["l_ext"], tr["l_inc"], tr["total"], val["total"],
                             val["l_abs_per_token"], val["consistency"])
            history.append(entry)
            state.epoch = epoch
            state.update_val(val["total"])
            if out is not None:
                writer.writerow(entry.row())
                log_file.flush()
                path = str(out / f"ckpt-epoch{epoch:03d}.uts")
                kept, evicted = state.offer(val["total"], path, cfg.keep_checkpoints)
                if kept:
                    save_model(path, model, cfg, epoch, val["total"])
                for p in evicted:
                    Path(p).unlink(missing_ok=True)
            log.info("epoch %d train %.4f (abs %.4f ext %.4f inc %.4f) val %.4f", epoch, tr["total"], tr["l_abs"],
                     tr["l_ext"], tr["l_inc"], val["total"])
            if on_epoch is not None:
                on_epoch(entry, model)
            if state.should_stop(cfg.patience):
                log.info("early stop after epoch %d (no improvement for %d epochs)", epoch, state.epochs_since_best)
                break
    finally:
        if writer is not None:
            log_file.close()
    return TrainResult(state, model, history)


def read_loss_log(path) -> list[dict[str, float]]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    if not rows:
        raise ValueError(f"{path}: empty loss log")
    missing = {"epoch", "l_abs", "l_ext", "l_inc", "total"} - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return [{k: float(v) for k, v in r.items()} for r in rows]
