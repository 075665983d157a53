"""Joint training of tagger and denoiser, evaluation, and the optimizer."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import tensor as T
from .data import IGNORE_LABEL, LabeledSentence, decode_predictions
from .lexicon import TagVocabulary, TrieSnapshot
from .matching import MatchSet, build_match_set
from .model import ForwardOutput, LexTagModel, ModelConfig, save_checkpoint
from .tensor import Tensor

logger = logging.getLogger(__name__)

METRICS_HEADER = "epoch\ttag_loss\tdn_loss\tdn_acc\tdev_p\tdev_r\tdev_f1"


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    warmup_proportion: float = 0.1
    epochs: int = 20
    seed: int = 0
    loss_weight_denoise: Optional[float] = None  # None defers to ModelConfig
    teacher_forcing: bool = False
    patience: int = 5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.warmup_proportion < 1.0:
            raise ValueError("warmup_proportion must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")

    @classmethod
    def pretrained_encoder_defaults(cls, **overrides) -> "TrainConfig":
        """The published table's settings (tuned for a pretrained encoder)."""
        base = cls(batch_size=32, learning_rate=2e-5)
        return replace(base, **overrides)


@dataclass
class EvalReport:
    span_precision: float
    span_recall: float
    span_f1: float
    denoise_accuracy: float
    per_category_f1: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TrainExample:
    sentence: LabeledSentence
    match_set: MatchSet


class Adam:
    """Adam with bias correction, decoupled weight decay, linear warmup.

    Weight decay skips vectors (biases, gains); the learning rate ramps
    linearly over the warmup fraction of total steps, then stays constant.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        config: TrainConfig,
        total_steps: int,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = config.learning_rate
        self.weight_decay = config.weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.warmup_steps = int(total_steps * config.warmup_proportion)
        self.step_index = 0
        self._m = {k: np.zeros_like(t.values) for k, t in params.items()}
        self._v = {k: np.zeros_like(t.values) for k, t in params.items()}

    def lr_at(self, step: int) -> float:
        if self.warmup_steps > 0 and step <= self.warmup_steps:
            return self.lr * step / self.warmup_steps
        return self.lr

    def step(self) -> None:
        self.step_index += 1
        lr = self.lr_at(self.step_index)
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_index
        bc2 = 1.0 - b2 ** self.step_index
        for name, p in self.params.items():
            g = p.grad
            m, v = self._m[name], self._v[name]
            if g is None:
                m *= b1
                v *= b2
            else:
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and p.values.ndim >= 2:
                update = update + self.weight_decay * p.values
            p.values = p.values - (lr * update).astype(p.values.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def _tagger_loss(output: ForwardOutput, gold_tags, sigmoid_tagger: bool) -> Tensor:
    gold = np.asarray(gold_tags, dtype=np.intp)
    if not sigmoid_tagger:
        return T.cross_entropy(output.tag_logits, gold, ignore_index=IGNORE_LABEL)
    keep = np.nonzero(gold != IGNORE_LABEL)[0]
    if keep.size == 0:
        return T.scale(T.sum_all(output.tag_logits), 0.0)
    rows = T.index_select(output.tag_logits, 0, keep)
    onehot = np.zeros((keep.size, output.tag_logits.shape[1]))
    onehot[np.arange(keep.size), gold[keep]] = 1.0
    return T.binary_cross_entropy(T.sigmoid(rows), onehot)


def joint_loss(
    output: ForwardOutput,
    gold_tags,
    denoise_labels: Optional[Sequence[bool]],
    loss_weight_denoise: float,
    sigmoid_tagger: bool = False,
) -> Tensor:
    """Tagger loss plus weighted denoiser binary cross-entropy.

    Sentences with no candidates contribute no denoiser term.
    """
    loss = _tagger_loss(output, gold_tags, sigmoid_tagger)
    if output.denoise_probs is not None and denoise_labels:
        y = np.asarray(denoise_labels, dtype=float)
        if y.shape != output.denoise_probs.shape:
            raise ValueError(
                f"{y.shape[0]} denoise labels for {output.denoise_probs.shape[0]} candidates"
            )
        bce = T.binary_cross_entropy(output.denoise_probs, y)
        loss = T.add(loss, T.scale(bce, loss_weight_denoise))
    return loss


def span_prf(
    predicted: Iterable[Sequence[tuple[int, int, int]]],
    gold: Iterable[Sequence[tuple[int, int, int]]],
) -> tuple[float, float, float, dict[int, float]]:
    """Micro precision/recall/F1 over exact (start, end, category) matches.

    Also returns per-category F1 keyed by category id.  0/0 counts as 0.
    """
    tp: dict[int, int] = {}
    np_: dict[int, int] = {}
    ng: dict[int, int] = {}
    for pred_spans, gold_spans in zip(predicted, gold):
        p_set, g_set = set(pred_spans), set(gold_spans)
        for _, _, c in p_set:
            np_[c] = np_.get(c, 0) + 1
        for _, _, c in g_set:
            ng[c] = ng.get(c, 0) + 1
        for span in p_set & g_set:
            c = span[2]
            tp[c] = tp.get(c, 0) + 1

    def f1(t: int, p: int, g: int) -> tuple[float, float, float]:
        prec = t / p if p else 0.0
        rec = t / g if g else 0.0
        f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        return prec, rec, f

    cats = set(np_) | set(ng)
    total = f1(sum(tp.values()), sum(np_.values()), sum(ng.values()))
    per_cat = {c: f1(tp.get(c, 0), np_.get(c, 0), ng.get(c, 0))[2] for c in cats}
    return total[0], total[1], total[2], per_cat


def build_examples(
    sentences: Sequence[LabeledSentence],
    snapshots: Sequence[TrieSnapshot],
    variants: Optional[Sequence[int]],
    tag_vocab: TagVocabulary,
    config: ModelConfig,
    with_labels: bool = True,
) -> list[TrainExample]:
    """Match every sentence against its lexicon variant once, up front."""
    if variants is None:
        variants = [0] * len(sentences)
    if len(variants) != len(sentences):
        raise ValueError(f"{len(variants)} variant ids for {len(sentences)} sentences")
    out = []
    for sent, v in zip(sentences, variants):
        ms = build_match_set(
            snapshots[v],
            sent.subword_ids,
            tag_vocab,
            top_n=config.top_n,
            dict_candidate=config.dict_candidate,
            gold_tags=sent.match_tags if with_labels else None,
        )
        out.append(TrainExample(sentence=sent, match_set=ms))
    return out


def evaluate(
    model: LexTagModel,
    examples: Sequence[TrainExample],
    tag_vocab: TagVocabulary,
    baseline: bool = False,
) -> EvalReport:
    """Span F1 via greedy decoding plus thresholded denoiser accuracy.

    ``baseline`` ignores every match set (the lexicon-free arm).  Denoiser
    accuracy over zero labeled candidates reports 1.0 (vacuously correct).
    """
    preds, golds = [], []
    dn_hits = dn_total = 0
    empty = MatchSet(candidates=())
    with T.no_grad():
        for ex in examples:
            ms = empty if baseline else ex.match_set
            out = model.forward(ex.sentence.subword_ids, ms, training=False)
            tag_ids = np.argmax(out.tag_logits.values, axis=-1)
            preds.append(decode_predictions(ex.sentence, tag_ids, tag_vocab))
            golds.append(list(ex.sentence.gold_spans))
            if not baseline and out.denoise_probs is not None and ms.denoise_labels:
                picked = out.denoise_probs.values > model.config.hard_threshold
                dn_hits += int((picked == np.asarray(ms.denoise_labels)).sum())
                dn_total += len(ms.denoise_labels)
    p, r, f, per_cat = span_prf(preds, golds)
    return EvalReport(
        span_precision=p,
        span_recall=r,
        span_f1=f,
        denoise_accuracy=dn_hits / dn_total if dn_total else 1.0,
        per_category_f1={tag_vocab.category_name(c): v for c, v in sorted(per_cat.items())},
    )


def train(
    model: LexTagModel,
    train_examples: Sequence[TrainExample],
    dev_examples: Sequence[TrainExample],
    tag_vocab: TagVocabulary,
    config: TrainConfig,
    checkpoint_path=None,
    checkpoint_extras: Optional[dict] = None,
    log: Optional[Callable[[str], None]] = None,
) -> tuple[list[EvalReport], list[str]]:
    """Run the joint objective to convergence; restores the best-dev weights.

    Returns per-epoch dev reports and metrics-log lines (header included).
    Deterministic for a fixed (seed, corpus, config) triple.
    """
    lam = (
        config.loss_weight_denoise
        if config.loss_weight_denoise is not None
        else model.config.loss_weight_denoise
    )
    order_rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 17)
    params = model.named_parameters()
    steps_per_epoch = max(1, math.ceil(len(train_examples) / config.batch_size))
    optimizer = Adam(params, config, total_steps=config.epochs * steps_per_epoch)

    lines = [METRICS_HEADER]
    reports: list[EvalReport] = []
    best_f1 = -1.0
    best_values: dict[str, np.ndarray] = {k: t.values.copy() for k, t in params.items()}
    best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        order = order_rng.permutation(len(train_examples))
        tag_loss_sum = dn_loss_sum = 0.0
        dn_hits = dn_total = dn_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_examples[i] for i in order[start : start + config.batch_size]]
            optimizer.zero_grad()
            inv = 1.0 / len(batch)
            for ex in batch:
                force = None
                if config.teacher_forcing and ex.match_set.denoise_labels is not None:
                    force = ex.match_set.denoise_labels
                out = model.forward(
                    ex.sentence.subword_ids,
                    ex.match_set,
                    training=True,
                    rng=dropout_rng,
                    force_selection=force,
                )
                gold = (
                    ex.sentence.gold_tags
                    if model.config.use_first
                    else ex.sentence.match_tags
                )
                tag_term = _tagger_loss(out, gold, model.config.sigmoid_tagger)
                loss = tag_term
                if out.denoise_probs is not None and ex.match_set.denoise_labels:
                    y = np.asarray(ex.match_set.denoise_labels, dtype=float)
                    dn_term = T.binary_cross_entropy(out.denoise_probs, y)
                    loss = T.add(loss, T.scale(dn_term, lam))
                    dn_loss_sum += dn_term.item()
                    dn_batches += 1
                    picked = out.denoise_probs.values > model.config.hard_threshold
                    dn_hits += int((picked == y.astype(bool)).sum())
                    dn_total += y.size
                tag_loss_sum += tag_term.item()
                T.scale(loss, inv).backward()
            optimizer.step()

        report = evaluate(model, dev_examples, tag_vocab)
        reports.append(report)
        tag_loss = tag_loss_sum / len(train_examples)
        dn_loss = dn_loss_sum / dn_batches if dn_batches else 0.0
        dn_acc = dn_hits / dn_total if dn_total else 1.0
        line = (
            f"{epoch}\t{tag_loss:.4f}\t{dn_loss:.4f}\t{dn_acc:.4f}"
            f"\t{report.span_precision:.4f}\t{report.span_recall:.4f}\t{report.span_f1:.4f}"
        )
        lines.append(line)
        if log:
            log(line)
        if report.span_f1 >= best_f1:
            # Ties keep the later weights: auxiliary heads keep sharpening
            # after dev span F1 plateaus.  Only strict gains reset patience.
            if report.span_f1 > best_f1:
                best_epoch = epoch
            best_f1 = report.span_f1
            best_values = {k: t.values.copy() for k, t in params.items()}
        elif epoch - best_epoch >= config.patience:
            logger.info("early stop at epoch %d (best dev F1 %.4f)", epoch, best_f1)
            break

    for k, t in params.items():
        t.values = best_values[k]
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, extras=checkpoint_extras)
    return reports, lines
