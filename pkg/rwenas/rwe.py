"""
Random-Weight Evaluation.

An architecture is scored by decoding it, initializing the backbone with frozen
random weights, pooling features for the training and validation splits, training
an ensemble of linear softmax classifiers on those features (each member sees all
but one fold of the training rows) and measuring the ensemble's top-1 validation
error. Nothing but the classifiers is ever trained.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import RweConfig, ScaleConfig
from .dataio import ImageDataset
from .errors import EvaluationError, RwenasError
from .genome import Genome
from .items import EvalReport
from .netgraph import NetGraph, count_flops, count_params, decode
from .seeds import derive_seed, split_seed
from .tensor import WeightSet, forward, init_weights

logger = logging.getLogger(__name__)


@dataclass
class LinearClassifier:
    weight: np.ndarray                   # (feature_dim, num_classes)
    bias: np.ndarray                     # (num_classes,)
    losses: List[float] = field(default_factory=list)   # mean training loss per epoch
    degenerate: bool = False

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weight + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(features))

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(features), axis=1)

    def error(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.predict(features) != labels))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * step / total_steps))


def fold_masks(n: int, folds: int, seed: int) -> List[np.ndarray]:
    """Boolean training masks; mask ``k`` leaves out fold ``k``. One fold means no hold-out."""
    if folds == 1:
        return [np.ones(n, dtype=bool)]
    order = np.random.default_rng(seed).permutation(n)
    masks = []
    for held_out in np.array_split(order, folds):
        mask = np.ones(n, dtype=bool)
        mask[held_out] = False
        masks.append(mask)
    return masks


def train_classifier(features: np.ndarray, labels: np.ndarray, fold_mask: np.ndarray, cfg: RweConfig,
                     num_classes: Optional[int] = None, seed: Optional[int] = None) -> LinearClassifier:
    """Softmax regression by SGD with momentum and a per-step cosine schedule to zero."""
    rows = np.flatnonzero(fold_mask)
    if rows.size == 0:
        raise RwenasError('fold mask selects no training rows')
    x = np.asarray(features, dtype=np.float64)[rows]
    y = np.asarray(labels, dtype=np.int64)[rows]
    k = int(num_classes if num_classes is not None else labels.max() + 1)
    d = x.shape[1]
    rng = np.random.default_rng(cfg.seed if seed is None else seed)

    bound = 1.0 / math.sqrt(d) if d else 0.0
    weight = rng.uniform(-bound, bound, size=(d, k))
    bias = rng.uniform(-bound, bound, size=k)
    v_weight = np.zeros_like(weight)
    v_bias = np.zeros_like(bias)

    degenerate = np.unique(y).size < 2
    if degenerate:
        logger.warning(f"Classifier training fold contains a single class ({int(y[0])})")

    onehot = np.eye(k)[y]
    m = len(rows)
    steps_per_epoch = -(-m // cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    step = 0
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        epoch_loss = 0.0
        for start in range(0, m, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb = x[batch]
            probs = softmax(xb @ weight + bias)
            epoch_loss += float(-np.log(np.maximum(probs[np.arange(len(batch)), y[batch]], 1e-12)).sum())
            grad = (probs - onehot[batch]) / len(batch)
            lr = cosine_lr(cfg.lr, step, total)
            v_weight = cfg.momentum * v_weight + xb.T @ grad
            v_bias = cfg.momentum * v_bias + grad.sum(axis=0)
            weight -= lr * v_weight
            bias -= lr * v_bias
            step += 1
        losses.append(epoch_loss / m)
    return LinearClassifier(weight, bias, losses, degenerate)


def _norm_batches(images: np.ndarray, idx: np.ndarray, loader_batch: int,
                  norm_batch: int) -> Iterator[np.ndarray]:
    """Regroup loader-sized reads into consecutive blocks of exactly ``norm_batch`` rows."""
    pending: List[np.ndarray] = []
    count = 0
    for start in range(0, len(idx), loader_batch):
        chunk = images[idx[start:start + loader_batch]]
        pending.append(chunk)
        count += len(chunk)
        while count >= norm_batch:
            block = np.concatenate(pending)
            yield block[:norm_batch]
            rest = block[norm_batch:]
            pending = [rest] if len(rest) else []
            count = len(rest)
    if count:
        yield np.concatenate(pending)


def extract_features(net: NetGraph, weights: WeightSet, data: ImageDataset, idx: np.ndarray,
                     cfg: Optional[RweConfig] = None,
                     stats: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Pooled backbone features and labels for the rows ``idx`` of ``data``.

    Images are standardized with the training-split channel statistics. Forward
    passes run over fixed blocks of ``cfg.norm_batch`` rows, so the features do not
    depend on ``cfg.loader_batch``.
    """
    cfg = cfg or RweConfig()
    stats = stats if stats is not None else data.channel_stats()
    idx = np.asarray(idx)
    blocks = []
    for block in _norm_batches(data.images, idx, cfg.loader_batch, cfg.norm_batch):
        out = forward(net, weights, data.standardize(block, stats))
        blocks.append(out.reshape(len(block), -1))
    features = np.concatenate(blocks) if blocks else np.zeros((0, net.feature_dim), dtype=np.float32)
    return features, data.labels[idx]


def scale_for(data: ImageDataset, scale: ScaleConfig) -> ScaleConfig:
    """Match the scale's input and class count to the dataset."""
    c, h, _ = data.image_shape
    return scale.model_copy(update={'in_channels': c, 'resolution': h, 'num_classes': data.num_classes})


def _standardize_columns(train: np.ndarray, *others: np.ndarray) -> List[np.ndarray]:
    mean = train.mean(axis=0, dtype=np.float64)
    std = train.std(axis=0, dtype=np.float64)
    std[std < 1e-8] = 1.0
    return [(a - mean) / std for a in (train,) + others]


def evaluate_rwe(genome: Genome, scale: ScaleConfig, data: ImageDataset, cfg: RweConfig,
                 seed: Optional[int] = None) -> EvalReport:
    """Score ``genome``; the result is a pure function of its arguments."""
    started = time.perf_counter()
    seed = cfg.seed if seed is None else seed
    backbone_seed, classifier_seed = split_seed(seed)
    try:
        net = decode(genome, scale_for(data, scale))
        weights = init_weights(net, backbone_seed, cfg.init_scheme)
        frozen = weights.fingerprint()

        stats = data.channel_stats()
        train_x, train_y = extract_features(net, weights, data, data.train_idx, cfg, stats)
        valid_x, valid_y = extract_features(net, weights, data, data.valid_idx, cfg, stats)
        if cfg.standardize_features:
            train_x, valid_x = _standardize_columns(train_x, valid_x)

        probs = np.zeros((len(valid_y), data.num_classes))
        fold_errors = []
        degenerate = False
        for k, mask in enumerate(fold_masks(len(train_y), cfg.folds, classifier_seed)):
            clf = train_classifier(train_x, train_y, mask, cfg, data.num_classes,
                                   seed=derive_seed(classifier_seed, 'fold', k))
            fold_probs = clf.predict_proba(valid_x)
            fold_errors.append(float(np.mean(np.argmax(fold_probs, axis=1) != valid_y)))
            probs += fold_probs
            degenerate = degenerate or clf.degenerate
        probs /= cfg.folds
        rwe_error = float(np.mean(np.argmax(probs, axis=1) != valid_y))

        if weights.fingerprint() != frozen:
            raise RwenasError('backbone weights changed during evaluation')
    except RwenasError as e:
        raise EvaluationError(genome.to_string(), e) from e

    if rwe_error > max(fold_errors) + 0.05:
        logger.info(f"Ensemble error {rwe_error:.3f} exceeds worst member {max(fold_errors):.3f} for {genome}")
    flops = count_flops(net)
    report = EvalReport(
        genome=genome.to_string(),
        rwe_error=rwe_error,
        flops=flops,
        flops_m=flops / 1e6,
        params=count_params(net),
        feature_dim=net.feature_dim,
        fold_errors=fold_errors,
        seed=seed,
        backbone_seed=backbone_seed,
        classifier_seed=classifier_seed,
        init_scheme=cfg.init_scheme,
        degenerate=degenerate,
        wall_seconds=time.perf_counter() - started,
    )
    logger.info(f"RWE {genome}: error={rwe_error:.4f} flops={report.flops_m:.2f}M "
                f"({report.wall_seconds:.1f}s)")
    return report


def seed_variance(genome: Genome, scale: ScaleConfig, data: ImageDataset, cfg: RweConfig,
                  seeds: Sequence[int]) -> Tuple[float, float]:
    """Mean and std of the RWE error of ``genome`` over several evaluation seeds."""
    errors = [evaluate_rwe(genome, scale, data, cfg, seed=s).rwe_error for s in seeds]
    return float(np.mean(errors)), float(np.std(errors))
