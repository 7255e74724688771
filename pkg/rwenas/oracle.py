"""
Reference accuracies from fully trained networks.

A decoded network is trained end to end, backbone and linear softmax head
together, with SGD with momentum, weight decay and a per-step cosine schedule.
The forward pass runs the same kernels the random-weight evaluation uses and
gradients come from ``rwenas.tensor.backward``. Normalization always uses the
statistics of the current batch, during validation too.

The trained validation accuracies of a set of genomes form a ``genome,accuracy``
table that the estimators can be correlated against.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bench import BenchmarkTable
from .config import OracleConfig, ScaleConfig
from .dataio import ImageDataset
from .errors import EvaluationError, RwenasError
from .genome import Genome, SearchSpaceSpec, sample_random
from .netgraph import NetGraph, decode
from .rwe import LinearClassifier, cosine_lr, scale_for, softmax
from .seeds import derive_seed
from .tensor import WeightSet, activations, backward, init_weights
from .tensor.kernels import DTYPE

logger = logging.getLogger(__name__)

Params = Dict[int, Dict[str, np.ndarray]]


@dataclass
class TrainedNetwork:
    genome: str
    accuracy: float
    losses: List[float] = field(default_factory=list)   # mean training loss per epoch
    wall_seconds: float = 0.0


def _trainable(weights: WeightSet) -> Params:
    return {node_id: {name: np.array(arr, dtype=DTYPE) for name, arr in p.items()}
            for node_id, p in weights.params.items()}


def init_head(feature_dim: int, num_classes: int, rng: np.random.Generator) -> LinearClassifier:
    bound = 1.0 / math.sqrt(feature_dim)
    return LinearClassifier(rng.uniform(-bound, bound, size=(feature_dim, num_classes)),
                            rng.uniform(-bound, bound, size=num_classes))


def loss_and_grads(net: NetGraph, params: Params, head: LinearClassifier, images: np.ndarray,
                   labels: np.ndarray) -> Tuple[float, Params, Dict[str, np.ndarray]]:
    """Mean cross-entropy of one batch with its backbone and head gradients."""
    values = activations(net, WeightSet(params, seed=0), images)
    pooled = values[net.output]
    features = pooled.reshape(len(images), -1).astype(np.float64)
    probs = softmax(head.logits(features))
    rows = np.arange(len(labels))
    loss = float(-np.log(np.maximum(probs[rows, labels], 1e-12)).mean())

    d_logits = probs
    d_logits[rows, labels] -= 1.0
    d_logits /= len(labels)
    head_grads = {'weight': features.T @ d_logits, 'bias': d_logits.sum(axis=0)}
    d_pooled = (d_logits @ head.weight.T).reshape(pooled.shape)
    return loss, backward(net, params, values, d_pooled), head_grads


def _clip(grads: Params, head_grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> None:
    if max_norm is None:
        return
    arrays = [g for node in grads.values() for g in node.values()] + list(head_grads.values())
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in arrays))
    if norm > max_norm:
        for g in arrays:
            g *= max_norm / norm


def _batches(n: int, batch_size: int, order: np.ndarray) -> List[np.ndarray]:
    # near-equal batches, so normalization never sees a single row
    return np.array_split(order, max(1, -(-n // batch_size)))


def predict(net: NetGraph, params: Params, head: LinearClassifier, images: np.ndarray,
            batch_size: int) -> np.ndarray:
    weights = WeightSet(params, seed=0)
    preds = []
    for block in _batches(len(images), batch_size, np.arange(len(images))):
        pooled = activations(net, weights, images[block])[net.output]
        preds.append(head.predict(pooled.reshape(len(block), -1).astype(np.float64)))
    return np.concatenate(preds)


def train_network(genome: Genome, scale: ScaleConfig, data: ImageDataset, cfg: OracleConfig,
                  seed: int = 0) -> TrainedNetwork:
    """Train ``genome`` from scratch and report its validation accuracy."""
    started = time.perf_counter()
    rng = np.random.default_rng(derive_seed(seed, 'oracle', 'batches'))
    try:
        net = decode(genome, scale_for(data, scale))
        params = _trainable(init_weights(net, derive_seed(seed, 'oracle', 'init'), cfg.init_scheme))
        head = init_head(net.feature_dim, data.num_classes, rng)

        stats = data.channel_stats()
        train_x = data.standardize(data.images[data.train_idx], stats)
        train_y = data.labels[data.train_idx]
        valid_x = data.standardize(data.images[data.valid_idx], stats)
        valid_y = data.labels[data.valid_idx]

        velocity = {node_id: {name: np.zeros(arr.shape) for name, arr in p.items()}
                    for node_id, p in params.items()}
        head_velocity = {'weight': np.zeros_like(head.weight), 'bias': np.zeros_like(head.bias)}
        steps_per_epoch = len(_batches(len(train_y), cfg.batch_size, np.arange(len(train_y))))
        total = cfg.epochs * steps_per_epoch
        step = 0
        for epoch in range(cfg.epochs):
            epoch_loss = 0.0
            for batch in _batches(len(train_y), cfg.batch_size, rng.permutation(len(train_y))):
                loss, grads, head_grads = loss_and_grads(net, params, head, train_x[batch], train_y[batch])
                if not math.isfinite(loss):
                    raise RwenasError(f"training loss diverged in epoch {epoch}")
                epoch_loss += loss * len(batch)
                _clip(grads, head_grads, cfg.grad_clip)
                lr = cosine_lr(cfg.lr, step, total)
                for node_id, node_grads in grads.items():
                    for name, g in node_grads.items():
                        p = params[node_id][name]
                        v = velocity[node_id][name]
                        v *= cfg.momentum
                        v += g + cfg.weight_decay * p
                        p -= (lr * v).astype(DTYPE)
                for name, g in head_grads.items():
                    p = getattr(head, name)
                    head_velocity[name] = cfg.momentum * head_velocity[name] + g + cfg.weight_decay * p
                    p -= lr * head_velocity[name]
                step += 1
            head.losses.append(epoch_loss / len(train_y))
            logger.debug(f"{genome} epoch {epoch}: loss {head.losses[-1]:.4f}")

        accuracy = float(np.mean(predict(net, params, head, valid_x, cfg.batch_size) == valid_y))
    except RwenasError as e:
        raise EvaluationError(genome.to_string(), e) from e

    trained = TrainedNetwork(genome.to_string(), accuracy, head.losses, time.perf_counter() - started)
    logger.info(f"Trained {genome}: accuracy={accuracy:.4f} ({trained.wall_seconds:.1f}s)")
    return trained


def sample_genomes(spec: SearchSpaceSpec, n: int, seed: int = 0) -> List[Genome]:
    """``n`` distinct random genomes of ``spec``."""
    rng = np.random.default_rng(derive_seed(seed, 'oracle', 'genomes'))
    genomes: Dict[str, Genome] = {}
    while len(genomes) < n:
        g = sample_random(spec, rng)
        genomes.setdefault(g.to_string(), g)
    return list(genomes.values())


def build_oracle_table(genomes: Sequence[Genome], scale: ScaleConfig, data: ImageDataset, cfg: OracleConfig,
                       seed: int = 0, compat_mode: bool = True,
                       on_trained: Optional[Callable[[TrainedNetwork], None]] = None) -> BenchmarkTable:
    """Train every genome and collect the validation accuracies; failed trainings are left out."""
    entries: Dict[str, float] = {}
    for genome in genomes:
        try:
            trained = train_network(genome, scale, data, cfg, seed=derive_seed(seed, genome.digest()))
        except EvaluationError as e:
            logger.warning(f"❌ {e}")
            continue
        entries[trained.genome] = trained.accuracy
        if on_trained:
            on_trained(trained)
    kind = genomes[0].kind if genomes else 'micro'
    return BenchmarkTable(entries, kind, compat_mode)
