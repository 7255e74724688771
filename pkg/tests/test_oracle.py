import logging

import numpy as np
import pytest

from rwenas.bench import load_table, spearman
from rwenas.config import OracleConfig, RweConfig
from rwenas.dataio import synth_blobs
from rwenas.errors import EvaluationError
from rwenas.netgraph import decode
from rwenas.oracle import build_oracle_table, init_head, loss_and_grads, sample_genomes, train_network
from rwenas.rwe import evaluate_rwe, scale_for
from rwenas.tensor import init_weights, kernels
from rwenas.tensor.backward import (avg_pool3x3_backward, batch_norm_backward, conv2d_backward,
                                    factorized_reduce_backward, global_avg_pool_backward,
                                    max_pool3x3_backward, relu_backward)

logger = logging.getLogger(__name__)


def inner(a, b):
    return float(np.sum(np.asarray(a, dtype=np.float64) * np.asarray(b, dtype=np.float64)))


# kernel gradients: linear ops satisfy <op(x), g> == <x, dx>

@pytest.mark.parametrize('stride, padding, dilation, groups', [
    (1, 1, 1, 1), (2, 1, 1, 1), (1, 2, 2, 6), (2, 2, 1, 6), (1, 0, 1, 3), (2, 4, 2, 6),
])
def test_conv_gradients_are_adjoint(rng, stride, padding, dilation, groups):
    x = rng.normal(size=(2, 6, 9, 9)).astype(np.float32)
    w = rng.normal(size=(6, 6 // groups, 3, 3)).astype(np.float32)
    out = kernels.conv2d(x, w, stride, padding, dilation, groups, precise=True)
    g = rng.normal(size=out.shape)
    dx, dw = conv2d_backward(x, w, g, stride, padding, dilation, groups)
    assert dx.shape == x.shape and dw.shape == w.shape
    assert inner(out, g) == pytest.approx(inner(x, dx), rel=1e-4, abs=1e-3)
    assert inner(out, g) == pytest.approx(inner(w, dw), rel=1e-4, abs=1e-3)


@pytest.mark.parametrize('stride', [1, 2])
def test_pool_gradients_are_adjoint(rng, stride):
    x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
    avg = kernels.avg_pool3x3(x, stride)
    g = rng.normal(size=avg.shape)
    assert inner(avg, g) == pytest.approx(inner(x, avg_pool3x3_backward(x, g, stride)), rel=1e-4, abs=1e-4)
    # max pooling selects one input per window, so it is linear around x
    peak = kernels.max_pool3x3(x, stride)
    dx = max_pool3x3_backward(x, peak, g, stride)
    assert inner(peak, g) == pytest.approx(inner(x, dx), rel=1e-4, abs=1e-4)
    assert np.sum(dx) == pytest.approx(np.sum(g))


def test_relu_and_gap_gradients(rng):
    x = rng.normal(size=(2, 3, 4, 4)).astype(np.float32)
    g = rng.normal(size=x.shape)
    assert inner(kernels.relu(x), g) == pytest.approx(inner(x, relu_backward(x, g)), rel=1e-4, abs=1e-4)
    pooled = kernels.global_avg_pool(x)
    gp = rng.normal(size=pooled.shape)
    assert inner(pooled, gp) == pytest.approx(inner(x, global_avg_pool_backward(x, gp)), rel=1e-4, abs=1e-4)


def test_factorized_reduce_gradients(rng):
    x = rng.normal(size=(2, 4, 8, 8)).astype(np.float32)
    wa = rng.normal(size=(3, 4, 1, 1)).astype(np.float32)
    wb = rng.normal(size=(3, 4, 1, 1)).astype(np.float32)
    out = kernels.factorized_reduce(x, wa, wb)
    g = rng.normal(size=out.shape)
    dx, dwa, dwb = factorized_reduce_backward(x, wa, wb, g)
    assert inner(out, g) == pytest.approx(inner(x, dx), rel=1e-4, abs=1e-3)
    assert inner(out, g) == pytest.approx(inner(wa, dwa) + inner(wb, dwb), rel=1e-4, abs=1e-3)


def test_batch_norm_gradients(rng):
    x = (3.0 + 2.0 * rng.normal(size=(4, 3, 5, 5))).astype(np.float32)
    gamma = rng.uniform(0.5, 1.5, size=3).astype(np.float32)
    beta = rng.normal(size=3).astype(np.float32)
    out = kernels.batch_norm(x, gamma, beta)
    g = rng.normal(size=out.shape)
    dx, d_gamma, d_beta = batch_norm_backward(x, gamma, g)
    # the output is affine in (gamma, beta) and unchanged by shifting or scaling a channel
    assert inner(out, g) == pytest.approx(inner(gamma, d_gamma) + inner(beta, d_beta), rel=1e-4, abs=1e-3)
    assert np.allclose(dx.sum(axis=(0, 2, 3)), 0.0, atol=1e-6)
    centered = x - x.mean(axis=(0, 2, 3), keepdims=True)
    assert np.allclose((dx * centered).sum(axis=(0, 2, 3)), 0.0, atol=1e-3)


# whole-network gradients

def tiny_batch(data, n=16):
    rows = data.train_idx[:n]
    return data.standardize(data.images[rows]), data.labels[rows]


def trainable(net, seed=0):
    return {node_id: {name: np.array(arr) for name, arr in p.items()}
            for node_id, p in init_weights(net, seed).params.items()}


@pytest.mark.parametrize('genome_fixture', ['micro_genome', 'macro_genome'])
def test_network_gradients_match_finite_differences(request, genome_fixture, tiny_scale, tiny_data):
    genome = request.getfixturevalue(genome_fixture)
    net = decode(genome, scale_for(tiny_data, tiny_scale))
    params = trainable(net)
    head = init_head(net.feature_dim, tiny_data.num_classes, np.random.default_rng(0))
    x, y = tiny_batch(tiny_data)
    _, grads, head_grads = loss_and_grads(net, params, head, x, y)

    norms = sorted(((float(np.linalg.norm(g)), node_id, name) for node_id, node in grads.items()
                    for name, g in node.items()), reverse=True)
    assert {net.nodes[node_id].op for _, node_id, _ in norms} >= {'conv', 'bn'}
    eps = 1e-2
    for norm, node_id, name in norms[:4]:
        direction = grads[node_id][name] / norm

        def loss_at(step):
            shifted = {k: dict(v) for k, v in params.items()}
            shifted[node_id][name] = (params[node_id][name] + step * direction).astype(np.float32)
            return loss_and_grads(net, shifted, head, x, y)[0]

        numeric = (loss_at(eps) - loss_at(-eps)) / (2 * eps)
        assert numeric == pytest.approx(norm, rel=0.05), f"node {node_id} ({net.nodes[node_id].op}) {name}"

    weight_norm = float(np.linalg.norm(head_grads['weight']))
    original = head.weight.copy()
    losses = []
    for step in (eps, -eps):
        head.weight = original + step * head_grads['weight'] / weight_norm
        losses.append(loss_and_grads(net, params, head, x, y)[0])
    head.weight = original
    assert (losses[0] - losses[1]) / (2 * eps) == pytest.approx(weight_norm, rel=0.05)


def test_gradients_leave_frozen_weights_alone(micro_genome, tiny_scale, tiny_data):
    net = decode(micro_genome, scale_for(tiny_data, tiny_scale))
    weights = init_weights(net, 0)
    fingerprint = weights.fingerprint()
    x, y = tiny_batch(tiny_data)
    head = init_head(net.feature_dim, tiny_data.num_classes, np.random.default_rng(0))
    loss_and_grads(net, weights.params, head, x, y)
    assert weights.fingerprint() == fingerprint


# training

def quick_oracle(**overrides):
    return OracleConfig(**{'epochs': 6, 'batch_size': 32, 'lr': 0.05, **overrides})


def test_training_lowers_the_loss(micro_genome, tiny_scale, tiny_data):
    trained = train_network(micro_genome, tiny_scale, tiny_data, quick_oracle(), seed=0)
    assert trained.genome == micro_genome.to_string()
    assert len(trained.losses) == 6
    assert trained.losses[-1] < trained.losses[0]
    assert trained.accuracy > 1.0 / tiny_data.num_classes


def test_training_is_deterministic(macro_genome, tiny_scale, tiny_data):
    a = train_network(macro_genome, tiny_scale, tiny_data, quick_oracle(epochs=2), seed=4)
    b = train_network(macro_genome, tiny_scale, tiny_data, quick_oracle(epochs=2), seed=4)
    assert (a.accuracy, a.losses) == (b.accuracy, b.losses)


def test_diverging_training_fails(micro_genome, tiny_scale, tiny_data):
    with pytest.raises(EvaluationError):
        train_network(micro_genome, tiny_scale, tiny_data,
                      quick_oracle(epochs=2, lr=1e300, grad_clip=None, momentum=0.0), seed=0)


def test_sample_genomes_are_distinct(compat_spec):
    genomes = sample_genomes(compat_spec, 12, seed=3)
    assert len({g.to_string() for g in genomes}) == 12
    assert all(not compat_spec.violations(g) for g in genomes)
    assert genomes == sample_genomes(compat_spec, 12, seed=3)


def test_oracle_table_exports_and_reloads(tmp_path, compat_spec, tiny_scale, tiny_data):
    genomes = sample_genomes(compat_spec, 3, seed=0)
    seen = []
    table = build_oracle_table(genomes, tiny_scale, tiny_data, quick_oracle(epochs=1), seed=0,
                               on_trained=seen.append)
    assert len(table) == 3 and [t.genome for t in seen] == [g.to_string() for g in genomes]
    reloaded = load_table(table.export(tmp_path / 'oracle.csv'))
    assert dict(reloaded.entries) == pytest.approx(dict(table.entries))
    assert all(0.0 <= acc <= 1.0 for acc in reloaded.entries.values())


@pytest.mark.slow
def test_rwe_ranks_networks_like_full_training(compat_spec, tiny_scale):
    data = synth_blobs(classes=4, n=800, resolution=8, seed=5, noise=1.0)
    genomes = sample_genomes(compat_spec, 20, seed=0)
    table = build_oracle_table(genomes, tiny_scale, data, OracleConfig(epochs=15, batch_size=64), seed=0)
    assert len(table) == 20
    accuracies = [table.accuracy(g) for g in genomes]
    rhos = []
    for seed in range(5):
        cfg = RweConfig(epochs=20, batch_size=64, folds=5, norm_batch=128, loader_batch=64, seed=seed)
        scores = [-evaluate_rwe(g, tiny_scale, data, cfg, seed=seed).rwe_error for g in genomes]
        rhos.append(spearman(scores, accuracies))
    rho = float(np.mean(rhos))
    logger.warning(f"Spearman(RWE, trained accuracy) over 5 seeds: {rho:.3f} (per seed {np.round(rhos, 3)})")
    assert rho >= 0.5
