import dataclasses
import json

import numpy as np
import pytest

from rwenas.config import ScaleConfig
from rwenas.errors import DecodeError
from rwenas.genome import Genome, SearchSpaceSpec, sample_random
from rwenas.netgraph import GraphBuilder, NetGraph, count_flops, count_params, decode, node_flops, validate


def loop_macs(node):
    """Multiply-accumulates counted one output position at a time."""
    if node.op == 'conv':
        per_position = node.kernel * node.kernel * (node.c_in // node.groups) * node.c_out
    elif node.op == 'factorized_reduce':
        per_position = node.c_in * node.c_out
    elif node.op == 'linear':
        per_position = node.c_in * node.c_out
    else:
        return 0
    total = 0
    for _ in range(node.h_out):
        for _ in range(node.w_out):
            total += per_position
    return total


def single_node(op_builder):
    b = GraphBuilder()
    x = b.input(16, 32, 32)
    return b.nodes[op_builder(b, x)]


def test_conv_3x3_flops():
    node = single_node(lambda b, x: b.conv(x, 16, 3))
    assert node_flops(node) == loop_macs(node) == 2_359_296


def test_depthwise_conv_flops():
    node = single_node(lambda b, x: b.conv(x, 16, 3, groups=16))
    assert node_flops(node) == loop_macs(node) == 147_456


def test_identity_edge_adds_nothing():
    b = GraphBuilder()
    x = b.input(16, 32, 32)
    assert b.edge('identity', x, 16, 1) == x
    assert len(b.nodes) == 1


@pytest.mark.parametrize('op', ['max_pool_3x3', 'avg_pool_3x3', 'zero'])
def test_parameter_free_edges_cost_nothing(op):
    b = GraphBuilder()
    x = b.input(16, 32, 32)
    b.edge(op, x, 16, 1)
    assert sum(node_flops(n) for n in b.nodes) == 0


def test_every_op_matches_loop_oracle():
    b = GraphBuilder()
    x = b.input(8, 16, 16)
    for op in ['sep_conv_3x3', 'sep_conv_5x5', 'dil_conv_3x3', 'dil_conv_5x5']:
        b.edge(op, x, 8, 1)
        b.edge(op, x, 8, 2)
    b.factorized_reduce(x, 16)
    b.linear(b.gap(x), 10)
    for node in b.nodes:
        assert node_flops(node) == loop_macs(node), node


def test_random_graphs_match_loop_oracle(tiny_scale):
    rng = np.random.default_rng(0)
    for spec in (SearchSpaceSpec.micro(), SearchSpaceSpec.macro()):
        for _ in range(50):
            net = decode(sample_random(spec, rng), tiny_scale)
            assert count_flops(net) == sum(loop_macs(n) for n in net.nodes)


def test_reduction_cells_at_one_and_three(micro_genome):
    net = decode(micro_genome, ScaleConfig(layers=5))
    outputs = {}
    for n in net.nodes:
        if n.scope.startswith('cell'):
            outputs[int(n.scope[4:])] = n
    assert [outputs[i].h_out for i in range(5)] == [32, 16, 16, 8, 8]
    assert [outputs[i].c_out for i in range(5)] == [40, 80, 80, 160, 160]
    reduced = sorted({int(n.scope[4:]) for n in net.nodes
                      if n.scope.startswith('cell') and n.reduction and n.op != 'factorized_reduce'})
    assert reduced == [1, 3]


def test_search_scale_defaults(micro_genome, macro_genome):
    micro = decode(micro_genome)
    assert [n.c_out for n in micro.stem if n.op == 'conv'] == [30]
    assert micro.feature_dim == 4 * 40
    macro = decode(macro_genome)
    assert [n.c_out for n in macro.stem if n.op == 'conv'] == [32]
    assert macro.feature_dim == 128


def test_all_zero_macro_phase_is_single_conv():
    genes = [0] * 15 + [1] * 30
    net = decode(Genome('macro', tuple(genes)))
    phase0 = [n for n in net.nodes if n.scope == 'phase0']
    assert [n.op for n in phase0] == ['conv', 'bn', 'relu']
    assert validate(net) == []


def test_macro_phases_are_separated_by_reductions(macro_genome):
    net = decode(macro_genome)
    for p, size in ((0, 32), (1, 16), (2, 8)):
        assert {n.h_out for n in net.nodes if n.scope == f'phase{p}'} == {size}


def test_decode_error_names_gene():
    genes = [0, 1, 1, 1] * 8
    genes[5] = 12
    with pytest.raises(DecodeError) as info:
        decode(Genome('micro', tuple(genes)))
    assert info.value.gene == 5


def test_vector_genomes_do_not_decode():
    with pytest.raises(DecodeError):
        decode(Genome('vector', (1, 2)))


def test_decoded_graphs_are_valid():
    rng = np.random.default_rng(7)
    for spec in (SearchSpaceSpec.micro(), SearchSpaceSpec.macro()):
        for _ in range(300):
            g = sample_random(spec, rng)
            assert validate(decode(g)) == [], g


def test_conv_bn_relu_order_is_valid(micro_genome):
    net = decode(micro_genome, ScaleConfig(op_order='conv_bn_relu'))
    assert validate(net) == []


def test_cycle_is_reported(micro_genome):
    net = decode(micro_genome)
    nodes = list(net.nodes)
    nodes[1] = dataclasses.replace(nodes[1], inputs=(5,))
    broken = dataclasses.replace(net, nodes=tuple(nodes))
    violations = validate(broken)
    assert any('cycle' in v for v in violations)


def test_channel_mismatch_is_reported(micro_genome):
    net = decode(micro_genome)
    nodes = list(net.nodes)
    conv = next(n for n in nodes if n.op == 'conv' and n.groups == 1 and n.id > 2)
    nodes[conv.id] = dataclasses.replace(conv, c_in=conv.c_in + 1)
    assert validate(dataclasses.replace(net, nodes=tuple(nodes)))


def test_decode_is_deterministic(micro_genome):
    assert decode(micro_genome) == decode(micro_genome)


def test_doubling_channels_scales_conv_macs(micro_genome, macro_genome):
    for genome, small, large in (
        (micro_genome, ScaleConfig(init_channels=4), ScaleConfig(init_channels=8)),
        (macro_genome, ScaleConfig(phase_channels=[4, 8, 16]), ScaleConfig(phase_channels=[8, 16, 32])),
    ):
        a, b = decode(genome, small), decode(genome, large)
        assert [n.op for n in a.nodes] == [n.op for n in b.nodes]
        for x, y in zip(a.nodes, b.nodes):
            if x.op == 'conv':
                assert node_flops(y) / node_flops(x) in (2, 4)


def test_param_count_of_single_conv():
    b = GraphBuilder()
    x = b.input(16, 8, 8)
    b.bn(b.conv(x, 32, 3))
    net = NetGraph(tuple(b.nodes), output=0)
    assert count_params(net) == 3 * 3 * 16 * 32 + 2 * 32


def test_graph_json_dump(micro_genome):
    net = decode(micro_genome)
    dumped = json.loads(net.to_json())
    assert dumped['genome'] == micro_genome.to_string()
    assert len(dumped['nodes']) == len(net.nodes)
    assert dumped['feature_dim'] == net.feature_dim
