"""
Decode genomes into concrete CNN computation graphs and count their cost.

A ``NetGraph`` is a flat, topologically ordered list of primitive layer nodes
(conv, bn, relu, pools, factorized reduce, zero, add, concat, gap, linear), each
annotated with its channel and spatial shape. The tensor engine executes the nodes
in order; the FLOPs and parameter counters read the annotations only.

FLOPs follow the multiply-accumulate convention: one multiply-add counts once, and
only conv, factorized-reduce and linear nodes contribute.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import settings
from .config import ScaleConfig
from .errors import DecodeError
from .genome import OPS, Genome, SearchSpaceSpec, phase_edges

logger = logging.getLogger(__name__)

STRIDED_OPS = ('conv', 'max_pool', 'avg_pool', 'factorized_reduce', 'zero')


@dataclass(frozen=True)
class LayerNode:
    id: int
    op: str
    inputs: Tuple[int, ...]
    c_in: int
    c_out: int
    h_in: int
    w_in: int
    h_out: int
    w_out: int
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    groups: int = 1
    reduction: bool = False
    scope: str = ''


@dataclass(frozen=True)
class NetGraph:
    nodes: Tuple[LayerNode, ...]
    output: int                  # global-average-pool node, the feature output
    head: Optional[int] = None   # linear classifier node (cost accounting only)
    kind: str = 'micro'
    genome: str = ''
    scale: Dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return self.nodes[self.output].c_out

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        first = self.nodes[0]
        return first.c_out, first.h_out, first.w_out

    @property
    def stem(self) -> List[LayerNode]:
        return [n for n in self.nodes if n.scope == 'stem']

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind,
            'genome': self.genome,
            'scale': self.scale,
            'output': self.output,
            'head': self.head,
            'feature_dim': self.feature_dim,
            'nodes': [asdict(n) for n in self.nodes],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def conv_out(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


class GraphBuilder:
    """Appends primitive nodes and keeps their shape annotations consistent."""

    def __init__(self, order: str = settings.OP_ORDER):
        self.nodes: List[LayerNode] = []
        self.order = order
        self.scope = ''
        self.reduction = False

    def _add(self, op: str, inputs: Sequence[int], c_in: int, c_out: int, h_out: int, w_out: int,
             **kwargs) -> int:
        first = self.nodes[inputs[0]] if inputs else None
        node = LayerNode(
            id=len(self.nodes),
            op=op,
            inputs=tuple(inputs),
            c_in=c_in,
            c_out=c_out,
            h_in=first.h_out if first else h_out,
            w_in=first.w_out if first else w_out,
            h_out=h_out,
            w_out=w_out,
            reduction=self.reduction and kwargs.get('stride', 1) != 1,
            scope=self.scope,
            **kwargs,
        )
        self.nodes.append(node)
        return node.id

    def shape(self, x: int) -> Tuple[int, int, int]:
        n = self.nodes[x]
        return n.c_out, n.h_out, n.w_out

    # Primitives

    def input(self, c: int, h: int, w: int) -> int:
        return self._add('input', (), c, c, h, w)

    def conv(self, x: int, c_out: int, kernel: int, stride: int = 1, padding: Optional[int] = None,
             dilation: int = 1, groups: int = 1) -> int:
        c, h, w = self.shape(x)
        if padding is None:
            padding = dilation * (kernel - 1) // 2
        return self._add('conv', (x,), c, c_out,
                         conv_out(h, kernel, stride, padding, dilation),
                         conv_out(w, kernel, stride, padding, dilation),
                         kernel=kernel, stride=stride, padding=padding, dilation=dilation, groups=groups)

    def bn(self, x: int) -> int:
        c, h, w = self.shape(x)
        return self._add('bn', (x,), c, c, h, w)

    def relu(self, x: int) -> int:
        c, h, w = self.shape(x)
        return self._add('relu', (x,), c, c, h, w)

    def pool(self, op: str, x: int, stride: int) -> int:
        c, h, w = self.shape(x)
        return self._add(op, (x,), c, c, conv_out(h, 3, stride, 1, 1), conv_out(w, 3, stride, 1, 1),
                         kernel=3, stride=stride, padding=1)

    def factorized_reduce(self, x: int, c_out: int) -> int:
        c, h, w = self.shape(x)
        return self._add('factorized_reduce', (x,), c, c_out, conv_out(h, 1, 2, 0, 1), conv_out(w, 1, 2, 0, 1),
                         stride=2)

    def zero(self, x: int, stride: int) -> int:
        c, h, w = self.shape(x)
        return self._add('zero', (x,), c, c, conv_out(h, 1, stride, 0, 1), conv_out(w, 1, stride, 0, 1),
                         stride=stride)

    def add(self, xs: Sequence[int]) -> int:
        c, h, w = self.shape(xs[0])
        return self._add('add', xs, c, c, h, w)

    def concat(self, xs: Sequence[int]) -> int:
        _, h, w = self.shape(xs[0])
        total = sum(self.nodes[x].c_out for x in xs)
        return self._add('concat', xs, total, total, h, w)

    def gap(self, x: int) -> int:
        c, _, _ = self.shape(x)
        return self._add('gap', (x,), c, c, 1, 1)

    def linear(self, x: int, c_out: int) -> int:
        c, _, _ = self.shape(x)
        return self._add('linear', (x,), c, c_out, 1, 1)

    # Composite units

    def unit(self, x: int, convs: Sequence[Dict]) -> int:
        """ReLU-Conv-BN (or Conv-BN-ReLU) around one or more convs."""
        if self.order == 'relu_conv_bn':
            x = self.relu(x)
        for spec in convs:
            x = self.conv(x, **spec)
        x = self.bn(x)
        if self.order == 'conv_bn_relu':
            x = self.relu(x)
        return x

    def reduce_unit(self, x: int, c_out: int) -> int:
        if self.order == 'relu_conv_bn':
            x = self.relu(x)
        x = self.bn(self.factorized_reduce(x, c_out))
        if self.order == 'conv_bn_relu':
            x = self.relu(x)
        return x

    def edge(self, op: str, x: int, c: int, stride: int) -> int:
        """One micro-cell edge carrying ``c`` channels."""
        if op == 'identity':
            return x if stride == 1 else self.reduce_unit(x, c)
        if op == 'zero':
            return self.zero(x, stride)
        if op in ('max_pool_3x3', 'avg_pool_3x3'):
            return self.pool(op[:8], x, stride)
        k = int(op[-1])
        if op.startswith('sep_conv'):
            x = self.unit(x, [dict(c_out=c, kernel=k, stride=stride, groups=c), dict(c_out=c, kernel=1)])
            return self.unit(x, [dict(c_out=c, kernel=k, groups=c), dict(c_out=c, kernel=1)])
        if op.startswith('dil_conv'):
            return self.unit(x, [dict(c_out=c, kernel=k, stride=stride, dilation=2, groups=c),
                                 dict(c_out=c, kernel=1)])
        raise DecodeError(f"unknown operation {op}")


def _reduction_layers(layers: int) -> Tuple[int, ...]:
    return tuple(sorted({layers // 3, 2 * layers // 3}))


def _micro_cell(b: GraphBuilder, genome: Genome, which: int, s0: int, s1: int, c: int,
                prev_reduction: bool) -> int:
    reduction = which == 1
    if prev_reduction:
        # s0 still has the resolution from before the previous reduction cell
        b.reduction = True
        s0 = b.reduce_unit(s0, c)
        b.reduction = False
    else:
        s0 = b.unit(s0, [dict(c_out=c, kernel=1)])
    s1 = b.unit(s1, [dict(c_out=c, kernel=1)])
    b.reduction = reduction
    states = [s0, s1]
    for node in genome.cell(which):
        branches = []
        for src, op_id in ((node.input1, node.op1), (node.input2, node.op2)):
            stride = 2 if reduction and src < 2 else 1
            branches.append(b.edge(OPS[op_id], states[src], c, stride))
        states.append(b.add(branches))
    b.reduction = False
    return b.concat(states[2:])


def _decode_micro(genome: Genome, scale: ScaleConfig) -> Tuple[GraphBuilder, int]:
    b = GraphBuilder(scale.op_order)
    c = scale.channels_for('micro')
    b.scope = 'stem'
    x = b.input(scale.in_channels, scale.resolution, scale.resolution)
    stem = b.bn(b.conv(x, 3 * c, 3))
    s0 = s1 = stem
    c_curr = c
    prev_reduction = False
    reductions = _reduction_layers(scale.layers)
    for layer in range(scale.layers):
        reduction = layer in reductions
        if reduction:
            c_curr *= 2
        b.scope = f"cell{layer}"
        out = _micro_cell(b, genome, int(reduction), s0, s1, c_curr, prev_reduction)
        s0, s1 = s1, out
        prev_reduction = reduction
    return b, s1


def _decode_phase(b: GraphBuilder, bits: Sequence[int], x: int, c: int) -> int:
    def node_op(inp: int) -> int:
        return b.relu(b.bn(b.conv(inp, c, 3)))

    k = settings.MACRO_NODES
    preds: Dict[int, List[int]] = {j: [] for j in range(k)}
    succs: Dict[int, List[int]] = {i: [] for i in range(k)}
    for bit, (i, j) in zip(bits, phase_edges(k)):
        if bit:
            preds[j].append(i)
            succs[i].append(j)
    active = [n for n in range(k) if preds[n] or succs[n]]
    if not active:
        return node_op(x)
    outputs: Dict[int, int] = {}
    for n in active:
        sources = [outputs[p] for p in preds[n]]
        if not sources:
            inp = x
        elif len(sources) == 1:
            inp = sources[0]
        else:
            inp = b.add(sources)
        outputs[n] = node_op(inp)
    sinks = [outputs[n] for n in active if not succs[n]]
    return sinks[0] if len(sinks) == 1 else b.add(sinks)


def _decode_macro(genome: Genome, scale: ScaleConfig) -> Tuple[GraphBuilder, int]:
    b = GraphBuilder(scale.op_order)
    channels = scale.macro_channels()
    b.scope = 'stem'
    x = b.input(scale.in_channels, scale.resolution, scale.resolution)
    x = b.relu(b.bn(b.conv(x, channels[0], 3)))
    for p, bits in enumerate(genome.phases):
        if p > 0:
            b.scope = f"reduce{p}"
            b.reduction = True
            x = b.bn(b.factorized_reduce(x, channels[p]))
            b.reduction = False
        b.scope = f"phase{p}"
        x = _decode_phase(b, bits, x, channels[p])
    return b, x


def decode(genome: Genome, scale: Optional[ScaleConfig] = None) -> NetGraph:
    """Build the backbone graph (plus classifier head) for ``genome`` at ``scale``."""
    scale = scale or ScaleConfig()
    if genome.kind not in ('micro', 'macro'):
        raise DecodeError(f"cannot decode a {genome.kind} genome into a network")
    problems = SearchSpaceSpec.named(genome.kind).violations(genome)
    if problems:
        gene, reason = problems[0]
        raise DecodeError(f"invalid genome {genome}: {reason}", gene=gene)

    b, last = _decode_micro(genome, scale) if genome.kind == 'micro' else _decode_macro(genome, scale)
    b.scope = 'head'
    features = b.gap(last)
    head = b.linear(features, scale.num_classes)
    net = NetGraph(tuple(b.nodes), output=features, head=head, kind=genome.kind,
                   genome=genome.to_string(), scale=scale.model_dump())
    logger.debug(f"Decoded {genome} into {len(net.nodes)} nodes, {net.feature_dim} features")
    return net


def node_flops(node: LayerNode) -> int:
    if node.op == 'conv':
        return node.kernel * node.kernel * (node.c_in // node.groups) * node.c_out * node.h_out * node.w_out
    if node.op == 'factorized_reduce':
        return node.c_in * node.c_out * node.h_out * node.w_out
    if node.op == 'linear':
        return node.c_in * node.c_out
    return 0


def count_flops(net: NetGraph) -> int:
    """Total multiply-accumulates of one forward pass for a single image."""
    return sum(node_flops(n) for n in net.nodes)


def count_params(net: NetGraph) -> int:
    total = 0
    for n in net.nodes:
        if n.op == 'conv':
            total += n.kernel * n.kernel * (n.c_in // n.groups) * n.c_out
        elif n.op == 'factorized_reduce':
            total += n.c_in * n.c_out
        elif n.op == 'bn':
            total += 2 * n.c_out
        elif n.op == 'linear':
            total += n.c_in * n.c_out + n.c_out
    return total


def _has_cycle(nodes: Sequence[LayerNode]) -> bool:
    indegree = {n.id: 0 for n in nodes}
    children: Dict[int, List[int]] = {n.id: [] for n in nodes}
    for n in nodes:
        for src in n.inputs:
            if src in children:
                children[src].append(n.id)
                indegree[n.id] += 1
    ready = [k for k, d in indegree.items() if d == 0]
    seen = 0
    while ready:
        k = ready.pop()
        seen += 1
        for child in children[k]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    return seen != len(nodes)


def _expected_shape(node: LayerNode, ins: Sequence[LayerNode]) -> Optional[Tuple[int, int, int]]:
    first = ins[0]
    h, w = first.h_out, first.w_out
    if node.op in ('bn', 'relu'):
        return first.c_out, h, w
    if node.op == 'conv':
        return (node.c_out, conv_out(h, node.kernel, node.stride, node.padding, node.dilation),
                conv_out(w, node.kernel, node.stride, node.padding, node.dilation))
    if node.op in ('max_pool', 'avg_pool'):
        return first.c_out, conv_out(h, 3, node.stride, 1, 1), conv_out(w, 3, node.stride, 1, 1)
    if node.op in ('factorized_reduce', 'zero'):
        c = node.c_out if node.op == 'factorized_reduce' else first.c_out
        return c, conv_out(h, 1, node.stride, 0, 1), conv_out(w, 1, node.stride, 0, 1)
    if node.op == 'add':
        return first.c_out, h, w
    if node.op == 'concat':
        return sum(i.c_out for i in ins), h, w
    if node.op == 'gap':
        return first.c_out, 1, 1
    if node.op == 'linear':
        return node.c_out, 1, 1
    return None


def validate(net: NetGraph) -> List[str]:
    """Structural violations of ``net``; an empty list means the graph is sound."""
    violations: List[str] = []
    nodes = net.nodes
    if not nodes or nodes[0].op != 'input':
        violations.append('graph must start with an input node')
    for pos, n in enumerate(nodes):
        if n.id != pos:
            violations.append(f"node at position {pos} has id {n.id}")
    if _has_cycle(nodes):
        violations.append('cycle detected: graph has no topological order')

    for n in nodes:
        if n.op == 'input':
            continue
        if not n.inputs:
            violations.append(f"node {n.id} ({n.op}) has no inputs")
            continue
        bad = [src for src in n.inputs if not 0 <= src < len(nodes) or src >= n.id]
        if bad:
            violations.append(f"node {n.id} ({n.op}) reads {bad} which do not precede it")
            continue
        ins = [nodes[src] for src in n.inputs]
        if n.op in ('add', 'concat'):
            if len({(i.h_out, i.w_out) for i in ins}) > 1:
                violations.append(f"node {n.id} ({n.op}) mixes spatial sizes")
            if n.op == 'add' and len({i.c_out for i in ins}) > 1:
                violations.append(f"node {n.id} (add) mixes channel counts")
        elif n.c_in != ins[0].c_out:
            violations.append(f"node {n.id} ({n.op}) expects {n.c_in} channels, input has {ins[0].c_out}")
        if n.op == 'conv' and (n.c_in % n.groups or n.c_out % n.groups):
            violations.append(f"node {n.id} (conv) channels not divisible by groups={n.groups}")
        expected = _expected_shape(n, ins)
        if expected is None:
            violations.append(f"node {n.id} has unknown op '{n.op}'")
        elif expected != (n.c_out, n.h_out, n.w_out):
            violations.append(f"node {n.id} ({n.op}) annotated {(n.c_out, n.h_out, n.w_out)}, expected {expected}")
        if n.op in STRIDED_OPS and n.stride != 1 and not n.reduction:
            violations.append(f"node {n.id} ({n.op}) is strided outside a reduction position")

    if not 0 <= net.output < len(nodes) or nodes[net.output].op != 'gap':
        violations.append('output must be a global-average-pool node')
    return violations
