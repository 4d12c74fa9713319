"""Masked network architectures, mask registry, and density bookkeeping.

A network is an ordered list of layers.  Layers carrying weights
(MaskedLinear, MaskedConv2d) own a binary mask congruent to the weight
tensor; effective weights are always ``mask * weight``.  Non-prunable
layers keep an all-ones mask.  Biases and batch-norm parameters are
never masked and never participate in path computations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, Tape, conv_out_shape


class ConfigError(ValueError):
    """Unknown architecture id or invalid layer configuration."""


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class MaskedLinear:
    def __init__(self, in_features, out_features, rng, prunable=True):
        self.in_features = in_features
        self.out_features = out_features
        std = np.sqrt(2.0 / in_features)
        self.weight = Tensor(rng.normal(0.0, std, (in_features, out_features)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)
        self.mask = np.ones((in_features, out_features), dtype=np.uint8)
        self.prunable = prunable

    def forward(self, tape: Tape, x: Tensor) -> Tensor:
        return tape.add_bias(tape.matmul_masked(x, self.weight, self.mask), self.bias)

    def forward_flops(self, spatial=1):
        # one multiply + one add per active weight
        return 2 * int(self.mask.sum())


class MaskedConv2d:
    def __init__(self, in_channels, out_channels, kernel, rng,
                 stride=1, pad=None, prunable=True):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad
        fan_in = in_channels * kernel * kernel
        std = np.sqrt(2.0 / fan_in)
        self.weight = Tensor(
            rng.normal(0.0, std, (out_channels, in_channels, kernel, kernel)),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)
        self.mask = np.ones(self.weight.shape, dtype=np.uint8)
        self.prunable = prunable
        self.out_spatial = None  # filled by shape trace

    def forward(self, tape: Tape, x: Tensor) -> Tensor:
        y = tape.conv2d_masked(x, self.weight, self.mask, self.stride, self.pad)
        return tape.add_bias(y, self.bias)

    def forward_flops(self, spatial=1):
        return 2 * int(self.mask.sum()) * spatial


class ReLU:
    def forward(self, tape, x):
        return tape.relu(x)


class MaxPool2d:
    def __init__(self, k=2):
        self.k = k

    def forward(self, tape, x):
        return tape.max_pool2d(x, self.k)


class AvgPool2d:
    def __init__(self, k=2):
        self.k = k

    def forward(self, tape, x):
        return tape.avg_pool2d(x, self.k)


class GlobalAvgPool:
    def forward(self, tape, x):
        return tape.global_avg_pool(x)


class Flatten:
    def forward(self, tape, x):
        return tape.flatten(x)


class BatchNormLite:
    """Per-channel affine normalized by running stats (frozen during scoring)."""

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.channels = channels
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def forward(self, tape, x, train=False):
        if train:
            axes = 0 if x.data.ndim == 2 else (0, 2, 3)
            bm = x.data.mean(axis=axes)
            bv = x.data.var(axis=axes)
            self.running_mean += self.momentum * (bm - self.running_mean)
            self.running_var += self.momentum * (bv - self.running_var)
        return tape.affine_channels(x, self.gamma, self.beta,
                                    self.running_mean, self.running_var, self.eps)

    def path_scale(self):
        """Absolute per-channel multiplier this layer applies to path products."""
        return np.abs(self.gamma.data) / np.sqrt(self.running_var + self.eps)


class ResidualAdd:
    """Adds the output of an earlier layer (unit-weight parallel paths)."""

    def __init__(self, source):
        self.source = source

    def forward(self, tape, x, skip):
        return tape.add(x, skip)


WEIGHTED = (MaskedLinear, MaskedConv2d)


# ---------------------------------------------------------------------------
# Mask registry
# ---------------------------------------------------------------------------

class BinaryMask:
    """View over the per-layer masks of the prunable layers, with cached counts."""

    def __init__(self, net):
        self._net = net

    def layer_items(self):
        for idx, layer in self._net.weighted_layers():
            if layer.prunable:
                yield idx, layer.mask

    def nnz(self):
        return sum(int(m.sum()) for _, m in self.layer_items())

    def total(self):
        return sum(m.size for _, m in self.layer_items())

    def density(self):
        total = self.total()
        return self.nnz() / total if total else 1.0


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

@dataclass
class NodeGroup:
    """One scoring-node layer: neurons for linear, feature maps for conv."""
    name: str
    size: int
    kind: str  # "input" | "hidden" | "output"


class MaskedNetwork:
    def __init__(self, layers, arch_id, input_shape):
        self.layers = layers
        self.arch_id = arch_id
        self.input_shape = input_shape  # (features,) or (C,H,W)
        self.mask = BinaryMask(self)
        self._last_inputs = {}
        self._last_preacts = {}
        self._trace_shapes()

    # ---- structure ----------------------------------------------------

    def weighted_layers(self):
        return [(i, l) for i, l in enumerate(self.layers) if isinstance(l, WEIGHTED)]

    def prunable_layers(self):
        return [(i, l) for i, l in self.weighted_layers() if l.prunable]

    def prunable_count(self):
        return sum(l.weight.data.size for _, l in self.prunable_layers())

    def _trace_shapes(self):
        """Record per-layer output shapes and conv spatial sizes."""
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            if isinstance(layer, MaskedConv2d):
                c, h, w = shape
                ho, wo = conv_out_shape(h, w, layer.kernel, layer.kernel,
                                        layer.stride, layer.pad)
                layer.out_spatial = ho * wo
                shape = (layer.out_channels, ho, wo)
            elif isinstance(layer, MaskedLinear):
                shape = (layer.out_features,)
            elif isinstance(layer, (MaxPool2d, AvgPool2d)):
                c, h, w = shape
                shape = (c, h // layer.k, w // layer.k)
            elif isinstance(layer, GlobalAvgPool):
                shape = (shape[0], 1, 1)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, Reroute):
                shape = shapes[layer.source]
            shapes.append(shape)
        self.layer_shapes = shapes

    def predecessors(self, idx):
        """Layer indices feeding layer ``idx`` (-1 denotes the network input)."""
        layer = self.layers[idx]
        if isinstance(layer, Reroute):
            return [layer.source]
        if isinstance(layer, ResidualAdd):
            return [idx - 1, layer.source]
        return [idx - 1]

    # ---- forward ------------------------------------------------------

    def forward(self, tape: Tape, x: Tensor, train=False, retain=False) -> Tensor:
        outputs = []
        cur = x
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, WEIGHTED):
                if retain:
                    self._last_inputs[idx] = cur
                cur = layer.forward(tape, cur)
                if retain:
                    self._last_preacts[idx] = cur
            elif isinstance(layer, BatchNormLite):
                cur = layer.forward(tape, cur, train=train)
            elif isinstance(layer, ResidualAdd):
                cur = layer.forward(tape, cur, outputs[layer.source])
            elif isinstance(layer, Reroute):
                cur = outputs[layer.source]
            else:
                cur = layer.forward(tape, cur)
            outputs.append(cur)
        return cur

    # ---- parameters ---------------------------------------------------

    def parameters(self):
        params = []
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, WEIGHTED):
                params.append((idx, "weight", layer.weight))
                params.append((idx, "bias", layer.bias))
            elif isinstance(layer, BatchNormLite):
                params.append((idx, "gamma", layer.gamma))
                params.append((idx, "beta", layer.beta))
        return params

    # ---- density & nodes ----------------------------------------------

    def density(self):
        return self.mask.density()

    def node_groups(self):
        """Scoring-node groups: input plus one per weighted-layer output.

        Nodes are neurons for linear layers and feature maps for convs.
        The group of the last weighted layer is the output group.
        """
        groups = [NodeGroup("input", _group_size(self.input_shape), "input")]
        wl = self.weighted_layers()
        last_idx = wl[-1][0]
        for idx, layer in wl:
            kind = "output" if idx == last_idx else "hidden"
            size = (layer.out_features if isinstance(layer, MaskedLinear)
                    else layer.out_channels)
            groups.append(NodeGroup(f"layer{idx}", size, kind))
        return groups

    def _group_of_output(self):
        """Map layer index -> node-group index of that layer's output."""
        mapping = {}
        cur = 0
        next_group = 1
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, WEIGHTED):
                cur = next_group
                next_group += 1
            elif isinstance(layer, Reroute):
                cur = mapping[layer.source]
            mapping[idx] = cur
        return mapping

    def channel_degrees(self):
        """Unmasked in/out degree per node, at neuron/channel granularity.

        Returns (groups, in_deg, out_deg) aligned with node_groups().
        Residual adds contribute unit edges in both directions.
        """
        groups = self.node_groups()
        in_deg = [np.zeros(g.size) for g in groups]
        out_deg = [np.zeros(g.size) for g in groups]
        mapping = self._group_of_output()
        group_ids = iter(range(1, len(groups)))
        cur = 0
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, MaskedLinear):
                nxt = next(group_ids)
                out_deg[cur] += layer.mask.sum(axis=1)
                in_deg[nxt] += layer.mask.sum(axis=0)
                cur = nxt
            elif isinstance(layer, MaskedConv2d):
                nxt = next(group_ids)
                out_deg[cur] += layer.mask.sum(axis=(0, 2, 3))
                in_deg[nxt] += layer.mask.sum(axis=(1, 2, 3))
                cur = nxt
            elif isinstance(layer, ResidualAdd):
                src = mapping[layer.source]
                out_deg[src] += 1
                in_deg[cur] += 1
            elif isinstance(layer, Reroute):
                cur = mapping[layer.source]
        return groups, in_deg, out_deg

    def isolated_node_fraction(self):
        """Fraction of nodes missing a direction needed to carry a path."""
        groups, in_deg, out_deg = self.channel_degrees()
        isolated = 0
        total = 0
        for g, ind, outd in zip(groups, in_deg, out_deg):
            total += g.size
            if g.kind == "input":
                isolated += int((outd == 0).sum())
            elif g.kind == "output":
                isolated += int((ind == 0).sum())
            else:
                isolated += int(((ind == 0) | (outd == 0)).sum())
        return isolated / total if total else 0.0


def _group_size(shape):
    return shape[0] if len(shape) == 3 else shape[0]


# ---------------------------------------------------------------------------
# Architectures
# ---------------------------------------------------------------------------

def make_mlp(widths, rng, prunable_last=False, arch_id=None):
    if len(widths) < 2:
        raise ConfigError("mlp needs at least input and output widths")
    layers = []
    for i in range(len(widths) - 1):
        last = i == len(widths) - 2
        layers.append(MaskedLinear(widths[i], widths[i + 1], rng,
                                   prunable=prunable_last if last else True))
        if not last:
            layers.append(ReLU())
    aid = arch_id or "mlp-" + "-".join(str(w) for w in widths)
    return MaskedNetwork(layers, aid, (widths[0],))


def make_resnet(depth, rng, num_classes=10, in_channels=3, in_size=32,
                base_width=16, arch_id=None):
    """Standard 6n+2 residual stack; shortcuts and final linear non-prunable."""
    if (depth - 2) % 6 != 0:
        raise ConfigError(f"resnet depth must be 6n+2, got {depth}")
    n = (depth - 2) // 6
    layers = []
    layers.append(MaskedConv2d(in_channels, base_width, 3, rng, prunable=True))
    layers.append(BatchNormLite(base_width))
    layers.append(ReLU())
    channels = base_width
    for stage in range(3):
        out_ch = base_width * (2 ** stage)
        for block in range(n):
            stride = 2 if stage > 0 and block == 0 else 1
            skip_src = len(layers) - 1
            if stride != 1 or channels != out_ch:
                # projection shortcut: non-prunable 1x1 conv
                layers.append(MaskedConv2d(channels, out_ch, 1, rng, stride=stride,
                                           pad=0, prunable=False))
                layers.append(BatchNormLite(out_ch))
                skip_src = len(layers) - 1
                # rewind the main path input to before the shortcut
                main_input = skip_src - 2
            else:
                main_input = skip_src
            # main path operates on outputs[main_input]; with a sequential
            # list we emulate this by inserting the shortcut first, so the
            # main path convs must read from main_input.  We keep strict
            # sequential execution: shortcut output is captured via
            # ResidualAdd(source).
            layers.append(Reroute(main_input))
            layers.append(MaskedConv2d(channels, out_ch, 3, rng, stride=stride))
            layers.append(BatchNormLite(out_ch))
            layers.append(ReLU())
            layers.append(MaskedConv2d(out_ch, out_ch, 3, rng))
            layers.append(BatchNormLite(out_ch))
            layers.append(ResidualAdd(skip_src))
            layers.append(ReLU())
            channels = out_ch
    layers.append(GlobalAvgPool())
    layers.append(Flatten())
    layers.append(MaskedLinear(channels, num_classes, rng, prunable=False))
    aid = arch_id or f"resnet-{depth}"
    return MaskedNetwork(layers, aid, (in_channels, in_size, in_size))


class Reroute:
    """Route the output of an earlier layer to the next layer (graph plumbing).

    Lets a flat layer list express blocks whose main path and shortcut both
    read the same block input.
    """

    def __init__(self, source):
        self.source = source


def build_architecture(arch_id, rng, **overrides):
    """Construct a network from an architecture id string.

    Supported: ``mlp-<w0>-<w1>-...`` and ``resnet-<depth>[-w<base_width>]``.
    """
    m = re.fullmatch(r"mlp((?:-\d+){2,})", arch_id)
    if m:
        widths = [int(s) for s in m.group(1).split("-")[1:]]
        return make_mlp(widths, rng, arch_id=arch_id,
                        prunable_last=overrides.get("prunable_last", False))
    m = re.fullmatch(r"resnet-(\d+)(?:-w(\d+))?", arch_id)
    if m:
        depth = int(m.group(1))
        width = int(m.group(2)) if m.group(2) else 16
        return make_resnet(depth, rng, base_width=width, arch_id=arch_id,
                           num_classes=overrides.get("num_classes", 10),
                           in_channels=overrides.get("in_channels", 3),
                           in_size=overrides.get("in_size", 32))
    raise ConfigError(f"unknown architecture id: {arch_id!r}")


def prunable_scope(net: MaskedNetwork, override=None):
    """Per weighted-layer prunable flags.

    ResNet family: final linear and projection shortcuts stay dense.  MLP
    family: final layer dense unless overridden.  ``override`` maps layer
    index to a flag and wins over the policy default.
    """
    flags = {idx: layer.prunable for idx, layer in net.weighted_layers()}
    if override:
        for idx, flag in override.items():
            if idx not in flags:
                raise ConfigError(f"override names non-weighted layer {idx}")
            flags[idx] = bool(flag)
            net.layers[idx].prunable = bool(flag)
            if not flag:
                net.layers[idx].mask[:] = 1
    return flags
