"""Generator and discriminator builders and a numpy forward pass.

Generators (edge G1, inpaint G2)::

    c64, d128, d256, R256 x 8, u128, u64, c*

Discriminators (D1 for edges, D2 for images)::

    C64-2, C128-2, C256-2, C512-1, C1-1
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import tensor_core as tc
from .archive import read_archive, write_archive
from .errors import ShapeError, WeightMismatchError
from .tensor_core import Activation, ConvParams, SpectralState

IN_EPS = 1e-5
INIT_STD = 0.02
LEAKY_SLOPE = 0.2
N_RESIDUAL = 8

IN_CHANNELS = {"G1": 3, "G2": 4, "D1": 2, "D2": 4}


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str  # conv | conv_transpose | residual
    in_c: int = 0
    out_c: int = 0
    kernel_size: int = 3
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    padding_mode: str = "zero"
    spectral_norm: bool = False
    instance_norm: bool = False
    activation: Optional[Activation] = None
    sublayers: tuple = ()

    def __post_init__(self):
        if self.kind == "residual":
            if len(self.sublayers) != 2 or self.sublayers[0].dilation != 2:
                raise ValueError("residual block needs two convs, the first with dilation 2")

    def convs(self):
        """This layer's conv-type leaves (itself, or a residual block's two convs)."""
        return list(self.sublayers) if self.kind == "residual" else [self]


class CapturedActivation(NamedTuple):
    layer: str
    tensor: np.ndarray

    @property
    def count(self) -> int:
        return int(self.tensor.size)


@dataclass
class NetworkInstance:
    name: str
    in_channels: int
    layers: list
    params: dict = field(default_factory=dict)
    spectral: dict = field(default_factory=dict)
    divisor: int = 4

    def conv_layers(self) -> list:
        return [leaf for layer in self.layers for leaf in layer.convs()]

    def spectral_layers(self) -> list:
        return [leaf for leaf in self.conv_layers() if leaf.spectral_norm]

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @property
    def out_channels(self) -> int:
        last = self.layers[-1]
        return last.in_c if last.kind == "conv_transpose" else last.out_c


def _conv(name, in_c, out_c, k, stride=1, pad=0, dilation=1, mode="zero", sn=True,
          norm=True, act=tc.RELU, kind="conv"):
    return LayerSpec(name, kind, in_c, out_c, k, stride, pad, dilation, mode, sn, norm, act)


def _residual(name, ch, sn):
    return LayerSpec(
        name, "residual", ch, ch,
        sublayers=(
            _conv(f"{name}.conv1", ch, ch, 3, pad=2, dilation=2, sn=sn),
            _conv(f"{name}.conv2", ch, ch, 3, pad=1, dilation=1, sn=sn, act=None),
        ),
    )


def generator_layers(kind: str) -> list:
    if kind not in ("edge", "inpaint"):
        raise ValueError(f"generator kind must be 'edge' or 'inpaint', got {kind!r}")
    sn = kind == "edge"
    in_c = 3 if sn else 4
    layers = [
        _conv("c64", in_c, 64, 7, pad=3, mode="reflect", sn=sn),
        _conv("d128", 64, 128, 4, stride=2, pad=1, sn=sn),
        _conv("d256", 128, 256, 4, stride=2, pad=1, sn=sn),
    ]
    layers += [_residual(f"r{i + 1}", 256, sn) for i in range(N_RESIDUAL)]
    # transpose kernels are stored (in, out) as the adjoint of a (out -> in) conv
    layers += [
        _conv("u128", 128, 256, 4, stride=2, pad=1, sn=sn, kind="conv_transpose"),
        _conv("u64", 64, 128, 4, stride=2, pad=1, sn=sn, kind="conv_transpose"),
    ]
    final_act = tc.SIGMOID if sn else tc.SCALED_TANH
    layers.append(_conv("c_out", 64, 1 if sn else 3, 7, pad=3, mode="reflect", sn=sn,
                        norm=False, act=final_act))
    return layers


def discriminator_layers(kind: str) -> list:
    if kind not in ("edge", "inpaint"):
        raise ValueError(f"discriminator kind must be 'edge' or 'inpaint', got {kind!r}")
    in_c = 2 if kind == "edge" else 4
    act = tc.leaky_relu(LEAKY_SLOPE)
    chans = [in_c, 64, 128, 256, 512]
    strides = [2, 2, 2, 1]
    layers = [
        _conv(f"C{chans[i + 1]}", chans[i], chans[i + 1], 4, stride=strides[i], pad=1,
              norm=False, act=act)
        for i in range(4)
    ]
    layers.append(_conv("C1", 512, 1, 4, stride=1, pad=1, norm=False, act=tc.SIGMOID))
    return layers


def _kernel_shape(leaf: LayerSpec):
    return (leaf.out_c, leaf.in_c, leaf.kernel_size, leaf.kernel_size)


def _bias_len(leaf: LayerSpec) -> int:
    return leaf.in_c if leaf.kind == "conv_transpose" else leaf.out_c


def init_network(name: str, in_channels: int, layers: list, seed: int = 0,
                 std: float = INIT_STD, he_init: bool = False) -> NetworkInstance:
    rng = np.random.default_rng(seed)
    net = NetworkInstance(name, in_channels, layers)
    for leaf in net.conv_layers():
        shape = _kernel_shape(leaf)
        s = np.sqrt(2.0 / np.prod(shape[1:])) if he_init else std
        net.params[f"{leaf.name}.weight"] = (rng.standard_normal(shape) * s).astype(tc.DTYPE)
        net.params[f"{leaf.name}.bias"] = np.zeros(_bias_len(leaf), dtype=tc.DTYPE)
        if leaf.instance_norm:
            n = _bias_len(leaf)
            net.params[f"{leaf.name}.norm.gamma"] = np.ones(n, dtype=tc.DTYPE)
            net.params[f"{leaf.name}.norm.beta"] = np.zeros(n, dtype=tc.DTYPE)
        if leaf.spectral_norm:
            net.spectral[f"{leaf.name}.weight"] = SpectralState.init(leaf.out_c, rng)
    return net


def build_generator(kind: str, seed: int = 0) -> NetworkInstance:
    """G1 (``"edge"``: gray+edges+mask -> edge prob.) or G2 (``"inpaint"``: RGB+edges -> RGB)."""
    layers = generator_layers(kind)
    name = "G1" if kind == "edge" else "G2"
    return init_network(name, IN_CHANNELS[name], layers, seed)


def build_discriminator(kind: str, seed: int = 0) -> NetworkInstance:
    """70x70 PatchGAN; D1 scores (edges, gray), D2 scores (RGB, edges)."""
    layers = discriminator_layers(kind)
    name = "D1" if kind == "edge" else "D2"
    return init_network(name, IN_CHANNELS[name], layers, seed)


def build_feature_extractor(seed: int = 1234) -> NetworkInstance:
    """Small fixed random conv stack standing in for a pretrained extractor.

    Used for perceptual/style losses and FID embeddings when no trained
    feature network is available. He-initialized so activations keep scale.
    """
    layers = [
        _conv("relu1", 3, 16, 3, pad=1, sn=False, norm=False),
        _conv("relu2", 16, 32, 4, stride=2, pad=1, sn=False, norm=False),
        _conv("relu3", 32, 64, 4, stride=2, pad=1, sn=False, norm=False),
    ]
    return init_network("extractor", 3, layers, seed, he_init=True)


def _effective_weight(net: NetworkInstance, leaf: LayerSpec) -> np.ndarray:
    key = f"{leaf.name}.weight"
    w = net.params[key]
    if leaf.spectral_norm:
        w, _ = tc.spectral_normalize(w, net.spectral[key])
    return w


def _run_leaf(net: NetworkInstance, leaf: LayerSpec, x: np.ndarray) -> np.ndarray:
    cp = ConvParams(
        kernel=_effective_weight(net, leaf),
        bias=net.params[f"{leaf.name}.bias"],
        stride=leaf.stride,
        dilation=leaf.dilation,
        padding=leaf.padding,
        padding_mode=leaf.padding_mode,
    )
    y = tc.conv_transpose2d(x, cp) if leaf.kind == "conv_transpose" else tc.conv2d(x, cp)
    if leaf.instance_norm:
        y = tc.instance_norm(
            y, net.params[f"{leaf.name}.norm.gamma"], net.params[f"{leaf.name}.norm.beta"], IN_EPS
        )
    if leaf.activation is not None:
        y = tc.apply_activation(y, leaf.activation)
    return y


def check_input(net: NetworkInstance, x) -> np.ndarray:
    x = tc.as_tensor(x)
    n, c, h, w = x.shape
    if c != net.in_channels:
        raise ShapeError(f"{net.name}: expected {net.in_channels} input channels on axis c, got {c}")
    if h % net.divisor or w % net.divisor:
        raise ShapeError(f"{net.name}: spatial dims {h}x{w} must be divisible by {net.divisor}")
    return x


def forward(net: NetworkInstance, x, capture: bool = False):
    """Run the network in inference mode (spectral estimates frozen).

    Returns ``(output, activations)`` where ``activations`` is the list of
    per-layer post-activation tensors when ``capture`` is set, else ``None``.
    """
    x = check_input(net, x)
    stack = [] if capture else None
    for layer in net.layers:
        if layer.kind == "residual":
            h = _run_leaf(net, layer.sublayers[0], x)
            x = x + _run_leaf(net, layer.sublayers[1], h)
        else:
            x = _run_leaf(net, layer, x)
        if capture:
            stack.append(CapturedActivation(layer.name, x))
    return x, stack


def update_spectral_states(net: NetworkInstance, iterations: int = 1) -> None:
    """Advance every power-iteration estimate; the one mutating entry point."""
    for key, state in list(net.spectral.items()):
        st = SpectralState(state.u, iterations, state.sigma, state.degenerate)
        _, new = tc.spectral_normalize(net.params[key], st)
        net.spectral[key] = SpectralState(new.u, state.iterations_per_step, new.sigma, new.degenerate)


def named_tensors(net: NetworkInstance) -> dict:
    """Parameters plus spectral ``u`` vectors, in build order."""
    out = dict(net.params)
    for key, state in net.spectral.items():
        out[f"{key}.sn_u"] = np.asarray(state.u, dtype=tc.DTYPE)
    return out


def save_weights(net: NetworkInstance, path) -> None:
    write_archive(named_tensors(net), path)


def load_weights(net: NetworkInstance, path) -> NetworkInstance:
    """Load an archive into ``net`` in place; names and shapes must match exactly."""
    loaded = read_archive(path)
    expected = named_tensors(net)
    for name, arr in expected.items():
        if name not in loaded:
            raise WeightMismatchError(f"{path}: missing tensor {name!r}")
        if loaded[name].shape != arr.shape:
            raise WeightMismatchError(
                f"{path}: tensor {name!r} has shape {loaded[name].shape}, expected {arr.shape}"
            )
    for name in loaded:
        if name not in expected:
            raise WeightMismatchError(f"{path}: unexpected tensor {name!r}")
    for name in net.params:
        net.params[name] = loaded[name].copy()
    for key, state in net.spectral.items():
        u = loaded[f"{key}.sn_u"].copy()
        net.spectral[key] = SpectralState(u, state.iterations_per_step)
    return net
