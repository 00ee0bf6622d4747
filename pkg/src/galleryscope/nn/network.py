"""Network assembly: layer descriptors, parameter init, full forward/backward.

A network is a flat list of layer descriptors (conv 3x3/s1/p1, relu,
maxpool 2x2, dense, softmax). Parameters live in an ordered dict keyed
"conv0.w", "conv0.b", "dense5.w", ... in layer order; gradients and momentum
velocities use the same keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    ShapeError,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    softmax,
)

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class LayerSpec:
    kind: str                      # conv | relu | maxpool | dense | softmax
    out_channels: int = 0          # conv only
    out_units: int = 0             # dense only

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "conv":
            d["out_channels"] = self.out_channels
        elif self.kind == "dense":
            d["out_units"] = self.out_units
        return d

    @staticmethod
    def from_json(d: dict) -> "LayerSpec":
        return LayerSpec(d["kind"], d.get("out_channels", 0), d.get("out_units", 0))


def conv(out_channels: int) -> LayerSpec:
    return LayerSpec("conv", out_channels=out_channels)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool() -> LayerSpec:
    return LayerSpec("maxpool")


def dense(out_units: int) -> LayerSpec:
    return LayerSpec("dense", out_units=out_units)


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer descriptors plus input geometry and class count."""

    layers: tuple[LayerSpec, ...]
    input_hw: tuple[int, int] = (64, 64)
    in_channels: int = 3
    classes: int = 10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.layers or self.layers[-1].kind != "softmax":
            raise ShapeError("network must end with a softmax layer")
        if any(l.kind == "softmax" for l in self.layers[:-1]):
            raise ShapeError("softmax may only appear as the final layer")
        shapes = self.activation_shapes()
        out = shapes[-1]
        if out != (self.classes,):
            raise ShapeError(f"final layer width {out} does not match class count {self.classes}")

    def activation_shapes(self) -> list[tuple[int, ...]]:
        """Shape after each layer, starting from the input shape."""
        h, w = self.input_hw
        shape: tuple[int, ...] = (self.in_channels, h, w)
        shapes = [shape]
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                if len(shape) != 3:
                    raise ShapeError(f"layer {i}: conv requires [C,H,W] input, has {shape}")
                shape = (layer.out_channels, shape[1], shape[2])
            elif layer.kind == "relu":
                pass
            elif layer.kind == "maxpool":
                if len(shape) != 3:
                    raise ShapeError(f"layer {i}: maxpool requires [C,H,W] input, has {shape}")
                c, hh, ww = shape
                if hh % 2 or ww % 2 or hh < 2 or ww < 2:
                    raise ShapeError(f"layer {i}: maxpool needs even extents >= 2, has {hh}x{ww}")
                shape = (c, hh // 2, ww // 2)
            elif layer.kind == "dense":
                n = int(np.prod(shape))
                shape = (layer.out_units,)
                if n < 1 or layer.out_units < 1:
                    raise ShapeError(f"layer {i}: bad dense geometry {n}->{layer.out_units}")
            elif layer.kind == "softmax":
                if len(shape) != 1:
                    raise ShapeError(f"layer {i}: softmax requires a vector input, has {shape}")
            else:
                raise ShapeError(f"layer {i}: unknown layer kind {layer.kind!r}")
            shapes.append(shape)
        return shapes

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = self.activation_shapes()
        out: dict[str, tuple[int, ...]] = {}
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                c_in = shapes[i][0]
                out[f"conv{i}.w"] = (layer.out_channels, c_in, 3, 3)
                out[f"conv{i}.b"] = (layer.out_channels,)
            elif layer.kind == "dense":
                n = int(np.prod(shapes[i]))
                out[f"dense{i}.w"] = (layer.out_units, n)
                out[f"dense{i}.b"] = (layer.out_units,)
        return out

    def to_json(self) -> dict:
        return {
            "layers": [l.to_json() for l in self.layers],
            "input_hw": list(self.input_hw),
            "in_channels": self.in_channels,
            "classes": self.classes,
        }

    @staticmethod
    def from_json(d: dict) -> "NetworkSpec":
        return NetworkSpec(
            layers=tuple(LayerSpec.from_json(l) for l in d["layers"]),
            input_hw=tuple(d["input_hw"]),
            in_channels=d["in_channels"],
            classes=d["classes"],
        )


def vgg_nano(classes: int, input_hw: tuple[int, int] = (64, 64), in_channels: int = 3
             ) -> NetworkSpec:
    """Default desk-scale conv stack: 4x (conv3-relu-pool) then dense-64, dense-C."""
    layers = (
        conv(8), relu(), maxpool(),
        conv(16), relu(), maxpool(),
        conv(32), relu(), maxpool(),
        conv(32), relu(), maxpool(),
        dense(64), relu(),
        dense(classes),
        LayerSpec("softmax"),
    )
    return NetworkSpec(layers=layers, input_hw=input_hw, in_channels=in_channels, classes=classes)


def init_params(spec: NetworkSpec, seed: int) -> Params:
    """He fan-in normal init for weights, zero biases, float32, layer order."""
    rng = np.random.default_rng(seed)
    params: Params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            params[name] = (rng.standard_normal(shape, dtype=np.float32) * np.float32(std))
        else:
            params[name] = np.zeros(shape, dtype=np.float32)
    return params


def check_params(spec: NetworkSpec, params: Params) -> None:
    expected = spec.param_shapes()
    if set(params) != set(expected):
        raise ShapeError(
            f"parameter keys {sorted(params)} do not match spec keys {sorted(expected)}")
    for name, shape in expected.items():
        if tuple(params[name].shape) != shape:
            raise ShapeError(f"{name}: parameter shape {params[name].shape} != spec shape {shape}")


@dataclass
class ForwardCache:
    """Per-layer tensors needed by the backward pass, plus the final logits."""

    inputs: list[np.ndarray | None] = field(default_factory=list)
    masks: dict[int, np.ndarray] = field(default_factory=dict)
    logits: np.ndarray | None = None
    single: bool = False
    n_layers: int = 0


def network_forward(spec: NetworkSpec, params: Params, x: np.ndarray
                    ) -> tuple[np.ndarray, ForwardCache]:
    """Run the network. Returns (class scores after softmax, cache for backward).

    Accepts a single [C,H,W] sample or a [B,C,H,W] batch; pure function of its
    arguments.
    """
    check_params(spec, params)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1:] != (spec.in_channels, *spec.input_hw):
        raise ShapeError(
            f"input shape {tuple(x.shape[1:])} does not match spec input "
            f"{(spec.in_channels, *spec.input_hw)}")

    cache = ForwardCache(single=single, n_layers=len(spec.layers))
    for i, layer in enumerate(spec.layers):
        if layer.kind == "conv":
            cache.inputs.append(x)
            x = conv2d_forward(x, params[f"conv{i}.w"], params[f"conv{i}.b"], stride=1, pad=1)
        elif layer.kind == "relu":
            cache.inputs.append(x)
            x = relu_forward(x)
        elif layer.kind == "maxpool":
            cache.inputs.append(x)
            x, mask = maxpool2x2_forward(x)
            cache.masks[i] = mask
        elif layer.kind == "dense":
            if x.ndim != 2:
                x = x.reshape(x.shape[0], -1)
            cache.inputs.append(x)
            x = dense_forward(x, params[f"dense{i}.w"], params[f"dense{i}.b"])
        elif layer.kind == "softmax":
            cache.inputs.append(None)
            cache.logits = x
            x = softmax(x)
    scores = x[0] if single else x
    return scores, cache


def network_backward(spec: NetworkSpec, params: Params, cache: ForwardCache,
                     grad_logits: np.ndarray) -> Params:
    """Backpropagate a logits gradient; returns gradients keyed like params."""
    check_params(spec, params)
    if cache.n_layers != len(spec.layers) or len(cache.inputs) != len(spec.layers):
        raise ShapeError(
            f"cache holds {len(cache.inputs)} layer entries but spec has {len(spec.layers)}")
    if cache.logits is None:
        raise ShapeError("cache has no logits; was it produced by network_forward?")

    g = grad_logits[None] if grad_logits.ndim == 1 else grad_logits
    if g.shape != cache.logits.shape:
        raise ShapeError(
            f"grad_logits shape {grad_logits.shape} does not match logits shape "
            f"{cache.logits.shape}")

    grads: Params = {}
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        if layer.kind == "softmax":
            continue
        x_in = cache.inputs[i]
        if layer.kind == "dense":
            g, dw, db = dense_backward(x_in, params[f"dense{i}.w"], g)
            grads[f"dense{i}.w"] = dw
            grads[f"dense{i}.b"] = db
        elif layer.kind == "relu":
            if g.shape != x_in.shape:
                g = g.reshape(x_in.shape)
            g = relu_backward(x_in, g)
        elif layer.kind == "maxpool":
            if g.ndim == 2:
                g = g.reshape(cache.masks[i].shape)
            g = maxpool2x2_backward(cache.masks[i], g)
        elif layer.kind == "conv":
            if g.ndim == 2:
                prev = cache.inputs[i]
                g = g.reshape(prev.shape[0], layer.out_channels, prev.shape[2], prev.shape[3])
            g, dw, db = conv2d_backward(x_in, params[f"conv{i}.w"], g, stride=1, pad=1)
            grads[f"conv{i}.w"] = dw
            grads[f"conv{i}.b"] = db
    return {name: grads[name] for name in params}
