"""Network assembly, reverse-mode gradients, and momentum-SGD training.

The forward pass caches every intermediate needed by the backward pass; the
backward pass accumulates parameter gradients into a ParameterStore. Taps
feed the head from several stage outputs, so a stage output can receive
gradient both from the next stage and from its tap; those contributions add.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .arch import ArchitectureSpec, freeze_prefixes, head_input_width, parameter_shapes, tap_width
from .validation import DimensionError, as_tensor4d, check_labels


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    trainable: bool = True
    grad: np.ndarray = field(init=False)
    velocity: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)
        self.velocity = np.zeros_like(self.value)


class ParameterStore:
    """Ordered name -> Parameter map with gradient bookkeeping."""

    def __init__(self, params: list[Parameter]):
        self._params: dict[str, Parameter] = {}
        for p in params:
            if p.name in self._params:
                raise ValueError(f"duplicate parameter name {p.name!r}")
            self._params[p.name] = p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def num_parameters(self, trainable_only: bool = False) -> int:
        return sum(
            p.value.size for p in self._params.values() if p.trainable or not trainable_only
        )


def init_parameters(spec: ArchitectureSpec, seed: int = 0) -> ParameterStore:
    """Uniform weight init with bound sqrt(6 / fan_in); biases start at zero.

    Draw order follows parameter_shapes(spec), so a seed fully determines
    every weight. Backbone entries start non-trainable when the
    ArchitectureSpec marks the backbone frozen.
    """
    rng = np.random.default_rng(seed)
    params = []
    for name, shape in parameter_shapes(spec).items():
        if name.endswith(".bias"):
            value = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            value = rng.uniform(-bound, bound, size=shape)
        trainable = not (spec.frozen_backbone and name.startswith(freeze_prefixes()))
        params.append(Parameter(name, value, trainable))
    return ParameterStore(params)


def freeze_backbone(store: ParameterStore) -> None:
    for p in store:
        if p.name.startswith(freeze_prefixes()):
            p.trainable = False


def copy_backbone(src: ParameterStore, dst: ParameterStore) -> None:
    """Overwrite dst's backbone weights with src's; head weights stay put."""
    for name in dst.names():
        if not name.startswith(freeze_prefixes()):
            continue
        if name not in src:
            raise ValueError(f"source store lacks backbone parameter {name!r}")
        if src[name].value.shape != dst[name].value.shape:
            raise DimensionError(
                f"backbone parameter {name!r} shape mismatch: "
                f"{src[name].value.shape} vs {dst[name].value.shape}"
            )
        dst[name].value = src[name].value.copy()


class Network:
    """Executable form of an ArchitectureSpec."""

    def __init__(self, spec: ArchitectureSpec):
        self.spec = spec

    def forward(self, x, store: ParameterStore):
        """Return (logits, cache); cache feeds backward()."""
        spec = self.spec
        x = as_tensor4d(x, "network input")
        if x.shape[1] != spec.in_channels:
            raise DimensionError(
                f"network expects {spec.in_channels} input channels, got {x.shape[1]}"
            )
        if x.shape[2] != spec.input_size or x.shape[3] != spec.input_size:
            raise DimensionError(
                f"network expects {spec.input_size}x{spec.input_size} input, "
                f"got {x.shape[2]}x{x.shape[3]}"
            )
        stage_outputs = []
        stage_caches = []
        cur = x
        for si, stage in enumerate(spec.stages):
            conv_caches = []
            for ci, conv in enumerate(stage.convs):
                w = store[f"stage{si}.conv{ci}.weight"].value
                b = store[f"stage{si}.conv{ci}.bias"].value
                z = ops.conv2d(cur, w, b, pad="same", mode=spec.pad_mode)
                conv_caches.append((cur, z))
                cur = ops.relu(z)
            pool_in = cur
            if stage.pool is not None:
                cur = ops.pool2d(cur, stage.pool)
            stage_caches.append((conv_caches, pool_in))
            stage_outputs.append(cur)

        parts = []
        for tap in spec.taps:
            feat = stage_outputs[tap.stage]
            if tap.reduce == "gap":
                parts.append(ops.flatten(ops.global_avg_pool(feat)))
            else:
                parts.append(ops.flatten(feat))
        head_in = ops.concat(parts)
        logits = ops.dense(head_in, store["head.weight"].value, store["head.bias"].value)
        cache = (x, stage_caches, stage_outputs, head_in)
        return logits, cache

    def backward(self, grad_logits, cache, store: ParameterStore, needs_input_grad: bool = False):
        """Accumulate parameter gradients; optionally return grad w.r.t. input.

        When every stage parameter is frozen and the input gradient is not
        requested, the walk back through the stages is skipped entirely.
        """
        spec = self.spec
        x, stage_caches, stage_outputs, head_in = cache

        g_head_in, g_w, g_b = ops.dense_backward(
            grad_logits, head_in, store["head.weight"].value
        )
        store["head.weight"].grad += g_w
        store["head.bias"].grad += g_b

        backbone_live = needs_input_grad or any(
            p.trainable for p in store if not p.name.startswith("head.")
        )
        if not backbone_live:
            return None

        grad_stage_out = [np.zeros_like(s) for s in stage_outputs]
        widths = [tap_width(spec, tap) for tap in spec.taps]
        for tap, g_part in zip(spec.taps, ops.split_concat_grad(g_head_in, widths)):
            feat = stage_outputs[tap.stage]
            if tap.reduce == "gap":
                grad_stage_out[tap.stage] += ops.global_avg_pool_backward(g_part, feat.shape)
            else:
                grad_stage_out[tap.stage] += ops.flatten_backward(g_part, feat.shape)

        g = None
        for si in range(len(spec.stages) - 1, -1, -1):
            stage = spec.stages[si]
            conv_caches, pool_in = stage_caches[si]
            g = grad_stage_out[si]
            if stage.pool is not None:
                g = ops.pool2d_backward(g, pool_in, stage.pool)
            for ci in range(len(stage.convs) - 1, -1, -1):
                conv_in, z = conv_caches[ci]
                g = ops.relu_backward(g, z)
                w = store[f"stage{si}.conv{ci}.weight"]
                b = store[f"stage{si}.conv{ci}.bias"]
                g, g_w, g_b = ops.conv2d_backward(
                    g, conv_in, w.value, pad="same", mode=spec.pad_mode
                )
                w.grad += g_w
                b.grad += g_b
            if si > 0:
                grad_stage_out[si - 1] += g
        return g if needs_input_grad else None

    def stage_features(self, x, store: ParameterStore) -> list[np.ndarray]:
        """Per-stage output maps for an image batch (no head applied)."""
        _, cache = self.forward(x, store)
        return cache[2]

    def logits(self, x, store: ParameterStore, batch_size: int = 64) -> np.ndarray:
        x = as_tensor4d(x, "network input")
        chunks = [
            self.forward(x[i : i + batch_size], store)[0]
            for i in range(0, x.shape[0], batch_size)
        ]
        return np.concatenate(chunks, axis=0)

    def predict(self, x, store: ParameterStore, batch_size: int = 64) -> np.ndarray:
        return self.logits(x, store, batch_size).argmax(axis=1)


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = check_labels(labels, z.shape[1])
    if z.shape[0] != y.shape[0]:
        raise DimensionError(f"{z.shape[0]} logit rows but {y.shape[0]} labels")
    p = ops.softmax(z)
    n = z.shape[0]
    # log-sum-exp form: exact even where a softmax probability underflows.
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    loss = float((lse - z[np.arange(n), y]).mean())
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def accuracy(logits, labels) -> float:
    z = np.asarray(logits, dtype=np.float64)
    y = check_labels(labels, z.shape[1])
    return float((z.argmax(axis=1) == y).mean())


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def sgd_step(store: ParameterStore, lr: float, momentum: float) -> None:
    """v <- momentum*v + grad; value <- value - lr*v, for trainable parameters."""
    for p in store:
        if not p.trainable:
            continue
        p.velocity = momentum * p.velocity + p.grad
        p.value = p.value - lr * p.velocity


def train(
    network: Network,
    store: ParameterStore,
    images,
    labels,
    config: TrainConfig,
) -> dict:
    """Minibatch SGD; returns per-epoch mean loss and training accuracy."""
    x = as_tensor4d(images, "training images")
    y = check_labels(labels, network.spec.num_classes)
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"{x.shape[0]} images but {y.shape[0]} labels")
    if x.shape[0] == 0:
        raise ValueError("training set is empty")

    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    history = {"loss": [], "accuracy": []}
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            store.zero_grads()
            logits, cache = network.forward(xb, store)
            loss, grad = cross_entropy(logits, yb)
            network.backward(grad, cache, store)
            sgd_step(store, config.lr, config.momentum)
            total_loss += loss * idx.size
            total_correct += int((logits.argmax(axis=1) == yb).sum())
        history["loss"].append(total_loss / n)
        history["accuracy"].append(total_correct / n)
    return history


def evaluate(
    network: Network, store: ParameterStore, images, labels, batch_size: int = 64
) -> tuple[float, float]:
    """Mean cross-entropy loss and accuracy without touching gradients."""
    x = as_tensor4d(images, "images")
    y = check_labels(labels, network.spec.num_classes)
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"{x.shape[0]} images but {y.shape[0]} labels")
    total_loss = 0.0
    total_correct = 0
    for i in range(0, x.shape[0], batch_size):
        logits, _ = network.forward(x[i : i + batch_size], store)
        loss, _ = cross_entropy(logits, y[i : i + batch_size])
        total_loss += loss * logits.shape[0]
        total_correct += int((logits.argmax(axis=1) == y[i : i + batch_size]).sum())
    n = x.shape[0]
    return total_loss / n, total_correct / n
