"""Forward-only CTF-Net in float32 numpy.

Layout: four compositional convolution blocks (CCB) lift each point to 512
channels, a max over points gives a 512-d summary, a small MLP turns it into
a 3x3 transform applied to the input points, and five more CCBs followed by
a max give the 1024-d group descriptor.

A CCB runs a kernel-3 and a kernel-5 convolution along the point axis, fuses
their concatenation with a kernel-1 convolution, then applies ELU and an
inference-mode batch norm.
"""

from dataclasses import dataclass, field

import numpy as np

from ri3d.errors import ShapeError, TensorShapeMismatch
from ri3d.features import rifw
from ri3d.rng import RngStream

STAGE1_WIDTHS = (3, 64, 128, 256, 512)
STAGE2_WIDTHS = (3, 64, 128, 256, 512, 1024)
MLP_WIDTHS = (512, 256, 9)
BN_EPS = np.float32(1e-5)


@dataclass
class Conv1dParams:
    weight: np.ndarray  # (kernel_size, in_channels, out_channels)
    bias: np.ndarray  # (out_channels,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weight.ndim != 3 or self.bias.shape != (self.weight.shape[2],):
            raise ShapeError(f"conv weight {self.weight.shape} / bias {self.bias.shape} mismatch")
        if self.kernel_size not in (1, 3, 5):
            raise ShapeError(f"unsupported kernel size {self.kernel_size}")

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[2]

    @classmethod
    def zeros(cls, k: int, cin: int, cout: int) -> "Conv1dParams":
        return cls(np.zeros((k, cin, cout), np.float32), np.zeros(cout, np.float32))


@dataclass
class CcbParams:
    conv3: Conv1dParams
    conv5: Conv1dParams
    fuse: Conv1dParams
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray

    def __post_init__(self):
        mid = self.conv3.out_channels
        if self.conv5.out_channels != mid or self.fuse.in_channels != 2 * mid:
            raise ShapeError("CCB branch widths do not match the fuse layer")
        if self.conv3.in_channels != self.conv5.in_channels:
            raise ShapeError("CCB branches disagree on input channels")
        for name in ("bn_gamma", "bn_beta", "bn_mean", "bn_var"):
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            if arr.shape != (self.fuse.out_channels,):
                raise ShapeError(f"{name} has shape {arr.shape}, expected ({self.fuse.out_channels},)")
            setattr(self, name, arr)

    @property
    def in_channels(self) -> int:
        return self.conv3.in_channels

    @property
    def out_channels(self) -> int:
        return self.fuse.out_channels

    @classmethod
    def identity_bn(cls, cin: int, cout: int) -> "CcbParams":
        mid = cout // 2
        return cls(
            conv3=Conv1dParams.zeros(3, cin, mid),
            conv5=Conv1dParams.zeros(5, cin, mid),
            fuse=Conv1dParams.zeros(1, 2 * mid, cout),
            bn_gamma=np.ones(cout, np.float32),
            bn_beta=np.zeros(cout, np.float32),
            bn_mean=np.zeros(cout, np.float32),
            bn_var=np.ones(cout, np.float32),
        )

    def named(self, prefix: str):
        for conv in ("conv3", "conv5", "fuse"):
            p = getattr(self, conv)
            yield f"{prefix}.{conv}.w", p.weight
            yield f"{prefix}.{conv}.b", p.bias
        for stat in ("gamma", "beta", "mean", "var"):
            yield f"{prefix}.bn.{stat}", getattr(self, f"bn_{stat}")


@dataclass
class DenseParams:
    weight: np.ndarray  # (in, out)
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"dense weight {self.weight.shape} / bias {self.bias.shape} mismatch")


@dataclass
class CtfNetParams:
    stage1: list[CcbParams] = field(default_factory=list)
    mlp: list[DenseParams] = field(default_factory=list)
    stage2: list[CcbParams] = field(default_factory=list)

    def __post_init__(self):
        _check_chain(self.stage1, STAGE1_WIDTHS, "stage1")
        _check_chain(self.stage2, STAGE2_WIDTHS, "stage2")
        shapes = [(d.weight.shape[0], d.weight.shape[1]) for d in self.mlp]
        expected = list(zip(MLP_WIDTHS[:-1], MLP_WIDTHS[1:]))
        if shapes != expected:
            raise ShapeError(f"mlp shapes {shapes}, expected {expected}")

    @classmethod
    def zeros(cls) -> "CtfNetParams":
        return cls(
            stage1=[CcbParams.identity_bn(a, b) for a, b in zip(STAGE1_WIDTHS, STAGE1_WIDTHS[1:])],
            mlp=[DenseParams(np.zeros((a, b), np.float32), np.zeros(b, np.float32))
                 for a, b in zip(MLP_WIDTHS, MLP_WIDTHS[1:])],
            stage2=[CcbParams.identity_bn(a, b) for a, b in zip(STAGE2_WIDTHS, STAGE2_WIDTHS[1:])],
        )

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """All tensors with their RIFW names, in declaration order."""
        out = []
        for i, ccb in enumerate(self.stage1):
            out.extend(ccb.named(f"s1.ccb{i}"))
        for i, d in enumerate(self.mlp):
            out.append((f"mlp.{i}.w", d.weight))
            out.append((f"mlp.{i}.b", d.bias))
        for i, ccb in enumerate(self.stage2):
            out.extend(ccb.named(f"s2.ccb{i}"))
        return out

    @property
    def parameter_count(self) -> int:
        return sum(arr.size for _, arr in self.named_tensors())

    @classmethod
    def from_named(cls, tensors: dict) -> "CtfNetParams":
        template = cls.zeros().named_tensors()
        expected = [name for name, _ in template]
        if sorted(tensors) != sorted(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise TensorShapeMismatch(f"tensor names differ: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, ref in template:
            if tensors[name].shape != ref.shape:
                raise TensorShapeMismatch(f"{name}: stored shape {tensors[name].shape}, expected {ref.shape}")

        def ccb(prefix):
            t = lambda s: tensors[f"{prefix}.{s}"]  # noqa: E731
            return CcbParams(
                conv3=Conv1dParams(t("conv3.w"), t("conv3.b")),
                conv5=Conv1dParams(t("conv5.w"), t("conv5.b")),
                fuse=Conv1dParams(t("fuse.w"), t("fuse.b")),
                bn_gamma=t("bn.gamma"), bn_beta=t("bn.beta"), bn_mean=t("bn.mean"), bn_var=t("bn.var"),
            )

        return cls(
            stage1=[ccb(f"s1.ccb{i}") for i in range(len(STAGE1_WIDTHS) - 1)],
            mlp=[DenseParams(tensors[f"mlp.{i}.w"], tensors[f"mlp.{i}.b"]) for i in range(len(MLP_WIDTHS) - 1)],
            stage2=[ccb(f"s2.ccb{i}") for i in range(len(STAGE2_WIDTHS) - 1)],
        )


def _check_chain(blocks, widths, label):
    got = [(b.in_channels, b.out_channels) for b in blocks]
    expected = list(zip(widths[:-1], widths[1:]))
    if got != expected:
        raise ShapeError(f"{label} widths {got}, expected {expected}")


def init_weights(seed: int = 0) -> CtfNetParams:
    """Glorot-uniform weights from the SplitMix64 stream.

    Draws walk the tensors in declaration order; each weight element (row-major)
    is ``(2u - 1) * sqrt(6 / (fan_in + fan_out))``. Biases are zero, batch norms
    are identity, and the last MLP layer is all zeros so the learned transform
    starts at the identity.
    """
    rng = RngStream(seed)
    params = CtfNetParams.zeros()
    last_mlp = f"mlp.{len(MLP_WIDTHS) - 2}."
    for name, arr in params.named_tensors():
        if not name.endswith(".w") or name.startswith(last_mlp):
            continue
        if arr.ndim == 3:
            k, cin, cout = arr.shape
            fan_in, fan_out = k * cin, k * cout
        else:
            fan_in, fan_out = arr.shape
        s = np.sqrt(6.0 / (fan_in + fan_out))
        u = rng.uniform_array(arr.size)
        arr[...] = ((2.0 * u - 1.0) * s).astype(np.float32).reshape(arr.shape)
    return params


def save_weights(params: CtfNetParams, path) -> None:
    rifw.save(params.named_tensors(), path)


def load_weights(path) -> CtfNetParams:
    return CtfNetParams.from_named(rifw.load(path))


# forward pass

def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0)))


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Rows of ``k`` zero-padded neighbouring points, tap-major then channel."""
    n, c = x.shape
    half = k // 2
    padded = np.zeros((n + 2 * half, c), dtype=x.dtype)
    padded[half:half + n] = x
    return np.ascontiguousarray(np.lib.stride_tricks.sliding_window_view(padded, (k, c))[:, 0]).reshape(n, k * c)


def conv1d(x: np.ndarray, p: Conv1dParams) -> np.ndarray:
    """'Same'-padded convolution along the point (row) axis.

    ``out[i, o] = b[o] + sum_{t, c} x[i + t - k // 2, c] * W[t, c, o]``
    with out-of-range rows read as zero.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != p.in_channels:
        raise ShapeError(f"conv expects {p.in_channels} input channels, got shape {x.shape}")
    k = p.kernel_size
    cols = x if k == 1 else _im2col(x, k)
    return cols @ p.weight.reshape(k * p.in_channels, p.out_channels) + p.bias


def batch_norm(x: np.ndarray, gamma, beta, mean, var) -> np.ndarray:
    return gamma * (x - mean) / np.sqrt(var + BN_EPS) + beta


def ccb_forward(x: np.ndarray, p: CcbParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != p.in_channels:
        raise ShapeError(f"CCB expects {p.in_channels} input channels, got shape {x.shape}")
    cols = _im2col(x, 5)
    cin = p.in_channels
    # the kernel-3 window is the middle three taps of the kernel-5 window
    y3 = cols[:, cin:4 * cin] @ p.conv3.weight.reshape(3 * cin, -1) + p.conv3.bias
    y5 = cols @ p.conv5.weight.reshape(5 * cin, -1) + p.conv5.bias
    y = conv1d(np.concatenate([y3, y5], axis=1), p.fuse)
    return batch_norm(elu(y), p.bn_gamma, p.bn_beta, p.bn_mean, p.bn_var)


def ctf_stage1(points: np.ndarray, params: CtfNetParams) -> np.ndarray:
    x = np.asarray(points, dtype=np.float32)
    for block in params.stage1:
        x = ccb_forward(x, block)
    return x.max(axis=0)


def mlp_transform(v: np.ndarray, params: CtfNetParams) -> np.ndarray:
    """3x3 matrix ``reshape(mlp(v)) + I``; ELU between dense layers."""
    h = np.asarray(v, dtype=np.float32)
    for i, layer in enumerate(params.mlp):
        h = h @ layer.weight + layer.bias
        if i < len(params.mlp) - 1:
            h = elu(h)
    return h.reshape(3, 3) + np.eye(3, dtype=np.float32)


def apply_transform(points: np.ndarray, v: np.ndarray, params: CtfNetParams) -> np.ndarray:
    points = np.asarray(points, dtype=np.float32)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"expected (n, 3) points, got {points.shape}")
    return points @ mlp_transform(v, params)


def ctf_stage2(f: np.ndarray, params: CtfNetParams) -> np.ndarray:
    x = np.asarray(f, dtype=np.float32)
    for block in params.stage2:
        x = ccb_forward(x, block)
    return x.max(axis=0)


def ctfnet_forward(points: np.ndarray, params: CtfNetParams) -> np.ndarray:
    """1024-d descriptor of one group's local points."""
    points = np.asarray(points, dtype=np.float32)
    return ctf_stage2(apply_transform(points, ctf_stage1(points, params), params), params)
