"""Transformer encoder classifier: forward pass, exact reverse-mode gradients,
and binary checkpoint I/O.

Everything is plain numpy. Shapes: (B, T, D) batch/sequence/hidden and
(B, h, T, d) per attention head. Default dtype is float64 so finite-difference
gradient checks are meaningful; float32 is fine for bulk runs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .tokenizer import TokenSequence

MAGIC = b"PHL1"
NEG_INF = -1e9  # additive pre-softmax mask; underflows to exact 0 after exp
LN_EPS = 1e-12


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class StaleCacheError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_positions: int
    hidden_dim: int
    num_heads: int
    num_layers: int
    ffn_dim: int
    num_classes: int = 2
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )
        if min(self.vocab_size, self.max_positions, self.hidden_dim, self.num_layers + 1) < 1:
            raise ConfigError("config dimensions must be positive")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads

    @classmethod
    def paper_scale(cls, vocab_size: int = 30522) -> "ModelConfig":
        # 6 layers x 12 heads x 768 wide, 512 positions: ~66M parameters.
        return cls(
            vocab_size=vocab_size,
            max_positions=512,
            hidden_dim=768,
            num_heads=12,
            num_layers=6,
            ffn_dim=3072,
        )

    @classmethod
    def toy(cls, vocab_size: int = 120) -> "ModelConfig":
        return cls(
            vocab_size=vocab_size,
            max_positions=32,
            hidden_dim=16,
            num_heads=2,
            num_layers=1,
            ffn_dim=32,
            dropout_rate=0.0,
        )


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape table; the checkpoint format serializes in this order."""
    d, f, c = config.hidden_dim, config.ffn_dim, config.num_classes
    shapes: dict[str, tuple[int, ...]] = {
        "token_embedding": (config.vocab_size, d),
        "position_embedding": (config.max_positions, d),
    }
    for i in range(config.num_layers):
        p = f"layer{i}."
        shapes[p + "attn_q.weight"] = (d, d)
        shapes[p + "attn_q.bias"] = (d,)
        shapes[p + "attn_k.weight"] = (d, d)
        shapes[p + "attn_k.bias"] = (d,)
        shapes[p + "attn_v.weight"] = (d, d)
        shapes[p + "attn_v.bias"] = (d,)
        shapes[p + "attn_out.weight"] = (d, d)
        shapes[p + "attn_out.bias"] = (d,)
        shapes[p + "attn_norm.scale"] = (d,)
        shapes[p + "attn_norm.shift"] = (d,)
        shapes[p + "ffn_in.weight"] = (d, f)
        shapes[p + "ffn_in.bias"] = (f,)
        shapes[p + "ffn_out.weight"] = (f, d)
        shapes[p + "ffn_out.bias"] = (d,)
        shapes[p + "ffn_norm.scale"] = (d,)
        shapes[p + "ffn_norm.shift"] = (d,)
    shapes["prehead.weight"] = (d, d)
    shapes["prehead.bias"] = (d,)
    shapes["classifier.weight"] = (d, c)
    shapes["classifier.bias"] = (c,)
    return shapes


def parameter_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(config).values())


@dataclass
class ModelParameters:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.copy() for k, v in self.tensors.items()})


GradientSet = dict[str, np.ndarray]


def _truncated_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    # Redraw anything beyond two standard deviations (BERT-style init).
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(dtype)


def init_parameters(config: ModelConfig, seed: int, dtype=np.float64) -> ModelParameters:
    """Truncated-normal weights (std 0.02), zero biases, unit layer-norm scales."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".scale"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif name.endswith((".bias", ".shift")):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            tensors[name] = _truncated_normal(rng, shape, 0.02, dtype)
    return ModelParameters(config=config, tensors=tensors)


# ---------------------------------------------------------------- primitives


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    zs = z - z.max(axis=axis, keepdims=True)
    e = np.exp(zs)
    return e / e.sum(axis=axis, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def _layer_norm(x, scale, shift):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + LN_EPS)
    xhat = (x - mu) / sigma
    return xhat * scale + shift, (xhat, sigma)


def _layer_norm_backward(dy, cache, scale):
    xhat, sigma = cache
    ghat = dy * scale
    m1 = ghat.mean(axis=-1, keepdims=True)
    m2 = (ghat * xhat).mean(axis=-1, keepdims=True)
    dx = (ghat - m1 - xhat * m2) / sigma
    axes = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=axes), dy.sum(axis=axes)


def _dropout(x, rate, rng):
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


# ------------------------------------------------------------------ forward


@dataclass
class ForwardOutput:
    logits: np.ndarray
    probabilities: np.ndarray
    cache: dict | None = field(default=None, repr=False)


def batch_arrays(batch: Sequence[TokenSequence]) -> tuple[np.ndarray, np.ndarray]:
    ids = np.array([seq.input_ids for seq in batch], dtype=np.int64)
    mask = np.array([seq.attention_mask for seq in batch], dtype=np.float64)
    return ids, mask


def embed(params: ModelParameters, ids: np.ndarray) -> np.ndarray:
    """Token + learned position embeddings, shape (B, T, D)."""
    t = ids.shape[1]
    if t > params.config.max_positions:
        raise ValueError(
            f"sequence length {t} exceeds max_positions {params.config.max_positions}"
        )
    return params.tensors["token_embedding"][ids] + params.tensors["position_embedding"][:t]


def forward(
    params: ModelParameters,
    batch: Sequence[TokenSequence],
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardOutput:
    ids, mask = batch_arrays(batch)
    e = embed(params, ids)
    out = forward_from_embeddings(params, e, mask, train_mode=train_mode, rng=rng)
    out.cache["ids"] = ids
    return out


def forward_from_embeddings(
    params: ModelParameters,
    embeddings: np.ndarray,
    mask: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardOutput:
    """Run the encoder stack and classification head from given embeddings.

    Exposed separately so attribution code can walk the embedding path.
    """
    cfg = params.config
    p = params.tensors
    drop = train_mode and cfg.dropout_rate > 0.0
    if drop and rng is None:
        rng = np.random.default_rng()

    b, t, d = embeddings.shape
    if t > cfg.max_positions:
        raise ValueError(f"sequence length {t} exceeds max_positions {cfg.max_positions}")
    h, hd = cfg.num_heads, cfg.head_dim
    mask = np.asarray(mask, dtype=embeddings.dtype)
    mask_add = (1.0 - mask)[:, None, None, :] * NEG_INF  # (B,1,1,T) on the key axis

    cache: dict = {"mask": mask, "train_mode": train_mode, "embeddings": embeddings, "layers": []}

    x = embeddings
    if drop:
        x, keep = _dropout(x, cfg.dropout_rate, rng)
        cache["embed_keep"] = keep

    for i in range(cfg.num_layers):
        pre = f"layer{i}."
        lc: dict = {"x_in": x}
        q = x @ p[pre + "attn_q.weight"] + p[pre + "attn_q.bias"]
        k = x @ p[pre + "attn_k.weight"] + p[pre + "attn_k.bias"]
        v = x @ p[pre + "attn_v.weight"] + p[pre + "attn_v.bias"]

        def heads(m):
            return m.reshape(b, t, h, hd).transpose(0, 2, 1, 3)

        qh, kh, vh = heads(q), heads(k), heads(v)
        scores = qh @ kh.transpose(0, 1, 3, 2) / np.sqrt(hd) + mask_add
        probs = softmax(scores, axis=-1)  # masked keys get exactly 0
        ctx = probs @ vh  # (B,h,T,hd)
        merged = ctx.transpose(0, 2, 1, 3).reshape(b, t, d)
        attn = merged @ p[pre + "attn_out.weight"] + p[pre + "attn_out.bias"]
        if drop:
            attn, keep = _dropout(attn, cfg.dropout_rate, rng)
            lc["attn_keep"] = keep
        h1, ln1_cache = _layer_norm(
            x + attn, p[pre + "attn_norm.scale"], p[pre + "attn_norm.shift"]
        )

        ffn_pre = h1 @ p[pre + "ffn_in.weight"] + p[pre + "ffn_in.bias"]
        ffn_act = gelu(ffn_pre)
        ffn_out = ffn_act @ p[pre + "ffn_out.weight"] + p[pre + "ffn_out.bias"]
        if drop:
            ffn_out, keep = _dropout(ffn_out, cfg.dropout_rate, rng)
            lc["ffn_keep"] = keep
        h2, ln2_cache = _layer_norm(
            h1 + ffn_out, p[pre + "ffn_norm.scale"], p[pre + "ffn_norm.shift"]
        )

        lc.update(
            qh=qh, kh=kh, vh=vh, probs=probs, merged=merged,
            h1=h1, ln1=ln1_cache, ffn_pre=ffn_pre, ffn_act=ffn_act, ln2=ln2_cache,
        )
        cache["layers"].append(lc)
        x = h2

    cls_vec = x[:, 0, :]
    pre_lin = cls_vec @ p["prehead.weight"] + p["prehead.bias"]
    pre_act = np.maximum(pre_lin, 0.0)
    logits = pre_act @ p["classifier.weight"] + p["classifier.bias"]
    probs_out = softmax(logits, axis=-1)

    cache.update(final_hidden=x, cls_vec=cls_vec, pre_lin=pre_lin, pre_act=pre_act)
    return ForwardOutput(logits=logits, probabilities=probs_out, cache=cache)


def cross_entropy_loss(output: ForwardOutput, labels: Sequence[int]) -> float:
    """Mean negative log-probability of the true class."""
    probs = output.probabilities
    if len(labels) != probs.shape[0]:
        raise ValueError(f"{len(labels)} labels for batch of {probs.shape[0]}")
    labels_arr = np.asarray(labels, dtype=np.int64)
    if labels_arr.min() < 0 or labels_arr.max() >= probs.shape[1]:
        raise ValueError(f"labels must lie in [0, {probs.shape[1]}), got {labels}")
    picked = probs[np.arange(len(labels_arr)), labels_arr]
    return float(-np.log(picked).mean())


# ----------------------------------------------------------------- backward


def backward(
    params: ModelParameters, output: ForwardOutput, labels: Sequence[int]
) -> GradientSet:
    """Exact gradients of the mean cross-entropy loss for every parameter."""
    cache = output.cache
    if cache is None:
        raise StaleCacheError("forward cache missing; rerun forward() before backward()")
    b = output.probabilities.shape[0]
    if len(labels) != b:
        raise StaleCacheError(f"cache holds batch of {b}, got {len(labels)} labels")
    labels_arr = np.asarray(labels, dtype=np.int64)
    dlogits = output.probabilities.copy()
    dlogits[np.arange(b), labels_arr] -= 1.0
    dlogits /= b
    grads, _ = _backward_core(params, cache, dlogits, want_param_grads=True)
    return grads


def grad_wrt_embeddings(
    params: ModelParameters, output: ForwardOutput, target: int
) -> np.ndarray:
    """d(target logit)/d(embeddings) for every batch row; parameters untouched."""
    cache = output.cache
    if cache is None:
        raise StaleCacheError("forward cache missing; rerun forward() before backward()")
    b, c = output.logits.shape
    dlogits = np.zeros((b, c), dtype=output.logits.dtype)
    dlogits[:, target] = 1.0
    _, d_embed = _backward_core(params, cache, dlogits, want_param_grads=False)
    return d_embed


def _backward_core(params, cache, dlogits, want_param_grads: bool):
    cfg = params.config
    p = params.tensors
    grads: GradientSet = (
        {name: np.zeros_like(t) for name, t in params.tensors.items()}
        if want_param_grads
        else {}
    )

    pre_act, pre_lin, cls_vec = cache["pre_act"], cache["pre_lin"], cache["cls_vec"]
    x_final = cache["final_hidden"]
    b, t, d = x_final.shape
    h, hd = cfg.num_heads, cfg.head_dim

    if want_param_grads:
        grads["classifier.weight"] = pre_act.T @ dlogits
        grads["classifier.bias"] = dlogits.sum(axis=0)
    d_pre_act = dlogits @ p["classifier.weight"].T
    d_pre_lin = d_pre_act * (pre_lin > 0.0)
    if want_param_grads:
        grads["prehead.weight"] = cls_vec.T @ d_pre_lin
        grads["prehead.bias"] = d_pre_lin.sum(axis=0)
    d_cls = d_pre_lin @ p["prehead.weight"].T

    dx = np.zeros_like(x_final)
    dx[:, 0, :] = d_cls

    for i in reversed(range(cfg.num_layers)):
        pre = f"layer{i}."
        lc = cache["layers"][i]

        d_sum2, d_scale2, d_shift2 = _layer_norm_backward(
            dx, lc["ln2"], p[pre + "ffn_norm.scale"]
        )
        if want_param_grads:
            grads[pre + "ffn_norm.scale"] = d_scale2
            grads[pre + "ffn_norm.shift"] = d_shift2
        d_h1 = d_sum2.copy()
        d_ffn_out = d_sum2
        if "ffn_keep" in lc:
            d_ffn_out = d_ffn_out * lc["ffn_keep"]

        flat = lambda a: a.reshape(-1, a.shape[-1])
        if want_param_grads:
            grads[pre + "ffn_out.weight"] = flat(lc["ffn_act"]).T @ flat(d_ffn_out)
            grads[pre + "ffn_out.bias"] = flat(d_ffn_out).sum(axis=0)
        d_ffn_act = d_ffn_out @ p[pre + "ffn_out.weight"].T
        d_ffn_pre = d_ffn_act * gelu_grad(lc["ffn_pre"])
        if want_param_grads:
            grads[pre + "ffn_in.weight"] = flat(lc["h1"]).T @ flat(d_ffn_pre)
            grads[pre + "ffn_in.bias"] = flat(d_ffn_pre).sum(axis=0)
        d_h1 += d_ffn_pre @ p[pre + "ffn_in.weight"].T

        d_sum1, d_scale1, d_shift1 = _layer_norm_backward(
            d_h1, lc["ln1"], p[pre + "attn_norm.scale"]
        )
        if want_param_grads:
            grads[pre + "attn_norm.scale"] = d_scale1
            grads[pre + "attn_norm.shift"] = d_shift1
        d_x = d_sum1.copy()
        d_attn = d_sum1
        if "attn_keep" in lc:
            d_attn = d_attn * lc["attn_keep"]

        if want_param_grads:
            grads[pre + "attn_out.weight"] = flat(lc["merged"]).T @ flat(d_attn)
            grads[pre + "attn_out.bias"] = flat(d_attn).sum(axis=0)
        d_merged = d_attn @ p[pre + "attn_out.weight"].T
        d_ctx = d_merged.reshape(b, t, h, hd).transpose(0, 2, 1, 3)

        probs, qh, kh, vh = lc["probs"], lc["qh"], lc["kh"], lc["vh"]
        d_vh = probs.transpose(0, 1, 3, 2) @ d_ctx
        d_probs = d_ctx @ vh.transpose(0, 1, 3, 2)
        rowdot = (d_probs * probs).sum(axis=-1, keepdims=True)
        d_scores = (d_probs - rowdot) * probs
        scale = 1.0 / np.sqrt(hd)
        d_qh = d_scores @ kh * scale
        d_kh = d_scores.transpose(0, 1, 3, 2) @ qh * scale

        def unheads(m):
            return m.transpose(0, 2, 1, 3).reshape(b, t, d)

        d_q, d_k, d_v = unheads(d_qh), unheads(d_kh), unheads(d_vh)
        x_in = lc["x_in"]
        for dname, dm in (("attn_q", d_q), ("attn_k", d_k), ("attn_v", d_v)):
            if want_param_grads:
                grads[pre + dname + ".weight"] = flat(x_in).T @ flat(dm)
                grads[pre + dname + ".bias"] = flat(dm).sum(axis=0)
            d_x += dm @ p[pre + dname + ".weight"].T
        dx = d_x

    if "embed_keep" in cache:
        dx = dx * cache["embed_keep"]

    if want_param_grads:
        if "ids" not in cache:
            raise StaleCacheError("cache lacks token ids; parameter gradients need forward()")
        ids = cache["ids"]
        np.add.at(
            grads["token_embedding"], ids.reshape(-1), dx.reshape(-1, d)
        )
        grads["position_embedding"][:t] = dx.sum(axis=0)

    return (grads if want_param_grads else None), dx


# --------------------------------------------------------------- checkpoint


def save_checkpoint(params: ModelParameters, path: str) -> None:
    """Write magic, length-prefixed JSON header, then raw little-endian tensors."""
    table = {}
    offset = 0
    blobs = []
    for name in parameter_shapes(params.config):
        tensor = np.ascontiguousarray(params.tensors[name])
        dtype = tensor.dtype.newbyteorder("<")
        blob = tensor.astype(dtype, copy=False).tobytes()
        table[name] = {
            "shape": list(tensor.shape),
            "dtype": dtype.str,
            "offset": offset,
        }
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"config": asdict(params.config), "tensors": table}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(
    path: str, expected_config: ModelConfig | None = None
) -> tuple[ModelParameters, ModelConfig]:
    """Read and validate a checkpoint; round-trips save_checkpoint bit-exactly."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {raw[:4]!r}")
    if len(raw) < 8:
        raise CheckpointError(f"{path}: truncated before header length")
    (header_len,) = struct.unpack("<I", raw[4:8])
    header_end = 8 + header_len
    if len(raw) < header_end:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8:header_end].decode("utf-8"))
        config = ModelConfig(**header["config"])
        table = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from exc

    if expected_config is not None and expected_config != config:
        raise CheckpointError(
            f"{path}: checkpoint config {config} does not match expected {expected_config}"
        )
    expected_shapes = parameter_shapes(config)
    if set(table) != set(expected_shapes):
        raise CheckpointError(f"{path}: tensor table does not match config")

    data = raw[header_end:]
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes.items():
        entry = table[name]
        if tuple(entry["shape"]) != shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {entry['shape']}, config implies {shape}"
            )
        dtype = np.dtype(entry["dtype"])
        nbytes = int(np.prod(shape)) * dtype.itemsize
        start = entry["offset"]
        if start + nbytes > len(data):
            raise CheckpointError(f"{path}: tensor {name} extends past end of file")
        tensors[name] = np.frombuffer(
            data, dtype=dtype, count=int(np.prod(shape)), offset=start
        ).reshape(shape).copy()
    return ModelParameters(config=config, tensors=tensors), config
