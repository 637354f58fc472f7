"""Miniature transformer encoder classifier with hand-written backward pass.

Pre-layer-norm residual blocks, learned position embeddings, CLS-position
pooling, and a single inverted-dropout layer on the pooled vector before
the zero-initialized classifier head. Everything runs in numpy float64;
gradients for every parameter are derived manually and are verified
against finite differences in the test suite.

Attention masks exclude PAD keys; position 0 is always CLS, so every
attention row has at least one unmasked key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.special import erf

from .errors import DataError, NonFiniteLoss, ShapeMismatch, UsageError
from .features import CLS_ID, PAD_ID, TokenSequence

_MAGIC = "encoder-checkpoint-v1"
_LN_EPS = 1e-5
_INIT_STD = 0.02
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_len: int = 128
    dropout_p: float = 0.3
    n_classes: int = 2

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise UsageError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.dropout_p < 1.0:
            raise UsageError(f"dropout_p must be in [0,1), got {self.dropout_p}")
        if self.vocab_size < 4:
            raise UsageError("vocab_size must cover the special ids")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "max_len": self.max_len,
            "dropout_p": self.dropout_p,
            "n_classes": self.n_classes,
        }


def _param_specs(config: EncoderConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Canonical (name, shape, init) list; checkpoint order follows it."""
    d, f, c = config.d_model, config.d_ff, config.n_classes
    specs: list[tuple[str, tuple[int, ...], str]] = [
        ("tok_emb", (config.vocab_size, d), "normal"),
        ("pos_emb", (config.max_len, d), "normal"),
    ]
    for i in range(config.n_layers):
        prefix = f"layer{i}"
        specs += [
            (f"{prefix}.ln1.gamma", (d,), "ones"),
            (f"{prefix}.ln1.beta", (d,), "zeros"),
            (f"{prefix}.attn.wq", (d, d), "normal"),
            (f"{prefix}.attn.bq", (d,), "zeros"),
            # No key bias: softmax rows are invariant to a per-row shift,
            # so a key bias would be a dead parameter.
            (f"{prefix}.attn.wk", (d, d), "normal"),
            (f"{prefix}.attn.wv", (d, d), "normal"),
            (f"{prefix}.attn.bv", (d,), "zeros"),
            (f"{prefix}.attn.wo", (d, d), "normal"),
            (f"{prefix}.attn.bo", (d,), "zeros"),
            (f"{prefix}.ln2.gamma", (d,), "ones"),
            (f"{prefix}.ln2.beta", (d,), "zeros"),
            (f"{prefix}.ff.w1", (d, f), "normal"),
            (f"{prefix}.ff.b1", (f,), "zeros"),
            (f"{prefix}.ff.w2", (f, d), "normal"),
            (f"{prefix}.ff.b2", (d,), "zeros"),
        ]
    specs += [
        ("ln_f.gamma", (d,), "ones"),
        ("ln_f.beta", (d,), "zeros"),
        # Zero head: an untrained model outputs exactly uniform probabilities.
        ("head.w", (d, c), "zeros"),
        ("head.b", (c,), "zeros"),
    ]
    return specs


class EncoderModel:
    """Configuration plus a name-keyed parameter dict in canonical order."""

    def __init__(self, config: EncoderConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        for name, shape, _ in _param_specs(config):
            if name not in params or params[name].shape != shape:
                raise ShapeMismatch(f"parameter {name} missing or has wrong shape")

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        for name, _, _ in _param_specs(self.config):
            yield name, self.params[name]


def init_model(config: EncoderConfig, seed: int) -> EncoderModel:
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape, init in _param_specs(config):
        if init == "normal":
            params[name] = rng.normal(0.0, _INIT_STD, size=shape)
        elif init == "ones":
            params[name] = np.ones(shape, dtype=np.float64)
        else:
            params[name] = np.zeros(shape, dtype=np.float64)
    return EncoderModel(config, params)


def _layernorm_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = centered * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def _layernorm_backward(dout, cache):
    xhat, inv, gamma = cache
    axes = tuple(range(dout.ndim - 1))
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * gamma
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _softmax_rows(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def _check_batch(config: EncoderConfig, ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.ndim != 2:
        raise ShapeMismatch(f"expected a (batch, seq) id matrix, got shape {ids.shape}")
    if ids.shape[1] > config.max_len:
        raise ShapeMismatch(
            f"sequence length {ids.shape[1]} exceeds max_len {config.max_len}"
        )
    if ids.shape[1] < 1:
        raise ShapeMismatch("sequences must contain at least the CLS position")
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ShapeMismatch("token id out of vocabulary range")
    if np.any(ids[:, 0] != CLS_ID):
        raise ShapeMismatch("every sequence must start with CLS")
    return ids.astype(np.int64)


def forward(
    model: EncoderModel,
    ids: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    want_cache: bool = False,
):
    """Run the encoder; returns (logits, cache). PAD keys are masked out
    of every attention row, and each row over the remaining keys is
    asserted to sum to 1 within 1e-6."""
    cfg = model.config
    p = model.params
    ids = _check_batch(cfg, ids)
    if train_mode and cfg.dropout_p > 0.0 and rng is None:
        rng = np.random.default_rng(seed)

    batch, seq = ids.shape
    n_heads = cfg.n_heads
    d_head = cfg.d_model // n_heads
    scale = 1.0 / math.sqrt(d_head)
    pad_keys = ids == PAD_ID  # (B, T), True where the key is masked

    h = p["tok_emb"][ids] + p["pos_emb"][:seq]
    cache: dict = {"ids": ids, "layers": []}

    for i in range(cfg.n_layers):
        pre = f"layer{i}"
        a_norm, ln1_cache = _layernorm_forward(h, p[f"{pre}.ln1.gamma"], p[f"{pre}.ln1.beta"])
        q = a_norm @ p[f"{pre}.attn.wq"] + p[f"{pre}.attn.bq"]
        k = a_norm @ p[f"{pre}.attn.wk"]
        v = a_norm @ p[f"{pre}.attn.wv"] + p[f"{pre}.attn.bv"]
        qh = q.reshape(batch, seq, n_heads, d_head).transpose(0, 2, 1, 3)
        kh = k.reshape(batch, seq, n_heads, d_head).transpose(0, 2, 1, 3)
        vh = v.reshape(batch, seq, n_heads, d_head).transpose(0, 2, 1, 3)
        scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
        scores = np.where(pad_keys[:, None, None, :], -np.inf, scores)
        attn = _softmax_rows(scores)
        row_sums = attn.sum(axis=-1)
        if not np.all(np.isfinite(row_sums)):
            raise NonFiniteLoss(f"non-finite attention weights in layer {i}")
        assert np.all(np.abs(row_sums - 1.0) < 1e-6), "attention rows must sum to 1"
        ctx = (attn @ vh).transpose(0, 2, 1, 3).reshape(batch, seq, cfg.d_model)
        attn_out = ctx @ p[f"{pre}.attn.wo"] + p[f"{pre}.attn.bo"]
        h = h + attn_out

        f_norm, ln2_cache = _layernorm_forward(h, p[f"{pre}.ln2.gamma"], p[f"{pre}.ln2.beta"])
        z1 = f_norm @ p[f"{pre}.ff.w1"] + p[f"{pre}.ff.b1"]
        a1 = _gelu(z1)
        z2 = a1 @ p[f"{pre}.ff.w2"] + p[f"{pre}.ff.b2"]
        h = h + z2

        if want_cache:
            cache["layers"].append(
                dict(
                    ln1=ln1_cache,
                    a_norm=a_norm,
                    qh=qh,
                    kh=kh,
                    vh=vh,
                    attn=attn,
                    ctx=ctx,
                    ln2=ln2_cache,
                    f_norm=f_norm,
                    z1=z1,
                    a1=a1,
                )
            )

    hf, lnf_cache = _layernorm_forward(h, p["ln_f.gamma"], p["ln_f.beta"])
    cls = hf[:, 0, :]

    if train_mode and cfg.dropout_p > 0.0:
        mask = (rng.random(cls.shape) >= cfg.dropout_p) / (1.0 - cfg.dropout_p)
        cls_dropped = cls * mask
    else:
        mask = None
        cls_dropped = cls

    logits = cls_dropped @ p["head.w"] + p["head.b"]

    if want_cache:
        cache.update(ln_f=lnf_cache, cls_dropped=cls_dropped, dropout_mask=mask)
        return logits, cache
    return logits, None


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean fused softmax cross-entropy: returns (loss, dloss/dlogits)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != logits.shape[0]:
        raise DataError("logits and labels differ in length")
    m = logits.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))
    per_example = lse[:, 0] - logits[np.arange(len(labels)), labels]
    loss = float(per_example.mean())
    if not np.isfinite(loss):
        raise NonFiniteLoss("non-finite cross-entropy loss")
    probs = np.exp(logits - lse)
    grad = probs
    grad[np.arange(len(labels)), labels] -= 1.0
    grad /= len(labels)
    return loss, grad


def loss_and_backward(
    model: EncoderModel,
    ids: np.ndarray,
    labels: Sequence[int],
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus gradients for every trainable tensor."""
    cfg = model.config
    p = model.params
    logits, cache = forward(
        model, ids, train_mode=train_mode, rng=rng, seed=seed, want_cache=True
    )
    loss, dlogits = cross_entropy(logits, np.asarray(labels))

    grads = {name: np.zeros_like(arr) for name, arr in model.named_parameters()}
    batch, seq = cache["ids"].shape
    n_heads = cfg.n_heads
    d_head = cfg.d_model // n_heads
    scale = 1.0 / math.sqrt(d_head)

    grads["head.w"] = cache["cls_dropped"].T @ dlogits
    grads["head.b"] = dlogits.sum(axis=0)
    dcls = dlogits @ p["head.w"].T
    if cache["dropout_mask"] is not None:
        dcls = dcls * cache["dropout_mask"]

    dhf = np.zeros((batch, seq, cfg.d_model))
    dhf[:, 0, :] = dcls
    dh, grads["ln_f.gamma"], grads["ln_f.beta"] = _layernorm_backward(dhf, cache["ln_f"])

    for i in reversed(range(cfg.n_layers)):
        pre = f"layer{i}"
        lc = cache["layers"][i]

        # feed-forward sublayer: h_out = h_mid + ff(ln2(h_mid))
        dz2 = dh
        grads[f"{pre}.ff.w2"] = lc["a1"].reshape(-1, cfg.d_ff).T @ dz2.reshape(-1, cfg.d_model)
        grads[f"{pre}.ff.b2"] = dz2.sum(axis=(0, 1))
        da1 = dz2 @ p[f"{pre}.ff.w2"].T
        dz1 = da1 * _gelu_grad(lc["z1"])
        grads[f"{pre}.ff.w1"] = lc["f_norm"].reshape(-1, cfg.d_model).T @ dz1.reshape(-1, cfg.d_ff)
        grads[f"{pre}.ff.b1"] = dz1.sum(axis=(0, 1))
        df_norm = dz1 @ p[f"{pre}.ff.w1"].T
        dmid_ln, grads[f"{pre}.ln2.gamma"], grads[f"{pre}.ln2.beta"] = _layernorm_backward(
            df_norm, lc["ln2"]
        )
        dh_mid = dh + dmid_ln

        # attention sublayer: h_mid = h_in + attn(ln1(h_in))
        d_attn_out = dh_mid
        ctx_2d = lc["ctx"].reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.wo"] = ctx_2d.T @ d_attn_out.reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.bo"] = d_attn_out.sum(axis=(0, 1))
        dctx = (d_attn_out @ p[f"{pre}.attn.wo"].T).reshape(
            batch, seq, n_heads, d_head
        ).transpose(0, 2, 1, 3)

        dattn = dctx @ lc["vh"].transpose(0, 1, 3, 2)
        dvh = lc["attn"].transpose(0, 1, 3, 2) @ dctx
        attn = lc["attn"]
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dqh = (dscores @ lc["kh"]) * scale
        dkh = (dscores.transpose(0, 1, 3, 2) @ lc["qh"]) * scale

        dq = dqh.transpose(0, 2, 1, 3).reshape(batch, seq, cfg.d_model)
        dk = dkh.transpose(0, 2, 1, 3).reshape(batch, seq, cfg.d_model)
        dv = dvh.transpose(0, 2, 1, 3).reshape(batch, seq, cfg.d_model)

        a_2d = lc["a_norm"].reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.wq"] = a_2d.T @ dq.reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.bq"] = dq.sum(axis=(0, 1))
        grads[f"{pre}.attn.wk"] = a_2d.T @ dk.reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.wv"] = a_2d.T @ dv.reshape(-1, cfg.d_model)
        grads[f"{pre}.attn.bv"] = dv.sum(axis=(0, 1))

        da_norm = (
            dq @ p[f"{pre}.attn.wq"].T
            + dk @ p[f"{pre}.attn.wk"].T
            + dv @ p[f"{pre}.attn.wv"].T
        )
        din_ln, grads[f"{pre}.ln1.gamma"], grads[f"{pre}.ln1.beta"] = _layernorm_backward(
            da_norm, lc["ln1"]
        )
        dh = dh_mid + din_ln

    np.add.at(grads["tok_emb"], cache["ids"].reshape(-1), dh.reshape(-1, cfg.d_model))
    grads["pos_emb"][:seq] = dh.sum(axis=0)
    return loss, grads


def predict_logits(model: EncoderModel, ids: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Eval-mode logits, computed in chunks to bound attention memory."""
    ids = np.asarray(ids)
    outputs = []
    for start in range(0, ids.shape[0], chunk):
        logits, _ = forward(model, ids[start : start + chunk], train_mode=False)
        outputs.append(logits)
    return np.concatenate(outputs, axis=0)


def predict_proba(model: EncoderModel, ids: np.ndarray) -> np.ndarray:
    """Softmax of eval-mode logits; each row sums to 1."""
    return _softmax_rows(predict_logits(model, ids))


def sequences_to_matrix(sequences: Sequence[TokenSequence]) -> np.ndarray:
    if not sequences:
        raise DataError("no token sequences given")
    return np.asarray([seq.ids for seq in sequences], dtype=np.int64)


def save_checkpoint(model: EncoderModel, path: Path) -> None:
    """Deterministic binary layout: a config header line, then each tensor
    as a name/dtype/shape line followed by raw little-endian bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        header = f"{_MAGIC} {json.dumps(model.config.to_dict(), sort_keys=True)}\n"
        fh.write(header.encode("utf-8"))
        for name, arr in model.named_parameters():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            shape = ",".join(str(s) for s in arr.shape)
            fh.write(f"{name} <f8 {shape}\n".encode("ascii"))
            fh.write(arr.tobytes())
            fh.write(b"\n")


def load_checkpoint(path: Path) -> EncoderModel:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8").rstrip("\n")
        if not header.startswith(_MAGIC + " "):
            raise DataError(f"{path}: not an encoder checkpoint")
        config = EncoderConfig(**json.loads(header[len(_MAGIC) + 1 :]))
        params: dict[str, np.ndarray] = {}
        for name, shape, _ in _param_specs(config):
            meta = fh.readline().decode("ascii").rstrip("\n").split()
            if len(meta) != 3 or meta[0] != name:
                raise DataError(f"{path}: unexpected tensor record {meta!r}")
            dims = tuple(int(s) for s in meta[2].split(",")) if meta[2] else ()
            if dims != shape:
                raise DataError(f"{path}: tensor {name} has shape {dims}, expected {shape}")
            n_bytes = int(np.prod(dims, dtype=np.int64)) * 8
            raw = fh.read(n_bytes)
            if len(raw) != n_bytes or fh.read(1) != b"\n":
                raise DataError(f"{path}: truncated tensor {name}")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return EncoderModel(config, params)
