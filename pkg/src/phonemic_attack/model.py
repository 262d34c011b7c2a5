"""Compact convolutional CTC recognizer with hand-written backprop.

Layout: fixed input standardization -> conv(k) -> tanh -> conv(k) -> tanh
-> per-frame affine to 28 classes. Convolutions are 'same'-padded along
time, so output frames equal input frames.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import Waveform
from .ctc import N_CLASSES, ctc_loss, encode, greedy_decode
from .features import N_BANDS, log_mel_forward, log_mel_with_pullback

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

ARCHITECTURES = {
    "base": {"channels": 64, "kernel": 5},
    "variant": {"channels": 48, "kernel": 7},
}


class ShapeMismatchError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(eq=False)
class AcousticModel:
    w1: np.ndarray  # (kernel * n_bands, channels)
    b1: np.ndarray
    w2: np.ndarray  # (kernel * channels, channels)
    b2: np.ndarray
    w_out: np.ndarray  # (channels, N_CLASSES)
    b_out: np.ndarray
    feat_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_BANDS))
    feat_std: np.ndarray = field(default_factory=lambda: np.ones(N_BANDS))
    arch: str = "base"

    PARAMS = ("w1", "b1", "w2", "b2", "w_out", "b_out")

    @property
    def kernel(self) -> int:
        return self.w1.shape[0] // self.n_bands

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def n_bands(self) -> int:
        return self.feat_mean.shape[0]

    @classmethod
    def init(cls, seed: int, arch: str = "base", n_bands: int = N_BANDS) -> "AcousticModel":
        spec = ARCHITECTURES[arch]
        c, k = spec["channels"], spec["kernel"]
        rng = np.random.default_rng(seed)

        def glorot(fan_in, fan_out):
            return rng.normal(0.0, math.sqrt(2.0 / (fan_in + fan_out)), size=(fan_in, fan_out))

        return cls(
            w1=glorot(k * n_bands, c), b1=np.zeros(c),
            w2=glorot(k * c, c), b2=np.zeros(c),
            w_out=glorot(c, N_CLASSES), b_out=np.zeros(N_CLASSES),
            feat_mean=np.zeros(n_bands), feat_std=np.ones(n_bands), arch=arch,
        )

    @classmethod
    def zeros(cls, arch: str = "base") -> "AcousticModel":
        m = cls.init(0, arch)
        for name in cls.PARAMS:
            getattr(m, name)[...] = 0.0
        return m

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PARAMS}

    def copy(self) -> "AcousticModel":
        return AcousticModel(**{k: v.copy() for k, v in self.params().items()},
                             feat_mean=self.feat_mean.copy(), feat_std=self.feat_std.copy(),
                             arch=self.arch)

    @property
    def model_id(self) -> str:
        h = hashlib.sha256(self.arch.encode())
        for arr in (*self.params().values(), self.feat_mean, self.feat_std):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    # -- forward / backward -------------------------------------------------

    def forward(self, feats: np.ndarray, cache: bool = False):
        feats = np.asarray(getattr(feats, "values", feats), dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.n_bands:
            raise ShapeMismatchError(f"expected (frames, {self.n_bands}) features, got {feats.shape}")
        x = (feats - self.feat_mean) / self.feat_std
        cols1 = _im2col(x, self.kernel)
        a1 = np.tanh(cols1 @ self.w1 + self.b1)
        cols2 = _im2col(a1, self.kernel)
        a2 = np.tanh(cols2 @ self.w2 + self.b2)
        logits = a2 @ self.w_out + self.b_out
        if cache:
            return logits, (cols1, a1, cols2, a2)
        return logits

    def backward(self, cache, dlogits: np.ndarray, want_params: bool = True):
        """Returns (dloss/dfeatures, parameter gradients or None)."""
        cols1, a1, cols2, a2 = cache
        k = self.kernel
        da2 = dlogits @ self.w_out.T
        dh2 = da2 * (1.0 - a2 * a2)
        da1 = _col2im(dh2 @ self.w2.T, k, a1.shape[1])
        dh1 = da1 * (1.0 - a1 * a1)
        dx = _col2im(dh1 @ self.w1.T, k, self.n_bands)
        dfeats = dx / self.feat_std
        if not want_params:
            return dfeats, None
        grads = {
            "w_out": a2.T @ dlogits, "b_out": dlogits.sum(axis=0),
            "w2": cols2.T @ dh2, "b2": dh2.sum(axis=0),
            "w1": cols1.T @ dh1, "b1": dh1.sum(axis=0),
        }
        return dfeats, grads

    def logits(self, w: Waveform) -> np.ndarray:
        return self.forward(log_mel_forward(w).values)

    def transcribe(self, w: Waveform) -> str:
        return greedy_decode(self.logits(w))


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    n_t = x.shape[0]
    return np.concatenate([xp[j:j + n_t] for j in range(k)], axis=1)


def _col2im(dcols: np.ndarray, k: int, width: int) -> np.ndarray:
    pad = k // 2
    n_t = dcols.shape[0]
    out = np.zeros((n_t + 2 * pad, width))
    for j in range(k):
        out[j:j + n_t] += dcols[:, j * width:(j + 1) * width]
    return out[pad:pad + n_t]


def forward(model: AcousticModel, feats) -> np.ndarray:
    return model.forward(feats)


def backward_to_waveform(model: AcousticModel, w: Waveform, label) -> tuple[np.ndarray, float]:
    """CTC loss of ``label`` (text or ids) on ``w`` and its gradient w.r.t. the samples."""
    ids = encode(label) if isinstance(label, str) else np.asarray(label)
    feats, pullback = log_mel_with_pullback(w)
    logits, cache = model.forward(feats.values, cache=True)
    loss, dlogits = ctc_loss(logits, ids)
    dfeats, _ = model.backward(cache, dlogits, want_params=False)
    return pullback(dfeats), loss


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(model: AcousticModel, path) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "model_id": model.model_id,
        "shapes": {k: list(v.shape) for k, v in model.params().items()},
        "params": {k: v.ravel().tolist() for k, v in model.params().items()},
        "feat_mean": model.feat_mean.tolist(),
        "feat_std": model.feat_std.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path, arch: str | None = None) -> AcousticModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    if arch is not None and doc["arch"] != arch:
        raise ShapeMismatchError(f"{path}: checkpoint arch {doc['arch']!r}, expected {arch!r}")
    expected = AcousticModel.init(0, doc["arch"], n_bands=len(doc["feat_mean"])).params()
    params = {}
    for name, ref in expected.items():
        shape = tuple(doc["shapes"][name])
        if shape != ref.shape:
            raise ShapeMismatchError(f"{path}: {name} has shape {shape}, expected {ref.shape}")
        flat = np.asarray(doc["params"][name], dtype=np.float64)
        if flat.size != ref.size:
            raise ShapeMismatchError(f"{path}: {name} holds {flat.size} values, expected {ref.size}")
        params[name] = flat.reshape(shape)
    model = AcousticModel(**params, feat_mean=np.asarray(doc["feat_mean"]),
                          feat_std=np.asarray(doc["feat_std"]), arch=doc["arch"])
    if doc.get("model_id") and doc["model_id"] != model.model_id:
        raise ValueError(f"{path}: model_id mismatch (file corrupted?)")
    return model


# -- training ---------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 3e-3
    momentum: float = 0.9
    batch_size: int = 8
    seed: int = 0
    arch: str = "base"
    noise_aug: float = 0.01  # max std of additive Gaussian noise per utterance
    aug_prob: float = 1.0  # chance that an utterance is augmented at all
    clip_norm: float = 50.0
    cosine: bool = True  # cosine-anneal the learning rate to zero
    warmup: int = 0  # epochs of linear learning-rate warmup


def _normalizer(feature_mats: Sequence[np.ndarray]):
    stacked = np.concatenate(feature_mats, axis=0)
    return stacked.mean(axis=0), stacked.std(axis=0) + 1e-3


def train(waves: Sequence[Waveform], transcripts: Sequence[str], cfg: TrainConfig,
          model: AcousticModel | None = None, on_epoch=None) -> tuple[AcousticModel, list[float]]:
    """SGD with momentum on the mean per-utterance CTC loss.

    Fully determined by ``cfg.seed``. Raises DivergenceError on a
    non-finite loss. Returns the model and per-epoch mean losses.
    """
    if not waves:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    labels = [encode(t) for t in transcripts]
    clean_feats = [log_mel_forward(w).values for w in waves]
    if model is None:
        model = AcousticModel.init(cfg.seed, cfg.arch)
        model.feat_mean, model.feat_std = _normalizer(clean_feats)
    velocity = {k: np.zeros_like(v) for k, v in model.params().items()}
    history = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs)) if cfg.cosine else cfg.lr
        if epoch < cfg.warmup:
            lr *= (epoch + 1) / (cfg.warmup + 1)
        order = rng.permutation(len(waves))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            total = {k: np.zeros_like(v) for k, v in model.params().items()}
            for i in batch:
                if cfg.noise_aug > 0 and rng.random() < cfg.aug_prob:
                    sigma = rng.uniform(0.0, cfg.noise_aug)
                    noisy = Waveform(np.clip(waves[i].samples + sigma * rng.standard_normal(len(waves[i])), -1, 1))
                    feats = log_mel_forward(noisy).values
                else:
                    feats = clean_feats[i]
                logits, cache = model.forward(feats, cache=True)
                loss, dlogits = ctc_loss(logits, labels[i])
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}")
                losses.append(loss)
                _, grads = model.backward(cache, dlogits)
                for k in total:
                    total[k] += grads[k]
            scale = 1.0 / len(batch)
            norm = math.sqrt(sum(float(np.sum((g * scale) ** 2)) for g in total.values()))
            if not np.isfinite(norm):
                raise DivergenceError(f"non-finite gradient at epoch {epoch}")
            if cfg.clip_norm and norm > cfg.clip_norm:
                scale *= cfg.clip_norm / norm
            for k, p in model.params().items():
                velocity[k] = cfg.momentum * velocity[k] - lr * scale * total[k]
                p += velocity[k]
        history.append(float(np.mean(losses)))
        log.info("epoch %d loss %.4f", epoch + 1, history[-1])
        if on_epoch is not None:
            on_epoch(epoch, model, history[-1])
    return model, history
