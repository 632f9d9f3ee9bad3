"""Versioned binary persistence for the trained model bundle.

Layout (all little-endian): magic "GBOC", u32 version, u32 dims
(window, stride, channels, layers, hidden, latent), normalization mean/std,
encoder gate matrices per layer (W, U, b), decoder (hidden width, W1, b1,
W2, b2), center count and matrix, radii, then the training-config snapshot.
Every real is a 64-bit IEEE-754 float, so a save -> load -> save round trip
is byte-identical.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, InvariantViolation, TruncatedFile, VersionUnsupported
from .neural import DecoderParams, EncoderParams, LstmLayer
from .trainer import GbocModel, TrainConfig
from .tsdata import NormStats

MAGIC = b"GBOC"
FORMAT_VERSION = 1


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u32(self, v: int) -> None:
        if not 0 <= v < 2**32:
            raise InvariantViolation(f"value {v} does not fit in u32")
        self.parts.append(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self.parts.append(struct.pack("<Q", v))

    def f64(self, v: float) -> None:
        self.parts.append(struct.pack("<d", v))

    def array(self, a: np.ndarray) -> None:
        self.parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise TruncatedFile(f"expected {n} more bytes at offset {self.off}, file has {len(self.buf)}")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    def done(self) -> None:
        if self.off != len(self.buf):
            raise InvariantViolation(f"{len(self.buf) - self.off} trailing bytes after model payload")


def _dump(model: GbocModel) -> bytes:
    w = _Writer()
    w.parts.append(MAGIC)
    w.u32(FORMAT_VERSION)
    enc = model.encoder
    w.u32(model.window)
    w.u32(model.stride)
    w.u32(model.n_channels)
    w.u32(enc.num_layers)
    w.u32(enc.hidden_size)
    w.u32(enc.latent_size)
    w.array(model.norm.mean)
    w.array(model.norm.std)
    for layer in enc.layers:
        w.array(layer.W)
        w.array(layer.U)
        w.array(layer.b)
    dec = model.decoder
    w.u32(dec.W1.shape[0])
    w.array(dec.W1)
    w.array(dec.b1)
    w.array(dec.W2)
    w.array(dec.b2)
    w.u32(model.centers.shape[0])
    w.array(model.centers)
    w.array(model.radii)
    cfg = model.config
    w.u32(cfg.epochs)
    w.u32(cfg.batch_size)
    w.f64(cfg.lr)
    w.f64(cfg.lam)
    w.u32(cfg.s_min)
    w.f64(cfg.mu)
    w.u64(cfg.seed)
    w.u32(cfg.rebuild_every)
    w.u32(int(cfg.gbc_off))
    w.u32(int(cfg.prune_off))
    w.u32(int(cfg.assign_unpruned))
    w.u32(int(cfg.require_child_support))
    return w.bytes()


def _parse(buf: bytes) -> GbocModel:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise BadMagic("not a model file (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"format version {version} is not supported")
    window, stride, d, layers, hidden, latent = (r.u32() for _ in range(6))
    if window < 1 or stride < 1 or d < 1 or layers < 1 or hidden < 1:
        raise InvariantViolation("dimensions must be positive")
    if latent != layers * hidden:
        raise InvariantViolation(f"latent size {latent} != layers*hidden {layers * hidden}")
    mean = r.array((d,))
    std = r.array((d,))
    enc_layers = []
    for l in range(layers):
        in_l = d if l == 0 else hidden
        enc_layers.append(
            LstmLayer(W=r.array((4 * hidden, in_l)), U=r.array((4 * hidden, hidden)), b=r.array((4 * hidden,)))
        )
    dec_hidden = r.u32()
    if dec_hidden < 1:
        raise InvariantViolation("decoder width must be positive")
    out_dim = window * d
    dec = DecoderParams(
        W1=r.array((dec_hidden, latent)),
        b1=r.array((dec_hidden,)),
        W2=r.array((out_dim, dec_hidden)),
        b2=r.array((out_dim,)),
    )
    m = r.u32()
    if m < 1:
        raise InvariantViolation("model must retain at least one center")
    centers = r.array((m, latent))
    radii = r.array((m,))
    cfg = TrainConfig(
        window=window,
        stride=stride,
        layers=layers,
        hidden=hidden,
        decoder_hidden=dec_hidden,
        epochs=r.u32(),
        batch_size=r.u32(),
        lr=r.f64(),
        lam=r.f64(),
        s_min=r.u32(),
        mu=r.f64(),
        seed=r.u64(),
        rebuild_every=r.u32(),
        gbc_off=bool(r.u32()),
        prune_off=bool(r.u32()),
        assign_unpruned=bool(r.u32()),
        require_child_support=bool(r.u32()),
    )
    r.done()
    model = GbocModel(
        version=version,
        window=window,
        stride=stride,
        n_channels=d,
        encoder=EncoderParams(input_size=d, hidden_size=hidden, layers=enc_layers),
        decoder=dec,
        norm=NormStats(mean=mean, std=std),
        centers=centers,
        radii=radii,
        config=cfg,
    )
    for name, arr in _all_arrays(model):
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation(f"non-finite values in {name}")
    if np.any(radii < 0):
        raise InvariantViolation("radii must be nonnegative")
    return model


def _all_arrays(model: GbocModel):
    yield "norm.mean", model.norm.mean
    yield "norm.std", model.norm.std
    for l, layer in enumerate(model.encoder.layers):
        yield f"encoder[{l}].W", layer.W
        yield f"encoder[{l}].U", layer.U
        yield f"encoder[{l}].b", layer.b
    yield "decoder.W1", model.decoder.W1
    yield "decoder.b1", model.decoder.b1
    yield "decoder.W2", model.decoder.W2
    yield "decoder.b2", model.decoder.b2
    yield "centers", model.centers
    yield "radii", model.radii


def save_model(model: GbocModel, path: str | Path) -> None:
    Path(path).write_bytes(_dump(model))


def load_model(path: str | Path) -> GbocModel:
    return _parse(Path(path).read_bytes())
