"""Training loop: per-epoch ball rebuilds in latent space plus joint-loss descent.

Each epoch (a) encodes every training window, (b) rebuilds and prunes the
ball set over those latents, and (c) walks seeded shuffled batches
minimizing lam * reconstruction + (1 - lam) * center alignment against the
epoch's fixed centers, with per-batch nearest-center assignment. After the
last epoch the balls are rebuilt from the final latents to form the shipped
model. Fully deterministic for a fixed config and seed.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from . import granular, neural, tsdata
from .errors import BadParams, EmptySet, NonFiniteGradient, NonFiniteLoss, ShapeMismatch


@dataclass(frozen=True)
class TrainConfig:
    window: int = 2
    stride: int = 1
    layers: int = 2
    hidden: int = 32
    decoder_hidden: int = 64
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-4
    lam: float = 0.5
    s_min: int = 8
    mu: float = 2.0
    seed: int = 2024
    rebuild_every: int = 1
    gbc_off: bool = False
    prune_off: bool = False
    assign_unpruned: bool = False
    require_child_support: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise BadParams(f"lambda must be in [0, 1], got {self.lam}")
        if self.batch_size < 1 or self.epochs < 1 or self.rebuild_every < 1:
            raise BadParams("batch_size, epochs and rebuild_every must be >= 1")
        if self.layers not in (1, 2, 3):
            raise BadParams(f"layers must be 1, 2 or 3, got {self.layers}")
        if self.window < 1 or self.stride < 1 or self.hidden < 1:
            raise BadParams("window, stride and hidden must be positive")


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    mean_lrec: float
    mean_lgb: float
    mean_loss: float
    balls_before: int
    balls_after: int


@dataclass
class GbocModel:
    """Everything inference needs: encoder/decoder weights, retained centers
    and radii, normalization stats, and the config that produced them."""

    version: int
    window: int
    stride: int
    n_channels: int
    encoder: neural.EncoderParams
    decoder: neural.DecoderParams
    norm: tsdata.NormStats
    centers: np.ndarray  # (M, d')
    radii: np.ndarray  # (M,)
    config: TrainConfig

    @property
    def latent_size(self) -> int:
        return self.encoder.latent_size


def compute_lgb(latents_batch: np.ndarray, gb_set: granular.GbSet) -> float:
    """Mean squared distance from each latent to its nearest retained center."""
    if not gb_set.balls:
        raise EmptySet("ball set is empty")
    _, dists = granular.nearest_centers(gb_set.centers, latents_batch)
    return float(np.mean(dists * dists))


def compute_lrec(windows_batch: np.ndarray, reconstructions: np.ndarray) -> float:
    """Mean squared Euclidean norm of the reconstruction residuals."""
    W = np.asarray(windows_batch, dtype=np.float64)
    R = np.asarray(reconstructions, dtype=np.float64)
    if W.shape != R.shape:
        raise ShapeMismatch(f"windows {W.shape} vs reconstructions {R.shape}")
    resid = W - R
    return float(np.sum(resid * resid) / W.shape[0])


def _ball_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, 3, epoch]).generate_state(1)[0])


def _build_balls(
    latents: np.ndarray, cfg: TrainConfig, epoch: int
) -> tuple[granular.GbSet, granular.GbSet, int, int]:
    """Rebuild balls for one epoch; returns (training_set, shipped_set,
    count_before, count_after)."""
    n = latents.shape[0]
    if cfg.gbc_off:
        # ablation: plain k-means clusters stand in for granular-balls
        rng = np.random.default_rng([_ball_seed(cfg.seed, epoch), 0x6B])
        k = max(1, math.isqrt(n))
        _, assign = granular.kmeans(latents, k, rng)
        balls = [
            granular.GranularBall.from_members(latents, np.where(assign == c)[0])
            for c in range(k)
            if np.any(assign == c)
        ]
        gset = granular.GbSet(balls=balls, pruned=False, s_min=cfg.s_min, mu=cfg.mu)
        return gset, gset, len(balls), len(balls)
    unpruned = granular.generate(
        latents, s_min=cfg.s_min, seed=_ball_seed(cfg.seed, epoch),
        require_child_support=cfg.require_child_support,
    )
    before = len(unpruned.balls)
    if cfg.prune_off:
        return unpruned, unpruned, before, before
    pruned = granular.prune(unpruned, cfg.mu)
    training = unpruned if cfg.assign_unpruned else pruned
    return training, pruned, before, len(pruned.balls)


def train(
    train_ts: tsdata.TimeSeries, cfg: TrainConfig, verbose: bool = False
) -> tuple[GbocModel, list[EpochReport]]:
    """Fit the full model on an anomaly-free series."""
    if train_ts.T < cfg.window:
        raise BadParams(f"series length {train_ts.T} is shorter than the window {cfg.window}")
    stats = tsdata.fit_normalizer(train_ts)
    norm_ts = tsdata.apply_normalizer(train_ts, stats)
    ws = tsdata.make_windows(norm_ts, cfg.window, cfg.stride)
    X = ws.as_sequences()
    targets = ws.windows
    n = ws.n_windows

    init_rng = np.random.default_rng([cfg.seed, 1])
    enc = neural.init_encoder(train_ts.d, cfg.hidden, cfg.layers, init_rng)
    dec = neural.init_decoder(enc.latent_size, cfg.window * train_ts.d, cfg.decoder_hidden, init_rng)
    params = neural.param_dict(enc, dec)
    opt = neural.init_adam(params, lr=cfg.lr)

    reports: list[EpochReport] = []
    training_set: granular.GbSet | None = None
    before = after = 0
    for epoch in range(1, cfg.epochs + 1):
        latents = neural.encode_batch(enc, X)
        if not np.all(np.isfinite(latents)):
            raise NonFiniteLoss(f"non-finite latents at epoch {epoch}; training diverged")
        if training_set is None or (epoch - 1) % cfg.rebuild_every == 0:
            training_set, _, before, after = _build_balls(latents, cfg, epoch)
        centers = training_set.centers

        order = np.random.default_rng([cfg.seed, 2, epoch]).permutation(n)
        sum_rec = sum_gb = sum_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            zb = neural.encode_batch(enc, X[idx])
            if not np.all(np.isfinite(zb)):
                raise NonFiniteLoss(f"non-finite latents at epoch {epoch}; training diverged")
            assignment, _ = granular.nearest_centers(centers, zb)
            try:
                grads, loss, l_rec, l_gb = neural.backward(
                    enc, dec, X[idx], targets[idx], centers, assignment, cfg.lam
                )
            except NonFiniteGradient as exc:
                raise NonFiniteLoss(f"epoch {epoch}: {exc}") from exc
            neural.opt_step(opt, params, grads)
            sum_rec += l_rec * idx.size
            sum_gb += l_gb * idx.size
            sum_loss += loss * idx.size
        report = EpochReport(
            epoch=epoch,
            mean_lrec=sum_rec / n,
            mean_lgb=sum_gb / n,
            mean_loss=sum_loss / n,
            balls_before=before,
            balls_after=after,
        )
        reports.append(report)
        if verbose:
            print(
                f"epoch {epoch:3d}  loss {report.mean_loss:.6f}  "
                f"rec {report.mean_lrec:.6f}  gb {report.mean_lgb:.6f}  "
                f"balls {before}->{after}",
                file=sys.stderr,
            )

    final_latents = neural.encode_batch(enc, X)
    if not np.all(np.isfinite(final_latents)):
        raise NonFiniteLoss("non-finite latents after final epoch; training diverged")
    _, shipped, _, _ = _build_balls(final_latents, cfg, cfg.epochs + 1)
    model = GbocModel(
        version=1,
        window=cfg.window,
        stride=cfg.stride,
        n_channels=train_ts.d,
        encoder=enc,
        decoder=dec,
        norm=stats,
        centers=shipped.centers.copy(),
        radii=shipped.radii.copy(),
        config=cfg,
    )
    return model, reports
