"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line
that is echoed in the terminal summary."""
import struct
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, read_report, run_cli_pipeline
from gboc import cli, granular, metrics, model_io, trainer, tsdata
from gboc.errors import BadMagic, InvariantViolation, TruncatedFile, VersionUnsupported
from oracles import fd_gradient_check, random_small_net
from test_model_io import random_model


def record(number: int, description: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    ACCEPTANCE_LINES.append(f"{status}  criterion {number:2d}: {description}{suffix}")
    assert ok, f"criterion {number}: {description}{suffix}"


def test_criterion_1_gradient_correctness():
    started = time.monotonic()
    worst = 0.0
    for seed in (201, 202, 203, 204, 205):
        enc, dec, X, Y, centers, assignment = random_small_net(seed)
        for lam in (0.0, 0.5, 1.0):
            worst = max(worst, fd_gradient_check(enc, dec, X, Y, centers, assignment, lam))
    elapsed = time.monotonic() - started
    record(
        1,
        "analytic gradients match central differences (rel err < 1e-4)",
        worst < 1e-4 and elapsed < 30.0,
        f"max rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_2_granular_oracle_equivalence():
    ok = True
    notes = []

    lat = np.array([[0.0], [1.0], [10.0], [11.0]])
    ball = granular.GranularBall.from_members(lat, np.arange(4))
    ok &= abs(granular.dm(ball) - 5.0) < 1e-12
    ok &= granular.try_split(ball, lat, s_min=3) is None
    split = granular.try_split(ball, lat, s_min=2)
    ok &= split is not None
    if split:
        ok &= abs(granular.weighted_child_dm(*split) - 0.5) < 1e-12
        ok &= sorted(tuple(sorted(c.member_indices.tolist())) for c in split) == [(0, 1), (2, 3)]
    relaxed = granular.try_split(ball, lat, s_min=3, require_child_support=False)
    ok &= relaxed is not None
    notes.append("split fixtures ok")

    rows, balls = [], []
    for j, r in enumerate((1.0, 1.0, 2.0, 10.0)):
        pts = [[1000.0 * j - r], [1000.0 * j + r]]
        idx = np.array([len(rows), len(rows) + 1])
        rows.extend(pts)
        balls.append(idx)
    all_pts = np.asarray(rows)
    gset = granular.GbSet(balls=[granular.GranularBall.from_members(all_pts, idx) for idx in balls])
    pruned = granular.prune(gset, mu=2.0)
    ok &= sorted(b.radius for b in pruned.balls) == [1.0, 1.0, 2.0]
    notes.append("pruning fixture ok")

    rng = np.random.default_rng(77)
    centers = rng.normal(size=(7, 4))
    worst = 0.0
    for _ in range(1000):
        z = rng.normal(size=4)
        idx, dist = granular.nearest_center(centers, z)
        dists = np.sqrt(np.sum((centers - z) ** 2, axis=1))
        ok &= idx == int(np.argmin(dists))
        worst = max(worst, abs(dist - float(dists.min())))
    ok &= worst < 1e-12
    notes.append(f"1000 nearest scans, worst gap {worst:.1e}")

    record(2, "granular ops reproduce hand/brute-force oracles exactly", bool(ok), "; ".join(notes))


def test_criterion_3_generation_invariants(monkeypatch):
    started = time.monotonic()
    accepted = 0
    violations = 0
    original = granular.try_split

    def checked(ball, latents, s_min, rng=None, require_child_support=True):
        nonlocal accepted, violations
        result = original(ball, latents, s_min, rng, require_child_support)
        if result is not None:
            accepted += 1
            if not granular.weighted_child_dm(*result) < granular.dm(ball):
                violations += 1
        return result

    monkeypatch.setattr(granular, "try_split", checked)
    partitions_ok = True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 513))
        d_lat = int(rng.integers(1, 9))
        if rng.random() < 0.5:
            pts = rng.normal(size=(n, d_lat))
        else:
            k = int(rng.integers(1, 6))
            blob_centers = rng.uniform(-20, 20, size=(k, d_lat))
            pts = blob_centers[rng.integers(0, k, size=n)] + rng.normal(0, 0.5, size=(n, d_lat))
        gset = granular.generate(pts, s_min=8, seed=seed)
        union = np.sort(np.concatenate([b.member_indices for b in gset.balls]))
        partitions_ok &= bool(np.array_equal(union, np.arange(n)))
    elapsed = time.monotonic() - started
    record(
        3,
        "generation terminates, partitions indices, splits strictly improve DM",
        partitions_ok and violations == 0 and elapsed < 60.0,
        f"100 datasets, {accepted} accepted splits, {elapsed:.1f}s",
    )


def _blob_fixture(seed: int, k_blobs: int, n=256, d_lat=4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10, 10, size=(k_blobs, d_lat))
    per = n // k_blobs
    return np.concatenate([c + rng.normal(0, 0.5, size=(per, d_lat)) for c in centers])


def test_criteria_4_and_5_coverage_and_economy():
    started = time.monotonic()
    wins = 0
    total = 0
    economy_ok = True
    for k_blobs in (2, 4):
        for seed in range(10):
            pts = _blob_fixture(seed, k_blobs)
            gset = granular.prune(granular.generate(pts, s_min=8, seed=seed))
            cov_gb = granular.coverage_rate(pts, gset.centers)
            km_centers, _ = granular.kmeans(pts, 12, np.random.default_rng([seed, 99]))
            cov_km = granular.coverage_rate(pts, km_centers)
            wins += cov_gb >= cov_km
            total += 1
            economy_ok &= len(gset.balls) <= 256 // 4
    elapsed = time.monotonic() - started
    record(
        4,
        "pruned granular-ball coverage >= 12-means coverage in >= 8/10 seeds",
        wins >= 16 and elapsed < 30.0,
        f"{wins}/{total} wins, {elapsed:.1f}s",
    )
    record(5, "final ball count m <= N/4 on every blob fixture seed", economy_ok)


def test_criterion_6_scenario_robustness(desk_clean_runs, tmp_path, capsys):
    run_clean, _ = desk_clean_runs
    total_seconds = run_clean["seconds"]

    def vus_of(run) -> float:
        scores, _, labels = read_report(run["report"])
        return metrics.vus_pr(scores, labels)

    results = {"clean": vus_of(run_clean)}
    for kind in ("noise", "drift_noise"):
        run = run_cli_pipeline(tmp_path / kind, kind)
        total_seconds += run["seconds"]
        results[kind] = vus_of(run)
    capsys.readouterr()
    ok = (
        results["clean"] >= 0.95
        and results["noise"] >= 0.70
        and results["drift_noise"] >= 0.60
        and total_seconds < 600.0
    )
    record(
        6,
        "Type I >= 0.95, Type III >= 0.70, Type IV >= 0.60 VUS-PR at desk scale",
        ok,
        f"clean {results['clean']:.3f}, noise {results['noise']:.3f}, "
        f"drift+noise {results['drift_noise']:.3f}, {total_seconds:.0f}s",
    )


def test_criterion_7_ablation_ordering():
    def run(seed: int, **overrides) -> float:
        train_ts, test_ts = tsdata.synth_scenario("clean", 2000, seed)
        cfg = trainer.TrainConfig(window=2, layers=2, epochs=10, lr=1e-3, seed=seed, **overrides)
        model, _ = trainer.train(train_ts, cfg)
        from gboc import scoring

        report = scoring.detect(model, test_ts)
        return metrics.vus_pr(report.point_scores, test_ts.labels)

    seeds = (2024, 2025, 2026)
    variants = {
        "gbc_off": {"gbc_off": True},
        "prune_off": {"prune_off": True},
        "lam0": {"lam": 0.0},
        "lam1": {"lam": 1.0},
    }
    full = float(np.mean([run(s) for s in seeds]))
    averages = {name: float(np.mean([run(s, **ov) for s in seeds])) for name, ov in variants.items()}
    within_slack = all(full >= v - 0.02 for v in averages.values())
    strictly_better = sum(full > v for v in averages.values())
    record(
        7,
        "full model >= every ablation - 0.02 and strictly exceeds >= 2 of 4",
        within_slack and strictly_better >= 2,
        f"full {full:.4f} vs " + ", ".join(f"{k} {v:.4f}" for k, v in averages.items()),
    )


def test_criterion_8_metric_unit_correctness():
    ok = True
    labels = np.zeros(50, dtype=np.int64)
    labels[[10, 30]] = 1
    scores = labels.astype(np.float64)
    ok &= metrics.vus_pr(scores, labels) == pytest.approx(1.0)
    ok &= metrics.vus_roc(scores, labels) == pytest.approx(1.0)
    flags = labels.copy()
    ok &= metrics.affiliation_f1(flags, metrics.label_intervals(labels), 2.0) == pytest.approx(1.0)

    ok &= np.isnan(metrics.affiliation_f1(np.zeros(50, dtype=np.int64), metrics.label_intervals(labels), 2.0))

    sigma = 4.0
    single = np.zeros(60, dtype=np.int64)
    single[10] = 1
    pred = np.zeros(60, dtype=np.int64)
    pred[10 + int(sigma)] = 1
    kernel = metrics.affiliation_f1(pred, metrics.label_intervals(single), sigma)
    ok &= abs(kernel - np.exp(-0.5)) < 1e-12

    rng = np.random.default_rng(13)
    rnd_labels = (rng.random(2000) < 0.5).astype(np.int64)
    rnd_scores = rng.random(2000)
    roc = metrics.vus_roc(rnd_scores, rnd_labels, delta_set=(0,))
    ok &= abs(roc - 0.5) <= 0.05
    record(8, "metric unit fixtures exact; random VUS-ROC = 0.5 +/- 0.05", bool(ok), f"random roc {roc:.3f}")


def test_criterion_9_persistence_round_trip(tmp_path):
    ok = True
    for seed in range(20):
        model = random_model(seed)
        p1 = tmp_path / f"m{seed}.gboc"
        p2 = tmp_path / f"m{seed}b.gboc"
        model_io.save_model(model, p1)
        model_io.save_model(model_io.load_model(p1), p2)
        ok &= p1.read_bytes() == p2.read_bytes()

    blob = (tmp_path / "m0.gboc").read_bytes()
    rejections = 0
    try:
        model_io._parse(blob[: len(blob) // 2])
    except TruncatedFile:
        rejections += 1
    try:
        model_io._parse(b"NOPE" + blob[4:])
    except BadMagic:
        rejections += 1
    try:
        model_io._parse(blob[:4] + struct.pack("<I", 9) + blob[8:])
    except VersionUnsupported:
        rejections += 1
    try:
        model_io._parse(blob + b"\x00")
    except InvariantViolation:
        rejections += 1
    record(
        9,
        "20 models round-trip byte-identically; corrupt files rejected typed",
        ok and rejections == 4,
        f"{rejections}/4 rejection classes",
    )


def test_criterion_10_determinism(desk_clean_runs):
    run_a, run_b = desk_clean_runs
    same_model = run_a["model"].read_bytes() == run_b["model"].read_bytes()
    same_report = run_a["report"].read_bytes() == run_b["report"].read_bytes()
    same_curve = run_a["curve"].read_bytes() == run_b["curve"].read_bytes()
    record(
        10,
        "identical flags and seed give byte-identical model and report files",
        same_model and same_report and same_curve,
        f"model {same_model}, report {same_report}, curve {same_curve}",
    )
