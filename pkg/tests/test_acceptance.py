"""End-to-end acceptance gate.

One test per acceptance criterion; each prints a single PASS line on
success (a failure shows up as the test's FAILED line instead).  The
full-scale trend run is expensive and sits behind the VOBSIM_FULL_TRENDS
environment gate; the default smoke version finishes in a few minutes.
"""

import collections
import math
import os
import time

import numpy as np
import pytest

from vobsim import percept, stats
from vobsim.csf import (
    DEFAULT_PARAMS,
    FieldGeometry,
    csf,
    detection_probability,
    low_freq_attenuation,
    optical_mtf,
    pupil_diameter,
    temporal_filter,
)
from vobsim.observer import hotelling_weights, make_channels, score, train
from vobsim.stackgen import (
    LABEL_ABSENT,
    LABEL_PRESENT,
    ImageStack,
    ViewingConditions,
)
from vobsim.sweep import SweepConfig, run_sweep

from test_csf import GOLDEN_S


def _announce(n: int, text: str) -> None:
    print(f"\n[ACCEPTANCE {n}] PASS: {text}")


def test_criterion_1_csf_golden_suite():
    t0 = time.time()
    assert len(GOLDEN_S) >= 10
    for (u, w, l_avg, x0), want in GOLDEN_S.items():
        got = csf(u, w, FieldGeometry(x0=x0, l_avg=l_avg))
        assert got == pytest.approx(want, rel=1e-9)
    # sub-term anchors
    assert optical_mtf(0.0, 0.01) == 1.0
    assert low_freq_attenuation(0.0) == 1.0
    assert temporal_filter(0.0, 0.03, 7.0) == 1.0
    assert temporal_filter(0.0, 0.018, 4.0) == 1.0
    assert pupil_diameter(100.0, 4.0) == 5.0  # L * X0^2 = 1600
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _announce(1, f"{len(GOLDEN_S)} golden CSF points at rel 1e-9 plus "
                 f"sub-term anchors ({elapsed:.2f}s)")


def test_criterion_2_psychometric():
    t0 = time.time()
    for s in (0.5, 1.0, 3.0, 100.0, 657.83):
        assert detection_probability(1.0 / s, s) == pytest.approx(0.5, abs=1e-12)
    m = np.linspace(0.0, 3.0, 1000)
    p = detection_probability(m, np.float64(1.0))
    assert np.all(np.diff(p) > 0)
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _announce(2, f"p = 1/2 at threshold (1e-12) and strictly monotone over "
                 f"1000 points ({elapsed:.2f}s)")


def _mirror(c: np.ndarray) -> np.ndarray:
    return np.roll(c[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))


def test_criterion_3_spectral_symmetry():
    t0 = time.time()
    rng = np.random.default_rng(2026)
    vc = ViewingConditions()
    appliers = {
        "LF": lambda spec, i: percept.apply_lf(spec, vc),
        "PM": lambda spec, i: percept.apply_pm(spec, vc),
        "MC": lambda spec, i: percept.apply_mc(spec, vc, seed=[77, i]),
    }
    for i in range(100):
        stack = ImageStack(data=rng.random((64, 64, 32)) + 0.5)
        spec = percept.forward(stack)
        dc = spec.coeffs[0, 0, 0]
        for name, apply_fn in appliers.items():
            out = apply_fn(spec, i)
            c = out.coeffs
            assert np.array_equal(c, np.conj(_mirror(c))), name
            assert abs(c[0, 0, 0] - dc) <= 1e-12 * abs(dc), name
            img = np.fft.ifftn(c)
            scale = np.abs(img).max()
            assert np.abs(img.imag).max() <= 1e-9 * scale, name
    elapsed = time.time() - t0
    assert elapsed < 120.0
    _announce(3, f"100 stacks x 3 methods: exact conjugate symmetry, DC to "
                 f"1e-12, imaginary residue < 1e-9 ({elapsed:.1f}s)")


def test_criterion_4_component_semantics():
    # Four cosine components along x, constant in y and t, chosen so the
    # first sits above the visibility threshold and the rest below it.
    vc = ViewingConditions()
    nx, ny, nt = 64, 8, 8
    ks = [3, 6, 10, 14]
    geom = FieldGeometry(x0=nx / vc.ssr, l_avg=1.0)
    s_vals = [csf(k / nx * vc.ssr, 0.0, geom) for k in ks]
    targets = [1.55, 0.8, 0.7, 0.6]  # m*S per component
    ms = [t / s for t, s in zip(targets, s_vals)]
    p_vals = [detection_probability(m, s) for m, s in zip(ms, s_vals)]
    assert p_vals[0] > 0.9 and max(p_vals[1:]) < 0.5

    x = np.arange(nx)
    profile = 1.0 + sum(m * np.cos(2 * np.pi * k * x / nx) for m, k in zip(ms, ks))
    data = np.broadcast_to(profile[:, None, None], (nx, ny, nt)).copy()
    spec = percept.forward(ImageStack(data=data))

    pm = percept.apply_pm(spec, vc)
    for k, p in zip(ks, p_vals):
        assert percept.modulation(pm, (k, 0, 0)) == pytest.approx(p, abs=1e-9)

    draws = 10_000
    kept_counts = np.zeros(4)
    outcomes = collections.Counter()
    for i in range(draws):
        mc = percept.apply_mc(spec, vc, seed=[4242, i])
        kept = tuple(percept.modulation(mc, (k, 0, 0)) > 0.5 for k in ks)
        kept_counts += np.array(kept, dtype=float)
        outcomes[kept] += 1
    freqs = kept_counts / draws
    for f, p in zip(freqs, p_vals):
        assert abs(f - p) <= 3.0 * math.sqrt(p * (1 - p) / draws)
    modal = outcomes.most_common(1)[0][0]
    assert modal == (True, False, False, False)
    _announce(4, "PM amplitudes equal p to 1e-9; MC keep-frequencies within "
                 "3-sigma over 10,000 draws; modal outcome keeps only the "
                 "suprathreshold component")


def test_criterion_5_observer_oracle():
    rng = np.random.default_rng(55)
    # Template vs closed form on synthetic Gaussian channel data.
    f0 = rng.standard_normal((500, 15)) @ np.diag(rng.uniform(0.5, 2.0, 15))
    f1 = rng.standard_normal((500, 15)) + rng.uniform(0.2, 0.8, 15)
    w = hotelling_weights(f0, f1, ridge_scale=1e-12)
    cov = 0.5 * (np.cov(f0, rowvar=False) + np.cov(f1, rowvar=False))
    closed = np.linalg.inv(cov) @ (f1.mean(axis=0) - f0.mean(axis=0))
    assert np.allclose(w, closed, rtol=1e-6, atol=1e-6 * np.abs(closed).max())

    # AUC vs the analytic value for a known signal in iid Gaussian noise.
    ch = make_channels(16, 16, n_channels=10)
    signal = 1.0 * ch.matrix[:, 0].reshape(16, 16)
    signal3d = np.repeat(signal[:, :, None], 8, axis=2) / np.sqrt(8)

    def batch(n_per_class):
        stacks = []
        for label in (LABEL_ABSENT, LABEL_PRESENT):
            for _ in range(n_per_class):
                data = rng.standard_normal((16, 16, 8)) + 10.0
                if label == LABEL_PRESENT:
                    data = data + signal3d
                stacks.append(ImageStack(data=data, label=label))
        return stacks

    model = train(batch(300), ch)
    test_stacks = batch(100)  # 200 test cases
    scores = np.array([score(model, s) for s in test_stacks])
    labels = np.array([s.label == LABEL_PRESENT for s in test_stacks])
    got = stats.auc(stats.CaseScores(scores=scores, labels=labels))
    chan_sig = ch.matrix.T @ signal3d[:, :, 0].ravel()
    d_total = np.linalg.norm(chan_sig) * np.sqrt(8)
    want = 0.5 * (1.0 + math.erf(d_total / 2.0))  # Phi(d/sqrt(2))
    assert got == pytest.approx(want, abs=0.05)
    _announce(5, f"template matches closed form to 1e-6; AUC {got:.3f} within "
                 f"0.05 of analytic {want:.3f} on 200 cases")


def _gaussian_ensemble(rng, n_per_class, n_readers=4, d=1.2, sigma_reader=0.6):
    n = 2 * n_per_class
    labels = np.concatenate([np.zeros(n_per_class, bool), np.ones(n_per_class, bool)])
    case = rng.standard_normal(n) + d * labels
    per_reader = case[None, :] + sigma_reader * rng.standard_normal((n_readers, n))
    return [stats.CaseScores(scores=per_reader[r], labels=labels, reader_id=r)
            for r in range(n_readers)]


def test_criterion_6_mrmc_oracle():
    t0 = time.time()
    rng = np.random.default_rng(66)
    reps = 2000
    aucs, estimates = [], []
    for _ in range(reps):
        res = stats.mrmc_one_shot(stats.McmcInput(_gaussian_ensemble(rng, 50)))
        aucs.append(res.auc_mean)
        estimates.append(res.auc_variance)
    empirical = np.var(aucs, ddof=1)
    one_shot = float(np.mean(estimates))
    assert one_shot == pytest.approx(empirical, rel=0.20)

    bars_small = np.mean([
        stats.mrmc_one_shot(stats.McmcInput(_gaussian_ensemble(rng, 50))).error_bar
        for _ in range(100)
    ])
    bars_large = np.mean([
        stats.mrmc_one_shot(stats.McmcInput(_gaussian_ensemble(rng, 200))).error_bar
        for _ in range(100)
    ])
    ratio = bars_small / bars_large
    assert ratio == pytest.approx(2.0, rel=0.3)
    elapsed = time.time() - t0
    assert elapsed < 300.0
    _announce(6, f"one-shot variance {one_shot:.2e} within 20% of empirical "
                 f"{empirical:.2e} over 2000 replicates; 4x cases shrink "
                 f"error bars {ratio:.2f}x ({elapsed:.1f}s)")


# (expected full-scale label, smoke may degrade to "constant") per method
TREND_EXPECTATIONS = {
    "contrast": {"LF": "constant", "PM": "increasing", "MC": "increasing"},
    "ssr": {"LF": None, "PM": "peaked", "MC": "peaked"},  # LF: just not peaked
    "browse_speed": {"LF": "peaked", "PM": "peaked", "MC": "peaked"},
    "l_max": {"LF": "decreasing", "PM": "decreasing", "MC": "constant"},
}


def test_criterion_7_trend_reproduction(tmp_path):
    t0 = time.time()
    full = os.environ.get("VOBSIM_FULL_TRENDS") == "1"
    n_pairs = 200 if full else 50
    labels = {}
    for param, expected in TREND_EXPECTATIONS.items():
        cfg = SweepConfig(parameter=param, n_pairs=n_pairs, master_seed=7)
        report = run_sweep(cfg, tmp_path / f"{param}.csv", threads=4)
        labels[param] = report.labels
        for method, want in expected.items():
            got = report.labels[method]
            if param == "ssr" and method == "LF":
                assert got != "peaked", f"{param}/{method}: {got}"
            elif full:
                assert got == want, f"{param}/{method}: {got} != {want}"
            else:
                assert got in (want, "constant"), f"{param}/{method}: {got}"
    elapsed = time.time() - t0
    if not full:
        assert elapsed < 300.0
    summary = "; ".join(
        f"{p}: " + ",".join(f"{m}={v}" for m, v in lab.items())
        for p, lab in labels.items()
    )
    scale = "full 200-pair" if full else "50-pair smoke"
    _announce(7, f"{scale} trend labels consistent ({elapsed:.0f}s) [{summary}]")


def test_criterion_8_determinism(tmp_path):
    cfg = SweepConfig(
        methods=("LF", "PM", "MC"), parameter="contrast",
        values=(100.0, 200.0, 400.0), n_pairs=6, nx=16, ny=16, nt=8,
        n_channels=8, spread=5.0, n_readers=2, master_seed=31,
    )
    run_sweep(cfg, tmp_path / "a.csv", threads=1)
    run_sweep(cfg, tmp_path / "b.csv", threads=3)
    a = (tmp_path / "a.csv").read_bytes()
    b = (tmp_path / "b.csv").read_bytes()
    assert a == b
    _announce(8, f"sweep re-run is byte-identical ({len(a)} bytes of CSV)")
