"""Experiment orchestration: parameter sweeps over viewing conditions.

A sweep regenerates the viewing conditions at each point, renormalizes the
shared corpus, runs perceive -> observe -> MRMC per method, and writes one
CSV row per (method, sweep value).  Everything is derived from one master
seed, so identical configs produce byte-identical CSV output.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import percept, stats
from .errors import ConfigError, DomainError
from .stackgen import (
    ImageStack,
    LesionSpec,
    ViewingConditions,
    generate_corpus,
    normalize_to_display,
)

__all__ = [
    "SweepConfig",
    "TrendReport",
    "CSV_COLUMNS",
    "DEFAULT_GRIDS",
    "DEFAULT_LESION_AMPLITUDE",
    "viewing_distance",
    "classify_trend",
    "run_sweep",
]

CSV_COLUMNS = [
    "method",
    "contrast",
    "l_max",
    "ssr",
    "viewing_distance_cm",
    "browse_speed",
    "auc",
    "auc_var",
    "error_bar",
    "d_prime",
    "n_cases",
    "n_readers",
    "master_seed",
]

SWEEPABLE = ("contrast", "l_max", "ssr", "browse_speed")

DEFAULT_GRIDS = {
    "contrast": [50.0, 100.0, 200.0, 400.0, 800.0],
    "l_max": [100.0, 200.0, 300.0, 500.0, 800.0],
    "ssr": [1.5, 30.0, 120.0, 250.0, 500.0],
    "browse_speed": [10.0, 50.0, 200.0, 800.0, 3200.0],
}

# Lesion peak height (in nominal [0, 1] background units) frozen after a
# one-time calibration: the PM method at the default viewing conditions then
# lands at a mid-range d' (between 1 and 2), clear of floor and ceiling.
DEFAULT_LESION_AMPLITUDE = 0.25

DISPLAY_WIDTH_CM = 3.0
DISPLAY_WIDTH_PX = 64


def viewing_distance(
    ssr: float, width_cm: float = DISPLAY_WIDTH_CM, width_px: int = DISPLAY_WIDTH_PX
) -> float:
    """Viewing distance in cm for a sampling rate of ``ssr`` pixels/degree.

    Assumes ``width_px`` pixels displayed across ``width_cm`` on the panel,
    viewed orthogonally: d = width / (2 * tan(width_px * pi / (360 * ssr))).
    """
    if not ssr > 0:
        raise DomainError(f"ssr must be positive, got {ssr!r}")
    half_angle = width_px * math.pi / (360.0 * ssr)
    if half_angle >= math.pi / 2:
        raise DomainError(
            f"ssr {ssr!r} puts the display outside the orthogonal-viewing model"
        )
    return width_cm / (2.0 * math.tan(half_angle))


def classify_trend(d_primes, error_bars) -> str:
    """Label a sweep as increasing, decreasing, peaked, or constant.

    A difference counts only when it exceeds the two points' combined error
    bars.  "Peaked" means some interior point significantly exceeds both
    endpoints; "increasing"/"decreasing" mean the net endpoint change is
    significant with no significant reversal along the way.
    """
    d = np.asarray(d_primes, dtype=float)
    b = np.asarray(error_bars, dtype=float)
    if d.size < 3 or b.size != d.size:
        raise DomainError("classify_trend needs at least 3 matched points")

    for i in range(1, d.size - 1):
        if d[i] - d[0] > b[i] + b[0] and d[i] - d[-1] > b[i] + b[-1]:
            return "peaked"
    diffs = np.diff(d)
    combined = b[:-1] + b[1:]
    net = d[-1] - d[0]
    net_bar = b[0] + b[-1]
    if net > net_bar and not np.any(diffs < -combined):
        return "increasing"
    if -net > net_bar and not np.any(diffs > combined):
        return "decreasing"
    return "constant"


@dataclass(frozen=True)
class SweepConfig:
    """A validated run configuration (see ``SweepConfig.from_dict``)."""

    methods: tuple[str, ...] = ("LF", "PM", "MC")
    parameter: str = "contrast"
    values: tuple[float, ...] = ()
    viewing: ViewingConditions = field(default_factory=ViewingConditions)
    n_pairs: int = 200
    nx: int = 64
    ny: int = 64
    nt: int = 32
    beta: float = 3.0
    lesion: LesionSpec = field(
        default_factory=lambda: LesionSpec(amplitude=DEFAULT_LESION_AMPLITUDE)
    )
    master_seed: int = 0
    n_channels: int = 15
    spread: float = 10.0
    n_readers: int = 4
    train_fraction: float = 0.8

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("methods: at least one method is required")
        for m in self.methods:
            if m not in percept.METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")
        if self.parameter not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter: must be one of {SWEEPABLE}, got {self.parameter!r}")
        values = self.values or tuple(DEFAULT_GRIDS[self.parameter])
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        if not self.values:
            raise ConfigError("sweep.values: must be nonempty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep.values: must be strictly increasing")
        if self.n_pairs < 4:
            raise ConfigError(f"corpus.n_pairs: need at least 4 pairs, got {self.n_pairs}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        def take(mapping, allowed, context):
            unknown = set(mapping) - set(allowed)
            if unknown:
                raise ConfigError(f"{context}: unknown key(s) {sorted(unknown)}")
            return mapping

        take(raw, ["version", "methods", "sweep", "viewing", "corpus", "observer"], "config")
        if raw.get("version", 1) != 1:
            raise ConfigError(f"version: unsupported config version {raw.get('version')!r}")
        kwargs = {}
        if "methods" in raw:
            kwargs["methods"] = tuple(str(m).upper() for m in raw["methods"])
        sweep = take(raw.get("sweep", {}), ["parameter", "values"], "sweep")
        if "parameter" in sweep:
            kwargs["parameter"] = sweep["parameter"]
        if "values" in sweep:
            kwargs["values"] = tuple(sweep["values"])
        viewing = take(
            raw.get("viewing", {}), ["l_max", "contrast", "ssr", "browse_speed"], "viewing"
        )
        try:
            kwargs["viewing"] = ViewingConditions(**viewing)
        except DomainError as exc:
            raise ConfigError(f"viewing: {exc}") from exc
        corpus = take(
            raw.get("corpus", {}),
            ["n_pairs", "nx", "ny", "nt", "beta", "lesion", "master_seed"],
            "corpus",
        )
        lesion_raw = take(
            corpus.pop("lesion", {}), ["amplitude", "sigma_xy", "sigma_t", "center"], "corpus.lesion"
        )
        if "center" in lesion_raw and lesion_raw["center"] is not None:
            lesion_raw["center"] = tuple(lesion_raw["center"])
        try:
            kwargs["lesion"] = LesionSpec(
                amplitude=lesion_raw.get("amplitude", DEFAULT_LESION_AMPLITUDE),
                **{k: v for k, v in lesion_raw.items() if k != "amplitude"},
            )
        except DomainError as exc:
            raise ConfigError(f"corpus.lesion: {exc}") from exc
        kwargs.update(corpus)
        obs = take(
            raw.get("observer", {}),
            ["n_channels", "spread", "n_readers", "train_fraction"],
            "observer",
        )
        kwargs.update(obs)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: not valid JSON ({exc})") from exc
        return cls.from_dict(raw)

    def vc_at(self, value: float) -> ViewingConditions:
        return dc_replace(self.viewing, **{self.parameter: value})


@dataclass
class TrendReport:
    """Per-method d' trends over the sweep, with normalized values and labels."""

    parameter: str
    values: tuple[float, ...]
    d_primes: dict[str, list[float]]
    error_bars: dict[str, list[float]]
    normalized: dict[str, list[float]]
    labels: dict[str, str]
    inconclusive: dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": list(self.values),
            "d_primes": self.d_primes,
            "error_bars": self.error_bars,
            "normalized": self.normalized,
            "labels": self.labels,
            "inconclusive": self.inconclusive,
        }


def _clamped_auc(auc_mean: float, n0: int, n1: int) -> float:
    # Keep d' finite on a perfectly separated finite sample.
    eps = 1.0 / (2.0 * n0 * n1)
    return min(max(auc_mean, eps), 1.0 - eps)


def _run_point(config: SweepConfig, corpus: list[ImageStack], method: str, point: int):
    vc = config.vc_at(config.values[point])
    normalized = [normalize_to_display(s, vc) for s in corpus]
    if method == "MC":
        stacks = normalized

        def reader_perceive(reader):
            return [
                percept.perceive(
                    s, "MC", vc,
                    mc_seed=[config.master_seed, point, reader, i],
                )
                for i, s in enumerate(normalized)
            ]
    else:
        stacks = [percept.perceive(s, method, vc) for s in normalized]
        reader_perceive = None

    channels = stats.observer.make_channels(config.nx, config.ny, config.n_channels, config.spread)
    _, reader_scores = stats.make_readers(
        stacks,
        n_readers=config.n_readers,
        master_seed=config.master_seed,
        channels=channels,
        train_fraction=config.train_fraction,
        reader_perceive=reader_perceive,
    )
    res = stats.mrmc_one_shot(stats.McmcInput(readers=reader_scores))
    dp = stats.d_prime(_clamped_auc(res.auc_mean, res.n_absent, res.n_present))
    return {
        "method": method,
        "contrast": vc.contrast,
        "l_max": vc.l_max,
        "ssr": vc.ssr,
        "viewing_distance_cm": viewing_distance(vc.ssr),
        "browse_speed": vc.browse_speed,
        "auc": res.auc_mean,
        "auc_var": res.auc_variance,
        "error_bar": res.error_bar,
        "d_prime": dp,
        "n_cases": res.n_absent + res.n_present,
        "n_readers": res.n_readers,
        "master_seed": config.master_seed,
    }


def run_sweep(config: SweepConfig, csv_path, threads: int = 1) -> TrendReport:
    """Run the full sweep, write the CSV, and return the trend report.

    Sweep points are independent jobs; with ``threads > 1`` they run on a
    bounded pool, but rows are always written in (method, value) order so
    the output does not depend on scheduling.  A mid-run failure leaves the
    completed rows in the CSV plus an error manifest alongside it.
    """
    corpus = generate_corpus(
        config.n_pairs, config.nx, config.ny, config.nt, config.beta,
        config.lesion, config.master_seed,
    )
    jobs = [(m, i) for m in config.methods for i in range(len(config.values))]
    rows: dict[tuple[str, int], dict] = {}
    failures = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {
            key: pool.submit(_run_point, config, corpus, key[0], key[1]) for key in jobs
        }
        for key, fut in futures.items():
            try:
                rows[key] = fut.result()
            except Exception as exc:  # noqa: BLE001 - reported in the manifest
                failures.append({"method": key[0], "value": config.values[key[1]],
                                 "error": type(exc).__name__, "message": str(exc)})

    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for key in jobs:
            if key in rows:
                writer.writerow({k: _fmt(v) for k, v in rows[key].items()})

    if failures:
        manifest_path = str(csv_path) + ".errors.json"
        with open(manifest_path, "w") as fh:
            json.dump({"failures": failures}, fh, indent=2)
            fh.write("\n")
        raise DomainError(
            f"{len(failures)} sweep point(s) failed; see {manifest_path}"
        )

    d_primes, error_bars, normalized, labels, inconclusive = {}, {}, {}, {}, {}
    for method in config.methods:
        dp = [rows[(method, i)]["d_prime"] for i in range(len(config.values))]
        # The CSV error bar is on the AUC scale; trend classification compares
        # d' values, so propagate the bar through d'(AUC) (delta method).
        eb = [
            _dprime_error_bar(d, rows[(method, i)]["error_bar"])
            for i, d in enumerate(dp)
        ]
        d_primes[method] = dp
        error_bars[method] = eb
        peak = max(dp)
        if peak <= 0:
            normalized[method] = [float("nan")] * len(dp)
            inconclusive[method] = True
        else:
            normalized[method] = [v / peak for v in dp]
            inconclusive[method] = False
        labels[method] = classify_trend(dp, eb)
    return TrendReport(
        parameter=config.parameter,
        values=config.values,
        d_primes=d_primes,
        error_bars=error_bars,
        normalized=normalized,
        labels=labels,
        inconclusive=inconclusive,
    )


def _dprime_error_bar(dp: float, auc_error_bar: float) -> float:
    # d(d')/d(AUC) = 2*sqrt(pi)*exp((d'/2)^2), capped to keep saturated
    # points from producing infinite bars.
    slope = 2.0 * math.sqrt(math.pi) * math.exp(min((dp / 2.0) ** 2, 50.0))
    return auc_error_bar * slope


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
