"""Experiment configuration, the simulate/bound/distance pipeline, and output files."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .asymptotics import optimality_constants, rate_fit
from .kernel_algebra import ChaosKernels, indicator_kernel
from .malliavin import NormalizedUStat, ReplicationSample, simulate_replications
from .point_process import density_from_name, load_density_csv
from .stein import empirical_w1, optimality_functional

CSV_COLUMNS = ("n", "t", "batch", "replications", "seed", "mean_F", "mean_F_stderr", "var_F",
               "var_F_stderr", "exact_mean", "exact_variance", "phi1", "phi1_stderr", "phi2",
               "phi2_stderr", "phi", "w1", "T_n", "T_n_stderr", "T_n_sqrt_n", "method")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dim: int = 1
    density: str = "uniform"
    density_params: dict = field(default_factory=dict)
    intensities: list = field(default_factory=lambda: [128, 256, 512, 1024, 2048])
    radius_rule: str = "power"  # "power": t = n^{-gamma}; "fixed": t = radius
    gamma: Fraction = Fraction(1, 4)
    radius: float | None = None
    replications: int = 2000
    z_samples: int = 256
    seed: int = 0
    out: str = "results"
    batch_size: int = 100
    method: str = "auto"  # "exact", "monte_carlo" or "auto"
    control: str = "first_chaos"
    kernel_samples: int = 200_000

    def __post_init__(self):
        self.gamma = _as_fraction(self.gamma)
        self.intensities = [float(n) for n in self.intensities]
        self.validate()

    # -- validation -----------------------------------------------------------
    def validate(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.intensities:
            raise ConfigError("intensities must be a non-empty list")
        if any(not (n > 0 and math.isfinite(n)) for n in self.intensities):
            raise ConfigError("every intensity must be positive and finite")
        if int(self.replications) != self.replications or self.replications < 2:
            raise ConfigError(f"replications must be an integer >= 2, got {self.replications}")
        if self.z_samples < 2:
            raise ConfigError("z_samples must be at least 2")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.method not in ("auto", "exact", "monte_carlo"):
            raise ConfigError(f"method must be auto, exact or monte_carlo, got {self.method!r}")
        if self.control not in ("first_chaos", "linear", "none"):
            raise ConfigError(f"unknown control {self.control!r}")
        if self.radius_rule == "fixed":
            if self.radius is None or not 0 < self.radius < 0.5:
                raise ConfigError("fixed radius rule needs 0 < radius < 1/2")
        elif self.radius_rule == "power":
            if self.gamma <= 0:
                raise ConfigError("gamma must be positive")
            bad = [n for n in self.intensities if not n ** -float(self.gamma) < 0.5]
            if bad:
                raise ConfigError(f"t = n^-gamma must be below 1/2; fails for n = {bad}")
        else:
            raise ConfigError(f"radius_rule must be 'power' or 'fixed', got {self.radius_rule!r}")

    def regime(self) -> dict:
        """Which growth conditions the radius rule satisfies as n grows."""
        if self.radius_rule == "fixed":
            return {"n_td_to_infinity": True, "n_td3_to_infinity": True,
                    "note": "fixed radius: dense regime"}
        g = self.gamma
        return {"n_td_to_infinity": g < Fraction(1, self.dim),
                "n_td3_to_infinity": g < Fraction(1, 3 * self.dim),
                "note": f"t = n^(-{g})"}

    def radius_for(self, n: float) -> float:
        return self.radius if self.radius_rule == "fixed" else n ** -float(self.gamma)

    def load_density(self):
        if self.density.endswith(".csv"):
            return load_density_csv(self.density, self.dim)
        return density_from_name(self.density, self.dim, **self.density_params)

    # -- (de)serialisation ----------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma"] = str(self.gamma)
        return d


def _as_fraction(g) -> Fraction:
    try:
        return Fraction(str(g)) if not isinstance(g, Fraction) else g
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"gamma must be rational, got {g!r}") from exc


@dataclass
class RunResult:
    n: float
    t: float
    replications: int
    mean_F: float
    mean_F_stderr: float
    var_F: float
    var_F_stderr: float
    exact_mean: float
    exact_variance: float
    phi1: float
    phi1_stderr: float
    phi2: float
    phi2_stderr: float
    phi: float
    w1: float
    T_n: float
    T_n_stderr: float
    T_n_sqrt_n: float
    T_n_plain: float
    T_n_plain_stderr: float
    wall_time: float
    seed: int
    method: str

    def check_finite(self) -> None:
        for k, v in asdict(self).items():
            if isinstance(v, float) and not math.isfinite(v):
                raise FloatingPointError(f"non-finite {k} in run result")


def _var_stderr(x: np.ndarray) -> float:
    # delta-method stderr of the sample variance
    r = x.size
    c = x - x.mean()
    m2, m4 = float(np.mean(c ** 2)), float(np.mean(c ** 4))
    return math.sqrt(max(m4 - m2 * m2, 0.0) / r)


def _stats(us, sample: ReplicationSample, seed: int, control: str, method: str,
           n: float, t: float, wall: float = 0.0) -> RunResult:
    r = sample.value.size
    raw = sample.value * us.sd + us.mean
    dsq = sample.defect_sq
    p1 = math.sqrt(max(float(dsq.mean()), 0.0))
    p1_se = float(dsq.std(ddof=1) / math.sqrt(r)) / (2 * p1) if p1 > 0 else 0.0
    p2 = float(sample.phi2_integral.mean())
    p2_se = float(sample.phi2_integral.std(ddof=1) / math.sqrt(r))
    chaos = _first_chaos(us, sample)
    tn = optimality_functional(us, r, seed, control=control if chaos is not None else "linear",
                               values=np.column_stack([sample.value,
                                                       chaos if chaos is not None else 0 * raw]))
    return RunResult(
        n=n, t=t, replications=r,
        mean_F=float(raw.mean()), mean_F_stderr=float(raw.std(ddof=1) / math.sqrt(r)),
        var_F=float(raw.var(ddof=1)), var_F_stderr=_var_stderr(raw),
        exact_mean=us.mean, exact_variance=us.variance,
        phi1=p1, phi1_stderr=p1_se, phi2=p2, phi2_stderr=p2_se, phi=p1 + p2,
        w1=empirical_w1(sample.value),
        T_n=tn.value, T_n_stderr=tn.stderr, T_n_sqrt_n=tn.scaled,
        T_n_plain=tn.plain, T_n_plain_stderr=tn.plain_stderr,
        wall_time=wall, seed=seed, method=method,
    )


def _first_chaos(us, sample: ReplicationSample):
    if not us.ck.closed_form_available:
        return None
    return us.intensity * us.ck.ball * (sample.points - us.intensity) / us.sd


def _statistic(cfg: ExperimentConfig, n: float, density) -> NormalizedUStat:
    ck = ChaosKernels(indicator_kernel(cfg.radius_for(n)), density, n,
                      samples=cfg.kernel_samples, seed=cfg.seed)
    return NormalizedUStat(ck)


def _method(cfg: ExperimentConfig, us: NormalizedUStat) -> str:
    if cfg.method != "auto":
        return cfg.method
    return "exact" if us.ck.closed_form_available and us.ck.dim == 1 else "monte_carlo"


def simulate_point(cfg: ExperimentConfig, n: float, density=None, threads: int | None = None):
    """Run all replications at one intensity; returns the statistic, method and sample."""
    density = density or cfg.load_density()
    us = _statistic(cfg, n, density)
    method = _method(cfg, us)
    if method == "exact" and not us.ck.closed_form_available:
        raise ConfigError("method 'exact' needs the uniform density")
    sample = simulate_replications(us, cfg.replications, cfg.seed, cfg.z_samples, method, threads)
    return us, method, sample


def _slice(sample: ReplicationSample, lo: int, hi: int) -> ReplicationSample:
    return ReplicationSample(sample.value[lo:hi], sample.inner[lo:hi], sample.defect_sq[lo:hi],
                             sample.phi2_integral[lo:hi], sample.points[lo:hi])


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, write: bool = True,
                   emit_plot_data: bool = False, with_constants: bool = True) -> list[RunResult]:
    """Simulate every intensity, write the batch CSV and JSON summary, return per-n results."""
    density = cfg.load_density()
    results, rows = [], []
    for n in cfg.intensities:
        t0 = time.perf_counter()
        us, method, sample = simulate_point(cfg, n, density, threads)
        t = cfg.radius_for(n)
        res = _stats(us, sample, cfg.seed, cfg.control, method, n, t,
                     time.perf_counter() - t0)
        res.check_finite()
        results.append(res)
        for b, lo in enumerate(range(0, cfg.replications, cfg.batch_size)):
            hi = min(lo + cfg.batch_size, cfg.replications)
            if hi - lo < 2:
                continue
            br = _stats(us, _slice(sample, lo, hi), cfg.seed, cfg.control, method, n, t)
            rows.append(_csv_row(br, b))
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "results.csv", rows)
        summary = summarize(cfg, results, with_constants)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default))
        if emit_plot_data:
            write_plot_data(out / "plot_data.csv", results)
    return results


def _csv_row(res: RunResult, batch) -> dict:
    d = asdict(res)
    d["batch"] = batch
    return {k: d[k] for k in CSV_COLUMNS}


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, quoting=csv.QUOTE_MINIMAL,
                           lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_plot_data(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["log_n", "log_phi", "log_w1"])
        for r in results:
            w.writerow([repr(math.log(r.n)), repr(math.log(r.phi)), repr(math.log(r.w1))])


def summarize(cfg: ExperimentConfig, results, with_constants: bool = True) -> dict:
    summary = {"config": cfg.to_dict(), "regime": cfg.regime(),
               "results": [asdict(r) for r in results]}
    if len(results) >= 3:
        summary["rate_fit_phi"] = asdict(rate_fit([(r.n, r.phi) for r in results]))
        summary["rate_fit_w1"] = asdict(rate_fit([(r.n, r.w1) for r in results]))
    if with_constants:
        summary["constants"] = constants_report(cfg, results)
    return summary


def constants_report(cfg: ExperimentConfig, results) -> dict:
    oc = optimality_constants([(r.n, r.t, r.phi) for r in results], cfg.load_density(), cfg.dim,
                              samples=cfg.kernel_samples, seed=cfg.seed)
    return oc.to_dict()


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def read_rate_pairs(path, column: str = "phi") -> list[tuple[float, float]]:
    """(n, value) pairs from a CSV with either an ``n,value`` layout or the batch layout.

    Batch rows are merged per n: phi1 by the root of the replication-weighted
    mean square, phi2 by the weighted mean.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no rows in {path}")
    if "value" in rows[0]:
        return [(float(r["n"]), float(r["value"])) for r in rows]
    if column not in rows[0]:
        raise ValueError(f"column {column!r} not in {path}")
    groups: dict[float, list] = {}
    for r in rows:
        groups.setdefault(float(r["n"]), []).append(r)
    pairs = []
    for n, grp in sorted(groups.items()):
        w = np.array([float(r["replications"]) for r in grp])
        if column == "phi":
            p1 = math.sqrt(np.sum(w * np.array([float(r["phi1"]) ** 2 for r in grp])) / w.sum())
            p2 = float(np.sum(w * np.array([float(r["phi2"]) for r in grp])) / w.sum())
            pairs.append((n, p1 + p2))
        else:
            pairs.append((n, float(np.sum(w * np.array([float(r[column]) for r in grp])) / w.sum())))
    return pairs
