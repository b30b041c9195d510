"""Experiment configuration, Monte Carlo ensembles and verification studies."""
from __future__ import annotations

import csv
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli_w

from .diagnostics import DIAG_COLUMNS, write_diagnostics_csv
from .fields import State
from .integrator import STOP_REASONS, Schedule, simulate_batch
from .noise import NoiseSpec, path_seed
from .params import Params
from .spectral import Grid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

IC_FAMILIES = ("equilibrium", "single_mode", "random_smooth", "analytic")
QUANTILES = (0.05, 0.5, 0.95)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


# -- initial data -----------------------------------------------------------------

@dataclass(frozen=True)
class ICSpec:
    """Initial-data family.

    ``single_mode``: ``rho0 = 1 + amplitude cos(2 pi k x)``, ``u0 = velocity sin(2 pi k x)``.
    ``random_smooth``: Gaussian Fourier series with ``|k|**-decay`` envelope,
    scaled so that ``max|rho0 - 1| = amplitude`` and ``max|u0| = velocity``;
    drawn independently per path from ``seed``.
    ``analytic``: ``log rho0 = amplitude * sum_k ratio**k cos(2 pi k x) + const``
    (unit mass) and ``u0 = velocity * sum_k ratio**k sin(2 pi k x)``; its
    Fourier coefficients decay geometrically.
    """

    family: str = "single_mode"
    amplitude: float = 0.2
    wavenumber: int = 1
    velocity: float = 0.1
    decay: float = 4.0
    ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.family not in IC_FAMILIES:
            raise ConfigError(f"ic.family: unknown family {self.family!r}; expected one of {IC_FAMILIES}")
        if self.family in ("single_mode", "random_smooth") and not 0 <= self.amplitude < 1:
            raise ConfigError(f"ic.amplitude: must lie in [0, 1) to keep rho0 > 0, got {self.amplitude}")
        if int(self.wavenumber) != self.wavenumber or self.wavenumber < 1:
            raise ConfigError(f"ic.wavenumber: must be a positive integer, got {self.wavenumber}")
        if self.family == "random_smooth" and self.decay < 4:
            raise ConfigError(f"ic.decay: spectral decay must be >= 4, got {self.decay}")
        if not 0 < self.ratio < 1:
            raise ConfigError(f"ic.ratio: must lie in (0, 1), got {self.ratio}")


def _analytic_profiles(x, q):
    c = np.cos(2 * np.pi * x)
    s = np.sin(2 * np.pi * x)
    den = 1 - 2 * q * c + q * q
    return (q * c - q * q) / den, q * s / den


def _primitive(ic: ICSpec, x, m: int, path_index: int):
    if ic.family == "equilibrium":
        return np.ones_like(x), np.zeros_like(x)
    if ic.family == "single_mode":
        if ic.wavenumber > m:
            raise ConfigError(f"ic.wavenumber: {ic.wavenumber} exceeds the Galerkin order {m}")
        phase = 2 * np.pi * ic.wavenumber * x
        return 1 + ic.amplitude * np.cos(phase), ic.velocity * np.sin(phase)
    if ic.family == "analytic":
        # normalising constant from a fixed fine quadrature so it does not depend on m
        fine = np.arange(4096) / 4096
        z = np.mean(np.exp(ic.amplitude * _analytic_profiles(fine, ic.ratio)[0]))
        P, Q = _analytic_profiles(x, ic.ratio)
        return np.exp(ic.amplitude * P) / z, ic.velocity * Q
    rng = np.random.default_rng(np.random.SeedSequence([int(ic.seed), int(path_index)]))
    k = np.arange(1, m + 1)
    env = k ** (-float(ic.decay))
    out = []
    for _ in range(2):
        a, b = rng.standard_normal((2, m)) * env
        f = np.cos(2 * np.pi * np.outer(x, k)) @ a + np.sin(2 * np.pi * np.outer(x, k)) @ b
        out.append(f / np.max(np.abs(f)))
    return 1 + ic.amplitude * out[0], ic.velocity * out[1]


def initial_state(ic: ICSpec, params: Params, n_paths: int = 1, grid: Grid | None = None) -> State:
    """Projected initial state; stacked over paths for ``random_smooth`` or ``n_paths > 1``."""
    grid = grid or Grid.for_order(params.galerkin_order)
    m = params.galerkin_order
    if ic.family != "random_smooth" and n_paths == 1:
        rho, u = _primitive(ic, grid.x, m, 0)
        return State.from_primitive(rho, u, params, grid)
    pairs = [_primitive(ic, grid.x, m, i) for i in range(n_paths)]
    rho = np.array([p[0] for p in pairs])
    u = np.array([p[1] for p in pairs])
    return State.from_primitive(rho, u, params, grid)


# -- configuration ------------------------------------------------------------------

@dataclass(frozen=True)
class RunOptions:
    n_paths: int = 1
    master_seed: int = 0
    output_dir: str = "out"
    moments: tuple = (1, 2)
    batch_size: int = 16
    threads: int = 1
    plots: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    params: Params
    schedule: Schedule = field(default_factory=lambda: Schedule(t_end=0.01, dt=1e-4))
    ic: ICSpec = field(default_factory=ICSpec)
    run: RunOptions = field(default_factory=RunOptions)

    @property
    def n_paths(self):
        return self.run.n_paths

    @property
    def master_seed(self):
        return self.run.master_seed

    def seeds(self):
        return [path_seed(self.run.master_seed, i) for i in range(self.run.n_paths)]

    def with_options(self, **changes) -> "ExperimentConfig":
        return replace(self, run=replace(self.run, **changes))

    def to_dict(self) -> dict:
        d = {
            "params": asdict(self.params),
            "schedule": asdict(self.schedule),
            "ic": asdict(self.ic),
            "run": asdict(self.run),
        }
        d["run"]["moments"] = list(self.run.moments)
        return d


def _check_table(table, cls, path, required=()):
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table")
    names = {f.name: f for f in fields(cls)}
    for key in table:
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {', '.join(sorted(names))})")
    for key in required:
        if key not in table:
            raise ConfigError(f"{path}.{key}: required key missing")
    out = {}
    for key, value in table.items():
        if key == "noise":
            continue
        default = names[key].default
        # fields without a default (alpha, beta, t_end, dt) are all reals
        kind = float if default is MISSING else type(default)
        if isinstance(value, bool) and kind is not bool:
            raise ConfigError(f"{path}.{key}: expected a number or string, got a boolean")
        if kind is float or (kind is None and isinstance(value, (int, float))):
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
            value = float(value)
        elif kind is int:
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            if not isinstance(value, int):
                raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        elif kind is str:
            if not isinstance(value, str):
                raise ConfigError(f"{path}.{key}: expected a string, got {value!r}")
        elif kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{path}.{key}: expected true/false, got {value!r}")
        out[key] = value
    return out


def _build(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed config document; every error names its key path."""
    for key in doc:
        if key not in ("params", "schedule", "ic", "run"):
            raise ConfigError(f"{key}: unknown top-level key (allowed: ic, params, run, schedule)")
    if "params" not in doc:
        raise ConfigError("params: required table missing")
    raw = doc["params"]
    pk = _check_table(raw, Params, "params", required=("alpha", "beta"))
    noise = NoiseSpec()
    if "noise" in raw:
        noise = _build(NoiseSpec, _check_table(raw["noise"], NoiseSpec, "params.noise"), "params.noise")
    params = _build(Params, {**pk, "noise": noise}, "params")
    sk = _check_table(doc.get("schedule", {}), Schedule, "schedule")
    schedule = _build(Schedule, {**asdict(ExperimentConfig.__dataclass_fields__["schedule"].default_factory()), **sk},
                      "schedule")
    ic = _build(ICSpec, _check_table(doc.get("ic", {}), ICSpec, "ic"), "ic")
    run_raw = dict(doc.get("run", {}))
    moments = run_raw.pop("moments", None)
    rk = _check_table(run_raw, RunOptions, "run")
    if moments is not None:
        if not isinstance(moments, list) or not moments or not all(
            isinstance(p, int) and not isinstance(p, bool) and p >= 1 for p in moments
        ):
            raise ConfigError(f"run.moments: expected a nonempty list of positive integers, got {moments!r}")
        rk["moments"] = tuple(moments)
    run = _build(RunOptions, rk, "run")
    if run.n_paths < 1:
        raise ConfigError("run.n_paths: must be >= 1")
    if run.batch_size < 1:
        raise ConfigError("run.batch_size: must be >= 1")
    if run.threads < 1:
        raise ConfigError("run.threads: must be >= 1")
    if not 0 <= run.master_seed < 2**64:
        raise ConfigError("run.master_seed: must be an unsigned 64-bit integer")
    return ExperimentConfig(params=params, schedule=schedule, ic=ic, run=run)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from None
    return config_from_dict(doc)


def dump_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(tomli_w.dumps(config.to_dict()), encoding="utf-8")
    return path


# -- ensembles ---------------------------------------------------------------------

def moment_estimate(samples, p: int) -> float:
    """Empirical ``E[X^p]`` as the mean of the p-th powers."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("moment_estimate needs at least one sample")
    if int(p) != p or p < 1:
        raise ValueError("p must be a positive integer")
    return float(np.mean(x**p))


def moment_estimates(samples, p: int) -> dict:
    """Both labelled estimates: mean of powers and power of the mean."""
    x = np.asarray(samples, dtype=float)
    return {"mean_of_powers": moment_estimate(x, p), "power_of_mean": float(np.mean(x) ** p) if x.size else np.nan}


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean: np.ndarray
    quantiles: dict
    moments: dict
    stop_fraction: dict
    per_path: np.ndarray
    reports: list
    seeds: list
    config: ExperimentConfig | None = None

    @property
    def n_paths(self) -> int:
        return self.per_path.shape[1]

    def column(self, name):
        return self.per_path[..., DIAG_COLUMNS.index(name)]


def _run_batches(config: ExperimentConfig, store_states=False, ic_state: State | None = None, seeds=None):
    params, schedule = config.params, config.schedule
    seeds = config.seeds() if seeds is None else seeds
    P = len(seeds)
    ic_state = ic_state if ic_state is not None else initial_state(config.ic, params, P)
    size = config.run.batch_size
    chunks = [(i, min(i + size, P)) for i in range(0, P, size)]

    def work(bounds):
        a, b = bounds
        ic = ic_state if not ic_state.batched else State(ic_state.r[a:b], ic_state.u[a:b], params, ic_state.grid)
        return simulate_batch(ic, params, schedule, seeds[a:b], store_states=store_states)

    if config.run.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.run.threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    return results, seeds


def _sup(col):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmax(col, axis=0)


def run_ensemble(config: ExperimentConfig, write: bool = True) -> EnsembleStats:
    """Simulate ``n_paths`` paths and aggregate.

    Paths are grouped into fixed batches of ``run.batch_size`` which worker
    threads execute independently, so the result does not depend on the
    number of threads.
    """
    results, seeds = _run_batches(config)
    per_path = np.concatenate([t.diagnostics for t, _ in results], axis=1)
    reports = [r for _, rs in results for r in rs]
    times = results[0][0].times
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(per_path, axis=1)
        quant = {q: np.nanquantile(per_path, q, axis=1) for q in QUANTILES}
    sup_H = _sup(per_path[..., DIAG_COLUMNS.index("H")])
    sup_E = _sup(per_path[..., DIAG_COLUMNS.index("E")])
    moments = {
        "sup_H": {p: moment_estimates(sup_H[np.isfinite(sup_H)], p) for p in config.run.moments},
        "sup_E": {p: moment_estimates(sup_E[np.isfinite(sup_E)], p) for p in config.run.moments},
    }
    P = len(reports)
    stop = {reason: sum(r.reason == reason for r in reports) / P for reason in STOP_REASONS}
    stop["any"] = sum(r.stopped for r in reports) / P
    stats = EnsembleStats(times, mean, quant, moments, stop, per_path, reports, seeds, config)
    if write:
        emit_outputs(stats, config.run.output_dir)
    return stats


def emit_outputs(stats: EnsembleStats, out_dir) -> Path:
    """Write stats, per-path diagnostics, moments, stop fractions, manifest and optional plots."""
    out = Path(out_dir)
    (out / "paths").mkdir(parents=True, exist_ok=True)
    with (out / "stats.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = ["t"]
        for name in DIAG_COLUMNS[1:]:
            head += [f"{name}_mean"] + [f"{name}_q{int(round(q * 100)):02d}" for q in QUANTILES]
        w.writerow(head)
        for i, t in enumerate(stats.times):
            row = [repr(float(t))]
            for j in range(1, len(DIAG_COLUMNS)):
                row += [repr(float(stats.mean[i, j]))] + [repr(float(stats.quantiles[q][i, j])) for q in QUANTILES]
            w.writerow(row)
    for p in range(stats.n_paths):
        write_diagnostics_csv(out / "paths" / f"path_{p:04d}.csv", stats.per_path[:, p])
    with (out / "moments.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "p", "mean_of_powers", "power_of_mean"])
        for name, by_p in stats.moments.items():
            for p, est in by_p.items():
                w.writerow([name, p, repr(est["mean_of_powers"]), repr(est["power_of_mean"])])
    with (out / "stops.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "seed", "stopped", "tau_R", "reason", "y_max"])
        for p, (seed, r) in enumerate(zip(stats.seeds, stats.reports)):
            w.writerow([p, str(seed), int(r.stopped), "" if r.tau_R is None else repr(r.tau_R), r.reason or "",
                        repr(r.y_max)])
        for reason, frac in stats.stop_fraction.items():
            w.writerow(["fraction", "", "", "", reason, repr(frac)])
    if stats.config is not None:
        dump_config(stats.config, out / "manifest.toml")
        if stats.config.run.plots:
            plot_timeseries(stats, out / "timeseries.png")
    return out


def plot_timeseries(stats: EnsembleStats, path, columns=("H", "E", "mass", "rho_min")):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(len(columns), 1, figsize=(6, 2.2 * len(columns)), sharex=True)
    for ax, name in zip(np.atleast_1d(axes), columns):
        j = DIAG_COLUMNS.index(name)
        ax.fill_between(stats.times, stats.quantiles[QUANTILES[0]][:, j], stats.quantiles[QUANTILES[-1]][:, j],
                        alpha=0.3)
        ax.plot(stats.times, stats.mean[:, j])
        ax.set_ylabel(name)
    np.atleast_1d(axes)[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


# -- studies -----------------------------------------------------------------------

@dataclass
class GalerkinReport:
    m_list: list
    errors: np.ndarray
    ratios: np.ndarray
    per_path: np.ndarray
    sobolev_index: float


def _padded_coeffs(c, size):
    out = np.zeros(c.shape[:-1] + (size,), dtype=complex)
    out[..., : c.shape[-1]] = c
    return out


def galerkin_convergence_study(config: ExperimentConfig, m_list, sobolev_index: float = 3.0) -> GalerkinReport:
    """``sup_t |X_m - X_m'|_{H^s}`` for consecutive orders, ``X = (r, u)``, on one Wiener path per seed.

    The coarser solution is compared through its (zero-padded) Fourier
    coefficients; errors are averaged over paths.
    """
    m_list = [int(m) for m in m_list]
    if any(b < a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list must be nondecreasing")
    seeds = config.seeds()
    runs = []
    for m in m_list:
        cfg = replace(config, params=replace(config.params, galerkin_order=m))
        results, _ = _run_batches(cfg, store_states=True, seeds=seeds)
        r = np.concatenate([t.r for t, _ in results], axis=1)
        u = np.concatenate([t.u for t, _ in results], axis=1)
        runs.append((Grid.for_order(m), r, u))
    per_path = []
    for (g1, r1, u1), (g2, r2, u2) in zip(runs, runs[1:]):
        size = g2.n_points // 2 + 1
        dr = g2.coeffs(r2) - _padded_coeffs(g1.coeffs(r1), size)
        du = g2.coeffs(u2) - _padded_coeffs(g1.coeffs(u1), size)
        err = np.sqrt(g2.norm_hs_coeffs(dr, sobolev_index) ** 2 + g2.norm_hs_coeffs(du, sobolev_index) ** 2)
        per_path.append(np.max(err, axis=0))
    per_path = np.array(per_path).reshape(len(m_list) - 1, -1)
    errors = per_path.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = errors[1:] / errors[:-1]
    return GalerkinReport(m_list, errors, ratios, per_path, sobolev_index)


@dataclass
class OrderReport:
    dt_list: np.ndarray
    errors: np.ndarray
    slope: float
    dt_ref: float
    n_paths: int
    excluded: int


def strong_order_study(config: ExperimentConfig, dt_list, ref_factor: int = 8) -> OrderReport:
    """Strong error ``E|X_dt(T) - X_ref(T)|_{L2}`` and its fitted log-log slope.

    All runs use one Wiener path per seed generated on the reference step
    ``min(dt_list) / ref_factor`` and summed over coarser steps.  Paths that
    stop in any run are excluded (and counted).
    """
    dt_list = np.sort(np.asarray(dt_list, dtype=float))[::-1]
    dt_ref = dt_list[-1] / ref_factor
    t_end = config.schedule.t_end
    seeds = config.seeds()

    def final(dt):
        sub = int(round(dt / dt_ref))
        if not np.isclose(sub * dt_ref, dt, rtol=1e-9):
            raise ValueError(f"dt={dt} is not a multiple of the reference step {dt_ref}")
        n = int(round(t_end / dt))
        sched = replace(config.schedule, dt=dt, record_every=n, noise_substeps=sub)
        results, _ = _run_batches(replace(config, schedule=sched), store_states=True, seeds=seeds)
        r = np.concatenate([t.r[-1] for t, _ in results])
        u = np.concatenate([t.u[-1] for t, _ in results])
        stopped = np.array([rep.stopped for _, rs in results for rep in rs])
        return r, u, stopped

    r_ref, u_ref, bad = final(dt_ref)
    finals = [final(dt) for dt in dt_list]
    for _, _, s in finals:
        bad = bad | s
    g = Grid.for_order(config.params.galerkin_order)
    errors = []
    for r, u, _ in finals:
        e = np.sqrt(g.integrate((r - r_ref) ** 2) + g.integrate((u - u_ref) ** 2))
        errors.append(np.mean(e[~bad]) if (~bad).any() else np.nan)
    errors = np.array(errors)
    ok = errors > 0
    slope = float(np.polyfit(np.log(dt_list[ok]), np.log(errors[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return OrderReport(dt_list, errors, slope, float(dt_ref), len(seeds), int(bad.sum()))


@dataclass
class UniquenessReport:
    bitwise_identical: bool
    max_discrepancy_same: float
    delta: float
    times: np.ndarray
    discrepancy: np.ndarray
    growth_rate: float
    max_ratio: float


def pathwise_uniqueness_check(config: ExperimentConfig, delta: float = 1e-8) -> UniquenessReport:
    """Same seed twice (must agree bitwise), then a ``delta``-perturbed initial state on the same path.

    The discrepancy is the L2 distance of ``(r, u)`` on the first path; the
    growth rate is the least-squares slope of ``log(D(t)/D(0))`` against t.
    """
    seed = config.seeds()[:1]
    params, sched = config.params, config.schedule
    ic = initial_state(config.ic, params, 1)
    if ic.batched:
        ic = ic.path(0)
    a, _ = simulate_batch(ic, params, sched, seed)
    b, _ = simulate_batch(ic, params, sched, seed)
    same = bool(np.array_equal(a.r, b.r) and np.array_equal(a.u, b.u))
    g = ic.grid
    d_same = float(np.max(np.abs(a.r - b.r)) + np.max(np.abs(a.u - b.u)))
    if delta == 0:
        zeros = np.zeros(len(a.times))
        return UniquenessReport(same, d_same, 0.0, a.times, zeros, 0.0, 0.0 if same else np.inf)
    bump = g.project(np.cos(2 * np.pi * g.x) + np.sin(2 * np.pi * g.x), params.galerkin_order)
    pert = State(ic.r + delta * bump, ic.u + delta * bump, params, g)
    c, _ = simulate_batch(pert, params, sched, seed)
    D = np.sqrt(g.integrate((c.r[:, 0] - a.r[:, 0]) ** 2) + g.integrate((c.u[:, 0] - a.u[:, 0]) ** 2))
    ratio = D / D[0]
    t = a.times - a.times[0]
    finite = np.isfinite(ratio) & (ratio > 0)
    if finite.sum() >= 2 and np.ptp(t[finite]) > 0:
        growth = float(np.polyfit(t[finite], np.log(ratio[finite]), 1)[0])
    else:
        growth = float("nan")
    return UniquenessReport(same, d_same, float(delta), a.times, D, growth, float(np.nanmax(ratio)))
