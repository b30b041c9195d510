"""Euler-Maruyama and IMEX Euler-Maruyama stepping with stopping-time detection.

A batch of paths is advanced in lock-step as one stacked state.  Each path
has its own Philox key; a path that stops (cut-off norm reached, density
below the floor, or non-finite values) is frozen and drops out of the
tendency evaluations.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

from .diagnostics import DIAG_COLUMNS, DiagnosticsRecord, diagnostics_table, write_diagnostics_csv
from .dynamics import PaddedFields, apply_linear, galerkin_tendency, imex_solve
from .fields import DENSITY_FLOOR, State
from .noise import NoisePath
from .params import Params
from .spectral import write_field_binary

METHODS = ("explicit_em", "imex_em")
STOP_REASONS = ("norm_threshold", "density_floor", "nonfinite")
NOISE_CHUNK = 256


@dataclass(frozen=True)
class Schedule:
    t_end: float
    dt: float
    method: str = "imex_em"
    record_every: int = 1
    noise_substeps: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if int(self.noise_substeps) != self.noise_substeps or self.noise_substeps < 1:
            raise ValueError("noise_substeps must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_end / self.dt - 1e-9))

    @property
    def noise_dt(self) -> float:
        """Base step on which the Wiener path is generated."""
        return self.dt / self.noise_substeps


@dataclass
class StoppingReport:
    stopped: bool
    tau_R: float | None
    reason: str | None
    y_max: float


def cfl_bound(state: State) -> float:
    """Advisory explicit step limit from the stiffest retained mode of the frozen linearisation."""
    w = PaddedFields(state, strict=False)
    mu, nu = w.linear_coefficients()
    k_max = 2 * np.pi * state.params.galerkin_order / state.grid.length
    dx = state.grid.length / state.grid.n_points
    umax = np.max(np.abs(w.u)) + 1e-300
    lin = 1.0 / (k_max**2 * max(np.max(mu), np.max(nu)))
    return float(min(lin, dx / umax))


# -- single steps -------------------------------------------------------------

def step_em(state: State, dt: float, inc=None, strict: bool = True, forcing=None) -> State:
    """``r+ = r + dt dr``, ``u+ = u + dt du + theta_R * sum_k F_k dW_k``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    T = galerkin_tendency(state, inc, strict=strict, forcing=forcing)
    return _advance_em(state, T, dt)


def _advance_em(state, T, dt):
    w = T.work
    r_hat = w.coeffs_r + dt * T.dr_hat
    u_hat = w.coeffs_u + dt * T.du_hat
    if T.noise_hat is not None:
        u_hat = u_hat + T.noise_hat
    return _rebuild(state, w, r_hat, u_hat, dt)


def _rebuild(state, w, r_hat, u_hat, dt):
    vals = state.grid.values(np.stack([r_hat, u_hat]))
    if not state.batched:
        vals = vals[:, 0]
    return state.with_fields(vals[0], vals[1], state.time + dt)


def step_imex(state: State, dt: float, inc=None, strict: bool = True, forcing=None) -> State:
    """Backward Euler on the frozen-coefficient capillary/viscous part, explicit on the rest.

    The velocity comes from the coupled per-mode solve.  The density variable
    is then advanced with the full transport operator evaluated at the new
    velocity, ``d = -dt theta (u+ r_x + mu_k' u+_x)``, which agrees with the
    coupled solve on the linear part and makes the first-order change of
    ``int rho`` an exact divergence.  The increment is corrected by the
    curvature of ``rho(r)``, ``r+ = r + Pi[d - (1-e) d^2 / (2 mu_k')]`` with
    ``e = (beta+1)/2``, so mass is not biased at second order either.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    T = galerkin_tendency(state, inc, strict=strict, forcing=forcing)
    return _advance_imex(state, T, dt)


def _advance_imex(state, T, dt):
    g = state.grid
    w = T.work
    cr, cu = w.coeffs_r, w.coeffs_u
    Lr, Lu = apply_linear(g, cr, cu, T.mu_bar, T.nu_bar, T.theta)
    rhs_r = cr + dt * (T.dr_hat - Lr)
    rhs_u = cu + dt * (T.du_hat - Lu)
    if T.noise_hat is not None:
        rhs_u = rhs_u + T.noise_hat
    _, u_hat = imex_solve(g, rhs_r, rhs_u, dt, T.mu_bar, T.nu_bar, T.theta)
    u_new = w.padded_values(np.stack([u_hat, u_hat * (1j * g.kappa)]))
    dr = -dt * w.theta * (u_new[0] * w.r_x + w.mu_k * u_new[1])
    # second-order term of the map r -> rho(r), so that rho(r + dr) - rho
    # matches the conservative increment to O(dt^3) instead of O(dt^2)
    e = (state.params.beta + 1) / 2
    dr = dr - 0.5 * (1 - e) * dr**2 / w.mu_k
    r_hat = cr + w.project_coeffs(dr)
    return _rebuild(state, w, r_hat, u_hat, dt)


_ADVANCE = {"explicit_em": _advance_em, "imex_em": _advance_imex}


# -- stopping -------------------------------------------------------------------

def _stop_codes(state: State, y=None):
    """Per-path reason index into STOP_REASONS, or -1 when the path may continue."""
    r = np.atleast_2d(state.r)
    u = np.atleast_2d(state.u)
    finite = np.all(np.isfinite(r), axis=-1) & np.all(np.isfinite(u), axis=-1)
    beta = state.params.beta
    with np.errstate(all="ignore"):
        if beta == -1:
            rho = np.exp(r)
        else:
            e = (beta + 1) / 2
            rho = np.where(e * r > 0, e * r, 0.0) ** (1 / e)
        low = ~(np.min(rho, axis=-1) >= DENSITY_FLOOR)
        if y is None:
            y = np.atleast_1d(state.grid.norm_w2inf(r) + state.grid.norm_w2inf(u))
        high = ~(np.atleast_1d(y) < state.params.trunc_radius)
    code = np.full(r.shape[0], -1)
    code[high] = 0
    code[low] = 1
    code[~finite] = 2
    return code, np.where(finite, y, np.inf)


def detect_stop(state: State, params: Params | None = None) -> StoppingReport:
    """Stop check for a single state: non-finite, then density floor, then ``y >= R``."""
    if params is not None and params != state.params:
        state = State(state.r, state.u, params, state.grid, state.time)
    if state.batched:
        raise ValueError("detect_stop expects a single path")
    code, y = _stop_codes(state)
    c = int(code[0])
    stopped = c >= 0
    return StoppingReport(
        stopped=stopped,
        tau_R=state.time if stopped else None,
        reason=STOP_REASONS[c] if stopped else None,
        y_max=float(y[0]),
    )


# -- trajectories -----------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded states and diagnostics.

    ``r``/``u`` have shape ``(n_records, n_points)`` for one path or
    ``(n_records, n_paths, n_points)`` for a batch (``None`` when states
    were not kept); ``diagnostics`` has the matching shape with a trailing
    axis of length 13 (see ``DIAG_COLUMNS``).  Rows of a path after its
    stopping time are NaN.
    """

    times: np.ndarray
    r: np.ndarray | None
    u: np.ndarray | None
    diagnostics: np.ndarray
    params: Params
    schedule: Schedule
    grid: object
    seeds: list = field(default_factory=list)

    @property
    def batched(self) -> bool:
        return self.diagnostics.ndim == 3

    @property
    def n_paths(self) -> int:
        return self.diagnostics.shape[1] if self.batched else 1

    def column(self, name: str) -> np.ndarray:
        return self.diagnostics[..., DIAG_COLUMNS.index(name)]

    def records(self) -> list[DiagnosticsRecord]:
        if self.batched:
            raise ValueError("select a path first")
        return [DiagnosticsRecord(*map(float, row)) for row in self.diagnostics]

    def state(self, i: int) -> State:
        if self.r is None:
            raise ValueError("states were not stored")
        return State(self.r[i], self.u[i], self.params, self.grid, float(self.times[i]))

    def path(self, p: int) -> "Trajectory":
        if not self.batched:
            return self
        return Trajectory(
            times=self.times,
            r=None if self.r is None else self.r[:, p],
            u=None if self.u is None else self.u[:, p],
            diagnostics=self.diagnostics[:, p],
            params=self.params,
            schedule=self.schedule,
            grid=self.grid,
            seeds=[self.seeds[p]] if self.seeds else [],
        )

    def write_snapshots(self, path) -> Path:
        """``r`` then ``u`` records for every stored time, in the field binary format."""
        if self.batched:
            raise ValueError("select a path first")
        path = Path(path)
        path.write_bytes(b"")
        for t, r, u in zip(self.times, self.r, self.u):
            write_field_binary(path, r, t, append=True)
            write_field_binary(path, u, t, append=True)
        return path

    def write_diagnostics(self, path) -> Path:
        if self.batched:
            raise ValueError("select a path first")
        return write_diagnostics_csv(path, self.diagnostics)

    def write_manifest(self, path) -> Path:
        return write_manifest(path, self.params, self.schedule, self.seeds)


def write_manifest(path, params: Params, schedule: Schedule, seeds) -> Path:
    path = Path(path)
    doc = {
        "params": asdict(params),
        "schedule": asdict(schedule),
        "seeds": [str(s) for s in np.atleast_1d(seeds).tolist()],
    }
    path.write_text(tomli_w.dumps(doc), encoding="utf-8")
    return path


def _as_batch(ic: State, params: Params, n_paths: int) -> State:
    r = np.array(ic.r, dtype=float)
    u = np.array(ic.u, dtype=float)
    if r.ndim == 1:
        r = np.repeat(r[None], n_paths, axis=0)
        u = np.repeat(u[None], n_paths, axis=0)
    if r.shape[0] != n_paths:
        raise ValueError(f"ic holds {r.shape[0]} paths, {n_paths} seeds given")
    return State(r, u, params, ic.grid, ic.time)


def simulate_batch(
    ic: State,
    params: Params,
    schedule: Schedule,
    seeds,
    store_states: bool = True,
    forcing=None,
) -> tuple[Trajectory, list[StoppingReport]]:
    """Advance one path per seed from ``ic`` (shared, or one row per seed)."""
    seeds = [int(s) for s in np.atleast_1d(seeds).tolist()]
    P = len(seeds)
    state = _as_batch(ic, params, P)
    t0 = state.time
    n_steps = schedule.n_steps
    advance = _ADVANCE[schedule.method]
    noise_on = params.noise.family != "off"
    noise = NoisePath(params.noise, schedule.noise_dt, seeds, schedule.noise_substeps)

    if schedule.method == "explicit_em" and n_steps > 0:
        bound = cfl_bound(state)
        if schedule.dt > bound:
            warnings.warn(f"dt={schedule.dt:g} exceeds the advisory explicit bound {bound:.3g}", stacklevel=2)

    code, y0 = _stop_codes(state)
    active = code < 0
    tau = np.where(active, np.nan, t0)
    reason = code.copy()
    y_max = np.array(y0, dtype=float)
    stop_step = np.where(active, -1, 0)

    times, rs, us, diags = [], [], [], []

    def record(step):
        t = t0 + step * schedule.dt
        row = np.full((P, len(DIAG_COLUMNS)), np.nan)
        ok = active | (stop_step == step)
        if ok.any():
            sub = State(state.r[ok], state.u[ok], params, state.grid, t)
            healthy = _healthy(sub)
            if healthy.any():
                idx = np.nonzero(ok)[0][healthy]
                row[idx] = diagnostics_table(State(sub.r[healthy], sub.u[healthy], params, state.grid, t))
        row[:, 0] = t
        times.append(t)
        diags.append(row)
        if store_states:
            rs.append(state.r.copy())
            us.append(state.u.copy())

    record_steps = sorted(set(range(0, n_steps + 1, schedule.record_every)) | {n_steps})
    record(0)
    R = params.trunc_radius
    inc_chunk, chunk_start = None, 0
    for step in range(n_steps):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        if noise_on:
            if inc_chunk is None or step - chunk_start >= NOISE_CHUNK:
                chunk_start = step
                inc_chunk = noise.increments(step, min(NOISE_CHUNK, n_steps - step))
            inc = inc_chunk[idx, step - chunk_start]
        else:
            inc = None
        sub = State(state.r[idx], state.u[idx], params, state.grid, state.time)
        with np.errstate(all="ignore"):
            T = galerkin_tendency(sub, inc, strict=False, forcing=forcing)
            y = np.atleast_1d(T.y)
            y_max[idx] = np.fmax(y_max[idx], y)
            # the cut-off argument of the current state decides tau_R
            go = y < R
            if not go.all():
                j = idx[~go]
                active[j] = False
                tau[j] = state.time
                reason[j] = 0
                stop_step[j] = step
            if not go.any():
                break
            new = advance(sub, T, schedule.dt)
        moved = idx[go]
        state.r[moved] = new.r[go]
        state.u[moved] = new.u[go]
        state.time = t0 + (step + 1) * schedule.dt
        state._rho = None
        code, _ = _stop_codes(State(new.r[go], new.u[go], params, state.grid), y=np.zeros(moved.size))
        hit = code >= 0
        if hit.any():
            j = moved[hit]
            active[j] = False
            tau[j] = state.time
            reason[j] = code[hit]
            stop_step[j] = step + 1
        last = step + 1 == n_steps or not active.any()
        if (step + 1) % schedule.record_every == 0 or last:
            record(step + 1)

    # keep the record grid complete once every path has stopped
    for k in range(len(times), len(record_steps)):
        times.append(t0 + record_steps[k] * schedule.dt)
        row = np.full((P, len(DIAG_COLUMNS)), np.nan)
        row[:, 0] = times[-1]
        diags.append(row)
        if store_states:
            rs.append(state.r.copy())
            us.append(state.u.copy())

    if active.any():
        idx = np.nonzero(active)[0]
        code, y = _stop_codes(State(state.r[idx], state.u[idx], params, state.grid))
        y_max[idx] = np.fmax(y_max[idx], y)
        hit = code >= 0
        tau[idx[hit]] = state.time
        reason[idx[hit]] = code[hit]

    reports = [
        StoppingReport(
            stopped=bool(reason[p] >= 0),
            tau_R=None if reason[p] < 0 else float(tau[p]),
            reason=None if reason[p] < 0 else STOP_REASONS[reason[p]],
            y_max=float(y_max[p]),
        )
        for p in range(P)
    ]
    traj = Trajectory(
        times=np.array(times),
        r=np.array(rs) if store_states else None,
        u=np.array(us) if store_states else None,
        diagnostics=np.array(diags),
        params=params,
        schedule=schedule,
        grid=state.grid,
        seeds=seeds,
    )
    return traj, reports


def _healthy(state: State):
    r = np.atleast_2d(state.r)
    u = np.atleast_2d(state.u)
    ok = np.all(np.isfinite(r), axis=-1) & np.all(np.isfinite(u), axis=-1)
    beta = state.params.beta
    if beta != -1:
        ok &= np.all((beta + 1) / 2 * r > 0, axis=-1)
    return ok


def simulate_path(ic: State, params: Params, schedule: Schedule, seed: int, store_states: bool = True,
                  forcing=None):
    """Single path: returns ``(trajectory, stopping report, diagnostics records)``."""
    if ic.batched:
        raise ValueError("simulate_path expects a single initial state")
    traj, reports = simulate_batch(ic, params, schedule, [seed], store_states, forcing)
    single = traj.path(0)
    return single, reports[0], single.records()
