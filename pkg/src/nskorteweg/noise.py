"""Truncated cylindrical Wiener process and the superposition noise operator.

Gaussian increments are a pure function of ``(key, step, mode)``: each step
owns a fixed block of Philox counters, uniforms are taken from the raw 64-bit
outputs and mapped through the inverse normal CDF.  Nothing depends on how
many draws happened before, so a path can be regenerated from any step, and
paths for different keys can be produced in any order or in parallel.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np
from scipy.special import ndtri

FAMILIES = ("multiplicative_sin", "additive_basis", "off")
_U53 = 2.0**-53


@dataclass(frozen=True)
class NoiseSpec:
    mode_count: int = 16
    weight_decay: float = 2.0
    family: str = "multiplicative_sin"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; expected one of {FAMILIES}")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise ValueError(f"mode_count must be a positive integer, got {self.mode_count}")
        if not self.weight_decay > 1:
            raise ValueError(f"weight_decay must exceed 1 for a summable weight sequence, got {self.weight_decay}")

    @property
    def weights(self) -> np.ndarray:
        """``f_k = k**(-weight_decay)`` for ``k = 1..mode_count``."""
        return np.arange(1, self.mode_count + 1, dtype=float) ** (-self.weight_decay)

    @property
    def is_off(self) -> bool:
        return self.family == "off"


@dataclass
class WienerIncrement:
    dW: np.ndarray
    dt: float


def path_seed(master_seed: int, index: int) -> int:
    """Independent 128-bit Philox key for path ``index`` of an ensemble."""
    words = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def _block(mode_count: int) -> int:
    return 4 * -(-mode_count // 4)


def standard_normals(key: int, start_step: int, n_steps: int, mode_count: int) -> np.ndarray:
    """``N(0,1)`` draws of shape ``(n_steps, mode_count)`` for steps ``start_step...``."""
    block = _block(mode_count)
    bg = np.random.Philox(key=int(key) % 2**128)
    bg.advance(start_step * block // 4)
    raw = bg.random_raw(n_steps * block).reshape(n_steps, block)[:, :mode_count]
    return ndtri(((raw >> np.uint64(11)).astype(float) + 0.5) * _U53)


def wiener_increments(spec: NoiseSpec, dt: float, step_index: int, seed: int | None = None) -> WienerIncrement:
    """Increments ``dW_k ~ N(0, dt)`` of step ``step_index``; deterministic in (seed, step, k)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    key = spec.seed if seed is None else seed
    z = standard_normals(key, step_index, 1, spec.mode_count)[0]
    return WienerIncrement(dW=np.sqrt(dt) * z, dt=dt)


@dataclass
class NoisePath:
    """Wiener paths for a batch of keys, defined on a base step and aggregated.

    A run with step ``substeps * base_dt`` sees increments that are exact sums
    of the base-step increments, so runs at different dt share one path.
    """

    spec: NoiseSpec
    base_dt: float
    keys: list[int]
    substeps: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dt(self) -> float:
        return self.substeps * self.base_dt

    def increments(self, start_step: int, n_steps: int) -> np.ndarray:
        """Array ``(n_paths, n_steps, K)`` of increments for coarse steps ``start_step...``."""
        K, s = self.spec.mode_count, self.substeps
        out = np.empty((len(self.keys), n_steps, K))
        for p, key in enumerate(self.keys):
            z = standard_normals(key, start_step * s, n_steps * s, K)
            out[p] = z.reshape(n_steps, s, K).sum(axis=1)
        return np.sqrt(self.base_dt) * out

    def dump(self, path, n_steps: int) -> Path:
        """Binary dump per key: magic, int64 K, int64 steps, float64 dt, then K x steps float64."""
        path = Path(path)
        with path.open("wb") as fh:
            for p in range(len(self.keys)):
                inc = self.increments(0, n_steps)[p]
                fh.write(struct.pack("<4sqqd", b"NSKW", self.spec.mode_count, n_steps, self.dt))
                fh.write(np.ascontiguousarray(inc.T, dtype="<f8").tobytes())
        return path


def read_noise_dump(path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    hdr = struct.Struct("<4sqqd")
    out, pos = [], 0
    while pos < len(data):
        magic, K, steps, _ = hdr.unpack_from(data, pos)
        if magic != b"NSKW":
            raise ValueError("bad noise record")
        pos += hdr.size
        out.append(np.frombuffer(data, "<f8", K * steps, pos).reshape(K, steps).copy())
        pos += 8 * K * steps
    return out


def basis_function(k, x):
    """Orthonormal trigonometric basis of L2(T): sqrt2 cos, sqrt2 sin, alternating."""
    k = np.asarray(k)
    j = (k + 1) // 2
    phase = 2 * np.pi * j * x
    return np.where(k % 2 == 1, np.sqrt(2) * np.cos(phase), np.sqrt(2) * np.sin(phase))


def eval_coefficient(spec: NoiseSpec, k, x, rho, u):
    """Coefficient ``F_k(x, rho, u)``; broadcasts over all arguments."""
    k = np.asarray(k)
    if np.any((k < 1) | (k > spec.mode_count)):
        raise ValueError(f"mode index must lie in 1..{spec.mode_count}")
    fk = k.astype(float) ** (-spec.weight_decay)
    if spec.family == "multiplicative_sin":
        return fk * np.sin(u) + 0.0 * np.asarray(x) + 0.0 * np.asarray(rho)
    if spec.family == "additive_basis":
        return fk * basis_function(k, x) + 0.0 * np.asarray(rho) + 0.0 * np.asarray(u)
    return 0.0 * (fk + np.asarray(x) + np.asarray(rho) + np.asarray(u))


def noise_field(spec: NoiseSpec, x, rho, u, dW):
    """``sum_k F_k(x, rho(x), u(x)) dW_k``; ``dW`` has shape ``(..., K)``, fields ``(..., n)``."""
    u = np.asarray(u, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if spec.family == "off":
        return np.zeros_like(u)
    f = spec.weights
    if spec.family == "multiplicative_sin":
        return np.sin(u) * (dW @ f)[..., None]
    k = np.arange(1, spec.mode_count + 1)
    basis = basis_function(k[:, None], np.asarray(x)[None, :])  # (K, n)
    return np.einsum("...k,kn->...n", dW * f, basis)


def apply_noise(state, inc) -> np.ndarray:
    """Velocity-equation noise increment for a state (or a stack of states)."""
    dW = inc.dW if isinstance(inc, WienerIncrement) else inc
    spec = state.params.noise
    if spec.family == "off":
        return np.zeros_like(state.u)
    return noise_field(spec, state.grid.x, state.rho, state.u, dW)


# -- growth-hypothesis audit ----------------------------------------------

_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}
_STEP = {1: 1e-5, 2: 1e-3, 3: 1e-2}
_DERIV_TOL = {1: 1e-6, 2: 1e-5, 3: 1e-4}


@dataclass
class GrowthReport:
    family: str
    samples: int
    passed: bool
    violations: list[str]
    worst_ratio: dict[str, float]
    weight_sum: float


def _fd_derivative(F, x, rho, u, index):
    order = sum(index)
    h = _STEP[order]
    total = 0.0
    pts = [_STENCILS[i] for i in index]
    for (ox, wx), (orho, wr), (ou, wu) in product(*[list(zip(*p)) for p in pts]):
        total = total + (wx * wr * wu) * F(x + ox * h, rho + orho * h, u + ou * h)
    return total / h**order


def verify_growth_bounds(spec: NoiseSpec, samples: int, rng_seed: int = 0,
                         rho_max: float = 10.0, u_max: float = 10.0, chunk: int = 20000) -> GrowthReport:
    """Monte Carlo audit of the coefficient hypotheses.

    Checks ``F_k(., 0, 0) = 0``, ``|F_k| <= f_k (1 + |u|)`` and
    ``|d^l F_k| <= f_k`` for every multi-index in (x, rho, u) with
    ``1 <= |l| <= 3`` (finite differences), plus summability of ``f_k``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    k = np.arange(1, spec.mode_count + 1)
    fk = spec.weights

    def F(x, rho, u):
        return eval_coefficient(spec, k[None, :], x[:, None], rho[:, None], u[:, None])

    indices = [idx for idx in product(range(4), repeat=3) if 1 <= sum(idx) <= 3]
    worst = {"F1": 0.0, "Fw": 0.0}
    worst.update({f"d{idx}": 0.0 for idx in indices})
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        done += n
        x = rng.uniform(0.0, 1.0, n)
        rho = rng.uniform(0.05, rho_max, n)
        u = rng.uniform(-u_max, u_max, n)
        zero = np.zeros(n)
        worst["F1"] = max(worst["F1"], float(np.max(np.abs(F(x, zero, zero)) / fk)))
        worst["Fw"] = max(worst["Fw"], float(np.max(np.abs(F(x, rho, u)) / (fk * (1 + np.abs(u)[:, None])))))
        for idx in indices:
            d = _fd_derivative(F, x, rho, u, idx)
            worst[f"d{idx}"] = max(worst[f"d{idx}"], float(np.max(np.abs(d) / fk)))

    violations = []
    if worst["F1"] > 1e-14:
        violations.append(f"F1: F_k(x,0,0) != 0 (max |F_k|/f_k = {worst['F1']:.3g})")
    if worst["Fw"] > 1 + 1e-12:
        violations.append(f"Fw: |F_k| exceeds f_k(1+|u|) (max ratio {worst['Fw']:.3g})")
    for idx in indices:
        ratio = worst[f"d{idx}"]
        if ratio > 1 + _DERIV_TOL[sum(idx)]:
            violations.append(f"F2: derivative {idx} exceeds f_k (max ratio {ratio:.3g})")
    partial = np.cumsum(fk)
    if not (np.all(np.diff(partial) > 0) and spec.weight_decay > 1):
        violations.append("F2: weights not summable")
    return GrowthReport(
        family=spec.family,
        samples=samples,
        passed=not violations,
        violations=violations,
        worst_ratio=worst,
        weight_sum=float(partial[-1]),
    )
