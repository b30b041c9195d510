"""Pseudospectral simulation of the 1D stochastic Navier-Stokes-Korteweg system on the torus.

The evolved unknowns are the transformed density ``r`` and the velocity
``u``; see :mod:`nskorteweg.fields` for the change of variables and
:mod:`nskorteweg.dynamics` for the truncated Galerkin system.
"""
from .diagnostics import (
    DIAG_COLUMNS,
    DiagnosticsRecord,
    bd_entropy,
    check_functional_inequality,
    diagnostics_record,
    dissipation_capillary,
    dissipation_pressure,
    energy,
    energy_residual,
    entropy_residual,
    localization_coefficient,
    mass,
    vacuum_bounds,
)
from .dynamics import Tendency, cutoff_argument, cutoff_theta, drift_u, galerkin_tendency, rhs_r
from .ensemble import (
    ExperimentConfig,
    ICSpec,
    RunOptions,
    galerkin_convergence_study,
    initial_state,
    load_config,
    moment_estimate,
    pathwise_uniqueness_check,
    run_ensemble,
    strong_order_study,
)
from .fields import State, r_to_rho, rho_to_r
from .integrator import Schedule, StoppingReport, Trajectory, detect_stop, simulate_batch, simulate_path, step_em, step_imex
from .noise import NoiseSpec, WienerIncrement, apply_noise, eval_coefficient, verify_growth_bounds, wiener_increments
from .params import Params, classify, regime_atlas, scc_discriminant, scc_holds, nv_holds
from .spectral import Field, Grid

__version__ = "0.1.0"
