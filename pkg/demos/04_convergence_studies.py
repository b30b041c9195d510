"""Scheme validation: Galerkin convergence, strong order and pathwise determinism.

These are scaled-down versions of the acceptance studies so the script
finishes in about a minute.
"""
from nskorteweg import ExperimentConfig, ICSpec, Params, RunOptions, Schedule
from nskorteweg import galerkin_convergence_study, pathwise_uniqueness_check, strong_order_study

galerkin = ExperimentConfig(
    params=Params(1.0, -1.0, 2.0, galerkin_order=16),
    schedule=Schedule(0.01, 2e-5, record_every=25),
    ic=ICSpec("analytic", amplitude=0.002, velocity=0.002, ratio=0.8),
    run=RunOptions(n_paths=2),
)
rep = galerkin_convergence_study(galerkin, [16, 32, 64])
print("Galerkin sup-H3 errors", rep.errors, "ratios", rep.ratios)

t_end = 0.01
order = ExperimentConfig(
    params=Params(1.0, -1.0, 2.0, galerkin_order=8),
    schedule=Schedule(t_end, t_end / 2**9, "explicit_em"),
    ic=ICSpec("single_mode", amplitude=0.05, velocity=0.8),
    run=RunOptions(n_paths=32, batch_size=32),
)
rep = strong_order_study(order, [t_end * 2.0**-k for k in range(9, 13)], ref_factor=8)
print(f"strong order {rep.slope:.3f} from errors {rep.errors}")

uniq = ExperimentConfig(
    params=Params(1.0, -1.0, 2.0, galerkin_order=32),
    schedule=Schedule(0.05, 1e-4, record_every=10),
)
rep = pathwise_uniqueness_check(uniq, 1e-8)
print(f"same seed bitwise identical: {rep.bitwise_identical}; "
      f"perturbed data: growth rate {rep.growth_rate:.2f}, max ratio {rep.max_ratio:.2f}")
