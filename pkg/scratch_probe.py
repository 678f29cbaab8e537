"""Scratch probe of core numerics (deleted before delivery)."""
import time

import numpy as np

from spinbfn import (
    add_noise, build_response, check_theorem_precondition, derived_seeds,
    dv_identity_residuals, error_trajectory, fidelity, lyapunov_diagnostics,
    random_pure_state, reconstruct, run_bfn, sample_random_field,
    simulate_truth, spin1_preset, trajectory_min_eigenvalue, two_level_preset,
)

cfg = two_level_preset(rng_seed=42)
seeds = derived_seeds(cfg.rng_seed)
control = sample_random_field(cfg, seeds.control)
print("discriminant:", check_theorem_precondition(control))

rng = np.random.default_rng(seeds.truth)
rho0 = random_pure_state(2, rng)
t0 = time.perf_counter()
traj, record = simulate_truth(rho0, control, cfg)
t_sim = time.perf_counter() - t0
print(f"simulate: {t_sim:.2f}s, min eig along traj: {trajectory_min_eigenvalue(traj):.3e}")

t0 = time.perf_counter()
run = run_bfn(record, control, cfg, n_iterations=10, truth=traj)
t_bfn = time.perf_counter() - t0
print(f"bfn 10 iters: {t_bfn:.2f}s")
print("vk:", np.array2string(run.vk_sequence, precision=3))
print("V10/V0:", run.vk_sequence[-1] / run.vk_sequence[0])
print("fidelity:", run.fidelity_vs_truth)

rep = lyapunov_diagnostics(run, cfg)
print("eq9 max rel mismatch:", rep.max_rel_mismatch, "monotone:", rep.monotone, "g_min:", rep.g_min)

dv = dv_identity_residuals(run, cfg)
print("dV/dt identity: fwd", dv.max_forward_rel, "bwd", dv.max_backward_rel)

t0 = time.perf_counter()
resp = build_response(control, cfg)
rec_oracle = reconstruct(record, resp)
t_oracle = time.perf_counter() - t0
print(f"oracle: {t_oracle:.2f}s, rank {rec_oracle.rank}, cond {rec_oracle.condition_number:.1f}")
print("oracle err vs truth:", np.linalg.norm(rec_oracle.estimate - rho0))
print("oracle vs bfn:", np.linalg.norm(rec_oracle.estimate - run.final_estimate))

run11 = run_bfn(record, control, cfg, n_iterations=11, truth=traj)
rep8 = error_trajectory(run11, control, cfg)
for name in ("z_at_window_starts", "zdot_at_window_starts", "zddot_at_window_starts",
             "rotation_combo", "rotation_rate_combo"):
    arr = np.abs(getattr(rep8, name))
    print(f"{name}: k1={arr[1]:.3e} k10={arr[10]:.3e} ratio={arr[1]/max(arr[10],1e-300):.1f}")
