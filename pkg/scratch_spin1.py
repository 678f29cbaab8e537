"""Spin-1 feasibility probe: criterion-5 fidelities and runtime."""
import time

import numpy as np

from spinbfn import (
    add_noise, derived_seeds, run_bfn, sample_random_field, simulate_truth,
    spin1_preset, trajectory_min_eigenvalue,
)

truth0 = 0.5 * np.array([[1, 0, 1], [0, 0, 0], [1, 0, 1]], dtype=complex)

for seed in range(8):
    cfg = spin1_preset(rng_seed=seed)
    seeds = derived_seeds(seed)
    control = sample_random_field(cfg, seeds.control)
    traj, record = simulate_truth(truth0, control, cfg)

    t0 = time.perf_counter()
    run_clean = run_bfn(record, control, cfg, n_iterations=50, truth=traj)
    t_clean = time.perf_counter() - t0

    cfg_noisy = cfg.replace(noise_meas=0.1, noise_field=0.1)
    noisy_record = add_noise(record, 0.1, seeds.noise_meas)
    t0 = time.perf_counter()
    run_noisy = run_bfn(noisy_record, control, cfg_noisy, n_iterations=50, truth=traj)
    t_noisy = time.perf_counter() - t0

    print(f"seed {seed}: clean fid={run_clean.fidelity_vs_truth:.4f} "
          f"noisy fid={run_noisy.fidelity_vs_truth:.4f} "
          f"V50/V0 clean={run_clean.vk_sequence[-1]/run_clean.vk_sequence[0]:.2e} "
          f"times=({t_clean:.1f}s,{t_noisy:.1f}s) "
          f"min_traj_eig={trajectory_min_eigenvalue(traj):.1e}")
