"""Master-equation right-hand sides, fixed-step integration, and records.

The true system evolves under a Hamiltonian driven by the transverse
control field plus a dephasing-type dissipator whose jump operator is the
measured observable. The measurement record is the observable expectation
sampled on a uniform grid, optionally corrupted by Gaussian noise.
"""

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import qops
from .controls import ControlField, field_at
from .errors import IntegrationError


@dataclass(frozen=True)
class PhysicsConfig:
    """All scalar parameters of a run.

    dim_spin is the total angular momentum F (half-integer, d = 2F + 1).
    gamma_big is the probe coupling rate, gamma_small the nudging gain.
    steps_per_pass must be even so the reflection t -> T - t maps the
    uniform grid onto itself.
    """

    dim_spin: float = 0.5
    gamma_big: float = 0.25
    gamma_small: float = 0.25
    b0: float = 10.0
    t_horizon: float = 1.0
    g_f: float = 1.0
    mu_b: float = 1.0
    beta: float = 0.0
    steps_per_pass: int = 2000
    noise_meas: float = 0.0
    noise_field: float = 0.0
    rng_seed: int = 0
    gain_scheme: str = "auto"  # auto | split | plain, see bfn module

    def __post_init__(self):
        two_f = 2 * self.dim_spin
        if abs(two_f - round(two_f)) > 1e-12 or self.dim_spin < 0.5:
            raise ValueError(f"dim_spin must be a half-integer >= 1/2, got {self.dim_spin}")
        if self.gamma_big <= 0 or self.gamma_small <= 0:
            raise ValueError("gamma_big and gamma_small must be positive")
        if self.t_horizon <= 0:
            raise ValueError("t_horizon must be positive")
        if self.steps_per_pass <= 0 or self.steps_per_pass % 2 != 0:
            raise ValueError("steps_per_pass must be a positive even integer")
        if self.noise_meas < 0 or self.noise_field < 0:
            raise ValueError("noise levels must be non-negative")
        if self.gain_scheme not in ("auto", "split", "plain"):
            raise ValueError(f"unknown gain_scheme {self.gain_scheme!r}")

    @property
    def dim(self) -> int:
        return int(round(2 * self.dim_spin)) + 1

    @property
    def dt(self) -> float:
        return self.t_horizon / self.steps_per_pass

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_horizon, self.steps_per_pass + 1)

    def half_times(self) -> np.ndarray:
        """Grid refined by 2: every RK4 stage time is one of these nodes."""
        return np.linspace(0.0, self.t_horizon, 2 * self.steps_per_pass + 1)

    def replace(self, **overrides) -> "PhysicsConfig":
        return dataclasses.replace(self, **overrides)


def two_level_preset(**overrides) -> PhysicsConfig:
    """Benchmark two-level parameters: rates 0.25 kHz, 10 kHz field, 1 ms window."""
    cfg = PhysicsConfig(
        dim_spin=0.5, gamma_big=0.25, gamma_small=0.25, b0=10.0, t_horizon=1.0,
        g_f=1.0, mu_b=1.0, beta=0.0, steps_per_pass=2000,
    )
    return cfg.replace(**overrides)


def spin1_preset(**overrides) -> PhysicsConfig:
    """Benchmark spin-1 parameters (dimensionless): unit rates, effective field
    amplitude 30 stored in b0 with g_f = mu_b = 1, quadratic term beta = 10."""
    cfg = PhysicsConfig(
        dim_spin=1.0, gamma_big=1.0, gamma_small=1.0, b0=30.0, t_horizon=1.0,
        g_f=1.0, mu_b=1.0, beta=10.0, steps_per_pass=2000,
    )
    return cfg.replace(**overrides)


class DerivedSeeds(NamedTuple):
    control: np.random.SeedSequence
    truth: np.random.SeedSequence
    noise_meas: np.random.SeedSequence
    noise_field: np.random.SeedSequence


def derived_seeds(master: int) -> DerivedSeeds:
    """Independent child seeds for each randomness consumer of a run."""
    return DerivedSeeds(*np.random.SeedSequence(master).spawn(4))


@dataclass
class MeasurementRecord:
    """Uniformly sampled observable record on [0, T]; the sole estimation input."""

    times: np.ndarray
    values: np.ndarray
    clean_values: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.clean_values)):
            raise ValueError("times, values and clean_values must have equal length")
        spacing = np.diff(self.times)
        if np.any(spacing <= 0) or not np.allclose(spacing, spacing[0], rtol=1e-9):
            raise ValueError("times must be strictly increasing and uniform")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.clean_values))):
            raise ValueError("record values must be finite")


def measurement_operator(cfg: PhysicsConfig) -> np.ndarray:
    """The measured observable, which doubles as the jump operator:
    sigma_z for a two-level system, sqrt(gamma_big) * Fz otherwise."""
    if cfg.dim == 2:
        return qops.pauli("z")
    return np.sqrt(cfg.gamma_big) * qops.angular_momentum(cfg.dim_spin, "z")


def lindblad_rhs(state, hamiltonian, jump, rate, direction="forward"):
    """Master-equation right-hand side -i[H, rho] + rate * D[jump] rho.

    direction='backward' flips the sign of the whole drift (+i[H, rho]
    - rate * D[jump] rho), which is the generator of the time-reversed flow.
    """
    if state.shape != hamiltonian.shape or state.shape != jump.shape:
        raise ValueError("state, hamiltonian and jump must share one dimension")
    out = -1j * qops.commutator(hamiltonian, state) + rate * qops.dissipator(jump, state)
    if direction == "backward":
        return -out
    if direction != "forward":
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    return out


def hamiltonian_at(t: float, control: ControlField, cfg: PhysicsConfig) -> np.ndarray:
    """Control Hamiltonian at time t.

    Two-level systems use the bare form bx*sigma_x + by*sigma_y. Larger spins
    use g_f*mu_b*(bx*Fx + by*Fy) plus the quadratic term beta*gamma_big*Fx^2
    that makes the record informationally complete.
    """
    bx, by = field_at(t, control, "forward")
    if cfg.dim == 2:
        return bx * qops.pauli("x") + by * qops.pauli("y")
    fx = qops.angular_momentum(cfg.dim_spin, "x")
    fy = qops.angular_momentum(cfg.dim_spin, "y")
    coupling = cfg.g_f * cfg.mu_b
    return coupling * (bx * fx + by * fy) + cfg.beta * cfg.gamma_big * (fx @ fx)


def rk4_step(state, t, dt, rhs: Callable):
    """One classical 4th-order Runge-Kutta update for d(state)/dt = rhs(t, state)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = rhs(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hamiltonian_table(bx, by, cfg: PhysicsConfig) -> np.ndarray:
    """Stack of Hamiltonians for arrays of field samples, shape (n, d, d)."""
    bx = np.asarray(bx)[:, None, None]
    by = np.asarray(by)[:, None, None]
    if cfg.dim == 2:
        return bx * qops.pauli("x") + by * qops.pauli("y")
    fx = qops.angular_momentum(cfg.dim_spin, "x")
    fy = qops.angular_momentum(cfg.dim_spin, "y")
    coupling = cfg.g_f * cfg.mu_b
    return coupling * (bx * fx + by * fy) + cfg.beta * cfg.gamma_big * (fx @ fx)


def dissipator_coefficients(jump: np.ndarray, rate: float) -> np.ndarray:
    """Entrywise damping coefficients of rate * D[jump] for a diagonal jump.

    With o = diag(jump), D[jump] acts on rho as the Hadamard product with
    the matrix o_i * o_j - (o_i^2 + o_j^2) / 2 (zero on the diagonal,
    negative off it), which is much cheaper than four matrix products.
    """
    o = np.real(np.diag(jump))
    o_sq = o**2
    return rate * (np.outer(o, o) - 0.5 * (o_sq[:, None] + o_sq[None, :]))


def liouvillian_table(h_table, jump, rate, sign=+1.0) -> np.ndarray:
    """Vectorized-state generators A(t_j) with d(vec rho)/dt = A vec(rho).

    Row-major flattening, so X -> A X B maps to kron(A, B^T). The jump
    operator must be diagonal (sigma_z / Fz here), which makes the
    dissipator a diagonal matrix in vec space. sign=-1 builds the reversed
    generator.
    """
    if np.abs(jump - np.diag(np.diag(jump))).max() > 0:
        raise ValueError("liouvillian_table requires a diagonal jump operator")
    n, d, _ = h_table.shape
    eye = np.eye(d)
    left = np.einsum("jab,cf->jacbf", h_table, eye).reshape(n, d * d, d * d)
    right = np.einsum("ab,jfc->jacbf", eye, h_table).reshape(n, d * d, d * d)
    lio = (-1j * sign) * (left - right)
    damp = dissipator_coefficients(jump, rate).reshape(-1)
    lio += sign * np.diag(damp)
    return lio


def affine_step_tables(a_table, b_table, dt):
    """Fold classical RK4 into one affine map per step.

    For dv/dt = A(t) v + b(t) with A, b sampled on the half grid (2N+1
    nodes), every RK4 stage value is known in advance, so the update
    v_{i+1} = P_i v_i + q_i can be precomputed in batch. This is exactly
    RK4, just with the state-independent algebra hoisted out of the loop.
    """
    a0, a1, a2 = a_table[:-2:2], a_table[1::2], a_table[2::2]
    m = a_table.shape[1]
    eye = np.eye(m)
    k1 = a0
    k2 = a1 @ (eye + (0.5 * dt) * k1)
    k3 = a1 @ (eye + (0.5 * dt) * k2)
    k4 = a2 @ (eye + dt * k3)
    p = eye + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    b0, b1, b2 = b_table[:-2:2], b_table[1::2], b_table[2::2]
    m1 = b0
    m2 = (0.5 * dt) * np.einsum("nij,nj->ni", a1, m1) + b1
    m3 = (0.5 * dt) * np.einsum("nij,nj->ni", a1, m2) + b1
    m4 = dt * np.einsum("nij,nj->ni", a2, m3) + b2
    q = (dt / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
    return p, q


def integrate_affine(rho0, p_table, q_table, cfg, observe=None):
    """March the precomputed per-step affine maps over one pass.

    Re-Hermitizes after each step and aborts on non-finite values.
    observe(i, rho) is called at every full grid node with the current
    state as a d x d matrix (a view; callbacks must copy to retain it).
    """
    d = cfg.dim
    v = np.asarray(rho0, dtype=complex).reshape(-1).copy()
    if observe is not None:
        observe(0, v.reshape(d, d))
    for i in range(len(p_table)):
        v = p_table[i] @ v + q_table[i]
        rho = v.reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(
                f"non-finite state at step {i + 1}/{len(p_table)} "
                f"(t = {(i + 1) * cfg.dt:.6g})"
            )
        v = rho.reshape(-1)
        if observe is not None:
            observe(i + 1, rho)
    return v.reshape(d, d)


def integrate_pass(rho0, h_table, jump, rate, cfg, sign=+1.0,
                   injection=None, observe=None):
    """One pass of steps_per_pass RK4 steps over the uniform grid.

    h_table holds the Hamiltonian at the half-grid nodes (2N+1 entries).
    sign=+1 integrates the forward generator, sign=-1 the reversed one.
    injection, if given, is a pair (gain, y_stage) adding the nudging term
    gain * (tr(jump rho) - y_stage[j]) * jump to the drift at half-grid
    node j. Returns the final state.
    """
    a_table = liouvillian_table(h_table, jump, rate, sign)
    n_nodes = a_table.shape[0]
    if injection is not None:
        gain, y_stage = injection
        o_vec = jump.reshape(-1).real
        a_table += gain * np.outer(o_vec, o_vec)
        b_table = np.outer(np.asarray(y_stage) * (-gain), o_vec)
    else:
        b_table = np.zeros((n_nodes, a_table.shape[1]))
    p, q = affine_step_tables(a_table, b_table, cfg.dt)
    return integrate_affine(rho0, p, q, cfg, observe=observe)


def simulate_truth(rho0, control: ControlField, cfg: PhysicsConfig):
    """Integrate the true master equation and sample the observable.

    Returns (trajectory, record): trajectory has shape (N+1, d, d) and the
    record's clean_values are tr(O rho(t_i)); values start as a noiseless
    copy (see `add_noise`).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    qops.require_density(rho0, "initial state")
    if rho0.shape != (cfg.dim, cfg.dim):
        raise ValueError(f"initial state has shape {rho0.shape}, config wants dim {cfg.dim}")
    obs = measurement_operator(cfg)
    bx, by = field_at(cfg.half_times(), control, "forward")
    h_table = hamiltonian_table(bx, by, cfg)

    trajectory = np.empty((cfg.steps_per_pass + 1, cfg.dim, cfg.dim), dtype=complex)
    clean = np.empty(cfg.steps_per_pass + 1)

    def observe(i, rho):
        trajectory[i] = rho
        clean[i] = np.einsum("ij,ji->", obs, rho).real

    integrate_pass(rho0, h_table, obs, cfg.gamma_big, cfg, sign=+1.0, observe=observe)
    record = MeasurementRecord(times=cfg.times(), values=clean.copy(), clean_values=clean)
    return trajectory, record


def trajectory_min_eigenvalue(trajectory) -> float:
    """Smallest eigenvalue along a stack of Hermitian states."""
    return float(np.linalg.eigvalsh(trajectory).min())


def add_noise(record: MeasurementRecord, level: float, seed) -> MeasurementRecord:
    """Additive i.i.d. Gaussian noise with standard deviation
    level * RMS(clean_values), deterministic given the seed.

    The RMS-relative scale is the concrete reading of "level percent noise";
    a zero signal therefore receives zero noise.
    """
    if level < 0:
        raise ValueError("noise level must be non-negative")
    rms = float(np.sqrt(np.mean(record.clean_values**2)))
    if level == 0 or rms == 0:
        return MeasurementRecord(
            times=record.times.copy(),
            values=record.clean_values.copy(),
            clean_values=record.clean_values.copy(),
        )
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, level * rms, size=record.clean_values.shape)
    return MeasurementRecord(
        times=record.times.copy(),
        values=record.clean_values + noise,
        clean_values=record.clean_values.copy(),
    )
