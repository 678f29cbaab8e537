"""Back-and-forth nudging estimator and its convergence diagnostics.

A Luenberger-style observer copies the plant dynamics plus an output-error
injection. One iteration integrates the observer forward over the data
window [0, T], then backward with time-reversed dynamics and reflected
data; terminal states are stitched (backward starts where forward ended
and vice versa), so a finite record acts like an arbitrarily long one.

Diagnostics (available when the true trajectory is supplied) track the
error rho_tilde = rho_hat - rho on the global time axis [0, 2nT]:
V(t) = tr(rho_tilde^2), Z(t) = tr(O rho_tilde), and the per-iteration
sequence V_k = V(rho_tilde(2kT)) whose decrease certifies convergence.
"""

from dataclasses import dataclass

import numpy as np

from . import qops
from . import tolerances as tol
from .controls import ControlField, field_at
from .dynamics import (
    MeasurementRecord,
    PhysicsConfig,
    affine_step_tables,
    derived_seeds,
    hamiltonian_at,
    hamiltonian_table,
    integrate_affine,
    lindblad_rhs,
    liouvillian_table,
    measurement_operator,
)
from .errors import BlowupError, GridMismatchError, IntegrationError


@dataclass
class ObserverState:
    """One observer snapshot: the estimate plus its position in the sweep."""

    rho_hat: np.ndarray
    iteration_k: int
    direction: str
    t_local: float


@dataclass
class BfnRun:
    """Full diagnostic trace of one estimation run.

    Truth-dependent fields (v_trace, z_trace, x/y traces, vk_sequence,
    weighted_residuals, fidelity_vs_truth) are None when the run was done
    from the record alone, which is the situation of a real experiment.
    """

    times_global: np.ndarray
    estimates: np.ndarray            # rho_hat_f_k(0) for k = 0..n, raw (not projected)
    final_estimate: np.ndarray       # PSD-projected last estimate
    min_eigenvalue_trace: np.ndarray
    surrogate_z_trace: np.ndarray    # y_hat - y on the global grid (record-based)
    surrogate_residuals: np.ndarray  # 2*gamma*int g*(y_hat-y)^2 dt per iteration
    n_iterations: int
    config: PhysicsConfig
    v_trace: np.ndarray | None = None
    z_trace: np.ndarray | None = None
    x_trace: np.ndarray | None = None
    y_trace: np.ndarray | None = None
    vk_sequence: np.ndarray | None = None
    weighted_residuals: np.ndarray | None = None
    fidelity_vs_truth: float | None = None


def resolve_gain_scheme(cfg: PhysicsConfig) -> str:
    """'split' uses forward gain (G + g) and backward gain (G - g) on the
    output error; 'plain' uses gain g in both directions. 'auto' picks
    split for two-level systems and plain otherwise."""
    if cfg.gain_scheme != "auto":
        return cfg.gain_scheme
    return "split" if cfg.dim == 2 else "plain"


def injection_gains(cfg: PhysicsConfig) -> tuple[float, float]:
    """Signed coefficients (forward, backward) multiplying O*(y_hat - y)
    in the observer drift."""
    big, small = cfg.gamma_big, cfg.gamma_small
    if resolve_gain_scheme(cfg) == "split":
        return -(big + small), +(big - small)
    return -small, -small


def observer_rhs_forward(rho_hat, t, control: ControlField, record_value, cfg: PhysicsConfig):
    """Forward observer drift: plant generator plus output-error injection."""
    obs = measurement_operator(cfg)
    h = hamiltonian_at(t, control, cfg)
    gain_f, _ = injection_gains(cfg)
    y_hat = np.einsum("ij,ji->", obs, rho_hat).real
    drift = lindblad_rhs(rho_hat, h, obs, cfg.gamma_big, "forward")
    return drift + gain_f * (y_hat - record_value) * obs


def observer_rhs_backward(rho_hat, t, control: ControlField, record_value, cfg: PhysicsConfig):
    """Backward observer drift at local time t: reversed plant generator
    evaluated with the field at T - t, plus the injection against the
    reflected record value y(T - t)."""
    obs = measurement_operator(cfg)
    h = hamiltonian_at(cfg.t_horizon - t, control, cfg)
    _, gain_b = injection_gains(cfg)
    y_hat = np.einsum("ij,ji->", obs, rho_hat).real
    drift = lindblad_rhs(rho_hat, h, obs, cfg.gamma_big, "backward")
    return drift + gain_b * (y_hat - record_value) * obs


def _stage_values(node_values: np.ndarray) -> np.ndarray:
    """Record values on the half grid: node values at even indices, adjacent
    midpoint averages at odd ones (the RK4 mid-stage data)."""
    n = node_values.size - 1
    stage = np.empty(2 * n + 1)
    stage[::2] = node_values
    stage[1::2] = 0.5 * (node_values[:-1] + node_values[1:])
    return stage


def noisy_field_tables(control: ControlField, cfg: PhysicsConfig):
    """The observer's copy of the field on the half grid, forward orientation.

    When noise_field > 0, independent Gaussian errors with standard deviation
    noise_field * b0 are frozen onto each half-grid node (one corrupted copy
    for the whole run, modeling imperfect field knowledge); the truth
    simulation always uses the clean field."""
    bx, by = field_at(cfg.half_times(), control, "forward")
    bx = np.array(bx, dtype=float)
    by = np.array(by, dtype=float)
    if cfg.noise_field > 0:
        rng = np.random.default_rng(derived_seeds(cfg.rng_seed).noise_field)
        sigma = cfg.noise_field * cfg.b0
        bx += rng.normal(0.0, sigma, size=bx.shape)
        by += rng.normal(0.0, sigma, size=by.shape)
    return bx, by


def run_bfn(record: MeasurementRecord, control: ControlField, cfg: PhysicsConfig,
            n_iterations: int, truth=None, early_stop_residual: float | None = None) -> BfnRun:
    """Alternate forward and backward observer passes n_iterations times.

    The observer starts from the maximally mixed state Id/d. When the true
    trajectory is supplied, the full error diagnostics are filled in;
    estimation itself consumes only the record. early_stop_residual, if
    given, stops iterating once the record-based weighted residual
    2*gamma*int g*(y_hat - y)^2 dt of an iteration falls below it.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    n = cfg.steps_per_pass
    if record.times.size != n + 1 or not np.allclose(record.times, cfg.times(), rtol=0, atol=1e-12 * cfg.t_horizon):
        raise GridMismatchError(
            f"record grid ({record.times.size} samples on [{record.times[0]}, {record.times[-1]}]) "
            f"does not match config ({n + 1} samples on [0, {cfg.t_horizon}])"
        )
    if truth is not None:
        truth = np.asarray(truth, dtype=complex)
        if truth.shape != (n + 1, cfg.dim, cfg.dim):
            raise ValueError(f"truth trajectory has shape {truth.shape}, expected {(n + 1, cfg.dim, cfg.dim)}")

    obs = measurement_operator(cfg)
    o_diag = np.diag(obs).real
    gain_f, gain_b = injection_gains(cfg)
    bx, by = noisy_field_tables(control, cfg)
    h_fwd = hamiltonian_table(bx, by, cfg)

    y_fwd = _stage_values(record.values)
    y_bwd = y_fwd[::-1]

    # One affine RK4 map per step and direction, reused by every iteration.
    o_vec = obs.reshape(-1).real
    step_tables = {}
    for direction, h_table, gain, y_stage in (
        ("forward", h_fwd, gain_f, y_fwd),
        ("backward", h_fwd[::-1], gain_b, y_bwd),
    ):
        sign = -1.0 if direction == "backward" else +1.0
        a_table = liouvillian_table(h_table, obs, cfg.gamma_big, sign)
        a_table += gain * np.outer(o_vec, o_vec)
        b_table = np.outer(y_stage * (-gain), o_vec)
        step_tables[direction] = affine_step_tables(a_table, b_table, cfg.dt)

    two_level = cfg.dim == 2 and truth is not None
    n_nodes_total = 2 * n_iterations * n + 1
    surrogate_z = np.empty(n_nodes_total)
    v_trace = np.empty(n_nodes_total) if truth is not None else None
    z_trace = np.empty(n_nodes_total) if truth is not None else None
    x_trace = np.empty(n_nodes_total) if two_level else None
    y_trace = np.empty(n_nodes_total) if two_level else None

    estimates = [np.eye(cfg.dim, dtype=complex) / cfg.dim]
    weighted = [] if truth is not None else None
    surrogate = []

    g_pair = _pair_weights(cfg)
    dt = cfg.dt

    def make_observe(offset, backward):
        def observe(i, rho):
            g = offset + i
            y_hat = np.dot(o_diag, rho.diagonal()).real
            data = record.values[n - i] if backward else record.values[i]
            surrogate_z[g] = y_hat - data
            if truth is not None:
                err = rho - (truth[n - i] if backward else truth[i])
                v_trace[g] = np.vdot(err, err).real
                z_trace[g] = np.dot(o_diag, err.diagonal()).real
                if two_level:
                    x_trace[g] = (err[0, 1] + err[1, 0]).real
                    y_trace[g] = (1j * (err[0, 1] - err[1, 0])).real
        return observe

    rho_hat = estimates[0]
    n_done = n_iterations
    for k in range(n_iterations):
        state = ObserverState(rho_hat, k, "forward", 0.0)
        for direction in ("forward", "backward"):
            backward = direction == "backward"
            offset = (2 * k + (1 if backward else 0)) * n
            p_table, q_table = step_tables[direction]
            try:
                rho_hat = integrate_affine(
                    state.rho_hat, p_table, q_table, cfg,
                    observe=make_observe(offset, backward),
                )
            except IntegrationError as exc:
                raise BlowupError(
                    f"observer blew up in iteration {k} ({direction}): {exc}",
                    iteration=k, direction=direction,
                ) from exc
            if np.abs(rho_hat).max() > tol.BLOWUP_NORM_MAX:
                raise BlowupError(
                    f"observer norm exceeded {tol.BLOWUP_NORM_MAX:g} in iteration {k} ({direction})",
                    iteration=k, direction=direction,
                )
            state = ObserverState(rho_hat, k, direction, cfg.t_horizon)

        estimates.append(rho_hat)
        window = slice(2 * k * n, 2 * (k + 1) * n + 1)
        surrogate.append(
            2.0 * cfg.gamma_small * np.trapezoid(g_pair * surrogate_z[window] ** 2, dx=dt)
        )
        if truth is not None:
            weighted.append(
                2.0 * cfg.gamma_small * np.trapezoid(g_pair * z_trace[window] ** 2, dx=dt)
            )
        if early_stop_residual is not None and surrogate[-1] < early_stop_residual:
            n_done = k + 1
            break

    n_nodes_done = 2 * n_done * n + 1
    estimates = np.array(estimates)
    vk = None
    fid = None
    if truth is not None:
        vk = np.array([qops.lyapunov_v(qops.hermitize(est - truth[0])) for est in estimates])
    final_estimate = qops.project_psd(qops.hermitize(estimates[-1]))
    if truth is not None:
        fid = qops.fidelity(final_estimate, truth[0])
    min_eigs = np.array([qops.min_eigenvalue(est) for est in estimates])

    return BfnRun(
        times_global=np.arange(n_nodes_done) * dt,
        estimates=estimates,
        final_estimate=final_estimate,
        min_eigenvalue_trace=min_eigs,
        surrogate_z_trace=surrogate_z[:n_nodes_done],
        surrogate_residuals=np.array(surrogate),
        n_iterations=n_done,
        config=cfg,
        v_trace=v_trace[:n_nodes_done] if truth is not None else None,
        z_trace=z_trace[:n_nodes_done] if truth is not None else None,
        x_trace=x_trace[:n_nodes_done] if two_level else None,
        y_trace=y_trace[:n_nodes_done] if two_level else None,
        vk_sequence=vk,
        weighted_residuals=np.array(weighted) if truth is not None else None,
        fidelity_vs_truth=fid,
    )


def _pair_weights(cfg: PhysicsConfig) -> np.ndarray:
    """Exponential weight over one back-and-forth window [0, 2T]: exp(4*G*u)
    while going forward, exp(4*G*(2T - u)) while coming back. Continuous at
    u = T where both branches give exp(4*G*T), and equal to 1 at both ends."""
    n = cfg.steps_per_pass
    u = np.arange(n + 1) * cfg.dt
    fwd = np.exp(4.0 * cfg.gamma_big * u)
    bwd = np.exp(4.0 * cfg.gamma_big * (cfg.t_horizon - u))
    return np.concatenate([fwd, bwd[1:]])


def nudging_weight(t, cfg: PhysicsConfig):
    """The weight g(t) on the global axis, >= 1 everywhere, resetting to 1 at
    every window start 2kT."""
    t = np.asarray(t, dtype=float)
    period = 2.0 * cfg.t_horizon
    u = np.remainder(t, period)
    g = np.where(
        u <= cfg.t_horizon,
        np.exp(4.0 * cfg.gamma_big * u),
        np.exp(4.0 * cfg.gamma_big * (period - u)),
    )
    return g if g.ndim else float(g)


def envelope_decreasing(vk) -> bool:
    """Qualitative convergence check robust to noise floors: the max over the
    second half of the V_k sequence is below the max over the first half,
    and the final value is below the initial one."""
    vk = np.asarray(vk, dtype=float)
    half = vk.size // 2
    return bool(vk[-1] < vk[0] and vk[half:].max() < vk[:half].max())


@dataclass
class LyapunovReport:
    vk_drops: np.ndarray            # V_{k+1} - V_k
    weighted_integrals: np.ndarray  # -2*gamma*int g*Z^2 dt per window
    rel_mismatch: np.ndarray
    max_rel_mismatch: float
    monotone: bool                  # V_{k+1} <= V_k for all k
    g_min: float
    g_at_window_middle: float       # both branch values at (2k+1)T coincide here


def lyapunov_diagnostics(run: BfnRun, cfg: PhysicsConfig) -> LyapunovReport:
    """Check the discrete-decrease identity V_{k+1} - V_k = -2*gamma*int g*Z^2 dt
    (trapezoidal) for every iteration of a truth-supplied run."""
    if run.vk_sequence is None or run.weighted_residuals is None:
        raise ValueError("run was produced without a truth trajectory")
    drops = np.diff(run.vk_sequence)
    integrals = -run.weighted_residuals
    denom = np.maximum(np.abs(integrals), 1e-300)
    rel = np.abs(drops - integrals) / denom
    rel[(drops == 0) & (integrals == 0)] = 0.0
    g_values = nudging_weight(run.times_global, cfg)
    return LyapunovReport(
        vk_drops=drops,
        weighted_integrals=integrals,
        rel_mismatch=rel,
        max_rel_mismatch=float(rel.max()),
        monotone=bool(np.all(drops <= 1e-15)),
        g_min=float(np.min(g_values)),
        g_at_window_middle=float(np.exp(4.0 * cfg.gamma_big * cfg.t_horizon)),
    )


@dataclass
class DvIdentityReport:
    forward_rel: np.ndarray   # per forward pass: sup|dV/dt_fd - rhs| / sup|rhs|
    backward_rel: np.ndarray
    max_forward_rel: float
    max_backward_rel: float


def dv_identity_residuals(run: BfnRun, cfg: PhysicsConfig) -> DvIdentityReport:
    """Compare centered finite differences of the computed V(t) against the
    analytic error-contraction law: dV/dt = -4*G*V - 2*g*Z^2 on forward
    intervals, +4*G*V - 2*g*Z^2 on backward ones.

    The relative error of a pass is the sup-norm mismatch over its interior
    nodes divided by the sup-norm of the analytic side on the same nodes
    (pointwise ratios are meaningless where the law crosses zero)."""
    if run.v_trace is None:
        raise ValueError("run was produced without a truth trajectory")
    n = cfg.steps_per_pass
    dt = cfg.dt
    fwd, bwd = [], []
    for k in range(run.n_iterations):
        for direction in ("forward", "backward"):
            offset = (2 * k + (0 if direction == "forward" else 1)) * n
            seg = slice(offset, offset + n + 1)
            v = run.v_trace[seg]
            z = run.z_trace[seg]
            fd = (v[2:] - v[:-2]) / (2.0 * dt)
            sign = -1.0 if direction == "forward" else 1.0
            rhs = sign * 4.0 * cfg.gamma_big * v[1:-1] - 2.0 * cfg.gamma_small * z[1:-1] ** 2
            scale = np.abs(rhs).max()
            err = np.abs(fd - rhs).max()
            rel = 0.0 if scale == 0 and err == 0 else err / max(scale, 1e-300)
            (fwd if direction == "forward" else bwd).append(rel)
    fwd = np.array(fwd)
    bwd = np.array(bwd)
    return DvIdentityReport(
        forward_rel=fwd,
        backward_rel=bwd,
        max_forward_rel=float(fwd.max()),
        max_backward_rel=float(bwd.max()),
    )


@dataclass
class AsymptoticReport:
    """Window-start error samples embodying the convergence chain: the output
    error, its one-sided first and second derivatives, and the two field-error
    combinations whose joint vanishing forces the full Bloch error to zero."""

    z_at_window_starts: np.ndarray       # Z(2kT), k = 0..n
    zdot_at_window_starts: np.ndarray    # one-sided dZ/dt(2kT+), k = 0..n-1
    zddot_at_window_starts: np.ndarray   # one-sided d2Z/dt2(2kT+), k = 0..n-1
    rotation_combo: np.ndarray           # Bx(0)*Y(2kT) - By(0)*X(2kT)
    rotation_rate_combo: np.ndarray      # Bx'(0)*Y(2kT) - By'(0)*X(2kT)


def error_trajectory(run: BfnRun, control: ControlField, cfg: PhysicsConfig) -> AsymptoticReport:
    """Emit the per-iteration error samples at window starts 2kT.

    Derivatives use one-sided stencils on the first three grid nodes of each
    forward pass, since they are discontinuous across pass boundaries.
    Two-level runs with truth only.
    """
    if run.z_trace is None or run.x_trace is None:
        raise ValueError("asymptotic checks require a two-level run with truth supplied")
    n = cfg.steps_per_pass
    dt = cfg.dt
    starts = np.arange(run.n_iterations + 1) * 2 * n
    z0 = run.z_trace[starts]
    x0 = run.x_trace[starts]
    y0 = run.y_trace[starts]

    pass_starts = starts[:-1]
    z_a = run.z_trace[pass_starts]
    z_b = run.z_trace[pass_starts + 1]
    z_c = run.z_trace[pass_starts + 2]
    zdot = (-3.0 * z_a + 4.0 * z_b - z_c) / (2.0 * dt)
    zddot = (z_a - 2.0 * z_b + z_c) / dt**2

    theta0 = float(control.spline(0.0))
    dtheta0 = float(control.dspline(0.0))
    bx0 = control.b0 * np.cos(theta0)
    by0 = control.b0 * np.sin(theta0)
    dbx0 = -control.b0 * np.sin(theta0) * dtheta0
    dby0 = control.b0 * np.cos(theta0) * dtheta0

    return AsymptoticReport(
        z_at_window_starts=z0,
        zdot_at_window_starts=zdot,
        zddot_at_window_starts=zddot,
        rotation_combo=bx0 * y0 - by0 * x0,
        rotation_rate_combo=dbx0 * y0 - dby0 * x0,
    )
