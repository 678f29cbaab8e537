"""Control-field synthesis and the observability precondition check.

The transverse field is parameterized by a constant amplitude b0 and a
phase angle theta(t): bx = b0*cos(theta), by = b0*sin(theta), so the
amplitude constraint sqrt(bx^2 + by^2) = b0 holds exactly by construction.
theta(t) is a natural cubic spline through random knots, which keeps both
field components C^2 on [0, T].
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import tolerances as tol
from .errors import ControlSamplingError

DEFAULT_KNOTS = 10  # knots including both endpoints, i.e. 9 spline intervals
MAX_RESAMPLE_ATTEMPTS = 100


@dataclass(frozen=True)
class ControlField:
    b0: float
    knot_times: np.ndarray
    knot_phases: np.ndarray
    spline: CubicSpline = field(repr=False)
    dspline: CubicSpline = field(repr=False)
    ddspline: CubicSpline = field(repr=False)

    @property
    def t_horizon(self) -> float:
        return float(self.knot_times[-1])

    @property
    def spline_coeffs(self) -> np.ndarray:
        """Per-interval cubic coefficients, shape (4, n_intervals)."""
        return self.spline.c

    def theta(self, t):
        return self.spline(t)

    def theta_dot(self, t):
        return self.dspline(t)

    def theta_ddot(self, t):
        return self.ddspline(t)


def synthesize_phase(knot_phases, t_horizon: float, b0: float = 1.0) -> ControlField:
    """Natural cubic spline through uniformly spaced phase knots on [0, t_horizon]."""
    phases = np.asarray(knot_phases, dtype=float)
    if phases.ndim != 1 or phases.size < 4:
        raise ValueError(f"need at least 4 phase knots, got {phases.size}")
    if t_horizon <= 0:
        raise ValueError("t_horizon must be positive")
    times = np.linspace(0.0, t_horizon, phases.size)
    return _build_field(times, phases, b0)


def field_from_table(times, phases, b0: float) -> ControlField:
    """Build a field from an externally supplied (t, theta) table.

    Hook for injecting a control designed elsewhere; the table rows become
    the spline knots, so a dense table reproduces the source function closely.
    """
    times = np.asarray(times, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if times.size != phases.size or times.size < 4:
        raise ValueError("need matching (t, theta) columns with at least 4 rows")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and be strictly increasing")
    return _build_field(times, phases, b0)


def _build_field(times, phases, b0):
    spline = CubicSpline(times, phases, bc_type="natural")
    return ControlField(
        b0=float(b0),
        knot_times=times,
        knot_phases=phases,
        spline=spline,
        dspline=spline.derivative(1),
        ddspline=spline.derivative(2),
    )


def field_at(t, control: ControlField, direction: str = "forward"):
    """(bx, by) at time t; the backward orientation reads the field at T - t."""
    t_arr = np.asarray(t, dtype=float)
    horizon = control.t_horizon
    if np.any(t_arr < -1e-12) or np.any(t_arr > horizon * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {horizon}]")
    if direction == "backward":
        t_arr = horizon - t_arr
    elif direction != "forward":
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    theta = control.spline(t_arr)
    return control.b0 * np.cos(theta), control.b0 * np.sin(theta)


def check_theorem_precondition(control: ControlField) -> float:
    """Initial field-rotation discriminant bx(0)*by'(0) - by(0)*bx'(0).

    By the chain rule this equals b0^2 * theta'(0). A value near zero means
    the field rotation axis is initially frozen and the record cannot pin
    down all Bloch components; callers treat |value| < 1e-6 * b0^2 as a
    violation.
    """
    theta0 = float(control.spline(0.0))
    dtheta0 = float(control.dspline(0.0))
    bx = control.b0 * np.cos(theta0)
    by = control.b0 * np.sin(theta0)
    dbx = -control.b0 * np.sin(theta0) * dtheta0
    dby = control.b0 * np.cos(theta0) * dtheta0
    return float(bx * dby - by * dbx)


def precondition_threshold(b0: float) -> float:
    return tol.PRECONDITION_REL_MARGIN * b0 * b0


def sample_random_field(cfg, seed, n_knots: int = DEFAULT_KNOTS) -> ControlField:
    """Draw uniform random phases in [0, 2*pi) at n_knots equally spaced times
    and spline them; redraw (bounded) until the rotation discriminant clears
    the observability margin. Deterministic given the seed."""
    rng = np.random.default_rng(seed)
    threshold = precondition_threshold(cfg.b0)
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n_knots)
        control = synthesize_phase(phases, cfg.t_horizon, b0=cfg.b0)
        if abs(check_theorem_precondition(control)) >= threshold:
            return control
    raise ControlSamplingError(
        f"{MAX_RESAMPLE_ATTEMPTS} consecutive draws violated the observability "
        "margin; this is statistically impossible and signals an RNG defect"
    )


def export_field_csv(control: ControlField, path) -> None:
    """Write the spline knots as rows t, theta, bx, by (round-trip exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "theta", "bx", "by"])
        for t, theta in zip(control.knot_times, control.knot_phases):
            bx = control.b0 * np.cos(theta)
            by = control.b0 * np.sin(theta)
            writer.writerow([repr(float(t)), repr(float(theta)), repr(float(bx)), repr(float(by))])


def import_field_csv(path) -> ControlField:
    """Rebuild a field from a t, theta, bx, by table written by `export_field_csv`
    (or supplied externally); b0 is recovered from the first row's bx, by."""
    times, phases, b0 = [], [], None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            times.append(float(row["t"]))
            phases.append(float(row["theta"]))
            if b0 is None:
                b0 = float(np.hypot(float(row["bx"]), float(row["by"])))
    if b0 is None:
        raise ValueError(f"no rows in control table {path}")
    return field_from_table(times, phases, b0)
