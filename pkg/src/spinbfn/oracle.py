"""Brute-force reconstruction of the initial state by linear least squares.

The master equation is linear in the state, so the map from the initial
state to the measurement record is exactly linear. Simulating the record
for each element of an orthonormal traceless Hermitian basis assembles
that map column by column; a least-squares solve then inverts the observed
record. This path shares nothing with the nudging estimator and is used to
validate it.
"""

from dataclasses import dataclass

import numpy as np

from . import qops
from . import tolerances as tol
from .controls import ControlField
from .dynamics import MeasurementRecord, PhysicsConfig, simulate_truth
from .errors import UnobservableControlError

DEFAULT_PROBE_EPS = 1e-3


@dataclass
class LinearResponseMatrix:
    """Sensitivities of the record to each traceless basis direction.

    matrix[i, j] is the change of sample i per unit coefficient of basis
    element j; baseline is the record of the maximally mixed initial state
    (zero in exact arithmetic, kept for honesty of the subtraction).
    """

    matrix: np.ndarray
    baseline: np.ndarray
    basis: list
    probe_eps: float


def build_response(control: ControlField, cfg: PhysicsConfig,
                   probe_eps: float = DEFAULT_PROBE_EPS) -> LinearResponseMatrix:
    """Simulate Id/d and Id/d + eps*E_j for every basis element E_j.

    eps must keep the probe states PSD (|eps| < 1/(d*max|eig(E_j)|)); since
    the dynamics is linear in the state the assembled columns are exactly
    eps-independent up to integrator round-off.
    """
    d = cfg.dim
    basis = qops.traceless_hermitian_basis(d)
    identity = np.eye(d, dtype=complex) / d
    _, base_record = simulate_truth(identity, control, cfg)
    baseline = base_record.clean_values
    columns = np.empty((baseline.size, len(basis)))
    for j, elem in enumerate(basis):
        _, rec = simulate_truth(identity + probe_eps * elem, control, cfg)
        columns[:, j] = (rec.clean_values - baseline) / probe_eps
    return LinearResponseMatrix(matrix=columns, baseline=baseline, basis=basis,
                                probe_eps=probe_eps)


def response_rank(response: LinearResponseMatrix) -> tuple[int, np.ndarray]:
    """Numerical rank with the relative singular-value threshold."""
    svals = np.linalg.svd(response.matrix, compute_uv=False)
    rank = int(np.sum(svals > tol.RANK_REL_THRESHOLD * svals[0]))
    return rank, svals


@dataclass
class ReconstructionResult:
    estimate: np.ndarray        # PSD-projected reconstruction
    raw_estimate: np.ndarray    # before projection
    coefficients: np.ndarray
    residual_norm: float        # || response @ c - (record - baseline) ||
    condition_number: float
    rank: int
    singular_values: np.ndarray


def reconstruct(record: MeasurementRecord, response: LinearResponseMatrix,
                rcond: float = tol.LSTSQ_RCOND) -> ReconstructionResult:
    """Least-squares inversion of the record through the response map.

    Raises UnobservableControlError when the response is rank deficient,
    which is exactly the failure mode of a control whose initial rotation
    discriminant vanishes.
    """
    if record.values.size != response.baseline.size:
        raise ValueError(
            f"record has {record.values.size} samples, response expects {response.baseline.size}"
        )
    rank, svals = response_rank(response)
    expected = len(response.basis)
    if rank < expected:
        raise UnobservableControlError(
            f"response map has numerical rank {rank} < {expected}: the control "
            "does not make the record informationally complete",
            rank=rank, expected_rank=expected,
        )
    rhs = record.values - response.baseline
    coeffs, _, _, _ = np.linalg.lstsq(response.matrix, rhs, rcond=rcond)
    residual = float(np.linalg.norm(response.matrix @ coeffs - rhs))
    d = int(np.sqrt(expected + 1))
    raw = np.eye(d, dtype=complex) / d
    for c, elem in zip(coeffs, response.basis):
        raw = raw + c * elem
    return ReconstructionResult(
        estimate=qops.project_psd(qops.hermitize(raw)),
        raw_estimate=raw,
        coefficients=coeffs,
        residual_norm=residual,
        condition_number=float(svals[0] / svals[-1]) if svals[-1] > 0 else float("inf"),
        rank=rank,
        singular_values=svals,
    )


def export_response_csv(response: LinearResponseMatrix, path) -> None:
    """Dump the sensitivity matrix for inspection (row = sample, col = basis)."""
    header = ",".join(["baseline"] + [f"e{j}" for j in range(len(response.basis))])
    data = np.column_stack([response.baseline, response.matrix])
    np.savetxt(path, data, delimiter=",", header=header, comments="")
