"""Complex operator algebra for spin systems.

Spin operators, Hermitian matrix helpers, the Bloch decomposition for
two-level states, the squared-error functional used by the convergence
diagnostics, and the Uhlmann fidelity. All functions are pure and operate
on plain complex numpy arrays; density matrices are ordinary ndarrays that
satisfy `require_density`.
"""

from typing import NamedTuple

import numpy as np

from . import tolerances as tol

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float


def pauli(axis: str) -> np.ndarray:
    """Return a copy of the 2x2 Pauli matrix for ``axis`` in {'x','y','z'}."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}, expected 'x', 'y' or 'z'")


def angular_momentum(f: float, axis: str) -> np.ndarray:
    """Spin-f angular momentum operator, dimension d = 2f + 1.

    Fz is diagonal with entries f, f-1, ..., -f; Fx and Fy are built from
    the ladder operators with the Condon-Shortley phase convention
    (real non-negative ladder matrix elements).
    """
    two_f = 2 * f
    if abs(two_f - round(two_f)) > 1e-12 or f < 0.5:
        raise ValueError(f"f must be a half-integer >= 1/2, got {f}")
    if axis not in ("x", "y", "z"):
        raise ValueError(f"unknown axis {axis!r}, expected 'x', 'y' or 'z'")
    d = int(round(two_f)) + 1
    m = f - np.arange(d)  # f, f-1, ..., -f
    if axis == "z":
        return np.diag(m).astype(complex)
    # <m+1| F+ |m> = sqrt(f(f+1) - m(m+1)); entries sit one above the diagonal
    raising = np.zeros((d, d), dtype=complex)
    lower_m = m[1:]
    raising[np.arange(d - 1), np.arange(1, d)] = np.sqrt(
        f * (f + 1) - lower_m * (lower_m + 1)
    )
    lowering = raising.conj().T
    if axis == "x":
        return (raising + lowering) / 2.0
    return (raising - lowering) / 2j


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lie bracket a@b - b@a."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def dissipator(op: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Lindblad superoperator D[op] applied to ``state``:
    op @ state @ op^dag - (op^dag op state + state op^dag op) / 2.
    """
    if op.shape != state.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {state.shape}")
    op_dag = op.conj().T
    opdop = op_dag @ op
    return op @ state @ op_dag - 0.5 * (opdop @ state + state @ opdop)


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, rtol: float = tol.HERM_RTOL) -> bool:
    scale = max(np.abs(m).max(), 1e-300)
    return np.abs(m - m.conj().T).max() <= rtol * scale


def require_hermitian(m: np.ndarray, what: str = "matrix") -> None:
    if not is_hermitian(m):
        raise ValueError(f"{what} is not Hermitian within tolerance")


def require_density(m: np.ndarray, what: str = "state") -> None:
    """Check the Hermitian / unit-trace contract for a density-like matrix.

    Positivity is deliberately not checked: observer states are Hermitian
    and trace one but may have (slightly) negative eigenvalues.
    """
    require_hermitian(m, what)
    if abs(np.trace(m).real - 1.0) > tol.TRACE_ATOL or abs(np.trace(m).imag) > tol.TRACE_ATOL:
        raise ValueError(f"{what} does not have unit trace (tr = {np.trace(m)})")


def expect(observable: np.ndarray, state: np.ndarray) -> float:
    """Real expectation value tr(observable @ state) for a Hermitian observable."""
    if observable.shape != state.shape:
        raise ValueError(f"dimension mismatch: {observable.shape} vs {state.shape}")
    require_hermitian(observable, "observable")
    value = np.einsum("ij,ji->", observable, state)
    if is_hermitian(state) and abs(value.imag) > tol.EXPECT_IMAG_ATOL:
        raise ValueError(f"expectation has spurious imaginary part {value.imag}")
    return float(value.real)


def bloch_decompose(m: np.ndarray) -> BlochVector:
    """Pauli-basis coordinates (tr(sx m), tr(sy m), tr(sz m)) of a Hermitian 2x2 matrix."""
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    require_hermitian(m)
    return BlochVector(
        x=float((m[0, 1] + m[1, 0]).real),
        y=float((1j * (m[0, 1] - m[1, 0])).real),
        z=float((m[0, 0] - m[1, 1]).real),
    )


def bloch_compose(v, trace: float = 1.0) -> np.ndarray:
    """Inverse of `bloch_decompose`: (trace*I + x*sx + y*sy + z*sz) / 2."""
    x, y, z = v
    return 0.5 * np.array(
        [[trace + z, x - 1j * y], [x + 1j * y, trace - z]], dtype=complex
    )


def lyapunov_v(err: np.ndarray) -> float:
    """Squared Frobenius size tr(err^2) of a Hermitian error matrix."""
    require_hermitian(err, "error matrix")
    return float(np.einsum("ij,ji->", err, err).real)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(m))[0])


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Matrix square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues below SQRT_EIG_CLAMP are clamped to zero, which guards the
    round-off negatives produced by nearly singular inputs.
    """
    require_hermitian(m)
    vals, vecs = np.linalg.eigh(m)
    vals = np.where(vals < tol.SQRT_EIG_CLAMP, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def project_psd(m: np.ndarray) -> np.ndarray:
    """Closest-in-spirit PSD state: clamp negative eigenvalues, renormalize trace to 1."""
    require_hermitian(m)
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0.0:
        raise ValueError("matrix has no positive spectral weight, cannot project")
    vals /= total
    return (vecs * vals) @ vecs.conj().T


def fidelity(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Uhlmann fidelity tr sqrt(sqrt(a) b sqrt(a)) between two states.

    Both inputs must be Hermitian with unit trace; each is projected to the
    PSD cone (negative eigenvalues clamped, trace renormalized) before the
    square roots, since observer estimates may dip slightly negative.
    """
    if estimate.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {estimate.shape} vs {truth.shape}")
    require_density(estimate, "estimate")
    require_density(truth, "truth")
    a = project_psd(estimate)
    b = project_psd(truth)
    sqrt_a = sqrtm_psd(a)
    inner = hermitize(sqrt_a @ b @ sqrt_a)
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(min(np.sqrt(vals).sum(), 1.0))


def traceless_hermitian_basis(dim: int) -> list[np.ndarray]:
    """Orthonormal basis of traceless Hermitian dim x dim matrices.

    Generalized Gell-Mann matrices scaled so tr(E_i E_j) = delta_ij;
    there are dim^2 - 1 of them.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            basis.append(sym)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k] = -1j / np.sqrt(2.0)
            anti[k, j] = 1j / np.sqrt(2.0)
            basis.append(anti)
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1.0
        diag[l] = -float(l)
        diag /= np.sqrt(l * (l + 1))
        basis.append(np.diag(diag).astype(complex))
    return basis


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random pure state |psi><psi| (tr(rho^2) = tr(rho) = 1)."""
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())
