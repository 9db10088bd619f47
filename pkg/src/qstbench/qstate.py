"""Pure states, density matrices and the Cholesky tau parameterisation.

States are plain numpy arrays: a pure state is a complex vector of length
``2**d`` and a density matrix a complex ``2**d x 2**d`` array. A tau vector is
a real vector of length ``4**d`` holding the entries of a lower-triangular
factor ``T`` with ``rho = T^dagger T / Tr(T^dagger T)``.

Tau layout: the ``2**d`` real diagonal entries of ``T`` first, then for every
strictly-lower entry ``T[r, c]`` (``r > c``, row-major) the pair
``(Re T[r, c], Im T[r, c])``.
"""

from __future__ import annotations

import numpy as np

from qstbench.errors import DecompositionError, DegenerateParameterError, DimensionError

DEFAULT_EPSILON = 1e-7


def qubits_for_dim(dim: int) -> int:
    """Return ``d`` such that ``2**d == dim``; raise if there is none."""
    d = int(dim).bit_length() - 1
    if dim < 2 or 2**d != dim:
        raise DimensionError(f"dimension {dim} is not 2**d for any d >= 1")
    return d


def check_qubits(d: int) -> int:
    if int(d) != d or d < 1:
        raise DimensionError(f"qubit count must be an integer >= 1, got {d!r}")
    return int(d)


def _as_square(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    qubits_for_dim(rho.shape[0])
    return rho


def haar_random_pure(d: int, rng=None) -> np.ndarray:
    """Sample a Haar-random pure state on ``d`` qubits.

    Args:
        d: number of qubits.
        rng: ``numpy.random.Generator`` or seed.

    Returns:
        Unit-norm complex vector of length ``2**d``.
    """
    d = check_qubits(d)
    rng = np.random.default_rng(rng)
    n = 2**d
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return psi / np.linalg.norm(psi)


def to_density(psi) -> np.ndarray:
    """Outer product ``|psi><psi|``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise DimensionError(f"pure state must be a vector, got shape {psi.shape}")
    qubits_for_dim(psi.size)
    return np.outer(psi, psi.conj())


def _lower_indices(n: int):
    # strictly-lower entries in row-major order
    rows, cols = np.tril_indices(n, k=-1)
    return rows, cols


def tau_from_density(rho, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Canonical tau vector of ``rho`` after blending in ``epsilon`` of ``I/2**d``.

    The blend makes rank-deficient (e.g. pure) states strictly positive
    definite so the factorisation exists and is unique.

    Raises:
        DecompositionError: the blended matrix is not numerically positive
            definite.
    """
    rho = _as_square(rho)
    if not 0.0 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [0, 1e-3], got {epsilon}")
    n = rho.shape[0]
    blended = (1.0 - epsilon) * rho + epsilon * np.eye(n) / n
    blended = 0.5 * (blended + blended.conj().T)

    # rho = T^dagger T with T lower triangular: factor the index-reversed
    # matrix as L L^dagger and reverse back, T = J L^dagger J.
    try:
        chol = np.linalg.cholesky(blended[::-1, ::-1])
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"matrix is not positive definite (epsilon={epsilon})") from exc
    factor = chol.conj().T[::-1, ::-1]
    return _flatten_factor(factor)


def _flatten_factor(factor: np.ndarray) -> np.ndarray:
    n = factor.shape[0]
    rows, cols = _lower_indices(n)
    lower = factor[rows, cols]
    tau = np.empty(n * n)
    tau[:n] = np.diagonal(factor).real
    tau[n::2] = lower.real
    tau[n + 1 :: 2] = lower.imag
    return tau


def factor_from_tau(tau) -> np.ndarray:
    """Rebuild the lower-triangular factor ``T`` from a tau vector."""
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1:
        raise DimensionError(f"tau must be a vector, got shape {tau.shape}")
    n = int(round(np.sqrt(tau.size)))
    if n * n != tau.size:
        raise DimensionError(f"tau length {tau.size} is not 4**d")
    qubits_for_dim(n)
    rows, cols = _lower_indices(n)
    factor = np.zeros((n, n), dtype=complex)
    factor[np.arange(n), np.arange(n)] = tau[:n]
    factor[rows, cols] = tau[n::2] + 1j * tau[n + 1 :: 2]
    return factor


def density_from_tau(tau) -> np.ndarray:
    """Map any nonzero tau vector to a valid density matrix.

    Raises:
        DegenerateParameterError: ``tau`` is all zeros.
    """
    tau = np.asarray(tau, dtype=float)
    scale = np.max(np.abs(tau)) if tau.size else 0.0
    if not scale > 0.0:
        raise DegenerateParameterError("tau vector is all zeros")
    # result is scale invariant; rescaling avoids underflow in the trace
    factor = factor_from_tau(tau / scale)
    gram = factor.conj().T @ factor
    rho = gram / np.trace(gram).real
    return 0.5 * (rho + rho.conj().T)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    # eigenvalues at round-off level are zeros; their square roots would not be
    cutoff = matrix.shape[0] * np.finfo(float).eps * max(np.abs(vals).max(), 1e-300)
    vals = np.where(vals > cutoff, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Evaluated as the squared nuclear norm of ``sqrt(rho) sqrt(sigma)``, which
    equals the trace above and keeps rank-deficient inputs accurate.
    """
    rho = _as_square(rho)
    sigma = _as_square(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    singular = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    value = float(np.sum(singular) ** 2)
    return min(max(value, 0.0), 1.0)


def purity(rho) -> float:
    rho = _as_square(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def check_density(rho, atol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = _as_square(rho)
    if not np.allclose(rho, rho.conj().T, rtol=0.0, atol=atol):
        raise ValueError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError(f"trace is {np.trace(rho).real}, not 1")
    min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if min_eig < -atol:
        raise ValueError(f"minimum eigenvalue {min_eig} is negative")
