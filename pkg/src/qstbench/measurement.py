"""Overcomplete projective tomography: projectors, Born rule, shot noise.

Every qubit is measured in the Z, X and Y bases, giving the six single-qubit
eigenstates H, V, D, A, R, L. For ``d`` qubits that is ``3**d`` settings of
``2**d`` outcomes, ``6**d`` projectors in total. Projector ``i`` belongs to
setting ``i // 2**d`` and outcome ``i % 2**d``; settings and outcomes are
base-3 and base-2 words with qubit 0 the most significant digit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from qstbench.errors import DimensionError
from qstbench.qstate import _as_square, check_qubits

_S = 1.0 / np.sqrt(2.0)

#: Single-qubit kets in canonical order H, V, D, A, R, L.
SINGLE_QUBIT_KETS = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [_S, _S],
        [_S, -_S],
        [_S, 1j * _S],
        [_S, -1j * _S],
    ],
    dtype=complex,
)
SINGLE_QUBIT_LABELS = "HVDARL"


@dataclass(frozen=True)
class ProjectorSet:
    """The ``6**d`` rank-1 tomography projectors for ``d`` qubits.

    Attributes:
        d: number of qubits.
        projectors: complex array of shape ``(6**d, 2**d, 2**d)``.
        settings: integer array of shape ``(3**d, 2**d)``; row ``s`` lists the
            projector indices of setting ``s``.
        labels: one string per projector, e.g. ``"HD"`` for H on qubit 0 and
            D on qubit 1.
    """

    d: int
    projectors: np.ndarray = field(repr=False)
    settings: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)

    def __len__(self):
        return self.projectors.shape[0]

    @property
    def dim(self) -> int:
        return 2**self.d


def build_projectors(d: int) -> ProjectorSet:
    d = check_qubits(d)
    n_out = 2**d
    kets = []
    labels = []
    for bases in itertools.product(range(3), repeat=d):
        for outcome in itertools.product(range(2), repeat=d):
            idx = [2 * b + o for b, o in zip(bases, outcome)]
            ket = np.ones(1, dtype=complex)
            for i in idx:
                ket = np.kron(ket, SINGLE_QUBIT_KETS[i])
            kets.append(ket)
            labels.append("".join(SINGLE_QUBIT_LABELS[i] for i in idx))
    kets = np.array(kets)
    projectors = np.einsum("ka,kb->kab", kets, kets.conj())
    settings = np.arange(6**d).reshape(3**d, n_out)
    return ProjectorSet(d=d, projectors=projectors, settings=settings, labels=tuple(labels))


@dataclass(frozen=True)
class MeasurementRecord:
    """Tomography values of one state in canonical projector order.

    ``shots`` is ``None`` for ideal (Born-rule) probabilities, otherwise the
    number of shots per setting; ``values`` are then frequencies ``counts/shots``.
    """

    d: int
    values: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        check_qubits(self.d)
        values = np.array(self.values, dtype=float)
        if values.shape != (6**self.d,):
            raise DimensionError(
                f"record for d={self.d} needs {6**self.d} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("record values must be finite")
        if values.min() < -1e-9 or values.max() > 1 + 1e-9:
            raise ValueError("record values must lie in [0, 1]")
        if self.shots is not None and (int(self.shots) != self.shots or self.shots < 1):
            raise ValueError(f"shots must be a positive integer or None, got {self.shots!r}")
        values = np.clip(values, 0.0, 1.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_ideal(self) -> bool:
        return self.shots is None

    def setting_sums(self) -> np.ndarray:
        return self.values.reshape(3**self.d, 2**self.d).sum(axis=1)


def born_probabilities(rho, proj: ProjectorSet) -> np.ndarray:
    """``Re Tr(rho P_i)`` for every projector, without building a record."""
    rho = _as_square(rho)
    if rho.shape[0] != proj.dim:
        raise DimensionError(f"state dimension {rho.shape[0]} does not match d={proj.d}")
    return np.einsum("ab,kba->k", rho, proj.projectors).real


def ideal_probabilities(rho, proj: ProjectorSet) -> MeasurementRecord:
    return MeasurementRecord(d=proj.d, values=born_probabilities(rho, proj), shots=None)


def sample_record(ideal: MeasurementRecord, shots: int, rng=None) -> MeasurementRecord:
    """Draw ``shots`` multinomial samples per setting from an ideal record.

    Each of the ``3**d`` settings is sampled independently, as if its circuit
    were executed ``shots`` times.
    """
    if not ideal.is_ideal:
        raise ValueError("sample_record expects an ideal record")
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots!r}")
    shots = int(shots)
    rng = np.random.default_rng(rng)
    probs = ideal.values.reshape(3**ideal.d, 2**ideal.d)
    probs = probs / probs.sum(axis=1, keepdims=True)
    counts = rng.multinomial(shots, probs)
    return MeasurementRecord(d=ideal.d, values=(counts / shots).ravel(), shots=shots)


def depolarize(rho, p: float) -> np.ndarray:
    """Depolarizing channel ``(1 - p) rho + p I / 2**d``."""
    rho = _as_square(rho)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing weight must lie in [0, 1], got {p}")
    n = rho.shape[0]
    return (1.0 - p) * rho + p * np.eye(n) / n


def default_depolarizing(d: int) -> float:
    """Stand-in noise level for the noisy-simulator scenario."""
    return 0.05 if d <= 2 else 0.1


def squared_difference(a: MeasurementRecord, b: MeasurementRecord) -> float:
    """Sum of squared entrywise differences over all ``6**d`` values."""
    if a.d != b.d:
        raise DimensionError(f"records have different qubit counts: {a.d} vs {b.d}")
    return float(np.sum((a.values - b.values) ** 2))


def uniform_record(d: int) -> MeasurementRecord:
    """Ideal record of the maximally mixed state."""
    d = check_qubits(d)
    return MeasurementRecord(d=d, values=np.full(6**d, 2.0**-d), shots=None)


__all__ = [
    "MeasurementRecord",
    "ProjectorSet",
    "SINGLE_QUBIT_KETS",
    "SINGLE_QUBIT_LABELS",
    "born_probabilities",
    "build_projectors",
    "default_depolarizing",
    "depolarize",
    "ideal_probabilities",
    "sample_record",
    "squared_difference",
    "uniform_record",
]
