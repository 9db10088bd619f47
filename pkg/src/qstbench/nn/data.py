"""Simulated training data: measurement vectors paired with target taus."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from qstbench.errors import DimensionError
from qstbench.measurement import build_projectors, depolarize, ideal_probabilities, sample_record
from qstbench.qstate import check_qubits, haar_random_pure, tau_from_density, to_density
from qstbench.seeds import task_rng

PROVENANCE_GRAMMAR = "ideal | shots:K | depol:P+shots:K"
_PROVENANCE_RE = re.compile(r"^(?:depol:(?P<p>[0-9.eE+-]+?)\+)?shots:(?P<k>[0-9]+)$")


@dataclass(frozen=True)
class Provenance:
    """How measurement inputs were produced from the generating state."""

    shots: int | None = None
    depol: float | None = None

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.depol is not None:
            if not 0.0 <= self.depol <= 1.0:
                raise ValueError("depolarizing weight must lie in [0, 1]")
            if self.shots is None:
                raise ValueError("depolarized provenance requires shots")

    @classmethod
    def parse(cls, text: str) -> "Provenance":
        text = text.strip()
        if text == "ideal":
            return cls()
        match = _PROVENANCE_RE.match(text)
        if not match:
            raise ValueError(f"invalid provenance {text!r}; expected {PROVENANCE_GRAMMAR}")
        shots = int(match["k"])
        depol = float(match["p"]) if match["p"] is not None else None
        return cls(shots=shots, depol=depol)

    def __str__(self):
        if self.shots is None:
            return "ideal"
        if self.depol is None:
            return f"shots:{self.shots}"
        return f"depol:{self.depol!r}+shots:{self.shots}"


@dataclass
class Dataset:
    """Measurement vectors ``(N, 6**d)`` with target taus ``(N, 4**d)``.

    ``rhos`` optionally holds the generating density matrices ``(N, 2**d, 2**d)``.
    """

    d: int
    provenance: Provenance
    measurements: np.ndarray
    taus: np.ndarray
    rhos: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        check_qubits(self.d)
        self.measurements = np.asarray(self.measurements, dtype=float).reshape(-1, 6**self.d)
        self.taus = np.asarray(self.taus, dtype=float).reshape(-1, 4**self.d)
        if len(self.measurements) != len(self.taus):
            raise DimensionError("measurements and taus differ in count")
        if self.rhos is not None:
            n = 2**self.d
            self.rhos = np.asarray(self.rhos, dtype=complex).reshape(-1, n, n)
            if len(self.rhos) != len(self.taus):
                raise DimensionError("rhos and taus differ in count")

    def __len__(self):
        return len(self.taus)

    def __iter__(self):
        return iter(zip(self.measurements, self.taus))


def generate_dataset(count: int, d: int, provenance: Provenance | str = "ideal",
                     master_seed: int = 0) -> Dataset:
    """Simulate ``count`` Haar-random pure states and their tomography.

    Sample ``i`` uses its own generator seeded by
    ``split_seed(master_seed, i)``. Inputs pass through the optional
    depolarizing channel and shot sampling; the target tau always comes from
    the clean pure state.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    d = check_qubits(d)
    if isinstance(provenance, str):
        provenance = Provenance.parse(provenance)
    proj = build_projectors(d)
    measurements = np.empty((count, 6**d))
    taus = np.empty((count, 4**d))
    rhos = np.empty((count, 2**d, 2**d), dtype=complex)
    for i in range(count):
        rng = task_rng(master_seed, i)
        rho = to_density(haar_random_pure(d, rng))
        noisy = rho if provenance.depol is None else depolarize(rho, provenance.depol)
        record = ideal_probabilities(noisy, proj)
        if provenance.shots is not None:
            record = sample_record(record, provenance.shots, rng)
        measurements[i] = record.values
        taus[i] = tau_from_density(rho)
        rhos[i] = rho
    return Dataset(d=d, provenance=provenance, measurements=measurements, taus=taus, rhos=rhos)
