"""Benchmark drivers behind the command-line harness.

Seeds: the test-set state ``i`` uses ``task_rng(seed, 0, i)``; its
``shots``-shot record uses ``task_rng(seed, 1, shots, i)``; the MLE restarts
for that record use ``task_rng(seed, 2, shots, i)`` (``shots = 0`` for ideal
records). Every method therefore sees exactly the same records.

Wall times cover only the reconstruction call. With ``timing=False`` they are
written as 0 so reruns give byte-identical tables.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qstbench.dataio import ResultRow, ResultsTable
from qstbench.measurement import (
    MeasurementRecord,
    build_projectors,
    default_depolarizing,
    depolarize,
    ideal_probabilities,
    sample_record,
    squared_difference,
)
from qstbench.mle import MleConfig, reconstruct_mle
from qstbench.nn.data import Provenance, generate_dataset
from qstbench.nn.model import ModelParams, NetworkConfig, predict_density, train
from qstbench.qstate import fidelity, haar_random_pure, to_density
from qstbench.seeds import task_rng

DEFAULT_SHOTS = (5, 15, 128, 1024, 8192)
DEFAULT_STATES = 20
NOISY_SIMULATOR_SHOTS = 2192


@dataclass(frozen=True)
class BenchState:
    index: int
    rho: np.ndarray
    ideal: MeasurementRecord


def make_test_set(d: int, count: int, seed: int, depol: float | None = None) -> list[BenchState]:
    """Haar pure states with ideal records, optionally of the depolarized state."""
    proj = build_projectors(d)
    states = []
    for i in range(count):
        rho = to_density(haar_random_pure(d, task_rng(seed, 0, i)))
        measured = rho if depol is None else depolarize(rho, depol)
        states.append(BenchState(i, rho, ideal_probabilities(measured, proj)))
    return states


def record_for(state: BenchState, shots: int | None, seed: int) -> MeasurementRecord:
    if shots is None:
        return state.ideal
    return sample_record(state.ideal, shots, task_rng(seed, 1, shots, state.index))


def parse_method(name: str) -> Provenance | None:
    """Training provenance for an ``nn-*`` method name; ``None`` for ``mle``."""
    if name == "mle":
        return None
    if name == "nn-ideal":
        return Provenance()
    if name.startswith("nn-"):
        return Provenance.parse(name[3:])
    raise ValueError(f"unknown method {name!r}; expected mle, nn-ideal or nn-shots:K")


Reconstructor = Callable[[MeasurementRecord, BenchState, int | None], np.ndarray]


def nn_reconstructor(model: ModelParams) -> Reconstructor:
    def run(record, state, shots):
        return predict_density(model, record)
    return run


def mle_reconstructor(d: int, seed: int, config: MleConfig | None = None) -> Reconstructor:
    proj = build_projectors(d)
    config = config or MleConfig()

    def run(record, state, shots):
        rng = task_rng(seed, 2, shots or 0, state.index)
        return reconstruct_mle(record, proj, config, rng).rho
    return run


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def run_shots_benchmark(
    d: int,
    methods: dict[str, Reconstructor],
    shots_list: Sequence[int | None] = DEFAULT_SHOTS,
    states: int = DEFAULT_STATES,
    seed: int = 0,
    timing: bool = True,
    experiment_id: str = "bench-shots",
):
    """Fidelity of every method on shared sampled records.

    Returns ``(table, noise_rows)`` where ``noise_rows`` holds
    ``(d, shots, state_index, seed, squared_difference)`` between each
    sampled record and its ideal record.
    """
    test_set = make_test_set(d, states, seed)
    table = ResultsTable(experiment_id)
    noise_rows = []
    for shots in shots_list:
        for state in test_set:
            record = record_for(state, shots, seed)
            noise_rows.append((d, shots, state.index, seed, squared_difference(record, state.ideal)))
            for name, reconstruct in methods.items():
                rho, elapsed = _timed(reconstruct, record, state, shots)
                table.add(ResultRow(
                    method=name, d=d, shots=shots, noise_p=0.0, state_index=state.index,
                    fidelity=fidelity(state.rho, rho),
                    wall_time_s=elapsed if timing else 0.0, seed=seed,
                ))
    return table, noise_rows


def run_scaling_benchmark(
    models: dict[int, ModelParams],
    scenarios: Sequence[str] = ("ideal", "depol"),
    states: int = DEFAULT_STATES,
    seed: int = 0,
    noisy_shots: int = NOISY_SIMULATOR_SHOTS,
    depol: float | None = None,
    timing: bool = True,
    experiment_id: str = "bench-scaling",
) -> ResultsTable:
    """NN fidelity per qubit count for the ideal and depolarized+shots scenarios."""
    table = ResultsTable(experiment_id)
    for d in sorted(models):
        model = models[d]
        for scenario in scenarios:
            if scenario == "ideal":
                p, shots = 0.0, None
                test_set = make_test_set(d, states, seed)
            elif scenario == "depol":
                p = default_depolarizing(d) if depol is None else depol
                shots = noisy_shots
                test_set = make_test_set(d, states, seed, depol=p)
            else:
                raise ValueError(f"unknown scenario {scenario!r}; expected ideal or depol")
            for state in test_set:
                record = record_for(state, shots, seed)
                rho, elapsed = _timed(predict_density, model, record)
                table.add(ResultRow(
                    method="nn", d=d, shots=shots, noise_p=p, state_index=state.index,
                    fidelity=fidelity(state.rho, rho),
                    wall_time_s=elapsed if timing else 0.0, seed=seed,
                ))
    return table


def noise_curve(d: int, shots_list: Sequence[int], states: int, seeds: int, seed: int = 0):
    """Squared difference between sampled and ideal records, per shots level.

    Returns ``(rows, means, slope)`` with rows ``(shots, state, repeat, value)``,
    the per-shots means and the least-squares log-log slope of the means.
    """
    test_set = make_test_set(d, states, seed)
    rows = []
    for shots in shots_list:
        for state in test_set:
            for rep in range(seeds):
                record = sample_record(state.ideal, shots, task_rng(seed, 3, shots, state.index, rep))
                rows.append((shots, state.index, rep, squared_difference(record, state.ideal)))
    means = {s: float(np.mean([r[3] for r in rows if r[0] == s])) for s in shots_list}
    xs = np.log([float(s) for s in shots_list])
    ys = np.log([means[s] for s in shots_list])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return rows, means, slope


def train_inline(
    d: int,
    provenance: Provenance | str,
    train_count: int,
    val_count: int,
    seed: int,
    epochs: int | None = None,
    on_epoch=None,
    **overrides,
) -> ModelParams:
    """Generate data and train a default-config model in one go.

    Training data uses master seed ``seed``, validation (always ideal)
    ``seed + 1``, and the network seed ``seed + 2``.
    """
    train_set = generate_dataset(train_count, d, provenance, seed)
    val_set = generate_dataset(val_count, d, "ideal", seed + 1)
    cfg_overrides = {"seed": seed + 2, **overrides}
    if epochs is not None:
        cfg_overrides["epochs"] = epochs
    config = NetworkConfig.default(d, **cfg_overrides)
    return train(train_set, val_set, config, on_epoch=on_epoch)


def summarize(table: ResultsTable) -> list[dict]:
    """Mean and standard deviation of fidelity and wall time per condition."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in table.sorted_rows():
        groups.setdefault((row.method, row.d, row.shots, row.noise_p), []).append(row)
    out = []
    for (method, d, shots, p), rows in groups.items():
        fids = np.array([r.fidelity for r in rows])
        times = np.array([r.wall_time_s for r in rows])
        out.append({
            "method": method, "d": d, "shots": "ideal" if shots is None else shots, "noise_p": p,
            "n": len(rows), "mean_fidelity": float(fids.mean()), "std_fidelity": float(fids.std()),
            "mean_wall_time_s": float(times.mean()),
        })
    return out
