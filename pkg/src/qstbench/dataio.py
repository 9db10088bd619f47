"""Versioned file formats: datasets, records, checkpoints and results tables.

* Datasets are JSON lines. The first line is a header
  ``{"version": 1, "d": 2, "provenance": "shots:15", "count": N}``; each
  following line is one sample ``{"m": [...], "tau": [...]}`` with an optional
  ``"rho": {"re": [[...]], "im": [[...]]}``. Floats are written with 17
  significant digits so doubles survive the round trip.
* Checkpoints are a JSON object whose tensors are base64-encoded
  little-endian float64 buffers with explicit shapes.
* Results tables are CSV with header
  ``method,d,shots,noise_p,state_index,fidelity,wall_time_s,seed``.

All writers go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import base64
import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from qstbench.errors import CorruptCheckpointError, DimensionError, ParseError, UnsupportedFormatError
from qstbench.measurement import MeasurementRecord
from qstbench.nn.data import Dataset, Provenance
from qstbench.nn.model import ModelParams, NetworkConfig

DATASET_VERSION = 1
CHECKPOINT_VERSION = 1
RECORD_VERSION = 1
RESULTS_HEADER = ("method", "d", "shots", "noise_p", "state_index", "fidelity", "wall_time_s", "seed")


def _atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        directory = path.parent if str(path.parent) else Path(".")
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x}")
    return format(x, ".17g")


def _vec(values) -> str:
    return "[" + ",".join(_fmt(v) for v in np.ravel(values)) + "]"


def _mat(values) -> str:
    return "[" + ",".join(_vec(row) for row in np.asarray(values)) + "]"


# -- datasets ---------------------------------------------------------------

def save_dataset(dataset: Dataset, path, include_rho: bool = True) -> None:
    header = {
        "version": DATASET_VERSION,
        "d": dataset.d,
        "provenance": str(dataset.provenance),
        "count": len(dataset),
    }
    lines = [json.dumps(header)]
    rhos = dataset.rhos if include_rho else None
    for i, (m, tau) in enumerate(dataset):
        line = '{"m":' + _vec(m) + ',"tau":' + _vec(tau)
        if rhos is not None:
            line += ',"rho":{"re":' + _mat(rhos[i].real) + ',"im":' + _mat(rhos[i].imag) + "}"
        lines.append(line + "}")
    _atomic_write(path, "\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    """Read a dataset file.

    Raises:
        UnsupportedFormatError: unknown version.
        ParseError: malformed content; the message names the line number.
    """
    lines = _read_text(path).splitlines()
    if not lines:
        raise ParseError(f"{path}: line 1: missing header")
    try:
        header = json.loads(lines[0])
        version = header["version"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: line 1: malformed header ({exc})") from exc
    if version != DATASET_VERSION:
        raise UnsupportedFormatError(f"{path}: dataset version {version!r} is not supported")
    try:
        d = int(header["d"])
        count = int(header["count"])
        provenance = Provenance.parse(header["provenance"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: line 1: bad header field ({exc})") from exc
    if d < 1:
        raise ParseError(f"{path}: line 1: d must be >= 1")

    n = 2**d
    body = [(no, text) for no, text in enumerate(lines[1:], start=2) if text.strip()]
    if len(body) != count:
        raise ParseError(f"{path}: header count {count} but {len(body)} samples present")
    measurements = np.empty((count, 6**d))
    taus = np.empty((count, 4**d))
    rhos = np.empty((count, n, n), dtype=complex)
    have_rho = True
    for i, (no, text) in enumerate(body):
        try:
            sample = json.loads(text)
            m = np.array(sample["m"], dtype=float)
            tau = np.array(sample["tau"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: line {no}: {exc}") from exc
        if m.shape != (6**d,) or tau.shape != (4**d,):
            raise ParseError(
                f"{path}: line {no}: vector lengths {m.shape}/{tau.shape} do not match d={d}"
            )
        measurements[i], taus[i] = m, tau
        if "rho" in sample and have_rho:
            try:
                rho = np.array(sample["rho"]["re"], dtype=float) + 1j * np.array(sample["rho"]["im"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {no}: bad rho ({exc})") from exc
            if rho.shape != (n, n):
                raise ParseError(f"{path}: line {no}: rho shape {rho.shape} does not match d={d}")
            rhos[i] = rho
        else:
            have_rho = False
    return Dataset(d=d, provenance=provenance, measurements=measurements, taus=taus,
                   rhos=rhos if have_rho and count else None)


# -- single records and states ---------------------------------------------

def save_record(record: MeasurementRecord, path) -> None:
    payload = ('{"version":%d,"d":%d,"shots":%s,"values":%s}\n'
               % (RECORD_VERSION, record.d,
                  '"ideal"' if record.shots is None else str(record.shots), _vec(record.values)))
    _atomic_write(path, payload)


def load_record(path) -> MeasurementRecord:
    try:
        obj = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("version") != RECORD_VERSION:
        raise UnsupportedFormatError(f"{path}: record version {obj.get('version') if isinstance(obj, dict) else None!r} is not supported")
    try:
        shots = None if obj["shots"] == "ideal" else int(obj["shots"])
        return MeasurementRecord(d=int(obj["d"]), values=np.array(obj["values"], dtype=float), shots=shots)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_density(rho, path) -> None:
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0].bit_length() - 1
    _atomic_write(path, '{"version":%d,"d":%d,"re":%s,"im":%s}\n'
                  % (RECORD_VERSION, d, _mat(rho.real), _mat(rho.imag)))


def load_density(path) -> np.ndarray:
    try:
        obj = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("version") != RECORD_VERSION:
        raise UnsupportedFormatError(f"{path}: unsupported density-matrix file")
    try:
        rho = np.array(obj["re"], dtype=float) + 1j * np.array(obj["im"], dtype=float)
        n = 2 ** int(obj["d"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if rho.shape != (n, n):
        raise ParseError(f"{path}: matrix shape {rho.shape} does not match d={obj['d']}")
    return rho


# -- checkpoints ------------------------------------------------------------

def _encode(array: np.ndarray) -> dict:
    data = np.ascontiguousarray(array, dtype="<f8").tobytes()
    return {"shape": list(array.shape), "data": base64.b64encode(data).decode("ascii")}


def _decode(entry, name: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        raw = base64.b64decode(entry["data"], validate=True)
        array = np.frombuffer(raw, dtype="<f8")
        return array.reshape(shape).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"tensor {name}: {exc}") from exc


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def save_model(model: ModelParams, path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "tensors": {name: _encode(model.params[name]) for name in sorted(model.params)},
        "accumulators": {name: _encode(model.accumulators[name]) for name in sorted(model.accumulators)},
        "history": [{k: _clean(v) for k, v in entry.items()} for entry in model.history],
    }
    _atomic_write(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_model(path) -> ModelParams:
    """Read a checkpoint.

    Raises:
        UnsupportedFormatError: unknown format version.
        CorruptCheckpointError: truncated JSON, missing fields or shapes that
            disagree with the stored config.
    """
    try:
        obj = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CorruptCheckpointError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise CorruptCheckpointError(f"{path}: missing format_version")
    if obj["format_version"] != CHECKPOINT_VERSION:
        raise UnsupportedFormatError(f"{path}: checkpoint version {obj['format_version']!r} is not supported")
    try:
        config = NetworkConfig(**obj["config"])
        params = {name: _decode(entry, name) for name, entry in obj["tensors"].items()}
        accs = {name: _decode(entry, name) for name, entry in obj["accumulators"].items()}
        history = [
            {k: (float("nan") if v is None else v) for k, v in entry.items()}
            for entry in obj.get("history", [])
        ]
        return ModelParams(config=config, params=params, accumulators=accs, history=history)
    except CorruptCheckpointError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from exc


# -- results tables ---------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    method: str
    d: int
    shots: int | None  # None means ideal probabilities
    noise_p: float
    state_index: int
    fidelity: float
    wall_time_s: float
    seed: int

    def key(self):
        shots_key = (0, 0) if self.shots is None else (1, self.shots)
        return (self.method, self.d, shots_key, self.noise_p, self.state_index, self.seed)


@dataclass
class ResultsTable:
    experiment_id: str
    rows: list[ResultRow] = field(default_factory=list)

    def add(self, row: ResultRow) -> None:
        self.rows.append(row)

    def validate(self) -> None:
        seen = set()
        for row in self.rows:
            if not 0.0 <= row.fidelity <= 1.0:
                raise ValueError(f"fidelity {row.fidelity} outside [0, 1] in row {row}")
            key = row.key()
            if key in seen:
                raise ValueError(f"duplicate results row for key {key}")
            seen.add(key)

    def sorted_rows(self) -> list[ResultRow]:
        return sorted(self.rows, key=ResultRow.key)

    def to_csv(self) -> str:
        self.validate()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for r in self.sorted_rows():
            writer.writerow([
                r.method, r.d, "ideal" if r.shots is None else r.shots, repr(float(r.noise_p)),
                r.state_index, repr(float(r.fidelity)), repr(float(r.wall_time_s)), r.seed,
            ])
        return buf.getvalue()


def write_results(table: ResultsTable, path) -> None:
    """Write ``table`` as CSV sorted by key; identical tables give identical bytes."""
    _atomic_write(path, table.to_csv())


def read_results(path, experiment_id: str = "") -> ResultsTable:
    reader = csv.reader(io.StringIO(_read_text(path)))
    header = next(reader, None)
    if tuple(header or ()) != RESULTS_HEADER:
        raise ParseError(f"{path}: unexpected header {header}")
    table = ResultsTable(experiment_id or Path(path).stem)
    for no, row in enumerate(reader, start=2):
        try:
            method, d, shots, noise_p, idx, fid, wall, seed = row
            table.add(ResultRow(method, int(d), None if shots == "ideal" else int(shots),
                                float(noise_p), int(idx), float(fid), float(wall), int(seed)))
        except ValueError as exc:
            raise ParseError(f"{path}: line {no}: {exc}") from exc
    return table


def write_json(obj, path) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def check_model_dimension(model: ModelParams, d: int) -> None:
    if model.config.d != d:
        raise DimensionError(f"checkpoint is for d={model.config.d}, data has d={d}")


def _cell(value) -> str:
    if value is None:
        return "ideal"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(header: Sequence[str], rows, path) -> None:
    """Plain CSV for auxiliary tables; rows are written in the given order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row {row} does not match header {header}")
        writer.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


NOISE_HEADER = ("d", "shots", "state_index", "seed", "squared_difference")
