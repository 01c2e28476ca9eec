"""File formats: event CSV with JSON sidecar, and plot-ready CSV curves.

Event CSV schema (header required, one row per pair):

    pair_id,t_f,t_s,first_emitter,detected_f,detected_s,t_f_obs,t_s_obs

Times are written with 17 significant digits so float64 values round-trip
exactly; first_emitter is "A"/"B" and the detected flags are 0/1.  The
sidecar JSON records the parameters, detector model and seed that
produced the events.  Externally produced CSVs in the same schema can be
imported for analysis.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import SchemaError
from .histogram import Histogram
from .kinetics import RateParameters
from .simulate import DetectorModel, EventSet

EVENT_COLUMNS = (
    "pair_id",
    "t_f",
    "t_s",
    "first_emitter",
    "detected_f",
    "detected_s",
    "t_f_obs",
    "t_s_obs",
)

FLOAT_FORMAT = "%.17g"
META_FORMAT = "pairdecay-events-v1"


def format_float(x: float) -> str:
    return FLOAT_FORMAT % x


def write_events_csv(ev: EventSet, path) -> None:
    frame = pd.DataFrame(
        {
            "pair_id": ev.pair_id,
            "t_f": ev.t_f,
            "t_s": ev.t_s,
            "first_emitter": np.where(ev.first_emitter == 0, "A", "B"),
            "detected_f": ev.detected_f.astype(np.int8),
            "detected_s": ev.detected_s.astype(np.int8),
            "t_f_obs": ev.t_f_obs,
            "t_s_obs": ev.t_s_obs,
        }
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_meta_json(ev: EventSet, path) -> None:
    meta = {
        "format": META_FORMAT,
        "params": {
            "gamma_f": ev.params.gamma_f,
            "gamma_s": ev.params.gamma_s,
            "n0": ev.params.n0,
            "gamma_0": ev.params.gamma_0,
        },
        "detector": {
            "efficiency": ev.detector.efficiency,
            "jitter_sigma": ev.detector.jitter_sigma,
            "formation_profile": ev.detector.formation_profile,
            "formation_width": ev.detector.formation_width,
        },
        "seed": ev.seed,
        "n_pairs": len(ev),
        "rng": "splitmix64-per-pair",
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_meta_json(path) -> tuple[RateParameters, DetectorModel, int]:
    try:
        meta = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise SchemaError(f"cannot read metadata {path}: {err}") from err
    try:
        params = RateParameters(**meta["params"])
        detector = DetectorModel(**meta["detector"])
        seed = int(meta["seed"])
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaError(f"malformed metadata {path}: {err}") from err
    return params, detector, seed


def read_events_csv(
    path,
    params: RateParameters | None = None,
    detector: DetectorModel | None = None,
    seed: int = 0,
) -> EventSet:
    """Import an event CSV, validating the schema.

    params/detector default to placeholders (unit rates, ideal detector)
    when no sidecar metadata is available; estimation only needs the
    columns.  Schema violations report the offending CSV line number
    (header is line 1).
    """
    if not Path(path).exists():
        raise OSError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as err:
        raise SchemaError(f"cannot parse {path}: {err}") from err

    missing = [c for c in EVENT_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: line 1: missing columns {missing}")
    if len(frame) == 0:
        raise SchemaError(f"{path}: no event rows")

    def fail_at(mask: np.ndarray, message: str):
        row = int(np.flatnonzero(mask)[0])
        raise SchemaError(f"{path}: line {row + 2}: {message}")

    emitter_raw = frame["first_emitter"].astype(str).str.strip()
    bad = ~emitter_raw.isin(["A", "B"]).to_numpy()
    if bad.any():
        fail_at(bad, "first_emitter must be 'A' or 'B'")

    numeric = {}
    for col in ("t_f", "t_s", "t_f_obs", "t_s_obs"):
        values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        nan = ~np.isfinite(values)
        if nan.any():
            fail_at(nan, f"{col} must be a finite number")
        numeric[col] = values
    for col in ("detected_f", "detected_s"):
        values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        bad = ~np.isin(values, (0.0, 1.0))
        if bad.any():
            fail_at(bad, f"{col} must be 0 or 1")
        numeric[col] = values.astype(bool)

    pair_values = pd.to_numeric(frame["pair_id"], errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(pair_values) | (pair_values != np.floor(pair_values))
    if bad.any():
        fail_at(bad, "pair_id must be an integer")

    bad = numeric["t_f"] < 0.0
    if bad.any():
        fail_at(bad, "t_f must be >= 0")
    bad = numeric["t_s"] < numeric["t_f"]
    if bad.any():
        fail_at(bad, "t_s must be >= t_f")

    return EventSet(
        params=params if params is not None else RateParameters(1.0, 1.0),
        detector=detector if detector is not None else DetectorModel(),
        seed=seed,
        pair_id=pair_values.astype(np.int64),
        t_f=numeric["t_f"],
        t_s=numeric["t_s"],
        first_emitter=(emitter_raw == "B").to_numpy().astype(np.uint8),
        detected_f=numeric["detected_f"],
        detected_s=numeric["detected_s"],
        t_f_obs=numeric["t_f_obs"],
        t_s_obs=numeric["t_s_obs"],
    )


def load_event_set(csv_path, meta_path=None) -> EventSet:
    """Read events, taking parameters from the sidecar when present."""
    if meta_path is not None and Path(meta_path).exists():
        params, detector, seed = read_meta_json(meta_path)
        return read_events_csv(csv_path, params=params, detector=detector, seed=seed)
    return read_events_csv(csv_path)


def _write_rows(path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(format_float(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def write_population_curve_csv(curve: np.ndarray, path) -> None:
    """Curve rows t,n_e,n_i,n_i_g,N_f,N_s (see kinetics.population_curve)."""
    _write_rows(path, "t,n_e,n_i,n_i_g,N_f,N_s", np.asarray(curve))


def write_histogram_csv(h: Histogram, path) -> None:
    lines = ["bin_center,count"]
    lines.extend(
        f"{format_float(c)},{int(n)}" for c, n in zip(h.centers, np.asarray(h.counts))
    )
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(points, path) -> None:
    """Sweep rows gamma_f_over_gamma0,tau_over_tau0 (unit-scaled inputs)."""
    _write_rows(path, "gamma_f_over_gamma0,tau_over_tau0", points)


def write_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
