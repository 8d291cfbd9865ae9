"""CSV/JSON writers and the matching readers.

Every file starts with a metadata block.  In CSV files it is a single comment
line ``# meta: {json}``; JSON files carry it under ``"metadata"``.  Floats are
written with 17 significant digits so that reading a file back reproduces the
original values bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import IO

import numpy as np

from .phases import PhaseDiagram, PhaseLabel
from .spectra import HysteresisTrace, SpectrumBranch

SPECTRUM_COLUMNS = ("x", "branch_id", "n", "T", "p_excited", "stability")
DIAGRAM_COLUMNS = ("gamma_over_2kappa", "n_eta", "phase", "max_population")
POPULATION_COLUMNS = ("gamma_over_2kappa", "n_eta", "max_population")
HYSTERESIS_COLUMNS = ("x", "direction", "n", "branch_id")
TRAJECTORY_COLUMNS = ("t", "n", "re_alpha", "im_alpha", "re_sigma_minus", "im_sigma_minus", "sigma_z")
META_PREFIX = "# meta: "


def fmt(x) -> str:
    return format(float(x), ".17g")


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and complex numbers for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, PhaseLabel):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, allow_nan=True)


def _open_text(target, mode):
    if isinstance(target, (str, Path)):
        return open(target, mode, newline="", encoding="utf-8"), True
    return target, False


def _write_csv(target, metadata: dict, columns, rows) -> None:
    fh, close = _open_text(target, "w")
    try:
        fh.write(META_PREFIX + dumps(metadata) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    finally:
        if close:
            fh.close()


def read_csv(source) -> tuple[dict, list[str], list[list[str]]]:
    """Generic reader: (metadata, header, rows as strings)."""
    fh, close = _open_text(source, "r")
    try:
        text = fh.read()
    finally:
        if close:
            fh.close()
    lines = text.splitlines(keepends=True)
    meta = {}
    body_start = 0
    if lines and lines[0].startswith(META_PREFIX):
        meta = json.loads(lines[0][len(META_PREFIX) :])
        body_start = 1
    reader = csv.reader(io.StringIO("".join(lines[body_start:])))
    header = next(reader)
    return meta, header, [row for row in reader]


def write_json(target, metadata: dict, data: dict) -> None:
    fh, close = _open_text(target, "w")
    try:
        fh.write(json.dumps(to_jsonable({"metadata": metadata, "data": data}), sort_keys=True, indent=1))
        fh.write("\n")
    finally:
        if close:
            fh.close()


def read_json(source) -> tuple[dict, dict]:
    fh, close = _open_text(source, "r")
    try:
        doc = json.load(fh)
    finally:
        if close:
            fh.close()
    return doc["metadata"], doc["data"]


# ---------------------------------------------------------------------------
# spectra


def write_spectrum_csv(target, branches: list[SpectrumBranch], metadata: dict) -> None:
    meta = dict(metadata)
    meta["axis"] = branches[0].axis if branches else meta.get("axis")
    rows = []
    for b in branches:
        for k in range(len(b)):
            rows.append([fmt(b.x[k]), b.branch_id, fmt(b.n[k]), fmt(b.T[k]), fmt(b.p_excited[k]), str(b.stability[k])])
    _write_csv(target, meta, SPECTRUM_COLUMNS, rows)


def _branches_from_records(axis, records) -> list[SpectrumBranch]:
    groups: dict[int, list] = {}
    for rec in records:
        groups.setdefault(int(rec[1]), []).append(rec)
    out = []
    for bid, recs in groups.items():
        cols = list(zip(*recs))
        out.append(
            SpectrumBranch(
                axis,
                bid,
                np.array(cols[0], dtype=float),
                np.array(cols[2], dtype=float),
                np.array(cols[3], dtype=float),
                np.array(cols[4], dtype=float),
                np.array(cols[5], dtype=str),
            )
        )
    return out


def read_spectrum_csv(source) -> tuple[dict, list[SpectrumBranch]]:
    meta, header, rows = read_csv(source)
    if tuple(header) != SPECTRUM_COLUMNS:
        raise ValueError(f"unexpected spectrum header {header}")
    records = [(float(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), r[5]) for r in rows]
    return meta, _branches_from_records(meta.get("axis"), records)


def spectrum_json(branches: list[SpectrumBranch]) -> dict:
    return {
        "branches": [
            {
                "axis": b.axis,
                "branch_id": b.branch_id,
                "x": b.x,
                "n": b.n,
                "T": b.T,
                "p_excited": b.p_excited,
                "stability": b.stability.tolist(),
            }
            for b in branches
        ]
    }


def branches_from_json(data: dict) -> list[SpectrumBranch]:
    return [
        SpectrumBranch(
            b["axis"],
            int(b["branch_id"]),
            np.array(b["x"], dtype=float),
            np.array(b["n"], dtype=float),
            np.array(b["T"], dtype=float),
            np.array(b["p_excited"], dtype=float),
            np.array(b["stability"], dtype=str),
        )
        for b in data["branches"]
    ]


# ---------------------------------------------------------------------------
# hysteresis


def write_hysteresis_csv(target, traces: list[HysteresisTrace], metadata: dict) -> None:
    meta = dict(metadata)
    meta["jump_points"] = {t.direction: t.jump_points for t in traces}
    rows = []
    for t in traces:
        for k in range(len(t.x)):
            rows.append([fmt(t.x[k]), t.direction, fmt(t.n[k]), int(t.branch_ids[k])])
    _write_csv(target, meta, HYSTERESIS_COLUMNS, rows)


def read_hysteresis_csv(source) -> tuple[dict, list[HysteresisTrace]]:
    meta, header, rows = read_csv(source)
    if tuple(header) != HYSTERESIS_COLUMNS:
        raise ValueError(f"unexpected hysteresis header {header}")
    traces = []
    for direction in ("up", "down"):
        sel = [r for r in rows if r[1] == direction]
        if not sel:
            continue
        traces.append(
            HysteresisTrace(
                direction,
                np.array([float(r[0]) for r in sel]),
                np.array([float(r[2]) for r in sel]),
                np.array([int(r[3]) for r in sel]),
                [float(v) for v in meta.get("jump_points", {}).get(direction, [])],
            )
        )
    return meta, traces


# ---------------------------------------------------------------------------
# phase diagrams


def diagram_metadata(diagram: PhaseDiagram) -> dict:
    return {
        "g": diagram.g,
        "n_atoms": diagram.n_atoms,
        "grid_shape": list(diagram.shape),
        "max_roots": diagram.max_roots.ravel().tolist(),
        "ambiguous": [int(v) for v in diagram.ambiguous.ravel()],
    }


def write_diagram_csv(target, diagram: PhaseDiagram, metadata: dict, population_only: bool = False) -> None:
    meta = {**metadata, "diagram": diagram_metadata(diagram)}
    rows = []
    for i, h in enumerate(diagram.gamma_over_2kappa):
        for j, ne in enumerate(diagram.n_eta):
            if population_only:
                rows.append([fmt(h), fmt(ne), fmt(diagram.max_population[i, j])])
            else:
                rows.append([fmt(h), fmt(ne), diagram.labels[i, j].value, fmt(diagram.max_population[i, j])])
    _write_csv(target, meta, POPULATION_COLUMNS if population_only else DIAGRAM_COLUMNS, rows)


def read_diagram_csv(source) -> tuple[dict, PhaseDiagram]:
    meta, header, rows = read_csv(source)
    population_only = tuple(header) == POPULATION_COLUMNS
    if not population_only and tuple(header) != DIAGRAM_COLUMNS:
        raise ValueError(f"unexpected diagram header {header}")
    info = meta["diagram"]
    ng, npump = info["grid_shape"]
    gam = np.array([float(rows[i * npump][0]) for i in range(ng)])
    pump = np.array([float(rows[j][1]) for j in range(npump)])
    pop = np.array([float(r[-1]) for r in rows]).reshape(ng, npump)
    labels = np.empty((ng, npump), dtype=object)
    if not population_only:
        labels[...] = np.array([PhaseLabel(r[2]) for r in rows], dtype=object).reshape(ng, npump)
    roots = np.array(info["max_roots"], dtype=int).reshape(ng, npump)
    amb = np.array(info["ambiguous"], dtype=bool).reshape(ng, npump)
    return meta, PhaseDiagram(gam, pump, labels, roots, pop, amb, float(info["g"]), int(info["n_atoms"]))


def diagram_json(diagram: PhaseDiagram, population_only: bool = False) -> dict:
    out = {
        "gamma_over_2kappa": diagram.gamma_over_2kappa,
        "n_eta": diagram.n_eta,
        "max_population": diagram.max_population,
        "max_roots": diagram.max_roots,
        "ambiguous": diagram.ambiguous,
        "g": diagram.g,
        "n_atoms": diagram.n_atoms,
    }
    if not population_only:
        out["phase"] = [[lab.value for lab in row] for row in diagram.labels]
    return out


def diagram_from_json(data: dict) -> PhaseDiagram:
    pop = np.array(data["max_population"], dtype=float)
    labels = np.empty(pop.shape, dtype=object)
    if "phase" in data:
        labels[...] = np.array([[PhaseLabel(v) for v in row] for row in data["phase"]], dtype=object)
    return PhaseDiagram(
        np.array(data["gamma_over_2kappa"], dtype=float),
        np.array(data["n_eta"], dtype=float),
        labels,
        np.array(data["max_roots"], dtype=int),
        pop,
        np.array(data["ambiguous"], dtype=bool),
        float(data["g"]),
        int(data["n_atoms"]),
    )


# ---------------------------------------------------------------------------
# trajectories


def write_trajectory_csv(target, t, y, metadata: dict) -> None:
    rows = []
    for k in range(len(t)):
        s = complex(y[k, 0], y[k, 1])
        a = complex(y[k, 3], y[k, 4])
        rows.append([fmt(t[k]), fmt(abs(a) ** 2), fmt(a.real), fmt(a.imag), fmt(s.real), fmt(s.imag), fmt(y[k, 2])])
    _write_csv(target, metadata, TRAJECTORY_COLUMNS, rows)


def read_trajectory_csv(source) -> tuple[dict, np.ndarray, np.ndarray]:
    """Returns (metadata, t, y) with y in the homogeneous 5-vector layout."""
    meta, header, rows = read_csv(source)
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ValueError(f"unexpected trajectory header {header}")
    arr = np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(TRAJECTORY_COLUMNS))
    y = np.stack([arr[:, 4], arr[:, 5], arr[:, 6], arr[:, 2], arr[:, 3]], axis=1)
    return meta, arr[:, 0], y
