"""Curve CSV files, model manifests, trajectory stores and stable float output."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, PreconditionError
from .flow import FlowControls, FlowState, Trajectory
from .geometry import (
    CylinderSpec,
    SampledCurve,
    make_cylinder_samples,
    random_rotation,
    shoot_abresch_langer,
)


def fmt(x) -> str:
    """17 significant digits, so re-reading reproduces the float exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_rows(path, rows, columns=None) -> None:
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c, "")) for c in columns])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------------


def write_curve_csv(curve: SampledCurve, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# closed={'true' if curve.closed else 'false'} N={curve.ambient_dim}\n")
        for row in curve.nodes:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_curve_csv(path, check: bool = True) -> SampledCurve:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise PreconditionError(f"{path}: missing '# closed=<bool> N=<int>' header")
        opts = dict(tok.split("=", 1) for tok in header[1:].split())
        closed = opts.get("closed", "true").lower() == "true"
        N = int(opts["N"])
        nodes = np.loadtxt(fh, delimiter=",", ndmin=2)
    if nodes.shape[1] != N:
        raise PreconditionError(f"{path}: header says N={N} but rows have {nodes.shape[1]} columns")
    return SampledCurve(nodes, closed=closed, check=check)


# ----------------------------------------------------------------------------
# manifests
# ----------------------------------------------------------------------------


def load_manifest(source) -> dict:
    if isinstance(source, dict):
        return dict(source)
    path = Path(source)
    data = json.loads(path.read_text())
    data.setdefault("_base", str(path.parent))
    return data


def build_model(manifest):
    """Construct the sampled manifold described by a manifest dict or file."""
    m = load_manifest(manifest)
    kind = m.get("kind")
    if kind == "cylinder":
        missing = [k for k in ("k", "n", "N") if k not in m]
        if missing:
            raise ConfigError(f"cylinder manifest missing fields: {', '.join(missing)}")
        rotation = None
        if "rotation_seed" in m:
            rotation = random_rotation(int(m["N"]), int(m["rotation_seed"]))
        spec = CylinderSpec(int(m["k"]), int(m["n"]), int(m["N"]), rotation)
        res = m.get("resolution", [256, 401])
        return make_cylinder_samples(spec, res if np.isscalar(res) else tuple(res), m.get("axis_halfwidth"))
    if kind == "abresch_langer":
        res = shoot_abresch_langer(int(m["m"]), int(m["l"]), float(m.get("tol", 1e-8)), int(m.get("resolution", 1024)))
        return res.curve
    if kind == "curve":
        if "path" not in m:
            raise ConfigError("curve manifest needs a 'path'")
        path = Path(m["path"])
        if not path.is_absolute():
            path = Path(m.get("_base", ".")) / path
        return read_curve_csv(path)
    raise ConfigError(f"unknown model kind {kind!r} (expected cylinder, abresch_langer or curve)")


# ----------------------------------------------------------------------------
# trajectory store
# ----------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, directory, series=None) -> Path:
    d = Path(directory)
    (d / "states").mkdir(parents=True, exist_ok=True)
    names = traj.field_names()
    field_rows = []
    for j, state in enumerate(traj.states):
        write_curve_csv(state.curve, d / "states" / f"state_{j:05d}.csv")
        for i in range(state.curve.num_nodes):
            row = {"state": j, "node": i}
            row.update({k: state.fields[k][i] for k in names})
            field_rows.append(row)
    write_rows(d / "fields.csv", field_rows, ["state", "node"] + names)
    if series is not None:
        write_rows(d / "series.csv", series.rows())
    meta = {
        "controls": asdict(traj.controls),
        "T": traj.T,
        "p": None if traj.p is None else [float(v) for v in traj.p],
        "dt_min": traj.dt_min if np.isfinite(traj.dt_min) else None,
        "times": [float(t) for t in traj.times],
        "generations": [int(s.generation) for s in traj.states],
        "fields": names,
        "extra": {k: v for k, v in traj.meta.items() if k not in ("T", "p")},
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=float))
    return d


def load_trajectory(directory) -> Trajectory:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    names = meta["fields"]
    per_state: dict[int, dict[str, list]] = {}
    for row in read_rows(d / "fields.csv"):
        j = int(row["state"])
        store = per_state.setdefault(j, {k: [] for k in names})
        for k in names:
            store[k].append(float(row[k]))
    states = []
    for j, t in enumerate(meta["times"]):
        curve = read_curve_csv(d / "states" / f"state_{j:05d}.csv", check=False)
        fields = {k: np.array(v) for k, v in per_state.get(j, {}).items()}
        states.append(FlowState(t, curve, fields, meta["generations"][j]))
    traj = Trajectory(
        states,
        FlowControls(**meta["controls"]),
        T=meta["T"],
        p=None if meta["p"] is None else np.array(meta["p"]),
        dt_min=meta["dt_min"] if meta["dt_min"] is not None else np.inf,
        meta=meta.get("extra", {}),
    )
    return traj
