"""CSV/JSON emission and run manifests.

Floats are written as the shortest decimal that round-trips (``repr``),
with a mandatory header row and LF line endings, so identical runs give
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .energy_monitor import LEDGER_COLUMNS, EnergyLedger
from .flux_models import FluxTrajectory
from .pde_solver import SolutionTrajectory


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    return header, data.reshape(-1, len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def output_steps(nt: int, stride: int) -> list[int]:
    steps = list(range(0, nt + 1, stride))
    if steps[-1] != nt:
        steps.append(nt)
    return steps


def write_trajectory(out: Path, traj: SolutionTrajectory, stride: int, fmt: str) -> Path:
    steps = output_steps(len(traj.t) - 1, stride)
    full = traj.u_full
    if fmt == "json":
        return write_json(out / "trajectory.json", {
            "t": [traj.t[n] for n in steps], "x": traj.x, "u": [full[n] for n in steps]})

    def rows():
        for n in steps:
            t = traj.t[n]
            for x, u in zip(traj.x, full[n]):
                yield (t, x, u)

    return write_csv(out / "trajectory.csv", ("t", "x", "u"), rows())


def write_ledger(out: Path, ledger: EnergyLedger, fmt: str) -> Path:
    if fmt == "json":
        return write_json(out / "ledger.json", {c: ledger.columns[c] for c in LEDGER_COLUMNS})
    return write_csv(out / "ledger.csv", LEDGER_COLUMNS,
                     ([r[c] for c in LEDGER_COLUMNS] for r in ledger.rows()))


def write_flux(path: Path, traj: FluxTrajectory, fmt: str) -> Path:
    path = Path(path)
    if fmt == "json":
        payload = {"t": traj.t, "q": traj.q}
        if traj.qdot is not None:
            payload["qdot"] = traj.qdot
        return write_json(path.with_suffix(".json"), payload)
    cols = [traj.t, traj.q] + ([traj.qdot] if traj.qdot is not None else [])
    header = ("t", "q", "qdot")[: len(cols)]
    return write_csv(path.with_suffix(".csv"), header, zip(*cols))


def digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def inventory(paths: Iterable[Path], root: Path) -> list[dict]:
    out = []
    for p in paths:
        p = Path(p)
        out.append({"path": str(p.relative_to(root)), "sha256": digest(p),
                    "bytes": p.stat().st_size})
    return out


def write_manifest(out: Path, command: str, config_echo: dict | None, files: list[Path],
                   status: int, **extra) -> Path:
    payload = {
        "command": command,
        "library_version": __version__,
        "exit_status": status,
        "config": config_echo,
        "outputs": inventory(files, out),
    }
    payload.update(extra)
    return write_json(out / "manifest.json", payload)
