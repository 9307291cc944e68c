"""CSV / JSON artifacts. Floats are written with 17 significant digits."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .hjb import ValueField, kappa_nodes
from .simulate import Trajectory

FMT = "%.17g"


def _write(path, header: str, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=header, comments="")
    return path


def write_rho_csv(field: ValueField, path, stride: int = 1) -> Path:
    """Long format ``theta,kappa,rho``: one line per stored grid node."""
    J = field.grid.J
    idx = field.row_index[::stride]
    rows = field.rows[::stride]
    theta = np.repeat(idx * field.grid.dtheta, J + 1)
    kappa = np.tile(kappa_nodes(J), idx.size)
    return _write(path, "theta,kappa,rho", [theta, kappa, rows.reshape(-1)])


def write_rows_at_pi_csv(field: ValueField, path) -> Path:
    """``N,kappa,rho`` for the rows at angles N*pi, N = 0..n_max."""
    J = field.grid.J
    rows = field.rows_at_pi()
    N = np.repeat(np.arange(rows.shape[0]), J + 1)
    kappa = np.tile(kappa_nodes(J), rows.shape[0])
    return _write(path, "N,kappa,rho", [N, kappa, rows.reshape(-1)])


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    return _write(path, "theta,r,kappa", [traj.theta, traj.r, traj.kappa])


def read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
