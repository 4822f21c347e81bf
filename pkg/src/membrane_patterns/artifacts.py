"""Bit-exact output formats: diagnostics CSV, PGM, legacy VTK, raw float64 dumps.

Every writer is deterministic: floats are written with ``repr`` (shortest
round-trip form), so identical fields give identical bytes.
"""

from __future__ import annotations

import os

import numpy as np

DIAG_COLUMNS = ("step", "time", "mass_u", "mass_h", "e_potential", "e_grad_u", "e_surface",
                "e_bend", "e_coupling", "e_total", "newton_iters", "krylov_iters")

ENERGY_SCALE = 5e-19   # J, physical interface energy eps * E_c
LENGTH_SCALE = 1e-6    # m, pattern modulation period


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def format_row(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


def write_csv(path, header, rows):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(format_row(row))


def read_csv(path):
    """Header tuple and rows of floats (for tests and tools)."""
    with open(path, encoding="ascii") as fh:
        header = tuple(fh.readline().strip().split(","))
        rows = [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.array(rows)


def _grid(u, n):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (n * n,):
        raise ValueError(f"expected {n * n} nodal values, got shape {u.shape}")
    return u.reshape(n, n)


def pgm_bytes(u, n) -> np.ndarray:
    """Grey levels ``clamp(round(255 (u + 1) / 2), 0, 255)``, top row ``j = n - 1``."""
    x = 255.0 * (_grid(u, n) + 1.0) / 2.0
    # round half away from zero (np.round would round half to even)
    r = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)[::-1]


def write_pgm(u, n, path):
    pixels = pgm_bytes(u, n)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def write_vtk(fields: dict, n, path, title="membrane fields"):
    """Legacy ASCII STRUCTURED_POINTS of the ``n x n`` vertex grid, one scalar per field."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {n} {n} 1", "ORIGIN 0 0 0", f"SPACING {_fmt(1.0 / n)} {_fmt(1.0 / n)} 1",
             f"POINT_DATA {n * n}"]
    for name, values in fields.items():
        _grid(values, n)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in np.asarray(values, dtype=np.float64))
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_raw(values, n, path, name, step, time):
    """Little-endian float64 in vertex order plus a one-line ``<path>.hdr`` sidecar."""
    _grid(values, n)
    np.asarray(values, dtype="<f8").tofile(path)
    with open(str(path) + ".hdr", "w", encoding="ascii", newline="") as fh:
        fh.write(f"n={n} field={name} step={step} time={_fmt(time)}\n")


def read_raw(path):
    """Inverse of :func:`write_raw`; returns ``(values, header_dict)``."""
    with open(str(path) + ".hdr", encoding="ascii") as fh:
        header = dict(item.split("=", 1) for item in fh.read().split())
    n = int(header["n"])
    values = np.fromfile(path, dtype="<f8")
    if values.size != n * n:
        raise ValueError(f"raw file holds {values.size} values, header says n={n}")
    meta = {"n": n, "field": header["field"], "step": int(header["step"]),
            "time": float(header["time"])}
    return values.astype(np.float64), meta


def write_field_csv(fields: dict, n, path):
    """``i,j,<field>...`` with one row per vertex in index order."""
    idx = np.arange(n * n)
    cols = [idx % n, idx // n] + [np.asarray(v, dtype=np.float64) for v in fields.values()]
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(["i", "j", *fields]) + "\n")
        for k in range(n * n):
            fh.write(format_row([int(cols[0][k]), int(cols[1][k])] + [c[k] for c in cols[2:]]))


def write_snapshot(state, n, directory, formats, tag=None):
    """Write ``state`` in every requested format; returns the list of paths."""
    os.makedirs(directory, exist_ok=True)
    tag = tag or f"{state.step:07d}"
    paths = []
    if "csv" in formats:
        p = os.path.join(directory, f"fields_{tag}.csv")
        write_field_csv({"u": state.u, "h": state.h}, n, p)
        paths.append(p)
    if "pgm" in formats:
        p = os.path.join(directory, f"u_{tag}.pgm")
        write_pgm(state.u, n, p)
        paths.append(p)
    if "vtk" in formats:
        p = os.path.join(directory, f"fields_{tag}.vtk")
        write_vtk({"u": state.u, "h": state.h}, n, p, title=f"step {state.step}")
        paths.append(p)
    if "raw" in formats:
        for name in ("u", "mu", "h", "g"):
            p = os.path.join(directory, f"{name}_{tag}.raw")
            write_raw(getattr(state, name), n, p, name, state.step, state.time)
            paths.append(p)
    return paths


def convert_units(eps, sigma, lam, kappa) -> dict:
    """Physical values of the nondimensional parameters.

    ``E_c = 5e-19 J / eps`` and ``x_c = 1e-6 m``; returns ``E_c`` [J],
    ``lambda_phys`` [J/m], ``sigma_phys`` [J/m^2], ``kappa_phys`` [J] and
    ``eps_phys`` [J].
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    e_c = ENERGY_SCALE / eps
    return {"E_c": e_c,
            "lambda_phys": lam * e_c / LENGTH_SCALE,
            "sigma_phys": sigma * e_c / LENGTH_SCALE**2,
            "kappa_phys": kappa * e_c,
            "eps_phys": eps * e_c}


def physical_units(params) -> dict:
    """:func:`convert_units` for a :class:`~membrane_patterns.model.ModelParams`.

    Matrix parameters enter through their spectral norms ``|G|`` and ``|L|``.
    """
    return convert_units(params.eps, params.G_max, max(abs(params.L_min), abs(params.L_max)),
                         params.kappa)
