"""Extended-XYZ trajectory reader/writer and fixed-format CSV output."""

from __future__ import annotations

import csv
import os
import shlex

import numpy as np

from .core import ParticleState, SimulationCell, Snapshot, Trajectory

PROPERTIES = "species:S:1:pos:R:3:vel:R:3:mass:R:1"


class TrajectoryFormatError(ValueError):
    def __init__(self, frame: int, message: str):
        super().__init__(f"frame {frame}: {message}")
        self.frame = frame


def fmt(x: float) -> str:
    """17 significant digits; round-trips any float64."""
    return format(float(x), ".17g")


def _header(snap: Snapshot) -> str:
    cell = snap.state.cell
    lattice = " ".join(fmt(v) for v in cell.vectors.ravel())
    pbc = " ".join("T" if p else "F" for p in cell.periodic)
    origin = " ".join(fmt(v) for v in cell.origin)
    return (
        f'Lattice="{lattice}" Properties={PROPERTIES} Time={fmt(snap.time)} '
        f'pbc="{pbc}" Origin="{origin}"'
    )


def write_xyz(path, traj) -> None:
    """Write every snapshot of ``traj`` as one extended-XYZ frame."""
    with open(path, "w", newline="\n") as fh:
        for snap in traj:
            s = snap.state
            fh.write(f"{s.n}\n{_header(snap)}\n")
            for k in range(s.n):
                x, v = s.positions[k], s.velocities[k]
                fh.write(
                    f"{s.species[k]} {fmt(x[0])} {fmt(x[1])} {fmt(x[2])} "
                    f"{fmt(v[0])} {fmt(v[1])} {fmt(v[2])} {fmt(s.masses[k])}\n"
                )


def _parse_info(line: str, frame: int) -> dict:
    info = {}
    try:
        tokens = shlex.split(line)
    except ValueError as exc:
        raise TrajectoryFormatError(frame, f"unparseable header ({exc})") from None
    for tok in tokens:
        if "=" not in tok:
            raise TrajectoryFormatError(frame, f"header token {tok!r} is not key=value")
        k, v = tok.split("=", 1)
        info[k] = v
    return info


def _parse_properties(desc: str, frame: int) -> list[tuple[str, str, int]]:
    parts = desc.split(":")
    if len(parts) % 3:
        raise TrajectoryFormatError(frame, f"bad Properties descriptor {desc!r}")
    out = []
    for k in range(0, len(parts), 3):
        name, kind, count = parts[k], parts[k + 1], parts[k + 2]
        if kind not in "SRIL" or not count.isdigit():
            raise TrajectoryFormatError(frame, f"bad Properties entry {name}:{kind}:{count}")
        out.append((name, kind, int(count)))
    return out


def read_xyz(path, default_mass: float = 1.0) -> Trajectory:
    """Read an extended-XYZ file.

    Missing velocities default to zero and set ``metadata["velocities_missing"]``.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise TrajectoryFormatError(0, f"cannot read {os.fspath(path)!r}: {exc.strerror}") from None
    snaps = []
    missing_v = False
    pos = 0
    frame = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        try:
            n = int(lines[pos].strip())
        except ValueError:
            raise TrajectoryFormatError(frame, f"atom count line {lines[pos]!r} is not an integer") from None
        if n < 1:
            raise TrajectoryFormatError(frame, "atom count must be positive")
        if pos + 1 >= len(lines):
            raise TrajectoryFormatError(frame, "missing header line")
        info = _parse_info(lines[pos + 1], frame)
        body = lines[pos + 2 : pos + 2 + n]
        if len(body) != n or any(not b.strip() for b in body):
            raise TrajectoryFormatError(frame, f"expected {n} atom lines, found {sum(1 for b in body if b.strip())}")
        # a longer frame would show up as a non-integer "count" line next
        if pos + 2 + n < len(lines):
            nxt = lines[pos + 2 + n].split()
            if len(nxt) > 1:
                raise TrajectoryFormatError(frame, f"more atom lines than the declared count {n}")
        props = _parse_properties(info.get("Properties", "species:S:1:pos:R:3"), frame)
        width = sum(c for _, _, c in props)
        cols = [b.split() for b in body]
        if any(len(c) != width for c in cols):
            raise TrajectoryFormatError(frame, f"atom lines must have {width} columns")
        table = {}
        off = 0
        for name, kind, count in props:
            chunk = [c[off : off + count] for c in cols]
            off += count
            if kind == "S":
                table[name] = np.array([c[0] for c in chunk], dtype=object)
            else:
                try:
                    table[name] = np.array(chunk, dtype=float).reshape(n, count)
                except ValueError:
                    raise TrajectoryFormatError(frame, f"non-numeric value in column {name}") from None
        if "pos" not in table:
            raise TrajectoryFormatError(frame, "no pos column")
        if "vel" in table:
            vel = table["vel"]
        else:
            vel = np.zeros((n, 3))
            missing_v = True
        mass = table["mass"][:, 0] if "mass" in table else np.full(n, default_mass)
        species = table.get("species", np.full(n, "X", dtype=object))
        if "Lattice" not in info:
            raise TrajectoryFormatError(frame, "header has no Lattice")
        try:
            lat = np.array(info["Lattice"].split(), dtype=float)
        except ValueError:
            raise TrajectoryFormatError(frame, "Lattice is not numeric") from None
        if lat.size != 9:
            raise TrajectoryFormatError(frame, "Lattice needs 9 numbers")
        pbc = tuple(t == "T" for t in info.get("pbc", "T T T").split())
        origin = np.array(info.get("Origin", "0 0 0").split(), dtype=float)
        try:
            cell = SimulationCell(lat.reshape(3, 3), pbc, origin)
            state = ParticleState(table["pos"], vel, mass, species, cell)
        except ValueError as exc:
            raise TrajectoryFormatError(frame, str(exc)) from None
        time = float(info.get("Time", frame))
        snaps.append(Snapshot(time, state))
        pos += 2 + n
        frame += 1
    if snaps:
        n0 = snaps[0].state.n
        for k, s in enumerate(snaps):
            if s.state.n != n0:
                raise TrajectoryFormatError(k, f"atom count {s.state.n} differs from first frame ({n0})")
    try:
        return Trajectory(snaps, {"velocities_missing": missing_v})
    except ValueError as exc:
        raise TrajectoryFormatError(-1, str(exc)) from None


def trajectory_io(path, direction: str, trajectory=None):
    """Dispatch helper: ``direction`` is ``"read"`` or ``"write"``."""
    if direction == "read":
        return read_xyz(path)
    if direction == "write":
        if trajectory is None:
            raise ValueError("write needs a trajectory")
        write_xyz(path, trajectory)
        return None
    raise ValueError("direction must be 'read' or 'write'")


def write_csv(path, header, rows) -> None:
    """Comma-separated, LF line endings, floats at 17 significant digits.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, header, rows)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array(body, dtype=float)
