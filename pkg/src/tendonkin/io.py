"""File formats: robot description JSON, command JSON, shape and gait CSVs.

Every format carries ``format_version``: a top-level key in JSON documents
and a leading ``# format_version=1`` comment line in CSV files. Units are SI
throughout. Floats are written with 17 significant digits so that values
survive a write/read cycle exactly.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import RobotGeometry, TendonRouting
from .statics import ActuationCommand

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_VERSION_LINE = f"# format_version={FORMAT_VERSION}"

ROBOT_KEYS = {"format_version", "n", "link_lengths_m", "joint_limit_rad", "tendons", "mu",
              "stretch_compliance_m"}
TENDON_KEYS = {"waypoints_rel_m", "terminal_anchored"}


class RobotFileError(DomainError):
    """Base class for robot description failures; ``exit_code`` classifies them."""

    exit_code = 2


class RobotParseError(RobotFileError):
    exit_code = 1


class RobotDimensionError(RobotFileError):
    exit_code = 4


class RobotInvariantError(RobotFileError):
    exit_code = 5


@dataclass(frozen=True)
class RobotDescription:
    geometry: RobotGeometry
    mu: Optional[float] = None
    stretch_compliance: Optional[float] = None


@dataclass(frozen=True, eq=False)
class GroundTruthShape:
    """Arc-length-parameterized centerline samples."""

    s: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(-1)
        p = np.asarray(self.points, dtype=float)
        if s.size == 0:
            raise DomainError("ground truth shape has no samples")
        if p.shape != (s.size, 3):
            raise DomainError(f"expected {s.size} points of dimension 3, got shape {p.shape}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(p))):
            raise DomainError("ground truth samples must be finite")
        if s[0] != 0.0 or np.any(np.diff(s) < 0):
            raise DomainError("arc length must start at 0 and be non-decreasing")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "points", p)

    @property
    def tip(self) -> np.ndarray:
        return self.points[int(np.argmax(self.s))]

    @classmethod
    def from_frame_origins(cls, origins) -> "GroundTruthShape":
        """Samples at the frame origins, arc length along the polyline."""
        p = np.asarray(origins, dtype=float)
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
        return cls(s, p)


def tip_error(estimated, truth: GroundTruthShape, total_length: float) -> tuple[float, float]:
    """Distance between the estimated tip (last frame origin) and the truth tip.

    Returns ``(error_m, error / total_length)``.
    """
    est = np.asarray(estimated, dtype=float)
    if est.ndim != 2 or est.shape[1] != 3 or est.shape[0] == 0:
        raise DomainError("estimated shape must be a non-empty (k, 3) array")
    if not total_length > 0:
        raise DomainError("total length must be positive")
    err = float(np.linalg.norm(est[-1] - truth.tip))
    return err, err / float(total_length)


# -- robot description ----------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def robot_to_dict(geom: RobotGeometry, mu: float | None = None,
                  stretch_compliance: float | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "n": geom.n,
        "link_lengths_m": [float(v) for v in geom.link_lengths],
        "joint_limit_rad": float(geom.joint_limit),
        "tendons": [
            {"waypoints_rel_m": t.relative_waypoints.tolist(), "terminal_anchored": t.terminal_anchored}
            for t in geom.tendons
        ],
    }
    if mu is not None:
        doc["mu"] = float(mu)
    if stretch_compliance is not None:
        doc["stretch_compliance_m"] = float(stretch_compliance)
    return doc


def write_robot(path, geom: RobotGeometry, mu: float | None = None,
                stretch_compliance: float | None = None) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(robot_to_dict(geom, mu, stretch_compliance), indent=2) + "\n")


def _require(doc, key, where):
    if key not in doc:
        raise RobotInvariantError(f"{where}: missing key '{key}'")
    return doc[key]


def _number(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RobotInvariantError(f"{what} must be a number, got {value!r}")
    return float(value)


def robot_from_dict(doc: dict, source: str = "robot description") -> RobotDescription:
    if not isinstance(doc, dict):
        raise RobotParseError(f"{source}: top level must be an object")
    unknown = sorted(set(doc) - ROBOT_KEYS)
    if unknown:
        log.warning("%s: ignoring unknown keys %s", source, ", ".join(unknown))
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise RobotInvariantError(f"{source}: unsupported format_version {version!r}")
    n = _require(doc, "n", source)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise RobotInvariantError(f"{source}: 'n' must be a positive integer, got {n!r}")
    ell = _require(doc, "link_lengths_m", source)
    if not isinstance(ell, list):
        raise RobotInvariantError(f"{source}: 'link_lengths_m' must be an array")
    if len(ell) != n:
        raise RobotDimensionError(f"{source}: expected {n} link lengths, got {len(ell)}")
    ell = [_number(v, "link length") for v in ell]
    limit = _number(_require(doc, "joint_limit_rad", source), "joint_limit_rad")
    tendons_doc = _require(doc, "tendons", source)
    if not isinstance(tendons_doc, list):
        raise RobotInvariantError(f"{source}: 'tendons' must be an array")
    tendons = []
    for i, t in enumerate(tendons_doc):
        where = f"{source}: tendon {i}"
        if not isinstance(t, dict):
            raise RobotInvariantError(f"{where} must be an object")
        extra = sorted(set(t) - TENDON_KEYS)
        if extra:
            log.warning("%s: ignoring unknown keys %s", where, ", ".join(extra))
        pts = _require(t, "waypoints_rel_m", where)
        if not isinstance(pts, list):
            raise RobotInvariantError(f"{where}: 'waypoints_rel_m' must be an array")
        if len(pts) != 2 * n + 1:
            raise RobotDimensionError(f"{where}: expected {2 * n + 1} way points, got {len(pts)}")
        if any(not isinstance(p, list) or len(p) != 3 for p in pts):
            raise RobotDimensionError(f"{where}: every way point must be an [x, y, z] triple")
        arr = np.array([[_number(c, "way point coordinate") for c in p] for p in pts])
        anchored = t.get("terminal_anchored", True)
        if not isinstance(anchored, bool):
            raise RobotInvariantError(f"{where}: 'terminal_anchored' must be a boolean")
        try:
            tendons.append(TendonRouting(arr, anchored))
        except DomainError as exc:
            raise RobotInvariantError(f"{where}: {exc}") from None
    try:
        geom = RobotGeometry(n, np.array(ell), limit, tuple(tendons))
    except DomainError as exc:
        raise RobotInvariantError(f"{source}: {exc}") from None
    mu = doc.get("mu")
    stretch = doc.get("stretch_compliance_m")
    if mu is not None and not _number(mu, "mu") >= 0:
        raise RobotInvariantError(f"{source}: 'mu' must be >= 0")
    if stretch is not None and not _number(stretch, "stretch_compliance_m") >= 0:
        raise RobotInvariantError(f"{source}: 'stretch_compliance_m' must be >= 0")
    return RobotDescription(geom, None if mu is None else float(mu),
                            None if stretch is None else float(stretch))


def load_robot_description(path) -> RobotDescription:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RobotParseError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RobotParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return robot_from_dict(doc, str(path))


def load_robot(path) -> RobotGeometry:
    return load_robot_description(path).geometry


# -- commands --------------------------------------------------------------

def write_command(path, command: ActuationCommand) -> None:
    doc = {"format_version": FORMAT_VERSION, "displacements_m": [float(v) for v in command.displacements]}
    Path(path).write_text(json.dumps(doc) + "\n")


def read_command(path) -> ActuationCommand:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"{path}: cannot parse command ({exc})") from None
    if not isinstance(doc, dict) or "displacements_m" not in doc:
        raise DomainError(f"{path}: missing 'displacements_m'")
    if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise DomainError(f"{path}: unsupported format_version {doc['format_version']!r}")
    return ActuationCommand(np.asarray(doc["displacements_m"], dtype=float))


# -- CSV -------------------------------------------------------------------

def _write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_VERSION_LINE + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else _fmt(v) for v in row])


def _read_csv(path, header: Sequence[str]) -> list[list[str]]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DomainError(f"{path}: cannot read ({exc.strerror})") from None
    version = None
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "format_version":
                version = value.strip()
            continue
        if line.strip():
            body.append(line)
    if version is not None and version != str(FORMAT_VERSION):
        raise DomainError(f"{path}: unsupported format_version {version}")
    rows = list(csv.reader(body))
    if not rows or [c.strip() for c in rows[0]] != list(header):
        raise DomainError(f"{path}: expected header {','.join(header)}")
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DomainError(f"{path}: row {i} has {len(r)} fields, expected {len(header)}")
    return rows[1:]


def _floats(rows, path, start=0):
    try:
        return np.array([[float(c) for c in r[start:]] for r in rows]).reshape(len(rows), -1)
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None


SHAPE_HEADER = ("frame_index", "x_m", "y_m", "z_m")
WAYPOINT_HEADER = ("tendon", "waypoint_index", "x_m", "y_m", "z_m")
TRUTH_HEADER = ("s_m", "x_m", "y_m", "z_m")


def write_shape_csv(path, origins, waypoints=None) -> None:
    """Frame origins to ``path``; way points ``(T, k, 3)`` to a sibling file.

    The sibling is ``<stem>.waypoints.csv`` next to ``path``.
    """
    o = np.asarray(origins, dtype=float)
    _write_csv(path, SHAPE_HEADER, ([i, *p] for i, p in enumerate(o)))
    if waypoints is not None:
        w = np.asarray(waypoints, dtype=float)
        rows = ([t, k, *w[t, k]] for t in range(w.shape[0]) for k in range(w.shape[1]))
        _write_csv(waypoint_path(path), WAYPOINT_HEADER, rows)


def waypoint_path(shape_path) -> Path:
    p = Path(shape_path)
    return p.with_name(p.stem + ".waypoints.csv")


def read_shape_csv(path) -> np.ndarray:
    rows = _read_csv(path, SHAPE_HEADER)
    if not rows:
        raise DomainError(f"{path}: no frames")
    try:
        idx = [int(r[0]) for r in rows]
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None
    if idx != list(range(len(rows))):
        raise DomainError(f"{path}: frame_index must count up from 0")
    return _floats(rows, path, 1)


def write_ground_truth_csv(path, truth: GroundTruthShape) -> None:
    _write_csv(path, TRUTH_HEADER, ([s, *p] for s, p in zip(truth.s, truth.points)))


def read_ground_truth_csv(path) -> GroundTruthShape:
    vals = _floats(_read_csv(path, TRUTH_HEADER), path)
    if vals.shape[0] == 0:
        raise DomainError(f"{path}: no samples")
    try:
        return GroundTruthShape(vals[:, 0], vals[:, 1:])
    except DomainError as exc:
        raise DomainError(f"{path}: {exc}") from None


def gait_header(n_tendons: int) -> tuple[str, ...]:
    return ("step",) + tuple(f"tendon_{i}_m" for i in range(n_tendons))


def write_gait_csv(path, displacements) -> None:
    d = np.asarray(displacements, dtype=float)
    _write_csv(path, gait_header(d.shape[1]), ([k, *row] for k, row in enumerate(d)))


def read_gait_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        first = next(l for l in path.read_text().splitlines() if l and not l.startswith("#"))
    except (OSError, StopIteration):
        raise DomainError(f"{path}: empty or unreadable gait file") from None
    n_tendons = len(first.split(",")) - 1
    rows = _read_csv(path, gait_header(n_tendons))
    if [int(r[0]) for r in rows] != list(range(len(rows))):
        raise DomainError(f"{path}: step must count up from 0")
    return _floats(rows, path, 1)
