"""Transport environments: obstacle geometry, openings, and path options.

An environment is a set of convex obstacles with named openings (gaps)
between them.  Path options are loop-free sequences of openings whose
straight center-to-center polyline is traversable; each option carries a
travel distance and a stacked collision risk.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Traversability tuning: polylines are sampled every SAMPLE_SPACING meters
# and must keep CLEARANCE_FRACTION * robot_width clearance from obstacle
# edges.  Gap plugs are half as deep as the thickest curated wall (0.4 m).
SAMPLE_SPACING = 0.05
CLEARANCE_FRACTION = 0.5
PLUG_HALF_DEPTH = 0.2

# Passages wider than this multiple of the robot width carry no risk.
RISK_FREE_WIDTH_FACTOR = 5.0


class GeometryError(ValueError):
    """Domain error raised for invalid geometric quantities."""


class EnvironmentConfigError(ValueError):
    """Raised when an environment config file fails to parse or validate."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class Opening:
    """A passage between obstacles.

    axis is the unit passage direction; a traversal must cross the opening
    center transversally with respect to this axis.
    """

    id: str
    center: np.ndarray
    width: float
    axis: np.ndarray

    def __post_init__(self):
        if self.width <= 0:
            raise GeometryError(f"opening {self.id}: width must be positive")
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise GeometryError(f"opening {self.id}: axis must be a unit vector")


@dataclass(frozen=True)
class PathOption:
    """A loop-free opening sequence from a position to the target."""

    id: int
    openings: tuple[str, ...]
    waypoints: np.ndarray  # (n, 2), starts at the query position, ends at target
    distance: float
    risk: float


@dataclass(eq=False)
class Environment:
    """Static transport scene: obstacles, openings, start/target, robot width."""

    name: str
    obstacles: list[np.ndarray]  # each (m, 2), convex, CCW
    openings: list[Opening]
    start: np.ndarray
    target: np.ndarray
    robot_width: float
    # Curated display order for reporting: opening-id sequences, one per option.
    display_options: list[tuple[str, ...]] = field(default_factory=list)
    _edges_a: np.ndarray = field(init=False, repr=False)
    _edges_b: np.ndarray = field(init=False, repr=False)
    _segment_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.robot_width <= 0:
            raise GeometryError("robot_width must be positive")
        seen = set()
        for op in self.openings:
            if op.id in seen:
                raise GeometryError(f"duplicate opening id {op.id!r}")
            seen.add(op.id)
            if op.width <= self.robot_width:
                raise GeometryError(
                    f"opening {op.id} narrower than the robot "
                    f"({op.width} <= {self.robot_width})"
                )
        for label, point in (("start", self.start), ("target", self.target)):
            if any(_points_in_convex(point[None, :], poly)[0] for poly in self.obstacles):
                raise GeometryError(f"{label} lies inside an obstacle")
        edges_a = []
        edges_b = []
        for poly in self.obstacles:
            edges_a.append(poly)
            edges_b.append(np.roll(poly, -1, axis=0))
        self._edges_a = np.concatenate(edges_a) if edges_a else np.zeros((0, 2))
        self._edges_b = np.concatenate(edges_b) if edges_b else np.zeros((0, 2))

    def opening(self, opening_id: str) -> Opening:
        for op in self.openings:
            if op.id == opening_id:
                return op
        raise KeyError(opening_id)

    @property
    def clearance(self) -> float:
        return CLEARANCE_FRACTION * self.robot_width


def opening_risk(robot_width: float, width: float) -> float:
    """Collision risk of one opening: robot width over passage width.

    Passages wider than RISK_FREE_WIDTH_FACTOR * robot_width are risk free.
    """
    if robot_width <= 0:
        raise GeometryError("robot_width must be positive")
    if width <= robot_width:
        raise GeometryError(f"impassable opening: width {width} <= robot width {robot_width}")
    if width > RISK_FREE_WIDTH_FACTOR * robot_width:
        return 0.0
    return robot_width / width


def option_risk(opening_risks) -> float:
    """Stacked risk of traversing several openings: 1 - prod(1 - s)."""
    out = 1.0
    for s in opening_risks:
        if not 0.0 <= s <= 1.0:
            raise GeometryError(f"opening risk {s} outside [0, 1]")
        out *= 1.0 - s
    return 1.0 - out


def objective_cost(distance: float, risk: float, risk_weight: float) -> float:
    """Distance plus weighted stacked risk."""
    if not 0.0 <= risk <= 1.0:
        raise GeometryError(f"risk {risk} outside [0, 1]")
    if risk_weight < 0:
        raise GeometryError("risk_weight must be non-negative")
    return distance + risk_weight * risk


def polyline_length(points: np.ndarray) -> float:
    diffs = np.diff(points, axis=0)
    return float(np.sum(np.hypot(diffs[:, 0], diffs[:, 1])))


def _points_in_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Inclusion test against a convex CCW polygon (boundary counts as inside)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    edge = b - a  # (m, 2)
    rel = points[:, None, :] - a[None, :, :]  # (n, m, 2)
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    return np.all(cross >= -1e-12, axis=1)


def _min_distance_to_edges(points, edges_a, edges_b) -> np.ndarray:
    """Min distance from each point to any obstacle edge segment."""
    if len(edges_a) == 0:
        return np.full(len(points), np.inf)
    d = edges_b - edges_a  # (m, 2)
    rel = points[:, None, :] - edges_a[None, :, :]  # (n, m, 2)
    denom = np.maximum(np.einsum("md,md->m", d, d), 1e-300)
    t = np.clip(np.einsum("nmd,md->nm", rel, d) / denom, 0.0, 1.0)
    nearest = rel - t[:, :, None] * d[None, :, :]
    dist = np.hypot(nearest[:, :, 0], nearest[:, :, 1])
    return dist.min(axis=1)


def _sample_segment(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    length = float(np.hypot(*(q - p)))
    n = max(2, int(math.ceil(length / SAMPLE_SPACING)) + 1)
    t = np.linspace(0.0, 1.0, n)
    return p[None, :] + t[:, None] * (q - p)[None, :]


def segment_clear(env: Environment, p, q, allowed_openings=()) -> bool:
    """True if the straight segment p->q is traversable.

    The segment must stay outside obstacle interiors with the robot's
    clearance margin and may pass an opening's gap only when that opening
    is one of the segment endpoints (gap plugs close all other openings,
    so sequences cannot sneak through openings they do not declare).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.allclose(p, q):
        return True
    samples = _sample_segment(p, q)
    for poly in env.obstacles:
        if np.any(_points_in_convex(samples, poly)):
            return False
    if np.any(_min_distance_to_edges(samples, env._edges_a, env._edges_b) < env.clearance):
        return False
    for op in env.openings:
        if op.id in allowed_openings:
            continue
        rel = samples - op.center[None, :]
        along = rel @ op.axis
        perp = rel[:, 0] * (-op.axis[1]) + rel[:, 1] * op.axis[0]
        inside = (np.abs(along) <= PLUG_HALF_DEPTH) & (np.abs(perp) <= op.width / 2)
        if np.any(inside):
            return False
    return True


def _cached_segment_clear(env, key, p, q, allowed):
    hit = env._segment_cache.get(key)
    if hit is None:
        hit = segment_clear(env, p, q, allowed)
        env._segment_cache[key] = hit
    return hit


def enumerate_options(env: Environment, position, exclude=frozenset()) -> list[PathOption]:
    """All traversable loop-free opening sequences from position to target.

    Each opening in a sequence must be crossed transversally: the incoming
    and outgoing polyline directions have the same sign along the opening
    axis.  Output is sorted lexicographically by opening-id sequence and
    ids are assigned in that order, so the result is deterministic.
    """
    position = np.asarray(position, dtype=float)
    available = sorted(
        (op for op in env.openings if op.id not in exclude), key=lambda o: o.id
    )
    at_start = bool(np.allclose(position, env.start))
    sequences: list[tuple[str, ...]] = []

    def seg_ok(a_pt, b_pt, a_key, b_key, allowed):
        # Keys are opening ids plus the sentinels "@start"/"@target"; segments
        # from a mid-run position (a_key None) are not cached across calls.
        if a_key is None:
            return segment_clear(env, a_pt, b_pt, allowed)
        key = (a_key, b_key) if a_key <= b_key else (b_key, a_key)
        return _cached_segment_clear(env, key, a_pt, b_pt, allowed)

    start_key = "@start" if at_start else None

    def dfs(seq, cur_pt, cur_op, dot_in):
        # Terminate at the target if the last opening is properly crossed.
        a_key = start_key if cur_op is None else cur_op.id
        allowed = {cur_op.id} if cur_op is not None else set()
        if seg_ok(cur_pt, env.target, a_key, "@target", allowed):
            if cur_op is None or dot_in * float((env.target - cur_pt) @ cur_op.axis) > 0:
                sequences.append(tuple(seq))
        for op in available:
            if op.id in seq:
                continue
            if not seg_ok(cur_pt, op.center, a_key, op.id, allowed | {op.id}):
                continue
            step = op.center - cur_pt
            if cur_op is not None and dot_in * float(step @ cur_op.axis) <= 0:
                continue
            d_in = float(step @ op.axis)
            if d_in == 0.0:
                continue
            dfs(seq + [op.id], op.center, op, d_in)

    dfs([], position, None, 0.0)
    sequences.sort()

    options = []
    for idx, seq in enumerate(sequences, start=1):
        centers = [env.opening(s).center for s in seq]
        waypoints = np.vstack([position[None, :], *[c[None, :] for c in centers],
                               env.target[None, :]])
        risks = [opening_risk(env.robot_width, env.opening(s).width) for s in seq]
        options.append(
            PathOption(
                id=idx,
                openings=seq,
                waypoints=waypoints,
                distance=polyline_length(waypoints),
                risk=option_risk(risks),
            )
        )
    return options


def option_distance(env: Environment, position, option: PathOption) -> float:
    """Polyline length from position through the option's openings to target."""
    position = np.asarray(position, dtype=float)
    centers = [env.opening(s).center for s in option.openings]
    pts = np.vstack([position[None, :], *[c[None, :] for c in centers], env.target[None, :]])
    return polyline_length(pts)


def nominal_trajectory(env: Environment, position, option: PathOption,
                       step_length: float) -> np.ndarray:
    """Equally spaced samples along the option polyline, position to target."""
    if step_length <= 0:
        raise GeometryError("step_length must be positive")
    position = np.asarray(position, dtype=float)
    centers = [env.opening(s).center for s in option.openings]
    pts = np.vstack([position[None, :], *[c[None, :] for c in centers], env.target[None, :]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0.0:
        return position[None, :].copy()
    n_seg = max(1, int(math.ceil(total / step_length - 1e-12)))
    s = np.linspace(0.0, total, n_seg + 1)
    x = np.interp(s, arc, pts[:, 0])
    y = np.interp(s, arc, pts[:, 1])
    return np.column_stack([x, y])


# ---------------------------------------------------------------------------
# Environment config files
# ---------------------------------------------------------------------------

_PAIR_RE = re.compile(r"\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)")


def _parse_pairs(text, path, line_no):
    pairs = _PAIR_RE.findall(text)
    leftover = _PAIR_RE.sub("", text).strip()
    if leftover:
        raise EnvironmentConfigError(path, line_no, f"unexpected token {leftover.split()[0]!r}")
    try:
        return [np.array([float(a), float(b)]) for a, b in pairs]
    except ValueError as exc:
        raise EnvironmentConfigError(path, line_no, str(exc)) from None


def _require_convex(poly, path, line_no):
    if len(poly) < 3:
        raise EnvironmentConfigError(path, line_no, "obstacle needs at least 3 vertices")
    pts = np.asarray(poly)
    d = np.roll(pts, -1, axis=0) - pts
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    if np.any(cross > 1e-12) and np.any(cross < -1e-12):
        raise EnvironmentConfigError(path, line_no, "obstacle polygon is not convex")
    if cross.sum() < 0:  # normalize to CCW
        pts = pts[::-1].copy()
    return pts


def load_environment(path) -> Environment:
    """Parse and validate an environment config file.

    Format: one `key: value` per line.  Keys `name`, `robot_width`,
    `start`, `target` appear once; `obstacle:` lines list polygon vertices
    as (x,y) pairs; `opening:` lines give `id=<token> center=(x,y)
    width=<w> axis=(x,y)`; optional `option:` lines list opening-id
    sequences in display order.  Errors report file and line.
    """
    path = Path(path)
    scalars = {}
    obstacles = []
    openings = []
    display = []
    dropped = []

    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise EnvironmentConfigError(path, 0, f"cannot read file: {exc}") from exc

    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise EnvironmentConfigError(path, line_no, "expected 'key: value'")
        key, value = (part.strip() for part in line.split(":", 1))
        if key in ("name",):
            scalars[key] = value
        elif key == "robot_width":
            try:
                scalars[key] = float(value)
            except ValueError:
                raise EnvironmentConfigError(path, line_no, f"bad number {value!r}") from None
        elif key in ("start", "target"):
            pts = _parse_pairs(value, path, line_no)
            if len(pts) != 1:
                raise EnvironmentConfigError(path, line_no, f"{key} needs exactly one (x,y) pair")
            scalars[key] = pts[0]
        elif key == "obstacle":
            obstacles.append((_parse_pairs(value, path, line_no), line_no))
        elif key == "opening":
            openings.append((value, line_no))
        elif key == "option":
            display.append((tuple(value.split()), line_no))
        else:
            raise EnvironmentConfigError(path, line_no, f"unknown key {key!r}")

    for required in ("robot_width", "start", "target"):
        if required not in scalars:
            raise EnvironmentConfigError(path, len(lines), f"missing {required!r}")
    robot_width = scalars["robot_width"]
    if robot_width <= 0:
        raise EnvironmentConfigError(path, 0, "robot_width must be positive")

    polys = [_require_convex(poly, path, ln) for poly, ln in obstacles]

    parsed_openings = []
    for value, line_no in openings:
        fields = dict()
        tokens = value.split()
        for tok in tokens:
            if "=" not in tok:
                raise EnvironmentConfigError(path, line_no, f"expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            fields[k] = v
        missing = {"id", "center", "width", "axis"} - fields.keys()
        if missing:
            raise EnvironmentConfigError(path, line_no, f"opening missing {sorted(missing)}")
        center = _parse_pairs(fields["center"], path, line_no)
        axis = _parse_pairs(fields["axis"], path, line_no)
        if len(center) != 1 or len(axis) != 1:
            raise EnvironmentConfigError(path, line_no, "center/axis need one (x,y) pair each")
        try:
            width = float(fields["width"])
        except ValueError:
            raise EnvironmentConfigError(path, line_no, f"bad width {fields['width']!r}") from None
        norm = float(np.linalg.norm(axis[0]))
        if norm == 0.0:
            raise EnvironmentConfigError(path, line_no, "axis must be non-zero")
        if width <= robot_width:
            dropped.append(fields["id"])
            continue
        try:
            parsed_openings.append(
                Opening(id=fields["id"], center=center[0], width=width, axis=axis[0] / norm)
            )
        except GeometryError as exc:
            raise EnvironmentConfigError(path, line_no, str(exc)) from None

    known = {op.id for op in parsed_openings}
    for seq, line_no in display:
        unknown = [s for s in seq if s not in known]
        if unknown:
            raise EnvironmentConfigError(path, line_no, f"option references unknown opening {unknown[0]!r}")
        if len(set(seq)) != len(seq):
            raise EnvironmentConfigError(path, line_no, "option repeats an opening")

    try:
        return Environment(
            name=scalars.get("name", path.stem),
            obstacles=polys,
            openings=parsed_openings,
            start=scalars["start"],
            target=scalars["target"],
            robot_width=robot_width,
            display_options=[seq for seq, _ in display],
        )
    except GeometryError as exc:
        raise EnvironmentConfigError(path, 0, str(exc)) from None


def shipped_environment_paths() -> list[Path]:
    root = Path(__file__).resolve().parent / "envs"
    return sorted(root.glob("env*.txt"))


def load_shipped_environments() -> list[Environment]:
    return [load_environment(p) for p in shipped_environment_paths()]
