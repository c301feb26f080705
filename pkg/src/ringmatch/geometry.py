"""Point patterns, distance matrices, the matching objective, and synthetic instances.

A template pattern is matched into a scene pattern by an assignment: an
integer array of length ``len(template)`` whose entry ``i`` is the scene
index that template point ``i`` maps to.  Assignments are not required to
be injective; collisions are allowed by the model and merely scored badly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

__all__ = [
    "PointPattern",
    "distance_matrix",
    "objective_residual",
    "apply_rigid_transform",
    "generate_instance",
    "validate_assignment",
    "assignment_collisions",
    "is_general_position",
    "load_points",
    "points_to_json",
]

#: triangles with less than this absolute area count as collinear
COLLINEAR_AREA_TOL = 1e-9


@dataclass(frozen=True)
class PointPattern:
    """An ordered set of 2-D points; index i always refers to the same point."""

    points: np.ndarray
    label: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError(f"expected an (N, 2) array with N >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def diameter(self) -> float:
        """Largest pairwise distance (0 for a single point)."""
        return float(distance_matrix(self).max())


def distance_matrix(p: PointPattern | np.ndarray) -> np.ndarray:
    """Symmetric matrix of pairwise Euclidean distances with zero diagonal."""
    pts = p.points if isinstance(p, PointPattern) else np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def validate_assignment(assignment, n: int, m: int) -> np.ndarray:
    """Check that `assignment` maps n template indices into 0..m-1."""
    a = np.asarray(assignment)
    if a.shape != (n,):
        raise ValueError(f"assignment must have length {n}, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.integer):
        raise ValueError("assignment entries must be integers")
    if a.size and (a.min() < 0 or a.max() >= m):
        raise ValueError(f"assignment entries must lie in 0..{m - 1}")
    return a.astype(np.intp)


def assignment_collisions(assignment) -> int:
    """Number of scene indices used by more than one template point."""
    _, counts = np.unique(np.asarray(assignment), return_counts=True)
    return int((counts > 1).sum())


def objective_residual(template: PointPattern, scene: PointPattern, assignment) -> float:
    """Squared Frobenius norm of D(template) - D(scene restricted to the assignment).

    Both triangles of the difference matrix are counted, so each unordered
    pair contributes twice; this consistent scaling never moves the argmin.
    """
    a = validate_assignment(assignment, len(template), len(scene))
    dt = distance_matrix(template)
    ds = distance_matrix(scene)[np.ix_(a, a)]
    return float(((dt - ds) ** 2).sum())


def apply_rigid_transform(
    p: PointPattern,
    angle: float,
    translation,
    reflect: bool = False,
) -> PointPattern:
    """Rotate by `angle` (radians, about the origin), optionally reflecting
    across the x-axis first, then translate.  Pairwise distances are preserved."""
    t = np.asarray(translation, dtype=np.float64)
    if not (np.isfinite(angle) and np.all(np.isfinite(t))):
        raise ValueError("transform parameters must be finite")
    pts = np.asarray(p.points)
    if reflect:
        pts = pts * np.array([1.0, -1.0])
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return PointPattern(pts @ rot.T + t, label=p.label)


def is_general_position(points, tol: float = COLLINEAR_AREA_TOL) -> bool:
    """True if no 3 points are collinear (triangle area below `tol`)."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 3:
        return True
    idx = np.array(list(combinations(range(n), 3)))
    u = pts[idx[:, 1]] - pts[idx[:, 0]]
    v = pts[idx[:, 2]] - pts[idx[:, 0]]
    area = 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    return bool(area.min() >= tol)


@dataclass(frozen=True)
class TransformInfo:
    """The rigid transform sampled while generating a synthetic instance."""

    angle: float
    translation: tuple[float, float]
    reflected: bool


def generate_instance(
    n: int,
    m: int,
    eps: float,
    seed: int,
    with_transform: bool = False,
):
    """Synthetic matching instance: a template hidden, jittered, in a cluttered scene.

    The template is n points uniform in the unit square (resampled until no
    3 points are collinear).  The scene holds those n points perturbed by
    i.i.d. Gaussian noise of standard deviation `eps` per axis, pushed
    through a random rigid transform (rotation about the pattern centroid,
    so the embedded copy stays inside the clutter domain), shuffled among
    m - n clutter points uniform in the unit square.

    Returns (template, scene, truth) where truth[i] is the scene index of
    template point i; with `with_transform`, a TransformInfo is appended.
    """
    if not (3 <= n <= m):
        raise ValueError(f"need 3 <= n <= m, got n={n}, m={m}")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    rng = np.random.default_rng(seed)

    while True:
        tpts = rng.uniform(0.0, 1.0, size=(n, 2))
        if is_general_position(tpts):
            break

    noisy = tpts + rng.normal(0.0, 1.0, size=(n, 2)) * eps
    angle = float(rng.uniform(0.0, 2.0 * np.pi))
    reflect = bool(rng.random() < 0.5)
    trans = rng.uniform(-0.5, 0.5, size=2)

    centroid = noisy.mean(axis=0)
    moved = PointPattern(noisy - centroid)
    embedded = apply_rigid_transform(moved, angle, centroid + trans, reflect=reflect).points

    clutter = rng.uniform(0.0, 1.0, size=(m - n, 2))
    order = rng.permutation(m)
    scene_pts = np.concatenate([embedded, clutter], axis=0)[order]
    inv = np.empty(m, dtype=np.intp)
    inv[order] = np.arange(m)
    truth = inv[:n]

    template = PointPattern(tpts, label="template")
    scene = PointPattern(scene_pts, label="scene")
    if with_transform:
        info = TransformInfo(angle, (float(trans[0]), float(trans[1])), reflect)
        return template, scene, truth, info
    return template, scene, truth


# ---------------------------------------------------------------------------
# point file formats: CSV "x,y" lines with '#' comments, or JSON {"points": ...}


def _parse_points_csv(text: str, source: str) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{source}:{lineno}: expected 'x,y', got {raw!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValueError(f"{source}:{lineno}: non-numeric coordinate in {raw!r}") from None
    if not rows:
        raise ValueError(f"{source}: no points found")
    return np.array(rows, dtype=np.float64)


def load_points(path, label: str | None = None) -> PointPattern:
    """Read a point file (.json for the JSON form, anything else parsed as CSV)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON: {e}") from None
        if not isinstance(data, dict) or "points" not in data:
            raise ValueError(f'{path}: expected an object with a "points" key')
        pts = np.asarray(data["points"], dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"{path}: points must be a list of [x, y] pairs")
    else:
        pts = _parse_points_csv(text, str(path))
    return PointPattern(pts, label=label or path.stem)


def points_to_json(p: PointPattern) -> str:
    return json.dumps({"points": p.points.tolist()})
