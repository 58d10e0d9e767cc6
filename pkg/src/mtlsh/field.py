"""Scalar fields on structured grids and merge-tree construction.

Fields are stored row-major with x varying fastest.  Connectivity is the
face-adjacency of the grid (4-neighbourhood in 2D, 6 in 3D) and value ties
are broken symbolically by vertex index, so every field has a unique
merge tree.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .tree import MergeTree

__all__ = [
    "FieldFormatError",
    "ScalarField",
    "load_field",
    "save_field",
    "grid_neighbors",
    "grid_positions",
    "compute_merge_tree",
    "generate_moving_gaussian",
]

MAGIC = b"MTLF"
VERSION = 1
_HEADER = struct.Struct("<4sI3I3f")


class FieldFormatError(ValueError):
    """Malformed field file; the message names the offending offset or line."""


@dataclass(frozen=True)
class ScalarField:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    values: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 2:
            dims = dims + (1,)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) == 2:
            spacing = spacing + (1.0,)
        if len(spacing) != 3:
            raise ValueError("spacing must have three components")
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(
                f"payload length mismatch: {values.size} values for dims {dims}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ValueError(f"non-finite value at index {bad[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, array, spacing=(1.0, 1.0, 1.0)) -> "ScalarField":
        """Build from a numpy array indexed ``[z, y, x]`` (or ``[y, x]``)."""
        a = np.asarray(array, dtype=np.float64)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim == 2:
            a = a[None, :, :]
        if a.ndim != 3:
            raise ValueError("array must be 1D, 2D or 3D")
        nz, ny, nx = a.shape
        return cls((nx, ny, nz), spacing, a.ravel())

    @property
    def size(self) -> int:
        return self.values.size

    def as_array(self) -> np.ndarray:
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx)

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def save_field(field: ScalarField, path, format: str = "raw-binary") -> None:
    path = Path(path)
    if format == "raw-binary":
        header = _HEADER.pack(MAGIC, VERSION, *field.dims, *field.spacing)
        path.write_bytes(header + field.values.astype("<f8").tobytes())
    elif format == "csv":
        lines = ["dims," + ",".join(str(d) for d in field.dims)]
        lines.append("spacing," + ",".join(repr(s) for s in field.spacing))
        lines.extend(repr(float(v)) for v in field.values)
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown field format {format!r}")


def load_field(path, format: str | None = None) -> ScalarField:
    """Read a field written in the raw-binary (``MTLF``) or CSV layout.

    ``format`` defaults to ``"csv"`` for ``.csv`` files and ``"raw-binary"``
    otherwise.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"field file not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "raw-binary"
    if format == "raw-binary":
        return _load_raw(path.read_bytes())
    if format == "csv":
        return _load_csv(path.read_text().splitlines())
    raise ValueError(f"unknown field format {format!r}")


def _load_raw(data: bytes) -> ScalarField:
    if len(data) < _HEADER.size:
        raise FieldFormatError(f"truncated header: {len(data)} bytes at offset 0")
    magic, version, nx, ny, nz, sx, sy, sz = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version} at offset 4")
    if min(nx, ny, nz) < 1:
        raise FieldFormatError("dims must be >= 1 (offset 8)")
    count = nx * ny * nz
    payload = len(data) - _HEADER.size
    if payload != 8 * count:
        raise FieldFormatError(
            f"payload length mismatch: expected {8 * count} bytes after offset "
            f"{_HEADER.size}, found {payload}"
        )
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        offset = _HEADER.size + 8 * int(bad[0])
        raise FieldFormatError(f"non-finite value at byte offset {offset}")
    return ScalarField((nx, ny, nz), (sx, sy, sz), values)


def _load_csv(lines: list[str]) -> ScalarField:
    lines = [ln.strip() for ln in lines]
    while lines and not lines[-1]:
        lines.pop()
    if len(lines) < 2:
        raise FieldFormatError("missing dims/spacing header (line 1)")
    head = lines[0].split(",")
    if head[0] != "dims" or len(head) != 4:
        raise FieldFormatError(f"line 1: expected 'dims,nx,ny,nz', got {lines[0]!r}")
    spac = lines[1].split(",")
    if spac[0] != "spacing" or len(spac) != 4:
        raise FieldFormatError(f"line 2: expected 'spacing,sx,sy,sz', got {lines[1]!r}")
    try:
        dims = tuple(int(x) for x in head[1:])
        spacing = tuple(float(x) for x in spac[1:])
    except ValueError as exc:
        raise FieldFormatError(f"header: {exc}") from None
    if min(dims) < 1:
        raise FieldFormatError("line 1: dims must be >= 1")
    body = lines[2:]
    count = dims[0] * dims[1] * dims[2]
    if len(body) != count:
        raise FieldFormatError(
            f"payload length mismatch: expected {count} values, found {len(body)}"
        )
    values = np.empty(count)
    for i, text in enumerate(body):
        try:
            v = float(text)
        except ValueError:
            raise FieldFormatError(f"line {i + 3}: cannot parse {text!r}") from None
        if not math.isfinite(v):
            raise FieldFormatError(f"line {i + 3}: non-finite value {text!r}")
        values[i] = v
    return ScalarField(dims, spacing, values)


def grid_neighbors(dims) -> tuple[tuple[int, ...], ...]:
    """Face-adjacent neighbours of every vertex of a row-major grid."""
    return _neighbors(tuple(int(d) for d in (tuple(dims) + (1,))[:3]))


@lru_cache(maxsize=64)
def _neighbors(dims) -> tuple[tuple[int, ...], ...]:
    nx, ny, nz = dims
    n = nx * ny * nz
    idx = np.arange(n).reshape(nz, ny, nx)
    pairs = [
        (idx[:, :, :-1].ravel(), idx[:, :, 1:].ravel()),
        (idx[:, :-1, :].ravel(), idx[:, 1:, :].ravel()),
        (idx[:-1, :, :].ravel(), idx[1:, :, :].ravel()),
    ]
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in pairs:
        for u, v in zip(a.tolist(), b.tolist()):
            adj[u].append(v)
            adj[v].append(u)
    return tuple(tuple(a) for a in adj)


def grid_positions(field: ScalarField) -> np.ndarray:
    """World coordinates ``(n, 3)`` of every grid vertex."""
    nx, ny, nz = field.dims
    z, y, x = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    pos = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1).astype(np.float64)
    return pos * np.asarray(field.spacing)


def compute_merge_tree(field: ScalarField, direction: str = "sublevel") -> MergeTree:
    """Merge tree of the sublevel sets of ``field`` (or of ``-field``).

    Vertices are swept in increasing ``(value, index)`` order while a
    union-find tracks sublevel components.  A vertex with no processed
    neighbour starts a leaf; one touching several components becomes a
    saddle whose children are the current top nodes of those components.
    The last vertex (global maximum) becomes the root unless the top node
    already sits at the maximum value, in which case that node is the root
    (a constant field therefore yields a single node).
    """
    if direction not in ("sublevel", "superlevel"):
        raise ValueError(f"direction must be 'sublevel' or 'superlevel', got {direction!r}")
    f = field.values if direction == "sublevel" else -field.values
    n = f.size
    order = np.lexsort((np.arange(n), f)).tolist()
    adj = grid_neighbors(field.dims)
    fl = f.tolist()

    uf = list(range(n))
    done = [False] * n
    head = [-1] * n
    node_vertex: list[int] = []
    node_parent: list[int] = []

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    last_node = -1
    for v in order:
        roots = {find(u) for u in adj[v] if done[u]}
        done[v] = True
        if not roots:
            last_node = len(node_vertex)
            node_vertex.append(v)
            node_parent.append(-1)
            head[v] = last_node
        elif len(roots) == 1:
            r = roots.pop()
            uf[v] = r
            last_node = -1
        else:
            last_node = len(node_vertex)
            node_vertex.append(v)
            node_parent.append(-1)
            for r in roots:
                node_parent[head[r]] = last_node
                uf[r] = v
            head[v] = last_node

    top_vertex = order[-1]
    if last_node == -1:
        top = head[find(top_vertex)]
        if fl[node_vertex[top]] != fl[top_vertex]:
            root = len(node_vertex)
            node_vertex.append(top_vertex)
            node_parent.append(-1)
            node_parent[top] = root

    values = [fl[v] for v in node_vertex]
    return MergeTree(node_parent, values, node_vertex, direction=direction)


def generate_moving_gaussian(
    steps: int = 12,
    grid: tuple[int, int] = (64, 64),
    seed: int = 0,
    noise: float = 1e-3,
    sigma: float = 0.05,
    radius: float = 0.25,
    offset: float = 0.1,
) -> list[ScalarField]:
    """Three-Gaussian benchmark with one peak orbiting two fixed ones.

    The domain is the unit square.  All Gaussians have amplitude 1 and
    width ``sigma``.  The fixed ones sit at ``centre +- (offset, 0)``; the
    moving one travels counterclockwise on a circle of ``radius`` about the
    centre, completing one revolution over the sequence.  Step ``s``
    (1-based) sits at angle ``2*pi*s/steps`` from the +x axis, so a 12-step
    run has three merge orders: moving peak joins the right fixed peak
    first (steps 11, 12, 1), the fixed peaks join first (2-4, 8-10), the
    moving peak joins the left fixed peak first (5-7).  ``seed`` drives a
    uniform noise term of amplitude ``noise``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    nx, ny = (int(g) for g in grid)
    if nx < 32 or ny < 32:
        raise ValueError("grid must be at least 32x32 to resolve three Gaussians")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, nx)
    y = np.linspace(0.0, 1.0, ny)
    X, Y = np.meshgrid(x, y)
    centre = np.array([0.5, 0.5])

    def bump(cx, cy):
        return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * sigma**2))

    fixed = bump(0.5 + offset, 0.5) + bump(0.5 - offset, 0.5)
    spacing = (1.0 / (nx - 1), 1.0 / (ny - 1), 1.0)
    fields = []
    for s in range(steps):
        theta = 2.0 * np.pi * (s + 1) / steps
        cx, cy = centre + radius * np.array([np.cos(theta), np.sin(theta)])
        values = fixed + bump(cx, cy) + noise * rng.uniform(-1.0, 1.0, size=X.shape)
        fields.append(ScalarField((nx, ny, 1), spacing, values.ravel()))
    return fields
