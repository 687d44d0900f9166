"""Polytopal meshes: domain types, synthetic generators, ASCII file format.

Elements are polygons (2D, counter-clockwise vertex order) or tetrahedra
(3D).  Every element carries an explicit simplicial sub-tessellation used
for quadrature; simplices are their own sub-tessellation.  Face
connectivity is reconstructed from element adjacency, never stored in the
file.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshFormatError, MeshTopologyError

logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-12
_MEASURE_RTOL = 1e-10


def simplex_measure(verts: np.ndarray) -> float:
    """Measure of a d-simplex given its d+1 vertex coordinates, shape (d+1, d)."""
    v = np.asarray(verts, dtype=float)
    d = v.shape[1]
    return abs(np.linalg.det(v[1:] - v[0])) / math.factorial(d)


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area of a polygon with ordered vertices, shape (k, 2)."""
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass
class DiffusionModel:
    """Anisotropic diffusion: extracellular part plus a faster axonal part.

    The per-element tensor is ``d_ext * I + d_axn * a (x) a`` for the
    element's unit axonal direction ``a``; its eigenvalues are d_ext
    (multiplicity d-1) and d_ext + d_axn.  Units: mm^2/year.
    """

    d_ext: float = 8.0
    d_axn: float = 80.0

    def validate(self):
        if not self.d_ext > 0:
            raise ValueError(f"d_ext must be > 0, got {self.d_ext}")
        if self.d_axn < 0:
            raise ValueError(f"d_axn must be >= 0, got {self.d_axn}")

    def tensor(self, axon: np.ndarray) -> np.ndarray:
        a = np.asarray(axon, dtype=float)
        return self.d_ext * np.eye(a.size) + self.d_axn * np.outer(a, a)

    def max_eigenvalue(self) -> float:
        """Largest eigenvalue of the tensor: squared sup-norm of its square root."""
        return self.d_ext + self.d_axn


@dataclass
class Element:
    """One mesh cell: polygon (2D) or tetrahedron (3D)."""

    vertex_ids: np.ndarray
    region: int
    axon: np.ndarray
    sub_tessellation: np.ndarray  # (n_simplices, d+1, d) vertex coordinates
    bbox_min: np.ndarray = field(init=False)
    bbox_max: np.ndarray = field(init=False)
    diameter: float = field(init=False)
    measure: float = field(init=False)

    def finalize(self, vertices: np.ndarray):
        """Compute derived geometry from the mesh vertex table."""
        coords = vertices[self.vertex_ids]
        self.bbox_min = coords.min(axis=0)
        self.bbox_max = coords.max(axis=0)
        diffs = coords[:, None, :] - coords[None, :, :]
        self.diameter = float(np.sqrt((diffs**2).sum(axis=2)).max())
        d = vertices.shape[1]
        if len(self.vertex_ids) == d + 1:
            self.measure = simplex_measure(coords)
        elif d == 2:
            self.measure = abs(polygon_area(coords))
        else:
            raise MeshTopologyError(
                "3D elements must be tetrahedra (4 vertices); "
                f"got {len(self.vertex_ids)}"
            )

    @property
    def subtess_measure(self) -> float:
        return sum(simplex_measure(s) for s in self.sub_tessellation)

    def centroid(self) -> np.ndarray:
        """Measure-weighted centroid from the sub-tessellation."""
        total = 0.0
        acc = np.zeros(self.sub_tessellation.shape[2])
        for s in self.sub_tessellation:
            m = simplex_measure(s)
            acc += m * s.mean(axis=0)
            total += m
        return acc / total


@dataclass
class InternalFace:
    vertices: np.ndarray  # (d, d): segment endpoints in 2D, triangle in 3D
    left: int
    right: int
    normal: np.ndarray  # unit, points from left element into right element

    @property
    def measure(self) -> float:
        v = self.vertices
        if v.shape[1] == 2:
            return float(np.linalg.norm(v[1] - v[0]))
        return 0.5 * float(np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])))


@dataclass
class BoundaryFace:
    vertices: np.ndarray
    element: int
    normal: np.ndarray  # outward unit normal

    @property
    def measure(self) -> float:
        v = self.vertices
        if v.shape[1] == 2:
            return float(np.linalg.norm(v[1] - v[0]))
        return 0.5 * float(np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])))


class PolytopalMesh:
    """Immutable polytopal mesh with reconstructed face connectivity."""

    def __init__(self, vertices: np.ndarray, elements: list[Element]):
        self.vertices = np.asarray(vertices, dtype=float)
        self.d = self.vertices.shape[1]
        if self.d not in (2, 3):
            raise MeshTopologyError(f"dimension must be 2 or 3, got {self.d}")
        self.elements = elements
        for el in elements:
            el.finalize(self.vertices)
        self.internal_faces, self.boundary_faces = _build_faces(
            self.d, self.vertices, elements
        )
        self.measure = sum(el.measure for el in elements)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def region_labels(self) -> np.ndarray:
        return np.array([el.region for el in self.elements], dtype=int)

    def region_ids(self) -> list[int]:
        return sorted(set(int(el.region) for el in self.elements))

    def region_measure(self, region_ids) -> float:
        wanted = set(int(r) for r in region_ids)
        return sum(el.measure for el in self.elements if el.region in wanted)

    def validate(self):
        """Check geometric invariants; raises on violation."""
        for i, el in enumerate(self.elements):
            if not el.diameter > 0:
                raise MeshTopologyError(f"element {i} has zero diameter")
            if abs(np.linalg.norm(el.axon) - 1.0) > _UNIT_TOL:
                raise MeshTopologyError(f"element {i}: axonal direction not unit")
            coords = self.vertices[el.vertex_ids]
            if (coords < el.bbox_min - 1e-12).any() or (
                coords > el.bbox_max + 1e-12
            ).any():
                raise MeshTopologyError(f"element {i}: bounding box too small")
            sub = el.subtess_measure
            if abs(sub - el.measure) > _MEASURE_RTOL * max(el.measure, 1e-30):
                raise MeshTopologyError(
                    f"element {i}: sub-tessellation measure {sub} != "
                    f"element measure {el.measure}"
                )
        total_sub = sum(el.subtess_measure for el in self.elements)
        if abs(total_sub - self.measure) > _MEASURE_RTOL * self.measure:
            raise MeshTopologyError(
                f"mesh measure mismatch: elements {self.measure}, "
                f"sub-tessellation {total_sub}"
            )
        for f in self.internal_faces + self.boundary_faces:
            if abs(np.linalg.norm(f.normal) - 1.0) > _UNIT_TOL:
                raise MeshTopologyError("face normal is not unit length")


def _element_facets(d: int, vertex_ids: np.ndarray):
    """Local (d-1)-facets of an element as ordered vertex-id tuples.

    2D polygons yield consecutive edges; 3D tetrahedra yield the four
    triangles, each paired with the opposite vertex for orientation.
    """
    ids = [int(v) for v in vertex_ids]
    if d == 2:
        k = len(ids)
        return [((ids[i], ids[(i + 1) % k]), None) for i in range(k)]
    a, b, c, p = ids
    return [
        ((b, c, p), a),
        ((a, c, p), b),
        ((a, b, p), c),
        ((a, b, c), p),
    ]


def _facet_normal(d, verts, inward_ref):
    """Unit normal of a facet, oriented away from the reference point."""
    if d == 2:
        t = verts[1] - verts[0]
        n = np.array([t[1], -t[0]])
    else:
        n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    n = n / np.linalg.norm(n)
    if np.dot(n, verts.mean(axis=0) - inward_ref) < 0:
        n = -n
    return n


def _build_faces(d, vertices, elements):
    owners: dict[tuple, list[tuple[int, tuple]]] = {}
    for ei, el in enumerate(elements):
        for facet, _opposite in _element_facets(d, el.vertex_ids):
            key = tuple(sorted(facet))
            if len(set(facet)) != len(facet):
                raise MeshTopologyError(f"element {ei} has a degenerate facet {facet}")
            rec = owners.setdefault(key, [])
            if any(prev_ei == ei for prev_ei, _ in rec):
                raise MeshTopologyError(
                    f"element {ei} lists facet {key} more than once"
                )
            rec.append((ei, facet))
            if len(rec) > 2:
                raise MeshTopologyError(
                    f"facet {key} shared by more than two elements: "
                    f"{[o for o, _ in rec]}"
                )

    internal, boundary = [], []
    for key in sorted(owners):
        rec = owners[key]
        left_ei, facet = rec[0]
        verts = vertices[list(facet)]
        normal = _facet_normal(d, verts, elements[left_ei].centroid())
        if len(rec) == 2:
            right_ei = rec[1][0]
            internal.append(
                InternalFace(vertices=verts, left=left_ei, right=right_ei, normal=normal)
            )
        else:
            boundary.append(
                BoundaryFace(vertices=verts, element=left_ei, normal=normal)
            )
    return internal, boundary


def _canonical_2d_order(coords_all, vertex_ids):
    """Return vertex ids in counter-clockwise order (reversed if needed)."""
    if polygon_area(coords_all[vertex_ids]) < 0:
        return vertex_ids[::-1]
    return vertex_ids


def _own_subtess(vertices, vertex_ids, d):
    coords = vertices[vertex_ids]
    if len(vertex_ids) == d + 1:
        return coords[None, :, :].copy()
    if d == 2:
        # fan triangulation around the polygon centroid (valid for convex cells)
        centroid = coords.mean(axis=0)
        k = len(vertex_ids)
        tris = []
        for i in range(k):
            tris.append([centroid, coords[i], coords[(i + 1) % k]])
        return np.array(tris)
    raise MeshTopologyError("3D non-tetrahedral elements need an explicit SUBTESS")


def _normalize_axon(a, where, line=None):
    norm = float(np.linalg.norm(a))
    if abs(norm - 1.0) <= _UNIT_TOL:
        return a / norm
    if 0.9 <= norm <= 1.1:
        if abs(norm - 1.0) > 1e-9:
            logger.warning(
                "%s: axonal direction has norm %.6g, normalizing", where, norm
            )
        return a / norm
    raise MeshFormatError(
        f"{where}: axonal direction norm {norm:.6g} outside [0.9, 1.1]", line=line
    )


# ---------------------------------------------------------------------------
# Synthetic generators


def slab_labeler(n_slabs: int, extent: float, axis: int = 0):
    """Label rule splitting [0, extent] along one axis into equal bands 1..n_slabs."""

    def label(centroid: np.ndarray) -> int:
        idx = int(centroid[axis] / (extent / n_slabs))
        return min(max(idx, 0), n_slabs - 1) + 1

    return label


def generate_structured_mesh(
    d: int,
    n: int,
    extent: float = 1.0,
    labeler=None,
    axon=None,
) -> PolytopalMesh:
    """Simplicial mesh of [0, extent]^d with n cells per axis.

    Produces 2*n^2 triangles (d=2) or 6*n^3 tetrahedra (d=3, Kuhn
    subdivision of each cube).  ``labeler`` maps an element centroid to a
    region id (default: everything region 1); ``axon`` is a unit vector or
    a centroid -> vector callable (default: first axis).
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if n < 1:
        raise ValueError(f"cells per axis must be >= 1, got {n}")
    if extent <= 0:
        raise ValueError(f"extent must be > 0, got {extent}")

    h = extent / n
    axes = [np.linspace(0.0, extent, n + 1) for _ in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grids], axis=1)

    def vid(*idx):
        out = 0
        for i in idx:
            out = out * (n + 1) + i
        return out

    cells = []
    if d == 2:
        for i in range(n):
            for j in range(n):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                cells.append([v00, v10, v11])
                cells.append([v00, v11, v01])
    else:
        import itertools

        perms = sorted(itertools.permutations(range(3)))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    base = np.array([i, j, k])
                    for perm in perms:
                        idx = [base.copy()]
                        for axis in perm:
                            nxt = idx[-1].copy()
                            nxt[axis] += 1
                            idx.append(nxt)
                        cells.append([vid(*p) for p in idx])

    elements = []
    for cell in cells:
        ids = np.array(cell, dtype=int)
        if d == 2:
            ids = _canonical_2d_order(vertices, ids)
        coords = vertices[ids]
        centroid = coords.mean(axis=0)
        region = int(labeler(centroid)) if labeler is not None else 1
        if axon is None:
            a = np.zeros(d)
            a[0] = 1.0
        elif callable(axon):
            a = np.asarray(axon(centroid), dtype=float)
        else:
            a = np.asarray(axon, dtype=float)
        a = _normalize_axon(a, "generated element")
        sub = coords[None, :, :].copy()
        elements.append(
            Element(vertex_ids=ids, region=region, axon=a, sub_tessellation=sub)
        )

    mesh = PolytopalMesh(vertices, elements)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# ASCII mesh format

_MAGIC = "FKMESH"
_VERSION = 1


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_mesh(mesh: PolytopalMesh, path):
    """Write the versioned ASCII mesh format (canonical float text)."""
    d = mesh.d
    lines = [f"{_MAGIC} {_VERSION} {d}"]
    lines.append(f"VERTICES {len(mesh.vertices)}")
    for v in mesh.vertices:
        lines.append(" ".join(_fmt(x) for x in v))
    lines.append(f"ELEMENTS {mesh.n_elements}")
    for el in mesh.elements:
        parts = [str(len(el.vertex_ids))]
        parts += [str(int(v)) for v in el.vertex_ids]
        parts.append(str(int(el.region)))
        parts += [_fmt(a) for a in el.axon]
        lines.append(" ".join(parts))
    nontrivial = [
        el
        for el in mesh.elements
        if not (
            len(el.vertex_ids) == d + 1 and len(el.sub_tessellation) == 1
        )
    ]
    if nontrivial:
        lines.append(f"SUBTESS {mesh.n_elements}")
        for el in mesh.elements:
            if len(el.vertex_ids) == d + 1 and len(el.sub_tessellation) == 1:
                lines.append("0")
            else:
                parts = [str(len(el.sub_tessellation))]
                for simplex in el.sub_tessellation:
                    for pt in simplex:
                        parts += [_fmt(x) for x in pt]
                lines.append(" ".join(parts))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        with open(path) as f:
            self.raw = f.readlines()
        self.pos = 0

    def next_tokens(self):
        while self.pos < len(self.raw):
            self.pos += 1
            line = self.raw[self.pos - 1].split("#", 1)[0].strip()
            if line:
                return line.split(), self.pos
        return None, self.pos

    def expect(self, what):
        tokens, line = self.next_tokens()
        if tokens is None:
            raise MeshFormatError(f"unexpected end of file, expected {what}", line=line)
        return tokens, line


def load_mesh(path) -> PolytopalMesh:
    """Load a mesh from the ASCII format; validates all invariants."""
    r = _LineReader(path)

    tokens, line = r.expect("header")
    if len(tokens) != 3 or tokens[0] != _MAGIC:
        raise MeshFormatError(f"expected '{_MAGIC} <version> <dim>' header", line=line)
    try:
        version, d = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise MeshFormatError("header version/dimension not integers", line=line)
    if version != _VERSION:
        raise MeshFormatError(f"unsupported version {version}", line=line)
    if d not in (2, 3):
        raise MeshFormatError(f"dimension must be 2 or 3, got {d}", line=line)

    tokens, line = r.expect("VERTICES")
    if tokens[0] != "VERTICES" or len(tokens) != 2:
        raise MeshFormatError("expected 'VERTICES <count>'", line=line)
    n_vertices = int(tokens[1])
    vertices = np.empty((n_vertices, d))
    for i in range(n_vertices):
        tokens, line = r.expect(f"vertex {i}")
        if len(tokens) != d:
            raise MeshFormatError(
                f"vertex {i}: expected {d} coordinates, got {len(tokens)}", line=line
            )
        try:
            vertices[i] = [float(t) for t in tokens]
        except ValueError:
            raise MeshFormatError(f"vertex {i}: bad coordinate", line=line)

    tokens, line = r.expect("ELEMENTS")
    if tokens[0] != "ELEMENTS" or len(tokens) != 2:
        raise MeshFormatError("expected 'ELEMENTS <count>'", line=line)
    n_elements = int(tokens[1])
    raw_elements = []
    for e in range(n_elements):
        tokens, line = r.expect(f"element {e}")
        try:
            k = int(tokens[0])
            if len(tokens) != 1 + k + 1 + d:
                raise MeshFormatError(
                    f"element {e}: expected {1 + k + 1 + d} fields, got {len(tokens)}",
                    line=line,
                )
            ids = np.array([int(t) for t in tokens[1 : 1 + k]], dtype=int)
            region = int(tokens[1 + k])
            axon = np.array([float(t) for t in tokens[2 + k : 2 + k + d]])
        except MeshFormatError:
            raise
        except ValueError:
            raise MeshFormatError(f"element {e}: bad field", line=line)
        if (ids < 0).any() or (ids >= n_vertices).any():
            raise MeshFormatError(f"element {e}: vertex id out of range", line=line)
        if d == 3 and k != 4:
            raise MeshFormatError(
                f"element {e}: 3D elements must be tetrahedra (4 vertices), got {k}",
                line=line,
            )
        axon = _normalize_axon(axon, f"element {e}", line=line)
        raw_elements.append((ids, region, axon, line))

    subtess = [None] * n_elements
    tokens, line = r.next_tokens()
    if tokens is not None:
        if tokens[0] != "SUBTESS" or len(tokens) != 2:
            raise MeshFormatError("expected 'SUBTESS <count>' or end of file", line=line)
        if int(tokens[1]) != n_elements:
            raise MeshFormatError(
                f"SUBTESS count {tokens[1]} != element count {n_elements}", line=line
            )
        pts_per_simplex = (d + 1) * d
        for e in range(n_elements):
            tokens, line = r.expect(f"sub-tessellation {e}")
            try:
                s = int(tokens[0])
                if len(tokens) != 1 + s * pts_per_simplex:
                    raise MeshFormatError(
                        f"sub-tessellation {e}: expected {1 + s * pts_per_simplex} "
                        f"fields, got {len(tokens)}",
                        line=line,
                    )
                if s > 0:
                    vals = np.array([float(t) for t in tokens[1:]])
                    subtess[e] = vals.reshape(s, d + 1, d)
            except MeshFormatError:
                raise
            except ValueError:
                raise MeshFormatError(f"sub-tessellation {e}: bad field", line=line)
        tokens, line = r.next_tokens()
        if tokens is not None:
            raise MeshFormatError("trailing content after SUBTESS section", line=line)

    elements = []
    for e, (ids, region, axon, eline) in enumerate(raw_elements):
        if d == 2:
            ids = _canonical_2d_order(vertices, ids)
        if subtess[e] is not None:
            sub = subtess[e]
        else:
            if len(ids) != d + 1:
                raise MeshFormatError(
                    f"element {e}: non-simplex without SUBTESS entry", line=eline
                )
            sub = _own_subtess(vertices, ids, d)
        elements.append(
            Element(vertex_ids=ids, region=region, axon=axon, sub_tessellation=sub)
        )

    mesh = PolytopalMesh(vertices, elements)
    mesh.validate()
    return mesh
