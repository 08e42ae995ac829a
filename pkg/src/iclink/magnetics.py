"""Quasi-static inductance of planar square spiral coils.

Coils are traced as chains of straight filaments and coupled through the
Neumann double integral, evaluated with Gauss-Legendre quadrature on short
sub-elements. Lengths are in micrometres, inductances in henries.
"""

from __future__ import annotations

import functools
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe, ellipk

from .errors import GeometryError, ModelError, PassivityError, SingularityError
from .netlist import CouplingNetwork

MU0 = 4e-7 * math.pi
UM = 1e-6

DEFAULT_MAX_ELEMENT = 5.0  # um
DEFAULT_GAUSS = 8
DEFAULT_OHM_PER_UM = 0.02


@dataclass(frozen=True)
class CoilGeometry:
    outer_side: float = 250.0
    turns: int = 5
    trace_width: float = 1.0
    trace_spacing: float = 1.0
    trace_thickness: float = 1.0

    def __post_init__(self):
        for name in ("outer_side", "trace_width", "trace_spacing", "trace_thickness"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.turns) != self.turns or self.turns < 1:
            raise GeometryError(f"turns must be a positive integer, got {self.turns}")
        if not self.turns * self.pitch < self.outer_side / 2:
            raise GeometryError(
                f"{self.turns} turns at pitch {self.pitch} um do not fit in a {self.outer_side} um coil")

    @property
    def pitch(self) -> float:
        return self.trace_width + self.trace_spacing

    @property
    def trace_radius(self) -> float:
        """Equivalent round-wire radius of the rectangular trace."""
        return (self.trace_width + self.trace_thickness) / 4.0

    def side_lengths(self) -> list[float]:
        # three full outer sides, then each pair of sides shrinks by one pitch
        n = 4 * self.turns
        return [self.outer_side - self.pitch * max(0, (j - 1) // 2) for j in range(n)]

    def trace_length(self) -> float:
        return float(sum(self.side_lengths()))


@dataclass(frozen=True)
class CoilPlacement:
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0

    def __post_init__(self):
        if self.dz < 0:
            raise GeometryError(f"vertical separation dz must be >= 0, got {self.dz}")


@dataclass(frozen=True, eq=False)
class SegmentPath:
    """Chain of straight segments through ``points`` (k+1 vertices, um)."""

    points: np.ndarray
    radius: float = 0.5

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
            raise GeometryError("a path needs at least two 3D points")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0):
            raise GeometryError("zero-length segment in path")
        if not self.radius > 0:
            raise GeometryError("trace radius must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_segments(self) -> int:
        return self.points.shape[0] - 1

    @property
    def closed(self) -> bool:
        return bool(np.array_equal(self.points[0], self.points[-1]))

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def key(self) -> bytes:
        return self.points.tobytes() + np.float64(self.radius).tobytes()


def spiral_path(geom: CoilGeometry, place: CoilPlacement = CoilPlacement()) -> SegmentPath:
    """Rectangular spiral winding inward from the outer corner (-D/2, -D/2)."""
    half = geom.outer_side / 2.0
    directions = ((1, 0), (0, 1), (-1, 0), (0, -1))
    x, y = -half, -half
    pts = [(x, y)]
    for j, side in enumerate(geom.side_lengths()):
        ux, uy = directions[j % 4]
        x, y = x + ux * side, y + uy * side
        pts.append((x, y))
    pts = np.asarray(pts)
    xyz = np.column_stack([pts[:, 0] + place.dx, pts[:, 1] + place.dy, np.full(len(pts), place.dz)])
    return SegmentPath(xyz, geom.trace_radius)


def polygon_loop(radius: float, sides: int, z: float = 0.0, wire_radius: float = 0.5,
                 center=(0.0, 0.0)) -> SegmentPath:
    """Closed regular polygon inscribed in a circle (axis along z)."""
    theta = np.linspace(0.0, 2 * np.pi, sides + 1)
    theta[-1] = 0.0
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta),
                           np.full(sides + 1, z)])
    return SegmentPath(pts, wire_radius)


def square_loop(side: float, z: float = 0.0, wire_radius: float = 0.5) -> SegmentPath:
    h = side / 2.0
    pts = [(-h, -h, z), (h, -h, z), (h, h, z), (-h, h, z), (-h, -h, z)]
    return SegmentPath(np.asarray(pts), wire_radius)


@functools.lru_cache(maxsize=64)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _quadrature(path: SegmentPath, max_element: float, gauss: int):
    """Gauss points, vector weights (tangent * length * weight) and segment ids."""
    xg, wg = _gauss(gauss)
    pts, wts, ids = [], [], []
    for k, (a, b) in enumerate(zip(path.points[:-1], path.points[1:])):
        d = b - a
        sub = max(1, math.ceil(np.linalg.norm(d) / max_element - 1e-9))
        # parameter in [0,1] along the segment for every sub-element Gauss point
        s = ((np.arange(sub)[:, None] + (xg[None, :] + 1) / 2) / sub).reshape(-1)
        pts.append(a + s[:, None] * d)
        wts.append(np.outer(np.tile(wg, sub) / (2 * sub), d))
        ids.append(np.full(s.size, k))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(ids)


def _axis_class(w):
    """0 for x-directed, 1 for y-directed, 2 for any other tangent."""
    ax = np.full(len(w), 2)
    tiny = 1e-12 * np.max(np.abs(w))
    ax[(np.abs(w[:, 1]) <= tiny) & (np.abs(w[:, 2]) <= tiny)] = 0
    ax[(np.abs(w[:, 0]) <= tiny) & (np.abs(w[:, 2]) <= tiny)] = 1
    return ax


def _neumann_sum(pa, wa, pb, wb, radius, ids_a=None, ids_b=None):
    """Sum of (w_p . w_q) / |p - q| over all point pairs.

    x- and y-directed filaments are orthogonal and skipped; block order is fixed.
    """
    ca, cb = _axis_class(wa), _axis_class(wb)
    total = 0.0
    for i in range(3):
        for j in range(3):
            if {i, j} == {0, 1}:
                continue
            sa, sb = ca == i, cb == j
            if not sa.any() or not sb.any():
                continue
            total += _block_sum(pa[sa], wa[sa], pb[sb], wb[sb], radius,
                                None if ids_a is None else ids_a[sa], None if ids_b is None else ids_b[sb])
    return total


def _block_sum(pa, wa, pb, wb, radius, ids_a, ids_b, chunk=512):
    total = 0.0
    scale = np.max(np.abs(wa)) * np.max(np.abs(wb))
    for start in range(0, len(pa), chunk):
        stop = start + chunk
        g = wa[start:stop] @ wb.T
        diff = pa[start:stop, None, :] - pb[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        active = np.abs(g) > 1e-12 * scale
        if ids_a is not None:
            active &= ids_a[start:stop, None] != ids_b[None, :]
        if np.any(active) and dist[active].min() < radius:
            raise SingularityError(
                f"conductors closer than the trace radius ({dist[active].min():.3g} < {radius:.3g} um)")
        total += float(np.sum(np.where(active, g / np.where(active, dist, 1.0), 0.0)))
    return total


# results keyed by path bytes; SegmentPath hashes by identity so lru_cache cannot be used
_MUTUAL_CACHE: dict = {}
_SELF_CACHE: dict = {}
_CACHE_LIMIT = 512


def _remember(cache: dict, key, value):
    if len(cache) >= _CACHE_LIMIT:
        cache.pop(next(iter(cache)))
    cache[key] = value


def mutual_inductance(a: SegmentPath, b: SegmentPath, max_element: float = DEFAULT_MAX_ELEMENT,
                      gauss: int = DEFAULT_GAUSS) -> float:
    """Neumann mutual inductance between two filament paths, in henries."""
    if (tuple(a.points[0]), a.key()) > (tuple(b.points[0]), b.key()):
        a, b = b, a
    # translation invariant: cache on both paths relative to the first vertex of a
    origin = a.points[0]
    a = SegmentPath(a.points - origin, a.radius)
    b = SegmentPath(b.points - origin, b.radius)
    key = (a.key(), b.key(), max_element, gauss)
    if key not in _MUTUAL_CACHE:
        _remember(_MUTUAL_CACHE, key, _mutual(a, b, max_element, gauss))
    return _MUTUAL_CACHE[key]


def _mutual(a, b, max_element, gauss):
    pa, wa, _ = _quadrature(a, max_element, gauss)
    pb, wb, _ = _quadrature(b, max_element, gauss)
    radius = max(a.radius, b.radius)
    return MU0 / (4 * math.pi) * _neumann_sum(pa, wa, pb, wb, radius) * UM


def segment_self_inductance(length: float, radius: float, internal: bool = True) -> float:
    """Straight round wire; ``internal=False`` drops the internal (uniform-current) term."""
    const = 0.75 if internal else 1.0
    return MU0 * length * UM / (2 * math.pi) * (math.log(2 * length / radius) - const)


def self_inductance(a: SegmentPath, trace_radius: float | None = None,
                    max_element: float = DEFAULT_MAX_ELEMENT, gauss: int = DEFAULT_GAUSS,
                    internal: bool = True) -> float:
    """Partial-inductance sum: per-segment self terms plus Neumann terms of distinct segments."""
    radius = a.radius if trace_radius is None else trace_radius
    if not radius > 0:
        raise GeometryError("trace radius must be positive")
    # translation invariant: cache on the shape relative to the first vertex
    rel = SegmentPath(a.points - a.points[0], radius)
    key = (rel.key(), max_element, gauss, internal)
    if key not in _SELF_CACHE:
        _remember(_SELF_CACHE, key, _self(rel, max_element, gauss, internal))
    return _SELF_CACHE[key]


def _self(a, max_element, gauss, internal):
    p, w, ids = _quadrature(a, max_element, gauss)
    cross = MU0 / (4 * math.pi) * _neumann_sum(p, w, p, w, a.radius, ids, ids) * UM
    own = sum(segment_self_inductance(l, a.radius, internal) for l in a.segment_lengths())
    value = own + cross
    if not value > 0:
        raise ModelError(f"non-positive self inductance {value}")
    return value


def coaxial_loop_mutual(r1: float, r2: float, d: float) -> float:
    """Maxwell's formula for coaxial circular filaments (um in, H out)."""
    if not (r1 > 0 and r2 > 0 and d > 0):
        raise GeometryError("radii and separation must be positive")
    m = 4 * r1 * r2 / ((r1 + r2) ** 2 + d ** 2)
    k = math.sqrt(m)
    return MU0 * math.sqrt(r1 * r2) * UM * ((2 / k - k) * ellipk(m) - 2 / k * ellipe(m))


def square_loop_inductance(side: float, radius: float) -> float:
    """Closed-form square loop, skin-effect limit: (2 mu0 l / pi)(ln(l/a) + a/l - 0.774)."""
    return 2 * MU0 * side * UM / math.pi * (math.log(side / radius) + radius / side - 0.774)


def _check_layout(coils):
    placements = [p for _, p in coils]
    for i in range(len(coils)):
        for j in range(i + 1, len(coils)):
            (gi, pi), (gj, pj) = coils[i], coils[j]
            if pi == pj:
                raise GeometryError(f"coils {i} and {j} share placement {pi}")
            if pi.dz == pj.dz:
                reach = (gi.outer_side + gj.outer_side) / 2
                if abs(pi.dx - pj.dx) < reach and abs(pi.dy - pj.dy) < reach:
                    raise GeometryError(f"coils {i} and {j} overlap in the plane z={pi.dz}")
    return placements


def build_network(coils, R_per_coil=None, C_shunt=None, ohm_per_um: float = DEFAULT_OHM_PER_UM,
                  max_element: float = DEFAULT_MAX_ELEMENT, gauss: int = DEFAULT_GAUSS,
                  workers: int = 1) -> CouplingNetwork:
    """Coupling network for a list of ``(CoilGeometry, CoilPlacement)`` pairs.

    Series resistance defaults to trace length times ``ohm_per_um``.
    """
    coils = list(coils)
    if not coils:
        raise GeometryError("at least one coil is required")
    _check_layout(coils)
    paths = [spiral_path(g, p) for g, p in coils]
    n = len(paths)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def self_job(i):
        return self_inductance(paths[i], max_element=max_element, gauss=gauss)

    def mutual_job(ij):
        return mutual_inductance(paths[ij[0]], paths[ij[1]], max_element, gauss)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            L = list(pool.map(self_job, range(n)))
            Mv = list(pool.map(mutual_job, pairs))
    else:
        L = [self_job(i) for i in range(n)]
        Mv = [mutual_job(ij) for ij in pairs]
    M = np.zeros((n, n))
    for (i, j), m in zip(pairs, Mv):
        M[i, j] = M[j, i] = m
    if R_per_coil is None:
        R = [g.trace_length() * ohm_per_um for g, _ in coils]
    else:
        R = np.broadcast_to(np.asarray(R_per_coil, dtype=float), (n,))
    try:
        net = CouplingNetwork(R=R, L=L, M=M, C_shunt=C_shunt)
    except PassivityError as exc:
        raise ModelError(f"inductance matrix failed validation: {exc}") from None
    for i, j in pairs:
        if not abs(net.coupling(i, j)) < 1:
            raise ModelError(f"|k| >= 1 between coils {i} and {j}")
    return net


def geometry_digest(coils) -> str:
    h = hashlib.sha256(repr(list(coils)).encode())
    return h.hexdigest()[:16]
