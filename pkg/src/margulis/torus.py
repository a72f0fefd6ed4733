"""Hyperbolic toral automorphisms with validated Markov partitions.

All geometry happens in eigen-coordinates, where the automorphism is diagonal
and every partition rectangle is an axis-aligned box; torus wrapping is an
explicit enumeration of lattice translates with a radius bound derived from
the boxes' extents.  Geometric predicates are then interval comparisons, so
validation tolerances reflect round-off only.

The shipped ``cat-adler-weiss`` partition for [[2,1],[1,1]] is derived from
the classical two-parallelogram dissection: the two boxes of the golden
natural-extension domain are refined into the five connected components of
their one-step pullback intersections, which turns the multiplicity matrix
[[2,1],[1,1]] into an ordinary 0/1 transition graph with the same spectral
radius.  Its coordinates are exact in Q[sqrt(5)] and evaluated to floats at
load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graphs import ShiftGraph, StateId, StructuralViolation, build_finite_graph
from .measures import ConformalFamily, make_family

Vec = np.ndarray


# ---------------------------------------------------------------------------
# exact quadratic numbers a + b sqrt(5)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Q5:
    """Element a + b*sqrt(5) of Q[sqrt(5)], with exact rational a, b."""

    a: Fraction
    b: Fraction = Fraction(0)

    @staticmethod
    def of(a, b=0) -> "Q5":
        return Q5(Fraction(a), Fraction(b))

    def __add__(self, o: "Q5") -> "Q5":
        return Q5(self.a + o.a, self.b + o.b)

    def __sub__(self, o: "Q5") -> "Q5":
        return Q5(self.a - o.a, self.b - o.b)

    def __mul__(self, o: "Q5") -> "Q5":
        return Q5(self.a * o.a + 5 * self.b * o.b, self.a * o.b + self.b * o.a)

    def __truediv__(self, o: "Q5") -> "Q5":
        d = o.a * o.a - 5 * o.b * o.b
        return Q5((self.a * o.a - 5 * self.b * o.b) / d, (self.b * o.a - self.a * o.b) / d)

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(5.0)


_Q0 = Q5.of(0)
_Q1 = Q5.of(1)
_S5 = Q5.of(0, 1)


# ---------------------------------------------------------------------------
# automorphism
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusAutomorphism:
    matrix: tuple[tuple[int, int], tuple[int, int]]
    lam_u: float
    lam_s: float
    e_u: Vec
    e_s: Vec
    basis: Vec = field(repr=False)      # columns e_u, e_s
    basis_inv: Vec = field(repr=False)  # eigen coords of an xy point: basis_inv @ p

    def to_eigen(self, p: Vec) -> Vec:
        return self.basis_inv @ np.asarray(p, dtype=float)

    def to_xy(self, us: Vec) -> Vec:
        return self.basis @ np.asarray(us, dtype=float)

    def apply(self, p: Vec) -> Vec:
        return np.asarray(self.matrix, dtype=float) @ np.asarray(p, dtype=float)


def make_automorphism(matrix: Sequence[Sequence[int]]) -> TorusAutomorphism:
    """Validate a hyperbolic unimodular 2x2 integer matrix and fix eigendata.

    Signs are canonical: e_u has its largest-magnitude entry positive, e_s is
    then flipped if needed so that det[e_u e_s] > 0.  Eigen residuals are
    checked to 1e-13.
    """
    m = [[int(matrix[i][j]) for j in range(2)] for i in range(2)]
    for i in range(2):
        for j in range(2):
            if m[i][j] != matrix[i][j]:
                raise ValueError("matrix entries must be integers")
    a, b = m[0]
    c, d = m[1]
    det = a * d - b * c
    tr = a + d
    if abs(det) != 1:
        raise ValueError(f"matrix must be unimodular; det = {det}")
    disc = tr * tr - 4 * det
    if disc <= 0:  # only possible for det = +1, |trace| <= 2
        raise ValueError(f"matrix is not hyperbolic; trace = {tr}, det = {det}")
    sq = math.sqrt(disc)
    roots = ((tr + sq) / 2.0, (tr - sq) / 2.0)
    lam_u = max(roots, key=abs)
    lam_s = det / lam_u
    if abs(lam_u) <= 1.0:
        raise ValueError("matrix is not hyperbolic; |lambda_u| <= 1")

    A = np.array(m, dtype=float)

    def eigvec(lam: float) -> Vec:
        # rows of A - lam I are parallel; pick the better-conditioned kernel vector
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        v = v / np.linalg.norm(v)
        if abs(v[0]) >= abs(v[1]):
            return v if v[0] > 0 else -v
        return v if v[1] > 0 else -v

    e_u = eigvec(lam_u)
    e_s = eigvec(lam_s)
    if np.linalg.det(np.column_stack([e_u, e_s])) < 0:
        e_s = -e_s
    for lam, v in ((lam_u, e_u), (lam_s, e_s)):
        if np.max(np.abs(A @ v - lam * v)) > 1e-13:
            raise ValueError("eigenvector residual exceeds 1e-13")
    E = np.column_stack([e_u, e_s])
    return TorusAutomorphism(
        matrix=((m[0][0], m[0][1]), (m[1][0], m[1][1])),
        lam_u=lam_u, lam_s=lam_s, e_u=e_u, e_s=e_s,
        basis=E, basis_inv=np.linalg.inv(E),
    )


def inverse_automorphism(auto: TorusAutomorphism) -> TorusAutomorphism:
    (a, b), (c, d) = auto.matrix
    det = a * d - b * c
    inv = [[d * det, -b * det], [-c * det, a * det]]
    return make_automorphism(inv)


# ---------------------------------------------------------------------------
# rectangles and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box in eigen-coordinates: corner + [0,u_extent]x[0,s_extent]."""

    id: StateId
    corner: tuple[float, float]
    u_extent: float
    s_extent: float

    @property
    def u_range(self) -> tuple[float, float]:
        return (self.corner[0], self.corner[0] + self.u_extent)

    @property
    def s_range(self) -> tuple[float, float]:
        return (self.corner[1], self.corner[1] + self.s_extent)


@dataclass(frozen=True)
class Crossing:
    """One full unstable crossing of rectangle j by the image of rectangle i.

    ``u_offset``: start of the crossing's preimage inside R_i, relative to
    R_i's corner.  ``s_offset``: start of the image strip inside R_j,
    relative to R_j's corner.  ``translate``: the lattice vector identifying
    f(R_i)'s chart with R_j's.
    """

    u_offset: float
    s_offset: float
    translate: tuple[int, int]


@dataclass
class PartitionReport:
    disjoint_ok: bool
    cover_ok: bool
    markov_ok: bool
    area_total: float
    max_u_cross_err: float
    max_s_fit_err: float
    witnesses: list[str]
    edges: list[tuple[StateId, StateId]]
    crossings: dict[tuple[StateId, StateId], Crossing]

    @property
    def ok(self) -> bool:
        return self.disjoint_ok and self.cover_ok and self.markov_ok


@dataclass
class MarkovPartition:
    auto: TorusAutomorphism
    rectangles: list[Rectangle]
    graph: ShiftGraph
    crossings: dict[tuple[StateId, StateId], Crossing]
    tol: float
    by_id: dict[StateId, Rectangle] = field(default_factory=dict)
    _caches: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.by_id:
            self.by_id = {r.id: r for r in self.rectangles}

    @property
    def h(self) -> float:
        return math.log(abs(self.auto.lam_u))

    def rect(self, rid: StateId) -> Rectangle:
        return self.by_id[rid]


def _interval_overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    return min(a[1], b[1]) - max(a[0], b[0])


def _translates_near(auto: TorusAutomorphism, box_a, box_b) -> list[tuple[int, int]]:
    """Integer T with (box_b + T) possibly meeting box_a, via xy bounding boxes."""
    def xy_bounds(box):
        (ulo, uhi), (slo, shi) = box
        corners = [auto.to_xy(np.array([u, s])) for u in (ulo, uhi) for s in (slo, shi)]
        arr = np.array(corners)
        return arr.min(axis=0), arr.max(axis=0)

    lo_a, hi_a = xy_bounds(box_a)
    lo_b, hi_b = xy_bounds(box_b)
    lo = lo_a - hi_b
    hi = hi_a - lo_b
    out = []
    for mm in range(math.floor(lo[0]) - 1, math.ceil(hi[0]) + 2):
        for nn in range(math.floor(lo[1]) - 1, math.ceil(hi[1]) + 2):
            out.append((mm, nn))
    return out


def validate_partition(auto: TorusAutomorphism, rectangles: Sequence[Rectangle],
                       tol: float = 1e-9) -> PartitionReport:
    """Disjoint interiors, full-area cover, and the Markov crossing property.

    Exact in eigen-coordinates: the image of each rectangle is an axis-aligned
    box, every overlap with another rectangle must cross its full unstable
    extent, and the image's stable sides must land inside the target.  A pair
    crossing more than once is reported as a violation: the artifact's simple
    transition graphs require a refined partition.
    """
    if auto.lam_u <= 1.0 or not (0.0 < auto.lam_s < 1.0):
        raise StructuralViolation(
            "partition machinery requires positive eigenvalues (lam_u > 1 > lam_s > 0); "
            "use the square of the map otherwise"
        )
    witnesses: list[str] = []
    area = 0.0
    scale = abs(np.linalg.det(auto.basis))
    for r in rectangles:
        if r.u_extent <= 0 or r.s_extent <= 0:
            witnesses.append(f"{r.id}: empty rectangle")
        area += r.u_extent * r.s_extent * scale
    cover_ok = abs(area - 1.0) <= max(tol, 1e-9)
    if not cover_ok:
        witnesses.append(f"area of union = {area:.12f} != 1")

    disjoint_ok = True
    for i, ri in enumerate(rectangles):
        box_i = (ri.u_range, ri.s_range)
        for j in range(i, len(rectangles)):
            rj = rectangles[j]
            box_j = (rj.u_range, rj.s_range)
            for T in _translates_near(auto, box_i, box_j):
                if i == j and T == (0, 0):
                    continue
                te = auto.to_eigen(np.array(T, dtype=float))
                du = _interval_overlap(box_i[0], (box_j[0][0] + te[0], box_j[0][1] + te[0]))
                ds = _interval_overlap(box_i[1], (box_j[1][0] + te[1], box_j[1][1] + te[1]))
                if du > tol and ds > tol:
                    disjoint_ok = False
                    witnesses.append(f"interiors of {ri.id} and {rj.id}+{T} overlap")

    markov_ok = True
    max_u_err = 0.0
    max_s_err = 0.0
    edges: list[tuple[StateId, StateId]] = []
    crossings: dict[tuple[StateId, StateId], Crossing] = {}
    for ri in rectangles:
        img_u = (auto.lam_u * ri.u_range[0], auto.lam_u * ri.u_range[1])
        img_s = (auto.lam_s * ri.s_range[0], auto.lam_s * ri.s_range[1])
        for rj in rectangles:
            hits = []
            for T in _translates_near(auto, (img_u, img_s), (rj.u_range, rj.s_range)):
                te = auto.to_eigen(np.array(T, dtype=float))
                tu = (rj.u_range[0] + te[0], rj.u_range[1] + te[0])
                ts = (rj.s_range[0] + te[1], rj.s_range[1] + te[1])
                du = _interval_overlap(img_u, tu)
                ds = _interval_overlap(img_s, ts)
                if du <= tol or ds <= tol:
                    continue
                # full u-crossing: the image covers [tu[0], tu[1]] entirely;
                # stable fit: the image's s-range sits inside [ts[0], ts[1]]
                u_err = max(0.0, img_u[0] - tu[0]) + max(0.0, tu[1] - img_u[1])
                s_err = max(0.0, ts[0] - img_s[0]) + max(0.0, img_s[1] - ts[1])
                max_u_err = max(max_u_err, u_err)
                max_s_err = max(max_s_err, s_err)
                if u_err > tol or s_err > tol:
                    markov_ok = False
                    witnesses.append(
                        f"Markov violation {ri.id}->{rj.id}+{T}: u_err={u_err:.3e} s_err={s_err:.3e}"
                    )
                    continue
                hits.append((T, te))
            if len(hits) > 1:
                markov_ok = False
                witnesses.append(f"{ri.id}->{rj.id}: {len(hits)} crossings; refine the partition")
            elif len(hits) == 1:
                T, te = hits[0]
                u_off = (rj.u_range[0] + te[0]) / auto.lam_u - ri.u_range[0]
                s_off = auto.lam_s * ri.s_range[0] - (rj.s_range[0] + te[1])
                edges.append((ri.id, rj.id))
                crossings[(ri.id, rj.id)] = Crossing(u_off, s_off, T)
    return PartitionReport(disjoint_ok, cover_ok, markov_ok, area,
                           max_u_err, max_s_err, witnesses, edges, crossings)


def make_partition(auto: TorusAutomorphism, rectangles: Sequence[Rectangle],
                   tol: float = 1e-9) -> MarkovPartition:
    report = validate_partition(auto, rectangles, tol)
    if not report.ok:
        raise StructuralViolation(
            "invalid Markov partition: " + "; ".join(report.witnesses[:4])
        )
    ids = [r.id for r in rectangles]
    graph = build_finite_graph(ids, report.edges, base=ids[0], name="partition")
    return MarkovPartition(auto, list(rectangles), graph, report.crossings, tol)


# ---------------------------------------------------------------------------
# the shipped cat partition
# ---------------------------------------------------------------------------

def _cat_exact_data() -> tuple[list[tuple[str, Q5, Q5]], list[Q5], list[Q5]]:
    """Exact strip data (id, x_lo, y_hi) of the golden natural-extension boxes.

    x-cuts in Q[sqrt5]: 0 < sqrt5-2 < (3-sqrt5)/2 < (sqrt5-1)/2 < 3-sqrt5 < 1;
    strips over the first three carry height 1, the last two height
    (sqrt5-1)/2 = 1/phi.
    """
    half = Fraction(1, 2)
    x = [
        _Q0,
        _S5 - Q5.of(2),                      # 1/(phi*beta)
        Q5(Fraction(3, 2), -half),           # 1/beta
        Q5(-half, half),                     # 1/phi
        Q5.of(3) - _S5,                      # 2/beta
        _Q1,
    ]
    one_over_phi = Q5(-half, half)
    heights = [_Q1, _Q1, _Q1, one_over_phi, one_over_phi]
    strips = [(f"R{k + 1}", x[k], heights[k]) for k in range(5)]
    widths = [x[k + 1] - x[k] for k in range(5)]
    return strips, widths, x


def builtin_partition(name: str) -> MarkovPartition:
    """Named partitions shipped with the package.

    ``cat-adler-weiss``: five-parallelogram refinement of the classical
    two-box partition for [[2,1],[1,1]].
    """
    if name != "cat-adler-weiss":
        raise ValueError(f"unknown builtin partition {name!r}")
    auto = make_automorphism([[2, 1], [1, 1]])
    strips, widths, _ = _cat_exact_data()
    # G maps the natural-extension box to the torus; its axis images are
    # kappa_u * v_u and kappa_s * (-1/phi, 1) with exact Q[sqrt5] factors.
    ten = Fraction(10)
    kappa_u = Q5(Fraction(5) / ten, Fraction(1) / ten)      # phi/sqrt5
    kappa_s = Q5(Fraction(5) / ten, Fraction(3) / ten)      # (5+3*sqrt5)/10
    vu_len = math.hypot(1.0, float(Q5(Fraction(-1, 2), Fraction(1, 2))))  # |(1, 1/phi)|
    rectangles = []
    for (sid, x_lo, y_hi), width in zip(strips, widths):
        corner_u = float(x_lo * kappa_u) * vu_len
        u_ext = float(width * kappa_u) * vu_len
        s_ext = float(y_hi * kappa_s) * vu_len
        rectangles.append(Rectangle(sid, (corner_u, 0.0), u_ext, s_ext))
    return make_partition(auto, rectangles, tol=1e-9)


def partition_to_json(p: MarkovPartition) -> str:
    """Serialize a partition in the interchange format (eigenbasis corners)."""
    payload = {
        "matrix": [list(row) for row in p.auto.matrix],
        "rectangles": [
            {"id": r.id, "corner": [r.corner[0], r.corner[1]],
             "u_extent": r.u_extent, "s_extent": r.s_extent}
            for r in p.rectangles
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def partition_from_json(text: str, tol: float = 1e-9) -> MarkovPartition:
    spec = json.loads(text)
    auto = make_automorphism(spec["matrix"])
    rects = [Rectangle(str(r["id"]),
                       (float(r["corner"][0]), float(r["corner"][1])),
                       float(r["u_extent"]), float(r["s_extent"]))
             for r in spec["rectangles"]]
    return make_partition(auto, rects, tol=tol)


def load_partition(path: str, tol: float = 1e-9) -> MarkovPartition:
    with open(path, "r", encoding="utf-8") as fh:
        return partition_from_json(fh.read(), tol=tol)


def partition_family(p: MarkovPartition) -> ConformalFamily:
    """Conformal family of the partition: psi(R) = u_extent(R), h = log lam_u.

    The unstable extents are a Perron eigenvector of the transition graph, so
    leaf measures coincide with arc length and the full unstable side of R has
    measure psi(R) exactly.
    """
    psi = {r.id: r.u_extent for r in p.rectangles}
    return make_family(p.graph, p.h, psi)


def inverse_partition(p: MarkovPartition) -> MarkovPartition:
    """The same rectangles as a Markov partition of the inverse map.

    Unstable and stable roles swap; the transition graph is the reverse of
    p.graph.  Used for stable-leaf measures.
    """
    auto_inv = inverse_automorphism(p.auto)
    rects = []
    for r in p.rectangles:
        corners_xy = [
            p.auto.to_xy(np.array([u, s]))
            for u in r.u_range for s in r.s_range
        ]
        coords = np.array([auto_inv.to_eigen(c) for c in corners_xy])
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        rects.append(Rectangle(r.id, (float(lo[0]), float(lo[1])),
                               float(hi[0] - lo[0]), float(hi[1] - lo[1])))
    return make_partition(auto_inv, rects, tol=p.tol)


# ---------------------------------------------------------------------------
# membership and coding
# ---------------------------------------------------------------------------

def _chart_translates(p: MarkovPartition, r: Rectangle) -> list[tuple[tuple[int, int], tuple[float, float]]]:
    """Translates T (with eigen coords) for which (r + T) can meet [0,1)^2."""
    cache = p._caches.setdefault("chart_translates", {})
    if r.id not in cache:
        unit_box_eigen = _eigen_bbox(p.auto, (0.0, 1.0), (0.0, 1.0))
        out = []
        for T in _translates_near(p.auto, unit_box_eigen, (r.u_range, r.s_range)):
            te = p.auto.to_eigen(np.array(T, dtype=float))
            out.append((T, (float(te[0]), float(te[1]))))
        cache[r.id] = out
    return cache[r.id]


def _eigen_bbox(auto: TorusAutomorphism, x_range, y_range):
    corners = [auto.to_eigen(np.array([x, y])) for x in x_range for y in y_range]
    arr = np.array(corners)
    return ((float(arr[:, 0].min()), float(arr[:, 0].max())),
            (float(arr[:, 1].min()), float(arr[:, 1].max())))


def _lattice_in_strips(auto: TorusAutomorphism, U: tuple[float, float],
                       S: tuple[float, float], pad: float = 1e-9):
    """Integer vectors T with u(T) in U and s(T) in S (both padded by ``pad``).

    The admissible region is a parallelogram in xy; iterate its integer
    x-range and solve the two strip conditions for the y-range.
    """
    Ei = auto.basis_inv
    e00, e01 = float(Ei[0, 0]), float(Ei[0, 1])
    e10, e11 = float(Ei[1, 0]), float(Ei[1, 1])
    corners = [auto.to_xy(np.array([u, s])) for u in U for s in S]
    arr = np.array(corners)
    m_lo, m_hi = math.floor(arr[:, 0].min()), math.ceil(arr[:, 0].max())
    for mm in range(m_lo, m_hi + 1):
        nu = _strip_range(e01, U[0] - e00 * mm, U[1] - e00 * mm)
        ns = _strip_range(e11, S[0] - e10 * mm, S[1] - e10 * mm)
        lo = max(nu[0], ns[0])
        hi = min(nu[1], ns[1])
        if hi < lo:
            continue
        for nn in range(math.ceil(lo - pad), math.floor(hi + pad) + 1):
            uT = e00 * mm + e01 * nn
            sT = e10 * mm + e11 * nn
            if U[0] - pad <= uT <= U[1] + pad and S[0] - pad <= sT <= S[1] + pad:
                yield (mm, nn), uT, sT


def memberships(p: MarkovPartition, xy: Vec, tol: float = 1e-12) -> list[tuple[StateId, float, float]]:
    """Rectangles containing the torus point, with relative (u,s) coordinates.

    Points within ``tol`` of a boundary belong to every adjacent rectangle.
    """
    q0, q1 = float(xy[0]) % 1.0, float(xy[1]) % 1.0
    Ei = p.auto.basis_inv
    u = float(Ei[0, 0]) * q0 + float(Ei[0, 1]) * q1
    s = float(Ei[1, 0]) * q0 + float(Ei[1, 1]) * q1
    out = []
    for r in p.rectangles:
        cu, cs = r.corner
        for _T, (tu, ts) in _chart_translates(p, r):
            u_rel = u - tu - cu
            s_rel = s - ts - cs
            if -tol <= u_rel <= r.u_extent + tol and -tol <= s_rel <= r.s_extent + tol:
                out.append((r.id, u_rel, s_rel))
                break
    return out


def locate(p: MarkovPartition, xy: Vec, tol: float = 1e-12) -> tuple[StateId, float, float]:
    """The unique rectangle containing an interior point (error on boundaries)."""
    ms = memberships(p, xy, tol)
    if len(ms) != 1:
        raise ValueError(f"point {xy} is not uniquely located (memberships: {ms})")
    return ms[0]


@dataclass
class Itinerary:
    """Symbols at times -n..n, with the decoded center and diameter bound."""

    symbols: tuple[StateId, ...]
    n: int
    center_estimate: tuple[float, float]
    radius: float


def code_point(p: MarkovPartition, xy: Vec, n: int, tol: float = 1e-12) -> list[Itinerary]:
    """All itineraries of f^-n(x)..f^n(x) whose decoded box contains x.

    The unstable interval of an itinerary depends only on its future symbols
    and the stable interval only on its past, so the search descends the
    cylinder tree in each direction keeping the (at most two per level)
    children whose interval still contains x.  Interior orbits yield a single
    itinerary; boundary points several.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    for rid, u_rel, s_rel in memberships(p, xy, tol):
        futures = _containing_forward(p, rid, u_rel, n, tol)
        pasts = _containing_backward(p, rid, s_rel, n, tol)
        for past in pasts:
            for fut in futures:
                symbols = tuple(reversed(past)) + (rid,) + tuple(fut)
                dec = decode(p, symbols, zero_index=n)
                out.append(Itinerary(symbols, n, dec[0], dec[1]))
    out.sort(key=lambda it: it.symbols)
    return out


def _containing_forward(p: MarkovPartition, rid: StateId, u_rel: float,
                        n: int, tol: float) -> list[tuple[StateId, ...]]:
    """Forward symbol words w_1..w_n whose cylinder u-interval contains u_rel."""
    if n == 0:
        return [()]
    lam_u = p.auto.lam_u
    words = []
    for b in p.graph.successors(rid):
        cross = p.crossings[(rid, b)]
        width = p.rect(b).u_extent / lam_u
        if cross.u_offset - tol <= u_rel <= cross.u_offset + width + tol:
            for rest in _containing_forward(p, b, (u_rel - cross.u_offset) * lam_u,
                                            n - 1, tol):
                words.append((b,) + rest)
    return words


def _containing_backward(p: MarkovPartition, rid: StateId, s_rel: float,
                         n: int, tol: float) -> list[tuple[StateId, ...]]:
    """Past words w_-1..w_-n (in that order) whose stable strip contains s_rel."""
    if n == 0:
        return [()]
    lam_s = p.auto.lam_s
    words = []
    for a in p.graph.predecessors(rid):
        cross = p.crossings[(a, rid)]
        height = lam_s * p.rect(a).s_extent
        if cross.s_offset - tol <= s_rel <= cross.s_offset + height + tol:
            for rest in _containing_backward(p, a, (s_rel - cross.s_offset) / lam_s,
                                             n - 1, tol):
                words.append((a,) + rest)
    return words


def decode(p: MarkovPartition, symbols: Sequence[StateId],
           zero_index: int) -> tuple[tuple[float, float], float, tuple[float, float], tuple[float, float]]:
    """Intersection box of f^-i[R_{w_i}] over the itinerary, by interval folding.

    Returns (center_xy, radius, u_rel_interval, s_rel_interval); the relative
    intervals are within the chart of symbols[zero_index].  Raises ValueError
    on an inadmissible itinerary (empty intersection).
    """
    symbols = list(symbols)
    if not (0 <= zero_index < len(symbols)):
        raise ValueError("zero_index out of range")
    for a, b in zip(symbols, symbols[1:]):
        if not p.graph.has_edge(a, b):
            raise ValueError(f"inadmissible itinerary at ({a!r}, {b!r}): empty intersection")
    lam_u, lam_s = p.auto.lam_u, p.auto.lam_s
    future = symbols[zero_index:]
    past = symbols[: zero_index + 1]
    u_lo, u_hi = 0.0, p.rect(future[-1]).u_extent
    for a, b in reversed(list(zip(future, future[1:]))):
        off = p.crossings[(a, b)].u_offset
        u_lo, u_hi = off + u_lo / lam_u, off + u_hi / lam_u
    s_lo, s_hi = 0.0, p.rect(past[0]).s_extent
    for a, b in zip(past, past[1:]):
        off = p.crossings[(a, b)].s_offset
        s_lo, s_hi = off + lam_s * s_lo, off + lam_s * s_hi
    r0 = p.rect(symbols[zero_index])
    center_us = np.array([r0.corner[0] + (u_lo + u_hi) / 2.0,
                          r0.corner[1] + (s_lo + s_hi) / 2.0])
    center = tuple((p.auto.to_xy(center_us) % 1.0).tolist())
    radius = 0.5 * math.hypot(u_hi - u_lo, s_hi - s_lo)
    return center, radius, (u_lo, u_hi), (s_lo, s_hi)


# ---------------------------------------------------------------------------
# unstable arcs and leaf measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnstableArc:
    """{base + t e_u : t in [t0, t1]} on the torus."""

    base: tuple[float, float]
    t0: float
    t1: float

    @property
    def length(self) -> float:
        return self.t1 - self.t0


def full_u_side_arc(p: MarkovPartition, rid: StateId, s_frac: float = 0.5) -> UnstableArc:
    """The full unstable side of a rectangle at relative stable height s_frac."""
    r = p.rect(rid)
    base_us = np.array([r.corner[0], r.corner[1] + s_frac * r.s_extent])
    base = tuple((p.auto.to_xy(base_us) % 1.0).tolist())
    return UnstableArc(base, 0.0, r.u_extent)


def cylinder_image_arc(p: MarkovPartition, root: StateId, future: Sequence[StateId],
                       s_frac: float = 0.5) -> UnstableArc:
    """The closed sub-arc of the unstable leaf coded by a cylinder."""
    _, _, (u_lo, u_hi), _ = decode(p, [root, *future], zero_index=0)
    r = p.rect(root)
    base_us = np.array([r.corner[0] + u_lo, r.corner[1] + s_frac * r.s_extent])
    base = tuple((p.auto.to_xy(base_us) % 1.0).tolist())
    return UnstableArc(base, 0.0, u_hi - u_lo)


def _plaque_segments(p: MarkovPartition, arc: UnstableArc,
                     tol: float = 1e-12) -> list[tuple[StateId, float, float, float]]:
    """Split an arc into plaque pieces: (rect id, u_rel_lo, u_rel_hi, t_lo).

    Membership along the stable coordinate is half-open ([0, s_extent)), so a
    leaf lying exactly on a rectangle boundary is assigned deterministically.
    """
    if arc.length <= tol:
        return []
    base_us = p.auto.to_eigen(np.array(arc.base))
    u_b, s_b = float(base_us[0]), float(base_us[1])
    segs = []
    for r in p.rectangles:
        cu, cs = r.corner
        U = (u_b + arc.t0 - cu - r.u_extent, u_b + arc.t1 - cu)
        S = (s_b - cs - r.s_extent, s_b - cs)
        for _T, uT, sT in _lattice_in_strips(p.auto, U, S, pad=1e-9):
            s_rel = s_b - sT - cs
            if not (-tol <= s_rel < r.s_extent - tol):
                continue
            u_lo_t = cu + uT - u_b
            lo = max(arc.t0, u_lo_t)
            hi = min(arc.t1, u_lo_t + r.u_extent)
            if hi - lo > tol:
                segs.append((r.id, lo - u_lo_t, hi - u_lo_t, lo))
    segs.sort(key=lambda s: s[3])
    covered = sum(s[2] - s[1] for s in segs)
    if abs(covered - arc.length) > 1e-7 * (1.0 + arc.length):
        raise StructuralViolation(
            f"arc not tiled by plaques: covered {covered:.12f} of {arc.length:.12f}"
        )
    return segs


@dataclass
class ArcMeasure:
    inner: float
    outer: float
    depth: int
    boundary_cylinders: int
    segments: int

    @property
    def value(self) -> float:
        return 0.5 * (self.inner + self.outer)

    @property
    def error_bound(self) -> float:
        return 0.5 * (self.outer - self.inner)


def leaf_arc_measure(family: ConformalFamily, p: MarkovPartition, arc: UnstableArc,
                     depth: int) -> ArcMeasure:
    """Measure of an unstable arc via depth-limited cylinder covers.

    Cylinders fully inside the arc contribute exactly (their refinements
    telescope by harmonicity), so only the <= 2 boundary chains per plaque
    segment are descended; the inner/outer gap is the sum of the unresolved
    boundary cylinders' masses, at most (#boundary) * e^{-depth h} * max psi.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    lam_u = p.auto.lam_u
    wh = math.exp(-family.h)
    acc = {"inner": 0.0, "outer": 0.0, "boundary": 0}

    def descend(rid: StateId, lo: float, hi: float, d: int, weight: float) -> None:
        r = p.rect(rid)
        lo, hi = max(lo, 0.0), min(hi, r.u_extent)
        if hi - lo <= 1e-15:
            return
        if hi - lo >= r.u_extent - 1e-12:
            m = weight * family.psi_of(rid)
            acc["inner"] += m
            acc["outer"] += m
            return
        if d == 0:
            acc["outer"] += weight * family.psi_of(rid)
            acc["boundary"] += 1
            return
        for (a, b), cross in _succ_crossings(p, rid):
            child_w = p.rect(b).u_extent / lam_u
            c_lo, c_hi = cross.u_offset, cross.u_offset + child_w
            ov_lo, ov_hi = max(lo, c_lo), min(hi, c_hi)
            if ov_hi - ov_lo > 1e-15:
                descend(b, (ov_lo - c_lo) * lam_u, (ov_hi - c_lo) * lam_u,
                        d - 1, weight * wh)

    segs = _plaque_segments(p, arc)
    for rid, lo, hi, _ in segs:
        descend(rid, lo, hi, depth, 1.0)
    return ArcMeasure(acc["inner"], acc["outer"], depth, acc["boundary"], len(segs))


def _succ_crossings(p: MarkovPartition, rid: StateId):
    return [((rid, b), p.crossings[(rid, b)]) for b in p.graph.successors(rid)]


def stable_holonomy(p: MarkovPartition, arc: UnstableArc, target_xy: Vec) -> UnstableArc:
    """Slide an arc along the stable direction onto the target's leaf.

    For a linear map this is a rigid translation parallel to e_s, so the
    endpoint parameters are unchanged.
    """
    base_us = p.auto.to_eigen(np.array(arc.base))
    target_us = p.auto.to_eigen(np.asarray(target_xy, dtype=float))
    ds = target_us[1] - base_us[1]
    new_base = (np.array(arc.base) + ds * p.auto.e_s) % 1.0
    return UnstableArc(tuple(new_base.tolist()), arc.t0, arc.t1)


@dataclass
class HolonomyReport:
    depths: list[int]
    discrepancies: list[float]
    combined_bounds: list[float]
    passed: bool


def holonomy_invariance_check(family: ConformalFamily, p: MarkovPartition,
                              arc: UnstableArc, target_xy: Vec,
                              depths: Sequence[int] = (4, 8, 12)) -> HolonomyReport:
    """Measures of holonomy-related arcs agree within the truncation bounds.

    The certified bound (sum of both arcs' inner/outer gaps) decays like
    e^{-depth h} because the boundary-cylinder masses do.
    """
    image = stable_holonomy(p, arc, target_xy)
    discrepancies, bounds = [], []
    for d in depths:
        m1 = leaf_arc_measure(family, p, arc, d)
        m2 = leaf_arc_measure(family, p, image, d)
        discrepancies.append(abs(m1.value - m2.value))
        bounds.append(m1.error_bound + m2.error_bound)
    passed = all(d <= b + 1e-15 for d, b in zip(discrepancies, bounds))
    return HolonomyReport(list(depths), discrepancies, bounds, passed)


# ---------------------------------------------------------------------------
# intersection counts, conformal scaling, coordinates
# ---------------------------------------------------------------------------

def _matrix_power(m: Sequence[Sequence[int]], k: int) -> list[list[int]]:
    out = [[1, 0], [0, 1]]
    base = [list(map(int, row)) for row in m]
    for _ in range(k):
        out = [
            [out[0][0] * base[0][0] + out[0][1] * base[1][0],
             out[0][0] * base[0][1] + out[0][1] * base[1][1]],
            [out[1][0] * base[0][0] + out[1][1] * base[1][0],
             out[1][0] * base[0][1] + out[1][1] * base[1][1]],
        ]
    return out


def intersection_count(p: MarkovPartition, arc: UnstableArc, i: int,
                       anchor_xy: Vec, anchor_symbol: StateId) -> int:
    """|arc ∩ f^-i(stable plaque through the anchor)| by lattice enumeration.

    The plaque is the full stable side of the anchor's rectangle; the anchor
    must be an interior (periodic) point.  Intersections are transversal for
    a linear map, and the half-open conventions make the count exact.
    """
    if i < 0:
        raise ValueError("i must be >= 0")
    rid, _, _ = locate(p, anchor_xy)
    if rid != anchor_symbol:
        raise ValueError(f"anchor lies in {rid!r}, not {anchor_symbol!r}")
    r = p.rect(anchor_symbol)
    anchor_us = p.auto.to_eigen(np.asarray(anchor_xy, dtype=float) % 1.0)
    # chart representative of the anchor
    rep = None
    for T, te in _chart_translates(p, r):
        u_rel = anchor_us[0] - te[0] - r.corner[0]
        s_rel = anchor_us[1] - te[1] - r.corner[1]
        if -1e-12 <= u_rel <= r.u_extent + 1e-12 and -1e-12 <= s_rel <= r.s_extent + 1e-12:
            rep = (anchor_us[0] - te[0], r.corner[1], r.corner[1] + r.s_extent)
            break
    if rep is None:
        raise ValueError("anchor could not be charted")
    u_a, s_lo, s_hi = rep

    base_us = p.auto.to_eigen(np.array(arc.base))
    u_b, s_b = float(base_us[0]), float(base_us[1])
    lam_u, lam_s = p.auto.lam_u, p.auto.lam_s
    Lu = lam_u ** i
    Ls = lam_s ** i
    # conditions on the lattice translate T:
    #   u(T) in [Lu*(u_b + t0) - u_a, Lu*(u_b + t1) - u_a)   (t in [t0, t1))
    #   s(T) in (Ls*s_b - s_hi, Ls*s_b - s_lo]
    U = (Lu * (u_b + arc.t0) - u_a, Lu * (u_b + arc.t1) - u_a)
    S = (Ls * s_b - s_hi, Ls * s_b - s_lo)
    Ei = p.auto.basis_inv
    corners = [p.auto.to_xy(np.array([u, s])) for u in U for s in S]
    arr = np.array(corners)
    m_lo, m_hi = math.floor(arr[:, 0].min()) - 1, math.ceil(arr[:, 0].max()) + 1
    count = 0
    for mm in range(m_lo, m_hi + 1):
        # bound n by both strip conditions, then verify each candidate exactly:
        # u(T) = Ei[0,0] m + Ei[0,1] n ; s(T) = Ei[1,0] m + Ei[1,1] n
        nu = _strip_range(Ei[0, 1], U[0] - Ei[0, 0] * mm, U[1] - Ei[0, 0] * mm)
        ns = _strip_range(Ei[1, 1], S[0] - Ei[1, 0] * mm, S[1] - Ei[1, 0] * mm)
        lo = max(nu[0], ns[0])
        hi = min(nu[1], ns[1])
        for nn in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1):
            uT = Ei[0, 0] * mm + Ei[0, 1] * nn
            sT = Ei[1, 0] * mm + Ei[1, 1] * nn
            if U[0] - 1e-9 <= uT < U[1] - 1e-9 and S[0] + 1e-9 < sT <= S[1] + 1e-9:
                count += 1
    return count


def _strip_range(coef: float, lo: float, hi: float) -> tuple[float, float]:
    if coef == 0:
        return (-math.inf, math.inf) if lo <= 0 <= hi else (math.inf, -math.inf)
    a, b = lo / coef, hi / coef
    return (min(a, b), max(a, b))


@dataclass
class LeafConformalityReport:
    k: int
    ratio: float
    expected: float
    rel_err: float
    bound: float


def conformality_on_leaves(family: ConformalFamily, p: MarkovPartition,
                           arc: UnstableArc, k: int, depth: int = 14) -> LeafConformalityReport:
    """measure(f^k(arc)) = e^{k h} measure(arc) within the truncation bounds."""
    if k < 0:
        raise ValueError("k must be >= 0")
    Ak = _matrix_power(p.auto.matrix, k)
    base_img = (np.array(Ak, dtype=float) @ np.array(arc.base)) % 1.0
    lam_k = p.auto.lam_u ** k
    img = UnstableArc(tuple(base_img.tolist()), arc.t0 * lam_k, arc.t1 * lam_k)
    m0 = leaf_arc_measure(family, p, arc, depth)
    mk = leaf_arc_measure(family, p, img, depth)
    expected = math.exp(k * family.h)
    ratio = mk.value / m0.value
    rel_err = abs(ratio / expected - 1.0)
    bound = (mk.error_bound + expected * m0.error_bound) / max(m0.value * expected, 1e-300)
    return LeafConformalityReport(k, ratio, expected, rel_err, bound)


def periodic_ray_divergence(family: ConformalFamily, p: MarkovPartition,
                            point_xy: Vec, direction: int, K: int,
                            seed_len: float = 0.3, depth: int = 12,
                            max_period: int = 12) -> list[float]:
    """trace[k] = measure(f^k(seed ray segment)) = e^{k h} * trace[0].

    The base point must be periodic; conformality makes the growth exact on
    the formula path, so the trace exceeds any bound for k large.
    """
    q = np.asarray(point_xy, dtype=float) % 1.0
    A = np.array(p.auto.matrix, dtype=float)
    z = q.copy()
    period = 0
    for t in range(1, max_period + 1):
        z = (A @ z) % 1.0
        d = np.abs(z - q)
        if np.max(np.minimum(d, 1.0 - d)) < 1e-9:
            period = t
            break
    if period == 0:
        raise ValueError(f"point {point_xy} is not periodic up to period {max_period}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    t0, t1 = (0.0, seed_len) if direction == 1 else (-seed_len, 0.0)
    m0 = leaf_arc_measure(family, p, UnstableArc(tuple(q.tolist()), t0, t1), depth).value
    return [math.exp(k * family.h) * m0 for k in range(K + 1)]


def _monotone_arc_solve(measure_fn, target: float, tol: float, max_len: float = 64.0) -> float:
    """Solve measure([0, alpha]) = target by bracketing + bisection."""
    if target < 0:
        raise ValueError("coordinates must be >= 0")
    if target == 0:
        return 0.0
    hi = 1.0
    while measure_fn(hi) < target:
        hi *= 2.0
        if hi > max_len:
            raise ValueError(
                f"coordinate {target} exceeds the measurable leaf mass within length {max_len}"
            )
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if measure_fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class MargulisPoint:
    point: tuple[float, float]   # torus representative of z
    alpha: float                 # arc-length parameter along e_u
    gamma: float                 # arc-length parameter along e_s


def margulis_coordinates(family_u: ConformalFamily, p: MarkovPartition,
                         family_s: ConformalFamily, p_inv: MarkovPartition,
                         fixed_xy: Vec, x: float, y: float,
                         tol: float = 1e-9, depth: int = 16) -> MargulisPoint:
    """The point z with unstable-measure coordinate x and stable coordinate y.

    z = fixed + alpha e_u + gamma e_s where the arc from the stable axis to z
    along its unstable leaf has measure x (holonomy invariance makes this
    independent of gamma, so alpha solves a single monotone equation), and
    symmetrically for y on the stable side via the inverse-map model.
    Solved by bracketing and bisection on the monotone leaf measures.
    """
    fp = np.asarray(fixed_xy, dtype=float) % 1.0

    def mu_u(alpha: float) -> float:
        return leaf_arc_measure(family_u, p, UnstableArc(tuple(fp.tolist()), 0.0, alpha),
                                depth).value

    alpha = _monotone_arc_solve(mu_u, x, tol)
    # the stable axis of p is the unstable axis of the inverse model, up to sign
    sgn = 1.0 if float(np.dot(p.auto.e_s, p_inv.auto.e_u)) >= 0 else -1.0

    def mu_s(g: float) -> float:
        arc_lo, arc_hi = (0.0, g * sgn) if g * sgn >= 0 else (g * sgn, 0.0)
        return leaf_arc_measure(family_s, p_inv,
                                UnstableArc(tuple(fp.tolist()), arc_lo, arc_hi), depth).value

    gamma = _monotone_arc_solve(mu_s, y, tol)
    z = (fp + alpha * p.auto.e_u + gamma * p.auto.e_s) % 1.0
    return MargulisPoint((float(z[0]), float(z[1])), alpha, gamma)


# ---------------------------------------------------------------------------
# fiber bound
# ---------------------------------------------------------------------------

@dataclass
class FiberReport:
    max_fiber: int
    bound: int
    samples: int
    boundary_max: int
    interior_unique_fraction: float

    @property
    def passed(self) -> bool:
        return self.max_fiber <= self.bound


def fiber_bound_check(p: MarkovPartition, samples: int, seed: int = 0,
                      n: int = 6, boundary_points: int = 24) -> FiberReport:
    """Max coding-fiber size over random and constructed boundary points.

    The bound is (degree_bound + 1)^2 - 1 for the partition's transition
    graph.  Boundary points are placed on unstable-side boundaries and must
    be multiply coded.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = [rng.random(2) for _ in range(samples)]
    extra = []
    for j in range(boundary_points):
        r = p.rectangles[j % len(p.rectangles)]
        frac = (j + 0.5) / boundary_points
        side = 0.0 if (j // len(p.rectangles)) % 2 == 0 else r.s_extent
        us = np.array([r.corner[0] + frac * r.u_extent, r.corner[1] + side])
        extra.append(p.auto.to_xy(us) % 1.0)

    bound = (p.graph.degree_bound + 1) ** 2 - 1
    max_fiber = 0
    unique = 0
    for q in pts:
        k = len(code_point(p, q, n))
        max_fiber = max(max_fiber, k)
        unique += k == 1
    boundary_max = 0
    for q in extra:
        k = len(code_point(p, q, n))
        boundary_max = max(boundary_max, k)
        max_fiber = max(max_fiber, k)
    return FiberReport(max_fiber, bound, samples, boundary_max, unique / samples)
