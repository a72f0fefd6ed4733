import math

import numpy as np
import pytest

from margulis.thermo import gurevich_entropy, harmonic_finite
from margulis.torus import (
    Rectangle,
    UnstableArc,
    builtin_partition,
    code_point,
    conformality_on_leaves,
    cylinder_image_arc,
    decode,
    fiber_bound_check,
    full_u_side_arc,
    holonomy_invariance_check,
    intersection_count,
    inverse_partition,
    leaf_arc_measure,
    make_automorphism,
    margulis_coordinates,
    memberships,
    partition_family,
    periodic_ray_divergence,
    stable_holonomy,
    validate_partition,
)

LAM_CAT = (3 + math.sqrt(5)) / 2
PHI = (1 + math.sqrt(5)) / 2


@pytest.fixture(scope="module")
def cat():
    return builtin_partition("cat-adler-weiss")


@pytest.fixture(scope="module")
def cat_family(cat):
    return partition_family(cat)


# -- automorphisms -------------------------------------------------------------

def test_make_automorphism_cat():
    auto = make_automorphism([[2, 1], [1, 1]])
    assert auto.lam_u == pytest.approx(LAM_CAT, abs=1e-14)
    assert auto.lam_s == pytest.approx(1 / LAM_CAT, abs=1e-14)
    A = np.array(auto.matrix, dtype=float)
    assert np.max(np.abs(A @ auto.e_u - auto.lam_u * auto.e_u)) < 1e-13


def test_make_automorphism_fibonacci_det_minus_one():
    auto = make_automorphism([[1, 1], [1, 0]])
    assert auto.lam_u == pytest.approx(PHI, abs=1e-14)
    assert auto.lam_s == pytest.approx(-1 / PHI, abs=1e-14)


def test_make_automorphism_rejects_parabolic():
    with pytest.raises(ValueError, match="hyperbolic"):
        make_automorphism([[1, 1], [0, 1]])


def test_make_automorphism_rejects_non_unimodular():
    with pytest.raises(ValueError, match="unimodular"):
        make_automorphism([[2, 0], [0, 2]])


def test_make_automorphism_rejects_non_integer():
    with pytest.raises(ValueError, match="integer"):
        make_automorphism([[2.5, 1], [1, 1]])


# -- partition ------------------------------------------------------------------

def test_builtin_partition_validates(cat):
    rep = validate_partition(cat.auto, cat.rectangles, tol=1e-9)
    assert rep.ok
    assert rep.area_total == pytest.approx(1.0, abs=1e-12)
    assert rep.max_u_cross_err < 1e-9 and rep.max_s_fit_err < 1e-9


def test_builtin_partition_unknown_name():
    with pytest.raises(ValueError, match="unknown builtin"):
        builtin_partition("weiss-adler")


def test_partition_spectral_radius_matches_lam_u(cat):
    est = gurevich_entropy(cat.graph, "R1", 40, "ratio")
    assert abs(est.value - math.log(LAM_CAT)) < 1e-9


def test_partition_rejects_shrunk_rectangle(cat):
    rects = list(cat.rectangles)
    r = rects[0]
    rects[0] = Rectangle(r.id, r.corner, r.u_extent * 0.99, r.s_extent)
    rep = validate_partition(cat.auto, rects, tol=1e-9)
    assert not rep.ok
    assert any("Markov violation" in w or "overlap" in w or "area" in w
               for w in rep.witnesses)


def test_partition_rejects_whole_torus_square(cat):
    # a single unit square is not a proper partition rectangle for the cat map
    big = [Rectangle("Q", (0.0, 0.0), 1.2, 1.2)]
    rep = validate_partition(cat.auto, big, tol=1e-9)
    assert not rep.ok


def test_u_extents_are_perron_eigenvector(cat):
    hf = harmonic_finite(cat.graph, "R1")
    scale = cat.rect("R1").u_extent
    for r in cat.rectangles:
        assert r.u_extent / scale == pytest.approx(hf.values[r.id], abs=1e-10)


# -- coding ----------------------------------------------------------------------

def test_code_point_fixed_point_constant_itinerary(cat):
    its = code_point(cat, np.array([0.0, 0.0]), 4)
    assert any(len(set(it.symbols)) == 1 for it in its)
    assert 1 <= len(its) <= (cat.graph.degree_bound + 1) ** 2 - 1


def test_code_point_generic_unique_and_round_trip(cat):
    rng = np.random.default_rng(42)
    unique = 0
    for _ in range(1000):
        x = rng.random(2)
        its = code_point(cat, x, 8)
        unique += len(its) == 1
        for it in its:
            d = np.abs(np.array(it.center_estimate) - x)
            d = np.minimum(d, 1.0 - d)
            assert math.hypot(*d) <= it.radius + 1e-9
    assert unique >= 990


def test_code_point_boundary_multiple(cat):
    r = cat.rect("R2")
    us = np.array([r.corner[0] + 0.37 * r.u_extent, r.corner[1]])  # on an unstable side
    xy = cat.auto.to_xy(us) % 1.0
    its = code_point(cat, xy, 5)
    assert 2 <= len(its) <= (cat.graph.degree_bound + 1) ** 2 - 1


def test_decode_radius_shrinks(cat):
    its = code_point(cat, np.array([0.3, 0.4]), 25)
    assert its[0].radius < 1e-8  # lam_u^-25 scale


def test_decode_rejects_inadmissible(cat):
    with pytest.raises(ValueError, match="empty intersection"):
        decode(cat, ["R2", "R1"], zero_index=0)  # no edge R2 -> R1


# -- leaf measures ----------------------------------------------------------------

def test_full_u_side_measure_is_psi_every_depth(cat, cat_family):
    for r in cat.rectangles:
        arc = full_u_side_arc(cat, r.id)
        for depth in (0, 3, 7):
            m = leaf_arc_measure(cat_family, cat, arc, depth)
            assert m.value == pytest.approx(cat_family.psi_of(r.id), abs=1e-14)
            assert m.error_bound == pytest.approx(0.0, abs=1e-15)


def test_cylinder_image_arc_measure(cat, cat_family):
    fut = ["R1", "R2", "R4"]
    arc = cylinder_image_arc(cat, "R1", fut)
    m = leaf_arc_measure(cat_family, cat, arc, 6)
    expected = math.exp(-3 * cat_family.h) * cat_family.psi_of("R4")
    assert m.value == pytest.approx(expected, rel=1e-12)


def test_empty_arc_measures_zero(cat, cat_family):
    m = leaf_arc_measure(cat_family, cat, UnstableArc((0.2, 0.2), 0.5, 0.5), 6)
    assert m.value == 0.0


def test_inner_outer_bracket_and_bound(cat, cat_family):
    arc = UnstableArc((0.31, 0.47), 0.0, 0.23)
    psi_max = max(cat_family.psi_of(r.id) for r in cat.rectangles)
    for depth in (3, 6, 9):
        m = leaf_arc_measure(cat_family, cat, arc, depth)
        assert m.inner <= m.outer
        assert m.outer - m.inner <= m.boundary_cylinders * math.exp(-depth * cat_family.h) * psi_max + 1e-15


def test_stable_holonomy_identity_and_translation(cat):
    arc = UnstableArc((0.3, 0.4), 0.0, 0.1)
    same = stable_holonomy(cat, arc, np.array([0.3, 0.4]))
    assert same.base == pytest.approx(arc.base)
    moved = stable_holonomy(cat, arc, np.array([0.9, 0.05]))
    # endpoints keep their u-coordinates
    bu = cat.auto.to_eigen(np.array(arc.base))[0]
    mu = cat.auto.to_eigen(np.array(moved.base))[0]
    assert (mu - bu) % 1e9 == pytest.approx((mu - bu))  # finite
    assert moved.t0 == arc.t0 and moved.t1 == arc.t1


def test_holonomy_invariance_within_and_cross(cat, cat_family):
    rng = np.random.default_rng(5)
    cross = 0
    for _ in range(30):
        base = rng.random(2)
        arc = UnstableArc((float(base[0]), float(base[1])), 0.0, 0.1 + 0.2 * float(rng.random()))
        target = rng.random(2)
        if memberships(cat, np.array(arc.base))[0][0] != memberships(cat, target)[0][0]:
            cross += 1
        rep = holonomy_invariance_check(cat_family, cat, arc, target, depths=(6, 12))
        assert rep.passed
        d6, d12 = rep.discrepancies
        assert d12 <= math.exp(-6 * cat_family.h) * d6 + 1e-14
        # certified bounds decay geometrically
        assert rep.combined_bounds[1] <= rep.combined_bounds[0] * math.exp(-6 * cat_family.h) * PHI * (1 + 1e-9)
    assert cross >= 5


# -- intersection counts ------------------------------------------------------------

def anchor(cat):
    xy = (0.8, 0.6)  # period-2 orbit point of [[2,1],[1,1]], interior
    rid = memberships(cat, np.array(xy))[0][0]
    return xy, rid


def test_anchor_is_periodic_interior(cat):
    xy, rid = anchor(cat)
    A = np.array(cat.auto.matrix, dtype=float)
    z = (A @ (A @ np.array(xy))) % 1.0
    assert np.max(np.abs(z - np.array(xy))) < 1e-12
    assert len(memberships(cat, np.array(xy))) == 1


def test_intersection_count_i0_membership(cat, cat_family):
    xy, rid = anchor(cat)
    # the plaque itself meets the full u-side of its own rectangle exactly once
    arc = full_u_side_arc(cat, rid, s_frac=1 / math.sqrt(2))
    assert intersection_count(cat, arc, 0, xy, rid) == 1
    other = next(r.id for r in cat.rectangles if r.id != rid)
    arc2 = full_u_side_arc(cat, other, s_frac=1 / math.sqrt(2))
    assert intersection_count(cat, arc2, 0, xy, rid) == 0


def test_intersection_count_equals_word_count(cat):
    from margulis.counting import count_words
    xy, rid = anchor(cat)
    arc = cylinder_image_arc(cat, "R1", ["R2", "R4", "R5"], s_frac=1 / math.sqrt(2))
    for i in (3, 6, 9):
        geo = intersection_count(cat, arc, i, xy, rid)
        sym = count_words(cat.graph, "R5", rid, i - 3).counts[i - 3]
        assert geo == sym


def test_intersection_count_growth_rate(cat):
    xy, rid = anchor(cat)
    arc = full_u_side_arc(cat, "R1", s_frac=1 / math.sqrt(2))
    ratios = []
    for i in range(8, 14):
        c = intersection_count(cat, arc, i, xy, rid)
        ratios.append(c / cat.auto.lam_u ** i)
    assert min(ratios) > 0.01
    assert max(ratios) / min(ratios) < 3.0


# -- conformal scaling and rays ------------------------------------------------------

def test_conformality_on_leaves(cat, cat_family):
    arc = full_u_side_arc(cat, "R1")
    rep = conformality_on_leaves(cat_family, cat, arc, 1)
    assert abs(rep.ratio - math.exp(cat_family.h)) < 1e-6 * rep.expected
    rep0 = conformality_on_leaves(cat_family, cat, arc, 0)
    assert rep0.ratio == 1.0
    generic = UnstableArc((0.21, 0.68), 0.0, 0.17)
    for k in (1, 5):
        rep = conformality_on_leaves(cat_family, cat, generic, k, depth=16)
        assert rep.rel_err < 1e-5


def test_periodic_ray_divergence(cat, cat_family):
    tr = periodic_ray_divergence(cat_family, cat, (0.0, 0.0), +1, K=8)
    assert tr[8] / tr[0] == pytest.approx(math.exp(8 * cat_family.h), rel=1e-12)
    assert tr[8] > 1e3 * tr[0]
    tr_neg = periodic_ray_divergence(cat_family, cat, (0.0, 0.0), -1, K=8)
    assert tr_neg[8] / tr_neg[0] == pytest.approx(tr[8] / tr[0], rel=1e-12)
    with pytest.raises(ValueError, match="periodic"):
        periodic_ray_divergence(cat_family, cat, (0.123, 0.456), +1, K=3)


# -- coordinates and fibers ------------------------------------------------------------

def test_margulis_coordinates_origin(cat, cat_family):
    p_inv = inverse_partition(cat)
    fam_s = partition_family(p_inv)
    mp = margulis_coordinates(cat_family, cat, fam_s, p_inv, (0.0, 0.0), 0.0, 0.0)
    assert mp.point == pytest.approx((0.0, 0.0), abs=1e-12)
    assert mp.alpha == 0.0 and mp.gamma == 0.0


def test_margulis_coordinates_monotone(cat, cat_family):
    p_inv = inverse_partition(cat)
    fam_s = partition_family(p_inv)
    alphas = [margulis_coordinates(cat_family, cat, fam_s, p_inv, (0.0, 0.0), x, 0.1).alpha
              for x in (0.05, 0.15, 0.3)]
    assert alphas[0] < alphas[1] < alphas[2]


def test_margulis_coordinates_range_error(cat, cat_family):
    p_inv = inverse_partition(cat)
    fam_s = partition_family(p_inv)
    with pytest.raises(ValueError, match="exceeds"):
        margulis_coordinates(cat_family, cat, fam_s, p_inv, (0.0, 0.0), 1e9, 0.0)


def test_inverse_partition_reverses_graph(cat):
    p_inv = inverse_partition(cat)
    for a in cat.graph.states:
        for b in cat.graph.states:
            assert cat.graph.has_edge(a, b) == p_inv.graph.has_edge(b, a)


def test_fiber_bound(cat):
    rep = fiber_bound_check(cat, samples=500, seed=0, n=6)
    assert rep.bound == 15  # (3+1)^2 - 1
    assert rep.max_fiber <= rep.bound
    assert rep.boundary_max >= 2
    assert rep.interior_unique_fraction > 0.99
