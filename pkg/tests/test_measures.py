import math

import pytest
from hypothesis import given, settings, strategies as st

from margulis.fixtures import PHI, get_fixture
from margulis.graphs import Cylinder
from margulis.measures import (
    conformality_check,
    cylinder_measure,
    cylinder_probability,
    global_leaf_measure,
    iter_cylinders,
    make_family,
    periodic_ray_mass,
    support_check,
    symbolic_holonomy_check,
)

LOG2 = math.log(2.0)


def golden_family():
    return get_fixture("golden-mean").family()


def test_make_family_total_masses():
    assert golden_family().total_mass("0") == pytest.approx(PHI)
    assert get_fixture("full-2").family().total_mass("1") == 1.0
    assert get_fixture("renewal").family().total_mass("b") == 1.0


def test_make_family_rejects_nonpositive_psi():
    g = get_fixture("full-2").graph()
    with pytest.raises(ValueError, match="positive"):
        make_family(g, LOG2, {"0": 1.0, "1": 0.0})
    with pytest.raises(ValueError):
        make_family(g, -1.0, {"0": 1.0, "1": 1.0})


def test_cylinder_measure_golden_identities():
    fam = golden_family()
    m0 = cylinder_measure(fam, "0", ["0"]).value
    m1 = cylinder_measure(fam, "0", ["1"]).value
    assert m0 == pytest.approx(1.0, abs=1e-15)          # e^-h phi = 1
    assert m1 == pytest.approx(1.0 / PHI, abs=1e-15)
    assert m0 + m1 == pytest.approx(PHI, abs=1e-15)     # children sum to psi(0)


def test_cylinder_measure_full_shift():
    fam = get_fixture("full-2").family()
    for fut in (["0"], ["0", "1"], ["1", "1", "0"]):
        assert cylinder_measure(fam, "0", fut).value == pytest.approx(0.5 ** len(fut))


def test_cylinder_measure_renewal_loop():
    fam = get_fixture("renewal").family()
    v = cylinder_measure(fam, "b", ["l(3,1)", "l(3,2)", "b"])
    assert v.value == pytest.approx(1 / 8, abs=1e-16)
    assert v.depth == 3


def test_cylinder_measure_empty_future():
    fam = golden_family()
    v = cylinder_measure(fam, "0")
    assert v.value == pytest.approx(PHI) and v.depth == 0


def test_cylinder_measure_inadmissible():
    with pytest.raises(ValueError, match="inadmissible"):
        cylinder_measure(golden_family(), "1", ["1"])


def test_cylinder_probability():
    fam = golden_family()
    p0 = cylinder_probability(fam, "0", ["0"])
    p1 = cylinder_probability(fam, "0", ["1"])
    assert p0 == pytest.approx(1 / PHI, abs=1e-15)
    assert p1 == pytest.approx(1 / PHI ** 2, abs=1e-15)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-15)
    full = get_fixture("full-2").family()
    assert cylinder_probability(full, "1", ["0", "0", "1"]) == pytest.approx(0.125)
    renewal = get_fixture("renewal").family()
    assert cylinder_probability(renewal, "b", ["l(4,1)", "l(4,2)", "l(4,3)", "b"]) \
        == pytest.approx(2.0 ** -4)


@pytest.mark.parametrize("name,depth", [("golden-mean", 6), ("full-2", 8), ("renewal", 6)])
def test_conformality(name, depth):
    fx = get_fixture(name)
    rep = conformality_check(fx.family(), fx.base, depth, tol=1e-12)
    assert rep.passed, rep
    assert rep.max_discrepancy < 1e-12


def test_conformality_detects_perturbed_psi():
    fam = make_family(get_fixture("golden-mean").graph(), math.log(PHI),
                      {"0": PHI * 1.01, "1": 1.0})
    rep = conformality_check(fam, "0", 4, tol=1e-12)
    assert not rep.passed
    assert rep.max_discrepancy > 1e-3


def test_full_support():
    for name in ("golden-mean", "full-2", "renewal"):
        fx = get_fixture(name)
        assert support_check(fx.family(), fx.base, 6)


def test_symbolic_holonomy_same_root():
    fam = golden_family()
    rep = symbolic_holonomy_check(fam, "0", "0", 6)
    assert rep.max_discrepancy == 0.0 and rep.passed


def test_symbolic_holonomy_identical_trees():
    fam = get_fixture("full-2").family()
    rep = symbolic_holonomy_check(fam, "0", "1", 5)
    assert rep.max_discrepancy == 0.0


def test_symbolic_holonomy_rejects_distinct_roots():
    fam = golden_family()
    with pytest.raises(ValueError, match="precondition"):
        symbolic_holonomy_check(fam, "0", "1", 4)


# -- Kolmogorov consistency as a property --------------------------------------

@given(st.integers(0, 40))
@settings(max_examples=30, deadline=None)
def test_kolmogorov_consistency_random_cylinders(index):
    fam = golden_family()
    futures = [fut for fut in iter_cylinders(fam.graph, "0", 6)]
    fut = futures[index % len(futures)]
    parent = cylinder_measure(fam, "0", fut).value
    last = fut[-1] if fut else "0"
    children = sum(cylinder_measure(fam, "0", fut + (s,)).value
                   for s in fam.graph.successors(last))
    assert children == pytest.approx(parent, abs=1e-12)


# -- global leaves --------------------------------------------------------------

def test_global_leaf_full_shift_constant_arc_trace():
    fam = get_fixture("full-2").family()
    # arc = everything over the root: both roots' unit cylinders
    arc = [Cylinder("0", ())]
    tr = global_leaf_measure(fam, ["0", "0", "0", "0"], arc, 3)
    assert tr.arc_values == pytest.approx([1.0, 1.0, 1.0, 1.0], abs=1e-12)
    assert tr.extension_counts == [1, 2, 4, 8]
    # e^{mh} psi plays against 2^m extensions: mass trace grows
    assert tr.mass_values == pytest.approx([1.0, 2.0, 4.0, 8.0], abs=1e-12)


def test_global_leaf_golden_nondecreasing():
    fam = golden_family()
    arc = [Cylinder("0", ())]
    tr = global_leaf_measure(fam, ["0", "0", "0", "0"], arc, 3)
    for a, b in zip(tr.arc_values, tr.arc_values[1:]):
        assert b >= a - 1e-12
    for a, b in zip(tr.mass_values, tr.mass_values[1:]):
        assert b >= a - 1e-12
    # extensions counted by admissible words into the truncated past
    assert tr.extension_counts[0] == 1
    assert tr.extension_counts[1] == 2   # 0->0, 0->1


def test_global_leaf_renewal_mass_grows_unboundedly():
    fam = get_fixture("renewal").family()
    k = 6
    past = ["b"] * (k + 1)
    tr = global_leaf_measure(fam, past, [Cylinder("b", ())], k)
    for m in range(k + 1):
        assert tr.mass_values[m] == pytest.approx(2.0 ** m, rel=1e-9)


def test_global_leaf_rejects_inadmissible_past():
    fam = golden_family()
    with pytest.raises(ValueError, match="inadmissible past"):
        global_leaf_measure(fam, ["1", "1", "0"], [Cylinder("0", ())], 1)
    with pytest.raises(ValueError, match="past length"):
        global_leaf_measure(fam, ["0", "0"], [Cylinder("0", ())], 5)


def test_periodic_ray_mass():
    full = get_fixture("full-2").family()
    assert periodic_ray_mass(full, ["0", "0"], 10) == pytest.approx(2.0 ** 10)
    golden = golden_family()
    # two-edge loop at 0, five traversals: e^{5*2*h} psi(0) = phi^11
    assert periodic_ray_mass(golden, ["0", "0", "0"], 5) == pytest.approx(PHI ** 11, rel=1e-12)
    assert periodic_ray_mass(golden, ["0", "1", "0"], 5) == pytest.approx(PHI ** 11, rel=1e-12)
    assert periodic_ray_mass(golden, ["0", "0"], 0) == pytest.approx(PHI)
    with pytest.raises(ValueError, match="loop"):
        periodic_ray_mass(golden, ["0", "1"], 2)
