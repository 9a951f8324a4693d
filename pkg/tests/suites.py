"""Shared problem suites for the module tests and the acceptance run."""
from fractions import Fraction

from ymloops.lattice import LoopWord, build_lattice, plaquette_loop
from ymloops.unitary_rep import HighestWeight
from ymloops.weingarten import WordSpec, cyclic_reduce, parse_word


def hw(plus, minus, N):
    return HighestWeight(tuple(plus), tuple(minus), N)


def fund(N):
    return HighestWeight.fundamental(N)


def adj(N):
    return hw((1,), (1,), N)


def spec(words, labels):
    return WordSpec([parse_word(w) for w in words], labels)


# (name, spec, exact value or None); known values follow from Schur
# orthogonality and the commutator identity int int chi([x, y]) = 1 / dim
def word_suite():
    return [
        ("commutator-adj-N2", spec(["x y X Y"], [adj(2)]), Fraction(1, 3)),
        ("commutator-adj-N3", spec(["x y X Y"], [adj(3)]), Fraction(1, 8)),
        ("commutator-fund-N2", spec(["x y X Y"], [fund(2)]), Fraction(1, 2)),
        ("commutator-fund-N3", spec(["x y X Y"], [fund(3)]), Fraction(1, 3)),
        ("commutator-sym2-N2", spec(["x y X Y"], [hw((2,), (), 2)]), Fraction(1, 3)),
        ("pair-fund-N2", spec(["x", "X"], [fund(2), fund(2)]), Fraction(1)),
        ("pair-dual-N3", spec(["x", "x"], [fund(3), fund(3).dual()]), Fraction(1)),
        ("pair-sym2-N2", spec(["x", "X"], [hw((2,), (), 2)] * 2), Fraction(1)),
        ("fourth-moment-N2", spec(["x", "x", "X", "X"], [fund(2)] * 4), Fraction(2)),
        ("adj-xy-N3", spec(["x y"], [adj(3)]), Fraction(0)),
        ("two-words-N2", spec(["x y", "Y X"], [fund(2), fund(2)]), Fraction(1)),
        ("twin-commutators-N2", spec(["x y X Y", "y x Y X"], [fund(2), fund(2).dual()]), None),
    ]


def rect(lat):
    """Boundary of the whole (planar) lattice as one reduced loop."""
    w = []
    for b in lat.boundaries:
        w += list(b)
    return LoopWord(tuple(cyclic_reduce(w)))


def lattice_suite(extents):
    """Small loop families on a planar lattice."""
    lat = build_lattice(2, extents)
    P = len(lat.boundaries)
    fams = {
        "empty": [],
        "plaquette": [plaquette_loop(lat, 0)],
        "last-inverse": [plaquette_loop(lat, P - 1, inverse=True)],
        "rectangle": [rect(lat)],
    }
    return lat, fams
