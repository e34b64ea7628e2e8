"""Finite topological spaces with open sets stored as bitmasks."""
from dataclasses import dataclass
from itertools import combinations


class TopologyViolation(ValueError):
    """A candidate open-set family breaks one of the topology axioms."""

    axiom = "topology"

    def __init__(self, message, witness=()):
        super().__init__(message)
        self.witness = tuple(witness)


class MissingEmpty(TopologyViolation):
    axiom = "missing_empty"


class MissingWhole(TopologyViolation):
    axiom = "missing_whole"


class NotClosedUnderUnion(TopologyViolation):
    axiom = "not_closed_under_union"


class NotClosedUnderIntersection(TopologyViolation):
    axiom = "not_closed_under_intersection"


class UnknownPoint(KeyError):
    pass


def popcount(mask):
    return bin(mask).count("1")


@dataclass(frozen=True)
class FiniteTopology:
    points: tuple
    opens: frozenset

    # ------------------------------------------------------------------ #
    @property
    def full(self):
        return (1 << len(self.points)) - 1

    def index(self, x):
        try:
            return self.points.index(str(x))
        except ValueError:
            raise UnknownPoint(x) from None

    def mask(self, subset):
        m = 0
        for x in subset:
            m |= 1 << self.index(x)
        return m

    def labels(self, mask):
        return tuple(p for i, p in enumerate(self.points) if mask >> i & 1)

    def indices(self, mask):
        return tuple(i for i in range(len(self.points)) if mask >> i & 1)

    def is_open(self, subset):
        m = subset if isinstance(subset, int) else self.mask(subset)
        return m in self.opens

    def sorted_opens(self):
        """Opens ordered by size, then by their point indices."""
        return sorted(self.opens, key=lambda m: (popcount(m), self.indices(m)))

    def neighborhoods(self, x):
        """Opens containing ``x``, ascending by inclusion where comparable."""
        bit = 1 << self.index(x)
        return [self.labels(m) for m in self.sorted_opens() if m & bit]

    def smallest_neighborhood(self, x):
        bit = 1 << self.index(x)
        m = self.full
        for u in self.opens:
            if u & bit:
                m &= u
        return self.labels(m)

    def is_discrete(self):
        return len(self.opens) == 1 << len(self.points)

    def is_lattice(self):
        """Check meet = intersection and join = union against the inclusion order."""
        opens = list(self.opens)
        for u, v in combinations(opens, 2):
            meet, join = u & v, u | v
            if meet not in self.opens or join not in self.opens:
                return False
            lower = [w for w in opens if w & u == w and w & v == w]
            upper = [w for w in opens if w & u == u and w & v == v]
            if any(w & meet != w for w in lower) or any(join & w != join for w in upper):
                return False
        return True

    def to_obj(self):
        return {"points": list(self.points),
                "opens": [list(self.labels(m)) for m in self.sorted_opens()]}


def _masks(points, subsets):
    pos = {p: i for i, p in enumerate(points)}
    out = []
    for s in subsets:
        m = 0
        for x in s:
            if str(x) not in pos:
                raise UnknownPoint(x)
            m |= 1 << pos[str(x)]
        out.append(m)
    return out


def validate(points, candidate_opens):
    """Build a :class:`FiniteTopology` or raise the first violated axiom.

    Axioms are checked in the order: empty set, whole set, pairwise unions,
    pairwise intersections. The exception carries the offending sets as
    ``witness`` (tuples of point labels).
    """
    points = tuple(str(p) for p in points)
    if len(set(points)) != len(points):
        raise ValueError("duplicate point labels")
    if len(points) > 64:
        raise ValueError("at most 64 points are supported")
    masks = _masks(points, candidate_opens)
    opens = frozenset(masks)
    topo = FiniteTopology(points, opens)
    full = topo.full
    if 0 not in opens:
        raise MissingEmpty("the empty set is not open")
    if full not in opens:
        raise MissingWhole("the whole space is not open", [points])
    ordered = topo.sorted_opens()
    for u, v in combinations(ordered, 2):
        if u | v not in opens:
            raise NotClosedUnderUnion(
                f"union of {topo.labels(u)} and {topo.labels(v)} is not open",
                [topo.labels(u), topo.labels(v)])
    for u, v in combinations(ordered, 2):
        if u & v not in opens:
            raise NotClosedUnderIntersection(
                f"intersection of {topo.labels(u)} and {topo.labels(v)} is not open",
                [topo.labels(u), topo.labels(v)])
    return topo


def generate_from_basis(points, basis):
    """Smallest topology on ``points`` in which every member of ``basis`` is open."""
    points = tuple(str(p) for p in points)
    full = (1 << len(points)) - 1
    opens = {0, full, *_masks(points, basis)}
    frontier = set(opens)
    while frontier:
        new = set()
        for u in frontier:
            for v in opens:
                for w in (u | v, u & v):
                    if w not in opens:
                        new.add(w)
        opens |= new
        frontier = new
    return FiniteTopology(points, frozenset(opens))


def discrete(points):
    return generate_from_basis(points, [[p] for p in points])


def indiscrete(points):
    return generate_from_basis(points, [])


@dataclass(frozen=True)
class OpenCover:
    topology: FiniteTopology
    members: tuple

    def __post_init__(self):
        masks = [self.topology.mask(m) for m in self.members]
        for m, raw in zip(masks, self.members):
            if m not in self.topology.opens:
                raise ValueError(f"cover member {tuple(raw)} is not open")
        union = 0
        for m in masks:
            union |= m
        if union != self.topology.full:
            raise ValueError("cover does not exhaust the space")

    def is_disjoint(self):
        masks = [self.topology.mask(m) for m in self.members]
        return all(u & v == 0 for u, v in combinations(masks, 2))


def topology_from_obj(obj):
    return validate(obj["points"], obj["opens"])
