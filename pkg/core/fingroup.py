"""
Exact finite-group arithmetic on multiplication tables.

Elements are dense integer indices with the identity fixed at 0. Presets
ship with fixed element orderings:

- ``trivial``: the single element 0.
- ``cyclic(n)``: element i is the residue i, product is addition mod n.
- ``klein4``: index ``x + 2*y`` encodes the pair (x, y) in Z/2 x Z/2, so
  1 = (1,0), 2 = (0,1), 3 = (1,1); product is bitwise xor.
- ``symmetric(n)`` (n <= 4) and ``dihedral(n)`` (n <= 6): the permutations
  of sympy's ``SymmetricGroup(n)`` / ``DihedralGroup(n)`` sorted by array
  form (the identity sorts first). The product ``a*b`` is sympy's, i.e.
  apply ``a`` first and then ``b``.
"""

import logging
import re
from itertools import product

import networkx as nx
from sympy.combinatorics.named_groups import DihedralGroup, SymmetricGroup

from core.errors import (
    BadIdentity, ElementOutOfRange, GroupTooLarge, MissingInverse,
    NonAssociative, SubgroupParentMismatch, ValidationError,
)
from utils.config import MAX_GROUP_ORDER

logger = logging.getLogger(__name__)

_PRESET = re.compile(r"^\s*([a-z0-9]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")


class FiniteGroup:
    """A finite group given by its multiplication table."""

    def __init__(self, table, name=None, check=True, max_order=None):
        table = tuple(tuple(int(x) for x in row) for row in table)
        limit = MAX_GROUP_ORDER if max_order is None else max_order
        if len(table) > limit:
            raise GroupTooLarge(len(table), limit)
        if check:
            _check_axioms(table)
        self.table = table
        self.order = len(table)
        self.identity = 0
        self.name = name
        self.inverse = tuple(row.index(0) for row in table)

    def mul(self, a, b):
        """
        Product of two elements.

        Args:
            a: left factor, an index in 0..order-1
            b: right factor

        Returns:
            int: index of a * b
        """
        return self.table[a][b]

    def inv(self, a):
        """
        Args:
            a: element index

        Returns:
            int: index of a^-1
        """
        return self.inverse[a]

    def prod(self, *elements):
        """Left-to-right product; the empty product is 0."""
        result = 0
        for x in elements:
            result = self.table[result][x]
        return result

    def conj(self, g, x):
        """Return g x g^-1."""
        return self.table[self.table[g][x]][self.inverse[g]]

    @property
    def elements(self):
        return range(self.order)

    def check_element(self, x):
        if not isinstance(x, int) or x < 0 or x >= self.order:
            raise ElementOutOfRange(x, self.order)

    def is_abelian(self):
        return all(self.table[a][b] == self.table[b][a]
                   for a in range(self.order) for b in range(a))

    def element_order(self, a):
        x, n = a, 1
        while x != 0:
            x = self.table[x][a]
            n += 1
        return n

    def whole(self):
        return Subgroup(self, range(self.order), check=False)

    def trivial_subgroup(self):
        return Subgroup(self, (0,), check=False)

    def __len__(self):
        return self.order

    def __eq__(self, other):
        return isinstance(other, FiniteGroup) and self.table == other.table

    def __hash__(self):
        return hash(self.table)

    def __repr__(self):
        return f"FiniteGroup({self.name or 'order ' + str(self.order)})"


def _check_axioms(table):
    n = len(table)
    if n < 1:
        raise ValidationError("group table", ["table must have at least one row"])
    for row in table:
        if len(row) != n:
            raise ValidationError("group table", ["table is not square"])
        for x in row:
            if x < 0 or x >= n:
                raise ElementOutOfRange(x, n)
    for a in range(n):
        if table[0][a] != a or table[a][0] != a:
            raise BadIdentity(a)
    for a in range(n):
        row = table[a]
        if 0 not in row:
            raise MissingInverse(a)
        b = row.index(0)
        if table[b][a] != 0:
            raise MissingInverse(a)
    for a, b, c in product(range(n), repeat=3):
        if table[a][table[b][c]] != table[table[a][b]][c]:
            raise NonAssociative(a, b, c)


def _table_from_permutations(perms):
    perms = sorted(perms, key=lambda p: p.array_form)
    index = {tuple(p.array_form): i for i, p in enumerate(perms)}
    return [[index[tuple((a * b).array_form)] for b in perms] for a in perms]


def make_group(spec, max_order=None):
    """Build a validated FiniteGroup from a table, a preset name or a JSON fragment."""
    if isinstance(spec, FiniteGroup):
        return spec
    if isinstance(spec, dict):
        if "preset" in spec:
            return make_group(spec["preset"], max_order=max_order)
        if "table" in spec:
            return FiniteGroup(spec["table"], name=spec.get("name"), max_order=max_order)
        raise ValidationError("group", ["expected 'preset' or 'table'"])
    if isinstance(spec, str):
        return _preset(spec, max_order)
    return FiniteGroup(spec, max_order=max_order)


def _preset(text, max_order):
    match = _PRESET.match(text)
    if not match:
        raise ValidationError("group preset", [f"cannot read preset '{text}'"])
    kind, arg = match.group(1), match.group(2)
    n = int(arg) if arg is not None else None
    if kind == "trivial":
        return FiniteGroup([[0]], name="trivial", check=False)
    if kind == "klein4":
        return FiniteGroup([[i ^ j for j in range(4)] for i in range(4)], name="klein4", check=False)
    if n is None or n < 1:
        raise ValidationError("group preset", [f"preset '{kind}' needs a positive argument"])
    if kind == "cyclic":
        return FiniteGroup([[(i + j) % n for j in range(n)] for i in range(n)],
                           name=f"cyclic({n})", check=False, max_order=max_order)
    if kind == "symmetric":
        if n > 4:
            raise ValidationError("group preset", ["symmetric(n) supports n <= 4"])
        perms = list(SymmetricGroup(n).generate())
        return FiniteGroup(_table_from_permutations(perms), name=f"symmetric({n})", check=False)
    if kind == "dihedral":
        if n > 6:
            raise ValidationError("group preset", ["dihedral(n) supports n <= 6"])
        perms = list(DihedralGroup(n).generate())
        return FiniteGroup(_table_from_permutations(perms), name=f"dihedral({n})", check=False)
    raise ValidationError("group preset", [f"unknown preset '{kind}'"])


class Subgroup:
    """A subgroup of a FiniteGroup, stored as a sorted tuple of element indices."""

    def __init__(self, parent, elements, check=True):
        self.parent = parent
        self.elements = tuple(sorted(set(int(x) for x in elements)))
        self._members = frozenset(self.elements)
        if check:
            self._check()

    def _check(self):
        g = self.parent
        for x in self.elements:
            g.check_element(x)
        problems = []
        if 0 not in self._members:
            problems.append("does not contain the identity")
        for a in self.elements:
            if g.inv(a) not in self._members:
                problems.append(f"not closed under inverse at {a}")
                break
        for a, b in product(self.elements, repeat=2):
            if g.mul(a, b) not in self._members:
                problems.append(f"not closed under product at ({a}, {b})")
                break
        if g.order % len(self.elements):
            problems.append("order does not divide the group order")
        if problems:
            raise ValidationError("subgroup", problems)

    @property
    def order(self):
        return len(self.elements)

    def __contains__(self, x):
        return x in self._members

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __eq__(self, other):
        return (isinstance(other, Subgroup) and self.parent == other.parent
                and self.elements == other.elements)

    def __hash__(self):
        return hash(self.elements)

    def __repr__(self):
        return f"Subgroup({list(self.elements)})"


def subgroup_closure(group, gens):
    """Return the least subgroup of group containing gens."""
    gens = list(gens)
    for x in gens:
        group.check_element(x)
    cayley = nx.DiGraph()
    cayley.add_node(0)
    cayley.add_edges_from((a, group.mul(a, s)) for a in group.elements for s in gens)
    return Subgroup(group, nx.descendants(cayley, 0) | {0}, check=False)


def conjugate_subgroup(sub, g):
    """Return g S g^-1."""
    parent = sub.parent
    return Subgroup(parent, (parent.conj(g, x) for x in sub), check=False)


def intersect(first, second):
    """
    Intersection of two subgroups of one group.

    Args:
        first: Subgroup
        second: Subgroup of the same parent

    Returns:
        Subgroup: elements common to both

    Raises:
        SubgroupParentMismatch: if the parents differ
    """
    if first.parent != second.parent:
        raise SubgroupParentMismatch()
    return Subgroup(first.parent, set(first.elements) & set(second.elements), check=False)


def double_cosets(group, left, right):
    """
    Partition group into double cosets left*q*right.

    Classes are sorted tuples, listed by their least element.
    """
    if left.parent != group or right.parent != group:
        raise SubgroupParentMismatch()
    seen = set()
    classes = []
    for q in group.elements:
        if q in seen:
            continue
        cls = {group.prod(p, q, r) for p in left for r in right}
        seen |= cls
        classes.append(tuple(sorted(cls)))
    return classes


def double_coset_rep(group, left, right, q):
    """Least element of left*q*right."""
    return min(group.prod(p, q, r) for p in left for r in right)


class GroupHom:
    """A homomorphism between finite groups given by its image array."""

    def __init__(self, source, target, image, check=True):
        self.source = source
        self.target = target
        self.image = tuple(int(x) for x in image)
        if check:
            self._check()
        self.injective = len(set(self.image)) == source.order
        self._preimage = {}
        for x, y in enumerate(self.image):
            self._preimage.setdefault(y, x)

    def _check(self):
        s, t = self.source, self.target
        if len(self.image) != s.order:
            raise ValidationError("homomorphism", [f"image has {len(self.image)} entries, expected {s.order}"])
        for y in self.image:
            t.check_element(y)
        for a, b in product(range(s.order), repeat=2):
            if self.image[s.mul(a, b)] != t.mul(self.image[a], self.image[b]):
                raise ValidationError("homomorphism", [f"image of {a}*{b} is not the product of images"])

    def __call__(self, x):
        return self.image[x]

    def preimage(self, y):
        """Least x with hom(x) == y, or None when y is not in the image."""
        return self._preimage.get(y)

    def image_set(self):
        return frozenset(self.image)

    def image_subgroup(self):
        return Subgroup(self.target, self.image, check=False)

    def is_surjective(self):
        return len(self.image_set()) == self.target.order

    def __eq__(self, other):
        return (isinstance(other, GroupHom) and self.source == other.source
                and self.target == other.target and self.image == other.image)

    def __hash__(self):
        return hash(self.image)

    def __repr__(self):
        return f"GroupHom({list(self.image)})"


def identity_hom(group):
    """x -> x on group."""
    return GroupHom(group, group, range(group.order), check=False)


def trivial_hom(source, target):
    return GroupHom(source, target, [0] * source.order, check=False)


def compose_homs(outer, inner):
    """Return outer after inner."""
    return GroupHom(inner.source, outer.target, [outer(inner(x)) for x in inner.source.elements], check=False)


def conjugated_hom(hom, g):
    """Return x -> g hom(x) g^-1."""
    t = hom.target
    return GroupHom(hom.source, t, [t.conj(g, y) for y in hom.image], check=False)


def is_in_image(hom, g):
    """Return (True, preimage) when g lies in hom(source), else (False, None)."""
    pre = hom.preimage(g)
    return (pre is not None, pre)


def subgroup_group(sub, name=None):
    """
    Realize a subgroup as a standalone FiniteGroup.

    Returns (group, inclusion) where inclusion maps the new indices back
    into the parent. Index order follows the parent's order, so the
    identity stays at 0.
    """
    elements = sub.elements
    index = {x: i for i, x in enumerate(elements)}
    parent = sub.parent
    table = [[index[parent.mul(a, b)] for b in elements] for a in elements]
    group = FiniteGroup(table, name=name, check=False)
    return group, GroupHom(group, parent, elements, check=False)


def generators(group):
    """A small generating set, chosen greedily in index order."""
    gens = []
    span = subgroup_closure(group, [])
    for x in group.elements:
        if x not in span:
            gens.append(x)
            span = subgroup_closure(group, gens)
            if span.order == group.order:
                break
    return gens


def all_homomorphisms(source, target):
    """Every homomorphism source -> target, in lexicographic order of generator images."""
    gens = generators(source)
    homs = []
    for images in product(range(target.order), repeat=len(gens)):
        assign = {0: 0}
        frontier = [0]
        consistent = True
        while frontier and consistent:
            nxt = []
            for a in frontier:
                for s, img in zip(gens, images):
                    b = source.mul(a, s)
                    val = target.mul(assign[a], img)
                    if b in assign:
                        if assign[b] != val:
                            consistent = False
                            break
                    else:
                        assign[b] = val
                        nxt.append(b)
                if not consistent:
                    break
            frontier = nxt
        if not consistent:
            continue
        image = [assign[x] for x in source.elements]
        if all(image[source.mul(a, b)] == target.mul(image[a], image[b])
               for a in source.elements for b in source.elements):
            homs.append(GroupHom(source, target, image, check=False))
    logger.debug("found %d homomorphisms %r -> %r", len(homs), source, target)
    return homs
