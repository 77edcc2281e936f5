"""Free constructions on decorated trees, kept in normal form.

Two calculi share one rewrite engine:

* marked-product points over k pearled trees: a joint generator decoration
  on the pearl, a joint marked-product decoration on each spine vertex and
  per-component operad decorations elsewhere (the free object with one
  distinguished input direction), and
* section points over k trees with a shared below-section part: pearls
  jointly decorated by generators with designated base points, the root
  decorated by a fiber point and per-component operad decorations above
  the section (the free object with a ground-indexed left action).

Normal form: no contractible vertex-vertex edge, no eliminable unit
decoration, base-point pearls only at the root, children sorted by a
decoration-aware key.  Point equality is field equality; the constructors
re-run normalization and reject anything that is not already normal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import (
    PLUS,
    AugmentedPoint,
    FiberPoint,
    GluedElement,
    OVecPoint,
    ProductPoint,
    RelativeFamily,
    act_numeric,
    compose_at,
    fiber_compose_at,
    fiber_drop,
    fiber_relabel,
    glued_circ,
    glued_mu_direct,
    glued_mu_s,
    glued_relabel,
    is_unit_fiber,
    is_unit_ovec,
    ovec_compose_at,
    ovec_splice,
    prod_mu,
    qualify,
)
from .errors import OperadicError
from .exactgeom import MARK, RectConfig, label_key
from .trees import (
    LEAF,
    ComponentTree,
    KFoldTree,
    arity,
    corolla,
    is_ancestor,
    is_vertex,
    leaves,
    pearl_of,
    replace,
    subtree,
    validate_labeling,
    vertices,
)


# ---------------------------------------------------------------------------
# formal generators


@dataclass(frozen=True)
class FormalGenerator:
    """Opaque generator symbol; orders[i] lists component i's input labels
    in the symbol's own input order, or is the sentinel."""

    name: str
    orders: tuple
    base: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "orders", tuple(o if o == PLUS else tuple(o) for o in self.orders)
        )
        if self.base and any(o not in (PLUS, ()) for o in self.orders):
            raise OperadicError("a base generator must have empty or absent components")

    @property
    def arity_vector(self) -> tuple:
        return tuple(PLUS if o == PLUS else len(o) for o in self.orders)


def formal_generator(name: str, arities) -> FormalGenerator:
    orders = tuple(
        PLUS if n == PLUS else tuple(str(j + 1) for j in range(n)) for n in arities
    )
    return FormalGenerator(name, orders)


def base_generator(pattern) -> FormalGenerator:
    if any(n not in (PLUS, 0) for n in pattern):
        raise OperadicError("a base pattern draws entries from {0, +}")
    orders = tuple(PLUS if n == PLUS else () for n in pattern)
    return FormalGenerator("*", orders, base=True)


# ---------------------------------------------------------------------------
# decoration dispatch: component action, slot content, stable text


def stable_key(value) -> str:
    """Deterministic injective text for sort keys; frozensets are ordered."""
    if isinstance(value, frozenset):
        return "{%s}" % ",".join(sorted((str(x) for x in value), key=label_key))
    if isinstance(value, tuple):
        return "(%s)" % ",".join(stable_key(x) for x in value)
    if isinstance(value, OVecPoint):
        return "OVec[%s]" % stable_key(value.points)
    if isinstance(value, ProductPoint):
        return "Prod[%s]" % stable_key(value.points)
    if isinstance(value, FiberPoint):
        return "Fiber[%s]" % stable_key((value.pk.ground, value.pk.parts, value.points))
    if isinstance(value, GluedElement):
        return "Glued[%s]" % stable_key((value.sets, value.config))
    if isinstance(value, AugmentedPoint):
        return "Aug[%s]" % stable_key(value.points)
    if isinstance(value, FormalGenerator):
        return "Gen[%s;%s;%d]" % (value.name, stable_key(value.orders), value.base)
    return repr(value)


def _perm_map(perm) -> dict:
    return {str(perm[j]): str(j + 1) for j in range(len(perm))}


def act_component(value, i: int, perm) -> object:
    """Slot permutation on component i of a decoration; result slot j carries
    old slot perm[j].  A fiber point permutes its whole ground at once."""
    mapping = _perm_map(perm)
    if isinstance(value, FormalGenerator):
        orders = list(value.orders)
        if orders[i] != PLUS:
            orders[i] = tuple(mapping.get(a, a) for a in orders[i])
        return FormalGenerator(value.name, tuple(orders), value.base)
    if isinstance(value, OVecPoint):
        points = list(value.points)
        points[i] = value.family.components[i].relabel(points[i], mapping)
        return OVecPoint(value.family, tuple(points))
    if isinstance(value, FiberPoint):
        return fiber_relabel(value, mapping)
    if isinstance(value, ProductPoint):
        points = list(value.points)
        points[i] = value.family.components[i].relabel(points[i], mapping)
        return ProductPoint(value.family, tuple(points))
    if isinstance(value, AugmentedPoint):
        points = list(value.points)
        if points[i] != PLUS:
            points[i] = value.family.base.relabel(points[i], mapping)
        return AugmentedPoint(value.family, tuple(points))
    if isinstance(value, GluedElement):
        return glued_relabel(value, i, mapping)
    raise OperadicError("no component action for %r" % type(value).__name__)


def _model_fragment(model, x, label: str):
    if isinstance(x, RectConfig):
        return x.rect(label) if x.has(label) else None
    if isinstance(x, tuple):
        return x.index(label) if label in x else None
    if isinstance(x, frozenset):
        return "member" if label in x else None
    raise OperadicError("no slot content for %r" % type(x).__name__)


def slot_fragment(value, i: int, j: int):
    """Content a decoration attaches to slot j (0-based) of component i."""
    label = str(j + 1)
    if isinstance(value, FormalGenerator):
        if value.orders[i] == PLUS:
            return None
        return value.orders[i].index(label) if label in value.orders[i] else None
    if isinstance(value, OVecPoint):
        return _model_fragment(value.family.components[i], value.points[i], label)
    if isinstance(value, FiberPoint):
        if value.pk.parts[i] == PLUS or label not in value.pk.parts[i]:
            return None
        return _model_fragment(value.family.components[i], value.points[i], label)
    if isinstance(value, ProductPoint):
        return _model_fragment(value.family.components[i], value.points[i], label)
    if isinstance(value, AugmentedPoint):
        if value.points[i] == PLUS:
            return None
        return _model_fragment(value.family.base, value.points[i], label)
    if isinstance(value, GluedElement):
        q = qualify(i, label)
        return value.config.rect(q) if value.config.has(q) else None
    raise OperadicError("no slot content for %r" % type(value).__name__)


def is_base_value(value) -> bool:
    """Does the value decorate a pearl with the designated base point?"""
    if isinstance(value, FormalGenerator):
        return value.base
    if isinstance(value, GluedElement):
        return all(s in (PLUS, ()) for s in value.sets)
    if isinstance(value, AugmentedPoint):
        return all(x == PLUS or value.family.base.arity(x) == 0 for x in value.points)
    return False


def base_like(template, family: RelativeFamily, pattern) -> object:
    """The base point at an arity pattern, in the template's encoding."""
    if isinstance(template, FormalGenerator):
        return base_generator(pattern)
    if isinstance(template, GluedElement):
        sets = tuple(PLUS if n == PLUS else () for n in pattern)
        return GluedElement(family, sets, RectConfig(family.base.dim, {}, "disjoint"))
    if isinstance(template, AugmentedPoint):
        points = tuple(PLUS if n == PLUS else family.base.point0() for n in pattern)
        return AugmentedPoint(family, points)
    raise OperadicError("no base point for %r" % type(template).__name__)


def decoration_arities(value) -> tuple:
    if isinstance(value, (FormalGenerator, OVecPoint)):
        return value.arity_vector
    if isinstance(value, ProductPoint):
        return tuple(len(s) for s in value.sets)
    if isinstance(value, (GluedElement, AugmentedPoint)):
        return tuple(PLUS if s == PLUS else len(s) for s in value.sets)
    raise OperadicError("unsupported pearl decoration %r" % type(value).__name__)


# ---------------------------------------------------------------------------
# joint decoration compositions with positional bookkeeping


# ---------------------------------------------------------------------------
# the shared rewrite state


class _State:
    """Mutable decorated forest; rewrites run here and points are frozen
    snapshots of exhausted states."""

    def __init__(self, kind, family, shapes, pearls, labels, marks,
                 pearl_dec, below_dec, upper_dec):
        self.kind = kind  # "ib" or "b"
        self.family = family
        self.shapes = list(shapes)
        self.pearls = [set(p) for p in pearls]
        self.labels = [dict(l) for l in labels]
        self.marks = dict(marks)
        self.pearl_dec = dict(pearl_dec)
        self.below_dec = dict(below_dec)
        self.upper_dec = dict(upper_dec)
        self.base_template = next(iter(self.pearl_dec.values()), None)

    @property
    def k(self) -> int:
        return len(self.shapes)

    def is_pearl(self, path) -> bool:
        return any(path in p for p in self.pearls)

    # -- rewrite enumeration --------------------------------------------------

    def available(self) -> list:
        out = []
        for (i, p) in sorted(self.upper_dec):
            if not self.is_pearl(p[:-1]):
                out.append(("merge-upper", (i, p)))
            elif (arity(self.shapes[i], p) == 1
                  and self.upper_dec[(i, p)] == self.family.components[i].unit("1")):
                out.append(("drop-unit-upper", (i, p)))
        for p in sorted(self.below_dec):
            if p:
                out.append(("merge-below", p))
                continue
            width = len(subtree(self.shapes[0], ()))
            if width == 1 and self.kind == "ib" and is_unit_ovec(self.below_dec[p]):
                out.append(("drop-unit-root", ()))
            if width == 1 and self.kind == "b" and is_unit_fiber(self.below_dec[p]):
                out.append(("drop-unit-root", ()))
            if width == 0 and self.kind == "b":
                out.append(("pearlize", ()))
        if self.kind == "b":
            for p in sorted(self.pearl_dec):
                if p and is_base_value(self.pearl_dec[p]):
                    out.append(("drop-base-pearl", p))
        return out

    def apply(self, rule, arg):
        if rule == "merge-upper":
            self._merge_upper(*arg)
        elif rule == "drop-unit-upper":
            self._drop_unit_upper(*arg)
        elif rule == "merge-below":
            self._merge_below(arg)
        elif rule == "drop-unit-root":
            self._drop_unit_root()
        elif rule == "pearlize":
            self._pearlize()
        elif rule == "drop-base-pearl":
            self._drop_base_pearl(arg)
        else:
            raise OperadicError("unknown rewrite %r" % (rule,))

    def run(self, rng=None):
        while True:
            todo = self.available()
            if not todo:
                break
            rule, arg = todo[0] if rng is None else todo[rng.randint(0, len(todo) - 1)]
            self.apply(rule, arg)
        self.sort()
        return self

    # -- path bookkeeping -------------------------------------------------------

    def _move_component(self, i, move, drop=None):
        self.pearls[i] = {move(p) for p in self.pearls[i] if p != drop}
        self.labels[i] = {move(p): s for p, s in self.labels[i].items()}
        self.upper_dec = {
            ((j, move(p)) if j == i else (j, p)): v
            for (j, p), v in self.upper_dec.items()
            if not (j == i and p == drop)
        }
        if self.kind == "b":
            self.marks = {
                ((j, move(p)) if j == i else (j, p)): v
                for (j, p), v in self.marks.items()
                if not (j == i and p == drop)
            }

    def _move_joint_keys(self, move, drop=None):
        self.pearl_dec = {move(p): v for p, v in self.pearl_dec.items() if p != drop}
        self.below_dec = {move(p): v for p, v in self.below_dec.items() if p != drop}

    def _contract_into_parent(self, i, path):
        """Splice the children of the vertex at path into its parent slot;
        returns the move applied to that component's paths."""
        node = subtree(self.shapes[i], path)
        par, slot = path[:-1], path[-1]
        parent_node = subtree(self.shapes[i], par)
        self.shapes[i] = replace(
            self.shapes[i], par, parent_node[:slot] + node + parent_node[slot + 1 :]
        )

        def move(p):
            if is_ancestor(path, p) and p != path:
                return par + (slot + p[len(path)],) + p[len(path) + 1 :]
            if len(p) > len(par) and p[: len(par)] == par and p[len(par)] > slot:
                return par + (p[len(par)] + len(node) - 1,) + p[len(par) + 1 :]
            return p

        self._move_component(i, move, drop=path)
        return move

    # -- the rewrites -------------------------------------------------------------

    def _merge_upper(self, i, path):
        x = self.upper_dec.pop((i, path))
        par, slot = path[:-1], path[-1]
        if par in self.below_dec:
            if self.kind != "ib":
                raise OperadicError("a section point has no vertices below the pearls")
            self.below_dec[par] = ovec_compose_at(self.below_dec[par], i, slot + 1, x)
        else:
            model = self.family.components[i]
            self.upper_dec[(i, par)] = compose_at(
                model, self.upper_dec[(i, par)], slot + 1, x
            )
        self._contract_into_parent(i, path)

    def _drop_unit_upper(self, i, path):
        self.upper_dec.pop((i, path))
        self._contract_into_parent(i, path)

    def _merge_below(self, path):
        child = self.below_dec.pop(path)
        par, slot = path[:-1], path[-1]
        if self.kind == "ib":
            self.below_dec[par] = ovec_splice(self.below_dec[par], child)
        else:
            self.below_dec[par] = fiber_compose_at(self.below_dec[par], slot + 1, child)
        move = None
        for i in range(self.k):
            move = self._contract_into_parent(i, path)
        # spine contractions sit at slot zero, so the relocation map is the
        # same in every component; below-section shapes agree outright
        self._move_joint_keys(move, drop=path)

    def _drop_unit_root(self):
        self.below_dec.pop(())
        self.marks = {(j, p): v for (j, p), v in self.marks.items() if p != ()}

        def move(p):
            return p[1:]

        for i in range(self.k):
            self.shapes[i] = subtree(self.shapes[i], (0,))
            self._move_component(i, move)
        self._move_joint_keys(move)

    def _drop_base_pearl(self, path):
        self.base_template = self.pearl_dec.pop(path)
        par, slot = path[:-1], path[-1]
        self.below_dec[par] = fiber_drop(self.below_dec[par], slot + 1)

        def move(p):
            if len(p) > len(par) and p[: len(par)] == par and p[len(par)] > slot:
                return par + (p[len(par)] - 1,) + p[len(par) + 1 :]
            return p

        for i in range(self.k):
            node = subtree(self.shapes[i], par)
            self.shapes[i] = replace(self.shapes[i], par, node[:slot] + node[slot + 1 :])
            self._move_component(i, move, drop=path)
        self._move_joint_keys(move, drop=path)

    def _pearlize(self):
        fiber = self.below_dec.pop(())
        pattern = tuple(PLUS if part == PLUS else 0 for part in fiber.pk.parts)
        template = self.base_template
        if template is None:
            template = base_generator(pattern)
        for i in range(self.k):
            self.pearls[i].add(())
        self.pearl_dec[()] = base_like(template, self.family, pattern)

    # -- canonical child order ----------------------------------------------------

    def _decor_at(self, i, path):
        if path in self.pearl_dec:
            return self.pearl_dec[path]
        if path in self.below_dec:
            return self.below_dec[path]
        return self.upper_dec.get((i, path))

    def _enc(self, i, path):
        node = subtree(self.shapes[i], path)
        if not is_vertex(node):
            return ("L", self.labels[i][path])
        return (
            "V",
            path in self.pearls[i],
            self.marks.get((i, path)),
            stable_key(self._decor_at(i, path)),
            tuple(self._enc(i, path + (t,)) for t in range(len(node))),
        )

    def _child_key(self, i, path, j, decor):
        child = path + (j,)
        if not is_vertex(subtree(self.shapes[i], child)):
            return (0, label_key(self.labels[i][child]))
        frag = None if decor is None else slot_fragment(decor, i, j)
        return (1, stable_key((self.marks.get((i, child)), frag)), self._enc(i, child))

    def _apply_child_perm(self, path, order, comp_ids):
        perm1 = tuple(j + 1 for j in order)

        def move(p):
            if len(p) > len(path) and p[: len(path)] == path:
                return path + (order.index(p[len(path)]),) + p[len(path) + 1 :]
            return p

        for i in comp_ids:
            node = subtree(self.shapes[i], path)
            self.shapes[i] = replace(self.shapes[i], path, tuple(node[j] for j in order))
            self._move_component(i, move)
            if (i, path) in self.upper_dec:
                self.upper_dec[(i, path)] = act_numeric(
                    self.family.components[i], self.upper_dec[(i, path)], perm1
                )
        if path in self.pearl_dec or path in self.below_dec:
            target = self.pearl_dec if path in self.pearl_dec else self.below_dec
            value = target[path]
            if isinstance(value, FiberPoint):
                value = act_component(value, 0, perm1)
            else:
                for i in comp_ids:
                    value = act_component(value, i, perm1)
            target[path] = value
        if len(comp_ids) == self.k:
            self._move_joint_keys(move)

    def sort(self):
        for i in range(self.k):
            for path in sorted(vertices(self.shapes[i]), key=len, reverse=True):
                if self.kind == "b" and path in self.below_dec:
                    continue
                self._sort_one(i, path)
        if self.kind == "b" and () in self.below_dec:
            self._sort_root_joint()

    def _sort_one(self, i, path):
        node = subtree(self.shapes[i], path)
        free = list(range(len(node)))
        if self.kind == "ib" and path in self.below_dec:
            free = free[1:]
        if len(free) < 2:
            return
        decor = self._decor_at(i, path)
        ranked = iter(sorted(free, key=lambda j: self._child_key(i, path, j, decor)))
        order = [next(ranked) if j in free else j for j in range(len(node))]
        if order != list(range(len(node))):
            self._apply_child_perm(path, order, [i])

    def _sort_root_joint(self):
        decor = self.below_dec[()]
        n = len(subtree(self.shapes[0], ()))
        if n < 2:
            return
        order = sorted(
            range(n),
            key=lambda j: tuple(self._child_key(i, (), j, decor) for i in range(self.k)),
        )
        if order != list(range(n)):
            self._apply_child_perm((), order, list(range(self.k)))

    # -- snapshots -------------------------------------------------------------------

    def fields(self):
        comps = []
        for i in range(self.k):
            lab = tuple((p, self.labels[i][p]) for p in leaves(self.shapes[i]))
            comps.append(ComponentTree(self.shapes[i], frozenset(self.pearls[i]), lab))
        variant = "rpTree" if self.kind == "ib" else "rsTree"
        tree = KFoldTree(variant, tuple(comps), tuple(self.marks.items()))
        return (
            tree,
            tuple(sorted(self.pearl_dec.items())),
            tuple(sorted(self.below_dec.items())),
            tuple(sorted(self.upper_dec.items())),
        )


# ---------------------------------------------------------------------------
# the points


def _state_ib(family, tree, pearl, below, upper) -> _State:
    pearl_path = pearl_of(tree.components[0])
    below_dec = {}
    if below is not None:
        if len(pearl_path) == 0:
            raise OperadicError("a spine decoration needs the pearl below the root")
        below_dec[()] = below
    elif len(pearl_path) != 0:
        raise OperadicError("a pearl below the root needs a spine decoration")
    return _State(
        "ib",
        family,
        [c.shape for c in tree.components],
        [c.pearls for c in tree.components],
        [dict(c.labels) for c in tree.components],
        {},
        {pearl_path: pearl},
        below_dec,
        dict(upper),
    )


def _state_b(family, tree, pearls, below, upper) -> _State:
    return _State(
        "b",
        family,
        [c.shape for c in tree.components],
        [c.pearls for c in tree.components],
        [dict(c.labels) for c in tree.components],
        tree.marks_dict(),
        dict(pearls),
        {} if below is None else {(): below},
        dict(upper),
    )


def _check_positional_labels(tree: KFoldTree):
    for c in tree.components:
        want = {str(j + 1) for j in range(c.n_leaves)}
        if {s for _, s in c.labels} != want:
            raise OperadicError("leaf labels must be a permutation of 1..n")


@dataclass(frozen=True)
class FreeIbPoint:
    """Normal-form point of the free construction with one distinguished
    direction.  The spine decoration is present exactly when the pearl sits
    below the root; upper maps (component, path) to operad elements."""

    family: RelativeFamily
    tree: KFoldTree
    pearl: object
    below: object
    upper: tuple

    def __post_init__(self):
        object.__setattr__(self, "upper", tuple(sorted(dict(self.upper).items())))
        if self.tree.variant != "rpTree":
            raise OperadicError("expected the reduced pearled variant")
        ok, clause = validate_labeling(self.tree)
        if not ok:
            raise OperadicError("invalid tree: %s" % clause)
        _check_positional_labels(self.tree)
        _validate_ib_decorations(self)
        state = _state_ib(self.family, self.tree, self.pearl, self.below, dict(self.upper))
        if state.available():
            raise OperadicError("point is not in normal form")
        state.sort()
        if state.fields() != _fields_of(self):
            raise OperadicError("point is not in normal form")

    @property
    def arities(self) -> tuple:
        return self.tree.arities

    def encoding(self) -> tuple:
        state = _state_ib(self.family, self.tree, self.pearl, self.below, dict(self.upper))
        return tuple(state._enc(i, ()) for i in range(state.k))


@dataclass(frozen=True)
class FreeBPoint:
    """Normal-form point of the free construction with a ground-indexed left
    action.  The root decoration is present exactly when the root is not a
    pearl; pearls and upper map paths to decorations."""

    family: RelativeFamily
    tree: KFoldTree
    pearls: tuple
    below: object
    upper: tuple

    def __post_init__(self):
        object.__setattr__(self, "pearls", tuple(sorted(dict(self.pearls).items())))
        object.__setattr__(self, "upper", tuple(sorted(dict(self.upper).items())))
        if self.tree.variant != "rsTree":
            raise OperadicError("expected the reduced section variant")
        ok, clause = validate_labeling(self.tree)
        if not ok:
            raise OperadicError("invalid tree: %s" % clause)
        _check_positional_labels(self.tree)
        _validate_b_decorations(self)
        state = _state_b(self.family, self.tree, dict(self.pearls), self.below, dict(self.upper))
        if state.available():
            raise OperadicError("point is not in normal form")
        state.sort()
        if state.fields() != _fields_of(self):
            raise OperadicError("point is not in normal form")

    @property
    def arities(self) -> tuple:
        return tuple(PLUS if n is None else n for n in self.tree.arities)

    def encoding(self) -> tuple:
        state = _state_b(self.family, self.tree, dict(self.pearls), self.below, dict(self.upper))
        return tuple(state._enc(i, ()) for i in range(state.k))


def _fields_of(pt):
    belows = () if pt.below is None else (((), pt.below),)
    if isinstance(pt, FreeIbPoint):
        pearl_path = pearl_of(pt.tree.components[0])
        return (pt.tree, ((pearl_path, pt.pearl),), belows, pt.upper)
    return (pt.tree, pt.pearls, belows, pt.upper)


def _validate_ib_decorations(pt: FreeIbPoint):
    family = pt.family
    comps = pt.tree.components
    want_pearl = tuple(arity(c.shape, pearl_of(c)) for c in comps)
    if decoration_arities(pt.pearl) != want_pearl:
        raise OperadicError("pearl decoration arity mismatch")
    if pt.below is not None:
        if not isinstance(pt.below, OVecPoint) or pt.below.family != family:
            raise OperadicError("the spine decoration must be a marked product point")
        for i, c in enumerate(comps):
            m = arity(c.shape, ())
            if set(pt.below.sets[i]) != {str(t) for t in range(2, m + 1)}:
                raise OperadicError("spine decoration labels must be positional")
    want = set()
    for i, c in enumerate(comps):
        p = pearl_of(c)
        for v in vertices(c.shape):
            if v != p and not is_ancestor(v, p):
                want.add((i, v))
    upper = dict(pt.upper)
    if set(upper) != want:
        raise OperadicError("operad decorations must cover the off-spine vertices")
    for (i, v), x in upper.items():
        model = family.components[i]
        if tuple(model.labels(x)) != tuple(str(t + 1) for t in range(arity(comps[i].shape, v))):
            raise OperadicError("operad decoration labels must be positional")


def _validate_b_decorations(pt: FreeBPoint):
    family = pt.family
    comps = pt.tree.components
    marks = pt.tree.marks_dict()
    pearls = dict(pt.pearls)
    if set(pearls) != set(comps[0].pearls):
        raise OperadicError("pearl decorations must cover the pearls")
    for path, value in pearls.items():
        want = tuple(
            arity(comps[i].shape, path) if marks[(i, path)] else PLUS
            for i in range(len(comps))
        )
        if decoration_arities(value) != want:
            raise OperadicError("pearl decoration arity mismatch at %r" % (path,))
        if path != () and is_base_value(value):
            raise OperadicError("point is not in normal form")
    if (() not in pearls) != (pt.below is not None):
        raise OperadicError("the root decoration must match the tree shape")
    if pt.below is not None:
        if not isinstance(pt.below, FiberPoint) or pt.below.family != family:
            raise OperadicError("the root decoration must be a fiber point")
        m = len(subtree(comps[0].shape, ()))
        if pt.below.pk.ground != tuple(sorted((str(t + 1) for t in range(m)), key=label_key)):
            raise OperadicError("root decoration ground must be positional")
        for i in range(len(comps)):
            part = pt.below.pk.parts[i]
            if (part == PLUS) != (not marks[(i, ())]):
                raise OperadicError("root decoration pattern must match the trunk marks")
            if part != PLUS:
                if set(part) != {str(t + 1) for t in range(m) if marks[(i, (t,))]}:
                    raise OperadicError("root decoration pattern must match the edge marks")
    want = set()
    for i, c in enumerate(comps):
        for v in vertices(c.shape):
            if v not in c.pearls and any(is_ancestor(q, v) and q != v for q in c.pearls):
                want.add((i, v))
    upper = dict(pt.upper)
    if set(upper) != want:
        raise OperadicError("operad decorations must cover the above-section vertices")
    for (i, v), x in upper.items():
        model = family.components[i]
        if tuple(model.labels(x)) != tuple(str(t + 1) for t in range(arity(comps[i].shape, v))):
            raise OperadicError("operad decoration labels must be positional")


def has_univalent_vertex(pt) -> bool:
    """True when some non-pearl vertex has no inputs; the restricted variants
    exclude such points."""
    for c in pt.tree.components:
        for v in vertices(c.shape):
            if v not in c.pearls and arity(c.shape, v) == 0:
                return True
    return False


# ---------------------------------------------------------------------------
# builders


def _snapshot_ib(family, state: _State) -> FreeIbPoint:
    tree, pearls, belows, upper = state.fields()
    return FreeIbPoint(family, tree, pearls[0][1], belows[0][1] if belows else None, upper)


def _snapshot_b(family, state: _State) -> FreeBPoint:
    tree, pearls, belows, upper = state.fields()
    return FreeBPoint(family, tree, pearls, belows[0][1] if belows else None, upper)


def ib_point(family, tree, pearl, below=None, upper=(), rng=None) -> FreeIbPoint:
    """Normalize a decorated pearled forest and freeze the result."""
    state = _state_ib(family, tree, pearl, below, dict(upper)).run(rng)
    return _snapshot_ib(family, state)


def b_point(family, tree, pearls, below=None, upper=(), rng=None) -> FreeBPoint:
    """Normalize a decorated section forest and freeze the result."""
    state = _state_b(family, tree, dict(pearls), below, dict(upper)).run(rng)
    return _snapshot_b(family, state)


def ib_generator(family: RelativeFamily, pearl) -> FreeIbPoint:
    """The corolla point of a generator decoration."""
    comps = tuple(
        ComponentTree(corolla(n), frozenset({()})) for n in decoration_arities(pearl)
    )
    return FreeIbPoint(family, KFoldTree("rpTree", comps), pearl, None, ())


def b_generator(family: RelativeFamily, pearl) -> FreeBPoint:
    """The pearled-corolla point of a generator decoration."""
    arities = decoration_arities(pearl)
    comps = tuple(
        ComponentTree(corolla(0 if n == PLUS else n), frozenset({()})) for n in arities
    )
    marks = tuple(((i, ()), n != PLUS) for i, n in enumerate(arities))
    return FreeBPoint(family, KFoldTree("rsTree", comps, marks), (((), pearl),), None, ())


def base_point(family: RelativeFamily, pattern, template=None) -> FreeBPoint:
    """The designated point at an arity pattern drawn from {0, +}."""
    if template is None:
        template = base_generator(tuple(pattern))
    return b_generator(family, base_like(template, family, tuple(pattern)))


# ---------------------------------------------------------------------------
# grafting actions


def _graft_leaf(state: _State, i: int, label, x, model):
    """Replace the leaf carrying the label in component i by a decorated
    corolla and renumber that component's leaf labels."""
    for p, s in state.labels[i].items():
        if s == str(label):
            path = p
            break
    else:
        raise OperadicError("no leaf labeled %r in component %d" % (label, i))
    m = model.arity(x)
    j = int(label)
    state.shapes[i] = replace(state.shapes[i], path, corolla(m))
    new_labels = {}
    for p, s in state.labels[i].items():
        if p == path:
            continue
        t = int(s)
        new_labels[p] = str(t + m - 1) if t > j else s
    for t in range(m):
        new_labels[path + (t,)] = str(j + t)
    state.labels[i] = new_labels
    state.upper_dec[(i, path)] = x


def free_graft_ib(pt: FreeIbPoint, action, rng=None) -> FreeIbPoint:
    """Apply a right corolla graft ("right", i, j, x) or a left marked
    product graft ("left", theta); returns the normal form."""
    family = pt.family
    if action[0] == "right":
        _, i, j, x = action
        model = family.components[i]
        if not 1 <= int(j) <= pt.arities[i]:
            raise OperadicError("leaf index out of range")
        if tuple(model.labels(x)) != tuple(str(t + 1) for t in range(model.arity(x))):
            raise OperadicError("operand labels must be positional")
        state = _state_ib(family, pt.tree, pt.pearl, pt.below, dict(pt.upper))
        _graft_leaf(state, i, j, x, model)
        return _snapshot_ib(family, state.run(rng))
    if action[0] == "left":
        _, theta = action
        if not isinstance(theta, OVecPoint) or theta.family != family:
            raise OperadicError("the left operand must be a marked product point")
        for i in range(family.k):
            if set(theta.sets[i]) != {str(t) for t in range(2, len(theta.sets[i]) + 2)}:
                raise OperadicError("left operand labels must be positional")
        state = _state_ib(family, pt.tree, pt.pearl, pt.below, dict(pt.upper))
        arities = pt.arities

        def move(p):
            return (0,) + p

        for i in range(family.k):
            extra = len(theta.sets[i])
            state.shapes[i] = (state.shapes[i],) + (LEAF,) * extra
            state._move_component(i, move)
            for t in range(extra):
                state.labels[i][(t + 1,)] = str(arities[i] + t + 1)
        state._move_joint_keys(move)
        state.below_dec[()] = theta
        return _snapshot_ib(family, state.run(rng))
    raise OperadicError("unknown action %r" % (action[0],))


def free_graft_b(pt: FreeBPoint, action, rng=None) -> FreeBPoint:
    """Apply a right corolla graft ("right", i, j, x) or a ground-indexed
    left graft ("left", fiber, operands); returns the normal form."""
    family = pt.family
    if action[0] == "right":
        _, i, j, x = action
        model = family.components[i]
        if pt.arities[i] == PLUS or not 1 <= int(j) <= pt.arities[i]:
            raise OperadicError("leaf index out of range")
        if tuple(model.labels(x)) != tuple(str(t + 1) for t in range(model.arity(x))):
            raise OperadicError("operand labels must be positional")
        state = _state_b(family, pt.tree, dict(pt.pearls), pt.below, dict(pt.upper))
        _graft_leaf(state, i, j, x, model)
        return _snapshot_b(family, state.run(rng))
    if action[0] == "left":
        _, fiber, operands = action
        if not isinstance(fiber, FiberPoint) or fiber.family != family:
            raise OperadicError("the left operand must be a fiber point")
        m = len(fiber.pk.ground)
        if fiber.pk.ground != tuple(sorted((str(t + 1) for t in range(m)), key=label_key)):
            raise OperadicError("fiber ground must be positional")
        operands = tuple(operands)
        if len(operands) != m:
            raise OperadicError("one operand per ground element is required")
        for l, op in enumerate(operands):
            if not isinstance(op, FreeBPoint) or op.family != family:
                raise OperadicError("operands must be section points over the family")
            for i, part in enumerate(fiber.pk.parts):
                inside = part != PLUS and str(l + 1) in part
                if inside == (op.arities[i] == PLUS):
                    raise OperadicError(
                        "operand %d presence does not match the ground pattern" % (l + 1)
                    )
        return _snapshot_b(family, _merge_b_operands(family, fiber, operands).run(rng))
    raise OperadicError("unknown action %r" % (action[0],))


def _merge_b_operands(family, fiber: FiberPoint, operands) -> _State:
    k = family.k
    shapes = [[] for _ in range(k)]
    labels = [dict() for _ in range(k)]
    pearls = [set() for _ in range(k)]
    offsets = [0] * k
    marks = {(i, ()): part != PLUS for i, part in enumerate(fiber.pk.parts)}
    pearl_dec = {}
    below_dec = {(): fiber}
    upper_dec = {}
    for l, op in enumerate(operands):
        for i in range(k):
            c = op.tree.components[i]
            shapes[i].append(c.shape)
            for p, s in c.labels:
                labels[i][(l,) + p] = str(int(s) + offsets[i])
            offsets[i] += c.n_leaves
            pearls[i] |= {(l,) + p for p in c.pearls}
        for (i, p), v in op.tree.marks_dict().items():
            marks[(i, (l,) + p)] = v
        for p, v in dict(op.pearls).items():
            pearl_dec[(l,) + p] = v
        if op.below is not None:
            below_dec[(l,)] = op.below
        for (i, p), v in dict(op.upper).items():
            upper_dec[(i, (l,) + p)] = v
    return _State("b", family, [tuple(s) for s in shapes], pearls, labels, marks,
                  pearl_dec, below_dec, upper_dec)


# ---------------------------------------------------------------------------
# counit evaluation against concrete carriers


def _shift_theta(theta: OVecPoint, arities) -> OVecPoint:
    points = []
    for i in range(theta.family.k):
        model = theta.family.components[i]
        mapping = {a: str(int(a) + arities[i] - 1) for a in theta.sets[i]}
        points.append(model.relabel(theta.points[i], mapping))
    return OVecPoint(theta.family, tuple(points))


class ProductIbOps:
    """Right and left operations of the plain componentwise product."""

    def __init__(self, family: RelativeFamily):
        self.family = family

    def right(self, p: ProductPoint, i: int, pos: int, x) -> ProductPoint:
        points = list(p.points)
        points[i] = compose_at(self.family.components[i], points[i], pos, x)
        return ProductPoint(self.family, tuple(points))

    def left(self, theta: OVecPoint, p: ProductPoint) -> ProductPoint:
        return prod_mu(_shift_theta(theta, tuple(len(s) for s in p.sets)), p)


def _glued_compose_at(m: GluedElement, i: int, pos: int, y) -> GluedElement:
    """Positional right substitution in one component of a glued element."""
    if m.sets[i] == PLUS:
        raise OperadicError("component %d is absent" % i)
    n = len(m.sets[i])
    my = len(y.labels)
    tmp = y.relabel({str(j): "in:%d" % j for j in range(1, my + 1)})
    z = glued_circ(m, i, str(pos), tmp)
    mapping = {"in:%d" % j: str(pos + j - 1) for j in range(1, my + 1)}
    for t in range(pos + 1, n + 1):
        mapping[str(t)] = str(t + my - 1)
    return glued_relabel(z, i, mapping)


class GluedIbOps:
    """Right and left operations of the glued rectangles carrier in the
    all-present range."""

    def __init__(self, family: RelativeFamily):
        self.family = family

    def right(self, p: GluedElement, i: int, pos: int, x) -> GluedElement:
        return _glued_compose_at(p, i, pos, x)

    def left(self, theta: OVecPoint, p: GluedElement) -> GluedElement:
        return glued_mu_direct(_shift_theta(theta, tuple(len(s) for s in p.sets)), p)


class GluedBOps:
    """Right operations and the ground-indexed left action of the glued
    rectangles carrier."""

    def __init__(self, family: RelativeFamily):
        self.family = family

    def right(self, p: GluedElement, i: int, pos: int, x) -> GluedElement:
        return _glued_compose_at(p, i, pos, x)

    def left(self, fiber: FiberPoint, operands) -> GluedElement:
        shifted = {}
        offsets = [1] * self.family.k
        for l, op in enumerate(operands):
            value = op
            for i in range(self.family.k):
                if value.sets[i] == PLUS:
                    continue
                mapping = {a: str(int(a) + offsets[i] - 1) for a in value.sets[i]}
                value = glued_relabel(value, i, mapping)
                offsets[i] += len(value.sets[i])
            shifted[str(l + 1)] = value
        return glued_mu_s(fiber, shifted)


def _pearl_fold(pt, path, value, ops):
    """Compose the corollas hanging under one pearl into its decoration."""
    upper = dict(pt.upper)
    for i in range(len(pt.tree.components)):
        slots = sorted(
            (q[-1] for (j, q) in upper if j == i and q[:-1] == path), reverse=True
        )
        for s in slots:
            value = ops.right(value, i, s + 1, upper[(i, path + (s,))])
    return value


def _apply_sigma(value, pt):
    for i, c in enumerate(pt.tree.components):
        n = c.n_leaves
        lab = dict(c.labels)
        inv = [0] * n
        for pos0, p in enumerate(leaves(c.shape)):
            inv[int(lab[p]) - 1] = pos0 + 1
        if inv != list(range(1, n + 1)):
            value = act_component(value, i, tuple(inv))
    return value


def evaluate_ib(pt: FreeIbPoint, ops):
    """Fold the decorated tree into the concrete carrier of its pearl
    decoration (the counit of the free construction)."""
    for (i, q) in dict(pt.upper):
        if q[:-1] != pearl_of(pt.tree.components[i]):
            raise OperadicError("normal points carry corollas under pearls only")
    value = _pearl_fold(pt, pearl_of(pt.tree.components[0]), pt.pearl, ops)
    if pt.below is not None:
        value = ops.left(pt.below, value)
    return _apply_sigma(value, pt)


def evaluate_b(pt: FreeBPoint, ops):
    """Fold a section point into the concrete carrier of its pearls."""
    folded = {path: _pearl_fold(pt, path, value, ops) for path, value in pt.pearls}
    if pt.below is None:
        value = folded[()]
    else:
        value = ops.left(pt.below, [folded[(l,)] for l in range(len(folded))])
    return _apply_sigma(value, pt)
