"""Exact rational rectangle configurations.

A little rectangle is the affine map t |-> (a_1 t_1 + b_1, ..., a_d t_d + b_d)
with every a_j > 0; a configuration is a finite family of such maps indexed by
labels, optionally containing the reserved marked label "*".  Everything is
computed over `fractions.Fraction`, so equality of composites is exact and the
axiom suites can compare results literally.

Overlap regimes
---------------
"overlapping"            no constraint beyond unit-cube containment
"disjoint"               pairwise disjoint open images
("m-overlap", m)         every size-m subset of images has empty intersection
("u-overlap", blocks, u) block-graded bound: for p <= q, each image of block p
                         misses the common intersection of any u[p,q] distinct
                         images of block q (the rectangle itself excluded when
                         p == q); u[p,q] may be the string "inf" meaning no
                         constraint for that pair
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import OperadicError

MARK = "*"


class _Infinity:
    """Sentinel for infinite squared ratios; orderable above every Fraction."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    def __eq__(self, other):
        return isinstance(other, _Infinity)

    def __hash__(self):
        return hash("operadic-inf")


INF = _Infinity()


def rat(value) -> Fraction:
    """Parse "p/q" / integer strings / ints into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if re.fullmatch(r"-?\d+(/\d+)?", text):
            return Fraction(text)
    raise OperadicError("not an exact rational: %r" % (value,))


def rat_str(value) -> str:
    if value is INF:
        return "inf"
    f = Fraction(value)
    return "%d/%d" % (f.numerator, f.denominator) if f.denominator != 1 else str(f.numerator)


def label_key(label: str):
    """Sort key putting numeric labels in numeric order, "*" first."""
    if label == MARK:
        return (0, 0, "")
    if re.fullmatch(r"\d+", label):
        return (1, int(label), "")
    return (2, 0, label)


# ---------------------------------------------------------------------------
# rectangles


@dataclass(frozen=True)
class Rect:
    scales: tuple
    offsets: tuple

    def __post_init__(self):
        scales = tuple(rat(a) for a in self.scales)
        offsets = tuple(rat(b) for b in self.offsets)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "offsets", offsets)
        if len(scales) != len(offsets):
            raise OperadicError("scale/offset dimension mismatch")
        if not scales:
            raise OperadicError("rectangles need dimension >= 1")
        if any(a <= 0 for a in scales):
            raise OperadicError("rectangle scales must be positive")

    @property
    def dim(self) -> int:
        return len(self.scales)

    def compose(self, inner: "Rect") -> "Rect":
        """Affine substitution: (self o inner)(t) = self(inner(t))."""
        if inner.dim != self.dim:
            raise OperadicError("dim mismatch in rectangle composition")
        scales = tuple(a * a2 for a, a2 in zip(self.scales, inner.scales))
        offsets = tuple(a * b2 + b for a, b, b2 in zip(self.scales, self.offsets, inner.offsets))
        return Rect(scales, offsets)

    def apply(self, point) -> tuple:
        if len(point) != self.dim:
            raise OperadicError("point dimension mismatch")
        return tuple(a * rat(t) + b for a, b, t in zip(self.scales, self.offsets, point))

    def axis_interval(self, j: int) -> tuple:
        """Open image interval on axis j (0-based)."""
        return (self.offsets[j], self.offsets[j] + self.scales[j])

    def in_unit(self) -> bool:
        return all(b >= 0 and a + b <= 1 for a, b in zip(self.scales, self.offsets))

    def is_cube(self) -> bool:
        return len(set(self.scales)) == 1

    @staticmethod
    def identity(dim: int) -> "Rect":
        one = Fraction(1)
        zero = Fraction(0)
        return Rect((one,) * dim, (zero,) * dim)


def Cube(scale, offsets) -> Rect:
    """A rectangle with one scale on every axis."""
    offsets = tuple(offsets)
    return Rect((rat(scale),) * len(offsets), offsets)


def rects_overlap(r1: Rect, r2: Rect) -> bool:
    """Open images intersect?"""
    return common_box((r1, r2)) is not None


def common_box(rects) -> tuple | None:
    """Common open intersection of images, as (lo, hi) tuples, or None."""
    rects = list(rects)
    dim = rects[0].dim
    lo, hi = [], []
    for j in range(dim):
        ivs = [r.axis_interval(j) for r in rects]
        a = max(iv[0] for iv in ivs)
        b = min(iv[1] for iv in ivs)
        if a >= b:
            return None
        lo.append(a)
        hi.append(b)
    return (tuple(lo), tuple(hi))


def bounding_rect(rects) -> Rect:
    rects = list(rects)
    dim = rects[0].dim
    lo = tuple(min(r.offsets[j] for r in rects) for j in range(dim))
    hi = tuple(max(r.offsets[j] + r.scales[j] for r in rects) for j in range(dim))
    return Rect(tuple(h - l for l, h in zip(lo, hi)), lo)


# ---------------------------------------------------------------------------
# regimes


REGIMES = ("overlapping", "disjoint", "m-overlap", "u-overlap")


def regime_kind(regime) -> str:
    return regime if isinstance(regime, str) else regime[0]


def regime_str(regime) -> str:
    if isinstance(regime, str):
        return regime
    kind = regime[0]
    if kind == "m-overlap":
        return "m-overlap(%d)" % regime[1]
    if kind == "u-overlap":
        _, blocks, u = regime
        btxt = "|".join(",".join(block) for block in blocks)
        utxt = ",".join(
            "%d%d=%s" % (p + 1, q + 1, "inf" if u[(p, q)] == "inf" else str(u[(p, q)]))
            for p in range(len(blocks))
            for q in range(p, len(blocks))
        )
        return "u-overlap(%s;%s)" % (btxt, utxt)
    raise OperadicError("unknown regime %r" % (regime,))


def regime_parse(text: str):
    text = text.strip()
    if text in ("overlapping", "disjoint"):
        return text
    m = re.fullmatch(r"m-overlap\((\d+)\)", text)
    if m:
        return ("m-overlap", int(m.group(1)))
    m = re.fullmatch(r"u-overlap\(([^;]*);(.*)\)", text)
    if m:
        blocks = tuple(tuple(lbl for lbl in part.split(",") if lbl) for part in m.group(1).split("|"))
        u = {}
        for item in m.group(2).split(","):
            pq, _, val = item.partition("=")
            p, q = int(pq[0]) - 1, int(pq[1]) - 1
            u[(p, q)] = "inf" if val == "inf" else int(val)
        return ("u-overlap", blocks, u)
    raise OperadicError("unknown regime %r" % text)


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class RectConfig:
    dim: int
    rects: tuple  # sorted tuple of (label, Rect)
    regime: object = "overlapping"

    def __post_init__(self):
        if isinstance(self.rects, dict):
            items = tuple(sorted(self.rects.items(), key=lambda kv: label_key(kv[0])))
        else:
            items = tuple(sorted(tuple(self.rects), key=lambda kv: label_key(kv[0])))
        object.__setattr__(self, "rects", items)
        seen = set()
        for label, r in items:
            if not isinstance(label, str) or not label:
                raise OperadicError("labels must be non-empty strings")
            if label in seen:
                raise OperadicError("duplicate label %r" % label)
            seen.add(label)
            if r.dim != self.dim:
                raise OperadicError("rectangle of dim %d in config of dim %d" % (r.dim, self.dim))
        regime_str(self.regime)  # validates shape

    @property
    def labels(self) -> tuple:
        return tuple(lbl for lbl, _ in self.rects)

    @property
    def arity(self) -> int:
        return len(self.rects)

    def rect(self, label: str) -> Rect:
        for lbl, r in self.rects:
            if lbl == label:
                return r
        raise OperadicError("missing slot %r" % label)

    def has(self, label: str) -> bool:
        return any(lbl == label for lbl, _ in self.rects)

    def as_dict(self) -> dict:
        return dict(self.rects)

    def with_regime(self, regime) -> "RectConfig":
        return RectConfig(self.dim, self.rects, regime)

    def relabel(self, mapping: dict) -> "RectConfig":
        """Injectively rename labels; identity outside the mapping."""
        out = {}
        for lbl, r in self.rects:
            new = mapping.get(lbl, lbl)
            if new in out:
                raise OperadicError("label collision under relabeling: %r" % new)
            out[new] = r
        return RectConfig(self.dim, out, self.regime)

    def drop(self, label: str) -> "RectConfig":
        if not self.has(label):
            raise OperadicError("missing slot %r" % label)
        return RectConfig(self.dim, {l: r for l, r in self.rects if l != label}, self.regime)

    def numeric(self) -> bool:
        return all(re.fullmatch(r"\d+", lbl) for lbl in self.labels)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "regime": regime_str(self.regime),
            "rects": {
                lbl: {"a": [rat_str(a) for a in r.scales], "b": [rat_str(b) for b in r.offsets]}
                for lbl, r in self.rects
            },
        }

    @staticmethod
    def from_json(data) -> "RectConfig":
        if isinstance(data, str):
            data = json.loads(data)
        rects = {
            lbl: Rect(tuple(rat(a) for a in spec["a"]), tuple(rat(b) for b in spec["b"]))
            for lbl, spec in data["rects"].items()
        }
        return RectConfig(int(data["dim"]), rects, regime_parse(data.get("regime", "overlapping")))


def config_from_seq(dim: int, rect_list, regime="overlapping") -> RectConfig:
    """Labels "1", "2", ... in the given order."""
    return RectConfig(dim, {str(i + 1): r for i, r in enumerate(rect_list)}, regime)


def unit_config(label: str, dim: int, regime="overlapping") -> RectConfig:
    return RectConfig(dim, {label: Rect.identity(dim)}, regime)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: str = ""
    witness: tuple = ()

    def __bool__(self):
        return self.ok


def validate_config(config: RectConfig, regime=None) -> ValidationResult:
    """Containment plus the regime's overlap predicate; total on valid shapes."""
    regime = config.regime if regime is None else regime
    for lbl, r in config.rects:
        if not r.in_unit():
            return ValidationResult(False, "containment", (lbl,))
    kind = regime_kind(regime)
    if kind == "overlapping":
        return ValidationResult(True)
    if kind == "disjoint":
        items = config.rects
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                if rects_overlap(items[i][1], items[j][1]):
                    return ValidationResult(False, "disjointness", (items[i][0], items[j][0]))
        return ValidationResult(True)
    if kind == "m-overlap":
        m = regime[1]
        if m < 1:
            raise OperadicError("m-overlap needs m >= 1")
        items = config.rects
        from itertools import combinations

        for subset in combinations(items, min(m, len(items))):
            if len(subset) < m:
                break
            if common_box([r for _, r in subset]) is not None:
                return ValidationResult(False, "m-overlap", tuple(lbl for lbl, _ in subset))
        return ValidationResult(True)
    if kind == "u-overlap":
        _, blocks, u = regime
        block_labels = [lbl for block in blocks for lbl in block]
        if sorted(block_labels, key=label_key) != sorted(config.labels, key=label_key):
            return ValidationResult(False, "u-overlap-blocks", tuple(config.labels))
        from itertools import combinations

        for p in range(len(blocks)):
            for q in range(p, len(blocks)):
                bound = u.get((p, q), "inf")
                if bound == "inf":
                    continue
                for a in blocks[p]:
                    pool = [b for b in blocks[q] if not (p == q and b == a)]
                    for chosen in combinations(pool, bound):
                        group = [config.rect(a)] + [config.rect(b) for b in chosen]
                        if common_box(group) is not None:
                            return ValidationResult(False, "u-overlap", (a,) + tuple(chosen))
        return ValidationResult(True)
    raise OperadicError("unknown regime %r" % (regime,))


# ---------------------------------------------------------------------------
# operadic composition


def rect_compose(outer: RectConfig, slot, inner: RectConfig) -> RectConfig:
    """Substitute `inner` into input `slot` of `outer`.

    A string slot performs label-set composition: the result is indexed by
    (outer labels minus the slot) plus inner labels, and overlapping label
    sets are an error.  An integer slot requires numeric labels "1".."n" on
    both configurations and renumbers the result to "1".."n+m-1" in the
    standard way (inner block replaces position i).
    """
    if isinstance(slot, int):
        return _rect_compose_numeric(outer, slot, inner)
    if outer.dim != inner.dim:
        raise OperadicError("dim mismatch: %d vs %d" % (outer.dim, inner.dim))
    socket = outer.rect(slot)  # raises on missing slot
    out = {lbl: r for lbl, r in outer.rects if lbl != slot}
    for lbl, r in inner.rects:
        if lbl in out:
            raise OperadicError("label collision %r in composition" % lbl)
        out[lbl] = socket.compose(r)
    return RectConfig(outer.dim, out, outer.regime)


def _rect_compose_numeric(outer: RectConfig, i: int, inner: RectConfig) -> RectConfig:
    if not (outer.numeric() and inner.numeric()):
        raise OperadicError("positional composition needs numeric labels")
    n, m = outer.arity, inner.arity
    if not 1 <= i <= n:
        raise OperadicError("missing slot %d" % i)
    tmp_inner = inner.relabel({str(j + 1): "in:%d" % (j + 1) for j in range(m)})
    composed = rect_compose(outer, str(i), tmp_inner)
    mapping = {}
    for j in range(1, i):
        mapping[str(j)] = str(j)
    for j in range(1, m + 1):
        mapping["in:%d" % j] = str(i + j - 1)
    for j in range(i + 1, n + 1):
        mapping[str(j)] = str(j + m - 1)
    return composed.relabel(mapping)


def act_perm(config: RectConfig, sigma) -> RectConfig:
    """Right action of a permutation on a numeric configuration.

    sigma is a tuple with sigma[j-1] in 1..n; the result's slot j carries the
    rectangle formerly at slot sigma[j].
    """
    if not config.numeric():
        raise OperadicError("permutation action needs numeric labels")
    n = config.arity
    if sorted(sigma) != list(range(1, n + 1)):
        raise OperadicError("not a permutation of 1..%d" % n)
    rects = config.as_dict()
    return RectConfig(config.dim, {str(j + 1): rects[str(sigma[j])] for j in range(n)}, config.regime)


# ---------------------------------------------------------------------------
# paddings and splittings


def pad_rect(r: Rect, dim2: int, mode: str) -> Rect:
    """Extend a rectangle to a higher dimension.

    mode "rect": identity on the new axes.
    mode "cube": input must be a cube; new axes get the same scale, centered.
    """
    if dim2 < r.dim:
        raise OperadicError("cannot pad dim %d to smaller dim %d" % (r.dim, dim2))
    extra = dim2 - r.dim
    if mode == "rect":
        return Rect(r.scales + (Fraction(1),) * extra, r.offsets + (Fraction(0),) * extra)
    if mode == "cube":
        if not r.is_cube():
            raise OperadicError("non-cube rectangle in cube mode")
        a = r.scales[0]
        c = (1 - a) / 2
        return Rect(r.scales + (a,) * extra, r.offsets + (c,) * extra)
    raise OperadicError("unknown padding mode %r" % mode)


def include_rect(config: RectConfig, dim2: int, mode: str) -> RectConfig:
    """Apply pad_rect to every member; an operad map for both modes."""
    return RectConfig(dim2, {lbl: pad_rect(r, dim2, mode) for lbl, r in config.rects}, config.regime)


def embed_component(config: RectConfig, cube_dim: int, ambient_dim: int) -> RectConfig:
    """Centered padding up to cube_dim, then identity padding up to ambient_dim.

    Places a lower-dimensional cube configuration into the ambient rectangle
    operad; used for the per-component right actions on glued configurations.
    """
    return include_rect(include_rect(config, cube_dim, "cube"), ambient_dim, "rect")


def fiber_pad(r: Rect, ambient_dim: int) -> Rect:
    """Centered padding all the way up; the relative map into arity one."""
    return pad_rect(r, ambient_dim, "cube")


def cube_split(k: int, n: int) -> RectConfig:
    """k slabs of [0,1]^n stacked along the last axis, labels "1".."k"."""
    if k < 1 or n < 1:
        raise OperadicError("cube_split needs k >= 1 and n >= 1")
    one = Fraction(1)
    rects = {}
    for i in range(k):
        scales = (one,) * (n - 1) + (Fraction(1, k),)
        offsets = (Fraction(0),) * (n - 1) + (Fraction(i, k),)
        rects[str(i + 1)] = Rect(scales, offsets)
    return RectConfig(n, rects, "disjoint")


# ---------------------------------------------------------------------------
# marked fiber configurations and the glueing map


@dataclass(frozen=True)
class MarkedFiberConfig:
    """Per-component cube configurations with matching marked images.

    configs[i] is a cube configuration of dimension dims[i] containing the
    marked label "*", or None when the component is absent.  The centered
    paddings of the marked cubes to the ambient dimension must coincide.
    """

    dims: tuple
    ambient: int
    configs: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "configs", tuple(self.configs))
        if len(dims) != len(self.configs):
            raise OperadicError("dims/configs length mismatch")
        if any(d1 > d2 for d1, d2 in zip(dims, dims[1:])):
            raise OperadicError("component dimensions must be nondecreasing")
        if not any(c is not None for c in self.configs):
            raise OperadicError("at least one component must be present")
        marked_pads = []
        for d, cfg in zip(dims, self.configs):
            if cfg is None:
                continue
            if d >= self.ambient:
                raise OperadicError("component dimension %d must be < ambient %d" % (d, self.ambient))
            if cfg.dim != d:
                raise OperadicError("component config has wrong dimension")
            for lbl, r in cfg.rects:
                if not r.is_cube():
                    raise OperadicError("non-cube rectangle in marked fiber component")
            if not cfg.has(MARK):
                raise OperadicError("component config missing marked label")
            ok = validate_config(cfg, "disjoint")
            if not ok:
                raise OperadicError("marked fiber component invalid: %s %r" % (ok.reason, ok.witness))
            marked_pads.append(fiber_pad(cfg.rect(MARK), self.ambient))
        if any(p != marked_pads[0] for p in marked_pads):
            raise OperadicError("fiber condition violation: marked cubes disagree")

    @property
    def present(self) -> tuple:
        return tuple(i for i, c in enumerate(self.configs) if c is not None)


def epsilon_glue(f: MarkedFiberConfig) -> RectConfig:
    """Stack the present components into last-axis slabs and fuse their marked
    rectangles into a single one.

    The result is a disjoint configuration over the labels "i:a" (component i,
    label a) plus "*"; the fused rectangle is the bounding box of the marked
    ones, which the fiber condition makes an exact union.
    """
    present = f.present
    l = len(present)
    n = f.ambient
    slabs = cube_split(l, n)
    out = {}
    marked = []
    for pos, i in enumerate(present):
        cfg = f.configs[i]
        placed = embed_component(cfg, f.dims[-1], n)
        slab = slabs.rect(str(pos + 1))
        for lbl, r in placed.rects:
            moved = slab.compose(r)
            if lbl == MARK:
                marked.append(moved)
            else:
                out["%d:%s" % (i + 1, lbl)] = moved
    fused = bounding_rect(marked)
    _assert_exact_union(fused, marked)
    out[MARK] = fused
    result = RectConfig(n, out, "disjoint")
    ok = validate_config(result, "disjoint")
    if not ok:
        raise OperadicError("glued configuration not disjoint: %r" % (ok.witness,))
    return result


def glue_shared(dims: tuple, ambient: int, configs: tuple) -> RectConfig:
    """Stack compatible components and fuse rectangles sharing a label.

    configs[i] is a cube configuration of dimension dims[i] over a plain label
    set, or None for an absent component.  A label appearing in several
    components must appear in all present ones, with centered paddings of its
    cubes agreeing (the pairwise compatibility condition); the fused rectangle
    is the bounding box, exact for the same column-tiling reason as above.
    """
    present = [i for i, c in enumerate(configs) if c is not None]
    if not present:
        raise OperadicError("at least one component must be present")
    l = len(present)
    count = {}
    for i in present:
        cfg = configs[i]
        if cfg.dim != dims[i]:
            raise OperadicError("component config has wrong dimension")
        if dims[i] >= ambient:
            raise OperadicError("component dimension %d must be < ambient %d" % (dims[i], ambient))
        for lbl, r in cfg.rects:
            if not r.is_cube():
                raise OperadicError("non-cube rectangle in shared-glue component")
            count[lbl] = count.get(lbl, 0) + 1
        ok = validate_config(cfg, "disjoint")
        if not ok:
            raise OperadicError("shared-glue component invalid: %s %r" % (ok.reason, ok.witness))
    for lbl, c in count.items():
        if c != 1 and c != l:
            raise OperadicError("label %r shared by %d of %d components" % (lbl, c, l))
        if c == l and l > 1:
            pads = [fiber_pad(configs[i].rect(lbl), ambient) for i in present]
            if any(p != pads[0] for p in pads):
                raise OperadicError("fiber condition violation at shared label %r" % lbl)
    slabs = cube_split(l, ambient)
    groups = {}
    for pos, i in enumerate(present):
        placed = embed_component(configs[i], dims[-1], ambient)
        slab = slabs.rect(str(pos + 1))
        for lbl, r in placed.rects:
            groups.setdefault(lbl, []).append(slab.compose(r))
    out = {}
    for lbl, rects in groups.items():
        fused = bounding_rect(rects)
        _assert_exact_union(fused, rects)
        out[lbl] = fused
    result = RectConfig(ambient, out, "disjoint")
    ok = validate_config(result, "disjoint")
    if not ok:
        raise OperadicError("glued configuration not disjoint: %r" % (ok.witness,))
    return result


def _assert_exact_union(box: Rect, parts) -> None:
    """The fused rectangles must tile their bounding box exactly."""
    total = Fraction(0)
    for i, r in enumerate(parts):
        for r2 in parts[i + 1 :]:
            if rects_overlap(r, r2):
                raise OperadicError("glued rectangles overlap")
        vol = Fraction(1)
        for a in r.scales:
            vol *= a
        total += vol
    box_vol = Fraction(1)
    for a in box.scales:
        box_vol *= a
    if total != box_vol:
        raise OperadicError("glued rectangles do not tile their bounding box")


# ---------------------------------------------------------------------------
# configuration-space coordinates


@dataclass(frozen=True)
class FMCoords:
    n: int
    dim: int
    directions: tuple  # tuple of ((i, j), vector)
    ratio_squares: tuple  # tuple of ((i, j, k), Fraction | INF)

    def direction(self, i: int, j: int) -> tuple:
        return dict(self.directions)[(i, j)]

    def ratio_square(self, i: int, j: int, k: int):
        return dict(self.ratio_squares)[(i, j, k)]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "dim": self.dim,
            "directions": {"%d,%d" % ij: [rat_str(c) for c in v] for ij, v in self.directions},
            "ratioSquares": {"%d,%d,%d" % ijk: rat_str(v) for ijk, v in self.ratio_squares},
        }


def fm_coords(points) -> FMCoords:
    """Unnormalized pairwise directions and squared distance ratios.

    points are 1-indexed in the output keys; they must be pairwise distinct.
    Ratio (i, j, k) is |x_i - x_j|^2 / |x_i - x_k|^2 with 0 and INF sentinels
    reserved for degenerate limits (never produced from distinct points).
    """
    pts = [tuple(rat(c) for c in p) for p in points]
    n = len(pts)
    if n < 1:
        raise OperadicError("need at least one point")
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise OperadicError("points of mixed dimension")
    for i in range(n):
        for j in range(i + 1, n):
            if pts[i] == pts[j]:
                raise OperadicError("points %d and %d coincide" % (i + 1, j + 1))

    def dist2(p, q):
        return sum((a - b) ** 2 for a, b in zip(p, q))

    directions = []
    for i in range(n):
        for j in range(n):
            if i != j:
                vec = tuple(b - a for a, b in zip(pts[i], pts[j]))
                directions.append(((i + 1, j + 1), vec))
    ratios = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) == 3:
                    num = dist2(pts[i], pts[j])
                    den = dist2(pts[i], pts[k])
                    if den == 0:
                        val = INF
                    else:
                        val = Fraction(num, den) if num else Fraction(0)
                    ratios.append(((i + 1, j + 1, k + 1), val))
    return FMCoords(n, dim, tuple(directions), tuple(ratios))


# ---------------------------------------------------------------------------
# standard embeddings (cube components plus one anti-cube component)


@dataclass(frozen=True)
class StandardEmbedding:
    """Componentwise positive-scaling-plus-translation map between families of
    unit cubes with one distinguished unbounded component labeled "*".

    alpha sends source components to target components ("*" to "*"); maps[a]
    is (scale, translation) acting on component a's copy of the cube (or on
    the complement of the cube for "*").
    """

    dim: int
    source: tuple
    target: tuple
    alpha: tuple  # sorted tuple of (src, tgt)
    maps: tuple  # sorted tuple of (src, (scale, translation))

    def __post_init__(self):
        src = tuple(sorted(self.source, key=label_key))
        tgt = tuple(sorted(self.target, key=label_key))
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)
        alpha = tuple(sorted(dict(self.alpha).items(), key=lambda kv: label_key(kv[0])))
        object.__setattr__(self, "alpha", alpha)
        maps = []
        for a, (scale, vec) in sorted(dict(self.maps).items(), key=lambda kv: label_key(kv[0])):
            maps.append((a, (rat(scale), tuple(rat(c) for c in vec))))
        object.__setattr__(self, "maps", tuple(maps))
        if MARK not in src or MARK not in tgt:
            raise OperadicError("families must contain the anti-cube label")
        amap = dict(alpha)
        if set(amap) != set(src) or not set(amap.values()) <= set(tgt):
            raise OperadicError("component map must cover the source family")
        if amap[MARK] != MARK:
            raise OperadicError("anti-cube must map to the anti-cube")
        mm = dict(maps)
        if set(mm) != set(src):
            raise OperadicError("every component needs an affine map")
        for a, (scale, vec) in mm.items():
            if scale <= 0:
                raise OperadicError("scales must be positive")
            if len(vec) != self.dim:
                raise OperadicError("translation dimension mismatch")

    def component_map(self, a: str) -> tuple:
        return dict(self.maps)[a]

    def image_box(self, a: str) -> tuple:
        """(lo, hi) of the image of the open unit cube under component a."""
        scale, vec = self.component_map(a)
        return (tuple(vec), tuple(scale + c for c in vec))


def _box_disjoint(b1, b2) -> bool:
    return any(max(l1, l2) >= min(h1, h2) for l1, h1, l2, h2 in zip(b1[0], b1[1], b2[0], b2[1]))


def _box_inside(inner, outer) -> bool:
    return all(lo >= lo2 and hi <= hi2 for lo, hi, lo2, hi2 in zip(inner[0], inner[1], outer[0], outer[1]))


def validate_embedding(e: StandardEmbedding) -> ValidationResult:
    amap = dict(e.alpha)
    hole_scale, hole_vec = e.component_map(MARK)
    hole = (tuple(hole_vec), tuple(hole_scale + c for c in hole_vec))
    unit = (tuple(Fraction(0) for _ in range(e.dim)), tuple(Fraction(1) for _ in range(e.dim)))
    if not _box_inside(unit, hole):
        return ValidationResult(False, "containment", (MARK,))
    for a in e.source:
        if a == MARK:
            continue
        box = e.image_box(a)
        if amap[a] == MARK:
            # into the complement: avoid the closed unit cube, stay in the hole
            if not any(hi <= 0 or lo >= 1 for lo, hi in zip(box[0], box[1])):
                return ValidationResult(False, "containment", (a,))
            if not _box_inside(box, hole):
                return ValidationResult(False, "containment", (a, MARK))
        else:
            if not _box_inside(box, unit):
                return ValidationResult(False, "containment", (a,))
    cubes = [a for a in e.source if a != MARK]
    for i in range(len(cubes)):
        for j in range(i + 1, len(cubes)):
            a, b = cubes[i], cubes[j]
            if amap[a] == amap[b] and not _box_disjoint(e.image_box(a), e.image_box(b)):
                return ValidationResult(False, "disjointness", (a, b))
    return ValidationResult(True)


def semb_compose(f: StandardEmbedding, g: StandardEmbedding) -> StandardEmbedding:
    """Diagrammatic composite: f from A to B, then g from B to C."""
    if f.dim != g.dim:
        raise OperadicError("dim mismatch in embedding composition")
    if f.target != g.source:
        raise OperadicError("embedding families do not line up")
    for e in (f, g):
        ok = validate_embedding(e)
        if not ok:
            raise OperadicError("containment violation at %r: %s" % (ok.witness, ok.reason))
    fa, ga = dict(f.alpha), dict(g.alpha)
    alpha = {a: ga[fa[a]] for a in f.source}
    maps = {}
    for a in f.source:
        s1, v1 = f.component_map(a)
        s2, v2 = g.component_map(fa[a])
        maps[a] = (s2 * s1, tuple(s2 * c1 + c2 for c1, c2 in zip(v1, v2)))
    out = StandardEmbedding(f.dim, f.source, g.target, alpha, maps)
    ok = validate_embedding(out)
    if not ok:
        raise OperadicError("containment violation at %r: %s" % (ok.witness, ok.reason))
    return out


def identity_embedding(dim: int, labels) -> StandardEmbedding:
    labels = tuple(labels)
    if MARK not in labels:
        labels = labels + (MARK,)
    one = Fraction(1)
    zero = tuple(Fraction(0) for _ in range(dim))
    return StandardEmbedding(
        dim,
        labels,
        labels,
        {a: a for a in labels},
        {a: (one, zero) for a in labels},
    )
