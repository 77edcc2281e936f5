"""Geometry core: independent oracles first, then pinned examples and axioms."""

from fractions import Fraction

import pytest
import sympy as sp

from operadic.errors import OperadicError
from operadic.exactgeom import (
    INF,
    MARK,
    Cube,
    MarkedFiberConfig,
    Rect,
    RectConfig,
    ValidationResult,
    act_perm,
    bounding_rect,
    config_from_seq,
    cube_split,
    epsilon_glue,
    fm_coords,
    glue_shared,
    identity_embedding,
    include_rect,
    pad_rect,
    rat,
    rect_compose,
    regime_parse,
    regime_str,
    semb_compose,
    unit_config,
    validate_config,
    validate_embedding,
    StandardEmbedding,
)
from operadic.rng import Stream
from operadic.sampling import (
    sample_cube_config,
    sample_disjoint_config,
    sample_marked_fiber,
    sample_moverlap_config,
    sample_overlapping_config,
    sample_perm,
    sample_points,
    sample_rect,
)

# ---------------------------------------------------------------------------
# oracles (independent implementations used to check the engine)


def oracle_compose_rect(outer: Rect, inner: Rect) -> Rect:
    """Symbolic affine substitution, axis by axis."""
    t = sp.Symbol("t")
    scales, offsets = [], []
    for a, b, a2, b2 in zip(outer.scales, outer.offsets, inner.scales, inner.offsets):
        expr = sp.expand(sp.Rational(a.numerator, a.denominator) * (sp.Rational(a2.numerator, a2.denominator) * t + sp.Rational(b2.numerator, b2.denominator)) + sp.Rational(b.numerator, b.denominator))
        coeff1 = sp.Rational(expr.coeff(t, 1))
        coeff0 = sp.Rational(expr.coeff(t, 0))
        scales.append(Fraction(int(coeff1.p), int(coeff1.q)))
        offsets.append(Fraction(int(coeff0.p), int(coeff0.q)))
    return Rect(tuple(scales), tuple(offsets))


def oracle_overlap(r1: Rect, r2: Rect) -> bool:
    """Open-box intersection via sympy set algebra."""
    for j in range(r1.dim):
        lo1, hi1 = r1.axis_interval(j)
        lo2, hi2 = r2.axis_interval(j)
        i1 = sp.Interval.open(sp.Rational(lo1.numerator, lo1.denominator), sp.Rational(hi1.numerator, hi1.denominator))
        i2 = sp.Interval.open(sp.Rational(lo2.numerator, lo2.denominator), sp.Rational(hi2.numerator, hi2.denominator))
        if i1.intersect(i2) is sp.EmptySet or i1.intersect(i2) == sp.EmptySet:
            return False
    return True


def perm_block_compose(sigma: tuple, i: int, m: int) -> tuple:
    """Insert an identity block of size m at input i of the permutation."""
    n = len(sigma)
    out = []
    for j in range(1, n + m):
        if j < i:
            s = sigma[j - 1]
        elif j < i + m:
            out.append(sigma[i - 1] + (j - i))
            continue
        else:
            s = sigma[j - m]
        out.append(s if s < sigma[i - 1] else s + m - 1)
    return tuple(out)


# ---------------------------------------------------------------------------
# pinned examples


def seq1(*pairs) -> RectConfig:
    return config_from_seq(1, [Rect((rat(a),), (rat(b),)) for a, b in pairs])


class TestPinnedExamples:
    def test_interval_self_composition(self):
        x = seq1(("1/2", 0), ("1/2", "1/2"))
        out = rect_compose(x, 1, x)
        assert out == seq1(("1/4", 0), ("1/4", "1/4"), ("1/2", "1/2"))

    def test_cube_split_2_2(self):
        out = cube_split(2, 2)
        assert out.rect("1") == Rect((1, Fraction(1, 2)), (0, 0))
        assert out.rect("2") == Rect((1, Fraction(1, 2)), (0, Fraction(1, 2)))

    def test_include_rect_cube_mode(self):
        cfg = seq1(("1/2", 0))
        out = include_rect(cfg, 2, "cube")
        assert out.rect("1") == Rect((Fraction(1, 2), Fraction(1, 2)), (0, Fraction(1, 4)))

    def test_include_rect_cube_mode_rejects_non_cube(self):
        cfg = RectConfig(2, {"1": Rect((Fraction(1, 2), Fraction(1, 3)), (0, 0))})
        with pytest.raises(OperadicError):
            include_rect(cfg, 3, "cube")

    def test_fm_ratio_example(self):
        coords = fm_coords([(0,), (1,), (3,)])
        assert coords.ratio_square(1, 2, 3) == Fraction(1, 9)
        assert coords.direction(1, 2) == (Fraction(1),)
        assert coords.direction(2, 1) == (Fraction(-1),)


# ---------------------------------------------------------------------------
# composition against the symbolic oracle


class TestComposeOracle:
    def test_rect_composition_matches_sympy(self):
        rng = Stream(11, ("compose-oracle",))
        for trial in range(40):
            t = rng.split(trial)
            dim = t.randint(1, 3)
            outer, inner = sample_rect(t.split("o"), dim), sample_rect(t.split("i"), dim)
            assert outer.compose(inner) == oracle_compose_rect(outer, inner)

    def test_config_composition_composes_socket(self):
        rng = Stream(12, ("socket",))
        for trial in range(20):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            outer = sample_overlapping_config(t.split("o"), dim, ["1", "2", "3"])
            inner = sample_overlapping_config(t.split("i"), dim, ["4", "5"])
            out = rect_compose(outer, "2", inner)
            assert sorted(out.labels) == ["1", "3", "4", "5"]
            for lbl in ("4", "5"):
                assert out.rect(lbl) == oracle_compose_rect(outer.rect("2"), inner.rect(lbl))
            assert out.rect("1") == outer.rect("1")

    def test_label_collision_raises(self):
        cfg = RectConfig(1, {"1": Rect((Fraction(1, 2),), (0,)), "2": Rect((Fraction(1, 4),), (Fraction(1, 2),))})
        with pytest.raises(OperadicError):
            rect_compose(cfg, "1", cfg)

    def test_missing_slot_and_dim_mismatch(self):
        x = unit_config("1", 1)
        with pytest.raises(OperadicError):
            rect_compose(x, "9", x)
        with pytest.raises(OperadicError):
            rect_compose(x, "1", unit_config("2", 2))


# ---------------------------------------------------------------------------
# operad axioms


class TestOperadAxioms:
    def test_nested_associativity_set_indexed(self):
        rng = Stream(13, ("assoc-nested",))
        for trial in range(30):
            t = rng.split(trial)
            dim = t.randint(1, 3)
            x = sample_overlapping_config(t.split("x"), dim, ["a", "b"])
            y = sample_overlapping_config(t.split("y"), dim, ["c", "d"])
            z = sample_overlapping_config(t.split("z"), dim, ["e"])
            lhs = rect_compose(rect_compose(x, "a", y), "c", z)
            rhs = rect_compose(x, "a", rect_compose(y, "c", z))
            assert lhs == rhs

    def test_disjoint_slots_commute(self):
        rng = Stream(14, ("assoc-disjoint",))
        for trial in range(30):
            t = rng.split(trial)
            dim = t.randint(1, 3)
            x = sample_overlapping_config(t.split("x"), dim, ["a", "b", "c"])
            y = sample_overlapping_config(t.split("y"), dim, ["d"])
            z = sample_overlapping_config(t.split("z"), dim, ["e", "f"])
            lhs = rect_compose(rect_compose(x, "a", y), "c", z)
            rhs = rect_compose(rect_compose(x, "c", z), "a", y)
            assert lhs == rhs

    def test_units(self):
        rng = Stream(15, ("units",))
        for trial in range(20):
            t = rng.split(trial)
            dim = t.randint(1, 3)
            x = sample_overlapping_config(t.split("x"), dim, ["a", "b"])
            assert rect_compose(x, "a", unit_config("a", dim)) == x
            assert rect_compose(unit_config("u", dim), "u", x) == x

    def test_skeletal_equivariance(self):
        rng = Stream(16, ("equivariance",))
        for trial in range(30):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            n, m = t.randint(1, 4), t.randint(0, 3)
            x = sample_overlapping_config(t.split("x"), dim, [str(j) for j in range(1, n + 1)])
            y = sample_overlapping_config(t.split("y"), dim, [str(j) for j in range(1, m + 1)])
            sigma = sample_perm(t.split("s"), n)
            i = t.randint(1, n)
            lhs = rect_compose(act_perm(x, sigma), i, y)
            rhs = act_perm(rect_compose(x, sigma[i - 1], y), perm_block_compose(sigma, i, m))
            assert lhs == rhs

    def test_arity_zero_removes_slot(self):
        x = seq1(("1/2", 0), ("1/2", "1/2"))
        out = rect_compose(x, 1, RectConfig(1, {}))
        assert out == seq1(("1/2", "1/2"))


# ---------------------------------------------------------------------------
# regimes


class TestRegimes:
    def test_disjoint_validator_matches_sympy(self):
        rng = Stream(17, ("disjoint-oracle",))
        for trial in range(25):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            cfg = sample_overlapping_config(t.split("cfg"), dim, ["1", "2", "3"])
            expect = all(
                not oracle_overlap(cfg.rect(a), cfg.rect(b))
                for idx, a in enumerate(cfg.labels)
                for b in cfg.labels[idx + 1 :]
            )
            assert bool(validate_config(cfg, "disjoint")) == expect

    def test_sampled_regimes_validate(self):
        rng = Stream(18, ("regimes",))
        for trial in range(20):
            t = rng.split(trial)
            dim = t.randint(1, 3)
            dis = sample_disjoint_config(t.split("d"), dim, ["1", "2", "3", "4"])
            assert validate_config(dis, "disjoint")
            mo = sample_moverlap_config(t.split("m"), dim, ["1", "2", "3", "4", "5"], 3)
            assert validate_config(mo, ("m-overlap", 3))

    def test_moverlap_witness(self):
        base = Rect((Fraction(1, 2),), (Fraction(1, 4),))
        cfg = RectConfig(1, {"1": base, "2": base, "3": base})
        res = validate_config(cfg, ("m-overlap", 3))
        assert not res and res.reason == "m-overlap" and set(res.witness) == {"1", "2", "3"}
        assert validate_config(cfg, ("m-overlap", 4))  # no 4-subset exists

    def test_containment_witness(self):
        cfg = RectConfig(1, {"1": Rect((Fraction(2),), (0,))})
        res = validate_config(cfg, "overlapping")
        assert not res and res.reason == "containment" and res.witness == ("1",)

    def test_disjoint_closed_under_composition(self):
        rng = Stream(19, ("closure",))
        for trial in range(15):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            x = sample_disjoint_config(t.split("x"), dim, ["1", "2", "3"])
            y = sample_disjoint_config(t.split("y"), dim, ["4", "5"])
            assert validate_config(rect_compose(x, "2", y), "disjoint")

    def test_moverlap_closed_under_disjoint_insertions(self):
        rng = Stream(20, ("m-closure",))
        for trial in range(15):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            m = 3
            mo = sample_moverlap_config(t.split("m"), dim, ["1", "2", "3", "4"], m)
            dis = sample_disjoint_config(t.split("d"), dim, ["5", "6"])
            assert validate_config(rect_compose(mo, "2", dis), ("m-overlap", m))
            outer = sample_disjoint_config(t.split("o"), dim, ["7", "8"])
            assert validate_config(rect_compose(outer, "7", mo), ("m-overlap", m))

    def test_u_overlap_blocks(self):
        # two blocks; the pair bound u[1,2] = 1 forbids any overlap across blocks
        r1 = Rect((Fraction(1, 2),), (0,))
        r2 = Rect((Fraction(1, 2),), (Fraction(1, 4),))
        cfg = RectConfig(1, {"a": r1, "b": r2})
        regime = ("u-overlap", (("a",), ("b",)), {(0, 0): "inf", (0, 1): 1, (1, 1): "inf"})
        res = validate_config(cfg, regime)
        assert not res and res.reason == "u-overlap" and res.witness == ("a", "b")
        apart = RectConfig(1, {"a": r1, "b": Rect((Fraction(1, 4),), (Fraction(3, 4),))})
        assert validate_config(apart, regime)

    def test_u_overlap_same_block_excludes_self(self):
        # u[1,1] = 1: pairwise disjoint within the block, self not counted
        r1 = Rect((Fraction(1, 4),), (0,))
        r2 = Rect((Fraction(1, 4),), (Fraction(1, 2),))
        cfg = RectConfig(1, {"a": r1, "b": r2})
        regime = ("u-overlap", (("a", "b"),), {(0, 0): 1})
        assert validate_config(cfg, regime)

    def test_regime_string_round_trip(self):
        for regime in (
            "overlapping",
            "disjoint",
            ("m-overlap", 3),
            ("u-overlap", (("a", "b"), ("c",)), {(0, 0): 2, (0, 1): "inf", (1, 1): 1}),
        ):
            assert regime_parse(regime_str(regime)) == regime


# ---------------------------------------------------------------------------
# paddings


class TestPadding:
    def test_include_rect_is_an_operad_map(self):
        rng = Stream(21, ("padding",))
        for trial in range(20):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            dim2 = dim + t.randint(1, 2)
            x = sample_overlapping_config(t.split("x"), dim, ["a", "b"])
            y = sample_overlapping_config(t.split("y"), dim, ["c"])
            lhs = include_rect(rect_compose(x, "a", y), dim2, "rect")
            rhs = rect_compose(include_rect(x, dim2, "rect"), "a", include_rect(y, dim2, "rect"))
            assert lhs == rhs
            xc = sample_cube_config(t.split("xc"), dim, ["a", "b"])
            yc = sample_cube_config(t.split("yc"), dim, ["c"])
            lhs = include_rect(rect_compose(xc, "a", yc), dim2, "cube")
            rhs = rect_compose(include_rect(xc, dim2, "cube"), "a", include_rect(yc, dim2, "cube"))
            assert lhs == rhs

    def test_pad_rect_values(self):
        r = Cube(Fraction(1, 3), (Fraction(1, 3),))
        assert pad_rect(r, 2, "rect") == Rect((Fraction(1, 3), 1), (Fraction(1, 3), 0))
        assert pad_rect(r, 2, "cube") == Rect((Fraction(1, 3), Fraction(1, 3)), (Fraction(1, 3), Fraction(1, 3)))


# ---------------------------------------------------------------------------
# glueing


class TestEpsilonGlue:
    def _sample(self, t, with_absent=False):
        dims = (1, 2)
        n = 3
        sizes = (t.randint(0, 2), t.randint(0, 2))
        labels = (
            ["a%d" % j for j in range(sizes[0])],
            ["b%d" % j for j in range(sizes[1])],
        )
        present = None
        if with_absent and t.maybe():
            present = (t.randint(0, 1),)
        return sample_marked_fiber(t, dims, n, labels, present=present)

    def test_glue_postconditions(self):
        rng = Stream(22, ("glue",))
        for trial in range(30):
            t = rng.split(trial)
            f = self._sample(t)
            out = epsilon_glue(f)
            assert validate_config(out, "disjoint")
            expected_arity = 1 + sum(c.arity - 1 for c in f.configs if c is not None)
            assert out.arity == expected_arity
            assert out.has(MARK)

    def test_glue_partial_variant(self):
        rng = Stream(23, ("glue-partial",))
        for trial in range(20):
            t = rng.split(trial)
            f = self._sample(t, with_absent=True)
            out = epsilon_glue(f)
            assert validate_config(out, "disjoint")
            assert out.arity == 1 + sum(c.arity - 1 for c in f.configs if c is not None)

    def test_glue_equivariance(self):
        rng = Stream(24, ("glue-sigma",))
        for trial in range(20):
            t = rng.split(trial)
            f = self._sample(t)
            out = epsilon_glue(f)
            renamed = MarkedFiberConfig(
                f.dims,
                f.ambient,
                tuple(c.relabel({lbl: lbl + "x" for lbl in c.labels if lbl != MARK}) if c else None for c in f.configs),
            )
            expect = out.relabel({lbl: lbl + "x" for lbl in out.labels if lbl != MARK})
            assert epsilon_glue(renamed) == expect

    def test_glue_all_units_is_identity(self):
        f = MarkedFiberConfig((1, 2), 3, (unit_config(MARK, 1), unit_config(MARK, 2)))
        out = epsilon_glue(f)
        assert out == RectConfig(3, {MARK: Rect.identity(3)}, "disjoint")

    def test_glue_marked_union_is_exact(self):
        rng = Stream(25, ("glue-union",))
        for trial in range(20):
            t = rng.split(trial)
            f = self._sample(t)
            out = epsilon_glue(f)
            # the fused rectangle equals the union of the placed marked ones:
            # sample rational probe points inside the fused box and verify one
            # of the placed marked rectangles contains each probe
            placed = []
            slab_count = len(f.present)
            for pos, i in enumerate(f.present):
                cfg = f.configs[i]
                from operadic.exactgeom import embed_component

                placed_cfg = embed_component(cfg, f.dims[-1], f.ambient)
                slab = cube_split(slab_count, f.ambient).rect(str(pos + 1))
                placed.append(slab.compose(placed_cfg.rect(MARK)))
            fused = out.rect(MARK)
            probe_rng = t.split("probe")
            for _ in range(10):
                probe = tuple(
                    lo + (hi - lo) * Fraction(probe_rng.randint(1, 15), 16)
                    for lo, hi in (fused.axis_interval(j) for j in range(f.ambient))
                )
                hit = any(
                    all(lo < c < hi for c, (lo, hi) in zip(probe, (r.axis_interval(j) for j in range(f.ambient))))
                    for r in placed
                )
                boundary = any(
                    any(c == lo or c == hi for c, (lo, hi) in zip(probe, (r.axis_interval(j) for j in range(f.ambient))))
                    for r in placed
                )
                assert hit or boundary

    def test_fiber_condition_enforced(self):
        c1 = unit_config(MARK, 1)
        bad = RectConfig(2, {MARK: Cube(Fraction(1, 2), (0, 0))})
        with pytest.raises(OperadicError):
            MarkedFiberConfig((1, 2), 3, (c1, bad))

    def test_ambient_dimension_enforced(self):
        with pytest.raises(OperadicError):
            MarkedFiberConfig((1, 3), 3, (unit_config(MARK, 1), unit_config(MARK, 3)))

    def test_glue_shared_labels(self):
        rng = Stream(26, ("glue-shared",))
        for trial in range(15):
            t = rng.split(trial)
            # one shared label "s" across both components plus private labels
            f = sample_marked_fiber(t, (1, 2), 3, (["p"], ["q"]))
            shared = tuple(
                c.relabel({MARK: "s"}) if c is not None else None for c in f.configs
            )
            out = glue_shared((1, 2), 3, shared)
            assert validate_config(out, "disjoint")
            assert sorted(out.labels) == ["p", "q", "s"]

    def test_glue_shared_rejects_misaligned(self):
        a = RectConfig(1, {"s": Cube(Fraction(1, 2), (0,))})
        b = RectConfig(2, {"s": Cube(Fraction(1, 2), (Fraction(1, 2), Fraction(1, 4)))})
        with pytest.raises(OperadicError):
            glue_shared((1, 2), 3, (a, b))


# ---------------------------------------------------------------------------
# configuration-space coordinates


class TestFM:
    def test_antisymmetry_and_reciprocal(self):
        rng = Stream(27, ("fm",))
        for trial in range(15):
            t = rng.split(trial)
            n, dim = t.randint(2, 4), t.randint(1, 3)
            pts = sample_points(t, n, dim)
            coords = fm_coords(pts)
            for (i, j), vec in coords.directions:
                assert coords.direction(j, i) == tuple(-c for c in vec)
            for (i, j, k), val in coords.ratio_squares:
                other = coords.ratio_square(i, k, j)
                assert val != 0 and val is not INF
                assert val * other == 1

    def test_rejects_coincident_points(self):
        with pytest.raises(OperadicError):
            fm_coords([(0, 0), (0, 0)])

    def test_json_shape(self):
        data = fm_coords([(0,), (1,)]).to_json()
        assert data["directions"]["1,2"] == ["1"]
        assert data["ratioSquares"] == {}


# ---------------------------------------------------------------------------
# standard embeddings


class TestEmbeddings:
    def _embedding_from_configs(self, dim, inner_cfg: RectConfig) -> StandardEmbedding:
        """One target cube "t"; inner configuration placed inside it."""
        src = tuple(inner_cfg.labels) + (MARK,)
        tgt = ("t", MARK)
        alpha = {lbl: "t" for lbl in inner_cfg.labels}
        alpha[MARK] = MARK
        maps = {lbl: (inner_cfg.rect(lbl).scales[0], inner_cfg.rect(lbl).offsets) for lbl in inner_cfg.labels}
        maps[MARK] = (Fraction(1), tuple(Fraction(0) for _ in range(dim)))
        return StandardEmbedding(dim, src, tgt, alpha, maps)

    def test_identity_and_associativity(self):
        rng = Stream(28, ("semb",))
        for trial in range(10):
            t = rng.split(trial)
            dim = t.randint(1, 2)
            cfg = sample_cube_config(t.split("c"), dim, ["1", "2"])
            f = self._embedding_from_configs(dim, cfg)
            ident_src = identity_embedding(dim, f.source)
            ident_tgt = identity_embedding(dim, f.target)
            assert semb_compose(ident_src, f) == f
            assert semb_compose(f, ident_tgt) == f

    def test_hole_containment_enforced(self):
        dim = 1
        bad = StandardEmbedding(
            dim,
            (MARK,),
            (MARK,),
            {MARK: MARK},
            {MARK: (Fraction(1, 2), (Fraction(0),))},
        )
        res = validate_embedding(bad)
        assert not res and res.reason == "containment"

    def test_cube_into_hole_ring(self):
        dim = 1
        emb = StandardEmbedding(
            dim,
            ("a", MARK),
            (MARK,),
            {"a": MARK, MARK: MARK},
            {"a": (Fraction(1, 2), (Fraction(5, 4),)), MARK: (Fraction(4), (Fraction(-1),))},
        )
        assert validate_embedding(emb)
        outside_hole = StandardEmbedding(
            dim,
            ("a", MARK),
            (MARK,),
            {"a": MARK, MARK: MARK},
            {"a": (Fraction(1, 2), (Fraction(7, 2),)), MARK: (Fraction(4), (Fraction(-1),))},
        )
        assert not validate_embedding(outside_hole)


# ---------------------------------------------------------------------------
# serialization


class TestJson:
    def test_config_round_trip(self):
        rng = Stream(29, ("json",))
        for trial in range(10):
            t = rng.split(trial)
            cfg = sample_disjoint_config(t, t.randint(1, 3), ["1", "2", MARK])
            assert RectConfig.from_json(cfg.to_json()) == cfg

    def test_config_json_fields(self):
        cfg = seq1(("1/2", 0), ("1/2", "1/2"))
        data = cfg.to_json()
        assert data["dim"] == 1
        assert data["rects"]["1"] == {"a": ["1/2"], "b": ["0"]}
