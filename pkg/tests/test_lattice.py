import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinhom.lattice import (
    AdmissibilityError,
    PointSet,
    apply_defects,
    estimate_admissibility,
    generate_deterministic,
    generate_perturbed,
    generate_random_parking,
    lattice_from_dict,
    load_lattice,
    save_lattice,
    translate,
)


def brute_cover(points, lo, hi, spacing):
    """Covering radius over a probe grid by dense pairwise distances."""
    axes = [np.arange(a, b + 1e-12, spacing) for a, b in zip(lo, hi)]
    probes = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    d = np.sqrt(((probes[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    return d.min(axis=1).max()


def brute_rmin(points):
    d = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    d[np.diag_indices(len(points))] = np.inf
    return d.min()


class TestDeterministic:
    def test_square_count_and_spacing(self):
        ps = generate_deterministic("square", 2, [0, 4])
        assert len(ps) == 25
        rep = estimate_admissibility(ps)
        assert rep.r_min == 1.0
        assert ps.r_declared == 1.0 and ps.R_declared == pytest.approx(math.sqrt(2) / 2)

    def test_square_cover_matches_bruteforce(self):
        ps = generate_deterministic("square", 2, [0, 8])
        rep = estimate_admissibility(ps)
        lo, hi = ps.lo + ps.R_declared, ps.hi - ps.R_declared
        oracle = brute_cover(ps.points, lo, hi, 0.05)
        assert rep.R_cover == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        assert abs(oracle - math.sqrt(2) / 2) <= 0.05
        assert rep.passed

    def test_square_3d(self):
        ps = generate_deterministic("square", 3, [0, 4])
        assert len(ps) == 125
        assert ps.R_declared == pytest.approx(math.sqrt(3) / 2)
        assert estimate_admissibility(ps).passed

    def test_triangular(self):
        ps = generate_deterministic("triangular", 2, [0, 10])
        rep = estimate_admissibility(ps)
        assert rep.r_min == pytest.approx(1.0)
        assert abs(rep.R_cover - 1 / math.sqrt(3)) <= rep.resolution + 1e-9
        assert rep.passed

    def test_triangular_needs_2d(self):
        with pytest.raises(ValueError):
            generate_deterministic("triangular", 3, [0, 8])

    def test_box_too_small(self):
        with pytest.raises(ValueError):
            generate_deterministic("square", 2, [0, 3])


class TestPerturbed:
    def test_zero_amplitude_is_square(self):
        a = generate_perturbed(2, [0, 10], 0.0, 5)
        b = generate_deterministic("square", 2, [0, 10])
        assert a.same_points(b)

    def test_bounds_seed7(self):
        ps = generate_perturbed(2, [0, 64], 0.25, 7)
        rep = estimate_admissibility(ps)
        assert rep.r_min >= 0.5 and rep.R_cover <= 1.07
        assert rep.passed

    def test_rmin_oracle(self):
        ps = generate_perturbed(2, [0, 12], 0.3, 2)
        assert estimate_admissibility(ps).r_min == pytest.approx(brute_rmin(ps.points), abs=0)

    def test_deterministic(self):
        a = generate_perturbed(2, [0, 16], 0.25, 11)
        b = generate_perturbed(2, [0, 16], 0.25, 11)
        c = generate_perturbed(2, [0, 16], 0.25, 12)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)

    def test_overlapping_boxes_agree_sitewise(self):
        a = generate_perturbed(2, [0, 16], 0.25, 3)
        b = generate_perturbed(2, [[-8, 16], [-3, 20]], 0.25, 3)
        sa = {tuple(np.rint(p).astype(int)): tuple(p) for p in a.points}
        sb = {tuple(np.rint(p).astype(int)): tuple(p) for p in b.points}
        assert all(sb[k] == v for k, v in sa.items())

    def test_negative_sites_distinct(self):
        ps = generate_perturbed(2, [-20, 20], 0.25, 1)
        offsets = ps.points - np.rint(ps.points)
        assert len(np.unique(offsets.round(15), axis=0)) == len(ps)

    def test_amplitude_rejected(self):
        with pytest.raises(ValueError):
            generate_perturbed(2, [0, 10], 0.5, 0)

    def test_equivariance(self):
        z = np.array([5, -3])
        a = translate(generate_perturbed(2, [0, 16], 0.25, 9), z)
        b = generate_perturbed(2, np.array([[0, 16], [0, 16]]) + z[:, None], 0.25, 9, site_shift=z)
        assert np.allclose(a.points, b.points, atol=1e-12, rtol=0)

    def test_3d(self):
        ps = generate_perturbed(3, [0, 8], 0.2, 4)
        rep = estimate_admissibility(ps)
        assert rep.passed
        assert ps.R_declared == pytest.approx(math.sqrt(3) * 0.7)


class TestParking:
    @pytest.fixture(scope="class")
    @classmethod
    def two(cls):
        return generate_random_parking([0, 32], 1.0, 1), generate_random_parking([0, 32], 1.0, 2)

    def test_saturated(self, two):
        for ps in two:
            rep = estimate_admissibility(ps)
            assert rep.passed
            assert rep.R_cover <= 1.0 + rep.resolution
            assert rep.r_min >= 1.0 - 1e-12

    def test_interior_packing_fraction(self, two):
        # window 4 diameters inside the box: free edges inflate the whole-box density
        counts = set()
        for ps in two:
            p = ps.points
            inner = np.all((p >= 4) & (p < 28), axis=1).sum()
            frac = inner * math.pi / 4 / 24**2
            assert 0.5 < frac < 0.57
            counts.add(len(ps))
        assert len(counts) == 2

    def test_deterministic(self):
        a = generate_random_parking([0, 10], 1.0, 5)
        b = generate_random_parking([0, 10], 1.0, 5)
        assert np.array_equal(a.points, b.points)

    def test_errors(self):
        with pytest.raises(ValueError):
            generate_random_parking([0, 32], 0.0, 1)
        with pytest.raises(ValueError):
            generate_random_parking([0, 7], 1.0, 1)


class TestDefects:
    def test_noop(self):
        ps = generate_perturbed(2, [0, 20], 0.25, 1)
        assert apply_defects(ps, 0, 3) is ps

    def test_eight_defects(self):
        ps = generate_perturbed(2, [0, 64], 0.25, 1)
        d = apply_defects(ps, 8, 3)
        assert len(d) == len(ps) - 8
        assert d.R_declared == 2 * ps.R_declared
        rep = estimate_admissibility(d)
        assert rep.passed and rep.R_cover <= 2 * ps.R_declared
        deleted = d.provenance["params"]["defects"]["deleted"]
        assert len(deleted) == 8
        gaps = ps.points[deleted]
        dd = np.sqrt(((gaps[:, None] - gaps[None]) ** 2).sum(-1))[np.triu_indices(8, 1)]
        assert dd.min() > 3 * ps.R_declared

    def test_candidates(self):
        ps = generate_perturbed(2, [0, 64], 0.25, 1)
        cand = np.flatnonzero(np.all(ps.points > 32, axis=1))
        d = apply_defects(ps, 5, 2, candidates=cand)
        assert set(d.provenance["params"]["defects"]["deleted"]) <= set(cand.tolist())

    def test_too_many(self):
        ps = generate_perturbed(2, [0, 20], 0.25, 1)
        with pytest.raises(ValueError):
            apply_defects(ps, len(ps) // 2, 0)

    def test_unsatisfiable_spacing(self):
        ps = generate_perturbed(2, [0, 64], 0.25, 1)
        cand = np.arange(40)
        with pytest.raises(AdmissibilityError):
            apply_defects(ps, 10, 0, candidates=cand, max_attempts=20)


class TestTranslate:
    def test_zero(self):
        ps = generate_perturbed(2, [0, 10], 0.2, 0)
        assert translate(ps, [0, 0]).same_points(ps)

    @given(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)))
    @settings(max_examples=30, deadline=None)
    def test_inverse_exact(self, z):
        ps = generate_perturbed(2, [0, 6], 0.3, 4)
        back = translate(translate(ps, z), [-z[0], -z[1]])
        assert back.same_points(ps)
        moved = translate(ps, z)
        assert np.allclose(moved.lo, ps.lo + np.array(z))

    def test_distances_invariant(self):
        ps = generate_perturbed(2, [0, 8], 0.3, 4)
        moved = translate(ps, [17, -4])
        d0 = np.sort(np.linalg.norm(ps.points[:, None] - ps.points[None], axis=-1).ravel())
        d1 = np.sort(np.linalg.norm(moved.points[:, None] - moved.points[None], axis=-1).ravel())
        assert np.allclose(d0, d1, atol=1e-12)

    def test_non_integer(self):
        ps = generate_deterministic("square", 2, [0, 4])
        with pytest.raises(ValueError):
            translate(ps, [0.5, 0])


class TestAudit:
    def test_violation_detected(self):
        ps = PointSet(2, [[0, 0], [0.3, 0], [5, 5]], [0, 0], [5, 5], 1.0, 5.0)
        rep = estimate_admissibility(ps)
        assert not rep.passed and rep.r_min == pytest.approx(0.3)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            estimate_admissibility(PointSet(2, [[0, 0]], [0, 0], [1, 1], 1, 1))

    def test_json_roundtrip(self, tmp_path):
        ps = generate_perturbed(2, [0, 10], 0.25, 3)
        path = tmp_path / "l.json"
        save_lattice(ps, path)
        back = load_lattice(path)
        assert np.array_equal(back.points, ps.points)
        data = json.loads(path.read_text())
        assert set(data) == {"dim", "box", "r", "R", "provenance", "points"}
        assert data["provenance"]["model"] == "perturbed"

    def test_empty_points(self):
        with pytest.raises(ValueError):
            lattice_from_dict({"dim": 2, "box": {"lo": [0, 0], "hi": [1, 1]}, "r": 1, "R": 1, "points": []})
