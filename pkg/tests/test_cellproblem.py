import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinhom import cellproblem as cp
from spinhom.cellproblem import (
    CellProblemSpec,
    LatticeSpec,
    boundary_width,
    build_cell_problem,
    estimate_phi,
    frame,
    mu,
    solve_cell,
    subadditivity_check,
    sweep,
    translation_check,
    truncation_check,
)
from spinhom.energy import CouplingModel, Kernel
from spinhom.groundstate import brute_force, solve
from spinhom.lattice import generate_deterministic
from spinhom.voronoi import neighbor_graph

NN = CouplingModel(1.0)
SQ = LatticeSpec()
PERT = LatticeSpec("perturbed", a=0.25)
DIAG = (1 / math.sqrt(2), 1 / math.sqrt(2))


class TestFrame:
    def test_e2(self):
        f = frame([0.0, 1.0])
        assert np.array_equal(f.tangents[0], [-1.0, 0.0])

    @given(st.floats(0, 2 * math.pi), st.floats(0, math.pi))
    @settings(max_examples=50, deadline=None)
    def test_orthonormal(self, a, b):
        for nu in ([math.cos(a), math.sin(a)], [math.sin(b) * math.cos(a), math.sin(b) * math.sin(a), math.cos(b)]):
            M = frame(nu).matrix
            assert np.allclose(M @ M.T, np.eye(len(nu)), atol=1e-12)
            assert np.array_equal(frame(nu).matrix, M)

    def test_errors(self):
        with pytest.raises(ValueError):
            frame([0.0, 0.0])
        with pytest.raises(ValueError):
            frame([1.0, 1.0])


class TestBoundaryWidth:
    def test_examples(self):
        assert boundary_width(100, CouplingModel(1.0, L=1.0), 1.0) == 10
        assert boundary_width(100, CouplingModel(1.0, L=11.0), 1.0) == 12
        assert boundary_width(1e4, CouplingModel(1.0, L=1.0), 1.0) / 1e4 == 0.01

    def test_too_small(self):
        with pytest.raises(ValueError):
            boundary_width(8, CouplingModel(1.0, L=1.0), 1.0)


def _z2(box=(-10, 10)):
    ps = generate_deterministic("square", 2, box)
    return ps, neighbor_graph(ps, 0.0)


class TestBuild:
    def test_t8_l3_counts(self):
        ps, g = _z2()
        p = build_cell_problem(ps, g, NN, (0.0, 1.0), 8, 3)
        assert p.n == 81
        # free iff sup-distance to the boundary exceeds 3: only the centre
        assert np.count_nonzero(p.frozen == 0) == 1
        pts = ps.points[p.ids]
        assert np.all(p.frozen[pts[:, 1] >= 0][np.abs(pts[pts[:, 1] >= 0]).max(axis=1) >= 1] == 1)
        assert np.all(p.frozen[(pts[:, 1] < 0)] == -1)

    def test_hyperplane_gets_plus(self):
        ps, g = _z2()
        p = build_cell_problem(ps, g, NN, DIAG, 8, 3)
        pts = ps.points[p.ids]
        on = np.isclose(pts @ np.array(DIAG), 0) & (p.frozen != 0)
        assert on.any() and np.all(p.frozen[on] == 1)

    def test_weights_and_frozen_edges(self):
        ps, g = _z2()
        p = build_cell_problem(ps, g, CouplingModel(1.5), (0.0, 1.0), 8, 3)
        assert np.all(p.weights == 3.0)
        fz = p.frozen[p.edges]
        assert np.any((fz[:, 0] != 0) & (fz[:, 1] != 0))

    def test_rejections(self):
        ps, g = _z2()
        with pytest.raises(ValueError):
            build_cell_problem(ps, g, NN, (0.0, 1.0), 8, 4)
        with pytest.raises(ValueError, match="exceeds the lattice box"):
            build_cell_problem(ps, g, NN, (0.0, 1.0), 8, 3, center=(7, 0))


class TestMu:
    def test_column_formula(self):
        assert mu(CellProblemSpec((0.0, 1.0), 16, coupling=NN)) == 34.0
        assert mu(CellProblemSpec((1.0, 0.0), 16, coupling=NN)) == 34.0

    def test_flip(self):
        a = solve_cell(CellProblemSpec((0.6, 0.8), 20, PERT, NN, seed=3))
        b = solve_cell(CellProblemSpec((-0.6, -0.8), 20, PERT, NN, seed=3))
        assert a.mu == b.mu

    def test_planar_upper_bound(self):
        for nu in ((0.0, 1.0), DIAG, (0.28, 0.96)):
            r = solve_cell(CellProblemSpec(nu, 24, PERT, NN, seed=1))
            assert r.mu <= r.mu_planar

    def test_3d_planar(self):
        r = solve_cell(CellProblemSpec((0.0, 0.0, 1.0), 8, LatticeSpec(dim=3), NN))
        assert r.mu == 2 * 9**2

    @pytest.mark.parametrize("t", [5, 6])
    def test_diagonal_bruteforce(self, t):
        ps, g = _z2()
        p = build_cell_problem(ps, g, NN, DIAG, t, 1.0)
        assert np.count_nonzero(p.frozen == 0) <= 22
        assert solve(p).energy == brute_force(p)[0]

    def test_spec_width_validation(self):
        with pytest.raises(ValueError):
            CellProblemSpec((0.0, 1.0), 16, l=8).width()
        with pytest.raises(ValueError):
            CellProblemSpec((0.0, 1.0), 16, coupling=CouplingModel(1.0, L=2.0), l=2.5).width()


class TestEstimate:
    def test_exact_z2(self):
        e = estimate_phi((0.0, 1.0), [16, 32, 64], [0], NN, SQ)
        assert [e.stats[t]["mean"] for t in (16.0, 32.0, 64.0)] == [2.125, 2.0625, 2.03125]
        assert e.extrapolated == 2.03125
        assert e.fit["phi"] == pytest.approx(2.0, abs=1e-12)
        assert e.convention == "unordered-pairs"

    def test_repeated_seed(self):
        e = estimate_phi((0.6, 0.8), [20], [4, 4, 4], NN, PERT)
        assert e.stats[20.0]["sd"] == 0.0 and e.stats[20.0]["count"] == 3

    def test_determinism_and_jobs(self):
        a = estimate_phi((0.6, 0.8), [20, 24], [0, 1, 2], NN, PERT)
        b = estimate_phi((0.6, 0.8), [20, 24], [0, 1, 2], NN, PERT, jobs=3)
        assert [(s.t, s.seed, s.mu) for s in a.samples] == [(s.t, s.seed, s.mu) for s in b.samples]
        assert a.stats == b.stats

    def test_t_list_increasing(self):
        with pytest.raises(ValueError):
            estimate_phi((0.0, 1.0), [32, 16], [0], NN, SQ)

    def test_failures_recorded(self, monkeypatch):
        real = cp._prepare

        def flaky(lattice, model, t, seed, centers, nus):
            if seed == 1:
                raise RuntimeError("boom")
            return real(lattice, model, t, seed, centers, nus)

        monkeypatch.setattr(cp, "_prepare", flaky)
        e = estimate_phi((0.0, 1.0), [16], [0, 1, 2], NN, PERT)
        assert len(e.samples) == 2 and len(e.failures) == 1
        assert "boom" in e.failures[0]["error"]


class TestSweep:
    def test_z2_anisotropy(self):
        res = sweep(8, [32, 64], [0], NN, SQ)
        s = res.summary
        assert s["argmax"] in (2, 6)
        assert s["argmin"] in (0, 4)
        fit = [e.fit_phi for e in res.estimates]
        assert max(fit) / min(fit) == pytest.approx(math.sqrt(2), rel=0.05)

    def test_single_direction(self):
        res = sweep(1, [16], [0], NN, SQ)
        assert len(res.estimates) == 1 and res.summary["spread"] == 0.0

    def test_shared_realization_flip(self):
        nus = np.array([[0.6, 0.8], [-0.6, -0.8]])
        res = sweep(nus, [20], [0, 1], NN, PERT)
        a, b = res.estimates
        assert [s.mu for s in a.samples] == [s.mu for s in b.samples]

    def test_matches_single_estimates(self):
        res = sweep(4, [20], [0, 1], NN, PERT)
        for nu, e in zip(res.nus, res.estimates):
            single = estimate_phi(nu, [20], [0, 1], NN, PERT)
            assert [s.mu for s in e.samples] == [s.mu for s in single.samples]


class TestTranslation:
    def test_z2_exact(self):
        rep = translation_check((0.0, 1.0), 16, [0], [[0, 0], [5, 3], [-7, 2]], NN, SQ)
        assert rep["max_rel_deviation"] == 0.0

    def test_out_of_box(self):
        with pytest.raises(ValueError, match="outside"):
            translation_check((0.0, 1.0), 16, [0], [[0, 0], [30, 0]], NN, SQ, box=[[-20, 20], [-20, 20]])

    def test_perturbed_shared_realization(self):
        rep = translation_check((0.0, 1.0), 24, [0, 1], [[0, 0], [5, 3]], NN, PERT)
        assert len(rep["means"]) == 2 and rep["max_rel_deviation"] < 0.2


class TestSubadditivity:
    def test_z2_flat(self):
        rep = subadditivity_check((0.0, 1.0), 16, 0, NN, SQ)
        assert rep["mu_big"] == 66.0 and rep["mu_sub"] == [34.0, 34.0]
        assert rep["K_eff"] <= 4.0

    def test_zero_coupling(self):
        rep = subadditivity_check((0.6, 0.8), 16, 0, CouplingModel(0.0), PERT)
        assert rep["mu_big"] == 0.0 and rep["K_eff"] == 0.0

    def test_perturbed_band(self):
        ks = [subadditivity_check((0.0, 1.0), 16, s, NN, PERT)["K_eff"] for s in range(10)]
        assert all(math.isfinite(k) and 0.0 <= k <= 4.0 for k in ks)

    def test_3d_interfaces(self):
        rep = subadditivity_check((0.0, 0.0, 1.0), 6, 0, NN, LatticeSpec(dim=3))
        assert rep["interfaces"] == 4 and len(rep["mu_sub"]) == 4
        assert rep["mu_big"] == 2 * 13**2 and rep["mu_sub"] == [2 * 7**2] * 4


class TestTruncation:
    def test_small(self):
        m = CouplingModel(1.0, Kernel("power", 1.0, p=4.0))
        rep = truncation_check((0.0, 1.0), 24, [0], [1.5, 2.5], 4.0, m, PERT)
        assert rep["monotone"]
        assert all(c["ok"] for c in rep["checks"])
        assert rep["gap_strictly_decreasing"]

    def test_reference_largest(self):
        with pytest.raises(ValueError):
            truncation_check((0.0, 1.0), 24, [0], [8.0], 4.0, NN, SQ)
