import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from spinhom.energy import (
    CONVENTION,
    CouplingModel,
    Kernel,
    ModelError,
    SpinConfig,
    radial_tail,
    tail_bound,
    total_energy,
    validate_model,
)
from spinhom.lattice import generate_deterministic, generate_perturbed
from spinhom.voronoi import neighbor_graph


def z2_tail_sum(m, L, R):
    """Direct sum over integer offsets with L < |xi| <= 10 L."""
    M = int(10 * L) + 1
    g = np.arange(-M, M + 1)
    X, Y = np.meshgrid(g, g)
    d = np.hypot(X, Y).ravel()
    d = d[(d > L) & (d <= 10 * L)]
    return float(np.sum(m.lr(d) * (d + 2 * R)))


class TestKernel:
    @pytest.mark.parametrize("kern", [Kernel("power", 1.3, p=4.5), Kernel("exp", 0.7, lam=0.5)])
    @pytest.mark.parametrize("a", [0.0, 0.4, 1.0, 2.5])
    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_moment_matches_quadrature(self, kern, a, k):
        if kern.family == "power" and kern.p <= k + 1:
            pytest.skip("divergent")
        f = lambda u: float(kern(u)) * u**k
        ref = quad(f, a, max(a, 1.0), limit=200)[0] + quad(f, max(a, 1.0), np.inf, limit=200)[0]
        assert kern.moment(a, k) == pytest.approx(ref, rel=1e-8)

    def test_divergent_moment(self):
        assert Kernel("power", 1.0, p=3.0).moment(1.0, 2) == math.inf

    def test_monotone(self):
        s = np.linspace(0, 20, 400)
        for kern in (Kernel("power", 1.0, p=4), Kernel("exp", 1.0, lam=2.0)):
            assert np.all(np.diff(kern(s)) <= 0)

    def test_bad_family(self):
        with pytest.raises(ModelError):
            Kernel("gauss", 1.0)


class TestValidate:
    def test_examples(self):
        validate_model(CouplingModel(1.0, Kernel("power", 1.0, p=4.0)), 2)
        validate_model(CouplingModel(1.0, Kernel("exp", 1.0, lam=0.5)), 2)
        with pytest.raises(ModelError, match="p > n \\+ 1"):
            validate_model(CouplingModel(1.0, Kernel("power", 1.0, p=3.0)), 2)

    def test_radial_nn(self):
        validate_model(CouplingModel(lambda d: 1 + 0.1 * np.sin(d), C_bound=1.2), 2, R=1.0)
        with pytest.raises(ModelError, match="C_bound"):
            validate_model(CouplingModel(lambda d: 1.0 + 0 * d), 2).bound
        with pytest.raises(ModelError, match="leaves"):
            validate_model(CouplingModel(lambda d: 3 + 0 * d, C_bound=2.0), 2, R=1.0)

    def test_reports_every_clause(self):
        with pytest.raises(ModelError) as info:
            validate_model(CouplingModel(0.0, Kernel("power", 1.0, p=2.0), L=-1), 2)
        msg = str(info.value)
        assert "p > n + 1" in msg and "non-negative" in msg and "positive" in msg


class TestTail:
    def test_zero_kernel(self):
        assert tail_bound(CouplingModel(1.0), 3.0, 2, 0.7, 1.0) == 0.0

    @pytest.mark.parametrize("L", [0.5, 1.0, 1.5, 2.0, 2.23, 3.0, 4.0, 8.0, 16.0])
    @pytest.mark.parametrize("kern", [Kernel("power", 1.0, p=4.0), Kernel("power", 2.0, p=5.0), Kernel("exp", 1.0, lam=0.5)])
    def test_dominates_z2_sum(self, L, kern):
        m = CouplingModel(1.0, kern)
        R = math.sqrt(2) / 2
        assert tail_bound(m, L, 2, R, 1.0) >= z2_tail_sum(m, L, R)

    def test_plain_radial_integral_undershoots(self):
        # the continuum integral alone is not an upper bound at moderate L
        m = CouplingModel(1.0, Kernel("power", 1.0, p=4.0))
        R = math.sqrt(2) / 2
        assert radial_tail(m, 2.23, 2, R) < z2_tail_sum(m, 2.23, R)

    def test_decay_rate(self):
        m = CouplingModel(1.0, Kernel("power", 1.0, p=5.0))
        for L in (4.0, 8.0):
            assert tail_bound(m, L, 2, 0.7, 1.0) / tail_bound(m, 2 * L, 2, 0.7, 1.0) >= 4.0
            assert radial_tail(m, L, 2, 0.7) / radial_tail(m, 2 * L, 2, 0.7) >= 4.0

    def test_monotone(self):
        m = CouplingModel(1.0, Kernel("exp", 1.0, lam=1.0))
        vals = [tail_bound(m, L, 2, 0.7, 1.0) for L in np.linspace(0.5, 20, 40)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_radial_closed_form(self):
        m = CouplingModel(1.0, Kernel("power", 1.0, p=5.0))
        L, R = 3.0, 0.7
        ref = 2 * math.pi * (L ** (3 - 5) / (5 - 3) + 2 * R * L ** (2 - 5) / (5 - 2))
        assert radial_tail(m, L, 2, R) == pytest.approx(ref)

    def test_L_positive(self):
        with pytest.raises(ValueError):
            tail_bound(CouplingModel(1.0, Kernel("exp", 1.0)), 0.0, 2, 1.0, 1.0)


class TestEnergy:
    def test_convention(self):
        assert CONVENTION == "unordered-pairs"

    def test_single_bond(self):
        ps = generate_deterministic("square", 2, [0, 6])
        g = neighbor_graph(ps, 0.0)
        i, j = g.nn[0]
        u = np.ones(len(ps), dtype=np.int8)
        u[j] = -1
        assert total_energy(u, g, CouplingModel(1.0), region=[i, j]) == 2.0
        assert total_energy(np.ones(len(ps)), g, CouplingModel(1.0)) == 0.0

    def test_missing_spin(self):
        ps = generate_deterministic("square", 2, [0, 6])
        g = neighbor_graph(ps, 0.0)
        with pytest.raises(ValueError):
            total_energy(SpinConfig(np.zeros(len(ps))), g, CouplingModel(1.0))

    def test_frozen_needs_value(self):
        with pytest.raises(ValueError):
            SpinConfig([0, 1], frozen=[True, False])

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_flip_scaling_truncation(self, seed):
        ps = generate_perturbed(2, [0, 10], 0.3, seed % 7)
        rng = np.random.default_rng(seed)
        u = SpinConfig(rng.choice([-1, 1], len(ps)))
        g = neighbor_graph(ps, 2.5)
        m = CouplingModel(1.0, Kernel("power", 0.5, p=4.0), L=2.5)
        e = total_energy(u, g, m)
        assert e >= 0
        assert total_energy(-u, g, m) == e
        assert total_energy(u, g, m, eps=0.25) == pytest.approx(0.25 * e, rel=1e-15)
        assert total_energy(u, g.restrict_lr(1.2), m) <= e

    def test_region_masks_agree(self):
        ps = generate_perturbed(2, [0, 12], 0.3, 1)
        g = neighbor_graph(ps, 1.5)
        u = np.where(ps.points[:, 0] > 6, 1, -1)
        mask = np.linalg.norm(ps.points - 6, axis=1) < 3
        m = CouplingModel(1.0, Kernel("exp", 0.3, lam=1.0), L=1.5)
        assert total_energy(u, g, m, region=mask) == total_energy(u, g, m, region=np.flatnonzero(mask))
