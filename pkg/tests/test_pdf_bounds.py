import numpy as np
import pytest

from nncdf.model import BetaProduct, Box, TruncatedGaussianMixture
from nncdf.pdf_bounds import (
    bisect_simplices,
    bound_pdf,
    max_cells_per_axis,
    partition_box,
    refine,
    simplex_volumes,
)
from nncdf.regions import BudgetError


def tgm2():
    return TruncatedGaussianMixture(
        [0.5, 0.5], [[0.3, 0.4], [0.7, 0.6]], [np.eye(2) * 0.02, [[0.03, 0.01], [0.01, 0.02]]], Box.unit(2)
    )


class TestPartition:
    @pytest.mark.parametrize("k,simplices,verts", [(1, 2, 4), (10, 200, 121)])
    def test_counts_2d(self, k, simplices, verts):
        part = partition_box(Box.unit(2), k)
        assert len(part) == simplices and part.vertex_count == verts
        assert len(np.unique(part.simplices.reshape(-1, 2), axis=0)) == verts
        assert part.volumes.sum() == pytest.approx(1.0)

    def test_max_cells_per_axis(self):
        # 36^3 = 46656 <= 50000 < 37^3; 223^2 = 49729 <= 50000 < 224^2
        assert max_cells_per_axis(3, 50_000) == 35
        assert max_cells_per_axis(2, 50_000) == 222
        assert max_cells_per_axis(1, 50_000) == 49_999

    def test_budget(self):
        with pytest.raises(BudgetError):
            partition_box(Box.unit(3), 40, budget=50_000)
        with pytest.raises(BudgetError):
            max_cells_per_axis(3, 7)


class TestBisection:
    def test_children_halve_and_cover(self):
        S = partition_box(Box.unit(3), 2).simplices
        kids = bisect_simplices(S)
        v, vk = simplex_volumes(S), simplex_volumes(kids)
        np.testing.assert_allclose(vk[0::2], v / 2)
        np.testing.assert_allclose(vk[1::2], v / 2)

    def test_longest_edge(self):
        S = np.array([[[0.0, 0.0], [4.0, 0.0], [0.0, 1.0]]])
        kids = bisect_simplices(S)
        # hypotenuse: squared length 17 beats the base at 16
        assert any(np.allclose(p, [2.0, 0.5]) for p in kids[0])


class TestBoundPdf:
    def test_beta_on_half_interval(self):
        dist = BetaProduct(((2, 2),))
        pair = bound_pdf(dist, partition_box(dist.box, 2))
        left = int(np.argmin(pair.partition.simplices[:, :, 0].max(axis=1)))
        # 6 x (1 - x) on [0, 0.5] ranges over [0, 1.5]
        assert pair.lo[left] == pytest.approx(0.0, abs=1e-12)
        assert pair.hi[left] == pytest.approx(1.5, rel=1e-9)

    @pytest.mark.parametrize("dist", [BetaProduct(((2.5, 1.5), (3, 2))), tgm2()], ids=["beta", "mixture"])
    def test_sound_pointwise(self, dist):
        pair = bound_pdf(dist, partition_box(dist.box, 15))
        X = np.random.default_rng(0).uniform(size=(20_000, 2))
        idx = pair.locate(X)
        f = dist.pdf(X)
        assert np.all(idx >= 0)
        assert np.all(pair.lo[idx] <= f) and np.all(f <= pair.hi[idx])
        assert pair.lower_mass <= dist.mass <= pair.upper_mass

    def test_constant_pdfs(self):
        dist = tgm2()
        pair = bound_pdf(dist, partition_box(dist.box, 4))
        assert len(pair.upper_pdf()) == 32
        assert pair.upper_pdf().total_mass() == pytest.approx(pair.upper_mass)
        assert pair.lower_pdf().total_mass() == pytest.approx(pair.lower_mass)

    def test_gap_mass_is_first_order(self):
        dist = tgm2()
        gaps = [bound_pdf(dist, partition_box(dist.box, k)).gap_mass for k in (20, 40, 80)]
        assert gaps[1] / gaps[0] == pytest.approx(0.5, abs=0.08)
        assert gaps[2] / gaps[1] == pytest.approx(0.5, abs=0.08)

    def test_box_mismatch(self):
        with pytest.raises(ValueError):
            bound_pdf(tgm2(), partition_box(Box([0, 0], [2, 2]), 2))


class TestRefine:
    def test_refine_tightens_and_stays_sound(self):
        dist = tgm2()
        coarse = bound_pdf(dist, partition_box(dist.box, 6))
        fine = refine(coarse, coarse.partition.vertex_count + 200)
        assert fine.partition.vertex_count <= coarse.partition.vertex_count + 200
        assert fine.gap_mass < coarse.gap_mass
        assert fine.partition.volumes.sum() == pytest.approx(1.0)
        X = np.random.default_rng(1).uniform(size=(10_000, 2))
        f = dist.pdf(X)
        i_c, i_f = coarse.locate(X), fine.locate(X)
        assert np.all(fine.lo[i_f] <= f) and np.all(f <= fine.hi[i_f])
        # nested: refined bounds never loosen
        assert np.all(fine.lo[i_f] >= coarse.lo[i_c] - 1e-12)
        assert np.all(fine.hi[i_f] <= coarse.hi[i_c] + 1e-12)

    def test_budget_below_current(self):
        dist = tgm2()
        pair = bound_pdf(dist, partition_box(dist.box, 3))
        with pytest.raises(ValueError):
            refine(pair, 3)

    def test_no_budget_no_change(self):
        dist = tgm2()
        pair = bound_pdf(dist, partition_box(dist.box, 3))
        same = refine(pair, pair.partition.vertex_count)
        assert same.gap_mass <= pair.gap_mass
