"""Tests for the mode codebook and caption-to-mode assignment."""

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.autograd import functional as F, parameter
from dml_captioning.src.errors import AssignmentError, ShapeError
from dml_captioning.src.model.assignment import (
    distance_matrix,
    hungarian_assign,
    nearest_assign,
    solve_assignment,
)
from dml_captioning.src.model.codebook import (
    INIT_STD,
    init_codebook,
    nearest_lookup,
    straight_through,
    usage_report,
    vq_losses,
)


def _brute_force(cost: np.ndarray):
    """Lexicographically first minimum-cost injective map by enumeration."""
    n, k = cost.shape
    best, best_cols = np.inf, None
    for cols in itertools.permutations(range(k), n):
        total = float(sum(cost[i, j] for i, j in enumerate(cols)))
        if total < best:
            best, best_cols = total, list(cols)
    return best, best_cols


class TestHungarian:
    """Test the minimum-cost injective assignment."""

    def test_product_cost_example(self):
        """The anti-diagonal is the unique optimum of c_ij = (i+1)(j+1)."""
        cost = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0]])
        cols = solve_assignment(cost)
        assert cols == [2, 1, 0]
        assert sum(cost[i, j] for i, j in enumerate(cols)) == 10.0

    @pytest.mark.parametrize("seed", range(200))
    def test_matches_brute_force(self, seed):
        """Random n <= 6, k <= 8 instances reach the enumerated optimum."""
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, min(k, 6) + 1))
        cost = rng.random((n, k))
        cols = solve_assignment(cost)
        best, _ = _brute_force(cost)
        assert len(set(cols)) == n
        assert sum(cost[i, j] for i, j in enumerate(cols)) == pytest.approx(best, abs=1e-12)

    @pytest.mark.parametrize("seed", range(50))
    def test_ties_break_lexicographically(self, seed):
        """Small integer costs have many optima; the smallest assignment vector wins."""
        rng = np.random.default_rng(1000 + seed)
        k = int(rng.integers(2, 6))
        n = int(rng.integers(1, k + 1))
        cost = rng.integers(0, 3, size=(n, k)).astype(float)
        _, expected = _brute_force(cost)
        assert solve_assignment(cost) == expected

    def test_all_equal_costs(self):
        """With identical costs the identity prefix is returned."""
        assert solve_assignment(np.ones((3, 5))) == [0, 1, 2]

    @pytest.mark.parametrize("seed", range(20))
    def test_agrees_with_scipy(self, seed):
        """The optimal total matches scipy's rectangular solver."""
        rng = np.random.default_rng(2000 + seed)
        n, k = 4, 9
        embeddings = rng.normal(size=(n, 5))
        entries = rng.normal(size=(k, 5))
        assignment = hungarian_assign(embeddings, entries)
        cost = distance_matrix(embeddings, entries)
        rows, cols = linear_sum_assignment(cost)
        assert assignment.total_cost == pytest.approx(float(cost[rows, cols].sum()), abs=1e-12)
        assert assignment.is_injective()

    def test_more_captions_than_entries_raises(self):
        """n > k cannot be assigned injectively."""
        with pytest.raises(AssignmentError):
            hungarian_assign(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_single_caption_matches_nearest(self):
        """With one caption, Hungarian and nearest lookup agree."""
        rng = np.random.default_rng(5)
        e = rng.normal(size=(1, 4))
        entries = rng.normal(size=(6, 4))
        assert hungarian_assign(e, entries).entries == nearest_assign(e, entries).entries

    def test_nearest_lower_bounds_hungarian(self):
        """Independent lookup never costs more than the injective matching."""
        rng = np.random.default_rng(6)
        for _ in range(20):
            e = rng.normal(size=(3, 4))
            entries = rng.normal(size=(5, 4))
            assert nearest_assign(e, entries).total_cost <= hungarian_assign(e, entries).total_cost + 1e-12


class TestCodebook:
    """Test codebook lookup, losses and usage tracking."""

    def test_nearest_lookup_example(self):
        """e=(0.9, 0) is nearest to the entry (1, 0)."""
        codebook = init_codebook(3, 2, seed=0)
        codebook.entries.data[...] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        assert nearest_lookup(np.array([0.9, 0.0]), codebook) == 1

    def test_nearest_lookup_tie_goes_to_lowest_index(self):
        """Equidistant entries resolve to the smaller index."""
        codebook = init_codebook(2, 2, seed=0)
        codebook.entries.data[...] = [[1.0, 0.0], [-1.0, 0.0]]
        assert nearest_lookup(np.zeros(2), codebook) == 0

    def test_nearest_lookup_shape_mismatch(self):
        """Dimension mismatches are shape errors."""
        with pytest.raises(ShapeError):
            nearest_lookup(np.zeros(3), init_codebook(2, 2, seed=0))

    def test_vq_loss_values(self):
        """e=(1,0), q=(0,0): codebook loss 1.0 and commitment 0.25."""
        e = parameter([1.0, 0.0])
        q = parameter([0.0, 0.0])
        codebook_loss, commitment = vq_losses(e, q, beta=0.25)
        assert codebook_loss.item() == pytest.approx(1.0)
        assert commitment.item() == pytest.approx(0.25)

    def test_vq_loss_gradients_split(self):
        """The codebook term trains only q, the commitment term only e."""
        e = parameter([1.0, 2.0])
        q = parameter([0.0, 1.0])
        codebook_loss, commitment = vq_losses(e, q, beta=0.25)
        codebook_loss.backward()
        assert e.grad is None
        np.testing.assert_allclose(q.grad, [-2.0, -2.0])
        q.zero_grad()
        commitment.backward()
        assert q.grad is None
        np.testing.assert_allclose(e.grad, [0.5, 0.5])

    def test_straight_through_gradient_reaches_encoder(self):
        """The decoder sees q; its gradient lands on e."""
        e = parameter([0.3, -0.1])
        q = parameter([1.0, 1.0])
        out = straight_through(e, q)
        np.testing.assert_array_equal(out.numpy(), q.data)
        F.sum(F.mul(out, out)).backward()
        np.testing.assert_allclose(e.grad, 2.0 * q.data)

    def test_init_codebook(self):
        """Entries are N(0, 0.5^2), seeded, with zero usage."""
        a = init_codebook(64, 32, seed=3)
        b = init_codebook(64, 32, seed=3)
        np.testing.assert_array_equal(a.entries.data, b.entries.data)
        assert abs(a.entries.data.std() - INIT_STD) < 0.05
        assert a.usage_counts.sum() == 0
        assert a.entries.requires_grad

    def test_usage_report(self):
        """Recording assignments updates counts and the effective mode count."""
        codebook = init_codebook(4, 2, seed=0)
        codebook.record(nearest_assign(np.array([[0.0, 0.0]]), codebook.entries.data))
        codebook.record(hungarian_assign(np.zeros((2, 2)), codebook.entries.data))
        report = usage_report(codebook)
        assert sum(report.counts) == 3
        assert report.effective_modes == len(codebook.effective_modes())
        assert report.to_log(7)["step"] == 7


if __name__ == "__main__":
    pytest.main([__file__])
