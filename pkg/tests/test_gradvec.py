import numpy as np
import pytest

from fedseca import gradvec
from fedseca.gradvec import NonFiniteGradientError


@pytest.mark.parametrize("g, want", [([3, 4], 5.0), ([0, 0, 0], 0.0), ([1, 1, 1, 1], 2.0)])
def test_l2_norm(g, want):
    assert gradvec.l2_norm(g) == want


def test_signum_exact_no_threshold():
    assert gradvec.signum_vec([2, -3, 0]).tolist() == [1, -1, 0]
    assert gradvec.signum_vec([0, 0]).tolist() == [0, 0]
    assert gradvec.signum_vec([-1e-12, 1e-12]).tolist() == [-1, 1]


@pytest.mark.parametrize("xs, want", [([3, 1, 2], 2), ([1, 2, 3, 4], 2.5), ([5], 5)])
def test_median(xs, want):
    assert gradvec.median(xs) == want


@pytest.mark.parametrize("q, want", [(0.0, 1), (1.0, 4)])
def test_quantile_endpoints(q, want):
    assert gradvec.quantile([1, 2, 3, 4], q) == want


def test_quantile_interpolates_between_ranks():
    assert abs(gradvec.quantile([0.05, 0.1, 0.3, 0.5], 0.5) - 0.2) <= 1e-9


def test_quantile_rejects_out_of_range_q():
    with pytest.raises(ValueError):
        gradvec.quantile([1, 2], 1.5)


def test_self_similarity_is_one():
    g = np.array([0.3, -1.2, 2.0, 0.7])
    m = gradvec.pairwise_metrics(g, g)
    assert (m.cosine, m.pearson, m.kendall_tau, m.sign_concordance) == pytest.approx((1, 1, 1, 1), abs=1e-12)


def test_negation_similarity():
    g = np.array([0.3, -1.2, 2.0, 0.7])
    m = gradvec.pairwise_metrics(g, -g)
    assert m.cosine == pytest.approx(-1, abs=1e-12)
    assert m.sign_concordance == -1


def test_kendall_single_discordant_pair():
    assert gradvec.pairwise_metrics([1, 2], [2, 1]).kendall_tau == -1


def test_degenerate_similarities_are_zero():
    assert gradvec.cosine_similarity([0, 0], [1, 2]) == 0
    assert gradvec.pearson([1, 1, 1], [1, 2, 3]) == 0


def test_stack_rejects_nonfinite_and_ragged():
    with pytest.raises(NonFiniteGradientError):
        gradvec.stack_clients([[1.0, np.nan]])
    with pytest.raises(ValueError):
        gradvec.stack_clients([[1.0, 2.0], [1.0]])


def test_pairwise_sq_distances_matches_direct():
    x = np.random.default_rng(0).normal(size=(5, 7))
    d = gradvec.pairwise_sq_distances(x)
    for i in range(5):
        for j in range(5):
            assert d[i, j] == pytest.approx(np.sum((x[i] - x[j]) ** 2))
