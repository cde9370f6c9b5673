import numpy as np
import pytest

from fedseca import baselines, seca
from fedseca.aggregator import AGGREGATOR_KINDS, AggregatorConfig, make_aggregator
from fedseca.baselines import clipping, copod, fldetector, weiszfeld
from fedseca.bench.oracles import grid_minimize_2d


def test_fedavg():
    assert baselines.fedavg([[1], [3]]).tolist() == [2]
    assert baselines.fedavg([[1, 0], [0, 1]]).tolist() == [0.5, 0.5]
    assert baselines.fedavg(np.tile([0.1, -2.0], (4, 1))).tolist() == [0.1, -2.0]


def test_krum_tie_goes_to_lowest_index():
    x = np.array([[0.0], [0.1], [0.2], [10.0]])
    scores = baselines.simple.krum_scores(x, 1)
    assert scores == pytest.approx([0.01, 0.01, 0.01, 96.04])
    assert baselines.krum(x, 1, 1).tolist() == [0.0]


def test_multikrum_averages_best_two():
    assert baselines.krum([[0.0], [0.0], [0.0], [100.0]], 1, 2).tolist() == [0.0]
    assert baselines.krum(np.tile([3.0, 1.0], (5, 1)), 1, 1).tolist() == [3.0, 1.0]


def test_trimmed_mean_and_median():
    col = np.array([[1.0], [2.0], [3.0], [4.0], [100.0]])
    assert baselines.cw_trimmed_mean(col, 0.2).tolist() == [3.0]
    assert baselines.cw_median([[-5.0], [0.0], [5.0]]).tolist() == [0.0]
    assert baselines.cw_median(np.tile([1.5, -2.0], (3, 1))).tolist() == [1.5, -2.0]


def test_geometric_median_examples():
    assert abs(weiszfeld.rfa_geomedian([[-1.0], [0.0], [1.0]], R=50)[0]) < 1e-9
    assert weiszfeld.rfa_geomedian(np.tile([2.0, 3.0], (4, 1))).tolist() == [2.0, 3.0]
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    got = weiszfeld.rfa_geomedian(x, R=5000)
    obj = lambda p: np.linalg.norm(p[:, None, :] - x[None], axis=2).sum(axis=1)
    want = grid_minimize_2d(obj, np.zeros(2), np.full(2, 5.0), extra=x)
    assert np.linalg.norm(got - want) <= 1e-3


def test_huber_examples():
    assert weiszfeld.huber_weiszfeld(np.tile([1.0, -1.0], (3, 1))).tolist() == [1.0, -1.0]
    assert weiszfeld.huber_weiszfeld([[-1.0], [0.0], [1.0]], tau=100.0) == pytest.approx([0.0], abs=1e-12)
    x = np.array([[0.0], [0.0], [10.0]])
    got = weiszfeld.huber_weiszfeld(x, tau=0.2, max_iter=5000, tol=1e-14)[0]
    grid = np.linspace(-1, 11, 1_200_001)
    u = np.abs(grid[:, None] - x[:, 0][None])
    phi = np.where(u <= 0.2, 0.5 * u**2, 0.2 * u - 0.02).sum(axis=1)
    assert abs(got - grid[np.argmin(phi)]) <= 1e-3


def test_centered_clip_examples():
    rng = np.random.default_rng(0)
    x = rng.normal(scale=0.1, size=(5, 3))
    assert clipping.centered_clip(x, np.zeros(3), tau=10.0, Q=1) == pytest.approx(x.mean(axis=0))
    v = clipping.centered_clip([[10.0, 0.0]], np.zeros(2), tau=1.0, Q=1)
    assert v == pytest.approx([1.0, 0.0])
    ref = np.array([0.5, -0.5])
    assert clipping.centered_clip(np.tile(ref, (3, 1)), ref, tau=0.1).tolist() == ref.tolist()


def test_rand_bucket_replays_fixed_shuffle():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [4.0, 4.0], [-2.0, 1.0]])
    ref = np.zeros(2)
    got = clipping.cc_rand_bucket(x, 2, np.random.default_rng(7), ref, tau=1.5)
    order = np.random.default_rng(7).permutation(4)
    means = np.stack([x[order[:2]].mean(axis=0), x[order[2:]].mean(axis=0)])
    step = np.zeros(2)
    for m in means:
        n = np.linalg.norm(m)
        step += m * min(1.0, 1.5 / n)
    assert got == pytest.approx(step / 2)
    assert clipping.cc_rand_bucket(x, 10, np.random.default_rng(1), ref, 1.5) == pytest.approx(
        clipping.centered_clip(x.mean(axis=0)[None], ref, 1.5, Q=1))
    same = np.tile([0.2, 0.3], (4, 1))
    assert clipping.cc_rand_bucket(same, 2, np.random.default_rng(3), ref) == pytest.approx([0.2, 0.3])


def test_seq_bucket_hand_trace():
    # reference along e1; cosine order is 0, 1, 2, 3; stripes [0,1] and [2,3]
    x = np.array([[2.0, 0.0], [1.0, 1.0], [0.0, 1.0], [-1.0, 0.0]])
    ref = np.array([1.0, 0.0])
    assert clipping.seq_bucket_groups(x @ ref / np.linalg.norm(x, axis=1), 2) == [[0, 2], [1, 3]]
    u = ref
    for members in ([0, 2], [1, 3]):
        d = x[members] - u
        n = np.linalg.norm(d, axis=1)
        u = u + (d * np.minimum(1.0, 0.8 / n)[:, None]).mean(axis=0)
    assert clipping.cc_seq_bucket(x, 2, ref, tau=0.8) == pytest.approx(u)
    assert clipping.cc_seq_bucket(x, 4, ref, tau=0.8) == pytest.approx(
        clipping.centered_clip(x, ref, 0.8, Q=1))
    same = np.tile([0.4, 0.1], (4, 1))
    assert clipping.cc_seq_bucket(same, 2, np.zeros(2), tau=100.0) == pytest.approx([0.4, 0.1])


def test_copod_scores_examples():
    assert copod.copod_scores(np.full((4, 1), 3.0)).tolist() == [0, 0, 0, 0]
    s = copod.copod_scores([[1.0], [1.0], [1.0], [9.0]])
    assert s[3] == pytest.approx(np.log(4)) and np.all(s[3] > s[:3])
    feat = np.random.default_rng(2).normal(size=(6, 3))
    perm = [3, 0, 5, 1, 4, 2]
    assert copod.copod_scores(feat[perm]) == pytest.approx(copod.copod_scores(feat)[perm])


def test_copod_dos_weights():
    same = np.tile([1.0, 2.0], (4, 1))
    assert copod.copod_weights(same) == pytest.approx([0.25] * 4)
    assert copod.copod_dos(same) == pytest.approx([1.0, 2.0])
    x = np.vstack([np.tile([1.0, 1.0], (4, 1)), [[30.0, -40.0]]])
    assert copod.copod_weights(x)[4] < 1 / 5
    assert copod.copod_dos([[0.0, 1.0], [2.0, 3.0]]) == pytest.approx([1.0, 2.0])


def test_fldetector_first_round_and_identical_clients():
    agg = fldetector.FLDetector(window=3)
    x = np.random.default_rng(0).normal(size=(5, 4))
    assert agg(x, global_weights=np.zeros(4)).tolist() == pytest.approx(x.mean(axis=0).tolist())
    agg = fldetector.FLDetector(window=3)
    w = np.zeros(4)
    for _ in range(8):
        g = np.tile([0.3, -0.2, 0.1, 0.0], (5, 1))
        out = agg(g, global_weights=w)
        w = w - out
    assert len(agg.last_info["kept"]) == 5


def test_fldetector_discards_random_client():
    rng = np.random.default_rng(11)
    agg = fldetector.FLDetector(window=5)
    base = rng.normal(size=(5, 30))
    w = np.zeros(30)
    for _ in range(15):
        x = np.vstack([base, rng.normal(scale=5.0, size=(1, 30))])
        out = agg(x, global_weights=w)
        w = w - 0.1 * out
    assert 5 not in agg.last_info["kept"].tolist()


def test_robust_ties_examples():
    g = np.random.default_rng(1).normal(size=20)
    assert baselines.ties_merge_robust(np.tile(g, (3, 1)), 0.8).tolist() == \
        seca.sparsify(g, g, 0.8).values.tolist()
    x = [[1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]]
    st = seca.MomentumState()
    want = seca.fedseca_aggregate(x, seca.FedSecaConfig(gamma=0.0, beta_ra=0.0, use_clip=False,
                                                        use_clamp=False), st)
    assert baselines.ties_merge_robust(x, 0.0).tolist() == want.tolist()
    assert baselines.ties_merge_robust([[1.0, 2.0], [-1.0, 3.0]], 0.0)[0] == 0.0


@pytest.mark.parametrize("kind", AGGREGATOR_KINDS)
def test_registry_builds_every_kind(kind):
    agg = make_aggregator(AggregatorConfig(kind), n_byzantine=1)
    x = np.random.default_rng(0).normal(size=(6, 10))
    out = agg(x, global_weights=np.zeros(10))
    assert out.shape == (10,) and np.all(np.isfinite(out))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="foo"):
        AggregatorConfig("foo")
