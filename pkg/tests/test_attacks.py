import numpy as np
import pytest

from fedseca import attacks
from fedseca.attacks import Attack, AttackConfig, MimicState, OmniscientView
from fedseca.bench.oracles import minmax_constraint_gap


def view(honest, prev=None, seed=0):
    honest = np.atleast_2d(np.asarray(honest, dtype=float))
    return OmniscientView(honest_grads=honest, prev_global_weights=prev, rng=np.random.default_rng(seed))


def test_fang_hand_value():
    # honest weights 0.5 = w_prev - g with w_prev = 0  ->  g = -0.5
    out = attacks.fang(view([[-0.5]], prev=np.zeros(1)), 1, 0.1, jitter=False)
    byz_weight = np.zeros(1) - out[0]
    assert byz_weight == pytest.approx([-0.1])


def test_fang_zero_drift_and_sign():
    assert attacks.fang(view([[0.0, 0.0]], prev=np.array([2.0, 3.0])), 2, jitter=False).tolist() == [[0, 0]] * 2
    g = np.random.default_rng(0).normal(size=(4, 9))
    prev = np.random.default_rng(1).normal(size=9)
    out = attacks.fang(view(g, prev), 1, jitter=False)[0]
    drift = (prev - g).mean(axis=0) - prev
    byz_drift = (prev - out) - prev
    nz = drift != 0
    assert np.all(np.sign(byz_drift[nz]) == -np.sign(drift[nz]))


def test_alie_examples():
    assert attacks.alie(view([[1.0], [1.0]]), 1, jitter=False).tolist() == [[1.0]]
    out = attacks.alie(view([[0.8], [1.2]]), 1, 1.0, jitter=False)
    assert out[0] == pytest.approx([0.8])
    g = np.random.default_rng(3).normal(size=(5, 7))
    assert np.all(attacks.alie(view(g), 3) <= g.mean(axis=0) + 1e-15)


def test_ipm_examples():
    out = attacks.ipm(view([[1.0, -2.0]]), 1, 1.3, jitter=False)
    assert out[0] == pytest.approx([-1.3, 2.6])
    assert attacks.ipm(view([[0.0, 0.0]]), 2).tolist() == [[0, 0], [0, 0]]
    g = np.random.default_rng(5).normal(size=(4, 6))
    mu = g.mean(axis=0)
    for b in attacks.ipm(view(g), 3):
        assert b @ mu <= 0


def test_scaling_examples():
    assert attacks.scaling(view([[0.5]]), 1, 10.0, jitter=False)[0] == pytest.approx([5.0])
    g = np.random.default_rng(6).normal(size=(3, 4))
    assert attacks.scaling(view(g), 1, 1.0, jitter=False)[0] == pytest.approx(g.mean(axis=0))
    b = attacks.scaling(view(g), 1, -3.0, jitter=False)[0]
    assert np.linalg.norm(b) == pytest.approx(3 * np.linalg.norm(g.mean(axis=0)))


def test_jitter_stays_in_band():
    out = attacks.scaling(view([[1.0]]), 200, 10.0, jitter=True)[:, 0]
    assert np.all(np.abs(out - 10.0) <= attacks.JITTER_HALF_WIDTH)


def test_mimic_identical_clients_picks_first():
    st = MimicState()
    g = np.tile([0.5, -1.0, 2.0], (4, 1))
    out = attacks.mimic(view(g), 2, st)
    assert out.tolist() == [g[0].tolist()] * 2


def test_mimic_finds_principal_axis_extreme():
    rng = np.random.default_rng(0)
    st = MimicState(warmup_rounds=20)
    for _ in range(20):
        a = rng.normal(scale=0.1, size=(3, 4)) + [3, 0, 0, 0]
        b = rng.normal(scale=0.1, size=(3, 4)) - [3, 0, 0, 0]
        g = np.vstack([a, b])
        attacks.mimic(view(g), 1, st)
    assert abs(abs(st.z[0]) - 1) < 1e-3
    c = g - st.mu
    top = np.linalg.eigh(c.T @ c)[1][:, -1]
    assert st.chosen in (int(np.argmax(g @ top)), int(np.argmax(-(g @ top))))
    again = attacks.mimic(view(rng.normal(size=(6, 4))), 2, st)
    assert st.chosen is not None and again.shape == (2, 4)


def test_mimic_frozen_copy_is_exact():
    rng = np.random.default_rng(9)
    st = MimicState(warmup_rounds=2)
    for _ in range(3):
        g = rng.normal(size=(5, 6))
        out = attacks.mimic(view(g), 3, st)
    assert np.array_equal(out, np.tile(g[st.chosen], (3, 1)))


def test_label_flip_map():
    assert attacks.label_flip_map(3, 10) == 6
    assert attacks.label_flip_map(9, 10) == 0
    y = np.arange(10)
    assert attacks.label_flip_map(attacks.label_flip_map(y, 10), 10).tolist() == y.tolist()
    with pytest.raises(ValueError):
        attacks.label_flip_map(10, 10)


def test_minmax_examples():
    same = np.tile([1.0, 2.0], (3, 1))
    assert attacks.minmax_agr(view(same), 2).tolist() == [[1.0, 2.0]] * 2
    honest = np.array([[-1.0], [1.0]])
    p = attacks.minmax_direction(honest)
    assert p.tolist() == [-1.0]
    assert attacks.minmax_gamma(honest, p) == pytest.approx(1.0, abs=1e-6)


def test_minmax_gamma_tight():
    rng = np.random.default_rng(4)
    for _ in range(20):
        honest = rng.normal(size=(5, 7))
        p = attacks.minmax_direction(honest)
        g = attacks.minmax_gamma(honest, p)
        assert minmax_constraint_gap(honest, p, g) <= 1e-6
        assert minmax_constraint_gap(honest, p, g + 1e-3) > 0


def test_attack_config_validation():
    with pytest.raises(ValueError, match="bogus"):
        AttackConfig("bogus")
    with pytest.raises(ValueError):
        AttackConfig("IPM", {"strength": 2})
    with pytest.raises(ValueError):
        AttackConfig("Scaling", {"epsilon": 0})


def test_attack_driver_craft_shapes():
    g = np.random.default_rng(0).normal(size=(6, 5))
    for kind in ("Fang", "ALIE", "IPM", "Scaling", "MinMax", "Mimic"):
        out = Attack(AttackConfig(kind)).craft(view(g, prev=np.zeros(5)), 4)
        assert out.shape == (4, 5)
    assert not Attack(AttackConfig("LabelFlip")).crafts
    assert Attack(AttackConfig("LabelFlip")).flips_labels
