import numpy as np
import pytest

from pacluster.core import InvalidDataError
from pacluster.pipeline import PacConfig, lambda_g_time, pac_fit
from pacluster.streaming import MAGIC, StateFormatError, StreamState, state_load, state_save, stream_step

CFG = PacConfig(n_threads=3, lambda_c=0.5, epsilon=0.5, seed=4)


def batch(seed, n=150):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [3.0, 0.0], [1.5, 2.5]])
    return np.vstack([c + 0.3 * rng.normal(size=(n, 2)) for c in centers])


def run(k_steps, cfg=CFG):
    state = None
    results = []
    for t in range(k_steps):
        state, res = stream_step(state, batch(t), cfg)
        results.append(res)
    return state, results


def test_lambda_g_time_examples():
    assert lambda_g_time(0.1, 1000, 10, 1000, 0.5) == pytest.approx(1000.0)
    assert lambda_g_time(0.1, 4000, 40, 1000, 0.5) == pytest.approx(1000.0 * 2)
    assert lambda_g_time(0.1, 4000, 40, 1000, 0.0) == pytest.approx(1000.0)


def test_state_grows():
    state, results = run(3)
    assert state.t == 3
    assert state.data.shape == (1350, 2)
    assert state.first_batch_size == 450
    assert len(state.k_history) == 3 and state.k_history[-1] == results[-1].k
    assert len(state.subsets) == 9
    assert sorted(np.concatenate(state.subsets).tolist()) == list(range(1350))
    assert state.atoms.thread.max() == 8
    assert state.lambda_history[-1] == pytest.approx(
        lambda_g_time(CFG.epsilon, 1350, len(state.atoms), 450, CFG.nu)
    )
    assert results[-1].labels.shape == (1350,)
    assert results[-1].k == 3


def test_earlier_atoms_are_frozen():
    s1, _ = run(1)
    s2, _ = stream_step(s1, batch(1), CFG)
    n1 = len(s1.atoms)
    np.testing.assert_array_equal(s2.atoms.sizes[:n1], s1.atoms.sizes)
    np.testing.assert_array_equal(s2.atoms.coord_sums[:n1], s1.atoms.coord_sums)
    np.testing.assert_array_equal(s2.atoms.labels[:450], s1.atoms.labels)


def test_matches_one_shot_fit_with_same_subsets():
    state, results = run(3)
    cfg = PacConfig(**{**CFG.__dict__, "n_threads": 9, "lambda_g": state.lambda_history[-1]})
    one = pac_fit(state.data, cfg, subsets=state.subsets)
    np.testing.assert_array_equal(one.parallel.atoms.labels, state.atoms.labels)
    np.testing.assert_allclose(one.parallel.atoms.coord_sums, state.atoms.coord_sums, rtol=1e-12)
    np.testing.assert_array_equal(one.labels, results[-1].labels)


def test_fixed_lambda_g_is_used():
    cfg = PacConfig(**{**CFG.__dict__, "lambda_g": 123.0})
    state, _ = run(2, cfg)
    assert state.lambda_history == [123.0, 123.0]


def test_dimension_mismatch():
    state, _ = run(1)
    with pytest.raises(InvalidDataError):
        stream_step(state, np.zeros((10, 3)), CFG)


def test_save_load_round_trip():
    state, _ = run(2)
    back = state_load(state_save(state))
    np.testing.assert_array_equal(back.data, state.data)
    for f in ("labels", "sizes", "coord_sums", "scatter", "radius", "thread"):
        np.testing.assert_array_equal(getattr(back.atoms, f), getattr(state.atoms, f))
    assert all(np.array_equal(a, b) for a, b in zip(back.subsets, state.subsets))
    assert back.lambda_history == state.lambda_history
    assert back.parallel_energy == state.parallel_energy
    assert (back.t, back.first_batch_size, back.k_history) == (state.t, state.first_batch_size, state.k_history)
    # continuing from a reloaded state is the same as continuing in memory
    a, ra = stream_step(state, batch(7), CFG)
    b, rb = stream_step(back, batch(7), CFG)
    np.testing.assert_array_equal(ra.labels, rb.labels)
    assert state_save(a) == state_save(b)


def test_empty_state_round_trip():
    back = state_load(state_save(StreamState.empty(2)))
    assert back.t == 0 and back.data.shape == (0, 2) and back.subsets == []


@pytest.mark.parametrize(
    "mangle",
    [
        lambda b: b[:5],
        lambda b: b"NOTSTATE" + b[8:],
        lambda b: b[:8] + (99).to_bytes(4, "little") + b[12:],
        lambda b: b[:-10],
        lambda b: b[:-1] + bytes([b[-1] ^ 0xFF]),
        lambda b: b[:20] + b"}" + b[21:],
    ],
    ids=["short", "magic", "version", "truncated", "flipped", "header"],
)
def test_corrupt_states_rejected(mangle):
    blob = state_save(run(1)[0])
    assert blob.startswith(MAGIC)
    with pytest.raises(StateFormatError):
        state_load(mangle(blob))
