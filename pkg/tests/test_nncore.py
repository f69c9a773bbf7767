import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from termcee import nncore as nn
from termcee.nncore import container


def param(store, name, data):
    return store.add(name, np.asarray(data, dtype=np.float64))


def test_softmax_uniform():
    p = nn.softmax_rows(nn.Tensor(np.zeros((1, 4), np.float32)))
    np.testing.assert_allclose(p.data, [[0.25] * 4])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(1, 8)), elements=st.floats(-40, 40, width=32)))
def test_softmax_rows_normalized(x):
    p = nn.softmax_rows(nn.Tensor(x)).data
    assert (p > 0).all()
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)


def test_matmul_shape_and_mismatch():
    a, b = nn.Tensor(np.ones((2, 3), np.float32)), nn.Tensor(np.ones((3, 1), np.float32))
    assert nn.matmul(a, b).shape == (2, 1)
    with pytest.raises(nn.ShapeError):
        nn.matmul(b, b)


@pytest.mark.filterwarnings("ignore:invalid value encountered:RuntimeWarning")
def test_non_finite_result_raises():
    with pytest.raises(nn.NonFiniteError):
        nn.matmul(nn.Tensor(np.array([[np.inf]], np.float32)), nn.Tensor(np.zeros((1, 1), np.float32)))


def test_dropout_rate_zero_and_eval_are_identity():
    x = nn.Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
    rng = nn.make_rng(0, nn.DROPOUT)
    assert nn.dropout(x, 0.0, rng, train=True) is x
    assert nn.dropout(x, 0.5, rng, train=False) is x


def test_dropout_inverted_scaling():
    x = nn.Tensor(np.ones((200, 50), np.float32))
    y = nn.dropout(x, 0.25, nn.make_rng(1, nn.DROPOUT), train=True).data
    survivors = y[y != 0]
    np.testing.assert_allclose(survivors, 1 / 0.75, rtol=1e-6)
    assert abs(y.mean() - 1.0) < 0.03


def test_concat_backward_splits_exactly():
    s = nn.ParamStore(np.float64)
    a, b = param(s, "a", np.ones((3, 2))), param(s, "b", np.ones((3, 4)))
    out = nn.concat([a, b], axis=1)
    g = np.random.default_rng(0).normal(size=(3, 6))
    out.backward(g)
    np.testing.assert_array_equal(np.concatenate([a.grad, b.grad], axis=1), g)


def test_slice_and_embedding_grads():
    s = nn.ParamStore(np.float64)
    t = param(s, "t", np.arange(12.0).reshape(4, 3))
    e = nn.embedding(t, np.array([1, 1, 3]))
    nn.add_all([nn.slice_cols(e, 0, 2), nn.slice_cols(e, 1, 3)]).backward(np.ones((3, 2)))
    np.testing.assert_array_equal(t.grad, [[0, 0, 0], [2, 4, 2], [0, 0, 0], [1, 2, 1]])
    with pytest.raises(nn.ShapeError):
        nn.embedding(t, np.array([4]))


def test_adam_single_step():
    s = nn.ParamStore(np.float32)
    w = s.add("w", np.zeros(1))
    w.grad = np.ones(1, np.float32)
    nn.adam_step(s, lr=1e-3)
    assert w.data[0] == pytest.approx(-1e-3, rel=1e-5)
    assert w.grad is None and s.adam.step == 1


def test_adam_zero_grad_from_rest_keeps_param():
    s = nn.ParamStore(np.float64)
    w = s.add("w", np.array([0.5, -1.0]))
    w.grad = np.zeros(2)
    nn.adam_step(s)
    np.testing.assert_array_equal(w.data, [0.5, -1.0])


def test_adam_zero_grad_decays_moments():
    s = nn.ParamStore(np.float64)
    w = s.add("w", np.array([0.5]))
    w.grad = np.array([2.0])
    nn.adam_step(s)
    m1, v1 = s.adam.m["w"].copy(), s.adam.v["w"].copy()
    w.grad = np.zeros(1)
    nn.adam_step(s)
    np.testing.assert_allclose(s.adam.m["w"], 0.9 * m1)
    np.testing.assert_allclose(s.adam.v["w"], 0.999 * v1)


def test_adam_deterministic_and_rejects_non_finite():
    def run():
        s = nn.ParamStore(np.float32)
        w = s.add("w", np.linspace(-1, 1, 7))
        for k in range(5):
            w.grad = np.sin(np.arange(7) + k).astype(np.float32)
            nn.adam_step(s)
        return w.data.tobytes(), s.adam.m["w"].tobytes(), s.adam.v["w"].tobytes()
    assert run() == run()
    s = nn.ParamStore(np.float32)
    s.add("w", np.zeros(2)).grad = np.array([np.nan, 0], np.float32)
    with pytest.raises(nn.NonFiniteError):
        nn.adam_step(s)


def test_clip_grad_norm():
    s = nn.ParamStore(np.float64)
    s.add("a", np.zeros(2)).grad = np.array([3.0, 0.0])
    s.add("b", np.zeros(1)).grad = np.array([4.0])
    assert nn.clip_grad_norm(s, 1.0) == pytest.approx(5.0)
    assert nn.grad_norm(s) == pytest.approx(1.0)


def test_gradcheck_quadratic():
    s = nn.ParamStore(np.float64)
    w = param(s, "w", [3.0])
    r = nn.grad_check(lambda: _square(w), s, coords=1)
    (c,) = r.checks
    assert c.analytic == pytest.approx(6.0)
    assert abs(c.numeric - 6.0) < 1e-6
    assert r.ok


def _square(w):
    col = nn.Tensor.from_op(w.data.reshape(1, 1), (w,), lambda g: (g.reshape(1),))
    return nn.matmul(col, col)


def test_gradcheck_composite_ops():
    s = nn.ParamStore(np.float64)
    rng = np.random.default_rng(3)
    W = param(s, "W", rng.normal(size=(4, 3)))
    b = param(s, "b", rng.normal(size=3))
    E = param(s, "E", rng.normal(size=(5, 4)))
    targets = np.array([0, 2, 1, 1])
    weights = np.array([0.5, 1.0, 2.0])

    def f():
        x = nn.embedding(E, np.array([0, 3, 3, 1]))
        h = nn.tanh(nn.add(nn.matmul(x, W), b))
        h = nn.add(h, nn.sigmoid(h))
        return nn.weighted_nll(nn.softmax_rows(nn.scale(h, 2.0)), targets, weights)

    r = nn.grad_check(f, s, coords=40)
    assert r.ok, r.summary()


@pytest.mark.parametrize("reverse", [False, True])
def test_gradcheck_lstm(reverse):
    s = nn.ParamStore(np.float64)
    rng = np.random.default_rng(5)
    H, D, T = 3, 4, 5
    x = param(s, "x", rng.normal(size=(T, D)))
    W = param(s, "W", rng.normal(scale=0.5, size=(D, 4 * H)))
    U = param(s, "U", rng.normal(scale=0.5, size=(H, 4 * H)))
    b = param(s, "b", rng.normal(scale=0.5, size=4 * H))

    def f():
        out = nn.lstm(x, W, U, b, reverse=reverse)
        return nn.weighted_nll(nn.softmax_rows(out), np.arange(T) % H, np.ones(H))

    r = nn.grad_check(f, s, coords=60)
    assert r.ok, r.summary()


def test_lstm_reverse_matches_flipped_forward():
    rng = np.random.default_rng(0)
    x = nn.Tensor(rng.normal(size=(6, 2)))
    W, U, b = (nn.Tensor(rng.normal(size=sh)) for sh in ((2, 8), (2, 8), (8,)))
    fwd_on_flipped = nn.lstm(nn.Tensor(x.data[::-1].copy()), W, U, b).data
    np.testing.assert_allclose(nn.lstm(x, W, U, b, reverse=True).data, fwd_on_flipped[::-1])


def test_gradcheck_detects_corrupted_backward():
    s = nn.ParamStore(np.float64)
    w = param(s, "w", np.array([[0.3, -0.7, 1.1]]))

    def bad_tanh(a):
        y = np.tanh(a.data)
        return nn.Tensor.from_op(y, (a,), lambda g: (2.0 * g * (1 - y * y),))

    def f():
        return nn.matmul(bad_tanh(w), nn.Tensor(np.ones((3, 1))))

    r = nn.grad_check(f, s, coords=3)
    assert not r.ok
    assert len(r.failures) == 3
    assert r.max_rel_err == pytest.approx(0.5, rel=1e-3)


def test_rng_streams_reproducible_and_independent():
    a = nn.make_rng(42, nn.SHUFFLE).random(5)
    assert np.array_equal(a, nn.make_rng(42, nn.SHUFFLE).random(5))
    assert not np.array_equal(a, nn.make_rng(42, nn.DROPOUT).random(5))
    assert not np.array_equal(a, nn.make_rng(43, nn.SHUFFLE).random(5))


def test_container_roundtrip(tmp_path):
    arrays = {"b": np.arange(6, dtype=np.float32).reshape(2, 3), "a": np.array([1, -2], dtype=np.int64),
              "z": np.zeros((0, 4), np.float64)}
    path = tmp_path / "c.bin"
    container.save(path, arrays, {"k": [1, 2]})
    blob = path.read_bytes()
    assert blob[:8] == container.MAGIC
    got, meta = container.load(path)
    assert meta == {"k": [1, 2]}
    for k, v in arrays.items():
        assert got[k].dtype == v.dtype and np.array_equal(got[k], v)
    assert container.dumps(arrays, {"k": [1, 2]}) == blob


def test_container_rejects_garbage():
    with pytest.raises(container.ContainerError):
        container.loads(b"NOTMAGIC" + b"\0" * 16)
    blob = container.dumps({"a": np.ones(4, np.float32)})
    with pytest.raises(container.ContainerError):
        container.loads(blob[:-3])
