import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uts import numerics as nx
from uts.numerics import ParamStore
from uts.numerics.optim import ADAGRAD_EPS, clip_by_global_norm, global_norm


def store(**values):
    ps = ParamStore(np.float64)
    for k, v in values.items():
        ps.add(k, np.asarray(v, dtype=float))
    return ps


def test_defaults_match_reported_hyperparameters():
    import inspect
    sig = inspect.signature(nx.adagrad_step)
    assert sig.parameters["lr"].default == 0.15
    assert sig.parameters["clip_norm"].default == 2.0
    assert ADAGRAD_EPS == 1e-8


def test_single_step_hand_computation():
    ps = store(p=[1.0])
    ps["p"].grad = np.array([1.0])
    nx.adagrad_step(ps, lr=0.1, clip_norm=2.0)
    assert ps["p"].data[0] == pytest.approx(1 - 0.1 / (1 + 1e-8), abs=1e-15)
    assert ps.adagrad_accumulators["p"][0] == 1.0


def test_clipping_to_norm_two():
    g = {"a": np.array([6.0, 8.0])}
    clipped, norm = clip_by_global_norm(g, 2.0)
    assert norm == 10.0
    assert global_norm(clipped) == pytest.approx(2.0)


@given(arrays(np.float64, 4, elements=st.floats(-1, 1, allow_nan=False)))
def test_clipping_is_noop_below_threshold(g):
    grads = {"a": g / max(1.0, np.linalg.norm(g)) * 0.99}
    clipped, _ = clip_by_global_norm(grads, 1.0)
    assert clipped["a"] is grads["a"]


@given(arrays(np.float64, (2, 3), elements=st.floats(-3, 3, allow_nan=False)))
def test_zero_gradient_leaves_params_bit_identical(v):
    ps = store(w=v)
    before = ps["w"].data.tobytes()
    ps["w"].grad = np.zeros_like(v)
    nx.adagrad_step(ps)
    assert ps["w"].data.tobytes() == before


def test_accumulators_stay_nonnegative(rng):
    ps = store(a=rng.normal(size=3), b=rng.normal(size=(2, 2)))
    for _ in range(5):
        for n, t in ps.items():
            t.grad = rng.normal(size=t.shape)
        nx.adagrad_step(ps)
    ps.check_invariants()


def test_invalid_hyperparameters():
    ps = store(a=[1.0])
    with pytest.raises(ValueError):
        nx.adagrad_step(ps, lr=0.0)
    with pytest.raises(ValueError):
        nx.adagrad_step(ps, clip_norm=-1.0)


def test_fill_accumulators():
    ps = store(a=[1.0, 2.0])
    ps.fill_accumulators(0.01)
    np.testing.assert_array_equal(ps.adagrad_accumulators["a"], [0.01, 0.01])
    with pytest.raises(ValueError):
        ps.fill_accumulators(-1.0)


def test_param_store_invariants():
    ps = store(a=[1.0])
    with pytest.raises(KeyError):
        ps.add("a", [2.0])
    assert set(ps.adagrad_accumulators) == set(ps.names())
    with pytest.raises(ValueError):
        ps.load_values({"a": np.zeros(2)})
