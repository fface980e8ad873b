import math

import numpy as np
import pytest

from uts import analysis
from uts.numerics import checkpoint
from uts.train import (ConfigError, TrainConfig, TrainState, coerce, dump_config, load_config, load_model,
                       parse_config_text, read_loss_log, save_model, train)

from helpers import synthetic

TINY = dict(embed_dim=6, hidden_dim=6, key_dim=4, global_dim=8, local_dim=6, batch_size=4, init_range=0.1)


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.hidden_dim, cfg.embed_dim, cfg.key_dim, cfg.global_dim, cfg.local_dim) == (256, 128, 128, 512, 256)
    assert (cfg.batch_size, cfg.max_events, cfg.lr, cfg.clip_norm) == (16, 8, 0.15, 2.0)
    assert (cfg.beam, cfg.K, cfg.lambda_inc, cfg.init_range, cfg.patience) == (4, 3, 1.0, 0.02, 3)


@pytest.mark.parametrize("bad", [dict(hidden_dim=0), dict(init_range=0.0), dict(lr=-1.0), dict(lambda_inc=-0.5),
                                 dict(dtype="float16"), dict(K=0)])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        TrainConfig(**bad)


def test_config_text_round_trip(tmp_path):
    cfg = TrainConfig(hidden_dim=12, use_graph=False, lambda_inc=0.5)
    p = tmp_path / "c.txt"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg
    assert load_config(p, {"seed": 9}).seed == 9


def test_config_parsing_errors():
    with pytest.raises(ConfigError):
        parse_config_text("hidden_dim 3")
    with pytest.raises(ConfigError):
        coerce("nope", "1")
    with pytest.raises(ConfigError):
        coerce("use_graph", "maybe")
    assert parse_config_text("# c\nuse_copy = off  # trailing\n") == {"use_copy": False}


def test_early_stopping_state():
    st = TrainState()
    st.update_val(1.0)
    assert not st.should_stop(1)
    st.update_val(1.5)
    assert st.should_stop(1)
    st.update_val(0.5)
    assert st.epochs_since_best == 0 and st.best_val_loss == 0.5


def test_top_checkpoints_kept_in_order():
    st = TrainState()
    for loss, p in [(3.0, "a"), (1.0, "b"), (2.0, "c")]:
        assert st.offer(loss, p)[0]
    kept, evicted = st.offer(0.5, "d")
    assert kept and evicted == ["a"]
    kept, evicted = st.offer(9.0, "e")
    assert not kept and evicted == ["e"]
    assert [p for _, p in st.top_checkpoints] == ["d", "b", "c"]


@pytest.fixture(scope="module")
def data():
    exs = synthetic(14, seed=5)
    return exs[:10], exs[10:]


def test_training_stops_on_rising_validation(data, monkeypatch, tmp_path):
    import uts.train as tr

    vals = iter([1.0, 2.0, 3.0, 4.0])
    real = tr.evaluate_losses

    def fake(model, examples, cfg):
        out = real(model, examples, cfg)
        out["total"] = next(vals)
        return out

    monkeypatch.setattr(tr, "evaluate_losses", fake)
    res = train(TrainConfig(**TINY, max_epochs=4, patience=1), *data, out_dir=tmp_path)
    assert len(res.history) == 2
    assert sorted(p.name for p in tmp_path.glob("*.uts")) == ["ckpt-epoch001.uts", "ckpt-epoch002.uts"]
    rows = read_loss_log(tmp_path / "losses.tsv")
    assert [r["epoch"] for r in rows] == [1, 2]


def test_at_most_three_checkpoints(data, tmp_path):
    res = train(TrainConfig(**TINY, max_epochs=5, patience=10), *data, out_dir=tmp_path)
    files = sorted(tmp_path.glob("*.uts"))
    assert len(files) == 3
    assert {str(f) for f in files} == {p for _, p in res.state.top_checkpoints}


def test_epoch_one_bitwise_reproducible(data):
    cfg = TrainConfig(**TINY, max_epochs=1)
    a = train(cfg, *data).model.params
    b = train(cfg, *data).model.params
    for name in a.names():
        assert a[name].data.tobytes() == b[name].data.tobytes()
    c = train(cfg.replace(seed=1), *data).model.params
    assert any(a[n].data.tobytes() != c[n].data.tobytes() for n in a.names())


def test_checkpoint_save_load_save_identical(data, tmp_path):
    res = train(TrainConfig(**TINY, max_epochs=1), *data)
    cfg = TrainConfig(**TINY)
    save_model(tmp_path / "a.uts", res.model, cfg, 1, 0.5)
    model, meta = load_model(tmp_path / "a.uts")
    save_model(tmp_path / "b.uts", model, cfg, meta["epoch"], meta["val_loss"])
    assert (tmp_path / "a.uts").read_bytes() == (tmp_path / "b.uts").read_bytes()
    assert model.vocab.itos == res.model.vocab.itos


def test_load_rejects_mismatched_config(data, tmp_path):
    res = train(TrainConfig(**TINY, max_epochs=1), *data)
    p = tmp_path / "m.uts"
    params = res.model.params
    meta = {"model_config": {**res.model.cfg.to_dict(), "hidden_dim": 7, "local_dim": 7},
            "vocab": res.model.vocab.itos[4:], "epoch": 1}
    checkpoint.save(p, params, meta)
    with pytest.raises(checkpoint.CheckpointError):
        load_model(p)


def test_float32_training_runs(data):
    res = train(TrainConfig(**TINY, max_epochs=1, dtype="float32"), *data)
    assert res.model.params["embedding"].data.dtype == np.float32
    assert math.isfinite(res.history[0].total)


def test_history_has_diagnostics(data):
    res = train(TrainConfig(**TINY, max_epochs=2), *data)
    h = res.history[-1]
    assert h.l_inc >= 0 and h.consistency > 0 and h.val_l_abs_per_token > 0


def test_rejects_too_many_events(data):
    with pytest.raises(ValueError):
        train(TrainConfig(**{**TINY, "max_events": 1}, max_epochs=1), *data)


def test_consistency_measure_by_hand():
    alpha = np.zeros((1, 2, 3))
    alpha[0, 0] = [0.5, 0.1, 0.0]
    alpha[0, 1] = [0.3, 0.1, 0.0]
    beta = np.array([[0.25, 0.75]])
    # top-3 words: (0,0)=0.5, (1,0)=0.3, then the tie at 0.1 goes to (0,1)
    expected = -math.log((0.5 * 0.25 + 0.3 * 0.75 + 0.1 * 0.25) / 3)
    assert analysis.consistency_measure(alpha, beta)[0] == pytest.approx(expected)
