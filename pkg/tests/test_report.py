import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from uts import analysis, report
from uts.plots import plot_losses

from helpers import synthetic

SCHEMA = json.loads((Path(__file__).parent / "fixtures" / "report.schema.json").read_text())


def test_parse_metrics():
    assert report.parse_metrics("R1, rl") == ["r1", "rl"]
    for bad in ("", "r3", "r1,bleu"):
        with pytest.raises(ValueError):
            report.parse_metrics(bad)


def test_score_example_uses_summary_words():
    ex = synthetic(1)[0]
    s = report.score_example(list(ex.summary_words), ex, ["r1", "r2", "rl", "datef1"])
    assert s.scores["r1"] == s.scores["r2"] == s.scores["rl"] == 1.0
    assert s.scores["datef1"] == 1.0


def fake_scores(monkeypatch, table):
    """table[ckpt] = list of per-example r2 scores."""
    monkeypatch.setattr(report, "load_model", lambda path: (path, {"epoch": int(path[-1])}))

    def score_model(model, examples, metrics, beam, max_len):
        return [report.ExampleScore(ex.id, ["w"], {"r2": v}, False) for ex, v in zip(examples, table[model])]

    monkeypatch.setattr(report, "score_model", score_model)


def test_checkpoint_average(monkeypatch):
    exs = synthetic(2)
    fake_scores(monkeypatch, {"c1": [0.1, 0.3], "c2": [0.2, 0.2], "c3": [0.3, 0.7]})
    rep = report.eval_report(["c1", "c2", "c3"], exs, ["r2"])
    assert [c["mean"]["r2"] for c in rep["checkpoints"]] == pytest.approx([0.2, 0.2, 0.5])
    assert [e["mean"]["r2"] for e in rep["examples"]] == pytest.approx([0.2, 0.4])
    assert rep["mean"]["r2"] == pytest.approx(0.3)
    jsonschema.validate(rep, SCHEMA)


def test_ten_twenty_thirty(monkeypatch):
    exs = synthetic(1)
    fake_scores(monkeypatch, {"c1": [0.1], "c2": [0.2], "c3": [0.3]})
    assert report.eval_report(["c1", "c2", "c3"], exs, ["r2"])["mean"]["r2"] == pytest.approx(0.2)


def test_single_checkpoint_is_identity(monkeypatch):
    exs = synthetic(3)
    fake_scores(monkeypatch, {"c1": [0.5, 0.25, 0.0]})
    rep = report.eval_report(["c1"], exs, ["r2"])
    assert [e["mean"]["r2"] for e in rep["examples"]] == [0.5, 0.25, 0.0]
    assert rep["mean"]["r2"] == pytest.approx(0.25)


def test_report_needs_inputs():
    with pytest.raises(ValueError):
        report.eval_report([], synthetic(1), ["r2"])


def test_center_of_mass():
    np.testing.assert_allclose(analysis.center_of_mass(np.array([[1, 0, 0], [0.25, 0.25, 0.5]])), [0.0, 1.25])
    maps = [analysis.TimeAttention("a", ["x", "y"], np.array([[1.0, 0.0], [0.0, 1.0]])),
            analysis.TimeAttention("b", ["x"], np.array([[0.5, 0.5]]))]
    assert analysis.first_last_com(maps) == (0.25, 0.75)


def test_is_ascending():
    assert analysis.is_ascending([0, 2, 5]) and analysis.is_ascending([]) and analysis.is_ascending([3])
    assert not analysis.is_ascending([2, 1]) and not analysis.is_ascending([1, 1])


def test_loss_plot_from_three_epochs(tmp_path):
    rows = [{"epoch": e, "l_abs": 3.0 / e, "l_ext": 2.0 / e, "l_inc": 4.0 - e, "total": 9.0 / e, "consistency": 5 - e}
            for e in (1, 2, 3)]
    out = plot_losses(rows, tmp_path / "l.svg")
    text = out.read_text()
    assert "<svg" in text and "l_inc" in text
