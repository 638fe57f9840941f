import json

import numpy as np
import pytest

from fadprobe.errors import FadprobeError
from fadprobe.fad import FadResult
from fadprobe.perturb import default_grid
from fadprobe.report import (
    RunReport,
    emit_diverging_bars,
    emit_radar,
    emit_run_report,
    emit_table,
    round3,
)
from fadprobe.scoring import AxisProfile, build_context, s_norm
from fadprobe.structfmt import load_struct

GRID = default_grid()

# Six-encoder reference fixture with a known best cell per column.
SIX_ENCODER_FIXTURE = [
    AxisProfile("audiomae", recall=0.645, precision=0.463, semantic=0.300, structural=0.238),
    AxisProfile("encodec", recall=0.851, precision=0.450, semantic=0.254, structural=0.042),
    AxisProfile("wav2vec2", recall=0.767, precision=0.420, semantic=0.294, structural=0.170),
    AxisProfile("vggish", recall=0.580, precision=0.380, semantic=0.445, structural=0.140),
    AxisProfile("clap", recall=0.694, precision=0.309, semantic=0.261, structural=0.238),
    AxisProfile("whisper", recall=0.889, precision=0.147, semantic=0.119, structural=0.495),
]


def test_round3_half_up():
    assert round3(0.6451) == "0.645"
    assert round3(0.6455) == "0.646"
    assert round3(0.0005) == "0.001"
    assert round3(1.0) == "1.000"


def test_table_best_markers_match_reference_fixture(tmp_path):
    doc = emit_table(SIX_ENCODER_FIXTURE, tmp_path / "t.csv", tmp_path / "t.struct")
    assert doc["best"] == {
        "recall": "whisper",
        "precision": "audiomae",
        "semantic": "vggish",
        "structural": "whisper",
    }
    csv_text = (tmp_path / "t.csv").read_text()
    assert "whisper,0.889*" in csv_text
    assert "audiomae,0.645,0.463*" in csv_text


def test_table_single_row_all_best(tmp_path):
    doc = emit_table(SIX_ENCODER_FIXTURE[:1], tmp_path / "t.csv", tmp_path / "t.struct")
    assert set(doc["best"].values()) == {"audiomae"}


def test_table_display_rounding(tmp_path):
    profile = AxisProfile("x", recall=0.6451, precision=0.5, semantic=0.5, structural=0.5)
    doc = emit_table([profile], tmp_path / "t.csv", tmp_path / "t.struct")
    assert doc["rows"][0]["display"]["recall"] == "0.645"
    assert doc["rows"][0]["recall"] == 0.6451


def test_radar_axis_order_and_values(tmp_path):
    doc = emit_radar(SIX_ENCODER_FIXTURE, tmp_path / "r.struct")
    assert doc["axes"] == ["recall", "precision", "semantic", "structural"]
    whisper = next(s for s in doc["series"] if s["encoder"] == "whisper")
    assert whisper["values"] == [0.889, 0.147, 0.119, 0.495]
    invariant = emit_radar(
        [AxisProfile("inv", recall=1.0, precision=0.0, semantic=0.0, structural=0.0)],
        tmp_path / "r2.struct",
    )
    assert invariant["series"][0]["values"] == [1.0, 0.0, 0.0, 0.0]


def test_diverging_bars_schema(tmp_path):
    scores = {
        "enc": {"reverse": 0.0, "shuffle_100ms": 0.5, "pitch_+8st": 0.7, "formant_1.4x": 0.2}
    }
    doc = emit_diverging_bars(scores, tmp_path / "b.struct")
    series = doc["series"][0]
    assert series["structural"] == {"reverse": 0.0, "shuffle_100ms": 0.5}
    assert series["semantic"] == {"pitch_+8st": 0.7, "formant_1.4x": 0.2}
    n_values = len(series["structural"]) + len(series["semantic"])
    assert n_values == 4


def test_diverging_bars_missing_condition(tmp_path):
    with pytest.raises(FadprobeError, match="shuffle_100ms"):
        emit_diverging_bars({"enc": {"reverse": 0.0}}, tmp_path / "b.struct")


def _tiny_report(seed=0):
    rng = np.random.default_rng(seed)
    datasets = ["ds1", "ds2"]
    results = {}
    contexts = {}
    profiles = []
    for enc in ("alpha", "beta", "gamma"):
        res = []
        for ds in datasets:
            for cond_id in GRID.ids:
                value = float(rng.uniform(0.01, 40.0))
                res.append(FadResult(value=value, mean_term=value, trace_term=0.0,
                                     encoder=enc, dataset=ds, condition=cond_id))
        results[enc] = res
        ctx = build_context(res, GRID)
        contexts[enc] = ctx
        scores = {a: [] for a in ("recall", "precision", "semantic", "structural")}
        for r in res:
            scores[GRID.by_id(r.condition).axis].append(s_norm(r.value, ctx))
        profiles.append(AxisProfile(
            encoder=enc,
            recall=1.0 - float(np.mean(scores["recall"])),
            precision=float(np.mean(scores["precision"])),
            semantic=float(np.mean(scores["semantic"])),
            structural=float(np.mean(scores["structural"])),
        ))
    return RunReport(
        run_id="abc123def456",
        fingerprint="abc123def456" * 4,
        grid=GRID,
        datasets=datasets,
        profiles=profiles,
        contexts=contexts,
        results=results,
        provenance={"policy": "max", "seed": 1},
    )


def test_bundle_is_byte_identical_across_runs(tmp_path):
    report = _tiny_report()
    emit_run_report(report, tmp_path / "one")
    emit_run_report(report, tmp_path / "two")
    files_one = sorted(p.name for p in (tmp_path / "one").iterdir())
    files_two = sorted(p.name for p in (tmp_path / "two").iterdir())
    assert files_one == files_two
    for name in files_one:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_bundle_traceability(tmp_path):
    report = _tiny_report(seed=5)
    emit_run_report(report, tmp_path / "out")
    prov = load_struct(tmp_path / "out" / "provenance.struct")
    for enc, enc_doc in prov["encoders"].items():
        ctx = report.contexts[enc]
        assert enc_doc["fad_max"] == ctx.fad_max
        for cond_id, per_ds in enc_doc["conditions"].items():
            for ds, cell in per_ds.items():
                assert abs(cell["s_norm"] - s_norm(cell["fad"], ctx)) < 1e-12

    # trajectory files recompute from the same raw numbers
    traj = load_struct(tmp_path / "out" / "trajectory_noise_ds1.struct")
    for series in traj["series"]:
        ctx = report.contexts[series["encoder"]]
        for point in series["points"]:
            assert abs(point["s_norm"] - s_norm(point["fad"], ctx)) < 1e-12


def test_bundle_index_and_partial_status(tmp_path):
    report = _tiny_report()
    report.absent_encoders = ["missing_enc"]
    status = emit_run_report(report, tmp_path / "out")
    assert status == "partial"
    index = load_struct(tmp_path / "out" / "index.struct")
    assert index["status"] == "partial"
    assert index["absent_encoders"] == ["missing_enc"]
    table = load_struct(tmp_path / "out" / "table.struct")
    assert table["absent"] == ["missing_enc"]
    csv_text = (tmp_path / "out" / "table.csv").read_text()
    assert "missing_enc,absent,absent,absent,absent" in csv_text


def test_correlation_document(tmp_path):
    report = _tiny_report()
    emit_run_report(report, tmp_path / "out")
    corr = load_struct(tmp_path / "out" / "correlation.struct")
    assert corr["status"] == "ok"
    xs = [p.structural for p in sorted(report.profiles, key=lambda p: p.encoder)]
    ys = [p.semantic for p in sorted(report.profiles, key=lambda p: p.encoder)]
    want = float(np.corrcoef(xs, ys)[0, 1])
    assert corr["pearson_r"] == pytest.approx(want, abs=1e-12)


def test_struct_files_are_json_with_kind(tmp_path):
    emit_run_report(_tiny_report(), tmp_path / "out")
    for path in (tmp_path / "out").glob("*.struct"):
        doc = json.loads(path.read_text())
        assert "kind" in doc, path.name
