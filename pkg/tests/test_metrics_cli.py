import json

import pytest

from emsserve import builtin_episode, run, speedup
from emsserve.cli import main
from emsserve.episodes import RunConfig
from emsserve.errors import MismatchedRuns, SchemaError
from emsserve.metrics import (
    REPORT_CSV_HEADER,
    comparison_from_json,
    comparison_to_json,
    events_from_csv,
    export,
    load_report,
    report_from_json,
    report_to_csv,
    report_to_json,
)


@pytest.fixture
def episode1_reports(synthetic_profile):
    cfg = RunConfig(profile=synthetic_profile)
    episode = builtin_episode(1)
    return run(episode, "baseline", cfg), run(episode, "emsserve", cfg)


def test_speedup_episode1(episode1_reports):
    base, ems = episode1_reports
    cmp = speedup(base, ems)
    assert cmp.speedup == pytest.approx(10.80, abs=0.01)
    assert cmp.baseline_total_s == pytest.approx(22.041, abs=1e-9)
    assert cmp.emsserve_total_s == pytest.approx(2.041, abs=1e-9)
    assert len(cmp.per_event_delta) == 21
    assert all(d >= 0 for d in cmp.per_event_delta)
    assert cmp.per_event_delta[-1] == pytest.approx(base.total_s - ems.total_s)


def test_speedup_identity_is_one(episode1_reports):
    base, ems = episode1_reports
    from dataclasses import replace

    fake_base = replace(ems, mode="baseline")
    assert speedup(fake_base, ems).speedup == 1.0


def test_speedup_rejects_different_episodes(synthetic_profile):
    cfg = RunConfig(profile=synthetic_profile)
    base = run(builtin_episode(1), "baseline", cfg)
    ems = run(builtin_episode(2), "emsserve", cfg)
    with pytest.raises(MismatchedRuns):
        speedup(base, ems)


def test_speedup_rejects_different_configs(synthetic_profile, two_device_profile):
    episode = builtin_episode(1)
    base = run(episode, "baseline", RunConfig(profile=synthetic_profile))
    ems = run(episode, "emsserve", RunConfig(profile=two_device_profile, device="glass"))
    with pytest.raises(MismatchedRuns):
        speedup(base, ems)


def test_speedup_rejects_wrong_modes(episode1_reports):
    base, ems = episode1_reports
    with pytest.raises(MismatchedRuns):
        speedup(ems, base)


def test_report_json_roundtrip(episode1_reports):
    _, ems = episode1_reports
    assert report_from_json(report_to_json(ems)) == ems


def test_report_csv_roundtrip(episode1_reports):
    base, _ = episode1_reports
    assert events_from_csv(report_to_csv(base)) == base.per_event


def test_csv_header_is_documented_schema(episode1_reports):
    _, ems = episode1_reports
    first_line = report_to_csv(ems).splitlines()[0]
    assert first_line == ",".join(REPORT_CSV_HEADER)
    assert first_line == "index,modality,placement,latency_s,cumulative_s,recommendation"


def test_csv_pending_cells(synthetic_profile):
    report = run(builtin_episode(2), "emsserve", RunConfig(profile=synthetic_profile))
    lines = report_to_csv(report).splitlines()
    assert lines[1].endswith("pending")  # first image arrives before speech
    restored = events_from_csv("\n".join(lines))
    assert restored[0].recommendation is None


def test_csv_rejects_wrong_header():
    with pytest.raises(SchemaError):
        events_from_csv("a,b,c\n1,2,3\n")


def test_comparison_json_roundtrip(episode1_reports):
    cmp = speedup(*episode1_reports)
    assert comparison_from_json(comparison_to_json(cmp)) == cmp


def test_export_roundtrip_files(tmp_path, episode1_reports):
    base, ems = episode1_reports
    export(ems, "json", tmp_path / "ems.json")
    assert load_report(tmp_path / "ems.json") == ems
    export(base, "csv", tmp_path / "base.csv")
    assert events_from_csv((tmp_path / "base.csv").read_text()) == base.per_event
    export(speedup(base, ems), "json", tmp_path / "cmp.json")
    restored = comparison_from_json((tmp_path / "cmp.json").read_text())
    assert restored.speedup == pytest.approx(10.80, abs=0.01)


def test_export_unwritable_path_raises(episode1_reports):
    _, ems = episode1_reports
    with pytest.raises(OSError):
        export(ems, "json", "/nonexistent-dir/report.json")


def test_export_rejects_unknown_format(tmp_path, episode1_reports):
    _, ems = episode1_reports
    with pytest.raises(SchemaError):
        export(ems, "yaml", tmp_path / "x.yaml")


# --- CLI ------------------------------------------------------------------------


def test_cli_run_is_byte_deterministic(tmp_path):
    args = [
        "run", "--episode", "2", "--mode", "emsserve", "--seed", "7", "--clock", "virtual",
    ]
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_cli_run_compare_flow(tmp_path, capsys):
    base_path, ems_path = tmp_path / "base.json", tmp_path / "ems.json"
    common = ["--episode", "1", "--profile", "synthetic-glass"]
    assert main(["run", *common, "--mode", "baseline", "--out", str(base_path)]) == 0
    assert main(["run", *common, "--mode", "emsserve", "--out", str(ems_path)]) == 0
    cmp_path = tmp_path / "cmp.json"
    assert main(["compare", "--base", str(base_path), "--ems", str(ems_path), "--out", str(cmp_path)]) == 0
    doc = json.loads(cmp_path.read_text())
    assert doc["schema"] == 1
    assert abs(doc["speedup"] - 10.80) < 0.01


def test_cli_run_csv_output(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["run", "--episode", "1", "--mode", "baseline", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "index,modality,placement,latency_s,cumulative_s,recommendation"


def test_cli_run_stdout_json(capsys):
    assert main(["run", "--episode", "1", "--mode", "emsserve"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mode"] == "emsserve"
    assert len(doc["per_event"]) == 21


def test_cli_run_with_offload_trace(tmp_path):
    out = tmp_path / "offload.json"
    rc = main(
        [
            "run", "--episode", "1", "--mode", "emsserve", "--profile", "device-bench",
            "--trace", "constant:1e8", "--offload", "on", "--out", str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert {r["placement"] for r in doc["per_event"]} == {"edge"}


def test_cli_validation_error_exit_code(capsys):
    assert main(["run", "--episode", "9", "--mode", "emsserve"]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_io_error_exit_code(capsys):
    assert main(["compare", "--base", "/nope/a.json", "--ems", "/nope/b.json"]) == 1


def test_cli_med_dose(capsys):
    assert main(["med", "dose", "--quantity", "21", "--concentration", "4.2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["volume_ml"] == 5.0


def test_cli_med_dose_validation(capsys):
    assert main(["med", "dose", "--quantity", "5", "--concentration", "0"]) == 2


def test_cli_med_match(capsys):
    assert main(["med", "match", "--token", "naloxne"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["match"] == "naloxone"
    assert doc["diseases"] == ["opioid overdose"]


def test_cli_med_match_custom_dictionary(tmp_path, capsys):
    from emsserve.medkit import dictionary_to_json, sample_dictionary

    path = tmp_path / "meds.json"
    path.write_text(dictionary_to_json(sample_dictionary()))
    assert main(["med", "match", "--token", "atrovnt", "--dict", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["match"] == "atrovent"


def test_cli_episodes_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.ep", tmp_path / "b.ep"
    assert main(["episodes", "gen", "--seed", "13", "--out", str(a)]) == 0
    assert main(["episodes", "gen", "--seed", "13", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    codes = [line.split(",")[0] for line in a.read_text().splitlines()]
    assert codes.count("S") == 1


def test_cli_run_episode_file(tmp_path, capsys):
    path = tmp_path / "tiny.ep"
    path.write_text("S\nV\nI\n")
    assert main(["run", "--episode", str(path), "--mode", "emsserve"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r["modality"] for r in doc["per_event"]] == ["S", "V", "I"]


def test_cli_profile_command(tmp_path):
    out = tmp_path / "profile.json"
    assert main(["profile", "--runs", "3", "--keep", "2", "--device", "local", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1
    assert "text" in doc["devices"]["local"]
    assert all(v >= 0 for v in doc["devices"]["local"].values())


def test_cli_profile_invalid_args():
    assert main(["profile", "--runs", "2", "--keep", "5", "--out", "/tmp/x.json"]) == 2
