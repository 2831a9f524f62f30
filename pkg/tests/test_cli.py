import json
import shutil
from pathlib import Path

import pytest

from logicaltex.cli import main
from logicaltex.degrader import degrade, emit_pairs

from conftest import ARXIV_CACHE, FULL_PROFILES, LOGICAL_FIXTURES, PROFILE_SETS


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def machine_records(out: str):
    return [json.loads(line) for line in out.strip().splitlines() if line.strip()]


@pytest.fixture()
def degraded_file(tmp_path):
    src = LOGICAL_FIXTURES[0].read_text()
    visual, truth = degrade(src, FULL_PROFILES, 0)
    path = tmp_path / "sample.visual.tex"
    path.write_text(visual, encoding="utf-8")
    (tmp_path / "sample.truth.json").write_text(truth.to_json(), encoding="utf-8")
    return path


def test_detect_logical_file_exit_zero(tmp_path, capsys):
    path = tmp_path / "doc.tex"
    shutil.copy(LOGICAL_FIXTURES[0], path)
    code, out, _ = run(capsys, "--report", "machine", "detect", str(path))
    assert code == 0
    rec = machine_records(out)[0]
    assert rec["schema"] == 1
    assert rec["class"] == "logical"
    assert rec["detections"] == []


def test_detect_visual_file_lists_detections(degraded_file, capsys):
    code, out, _ = run(capsys, "--report", "machine", "detect", str(degraded_file))
    assert code == 0
    rec = machine_records(out)[0]
    assert rec["class"] == "visual"
    kinds = {d["kind"] for d in rec["detections"]}
    assert "title" in kinds and "section-header" in kinds


def test_convert_writes_suffixed_copy(degraded_file, capsys):
    code, out, _ = run(capsys, "--report", "machine", "convert",
                       str(degraded_file), "--scope", "full", "--aggressive")
    assert code == 0
    rec = machine_records(out)[0]
    out_path = Path(rec["output"])
    assert out_path.exists()
    assert out_path.name.endswith(".logical.tex")
    converted = out_path.read_text()
    assert "\\title{" in converted and "\\maketitle" in converted
    assert rec["class_after"] == "logical"


def test_convert_metadata_scope_leaves_body(degraded_file, capsys):
    original = degraded_file.read_text()
    code, out, _ = run(capsys, "--report", "machine", "convert",
                       str(degraded_file), "--scope", "metadata")
    rec = machine_records(out)[0]
    converted = Path(rec["output"]).read_text()
    assert "\\title{" in converted
    # visual section headers in the body are untouched under metadata scope
    for line in original.splitlines():
        if "\\noindent{\\bf" in line or "\\textbf{\\large" in line:
            assert line in converted
    assert any("scope" in s["reason"] for s in rec["skipped"])


def test_convert_stdout_mode(degraded_file, capsys):
    code, out, _ = run(capsys, "convert", str(degraded_file),
                       "--scope", "full", "--aggressive", "--output", "stdout")
    assert code == 0
    assert "\\title{" in out


def test_convert_inplace_requires_force(degraded_file, capsys):
    code, _, err = run(capsys, "convert", str(degraded_file), "--output", "inplace")
    assert code == 3
    assert "force" in err
    before = degraded_file.read_text()
    assert degraded_file.read_text() == before
    code2, _, _ = run(capsys, "convert", str(degraded_file),
                      "--output", "inplace", "--force", "--scope", "full",
                      "--aggressive")
    assert code2 == 0
    assert "\\title{" in degraded_file.read_text()


def test_convert_idempotent_outputs_byte_identical(degraded_file, tmp_path, capsys):
    run(capsys, "convert", str(degraded_file), "--scope", "full", "--aggressive")
    first = Path(str(degraded_file).replace(".tex", ".logical.tex")).read_bytes()
    run(capsys, "convert", str(degraded_file), "--scope", "full", "--aggressive")
    second = Path(str(degraded_file).replace(".tex", ".logical.tex")).read_bytes()
    assert first == second


def test_degrade_command_emits_pairs_and_manifest(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for p in LOGICAL_FIXTURES[:3]:
        shutil.copy(p, corpus / p.name)
    out_dir = tmp_path / "pairs"
    code, out, _ = run(capsys, "--report", "machine", "degrade", str(corpus),
                       "--out", str(out_dir), "--profiles",
                       "centerline-style,numbered-markers", "--seeds", "0,1")
    assert code == 0
    assert (out_dir / "manifest.jsonl").exists()
    rows = [r for r in machine_records(out) if r.get("command") == "degrade"]
    assert len(rows) == 6
    summary = [r for r in machine_records(out) if r.get("command") == "degrade-summary"][0]
    assert summary["pairs"] == 6


def test_degrade_skip_not_logical_warns(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    shutil.copy(LOGICAL_FIXTURES[0], corpus / "good.tex")
    visual, _ = degrade(LOGICAL_FIXTURES[0].read_text(), FULL_PROFILES, 0)
    (corpus / "bad.tex").write_text(visual, encoding="utf-8")
    code, out, _ = run(capsys, "--report", "machine", "degrade", str(corpus),
                       "--out", str(tmp_path / "pairs"))
    assert code == 1  # warn
    records = machine_records(out)
    assert any("skipped" in r for r in records)


def test_validate_degraded_with_sidecar_passes(degraded_file, capsys):
    code, out, _ = run(capsys, "--report", "machine", "validate",
                       str(degraded_file), "--scope", "full", "--aggressive",
                       "--offline")
    assert code == 0
    rec = machine_records(out)[0]
    assert rec["verdict"] == "pass"
    assert rec["body_preserved"] is True
    assert rec["structural"] == []
    scores = rec["metadata_scores"]
    assert scores["title_similarity"] == 1.0
    assert scores["author_set_f1"] == 1.0
    assert scores["abstract_similarity"] >= 0.95


def test_validate_warn_on_mismatched_sidecar(degraded_file, tmp_path, capsys):
    sidecar = degraded_file.with_name("sample.truth.json")
    truth = json.loads(sidecar.read_text())
    truth["title"] = "A Completely Different Title Entirely"
    sidecar.write_text(json.dumps(truth), encoding="utf-8")
    code, out, _ = run(capsys, "--report", "machine", "validate",
                       str(degraded_file), "--scope", "full", "--aggressive",
                       "--offline")
    assert code == 1
    assert machine_records(out)[0]["verdict"] == "warn"


def test_validate_against_arxiv_cache_offline(tmp_path, capsys):
    # quantum_walks fixture matches the 2401.01234 cache record
    quantum = next(p for p in LOGICAL_FIXTURES if p.name == "quantum_walks.tex")
    path = tmp_path / "2401.01234.tex"
    shutil.copy(quantum, path)
    code, out, _ = run(capsys, "--report", "machine", "--cache-dir",
                       str(ARXIV_CACHE), "validate", str(path), "--offline")
    rec = machine_records(out)[0]
    assert rec["verdict"] in ("pass", "warn")
    assert rec["metadata_scores"] is not None
    assert rec["metadata_scores"]["title_similarity"] == 1.0
    assert rec["metadata_scores"]["author_set_f1"] == 1.0
    assert code in (0, 1)


def test_validate_missing_reference_noted(tmp_path, capsys):
    path = tmp_path / "9999.99999.tex"
    shutil.copy(LOGICAL_FIXTURES[0], path)
    code, out, _ = run(capsys, "--report", "machine", "--cache-dir",
                       str(tmp_path / "empty_cache"), "validate", str(path),
                       "--offline")
    rec = machine_records(out)[0]
    assert rec["metadata_scores"] is None
    assert any("no reference record" in n for n in rec["notes"])
    assert code == 0


def test_batch_on_pair_corpus(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for p in LOGICAL_FIXTURES[:5]:
        shutil.copy(p, corpus / p.name)
    pairs = tmp_path / "pairs"
    emit_pairs(corpus, pairs, PROFILE_SETS[4], seeds=(0,))
    code, out, _ = run(capsys, "--report", "machine", "batch", str(pairs),
                       "--scope", "full", "--aggressive", "--offline")
    assert code == 0
    records = machine_records(out)
    summary = [r for r in records if r.get("command") == "batch-summary"][0]
    assert summary["files"] == 5
    assert summary["classes"]["visual"] == 5
    assert summary["conversion"]["pass"] == 5
    assert summary["visual_prevalence"] == 1.0


def test_batch_deterministic_reports(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for p in LOGICAL_FIXTURES[:3]:
        shutil.copy(p, corpus / p.name)
    pairs = tmp_path / "pairs"
    emit_pairs(corpus, pairs, ("centerline-style",), seeds=(0,))
    _, out1, _ = run(capsys, "--report", "machine", "batch", str(pairs),
                     "--scope", "full", "--aggressive", "--offline")
    _, out2, _ = run(capsys, "--report", "machine", "batch", str(pairs),
                     "--scope", "full", "--aggressive", "--offline")
    assert out1 == out2


def test_batch_parallel_matches_serial(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for p in LOGICAL_FIXTURES[:4]:
        shutil.copy(p, corpus / p.name)
    pairs = tmp_path / "pairs"
    emit_pairs(corpus, pairs, ("center-env",), seeds=(0,))
    _, serial, _ = run(capsys, "--report", "machine", "batch", str(pairs),
                       "--scope", "full", "--aggressive", "--offline")
    _, parallel, _ = run(capsys, "--report", "machine", "batch", str(pairs),
                         "--jobs", "3", "--scope", "full", "--aggressive",
                         "--offline")
    assert serial == parallel


def test_batch_usage_error_on_missing_dir(tmp_path, capsys):
    code, _, err = run(capsys, "batch", str(tmp_path / "nope"))
    assert code == 3
    assert "not a directory" in err


def test_config_file_merging(degraded_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scope": "full", "aggressive": True,
                               "report": "machine"}), encoding="utf-8")
    code, out, _ = run(capsys, "--config", str(cfg), "convert", str(degraded_file))
    assert code == 0
    rec = machine_records(out)[0]
    assert rec["class_after"] == "logical"


def test_config_file_unknown_key_is_usage_error(degraded_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense": 1}), encoding="utf-8")
    code, _, err = run(capsys, "--config", str(cfg), "convert", str(degraded_file))
    assert code == 3
    assert "unknown config keys" in err


def test_human_report_includes_diff(degraded_file, capsys):
    code, out, _ = run(capsys, "convert", str(degraded_file),
                       "--scope", "full", "--aggressive")
    assert code == 0
    assert "---" in out and "+++" in out
    assert "+\\title{" in out


def test_usage_error_exit_code_three(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["convert", "--no-such-flag"])
    assert exc.value.code == 3


def test_cache_dir_accepted_after_subcommand(tmp_path, capsys):
    quantum = next(p for p in LOGICAL_FIXTURES if p.name == "quantum_walks.tex")
    path = tmp_path / "2401.01234.tex"
    shutil.copy(quantum, path)
    code, out, _ = run(capsys, "--report", "machine", "validate", str(path),
                       "--offline", "--cache-dir", str(ARXIV_CACHE))
    rec = machine_records(out)[0]
    assert rec["metadata_scores"]["title_similarity"] == 1.0
    assert code in (0, 1)
