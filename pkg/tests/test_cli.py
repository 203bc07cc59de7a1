"""Command-line workflows: teach, eval, bench, serve."""

import json
import shutil
import subprocess

import numpy as np
import pytest
from PIL import Image

from salient_teach import cli, create_session, load_backbone, save_session

from conftest import write_corpus

TINY = "test:0:16:5:5"
WIDE = "test:0:256:7:7"


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def json_lines(out: str) -> list:
    return [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture(scope="module")
def taught(tmp_path_factory, corpus_dir):
    """A session file produced by the teach subcommand (tiny backbone)."""
    out = tmp_path_factory.mktemp("taught") / "session.json"
    code = cli.main(
        ["teach", "--backbone", TINY, str(corpus_dir), "--out", str(out)]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def taught_wide(tmp_path_factory, corpus_dir):
    """Same corpus taught with the wider backbone (confident predictions)."""
    out = tmp_path_factory.mktemp("taught_wide") / "session.json"
    code = cli.main(
        ["teach", "--backbone", WIDE, str(corpus_dir), "--out", str(out),
         "--epochs", "40"]
    )
    assert code == 0
    return out


# -- teach ------------------------------------------------------------------------

def test_teach_emits_progress_then_summary(capsys, corpus_dir, tmp_path):
    out = tmp_path / "session.json"
    code, stdout, _ = run_cli(
        capsys, "teach", "--backbone", TINY, corpus_dir, "--out", out
    )
    assert code == 0
    lines = json_lines(stdout)
    progress, summary = lines[:-1], lines[-1]
    assert [p["type"] for p in progress] == ["train_progress"] * 10
    assert [p["epoch"] for p in progress] == list(range(1, 11))
    assert progress[-1]["loss"] < progress[0]["loss"]
    assert summary["type"] == "trained"
    assert summary["labels"] == ["blue", "green", "red"]
    assert summary["counts"] == [10, 10, 10]
    assert summary["session"] == str(out)
    assert len(summary["report"]["epoch_losses"]) == 10


def test_teach_writes_a_loadable_session(taught):
    from salient_teach import SessionState, load_session

    session = load_session(str(taught), load_backbone(TINY))
    assert session.counts() == [10, 10, 10]
    assert session.state is SessionState.EVALUATING


def test_teach_requires_two_label_directories(capsys, tmp_path):
    (tmp_path / "only").mkdir()
    Image.new("RGB", (8, 8), (1, 2, 3)).save(tmp_path / "only" / "a.png")
    code, _, stderr = run_cli(
        capsys, "teach", "--backbone", TINY, tmp_path,
        "--out", tmp_path / "s.json",
    )
    assert code == 1
    assert "label directories" in stderr


def test_teach_rejects_missing_data_dir(capsys, tmp_path):
    code, _, stderr = run_cli(
        capsys, "teach", "--backbone", TINY, tmp_path / "nowhere",
        "--out", tmp_path / "s.json",
    )
    assert code == 1
    assert "not a directory" in stderr


def test_teach_manifest_overrides_label_order(capsys, corpus_dir, tmp_path):
    manifest = tmp_path / "labels.txt"
    manifest.write_text("red\nblue\ngreen\n")
    code, stdout, _ = run_cli(
        capsys, "teach", "--backbone", TINY, corpus_dir,
        "--out", tmp_path / "s.json", "--labels", manifest,
    )
    assert code == 0
    assert json_lines(stdout)[-1]["labels"] == ["red", "blue", "green"]


def test_teach_manifest_naming_missing_directory_fails(capsys, corpus_dir,
                                                       tmp_path):
    manifest = tmp_path / "labels.txt"
    manifest.write_text("red\npurple\n")
    code, _, stderr = run_cli(
        capsys, "teach", "--backbone", TINY, corpus_dir,
        "--out", tmp_path / "s.json", "--labels", manifest,
    )
    assert code == 1
    assert "purple" in stderr


def test_teach_skips_unreadable_files_with_a_warning(capsys, tmp_path):
    data = tmp_path / "data"
    write_corpus(data, per_label=2)
    junk = data / "blue" / "notes.txt"
    junk.write_text("not an image")
    code, stdout, stderr = run_cli(
        capsys, "teach", "--backbone", TINY, data, "--out", tmp_path / "s.json"
    )
    assert code == 0
    assert "skipping" in stderr and "notes.txt" in stderr
    assert json_lines(stdout)[-1]["counts"] == [2, 2, 2]


def test_teach_rejects_bad_backbone_descriptor(capsys, corpus_dir, tmp_path):
    code, _, stderr = run_cli(
        capsys, "teach", "--backbone", "test:not-a-number", corpus_dir,
        "--out", tmp_path / "s.json",
    )
    assert code == 1
    assert stderr.startswith("error:")


# -- eval -------------------------------------------------------------------------

def test_eval_scores_a_confident_match(capsys, taught_wide, corpus_dir):
    image = corpus_dir / "blue" / "blue_00.png"
    code, stdout, _ = run_cli(
        capsys, "eval", "--backbone", WIDE, image, "--session", taught_wide
    )
    assert code == 0
    doc = json_lines(stdout)[0]
    by_name = {s["name"]: s["p"] for s in doc["scores"]}
    assert by_name["blue"] > 0.9
    assert doc["saliency_class"] == 0  # blue is label 0, and the argmax
    assert set(doc["latency"]) == {"inference_ms", "render_ms", "total_ms"}


def test_eval_class_flag_selects_saliency_by_name(capsys, taught, corpus_dir):
    image = corpus_dir / "red" / "red_03.png"
    code, stdout, _ = run_cli(
        capsys, "eval", "--backbone", TINY, image, "--session", taught,
        "--class", "green",
    )
    assert code == 0
    assert json_lines(stdout)[0]["saliency_class"] == 1


def test_eval_unknown_class_name_lists_labels(capsys, taught, corpus_dir):
    code, _, stderr = run_cli(
        capsys, "eval", "--backbone", TINY, corpus_dir / "red" / "red_00.png",
        "--session", taught, "--class", "mauve",
    )
    assert code == 1
    assert "blue, green, red" in stderr


def test_eval_writes_an_overlay_png(capsys, taught, corpus_dir, tmp_path):
    overlay = tmp_path / "overlay.png"
    code, _, _ = run_cli(
        capsys, "eval", "--backbone", TINY, corpus_dir / "green" / "green_01.png",
        "--session", taught, "--overlay", overlay,
    )
    assert code == 0
    with Image.open(overlay) as img:
        assert img.size == (64, 48)
        assert img.mode == "RGB"


def test_eval_overlay_of_flat_attention_leaves_image_unchanged(
    capsys, taught, tmp_path
):
    # a constant image yields a constant attention grid, which normalizes to
    # fully transparent: the composited output is the input, byte for byte
    source = tmp_path / "gray.png"
    Image.new("RGB", (64, 48), (120, 120, 120)).save(source)
    overlay = tmp_path / "overlay.png"
    code, _, _ = run_cli(
        capsys, "eval", "--backbone", TINY, source, "--session", taught,
        "--overlay", overlay,
    )
    assert code == 0
    with Image.open(source) as a, Image.open(overlay) as b:
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


def test_eval_with_mismatched_backbone_fails(capsys, taught, corpus_dir):
    code, _, stderr = run_cli(
        capsys, "eval", "--backbone", WIDE, corpus_dir / "red" / "red_00.png",
        "--session", taught,
    )
    assert code == 1
    assert "error:" in stderr


def test_eval_missing_image_fails(capsys, taught, tmp_path):
    code, _, stderr = run_cli(
        capsys, "eval", "--backbone", TINY, tmp_path / "nope.png",
        "--session", taught,
    )
    assert code == 1


# -- bench ------------------------------------------------------------------------

def test_bench_reports_stage_statistics(capsys, taught):
    code, stdout, _ = run_cli(
        capsys, "bench", "--backbone", TINY, "--session", taught, "--n", 5
    )
    assert code == 0
    doc = json_lines(stdout)[0]
    assert doc["n"] == 5
    assert len(doc["per_frame"]) == 5
    for stage in ("inference_ms", "render_ms", "total_ms"):
        assert set(doc[stage]) == {"mean", "median", "p95"}
    assert doc["training_ms"] > 0.0
    for sample in doc["per_frame"]:
        assert sample["inference_ms"] + sample["render_ms"] <= (
            sample["total_ms"] + 1.0
        )


def test_bench_cycles_a_frames_directory(capsys, taught, corpus_dir):
    code, stdout, _ = run_cli(
        capsys, "bench", "--backbone", TINY, "--session", taught,
        "--n", 7, "--frames", corpus_dir / "blue",
    )
    assert code == 0
    assert json_lines(stdout)[0]["n"] == 7


def test_bench_empty_frames_directory_fails(capsys, taught, tmp_path):
    empty = tmp_path / "frames"
    empty.mkdir()
    code, _, stderr = run_cli(
        capsys, "bench", "--backbone", TINY, "--session", taught,
        "--n", 3, "--frames", empty,
    )
    assert code == 1
    assert "no readable frames" in stderr


def test_bench_untrained_session_fails(capsys, tmp_path):
    backbone = load_backbone(TINY)
    session = create_session(backbone)
    session.add_label("a")
    path = tmp_path / "untrained.json"
    save_session(session, str(path))
    code, _, stderr = run_cli(
        capsys, "bench", "--backbone", TINY, "--session", path, "--n", 3
    )
    assert code == 1


# -- serve ------------------------------------------------------------------------

def test_serve_rejects_malformed_listen_address(capsys):
    code, _, stderr = run_cli(
        capsys, "serve", "--backbone", TINY, "--listen", "no-port-here"
    )
    assert code == 1
    assert "--listen" in stderr


# -- installed entry point ----------------------------------------------------------

def test_console_script_runs_end_to_end(tmp_path):
    exe = shutil.which("salient-teach")
    assert exe, "console script not installed"
    data = tmp_path / "data"
    write_corpus(data, per_label=2)
    out = tmp_path / "session.json"
    proc = subprocess.run(
        [exe, "teach", "--backbone", TINY, str(data), "--out", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout.splitlines()[-1])
    assert summary["type"] == "trained"
    assert out.exists()
