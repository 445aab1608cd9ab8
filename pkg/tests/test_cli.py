"""End-to-end coverage of every subcommand through main(argv)."""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from bayocr.cli import main
from bayocr.config import read_train_config
from bayocr.dataset import Annotation, BBox, read_class_weights, read_class_list, write_labels
from bayocr.evaluate import evaluate_detections
from bayocr.imgproc import load_raster, save_raster
from bayocr.runtime import load_sidecar

from conftest import fixture_path, glyph_page, make_dataset, stub_command


def run_cli(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def json_lines(out: str) -> list[dict]:
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def word_workspace(tmp_path: Path) -> Path:
    """Images + stored sidecars + class list + lexicon for the word fixtures."""
    ws = tmp_path / "ws"
    (ws / "images").mkdir(parents=True)
    shutil.copytree(fixture_path("sidecars"), ws / "sidecars")
    shutil.copy(fixture_path("classes.txt"), ws / "classes.txt")
    shutil.copy(fixture_path("words.txt"), ws / "words.txt")
    for stem in ("malamig", "gwapo", "pilipino"):
        sc = load_sidecar(ws / "sidecars" / f"{stem}.json")
        page = glyph_page(sc.width, sc.height, [d.bbox.as_tuple() for d in sc.detections])
        save_raster(page, ws / "images" / f"{stem}.png")
    return ws


def labels_from_sidecar(sidecar_path: Path, out: Path) -> None:
    sc = load_sidecar(sidecar_path)
    anns = [Annotation(d.class_id, d.bbox) for d in sc.detections]
    write_labels(out, anns)


class TestPreprocess:
    def make_input(self, tmp_path: Path) -> Path:
        src = tmp_path / "in"
        (src / "sub").mkdir(parents=True)
        save_raster(glyph_page(72, 48, [(0.5, 0.5, 0.5, 0.5)]), src / "a.png")
        save_raster(glyph_page(72, 48, [(0.3, 0.5, 0.3, 0.6)], seed=1), src / "sub" / "b.png")
        return src

    def test_mirrors_directory_tree(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        code, out, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output",
            str(tmp_path / "out"), "--target-size", "32",
        )
        assert code == 0
        assert json_lines(out)[0] == {
            "command": "preprocess",
            "processed": 2,
            "output": str(tmp_path / "out"),
        }
        for rel in ("a.png", "sub/b.png"):
            raster = load_raster(tmp_path / "out" / rel)
            assert raster.pixels.shape == (32, 32)

    def test_default_target_size(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        code, _, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output", str(tmp_path / "out")
        )
        assert code == 0
        assert load_raster(tmp_path / "out" / "a.png").pixels.shape == (640, 640)

    def test_flag_beats_config_beats_default(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        cfg = tmp_path / "pipe.ini"
        cfg.write_text("[pipeline]\ntarget_size = 48\n")
        code, _, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output",
            str(tmp_path / "o1"), "--config", str(cfg),
        )
        assert code == 0
        assert load_raster(tmp_path / "o1" / "a.png").pixels.shape == (48, 48)
        code, _, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output",
            str(tmp_path / "o2"), "--config", str(cfg), "--target-size", "32",
        )
        assert code == 0
        assert load_raster(tmp_path / "o2" / "a.png").pixels.shape == (32, 32)

    def test_dump_stages_writes_each_step(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        code, _, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output", str(tmp_path / "out"),
            "--dump-stages", str(tmp_path / "stages"), "--target-size", "32",
        )
        assert code == 0
        got = sorted(p.name for p in (tmp_path / "stages" / "a").iterdir())
        assert got == [
            "00_input.png",
            "01_grayscale.png",
            "02_sharpen.png",
            "03_denoise.png",
            "04_binarize.png",
            "05_normalize.png",
        ]

    def test_custom_stage_order_dump(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        code, _, _ = run_cli(
            capsys, "preprocess", "--input", str(src), "--output", str(tmp_path / "out"),
            "--dump-stages", str(tmp_path / "stages"),
            "--stage-order", "grayscale,binarize,normalize", "--target-size", "32",
        )
        assert code == 0
        got = sorted(p.name for p in (tmp_path / "stages" / "a").iterdir())
        assert got == [
            "00_input.png",
            "01_grayscale.png",
            "02_binarize.png",
            "03_normalize.png",
        ]

    def test_workers_do_not_change_output(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        for workers, name in (("1", "w1"), ("3", "w3")):
            code, _, _ = run_cli(
                capsys, "preprocess", "--input", str(src), "--output",
                str(tmp_path / name), "--workers", workers, "--target-size", "32",
            )
            assert code == 0
        for rel in ("a.png", "sub/b.png"):
            a = (tmp_path / "w1" / rel).read_bytes()
            b = (tmp_path / "w3" / rel).read_bytes()
            assert a == b

    def test_missing_input_dir_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "preprocess", "--input", str(tmp_path / "none"),
            "--output", str(tmp_path / "out"),
        )
        assert code == 1
        assert err.startswith("error:")

    def test_bad_stage_order_fails(self, tmp_path, capsys):
        src = self.make_input(tmp_path)
        code, _, err = run_cli(
            capsys, "preprocess", "--input", str(src), "--output", str(tmp_path / "out"),
            "--stage-order", "grayscale,wobble",
        )
        assert code == 1
        assert "wobble" in err


class TestAugmentCommand:
    def make_root(self, tmp_path: Path) -> Path:
        anns = [Annotation(0, BBox(0.5, 0.5, 0.4, 0.4))]
        return make_dataset(
            tmp_path / "root", "train",
            {"p0": anns, "p1": anns, "p2": anns},
            class_names=["a"],
        )

    def test_writes_variants_and_classes(self, tmp_path, capsys):
        root = self.make_root(tmp_path)
        code, out, _ = run_cli(
            capsys, "augment", "--root", str(root), "--out", str(tmp_path / "aug"),
            "--variants", "2", "--rotation=-15,15", "--noise-sigma", "3",
        )
        assert code == 0
        doc = json_lines(out)[0]
        assert doc["written"] == 9  # 3 originals + 3x2 variants
        images = sorted(p.stem for p in (tmp_path / "aug" / "images" / "train").glob("*.png"))
        labels = sorted(p.stem for p in (tmp_path / "aug" / "labels" / "train").glob("*.txt"))
        assert images == labels
        assert len(images) == 9
        assert (tmp_path / "aug" / "classes.txt").read_text() == (root / "classes.txt").read_text()

    def test_no_originals(self, tmp_path, capsys):
        root = self.make_root(tmp_path)
        code, out, _ = run_cli(
            capsys, "augment", "--root", str(root), "--out", str(tmp_path / "aug"),
            "--variants", "1", "--no-originals",
        )
        assert code == 0
        assert json_lines(out)[0]["written"] == 3
        images = list((tmp_path / "aug" / "images" / "train").glob("*.png"))
        assert sorted(p.stem for p in images) == ["p0_aug0", "p1_aug0", "p2_aug0"]

    def test_bad_range_fails(self, tmp_path, capsys):
        root = self.make_root(tmp_path)
        code, _, err = run_cli(
            capsys, "augment", "--root", str(root), "--out", str(tmp_path / "aug"),
            "--rotation", "15,-15",
        )
        assert code == 1
        assert err.startswith("error:")


class TestSplitCommand:
    def make_flat(self, tmp_path: Path, n: int = 26) -> tuple[Path, Path]:
        images = tmp_path / "flat_images"
        labels = tmp_path / "flat_labels"
        images.mkdir()
        labels.mkdir()
        for i in range(n):
            save_raster(glyph_page(24, 24, [], seed=i), images / f"im{i:03d}.png")
            write_labels(labels / f"im{i:03d}.txt", [Annotation(0, BBox(0.5, 0.5, 0.2, 0.2))])
        return images, labels

    def test_default_fractions(self, tmp_path, capsys):
        images, labels = self.make_flat(tmp_path)
        code, out, _ = run_cli(
            capsys, "split", "--images", str(images), "--labels", str(labels),
            "--out", str(tmp_path / "split"),
        )
        assert code == 0
        assert json_lines(out)[0]["counts"] == {"train": 24, "val": 1, "test": 1}
        for name, want in (("train", 24), ("val", 1), ("test", 1)):
            assert len(list((tmp_path / "split" / "images" / name).glob("*.png"))) == want
            assert len(list((tmp_path / "split" / "labels" / name).glob("*.txt"))) == want

    def test_seed_determinism_and_classes_copy(self, tmp_path, capsys):
        images, labels = self.make_flat(tmp_path, n=10)
        classes = tmp_path / "classes.txt"
        classes.write_text("0 a\n")
        memberships = []
        for name in ("s1", "s2"):
            code, _, _ = run_cli(
                capsys, "split", "--images", str(images), "--labels", str(labels),
                "--out", str(tmp_path / name), "--fractions", "0.5,0.3,0.2",
                "--seed", "7", "--classes", str(classes),
            )
            assert code == 0
            memberships.append(
                sorted(p.stem for p in (tmp_path / name / "images" / "val").glob("*.png"))
            )
        assert memberships[0] == memberships[1]
        assert (tmp_path / "s1" / "classes.txt").exists()

    def test_bad_fractions(self, tmp_path, capsys):
        images, labels = self.make_flat(tmp_path, n=4)
        code, _, err = run_cli(
            capsys, "split", "--images", str(images), "--labels", str(labels),
            "--out", str(tmp_path / "split"), "--fractions", "0.5,0.1",
        )
        assert code == 1
        assert err.startswith("error:")


class TestPredictCommand:
    def test_replay_transliterates_word(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, out, _ = run_cli(
            capsys, "predict", str(ws / "images" / "malamig.png"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(ws / "classes.txt"),
        )
        assert code == 0
        doc = json_lines(out)[0]
        assert doc["image"] == "malamig"
        assert doc["lines"] == ["malamig"]
        assert doc["text"] == "malamig"
        assert doc["matches"] is None
        assert [d["name"] for d in doc["detections"]] == ["ma", "la", "mi", "g"]
        assert all(d["confidence"] >= 0.6 for d in doc["detections"])

    def test_lexicon_resolves_canonical_spellings(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, out, _ = run_cli(
            capsys, "predict", str(ws / "images"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(ws / "classes.txt"),
            "--lexicon", str(ws / "words.txt"),
        )
        assert code == 0
        docs = {d["image"]: d for d in json_lines(out)}
        assert set(docs) == {"malamig", "gwapo", "pilipino"}
        assert docs["malamig"]["text"] == "malamig"
        assert docs["malamig"]["matches"][0]["distance"] == 0
        # Canonical reading "guwapu" is distance 1 from the lexicon's "gwapo".
        assert docs["gwapo"]["lines"] == ["guwapu"]
        assert docs["gwapo"]["text"] == "gwapo"
        assert docs["gwapo"]["matches"][0]["distance"] == 1
        # "pilipinu" reaches "pilipino" through the o/u ambiguity: distance 0.
        assert docs["pilipino"]["lines"] == ["pilipinu"]
        assert docs["pilipino"]["text"] == "pilipino"
        assert docs["pilipino"]["matches"][0]["distance"] == 0

    def test_process_backend_matches_replay(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        img = str(ws / "images" / "malamig.png")
        classes = str(ws / "classes.txt")
        code, out_replay, _ = run_cli(
            capsys, "predict", img, "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", classes,
        )
        assert code == 0
        command = " ".join(stub_command(ws / "sidecars"))
        code, out_process, _ = run_cli(
            capsys, "predict", img, "--backend", f"process:{command}",
            "--classes", classes,
        )
        assert code == 0
        assert json_lines(out_replay) == json_lines(out_process)

    def test_conf_flag_beats_config(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        cfg = tmp_path / "detect.ini"
        cfg.write_text("[detection]\nconf_threshold = 0.99\n")
        img = str(ws / "images" / "malamig.png")
        base = [
            "predict", img, "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(ws / "classes.txt"), "--config", str(cfg),
        ]
        code, out, _ = run_cli(capsys, *base)
        assert code == 0
        assert json_lines(out)[0]["detections"] == []
        code, out, _ = run_cli(capsys, *base, "--conf", "0.5")
        assert code == 0
        assert len(json_lines(out)[0]["detections"]) == 4

    def test_out_and_render(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, _, _ = run_cli(
            capsys, "predict", str(ws / "images" / "malamig.png"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(ws / "classes.txt"),
            "--out", str(tmp_path / "pred"),
            "--render", str(tmp_path / "overlay"),
        )
        assert code == 0
        sc = load_sidecar(tmp_path / "pred" / "malamig.json")
        assert [d.class_id for d in sc.detections] == [27, 23, 28, 18]
        overlay = load_raster(tmp_path / "overlay" / "malamig.png")
        assert overlay.pixels.shape == (160, 320, 3)
        plain = load_raster(ws / "images" / "malamig.png")
        assert not np.array_equal(overlay.pixels, plain.pixels)

    def test_preprocess_flag_runs_pipeline_first(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, out, _ = run_cli(
            capsys, "predict", str(ws / "images" / "malamig.png"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(ws / "classes.txt"),
            "--preprocess", "--target-size", "64",
        )
        assert code == 0
        assert json_lines(out)[0]["text"] == "malamig"

    def test_non_glyph_classes_disable_transliteration(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        classes = tmp_path / "plain.txt"
        classes.write_text("".join(f"{i} c{i}\n" for i in range(59)))
        code, out, err = run_cli(
            capsys, "predict", str(ws / "images" / "malamig.png"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--classes", str(classes),
        )
        assert code == 0
        assert "transliteration disabled" in err
        doc = json_lines(out)[0]
        assert "text" not in doc and "lines" not in doc
        assert [d["name"] for d in doc["detections"]] == ["c27", "c23", "c28", "c18"]

    def test_bad_backend_spec(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, _, err = run_cli(
            capsys, "predict", str(ws / "images" / "malamig.png"),
            "--backend", "magic:nope", "--classes", str(ws / "classes.txt"),
        )
        assert code == 1
        assert "replay:DIR" in err


class TestEvalCommand:
    def eval_workspace(self, tmp_path: Path) -> Path:
        ws = word_workspace(tmp_path)
        gt = ws / "gt"
        gt.mkdir()
        for stem in ("malamig", "gwapo", "pilipino"):
            labels_from_sidecar(ws / "sidecars" / f"{stem}.json", gt / f"{stem}.txt")
        return ws

    def test_perfect_predictions(self, tmp_path, capsys):
        ws = self.eval_workspace(tmp_path)
        code, out, err = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(ws / "gt"),
            "--classes", str(ws / "classes.txt"),
        )
        assert code == 0
        doc = json_lines(out)[0]
        assert doc["precision"] == 1.0
        assert doc["recall"] == 1.0
        assert doc["f1"] == 1.0
        assert doc["map50"] == 1.0
        assert doc["map50_95"] == 1.0
        assert "precision" in err and "mAP@50-95" in err

    def test_matches_library_evaluation(self, tmp_path, capsys):
        ws = self.eval_workspace(tmp_path)
        # Perturb one prediction file so the scores are not all 1.0.
        doc = json.loads((ws / "sidecars" / "gwapo.json").read_text())
        doc["detections"][0]["class_id"] = 0
        doc["detections"][1]["confidence"] = 0.1
        (ws / "sidecars" / "gwapo.json").write_text(json.dumps(doc))
        code, out, _ = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(ws / "gt"),
            "--classes", str(ws / "classes.txt"), "--conf", "0.25", "--iou", "0.5",
        )
        assert code == 0
        got = json_lines(out)[0]
        names = read_class_list(ws / "classes.txt")
        # Rebuild the samples exactly as the command reads them.
        from bayocr.dataset import read_labels

        samples = [
            (list(load_sidecar(ws / "sidecars" / f"{stem}.json").detections),
             read_labels(ws / "gt" / f"{stem}.txt", num_classes=len(names)))
            for stem in ("gwapo", "malamig", "pilipino")
        ]
        want = evaluate_detections(
            samples, num_classes=len(names), conf_threshold=0.25,
            iou_threshold=0.5, class_names=names,
        )
        assert got["precision"] == pytest.approx(want.precision)
        assert got["recall"] == pytest.approx(want.recall)
        assert got["f1"] == pytest.approx(want.f1)
        assert got["map50"] == pytest.approx(want.map50)
        assert got["map50_95"] == pytest.approx(want.map50_95)
        assert got["confusion"] == want.confusion.tolist()

    def test_out_files_and_plot(self, tmp_path, capsys):
        ws = self.eval_workspace(tmp_path)
        out_dir = tmp_path / "report"
        code, _, _ = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(ws / "gt"),
            "--classes", str(ws / "classes.txt"), "--out", str(out_dir), "--plot",
        )
        assert code == 0
        assert json.loads((out_dir / "report.json").read_text())["f1"] == 1.0
        assert "precision" in (out_dir / "report.txt").read_text()
        rows = (out_dir / "confusion.csv").read_text().strip().splitlines()
        assert len(rows) == 60 and len(rows[0].split(",")) == 60
        assert (out_dir / "confusion.png").stat().st_size > 0

    def test_plot_without_out_fails(self, tmp_path, capsys):
        ws = self.eval_workspace(tmp_path)
        code, _, err = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(ws / "gt"),
            "--classes", str(ws / "classes.txt"), "--plot",
        )
        assert code == 1
        assert "--out" in err

    def test_stem_mismatch_warns_and_empty_fails(self, tmp_path, capsys):
        ws = self.eval_workspace(tmp_path)
        (ws / "gt" / "pilipino.txt").unlink()
        code, _, err = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(ws / "gt"),
            "--classes", str(ws / "classes.txt"),
        )
        assert code == 0
        assert "no ground truth" in err
        empty = tmp_path / "empty"
        empty.mkdir()
        code, _, err = run_cli(
            capsys, "eval", "--pred", str(ws / "sidecars"), "--gt", str(empty),
            "--classes", str(ws / "classes.txt"),
        )
        assert code == 1
        assert "no stems shared" in err


class TestBenchCommand:
    def test_replay_bench(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        out_file = tmp_path / "bench.json"
        code, out, _ = run_cli(
            capsys, "bench", "--images", str(ws / "images"),
            "--backend", f"replay:{ws / 'sidecars'}",
            "--warmup", "0", "--repeats", "1", "--out", str(out_file),
        )
        assert code == 0
        doc = json_lines(out)[0]
        assert doc["samples"] == 3
        assert doc["fps"] == pytest.approx(1000 / doc["mean_ms"], rel=1e-9)
        assert set(doc["stages"]) == {"preprocess", "detect", "postprocess"}
        assert json.loads(out_file.read_text()) == doc

    def test_repeats_validation(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, _, err = run_cli(
            capsys, "bench", "--images", str(ws / "images"),
            "--backend", f"replay:{ws / 'sidecars'}", "--repeats", "0",
        )
        assert code == 1
        assert err.startswith("error:")


class TestRenderCommand:
    def test_from_labels(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        gt = ws / "gt"
        gt.mkdir()
        labels_from_sidecar(ws / "sidecars" / "malamig.json", gt / "malamig.txt")
        code, out, _ = run_cli(
            capsys, "render", "--images", str(ws / "images" / "malamig.png"),
            "--labels", str(gt), "--classes", str(ws / "classes.txt"),
            "--out", str(tmp_path / "vis"),
        )
        assert code == 0
        assert json_lines(out)[0]["rendered"] == 1
        assert load_raster(tmp_path / "vis" / "malamig.png").pixels.shape == (160, 320, 3)

    def test_from_predictions_with_conf_filter(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        code, out, _ = run_cli(
            capsys, "render", "--images", str(ws / "images"),
            "--pred", str(ws / "sidecars"), "--classes", str(ws / "classes.txt"),
            "--out", str(tmp_path / "vis"), "--conf", "0.25",
        )
        assert code == 0
        assert json_lines(out)[0]["rendered"] == 3

    def test_pred_and_labels_are_exclusive(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        with pytest.raises(SystemExit) as exc:
            main([
                "render", "--images", str(ws / "images"), "--pred", "x",
                "--labels", "y", "--classes", str(ws / "classes.txt"),
                "--out", str(tmp_path / "vis"),
            ])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_no_matching_source_fails(self, tmp_path, capsys):
        ws = word_workspace(tmp_path)
        empty = tmp_path / "none"
        empty.mkdir()
        code, _, err = run_cli(
            capsys, "render", "--images", str(ws / "images"),
            "--labels", str(empty), "--classes", str(ws / "classes.txt"),
            "--out", str(tmp_path / "vis"),
        )
        assert code == 1
        assert "nothing to render" in err


class TestExportTrainCommand:
    def make_root(self, tmp_path: Path) -> tuple[Path, list[str]]:
        names = read_class_list(fixture_path("classes.txt"))
        anns = {
            "p0": [Annotation(27, BBox(0.3, 0.5, 0.2, 0.3)), Annotation(23, BBox(0.7, 0.5, 0.2, 0.3))],
            "p1": [Annotation(27, BBox(0.5, 0.5, 0.4, 0.4))],
        }
        root = make_dataset(tmp_path / "root", "train", anns, class_names=names)
        return root, names

    def test_writes_config_and_weights(self, tmp_path, capsys):
        root, names = self.make_root(tmp_path)
        out = tmp_path / "handoff"
        code, outp, _ = run_cli(
            capsys, "export-train", "--root", str(root), "--out", str(out),
        )
        assert code == 0
        doc = json_lines(outp)[0]
        assert doc["num_classes"] == 59
        assert doc["items"] == 2
        cfg = read_train_config(out / "train.ini")
        assert cfg.dataset == str(root.resolve())
        assert cfg.class_weights == str((out / "class_weights.json").resolve())
        assert (cfg.image_size, cfg.batch, cfg.optimizer) == (640, 32, "sgd")
        assert (cfg.lr0, cfg.momentum) == (0.01, 0.937)
        assert (cfg.max_epochs, cfg.patience) == (600, 100)
        assert (cfg.loss, cfg.model_size, cfg.seed) == ("bce_logits", "n", 0)
        weights = read_class_weights(out / "class_weights.json", names)
        # 3 boxes over classes ma (x2) and la (x1): total/(present*count).
        assert weights[27] == pytest.approx(3 / (2 * 2))
        assert weights[23] == pytest.approx(3 / (2 * 1))
        assert sum(1 for w in weights if w > 0) == 2

    def test_flag_overrides_round_trip(self, tmp_path, capsys):
        root, _ = self.make_root(tmp_path)
        out = tmp_path / "handoff"
        code, _, _ = run_cli(
            capsys, "export-train", "--root", str(root), "--out", str(out),
            "--model-size", "m", "--image-size", "320", "--batch", "8",
            "--lr0", "0.02", "--momentum", "0.9", "--max-epochs", "10",
            "--patience", "5", "--seed", "3",
        )
        assert code == 0
        cfg = read_train_config(out / "train.ini")
        assert cfg.model_size == "m"
        assert (cfg.image_size, cfg.batch) == (320, 8)
        assert (cfg.lr0, cfg.momentum) == (0.02, 0.9)
        assert (cfg.max_epochs, cfg.patience, cfg.seed) == (10, 5, 3)

    def test_invalid_patience_fails(self, tmp_path, capsys):
        root, _ = self.make_root(tmp_path)
        code, _, err = run_cli(
            capsys, "export-train", "--root", str(root), "--out", str(tmp_path / "o"),
            "--max-epochs", "10", "--patience", "50",
        )
        assert code == 1
        assert "patience" in err


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
        capsys.readouterr()
