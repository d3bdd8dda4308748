"""Config file round trips, PNG codec goldens, and the CLI surface.

The golden PNG blob was assembled chunk by chunk (IHDR/IDAT/IEND with
zlib and explicit CRCs) and its pixel values are asserted here against
the loader, so decoding is pinned to the format rather than to the
writer half of this package.
"""

import dataclasses
import os

import numpy as np
import pytest

from physretinex.checkpoint import save_checkpoint
from physretinex.cli import main
from physretinex.config import (
    RunConfig,
    load_run_config,
    parse_run_config,
    save_run_config,
    serialize_run_config,
)
from physretinex.errors import ConfigurationError, DimensionError, UnsupportedFormatError
from physretinex.imageio import load_gray, load_image, save_gray, save_image
from physretinex.model import RestorationModel

# ------------------------------------------------------------------ config


def test_config_defaults_round_trip():
    text = serialize_run_config(RunConfig())
    assert parse_run_config(text) == RunConfig()
    assert serialize_run_config(parse_run_config(text)) == text


def test_config_non_default_round_trip():
    config = RunConfig(
        task="deshadow",
        base_width=8,
        heads=2,
        theta=0.35,
        lr_final=1e-7,
        level_weights=(0.1, 0.2, 0.7),
        hflip=False,
        struct_scales=(1.0, 2.0),
        data_dir="/tmp/data",
    )
    text = serialize_run_config(config)
    parsed = parse_run_config(text)
    assert parsed == config
    assert serialize_run_config(parsed) == text


def test_config_comments_and_whitespace():
    parsed = parse_run_config(
        "# a comment\n\n  task = dehaze  # trailing comment\nbase_width=8\nheads = 2\n"
    )
    assert parsed.task == "dehaze"
    assert parsed.base_width == 8
    assert parsed.heads == 2


def test_config_value_containing_equals():
    parsed = parse_run_config("data_dir = /d/run=3\n")
    assert parsed.data_dir == "/d/run=3"


def test_config_unknown_key_names_line():
    with pytest.raises(ConfigurationError, match="line 2: unknown key 'widht'"):
        parse_run_config("task = dehaze\nwidht = 3\n")


def test_config_duplicate_key_names_line():
    with pytest.raises(ConfigurationError, match="line 3: duplicate key 'heads'"):
        parse_run_config("heads = 2\nbase_width = 8\nheads = 4\n")


def test_config_bad_value_names_line():
    with pytest.raises(ConfigurationError, match="line 1: bad value 'soon'"):
        parse_run_config("total_steps = soon\n")
    with pytest.raises(ConfigurationError, match="bad value 'yes'"):
        parse_run_config("hflip = yes\n")


def test_config_missing_equals_names_line():
    with pytest.raises(ConfigurationError, match="line 1: expected 'key = value'"):
        parse_run_config("just some words\n")


def test_config_parse_validates_semantics():
    with pytest.raises(ConfigurationError):
        parse_run_config("base_width = 9\nheads = 4\n")  # heads must divide width
    with pytest.raises(ConfigurationError):
        parse_run_config("patch = 6\n")
    with pytest.raises(ConfigurationError):
        parse_run_config("tile = 8\noverlap = 4\n")


def test_config_file_round_trip(tmp_path):
    path = str(tmp_path / "run.cfg")
    config = RunConfig(task="derain", total_steps=7)
    save_run_config(config, path)
    assert load_run_config(path) == config


def test_config_covers_every_field():
    text = serialize_run_config(RunConfig())
    keys = {line.split(" = ")[0] for line in text.strip().splitlines()}
    assert keys == {f.name for f in dataclasses.fields(RunConfig)}


# ------------------------------------------------------------------ images

# 2x2 RGB PNG: (255,0,0) (0,255,0) / (0,0,255) (10,20,30)
GOLDEN_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d4948445200000002000000020802000000fdd49a73"
    "000000134944415478da63f8cfc0c000c20cffb944e4001a58033ae2926ed90000"
    "000049454e44ae426082"
)


def test_load_image_golden_bytes(tmp_path):
    path = tmp_path / "golden.png"
    path.write_bytes(GOLDEN_PNG)
    image = load_image(str(path))
    expected = (
        np.array(
            [[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [10, 20, 30]]], dtype=np.float64
        )
        / 255.0
    )
    np.testing.assert_array_equal(image, expected)


def test_save_load_quantization_bound(tmp_path):
    rng = np.random.default_rng(0)
    image = rng.uniform(size=(9, 7, 3))
    image[0, 0] = [0.0, 1.0, 0.5]
    path = str(tmp_path / "q.png")
    save_image(path, image)
    back = load_image(path)
    assert np.abs(back - image).max() <= 0.5 / 255.0 + 1e-12
    # exact endpoints survive the round trip unchanged
    assert back[0, 0, 0] == 0.0 and back[0, 0, 1] == 1.0


def test_save_image_clips_out_of_range(tmp_path):
    path = str(tmp_path / "c.png")
    save_image(path, np.array([[[1.7, -0.3, 0.5]]]))
    back = load_image(path)[0, 0]
    assert back[0] == 1.0 and back[1] == 0.0
    assert abs(back[2] - 0.5) <= 0.5 / 255.0 + 1e-12


def test_gray_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    gray = rng.uniform(size=(6, 8))
    path = str(tmp_path / "g.png")
    save_gray(path, gray)
    back = load_gray(path)
    assert back.shape == (6, 8)
    assert np.abs(back - gray).max() <= 0.5 / 255.0 + 1e-12


def test_image_shape_validation(tmp_path):
    with pytest.raises(DimensionError):
        save_image(str(tmp_path / "x.png"), np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        save_gray(str(tmp_path / "y.png"), np.zeros((4, 4, 3)))


def test_load_image_rejects_non_png(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"not a png at all")
    with pytest.raises(UnsupportedFormatError):
        load_image(str(path))


def test_load_image_rejects_gray_png(tmp_path):
    path = str(tmp_path / "g.png")
    save_gray(path, np.full((4, 4), 0.5))
    with pytest.raises(UnsupportedFormatError, match="RGB"):
        load_image(path)
    with pytest.raises(UnsupportedFormatError):
        load_gray(str_rgb(path, tmp_path))


def str_rgb(path, tmp_path):
    rgb = str(tmp_path / "rgb.png")
    save_image(rgb, np.zeros((4, 4, 3)))
    return rgb


# --------------------------------------------------------------------- cli


def _save_png(path, array):
    save_image(str(path), array)
    return str(path)


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_cli_prior_dehaze_constant(tmp_path, capsys):
    image = np.full((8, 8, 3), 0.25)
    inp = _save_png(tmp_path / "in.png", image)
    out = str(tmp_path / "prior.png")
    assert main(["prior", "--task", "dehaze", "--input", inp, "--output", out]) == 0
    printed = capsys.readouterr().out.strip()
    # dark channel of a constant gray image is that constant everywhere
    v = 64 / 255.0
    assert printed == f"min {v:.6f} max {v:.6f} mean {v:.6f}"
    prior = load_gray(out)
    assert np.abs(prior - v).max() <= 0.5 / 255.0 + 1e-12


def test_cli_prior_deshadow_constant_sentinel(tmp_path, capsys):
    inp = _save_png(tmp_path / "in.png", np.full((8, 8, 3), 0.5))
    out = str(tmp_path / "prior.png")
    assert main(["prior", "--task", "deshadow", "--input", inp, "--output", out]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("min 0.5")
    prior = load_gray(out)
    assert prior.max() - prior.min() == 0.0
    assert abs(prior[0, 0] - 0.5) <= 1.0 / 255.0


def test_cli_prior_derain_needs_blur_input(tmp_path, capsys):
    inp = _save_png(tmp_path / "in.png", np.zeros((8, 8, 3)))
    with pytest.raises(SystemExit):
        main(["prior", "--task", "derain", "--input", inp, "--output", inp])
    assert "--blur-input" in capsys.readouterr().err


def test_cli_prior_derain_with_blur(tmp_path, capsys):
    rng = np.random.default_rng(0)
    drop = _save_png(tmp_path / "d.png", rng.uniform(0.4, 0.6, size=(8, 8, 3)))
    blur = _save_png(tmp_path / "b.png", np.full((8, 8, 3), 0.5))
    out = str(tmp_path / "m.png")
    assert main(["prior", "--task", "derain", "--input", drop,
                 "--blur-input", blur, "--output", out]) == 0
    assert os.path.exists(out)


def test_cli_decompose(tmp_path):
    rng = np.random.default_rng(2)
    inp = _save_png(tmp_path / "in.png", rng.uniform(0.1, 0.9, size=(8, 8, 3)))
    cfg = tmp_path / "run.cfg"
    cfg.write_text("base_width = 8\nheads = 2\nsamb_blocks_per_level = 1\n"
                   "fia_width = 4\nprior_width = 4\n")
    r_path = str(tmp_path / "r.png")
    l_path = str(tmp_path / "l.png")
    assert main(["decompose", "--input", inp, "--reflectance", r_path,
                 "--illumination", l_path, "--config", str(cfg),
                 "--task", "lowlight"]) == 0
    r = load_image(r_path)
    l = load_image(l_path)
    assert r.shape == l.shape == (8, 8, 3)
    assert 0.0 <= l.min() and l.max() <= 1.0


def _tiny_cfg_text(task="dehaze", extra=""):
    return (
        f"task = {task}\n"
        "base_width = 8\n"
        "heads = 2\n"
        "samb_blocks_per_level = 1\n"
        "fia_width = 4\n"
        "prior_width = 4\n"
        "total_steps = 2\n"
        "batch_size = 1\n"
        "patch = 16\n"
        "ssim_window = 3\n"
        "lr_init = 0.001\n"
        "lr_final = 1e-05\n" + extra
    )


def _write_dataset(root, n=2, size=16, seed=0):
    rng = np.random.default_rng(seed)
    os.makedirs(root / "degraded")
    os.makedirs(root / "clean")
    for i in range(n):
        clean = rng.uniform(0.2, 0.9, size=(size, size, 3))
        save_image(str(root / "clean" / f"{i}.png"), clean)
        save_image(str(root / "degraded" / f"{i}.png"), np.clip(clean * 0.6 + 0.2, 0, 1))


def test_cli_train_restore_eval_pipeline(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(_tiny_cfg_text())
    data = tmp_path / "data"
    _write_dataset(data)
    ck = str(tmp_path / "model.bin")

    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", ck]) == 0
    out = capsys.readouterr().out
    assert "trained 2 steps" in out
    assert f"saved checkpoint {ck}" in out
    assert os.path.exists(ck)

    # odd extent exercises the pad-to-multiple-of-4 path and the crop back
    rng = np.random.default_rng(5)
    inp = _save_png(tmp_path / "odd.png", rng.uniform(size=(17, 18, 3)))
    restored = str(tmp_path / "restored.png")
    assert main(["restore", "--checkpoint", ck, "--task", "dehaze",
                 "--config", str(cfg), "--input", inp, "--output", restored]) == 0
    assert load_image(restored).shape == (17, 18, 3)

    pred = tmp_path / "pred"
    gt = tmp_path / "gt"
    os.makedirs(pred)
    os.makedirs(gt)
    img = load_image(restored)
    save_image(str(pred / "odd.png"), img)
    save_image(str(gt / "odd.png"), img)
    report = str(tmp_path / "report.txt")
    capsys.readouterr()
    assert main(["eval", "--pred-dir", str(pred), "--gt-dir", str(gt),
                 "--report", report]) == 0
    text = capsys.readouterr().out
    assert text == "odd.png inf 1.000000\nMEAN inf 1.000000\n"
    with open(report, encoding="utf-8") as fh:
        assert fh.read() == text


def _identity_checkpoint(tmp_path, task="dehaze"):
    """A freshly initialized model passes its input through unchanged."""
    config = RunConfig(
        task=task, base_width=8, heads=2, samb_blocks_per_level=1,
        fia_width=4, prior_width=4,
    ).model_config()
    model = RestorationModel(config, seed=0)
    path = str(tmp_path / "identity.bin")
    save_checkpoint({f"model/{n}": p.data for n, p in model.store.params.items()}, path)
    return path


def test_cli_restore_identity_checkpoint_exact(tmp_path):
    ck = _identity_checkpoint(tmp_path)
    rng = np.random.default_rng(7)
    # u8 values >= 1 avoid the illumination floor, so restore is exact
    pixels = rng.integers(1, 256, size=(16, 16, 3)) / 255.0
    inp = _save_png(tmp_path / "in.png", pixels)
    out = str(tmp_path / "out.png")
    cfg = tmp_path / "run.cfg"
    cfg.write_text(_tiny_cfg_text())
    assert main(["restore", "--checkpoint", ck, "--task", "dehaze", "--config", str(cfg),
                 "--input", inp, "--output", out]) == 0
    np.testing.assert_array_equal(load_image(out), pixels)


def test_cli_restore_tiled_matches_untiled(tmp_path):
    ck = _identity_checkpoint(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(_tiny_cfg_text())
    rng = np.random.default_rng(8)
    inp = _save_png(tmp_path / "in.png", rng.integers(1, 256, size=(20, 20, 3)) / 255.0)
    whole = str(tmp_path / "whole.png")
    tiled = str(tmp_path / "tiled.png")
    base = ["restore", "--checkpoint", ck, "--task", "dehaze", "--config", str(cfg),
            "--input", inp, "--output"]
    assert main(base + [whole]) == 0
    assert main(base[:-1] + ["--tile", "8", "--overlap", "2", "--output", tiled]) == 0
    np.testing.assert_array_equal(load_image(tiled), load_image(whole))


def test_cli_eval_unpaired_aborts(tmp_path, capsys):
    pred = tmp_path / "pred"
    gt = tmp_path / "gt"
    os.makedirs(pred)
    os.makedirs(gt)
    save_image(str(pred / "only.png"), np.zeros((4, 4, 3)))
    assert main(["eval", "--pred-dir", str(pred), "--gt-dir", str(gt),
                 "--report", str(tmp_path / "r.txt")]) == 1
    err = capsys.readouterr().err
    assert "error:" in err and "only.png" in err


def test_cli_train_missing_data_flag(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(_tiny_cfg_text())
    with pytest.raises(SystemExit):
        main(["train", "--config", str(cfg), "--out", str(tmp_path / "m.bin")])
    assert "--data" in capsys.readouterr().err


def test_cli_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("task = dehaze\nnonsense = 1\n")
    assert main(["train", "--config", str(cfg), "--data", "x", "--out", "y"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_corrupt_checkpoint_reports_error(tmp_path, capsys):
    ck = tmp_path / "bad.bin"
    ck.write_bytes(b"RDV2 garbage that is long enough to pass the length check")
    inp = _save_png(tmp_path / "in.png", np.zeros((8, 8, 3)))
    assert main(["restore", "--checkpoint", str(ck), "--task", "dehaze",
                 "--input", inp, "--output", str(tmp_path / "o.png")]) == 1
    assert "error:" in capsys.readouterr().err
