"""CLI wrapper contracts: round trips, exit codes, env fallback."""

import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import floor_wall_depth, make_sky_pano
from dskit import read_pfm, write_hdr, write_pfm, load_volume, read_manifest
from dskit.cli import main


@pytest.fixture(scope="module")
def pano_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "p.hdr"
    write_hdr(path, make_sky_pano(seed=12).radiance)
    return path


@pytest.fixture(scope="module")
def depth_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_depth") / "d.pfm"
    write_pfm(path, floor_wall_depth(48, 55.0).astype(np.float32))
    return path


def test_sun_prints_unit_direction_json(pano_file, capsys):
    assert main(["sun", str(pano_file)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(np.linalg.norm(out["direction"]) - 1.0) < 1e-6
    assert out["low_confidence"] is False


def test_crop_pfm_roundtrip(pano_file, tmp_path):
    out = tmp_path / "c.pfm"
    rc = main(["crop", "--pano", str(pano_file), "--vfov", "60", "--azimuth", "45",
               "--resolution", "32", "--out", str(out)])
    assert rc == 0
    img = read_pfm(out)
    assert img.shape == (32, 32, 3)
    assert np.all(np.isfinite(img))


def test_crop_png_ldr(pano_file, tmp_path):
    out = tmp_path / "c.png"
    rc = main(["crop", "--pano", str(pano_file), "--vfov", "60", "--normalize",
               "--resolution", "32", "--out", str(out)])
    assert rc == 0 and out.exists()


def test_normals_roundtrip(depth_file, tmp_path):
    out = tmp_path / "n.pfm"
    rc = main(["normals", "--depth", str(depth_file), "--vfov", "55", "--out", str(out),
               "--png", str(tmp_path / "n.png")])
    assert rc == 0
    n = read_pfm(out)
    assert np.abs(np.linalg.norm(n, axis=-1) - 1.0).max() < 1e-5


def test_shadow_then_shade(depth_file, tmp_path):
    shadow_out = tmp_path / "t.pfm"
    rc = main(["shadow", "--depth", str(depth_file), "--vfov", "55",
               "--light", "0.2,-0.75,-0.35", "--planes", "24", "--samples", "2",
               "--out", str(shadow_out)])
    assert rc == 0
    t = read_pfm(shadow_out)
    assert t.min() >= 0.0 and t.max() <= 1.0

    normals_out = tmp_path / "n.pfm"
    main(["normals", "--depth", str(depth_file), "--vfov", "55", "--out", str(normals_out)])
    shade_out = tmp_path / "s.pfm"
    rc = main(["shade", "--normals", str(normals_out), "--light", "0.2,-0.75,-0.35",
               "--shadow", str(shadow_out), "--out", str(shade_out)])
    assert rc == 0
    s = read_pfm(shade_out)
    assert s.min() >= 0.0 and s.max() <= 1.0
    # s = c * T exactly
    from dskit import DirectionalLight, ndotl
    c = ndotl(read_pfm(normals_out), DirectionalLight([0.2, -0.75, -0.35]))
    np.testing.assert_array_equal(s, (c * t).astype(np.float32))


def test_shade_requires_inputs(depth_file, tmp_path):
    rc = main(["shade", "--shadow", str(depth_file), "--out", str(tmp_path / "x.pfm")])
    assert rc == 1


def test_volume_dump_roundtrip(depth_file, tmp_path):
    out = tmp_path / "v.dskv1"
    rc = main(["volume-dump", "--depth", str(depth_file), "--vfov", "55",
               "--planes", "16", "--out", str(out)])
    assert rc == 0
    vol = load_volume(out)
    assert vol.n_planes == 16
    assert vol.grid_shape == (48, 48)


def test_dataset_and_eval(dataset_fixture, tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg = dataset_fixture["cfg"]
    cfg_path.write_text(json.dumps({
        "crops_per_pano": cfg.crops_per_pano, "resolution": cfg.resolution,
        "global_seed": cfg.global_seed,
        "render": {"n_planes": 24, "samples": 2},
    }))
    out = tmp_path / "ds"
    rc = main(["--config", str(cfg_path), "--threads", "1",
               "dataset", "--panos", str(dataset_fixture["panos"]),
               "--depths", str(dataset_fixture["depths"]),
               "--out", str(out), "--limit", "4"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["written"] == 4
    records = read_manifest(out / "manifest.jsonl")
    assert len(records) == 4

    # eval two shading maps from the run against each other
    pairs = tmp_path / "pairs.jsonl"
    lines = [json.dumps({"shading_a": f"ds/{records[0]['shading_pfm']}",
                         "shading_b": f"ds/{records[1]['shading_pfm']}",
                         "normals": f"ds/{records[0]['normal_pfm']}"})]
    pairs.write_text("\n".join(lines) + "\n")
    report_path = tmp_path / "report.json"
    rc = main(["eval", "--pairs", str(pairs), "--out", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert len(report["pairs"]) == 1
    assert report["pairs"][0]["psnr_db"] > 0


def test_seed_flag_changes_dataset(dataset_fixture, tmp_path, capsys):
    cfg = dataset_fixture["cfg"]
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "crops_per_pano": cfg.crops_per_pano, "resolution": cfg.resolution,
        "render": {"n_planes": 24, "samples": 2},
    }))
    args = ["--config", str(cfg_path), "--threads", "1"]
    tail = ["dataset", "--panos", str(dataset_fixture["panos"]),
            "--depths", str(dataset_fixture["depths"]), "--limit", "1"]
    assert main([*args, "--seed", "1", *tail, "--out", str(tmp_path / "s1")]) == 0
    assert main([*args, "--seed", "1", *tail, "--out", str(tmp_path / "s1b")]) == 0
    assert main([*args, "--seed", "2", *tail, "--out", str(tmp_path / "s2")]) == 0
    capsys.readouterr()
    m1 = (tmp_path / "s1" / "manifest.jsonl").read_text()
    m1b = (tmp_path / "s1b" / "manifest.jsonl").read_text()
    m2 = (tmp_path / "s2" / "manifest.jsonl").read_text()
    assert m1 == m1b
    assert m1 != m2


def test_env_threads_fallback(dataset_fixture, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DSKIT_THREADS", "1")
    cfg = dataset_fixture["cfg"]
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "crops_per_pano": cfg.crops_per_pano, "resolution": cfg.resolution,
        "render": {"n_planes": 24, "samples": 2},
    }))
    rc = main(["--config", str(cfg_path),
               "dataset", "--panos", str(dataset_fixture["panos"]),
               "--depths", str(dataset_fixture["depths"]),
               "--out", str(tmp_path / "env"), "--limit", "1"])
    assert rc == 0
    capsys.readouterr()


def test_bad_flags_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["shadow", "--nonsense"])
    assert exc.value.code == 2


def test_missing_file_exit_1(tmp_path, capsys):
    rc = main(["sun", str(tmp_path / "missing.hdr")])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ")


def test_console_script_installed(pano_file):
    proc = subprocess.run([sys.executable, "-m", "dskit.cli", "sun", str(pano_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    json.loads(proc.stdout)
