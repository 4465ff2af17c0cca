import numpy as np
import pytest

from awmi import cli
from awmi.oracle import VerificationReport
from awmi.raster import Raster, SyntheticSpec, generate_synthetic, load_image, save_pgm


@pytest.fixture
def image_path(tmp_path):
    r = generate_synthetic(SyntheticSpec("bumps", 64, 64, seed=3))
    path = tmp_path / "img.pgm"
    save_pgm(r, path)
    return path


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


class TestExitCodes:
    def test_no_arguments_is_usage_error(self):
        assert run_cli() == cli.EXIT_USAGE

    def test_unknown_subcommand_is_usage_error(self):
        assert run_cli("frobnicate") == cli.EXIT_USAGE

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        code = run_cli("features", tmp_path / "absent.png")
        assert code == cli.EXIT_IO
        assert "I/O error" in capsys.readouterr().err

    def test_bad_transform_params_is_usage_error(self, image_path, tmp_path):
        code = run_cli("warp", image_path, "--params", "1,2,3",
                       "--output", tmp_path / "o.pgm")
        assert code == cli.EXIT_USAGE

    def test_verification_failure_exits_three(self, image_path, monkeypatch):
        def fake_verify(name, trials, seed):
            return VerificationReport(invariant=str(name), trials=trials,
                                      seed=seed, tolerance=1e-9,
                                      max_rel_deviation=1.0,
                                      deviations=[1.0])
        monkeypatch.setattr(cli, "verify_expansion", fake_verify)
        assert run_cli("verify", "--invariant", "AMI2") == cli.EXIT_VERIFY


class TestFeatures:
    def test_csv_to_stdout(self, image_path, capsys):
        assert run_cli("features", image_path, "--features", "awmi",
                       "--sigma", "1.5", "--kernel-size", "5") == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0].startswith("# awmi ")
        assert lines[1].startswith("# config ")
        header = lines[2].split(",")
        assert header[0] == "image" and len(header) == 10

    def test_json_format(self, image_path, capsys):
        import json

        assert run_cli("features", image_path, "--format", "json",
                       "--sigma", "1.5", "--kernel-size", "5") == 0
        out = capsys.readouterr().out
        body = "\n".join(l for l in out.splitlines() if not l.startswith("#"))
        rows = json.loads(body)
        assert len(rows) == 1 and "AWMI1_1" in rows[0]

    def test_stdout_deterministic(self, image_path, capsys):
        args = ("features", image_path, "--sigma", "1.5",
                "--kernel-size", "5")
        run_cli(*args)
        first = capsys.readouterr().out
        run_cli(*args)
        second = capsys.readouterr().out
        assert first == second


class TestWarpAndSynth:
    def test_identity_warp_preserves_pixels(self, image_path, tmp_path):
        out = tmp_path / "warped.pgm"
        assert run_cli("warp", image_path, "--params", "1,0,0,1,0,0",
                       "--output", out) == 0
        assert np.array_equal(load_image(out).pixels,
                              load_image(image_path).pixels)

    def test_synth_output_loadable(self, tmp_path):
        out = tmp_path / "s.pgm"
        assert run_cli("synth", "--kind", "bumps", "--width", "48",
                       "--height", "48", "--seed", "2", "--output", out) == 0
        r = load_image(out)
        assert r.pixels.shape == (48, 48)


class TestMoments:
    def test_row_count(self, image_path, capsys):
        assert run_cli("moments", image_path, "--max-order", "2") == 0
        lines = [l for l in capsys.readouterr().out.splitlines()
                 if l and not l.startswith("#")]
        assert lines[0] == "p,q,m_pq,u_pq"
        assert len(lines) == 1 + 6  # orders 0..2


class TestStability:
    def test_file_output_and_rerun_identical(self, image_path, tmp_path):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        base = ("stability", "--input", image_path, "--features", "ami",
                "--transform", "1,0,0,1,3,0", "--transform", "1,0,0,1,0,2",
                "--sigma", "1.5", "--kernel-size", "5")
        assert run_cli(*base, "--output-dir", out1) == 0
        first = (out1 / "stability.csv").read_bytes()
        assert run_cli(*base, "--output-dir", out1) == 0
        assert (out1 / "stability.csv").read_bytes() == first

        # different output dirs change only the echoed config, not the body
        assert run_cli(*base, "--output-dir", out2) == 0
        def body(path):
            return [l for l in path.read_text().splitlines()
                    if not l.startswith("#")]
        assert body(out1 / "stability.csv") == body(out2 / "stability.csv")
        header = first.decode().splitlines()[2].split(",")
        assert header == ["image", "invariant", "identity", "t1", "t2",
                          "error_pct"]

    def test_builtin_table4_shape(self, tmp_path):
        # the five named transforms plus identity; the named set assumes a
        # 512x512 frame, so anchor the content at its safe region
        img = tmp_path / "i.pgm"
        save_pgm(generate_synthetic(SyntheticSpec(
            "bumps", 512, 512, seed=1, center=(252.0, 116.0), radius=40.0)), img)
        assert run_cli("stability", "--input", img, "--features", "ami",
                       "--output-dir", tmp_path, "--sigma", "1.5",
                       "--kernel-size", "5") == 0
        lines = (tmp_path / "stability.csv").read_text().splitlines()
        header = lines[2].split(",")
        assert header[2:8] == ["identity", "t1", "t2", "t3", "t4", "t5"]


class TestRetrieve:
    def test_directory_dataset(self, tmp_path, rng, capsys):
        root = tmp_path / "data"
        for c in range(2):
            d = root / f"class{c}"
            d.mkdir(parents=True)
            for k in range(2):
                save_pgm(Raster(rng.uniform(0.05, 1.0, size=(12, 12))),
                         d / f"i{k}.pgm")
        assert run_cli("retrieve", "--dataset", root, "--features", "ami",
                       "--sigma", "1.5", "--kernel-size", "5") == 0
        out = capsys.readouterr().out
        rows = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert rows[0] == "recall,precision,method"
        assert len(rows) == 1 + 11
