import numpy as np
import pytest

from gencyl import io
from gencyl.cli import PipelineConfig, load_config, load_tubespec, main, save_config

TUBESPEC = """\
kind: line
trunk_radius: 0.25
spine_count: 6
spine_bump_radius: 0.04 0.06
spine_length: 0.6 0.8
noise_sigma: 0
density: 250
seed: 5
skeleton_step: 0.1
param.length: 8
"""


@pytest.fixture
def tube_files(tmp_path):
    spec = tmp_path / "tube.spec"
    spec.write_text(TUBESPEC)
    cloud = tmp_path / "cloud.txt"
    skel = tmp_path / "skel.swc"
    assert main(["synth", "--spec", str(spec), "--out-cloud", str(cloud),
                 "--out-skeleton", str(skel)]) == 0
    return spec, cloud, skel


def run(args):
    return main([str(a) for a in args])


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = PipelineConfig(seed=7, policy="artery", rho_cut=0.5, window_len=2.0)
        path = tmp_path / "cfg.txt"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed: 1\nwat: 2\n")
        from gencyl.cli import ConfigError

        with pytest.raises(ConfigError):
            load_config(path)

    def test_flags_override_config(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.txt"
        cfgfile.write_text("rho_cut: 0.111\n")
        spec = tmp_path / "tube.spec"
        spec.write_text(TUBESPEC)
        cloud, skel = tmp_path / "c.txt", tmp_path / "s.swc"
        run(["synth", "--spec", spec, "--out-cloud", cloud, "--out-skeleton", skel])
        cyl = tmp_path / "cyl.txt"
        run(["transform", "--in", cloud, "--skeleton", skel, "--out", cyl])
        labels = tmp_path / "labels.txt"
        code = run(["segment-baseline", "--in", cyl, "--config", cfgfile,
                    "--rho-cut", "0.444", "--out", labels])
        assert code == 0
        assert "0.444" in capsys.readouterr().err

    def test_tubespec_unknown_key(self, tmp_path):
        path = tmp_path / "tube.spec"
        path.write_text(TUBESPEC + "bogus: 1\n")
        from gencyl.cli import ConfigError

        with pytest.raises(ConfigError):
            load_tubespec(path)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["transform", "--wat"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self, capsys):
        assert main([]) == 1

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        out = tmp_path / "out.txt"
        assert main(["transform", "--in", str(tmp_path / "nope.txt"),
                     "--skeleton", str(tmp_path / "nope.swc"), "--out", str(out)]) == 2

    def test_bad_config_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "cfg.txt"
        bad.write_text("nonsense_key: 3\n")
        cyl = tmp_path / "missing.txt"
        assert main(["segment-baseline", "--in", str(cyl), "--config", str(bad),
                     "--out", str(tmp_path / "o.txt")]) == 1

    def test_malformed_input_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("1 2\n")
        assert main(["transform", "--in", str(bad), "--skeleton", str(bad),
                     "--out", str(tmp_path / "o.txt")]) == 2


class TestStages:
    def test_synth_outputs(self, tube_files):
        _, cloud_path, skel_path = tube_files
        cloud = io.load_pointcloud(cloud_path)
        assert len(cloud) > 500
        assert cloud.labels is not None
        graph = io.load_swc(skel_path)
        assert len(graph) > 10

    def test_transform_inverse_round_trip(self, tube_files, tmp_path):
        _, cloud_path, skel_path = tube_files
        frames = tmp_path / "frames.txt"
        assert run(["frames", "--in", skel_path, "--out", frames]) == 0
        cyl = tmp_path / "cyl.txt"
        assert run(["transform", "--in", cloud_path, "--skeleton", frames, "--out", cyl]) == 0
        back = tmp_path / "back.txt"
        assert run(["inverse", "--in", cyl, "--skeleton", frames, "--out", back]) == 0
        original = io.load_pointcloud(cloud_path)
        restored = io.load_pointcloud(back)
        assert np.abs(original.points - restored.points).max() < 1e-9

    def test_skeletonize_writes_parseable_swc(self, tube_files, tmp_path):
        _, cloud_path, _ = tube_files
        out = tmp_path / "skel_out.swc"
        assert run(["skeletonize", "--in", cloud_path, "--out", out,
                    "--num-seeds", 40, "--seed", 2]) == 0
        graph = io.load_swc(out)
        assert len(graph) > 5

    def test_fragment_output(self, tube_files, tmp_path):
        _, cloud_path, skel_path = tube_files
        cyl = tmp_path / "cyl.txt"
        run(["transform", "--in", cloud_path, "--skeleton", skel_path, "--out", cyl])
        frag = tmp_path / "frags.txt"
        assert run(["fragment", "--in", cyl, "--skeleton", skel_path,
                    "--window-len", 2.0, "--overlap", 0.25, "--out", frag]) == 0
        lines = [l for l in frag.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) >= 4

    def test_voxelize_points_round(self, tmp_path):
        obj = tmp_path / "cube.obj"
        obj.write_text(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
            "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\n"
            "f 3 4 8\nf 3 8 7\nf 2 3 7\nf 2 7 6\nf 4 1 5\nf 4 5 8\n"
        )
        vol = tmp_path / "cube.raw"
        assert run(["voxelize", "--in", obj, "--resolution", 0.1, "--out", vol]) == 0
        cloudf = tmp_path / "pts.txt"
        assert run(["points", "--in", vol, "--out", cloudf]) == 0
        cloud = io.load_pointcloud(cloudf)
        assert abs(len(cloud) - 1000) <= 20

    def test_segment_and_evaluate(self, tube_files, tmp_path, capsys):
        _, cloud_path, skel_path = tube_files
        cyl = tmp_path / "cyl.txt"
        run(["transform", "--in", cloud_path, "--skeleton", skel_path, "--out", cyl])
        labels = tmp_path / "pred.txt"
        assert run(["segment-baseline", "--in", cyl, "--rho-cut", 0.33, "--out", labels]) == 0
        report = tmp_path / "report.txt"
        assert run(["evaluate", "--pred", labels, "--gt", cloud_path, "--cls", "1",
                    "--out", report]) == 0
        text = report.read_text()
        assert "dsc.1:" in text
        value = float([l for l in text.splitlines() if l.startswith("dsc.1")][0].split(":")[1])
        assert value > 0.8

    def test_sweep_rotations_outputs(self, tube_files, tmp_path):
        _, cloud_path, skel_path = tube_files
        out_dir = tmp_path / "sweep"
        assert run(["sweep-rotations", "--in", cloud_path, "--skeleton", skel_path,
                    "--n", 3, "--seed", 1, "--rho-cut", 0.33, "--out-dir", out_dir]) == 0
        assert (out_dir / "summary.txt").exists()
        assert len(list(out_dir.glob("rotation_*.txt"))) == 3
        summary = (out_dir / "summary.txt").read_text()
        spread = float([l for l in summary.splitlines()
                        if l.startswith("dsc_spread.1")][0].split(":")[1])
        assert spread < 1e-6


class TestPipeline:
    def _volume(self, tmp_path):
        spec = tmp_path / "tube.spec"
        spec.write_text(TUBESPEC.replace("param.length: 8", "param.length: 10"))
        cloud, skel = tmp_path / "c.txt", tmp_path / "s.swc"
        vol = tmp_path / "gt.raw"
        assert run(["synth", "--spec", spec, "--out-cloud", cloud, "--out-skeleton", skel,
                    "--out-volume", vol, "--resolution", 0.04]) == 0
        return vol

    def test_pipeline_runs_and_labels(self, tmp_path):
        vol = self._volume(tmp_path)
        out = tmp_path / "pred.raw"
        assert run(["pipeline", "--in", vol, "--out", out, "--seed", 1,
                    "--num-seeds", 80, "--rho-cut", 0.33,
                    "--neighborhood-radius", 0.5, "--repulsion-weight", 0.15]) == 0
        pred = io.load_volume(out)
        gt = io.load_volume(vol)
        assert pred.data.shape == gt.data.shape
        assert set(np.unique(pred.data)) <= {0, 1, 2}
        # foreground support identical to the input volume
        assert np.array_equal(pred.data != 0, gt.data != 0)

    def test_pipeline_matches_stage_composition(self, tmp_path):
        vol_path = self._volume(tmp_path)
        out = tmp_path / "pred.raw"
        skel_flags = ["--seed", "1", "--num-seeds", "80",
                      "--neighborhood-radius", "0.5", "--repulsion-weight", "0.15"]
        assert run(["pipeline", "--in", vol_path, "--out", out, "--rho-cut", "0.33"]
                   + skel_flags) == 0

        # the same stages, one subcommand at a time, through files
        pts = tmp_path / "pts.txt"
        assert run(["points", "--in", vol_path, "--out", pts]) == 0
        swc = tmp_path / "sk.swc"
        assert run(["skeletonize", "--in", pts, "--out", swc] + skel_flags) == 0
        frames = tmp_path / "fr.txt"
        assert run(["frames", "--in", swc, "--out", frames]) == 0
        cyl = tmp_path / "cyl.txt"
        assert run(["transform", "--in", pts, "--skeleton", frames, "--out", cyl]) == 0
        labels = tmp_path / "labels.txt"
        assert run(["segment-baseline", "--in", cyl, "--rho-cut", "0.33",
                    "--out", labels]) == 0

        # pointwise labels + voting must agree with the pipeline's volume
        pred_vol = io.load_volume(out)
        cloud = io.load_pointcloud(pts)
        lab = io.load_labels(labels)
        from gencyl.sampling import remap_to_volume

        composed = remap_to_volume(cloud, lab + 1, pred_vol)
        assert np.array_equal(composed.data, pred_vol.data)

    def test_pipeline_artery_policy_runs(self, tmp_path):
        vol = self._volume(tmp_path)
        out = tmp_path / "pred_a.raw"
        assert run(["pipeline", "--in", vol, "--out", out, "--seed", 1,
                    "--policy", "artery", "--num-seeds", 80, "--rho-cut", 0.33,
                    "--neighborhood-radius", 0.5, "--repulsion-weight", 0.15,
                    "--min-branch-len", 0.8]) == 0
        assert io.load_volume(out).data.any()


class TestDeterminism:
    def test_synth_bitwise_stable(self, tmp_path):
        spec = tmp_path / "tube.spec"
        spec.write_text(TUBESPEC)
        outs = []
        for tag in ("a", "b"):
            cloud = tmp_path / f"c_{tag}.txt"
            skel = tmp_path / f"s_{tag}.swc"
            assert run(["synth", "--spec", spec, "--out-cloud", cloud,
                        "--out-skeleton", skel]) == 0
            outs.append((cloud.read_bytes(), skel.read_bytes()))
        assert outs[0] == outs[1]
