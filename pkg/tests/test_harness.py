import json
import math

import numpy as np
import pytest

from nvphase.estimate import readout_crb
from nvphase.harness import ScenarioConfig, run_fig2f, run_fig4, run_scaling, run_supp_note2
from nvphase.harness.cli import main
from nvphase.harness.config import ConfigError
from nvphase.harness.manifest import MANIFEST_NAME, RunManifest, write_result
from nvphase.harness.scenarios import McTask, derive_seed, run_tasks, summarize, supp_note2_fits
from nvphase.nvmodel import NoiseParams


def small_fig4(**kw):
    return ScenarioConfig("fig4ab", seeds=8, sweep_phis_deg=(0.0, 30.0), **kw)


class TestConfig:
    def test_defaults_resolve(self):
        cfg = ScenarioConfig("fig2f")
        assert cfg.nu_values == (10_000, 40_000, 200_000)
        assert cfg.with_overrides(paper_scale=True).nu_values == (100_000, 400_000, 2_000_000)
        assert cfg.n_seeds == 200
        assert cfg.phi == pytest.approx(math.radians(30))

    @pytest.mark.parametrize("kw", [
        {"scenario": "fig9"},
        {"scenario": "fig2f", "noise": "loud"},
        {"scenario": "fig2f", "nu": (500,)},
        {"scenario": "fig2f", "phi_deg": -180.0},
        {"scenario": "fig2f", "phi_deg": 200.0},
        {"scenario": "fig2f", "workers": 0},
        {"scenario": "fig2f", "accounting": "per_run"},
    ])
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            ScenarioConfig(**kw)

    def test_phi_upper_bound_inclusive(self):
        assert ScenarioConfig("fig2f", phi_deg=180.0).phi_deg == 180.0

    def test_from_text(self):
        cfg = ScenarioConfig.from_text(
            "# desk run\nscenario = fig4ab\nnu = 1e4, 3e4, 1e5, 3e5\nseeds = 50\n"
            "noise = paper\nshot_noise = false\nsweep_phis_deg = 0, 15, 30\n")
        assert cfg.nu == (10_000, 30_000, 100_000, 300_000)
        assert cfg.seeds == 50 and cfg.noise == "paper" and cfg.shot_noise is False
        assert cfg.sweep_phis_deg == (0.0, 15.0, 30.0)

    @pytest.mark.parametrize("text", ["scenario = fig2f\ncolour = red\n", "nu = 1e4\n",
                                      "scenario = fig2f\nseeds = many\n",
                                      "scenario = fig2f\nshot_noise = maybe\n"])
    def test_from_text_errors(self, text):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_text(text)

    def test_snapshot_excludes_runtime_only_keys(self):
        snap = ScenarioConfig("fig2f", workers=3, out="x").snapshot()
        assert "workers" not in snap and "out" not in snap
        assert snap["nu"] == [10_000, 40_000, 200_000]


class TestSeeding:
    def test_derive_seed(self):
        a = derive_seed(0, 1, 2, 3)
        assert a == derive_seed(0, 1, 2, 3)
        assert a != derive_seed(0, 1, 2, 4) and a != derive_seed(1, 1, 2, 3)
        assert 0 <= a < 2 ** 64

    def test_pool_matches_serial(self):
        tasks = [McTask("entangled", 0.5, 10_000, (1, 2, 3)), McTask("nuclear", 0.5, 10_000, (4, 5))]
        serial = run_tasks(tasks, 1)
        pooled = run_tasks(tasks, 2)
        for a, b in zip(serial, pooled):
            assert np.array_equal(a, b)

    def test_summarize_wraps(self):
        s = summarize(np.array([math.pi - 0.01, -math.pi + 0.01]), math.pi)
        assert s["mean"] == pytest.approx(math.pi) and s["sd"] == pytest.approx(0.01 * math.sqrt(2))


@pytest.fixture(scope="module")
def fig2f_result():
    return run_fig2f(ScenarioConfig("fig2f"))


class TestFig2f:
    @pytest.fixture
    def result(self, fig2f_result):
        return fig2f_result

    def test_sd_decreasing_and_mean(self, result):
        rows = result.data["rows"]
        sds = [r["sd"] for r in rows]
        assert all(a > b for a, b in zip(sds, sds[1:]))
        for r in rows:
            assert r["phi_in"] == 30.0
            assert abs(r["mean"] - 30.0) < 3 * r["sd"]

    def test_inverse_root_ratios(self, result):
        rows = result.data["rows"]
        for r in rows[1:]:
            assert r["sd"] / rows[0]["sd"] == pytest.approx(math.sqrt(rows[0]["nu"] / r["nu"]), rel=0.2)

    def test_tables_self_describing(self, result):
        head = result.outputs["fig2f.tsv"].splitlines()[0]
        assert head.split("\t") == ["nu[repetitions]", "phi_in[deg]", "mean[deg]", "sd[deg]",
                                    "sem[deg]", "seeds[count]"]
        assert result.outputs["fig2f_traces.tsv"].startswith("nu[repetitions]\tdrive[deg]")

    def test_no_shot_noise(self):
        res = run_fig2f(ScenarioConfig("fig2f", seeds=3, shot_noise=False))
        assert all(r["sd"] < 1e-9 for r in res.data["rows"])


class TestFig4:
    def test_outputs(self):
        res = run_fig4(small_fig4())
        assert set(res.outputs) == {"fig4ab.tsv", "fig4b_fits.json", "fig4cd.tsv"}
        fits = json.loads(res.outputs["fig4b_fits.json"])
        assert set(fits["single"]["params"]) == {"a", "c"}
        assert len(res.outputs["fig4cd.tsv"].splitlines()) == 3

    def test_device_noise_shrinks_advantage(self):
        phi = math.radians(30)
        crb_ratio = readout_crb("single", phi, 100_000, noise=NoiseParams()) / \
            readout_crb("entangled", phi, 100_000, noise=NoiseParams())
        assert 1 < crb_ratio < math.sqrt(2)
        res = run_fig4(ScenarioConfig("fig4ab", noise="paper", seeds=300, sweep_phis_deg=(30.0,),
                                      workers=2))
        assert 1 < res.data["a_ratio"] < math.sqrt(2)


class TestSuppNote2:
    def test_fits_on_synthetic_curves(self):
        nus = [10_000, 30_000, 100_000, 300_000]
        single = [180 / math.sqrt(nu) for nu in nus]
        fits = supp_note2_fits(nus, single, 0.5)
        assert fits["loglog"].params["slope"] == -0.5
        assert fits["sd_fit"].params["c"] == pytest.approx(0.5, rel=1e-6)
        assert fits["loglog_subtracted"].adjusted_r2 >= fits["loglog"].adjusted_r2
        # the variance law only matches the SD law while the floor is small
        small = supp_note2_fits(nus, single, 0.02)
        assert small["sqrt_a_var_over_a_sd"] == pytest.approx(1, rel=0.10)

    def test_bundle(self):
        cfg = ScenarioConfig("supp-note2", seeds=40)
        res = run_supp_note2(cfg)
        bundle = json.loads(res.outputs["supp_note2_fits.json"])
        assert bundle["fixed_slope_magnitude"] == 0.5
        assert set(bundle["entangled_lower"]) == {"sd_fit", "loglog", "loglog_subtracted", "variance_fit"}
        assert "loglog_subtracted" in bundle["single"]


class TestScaling:
    def test_rows(self):
        res = run_scaling(ScenarioConfig("scaling", seeds=100))
        qfi = {(r["kind"], r["N"]): r["qfi"] for r in res.data["rows"]}
        assert qfi[("ghz", 2)] == pytest.approx(4, rel=1e-6)
        assert qfi[("separable", 1)] == pytest.approx(1, rel=1e-6)
        assert qfi[("ghz", 3)] == pytest.approx(9, rel=1e-6)
        mc = {r["N"]: r for r in res.data["mc"]}
        assert set(mc) == {1, 2}
        for r in mc.values():
            assert 0.8 < r["efficiency"] < 1.4  # 100 seeds; the tight window is an acceptance check

    def test_cap(self):
        with pytest.raises(ValueError):
            run_scaling(ScenarioConfig("scaling", seeds=2, n_values=(1, 5)))


class TestManifest:
    def test_round_trip_and_verify(self, tmp_path):
        res = run_fig4(small_fig4(seed=4))
        m = write_result(res, tmp_path)
        assert m.verify(tmp_path) == []
        back = RunManifest.from_json((tmp_path / MANIFEST_NAME).read_text())
        assert back == m and back.seed == 4
        (tmp_path / "fig4ab.tsv").write_text("tampered\n")
        assert m.verify(tmp_path) == ["fig4ab.tsv"]

    def test_byte_identical_reruns(self, tmp_path):
        a = write_result(run_fig4(small_fig4(seed=9)), tmp_path / "a")
        b = write_result(run_fig4(small_fig4(seed=9)), tmp_path / "b")
        assert a.checksums == b.checksums
        assert (tmp_path / "a" / MANIFEST_NAME).read_bytes() == (tmp_path / "b" / MANIFEST_NAME).read_bytes()


class TestCli:
    def error_line(self, capsys):
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        return json.loads(err[0])

    def test_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["scaling", "--seeds", "5", "--seed", "3", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out.splitlines()
        assert printed[-1].endswith(MANIFEST_NAME)
        manifest = RunManifest.from_json((out / MANIFEST_NAME).read_text())
        assert manifest.seed == 3 and manifest.verify(out) == []

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"scenario = fig2f\nseeds = 4\nnu = 1e4, 2e4\nout = {tmp_path / 'o'}\n")
        assert main(["fig2f", "--config", str(cfg)]) == 0
        assert (tmp_path / "o" / "fig2f.tsv").exists()

    def test_config_scenario_mismatch(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("scenario = scaling\n")
        assert main(["fig2f", "--config", str(cfg)]) == 2
        assert self.error_line(capsys)["error"] == "config"

    @pytest.mark.parametrize("argv", [["fig2f", "--noise", "loud"], ["fig2f", "--seed", "-1"],
                                      ["launch"], ["fig4", "--seeds", "x"]])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == 2
        assert self.error_line(capsys)["error"] == "usage"

    def test_missing_config(self, tmp_path, capsys):
        assert main(["fig4", "--config", str(tmp_path / "nope.cfg")]) == 2
        line = self.error_line(capsys)
        assert line["error"] == "config" and "nope.cfg" in line["message"]

    def test_unknown_criterion(self, capsys):
        assert main(["acceptance", "--only", "42"]) == 2
        assert self.error_line(capsys)["error"] == "usage"

    def test_acceptance_subset(self, capsys):
        assert main(["acceptance", "--only", "1"]) == 0
        assert capsys.readouterr().out.startswith("[PASS] criterion 1:")
