import csv
import json
import math
import subprocess
import sys

import pytest

from paramgate.calibration import predict_resonances
from paramgate.cli import main
from paramgate.device import to_mhz


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run_files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.fixture(scope="module")
def cz02_recipe_file(recipes, tmp_path_factory):
    path = tmp_path_factory.mktemp("recipes") / "cz02.json"
    recipes["cz02"].save(path)
    return path


@pytest.fixture(scope="module")
def iswap_recipe_file(recipes, tmp_path_factory):
    path = tmp_path_factory.mktemp("recipes") / "iswap.json"
    recipes["iswap"].save(path)
    return path


class TestResonanceMap:
    def test_curves_are_monotone(self, tmp_path, device):
        out = tmp_path / "map"
        assert main(["resonance-map", "--out", str(out), "--amp-max", "0.3", "--amp-points", "16"]) == 0
        rows = read_csv(out / "resonance_map.csv")
        assert len(rows) == 16
        for tr in ("iswap", "cz02", "cz20"):
            for n in (1, 2):
                freqs = [float(r[f"{tr}_n{n}_f_p_MHz"]) for r in rows]
                assert all(b < a for a, b in zip(freqs, freqs[1:]))
        # oracle: predict_resonances at the same amplitude
        pred = predict_resonances(device, 0.3, (2,), ("cz20",))[0]
        assert float(rows[-1]["cz20_n2_f_p_MHz"]) == pytest.approx(to_mhz(pred.omega_p_star), abs=1e-6)

    def test_single_zero_amplitude_row(self, tmp_path):
        out = tmp_path / "map"
        assert main(["resonance-map", "--out", str(out), "--amp-points", "1"]) == 0
        rows = read_csv(out / "resonance_map.csv")
        assert len(rows) == 1
        assert float(rows[0]["iswap_n1_f_p_MHz"]) == pytest.approx(321.0, abs=0.1)
        assert float(rows[0]["cz20_n1_f_p_MHz"]) == pytest.approx(411.0, abs=0.1)

    def test_empty_grid_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "map"
        assert main(["resonance-map", "--out", str(out), "--amp-points", "0"]) == 2
        assert not out.exists()
        assert "grid is empty" in capsys.readouterr().err

    def test_manifest(self, tmp_path):
        out = tmp_path / "map"
        main(["resonance-map", "--out", str(out), "--amp-points", "3", "--seed", "17"])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 17
        assert set(manifest["files"]) == {"resonance_map.csv", "config.json"}


class TestChevron:
    def test_one_cell_on_resonance(self, tmp_path, device):
        pred = predict_resonances(device, 0.317, (1,), ("iswap",))[0]
        tau_ns = math.pi / (2 * abs(pred.g_eff)) * 1e9
        f = repr(to_mhz(pred.omega_p_star))
        out = tmp_path / "chev"
        assert main(["chevron", "--gate", "iswap", "--amp", "0.317", "--out", str(out),
                     "--f-min", f, "--f-max", f, "--f-points", "1",
                     "--t-min", repr(tau_ns), "--t-max", repr(tau_ns), "--t-points", "1"]) == 0
        rows = read_csv(out / "chevron.csv")
        assert len(rows) == 1
        assert float(rows[0]["population"]) >= 0.95
        meta = json.loads((out / "chevron.json").read_text())
        assert meta["failures"] == []

    def test_zero_amplitude_map(self, tmp_path):
        out = tmp_path / "chev"
        assert main(["chevron", "--gate", "iswap", "--amp", "0", "--out", str(out),
                     "--f-min", "100", "--f-max", "140", "--f-points", "3",
                     "--t-min", "20", "--t-max", "200", "--t-points", "4"]) == 0
        values = [float(r["population"]) for r in read_csv(out / "chevron.csv")]
        # static |10> <-> |01> exchange, detuned by 642 MHz
        assert max(values) < 5e-4

    def test_edges_must_fit(self, tmp_path, capsys):
        assert main(["chevron", "--gate", "iswap", "--out", str(tmp_path / "c"),
                     "--f-min", "100", "--f-max", "140", "--t-min", "10", "--risetime", "30"]) == 2
        assert "edges" in capsys.readouterr().err


class TestCalibrate:
    def test_unknown_gate_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["calibrate", "--gate", "cnot"])
        assert info.value.code == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_dry_run_resolves_table_amplitude(self, tmp_path, capsys):
        out = tmp_path / "cal"
        assert main(["calibrate", "--gate", "cz02", "--out", str(out), "--dry-run"]) == 0
        resolved = json.loads(capsys.readouterr().out)
        assert resolved["params"]["amp"] == pytest.approx(0.245)
        assert resolved["params"]["risetime"] is None
        assert not out.exists()


class TestCharacterize:
    def test_zero_shots_is_config_error(self, tmp_path, cz02_recipe_file, capsys):
        code = main(["characterize", "--recipe", str(cz02_recipe_file), "--shots", "0",
                     "--out", str(tmp_path / "ch")])
        assert code == 2
        assert "shots" in capsys.readouterr().err

    def test_missing_recipe(self, tmp_path):
        assert main(["characterize", "--recipe", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "ch")]) == 2

    def test_noiseless_qpt(self, tmp_path, cz02_recipe_file):
        out = tmp_path / "ch"
        assert main(["characterize", "--recipe", str(cz02_recipe_file), "--no-irb",
                     "--shots", "10000", "--seed", "3", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())["table"]
        assert report["QPT fidelity"] >= 0.99
        assert report["QPT fidelity"] <= report["- unitarity bound"] + 1e-3
        header = (out / "tomography_counts.csv").read_text().splitlines()[0]
        assert header == "setting_id,prep_label,meas_label,outcome,count"

    def test_rb_length_validation(self, tmp_path, iswap_recipe_file):
        assert main(["rb", "--recipe", str(iswap_recipe_file), "--lengths", "4", "2",
                     "--out", str(tmp_path / "rb")]) == 2


@pytest.mark.parametrize("command", ["resonance-map", "chevron", "calibrate", "characterize", "rb"])
def test_every_command_supports_dry_run(command, tmp_path, capsys, cz02_recipe_file):
    extra = {
        "resonance-map": [],
        "chevron": ["--gate", "cz02", "--f-min", "100", "--f-max", "120"],
        "calibrate": ["--gate", "iswap"],
        "characterize": ["--recipe", str(cz02_recipe_file)],
        "rb": ["--recipe", str(cz02_recipe_file)],
    }[command]
    out = tmp_path / "run"
    assert main([command, "--dry-run", "--out", str(out), *extra]) == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["command"] == command
    assert not out.exists()


class TestDeterminism:
    @staticmethod
    def twice(tmp_path, args):
        outputs = []
        for workers in (1, 4):
            out = tmp_path / f"w{workers}"
            assert main([*args, "--workers", str(workers), "--out", str(out)]) == 0
            outputs.append(run_files(out))
        return outputs

    def test_chevron(self, tmp_path):
        one, four = self.twice(tmp_path, ["chevron", "--gate", "cz02", "--amp", "0.245",
                                          "--f-min", "105", "--f-max", "120", "--f-points", "4",
                                          "--t-min", "40", "--t-max", "200", "--t-points", "5",
                                          "--risetime", "20", "--seed", "5"])
        assert one == four

    def test_rb(self, tmp_path, iswap_recipe_file):
        one, four = self.twice(tmp_path, ["rb", "--recipe", str(iswap_recipe_file),
                                          "--lengths", "2", "4", "8", "--sequences", "6",
                                          "--inject-depolarizing", "0.05", "--seed", "11"])
        assert one == four

    def test_characterize(self, tmp_path, cz02_recipe_file):
        one, four = self.twice(tmp_path, ["characterize", "--recipe", str(cz02_recipe_file),
                                          "--shots", "300", "--readout", "0.85", "0.92",
                                          "--lengths", "2", "4", "--sequences", "4",
                                          "--seed", "2"])
        assert one == four

    def test_repeat_with_same_workers(self, tmp_path):
        args = ["resonance-map", "--amp-points", "5", "--seed", "9"]
        first, second = tmp_path / "a", tmp_path / "b"
        main([*args, "--out", str(first)])
        main([*args, "--out", str(second)])
        assert run_files(first) == run_files(second)


def test_module_entry_point(tmp_path):
    out = tmp_path / "map"
    done = subprocess.run([sys.executable, "-m", "paramgate.cli", "resonance-map", "--amp-points", "2",
                           "--out", str(out)], capture_output=True, text=True, timeout=120)
    assert done.returncode == 0, done.stderr
    assert (out / "resonance_map.csv").is_file()
