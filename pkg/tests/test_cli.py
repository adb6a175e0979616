import csv
import json
import subprocess
import sys

import pytest
import yaml

from susyreplica.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from susyreplica.config import DEFAULTS, ConfigError, RunConfig
from susyreplica.io import to_jsonable, write_csv

SMALL_GOE = ["--set", "goe.N=60", "--set", "goe.samples=40"]


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_constants_command(tmp_path, capsys):
    assert main(["constants", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "constants.csv")
    assert [r["kind"] for r in rows] == ["fermionic"] * 3 + ["bosonic"] * 2
    assert float(rows[1]["value"]) == pytest.approx(1 / 72, rel=1e-14)
    assert float(rows[4]["value"]) == pytest.approx(1 / 1536, rel=1e-14)
    assert "fermionic" in capsys.readouterr().out


def test_csv_header_carries_manifest(tmp_path):
    main(["constants", "--out", str(tmp_path)])
    head = [ln for ln in (tmp_path / "constants.csv").read_text().splitlines() if ln.startswith("#")]
    keys = {ln[2:].split(":", 1)[0] for ln in head}
    assert keys == {"command", "config_sha256", "seed", "versions"}


def test_verify_tau_and_pfkp_pass(tmp_path):
    assert main(["verify", "--suite", "tau", "--out", str(tmp_path)]) == EXIT_OK
    assert main(["verify", "--suite", "pfkp", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "verify_tau.json").read_text())
    counted = [r for r in rep["reports"] if r["counted"]]
    assert counted and all(r["ok"] for r in counted)
    assert any(not r["counted"] for r in rep["reports"])   # m = 0 reported only


def test_verify_virasoro_forms(tmp_path, capsys):
    assert main(["verify", "--suite", "virasoro", "--out", str(tmp_path)]) == EXIT_FAIL
    err = capsys.readouterr().err
    assert "FAIL virasoro/virasoro" in err and "q=-1" not in err
    assert main(["verify", "--suite", "virasoro", "--set", "virasoro.form=corrected",
                 "--out", str(tmp_path)]) == EXIT_OK


def test_gauge_fault_fails_pfkp(tmp_path):
    assert main(["verify", "--suite", "pfkp", "--set", "pfkp.gauge=1.1", "--out", str(tmp_path)]) == EXIT_FAIL
    rep = json.loads((tmp_path / "verify_pfkp.json").read_text())
    inflation = [r["details"]["rhs_inflation"] for r in rep["reports"] if "rhs_inflation" in r["details"]]
    assert inflation and all(abs(x - 1.21) < 1e-9 for x in inflation)


def test_unevaluable_step_is_reported_not_raised(tmp_path, capsys):
    assert main(["verify", "--suite", "virasoro", "--set", "fd.h=5.0", "--set", "virasoro.form=corrected",
                 "--out", str(tmp_path)]) == EXIT_FAIL
    assert "not evaluated" in capsys.readouterr().err


def test_curves_outputs(tmp_path):
    assert main(["curves", "--what", "all", "--resolution", "12", "--out", str(tmp_path)]) == EXIT_OK
    for n in range(-2, 3):
        assert len(read_csv(tmp_path / f"z_n{n:+d}.csv")) == 12
    rows = read_csv(tmp_path / "r2_curves.csv")
    assert len(rows) == 12 and max(float(r["abs_diff"]) for r in rows) < 1e-8
    meta = json.loads((tmp_path / "z_curves.json").read_text())
    assert meta["manifest"]["command"] == "curves all"


def test_curves_range_flag_and_domain_errors(tmp_path):
    assert main(["curves", "--what", "r2", "--range", "0.5", "2.0", "--resolution", "5",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert float(read_csv(tmp_path / "r2_curves.csv")[0]["omega"]) == 0.5
    # bosonic flavours are undefined at omega < 1e-3: reported rows, failing exit
    assert main(["curves", "--what", "z", "--set", "curves.z_range=[1e-5, 0.5]", "--resolution", "3",
                 "--out", str(tmp_path)]) == EXIT_FAIL
    assert "domain-error" in read_csv(tmp_path / "z_n-1.csv")[0]["method"]


def test_goemc_small_run_and_fault(tmp_path):
    assert main(["goemc", *SMALL_GOE, "--set", "goe.samples=200", "--out", str(tmp_path / "a")]) == EXIT_OK
    data = json.loads((tmp_path / "a" / "goemc.json").read_text())
    assert data["passed"] and "threads" not in data["config"]
    assert main(["goemc", "--set", "goe.N=120", "--set", "goe.samples=300", "--set", "goe.seed=3",
                 "--set", "goe.unfold_scale=1.05", "--out", str(tmp_path / "b")]) == EXIT_FAIL


def test_outputs_identical_across_reruns_and_threads(tmp_path):
    for name, threads in (("a", "1"), ("b", "2")):
        out = str(tmp_path / name)
        main(["goemc", *SMALL_GOE, "--threads", threads, "--out", out])
        main(["curves", "--what", "all", "--resolution", "8", "--threads", threads, "--out", out])
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_seed_changes_goemc_output(tmp_path):
    main(["goemc", *SMALL_GOE, "--out", str(tmp_path / "a")])
    main(["goemc", *SMALL_GOE, "--seed", "99", "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "goemc_bins.csv").read_text()
    b = (tmp_path / "b" / "goemc_bins.csv").read_text()
    assert a != b and '"seed": 99' in b.replace("# seed: 99", '"seed": 99')


@pytest.mark.parametrize("argv", [
    ["verify", "--set", "nope=1"],
    ["verify", "--set", "fd.h=-1"],
    ["verify", "--set", "virasoro.form=bogus"],
    ["goemc", "--seed", "-4"],
    ["goemc", "--set", "goe.bin_width=9"],
    ["curves", "--config", "/nonexistent/file.yaml"],
    [],
])
def test_configuration_errors_exit_two(argv, tmp_path):
    assert main([*argv, "--out", str(tmp_path)] if argv else []) == EXIT_CONFIG


def test_print_config_roundtrip(tmp_path, capsys):
    assert main(["--print-config", "--set", "cheb.degree=40"]) == EXIT_OK
    printed = yaml.safe_load(capsys.readouterr().out)
    assert printed["cheb.degree"] == 40
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(printed))
    assert RunConfig.load(path).values == printed


def test_config_file_then_overrides(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("goe.N: 80\nfd.h: 0.002\n")
    cfg = RunConfig.load(path, ["goe.N=90"])
    assert cfg["goe.N"] == 90 and cfg["fd.h"] == 0.002
    path.write_text("- a list\n")
    with pytest.raises(ConfigError):
        RunConfig.load(path)


def test_config_type_checks():
    for item in ("goe.N=2.5", "goe.density_correction=1", "pfkp.tol=abc", "tau.s_bosonic=3",
                 "quad.eta_ladder=[1e-3, 2e-3]", "cheb.interval_fermionic=[2.0, 1.0]", "goe.bulk_window=1.5",
                 "tau.s_bosonic=[-1.0]", "tau.s_fermionic=[[1.0]]", "no_equals_sign"):
        with pytest.raises(ConfigError):
            RunConfig.load(None, [item])


def test_digest_ignores_threads_and_out():
    base = RunConfig.load().digest()
    assert RunConfig.load(None, ["run.threads=4", "run.out=elsewhere"]).digest() == base
    assert RunConfig.load(None, ["goe.seed=5"]).digest() != base
    assert set(DEFAULTS) == set(RunConfig.load().values)


def test_to_jsonable_and_csv_formatting(tmp_path):
    import numpy as np

    out = to_jsonable({"a": np.float64(1.5), "b": 2 + 3j, "c": np.array([1, 2]), "d": float("nan"),
                       "e": np.bool_(True), 3: (np.int64(4),)})
    assert out == {"a": 1.5, "b": [2.0, 3.0], "c": [1, 2], "d": "nan", "e": True, "3": [4]}
    p = write_csv(tmp_path / "x" / "t.csv", ["v", "f"], [(0.1, True)], {"k": 1})
    assert p.read_text() == "# k: 1\nv,f\n0.1,1\n"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "susyreplica", "constants", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "constants.csv").exists()
    proc = subprocess.run([sys.executable, "-m", "susyreplica", "verify", "--set", "x=1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "unknown config key" in proc.stderr
