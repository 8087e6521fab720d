import json
import os

import pytest

from antitree import __version__
from antitree.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main, run_config
from antitree.config import OUTPUT_ROOT_ENV, SCHEMAS, parse_config, parse_text, resolve_output_dir
from antitree.errors import ConfigurationError

ORACLE = """[run]
experiment = oracle_equivalence
seed = 1
output_dir = {out}

[graph]
n = 6
r = 3
s = 4
"""

SDE_BAD = """[run]
experiment = sde_refinement
seed = 0
output_dir = {out}

[sde]
lam = 3.0
r = 3

[transfer]
n = 4
s = 21
m = 5
"""

HARMONIC = """[run]
experiment = harmonic_mc
seed = 2
output_dir = {out}
workers = {workers}

[harmonic]
lam = 3.0
s_grid = 20, 40
samples = 20000
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_defaults():
    cfg = parse_text(ORACLE.format(out="o"))
    assert cfg.experiment == "oracle_equivalence" and cfg.seed == 1 and cfg.workers == 1
    assert cfg.params["graph"]["w"] == 0.0
    assert cfg.params["disorder"] == {"kind": "two_point_symmetric", "sigma": 1.0, "scale": None, "location": None}
    assert cfg.params["scan"]["tolerance"] == 1e-8
    text = "[run]\nexperiment = goe_gap_compare\nseed = 3\n"
    cfg = parse_text(text)
    assert cfg.output_dir == os.path.join("out", "goe_gap_compare")
    assert cfg.params["goe"]["r_e"] == 400 and cfg.params["goe"]["ensemble"] == 200


def test_unknown_key_rejected():
    text = ORACLE.format(out="o") + "\n[disorder]\nsigma_typo = 1.0\n"
    with pytest.raises(ConfigurationError, match="sigma_typo"):
        parse_text(text)
    with pytest.raises(ConfigurationError, match=r"\[bogus\]"):
        parse_text(ORACLE.format(out="o") + "\n[bogus]\nx = 1\n")


def test_missing_and_bad_values():
    with pytest.raises(ConfigurationError, match="seed"):
        parse_text("[run]\nexperiment = goe_gap_compare\n")
    with pytest.raises(ConfigurationError, match="unknown experiment"):
        parse_text("[run]\nexperiment = nope\nseed = 1\n")
    with pytest.raises(ConfigurationError, match="n = 'six'"):
        parse_text(ORACLE.format(out="o").replace("n = 6", "n = six"))
    with pytest.raises(ConfigurationError, match="must be positive"):
        parse_text(ORACLE.format(out="o").replace("n = 6", "n = 0"))
    with pytest.raises(ConfigurationError, match="sigma"):
        parse_text(ORACLE.format(out="o") + "\n[disorder]\nsigma = -1\n")


def test_parse_error_reports_line():
    text = "[run]\nexperiment = goe_gap_compare\nseed = 1\nthis line is broken\n"
    with pytest.raises(ConfigurationError, match="line 4"):
        parse_text(text)
    with pytest.raises(ConfigurationError):
        parse_text("[run]\nseed = 1\nseed = 2\nexperiment = goe_gap_compare\n")


@pytest.mark.parametrize("experiment", sorted(SCHEMAS))
def test_round_trip(experiment):
    required = {
        "oracle_equivalence": "[graph]\nn = 2\nr = 2\ns = 3\n",
        "harmonic_mc": "[harmonic]\nlam = 2.5\n",
        "channel_conjugation": "[channels]\nlam_values = 1.5, 2.25\n",
        "sde_refinement": "[sde]\nlam = 3.0\nr = 3\n\n[transfer]\nn = 2\ns = 6\nm = 3\n",
        "goe_gap_compare": "",
        "antitree_pipeline": "[pipeline]\nlam = 2.4142135623730949\nw = 2.0\nconfigs = 20x3x2, 30x4x4\n",
    }[experiment]
    cfg = parse_text(f"[run]\nexperiment = {experiment}\nseed = 7\n\n{required}")
    again = parse_text(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()


def test_sde_transfer_section_optional():
    cfg = parse_text("[run]\nexperiment = sde_refinement\nseed = 0\n\n[sde]\nlam = 3.0\nr = 3\n")
    assert "transfer" not in cfg.params


def test_cli_config_error_exit(tmp_path, capsys):
    path = write(tmp_path, "bad.ini", SDE_BAD.format(out=tmp_path / "out"))
    assert main(["run", path]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "[transfer] s" in err and "20" in err
    assert not (tmp_path / "out").exists()
    assert main(["validate", path]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def test_cli_oracle_run(tmp_path, capsys):
    out = tmp_path / "oracle"
    path = write(tmp_path, "oracle.ini", ORACLE.format(out=out))
    assert main(["validate", path]) == EXIT_OK
    assert main(["run", path]) == EXIT_OK
    report = json.load(open(out / "report.json"))
    assert report["pass"] and report["max_deviation"] <= 1e-8
    manifest = json.load(open(out / "manifest.json"))
    assert manifest["seed"] == 1 and manifest["workers"] == 1 and manifest["pass"] is True
    assert {"antitree", "numpy", "scipy", "python"} <= set(manifest["versions"])
    assert parse_text(manifest["config"]) == parse_config(path)
    assert not [n for n in os.listdir(out) if n.startswith(".partial-")]
    capsys.readouterr()
    assert main(["oracle", "--n", "6", "--r", "3", "--s", "4", "--seed", "1", "--window-lo", "1.5",
                 "--window-hi", "7"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["count"] == len(printed["scan"]) and printed["max_deviation"] <= 1e-8


def test_cli_oracle_window_pair_required(capsys):
    assert main(["oracle", "--n", "2", "--r", "2", "--s", "2", "--seed", "0", "--window-lo", "1.5"]) == EXIT_CONFIG


def csv_contents(directory):
    return {n: open(os.path.join(directory, n), "rb").read() for n in sorted(os.listdir(directory)) if n.endswith(".csv")}


def test_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", write(tmp_path, "o.ini", ORACLE.format(out=out))]) == EXIT_OK
    ca, cb = csv_contents(a), csv_contents(b)
    assert ca and ca == cb
    # 17 significant digits
    row = open(a / "zeros_seed1.csv").read().splitlines()[1].split(",")
    assert len(row[1].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) >= 15


def test_worker_count_invariant(tmp_path):
    outs = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        assert main(["run", write(tmp_path, "h.ini", HARMONIC.format(out=out, workers=workers))]) in (EXIT_OK, EXIT_FAILED)
        report = json.load(open(out / "moments.json"))
        outs.append(report["records"])
    assert outs[0] == outs[1]


def test_nothing_written_outside_output_dir(tmp_path, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    path = write(tmp_path, "o.ini", ORACLE.format(out=tmp_path / "results"))
    before = set(os.listdir(tmp_path)) | {"results"}
    assert main(["run", path]) == EXIT_OK
    assert set(os.listdir(tmp_path)) == before
    assert os.listdir(work) == []


def test_partial_outputs_removed_on_failure(tmp_path, monkeypatch):
    from antitree import experiments

    def boom(cfg, out):
        with open(os.path.join(out, "half.csv"), "w") as fh:
            fh.write("x\n")
        raise ArithmeticError("synthetic failure")

    monkeypatch.setitem(experiments.RUNNERS, "oracle_equivalence", boom)
    out = tmp_path / "res"
    assert main(["run", write(tmp_path, "o.ini", ORACLE.format(out=out))]) == 4
    assert os.listdir(out) == []


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    cfg = parse_text(ORACLE.format(out="rel/dir"))
    assert resolve_output_dir(cfg) == os.path.join(str(tmp_path / "root"), "rel/dir")
    cfg = parse_text(ORACLE.format(out=tmp_path / "abs"))
    assert resolve_output_dir(cfg) == str(tmp_path / "abs")
    report, out = run_config(parse_text(ORACLE.format(out="rel")))
    assert out == os.path.join(str(tmp_path / "root"), "rel") and os.path.exists(os.path.join(out, "report.json"))


def test_version(capsys):
    assert main(["version"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"antitree {__version__}"


SMOKE = {
    "harmonic_mc": "[harmonic]\nlam = 3.0\ns_grid = 20\nsamples = 2000\n",
    "channel_conjugation": "[channels]\nr_values = 3\nlam_values = 1.5, 2.5\n",
    "sde_refinement": "[sde]\nlam = 3.0\nw = 4.368\nr = 3\nm_values = 10, 100\nt_steps = 200\nseeds = 2\n"
                      "\n[transfer]\nn = 4\ns = 20\nm = 5\n",
    "goe_gap_compare": "[goe]\nr_e = 60\nensemble = 10\n",
    "antitree_pipeline": "[pipeline]\nlam = 2.4142135623730949\nw = 2.0\nconfigs = 4x2x2, 5x2x2\nensemble = 6\n"
                         "window = 4.0\nreference_r_e = 40\nreference_ensemble = 4\nbootstrap = 10\n",
}


@pytest.mark.parametrize("experiment", sorted(SMOKE))
def test_runner_smoke(tmp_path, experiment):
    out = tmp_path / experiment
    text = f"[run]\nexperiment = {experiment}\nseed = 1\noutput_dir = {out}\n\n{SMOKE[experiment]}"
    code = main(["run", write(tmp_path, "c.ini", text)])
    assert code in (EXIT_OK, EXIT_FAILED)
    manifest = json.load(open(out / "manifest.json"))
    assert manifest["experiment"] == experiment and (manifest["pass"] is True) == (code == EXIT_OK)
