import pytest
import yaml

from delone_ids.Experiment.experiment import ConfigError, ExperimentConfig
from delone_ids.Experiment.main import decoration_scale, main
from delone_ids.Geometry.patterns import load_pattern_class


def _points(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def _config(tmp_path, **values):
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(values))
    return str(path)


def test_generate_square_lattice(tmp_path):
    assert main(["generate", "--lattice", "square", "--L", "8", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "points.txt").read_text().splitlines()
    assert lines[0] == "# delone d=2"
    assert len(_points(tmp_path / "points.txt")) == 289
    assert any((tmp_path / "logs").iterdir())


def test_generate_decorated_lattice(tmp_path):
    assert main(["generate", "--lattice", "square", "--L", "8", "--decorate", "r=0.42", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "points.txt").read_text()
    assert len(_points(tmp_path / "points.txt")) == 1445
    assert "# decorated r=0.42 pattern=" in text
    pattern = load_pattern_class(tmp_path / "pattern.txt")
    assert pattern.radius == pytest.approx(0.4)
    assert len(pattern.canonical) == 1
    assert f"pattern={pattern.digest()}" in text


def test_generate_is_deterministic(tmp_path):
    for name in ("first", "second"):
        args = ["generate", "--cutproject", "ab", "--L", "5", "--seed", "1", "--out", str(tmp_path / name)]
        assert main(args) == 0
    first = (tmp_path / "first" / "points.txt").read_bytes()
    assert first == (tmp_path / "second" / "points.txt").read_bytes()
    assert b"cutproject" in first


def test_decorate_point_file(tmp_path):
    assert main(["generate", "--lattice", "square", "--L", "4", "--out", str(tmp_path)]) == 0
    out = tmp_path / "decorated"
    args = ["decorate", "--in", str(tmp_path / "points.txt"), "--decorate", "r=0.42", "--out", str(out)]
    assert main(args) == 0
    assert len(_points(out / "decorated.txt")) == 49 * 5


def test_spectrum_files(tmp_path):
    assert main(["spectrum", "--lattice", "square", "--L", "2", "--out", str(tmp_path)]) == 0
    assert len(_points(tmp_path / "spectrum_L2.txt")) == 25
    matrix = (tmp_path / "matrix_L2.txt").read_text().splitlines()
    assert matrix[0] == "# symmetric n=25"
    assert len(matrix) == 1 + 40


def test_jumps_file(tmp_path):
    assert main(["jumps", "--lattice", "square", "--L", "4", "--weight-floor", "0.1", "--out", str(tmp_path)]) == 0
    rows = [line.split() for line in _points(tmp_path / "jumps_L4.txt")]
    assert [row[1:] for row in rows] == [["0.140625", "9", "64"]]


def test_one_dimensional_ids(tmp_path):
    config = _config(tmp_path, dimension=1, L=[4, 8], translates=2)
    assert main(["ids", "--config", config, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ids_L4.txt").read_text().startswith("# ids window=")
    rows = [line.split() for line in _points(tmp_path / "convergence.txt")]
    assert rows[0][:3] == ["4", "8", "0.125"]
    assert float(rows[0][3]) >= 0.125


def test_verify_undecorated_lattice(tmp_path):
    assert main(["verify", "--lattice", "square", "--E", "0", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "verify.txt").read_text()
    assert "PASS E=0: no jump detected; no compact eigenfunction found" in text
    assert text.endswith("verdict PASS\n")


def test_verify_reports_failure(tmp_path):
    args = ["verify", "--lattice", "square", "--E", "0", "--weight-floor", "0.01", "--out", str(tmp_path)]
    assert main(args) == 1
    text = (tmp_path / "verify.txt").read_text()
    assert "FAIL E=0:" in text
    assert text.endswith("verdict FAIL\n")


@pytest.mark.parametrize("args", [
    ["generate", "--weight-floor", "-1"],
    ["generate", "--rule", "decorated"],
    ["generate", "--decorate", "r=abc"],
    ["generate", "--config", "missing.yaml"],
    ["decorate"],
])
def test_invalid_input_exits_with_2(tmp_path, args):
    assert main(args + ["--out", str(tmp_path)]) == 2
    assert not (tmp_path / "points.txt").exists()


def test_invalid_config_file_exits_with_2(tmp_path):
    assert main(["generate", "--config", _config(tmp_path, colour="red"), "--out", str(tmp_path)]) == 2
    dense = _config(tmp_path, spacing=0.4, decorate=True)
    assert main(["generate", "--config", dense, "--L", "3", "--out", str(tmp_path)]) == 2


def test_decoration_scale_argument():
    assert decoration_scale("r=0.3") == 0.3
    assert decoration_scale("0.3") == 0.3
    assert decoration_scale("") is None
    with pytest.raises(ConfigError):
        decoration_scale("r=")


def test_config_validation():
    config = ExperimentConfig.load()
    assert config.rule_kind == "nn"
    assert config.override(decorate=True).rule_kind == "decorated"
    with pytest.raises(ConfigError):
        ExperimentConfig().override(threshold=0.5, decorate=True).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig().override(L=[4, 4]).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig().override(nonsense=1)


@pytest.mark.slow
def test_verify_decorated_lattice(tmp_path):
    for name in ("first", "second"):
        args = ["verify", "--lattice", "square", "--decorate", "--E", "0", "--out", str(tmp_path / name)]
        assert main(args) == 0
    text = (tmp_path / "first" / "verify.txt").read_text()
    assert "compact eigenfunction found" in text
    assert "residual_ok=true" in text
    assert "satisfied=true" in text
    assert text.endswith("verdict PASS\n")
    assert (tmp_path / "first" / "verify.txt").read_bytes() == (tmp_path / "second" / "verify.txt").read_bytes()
