import math

import pytest

from app.harness import ConfigError, RunConfig, get_config, output_dir, set_config, thread_limit
from app.harness.config import OUTPUT_ENV, THREADS_ENV

SMALL = "grid.nx = 16\ngrid.ny = 16\n"


def test_defaults_are_valid():
    config = RunConfig()
    assert config.validate()
    assert config.scenario.name == "orszag-tang-25d"
    assert config.reports.list == ["auto"]
    assert math.isclose(config.grid.Lx, 2 * math.pi)


def test_parses_sections_and_types():
    config = RunConfig.from_text(
        "# 注释行\n"
        "grid.nx = 32\n"
        "grid.ny = 16\n"
        "eos.gamma = 1.4\n"
        "scenario.magnetic = off\n"
        "scenario.labels = psi, chi\n"
        "reports.list = pv,bianchi  # 行尾注释\n"
        "convergence.floor.eq1.3 = 2.5\n"
    )
    assert (config.grid.nx, config.grid.ny) == (32, 16)
    assert config.eos.gamma == 1.4
    assert config.scenario.magnetic is False
    assert config.scenario.labels == ["psi", "chi"]
    assert config.reports.list == ["pv", "bianchi"]
    assert config.convergence.floor == {"eq1.3": 2.5}


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text(SMALL + "grid.bogus = 3\n")
    assert info.value.line == 3
    assert str(info.value).startswith("第 3 行")


def test_line_counts_blank_lines_and_comments():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text("grid.nx = 16\n\n# 注释\n\nscenario.magnetic = maybe\n")
    assert info.value.line == 5


@pytest.mark.parametrize(
    "text, line",
    [
        ("run.cfl = fast\n", 1),
        (SMALL + "scenario.ertel = perhaps\n", 3),
        (SMALL + "grid.order\n", 3),
        ("unknown.key = 1\n", 1),
        ("nosection = 1\n", 1),
        ("convergence.floor = 2\n", 1),
    ],
)
def test_malformed_lines(text, line):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text(text)
    assert info.value.line == line


@pytest.mark.parametrize(
    "text",
    [
        "run.t_end = 0\n",
        "run.cfl = 1.5\n",
        "run.mode = implicit\n",
        "run.cadence = -1\n",
        "run.interp_order = 2\n",
        "convergence.levels = 1\n",
        "convergence.norm = L1\n",
        "debug.lorentz_sign = 0.5\n",
        "grid.nx = 8\n",
        "eos.gamma = 1.0\n",
    ],
)
def test_validation_rejects_out_of_range(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(SMALL + text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "absent.cfg")


def test_from_file_keeps_source_and_text(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL, encoding="utf-8")
    config = RunConfig.from_file(path)
    assert config.source == str(path)
    assert config.text == SMALL


def test_refined_doubles_active_axes_only():
    config = RunConfig.from_text(SMALL + "grid.nz = 1\n")
    fine = config.refined(2)
    assert (fine.grid.nx, fine.grid.ny, fine.grid.nz) == (32, 32, 1)
    assert fine.text == ""
    assert config.grid.nx == 16
    assert config.refined(1) is config


def test_sha256_tracks_text():
    a = RunConfig.from_text(SMALL)
    b = RunConfig.from_text(SMALL)
    c = RunConfig.from_text(SMALL + "run.t_end = 0.1\n")
    assert a.sha256 == b.sha256
    assert a.sha256 != c.sha256
    assert len(a.refined(2).sha256) == 64
    assert a.refined(2).sha256 != a.sha256


def test_to_dict_has_every_section():
    payload = RunConfig().to_dict()
    assert set(payload) == {"grid", "eos", "scenario", "run", "reports", "output", "convergence", "verify", "debug"}
    assert payload["grid"]["nx"] == 64


def test_output_dir_priority(monkeypatch, tmp_path):
    config = RunConfig.from_text(SMALL + "output.dir = from_config\n")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert output_dir(config).name == "from_config"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from_env"))
    assert output_dir(config) == tmp_path / "from_env"
    assert output_dir(config, tmp_path / "cli") == tmp_path / "cli"


@pytest.mark.parametrize("raw, expected", [("", 1), ("3", 3), ("0", 1), ("many", 1)])
def test_thread_limit(monkeypatch, raw, expected):
    monkeypatch.setenv(THREADS_ENV, raw)
    assert thread_limit() == expected


def test_global_config_roundtrip():
    previous = get_config()
    config = RunConfig.from_text(SMALL)
    try:
        set_config(config)
        assert get_config() is config
    finally:
        set_config(previous)
