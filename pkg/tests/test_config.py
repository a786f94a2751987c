import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlwave import config as cfg
from nlwave.config import ConfigError


def test_solitary_defaults():
    c = cfg.load(None, [], command="run")
    assert c.initial_data.preset == "solitary"
    assert (c.grid.h, c.grid.x_left, c.grid.x_right) == (0.125, -30.0, 30.0)
    assert c.integrator.t_end == 20.0
    assert c.integrator.rel_tol == c.integrator.abs_tol == 1e-10


def test_blowup_preset_grid():
    c = cfg.load(None, [], command="blowup")
    assert (c.grid.h, c.grid.x_left, c.grid.x_right, c.integrator.t_end) == (0.1, -10.0, 10.0, 10.0)
    c = cfg.load(None, ["--initial_data", "blowup-gaussian"], command="run")
    assert c.grid.h == 0.1


def test_kernel_alias():
    assert cfg.load(None, ["--kernel", "triangle"], command="run").kernel.name == "triangle"


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# a comment\ncommand = run\n\ngrid.h = 0.25  # inline\nintegrator.rel_tol = 1e-8\n")
    c = cfg.load(path, ["--grid.h", "0.5"])
    assert c.grid.h == 0.5 and c.integrator.rel_tol == 1e-8
    c = cfg.load(path, ["--grid.h=0.5", "--integrator.rel-tol", "1e-6"])
    assert c.integrator.rel_tol == 1e-6


@pytest.mark.parametrize("flags,key", [
    (["--grid.h", "0.3", "--grid.x_left", "-1", "--grid.x_right", "1"], "grid.h"),
    (["--kernel", "gauss"], "kernel.name"),
    (["--grid.x_left", "5", "--grid.x_right", "1"], "grid.x_left"),
    (["--integrator.rel_tol", "0"], "integrator.rel_tol"),
    (["--integrator.method", "rk4_fixed"], "integrator.dt"),
    (["--output.format", "xml"], "output.format"),
    (["--nope", "1"], "nope"),
    (["--grid.h", "abc"], "grid.h"),
    (["--initial_data", "missing-file.txt"], "initial_data.preset"),
])
def test_errors_name_field(flags, key):
    with pytest.raises(ConfigError) as info:
        cfg.load(None, flags, command="run")
    assert info.value.key == key
    assert "\n" not in str(info.value)


def test_missing_command():
    with pytest.raises(ConfigError) as info:
        cfg.parse("grid.h = 0.1\n")
    assert info.value.key == "command"


def test_missing_required_list():
    with pytest.raises(ConfigError) as info:
        cfg.load(None, ["--study.h_list", ""], command="converge")
    assert info.value.key == "study.h_list"


def test_malformed_line():
    with pytest.raises(ConfigError):
        cfg.parse("command run\n")


def test_error_messages_distinct():
    msgs = set()
    for flags in (["--kernel", "gauss"], ["--grid.h", "0.3", "--grid.x_left", "-1", "--grid.x_right", "1"]):
        with pytest.raises(ConfigError) as info:
            cfg.load(None, flags, command="run")
        msgs.add(str(info.value))
    with pytest.raises(ConfigError) as info:
        cfg.parse("grid.h = 0.1\n")
    msgs.add(str(info.value))
    assert len(msgs) == 3


@pytest.mark.parametrize("command", cfg.COMMANDS)
def test_round_trip_defaults(command):
    c = cfg.load(None, [], command=command)
    assert cfg.parse(cfg.emit(c)) == c


@given(
    st.sampled_from(cfg.COMMANDS),
    st.sampled_from(["exp", "lorentz", "sech2", "triangle"]),
    st.sampled_from([0.5, 0.25, 0.125, 0.1, 0.05]),
    st.integers(1, 40),
    st.floats(1e-12, 1e-3),
    st.lists(st.floats(0.01, 4.0), min_size=1, max_size=5),
    st.sampled_from(["csv", "json"]),
)
def test_round_trip(command, kernel, h, n, tol, hs, fmt):
    flags = ["--kernel", kernel, "--grid.h", repr(h), "--grid.x_left", repr(-n * h), "--grid.x_right", repr(n * h),
             "--integrator.rel_tol", repr(tol), "--study.h_list", ",".join(map(repr, hs)), "--format", fmt]
    c = cfg.load(None, flags, command=command)
    assert cfg.parse(cfg.emit(c)) == c
