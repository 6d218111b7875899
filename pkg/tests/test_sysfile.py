import math
from pathlib import Path

import pytest

from qattract.errors import ConfigError
from qattract.sysfile import parse_system_file, parse_system_text

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_parse_varactor_config():
    cfg = parse_system_file(CONFIG_DIR / "varactor_p1.cfg")
    assert cfg.gamma == 9.0
    assert cfg.g.kind == "even" and cfg.g.p == 1
    assert cfg.forcing.f0 == 2.5
    assert cfg.forcing.coeffs[(1,)] == pytest.approx(-0.75j)
    assert cfg.freq.omega == (1.0,)


def test_parse_two_frequency_config():
    cfg = parse_system_file(CONFIG_DIR / "golden_two_freq.cfg")
    assert cfg.freq.dim == 2
    assert cfg.freq.tau == 1.1
    assert cfg.forcing.coeffs[(0, -1)] == pytest.approx(0.25)
    assert cfg.gamma == 12.0


def test_unknown_key_is_named_with_line():
    text = "[params]\ngamma = 9\nwibble = 3\n"
    with pytest.raises(ConfigError, match="wibble") as err:
        parse_system_text(text)
    assert err.value.line == 3


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match=r"\[magic\]"):
        parse_system_text("[magic]\nx = 1\n")


def test_missing_gamma():
    text = "[forcing]\n0 = 1, 0\n[freq]\nomega = 1\n[nonlinearity]\nkind = odd\np = 1\n"
    with pytest.raises(ConfigError, match="gamma"):
        parse_system_text(text)


def test_omega_dimension_mismatch():
    text = (
        "[forcing]\ndim = 2\n0 0 = 1, 0\n[freq]\nomega = 1\n"
        "[nonlinearity]\nkind = odd\np = 1\n[params]\ngamma = 5\n"
    )
    with pytest.raises(ConfigError, match="omega"):
        parse_system_text(text)


def test_poly_coefficient_count_checked():
    text = (
        "[forcing]\n0 = 1, 0\n[freq]\nomega = 1\n"
        "[nonlinearity]\nkind = poly\np = 1\ncoeffs = 1, 2\n[params]\ngamma = 5\n"
    )
    with pytest.raises(ConfigError, match="coefficients"):
        parse_system_text(text)


def test_bad_amplitude_reports_mode():
    text = "[forcing]\n0 = fish\n[freq]\nomega = 1\n[nonlinearity]\nkind = odd\np = 1\n[params]\ngamma = 5\n"
    with pytest.raises(ConfigError, match="mode '0'"):
        parse_system_text(text)


def test_comments_and_spacing_tolerated():
    text = """
    # leading comment
    [forcing]
    0 = 2.5, 0   # the average
    [freq]
    omega = 1.0
    [nonlinearity]
    kind = odd
    p = 2
    [params]
    gamma = 7
    """
    cfg = parse_system_text(text)
    assert cfg.g.p == 2 and cfg.gamma == 7.0
    assert math.isclose(cfg.epsilon, 1.0 / 7.0)
