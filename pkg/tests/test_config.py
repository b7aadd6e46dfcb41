import pytest

from pulsefront.config import parse_config
from pulsefront.errors import ConfigError

MIN_1D = "[medium]\ndim = 1\ntheta0 = 0.3\n"
MED_2D = "[medium]\ndim = 2\ntheta0 = 0.3\nmodes = [[1, 0, 0.1, 0.0]]\n"


def errors_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.errors


def test_minimal_defaults():
    cfg = parse_config(MIN_1D)
    assert cfg.cylinder.L == 40 and cfg.cylinder.n_xi == 2048
    assert cfg.cylinder.n_y == 1
    assert cfg.stages == ["medium"]
    assert cfg.output.dir == "pulsefront_out"


def test_two_d_default_n_y():
    assert parse_config(MED_2D).cylinder.n_y == 16


def test_alpha_ordering_error():
    errs = errors_of(MIN_1D + "[spread]\nalpha = 0.3\n")
    assert len(errs) == 1
    assert "α < inf θ_x" in errs[0] and errs[0].startswith("line 5:")


def test_beta_ordering_error():
    errs = errors_of(MED_2D + "[spread]\nbeta = 0.35\n")
    assert "sup θ_x" in errs[0] and "β < 1" in errs[0]


def test_duplicate_key_names_both_lines():
    errs = errors_of("[medium]\ntheta0 = 0.3\ndim = 1\ntheta0 = 0.4\n")
    assert errs == ["line 4: duplicate key 'theta0' in [medium] (first set on line 2)"]


def test_unknown_key_and_section():
    errs = errors_of(MIN_1D + "[cylinder]\nLL = 3\n[bogus]\n")
    assert any("unknown key 'LL'" in e and e.startswith("line 5") for e in errs)
    assert any("unknown section [bogus]" in e for e in errs)


def test_syntax_errors_are_located():
    errs = errors_of("[medium\ntheta0 0.3\n")
    assert errs[0].startswith("line 1:") and errs[1].startswith("line 2:")


def test_type_errors():
    errs = errors_of(MIN_1D + "[cylinder]\nn_xi = 20.5\n")
    assert "must be an integer" in errs[0]


def test_verdict_without_sweep_is_config_error():
    errs = errors_of(MED_2D + "[spread]\nbeta = 0.6\nverdict = true\n")
    assert any("needs a [sweep]" in e for e in errs)


def test_verify_needs_enough_angles():
    errs = errors_of(MED_2D + "[sweep]\nn_angles = 8\n[verify]\n")
    assert any("n_angles >= 32" in e for e in errs)


def test_coarse_cylinder_rejected():
    errs = errors_of(MIN_1D + "[cylinder]\nL = 40\nn_xi = 101\n")
    assert "exceeds 0.25" in errs[0]


def test_named_experiments_and_comments():
    cfg = parse_config(MED_2D + "# comment\n[spread.a]\nbeta = 0.6  # tail\n[spread.b]\nalpha = 0.1\nR = 5\n")
    assert [s.name for s in cfg.spread] == ["a", "b"]
    assert cfg.spread[1].R == 5.0 and isinstance(cfg.spread[1].R, float)
    assert cfg.stages == ["medium", "spread"]


def test_hash_ignores_output_dir():
    a = parse_config(MIN_1D + "[output]\ndir = x\n")
    b = parse_config(MIN_1D + "[output]\ndir = y\n")
    c = parse_config(MIN_1D + "[cylinder]\nL = 30\n")
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 64


def test_invalid_medium_reported():
    errs = errors_of("[medium]\ntheta0 = 1.2\n")
    assert errs[0].startswith("[medium]:")
