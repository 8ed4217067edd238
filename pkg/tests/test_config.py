import sys
from pathlib import Path

import pytest

from src.cli.config import DEFAULT_LAMBDA_GRID, parse_config
from src.model.errors import ConfigError
from src.model.types import Constraints, SystemParams


def test_empty_document_gives_reference_defaults():
    params, constraints, spec = parse_config("")
    assert params == SystemParams()
    assert constraints == Constraints()
    assert params.num_su_Ms == 3
    assert spec.ms_list == [3]
    assert spec.e_th_su_list == [5e-5]
    assert spec.lambda_grid == DEFAULT_LAMBDA_GRID
    assert spec.lambda_grid[0] == 0.0
    assert spec.lambda_grid[-1] == 0.9
    assert len(spec.lambda_grid) == 19
    assert spec.modes == ["adaptive", "fixed", "conventional"]
    assert spec.n_starts == 1000
    assert spec.seed == 0
    assert not spec.sim_validate


def test_values_and_comments():
    text = """
# three users, tighter cap
num_su_Ms = 3
gamma_p = 2e-10   # louder primary
e_th_su_list = [1e-1, 5e-6, 1e-7]
lambda_grid = [0.1, 0.2]
modes = ["adaptive", "conventional"]
sim_validate = true
"""
    params, _, spec = parse_config(text)
    assert params.gamma_p == 2e-10
    assert spec.e_th_su_list == [1e-1, 5e-6, 1e-7]
    assert spec.lambda_grid == [0.1, 0.2]
    assert spec.modes == ["adaptive", "conventional"]
    assert spec.sim_validate


def test_single_values_feed_the_grids():
    _, constraints, spec = parse_config("num_su_Ms = 5\ne_th_su = 1e-6\n")
    assert spec.ms_list == [5]
    assert spec.e_th_su_list == [1e-6]
    assert constraints.e_th_su == 1e-6


def test_sensing_longer_than_slot_names_the_key():
    with pytest.raises(ConfigError) as caught:
        parse_config("sense_tau = 2e-3\n")
    assert caught.value.key == "sense_tau"
    assert caught.value.line == 1
    assert "sense_tau must be smaller than slot_T" in caught.value.message


def test_unknown_key():
    with pytest.raises(ConfigError) as caught:
        parse_config("# comment\nnum_users = 4\n")
    assert caught.value.key == "num_users"
    assert caught.value.line == 2
    assert "line 2" in str(caught.value)


def test_type_mismatch():
    with pytest.raises(ConfigError) as caught:
        parse_config('seed = 1\nnum_su_Ms = "three"\n')
    assert caught.value.key == "num_su_Ms"
    assert caught.value.line == 2


@pytest.mark.parametrize(
    "text, key",
    [
        ("lambda_grid = [0.2, 1.5]", "lambda_grid"),
        ("lambda_grid = []", "lambda_grid"),
        ("ms_list = [0]", "ms_list"),
        ('modes = ["adaptive", "greedy"]', "modes"),
        ("lambda_p = -0.1", "lambda_p"),
        ("delta_ss = 0", "delta_ss"),
    ],
)
def test_invalid_values(text, key):
    with pytest.raises(ConfigError) as caught:
        parse_config(text)
    assert caught.value.key == key
    assert caught.value.line == 1


def test_tables_are_rejected():
    with pytest.raises(ConfigError) as caught:
        parse_config("[extra]\nx = 1\n")
    assert caught.value.key == "extra"


def test_malformed_document():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("slot_T = \n")


def test_interpreter_meets_declared_floor():
    root = Path(__file__).resolve().parent.parent
    floor = tuple(int(part) for part in (root / ".python-version").read_text().split("."))
    assert floor >= (3, 11)
    assert "3.11" in (root / "requirements.txt").read_text().splitlines()[0]
    assert sys.version_info[:2] >= floor
