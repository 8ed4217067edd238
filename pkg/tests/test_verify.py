import pytest

from src.cli.verify import REQUIRED_PASS_RATE, verify
from src.model.types import SystemParams


@pytest.fixture(scope="module")
def report():
    return verify(SystemParams(), n_samples=200_000, seed=1)


def test_grid_covers_every_scenario(report):
    assert len(report.points) == 36
    assert {point.scenario for point in report.points} == {"su_idle", "su_busy", "pu"}
    assert {point.k for point in report.points} == {0, 1, 2, 4}
    assert {point.power for point in report.points} == {5e-11, 1e-10, 2e-10, 4e-10}


def test_reference_parameters_pass(report):
    assert report.passed
    assert report.pass_rate >= REQUIRED_PASS_RATE
    assert not any(point.wide for point in report.points)


def test_small_sample_widens_intervals():
    small = verify(SystemParams(), n_samples=100, seed=2)
    assert any(point.wide for point in small.points)
    assert small.pass_rate >= REQUIRED_PASS_RATE


def test_noise_free_solo_link_matches_exactly():
    quiet = verify(SystemParams(noise_N0=0.0), n_samples=1_000, seed=0)
    solo = [p for p in quiet.points if p.scenario == "su_idle" and p.k == 0]
    assert len(solo) == 3
    for point in solo:
        assert point.closed_form == 1.0
        assert point.estimate == 1.0
        assert point.std_err == 0.0
        assert point.z == 0.0
        assert point.passed


def test_frame_has_one_row_per_point(report):
    frame = report.frame()
    assert len(frame) == 36
    assert {"closed_form", "estimate", "std_err", "z", "wide", "passed"} <= set(frame.columns)


def test_rejects_empty_sample():
    with pytest.raises(ValueError):
        verify(SystemParams(), n_samples=0)
