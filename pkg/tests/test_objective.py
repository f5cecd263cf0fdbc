import numpy as np
import pytest
from hypothesis import given, strategies as st

from treehvac.building import OFF_ACTION, VALID_ACTIONS, SetpointAction, ZoneState
from treehvac.objective import (
    WINTER_COMFORT, ComfortRange, RewardConfig, comfort_violation, energy_proxy, energy_proxy_array, reward,
    reward_array,
)


def test_energy_proxy_values():
    assert energy_proxy(OFF_ACTION) == 0
    assert energy_proxy(SetpointAction(22, 26)) == 11


def test_reward_hand_values():
    cfg = RewardConfig()
    assert reward(ZoneState(21.0), OFF_ACTION, False, cfg) == 0
    # proxy 10 at 24.5 occupied: 1 degC above the band
    a = SetpointAction(20, 25)
    assert energy_proxy(a) == 10
    assert reward(ZoneState(24.5), a, True, cfg) == pytest.approx(-0.01 * 10 - 0.99 * 1.0, abs=1e-12)
    assert reward(ZoneState(24.5), a, True, cfg) == pytest.approx(-1.09, abs=1e-12)
    assert reward(ZoneState(19.0), OFF_ACTION, True, cfg) == pytest.approx(-0.99, abs=1e-12)


def test_unoccupied_is_energy_only():
    cfg = RewardConfig()
    assert reward(ZoneState(5.0), SetpointAction(20, 24), False, cfg) == -energy_proxy(SetpointAction(20, 24))


@given(st.floats(-10, 40), st.sampled_from(VALID_ACTIONS), st.booleans())
def test_reward_nonpositive_and_vectorised(temp, a, occ):
    cfg = RewardConfig()
    r = reward(temp, a, occ, cfg)
    assert r <= 0
    v = reward_array(np.array([temp]), np.array([a.heat_sp]), np.array([a.cool_sp]), occ, cfg)
    assert v[0] == pytest.approx(r, abs=1e-12)
    assert energy_proxy_array(a.heat_sp, a.cool_sp) == energy_proxy(a)


def test_comfort_violation_piecewise():
    assert comfort_violation(21.0, WINTER_COMFORT) == 0
    assert comfort_violation(19.5, WINTER_COMFORT) == pytest.approx(0.5)
    assert comfort_violation(25.0, WINTER_COMFORT) == pytest.approx(1.5)


def test_comfort_range_validation():
    with pytest.raises(ValueError):
        ComfortRange(24, 20)
    assert WINTER_COMFORT.median == 21.75
