import itertools

import pytest
from hypothesis import given, strategies as st

from drlpower.core import (N_ACTIONS, N_STATES, NodeState, PowerAction, apply_action,
                           decode_state, encode_state)


def enumerate_states():
    """Independent enumeration in power-major order."""
    return itertools.product(range(0, 21), range(0, 71), range(-110, -39))


@pytest.mark.parametrize("state, index", [
    ((0, 0, -110), 0),
    ((20, 70, -40), 105_860),
    ((1, 0, -110), 5_041),
])
def test_encode_examples(state, index):
    assert encode_state(NodeState(*state)) == index
    assert decode_state(index) == NodeState(*state)


def test_enumeration_oracle_agrees_with_encoding():
    for i, (p, q, s) in enumerate(enumerate_states()):
        s_obj = NodeState(p, q, s)
        assert encode_state(s_obj) == i
        assert decode_state(i) == s_obj
    assert i + 1 == N_STATES == 105_861
    assert N_STATES * N_ACTIONS == 317_583


@pytest.mark.parametrize("bad", [(21, 0, -110), (-1, 0, -110), (0, 71, -110), (0, 0, -39), (0, 0, -111)])
def test_state_range_errors(bad):
    with pytest.raises(ValueError):
        NodeState(*bad)


@pytest.mark.parametrize("index", [-1, 105_861])
def test_decode_range_error(index):
    with pytest.raises(ValueError):
        decode_state(index)


def test_actions():
    assert len(PowerAction) == 3
    assert [a.index for a in PowerAction] == [0, 1, 2]
    assert PowerAction.from_index(0) is PowerAction.DOWN
    assert apply_action(10, PowerAction.UP) == 11
    assert apply_action(20, PowerAction.UP) == 20
    assert apply_action(0, PowerAction.DOWN) == 0


@given(st.integers(0, 20), st.sampled_from(list(PowerAction)))
def test_apply_action_stays_in_range(p, a):
    q = apply_action(p, a)
    assert 0 <= q <= 20
    assert abs(q - p) <= 1
