"""Scoring rules against hand-evaluated values and a straight-line oracle."""

import math
import random
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanetrust.reputation import (
    AUTHENTIC,
    FORGED,
    INITIAL_SCORE,
    EventContext,
    ReputationRecord,
    UnknownParticipantError,
    assign_sequences,
    clamp,
    judge_event,
    penalty,
    reward,
)

import oracles


def alert(pu: bytes, ts: int, level: int = 1):
    return SimpleNamespace(sender_pu=pu, timestamp_ms=ts, level=level)


def disclosure(pu: bytes, ts: int):
    return SimpleNamespace(sender_pu=pu, timestamp_ms=ts)


def records_for(initial: dict[bytes, float]) -> dict[bytes, ReputationRecord]:
    return {pu: ReputationRecord(owner=pu, score=score)
            for pu, score in initial.items()}


def test_reward_frozen_values():
    assert reward(1, 0, 1.0, 0.05) == pytest.approx(0.05, abs=0)
    assert reward(3, 0, 1.0, 0.05) == pytest.approx(0.05 / 3, rel=1e-15)
    assert reward(1, 2, 2.0, 0.05) == pytest.approx(0.1 / math.e**2, rel=1e-15)


def test_penalty_frozen_values():
    assert penalty(1, 0, 1.0, 0.1) == pytest.approx(-0.1, abs=0)
    assert penalty(2, 1, 2.0, 0.1) == pytest.approx(-0.2 / (2 * math.e), rel=1e-15)


def test_penalty_is_minus_beta_over_alpha_times_reward():
    rng = random.Random(31)
    for _ in range(100):
        level = rng.choice((1, 2, 3))
        seq = rng.randrange(0, 6)
        d_r = rng.uniform(0.05, 3.0)
        alpha = rng.uniform(0.01, 0.2)
        beta = rng.uniform(0.01, 0.4)
        assert penalty(level, seq, d_r, beta) == pytest.approx(
            -(beta / alpha) * reward(level, seq, d_r, alpha), rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(level=0, sequence=0, rel_density=1.0),
    dict(level=4, sequence=0, rel_density=1.0),
    dict(level=1, sequence=-1, rel_density=1.0),
    dict(level=1, sequence=0.5, rel_density=1.0),
    dict(level=1, sequence=0, rel_density=0.0),
    dict(level=1, sequence=0, rel_density=-2.0),
])
def test_factor_validation(kwargs):
    with pytest.raises(ValueError):
        reward(kwargs["level"], kwargs["sequence"], kwargs["rel_density"])
    with pytest.raises(ValueError):
        penalty(kwargs["level"], kwargs["sequence"], kwargs["rel_density"])


def test_coefficients_must_be_positive():
    with pytest.raises(ValueError):
        reward(1, 0, 1.0, alpha=0.0)
    with pytest.raises(ValueError):
        penalty(1, 0, 1.0, beta=-0.1)


def test_assign_sequences_orders_by_time_then_key():
    a, b, c = b"\xaa" * 32, b"\xbb" * 32, b"\xcc" * 32
    assert assign_sequences([alert(a, 5)]) == {a: 0}
    assert assign_sequences([alert(a, 3), alert(b, 1), alert(c, 2)]) == {b: 0, c: 1, a: 2}
    # equal stamps fall back to key bytes
    assert assign_sequences([alert(b, 7), alert(a, 7)]) == {a: 0, b: 1}
    # repeated sender keeps its earliest stamp
    assert assign_sequences([alert(a, 9), alert(b, 2), alert(a, 1)]) == {a: 0, b: 1}


def test_event_context_derives_factors():
    a, d = b"\x01" * 32, b"\x02" * 32
    ctx = EventContext.for_event([alert(a, 1, level=2)], [disclosure(d, 3)],
                                 density=30.0)
    assert ctx.level == 2
    assert ctx.rel_density == pytest.approx(1.5)
    assert ctx.sender_seq == {a: 0}
    assert ctx.discloser_seq == {d: 0}
    with pytest.raises(ValueError):
        EventContext.for_event([], [], density=20.0)


def test_worked_example_undisputed_sender():
    pu = b"\x0a" * 32
    scores = records_for({pu: 50.0})
    ctx = EventContext.for_event([alert(pu, 1)], [], density=20.0)
    changes = judge_event([alert(pu, 1)], [], ctx, AUTHENTIC, scores)
    assert scores[pu].score == pytest.approx(52.5, abs=0)
    (change,) = changes
    assert (change.role, change.sequence) == ("sender", 0)
    assert change.before == 50.0 and change.after == pytest.approx(52.5)


def test_worked_example_forged_sender_and_discloser():
    sender, discloser = b"\x0b" * 32, b"\x0c" * 32
    scores = records_for({sender: 80.0, discloser: 60.0})
    alerts = [alert(sender, 1)]
    discs = [disclosure(discloser, 2)]
    ctx = EventContext.for_event(alerts, discs, density=20.0)
    judge_event(alerts, discs, ctx, FORGED, scores)
    assert scores[sender].score == pytest.approx(72.0, abs=0)
    assert scores[discloser].score == pytest.approx(62.5, abs=0)


def test_worked_example_disputed_authentic_discloser():
    sender, discloser = b"\x0d" * 32, b"\x0e" * 32
    scores = records_for({sender: 50.0, discloser: 60.0})
    alerts = [alert(sender, 1)]
    discs = [disclosure(discloser, 2)]
    ctx = EventContext.for_event(alerts, discs, density=20.0)
    judge_event(alerts, discs, ctx, AUTHENTIC, scores)
    assert scores[discloser].score == pytest.approx(57.5, abs=0)
    assert scores[sender].score == pytest.approx(52.5, abs=0)  # senders as undisputed


def run_random_case(rng):
    pool = [bytes([i]) * 32 for i in range(10)]
    senders = rng.sample(pool, rng.randrange(1, 6))
    disclosers = rng.sample(pool, rng.randrange(0, 5))
    level = rng.choice((1, 2, 3))
    density = rng.uniform(1.0, 60.0)
    alpha = rng.uniform(0.01, 0.2)
    beta = rng.uniform(0.01, 0.4)
    truth = rng.choice((AUTHENTIC, FORGED))
    alerts = [alert(pu, rng.randrange(0, 5), level) for pu in senders]
    discs = [disclosure(pu, rng.randrange(0, 5)) for pu in disclosers]
    initial = {pu: rng.uniform(0.0, 100.0) for pu in set(senders) | set(disclosers)}

    scores = records_for(initial)
    ctx = EventContext.for_event(alerts, discs, density=density)
    judge_event(alerts, discs, ctx, truth, scores, alpha=alpha, beta=beta)

    expected = oracles.algorithm1(
        oracles.rank([(m.sender_pu, m.timestamp_ms) for m in alerts]),
        oracles.rank([(m.sender_pu, m.timestamp_ms) for m in discs]),
        level, density / 20.0, truth, initial, alpha, beta)
    for pu, want in expected.items():
        got = scores[pu].score
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12), (
            truth, pu.hex()[:4], want, got)


def test_judge_event_matches_straight_line_oracle():
    rng = random.Random(2026)
    for _ in range(300):
        run_random_case(rng)


def test_judge_event_error_paths():
    pu = b"\x0f" * 32
    scores = records_for({pu: 50.0})
    ctx = EventContext.for_event([alert(pu, 1)], [], density=20.0)
    with pytest.raises(ValueError):
        judge_event([], [], ctx, AUTHENTIC, scores)
    with pytest.raises(ValueError):
        judge_event([alert(pu, 1)], [], ctx, "maybe", scores)
    with pytest.raises(UnknownParticipantError):
        judge_event([alert(pu, 1)], [], ctx, AUTHENTIC, {})


def test_scores_clamp_to_bounds():
    high, low = b"\x10" * 32, b"\x11" * 32
    scores = records_for({high: 99.9, low: 0.4})
    alerts = [alert(high, 1)]
    discs = [disclosure(low, 2)]
    ctx = EventContext.for_event(alerts, discs, density=60.0)  # D_r = 3
    judge_event(alerts, discs, ctx, AUTHENTIC, scores, alpha=0.4, beta=0.4)
    assert scores[high].score == 100.0
    assert scores[low].score == 0.0


def test_fixed_points():
    top, bottom = b"\x12" * 32, b"\x13" * 32
    scores = records_for({top: 100.0, bottom: 0.0})
    ctx = EventContext.for_event([alert(top, 1)], [], density=20.0)
    judge_event([alert(top, 1)], [], ctx, AUTHENTIC, scores)
    assert scores[top].score == 100.0

    alerts = [alert(bottom, 1)]
    discs = [disclosure(top, 2)]
    ctx = EventContext.for_event(alerts, discs, density=20.0)
    judge_event(alerts, discs, ctx, FORGED, scores)
    assert scores[bottom].score == 0.0


def test_reputation_record_history():
    rec = ReputationRecord(owner=b"\x14" * 32)
    assert rec.score == INITIAL_SCORE
    delta = rec.apply(1000, 140.0, "test")
    assert rec.score == 100.0  # clamped before recording
    assert delta == pytest.approx(50.0)
    assert rec.history == [(1000, pytest.approx(50.0), "test")]


@settings(max_examples=80, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=100.0),
    st.integers(min_value=0, max_value=8),
    st.sampled_from((1, 2, 3)),
    st.floats(min_value=0.05, max_value=3.0),
)
def test_bounds_hold_for_any_single_update(score, seq, level, d_r):
    r = reward(level, seq, d_r)
    p = penalty(level, seq, d_r)
    assert 0.0 <= clamp(score + (100.0 - score) * r) <= 100.0
    assert 0.0 <= clamp(score * (1.0 + p)) <= 100.0
    assert 0.0 <= clamp(score + 25.0 * p) <= 100.0
    assert 0.0 <= clamp(score + 50.0 * r) <= 100.0


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10), st.sampled_from((1, 2, 3)),
       st.floats(min_value=0.05, max_value=3.0))
def test_monotone_incentives(seq, level, d_r):
    # earlier reporters earn strictly more; level 1 pays the most
    assert reward(level, seq, d_r) > reward(level, seq + 1, d_r)
    if level > 1:
        assert reward(1, seq, d_r) > reward(level, seq, d_r)
    assert penalty(level, seq, d_r) < 0 < reward(level, seq, d_r)
