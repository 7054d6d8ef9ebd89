"""Reputation scoring: message taxonomy, reward/penalty factors, and the
per-event evaluation run by the law-enforcement authority.

Factors: alert level L in {1,2,3} (1 most critical), sender sequence S
(0 for the first broadcaster of an event), and relative density
D_r = local density / 20 vehicles per km. The reward and penalty are

    reward  =  alpha * D_r / (e^S * L)
    penalty = -beta  * D_r / (e^S * L)

Per event the updates are:

* undisputed: every sender gets R <- R + (100 - R) * reward(L, S_i, D_r)
* disputed, authentic: senders as above; every discloser gets
  R <- R + 25 * penalty(L, S_j, D_r)
* disputed, forged: every sender gets R <- R * (1 + penalty(L, S_i, D_r));
  every discloser gets R <- R + 50 * reward(L, S_j, D_r)

Scores are clamped to [0, 100] after every line. Defaults alpha=0.05,
beta=0.1 (punish harder than reward); initial score 50, the scale midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

DEFAULT_ALPHA = 0.05
DEFAULT_BETA = 0.1
AVERAGE_DENSITY = 20.0  # vehicles per km
INITIAL_SCORE = 50.0
SCORE_MIN = 0.0
SCORE_MAX = 100.0

ALERT_LEVELS = (1, 2, 3)

AUTHENTIC = "authentic"
FORGED = "forged"

CLAIM_FORGED = 1
CLAIM_MISBEHAVIOR = 2


class UnknownParticipantError(Exception):
    """An event participant has no reputation record; the event is deferred."""


def _check_factors(level: int, sequence: int, rel_density: float, coeff: float,
                   coeff_name: str) -> None:
    if level not in ALERT_LEVELS:
        raise ValueError(f"alert level must be one of {ALERT_LEVELS}, got {level}")
    if not isinstance(sequence, int) or sequence < 0:
        raise ValueError(f"sender sequence must be a non-negative integer, got {sequence}")
    if not rel_density > 0:
        raise ValueError(f"relative density must be positive, got {rel_density}")
    if not coeff > 0:
        raise ValueError(f"{coeff_name} must be positive, got {coeff}")


def reward(level: int, sequence: int, rel_density: float,
           alpha: float = DEFAULT_ALPHA) -> float:
    """Positive share for honest participation; decays with sequence and level."""
    _check_factors(level, sequence, rel_density, alpha, "alpha")
    return alpha * rel_density / (math.exp(sequence) * level)


def penalty(level: int, sequence: int, rel_density: float,
            beta: float = DEFAULT_BETA) -> float:
    """Negative share for misbehavior; same shape as reward, scaled by beta."""
    _check_factors(level, sequence, rel_density, beta, "beta")
    return -beta * rel_density / (math.exp(sequence) * level)


def clamp(score: float) -> float:
    return min(SCORE_MAX, max(SCORE_MIN, score))


def assign_sequences(messages: Sequence) -> dict[bytes, int]:
    """Sequence number per sender: rank by timestamp, ties by sender key bytes.

    Works for alerts and disclosures alike (anything with sender_pu and
    timestamp_ms). A sender appearing several times keeps its earliest rank.
    """
    first_seen: dict[bytes, int] = {}
    for msg in messages:
        ts = msg.timestamp_ms
        if msg.sender_pu not in first_seen or ts < first_seen[msg.sender_pu]:
            first_seen[msg.sender_pu] = ts
    ordered = sorted(first_seen.items(), key=lambda kv: (kv[1], kv[0]))
    return {pu: rank for rank, (pu, _) in enumerate(ordered)}


@dataclass(frozen=True)
class EventContext:
    """Per-event factors: level, densities, and sender/discloser sequences."""

    level: int
    density: float
    rel_density: float
    sender_seq: Mapping[bytes, int]
    discloser_seq: Mapping[bytes, int]

    @classmethod
    def for_event(cls, alerts: Sequence, disclosures: Sequence, density: float,
                  avg_density: float = AVERAGE_DENSITY) -> "EventContext":
        if not alerts:
            raise ValueError("an event needs at least one alert")
        return cls(
            level=alerts[0].level,
            density=density,
            rel_density=density / avg_density,
            sender_seq=assign_sequences(alerts),
            discloser_seq=assign_sequences(disclosures),
        )


@dataclass
class ReputationRecord:
    """Per-vehicle score on [0, 100] with its change history."""

    owner: bytes  # current pseudonym (public key)
    score: float = INITIAL_SCORE
    history: list = field(default_factory=list)  # (time_ms, delta, cause)

    def apply(self, time_ms: int, new_score: float, cause: str) -> float:
        new_score = clamp(new_score)
        delta = new_score - self.score
        self.score = new_score
        self.history.append((time_ms, delta, cause))
        return delta


@dataclass(frozen=True)
class ScoreChange:
    pu: bytes
    role: str  # "sender" or "discloser"
    sequence: int
    before: float
    after: float

    @property
    def delta(self) -> float:
        return self.after - self.before


def judge_event(
    alerts: Sequence,
    disclosures: Sequence,
    ctx: EventContext,
    ground_truth: str,
    scores: Mapping[bytes, ReputationRecord],
    *,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    time_ms: int = 0,
) -> list[ScoreChange]:
    """Apply one event's judgment to the participants' reputation records.

    ground_truth states whether the alert was authentic; with no disclosures
    it is moot (senders are rewarded). Raises UnknownParticipantError if any
    participant is missing from scores (caller defers the event).
    """
    if not alerts:
        raise ValueError("cannot judge an event with no alerts")
    if ground_truth not in (AUTHENTIC, FORGED):
        raise ValueError(f"ground truth must be '{AUTHENTIC}' or '{FORGED}'")
    senders = sorted(ctx.sender_seq.items(), key=lambda kv: kv[1])
    disclosers = sorted(ctx.discloser_seq.items(), key=lambda kv: kv[1])
    for pu, _ in senders + disclosers:
        if pu not in scores:
            raise UnknownParticipantError(pu.hex())

    level, d_r = ctx.level, ctx.rel_density
    changes: list[ScoreChange] = []

    def update(pu: bytes, role: str, seq: int, new_score: float, cause: str) -> None:
        rec = scores[pu]
        before = rec.score
        rec.apply(time_ms, new_score, cause)
        changes.append(ScoreChange(pu, role, seq, before, rec.score))

    if not disclosers:
        for pu, s in senders:
            r = scores[pu].score
            update(pu, "sender", s, r + (100.0 - r) * reward(level, s, d_r, alpha),
                   "alert_reward")
    elif ground_truth == AUTHENTIC:
        for pu, s in senders:
            r = scores[pu].score
            update(pu, "sender", s, r + (100.0 - r) * reward(level, s, d_r, alpha),
                   "alert_reward")
        for pu, s in disclosers:
            r = scores[pu].score
            update(pu, "discloser", s, r + 25.0 * penalty(level, s, d_r, beta),
                   "false_disclosure_penalty")
    else:
        for pu, s in senders:
            r = scores[pu].score
            update(pu, "sender", s, r * (1.0 + penalty(level, s, d_r, beta)),
                   "forged_alert_penalty")
        for pu, s in disclosers:
            r = scores[pu].score
            update(pu, "discloser", s, r + 50.0 * reward(level, s, d_r, alpha),
                   "disclosure_reward")
    return changes
