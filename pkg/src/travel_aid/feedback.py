"""Beep and speech events derived from direction decisions and fused objects."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .direction import Action, DirectionDecision
from .fusion import direction_bucket


class EventKind(enum.Enum):
    BEEP_START = "beep_start"
    BEEP_STOP = "beep_stop"
    TURN_HINT = "turn_hint"
    SPEECH = "speech"


@dataclass(frozen=True)
class FeedbackEvent:
    frame_index: int
    kind: EventKind
    payload: str = ""
    timestamp: float = 0.0  # seconds

    def to_record(self):
        return {"frame": self.frame_index, "kind": self.kind.value, "payload": self.payload,
                "timestamp": self.timestamp}


@dataclass(frozen=True)
class FeedbackState:
    beeping: bool = False
    last_decision: DirectionDecision | None = None


SEARCH_HINT = "search left or right"
CANNOT_MOVE_ON = "cannot move on"
NO_OBJECTS = "no objects detected"


def navigation_feedback(decision: DirectionDecision, state: FeedbackState, frame_index=0,
                        timestamp=0.0):
    """Events for one frame's decision; returns ``(events, new_state)``.

    A blocked path starts a continuous beep; the beep stops as soon as a
    walkable direction exists again.
    """
    events = []

    def emit(kind, payload=""):
        events.append(FeedbackEvent(frame_index, kind, payload, timestamp))

    beeping = state.beeping
    if decision.action is Action.BLOCKED:
        if not beeping:
            emit(EventKind.BEEP_START)
            emit(EventKind.TURN_HINT, SEARCH_HINT)
            beeping = True
    else:
        if beeping:
            emit(EventKind.BEEP_STOP)
            beeping = False
        if decision.action is Action.TURN:
            emit(EventKind.TURN_HINT, f"turn {decision.side} {abs(decision.turn_angle):.1f} degrees")
    return events, FeedbackState(beeping, decision)


def no_ground_feedback(state: FeedbackState, frame_index=0, timestamp=0.0):
    """Events for a frame without walkable ground."""
    return [FeedbackEvent(frame_index, EventKind.TURN_HINT, CANNOT_MOVE_ON, timestamp)], state


def speech_text(obj, band=5.0):
    bucket = direction_bucket(obj.location.theta_h, band)
    return f"{obj.label}, {obj.distance:.1f} meters, {bucket}"


def describe_objects(objects, frame_index=0, timestamp=0.0, band=5.0):
    """One speech event per object, nearest first (ties broken by label)."""
    if not objects:
        return [FeedbackEvent(frame_index, EventKind.SPEECH, NO_OBJECTS, timestamp)]
    ordered = sorted(objects, key=lambda o: (o.distance, o.label))
    return [FeedbackEvent(frame_index, EventKind.SPEECH, speech_text(o, band), timestamp)
            for o in ordered]
