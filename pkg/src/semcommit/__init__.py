"""Semantic optimistic replication: multilogs of actions and constraints, and a
decentralised weighted-voting protocol that commits them."""

from .multilog import (
    INIT,
    Action,
    ActionClassification,
    ActionId,
    Guarantee,
    Kill,
    Multilog,
    SerialiseBefore,
    UnsoundMultilog,
    apply_decision,
    classify,
    dead,
    guaranteed,
    is_minimal,
    is_sound,
    is_sound_schedule,
    is_wf_prefix,
    serialised,
    union,
)

__all__ = [
    "INIT",
    "Action",
    "ActionClassification",
    "ActionId",
    "Guarantee",
    "Kill",
    "Multilog",
    "SerialiseBefore",
    "UnsoundMultilog",
    "apply_decision",
    "classify",
    "dead",
    "guaranteed",
    "is_minimal",
    "is_sound",
    "is_sound_schedule",
    "is_wf_prefix",
    "serialised",
    "union",
]

__version__ = "0.1.0"
