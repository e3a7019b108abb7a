"""Three-party QKD sessions, the dense-coding attack on them, and the shuffle fix."""

from .adversary import (
    AdversaryKind,
    AttackReport,
    DenseCoding,
    InterceptResend,
    NoAdversary,
    PassiveListen,
    make_adversary,
)
from .protocol import ProtocolParams, SessionTranscript, Variant, Verdict, run_session
from .qsim import Heap

__all__ = [
    "AdversaryKind",
    "AttackReport",
    "DenseCoding",
    "Heap",
    "InterceptResend",
    "NoAdversary",
    "PassiveListen",
    "ProtocolParams",
    "SessionTranscript",
    "Variant",
    "Verdict",
    "make_adversary",
    "run_session",
]
