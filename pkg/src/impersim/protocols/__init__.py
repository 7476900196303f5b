from .base import ProtocolSpec, StepResult
from .ben_or import BenOrProtocol, BenOrState, async_filter
from .full_info import FullInfoProtocol, FullInfoState, MajorityStrawmanProtocol
from .renaming import RenamingProtocol, RenamingState, rank
from .set_agreement import SetAgreementProtocol, SetAgreementState, boost_participants

__all__ = [
    "ProtocolSpec",
    "StepResult",
    "RenamingProtocol",
    "RenamingState",
    "rank",
    "SetAgreementProtocol",
    "SetAgreementState",
    "boost_participants",
    "BenOrProtocol",
    "BenOrState",
    "async_filter",
    "FullInfoProtocol",
    "FullInfoState",
    "MajorityStrawmanProtocol",
]
