"""Task-assignment algorithms for FIFO queues.

Every algorithm maps a :class:`~dlsched.model.Problem` to an
:class:`~dlsched.model.Assignment`; the ``*_assign`` wrappers take a job and a
cluster snapshot instead.
"""
from .instances import TheoremInstance
from .obta import nlip, nlip_assign, obta, obta_assign
from .rd import rd_assign, replica_deletion
from .wf import ParticipationTrace, water_fill, wf, wf_assign

ASSIGNERS = {
    "nlip": nlip,
    "obta": obta,
    "wf": wf,
    "rd": replica_deletion,
}

__all__ = [
    "ASSIGNERS", "ParticipationTrace", "TheoremInstance", "nlip", "nlip_assign", "obta", "obta_assign",
    "rd_assign", "replica_deletion", "water_fill", "wf", "wf_assign",
]
