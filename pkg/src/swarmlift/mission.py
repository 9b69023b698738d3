"""Centralized takeoff/landing coordinator.

A single FSM commands the same altitude increment to every agent, waits for
all of them to acknowledge (reach the target within tolerance), engages the
slaves' admittance controllers once the transport altitude is reached, and
mirrors the procedure for landing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class MissionPhase(enum.Enum):
    GROUNDED = "grounded"
    ASCENDING = "ascending"
    TRANSPORTING = "transporting"
    DESCENDING = "descending"
    LANDED = "landed"


@dataclass
class MissionState:
    n_agents: int
    transport_altitude: float = 1.2
    dh: float = 0.25
    tol: float = 0.05
    ground_altitude: float = 0.0
    phase: MissionPhase = MissionPhase.GROUNDED
    target: float = 0.0
    increments_issued: int = 0
    slaves_engaged: bool = False
    phase_log: list = field(default_factory=list)


def _all_acked(altitudes, target, tol):
    return bool(np.all(np.abs(np.asarray(altitudes, dtype=float) - target) <= tol))


def mission_step(ms: MissionState, agent_altitudes, begin_descent: bool = False):
    """Advance the coordinator; returns (state, commands).

    Commands are tuples: ("set_altitude", h) broadcast to all agents,
    ("engage_slaves",), ("release_master",), ("disengage_slaves",),
    ("landed",). A new increment is issued only when every agent is within
    tolerance of the current target.
    """
    if ms.n_agents < 1 or len(agent_altitudes) != ms.n_agents:
        raise ValueError("altitude list must cover every agent")
    commands = []

    if ms.phase is MissionPhase.GROUNDED:
        ms.target = min(ms.ground_altitude + ms.dh, ms.transport_altitude)
        ms.increments_issued += 1
        ms.phase = MissionPhase.ASCENDING
        ms.phase_log.append(ms.phase)
        commands.append(("set_altitude", ms.target))
        return ms, commands

    if ms.phase is MissionPhase.ASCENDING:
        if _all_acked(agent_altitudes, ms.target, ms.tol):
            if ms.target >= ms.transport_altitude - 1e-12:
                ms.phase = MissionPhase.TRANSPORTING
                ms.phase_log.append(ms.phase)
                if not ms.slaves_engaged:
                    ms.slaves_engaged = True
                    commands.append(("engage_slaves",))
                commands.append(("release_master",))
            else:
                ms.target = min(ms.target + ms.dh, ms.transport_altitude)
                ms.increments_issued += 1
                commands.append(("set_altitude", ms.target))
        return ms, commands

    if ms.phase is MissionPhase.TRANSPORTING:
        if begin_descent:
            commands.append(("disengage_slaves",))
            ms.slaves_engaged = False
            ms.target = max(ms.target - ms.dh, ms.ground_altitude)
            ms.increments_issued += 1
            ms.phase = MissionPhase.DESCENDING
            ms.phase_log.append(ms.phase)
            commands.append(("set_altitude", ms.target))
        return ms, commands

    if ms.phase is MissionPhase.DESCENDING:
        if _all_acked(agent_altitudes, ms.target, ms.tol):
            if ms.target <= ms.ground_altitude + 1e-12:
                ms.phase = MissionPhase.LANDED
                ms.phase_log.append(ms.phase)
                commands.append(("landed",))
            else:
                ms.target = max(ms.target - ms.dh, ms.ground_altitude)
                ms.increments_issued += 1
                commands.append(("set_altitude", ms.target))
        return ms, commands

    return ms, commands
