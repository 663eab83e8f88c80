"""Core types for the relay-switching simulator.

A source pushes a fixed load of packets per slot through exactly one of
several energy-harvesting relay nodes.  Each node owns a battery; the link
controller swaps the forwarding role whenever an idle node's battery leads
the active node's battery by that node's hysteresis threshold.

All numeric fields are duck-typed: the simulator and the closed-form helpers
only ever add, subtract, multiply, divide and compare, so exact types such as
``fractions.Fraction`` pass through untouched.  Production paths use floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

__all__ = [
    "FRACTIONAL",
    "WHOLE",
    "PACKET_MODES",
    "Hysteresis2",
    "RoundRobin3",
    "EarliestSwitch3",
    "ThresholdPolicy",
    "SystemParams",
    "SimState",
    "SlotRecord",
    "Trace",
    "CycleStats",
    "RunSummary",
    "Profile",
    "ValidationReport",
    "validate",
    "default_state",
    "constant_profile",
]

FRACTIONAL = "fractional"
WHOLE = "whole"
PACKET_MODES = (FRACTIONAL, WHOLE)


# ---------------------------------------------------------------------------
# switching policies
# ---------------------------------------------------------------------------

def _check_thresholds(*values):
    for v in values:
        if not math.isfinite(float(v)) or float(v) <= 0:
            raise ValueError(f"thresholds must be positive, got {v!r}")


@dataclass(frozen=True)
class Hysteresis2:
    """Two-relay hysteresis rule.

    ``threshold1`` guards the handover away from node 1: while node 1
    forwards, the roles swap at the first slot end where the idle node's
    battery leads by at least ``threshold1``.  ``threshold2`` plays the same
    role while node 2 forwards.
    """

    threshold1: float
    threshold2: float

    n_nodes = 2

    def __post_init__(self):
        _check_thresholds(self.threshold1, self.threshold2)

    @property
    def total(self):
        return self.threshold1 + self.threshold2

    def threshold_from(self, active: int):
        return self.threshold1 if active == 0 else self.threshold2

    def candidates(self, active: int) -> tuple[int, ...]:
        return (1 - active,)


@dataclass(frozen=True)
class RoundRobin3:
    """Three-relay rule with a fixed successor order 1 -> 2 -> 3 -> 1.

    Only the designated successor is examined: while node u forwards, the
    swap fires when the successor's battery leads by ``threshold_u``.
    """

    threshold1: float
    threshold2: float
    threshold3: float

    n_nodes = 3

    def __post_init__(self):
        _check_thresholds(self.threshold1, self.threshold2, self.threshold3)

    @property
    def total(self):
        return self.threshold1 + self.threshold2 + self.threshold3

    def threshold_from(self, active: int):
        return (self.threshold1, self.threshold2, self.threshold3)[active]

    def candidates(self, active: int) -> tuple[int, ...]:
        return ((active + 1) % 3,)


@dataclass(frozen=True)
class EarliestSwitch3:
    """Three-relay rule that hands over to whichever idle node first
    qualifies.

    The threshold depends only on the node handing off (same bar for both
    idle nodes).  If both qualify in the same slot the larger lead wins and
    remaining ties go to the lower node index.
    """

    threshold1: float
    threshold2: float
    threshold3: float

    n_nodes = 3

    def __post_init__(self):
        _check_thresholds(self.threshold1, self.threshold2, self.threshold3)

    @property
    def total(self):
        return self.threshold1 + self.threshold2 + self.threshold3

    def threshold_from(self, active: int):
        return (self.threshold1, self.threshold2, self.threshold3)[active]

    def candidates(self, active: int) -> tuple[int, ...]:
        return tuple(u for u in range(3) if u != active)


ThresholdPolicy = Union[Hysteresis2, RoundRobin3, EarliestSwitch3]


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Static description of one deployment.

    harvest_rates     per-node harvested energy, mJ per slot
    input_rate        offered load, packets per slot
    packet_energy     transmit cost per packet, mJ
    status_energy     per-slot status message cost, mJ (every node, each slot
                      end; the forwarding node withholds it when its battery
                      is under the control floor)
    switch_energy     handover command cost, mJ, paid by every node at a swap
    battery_capacity  storage ceiling per node, mJ
    thresholds        switching policy; its arity must match harvest_rates
    """

    harvest_rates: tuple
    input_rate: float
    packet_energy: float
    thresholds: ThresholdPolicy
    status_energy: float = 0
    switch_energy: float = 0
    battery_capacity: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "harvest_rates", tuple(self.harvest_rates))
        n = len(self.harvest_rates)
        if n not in (2, 3):
            raise ValueError(f"expected 2 or 3 relay nodes, got {n}")
        if self.thresholds.n_nodes != n:
            raise ValueError(
                f"policy handles {self.thresholds.n_nodes} nodes, "
                f"params describe {n}"
            )
        for name, value in self._scalars():
            if not math.isfinite(float(value)):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if any(float(e) < 0 for e in self.harvest_rates):
            raise ValueError("harvest rates must be non-negative")
        if float(self.input_rate) < 0:
            raise ValueError("input rate must be non-negative")
        if float(self.packet_energy) <= 0:
            raise ValueError("packet energy must be positive")
        if float(self.status_energy) < 0 or float(self.switch_energy) < 0:
            raise ValueError("control energies must be non-negative")
        ths = [self.thresholds.threshold_from(u) for u in range(n)]
        if any(float(t) <= 0 for t in ths):
            raise ValueError("thresholds must be positive")
        if float(self.battery_capacity) <= float(self.control_floor):
            raise ValueError("battery capacity must exceed the control floor")

    def _scalars(self):
        yield from zip(
            ("input_rate", "packet_energy", "status_energy", "switch_energy",
             "battery_capacity"),
            (self.input_rate, self.packet_energy, self.status_energy,
             self.switch_energy, self.battery_capacity),
        )
        for u, e in enumerate(self.harvest_rates):
            yield f"harvest_rates[{u}]", e

    @property
    def n_nodes(self) -> int:
        return len(self.harvest_rates)

    @property
    def control_floor(self):
        """Battery level needed to send status and still afford a handover."""
        return self.status_energy + self.switch_energy

    @property
    def slot_data_energy(self):
        """Energy drawn by a full forwarding slot (packet_energy * input_rate)."""
        return self.packet_energy * self.input_rate

    def with_input_rate(self, g) -> "SystemParams":
        return replace(self, input_rate=g)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def validate(params: SystemParams, strict: bool = False) -> ValidationReport:
    """Check the operating-regime assumptions behind the analytic results.

    Structural problems (negative energies, capacity under the control
    floor, arity mismatches) are rejected earlier, when ``SystemParams`` is
    built.  This reports the softer regime conditions: the forwarding node
    should drain (load above every harvest rate) and every node should
    stay solvent for control traffic (every harvest rate above the control
    floor).  With ``strict`` those become errors instead of warnings.
    """
    notes = []
    cg = float(params.slot_data_energy)
    for u, e in enumerate(params.harvest_rates):
        if cg <= float(e):
            notes.append(
                f"node {u + 1}: harvest {float(e)} >= per-slot data energy "
                f"{cg}; the active battery never drains"
            )
    floor = float(params.control_floor)
    if floor > 0:
        for u, e in enumerate(params.harvest_rates):
            if float(e) <= floor:
                notes.append(
                    f"node {u + 1}: harvest {float(e)} does not cover the "
                    f"control floor {floor}"
                )
    if strict and notes:
        return ValidationReport(ok=False, errors=tuple(notes))
    return ValidationReport(ok=True, warnings=tuple(notes))


# ---------------------------------------------------------------------------
# simulation state and outputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimState:
    """Snapshot taken just before the end of ``slot``.

    battery_pre   per-node level just before the slot-end control exchange
    battery_post  per-node level right after the previous exchange (None
                  before the first step)
    active        0-based index of the forwarding node for the current slot
    forwarded     cumulative packets credited per node
    packet_mode   "fractional" or "whole"
    """

    slot: int
    battery_pre: tuple
    active: int
    forwarded: tuple
    battery_post: Optional[tuple] = None
    packet_mode: str = FRACTIONAL

    def __post_init__(self):
        if self.packet_mode not in PACKET_MODES:
            raise ValueError(f"unknown packet mode {self.packet_mode!r}")


def default_state(params: SystemParams, packet_mode: str = FRACTIONAL,
                  batteries: Optional[Sequence] = None,
                  active: int = 0) -> SimState:
    """Half-full batteries, node 1 forwarding, nothing sent yet."""
    n = params.n_nodes
    if batteries is None:
        batteries = tuple(params.battery_capacity / 2 for _ in range(n))
    else:
        batteries = tuple(batteries)
        if len(batteries) != n:
            raise ValueError("one initial battery level per node required")
    if not 0 <= active < n:
        raise ValueError(f"active node index {active} out of range")
    return SimState(slot=0, battery_pre=batteries, active=active,
                    forwarded=tuple(0 for _ in range(n)),
                    packet_mode=packet_mode)


@dataclass(frozen=True)
class SlotRecord:
    """One slot-end control exchange plus the following slot's traffic.

    battery_pre / battery_post bracket the exchange itself.  ``active`` is
    the forwarding node after any handover, and ``packets`` is what that node
    carries during the next slot (a handover credits a full input_rate to the
    incoming node).  ``suppressed`` marks nodes that withheld their status
    message.
    """

    slot: int
    battery_pre: tuple
    battery_post: tuple
    active: int
    switched: bool
    packets: float
    suppressed: tuple

    @property
    def battery_gap(self):
        """battery_pre[0] - battery_pre[1]; the quantity the two-node rule watches."""
        return self.battery_pre[0] - self.battery_pre[1]


@dataclass
class Trace:
    """A finished run: the record list plus enough context to re-derive
    statistics.  ``params``/``profile`` are None for traces re-read from CSV."""

    records: list
    n_nodes: int
    packet_mode: str = FRACTIONAL
    initial_active: Optional[int] = None
    params: Optional[SystemParams] = None
    profile: Optional["Profile"] = None
    feedback_log: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def switch_slots(self) -> list[int]:
        return [r.slot for r in self.records if r.switched]

    def activation_slots(self, node: int = 0) -> list[int]:
        """Slots whose exchange handed forwarding to ``node``."""
        return [r.slot for r in self.records if r.switched and r.active == node]

    def offered(self, index: int):
        """Offered load during the slot that follows record ``index``."""
        if self.profile is not None:
            return self.profile.input_rate[index]
        if self.params is not None:
            return self.params.input_rate
        raise ValueError("trace carries no offered-load information")

    def harvest(self, index: int) -> tuple:
        if self.profile is not None:
            return self.profile.harvest[index]
        if self.params is not None:
            return self.params.harvest_rates
        raise ValueError("trace carries no harvest information")


@dataclass(frozen=True)
class CycleStats:
    """One full rotation of the forwarding role (or one leg of it when
    produced by the closed-form steppers, which advance a single active
    period per call)."""

    length: float                  # slots
    active_slots: tuple            # per node
    packets: tuple                 # per node
    drift: tuple                   # per-node battery change over the cycle
    start_slot: Optional[int] = None

    @property
    def packets_total(self):
        return sum(self.packets)

    @property
    def throughput(self):
        return self.packets_total / self.length


@dataclass(frozen=True)
class RunSummary:
    """Post-warmup statistics for one trace."""

    slots: int
    packets_total: float
    throughput: float
    per_node_packets: tuple
    switch_count: int
    cycle_count: int
    mean_cycle_length: Optional[float]

    @property
    def node_share(self) -> tuple:
        total = self.packets_total
        if not total:
            return tuple(0.0 for _ in self.per_node_packets)
        return tuple(p / total for p in self.per_node_packets)


# ---------------------------------------------------------------------------
# time-varying operating conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Per-slot harvest rates and offered load.

    harvest[i] is a tuple with one rate per node for slot i; input_rate[i]
    is the offered load for slot i.  A constant profile reproduces a plain
    parameterised run exactly.
    """

    harvest: tuple
    input_rate: tuple

    def __post_init__(self):
        if len(self.harvest) != len(self.input_rate):
            raise ValueError("harvest and input-rate arrays differ in length")
        if self.harvest:
            n = len(self.harvest[0])
            if any(len(row) != n for row in self.harvest):
                raise ValueError("ragged harvest rows")

    @property
    def length(self) -> int:
        return len(self.harvest)

    @property
    def n_nodes(self) -> int:
        return len(self.harvest[0]) if self.harvest else 0

    def total_harvest(self) -> tuple:
        n = self.n_nodes
        return tuple(sum(row[u] for row in self.harvest) for u in range(n))

    def total_offered(self):
        return sum(self.input_rate)


def constant_profile(params: SystemParams, length: int) -> Profile:
    if length < 1:
        raise ValueError("profile length must be at least 1")
    return Profile(
        harvest=tuple(params.harvest_rates for _ in range(length)),
        input_rate=tuple(params.input_rate for _ in range(length)),
    )
