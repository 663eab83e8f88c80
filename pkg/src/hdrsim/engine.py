"""Slot-level simulator.

Time is discrete.  Each step handles one slot boundary and the slot that
follows it: nodes exchange status messages, the controller decides whether
to hand the forwarding role over, and the chosen node then carries the
offered load while everyone harvests.

Record ``k`` therefore describes the boundary entering slot ``k`` (battery
levels before and after the control exchange, the handover decision) plus
the traffic of slot ``k`` itself (packets moved by the node that ended up
active).  The next record's ``battery_pre`` is the result of that slot.

Arithmetic is duck-typed; feeding ``fractions.Fraction`` levels in gives
exact trajectories, which the golden tests rely on.
"""

from __future__ import annotations

import csv
import math
from typing import Optional, Sequence

from .model import (
    FRACTIONAL,
    WHOLE,
    CycleStats,
    Profile,
    RunSummary,
    SimState,
    SlotRecord,
    SystemParams,
    Trace,
    default_state,
)

__all__ = [
    "step",
    "run",
    "detect_cycles",
    "summarize",
    "energy_ledger",
    "verify_trace",
    "write_trace_csv",
    "read_trace_csv",
]


def _pick_switch(params: SystemParams, batteries, active: int) -> Optional[int]:
    """Index of the node taking over, or None.  Largest lead wins a same-slot
    tie, remaining ties go to the lower index."""
    bar = params.thresholds.threshold_from(active)
    best = None
    best_lead = None
    for u in params.thresholds.candidates(active):
        lead = batteries[u] - batteries[active]
        if lead >= bar and (best is None or lead > best_lead):
            best, best_lead = u, lead
    return best


def step(params: SystemParams, state: SimState, harvest=None, input_rate=None):
    """Advance one slot.  Returns (new_state, record).

    ``harvest``/``input_rate`` override the static parameters for this slot
    (used by profile-driven runs).
    """
    n = params.n_nodes
    e = params.harvest_rates if harvest is None else tuple(harvest)
    g = params.input_rate if input_rate is None else input_rate
    c = params.packet_energy
    floor = params.control_floor
    cap = params.battery_capacity
    pre = state.battery_pre
    v = state.active

    target = _pick_switch(params, pre, v)
    switched = target is not None

    # status messages: idle nodes always report, the forwarding node stays
    # quiet when its battery cannot cover a full control exchange
    paid = [True] * n
    paid[v] = pre[v] >= floor
    post = [pre[u] - (params.status_energy if paid[u] else 0) for u in range(n)]
    if switched:
        for u in range(n):
            post[u] = post[u] - params.switch_energy
        v = target

    whole = state.packet_mode == WHOLE
    nxt = [None] * n
    if switched:
        packets = math.floor(g) if whole else g
        for u in range(n):
            if u == v:
                nxt[u] = post[u] + e[u] - c * packets
            else:
                nxt[u] = post[u] + e[u]
    elif post[v] < floor:
        # broke relay: the slot is spent recharging, nothing is forwarded
        packets = 0
        for u in range(n):
            nxt[u] = post[u] + e[u]
    else:
        demand = c * g
        if demand <= e[v]:
            share = 1
        else:
            share = (post[v] - floor) / (demand - e[v])
            share = 0 if share < 0 else (1 if share > 1 else share)
        packets = share * g + (1 - share) * e[v] / c
        if whole:
            packets = math.floor(packets)
            nxt[v] = post[v] + e[v] - c * packets
        else:
            cut = post[v] + e[v] - demand
            nxt[v] = cut if cut > floor else floor
        for u in range(n):
            if u != v:
                nxt[u] = post[u] + e[u]

    for u in range(n):
        if nxt[u] > cap:
            nxt[u] = cap

    record = SlotRecord(
        slot=state.slot,
        battery_pre=tuple(pre),
        battery_post=tuple(post),
        active=v,
        switched=switched,
        packets=packets,
        suppressed=tuple(not p for p in paid),
    )
    forwarded = list(state.forwarded)
    forwarded[v] = forwarded[v] + packets
    new_state = SimState(
        slot=state.slot + 1,
        battery_pre=tuple(nxt),
        active=v,
        forwarded=tuple(forwarded),
        battery_post=tuple(post),
        packet_mode=state.packet_mode,
    )
    return new_state, record


def run(params: SystemParams, n_slots: Optional[int] = None,
        state: Optional[SimState] = None,
        profile: Optional[Profile] = None,
        packet_mode: str = FRACTIONAL,
        initial_batteries: Optional[Sequence] = None,
        initial_active: int = 0) -> Trace:
    """Simulate ``n_slots`` slots and return the trace.

    With a profile, slot ``k`` uses profile row ``k`` and ``n_slots``
    defaults to the profile length.
    """
    if state is None:
        state = default_state(params, packet_mode=packet_mode,
                              batteries=initial_batteries,
                              active=initial_active)
    if profile is not None:
        if profile.n_nodes != params.n_nodes:
            raise ValueError("profile node count does not match parameters")
        if n_slots is None:
            n_slots = profile.length
        elif n_slots > profile.length:
            raise ValueError("profile shorter than requested run")
    elif n_slots is None:
        raise ValueError("n_slots required when no profile is given")
    if n_slots < 1:
        raise ValueError("n_slots must be at least 1")

    first_active = state.active
    records = []
    for k in range(n_slots):
        if profile is None:
            state, rec = step(params, state)
        else:
            state, rec = step(params, state, harvest=profile.harvest[k],
                              input_rate=profile.input_rate[k])
        records.append(rec)
    return Trace(records=records, n_nodes=params.n_nodes,
                 packet_mode=state.packet_mode, initial_active=first_active,
                 params=params, profile=profile)


# ---------------------------------------------------------------------------
# trace statistics
# ---------------------------------------------------------------------------

def detect_cycles(trace: Trace, node: int = 0, warmup: int = 0) -> list[CycleStats]:
    """Split the trace at handovers to ``node`` and measure each full
    rotation of the forwarding role."""
    bounds = [i for i, r in enumerate(trace.records)
              if r.switched and r.active == node and r.slot >= warmup]
    cycles = []
    n = trace.n_nodes
    for a, b in zip(bounds, bounds[1:]):
        ra, rb = trace.records[a], trace.records[b]
        active_slots = [0] * n
        packets = [0] * n
        for r in trace.records[a:b]:
            active_slots[r.active] += 1
            packets[r.active] = packets[r.active] + r.packets
        cycles.append(CycleStats(
            length=rb.slot - ra.slot,
            active_slots=tuple(active_slots),
            packets=tuple(packets),
            drift=tuple(rb.battery_pre[u] - ra.battery_pre[u] for u in range(n)),
            start_slot=ra.slot,
        ))
    return cycles


def summarize(trace: Trace, warmup: int = 0) -> RunSummary:
    recs = [r for r in trace.records if r.slot >= warmup]
    n = trace.n_nodes
    per_node = [0] * n
    switches = 0
    for r in recs:
        per_node[r.active] = per_node[r.active] + r.packets
        if r.switched:
            switches += 1
    total = sum(per_node)
    cycles = detect_cycles(trace, warmup=warmup)
    mean_len = (sum(c.length for c in cycles) / len(cycles)) if cycles else None
    return RunSummary(
        slots=len(recs),
        packets_total=total,
        throughput=total / len(recs) if recs else 0.0,
        per_node_packets=tuple(per_node),
        switch_count=switches,
        cycle_count=len(cycles),
        mean_cycle_length=mean_len,
    )


def energy_ledger(trace: Trace, params: Optional[SystemParams] = None):
    """Per-record, per-node residual of the slot energy balance.

    For each consecutive record pair the change in a node's battery must
    equal harvest minus status cost minus handover cost minus transmit
    energy.  A nonzero residual is only legitimate when the ceiling clipped
    the charge: the level lands exactly on the capacity and the shortfall is
    the discarded surplus, so the residual is negative.  A positive residual
    is energy from nowhere and never legitimate.  Returns a list of
    (slot, node, residual, clipped_at_cap) tuples.
    """
    p = params or trace.params
    if p is None:
        raise ValueError("parameters required to audit a bare trace")
    out = []
    for i in range(len(trace.records) - 1):
        r, r2 = trace.records[i], trace.records[i + 1]
        e = trace.harvest(i) if (trace.profile or trace.params) else p.harvest_rates
        for u in range(p.n_nodes):
            spent = p.packet_energy * r.packets if u == r.active else 0
            expect = (e[u]
                      - (0 if r.suppressed[u] else p.status_energy)
                      - (p.switch_energy if r.switched else 0)
                      - spent)
            resid = (r2.battery_pre[u] - r.battery_pre[u]) - expect
            out.append((r.slot, u, resid, r2.battery_pre[u] == p.battery_capacity))
    return out


def verify_trace(trace: Trace, params: Optional[SystemParams] = None,
                 tol: float = 1e-9) -> list[str]:
    """Audit a finished trace against the model rules.

    Recomputes every slot from its own battery snapshot and checks the
    handover decision, control charges, packet count and resulting levels,
    plus battery bounds and the energy balance.  Returns human-readable
    violation strings; an empty list means the trace is consistent.
    """
    p = params or trace.params
    if p is None:
        raise ValueError("parameters required to audit a bare trace")
    problems = []

    def close(a, b):
        return abs(a - b) <= tol

    prev_active = trace.initial_active
    if prev_active is None and trace.records:
        # best effort for re-read traces: a switch in the first record means
        # the run began on some other node, which we cannot recover
        prev_active = trace.records[0].active

    for i, r in enumerate(trace.records):
        for u in range(p.n_nodes):
            if r.battery_pre[u] < -tol or r.battery_pre[u] > p.battery_capacity + tol:
                problems.append(f"slot {r.slot}: node {u + 1} level "
                                f"{r.battery_pre[u]} outside [0, capacity]")
        state = SimState(slot=r.slot, battery_pre=r.battery_pre,
                         active=prev_active, forwarded=(0,) * p.n_nodes,
                         packet_mode=trace.packet_mode)
        if trace.profile is not None:
            _, expect = step(p, state, harvest=trace.profile.harvest[i],
                             input_rate=trace.profile.input_rate[i])
        else:
            _, expect = step(p, state)
        if expect.switched != r.switched or expect.active != r.active:
            problems.append(f"slot {r.slot}: handover decision does not "
                            f"follow from the recorded levels")
        if expect.suppressed != r.suppressed:
            problems.append(f"slot {r.slot}: status suppression flags differ")
        if not close(expect.packets, r.packets):
            problems.append(f"slot {r.slot}: packets {r.packets} != "
                            f"recomputed {expect.packets}")
        for u in range(p.n_nodes):
            if not close(expect.battery_post[u], r.battery_post[u]):
                problems.append(f"slot {r.slot}: node {u + 1} post-exchange "
                                f"level mismatch")
        prev_active = r.active

    for slot, u, resid, at_cap in energy_ledger(trace, p):
        if abs(resid) <= tol:
            continue
        if at_cap and resid < 0:
            continue          # surplus harvest discarded at the ceiling
        problems.append(f"slot {slot}: node {u + 1} energy balance off by "
                        f"{resid}")
    return problems


# ---------------------------------------------------------------------------
# trace persistence
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace: Trace, path) -> None:
    """Node indices are 1-based in the file; floats keep full precision."""
    n = trace.n_nodes
    header = ["slot", "active", "switched", "packets"]
    header += [f"battery_pre{u + 1}" for u in range(n)]
    header += [f"battery_post{u + 1}" for u in range(n)]
    header += [f"suppressed{u + 1}" for u in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in trace.records:
            row = [r.slot, r.active + 1, int(r.switched), _fmt(r.packets)]
            row += [_fmt(x) for x in r.battery_pre]
            row += [_fmt(x) for x in r.battery_post]
            row += [int(s) for s in r.suppressed]
            w.writerow(row)


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace")
    n = sum(1 for k in rows[0] if k.startswith("battery_pre"))
    records = []
    for row in rows:
        records.append(SlotRecord(
            slot=int(row["slot"]),
            battery_pre=tuple(float(row[f"battery_pre{u + 1}"]) for u in range(n)),
            battery_post=tuple(float(row[f"battery_post{u + 1}"]) for u in range(n)),
            active=int(row["active"]) - 1,
            switched=bool(int(row["switched"])),
            packets=float(row["packets"]),
            suppressed=tuple(bool(int(row[f"suppressed{u + 1}"])) for u in range(n)),
        ))
    return Trace(records=records, n_nodes=n)
