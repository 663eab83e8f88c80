"""Time-varying experiments: harvest/load profiles, per-window statistics,
and the closed-loop input-rate controller."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

from .analytic import feedback_input_rate
from .engine import step
from .model import (
    FRACTIONAL,
    Profile,
    SystemParams,
    Trace,
    constant_profile,
    default_state,
)

__all__ = [
    "WindowStats",
    "load_profile",
    "windowed_stats",
    "write_window_stats_csv",
    "run_with_feedback",
    "constant_profile",
]


@dataclass(frozen=True)
class WindowStats:
    """Offered vs delivered packets over one window of slots."""

    window: int
    start_slot: int
    length: int
    offered: float
    delivered: float
    harvested: tuple           # per node, mJ
    mean_battery: tuple        # per node, mJ


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def load_profile(source) -> Profile:
    """Read a piecewise-constant profile from CSV.

    Expected header: ``slot_range,e1,e2[,e3],g`` where ``slot_range`` is
    ``a-b``, both ends included.  Ranges must tile the horizon: no overlaps
    and no gaps.  ``source`` is a path or an open text file.
    """
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ValueError("empty profile")
    header = [cell.strip().lower() for cell in rows[0]]
    if header[:2] != ["slot_range", "e1"] or header[-1] != "g":
        raise ValueError(f"unexpected profile header {rows[0]!r}")
    n = len(header) - 2
    if n not in (2, 3):
        raise ValueError("profile must cover 2 or 3 nodes")

    pieces = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 2:
            raise ValueError(f"line {lineno}: expected {n + 2} fields, "
                             f"got {len(row)}")
        span = row[0].strip()
        try:
            lo_s, hi_s = span.split("-")
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ValueError(f"line {lineno}: bad slot range {span!r}") from None
        if lo < 0 or hi < lo:
            raise ValueError(f"line {lineno}: bad slot range {span!r}")
        try:
            values = [float(cell) for cell in row[1:]]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value") from None
        if any(x < 0 for x in values):
            raise ValueError(f"line {lineno}: negative value")
        pieces.append((lo, hi, tuple(values[:n]), values[n]))

    pieces.sort(key=lambda p: p[0])
    expect = 0
    for lo, hi, _, _ in pieces:
        if lo < expect:
            raise ValueError(f"overlapping slot ranges at slot {lo}")
        if lo > expect:
            raise ValueError(f"gap in slot ranges before slot {lo}")
        expect = hi + 1

    harvest = []
    input_rate = []
    for lo, hi, e_row, g in pieces:
        count = hi - lo + 1
        harvest.extend([e_row] * count)
        input_rate.extend([g] * count)
    return Profile(harvest=tuple(harvest), input_rate=tuple(input_rate))


# ---------------------------------------------------------------------------
# windowed statistics
# ---------------------------------------------------------------------------

def windowed_stats(trace: Trace, window: int) -> list[WindowStats]:
    """Offered vs delivered packets per window; the final window may be
    shorter and is reported with its true length."""
    if window < 1:
        raise ValueError("window must be at least one slot")
    n = trace.n_nodes
    out = []
    for start in range(0, len(trace.records), window):
        block = trace.records[start:start + window]
        offered = sum(trace.offered(start + j) for j in range(len(block)))
        delivered = sum(r.packets for r in block)
        harvested = [0] * n
        level_sum = [0] * n
        for j, r in enumerate(block):
            row = trace.harvest(start + j)
            for u in range(n):
                harvested[u] = harvested[u] + row[u]
                level_sum[u] = level_sum[u] + r.battery_pre[u]
        out.append(WindowStats(
            window=len(out),
            start_slot=block[0].slot,
            length=len(block),
            offered=offered,
            delivered=delivered,
            harvested=tuple(harvested),
            mean_battery=tuple(s / len(block) for s in level_sum),
        ))
    return out


def write_window_stats_csv(stats: list[WindowStats], path) -> None:
    if not stats:
        raise ValueError("no windows to write")
    n = len(stats[0].harvested)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "offered", "delivered"]
                   + [f"harvest{u + 1}" for u in range(n)])
        for s in stats:
            w.writerow([s.window, format(float(s.offered), ".17g"),
                        format(float(s.delivered), ".17g")]
                       + [format(float(x), ".17g") for x in s.harvested])


# ---------------------------------------------------------------------------
# closed-loop input rate
# ---------------------------------------------------------------------------

def run_with_feedback(params: SystemParams, horizon: Optional[int] = None,
                      estimator_window: int = 5,
                      profile: Optional[Profile] = None,
                      packet_mode: str = FRACTIONAL,
                      initial_batteries=None, initial_active: int = 0) -> Trace:
    """Simulate with the offered load steered to cancel battery drift.

    Each time a full rotation completes (the forwarding role returns to
    node 1), the mean of the last ``estimator_window`` rotation lengths
    feeds the zero-drift load formula and the result becomes the new input
    rate.  Until that many rotations exist the configured rate is used.  A
    harvest too weak to pay for control makes the controller hold the
    previous rate and flag the event.

    With a ``profile`` the harvest follows it while the input-rate column
    is ignored (the controller owns the load).  The returned trace carries
    the effective profile: actual harvest and the load actually offered.
    """
    if estimator_window < 1:
        raise ValueError("estimator window must be at least one cycle")
    if profile is not None:
        if profile.n_nodes != params.n_nodes:
            raise ValueError("profile node count does not match parameters")
        if horizon is None:
            horizon = profile.length
        elif horizon > profile.length:
            raise ValueError("profile shorter than requested run")
    elif horizon is None:
        raise ValueError("horizon required when no profile is given")

    state = default_state(params, packet_mode=packet_mode,
                          batteries=initial_batteries, active=initial_active)
    first_active = state.active
    g = params.input_rate
    records = []
    used_harvest = []
    used_rate = []
    feedback_log = []
    cycle_lengths = []
    last_activation = None

    for k in range(horizon):
        harvest = params.harvest_rates if profile is None else profile.harvest[k]
        state, rec = step(params, state, harvest=harvest, input_rate=g)
        records.append(rec)
        used_harvest.append(tuple(harvest))
        used_rate.append(g)
        if rec.switched and rec.active == 0:
            if last_activation is not None:
                cycle_lengths.append(rec.slot - last_activation)
            last_activation = rec.slot
            if len(cycle_lengths) >= estimator_window:
                recent = cycle_lengths[-estimator_window:]
                estimate = sum(recent) / len(recent)
                local = replace(params, harvest_rates=tuple(harvest))
                try:
                    g = feedback_input_rate(estimate, local)
                    flagged = False
                except ValueError:
                    flagged = True
                feedback_log.append((rec.slot, estimate, g, flagged))

    effective = Profile(harvest=tuple(used_harvest), input_rate=tuple(used_rate))
    return Trace(records=records, n_nodes=params.n_nodes,
                 packet_mode=packet_mode, initial_active=first_active,
                 params=params, profile=effective, feedback_log=feedback_log)
