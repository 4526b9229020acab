"""Queue bookkeeping and the scheduling math: penalized differential-backlog
flow selection, spectrum utility, and next-hop choice.

Pure functions over plain dict state; owned by a single node's state machine.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FlowId:
    source: int
    destinations: tuple[int, ...]

    def __post_init__(self):
        if not self.destinations:
            raise ValueError("flow needs at least one destination")
        if self.source in self.destinations:
            raise ValueError("source cannot be its own destination")

    @property
    def unicast(self) -> bool:
        return len(self.destinations) == 1


class PenaltyTracker:
    """Per (flow, node) visit counts f and the loop penalty alpha = 1/f.

    alpha is 1 until the second visit, then a pure function of the count, so
    replaying the same visit sequence always reproduces the same penalties.
    """

    def __init__(self):
        self.visits: dict[tuple[FlowId, int], int] = {}

    def record_visit(self, flow: FlowId, node: int) -> None:
        key = (flow, node)
        self.visits[key] = self.visits.get(key, 0) + 1

    def count(self, flow: FlowId, node: int) -> int:
        return self.visits.get((flow, node), 0)

    def alpha(self, flow: FlowId, node: int) -> float:
        f = self.count(flow, node)
        return 1.0 if f <= 1 else 1.0 / f


class VirtualQueueSet:
    """Per (flow, destination) backlogs at one node.

    The node's own virtual queue for a flow it terminates is never created:
    a virtual queue disappears once its destination is reached.
    """

    def __init__(self, node_id: int):
        self.node_id = node_id
        self.backlogs: dict[tuple[FlowId, int], int] = {}

    def dests_here(self, flow: FlowId) -> tuple[int, ...]:
        return tuple(d for d in flow.destinations if d != self.node_id)

    def backlog(self, flow: FlowId, dest: int) -> int:
        return self.backlogs.get((flow, dest), 0)

    def increment(self, flow: FlowId, dest: int, n: int = 1) -> None:
        if dest == self.node_id:
            return
        self.backlogs[(flow, dest)] = self.backlogs.get((flow, dest), 0) + n

    def decrement(self, flow: FlowId, dest: int, n: int = 1) -> None:
        key = (flow, dest)
        cur = self.backlogs.get(key, 0)
        self.backlogs[key] = max(0, cur - n)

    def flow_backlogs(self, flow: FlowId) -> dict[int, int]:
        return {d: self.backlog(flow, d) for d in self.dests_here(flow)}

    def total(self) -> int:
        return sum(self.backlogs.values())

    def entries(self) -> list[tuple[FlowId, int, int]]:
        """(flow, destination, backlog) triples in deterministic order."""
        keys = sorted(self.backlogs, key=lambda k: (k[0].source, k[0].destinations, k[1]))
        return [(f, d, self.backlogs[(f, d)]) for f, d in keys]


def flow_score(
    local: dict[int, int], remote: dict[int, int], alpha: float
) -> float:
    """Sum over destinations of [Q_local - Q_remote]^+ times the penalty.

    Unicast is the single-destination special case.  Remote backlogs come
    from the neighbor's last SYN and may be stale; they are used as-is.
    """
    total = 0
    for d, qi in local.items():
        qj = remote.get(d, 0)
        total += max(qi - qj, 0)
    return total * alpha


def select_flow(
    candidates: list[tuple[FlowId, dict[int, int], dict[int, int], float]],
) -> tuple[FlowId, float] | None:
    """Argmax of flow_score over (flow, local, remote, alpha) candidates.

    Returns None when every score is zero.  Ties break on the lower
    (source, destinations) flow identity for reproducibility.
    """
    best: tuple[FlowId, float] | None = None
    for flow, local, remote, alpha in sorted(
        candidates, key=lambda c: (c[0].source, c[0].destinations)
    ):
        score = flow_score(local, remote, alpha)
        if score > 0 and (best is None or score > best[1]):
            best = (flow, score)
    return best


def spectrum_utility(c_ij: float, score: float) -> float:
    """Link rate times the penalized positive backlog differential."""
    if c_ij < 0:
        raise ValueError("link rate must be non-negative")
    return c_ij * score


def select_next_hop(
    candidates: list[tuple[int, int, float, FlowId, float]],
) -> tuple[int, int, FlowId, float] | None:
    """Argmax of utility over (neighbor, channel, c_ij, flow, score) entries.

    Returns (neighbor, channel, flow, utility) or None if the best utility is
    zero.  Ties break on (lower neighbor id, lower channel index).
    """
    best = None
    for nbr, chan, c_ij, flow, score in candidates:
        u = spectrum_utility(c_ij, score)
        if u <= 0:
            continue
        key = (-u, nbr, chan)
        if best is None or key < best[0]:
            best = (key, (nbr, chan, flow, u))
    return best[1] if best else None
