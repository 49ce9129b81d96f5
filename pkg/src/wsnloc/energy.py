"""Joule accounting for localization runs.

Radio pricing is per logical message: one send and one receive per
(sender, receiver, iteration), independent of payload size. Compute is
priced in abstract "steps"; the step counts charged by the localizers are
declared in STEP_TABLE and echoed into every EnergyConfig so results always
carry the cost model they were produced under:

  * belief propagation charges 2 steps per particle for each outgoing
    message (sampling + weighting) and 1 step per particle per incoming
    message for each belief update;
  * the hop-count baseline charges 1 step per received flood packet and a
    flat 50 steps per multilateration solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "STEP_TABLE", "MessageTrace", "EnergyConfig", "NodeEnergy", "EnergyLedger",
    "account_trace", "energy_report", "write_energy_csv", "write_energy_summary_csv",
]

STEP_TABLE = {
    "nbp_message_per_particle": 2,
    "nbp_belief_update_per_particle_per_message": 1,
    "dvhop_flood_receive": 1,
    "dvhop_multilateration": 50,
}


class MessageTrace:
    """Per-node, per-iteration counts of sent/received messages and compute steps."""

    def __init__(self, node_ids):
        self.node_ids = tuple(sorted(int(t) for t in node_ids))
        self._counts: dict[tuple[int, int], list[int]] = {}

    def add(self, node: int, iteration: int, sent: int = 0, received: int = 0,
            steps: int = 0) -> None:
        cell = self._counts.setdefault((node, iteration), [0, 0, 0])
        cell[0] += sent
        cell[1] += received
        cell[2] += steps

    def rows(self):
        """Sorted (node_id, iteration, sent, received, steps) tuples."""
        return [(t, it, c[0], c[1], c[2])
                for (t, it), c in sorted(self._counts.items())]

    def per_node_totals(self) -> dict:
        totals = {t: [0, 0, 0] for t in self.node_ids}
        for (t, _), c in self._counts.items():
            cell = totals.setdefault(t, [0, 0, 0])
            cell[0] += c[0]
            cell[1] += c[1]
            cell[2] += c[2]
        return {t: tuple(c) for t, c in totals.items()}

    def total_sent(self) -> int:
        return sum(c[0] for c in self._counts.values())

    def total_received(self) -> int:
        return sum(c[1] for c in self._counts.values())

    def concat(self, other: "MessageTrace") -> "MessageTrace":
        merged = MessageTrace(set(self.node_ids) | set(other.node_ids))
        for trace in (self, other):
            for (t, it), c in trace._counts.items():
                merged.add(t, it, sent=c[0], received=c[1], steps=c[2])
        return merged

    def write_csv(self, path) -> None:
        lines = ["node_id,iteration,msgs_sent,msgs_received,compute_steps"]
        lines += [f"{t},{it},{s},{r},{st}" for t, it, s, r, st in self.rows()]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class EnergyConfig:
    initial_j: float = 100.0
    send_j: float = 0.003
    receive_j: float = 0.001
    step_j: float = 0.0001
    step_table: dict = field(default_factory=lambda: dict(STEP_TABLE))

    def __post_init__(self):
        if self.initial_j <= 0:
            raise ValueError("initial_j must be positive")
        if min(self.send_j, self.receive_j, self.step_j) < 0:
            raise ValueError("per-event costs must be >= 0")


@dataclass(frozen=True)
class NodeEnergy:
    sent: int
    received: int
    steps: int
    consumed_j: float
    remaining_j: float
    depleted: bool


@dataclass
class EnergyLedger:
    per_node: dict
    config: EnergyConfig
    method: str = ""
    placement: str = ""

    def mean_remaining(self) -> float:
        return sum(e.remaining_j for e in self.per_node.values()) / len(self.per_node)

    def total_sent(self) -> int:
        return sum(e.sent for e in self.per_node.values())

    def total_received(self) -> int:
        return sum(e.received for e in self.per_node.values())

    def total_steps(self) -> int:
        return sum(e.steps for e in self.per_node.values())


def account_trace(trace: MessageTrace, config: EnergyConfig,
                  method: str = "", placement: str = "") -> EnergyLedger:
    """Fold every traced event into a per-node joule ledger."""
    per_node = {}
    for t, (sent, received, steps) in sorted(trace.per_node_totals().items()):
        consumed = sent * config.send_j + received * config.receive_j + steps * config.step_j
        remaining = config.initial_j - consumed
        per_node[t] = NodeEnergy(sent, received, steps, consumed, remaining,
                                 depleted=remaining < 0)
    return EnergyLedger(per_node, config, method=method, placement=placement)


def energy_report(ledgers):
    """Mean remaining energy and radio totals grouped by (method, placement)."""
    if not ledgers:
        raise ValueError("need at least one ledger")
    groups: dict[tuple[str, str], list[EnergyLedger]] = {}
    for ledger in ledgers:
        groups.setdefault((ledger.method, ledger.placement), []).append(ledger)
    report = []
    for (method, placement), group in sorted(groups.items()):
        report.append({
            "method": method,
            "placement": placement,
            "mean_remaining_j": sum(l.mean_remaining() for l in group) / len(group),
            "total_sent": sum(l.total_sent() for l in group),
            "total_received": sum(l.total_received() for l in group),
            "total_steps": sum(l.total_steps() for l in group),
        })
    return report


def write_energy_csv(ledgers, path) -> None:
    lines = ["method,placement,node_id,sent,received,steps,consumed_j,remaining_j"]
    for ledger in ledgers:
        for t, e in sorted(ledger.per_node.items()):
            lines.append(f"{ledger.method},{ledger.placement},{t},{e.sent},{e.received},"
                         f"{e.steps},{e.consumed_j:.6f},{e.remaining_j:.6f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_energy_summary_csv(ledgers, path) -> None:
    lines = ["method,placement,mean_remaining_j,total_sent,total_received,total_steps"]
    for row in energy_report(ledgers):
        lines.append(f"{row['method']},{row['placement']},{row['mean_remaining_j']:.6f},"
                     f"{row['total_sent']},{row['total_received']},{row['total_steps']}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
