"""AA-CBR: the argumentation framework induced by a case base and a new case."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .argumentation import AAFramework, GroundedExtension, grounded, labelling, to_dot
from .domain import Case, CaseBase, check_outcome

DEFAULT = "default"
PREVIOUS = "previous"
NEW = "new"


def node_id(factors: Iterable[str], tag) -> str:
    """Stable argument id for a situation and an outcome tag (``0``, ``1`` or ``?``)."""
    return "{" + ",".join(sorted(factors)) + "}:" + str(tag)


@dataclass(frozen=True)
class Node:
    kind: str
    factors: frozenset
    outcome: Optional[int]

    @property
    def id(self) -> str:
        return node_id(self.factors, "?" if self.outcome is None else self.outcome)

    @property
    def label(self) -> str:
        tag = "?" if self.outcome is None else self.outcome
        body = f"({{{','.join(sorted(self.factors))}}},{tag})"
        return f"default: {body}" if self.kind == DEFAULT else body


@dataclass(frozen=True)
class CbrFramework:
    framework: AAFramework
    node_map: dict
    default_id: str
    new_id: str

    def to_dot(self, extension: GroundedExtension | None = None) -> str:
        return to_dot(self.framework, extension)


@dataclass(frozen=True)
class CbrVerdict:
    outcome: int
    default: int
    default_in_grounded: bool
    grounded: GroundedExtension
    framework: CbrFramework = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {
            "outcome": str(self.outcome),
            "default": str(self.default),
            "default_in_grounded": self.default_in_grounded,
            "grounded": list(self.grounded),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def case_attacks(x: Case, y: Case, case_base: CaseBase) -> bool:
    """Whether ``x`` attacks ``y`` among previous cases and the default case.

    Requires different outcomes, strictly more specific ``x``, and no case in
    ``case_base`` with ``x``'s outcome strictly between the two situations.
    """
    if x.outcome == y.outcome or not y.factors < x.factors:
        return False
    return not any(
        z.outcome == x.outcome and y.factors < z.factors < x.factors for z in case_base
    )


def is_irrelevant(y: Case, n: Iterable[str]) -> bool:
    """Whether the new case ``n`` attacks ``y`` (``y`` is not covered by ``n``)."""
    return not y.factors <= frozenset(n)


def build_framework(case_base: CaseBase, default, n: Iterable[str]) -> CbrFramework:
    default = check_outcome(default)
    n = frozenset(n)
    nodes: dict[str, Node] = {}
    default_node = Node(DEFAULT, frozenset(), default)
    for case in case_base:
        node = Node(PREVIOUS, case.factors, case.outcome)
        nodes[node.id] = node
    # (∅, default) in Γ is the same argument as the default one
    nodes[default_node.id] = default_node
    new_node = Node(NEW, n, None)
    nodes[new_node.id] = new_node

    cases = {nid: Case(nd.factors, nd.outcome) for nid, nd in nodes.items() if nd.kind != NEW}
    attacks = []
    for xid, x in cases.items():
        for yid, y in cases.items():
            if case_attacks(x, y, case_base):
                attacks.append((xid, yid))
    for yid, y in cases.items():
        if nodes[yid].kind == PREVIOUS and is_irrelevant(y, n):
            attacks.append((new_node.id, yid))

    framework = AAFramework(nodes, attacks, labels={nid: nd.label for nid, nd in nodes.items()})
    return CbrFramework(framework, nodes, default_node.id, new_node.id)


def aacbr_outcome(case_base: CaseBase, default, n: Iterable[str]) -> CbrVerdict:
    """Predict the outcome of ``n``: the default iff the default argument is grounded."""
    default = check_outcome(default)
    cbr = build_framework(case_base, default, n)
    ext = grounded(cbr.framework)
    won = cbr.default_id in ext.members
    return CbrVerdict(
        outcome=default if won else 1 - default,
        default=default,
        default_in_grounded=won,
        grounded=ext,
        framework=cbr,
    )


@dataclass
class DisputeNode:
    id: str
    label: str
    role: str  # "proponent" | "opponent"
    status: str  # grounded labelling: "in" | "out" | "undec"
    children: list = field(default_factory=list)
    truncated: bool = False

    @property
    def winning(self) -> bool:
        return self.status == "in"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "role": self.role,
            "status": self.status,
            "winning": self.winning,
            "truncated": self.truncated,
            "children": [c.to_dict() for c in self.children],
        }

    def render(self, indent: int = 0) -> str:
        mark = "WIN " if self.winning else "LOSE"
        extra = " [truncated]" if self.truncated else ""
        lines = ["  " * indent + f"[{mark}] {self.role}: {self.label}{extra}"]
        lines.extend(c.render(indent + 1) for c in self.children)
        return "\n".join(lines)


def dispute_tree(case_base: CaseBase, default, n: Iterable[str]) -> DisputeNode:
    """Explain the verdict as an alternating proponent/opponent tree.

    The root is the default argument; each node's children are its attackers.
    Depth is capped at ``len(case_base) + 1`` and an argument is never
    repeated along a branch.
    """
    verdict = aacbr_outcome(case_base, default, n)
    cbr = verdict.framework
    af = cbr.framework
    status = labelling(af, verdict.grounded)
    max_depth = len(case_base) + 1

    def expand(arg: str, depth: int, path: frozenset) -> DisputeNode:
        node = DisputeNode(
            id=arg,
            label=af.labels[arg],
            role="proponent" if depth % 2 == 0 else "opponent",
            status=status[arg],
        )
        attackers = sorted(af.attackers(arg))
        if attackers and depth >= max_depth:
            node.truncated = True
            return node
        for att in attackers:
            if att in path:
                node.truncated = True
                continue
            node.children.append(expand(att, depth + 1, path | {att}))
        return node

    return expand(cbr.default_id, 0, frozenset([cbr.default_id]))
