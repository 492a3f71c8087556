"""Abstract argumentation frameworks and grounded semantics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping


class UnknownArgument(KeyError):
    pass


class AAFramework:
    """A set of arguments and an attack relation over them.

    ``labels`` maps argument ids to a display string (used for DOT/JSON export).
    Self-attacks are allowed.
    """

    def __init__(
        self,
        arguments: Iterable[Hashable],
        attacks: Iterable[tuple[Hashable, Hashable]] = (),
        labels: Mapping[Hashable, str] | None = None,
    ):
        self.arguments = frozenset(arguments)
        self.attacks = frozenset((a, b) for a, b in attacks)
        for a, b in self.attacks:
            if a not in self.arguments or b not in self.arguments:
                raise UnknownArgument(f"attack ({a!r}, {b!r}) references an unknown argument")
        self.labels = {a: str(a) for a in self.arguments}
        if labels:
            self.labels.update({a: labels[a] for a in labels if a in self.arguments})
        attackers = {a: set() for a in self.arguments}
        for a, b in self.attacks:
            attackers[b].add(a)
        self._attackers = {a: frozenset(s) for a, s in attackers.items()}

    def __repr__(self) -> str:
        return f"AAFramework({len(self.arguments)} arguments, {len(self.attacks)} attacks)"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AAFramework)
            and self.arguments == other.arguments
            and self.attacks == other.attacks
        )

    def __hash__(self) -> int:
        return hash((self.arguments, self.attacks))

    def attackers(self, arg) -> frozenset:
        try:
            return self._attackers[arg]
        except KeyError:
            raise UnknownArgument(arg) from None

    def defended_by(self, members: frozenset) -> frozenset:
        """Arguments all of whose attackers are attacked by ``members``."""
        hit = {b for a, b in self.attacks if a in members}
        return frozenset(x for x in self.arguments if self._attackers[x] <= hit)

    def sorted_arguments(self) -> list:
        return sorted(self.arguments, key=str)


@dataclass(frozen=True)
class GroundedExtension:
    members: frozenset
    layers: tuple = field(default=())

    def __contains__(self, arg) -> bool:
        return arg in self.members

    def __iter__(self):
        return iter(sorted(self.members, key=str))

    def __len__(self) -> int:
        return len(self.members)


def grounded(framework: AAFramework) -> GroundedExtension:
    """Compute the grounded extension by iterating the characteristic function.

    ``layers[0]`` holds the unattacked arguments and ``layers[i + 1]`` the
    arguments defended by ``layers[i]``; iteration stops at the first repeat.
    """
    layer = framework.defended_by(frozenset())
    layers = [layer]
    while True:
        nxt = framework.defended_by(layer)
        if nxt == layer:
            break
        layers.append(nxt)
        layer = nxt
    return GroundedExtension(members=layer, layers=tuple(layers))


def is_in_grounded(framework: AAFramework, arg) -> bool:
    if arg not in framework.arguments:
        raise UnknownArgument(arg)
    return arg in grounded(framework).members


def labelling(framework: AAFramework, extension: GroundedExtension | None = None) -> dict:
    """Map each argument to ``"in"``, ``"out"`` or ``"undec"``."""
    ext = extension if extension is not None else grounded(framework)
    labels = {}
    for a in framework.arguments:
        if a in ext.members:
            labels[a] = "in"
        elif framework.attackers(a) & ext.members:
            labels[a] = "out"
        else:
            labels[a] = "undec"
    return labels


def to_json(framework: AAFramework, extension: GroundedExtension | None = None) -> str:
    ext = extension if extension is not None else grounded(framework)
    doc = {
        "arguments": [str(a) for a in framework.sorted_arguments()],
        "attacks": sorted([str(a), str(b)] for a, b in framework.attacks),
        "grounded": [str(a) for a in ext],
    }
    return json.dumps(doc)


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(framework: AAFramework, extension: GroundedExtension | None = None) -> str:
    """Render as Graphviz DOT; grounded members are filled."""
    ext = extension if extension is not None else grounded(framework)
    lines = ["digraph AF {", "  node [shape=box];"]
    for a in framework.sorted_arguments():
        style = ", style=filled, fillcolor=lightgrey" if a in ext.members else ""
        lines.append(f"  {_dot_quote(str(a))} [label={_dot_quote(framework.labels[a])}{style}];")
    for a, b in sorted(framework.attacks, key=lambda e: (str(e[0]), str(e[1]))):
        lines.append(f"  {_dot_quote(str(a))} -> {_dot_quote(str(b))};")
    lines.append("}")
    return "\n".join(lines) + "\n"
