"""Graphviz DOT rendering of a CSN."""

from __future__ import annotations

import re

from .core import CSN

_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_KEYWORDS = {"node", "edge", "graph", "digraph", "subgraph", "strict"}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def node_id(label: str) -> str:
    if _ID.match(label) and label.lower() not in _KEYWORDS:
        return label
    return _quote(label)


def export_dot(csn: CSN, name: str = "CSN") -> str:
    """DOT digraph with one node per subgroup and one edge per observed score.

    Hostile edges are red and dashed, friendly ones green, neutral ones grey;
    output order follows subgroup indices so the text is reproducible.
    """
    lines = [f"digraph {node_id(name)} {{", "  rankdir=LR;", '  node [shape=ellipse, fontname="Helvetica"];',
             '  edge [fontname="Helvetica"];']
    ids = {g.index: node_id(g.label) for g in csn.subgroups}
    for g in csn.subgroups:
        label = f"{g.label}\\nn={int(csn.comment_count[g.index])}"
        lines.append(f'  {ids[g.index]} [label="{label.replace(chr(34), chr(92) + chr(34))}"];')
    for i, j, s in csn.edges():
        if s < 0:
            style = 'color="red", fontcolor="red", style="dashed"'
        elif s > 0:
            style = 'color="darkgreen", fontcolor="darkgreen", style="solid"'
        else:
            style = 'color="gray50", fontcolor="gray50", style="dotted"'
        lines.append(f'  {ids[i]} -> {ids[j]} [label="{s:.2f}", {style}, penwidth={1 + 2 * abs(s):.2f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
