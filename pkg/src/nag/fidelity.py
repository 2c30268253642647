"""Fidelity of generated bodies against a reference, best over k candidates.

Four metrics, all invariant under consistent renaming of local variables:
the Jaccard similarity of api-call sets, of api-call sequences along code
paths, and of root-to-leaf tree paths with variable identities erased, plus
exact tree match after canonical renumbering of locals.  Constructor
invocations count as calls under their registry name (`Type.<init>`).

Path conventions (code paths are not defined by the surface language alone,
so these are fixed here): a loop contributes its zero-iteration and
one-iteration paths; a branch contributes both arms; a try/catch block
contributes the full block's path and, per handler, the full block followed
by that handler.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .astio import AstNode
from .attrs import VarId
from .registry import ctor_name


class PathBudgetExceeded(Exception):
    def __init__(self, count: int, cap: int) -> None:
        super().__init__(f"path enumeration produced {count} paths (cap {cap})")
        self.count = count


DEFAULT_PATH_CAP = 4096


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def api_call_set(ast: AstNode) -> set:
    """Every call name appearing anywhere in the tree."""
    calls = set()
    for _, n in ast.walk():
        if n.is_leaf and n.symbol == "Api":
            calls.add(n.payload)
        elif n.rule_id == "b2":
            calls.add(ctor_name(n.children[2].payload))
    return calls


def _seq_product(prefixes: list, suffixes: list, cap: int) -> list:
    out = []
    for p in prefixes:
        for s in suffixes:
            out.append(p + s)
            if len(out) > cap:
                raise PathBudgetExceeded(len(out), cap)
    return out


def api_call_sequences(ast: AstNode, cap: int = DEFAULT_PATH_CAP) -> set:
    """Ordered call names along each enumerated code path."""

    def seqs(n: AstNode) -> list:
        rid = n.rule_id
        if rid in ("a1", "c1.a", "c1.b", "c1.c", "a4", "a5"):
            return seqs(n.children[0])
        if rid in ("a2b", "a3", "a6"):
            return [()]  # declarations and returns invoke nothing
        if rid == "a2a":
            return _seq_product(seqs(n.children[0]), seqs(n.children[1]), cap)
        if rid == "b2":
            return [(ctor_name(n.children[2].payload),)]
        if rid == "b3":
            return [tuple(_chain_calls(n))]
        if rid == "c2":
            cond = [(n.children[0].children[0].children[0].payload,)]
            arms = seqs(n.children[1]) + seqs(n.children[2])
            return _seq_product(cond, arms, cap)
        if rid == "c3":
            cond = (n.children[0].children[0].children[0].payload,)
            return [cond] + _seq_product([cond], seqs(n.children[1]), cap)
        if rid == "c4":
            block = seqs(n.children[0])
            out = list(block)
            for handler in _handlers(n.children[1]):
                out.extend(_seq_product(block, seqs(handler), cap))
            if len(out) > cap:
                raise PathBudgetExceeded(len(out), cap)
            return out
        raise ValueError(f"unhandled rule {rid!r}")

    return set(seqs(ast))


def _chain_calls(invoke: AstNode) -> Iterable[str]:
    yield invoke.children[2].children[0].payload
    more = invoke.children[3]
    while more.rule_id == "b4a":
        yield more.children[0].children[0].payload
        more = more.children[1]


def _handlers(catch: AstNode) -> Iterable[AstNode]:
    while catch.rule_id == "c5a":
        yield catch.children[2]
        catch = catch.children[3]


def program_paths(ast: AstNode, cap: int = DEFAULT_PATH_CAP) -> set:
    """Root-to-leaf label paths with variable identities erased: structural
    nodes label as (symbol, rule), leaves by payload except variables, which
    keep only their kind."""
    paths = set()

    def label(n: AstNode):
        if not n.is_leaf:
            return (n.symbol, n.rule_id)
        if isinstance(n.payload, VarId):
            return (n.symbol, n.payload.kind)
        return (n.symbol, n.payload)

    def walk(n: AstNode, acc: tuple):
        acc = acc + (label(n),)
        if not n.children:
            paths.add(acc)
            if len(paths) > cap:
                raise PathBudgetExceeded(len(paths), cap)
            return
        for child in n.children:
            walk(child, acc)

    walk(ast, ())
    return paths


def canonical_locals(ast: AstNode) -> AstNode:
    """Renumber local slots in first-appearance pre-order; other kinds are
    fixed by the method context and keep their indices."""
    mapping = {}

    def rename(n: AstNode) -> AstNode:
        if n.is_leaf:
            v = n.payload
            if isinstance(v, VarId) and v.kind == "local":
                if v.index not in mapping:
                    mapping[v.index] = len(mapping)
                return AstNode(symbol=n.symbol,
                               payload=VarId("local", mapping[v.index]))
            return n
        return AstNode(symbol=n.symbol, rule_id=n.rule_id,
                       children=tuple(rename(c) for c in n.children))

    return rename(ast)


def ast_exact_match(candidate: AstNode, reference: AstNode) -> bool:
    return canonical_locals(candidate) == canonical_locals(reference)


@dataclass(frozen=True)
class FidelityReport:
    api_call_set: float
    api_call_sequences: float
    program_paths: float
    ast_exact_match: float

    def rows(self) -> list:
        return [
            ("Set of API calls", self.api_call_set),
            ("Sequences of API calls", self.api_call_sequences),
            ("Sequences of program paths", self.program_paths),
            ("AST exact match", self.ast_exact_match),
        ]


def fidelity_report(candidates, reference: AstNode,
                    cap: int = DEFAULT_PATH_CAP) -> FidelityReport:
    """Best score per metric over the candidate list."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("at least one candidate is required")
    ref_set = api_call_set(reference)
    ref_seq = api_call_sequences(reference, cap)
    ref_paths = program_paths(reference, cap)
    best = [0.0, 0.0, 0.0, 0.0]
    for c in candidates:
        best[0] = max(best[0], jaccard(api_call_set(c), ref_set))
        best[1] = max(best[1], jaccard(api_call_sequences(c, cap), ref_seq))
        best[2] = max(best[2], jaccard(program_paths(c, cap), ref_paths))
        best[3] = max(best[3], 1.0 if ast_exact_match(c, reference) else 0.0)
    return FidelityReport(*best)


def aggregate_fidelity(reports) -> FidelityReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    n = len(reports)
    return FidelityReport(
        api_call_set=sum(r.api_call_set for r in reports) / n,
        api_call_sequences=sum(r.api_call_sequences for r in reports) / n,
        program_paths=sum(r.program_paths for r in reports) / n,
        ast_exact_match=sum(r.ast_exact_match for r in reports) / n,
    )


def format_fidelity(report: FidelityReport, tsv: bool = False) -> str:
    lines = []
    for name, value in report.rows():
        if tsv:
            key = name.replace(" ", "_").lower()
            lines.append(f"{key}\t{value:.4f}")
        else:
            lines.append(f"{name:<30} {100.0 * value:>7.2f}%")
    return "\n".join(lines)
