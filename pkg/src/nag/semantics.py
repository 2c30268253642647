"""Single-pass attribute evaluation over derivation trees.

annotate() walks a tree depth-first, left to right, computing every
occurrence's inherited attributes from its parent's inherited attributes and
its left siblings' synthesized attributes, then its synthesized attributes on
the way back up.  Every equation is evaluated exactly once.  Validity
conjuncts record a CheckEvent wherever they are evaluated, and a failed
lookup makes the enclosing conjunct false rather than aborting (generation
has to be able to score invalid candidates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .astio import AstNode, AstError
from .attrs import (
    DEFAULT_NAMESPACES,
    EMPTY_FLAGS,
    EMPTY_SYMTAB,
    CheckEvent,
    FlagState,
    Namespaces,
    SemState,
    SymTab,
    VarId,
)
from .grammar import LHS, GrammarSpec, Production, java_subset_grammar
from .registry import ApiRegistry, ApiSignature


class EvalError(Exception):
    """An equation referenced an attribute missing at runtime; this signals a
    grammar-encoding bug (or an unresolvable api), not bad user input."""


@dataclass(frozen=True)
class MethodContext:
    """Everything known about the method whose body is being analyzed: its
    formals and the surrounding class's fields and internal methods, the
    declared return type, and the signature registry the class compiles
    against."""

    formals: tuple = ()
    fields: tuple = ()
    internal_methods: tuple = ()
    method_ret_type: str = "void"
    registry: ApiRegistry = field(default_factory=ApiRegistry)
    namespaces: Namespaces = DEFAULT_NAMESPACES

    def __post_init__(self) -> None:
        for var, _ in self.formals:
            if var.kind != "formal":
                raise ValueError(f"formal parameter slot has kind {var.kind}")
        for var, _ in self.fields:
            if var.kind != "field":
                raise ValueError(f"field slot has kind {var.kind}")

    def resolve_api(self, name: str) -> ApiSignature:
        for sig in self.internal_methods:
            if sig.name == name:
                return sig
        return self.registry.resolve(name)

    def has_api(self, name: str) -> bool:
        return any(s.name == name for s in self.internal_methods) or name in self.registry

    def api_names(self) -> list:
        names = set(self.registry.names())
        names.update(s.name for s in self.internal_methods)
        return sorted(names)


def initial_attributes(ctx: MethodContext) -> SemState:
    """The root's inherited state: formals and fields enter the symbol table
    already initialized; no statement has run, so all other flags are down."""
    entries = []
    seen = set()
    for var, type_name in (*ctx.formals, *ctx.fields):
        if var in seen:
            raise ValueError(f"duplicate context slot {var.key()}")
        seen.add(var)
        entries.append((var, type_name))
    flags = FlagState(
        initialized={var: True for var, _ in entries},
        used={},
        ret_done=False,
        itr_vec=(False, False),
    )
    return SemState(
        symtab=SymTab(entries),
        flags=flags,
        method_ret_type=ctx.method_ret_type,
    )


@dataclass
class EvalStats:
    nodes: int = 0
    equation_evals: int = 0


@dataclass(frozen=True)
class AnnotatedNode:
    """An AstNode plus its attribute annotations."""

    symbol: str
    rule_id: Optional[str]
    children: tuple
    payload: Optional[Union[VarId, str]]
    inh: SemState
    syn: SemState
    valid: bool
    events: tuple = ()

    @property
    def is_leaf(self) -> bool:
        return self.rule_id is None

    def walk(self, path=()):
        yield path, self
        for i, child in enumerate(self.children):
            yield from child.walk(path + (i,))

    def choice(self) -> str:
        if self.rule_id is not None:
            return self.rule_id
        if isinstance(self.payload, VarId):
            return self.payload.key()
        return str(self.payload)

    def strip(self) -> AstNode:
        return AstNode(
            symbol=self.symbol,
            rule_id=self.rule_id,
            children=tuple(c.strip() for c in self.children),
            payload=self.payload,
        )

    def all_events(self) -> list:
        out = []
        for _, n in self.walk():
            out.extend(n.events)
        return out


# Attribute-dict <-> SemState conversion.  Inherited dicts use the symTab /
# attrIn / methodRetType / typeList / exprType keys; synthesized dicts use
# symTabOut / attrOut / retType / exprType.

def _inh_state(attrs: Mapping) -> SemState:
    type_list = attrs.get("typeList")
    if type_list is None and attrs.get("expType") is not None:
        # a single expected type (leaf sites) rides the typeList channel
        type_list = (attrs["expType"],)
    return SemState(
        symtab=attrs.get("symTab", EMPTY_SYMTAB),
        flags=attrs.get("attrIn", EMPTY_FLAGS),
        method_ret_type=attrs.get("methodRetType"),
        type_list=type_list,
        expr_type=attrs.get("exprType"),
    )


def _syn_state(attrs: Mapping) -> SemState:
    return SemState(
        symtab=attrs.get("symTabOut", EMPTY_SYMTAB),
        flags=attrs.get("attrOut", EMPTY_FLAGS),
        ret_type=attrs.get("retType"),
        expr_type=attrs.get("exprType"),
    )


def _inh_dict(state: SemState) -> dict:
    # methodRetType and exprType may legitimately be None (an unknown return
    # type, a receiverless call); typeList is present only where owed
    out = {"symTab": state.symtab, "attrIn": state.flags,
           "methodRetType": state.method_ret_type, "exprType": state.expr_type}
    if state.type_list is not None:
        out["typeList"] = state.type_list
    return out


def _syn_dict(state: SemState) -> dict:
    return {
        "symTabOut": state.symtab,
        "attrOut": state.flags,
        "retType": state.ret_type,
        "exprType": state.expr_type,
    }


def leaf_synthesize(symbol: str, payload, inh: Mapping, ctx: MethodContext) -> dict:
    """Synthesized attributes of a terminal leaf, from its payload.

    A Type leaf reports its name and the constructor parameter list its name
    keys to in the registry.  An Api leaf reports its full signature; calls
    named hasNext / next raise the respective half of the iterator pair, all
    other calls pass the pair through.
    """

    if symbol == "Var":
        return {"id": payload}
    if symbol == "Type":
        return {"name": payload, "params": ctx.registry.constructor_params(payload)}
    if symbol == "Api":
        try:
            sig = ctx.resolve_api(payload)
        except Exception:
            raise EvalError(f"unresolvable api {payload!r}") from None
        flags_in = inh.get("attrIn", EMPTY_FLAGS)
        itr = flags_in.itr_vec or (False, False)
        if sig.name == "hasNext":
            flags_out = flags_in.with_itr((True, False))
        elif sig.name == "next":
            flags_out = flags_in.with_itr((itr[0], True))
        else:
            flags_out = flags_in
        return {
            "name": sig.name,
            "params": sig.param_types,
            "exprType": sig.receiver_type,
            "retType": sig.return_type,
            "attrOut": flags_out,
        }
    raise EvalError(f"not a terminal symbol: {symbol}")


def _eval_equations(prod: Production, occ: int, lhs_attrs: Mapping,
                    child_attrs: Sequence, emit, stats: Optional[EvalStats]) -> dict:
    """Evaluate every equation of `prod` whose target occurrence is `occ`."""

    def value_of(ref) -> object:
        attrs = lhs_attrs if ref.occ == LHS else child_attrs[ref.occ]
        if ref.attr not in attrs:
            raise EvalError(f"{prod.rule_id}: attribute {ref.tag} missing at runtime")
        return attrs[ref.attr]

    out = {}
    for eq in prod.equations:
        if eq.target.occ != occ:
            continue
        args = [value_of(ref) for ref in eq.inputs]
        if stats is not None:
            stats.equation_evals += 1
        out[eq.target.attr] = eq.fn(*args, emit) if eq.checks else eq.fn(*args)
    return out


def eval_step(production: Production, child_index: int,
              parent_inherited: Union[SemState, Mapping],
              synth_so_far: Sequence) -> SemState:
    """Inherited state of one child, exactly as annotate computes it.

    synth_so_far holds the synthesized states of children 0..child_index-1,
    each either a SemState or a raw attribute mapping (the latter is needed
    when an equation consumes a sibling leaf's payload attributes).
    """

    if child_index >= production.arity:
        raise ValueError(f"child index {child_index} out of range for {production.rule_id}")
    lhs_attrs = parent_inherited if isinstance(parent_inherited, Mapping) else _inh_dict(parent_inherited)
    children = [s if isinstance(s, Mapping) else _syn_dict(s) for s in synth_so_far]
    children += [{}] * (production.arity - len(children))
    attrs = _eval_equations(production, child_index, lhs_attrs, children, _no_emit, None)
    return _inh_state(attrs)


def _no_emit(check: str, passed: bool) -> None:
    pass


def annotate(ast: AstNode, ctx: MethodContext,
             grammar: Optional[GrammarSpec] = None,
             stats: Optional[EvalStats] = None) -> AnnotatedNode:
    """Annotate every node with inherited and synthesized attributes, the
    validity bit, and the conjunct events evaluated at it."""

    g = grammar or java_subset_grammar()
    root_inh = _inh_dict(initial_attributes(ctx))

    def visit(n: AstNode, inh: Mapping, path: tuple) -> AnnotatedNode:
        if stats is not None:
            stats.nodes += 1
        if n.is_leaf:
            syn = leaf_synthesize(n.symbol, n.payload, inh, ctx)
            node = AnnotatedNode(
                symbol=n.symbol, rule_id=None, children=(), payload=n.payload,
                inh=_inh_state(inh), syn=_syn_state(syn), valid=True,
            )
            object.__setattr__(node, "_syn_attrs", syn)
            return node
        prod = g.production(n.rule_id)
        if len(n.children) != prod.arity:
            raise AstError(
                f"arity mismatch at {path}: {n.rule_id} wants {prod.arity}"
            )
        events = []

        def emit(check: str, passed: bool) -> None:
            events.append(CheckEvent(n.rule_id, check, bool(passed), path))

        annotated = []
        child_attrs = []
        for i, child in enumerate(n.children):
            child_inh = _eval_equations(prod, i, inh, child_attrs, emit, stats)
            a = visit(child, child_inh, path + (i,))
            annotated.append(a)
            child_attrs.append(a._syn_attrs)
        syn = _eval_equations(prod, LHS, inh, child_attrs, emit, stats)
        valid = bool(syn.get("valid", True))
        node = AnnotatedNode(
            symbol=n.symbol, rule_id=n.rule_id, children=tuple(annotated),
            payload=n.payload, inh=_inh_state(inh), syn=_syn_state(syn),
            valid=valid, events=tuple(events),
        )
        object.__setattr__(node, "_syn_attrs", syn)
        return node

    root = visit(ast, root_inh, ())
    return root


def dump_annotations(root: AnnotatedNode) -> str:
    """Human-readable attribute dump, one line per node."""
    lines = []
    for path, n in root.walk():
        loc = ".".join(map(str, path)) or "root"
        head = f"{n.symbol}#{n.rule_id}" if n.rule_id else f"{n.symbol}={n.choice()}"
        symtab = ",".join(f"{v.key()}:{t}" for v, t in n.inh.symtab.items())
        out = ",".join(f"{v.key()}:{t}" for v, t in n.syn.symtab.items())
        lines.append(
            f"{loc}\t{head}\tsymTab={{{symtab}}}\tsymTabOut={{{out}}}\tvalid={n.valid}"
        )
    return "\n".join(lines)
