"""Grammar data model and the built-in Java-subset attribute grammar.

Productions carry inspectable attribute equations: each equation names its
target attribute occurrence, its input attribute occurrences, and a function
over the input values.  check_l_attributed verifies that every equation is
computable in a single depth-first left-to-right pass.

Occurrences are tagged the way the rule labels write them: same-named
occurrences are numbered leftmost first, counting the left-hand side when it
shares the nonterminal (so in a2a the LHS is Stmt$0 and the children are
Stmt$1 and Stmt$2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .attrs import (
    EMPTY_FLAGS,
    EMPTY_SYMTAB,
    MISSING,
    FlagState,
    SymTab,
    VarId,
    join_branch_flags,
    type_conjunct,
)

LHS = -1  # occurrence index of the left-hand side


@dataclass(frozen=True)
class Symbol:
    name: str
    is_terminal: bool = False  # terminal-vocabulary symbols carry a payload
    inherited: frozenset = frozenset()
    synthesized: frozenset = frozenset()


@dataclass(frozen=True)
class AttrRef:
    occ: int  # LHS or a 0-based child position
    attr: str
    tag: str  # as written in the rule, e.g. "Stmt$2.symTab"


@dataclass(frozen=True)
class Equation:
    target: AttrRef
    inputs: tuple[AttrRef, ...]
    fn: Callable
    checks: bool = False  # checking equations receive an event emitter


@dataclass(frozen=True)
class Production:
    rule_id: str
    lhs: str
    rhs: tuple[str, ...]  # child symbol names
    tags: tuple[str, ...]  # occurrence tag per child
    lhs_tag: str
    equations: tuple[Equation, ...]
    var_roles: dict = field(default_factory=dict)  # child index -> role

    @property
    def arity(self) -> int:
        return len(self.rhs)

    def equations_for_child(self, i: int) -> tuple[Equation, ...]:
        return tuple(e for e in self.equations if e.target.occ == i)

    def equations_for_lhs(self) -> tuple[Equation, ...]:
        return tuple(e for e in self.equations if e.target.occ == LHS)

    def find_equation(self, target_tag: str) -> Optional[Equation]:
        for e in self.equations:
            if e.target.tag == target_tag:
                return e
        return None


class GrammarError(Exception):
    pass


class GrammarSpec:
    """Symbols plus productions keyed by left-hand side."""

    def __init__(self, symbols, productions, start_symbol: str):
        self.symbols = {s.name: s for s in symbols}
        self.productions = {}
        self.by_lhs = {}
        for p in productions:
            if p.rule_id in self.productions:
                raise GrammarError(f"duplicate rule id {p.rule_id}")
            self._validate(p)
            self.productions[p.rule_id] = p
            self.by_lhs.setdefault(p.lhs, []).append(p)
        self.start_symbol = start_symbol
        for name, sym in self.symbols.items():
            if not sym.is_terminal and name not in self.by_lhs:
                raise GrammarError(f"nonterminal {name} has no production")

    def symbol(self, name: str) -> Symbol:
        return self.symbols[name]

    def production(self, rule_id: str) -> Production:
        try:
            return self.productions[rule_id]
        except KeyError:
            raise GrammarError(f"unknown rule id {rule_id!r}") from None

    def alternatives(self, symbol: str) -> list:
        """Rule ids of the structural alternatives for a nonterminal, in
        declaration order."""
        return [p.rule_id for p in self.by_lhs.get(symbol, [])]

    def is_terminal(self, symbol: str) -> bool:
        return self.symbols[symbol].is_terminal

    def _validate(self, p: Production) -> None:
        # every equation may reference only declared attributes
        def declared(ref: AttrRef) -> bool:
            sym = self.symbols[p.lhs if ref.occ == LHS else p.rhs[ref.occ]]
            return ref.attr in sym.inherited or ref.attr in sym.synthesized

        for e in p.equations:
            for ref in (e.target, *e.inputs):
                if not declared(ref):
                    raise GrammarError(
                        f"{p.rule_id}: undeclared attribute {ref.tag}"
                    )


def check_l_attributed(grammar: GrammarSpec) -> list:
    """Return (rule_id, target tag) for every equation not computable in a
    single left-to-right pass: the target must be an output attribute (LHS
    synthesized or some child's inherited), and inputs must be the LHS's
    inherited attributes or synthesized attributes of strictly earlier
    children (any child, for an LHS-synthesized target)."""

    violations = []
    for p in grammar.productions.values():
        for e in p.equations:
            if not _flow_ok(grammar, p, e):
                violations.append((p.rule_id, e.target.tag))
    return violations


def _flow_ok(grammar: GrammarSpec, p: Production, e: Equation) -> bool:
    def is_inh(occ: int, attr: str) -> bool:
        sym = grammar.symbols[p.lhs if occ == LHS else p.rhs[occ]]
        return attr in sym.inherited

    t = e.target
    target_ok = (t.occ == LHS and not is_inh(LHS, t.attr)) or (
        t.occ != LHS and is_inh(t.occ, t.attr)
    )
    if not target_ok:
        return False
    horizon = p.arity if t.occ == LHS else t.occ
    for ref in e.inputs:
        if ref.occ == LHS:
            if not is_inh(LHS, ref.attr):
                return False
        else:
            if is_inh(ref.occ, ref.attr) or ref.occ >= horizon:
                return False
    return True


# ---------------------------------------------------------------------------
# The built-in Java-subset grammar
# ---------------------------------------------------------------------------

_STMT_ATTRS = dict(
    inherited=frozenset({"symTab", "attrIn", "methodRetType"}),
    synthesized=frozenset({"symTabOut", "attrOut", "valid"}),
)

_SYMBOLS = [
    Symbol("Start", **_STMT_ATTRS),
    Symbol("Stmt", **_STMT_ATTRS),
    Symbol("Decl", **_STMT_ATTRS),
    Symbol("ObjInit", **_STMT_ATTRS),
    Symbol("Invoke", **_STMT_ATTRS),
    Symbol("Return", **_STMT_ATTRS),
    Symbol(
        "InvokeMore",
        inherited=frozenset({"symTab", "exprType", "attrIn"}),
        synthesized=frozenset({"retType", "attrOut", "valid"}),
    ),
    Symbol(
        "Call",
        inherited=frozenset({"symTab", "attrIn"}),
        synthesized=frozenset({"retType", "exprType", "attrOut", "valid"}),
    ),
    Symbol(
        "ArgList",
        inherited=frozenset({"symTab", "typeList"}),
        synthesized=frozenset({"attrOut", "valid"}),
    ),
    Symbol("Branch", inherited=frozenset({"symTab", "attrIn", "methodRetType"}), synthesized=frozenset({"attrOut", "valid"})),
    Symbol("Loop", inherited=frozenset({"symTab", "attrIn", "methodRetType"}), synthesized=frozenset({"attrOut", "valid"})),
    Symbol("Except", inherited=frozenset({"symTab", "attrIn", "methodRetType"}), synthesized=frozenset({"attrOut", "valid"})),
    Symbol("Catch", inherited=frozenset({"symTab", "attrIn", "methodRetType"}), synthesized=frozenset({"attrOut", "valid"})),
    Symbol(
        "Cond",
        inherited=frozenset({"symTab", "attrIn"}),
        synthesized=frozenset({"symTabOut", "attrOut", "valid"}),
    ),
    # Terminal-vocabulary symbols inherit the state their choice depends on:
    # the table of what is in scope, the flag bundle, and the type the site
    # expects (the pending parameter for arguments, the declared type for a
    # constructed type, the declared return type for a returned variable).
    Symbol(
        "Api",
        is_terminal=True,
        inherited=frozenset({"symTab", "attrIn"}),
        synthesized=frozenset({"name", "params", "exprType", "retType", "attrOut"}),
    ),
    Symbol(
        "Type",
        is_terminal=True,
        inherited=frozenset({"symTab", "attrIn", "expType"}),
        synthesized=frozenset({"name", "params"}),
    ),
    Symbol(
        "Var",
        is_terminal=True,
        inherited=frozenset({"symTab", "attrIn", "expType"}),
        synthesized=frozenset({"id"}),
    ),
]

#: Terminal-vocabulary rule ids: Api expands to an external API call (d1) or
#: an internal method of the class (d2); Type and Var expand to their payload
#: tokens (d3, d4).  Their synthesized attributes come from the payload and
#: are produced by semantics.leaf_synthesize.
LEAF_RULES = {"d1": "Api", "d2": "Api", "d3": "Type", "d4": "Var"}


def _mkrefs(prod_lhs, lhs_tag, tags, *specs):
    def resolve(spec: str) -> AttrRef:
        occ_tag, attr = spec.rsplit(".", 1)
        if occ_tag == lhs_tag:
            return AttrRef(LHS, attr, spec)
        for i, t in enumerate(tags):
            if t == occ_tag:
                return AttrRef(i, attr, spec)
        raise GrammarError(f"unknown occurrence {occ_tag!r} in {spec!r}")

    return [resolve(s) for s in specs]


def _rule(rule_id, lhs, rhs_with_tags, eqs, roles=None):
    """rhs_with_tags: list of (symbol, tag); eqs: list of
    (target_spec, [input_specs], fn [, checks])."""
    rhs = tuple(s for s, _ in rhs_with_tags)
    tags = tuple(t for _, t in rhs_with_tags)
    lhs_tag = lhs if lhs not in rhs else f"{lhs}$0"
    equations = []
    for item in eqs:
        target_spec, input_specs, fn = item[0], item[1], item[2]
        checks = len(item) > 3 and item[3]
        (target,) = _mkrefs(lhs, lhs_tag, tags, target_spec)
        inputs = tuple(_mkrefs(lhs, lhs_tag, tags, *input_specs))
        equations.append(Equation(target, inputs, fn, checks))
    return Production(rule_id, lhs, rhs, tags, lhs_tag, tuple(equations), dict(roles or {}))


def _id(v):
    return v


def _const(value):
    return lambda: value


def _pair(*vs):
    return vs


def _copy(target, source):
    return (target, [source], _id)


def _merge_symtab(base, delta):
    return base.merged(delta)


def _merge_flags(base, delta):
    return base.merged(delta)


def _and(*vs):
    return all(vs)


def _java_productions():
    P = []

    # a1. Start : Stmt
    P.append(_rule("a1", "Start", [("Stmt", "Stmt")], [
        _copy("Stmt.attrIn", "Start.attrIn"),
        _copy("Stmt.methodRetType", "Start.methodRetType"),
        _copy("Stmt.symTab", "Start.symTab"),
        _copy("Start.symTabOut", "Stmt.symTabOut"),
        _copy("Start.attrOut", "Stmt.attrOut"),
        _copy("Start.valid", "Stmt.valid"),
    ]))

    # a2a. Stmt$0 : Stmt$1 ; Stmt$2
    P.append(_rule("a2a", "Stmt", [("Stmt", "Stmt$1"), ("Stmt", "Stmt$2")], [
        _copy("Stmt$1.symTab", "Stmt$0.symTab"),
        _copy("Stmt$2.symTab", "Stmt$1.symTabOut"),
        _copy("Stmt$0.symTabOut", "Stmt$2.symTabOut"),
        _copy("Stmt$1.attrIn", "Stmt$0.attrIn"),
        _copy("Stmt$2.attrIn", "Stmt$1.attrOut"),
        _copy("Stmt$0.attrOut", "Stmt$2.attrOut"),
        _copy("Stmt$1.methodRetType", "Stmt$0.methodRetType"),
        _copy("Stmt$2.methodRetType", "Stmt$0.methodRetType"),
        ("Stmt$0.valid", ["Stmt$1.valid", "Stmt$2.valid"], _and),
    ]))

    # a2b. Stmt : epsilon  (attrOut is the incoming state with the iterator
    # pair reset; the rule only spells out the itrVec component)
    P.append(_rule("a2b", "Stmt", [], [
        ("Stmt.symTabOut", [], lambda: EMPTY_SYMTAB),
        ("Stmt.attrOut", ["Stmt.attrIn"], lambda a: a.with_itr((False, False))),
        ("Stmt.valid", [], lambda: True),
    ]))

    # a3..a6: statement wrappers merge the child's delta into the incoming
    # state.  a5 writes its output from attrIn (the rule text says attrOut
    # where only attrIn is available at that point), and a6 wires Return
    # where the rule text repeats the Invoke occurrence.
    for rid, child in (("a3", "Decl"), ("a4", "ObjInit"), ("a5", "Invoke"), ("a6", "Return")):
        P.append(_rule(rid, "Stmt", [(child, child)], [
            _copy(f"{child}.symTab", "Stmt.symTab"),
            ("Stmt.symTabOut", ["Stmt.symTab", f"{child}.symTabOut"], _merge_symtab),
            _copy(f"{child}.attrIn", "Stmt.attrIn"),
            ("Stmt.attrOut", ["Stmt.attrIn", f"{child}.attrOut"], _merge_flags),
            _copy(f"{child}.methodRetType", "Stmt.methodRetType"),
            _copy("Stmt.valid", f"{child}.valid"),
        ]))

    # b1. Decl : Type Var
    P.append(_rule("b1", "Decl", [("Type", "Type"), ("Var", "Var")], [
        _copy("Type.symTab", "Decl.symTab"),
        _copy("Type.attrIn", "Decl.attrIn"),
        _copy("Var.symTab", "Decl.symTab"),
        _copy("Var.attrIn", "Decl.attrIn"),
        ("Decl.symTabOut", ["Var.id", "Type.name"], lambda v, t: SymTab([(v, t)])),
        ("Decl.attrOut", ["Var.id"],
         lambda v: EMPTY_FLAGS.mark(v, initialized=False, used=False)),
        ("Decl.valid", [], lambda: True),
    ], roles={1: "decl"}))

    # b2. ObjInit : Type$0 Var = new Type$1 ArgList
    # The declared binding takes the declared type; validity additionally
    # requires the two type occurrences to agree (the rule writes that
    # conjunct with := where only == is meaningful).
    def _b2_valid(arglist_valid, t0, t1, emit):
        emit("returnTypeAtCallSite", t0 == t1)
        return bool(arglist_valid) and t0 == t1

    P.append(_rule("b2", "ObjInit",
                   [("Type", "Type$0"), ("Var", "Var"), ("Type", "Type$1"), ("ArgList", "ArgList")], [
        _copy("Type$0.symTab", "ObjInit.symTab"),
        _copy("Type$0.attrIn", "ObjInit.attrIn"),
        _copy("Var.symTab", "ObjInit.symTab"),
        _copy("Var.attrIn", "ObjInit.attrIn"),
        _copy("Type$1.symTab", "ObjInit.symTab"),
        _copy("Type$1.attrIn", "ObjInit.attrIn"),
        # the constructed type is expected to be the declared one
        _copy("Type$1.expType", "Type$0.name"),
        _copy("ArgList.symTab", "ObjInit.symTab"),
        ("ObjInit.symTabOut", ["Var.id", "Type$0.name"], lambda v, t: SymTab([(v, t)])),
        _copy("ArgList.typeList", "Type$1.params"),
        ("ObjInit.attrOut", ["Var.id"],
         lambda v: EMPTY_FLAGS.mark(v, initialized=True, used=False)),
        ("ObjInit.valid", ["ArgList.valid", "Type$0.name", "Type$1.name"], _b2_valid, True),
    ], roles={1: "decl"}))

    # b3. Invoke : Var$0 = Var$1 Call InvokeMore
    # The chain's result type must match the assignment target's declared
    # type, and the receiver's declared type must match the callee's
    # receiver type.  Assigning into Var$0 initializes it.
    def _b3_attrout(im_out, v0, v1):
        return im_out.mark(v0, initialized=True, used=True).mark(v1, used=True)

    def _b3_valid(call_valid, im_valid, im_ret, v0, v1, call_expr, symtab, emit):
        # the rule text omits the call's own validity, which would silently
        # drop the first call's argument checks from the conjunction
        a = type_conjunct(symtab, v0, im_ret, emit, "returnTypeAtCallSite")
        b = type_conjunct(symtab, v1, call_expr, emit, "objectMethodCompat")
        return bool(call_valid) and bool(im_valid) and a and b

    P.append(_rule("b3", "Invoke",
                   [("Var", "Var$0"), ("Var", "Var$1"), ("Call", "Call"), ("InvokeMore", "InvokeMore")], [
        _copy("Var$0.symTab", "Invoke.symTab"),
        _copy("Var$0.attrIn", "Invoke.attrIn"),
        _copy("Var$1.symTab", "Invoke.symTab"),
        _copy("Var$1.attrIn", "Invoke.attrIn"),
        _copy("Call.symTab", "Invoke.symTab"),  # b5 forwards it to the arguments
        _copy("InvokeMore.symTab", "Invoke.symTab"),
        _copy("InvokeMore.exprType", "Call.retType"),
        _copy("Call.attrIn", "Invoke.attrIn"),
        _copy("InvokeMore.attrIn", "Call.attrOut"),
        ("Invoke.attrOut", ["InvokeMore.attrOut", "Var$0.id", "Var$1.id"], _b3_attrout),
        ("Invoke.symTabOut", [], lambda: EMPTY_SYMTAB),
        ("Invoke.valid",
         ["Call.valid", "InvokeMore.valid", "InvokeMore.retType", "Var$0.id",
          "Var$1.id", "Call.exprType", "Invoke.symTab"],
         _b3_valid, True),
    ], roles={0: "target", 1: "receiver"}))

    # b4a. InvokeMore$0 : Call InvokeMore$1
    # The chained call is invoked on the incoming expression value, so its
    # receiver type must equal the incoming exprType (the rule text equates
    # it with the occurrence that is defined *from* the call's own result).
    def _b4a_valid(call_valid, im1_valid, call_expr, incoming, emit):
        ok = call_expr == incoming
        emit("objectMethodCompat", ok)
        return bool(call_valid) and bool(im1_valid) and ok

    P.append(_rule("b4a", "InvokeMore",
                   [("Call", "Call"), ("InvokeMore", "InvokeMore$1")], [
        _copy("InvokeMore$1.symTab", "InvokeMore$0.symTab"),
        _copy("InvokeMore$1.exprType", "Call.retType"),
        _copy("Call.symTab", "InvokeMore$0.symTab"),
        _copy("InvokeMore$0.retType", "InvokeMore$1.retType"),
        _copy("Call.attrIn", "InvokeMore$0.attrIn"),
        _copy("InvokeMore$1.attrIn", "Call.attrOut"),
        _copy("InvokeMore$0.attrOut", "InvokeMore$1.attrOut"),
        ("InvokeMore$0.valid",
         ["Call.valid", "InvokeMore$1.valid", "Call.exprType", "InvokeMore$0.exprType"],
         _b4a_valid, True),
    ]))

    # b4b. InvokeMore : epsilon  (chain ends; its value type is the incoming
    # expression type, and the iterator pair resets as in a2b)
    P.append(_rule("b4b", "InvokeMore", [], [
        _copy("InvokeMore.retType", "InvokeMore.exprType"),
        ("InvokeMore.attrOut", ["InvokeMore.attrIn"], lambda a: a.with_itr((False, False))),
        ("InvokeMore.valid", [], lambda: True),
    ]))

    # b5. Call : Api ArgList
    # Argument use-marks are folded into the call's outgoing flags so that
    # isUsed reflects arguments, which is what the flag exists to track.
    P.append(_rule("b5", "Call", [("Api", "Api"), ("ArgList", "ArgList")], [
        _copy("Api.symTab", "Call.symTab"),
        _copy("ArgList.symTab", "Call.symTab"),
        _copy("ArgList.typeList", "Api.params"),
        _copy("Call.retType", "Api.retType"),
        _copy("Api.attrIn", "Call.attrIn"),
        ("Call.attrOut", ["Api.attrOut", "ArgList.attrOut"], _merge_flags),
        _copy("Call.exprType", "Api.exprType"),
        _copy("Call.valid", "ArgList.valid"),
    ]))

    # b6a. ArgList$0 : Var ArgList$1
    def _b6a_valid(al1_valid, var, symtab, typelist, emit):
        expected = typelist[0] if typelist else MISSING
        ok = type_conjunct(symtab, var, expected, emit, "actualParamType")
        return bool(al1_valid) and ok

    P.append(_rule("b6a", "ArgList", [("Var", "Var"), ("ArgList", "ArgList$1")], [
        _copy("Var.symTab", "ArgList$0.symTab"),
        ("Var.expType", ["ArgList$0.typeList"], lambda tl: tl[0] if tl else None),
        _copy("ArgList$1.symTab", "ArgList$0.symTab"),
        ("ArgList$1.typeList", ["ArgList$0.typeList"], lambda tl: tl[1:]),
        ("ArgList$0.attrOut", ["ArgList$1.attrOut", "Var.id"],
         lambda rest, v: rest.mark(v, used=True)),
        ("ArgList$0.valid",
         ["ArgList$1.valid", "Var.id", "ArgList$0.symTab", "ArgList$0.typeList"],
         _b6a_valid, True),
    ], roles={0: "arg"}))

    # b6b. ArgList : epsilon  (no arguments left exactly when none are owed)
    def _b6b_valid(typelist, emit):
        ok = len(typelist) == 0
        emit("actualParamType", ok)
        return ok

    P.append(_rule("b6b", "ArgList", [], [
        ("ArgList.attrOut", [], lambda: EMPTY_FLAGS),
        ("ArgList.valid", ["ArgList.typeList"], _b6b_valid, True),
    ]))

    # b7. Return : return Var
    def _b7_valid(var, symtab, mrt, emit):
        return type_conjunct(symtab, var, mrt, emit, "returnStmtType")

    P.append(_rule("b7", "Return", [("Var", "Var")], [
        _copy("Var.symTab", "Return.symTab"),
        _copy("Var.attrIn", "Return.attrIn"),
        # the returned value is expected to have the declared return type
        _copy("Var.expType", "Return.methodRetType"),
        ("Return.attrOut", ["Var.id"],
         lambda v: FlagState(ret_done=True).mark(v, used=True)),
        ("Return.symTabOut", [], lambda: EMPTY_SYMTAB),
        ("Return.valid", ["Var.id", "Return.symTab", "Return.methodRetType"], _b7_valid, True),
    ], roles={0: "ret"}))

    # c1.a/b/c: control statements; their bindings are scoped, so the
    # statement's outgoing table is the incoming one.
    for rid, child in (("c1.a", "Branch"), ("c1.b", "Loop"), ("c1.c", "Except")):
        P.append(_rule(rid, "Stmt", [(child, child)], [
            _copy(f"{child}.symTab", "Stmt.symTab"),
            _copy("Stmt.valid", f"{child}.valid"),
            _copy(f"{child}.attrIn", "Stmt.attrIn"),
            _copy("Stmt.attrOut", f"{child}.attrOut"),
            _copy("Stmt.symTabOut", "Stmt.symTab"),
            _copy(f"{child}.methodRetType", "Stmt.methodRetType"),
        ]))

    # c2. Branch : if Cond then Stmt$1 else Stmt$2
    # attrOut joins the two arms (the rule text names an input occurrence
    # there, which cannot be meant: a must-join is the conservative reading).
    P.append(_rule("c2", "Branch",
                   [("Cond", "Cond"), ("Stmt", "Stmt$1"), ("Stmt", "Stmt$2")], [
        _copy("Cond.symTab", "Branch.symTab"),
        _copy("Stmt$1.symTab", "Cond.symTabOut"),
        _copy("Stmt$2.symTab", "Cond.symTabOut"),
        ("Branch.valid", ["Cond.valid", "Stmt$1.valid", "Stmt$2.valid"], _and),
        _copy("Cond.attrIn", "Branch.attrIn"),
        _copy("Stmt$1.attrIn", "Cond.attrOut"),
        _copy("Stmt$2.attrIn", "Cond.attrOut"),
        ("Branch.attrOut", ["Stmt$1.attrOut", "Stmt$2.attrOut"], join_branch_flags),
        _copy("Stmt$1.methodRetType", "Branch.methodRetType"),
        _copy("Stmt$2.methodRetType", "Branch.methodRetType"),
    ]))

    # c3. Loop : while Cond then Stmt  (the body may run zero times, so its
    # flag effects and bindings do not survive the loop)
    P.append(_rule("c3", "Loop", [("Cond", "Cond"), ("Stmt", "Stmt")], [
        _copy("Cond.symTab", "Loop.symTab"),
        _copy("Stmt.symTab", "Cond.symTabOut"),
        ("Loop.valid", ["Cond.valid", "Stmt.valid"], _and),
        _copy("Cond.attrIn", "Loop.attrIn"),
        _copy("Stmt.attrIn", "Cond.attrOut"),
        _copy("Loop.attrOut", "Loop.attrIn"),
        _copy("Stmt.methodRetType", "Loop.methodRetType"),
    ]))

    # c4. Except : try Stmt Catch  (the handler sees the try block's bindings
    # but starts from the pre-try flags: the exception may fire mid-block)
    P.append(_rule("c4", "Except", [("Stmt", "Stmt"), ("Catch", "Catch")], [
        _copy("Stmt.symTab", "Except.symTab"),
        _copy("Catch.symTab", "Stmt.symTabOut"),
        ("Except.valid", ["Stmt.valid", "Catch.valid"], _and),
        _copy("Stmt.attrIn", "Except.attrIn"),
        _copy("Catch.attrIn", "Except.attrIn"),
        _copy("Except.attrOut", "Except.attrIn"),
        _copy("Stmt.methodRetType", "Except.methodRetType"),
        _copy("Catch.methodRetType", "Except.methodRetType"),
    ]))

    # c5a. Catch$0 : catch ( Type Var ) Stmt ; Catch$1
    # The handler names its exception binding: without the Var occurrence the
    # handler body could never reference the caught exception in a
    # type-consistent way.  The binding arrives initialized.
    P.append(_rule("c5a", "Catch",
                   [("Type", "Type"), ("Var", "Var"), ("Stmt", "Stmt"), ("Catch", "Catch$1")], [
        _copy("Type.symTab", "Catch$0.symTab"),
        _copy("Type.attrIn", "Catch$0.attrIn"),
        _copy("Var.symTab", "Catch$0.symTab"),
        _copy("Var.attrIn", "Catch$0.attrIn"),
        ("Stmt.symTab", ["Catch$0.symTab", "Var.id", "Type.name"],
         lambda st, v, t: st.merged(SymTab([(v, t)]))),
        _copy("Catch$1.symTab", "Catch$0.symTab"),
        ("Stmt.attrIn", ["Catch$0.attrIn", "Var.id"],
         lambda a, v: a.mark(v, initialized=True, used=False)),
        _copy("Catch$1.attrIn", "Catch$0.attrIn"),
        _copy("Catch$0.attrOut", "Catch$1.attrOut"),
        ("Catch$0.valid", ["Stmt.valid", "Catch$1.valid"], _and),
        _copy("Stmt.methodRetType", "Catch$0.methodRetType"),
        _copy("Catch$1.methodRetType", "Catch$0.methodRetType"),
    ], roles={1: "bind"}))

    # c5b. Catch : epsilon
    P.append(_rule("c5b", "Catch", [], [
        ("Catch.valid", [], lambda: True),
        ("Catch.attrOut", [], lambda: EMPTY_FLAGS),
    ]))

    # c6. Cond : Call  (conditions bind nothing, so the table passes through)
    P.append(_rule("c6", "Cond", [("Call", "Call")], [
        _copy("Call.symTab", "Cond.symTab"),
        _copy("Cond.valid", "Call.valid"),
        _copy("Call.attrIn", "Cond.attrIn"),
        _copy("Cond.attrOut", "Call.attrOut"),
        _copy("Cond.symTabOut", "Cond.symTab"),
    ]))

    return P


_JAVA_GRAMMAR = None


def java_subset_grammar() -> GrammarSpec:
    """The built-in grammar; immutable, so a shared instance is returned."""
    global _JAVA_GRAMMAR
    if _JAVA_GRAMMAR is None:
        _JAVA_GRAMMAR = GrammarSpec(_SYMBOLS, _java_productions(), "Start")
    return _JAVA_GRAMMAR


#: Alternatives that re-enter the statement level; masked near the depth cap
#: when a non-recursive alternative exists.
RECURSIVE_ALTS = {
    "Stmt": frozenset({"a2a", "c1.a", "c1.b", "c1.c"}),
    "InvokeMore": frozenset({"b4a"}),
    "Catch": frozenset({"c5a"}),
}
