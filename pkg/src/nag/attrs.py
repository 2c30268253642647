"""Attribute value types threaded through derivations.

Two bundles flow through every tree: the symbol table (variable -> type)
and a flag bundle (per-variable initialized/used bits, the return-statement
bit, and the iterator-protocol pair).  Statement-level rules merge *deltas*
produced by their children into the incoming state, so both types support a
right-biased merge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional

VAR_KINDS = ("formal", "field", "local", "literal")

PRIMITIVE_TYPES = frozenset(
    {"int", "boolean", "char", "long", "double", "float", "void"}
)

VOID = "void"

#: Sentinel for "no expected type at this site" (e.g. an argument beyond the
#: callee's parameter list).  Distinct from None, which marks the absent
#: receiver type of internal methods.
MISSING = object()


@dataclass(frozen=True, order=True)
class Namespaces:
    """Sizes of the three variable-slot namespaces (ten each by default)."""

    formals: int = 10
    fields: int = 10
    locals: int = 10

    def size(self, kind: str) -> int:
        if kind == "formal":
            return self.formals
        if kind == "field":
            return self.fields
        if kind == "local":
            return self.locals
        if kind == "literal":
            return 1
        raise ValueError(f"unknown namespace kind: {kind}")


DEFAULT_NAMESPACES = Namespaces()


@dataclass(frozen=True, order=True)
class VarId:
    """A variable slot: one of the fixed formal/field/local terminals, or the
    distinguished literal placeholder (rendered ARG)."""

    kind: str
    index: int

    def __post_init__(self) -> None:
        if self.kind not in VAR_KINDS:
            raise ValueError(f"unknown variable kind: {self.kind!r}")
        if self.index < 0:
            raise ValueError(f"negative variable index: {self.index}")
        if self.kind == "literal" and self.index != 0:
            raise ValueError("the literal placeholder has index 0")

    @property
    def is_literal(self) -> bool:
        return self.kind == "literal"

    def key(self) -> str:
        return f"{self.kind}:{self.index}"

    def check_in(self, ns: Namespaces) -> None:
        if self.index >= ns.size(self.kind):
            raise ValueError(
                f"index out of range: {self.kind} {self.index} "
                f"(namespace size {ns.size(self.kind)})"
            )


LITERAL_ARG = VarId("literal", 0)


class SymTab(Mapping[VarId, str]):
    """Immutable insertion-ordered map from variable slots to type names.

    Lookup of an absent slot is a visible miss (None), never a default.  The
    literal placeholder never enters the table; its "type" is whatever a
    checking site expects, which makes those conjuncts vacuously true.
    """

    __slots__ = ("_m",)

    def __init__(self, entries=()) -> None:
        m = {}
        for var, type_name in dict(entries).items() if isinstance(entries, Mapping) else entries:
            if var.is_literal:
                continue
            m[var] = type_name
        object.__setattr__(self, "_m", m)

    def lookup(self, var: VarId) -> Optional[str]:
        return self._m.get(var)

    def merged(self, delta: "SymTab") -> "SymTab":
        return SymTab({**self._m, **delta._m})

    def __getitem__(self, var: VarId) -> str:
        return self._m[var]

    def __iter__(self) -> Iterator[VarId]:
        return iter(self._m)

    def __len__(self) -> int:
        return len(self._m)

    def __repr__(self) -> str:
        inner = ", ".join(f"{v.key()}->{t}" for v, t in self._m.items())
        return f"SymTab({{{inner}}})"


EMPTY_SYMTAB = SymTab()


@dataclass(frozen=True)
class FlagState:
    """The attrIn/attrOut bundle: initialized/used bits per slot, the
    return-statement flag, and the (hasNext, next) iterator pair.

    A *delta* leaves ret_done/itr_vec as None and carries only the touched
    per-variable bits; merged() overlays a delta onto a full state.
    """

    initialized: Mapping[VarId, bool] = field(default_factory=dict)
    used: Mapping[VarId, bool] = field(default_factory=dict)
    ret_done: Optional[bool] = None
    itr_vec: Optional[tuple[bool, bool]] = None

    def merged(self, delta: "FlagState") -> "FlagState":
        return FlagState(
            initialized={**self.initialized, **delta.initialized},
            used={**self.used, **delta.used},
            ret_done=self.ret_done if delta.ret_done is None else delta.ret_done,
            itr_vec=self.itr_vec if delta.itr_vec is None else delta.itr_vec,
        )

    def with_itr(self, itr: tuple[bool, bool]) -> "FlagState":
        return replace(self, itr_vec=itr)

    def mark(self, var: VarId, *, initialized=None, used=None) -> "FlagState":
        if var.is_literal:
            return self
        ini = dict(self.initialized)
        use = dict(self.used)
        if initialized is not None:
            ini[var] = initialized
        if used is not None:
            use[var] = used
        return replace(self, initialized=ini, used=use)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlagState):
            return NotImplemented
        return (
            dict(self.initialized) == dict(other.initialized)
            and dict(self.used) == dict(other.used)
            and self.ret_done == other.ret_done
            and self.itr_vec == other.itr_vec
        )


EMPTY_FLAGS = FlagState()


def start_flags() -> FlagState:
    return FlagState(initialized={}, used={}, ret_done=False, itr_vec=(False, False))


def join_branch_flags(left: FlagState, right: FlagState) -> FlagState:
    """Must-analysis join of the two arms of a branch: a fact holds after the
    branch only if both arms establish it; usage is may-analysis (either arm).
    """

    keys_i = set(left.initialized) | set(right.initialized)
    keys_u = set(left.used) | set(right.used)
    itr_l = left.itr_vec or (False, False)
    itr_r = right.itr_vec or (False, False)
    return FlagState(
        initialized={k: left.initialized.get(k, False) and right.initialized.get(k, False) for k in keys_i},
        used={k: left.used.get(k, False) or right.used.get(k, False) for k in keys_u},
        ret_done=bool(left.ret_done) and bool(right.ret_done),
        itr_vec=(itr_l[0] and itr_r[0], itr_l[1] and itr_r[1]),
    )


@dataclass(frozen=True)
class CheckEvent:
    """One validity conjunct evaluated at one site."""

    rule_id: str
    check: str
    passed: bool
    path: tuple[int, ...] = ()

    def at(self, path: tuple[int, ...]) -> "CheckEvent":
        return CheckEvent(self.rule_id, self.check, self.passed, path)


def type_conjunct(symtab: SymTab, var: VarId, expected, emit, check: str) -> bool:
    """Evaluate a `symTab[var] == expected` conjunct.

    The literal placeholder adapts to whatever type the site expects, so the
    conjunct passes whenever an expectation exists at all.  Non-literal slots
    additionally produce a declared-before-use event.
    """

    if var.is_literal:
        ok = expected is not MISSING
        emit(check, ok)
        return ok
    declared = symtab.lookup(var) is not None
    emit("undeclaredVarAccess", declared)
    t = symtab.lookup(var)
    ok = declared and expected is not MISSING and t == expected
    emit(check, ok)
    return ok and declared


@dataclass(frozen=True)
class SemState:
    """Assembled view of the attribute bundle at one tree occurrence.

    For an inherited state, symtab/flags are the incoming symTab/attrIn and
    type_list/expr_type carry the contextual expectations.  For a synthesized
    state, symtab holds symTabOut, flags holds attrOut and ret_type the
    chained-call result type.
    """

    symtab: SymTab = EMPTY_SYMTAB
    flags: FlagState = EMPTY_FLAGS
    method_ret_type: Optional[str] = None
    type_list: Optional[tuple[str, ...]] = None
    expr_type: Optional[str] = None
    ret_type: Optional[str] = None

    def expected_type(self) -> Optional[str]:
        """The expected type visible at this occurrence: the head of the
        pending parameter list, else the incoming chain expression type."""
        if self.type_list is not None and len(self.type_list) > 0:
            return self.type_list[0]
        return self.expr_type
