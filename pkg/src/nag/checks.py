"""Static-check report over a tree and its method context.

Thirteen checks are scored as (sites passed / sites total); the two
aggregates pool the site events of their member checks rather than being
re-measured.  The checker walks the tree with an explicit environment and is
independent of both generation and the attribute evaluator; the language's
scope rules it follows are stated in the module docstring of the reference
oracle used by the tests (the empty statement resets the visible table, a
catch block sees the try block's bindings with pre-try initialization
knowledge, branch arms join facts by intersection, loop body effects are
discarded at exit, assignment initializes its target).

Site identities are (check, node path, slot).  Every non-literal variable in
a use position (invocation target/receiver, argument, returned value)
produces a declared-before-use site; formal/field uses additionally produce
availability sites against the method context.  The literal placeholder ARG
is not a variable and type-checks against whatever the site expects.

A tree built from the grammar parses by definition; the `parses` check can
only fail for externally supplied text, in which case the report carries
that single failed site (see failed_parse_report).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .astio import AstNode
from .attrs import PRIMITIVE_TYPES, VarId
from .semantics import MethodContext

CHECK_ORDER = (
    "undeclaredVarAccess",
    "formalParamAccess",
    "classVarAccess",
    "uninitializedObjects",
    "variableAccessAgg",
    "objectMethodCompat",
    "returnTypeAtCallSite",
    "actualParamType",
    "returnStmtType",
    "typeErrorsAgg",
    "returnStmtExists",
    "unusedVariables",
    "parses",
)

CHECK_TITLES = {
    "undeclaredVarAccess": "No undeclared variable access",
    "formalParamAccess": "Valid formal parameter access",
    "classVarAccess": "Valid class variable access",
    "uninitializedObjects": "No uninitialized objects",
    "variableAccessAgg": "No variable access errors",
    "objectMethodCompat": "Object-method compatibility",
    "returnTypeAtCallSite": "Return type at call site",
    "actualParamType": "Actual parameter type",
    "returnStmtType": "Return statement type",
    "typeErrorsAgg": "No type errors",
    "returnStmtExists": "Return statement exists",
    "unusedVariables": "No unused variables",
    "parses": "Parses",
}

_VARIABLE_ACCESS = ("undeclaredVarAccess", "formalParamAccess",
                    "classVarAccess", "uninitializedObjects")
_TYPE_ERRORS = ("objectMethodCompat", "returnTypeAtCallSite",
                "actualParamType", "returnStmtType")


@dataclass(frozen=True)
class CheckSite:
    check: str
    path: tuple
    slot: str
    passed: bool

    def key(self) -> tuple:
        return (self.check, self.path, self.slot, self.passed)


@dataclass(frozen=True)
class CheckReport:
    sites: tuple

    def counts(self, check: str) -> tuple:
        if check == "variableAccessAgg":
            members = _VARIABLE_ACCESS
        elif check == "typeErrorsAgg":
            members = _TYPE_ERRORS
        else:
            members = (check,)
        passed = sum(1 for s in self.sites if s.check in members and s.passed)
        total = sum(1 for s in self.sites if s.check in members)
        return passed, total

    def fraction(self, check: str) -> Optional[float]:
        passed, total = self.counts(check)
        return None if total == 0 else passed / total

    @property
    def pass_all(self) -> bool:
        return all(s.passed for s in self.sites)

    def site_keys(self) -> set:
        return {s.key() for s in self.sites}

    def rows(self) -> list:
        """(check, passed, total, fraction) in report order."""
        out = []
        for check in CHECK_ORDER:
            passed, total = self.counts(check)
            out.append((check, passed, total, self.fraction(check)))
        return out


def failed_parse_report() -> CheckReport:
    """Report for text that did not parse: only the parses check, failed."""
    return CheckReport(sites=(CheckSite("parses", (), "method", False),))


@dataclass
class _State:
    """Bindings (slot -> type, binding path) and the initialized set."""

    types: dict = field(default_factory=dict)
    origin: dict = field(default_factory=dict)
    init: set = field(default_factory=set)

    def copy(self) -> "_State":
        return _State(dict(self.types), dict(self.origin), set(self.init))


class _Checker:
    def __init__(self, ctx: MethodContext):
        self.ctx = ctx
        self.sites = []
        self.decl_sites = []  # (path, rule_id, declared type)
        self.decls_used = set()
        self.decls_misused = set()  # used while uninitialized
        self.saw_return = False

    def emit(self, check, path, slot, passed) -> None:
        self.sites.append(CheckSite(check, tuple(path), slot, bool(passed)))

    # -- variable events ---------------------------------------------------

    def use_var(self, st: _State, path, slot, var: VarId, needs_init=True):
        if var.is_literal:
            return None
        bound = var in st.types
        self.emit("undeclaredVarAccess", path, slot, bound)
        if var.kind == "formal":
            self.emit("formalParamAccess", path, slot,
                      var in {v for v, _ in self.ctx.formals})
        elif var.kind == "field":
            self.emit("classVarAccess", path, slot,
                      var in {v for v, _ in self.ctx.fields})
        if not bound:
            return None
        where = st.origin[var]
        if where is not None:
            self.decls_used.add(where)
            if needs_init and var not in st.init:
                self.decls_misused.add(where)
        return st.types[var]

    def bind(self, st: _State, path, rule_id, var: VarId, type_name, initialized):
        if var.is_literal:
            return
        self.decl_sites.append((tuple(path), rule_id, type_name))
        st.types[var] = type_name
        st.origin[var] = tuple(path)
        if initialized:
            st.init.add(var)
        else:
            st.init.discard(var)

    def type_site(self, check, path, slot, var: VarId, actual, expected,
                  literal_needs_expected: bool = False):
        # The literal placeholder satisfies any site that expects something;
        # receiverless calls expect nothing of their receiver slot, so a
        # literal there is also fine, whereas a literal argument beyond the
        # parameter list has nothing to adapt to and fails.
        if var is not None and var.is_literal:
            ok = expected is not None if literal_needs_expected else True
            self.emit(check, path, slot, ok)
            return
        self.emit(check, path, slot,
                  actual is not None and expected is not None and actual == expected)

    # -- walk ----------------------------------------------------------------

    def walk_stmt(self, n: AstNode, path, st: _State) -> None:
        handler = {
            "a2a": self._seq, "a2b": self._epsilon, "a3": self._decl,
            "a4": self._objinit, "a5": self._invoke, "a6": self._return,
            "c1.a": self._branch, "c1.b": self._loop, "c1.c": self._except,
        }[n.rule_id]
        handler(n, path, st)

    def _seq(self, n, path, st):
        self.walk_stmt(n.children[0], path + (0,), st)
        self.walk_stmt(n.children[1], path + (1,), st)

    def _epsilon(self, n, path, st):
        st.types.clear()
        st.origin.clear()
        st.init.clear()

    def _decl(self, n, path, st):
        d = n.children[0]
        t, var = d.children[0].payload, d.children[1].payload
        self.bind(st, path + (0,), "b1", var, t, initialized=False)

    def _objinit(self, n, path, st):
        d = n.children[0]
        dpath = path + (0,)
        t0, var, t1 = (d.children[0].payload, d.children[1].payload,
                       d.children[2].payload)
        self.walk_args(d.children[3], dpath + (3,), st,
                       self.ctx.registry.constructor_params(t1))
        self.emit("returnTypeAtCallSite", dpath, "ctor", t0 == t1)
        self.bind(st, dpath, "b2", var, t0, initialized=True)

    def _invoke(self, n, path, st):
        inv = n.children[0]
        ipath = path + (0,)
        target, recv = inv.children[0].payload, inv.children[1].payload
        recv_t = self.use_var(st, ipath + (1,), "receiver", recv)
        sig = self.ctx.resolve_api(inv.children[2].children[0].payload)
        self.type_site("objectMethodCompat", ipath, "receiver",
                       recv, recv_t, sig.receiver_type)
        self.walk_args(inv.children[2].children[1], ipath + (2, 1), st, sig.param_types)
        chain_t = self.walk_chain(inv.children[3], ipath + (3,), st, sig.return_type)
        target_t = self.use_var(st, ipath + (0,), "target", target, needs_init=False)
        self.type_site("returnTypeAtCallSite", ipath, "target",
                       target, target_t, chain_t)
        if not target.is_literal and target in st.types:
            st.init.add(target)

    def walk_chain(self, n, path, st, incoming):
        if n.rule_id == "b4b":
            return incoming
        sig = self.ctx.resolve_api(n.children[0].children[0].payload)
        self.emit("objectMethodCompat", path, "chain", sig.receiver_type == incoming)
        self.walk_args(n.children[0].children[1], path + (0, 1), st, sig.param_types)
        return self.walk_chain(n.children[1], path + (1,), st, sig.return_type)

    def walk_args(self, n, path, st, params) -> None:
        k = 0
        while n.rule_id == "b6a":
            var = n.children[0].payload
            expected = params[k] if k < len(params) else None
            actual = self.use_var(st, path + (0,), "arg", var)
            self.type_site("actualParamType", path, "arg", var, actual, expected,
                           literal_needs_expected=True)
            k, path, n = k + 1, path + (1,), n.children[1]
        self.emit("actualParamType", path, "argEnd", k >= len(params))

    def _return(self, n, path, st):
        self.saw_return = True
        r = n.children[0]
        rpath = path + (0,)
        var = r.children[0].payload
        actual = self.use_var(st, rpath + (0,), "ret", var)
        self.type_site("returnStmtType", rpath, "ret", var, actual,
                       self.ctx.method_ret_type)

    def _cond(self, n, path, st):
        sig = self.ctx.resolve_api(n.children[0].children[0].payload)
        self.walk_args(n.children[0].children[1], path + (0, 1), st, sig.param_types)

    def _branch(self, n, path, st):
        b = n.children[0]
        bpath = path + (0,)
        self._cond(b.children[0], bpath + (0,), st)
        left, right = st.copy(), st.copy()
        self.walk_stmt(b.children[1], bpath + (1,), left)
        self.walk_stmt(b.children[2], bpath + (2,), right)
        st.init = {v for v in st.types if v in left.init and v in right.init}

    def _loop(self, n, path, st):
        l = n.children[0]
        lpath = path + (0,)
        self._cond(l.children[0], lpath + (0,), st)
        self.walk_stmt(l.children[1], lpath + (1,), st.copy())

    def _except(self, n, path, st):
        e = n.children[0]
        epath = path + (0,)
        body = st.copy()
        self.walk_stmt(e.children[0], epath + (0,), body)
        entry = _State(dict(body.types), dict(body.origin), set(st.init))
        self.walk_catch(e.children[1], epath + (1,), entry)

    def walk_catch(self, n, path, st) -> None:
        if n.rule_id == "c5b":
            return
        t, var = n.children[0].payload, n.children[1].payload
        arm = st.copy()
        self.bind(arm, path, "c5a", var, t, initialized=True)
        self.walk_stmt(n.children[2], path + (2,), arm)
        self.walk_catch(n.children[3], path + (3,), st)

    def finish(self) -> None:
        self.emit("returnStmtExists", (), "method", self.saw_return)
        self.emit("parses", (), "method", True)
        for path, rule_id, type_name in self.decl_sites:
            if rule_id in ("b1", "b2") and type_name not in PRIMITIVE_TYPES:
                self.emit("uninitializedObjects", path, "decl",
                          path not in self.decls_misused)
            self.emit("unusedVariables", path, "decl", path in self.decls_used)


def run_checks(ast: AstNode, ctx: MethodContext) -> CheckReport:
    """Score every check over one tree; a pure function of (tree, context)."""
    chk = _Checker(ctx)
    st = _State()
    for var, t in (*ctx.formals, *ctx.fields):
        st.types[var] = t
        st.origin[var] = None
        st.init.add(var)
    if ast.rule_id != "a1":
        raise ValueError("expected a full method tree rooted at Start")
    chk.walk_stmt(ast.children[0], (0,), st)
    chk.finish()
    return CheckReport(sites=tuple(chk.sites))


@dataclass(frozen=True)
class AggregateReport:
    """Unweighted per-program averages of the check fractions, plus the
    percentage of programs passing everything."""

    means: dict
    pass_all_pct: float
    programs: int

    def rows(self) -> list:
        return [(c, self.means.get(c)) for c in CHECK_ORDER]


def aggregate_reports(reports) -> AggregateReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    means = {}
    for check in CHECK_ORDER:
        values = [r.fraction(check) for r in reports]
        values = [v for v in values if v is not None]
        means[check] = sum(values) / len(values) if values else None
    pass_all = 100.0 * sum(1 for r in reports if r.pass_all) / len(reports)
    return AggregateReport(means=means, pass_all_pct=pass_all, programs=len(reports))


def format_report(report: CheckReport, tsv: bool = False) -> str:
    lines = []
    for check, passed, total, fraction in report.rows():
        ftext = "n/a" if fraction is None else f"{fraction:.4f}"
        if tsv:
            lines.append(f"{check}\t{passed}\t{total}\t{ftext}")
        else:
            title = CHECK_TITLES[check]
            lines.append(f"{title:<32} {passed:>4}/{total:<4} {ftext:>8}")
    tail = f"passAllChecks\t{str(report.pass_all).lower()}" if tsv else \
        f"{'Pass all checks':<32} {str(report.pass_all).lower():>17}"
    lines.append(tail)
    return "\n".join(lines)


def format_aggregate(agg: AggregateReport, tsv: bool = False) -> str:
    lines = []
    for check, mean in agg.rows():
        text = "n/a" if mean is None else f"{100.0 * mean:.2f}%"
        if tsv:
            lines.append(f"{check}\t{text}")
        else:
            lines.append(f"{CHECK_TITLES[check]:<32} {text:>8}")
    if tsv:
        lines.append(f"passAllChecks\t{agg.pass_all_pct:.2f}%")
        lines.append(f"programs\t{agg.programs}")
    else:
        lines.append(f"{'Pass all checks':<32} {agg.pass_all_pct:>7.2f}%")
        lines.append(f"{'Programs':<32} {agg.programs:>8}")
    return "\n".join(lines)
