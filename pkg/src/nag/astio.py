"""Derivation trees, their text format, and the Java-like renderer.

Serialized form is a parenthesized tree, UTF-8, whitespace separated::

    (Start#a1 (Stmt#a4 (ObjInit#b2 (Type FileWriter) (Var local 0)
        (Type FileWriter) (ArgList#b6a (Var formal 0) (ArgList#b6b)))))

Nonterminal nodes are `(Symbol#ruleId child*)`.  Terminal leaves are
`(Type NAME)`, `(Var KIND INDEX)` and `(Api NAME)`, where the api NAME keys
into the signature registry.  `;` starts a comment running to end of line.

serialize_ast/parse_ast are exact inverses; pretty_print is a one-way
renderer of the Java-like surface syntax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .attrs import DEFAULT_NAMESPACES, Namespaces, VarId
from .grammar import GrammarSpec, java_subset_grammar
from .registry import ApiRegistry

Payload = Union[VarId, str]

TERMINAL_SYMBOLS = ("Type", "Var", "Api")


class AstError(Exception):
    pass


class ParseError(AstError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class AstNode:
    """One derivation-tree node.  Terminal leaves (Type/Var/Api) have no
    rule id and carry their payload; all other nodes name the production
    that expanded them and hold exactly its right-hand side as children."""

    symbol: str
    rule_id: Optional[str] = None
    children: tuple = ()
    payload: Optional[Payload] = None

    @property
    def is_leaf(self) -> bool:
        return self.rule_id is None

    def walk(self, path=()):
        """Yield (path, node) in pre-order."""
        yield path, self
        for i, child in enumerate(self.children):
            yield from child.walk(path + (i,))

    def choice(self) -> str:
        """The decision made at this node: the rule id for structural nodes,
        the payload token for terminal leaves."""
        if self.rule_id is not None:
            return self.rule_id
        if isinstance(self.payload, VarId):
            return self.payload.key()
        return str(self.payload)


def leaf(symbol: str, payload: Payload) -> AstNode:
    return AstNode(symbol=symbol, payload=payload)


def node(rule_id: str, *children: AstNode, grammar: Optional[GrammarSpec] = None) -> AstNode:
    g = grammar or java_subset_grammar()
    prod = g.production(rule_id)
    return AstNode(symbol=prod.lhs, rule_id=rule_id, children=tuple(children))


def validate_ast(ast: AstNode, grammar: Optional[GrammarSpec] = None,
                 namespaces: Namespaces = DEFAULT_NAMESPACES) -> None:
    """Check arity and child symbols against each node's production."""
    g = grammar or java_subset_grammar()
    for path, n in ast.walk():
        if n.is_leaf:
            if n.symbol not in TERMINAL_SYMBOLS:
                raise AstError(f"{n.symbol} at {path} has no rule id")
            if n.symbol == "Var":
                if not isinstance(n.payload, VarId):
                    raise AstError(f"Var at {path} carries no variable id")
                n.payload.check_in(namespaces)
            elif not isinstance(n.payload, str) or not n.payload:
                raise AstError(f"{n.symbol} at {path} carries no payload")
            if n.children:
                raise AstError(f"terminal at {path} has children")
            continue
        prod = g.production(n.rule_id)
        if prod.lhs != n.symbol:
            raise AstError(f"rule {n.rule_id} does not expand {n.symbol} (at {path})")
        if len(n.children) != prod.arity:
            raise AstError(
                f"arity mismatch at {path}: {n.rule_id} wants {prod.arity} "
                f"children, got {len(n.children)}"
            )
        for child, want in zip(n.children, prod.rhs):
            if child.symbol != want:
                raise AstError(f"child symbol mismatch under {n.rule_id} at {path}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def serialize_ast(ast: AstNode) -> str:
    parts = []

    def emit(n: AstNode) -> None:
        if n.is_leaf:
            if isinstance(n.payload, VarId):
                parts.append(f"(Var {n.payload.kind} {n.payload.index})")
            else:
                parts.append(f"({n.symbol} {n.payload})")
            return
        parts.append(f"({n.symbol}#{n.rule_id}")
        for child in n.children:
            parts.append(" ")
            emit(child)
        parts.append(")")

    emit(ast)
    return "".join(parts)


@dataclass
class _Token:
    text: str
    offset: int


def _tokenize(text: str) -> list:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(_Token(c, i))
            i += 1
        elif c.isspace():
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
            tokens.append(_Token(text[start:i], start))
    return tokens


def parse_ast(text: str, grammar: Optional[GrammarSpec] = None,
              namespaces: Namespaces = DEFAULT_NAMESPACES) -> AstNode:
    g = grammar or java_subset_grammar()
    tokens = _tokenize(text)
    pos = 0

    def peek() -> _Token:
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(text))
        return tokens[pos]

    def take(expected: Optional[str] = None) -> _Token:
        nonlocal pos
        tok = peek()
        if expected is not None and tok.text != expected:
            raise ParseError(f"expected {expected!r}, found {tok.text!r}", tok.offset)
        pos += 1
        return tok

    def parse_node() -> AstNode:
        take("(")
        head = take()
        if head.text in "()":
            raise ParseError("expected a node head", head.offset)
        if "#" in head.text:
            symbol, rule_id = head.text.split("#", 1)
            try:
                prod = g.production(rule_id)
            except Exception:
                raise ParseError(f"unknown ruleId {rule_id!r}", head.offset) from None
            if prod.lhs != symbol:
                raise ParseError(f"rule {rule_id} does not expand {symbol}", head.offset)
            children = []
            while peek().text != ")":
                children.append(parse_node())
            close = take(")")
            if len(children) != prod.arity:
                raise ParseError(
                    f"arity mismatch: {rule_id} wants {prod.arity} children, "
                    f"got {len(children)}", close.offset)
            for child, want in zip(children, prod.rhs):
                if child.symbol != want:
                    raise ParseError(
                        f"child symbol mismatch under {rule_id}", close.offset)
            return AstNode(symbol=symbol, rule_id=rule_id, children=tuple(children))
        # terminal leaf
        symbol = head.text
        if symbol == "Var":
            kind = take()
            index = take()
            try:
                var = VarId(kind.text, int(index.text))
                var.check_in(namespaces)
            except ValueError as exc:
                raise ParseError(str(exc), kind.offset) from None
            take(")")
            return leaf("Var", var)
        if symbol in ("Type", "Api"):
            name = take()
            take(")")
            return leaf(symbol, name.text)
        raise ParseError(f"malformed token {symbol!r}", head.offset)

    root = parse_node()
    if pos != len(tokens):
        raise ParseError(f"trailing input {tokens[pos].text!r}", tokens[pos].offset)
    return root


def load_ast(path, grammar: Optional[GrammarSpec] = None,
             namespaces: Namespaces = DEFAULT_NAMESPACES) -> AstNode:
    from pathlib import Path

    return parse_ast(Path(path).read_text(encoding="utf-8"), grammar, namespaces)


def save_ast(ast: AstNode, path) -> None:
    from pathlib import Path

    Path(path).write_text(serialize_ast(ast) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# pretty printer
# ---------------------------------------------------------------------------

_DEFAULT_PREFIX = {"formal": "fp_", "field": "field_", "local": "var_"}


def _var_text(var: VarId, name_map) -> str:
    if var.is_literal:
        return "ARG"
    if name_map and var in name_map:
        return name_map[var]
    return f"{_DEFAULT_PREFIX[var.kind]}{var.index}"


def pretty_print(ast: AstNode, name_map=None, registry: Optional[ApiRegistry] = None,
                 indent: str = "    ") -> str:
    """Render a derivation tree in the Java-like surface syntax.

    name_map maps VarId to a display name (typically the formal parameters'
    source names); unmapped slots use fp_N / field_N / var_N and the literal
    placeholder renders as ARG, cast to its expected type when the registry
    can supply one.
    """

    lines = []

    def render_args(arglist: AstNode, expected: tuple) -> str:
        out = []
        n = arglist
        i = 0
        while n.rule_id == "b6a":
            var = n.children[0].payload
            text = _var_text(var, name_map)
            if var.is_literal and i < len(expected):
                text = f"({expected[i]}) ARG"
            out.append(text)
            n = n.children[1]
            i += 1
        return ", ".join(out)

    def call_text(call: AstNode, receiver: Optional[str]) -> str:
        api_name = call.children[0].payload
        sig = registry.resolve(api_name) if registry and api_name in registry else None
        expected = sig.param_types if sig else ()
        args = render_args(call.children[1], expected)
        if receiver is None:
            return f"{api_name}({args})"
        return f"{receiver}.{api_name}({args})"

    def invoke_text(inv: AstNode) -> str:
        target, recv = inv.children[0].payload, inv.children[1].payload
        call, more = inv.children[2], inv.children[3]
        api_name = call.children[0].payload
        sig = registry.resolve(api_name) if registry and api_name in registry else None
        if recv.is_literal:
            if sig is not None and sig.receiver_type:
                recv_text = f"(({sig.receiver_type}) ARG)"
            elif sig is not None and sig.is_internal:
                recv_text = None  # internal calls have no receiver
            else:
                recv_text = None
        else:
            recv_text = _var_text(recv, name_map)
        text = call_text(call, recv_text)
        while more.rule_id == "b4a":
            text += "." + call_text(more.children[0], None)[0:]
            more = more.children[1]
        if not target.is_literal:
            text = f"{_var_text(target, name_map)} = {text}"
        return text + ";"

    def stmt(n: AstNode, depth: int) -> None:
        pad = indent * depth
        rid = n.rule_id
        if rid in ("a1",):
            stmt(n.children[0], depth)
        elif rid == "a2a":
            stmt(n.children[0], depth)
            stmt(n.children[1], depth)
        elif rid == "a2b":
            pass
        elif rid in ("a3", "a4", "a5", "a6"):
            stmt(n.children[0], depth)
        elif rid == "b1":
            t, v = n.children[0].payload, n.children[1].payload
            lines.append(f"{pad}{t} {_var_text(v, name_map)};")
        elif rid == "b2":
            t0, v, t1 = (n.children[0].payload, n.children[1].payload, n.children[2].payload)
            params = registry.constructor_params(t1) if registry else ()
            args = render_args(n.children[3], params)
            lines.append(f"{pad}{t0} {_var_text(v, name_map)} = new {t1}({args});")
        elif rid == "b3":
            lines.append(pad + invoke_text(n))
        elif rid == "b7":
            v = n.children[0].payload
            lines.append(f"{pad}return;" if v.is_literal else f"{pad}return {_var_text(v, name_map)};")
        elif rid in ("c1.a", "c1.b", "c1.c"):
            stmt(n.children[0], depth)
        elif rid == "c2":
            cond = cond_text(n.children[0])
            lines.append(f"{pad}if ({cond}) {{")
            stmt(n.children[1], depth + 1)
            lines.append(f"{pad}}} else {{")
            stmt(n.children[2], depth + 1)
            lines.append(f"{pad}}}")
        elif rid == "c3":
            cond = cond_text(n.children[0])
            lines.append(f"{pad}while ({cond}) {{")
            stmt(n.children[1], depth + 1)
            lines.append(f"{pad}}}")
        elif rid == "c4":
            lines.append(f"{pad}try {{")
            stmt(n.children[0], depth + 1)
            lines.append(f"{pad}}}")
            catch(n.children[1], depth)
        else:
            raise AstError(f"cannot render rule {rid!r}")

    def catch(n: AstNode, depth: int) -> None:
        pad = indent * depth
        if n.rule_id == "c5b":
            return
        t, v = n.children[0].payload, n.children[1].payload
        lines.append(f"{pad}catch ({t} {_var_text(v, name_map)}) {{")
        stmt(n.children[2], depth + 1)
        lines.append(f"{pad}}}")
        catch(n.children[3], depth)

    def cond_text(n: AstNode) -> str:
        return call_text(n.children[0], None)

    stmt(ast, 0)
    return "\n".join(lines)
