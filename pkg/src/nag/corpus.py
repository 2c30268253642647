"""Training-data extraction and the desk-scale synthetic corpus.

One training example is emitted per tree node, in pre-order; each carries
the expansion history up to that node, the chosen alternative, the inherited
attributes computed by the evaluator, and a reference to the class's
evidence set.  Replaying the recorded choices through the generator
reconstructs the original tree exactly.

The synthetic corpus exists to make next-token evaluation discriminative at
desk scale: each class draws its variable types so that the correct
argument, receiver, and returned variable are functions of the symbol table,
while an attribute-blind model sees statistically uniform answers.

Corpus directory layout::

    registry.tsv
    classes/<id>/context.txt    # method context + registry reference
    classes/<id>/evidence.txt
    classes/<id>/body_<k>.ast
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .astio import AstNode, load_ast, save_ast, serialize_ast
from .attrs import Namespaces, VarId
from .evidence import (
    EvidenceSet,
    evidence as make_evidence,
    format_evidence,
    parse_evidence,
    split_identifier,
)
from .features import ContextFeatures, Vocabulary, encode_context
from .generator import GenConfig, GenTrace, generate
from .grammar import GrammarSpec, java_subset_grammar
from .registry import ApiRegistry, ApiSignature, ctor_name, format_registry, load_registry
from .rng import Xoshiro256StarStar
from .semantics import MethodContext, annotate


@dataclass(frozen=True)
class TrainingExample:
    """One expansion decision: everything the model may condition on, plus
    the observed choice."""

    prefix: tuple  # ((symbol, choice), ...) from the root, exclusive
    symbol: str
    choice: str
    features: ContextFeatures
    evidence: Optional[EvidenceSet]


@dataclass(frozen=True)
class ClassRecord:
    class_id: str
    ctx: MethodContext
    evidence: EvidenceSet
    bodies: tuple  # AstNode per method


def extract_examples(record: ClassRecord, method_index: int,
                     vocab: Optional[Vocabulary] = None,
                     grammar: Optional[GrammarSpec] = None) -> list:
    """Pre-order training examples for one method body."""
    g = grammar or java_subset_grammar()
    vocab = vocab or vocabulary_for(record.ctx)
    body = record.bodies[method_index]
    annotated = annotate(body, record.ctx, g)
    out = []
    prefix = []

    def visit(node, parent_rule, position):
        feats = encode_context(tuple(prefix), node.inh, vocab,
                               current_symbol=node.symbol,
                               parent_rule_id=parent_rule,
                               position_in_rhs=position)
        out.append(TrainingExample(
            prefix=tuple(prefix), symbol=node.symbol, choice=node.choice(),
            features=feats, evidence=record.evidence))
        prefix.append((node.symbol, node.choice()))
        for i, child in enumerate(node.children):
            visit(child, node.rule_id, i)

    visit(annotated, None, 0)
    return out


def vocabulary_for(ctx: MethodContext, namespaces: Optional[Namespaces] = None) -> Vocabulary:
    return Vocabulary.build(
        ctx.registry,
        namespaces or ctx.namespaces,
        internal_methods=ctx.internal_methods,
        extra_types=[t for _, t in (*ctx.formals, *ctx.fields)] + [ctx.method_ret_type],
    )


class ReplayModel:
    """Places probability one on a recorded choice sequence, consumed in the
    generator's pre-order; used for forced replay round-trips."""

    def __init__(self, vocab: Vocabulary, choices) -> None:
        self.vocab = vocab
        self._choices = list(choices)
        self._at = 0

    def predict(self, symbol: str, feats, z=None) -> dict:
        if self._at >= len(self._choices):
            raise ValueError("replay ran past the recorded derivation")
        want_symbol, want_choice = self._choices[self._at]
        if want_symbol != symbol:
            raise ValueError(
                f"replay desynchronized: expected {want_symbol}, got {symbol}")
        self._at += 1
        return {a: (1.0 if a == want_choice else 0.0)
                for a in self.vocab.alternatives(symbol)}


def forced_replay(examples, ctx: MethodContext,
                  vocab: Optional[Vocabulary] = None,
                  grammar: Optional[GrammarSpec] = None) -> AstNode:
    """Rebuild the tree a pre-order example list was extracted from."""
    g = grammar or java_subset_grammar()
    vocab = vocab or vocabulary_for(ctx)
    model = ReplayModel(vocab, [(ex.symbol, ex.choice) for ex in examples])
    cfg = GenConfig(seed=0, max_depth=10 ** 6, max_seq_stmts=10 ** 6)
    annotated = generate(g, model, ctx, EvidenceSet(), cfg, trace=GenTrace())
    return annotated.strip()


def drop_evidence(x: EvidenceSet, p: float, seed: int) -> EvidenceSet:
    """Keep each evidence item independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("keep probability must be in [0, 1]")
    rng = Xoshiro256StarStar(seed)
    kept: dict = {}
    for _, kind, item in x.all_items():
        if rng.random() < p:
            kept.setdefault(kind, []).append(item)
    return EvidenceSet({k: tuple(v) for k, v in kept.items()})


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

_VAR_TYPE_POOL = tuple(
    f"app.{name}" for name in (
        "Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta", "Eta", "Theta",
        "Iota", "Kappa", "Lambda", "Mu", "Nu", "Xi", "Omicron", "Pi", "Rho",
        "Sigma", "Tau", "Upsilon", "Phi", "Chi", "Psi", "Omega",
    )
)

_N_BOXES = 10


def _box_type(k: int) -> str:
    return f"box.Box{k}"


def _box_ctor_params(k: int) -> tuple:
    pool = _VAR_TYPE_POOL
    params = [pool[(3 * k) % len(pool)], pool[(3 * k + 7) % len(pool)]]
    if k % 2 == 1:
        params.append(pool[(3 * k + 13) % len(pool)])
    return tuple(params)


def _box_api_param(k: int) -> str:
    return _VAR_TYPE_POOL[(5 * k + 1) % len(_VAR_TYPE_POOL)]


def synth_registry() -> ApiRegistry:
    """The fixed registry all synthetic classes compile against."""
    reg = ApiRegistry()
    for k in range(_N_BOXES):
        box = _box_type(k)
        reg.add(ApiSignature(ctor_name(box), None, box, _box_ctor_params(k)))
        reg.add(ApiSignature(f"use{k}", box, "void", (_box_api_param(k),)))
    return reg


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 100
    seed: int = 0
    templates: tuple = ("ctor_return", "ctor_invoke_return")
    invoke_fraction: float = 0.1


def synth_corpus(spec: SynthSpec) -> list:
    """Deterministic ClassRecords; every body passes every check."""
    if not spec.templates:
        raise ValueError("at least one template is required")
    for t in spec.templates:
        if t not in ("ctor_return", "ctor_invoke_return"):
            raise ValueError(f"unknown template {t!r}")
    registry = synth_registry()
    records = []
    for idx in range(spec.n_classes):
        rng = Xoshiro256StarStar(spec.seed * 0x9E3779B9 + idx * 2 + 1)
        records.append(_synth_class(idx, rng, registry, spec))
    return records


def _synth_class(idx: int, rng: Xoshiro256StarStar, registry: ApiRegistry,
                 spec: SynthSpec) -> ClassRecord:
    k = rng.randrange(_N_BOXES)
    box = _box_type(k)
    params = _box_ctor_params(k)
    use_invoke = ("ctor_invoke_return" in spec.templates and
                  ("ctor_return" not in spec.templates or
                   rng.random() < spec.invoke_fraction))

    required = list(dict.fromkeys(params))
    if use_invoke:
        q = _box_api_param(k)
        if q not in required:
            required.append(q)
    fillers = [t for t in _VAR_TYPE_POOL if t not in required]
    rng.shuffle(fillers)
    twenty = required + fillers[: 20 - len(required)]
    rng.shuffle(twenty)

    formals = tuple((VarId("formal", i), twenty[i]) for i in range(10))
    fields = tuple((VarId("field", i), twenty[10 + i]) for i in range(10))
    slot_of = {t: v for v, t in (*formals, *fields)}
    local = VarId("local", rng.randrange(10))

    def var(v):
        return AstNode(symbol="Var", payload=v)

    def typ(t):
        return AstNode(symbol="Type", payload=t)

    def arglist(slots):
        out = AstNode(symbol="ArgList", rule_id="b6b", children=())
        for v in reversed(slots):
            out = AstNode(symbol="ArgList", rule_id="b6a", children=(var(v), out))
        return out

    def stmt(rule, inner):
        return AstNode(symbol="Stmt", rule_id=rule, children=(inner,))

    objinit = stmt("a4", AstNode(symbol="ObjInit", rule_id="b2", children=(
        typ(box), var(local), typ(box), arglist([slot_of[t] for t in params]))))

    if use_invoke:
        q = _box_api_param(k)
        ret_slot = rng.choice([v for v, _ in (*formals, *fields)])
        ret_type = dict((*formals, *fields))[ret_slot]
        call = AstNode(symbol="Call", rule_id="b5", children=(
            AstNode(symbol="Api", payload=f"use{k}"), arglist([slot_of[q]])))
        invoke = stmt("a5", AstNode(symbol="Invoke", rule_id="b3", children=(
            var(VarId("literal", 0)), var(local), call,
            AstNode(symbol="InvokeMore", rule_id="b4b", children=()))))
        ret = stmt("a6", AstNode(symbol="Return", rule_id="b7",
                                 children=(var(ret_slot),)))
        body_stmt = AstNode(symbol="Stmt", rule_id="a2a", children=(
            objinit, AstNode(symbol="Stmt", rule_id="a2a",
                             children=(invoke, ret))))
    else:
        ret_type = box
        ret = stmt("a6", AstNode(symbol="Return", rule_id="b7",
                                 children=(var(local),)))
        body_stmt = AstNode(symbol="Stmt", rule_id="a2a", children=(objinit, ret))

    body = AstNode(symbol="Start", rule_id="a1", children=(body_stmt,))
    ctx = MethodContext(formals=formals, fields=fields,
                        method_ret_type=ret_type, registry=registry)
    ev = make_evidence(
        classNameKeywords=[("box", f"b{k}", "factory")],
        fieldTypes=[split_identifier(t) for _, t in fields[:4]],
        surroundingMethodHeaders=[("helper", "void") + split_identifier(box)],
        methodNameKeywords=[("make",)],
        formalParamTypes=[split_identifier(t) for _, t in formals[:4]],
        returnType=[split_identifier(ret_type)],
        javadocKeywords=[("build", "and", "return")],
    )
    return ClassRecord(class_id=f"c{idx:05d}", ctx=ctx, evidence=ev, bodies=(body,))


def split_corpus(records, held_out_every: int = 10):
    """Deterministic train/held-out split, disjoint by class id."""
    train, held = [], []
    for i, record in enumerate(records):
        (held if i % held_out_every == 0 else train).append(record)
    return train, held


# ---------------------------------------------------------------------------
# directory layout
# ---------------------------------------------------------------------------


def save_corpus(records, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    registries = {format_registry(r.ctx.registry) for r in records}
    if len(registries) != 1:
        raise ValueError("a corpus directory holds exactly one registry")
    (out / "registry.tsv").write_text(next(iter(registries)), encoding="utf-8")
    for record in records:
        cdir = out / "classes" / record.class_id
        cdir.mkdir(parents=True, exist_ok=True)
        (cdir / "context.txt").write_text(
            format_context(record.ctx, registry_ref="../../registry.tsv"),
            encoding="utf-8")
        (cdir / "evidence.txt").write_text(
            format_evidence(record.evidence) + "\n", encoding="utf-8")
        for k, body in enumerate(record.bodies):
            save_ast(body, cdir / f"body_{k}.ast")


def load_corpus(corpus_dir) -> list:
    root = Path(corpus_dir)
    records = []
    for cdir in sorted((root / "classes").iterdir()):
        if not cdir.is_dir():
            continue
        ctx = load_context(cdir / "context.txt")
        ev = parse_evidence((cdir / "evidence.txt").read_text(encoding="utf-8"))
        bodies = tuple(
            load_ast(p, namespaces=ctx.namespaces)
            for p in sorted(cdir.glob("body_*.ast"))
        )
        records.append(ClassRecord(class_id=cdir.name, ctx=ctx,
                                   evidence=ev, bodies=bodies))
    return records


def format_context(ctx: MethodContext, registry_ref: str) -> str:
    lines = [f"registry = {registry_ref}", f"ret = {ctx.method_ret_type}"]
    lines.append(
        f"namespaces = {ctx.namespaces.formals} {ctx.namespaces.fields} {ctx.namespaces.locals}")
    for var, t in ctx.formals:
        lines.append(f"formal = {var.index} {t}")
    for var, t in ctx.fields:
        lines.append(f"field = {var.index} {t}")
    for sig in ctx.internal_methods:
        params = ",".join(sig.param_types) if sig.param_types else "-"
        lines.append(f"internal = {sig.name} {sig.return_type} {params}")
    return "\n".join(lines) + "\n"


def load_context(path) -> MethodContext:
    path = Path(path)
    registry = ApiRegistry()
    ret = "void"
    namespaces = Namespaces()
    formals, fields, internals = [], [], []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        key, value = key.strip(), value.strip()
        if key == "registry":
            registry = load_registry((path.parent / value).resolve())
        elif key == "ret":
            ret = value
        elif key == "namespaces":
            namespaces = Namespaces(*(int(x) for x in value.split()))
        elif key == "formal":
            index, t = value.split()
            formals.append((VarId("formal", int(index)), t))
        elif key == "field":
            index, t = value.split()
            fields.append((VarId("field", int(index)), t))
        elif key == "internal":
            name, ret_type, params = value.split()
            ptypes = () if params == "-" else tuple(params.split(","))
            internals.append(ApiSignature(name, None, ret_type, ptypes, True))
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return MethodContext(
        formals=tuple(formals), fields=tuple(fields),
        internal_methods=tuple(internals), method_ret_type=ret,
        registry=registry, namespaces=namespaces)


# --- documented one-line export of training examples (for inspection)

def format_examples_tsv(records, grammar: Optional[GrammarSpec] = None) -> str:
    """class<TAB>method<TAB>node<TAB>symbol<TAB>choice<TAB>parentRule<TAB>
    position<TAB>expectedType<TAB>symTab<TAB>prefix"""
    lines = []
    for record in records:
        vocab = vocabulary_for(record.ctx)
        for m in range(len(record.bodies)):
            for n, ex in enumerate(extract_examples(record, m, vocab, grammar)):
                f = ex.features
                symtab = ",".join(f"{k}:{t}" for k, t in f.symtab)
                prefix = " ".join(f"{s}#{c}" for s, c in ex.prefix)
                lines.append("\t".join([
                    record.class_id, str(m), str(n), ex.symbol, ex.choice,
                    f.parent_rule_id or "-", str(f.position_in_rhs),
                    f.site_expected() or "-", symtab or "-", prefix or "-",
                ]))
    return "\n".join(lines)
