"""Whole-body generation: depth-first sampling and beam search.

Sampling follows the recursive scheme: choose an alternative from the model
distribution conditioned on the expansion history summary, the current
inherited attributes, and the latent vector; compute each child's inherited
attributes from the left siblings' synthesized attributes before descending;
compute synthesized attributes on the unwind.  Returned trees are therefore
fully annotated, and re-annotating them offline reproduces the same values.

Beam search explores the same space deterministically: each step expands
every live candidate's frontier top with all alternatives and keeps the k
best by cumulative log probability (ties broken by choice key, then creation
order), with the latent vector fixed to the posterior mean.

The optional hard validity mask zeroes alternatives whose single-step
conjunct is already falsified by the inherited state; it is a generation
aid, not part of the grammar's semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .attrs import SemState, VarId
from .evidence import EncoderParams, EvidenceSet, posterior_of
from .features import ContextFeatures, encode_context
from .grammar import LHS, RECURSIVE_ALTS, GrammarSpec, java_subset_grammar
from .rng import Xoshiro256StarStar
from .semantics import (
    AnnotatedNode,
    MethodContext,
    _eval_equations,
    _inh_dict,
    _inh_state,
    _syn_state,
    initial_attributes,
    leaf_synthesize,
)
from .attrs import CheckEvent


class GenerationAborted(Exception):
    """The depth cap was reached with no terminal escape."""

    def __init__(self, message: str, trace) -> None:
        super().__init__(message)
        self.trace = trace


#: Safety valve against pathological models (e.g. heavy mass on statement
#: recursion); ordinary bodies use a few dozen expansions.
_MAX_EXPANSIONS = 200_000


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 32
    max_seq_stmts: int = 24
    beam_width: int = 10
    temperature: float = 1.0
    mask_mode: str = "off"  # off | hard
    z_mode: str = "sampled"  # sampled | posteriorMean

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
        if self.max_depth < 3:
            raise ValueError("max depth must be >= 3")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.mask_mode not in ("off", "hard"):
            raise ValueError("mask mode must be off or hard")
        if self.z_mode not in ("sampled", "posteriorMean"):
            raise ValueError("z mode must be sampled or posteriorMean")


@dataclass
class GenTrace:
    choices: list = field(default_factory=list)  # (symbol, choice) history
    log_prob: float = 0.0
    mask_fallbacks: int = 0


def apply_mask(dist: dict, symbol: str, inh: SemState, role: Optional[str] = None):
    """Zero alternatives whose single-step validity conjunct is already
    falsified by the inherited state, then renormalize.  Returns
    (distribution, fell_back): when everything is masked the original
    distribution comes back and fell_back is set."""

    keep = dict(dist)
    if symbol == "ArgList":
        owed = inh.type_list or ()
        drop = "b6b" if len(owed) > 0 else "b6a"
        keep = {a: p for a, p in dist.items() if a != drop}
    elif symbol == "Var":
        expected = inh.expected_type()
        keep = {}
        for alt, p in dist.items():
            kind, _, index = alt.partition(":")
            var = VarId(kind, int(index))
            if role in ("decl", "bind"):
                ok = kind == "local"
            elif var.is_literal:
                ok = True
            elif expected is not None:
                ok = inh.symtab.lookup(var) == expected
            elif role in ("target", "receiver", "ret"):
                ok = inh.symtab.lookup(var) is not None
            else:
                ok = True
            if ok:
                keep[alt] = p
    if len(keep) == len(dist):
        return dict(dist), False  # nothing masked, nothing to renormalize
    total = sum(keep.values())
    if not keep or total <= 0:
        return dict(dist), True
    return {a: p / total for a, p in keep.items()}, False


def _temper(dist: dict, temperature: float) -> dict:
    if temperature == 1.0:
        return dist
    powered = {a: p ** (1.0 / temperature) for a, p in dist.items()}
    total = sum(powered.values())
    return {a: p / total for a, p in powered.items()}


def _renorm(dist: dict) -> dict:
    total = sum(dist.values())
    return {a: p / total for a, p in dist.items()}


def resolve_z(model, evidence: EvidenceSet, cfg: GenConfig,
              rng: Optional[Xoshiro256StarStar]) -> np.ndarray:
    encoder = getattr(model, "encoder", None) or EncoderParams()
    post = posterior_of(evidence or EvidenceSet(), encoder)
    if cfg.z_mode == "posteriorMean" or rng is None:
        return post.mean
    noise = np.array(rng.normals(encoder.dim))
    return post.mean + post.std * noise


class _Engine:
    """Shared per-site machinery for both search modes."""

    def __init__(self, grammar: GrammarSpec, model, ctx: MethodContext,
                 cfg: GenConfig, z, trace: GenTrace) -> None:
        self.g = grammar
        self.model = model
        self.ctx = ctx
        self.cfg = cfg
        self.z = z
        self.trace = trace
        self.vocab = model.vocab

    def distribution(self, symbol: str, inh: dict, depth: int, seq_run: int,
                     parent_rule: Optional[str], position: int,
                     temper: bool) -> dict:
        state = _inh_state(inh)
        feats = encode_context(tuple(self.trace.choices), state, self.vocab,
                               current_symbol=symbol, parent_rule_id=parent_rule,
                               position_in_rhs=position)
        dist = self.model.predict(symbol, feats, self.z)
        if temper:
            dist = _temper(dist, self.cfg.temperature)
        if not self.g.is_terminal(symbol):
            dist = self._depth_filter(dist, symbol, depth, seq_run)
            if dist is None:
                raise GenerationAborted(
                    f"depth cap {self.cfg.max_depth} reached expanding {symbol}",
                    self.trace)
        if self.cfg.mask_mode == "hard":
            role = None
            if parent_rule is not None and symbol == "Var":
                role = self.g.production(parent_rule).var_roles.get(position)
            dist, fell_back = apply_mask(dist, symbol, state, role)
            if fell_back:
                self.trace.mask_fallbacks += 1
        return dist

    def _depth_filter(self, dist: dict, symbol: str, depth: int,
                      seq_run: int) -> Optional[dict]:
        recursive = RECURSIVE_ALTS.get(symbol, frozenset())
        out = dist
        near_cap = depth >= self.cfg.max_depth - 2
        run_over = symbol == "Stmt" and seq_run >= self.cfg.max_seq_stmts
        if (near_cap or run_over) and recursive:
            keep = {a: p for a, p in out.items() if a not in recursive}
            if keep and sum(keep.values()) > 0:
                out = _renorm(keep)
        if depth >= self.cfg.max_depth:
            # only alternatives that terminate immediately may fire
            keep = {a: p for a, p in out.items()
                    if self.g.production(a).arity == 0}
            if not keep or sum(keep.values()) <= 0:
                return None
            out = _renorm(keep)
        return out

    def make_leaf(self, symbol: str, choice: str, inh: dict) -> AnnotatedNode:
        if symbol == "Var":
            kind, _, index = choice.partition(":")
            payload = VarId(kind, int(index))
        else:
            payload = choice
        syn = leaf_synthesize(symbol, payload, inh, self.ctx)
        node = AnnotatedNode(
            symbol=symbol, rule_id=None, children=(), payload=payload,
            inh=_inh_state(inh), syn=_syn_state(syn), valid=True)
        object.__setattr__(node, "_syn_attrs", syn)
        return node

    def child_inherited(self, prod, index: int, inh: dict, child_syn: list) -> dict:
        return _eval_equations(prod, index, inh, child_syn, _drop_event, None)

    def finish_node(self, prod, inh: dict, children: list) -> AnnotatedNode:
        events = []

        def emit(check, passed):
            events.append(CheckEvent(prod.rule_id, check, bool(passed)))

        child_syn = [c._syn_attrs for c in children]
        syn = _eval_equations(prod, LHS, inh, child_syn, emit, None)
        node = AnnotatedNode(
            symbol=prod.lhs, rule_id=prod.rule_id, children=tuple(children),
            payload=None, inh=_inh_state(inh), syn=_syn_state(syn),
            valid=bool(syn.get("valid", True)), events=tuple(events))
        object.__setattr__(node, "_syn_attrs", syn)
        return node


def _drop_event(check, passed):
    pass


def _child_seq_run(rule_id: str, seq_run: int) -> int:
    if rule_id == "a2a":
        return seq_run + 1
    return 0


def generate(grammar: GrammarSpec, model, ctx: MethodContext,
             evidence: EvidenceSet, cfg: GenConfig,
             trace: Optional[GenTrace] = None) -> AnnotatedNode:
    """Sample one fully annotated method body; deterministic per seed."""
    g = grammar or java_subset_grammar()
    rng = Xoshiro256StarStar(cfg.seed)
    trace = trace if trace is not None else GenTrace()
    z = resolve_z(model, evidence, cfg, rng)
    eng = _Engine(g, model, ctx, cfg, z, trace)
    budget = [_MAX_EXPANSIONS]

    def expand(symbol: str, inh: dict, depth: int, seq_run: int,
               parent_rule: Optional[str], position: int) -> AnnotatedNode:
        budget[0] -= 1
        if budget[0] <= 0:
            raise GenerationAborted("expansion budget exceeded", trace)
        dist = eng.distribution(symbol, inh, depth, seq_run, parent_rule,
                                position, temper=True)
        alts = sorted(dist)
        idx = rng.weighted_choice(alts, [dist[a] for a in alts])
        choice = alts[idx]
        trace.log_prob += math.log(dist[choice])
        trace.choices.append((symbol, choice))
        if g.is_terminal(symbol):
            return eng.make_leaf(symbol, choice, inh)
        prod = g.production(choice)
        run = _child_seq_run(choice, seq_run)
        children = []
        child_syn = []
        for i, child_symbol in enumerate(prod.rhs):
            child_inh = eng.child_inherited(prod, i, inh, child_syn)
            child = expand(child_symbol, child_inh, depth + 1, run, choice, i)
            children.append(child)
            child_syn.append(child._syn_attrs)
        return eng.finish_node(prod, inh, children)

    root_inh = _inh_dict(initial_attributes(ctx))
    return expand(g.start_symbol, root_inh, 0, 0, None, 0)


# ---------------------------------------------------------------------------
# beam search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Frame:
    """One open node: the production being filled, its inherited attributes,
    and the completed children so far.  prod None marks the sentinel root
    frame whose single pending child is the start symbol."""

    prod: object
    inh: dict
    children: tuple
    depth: int
    seq_run: int

    def pending_symbol(self, g: GrammarSpec) -> str:
        if self.prod is None:
            return g.start_symbol
        return self.prod.rhs[len(self.children)]

    @property
    def arity(self) -> int:
        return 1 if self.prod is None else self.prod.arity


@dataclass(frozen=True)
class Candidate:
    """A partial derivation: a stack of open frames realizes the depth-first
    left-to-right frontier; log_prob accumulates the scored choices."""

    log_prob: float
    stack: tuple
    done: Optional[AnnotatedNode]
    last_choice: str
    order: int

    def sort_key(self):
        return (-self.log_prob, self.last_choice, self.order)


def beam_search(grammar: GrammarSpec, model, ctx: MethodContext,
                evidence: EvidenceSet, cfg: GenConfig,
                trace: Optional[GenTrace] = None) -> list:
    """Top-k (annotated tree, log probability), sorted by score descending.

    The latent vector is fixed to the posterior mean for every candidate;
    scores never include the sampling temperature.  Each step expands every
    live candidate's frontier top with all alternatives and keeps the k best
    by cumulative log probability (ties broken by choice key, then creation
    order).  Finished candidates stay in the beam and hold their slots, so a
    width-1 beam is exactly the greedy derivation; the search ends when every
    surviving candidate is complete.
    """
    g = grammar or java_subset_grammar()
    trace = trace if trace is not None else GenTrace()
    z = resolve_z(model, evidence, cfg, None)
    eng = _Engine(g, model, ctx, cfg, z, trace)
    k = cfg.beam_width
    counter = [0]

    def fresh_order() -> int:
        counter[0] += 1
        return counter[0]

    def unwind(stack: tuple, node: AnnotatedNode):
        """Attach a finished node, closing every completed frame."""
        while True:
            top = stack[-1]
            children = top.children + (node,)
            if len(children) < top.arity:
                return stack[:-1] + (replace(top, children=children),), None
            if top.prod is None:
                return (), node
            node = eng.finish_node(top.prod, top.inh, list(children))
            stack = stack[:-1]

    def expand(cand: Candidate) -> list:
        top = cand.stack[-1]
        symbol = top.pending_symbol(g)
        if top.prod is None:
            inh, parent_rule, position, depth = top.inh, None, 0, top.depth
        else:
            i = len(top.children)
            inh = eng.child_inherited(top.prod, i, top.inh,
                                      [c._syn_attrs for c in top.children])
            parent_rule, position, depth = top.prod.rule_id, i, top.depth + 1
        try:
            dist = eng.distribution(symbol, inh, depth, top.seq_run,
                                    parent_rule, position, temper=False)
        except GenerationAborted:
            return []
        out = []
        for choice in sorted(dist):
            p = dist[choice]
            if p <= 0.0:
                continue
            lp = cand.log_prob + math.log(p)
            if g.is_terminal(symbol):
                stack, done = unwind(cand.stack, eng.make_leaf(symbol, choice, inh))
            else:
                prod = g.production(choice)
                frame = _Frame(prod=prod, inh=inh, children=(), depth=depth,
                               seq_run=_child_seq_run(choice, top.seq_run))
                if prod.arity == 0:
                    stack, done = unwind(cand.stack,
                                         eng.finish_node(prod, inh, []))
                else:
                    stack, done = cand.stack + (frame,), None
            out.append(Candidate(lp, stack, done, choice, fresh_order()))
        return out

    root_inh = _inh_dict(initial_attributes(ctx))
    beam = [Candidate(0.0, (_Frame(None, root_inh, (), 0, 0),), None, "",
                      fresh_order())]
    budget = _MAX_EXPANSIONS
    while any(c.done is None for c in beam):
        pool = []
        for cand in beam:
            if cand.done is not None:
                pool.append(cand)
            else:
                pool.extend(expand(cand))
                budget -= 1
        if not pool:
            raise GenerationAborted("beam exhausted without a complete body", trace)
        if budget <= 0:
            raise GenerationAborted("beam expansion budget exceeded", trace)
        pool.sort(key=Candidate.sort_key)
        beam = pool[:k]
    return [(c.done, c.log_prob) for c in beam]


def greedy(grammar: GrammarSpec, model, ctx: MethodContext,
           evidence: EvidenceSet, cfg: GenConfig) -> AnnotatedNode:
    """Argmax-at-each-step derivation (what a width-1 beam must equal);
    ties resolve to the lexicographically smallest choice key."""
    g = grammar or java_subset_grammar()
    trace = GenTrace()
    z = resolve_z(model, evidence, cfg, None)
    eng = _Engine(g, model, ctx, cfg, z, trace)

    def expand(symbol, inh, depth, seq_run, parent_rule, position):
        dist = eng.distribution(symbol, inh, depth, seq_run, parent_rule,
                                position, temper=False)
        best = max(dist.values())
        choice = min(a for a, p in dist.items() if p == best)
        if g.is_terminal(symbol):
            return eng.make_leaf(symbol, choice, inh)
        prod = g.production(choice)
        run = _child_seq_run(choice, seq_run)
        children = []
        child_syn = []
        for i, child_symbol in enumerate(prod.rhs):
            child_inh = eng.child_inherited(prod, i, inh, child_syn)
            child = expand(child_symbol, child_inh, depth + 1, run, choice, i)
            children.append(child)
            child_syn.append(child._syn_attrs)
        return eng.finish_node(prod, inh, children)

    root_inh = _inh_dict(initial_attributes(ctx))
    return expand(g.start_symbol, root_inh, 0, 0, None, 0)
