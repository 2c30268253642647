"""Context features visible to an expansion model at one choice site.

The symbol table is exposed as a binary matrix with one row per type in a
fixed vocabulary (plus a reserved out-of-vocabulary row) and one column per
variable slot.  Sequence history reaches the model as the enclosing
production and the position within its right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attrs import Namespaces, SemState, VarId
from .grammar import GrammarSpec, java_subset_grammar
from .registry import ApiRegistry


@dataclass(frozen=True)
class Vocabulary:
    """Fixed enumeration of types, api names, variable slots, and rules;
    everything a model's support and feature layout depend on."""

    types: tuple
    apis: tuple
    var_slots: tuple
    rules: tuple
    namespaces: Namespaces

    @classmethod
    def build(cls, registry: ApiRegistry, namespaces: Namespaces = Namespaces(),
              internal_methods=(), extra_types=(), grammar: Optional[GrammarSpec] = None):
        g = grammar or java_subset_grammar()
        types = set(registry.type_names())
        types.update(extra_types)
        apis = set(registry.names())
        for sig in internal_methods:
            apis.add(sig.name)
            types.add(sig.return_type)
            types.update(sig.param_types)
        slots = []
        for kind in ("formal", "field", "local"):
            slots.extend(VarId(kind, i) for i in range(namespaces.size(kind)))
        slots.append(VarId("literal", 0))
        rules = sorted(g.productions)
        return cls(
            types=tuple(sorted(types)),
            apis=tuple(sorted(apis)),
            var_slots=tuple(slots),
            rules=tuple(rules),
            namespaces=namespaces,
        )

    def type_index(self, type_name: Optional[str]) -> int:
        """Row of a type; unknown and absent types share the reserved
        out-of-vocabulary row (never dropped)."""
        if type_name is None:
            return len(self.types)
        try:
            return self.types.index(type_name)
        except ValueError:
            return len(self.types)

    def alternatives(self, symbol: str, grammar: Optional[GrammarSpec] = None) -> list:
        """Choice keys for one symbol: rule ids for structural nonterminals,
        payload keys for the terminal vocabularies."""
        g = grammar or java_subset_grammar()
        if symbol == "Var":
            return [v.key() for v in self.var_slots]
        if symbol == "Type":
            return list(self.types)
        if symbol == "Api":
            return list(self.apis)
        return g.alternatives(symbol)


@dataclass(frozen=True)
class ContextFeatures:
    current_symbol: str
    parent_rule_id: Optional[str]
    position_in_rhs: int
    symtab: tuple  # ((slot key, type name), ...) in table order
    expected_type: Optional[str]  # head of typeList, else chain exprType
    method_ret_type: Optional[str]
    ret_done: bool
    itr_vec: tuple
    initialized: tuple  # slot keys currently initialized
    used: tuple  # slot keys currently used

    def site_expected(self) -> Optional[str]:
        """The type this site is expected to produce, when one flows in."""
        return self.expected_type

    def match_set(self) -> frozenset:
        """Slots the symbol table distinguishes for this site: those whose
        type equals the expected type when one exists, otherwise the bound
        local slots (the derivation-state summary)."""
        want = self.site_expected()
        if want is not None:
            return frozenset(k for k, t in self.symtab if t == want)
        return frozenset(k for k, _ in self.symtab if k.startswith("local:"))


def encode_context(seq, inh: SemState, vocab: Vocabulary, *,
                   current_symbol: str, parent_rule_id: Optional[str],
                   position_in_rhs: int) -> ContextFeatures:
    """Features for expanding `current_symbol` under `inh`.

    `seq` is the expansion history; it is accepted for signature parity but
    only its tail summary (the enclosing rule and position, passed
    explicitly) enters the features.
    """
    del seq
    symtab = tuple((v.key(), t) for v, t in inh.symtab.items())
    return ContextFeatures(
        current_symbol=current_symbol,
        parent_rule_id=parent_rule_id,
        position_in_rhs=position_in_rhs,
        symtab=symtab,
        expected_type=inh.expected_type(),
        method_ret_type=inh.method_ret_type,
        ret_done=bool(inh.flags.ret_done),
        itr_vec=inh.flags.itr_vec or (False, False),
        initialized=tuple(sorted(v.key() for v, b in inh.flags.initialized.items() if b)),
        used=tuple(sorted(v.key() for v, b in inh.flags.used.items() if b)),
    )


_MAX_POSITION = 6


def feature_dim(vocab: Vocabulary) -> int:
    n_types = len(vocab.types) + 1  # + out-of-vocabulary row
    n_slots = len(vocab.var_slots)
    return (
        len(vocab.rules) + 1          # parent rule one-hot (+unknown)
        + _MAX_POSITION               # position one-hot, capped
        + n_types * n_slots           # symbol-table matrix
        + n_types + 1                 # expected type (+none)
        + n_types + 1                 # method return type (+none)
        + 3                           # ret_done, itrVec bits
        + n_slots                     # initialized bits
        + n_slots                     # used bits
    )


def feature_vector(f: ContextFeatures, vocab: Vocabulary,
                   attribute_blind: bool = False) -> np.ndarray:
    """Dense encoding of the features.  With attribute_blind, every
    attribute-derived segment is zeroed and only the sequence summary (rule,
    position) survives; one flag, no separate code path."""
    n_types = len(vocab.types) + 1
    n_slots = len(vocab.var_slots)
    slot_index = {v.key(): i for i, v in enumerate(vocab.var_slots)}
    rule_index = {r: i for i, r in enumerate(vocab.rules)}

    segs = []
    parent = np.zeros(len(vocab.rules) + 1)
    parent[rule_index.get(f.parent_rule_id, len(vocab.rules))] = 1.0
    segs.append(parent)
    pos = np.zeros(_MAX_POSITION)
    pos[min(f.position_in_rhs, _MAX_POSITION - 1)] = 1.0
    segs.append(pos)

    mat = np.zeros((n_types, n_slots))
    exp = np.zeros(n_types + 1)
    ret = np.zeros(n_types + 1)
    bits = np.zeros(3)
    ini = np.zeros(n_slots)
    use = np.zeros(n_slots)
    if not attribute_blind:
        for key, t in f.symtab:
            if key in slot_index:
                mat[vocab.type_index(t), slot_index[key]] = 1.0
        if f.expected_type is None:
            exp[n_types] = 1.0
        else:
            exp[vocab.type_index(f.expected_type)] = 1.0
        if f.method_ret_type is None:
            ret[n_types] = 1.0
        else:
            ret[vocab.type_index(f.method_ret_type)] = 1.0
        bits[0] = 1.0 if f.ret_done else 0.0
        bits[1] = 1.0 if f.itr_vec[0] else 0.0
        bits[2] = 1.0 if f.itr_vec[1] else 0.0
        for key in f.initialized:
            if key in slot_index:
                ini[slot_index[key]] = 1.0
        for key in f.used:
            if key in slot_index:
                use[slot_index[key]] = 1.0
    segs.extend([mat.reshape(-1), exp, ret, bits, ini, use])
    return np.concatenate(segs)
