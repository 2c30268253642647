"""The two interchangeable expansion models.

CountModel: hierarchical backoff counts with Laplace smoothing.  Contexts,
most to least specific: (symbol, enclosing rule, position, expected type,
symbol-table match set) -> (symbol, expected type) -> (symbol,).  Prediction
smooths at the most specific level that has any mass; an untrained model is
uniform.  The model ignores the latent vector by design.

LatentModel: per-alternative linear weights over context features
concatenated with the latent vector, trained by stochastic gradient ascent
on the Monte-Carlo lower bound: per step, draw V ~ N(0, I), set
z = mean + sqrt(variance) * V, and follow the gradient of
sum_i log P(choice_i | features_i, z) through the weights, the per-kind
encoder maps, and the per-kind log-variances.

The attribute-blind ablation is the same model with every attribute-derived
feature zeroed; one flag, no separate code path.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attrs import Namespaces, VarId
from .evidence import (
    EVIDENCE_KINDS,
    EncoderParams,
    EvidenceSet,
    hash_bag,
    posterior,
)
from .features import ContextFeatures, Vocabulary, feature_dim, feature_vector
from .grammar import java_subset_grammar
from .rng import Xoshiro256StarStar


class ModelError(Exception):
    pass


class TrainingDiverged(ModelError):
    def __init__(self, step: int, loss: float) -> None:
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


# ---------------------------------------------------------------------------
# count model
# ---------------------------------------------------------------------------


class CountModel:
    LEVELS = 3

    def __init__(self, vocab: Vocabulary, alpha: float = 0.1,
                 attribute_blind: bool = False) -> None:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.vocab = vocab
        self.alpha = alpha
        self.attribute_blind = attribute_blind
        self.tables = [dict() for _ in range(self.LEVELS)]

    def context_keys(self, symbol: str, f: ContextFeatures) -> list:
        expected = None if self.attribute_blind else f.site_expected()
        match = () if self.attribute_blind else tuple(sorted(f.match_set()))
        return [
            (symbol, f.parent_rule_id or "", f.position_in_rhs, expected or "", match),
            (symbol, expected or ""),
            (symbol,),
        ]

    def observe(self, symbol: str, f: ContextFeatures, choice: str) -> None:
        for level, key in enumerate(self.context_keys(symbol, f)):
            self.tables[level].setdefault(key, Counter())[choice] += 1

    def predict(self, symbol: str, f: ContextFeatures, z=None) -> dict:
        del z  # the count model never consumes the latent vector
        alts = self.vocab.alternatives(symbol)
        if not alts:
            raise ModelError(f"symbol {symbol!r} has no alternatives")
        counter = Counter()
        for level, key in enumerate(self.context_keys(symbol, f)):
            found = self.tables[level].get(key)
            if found and sum(found.values()) > 0:
                counter = found
                break
        total = sum(counter.values())
        k = len(alts)
        denom = total + k * self.alpha
        return {a: (counter.get(a, 0) + self.alpha) / denom for a in alts}


def train_count(examples, vocab: Vocabulary, alpha: float = 0.1,
                attribute_blind: bool = False) -> CountModel:
    model = CountModel(vocab, alpha=alpha, attribute_blind=attribute_blind)
    for ex in examples:
        model.observe(ex.symbol, ex.features, ex.choice)
    return model


# --- count model file format: '#'-prefixed header, then one line per count
# --- `level<TAB>contextKeyJSON<TAB>alternative<TAB>count`

def save_count_model(model: CountModel, path) -> None:
    v = model.vocab
    lines = [
        "# nag-count-model v1",
        f"# alpha {model.alpha!r}",
        f"# attribute_blind {int(model.attribute_blind)}",
        f"# namespaces {v.namespaces.formals} {v.namespaces.fields} {v.namespaces.locals}",
        "# types " + json.dumps(list(v.types)),
        "# apis " + json.dumps(list(v.apis)),
        "# rules " + json.dumps(list(v.rules)),
    ]
    for level, table in enumerate(model.tables):
        for key in sorted(table, key=repr):
            for alt, count in sorted(table[key].items()):
                lines.append(f"{level}\t{json.dumps(list(key))}\t{alt}\t{count}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_count_model(path) -> CountModel:
    text = Path(path).read_text(encoding="utf-8")
    header = {}
    counts = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("#"):
            parts = raw[1:].strip().split(" ", 1)
            if len(parts) == 2:
                header[parts[0]] = parts[1]
            continue
        level, key_json, alt, count = raw.split("\t")
        counts.append((int(level), tuple(_dejson(x) for x in json.loads(key_json)), alt, int(count)))
    if header.get("nag-count-model") != "v1":
        raise ModelError("not a count model file")
    ns = tuple(int(x) for x in header["namespaces"].split())
    vocab = Vocabulary(
        types=tuple(json.loads(header["types"])),
        apis=tuple(json.loads(header["apis"])),
        var_slots=_slots(Namespaces(*ns)),
        rules=tuple(json.loads(header["rules"])),
        namespaces=Namespaces(*ns),
    )
    model = CountModel(vocab, alpha=float(header["alpha"]),
                       attribute_blind=bool(int(header["attribute_blind"])))
    for level, key, alt, count in counts:
        model.tables[level].setdefault(key, Counter())[alt] = count
    return model


def _dejson(x):
    return tuple(x) if isinstance(x, list) else x


def _slots(ns: Namespaces) -> tuple:
    slots = []
    for kind in ("formal", "field", "local"):
        slots.extend(VarId(kind, i) for i in range(ns.size(kind)))
    slots.append(VarId("literal", 0))
    return tuple(slots)


# ---------------------------------------------------------------------------
# latent model
# ---------------------------------------------------------------------------


@dataclass
class LatentHyper:
    dim: int = 32
    lr: float = 0.5
    steps: int = 200
    mc_samples: int = 1
    seed: int = 0
    train_encoders: bool = True


class LatentModel:
    def __init__(self, vocab: Vocabulary, encoder: EncoderParams,
                 attribute_blind: bool = False) -> None:
        self.vocab = vocab
        self.encoder = encoder
        self.attribute_blind = attribute_blind
        self.fdim = feature_dim(vocab)
        self.dim = encoder.dim
        g = java_subset_grammar()
        self.weights = {
            sym: np.zeros((len(vocab.alternatives(sym, g)), self.fdim + self.dim))
            for sym in g.symbols
        }

    def predict(self, symbol: str, f: ContextFeatures, z) -> dict:
        if z is None:
            raise ModelError("the latent model requires a latent vector")
        alts = self.vocab.alternatives(symbol)
        phi = np.concatenate([
            feature_vector(f, self.vocab, self.attribute_blind), np.asarray(z)])
        logits = self.weights[symbol] @ phi
        probs = _softmax(logits)
        return {a: float(p) for a, p in zip(alts, probs)}


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


@dataclass
class _Group:
    """One evidence set: its raw per-item hash vectors, grouped by kind."""

    items: list  # (kind index, kind, raw hash vector)

    def count_by_kind(self) -> np.ndarray:
        n = np.zeros(len(EVIDENCE_KINDS))
        for j, _, _ in self.items:
            n[j] += 1
        return n


@dataclass
class _Site:
    symbol: str
    y: int
    phi: np.ndarray
    group: int


@dataclass
class Prepared:
    sites: list
    groups: list


def prepare_examples(examples, vocab: Vocabulary, encoder: EncoderParams,
                     attribute_blind: bool = False) -> Prepared:
    groups = []
    group_of = {}
    sites = []
    for ex in examples:
        ev = ex.evidence if ex.evidence is not None else EvidenceSet()
        gid = group_of.get(ev)
        if gid is None:
            gid = len(groups)
            group_of[ev] = gid
            groups.append(_Group(items=[
                (j, kind, hash_bag(item, kind, encoder))
                for j, kind, item in ev.all_items()
            ]))
        alts = vocab.alternatives(ex.symbol)
        try:
            y = alts.index(ex.choice)
        except ValueError:
            raise ModelError(
                f"choice {ex.choice!r} not among alternatives of {ex.symbol}")
        phi = feature_vector(ex.features, vocab, attribute_blind)
        sites.append(_Site(ex.symbol, y, phi, gid))
    return Prepared(sites=sites, groups=groups)


def _group_posterior(model: LatentModel, group: _Group):
    """Posterior mean/std plus intermediates needed by the gradients."""
    enc = model.encoder
    tau = 1.0 / enc.sigma2
    n = group.count_by_kind()
    D = 1.0 + float(np.dot(n, tau))
    mapped_sums = {}  # kind index -> sum of mapped item vectors
    raw_sums = {}  # kind index -> sum of raw item vectors
    S = np.zeros(enc.dim)
    for j, kind, h in group.items:
        m = enc.map_for(kind)
        mapped = h if m is None else m @ h
        mapped_sums[j] = mapped_sums.get(j, 0) + mapped
        raw_sums[j] = raw_sums.get(j, 0) + h
        S = S + tau[j] * mapped
    mu = S / D
    return mu, D, S, tau, n, mapped_sums, raw_sums


def latent_objective(model: LatentModel, prepared: Prepared, noise) -> float:
    """Mean per-site log-likelihood of the observed choices under fixed
    noise draws; noise maps (group index, sample index) -> vector."""
    samples = sorted({s for _, s in noise})
    zs = {}
    for gi, group in enumerate(prepared.groups):
        mu, D, *_ = _group_posterior(model, group)
        sd = D ** -0.5
        for s in samples:
            zs[(gi, s)] = mu + sd * noise[(gi, s)]
    total = 0.0
    for site in prepared.sites:
        for s in samples:
            x = np.concatenate([site.phi, zs[(site.group, s)]])
            logits = model.weights[site.symbol] @ x
            total += float(logits[site.y] - _logsumexp(logits))
    return total / (len(prepared.sites) * len(samples))


def _logsumexp(v: np.ndarray) -> float:
    m = float(np.max(v))
    return m + math.log(float(np.sum(np.exp(v - m))))


def latent_gradients(model: LatentModel, prepared: Prepared, noise):
    """Analytic gradients of latent_objective with the same fixed noise.

    Returns (objective, weight grads by symbol, map grads by kind,
    grad of log sigma^2 as a 7-vector).  The latent vector is
    z = mu + D^{-1/2} V with mu = S / D, S = sum_j tau_j L_j sum_k h_jk and
    D = 1 + sum_j n_j tau_j, tau_j = exp(-u_j); differentiating:

        dmu/du_j    = tau_j (n_j S / D - L_j H_j) / D      (H_j = sum_k h_jk)
        d(sd)/du_j  = n_j tau_j D^{-3/2} / 2
        dz/dL_j     = (tau_j / D) outer(gz, H_j)           (per gz row)
    """

    enc = model.encoder
    samples = sorted({s for _, s in noise})
    n_terms = len(prepared.sites) * len(samples)
    scale = 1.0 / n_terms

    ginfo = []
    zs = {}
    for gi, group in enumerate(prepared.groups):
        mu, D, S, tau, n, mapped_sums, raw_sums = _group_posterior(model, group)
        ginfo.append((mu, D, S, tau, n, mapped_sums, raw_sums))
        sd = D ** -0.5
        for s in samples:
            zs[(gi, s)] = mu + sd * noise[(gi, s)]

    gW = {sym: np.zeros_like(w) for sym, w in model.weights.items()}
    gz_acc = {key: np.zeros(model.dim) for key in zs}
    total = 0.0
    for site in prepared.sites:
        W = model.weights[site.symbol]
        for s in samples:
            z = zs[(site.group, s)]
            x = np.concatenate([site.phi, z])
            logits = W @ x
            p = _softmax(logits)
            total += float(logits[site.y] - _logsumexp(logits))
            delta = -p
            delta[site.y] += 1.0
            gW[site.symbol] += scale * np.outer(delta, x)
            gz_acc[(site.group, s)] += scale * (W[:, model.fdim:].T @ delta)

    gmaps = {kind: np.zeros((enc.dim, enc.dim)) for kind in enc.maps}
    gu = np.zeros(len(EVIDENCE_KINDS))
    for gi, group in enumerate(prepared.groups):
        mu, D, S, tau, n, mapped_sums, raw_sums = ginfo[gi]
        for s in samples:
            gz = gz_acc[(gi, s)]
            if not np.any(gz):
                continue
            V = noise[(gi, s)]
            for j in mapped_sums:
                kind = EVIDENCE_KINDS[j]
                if kind in gmaps:
                    gmaps[kind] += (tau[j] / D) * np.outer(gz, raw_sums[j])
                dmu = tau[j] * (n[j] * S / D - mapped_sums[j]) / D
                dsd = 0.5 * n[j] * tau[j] * D ** -1.5
                gu[j] += float(gz @ (dmu + dsd * V))
    return total / n_terms, gW, gmaps, gu


def train_latent(examples, hyper: LatentHyper, vocab: Vocabulary,
                 attribute_blind: bool = False):
    """Gradient-ascent training; returns (model, encoder params, loss trace)."""
    encoder = EncoderParams(
        dim=hyper.dim,
        maps={kind: np.eye(hyper.dim) for kind in EVIDENCE_KINDS} if hyper.train_encoders else {},
    )
    model = LatentModel(vocab, encoder, attribute_blind=attribute_blind)
    prepared = prepare_examples(examples, vocab, encoder, attribute_blind)
    rng = Xoshiro256StarStar(hyper.seed)
    trace = []
    u = np.log(encoder.sigma2)
    for step in range(hyper.steps):
        noise = {
            (gi, s): np.array(rng.normals(hyper.dim))
            for gi in range(len(prepared.groups))
            for s in range(hyper.mc_samples)
        }
        loss, gW, gmaps, gu = latent_gradients(model, prepared, noise)
        if not math.isfinite(loss):
            raise TrainingDiverged(step, loss)
        trace.append(loss)
        for sym in gW:
            model.weights[sym] += hyper.lr * gW[sym]
        if hyper.train_encoders:
            for kind in gmaps:
                encoder.maps[kind] += hyper.lr * gmaps[kind]
            u = u + hyper.lr * gu
            encoder.sigma2 = np.exp(u)
    return model, encoder, trace


def save_latent_model(model: LatentModel, path) -> None:
    v = model.vocab
    meta = {
        "format": "nag-latent-model v1",
        "dim": model.dim,
        "attribute_blind": model.attribute_blind,
        "hash_seed": model.encoder.seed,
        "namespaces": [v.namespaces.formals, v.namespaces.fields, v.namespaces.locals],
        "types": list(v.types),
        "apis": list(v.apis),
        "rules": list(v.rules),
    }
    arrays = {"sigma2": model.encoder.sigma2}
    for sym, w in model.weights.items():
        arrays[f"W::{sym}"] = w
    for kind, m in model.encoder.maps.items():
        arrays[f"M::{kind}"] = m
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_latent_model(path) -> LatentModel:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(bytes(data["meta"]).decode())
    if meta.get("format") != "nag-latent-model v1":
        raise ModelError("not a latent model file")
    ns = Namespaces(*meta["namespaces"])
    vocab = Vocabulary(
        types=tuple(meta["types"]), apis=tuple(meta["apis"]),
        var_slots=_slots(ns), rules=tuple(meta["rules"]), namespaces=ns,
    )
    encoder = EncoderParams(
        dim=meta["dim"], seed=meta["hash_seed"], sigma2=data["sigma2"],
        maps={k.split("::", 1)[1]: data[k] for k in data.files if k.startswith("M::")},
    )
    model = LatentModel(vocab, encoder, attribute_blind=meta["attribute_blind"])
    for key in data.files:
        if key.startswith("W::"):
            model.weights[key.split("::", 1)[1]] = data[key]
    return model


# ---------------------------------------------------------------------------
# next-token evaluation
# ---------------------------------------------------------------------------

_ACCESS_ROLES = {("b3", 0), ("b3", 1), ("b6a", 0), ("b7", 0)}

CATEGORIES = ("apiCalls", "objectInit", "types", "variableAccess", "allTerminals")


def site_category(symbol: str, parent_rule: Optional[str], position: int) -> Optional[str]:
    if symbol == "Api":
        return "apiCalls"
    if symbol == "Type":
        return "objectInit" if (parent_rule == "b2" and position == 2) else "types"
    if symbol == "Var":
        return "variableAccess" if (parent_rule, position) in _ACCESS_ROLES else None
    return None


def next_token_eval(model, corpus_sites) -> dict:
    """Per-category argmax accuracy at every terminal-vocabulary site.

    corpus_sites yields objects with symbol / choice / features / evidence;
    the latent model conditions on each method's posterior-mean vector.
    """
    results = {c: [0, 0] for c in CATEGORIES}
    z_cache = {}

    def z_for(ev):
        if not isinstance(model, LatentModel):
            return None
        key = ev if ev is not None else EvidenceSet()
        if key not in z_cache:
            enc = [(j, _encode(model.encoder, kind, item))
                   for j, kind, item in key.all_items()]
            z_cache[key] = posterior(enc, model.encoder).mean
        return z_cache[key]

    for ex in corpus_sites:
        if ex.symbol not in ("Api", "Type", "Var"):
            continue
        f = ex.features
        cat = site_category(ex.symbol, f.parent_rule_id, f.position_in_rhs)
        dist = model.predict(ex.symbol, f, z_for(ex.evidence))
        best = max(sorted(dist), key=lambda a: dist[a])
        hit = int(best == ex.choice)
        if cat is not None:
            results[cat][0] += hit
            results[cat][1] += 1
        results["allTerminals"][0] += hit
        results["allTerminals"][1] += 1
    return {
        c: {"correct": hits, "total": total,
            "accuracy": hits / total if total else None}
        for c, (hits, total) in results.items()
    }


def _encode(encoder: EncoderParams, kind: str, item) -> np.ndarray:
    vec = hash_bag(item, kind, encoder)
    m = encoder.map_for(kind)
    return vec if m is None else m @ vec
