"""Evidence sets, their encoders, and the Gaussian posterior over the
latent intent vector.

Evidence about the surrounding class comes in seven kinds; each kind holds
zero or more items and each item is a bag of string tokens.  An item is
encoded as a hashed bag-of-tokens vector (optionally passed through a
trainable per-kind linear map).  Assuming a standard Normal prior on the
latent vector and each encoded item drawn from a Normal centered on it with
per-kind variance sigma_j^2, the posterior is the closed-form Normal

    mean = (sum_jk sigma_j^-2 f_j(x_jk)) / (1 + sum_j |X_j| sigma_j^-2)
    var  = 1 / (1 + sum_j |X_j| sigma_j^-2)   (isotropic)

With no evidence it reduces to the prior N(0, I), and the variance strictly
decreases as items are added.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

EVIDENCE_KINDS = (
    "classNameKeywords",
    "fieldTypes",
    "surroundingMethodHeaders",
    "methodNameKeywords",
    "formalParamTypes",
    "returnType",
    "javadocKeywords",
)

HASH_SEED = 0x5EED  # fixed and recorded in model files

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_DELIMS = re.compile(r"[^0-9A-Za-z]+")


def split_identifier(name: str) -> tuple:
    """Split an identifier on camel case and delimiters, lowercased."""
    parts = []
    for chunk in _DELIMS.split(name):
        if not chunk:
            continue
        parts.extend(p.lower() for p in _CAMEL.split(chunk) if p)
    return tuple(parts)


@dataclass(frozen=True)
class EvidenceSet:
    """Per kind, a multiset of items; each item is a token bag."""

    items: dict = field(default_factory=dict)  # kind -> tuple of token tuples

    def __post_init__(self) -> None:
        for kind in self.items:
            if kind not in EVIDENCE_KINDS:
                raise ValueError(f"unknown evidence kind {kind!r}")

    def of(self, kind: str) -> tuple:
        return self.items.get(kind, ())

    def total_items(self) -> int:
        return sum(len(v) for v in self.items.values())

    def all_items(self):
        """Yield (kind index, kind, item) in canonical kind order."""
        for j, kind in enumerate(EVIDENCE_KINDS):
            for item in self.of(kind):
                yield j, kind, item

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvidenceSet):
            return NotImplemented
        return all(self.of(k) == other.of(k) for k in EVIDENCE_KINDS)

    def __hash__(self) -> int:
        return hash(tuple(self.of(k) for k in EVIDENCE_KINDS))


EMPTY_EVIDENCE = EvidenceSet()


def evidence(**kinds) -> EvidenceSet:
    """Convenience constructor; values are iterables of token iterables."""
    items = {}
    for kind, vals in kinds.items():
        items[kind] = tuple(tuple(item) for item in vals)
    return EvidenceSet(items)


# --- text format: one record per method, kind<TAB>tok tok ... lines,
# --- records separated by blank lines

def format_evidence(x: EvidenceSet) -> str:
    lines = []
    for _, kind, item in x.all_items():
        lines.append(f"{kind}\t{' '.join(item)}")
    return "\n".join(lines)


def parse_evidence_records(text: str) -> list:
    records = []
    current: dict = {}

    def flush():
        if current:
            records.append(EvidenceSet({k: tuple(v) for k, v in current.items()}))
            current.clear()

    for raw in text.splitlines():
        line = raw.rstrip()
        if not line:
            flush()
            continue
        if line.startswith("#"):
            continue
        kind, _, toks = line.partition("\t")
        if kind not in EVIDENCE_KINDS:
            raise ValueError(f"unknown evidence kind {kind!r}")
        current.setdefault(kind, []).append(tuple(toks.split()))
    flush()
    return records


def parse_evidence(text: str) -> EvidenceSet:
    records = parse_evidence_records(text)
    if len(records) != 1:
        raise ValueError(f"expected one evidence record, found {len(records)}")
    return records[0]


# --- encoders ---------------------------------------------------------------


@dataclass
class EncoderParams:
    """Per-kind token-hashing encoders with optional trainable linear maps
    and per-kind variances."""

    dim: int = 32
    seed: int = HASH_SEED
    sigma2: np.ndarray = None  # shape (7,)
    maps: dict = field(default_factory=dict)  # kind -> (dim, dim) array

    def __post_init__(self) -> None:
        if self.sigma2 is None:
            self.sigma2 = np.ones(len(EVIDENCE_KINDS))
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        if self.sigma2.shape != (len(EVIDENCE_KINDS),):
            raise ValueError("sigma2 must have one entry per evidence kind")
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 entries must be positive")

    def map_for(self, kind: str) -> Optional[np.ndarray]:
        return self.maps.get(kind)


def _token_bucket(seed: int, kind: str, token: str, dim: int) -> tuple:
    digest = hashlib.blake2b(
        f"{seed}:{kind}:{token}".encode("utf-8"), digest_size=8
    ).digest()
    value = int.from_bytes(digest, "big")
    return value % dim, 1.0 if (value >> 63) & 1 else -1.0


def hash_bag(tokens: Iterable[str], kind: str, p: EncoderParams) -> np.ndarray:
    vec = np.zeros(p.dim)
    for token in tokens:
        idx, sign = _token_bucket(p.seed, kind, token, p.dim)
        vec[idx] += sign
    return vec


def encode_item(kind: str, item, p: EncoderParams) -> np.ndarray:
    vec = hash_bag(item, kind, p)
    m = p.map_for(kind)
    return vec if m is None else m @ vec


def encode_evidence(x: EvidenceSet, p: EncoderParams) -> list:
    """One (kind index, vector) pair per evidence item, in kind order."""
    return [(j, encode_item(kind, item, p)) for j, kind, item in x.all_items()]


@dataclass(frozen=True)
class LatentPosterior:
    mean: np.ndarray
    variance: float  # isotropic

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def posterior(encoded, p: EncoderParams) -> LatentPosterior:
    """Closed-form Normal posterior from encoded evidence items."""
    if np.any(p.sigma2 <= 0):
        raise ValueError("sigma2 entries must be positive")
    inv = 1.0 / p.sigma2
    num = np.zeros(p.dim)
    denom = 1.0
    for j, vec in encoded:
        num = num + inv[j] * vec
        denom += inv[j]
    return LatentPosterior(mean=num / denom, variance=1.0 / denom)


def posterior_of(x: EvidenceSet, p: EncoderParams) -> LatentPosterior:
    return posterior(encode_evidence(x, p), p)
