"""API signature registry.

Serialized ASTs reference calls by name; the registry resolves names to full
signatures.  Constructors follow the naming convention "<Type>.<init>", which
is also how object initializations report themselves in the fidelity metrics.

File format, one entry per line, tab separated::

    name  receiverType|-  returnType  paramType,paramType,...|-  internal|external

Lines starting with '#' are comments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional


class RegistryError(Exception):
    pass


@dataclass(frozen=True)
class ApiSignature:
    name: str
    receiver_type: Optional[str]  # None for internal methods and statics
    return_type: str
    param_types: tuple[str, ...]
    is_internal: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise RegistryError("api name must be non-empty")
        if self.is_internal and self.receiver_type is not None:
            raise RegistryError(f"internal method {self.name} cannot have a receiver type")


CTOR_SUFFIX = ".<init>"


def ctor_name(type_name: str) -> str:
    return type_name + CTOR_SUFFIX


class ApiRegistry:
    def __init__(self, entries: Iterable[ApiSignature] = ()) -> None:
        self._by_name = {}
        for sig in entries:
            self.add(sig)

    def add(self, sig: ApiSignature) -> None:
        if sig.name in self._by_name:
            raise RegistryError(f"duplicate api entry {sig.name!r}")
        self._by_name[sig.name] = sig

    def resolve(self, name: str) -> ApiSignature:
        try:
            return self._by_name[name]
        except KeyError:
            raise RegistryError(f"unknown api {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)

    def names(self) -> list:
        return sorted(self._by_name)

    def constructor_params(self, type_name: str) -> tuple[str, ...]:
        """Parameter types of the registered constructor for a type; a type
        with no registered constructor takes no arguments."""
        sig = self._by_name.get(ctor_name(type_name))
        return sig.param_types if sig is not None else ()

    def type_names(self) -> list:
        """Every type mentioned anywhere in the registry, sorted."""
        seen = set()
        for sig in self._by_name.values():
            if sig.receiver_type:
                seen.add(sig.receiver_type)
            seen.add(sig.return_type)
            seen.update(sig.param_types)
            if sig.name.endswith(CTOR_SUFFIX):
                seen.add(sig.name[: -len(CTOR_SUFFIX)])
        return sorted(seen)


def _field(value: str) -> Optional[str]:
    return None if value == "-" else value


def parse_registry(text: str) -> ApiRegistry:
    reg = ApiRegistry()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise RegistryError(f"registry line {lineno}: expected 5 tab-separated fields")
        name, recv, ret, params, scope = parts
        if scope not in ("internal", "external"):
            raise RegistryError(f"registry line {lineno}: scope must be internal|external")
        param_types = () if params == "-" else tuple(params.split(","))
        reg.add(ApiSignature(
            name=name,
            receiver_type=_field(recv),
            return_type=ret,
            param_types=param_types,
            is_internal=scope == "internal",
        ))
    return reg


def format_registry(reg: ApiRegistry) -> str:
    lines = []
    for name in reg.names():
        sig = reg.resolve(name)
        params = ",".join(sig.param_types) if sig.param_types else "-"
        recv = sig.receiver_type if sig.receiver_type is not None else "-"
        scope = "internal" if sig.is_internal else "external"
        lines.append("\t".join([sig.name, recv, sig.return_type, params, scope]))
    return "\n".join(lines) + "\n"


def load_registry(path) -> ApiRegistry:
    return parse_registry(Path(path).read_text(encoding="utf-8"))


def save_registry(reg: ApiRegistry, path) -> None:
    Path(path).write_text(format_registry(reg), encoding="utf-8")
