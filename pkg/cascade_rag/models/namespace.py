"""NamespaceLabel and NamespaceSet models."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ..exceptions import UnknownNamespaceError


def _normalize(name: str) -> str:
    return " ".join(name.split())


@dataclass(frozen=True, eq=False)
class NamespaceLabel:
    """A namespace name. Equality and hashing are case-insensitive."""
    name: str
    key: str = field(init=False, repr=False)

    def __post_init__(self) -> None:
        name = _normalize(self.name)
        if not name:
            raise ValueError("namespace label must be non-empty")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "key", name.casefold())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, NamespaceLabel):
            return self.key == other.key
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return self.name


class NamespaceSet:
    """The configured, ordered set of namespaces.

    Labels are resolved case-insensitively to their configured spelling, so
    ``resolve("finance & business")`` gives ``Finance & Business``.
    """

    def __init__(self, names: Iterable[str | NamespaceLabel]) -> None:
        self._labels: tuple[NamespaceLabel, ...] = tuple(
            n if isinstance(n, NamespaceLabel) else NamespaceLabel(n) for n in names
        )
        self._by_key = {label.key: label for label in self._labels}

    @property
    def labels(self) -> tuple[NamespaceLabel, ...]:
        return self._labels

    @property
    def has_duplicates(self) -> bool:
        return len(self._by_key) != len(self._labels)

    def find(self, name: str) -> NamespaceLabel | None:
        """Return the configured label matching *name*, or ``None``."""
        normalized = _normalize(name)
        if not normalized:
            return None
        return self._by_key.get(normalized.casefold())

    def resolve(self, name: str | NamespaceLabel) -> NamespaceLabel:
        """Return the configured label for *name*, raising if it is not a member."""
        label = self.find(name.name if isinstance(name, NamespaceLabel) else name)
        if label is None:
            raise UnknownNamespaceError(str(name))
        return label

    def __contains__(self, item: object) -> bool:
        if isinstance(item, NamespaceLabel):
            return item.key in self._by_key
        if isinstance(item, str):
            return self.find(item) is not None
        return False

    def __iter__(self) -> Iterator[NamespaceLabel]:
        return iter(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __repr__(self) -> str:
        return f"NamespaceSet({[label.name for label in self._labels]!r})"
