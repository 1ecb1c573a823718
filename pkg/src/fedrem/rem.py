"""Radio environment map storage: (location, channel) -> mixture + sample count.

The same :class:`RemStore` type serves as a platoon's local map and as the
global map.  Stores persist as a single JSON document::

    {"schema_version": 1, "role": "local", "owner": "3",
     "entries": [{"location": 0, "channel": 2, "J": 7, "sigma": ...,
                  "means": [...], "weights": [...], "n_r": 4096}, ...]}

Floats are written with Python's shortest round-trip repr, so a load after
a save reproduces every parameter bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .gmm import GmmParams

__all__ = ["RemEntry", "RemStore", "RemFormatError", "RemVersionError", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


class RemFormatError(ValueError):
    """A REM file could not be parsed."""


class RemVersionError(RemFormatError):
    """A REM file was written with an unsupported schema version."""


@dataclass(frozen=True)
class RemEntry:
    model: GmmParams
    n_samples_Nr: int = 0

    def __post_init__(self):
        if not isinstance(self.model, GmmParams):
            raise TypeError("model must be GmmParams")
        if int(self.n_samples_Nr) != self.n_samples_Nr or self.n_samples_Nr < 0:
            raise ValueError(f"n_samples_Nr must be a non-negative integer, got {self.n_samples_Nr!r}")
        object.__setattr__(self, "n_samples_Nr", int(self.n_samples_Nr))


class RemStore:
    """Mutable map from ``(location, channel)`` to :class:`RemEntry`.

    Entries are immutable values, so a shallow :meth:`copy` is a safe
    snapshot.  A missing key means "nothing known yet" and is distinct from
    an entry with ``n_samples_Nr == 0``.
    """

    def __init__(self, role: str = "local", owner: str = "0", entries=None):
        self.role = role
        self.owner = str(owner)
        self._entries: dict[tuple[int, int], RemEntry] = {}
        for key, entry in dict(entries or {}).items():
            self.put(key[0], key[1], entry)

    def get(self, location: int, channel: int) -> RemEntry | None:
        return self._entries.get((int(location), int(channel)))

    def put(self, location: int, channel: int, entry: RemEntry) -> None:
        if not isinstance(entry, RemEntry):
            raise ValueError("entry must be a RemEntry")
        self._entries[(int(location), int(channel))] = entry

    def __contains__(self, key) -> bool:
        return tuple(key) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries))

    def items(self):
        return [(k, self._entries[k]) for k in sorted(self._entries)]

    def keys(self):
        return sorted(self._entries)

    def copy(self, role: str | None = None, owner: str | None = None) -> "RemStore":
        out = RemStore(role or self.role, self.owner if owner is None else owner)
        out._entries = dict(self._entries)
        return out

    def __eq__(self, other):
        if not isinstance(other, RemStore):
            return NotImplemented
        return self.role == other.role and self.owner == other.owner and self._entries == other._entries

    def same_entries(self, other: "RemStore") -> bool:
        """Entry-wise equality, ignoring role and owner."""
        return self._entries == other._entries

    def __repr__(self):
        return f"RemStore(role={self.role!r}, owner={self.owner!r}, entries={len(self)})"

    # persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "role": self.role,
            "owner": self.owner,
            "entries": [
                {"location": loc, "channel": ch, **entry.model.to_dict(), "n_r": entry.n_samples_Nr}
                for (loc, ch), entry in self.items()
            ],
        }

    def save(self, path) -> None:
        """Write atomically: a temp file in the same directory is renamed into place."""
        path = Path(path)
        text = json.dumps(self.to_dict(), indent=1)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            # mkstemp creates 0600; give the file the usual umask permissions
            umask = os.umask(0)
            os.umask(umask)
            os.chmod(tmp, 0o666 & ~umask)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<dict>") -> "RemStore":
        if not isinstance(doc, dict):
            raise RemFormatError(f"{source}: top level must be an object")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise RemVersionError(f"{source}: schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
        store = cls(doc.get("role", "local"), doc.get("owner", "0"))
        for i, item in enumerate(doc.get("entries", [])):
            try:
                model = GmmParams.from_dict(item)
                entry = RemEntry(model, item["n_r"])
                key = (int(item["location"]), int(item["channel"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise RemFormatError(f"{source}: entry {i} is invalid: {exc}") from exc
            if key in store:
                raise RemFormatError(f"{source}: entry {i} duplicates key {key}")
            store.put(*key, entry)
        return store

    @classmethod
    def load(cls, path) -> "RemStore":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise RemFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(doc, str(path))

    def to_csv(self, path) -> None:
        """One row per entry; means and weights flattened into numbered columns."""
        j_max = max((e.model.J for _, e in self.items()), default=0)
        header = ["location", "channel", "J", "sigma", "n_r"]
        header += [f"mean_{j}" for j in range(j_max)] + [f"weight_{j}" for j in range(j_max)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for (loc, ch), e in self.items():
                pad = [""] * (j_max - e.model.J)
                w.writerow(
                    [loc, ch, e.model.J, repr(e.model.sigma), e.n_samples_Nr]
                    + [repr(float(v)) for v in e.model.means]
                    + pad
                    + [repr(float(v)) for v in e.model.weights]
                    + pad
                )
