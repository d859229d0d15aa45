"""Reading set files and persisting an indexed collection as JSON."""
from __future__ import annotations

import json
import warnings
from pathlib import Path

from .core import Collection, ParseError
from .index import InvertedIndex, build_inverted_index
from .similarity import SimilarityProvider, make_provider

FORMAT_VERSION = 1


def is_numeric(tok: str) -> bool:
    try:
        float(tok.replace(",", ""))
    except ValueError:
        return False
    return True


def parse_line(line: str, delimiter: str = "\t", drop_numeric: bool = False) -> list[str]:
    toks = [t.strip() for t in line.rstrip("\r\n").split(delimiter)]
    toks = [t for t in toks if t]
    if drop_numeric:
        toks = [t for t in toks if not is_numeric(t)]
    return list(dict.fromkeys(toks))


def read_sets(path, delimiter: str = "\t", drop_numeric: bool = False) -> list[list[str]]:
    """One set per line; blank lines are skipped with a warning."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if "\x00" in line:
                raise ParseError("NUL byte in set file", lineno)
            toks = parse_line(line, delimiter, drop_numeric)
            if not toks:
                warnings.warn(f"{path}:{lineno}: empty set skipped", stacklevel=2)
                continue
            out.append(toks)
    return out


class Bundle:
    def __init__(self, collection: Collection, provider_config: dict, meta: dict | None = None):
        self.collection = collection
        self.provider_config = dict(provider_config)
        self.meta = dict(meta or {})

    @property
    def index(self) -> InvertedIndex:
        idx = self.collection._cache.get("index")
        if idx is None:
            idx = self.collection._cache["index"] = build_inverted_index(self.collection)
        return idx

    def provider(self, **override) -> SimilarityProvider:
        cfg = {**self.provider_config, **{k: v for k, v in override.items() if v is not None}}
        return make_provider(cfg.get("name", "exact"), embeddings=cfg.get("embeddings"),
                             q=int(cfg.get("q", 3)), table=cfg.get("table"))

    def to_json(self) -> dict:
        c = self.collection
        return {
            "format_version": FORMAT_VERSION,
            "provider": self.provider_config,
            "meta": self.meta,
            "dictionary": c.dictionary,
            "sets": [list(s.elements) for s in c.sets],
            "postings": {str(t): v for t, v in self.index.to_dict().items()},
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Bundle":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path} is not an index bundle: {exc}") from None
        if not isinstance(data, dict) or data.get("format_version") != FORMAT_VERSION:
            got = data.get("format_version") if isinstance(data, dict) else None
            raise ParseError(f"{path}: bundle format version {got!r}, expected {FORMAT_VERSION}")
        try:
            coll = Collection.from_encoded(data["dictionary"], data["sets"])
            postings = {int(t): list(v) for t, v in data["postings"].items()}
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"{path}: malformed bundle: {exc}") from None
        coll._cache["index"] = InvertedIndex(postings)
        return cls(coll, data.get("provider", {"name": "exact"}), data.get("meta"))


def ingest(input_path, *, delimiter: str = "\t", drop_numeric: bool = False,
           provider_config: dict | None = None) -> Bundle:
    sets = read_sets(input_path, delimiter, drop_numeric)
    coll = Collection.from_token_sets(sets)
    meta = {"source": str(input_path), "delimiter": delimiter, "drop_numeric": drop_numeric}
    return Bundle(coll, provider_config or {"name": "exact"}, meta)
