"""Input side of the exporter: review records, aspect seeds, the word rule.

The word rule is deliberately reimplemented here rather than imported from
the engine: the two components share file formats, not code. It must stay
in lockstep with the engine's tokenizer (lowercase, punctuation to spaces,
whitespace split) or the per-word rows stop lining up with engine tokens.
"""

import json


def split_words(text: str) -> list[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace."""
    cleaned = "".join(c if c.isalnum() else " " for c in text.lower())
    return cleaned.split()


def read_reviews(path) -> list[tuple[str, str]]:
    """(id, text) pairs from a JSON-lines review file, in file order.

    Only id and text matter for embedding export; ratings and annotations
    ride along for the engine and are not validated here beyond JSON
    well-formedness.
    """
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed record at line {lineno}: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"record is not an object at line {lineno}")
            rid, text = obj.get("id"), obj.get("text")
            if not isinstance(rid, str) or not rid:
                raise ValueError(f"missing or invalid id at line {lineno}")
            if not isinstance(text, str):
                raise ValueError(f"missing or invalid text at line {lineno}")
            if rid in seen:
                raise ValueError(f"duplicate review id {rid!r} at line {lineno}")
            seen.add(rid)
            out.append((rid, text))
    return out


def read_schema(path) -> list[tuple[str, list[str]]]:
    """(aspect name, seed keywords) pairs from an aspect schema file."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    entries = obj.get("aspects") if isinstance(obj, dict) else None
    if not isinstance(entries, list) or not entries:
        raise ValueError("schema must be an object with a non-empty 'aspects' array")
    out = []
    seen = set()
    for item in entries:
        if not isinstance(item, dict):
            raise ValueError("malformed aspect entry in schema")
        name, seeds = item.get("name"), item.get("seeds")
        if not isinstance(name, str) or not name:
            raise ValueError("aspect entry without a name")
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, str) and s for s in seeds)):
            raise ValueError(f"aspect {name!r} needs a non-empty list of seed keywords")
        if name in seen:
            raise ValueError(f"duplicate aspect {name!r} in schema")
        seen.add(name)
        out.append((name, list(seeds)))
    return out
