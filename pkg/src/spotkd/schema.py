"""Fine-label vocabulary: exclusive groups, gate rules, and event tokens.

A :class:`LabelSchema` partitions the ``C`` fine-label indices into three
buckets:

* unconditional groups — exactly one index active per group,
* conditional groups  — one index active when the gate condition
  ``vector[gate_index] != gate_value`` holds, all zero otherwise,
* independent binaries — free 0/1 indices.

Hard label vectors that satisfy all constraints form the event vocabulary;
each distinct valid vector is one event token used by sequence metrics.

Schema file grammar (one directive per line, ``#`` comments allowed)::

    class <name>                         # one per class, order defines index
    group <i> <j> ...                    # unconditional exclusive group
    group <i> <j> ... if <g> != <v>      # active only when index g != v
    binary <i>                           # independent 0/1 label
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from spotkd.exceptions import DataError, SchemaError


@dataclass(frozen=True)
class ConditionalGroup:
    """Exclusive group that only applies when ``vector[gate_index] != gate_value``."""

    gate_index: int
    gate_value: int
    indices: tuple[int, ...]


@dataclass(frozen=True)
class LabelSchema:
    class_names: tuple[str, ...]
    groups: tuple[tuple[int, ...], ...] = ()
    conditional_groups: tuple[ConditionalGroup, ...] = ()
    independent_binary: tuple[int, ...] = ()

    def __post_init__(self):
        c = len(self.class_names)
        if c == 0:
            raise SchemaError("schema needs at least one class")
        seen: dict[int, str] = {}

        def claim(idx, bucket):
            if not 0 <= idx < c:
                raise SchemaError(f"index {idx} out of range for C={c}")
            if idx in seen:
                raise SchemaError(f"index {idx} appears in both {seen[idx]} and {bucket}")
            seen[idx] = bucket

        for g in self.groups:
            if len(g) < 2:
                raise SchemaError(f"group {g} needs at least two indices")
            for i in g:
                claim(i, "groups")
        for cg in self.conditional_groups:
            if len(cg.indices) < 2:
                raise SchemaError(f"conditional group {cg.indices} needs at least two indices")
            if not 0 <= cg.gate_index < c:
                raise SchemaError(f"gate index {cg.gate_index} out of range")
            for i in cg.indices:
                claim(i, "conditional_groups")
            if cg.gate_index in cg.indices:
                raise SchemaError("a conditional group cannot gate on its own indices")
        for i in self.independent_binary:
            claim(i, "independent_binary")
        if len(seen) != c:
            missing = sorted(set(range(c)) - set(seen))
            raise SchemaError(f"indices {missing} belong to no group")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def num_groups(self) -> int:
        """Group count used by confidence averaging (binaries count as groups)."""
        return len(self.groups) + len(self.conditional_groups) + len(self.independent_binary)

    def event_name(self, vector) -> str:
        """Readable token for a hard vector: '+'-joined active class names."""
        active = [self.class_names[i] for i, v in enumerate(vector) if v == 1]
        return "+".join(active) if active else "<none>"


def _as_hard(vector, schema: LabelSchema) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    if v.shape != (schema.num_classes,):
        raise SchemaError(
            f"vector length {v.shape} does not match schema C={schema.num_classes}"
        )
    if not np.all((v == 0.0) | (v == 1.0)):
        raise SchemaError("hard vector entries must be exactly 0 or 1")
    return v


def validate_hard_vector(vector, schema: LabelSchema) -> bool:
    """True iff a hard 0/1 vector satisfies every group and gate constraint."""
    v = _as_hard(vector, schema)
    for g in schema.groups:
        if sum(v[i] for i in g) != 1:
            return False
    for cg in schema.conditional_groups:
        total = sum(v[i] for i in cg.indices)
        if v[cg.gate_index] != cg.gate_value:
            if total != 1:
                return False
        elif total != 0:
            return False
    return True


@lru_cache(maxsize=32)
def event_vocab(schema: LabelSchema) -> tuple[tuple[int, ...], ...]:
    """All schema-valid hard vectors, sorted lexicographically.

    The enumeration walks the product of per-group choices (each conditional
    group may also be fully inactive) and keeps the combinations whose gate
    conditions come out consistent.
    """
    c = schema.num_classes
    group_options = []
    for g in schema.groups:
        group_options.append([(i,) for i in g])
    for cg in schema.conditional_groups:
        group_options.append([()] + [(i,) for i in cg.indices])
    for b in schema.independent_binary:
        group_options.append([(), (b,)])

    vocab = []
    for combo in product(*group_options):
        v = np.zeros(c)
        for choice in combo:
            for i in choice:
                v[i] = 1.0
        if validate_hard_vector(v, schema):
            vocab.append(tuple(int(x) for x in v))
    return tuple(sorted(vocab))


@lru_cache(maxsize=32)
def vocab_index(schema: LabelSchema) -> dict[tuple[int, ...], int]:
    """Vector-bits -> vocabulary index; inverse of :func:`event_vocab`."""
    return {v: i for i, v in enumerate(event_vocab(schema))}


def vector_to_class_id(vector, schema: LabelSchema) -> int:
    bits = tuple(int(x) for x in np.asarray(vector))
    idx = vocab_index(schema).get(bits)
    if idx is None:
        raise SchemaError(f"vector {bits} is not schema-valid")
    return idx


@dataclass(frozen=True)
class EventSequence:
    """Ordered ``(class_id, timestamp)`` pairs with strictly increasing timestamps."""

    events: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        ts = [t for _, t in self.events]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DataError(f"event timestamps must be strictly increasing, got {ts}")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.events)

    @property
    def timestamps(self) -> tuple[int, ...]:
        return tuple(t for _, t in self.events)


def tennis_schema() -> LabelSchema:
    """Default 14-class tennis schema: positioning, shot category, side,
    technique (both gated off when the shot is a serve), and approach flag."""
    return LabelSchema(
        class_names=(
            "near", "far",
            "serve", "return", "stroke",
            "fh", "bh",
            "gs", "slice", "volley", "smash", "drop", "lob",
            "approach",
        ),
        groups=((0, 1), (2, 3, 4)),
        conditional_groups=(
            ConditionalGroup(gate_index=2, gate_value=1, indices=(5, 6)),
            ConditionalGroup(gate_index=2, gate_value=1, indices=(7, 8, 9, 10, 11, 12)),
        ),
        independent_binary=(13,),
    )


# ---------------------------------------------------------------------------
# Schema file parsing / formatting
# ---------------------------------------------------------------------------

def parse_schema(text: str) -> LabelSchema:
    """Parse the schema file grammar documented in the module docstring."""
    class_names: list[str] = []
    groups: list[tuple[int, ...]] = []
    conditionals: list[ConditionalGroup] = []
    binaries: list[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "class":
                if len(tokens) != 2:
                    raise SchemaError("class takes exactly one name")
                class_names.append(tokens[1])
            elif kind == "group":
                if "if" in tokens:
                    at = tokens.index("if")
                    idxs = tuple(int(t) for t in tokens[1:at])
                    cond = tokens[at + 1:]
                    if len(cond) != 3 or cond[1] != "!=":
                        raise SchemaError("condition must read 'if <idx> != <val>'")
                    conditionals.append(
                        ConditionalGroup(int(cond[0]), int(cond[2]), idxs)
                    )
                else:
                    groups.append(tuple(int(t) for t in tokens[1:]))
            elif kind == "binary":
                if len(tokens) != 2:
                    raise SchemaError("binary takes exactly one index")
                binaries.append(int(tokens[1]))
            else:
                raise SchemaError(f"unknown directive {kind!r}")
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc

    return LabelSchema(
        class_names=tuple(class_names),
        groups=tuple(groups),
        conditional_groups=tuple(conditionals),
        independent_binary=tuple(binaries),
    )


def format_schema(schema: LabelSchema) -> str:
    lines = [f"class {name}" for name in schema.class_names]
    for g in schema.groups:
        lines.append("group " + " ".join(str(i) for i in g))
    for cg in schema.conditional_groups:
        idxs = " ".join(str(i) for i in cg.indices)
        lines.append(f"group {idxs} if {cg.gate_index} != {cg.gate_value}")
    for b in schema.independent_binary:
        lines.append(f"binary {b}")
    return "\n".join(lines) + "\n"


def load_schema(path) -> LabelSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_schema(fh.read())


def save_schema(path, schema: LabelSchema) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_schema(schema))


def schema_hash(schema: LabelSchema) -> str:
    """Stable digest of the schema content, recorded in checkpoints."""
    return hashlib.sha256(format_schema(schema).encode("utf-8")).hexdigest()
