"""Flat ``key = value`` text documents for MDPs, value tables and configs.

Reals are written with 17 significant digits, which round-trips every
binary64 value exactly.  Value-table documents end with a SHA-256
``content_hash`` over all preceding lines.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .exceptions import CorruptionError, FormatError
from .mdp import TabularMDP, ValueTable

VALUE_TABLE_FIELDS = ("num_states", "num_actions", "gamma", "q", "reward",
                      "certified_epsilon", "source")
MDP_FIELDS = ("num_states", "num_actions", "gamma", "transition", "reward")


def format_real(x: float) -> str:
    return format(float(x), ".17g")


def _format_reals(values) -> str:
    return " ".join(format_real(x) for x in np.ravel(values))


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in fields:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value.strip()
    return fields


def _require(fields: dict, names, path):
    missing = [n for n in names if n not in fields]
    if missing:
        raise FormatError(f"{path}: missing field(s) {', '.join(missing)}")


def _parse_matrix(text, shape, dtype, name, path):
    try:
        arr = np.array(text.split(), dtype=dtype)
    except ValueError as exc:
        raise FormatError(f"{path}: field {name!r} is not numeric") from exc
    if arr.size != shape[0] * shape[1]:
        raise FormatError(f"{path}: field {name!r} has {arr.size} entries, expected {shape}")
    return arr.reshape(shape)


def _parse_int(fields, name, path):
    try:
        return int(fields[name])
    except ValueError as exc:
        raise FormatError(f"{path}: field {name!r} is not an integer") from exc


def _parse_float(fields, name, path):
    try:
        return float(fields[name])
    except ValueError as exc:
        raise FormatError(f"{path}: field {name!r} is not a real") from exc


def _digest(body: str) -> str:
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def dump_value_table(table: ValueTable, mdp: TabularMDP) -> str:
    if table.shape != mdp.shape:
        raise FormatError(f"table shape {table.shape} does not match MDP {mdp.shape}")
    cert = "none" if table.certified_epsilon is None else format_real(table.certified_epsilon)
    lines = [
        "# inverse-bellman value table",
        f"num_states = {mdp.num_states}",
        f"num_actions = {mdp.num_actions}",
        f"gamma = {format_real(mdp.gamma)}",
        f"q = {_format_reals(table.q)}",
        f"reward = {_format_reals(mdp.reward)}",
        f"certified_epsilon = {cert}",
        f"source = {table.source}",
    ]
    body = "\n".join(lines) + "\n"
    return body + f"content_hash = {_digest(body)}\n"


def parse_value_table(text: str, path="<string>"):
    """Return ``(ValueTable, reward, gamma)`` from a value-table document."""
    body, sep, tail = text.rpartition("content_hash =")
    if not sep:
        raise FormatError(f"{path}: missing field(s) content_hash")
    if _digest(body) != tail.strip():
        raise CorruptionError(f"{path}: content hash mismatch")
    fields = parse_key_values(body)
    _require(fields, VALUE_TABLE_FIELDS, path)
    shape = (_parse_int(fields, "num_states", path), _parse_int(fields, "num_actions", path))
    q = _parse_matrix(fields["q"], shape, float, "q", path)
    reward = _parse_matrix(fields["reward"], shape, float, "reward", path)
    gamma = _parse_float(fields, "gamma", path)
    cert = None if fields["certified_epsilon"] == "none" else _parse_float(
        fields, "certified_epsilon", path)
    return ValueTable(q, cert, "loaded"), reward, gamma


def save_value_table(path, table: ValueTable, mdp: TabularMDP) -> None:
    """Write ``table`` with the reward and discount of the task it solves."""
    Path(path).write_text(dump_value_table(table, mdp), encoding="utf-8")


def load_value_table(path) -> ValueTable:
    return load_value_table_task(path)[0]


def load_value_table_task(path):
    """Like :func:`load_value_table` but also returns ``(reward, gamma)``."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_value_table(text, path)


def dump_mdp(mdp: TabularMDP) -> str:
    lines = [
        "# inverse-bellman deterministic MDP",
        f"num_states = {mdp.num_states}",
        f"num_actions = {mdp.num_actions}",
        f"gamma = {format_real(mdp.gamma)}",
        "transition = " + " ".join(str(int(t)) for t in mdp.transition.ravel()),
        f"reward = {_format_reals(mdp.reward)}",
    ]
    return "\n".join(lines) + "\n"


def parse_mdp(text: str, path="<string>") -> TabularMDP:
    fields = parse_key_values(text)
    _require(fields, MDP_FIELDS, path)
    shape = (_parse_int(fields, "num_states", path), _parse_int(fields, "num_actions", path))
    transition = _parse_matrix(fields["transition"], shape, np.int64, "transition", path)
    reward = _parse_matrix(fields["reward"], shape, float, "reward", path)
    return TabularMDP(transition, reward, _parse_float(fields, "gamma", path))


def save_mdp(path, mdp: TabularMDP) -> None:
    Path(path).write_text(dump_mdp(mdp), encoding="utf-8")


def load_mdp(path) -> TabularMDP:
    return parse_mdp(Path(path).read_text(encoding="utf-8"), path)
