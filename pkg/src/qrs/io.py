"""JSON encoding of states, channels and reports.

Complex numbers are ``[re, im]`` pairs, dimensions and labels are explicit.
Malformed input raises :class:`InputError` carrying a location: a line and
column for syntax errors, a JSON path for structural or physical ones.
"""
from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .channels import QuantumChannel
from .tensor import DensityOperator, Ket, SystemLayout


class InputError(ValueError):
    def __init__(self, source: str, where: str, message: str):
        self.source, self.where, self.message = source, where, message
        super().__init__(f"{source}: {where}: {message}")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    """``name`` is ``"state"`` or ``"channel"``."""
    text = resources.files("qrs").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _path(err: jsonschema.ValidationError) -> str:
    out = "$"
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _validate(doc, schema_name: str, source: str):
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), _path(e)))
    if errors:
        e = errors[0]
        raise InputError(source, f"field {_path(e)}", e.message)


def _parse(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(source, f"line {e.lineno} column {e.colno}", e.msg) from None


# ---------------------------------------------------------------------------
# encoders

def encode_complex_array(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode_complex_array(x) for x in a]


def decode_complex_array(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _systems(layout: SystemLayout) -> list:
    return [[n, d] for n, d in layout.factors]


def _layout(items) -> SystemLayout:
    return SystemLayout([(n, d) for n, d in items])


def state_to_json(state: DensityOperator | Ket) -> dict:
    if isinstance(state, Ket):
        return {"kind": "state", "layout": _systems(state.layout),
                "ket": encode_complex_array(state.amplitudes)}
    return {"kind": "state", "layout": _systems(state.layout), "matrix": encode_complex_array(state.matrix)}


def channel_to_json(channel: QuantumChannel) -> dict:
    return {"kind": "channel", "in": _systems(channel.in_layout), "out": _systems(channel.out_layout),
            "kraus": encode_complex_array(channel.kraus)}


# ---------------------------------------------------------------------------
# decoders

def state_from_json(doc, source: str = "<state>") -> DensityOperator:
    _validate(doc, "state", source)
    try:
        layout = _layout(doc["layout"])
    except ValueError as e:
        raise InputError(source, "field $.layout", str(e)) from None
    if "ket" in doc:
        v = decode_complex_array(doc["ket"])
        if v.shape != (layout.dim,):
            raise InputError(source, "field $.ket", f"expected {layout.dim} amplitudes, got {v.shape[0]}")
        try:
            return Ket(layout, v).density()
        except ValueError as e:
            raise InputError(source, "field $.ket", str(e)) from None
    rows = doc["matrix"]
    if any(len(r) != len(rows) for r in rows):
        raise InputError(source, "field $.matrix", "matrix is not square")
    m = decode_complex_array(rows)
    if m.shape != (layout.dim, layout.dim):
        raise InputError(source, "field $.matrix", f"expected shape ({layout.dim}, {layout.dim}), got {m.shape}")
    try:
        return DensityOperator(layout, m)
    except ValueError as e:
        raise InputError(source, "field $.matrix", str(e)) from None


def channel_from_json(doc, source: str = "<channel>") -> QuantumChannel:
    _validate(doc, "channel", source)
    try:
        ins, outs = _layout(doc["in"]), _layout(doc["out"])
    except ValueError as e:
        raise InputError(source, "field $.in/$.out", str(e)) from None
    ops = []
    for i, k in enumerate(doc["kraus"]):
        if any(len(r) != len(k[0]) for r in k):
            raise InputError(source, f"field $.kraus[{i}]", "rows have different lengths")
        a = decode_complex_array(k)
        if a.shape != (outs.dim, ins.dim):
            raise InputError(source, f"field $.kraus[{i}]",
                             f"expected shape ({outs.dim}, {ins.dim}), got {a.shape}")
        ops.append(a)
    try:
        return QuantumChannel(ins, outs, ops)
    except ValueError as e:
        raise InputError(source, "field $.kraus", str(e)) from None


def read_json(path: str | Path) -> tuple[object, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InputError(str(path), "file", e.strerror or str(e)) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InputError(str(path), f"byte {e.start}", "file is not UTF-8") from None
    return _parse(text, str(path)), raw


def load_state(path) -> tuple[DensityOperator, str]:
    doc, raw = read_json(path)
    return state_from_json(doc, str(path)), sha256(raw)


def load_channel(path) -> tuple[QuantumChannel, str]:
    doc, raw = read_json(path)
    return channel_from_json(doc, str(path)), sha256(raw)


def sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def dumps(report: dict) -> str:
    """Canonical text form: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(obj: dict, path: str | Path):
    Path(path).write_text(dumps(obj))
