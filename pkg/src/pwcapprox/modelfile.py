"""JSON model files.

Layout (keys in this order)::

    {"version": 1, "kind": "pwc", "domain": {"lower": [...], "upper": [...]},
     "pieces": [{"d": [...], "a": [...], "b": ...}, ...], "meta": {...}}

    {"version": 1, "kind": "sumform", "domain": {...},
     "components": [<pwc payload without version/kind/meta>, ...], "meta": {...}}

Floats are written with ``repr`` (shortest round-tripping decimal), so a
save/load cycle reproduces every coefficient bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core import Box, PwcFunction
from .separable import SumForm

FORMAT_VERSION = 1

Payload = Union[PwcFunction, SumForm]


class ModelFileError(ValueError):
    pass


class VersionError(ModelFileError):
    pass


class ValidationError(ModelFileError):
    """Model content violates an invariant.  ``problems`` lists every issue."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid model file: " + "; ".join(problems))
        self.problems = problems


@dataclass
class ModelFile:
    payload: Payload
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    @property
    def kind(self) -> str:
        return "sumform" if isinstance(self.payload, SumForm) else "pwc"


def _domain_doc(box: Box) -> dict:
    return {"lower": list(box.lower), "upper": list(box.upper)}


def _pwc_doc(f: PwcFunction) -> dict:
    return {
        "domain": _domain_doc(f.domain),
        "pieces": [
            {"d": d.tolist(), "a": a.tolist(), "b": float(b)}
            for d, a, b in zip(f.D, f.A, f.B)
        ],
    }


def to_document(m: ModelFile) -> dict:
    doc = {"version": m.version, "kind": m.kind}
    if isinstance(m.payload, SumForm):
        doc["domain"] = _domain_doc(m.payload.domain)
        doc["components"] = [_pwc_doc(c) for c in m.payload.components]
    else:
        doc.update(_pwc_doc(m.payload))
    doc["meta"] = m.meta
    return doc


def dumps(m: ModelFile) -> str:
    return json.dumps(to_document(m), indent=1, allow_nan=False) + "\n"


def save_model(m: ModelFile, path) -> None:
    text = dumps(m)
    Path(path).write_text(text)


def _numbers(value, where: str, problems: list[str]) -> list[float] | None:
    if not isinstance(value, list) or not value:
        problems.append(f"{where} must be a non-empty list of numbers")
        return None
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            problems.append(f"{where} contains a non-numeric or non-finite entry {v!r}")
            return None
        out.append(float(v))
    return out


def _parse_domain(doc, where, problems) -> Box | None:
    if not isinstance(doc, dict):
        problems.append(f"{where} must be an object with lower and upper")
        return None
    lo = _numbers(doc.get("lower"), f"{where}.lower", problems)
    hi = _numbers(doc.get("upper"), f"{where}.upper", problems)
    if lo is None or hi is None:
        return None
    try:
        return Box(tuple(lo), tuple(hi))
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None


def _parse_pwc(doc, where, problems) -> PwcFunction | None:
    if not isinstance(doc, dict):
        problems.append(f"{where} must be an object")
        return None
    box = _parse_domain(doc.get("domain"), f"{where}.domain", problems)
    pieces = doc.get("pieces")
    if not isinstance(pieces, list) or not pieces:
        problems.append(f"{where}.pieces must be a non-empty list")
        return None
    D, A, B = [], [], []
    start = len(problems)
    for i, p in enumerate(pieces):
        pw = f"{where}.pieces[{i}]"
        if not isinstance(p, dict):
            problems.append(f"{pw} must be an object")
            continue
        d = _numbers(p.get("d"), f"{pw}.d", problems)
        a = _numbers(p.get("a"), f"{pw}.a", problems)
        b = p.get("b")
        if isinstance(b, bool) or not isinstance(b, (int, float)) or not math.isfinite(b):
            problems.append(f"{pw}.b must be a finite number")
            continue
        if d is None or a is None:
            continue
        if box is not None and (len(d) != box.dim or len(a) != box.dim):
            problems.append(f"{pw} has dimension {len(d)}/{len(a)}, domain has {box.dim}")
            continue
        if any(x > 0 for x in d):
            problems.append(f"{pw}: concavity violated (d = {d})")
            continue
        D.append(d)
        A.append(a)
        B.append(float(b))
    if box is None or len(problems) > start:
        return None
    return PwcFunction.from_arrays(np.array(D), np.array(A), np.array(B), box)


def from_document(doc) -> ModelFile:
    if not isinstance(doc, dict):
        raise ValidationError(["top level must be a JSON object"])
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model file version {version!r}; expected {FORMAT_VERSION}")
    kind = doc.get("kind")
    meta = doc.get("meta", {})
    problems: list[str] = []
    if not isinstance(meta, dict):
        problems.append("meta must be an object")
        meta = {}
    if kind == "pwc":
        payload = _parse_pwc(doc, "model", problems)
    elif kind == "sumform":
        box = _parse_domain(doc.get("domain"), "domain", problems)
        comps = doc.get("components")
        payload = None
        if not isinstance(comps, list) or not comps:
            problems.append("components must be a non-empty list")
        else:
            parsed = [_parse_pwc(c, f"components[{j}]", problems) for j, c in enumerate(comps)]
            if box is not None and not problems:
                try:
                    payload = SumForm(tuple(parsed), box)
                except ValueError as exc:
                    problems.append(str(exc))
    else:
        problems.append(f"unknown kind {kind!r}")
        payload = None
    if problems:
        raise ValidationError(problems)
    return ModelFile(payload, meta, version)


def loads(text: str) -> ModelFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"not valid JSON: {exc}"]) from exc
    return from_document(doc)


def load_model(path) -> ModelFile:
    return loads(Path(path).read_text())
