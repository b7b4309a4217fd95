"""Metric files and report serialization.

A metric file is a JSON object::

    {"n": 2, "m": 3, "name": "M_X",
     "coefficients": [{"indices": [1, 1, 1], "poly": [{"exps": [0, 0], "coef": 1.0},
                                                     {"exps": [1, 0], "coef": 1.0}]},
                      {"indices": [2, 2, 2], "poly": [{"exps": [0, 0], "coef": 1.0}]}],
     "sigma": [{"exps": [0, 0], "coef": 1.0}]}

Indices are 1-based and name one representative per permutation orbit; the
value is the symmetric component, not the orbit sum. ``sigma`` and ``name``
are optional.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path

from .errors import DuplicateOrbit, IndexOutOfRange, ParseError
from .metric import MetricSpec
from .symtensor import PolyField, SymCoeffTensor, canonicalize

_TOP_KEYS = {"n", "m", "coefficients", "sigma", "name"}


def _reject_constant(token):
    raise ValueError(f"non-finite number {token} is not allowed")


class _Locator:
    """Maps a field path back to a line of the source text (best effort)."""

    def __init__(self, text, source):
        self.text = text
        self.source = source

    def line_of_entry(self, k):
        hits = [m.start() for m in re.finditer(r'"indices"\s*:', self.text)]
        if k < len(hits):
            return self.text.count("\n", 0, hits[k]) + 1
        return None

    def at(self, path, entry=None):
        line = self.line_of_entry(entry) if entry is not None else None
        where = f"{self.source}:{line}" if line else self.source
        return f"{where} [{path}]"


def _integer(value, path, loc, entry=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {value!r}", loc.at(path, entry))
    return value


def _number(value, path, loc, entry=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", loc.at(path, entry))
    if not math.isfinite(value):
        raise ParseError("non-finite coefficient", loc.at(path, entry))
    return float(value)


def _poly(doc, n, path, loc, entry=None):
    if not isinstance(doc, list):
        raise ParseError("poly must be a list of {exps, coef}", loc.at(path, entry))
    terms = []
    for t, term in enumerate(doc):
        here = f"{path}[{t}]"
        if not isinstance(term, dict) or set(term) != {"exps", "coef"}:
            raise ParseError("each term needs exactly the keys exps and coef", loc.at(here, entry))
        exps = term["exps"]
        if not isinstance(exps, list) or len(exps) != n:
            raise ParseError(f"exps must list {n} integers", loc.at(f"{here}.exps", entry))
        exps = tuple(_integer(e, f"{here}.exps", loc, entry) for e in exps)
        if any(e < 0 for e in exps):
            raise ParseError("negative exponent", loc.at(f"{here}.exps", entry))
        terms.append((exps, _number(term["coef"], f"{here}.coef", loc, entry)))
    return PolyField.from_terms(terms, n)


def spec_from_dict(doc, source="<metric>", text=""):
    loc = _Locator(text, source)
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", loc.at("$"))
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", loc.at("$"))
    for key in ("n", "m", "coefficients"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}", loc.at("$"))
    n = _integer(doc["n"], "n", loc)
    m = _integer(doc["m"], "m", loc)
    if not 2 <= n <= 8:
        raise ParseError(f"n={n} outside [2, 8]", loc.at("n"))
    if not 2 <= m <= 6:
        raise ParseError(f"m={m} outside [2, 6]", loc.at("m"))
    coeffs = doc["coefficients"]
    if not isinstance(coeffs, list):
        raise ParseError("coefficients must be a list", loc.at("coefficients"))

    table, first_seen = {}, {}
    for k, entry in enumerate(coeffs):
        path = f"coefficients[{k}]"
        if not isinstance(entry, dict) or set(entry) != {"indices", "poly"}:
            raise ParseError("each coefficient needs exactly the keys indices and poly", loc.at(path, k))
        idx = entry["indices"]
        if not isinstance(idx, list):
            raise ParseError("indices must be a list", loc.at(f"{path}.indices", k))
        if len(idx) != m:
            raise ParseError(f"indices {idx} have length {len(idx)}, expected m={m}", loc.at(f"{path}.indices", k))
        idx = [_integer(i, f"{path}.indices", loc, k) for i in idx]
        try:
            key = canonicalize(idx, n)
        except IndexOutOfRange as exc:
            raise IndexOutOfRange(f"{loc.at(f'{path}.indices', k)}: {exc}") from None
        if key in table:
            raise DuplicateOrbit(
                f"{loc.at(f'{path}.indices', k)}: orbit {list(key)} already given at coefficients[{first_seen[key]}]"
            )
        table[key] = _poly(entry["poly"], n, f"{path}.poly", loc, k)
        first_seen[key] = k

    sigma = None
    if doc.get("sigma") is not None:
        sigma = _poly(doc["sigma"], n, "sigma", loc)
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ParseError("name must be a string", loc.at("name"))
    return MetricSpec(n, m, SymCoeffTensor(n, m, table), sigma, name)


def parse_metric_text(text, source="<metric>"):
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None
    except ValueError as exc:
        raise ParseError(str(exc), source) from None
    return spec_from_dict(doc, source, text)


def parse_metric_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_metric_text(text, str(path))


def _poly_doc(poly):
    return [{"exps": list(e), "coef": c} for e, c in poly.monomials]


def spec_to_dict(spec):
    doc = {"n": spec.n, "m": spec.m}
    if spec.name is not None:
        doc["name"] = spec.name
    doc["coefficients"] = [
        {"indices": list(key), "poly": _poly_doc(poly)}
        for key, poly in sorted(spec.a.entries.items())
        if not poly.is_zero
    ]
    if spec.sigma is not None:
        doc["sigma"] = _poly_doc(spec.sigma)
    return doc


def dump_metric(spec):
    """Metric-file text with one coefficient entry per line."""
    doc = spec_to_dict(spec)
    lines = []
    for key, value in doc.items():
        if key == "coefficients":
            entries = [json.dumps(e) for e in value]
            body = ",\n".join(f"    {e}" for e in entries)
            lines.append(f'  "coefficients": [\n{body}\n  ]' if entries else '  "coefficients": []')
        else:
            lines.append(f"  {json.dumps(key)}: {json.dumps(value)}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def spec_digest(spec):
    """sha256 of the canonical compact serialization."""
    blob = json.dumps(spec_to_dict(spec), separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def to_jsonable(value):
    """Arrays to nested lists, numpy scalars to Python; dict order preserved."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return to_jsonable(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def dump_report(report):
    """JSON text; floats go through repr, so every value keeps 17 significant digits."""
    return json.dumps(to_jsonable(report), indent=2, allow_nan=False) + "\n"
