"""JSON model files, number formatting and atomic output for the CLI.

Model file schema::

    {"field": "real" | "complex",
     "model": {"type": "dense", "eigenvalues": [...], "coefficients": [[...], ...]}
            | {"type": "builtin", "name": "paper_example_1" | "paper_example_2"},
     "gap_min": 1e-12,                      # optional
     "policy": {"max_terms": 4096, ...}}    # optional TruncationPolicy overrides

Complex scalars are written as ``[re, im]`` pairs.  ``coefficients[i-1][j-1]``
is the j-th coordinate of ``J e_i``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .builtin import BUILTIN_NAMES, example_model
from .core import Field, PerturbedModel
from .series import TruncationPolicy

__all__ = [
    "ModelSpec",
    "SpecError",
    "load_spec",
    "parse_spec",
    "dumps",
    "format_number",
    "write_atomic",
]


class SpecError(ValueError):
    """A model file that does not follow the schema."""


def format_number(x) -> str:
    """17 significant digits; non-finite values become ``null``."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (str, os.PathLike)):
        return json.dumps(str(obj), ensure_ascii=False)
    if isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_number(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return f"[{format_number(obj.real)}, {format_number(obj.imag)}]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) or isinstance(v, complex) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _scalar(value, complex_field: bool):
    if isinstance(value, (list, tuple)):
        if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
            raise SpecError(f"complex scalars are [re, im] pairs, got {value!r}")
        if not complex_field:
            raise SpecError("complex scalar in a real model")
        return complex(value[0], value[1])
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"expected a number, got {value!r}")
    return complex(value) if complex_field else float(value)


@dataclass(frozen=True)
class ModelSpec:
    field: Field
    kind: str
    eigenvalues: tuple | None = None
    coefficients: tuple | None = None
    name: str | None = None
    gap_min: float | None = None
    policy: dict | None = None

    @classmethod
    def dense(cls, eigenvalues, coefficients, field=None, gap_min=None, policy=None) -> ModelSpec:
        lam = np.asarray(eigenvalues)
        jmat = np.asarray(coefficients)
        if field is None:
            field = Field.COMPLEX if np.iscomplexobj(lam) or np.iscomplexobj(jmat) else Field.REAL
        field = Field(field)
        cast = complex if field is Field.COMPLEX else float
        return cls(
            field=field,
            kind="dense",
            eigenvalues=tuple(cast(x) for x in lam.tolist()),
            coefficients=tuple(tuple(cast(x) for x in row) for row in jmat.tolist()),
            gap_min=gap_min,
            policy=policy,
        )

    @classmethod
    def builtin(cls, name: str, gap_min=None, policy=None) -> ModelSpec:
        if name not in BUILTIN_NAMES:
            raise SpecError(f"unknown builtin model {name!r}")
        return cls(field=Field.REAL, kind="builtin", name=name, gap_min=gap_min, policy=policy)

    def to_dict(self) -> dict:
        if self.kind == "dense":
            model = {
                "type": "dense",
                "eigenvalues": list(self.eigenvalues),
                "coefficients": [list(row) for row in self.coefficients],
            }
        else:
            model = {"type": "builtin", "name": self.name}
        out = {"field": self.field.value, "model": model}
        if self.gap_min is not None:
            out["gap_min"] = self.gap_min
        if self.policy:
            out["policy"] = dict(sorted(self.policy.items()))
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON encoding."""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def to_model(self) -> PerturbedModel:
        """Build the model; raises ``DegenerateGap`` on repeated eigenvalues."""
        gap_min = 1e-12 if self.gap_min is None else self.gap_min
        if self.kind == "builtin":
            model = example_model(BUILTIN_NAMES[self.name])
            if gap_min != model.gap_min:
                model = PerturbedModel(
                    model.eigensystem, model.perturbation, model.field, gap_min, model.name
                )
            return model
        return PerturbedModel.from_dense(
            np.array(self.eigenvalues), np.array(self.coefficients), self.field, gap_min
        )

    def truncation_policy(self, **overrides) -> TruncationPolicy:
        values = dict(self.policy or {})
        values.update({k: v for k, v in overrides.items() if v is not None})
        return TruncationPolicy(**values)


_POLICY_FIELDS = {f.name for f in fields(TruncationPolicy)}


def parse_spec(data) -> ModelSpec:
    if not isinstance(data, dict):
        raise SpecError("model file must contain a JSON object")
    try:
        field = Field(data.get("field", "real"))
    except ValueError:
        raise SpecError(f"field must be 'real' or 'complex', got {data.get('field')!r}") from None
    model = data.get("model")
    if not isinstance(model, dict):
        raise SpecError("missing 'model' object")
    gap_min = data.get("gap_min")
    if gap_min is not None and (isinstance(gap_min, bool) or not isinstance(gap_min, (int, float)) or gap_min < 0):
        raise SpecError("gap_min must be a non-negative number")
    policy = data.get("policy")
    if policy is not None:
        if not isinstance(policy, dict) or not set(policy) <= _POLICY_FIELDS:
            raise SpecError(f"policy keys must be among {sorted(_POLICY_FIELDS)}")
    kind = model.get("type")
    if kind == "builtin":
        return ModelSpec.builtin(model.get("name"), gap_min=gap_min, policy=policy)
    if kind != "dense":
        raise SpecError(f"model type must be 'dense' or 'builtin', got {kind!r}")
    lam = model.get("eigenvalues")
    coeffs = model.get("coefficients")
    if not isinstance(lam, list) or not lam:
        raise SpecError("dense model needs a non-empty 'eigenvalues' array")
    n = len(lam)
    if not isinstance(coeffs, list) or len(coeffs) != n or any(
        not isinstance(row, list) or len(row) != n for row in coeffs
    ):
        raise SpecError(f"'coefficients' must be a {n} x {n} array")
    is_complex = field is Field.COMPLEX
    return ModelSpec(
        field=field,
        kind="dense",
        eigenvalues=tuple(_scalar(x, is_complex) for x in lam),
        coefficients=tuple(tuple(_scalar(x, is_complex) for x in row) for row in coeffs),
        gap_min=gap_min,
        policy=policy,
    )


def load_spec(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return parse_spec(data)
