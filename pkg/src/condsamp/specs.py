"""Parsing of distribution spec strings used by the CLI and demos.

Accepted forms::

    uniform:<n>            halfheavy:<n>        zipf:<n>:<s>
    pointmass:<n>:<i>      (i counts from 1, as on the command line)
    uniblock-even:<n>:<seed>    uniblock-odd:<n>:<seed>
    string:<path>          (bits of x; gives the balanced-string distribution of b(x))
    file:<path>            (JSON array of weights)
    [w1, w2, ...]          (inline JSON array)
"""

from __future__ import annotations

import json
from pathlib import Path

from . import adversarial
from .core import Distribution, halfheavy, point_mass, uniform, zipf


class SpecError(ValueError):
    pass


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SpecError(f"{what} must be an integer, got {text!r}") from None


def _weights(values) -> Distribution:
    if not isinstance(values, list) or not values:
        raise SpecError("expected a non-empty JSON array of weights")
    try:
        return Distribution.from_weights([float(v) for v in values])
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from None


def parse_distribution(spec: str) -> Distribution:
    spec = spec.strip()
    if spec.startswith("["):
        try:
            return _weights(json.loads(spec))
        except json.JSONDecodeError as exc:
            raise SpecError(f"bad inline JSON: {exc}") from None
    kind, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "uniform" and len(args) == 1:
            return uniform(_int(args[0], "n"))
        if kind == "halfheavy" and len(args) == 1:
            return halfheavy(_int(args[0], "n"))
        if kind == "zipf" and len(args) == 2:
            return zipf(_int(args[0], "n"), float(args[1]))
        if kind == "pointmass" and len(args) == 2:
            return point_mass(_int(args[0], "n"), _int(args[1], "i") - 1)
        if kind in ("uniblock-even", "uniblock-odd") and len(args) == 2:
            parity = kind.split("-")[1]
            return adversarial.gen_uniblock(_int(args[0], "n"), parity, _int(args[1], "seed")).dist
        if kind == "string" and rest:
            return adversarial.string_distribution(adversarial.balanced_extend(Path(rest).read_text().strip()))
        if kind == "file" and rest:
            return _weights(json.loads(Path(rest).read_text()))
    except SpecError:
        raise
    except (OSError, ValueError) as exc:
        raise SpecError(f"{spec!r}: {exc}") from None
    raise SpecError(f"unrecognized distribution spec {spec!r}")
