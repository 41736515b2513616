"""Reading and writing pmf and sample files.

A pmf file is JSON, either ``{"n": 4, "weights": [...]}`` or
``{"n": 4, "alphas": [...], "denom": 8}`` for exact rational pmfs, or plain
text with whitespace-separated weights.  A sample file holds whitespace
separated 1-based domain points.
"""

from __future__ import annotations

import json
from typing import Union

import numpy as np

from .distributions import DistributionError, Pmf, RationalPmf

__all__ = ["PmfFormatError", "parse_pmf", "read_pmf", "pmf_to_json", "write_pmf", "read_samples"]


class PmfFormatError(DistributionError):
    pass


def parse_pmf(text: str) -> Union[Pmf, RationalPmf]:
    stripped = text.strip()
    if not stripped:
        raise PmfFormatError("empty pmf file")
    if stripped[0] == "{":
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise PmfFormatError(f"invalid JSON: {exc}") from None
        return _from_json(obj)
    try:
        weights = [float(tok) for tok in stripped.split()]
    except ValueError as exc:
        raise PmfFormatError(f"non-numeric weight: {exc}") from None
    return Pmf(weights)


def _from_json(obj) -> Union[Pmf, RationalPmf]:
    if not isinstance(obj, dict):
        raise PmfFormatError("JSON pmf must be an object")
    if "alphas" in obj:
        if "denom" not in obj:
            raise PmfFormatError("rational pmf needs 'denom'")
        alphas = obj["alphas"]
        if not all(isinstance(a, int) and not isinstance(a, bool) for a in alphas):
            raise PmfFormatError("'alphas' must be integers")
        pmf = RationalPmf(alphas, int(obj["denom"]))
    elif "weights" in obj:
        pmf = Pmf(obj["weights"])
    else:
        raise PmfFormatError("JSON pmf needs 'weights' or 'alphas' and 'denom'")
    if "n" in obj and int(obj["n"]) != pmf.n:
        raise PmfFormatError(f"'n' is {obj['n']} but {pmf.n} weights were given")
    return pmf


def read_pmf(path) -> Union[Pmf, RationalPmf]:
    with open(path, encoding="utf-8") as fh:
        return parse_pmf(fh.read())


def pmf_to_json(pmf: Union[Pmf, RationalPmf]) -> str:
    if isinstance(pmf, RationalPmf):
        return json.dumps({"n": pmf.n, "alphas": list(pmf.alphas), "denom": pmf.denom})
    return json.dumps({"n": pmf.n, "weights": [float(w) for w in pmf.weights]})


def write_pmf(pmf, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pmf_to_json(pmf) + "\n")


def read_samples(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return np.array([int(tok) for tok in text.split()], dtype=np.int64)
    except ValueError as exc:
        raise PmfFormatError(f"sample file must hold integers: {exc}") from None
