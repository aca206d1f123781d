"""Scenario files.

A scenario is a JSON document::

    {
      "name": "spin-45",
      "dim": 2,
      "pre":  {"bloch": {"theta": 0, "phi": 0}},
      "post": {"amplitudes": [[1, 0], [1, 0]], "normalize": true},
      "observables": [
        {"name": "c", "spin": {"theta": 45, "phi": 0}},
        {"name": "box1", "basis": [0]},
        {"name": "m", "projectors": [
            {"label": "first", "eigenvalue": 1, "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]},
            {"label": "second", "eigenvalue": -1, "matrix": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}]}
      ],
      "sequence": ["c"],
      "final": "c",
      "trials": 1000000,
      "seed": 42
    }

Angles are in degrees (radians = degrees * pi / 180). Complex numbers are
``[re, im]`` pairs. ``basis`` builds the yes/no observable for the span of
the listed basis vectors. ``final`` names the observable measured last in
simulations; when omitted it is spin along the post-selection direction for
Bloch post-selections, otherwise the yes/no test for the post state.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .abl import MeasurementSequence, PrePostContext
from .quantum import (
    BlochDirection,
    Observable,
    Outcome,
    Projector,
    StateVector,
    projector_observable,
    spin_observable,
    state_projector_observable,
)

_TOP_KEYS = {"name", "dim", "pre", "post", "observables", "sequence", "final", "trials", "seed"}


class ConfigError(ValueError):
    def __init__(self, message: str, path: tuple = (), line: int | None = None, source: str = "<config>"):
        self.message, self.path, self.line, self.source = message, path, line, source
        where = source + (f":{line}" if line else "")
        loc = "/".join(str(p) for p in path)
        super().__init__(f"{where}: {loc + ': ' if loc else ''}{message}")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj: Any) -> str:
    """64-bit BLAKE2b of the canonical JSON (sorted keys, no whitespace, UTF-8), as 16 hex digits."""
    return hashlib.blake2b(canonical_json(obj).encode("utf-8"), digest_size=8).hexdigest()


def _locate(text: str, path: tuple) -> int | None:
    # line of the last object key on ``path``, searched in document order
    pos, found = 0, None
    for part in path:
        if isinstance(part, str):
            m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if m is None:
                break
            pos, found = m.end(), m.start()
    return None if found is None else text.count("\n", 0, found) + 1


def _complex(v, path) -> complex:
    if (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                   for x in v)):
        return complex(v[0], v[1])
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise ConfigError(f"expected a number or [re, im] pair, got {v!r}", path)


def _number(d: dict, key: str, path, default=None) -> float:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number", (*path, key))
    return float(v)


def _direction(d, path) -> BlochDirection:
    if not isinstance(d, dict):
        raise ConfigError("expected {\"theta\": deg, \"phi\": deg}", path)
    theta, phi = _number(d, "theta", path), _number(d, "phi", path, 0.0)
    if not 0 <= theta <= 180:
        raise ConfigError(f"theta={theta} degrees outside [0, 180]", (*path, "theta"))
    return BlochDirection.from_degrees(theta, phi)


def _state(spec, dim: int, path) -> StateVector:
    if not isinstance(spec, dict):
        raise ConfigError("state must be an object with 'bloch' or 'amplitudes'", path)
    if "bloch" in spec:
        if dim != 2:
            raise ConfigError("Bloch states need dim 2", path)
        return _direction(spec["bloch"], (*path, "bloch")).up()
    if "amplitudes" in spec:
        amps = spec["amplitudes"]
        if not isinstance(amps, list) or len(amps) != dim:
            raise ConfigError(f"'amplitudes' must list {dim} entries", (*path, "amplitudes"))
        vals = [_complex(v, (*path, "amplitudes", i)) for i, v in enumerate(amps)]
        try:
            if spec.get("normalize", False):
                return StateVector.normalized(vals)
            return StateVector(vals)
        except ValueError as e:
            raise ConfigError(str(e), path) from None
    raise ConfigError("state must have 'bloch' or 'amplitudes'", path)


def _observable(spec, dim: int, path) -> Observable:
    if not isinstance(spec, dict) or not isinstance(spec.get("name"), str):
        raise ConfigError("observable needs a string 'name'", path)
    name = spec["name"]
    try:
        if "spin" in spec:
            if dim != 2:
                raise ConfigError("spin observables need dim 2", path)
            return spin_observable(_direction(spec["spin"], (*path, "spin")), name)
        if "basis" in spec:
            idx = spec["basis"]
            if not isinstance(idx, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in idx):
                raise ConfigError("'basis' must be a list of integer indices", (*path, "basis"))
            return projector_observable(Projector.onto_basis(dim, idx), name)
        if "projectors" in spec:
            outs = []
            for i, p in enumerate(spec["projectors"]):
                ppath = (*path, "projectors", i)
                if not isinstance(p, dict) or not isinstance(p.get("label"), str):
                    raise ConfigError("projector entry needs a string 'label'", ppath)
                rows = p.get("matrix")
                if not isinstance(rows, list) or len(rows) != dim or any(
                        not isinstance(r, list) or len(r) != dim for r in rows):
                    raise ConfigError(f"'matrix' must be {dim}x{dim}", (*ppath, "matrix"))
                m = np.array([[_complex(v, (*ppath, "matrix")) for v in r] for r in rows])
                outs.append(Outcome(_number(p, "eigenvalue", ppath, float(i)), p["label"], Projector(m)))
            return Observable(name, tuple(outs))
    except ConfigError:
        raise
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e), path) from None
    raise ConfigError("observable needs one of 'spin', 'basis', 'projectors'", path)


@dataclass
class ScenarioConfig:
    """A validated scenario. ``raw`` is the document as written; everything
    else is built from it."""

    raw: dict
    dim: int
    ctx: PrePostContext
    observables: dict[str, Observable]
    sequence: MeasurementSequence
    final: Observable
    trials: int | None
    seed: int | None
    source: str = "<config>"

    @property
    def name(self) -> str:
        return self.raw.get("name", Path(self.source).stem)

    def to_dict(self) -> dict:
        return json.loads(canonical_json(self.raw))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    @property
    def digest(self) -> str:
        return digest(self.raw)

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno, source=source) from None
        try:
            return cls.from_dict(raw, source)
        except ConfigError as e:
            raise ConfigError(e.message, e.path, _locate(text, e.path), source) from None

    @classmethod
    def from_dict(cls, raw: Any, source: str = "<config>") -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("scenario must be a JSON object", source=source)
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", (sorted(unknown)[0],), source=source)
        dim = raw.get("dim")
        if isinstance(dim, bool) or not isinstance(dim, int) or not 2 <= dim <= 16:
            raise ConfigError("'dim' must be an integer in [2, 16]", ("dim",), source=source)
        for key in ("pre", "post"):
            if key not in raw:
                raise ConfigError(f"missing {key!r}", (key,), source=source)
        pre, post = _state(raw["pre"], dim, ("pre",)), _state(raw["post"], dim, ("post",))
        pre = StateVector(pre.amplitudes, "pre")
        post = StateVector(post.amplitudes, "post")

        obs_specs = raw.get("observables", [])
        if not isinstance(obs_specs, list):
            raise ConfigError("'observables' must be a list", ("observables",), source=source)
        observables = {}
        for i, spec in enumerate(obs_specs):
            o = _observable(spec, dim, ("observables", i))
            if o.name in observables:
                raise ConfigError(f"duplicate observable name {o.name!r}", ("observables", i, "name"))
            observables[o.name] = o

        names = raw.get("sequence", [])
        if not isinstance(names, list):
            raise ConfigError("'sequence' must be a list of observable names", ("sequence",))
        for i, n in enumerate(names):
            if n not in observables:
                raise ConfigError(f"sequence refers to undeclared observable {n!r}", ("sequence", i))
        try:
            seq = MeasurementSequence(tuple(observables[n] for n in names))
        except ValueError as e:
            raise ConfigError(str(e), ("sequence",)) from None

        if "final" in raw:
            if raw["final"] not in observables:
                raise ConfigError(f"'final' refers to undeclared observable {raw['final']!r}", ("final",))
            final = observables[raw["final"]]
        elif "bloch" in raw["post"]:
            final = spin_observable(_direction(raw["post"]["bloch"], ("post", "bloch")), "post")
        else:
            final = state_projector_observable(post, "post")

        trials = raw.get("trials")
        if trials is not None and (isinstance(trials, bool) or not isinstance(trials, int)):
            raise ConfigError("'trials' must be an integer", ("trials",))
        seed = raw.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64):
            raise ConfigError("'seed' must be an unsigned 64-bit integer", ("seed",))
        return cls(raw, dim, PrePostContext(pre, post, ("t_a", "t_b")), observables, seq, final,
                   trials, seed, source)


def bundled_scenarios() -> list[str]:
    return sorted(p.name for p in resources.files("abl_lab.scenarios").iterdir() if p.name.endswith(".json"))


def load(path: str | Path) -> ScenarioConfig:
    """Load a scenario from ``path``; bare names of bundled scenarios also work."""
    p = Path(path)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    else:
        name = p.name if p.name.endswith(".json") else p.name + ".json"
        if name not in bundled_scenarios():
            raise ConfigError("no such file or bundled scenario", source=str(path))
        text = resources.files("abl_lab.scenarios").joinpath(name).read_text(encoding="utf-8")
    return ScenarioConfig.from_json(text, source=str(path))
