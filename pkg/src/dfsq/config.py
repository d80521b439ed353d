"""JSON run configurations and their schema."""

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .functions import FUNCTION_NAMES, function_from_spec
from .sources import source_from_spec

REGIMES = ("fixed", "variable", "slepian-wolf")

SCHEMA = {
    "type": "object",
    "required": ["source", "function", "regime", "rates"],
    "additionalProperties": False,
    "properties": {
        "source": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["uniform", "power", "grid"]},
                "k": {"type": "number", "exclusiveMinimum": -1},
                "weights": {"type": "array"},
            },
        },
        "function": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": list(FUNCTION_NAMES)},
                "n": {"type": "integer", "minimum": 1},
                "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1},
                             "minItems": 1},
                "coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "L": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "regime": {"enum": list(REGIMES)},
        "rates": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "grid_size": {"type": "integer", "minimum": 16},
        "output_dir": {"type": "string"},
        "rate_method": {"enum": ["exact", "hr"]},
        "simulate_sweep": {"type": "boolean"},
    },
}


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass
class RunConfig:
    raw: dict
    regime: str
    rates: list
    samples: int = 2**20
    seed: int = 0
    grid_size: int = 1024
    output_dir: str = "out"
    rate_method: str = "exact"
    simulate_sweep: bool = True

    def function(self, n=None):
        spec = dict(self.raw["function"])
        spec.pop("n_values", None)
        if n is not None:
            spec["n"] = n
        return function_from_spec(spec)

    def source(self, n):
        return source_from_spec(self.raw["source"], n)

    @property
    def n_values(self):
        f = self.raw["function"]
        if "n_values" in f:
            return list(f["n_values"])
        return [None]


def validate(raw):
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(e.message, path)
    name = raw["function"]["name"]
    if name in ("max", "median") and "n" not in raw["function"] \
            and "n_values" not in raw["function"]:
        raise ConfigError("max and median need n", "function/n")
    if name == "linear" and "coefficients" not in raw["function"]:
        raise ConfigError("linear needs coefficients", "function/coefficients")
    if raw["source"]["kind"] == "power" and "k" not in raw["source"]:
        raise ConfigError("power source needs k", "source/k")
    if raw["source"]["kind"] == "grid" and "weights" not in raw["source"]:
        raise ConfigError("grid source needs weights", "source/weights")


def load(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return from_mapping(raw)


def from_mapping(raw):
    validate(raw)
    keys = ("samples", "seed", "grid_size", "output_dir", "rate_method", "simulate_sweep")
    return RunConfig(raw, raw["regime"], list(raw["rates"]),
                     **{k: raw[k] for k in keys if k in raw})


def shipped(name):
    """Path-like handle of a configuration bundled with the package."""
    return resources.files("dfsq") / "configs" / name
