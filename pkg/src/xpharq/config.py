"""Experiment configuration files (JSON) for the command-line runner."""

import hashlib
import json
import math
from dataclasses import dataclass, field

from .channel import ChannelModel
from .exceptions import ConfigurationError
from .validation import check_k_max, check_positive

__all__ = ["ExperimentConfig", "EXPERIMENTS", "load_config", "DEFAULT_CHANNEL"]

EXPERIMENTS = (
    "mi_curve", "ir_throughput", "xp_throughput", "ir_sweep", "xp_sweep", "mdp_solve",
    "mdp_eval", "k2_closed_form", "heuristic", "simulate", "validate_all",
)

DEFAULT_CHANNEL = {"snr": {"kind": "two_state_mi", "i_a": 1.0, "i_b": 1.5, "p": 0.75}}

_GRID_DEFAULTS = {
    "rate_step": 0.25,
    "r_max": 8.0,
    "k_max": 2,
    "mi_step": 0.005,
    "r1_max": 3.75,
    "rk_max": 3.75,
    "decodability_cap": None,
}

_PARAM_KEYS = {
    "r", "rates", "r1", "policy", "n_cycles", "mode", "first_rate", "i1_step",
    "trace", "policy_file", "quick",
}

_POLICY_KINDS = ("fixed", "ir", "heuristic", "k2", "mdp")


def _field(where, msg):
    return ConfigurationError(f"field '{where}': {msg}")


def _number(value, where, allow_zero=False):
    try:
        return check_positive(value, where, allow_zero=allow_zero)
    except ConfigurationError as exc:
        raise _field(where, str(exc)) from None


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``channel`` keeps the JSON channel spec (validated by
    :meth:`ChannelModel.from_config`); ``snr_sweep`` overrides the average SNR
    (dB) of a Rayleigh channel point by point.
    """

    experiment: str
    channel: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_CHANNEL)))
    snr_sweep: list = None
    grids: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise _field("experiment", f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not isinstance(self.channel, dict):
            raise _field("channel", "must be an object")
        ChannelModel.from_config(self.channel)
        if self.snr_sweep is not None:
            if not isinstance(self.snr_sweep, list) or not self.snr_sweep:
                raise _field("snr_sweep", "must be a non-empty list of dB values")
            for i, v in enumerate(self.snr_sweep):
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise _field(f"snr_sweep[{i}]", f"not a finite number: {v!r}")
            self.snr_sweep = [float(v) for v in self.snr_sweep]
            kind = self.channel.get("snr", {}).get("kind")
            if kind not in ("rayleigh", "constant"):
                raise _field("snr_sweep", f"cannot sweep SNR of a {kind!r} channel")
        unknown = set(self.grids) - set(_GRID_DEFAULTS)
        if unknown:
            raise _field(f"grids.{sorted(unknown)[0]}", "unknown field")
        grids = dict(_GRID_DEFAULTS)
        grids.update(self.grids)
        for key in ("rate_step", "r_max", "mi_step", "r1_max", "rk_max"):
            grids[key] = _number(grids[key], f"grids.{key}")
        if grids["decodability_cap"] is not None:
            grids["decodability_cap"] = _number(grids["decodability_cap"], "grids.decodability_cap")
        k = grids["k_max"]
        if k in ("inf", None):
            grids["k_max"] = "inf"
        else:
            try:
                grids["k_max"] = check_k_max(k)
            except ConfigurationError as exc:
                raise _field("grids.k_max", str(exc)) from None
        self.grids = grids
        unknown = set(self.params) - _PARAM_KEYS
        if unknown:
            raise _field(f"params.{sorted(unknown)[0]}", "unknown field")
        self._check_params()
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise _field("seed", "must be an unsigned 64-bit integer")
        if self.output is not None and not isinstance(self.output, str):
            raise _field("output", "must be a path string")

    def _check_params(self):
        p = self.params
        for key in ("r", "r1", "first_rate", "i1_step"):
            if key in p:
                p[key] = _number(p[key], f"params.{key}")
        if "rates" in p:
            if not isinstance(p["rates"], list) or not p["rates"]:
                raise _field("params.rates", "must be a non-empty list")
            p["rates"] = [_number(v, f"params.rates[{i}]", allow_zero=i > 0) for i, v in enumerate(p["rates"])]
        if "n_cycles" in p:
            n = p["n_cycles"]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1000:
                raise _field("params.n_cycles", "must be an integer >= 1000")
        if "policy" in p and p["policy"] not in _POLICY_KINDS:
            raise _field("params.policy", f"must be one of {_POLICY_KINDS}")
        if "mode" in p and p["mode"] not in ("truncated", "persistent"):
            raise _field("params.mode", "must be 'truncated' or 'persistent'")
        for key in ("trace", "policy_file"):
            if key in p and not isinstance(p[key], str):
                raise _field(f"params.{key}", "must be a path string")
        if "quick" in p and not isinstance(p["quick"], bool):
            raise _field("params.quick", "must be true or false")

    @property
    def k_max(self):
        k = self.grids["k_max"]
        return math.inf if k == "inf" else k

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict):
            raise ConfigurationError("configuration must be a JSON object")
        allowed = {"experiment", "channel", "snr_sweep", "grids", "params", "seed", "output"}
        unknown = set(obj) - allowed
        if unknown:
            raise _field(sorted(unknown)[0], "unknown field")
        if "experiment" not in obj:
            raise _field("experiment", "missing")
        return cls(**{k: (json.loads(json.dumps(v)) if isinstance(v, (dict, list)) else v)
                      for k, v in obj.items()})

    def to_dict(self):
        out = {
            "experiment": self.experiment,
            "channel": self.channel,
            "grids": self.grids,
            "params": self.params,
            "seed": self.seed,
        }
        if self.snr_sweep is not None:
            out["snr_sweep"] = self.snr_sweep
        if self.output is not None:
            out["output"] = self.output
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def channel_points(self):
        """``(snr_db, ChannelModel)`` per sweep point (``snr_db`` is ``None`` without a sweep)."""
        if self.snr_sweep is None:
            return [(None, ChannelModel.from_config(self.channel))]
        out = []
        key = "avg_snr_db" if self.channel["snr"]["kind"] == "rayleigh" else "snr_db"
        for db in self.snr_sweep:
            spec = json.loads(json.dumps(self.channel))
            spec["snr"][key] = db
            out.append((db, ChannelModel.from_config(spec)))
        return out


def load_config(path, experiment=None):
    """Read a JSON config; ``experiment`` fills in a missing experiment field."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if isinstance(obj, dict) and experiment is not None:
        obj.setdefault("experiment", experiment)
    return ExperimentConfig.from_dict(obj)
