"""Experiment configuration: strict schema, validation, canonical hashing.

Configs are YAML files with nested sections.  Unknown keys are errors, not
warnings: a typo in a physics parameter must never silently fall back to a
default.  The canonical (defaults-filled) dictionary is hashed and the hash
embedded in every output file.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _typed(section: str, raw: dict, spec: dict) -> dict:
    """Validate one mapping against {key: (type(s), default)}; None = required."""
    _require(isinstance(raw, dict), f"section '{section}' must be a mapping")
    unknown = set(raw) - set(spec)
    _require(not unknown,
             f"unknown key(s) {sorted(unknown)} in section '{section}'")
    out = {}
    for key, (types, default) in spec.items():
        if key in raw and raw[key] is not None:
            val = raw[key]
            if types is float and isinstance(val, int):
                val = float(val)
            _require(isinstance(val, types) if not isinstance(types, tuple)
                     else isinstance(val, types),
                     f"'{section}.{key}' has wrong type {type(val).__name__}")
            out[key] = val
        else:
            _require(default is not ...,
                     f"missing required key '{section}.{key}'")
            out[key] = default
    return out


def _float_list(section: str, key: str, val) -> list[float]:
    _require(isinstance(val, list) and len(val) > 0 and
             all(isinstance(x, (int, float)) for x in val),
             f"'{section}.{key}' must be a non-empty list of numbers")
    return [float(x) for x in val]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, defaults-filled configuration with a stable hash."""

    raw: dict

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def model(self) -> dict:
        return self.raw["model"]

    @property
    def subspace_m(self):
        return self.raw["subspace"]["M"] if self.raw["subspace"] else None

    @property
    def grid(self) -> dict:
        return self.raw["grid"]

    @property
    def estimator(self) -> dict:
        return self.raw["estimator"]

    @property
    def dynamics(self) -> dict:
        return self.raw["dynamics"]

    @property
    def noise(self) -> dict:
        return self.raw["noise"]

    @property
    def windows(self) -> dict:
        return self.raw["windows"]

    @property
    def energy_grid(self) -> dict:
        return self.raw["energy_grid"]

    @property
    def thermo(self) -> dict:
        return self.raw["thermo"]

    @property
    def noise_sweep(self):
        return self.raw["noise_sweep"]

    @property
    def vardyn(self):
        return self.raw["vardyn"]

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = json.loads(json.dumps(self.raw))
        raw["seed"] = int(seed)
        return ExperimentConfig(raw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    _require(path.exists(), f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return validate_config(raw)


def validate_config(raw) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config root must be a mapping")
    top_spec = {
        "schema": (int, SCHEMA_VERSION),
        "seed": (int, 0),
        "model": (dict, ...),
        "subspace": (dict, None),
        "grid": (dict, ...),
        "estimator": (dict, {}),
        "dynamics": (dict, {}),
        "noise": (dict, {}),
        "windows": (dict, {}),
        "energy_grid": (dict, {}),
        "thermo": (dict, {}),
        "noise_sweep": (dict, None),
        "vardyn": (dict, None),
    }
    top = _typed("<root>", raw, top_spec)
    _require(top["schema"] == SCHEMA_VERSION,
             f"unsupported schema version {top['schema']}")

    model = top["model"]
    _require("kind" in model, "missing required key 'model.kind'")
    kind = model.get("kind")
    if kind == "heisenberg":
        model = _typed("model", model, {
            "kind": (str, ...), "n": (int, ...), "J": (float, 1.0),
            "h": (float, 0.0), "disorder_seed": (int, 0),
            "rescale": (bool, True)})
        _require(model["n"] >= 2, "'model.n' must be at least 2")
    elif kind == "hubbard":
        model = _typed("model", model, {
            "kind": (str, ...), "rows": (int, ...), "cols": (int, ...),
            "J": (float, 1.0), "U": (float, 0.0), "rescale": (bool, True)})
        _require(model["rows"] >= 1 and model["cols"] >= 1,
                 "lattice dimensions must be positive")
    elif kind == "single_z":
        model = _typed("model", model, {"kind": (str, ...),
                                        "rescale": (bool, False)})
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    top["model"] = model

    if top["subspace"] is not None:
        top["subspace"] = _typed("subspace", top["subspace"],
                                 {"M": (int, ...)})
        _require(top["subspace"]["M"] >= 0, "'subspace.M' must be >= 0")

    grid = _typed("grid", top["grid"], {"dt": (float, ...), "n_t": (int, ...)})
    _require(grid["dt"] > 0 and grid["n_t"] >= 1,
             "'grid' needs dt > 0 and n_t >= 1")
    top["grid"] = grid

    est = _typed("estimator", top["estimator"], {
        "kind": (str, "exact"), "sampler": (str, "bitflip"),
        "layers": (int, 0), "n_shots": (int, 1024), "n_reuse": (int, 1),
        "analytic": (bool, False)})
    _require(est["kind"] in ("exact", "dqc1", "sample"),
             f"unknown estimator kind {est['kind']!r}")
    _require(est["sampler"] in ("bitflip", "euler", "haar", "layered",
                                "hamming"),
             f"unknown sampler {est['sampler']!r}")
    _require(est["n_shots"] >= 1 and est["n_reuse"] >= 1,
             "shot counts must be positive")
    _require(est["n_shots"] % est["n_reuse"] == 0,
             "'estimator.n_shots' must be a multiple of 'estimator.n_reuse'")
    top["estimator"] = est

    dyn = _typed("dynamics", top["dynamics"], {
        "kind": (str, "exact"), "order": (int, 1), "dt": (float, 0.0)})
    _require(dyn["kind"] in ("exact", "trotter"),
             f"unknown dynamics kind {dyn['kind']!r}")
    if dyn["kind"] == "trotter":
        _require(dyn["dt"] > 0, "'dynamics.dt' must be positive for trotter")
        _require(dyn["order"] in (1, 2), "'dynamics.order' must be 1 or 2")
        ratio = grid["dt"] / dyn["dt"]
        _require(abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1,
                 "'grid.dt' must be an integer multiple of 'dynamics.dt'")
    top["dynamics"] = dyn

    noise = _typed("noise", top["noise"], {
        "kind": (str, "none"), "xi": (float, 0.0), "lambda0": (float, 0.0),
        "table": (str, None)})
    _require(noise["kind"] in ("none", "depol", "lindblad"),
             f"unknown noise kind {noise['kind']!r}")
    if noise["kind"] != "none":
        _require(dyn["kind"] == "trotter",
                 "noise models require trotter dynamics")
        _require(est["kind"] == "dqc1",
                 "noise models run on the dqc1 density-matrix path")
    top["noise"] = noise

    win = top["windows"]
    win = _typed("windows", win, {"kind": (str, "gaussian"),
                                  "sigmas": (list, [10.0])})
    _require(win["kind"] in ("gaussian", "exponential", "none"),
             f"unknown window kind {win['kind']!r}")
    win["sigmas"] = _float_list("windows", "sigmas", win["sigmas"])
    _require(all(s > 0 for s in win["sigmas"]),
             "window widths must be positive")
    top["windows"] = win

    eg = _typed("energy_grid", top["energy_grid"], {
        "n_points": (int, 1024), "span": (float, None)})
    _require(eg["n_points"] >= 8, "'energy_grid.n_points' too small")
    top["energy_grid"] = eg

    th = top["thermo"]
    th = _typed("thermo", th, {"temperatures": (list, None),
                               "betas": (list, None),
                               "mu": (list, None),
                               "internal_energy": (bool, False)})
    _require(not (th["temperatures"] and th["betas"]),
             "give either 'thermo.temperatures' or 'thermo.betas', not both")
    if th["temperatures"] is not None:
        th["temperatures"] = _float_list("thermo", "temperatures",
                                         th["temperatures"])
        _require(all(t > 0 for t in th["temperatures"]),
                 "temperatures must be positive")
    if th["betas"] is not None:
        th["betas"] = _float_list("thermo", "betas", th["betas"])
        _require(all(b >= 0 for b in th["betas"]), "betas must be >= 0")
    if th["mu"] is not None:
        th["mu"] = _float_list("thermo", "mu", th["mu"])
        _require(est["kind"] == "exact" and top["subspace"] is None,
                 "grand-canonical sweeps need estimator 'exact' and no "
                 "subspace restriction")
    top["thermo"] = th

    if top["noise_sweep"] is not None:
        ns = _typed("noise_sweep", top["noise_sweep"], {
            "xi": (list, ...), "sigma_fixed": (float, ...),
            "sigma_scan": (list, ...), "exponential_scan": (list, None)})
        ns["xi"] = _float_list("noise_sweep", "xi", ns["xi"])
        ns["sigma_scan"] = _float_list("noise_sweep", "sigma_scan",
                                       ns["sigma_scan"])
        if ns["exponential_scan"] is not None:
            ns["exponential_scan"] = _float_list(
                "noise_sweep", "exponential_scan", ns["exponential_scan"])
        _require(dyn["kind"] == "trotter",
                 "the noise sweep needs trotter dynamics")
        top["noise_sweep"] = ns

    if top["vardyn"] is not None:
        vd = _typed("vardyn", top["vardyn"], {
            "n_states": (int, 4), "layers": (int, 4), "n_steps": (int, ...),
            "dt": (float, ...), "optimizer": (str, "covar"),
            "order": (int, 2), "max_iters": (int, 120),
            "lambda0": (list, None), "window_sigma": (float, ...),
            "shots_per_step": (int, 200), "table": (str, None)})
        _require(vd["optimizer"] in ("covar", "gradient"),
                 f"unknown optimizer {vd['optimizer']!r}")
        if vd["lambda0"] is not None:
            vd["lambda0"] = _float_list("vardyn", "lambda0", vd["lambda0"])
        _require(model["kind"] == "heisenberg" and not model["rescale"],
                 "variational runs expect an unrescaled heisenberg model")
        top["vardyn"] = vd

    if noise["table"]:
        _require(Path(noise["table"]).exists(),
                 f"gamma table {noise['table']} does not exist")
    if top["vardyn"] and top["vardyn"]["table"]:
        _require(Path(top["vardyn"]["table"]).exists(),
                 f"gamma table {top['vardyn']['table']} does not exist")

    return ExperimentConfig(top)
