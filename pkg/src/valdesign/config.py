"""Simulation configuration files.

A config is a TOML document with one ``[simulation]`` table. Four keys accept
either a scalar or a list -- ``cov_structure``, ``sigma_u``, ``n_validate``,
and ``shared_scenario`` -- and a list turns the run into a grid over the
cross product, enumerated in that key order. Setting k of a grid runs with
the derived seed ``derive_seed(seed, "setting", k)`` so settings are
independent experiments; unknown keys are hard errors naming the key path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .designs import DESIGN_KINDS
from .errors import ConfigError
from .randvar import derive_seed
from .sim_engine import (
    COV_STRUCTURES,
    SEPARATE,
    SHARED,
    SHARED_SCENARIOS,
    SimConfig,
)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

_SCALAR_KEYS = {
    "seed": int,
    "replicates": int,
    "n_total": int,
    "p_exposures": int,
    "z_prob": float,
    "outcome_mode": str,
    "ets_target": int,
}
_AXIS_KEYS = ("cov_structure", "sigma_u", "n_validate", "shared_scenario")
_OTHER_KEYS = {"designs", "shared_betas", "custom_sigma_x"}
_ALL_KEYS = set(_SCALAR_KEYS) | set(_AXIS_KEYS) | _OTHER_KEYS

_REQUIRED = ("seed", "n_validate", "sigma_u")

_DESIGN_ALIASES = {"srs": "srs", "ets-var": "ets-var", "ets-pc1": "ets-pc1",
                   "ets_var": "ets-var", "ets_pc1": "ets-pc1"}


@dataclass(frozen=True)
class SimSetting:
    """One fully resolved grid cell."""

    index: int
    label: str
    axes: dict
    config: SimConfig


@dataclass(frozen=True)
class SimPlan:
    master_seed: int
    settings: tuple[SimSetting, ...]
    resolved: dict


def load_sim_plan(path, seed_override: int | None = None) -> SimPlan:
    with open(path, "rb") as handle:
        payload = tomllib.load(handle)
    return parse_sim_plan(payload, seed_override=seed_override)


def _as_list(value):
    return list(value) if isinstance(value, list) else [value]


def parse_sim_plan(payload: dict, seed_override: int | None = None) -> SimPlan:
    if set(payload) != {"simulation"}:
        unexpected = sorted(set(payload) - {"simulation"})
        if unexpected:
            raise ConfigError(f"unknown top-level keys: {unexpected}")
        raise ConfigError("config must contain a [simulation] table")
    sim = dict(payload["simulation"])
    unknown = sorted(set(sim) - _ALL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {['simulation.' + k for k in unknown]}")
    for key in _REQUIRED:
        if key not in sim:
            raise ConfigError(f"missing required key simulation.{key}")

    for key, kind in _SCALAR_KEYS.items():
        if key in sim:
            value = sim[key]
            if kind is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, kind) or isinstance(value, bool):
                raise ConfigError(f"simulation.{key} must be {kind.__name__}, got {value!r}")
            sim[key] = value

    master_seed = int(seed_override if seed_override is not None else sim["seed"])
    outcome_mode = sim.get("outcome_mode", SEPARATE)
    if outcome_mode not in (SEPARATE, SHARED):
        raise ConfigError(f"simulation.outcome_mode must be '{SEPARATE}' or '{SHARED}'")

    designs = []
    for name in sim.get("designs", ["srs", "ets-var", "ets-pc1"]):
        if name not in _DESIGN_ALIASES:
            raise ConfigError(f"simulation.designs contains unknown design {name!r}; "
                              f"valid: {sorted(set(_DESIGN_ALIASES))}")
        designs.append(_DESIGN_ALIASES[name])
    for kind in designs:
        assert kind in DESIGN_KINDS

    cov_values = _as_list(sim.get("cov_structure", "equal_dependence"))
    for cov in cov_values:
        if cov not in COV_STRUCTURES:
            raise ConfigError(f"simulation.cov_structure value {cov!r} not one of {COV_STRUCTURES}")
    sigma_values = [float(v) for v in _as_list(sim["sigma_u"])]
    n_values = [int(v) for v in _as_list(sim["n_validate"])]

    scenario_values: list
    if outcome_mode == SHARED:
        if "shared_scenario" in sim and "shared_betas" in sim:
            raise ConfigError("give simulation.shared_scenario or simulation.shared_betas, not both")
        if "shared_scenario" in sim:
            scenario_values = _as_list(sim["shared_scenario"])
            for s in scenario_values:
                if s not in SHARED_SCENARIOS:
                    raise ConfigError(
                        f"simulation.shared_scenario value {s!r} not one of {sorted(SHARED_SCENARIOS)}"
                    )
        elif "shared_betas" in sim:
            scenario_values = [tuple(float(b) for b in sim["shared_betas"])]
        else:
            raise ConfigError("shared outcome mode needs shared_scenario or shared_betas")
    else:
        if "shared_scenario" in sim or "shared_betas" in sim:
            raise ConfigError("shared_scenario/shared_betas apply only when outcome_mode = 'shared'")
        scenario_values = [None]

    custom = sim.get("custom_sigma_x")
    if custom is not None:
        if "matrix" not in custom or set(custom) != {"matrix"}:
            raise ConfigError("simulation.custom_sigma_x must contain exactly the key 'matrix'")
        custom = tuple(tuple(float(v) for v in row) for row in custom["matrix"])

    settings = []
    grid = itertools.product(cov_values, sigma_values, n_values, scenario_values)
    for index, (cov, sigma_u, n_validate, scenario) in enumerate(grid):
        axes = {"cov_structure": cov, "sigma_u": sigma_u, "n_validate": n_validate}
        if outcome_mode == SHARED:
            if isinstance(scenario, str):
                axes["shared_scenario"] = scenario
                betas = SHARED_SCENARIOS[scenario]
            else:
                axes["shared_scenario"] = "custom"
                betas = scenario
        else:
            betas = None
        label_bits = [f"cov={cov}", f"sigma_u={sigma_u:g}", f"n={n_validate}"]
        if outcome_mode == SHARED:
            label_bits.append(f"scenario={axes['shared_scenario']}")
        config = SimConfig(
            n_validate=n_validate,
            sigma_u=sigma_u,
            seed=derive_seed(master_seed, "setting", index),
            n_total=sim.get("n_total", 1000),
            p_exposures=sim.get("p_exposures", 5),
            z_prob=sim.get("z_prob", 0.3),
            cov_structure=cov,
            custom_sigma_x=custom if cov == "custom" else None,
            outcome_mode=outcome_mode,
            shared_betas=betas,
            replicates=sim.get("replicates", 1000),
            designs=tuple(designs),
            ets_target=sim.get("ets_target", 1),
        )
        settings.append(SimSetting(index=index, label=" ".join(label_bits), axes=axes, config=config))

    resolved = {
        "seed": master_seed,
        "replicates": sim.get("replicates", 1000),
        "n_total": sim.get("n_total", 1000),
        "p_exposures": sim.get("p_exposures", 5),
        "z_prob": sim.get("z_prob", 0.3),
        "outcome_mode": outcome_mode,
        "designs": designs,
        "ets_target": sim.get("ets_target", 1),
        "cov_structure": cov_values,
        "sigma_u": sigma_values,
        "n_validate": n_values,
    }
    if outcome_mode == SHARED:
        resolved["shared_scenario"] = [s.axes["shared_scenario"] for s in settings[: len(scenario_values)]]
        if "shared_betas" in sim:
            resolved["shared_betas"] = list(sim["shared_betas"])
    if custom is not None:
        resolved["custom_sigma_x"] = {"matrix": [list(row) for row in custom]}
    return SimPlan(master_seed=master_seed, settings=tuple(settings), resolved=resolved)
