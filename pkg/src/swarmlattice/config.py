"""Scenario files.

A scenario is a flat YAML mapping. Every length carries an ``_m`` suffix,
speeds ``_mps``, times ``_s`` and tick counts ``_ticks``; ``null`` means
"use the default" (for ``r_c_m`` it means unlimited range). Unknown keys are
rejected so that typos surface as errors instead of silently falling back to
defaults. See the README for the full grammar.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import yaml

from .geometry import LatticeKind, Region, min_connectivity_ratio, shape_from_dict
from .search import STOP_RULES, STRATEGIES

log = logging.getLogger(__name__)

MODES = ("coverage", "shape", "search", "formation")
FORMATION_KEYS = ("offsets_m", "edges", "c0_m", "v_min_mps", "v_max_mps", "u_max",
                  "N", "lambda_vac_m", "Ts_s", "r_c_m")


class ConfigError(ValueError):
    """Invalid scenario; the message starts with the offending field name."""


@dataclass
class ScenarioConfig:
    mode: str = "coverage"
    lattice: str = "to"
    region_min_m: list = field(default_factory=lambda: [-5.0, -5.0, -5.0])
    region_max_m: list = field(default_factory=lambda: [5.0, 5.0, 5.0])
    n_agents: int | None = None  # null: one per covering vertex (coverage/shape)
    n_targets: int = 3
    r_s_m: float = 1.0
    r_c_m: float | None = 3.0
    seed: int = 0
    horizon_ticks: int | None = None
    grid_seed_m: list | None = None
    oracle_occupancy: bool = True
    conflict: str = "random"
    shape: dict | None = None
    strategy: str = "levy-grid"
    stop: str = "all-targets"
    clustered: bool = True
    cluster_sigma_m: float = 1.0
    mobile_targets: bool = False
    target_step_m: float = 0.5
    levy_alpha: float = 2.0
    levy_l_min_m: float | None = None
    normal_sigma_m: float | None = None
    formation_preset: str | None = None
    formation: dict | None = None
    anonymous: bool = False
    spawn_side_m: float = 50.0
    record_every: int = 10

    # ------------------------------------------------------------ io
    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("scenario: expected a mapping at the top level")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"scenario: not valid YAML ({exc})") from exc
        return cls.from_dict(data or {})

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    # ------------------------------------------------------------ checks
    def validate(self) -> list[str]:
        """Raise ``ConfigError`` on bad values; return soft warnings."""
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.mode not in MODES:
            bad("mode", f"must be one of {MODES}, got {self.mode!r}")
        try:
            LatticeKind.parse(self.lattice)
        except Exception:
            bad("lattice", f"unknown lattice {self.lattice!r}")
        for name in ("region_min_m", "region_max_m"):
            v = getattr(self, name)
            if not (isinstance(v, (list, tuple)) and len(v) == 3):
                bad(name, "expected three numbers")
            if not all(isinstance(x, (int, float)) and math.isfinite(x) for x in v):
                bad(name, "coordinates must be finite numbers")
        if any(a >= b for a, b in zip(self.region_min_m, self.region_max_m)):
            bad("region_max_m", "must exceed region_min_m on every axis")
        if not (isinstance(self.r_s_m, (int, float)) and self.r_s_m > 0):
            bad("r_s_m", "must be positive")
        if self.r_c_m is not None and not self.r_c_m > 0:
            bad("r_c_m", "must be positive or null")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", "must be a non-negative integer")
        if self.horizon_ticks is not None and (not isinstance(self.horizon_ticks, int) or self.horizon_ticks < 0):
            bad("horizon_ticks", "must be a non-negative integer or null")
        if self.n_agents is not None and (not isinstance(self.n_agents, int) or self.n_agents < 1):
            bad("n_agents", "must be a positive integer or null")
        if self.n_targets < 0:
            bad("n_targets", "must be non-negative")
        if self.grid_seed_m is not None and len(self.grid_seed_m) != 3:
            bad("grid_seed_m", "expected three numbers or null")
        if self.conflict not in ("random", "lowest-index"):
            bad("conflict", "must be 'random' or 'lowest-index'")
        if self.mode == "shape":
            if self.shape is None:
                bad("shape", "required in shape mode")
            try:
                shape_from_dict(self.shape)
            except Exception as exc:
                bad("shape", str(exc))
        if self.mode == "search":
            if self.strategy not in STRATEGIES:
                bad("strategy", f"must be one of {STRATEGIES}")
            if self.stop not in STOP_RULES:
                bad("stop", f"must be one of {STOP_RULES}")
            if self.strategy == "levy-continuous" and self.stop == "all-visited":
                bad("stop", "off-grid search cannot use the all-visited rule")
            if self.n_agents is None:
                bad("n_agents", "required in search mode")
            if not 1 < self.levy_alpha < 3:
                bad("levy_alpha", "must lie in (1, 3)")
            if self.levy_l_min_m is not None and not self.levy_l_min_m > 0:
                bad("levy_l_min_m", "must be positive or null")
            if self.normal_sigma_m is not None and not self.normal_sigma_m > 0:
                bad("normal_sigma_m", "must be positive or null")
        if self.mode == "formation":
            from .formation import FORMATION_PRESETS
            if self.formation_preset is None and not self.formation:
                bad("formation_preset", "give a preset name or a formation mapping")
            if self.formation_preset is not None and self.formation_preset not in FORMATION_PRESETS:
                bad("formation_preset", f"must be one of {sorted(FORMATION_PRESETS)}")
            extra = sorted(set(self.formation or {}) - set(FORMATION_KEYS))
            if extra:
                bad(f"formation.{extra[0]}", "unknown field")
            if self.record_every < 0:
                bad("record_every", "must be non-negative")
            try:
                self.formation_scenario().config.validate(self.anonymous)
            except ValueError as exc:
                bad("formation", str(exc))
        return self.warnings()

    def warnings(self) -> list[str]:
        out = []
        if self.mode in ("coverage", "shape", "search") and self.r_c_m is not None:
            need = min_connectivity_ratio(self.lattice) * self.r_s_m
            if self.r_c_m < need:
                out.append(f"r_c_m = {self.r_c_m} is below the {self.lattice} connectivity bound "
                           f"{need:.4f}; neighbouring vertices may be out of radio range")
        return out

    # ------------------------------------------------------------ builders
    @property
    def region(self) -> Region:
        return Region(tuple(float(x) for x in self.region_min_m), tuple(float(x) for x in self.region_max_m))

    @property
    def r_c(self) -> float:
        return float("inf") if self.r_c_m is None else float(self.r_c_m)

    def formation_scenario(self):
        from .formation import FORMATION_PRESETS, FormationConfig, FormationScenario
        if self.formation_preset is not None:
            sc = FORMATION_PRESETS[self.formation_preset]()
        else:
            sc = FormationScenario(FormationConfig(self.formation.get("offsets_m", [[0, 0, 0]])))
            sc.anonymous = self.anonymous
            sc.name = "custom"
        cfg = sc.config
        over = dict(self.formation or {})
        mapping = {"offsets_m": "offsets", "edges": "edges", "c0_m": "c0", "u_max": "u_max", "N": "N",
                   "lambda_vac_m": "lambda_vac", "Ts_s": "Ts", "r_c_m": "r_c"}
        for key, attr in mapping.items():
            if key in over:
                setattr(cfg, attr, over[key])
        if "v_min_mps" in over or "v_max_mps" in over:
            cfg.v_bounds = (over.get("v_min_mps", cfg.v_bounds[0]), over.get("v_max_mps", cfg.v_bounds[1]))
        cfg.__post_init__()
        sc.anonymous = sc.anonymous or self.anonymous
        sc.seed = self.seed
        sc.spawn_side = self.spawn_side_m
        sc.record_every = self.record_every
        if self.horizon_ticks is not None:
            sc.duration_s = self.horizon_ticks * cfg.Ts
        return sc
