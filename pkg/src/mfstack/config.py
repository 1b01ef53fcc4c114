"""Experiment configuration: defaults, config files, presets, scaling.

A configuration is parsed or constructed in *raw* (paper-scale) form and
then resolved: the desk preset divides iteration counts by ten, halves
network widths of 32 or more (hidden layers; for operator networks the
latent width too), and shrinks operator-network dataset and batch sizes
by ten.  Snapshots always store the raw form plus the scale flag so a
replay resolves to the identical effective configuration.

File format: line-oriented ``key = value`` pairs, ``#`` comments, and
optional ``[level N]`` sections that override the annealed equation
parameter at one level.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .problems import PROBLEM_IDS, make_problem
from .training import LrSchedule

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "parse_config_text",
    "load_config_file",
    "preset_path",
    "PRESET_NAMES",
]


class ConfigError(ValueError):
    pass


_INT_LIST_KEYS = {
    "sf_network", "nl_network", "lin_network",
    "sf_branch", "sf_trunk", "nl_branch", "nl_trunk",
    "lin_branch", "lin_trunk",
}
_FLOAT_LIST_KEYS = {"schedule"}
_LR_KEYS = {"sf_lr", "mf_lr"}
_INT_KEYS = {"levels", "seed", "sf_iterations", "mf_iterations",
             "residual_batch", "bc_batch", "ic_batch", "n_train", "n_test",
             "ntk_period", "ntk_subsample"}
_FLOAT_KEYS = {"sf_lambda_ic", "sf_lambda_bc", "sf_lambda_r",
               "mf_lambda_ic", "mf_lambda_bc", "mf_lambda_r"}
_BOOL_KEYS = {"ntk", "transfer"}
_STR_KEYS = {"problem", "scale", "activation"}
_ALL_KEYS = (_INT_LIST_KEYS | _FLOAT_LIST_KEYS | _LR_KEYS | _INT_KEYS
             | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS)


@dataclass
class ExperimentConfig:
    problem: str
    levels: int = 0
    seed: int = 0
    scale: str = "paper"
    activation: str = "tanh"
    transfer: bool = True

    sf_network: list = None
    nl_network: list = None
    lin_network: list = None

    sf_branch: list = None
    sf_trunk: list = None
    nl_branch: list = None
    nl_trunk: list = None
    lin_branch: list = None
    lin_trunk: list = None

    sf_iterations: int = 0
    mf_iterations: int = 0
    sf_lr: tuple = (1e-3, 2000.0, 0.99)
    mf_lr: tuple = (1e-3, 2000.0, 0.99)

    sf_lambda_ic: float = 1.0
    sf_lambda_bc: float = 1.0
    sf_lambda_r: float = 1.0
    mf_lambda_ic: float = 1.0
    mf_lambda_bc: float = 1.0
    mf_lambda_r: float = 1.0

    residual_batch: int = 0
    bc_batch: int = 0
    ic_batch: int = None

    n_train: int = 0
    n_test: int = 0

    ntk: bool = False
    ntk_period: int = 1000
    ntk_subsample: int = 200

    schedule: list = None
    level_overrides: dict = field(default_factory=dict)
    resolved: bool = False

    # -- derived views used by the trainer --------------------------------

    def batch_sizes(self):
        sizes = {"residual": self.residual_batch, "bc": self.bc_batch}
        sizes["ic"] = self.bc_batch if self.ic_batch is None else self.ic_batch
        return sizes

    def weights(self, level_index):
        if level_index == 0:
            return {"ic": self.sf_lambda_ic, "bc": self.sf_lambda_bc,
                    "r": self.sf_lambda_r}
        return {"ic": self.mf_lambda_ic, "bc": self.mf_lambda_bc,
                "r": self.mf_lambda_r}

    def lr_schedule(self, level_index):
        a, b, c = self.sf_lr if level_index == 0 else self.mf_lr
        return LrSchedule(a, b, c)

    def anneal_entries(self):
        problem = make_problem(self.problem)
        key = problem.anneal_key
        if key is None:
            if self.schedule:
                raise ConfigError(
                    f"problem '{self.problem}' has no annealable parameter")
            entries = [dict(problem.default_eq_params)]
        else:
            values = self.schedule or [problem.default_eq_params[key]]
            entries = [{key: float(v)} for v in values]
        n = self.levels + 1
        while len(entries) < n:
            entries.append(dict(entries[-1]))
        for idx, override in self.level_overrides.items():
            if idx < n:
                entries[idx] = {k: float(v) for k, v in override.items()}
        return entries[:n]

    def ntk_dict(self):
        return {"period": self.ntk_period, "subsample": self.ntk_subsample}

    # -- validation and resolution ----------------------------------------

    def validate(self):
        if self.problem not in PROBLEM_IDS:
            raise ConfigError(
                f"unknown problem '{self.problem}'; choose one of "
                + ", ".join(PROBLEM_IDS))
        if self.scale not in ("paper", "desk"):
            raise ConfigError(f"unknown scale '{self.scale}' (paper or desk)")
        if self.levels < 0:
            raise ConfigError("levels must be >= 0")
        problem = make_problem(self.problem)
        if problem.kind == "pinn":
            for key in ("sf_network",):
                if not getattr(self, key):
                    raise ConfigError(f"missing key '{key}' for {self.problem}")
            if self.levels > 0 and (not self.nl_network or not self.lin_network):
                raise ConfigError("stacking needs nl_network and lin_network")
            if self.sf_network[0] != problem.coord_dim:
                raise ConfigError(
                    f"sf_network input width {self.sf_network[0]} does not match "
                    f"problem coordinate dim {problem.coord_dim}")
            if self.sf_network[-1] != problem.output_dim:
                raise ConfigError(
                    f"sf_network output width {self.sf_network[-1]} does not match "
                    f"problem output dim {problem.output_dim}")
            if self.levels > 0:
                want_nl = problem.coord_dim + problem.output_dim
                if self.nl_network[0] != want_nl:
                    raise ConfigError(
                        f"nl_network input width {self.nl_network[0]} should be "
                        f"{want_nl} (coords + low-fidelity outputs)")
                if self.lin_network[0] != problem.output_dim:
                    raise ConfigError(
                        f"lin_network input width {self.lin_network[0]} should be "
                        f"{problem.output_dim}")
        else:
            for key in ("sf_branch", "sf_trunk"):
                if not getattr(self, key):
                    raise ConfigError(f"missing key '{key}' for {self.problem}")
            if self.levels > 0 and not (self.nl_branch and self.nl_trunk
                                        and self.lin_branch and self.lin_trunk):
                raise ConfigError("stacking needs nl/lin branch and trunk sizes")
            if self.sf_branch[0] != problem.n_sensors:
                raise ConfigError(
                    f"sf_branch input width {self.sf_branch[0]} does not match "
                    f"sensor count {problem.n_sensors}")
            if self.levels > 0 and self.nl_branch[0] != problem.n_sensors + 1:
                raise ConfigError(
                    f"nl_branch input width {self.nl_branch[0]} should be "
                    f"{problem.n_sensors + 1} (sensors + low-fidelity value)")
            if self.n_train <= 0:
                raise ConfigError("n_train must be positive for operator problems")
        if self.sf_iterations < 0 or self.mf_iterations < 0:
            raise ConfigError("iteration counts must be >= 0")
        if self.residual_batch <= 0:
            raise ConfigError("residual_batch must be positive")
        return self

    def resolve(self):
        """Effective configuration with the scale preset applied."""
        cfg = replace(self, resolved=True)
        cfg.level_overrides = dict(self.level_overrides)
        if self.scale == "desk":
            cfg.sf_iterations = max(self.sf_iterations // 10, 1)
            cfg.mf_iterations = max(self.mf_iterations // 10, 1)
            for key in _INT_LIST_KEYS:
                sizes = getattr(self, key)
                if not sizes:
                    continue
                sizes = list(sizes)
                hidden = slice(1, -1) if key.endswith("_network") else slice(1, None)
                idx = range(*hidden.indices(len(sizes)))
                for i in idx:
                    if sizes[i] >= 32:
                        sizes[i] = sizes[i] // 2
                setattr(cfg, key, sizes)
            if make_problem(self.problem).kind == "deeponet":
                cfg.n_train = max(self.n_train // 10, 1)
                cfg.n_test = max(self.n_test // 10, 1)
                cfg.residual_batch = max(self.residual_batch // 10, 1)
                cfg.bc_batch = max(self.bc_batch // 10, 1)
                if self.ic_batch is not None:
                    cfg.ic_batch = max(self.ic_batch // 10, 1)
        cfg.validate()
        return cfg

    # -- serialization ------------------------------------------------------

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name in ("level_overrides", "resolved"):
                continue
            val = getattr(self, f.name)
            if val is None:
                continue
            if f.name in _INT_LIST_KEYS or f.name in _FLOAT_LIST_KEYS:
                txt = ",".join(repr(v) if isinstance(v, float) else str(v)
                               for v in val)
            elif f.name in _LR_KEYS:
                txt = ",".join(repr(float(v)) for v in val)
            elif f.name in _BOOL_KEYS:
                txt = "true" if val else "false"
            elif isinstance(val, float):
                txt = repr(val)
            else:
                txt = str(val)
            lines.append(f"{f.name} = {txt}")
        for idx in sorted(self.level_overrides):
            lines.append(f"[level {idx}]")
            for k, v in sorted(self.level_overrides[idx].items()):
                lines.append(f"{k} = {v!r}")
        return "\n".join(lines) + "\n"

    def save_snapshot(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key in _INT_LIST_KEYS:
            return [int(v) for v in raw.split(",") if v.strip()]
        if key in _FLOAT_LIST_KEYS:
            return [float(v) for v in raw.split(",") if v.strip()]
        if key in _LR_KEYS:
            parts = [float(v) for v in raw.split(",")]
            if len(parts) != 3:
                raise ValueError("need three values (base, steps, rate)")
            return tuple(parts)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError("expected true/false")
        return raw
    except ValueError as err:
        raise ConfigError(f"bad value for key '{key}': {raw} ({err})") from err


def parse_config_text(text, base=None):
    """Parse ``key = value`` lines into an ExperimentConfig.

    ``base`` supplies defaults (a preset); file keys override it.
    Unknown keys are rejected by name.
    """
    values = {}
    overrides = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            inner = line[1:-1].strip()
            parts = inner.split()
            if len(parts) != 2 or parts[0] != "level" or not parts[1].isdigit():
                raise ConfigError(f"line {lineno}: bad section '{line}'")
            section = int(parts[1])
            overrides.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
        key, _, raw = line.partition("=")
        key = key.strip()
        if section is not None:
            if key not in ("c", "nu"):
                raise ConfigError(
                    f"line {lineno}: unknown level-section key '{key}'")
            try:
                overrides[section][key] = float(raw)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for '{key}': {raw}")
            continue
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        values[key] = _parse_value(key, raw)

    if base is None:
        if "problem" not in values:
            raise ConfigError("config must name a problem")
        cfg = default_config(values["problem"])
    else:
        cfg = replace(base)
        cfg.level_overrides = dict(base.level_overrides)
    for key, val in values.items():
        setattr(cfg, key, val)
    merged = dict(cfg.level_overrides)
    merged.update(overrides)
    cfg.level_overrides = merged
    return cfg


def load_config_file(path, base=None):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)


# ---------------------------------------------------------------------------
# paper-scale defaults (Appendix tables)


def default_config(problem_id, case=None):
    if problem_id == "pendulum":
        return ExperimentConfig(
            problem="pendulum", levels=10, activation="swish",
            sf_network=[1, 100, 100, 100, 2],
            nl_network=[3, 50, 50, 50, 50, 50, 2],
            lin_network=[2, 20, 2],
            sf_iterations=400000, mf_iterations=100000,
            sf_lr=(1e-3, 2000.0, 0.99), mf_lr=(1e-3, 2000.0, 0.99),
            sf_lambda_ic=20.0, sf_lambda_r=1.0,
            mf_lambda_ic=1.0, mf_lambda_r=1.0,
            residual_batch=200, bc_batch=1,
        )
    if problem_id == "multiscale":
        return ExperimentConfig(
            problem="multiscale", levels=10, activation="swish",
            sf_network=[1, 32, 32, 32, 1],
            nl_network=[2, 16, 16, 16, 16, 1],
            lin_network=[1, 5, 1],
            sf_iterations=400000, mf_iterations=200000,
            sf_lr=(1e-3, 2000.0, 0.99), mf_lr=(1e-3, 2000.0, 0.99),
            sf_lambda_ic=1.0, sf_lambda_r=10.0,
            mf_lambda_ic=1.0, mf_lambda_r=10.0,
            residual_batch=400, bc_batch=1,
        )
    if problem_id == "wave":
        schedules = {
            None: ([2.0], 14),
            "case1": ([2.0], 14),
            "case2": ([1.0, 1.25, 1.5, 1.75, 2.0], 12),
            "case3": ([1.0, 2.0], 10),
            "case4": ([1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 4.0], 15),
        }
        if case not in schedules:
            raise ConfigError(f"unknown wave case '{case}'")
        schedule, levels = schedules[case]
        return ExperimentConfig(
            problem="wave", levels=levels, activation="tanh",
            sf_network=[2, 100, 100, 100, 100, 100, 1],
            nl_network=[3, 100, 100, 100, 100, 100, 1],
            lin_network=[1, 1],
            sf_iterations=400000, mf_iterations=10000,
            sf_lr=(1e-4, 2000.0, 0.99), mf_lr=(5e-4, 2000.0, 0.99),
            sf_lambda_ic=20.0, sf_lambda_bc=1.0, sf_lambda_r=1.0,
            mf_lambda_ic=20.0, mf_lambda_bc=1.0, mf_lambda_r=1.0,
            residual_batch=300, bc_batch=300,
            schedule=schedule,
        )
    if problem_id == "burgers-deeponet":
        variants = {
            None: ("fixed", False),
            "fixed": ("fixed", False),
            "changing": ("changing", False),
            "ntk_fixed": ("fixed", True),
            "ntk_changing": ("changing", True),
        }
        if case not in variants:
            raise ConfigError(f"unknown burgers case '{case}'")
        nu_mode, use_ntk = variants[case]
        schedule = [1e-4] if nu_mode == "fixed" else [0.01, 0.001, 1e-4]
        return ExperimentConfig(
            problem="burgers-deeponet",
            levels=6 if use_ntk else 10,
            activation="tanh",
            sf_branch=[101, 100, 100, 100, 100, 100, 100, 100],
            sf_trunk=[2, 100, 100, 100, 100, 100, 100, 100],
            nl_branch=[102, 100, 100, 100, 100, 100, 100, 100],
            nl_trunk=[2, 100, 100, 100, 100, 100, 100, 100],
            lin_branch=[1, 20],
            lin_trunk=[2, 20],
            sf_iterations=200000 if nu_mode == "fixed" else 100000,
            mf_iterations=200000 if use_ntk else 100000,
            sf_lr=(1e-3, 5000.0, 0.9), mf_lr=(5e-4, 5000.0, 0.95),
            sf_lambda_ic=10.0, sf_lambda_bc=10.0, sf_lambda_r=1.0,
            mf_lambda_ic=10.0, mf_lambda_bc=10.0, mf_lambda_r=1.0,
            residual_batch=10000, bc_batch=10000,
            n_train=1000, n_test=100,
            ntk=use_ntk, schedule=schedule,
        )
    raise ConfigError(
        f"unknown problem '{problem_id}'; choose one of " + ", ".join(PROBLEM_IDS))


PRESET_NAMES = (
    "table4_pendulum_sf",
    "table4_pendulum",
    "table4_multiscale_sf",
    "table4_multiscale",
    "table4_wave_sf",
    "table4_wave_case1",
    "table4_wave_case2",
    "table4_wave_case3",
    "table4_wave_case4",
    "table5_burgers_sf",
    "table5_burgers_fixed",
    "table5_burgers_changing",
    "table5_burgers_ntk_fixed",
    "table5_burgers_ntk_changing",
)


def preset_path(name):
    if name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset '{name}'; available: " + ", ".join(PRESET_NAMES))
    return os.path.join(os.path.dirname(__file__), "presets", name + ".cfg")
