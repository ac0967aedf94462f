"""Run configuration: a sectioned ``key = value`` file.

Every physical quantity carries its unit in the key name (``_au``, ``_fs``,
``_cm1``); ``mu_tf`` is the area weight in units of 1/t_f. Values are
converted to atomic units on load. Validation errors point at the offending
line.

Example::

    [run]
    experiment = co-oct

    [model]
    B_cm1 = 1.9312
    d_au = 0.044
    j_max = 15
    j_opt = 4
    e_peak_au = 2e-4

    [oct]
    lambda_au = 100
    mu_tf = 0
"""
from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import models
from .local_control import (
    SURROGATE_EPSILON,
    SURROGATE_SEED_AMPLITUDE,
    SURROGATE_STEPS,
    SURROGATE_TF,
)
from .units import cm1_to_au

EXPERIMENTS = ("co-oct", "co-oct-sweep", "surrogate-local")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "co-oct"
    out_dir: str = "out"
    # model (a.u.)
    B_au: float = models.DEFAULT_B_AU
    d_au: float = models.DEFAULT_D_AU
    j_max: int = 15
    j_opt: int = 4
    e_peak_au: float = models.DEFAULT_E_PEAK_AU
    fwhm_fs: float = models.DEFAULT_FWHM_FS
    # grid
    n_steps: int = 2**14
    # optimal control
    lambda_au: float = 100.0
    mu_tf: float = 0.0
    mu_tf_list: tuple[float, ...] = (0.0, 0.25, 1.8, 4.5)
    max_iterations: int = 200
    target_fidelity: float = 0.99
    valid_fidelity: float = 0.99
    dynamics_stride: int = 16
    workers: int = 1
    # local control
    epsilon_au: float = SURROGATE_EPSILON
    mu_au_list: tuple[float, ...] = (0.0, 0.01, 0.05, 0.2)
    local_tf_au: float = SURROGATE_TF
    local_n_steps: int = SURROGATE_STEPS
    seed_amplitude: float = SURROGATE_SEED_AMPLITUDE
    filter_bins: float = 3.0
    local_stride: int = 10

    @property
    def rotor(self) -> models.RotorParams:
        return models.RotorParams(B=self.B_au, d=self.d_au, j_max=self.j_max, j_opt=self.j_opt)

    def resolved(self) -> dict:
        """Flat mapping of every physical and numerical setting, in atomic units.

        The output location is left out so that it does not leak into the
        artifacts themselves.
        """
        d = asdict(self)
        del d["out_dir"]
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


# key -> (RunConfig field, converter to a.u.)
_KEYS: dict[tuple[str, str], tuple[str, type, float]] = {
    ("run", "experiment"): ("experiment", str, 1.0),
    ("run", "out_dir"): ("out_dir", str, 1.0),
    ("run", "workers"): ("workers", int, 1.0),
    ("model", "b_au"): ("B_au", float, 1.0),
    ("model", "b_cm1"): ("B_au", float, cm1_to_au(1.0)),
    ("model", "d_au"): ("d_au", float, 1.0),
    ("model", "j_max"): ("j_max", int, 1.0),
    ("model", "j_opt"): ("j_opt", int, 1.0),
    ("model", "e_peak_au"): ("e_peak_au", float, 1.0),
    ("model", "fwhm_fs"): ("fwhm_fs", float, 1.0),
    ("grid", "n_steps"): ("n_steps", int, 1.0),
    ("oct", "lambda_au"): ("lambda_au", float, 1.0),
    ("oct", "mu_tf"): ("mu_tf", float, 1.0),
    ("oct", "mu_tf_list"): ("mu_tf_list", tuple, 1.0),
    ("oct", "max_iterations"): ("max_iterations", int, 1.0),
    ("oct", "target_fidelity"): ("target_fidelity", float, 1.0),
    ("oct", "valid_fidelity"): ("valid_fidelity", float, 1.0),
    ("oct", "dynamics_stride"): ("dynamics_stride", int, 1.0),
    ("local", "epsilon_au"): ("epsilon_au", float, 1.0),
    ("local", "mu_au_list"): ("mu_au_list", tuple, 1.0),
    ("local", "tf_au"): ("local_tf_au", float, 1.0),
    ("local", "n_steps"): ("local_n_steps", int, 1.0),
    ("local", "seed_amplitude"): ("seed_amplitude", float, 1.0),
    ("local", "filter_bins"): ("filter_bins", float, 1.0),
    ("local", "stride"): ("local_stride", int, 1.0),
}


def _line_index(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def _convert(raw: str, typ, scale: float, where: str):
    try:
        if typ is str:
            return raw.strip()
        if typ is int:
            return int(raw.strip())
        if typ is tuple:
            items = [x for x in re.split(r"[,\s]+", raw.strip()) if x]
            return tuple(float(x) * scale for x in items)
        return float(raw.strip()) * scale
    except ValueError:
        raise ValueError(f"cannot parse {where} = {raw.strip()!r} as {typ.__name__}") from None


def _apply(values: dict, section: str, key: str, raw: str, line, source) -> None:
    spec = _KEYS.get((section, key.lower()))
    if spec is None:
        raise ConfigError(f"unknown key [{section}] {key}", line, source)
    name, typ, scale = spec
    try:
        values[name] = _convert(raw, typ, scale, f"[{section}] {key}")
    except ValueError as exc:
        raise ConfigError(str(exc), line, source) from None


def _validate(cfg: RunConfig, lines, source) -> None:
    def fail(msg, section, *keys):
        line = next((lines[(section, k)] for k in keys if (section, k) in lines), None)
        raise ConfigError(msg, line, source)

    if cfg.experiment not in EXPERIMENTS:
        fail(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {cfg.experiment!r}",
             "run", "experiment")
    if not cfg.B_au > 0:
        fail("rotational constant must be positive", "model", "b_au", "b_cm1")
    if not cfg.d_au > 0:
        fail("dipole moment must be positive", "model", "d_au")
    if not cfg.j_max >= cfg.j_opt >= 1:
        fail("need j_max >= j_opt >= 1", "model", "j_opt", "j_max")
    if not cfg.fwhm_fs > 0:
        fail("pulse width must be positive", "model", "fwhm_fs")
    if cfg.n_steps < 2:
        fail("n_steps must be at least 2", "grid", "n_steps")
    if not cfg.lambda_au > 0:
        fail("lambda_au must be positive", "oct", "lambda_au")
    if cfg.mu_tf < 0 or any(m < 0 for m in cfg.mu_tf_list):
        fail("area weights must be nonnegative", "oct", "mu_tf", "mu_tf_list")
    if not cfg.mu_tf_list:
        fail("mu_tf_list is empty", "oct", "mu_tf_list")
    if cfg.max_iterations < 0:
        fail("max_iterations must be nonnegative", "oct", "max_iterations")
    for key in ("target_fidelity", "valid_fidelity"):
        if not 0.0 <= getattr(cfg, key) <= 1.0:
            fail(f"{key} must lie in [0, 1]", "oct", key)
    if cfg.dynamics_stride < 1:
        fail("dynamics_stride must be positive", "oct", "dynamics_stride")
    if cfg.workers < 1:
        fail("workers must be positive", "run", "workers")
    if cfg.epsilon_au < 0:
        fail("epsilon_au must be nonnegative", "local", "epsilon_au")
    if any(m < 0 for m in cfg.mu_au_list) or not cfg.mu_au_list:
        fail("mu_au_list must be a nonempty list of nonnegative weights", "local", "mu_au_list")
    if not cfg.local_tf_au > 0 or cfg.local_n_steps < 2:
        fail("local grid needs tf_au > 0 and n_steps >= 2", "local", "tf_au", "n_steps")
    if not 0.0 <= cfg.seed_amplitude < 1.0:
        fail("seed_amplitude must lie in [0, 1)", "local", "seed_amplitude")
    if cfg.filter_bins < 0:
        fail("filter_bins must be nonnegative", "local", "filter_bins")
    if cfg.local_stride < 1:
        fail("stride must be positive", "local", "stride")


def parse_config(text: str, overrides: list[str] = (), source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line, source) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from None
    lines = _line_index(text)
    values: dict = {}
    for section in parser.sections():
        sec = section.lower()
        for key, raw in parser.items(section):
            _apply(values, sec, key, raw, lines.get((sec, key.lower())), source)
    for item in overrides:
        m = re.fullmatch(r"\s*([A-Za-z_]+)\.([A-Za-z0-9_]+)\s*=(.*)", item)
        if not m:
            raise ConfigError(f"override {item!r} is not of the form section.key=value",
                              None, "--override")
        _apply(values, m.group(1).lower(), m.group(2), m.group(3), None, "--override")
    cfg = replace(RunConfig(), **values)
    _validate(cfg, lines, source)
    return cfg


def load_config(path: str | Path, overrides: list[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, overrides, source=str(path))
