"""Run configuration: TOML schema, validation and model construction."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cellproblem import LatticeSpec, boundary_width, directions
from .energy import CouplingModel, Kernel, ModelError, validate_model

EXPERIMENTS = ("phi", "sweep", "translation", "subadd", "gamma", "truncation", "lattice-audit")


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "": {"experiment", "jobs", "out_dir", "timing", "lattice", "coupling", "cell", "translation", "truncation", "gamma", "audit"},
    "lattice": {"model", "dim", "a", "diameter", "defects", "seeds"},
    "coupling": {"L", "c_nn", "c_lr", "C_bound"},
    "coupling.c_nn": {"const"},
    "coupling.c_lr": {"family", "beta", "p", "lambda"},
    "cell": {"nu", "directions", "t", "l", "center"},
    "translation": {"offsets"},
    "truncation": {"L", "L_ref"},
    "gamma": {"eps", "side", "phi", "phi_table", "interpolation"},
    "audit": {"box"},
}


def _check_keys(data: dict, path: str = "") -> None:
    allowed = _SCHEMA.get(path)
    if allowed is None:
        return
    for k, v in data.items():
        if k not in allowed:
            where = f"[{path}]" if path else "top level"
            raise ConfigError(f"unknown key {k!r} at {where}")
        sub = f"{path}.{k}" if path else k
        if isinstance(v, dict):
            _check_keys(v, sub)


@dataclass
class RunConfig:
    experiment: str
    lattice: LatticeSpec
    seeds: list
    coupling: CouplingModel
    t: list = field(default_factory=list)
    nus: list = field(default_factory=list)
    l: float | None = None
    center: tuple | None = None
    offsets: list = field(default_factory=list)
    trunc_L: list = field(default_factory=list)
    trunc_L_ref: float = 16.0
    eps: list = field(default_factory=list)
    side: float = 1.0
    phi: float | None = None
    phi_table: str | None = None
    interpolation: str = "angle"
    audit_box: list = field(default_factory=list)
    jobs: int = 1
    out_dir: str = "out"
    timing: bool = False
    raw: dict = field(default_factory=dict)


def _coupling(d: dict) -> CouplingModel:
    nn = d.get("c_nn", {"const": 1.0})
    if isinstance(nn, (int, float)):
        nn = {"const": nn}
    lr = dict(d.get("c_lr", {"family": "zero"}))
    fam = lr.get("family", "zero")
    try:
        if fam == "power":
            kern = Kernel("power", float(lr["beta"]), p=float(lr["p"]))
        elif fam == "exp":
            kern = Kernel("exp", float(lr["beta"]), lam=float(lr["lambda"]))
        elif fam == "zero":
            kern = Kernel()
        else:
            raise ConfigError(f"unknown c_lr family {fam!r}")
    except KeyError as exc:
        raise ConfigError(f"c_lr family {fam!r} needs key {exc.args[0]!r}") from None
    return CouplingModel(float(nn["const"]), kern, float(d.get("L", 0.0)), d.get("C_bound"))


def _unit(v, dim) -> tuple:
    v = [float(x) for x in v]
    if len(v) != dim:
        raise ConfigError(f"direction {v} must have {dim} components")
    norm = math.sqrt(sum(x * x for x in v))
    if abs(norm - 1) > 1e-9:
        raise ConfigError(f"direction {v} is not a unit vector (|nu| = {norm})")
    return tuple(v)


def parse_config(data: dict) -> RunConfig:
    _check_keys(data)
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)} (got {exp!r})")
    lt = data.get("lattice", {})
    seeds = [int(s) for s in lt.get("seeds", [0])]
    if not seeds:
        raise ConfigError("lattice.seeds must list at least one seed")
    try:
        lattice = LatticeSpec(
            model=lt.get("model", "square"),
            dim=int(lt.get("dim", 2)),
            a=float(lt.get("a", 0.25)),
            diameter=float(lt.get("diameter", 1.0)),
            defects=int(lt.get("defects", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if lattice.model == "perturbed" and not 0 <= lattice.a < 0.5:
        raise ConfigError("perturbation amplitude a must lie in [0, 1/2)")
    coupling = _coupling(data.get("coupling", {}))
    try:
        validate_model(coupling, lattice.dim, lattice.R)
    except ModelError as exc:
        raise ConfigError(f"coupling model: {exc}") from None

    cell = data.get("cell", {})
    cfg = RunConfig(
        experiment=exp,
        lattice=lattice,
        seeds=seeds,
        coupling=coupling,
        jobs=int(data.get("jobs", 1)),
        out_dir=str(data.get("out_dir", "out")),
        timing=bool(data.get("timing", False)),
        raw=data,
    )
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    cfg.t = [float(t) for t in cell.get("t", [])]
    if any(b <= a for a, b in zip(cfg.t, cfg.t[1:])):
        raise ConfigError("cell.t must be strictly increasing")
    if "nu" in cell and "directions" in cell:
        raise ConfigError("give either cell.nu or cell.directions, not both")
    if "directions" in cell:
        k = int(cell["directions"])
        if k < 1:
            raise ConfigError("cell.directions must be >= 1")
        cfg.nus = [tuple(map(float, v)) for v in directions(k)]
    elif "nu" in cell:
        cfg.nus = [_unit(cell["nu"], lattice.dim)]
    if "l" in cell:
        cfg.l = float(cell["l"])
    if "center" in cell:
        cfg.center = tuple(float(x) for x in cell["center"])
        if len(cfg.center) != lattice.dim:
            raise ConfigError("cell.center must have one component per dimension")
    if exp == "sweep" and lattice.dim != 2:
        raise ConfigError("sweep experiments are two-dimensional")

    if exp in ("phi", "sweep", "translation", "subadd", "truncation"):
        if not cfg.t:
            raise ConfigError("cell.t is required")
        if not cfg.nus:
            raise ConfigError("cell.nu or cell.directions is required")
        if exp != "sweep" and len(cfg.nus) != 1:
            raise ConfigError(f"{exp} experiments take a single direction cell.nu")
    if exp == "translation":
        offs = data.get("translation", {}).get("offsets")
        if not offs:
            raise ConfigError("translation.offsets is required")
        for o in offs:
            if len(o) != lattice.dim or any(float(x) != int(x) for x in o):
                raise ConfigError(f"offset {o} must be an integer vector of dimension {lattice.dim}")
        cfg.offsets = [[int(x) for x in o] for o in offs]
    if exp == "truncation":
        tr = data.get("truncation", {})
        cfg.trunc_L = sorted(float(x) for x in tr.get("L", []))
        cfg.trunc_L_ref = float(tr.get("L_ref", 16.0))
        if not cfg.trunc_L:
            raise ConfigError("truncation.L is required")
        if cfg.trunc_L[-1] > cfg.trunc_L_ref:
            raise ConfigError("truncation.L_ref must be at least every truncation.L")
        if coupling.c_lr.family == "zero":
            raise ConfigError("truncation experiments need a long-range kernel c_lr")
    if exp == "gamma":
        g = data.get("gamma", {})
        cfg.eps = [float(e) for e in g.get("eps", [])]
        cfg.side = float(g.get("side", 1.0))
        cfg.interpolation = str(g.get("interpolation", "angle"))
        if not cfg.eps:
            raise ConfigError("gamma.eps is required")
        if any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
            raise ConfigError("gamma.eps must be strictly decreasing")
        if ("phi" in g) == ("phi_table" in g):
            raise ConfigError("give exactly one of gamma.phi or gamma.phi_table")
        cfg.phi = float(g["phi"]) if "phi" in g else None
        cfg.phi_table = g.get("phi_table")
        if len(cfg.nus) != 1 or lattice.dim != 2:
            raise ConfigError("gamma experiments need a single two-dimensional cell.nu")
    if exp == "lattice-audit":
        box = data.get("audit", {}).get("box")
        if box is None:
            raise ConfigError("audit.box is required")
        cfg.audit_box = [float(x) for x in box]
        if len(cfg.audit_box) != 2 or cfg.audit_box[1] <= cfg.audit_box[0]:
            raise ConfigError("audit.box must be [lo, hi] with hi > lo")
    _check_cross_fields(cfg)
    return cfg


def _check_cross_fields(cfg: RunConfig) -> None:
    r = cfg.lattice.r
    model = cfg.coupling
    sizes = list(cfg.t)
    if cfg.experiment == "subadd":
        sizes = sizes + [2 * t for t in cfg.t]
    if cfg.experiment == "truncation":
        model = replace(model, L=cfg.trunc_L_ref)
    if cfg.experiment == "gamma":
        sizes = [cfg.side / e for e in cfg.eps]
    for t in sizes:
        try:
            width = boundary_width(t, model, r)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.l is not None:
            width = cfg.l
            if width < model.L + r:
                raise ConfigError(f"cell.l = {width} violates l >= L + r = {model.L + r}")
        if width >= t / 2:
            raise ConfigError(f"boundary width l = {width} violates l < t/2 = {t / 2} for t = {t}")
    if cfg.experiment == "gamma":
        for e in cfg.eps:
            t = cfg.side / e
            width = max(model.L + r, math.sqrt(1 / e))
            if width >= t / 2:
                raise ConfigError(f"boundary layer {width} violates l < t/2 at eps = {e}")


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    return parse_config(data)
