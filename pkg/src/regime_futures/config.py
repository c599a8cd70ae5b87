"""YAML run configuration.

Six sections: ``model``, ``measures``, ``portfolio``, ``numerics``,
``simulation`` and ``output``. Per-regime parameters use flat keys
(``mu_1``, ``sigma_2``, ``zeta_1``, ``kappa_1``, ``theta_2``); maturities are
``T1 .. TM``. Generators come either as row-major matrices ``Q`` / ``Qt`` or as
flat off-diagonal rates ``q12``, ``qt21`` (the latter only for M <= 9).
``Qt`` defaults to ``Q``.

Example::

    model: {kind: rs-gbm, mu_1: -0.2, mu_2: 0.2, sigma_1: 0.2, sigma_2: 0.3,
            zeta_1: 0.1, zeta_2: 0.3}
    measures: {q12: 2, q21: 4}
    portfolio: {T1: 0.6, T2: 0.8, gamma: 1, w0: 1, Ttilde: 0.6}
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigInvalid, InvalidInput
from .models import RegimeModelSpec
from .regime_chain import MeasurePair
from .simulate import XOU_METHODS, SimConfig

KINDS = ("rs-gbm", "rs-xou")
LAYOUTS = ("per-path", "long")
_PER_REGIME = {"rs-gbm": ("mu", "sigma", "zeta"), "rs-xou": ("kappa", "theta", "sigma", "zeta")}
_NUMERICS = {"dt", "n_x", "n_t", "methods", "x_ref", "curve_points", "ce_horizon", "ce_points",
             "strategy_x"}
_SIMULATION = {"paths", "seed", "x0", "i0", "switches", "workers"}
_OUTPUT = {"dir", "layout", "surface_stride"}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    sigma: tuple
    zeta: tuple
    q: tuple
    qt: tuple
    maturities: tuple
    gammas: tuple
    horizon: float
    w0: float = 1.0
    mu: tuple | None = None
    kappa: tuple | None = None
    theta: tuple | None = None
    # numerics
    dt: float | None = None
    n_x: int = 1024
    n_t: int = 400
    methods: tuple = ("fdm",)
    x_ref: float = 0.0
    curve_points: int = 61
    ce_horizon: float | None = None
    ce_points: int = 101
    strategy_x: tuple | None = None
    # simulation
    paths: int = 1
    seed: int = 0
    x0: float = 0.0
    i0: int = 1
    switches: tuple | None = None
    workers: int = 1
    # output
    out_dir: str = "out"
    layout: str = "per-path"
    surface_stride: int = 16

    @property
    def m(self) -> int:
        return len(self.sigma)

    @property
    def gamma(self) -> float:
        """Risk aversion used by ``strategy`` and ``simulate`` (first listed)."""
        return self.gammas[0]

    def measures(self) -> MeasurePair:
        return MeasurePair.from_rates(self.q, self.qt)

    def spec(self) -> RegimeModelSpec:
        if self.kind == "rs-gbm":
            return RegimeModelSpec.rs_gbm(self.mu, self.sigma, self.zeta, self.measures())
        return RegimeModelSpec.rs_xou(self.kappa, self.theta, self.sigma, self.zeta, self.measures())

    def sim_config(self, seed: int | None = None, workers: int | None = None) -> SimConfig:
        method = next((m for m in self.methods if m in XOU_METHODS), "fdm")
        return SimConfig(
            spec=self.spec(), maturities=self.maturities, horizon=self.horizon, gamma=self.gamma,
            x0=self.x0, i0=self.i0, w0=self.w0, dt=self.dt, n_paths=self.paths,
            seed=self.seed if seed is None else seed, forced_switches=self.switches,
            workers=self.workers if workers is None else workers, pricing_method=method,
            n_x=self.n_x, n_t=self.n_t,
        )

    def to_dict(self) -> dict:
        """Canonical nested form; :func:`parse_config` inverts it."""
        model = {"kind": self.kind}
        for name in _PER_REGIME[self.kind]:
            for k, v in enumerate(getattr(self, name), start=1):
                model[f"{name}_{k}"] = v
        portfolio = {f"T{k}": T for k, T in enumerate(self.maturities, start=1)}
        portfolio.update(gamma=list(self.gammas), w0=self.w0, Ttilde=self.horizon)
        numerics = {
            "dt": self.dt, "n_x": self.n_x, "n_t": self.n_t, "methods": list(self.methods),
            "x_ref": self.x_ref, "curve_points": self.curve_points, "ce_horizon": self.ce_horizon,
            "ce_points": self.ce_points,
            "strategy_x": None if self.strategy_x is None else list(self.strategy_x),
        }
        simulation = {
            "paths": self.paths, "seed": self.seed, "x0": self.x0, "i0": self.i0,
            "switches": None if self.switches is None else [list(s) for s in self.switches],
            "workers": self.workers,
        }
        return {
            "model": model,
            "measures": {"Q": [list(r) for r in self.q], "Qt": [list(r) for r in self.qt]},
            "portfolio": portfolio,
            "numerics": {k: v for k, v in numerics.items() if v is not None},
            "simulation": {k: v for k, v in simulation.items() if v is not None},
            "output": {"dir": self.out_dir, "layout": self.layout,
                       "surface_stride": self.surface_stride},
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# parsing


def _float(field: str, value, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(field, f"expected a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigInvalid(field, "must be finite")
    if positive and not out > 0:
        raise ConfigInvalid(field, "must be > 0")
    return out


def _int(field: str, value, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(field, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigInvalid(field, f"must be >= {minimum}")
    return int(value)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigInvalid(name, "section must be a mapping")
    return sec


def _check_keys(name: str, sec: dict, allowed) -> None:
    for key in sec:
        if key not in allowed:
            raise ConfigInvalid(f"{name}.{key}", "unknown key")


def _per_regime(model: dict, kind: str):
    names = _PER_REGIME[kind]
    pattern = re.compile(r"^([a-z]+)_(\d+)$")
    found: dict = {n: {} for n in names}
    for key, value in model.items():
        if key == "kind":
            continue
        hit = pattern.match(str(key))
        if not hit or hit.group(1) not in found:
            raise ConfigInvalid(f"model.{key}", f"unknown key for {kind}")
        found[hit.group(1)][int(hit.group(2))] = _float(f"model.{key}", value)
    m = len(found["sigma"])
    if m == 0:
        raise ConfigInvalid("model.sigma_1", "missing")
    out = {}
    for n in names:
        for k in range(1, m + 1):
            if k not in found[n]:
                raise ConfigInvalid(f"model.{n}_{k}", "missing")
        extra = sorted(set(found[n]) - set(range(1, m + 1)))
        if extra:
            raise ConfigInvalid(f"model.{n}_{extra[0]}", f"regime index beyond M = {m}")
        out[n] = tuple(found[n][k] for k in range(1, m + 1))
    return m, out


def _generator(measures: dict, m: int, matrix_key: str, prefix: str):
    field = f"measures.{matrix_key}"
    flat = {k: v for k, v in measures.items() if re.fullmatch(prefix + r"\d\d", str(k))}
    if matrix_key in measures:
        if flat:
            raise ConfigInvalid(field, f"give either {matrix_key} or {prefix}ij entries, not both")
        rows = measures[matrix_key]
        if not isinstance(rows, list) or len(rows) != m or any(
                not isinstance(r, list) or len(r) != m for r in rows):
            raise ConfigInvalid(field, f"must be a {m}x{m} row-major matrix")
        return tuple(tuple(_float(f"{field}[{a}][{b}]", v) for b, v in enumerate(r))
                     for a, r in enumerate(rows))
    if not flat:
        return None
    if m > 9:
        raise ConfigInvalid(field, "flat qij keys need M <= 9; use the matrix form")
    q = np.zeros((m, m))
    for key, value in flat.items():
        a, b = int(key[-2]), int(key[-1])
        if not (1 <= a <= m and 1 <= b <= m) or a == b:
            raise ConfigInvalid(f"measures.{key}", f"needs distinct indices in 1..{m}")
        q[a - 1, b - 1] = _float(f"measures.{key}", value)
    q[np.diag_indices(m)] = -q.sum(axis=1)
    return tuple(tuple(float(v) for v in r) for r in q)


def parse_config(raw) -> RunConfig:
    """Validate a nested mapping (as loaded from YAML) into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "config must be a mapping of sections")
    for key in raw:
        if key not in ("model", "measures", "portfolio", "numerics", "simulation", "output"):
            raise ConfigInvalid(str(key), "unknown section")
    model = _section(raw, "model")
    kind = model.get("kind")
    if kind not in KINDS:
        raise ConfigInvalid("model.kind", f"must be one of {KINDS}")
    m, params = _per_regime(model, kind)

    measures = _section(raw, "measures")
    for key in measures:
        if key not in ("Q", "Qt") and not re.fullmatch(r"qt?\d\d", str(key)):
            raise ConfigInvalid(f"measures.{key}", "unknown key")
    q = _generator(measures, m, "Q", "q")
    if q is None:
        raise ConfigInvalid("measures.Q", "missing")
    qt = _generator(measures, m, "Qt", "qt")
    if qt is None:
        qt = q

    port = _section(raw, "portfolio")
    _check_keys("portfolio", port, {f"T{k}" for k in range(1, m + 1)} | {"gamma", "w0", "Ttilde"})
    mats = []
    for k in range(1, m + 1):
        if f"T{k}" not in port:
            raise ConfigInvalid(f"portfolio.T{k}", "missing maturity")
        mats.append(_float(f"portfolio.T{k}", port[f"T{k}"], positive=True))
    if any(b <= a for a, b in zip(mats, mats[1:])):
        raise ConfigInvalid("portfolio.T1", "maturities must be strictly increasing")
    if "gamma" not in port:
        raise ConfigInvalid("portfolio.gamma", "missing")
    g = port["gamma"]
    g = g if isinstance(g, list) else [g]
    if not g:
        raise ConfigInvalid("portfolio.gamma", "empty list")
    gammas = tuple(_float("portfolio.gamma", v, positive=True) for v in g)
    horizon = _float("portfolio.Ttilde", port.get("Ttilde", mats[0]), positive=True)
    if horizon > mats[0]:
        raise ConfigInvalid("portfolio.Ttilde", "trading horizon must not exceed T1")
    w0 = _float("portfolio.w0", port.get("w0", 1.0))

    num = _section(raw, "numerics")
    _check_keys("numerics", num, _NUMERICS)
    kw: dict = {}
    if "dt" in num:
        kw["dt"] = _float("numerics.dt", num["dt"], positive=True)
    for key, lo in (("n_x", 8), ("n_t", 1), ("curve_points", 2), ("ce_points", 2)):
        if key in num:
            kw[key] = _int(f"numerics.{key}", num[key], lo)
    if "methods" in num:
        methods = num["methods"]
        methods = methods if isinstance(methods, list) else [methods]
        for v in methods:
            if v not in XOU_METHODS:
                raise ConfigInvalid("numerics.methods", f"{v!r} not in {XOU_METHODS}")
        if not methods:
            raise ConfigInvalid("numerics.methods", "empty list")
        kw["methods"] = tuple(methods)
    if "x_ref" in num:
        kw["x_ref"] = _float("numerics.x_ref", num["x_ref"])
    if "ce_horizon" in num:
        kw["ce_horizon"] = _float("numerics.ce_horizon", num["ce_horizon"], positive=True)
    if "strategy_x" in num:
        xs = num["strategy_x"]
        xs = xs if isinstance(xs, list) else [xs]
        kw["strategy_x"] = tuple(_float("numerics.strategy_x", v) for v in xs)

    sim = _section(raw, "simulation")
    _check_keys("simulation", sim, _SIMULATION)
    if "paths" in sim:
        kw["paths"] = _int("simulation.paths", sim["paths"], 1)
    if "seed" in sim:
        kw["seed"] = _int("simulation.seed", sim["seed"], 0)
    if "x0" in sim:
        kw["x0"] = _float("simulation.x0", sim["x0"])
    if "i0" in sim:
        kw["i0"] = _int("simulation.i0", sim["i0"], 1)
        if kw["i0"] > m:
            raise ConfigInvalid("simulation.i0", f"must be <= M = {m}")
    if "workers" in sim:
        kw["workers"] = _int("simulation.workers", sim["workers"], 1)
    if sim.get("switches") is not None:
        sw = sim["switches"]
        if not isinstance(sw, list) or any(not isinstance(s, list) or len(s) != 2 for s in sw):
            raise ConfigInvalid("simulation.switches", "expected a list of [time, regime] pairs")
        kw["switches"] = tuple((_float("simulation.switches", t),
                                _int("simulation.switches", s, 1)) for t, s in sw)

    out = _section(raw, "output")
    _check_keys("output", out, _OUTPUT)
    if "dir" in out:
        kw["out_dir"] = str(out["dir"])
    if "layout" in out:
        if out["layout"] not in LAYOUTS:
            raise ConfigInvalid("output.layout", f"must be one of {LAYOUTS}")
        kw["layout"] = out["layout"]
    if "surface_stride" in out:
        kw["surface_stride"] = _int("output.surface_stride", out["surface_stride"], 1)

    cfg = RunConfig(kind=kind, q=q, qt=qt, maturities=tuple(mats), gammas=gammas,
                    horizon=horizon, w0=w0, **params, **kw)
    # cross-section validation via the domain constructors
    try:
        cfg.measures()
    except InvalidInput as exc:
        raise ConfigInvalid("measures", str(exc)) from exc
    try:
        cfg.spec()
    except InvalidInput as exc:
        raise ConfigInvalid("model", str(exc)) from exc
    try:
        cfg.sim_config()
    except InvalidInput as exc:
        raise ConfigInvalid("simulation", str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(str(path), f"cannot read: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(str(path), f"not valid YAML: {exc}") from exc
    return parse_config(raw)

