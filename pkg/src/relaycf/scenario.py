"""Scenario files: INI text with a fixed schema, parsed into model objects.

Example::

    [chain]
    hops = 2
    protocol = DF
    m = 1
    d = uniform
    n0 = 0.2

    [power]
    budget = 0db

Values ending in ``db`` are converted with ``10 ** (x / 10)``.  Lists are
comma separated; numeric ranges may be written ``start:stop:step``
(inclusive).  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import HopProfile, PowerModel, Protocol, RelayChain
from .errors import ConfigError
from .metrics import SeriesControl
from .montecarlo import McConfig
from .optimizer import STRATEGIES, SolverOptions
from .specfun import gauss_laguerre

__all__ = ["Scenario", "parse_scenario", "load_scenario", "db_to_linear"]

# Default noise variance.  Unit-length direct link then has an average SNR
# of 5 (about 7 dB) per watt, which places the CF-optimal hop count inside
# 1..10 at a 0 dB budget.
DEFAULT_N0 = 0.2


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class Scenario:
    # chain
    hops: int = 2
    protocol: Protocol = Protocol.DF
    m: tuple = (1,)
    d: tuple | None = None  # None: relays spaced uniformly over ``distance``
    distance: float = 1.0
    nu: tuple = (4.0,)
    omega: tuple = (1.0,)
    n0: float = DEFAULT_N0
    bandwidth: float = 1.0
    # power
    budget: float = 1.0
    power: PowerModel = field(default_factory=PowerModel)
    # strategies
    strategies: tuple = STRATEGIES
    # numerics
    max_terms: int = 200
    rel_tol: float = 1e-12
    tail: bool = True
    quadrature_order: int = 30
    coefficient: str = "gamma"
    samples: int = 1_000_000
    seed: int = 0
    streams: int = 8
    # sweeps
    protocols: tuple = (Protocol.AF, Protocol.DF)
    hop_range: tuple = tuple(range(1, 11))
    power_db: tuple = tuple(float(x) for x in range(-10, 31))
    delta: tuple = tuple(float(x) for x in range(10))
    snr_db: tuple = (0.0, 10.0)
    validate_hops: tuple = (1, 2, 3)
    validate_m: tuple = (1, 2)

    def __post_init__(self):
        self.chain()  # validates the chain description
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if self.coefficient not in ("gamma", "factorial"):
            raise ConfigError(f"coefficient must be 'gamma' or 'factorial', got {self.coefficient!r}")
        if not self.budget > 0:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if any(not 1 <= n <= 20 for n in self.hop_range + self.validate_hops):
            raise ConfigError("hop counts must lie in [1, 20]")
        if any(x < 0 for x in self.delta):
            raise ConfigError("delta values must be non-negative")
        self.series_control()
        self.mc_config()
        self.quadrature()

    # -- model objects -----------------------------------------------------

    def _per_hop(self, values, n, name):
        if len(values) == 1:
            return values * n
        if len(values) != n:
            raise ConfigError(f"[chain] {name}: expected 1 or {n} values, got {len(values)}")
        return values

    def chain(self, n: int | None = None, protocol=None) -> RelayChain:
        """Chain of ``n`` hops (default ``hops``); scalar per-hop entries are
        broadcast and ``d = uniform`` spreads the hops over ``distance``."""
        n = self.hops if n is None else n
        if n < 1:
            raise ConfigError(f"[chain] hops must be >= 1, got {n}")
        ms = self._per_hop(self.m, n, "m")
        nus = self._per_hop(self.nu, n, "nu")
        omegas = self._per_hop(self.omega, n, "omega")
        ds = (self.distance / n,) * n if self.d is None else self._per_hop(self.d, n, "d")
        hops = tuple(HopProfile(m, dd, nn, om) for m, dd, nn, om in zip(ms, ds, nus, omegas))
        return RelayChain(hops, Protocol(protocol or self.protocol), self.bandwidth, self.n0, self.power)

    def series_control(self) -> SeriesControl:
        return SeriesControl(self.max_terms, self.rel_tol, self.tail)

    def quadrature(self):
        return gauss_laguerre(self.quadrature_order)

    def mc_config(self, seed: int | None = None) -> McConfig:
        return McConfig(self.samples, self.seed if seed is None else seed, self.streams)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(series=self.series_control(), rule=self.quadrature())

    # -- text form ---------------------------------------------------------

    def to_ini(self) -> str:
        def lst(xs):
            return ", ".join(_fmt(x) for x in xs)

        pm = self.power
        sections = {
            "chain": {
                "hops": str(self.hops),
                "protocol": self.protocol.value,
                "m": lst(self.m),
                "d": "uniform" if self.d is None else lst(self.d),
                "distance": _fmt(self.distance),
                "nu": lst(self.nu),
                "omega": lst(self.omega),
                "n0": _fmt(self.n0),
                "bandwidth": _fmt(self.bandwidth),
            },
            "power": {
                "budget": _fmt(self.budget),
                "epsilon": _fmt(pm.epsilon),
                "p_ct": lst(np.atleast_1d(pm.p_ct)),
                "p_cr": lst(np.atleast_1d(pm.p_cr)),
                "p_ci": lst(np.atleast_1d(pm.p_ci)),
                "p_proc_af": _fmt(pm.p_proc_af),
                "p_proc_df": _fmt(pm.p_proc_df),
            },
            "strategies": {"use": ", ".join(self.strategies)},
            "numerics": {
                "max_terms": str(self.max_terms),
                "rel_tol": _fmt(self.rel_tol),
                "tail": "true" if self.tail else "false",
                "quadrature_order": str(self.quadrature_order),
                "coefficient": self.coefficient,
                "samples": str(self.samples),
                "seed": str(self.seed),
                "streams": str(self.streams),
            },
            "sweep": {
                "protocols": ", ".join(p.value for p in self.protocols),
                "hop_range": lst(self.hop_range),
                "power_db": lst(self.power_db),
                "delta": lst(self.delta),
                "snr_db": lst(self.snr_db),
                "validate_hops": lst(self.validate_hops),
                "validate_m": lst(self.validate_m),
            },
        }
        out = []
        for name, items in sections.items():
            out.append(f"[{name}]")
            out.extend(f"{k} = {v}" for k, v in items.items())
            out.append("")
        return "\n".join(out)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# parsing


def _number(text: str, where: str) -> float:
    t = text.strip().lower()
    is_db = t.endswith("db")
    if is_db:
        t = t[:-2].strip()
    try:
        v = float(t)
    except ValueError:
        raise ConfigError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: value must be finite, got {text!r}")
    return db_to_linear(v) if is_db else v


def _plain(text: str, where: str) -> float:
    """A number without unit suffix."""
    if text.strip().lower().endswith("db"):
        raise ConfigError(f"{where}: dB suffix not allowed here: {text!r}")
    return _number(text, where)


def _integer(text: str, where: str) -> int:
    t = text.strip()
    try:
        return int(t)
    except ValueError:
        pass
    v = _plain(t, where)
    if v != int(v):
        raise ConfigError(f"{where}: expected an integer, got {text!r}")
    return int(v)


def _range(text: str, where: str, conv):
    """Comma list whose items may be ``start:stop[:step]`` (inclusive)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise ConfigError(f"{where}: empty list item in {text!r}")
        if ":" in item:
            parts = [_plain(p, where) for p in item.split(":")]
            if len(parts) not in (2, 3):
                raise ConfigError(f"{where}: ranges are start:stop[:step], got {item!r}")
            start, stop = parts[:2]
            step = parts[2] if len(parts) == 3 else 1.0
            if step <= 0 or stop < start:
                raise ConfigError(f"{where}: empty or reversed range {item!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(conv(repr(start + k * step), where) for k in range(count))
        else:
            out.append(conv(item, where))
    return tuple(out)


def _boolean(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{where}: expected true/false, got {text!r}")


def _protocol(text: str, where: str):
    try:
        return Protocol(text.strip().upper())
    except ValueError:
        raise ConfigError(f"{where}: protocol must be AF or DF, got {text!r}") from None


def _scalar_or_list(text: str, where: str, conv):
    vals = _range(text, where, conv)
    return vals[0] if len(vals) == 1 else vals


_SCHEMA = {
    "chain": {
        "hops": ("hops", _integer),
        "protocol": ("protocol", _protocol),
        "m": ("m", lambda t, w: _range(t, w, _integer)),
        "d": ("d", lambda t, w: None if t.strip().lower() == "uniform" else _range(t, w, _number)),
        "distance": ("distance", _number),
        "nu": ("nu", lambda t, w: _range(t, w, _number)),
        "omega": ("omega", lambda t, w: _range(t, w, _number)),
        "n0": ("n0", _number),
        "bandwidth": ("bandwidth", _number),
    },
    "power": {
        "budget": ("budget", _number),
        "epsilon": ("power.epsilon", _number),
        "p_ct": ("power.p_ct", lambda t, w: _scalar_or_list(t, w, _number)),
        "p_cr": ("power.p_cr", lambda t, w: _scalar_or_list(t, w, _number)),
        "p_ci": ("power.p_ci", lambda t, w: _scalar_or_list(t, w, _number)),
        "p_proc_af": ("power.p_proc_af", _number),
        "p_proc_df": ("power.p_proc_df", _number),
    },
    "strategies": {
        "use": ("strategies", lambda t, w: tuple(s.strip().lower() for s in t.split(",") if s.strip())),
    },
    "numerics": {
        "max_terms": ("max_terms", _integer),
        "rel_tol": ("rel_tol", _number),
        "tail": ("tail", _boolean),
        "quadrature_order": ("quadrature_order", _integer),
        "coefficient": ("coefficient", lambda t, w: t.strip().lower()),
        "samples": ("samples", _integer),
        "seed": ("seed", _integer),
        "streams": ("streams", _integer),
    },
    "sweep": {
        "protocols": ("protocols", lambda t, w: tuple(_protocol(p, w) for p in t.split(","))),
        "hop_range": ("hop_range", lambda t, w: _range(t, w, _integer)),
        "power_db": ("power_db", lambda t, w: _range(t, w, _plain)),
        "delta": ("delta", lambda t, w: _range(t, w, _plain)),
        "snr_db": ("snr_db", lambda t, w: _range(t, w, _plain)),
        "validate_hops": ("validate_hops", lambda t, w: _range(t, w, _integer)),
        "validate_m": ("validate_m", lambda t, w: _range(t, w, _integer)),
    },
}


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse scenario text; errors name the file, line and key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = text.splitlines()

    def lineno(section, key):
        current = None
        for i, raw in enumerate(lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
            elif current == section and s.split("=", 1)[0].strip() == key:
                return i
        return 0

    kwargs, power = {}, {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]; expected one of {', '.join(_SCHEMA)}")
        for key, raw in cp.items(section):
            where = f"{source}:{lineno(section, key)}: [{section}] {key}"
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key; expected one of {', '.join(_SCHEMA[section])}")
            target, conv = _SCHEMA[section][key]
            value = conv(raw, where)
            if target.startswith("power."):
                power[target[6:]] = value
            else:
                kwargs[target] = value
    try:
        if power:
            kwargs["power"] = PowerModel(**power)
        return Scenario(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, source=path)


def with_gains(scenario: Scenario, gains, protocol) -> RelayChain:
    """Chain of ``len(gains)`` uniformly spaced hops whose per-watt average
    SNRs equal ``gains`` (set through the mean channel gain omega)."""
    n = len(gains)
    base = scenario.chain(n, protocol)
    hops = tuple(
        replace(h, omega=g * scenario.n0 * h.d**h.nu) for h, g in zip(base.hops, gains)
    )
    return RelayChain(hops, base.protocol, base.bandwidth, base.n0, base.power)
