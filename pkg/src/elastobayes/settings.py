"""Experiment settings read from an INI file.

Sections ``[domain]``, ``[source]``, ``[truth]``, ``[prior]``, ``[sampler]``
and ``[optimizer]``; every key is optional and falls back to the defaults of
the corresponding dataclass.  See ``configs/single_circle.ini``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .config import MU_BACKGROUND, SimulationConfig, transducer_line
from .errors import ConfigurationError
from .laplace import FDSteps, OptimizerConfig
from .mcmc import SamplerConfig
from .prior import MaternParams, PriorHyper
from .shapes import SMOOTH, circle, from_blocks
from .topo import TopoConfig


@dataclass(frozen=True)
class Settings:
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    coarsen: int = 2
    supersample: int = 4
    truth_circles: tuple = ((5.0, -3.0, 1.0, 16.0),)
    alpha: float = 10.0
    variant: str = SMOOTH
    order: int = 5
    hyper: PriorHyper = PriorHyper()
    topo: TopoConfig = TopoConfig()
    sampler: SamplerConfig = SamplerConfig()
    batch: int = 16
    optimizer: OptimizerConfig = OptimizerConfig()
    laplace_samples: int = 10000

    def truth(self):
        return from_blocks([circle(cx, cy, r, mu, SMOOTH, self.order) for cx, cy, r, mu in self.truth_circles],
                           SMOOTH, self.order)

    def inversion(self):
        return self.simulation.coarsened(self.coarsen) if self.coarsen != 1 else self.simulation


def _typed(cls, section, skip=()):
    """Keyword arguments for dataclass ``cls`` from the matching keys of ``section``."""
    out = {}
    for f in fields(cls):
        if f.name in skip or f.name not in section:
            continue
        raw = section[f.name]
        default = f.default
        if raw.strip().lower() == "none" and "None" in str(f.type):
            out[f.name] = None
        elif isinstance(default, bool):
            out[f.name] = section.getboolean(f.name)
        elif isinstance(default, int) and not isinstance(default, bool):
            out[f.name] = int(raw)
        elif isinstance(default, float) or default is None:
            out[f.name] = None if raw.strip().lower() == "none" else float(raw)
        else:
            out[f.name] = raw.strip()
    return out


def _line(section, prefix):
    keys = [f"{prefix}_{k}" for k in ("start", "stop", "step", "y")]
    if not any(k in section for k in keys):
        return transducer_line()
    return transducer_line(
        float(section.get(keys[0], 0.5)), float(section.get(keys[1], 9.5)),
        float(section.get(keys[2], 0.5)), float(section.get(keys[3], 0.0)),
    )


def _circles(text):
    """``"cx cy r mu; cx cy r mu"`` to a tuple of 4-tuples."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != 4:
                raise ConfigurationError(f"truth circle needs cx cy r mu, got {chunk!r}")
            out.append(tuple(vals))
    return tuple(out)


def parse_settings(cp: configparser.ConfigParser) -> Settings:
    known = {"domain", "source", "truth", "prior", "sampler", "optimizer"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    sec = {name: cp[name] if cp.has_section(name) else cp[cp.default_section] for name in known}
    sim_kw = _typed(SimulationConfig, sec["domain"], skip=("emitters", "receivers", "record_times"))
    sim_kw.update(_typed(SimulationConfig, sec["source"], skip=("emitters", "receivers", "record_times")))
    sim_kw["emitters"] = _line(sec["source"], "emitters")
    sim_kw["receivers"] = _line(sec["source"], "receivers")
    sim = SimulationConfig(**sim_kw)
    kw = {"simulation": sim}
    d = sec["domain"]
    kw["coarsen"] = int(d.get("coarsen", 2))
    kw["supersample"] = int(d.get("supersample", 4))
    t = sec["truth"]
    if "circles" in t:
        kw["truth_circles"] = _circles(t["circles"])
    kw["alpha"] = float(t.get("alpha", 10.0))
    p = sec["prior"]
    kw["variant"] = p.get("variant", SMOOTH).strip()
    kw["order"] = int(p.get("order", 5))
    matern = MaternParams(**_typed(MaternParams, p))
    hyper_kw = _typed(PriorHyper, p, skip=("matern",))
    hyper_kw.setdefault("mu_background", sim.c_background**2 if "c_background" in sim_kw else MU_BACKGROUND)
    kw["hyper"] = PriorHyper(matern=matern, **hyper_kw)
    kw["topo"] = TopoConfig(**_typed(TopoConfig, p, skip=("fractions",)))
    s = sec["sampler"]
    kw["sampler"] = SamplerConfig(**_typed(SamplerConfig, s))
    kw["batch"] = int(s.get("batch", 16))
    o = sec["optimizer"]
    eta = FDSteps(**{k: float(o[f"eta_{k}"]) for k in ("center", "a0", "fourier", "mu") if f"eta_{k}" in o})
    opt_kw = _typed(OptimizerConfig, o, skip=("eta",))
    opt_kw.setdefault("mu_background", kw["hyper"].mu_background)
    kw["optimizer"] = OptimizerConfig(eta=eta, **opt_kw)
    kw["laplace_samples"] = int(o.get("laplace_samples", 10000))
    return Settings(**kw)


def load_settings(path=None) -> Settings:
    """Settings from ``path`` (defaults when ``None``)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is not None:
        with open(path) as fh:
            cp.read_file(fh)
    return parse_settings(cp)
