"""Config file loading.

The on-disk format is YAML with nested arrays of rows:

    bmap1:
      matrices:          # D_0, D_1, ... in order
        - [[-2.0, 1.0], [0.5, -1.5]]
        - [[1.0, 0.0], [0.0, 1.0]]
    bmap2:
      matrices: [...]
    mmpp:
      T0: [[...], [...]]
      T1: [2.0, 4.0]     # diagonal retrial rates
    ph:
      alpha: [1.0, 0.0]
      S: [[...], [...]]
    servers: {c: 8, g: 6}
    solver: {epsilon: 1e-8, epsilon0: 1e-6, N_max: 400}
    sweep: {parameter: g, values: [1, 2, 3]}
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError
from .models import BmapSpec, MmppSpec, PhSpec, SystemConfig, Violation


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple

    ALLOWED = ("g", "c", "lambda_scale_1", "lambda_scale_2", "sigma_scale")


def _fail(msg):
    raise ConfigError([Violation("config-file", msg)])


def _need(doc, key):
    if key not in doc:
        _fail(f"missing section '{key}'")
    return doc[key]


def parse_config(doc: dict) -> SystemConfig:
    if not isinstance(doc, dict):
        _fail("top level must be a mapping")
    b1 = _need(doc, "bmap1")
    b2 = _need(doc, "bmap2")
    mm = _need(doc, "mmpp")
    ph = _need(doc, "ph")
    sv = _need(doc, "servers")
    solver = doc.get("solver", {})
    try:
        bmap1 = BmapSpec(tuple(np.array(m, dtype=float)
                               for m in _need(b1, "matrices")))
        bmap2 = BmapSpec(tuple(np.array(m, dtype=float)
                               for m in _need(b2, "matrices")))
        mmpp = MmppSpec(np.array(_need(mm, "T0"), dtype=float),
                        np.array(_need(mm, "T1"), dtype=float))
        service = PhSpec(np.array(_need(ph, "alpha"), dtype=float),
                         np.array(_need(ph, "S"), dtype=float))
        cfg = SystemConfig(
            bmap1=bmap1, bmap2=bmap2, mmpp=mmpp, service=service,
            c=int(_need(sv, "c")), g=int(_need(sv, "g")),
            epsilon=float(solver.get("epsilon", 1e-8)),
            epsilon0=float(solver.get("epsilon0", 1e-6)),
            n_max=int(solver.get("N_max", 400)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        _fail(f"unreadable numeric field: {exc}")
    return cfg


def parse_sweep(doc: dict) -> SweepSpec | None:
    block = doc.get("sweep")
    if block is None:
        return None
    param = block.get("parameter")
    values = block.get("values")
    if param not in SweepSpec.ALLOWED:
        _fail(f"sweep parameter must be one of {SweepSpec.ALLOWED}")
    if not isinstance(values, (list, tuple)) or not values:
        _fail("sweep values must be a nonempty list")
    return SweepSpec(parameter=param, values=tuple(values))


def load_config(path):
    """(SystemConfig, SweepSpec | None) from a YAML file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
    except yaml.YAMLError as exc:
        _fail(f"cannot parse {path}: {exc}")
    return parse_config(doc), parse_sweep(doc)


def dump_config(config: SystemConfig, sweep: SweepSpec | None = None):
    """YAML text round-tripping :func:`load_config` (test and CLI helper)."""
    doc = {
        "bmap1": {"matrices": [m.tolist() for m in config.bmap1.matrices]},
        "bmap2": {"matrices": [m.tolist() for m in config.bmap2.matrices]},
        "mmpp": {"T0": config.mmpp.t0.tolist(),
                 "T1": config.mmpp.sigma.tolist()},
        "ph": {"alpha": config.service.alpha.tolist(),
               "S": config.service.s.tolist()},
        "servers": {"c": config.c, "g": config.g},
        "solver": {"epsilon": config.epsilon, "epsilon0": config.epsilon0,
                   "N_max": config.n_max},
    }
    if sweep is not None:
        doc["sweep"] = {"parameter": sweep.parameter,
                        "values": list(sweep.values)}
    return yaml.safe_dump(doc, sort_keys=False)


def apply_sweep_point(config: SystemConfig, parameter, value) -> SystemConfig:
    """One grid point of a sweep applied to the base configuration."""
    from dataclasses import replace
    if parameter == "g":
        return replace(config, g=int(value))
    if parameter == "c":
        return replace(config, c=int(value))
    if parameter == "lambda_scale_1":
        return replace(config, bmap1=_scaled_bmap(config.bmap1, float(value)))
    if parameter == "lambda_scale_2":
        return replace(config, bmap2=_scaled_bmap(config.bmap2, float(value)))
    if parameter == "sigma_scale":
        from dataclasses import replace as rep
        mm = config.mmpp
        return replace(config, mmpp=rep(mm, sigma=mm.sigma * float(value),
                                        t0=mm.t0 - np.diag(mm.sigma
                                                           * (float(value) - 1))))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def _scaled_bmap(bmap: BmapSpec, factor):
    return BmapSpec(tuple(m * factor for m in bmap.matrices))
