"""Scenario configuration files (TOML).

A scenario file names a graph, a basis family, a control operator and one
scenario kind with its parameters::

    name = "tadpole_transfer"
    kind = "energetic_transfer"

    [graph]
    preset = "tadpole"          # or file = "graph.toml", or inline [graph.edges]

    [basis]
    family = "tadpole"
    N = 4

    [B]
    preset = "tadpole"          # or [[B.term]] tables

    [params]
    amplitudes = [0.04, 0.02, 0.01]

Lengths, scales and profiles may be exact expressions (``"cbrt(2)"``); their
evaluated values are kept in :attr:`ScenarioConfig.echo`.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from ._expr import ExpressionError, parse_real
from .basis import SpectralBasis, star_pair_basis, tadpole_basis, uniform_chain_basis
from .graph import GraphError, MetricGraph, build_graph, chain_graph, star_graph, tadpole_graph
from .operator import ControlOperator, operator_from_spec, star_operator, tadpole_operator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("assumption_audit", "moment_control", "energetic_transfer", "perturbation_scan",
         "lie_audit")

# Default parameters per kind; keys outside these sets are rejected.
DEFAULTS: dict[str, dict[str, Any]] = {
    "assumption_audit": {
        "eta": 1.0, "a": 0.0, "coupling_tol": 1e-12, "resonance_tol": None,
        "mixed_tol": 1e-6, "gap_modes": 200, "gap_d": 1.0, "gap_delta": None,
        "hermiticity_tol": 1e-10, "expected_gap": None, "gap_rtol": 1e-12,
    },
    "moment_control": {
        "T": 1.0, "epsilons": [0.04, 0.02, 0.01], "direction": "coupling",
        "residual_tol": 1e-8, "ratio_range": [3.2, 4.8], "dt_max": 1e-3,
    },
    "energetic_transfer": {
        "source": 1, "target": 2, "amplitudes": [0.04, 0.02, 0.01], "primary_amplitude": 0.02,
        "fidelity_min": 0.999, "method": "magnus", "halving_rtol": 0.3, "budget_rtol": 1e-9,
        "record_points": 400, "leakage_check": True, "jobs": 1,
    },
    "perturbation_scan": {
        "u0_values": [0.4, 0.2, 0.1, 0.05], "scan_min": 0.01, "scan_max": 1.0,
        "scan_points": 50, "ratio_range": [1.4, 2.6], "coupling_tol": 1e-12,
    },
    "lie_audit": {
        "sizes": [3, 4, 5], "n_targets": 20, "target_max_N": 6, "reconstruction_tol": 1e-10,
        "rank_tol": 1e-9, "phase_t_max": 1.0, "phase_tol": 1e-6,
    },
}

GRAPH_PRESETS = ("tadpole", "star", "chain")
FAMILIES = ("tadpole", "star", "chain")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    """Validated scenario ready to run.

    Attributes
    ----------
    name, kind : str
    description : str
    graph : MetricGraph
    basis : SpectralBasis
        Truncated to ``N`` modes.
    operator : ControlOperator
    params : dict
        Kind parameters merged over :data:`DEFAULTS`.
    out_dir : Path
    seed : int
    source : Path or None
    echo : dict
        Parsed numeric values of exact expressions, for the summary.
    basis_factory : callable
        ``n -> SpectralBasis`` with ``n`` modes of the same family, used for
        truncation-doubling and gap scans.
    """

    name: str
    kind: str
    description: str
    graph: MetricGraph
    basis: SpectralBasis
    operator: ControlOperator
    params: dict
    out_dir: Path
    seed: int = 0
    source: Path | None = None
    echo: dict = field(default_factory=dict)
    basis_factory: Callable[[int], SpectralBasis] | None = None

    @property
    def N(self) -> int:
        return len(self.basis.modes)


def _fmt(value) -> str:
    return repr(float(value))


def _graph_from(section: Mapping, base: Path, basis_sec: Mapping, echo: dict) -> MetricGraph:
    if "file" in section:
        path = (base / section["file"]).resolve()
        if not path.is_file():
            raise ConfigError(f"graph file {str(path)!r} not found")
        with open(path, "rb") as fh:
            sub = tomllib.load(fh)
        return _graph_from(sub.get("graph", sub), path.parent, basis_sec, echo)
    preset = section.get("preset")
    if preset is None:
        if "edges" not in section:
            raise ConfigError("graph needs a preset, a file or an [graph.edges] table")
        spec = dict(section)
        for eid, e in spec["edges"].items():
            if isinstance(e, Mapping) and isinstance(e.get("length"), str):
                echo[f"graph.edges.{eid}.length"] = _fmt(parse_real(e["length"]))
        return build_graph(spec)
    if preset == "tadpole":
        return tadpole_graph()
    if preset == "star":
        lengths = section.get("lengths", basis_sec.get("lengths", ["cbrt(2)", "cbrt(5)"]))
        vals = [parse_real(L) for L in lengths]
        for text, v in zip(lengths, vals):
            echo[f"length {text}"] = _fmt(v)
        return star_graph(vals)
    if preset == "chain":
        length = section.get("length", basis_sec.get("length", 1))
        kind = section.get("chain_kind", _CHAIN_KIND.get(basis_sec.get("chain_class", "I2")))
        n_edges = int(section.get("n_edges", basis_sec.get("n_edges", 2)))
        echo[f"length {length}"] = _fmt(parse_real(length))
        return chain_graph(n_edges, parse_real(length), kind)
    raise ConfigError(f"unknown graph preset {preset!r}; expected one of {GRAPH_PRESETS}")


_CHAIN_KIND = {"I1": "neumann", "I2": "dirichlet", "I3": "loop"}


def _basis_factory(section: Mapping, graph: MetricGraph) -> Callable[[int], SpectralBasis]:
    family = section.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"basis.family must be one of {FAMILIES}, got {family!r}")
    if family == "tadpole":
        loop = section.get("loop", "e1")
        return lambda n: tadpole_basis(n, graph, loop)
    if family == "star":
        lengths = section.get("lengths", ["cbrt(2)", "cbrt(5)"])
        pairs = section.get("pairs")
        pairs = [tuple(p) for p in pairs] if pairs else None
        return lambda n: star_pair_basis(lengths, n, graph, pairs).truncate(n)
    length = section.get("length", 1)
    chain_class = section.get("chain_class", "I2")
    return lambda n: uniform_chain_basis(length, chain_class, n, n_edges=section.get("n_edges"),
                                         graph=graph, edges=section.get("edges"))


def _basis_from(section: Mapping, graph: MetricGraph) -> tuple[SpectralBasis, Callable]:
    factory = _basis_factory(section, graph)
    if "N" not in section:
        raise ConfigError("basis.N is required")
    N = section["N"]
    if not isinstance(N, int) or isinstance(N, bool) or N < 2:
        raise ConfigError("basis.N must be an integer >= 2")
    basis = factory(N)
    if len(basis.modes) < N:
        raise ConfigError(f"basis has {len(basis.modes)} modes, fewer than N={N}")
    return basis.truncate(N), factory


def _operator_from(section: Mapping, graph: MetricGraph, basis_sec: Mapping,
                   echo: dict) -> ControlOperator:
    if "term" in section:
        terms = section["term"]
        if not isinstance(terms, list) or not terms:
            raise ConfigError("[[B.term]] must list at least one term")
        for i, t in enumerate(terms):
            if isinstance(t.get("scale"), str):
                echo[f"B.term.{i}.scale"] = _fmt(parse_real(t["scale"]))
        return operator_from_spec(terms, graph)
    preset = section.get("preset")
    if preset == "tadpole":
        return tadpole_operator(graph, basis_sec.get("loop", "e1"))
    if preset == "star":
        lengths = section.get("lengths", basis_sec.get("lengths", ["cbrt(2)", "cbrt(5)"]))
        return star_operator(lengths, graph, symmetric=bool(section.get("symmetric", True)))
    raise ConfigError("B needs a preset ('tadpole' or 'star') or [[B.term]] tables")


def _merge_params(kind: str, given: Mapping) -> dict:
    defaults = DEFAULTS[kind]
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown parameters for {kind}: {', '.join(unknown)}")
    params = {**defaults, **given}
    for key, val in params.items():
        if key.endswith("tol") and val is not None:
            if not isinstance(val, (int, float)) or not val > 0 or not math.isfinite(val):
                raise ConfigError(f"tolerance {key} must be positive, got {val!r}")
    return params


def load_config(source: str | Path | Mapping, out_dir: str | Path | None = None,
                seed: int | None = None) -> ScenarioConfig:
    """Load and validate a scenario.

    Parameters
    ----------
    source : path or mapping
        TOML file, or an already parsed mapping.
    out_dir : path, optional
        Overrides ``output.dir``; the default is ``qgc-out/<name>``.
    seed : int, optional
        Overrides ``seed``.

    Raises
    ------
    ConfigError
        Missing or invalid entries; graph, expression and basis errors are
        re-raised as :class:`ConfigError` with the section name.
    """
    if isinstance(source, Mapping):
        raw, path = dict(source), None
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} not found")
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not raw:
        raise ConfigError("empty configuration")
    base = path.parent if path else Path.cwd()
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    name = str(raw.get("name") or (path.stem if path else "scenario"))
    for key in ("graph", "basis", "B"):
        if not isinstance(raw.get(key), Mapping):
            raise ConfigError(f"missing [{key}] section")
    echo: dict = {}
    stage = "graph"
    try:
        graph = _graph_from(raw["graph"], base, raw["basis"], echo)
        stage = "basis"
        basis, factory = _basis_from(raw["basis"], graph)
        stage = "B"
        operator = _operator_from(raw["B"], graph, raw["basis"], echo)
    except ConfigError:
        raise
    except (GraphError, ExpressionError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"[{stage}] {exc}") from exc
    params = _merge_params(kind, raw.get("params", {}))
    out = out_dir or raw.get("output", {}).get("dir") or Path("qgc-out") / name
    seed_val = seed if seed is not None else raw.get("seed", 0)
    if not isinstance(seed_val, int) or isinstance(seed_val, bool):
        raise ConfigError("seed must be an integer")
    return ScenarioConfig(name, kind, str(raw.get("description", "")), graph, basis, operator,
                          params, Path(out), int(seed_val), path, echo, factory)
