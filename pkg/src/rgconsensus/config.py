"""Run configuration: parsing, schema validation, dimension checks, emission.

Config files are YAML; plain JSON documents are accepted as well since YAML
reads them.  The schema lives in ``schema/config.schema.json`` next to this
module.  Every error names the offending line when it can.
"""

from __future__ import annotations

import copy
import json
import re
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from . import scenarios
from .errors import ConfigError
from .mcai import DEFAULT_DELTA, DEFAULT_EPS, DEFAULT_MAX_HORIZON
from .network import DEFAULT_WEIGHT_FLOOR, GraphSchedule, WeightedDigraph
from .polytope import HPolytope
from .regulator import AgentModel, ReferenceModel
from .simulator import AgentSetup, Scenario, random_scenario

BUILTIN = ("paper-s1", "paper-s2")


class _Loader(yaml.SafeLoader):
    pass


# PyYAML follows YAML 1.1, where "1e-3" is a string.  Accept the usual forms.
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+][0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class _Dumper(yaml.SafeDumper):
    def ignore_aliases(self, data):
        return True


def schema() -> dict:
    text = resources.files(__package__).joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _line_of(text: str, path) -> int | None:
    """1-based line of the node at ``path`` (keys / indices) in ``text``."""
    try:
        node = yaml.compose(text, Loader=_Loader)
    except yaml.YAMLError:
        return None
    line = None if node is None else node.start_mark.line + 1
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def _where(source: str, line: int | None) -> str:
    return f"{source}:{line}" if line else source


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse and validate a config document; raises ConfigError."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{_where(source, line)}: cannot parse: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = list(e.absolute_path)
            dotted = "/".join(str(p) for p in path) or "(root)"
            lines.append(f"{_where(source, _line_of(text, path))}: {dotted}: {e.message}")
        raise ConfigError("\n".join(lines))
    try:
        check_dimensions(doc)
    except ConfigError as exc:
        path = exc.args[1] if len(exc.args) > 1 else []
        raise ConfigError(f"{_where(source, _line_of(text, path))}: {exc.args[0]}") from None
    return doc


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from exc
    return parse_config(text, str(p))


def emit_config(cfg: dict) -> str:
    return yaml.dump(cfg, Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=100)


def builtin_config(name: str, horizon: int | None = None) -> dict:
    if name not in BUILTIN:
        raise ConfigError(f"unknown built-in scenario {name!r} (choose from {', '.join(BUILTIN)})")
    return scenarios.config_dict(name, horizon or 500)


def _rect(m, what, path):
    if len({len(r) for r in m}) != 1:
        raise ConfigError(f"{what} has rows of different length", path)
    return len(m), len(m[0])


def check_dimensions(cfg: dict) -> None:
    """Check every matrix size before any numerics run.

    Raises ConfigError with ``args = (message, path)``.
    """
    q, two = _rect(cfg["reference"]["Q"], "Q", ["reference", "Q"])
    if two != 2:
        raise ConfigError(f"Q must have 2 columns, got {two}", ["reference", "Q"])
    for i, a in enumerate(cfg["agents"]):
        at = ["agents", i]
        n, n2 = _rect(a["A"], "A", at + ["A"])
        if n != n2:
            raise ConfigError(f"agent {i + 1}: A must be square, got {n}x{n2}", at + ["A"])
        nb, p = _rect(a["B"], "B", at + ["B"])
        if nb != n:
            raise ConfigError(f"agent {i + 1}: B has {nb} rows, expected {n}", at + ["B"])
        qc, nc = _rect(a["C"], "C", at + ["C"])
        if (qc, nc) != (q, n):
            raise ConfigError(f"agent {i + 1}: C is {qc}x{nc}, expected {q}x{n}", at + ["C"])
        if "K" in a:
            pk, nk = _rect(a["K"], "K", at + ["K"])
            if (pk, nk) != (p, n):
                raise ConfigError(f"agent {i + 1}: K is {pk}x{nk}, expected {p}x{n}", at + ["K"])
        if "u_bounds" in a:
            lo, hi = a["u_bounds"]["lo"], a["u_bounds"]["hi"]
            if len(lo) != p or len(hi) != p:
                raise ConfigError(f"agent {i + 1}: input bounds need {p} entries", at + ["u_bounds"])
            if any(not (l < 0 < h) for l, h in zip(lo, hi)):
                raise ConfigError(f"agent {i + 1}: input bounds must satisfy lo < 0 < hi", at + ["u_bounds"])
        else:
            _, pu = _rect(a["U"]["G"], "U.G", at + ["U", "G"])
            if pu != p or len(a["U"]["g"]) != len(a["U"]["G"]):
                raise ConfigError(f"agent {i + 1}: U does not match {p} inputs", at + ["U"])
        if len(a["x0"]) != n:
            raise ConfigError(f"agent {i + 1}: x0 has {len(a['x0'])} entries, expected {n}", at + ["x0"])
    g = cfg["graph"]
    if g["n_nodes"] != len(cfg["agents"]):
        raise ConfigError(f"graph has {g['n_nodes']} nodes but there are {len(cfg['agents'])} agents",
                          ["graph", "n_nodes"])
    for k, edges in enumerate(g["graphs"]):
        for e, edge in enumerate(edges):
            if edge["to"] > g["n_nodes"] or edge["from"] > g["n_nodes"]:
                raise ConfigError(f"edge refers to agent beyond {g['n_nodes']}", ["graph", "graphs", k, e])
            if edge["to"] == edge["from"]:
                raise ConfigError("self loops are implied; do not list them", ["graph", "graphs", k, e])
    sw = g.get("switching", {"kind": "cyclic"})
    if sw["kind"] == "timeline":
        tl = sw.get("timeline", [])
        if not tl or max(tl) >= len(g["graphs"]):
            raise ConfigError("timeline must be nonempty and refer to listed graphs", ["graph", "switching"])
    m = cfg.get("mcai", {})
    eps, delta = m.get("eps", DEFAULT_EPS), m.get("delta", DEFAULT_DELTA)
    if eps > 0 and not 0 < delta < eps:
        raise ConfigError(f"need 0 < delta < eps, got delta={delta}, eps={eps}", ["mcai"])


def agent_model(a: dict, name: str) -> AgentModel:
    if "u_bounds" in a:
        U = HPolytope.box(a["u_bounds"]["lo"], a["u_bounds"]["hi"])
    else:
        U = HPolytope(a["U"]["G"], a["U"]["g"])
    return AgentModel(a["A"], a["B"], a["C"], U, K=a.get("K"), name=a.get("name", name))


def reference_model(cfg: dict) -> ReferenceModel:
    return ReferenceModel(cfg["reference"]["h"], cfg["reference"]["Q"])


def schedule(cfg: dict) -> GraphSchedule:
    g = cfg["graph"]
    n = g["n_nodes"]
    graphs = [WeightedDigraph(n, {(e["to"] - 1, e["from"] - 1): e["weight"] for e in edges})
              for edges in g["graphs"]]
    sw = g.get("switching", {"kind": "cyclic"})
    return GraphSchedule(
        graphs,
        kind=sw["kind"],
        period=sw.get("period", 1),
        timeline=sw.get("timeline", ()),
        window=g.get("window", len(graphs)),
        weight_floor=g.get("weight_floor", DEFAULT_WEIGHT_FLOOR),
    )


def mcai_params(cfg: dict) -> tuple[float, float, int]:
    m = cfg.get("mcai", {})
    return (m.get("eps", DEFAULT_EPS), m.get("delta", DEFAULT_DELTA),
            m.get("max_horizon", DEFAULT_MAX_HORIZON))


def build_scenario(cfg: dict) -> Scenario:
    """Solve regulators and invariant sets and assemble the run."""
    ref = reference_model(cfg)
    eps, delta, max_h = mcai_params(cfg)
    setups = [AgentSetup.build(agent_model(a, f"agent{i + 1}"), ref, a["x0"], a["w0"], eps, delta, max_h)
              for i, a in enumerate(cfg["agents"])]
    scn = Scenario(
        setups, ref, schedule(cfg),
        horizon=cfg.get("horizon", 500),
        settle_steps=cfg.get("settle_steps", 20),
        spread_tol=cfg.get("spread_tol", 1e-6),
        seed=cfg.get("seed", 0),
        name=cfg.get("name", ""),
    )
    if cfg.get("randomize", False):
        scn = random_scenario(scn, scn.seed)
    return scn


def with_overrides(cfg: dict, *, seed=None, horizon=None) -> dict:
    out = copy.deepcopy(cfg)
    if seed is not None:
        out["seed"] = int(seed)
    if horizon is not None:
        out["horizon"] = int(horizon)
    return out
