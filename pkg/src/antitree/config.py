"""Experiment configuration files.

Grammar: INI-style text, UTF-8. ``[section]`` headers, one ``key = value``
per line, ``#`` or ``;`` starts a comment line. Keys are case-sensitive,
duplicate sections or keys are errors, and every section and key must be
listed in the schema of the chosen experiment (strict mode). Lists are
comma-separated; configuration triples ``n x r x m`` are written ``20x3x2``.

Every file has a ``[run]`` section::

    [run]
    experiment = oracle_equivalence
    seed = 1
    output_dir = out/oracle    # optional, default "out/<experiment>"
    workers = 1                # optional

plus the sections of its experiment, see ``SCHEMAS``.
"""
import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError

OUTPUT_ROOT_ENV = "ANTITREE_OUTPUT_ROOT"

EXPERIMENTS = (
    "oracle_equivalence",
    "harmonic_mc",
    "channel_conjugation",
    "sde_refinement",
    "goe_gap_compare",
    "antitree_pipeline",
)

_REQUIRED = object()


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _triples(text):
    out = []
    for item in text.split(","):
        parts = item.strip().lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"expected n x r x m, got {item.strip()!r}")
        out.append(tuple(int(p) for p in parts))
    return out


def _opt_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# (parser, default); formatted back by _format
_DISORDER = {
    "kind": (str, "two_point_symmetric"),
    "sigma": (float, 1.0),
    "scale": (_opt_float, None),
    "location": (_opt_float, None),
}

SCHEMAS = {
    "oracle_equivalence": {
        "graph": {"n": (int, _REQUIRED), "r": (int, _REQUIRED), "s": (int, _REQUIRED), "w": (float, 0.0)},
        "disorder": _DISORDER,
        "scan": {"window_lo": (_opt_float, None), "window_hi": (_opt_float, None),
                 "grid_step": (_opt_float, None), "seeds": (int, 1), "tolerance": (float, 1e-8)},
    },
    "harmonic_mc": {
        "disorder": _DISORDER,
        "harmonic": {"lam": (float, _REQUIRED), "s_grid": (_int_list, [50, 100, 200, 400]),
                     "samples": (int, 1_000_000), "n_se": (float, 5.0)},
    },
    "channel_conjugation": {
        "disorder": _DISORDER,
        "channels": {"w": (float, 0.0), "r_values": (_int_list, [3, 5, 8]), "lam_values": (_float_list, _REQUIRED),
                     "tolerance": (float, 1e-10)},
    },
    "sde_refinement": {
        "disorder": _DISORDER,
        "sde": {"lam": (float, _REQUIRED), "w": (float, 0.0), "r": (int, _REQUIRED),
                "m_values": (_float_list, [100.0, 1000.0, 10000.0]), "eps_values": (_float_list, [-1.0, 0.0, 1.0]),
                "t_steps": (int, 10_000), "seeds": (int, 10)},
        "transfer": {"n": (int, _REQUIRED), "s": (int, _REQUIRED), "m": (int, _REQUIRED)},
    },
    "goe_gap_compare": {
        "goe": {"r_e": (int, 400), "ensemble": (int, 200), "bulk_fraction": (float, 0.5),
                "surmise_threshold": (float, 0.05), "poisson_threshold": (float, 0.15)},
    },
    "antitree_pipeline": {
        "disorder": _DISORDER,
        "pipeline": {"lam": (float, _REQUIRED), "w": (float, 0.0), "configs": (_triples, _REQUIRED),
                     "ensemble": (int, 400), "window": (float, 12.0), "density_half_width": (float, 0.3),
                     "reference_r_e": (int, 400), "reference_ensemble": (int, 50), "bootstrap": (int, 200)},
    },
}

# sections that may be omitted entirely
OPTIONAL_SECTIONS = {"sde_refinement": {"transfer"}}

_RUN = {"experiment": (str, _REQUIRED), "seed": (int, _REQUIRED), "output_dir": (str, None), "workers": (int, 1)}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    params: dict
    output_dir: str
    workers: int = 1
    source: str = field(default=None, compare=False)

    def section(self, name):
        return self.params.get(name)

    def to_text(self):
        """Serialize; :func:`parse_text` of the result gives an equal config."""
        lines = ["[run]", f"experiment = {self.experiment}", f"seed = {self.seed}",
                 f"output_dir = {self.output_dir}", f"workers = {self.workers}"]
        for sec, values in self.params.items():
            lines += ["", f"[{sec}]"]
            for key, val in values.items():
                if val is not None:
                    lines.append(f"{key} = {_format(val)}")
        return "\n".join(lines) + "\n"


def _format(val):
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, list):
        if val and isinstance(val[0], tuple):
            return ", ".join("x".join(str(x) for x in t) for t in val)
        return ", ".join(_format(v) for v in val)
    return str(val)


def _parse_section(name, raw, schema, where):
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigurationError(f"{where}: unknown key {unknown[0]!r} in section [{name}]")
    out = {}
    for key, (parser, default) in schema.items():
        if key in raw:
            try:
                out[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigurationError(f"{where}: bad value for [{name}] {key} = {raw[key]!r}: {exc}") from None
        elif default is _REQUIRED:
            raise ConfigurationError(f"{where}: missing required key [{name}] {key}")
        else:
            out[key] = list(default) if isinstance(default, list) else default
    return out


def parse_text(text, where="<config>"):
    cp = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"),
                                   empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=where)
    except configparser.ParsingError as exc:
        line, content = exc.errors[0] if getattr(exc, "errors", None) else (None, None)
        raise ConfigurationError(f"{where}: parse error at line {line}, column 1: {content}") from None
    except configparser.Error as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    if not cp.has_section("run"):
        raise ConfigurationError(f"{where}: missing [run] section")
    run = _parse_section("run", dict(cp["run"]), _RUN, where)
    exp = run["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigurationError(f"{where}: unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
    schema = SCHEMAS[exp]
    extra = sorted(set(cp.sections()) - set(schema) - {"run"})
    if extra:
        raise ConfigurationError(f"{where}: unknown section [{extra[0]}] for experiment {exp}")
    params = {}
    for sec, sch in schema.items():
        if not cp.has_section(sec):
            if sec in OPTIONAL_SECTIONS.get(exp, ()):
                continue
            cp.add_section(sec)
        params[sec] = _parse_section(sec, dict(cp[sec]), sch, where)
    cfg = ExperimentConfig(exp, run["seed"], params, run["output_dir"] or os.path.join("out", exp), run["workers"],
                           source=where)
    validate(cfg)
    return cfg


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid UTF-8: {exc}") from None
    return parse_text(text, where=str(path))


def disorder_from(section):
    from .disorder import DisorderSpec

    extra = {k: section[k] for k in ("scale", "location") if section.get(k) is not None}
    return DisorderSpec(section["kind"], section["sigma"], extra)


def _positive(cfg, sec, *keys):
    for key in keys:
        val = cfg.params[sec][key]
        vals = val if isinstance(val, list) else [val]
        for v in vals:
            if v is not None and not v > 0:
                raise ConfigurationError(f"[{sec}] {key} must be positive, got {v!r}")


def validate(cfg):
    """Range checks done before any computation."""
    if cfg.seed < 0:
        raise ConfigurationError("[run] seed must be non-negative")
    if cfg.workers < 1:
        raise ConfigurationError("[run] workers must be >= 1")
    if "disorder" in cfg.params:
        disorder_from(cfg.params["disorder"])
    exp = cfg.experiment
    if exp == "oracle_equivalence":
        _positive(cfg, "graph", "n", "r", "s")
        _positive(cfg, "scan", "seeds", "tolerance")
        sc = cfg.params["scan"]
        if sc["window_lo"] is not None and sc["window_hi"] is not None and not sc["window_hi"] > sc["window_lo"]:
            raise ConfigurationError("[scan] window_hi must exceed window_lo")
    elif exp == "harmonic_mc":
        _positive(cfg, "harmonic", "s_grid", "samples", "n_se")
    elif exp == "channel_conjugation":
        _positive(cfg, "channels", "r_values", "tolerance")
    elif exp == "sde_refinement":
        _positive(cfg, "sde", "r", "m_values", "t_steps", "seeds")
        if cfg.params["sde"]["t_steps"] < 100:
            raise ConfigurationError("[sde] t_steps must be >= 100")
        tr = cfg.params.get("transfer")
        if tr is not None:
            _positive(cfg, "transfer", "n", "s", "m")
            if tr["s"] != tr["m"] * tr["n"]:
                raise ConfigurationError(f"[transfer] s must equal m*n = {tr['m'] * tr['n']}, got s = {tr['s']}")
    elif exp == "goe_gap_compare":
        _positive(cfg, "goe", "r_e", "ensemble", "bulk_fraction")
    elif exp == "antitree_pipeline":
        _positive(cfg, "pipeline", "ensemble", "window", "density_half_width", "reference_r_e",
                  "reference_ensemble", "bootstrap")
        for triple in cfg.params["pipeline"]["configs"]:
            if min(triple) < 1:
                raise ConfigurationError(f"[pipeline] configs entries must be positive, got {triple}")
    return cfg


def resolve_output_dir(cfg):
    """``output_dir``, placed under ``$ANTITREE_OUTPUT_ROOT`` when that is set and the path is relative."""
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(cfg.output_dir):
        return os.path.join(root, cfg.output_dir)
    return cfg.output_dir
