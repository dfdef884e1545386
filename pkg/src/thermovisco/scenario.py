"""Scenario files: sectioned ``key = value`` text.

Values are numbers, expression strings (see :mod:`thermovisco.expressions`)
or Python-style list/tuple literals.  :func:`load` validates everything and
reports every violation at once, each tagged with its line number.
"""
from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .expressions import Expression

EVOLUTION, RENORMHEAT = "evolution", "renormheat"

# section -> key -> default (None: required)
SCHEMA = {
    "mesh": {"Lx": 1.0, "Ly": 1.0, "nx": 16, "ny": 16},
    "material": {"lame_lambda": "1.0", "lame_mu": "1.0", "elasticity_full": ""},
    "orlicz": {"family": "variable-exponent-power", "p": "2", "profile": "",
               "radial_grid_size": 2048, "eta_floor": 0.5, "eta_cap": 3.0},
    "constitutive": {"family": "norton-hoff-power", "p": "2", "phi": "1", "phi_min": 1.0,
                     "phi_max": 1.0, "scale": "1"},
    "loads": {"f_x": "0", "f_y": "0", "g_x": "0", "g_y": "0", "g_theta": "0"},
    "initial": {"theta0": "0", "theta_lift0": "0", "eps_p0_11": "0", "eps_p0_22": "0",
                "eps_p0_33": "0", "eps_p0_12": "0"},
    "discretization": {"k": 8, "l": 8, "K": "", "dt": 0.01, "T_final": 1.0, "output_stride": 10,
                       "quad_order": 4},
    "checks": {"identity_tol": 1e-4, "samples": 10000, "seed": 0},
    "study": {"mode": EVOLUTION, "sweep_kl": "[(4, 4), (8, 8), (16, 16)]",
              "sweep_dt": "[0.04, 0.02, 0.01]", "sweep_K": "[2, 4, 8, 16]"},
    "renormheat": {"source_center": "(0.4137, 0.5291)", "source_exponent": 1.5,
                   "initial_center": "none", "initial_exponent": 1.0,
                   "eps": "[0.25, 0.0625, 0.015625]", "K_values": "[1, 2, 4, 8, 16, 32]",
                   "tail_c": 1.0, "S_levels": "[1, 2, 4]", "comparison_shift": 1.0},
}


@dataclass
class Scenario:
    path: str
    values: dict                       # section -> key -> parsed value
    name: str = ""
    text: str = ""                     # source, so worker processes can re-parse

    def get(self, section, key):
        return self.values[section][key]

    @property
    def mode(self):
        return self.values["study"]["mode"]

    def with_overrides(self, **changes) -> "Scenario":
        """Copy with ``section__key=value`` overrides (values already parsed)."""
        vals = {s: dict(v) for s, v in self.values.items()}
        for dotted, value in changes.items():
            section, key = dotted.split("__")
            vals[section][key] = value
        return Scenario(self.path, vals, self.name, self.text)


class _Issues:
    def __init__(self, text):
        self.items = []
        self.lines = text.splitlines()

    def line_of(self, section, key=None):
        current = None
        for i, raw in enumerate(self.lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                if key is None and current == section:
                    return i
                continue
            if current == section and key is not None:
                name = s.split("=", 1)[0].split(":", 1)[0].strip()
                if name == key:
                    return i
        return None

    def add(self, section, key, msg):
        line = self.line_of(section, key)
        where = f"line {line}: " if line else ""
        self.items.append(f"{where}[{section}] {key}: {msg}")


def _literal(text):
    s = str(text).strip()
    if s.lower() == "none" or s == "":
        return None
    return ast.literal_eval(s)


def _as_number_or_expr(text, issues, section, key, variables):
    s = str(text).strip()
    try:
        return float(s)
    except ValueError:
        pass
    if s.startswith("["):
        try:
            return np.asarray(ast.literal_eval(s), dtype=float)
        except (ValueError, SyntaxError) as exc:
            issues.add(section, key, f"bad array literal ({exc})")
            return None
    try:
        return Expression(s, allowed=variables)
    except ConfigError as exc:
        issues.add(section, key, str(exc))
        return None


def load(path) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"scenario file {path} not found") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not UTF-8: {exc}") from None
    return loads(text, str(path))


def loads(text, path="<string>") -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    issues = _Issues(text)
    for section in parser.sections():
        if section not in SCHEMA:
            issues.add(section, "*", f"unknown section (expected one of {sorted(SCHEMA)})")
            continue
        for key in parser[section]:
            if key not in SCHEMA[section]:
                issues.add(section, key, f"unknown key (expected one of {sorted(SCHEMA[section])})")
    raw = {s: {k: (parser[s][k] if parser.has_option(s, k) else d) for k, d in keys.items()}
           for s, keys in SCHEMA.items()}
    vals = {s: {} for s in SCHEMA}

    def number(section, key, kind=float, positive=False, minimum=None):
        try:
            v = kind(str(raw[section][key]).strip())
        except ValueError:
            issues.add(section, key, f"expected a {kind.__name__}, got {raw[section][key]!r}")
            return None
        if positive and not v > 0:
            issues.add(section, key, f"must be positive, got {v}")
        if minimum is not None and v < minimum:
            issues.add(section, key, f"must be at least {minimum}, got {v}")
        vals[section][key] = v
        return v

    number("mesh", "Lx", positive=True)
    number("mesh", "Ly", positive=True)
    number("mesh", "nx", int, minimum=2)
    number("mesh", "ny", int, minimum=2)

    xy = ("x", "y")
    for key in ("lame_lambda", "lame_mu"):
        vals["material"][key] = _as_number_or_expr(raw["material"][key], issues, "material", key, xy)
    full = str(raw["material"]["elasticity_full"]).strip()
    vals["material"]["elasticity_full"] = None
    if full:
        try:
            arr = np.asarray(ast.literal_eval(full), dtype=float)
            if arr.shape != (3, 3, 3, 3):
                raise ValueError(f"shape {arr.shape}, expected (3,3,3,3)")
            vals["material"]["elasticity_full"] = arr
        except (ValueError, SyntaxError) as exc:
            issues.add("material", "elasticity_full", f"bad tensor literal ({exc})")

    fam = str(raw["orlicz"]["family"]).strip()
    if fam not in ("variable-exponent-power", "user-radial"):
        issues.add("orlicz", "family", f"unknown N-function family {fam!r}")
    vals["orlicz"]["family"] = fam
    vals["orlicz"]["p"] = _as_number_or_expr(raw["orlicz"]["p"], issues, "orlicz", "p", xy)
    prof = str(raw["orlicz"]["profile"]).strip()
    vals["orlicz"]["profile"] = None
    if fam == "user-radial":
        if not prof:
            issues.add("orlicz", "profile", "user-radial family needs a profile expression in r")
        else:
            try:
                vals["orlicz"]["profile"] = Expression(prof, allowed=("r",))
            except ConfigError as exc:
                issues.add("orlicz", "profile", str(exc))
    number("orlicz", "radial_grid_size", int, minimum=16)
    number("orlicz", "eta_floor", positive=True)
    number("orlicz", "eta_cap", positive=True)

    cfam = str(raw["constitutive"]["family"]).strip()
    if cfam != "norton-hoff-power":
        issues.add("constitutive", "family", f"unknown flow-law family {cfam!r}")
    vals["constitutive"]["family"] = cfam
    vals["constitutive"]["p"] = _as_number_or_expr(raw["constitutive"]["p"], issues, "constitutive", "p", xy)
    try:
        vals["constitutive"]["phi"] = Expression(raw["constitutive"]["phi"], allowed=("theta",))
    except ConfigError as exc:
        issues.add("constitutive", "phi", str(exc))
    lo = number("constitutive", "phi_min", positive=True)
    hi = number("constitutive", "phi_max", positive=True)
    if lo is not None and hi is not None and lo > hi:
        issues.add("constitutive", "phi_max", f"phi_max={hi} is below phi_min={lo}")
    sc = str(raw["constitutive"]["scale"]).strip()
    if sc == "auto":
        vals["constitutive"]["scale"] = "auto"
    else:
        number("constitutive", "scale", positive=True)

    for key in ("f_x", "f_y", "g_x", "g_y"):
        try:
            vals["loads"][key] = Expression(raw["loads"][key], allowed=xy)
        except ConfigError as exc:
            issues.add("loads", key, str(exc))
    try:
        vals["loads"]["g_theta"] = Expression(raw["loads"]["g_theta"], allowed=("x", "y", "t", "nx", "ny"))
    except ConfigError as exc:
        issues.add("loads", "g_theta", str(exc))
    for key in SCHEMA["initial"]:
        try:
            vals["initial"][key] = Expression(raw["initial"][key], allowed=xy)
        except ConfigError as exc:
            issues.add("initial", key, str(exc))

    k = number("discretization", "k", int, minimum=1)
    l = number("discretization", "l", int, minimum=1)
    kraw = str(raw["discretization"]["K"]).strip()
    if kraw == "":
        vals["discretization"]["K"] = float(k) if k is not None else None
    else:
        number("discretization", "K", positive=True)
    number("discretization", "dt", positive=True)
    number("discretization", "T_final", minimum=0.0)
    number("discretization", "output_stride", int, minimum=1)
    q = number("discretization", "quad_order", int)
    if q is not None and q not in (1, 2, 4):
        issues.add("discretization", "quad_order", f"no Gauss rule of order {q}; use 1, 2 or 4")

    number("checks", "identity_tol", positive=True)
    number("checks", "samples", int, minimum=1)
    number("checks", "seed", int)

    mode = str(raw["study"]["mode"]).strip()
    if mode not in (EVOLUTION, RENORMHEAT):
        issues.add("study", "mode", f"unknown study mode {mode!r}")
    vals["study"]["mode"] = mode
    for key in ("sweep_kl", "sweep_dt", "sweep_K"):
        try:
            vals["study"][key] = _literal(raw["study"][key])
        except (ValueError, SyntaxError) as exc:
            issues.add("study", key, f"bad list literal ({exc})")

    rsec = raw["renormheat"]
    for key in ("source_center", "initial_center", "eps", "K_values", "S_levels"):
        try:
            vals["renormheat"][key] = _literal(rsec[key])
        except (ValueError, SyntaxError) as exc:
            issues.add("renormheat", key, f"bad literal ({exc})")
    number("renormheat", "source_exponent", positive=True)
    number("renormheat", "initial_exponent", positive=True)
    number("renormheat", "tail_c", positive=True)
    number("renormheat", "comparison_shift", positive=True)

    _validate(vals, issues)
    if issues.items:
        raise ConfigError(f"{path}: {len(issues.items)} problem(s):\n  " + "\n  ".join(issues.items))
    name = Path(path).stem if path != "<string>" else "scenario"
    return Scenario(path, vals, name, text)


def _same_exponent(a, b):
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    if isinstance(a, Expression) and isinstance(b, Expression):
        return a.text.replace(" ", "") == b.text.replace(" ", "")
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return a.shape == b.shape and np.array_equal(a, b)
    return False


def _describe(v):
    if isinstance(v, Expression):
        return v.text
    if isinstance(v, np.ndarray):
        return f"array{list(v.shape)}"
    return f"{v:g}" if isinstance(v, float) else repr(v)


def _validate(vals, issues):
    """Cross-field invariants."""
    pM, pG = vals["orlicz"].get("p"), vals["constitutive"].get("p")
    if pM is not None and pG is not None and vals["orlicz"]["family"] == "variable-exponent-power":
        if not _same_exponent(pM, pG):
            issues.add("constitutive", "p", f"flow-law exponent {_describe(pG)} differs from the "
                                            f"N-function exponent {_describe(pM)}")
    if isinstance(pM, float) and not 1.0 < pM < np.inf:
        issues.add("orlicz", "p", f"exponent must exceed 1, got {pM}")
    m = vals["mesh"]
    disc = vals["discretization"]
    if None not in (m.get("nx"), m.get("ny"), disc.get("k"), disc.get("l")):
        nx, ny = m["nx"], m["ny"]
        n_nodes, n_int, n_el = (nx + 1) * (ny + 1), (nx - 1) * (ny - 1), 2 * nx * ny
        if disc["k"] > 2 * n_int:
            issues.add("discretization", "k", f"k={disc['k']} exceeds twice the interior node count {2 * n_int}")
        if disc["l"] > n_nodes - 1:
            issues.add("discretization", "l", f"l={disc['l']} exceeds the node count minus one {n_nodes - 1}")
        if disc["l"] > 4 * n_el - disc["k"]:
            issues.add("discretization", "l", f"l={disc['l']} exceeds the complement dimension {4 * n_el - disc['k']}")
    if disc.get("K") is not None and not disc["K"] > 0:
        issues.add("discretization", "K", f"truncation level must be positive, got {disc['K']}")
    o = vals["orlicz"]
    if o.get("eta_floor") and o.get("eta_cap") and o["eta_floor"] >= o["eta_cap"]:
        issues.add("orlicz", "eta_cap", "eta_cap must exceed eta_floor")
    r = vals["renormheat"]
    eps = r.get("eps")
    if vals["study"].get("mode") == RENORMHEAT and eps is not None:
        if not (isinstance(eps, (list, tuple)) and len(eps) >= 2 and all(e > 0 for e in eps)):
            issues.add("renormheat", "eps", "need at least two positive eps values")
        se = r.get("source_exponent")
        if se is not None and not se < 2.0:
            issues.add("renormheat", "source_exponent", f"must be below 2 for an integrable source, got {se}")
    sk = vals["study"].get("sweep_kl")
    if sk is not None:
        try:
            ok = all(len(p) == 2 and int(p[0]) >= 1 and int(p[1]) >= 1 for p in sk)
        except TypeError:
            ok = False
        if not ok:
            issues.add("study", "sweep_kl", "expected a list of (k, l) pairs with k, l >= 1")
