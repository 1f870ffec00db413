"""Problem configuration: a small INI dialect, validation, and assembly
into :class:`~volterra.problem.ProblemSpec`.

Layout::

    [domain]
    dim = 1
    omega = (0, inf)            # omega_1, omega_2, ... when dim > 1
    exhaustion = anchored       # or: standard
    lambda_lower = "0"          # lambda_lower_i / lambda_upper_i when dim > 1
    lambda_upper = "x1"
    tau = "x1"

    [kernel]
    m = 1                       # optional, component count
    k = "1"                     # k_11 .. k_mm when m > 1

    [F]
    f = "u"                     # or: h1 = ..., h2 = ... envelope pair
    b = "1"                     # growth weight
    eta = "1"                   # fiber (condensing) weight

    [outer]
    form = additive             # nested | setvalued
    g = "1"                     # g_1 .. g_m for vector additive problems
    phi = "0"                   # value-variation modulus, expression in x

    [solve]
    n = 3
    h = 0.00390625
    tol_fix = 1e-10
    max_iter = 1000
    strategy = midpoint         # lower | upper
    a_rule = auto               # linear:<c> | list:v1,v2,...

Expressions may be quoted or bare.  Coordinates are x1..xN (alias t when
dim = 1), integration variables y1..yN (alias s), state u / u1..uM, the
nested form's integral argument u2, the set-valued envelope argument w, and
plain x inside the scalar moduli phi / theta / vartheta.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dataclass_field
from io import StringIO

from . import expr as ex
from .domain import DomainContext, MovingRegion, OpenBox, TauMap
from .problem import (
    AdditiveOuter,
    Kernel,
    MultiMap,
    NestedOuter,
    OuterForm,
    ProblemSpec,
    SetValuedOuter,
    axis_names,
)

__all__ = [
    "ConfigError",
    "Config",
    "parse_config",
    "load_config",
    "build_problem",
    "linear_growth_config",
    "oscillating_config",
    "goursat_config",
    "BUILTIN_EXAMPLES",
    "builtin_config",
]


class ConfigError(Exception):
    """Malformed or inconsistent problem configuration."""

    def __init__(self, section: str, key: str | None, message: str) -> None:
        where = f"[{section}]" + (f" {key}" if key else "")
        super().__init__(f"{where}: {message}")
        self.section = section
        self.key = key


@dataclass
class Config:
    """Parsed configuration; expression fields stay as source text."""

    dim: int
    omega_lower: tuple[float, ...]
    omega_upper: tuple[float, ...]
    exhaustion: str
    lambda_lower: tuple[str, ...]
    lambda_upper: tuple[str, ...]
    tau: str
    m: int
    kernel: tuple[tuple[str, ...], ...]
    h1: tuple[str, ...]
    h2: tuple[str, ...]
    b: str
    eta: str
    form: str
    g: tuple[str, ...] = ()
    phi: str = "0"
    theta: str = "0"
    vartheta: str = "0"
    g_lower: str = "0"
    g_upper: str = "0"
    n: int = 1
    h: float = 0.0078125
    tol_fix: float = 1e-10
    max_iter: int = 1000
    strategy: str = "midpoint"
    a_rule: tuple = ("auto", None)
    extras: dict = dataclass_field(default_factory=dict)

    def serialize(self) -> str:
        out = StringIO()
        q = _quote
        out.write("[domain]\n")
        out.write(f"dim = {self.dim}\n")
        if self.dim == 1:
            out.write(f"omega = {_interval_text(self.omega_lower[0], self.omega_upper[0])}\n")
        else:
            for i in range(self.dim):
                out.write(
                    f"omega_{i + 1} = "
                    f"{_interval_text(self.omega_lower[i], self.omega_upper[i])}\n"
                )
        out.write(f"exhaustion = {self.exhaustion}\n")
        if self.dim == 1:
            out.write(f"lambda_lower = {q(self.lambda_lower[0])}\n")
            out.write(f"lambda_upper = {q(self.lambda_upper[0])}\n")
        else:
            for i in range(self.dim):
                out.write(f"lambda_lower_{i + 1} = {q(self.lambda_lower[i])}\n")
                out.write(f"lambda_upper_{i + 1} = {q(self.lambda_upper[i])}\n")
        out.write(f"tau = {q(self.tau)}\n\n")

        out.write("[kernel]\n")
        if self.m == 1:
            out.write(f"k = {q(self.kernel[0][0])}\n\n")
        else:
            out.write(f"m = {self.m}\n")
            for i in range(self.m):
                for j in range(self.m):
                    out.write(f"k_{i + 1}{j + 1} = {q(self.kernel[i][j])}\n")
            out.write("\n")

        out.write("[F]\n")
        if self.h1 == self.h2:
            if self.m == 1:
                out.write(f"f = {q(self.h1[0])}\n")
            else:
                for j in range(self.m):
                    out.write(f"f_{j + 1} = {q(self.h1[j])}\n")
        else:
            if self.m == 1:
                out.write(f"h1 = {q(self.h1[0])}\n")
                out.write(f"h2 = {q(self.h2[0])}\n")
            else:
                for j in range(self.m):
                    out.write(f"h1_{j + 1} = {q(self.h1[j])}\n")
                for j in range(self.m):
                    out.write(f"h2_{j + 1} = {q(self.h2[j])}\n")
        out.write(f"b = {q(self.b)}\n")
        out.write(f"eta = {q(self.eta)}\n\n")

        out.write("[outer]\n")
        out.write(f"form = {self.form}\n")
        if self.form == "setvalued":
            out.write(f"g_lower = {q(self.g_lower)}\n")
            out.write(f"g_upper = {q(self.g_upper)}\n")
            out.write(f"phi = {q(self.phi)}\n")
            out.write(f"theta = {q(self.theta)}\n")
        elif self.form == "nested":
            out.write(f"g = {q(self.g[0])}\n")
            out.write(f"phi = {q(self.phi)}\n")
            out.write(f"vartheta = {q(self.vartheta)}\n")
        else:
            if self.m == 1:
                out.write(f"g = {q(self.g[0])}\n")
            else:
                for j in range(self.m):
                    out.write(f"g_{j + 1} = {q(self.g[j])}\n")
            out.write(f"phi = {q(self.phi)}\n")
        out.write("\n[solve]\n")
        out.write(f"n = {self.n}\n")
        out.write(f"h = {self.h!r}\n")
        out.write(f"tol_fix = {self.tol_fix!r}\n")
        out.write(f"max_iter = {self.max_iter}\n")
        out.write(f"strategy = {self.strategy}\n")
        out.write(f"a_rule = {_a_rule_text(self.a_rule)}\n")
        return out.getvalue()


def _quote(text: str) -> str:
    return '"' + text + '"'


def _interval_text(lo: float, hi: float) -> str:
    def side(v: float) -> str:
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)

    return f"({side(lo)}, {side(hi)})"


def _a_rule_text(rule: tuple) -> str:
    kind, payload = rule
    if kind == "auto":
        return "auto"
    if kind == "linear":
        return f"linear:{payload!r}"
    return "list:" + ",".join(repr(float(v)) for v in payload)


def _strip_quotes(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in ("'", '"'):
        return value[1:-1]
    return value


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str) -> None:
        self.name = name
        if not parser.has_section(name):
            raise ConfigError(name, None, "section is missing")
        self.items = dict(parser.items(name))
        self.seen: set[str] = set()

    def get(self, key: str, default: str | None = None) -> str:
        self.seen.add(key)
        if key in self.items:
            return _strip_quotes(self.items[key])
        if default is None:
            raise ConfigError(self.name, key, "required key is missing")
        return default

    def has(self, key: str) -> bool:
        return key in self.items

    def getint(self, key: str, default: str | None = None) -> int:
        raw = self.get(key, default)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(self.name, key, f"expected an integer, got {raw!r}") from None

    def getfloat(self, key: str, default: str | None = None) -> float:
        raw = self.get(key, default)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(self.name, key, f"expected a number, got {raw!r}") from None

    def reject_unknown(self) -> None:
        unknown = set(self.items) - self.seen
        if unknown:
            raise ConfigError(self.name, sorted(unknown)[0], "unknown key")


def _parse_interval(section: _Section, key: str) -> tuple[float, float]:
    raw = section.get(key)
    text = raw.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise ConfigError(section.name, key, f"expected (lo, hi), got {raw!r}")
    parts = text[1:-1].split(",")
    if len(parts) != 2:
        raise ConfigError(section.name, key, f"expected two endpoints, got {raw!r}")

    def side(token: str) -> float:
        token = token.strip()
        try:
            return float(token)
        except ValueError:
            raise ConfigError(
                section.name, key, f"bad interval endpoint {token!r}"
            ) from None

    lo, hi = side(parts[0]), side(parts[1])
    if not lo < hi:
        raise ConfigError(section.name, key, f"empty interval {raw!r}")
    return lo, hi


def _checked_expr(
    section: _Section, key: str, text: str, allowed: set[str]
) -> str:
    try:
        tree = ex.parse(text)
    except ex.ExprError as err:
        raise ConfigError(section.name, key, f"bad expression: {err}") from None
    stray = ex.variables(tree) - allowed
    if stray:
        raise ConfigError(
            section.name,
            key,
            f"unknown variables {sorted(stray)}; allowed here: {sorted(allowed)}",
        )
    return text


def _expr_list(
    section: _Section, base: str, count: int, allowed: set[str], required: bool = True
) -> tuple[str, ...] | None:
    """Read ``base`` (count == 1) or ``base_1 .. base_count``."""
    if count == 1 and section.has(base):
        return (_checked_expr(section, base, section.get(base), allowed),)
    keys = [f"{base}_{i + 1}" for i in range(count)]
    if any(section.has(k) for k in keys):
        return tuple(
            _checked_expr(section, k, section.get(k), allowed) for k in keys
        )
    if count == 1:
        if required:
            raise ConfigError(section.name, base, "required key is missing")
        return None
    if required:
        raise ConfigError(section.name, keys[0], "required key is missing")
    return None


def _parse_a_rule(section: _Section, raw: str) -> tuple:
    text = raw.strip()
    if text == "auto":
        return ("auto", None)
    if text.startswith("linear:"):
        try:
            return ("linear", float(text.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(
                section.name, "a_rule", f"bad linear slope in {raw!r}"
            ) from None
    if text.startswith("list:"):
        try:
            values = tuple(float(v) for v in text.split(":", 1)[1].split(","))
        except ValueError:
            raise ConfigError(
                section.name, "a_rule", f"bad list entries in {raw!r}"
            ) from None
        if not values:
            raise ConfigError(section.name, "a_rule", "empty list")
        return ("list", values)
    raise ConfigError(
        section.name, "a_rule", f"expected auto, linear:<c> or list:..., got {raw!r}"
    )


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError("config", None, f"unparseable: {err}") from None

    dom = _Section(parser, "domain")
    dim = dom.getint("dim")
    if dim < 1:
        raise ConfigError("domain", "dim", "dimension must be at least 1")
    x_names = set(axis_names(dim)) | ({"t"} if dim == 1 else set())
    y_names = set(axis_names(dim, integration=True)) | ({"s"} if dim == 1 else set())

    if dim == 1:
        omega = [_parse_interval(dom, "omega") if dom.has("omega") else None]
        if omega[0] is None:
            omega = [_parse_interval(dom, "omega_1")]
    else:
        omega = [_parse_interval(dom, f"omega_{i + 1}") for i in range(dim)]
    exhaustion = dom.get("exhaustion", "anchored")
    if exhaustion not in ("anchored", "standard"):
        raise ConfigError(
            "domain", "exhaustion", f"expected anchored or standard, got {exhaustion!r}"
        )
    lam_lo = _expr_list(dom, "lambda_lower", dim, x_names)
    lam_hi = _expr_list(dom, "lambda_upper", dim, x_names)
    tau = _checked_expr(dom, "tau", dom.get("tau"), x_names)
    dom.reject_unknown()

    ker = _Section(parser, "kernel")
    m = ker.getint("m", "1")
    if m < 1:
        raise ConfigError("kernel", "m", "component count must be at least 1")
    if m == 1:
        entries = ((_checked_expr(ker, "k", ker.get("k"), x_names | y_names),),)
    else:
        rows = []
        for i in range(m):
            row = []
            for j in range(m):
                key = f"k_{i + 1}{j + 1}"
                row.append(_checked_expr(ker, key, ker.get(key), x_names | y_names))
            rows.append(tuple(row))
        entries = tuple(rows)
    ker.reject_unknown()

    u_names = {f"u{j + 1}" for j in range(m)} | ({"u"} if m == 1 else set())
    fs = _Section(parser, "F")
    single = _expr_list(fs, "f", m, x_names | u_names, required=False)
    if single is not None:
        h1 = h2 = single
    else:
        h1 = _expr_list(fs, "h1", m, x_names | u_names)
        h2 = _expr_list(fs, "h2", m, x_names | u_names)
    b = _checked_expr(fs, "b", fs.get("b"), x_names)
    eta = _checked_expr(fs, "eta", fs.get("eta"), x_names)
    fs.reject_unknown()

    out = _Section(parser, "outer")
    form = out.get("form")
    if form not in ("additive", "nested", "setvalued"):
        raise ConfigError(
            "outer", "form", f"expected additive, nested or setvalued, got {form!r}"
        )
    phi = _checked_expr(out, "phi", out.get("phi"), {"x"})
    g: tuple[str, ...] = ()
    theta = "0"
    vartheta = "0"
    g_lower = "0"
    g_upper = "0"
    if form == "additive":
        g = _expr_list(out, "g", m, x_names | u_names)
    elif form == "nested":
        if m != 1:
            raise ConfigError("outer", "form", "nested form needs a scalar problem")
        g = (_checked_expr(out, "g", out.get("g"), x_names | {"u1", "u2"}),)
        vartheta = _checked_expr(out, "vartheta", out.get("vartheta"), {"x"})
    else:
        if m != 1:
            raise ConfigError("outer", "form", "setvalued form needs a scalar problem")
        g_lower = _checked_expr(out, "g_lower", out.get("g_lower"), x_names | {"w"})
        g_upper = _checked_expr(out, "g_upper", out.get("g_upper"), x_names | {"w"})
        theta = _checked_expr(out, "theta", out.get("theta", "0"), {"x"})
    out.reject_unknown()

    sol = _Section(parser, "solve")
    n = sol.getint("n", "1")
    if n < 1:
        raise ConfigError("solve", "n", "member index must be at least 1")
    h = sol.getfloat("h")
    if not (h > 0.0 and math.isfinite(h)):
        raise ConfigError("solve", "h", "grid spacing must be positive")
    tol_fix = sol.getfloat("tol_fix", "1e-10")
    max_iter = sol.getint("max_iter", "1000")
    if max_iter < 1:
        raise ConfigError("solve", "max_iter", "need at least one iteration")
    strategy = sol.get("strategy", "midpoint")
    if strategy not in ("midpoint", "lower", "upper"):
        raise ConfigError(
            "solve", "strategy", f"expected midpoint, lower or upper, got {strategy!r}"
        )
    a_rule = _parse_a_rule(sol, sol.get("a_rule", "auto"))
    sol.reject_unknown()

    known = {"domain", "kernel", "F", "outer", "solve"}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(name, None, "unknown section")

    return Config(
        dim=dim,
        omega_lower=tuple(o[0] for o in omega),
        omega_upper=tuple(o[1] for o in omega),
        exhaustion=exhaustion,
        lambda_lower=lam_lo,
        lambda_upper=lam_hi,
        tau=tau,
        m=m,
        kernel=entries,
        h1=h1,
        h2=h2,
        b=b,
        eta=eta,
        form=form,
        g=g,
        phi=phi,
        theta=theta,
        vartheta=vartheta,
        g_lower=g_lower,
        g_upper=g_upper,
        n=n,
        h=h,
        tol_fix=tol_fix,
        max_iter=max_iter,
        strategy=strategy,
        a_rule=a_rule,
    )


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_problem(config: Config) -> ProblemSpec:
    """Assemble the runtime problem from a parsed configuration."""
    omega = OpenBox(lower=config.omega_lower, upper=config.omega_upper)
    region = MovingRegion(
        lower=tuple(ex.parse(t) for t in config.lambda_lower),
        upper=tuple(ex.parse(t) for t in config.lambda_upper),
        omega=omega,
    )
    tau = TauMap(ex.parse(config.tau), config.dim)
    ctx = DomainContext(
        omega=omega,
        region=region,
        tau=tau,
        h=config.h,
        exhaustion_rule=config.exhaustion,
    )
    kernel = Kernel(
        entries=tuple(tuple(ex.parse(e) for e in row) for row in config.kernel)
    )
    rhs = MultiMap(
        lower=tuple(ex.parse(t) for t in config.h1),
        upper=tuple(ex.parse(t) for t in config.h2),
        growth=ex.parse(config.b),
        fiber=ex.parse(config.eta),
    )
    form = OuterForm(config.form)
    if form is OuterForm.ADDITIVE:
        outer = AdditiveOuter(
            g=tuple(ex.parse(t) for t in config.g), modulus=ex.parse(config.phi)
        )
    elif form is OuterForm.NESTED:
        outer = NestedOuter(
            g=ex.parse(config.g[0]),
            modulus=ex.parse(config.phi),
            integral_modulus=ex.parse(config.vartheta),
        )
    else:
        outer = SetValuedOuter(
            lower=ex.parse(config.g_lower),
            upper=ex.parse(config.g_upper),
            modulus=ex.parse(config.phi),
            x_modulus=ex.parse(config.theta),
        )
    return ProblemSpec(
        ctx=ctx,
        kernel=kernel,
        rhs=rhs,
        outer=outer,
        n=config.n,
        tol_fix=config.tol_fix,
        max_iter=config.max_iter,
        strategy=config.strategy,
        a_rule=config.a_rule,
    )


# --------------------------------------------------------------------------
# shipped examples


def linear_growth_config(
    amplitude: float = 1.0, n: int = 3, h: float = 1.0 / 256.0
) -> Config:
    """Cumulative linear benchmark on (0, inf): u = A + integral of u,
    exact solution A exp(x)."""
    text = f"""
[domain]
dim = 1
omega = (0, inf)
exhaustion = anchored
lambda_lower = "0"
lambda_upper = "x1"
tau = "x1"

[kernel]
k = "1"

[F]
f = "u"
b = "1"
eta = "1"

[outer]
form = additive
g = "{amplitude!r}"
phi = "0"

[solve]
n = {n}
h = {h!r}
tol_fix = 1e-10
max_iter = 1000
strategy = midpoint
a_rule = auto
"""
    return parse_config(text)


def oscillating_config(
    lam: float = 2.0, n: int = 1, h: float = 1.0 / 256.0
) -> Config:
    """Whole-line problem with an oscillating moving region (sin t to |t|),
    a sharply growing kernel, a damped outer term with logarithmic state
    coupling of modulus x/lam, and a bounded nonlinear right-hand side."""
    if lam <= 1.0:
        raise ConfigError("outer", "phi", "the modulus slope 1/lam needs lam > 1")
    text = f"""
[domain]
dim = 1
omega = (-inf, inf)
exhaustion = anchored
lambda_lower = "sin(t)"
lambda_upper = "abs(t)"
tau = "1 + abs(t)"

[kernel]
k = "exp(t^2)"

[F]
f = "cos(u) + 2"
b = "3"
eta = "1"

[outer]
form = additive
g = "t * exp(-(1 + t^2)) + ln({lam!r} + abs(u))"
phi = "x / {lam!r}"

[solve]
n = {n}
h = {h!r}
tol_fix = 1e-10
max_iter = 1000
strategy = midpoint
a_rule = auto
"""
    return parse_config(text)


def goursat_config(
    f: str = "1",
    g: str = "0",
    n: int = 1,
    h: float = 1.0 / 128.0,
    eta: str = "0",
    b: str = "1",
) -> Config:
    """Plane cumulative problem u = g + double integral of f(y, u);
    g normally comes out of goursat_outer's inclusion-exclusion of the
    boundary traces (zero traces by default)."""
    text = f"""
[domain]
dim = 2
omega_1 = (0, inf)
omega_2 = (0, inf)
exhaustion = anchored
lambda_lower_1 = "0"
lambda_lower_2 = "0"
lambda_upper_1 = "x1"
lambda_upper_2 = "x2"
tau = "x1 * x2"

[kernel]
k = "1"

[F]
f = {_quote(f)}
b = {_quote(b)}
eta = {_quote(eta)}

[outer]
form = additive
g = {_quote(g)}
phi = "0"

[solve]
n = {n}
h = {h!r}
tol_fix = 1e-10
max_iter = 1000
strategy = midpoint
a_rule = auto
"""
    return parse_config(text)


BUILTIN_EXAMPLES = {
    "second-kind": linear_growth_config,
    "oscillating": oscillating_config,
    "goursat": goursat_config,
}


def builtin_config(name: str) -> Config:
    try:
        factory = BUILTIN_EXAMPLES[name]
    except KeyError:
        raise ConfigError(
            "example", None,
            f"unknown example {name!r}; available: {sorted(BUILTIN_EXAMPLES)}",
        ) from None
    return factory()
