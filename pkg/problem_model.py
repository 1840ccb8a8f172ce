"""
Problem Description for the Advection-Diffusion Solvers

Declarative, immutable description of the boundary-value problem shared by
the full-order, HiMod, PGD and HiPOD solvers:

    -div(mu grad u) + b . grad u = f   on (x0, x1) x (y0, y1)

with Dirichlet or homogeneous Neumann data per side. The diffusivity is
either a constant or a parameter interval; in the parametric case mu scales
the diffusion term only.

Key Features:
- **Function catalog**: constant, polynomial, sine, gaussian and bubble
  profiles instead of free-form expressions, so configs stay auditable
- **Separable forcing**: f is a finite sum of products fx(x) fy(y) [fmu(mu)]
- **Diagnostics, not exceptions**: validate_problem returns a list of
  human-readable findings, empty when the problem is well posed for the
  requested solver
- **INI round trip**: parse_problem(render_problem(p)) == p field for field

Config layout (INI):
    [domain]       x0, x1, y0, y1
    [coefficients] mu  or  mu_min, mu_max ; bx, by
    [forcing]      term_count, term<i>_fx_kind, term<i>_fx_params,
                   term<i>_fy_kind, term<i>_fy_params,
                   optional term<i>_fmu_kind, term<i>_fmu_params
    [bc]           left/right/top/bottom = dirichlet:<kind>:<params> | neumann0
"""

import configparser
import logging
import math
import re
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from errors import ConfigError, InvalidArgumentError, OutOfRangeError

logger = logging.getLogger(__name__)

FunctionKind = Literal["constant", "polynomial", "sine", "gaussian", "bubble"]

# expected parameter counts; None means "any length >= 1"
_PARAM_COUNTS: Dict[str, Optional[int]] = {
    "constant": 1,
    "polynomial": None,
    "sine": 3,
    "gaussian": 3,
    "bubble": 2,
}

SIDES = ("left", "right", "bottom", "top")
SOLVERS = ("fe", "himod", "pgd", "pgd-param", "hipod")


class ScalarFunction1D(BaseModel):
    """One-dimensional profile from the predefined catalog.

    Parameters per kind:
        constant:   [c]                          -> c
        polynomial: [c0, c1, ...]                -> sum c_i t^i
        sine:       [amplitude, frequency, phase] -> A sin(frequency pi t + phase)
        gaussian:   [scale, center, width]       -> scale exp(-((t - center) / width)^2)
        bubble:     [a, b]                       -> (t - a)(b - t)
    """

    model_config = ConfigDict(frozen=True)

    kind: FunctionKind
    params: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_param_count(self) -> "ScalarFunction1D":
        expected = _PARAM_COUNTS[self.kind]
        if expected is None:
            if len(self.params) < 1:
                raise ValueError("polynomial needs at least one coefficient")
        elif len(self.params) != expected:
            raise ValueError(f"{self.kind} takes {expected} parameters, got {len(self.params)}")
        return self

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(t, p[0])
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(t, np.asarray(p))
        if self.kind == "sine":
            return p[0] * np.sin(p[1] * np.pi * t + p[2])
        if self.kind == "gaussian":
            return p[0] * np.exp(-(((t - p[1]) / p[2]) ** 2))
        return (t - p[0]) * (p[1] - t)

    @property
    def is_zero(self) -> bool:
        if self.kind in ("constant", "polynomial"):
            return all(c == 0.0 for c in self.params)
        return self.params[0] == 0.0 if self.kind in ("sine", "gaussian") else False

    def spec_string(self) -> str:
        return f"{self.kind}:{','.join(repr(float(v)) for v in self.params)}"

    @classmethod
    def constant(cls, value: float) -> "ScalarFunction1D":
        return cls(kind="constant", params=(float(value),))

    @classmethod
    def parse(cls, text: str) -> "ScalarFunction1D":
        """Parse a catalog spec such as ``gaussian:50,2.85,0.075``."""
        kind, _, raw = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind not in _PARAM_COUNTS:
            raise InvalidArgumentError(f"unknown function kind '{kind}'")
        params = tuple(float(v) for v in raw.split(",") if v.strip()) if raw else ()
        try:
            return cls(kind=kind, params=params)
        except ValueError as exc:
            raise InvalidArgumentError(str(exc)) from exc


class SeparableTerm(BaseModel):
    """One product fx(x) fy(y) [fmu(mu)] of the forcing."""

    model_config = ConfigDict(frozen=True)

    fx: ScalarFunction1D
    fy: ScalarFunction1D
    fmu: Optional[ScalarFunction1D] = None


class SeparableSum(BaseModel):
    """Forcing written as an ordered sum of separable terms."""

    model_config = ConfigDict(frozen=True)

    terms: Tuple[SeparableTerm, ...] = ()

    @property
    def needs_mu(self) -> bool:
        return any(term.fmu is not None for term in self.terms)

    def __add__(self, other: "SeparableSum") -> "SeparableSum":
        return SeparableSum(terms=self.terms + other.terms)


def evaluate_separable(f: SeparableSum, x, y, mu: Optional[float] = None):
    """Evaluate sum_r fx_r(x) fy_r(y) [fmu_r(mu)] pointwise (broadcasting).

    Raises:
        InvalidArgumentError: If some term carries fmu and mu is missing
    """
    if f.needs_mu and mu is None:
        raise InvalidArgumentError("forcing depends on mu but no mu was supplied")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.zeros(np.broadcast(x, y).shape)
    for term in f.terms:
        value = term.fx(x) * term.fy(y)
        if term.fmu is not None:
            value = value * float(term.fmu(mu))
        total = total + value
    return float(total) if total.ndim == 0 else total


class BoundaryCondition(BaseModel):
    """Condition on one side; g is a function of the side's tangential coordinate."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["dirichlet", "neumann0"]
    g: Optional[ScalarFunction1D] = None

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"

    @property
    def is_homogeneous(self) -> bool:
        return self.kind == "neumann0" or self.g is None or self.g.is_zero

    def data(self, t):
        t = np.asarray(t, dtype=float)
        if self.g is None:
            return np.zeros_like(t)
        return self.g(t)

    def spec_string(self) -> str:
        if self.kind == "neumann0":
            return "neumann0"
        g = self.g or ScalarFunction1D.constant(0.0)
        return f"dirichlet:{g.spec_string()}"

    @classmethod
    def dirichlet(cls, g: Optional[ScalarFunction1D] = None) -> "BoundaryCondition":
        return cls(kind="dirichlet", g=g or ScalarFunction1D.constant(0.0))

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(kind="neumann0")

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        text = text.strip()
        if text.lower() == "neumann0":
            return cls.neumann()
        kind, _, rest = text.partition(":")
        if kind.strip().lower() != "dirichlet":
            raise InvalidArgumentError(f"unknown boundary condition '{text}'")
        return cls.dirichlet(ScalarFunction1D.parse(rest) if rest.strip() else None)


class BoundarySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    left: BoundaryCondition
    right: BoundaryCondition
    bottom: BoundaryCondition
    top: BoundaryCondition

    def side(self, name: str) -> BoundaryCondition:
        return getattr(self, name)

    @classmethod
    def all_dirichlet(cls) -> "BoundarySpec":
        zero = BoundaryCondition.dirichlet()
        return cls(left=zero, right=zero, bottom=zero, top=zero)


class Rectangle(BaseModel):
    model_config = ConfigDict(frozen=True)

    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def lx(self) -> float:
        return self.x1 - self.x0

    @property
    def ly(self) -> float:
        return self.y1 - self.y0


class MuInterval(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu_min: float
    mu_max: float

    def contains(self, mu: float) -> bool:
        return self.mu_min <= mu <= self.mu_max


class ProblemSpec(BaseModel):
    """Full description of one (possibly parametric) boundary-value problem.

    Attributes:
        domain: Rectangle (x0, x1) x (y0, y1)
        mu: Constant diffusivity or parameter interval
        b: Constant advection vector (b_x, b_y)
        f: Separable forcing
        bc: Boundary conditions per side
    """

    model_config = ConfigDict(frozen=True)

    domain: Rectangle
    mu: Union[float, MuInterval]
    b: Tuple[float, float] = (0.0, 0.0)
    f: SeparableSum = SeparableSum()
    bc: BoundarySpec

    @property
    def is_parametric(self) -> bool:
        return isinstance(self.mu, MuInterval)

    @property
    def mu_value(self) -> float:
        if isinstance(self.mu, MuInterval):
            raise InvalidArgumentError("problem is parametric; freeze it with at_mu() first")
        return float(self.mu)

    def at_mu(self, mu: float) -> "ProblemSpec":
        """Freeze a parametric problem at one diffusivity value.

        Forcing factors fmu are folded into fx so the frozen problem is
        mu-independent.
        """
        if not isinstance(self.mu, MuInterval):
            raise InvalidArgumentError("problem already has a constant diffusivity")
        if not self.mu.contains(mu):
            raise OutOfRangeError(f"mu={mu} outside [{self.mu.mu_min}, {self.mu.mu_max}]")
        terms = []
        for term in self.f.terms:
            if term.fmu is None:
                terms.append(term)
                continue
            scale = float(term.fmu(mu))
            terms.append(SeparableTerm(fx=_scaled(term.fx, scale), fy=term.fy))
        return self.model_copy(update={"mu": float(mu), "f": SeparableSum(terms=tuple(terms))})


def _scaled(func: ScalarFunction1D, scale: float) -> ScalarFunction1D:
    if func.kind in ("constant", "polynomial"):
        return ScalarFunction1D(kind=func.kind, params=tuple(scale * p for p in func.params))
    if func.kind in ("sine", "gaussian"):
        return ScalarFunction1D(kind=func.kind, params=(scale * func.params[0],) + func.params[1:])
    # bubble has no amplitude slot: multiply by a constant polynomial instead
    a, b = func.params
    return ScalarFunction1D(kind="polynomial", params=(-scale * a * b, scale * (a + b), -scale))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_CORNERS = (
    ("left", "bottom", "x0,y0"),
    ("left", "top", "x0,y1"),
    ("right", "bottom", "x1,y0"),
    ("right", "top", "x1,y1"),
)


def _side_endpoint(p: ProblemSpec, side: str, neighbour: str) -> float:
    """Tangential coordinate of `side` where it meets `neighbour`."""
    d = p.domain
    if side in ("left", "right"):
        return d.y0 if neighbour == "bottom" else d.y1
    return d.x0 if neighbour == "left" else d.x1


def validate_problem(p: ProblemSpec, solver: Optional[str] = None) -> List[str]:
    """Check type invariants and solver/boundary compatibility.

    Args:
        p: Problem to check
        solver: One of SOLVERS, or None to check every reduction's
            boundary requirements without constraining the diffusivity kind

    Returns:
        Diagnostics; empty when the problem is admissible
    """
    if solver is not None and solver not in SOLVERS:
        raise InvalidArgumentError(f"unknown solver '{solver}'")
    issues: List[str] = []
    d = p.domain

    if not (d.x0 < d.x1 and d.y0 < d.y1):
        issues.append("degenerate domain: need x0 < x1 and y0 < y1")
    if isinstance(p.mu, MuInterval):
        if not (0.0 < p.mu.mu_min < p.mu.mu_max):
            issues.append("invalid diffusivity interval: need 0 < mu_min < mu_max")
    elif not (p.mu > 0.0 and math.isfinite(p.mu)):
        issues.append("nonpositive diffusivity")
    if not all(math.isfinite(v) for v in p.b):
        issues.append("non-finite advection vector")

    functions: List[ScalarFunction1D] = []
    for term in p.f.terms:
        functions.extend(fn for fn in (term.fx, term.fy, term.fmu) if fn is not None)
    for side in SIDES:
        cond = p.bc.side(side)
        if cond.g is not None:
            functions.append(cond.g)
    if any(fn.kind == "gaussian" and not fn.params[2] > 0.0 for fn in functions):
        issues.append("nonpositive gaussian width")
    if p.f.needs_mu and not p.is_parametric:
        issues.append("mu-dependent forcing requires a parametric diffusivity")

    if not any(p.bc.side(side).is_dirichlet for side in SIDES):
        issues.append("no Dirichlet side: at least one side must carry Dirichlet data")

    check_himod = solver in (None, "himod", "hipod")
    check_pgd = solver in (None, "pgd", "pgd-param")

    if check_himod:
        lateral = (p.bc.bottom, p.bc.top)
        if not all(c.is_dirichlet and c.is_homogeneous for c in lateral):
            issues.append("basis incompatible with lateral data: sine modes need homogeneous Dirichlet on top and bottom")

    if check_pgd:
        for first, second, label in _CORNERS:
            a, b = p.bc.side(first), p.bc.side(second)
            if not (a.is_dirichlet and b.is_dirichlet):
                continue
            for side, other in ((first, second), (second, first)):
                cond = p.bc.side(side)
                if cond.is_homogeneous:
                    continue
                value = float(cond.data(_side_endpoint(p, side, other)))
                if abs(value) > 1e-12:
                    issues.append(f"Dirichlet data not separable at corner ({label}): {side} data is {value:g}")

    if solver in ("fe", "himod", "pgd") and p.is_parametric:
        issues.append(f"{solver} solver requires a constant diffusivity; freeze the problem at one mu")
    if solver in ("pgd-param", "hipod") and not p.is_parametric:
        issues.append(f"{solver} solver requires a parametric diffusivity interval")

    return issues


# ---------------------------------------------------------------------------
# INI config round trip
# ---------------------------------------------------------------------------

_PROBLEM_SECTIONS = ("domain", "coefficients", "forcing", "bc")
_TERM_KEY = re.compile(r"^term(\d+)_(fx|fy|fmu)_(kind|params)$")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_LINE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index: Dict[Tuple[str, Optional[str]], int] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_LINE.match(line)
        if header:
            section = header.group(1).strip().lower()
            index.setdefault((section, None), lineno)
            continue
        key = _KEY_LINE.match(line)
        if key and section:
            index.setdefault((section, key.group(1).strip().lower()), lineno)
    return index


class IniDocument:
    """Parsed INI text that remembers where each key came from."""

    def __init__(self, text: str, source: str = "<string>") -> None:
        self.source = source
        self.lines = _line_index(text)
        self.parser = configparser.ConfigParser(interpolation=None)
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}", getattr(exc, "lineno", None)) from exc

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def error(self, message: str, section: str, key: Optional[str] = None) -> ConfigError:
        return ConfigError(f"{self.source}: [{section}] {message}", self.line(section, key))

    def check_sections(self, allowed: Iterable[str]) -> None:
        allowed = set(allowed)
        for section in self.parser.sections():
            if section.lower() not in allowed:
                raise self.error(f"unknown section '{section}'", section.lower())

    def check_keys(self, section: str, allowed) -> None:
        if not self.parser.has_section(section):
            return
        for key in self.parser.options(section):
            ok = allowed(key) if callable(allowed) else key in allowed
            if not ok:
                raise self.error(f"unknown key '{key}'", section, key)

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> float:
        if not self.parser.has_option(section, key):
            if default is None:
                raise self.error(f"missing key '{key}'", section)
            return default
        raw = self.parser.get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise self.error(f"'{key}' is not a number: {raw!r}", section, key) from exc

    def get(self, section: str, key: str) -> str:
        if not self.parser.has_option(section, key):
            raise self.error(f"missing key '{key}'", section)
        return self.parser.get(section, key)


def problem_from_document(doc: IniDocument) -> ProblemSpec:
    """Build a ProblemSpec from the problem sections of an INI document."""
    doc.check_keys("domain", {"x0", "x1", "y0", "y1"})
    doc.check_keys("coefficients", {"mu", "mu_min", "mu_max", "bx", "by"})
    doc.check_keys("forcing", lambda key: key == "term_count" or _TERM_KEY.match(key) is not None)
    doc.check_keys("bc", set(SIDES))
    for section in _PROBLEM_SECTIONS:
        if not doc.parser.has_section(section):
            raise ConfigError(f"{doc.source}: missing section [{section}]")

    domain = Rectangle(**{key: doc.get_float("domain", key) for key in ("x0", "x1", "y0", "y1")})

    coeffs = doc.parser["coefficients"]
    if "mu" in coeffs:
        if "mu_min" in coeffs or "mu_max" in coeffs:
            raise doc.error("give either mu or mu_min/mu_max, not both", "coefficients", "mu")
        mu: Union[float, MuInterval] = doc.get_float("coefficients", "mu")
    else:
        mu = MuInterval(
            mu_min=doc.get_float("coefficients", "mu_min"),
            mu_max=doc.get_float("coefficients", "mu_max"),
        )
    b = (doc.get_float("coefficients", "bx", 0.0), doc.get_float("coefficients", "by", 0.0))

    count = int(doc.get_float("forcing", "term_count", 0.0))
    terms: List[SeparableTerm] = []
    for i in range(1, count + 1):
        parts: Dict[str, Optional[ScalarFunction1D]] = {}
        for axis in ("fx", "fy", "fmu"):
            kind_key, params_key = f"term{i}_{axis}_kind", f"term{i}_{axis}_params"
            if not doc.parser.has_option("forcing", kind_key):
                if axis == "fmu":
                    parts[axis] = None
                    continue
                raise doc.error(f"missing key '{kind_key}'", "forcing")
            kind = doc.get("forcing", kind_key).strip()
            params = doc.parser.get("forcing", params_key, fallback="")
            try:
                parts[axis] = ScalarFunction1D.parse(f"{kind}:{params}")
            except (InvalidArgumentError, ValueError) as exc:
                raise doc.error(str(exc), "forcing", kind_key) from exc
        terms.append(SeparableTerm(**parts))
    for key in doc.parser.options("forcing"):
        match = _TERM_KEY.match(key)
        if match and not 1 <= int(match.group(1)) <= count:
            raise doc.error(f"'{key}' refers to a term beyond term_count={count}", "forcing", key)

    sides = {}
    for side in SIDES:
        try:
            sides[side] = BoundaryCondition.parse(doc.get("bc", side))
        except (InvalidArgumentError, ValueError) as exc:
            raise doc.error(str(exc), "bc", side) from exc

    return ProblemSpec(domain=domain, mu=mu, b=b, f=SeparableSum(terms=tuple(terms)), bc=BoundarySpec(**sides))


def parse_problem(text: str, source: str = "<string>", extra_sections: Iterable[str] = ()) -> ProblemSpec:
    """Parse problem INI text; unknown sections or keys raise ConfigError with a line number."""
    doc = IniDocument(text, source)
    doc.check_sections(tuple(_PROBLEM_SECTIONS) + tuple(extra_sections))
    return problem_from_document(doc)


def load_problem(path: Union[str, Path], extra_sections: Iterable[str] = ()) -> ProblemSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_problem(path.read_text(encoding="utf-8"), str(path), extra_sections)


def render_problem(p: ProblemSpec) -> str:
    """Render a ProblemSpec as INI text accepted by parse_problem."""
    lines = ["[domain]"]
    for key in ("x0", "x1", "y0", "y1"):
        lines.append(f"{key} = {getattr(p.domain, key)!r}")
    lines += ["", "[coefficients]"]
    if isinstance(p.mu, MuInterval):
        lines += [f"mu_min = {p.mu.mu_min!r}", f"mu_max = {p.mu.mu_max!r}"]
    else:
        lines.append(f"mu = {float(p.mu)!r}")
    lines += [f"bx = {float(p.b[0])!r}", f"by = {float(p.b[1])!r}", "", "[forcing]"]
    lines.append(f"term_count = {len(p.f.terms)}")
    for i, term in enumerate(p.f.terms, start=1):
        for axis in ("fx", "fy", "fmu"):
            fn = getattr(term, axis)
            if fn is None:
                continue
            lines.append(f"term{i}_{axis}_kind = {fn.kind}")
            lines.append(f"term{i}_{axis}_params = {','.join(repr(float(v)) for v in fn.params)}")
    lines += ["", "[bc]"]
    for side in SIDES:
        lines.append(f"{side} = {p.bc.side(side).spec_string()}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Canned problems used by the experiments
# ---------------------------------------------------------------------------

def two_source_problem() -> ProblemSpec:
    """Advection-dominated test with two Gaussian sources on (0,5)x(0,1)."""
    bump_y = ScalarFunction1D(kind="gaussian", params=(1.0, 0.5, 0.075))
    terms = tuple(
        SeparableTerm(fx=ScalarFunction1D(kind="gaussian", params=(50.0, center, 0.075)), fy=bump_y)
        for center in (2.85, 3.75)
    )
    return ProblemSpec(
        domain=Rectangle(x0=0.0, x1=5.0, y0=0.0, y1=1.0),
        mu=0.24,
        b=(-5.0, 0.0),
        f=SeparableSum(terms=terms),
        bc=BoundarySpec.all_dirichlet(),
    )


def inlet_channel_problem() -> ProblemSpec:
    """Parametric channel on (0,3)x(0,1): parabolic inlet, free outlet, mu in [1,5]."""
    one = ScalarFunction1D.constant(1.0)
    wall = BoundaryCondition.dirichlet()
    return ProblemSpec(
        domain=Rectangle(x0=0.0, x1=3.0, y0=0.0, y1=1.0),
        mu=MuInterval(mu_min=1.0, mu_max=5.0),
        b=(2.5, 0.0),
        f=SeparableSum(terms=(SeparableTerm(fx=one, fy=one),)),
        bc=BoundarySpec(
            left=BoundaryCondition.dirichlet(ScalarFunction1D(kind="bubble", params=(0.0, 1.0))),
            right=BoundaryCondition.neumann(),
            bottom=wall,
            top=wall,
        ),
    )
