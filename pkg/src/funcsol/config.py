"""INI-style problem configuration: parsing, validation, grid construction.

A config has four sections. ``[geometry]`` picks the domain family and
its node counts, ``[problem]`` holds the coefficient expressions and
boundary targets, ``[solver]`` selects the two-point backend and its
knobs, ``[output]`` says where and what to write. All expressions are
parsed eagerly against the declared variable set, so malformed input
fails at load time with the offending field named.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .geometry import Grid, build_annulus, build_rectangle
from .twopoint import DARCY, MODES, MOLECULAR, SCALAR, ProblemSpec

BACKENDS_BY_MODE = {
    MOLECULAR: ("fixed_point", "shooting"),
    DARCY: ("shooting",),
    SCALAR: ("scalar_bisection",),
}


@dataclass
class ProblemConfig:
    family: str
    n1: int
    n2: int
    extent1: float          # width, or inner radius r1
    extent2: float          # height, or outer radius r2
    spec: ProblemSpec
    backend: str
    n_nodes: int = 1001
    tol: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    pivot_tol: float = 1e-10
    bracket_hints: tuple | None = None
    output_dir: str = "out"
    write_fields: bool = True
    write_fluxes: bool = False
    residual_limit: float | None = None

    def make_grid(self) -> Grid:
        if self.family == "annulus":
            return build_annulus(self.n1, self.n2, self.extent1, self.extent2)
        return build_rectangle(self.n1, self.n2, self.extent1, self.extent2)


class _Section:
    """Typed access to one config section with field-naming errors."""

    def __init__(self, parser, name):
        self.name = name
        if not parser.has_section(name):
            raise ConfigError(f"missing [{name}] section")
        self.sec = parser[name]

    def raw(self, key, default=None, required=False):
        if key in self.sec:
            return self.sec[key].strip()
        if required:
            raise ConfigError(f"[{self.name}] is missing '{key}'")
        return default

    def typed(self, key, cast, default=None, required=False):
        text = self.raw(key, required=required)
        if text is None:
            return default
        try:
            return cast(text)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: cannot parse '{text}'") from None

    def floats(self, key, count):
        text = self.raw(key, required=True)
        parts = text.split()
        if len(parts) != count:
            raise ConfigError(f"[{self.name}] {key}: expected {count} values, got {len(parts)}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: cannot parse '{text}'") from None

    def flag(self, key, default=False):
        text = self.raw(key)
        if text is None:
            return default
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key}: expected a boolean, got '{text}'")


def load_config(path) -> ProblemConfig:
    """Read and fully validate one problem configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    geo = _Section(parser, "geometry")
    family = geo.raw("family", required=True)
    if family not in ("rectangle", "annulus"):
        raise ConfigError(f"[geometry] family: unknown family '{family}'")
    n1 = geo.typed("n1", int, required=True)
    n2 = geo.typed("n2", int, required=True)
    if family == "rectangle":
        e1 = geo.typed("width", float, required=True)
        e2 = geo.typed("height", float, required=True)
    else:
        e1 = geo.typed("r1", float, required=True)
        e2 = geo.typed("r2", float, required=True)

    prob = _Section(parser, "problem")
    mode = prob.raw("mode", required=True)
    if mode not in MODES:
        raise ConfigError(f"[problem] mode: unknown mode '{mode}'")
    n = prob.typed("n", int, required=True)
    if not 1 <= n <= 9:
        raise ConfigError(f"[problem] n: must be between 1 and 9, got {n}")
    a = [[prob.raw(f"a{i+1}{j+1}", required=True) for j in range(n)] for i in range(n)]
    b_texts = [prob.raw(f"b{i+1}") for i in range(n)]
    if any(t is not None for t in b_texts) and any(t is None for t in b_texts):
        raise ConfigError("[problem] b coefficients must be given for all equations or none")
    b = None if b_texts[0] is None else list(b_texts)
    b_next = prob.raw("b_next")
    u_star = prob.floats("u_star", n)
    p_star = prob.typed("p_star", float, default=1.0)
    try:
        spec = ProblemSpec.from_strings(n, a, b=b, b_next=b_next,
                                        u_star=u_star, p_star=p_star, mode=mode)
    except ValueError as exc:
        raise ConfigError(f"[problem] {exc}") from None

    sol = _Section(parser, "solver")
    backend = sol.raw("backend", required=True)
    allowed = BACKENDS_BY_MODE[mode]
    if backend not in allowed:
        raise ConfigError(
            f"[solver] backend '{backend}' is incompatible with mode '{mode}' "
            f"(allowed: {', '.join(allowed)})")
    n_nodes = sol.typed("n", int,
                        default=sol.typed("n_nodes", int, default=1001))
    tol = sol.typed("tol", float, default=1e-10)
    max_iter = sol.typed("max_iter", int, default=200)
    damping = sol.typed("damping", float, default=1.0)
    pivot_tol = sol.typed("pivot_tol", float, default=1e-10)
    if tol <= 0 or pivot_tol <= 0:
        raise ConfigError("[solver] tolerances must be positive")
    if not 0.0 < damping <= 1.0:
        raise ConfigError(f"[solver] damping must lie in (0, 1], got {damping}")
    hints = None
    r_int = sol.typed("r_integral", float)
    q_int = sol.typed("q_integral", float)
    if (r_int is None) != (q_int is None):
        raise ConfigError("[solver] bracket hints need both r_integral and q_integral")
    if r_int is not None:
        hints = (r_int, q_int)

    out = _Section(parser, "output")
    return ProblemConfig(
        family=family, n1=n1, n2=n2, extent1=e1, extent2=e2,
        spec=spec, backend=backend, n_nodes=n_nodes, tol=tol,
        max_iter=max_iter, damping=damping, pivot_tol=pivot_tol,
        bracket_hints=hints,
        output_dir=out.raw("directory", default="out"),
        write_fields=out.flag("write_fields", True),
        write_fluxes=out.flag("write_fluxes", False),
        residual_limit=out.typed("residual_limit", float),
    )
