"""Experiment driver: single solves, h-sweeps, pollution sweeps, CG vs PCG studies."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .basis import EdgeBasis, element_basis, quadrature
from .ddprecond import build_preconditioner
from .interface import CGBreakdown, InterfaceSystem, cg_solve, direct_solve, recover_solution
from .local import DEFAULT_RHO, build_local_solvers
from .mesh import build_decomposition, build_mesh, count_interface_dofs, subdomain_size_to_elements
from .problems import make_problem, relative_l2_error

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "parse_number",
    "parse_list",
    "load_config_file",
    "run_single",
    "run_order_sweep",
    "run_pollution_sweep",
    "run_precond_study",
    "fill_derived",
    "write_csv",
    "read_csv",
    "write_config",
]

log = logging.getLogger(__name__)

SOLVERS = ("cg", "pcg", "direct")


def parse_number(text) -> float:
    """Parse ``64``, ``2.5``, ``20pi``, ``20*pi`` or ``pi/2``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.e+-]*)\*?pi(?:/([0-9.e+-]+))?", s)
    if m:
        coef = float(m.group(1)) if m.group(1) not in ("", "+") else 1.0
        if m.group(1) == "-":
            coef = -1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / den
    return float(s)


def parse_list(text) -> list[float]:
    """Comma-separated numbers (each as in :func:`parse_number`)."""
    if isinstance(text, (list, tuple)):
        return [parse_number(t) for t in text]
    return [parse_number(t) for t in str(text).split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    """All knobs of one experiment. ``n`` is the number of elements per unit length."""

    problem: str = "lens"
    omega: list = field(default_factory=lambda: [64.0])
    k_mode: int = 19
    n: list = field(default_factory=lambda: [32])
    omega_h: float | None = None
    q: int = 2
    p: int = 4
    rho: float = DEFAULT_RHO
    solver: str = "pcg"
    tol: float = 1e-6
    max_iter: int = 20000
    subdomain: float | None = None  # subdomain side length d; None -> about sqrt(h)
    quad_order: int | None = None
    workers: int = 1
    degree: int = 2  # manufactured problem only
    out: str | None = None

    def __post_init__(self):
        self.omega = parse_list(self.omega)
        self.n = [int(round(v)) for v in parse_list(self.n)]
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.p < self.q + 2:
            raise ValueError(f"p={self.p} violates p >= q + 2 (q={self.q})")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if any(v < 1 for v in self.n):
            raise ValueError("n must be positive")
        if self.quad_order is not None and self.quad_order < self.p + 2:
            raise ValueError("quad_order must be >= p + 2")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CONFIG_KEYS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def load_config_file(path) -> dict:
    """Read flat ``key = value`` lines; ``#`` starts a comment. Keys may use dashes."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


@dataclass
class ResultRow:
    problem: str
    omega: float
    h: float
    q: int
    p: int
    dofs: int
    err: float | None = None
    order: float | None = None
    delta: float | None = None
    solver: str = ""
    n_iter: int | None = None
    rho_iter: float | None = None
    n_iter_cg: int | None = None
    n_iter_pcg: int | None = None
    rho_iter_cg: float | None = None
    rho_iter_pcg: float | None = None
    subdomain: float | None = None
    residual: float | None = None
    converged: bool = True
    setup_time: float = 0.0
    solve_time: float = 0.0

    @classmethod
    def fields(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]


def _rate(a2, a1, x2, x1):
    if a1 is None or a2 is None or a1 <= 0 or a2 <= 0 or x1 == x2:
        return None
    return math.log(a2 / a1) / math.log(x2 / x1)


def fill_derived(rows: list[ResultRow]) -> list[ResultRow]:
    """Fill order, delta and rho_iter columns from consecutive rows."""
    for prev, row in zip(rows, rows[1:]):
        row.order = _rate(row.err, prev.err, row.h, prev.h)
        row.delta = _rate(row.err, prev.err, row.omega, prev.omega)
        row.rho_iter = _rate(row.n_iter, prev.n_iter, row.omega, prev.omega)
        row.rho_iter_cg = _rate(row.n_iter_cg, prev.n_iter_cg, row.omega, prev.omega)
        row.rho_iter_pcg = _rate(row.n_iter_pcg, prev.n_iter_pcg, row.omega, prev.omega)
    return rows


@dataclass(eq=False)
class Discretisation:
    problem: object
    mesh: object
    system: InterfaceSystem
    setup_time: float


def discretise(cfg: ExperimentConfig, omega: float, n: int) -> Discretisation:
    t0 = time.perf_counter()
    prob = make_problem(cfg.problem, omega, cfg.k_mode, cfg.rho, cfg.degree)
    (x0, y0), (x1, y1) = prob.domain
    nx = max(1, int(round((x1 - x0) * n)))
    ny = max(1, int(round((y1 - y0) * n)))
    mesh = build_mesh(prob.domain, nx, ny)
    quad = quadrature(cfg.quad_order or cfg.p + 3)
    ops = build_local_solvers(mesh, element_basis(cfg.p), EdgeBasis(cfg.q), prob.coeffs, quad)
    sys_ = InterfaceSystem.from_solvers(ops)
    return Discretisation(prob, mesh, sys_, time.perf_counter() - t0)


def solve(disc: Discretisation, cfg: ExperimentConfig, solver: str | None = None):
    """Solve one discretisation; returns ``(lam, report, extra_setup, d)``."""
    solver = solver or cfg.solver
    sys_ = disc.system
    if solver == "direct":
        lam, rep = direct_solve(sys_)
        return lam, rep, 0.0, None
    K, extra, d = None, 0.0, None
    if solver == "pcg":
        m = subdomain_size_to_elements(disc.mesh, cfg.subdomain)
        layout = build_decomposition(disc.mesh, m)
        K = build_preconditioner(layout, sys_)
        extra, d = K.setup_time, layout.d
    lam, rep = cg_solve(sys_, sys_.rhs, K, tol=cfg.tol, max_iter=cfg.max_iter)
    return lam, rep, extra, d


def _error(disc: Discretisation, cfg: ExperimentConfig, lam) -> float:
    ops = disc.system.ops
    order = max(cfg.quad_order or 0, cfg.p + 3)
    return relative_l2_error(recover_solution(ops, lam), disc.problem, disc.mesh, ops.basis, order)


def run_single(cfg: ExperimentConfig, omega: float | None = None, n: int | None = None) -> ResultRow:
    """Full pipeline for one (omega, h); a non-converged solve flags the row."""
    omega = cfg.omega[0] if omega is None else omega
    n = cfg.n[0] if n is None else n
    disc = discretise(cfg, omega, n)
    row = ResultRow(cfg.problem, omega, disc.mesh.h, cfg.q, cfg.p,
                    count_interface_dofs(disc.mesh, cfg.q), solver=cfg.solver)
    try:
        lam, rep, extra, d = solve(disc, cfg)
    except CGBreakdown as exc:
        log.error("%s", exc)
        row.converged = False
        row.setup_time = disc.setup_time
        return row
    row.err = _error(disc, cfg, lam)
    row.n_iter = rep.iterations
    if cfg.solver == "cg":
        row.n_iter_cg = rep.iterations
    elif cfg.solver == "pcg":
        row.n_iter_pcg = rep.iterations
    row.subdomain = d
    row.residual = rep.residual
    row.converged = rep.converged
    row.setup_time = disc.setup_time + extra
    row.solve_time = rep.wall_time
    return row


def run_order_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per entry of ``cfg.n`` at fixed ``omega``; fills ``order``."""
    if len(cfg.n) < 2:
        raise ValueError("an order sweep needs at least two mesh sizes")
    return fill_derived([run_single(cfg, cfg.omega[0], n) for n in cfg.n])


def _pollution_meshes(cfg: ExperimentConfig) -> list[int]:
    if cfg.omega_h is not None:
        return [max(1, int(round(w / cfg.omega_h))) for w in cfg.omega]
    if len(cfg.n) != len(cfg.omega):
        raise ValueError("give omega_h or one n per omega")
    return list(cfg.n)


def run_pollution_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per omega with ``h = omega_h / omega``; fills ``delta``."""
    if len(cfg.omega) < 2:
        raise ValueError("a pollution sweep needs at least two frequencies")
    ns = _pollution_meshes(cfg)
    return fill_derived([run_single(cfg, w, n) for w, n in zip(cfg.omega, ns)])


def run_precond_study(cfg: ExperimentConfig) -> list[ResultRow]:
    """CG and PCG on each (omega, h); fills both iteration growth rates."""
    if cfg.omega_h is not None or len(cfg.n) == len(cfg.omega):
        ns = _pollution_meshes(cfg)
    else:
        ns = [cfg.n[0]] * len(cfg.omega)
    rows = []
    for w, n in zip(cfg.omega, ns):
        disc = discretise(cfg, w, n)
        row = ResultRow(cfg.problem, w, disc.mesh.h, cfg.q, cfg.p,
                        count_interface_dofs(disc.mesh, cfg.q), solver="cg+pcg")
        lam_c, rep_c, _, _ = solve(disc, cfg, "cg")
        lam_p, rep_p, extra, d = solve(disc, cfg, "pcg")
        row.n_iter_cg, row.n_iter_pcg = rep_c.iterations, rep_p.iterations
        row.n_iter = rep_p.iterations
        row.err = _error(disc, cfg, lam_p)
        row.subdomain = d
        row.residual = rep_p.residual
        row.converged = rep_c.converged and rep_p.converged
        row.setup_time = disc.setup_time + extra
        row.solve_time = rep_c.wall_time + rep_p.wall_time
        rows.append(row)
        log.info("omega=%.4g h=%.4g: CG %d, PCG %d", w, disc.mesh.h, rep_c.iterations,
                 rep_p.iterations)
    return fill_derived(rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: list[ResultRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ResultRow.fields())
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in ResultRow.fields()])
    return path


def read_csv(path) -> list[ResultRow]:
    types = {f.name: f.type for f in dataclasses.fields(ResultRow)}
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = str(types[k])
                if v == "":
                    kw[k] = None
                elif t.startswith("int"):
                    kw[k] = int(v)
                elif t.startswith("bool"):
                    kw[k] = v == "1"
                elif t.startswith("str"):
                    kw[k] = v
                else:
                    kw[k] = float(v)
            rows.append(ResultRow(**kw))
    return rows


def write_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, default=float))
    return path
