"""Thresholds, N-sweeps, noise boundaries, oracle cross-checks and figure datasets."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from . import optimal
from .angles import preset_angles, sv_preset
from .bell import BellResult, evaluate
from .channels import prepare
from .functions import AUTO, IDENTITY, PRESETS, SIGN_BIN, FunctionSpec, parse_function
from .oracle import DEFAULT_POINTS, CrosscheckReport, crosscheck_moments
from .quadrature import ConvergenceError
from .states import DensityOperator, PureState, make_ghz, parse_state, to_density

CSV_COLUMNS = ("family", "N", "r", "eta", "p", "function", "lhs", "rhs", "bell", "violated")
BISECT_TOL = 1e-8
ETA_FLOOR = 1e-6


class InvariantError(RuntimeError):
    """A computed dataset broke one of its closed-form checks."""


# -- configurations ----------------------------------------------------------

@dataclass(frozen=True)
class Config:
    """One Bell evaluation: family, state, channel and measured function.

    ``state`` is CLI state text; ``None`` means GHZ(N, r).  ``function`` may be
    ``"auto"`` for the optimal rational function of the functional family.
    ``eps_mode`` picks how ``auto`` adapts to loss: ``formula`` (closed-form
    epsilon(eta), odd N falls back to ``maximize``), ``self_consistent`` or
    ``maximize``.
    """

    family: str
    N: int
    r: int | None = None
    eta: float = 1.0
    p: float = 1.0
    function: FunctionSpec | str | None = None
    state: str | PureState | None = None
    angles: str | np.ndarray = "preset"
    purity_model: str = "global"
    eps_mode: str = "formula"
    conj_signs: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", self.family.lower())
        if isinstance(self.function, str):
            text = self.function.strip().lower()
            object.__setattr__(self, "function", AUTO if text == AUTO else parse_function(text))
        if self.r is None and self.state is None:
            object.__setattr__(self, "r", self.N // 2)

    def pure_state(self) -> PureState:
        if self.state is None:
            return make_ghz(self.N, self.r)
        if isinstance(self.state, PureState):
            return self.state
        return parse_state(self.state)

    def density(self) -> DensityOperator:
        return prepare(to_density(self.pure_state()), self.eta, self.p, self.purity_model)

    def function_label(self) -> str:
        f = self.function
        return "auto" if f == AUTO else (default_function(self.family).label() if f is None else f.label())


def default_function(family: str) -> FunctionSpec:
    return {"cfrd": IDENTITY, "mabk": SIGN_BIN, "functional": IDENTITY,
            "sv4": PRESETS["power_third"], "sv8": PRESETS["power_third"]}[family]


def dagger_angles(raising: Sequence[bool]) -> np.ndarray:
    """Orthogonal angles making ``x + i p`` act as ``a^dagger`` where ``raising`` and ``a`` elsewhere."""
    out = np.zeros((len(raising), 2))
    out[:, 1] = [-math.pi / 2 if up else math.pi / 2 for up in raising]
    return out


def default_angles(cfg: Config, modes: int) -> np.ndarray:
    fam = cfg.family
    kind = cfg.state.split(":")[0].lower() if isinstance(cfg.state, str) else "ghz"
    if fam in ("sv4", "sv8"):
        return sv_preset(modes, int(fam[2:]))
    if kind in ("extcluster", "extended_cluster"):
        # lower on H modes, raise on V modes
        return dagger_angles([n % 2 == 1 for n in range(modes)])
    r = cfg.r if cfg.r is not None else modes // 2
    return preset_angles("rotated_mabk" if fam == "mabk" else "orthogonal", modes, r)


@lru_cache(maxsize=None)
def _eps_even() -> float:
    return optimal.solve_epsilon_even()


@lru_cache(maxsize=None)
def _eps_odd(N: int) -> float:
    return optimal.solve_epsilon_odd(N)


def lossless_epsilon(N: int) -> float:
    return _eps_even() if N % 2 == 0 else _eps_odd(N)


def resolve(cfg: Config) -> tuple[DensityOperator, np.ndarray, FunctionSpec]:
    rho = cfg.density()
    angles = default_angles(cfg, rho.mode_count) if isinstance(cfg.angles, str) else np.asarray(cfg.angles)
    f = cfg.function
    if f is None:
        f = default_function(cfg.family)
    elif f == AUTO:
        if cfg.family != "functional":
            raise ValueError("rational(auto) applies to the functional family only")
        f = optimal.rational(auto_epsilon(cfg, rho, angles))
    return rho, angles, f


def auto_epsilon(cfg: Config, rho: DensityOperator, angles: np.ndarray) -> float:
    N = rho.mode_count
    uniform = np.isscalar(cfg.eta)
    if uniform and cfg.eta == 1 and cfg.eps_mode != "maximize":
        return lossless_epsilon(N)
    mode = cfg.eps_mode
    if mode != "maximize" and (N % 2 or not uniform):
        mode = "maximize"
    if mode == "formula":
        return optimal.epsilon_lossy(cfg.eta, _eps_even())
    if mode == "self_consistent":
        return optimal.epsilon_self_consistent_lossy(cfg.eta)
    if mode == "maximize":
        eps, _ = optimal.maximize_over_epsilon(
            lambda e: evaluate("functional", rho, angles, optimal.rational(e),
                               conj_signs=cfg.conj_signs).bell)
        return eps
    raise ValueError(f"unknown eps_mode {cfg.eps_mode!r}")


def run_config(cfg: Config) -> BellResult:
    rho, angles, f = resolve(cfg)
    return evaluate(cfg.family, rho, angles, f, conj_signs=cfg.conj_signs)


def result_row(cfg: Config, res: BellResult) -> dict:
    pure = cfg.pure_state()
    return {"family": cfg.family, "N": pure.mode_count, "r": cfg.r if cfg.state is None else "",
            "eta": cfg.eta, "p": cfg.p, "function": cfg.function_label(),
            "lhs": res.lhs, "rhs": res.rhs, "bell": res.bell, "violated": res.violated}


# -- thresholds ----------------------------------------------------------------

def bisect_unit(fn, lo: float, hi: float, what: str) -> float:
    """Root of ``fn(x) - 1`` on ``[lo, hi]`` with ``fn(lo) < 1 < fn(hi)``."""
    flo, fhi = fn(lo) - 1, fn(hi) - 1
    if flo >= 0 or fhi <= 0:
        raise ConvergenceError(f"{what}: no sign change on [{lo}, {hi}]")
    x = optimize.bisect(lambda t: fn(t) - 1, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    if abs(fn(x) - 1) >= BISECT_TOL:
        raise ConvergenceError(f"{what}: bisection ended with |bell - 1| = {abs(fn(x) - 1):.3g}")
    return x


def critical_efficiency(cfg: Config) -> float | None:
    """Smallest efficiency with ``bell > 1`` at the configured purity, or ``None``."""
    def bell(eta):
        return run_config(replace(cfg, eta=float(eta))).bell

    if bell(1.0) <= 1:
        return None
    return bisect_unit(bell, ETA_FLOOR, 1.0, "critical efficiency")


def mabk_eta_min(N: int) -> float:
    """``2^{(1-2N)/N} pi``: pure-state MABK efficiency bound."""
    return 2 ** ((1 - 2 * N) / N) * math.pi


@dataclass(frozen=True)
class BoundaryPoint:
    N: int
    eta_crit: float
    p_crit: float
    bell_at_point: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["one_minus_p"] = 1 - self.p_crit
        return d


def noise_boundary(cfg: Config, etas: Iterable[float]) -> list[BoundaryPoint]:
    """Critical purity at each efficiency; efficiencies with no violation at p = 1 are skipped."""
    points = []
    for eta in etas:
        def bell(p, eta=eta):
            return run_config(replace(cfg, eta=float(eta), p=float(p))).bell

        if bell(1.0) <= 1:
            continue
        p = bisect_unit(bell, 0.0, 1.0, f"critical purity at eta={eta}")
        pure = cfg.pure_state()
        points.append(BoundaryPoint(pure.mode_count, float(eta), p, bell(p)))
    return points


def richardson(Ns: Sequence[int], values: Sequence[float]) -> float:
    """Limit ``a`` of ``a + b/N + c/N^2`` through the given points."""
    if len(Ns) != 3:
        raise ValueError("three points required")
    inv = 1 / np.asarray(Ns, dtype=float)
    A = np.stack([np.ones(3), inv, inv ** 2], axis=1)
    return float(np.linalg.solve(A, np.asarray(values, dtype=float))[0])


ASYMPTOTE_NS = (40, 80, 200)


def analytic_eta_asymptote() -> float:
    return richardson(ASYMPTOTE_NS, [optimal.analytic_eta_crit(N) for N in ASYMPTOTE_NS])


def cfrd_eta_asymptote() -> tuple[float, dict]:
    raw = {N: critical_efficiency(Config("cfrd", N, N // 2)) for N in ASYMPTOTE_NS}
    return richardson(ASYMPTOTE_NS, [raw[N] for N in ASYMPTOTE_NS]), raw


def cfrd_eta_closed_form(N: int) -> float:
    """Root of ``(1/4)[4 eta^2 / (1 + 2 eta)]^{N/2} = 1`` for even N."""
    k = 4 ** (2 / N) / 4
    return k + math.sqrt(k * k + k)


# -- sweeps ------------------------------------------------------------------

R_RULES = ("half", "half+1", "half-1", "fixed", "all")


@dataclass(frozen=True)
class SweepSpec:
    family: str
    N_values: tuple[int, ...]
    r_rule: str = "half"
    r_fixed: int | None = None
    etas: tuple[float, ...] = (1.0,)
    ps: tuple[float, ...] = (1.0,)
    function: FunctionSpec | str | None = None
    state: str | None = None
    purity_model: str = "global"
    eps_mode: str = "formula"
    workers: int = 1

    def __post_init__(self):
        for name, seq in (("N_values", self.N_values), ("etas", self.etas), ("ps", self.ps)):
            seq = tuple(seq)
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, seq)
        if self.r_rule not in R_RULES:
            raise ValueError(f"r_rule must be one of {R_RULES}")
        if self.state is None and min(self.N_values) < 1:
            raise ValueError("N must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        """Keys mirror the fields; ``N`` is a list or ``N_range`` an inclusive ``[lo, hi]``."""
        doc = dict(doc)
        if "N_range" in doc:
            lo, hi = doc.pop("N_range")
            doc["N_values"] = tuple(range(int(lo), int(hi) + 1))
        elif "N" in doc:
            doc["N_values"] = tuple(int(n) for n in doc.pop("N"))
        for key in ("etas", "ps"):
            if key in doc:
                doc[key] = tuple(float(v) for v in doc[key])
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sweep keys {sorted(unknown)}")
        return cls(**doc)

    def r_values(self, N: int) -> list[int | None]:
        if self.state is not None:
            return [None]
        rule = self.r_rule
        if rule == "half":
            return [N // 2]
        if rule == "half+1":
            return [min(N, N // 2 + 1)]
        if rule == "half-1":
            return [max(0, N // 2 - 1)]
        if rule == "fixed":
            return [self.r_fixed]
        return list(range(N + 1))

    def configs(self) -> list[Config]:
        out = []
        for N in self.N_values:
            state = None if self.state is None else f"{self.state}:{N}"
            for r in self.r_values(N):
                for eta in self.etas:
                    for p in self.ps:
                        out.append(Config(self.family, N, r, eta, p, self.function, state,
                                          purity_model=self.purity_model, eps_mode=self.eps_mode))
        return out


def sweep(spec: SweepSpec) -> list[dict]:
    """Evaluate every configuration; rows follow the configuration order."""
    cfgs = spec.configs()
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            results = list(pool.map(run_config, cfgs))
    else:
        results = [run_config(c) for c in cfgs]
    return [result_row(c, r) for c, r in zip(cfgs, results)]


sweep_N = sweep


def first_violation(rows: Iterable[dict]) -> int | None:
    hits = [row["N"] for row in rows if row["violated"]]
    return min(hits) if hits else None


def triplebin_optimum(N: int, family: str = "mabk", bracket=(0.0, 1.5)) -> dict:
    """Best dead-zone width ``s`` and whether it beats ``s = 0``."""
    def bell(s):
        return run_config(Config(family, N, N // 2, function=FunctionSpec("triplebin", (s,)))).bell

    grid = np.linspace(*bracket, 151)
    vals = [bell(s) for s in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(0, i - 1)], grid[min(len(grid) - 1, i + 1)]
    s_opt = grid[i]
    if hi > lo:
        res = optimize.minimize_scalar(lambda s: -bell(s), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-8})
        if -res.fun >= vals[i]:
            s_opt = float(res.x)
    b0, bs = bell(0.0), bell(s_opt)
    return {"family": family, "N": N, "s_opt": float(s_opt), "bell_opt": bs, "bell_s0": b0,
            "beats_s0": bool(bs > b0 + 1e-12)}


# -- oracle --------------------------------------------------------------------

def oracle_crosscheck(cfg: Config, points: int = DEFAULT_POINTS) -> CrosscheckReport:
    """Grid-integrate every moment entering ``run_config(cfg)``; ``N <= 3`` only."""
    rho, angles, f = resolve(cfg)
    if rho.mode_count > 3:
        raise ValueError("oracle cross-check supports N <= 3")
    if cfg.family in ("sv4", "sv8"):
        options = [[(f, a) for a in row] for row in angles]
    else:
        g = f
        options = [[(f, a), (g, b)] for a, b in angles]
    return crosscheck_moments(rho, options, points)


# -- figure datasets --------------------------------------------------------------

@dataclass
class Dataset:
    name: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InvariantError(msg)


def cfrd_closed(N: int, r: int) -> float:
    return 0.25 / ((3 ** (N - r) + 3 ** r) / 2 ** (N + 1))


def mabk_closed(N: int, eta: float = 1.0, p: float = 1.0) -> float:
    return math.sqrt(2) / 2 * (4 * eta * p * p / math.pi) ** (N / 2)


def dataset_r_sweep(Ns=(8, 10, 12, 14)) -> Dataset:
    rows = []
    for N in Ns:
        spec = SweepSpec("cfrd", (N,), r_rule="all")
        part = sweep(spec)
        for row in part:
            _check(abs(row["bell"] - cfrd_closed(N, row["r"])) < 1e-10, f"CFRD closed form N={N} r={row['r']}")
        best = max(part, key=lambda row: row["bell"])
        _check(best["r"] in (N // 2, (N + 1) // 2), f"CFRD maximum off r=N/2 at N={N}")
        _check(not part[-1]["violated"], f"r=N violates at N={N}")
        rows += part
    return Dataset("fig-r-sweep", CSV_COLUMNS, rows)


def dataset_mabk_N(Ns=tuple(range(1, 13))) -> Dataset:
    funcs = [SIGN_BIN, PRESETS["tanh_opt"], FunctionSpec("tanh", (20.0, 1.0)), PRESETS["triplebin_opt"]]
    rows = []
    for f in funcs:
        rows += sweep(SweepSpec("mabk", Ns, function=f))
    by = {(row["function"], row["N"]): row["bell"] for row in rows}
    for N in Ns:
        _check(abs(by[("bin", N)] - mabk_closed(N)) < 1e-9, f"MABK closed form N={N}")
        t4, t20, b = by[(PRESETS["tanh_opt"].label(), N)], by[("tanh(20.0,1.0)", N)], by[("bin", N)]
        _check(t4 <= b + 1e-12 and t20 <= b + 1e-12, f"tanh above bin at N={N}")
        _check(t20 >= t4 - 1e-12 or N == 1, f"tanh does not approach bin at N={N}")
    return Dataset("fig-mabk-N", CSV_COLUMNS, rows)


def dataset_functional_N(Ns=tuple(range(2, 15))) -> Dataset:
    rows = []
    for f in (AUTO, IDENTITY, PRESETS["power_third"], SIGN_BIN):
        rows += sweep(SweepSpec("functional", Ns, function=f))
    by = {(row["function"], row["N"]): row["bell"] for row in rows}
    for N in Ns:
        _check(abs(by[("identity", N)] - cfrd_closed(N, N // 2)) < 1e-10, f"identity closed form N={N}")
        ints = optimal.integrals_at(lossless_epsilon(N))
        closed = optimal.functional_closed_form(N, N // 2, ints)
        _check(abs(by[("auto", N)] - closed) < 1e-9 * max(1.0, closed), f"optimal closed form N={N}")
        if N >= 5:
            _check(by[("auto", N)] > by[("identity", N)], f"optimal below CFRD at N={N}")
    return Dataset("fig-functional-N", CSV_COLUMNS, rows)


BOUNDARY_COLUMNS = ("family", "N", "eta_crit", "p_crit", "one_minus_p", "bell_at_point")


def _eta_grid(lo: float, steps: int = 11) -> np.ndarray:
    return np.round(np.linspace(lo, 1.0, steps), 12)


def dataset_mabk_boundary(Ns=(3, 4, 5, 6, 8, 10)) -> Dataset:
    rows = []
    for N in Ns:
        cfg = Config("mabk", N, N // 2, purity_model="local")
        lo = math.ceil(mabk_eta_min(N) * 1e4) / 1e4
        for pt in noise_boundary(cfg, _eta_grid(lo)):
            _check(abs(pt.eta_crit * pt.p_crit ** 2 - mabk_eta_min(N)) < 1e-6,
                   f"MABK boundary off eta p^2 law at N={N}")
            rows.append({"family": "mabk", **pt.to_dict()})
    return Dataset("fig-mabk-boundary", BOUNDARY_COLUMNS, rows)


def dataset_functional_boundary(Ns=(6, 8, 10, 20, 40)) -> Dataset:
    rows = []
    for N in Ns:
        cfg = Config("functional", N, N // 2, function=AUTO, purity_model="local_sqrt")
        eta0 = critical_efficiency(cfg)
        lo = math.ceil(eta0 * 1e4) / 1e4
        for pt in noise_boundary(cfg, _eta_grid(lo)):
            _check(abs(pt.bell_at_point - 1) < 1e-6, f"boundary point off B=1 at N={N}")
            eps = optimal.epsilon_lossy(pt.eta_crit, _eps_even()) if pt.eta_crit < 1 else _eps_even()
            closed = optimal.functional_even_lossy(N, optimal.integrals_at(eps), pt.eta_crit, pt.p_crit)
            _check(abs(closed - 1) < 1e-6, f"lossy closed form off at N={N}, eta={pt.eta_crit}")
            rows.append({"family": "functional", **pt.to_dict()})
    return Dataset("fig-functional-boundary", BOUNDARY_COLUMNS, rows)


DATASETS = {
    "fig-r-sweep": dataset_r_sweep,
    "fig-mabk-N": dataset_mabk_N,
    "fig-functional-N": dataset_functional_N,
    "fig-mabk-boundary": dataset_mabk_boundary,
    "fig-functional-boundary": dataset_functional_boundary,
}


# -- serialization -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str], delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def to_json(rows: Sequence[dict], columns: Sequence[str]) -> str:
    return json.dumps([{c: row.get(c) for c in columns} for row in rows], indent=2) + "\n"


def serialize(rows: Sequence[dict], columns: Sequence[str], fmt: str) -> str:
    if fmt == "csv":
        return to_csv(rows, columns)
    if fmt in ("tsv", "tsv-plotdata"):
        return to_csv(rows, columns, "\t")
    if fmt == "json":
        return to_json(rows, columns)
    raise ValueError(f"unknown output format {fmt!r}")
