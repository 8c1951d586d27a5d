"""Volume sweeps, log-log exponent fits and the summary report."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .branching import BranchingLayout, build_layout
from .corner_geometry import DEFAULT_CORNER, CornerDomain, frame_for_domain, validate_corner
from .energy import (
    BallConfiguration,
    EnergyBreakdown,
    QuadratureGrid,
    cell_energy,
    elastic_energy_quadrature,
    interfacial_energy_grid,
    small_volume_energy,
    total_energy_analytic,
    total_energy_quadrature,
)

CSV_FIELDS = ("V", "R", "method", "component", "interfacial", "elastic", "total")
COMPONENTS = ("total", "interior", "layer", "austenite_face", "small_volume")
METHODS = ("analytic", "grid", "both")

INTERIOR_SLOPE = (7 / 9 - 0.02, 7 / 9 + 0.02)
TOTAL_SLOPE = (0.72, 0.80)
SMALL_SLOPE = (2 / 3 - 0.03, 2 / 3 + 0.03)
RATIO_SPREAD_MAX = 5.0
QUADRATURE_TOL = 0.15


def default_volumes() -> tuple[float, ...]:
    small = np.logspace(-6, 0, 29)
    large = np.logspace(1, 9, 33)
    return tuple(float(v) for v in np.concatenate([small, large]))


@dataclass(frozen=True)
class SweepConfig:
    volumes: tuple[float, ...] = field(default_factory=default_volumes)
    method: str = "analytic"
    corner: tuple = DEFAULT_CORNER
    grid: int = 128
    seed: int = 0
    output: str | None = None
    workers: int = 1
    grid_max_R: float = 64.0

    def __post_init__(self):
        vols = tuple(float(v) for v in self.volumes)
        if not vols or any(not v > 0 for v in vols):
            raise ValueError("volumes must be positive")
        if any(b <= a for a, b in zip(vols, vols[1:])):
            raise ValueError("volumes must be strictly ascending")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        object.__setattr__(self, "volumes", vols)


def _parse_volumes(text: str) -> tuple[float, ...]:
    """``1e-3,1e-2`` or ``logspace:lo:hi:n`` (decades), ``;``-joined for several ranges."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part.startswith("logspace:"):
            _, lo, hi, n = part.split(":")
            out.extend(np.logspace(float(lo), float(hi), int(n)).tolist())
        elif part:
            out.extend(float(v) for v in part.split(","))
    return tuple(sorted(set(out)))


def _parse_corner(text: str):
    vals = [float(v) for v in text.replace(";", ",").split(",")]
    if len(vals) != 9:
        raise ValueError("corner needs nine numbers: a, b and c")
    return tuple(tuple(vals[i:i + 3]) for i in (0, 3, 6))


def load_config(path, **overrides) -> SweepConfig:
    """Read ``key = value`` lines (``#`` comments) and apply non-None overrides."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
    return config_from_mapping(values, **overrides)


def config_from_mapping(values: dict, **overrides) -> SweepConfig:
    kw = {}
    casts = {"method": str, "grid": int, "seed": int, "output": str, "workers": int,
             "grid_max_R": float}
    for key, val in values.items():
        if key == "volumes":
            kw[key] = _parse_volumes(val)
        elif key == "corner":
            kw[key] = _parse_corner(val)
        elif key in casts:
            kw[key] = casts[key](val)
        else:
            raise ValueError(f"unknown config key {key!r}")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**kw)


def small_volume_quadrature(V: float, domain: CornerDomain, n: int = 64, seed: int = 0) -> EnergyBreakdown:
    ref = small_volume_energy(V, domain)
    r = ref.R
    c = np.asarray(ref.flags["center"])
    cfg = BallConfiguration(c, r)
    grid = QuadratureGrid.cartesian(c - 1.25 * r, c + 1.25 * r, (n, n, n), seed=seed)
    interfacial = interfacial_energy_grid(cfg, grid)
    elastic = elastic_energy_quadrature(cfg, grid)
    return EnergyBreakdown(V=V, R=r, interfacial=interfacial, elastic=elastic,
                           total=interfacial + elastic, interior=elastic, layer=0.0,
                           austenite_face=interfacial, method="quadrature", flags={"grid": [n] * 3})


def evaluate_volume(V: float, domain: CornerDomain, method: str = "analytic", grid: int = 128,
                    seed: int = 0, grid_max_R: float = math.inf) -> list[EnergyBreakdown]:
    """Analytic and/or quadrature breakdowns at one volume (quadrature skipped above ``grid_max_R``)."""
    out = []
    if V <= 1:
        if method in ("analytic", "both"):
            out.append(small_volume_energy(V, domain))
        if method in ("grid", "both"):
            out.append(small_volume_quadrature(V, domain, min(grid, 64), seed))
        return out
    layout = build_layout(domain, V)
    if method in ("analytic", "both"):
        out.append(total_energy_analytic(layout))
    if method in ("grid", "both") and layout.R <= grid_max_R:
        out.append(total_energy_quadrature(layout, grid, seed=seed))
    return out


def sweep(config: SweepConfig) -> list[EnergyBreakdown]:
    domain = validate_corner(*config.corner)
    frame_for_domain(domain)  # refuses degenerate corners before any work

    def one(V):
        return evaluate_volume(V, domain, config.method, config.grid, config.seed, config.grid_max_R)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            parts = list(ex.map(one, config.volumes))
    else:
        parts = [one(V) for V in config.volumes]
    return [b for p in parts for b in p]


def _fmt(x) -> str:
    return repr(float(x))


def breakdown_rows(b: EnergyBreakdown) -> list[dict]:
    """One CSV row per component; small volumes get ``small_volume`` and ``total``."""
    def row(component, interfacial, elastic):
        return {"V": b.V, "R": b.R, "method": b.method, "component": component,
                "interfacial": interfacial, "elastic": elastic, "total": interfacial + elastic}

    rows = [row("total", b.interfacial, b.elastic)]
    if b.V <= 1:
        rows.append(row("small_volume", b.interfacial, b.elastic))
        return rows
    if b.method == "analytic":
        f = b.flags
        rows.append(row("interior", f["interior_interfacial"], f["interior_elastic"]))
        rows.append(row("layer", f["layer_interfacial"], f["layer_elastic"]))
        rows.append(row("austenite_face", b.austenite_face, 0.0))
    return rows


def write_sweep_csv(breakdowns, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for b in breakdowns:
        for r in breakdown_rows(b):
            w.writerow([_fmt(r["V"]), _fmt(r["R"]), r["method"], r["component"],
                        _fmt(r["interfacial"]), _fmt(r["elastic"]), _fmt(r["total"])])


def sweep_csv_text(breakdowns) -> str:
    buf = io.StringIO()
    write_sweep_csv(breakdowns, buf)
    return buf.getvalue()


def read_sweep_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: header must be {','.join(CSV_FIELDS)}")
        for lineno, r in enumerate(reader, 2):
            try:
                rows.append({"V": float(r["V"]), "R": float(r["R"]), "method": r["method"],
                             "component": r["component"], "interfacial": float(r["interfacial"]),
                             "elastic": float(r["elastic"]), "total": float(r["total"])})
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row") from exc
            if rows[-1]["component"] not in COMPONENTS:
                raise ValueError(f"{path}:{lineno}: unknown component {r['component']!r}")
    return rows


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    window: tuple[float, float]
    component: str
    points: int

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def fit_power_law(V, E, window=(0.0, math.inf), component: str = "total") -> FitResult:
    """Least-squares line through ``(log V, log E)`` for ``V`` in the closed window."""
    V = np.asarray(V, dtype=float)
    E = np.asarray(E, dtype=float)
    lo, hi = window
    # tolerate round-off in window endpoints written to CSV
    m = (V >= lo * (1 - 1e-9)) & (V <= hi * (1 + 1e-9))
    if int(m.sum()) < 4:
        raise ValueError(f"need at least 4 points in window {window}, found {int(m.sum())}")
    if np.any(E[m] <= 0):
        raise ValueError("energies must be positive for a log-log fit")
    x, y = np.log(V[m]), np.log(E[m])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # residuals at rounding level mean an exact fit, even for flat data
    if ss_res <= 1e-24 * len(y) * max(float(y @ y), 1.0):
        r2 = 1.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    if not math.isfinite(slope):
        raise ValueError("fit produced a non-finite slope")
    return FitResult(float(slope), float(intercept), r2, (float(lo), float(hi)), component, int(m.sum()))


def fit_exponent(rows, component: str, window, method: str = "analytic") -> FitResult:
    sel = [r for r in rows if r["component"] == component and r["method"] == method]
    return fit_power_law([r["V"] for r in sel], [r["total"] for r in sel], window, component)


def _in_window(x, window) -> bool:
    return window[0] * (1 - 1e-9) <= x <= window[1] * (1 + 1e-9)


def per_cell_constants(R_values=(8.0, 64.0, 512.0), corner=DEFAULT_CORNER) -> dict:
    """Measured per-cell constants for box layouts of depth ``R``."""
    frame = frame_for_domain(validate_corner(*corner))
    el, itf, spread = [], [], []
    for R in R_values:
        layout = BranchingLayout.from_depth(R, frame)
        s = layout.schedule
        scaled = []
        for w, h in zip(s.widths, s.heights):
            c = cell_energy(frame, w, h)
            el.append(c.elastic / (w ** 4 / h))
            itf.append(c.interfacial / (h * w))
            scaled.append(c.total / w ** 2.5)
        spread.append(max(scaled) / min(scaled))
    return {"R": list(R_values),
            "elastic_over_w4_h": [min(el), max(el)],
            "interfacial_over_hw": [min(itf), max(itf)],
            "C": max(max(el), max(itf)),
            "w52_spread": spread,
            "w52_spread_ok": all(s <= 3.0 for s in spread)}


def quadrature_deviations(rows) -> list[dict]:
    """Relative deviation of quadrature totals from analytic totals at matching volumes."""
    analytic = {r["V"]: r for r in rows if r["method"] == "analytic" and r["component"] == "total"}
    out = []
    for r in rows:
        if r["method"] == "quadrature" and r["component"] == "total" and r["V"] in analytic:
            a = analytic[r["V"]]["total"]
            out.append({"V": r["V"], "R": r["R"], "analytic": a, "quadrature": r["total"],
                        "deviation": abs(r["total"] - a) / a})
    return out


@dataclass(frozen=True)
class ReportThresholds:
    interior_window: tuple[float, float] = (1e3, 1e9)
    total_window: tuple[float, float] = (1e4, 1e9)
    small_window: tuple[float, float] = (1e-6, 1.0)


def report(sweep_path, cover_paths=(), thresholds: ReportThresholds = ReportThresholds()) -> tuple[dict, bool]:
    """Summary document and overall pass flag for a sweep CSV plus optional covering reports."""
    rows = read_sweep_csv(sweep_path)
    checks, fits = {}, {}

    def fit_check(name, component, window, bounds):
        try:
            fr = fit_exponent(rows, component, window)
        except ValueError as exc:
            fits[name] = {"error": str(exc)}
            checks[name] = False
            return None
        fits[name] = fr.as_dict() | {"bounds": list(bounds)}
        checks[name] = bounds[0] <= fr.slope <= bounds[1]
        return fr

    th = thresholds
    fit_check("interior_slope", "interior", th.interior_window, INTERIOR_SLOPE)
    fit_check("total_slope", "total", th.total_window, TOTAL_SLOPE)
    fit_check("small_volume_slope", "small_volume", th.small_window, SMALL_SLOPE)

    tot = [r for r in rows if r["method"] == "analytic" and r["component"] == "total"
           and _in_window(r["V"], th.total_window)]
    ratios = [r["total"] / r["V"] ** (7 / 9) for r in tot]
    spread = max(ratios) / min(ratios) if ratios else math.inf
    checks["total_ratio_spread"] = spread <= RATIO_SPREAD_MAX

    cells = per_cell_constants()
    checks["per_cell_w52_spread"] = cells["w52_spread_ok"]

    devs = quadrature_deviations(rows)
    if devs:
        checks["quadrature_deviation"] = all(d["deviation"] <= QUADRATURE_TOL for d in devs)

    covers = []
    for p in cover_paths:
        with open(p) as fh:
            c = json.load(fh)
        covers.append({"path": str(p), **{k: c[k] for k in (
            "disjoint_ok", "inside_ok", "coverage_ok", "fraction_ok", "proxy_ok",
            "covered_fraction", "sum_r3", "proxy_sum_r73", "c")}})
        checks[f"covering:{p}"] = bool(c["ok"])

    doc = {"fits": fits, "total_ratio": {"window": list(th.total_window), "min": min(ratios, default=None),
                                         "max": max(ratios, default=None), "spread": spread},
           "per_cell": cells, "quadrature": devs, "covering": covers,
           "checks": checks, "passed": all(checks.values())}
    return doc, doc["passed"]


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def with_overrides(config: SweepConfig, **kw) -> SweepConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
