"""Figure-level sweeps and the validation suite behind the command line.

Every command returns one or more ``SweepTable`` objects; ``write_table``
turns each into a CSV and a JSON file with the same content. Tables are in
long format: one row per (curve, sweep coordinate), with the curve key
(``n_tx`` or ``p_dbm``) as the leading column.
"""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import capacity, detection, optimizer
from .detection import DEFAULT_SCALING
from .montecarlo import Hypothesis, Scaling, empirical_curve, run_batch
from .quadrature import integrate
from .special_math import c_series, hyp0f1
from .system_model import SystemConfig, derive

__all__ = [
    "SweepTable",
    "CheckResult",
    "ValidationReport",
    "write_table",
    "table_metadata",
    "version_string",
    "scaled_tolerance",
    "cmd_validate",
    "cmd_roc",
    "cmd_rate_sweep",
    "cmd_error_vs_threshold",
    "cmd_sweep_power",
    "cmd_sweep_rmin",
]

# frozen column schemas; tests compare CSV headers against these
SCHEMAS = {
    "roc": ("n_tx", "tau", "p_f", "p_d_analytic", "p_d_empirical", "ci_halfwidth"),
    "rate_sweep": ("n_tx", "p_c_dbm", "rate_analytic", "rate_mc", "stderr"),
    "error_vs_threshold": ("n_tx", "tau", "p_e"),
    "sweep_power": (
        "n_tx", "p_dbm", "feasible", "rho_c_star", "tau_star",
        "p_f_star", "p_md_star", "p_e_star", "p_f_cfar", "p_md_cfar", "p_e_cfar",
    ),
    "sweep_rmin": ("p_dbm", "r_min", "feasible", "rho_c_star", "p_e_star", "achieved_rate"),
    "validate": ("check", "measured", "tolerance", "passed"),
}


def version_string() -> str:
    """``git describe`` of the source tree, or the installed package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        from importlib.metadata import PackageNotFoundError, version

        try:
            return version("artifact")
        except PackageNotFoundError:
            return "unknown"


@dataclass
class SweepTable:
    name: str
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {k: len(v) for k, v in self.columns.items()}
        if len(set(lengths.values())) > 1:
            raise ValueError(f"{self.name}: column lengths differ: {lengths}")
        expected = SCHEMAS.get(self.name)
        if expected is not None and tuple(self.columns) != expected:
            raise ValueError(f"{self.name}: columns {tuple(self.columns)} do not match schema {expected}")

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def rows(self):
        cols = list(self.columns.values())
        for i in range(len(self)):
            yield [c[i] for c in cols]

    def column(self, name) -> np.ndarray:
        return np.asarray(self.columns[name])

    def select(self, key: str, value) -> "SweepTable":
        """Rows where column ``key`` equals ``value``, without schema checking."""
        mask = self.column(key) == value
        t = SweepTable.__new__(SweepTable)
        t.name, t.metadata = self.name, self.metadata
        t.columns = {k: [v for v, m in zip(col, mask) if m] for k, col in self.columns.items()}
        return t


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def table_csv(table: SweepTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(table.columns))
    for row in table.rows():
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def table_json(table: SweepTable) -> str:
    doc = {"name": table.name, "metadata": _jsonable(table.metadata), "columns": _jsonable(table.columns)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_table(table: SweepTable, out_dir) -> list:
    """Write ``<name>.csv`` and ``<name>.json`` into ``out_dir``; return the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{table.name}.csv"
    json_path = out_dir / f"{table.name}.json"
    csv_path.write_text(table_csv(table), encoding="utf-8")
    json_path.write_text(table_json(table), encoding="utf-8")
    return [csv_path, json_path]


def table_metadata(config: SystemConfig, seed: int, scaling, **extra) -> dict:
    meta = {
        "config": asdict(config),
        "seed": int(seed),
        "version": version_string(),
        "scaling": Scaling(scaling).value,
        "scaling_arbitration": {"null_native": "sample_mean", "h1_native": "raw_sum"},
    }
    meta.update(extra)
    return meta


def _pmap(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def scaled_tolerance(base: float, trials: int, reference: int) -> float:
    """Tolerance ``base`` at ``reference`` trials, widened as 1/sqrt(n) below it."""
    return base * max(1.0, math.sqrt(reference / trials))


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list
    arbitration: detection.ScalingArbitration
    trials: int
    seed: int
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = [f"validation: trials={self.trials} seed={self.seed}", "", "scaling arbitration:"]
        lines.append(self.arbitration.describe())
        lines.append("")
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            line = f"[{mark}] {c.name}: measured {c.measured:.6g} (tolerance {c.tolerance:.6g})"
            if c.detail:
                line += f"  {c.detail}"
            lines.append(line)
        if self.notes:
            lines.append("")
            lines.extend(self.notes)
        lines.append("")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"

    def table(self, metadata: dict) -> SweepTable:
        cols = {
            "check": [c.name for c in self.checks],
            "measured": [c.measured for c in self.checks],
            "tolerance": [c.tolerance for c in self.checks],
            "passed": [c.passed for c in self.checks],
        }
        return SweepTable("validate", cols, metadata)


# C_k spot checks: (k, s, c, t, K); includes negative s
_CK_CASES = (
    (0, 0.5, 0.3, 1.0, 8),
    (3, 1.2, 2.0, 4.0, 8),
    (7, 0.9, 5.0, 10.0, 8),
    (0, -0.4, 1.0, 3.0, 10),
    (2, -1.5, 0.7, 2.5, 4),
    (9, 0.05, 20.0, 30.0, 10),
)


def _ck_quadrature(k, s, c, t, K):
    f = lambda x: math.exp(-s * t * x) * x**k * hyp0f1(K, c * t * x)  # noqa: E731
    return integrate(f, 0.0, 1.0, abs_tol=0.0, rel_tol=1e-14)[0]


def cmd_validate(
    config: SystemConfig,
    trials: int = 100_000,
    seed: int | None = None,
    scaling=DEFAULT_SCALING,
    mc_config: SystemConfig | None = None,
) -> ValidationReport:
    """Analytic-versus-sampler cross-checks for one scenario.

    ``mc_config`` lets the sampler run on a different scenario than the
    formulas; it exists so tests can prove that a mismatch is caught.
    Tolerances are stated for 10^6 trials (CDFs) or 10^5 trials (CFAR) and
    widen as 1/sqrt(trials) below that.
    """
    seed = config.seed if seed is None else int(seed)
    scaling = Scaling(scaling)
    mc_config = mc_config or config
    derived = derive(config)
    mc_derived = derive(mc_config)
    checks = []

    arbitration = detection.arbitrate_scaling(config, trials=trials, seed=seed)
    consistent = arbitration.null_native is Scaling.SAMPLE_MEAN and arbitration.h1_native is Scaling.RAW_SUM
    checks.append(
        CheckResult("scaling arbitration", float(consistent), 1.0, consistent, "null formula sample_mean, H1 formula raw_sum")
    )

    cdf_tol = scaled_tolerance(0.005, trials, 1_000_000)
    lam0 = run_batch(Hypothesis.H0, mc_derived, mc_config, trials, scaling, seed).lambda_samples
    lam1 = run_batch(Hypothesis.H1, mc_derived, mc_config, trials, scaling, seed).lambda_samples
    d0 = detection.sup_norm_vs_empirical(lambda t: detection.cdf_h0(t, config, scaling), lam0)
    d1 = detection.sup_norm_vs_empirical(lambda t: detection.cdf_h1(t, derived, config, scaling=scaling), lam1)
    checks.append(CheckResult("null CDF vs sampler (sup-norm)", d0, cdf_tol, d0 < cdf_tol))
    checks.append(CheckResult("H1 CDF vs sampler (sup-norm)", d1, cdf_tol, d1 < cdf_tol))

    alpha = 0.1
    tau_cfar = detection.cfar_threshold(alpha, config, scaling)
    pf_emp = float(np.mean(lam0 > tau_cfar))
    cfar_tol = scaled_tolerance(0.01, trials, 100_000)
    checks.append(
        CheckResult(
            "CFAR round trip |P_F - 0.1|", abs(pf_emp - alpha), cfar_tol, abs(pf_emp - alpha) <= cfar_tol,
            f"tau={tau_cfar:.6f} empirical P_F={pf_emp:.5f}",
        )
    )

    worst_z = 0.0
    cap_trials = max(1000, min(trials, 100_000))
    for nt in (1, 2, 4, 8):
        for snr_db in (0.0, 10.0, 20.0):
            cfg = config.replace(n_tx=nt, total_power_dbm=config.sigma_c2_dbm + snr_db, rho_c=1.0, comm_channel_var=1.0)
            mc_cfg = mc_config.replace(n_tx=nt, total_power_dbm=config.sigma_c2_dbm + snr_db, rho_c=1.0, comm_channel_var=1.0)
            exact = capacity.ergodic_rate(1.0, cfg).rate_bps_hz
            mc = capacity.ergodic_rate_mc(1.0, mc_cfg, cap_trials, seed)
            worst_z = max(worst_z, abs(exact - mc.rate_bps_hz) / mc.stderr)
    checks.append(CheckResult("capacity closed form vs sampler (max |z|)", worst_z, 3.0, worst_z < 3.0))

    worst_rel = 0.0
    for k, s, c, t, K in _CK_CASES:
        ref = _ck_quadrature(k, s, c, t, K)
        worst_rel = max(worst_rel, abs(c_series(k, s, c, t, K) - ref) / abs(ref))
    checks.append(CheckResult("C_k series vs quadrature (max rel err)", worst_rel, 1e-10, worst_rel < 1e-10))

    grid = np.linspace(0.05, 3.0, 60) * config.sigma_s2 * (config.samples if scaling is Scaling.RAW_SUM else 1)
    printed = np.asarray(detection.cdf_h0_as_printed(grid, config, scaling))
    notes = [
        "null CDF as typeset: min {:.4f}, max {:.4f} on [0.05, 3] sigma^2; not a distribution function,"
        " the corrected form is used throughout".format(float(printed.min()), float(printed.max()))
    ]
    return ValidationReport(checks, arbitration, trials, seed, notes)


# ---------------------------------------------------------------- figures


def cmd_roc(
    config: SystemConfig,
    nts=(1, 2, 8),
    trials: int = 100_000,
    seed: int | None = None,
    scaling=DEFAULT_SCALING,
    points: int = 200,
    workers: int = 1,
) -> SweepTable:
    """Analytic and empirical ROC, one curve per transmit antenna count."""
    seed = config.seed if seed is None else int(seed)
    upper = optimizer.null_upper_quantile(config, scaling)
    taus = np.linspace(upper / points, upper, points)

    def one(nt):
        cfg = config.replace(n_tx=nt)
        d = derive(cfg)
        analytic = detection.analytic_curve(taus, d, cfg, scaling)
        emp = empirical_curve(
            run_batch(Hypothesis.H0, d, cfg, trials, scaling, seed),
            run_batch(Hypothesis.H1, d, cfg, trials, scaling, seed),
            taus,
        )
        return analytic, emp

    cols = {k: [] for k in SCHEMAS["roc"]}
    for nt, (a, e) in zip(nts, _pmap(one, nts, workers)):
        cols["n_tx"] += [nt] * points
        cols["tau"] += list(taus)
        cols["p_f"] += list(a.p_f)
        cols["p_d_analytic"] += list(a.p_d)
        cols["p_d_empirical"] += list(e.p_d)
        cols["ci_halfwidth"] += list(e.ci_d)
    return SweepTable("roc", cols, table_metadata(config, seed, scaling, trials=trials, n_tx=list(nts)))


def cmd_rate_sweep(
    config: SystemConfig,
    nts=(1, 2, 4, 8),
    pc_dbm=None,
    trials: int = 100_000,
    seed: int | None = None,
    workers: int = 1,
) -> SweepTable:
    """Ergodic rate against the power given to communication."""
    seed = config.seed if seed is None else int(seed)
    pc_dbm = np.arange(0.0, 20.0 + 1e-9, 0.5) if pc_dbm is None else np.asarray(pc_dbm, dtype=float)
    tasks = [(nt, float(p)) for nt in nts for p in pc_dbm]

    def one(task):
        nt, p = task
        cfg = config.replace(n_tx=nt, total_power_dbm=p, rho_c=1.0)
        return capacity.ergodic_rate(1.0, cfg), capacity.ergodic_rate_mc(1.0, cfg, trials, seed)

    cols = {k: [] for k in SCHEMAS["rate_sweep"]}
    for (nt, p), (exact, mc) in zip(tasks, _pmap(one, tasks, workers)):
        cols["n_tx"].append(nt)
        cols["p_c_dbm"].append(p)
        cols["rate_analytic"].append(exact.rate_bps_hz)
        cols["rate_mc"].append(mc.rate_bps_hz)
        cols["stderr"].append(mc.stderr)
    crossings = {}
    for nt in nts:
        # communication power at which the rate reaches 5 bps/Hz
        split = capacity.rate_inverse(5.0, config.replace(n_tx=nt, total_power_dbm=30.0))
        crossings[str(nt)] = 30.0 + 10 * math.log10(split.rho_c) if split.feasible else None
    meta = table_metadata(config, seed, DEFAULT_SCALING, trials=trials, n_tx=list(nts), rate_5_crossing_dbm=crossings)
    return SweepTable("rate_sweep", cols, meta)


def cmd_error_vs_threshold(
    config: SystemConfig,
    nts=(1, 2, 8),
    taus=None,
    scaling=DEFAULT_SCALING,
    points: int = 300,
    workers: int = 1,
) -> SweepTable:
    """Total error against threshold at the configured power split."""
    if taus is None:
        upper = optimizer.null_upper_quantile(config, scaling)
        taus = np.linspace(upper / points, upper, points)
    taus = np.asarray(taus, dtype=float)

    def one(nt):
        cfg = config.replace(n_tx=nt)
        pe = optimizer.total_error_objective(cfg, scaling)(taus)
        best = optimizer.solve_threshold(cfg.rho_c, cfg, scaling)
        return np.asarray(pe), best

    cols = {k: [] for k in SCHEMAS["error_vs_threshold"]}
    minima = {}
    for nt, (pe, best) in zip(nts, _pmap(one, nts, workers)):
        cols["n_tx"] += [nt] * taus.size
        cols["tau"] += list(taus)
        cols["p_e"] += list(pe)
        minima[str(nt)] = {"tau_star": best.tau, "p_e_star": best.p_e}
    return SweepTable("error_vs_threshold", cols, table_metadata(config, config.seed, scaling, n_tx=list(nts), minima=minima))


def cmd_sweep_power(
    config: SystemConfig,
    nts=(1, 2, 8),
    p_dbm=None,
    r_min: float = 5.0,
    alpha: float = 0.1,
    scaling=DEFAULT_SCALING,
    workers: int = 1,
) -> SweepTable:
    """Joint design against the fixed-false-alarm baseline over total power."""
    p_dbm = np.arange(4.0, 14.0 + 1e-9, 0.25) if p_dbm is None else np.asarray(p_dbm, dtype=float)
    tasks = [(nt, float(p)) for nt in nts for p in p_dbm]

    def one(task):
        nt, p = task
        cfg = config.replace(n_tx=nt, total_power_dbm=p)
        res = optimizer.joint_solve(r_min, cfg, scaling)
        return res, optimizer.cfar_baseline(res.rho_c_star, cfg, alpha, scaling)

    cols = {k: [] for k in SCHEMAS["sweep_power"]}
    for (nt, p), (res, base) in zip(tasks, _pmap(one, tasks, workers)):
        for key, v in (
            ("n_tx", nt), ("p_dbm", p), ("feasible", res.feasible), ("rho_c_star", res.rho_c_star),
            ("tau_star", res.tau_star), ("p_f_star", res.p_f_star), ("p_md_star", res.p_md_star),
            ("p_e_star", res.p_e_star), ("p_f_cfar", base.p_f), ("p_md_cfar", base.p_md), ("p_e_cfar", base.p_e),
        ):
            cols[key].append(v)
    meta = table_metadata(config, config.seed, scaling, n_tx=list(nts), r_min=r_min, alpha=alpha)
    return SweepTable("sweep_power", cols, meta)


def cmd_sweep_rmin(
    config: SystemConfig,
    p_dbm=(8.0, 10.0, 12.0),
    r_min=None,
    scaling=DEFAULT_SCALING,
    workers: int = 1,
) -> SweepTable:
    """Joint design over the rate target, one curve per total power."""
    r_min = np.arange(0.25, 10.0 + 1e-9, 0.25) if r_min is None else np.asarray(r_min, dtype=float)
    tasks = [(float(p), float(r)) for p in p_dbm for r in r_min]

    def one(task):
        p, r = task
        return optimizer.joint_solve(r, config.replace(total_power_dbm=p), scaling)

    cols = {k: [] for k in SCHEMAS["sweep_rmin"]}
    for (p, r), res in zip(tasks, _pmap(one, tasks, workers)):
        for key, v in (
            ("p_dbm", p), ("r_min", r), ("feasible", res.feasible), ("rho_c_star", res.rho_c_star),
            ("p_e_star", res.p_e_star), ("achieved_rate", res.achieved_rate),
        ):
            cols[key].append(v)
    meta = table_metadata(config, config.seed, scaling, p_dbm=[float(p) for p in p_dbm])
    return SweepTable("sweep_rmin", cols, meta)

