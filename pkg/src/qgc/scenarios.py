"""Scenario runners behind the command-line front end.

Each runner writes CSV tables into the output directory, renders SVG plots
from those CSVs and returns a :class:`ScenarioResult` whose checks are also
written to ``summary.json``.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import unitary_group

from . import _backend
from .basis import QuantumState
from .config import DEFAULTS, ScenarioConfig
from .operator import assemble_matrix, star_diagonal_oracle
from .propagator import evolve, fidelity, truncation_leakage
from .signals import budget_report, signal_to_csv
from .spectral import (check_assumption_I, check_assumption_II, check_gap_polynomial,
                       check_gap_uniform, find_resonances, perturbed_spectrum, scan_nondegeneracy)
from .synthesis import (GeneratorSet, MomentProblem, admissible_generators, lie_closure_rank,
                        linearized_target, plan_rotations, realize_phase_residual,
                        resonant_pulse, solve_moment_problem, verify_moments)


@dataclass
class Check:
    name: str
    value: float | str
    criterion: str
    passed: bool

    def as_dict(self) -> dict:
        v = self.value
        return {"name": self.name, "value": float(v) if isinstance(v, (int, float, np.floating))
                else str(v), "criterion": self.criterion, "pass": bool(self.passed)}


@dataclass
class ScenarioResult:
    """Checks, informational values and written files of one run."""

    config: ScenarioConfig
    checks: list[Check] = field(default_factory=list)
    info: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value, criterion: str, passed) -> None:
        self.checks.append(Check(name, value, criterion, bool(passed)))

    def summary(self) -> dict:
        cfg = self.config
        return {
            "scenario": cfg.name, "kind": cfg.kind, "N": cfg.N, "seed": cfg.seed,
            "backend": _backend.NAME, "parsed_values": cfg.echo,
            "params": {k: cfg.params[k] for k in sorted(cfg.params)},
            "checks": [c.as_dict() for c in self.checks],
            "info": self.info, "passed": self.passed, "files": sorted(self.files),
        }


class ScenarioError(RuntimeError):
    """A downstream operation failed while running a scenario."""


def _f(x) -> str:
    return repr(float(x))


def _write_csv(result: ScenarioResult, name: str, header: list[str], rows) -> Path:
    path = result.config.out_dir / name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in row])
    result.files.append(name)
    return path


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], np.array(rows[1:], dtype=float)


def _plot(result: ScenarioResult, name: str, draw) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    with matplotlib.rc_context({"svg.hashsalt": "qgc", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax)
        fig.tight_layout()
        fig.savefig(result.config.out_dir / name, format="svg", metadata={"Date": None})
        plt.close(fig)
    result.files.append(name)


def _matrix(cfg: ScenarioConfig, N: int | None = None, basis=None):
    basis = basis or cfg.basis
    return assemble_matrix(cfg.operator, basis, N)


def _integer_levels(cfg: ScenarioConfig, N: int):
    family = cfg.basis.family
    k = np.arange(1, N + 1)
    if family == "tadpole":
        return [int(x) * int(x) for x in k]
    if family.startswith("uniform_chain"):
        cls = cfg.basis.params.get("class")
        if cls == "I2":
            return [int(x) * int(x) for x in k]
        if cls in ("I1", "I3"):
            return [(2 * int(x) - 1) ** 2 for x in k]
    return None


# Assumption audit -------------------------------------------------------------

def run_assumption_audit(cfg: ScenarioConfig, result: ScenarioResult) -> None:
    p = cfg.params
    N = cfg.N
    raw = assemble_matrix(cfg.operator, cfg.basis, raw=True)
    result.add("hermiticity_defect", raw.hermiticity_defect, f"<= {p['hermiticity_tol']:g}",
               raw.hermiticity_defect <= p["hermiticity_tol"])
    M = (raw.matrix + raw.matrix.T) / 2
    mu = cfg.basis.eigenvalues
    _write_csv(result, "basis.csv", ["k", "mu_k", "mode_number", "length_class"],
               [[m.index, m.eigenvalue, m.effective_mode_number,
                 "" if m.length_class is None else m.length_class] for m in cfg.basis.modes])
    _write_csv(result, "coupling_matrix.csv", ["j", "k", "B_jk"],
               [[j + 1, k + 1, float(M[j, k])] for j in range(N) for k in range(N)])

    table = find_resonances(mu, N, tol=p["resonance_tol"], integer_levels=_integer_levels(cfg, N))
    rep = check_assumption_I(M, mu, p["eta"], p["coupling_tol"], resonances=table)
    rep.resonances.to_csv(cfg.out_dir / "resonances.csv")
    result.files.append("resonances.csv")
    result.add("assumption_I.1_couplings", rep.C_best,
               f"min |B_k1| k^(2+eta) > 0 with |B_k1| > {p['coupling_tol']:g}", rep.couplings_pass)
    result.add("assumption_I.2_resonances", rep.min_diagonal,
               f"{len(rep.resonances)} resonant quadruples, no diagonal combination "
               f"<= {p['coupling_tol']:g}", not rep.violations)
    result.info["resonances_exact"] = len(rep.resonances.exact)
    result.info["resonances_near"] = len(rep.resonances.near_misses)
    result.info["coupling_constant_k"] = rep.attaining_k

    rep2 = check_assumption_II(cfg.basis, cfg.operator, p["eta"], p["a"])
    result.add("assumption_II_boundary", rep2.identity_residual,
               "B phi_k satisfies the vertex conditions", not rep2.identity_failures)
    result.add("assumption_II_range", rep2.a_plus_eta, "some d range admissible", rep2.admissible)
    result.info["assumption_II_case"] = rep2.boundary_case
    result.info["assumption_II_ranges"] = {k: list(v) for k, v in sorted(rep2.d_ranges.items())}
    if rep2.notes:
        result.info["assumption_II_notes"] = list(rep2.notes)

    labels = [m.length_class for m in cfg.basis.modes]
    if len({l for l in labels if l is not None}) > 1:
        mixed_table = find_resonances(mu, N, tol=p["mixed_tol"])
        mixed = mixed_table.mixed(labels)
        result.add("mixed_class_resonances", len(mixed), f"none within {p['mixed_tol']:g}",
                   not mixed)
        result.info["same_class_resonances"] = len(mixed_table) - len(mixed)
        if cfg.basis.family == "star_pair":
            rows, ratios = [], []
            for m in cfg.basis.modes:
                L = cfg.basis.params["lengths"][m.length_class - 1]
                stated = star_diagonal_oracle(m.mode_number, L)
                k = m.index
                rows.append([k, m.length_class, m.mode_number, float(M[k - 1, k - 1]), stated])
                ratios.append(stated / M[k - 1, k - 1])
            _write_csv(result, "star_diagonal.csv",
                       ["k", "class", "m", "quadrature", "stated_formula"], rows)
            result.info["star_diagonal_stated_over_quadrature"] = sorted(
                {round(float(r), 12) for r in ratios})

    gap_basis = cfg.basis_factory(int(p["gap_modes"])) if cfg.basis_factory else cfg.basis
    mu_ld = gap_basis.eigenvalues_ld
    gaps = np.diff(mu_ld)
    C_best, ok, k_best = check_gap_polynomial(mu_ld.astype(float), p["gap_d"])
    result.add("gap_polynomial", C_best, f"min gap_k k^(d+1) > 0, d={p['gap_d']:g}", ok)
    inf_gap = float(gaps.min())
    result.info["inf_gap"] = inf_gap
    result.info["inf_gap_k"] = int(np.argmin(gaps)) + 1
    if p["expected_gap"] is not None:
        from ._expr import parse_real
        expected = parse_real(p["expected_gap"])
        rel = float(abs(gaps.min() - expected) / expected)
        result.add("inf_gap_value", rel, f"relative error vs {p['expected_gap']} <= "
                   f"{p['gap_rtol']:g}", rel <= p["gap_rtol"])
    k = np.arange(1, gaps.size + 1, dtype=float)
    uniform = None
    if p["gap_delta"] is not None:
        uniform = check_gap_uniform(mu_ld.astype(float), p["gap_delta"])
        result.add("gap_uniform", float(uniform.margins.min()),
                   f"smallest block M={uniform.M} with delta={p['gap_delta']:g}", uniform.passed)
    rows = []
    for i in range(gaps.size):
        row = [i + 1, float(gaps[i]), float(gaps[i]) * k[i] ** (p["gap_d"] + 1)]
        if uniform is not None:
            row.append(float(uniform.margins[i]) if i < uniform.margins.size else "")
        rows.append(row)
    header = ["k", "gap", "poly_margin"] + (["uniform_margin"] if uniform is not None else [])
    path = _write_csv(result, "gap_margins.csv", header, rows)

    def draw(ax):
        head, data = _read_csv(path)
        ax.loglog(data[:, 0], data[:, 1], label="mu_{k+1} - mu_k")
        ax.loglog(data[:, 0], data[:, 2], label=f"gap * k^{p['gap_d'] + 1:g}")
        ax.set_xlabel("k")
        ax.set_ylabel("margin")
        ax.legend()
    _plot(result, "gap_margins.svg", draw)


# Moment control ---------------------------------------------------------------

def run_moment_control(cfg: ScenarioConfig, result: ScenarioResult) -> None:
    p = cfg.params
    N, T = cfg.N, float(p["T"])
    M = _matrix(cfg).matrix
    mu = cfg.basis.eigenvalues
    x = np.zeros(N, dtype=complex)
    if p["direction"] == "coupling":
        x[1:] = M[1:, 0]
    elif p["direction"] == "uniform":
        x[1:] = 1.0
    else:
        raise ScenarioError(f"unknown direction {p['direction']!r}")
    x /= np.linalg.norm(x)
    psi0 = QuantumState.basis_state(1, N, cfg.basis)
    rows, errors = [], []
    eps_list = sorted((float(e) for e in p["epsilons"]), reverse=True)
    for eps in eps_list:
        mp = MomentProblem.from_targets(eps * x, M, mu, T)
        u, res = solve_moment_problem(mp)
        check = verify_moments(u, mp)
        traj = evolve(psi0, u, mu, M, p["dt_max"], record_every=10 ** 9)
        err = float(np.linalg.norm(traj.final.coefficients - linearized_target(eps * x, mu, T)))
        b = budget_report(u)
        errors.append(err)
        rows.append([eps, err, float(res.max()), check, b.linf, b.bv, u.values.size])
        signal_to_csv(u, cfg.out_dir / f"control_eps_{eps:g}.csv")
        result.files.append(f"control_eps_{eps:g}.csv")
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    path = _write_csv(result, "moment_errors.csv",
                      ["epsilon", "final_error", "residual_max", "independent_residual_max",
                       "linf", "bv", "n_pieces"], rows)
    worst = max(max(r[2], r[3]) for r in rows)
    result.add("moment_residual", worst, f"<= {p['residual_tol']:g}", worst <= p["residual_tol"])
    lo, hi = p["ratio_range"]
    for i, r in enumerate(ratios):
        result.add(f"error_ratio_{eps_list[i]:g}_{eps_list[i + 1]:g}", r, f"in [{lo:g}, {hi:g}]",
                   lo <= r <= hi)
    result.info["error_over_eps2"] = [e / eps ** 2 for e, eps in zip(errors, eps_list)]

    def draw(ax):
        head, data = _read_csv(path)
        ax.loglog(data[:, 0], data[:, 1], "o-", label="final-state error")
        ax.loglog(data[:, 0], data[0, 1] * (data[:, 0] / data[0, 0]) ** 2, "--", label="eps^2")
        ax.set_xlabel("target amplitude eps")
        ax.set_ylabel("error")
        ax.legend()
    _plot(result, "moment_errors.svg", draw)


# Energetic transfer -----------------------------------------------------------

def _transfer_run(cfg, M, mu, A, record, N=None):
    p = cfg.params
    j, k = int(p["source"]), int(p["target"])
    N = N or cfg.N
    omega = abs(mu[k - 1] - mu[j - 1])
    u = resonant_pulse(j, k, 0.0, math.pi / 2, A, M[j - 1, k - 1], omega,
                       j_lower=bool(mu[j - 1] < mu[k - 1]))
    dt = 2 * math.pi / omega / 20
    n_steps = math.ceil(u.horizon / dt)
    every = max(1, n_steps // record) if record else 10 ** 12
    psi0 = np.zeros(N, dtype=complex)
    psi0[j - 1] = 1
    traj = evolve(psi0, u, mu[:N], M[:N, :N], dt, method=p["method"], record_every=every)
    target = np.zeros(N, dtype=complex)
    target[k - 1] = 1
    return u, traj, fidelity(traj.final, target)


def run_energetic_transfer(cfg: ScenarioConfig, result: ScenarioResult) -> None:
    p = cfg.params
    N = cfg.N
    j, k = int(p["source"]), int(p["target"])
    if not (1 <= j <= N and 1 <= k <= N) or j == k:
        raise ScenarioError(f"source/target ({j}, {k}) outside 1..{N} or equal")
    M = _matrix(cfg).matrix
    mu = cfg.basis.eigenvalues
    amps = sorted((float(a) for a in p["amplitudes"]), reverse=True)
    primary = float(p["primary_amplitude"])
    if primary not in amps:
        amps = sorted(amps + [primary], reverse=True)

    def job(A):
        return _transfer_run(cfg, M, mu, A, int(p["record_points"]) if A == primary else 0)

    with ThreadPoolExecutor(max_workers=max(1, int(p["jobs"]))) as pool:
        runs = list(pool.map(job, amps))
    rows, defects, budgets = [], {}, []
    for A, (u, traj, fid) in zip(amps, runs):
        b = budget_report(u)
        defects[A] = 1 - fid
        budgets.append(b.t_linf)
        rows.append([A, u.horizon, b.linf, b.t_linf, b.bv, fid, 1 - fid, traj.norm_drift()])
        if A == primary:
            target = np.zeros(N, dtype=complex)
            target[k - 1] = 1
            traj.to_csv(cfg.out_dir / "trajectory.csv", target=target, target_name=f"phi_{k}")
            result.files.append("trajectory.csv")
            signal_to_csv(u, cfg.out_dir / "pulse.csv")
            result.files.append("pulse.csv")
            result.add("fidelity_primary", fid, f">= {p['fidelity_min']} at A={primary:g}",
                       fid >= p["fidelity_min"])
            result.add("norm_drift", traj.norm_drift(), "<= 1e-12", traj.norm_drift() <= 1e-12)
            result.info["hs3_growth"] = traj.hs_growth(3.0)
    path = _write_csv(result, "transfer.csv", ["A", "T", "linf", "T_linf", "bv", "fidelity",
                                               "defect", "norm_drift"], rows)
    spread = (max(budgets) - min(budgets)) / max(budgets)
    result.add("T_linf_constant", spread, f"relative spread <= {p['budget_rtol']:g}",
               spread <= p["budget_rtol"])
    rtol = p["halving_rtol"]
    for A in amps:
        if A / 2 in defects:
            r = defects[A] / defects[A / 2]
            result.add(f"defect_halving_{A:g}", r, f"in [{2 * (1 - rtol):g}, {2 * (1 + rtol):g}]",
                       abs(r - 2) <= 2 * rtol)
    if p["leakage_check"] and cfg.basis_factory is not None:
        big = cfg.basis_factory(2 * N)
        M2 = assemble_matrix(cfg.operator, big).matrix
        _, tr_n, _ = _transfer_run(cfg, M, mu, primary, 0)
        _, tr_2n, _ = _transfer_run(cfg, M2, big.eigenvalues, primary, 0, N=2 * N)
        result.info["truncation_leakage"] = truncation_leakage(tr_n.final, tr_2n.final)

    def draw_fid(ax):
        head, data = _read_csv(path)
        ax.loglog(data[:, 0], data[:, 6], "o-")
        ax.set_xlabel("amplitude A")
        ax.set_ylabel("1 - fidelity")
    _plot(result, "fidelity_vs_amplitude.svg", draw_fid)

    def draw_pop(ax):
        head, data = _read_csv(cfg.out_dir / "trajectory.csv")
        t = data[:, 0]
        for i in range(N):
            pop = data[:, 1 + 2 * i] ** 2 + data[:, 2 + 2 * i] ** 2
            ax.plot(t, pop, label=f"|c_{i + 1}|^2")
        ax.set_xlabel("t")
        ax.set_ylabel("population")
        ax.legend()
    _plot(result, "populations.svg", draw_pop)


# Perturbation scan ------------------------------------------------------------

def run_perturbation_scan(cfg: ScenarioConfig, result: ScenarioResult) -> None:
    p = cfg.params
    M = _matrix(cfg).matrix
    mu = cfg.basis.eigenvalues
    diag = np.real(np.diag(M))
    u0s = sorted((float(u) for u in p["u0_values"]), reverse=True)
    rows, defects = [], []
    for u0 in u0s:
        ps = perturbed_spectrum(mu, M, u0)
        d = np.abs(ps.shifts / u0 - diag)
        defects.append(float(d.max()))
        rows.append([u0, float(d.max()), int(np.argmax(d)) + 1])
    _write_csv(result, "first_order_defect.csv", ["u0", "max_defect", "attaining_k"], rows)
    lo, hi = p["ratio_range"]
    for i in range(len(u0s) - 1):
        r = defects[i] / defects[i + 1]
        result.add(f"defect_ratio_{u0s[i]:g}_{u0s[i + 1]:g}", r, f"in [{lo:g}, {hi:g}]",
                   lo <= r <= hi)
    grid = np.linspace(p["scan_min"], p["scan_max"], int(p["scan_points"]))
    scan = scan_nondegeneracy(mu, M, grid)
    path = _write_csv(result, "nondegeneracy_scan.csv",
                      ["u0", "min_combination", "min_resonant_combination", "min_coupling"],
                      [[r["u0"], r["min_combination"], r["min_resonant_combination"],
                        r["min_coupling"]] for r in scan.rows()])
    tol = p["coupling_tol"]
    result.add("perturbed_couplings", float(scan.min_coupling.min()), f"> {tol:g} on the grid",
               scan.min_coupling.min() > tol)
    result.add("perturbed_combinations", float(scan.min_combination.min()),
               f"> {tol:g} on the grid", scan.min_combination.min() > tol)

    def draw(ax):
        head, data = _read_csv(path)
        for i, name in enumerate(head[1:], start=1):
            ax.semilogy(data[:, 0], data[:, i], label=name)
        ax.set_xlabel("u0")
        ax.set_ylabel("margin")
        ax.legend()
    _plot(result, "nondegeneracy_scan.svg", draw)


# Lie audit --------------------------------------------------------------------

def _random_su(n: int, rng: np.random.Generator) -> np.ndarray:
    U = unitary_group.rvs(n, random_state=rng)
    return U / np.linalg.det(U) ** (1 / n)


def run_lie_audit(cfg: ScenarioConfig, result: ScenarioResult) -> None:
    p = cfg.params
    rows = []
    for n in p["sizes"]:
        full = GeneratorSet(n, tuple((a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)))
        r = lie_closure_rank(full, tol=p["rank_tol"])
        rows.append(["fully_coupled", n, len(full.pairs), r, n * n - 1])
        result.add(f"rank_fully_coupled_N{n}", r, f"== {n * n - 1}", r == n * n - 1)
    single = GeneratorSet(3, ((1, 2),))
    r = lie_closure_rank(single, tol=p["rank_tol"])
    rows.append(["single_pair", 3, 1, r, 8])
    result.add("rank_single_pair_N3", r, "< 8", r < 8)
    N = cfg.N
    M = _matrix(cfg).matrix
    mu = cfg.basis.eigenvalues
    adm = admissible_generators(M, mu)
    r = lie_closure_rank(adm, tol=p["rank_tol"])
    rows.append(["admissible", N, len(adm.pairs), r, N * N - 1])
    result.add(f"rank_admissible_N{N}", r, f"== {N * N - 1}", r == N * N - 1)
    _write_csv(result, "lie_ranks.csv", ["generator_set", "N", "pairs", "rank", "su_dimension"],
               rows)
    _write_csv(result, "admissible_pairs.csv", ["j", "k", "B_jk", "frequency"],
               [[a, b, float(M[a - 1, b - 1]), float(abs(mu[b - 1] - mu[a - 1]))]
                for a, b in adm.pairs])

    rng = np.random.default_rng(cfg.seed)
    nmax = min(int(p["target_max_N"]), N)
    rot_rows, worst, realized = [], 0.0, 0
    for i in range(int(p["n_targets"])):
        n = int(rng.integers(2, nmax + 1))
        U = _random_su(n, rng)
        plan = plan_rotations(U)
        err = plan.reconstruction_error(U)
        worst = max(worst, err)
        ph = realize_phase_residual(plan.residual, mu[:n], p["phase_t_max"], p["phase_tol"])
        realized += ph.realized
        rot_rows.append([i, n, len(plan.factors), err, int(ph.realized), ph.time, ph.error])
    _write_csv(result, "rotations.csv", ["target", "N", "factors", "reconstruction_error",
                                         "phase_realized", "drift_time", "phase_mismatch"],
               rot_rows)
    result.add("rotation_reconstruction", worst, f"<= {p['reconstruction_tol']:g}",
               worst <= p["reconstruction_tol"])
    result.info["phase_residuals_realized"] = f"{realized}/{int(p['n_targets'])}"


RUNNERS = {
    "assumption_audit": run_assumption_audit,
    "moment_control": run_moment_control,
    "energetic_transfer": run_energetic_transfer,
    "perturbation_scan": run_perturbation_scan,
    "lie_audit": run_lie_audit,
}


def audit_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Same graph, basis and operator with the assumption-audit kind."""
    if cfg.kind == "assumption_audit":
        return cfg
    return replace(cfg, kind="assumption_audit", params=dict(DEFAULTS["assumption_audit"]),
                   out_dir=cfg.out_dir / "audit")


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Run ``cfg`` and write its tables, plots and ``summary.json``.

    Raises
    ------
    ScenarioError
        Wrapping any downstream failure with the scenario name and kind.
    """
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    result = ScenarioResult(cfg)
    try:
        RUNNERS[cfg.kind](cfg, result)
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(f"scenario {cfg.name!r} ({cfg.kind}) failed: "
                            f"{type(exc).__name__}: {exc}") from exc
    result.files.append("summary.json")
    with open(cfg.out_dir / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return result


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")
