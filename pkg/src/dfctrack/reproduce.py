"""End-to-end case-study run: designs, baseline, scenarios, table and checks."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import casestudy as cs
from .analysis import (baseline_controller, comparison_table, design_baseline, predict,
                       predict_d1, signal_limit, simulated_verdict, table_signal, REJECT_TOL)
from .config import controller_to_dict
from .core import ClosedLoopDDE, DelayedFeedbackController, Plant, build_closed_loop
from .simulator import simulate, simulate_from, steady_state_error
from .spectrum import NewtonDivergence, newton_refine, rightmost_roots
from .tuner import anneal, case_study_spec, minimize


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def write_atomic(path: str | Path, text: str) -> Path:
    """Replace ``path`` in one step so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def baseline_gain(plant: Plant = cs.PLANT) -> np.ndarray:
    return design_baseline(plant, cs.DOMINANT_ROOTS)


def _settled_zero(traj) -> tuple[bool, np.ndarray | None]:
    ss = steady_state_error(traj)
    ok = ss.settled and bool(np.max(np.abs(ss.error)) < REJECT_TOL)
    return ok, ss.error


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def check_open_loop() -> Check:
    ev = np.sort(np.linalg.eigvals(cs.PLANT.A).real)
    err = float(np.max(np.abs(ev - np.array(cs.OPEN_LOOP_EIGENVALUES))))
    return Check("1 open-loop eigenvalues", err <= 1e-12, f"eig(A)={ev.tolist()}, error {err:.1e}")


def check_design1_spectrum() -> Check:
    cl = build_closed_loop(cs.PLANT, cs.DESIGN_1)
    res = rightmost_roots(cl)
    parts = [f"abscissa {res.abscissa:.4f}"]
    ok = res.abscissa < -1 and abs(res.abscissa + 1.36) <= 0.15
    for seed in (cs.DOMINANT_ROOTS[0], cs.DOMINANT_ROOTS[2]):
        try:
            root, _ = newton_refine(cl, seed)
            dist = abs(root - seed)
            parts.append(f"seed {seed:.4f} -> {root:.4f} (dist {dist:.3f})")
            ok = ok and dist <= 0.05
        except NewtonDivergence as exc:
            parts.append(f"seed {seed:.4f} diverged (last {exc.last:.4f})")
            ok = False
    return Check("2 design-1 spectrum", ok, "; ".join(parts))


def run_sensor(gain):
    base = baseline_controller(cs.PLANT, gain)
    signals = dict(r=cs.reference_step(), d1=cs.d1_step_ramp())
    prop = simulate(build_closed_loop(cs.PLANT, cs.DESIGN_1), cs.DESIGN_1, **signals)
    conv = simulate(build_closed_loop(cs.PLANT, base), base, **signals)
    return prop, conv, base


def check_sensor(prop, conv, base) -> Check:
    ok_p, e_p = _settled_zero(prop)
    ss = steady_state_error(conv)
    pred = signal_limit(cs.PLANT, base, "d1", cs.d1_step_ramp())
    ok_c = ss.settled and pred is not None and np.max(np.abs(pred)) > REJECT_TOL and _rel(ss.error, pred) <= 1e-3
    return Check("3 design-1 d1 rejection", ok_p and ok_c,
                 f"proposed e={e_p}, baseline e={ss.error} vs predicted {pred}")


def run_combined(gain):
    base = baseline_controller(cs.PLANT, gain)
    signals = dict(r=cs.reference_step(), d1=cs.d1_parabola(), d2=cs.d2_step_ramp())
    prop = simulate(build_closed_loop(cs.PLANT, cs.DESIGN_2), cs.DESIGN_2, **signals)
    conv = simulate(build_closed_loop(cs.PLANT, base), base, **signals)
    return prop, conv


def check_combined(prop, conv) -> Check:
    ok_p, e_p = _settled_zero(prop)
    ok_c, e_c = _settled_zero(conv)
    return Check("4 design-2 simultaneous rejection", ok_p and not ok_c,
                 f"proposed e={e_p}, baseline settled-to-zero={ok_c} (e={e_c})")


def run_ramp(gain):
    base = baseline_controller(cs.PLANT, gain)
    signals = dict(r=cs.reference_step_ramp(), d1=cs.d1_parabola(), d2=cs.d2_step_ramp())
    prop = simulate(build_closed_loop(cs.PLANT, cs.DESIGN_2), cs.DESIGN_2, **signals)
    conv = simulate(build_closed_loop(cs.PLANT, base), base, **signals)
    return prop, conv


def perturbed_ramp_case(product: float = -0.9):
    """K2 tau_q moved off -1, under a step plus unit-slope ramp reference."""
    ctrl = cs.with_k2_tau_q(cs.DESIGN_2, product)
    ref = cs.reference_step() + cs.Signal.ramp([1.0], 35.0, 1.0)
    report = predict(cs.PLANT, ctrl)
    pred = signal_limit(cs.PLANT, ctrl, "r", ref)
    traj = simulate(build_closed_loop(cs.PLANT, ctrl), ctrl, r=ref)
    return ctrl, report, pred, traj


def check_ramp(prop, perturbed) -> Check:
    ok_p, e_p = _settled_zero(prop)
    _, report, pred, traj = perturbed
    ss = steady_state_error(traj)
    flipped = (not report.ramp_reference_tracked and pred is not None
               and ss.settled and np.max(np.abs(ss.error)) >= REJECT_TOL and _rel(ss.error, pred) <= 1e-3)
    return Check("5 ramp tracking", ok_p and flipped,
                 f"design-2 e={e_p}; K2*tau_q=-0.9: predicted {pred}, simulated {ss.error}")


EXPECTED_TABLE = {
    "proposed": {"d1": (True, True, True), "d2": (True, True, False), "tracking": (True, True, False)},
    "conventional": {"d1": (True, False, False), "d2": (True, False, False), "tracking": (True, False, False)},
}


def check_table(table) -> Check:
    mismatches = []
    for method, rows in EXPECTED_TABLE.items():
        for cat, expected in rows.items():
            for order, want in zip((1, 2, 3), expected):
                cell = table.cell(method, cat, order)
                if cell.conflict or cell.predicted != want:
                    mismatches.append(f"{method}/{cat}/{order}:{cell.label}")
    report = predict(cs.PLANT, cs.DESIGN_2)
    cubic_pred = report.rejected("d1", 4)
    cubic_sim, _ = simulated_verdict(cs.PLANT, cs.DESIGN_2, table_signal("d1", 4, cs.PLANT))
    ok = not mismatches and not cubic_pred and not cubic_sim
    detail = "all 18 cells match" if not mismatches else "mismatch " + ", ".join(mismatches)
    return Check("6 comparison table", ok, f"{detail}; cubic d1 rejected: predicted={cubic_pred}, simulated={cubic_sim}")


def check_spectrum_validation(seed: int = 7) -> Check:
    scalar = ClosedLoopDDE([[0.0]], [[1.0]], [[0.0]], [[0.0]], (1, -1), 1.0, 0.0, 1, 0)
    res = rightmost_roots(scalar, 4)
    target = complex(-0.3181, 1.3372)
    err_scalar = min(abs(v - target) for v in res.values)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 6))
        A0 = rng.standard_normal((d, d))
        cl = ClosedLoopDDE(A0, np.zeros((d, d)), np.zeros((d, d)), np.zeros((d, 1)), (1,), 1.0, 0.0, d, 0)
        got = rightmost_roots(cl, d).values
        ref = np.linalg.eigvals(A0)
        worst = max(worst, max(np.min(np.abs(ref - z)) for z in got))
    resid = max(float(rightmost_roots(build_closed_loop(cs.PLANT, c)).residuals.max())
                for c in (cs.DESIGN_1, cs.DESIGN_2))
    ok = err_scalar <= 1e-4 and worst <= 1e-9 and resid <= 1e-8 and res.residuals.max() <= 1e-8
    return Check("7 spectrum validation", ok,
                 f"scalar root error {err_scalar:.1e}, delay-free mismatch {worst:.1e}, max residual {resid:.1e}")


def integrator_error(step: float) -> float:
    plant = Plant([[-1.0, 2.0], [-2.0, -1.0]], [[1.0], [0.0]], [[1.0, 0.0]])
    ctrl = DelayedFeedbackController([[0.5, 0.0]], [[0.0]], [[0.0]], tau=1.0, tau_q=0.0, p=0)
    cl = build_closed_loop(plant, ctrl)
    g0 = np.array([1.0, -0.5, 0.0])
    traj = simulate_from(cl, ctrl, g0, horizon=5.0, step=step)
    exact = np.array([expm(cl.A0 * t) @ g0 for t in traj.times])
    return float(np.max(np.abs(np.column_stack([traj.x, traj.q]) - exact)))


def check_integrator_order() -> Check:
    ratio = integrator_error(0.1) / integrator_error(0.05)
    return Check("8 integrator order", 12 <= ratio <= 20, f"step-halving error ratio {ratio:.2f}")


def tune_case_study(seed: int = 0):
    template = DelayedFeedbackController([[0.0, 0.0]], [[0.0]], [[0.0]], tau=1.0, tau_q=0.0, p=1)
    return anneal(case_study_spec(seed=seed, max_iterations=5000), cs.PLANT, template)


def check_tuning(seed: int = 0) -> tuple[Check, object]:
    _, trace = tune_case_study(seed)
    _, again = tune_case_study(seed)
    same = trace.to_csv() == again.to_csv()
    target = np.array([1.5, -2.0, 0.25])
    quad = minimize(lambda x: float(np.sum((x - target) ** 2)), np.zeros(3), [(-5.0, 5.0)] * 3,
                    max_iterations=2000, seed=seed)
    qerr = float(np.max(np.abs(quad.best_parameters - target)))
    ok = trace.reached_threshold and trace.final_abscissa < cs.THRESHOLD and len(trace.costs) <= 5000 \
        and same and qerr < 0.1
    return Check("9 annealing", ok,
                 f"abscissa {trace.final_abscissa:.4f} after {len(trace.costs)} iterations, "
                 f"rerun identical={same}, quadratic error {qerr:.3f}"), trace


def reproduce(out_dir: str | Path, plots: bool = True, log=print) -> list[Check]:
    out = Path(out_dir)
    gain = baseline_gain()
    checks = [check_open_loop(), check_design1_spectrum()]

    for name, ctrl in (("design1", cs.DESIGN_1), ("design2", cs.DESIGN_2),
                       ("baseline", baseline_controller(cs.PLANT, gain))):
        res = rightmost_roots(build_closed_loop(cs.PLANT, ctrl))
        write_atomic(out / f"roots_{name}.csv", res.to_csv())
        if plots:
            from .plotting import root_plot
            root_plot(res, out / f"roots_{name}.svg", marks=cs.DOMINANT_ROOTS, title=name)

    prop4, conv4, base = run_sensor(gain)
    checks.append(check_sensor(prop4, conv4, base))
    prop7, conv7 = run_combined(gain)
    checks.append(check_combined(prop7, conv7))
    prop8, conv8 = run_ramp(gain)
    perturbed = perturbed_ramp_case()
    checks.append(check_ramp(prop8, perturbed))

    runs = {"sensor_proposed": prop4, "sensor_conventional": conv4, "combined_proposed": prop7,
            "combined_conventional": conv7, "ramp_proposed": prop8, "ramp_conventional": conv8,
            "ramp_perturbed": perturbed[3]}
    for name, traj in runs.items():
        write_atomic(out / f"trajectory_{name}.csv", traj.to_csv())

    table = comparison_table(cs.PLANT, cs.DESIGN_2, gain)
    write_atomic(out / "table.csv", table.to_csv())
    write_atomic(out / "table.txt", table.to_text())
    log(table.to_text())
    checks.append(check_table(table))

    tq = cs.DESIGN_2.replace(tau_q=0.30)
    flipped = not predict(cs.PLANT, tq).ramp_reference_tracked
    sim_flip, _ = simulated_verdict(cs.PLANT, tq, table_signal("tracking", 2, cs.PLANT))
    checks.append(Check("tau_q=0.30 ramp-tracking flip", flipped and not sim_flip,
                        f"predicted tracked={not flipped}, simulated tracked={sim_flip}"))

    checks.append(check_spectrum_validation())
    checks.append(check_integrator_order())
    tune_check, trace = check_tuning()
    checks.append(tune_check)
    write_atomic(out / "tune_trace.csv", trace.to_csv())
    write_atomic(out / "designs.json", json.dumps(
        {"design1": controller_to_dict(cs.DESIGN_1), "design2": controller_to_dict(cs.DESIGN_2),
         "baseline_gain": gain.tolist()}, indent=2) + "\n")

    if plots:
        from .plotting import compare_outputs, trace_plot, trajectory_plots
        for fig, pair in (("sensor", (prop4, conv4)), ("combined", (prop7, conv7)), ("ramp", (prop8, conv8))):
            named = {"proposed": pair[0], "conventional": pair[1]}
            compare_outputs(named, out / f"{fig}_output.svg", "y", "output")
            compare_outputs(named, out / f"{fig}_error.svg", "e", "tracking error")
            trajectory_plots(pair[0], out, stem=f"{fig}_proposed")
        trace_plot(trace, out / "tune_trace.svg", threshold=cs.THRESHOLD)

    summary = "\n".join(c.line() for c in checks) + "\n"
    write_atomic(out / "summary.txt", summary)
    for c in checks:
        log(c.line())
    return checks
