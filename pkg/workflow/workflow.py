import json
import logging
import time
from pathlib import Path
from typing import Optional, TypedDict

import numpy as np
from langgraph.graph import END, START, StateGraph

from restricted_orbits.action import action_direct
from restricted_orbits.bounds import certify_noncollision, collision_lower_bound_d1
from restricted_orbits.config import lagrange_orbits, masses_new
from restricted_orbits.dynamics import el_residual, periodicity_error
from restricted_orbits.errors import (
    CollisionApproach,
    CollisionOnPath,
    ConfigError,
    NoConvergence,
    NotDescending,
    PointOnCurve,
    RestrictedOrbitsError,
    Undersampled,
)
from restricted_orbits.loops import (
    FourierLoop,
    min_separation,
    project_to_fourier,
    read_fourier_loop,
    sample_loop,
    write_fourier_loop,
)
from restricted_orbits.minimize import (
    PERIODICITY_THRESHOLD,
    RESIDUAL_THRESHOLD,
    certify_minimizer,
    minimize_with_refinement,
)
from restricted_orbits.run_config import RunConfig
from restricted_orbits.winding import relative_degree

logger = logging.getLogger("restricted_orbits.workflow")

# Grid used to project analytic test loops onto the Fourier basis
PROJECTION_POINTS = 256


class _MinimizeRunStateRequired(TypedDict):
    # Input
    config: RunConfig


class _MinimizeRunStateOptional(TypedDict, total=False):
    masses: object
    cfg: object
    init_loop: FourierLoop
    initial_degree: int
    result: object  # MinimizeResult
    certification: dict
    verdict: str  # "pass" | "fail"
    reasons: list
    report: dict
    written: list
    processing_start_time: float
    processing_time_ms: int


class MinimizeRunState(_MinimizeRunStateRequired, _MinimizeRunStateOptional):
    pass


class VerifyRunState(TypedDict, total=False):
    # Input
    loop_path: str
    masses: object
    T: float
    report_path: Optional[str]
    expected_degree: Optional[int]
    step_tol: float

    # Filled in by the nodes
    loop: FourierLoop
    cfg: object
    verdict: str
    reasons: list
    report: dict
    written: list


# ============================================================================
# MINIMIZE PIPELINE NODES
# ============================================================================

def validate_config(state: MinimizeRunState) -> dict:
    """Resolve the run configuration and build the primaries."""
    logger.info("📥 [validate_config] Validating run configuration...")
    start_time = time.perf_counter()

    config = state["config"]
    masses = masses_new(config.masses.m1, config.masses.m2, config.masses.m3)
    cfg = lagrange_orbits(masses, config.T)
    try:
        config.options.floor_for(cfg)
    except ValueError as e:
        raise ConfigError(f"options.collision_floor: {e}") from e

    logger.info("✅ [validate_config] masses (%g, %g, %g), T=%g, l=%.6f",
                masses.m1, masses.m2, masses.m3, cfg.T, cfg.l)
    return {"config": config, "masses": masses, "cfg": cfg, "processing_start_time": start_time}


def build_initial_loop(state: MinimizeRunState) -> dict:
    """Project the configured test loop onto K odd harmonics, or load a Fourier file."""
    config, cfg = state["config"], state["cfg"]
    loop_cfg = config.loop
    K = config.options.K
    logger.info("🔧 [build_initial_loop] %s loop, K=%d", loop_cfg.kind, K)

    if loop_cfg.kind == "fourier":
        loop = read_fourier_loop(loop_cfg.path)
        if abs(loop.T - cfg.T) > 1e-12 * cfg.T:
            raise ConfigError(f"loop.path: loop period {loop.T} differs from T = {cfg.T}")
        loop = loop.with_harmonics(K)
    else:
        loop = project_to_fourier(loop_cfg.params(), K, max(PROJECTION_POINTS, 4 * K), cfg)

    try:
        degree = relative_degree(loop, cfg, 1).degree
    except (PointOnCurve, Undersampled) as e:
        raise CollisionOnPath(f"Initial loop passes through primary 1: {e}") from e

    logger.info("✅ [build_initial_loop] deg(q − q1) = %d", degree)
    return {"init_loop": loop, "initial_degree": degree}


def minimize_loop(state: MinimizeRunState) -> dict:
    """Run the descent; numerical failures become a failed verdict, not an exception."""
    config = state["config"]
    logger.info("🔍 [minimize_loop] Minimizing the action...")
    try:
        result = minimize_with_refinement(state["init_loop"], state["masses"], state["cfg"], config.options)
        return {"result": result, "reasons": []}
    except CollisionApproach as e:
        logger.warning("❌ [minimize_loop] %s", e)
        return {"result": e.result, "reasons": [f"CollisionApproach: {e}"]}
    except (NotDescending, NoConvergence, CollisionOnPath) as e:
        logger.warning("❌ [minimize_loop] %s", e)
        return {"result": None, "reasons": [f"{type(e).__name__}: {e}"]}


def route_after_minimize(state: MinimizeRunState) -> str:
    """Converged runs go on to certification, everything else is recorded as failed."""
    result = state.get("result")
    if result is not None and result.converged and not state.get("reasons"):
        logger.info("🔀 [router] converged → certify_loop")
        return "certify_loop"
    logger.info("🔀 [router] not converged → record_failure")
    return "record_failure"


def certify_loop(state: MinimizeRunState) -> dict:
    config = state["config"]
    report = certify_minimizer(
        state["result"], state["masses"], state["cfg"],
        expected_degree=state["initial_degree"], step_tol=config.step_tol,
    )
    verdict = "pass" if report.passes else "fail"
    logger.info("%s [certify_loop] verdict %s", "✅" if report.passes else "❌", verdict)
    return {"certification": report.model_dump(), "verdict": verdict, "reasons": list(report.reasons)}


def record_failure(state: MinimizeRunState) -> dict:
    reasons = list(state.get("reasons") or [])
    result = state.get("result")
    if result is not None and not result.converged:
        reasons.append(
            f"not converged after {result.iterations} iterations (max gradient {result.grad_norm:.3e})"
        )
    if not reasons:
        reasons.append("minimization produced no result")
    logger.info("❌ [record_failure] %s", "; ".join(reasons))
    return {"verdict": "fail", "reasons": reasons}


def _minimize_report(state: MinimizeRunState) -> dict:
    config = state["config"]
    result = state.get("result")
    d1 = collision_lower_bound_d1(state["masses"], state["cfg"].T).d1
    report = {
        "verdict": state["verdict"],
        "reasons": state.get("reasons", []),
        "masses": [config.masses.m1, config.masses.m2, config.masses.m3],
        "T": config.T,
        "l": state["cfg"].l,
        "loop": config.loop.model_dump(),
        "initial_degree": state.get("initial_degree"),
        "d1": d1,
        "options": config.options.model_dump(),
        "thresholds": {"residual": RESIDUAL_THRESHOLD, "periodicity": PERIODICITY_THRESHOLD},
    }
    if result is not None:
        report.update({
            "action": result.action,
            "margin": d1 - result.action,
            "K": result.loop.K,
            "iterations": result.iterations,
            "grad_norm": result.grad_norm,
            "converged": result.converged,
            "min_separations": list(result.min_separations),
            "collision_floor": result.collision_floor,
        })
    if state.get("certification"):
        cert = state["certification"]
        for key in ("degree", "l2_residual", "max_residual", "periodicity_error", "margin"):
            report[key] = cert[key]
    return report


def write_outputs(state: MinimizeRunState) -> dict:
    """Write the JSON report, the loop (JSON + sampled CSV) and the iteration log."""
    config = state["config"]
    outputs = config.outputs
    Path(outputs.directory).mkdir(parents=True, exist_ok=True)
    report = _minimize_report(state)
    written = []

    result = state.get("result")
    if result is not None:
        write_fourier_loop(result.loop, outputs.path("loop"))
        written.append(str(outputs.path("loop")))
        if outputs.samples:
            sample_loop(result.loop, None, outputs.sample_points).to_csv(outputs.path("samples"))
            written.append(str(outputs.path("samples")))
        if outputs.iterations:
            result.write_history(outputs.path("iterations"))
            written.append(str(outputs.path("iterations")))

    outputs.path("report").write_text(json.dumps(report, indent=2) + "\n")
    written.append(str(outputs.path("report")))

    start_time = state.get("processing_start_time")
    processing_time_ms = int((time.perf_counter() - start_time) * 1000) if start_time else 0
    logger.info("💾 [write_outputs] %s (%d ms)", ", ".join(written), processing_time_ms)
    return {"report": report, "written": written, "processing_time_ms": processing_time_ms}


# ============================================================================
# VERIFY PIPELINE NODES
# ============================================================================

def load_loop(state: VerifyRunState) -> dict:
    logger.info("📥 [load_loop] Reading %s", state["loop_path"])
    loop = read_fourier_loop(state["loop_path"])
    masses = state["masses"]
    T = state.get("T", 1.0)
    if abs(loop.T - T) > 1e-12 * T:
        raise ConfigError(f"{state['loop_path']}: loop period {loop.T} differs from T = {T}")
    return {"loop": loop, "cfg": lagrange_orbits(masses, T)}


def verify_loop(state: VerifyRunState) -> dict:
    """Every certificate check on a fixed loop; failures are collected, never raised."""
    loop, masses, cfg = state["loop"], state["masses"], state["cfg"]
    expected = state.get("expected_degree")
    reasons = []
    report = {"K": loop.K, "T": loop.T, "masses": [masses.m1, masses.m2, masses.m3], "l": cfg.l}

    bound = collision_lower_bound_d1(masses, cfg.T)
    report["d1"] = bound.d1
    separations = min_separation(loop, cfg)
    report["min_separations"] = [float(s) for s in separations]

    try:
        action = action_direct(loop, masses, cfg).total
        certificate = certify_noncollision(action, bound)
        report.update({"action": action, "margin": certificate.margin})
        if not certificate.passes:
            reasons.append(f"action {action:.9f} is not below d1 = {bound.d1:.9f}")
    except (CollisionOnPath, NoConvergence) as e:
        reasons.append(f"{type(e).__name__}: {e}")

    try:
        degree = relative_degree(loop, cfg, 1).degree
    except (PointOnCurve, Undersampled) as e:
        degree = None
        reasons.append(f"deg(q − q1) undefined: {e}")
    report["degree"] = degree
    if degree is not None:
        if expected is not None and degree != expected:
            reasons.append(f"deg(q − q1) = {degree}, expected {expected}")
        elif expected is None and degree not in (-1, 1):
            reasons.append(f"deg(q − q1) = {degree} is not ±1")

    try:
        residual = el_residual(loop, masses, cfg)
        report.update({"l2_residual": residual.l2_residual, "max_residual": residual.max_residual})
        if residual.l2_residual > RESIDUAL_THRESHOLD:
            reasons.append(f"Euler–Lagrange residual {residual.l2_residual:.3e} above {RESIDUAL_THRESHOLD:.0e}")
    except CollisionOnPath as e:
        reasons.append(f"CollisionOnPath: {e}")

    try:
        error = periodicity_error(cfg, masses, loop, state.get("step_tol", 1e-10))
        report["periodicity_error"] = error
        if error > PERIODICITY_THRESHOLD:
            reasons.append(f"periodicity error {error:.3e} above {PERIODICITY_THRESHOLD:.0e}")
    except (RestrictedOrbitsError, FloatingPointError) as e:
        reasons.append(f"{type(e).__name__}: {e}")

    if not np.all(np.isfinite(separations)):
        reasons.append("non-finite separations")

    verdict = "pass" if not reasons else "fail"
    report.update({"verdict": verdict, "reasons": reasons})
    logger.info("%s [verify_loop] verdict %s", "✅" if verdict == "pass" else "❌", verdict)
    return {"verdict": verdict, "reasons": reasons, "report": report}


def write_verify_outputs(state: VerifyRunState) -> dict:
    path = state.get("report_path")
    if not path:
        return {"written": []}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(state["report"], indent=2) + "\n")
    logger.info("💾 [write_outputs] %s", path)
    return {"written": [str(path)]}


# ============================================================================
# GRAPHS
# ============================================================================

def build_minimize_workflow():
    """
    Build and compile the minimize pipeline.

    Flow:
    START -> validate_config -> build_initial_loop -> minimize_loop -> [ROUTER]
          -> certify_loop | record_failure -> write_outputs -> END
    """
    workflow = StateGraph(MinimizeRunState)

    workflow.add_node("validate_config", validate_config)
    workflow.add_node("build_initial_loop", build_initial_loop)
    workflow.add_node("minimize_loop", minimize_loop)
    workflow.add_node("certify_loop", certify_loop)
    workflow.add_node("record_failure", record_failure)
    workflow.add_node("write_outputs", write_outputs)

    workflow.add_edge(START, "validate_config")
    workflow.add_edge("validate_config", "build_initial_loop")
    workflow.add_edge("build_initial_loop", "minimize_loop")
    workflow.add_conditional_edges(
        "minimize_loop",
        route_after_minimize,
        {"certify_loop": "certify_loop", "record_failure": "record_failure"},
    )
    workflow.add_edge("certify_loop", "write_outputs")
    workflow.add_edge("record_failure", "write_outputs")
    workflow.add_edge("write_outputs", END)

    return workflow.compile()


def build_verify_workflow():
    """START -> load_loop -> verify_loop -> write_outputs -> END"""
    workflow = StateGraph(VerifyRunState)

    workflow.add_node("load_loop", load_loop)
    workflow.add_node("verify_loop", verify_loop)
    workflow.add_node("write_outputs", write_verify_outputs)

    workflow.add_edge(START, "load_loop")
    workflow.add_edge("load_loop", "verify_loop")
    workflow.add_edge("verify_loop", "write_outputs")
    workflow.add_edge("write_outputs", END)

    return workflow.compile()
