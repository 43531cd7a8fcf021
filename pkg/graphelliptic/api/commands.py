"""Command handlers behind the CLI. Each returns the text written to stdout."""
import csv
import io
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from graphelliptic.errors import ParseError
from graphelliptic.models.graph import DomainDecomp, load_domain
from graphelliptic.models.schemas import EigenReport, HypothesisReport, InfoReport, LambdaMpReport, ProblemDocument
from graphelliptic.services.higher_order import HigherOrderSpec, mp_energy_and_solve
from graphelliptic.services.solvers import find_all_solutions, lambda_sweep, solve_truncated, yamabe_solve
from graphelliptic.services.spectral import lambda1, lambda_mp
from graphelliptic.services.variational import ProblemSpec, verify_hypotheses
from graphelliptic.utils.logger import get_logger

logger = get_logger(__name__)

SWEEP_HEADER = ("lambda", "n_solutions", "min_energy", "lambda_star", "admissible")


def read_source(path: str) -> str:
    """File contents, or stdin when path is "-"."""
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e


def load_problem(path: str) -> ProblemDocument:
    try:
        return ProblemDocument.model_validate_json(read_source(path))
    except ValidationError as e:
        raise ParseError(f"malformed problem document: {e}") from e


def dump_report(report: BaseModel) -> str:
    return report.model_dump_json(by_alias=True, indent=2) + "\n"


def _domain(graph_path: str) -> DomainDecomp:
    return load_domain(read_source(graph_path))


def cmd_info(graph_path: str) -> str:
    dom = _domain(graph_path)
    graph = dom.graph
    report = InfoReport(
        vertices=len(graph.vertices),
        edges=graph.edge_count,
        domain_size=dom.size,
        boundary_size=len(dom.boundary),
        interior_size=len(dom.interior),
        volume=dom.volume,
        mu0=dom.mu0,
        connected=graph.is_connected(),
        explicit_boundary=dom.explicit_boundary,
    )
    return dump_report(report)


def cmd_lambda1(graph_path: str) -> str:
    result = lambda1(_domain(graph_path))
    report = EigenReport(
        lambda1=result.lambda1,
        residual=result.residual,
        eigenfunction=result.eigenfunction.as_dict(),
    )
    return dump_report(report)


def cmd_lambda_mp(graph_path: str, m: int, p: float, seed: Optional[int] = None) -> str:
    result = lambda_mp(_domain(graph_path), m, p, seed=seed)
    report = LambdaMpReport(
        m=result.m,
        p=result.p,
        value=result.value,
        certificate=result.certificate.as_dict(),
        converged=result.converged,
        heuristic=result.heuristic,
    )
    return dump_report(report)


def cmd_solve(
    graph_path: str,
    problem_path: Optional[str],
    seed: int = 0,
    budget: Optional[int] = None,
    mode: str = "deflate",
    truncate: bool = False,
    yamabe: Optional[Tuple[float, float]] = None,
    rho: Optional[float] = None,
) -> str:
    dom = _domain(graph_path)
    if yamabe is not None:
        gamma, p = yamabe
        report = yamabe_solve(dom, gamma, p, budget=budget, seed=seed)
        return dump_report(report.to_model())

    if problem_path is None:
        raise ParseError("a problem document is required unless --yamabe is given")
    doc = load_problem(problem_path)
    if doc.order is not None:
        report = mp_energy_and_solve(HigherOrderSpec.from_document(dom, doc), budget=budget, seed=seed, rho=rho)
    elif truncate:
        report = solve_truncated(ProblemSpec.from_document(dom, doc), budget=budget, seed=seed)
    else:
        report = find_all_solutions(ProblemSpec.from_document(dom, doc), budget=budget, seed=seed, rho=rho, mode=mode)
    logger.info("Found %d solutions", len(report.solutions))
    return dump_report(report.to_model())


def parse_grid(text: str) -> List[float]:
    """"a:b:n" -> n evenly spaced lambdas from a to b."""
    try:
        a, b, n = text.split(":")
        start, stop, count = float(a), float(b), int(n)
    except ValueError as e:
        raise ParseError(f"lambda grid must look like a:b:n, got {text!r}") from e
    if count < 1 or not start > 0.0 or stop < start or (count > 1 and stop == start):
        raise ParseError(f"lambda grid needs 0 < a < b and n >= 1, got {text!r}")
    return [start] if count == 1 else [float(x) for x in np.linspace(start, stop, count)]


def _cell(value: Optional[float]) -> str:
    if value is None:
        return ""
    return "inf" if np.isinf(value) else repr(float(value))


def cmd_sweep(graph_path: str, problem_path: str, grid: str, seed: int = 0, budget: Optional[int] = None,
              rho: Optional[float] = None) -> str:
    spec = ProblemSpec.from_document(_domain(graph_path), load_problem(problem_path))
    rows = lambda_sweep(spec, parse_grid(grid), budget=budget, seed=seed, rho=rho)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([
            repr(row.lam),
            row.n_solutions,
            _cell(row.min_energy),
            _cell(row.lambda_star),
            "true" if row.admissible else "false",
        ])
    return out.getvalue()


def cmd_verify(graph_path: str, problem_path: str, rho: Optional[float] = None) -> str:
    spec = ProblemSpec.from_document(_domain(graph_path), load_problem(problem_path))
    report: HypothesisReport = verify_hypotheses(spec, rho=rho)
    return dump_report(report)
