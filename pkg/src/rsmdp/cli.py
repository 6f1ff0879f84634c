"""Command-line surface: validate, solve, sweep, scan, and verify models.

Exit codes: 0 success, 1 model validation failure, 2 assertion or
verdict failure, 3 I/O or parse error.  Every subcommand prints a plain
table; ``--csv PATH`` additionally writes a machine-readable file with
17-significant-digit decimals, UTF-8, LF line endings, and byte-stable
output for identical inputs.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .average import default_beta_grid, growth_rate, solve_average
from .bellman import SolverConvergenceError, solve_discounted, solve_untruncated
from .diagnostics import condition_b_scan, example1_report
from .game import discounted_game_cost, opponent_tilt, random_tilted_opponent
from .model import (
    FiniteMDP,
    ModelFormatError,
    ModelValidationError,
    load_model,
    sample_stationary_policies,
    validate_model,
)

OK, VALIDATION_FAILURE, VERDICT_FAILURE, IO_FAILURE = 0, 1, 2, 3

RESIDUAL_GATE = 1e-8  # optimality-inequality pass threshold for solve-average


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _read_model(path: str) -> FiniteMDP:
    return load_model(Path(path).read_text(encoding="utf-8"))


def _parse_beta_grid(spec: str | None) -> np.ndarray:
    if spec is None:
        return default_beta_grid()
    try:
        start_s, count_s = spec.split(":")
        return default_beta_grid(float(start_s), int(count_s))
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(
            f"--beta-grid expects START:COUNT, got {spec!r}"
        ) from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    text = Path(args.model).read_text(encoding="utf-8")
    try:
        model = load_model(text)
    except ModelValidationError as exc:
        print(f"invalid model ({len(exc.report.violations)} violation(s)):")
        rows = []
        for v in exc.report.violations:
            print(f"  - {v}")
            rows.append([v.state if v.state is not None else "",
                         v.action if v.action is not None else "", v.message])
        if args.csv:
            _write_csv(args.csv, ["state", "action", "message"], rows)
        return VALIDATION_FAILURE
    print(f"model valid: {model.n_states} states, "
          f"{model.n_state_action_pairs} state-action pairs, label={model.label!r}")
    if args.csv:
        _write_csv(args.csv, ["state", "action", "message"], [])
    return OK


def _cmd_solve_discounted(args) -> int:
    model = _read_model(args.model)
    try:
        sol = solve_discounted(
            model, args.beta, args.gamma, args.truncate, tol=args.tol
        )
    except SolverConvergenceError as exc:
        print(f"solver did not converge: {exc}")
        return VERDICT_FAILURE
    print(f"beta={args.beta:g} gamma={args.gamma:g} "
          f"truncation={args.truncate if args.truncate is not None else 'none'} "
          f"iterations={sol.iterations} residual={sol.residual:.3e}"
          + (" [near-1 conditioning warning]" if sol.ill_conditioned else ""))
    print(f"{'state':>6} {'value':>24} {'action':>7}")
    rows = []
    for x in range(model.n_states):
        v = float(sol.value.values[x])
        a = sol.policy.choice[x]
        print(f"{x:>6} {v:>24.16g} {a:>7}")
        rows.append([x, v, a])
    if args.csv:
        _write_csv(args.csv, ["state", "value", "action"], rows)
    return OK


def _cmd_solve_average(args) -> int:
    model = _read_model(args.model)
    betas = _parse_beta_grid(args.beta_grid)
    sol = solve_average(
        model, args.gamma, betas=betas, tol=args.tol, tail=args.tail,
        refine=not args.no_refine,
    )
    print(f"l_hat={sol.l_hat:.17g}  (grid diagnostic {sol.diagnostic:.3e}, "
          f"optimal average cost l_hat/gamma={sol.l_hat / args.gamma:.17g})")
    print(f"h refined by undiscounted polish: {sol.refined}")
    print(f"{'state':>6} {'h':>24} {'residual':>14} {'action':>7}")
    for x in range(model.n_states):
        print(f"{x:>6} {sol.h[x]:>24.16g} {sol.inequality_residual[x]:>14.3e} "
              f"{sol.policy.choice[x]:>7}")
    ok = bool(np.all(sol.inequality_residual >= -RESIDUAL_GATE))
    print("optimality inequality:", "satisfied" if ok else
          f"violated (min residual {sol.inequality_residual.min():.3e})")
    if args.csv:
        rows = []
        for e in sol.sweep.successful():
            for x in range(model.n_states):
                rows.append([
                    e.beta, x, float(e.value.values[x]), float(e.h_beta[x]),
                    e.scaled, sol.l_hat, float(sol.h[x]),
                    float(sol.inequality_residual[x]),
                ])
        _write_csv(
            args.csv,
            ["beta", "state", "V_beta", "h_beta", "scaled_m", "l_hat", "h", "residual"],
            rows,
        )
    return OK if ok else VERDICT_FAILURE


def _cmd_check_b(args) -> int:
    model = _read_model(args.model)
    betas = _parse_beta_grid(args.beta_grid)
    report = condition_b_scan(
        model, args.gamma, betas=betas, eta=args.eta, tol=args.tol,
        rng=np.random.default_rng(args.seed),
    )
    print(f"verdict: {report.verdict} "
          f"(grid of {len(report.betas)} discount factors; grid-level evidence only)")
    print(f"{'state':>6} {'sup h_beta':>18} {'bound':>18} {'growing':>8}")
    for x in range(model.n_states):
        print(f"{x:>6} {report.sup_h[x]:>18.10g} {report.lemma4_bound[x]:>18.10g} "
              f"{str(bool(report.trend[x])):>8}")
    if args.csv:
        rows = []
        good_betas = [b for b, h in zip(report.betas, report.h_by_beta)]
        for i, beta in enumerate(good_betas):
            for x in range(model.n_states):
                rows.append([
                    beta, x, float(report.h_by_beta[i, x]),
                    float(report.bounds_by_beta[i, x]), report.verdict,
                ])
        _write_csv(args.csv, ["beta", "state", "h_beta", "bound", "verdict"], rows)
    return OK if report.verdict == "holds-on-grid" else VERDICT_FAILURE


def _cmd_verify_game(args) -> int:
    model = _read_model(args.model)
    try:
        sol = solve_untruncated(model, args.beta, args.gamma, tol=args.tol)
    except SolverConvergenceError as exc:
        print(f"solver did not converge: {exc}")
        return VERDICT_FAILURE
    w = sol.value.values
    tilted = opponent_tilt(model, w, args.beta)
    saddle = discounted_game_cost(
        model, sol.policy, tilted, args.beta, args.gamma, tol=args.tol
    )
    saddle_gap = float(np.abs(saddle - w).max())
    rng = np.random.default_rng(args.seed)
    worst_opponent = -math.inf
    for _ in range(args.samples):
        p = random_tilted_opponent(model, rng)
        val = discounted_game_cost(model, sol.policy, p, args.beta, args.gamma,
                                   tol=args.tol)
        worst_opponent = max(worst_opponent, float((val - w).max()))
    worst_controller = math.inf
    for policy in sample_stationary_policies(model, args.samples, rng):
        val = discounted_game_cost(model, policy, tilted, args.beta, args.gamma,
                                   tol=args.tol)
        worst_controller = min(worst_controller, float((val - w).min()))
    gate = args.gate
    checks = [
        ("saddle value matches solution", saddle_gap <= gate, saddle_gap),
        ("no sampled opponent beats the saddle", worst_opponent <= gate,
         worst_opponent),
        ("no sampled controller undercuts the saddle", worst_controller >= -gate,
         worst_controller),
    ]
    rows = []
    all_ok = True
    for name, ok, value in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name} ({value:.3e})")
        rows.append([name, value, "pass" if ok else "fail"])
        all_ok &= ok
    if args.csv:
        _write_csv(args.csv, ["check", "value", "status"], rows)
    return OK if all_ok else VERDICT_FAILURE


def _cmd_example1(args) -> int:
    betas = _parse_beta_grid(args.beta_grid)
    report = example1_report(args.rho, args.gamma, betas=betas, tol=args.tol)
    print(f"rho={args.rho:g} gamma={args.gamma:g} -> regime {report.regime} "
          f"(boundary {report.boundary:.12g})")
    kind = {"upper": "closed-form ceiling", "lower": "closed-form floor",
            "none": "no per-beta closed form"}[report.bound_kind]
    print(f"{'beta':>12} {'V_beta(1)':>20} {kind:>22} {'ok':>4}")
    rows = []
    for r in report.rows:
        print(f"{r.beta:>12.8g} {r.v1:>20.12g} {r.bound:>22.12g} "
              f"{'yes' if r.ok else 'NO':>4}")
        rows.append([r.beta, r.v1, r.bound, "pass" if r.ok else "fail"])
    print(f"relative-value boundedness: {report.verdict} "
          f"(expected {report.verdict_expected}) "
          f"{'ok' if report.verdict_ok else 'MISMATCH'}")
    print(f"growth rate at horizon {report.growth_horizon}: "
          f"state0={report.growth[0]:.6g} state1={report.growth[1]:.6g} "
          f"(theory state1={report.theory_j1:.6g}, tol {report.growth_tol:.2e}) "
          f"{'ok' if report.growth_ok else 'MISMATCH'}")
    print("overall:", "PASS" if report.all_ok else "FAIL")
    if args.csv:
        rows.append(["verdict", report.verdict, "pass" if report.verdict_ok else "fail"])
        rows.append(["growth_state1", float(report.growth[1]),
                     "pass" if report.growth_ok else "fail"])
        _write_csv(args.csv, ["beta", "V_beta_1", "bound", "status"], rows)
    return OK if report.all_ok else VERDICT_FAILURE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsmdp",
        description="Risk-sensitive average-cost solver toolkit for finite models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, grid=True):
        p.add_argument("--tol", type=float, default=1e-10, help="solver tolerance")
        p.add_argument("--csv", help="also write machine-readable CSV to this path")
        if grid:
            p.add_argument("--beta-grid", default=None, metavar="START:COUNT",
                           help="geometric grid 1-(1-START)/2^k, k<COUNT "
                                "(default 0.9:13)")

    p = sub.add_parser("validate", help="check a model file against the invariants")
    p.add_argument("model")
    p.add_argument("--csv", help="also write machine-readable CSV to this path")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("solve-discounted", help="solve one discounted equation")
    p.add_argument("model")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--truncate", type=int, default=None, metavar="N",
                   help="truncate costs at N (default: no truncation)")
    add_common(p, grid=False)
    p.set_defaults(func=_cmd_solve_discounted)

    p = sub.add_parser("solve-average",
                       help="vanishing-discount sweep and optimality inequality")
    p.add_argument("model")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--tail", type=int, default=4,
                   help="tail window for the relative value (default 4)")
    p.add_argument("--no-refine", action="store_true",
                   help="skip the undiscounted polish of the relative value")
    add_common(p)
    p.set_defaults(func=_cmd_solve_average)

    p = sub.add_parser("check-b", help="scan boundedness of the relative values")
    p.add_argument("model")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.0,
                   help="slack defining the near-minimum state set (default 0)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for sampled policies on large action products")
    add_common(p)
    p.set_defaults(func=_cmd_check_b)

    p = sub.add_parser("verify-game",
                       help="saddle-point checks for the entropy game")
    p.add_argument("model")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--samples", type=int, default=20,
                   help="sampled opponents and controllers per side (default 20)")
    p.add_argument("--gate", type=float, default=1e-8,
                   help="pass threshold for the saddle inequalities")
    p.add_argument("--seed", type=int, default=0)
    add_common(p, grid=False)
    p.set_defaults(func=_cmd_verify_game)

    p = sub.add_parser("example1", help="closed-form regression of the built-in model")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_example1)

    return parser


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelValidationError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return VALIDATION_FAILURE
    except (ModelFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_FAILURE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
