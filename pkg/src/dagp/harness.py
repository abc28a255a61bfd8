"""Experiment orchestration and the command line interface.

Subcommands: ``run`` (build everything, run each configured algorithm from
the same initial iterates, write CSV traces, metadata, and SVG charts),
``certify`` (gossip-matrix kernel checks plus the eigenvalue-margin scan),
and ``solve-ref`` (centralized reference solution only).  Exit codes:
0 success, 1 config error, 2 runtime abort (non-finite), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .algorithms import NonFiniteError, make_stepper, run
from .certificates import eigenvalue_margin_scan, build_certificates, export_scan_csv
from .config import ConfigError, ExperimentConfig, load_config, serialize_config
from .graphs import is_strongly_connected, load_edge_list, random_strongly_connected, save_edge_list
from .metrics import Trace, write_trace_csv
from .mixing import build_gossip_pair, verify_kernel_conditions
from .plots import emit_plots
from .problems import (
    ProblemInstance,
    generate_logistic_instance,
    generate_synthetic_instance,
)
from .reference import ReferenceSolution, centralized_solve

__all__ = ["build_experiment", "run_experiment", "certify", "solve_reference", "main"]

_SCAN_C_VALUES = (0.0, 1.0, 10.0)


def _build_graph(config: ExperimentConfig):
    if config.graph_file:
        graph = load_edge_list(config.graph_file)
        if graph.node_count != config.M:
            raise ConfigError(
                f"graph file has {graph.node_count} nodes but config says M={config.M}"
            )
        if not is_strongly_connected(graph):
            raise ConfigError("graph file is not strongly connected")
        return graph
    return random_strongly_connected(config.M, config.edge_prob, config.graph_seed)


def _build_instance(config: ExperimentConfig) -> ProblemInstance:
    if config.kind == "synthetic_constrained":
        return generate_synthetic_instance(config.m, config.M, config.instance_seed)
    return generate_logistic_instance(
        config.M, config.m, config.samples_per_node, config.instance_seed
    )


def build_experiment(config: ExperimentConfig):
    """Construct the graph, gossip pair (with kernel report), instance, and reference."""
    config.validate()
    graph = _build_graph(config)
    gossip = build_gossip_pair(graph)
    kernel = verify_kernel_conditions(gossip)
    instance = _build_instance(config)
    reference = centralized_solve(
        instance, step=config.ref_step, iters=config.ref_iters, tol=config.ref_tol
    )
    return graph, gossip, kernel, instance, reference


def run_experiment(
    config: ExperimentConfig, output_dir: str | Path | None = None
) -> list[tuple[str, Trace]]:
    """Run every configured algorithm and write traces, metadata, and the graph.

    All algorithms start from the same random initial iterates.  Output bytes
    are fully determined by the config and seeds, except the timestamp inside
    the metadata file.
    """
    graph, gossip, kernel, instance, reference = build_experiment(config)
    if not kernel.all_passed:
        print(
            "warning: gossip kernel conditions not met "
            f"(kernels_match={kernel.kernels_match}, "
            f"max_principal_angle={kernel.max_principal_angle:.3g}); "
            "stopping points need not be unique consensus solutions "
            "(full report in metadata.json)",
            file=sys.stderr,
        )
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    base_meta = {
        "kind": config.kind,
        "m": config.m,
        "M": config.M,
        "graph_seed": config.graph_seed,
        "edge_prob": config.edge_prob,
        "instance_seed": config.instance_seed,
        "x_init_seed": config.x_init_seed,
        "kernel_report": kernel.to_dict(),
    }

    results: list[tuple[str, Trace]] = []
    for spec in config.algorithms:
        stepper = make_stepper(spec.name, spec.params_dict())
        state = stepper.init_state(instance, gossip, config.x_init_seed)
        trace = run(
            stepper,
            state,
            instance,
            gossip,
            config.iterations,
            config.trace_every,
            reference=reference,
            workers=config.workers,
            metadata=base_meta,
        )
        results.append((spec.name, trace))
        write_trace_csv(trace, out / f"{spec.name}_trace.csv")
        if config.consensus_nodes > 0:
            _write_consensus_nodes_csv(
                config, stepper, instance, gossip, out / f"{spec.name}_consensus_nodes.csv"
            )

    save_edge_list(graph, out / "graph.txt")
    metadata = {
        "config": serialize_config(config),
        "kernel_report": kernel.to_dict(),
        "reference": reference.to_dict(),
        "algorithms": [
            {"name": name, "hyperparameters": trace.metadata["hyperparameters"]}
            for name, trace in results
        ],
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out / "metadata.json").write_text(json.dumps(metadata, indent=1))
    return results


def _write_consensus_nodes_csv(config, stepper, instance, gossip, path: Path) -> None:
    """Optional figure-parity output: squared error of a few nodes vs a reference node."""
    from .plots import emit_consensus_nodes_plot

    rng = np.random.default_rng(config.x_init_seed)
    count = min(config.consensus_nodes, config.M)
    tracked = sorted(rng.choice(config.M, size=count, replace=False).tolist())
    ref_node = config.consensus_reference_node
    state = stepper.init_state(instance, gossip, config.x_init_seed)
    rows = []
    ns: list[int] = []
    series: dict[str, list[float]] = {f"node_{v}": [] for v in tracked}

    def snapshot(n, state):
        x = stepper.iterates(state)
        errs = [float(np.sum((x[v] - x[ref_node]) ** 2)) for v in tracked]
        ns.append(n)
        for v, e in zip(tracked, errs):
            series[f"node_{v}"].append(e)
        rows.append(str(n) + "," + ",".join("%.17g" % e for e in errs))

    snapshot(0, state)
    for k in range(config.iterations):
        state = stepper.step(state, instance, gossip)
        if (k + 1) % config.trace_every == 0:
            snapshot(k + 1, state)
    header = "n," + ",".join(f"node_{v}" for v in tracked)
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    emit_consensus_nodes_plot(ns, series, path.with_suffix(".svg"))


def certify(config: ExperimentConfig, output_dir: str | Path | None = None) -> dict:
    """Kernel-condition checks plus the eigenvalue-margin scan for a config.

    Uses the config's DAGP hyperparameters (or defaults), the instance's
    largest per-node smoothness bound, and the standard small-frequency grid;
    the scan is repeated for a few values of the offset constant.
    """
    config.validate()
    graph = _build_graph(config)
    gossip = build_gossip_pair(graph)
    kernel = verify_kernel_conditions(gossip)
    instance = _build_instance(config)

    dagp_params = {}
    for spec in config.algorithms:
        if spec.name == "dagp":
            dagp_params = spec.params_dict()
    cert = build_certificates(
        gossip,
        mu=dagp_params.get("mu", 0.1),
        rho=dagp_params.get("rho", 0.1),
        alpha=dagp_params.get("alpha", 0.1),
        smoothness=max(f.smoothness_bound for f in instance.functions),
    )
    reports = [eigenvalue_margin_scan(cert, c) for c in _SCAN_C_VALUES]

    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_scan_csv(reports, out / "eigenvalue_margin_report.csv")
    return {
        "kernel_report": kernel.to_dict(),
        "scans": [
            {
                "C": r.C,
                "min_distance": r.min_distance,
                "singular_points": r.singular_count,
                "grid_points": len(r.points),
                "passed": r.passed,
            }
            for r in reports
        ],
    }


def solve_reference(config: ExperimentConfig, output_dir: str | Path | None = None) -> ReferenceSolution:
    """Compute and persist the centralized reference solution for a config."""
    config.validate()
    instance = _build_instance(config)
    reference = centralized_solve(
        instance, step=config.ref_step, iters=config.ref_iters, tol=config.ref_tol
    )
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reference.json").write_text(json.dumps(reference.to_dict(), indent=1))
    return reference


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["instance_seed"] = args.seed
    if getattr(args, "iters", None) is not None:
        updates["iterations"] = args.iters
    return replace(config, **updates) if updates else config


def _cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    results = run_experiment(config)
    emit_plots(results, config.output_dir)
    for name, trace in results:
        last = trace.records[-1]
        print(
            f"{name}: n={last.n} objective={last.objective:.6g} "
            f"feasibility_gap={last.feasibility_gap:.3e} "
            f"consensus_error={last.consensus_error:.3e}"
        )
    print(f"outputs written to {config.output_dir}")
    return 0


def _cmd_certify(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    summary = certify(config)
    kernel = summary["kernel_report"]
    print("kernel conditions:")
    for key in (
        "dim_ker_w",
        "ker_w_is_consensus",
        "kernels_match",
        "max_principal_angle",
        "qw_min_ratio",
    ):
        print(f"  {key} = {kernel[key]}")
    print("eigenvalue-margin scan:")
    for scan in summary["scans"]:
        print(
            f"  C={scan['C']:g}: min_distance={scan['min_distance']:.6g} "
            f"singular={scan['singular_points']}/{scan['grid_points']} "
            f"passed={scan['passed']}"
        )
    print(f"report written to {Path(config.output_dir) / 'eigenvalue_margin_report.csv'}")
    return 0


def _cmd_solve_ref(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    ref = solve_reference(config)
    print(
        f"f_star={ref.f_star:.12g} kkt_residual={ref.kkt_residual:.3e} "
        f"iterations={ref.iterations_used} converged={ref.converged}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagp",
        description="Decentralized constrained optimization experiments over directed graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured algorithms and write traces/plots")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the output directory")
    p_run.add_argument("--seed", type=int, help="override the instance seed")
    p_run.add_argument("--iters", type=int, help="override the iteration count")
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser("certify", help="kernel checks and eigenvalue-margin scan")
    p_cert.add_argument("config")
    p_cert.add_argument("--out", help="override the output directory")
    p_cert.set_defaults(func=_cmd_certify)

    p_ref = sub.add_parser("solve-ref", help="centralized reference solution only")
    p_ref.add_argument("config")
    p_ref.add_argument("--out", help="override the output directory")
    p_ref.set_defaults(func=_cmd_solve_ref)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
