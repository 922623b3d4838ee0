"""Command-line client of the coordination service.

Every subcommand is a thin wrapper over one service endpoint: the CLI reads
and writes local files, the service does the computing. Without --server
the requests are dispatched to an in-process application instance, so batch
use needs no running daemon.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import sys
from pathlib import Path

import httpx

from .scenario import ScenarioError, load_scenario, read_edge_list, scenario_to_json

TRACE_COLUMNS = ("iteration", "rel_obj", "rel_load", "consensus_disagreement", "max_kkt_residual")


class CliError(RuntimeError):
    pass


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server is not None:
        response = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    else:
        from .service import app

        async def _call():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://evcoord", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(_call())
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise CliError(f"{path}: {detail}")
    return response.json()


def _write_trace_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow([
                row["iteration"],
                "" if row.get("rel_obj") is None else repr(float(row["rel_obj"])),
                "" if row.get("rel_load") is None else repr(float(row["rel_load"])),
                repr(float(row["consensus_disagreement"])),
                repr(float(row["max_kkt_residual"])),
            ])


def _read_trace_csv(path: Path) -> list[dict]:
    rows = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            rows.append({
                "iteration": int(row["iteration"]),
                "rel_obj": float(row["rel_obj"]) if row["rel_obj"] else None,
                "rel_load": float(row["rel_load"]) if row["rel_load"] else None,
                "consensus_disagreement": float(row["consensus_disagreement"]),
                "max_kkt_residual": float(row["max_kkt_residual"]),
            })
    return rows


def _write_schedules_csv(pev_ids: list[str], schedules: list[list[float]], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("pev_id", "t", "x_kw"))
        for pev_id, profile in zip(pev_ids, schedules):
            for t, x_kw in enumerate(profile):
                writer.writerow((pev_id, t, repr(float(x_kw))))


def _read_schedules_csv(path: Path, pev_ids: list[str], num_steps: int) -> list[list[float]]:
    table = {pid: [0.0] * num_steps for pid in pev_ids}
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            pid = row["pev_id"]
            if pid not in table:
                raise CliError(f"{path}: unknown pev_id {pid!r}")
            table[pid][int(row["t"])] = float(row["x_kw"])
    return [table[pid] for pid in pev_ids]


def _topology_overrides(value: str | None) -> dict:
    if value is None:
        return {}
    if value in ("path", "ring"):
        return {"topology_kind": value}
    if value.startswith("file:"):
        edges = read_edge_list(value[len("file:"):])
        return {"topology_kind": "custom", "topology_edges": edges}
    raise CliError(f"--topology must be path, ring, or file:PATH, got {value!r}")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_generate(args) -> int:
    payload = {"size": args.size, "seed": args.seed}
    if args.params is not None:
        payload.update(json.loads(Path(args.params).read_text()))
        payload["size"] = args.size
        payload["seed"] = args.seed
    if args.inelastic is not None:
        from .scenario import read_inelastic_csv

        payload["inelastic_load_kw"] = read_inelastic_csv(args.inelastic)
    scenario = _post(args.server, "/scenarios/generate", payload)
    out = _out_dir(args)
    target = out / "scenario.json"
    from .scenario import ScenarioModel

    target.write_text(scenario_to_json(ScenarioModel.model_validate(scenario)))
    print(f"wrote {target} ({len(scenario['fleet'])} vehicles, seed {args.seed})")
    return 0


def _cmd_solve_central(args) -> int:
    scenario = load_scenario(args.scenario)
    payload = {
        "scenario": scenario.model_dump(),
        "tolerance": args.tol,
        "method": args.method,
    }
    result = _post(args.server, "/solve/central", payload)
    out = _out_dir(args)
    _write_schedules_csv(result["pev_ids"], result["schedules"], out / "solution.csv")
    (out / "central.json").write_text(json.dumps({
        "objective": result["objective"],
        "load": result["load"],
        "price": result["price"],
        "schedules": result["schedules"],
        "pev_ids": result["pev_ids"],
        "method": result["method"],
    }, indent=2, sort_keys=True) + "\n")
    lines = [f"objective {result['objective']!r}", f"method {result['method']}"]
    lines += [f"residual {k} {v:.3e}" for k, v in sorted(result["residuals"].items())]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {out / 'solution.csv'}")
    return 0


def _cmd_run_distributed(args) -> int:
    scenario = load_scenario(args.scenario)
    payload = {"scenario": scenario.model_dump(), "include_trace": True}
    payload.update(_topology_overrides(args.topology))
    if args.iters is not None:
        payload["iterations"] = args.iters
    if args.drop_prob:
        payload["drop_probability"] = args.drop_prob
    if args.seed is not None:
        payload["fault_seed"] = args.seed
    if args.mode is not None:
        payload["mode"] = args.mode
    if args.tol_consensus is not None:
        payload["tol_consensus"] = args.tol_consensus
    if args.tol_kkt is not None:
        payload["tol_kkt"] = args.tol_kkt
    if args.central_dir is not None:
        central = json.loads((Path(args.central_dir) / "central.json").read_text())
        payload["oracle"] = {"objective": central["objective"], "load": central["load"]}
    result = _post(args.server, "/runs/distributed", payload)
    out = _out_dir(args)
    _write_trace_csv(result["trace"], out / "trace.csv")
    _write_schedules_csv(result["pev_ids"], result["schedules"], out / "schedules.csv")
    final = result["final"]
    print(
        f"{result['iterations']} iterations ({result['stop_reason']}); "
        f"objective {result['objective']!r}; "
        f"consensus {final['consensus_disagreement']:.3e}; "
        f"residual {final['max_kkt_residual']:.3e}"
    )
    if final.get("rel_obj") is not None:
        print(f"rel_obj {final['rel_obj']:.6e} rel_load {final['rel_load']:.6e}")
    print(f"wrote {out / 'trace.csv'} and {out / 'schedules.csv'}")
    return 0


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    run_dir = Path(args.run_dir)
    central = json.loads((Path(args.central_dir) / "central.json").read_text())
    pev_ids = [p.id for p in scenario.fleet]
    schedules = _read_schedules_csv(
        run_dir / "schedules.csv", pev_ids, scenario.grid.num_steps
    )
    payload = {
        "scenario": scenario.model_dump(),
        "schedules": schedules,
        "central": {
            "objective": central["objective"],
            "load": central["load"],
            "schedules": central["schedules"],
        },
    }
    trace_path = run_dir / "trace.csv"
    if trace_path.exists():
        payload["trace"] = _read_trace_csv(trace_path)
    result = _post(args.server, "/analysis/compare", payload)
    out = _out_dir(args)
    _write_trace_csv(result["series"], out / "compare.csv")
    print(f"rel_obj {result['rel_obj']:.6e}")
    print(f"rel_load {result['rel_load']:.6e}")
    for label, valley in (("central", result["valley_central"]),
                          ("distributed", result["valley_distributed"])):
        print(
            f"valley[{label}]: variance {valley['inelastic_variance']:.2f} -> "
            f"{valley['combined_variance']:.2f}; peak {valley['inelastic_peak_kw']:.2f} -> "
            f"{valley['combined_peak_kw']:.2f}; valley energy fraction "
            f"{valley['valley_energy_fraction']:.3f}"
        )
    print(f"wrote {out / 'compare.csv'}")
    return 0


def _cmd_diameter(args) -> int:
    if args.scenario is not None:
        num_agents = len(load_scenario(args.scenario).fleet)
    elif args.num_agents is not None:
        num_agents = args.num_agents
    else:
        raise CliError("diameter needs --scenario or --num-agents")
    payload = {"num_agents": num_agents}
    overrides = _topology_overrides(args.topology)
    payload["kind"] = overrides.get("topology_kind", "path")
    if "topology_edges" in overrides:
        payload["edges"] = overrides["topology_edges"]
    result = _post(args.server, "/topology/diameter", payload)
    print(
        f"agents {result['num_agents']}; edges {result['num_edges']}; "
        f"diameter {result['diameter']}; degree {result['min_degree']}.."
        f"{result['max_degree']}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evcoord",
        description="Coordinate fleet charging schedules: generate scenarios, "
        "solve the centralized reference, run the peer-to-peer solver, and "
        "compare the two.",
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario file")
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None, help="JSON file with generator overrides")
    p.add_argument("--inelastic", default=None,
                   help="CSV profile (time_index,load_kw) to embed instead of the synthetic shape")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve-central", help="solve and certify the reference optimum")
    p.add_argument("--scenario", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--method", choices=("interior-point", "projected-gradient"),
                   default="interior-point")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_solve_central)

    p = sub.add_parser("run-distributed", help="run the peer-to-peer coordination loop")
    p.add_argument("--scenario", required=True)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--topology", default=None, help="path, ring, or file:PATH")
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None, help="link-fault seed override")
    p.add_argument("--mode", choices=("parallel", "serial"), default=None)
    p.add_argument("--tol-consensus", type=float, default=None)
    p.add_argument("--tol-kkt", type=float, default=None)
    p.add_argument("--central-dir", default=None,
                   help="directory with central.json to track distance from optimum")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_run_distributed)

    p = sub.add_parser("compare", help="measure a finished run against the optimum")
    p.add_argument("--scenario", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--central-dir", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("diameter", help="print communication-graph diagnostics")
    p.add_argument("--topology", default="path", help="path, ring, or file:PATH")
    p.add_argument("--num-agents", type=int, default=None)
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=_cmd_diameter)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
