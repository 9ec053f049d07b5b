"""Command line front end.

Exit codes: 0 success, 1 a check returned false (failed verification,
inequivalent graphs, bound counterexamples), 2 usage or input error,
3 resource limit.  Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compiler import ClusterDims, EmitterLayout, compile_general_graph, compile_lr_chain, compile_parallel_cluster
from .dense import DEFAULT_CAP
from .equivalence import THREADS_ENV, default_threads, lc_equivalent, lc_orbit, luc_equivalent, luc_orbit
from .errors import CapacityError, EmitGraphError, ResourceError, ValidationError
from .faults import FaultSpec, all_faults, localization_bound_check
from .graph import (
    Graph,
    complete_graph,
    cycle_graph,
    grid_graph,
    path_graph,
    random_graph,
    seven_photon_target,
    star_graph,
    two_chains,
)
from .schedule import Schedule
from .sim import DEFAULT_SEED, run_dense, run_stabilizer, verify_all_branches, verify_graph_state

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(EmitGraphError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON error path
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad dimensions {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise UsageError(f"bad dimensions {text!r}")
    return dims


def parse_graph(spec: str, dims: str | None = None, seed: int = DEFAULT_SEED) -> tuple[Graph, str, tuple]:
    """Inline family spec or a graph JSON path -> (graph, family, dims).

    Families: ``grid:4x4`` (any number of extents), ``path:5``, ``cycle:5``,
    ``complete:4``, ``star:3``, ``random:10:0.4``, ``ladder`` or ``ladder:3-4``
    (two 4-vertex chains with an optional rung) and ``seven``.
    """
    kind, _, arg = spec.partition(":")
    if not arg and dims:
        arg = dims
    try:
        if kind == "grid":
            ext = parse_dims(arg)
            return grid_graph(ext), "grid", ext
        if kind in ("path", "cycle", "complete", "star"):
            n = int(arg)
            return {"path": path_graph, "cycle": cycle_graph, "complete": complete_graph, "star": star_graph}[kind](n), kind, (n,)
        if kind == "random":
            n, p = arg.split(":")
            return random_graph(int(n), float(p), np.random.default_rng(seed)), kind, (int(n),)
        if kind == "ladder":
            rung = tuple(int(v) for v in arg.split("-")) if arg else None
            return two_chains(rung), kind, ()
        if kind == "seven":
            return seven_photon_target(), kind, (7,)
    except (ValueError, KeyError):
        raise UsageError(f"bad graph spec {spec!r}") from None
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"graph {spec!r} is neither an inline spec nor a readable file")
    return Graph.from_json(path.read_text()), "file", ()


def parse_layout(spec: str) -> EmitterLayout:
    if Path(spec).is_file():
        return EmitterLayout.from_dict(json.loads(Path(spec).read_text()))
    return EmitterLayout.parse(spec)


def load_schedule(path: str) -> Schedule:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read schedule: {exc}") from exc
    s = Schedule.from_json(text)
    s.validate()
    return s


def emit(result: dict, out: str | None) -> None:
    text = json.dumps(result, sort_keys=True, indent=1) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def dense_expectation(st, p) -> float:
    """⟨ψ|P|ψ⟩ on a :class:`DenseState` without expanding detached qubits."""
    other = st.copy()
    other.apply_pauli(p.padded(st.n))
    val = complex(np.vdot(st.psi, np.transpose(other.psi, [other.live.index(q) for q in st.live])))
    for q, v in st.detached.items():
        val *= np.vdot(v, other.detached[q])
    return val.real


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_compile(a) -> int:
    target, family, dims = parse_graph(a.target, a.dims, a.seed)
    layout = parse_layout(a.layout)
    protocol = a.protocol
    if protocol == "auto":
        protocol = "cluster" if family == "grid" else "general"
    report = None
    if protocol == "lr":
        if family != "path":
            raise UsageError("the lr protocol needs a path target")
        sched = compile_lr_chain(len(target))
    elif protocol == "cluster":
        if family != "grid":
            raise UsageError("the cluster protocol needs a grid target")
        sched, report = compile_parallel_cluster(ClusterDims(dims), layout)
    else:
        order = [int(v) for v in a.order.split(",")] if a.order else None
        sched, report = compile_general_graph(target, layout, order, allow_routing=not a.no_routing)
    sched.meta["seed"] = a.seed
    Path(a.out).write_text(sched.to_json())
    emit(
        {
            "command": "compile",
            "protocol": protocol,
            "seed": a.seed,
            "schedule": a.out,
            "steps": len(sched.steps),
            "qubits": sched.num_qubits,
            "report": None if report is None else report.to_dict(),
        },
        a.result,
    )
    return EXIT_OK


def cmd_run(a) -> int:
    s = load_schedule(a.schedule)
    if a.backend == "stabilizer":
        final, rep = run_stabilizer(s, seed=a.seed)
    else:
        final, rep = run_dense(s, seed=a.seed, cap=a.cap)
    result = {"command": "run", **rep.to_dict()}
    code = EXIT_OK
    if a.verify:
        target = s.target if a.verify == "target" else parse_graph(a.verify, None, a.seed)[0]
        if target is None:
            raise UsageError("schedule carries no target to verify against")
        keep = s.outputs or None
        if a.backend == "stabilizer":
            verdict = verify_graph_state(final, target, keep)
            ok, failed = verdict.ok, verdict.failed_vertices
        else:
            from .graph import stabilizer_generators
            from .sim import _keep_map

            mapping = _keep_map(target, keep)
            failed = []
            for v, gen in zip(target.ids, stabilizer_generators(target)):
                letters = {mapping[u]: gen.letter(i) for i, u in enumerate(target.ids) if gen.letter(i) != "I"}
                from .pauli import PauliString

                if abs(dense_expectation(final, PauliString.from_letters(letters, final.n)) - 1) > 1e-9:
                    failed.append(v)
            ok = not failed
        result["verify"] = {"ok": ok, "failed_vertices": failed}
        code = EXIT_OK if ok else EXIT_FALSE
    emit(result, a.result)
    return code


def cmd_verify(a) -> int:
    s = load_schedule(a.schedule)
    target = s.target if not a.target else parse_graph(a.target, None, a.seed)[0]
    if target is None:
        raise UsageError("schedule carries no target; pass --target")
    verdict = verify_all_branches(s, target, s.outputs or None, limit=a.branch_limit)
    emit(
        {"command": "verify", "seed": a.seed, "ok": verdict.ok, "failed_vertices": verdict.failed_vertices,
         "measurements": len(s.measurement_steps())},
        a.result,
    )
    return EXIT_OK if verdict.ok else EXIT_FALSE


def cmd_orbit(a) -> int:
    g = parse_graph(a.graph, None, a.seed)[0]
    controls = tuple(int(v) for v in a.control.split(",")) if a.control else None
    kw = {"max_keys": a.max_keys, "threads": a.threads}
    result = {"command": "orbit", "seed": a.seed, "scope": "local-clifford" if controls is None else "clifford-restricted LU_C"}
    code = EXIT_OK
    if a.dump or not a.equiv:
        orbit = lc_orbit(g, **kw) if controls is None else luc_orbit(g, controls, **kw)
        result["orbit_size"] = len(orbit)
        if a.dump:
            d = Path(a.dump)
            d.mkdir(parents=True, exist_ok=True)
            (d / "keys.txt").write_text(orbit.dump_keys())
            (d / "moves.json").write_text(orbit.move_log_json())
            result["dump"] = str(d)
    if a.equiv:
        h = parse_graph(a.equiv, None, a.seed)[0]
        cert = lc_equivalent(g, h, **kw) if controls is None else luc_equivalent(g, h, controls, **kw)
        result["certificate"] = cert.to_dict()
        code = EXIT_OK if cert.equivalent else EXIT_FALSE
    emit(result, a.result)
    return code


def cmd_fault(a) -> int:
    s = load_schedule(a.schedule)
    if a.fault:
        faults = []
        for text in a.fault:
            try:
                step, qubit, p = text.split(":")
                faults.append(FaultSpec(int(step), int(qubit), p.upper()))
            except ValueError:
                raise UsageError(f"bad fault {text!r}; expected step:qubit:P") from None
    elif a.sweep == "all":
        faults = all_faults(s)
    else:
        raise UsageError("give --sweep all or at least one --fault")
    rep = localization_bound_check(s, faults)
    d = rep.to_dict()
    d["max_support"] = max((e["photon_count"] for e in rep.entries), default=0)
    d["command"] = "fault"
    d["seed"] = a.seed
    emit(d, a.result)
    return EXIT_OK if rep.ok else EXIT_FALSE


def cmd_export_dot(a) -> int:
    if a.schedule:
        g = load_schedule(a.schedule).target
        if g is None:
            raise UsageError("schedule carries no target graph")
    elif a.graph:
        g = parse_graph(a.graph, None, a.seed)[0]
    else:
        raise UsageError("give --graph or --schedule")
    text = g.to_dot()
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="emitgraph", description="Compile and certify emitter schedules for photonic graph states.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (echoed in the output)")
    common.add_argument("--threads", type=int, default=None, help=f"worker count (default ${THREADS_ENV} or 1)")
    common.add_argument("--result", help="write the result JSON here instead of stdout")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("compile", parents=[common], help="compile a target graph into a schedule")
    c.add_argument("--target", required=True, help="inline graph spec or graph JSON path")
    c.add_argument("--dims", help="extents for a bare 'grid' target, e.g. 4x4")
    c.add_argument("--layout", required=True, help="line:N, grid:WxH, complete:N or layout JSON path")
    c.add_argument("--protocol", choices=["auto", "lr", "cluster", "general"], default="auto")
    c.add_argument("--order", help="comma-separated emission order for the general protocol")
    c.add_argument("--no-routing", action="store_true", help="fail instead of routing with SWAPs")
    c.add_argument("--out", required=True, help="schedule JSON output path")
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", parents=[common], help="execute a schedule once")
    r.add_argument("--schedule", required=True)
    r.add_argument("--backend", choices=["stabilizer", "dense"], default="stabilizer")
    r.add_argument("--cap", type=int, default=DEFAULT_CAP, help="dense backend live-qubit cap")
    r.add_argument("--verify", help="graph spec to check the outputs against, or 'target'")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", parents=[common], help="check every measurement branch against the target")
    v.add_argument("--schedule", required=True)
    v.add_argument("--target", help="graph spec (defaults to the schedule's target)")
    v.add_argument("--branch-limit", type=int, default=10, help="above this many measurements, sample branches")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("orbit", parents=[common], help="orbit enumeration and equivalence certificates")
    o.add_argument("--graph", required=True)
    o.add_argument("--control", help="control pair 'a,b' for the coarsened relation")
    o.add_argument("--equiv", help="second graph to decide equivalence with")
    o.add_argument("--dump", help="directory for keys.txt and moves.json")
    o.add_argument("--max-keys", type=int, default=10_000_000)
    o.set_defaults(func=cmd_orbit)

    f = sub.add_parser("fault", parents=[common], help="single-fault propagation and the localization bound")
    f.add_argument("--schedule", required=True)
    f.add_argument("--sweep", choices=["all"])
    f.add_argument("--fault", action="append", help="step:qubit:P (repeatable)")
    f.set_defaults(func=cmd_fault)

    d = sub.add_parser("export-dot", parents=[common], help="write a graph in DOT format")
    d.add_argument("--graph")
    d.add_argument("--schedule")
    d.add_argument("--out")
    d.set_defaults(func=cmd_export_dot)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        if args.threads is None:
            args.threads = default_threads()
        return args.func(args)
    except (ResourceError, CapacityError) as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return EXIT_RESOURCE
    except EmitGraphError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}, sort_keys=True) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
