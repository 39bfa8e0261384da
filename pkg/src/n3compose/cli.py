"""Command-line entry point wiring all modules together.

Exit codes: 0 success, 1 domain failure (no proof, violations, failed
run), 2 usage error. Diagnostics go to stderr, data to stdout or --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import agent, benchmark, descgen, n3, reason, report, restdesc, simulator
from .reason import Budget, FilterRule, KnowledgeBase

DEFAULT_BUDGET_STEPS = int(os.environ.get("N3COMPOSE_BUDGET_STEPS", "1000000"))
DEFAULT_BUDGET_SECONDS = float(os.environ.get("N3COMPOSE_BUDGET_SECONDS", "300"))


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_sources(paths: Sequence[str]) -> List[Tuple[str, n3.Document]]:
    """Files and directories become (name, document) pairs; directory
    entries are read in sorted order, names are the file stems."""
    sources = []
    for path in paths:
        files = sorted(os.path.join(path, f) for f in os.listdir(path)
                       if f.endswith(".n3")) if os.path.isdir(path) else [path]
        for f in files:
            name = os.path.splitext(os.path.basename(f))[0]
            sources.append((name, n3.parse_document(_read(f))))
    return sources


def _budget(args) -> Budget:
    return Budget(max_steps=args.budget_steps, max_seconds=args.budget_seconds)


def _add_budget_flags(parser) -> None:
    parser.add_argument("--budget-steps", type=int, default=DEFAULT_BUDGET_STEPS)
    parser.add_argument("--budget-seconds", type=float, default=DEFAULT_BUDGET_SECONDS)


def _prove_from_args(args):
    kb = KnowledgeBase()
    for iri, doc in _load_sources(args.data):
        kb.add_source(iri, doc)
    rules = _load_sources(args.rules)
    goal_name = os.path.splitext(os.path.basename(args.goal))[0]
    goal = FilterRule.from_document(goal_name, n3.parse_document(_read(args.goal)))
    proof = reason.prove(kb, rules, goal, _budget(args))
    return proof, kb, rules, goal


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_parse(args) -> int:
    doc = n3.parse_document(_read(args.file))
    _emit(n3.serialize(doc), args.out)
    return 0


def cmd_prove(args) -> int:
    proof, kb, rules, goal = _prove_from_args(args)
    prefixes: Dict[str, str] = {}
    for _, doc in kb.sources + rules + [(goal.source, goal.document)]:
        prefixes.update(doc.prefixes)
    _emit(reason.serialize_proof(proof, prefixes, elide_extractions=args.elide), args.out)
    return 0


def cmd_check(args) -> int:
    proof = reason.parse_proof(_read(args.proof))
    sources = dict(_load_sources(args.sources))
    violations = reason.check_proof(proof, sources)
    if violations:
        for v in violations:
            print(str(v), file=sys.stderr)
        return 1
    _emit("Valid\n", args.out)
    return 0


def cmd_validate(args) -> int:
    failed = False
    lines = []
    for name, doc in _load_sources(args.files):
        result = restdesc.validate_description(doc, name)
        if isinstance(result, restdesc.RestDescription):
            lines.append(f"{name}: valid")
        else:
            failed = True
            for v in result:
                print(f"{name}: {v}", file=sys.stderr)
    _emit("".join(line + "\n" for line in lines), args.out)
    return 1 if failed else 0


def cmd_requests(args) -> int:
    proof = reason.parse_proof(_read(args.proof))
    rules = []
    for name, doc in _load_sources(args.rules):
        result = restdesc.validate_description(doc, name)
        if isinstance(result, restdesc.RestDescription):
            rules.append(result)
    extracted = restdesc.extract_requests(proof, rules)
    lines = ["rule\tmethod\ttarget\tsufficient\tstep"]
    for e in extracted:
        target = restdesc._plain(e.request.request_uri) if e.request.request_uri is not None else ""
        method = restdesc._plain(e.request.method_name)
        lines.append(f"{e.rule_source}\t{method}\t{target}\t"
                     f"{'yes' if e.sufficiently_specified else 'no'}\t{e.step}")
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def _make_transport(args):
    spec = args.server
    if spec == "simulator-image":
        return simulator.ImageServer(counter_start=args.counter_start)
    if spec.startswith("simulator-chain:"):
        manifest = json.loads(_read(spec.split(":", 1)[1]))
        return simulator.ChainServer(manifest["links"])
    if spec.startswith("http://") or spec.startswith("https://"):
        return simulator.HttpTransport(spec)
    raise ValueError(f"unknown server {spec!r}")


def cmd_execute(args) -> int:
    rules = []
    for name, doc in _load_sources(args.rules):
        result = restdesc.validate_description(doc, name)
        if not isinstance(result, restdesc.RestDescription):
            for v in result:
                print(f"{name}: {v}", file=sys.stderr)
            return 1
        rules.append(result)
    goal_name = os.path.splitext(os.path.basename(args.goal))[0]
    goal = FilterRule.from_document(goal_name, n3.parse_document(_read(args.goal)))
    problem = agent.CompositionProblem(
        initial=_load_sources(args.data), goal=goal, rules=rules,
        background=_load_sources(args.background) if args.background else [])
    transport = _make_transport(args)
    outcome = agent.run(problem, transport, _budget(args), keep_learned=args.keep_learned)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(n3.serialize(agent.trace_document(outcome)))
    for step in outcome.trace:
        print(f"{step.request.method} {step.request.target} "
              f"n_pre={step.n_pre} n_post={step.n_post} {step.decision}", file=sys.stderr)
    if not outcome.success:
        print(f"failure: {outcome.cause}", file=sys.stderr)
        return 1
    prefixes: Dict[str, str] = {}
    for r in rules:
        prefixes.update(r.document.prefixes)
    lines = n3.serialize_formula(outcome.goal_instance, prefixes)
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def cmd_serve(args) -> int:
    if args.api == "image":
        handler = simulator.ImageServer(counter_start=args.counter_start)
    else:
        manifest = json.loads(_read(args.spec))
        handler = simulator.ChainServer(manifest["links"])
    httpd = simulator.make_http_server(handler, args.port)
    print(f"listening on {httpd.server_address[1]}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


def cmd_benchgen(args) -> int:
    spec = benchmark.ChainSpec(n=args.n, d=args.d, dummies=args.dummies, seed=args.seed)
    bundle = benchmark.generate_chain(spec)
    written = benchmark.write_chain(bundle, args.out)
    manifest = {
        "spec": {"n": spec.n, "d": spec.d, "dummies": spec.dummies, "seed": spec.seed},
        "plan": bundle.plan,
        "links": bundle.link_table,
    }
    manifest_path = os.path.join(args.out, "chain.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    for path in written + [manifest_path]:
        print(path, file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    grid_rows = json.loads(_read(args.grid))
    grid = [benchmark.ChainSpec(n=row["n"], d=row.get("d", 1),
                                dummies=row.get("dummies", 0), seed=row.get("seed", 0))
            for row in grid_rows]
    records = benchmark.run_benchmark(grid, args.trials,
                                      Budget(max_steps=args.budget_steps,
                                             max_seconds=args.budget_seconds))
    with open(args.csv, "w", newline="") as fh:
        benchmark.write_csv(records, fh)
    print(args.csv, file=sys.stderr)
    if not args.no_figures:
        out_dir = os.path.dirname(os.path.abspath(args.csv))
        for path in report.render_figures(records, out_dir):
            print(path, file=sys.stderr)
    return 0


def cmd_descgen(args) -> int:
    trace = descgen.parse_trace(_read(args.trace))
    clusters = descgen.cluster_responses(trace, args.threshold)
    skeletons = descgen.generate_skeletons(clusters, trace)
    os.makedirs(args.out, exist_ok=True)
    for cluster, skeleton in zip(clusters, skeletons):
        path = os.path.join(args.out, f"skeleton_{skeleton.cluster}.n3")
        with open(path, "w") as fh:
            fh.write(n3.serialize(skeleton.document))
        members = ",".join(str(m + 1) for m in cluster.members)
        print(f"{path}: {cluster.method} cluster of entries {members}")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="n3compose")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a document and reserialize it")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("prove", help="derive the goal and print the proof")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--rules", nargs="+", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--elide", action="store_true",
                   help="skip trivial extraction steps in the output")
    p.add_argument("--out")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("check", help="verify a proof against its sources")
    p.add_argument("--proof", required=True)
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate", help="validate description documents")
    p.add_argument("files", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("requests", help="list instantiated requests of a proof")
    p.add_argument("--proof", required=True)
    p.add_argument("--rules", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_requests)

    p = sub.add_parser("execute", help="run the composition loop against a server")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--rules", nargs="+", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--background", nargs="*")
    p.add_argument("--server", default="simulator-image")
    p.add_argument("--counter-start", type=int, default=24)
    p.add_argument("--keep-learned", action="store_true")
    p.add_argument("--trace")
    p.add_argument("--out")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("serve", help="expose a simulator over HTTP")
    p.add_argument("--api", choices=["image", "chain"], required=True)
    p.add_argument("--spec", help="chain.json manifest (chain api)")
    p.add_argument("--counter-start", type=int, default=24)
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("benchgen", help="generate a benchmark chain")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--dummies", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchgen)

    p = sub.add_parser("bench", help="run the timing harness")
    p.add_argument("--grid", required=True, help="JSON list of {n,d,dummies,seed}")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--csv", required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("descgen", help="generate description skeletons from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--threshold", type=float, default=descgen.DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_descgen)

    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (n3.N3Error, reason.ReasonError, reason.Unprovable, reason.BudgetExceeded,
            restdesc.RestDescError, agent.CompositionError, descgen.DescGenError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
