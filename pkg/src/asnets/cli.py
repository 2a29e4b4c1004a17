"""Command-line entry point ``asnet``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ASNetError
from .evaluate import evaluate
from .generators import KINDS, generate
from .grounder import build_network_spec, dump_task, ground
from .heuristics import HeuristicCache, hmax
from .model import load_weights, read_header, save_weights
from .ppddl import parse_domain, parse_problem, read_domain, read_problem
from .teacher import Teacher

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(domain_path, problem_path, prune=True):
    domain = read_domain(domain_path)
    return domain, ground(domain, read_problem(problem_path, domain), prune_static=prune)


def cmd_ground(args) -> int:
    _, task = _load(args.domain, args.problem, not args.no_prune)
    spec = build_network_spec(task, args.layers, args.dh)
    if args.dump == "json":
        print(json.dumps(dump_task(task, spec), indent=2))
    else:
        print(f"problem {task.name}: {task.n_props} props, {task.n_actions} actions, "
              f"{len(spec.param_shapes())} weight keys")
    return 0


def cmd_heur(args) -> int:
    _, task = _load(args.domain, args.problem)
    cache = HeuristicCache(task)
    s = task.init
    if args.which == "hmax":
        print(f"hmax {hmax(cache.relaxed, s):g}")
        return 0
    if args.which == "hadd":
        print(f"hadd {cache.hadd(s):g}")
        return 0
    lms = cache.lmcut(s)
    print(f"lmcut {lms.hvalue:g}")
    for lm in lms.landmarks:
        print("landmark " + " ".join(task.action_name(a) for a in sorted(lm)))
    return 0


def cmd_teacher(args) -> int:
    _, task = _load(args.domain, args.problem)
    teacher = Teacher(task, args.heuristic, args.epsilon, args.penalty, seed=args.seed)
    done = teacher.solve(task.init, time_budget=args.time_limit)
    print(f"V(s0) {teacher.value(task.init):.6g}")
    print(f"converged {'yes' if done else 'no'}")
    print(f"envelope {len(teacher.envelope(task.init))}")
    return 0


def cmd_train(args) -> int:
    from .trainer import TrainConfig, Trainer

    domain_text = Path(args.domain).read_text()
    domain = parse_domain(domain_text, args.domain)
    tasks = [ground(domain, read_problem(p, domain)) for p in args.problems]
    cfg = TrainConfig(time_limit=args.time_limit, max_epochs=args.max_epochs, heuristic=args.heuristic,
                      landmarks=not args.no_landmarks, n_layers=args.layers, hidden_size=args.dh,
                      seed=args.seed)
    trainer = Trainer(domain, tasks, cfg)
    weights, report = trainer.train(progress=lambda e: print(e.line(), flush=True))
    save_weights(weights, args.out, {"domain_text": domain_text})
    print(f"stopped: {report.stop_reason or 'no epochs'}; best epoch {report.best_epoch}; "
          f"weights written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    header = read_header(args.weights)
    meta = header.get("meta", {})
    if args.domain:
        domain = read_domain(args.domain)
    elif "domain_text" in meta:
        domain = parse_domain(meta["domain_text"], f"{args.weights}:domain")
    else:
        raise ASNetError("weights carry no domain; pass --domain")
    weights = load_weights(args.weights, domain)
    task = ground(domain, read_problem(args.problem, domain))
    landmarks = bool(meta.get("landmarks", True))
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        report = evaluate(weights, task, args.trials, args.seed, landmarks=landmarks,
                          trace=(lambda line: trace_fh.write(line + "\n")) if trace_fh else None)
    finally:
        if trace_fh:
            trace_fh.close()
    print(report.to_json() if args.json else report.line())
    return 0


def cmd_gen(args) -> int:
    dtext, ptext = generate(args.kind, args.size, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = f"-s{args.seed}" if args.kind == "pbw" else ""
    dpath = out / f"{args.kind}-domain.pddl"
    ppath = out / f"{args.kind}-{args.size}{suffix}.pddl"
    dpath.write_text(dtext)
    ppath.write_text(ptext)
    # round-trip through the parser so broken output never lands silently
    parse_problem(ptext, parse_domain(dtext, str(dpath)), str(ppath))
    print(dpath)
    print(ppath)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import gradient_check, oracle_check

    ok = True
    gc = gradient_check()
    good = gc.max_rel_error < 1e-4
    ok &= good
    print(f"{'PASS' if good else 'FAIL'} gradient check: {gc.n_coords} coords, "
          f"max relative error {gc.max_rel_error:.2e}")
    for name, exact, approx, good in oracle_check():
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} oracle {name}: VI {exact:.6f} LRTDP {approx:.6f}")
    return 0 if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="asnet", description="Action schema networks for probabilistic planning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("ground", help="ground a problem and describe the network wiring")
    g.add_argument("--domain", required=True)
    g.add_argument("--problem", required=True)
    g.add_argument("--dump", choices=["json"])
    g.add_argument("--no-prune", action="store_true", help="keep actions with static-false preconditions")
    g.add_argument("--layers", type=int, default=2)
    g.add_argument("--dh", type=int, default=16)
    g.set_defaults(func=cmd_ground)

    h = sub.add_parser("heur", help="heuristic value and landmarks at the initial state")
    h.add_argument("--domain", required=True)
    h.add_argument("--problem", required=True)
    h.add_argument("--state-from-init", action="store_true", help="evaluate at the initial state (default)")
    h.add_argument("--which", choices=["lmcut", "hadd", "hmax"], default="lmcut")
    h.set_defaults(func=cmd_heur)

    t = sub.add_parser("teacher", help="solve a problem with LRTDP")
    t.add_argument("--domain", required=True)
    t.add_argument("--problem", required=True)
    t.add_argument("--heuristic", choices=["lmcut", "hadd"], default="lmcut")
    t.add_argument("--epsilon", type=float, default=1e-4)
    t.add_argument("--penalty", type=float, default=500.0)
    t.add_argument("--time-limit", type=float, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_teacher)

    tr = sub.add_parser("train", help="train a network on a set of problems")
    tr.add_argument("--domain", required=True)
    tr.add_argument("--problems", required=True, nargs="+")
    tr.add_argument("--out", required=True)
    tr.add_argument("--heuristic", choices=["lmcut", "hadd"], default="lmcut")
    tr.add_argument("--no-landmarks", action="store_true")
    tr.add_argument("--time-limit", type=float, default=7200.0)
    tr.add_argument("--max-epochs", type=int, default=None)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--dh", type=int, default=16)
    tr.add_argument("--layers", type=int, default=2)
    tr.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate trained weights on a problem")
    e.add_argument("--weights", required=True)
    e.add_argument("--problem", required=True)
    e.add_argument("--domain", help="defaults to the domain stored in the weights file")
    e.add_argument("--trials", type=int, default=30)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--json", action="store_true")
    e.add_argument("--trace", metavar="FILE", help="write 'trial state-hash action cost' lines")
    e.set_defaults(func=cmd_eval)

    gn = sub.add_parser("gen", help="generate a benchmark problem")
    gn.add_argument("kind", choices=KINDS)
    gn.add_argument("--size", type=int, required=True)
    gn.add_argument("--seed", type=int, default=0)
    gn.add_argument("--out", required=True)
    gn.set_defaults(func=cmd_gen)

    st = sub.add_parser("selftest", help="gradient check and teacher-vs-oracle check")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("size", "trials", "dh", "layers"):
        v = getattr(args, name, None)
        if v is not None and v <= 0:
            parser.error(f"--{name} must be positive")
    try:
        return args.func(args)
    except (ASNetError, OSError, ValueError) as exc:
        print(f"asnet: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
