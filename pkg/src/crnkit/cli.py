"""Command-line entry point.

Subcommands wire the library together:

* ``crnkit simulate``  - stochastic or ODE trajectories from a .crn file
* ``crnkit decide``    - halting/stable verdict of a decider file on an input
* ``crnkit compile``   - counter automaton / predicate atom / strand network
* ``crnkit check``     - conservation, speed-fault and co-simulation reports

Every invocation writes a run manifest (arguments, input hashes, seed,
version, timing, outputs) next to its outputs, so results can be
reproduced bit for bit.  Exit codes are a stable contract:

    0 success / verdict accept        3 semantic error (e.g. missing #init)
    1 verdict reject                  4 runtime failure (stiff ODE, timeout)
    2 parse or usage error            5 undecided / inconclusive
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from pathlib import Path

from . import __version__, continuous, counter, decide, dsd, reach, stochastic
from .core import (Crn, CrnError, CrnDocument, DiscreteState, ParseError,
                   conservation_vector, parse_crn, parse_state, render_crn)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_PARSE = 2
EXIT_SEMANTIC = 3
EXIT_RUNTIME = 4
EXIT_UNDECIDED = 5


class CliSemanticError(CrnError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Runner:
    """Collects outputs and writes the manifest on exit."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = Path(getattr(args, "out_dir", ".") or ".")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.started = time.time()

    def write(self, name: str, content: str) -> Path:
        path = self.out_dir / name
        path.write_text(content)
        self.outputs.append(str(path))
        return path

    def manifest(self, inputs: list[Path]) -> None:
        payload = {
            "tool": "crnkit",
            "version": __version__,
            "argv": sys.argv[1:],
            "seed": getattr(self.args, "seed", None),
            "rng": stochastic.RNG_ALGORITHM,
            "inputs": {str(p): _sha256(p) for p in inputs if p.exists()},
            "outputs": self.outputs,
            "elapsed_seconds": round(time.time() - self.started, 6),
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")


def _load_document(path_text: str) -> tuple[CrnDocument, Path]:
    path = Path(path_text)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    return parse_crn(path.read_text()), path


def _resolve_init(doc: CrnDocument, args) -> DiscreteState:
    if getattr(args, "init", None):
        return parse_state(doc.crn, args.init)
    if doc.init is None:
        raise CliSemanticError("no initial state: file has no #init and no --init given")
    return doc.init


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    doc, path = _load_document(args.file)
    runner = Runner(args)
    init = _resolve_init(doc, args)
    base = path.stem
    if args.mode == "ssa":
        volume = args.volume if args.volume is not None else (doc.volume or 1.0)
        config = stochastic.StochasticConfig(
            volume=volume, rng_seed=args.seed, max_time=args.t or 1e18,
            max_steps=args.max_steps)
        summaries = []
        for run in range(args.runs):
            run_config = stochastic.StochasticConfig(
                volume=volume, rng_seed=args.seed + run, max_time=config.max_time,
                max_steps=args.max_steps)
            traj = stochastic.simulate(doc.crn, init, run_config)
            name = f"{base}_run{run:04d}.{args.format}"
            runner.write(name, traj.to_csv() if args.format == "csv" else traj.to_json())
            summaries.append({
                "run": run, "seed": run_config.rng_seed, "events": len(traj.events),
                "final_time": traj.final_time, "stop_reason": traj.stop_reason,
                "final_state": doc.crn.state_to_map(traj.final_state),
            })
        runner.write(f"{base}_summary.json", json.dumps(summaries, indent=2) + "\n")
    else:
        x0 = {name: float(c) for name, c in doc.crn.state_to_map(init).items()}
        try:
            traj = continuous.integrate(doc.crn, x0, args.t or 50.0, args.tol)
        except continuous.IntegrationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        runner.write(f"{base}_ode.csv", traj.to_csv())
        runner.write(f"{base}_ode.json", json.dumps({
            "reached_fixpoint": traj.reached_fixpoint,
            "final_time": float(traj.times[-1]),
            "final_state": traj.final_map(),
        }, indent=2) + "\n")
    runner.manifest([path])
    return EXIT_OK


def cmd_decide(args) -> int:
    doc, path = _load_document(args.file)
    if not doc.input_species:
        raise CliSemanticError("file declares no #input species")
    crd = decide.Crd(doc.crn, doc.input_species,
                     frozenset(doc.voters0), frozenset(doc.voters1))
    state = parse_state(doc.crn, args.input)
    counts = doc.crn.state_to_map(state)
    extra = set(counts) - set(doc.input_species)
    if extra:
        raise CliSemanticError(f"input contains non-input species: {sorted(extra)}")
    if sum(counts.values()) == 0:
        raise CliSemanticError("input state must be nonzero")
    fn = decide.halting_verdict if args.mode == "halting" else decide.stable_verdict
    verdict = fn(crd, counts, args.bound)
    print(verdict.to_json(doc.crn))
    if verdict.kind is decide.VerdictKind.ACCEPT:
        return EXIT_OK
    if verdict.kind is decide.VerdictKind.REJECT:
        return EXIT_REJECT
    return EXIT_UNDECIDED


_PREDICATE_RE = re.compile(r"(mod|leq)\(([^;]*);([^;)]*)(?:;([^)]*))?\)\s*\Z")


def parse_predicate_atom(text: str) -> decide.ThresholdAtom | decide.ModAtom:
    """``leq(a1,a2,...;b)`` or ``mod(a1,a2,...;b;m)``."""
    m = _PREDICATE_RE.match(text.strip())
    if not m:
        raise ParseError(f"bad predicate atom {text!r}")
    kind, a_text, b_text, m_text = m.groups()
    try:
        a = tuple(int(x) for x in a_text.split(",") if x.strip())
        b = int(b_text)
        if kind == "mod":
            if m_text is None:
                raise ParseError("mod atom needs a modulus")
            return decide.ModAtom(a, b, int(m_text))
        if m_text is not None:
            raise ParseError("leq atom takes no modulus")
        return decide.ThresholdAtom(a, b)
    except ValueError:
        raise ParseError(f"bad integers in predicate atom {text!r}")


def cmd_compile(args) -> int:
    runner = Runner(args)
    inputs: list[Path] = []
    if args.source_kind == "ca":
        path = Path(args.source)
        if not path.exists():
            raise ParseError(f"no such file: {path}")
        inputs.append(path)
        ca = counter.parse_ca(path.read_text())
        compiled = counter.compile_ca(ca, args.l)
        init = counter.initial_state(compiled, args.nu, args.n_d)
        doc = CrnDocument(crn=compiled.crn, init=init)
        out = args.out or f"{path.stem}_l{args.l}.crn"
        text = (f"% compiled from counter automaton {path.name}, "
                f"clock length {args.l}\n" + render_crn(doc))
        runner.write(out, text)
    elif args.source_kind == "predicate":
        atom = parse_predicate_atom(args.source)
        crd = decide.compile_atom(atom)
        doc = CrnDocument(crn=crd.crn, input_species=crd.input_species,
                          voters0=tuple(sorted(crd.voters0)),
                          voters1=tuple(sorted(crd.voters1)))
        out = args.out or "predicate.crn"
        runner.write(out, f"% compiled from predicate atom {args.source}\n"
                     + render_crn(doc))
    else:  # dsd
        doc_in, path = _load_document(args.source)
        inputs.append(path)
        prog = dsd.compile_dsd(doc_in.crn, args.fuel)
        base = args.out or f"{path.stem}_dsd"
        base = base[:-4] if base.endswith(".crn") else base
        impl_doc = CrnDocument(
            crn=prog.implementation,
            init=prog.initial_state(doc_in.init) if doc_in.init is not None else None)
        runner.write(base + ".crn",
                     f"% strand-displacement implementation of {path.name}\n"
                     + render_crn(impl_doc))
        runner.write(base + ".json", prog.to_json() + "\n")
    runner.manifest(inputs)
    return EXIT_OK


def cmd_check(args) -> int:
    runner = Runner(args)
    doc, path = _load_document(args.file)
    if args.what == "conservation":
        v = conservation_vector(doc.crn)
        report = {
            "mass_conserving": v is not None,
            "conservation_vector": (dict(zip(doc.crn.species_names, v))
                                    if v is not None else None),
        }
        print(json.dumps(report, indent=2))
        runner.write("conservation.json", json.dumps(report, indent=2) + "\n")
        runner.manifest([path])
        return EXIT_OK
    if args.what == "speedfault":
        if not doc.input_species:
            raise CliSemanticError("file declares no #input species")
        crd = decide.Crd(doc.crn, doc.input_species,
                         frozenset(doc.voters0), frozenset(doc.voters1))
        state = parse_state(doc.crn, args.input)
        report = reach.speed_fault_witness(
            crd, doc.crn.state_to_map(state), args.k, args.bound)
        payload = {
            "k": args.k,
            "outcome": report.kind,
            "witness": (doc.crn.state_to_map(report.witness)
                        if report.witness is not None else None),
            "states_explored": report.states_explored,
        }
        print(json.dumps(payload, indent=2))
        runner.write("speedfault.json", json.dumps(payload, indent=2) + "\n")
        runner.manifest([path])
        if report.kind == "inconclusive":
            return EXIT_UNDECIDED
        return EXIT_OK
    # cosim
    init = _resolve_init(doc, args)
    prog = dsd.compile_dsd(doc.crn, args.fuel)
    config = stochastic.StochasticConfig(
        volume=args.volume if args.volume is not None else (doc.volume or 1.0),
        rng_seed=args.seed, max_time=args.t or 1000.0)
    report = dsd.cosimulate_check(prog, init, config, args.runs)
    print(report.to_text(doc.crn))
    runner.write("cosim.json", json.dumps({
        "passed": report.passed,
        "runs": report.n_runs,
        "fuel_exhausted": report.fuel_exhausted_runs,
        "projection_violations": report.projection_violations,
        "runs_ending_pending": report.runs_ending_pending,
        "audits_balanced": report.audits_balanced,
        "matched_terminal_runs": report.matched_terminal_runs,
        "final_states": {doc.crn.format_state(s) or "0": n
                         for s, n in report.final_states.items()},
    }, indent=2) + "\n")
    runner.manifest([path])
    return EXIT_OK if report.passed else EXIT_RUNTIME


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crnkit",
        description="chemical reaction networks: simulate, decide, compile, check")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", dest="out_dir", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--jobs", type=int, default=1, help="reserved; runs are sequential")

    p = sub.add_parser("simulate", help="sample stochastic or ODE trajectories")
    p.add_argument("file")
    p.add_argument("--mode", choices=("ssa", "ode"), default="ssa")
    p.add_argument("--t", type=float, default=None, help="time horizon")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--volume", type=float, default=None)
    p.add_argument("--init", default=None, help="override #init, e.g. '2X + 3Y'")
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--tol", type=float, default=1e-8)
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("decide", help="verdict of a decider on an input state")
    p.add_argument("file")
    p.add_argument("--input", required=True, help="input state, e.g. '2X + 3Y'")
    p.add_argument("--mode", choices=("halting", "stable"), default="halting")
    p.add_argument("--bound", type=int, default=reach.DEFAULT_BOUND)
    common(p)
    p.set_defaults(fn=cmd_decide)

    p = sub.add_parser("compile", help="compile automata/predicates/strand networks")
    p.add_argument("--from", dest="source_kind", choices=("ca", "predicate", "dsd"),
                   required=True)
    p.add_argument("source", help="source file (ca/dsd) or atom text (predicate)")
    p.add_argument("--l", type=int, default=1, help="clock length for ca")
    p.add_argument("--nu", type=int, default=0, help="input value for the ca #init")
    p.add_argument("--n-d", dest="n_d", type=int, default=None)
    p.add_argument("--fuel", type=int, default=100)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("check", help="conservation / speedfault / cosim analyses")
    p.add_argument("file")
    p.add_argument("--what", choices=("conservation", "speedfault", "cosim"),
                   required=True)
    p.add_argument("--input", default=None, help="input state for speedfault")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--bound", type=int, default=reach.DEFAULT_BOUND)
    p.add_argument("--fuel", type=int, default=100)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--volume", type=float, default=None)
    p.add_argument("--init", default=None)
    common(p)
    p.set_defaults(fn=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CliSemanticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except CrnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
