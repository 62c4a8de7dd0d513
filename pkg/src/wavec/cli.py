"""Command-line driver: build, sim, check, bench, gen-data and dump."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus
from .checker import check_all
from .config import STALL_KINDS, BuildConfig, load_config_file, merge_config
from .driver import DATASET_KINDS, Build, bench, bench_table, build_source, build_variant, gen_data, run
from .errors import SimError, WavecError
from .simulator import load_trace, render_timeline


def _kv(text: str) -> tuple[str, int]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")
    k, v = text.split("=", 1)
    try:
        return k.strip(), int(v, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {k} must be an integer") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-D", "--logic-depth", type=int, default=None)
    p.add_argument("--const", type=_kv, action="append", default=[], metavar="NAME=V")
    p.add_argument("--fifo-cap", type=int, default=None)
    p.add_argument("--latency", type=_kv, action="append", default=[], metavar="OP=CYC")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default=None, help="output directory (default $WAVEC_OUT or ./out)")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stall", choices=STALL_KINDS, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-cycles", type=int, default=None)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavec", description="Wavefront-threaded hardware compiler and simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("build", help="compile to IR, schedule and graph artifacts")
    p.add_argument("program", help="source file or corpus variant name")
    _common(p)

    p = sub.add_parser("sim", help="simulate a program on a dataset")
    p.add_argument("program")
    p.add_argument("--data", default=None, help="JSON dataset file")
    p.add_argument("--dataset", choices=DATASET_KINDS, default=None, help="generated histogram dataset")
    p.add_argument("--timeline", default=None, help="sites=1,2 or vars=hist")
    _common(p)
    _sim_flags(p)

    p = sub.add_parser("check", help="validate a trace against the consistency model")
    p.add_argument("trace", help="trace file (.jsonl or .csv)")
    p.add_argument("--program", default=None, help="source or variant providing site metadata")
    _common(p)

    p = sub.add_parser("bench", help="compare variants over datasets")
    p.add_argument("--variants", nargs="+", default=list(corpus.HISTOGRAMS))
    p.add_argument("--data", nargs="*", default=None, help="JSON dataset files (default: generated pair)")
    p.add_argument("--json", action="store_true")
    _common(p)
    _sim_flags(p)

    p = sub.add_parser("gen-data", help="generate a histogram dataset")
    p.add_argument("kind", choices=DATASET_KINDS)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--float-weights", action="store_true")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("dump", help="print an artifact")
    p.add_argument("what", choices=("ir", "sched", "graph", "timeline", "dot", "resources"))
    p.add_argument("program")
    p.add_argument("--data", default=None)
    p.add_argument("--dataset", choices=DATASET_KINDS, default=None)
    p.add_argument("--timeline", default=None)
    _common(p)
    _sim_flags(p)
    return ap


# ---- helpers --------------------------------------------------------------------------------------


def config_from_args(a: argparse.Namespace) -> BuildConfig:
    file_values = load_config_file(a.config) if getattr(a, "config", None) else {}
    over = {
        "logic_depth": getattr(a, "logic_depth", None),
        "fifo_capacity": getattr(a, "fifo_cap", None),
        "consts": dict(getattr(a, "const", []) or []) or None,
        "latency": dict(getattr(a, "latency", []) or []) or None,
        "stall": getattr(a, "stall", None),
        "seed": getattr(a, "seed", None),
        "max_cycles": getattr(a, "max_cycles", None),
    }
    return merge_config(file_values, over)


def out_dir(a: argparse.Namespace) -> Path:
    d = Path(a.out or os.environ.get("WAVEC_OUT") or "out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def load_program(spec: str, cfg: BuildConfig) -> Build:
    path = Path(spec)
    if path.is_file():
        return build_source(path.read_text(), cfg, path.stem)
    if spec in corpus.VARIANTS:
        return build_variant(spec, cfg)
    raise WavecError(f"'{spec}' is neither a file nor a corpus variant ({', '.join(corpus.VARIANTS)})")


def load_inputs(a: argparse.Namespace, b: Build) -> dict:
    if getattr(a, "data", None):
        with open(a.data) as fh:
            return json.load(fh)
    if getattr(a, "dataset", None):
        return gen_data(a.dataset, b.consts.get("N", 512), b.consts.get("SIZE", 32), a.seed or 0)
    return {}


def _dump_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _timeline(trace, spec: str) -> str:
    key, _, val = spec.partition("=")
    items = [x for x in val.split(",") if x]
    if key == "sites" and all(x.isdigit() for x in items):
        return render_timeline(trace, sites=[int(x) for x in items])
    return render_timeline(trace, vars=items)


# ---- commands -------------------------------------------------------------------------------------


def cmd_build(a) -> int:
    cfg = config_from_args(a)
    b = load_program(a.program, cfg)
    d = out_dir(a)
    _dump_json(b.ir.to_json(), d / f"{b.name}.ir.json")
    _dump_json(b.schedule.to_json(), d / f"{b.name}.sched.json")
    _dump_json(b.graph.to_json(), d / f"{b.name}.graph.json")
    _dump_json(b.resources.to_json(), d / f"{b.name}.resources.json")
    print(f"{b.name}: {len(b.schedule.blocks)} blocks, {b.resources.stage_count} stages -> {d}")
    return 0


def cmd_sim(a) -> int:
    cfg = config_from_args(a)
    b = load_program(a.program, cfg)
    tr = run(b, load_inputs(a, b), cfg)
    d = out_dir(a)
    (d / f"{b.name}.trace.jsonl").write_text(tr.to_jsonl())
    report = {"schema": 1, "program": b.name, "cycles": tr.cycles, "threads_created": tr.threads_created,
              "resources": b.resources.to_json(), "lines_of_code": b.lines_of_code,
              "final_state": tr.summary()["final_state"]}
    _dump_json(report, d / f"{b.name}.report.json")
    print(f"cycles {tr.cycles}")
    if a.timeline:
        print(_timeline(tr, a.timeline), end="")
    return 0


def cmd_check(a) -> int:
    tr = load_trace(a.trace)
    ir = load_program(a.program, config_from_args(a)).ir if a.program else None
    diags = check_all(tr, ir)
    for v in diags:
        print(v)
    print("ok" if not diags else f"{len(diags)} violation(s)")
    return 0 if not diags else 1


def cmd_bench(a) -> int:
    cfg = config_from_args(a)
    if a.data:
        datasets = {}
        for p in a.data:
            with open(p) as fh:
                datasets[Path(p).stem] = json.load(fh)
    else:
        n, size = cfg.consts.get("N", 512), cfg.consts.get("SIZE", 32)
        datasets = {k: gen_data(k, n, size, cfg.seed) for k in ("conflict-free", "all-conflict")}
    rows = bench(a.variants, datasets, cfg)
    if a.json:
        print(json.dumps({"schema": 1, "rows": [r.to_json() for r in rows]}, indent=1, sort_keys=True))
    else:
        print(bench_table(rows), end="")
    return 0


def cmd_gen_data(a) -> int:
    n = a.n if a.n is not None else corpus.DEFAULT_CONSTS["N"]
    size = a.size if a.size is not None else corpus.DEFAULT_CONSTS["SIZE"]
    text = json.dumps(gen_data(a.kind, n, size, a.seed, a.float_weights)) + "\n"
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_dump(a) -> int:
    cfg = config_from_args(a)
    b = load_program(a.program, cfg)
    if a.what == "timeline":
        tr = run(b, load_inputs(a, b), cfg)
        print(_timeline(tr, a.timeline) if a.timeline else render_timeline(tr), end="")
        return 0
    if a.what == "dot":
        print(b.graph.to_dot(), end="")
        return 0
    obj = {"ir": b.ir.to_json, "sched": b.schedule.to_json, "graph": b.graph.to_json,
           "resources": b.resources.to_json}[a.what]()
    print(json.dumps(obj, indent=1, sort_keys=True))
    return 0


COMMANDS = {"build": cmd_build, "sim": cmd_sim, "check": cmd_check, "bench": cmd_bench, "gen-data": cmd_gen_data,
            "dump": cmd_dump}


def main(argv: list[str] | None = None) -> int:
    a = make_parser().parse_args(argv)
    try:
        return COMMANDS[a.cmd](a)
    except SimError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (WavecError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
