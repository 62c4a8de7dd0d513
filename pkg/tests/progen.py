"""Random program generators for property tests."""

from __future__ import annotations

import random

SCALARS = ("a", "b", "c")
OPS = ("+", "-", "*", "&", "|", "^")
CMPS = ("<", ">", "==", "!=", "<=")


def _expr(rng: random.Random, locals_: list[str], depth: int = 2) -> str:
    if depth == 0 or rng.random() < 0.3:
        if locals_ and rng.random() < 0.7:
            return rng.choice(locals_)
        return str(rng.randrange(0, 17))
    kind = rng.random()
    if kind < 0.7:
        return f"({_expr(rng, locals_, depth - 1)} {rng.choice(OPS)} {_expr(rng, locals_, depth - 1)})"
    c = f"{_expr(rng, locals_, 0)} {rng.choice(CMPS)} {_expr(rng, locals_, 0)}"
    return f"({c} ? {_expr(rng, locals_, depth - 1)} : {_expr(rng, locals_, depth - 1)})"


def single_thread_program(seed: int) -> str:
    """Straight-line and branching code over shared scalars and a small array."""
    rng = random.Random(seed)
    lines = []
    locals_: list[str] = []
    n = 0

    def stmts(k: int, ind: str, nest: int) -> None:
        nonlocal n
        for _ in range(k):
            r = rng.random()
            if r < 0.3 or not locals_:
                v = f"v{n}"
                n += 1
                src = rng.choice(SCALARS) if rng.random() < 0.5 else f"arr[{_expr(rng, locals_, 1)} & 3]"
                lines.append(f"{ind}uint32 {v} = {src};")
                locals_.append(v)
            elif r < 0.5:
                v = f"v{n}"
                n += 1
                lines.append(f"{ind}uint32 {v} = {_expr(rng, locals_)};")
                locals_.append(v)
            elif r < 0.7:
                lines.append(f"{ind}{rng.choice(SCALARS)} = {_expr(rng, locals_)};")
            elif r < 0.8:
                lines.append(f"{ind}arr[{rng.randrange(4)}] = {_expr(rng, locals_)};")
            elif nest < 2:
                cond = f"{_expr(rng, locals_, 1)} {rng.choice(CMPS)} {_expr(rng, locals_, 1)}"
                lines.append(f"{ind}if ({cond}) {{")
                saved = list(locals_)
                stmts(rng.randrange(1, 4), ind + "  ", nest + 1)
                locals_[:] = saved
                if rng.random() < 0.5:
                    lines.append(f"{ind}}} else {{")
                    stmts(rng.randrange(1, 4), ind + "  ", nest + 1)
                    locals_[:] = saved
                lines.append(f"{ind}}}")

    stmts(rng.randrange(3, 9), "  ", 0)
    body = "\n".join(lines)
    return f"uint32 a;\nuint32 b;\nuint32 c;\nuint32[4] arr;\n\nvoid main() {{\n{body}\n}}\n"


def tiny_threaded_program(seed: int, wrap_atomic: bool = False) -> tuple[str, int]:
    """pipelined_for over T <= 3 threads with <= 6 shared accesses and <= 1 atomic region.

    Returns the source and its thread count.
    """
    rng = random.Random(seed)
    threads = rng.randrange(1, 4)
    n_acc = rng.randrange(2, 7)
    threads = max(threads, 2) if n_acc > 3 else threads
    body = []
    locals_ = ["t"]
    written: set[str] = set()
    for k in range(n_acc):
        var = rng.choice(("x", "y", "z"))
        # one write site per variable: two sites writing one variable from different threads in
        # the same cycle is a write conflict, outside the model
        if rng.random() < 0.5 or var in written:
            body.append(f"uint32 r{k} = {var};")
            locals_.append(f"r{k}")
        else:
            reads = locals_[1:]
            val = f"({rng.choice(reads)} {rng.choice(OPS)} {_expr(rng, locals_, 0)})" if reads else _expr(rng, locals_, 1)
            body.append(f"{var} = {val};")
            written.add(var)
    if wrap_atomic:
        body = ["atomic {", *("  " + b for b in body), "}"]
    elif len(body) >= 2 and rng.random() < 0.5:
        i = rng.randrange(len(body) - 1)
        j = rng.randrange(i + 1, len(body))
        # an atomic block must not hide locals used after it
        inner = body[i:j + 1]
        defined = [b.split()[1] for b in inner if b.startswith("uint32 ")]
        later = " ".join(body[j + 1:])
        if not any(d in later for d in defined):
            body = body[:i] + ["atomic {", *("  " + b for b in inner), "}"] + body[j + 1:]
    text = "\n    ".join(body)
    src = (f"uint32 x;\nuint32 y;\nuint32 z;\n\nvoid main() {{\n  pipelined_for({threads}, [](uint32 t) {{\n"
           f"    {text}\n  }});\n}}\n")
    return src, threads
