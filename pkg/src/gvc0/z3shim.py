"""Minimal `z3 -in` stand-in: an SMT-LIB 2 read-eval-print loop over stdin.

Used when no z3 executable is on PATH but the z3 library is importable.
Each complete top-level command is handed to Z3_eval_smtlib2_string on a
single context, so declarations and the assertion stack persist.
"""

import sys


def commands(stream):
    buf: list[str] = []
    depth = 0
    in_str = in_quote = in_comment = False
    for line in stream:
        for ch in line:
            if in_comment:
                if ch == "\n":
                    in_comment = False
                continue
            if in_str:
                buf.append(ch)
                in_str = ch != '"'
                continue
            if in_quote:
                buf.append(ch)
                in_quote = ch != "|"
                continue
            if ch == ";":
                in_comment = True
                continue
            if ch == '"':
                in_str = True
            elif ch == "|":
                in_quote = True
            elif ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            if depth == 0 and ch.isspace() and not buf:
                continue
            buf.append(ch)
            if depth == 0 and ch == ")":
                yield "".join(buf)
                buf = []


def main() -> None:
    import z3

    ctx = z3.Context()
    out = sys.stdout
    for cmd in commands(sys.stdin):
        if cmd.strip() == "(exit)":
            break
        try:
            res = z3.Z3_eval_smtlib2_string(ctx.ref(), cmd)
        except z3.Z3Exception as exc:
            msg = exc.value
            res = msg.decode() if isinstance(msg, bytes) else str(msg)
        if res:
            out.write(res if res.endswith("\n") else res + "\n")
        out.flush()


if __name__ == "__main__":
    main()
