"""Source pretty-printer.  Output reparses to a structurally equal AST."""

from __future__ import annotations

from .syntax import (
    Acc, Alloc, Assert, Assign, Binary, Block, BoolLit, Call, CallStmt, CondF, Conj, Expr,
    FieldAccess, FieldWrite, Fold, Formula, FunctionDecl, GradualFormula, If, IntLit,
    MethodDecl, NullLit, PredicateDecl, PredInst, Program, Pure, RefType, ResultRef, Return,
    Stmt, StructDecl, Ternary, Type, Typedef, Unary, Unfold, Unfolding, VarDecl, VarRef, While,
    is_true,
)

_PREC = {"||": 2, "&&": 3, "==": 4, "!=": 4, "<": 5, "<=": 5, ">": 5, ">=": 5,
         "+": 6, "-": 6, "*": 7, "/": 7, "%": 7}
_TERNARY, _UNARY, _ATOM = 1, 8, 10


def _paren(s: str, prec: int, ctx: int) -> str:
    return f"({s})" if prec < ctx else s


def expr_str(e: Expr, ctx: int = 0) -> str:
    match e:
        case IntLit(value=v):
            return str(v) if v >= 0 else _paren(f"-{-v}", _UNARY, ctx)
        case BoolLit(value=v):
            return "true" if v else "false"
        case NullLit():
            return "NULL"
        case VarRef(name=n):
            return n
        case ResultRef():
            return "\\result"
        case FieldAccess(obj=o, field=f):
            return f"{expr_str(o, _ATOM)}->{f}"
        case Unary(op=op, arg=a):
            inner = expr_str(a, _UNARY)
            sep = " " if inner.startswith(op) or (op == "-" and inner.startswith("-")) else ""
            return _paren(f"{op}{sep}{inner}", _UNARY, ctx)
        case Binary(op=op, left=l, right=r):
            p = _PREC[op]
            return _paren(f"{expr_str(l, p)} {op} {expr_str(r, p + 1)}", p, ctx)
        case Ternary(cond=c, then=t, other=o):
            s = f"{expr_str(c, 2)} ? {expr_str(t, 0)} : {expr_str(o, 1)}"
            return _paren(s, _TERNARY, ctx)
        case Call(name=n, args=args):
            return f"{n}({', '.join(expr_str(a) for a in args)})"
        case Unfolding(pred=p, args=args, body=b):
            s = f"unfolding {p}({', '.join(expr_str(a) for a in args)}) in {expr_str(b, 0)}"
            return _paren(s, _TERNARY, ctx)
        case Alloc(struct=s):
            return f"alloc(struct {s})"
    raise TypeError(f"not an expression: {e!r}")


def formula_str(f: Formula, ctx: int = 0) -> str:
    match f:
        case Pure(expr=e):
            return expr_str(e, ctx)
        case Acc(target=t):
            return f"acc({expr_str(t)})"
        case PredInst(name=n, args=args):
            return f"{n}({', '.join(expr_str(a) for a in args)})"
        case Conj(left=l, right=r):
            return _paren(f"{formula_str(l, 3)} && {formula_str(r, 4)}", 3, ctx)
        case CondF(cond=c, then=t, other=o):
            s = f"{expr_str(c, 2)} ? {formula_str(t, 0)} : {formula_str(o, 1)}"
            return _paren(s, _TERNARY, ctx)
    raise TypeError(f"not a formula: {f!r}")


def gradual_str(g: GradualFormula) -> str:
    if not g.imprecise:
        return formula_str(g.body)
    if is_true(g.body):
        return "?"
    return f"? && {formula_str(g.body, 3)}"


def type_str(t: Type) -> str:
    if isinstance(t, RefType):
        return f"struct {t.struct}*"
    return t.name


def _stmt_lines(s: Stmt, ind: str) -> list[str]:
    match s:
        case Block(stmts=ss):
            out = [ind + "{"]
            for x in ss:
                out += _stmt_lines(x, ind + "  ")
            return out + [ind + "}"]
        case VarDecl(type=t, name=n, init=i):
            init = "" if i is None else f" = {expr_str(i)}"
            return [f"{ind}{type_str(t)} {n}{init};"]
        case Assign(target=t, value=v):
            return [f"{ind}{t} = {expr_str(v)};"]
        case FieldWrite(target=t, value=v):
            return [f"{ind}{expr_str(t)} = {expr_str(v)};"]
        case CallStmt(target=t, name=n, args=args):
            call = f"{n}({', '.join(expr_str(a) for a in args)})"
            return [f"{ind}{t} = {call};" if t else f"{ind}{call};"]
        case If(cond=c, then=t, other=o):
            out = [f"{ind}if ({expr_str(c)})"] + _stmt_lines(t, ind)
            if o is not None:
                out += [f"{ind}else"] + _stmt_lines(o, ind)
            return out
        case While(cond=c, invariants=invs, body=b):
            out = [f"{ind}while ({expr_str(c)})"]
            out += [f"{ind}  //@ loop_invariant {gradual_str(i)};" for i in invs]
            return out + _stmt_lines(b, ind)
        case Assert(formula=f):
            return [f"{ind}//@ assert {gradual_str(f)};"]
        case Fold(pred=p, args=args):
            return [f"{ind}//@ fold {p}({', '.join(expr_str(a) for a in args)});"]
        case Unfold(pred=p, args=args):
            return [f"{ind}//@ unfold {p}({', '.join(expr_str(a) for a in args)});"]
        case Return(value=v):
            return [f"{ind}return;" if v is None else f"{ind}return {expr_str(v)};"]
    raise TypeError(f"not a statement: {s!r}")


def stmt_str(s: Stmt) -> str:
    return "\n".join(_stmt_lines(s, ""))


def _params(ps) -> str:
    return ", ".join(f"{type_str(p.type)} {p.name}" for p in ps)


def program_str(prog: Program) -> str:
    out: list[str] = []
    for d in prog.decls:
        match d:
            case StructDecl(name=n, fields=fs):
                out.append(f"struct {n} {{")
                out += [f"  {type_str(t)} {f};" for f, t in fs]
                out.append("};")
            case Typedef(struct=s, alias=a):
                out.append(f"typedef struct {s} {a};")
            case PredicateDecl(name=n, params=ps, body=b):
                out.append(f"//@ predicate {n}({_params(ps)}) = {gradual_str(b)};")
            case FunctionDecl() | MethodDecl():
                out.append(f"{type_str(d.ret)} {d.name}({_params(d.params)})")
                if isinstance(d, FunctionDecl):
                    out.append("  //@ pure;")
                out += [f"  //@ requires {gradual_str(r)};" for r in d.requires]
                out += [f"  //@ ensures {gradual_str(e)};" for e in d.ensures]
                body = d.block if isinstance(d, FunctionDecl) else d.body
                out += _stmt_lines(body, "")
        out.append("")
    return "\n".join(out)
