"""Lexer and recursive-descent parser for annotated C0 sources."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import ParseError
from .syntax import (
    BOOL, INT, VOID, Acc, Alloc, Assert, Assign, Binary, Block, BoolLit, Call, CallStmt,
    CondF, Conj, Expr, FieldAccess, FieldWrite, Fold, Formula, FunctionDecl, GradualFormula,
    If, IntLit, Loc, MethodDecl, Node, NullLit, Param, PredicateDecl, PredInst, Program, Pure,
    RefType, ResultRef, Return, Stmt, StructDecl, Ternary, Type, Typedef, Unary, Unfold,
    Unfolding, VarDecl, VarRef, While, walk,
)


@dataclass
class Token:
    kind: str  # ID, INT, OP, ANNO, END, EOF
    value: str
    line: int
    col: int

    @property
    def loc(self) -> Loc:
        return (self.line, self.col)


_OPS = sorted(
    ["->", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
     "(", ")", "{", "}", ";", ",", "?", ":", "=", "<", ">", "+", "-", "*", "/",
     "%", "!", "[", "]"],
    key=len, reverse=True,
)
_ID = re.compile(r"\\?[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    # None outside annotations, "line" inside //@, "block" inside /*@ @*/
    anno: Optional[str] = None
    anno_loc = (0, 0)
    n = len(src)

    def adv(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if src[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = src[i]
        if c == "\n":
            if anno == "line":
                toks.append(Token("END", "", line, col))
                anno = None
            adv(1)
            continue
        if c in " \t\r":
            adv(1)
            continue
        if anno == "block" and src.startswith("@*/", i):
            toks.append(Token("END", "", line, col))
            anno = None
            adv(3)
            continue
        if anno is None and src.startswith("//@", i):
            toks.append(Token("ANNO", "", line, col))
            anno = "line"
            adv(3)
            continue
        if anno is None and src.startswith("/*@", i):
            toks.append(Token("ANNO", "", line, col))
            anno = "block"
            anno_loc = (line, col)
            adv(3)
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                adv(1)
            continue
        if src.startswith("/*", i):
            start = (line, col)
            j = src.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated comment", start)
            adv(j + 2 - i)
            continue
        if c == "#" and anno is None and (col == 1 or src[i - col + 1:i].strip() == ""):
            # preprocessor-style directives (#use) are ignored
            while i < n and src[i] != "\n":
                adv(1)
            continue
        m = _ID.match(src, i)
        if m:
            toks.append(Token("ID", m.group(), line, col))
            adv(len(m.group()))
            continue
        m = _INT.match(src, i)
        if m:
            toks.append(Token("INT", m.group(), line, col))
            adv(len(m.group()))
            continue
        for op in _OPS:
            if src.startswith(op, i):
                toks.append(Token("OP", op, line, col))
                adv(len(op))
                break
        else:
            raise ParseError(f"unexpected character {c!r}", (line, col))
    if anno == "block":
        raise ParseError("unterminated annotation comment", anno_loc)
    if anno == "line":
        toks.append(Token("END", "", line, col))
    toks.append(Token("EOF", "", line, col))
    return toks


_KEYWORDS = {"struct", "typedef", "int", "bool", "void", "if", "else", "while", "return",
             "true", "false", "NULL", "alloc", "acc", "unfolding", "assert"}
_ASSIGN_OPS = {"+=": "+", "-=": "-", "*=": "*"}
_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.pos = 0
        self.next_id = 0
        self.typedefs: dict[str, str] = {}
        self.predicates = self._scan_predicates()

    # -- token helpers -----------------------------------------------------

    def _scan_predicates(self) -> set[str]:
        names = set()
        for a, b, c in zip(self.toks, self.toks[1:], self.toks[2:]):
            if a.kind == "ANNO" and b.value == "predicate" and c.kind == "ID":
                names.add(c.value)
        return names

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, value: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "ID") and t.value == value

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, value: str) -> Token:
        if not self.at(value):
            self.error(f"expected {value!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            self.error(f"expected {what}")
        return self.advance()

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ID" or t.value in _KEYWORDS:
            self.error("expected identifier")
        return self.advance()

    def error(self, msg: str) -> None:
        t = self.tok
        found = {"EOF": "end of input", "END": "end of annotation", "ANNO": "annotation"}.get(
            t.kind, repr(t.value))
        raise ParseError(f"{msg}, found {found}", t.loc)

    def mk(self, node: Node, loc: Loc) -> Node:
        node.loc = loc
        node.nid = self.next_id
        self.next_id += 1
        return node

    # -- types -------------------------------------------------------------

    def at_type(self) -> bool:
        t = self.tok
        if t.kind != "ID":
            return False
        if t.value in ("int", "bool", "void", "struct"):
            return True
        return t.value in self.typedefs and self.peek().value == "*"

    def parse_type(self) -> Type:
        t = self.advance()
        if t.value == "int":
            return INT
        if t.value == "bool":
            return BOOL
        if t.value == "void":
            return VOID
        if t.value == "struct":
            name = self.ident().value
            self.expect("*")
            return RefType(name)
        if t.value in self.typedefs:
            self.expect("*")
            return RefType(self.typedefs[t.value])
        self.pos -= 1
        self.error("expected type")
        raise AssertionError

    # -- top level ---------------------------------------------------------

    def parse_program(self) -> Program:
        decls = []
        start = self.tok.loc
        while self.tok.kind != "EOF":
            if self.tok.kind == "ANNO":
                decls.append(self.parse_predicate())
            elif self.at("struct") and self.peek(2).value == "{":
                decls.append(self.parse_struct())
            elif self.at("typedef"):
                decls.append(self.parse_typedef())
            else:
                decls.append(self.parse_callable())
        return self.mk(Program(decls), start)

    def parse_struct(self) -> StructDecl:
        loc = self.expect("struct").loc
        name = self.ident().value
        self.expect("{")
        fields = []
        while not self.at("}"):
            ty = self.parse_type()
            fields.append((self.ident().value, ty))
            self.expect(";")
        self.expect("}")
        self.expect(";")
        return self.mk(StructDecl(name, fields), loc)

    def parse_typedef(self) -> Typedef:
        loc = self.expect("typedef").loc
        self.expect("struct")
        struct = self.ident().value
        alias = self.ident().value
        self.expect(";")
        self.typedefs[alias] = struct
        return self.mk(Typedef(struct, alias), loc)

    def parse_predicate(self) -> PredicateDecl:
        self.expect_kind("ANNO", "annotation")
        loc = self.tok.loc
        if not self.at("predicate"):
            self.error("expected predicate declaration")
        self.advance()
        name = self.ident().value
        params = self.parse_params()
        self.expect("=")
        body = self.parse_formula()
        self.expect(";")
        self.expect_kind("END", "end of annotation")
        return self.mk(PredicateDecl(name, params, body), loc)

    def parse_params(self) -> list[Param]:
        self.expect("(")
        params = []
        while not self.at(")"):
            loc = self.tok.loc
            ty = self.parse_type()
            params.append(self.mk(Param(ty, self.ident().value), loc))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        return params

    def parse_callable(self):
        loc = self.tok.loc
        if not self.at_type():
            self.error("expected declaration")
        ret = self.parse_type()
        name = self.ident().value
        params = self.parse_params()
        pure = False
        requires: list[GradualFormula] = []
        ensures: list[GradualFormula] = []
        while self.tok.kind == "ANNO":
            self.advance()
            while self.tok.kind != "END":
                kw = self.tok
                if kw.value == "pure":
                    self.advance()
                    pure = True
                elif kw.value == "requires":
                    self.advance()
                    requires.append(self.parse_formula())
                elif kw.value == "ensures":
                    self.advance()
                    ensures.append(self.parse_formula())
                else:
                    self.error("expected 'pure', 'requires' or 'ensures'")
                self.expect(";")
            self.advance()
        block = self.parse_block()
        if pure:
            body = None
            if len(block.stmts) == 1 and isinstance(block.stmts[0], Return):
                body = block.stmts[0].value
            return self.mk(FunctionDecl(name, params, ret, requires, ensures, block, body), loc)
        return self.mk(MethodDecl(name, params, ret, requires, ensures, block), loc)

    # -- formulas ------------------------------------------------------------

    def parse_formula(self) -> GradualFormula:
        loc = self.tok.loc
        imprecise = False
        if self.at("?"):
            self.advance()
            imprecise = True
            if not self.at("&&"):
                return self.mk(GradualFormula(True, self.mk(Pure(self.mk(BoolLit(True), loc)), loc)), loc)
            self.advance()
        e = self.parse_expr()
        return self.mk(GradualFormula(imprecise, self.to_formula(e)), loc)

    def spatial(self, e: Expr) -> bool:
        match e:
            case AccExpr():
                return True
            case Call(name=n) if n in self.predicates:
                return True
            case Binary(op="&&", left=l, right=r):
                return self.spatial(l) or self.spatial(r)
            case Ternary(then=t, other=o):
                return self.spatial(t) or self.spatial(o)
        return False

    def to_formula(self, e: Expr) -> Formula:
        match e:
            case Binary(op="&&", left=l, right=r):
                return self.mk(Conj(self.to_formula(l), self.to_formula(r)), e.loc)
            case AccExpr(target=t):
                return self.mk(Acc(t), e.loc)
            case Call(name=n, args=args) if n in self.predicates:
                return self.mk(PredInst(n, args), e.loc)
            case Ternary(cond=c, then=t, other=o) if self.spatial(t) or self.spatial(o):
                return self.mk(CondF(c, self.to_formula(t), self.to_formula(o)), e.loc)
        return self.mk(Pure(e), e.loc)

    # -- statements ----------------------------------------------------------

    def parse_block(self) -> Block:
        loc = self.expect("{").loc
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "EOF":
                self.error("expected '}'")
            stmts.extend(self.parse_stmt())
        self.expect("}")
        return self.mk(Block(stmts), loc)

    def parse_body(self) -> Block:
        if self.at("{"):
            return self.parse_block()
        loc = self.tok.loc
        return self.mk(Block(self.parse_stmt()), loc)

    def parse_stmt(self) -> list[Stmt]:
        t = self.tok
        loc = t.loc
        if t.kind == "ANNO":
            self.advance()
            out = []
            while self.tok.kind != "END":
                out.append(self.parse_ghost_stmt())
            self.advance()
            return out
        if self.at("{"):
            return [self.parse_block()]
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_body()
            other = None
            if self.at("else"):
                self.advance()
                other = self.parse_body()
            return [self.mk(If(cond, then, other), loc)]
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            invs = []
            while self.tok.kind == "ANNO":
                self.advance()
                while self.tok.kind != "END":
                    if not self.at("loop_invariant"):
                        self.error("expected 'loop_invariant'")
                    self.advance()
                    invs.append(self.parse_formula())
                    self.expect(";")
                self.advance()
            body = self.parse_body()
            return [self.mk(While(cond, invs, body), loc)]
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return [self.mk(Return(value), loc)]
        if self.at("assert") and self.peek().value == "(":
            self.advance()
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return [self.mk(Assert(self.mk(GradualFormula(False, self.to_formula(e)), e.loc)), loc)]
        if self.at_type():
            ty = self.parse_type()
            name = self.ident().value
            init = None
            if self.at("="):
                self.advance()
                init = self.parse_expr()
            self.expect(";")
            return [self.mk(VarDecl(ty, name, init), loc)]
        s = self.parse_simple()
        self.expect(";")
        return [s]

    def parse_simple(self) -> Stmt:
        loc = self.tok.loc
        lhs = self.parse_expr()
        if self.at("="):
            self.advance()
            rhs = self.parse_expr()
        elif self.tok.value in _ASSIGN_OPS:
            op = _ASSIGN_OPS[self.advance().value]
            rhs = self.mk(Binary(op, lhs, self.parse_expr()), loc)
        elif self.at("++") or self.at("--"):
            op = "+" if self.advance().value == "++" else "-"
            rhs = self.mk(Binary(op, lhs, self.mk(IntLit(1), loc)), loc)
        else:
            if isinstance(lhs, Call):
                return self.mk(CallStmt(None, lhs.name, lhs.args), loc)
            raise ParseError("expected statement", loc)
        if isinstance(lhs, VarRef):
            return self.mk(Assign(lhs.name, rhs), loc)
        if isinstance(lhs, FieldAccess):
            return self.mk(FieldWrite(lhs, rhs), loc)
        raise ParseError("invalid assignment target", loc)

    def parse_ghost_stmt(self) -> Stmt:
        loc = self.tok.loc
        kw = self.tok.value
        if kw == "assert":
            self.advance()
            f = self.parse_formula()
            self.expect(";")
            return self.mk(Assert(f), loc)
        if kw in ("fold", "unfold"):
            self.advance()
            name = self.ident().value
            args = self.parse_args()
            self.expect(";")
            cls = Fold if kw == "fold" else Unfold
            return self.mk(cls(name, args), loc)
        self.error("expected 'assert', 'fold' or 'unfold'")
        raise AssertionError

    # -- expressions -----------------------------------------------------------

    def parse_args(self) -> list[Expr]:
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.parse_expr())
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        return args

    def parse_expr(self) -> Expr:
        loc = self.tok.loc
        cond = self.parse_binary(0)
        if self.at("?"):
            self.advance()
            then = self.parse_expr()
            self.expect(":")
            other = self.parse_expr()
            return self.mk(Ternary(cond, then, other), loc)
        return cond

    def parse_binary(self, level: int) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_binary(level + 1)
        while self.tok.kind == "OP" and self.tok.value in _BINARY_LEVELS[level]:
            op = self.advance().value
            right = self.parse_binary(level + 1)
            left = self.mk(Binary(op, left, right), left.loc)
        return left

    def parse_unary(self) -> Expr:
        loc = self.tok.loc
        if self.at("!") or self.at("-"):
            op = self.advance().value
            arg = self.parse_unary()
            return self.mk(Unary(op, arg), loc)
        e = self.parse_primary()
        while self.at("->"):
            self.advance()
            name = self.ident().value
            e = self.mk(FieldAccess(e, name), e.loc)
        return e

    def parse_primary(self) -> Expr:
        t = self.tok
        loc = t.loc
        if t.kind == "INT":
            self.advance()
            return self.mk(IntLit(int(t.value)), loc)
        if t.kind != "ID":
            if self.at("("):
                self.advance()
                e = self.parse_expr()
                self.expect(")")
                return e
            self.error("expected expression")
        v = t.value
        if v in ("true", "false"):
            self.advance()
            return self.mk(BoolLit(v == "true"), loc)
        if v == "NULL":
            self.advance()
            return self.mk(NullLit(), loc)
        if v == "\\result":
            self.advance()
            return self.mk(ResultRef(), loc)
        if v == "acc":
            self.advance()
            self.expect("(")
            target = self.parse_expr()
            self.expect(")")
            if not isinstance(target, FieldAccess):
                raise ParseError("acc requires a field location", target.loc)
            return self.mk(AccExpr(target), loc)
        if v == "unfolding":
            self.advance()
            pred = self.ident().value
            args = self.parse_args()
            if not self.at("in"):
                self.error("expected 'in'")
            self.advance()
            body = self.parse_expr()
            return self.mk(Unfolding(pred, args, body), loc)
        if v == "alloc":
            self.advance()
            self.expect("(")
            if self.at("struct"):
                self.advance()
                name = self.ident().value
            else:
                alias = self.ident().value
                name = self.typedefs.get(alias, alias)
            self.expect(")")
            return self.mk(Alloc(name), loc)
        if v.startswith("\\"):
            self.error("unknown keyword")
        name = self.ident().value
        if self.at("("):
            return self.mk(Call(name, self.parse_args()), loc)
        return self.mk(VarRef(name), loc)


@dataclass
class AccExpr(Expr):
    """Parser-internal: `acc(e->f)` before it is lifted into a formula."""
    target: FieldAccess


def parse(source: str) -> Program:
    """Parse annotated C0 source text into a Program."""
    p = Parser(source)
    prog = p.parse_program()
    for node in walk(prog):
        if isinstance(node, AccExpr):
            raise ParseError("acc(...) is only allowed as a specification conjunct", node.loc)
    return prog
