"""Lexer and recursive-descent parser for .cob files.

Grammar (statements end in ';', blocks in braces):

  program  := fn*
  fn       := "fn" IDENT "(" params? ")" block
  stmt     := IDENT "=" rhs ";"
            | "for" "(" IDENT ":" (querylit | expr) ")" block
            | "while" "(" expr ")" block
            | "if" "(" expr ")" block ("else" block)?
            | "return" expr? ";"
            | "cacheByColumn" "(" IDENT "," IDENT ")" ";"
            | IDENT "." IDENT "(" args ")" ";"
  rhs      := "executeQuery" "(" querylit ")"
            | "lookupCache" "(" IDENT "." IDENT "," expr ")"
            | expr
  querylit := "query" "{" queryexpr "}"

Queries are written in a functional algebra form, for example
``orderby(month, project([month, sale_amt], scan(sales)))``.  Inside a
query, a bare identifier is a column; a dotted path such as
``o.o_customer_sk`` or an ``outer(expr)`` wrapper refers to program scope.

Errors carry ``file:line:col`` positions.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import queries as Q
from . import syntax as S
from .errors import ParseError, SemanticError

KEYWORDS = {"fn", "for", "while", "if", "else", "return", "query", "true", "false"}
TWO_CHAR = {"==", "!=", "<=", ">=", "&&", "||", ":="}
ONE_CHAR = set("+-*/<>=!;:,.(){}[]")

AGG_FNS = {"sum", "count", "min", "max"}
QUERY_OPS = {"scan", "select", "project", "join", "aggregate", "orderby"}
SCALAR_FNS = {"eq", "ne", "lt", "le", "gt", "ge", "and", "or", "not",
              "add", "sub", "mul", "div"}


@dataclass(frozen=True)
class Token:
    kind: str          # ident | int | float | string | punct | kw | eof
    text: str
    line: int
    col: int


def tokenize(src: str, filename: str = "<input>") -> list:
    toks = []
    line, col = 1, 1
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            text = src[i:j]
            kind = "kw" if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
                toks.append(Token("float", src[i:j], start_line, start_col))
            else:
                toks.append(Token("int", src[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c in "\"'":
            j = i + 1
            buf = []
            while j < n and src[j] != c:
                if src[j] == "\\" and j + 1 < n:
                    buf.append(src[j + 1])
                    j += 2
                else:
                    buf.append(src[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string literal", filename, start_line, start_col)
            toks.append(Token("string", "".join(buf), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if src[i:i + 2] in TWO_CHAR:
            toks.append(Token("punct", src[i:i + 2], start_line, start_col))
            i += 2
            col += 2
            continue
        if c in ONE_CHAR:
            toks.append(Token("punct", c, start_line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", filename, line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list, filename: str):
        self.toks = toks
        self.pos = 0
        self.filename = filename

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, self.filename, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            got = t.text if t.text else t.kind
            self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.peek()
        if t.kind == kind and (text is None or t.text == text):
            return self.next()
        return None

    # -- program structure -------------------------------------------------

    def program(self) -> S.Program:
        fns = []
        while self.peek().kind != "eof":
            fns.append(self.function())
        names = [f.name for f in fns]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            self.error(f"duplicate function name {dup!r}", self.toks[0])
        return S.Program(tuple(fns), filename=self.filename)

    def function(self) -> S.FunctionDef:
        kw = self.expect("kw", "fn")
        name = self.expect("ident").text
        self.expect("punct", "(")
        params = []
        if not self.accept("punct", ")"):
            while True:
                pname = self.expect("ident").text
                ptype = "any"
                if self.accept("punct", ":"):
                    ptype = self.expect("ident").text
                params.append(S.Param(pname, ptype))
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        body, end_line = self.block()
        return S.FunctionDef(name, tuple(params), body, line=kw.line, end_line=end_line)

    def block(self) -> tuple:
        self.expect("punct", "{")
        stmts = []
        while not self.peek().kind == "punct" or self.peek().text != "}":
            if self.peek().kind == "eof":
                self.error("unexpected end of input, expected '}'")
            stmts.append(self.statement())
        close = self.expect("punct", "}")
        return tuple(stmts), close.line

    # -- statements --------------------------------------------------------

    def statement(self) -> S.Stmt:
        t = self.peek()
        if t.kind == "kw" and t.text == "for":
            return self.for_stmt()
        if t.kind == "kw" and t.text == "while":
            return self.while_stmt()
        if t.kind == "kw" and t.text == "if":
            return self.if_stmt()
        if t.kind == "kw" and t.text == "return":
            self.next()
            value = None
            if not (self.peek().kind == "punct" and self.peek().text == ";"):
                value = self.expr()
            self.expect("punct", ";")
            return S.Return(value, line=t.line, col=t.col)
        if t.kind == "ident" and t.text == "cacheByColumn" and self.peek(1).text == "(":
            self.next()
            self.expect("punct", "(")
            rel = self.expect("ident").text
            self.expect("punct", ",")
            col = self.expect("ident").text
            self.expect("punct", ")")
            self.expect("punct", ";")
            return S.Prefetch(rel, col, line=t.line, col=t.col)
        if t.kind == "ident":
            nxt = self.peek(1)
            if nxt.kind == "punct" and nxt.text == "=":
                return self.assign_stmt()
            if nxt.kind == "punct" and nxt.text == ".":
                return self.method_call_stmt()
        self.error(f"expected a statement, found {t.text or t.kind!r}")

    def assign_stmt(self) -> S.Stmt:
        name_tok = self.expect("ident")
        self.expect("punct", "=")
        t = self.peek()
        if t.kind == "ident" and t.text == "executeQuery":
            self.next()
            self.expect("punct", "(")
            query = self.query_literal()
            self.expect("punct", ")")
            self.expect("punct", ";")
            return S.ExecQuery(name_tok.text, query, line=name_tok.line, col=name_tok.col)
        if t.kind == "ident" and t.text == "lookupCache":
            self.next()
            self.expect("punct", "(")
            rel = self.expect("ident").text
            self.expect("punct", ".")
            col = self.expect("ident").text
            self.expect("punct", ",")
            key = self.expr()
            self.expect("punct", ")")
            self.expect("punct", ";")
            return S.CacheLookup(name_tok.text, rel, col, key, line=name_tok.line, col=name_tok.col)
        value = self.expr()
        self.expect("punct", ";")
        return S.Assign(name_tok.text, value, line=name_tok.line, col=name_tok.col)

    def method_call_stmt(self) -> S.MethodCall:
        recv = self.expect("ident")
        self.expect("punct", ".")
        method = self.expect("ident").text
        self.expect("punct", "(")
        args = []
        if not self.accept("punct", ")"):
            while True:
                args.append(self.expr())
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        self.expect("punct", ";")
        return S.MethodCall(recv.text, method, tuple(args), line=recv.line, col=recv.col)

    def for_stmt(self) -> S.Stmt:
        kw = self.expect("kw", "for")
        self.expect("punct", "(")
        var = self.expect("ident").text
        self.expect("punct", ":")
        if self.peek().kind == "kw" and self.peek().text == "query":
            query = self.query_literal()
            self.expect("punct", ")")
            body, end_line = self.block()
            return S.QueryLoop(var, query, body, line=kw.line, col=kw.col, end_line=end_line)
        source = self.expr()
        self.expect("punct", ")")
        body, end_line = self.block()
        return S.CollLoop(var, source, body, line=kw.line, col=kw.col, end_line=end_line)

    def while_stmt(self) -> S.While:
        kw = self.expect("kw", "while")
        self.expect("punct", "(")
        cond = self.expr()
        self.expect("punct", ")")
        body, end_line = self.block()
        return S.While(cond, body, line=kw.line, col=kw.col, end_line=end_line)

    def if_stmt(self) -> S.If:
        kw = self.expect("kw", "if")
        self.expect("punct", "(")
        cond = self.expr()
        self.expect("punct", ")")
        then_body, end_line = self.block()
        else_body: tuple = ()
        if self.peek().kind == "kw" and self.peek().text == "else":
            self.next()
            else_body, end_line = self.block()
        return S.If(cond, then_body, else_body, line=kw.line, col=kw.col, end_line=end_line)

    # -- expressions (precedence climbing) ---------------------------------

    def expr(self) -> S.Expr:
        return self.binary(1)

    _LEVELS = [{"||"}, {"&&"}, {"==", "!="}, {"<", "<=", ">", ">="},
               {"+", "-"}, {"*", "/"}]

    def binary(self, level: int) -> S.Expr:
        if level > len(self._LEVELS):
            return self.unary()
        ops = self._LEVELS[level - 1]
        left = self.binary(level + 1)
        while self.peek().kind == "punct" and self.peek().text in ops:
            op = self.next()
            right = self.binary(level + 1)
            left = S.Binary(op.text, left, right, line=op.line, col=op.col)
        return left

    def unary(self) -> S.Expr:
        t = self.peek()
        if t.kind == "punct" and t.text in ("!", "-"):
            self.next()
            return S.Unary(t.text, self.unary(), line=t.line, col=t.col)
        return self.postfix()

    def postfix(self) -> S.Expr:
        e = self.primary()
        while self.peek().kind == "punct" and self.peek().text == ".":
            dot = self.next()
            attr = self.expect("ident").text
            e = S.Field(e, attr, line=dot.line, col=dot.col)
        return e

    def primary(self) -> S.Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return S.IntLit(int(t.text), line=t.line, col=t.col)
        if t.kind == "float":
            self.next()
            return S.FloatLit(float(t.text), line=t.line, col=t.col)
        if t.kind == "string":
            self.next()
            return S.StrLit(t.text, line=t.line, col=t.col)
        if t.kind == "kw" and t.text in ("true", "false"):
            self.next()
            return S.BoolLit(t.text == "true", line=t.line, col=t.col)
        if t.kind == "punct" and t.text == "[":
            self.next()
            self.expect("punct", "]")
            return S.ListLit(line=t.line, col=t.col)
        if t.kind == "punct" and t.text == "{":
            self.next()
            self.expect("punct", "}")
            return S.MapLit(line=t.line, col=t.col)
        if t.kind == "punct" and t.text == "(":
            self.next()
            e = self.expr()
            self.expect("punct", ")")
            return e
        if t.kind == "ident":
            if self.peek(1).kind == "punct" and self.peek(1).text == "(":
                self.next()
                self.expect("punct", "(")
                args = []
                if not self.accept("punct", ")"):
                    while True:
                        args.append(self.expr())
                        if self.accept("punct", ")"):
                            break
                        self.expect("punct", ",")
                return S.CallExpr(t.text, tuple(args), line=t.line, col=t.col)
            self.next()
            return S.Var(t.text, line=t.line, col=t.col)
        self.error(f"expected an expression, found {t.text or t.kind!r}")

    # -- query sub-language ------------------------------------------------

    def query_literal(self) -> Q.QueryExpr:
        self.expect("kw", "query")
        self.expect("punct", "{")
        q = self.query_expr()
        self.expect("punct", "}")
        return q

    def query_expr(self) -> Q.QueryExpr:
        t = self.expect("ident")
        if t.text not in QUERY_OPS:
            self.error(f"unknown query operator {t.text!r}", t)
        self.expect("punct", "(")
        q = getattr(self, f"_q_{t.text}")(t)
        self.expect("punct", ")")
        return q

    def _q_scan(self, t: Token) -> Q.Scan:
        return Q.Scan(self.expect("ident").text)

    def _q_select(self, t: Token) -> Q.Select:
        pred = self.query_operand()
        self.expect("punct", ",")
        return Q.Select(pred, self.query_expr())

    def _q_project(self, t: Token) -> Q.Project:
        self.expect("punct", "[")
        cols = []
        while True:
            name = self.expect("ident").text
            if self.accept("punct", ":="):
                cols.append((name, self.query_operand()))
            else:
                cols.append((name, Q.Column(name)))
            if self.accept("punct", "]"):
                break
            self.expect("punct", ",")
        self.expect("punct", ",")
        return Q.Project(tuple(cols), self.query_expr())

    def _q_join(self, t: Token) -> Q.Join:
        pred = self.query_operand()
        self.expect("punct", ",")
        left = self.query_expr()
        self.expect("punct", ",")
        right = self.query_expr()
        return Q.Join(pred, left, right)

    def _q_aggregate(self, t: Token) -> Q.Aggregate:
        fn = self.expect("ident").text
        if fn not in AGG_FNS:
            self.error(f"unknown aggregate {fn!r}")
        self.expect("punct", ",")
        col_tok = self.expect("ident")
        column = None if col_tok.text == "star" else col_tok.text
        self.expect("punct", ",")
        # either "group_col, child" or just "child"
        if self.peek().kind == "ident" and self.peek().text not in QUERY_OPS:
            group = self.expect("ident").text
            self.expect("punct", ",")
            return Q.Aggregate(fn, column, group, self.query_expr())
        return Q.Aggregate(fn, column, None, self.query_expr())

    def _q_orderby(self, t: Token) -> Q.OrderBy:
        col = self.expect("ident").text
        self.expect("punct", ",")
        return Q.OrderBy(col, self.query_expr())

    def query_operand(self) -> Q.Operand:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Q.Const(int(t.text))
        if t.kind == "float":
            self.next()
            return Q.Const(float(t.text))
        if t.kind == "string":
            self.next()
            return Q.Const(t.text)
        if t.kind == "kw" and t.text in ("true", "false"):
            self.next()
            return Q.Const(t.text == "true")
        if t.kind == "ident":
            if t.text == "outer" and self.peek(1).text == "(":
                self.next()
                self.expect("punct", "(")
                e = self.expr()
                self.expect("punct", ")")
                return Q.Outer(e, text=S.emit_expr(e))
            if self.peek(1).kind == "punct" and self.peek(1).text == "(":
                self.next()
                if t.text not in SCALAR_FNS:
                    self.error(f"unknown query function {t.text!r}", t)
                self.expect("punct", "(")
                args = []
                if not self.accept("punct", ")"):
                    while True:
                        args.append(self.query_operand())
                        if self.accept("punct", ")"):
                            break
                        self.expect("punct", ",")
                return Q.ScalarOp(t.text, tuple(args))
            if self.peek(1).kind == "punct" and self.peek(1).text == ".":
                self.next()
                self.expect("punct", ".")
                attr = self.expect("ident").text
                e = S.Field(S.Var(t.text, line=t.line, col=t.col), attr, line=t.line, col=t.col)
                return Q.Outer(e, text=S.emit_expr(e))
            self.next()
            return Q.Column(t.text)
        self.error(f"expected a query operand, found {t.text or t.kind!r}")


# ---------------------------------------------------------------------------
# static validation

CONSOLE = "console"


def _expr_uses(e: S.Expr, out: set) -> None:
    if isinstance(e, S.Var):
        out.add(e.name)
    elif isinstance(e, S.Field):
        _expr_uses(e.obj, out)
    elif isinstance(e, S.Binary):
        _expr_uses(e.left, out)
        _expr_uses(e.right, out)
    elif isinstance(e, S.Unary):
        _expr_uses(e.operand, out)
    elif isinstance(e, S.CallExpr):
        for a in e.args:
            _expr_uses(a, out)


def query_uses(q: Q.QueryExpr, out: set) -> None:
    """Program variables referenced by Outer operands of a query."""

    def operand(op):
        if isinstance(op, Q.Outer):
            _expr_uses(op.expr, out)
        elif isinstance(op, Q.ScalarOp):
            for a in op.args:
                operand(a)

    if isinstance(q, Q.Select):
        operand(q.predicate)
    elif isinstance(q, Q.Join):
        operand(q.predicate)
    elif isinstance(q, Q.Project):
        for _, op in q.columns:
            operand(op)
    for c in Q.children(q):
        query_uses(c, out)


def _check_uses(uses: set, defined: set, filename: str, line: int, col: int) -> None:
    for name in sorted(uses):
        if name not in defined:
            raise SemanticError(f"use of undefined variable {name!r}", filename, line, col)


def _validate_block(stmts, defined: set, loop_vars: set, filename: str) -> set:
    for s in stmts:
        uses: set = set()
        if isinstance(s, S.Assign):
            _expr_uses(s.value, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            defined.add(s.target)
        elif isinstance(s, S.ExecQuery):
            query_uses(s.query, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            defined.add(s.target)
        elif isinstance(s, S.CacheLookup):
            _expr_uses(s.key, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            defined.add(s.target)
        elif isinstance(s, S.Prefetch):
            pass
        elif isinstance(s, S.MethodCall):
            if s.receiver != CONSOLE:
                uses.add(s.receiver)
            for a in s.args:
                _expr_uses(a, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
        elif isinstance(s, S.Return):
            if s.value is not None:
                _expr_uses(s.value, uses)
                _check_uses(uses, defined, filename, s.line, s.col)
        elif isinstance(s, (S.QueryLoop, S.CollLoop)):
            if isinstance(s, S.QueryLoop):
                query_uses(s.query, uses)
            else:
                _expr_uses(s.source, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            if s.var in defined or s.var in loop_vars:
                raise SemanticError(f"loop variable {s.var!r} shadows an existing name",
                                    filename, s.line, s.col)
            inner = set(defined) | {s.var}
            result = _validate_block(s.body, inner, loop_vars | {s.var}, filename)
            defined |= result - {s.var}
        elif isinstance(s, S.While):
            _expr_uses(s.cond, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            defined |= _validate_block(s.body, set(defined), loop_vars, filename)
        elif isinstance(s, S.If):
            _expr_uses(s.cond, uses)
            _check_uses(uses, defined, filename, s.line, s.col)
            d1 = _validate_block(s.then_body, set(defined), loop_vars, filename)
            d2 = _validate_block(s.else_body, set(defined), loop_vars, filename)
            defined |= d1 | d2
        else:
            raise TypeError(f"not a statement: {s!r}")
    return defined


def validate(program: S.Program) -> None:
    for f in program.functions:
        defined = {p.name for p in f.params}
        _validate_block(f.body, defined, set(), program.filename)


def parse(src: str, filename: str = "<input>", check: bool = True) -> S.Program:
    toks = tokenize(src, filename)
    program = _Parser(toks, filename).program()
    if check:
        validate(program)
    return program
