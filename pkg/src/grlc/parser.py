"""Concrete syntax for .gr files.

A program file holds type declarations (capitalized names), signatures,
definitions, an optional ``main`` expression and an optional ``where`` block
giving the initial environment.  Grade annotations are written ``_{r}`` or
``_{r,s}``; arrows take a recursion grade ``->_{s}``; applications may pin
their grade with ``@[r]``.  Comments run from ``--`` to end of line.

Variant declarations like ``Nat = zero + succ:Nat`` introduce tags that are
desugared into nested sums at parse time; ``if``/``then``/``else`` desugars
into a match on the ``true``/``false`` tags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from grlc.algebra import Grade, GradeAlgebra, GradeError
from grlc.contexts import GradeContext
from grlc.names import fresh
from grlc.syntax import (FunT, GType, Mu, SAPair, SApp, SCase, SInl, SInr,
                         SLet, SMatchPair, SPair, SProj, SRecFun, SSeq,
                         SumT, SUnit, SVar, SurfaceExpr, TensorT, TVar, Type,
                         TypeError_, UnitT, WithT, is_contractive)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


KEYWORDS = {"rec", "match", "with", "or", "let", "in", "return", "case",
            "inl", "inr", "fst", "snd", "unit", "if", "then", "else",
            "main", "where", "uses", "Unit"}

PUNCT = ["->", "@[", "_{", "<", ">", "(", ")", "{", "}", "[", "]",
         ",", ";", ".", "\\", "=", ":", "+", "*", "&", "|"]


@dataclass
class Token:
    kind: str  # 'ident', 'num', punctuation literal, 'ann', 'appgrade', 'eof'
    text: str
    line: int


def lex(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line = 0, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src.startswith("_{", i):
            j = src.index("}", i)  # grade literals never contain '}'
            toks.append(Token("ann", src[i + 2:j], line))
            i = j + 1
            continue
        if src.startswith("@[", i):
            j = src.index("]", i)
            toks.append(Token("appgrade", src[i + 2:j], line))
            i = j + 1
            continue
        matched = False
        for p in PUNCT:
            if src.startswith(p, i):
                toks.append(Token(p, p, line))
                i += len(p)
                matched = True
                break
        if matched:
            continue
        if c.isdigit():
            j = i
            while j < n and (src[j].isdigit() or src[j] == "/"):
                j += 1
            toks.append(Token("num", src[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_" or c == "~":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_~'"):
                if src[j] == "_" and j + 1 < n and src[j + 1] == "{":
                    break
                j += 1
            word = src[i:j]
            toks.append(Token(word if word in KEYWORDS else "ident", word, line))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line)
    toks.append(Token("eof", "", line))
    return toks


@dataclass
class TagInfo:
    type_name: str
    index: int        # position among the declared tags
    total: int
    payload: GType    # Unit graded zero for bare tags
    bare: bool


@dataclass
class EnvEntry:
    name: str
    grade: Grade
    uses: Optional[dict[str, Grade]]
    value: SurfaceExpr


@dataclass
class Program:
    algebra: GradeAlgebra
    types: dict[str, Type] = field(default_factory=dict)
    sigs: dict[str, GType] = field(default_factory=dict)
    defs: list[tuple[str, SurfaceExpr]] = field(default_factory=list)
    main: Optional[SurfaceExpr] = None
    env: list[EnvEntry] = field(default_factory=list)
    tags: dict[str, TagInfo] = field(default_factory=dict)

    def assembled_main(self) -> SurfaceExpr:
        """main with the definitions it mentions wrapped as annotated lets."""
        if self.main is None:
            raise ParseError("program has no main expression")
        body = self.main
        for name, expr in reversed(self.defs):
            if name in _free_def_names(body, {n for n, _ in self.defs}):
                body = SLet(name, expr, body, self.sigs.get(name))
        return body


def _free_def_names(e: SurfaceExpr, defnames: set[str]) -> set[str]:
    from grlc.syntax import free_vars

    return free_vars(e) & defnames


class Parser:
    def __init__(self, toks: list[Token], algebra: GradeAlgebra,
                 types: Optional[dict[str, Type]] = None,
                 tags: Optional[dict[str, TagInfo]] = None):
        self.toks = toks
        self.pos = 0
        self.algebra = algebra
        self.types: dict[str, Type] = dict(types or {})
        self.tags: dict[str, TagInfo] = dict(tags or {})

    # -- token plumbing ---------------------------------------------------
    def peek(self, k=0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text!r}", t.line)
        return t

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def eat(self, kind: str) -> bool:
        if self.at(kind):
            self.next()
            return True
        return False

    def grade(self, text: str, line: int) -> Grade:
        try:
            return self.algebra.parse(text)
        except GradeError as exc:
            raise ParseError(str(exc), line) from None

    def grade_pair(self, text: str, line: int) -> tuple[Grade, Grade]:
        depth, split = 0, -1
        for i, ch in enumerate(text):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                split = i
                break
        if split < 0:
            g = self.grade(text, line)
            return g, g
        return (self.grade(text[:split], line), self.grade(text[split + 1:], line))

    # -- types ------------------------------------------------------------
    # Grade annotations attach to atoms and to parenthesized types; arrows
    # are right-associative and carry a recursion grade defaulting to zero;
    # unannotated positions default to grade one.
    def parse_gtype(self, self_name: Optional[str] = None) -> GType:
        left = self.parse_sum_gtype(self_name)
        if self.at("->"):
            self.next()
            rec = None
            if self.at("ann"):
                t = self.next()
                rec = self.grade(t.text, t.line)
            cod = self.parse_gtype(self_name)
            return GType(FunT(left, rec, cod), self.algebra.one)
        return left

    def parse_sum_gtype(self, self_name) -> GType:
        first = self.parse_prod_gtype(self_name)
        if not self.at("+"):
            return first
        members = [first]
        while self.eat("+"):
            members.append(self.parse_prod_gtype(self_name))
        out = members[-1]
        for m in reversed(members[:-1]):
            out = GType(SumT(m, out), self.algebra.one)
        return out

    def parse_prod_gtype(self, self_name) -> GType:
        left = self.parse_atom_gtype(self_name)
        while self.at("*") or self.at("&"):
            op = self.next().kind
            right = self.parse_atom_gtype(self_name)
            cons = TensorT if op == "*" else WithT
            left = GType(cons(left, right), self.algebra.one)
        return left

    def parse_atom_gtype(self, self_name) -> GType:
        t = self.peek()
        if t.kind == "Unit":
            self.next()
            ty: Type = UnitT()
        elif t.kind == "(":
            self.next()
            inner = self.parse_gtype(self_name)
            self.expect(")")
            grade = inner.grade
            if self.at("ann"):
                a = self.next()
                grade = self.grade(a.text, a.line)
            return GType(inner.ty, grade)
        elif t.kind == "ident":
            self.next()
            name = t.text
            if name == self_name:
                ty = TVar(name)
            elif name in self.types:
                ty = self.types[name]
            elif name[:1].isupper():
                raise ParseError(f"unknown type name {name}", t.line)
            else:
                # a tag member inside a sum declaration
                return self.parse_tag_member(name, t.line, self_name)
        else:
            raise ParseError(f"expected a type, found {t.text!r}", t.line)
        grade = self.algebra.one
        if self.at("ann"):
            a = self.next()
            grade = self.grade(a.text, a.line)
        return GType(ty, grade)

    def parse_tag_member(self, tag: str, line: int, self_name) -> GType:
        if self.eat(":"):
            payload = self.parse_atom_gtype(self_name)
            return GType(_TagMember(tag, payload, False), self.algebra.one)
        bare_payload = GType(UnitT(), self.algebra.zero)
        return GType(_TagMember(tag, bare_payload, True), self.algebra.one)

    # -- declarations -------------------------------------------------------
    def parse_type_decl(self, name: str):
        body = self.parse_gtype(self_name=name)
        if body.grade != self.algebra.one:
            raise ParseError(f"type {name} cannot carry a top-level grade",
                             self.peek().line)
        ty, tag_members = _strip_tags(body.ty)
        if tag_members:
            for idx, (tag, payload, bare) in enumerate(tag_members):
                if tag in self.tags:
                    raise ParseError(f"duplicate tag {tag}", self.peek().line)
                self.tags[tag] = TagInfo(name, idx, len(tag_members), payload, bare)
        if _mentions_tvar(ty, name):
            ty = Mu(name, ty)
            if not is_contractive(ty):
                raise ParseError(f"type {name} is not contractive", self.peek().line)
        self.types[name] = ty
        # fix tag payload types that referenced the type being declared
        for tag in list(self.tags):
            info = self.tags[tag]
            if info.type_name == name:
                fixed = _close_tvar(info.payload.ty, name, ty)
                self.tags[tag] = TagInfo(name, info.index, info.total,
                                         GType(fixed, info.payload.grade), info.bare)

    # -- expressions --------------------------------------------------------
    def parse_expr(self) -> SurfaceExpr:
        t = self.peek()
        if t.kind == "\\":
            self.next()
            param = self.ident_or_wildcard()
            self.expect(".")
            body = self.parse_expr()
            f = fresh("f")
            return SRecFun(f, param, body)
        if t.kind == "rec":
            self.next()
            f = self.expect("ident").text
            self.expect(".")
            lam = self.expect("\\")
            param = self.ident_or_wildcard()
            self.expect(".")
            body = self.parse_expr()
            return SRecFun(f, param, body)
        if t.kind == "let":
            self.next()
            name = self.ident_or_wildcard()
            self.expect("=")
            bound = self.parse_expr()
            self.expect("in")
            body = self.parse_expr()
            return SLet(name, bound, body)
        if t.kind == "if":
            self.next()
            cond = self.parse_expr_no_seq()
            self.expect("then")
            thn = self.parse_expr_branch()
            self.expect("else")
            els = self.parse_expr()
            return self.desugar_tag_match(cond, [("true", None, thn),
                                                 ("false", None, els)], t.line)
        if t.kind == "match":
            return self.parse_match()
        if t.kind == "case":
            return self.parse_case()
        if t.kind == "return":
            self.next()
            return self.parse_expr()
        return self.parse_seq()

    def ident_or_wildcard(self) -> str:
        t = self.next()
        if t.kind != "ident":
            raise ParseError(f"expected a variable, found {t.text!r}", t.line)
        if t.text == "_":
            return fresh("_w")
        return t.text

    def parse_seq(self) -> SurfaceExpr:
        first = self.parse_app()
        if self.eat(";"):
            second = self.parse_expr()
            return SSeq(first, second)
        return first

    def parse_expr_no_seq(self) -> SurfaceExpr:
        return self.parse_app()

    def parse_expr_branch(self) -> SurfaceExpr:
        # a match/if branch body: stops before 'or'/'else' naturally since
        # those are keywords, but sequencing inside branches is allowed
        return self.parse_expr()

    def parse_app(self) -> SurfaceExpr:
        head = self.parse_atom()
        while True:
            grade = None
            if self.at("appgrade"):
                t = self.next()
                grade = self.grade(t.text, t.line)
            if self.starts_atom():
                arg = self.parse_atom()
                head = SApp(head, arg, grade)
            elif grade is not None:
                raise ParseError("@[grade] must precede an argument", self.peek().line)
            else:
                return head

    def starts_atom(self) -> bool:
        k = self.peek().kind
        if k == "ident":
            # an identifier opening a new top-level item (sig, def, where
            # entry) is not an application argument
            return self.peek(1).kind not in (":", "=")
        return k in ("unit", "(", "<", "inl", "inr", "fst", "snd",
                     "rec", "\\")

    def parse_atom(self) -> SurfaceExpr:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            name = t.text
            if name in self.tags:
                return self.build_tag_value(name, t.line)
            return SVar(name)
        if t.kind == "unit":
            self.next()
            return SUnit()
        if t.kind == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "<":
            return self.parse_pair()
        if t.kind in ("inl", "inr"):
            self.next()
            grade = self.algebra.one
            if self.at("ann"):
                a = self.next()
                grade = self.grade(a.text, a.line)
            body = self.parse_atom()
            return SInl(grade, body) if t.kind == "inl" else SInr(grade, body)
        if t.kind in ("fst", "snd"):
            self.next()
            body = self.parse_atom()
            return SProj(1 if t.kind == "fst" else 2, body)
        if t.kind in ("rec", "\\"):
            return self.parse_expr()
        raise ParseError(f"expected an expression, found {t.text!r}", t.line)

    def parse_pair(self) -> SurfaceExpr:
        t = self.expect("<")
        left = self.parse_expr()
        if self.eat(","):
            additive = False
        elif self.eat("|"):
            additive = True
        else:
            raise ParseError("expected ',' or '|' in a pair", t.line)
        right = self.parse_expr()
        self.expect(">")
        g1 = g2 = self.algebra.one
        if self.at("ann"):
            a = self.next()
            g1, g2 = self.grade_pair(a.text, a.line)
        return (SAPair(g1, left, right, g2) if additive
                else SPair(g1, left, right, g2))

    def build_tag_value(self, tag: str, line: int) -> SurfaceExpr:
        info = self.tags[tag]
        if info.bare:
            payload: SurfaceExpr = SUnit()
        else:
            if not self.starts_atom():
                raise ParseError(f"tag {tag} needs a payload", line)
            payload = self.parse_atom()
        return _inject(self.algebra, info, payload)

    # -- match and case -----------------------------------------------------
    def parse_match(self) -> SurfaceExpr:
        t = self.expect("match")
        scrutinee = self.parse_expr_no_seq()
        self.expect("with")
        branches = []
        while True:
            branches.append(self.parse_branch())
            if not self.eat("or"):
                break
        if len(branches) == 1:
            pat, var, body = branches[0]
            if pat == "<pair>":
                x, y = var
                return SMatchPair(x, y, scrutinee, body)
            if pat == "unit":
                return SSeq(scrutinee, body)
        if all(p in self.tags for p, _, _ in branches):
            return self.desugar_tag_match(
                scrutinee, [(p, v, b) for p, v, b in branches], t.line)
        if (len(branches) == 2 and branches[0][0] == "inl"
                and branches[1][0] == "inr"):
            return SCase(scrutinee, branches[0][1], branches[0][2],
                         branches[1][1], branches[1][2])
        raise ParseError("unrecognized match shape", t.line)

    def parse_branch(self):
        t = self.peek()
        if t.kind == "<":
            self.next()
            x = self.ident_or_wildcard()
            self.expect(",")
            y = self.ident_or_wildcard()
            self.expect(">")
            self.expect("->")
            return ("<pair>", (x, y), self.parse_expr_branch())
        if t.kind == "unit":
            self.next()
            self.expect("->")
            return ("unit", None, self.parse_expr_branch())
        if t.kind in ("inl", "inr"):
            self.next()
            x = self.ident_or_wildcard()
            self.expect("->")
            return (t.kind, x, self.parse_expr_branch())
        if t.kind == "(":
            self.next()
            b = self.parse_branch_pattern_paren()
            return b
        if t.kind == "ident":
            self.next()
            tag = t.text
            var = None
            if self.at("ident"):
                var = self.ident_or_wildcard()
            self.expect("->")
            return (tag, var, self.parse_expr_branch())
        raise ParseError(f"bad pattern start {t.text!r}", t.line)

    def parse_branch_pattern_paren(self):
        # (tag x) style patterns
        t = self.expect("ident")
        tag = t.text
        var = None
        if self.at("ident"):
            var = self.ident_or_wildcard()
        self.expect(")")
        self.expect("->")
        return (tag, var, self.parse_expr_branch())

    def parse_case(self) -> SurfaceExpr:
        self.expect("case")
        scrutinee = self.parse_expr_no_seq()
        self.expect("with")
        self.expect("inl")
        x1 = self.ident_or_wildcard()
        self.expect("->")
        left = self.parse_expr_branch()
        self.expect("or")
        self.expect("inr")
        x2 = self.ident_or_wildcard()
        self.expect("->")
        right = self.parse_expr_branch()
        return SCase(scrutinee, x1, left, x2, right)

    def desugar_tag_match(self, scrutinee: SurfaceExpr, branches, line) -> SurfaceExpr:
        """Nested binary cases over a variant's right-nested sum encoding."""
        if not branches:
            raise ParseError("empty match", line)
        infos = []
        tname = None
        for tag, var, body in branches:
            if tag not in self.tags:
                raise ParseError(f"unknown tag {tag}", line)
            info = self.tags[tag]
            if tname is None:
                tname = info.type_name
            elif info.type_name != tname:
                raise ParseError("match mixes tags of different types", line)
            infos.append((info, var, body))
        total = infos[0][0].total
        if len(infos) != total:
            raise ParseError(f"match must cover all {total} tags of {tname}", line)
        by_index = {}
        for info, var, body in infos:
            by_index[info.index] = (var, body)
        if set(by_index) != set(range(total)):
            raise ParseError("duplicate or missing tags in match", line)

        def build(idx: int, scr: SurfaceExpr) -> SurfaceExpr:
            var, body = by_index[idx]
            x = var or fresh("_w")
            if idx == total - 2:
                var2, body2 = by_index[idx + 1]
                y = var2 or fresh("_w")
                return SCase(scr, x, body, y, body2)
            w = fresh("rest")
            return SCase(scr, x, body, w, build(idx + 1, SVar(w)))

        if total == 1:
            # single-tag variant: match is just binding the payload
            var, body = by_index[0]
            x = var or fresh("_w")
            return SLet(x, scrutinee, body)
        return build(0, scrutinee)

    # -- whole files ----------------------------------------------------------
    def parse_program(self) -> Program:
        prog = Program(self.algebra)
        while not self.at("eof") and not self.at("where"):
            t = self.peek()
            if t.kind == "main":
                self.next()
                self.expect("=")
                prog.main = self.parse_expr()
                continue
            if t.kind == "ident" and t.text[:1].isupper():
                name = self.next().text
                self.expect("=")
                self.parse_type_decl(name)
                continue
            if t.kind == "ident":
                name = self.next().text
                if self.eat(":"):
                    gt = self.parse_gtype()
                    prog.sigs[name] = gt
                    continue
                params = []
                while self.at("ident"):
                    params.append(self.ident_or_wildcard())
                self.expect("=")
                body = self.parse_expr()
                for p in reversed(params):
                    body = SRecFun(fresh("f"), p, body)
                prog.defs.append((name, body))
                continue
            raise ParseError(f"unexpected {t.text!r} at top level", t.line)
        if self.eat("where"):
            while self.at("ident"):
                prog.env.append(self.parse_env_entry())
        self.expect("eof")
        prog.types = self.types
        prog.tags = self.tags
        return prog

    def parse_env_entry(self) -> EnvEntry:
        name = self.expect("ident").text
        self.expect(":")
        gtext, line = self.raw_until({"uses", "="})
        grade = self.grade(gtext, line)
        uses = None
        if self.eat("uses"):
            self.expect("{")
            uses = {}
            if not self.at("}"):
                while True:
                    vn = self.expect("ident").text
                    self.expect(":")
                    vtext, vline = self.raw_until({",", "}"}, stop_at_depth0=True)
                    uses[vn] = self.grade(vtext, vline)
                    if not self.eat(","):
                        break
            self.expect("}")
        self.expect("=")
        value = self.parse_expr()
        return EnvEntry(name, grade, uses, value)

    def raw_until(self, stop_kinds: set[str], stop_at_depth0: bool = False):
        """Re-concatenate token texts until one of stop_kinds at depth 0."""
        parts = []
        depth = 0
        line = self.peek().line
        while True:
            t = self.peek()
            if t.kind == "eof":
                raise ParseError("unexpected end of file in grade literal", t.line)
            if depth == 0 and t.kind in stop_kinds:
                break
            if t.kind == "(":
                depth += 1
            elif t.kind == ")":
                depth -= 1
            parts.append(t.text)
            self.next()
        return "".join(parts), line


# ---------------------------------------------------------------------------
# tag plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _TagMember(Type):
    """Transient node for a tag inside a sum declaration; stripped before use."""

    tag: str
    payload: GType
    bare: bool


def _strip_tags(ty: Type):
    """Replace tag members with their payloads, collecting the tag list."""
    members: list[tuple[str, GType, bool]] = []

    def walk_gtype(gt: GType) -> GType:
        return GType(walk(gt.ty), gt.grade)

    def walk(t: Type) -> Type:
        match t:
            case _TagMember(tag, payload, bare):
                members.append((tag, payload, bare))
                return payload.ty
            case SumT(l, r):
                nl = walk_member(l)
                nr = walk_member(r)
                return SumT(nl, nr)
            case FunT(d, s, c):
                return FunT(walk_gtype(d), s, walk_gtype(c))
            case TensorT(l, r):
                return TensorT(walk_gtype(l), walk_gtype(r))
            case WithT(l, r):
                return WithT(walk_gtype(l), walk_gtype(r))
            case Mu(v, b):
                return Mu(v, walk(b))
            case _:
                return t

    def walk_member(gt: GType) -> GType:
        match gt.ty:
            case _TagMember(tag, payload, bare):
                members.append((tag, payload, bare))
                return GType(payload.ty, payload.grade)
            case _:
                return walk_gtype(gt)

    return walk(ty), members


def _mentions_tvar(ty: Type, name: str) -> bool:
    match ty:
        case TVar(n):
            return n == name
        case Mu(v, b):
            return v != name and _mentions_tvar(b, name)
        case FunT(d, _, c):
            return _mentions_tvar(d.ty, name) or _mentions_tvar(c.ty, name)
        case TensorT(l, r) | SumT(l, r) | WithT(l, r):
            return _mentions_tvar(l.ty, name) or _mentions_tvar(r.ty, name)
        case _:
            return False


def _close_tvar(ty: Type, name: str, closed: Type) -> Type:
    from grlc.syntax import subst_type

    return subst_type(ty, name, closed)


def _inject(algebra: GradeAlgebra, info: TagInfo, payload: SurfaceExpr) -> SurfaceExpr:
    """Wrap a payload into the right-nested sum position for its tag."""
    grade = info.payload.grade
    if info.index == info.total - 1:
        out: SurfaceExpr = payload if info.total == 1 else SInr(grade, payload)
        wrappers = info.total - 2
    else:
        out = SInl(grade, payload)
        wrappers = info.index
    for _ in range(max(wrappers, 0)):
        out = SInr(algebra.one, out)
    return out


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def parse_program(text: str, algebra: GradeAlgebra) -> Program:
    return Parser(lex(text), algebra).parse_program()


def parse_expr(text: str, algebra: GradeAlgebra,
               types: Optional[dict[str, Type]] = None,
               tags: Optional[dict[str, TagInfo]] = None) -> SurfaceExpr:
    p = Parser(lex(text), algebra, types, tags)
    e = p.parse_expr()
    p.expect("eof")
    return e


def parse_gtype(text: str, algebra: GradeAlgebra,
                types: Optional[dict[str, Type]] = None) -> GType:
    p = Parser(lex(text), algebra, types)
    t = p.parse_gtype()
    p.expect("eof")
    return t
