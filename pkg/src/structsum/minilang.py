"""Tokenizer and recursive-descent parser for a tiny statement language.

Grammar::

    method  := 'def' NAME '(' [NAME (',' NAME)*] ')' block
    block   := '{' stmt* '}'
    stmt    := 'if' '(' expr ')' block ['else' block]
             | 'while' '(' expr ')' block
             | 'return' [expr] ';'
             | NAME '=' expr ';'
             | expr ';'
    expr    := term (OP term)*
    term    := NUMBER | STRING | NAME | NAME '(' [expr (',' expr)*] ')' | '(' expr ')'

Every token becomes a leaf of the syntax tree, so the tree covers the whole
token stream.
"""

from __future__ import annotations

import re

from .codegraph import PLACEHOLDER, AstNode, CodeMethod, split_subtokens

KEYWORDS = frozenset({"def", "if", "else", "while", "return", "true", "false", "null"})
OPERATORS = ("==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">")

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<string>\"[^\"]*\")"
    r"|(?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>=(){},;]))"
)

_LEAF_LABELS = {"name": "Name", "keyword": "Keyword", "number": "Number", "string": "String", "punct": "Punct"}


class ParseError(ValueError):
    pass


def tokenize(source: str) -> list:
    """Split ``source`` into ``(text, kind)`` pairs."""
    out = []
    pos = 0
    source = source.rstrip()
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        text = m.group(kind)
        if kind == "name" and text in KEYWORDS:
            kind = "keyword"
        elif kind == "op":
            kind = "punct"
        out.append((text, kind))
    return out


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset=0):
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else (None, None)

    def leaf(self):
        if self.pos >= len(self.tokens):
            raise ParseError("unexpected end of input")
        text, kind = self.tokens[self.pos]
        node = AstNode(_LEAF_LABELS[kind], token=self.pos)
        self.pos += 1
        return node

    def expect(self, text):
        if self.peek()[0] != text:
            raise ParseError(f"expected {text!r} at token {self.pos}, found {self.peek()[0]!r}")
        return self.leaf()

    def expect_name(self):
        if self.peek()[1] != "name":
            raise ParseError(f"expected a name at token {self.pos}, found {self.peek()[0]!r}")
        return self.leaf()

    def method(self):
        kids = [self.expect("def"), self.expect_name(), self.expect("(")]
        params = []
        if self.peek()[0] != ")":
            params.append(self.expect_name())
            while self.peek()[0] == ",":
                params += [self.leaf(), self.expect_name()]
        kids += [AstNode("Parameters", tuple(params)), self.expect(")"), self.block()]
        if self.pos != len(self.tokens):
            raise ParseError(f"trailing tokens after method body at token {self.pos}")
        return AstNode("Method", tuple(kids))

    def block(self):
        kids = [self.expect("{")]
        while self.peek()[0] not in ("}", None):
            kids.append(self.statement())
        kids.append(self.expect("}"))
        return AstNode("Block", tuple(kids))

    def statement(self):
        text, kind = self.peek()
        if text in ("if", "while"):
            kids = [self.leaf(), self.expect("("), self.expression(), self.expect(")"), self.block()]
            if text == "if" and self.peek()[0] == "else":
                kids += [self.leaf(), self.block()]
            return AstNode("If" if text == "if" else "While", tuple(kids))
        if text == "return":
            kids = [self.leaf()]
            if self.peek()[0] != ";":
                kids.append(self.expression())
            kids.append(self.expect(";"))
            return AstNode("Return", tuple(kids))
        if kind == "name" and self.peek(1)[0] == "=":
            return AstNode("Assign", (self.leaf(), self.leaf(), self.expression(), self.expect(";")))
        return AstNode("ExprStmt", (self.expression(), self.expect(";")))

    def expression(self):
        left = self.term()
        while self.peek()[0] in OPERATORS:
            left = AstNode("BinOp", (left, self.leaf(), self.term()))
        return left

    def term(self):
        text, kind = self.peek()
        if kind in ("number", "string") or text in ("true", "false", "null"):
            return self.leaf()
        if text == "(":
            return AstNode("Paren", (self.leaf(), self.expression(), self.expect(")")))
        if kind == "name":
            if self.peek(1)[0] == "(":
                kids = [self.leaf(), self.leaf()]
                args = []
                if self.peek()[0] != ")":
                    args.append(self.expression())
                    while self.peek()[0] == ",":
                        args += [self.leaf(), self.expression()]
                kids += [AstNode("Arguments", tuple(args)), self.expect(")")]
                return AstNode("Call", tuple(kids))
            return self.leaf()
        raise ParseError(f"unexpected token {text!r} at {self.pos}")


def parse_method(source: str, hide_name: bool = True) -> CodeMethod:
    """Parse a method; its name becomes the placeholder and the target.

    The placeholder token is kept as a non-identifier token so it stays a
    single sequence node.
    """
    raw = tokenize(source)
    parser = _Parser(raw)
    ast = parser.method()
    name = raw[1][0]
    tokens = [(text, kind == "name") for text, kind in raw]
    if hide_name:
        tokens[1] = (PLACEHOLDER, False)
    return CodeMethod(tokens, ast, split_subtokens(name))
