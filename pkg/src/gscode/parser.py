"""Recursive-descent parser for the accepted source subset.

Grammar: compilation unit -> class decls -> field/method decls -> statements
(var decl, assignment, if/else, while, for, return, expression statement) ->
expressions (binary/unary ops, calls, object creation, field access, name
uses, literals).

Every token in the input becomes exactly one leaf of the AST, so concatenating
leaf texts in order reproduces the token stream.  Identifier leaves (declared
names and name uses) are the graph's variable nodes; name resolution links
each use leaf to its declaration's name leaf, respecting lexical scoping.
"""

from __future__ import annotations

from .lexer import (
    KW_IDENTIFIER,
    KW_KEYWORD,
    KW_LITERAL,
    KW_OPERATOR,
    KW_PUNCTUATION,
    MODIFIERS,
    PRIMITIVE_TYPES,
    ParseError,
    Token,
    tokenize,
)
from . import graph as gr

# internal (non-leaf) constructs
C_UNIT = "CompilationUnit"
C_CLASS = "ClassDecl"
C_FIELD = "FieldDecl"
C_METHOD = "MethodDecl"
C_PARAM = "Parameter"
C_BLOCK = "Block"
C_VARDECL = "VarDecl"
C_ASSIGN = "Assign"
C_IF = "If"
C_WHILE = "While"
C_FOR = "For"
C_RETURN = "Return"
C_EXPRSTMT = "ExprStmt"
C_CALL = "Call"
C_NEW = "ObjectCreation"
C_FIELDACCESS = "FieldAccess"
C_BINOP = "BinaryOp"
C_UNOP = "UnaryOp"
C_PAREN = "Paren"

# leaf constructs
C_NAME = "Name"          # the name leaf of a declaration
C_NAMEUSE = "NameUse"    # any identifier use (variable read/write, call name, member)
C_TYPEREF = "TypeRef"
C_LITERAL = "Literal"

# special-instance leaf constructs (substituted by the tasks module)
C_FITB = "FillInTheBlank"
C_NAMEME = "NameMe"
C_CACHE = "CacheWord"

TOK_PREFIX = "tok:"

STRUCTURE_KEYWORDS = (
    "class", "if", "else", "while", "for", "return", "new", "this",
    "public", "private", "protected", "static", "final",
)
OPERATOR_TOKENS = ("=", "==", "!=", "<", ">", "<=", ">=", "+", "-", "*", "/", "%", "&&", "||", "!")
PUNCT_TOKENS = ("(", ")", "{", "}", ";", ",", ".")

INTERNAL_CONSTRUCTS = (
    C_UNIT, C_CLASS, C_FIELD, C_METHOD, C_PARAM, C_BLOCK, C_VARDECL, C_ASSIGN,
    C_IF, C_WHILE, C_FOR, C_RETURN, C_EXPRSTMT, C_CALL, C_NEW, C_FIELDACCESS,
    C_BINOP, C_UNOP, C_PAREN,
)
LEAF_CONSTRUCTS = (C_NAME, C_NAMEUSE, C_TYPEREF, C_LITERAL, C_FITB, C_NAMEME, C_CACHE)

ALL_CONSTRUCTS = tuple(
    list(INTERNAL_CONSTRUCTS)
    + list(LEAF_CONSTRUCTS)
    + [TOK_PREFIX + t for t in STRUCTURE_KEYWORDS]
    + [TOK_PREFIX + t for t in OPERATOR_TOKENS]
    + [TOK_PREFIX + t for t in PUNCT_TOKENS]
)

BINARY_PRECEDENCE = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class AstNode:
    __slots__ = ("id", "construct", "name", "type_name", "children", "line", "column", "decl", "unresolved")

    def __init__(self, construct, name=None, children=None, line=None, column=None):
        self.id = -1
        self.construct = construct
        self.name = name
        self.type_name = None
        self.children = children if children is not None else []
        self.line = line
        self.column = column
        self.decl = None          # AstNode of the declaration name leaf, for use leaves
        self.unresolved = False

    def is_leaf(self):
        return not self.children

    def leaf_text(self):
        if self.construct.startswith(TOK_PREFIX):
            return self.construct[len(TOK_PREFIX):]
        return self.name

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def __repr__(self):
        return f"AstNode({self.construct!r}, name={self.name!r}, id={self.id})"


def _tok(token: Token) -> AstNode:
    return AstNode(TOK_PREFIX + token.text, line=token.line, column=token.column)


class Parser:
    """Single-pass recursive descent with bounded lookahead (peek of up to 3)."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset=0) -> Token | None:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def at(self, text: str, offset=0) -> bool:
        t = self.peek(offset)
        return t is not None and t.text == text

    def at_kind(self, kind: str, offset=0) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == kind

    def _err(self, expected: list[str]):
        t = self.peek()
        if t is None:
            last = self.tokens[-1] if self.tokens else None
            line, col = (last.line, last.column) if last else (1, 1)
            raise ParseError(f"unexpected end of input, expected one of {sorted(expected)}", line, col)
        raise ParseError(f"unexpected {t.text!r}, expected one of {sorted(expected)}", t.line, t.column)

    def expect(self, text: str) -> AstNode:
        t = self.peek()
        if t is None or t.text != text:
            self._err([text])
        self.pos += 1
        return _tok(t)

    def expect_identifier(self) -> Token:
        t = self.peek()
        if t is None or t.kind != KW_IDENTIFIER:
            self._err(["<identifier>"])
        self.pos += 1
        return t

    def _at_type(self, offset=0) -> bool:
        t = self.peek(offset)
        if t is None:
            return False
        return (t.kind == KW_KEYWORD and t.text in PRIMITIVE_TYPES) or t.kind == KW_IDENTIFIER

    def _take_type(self) -> AstNode:
        t = self.peek()
        if not self._at_type():
            self._err(["<type>"])
        self.pos += 1
        return AstNode(C_TYPEREF, name=t.text, line=t.line, column=t.column)

    def _take_modifiers(self) -> list[AstNode]:
        mods = []
        while self.at_kind(KW_KEYWORD) and self.peek().text in MODIFIERS:
            t = self.peek()
            self.pos += 1
            mods.append(_tok(t))
        return mods

    # ---- declarations ------------------------------------------------

    def parse_unit(self) -> AstNode:
        classes = []
        while self.peek() is not None:
            classes.append(self.parse_class())
        if not classes:
            raise ParseError("empty compilation unit", 1, 1)
        return AstNode(C_UNIT, children=classes)

    def parse_class(self) -> AstNode:
        children = self._take_modifiers()
        children.append(self.expect("class"))
        name_tok = self.expect_identifier()
        name = AstNode(C_NAME, name=name_tok.text, line=name_tok.line, column=name_tok.column)
        name.type_name = name_tok.text
        children.append(name)
        children.append(self.expect("{"))
        while not self.at("}"):
            children.append(self.parse_member())
        children.append(self.expect("}"))
        return AstNode(C_CLASS, children=children)

    def parse_member(self) -> AstNode:
        mods = self._take_modifiers()
        type_ref = self._take_type()
        name_tok = self.expect_identifier()
        name = AstNode(C_NAME, name=name_tok.text, line=name_tok.line, column=name_tok.column)
        if self.at("("):
            name.type_name = type_ref.name
            children = mods + [type_ref, name, self.expect("(")]
            first = True
            while not self.at(")"):
                if not first:
                    children.append(self.expect(","))
                children.append(self.parse_parameter())
                first = False
            children.append(self.expect(")"))
            children.append(self.parse_block())
            return AstNode(C_METHOD, children=children)
        name.type_name = type_ref.name
        children = mods + [type_ref, name]
        if self.at("="):
            children.append(self.expect("="))
            children.append(self.parse_expression())
        children.append(self.expect(";"))
        return AstNode(C_FIELD, children=children)

    def parse_parameter(self) -> AstNode:
        type_ref = self._take_type()
        name_tok = self.expect_identifier()
        name = AstNode(C_NAME, name=name_tok.text, line=name_tok.line, column=name_tok.column)
        name.type_name = type_ref.name
        return AstNode(C_PARAM, children=[type_ref, name])

    # ---- statements ---------------------------------------------------

    def parse_block(self) -> AstNode:
        children = [self.expect("{")]
        while not self.at("}"):
            children.append(self.parse_statement())
        children.append(self.expect("}"))
        return AstNode(C_BLOCK, children=children)

    def parse_statement(self) -> AstNode:
        t = self.peek()
        if t is None:
            self._err(["<statement>"])
        if t.text == "{":
            return self.parse_block()
        if t.text == "if":
            return self.parse_if()
        if t.text == "while":
            return self.parse_while()
        if t.text == "for":
            return self.parse_for()
        if t.text == "return":
            children = [self.expect("return")]
            if not self.at(";"):
                children.append(self.parse_expression())
            children.append(self.expect(";"))
            return AstNode(C_RETURN, children=children)
        if self._at_var_decl():
            node = self.parse_var_decl()
            node.children.append(self.expect(";"))
            return node
        expr = self.parse_expression()
        if self.at("="):
            node = AstNode(C_ASSIGN, children=[expr, self.expect("="), self.parse_expression()])
            self._check_assign_target(expr)
            node.children.append(self.expect(";"))
            return node
        return AstNode(C_EXPRSTMT, children=[expr, self.expect(";")])

    def _at_var_decl(self) -> bool:
        # "<type> <identifier>" where type is a primitive keyword or a class name
        t = self.peek()
        if t is None:
            return False
        if t.kind == KW_KEYWORD and t.text in PRIMITIVE_TYPES:
            return True
        return t.kind == KW_IDENTIFIER and self.at_kind(KW_IDENTIFIER, 1) and not self.at("(", 1)

    def _check_assign_target(self, expr: AstNode):
        if expr.construct not in (C_NAMEUSE, C_FIELDACCESS):
            raise ParseError("invalid assignment target", expr.line or 1, expr.column or 1)

    def parse_var_decl(self) -> AstNode:
        """Declaration without the trailing semicolon (shared with for-init)."""
        type_ref = self._take_type()
        name_tok = self.expect_identifier()
        name = AstNode(C_NAME, name=name_tok.text, line=name_tok.line, column=name_tok.column)
        name.type_name = type_ref.name
        children = [type_ref, name]
        if self.at("="):
            children.append(self.expect("="))
            children.append(self.parse_expression())
        return AstNode(C_VARDECL, children=children)

    def parse_assign_no_semi(self) -> AstNode:
        expr = self.parse_expression()
        node = AstNode(C_ASSIGN, children=[expr, self.expect("="), self.parse_expression()])
        self._check_assign_target(expr)
        return node

    def parse_if(self) -> AstNode:
        children = [self.expect("if"), self.expect("("), self.parse_expression(), self.expect(")")]
        children.append(self.parse_statement())
        if self.at("else"):
            children.append(self.expect("else"))
            children.append(self.parse_statement())
        return AstNode(C_IF, children=children)

    def parse_while(self) -> AstNode:
        children = [self.expect("while"), self.expect("("), self.parse_expression(), self.expect(")")]
        children.append(self.parse_statement())
        return AstNode(C_WHILE, children=children)

    def parse_for(self) -> AstNode:
        children = [self.expect("for"), self.expect("(")]
        if self._at_var_decl():
            children.append(self.parse_var_decl())
        else:
            children.append(self.parse_assign_no_semi())
        children.append(self.expect(";"))
        children.append(self.parse_expression())
        children.append(self.expect(";"))
        children.append(self.parse_assign_no_semi())
        children.append(self.expect(")"))
        children.append(self.parse_statement())
        return AstNode(C_FOR, children=children)

    # ---- expressions --------------------------------------------------

    def parse_expression(self) -> AstNode:
        return self._parse_binary(0)

    def _parse_binary(self, level: int) -> AstNode:
        if level >= len(BINARY_PRECEDENCE):
            return self.parse_unary()
        node = self._parse_binary(level + 1)
        while self.at_kind(KW_OPERATOR) and self.peek().text in BINARY_PRECEDENCE[level]:
            op = _tok(self.peek())
            self.pos += 1
            right = self._parse_binary(level + 1)
            node = AstNode(C_BINOP, children=[node, op, right])
        return node

    def parse_unary(self) -> AstNode:
        if self.at("!") or self.at("-"):
            op = _tok(self.peek())
            self.pos += 1
            return AstNode(C_UNOP, children=[op, self.parse_unary()])
        return self.parse_postfix()

    def parse_postfix(self) -> AstNode:
        node = self.parse_primary()
        while self.at("."):
            dot = self.expect(".")
            member_tok = self.expect_identifier()
            member = AstNode(C_NAMEUSE, name=member_tok.text, line=member_tok.line, column=member_tok.column)
            if self.at("("):
                children = [node, dot, member, self.expect("(")]
                children.extend(self._parse_args())
                children.append(self.expect(")"))
                node = AstNode(C_CALL, children=children)
            else:
                node = AstNode(C_FIELDACCESS, children=[node, dot, member])
        return node

    def _parse_args(self) -> list[AstNode]:
        out = []
        first = True
        while not self.at(")"):
            if not first:
                out.append(self.expect(","))
            out.append(self.parse_expression())
            first = False
        return out

    def parse_primary(self) -> AstNode:
        t = self.peek()
        if t is None:
            self._err(["<expression>"])
        if t.kind == KW_LITERAL:
            self.pos += 1
            return AstNode(C_LITERAL, name=t.text, line=t.line, column=t.column)
        if t.text == "(":
            children = [self.expect("("), self.parse_expression(), self.expect(")")]
            return AstNode(C_PAREN, children=children)
        if t.text == "this":
            self.pos += 1
            return _tok(t)
        if t.text == "new":
            children = [self.expect("new"), self._take_type(), self.expect("(")]
            children.extend(self._parse_args())
            children.append(self.expect(")"))
            return AstNode(C_NEW, children=children)
        if t.kind == KW_IDENTIFIER:
            self.pos += 1
            name = AstNode(C_NAMEUSE, name=t.text, line=t.line, column=t.column)
            if self.at("("):
                children = [name, self.expect("(")]
                children.extend(self._parse_args())
                children.append(self.expect(")"))
                return AstNode(C_CALL, children=children)
            return name
        self._err(["<expression>"])


# ---- name resolution -------------------------------------------------


def _class_tables(unit: AstNode):
    """name -> {fields: name -> Name leaf, methods: name -> Name leaf} per class."""
    tables = {}
    for cls in unit.children:
        if cls.construct != C_CLASS:
            continue
        cname = _decl_name_leaf(cls)
        fields, methods = {}, {}
        for member in cls.children:
            if member.construct == C_FIELD:
                leaf = _decl_name_leaf(member)
                fields[leaf.name] = leaf
            elif member.construct == C_METHOD:
                leaf = _decl_name_leaf(member)
                methods[leaf.name] = leaf
        tables[cname.name] = {"class_name": cname, "fields": fields, "methods": methods}
    return tables


def _decl_name_leaf(node: AstNode) -> AstNode:
    for c in node.children:
        if c.construct == C_NAME:
            return c
    raise ValueError(f"declaration {node.construct} has no name leaf")


class _Resolver:
    def __init__(self, unit: AstNode):
        self.unit = unit
        self.tables = _class_tables(unit)

    def run(self):
        for cls in self.unit.children:
            if cls.construct == C_CLASS:
                self._resolve_class(cls)

    def _resolve_class(self, cls: AstNode):
        cname = _decl_name_leaf(cls).name
        table = self.tables[cname]
        for member in cls.children:
            if member.construct == C_FIELD:
                for c in member.children:
                    if c.construct not in (C_NAME, C_TYPEREF) and not c.construct.startswith(TOK_PREFIX):
                        self._resolve_expr(c, [{}], table)
            elif member.construct == C_METHOD:
                scope = {}
                for c in member.children:
                    if c.construct == C_PARAM:
                        leaf = _decl_name_leaf(c)
                        scope[leaf.name] = leaf
                body = member.children[-1]
                self._resolve_stmt(body, [scope], table)

    def _resolve_stmt(self, node: AstNode, scopes: list[dict], table: dict):
        c = node.construct
        if c == C_BLOCK:
            scopes.append({})
            for child in node.children:
                self._resolve_stmt(child, scopes, table)
            scopes.pop()
        elif c == C_VARDECL:
            for child in node.children:
                if child.construct not in (C_NAME, C_TYPEREF) and not child.construct.startswith(TOK_PREFIX):
                    self._resolve_expr(child, scopes, table)
            leaf = _decl_name_leaf(node)
            scopes[-1][leaf.name] = leaf
        elif c in (C_IF, C_WHILE, C_RETURN, C_EXPRSTMT, C_ASSIGN):
            for child in node.children:
                if child.construct in (C_BLOCK, C_VARDECL, C_IF, C_WHILE, C_FOR, C_RETURN, C_EXPRSTMT, C_ASSIGN):
                    self._resolve_stmt(child, scopes, table)
                elif not child.construct.startswith(TOK_PREFIX):
                    self._resolve_expr(child, scopes, table)
        elif c == C_FOR:
            scopes.append({})
            for child in node.children:
                if child.construct in (C_VARDECL, C_ASSIGN, C_BLOCK, C_IF, C_WHILE, C_FOR, C_RETURN, C_EXPRSTMT):
                    self._resolve_stmt(child, scopes, table)
                elif not child.construct.startswith(TOK_PREFIX):
                    self._resolve_expr(child, scopes, table)
            scopes.pop()
        else:
            self._resolve_expr(node, scopes, table)

    def _lookup(self, name: str, scopes: list[dict], table: dict) -> AstNode | None:
        for scope in reversed(scopes):
            if name in scope:
                return scope[name]
        if name in table["fields"]:
            return table["fields"][name]
        if name in table["methods"]:
            return table["methods"][name]
        return None

    def _bind(self, leaf: AstNode, decl: AstNode | None):
        if decl is None:
            leaf.unresolved = True
            leaf.type_name = gr.UNK_TYPE
        else:
            leaf.decl = decl
            leaf.type_name = decl.type_name

    def _resolve_expr(self, node: AstNode, scopes: list[dict], table: dict):
        c = node.construct
        if c == C_NAMEUSE:
            self._bind(node, self._lookup(node.name, scopes, table))
            return
        if c == C_FIELDACCESS:
            receiver, _, member = node.children
            self._resolve_expr(receiver, scopes, table)
            self._bind(member, self._member_decl(receiver, member.name, scopes, table, "fields"))
            return
        if c == C_CALL:
            if node.children[0].construct == C_NAMEUSE and node.children[1].construct == TOK_PREFIX + "(":
                # bare call: name ( args )
                callee = node.children[0]
                self._bind(callee, table["methods"].get(callee.name))
                rest = node.children[2:]
            else:
                receiver, _, callee = node.children[0], node.children[1], node.children[2]
                self._resolve_expr(receiver, scopes, table)
                self._bind(callee, self._member_decl(receiver, callee.name, scopes, table, "methods"))
                rest = node.children[4:]
            for child in rest:
                if not child.construct.startswith(TOK_PREFIX):
                    self._resolve_expr(child, scopes, table)
            return
        for child in node.children:
            if not child.construct.startswith(TOK_PREFIX):
                self._resolve_expr(child, scopes, table)

    def _member_decl(self, receiver: AstNode, member: str, scopes, table, slot) -> AstNode | None:
        target = None
        if receiver.construct == TOK_PREFIX + "this":
            target = table
        elif receiver.construct == C_NAMEUSE:
            var_decl = self._lookup(receiver.name, scopes, table)
            if var_decl is not None and var_decl.type_name in self.tables:
                target = self.tables[var_decl.type_name]
            elif var_decl is None and receiver.name in self.tables:
                # class-name qualifier: bind to the class declaration itself
                target = self.tables[receiver.name]
                receiver.decl = target["class_name"]
                receiver.type_name = receiver.name
                receiver.unresolved = False
        if target is None:
            return None
        return target[slot].get(member)


def _renumber(root: AstNode) -> None:
    """Assign ids in pre-order so id order matches textual order."""
    counter = 0
    stack = [root]
    while stack:
        node = stack.pop()
        node.id = counter
        counter += 1
        stack.extend(reversed(node.children))


def parse(tokens: list[Token]) -> AstNode:
    """Parse a token stream into a resolved AST; raises ParseError on bad input."""
    parser = Parser(tokens)
    root = parser.parse_unit()
    _Resolver(root).run()
    _renumber(root)
    return root


def ast_to_graph(root: AstNode, file: str = "") -> gr.CodeGraph:
    """Convert a resolved AST to a CodeGraph with AST and NEXT_TOKEN edges.

    One graph node per AST node; AST edges parent->child; NEXT_TOKEN edges
    between consecutive children of each node.  Name and NameUse leaves
    become variable nodes carrying name and declared type.
    """
    g = gr.CodeGraph(file=file)
    for node in root.walk():
        kind = gr.VARIABLE if node.construct in (C_NAME, C_NAMEUSE) else gr.SYNTAX
        type_name = None
        if kind == gr.VARIABLE:
            type_name = node.type_name if node.type_name else gr.UNK_TYPE
        g.add_node(gr.Node(node.id, kind, node.construct, node.name, type_name))
        if node.line is not None:
            g.positions[node.id] = (node.line, node.column)
    for node in root.walk():
        if node.children:
            g.children[node.id] = [c.id for c in node.children]
            for c in node.children:
                g.add_edge(node.id, c.id, gr.EDGE_AST)
            for a, b in zip(node.children, node.children[1:]):
                g.add_edge(a.id, b.id, gr.EDGE_NEXT_TOKEN)
    g.root = root.id
    for node in root.walk():
        if node.construct == C_NAME:
            g.decl_of[node.id] = node.id
        elif node.decl is not None:
            g.decl_of[node.id] = node.decl.id
        elif node.unresolved:
            g.unresolved.add(node.id)
    return g


def parse_source(text: str, file: str = "") -> gr.CodeGraph:
    """tokenize + parse + ast_to_graph in one call."""
    return ast_to_graph(parse(tokenize(text)), file=file)
