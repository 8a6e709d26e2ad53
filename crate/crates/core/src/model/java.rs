//! Structural parser for the supported Java subset.
//!
//! The parser recognizes declarations (types, methods, fields), statements,
//! anonymous and local classes, lambdas, and call sites. Expressions are not
//! turned into trees; instead every statement carries a flat [`Facts`] record
//! of the calls, identifier uses and assignments it contains. Generics,
//! annotations and lambdas are accepted and skipped.

use std::ops::Range;

use super::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct JavaFile {
    pub package: Option<String>,
    /// Imported names, `static` dropped; wildcards keep their trailing `.*`.
    pub imports: Vec<String>,
    /// Offset just after the last import (or package) declaration, or 0.
    pub import_anchor: usize,
    pub types: Vec<TypeDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

#[derive(Debug, Clone)]
pub struct TypeDecl {
    /// `None` for anonymous classes.
    pub name: Option<String>,
    pub kind: TypeKind,
    /// Written supertype names with type arguments stripped.
    pub supertypes: Vec<String>,
    pub start: usize,
    /// `body.start` is the offset of `{`, `body.end` the offset of the closing `}`.
    pub body: Range<usize>,
    pub methods: Vec<MethodSyntax>,
    pub fields: Vec<FieldSyntax>,
    pub types: Vec<TypeDecl>,
    /// Anonymous classes in field initializers, initializer blocks and enum
    /// constant bodies. They have no enclosing method and are not modeled.
    pub unmodeled_anonymous: usize,
}

#[derive(Debug, Clone)]
pub struct MethodSyntax {
    pub name: String,
    pub name_offset: usize,
    pub start: usize,
    pub params: Vec<Param>,
    pub is_constructor: bool,
    pub body: Option<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub ty: String,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct FieldSyntax {
    pub ty: String,
    pub name: String,
    pub offset: usize,
    pub init: Init,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub open: usize,
    pub close: usize,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Expr,
    LocalVar,
    LocalClass,
    Block,
    If,
    Loop,
    Try,
    Switch,
    Synchronized,
    Return,
    Throw,
    Jump,
    /// Explicit `this(...)` / `super(...)` constructor invocation.
    CtorCall,
    Labeled,
    Assert,
    Yield,
    Empty,
}

impl StmtKind {
    /// Statements after which control never falls through.
    pub fn is_terminal(self) -> bool {
        matches!(self, StmtKind::Return | StmtKind::Throw | StmtKind::Jump | StmtKind::Yield)
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Range<usize>,
    /// Facts from the statement's own expressions (headers, initializers),
    /// excluding nested statements and class bodies.
    pub facts: Facts,
    pub children: Vec<Stmt>,
    /// Anonymous and local classes declared directly by this statement.
    pub types: Vec<TypeDecl>,
    pub locals: Vec<LocalVar>,
}

#[derive(Debug, Clone, Default)]
pub struct Facts {
    pub calls: Vec<CallSite>,
    /// Identifier uses (call names excluded), with offsets.
    pub idents: Vec<(String, usize)>,
    pub assignments: Vec<Assignment>,
    /// `R.layout.<name>` references with the offset of `R`.
    pub layout_refs: Vec<(String, usize)>,
}

#[derive(Debug, Clone)]
pub struct CallSite {
    pub name: String,
    pub offset: usize,
    /// Receiver expression text with whitespace removed.
    pub receiver: Option<String>,
    pub args: Vec<Arg>,
    pub span: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct Arg {
    pub span: Range<usize>,
    pub shape: ArgShape,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgShape {
    /// `new T(..) { .. }`; carries the offset of the class body `{`.
    Anonymous(usize),
    /// `new T(..)` without a body.
    New(String),
    Ident(String),
    This,
    Other,
}

#[derive(Debug, Clone)]
pub struct Assignment {
    /// Root name of the assigned location (`x`, `this.x` and `a.x` all give `x`).
    pub target: String,
    pub rhs: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct LocalVar {
    pub name: String,
    pub ty: String,
    pub offset: usize,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Init {
    None,
    Anonymous(usize),
    New(String),
    Other,
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null",
];

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "void",
];

const MODIFIERS: &[&str] = &[
    "public", "private", "protected", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default", "sealed",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn parse_java(src: &str) -> Result<JavaFile, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        offset: e.offset,
        message: e.message,
    })?;
    let mut p = Parser { src, toks, pos: 0 };
    p.file()
}

/// Per-statement accumulator threaded through expression scanning.
#[derive(Default)]
struct Ctx {
    facts: Facts,
    types: Vec<TypeDecl>,
    children: Vec<Stmt>,
}

struct Creator {
    end: usize,
    shape: ArgShape,
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn tok(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek(&self) -> Option<&'a str> {
        self.peek_at(0)
    }

    fn peek_at(&self, n: usize) -> Option<&'a str> {
        let src = self.src;
        self.toks.get(self.pos + n).map(|t| &src[t.span.clone()])
    }

    fn at(&self, s: &str) -> bool {
        self.peek() == Some(s)
    }

    fn at_ident(&self) -> bool {
        self.tok().is_some_and(|t| t.kind == TokenKind::Ident)
    }

    fn offset(&self) -> usize {
        self.tok().map_or(self.src.len(), |t| t.span.start)
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn bump(&mut self) -> &'a str {
        let src = self.src;
        let t = &self.toks[self.pos];
        self.pos += 1;
        &src[t.span.clone()]
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, s: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Some(t) if t == s => {
                let off = self.offset();
                self.pos += 1;
                Ok(off)
            }
            Some(t) => self.err(format!("expected `{s}`, found `{t}`")),
            None => self.err(format!("expected `{s}`, found end of file")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        if self.at_ident() && !is_keyword(self.peek().unwrap_or("")) {
            Ok(self.bump().to_string())
        } else {
            match self.peek() {
                Some(t) => self.err(format!("expected identifier, found `{t}`")),
                None => self.err("expected identifier, found end of file"),
            }
        }
    }

    fn qualified_name(&mut self) -> Result<String, ParseError> {
        let mut name = self.ident()?;
        while self.at(".") && self.peek_at(1).is_some_and(|t| t != "*") {
            self.pos += 1;
            name.push('.');
            name.push_str(&self.ident()?);
        }
        Ok(name)
    }

    fn file(&mut self) -> Result<JavaFile, ParseError> {
        let mut file = JavaFile::default();
        let save = self.pos;
        self.skip_annotations()?;
        if self.at("package") {
            self.pos += 1;
            file.package = Some(self.qualified_name()?);
            self.expect(";")?;
            file.import_anchor = self.prev_end();
        } else {
            self.pos = save;
        }
        while self.at("import") {
            self.pos += 1;
            if self.at("static") {
                self.pos += 1;
            }
            let mut name = self.qualified_name()?;
            if self.at(".") && self.peek_at(1) == Some("*") {
                self.pos += 2;
                name.push_str(".*");
            }
            self.expect(";")?;
            file.import_anchor = self.prev_end();
            file.imports.push(name);
        }
        while self.tok().is_some() {
            if self.at(";") {
                self.pos += 1;
                continue;
            }
            let start = self.offset();
            self.modifiers()?;
            file.types.push(self.type_decl(start)?);
        }
        Ok(file)
    }

    fn skip_annotations(&mut self) -> Result<(), ParseError> {
        while self.at("@") && self.peek_at(1) != Some("interface") {
            self.pos += 1;
            self.qualified_name()?;
            if self.at("(") {
                self.skip_balanced("(", ")")?;
            }
        }
        Ok(())
    }

    fn modifiers(&mut self) -> Result<(), ParseError> {
        loop {
            if self.at("@") && self.peek_at(1) != Some("interface") {
                self.skip_annotations()?;
            } else if self.peek().is_some_and(|t| MODIFIERS.contains(&t))
                && !(self.at("default") && matches!(self.peek_at(1), Some(":") | Some("->")))
            {
                self.pos += 1;
            } else if self.at("non") && self.peek_at(1) == Some("-") && self.peek_at(2) == Some("sealed") {
                self.pos += 3;
            } else {
                return Ok(());
            }
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> Result<(), ParseError> {
        self.expect(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            match self.peek() {
                None => return self.err(format!("unbalanced `{open}`")),
                Some(t) if t == open => depth += 1,
                Some(t) if t == close => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_type_args(&mut self) -> Result<(), ParseError> {
        // `<` ... `>` with nesting; type arguments never contain parentheses.
        self.expect("<")?;
        let mut depth = 1usize;
        while depth > 0 {
            match self.peek() {
                None => return self.err("unbalanced `<`"),
                Some("<") => depth += 1,
                Some(">") => depth -= 1,
                Some(";") | Some("{") | Some("}") | Some("(") | Some(")") => {
                    return self.err("malformed type arguments")
                }
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn at_type_decl_keyword(&self) -> bool {
        match self.peek() {
            Some("class") | Some("interface") | Some("enum") => true,
            Some("@") => self.peek_at(1) == Some("interface"),
            Some("record") => {
                self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokenKind::Ident)
                    && matches!(self.peek_at(2), Some("(") | Some("<"))
            }
            _ => false,
        }
    }

    /// Parses a type and returns its text with whitespace and type arguments removed.
    fn ty(&mut self) -> Result<String, ParseError> {
        let mut text = String::new();
        if self.at("?") {
            self.pos += 1;
            text.push('?');
            return Ok(text);
        }
        self.skip_annotations()?;
        text.push_str(&self.ident_or_primitive()?);
        loop {
            if self.at("<") {
                self.skip_type_args()?;
            } else if self.at(".") && self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokenKind::Ident) {
                self.pos += 1;
                text.push('.');
                text.push_str(&self.ident()?);
            } else {
                break;
            }
        }
        while self.at("[") && self.peek_at(1) == Some("]") {
            self.pos += 2;
            text.push_str("[]");
        }
        Ok(text)
    }

    fn ident_or_primitive(&mut self) -> Result<String, ParseError> {
        if self.peek().is_some_and(|t| PRIMITIVES.contains(&t)) {
            return Ok(self.bump().to_string());
        }
        self.ident()
    }

    /// Speculative type-then-name lookahead used to tell declarations from expressions.
    fn looks_like_decl(&mut self) -> bool {
        let save = self.pos;
        let ok = (|| {
            if self.peek().is_some_and(|t| is_keyword(t) && !PRIMITIVES.contains(&t)) {
                return false;
            }
            if self.ty().is_err() {
                return false;
            }
            if !self.at_ident() || self.peek().is_some_and(is_keyword) {
                return false;
            }
            self.pos += 1;
            while self.at("[") && self.peek_at(1) == Some("]") {
                self.pos += 2;
            }
            matches!(self.peek(), Some("=") | Some(";") | Some(",") | Some(":"))
        })();
        self.pos = save;
        ok
    }

    fn type_decl(&mut self, start: usize) -> Result<TypeDecl, ParseError> {
        let kind = match self.peek() {
            Some("class") => TypeKind::Class,
            Some("interface") => TypeKind::Interface,
            Some("enum") => TypeKind::Enum,
            Some("record") => TypeKind::Record,
            Some("@") if self.peek_at(1) == Some("interface") => {
                self.pos += 1;
                TypeKind::Annotation
            }
            Some(t) => return self.err(format!("expected type declaration, found `{t}`")),
            None => return self.err("expected type declaration, found end of file"),
        };
        self.pos += 1;
        let name = self.ident()?;
        if self.at("<") {
            self.skip_type_args()?;
        }
        if kind == TypeKind::Record && self.at("(") {
            self.skip_balanced("(", ")")?;
        }
        let mut supertypes = Vec::new();
        while let Some(kw @ ("extends" | "implements" | "permits")) = self.peek() {
            self.pos += 1;
            loop {
                let t = self.ty()?;
                if kw != "permits" {
                    supertypes.push(t);
                }
                if self.at(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let mut decl = self.class_body(kind, Some(name.clone()), start)?;
        decl.supertypes = supertypes;
        Ok(decl)
    }

    fn class_body(
        &mut self,
        kind: TypeKind,
        name: Option<String>,
        start: usize,
    ) -> Result<TypeDecl, ParseError> {
        let open = self.expect("{")?;
        let mut decl = TypeDecl {
            name: name.clone(),
            kind,
            supertypes: Vec::new(),
            start,
            body: open..open,
            methods: Vec::new(),
            fields: Vec::new(),
            types: Vec::new(),
            unmodeled_anonymous: 0,
        };
        if kind == TypeKind::Enum {
            self.enum_constants(&mut decl)?;
        }
        loop {
            match self.peek() {
                None => return self.err("unterminated class body"),
                Some("}") => break,
                Some(";") => {
                    self.pos += 1;
                    continue;
                }
                _ => {}
            }
            self.member(&mut decl)?;
        }
        decl.body.end = self.expect("}")?;
        Ok(decl)
    }

    fn enum_constants(&mut self, decl: &mut TypeDecl) -> Result<(), ParseError> {
        loop {
            self.skip_annotations()?;
            match self.peek() {
                Some(";") => {
                    self.pos += 1;
                    return Ok(());
                }
                Some("}") => return Ok(()),
                _ => {}
            }
            self.ident()?;
            if self.at("(") {
                let mut ctx = Ctx::default();
                self.call_args(&mut ctx)?;
                decl.unmodeled_anonymous += count_anonymous(&ctx.types);
            }
            if self.at("{") {
                let body = self.class_body(TypeKind::Class, None, self.offset())?;
                decl.unmodeled_anonymous += 1 + count_anonymous(&body.types);
            }
            if self.at(",") {
                self.pos += 1;
            }
        }
    }

    fn member(&mut self, decl: &mut TypeDecl) -> Result<(), ParseError> {
        let start = self.offset();
        self.modifiers()?;
        if self.at("{") {
            let block = self.block()?;
            decl.unmodeled_anonymous += block_anonymous(&block.stmts);
            return Ok(());
        }
        if self.at_type_decl_keyword() {
            let nested = self.type_decl(start)?;
            decl.types.push(nested);
            return Ok(());
        }
        if self.at("<") {
            self.skip_type_args()?;
        }
        // Constructor, or compact record constructor.
        if self.at_ident() && matches!(self.peek_at(1), Some("(") | Some("{")) {
            let is_ctor = self.peek_at(1) == Some("(") || decl.kind == TypeKind::Record;
            if is_ctor && !PRIMITIVES.contains(&self.peek().unwrap_or("")) {
                let name_offset = self.offset();
                let name = self.ident()?;
                let params = if self.at("(") { self.params()? } else { Vec::new() };
                self.throws_clause()?;
                let body = Some(self.block()?);
                decl.methods.push(MethodSyntax {
                    name,
                    name_offset,
                    start,
                    params,
                    is_constructor: true,
                    body,
                });
                return Ok(());
            }
        }
        let ty = self.ty()?;
        let name_offset = self.offset();
        let name = self.ident()?;
        if self.at("(") {
            let params = self.params()?;
            while self.at("[") && self.peek_at(1) == Some("]") {
                self.pos += 2;
            }
            self.throws_clause()?;
            let body = match self.peek() {
                Some("{") => Some(self.block()?),
                Some(";") => {
                    self.pos += 1;
                    None
                }
                Some("default") => {
                    self.pos += 1;
                    let mut ctx = Ctx::default();
                    self.expr(&mut ctx, &[";"], false)?;
                    self.expect(";")?;
                    None
                }
                Some(t) => return self.err(format!("expected method body, found `{t}`")),
                None => return self.err("expected method body, found end of file"),
            };
            decl.methods.push(MethodSyntax {
                name,
                name_offset,
                start,
                params,
                is_constructor: false,
                body,
            });
            return Ok(());
        }
        // Field declarators.
        let mut name = name;
        let mut offset = name_offset;
        loop {
            while self.at("[") && self.peek_at(1) == Some("]") {
                self.pos += 2;
            }
            let mut init = Init::None;
            if self.at("=") {
                self.pos += 1;
                let mut ctx = Ctx::default();
                let (shape, _) = self.expr(&mut ctx, &[",", ";"], false)?;
                decl.unmodeled_anonymous += count_anonymous(&ctx.types) + block_anonymous(&ctx.children);
                init = init_from_shape(shape);
            }
            decl.fields.push(FieldSyntax {
                ty: ty.clone(),
                name,
                offset,
                init,
            });
            if self.at(",") {
                self.pos += 1;
                offset = self.offset();
                name = self.ident()?;
            } else {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.at(")") {
            self.modifiers()?;
            let mut ty = self.ty()?;
            if self.at("...") {
                self.pos += 1;
                ty.push_str("...");
            }
            let name = if self.at("this") {
                self.bump().to_string()
            } else {
                self.ident()?
            };
            while self.at("[") && self.peek_at(1) == Some("]") {
                self.pos += 2;
                ty.push_str("[]");
            }
            params.push(Param { ty, name });
            if self.at(",") {
                self.pos += 1;
            } else if !self.at(")") {
                return self.err("expected `,` or `)` in parameter list");
            }
        }
        self.pos += 1;
        Ok(params)
    }

    fn throws_clause(&mut self) -> Result<(), ParseError> {
        if self.at("throws") {
            self.pos += 1;
            loop {
                self.ty()?;
                if self.at(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        Ok(())
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        let open = self.expect("{")?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                None => return self.err("unterminated block"),
                Some("}") => break,
                _ => stmts.push(self.stmt()?),
            }
        }
        let close = self.expect("}")?;
        Ok(Block { open, close, stmts })
    }

    fn finish(&self, kind: StmtKind, start: usize, ctx: Ctx, locals: Vec<LocalVar>) -> Stmt {
        Stmt {
            kind,
            span: start..self.prev_end(),
            facts: ctx.facts,
            children: ctx.children,
            types: ctx.types,
            locals,
        }
    }

    fn paren_expr(&mut self, ctx: &mut Ctx) -> Result<(), ParseError> {
        self.expect("(")?;
        self.expr(ctx, &[")"], false)?;
        self.expect(")")?;
        Ok(())
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.offset();
        let mut ctx = Ctx::default();
        let head = self.peek().unwrap_or("");
        let next = self.peek_at(1);
        let kind = match head {
            "{" => {
                let block = self.block()?;
                ctx.children = block.stmts;
                StmtKind::Block
            }
            ";" => {
                self.pos += 1;
                StmtKind::Empty
            }
            "if" => {
                self.pos += 1;
                self.paren_expr(&mut ctx)?;
                ctx.children.push(self.stmt()?);
                if self.at("else") {
                    self.pos += 1;
                    ctx.children.push(self.stmt()?);
                }
                StmtKind::If
            }
            "while" => {
                self.pos += 1;
                self.paren_expr(&mut ctx)?;
                ctx.children.push(self.stmt()?);
                StmtKind::Loop
            }
            "do" => {
                self.pos += 1;
                ctx.children.push(self.stmt()?);
                self.expect("while")?;
                self.paren_expr(&mut ctx)?;
                self.expect(";")?;
                StmtKind::Loop
            }
            "for" => {
                self.pos += 1;
                self.expect("(")?;
                self.header(&mut ctx)?;
                ctx.children.push(self.stmt()?);
                StmtKind::Loop
            }
            "try" => {
                self.pos += 1;
                if self.at("(") {
                    self.pos += 1;
                    self.header(&mut ctx)?;
                }
                ctx.children.extend(self.block()?.stmts);
                while self.at("catch") {
                    self.pos += 1;
                    self.expect("(")?;
                    self.modifiers()?;
                    self.ty()?;
                    while self.at("|") {
                        self.pos += 1;
                        self.ty()?;
                    }
                    self.ident()?;
                    self.expect(")")?;
                    ctx.children.extend(self.block()?.stmts);
                }
                if self.at("finally") {
                    self.pos += 1;
                    ctx.children.extend(self.block()?.stmts);
                }
                StmtKind::Try
            }
            "switch" => {
                self.pos += 1;
                self.switch_rest(&mut ctx)?;
                StmtKind::Switch
            }
            "synchronized" if next == Some("(") => {
                self.pos += 1;
                self.paren_expr(&mut ctx)?;
                ctx.children.extend(self.block()?.stmts);
                StmtKind::Synchronized
            }
            "return" | "throw" => {
                self.pos += 1;
                if !self.at(";") {
                    self.expr(&mut ctx, &[";"], false)?;
                }
                self.expect(";")?;
                if head == "return" {
                    StmtKind::Return
                } else {
                    StmtKind::Throw
                }
            }
            "yield" if !matches!(next, Some("=") | Some("(") | Some(".") | Some(";")) => {
                self.pos += 1;
                self.expr(&mut ctx, &[";"], false)?;
                self.expect(";")?;
                StmtKind::Yield
            }
            "break" | "continue" => {
                self.pos += 1;
                if self.at_ident() {
                    self.pos += 1;
                }
                self.expect(";")?;
                StmtKind::Jump
            }
            "assert" => {
                self.pos += 1;
                self.expr(&mut ctx, &[";"], false)?;
                self.expect(";")?;
                StmtKind::Assert
            }
            "this" | "super" if next == Some("(") => {
                self.expr(&mut ctx, &[";"], false)?;
                self.expect(";")?;
                StmtKind::CtorCall
            }
            _ if self.at_ident() && !is_keyword(head) && next == Some(":") => {
                self.pos += 2;
                ctx.children.push(self.stmt()?);
                StmtKind::Labeled
            }
            _ => return self.decl_or_expr_stmt(start),
        };
        Ok(self.finish(kind, start, ctx, Vec::new()))
    }

    fn decl_or_expr_stmt(&mut self, start: usize) -> Result<Stmt, ParseError> {
        let mut ctx = Ctx::default();
        let save = self.pos;
        self.modifiers()?;
        if self.at_type_decl_keyword() {
            let local = self.type_decl(start)?;
            ctx.types.push(local);
            return Ok(self.finish(StmtKind::LocalClass, start, ctx, Vec::new()));
        }
        if self.looks_like_decl() {
            let ty = self.ty()?;
            let mut locals = Vec::new();
            loop {
                let offset = self.offset();
                let name = self.ident()?;
                while self.at("[") && self.peek_at(1) == Some("]") {
                    self.pos += 2;
                }
                let mut init = Init::None;
                if self.at("=") {
                    self.pos += 1;
                    let rhs_start = self.offset();
                    let (shape, _) = self.expr(&mut ctx, &[",", ";"], false)?;
                    ctx.facts.assignments.push(Assignment {
                        target: name.clone(),
                        rhs: rhs_start..self.prev_end(),
                    });
                    init = init_from_shape(shape);
                }
                locals.push(LocalVar {
                    name,
                    ty: ty.clone(),
                    offset,
                    init,
                });
                if self.at(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            self.expect(";")?;
            return Ok(self.finish(StmtKind::LocalVar, start, ctx, locals));
        }
        self.pos = save;
        self.expr(&mut ctx, &[";"], true)?;
        self.expect(";")?;
        Ok(self.finish(StmtKind::Expr, start, ctx, Vec::new()))
    }

    /// `for (...)` and `try (...)` headers: `;`-separated parts up to `)`.
    fn header(&mut self, ctx: &mut Ctx) -> Result<(), ParseError> {
        loop {
            self.modifiers()?;
            if self.looks_like_decl() {
                self.ty()?;
            }
            self.expr(ctx, &[";", ")"], false)?;
            if self.at(";") {
                self.pos += 1;
            } else {
                self.expect(")")?;
                return Ok(());
            }
        }
    }

    fn switch_rest(&mut self, ctx: &mut Ctx) -> Result<(), ParseError> {
        self.paren_expr(ctx)?;
        self.expect("{")?;
        loop {
            match self.peek() {
                None => return self.err("unterminated switch"),
                Some("}") => break,
                Some("case") => {
                    self.pos += 1;
                    self.expr(ctx, &[":", "->"], false)?;
                    self.pos += 1;
                }
                Some("default") if matches!(self.peek_at(1), Some(":") | Some("->")) => {
                    self.pos += 2;
                }
                _ => {
                    let s = self.stmt()?;
                    ctx.children.push(s);
                }
            }
        }
        self.expect("}")?;
        Ok(())
    }

    fn call_args(&mut self, ctx: &mut Ctx) -> Result<Vec<Arg>, ParseError> {
        self.expect("(")?;
        let mut args = Vec::new();
        while !self.at(")") {
            let start = self.offset();
            let (shape, _) = self.expr(ctx, &[",", ")"], false)?;
            args.push(Arg {
                span: start..self.prev_end(),
                shape,
            });
            if self.at(",") {
                self.pos += 1;
            }
        }
        self.pos += 1;
        Ok(args)
    }

    /// `new` creator expression, positioned at `new`.
    fn creator(&mut self, ctx: &mut Ctx) -> Result<Creator, ParseError> {
        let start = self.offset();
        self.expect("new")?;
        if self.at("<") {
            self.skip_type_args()?;
        }
        self.skip_annotations()?;
        let mut ty = self.ident_or_primitive()?;
        loop {
            if self.at("<") {
                self.skip_type_args()?;
            } else if self.at(".") {
                self.pos += 1;
                ty.push('.');
                ty.push_str(&self.ident()?);
            } else {
                break;
            }
        }
        if self.at("[") {
            while self.at("[") {
                self.pos += 1;
                if !self.at("]") {
                    self.expr(ctx, &["]"], false)?;
                }
                self.expect("]")?;
            }
            if self.at("{") {
                self.array_init(ctx)?;
            }
            return Ok(Creator {
                end: self.pos,
                shape: ArgShape::Other,
            });
        }
        let name_offset = self.offset();
        let args = self.call_args(ctx)?;
        ctx.facts.calls.push(CallSite {
            name: format!("<init>{ty}"),
            offset: name_offset,
            receiver: None,
            args,
            span: start..self.prev_end(),
        });
        if self.at("{") {
            let body_open = self.offset();
            let mut anon = self.class_body(TypeKind::Class, None, start)?;
            anon.supertypes = vec![ty];
            ctx.types.push(anon);
            return Ok(Creator {
                end: self.pos,
                shape: ArgShape::Anonymous(body_open),
            });
        }
        Ok(Creator {
            end: self.pos,
            shape: ArgShape::New(ty),
        })
    }

    fn array_init(&mut self, ctx: &mut Ctx) -> Result<(), ParseError> {
        self.expect("{")?;
        while !self.at("}") {
            if self.at("{") {
                self.array_init(ctx)?;
            } else {
                self.expr(ctx, &[",", "}"], false)?;
            }
            if self.at(",") {
                self.pos += 1;
            }
        }
        self.expect("}")?;
        Ok(())
    }

    /// Scans an expression up to (not including) one of `stops` at nesting
    /// depth zero. Returns the expression's shape and its token count.
    fn expr(&mut self, ctx: &mut Ctx, stops: &[&str], top: bool) -> Result<(ArgShape, usize), ParseError> {
        let first = self.pos;
        let expr_start = self.offset();
        let mut chain_start = expr_start;
        let mut prev: Option<&'a str> = None;
        let mut creator: Option<(usize, Creator)> = None;
        loop {
            let Some(tok) = self.tok().cloned() else {
                return self.err("unexpected end of file in expression");
            };
            let text = tok.text(self.src);
            if stops.contains(&text) {
                break;
            }
            let continues_chain = prev == Some(".");
            match text {
                "(" => {
                    if !continues_chain {
                        chain_start = tok.span.start;
                    }
                    self.pos += 1;
                    self.expr(ctx, &[")"], false)?;
                    self.expect(")")?;
                }
                "[" => {
                    self.pos += 1;
                    self.expr(ctx, &["]"], false)?;
                    self.expect("]")?;
                }
                "{" => {
                    if prev == Some("->") {
                        let block = self.block()?;
                        ctx.children.extend(block.stmts);
                    } else {
                        self.array_init(ctx)?;
                    }
                }
                ")" | "]" | "}" | ";" => {
                    return self.err(format!("unexpected `{text}` in expression"));
                }
                "new" => {
                    if !continues_chain {
                        chain_start = tok.span.start;
                    }
                    let idx = self.pos;
                    let c = self.creator(ctx)?;
                    creator = Some((idx, c));
                }
                "switch" => {
                    self.pos += 1;
                    self.switch_rest(ctx)?;
                }
                _ if top && ASSIGN_OPS.contains(&text) => {
                    let target = self.assign_target(first);
                    self.pos += 1;
                    let rhs_start = self.offset();
                    self.expr(ctx, stops, false)?;
                    if let Some(target) = target {
                        ctx.facts.assignments.push(Assignment {
                            target,
                            rhs: rhs_start..self.prev_end(),
                        });
                    }
                    break;
                }
                _ if tok.kind == TokenKind::Ident => {
                    if !continues_chain {
                        chain_start = tok.span.start;
                    }
                    if self.peek_at(1) == Some("(") && !is_keyword(text) {
                        let receiver = if continues_chain {
                            let dot = &self.toks[self.pos - 1];
                            Some(strip_ws(&self.src[chain_start..dot.span.start]))
                        } else {
                            None
                        };
                        let name = text.to_string();
                        self.pos += 1;
                        let slot = ctx.facts.calls.len();
                        let args = self.call_args(ctx)?;
                        ctx.facts.calls.insert(
                            slot,
                            CallSite {
                                name,
                                offset: tok.span.start,
                                receiver,
                                args,
                                span: chain_start..self.prev_end(),
                            },
                        );
                        prev = Some(")");
                        continue;
                    }
                    if text == "R"
                        && self.peek_at(1) == Some(".")
                        && self.peek_at(2) == Some("layout")
                        && self.peek_at(3) == Some(".")
                    {
                        if let Some(t) = self.toks.get(self.pos + 4) {
                            if t.kind == TokenKind::Ident {
                                ctx.facts.layout_refs.push((t.text(self.src).to_string(), tok.span.start));
                            }
                        }
                    }
                    if !is_keyword(text) && !continues_chain {
                        ctx.facts.idents.push((text.to_string(), tok.span.start));
                    } else if continues_chain && !is_keyword(text) {
                        // field access `a.b`: record the member too, so `this.x` reads count
                        ctx.facts.idents.push((text.to_string(), tok.span.start));
                    }
                    self.pos += 1;
                }
                _ => {
                    self.pos += 1;
                }
            }
            prev = Some(self.src_tok(self.pos - 1));
        }
        let count = self.pos - first;
        let shape = match creator {
            Some((idx, c)) if idx == first && c.end == self.pos => c.shape,
            _ => {
                let texts: Vec<&str> = (first..self.pos).map(|i| self.src_tok(i)).collect();
                match texts.as_slice() {
                    ["this"] => ArgShape::This,
                    [_, ".", "this"] => ArgShape::This,
                    [name] if self.toks[first].kind == TokenKind::Ident && !is_keyword(name) => {
                        ArgShape::Ident(name.to_string())
                    }
                    _ => ArgShape::Other,
                }
            }
        };
        Ok((shape, count))
    }

    fn src_tok(&self, i: usize) -> &'a str {
        let src = self.src;
        &src[self.toks[i].span.clone()]
    }

    fn assign_target(&self, first: usize) -> Option<String> {
        if self.pos == first {
            return None;
        }
        let mut i = self.pos - 1;
        // skip trailing index expressions: a[i] = ...
        if self.src_tok(i) == "]" {
            let mut depth = 0usize;
            loop {
                match self.src_tok(i) {
                    "]" => depth += 1,
                    "[" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                if i == first {
                    return None;
                }
                i -= 1;
            }
            if i == first {
                return None;
            }
            i -= 1;
        }
        let t = &self.toks[i];
        (t.kind == TokenKind::Ident).then(|| t.text(self.src).to_string())
    }
}

fn init_from_shape(shape: ArgShape) -> Init {
    match shape {
        ArgShape::Anonymous(off) => Init::Anonymous(off),
        ArgShape::New(t) => Init::New(t),
        _ => Init::Other,
    }
}

fn strip_ws(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn count_anonymous(types: &[TypeDecl]) -> usize {
    types
        .iter()
        .map(|t| usize::from(t.name.is_none()) + t.methods.iter().filter_map(|m| m.body.as_ref()).map(|b| block_anonymous(&b.stmts)).sum::<usize>())
        .sum()
}

fn block_anonymous(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| count_anonymous(&s.types) + block_anonymous(&s.children))
        .sum()
}
