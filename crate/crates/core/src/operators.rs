//! Security operators (source/sink templates) and the sources-and-sinks catalog.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use crate::model::java::parse_java;
use crate::{Error, Result};

const BUNDLED_OPERATORS: &str = include_str!("../config/operators.toml");
const BUNDLED_CATALOG: &str = include_str!("../config/SourcesAndSinks.txt");

/// Placeholder replaced by the mutant id.
pub const ID_PLACEHOLDER: &str = "##";

pub const DEFAULT_OPERATOR: &str = "calendar-log";
pub const SSL_OPERATOR: &str = "ssl-trust-all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    DataLeak,
    SslMisuse,
}

impl Goal {
    pub fn as_str(self) -> &'static str {
        match self {
            Goal::DataLeak => "data-leak",
            Goal::SslMisuse => "ssl-misuse",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SecurityOperator {
    pub operator_id: String,
    pub goal: Goal,
    pub source_template: String,
    pub sink_template: String,
    #[serde(default)]
    pub required_imports: Vec<String>,
    pub source_api: String,
    pub sink_api: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    #[serde(default)]
    operator: Vec<SecurityOperator>,
}

/// A source template split as `<ty> <var> = <expr>;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceShape {
    pub ty: String,
    pub var: String,
    pub expr: String,
}

/// One operator instantiated with a mutant id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorInstance {
    pub id: u32,
    pub tag: String,
    pub source_stmt: String,
    pub sink_stmt: String,
    /// Present for data-leak operators.
    pub shape: Option<SourceShape>,
}

impl OperatorInstance {
    /// `<var> = <expr>;` for sources split from their declaration.
    pub fn source_assignment(&self) -> Option<String> {
        self.shape.as_ref().map(|s| format!("{} = {};", s.var, s.expr))
    }

    /// `private <ty> <var>;` holding a split source's value.
    pub fn field_decl(&self) -> Option<String> {
        self.shape.as_ref().map(|s| format!("private {} {};", s.ty, s.var))
    }

    /// The sink statement logging `var` instead of the template variable.
    pub fn sink_for(&self, var: &str) -> String {
        match &self.shape {
            Some(s) => replace_ident(&self.sink_stmt, &s.var, var),
            None => self.sink_stmt.clone(),
        }
    }

    /// Marker logged next to the source in strict builds.
    pub fn source_marker(&self) -> String {
        format!("android.util.Log.d(\"leak-src-{}\", \"source\");", self.id)
    }
}

fn source_shape_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?s)^\s*([A-Za-z_][\w.]*(?:<[\w.<>, ?]*>)?(?:\[\])*)\s+([A-Za-z_$][\w$]*)\s*=\s*(.+?);\s*$")
            .expect("valid regex")
    })
}

/// Replaces whole-identifier occurrences of `from` with `to`.
fn replace_ident(text: &str, from: &str, to: &str) -> String {
    let is_ident = |c: char| c.is_alphanumeric() || c == '_' || c == '$';
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut prev: Option<char> = None;
    while let Some(pos) = rest.find(from) {
        let before = rest[..pos].chars().last().or(prev);
        let after = rest[pos + from.len()..].chars().next();
        out.push_str(&rest[..pos]);
        if before.is_some_and(is_ident) || after.is_some_and(is_ident) {
            out.push_str(from);
        } else {
            out.push_str(to);
        }
        prev = from.chars().last();
        rest = &rest[pos + from.len()..];
    }
    out.push_str(rest);
    out
}

impl SecurityOperator {
    /// Substitutes `id` into both templates. Pure; see [`Instantiator`] for
    /// run-scoped id uniqueness.
    pub fn render(&self, id: u32) -> OperatorInstance {
        let n = id.to_string();
        let source_stmt = self.source_template.trim().replace(ID_PLACEHOLDER, &n);
        let sink_stmt = self.sink_template.trim().replace(ID_PLACEHOLDER, &n);
        let shape = match self.goal {
            Goal::DataLeak => source_shape_re().captures(&source_stmt).map(|c| SourceShape {
                ty: c[1].to_string(),
                var: c[2].to_string(),
                expr: c[3].trim().to_string(),
            }),
            Goal::SslMisuse => None,
        };
        OperatorInstance {
            id,
            tag: format!("leak-{id}"),
            source_stmt,
            sink_stmt,
            shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("operator {}: {m}", self.operator_id)));
        if self.operator_id.trim().is_empty() {
            return Err(Error::Config("operator with empty operator-id".into()));
        }
        if self.sink_template.matches("\"leak-##\"").count() != 1 {
            return err("sink-template must log under the tag \"leak-##\" exactly once".into());
        }
        if self.sink_template.matches("leak-").count() != 1 {
            return err("sink-template mentions `leak-` more than once".into());
        }
        if !self.source_template.contains(ID_PLACEHOLDER) {
            return err("source-template has no `##` placeholder".into());
        }
        for api in [&self.source_api, &self.sink_api] {
            ApiSig::parse(api).map_err(|m| Error::Config(format!("operator {}: {m}", self.operator_id)))?;
        }
        let probe = self.render(1);
        if self.goal == Goal::DataLeak {
            let Some(shape) = &probe.shape else {
                return err("data-leak source-template must read `<Type> <var> = <expr>;`".into());
            };
            if !shape.var.contains('1') {
                return err("source variable must contain the `##` placeholder".into());
            }
            if probe.sink_for("probeVar") == probe.sink_stmt {
                return err("sink-template does not use the source variable".into());
            }
        }
        let wrapped = format!(
            "class OperatorProbe {{ void probe() {{ {} {} }} }}",
            probe.source_stmt, probe.sink_stmt
        );
        if let Err(e) = parse_java(&wrapped) {
            return err(format!("templates do not parse: {}", e.message));
        }
        Ok(())
    }

    /// Errors unless both APIs appear in the catalog.
    pub fn check_catalog(&self, catalog: &SourceSinkCatalog) -> Result<()> {
        if !catalog.sources.contains(&self.source_api) {
            return Err(Error::Config(format!(
                "operator {}: source {} not in catalog",
                self.operator_id, self.source_api
            )));
        }
        if !catalog.sinks.contains(&self.sink_api) {
            return Err(Error::Config(format!(
                "operator {}: sink {} not in catalog",
                self.operator_id, self.sink_api
            )));
        }
        Ok(())
    }
}

/// Parses an operator file: a list of `[[operator]]` tables.
pub fn parse_operators(text: &str) -> Result<Vec<SecurityOperator>> {
    let file: OperatorFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("operator file: {e}")))?;
    let mut seen = BTreeSet::new();
    for op in &file.operator {
        op.validate()?;
        if !seen.insert(op.operator_id.as_str()) {
            return Err(Error::Config(format!("operator {} defined twice", op.operator_id)));
        }
    }
    if file.operator.is_empty() {
        return Err(Error::Config("operator file defines no operators".into()));
    }
    Ok(file.operator)
}

pub fn load_operators(path: &Path) -> Result<Vec<SecurityOperator>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_operators(&text)
}

pub fn bundled_operators() -> Vec<SecurityOperator> {
    parse_operators(BUNDLED_OPERATORS).expect("bundled operators are valid")
}

pub fn bundled_operator(id: &str) -> Option<SecurityOperator> {
    bundled_operators().into_iter().find(|o| o.operator_id == id)
}

/// The Calendar → `Log.d` data-leak operator.
pub fn default_operator() -> SecurityOperator {
    bundled_operator(DEFAULT_OPERATOR).expect("bundled default operator")
}

/// Trust-all `X509TrustManager` whose `isServerTrusted` returns `true`.
pub fn ssl_operator() -> SecurityOperator {
    bundled_operator(SSL_OPERATOR).expect("bundled ssl operator")
}

/// Hands out operator instances, refusing to reuse an id within a run.
#[derive(Debug, Default)]
pub struct Instantiator {
    used: BTreeSet<u32>,
}

impl Instantiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn instantiate(&mut self, op: &SecurityOperator, id: u32) -> Result<OperatorInstance> {
        if id == 0 {
            return Err(Error::Config("mutant ids start at 1".into()));
        }
        if !self.used.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        Ok(op.render(id))
    }
}

/// `<pkg.Class: ret name(params)>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiSig {
    pub class: String,
    pub ret: String,
    pub name: String,
    pub params: Vec<String>,
}

fn sig_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^<([\w.$]+):\s+([\w.$\[\]]+)\s+([\w$<>]+)\(([\w.$\[\], ]*)\)>$").expect("valid regex")
    })
}

impl ApiSig {
    pub fn parse(text: &str) -> Result<ApiSig, String> {
        let c = sig_re()
            .captures(text.trim())
            .ok_or_else(|| format!("malformed signature `{text}`"))?;
        let params = c[4]
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(String::from)
            .collect();
        Ok(ApiSig {
            class: c[1].to_string(),
            ret: c[2].to_string(),
            name: c[3].to_string(),
            params,
        })
    }

    pub fn simple_class(&self) -> &str {
        self.class.rsplit('.').next().unwrap_or(&self.class)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceSinkCatalog {
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
}

impl SourceSinkCatalog {
    /// Parses `<sig> [extra tokens] -> SOURCE|SINK` lines (`_SOURCE_`/`_SINK_`
    /// accepted). `%` starts a comment line. Duplicates keep their first position.
    pub fn parse(text: &str) -> Result<SourceSinkCatalog> {
        let mut cat = SourceSinkCatalog::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let bad = |m: &str| Error::Config(format!("catalog line {}: {m}", i + 1));
            let (lhs, kind) = line.rsplit_once("->").ok_or_else(|| bad("missing `->`"))?;
            let sig_end = lhs.find('>').map(|p| p + 1).ok_or_else(|| bad("missing signature"))?;
            let sig = lhs[..sig_end].trim();
            ApiSig::parse(sig).map_err(|m| bad(&m))?;
            let list = match kind.trim().trim_matches('_') {
                "SOURCE" => &mut cat.sources,
                "SINK" => &mut cat.sinks,
                other => return Err(bad(&format!("unknown kind `{other}`"))),
            };
            if !list.iter().any(|s| s == sig) {
                list.push(sig.to_string());
            }
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<SourceSinkCatalog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> SourceSinkCatalog {
        Self::parse(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    /// Errors when the catalog cannot drive a data-leak analysis.
    pub fn require_data_leak(&self) -> Result<()> {
        if self.sources.is_empty() || self.sinks.is_empty() {
            return Err(Error::Config(
                "catalog needs at least one source and one sink for data-leak operators".into(),
            ));
        }
        Ok(())
    }

    pub fn source_sigs(&self) -> Vec<ApiSig> {
        self.sources.iter().filter_map(|s| ApiSig::parse(s).ok()).collect()
    }

    pub fn sink_sigs(&self) -> Vec<ApiSig> {
        self.sinks.iter().filter_map(|s| ApiSig::parse(s).ok()).collect()
    }
}

/// Rebuilds `input_var` character by character through a `StringBuilder`
/// and binds the result to `<input_var>x`.
pub fn complex_path_rule(input_var: &str, id: u32) -> String {
    format!(
        "StringBuilder builder{id} = new StringBuilder(); \
         for (int i{id} = 0; i{id} < {input_var}.length(); i{id}++) {{ builder{id}.append({input_var}.charAt(i{id})); }} \
         String {input_var}x = builder{id}.toString();"
    )
}

/// The variable bound by [`complex_path_rule`].
pub fn complex_path_output(input_var: &str) -> String {
    format!("{input_var}x")
}

fn rule_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"^StringBuilder (\w+) = new StringBuilder\(\);\s*",
            r"for \(int (\w+) = (\d+); (\w+) (<|<=) (\w+)\.length\(\); (\w+)\+\+\) \{ ",
            r"(\w+)\.append\((\w+)\.charAt\((\w+)\)\); \}\s*",
            r"String (\w+) = (\w+)\.toString\(\);$"
        ))
        .expect("valid regex")
    })
}

/// Interprets a fragment produced by [`complex_path_rule`] on `input`, with
/// Java `String` semantics (UTF-16 code units). Returns the value bound to
/// the output variable.
pub fn complex_path_eval(fragment: &str, input_var: &str, input: &str) -> Result<String> {
    let unsupported = || Error::Unsupported(format!("complex-path fragment `{fragment}`"));
    let c = rule_re().captures(fragment.trim()).ok_or_else(unsupported)?;
    let builder = &c[1];
    let index = &c[2];
    let consistent = [&c[4], &c[7], &c[10]].iter().all(|v| *v == index)
        && c[8] == *builder
        && c[12] == *builder
        && c[6] == *input_var
        && c[9] == *input_var;
    if !consistent {
        return Err(unsupported());
    }
    let units: Vec<u16> = input.encode_utf16().collect();
    let start: usize = c[3].parse().map_err(|_| unsupported())?;
    let end = if &c[5] == "<" { units.len() } else { units.len() + 1 };
    let mut acc = Vec::with_capacity(units.len());
    for i in start..end {
        let unit = *units
            .get(i)
            .ok_or_else(|| Error::Consistency(format!("charAt({i}) out of bounds")))?;
        acc.push(unit);
    }
    String::from_utf16(&acc).map_err(|e| Error::Consistency(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_operator_instantiation() {
        let inst = default_operator().render(1);
        assert_eq!(
            inst.source_stmt,
            "String dataLeak1 = java.util.Calendar.getInstance().getTimeZone().getDisplayName();"
        );
        assert_eq!(inst.sink_stmt, "android.util.Log.d(\"leak-1\", dataLeak1);");
        assert_eq!(inst.tag, "leak-1");
    }

    #[test]
    fn substitution_is_consistent() {
        let inst = default_operator().render(42);
        assert_eq!(inst.tag, "leak-42");
        assert!(inst.source_stmt.contains("dataLeak42"));
        assert!(inst.sink_stmt.contains("dataLeak42"));
        assert!(!inst.sink_stmt.contains("##"));
        assert_eq!(inst.source_assignment().unwrap(), "dataLeak42 = java.util.Calendar.getInstance().getTimeZone().getDisplayName();");
        assert_eq!(inst.field_decl().unwrap(), "private String dataLeak42;");
        assert_eq!(inst.sink_for("dataLeak42x"), "android.util.Log.d(\"leak-42\", dataLeak42x);");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let op = default_operator();
        let mut inst = Instantiator::new();
        inst.instantiate(&op, 3).unwrap();
        assert!(matches!(inst.instantiate(&op, 3), Err(Error::DuplicateId(3))));
        assert!(inst.instantiate(&op, 0).is_err());
    }

    #[test]
    fn ssl_operator_returns_true_and_is_unique_per_id() {
        let op = ssl_operator();
        assert_eq!(op.goal, Goal::SslMisuse);
        let a = op.render(7);
        let b = op.render(8);
        assert!(a.source_stmt.contains("class TrustAllManager7 "));
        assert!(b.source_stmt.contains("class TrustAllManager8 "));
        assert!(a.source_stmt.contains("isServerTrusted(java.security.cert.X509Certificate[] chain) { return true; }"));
        assert_eq!(a.tag, "leak-7");
        assert_eq!(a.sink_stmt.matches("leak-7").count(), 1);
        let wrapped = format!("class A {{ void f() {{ {} {} }} }}", a.source_stmt, a.sink_stmt);
        let file = parse_java(&wrapped).unwrap();
        assert_eq!(file.types[0].methods[0].body.as_ref().unwrap().stmts[0].types.len(), 1);
    }

    #[test]
    fn invalid_operators_are_config_errors() {
        let base = r#"[[operator]]
operator-id = "x"
goal = "data-leak"
source-template = "String dataLeak## = foo();"
sink-template = 'android.util.Log.d("leak-##", dataLeak##);'
source-api = "<a.B: java.lang.String foo()>"
sink-api = "<android.util.Log: int d(java.lang.String,java.lang.String)>"
"#;
        assert!(parse_operators(base).is_ok());
        let no_tag = base.replace("\"leak-##\"", "\"tag\"");
        assert!(parse_operators(&no_tag).is_err());
        let not_decl = base.replace("String dataLeak## = foo();", "foo(##);");
        assert!(parse_operators(&not_decl).is_err());
        let bad_sig = base.replace("<a.B: java.lang.String foo()>", "foo");
        assert!(parse_operators(&bad_sig).is_err());
        assert!(parse_operators("").is_err());
        let twice = format!("{base}\n{base}");
        assert!(parse_operators(&twice).is_err());
    }

    #[test]
    fn catalog_driven_operator_uses_catalog_apis() {
        let text = r#"[[operator]]
operator-id = "latitude-log"
goal = "data-leak"
source-template = 'String dataLeak## = String.valueOf(new android.location.Location("gps").getLatitude());'
sink-template = 'android.util.Log.d("leak-##", dataLeak##);'
source-api = "<android.location.Location: double getLatitude()>"
sink-api = "<android.util.Log: int d(java.lang.String,java.lang.String)>"
"#;
        let op = parse_operators(text).unwrap().remove(0);
        let cat = SourceSinkCatalog::bundled();
        op.check_catalog(&cat).unwrap();
        let inst = op.render(5);
        assert!(inst.source_stmt.contains("getLatitude()"));
        assert!(inst.sink_stmt.contains("Log.d"));
        let sig = ApiSig::parse(&op.source_api).unwrap();
        assert_eq!((sig.simple_class(), sig.name.as_str()), ("Location", "getLatitude"));
    }

    #[test]
    fn catalog_parsing() {
        let cat = SourceSinkCatalog::parse(
            "% comment\n<a.B: int f()> -> SOURCE\n<a.B: int g(int)> -> _SOURCE_\n<a.B: int f()> -> SOURCE\n\n<c.D: void s(java.lang.String)> android.permission.X -> SINK\n",
        )
        .unwrap();
        assert_eq!(cat.sources, vec!["<a.B: int f()>", "<a.B: int g(int)>"]);
        assert_eq!(cat.sinks.len(), 1);
        let err = SourceSinkCatalog::parse("<a.B: int f()> -> SOURCE\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let empty = SourceSinkCatalog::parse("").unwrap();
        assert!(empty.require_data_leak().is_err());
    }

    #[test]
    fn complex_path_rule_shape() {
        let frag = complex_path_rule("dataLeak3", 3);
        assert!(frag.contains("StringBuilder builder3 = new StringBuilder();"));
        assert!(frag.contains("for (int i3 = 0;"));
        assert!(frag.ends_with("String dataLeak3x = builder3.toString();"));
        let wrapped = format!("class A {{ void f(String dataLeak3) {{ {frag} }} }}");
        parse_java(&wrapped).unwrap();
        assert_eq!(complex_path_eval(&frag, "dataLeak3", "").unwrap(), "");
        assert_eq!(complex_path_eval(&frag, "dataLeak3", "abc").unwrap(), "abc");
        assert!(complex_path_eval(&frag, "other", "abc").is_err());
        let off_by_one = frag.replace("i3 = 0", "i3 = 1");
        assert_eq!(complex_path_eval(&off_by_one, "dataLeak3", "abc").unwrap(), "bc");
    }

    #[test]
    fn replace_ident_respects_boundaries() {
        assert_eq!(replace_ident("f(dataLeak1, dataLeak10)", "dataLeak1", "v"), "f(v, dataLeak10)");
    }

    proptest! {
        #[test]
        fn rendering_is_pure_and_tag_unique(id in 1u32..1_000_000) {
            let op = default_operator();
            let a = op.render(id);
            prop_assert_eq!(&a, &op.render(id));
            let tag = format!("\"leak-{id}\"");
            prop_assert_eq!(a.sink_stmt.matches(&tag).count(), 1);
            let wrapped = format!("class A {{ void f() {{ {} {} }} }}", a.source_stmt, a.sink_stmt);
            prop_assert!(parse_java(&wrapped).is_ok());
        }

        #[test]
        fn complex_path_is_identity(s in ".{0,64}", id in 1u32..10_000) {
            let frag = complex_path_rule("dataLeak", id);
            prop_assert_eq!(complex_path_eval(&frag, "dataLeak", &s).unwrap(), s);
        }
    }
}
