//! Classification table: which framework supertypes make a class an
//! activity, fragment, receiver or listener, which of their methods are
//! callbacks, and which calls register callbacks.

use std::path::Path;

use serde::Deserialize;

use crate::Error;

const DEFAULT_TABLE: &str = include_str!("../../config/classification.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    Activity,
    Fragment,
    DialogFragment,
    BroadcastReceiver,
    ListenerImpl,
    SqliteHelper,
    Plain,
}

impl ClassKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassKind::Activity => "activity",
            ClassKind::Fragment => "fragment",
            ClassKind::DialogFragment => "dialog-fragment",
            ClassKind::BroadcastReceiver => "broadcast-receiver",
            ClassKind::ListenerImpl => "listener-impl",
            ClassKind::SqliteHelper => "sqlite-helper",
            ClassKind::Plain => "plain",
        }
    }

    /// Lower wins when a class inherits several kinds.
    fn priority(self) -> u8 {
        match self {
            ClassKind::DialogFragment => 0,
            ClassKind::Activity => 1,
            ClassKind::Fragment => 2,
            ClassKind::BroadcastReceiver => 3,
            ClassKind::SqliteHelper => 4,
            ClassKind::ListenerImpl => 5,
            ClassKind::Plain => 6,
        }
    }

    pub fn is_fragment(self) -> bool {
        matches!(self, ClassKind::Fragment | ClassKind::DialogFragment)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FrameworkType {
    pub name: String,
    pub kind: ClassKind,
    #[serde(default)]
    pub callbacks: Vec<String>,
    #[serde(default, rename = "abstract")]
    pub is_abstract: bool,
    /// Callbacks that normally run in this order.
    #[serde(default)]
    pub sequence: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Lifecycle {
    #[serde(default)]
    pub activity: Vec<String>,
    #[serde(default)]
    pub fragment: Vec<String>,
    #[serde(default)]
    pub dialog_fragment: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Registration {
    #[serde(default)]
    pub receiver: Vec<String>,
    #[serde(default)]
    pub listener: Vec<String>,
    #[serde(default)]
    pub listener_prefix: Option<String>,
    #[serde(default)]
    pub listener_suffix: Option<String>,
    #[serde(default)]
    pub content_view: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ImplicitCall {
    pub call: String,
    pub target: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ClassificationTable {
    #[serde(default)]
    pub types: Vec<FrameworkType>,
    #[serde(default)]
    pub lifecycle: Lifecycle,
    #[serde(default)]
    pub registration: Registration,
    #[serde(default)]
    pub implicit: Vec<ImplicitCall>,
}

impl Default for ClassificationTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled classification table is valid")
    }
}

impl ClassificationTable {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let table: ClassificationTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("classification table: {e}")))?;
        for list in [
            &table.lifecycle.activity,
            &table.lifecycle.fragment,
            &table.lifecycle.dialog_fragment,
        ] {
            let mut seen = std::collections::BTreeSet::new();
            if let Some(dup) = list.iter().find(|m| !seen.insert(m.as_str())) {
                return Err(Error::Config(format!(
                    "classification table: lifecycle method {dup} listed twice"
                )));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Resolves a written supertype name against the table, expanding the
    /// first segment through the file's imports when possible.
    pub fn resolve(&self, written: &str, imports: &[String]) -> Option<&FrameworkType> {
        let first = written.split('.').next().unwrap_or(written);
        let expanded = imports
            .iter()
            .find(|imp| imp.rsplit('.').next() == Some(first))
            .map(|imp| format!("{imp}{}", &written[first.len()..]));
        if let Some(full) = &expanded {
            if let Some(t) = self.types.iter().find(|t| &t.name == full) {
                return Some(t);
            }
        }
        if let Some(t) = self.types.iter().find(|t| t.name == written) {
            return Some(t);
        }
        let suffix = format!(".{written}");
        self.types.iter().find(|t| t.name.ends_with(&suffix))
    }

    pub fn by_name(&self, name: &str) -> Option<&FrameworkType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// Picks the dominant kind among the framework types in a class's closure.
    pub fn dominant_kind<'a>(&self, types: impl IntoIterator<Item = &'a FrameworkType>) -> ClassKind {
        types
            .into_iter()
            .map(|t| t.kind)
            .min_by_key(|k| k.priority())
            .unwrap_or(ClassKind::Plain)
    }

    pub fn lifecycle_for(&self, kind: ClassKind) -> &[String] {
        match kind {
            ClassKind::Activity => &self.lifecycle.activity,
            ClassKind::Fragment => &self.lifecycle.fragment,
            ClassKind::DialogFragment => &self.lifecycle.dialog_fragment,
            _ => &[],
        }
    }

    pub fn is_receiver_registrar(&self, call: &str) -> bool {
        self.registration.receiver.iter().any(|r| r == call)
    }

    pub fn is_listener_registrar(&self, call: &str) -> bool {
        if self.registration.listener.iter().any(|r| r == call) {
            return true;
        }
        match (&self.registration.listener_prefix, &self.registration.listener_suffix) {
            (Some(p), Some(s)) => call.len() > p.len() + s.len() && call.starts_with(p.as_str()) && call.ends_with(s.as_str()),
            _ => false,
        }
    }

    pub fn is_content_view(&self, call: &str) -> bool {
        self.registration.content_view.iter().any(|r| r == call)
    }

    pub fn implicit_target(&self, call: &str) -> Option<&str> {
        self.implicit
            .iter()
            .find(|i| i.call == call)
            .map(|i| i.target.as_str())
    }
}
