//! Text-level extraction from Android XML resources.

use std::collections::BTreeMap;

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlHandler {
    /// Widget id without the `@+id/` prefix, or `<tag>@<line>` when the widget has no id.
    pub widget: String,
    pub method: String,
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct XmlInfo {
    pub handlers: Vec<XmlHandler>,
    /// Manifest component declarations: element name (`activity`, `receiver`, ...) → class names.
    pub components: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlError {
    pub offset: usize,
    pub message: String,
}

pub fn parse_xml(text: &str) -> Result<XmlInfo, XmlError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        XmlError {
            offset: offset_of(text, pos.row, pos.col),
            message: e.to_string(),
        }
    })?;
    let mut info = XmlInfo::default();
    for node in doc.descendants().filter(|n| n.is_element()) {
        let attr = |name: &str| {
            node.attributes()
                .find(|a| a.name() == name && a.namespace() == Some(ANDROID_NS))
                .map(|a| (a.value().to_string(), a.range().start))
        };
        if let Some((method, offset)) = attr("onClick") {
            let widget = match attr("id") {
                Some((id, _)) => id
                    .trim_start_matches("@+id/")
                    .trim_start_matches("@id/")
                    .to_string(),
                None => {
                    let line = doc.text_pos_at(node.range().start).row;
                    format!("{}@{line}", node.tag_name().name())
                }
            };
            info.handlers.push(XmlHandler {
                widget,
                method,
                offset,
            });
        }
        let tag = node.tag_name().name();
        if matches!(tag, "activity" | "receiver" | "service" | "provider") {
            if let Some((name, _)) = attr("name") {
                info.components.entry(tag.to_string()).or_default().push(name);
            }
        }
    }
    Ok(info)
}

fn offset_of(text: &str, row: u32, col: u32) -> usize {
    let mut line = 1;
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if line == row {
            break;
        }
        if b == b'\n' {
            line += 1;
            start = i + 1;
        }
    }
    (start + col.saturating_sub(1) as usize).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onclick_attribute_becomes_handler() {
        let xml = r#"<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android">
  <Button android:id="@+id/send" android:onClick="sendMessage"/>
  <Button android:onClick="other"/>
</LinearLayout>"#;
        let info = parse_xml(xml).unwrap();
        assert_eq!(info.handlers.len(), 2);
        assert_eq!(info.handlers[0].widget, "send");
        assert_eq!(info.handlers[0].method, "sendMessage");
        assert_eq!(info.handlers[1].widget, "Button@3");
    }

    #[test]
    fn manifest_components() {
        let xml = r#"<manifest xmlns:android="http://schemas.android.com/apk/res/android"><application>
<activity android:name=".Main"/><receiver android:name="a.R"/></application></manifest>"#;
        let info = parse_xml(xml).unwrap();
        assert_eq!(info.components["activity"], vec![".Main"]);
        assert_eq!(info.components["receiver"], vec!["a.R"]);
    }

    #[test]
    fn malformed_xml_is_rejected() {
        let err = parse_xml("<a>\n<b></a>").unwrap_err();
        assert!(err.offset > 0);
    }
}
