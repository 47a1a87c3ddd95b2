use serde_json::Value;

use crate::args::Format;

pub struct Output {
    format: Format,
}

impl Output {
    pub fn new(format: Format) -> Self {
        Self { format }
    }

    /// One result: `text` in text mode, `{"kind": kind, ...fields}` on its
    /// own line in json-lines mode.
    pub fn emit(&self, kind: &str, fields: Value, text: impl AsRef<str>) {
        match self.format {
            Format::Text => println!("{}", text.as_ref()),
            Format::JsonLines => {
                let mut obj = serde_json::Map::new();
                obj.insert("kind".into(), Value::from(kind));
                if let Value::Object(m) = fields {
                    obj.extend(m);
                }
                println!("{}", Value::Object(obj));
            }
        }
    }

    pub fn is_text(&self) -> bool {
        self.format == Format::Text
    }
}
