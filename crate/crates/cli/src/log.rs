//! One JSON object per line on stderr.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy)]
pub struct Logger {
    verbosity: u8,
}

impl Logger {
    pub fn new(verbosity: u8) -> Self {
        Self { verbosity }
    }

    pub fn info(&self, event: &str, fields: Value) {
        emit("info", event, fields);
    }

    pub fn debug(&self, event: &str, fields: Value) {
        if self.verbosity > 0 {
            emit("debug", event, fields);
        }
    }

    pub fn error(&self, event: &str, fields: Value) {
        emit("error", event, fields);
    }
}

fn emit(level: &str, event: &str, fields: Value) {
    let mut line = Map::new();
    line.insert("level".into(), json!(level));
    line.insert("event".into(), json!(event));
    if let Value::Object(extra) = fields {
        line.extend(extra);
    }
    eprintln!("{}", Value::Object(line));
}
