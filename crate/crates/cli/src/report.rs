use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// One command's output in every supported format. `header` records the effective settings,
/// defaults included, and is shown in text and JSON output.
pub struct Report {
    pub command: &'static str,
    pub header: Vec<(&'static str, Value)>,
    pub body: Map<String, Value>,
    pub csv: String,
    pub text: String,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report {
            command,
            header: Vec::new(),
            body: Map::new(),
            csv: String::new(),
            text: String::new(),
        }
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<Value>) {
        self.header.push((key, value.into()));
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Csv => self.csv.clone(),
            Format::Json => {
                let mut root = Map::new();
                root.insert("command".into(), Value::from(self.command));
                let config: Map<String, Value> = self
                    .header
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.clone()))
                    .collect();
                root.insert("config".into(), Value::Object(config));
                root.extend(self.body.clone());
                let mut s = serde_json::to_string_pretty(&Value::Object(root))?;
                s.push('\n');
                s
            }
            Format::Text => {
                let mut s = format!("# fadkit {}\n", self.command);
                for (k, v) in &self.header {
                    let shown = match v {
                        Value::String(t) => t.clone(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("# {k}: {shown}\n"));
                }
                s.push_str(&self.text);
                s
            }
        })
    }
}

pub fn emit(report: &Report, format: Format, output: Option<&Path>) -> Result<()> {
    let rendered = report.render(format)?;
    match output {
        Some(path) => fs::write(path, rendered).with_context(|| format!("{}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(rendered.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
