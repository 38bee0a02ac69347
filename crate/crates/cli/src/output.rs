//! Key/value reports: 6 significant digits for people, 12 for machines.

use std::fmt::Write as _;
use std::path::Path;

use stockloan::sweep::format_significant;

use crate::CliError;

pub const HUMAN_DIGITS: usize = 6;
pub const MACHINE_DIGITS: usize = 12;

#[derive(Debug, Clone)]
enum Field {
    Num(f64),
    Int(u64),
    Text(String),
}

#[derive(Debug, Clone, Default)]
pub struct Record {
    fields: Vec<(String, Field)>,
}

impl Record {
    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.fields.push((key.into(), Field::Num(value)));
        self
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        self.fields.push((key.into(), Field::Int(value)));
        self
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), Field::Text(value.into())));
        self
    }

    fn render(field: &Field, digits: usize) -> String {
        match field {
            Field::Num(v) if v.is_finite() => format_significant(*v, digits),
            Field::Num(_) => "nan".into(),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
        }
    }

    pub fn human(&self) -> String {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k:<width$}  {}", Self::render(v, HUMAN_DIGITS));
        }
        out
    }

    pub fn machine(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}={}", Self::render(v, MACHINE_DIGITS));
        }
        out
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}
