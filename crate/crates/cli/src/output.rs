use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use canard_core::fmt_num;
use serde_json::{Map, Value};

use crate::CliError;

/// Parameter echo shared by the CSV header and the JSON `params` object.
#[derive(Debug, Default)]
pub struct Meta {
    entries: Vec<(String, Value)>,
}

impl Meta {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.str("command", command);
        m
    }

    pub fn num(&mut self, k: &str, v: f64) -> &mut Self {
        let v = serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number);
        self.entries.push((k.into(), v));
        self
    }

    pub fn int(&mut self, k: &str, v: usize) -> &mut Self {
        self.entries.push((k.into(), Value::from(v)));
        self
    }

    pub fn str(&mut self, k: &str, v: &str) -> &mut Self {
        self.entries.push((k.into(), Value::from(v)));
        self
    }

    /// `key=value` pairs for `#` header lines; floats at 17 significant digits.
    pub fn lines(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::Number(n) if n.is_f64() => fmt_num(n.as_f64().unwrap_or(f64::NAN)),
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect()
    }

    pub fn json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.entries {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

pub fn write_meta<W: Write + ?Sized>(w: &mut W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Comma-separated numeric rows at 17 significant digits.
pub fn write_rows<W, I>(w: &mut W, meta: &Meta, header: &str, rows: I) -> io::Result<()>
where
    W: Write + ?Sized,
    I: IntoIterator<Item = Vec<f64>>,
{
    write_meta(w, &meta.lines())?;
    writeln!(w, "{header}")?;
    for r in rows {
        let cells: Vec<String> = r.into_iter().map(fmt_num).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// `{"params": ..., <fields>}` pretty-printed with a trailing newline.
pub fn write_json<W: Write + ?Sized>(w: &mut W, meta: &Meta, fields: Map<String, Value>) -> io::Result<()> {
    let mut obj = fields;
    obj.insert("params".into(), meta.json());
    serde_json::to_writer_pretty(&mut *w, &Value::Object(obj))?;
    writeln!(w)
}

/// Where the data goes and where the summary line goes.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: &Option<PathBuf>) -> Self {
        Self { path: path.clone() }
    }

    pub fn write<F>(&self, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        match &self.path {
            Some(p) => {
                let f = File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?;
                let mut w = BufWriter::new(f);
                body(&mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                body(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    /// One-line summary: stdout when the data went to a file, stderr otherwise.
    pub fn summary(&self, line: &str) {
        if self.path.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}
