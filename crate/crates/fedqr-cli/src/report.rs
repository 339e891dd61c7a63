//! Report rendering: an aligned human-readable table followed by a
//! machine-readable `key=value` block. Rendering is pure string work, so a
//! fixed config and seed always produce byte-identical output.

/// Formats a float with 17 significant digits, enough to round-trip f64.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Report {
    command: &'static str,
    config: Vec<(String, String)>,
    results: Vec<(String, String)>,
    machine: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report {
            command,
            config: Vec::new(),
            results: Vec::new(),
            machine: Vec::new(),
        }
    }

    /// One resolved-config line; every flag that shaped the run goes here.
    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    /// One result line. `key` names the value in the machine block,
    /// `label` in the table; `value` should already be formatted.
    pub fn metric(&mut self, key: &str, label: &str, value: impl ToString) {
        let value = value.to_string();
        self.results.push((label.to_string(), value.clone()));
        self.machine.push((key.to_string(), value));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("fedqr {}\n\nconfig:\n", self.command));
        push_aligned(&mut out, &self.config);
        out.push_str("\nresults:\n");
        push_aligned(&mut out, &self.results);
        out.push_str("\nstructured:\n");
        for (key, value) in &self.machine {
            out.push_str(&format!("{}.{}={}\n", self.command, key, value));
        }
        out
    }
}

fn push_aligned(out: &mut String, rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (key, value) in rows {
        out.push_str(&format!("  {key:width$}  {value}\n"));
    }
}
