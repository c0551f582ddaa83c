//! Pass/fail bookkeeping for the acceptance suite.

use std::fmt::Write as _;
use std::time::Duration;

/// One numbered criterion: a list of individual checks plus a time budget.
#[derive(Debug, Default)]
pub struct Criterion {
    pub id: String,
    pub title: String,
    pub checks: Vec<(bool, String)>,
    /// Informational lines that do not affect the verdict.
    pub notes: Vec<String>,
    pub budget: Option<Duration>,
    pub elapsed: Duration,
}

impl Criterion {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn budget(mut self, d: Duration) -> Self {
        self.budget = Some(d);
        self
    }

    pub fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.checks.push((ok, detail.into()));
    }

    pub fn note(&mut self, detail: impl Into<String>) {
        self.notes.push(detail.into());
    }

    /// `|got - want| <= tol`, reported as `label got (want ± tol)`.
    pub fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(ok, format!("{label} {got:.4} (want {want} ± {tol})"));
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty()
            && self.checks.iter().all(|(ok, _)| *ok)
            && self.budget.map_or(true, |b| self.elapsed <= b)
    }

    /// Headline `"<id>: PASS|FAIL <title> [<secs>s]"` followed by indented
    /// lines for every check (failures marked `x`) and every note (`--`).
    pub fn report(&self) -> String {
        let mut out = String::new();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let secs = self.elapsed.as_secs_f64();
        match self.budget {
            Some(b) => writeln!(out, "{}: {verdict} {} [{secs:.1}s of {:.0}s]", self.id, self.title, b.as_secs_f64()),
            None => writeln!(out, "{}: {verdict} {} [{secs:.1}s]", self.id, self.title),
        }
        .unwrap();
        for (ok, d) in &self.checks {
            writeln!(out, "    {} {d}", if *ok { "ok" } else { "x " }).unwrap();
        }
        for d in &self.notes {
            writeln!(out, "    -- {d}").unwrap();
        }
        out
    }
}
