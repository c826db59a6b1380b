use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use eta_forge::C64;
use serde::Serialize;

use crate::CliError;

/// One numeric assertion: `error ≤ tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub instance: String,
    pub value_re: f64,
    pub value_im: f64,
    pub reference_re: f64,
    pub reference_im: f64,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|value − reference| ≤ tol`.
    pub fn compare(name: &str, instance: impl Into<String>, value: C64, reference: C64, tol: f64) -> Check {
        let error = (value - reference).norm();
        Check {
            name: name.into(),
            instance: instance.into(),
            value_re: value.re,
            value_im: value.im,
            reference_re: reference.re,
            reference_im: reference.im,
            error,
            tolerance: tol,
            passed: error <= tol,
        }
    }

    /// A measured quantity against an upper bound; reported value and error are the measurement.
    pub fn bound(name: &str, instance: impl Into<String>, measured: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            instance: instance.into(),
            value_re: measured,
            value_im: 0.0,
            reference_re: bound,
            reference_im: 0.0,
            error: measured,
            tolerance: bound,
            passed: measured <= bound,
        }
    }

    /// `measured ≥ floor`; the error is the shortfall.
    pub fn at_least(name: &str, instance: impl Into<String>, measured: f64, floor: f64) -> Check {
        Check {
            error: (floor - measured).max(0.0),
            tolerance: 0.0,
            passed: measured >= floor,
            ..Check::bound(name, instance, measured, floor)
        }
    }

    pub fn flag(name: &str, instance: impl Into<String>, ok: bool) -> Check {
        let v = if ok { 0.0 } else { 1.0 };
        Check { passed: ok, ..Check::bound(name, instance, v, 0.0) }
    }

    fn ratio(&self) -> f64 {
        if self.tolerance > 0.0 {
            self.error / self.tolerance
        } else if self.passed {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Checks from one scenario part, with free-form notes for the summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub id: String,
    pub title: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Section {
    pub fn new(id: &str, title: &str) -> Self {
        Section { id: id.into(), title: title.into(), checks: Vec::new(), notes: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Worst check (largest error/tolerance) for each check name, in first-seen order.
    pub fn worst_by_name(&self) -> Vec<(&str, usize, &Check)> {
        let mut out: Vec<(&str, usize, &Check)> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|(n, _, _)| *n == c.name) {
                Some(slot) => {
                    slot.1 += 1;
                    if c.ratio() > slot.2.ratio() || (!c.passed && slot.2.passed) {
                        slot.2 = c;
                    }
                }
                None => out.push((&c.name, 1, c)),
            }
        }
        out
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(sections: &[Section]) -> String {
    let mut s = String::from("section,check,instance,value_re,value_im,reference_re,reference_im,error,tolerance,status\n");
    for sec in sections {
        for c in &sec.checks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                sec.id,
                c.name,
                c.instance,
                f(c.value_re),
                f(c.value_im),
                f(c.reference_re),
                f(c.reference_im),
                f(c.error),
                f(c.tolerance),
                if c.passed { "pass" } else { "FAIL" }
            );
        }
    }
    s
}

pub fn render_markdown(title: &str, header: &[String], sections: &[Section]) -> String {
    let mut s = format!("# eta-forge: {title}\n\n");
    for h in header {
        let _ = writeln!(s, "{h}");
    }
    let (mut total, mut ok) = (0, 0);
    for sec in sections {
        let _ = writeln!(s, "\n## {} (`{}`)\n", sec.title, sec.id);
        s.push_str("| check | instances | worst error | tolerance | status |\n|---|---|---|---|---|\n");
        for (name, n, w) in sec.worst_by_name() {
            let all = sec.checks.iter().filter(|c| c.name == name).all(|c| c.passed);
            let _ = writeln!(
                s,
                "| {name} | {n} | {:.3e} | {:.3e} | {} |",
                w.error,
                w.tolerance,
                if all { "pass" } else { "FAIL" }
            );
        }
        if !sec.notes.is_empty() {
            s.push('\n');
            for n in &sec.notes {
                let _ = writeln!(s, "    {n}");
            }
        }
        total += sec.checks.len();
        ok += sec.checks.iter().filter(|c| c.passed).count();
    }
    let _ = writeln!(s, "\n**{ok}/{total} checks passed**");
    s
}

/// Writes `<stem>.csv` and `<stem>.md` into `dir`.
pub fn emit_report(dir: &Path, stem: &str, title: &str, header: &[String], sections: &[Section]) -> Result<(), CliError> {
    if sections.is_empty() || sections.iter().all(|s| s.checks.is_empty()) {
        return Err(CliError::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), render_csv(sections))?;
    fs::write(dir.join(format!("{stem}.md")), render_markdown(title, header, sections))?;
    Ok(())
}
