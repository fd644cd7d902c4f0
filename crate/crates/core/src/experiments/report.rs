//! Text reports computed from records alone, so a saved `records.csv` reproduces the
//! report byte for byte.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::record::SweepRecord;
use super::runs::{LIMITS, SOLVE, VALIDATE};
use super::sign::SIGN_CHANGING;
use super::sweep::{SWEEP_INFINITY, SWEEP_ZERO};
use super::two_group::TWO_GROUP;

pub const PSI_TOL: f64 = 1e-10;
pub const NEHARI_ENERGY_TOL: f64 = 1e-12;
pub const MARGIN_TOL: f64 = 1e-10;
/// Relative warm/cold disagreement reported as a warning.
pub const AUDIT_TOL: f64 = 1e-6;
/// Slack in `c(β) ≤ c^∞`.
pub const INTERFACE_SLACK: f64 = 1e-6;
pub const OVERLAP_DECAY: f64 = 1e-3;
pub const COVERAGE_MIN: f64 = 0.99;
pub const MASS_SYMMETRY_TOL: f64 = 1e-3;
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but never failing.
    Info,
    /// Disabled by configuration.
    Skip,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skip => "SKIP",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub sweep_id: String,
    pub table: Vec<String>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Report {
    /// No enabled assertion failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report: {}", self.sweep_id);
        out.push('\n');
        for line in &self.table {
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
        for c in &self.checks {
            let _ = writeln!(out, "{} {}: {}", c.status.label(), c.name, c.detail);
        }
        if !self.warnings.is_empty() {
            out.push('\n');
            for w in &self.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "result: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

fn e(x: f64) -> String {
    format!("{x:.9e}")
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| e(*x)).collect::<Vec<_>>().join(" ")
}

struct Builder {
    checks: Vec<Check>,
    warnings: Vec<String>,
}

impl Builder {
    fn push(&mut self, name: &str, status: Status, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            status,
            detail,
        });
    }

    fn assert(&mut self, name: &str, ok: bool, detail: String) {
        self.push(name, Status::of(ok), detail);
    }
}

fn table(records: &[SweepRecord]) -> Vec<String> {
    let mut t = vec![
        "point parameter energy_c converged start iterations grad_residual overlaps masses"
            .to_string(),
    ];
    for r in records {
        t.push(format!(
            "{} {} {} {} {} {} {} [{}] [{}]",
            r.point,
            e(r.parameter),
            e(r.energy_c),
            r.converged,
            r.start,
            r.iterations,
            e(r.grad_residual),
            list(&r.overlaps),
            list(&r.component_masses)
        ));
    }
    t
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Converged rows, with a warning for every excluded one.
fn converged_rows<'a>(records: &'a [SweepRecord], b: &mut Builder) -> Vec<&'a SweepRecord> {
    for r in records.iter().filter(|r| !r.converged) {
        b.warnings.push(format!(
            "point {} (parameter {}) did not converge (residual {}); excluded from trends",
            r.point,
            e(r.parameter),
            e(r.grad_residual)
        ));
    }
    records.iter().filter(|r| r.converged).collect()
}

fn invariants(records: &[SweepRecord], b: &mut Builder) {
    let bad: Vec<usize> = records
        .iter()
        .filter(|r| {
            r.overlaps.iter().any(|x| *x < 0.0)
                || r.weighted_overlaps
                    .iter()
                    .zip(&r.beta_values)
                    .any(|(w, beta)| *beta <= 0.0 && *w > 0.0)
                || !(r.energy_c > 0.0)
        })
        .map(|r| r.point)
        .collect();
    b.assert(
        "invariants",
        bad.is_empty(),
        if bad.is_empty() {
            "overlaps >= 0, competitive weighted overlaps <= 0, energies > 0".into()
        } else {
            format!("violated at points {bad:?}")
        },
    );
}

fn audits(records: &[SweepRecord], b: &mut Builder) {
    for r in records {
        if let (Some(w), Some(c)) = (r.warm_energy, r.cold_energy) {
            let rel = (w - c).abs() / c.abs().max(1.0);
            if rel > AUDIT_TOL {
                b.warnings.push(format!(
                    "point {}: warm {} and cold {} starts differ by {} relative; kept the {} start",
                    r.point,
                    e(w),
                    e(c),
                    e(rel),
                    r.start
                ));
            }
        }
    }
}

fn need_two(name: &str, records: &[SweepRecord], rows: &[&SweepRecord], b: &mut Builder) -> bool {
    if records.len() < 2 {
        b.push(name, Status::Info, "single-point schedule, no trend".into());
        false
    } else if rows.len() < 2 {
        b.assert(
            name,
            false,
            format!("{} converged points, need at least 2", rows.len()),
        );
        false
    } else {
        true
    }
}

fn sweep_zero(records: &[SweepRecord], b: &mut Builder) {
    invariants(records, b);
    audits(records, b);
    let rows = converged_rows(records, b);
    if need_two("gap_decreasing", records, &rows, b) {
        let gaps: Vec<f64> = rows
            .iter()
            .map(|r| (r.energy_c - r.sub_levels.iter().sum::<f64>()).abs())
            .collect();
        b.assert(
            "gap_decreasing",
            strictly_decreasing(&gaps),
            format!("|c - sum c_h| = [{}]", list(&gaps)),
        );
    }
}

fn sweep_infinity(records: &[SweepRecord], b: &mut Builder) {
    infinity_checks(records, b, true);
}

/// Trend checks along `β → −∞`; the decay ratio is only enforced for full sweeps.
fn infinity_checks(records: &[SweepRecord], b: &mut Builder, enforce_decay: bool) {
    invariants(records, b);
    audits(records, b);
    let rows = converged_rows(records, b);
    let trends = need_two("overlaps_decreasing", records, &rows, b);
    if let Some(last) = rows.last().filter(|_| !trends) {
        coverage(last, b);
    }
    if !trends {
        return;
    }
    let total = |v: &[f64]| v.iter().sum::<f64>();
    let ov: Vec<f64> = rows.iter().map(|r| total(&r.overlaps)).collect();
    b.assert(
        "overlaps_decreasing",
        strictly_decreasing(&ov),
        format!("[{}]", list(&ov)),
    );
    let ratio = ov[ov.len() - 1] / ov[0];
    let detail = format!("final/initial = {} (limit {})", e(ratio), e(OVERLAP_DECAY));
    if enforce_decay {
        b.assert("overlap_decay", ratio <= OVERLAP_DECAY, detail);
    } else {
        b.push("overlap_decay", Status::Info, detail);
    }
    let mp: Vec<f64> = rows
        .iter()
        .map(|r| r.max_pointwise_products.iter().copied().fold(0.0, f64::max))
        .collect();
    b.assert(
        "max_products_decreasing",
        strictly_decreasing(&mp),
        format!("[{}]", list(&mp)),
    );
    let en: Vec<f64> = rows.iter().map(|r| r.energy_c).collect();
    b.assert(
        "energy_increasing",
        en.windows(2).all(|w| w[1] >= w[0]),
        format!("[{}]", list(&en)),
    );
    match rows[0].extra("interface_level") {
        Some(cinf) => {
            let worst = en
                .iter()
                .map(|c| c - cinf)
                .fold(f64::NEG_INFINITY, f64::max);
            b.assert(
                "energy_below_interface",
                worst <= INTERFACE_SLACK,
                format!("max c - c_inf = {} with c_inf = {}", e(worst), e(cinf)),
            );
        }
        None => b.push(
            "energy_below_interface",
            Status::Info,
            "no interface level recorded".into(),
        ),
    }
    let last = rows[rows.len() - 1];
    coverage(last, b);
    if last.component_masses.len() == 2 {
        let diff = last.component_masses[0] - last.component_masses[1];
        b.push(
            "mass_symmetry",
            Status::Info,
            format!(
                "|u_1|^2 - |u_2|^2 = {} (symmetric pairs would be within {})",
                e(diff),
                e(MASS_SYMMETRY_TOL)
            ),
        );
    }
}

fn coverage(last: &SweepRecord, b: &mut Builder) {
    b.assert(
        "coverage",
        last.coverage >= COVERAGE_MIN,
        format!(
            "{} of the ball at the last point (minimum {})",
            e(last.coverage),
            e(COVERAGE_MIN)
        ),
    );
}

fn sign_changing(records: &[SweepRecord], b: &mut Builder) {
    infinity_checks(records, b, false);
    let last = &records[records.len() - 1];
    let get = |k: &str| last.extra(k).unwrap_or(f64::NAN);
    let changes = get("sign_changes");
    if changes != 1.0 {
        b.warnings.push(format!(
            "anomaly: w changes sign {changes} times at the last point"
        ));
    }
    b.push(
        "sign_changes",
        Status::Info,
        format!("{changes} at the last point"),
    );
    let (iw, j) = (get("energy_w"), last.energy_c);
    b.assert(
        "energy_identity",
        (iw - j).abs() <= IDENTITY_TOL * j.abs().max(1.0),
        format!("I(w) = {}, J = {}, gap {}", e(iw), e(j), e(iw - j)),
    );
    let lo = last.sub_levels.iter().sum::<f64>();
    let hi = get("twice_limit");
    b.assert(
        "energy_bracket",
        lo <= iw && iw <= hi,
        format!("{} <= I(w) = {} <= {}", e(lo), e(iw), e(hi)),
    );
    let res: Vec<f64> = records
        .iter()
        .map(|r| r.extra("band_residual").unwrap_or(f64::NAN))
        .collect();
    b.push(
        "band_residual",
        Status::Info,
        format!("[{}] outside band {}", list(&res), get("band")),
    );
}

fn two_group(records: &[SweepRecord], b: &mut Builder) {
    invariants(records, b);
    audits(records, b);
    let rows = converged_rows(records, b);
    let indicator = |r: &SweepRecord| {
        let d13 = r.extra("d13").unwrap_or(f64::NAN);
        let d23 = r.extra("d23").unwrap_or(f64::NAN);
        r.energy_c < d13.min(d23)
    };
    let nontrivial = |r: &SweepRecord| {
        r.component_masses.len() == r.mass_floors.len()
            && r.component_masses
                .iter()
                .zip(&r.mass_floors)
                .all(|(m, f)| m > f)
    };
    let Some(last) = rows.last() else {
        b.assert("indicator_at_largest", false, "no converged points".into());
        return;
    };
    let en: Vec<f64> = rows.iter().map(|r| r.energy_c).collect();
    b.assert(
        "energy_nonincreasing",
        en.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()),
        format!("[{}]", list(&en)),
    );
    b.assert(
        "indicator_at_largest",
        indicator(last),
        format!(
            "c = {} vs min(d13, d23) = {} at beta_12 = {}",
            e(last.energy_c),
            e(last
                .extra("d13")
                .unwrap_or(f64::NAN)
                .min(last.extra("d23").unwrap_or(f64::NAN))),
            e(last.parameter)
        ),
    );
    b.assert(
        "masses_at_largest",
        nontrivial(last),
        format!(
            "masses [{}] floors [{}]",
            list(&last.component_masses),
            list(&last.mass_floors)
        ),
    );
    let threshold = rows.iter().find(|r| indicator(r) && nontrivial(r));
    b.push(
        "threshold",
        Status::Info,
        match threshold {
            Some(r) => format!(
                "smallest beta_12 with c < min(d13, d23) and all masses above floor: {}",
                e(r.parameter)
            ),
            None => "not reached on the scanned range".into(),
        },
    );
}

fn solve(records: &[SweepRecord], b: &mut Builder) {
    let r = &records[0];
    b.assert(
        "converged",
        r.converged,
        format!(
            "residual {} after {} iterations",
            e(r.grad_residual),
            r.iterations
        ),
    );
    invariants(records, b);
    let get = |k: &str| r.extra(k);
    if let Some(v) = get("psi_rel") {
        b.assert(
            "psi",
            v < PSI_TOL,
            format!("max |Psi_h| relative {} (limit {})", e(v), e(PSI_TOL)),
        );
    }
    if let Some(v) = get("nehari_gap") {
        b.assert(
            "nehari_energy",
            v <= NEHARI_ENERGY_TOL,
            format!(
                "|J - (1/N) sum |u_h|^2| relative {} (limit {})",
                e(v),
                e(NEHARI_ENERGY_TOL)
            ),
        );
    }
    match get("margin_gap") {
        Some(v) => b.assert(
            "dominance_margin",
            v <= MARGIN_TOL,
            format!(
                "|margin - (2p-2)|u_k|^2| relative {} (limit {})",
                e(v),
                e(MARGIN_TOL)
            ),
        ),
        None => b.push(
            "dominance_margin",
            Status::Info,
            "cross couplings not all nonpositive".into(),
        ),
    }
    let groups: Vec<f64> = (1..)
        .map_while(|h| r.extra(&format!("group_mass_{h}")))
        .collect();
    if let Some(c1) = get("c1_lambda") {
        b.assert(
            "group_mass_c1",
            groups.iter().all(|g| *g >= c1),
            format!("group masses [{}] >= C1(lambda) = {}", list(&groups), e(c1)),
        );
    }
    if let Some(c1) = get("c1") {
        b.push(
            "group_mass_c1_uncorrected",
            Status::Info,
            format!(
                "C1 without the coercivity factor = {}; group masses above it: {}",
                e(c1),
                groups.iter().all(|g| *g >= c1)
            ),
        );
    }
    let floor = r.mass_floors.first().copied().unwrap_or(0.0);
    b.assert(
        "mass_floor",
        r.component_masses.iter().all(|m| *m > floor),
        format!("masses [{}] > {}", list(&r.component_masses), e(floor)),
    );
}

fn limits(records: &[SweepRecord], b: &mut Builder) {
    let r0 = &records[0];
    b.push(
        "constants",
        Status::Info,
        format!(
            "S = {}, l_h = [{}], f_max = [{}]",
            e(r0.extra("sobolev").unwrap_or(f64::NAN)),
            list(&r0.limit_levels),
            list(
                &(1..)
                    .map_while(|h| r0.extra(&format!("fmax_{h}")))
                    .collect::<Vec<_>>()
            )
        ),
    );
    let bad: Vec<f64> = records
        .iter()
        .filter(|r| !(r.energy_c < r.extra("limit_sum").unwrap_or(f64::NAN)))
        .map(|r| r.parameter)
        .collect();
    b.assert(
        "bound_below_limit",
        bad.is_empty(),
        format!(
            "bounds [{}] vs sum l_h = {}",
            list(&records.iter().map(|r| r.energy_c).collect::<Vec<_>>()),
            e(r0.extra("limit_sum").unwrap_or(f64::NAN))
        ),
    );
}

fn validate(records: &[SweepRecord], b: &mut Builder) {
    let r = &records[0];
    for h in ["h1", "h2", "h3", "h4"] {
        let ok = r.extra(h) == Some(1.0);
        b.assert(
            h,
            ok,
            if ok {
                "holds".into()
            } else {
                "violated".into()
            },
        );
    }
}

/// Report for records of one experiment; checks named in `skip` are not enforced.
pub fn build_report(records: &[SweepRecord], skip: &[String]) -> Result<Report> {
    let Some(first) = records.first() else {
        return Err(Error::Mismatch("no records to report on".into()));
    };
    let id = first.sweep_id.clone();
    if records.iter().any(|r| r.sweep_id != id) {
        return Err(Error::Mismatch("records mix several experiments".into()));
    }
    let mut b = Builder {
        checks: Vec::new(),
        warnings: Vec::new(),
    };
    match id.as_str() {
        SWEEP_ZERO => sweep_zero(records, &mut b),
        SWEEP_INFINITY => sweep_infinity(records, &mut b),
        SIGN_CHANGING => sign_changing(records, &mut b),
        TWO_GROUP => two_group(records, &mut b),
        SOLVE => solve(records, &mut b),
        LIMITS => limits(records, &mut b),
        VALIDATE => validate(records, &mut b),
        other => return Err(Error::Mismatch(format!("unknown experiment `{other}`"))),
    }
    for c in &mut b.checks {
        if c.status != Status::Info && skip.contains(&c.name) {
            c.status = Status::Skip;
        }
    }
    Ok(Report {
        sweep_id: id,
        table: table(records),
        checks: b.checks,
        warnings: b.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::record::{records_from_csv, records_to_csv, Start};

    fn row(point: usize, beta: f64, energy: f64, overlap: f64) -> SweepRecord {
        let mut r = SweepRecord::blank(SWEEP_INFINITY, point, beta);
        r.beta_values = vec![beta];
        r.energy_c = energy;
        r.sub_levels = vec![60.0, 60.0];
        r.overlaps = vec![overlap];
        r.weighted_overlaps = vec![beta * overlap];
        r.max_pointwise_products = vec![overlap * 10.0];
        r.component_masses = vec![1.0, 2.0];
        r.coverage = 0.995;
        r.start = Start::Warm;
        r.set_extra("interface_level", 234.0);
        r
    }

    fn rows() -> Vec<SweepRecord> {
        vec![
            row(0, -1.0, 230.0, 0.5),
            row(1, -10.0, 231.0, 0.05),
            row(2, -100.0, 232.0, 5e-3),
            row(3, -1000.0, 233.0, 3e-4),
        ]
    }

    #[test]
    fn passing_sweep_and_reproducibility() {
        let records = rows();
        let rep = build_report(&records, &[]).unwrap();
        assert!(rep.passed(), "{}", rep.render());
        let back = records_from_csv(&records_to_csv(&records)).unwrap();
        assert_eq!(build_report(&back, &[]).unwrap().render(), rep.render());
    }

    #[test]
    fn failures_skips_and_unconverged_rows() {
        let mut records = rows();
        records[3].energy_c = 234.1;
        let rep = build_report(&records, &[]).unwrap();
        assert_eq!(
            rep.check("energy_below_interface").unwrap().status,
            Status::Fail
        );
        assert!(!rep.passed());
        let rep = build_report(&records, &["energy_below_interface".to_string()]).unwrap();
        assert_eq!(
            rep.check("energy_below_interface").unwrap().status,
            Status::Skip
        );
        assert!(rep.passed());
        // an unconverged outlier is excluded with a warning
        let mut records = rows();
        records[2].overlaps = vec![1.0];
        records[2].converged = false;
        let rep = build_report(&records, &[]).unwrap();
        assert!(rep.passed());
        assert!(rep.warnings.iter().any(|w| w.contains("point 2")));
    }

    #[test]
    fn mixed_or_empty_records_are_rejected() {
        assert!(build_report(&[], &[]).is_err());
        let mut records = rows();
        records[1].sweep_id = SWEEP_ZERO.into();
        assert!(build_report(&records, &[]).is_err());
    }
}
