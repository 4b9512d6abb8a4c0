//! Correlation, CHSH, and significance estimation over coincidence records.
//!
//! Estimates are folds over integer agree/disagree counts, so they are exact
//! under permutation and merge associatively. The correlation standard error
//! is the plug-in binomial form `sqrt((1 - E^2) / n)`; CHSH errors add in
//! quadrature and the violation significance is `(|S| - 2) / stderr(S)`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

use crate::engine::CoincidenceRecord;

/// Estimated correlation for one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// `(n_agree - n_disagree) / n`.
    pub e_hat: f64,
    /// Records used.
    pub n: u64,
    /// `sqrt((1 - e_hat^2) / n)`.
    pub stderr: f64,
}

/// Record filter applied uniformly to an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Every record.
    All,
    /// Internal interventions at both ends: the locality-constrained
    /// subensemble the retarded inequalities govern.
    InternalBoth,
    /// Complement of `InternalBoth`; pairs with it in the exact
    /// full-ensemble mixture identity.
    NotInternalBoth,
    /// No internal intervention at either end: retarded settings equal the
    /// actual ones exactly at both ends.
    NeitherInternal,
    /// Both retarded settings equal to the given indices.
    Retarded { a_r: u32, b_r: u32 },
    /// Internal at both ends with this template class flagged at each end.
    Template(u32),
}

impl Condition {
    /// Does a record satisfy the condition?
    pub fn admits(&self, r: &CoincidenceRecord) -> bool {
        match *self {
            Condition::All => true,
            Condition::InternalBoth => r.internal_a && r.internal_b,
            Condition::NotInternalBoth => !(r.internal_a && r.internal_b),
            Condition::NeitherInternal => !r.internal_a && !r.internal_b,
            Condition::Retarded { a_r, b_r } => r.retarded_a == a_r && r.retarded_b == b_r,
            Condition::Template(k) => r.template_a == Some(k) && r.template_b == Some(k),
        }
    }

    /// Stable label used in reports and CSV.
    pub fn label(&self) -> String {
        match *self {
            Condition::All => "all".into(),
            Condition::InternalBoth => "internal-both".into(),
            Condition::NotInternalBoth => "not-internal-both".into(),
            Condition::NeitherInternal => "neither-internal".into(),
            Condition::Retarded { a_r, b_r } => format!("retarded={a_r},{b_r}"),
            Condition::Template(k) => format!("template={k}"),
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = StatsError;

    /// Accepts `all`, `internal-both`, `not-internal-both` (alias
    /// `external`), `neither-internal`, `retarded=A,B`, `template=K`.
    fn from_str(s: &str) -> Result<Self, StatsError> {
        let bad = || StatsError::BadCondition(s.to_string());
        match s {
            "all" => return Ok(Condition::All),
            "internal-both" => return Ok(Condition::InternalBoth),
            "not-internal-both" | "external" => return Ok(Condition::NotInternalBoth),
            "neither-internal" => return Ok(Condition::NeitherInternal),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("retarded=") {
            let (a, b) = rest.split_once(',').ok_or_else(bad)?;
            return Ok(Condition::Retarded {
                a_r: a.trim().parse().map_err(|_| bad())?,
                b_r: b.trim().parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = s.strip_prefix("template=") {
            return Ok(Condition::Template(rest.trim().parse().map_err(|_| bad())?));
        }
        Err(bad())
    }
}

/// Errors from the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: setting pair ({a_index}, {b_index}) has no records under condition {condition}")]
    InsufficientData {
        a_index: u32,
        b_index: u32,
        condition: String,
    },
    #[error("unrecognized condition {0:?}")]
    BadCondition(String),
    #[error("time arguments must be positive (t_now = {t_now})")]
    BadProjection { t_now: f64 },
}

/// Integer tally underlying a correlation estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairTally {
    pub agree: u64,
    pub disagree: u64,
}

impl PairTally {
    pub fn add(&mut self, x: i8, y: i8) {
        if x == y {
            self.agree += 1;
        } else {
            self.disagree += 1;
        }
    }

    pub fn merge(&mut self, other: PairTally) {
        self.agree += other.agree;
        self.disagree += other.disagree;
    }

    pub fn n(&self) -> u64 {
        self.agree + self.disagree
    }

    /// Signed agree-minus-disagree sum (exact).
    pub fn signed_sum(&self) -> i64 {
        self.agree as i64 - self.disagree as i64
    }

    pub fn estimate(&self) -> Option<CorrelationEstimate> {
        let n = self.n();
        if n == 0 {
            return None;
        }
        let e_hat = self.signed_sum() as f64 / n as f64;
        CorrelationEstimate {
            e_hat,
            n,
            stderr: ((1.0 - e_hat * e_hat).max(0.0) / n as f64).sqrt(),
        }
        .into()
    }
}

/// Tally one setting pair under a condition.
pub fn tally_pair(
    records: &[CoincidenceRecord],
    a_index: u32,
    b_index: u32,
    condition: Condition,
) -> PairTally {
    let mut t = PairTally::default();
    for r in records {
        if r.setting_a == a_index && r.setting_b == b_index && condition.admits(r) {
            t.add(r.outcome_a, r.outcome_b);
        }
    }
    t
}

/// Correlation estimate for one setting pair, or `None` when no record
/// matches (the caller decides empty-cell policy).
pub fn estimate_correlation(
    records: &[CoincidenceRecord],
    a_index: u32,
    b_index: u32,
    condition: Condition,
) -> Option<CorrelationEstimate> {
    tally_pair(records, a_index, b_index, condition).estimate()
}

/// The four setting indices of a CHSH combination.
///
/// `S = E(a', b') + E(a', b) + E(a, b') - E(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleQuad {
    pub a: u32,
    pub a_prime: u32,
    pub b: u32,
    pub b_prime: u32,
}

impl Default for AngleQuad {
    fn default() -> Self {
        AngleQuad {
            a: 0,
            a_prime: 1,
            b: 0,
            b_prime: 1,
        }
    }
}

impl AngleQuad {
    /// The setting pairs entering S, in the order
    /// `[(a', b'), (a', b), (a, b'), (a, b)]`; the last carries sign -1.
    pub fn cells(&self) -> [(u32, u32); 4] {
        [
            (self.a_prime, self.b_prime),
            (self.a_prime, self.b),
            (self.a, self.b_prime),
            (self.a, self.b),
        ]
    }
}

/// CHSH statistic with its error and violation significance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s: f64,
    /// Quadrature sum of the four cell errors.
    pub stderr: f64,
    /// `(|s| - 2) / stderr`; negative when |s| sits below the bound.
    pub sigma_violation: f64,
    /// Setting-pair labels in the order `[(a',b'), (a',b), (a,b'), (a,b)]`.
    pub combination: [(u32, u32); 4],
    /// Per-cell estimates in the same order.
    pub cells: [CorrelationEstimate; 4],
}

/// CHSH estimate over records under a condition.
///
/// Errors with `InsufficientData` if any of the four cells is empty: a CHSH
/// value computed from three cells is meaningless.
pub fn chsh(
    records: &[CoincidenceRecord],
    quad: AngleQuad,
    condition: Condition,
) -> Result<ChshEstimate, StatsError> {
    let mut cells = [CorrelationEstimate {
        e_hat: 0.0,
        n: 0,
        stderr: 0.0,
    }; 4];
    for (slot, (ai, bi)) in quad.cells().into_iter().enumerate() {
        cells[slot] = estimate_correlation(records, ai, bi, condition).ok_or_else(|| {
            StatsError::InsufficientData {
                a_index: ai,
                b_index: bi,
                condition: condition.label(),
            }
        })?;
    }
    Ok(chsh_from_cells(quad, cells))
}

fn chsh_from_cells(quad: AngleQuad, cells: [CorrelationEstimate; 4]) -> ChshEstimate {
    let s = cells[0].e_hat + cells[1].e_hat + cells[2].e_hat - cells[3].e_hat;
    let stderr = cells
        .iter()
        .map(|c| c.stderr * c.stderr)
        .sum::<f64>()
        .sqrt();
    let sigma_violation = if stderr > 0.0 {
        (s.abs() - 2.0) / stderr
    } else if s.abs() == 2.0 {
        0.0
    } else {
        f64::INFINITY.copysign(s.abs() - 2.0)
    };
    ChshEstimate {
        s,
        stderr,
        sigma_violation,
        combination: quad.cells(),
        cells,
    }
}

/// Full-ensemble shift report: S over everything, over the internal-both
/// subensemble, and over its complement, plus the exact mixture bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub quad: AngleQuad,
    pub s_full: ChshEstimate,
    /// `None` when some internal-both cell is empty (e.g. zero humans).
    pub s_internal: Option<ChshEstimate>,
    /// `None` when some complement cell is empty.
    pub s_external: Option<ChshEstimate>,
    /// Observed internal-both fraction over all records.
    pub internal_fraction: f64,
    /// Planner prediction the fraction is reported against, if given.
    pub alpha_expected: Option<f64>,
    /// Largest per-cell violation of the count-weighted partition identity
    /// `sum_full = sum_internal + sum_external` measured on the exact integer
    /// sums; nonzero values indicate a bookkeeping bug, not noise.
    pub max_partition_residual: i64,
    /// Residual of the approximate global identity
    /// `s_full - (f * s_internal + (1 - f) * s_external)`; exact only when
    /// all cells share the same internal fraction.
    pub global_mixture_residual: Option<f64>,
}

/// Compute the full-ensemble shift report for strategy-(i) style analysis.
pub fn full_ensemble_shift(
    records: &[CoincidenceRecord],
    quad: AngleQuad,
    alpha_expected: Option<f64>,
) -> Result<ShiftReport, StatsError> {
    let s_full = chsh(records, quad, Condition::All)?;

    let mut internal_cells = Vec::with_capacity(4);
    let mut external_cells = Vec::with_capacity(4);
    let mut max_partition_residual = 0_i64;
    for (ai, bi) in quad.cells() {
        let full = tally_pair(records, ai, bi, Condition::All);
        let int = tally_pair(records, ai, bi, Condition::InternalBoth);
        let ext = tally_pair(records, ai, bi, Condition::NotInternalBoth);
        let residual = full.signed_sum() - int.signed_sum() - ext.signed_sum();
        max_partition_residual = max_partition_residual.max(residual.abs());
        internal_cells.push(int.estimate());
        external_cells.push(ext.estimate());
    }
    let collect = |cells: Vec<Option<CorrelationEstimate>>| -> Option<[CorrelationEstimate; 4]> {
        let v: Option<Vec<_>> = cells.into_iter().collect();
        v.map(|v| [v[0], v[1], v[2], v[3]])
    };
    let s_internal = collect(internal_cells).map(|c| chsh_from_cells(quad, c));
    let s_external = collect(external_cells).map(|c| chsh_from_cells(quad, c));

    let n_total = records.len() as f64;
    let n_internal = records
        .iter()
        .filter(|r| Condition::InternalBoth.admits(r))
        .count() as f64;
    let internal_fraction = if n_total > 0.0 { n_internal / n_total } else { 0.0 };

    let global_mixture_residual = match (&s_internal, &s_external) {
        (Some(si), Some(se)) => Some(
            s_full.s - (internal_fraction * si.s + (1.0 - internal_fraction) * se.s),
        ),
        (None, Some(se)) => Some(s_full.s - se.s),
        _ => None,
    };

    Ok(ShiftReport {
        quad,
        s_full,
        s_internal,
        s_external,
        internal_fraction,
        alpha_expected,
        max_partition_residual,
        global_mixture_residual,
    })
}

/// Project a violation significance to a different accumulation time:
/// significance scales as the square root of the collected sample.
pub fn significance_projection(sigma_now: f64, t_now: f64, t_target: f64) -> f64 {
    sigma_now * (t_target / t_now).sqrt()
}

/// Empirical joint histogram of the retarded setting indices.
pub fn retarded_histogram(records: &[CoincidenceRecord]) -> BTreeMap<(u32, u32), u64> {
    let mut hist = BTreeMap::new();
    for r in records {
        *hist.entry((r.retarded_a, r.retarded_b)).or_insert(0) += 1;
    }
    hist
}

/// One row of a rendered analysis: either a cell correlation or a CHSH value.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub condition: String,
    pub statistic: String,
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
    /// Violation significance; only meaningful on S rows.
    pub sigma: Option<f64>,
}

/// A full analysis over one record log.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub quad: AngleQuad,
    pub conditions: Vec<ConditionReport>,
    pub shift: Option<ShiftReport>,
    pub retarded_histogram: BTreeMap<String, u64>,
}

/// Per-condition cell estimates and CHSH.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub cells: Vec<CellReport>,
    pub chsh: Option<ChshEstimate>,
    /// Set when the CHSH could not be formed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub a_index: u32,
    pub b_index: u32,
    pub n: u64,
    pub e_hat: Option<f64>,
    pub stderr: Option<f64>,
}

/// Build an analysis report over the given conditions.
pub fn analyze(
    records: &[CoincidenceRecord],
    quad: AngleQuad,
    conditions: &[Condition],
    alpha_expected: Option<f64>,
    with_shift: bool,
) -> AnalysisReport {
    let mut condition_reports = Vec::new();
    for &cond in conditions {
        let mut cells = Vec::new();
        for (ai, bi) in quad.cells() {
            let est = estimate_correlation(records, ai, bi, cond);
            cells.push(CellReport {
                a_index: ai,
                b_index: bi,
                n: est.map_or(0, |e| e.n),
                e_hat: est.map(|e| e.e_hat),
                stderr: est.map(|e| e.stderr),
            });
        }
        let (chsh_est, error) = match chsh(records, quad, cond) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        condition_reports.push(ConditionReport {
            condition: cond.label(),
            cells,
            chsh: chsh_est,
            error,
        });
    }
    let shift = if with_shift {
        full_ensemble_shift(records, quad, alpha_expected).ok()
    } else {
        None
    };
    AnalysisReport {
        quad,
        conditions: condition_reports,
        shift,
        retarded_histogram: retarded_histogram(records)
            .into_iter()
            .map(|((a, b), n)| (format!("{a},{b}"), n))
            .collect(),
    }
}

impl AnalysisReport {
    /// Flattened rows for CSV and text rendering.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for c in &self.conditions {
            for cell in &c.cells {
                rows.push(ReportRow {
                    condition: c.condition.clone(),
                    statistic: format!("E({},{})", cell.a_index, cell.b_index),
                    n: cell.n,
                    value: cell.e_hat.unwrap_or(f64::NAN),
                    stderr: cell.stderr.unwrap_or(f64::NAN),
                    sigma: None,
                });
            }
            if let Some(s) = &c.chsh {
                rows.push(ReportRow {
                    condition: c.condition.clone(),
                    statistic: "S".into(),
                    n: s.cells.iter().map(|c| c.n).sum(),
                    value: s.s,
                    stderr: s.stderr,
                    sigma: Some(s.sigma_violation),
                });
            }
        }
        rows
    }

    /// Plot-ready CSV: `condition,statistic,n,value,stderr,sigma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,statistic,n,value,stderr,sigma\n");
        for r in self.rows() {
            let sigma = r.sigma.map_or(String::new(), |s| format!("{s:.6}"));
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{}",
                r.condition, r.statistic, r.n, r.value, r.stderr, sigma
            );
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:<10} {:>10} {:>12} {:>10} {:>10}",
            "condition", "statistic", "n", "value", "stderr", "sigma"
        );
        for r in self.rows() {
            let sigma = r.sigma.map_or("-".to_string(), |s| format!("{s:.2}"));
            let _ = writeln!(
                out,
                "{:<20} {:<10} {:>10} {:>12.6} {:>10.6} {:>10}",
                r.condition, r.statistic, r.n, r.value, r.stderr, sigma
            );
        }
        if let Some(shift) = &self.shift {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "internal-both fraction: {:.6}{}",
                shift.internal_fraction,
                shift
                    .alpha_expected
                    .map_or(String::new(), |a| format!(" (expected {a:.6})"))
            );
            let _ = writeln!(
                out,
                "partition residual (exact counts): {}",
                shift.max_partition_residual
            );
            if let Some(g) = shift.global_mixture_residual {
                let _ = writeln!(out, "global mixture residual: {g:.6}");
            }
        }
        out
    }

    /// JSON document.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
