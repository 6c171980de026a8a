//! Rendering of library results. Nothing here computes a value; every number
//! comes straight out of an `aoi_core` call.

use std::fmt::Write as _;
use std::io::Write;

use aoi_core::{ActivationProfile, Network, OptimizerResult, Policy, TraceStats};

pub const LINK_COLUMNS: [&str; 11] = [
    "link",
    "gamma",
    "weight",
    "interferers",
    "p",
    "f",
    "age",
    "empirical_age",
    "empirical_peak_age",
    "relative_error",
    "lambda",
];

pub const COMPARE_COLUMNS: [&str; 7] = [
    "link",
    "heuristic_p",
    "optimal_p",
    "oracle_p",
    "heuristic_age",
    "optimal_age",
    "oracle_age",
];

#[derive(Debug, Clone, Default)]
pub struct LinkRow {
    pub id: i64,
    pub gamma: f64,
    pub weight: f64,
    pub interferers: usize,
    pub p: Option<f64>,
    pub f: Option<f64>,
    pub age: Option<f64>,
    pub empirical_age: Option<f64>,
    pub empirical_peak_age: Option<f64>,
    pub relative_error: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub command: String,
    pub rows: Vec<LinkRow>,
    pub network_age: Option<f64>,
    pub empirical_average_age: Option<f64>,
    pub empirical_peak_age: Option<f64>,
    pub dual_value: Option<f64>,
    pub diagnostics: Vec<(String, String)>,
    summary: String,
}

impl RunReport {
    pub fn new(command: String, net: &Network) -> Self {
        let rows = (0..net.len())
            .map(|e| LinkRow {
                id: net.id(e),
                gamma: net.gamma(e),
                weight: net.weight(e),
                interferers: net.neighbors(e).len(),
                ..Default::default()
            })
            .collect();
        let summary = format!(
            "{} links, {} interference relations, {}, {}",
            net.len(),
            (0..net.len()).map(|e| net.neighbors(e).len()).sum::<usize>(),
            if net.is_symmetric() { "symmetric" } else { "asymmetric" },
            if net.is_single_collision_domain() {
                "single collision domain"
            } else {
                "general conflict graph"
            }
        );
        Self {
            command,
            rows,
            summary,
            ..Default::default()
        }
    }

    pub fn set_policy(&mut self, policy: &Policy, profile: &ActivationProfile) {
        for (e, row) in self.rows.iter_mut().enumerate() {
            row.p = Some(policy.as_slice()[e]);
            row.f = Some(profile.frequency[e]);
            row.age = Some(profile.age[e]);
        }
        self.network_age = Some(profile.network_age);
    }

    pub fn set_optimizer(&mut self, res: &OptimizerResult) {
        for (row, &l) in self.rows.iter_mut().zip(&res.lambda) {
            row.lambda = Some(l);
        }
        self.dual_value = Some(res.dual_objective);
        self.note("converged", res.converged);
        self.note("frames", res.frames);
        self.note("primal value", res.primal_objective);
        self.note("duality gap", res.duality_gap);
        match &res.residual {
            Some(_) => self.note("max fixed-point residual", res.max_residual()),
            None => self.note("max fixed-point residual", "undefined (divergent age)"),
        }
        self.note("broadcasts", res.broadcasts);
        self.note("deliveries", res.deliveries);
    }

    pub fn set_simulation(&mut self, stats: &TraceStats, relative: &[(f64, Option<f64>)]) {
        for ((row, s), (err, _)) in self.rows.iter_mut().zip(&stats.links).zip(relative) {
            row.empirical_age = Some(s.average_age);
            row.empirical_peak_age = s.peak_age;
            row.relative_error = Some(*err);
        }
        self.empirical_average_age = Some(stats.network_average_age);
        self.empirical_peak_age = stats.network_peak_age;
        self.note("horizon", stats.horizon);
        self.note("seed", stats.seed);
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "$ {}", self.command);
        let _ = writeln!(out, "network: {}", self.summary);
        let _ = writeln!(
            out,
            "{:>6} {:>8} {:>8} {:>4} {:>10} {:>10} {:>12} {:>12} {:>12} {:>10} {:>12}",
            "link", "gamma", "weight", "|N|", "p", "f", "age", "emp. age", "emp. peak", "rel. err", "lambda"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>8.4} {:>8.4} {:>4} {:>10} {:>10} {:>12} {:>12} {:>12} {:>10} {:>12}",
                r.id,
                r.gamma,
                r.weight,
                r.interferers,
                human(r.p, 6),
                human(r.f, 6),
                human(r.age, 6),
                human(r.empirical_age, 6),
                human(r.empirical_peak_age, 6),
                human(r.relative_error, 6),
                human(r.lambda, 6),
            );
        }
        let totals = [
            ("network age (closed form)", self.network_age),
            ("network age (empirical average)", self.empirical_average_age),
            ("network age (empirical peak)", self.empirical_peak_age),
            ("dual value", self.dual_value),
        ];
        for (label, value) in totals {
            if let Some(v) = value {
                let _ = writeln!(out, "{label}: {v:.9}");
            }
        }
        for (key, value) in &self.diagnostics {
            let _ = writeln!(out, "{key}: {value}");
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LINK_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.id.to_string(),
                r.gamma.to_string(),
                r.weight.to_string(),
                r.interferers.to_string(),
                field(r.p),
                field(r.f),
                field(r.age),
                field(r.empirical_age),
                field(r.empirical_peak_age),
                field(r.relative_error),
                field(r.lambda),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One policy column of the comparison table.
#[derive(Debug, Clone)]
pub struct Column {
    pub policy: Policy,
    pub profile: ActivationProfile,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub ids: Vec<i64>,
    pub heuristic: Result<Column, String>,
    pub optimal: Column,
    pub oracle: Result<Column, String>,
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:>12} {:>12} {:>12} {:>14} {:>14} {:>14}",
            "link", "heur. p", "optimal p", "oracle p", "heur. age", "optimal age", "oracle age"
        );
        let p = |c: &Result<Column, String>, e: usize| c.as_ref().ok().map(|c| c.policy.as_slice()[e]);
        let a = |c: &Result<Column, String>, e: usize| c.as_ref().ok().map(|c| c.profile.age[e]);
        let opt = Ok(self.optimal.clone());
        for (e, id) in self.ids.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>6} {:>12} {:>12} {:>12} {:>14} {:>14} {:>14}",
                id,
                human(p(&self.heuristic, e), 6),
                human(p(&opt, e), 6),
                human(p(&self.oracle, e), 6),
                human(a(&self.heuristic, e), 6),
                human(a(&opt, e), 6),
                human(a(&self.oracle, e), 6),
            );
        }
        let total = |c: &Result<Column, String>| c.as_ref().ok().map(|c| c.profile.network_age);
        let _ = writeln!(
            out,
            "{:>6} {:>12} {:>12} {:>12} {:>14} {:>14} {:>14}",
            "total",
            "",
            "",
            "",
            human(total(&self.heuristic), 6),
            human(total(&opt), 6),
            human(total(&self.oracle), 6),
        );
        for (name, col) in [("heuristic", &self.heuristic), ("oracle", &self.oracle)] {
            if let Err(why) = col {
                let _ = writeln!(out, "{name}: skipped ({why})");
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARE_COLUMNS)?;
        let opt = Ok(self.optimal.clone());
        let cols = [&self.heuristic, &opt, &self.oracle];
        for (e, id) in self.ids.iter().enumerate() {
            let mut record = vec![id.to_string()];
            record.extend(
                cols.iter()
                    .map(|c| field(c.as_ref().ok().map(|c| c.policy.as_slice()[e]))),
            );
            record.extend(cols.iter().map(|c| field(c.as_ref().ok().map(|c| c.profile.age[e]))));
            w.write_record(&record)?;
        }
        let mut total = vec!["total".to_string(), String::new(), String::new(), String::new()];
        total.extend(
            cols.iter()
                .map(|c| field(c.as_ref().ok().map(|c| c.profile.network_age))),
        );
        w.write_record(&total)?;
        w.flush()?;
        Ok(())
    }
}

fn human(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "-".into(),
    }
}

/// Shortest round-trip representation; empty when absent.
fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
