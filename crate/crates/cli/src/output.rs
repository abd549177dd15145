//! CSV emission. Floats are written in shortest round-trip form (`inf`
//! for infinities), so parsing a file gives back the exact values.

use std::fs::File;
use std::path::Path;

use lazo_core::diagnostics::{mean_std, BoundReport, SymmetryReport};
use lazo_core::estimators::RuleFired;
use lazo_core::optimizer::{RoundRecord, Trajectory};

use crate::CliError;

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "trial",
    "t",
    "loss",
    "cum_queries",
    "queries_this_round",
    "rule_fired",
    "variation",
    "est_sq_norm",
];

pub const AGGREGATE_HEADER: [&str; 5] = [
    "t",
    "loss_mean",
    "loss_std",
    "queries_mean",
    "cum_queries_mean",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("writing {}: {e}", path.display()))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record(TRAJECTORY_HEADER).map_err(&err)?;
    for r in &traj.records {
        w.write_record([
            traj.trial.to_string(),
            r.t.to_string(),
            fmt_f64(r.loss),
            r.cum_queries.to_string(),
            r.queries_this_round.to_string(),
            r.rule.to_string(),
            r.variation.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.est_sq_norm),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Parse a trajectory CSV back into `(trial, record)` rows.
pub fn read_trajectory(path: &Path) -> Result<Vec<(usize, RoundRecord)>, CliError> {
    let bad = |what: &str| CliError::Runtime(format!("{}: {what}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(&e.to_string()))?;
    let header = r.headers().map_err(|e| bad(&e.to_string()))?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(bad("unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad("bad float"));
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad("bad integer"));
        rows.push((
            int(0)? as usize,
            RoundRecord {
                t: int(1)? as usize,
                loss: num(2)?,
                cum_queries: int(3)?,
                queries_this_round: int(4)? as usize,
                rule: field(5)
                    .parse::<RuleFired>()
                    .map_err(|e| bad(&e.to_string()))?,
                variation: if field(6).is_empty() {
                    None
                } else {
                    Some(num(6)?)
                },
                est_sq_norm: num(7)?,
            },
        ));
    }
    Ok(rows)
}

/// Per-round mean and standard deviation across trials.
pub fn write_aggregate(path: &Path, trajs: &[Trajectory]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record(AGGREGATE_HEADER).map_err(&err)?;
    let rounds = trajs.iter().map(|t| t.records.len()).min().unwrap_or(0);
    for i in 0..rounds {
        let loss: Vec<f64> = trajs.iter().map(|t| t.records[i].loss).collect();
        let q: Vec<f64> = trajs
            .iter()
            .map(|t| t.records[i].queries_this_round as f64)
            .collect();
        let cq: Vec<f64> = trajs
            .iter()
            .map(|t| t.records[i].cum_queries as f64)
            .collect();
        let (lm, ls) = mean_std(&loss);
        w.write_record([
            trajs[0].records[i].t.to_string(),
            fmt_f64(lm),
            fmt_f64(ls),
            fmt_f64(mean_std(&q).0),
            fmt_f64(mean_std(&cq).0),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// One row per (method, trial) with the final loss, total queries and the
/// loss-sequence checksum used to confirm paired seeds.
pub fn write_summary(path: &Path, rows: &[(&str, &Trajectory)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record([
        "config",
        "trial",
        "final_loss",
        "total_queries",
        "oracle_checksum",
        "seconds",
    ])
    .map_err(&err)?;
    for (name, t) in rows {
        w.write_record([
            name.to_string(),
            t.trial.to_string(),
            fmt_f64(t.final_loss()),
            t.total_queries().to_string(),
            format!("{:016x}", t.oracle_checksum),
            fmt_f64(t.duration.as_secs_f64()),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn write_bounds(
    path: &Path,
    name: &str,
    reports: &[(usize, BoundReport)],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record([
        "config",
        "trial",
        "rounds_checked",
        "reuse_rounds",
        "degenerate_rounds",
        "instance_bound_violations",
        "premise_rounds",
        "reduced_norm_violations",
        "mean_sq_norm",
        "max_sq_norm",
    ])
    .map_err(&err)?;
    for (trial, r) in reports {
        w.write_record([
            name.to_string(),
            trial.to_string(),
            r.rounds_checked.to_string(),
            r.reuse_rounds.to_string(),
            r.degenerate_rounds.to_string(),
            r.instance_bound_violations.to_string(),
            r.premise_rounds.to_string(),
            r.reduced_norm_violations.to_string(),
            fmt_f64(r.mean_sq_norm),
            fmt_f64(r.max_sq_norm),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Membership of every sampled direction with its coordinates under each
/// projection (`p{m}_{k}` columns).
pub fn write_symmetry(path: &Path, report: &SymmetryReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    let k = report
        .projected
        .first()
        .and_then(|p| p.first())
        .map_or(0, Vec::len);
    let mut header = vec!["pair".to_string(), "sign".into(), "member".into()];
    for m in 0..report.projected.len() {
        for j in 0..k {
            header.push(format!("p{m}_{j}"));
        }
    }
    w.write_record(&header).map_err(&err)?;
    for (i, s) in report.samples.iter().enumerate() {
        let mut row = vec![
            s.pair.to_string(),
            s.sign.to_string(),
            (s.member as u8).to_string(),
        ];
        for proj in &report.projected {
            row.extend(proj[i].iter().map(|v| fmt_f64(*v)));
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub struct SymmetryRow {
    pub config: String,
    pub threshold: f64,
    pub round: usize,
    pub samples: usize,
    pub member_fraction: f64,
    pub score: f64,
}

pub fn write_symmetry_summary(path: &Path, rows: &[SymmetryRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record([
        "config",
        "threshold",
        "round",
        "samples",
        "member_fraction",
        "asymmetry_score",
    ])
    .map_err(&err)?;
    for r in rows {
        w.write_record([
            r.config.clone(),
            fmt_f64(r.threshold),
            r.round.to_string(),
            r.samples.to_string(),
            fmt_f64(r.member_fraction),
            fmt_f64(r.score),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub struct SweepRow {
    pub config: String,
    pub threshold: f64,
    pub eta: f64,
    pub delta: f64,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    pub total_queries_mean: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = io_err(path);
    w.write_record([
        "config",
        "threshold",
        "eta",
        "delta",
        "final_loss_mean",
        "final_loss_std",
        "total_queries_mean",
    ])
    .map_err(&err)?;
    for r in rows {
        w.write_record([
            r.config.clone(),
            fmt_f64(r.threshold),
            fmt_f64(r.eta),
            fmt_f64(r.delta),
            fmt_f64(r.final_loss_mean),
            fmt_f64(r.final_loss_std),
            fmt_f64(r.total_queries_mean),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}
