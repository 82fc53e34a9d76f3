//! Summary files: per-step and per-trial CSVs, aggregates, comparisons and
//! plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::Method;
use super::trial::TrialResult;
use crate::error::{Error, Result};
use crate::stats::{compare, mean, std_dev, Alternative, Comparison};

pub const STEPS_FILE: &str = "steps.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const COMPARISONS_FILE: &str = "comparisons.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const FIG1_FILE: &str = "fig1_data.csv";

pub const STEP_COLUMNS: [&str; 10] = [
    "trial",
    "method",
    "epoch",
    "t",
    "action",
    "accepted",
    "step_profit",
    "profit",
    "loss",
    "reward",
];
pub const TRIAL_COLUMNS: [&str; 11] = [
    "trial",
    "seed",
    "method",
    "status",
    "epochs",
    "profit",
    "loss",
    "reward",
    "baseline_n",
    "baseline_beta",
    "error",
];

/// Published mean final (profit, loss, reward) for the two headline methods.
pub const REFERENCE_VALUES: [(Method, [f64; 3]); 2] = [
    (Method::Rl, [6916.0, 856.0, 6060.0]),
    (Method::Baseline, [6444.0, 834.0, 5610.0]),
];

pub fn write_steps<W: std::io::Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEP_COLUMNS)?;
    for r in results {
        for e in &r.epochs {
            for s in &e.steps {
                w.write_record([
                    r.trial.to_string(),
                    r.method.to_string(),
                    e.epoch.to_string(),
                    s.t.to_string(),
                    s.action.to_string(),
                    (s.accepted as u8).to_string(),
                    s.step_profit.to_string(),
                    s.profit.to_string(),
                    s.loss.to_string(),
                    s.reward.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub outcome: std::result::Result<TrialResult, String>,
    pub baseline: Option<(f64, f64)>,
}

pub fn write_trials<W: std::io::Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_COLUMNS)?;
    for row in rows {
        let (n, beta) = row
            .baseline
            .map(|(n, b)| (n.to_string(), b.to_string()))
            .unwrap_or_default();
        let rec: Vec<String> = match &row.outcome {
            Ok(r) => {
                let (p, l) = (r.final_profit(), r.final_loss());
                vec![
                    row.trial.to_string(),
                    row.seed.to_string(),
                    row.method.to_string(),
                    "ok".into(),
                    r.epochs.len().to_string(),
                    p.to_string(),
                    l.to_string(),
                    (p - l).to_string(),
                    n,
                    beta,
                    String::new(),
                ]
            }
            Err(msg) => vec![
                row.trial.to_string(),
                row.seed.to_string(),
                row.method.to_string(),
                "failed".into(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                n,
                beta,
                msg.clone(),
            ],
        };
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

struct Table {
    index: BTreeMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let index: BTreeMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let missing: Vec<String> = required
            .iter()
            .filter(|c| !index.contains_key(**c))
            .map(|c| format!("{}:{c}", path.file_name().unwrap_or_default().to_string_lossy()))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingColumns(missing));
        }
        let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { index, rows })
    }

    fn get<'a>(&self, row: &'a csv::StringRecord, col: &str) -> &'a str {
        row.get(self.index[col]).unwrap_or("")
    }

    fn num(&self, row: &csv::StringRecord, col: &str) -> Result<f64> {
        let s = self.get(row, col);
        s.parse()
            .map_err(|_| Error::InvalidArgument(format!("column {col}: cannot parse {s:?} as a number")))
    }
}

/// Final values of one method, per trial and per trial-epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodFinals {
    /// `(profit, loss)` per successful trial, averaged over its test epochs.
    pub trials: Vec<(f64, f64)>,
    /// `(profit, loss)` per trial-epoch.
    pub trial_epochs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Grouping {
    Trial,
    TrialEpoch,
}

impl Grouping {
    pub fn name(self) -> &'static str {
        match self {
            Grouping::Trial => "trial",
            Grouping::TrialEpoch => "trial_epoch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub t: usize,
    pub n: usize,
    /// Mean and sd of profit, loss and reward.
    pub mean: [f64; 3],
    pub sd: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub label: String,
    pub n: usize,
    pub profit: f64,
    pub loss: f64,
    pub reward: f64,
    pub sd: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub a: Method,
    pub b: Method,
    pub metric: &'static str,
    pub unit: Grouping,
    pub alternative: Alternative,
    pub result: Comparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub finals: BTreeMap<Method, MethodFinals>,
    pub aggregate: Vec<AggregateRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub series: BTreeMap<(Grouping, Method), Vec<SeriesPoint>>,
    pub failed_trials: usize,
}

type StepKey = (Method, usize, u32);

fn load_steps(dir: &Path) -> Result<BTreeMap<StepKey, Vec<(usize, [f64; 3])>>> {
    let table = Table::read(
        &dir.join(STEPS_FILE),
        &["trial", "method", "epoch", "t", "profit", "loss", "reward"],
    )?;
    let mut out: BTreeMap<StepKey, Vec<(usize, [f64; 3])>> = BTreeMap::new();
    for row in &table.rows {
        let method: Method = table.get(row, "method").parse()?;
        let trial = table.num(row, "trial")? as usize;
        let epoch = table.num(row, "epoch")? as u32;
        let t = table.num(row, "t")? as usize;
        let v = [
            table.num(row, "profit")?,
            table.num(row, "loss")?,
            table.num(row, "reward")?,
        ];
        out.entry((method, trial, epoch)).or_default().push((t, v));
    }
    for s in out.values_mut() {
        s.sort_by_key(|(t, _)| *t);
    }
    Ok(out)
}

fn summarise(values: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let mut m = [0.0; 3];
    let mut s = [0.0; 3];
    for k in 0..3 {
        let xs: Vec<f64> = values.iter().map(|v| v[k]).collect();
        m[k] = mean(&xs);
        s[k] = std_dev(&xs);
    }
    (m, s)
}

fn mean_series(runs: &[&Vec<(usize, [f64; 3])>]) -> Vec<(usize, [f64; 3])> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<[f64; 3]> = runs.iter().map(|r| r[i].1).collect();
            (runs[0][i].0, summarise(&vals).0)
        })
        .collect()
}

fn series_points(runs: &[Vec<(usize, [f64; 3])>]) -> Vec<SeriesPoint> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<[f64; 3]> = runs.iter().map(|r| r[i].1).collect();
            let (mean, sd) = summarise(&vals);
            SeriesPoint {
                t: runs[0][i].0,
                n: vals.len(),
                mean,
                sd,
            }
        })
        .collect()
}

/// Builds the report from `steps.csv` and `trials.csv` in `dir`.
pub fn build_report(dir: &Path) -> Result<Report> {
    let trials = Table::read(
        &dir.join(TRIALS_FILE),
        &["trial", "method", "status", "profit", "loss"],
    )?;
    let steps = load_steps(dir)?;

    let mut finals: BTreeMap<Method, MethodFinals> = BTreeMap::new();
    let mut failed_trials = 0;
    let mut ok_trials: BTreeMap<Method, Vec<usize>> = BTreeMap::new();
    for row in &trials.rows {
        let method: Method = trials.get(row, "method").parse()?;
        if trials.get(row, "status") != "ok" {
            failed_trials += 1;
            continue;
        }
        let trial = trials.num(row, "trial")? as usize;
        ok_trials.entry(method).or_default().push(trial);
        finals
            .entry(method)
            .or_default()
            .trials
            .push((trials.num(row, "profit")?, trials.num(row, "loss")?));
    }

    let mut series = BTreeMap::new();
    for (&method, ids) in &ok_trials {
        let mut per_trial: Vec<Vec<(usize, [f64; 3])>> = Vec::new();
        let mut per_epoch: Vec<Vec<(usize, [f64; 3])>> = Vec::new();
        for &trial in ids {
            let runs: Vec<&Vec<(usize, [f64; 3])>> = steps
                .range((method, trial, 0)..=(method, trial, u32::MAX))
                .map(|(_, v)| v)
                .collect();
            for r in &runs {
                if let Some(&(_, [p, l, _])) = r.last() {
                    finals.entry(method).or_default().trial_epochs.push((p, l));
                }
                per_epoch.push((*r).clone());
            }
            if !runs.is_empty() {
                per_trial.push(mean_series(&runs));
            }
        }
        series.insert((Grouping::Trial, method), series_points(&per_trial));
        series.insert((Grouping::TrialEpoch, method), series_points(&per_epoch));
    }

    let mut aggregate = Vec::new();
    for (&method, f) in &finals {
        let vals: Vec<[f64; 3]> = f.trials.iter().map(|&(p, l)| [p, l, p - l]).collect();
        let (m, s) = summarise(&vals);
        aggregate.push(AggregateRow {
            label: method.to_string(),
            n: vals.len(),
            profit: m[0],
            loss: m[1],
            reward: m[0] - m[1],
            sd: Some(s),
        });
    }
    let pairs = [
        (Method::Rl, Method::Baseline),
        (Method::Rl, Method::Pipeline),
        (Method::Baseline, Method::Pipeline),
    ];
    let present: Vec<(Method, Method)> = pairs
        .into_iter()
        .filter(|(a, b)| {
            finals.get(a).is_some_and(|f| !f.trials.is_empty())
                && finals.get(b).is_some_and(|f| !f.trials.is_empty())
        })
        .collect();
    let row_of = |m: Method| aggregate.iter().find(|r| r.label == m.name()).cloned();
    let mut diffs = Vec::new();
    for &(a, b) in &present {
        let (ra, rb) = (row_of(a).unwrap(), row_of(b).unwrap());
        let (p, l) = (ra.profit - rb.profit, ra.loss - rb.loss);
        diffs.push(AggregateRow {
            label: format!("{a}-{b}"),
            n: ra.n.min(rb.n),
            profit: p,
            loss: l,
            reward: p - l,
            sd: None,
        });
    }
    aggregate.extend(diffs);

    let mut comparisons = Vec::new();
    for &(a, b) in &present {
        for unit in [Grouping::Trial, Grouping::TrialEpoch] {
            let pick = |m: Method| -> &Vec<(f64, f64)> {
                match unit {
                    Grouping::Trial => &finals[&m].trials,
                    Grouping::TrialEpoch => &finals[&m].trial_epochs,
                }
            };
            let (fa, fb) = (pick(a), pick(b));
            if fa.is_empty() || fb.is_empty() {
                continue;
            }
            let metrics: [(&'static str, Alternative, fn(&(f64, f64)) -> f64); 3] = [
                ("profit", Alternative::Greater, |x| x.0),
                ("reward", Alternative::Greater, |x| x.0 - x.1),
                ("loss", Alternative::TwoSided, |x| x.1),
            ];
            for (metric, alt, f) in metrics {
                let xa: Vec<f64> = fa.iter().map(f).collect();
                let xb: Vec<f64> = fb.iter().map(f).collect();
                comparisons.push(ComparisonRow {
                    a,
                    b,
                    metric,
                    unit,
                    alternative: alt,
                    result: compare(&xa, &xb, alt)?,
                });
            }
        }
    }

    Ok(Report {
        finals,
        aggregate,
        comparisons,
        series,
        failed_trials,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Report {
    pub fn comparison(&self, a: Method, b: Method, metric: &str, unit: Grouping) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.a == a && c.b == b && c.metric == metric && c.unit == unit)
            .map(|c| &c.result)
    }

    pub fn aggregate_row(&self, label: &str) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.label == label)
    }

    pub fn write_aggregate<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "row",
            "n",
            "profit",
            "loss",
            "reward",
            "profit_sd",
            "loss_sd",
            "reward_sd",
        ])?;
        for r in &self.aggregate {
            let sd = |k: usize| opt(r.sd.map(|s| s[k]));
            w.write_record([
                r.label.clone(),
                r.n.to_string(),
                r.profit.to_string(),
                r.loss.to_string(),
                r.reward.to_string(),
                sd(0),
                sd(1),
                sd(2),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_comparisons<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "a",
            "b",
            "metric",
            "unit",
            "alternative",
            "n_a",
            "n_b",
            "mean_a",
            "mean_b",
            "u",
            "p",
            "cohens_d",
            "cles",
        ])?;
        for c in &self.comparisons {
            let r = &c.result;
            let alt = match c.alternative {
                Alternative::Less => "less",
                Alternative::Greater => "greater",
                Alternative::TwoSided => "two_sided",
            };
            w.write_record([
                c.a.to_string(),
                c.b.to_string(),
                c.metric.to_string(),
                c.unit.name().to_string(),
                alt.to_string(),
                r.n_a.to_string(),
                r.n_b.to_string(),
                r.mean_a.to_string(),
                r.mean_b.to_string(),
                r.u.to_string(),
                r.p.to_string(),
                opt(r.cohens_d),
                r.cles.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_fig1<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "grouping",
            "method",
            "t",
            "n",
            "profit_mean",
            "profit_sd",
            "loss_mean",
            "loss_sd",
            "reward_mean",
            "reward_sd",
        ])?;
        for ((g, m), points) in &self.series {
            for p in points {
                w.write_record([
                    g.name().to_string(),
                    m.to_string(),
                    p.t.to_string(),
                    p.n.to_string(),
                    p.mean[0].to_string(),
                    p.sd[0].to_string(),
                    p.mean[1].to_string(),
                    p.sd[1].to_string(),
                    p.mean[2].to_string(),
                    p.sd[2].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Mean final values per trial (averaged over test epochs)");
        let _ = writeln!(
            s,
            "{:<20} {:>4} {:>12} {:>12} {:>12}",
            "method", "n", "profit", "loss", "reward"
        );
        for r in &self.aggregate {
            let _ = writeln!(
                s,
                "{:<20} {:>4} {:>12.2} {:>12.2} {:>12.2}",
                r.label, r.n, r.profit, r.loss, r.reward
            );
        }
        if self.failed_trials > 0 {
            let _ = writeln!(s, "\n{} trial run(s) failed; see trials.csv", self.failed_trials);
        }
        let _ = writeln!(
            s,
            "\nComparisons (Mann-Whitney U; d = Cohen's d; CLES = P(a > b))"
        );
        for c in &self.comparisons {
            let r = &c.result;
            let _ = writeln!(
                s,
                "{:>8} vs {:<8} {:<6} unit={:<11} {:?}: n={}/{} U={} p={:.4e} d={} CLES={:.3}",
                c.a.name(),
                c.b.name(),
                c.metric,
                c.unit.name(),
                c.alternative,
                r.n_a,
                r.n_b,
                r.u,
                r.p,
                r.cohens_d
                    .map(|d| format!("{d:.3}"))
                    .unwrap_or_else(|| "n/a".into()),
                r.cles
            );
        }
        let _ = writeln!(s, "\nTerminal means of the step series");
        for ((g, m), points) in &self.series {
            if let Some(p) = points.last() {
                let _ = writeln!(
                    s,
                    "{:<11} {:<8} t={:<5} n={:<4} profit={:.2} loss={:.2} reward={:.2}",
                    g.name(),
                    m.name(),
                    p.t,
                    p.n,
                    p.mean[0],
                    p.mean[1],
                    p.mean[2]
                );
            }
        }
        let _ = writeln!(s, "\nPublished values (reference-only, environment differs)");
        for (m, [p, l, r]) in REFERENCE_VALUES {
            let _ = writeln!(
                s,
                "{:<20} {:>4} {:>12.2} {:>12.2} {:>12.2}",
                m.name(),
                "",
                p,
                l,
                r
            );
        }
        s
    }
}

/// Reads the summary CSVs in `dir` and writes aggregate, comparison, plot-data
/// and text report files next to them.
pub fn report(dir: &Path) -> Result<Report> {
    let r = build_report(dir)?;
    r.write_aggregate(fs::File::create(dir.join(AGGREGATE_FILE))?)?;
    r.write_comparisons(fs::File::create(dir.join(COMPARISONS_FILE))?)?;
    r.write_fig1(fs::File::create(dir.join(FIG1_FILE))?)?;
    fs::write(dir.join(REPORT_FILE), r.text())?;
    Ok(r)
}
