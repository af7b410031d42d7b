//! Sweeps over one scenario parameter and the files they produce.
//!
//! `results.csv` holds one row per sweep value and candidate head:
//!
//! | column | meaning |
//! |---|---|
//! | `sweep` | swept variable, or `none` |
//! | `sweep_value` | value of the swept variable, empty for `none` |
//! | `candidate_head` | 1-based user index |
//! | `status` | solver status of the candidate |
//! | `selected` | 1 for the chosen head, else 0 |
//! | `utility_<k>` | utility of user k |
//! | `airtime_<k>_s` | airtime given to user k's items |
//! | `energy_<k>_j` | energy consumed by user k |
//! | `disseminated_mb` | total MB disseminated |
//! | `plain_product`, `weighted_product` | Nash products |
//!
//! Slot-size sweeps write `adaptive.csv` instead, one row per slot size,
//! seed and scheme. Numbers carry 6 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use nbs_airtime::adaptive::{run_adaptive, run_non_adaptive, ChannelModel, TimelineResult};
use nbs_airtime::solver::{select_head, solve_all_heads};
use nbs_airtime::{Scenario, SolverOptions, SubSolution};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LoadedScenario, SweepVariable};

/// Airtime below this counts as none when locating the others-first point.
pub const ZERO_AIRTIME: f64 = 1e-7;

/// `%g`-style rendering with 6 significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        trim_zeros(&format!("{:.*}", (5 - exp).max(0) as usize, v))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: String,
    pub sweep_value: Option<f64>,
    /// Zero-based.
    pub candidate_head: usize,
    pub status: String,
    pub selected: bool,
    pub utilities: Vec<f64>,
    pub airtime: Vec<f64>,
    pub energy: Vec<f64>,
    pub disseminated: f64,
    pub plain_product: f64,
    pub weighted_product: f64,
}

impl ResultRow {
    pub fn from_candidate(
        scenario: &Scenario,
        sweep: &str,
        value: Option<f64>,
        c: &SubSolution,
        selected: bool,
    ) -> Self {
        let n = scenario.user_count();
        let mut airtime = vec![0.0; n];
        for (m, it) in scenario.items.iter().enumerate() {
            airtime[it.owner] += c.allocation.get(m);
        }
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        ResultRow {
            sweep: sweep.to_string(),
            sweep_value: value,
            candidate_head: c.head,
            status: c.status.as_str().to_string(),
            selected,
            utilities: c.utilities.iter().map(|&u| finite(u)).collect(),
            airtime,
            energy: c.flows.iter().map(|f| f.energy).collect(),
            disseminated: c.total_disseminated(),
            plain_product: finite(c.products.plain),
            weighted_product: finite(c.products.weighted),
        }
    }
}

pub fn result_header(users: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["sweep", "sweep_value", "candidate_head", "status", "selected"].map(String::from).to_vec();
    h.extend((1..=users).map(|k| format!("utility_{k}")));
    h.extend((1..=users).map(|k| format!("airtime_{k}_s")));
    h.extend((1..=users).map(|k| format!("energy_{k}_j")));
    h.extend(["disseminated_mb", "plain_product", "weighted_product"].map(String::from));
    h
}

pub fn write_results<W: Write>(out: W, users: usize, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(result_header(users))?;
    for r in rows {
        let mut rec = vec![
            r.sweep.clone(),
            r.sweep_value.map(sig6).unwrap_or_default(),
            (r.candidate_head + 1).to_string(),
            r.status.clone(),
            u8::from(r.selected).to_string(),
        ];
        rec.extend(r.utilities.iter().chain(&r.airtime).chain(&r.energy).map(|&v| sig6(v)));
        rec.extend([r.disseminated, r.plain_product, r.weighted_product].map(sig6));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRow {
    pub slot_size: f64,
    pub seed: u64,
    pub scheme: &'static str,
    pub head_counts: Vec<usize>,
    pub utilities: Vec<f64>,
    pub energy: Vec<f64>,
    pub disseminated: f64,
    pub energy_spread: f64,
    pub plain_product: f64,
    pub weighted_product: f64,
}

impl AdaptiveRow {
    fn new(slot_size: f64, seed: u64, scheme: &'static str, users: usize, t: &TimelineResult) -> Self {
        AdaptiveRow {
            slot_size,
            seed,
            scheme,
            head_counts: t.head_counts(users),
            utilities: t.utilities.clone(),
            energy: t.totals.iter().map(|f| f.energy).collect(),
            disseminated: t.total_disseminated(),
            energy_spread: t.energy_spread(),
            plain_product: t.products.plain,
            weighted_product: t.products.weighted,
        }
    }
}

pub fn write_adaptive<W: Write>(out: W, users: usize, rows: &[AdaptiveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut h: Vec<String> = ["slot_size_s", "seed", "scheme"].map(String::from).to_vec();
    h.extend((1..=users).map(|k| format!("head_slots_{k}")));
    h.extend((1..=users).map(|k| format!("utility_{k}")));
    h.extend((1..=users).map(|k| format!("energy_{k}_j")));
    h.extend(["disseminated_mb", "energy_std_j", "plain_product", "weighted_product"].map(String::from));
    w.write_record(h)?;
    for r in rows {
        let mut rec = vec![sig6(r.slot_size), r.seed.to_string(), r.scheme.to_string()];
        rec.extend(r.head_counts.iter().map(|c| c.to_string()));
        rec.extend(r.utilities.iter().chain(&r.energy).map(|&v| sig6(v)));
        rec.extend([r.disseminated, r.energy_spread, r.plain_product, r.weighted_product].map(sig6));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub value: Option<f64>,
    /// 1-based; `None` when no candidate admits an agreement.
    pub selected_head: Option<usize>,
    pub plain_product: Option<f64>,
    pub head_own_airtime_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSummary {
    pub scheme: &'static str,
    pub slot_size: f64,
    pub seeds: u64,
    pub mean_plain_product: f64,
    pub mean_disseminated_mb: f64,
    pub mean_energy_std_j: f64,
    pub mean_head_slots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub sweep: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointSummary>,
    /// Smallest swept unit reward at which the head's own items get no airtime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub others_first_unit_reward: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub adaptive: Vec<SchemeSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub users: usize,
    pub rows: Vec<ResultRow>,
    pub adaptive_rows: Vec<AdaptiveRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    /// Writes `results.csv` or `adaptive.csv`, and `summary.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if self.adaptive_rows.is_empty() {
            let f = fs::File::create(dir.join("results.csv"))?;
            write_results(f, self.users, &self.rows)?;
        } else {
            let f = fs::File::create(dir.join("adaptive.csv"))?;
            write_adaptive(f, self.users, &self.adaptive_rows)?;
        }
        let json = serde_json::to_string_pretty(&self.summary)? + "\n";
        fs::write(dir.join("summary.json"), json)?;
        Ok(())
    }
}

/// Candidates and the selected head for one scenario.
pub fn solve_point(scenario: &Scenario, options: &SolverOptions) -> Result<(Vec<SubSolution>, Option<usize>)> {
    let subs = solve_all_heads(scenario, options)?;
    let head = match select_head(subs.clone()) {
        Ok(j) => Some(j.head),
        Err(nbs_airtime::Error::NoAgreement) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((subs, head))
}

fn own_airtime(scenario: &Scenario, c: &SubSolution) -> f64 {
    scenario.items_of(c.head).map(|m| c.allocation.get(m)).sum()
}

/// Runs every sweep point; results come back in sweep order.
pub fn run_experiment(loaded: &LoadedScenario, options: &SolverOptions) -> Result<ExperimentOutput> {
    let users = loaded.scenario.user_count();
    let Some(exp) = &loaded.experiment else {
        let (subs, head) = solve_point(&loaded.scenario, options)?;
        let rows = subs
            .iter()
            .map(|c| ResultRow::from_candidate(&loaded.scenario, "none", None, c, Some(c.head) == head))
            .collect();
        let points = vec![point_summary(&loaded.scenario, None, &subs, head)];
        return Ok(ExperimentOutput {
            users,
            rows,
            adaptive_rows: Vec::new(),
            summary: Summary { sweep: "none".into(), points, others_first_unit_reward: None, adaptive: Vec::new() },
        });
    };

    if exp.sweep == SweepVariable::SlotSize {
        let channel = match exp.snr {
            Some(snr) => ChannelModel::Rayleigh { snr },
            None => ChannelModel::Constant,
        };
        let seeds: Vec<u64> = (exp.first_seed..exp.first_seed + exp.seeds).collect();
        return run_slot_sweep(&loaded.scenario, &exp.values, &seeds, &channel, options);
    }

    let sweep = exp.sweep.as_str();
    let solved: Vec<(Scenario, Vec<SubSolution>, Option<usize>)> = exp
        .values
        .par_iter()
        .map(|&v| {
            let s = loaded.at(v)?;
            let (subs, head) = solve_point(&s, options)?;
            info!("{sweep} = {v}: head {:?}", head.map(|h| h + 1));
            Ok((s, subs, head))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (&v, (s, subs, head)) in exp.values.iter().zip(&solved) {
        rows.extend(subs.iter().map(|c| ResultRow::from_candidate(s, sweep, Some(v), c, Some(c.head) == *head)));
        points.push(point_summary(s, Some(v), subs, *head));
    }
    let others_first_unit_reward = (exp.sweep == SweepVariable::UnitReward).then(|| others_first(&points)).flatten();
    Ok(ExperimentOutput {
        users,
        rows,
        adaptive_rows: Vec::new(),
        summary: Summary { sweep: sweep.into(), points, others_first_unit_reward, adaptive: Vec::new() },
    })
}

fn point_summary(s: &Scenario, value: Option<f64>, subs: &[SubSolution], head: Option<usize>) -> PointSummary {
    let chosen = head.map(|h| &subs[h]);
    PointSummary {
        value,
        selected_head: head.map(|h| h + 1),
        plain_product: chosen.map(|c| c.products.plain),
        head_own_airtime_s: chosen.map(|c| own_airtime(s, c)),
    }
}

/// First value, in increasing order, from which the head's own airtime stays
/// at zero.
pub fn others_first(points: &[PointSummary]) -> Option<f64> {
    let mut sorted: Vec<&PointSummary> = points.iter().filter(|p| p.value.is_some()).collect();
    sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite sweep values"));
    let zero = |p: &PointSummary| p.head_own_airtime_s.is_some_and(|a| a <= ZERO_AIRTIME);
    let last_positive = sorted.iter().rposition(|p| !zero(p));
    let start = last_positive.map_or(0, |k| k + 1);
    sorted.get(start).and_then(|p| p.value)
}

/// Adaptive and non-adaptive timelines for every slot size and seed.
pub fn run_slot_sweep(
    scenario: &Scenario,
    slot_sizes: &[f64],
    seeds: &[u64],
    channel: &ChannelModel,
    options: &SolverOptions,
) -> Result<ExperimentOutput> {
    let users = scenario.user_count();
    let jobs: Vec<(f64, u64)> = slot_sizes.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let pairs: Vec<(AdaptiveRow, AdaptiveRow)> = jobs
        .par_iter()
        .map(|&(pi, seed)| {
            let a = run_adaptive(scenario, pi, channel, seed, options)?;
            let n = run_non_adaptive(scenario, pi, channel, seed, options)?;
            Ok((
                AdaptiveRow::new(pi, seed, "adaptive", users, &a),
                AdaptiveRow::new(pi, seed, "non_adaptive", users, &n),
            ))
        })
        .collect::<Result<_>>()?;
    let adaptive_rows: Vec<AdaptiveRow> = pairs.into_iter().flat_map(|(a, n)| [a, n]).collect();

    let mut adaptive = Vec::new();
    for &pi in slot_sizes {
        for scheme in ["adaptive", "non_adaptive"] {
            let rows: Vec<&AdaptiveRow> =
                adaptive_rows.iter().filter(|r| r.slot_size == pi && r.scheme == scheme).collect();
            let k = rows.len() as f64;
            let mean = |f: &dyn Fn(&AdaptiveRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
            adaptive.push(SchemeSummary {
                scheme,
                slot_size: pi,
                seeds: rows.len() as u64,
                mean_plain_product: mean(&|r| r.plain_product),
                mean_disseminated_mb: mean(&|r| r.disseminated),
                mean_energy_std_j: mean(&|r| r.energy_spread),
                mean_head_slots: (0..users).map(|u| mean(&|r| r.head_counts[u] as f64)).collect(),
            });
        }
    }
    Ok(ExperimentOutput {
        users,
        rows: Vec::new(),
        adaptive_rows,
        summary: Summary {
            sweep: SweepVariable::SlotSize.as_str().into(),
            points: Vec::new(),
            others_first_unit_reward: None,
            adaptive,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(214.39943), "214.399");
        assert_eq!(sig6(55.384615), "55.3846");
        assert_eq!(sig6(12.0), "12");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(0.0013), "0.0013");
        assert_eq!(sig6(1.234567e-7), "1.23457e-7");
        assert_eq!(sig6(-3.14159265e9), "-3.14159e9");
        assert_eq!(sig6(123456.7), "123457");
    }

    #[test]
    fn others_first_needs_zero_from_there_on() {
        let p = |v: f64, a: f64| PointSummary {
            value: Some(v),
            selected_head: Some(1),
            plain_product: None,
            head_own_airtime_s: Some(a),
        };
        assert_eq!(others_first(&[p(0.0, 5.0), p(0.01, 0.0), p(0.012, 1.0), p(0.014, 0.0), p(0.02, 0.0)]), Some(0.014));
        assert_eq!(others_first(&[p(0.0, 5.0), p(0.02, 1.0)]), None);
        assert_eq!(others_first(&[]), None);
    }

    #[test]
    fn header_width_matches_rows() {
        let s = nbs_airtime::presets::table2([0.0, 1.0, 1.0, 1.0]);
        let (subs, head) = solve_point(&s, &SolverOptions::default()).unwrap();
        assert_eq!(head, Some(0));
        let rows: Vec<ResultRow> =
            subs.iter().map(|c| ResultRow::from_candidate(&s, "none", None, c, Some(c.head) == head)).collect();
        let mut buf = Vec::new();
        write_results(&mut buf, 4, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
        assert_eq!(widths, vec![result_header(4).len(); 5]);
        assert!(text.lines().nth(1).unwrap().starts_with("none,,1,optimal,1,3.91"));
    }
}
