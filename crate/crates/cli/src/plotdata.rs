//! Long-format `series,x,y` tables drawn from `results.csv`.
//!
//! A kind reads `<quantity>_vs_<sweep>`, e.g. `airtime_vs_budget` or
//! `utility_vs_reward`. Only rows of the selected head are used.

use std::io::Read;

use crate::error::PlotError;
use crate::experiment::{sig6, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Airtime,
    Utility,
    Energy,
    Product,
    Head,
    Disseminated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotKind {
    pub quantity: Quantity,
    /// Canonical sweep name, as written in `results.csv`.
    pub sweep: &'static str,
}

const SWEEP_NAMES: [(&str, &str); 10] = [
    ("budget", "budget"),
    ("unit_reward", "unit_reward"),
    ("reward", "unit_reward"),
    ("bargaining_power", "bargaining_power"),
    ("power", "bargaining_power"),
    ("data_load", "data_load"),
    ("load", "data_load"),
    ("preference_case", "preference_case"),
    ("case", "preference_case"),
    ("none", "none"),
];

impl std::str::FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        let unknown = || PlotError::UnknownKind(s.to_string());
        let (q, sweep) = s.split_once("_vs_").ok_or_else(unknown)?;
        let quantity = match q {
            "airtime" => Quantity::Airtime,
            "utility" => Quantity::Utility,
            "energy" => Quantity::Energy,
            "product" => Quantity::Product,
            "head" => Quantity::Head,
            "disseminated" => Quantity::Disseminated,
            _ => return Err(unknown()),
        };
        let sweep = SWEEP_NAMES.iter().find(|(alias, _)| *alias == sweep).map(|(_, name)| *name).ok_or_else(unknown)?;
        Ok(PlotKind { quantity, sweep })
    }
}

/// Reads rows written by [`crate::experiment::write_results`].
pub fn load_results<R: Read>(input: R) -> Result<Vec<ResultRow>, PlotError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| PlotError::Malformed(e.to_string()))?.clone();
    let users = header.iter().filter(|h| h.starts_with("utility_")).count();
    if header.len() != 8 + 3 * users {
        return Err(PlotError::Malformed(format!("unexpected header with {} columns", header.len())));
    }
    let num = |field: &str| -> Result<f64, PlotError> {
        field.parse().map_err(|_| PlotError::Malformed(format!("`{field}` is not a number")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| PlotError::Malformed(e.to_string()))?;
        let vals: Vec<f64> = rec.iter().skip(5).map(num).collect::<Result<_, _>>()?;
        let head: usize = rec[2].parse().map_err(|_| PlotError::Malformed(format!("bad head `{}`", &rec[2])))?;
        if head == 0 {
            return Err(PlotError::Malformed("candidate_head is 1-based".into()));
        }
        rows.push(ResultRow {
            sweep: rec[0].to_string(),
            sweep_value: if rec[1].is_empty() { None } else { Some(num(&rec[1])?) },
            candidate_head: head - 1,
            status: rec[3].to_string(),
            selected: &rec[4] == "1",
            utilities: vals[..users].to_vec(),
            airtime: vals[users..2 * users].to_vec(),
            energy: vals[2 * users..3 * users].to_vec(),
            disseminated: vals[3 * users],
            plain_product: vals[3 * users + 1],
            weighted_product: vals[3 * users + 2],
        });
    }
    Ok(rows)
}

pub fn emit_plotdata(rows: &[ResultRow], kind: &str) -> Result<String, PlotError> {
    let name = kind;
    let kind: PlotKind = name.parse()?;
    let mut out = String::from("series,x,y\n");
    if let Some(found) = rows.iter().map(|r| r.sweep.as_str()).find(|s| *s != kind.sweep) {
        return Err(PlotError::SweepMismatch { kind: name.into(), expected: kind.sweep.into(), found: found.into() });
    }
    let selected: Vec<&ResultRow> = rows.iter().filter(|r| r.selected).collect();
    let users = rows.first().map_or(0, |r| r.utilities.len());
    let series: Series = match kind.quantity {
        Quantity::Airtime => per_user(users, "user", |r, k| r.airtime[k]),
        Quantity::Utility => per_user(users, "user", |r, k| r.utilities[k]),
        Quantity::Energy => per_user(users, "user", |r, k| r.energy[k]),
        Quantity::Product => vec![
            ("plain".into(), Box::new(|r: &ResultRow| r.plain_product)),
            ("weighted".into(), Box::new(|r: &ResultRow| r.weighted_product)),
        ],
        Quantity::Head => vec![("head".into(), Box::new(|r: &ResultRow| (r.candidate_head + 1) as f64))],
        Quantity::Disseminated => vec![("total".into(), Box::new(|r: &ResultRow| r.disseminated))],
    };
    for (name, f) in &series {
        for r in &selected {
            let x = r.sweep_value.map(sig6).unwrap_or_default();
            out.push_str(&format!("{name},{x},{}\n", sig6(f(r))));
        }
    }
    Ok(out)
}

type Series = Vec<(String, Box<dyn Fn(&ResultRow) -> f64>)>;

fn per_user(users: usize, prefix: &str, f: fn(&ResultRow, usize) -> f64) -> Series {
    (0..users)
        .map(|k| {
            (format!("{prefix}{}", k + 1), Box::new(move |r: &ResultRow| f(r, k)) as Box<dyn Fn(&ResultRow) -> f64>)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, head: usize, selected: bool) -> ResultRow {
        ResultRow {
            sweep: "budget".into(),
            sweep_value: Some(value),
            candidate_head: head,
            status: "optimal".into(),
            selected,
            utilities: vec![1.0, 2.0],
            airtime: vec![3.0, 4.0],
            energy: vec![5.0, 6.0],
            disseminated: 7.0,
            plain_product: 2.0,
            weighted_product: 1.5,
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            "utility_vs_reward".parse::<PlotKind>().unwrap(),
            PlotKind { quantity: Quantity::Utility, sweep: "unit_reward" }
        );
        assert!("airtime_vs_budget".parse::<PlotKind>().is_ok());
        assert!(matches!("speed_vs_budget".parse::<PlotKind>(), Err(PlotError::UnknownKind(_))));
        assert!(matches!("airtime_vs_weather".parse::<PlotKind>(), Err(PlotError::UnknownKind(_))));
        assert!(matches!("airtime".parse::<PlotKind>(), Err(PlotError::UnknownKind(_))));
    }

    #[test]
    fn empty_results_give_header_only() {
        assert_eq!(emit_plotdata(&[], "airtime_vs_budget").unwrap(), "series,x,y\n");
    }

    #[test]
    fn airtime_series_per_user_from_selected_rows() {
        let rows = [row(50.0, 0, false), row(50.0, 1, true), row(100.0, 0, true), row(100.0, 1, false)];
        let text = emit_plotdata(&rows, "airtime_vs_budget").unwrap();
        assert_eq!(text, "series,x,y\nuser1,50,3\nuser1,100,3\nuser2,50,4\nuser2,100,4\n");
        let heads = emit_plotdata(&rows, "head_vs_budget").unwrap();
        assert_eq!(heads, "series,x,y\nhead,50,2\nhead,100,1\n");
    }

    #[test]
    fn sweep_must_match() {
        assert!(matches!(
            emit_plotdata(&[row(1.0, 0, true)], "utility_vs_reward"),
            Err(PlotError::SweepMismatch { .. })
        ));
    }
}
