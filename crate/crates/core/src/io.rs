//! Plain-text result files: the metrics table and the population dump.

use std::fmt::Write as _;

use crate::error::{QdError, Result};
use crate::metrics::MetricsRecord;
use crate::population::Population;

pub const METRICS_HEADER: &str = "generation,evaluations,qd_score,coverage,max_fitness";

/// Metrics table: header line plus one comma-separated row per record.
/// Floats use the shortest representation that round-trips exactly.
pub fn format_metrics(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{},{},{}", r.generation, r.evaluations, r.qd_score, r.coverage, r.max_fitness);
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == METRICS_HEADER => {}
        Some((n, _)) => return Err(QdError::Parse { line: n + 1, message: format!("expected header '{METRICS_HEADER}'") }),
        None => return Err(QdError::Parse { line: 1, message: "empty metrics file".into() }),
    }
    let mut records: Vec<MetricsRecord> = Vec::new();
    for (n, line) in lines {
        let err = |message: String| QdError::Parse { line: n + 1, message };
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", fields.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("invalid integer '{s}'")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| err(format!("invalid number '{s}'")));
        let record = MetricsRecord {
            generation: int(fields[0])?,
            evaluations: int(fields[1])?,
            qd_score: float(fields[2])?,
            coverage: float(fields[3])?,
            max_fitness: float(fields[4])?,
        };
        if !(record.qd_score >= 0.0 && record.qd_score.is_finite()) {
            return Err(err(format!("QD score {} is not a finite non-negative number", record.qd_score)));
        }
        if !(0.0..=1.0).contains(&record.coverage) {
            return Err(err(format!("coverage {} outside [0, 1]", record.coverage)));
        }
        if records.last().is_some_and(|prev| prev.evaluations > record.evaluations) {
            return Err(err("evaluation counts must be non-decreasing".into()));
        }
        records.push(record);
    }
    Ok(records)
}

/// One row per individual: genome genes, fitness, descriptor coordinates.
pub fn format_population(pop: &Population) -> String {
    let genes = pop.genomes().cols();
    let dims = pop.descriptors().cols();
    let mut header: Vec<String> = (0..genes).map(|i| format!("g{i}")).collect();
    header.push("fitness".into());
    header.extend((0..dims).map(|i| format!("d{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..pop.len() {
        let row: Vec<String> = pop
            .genomes()
            .row(i)
            .iter()
            .chain(std::iter::once(&pop.fitness()[i]))
            .chain(pop.descriptors().row(i))
            .map(f64::to_string)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    #[test]
    fn metrics_parse_errors() {
        assert!(parse_metrics("").is_err());
        assert!(parse_metrics("gen,evals\n").is_err());
        let bad = format!("{METRICS_HEADER}\n0,10,1.5,0.5\n");
        assert!(matches!(parse_metrics(&bad), Err(QdError::Parse { line: 2, .. })));
        let bad = format!("{METRICS_HEADER}\n0,10,1.5,1.5,0\n");
        assert!(parse_metrics(&bad).is_err());
        let bad = format!("{METRICS_HEADER}\n0,10,1,0.5,0\n1,5,1,0.5,0\n");
        assert!(parse_metrics(&bad).is_err());
        for qd in ["-1", "NaN", "inf"] {
            assert!(parse_metrics(&format!("{METRICS_HEADER}\n0,10,{qd},0.5,0\n")).is_err(), "{qd}");
        }
        // An undefined maximum (empty population) is written as NaN and read back.
        let text = format!("{METRICS_HEADER}\n0,0,0,0,NaN\n");
        assert!(parse_metrics(&text).unwrap()[0].max_fitness.is_nan());
    }

    #[test]
    fn population_dump_layout() {
        let pop = Population::new(
            Matrix::from_rows(&[[0.25, 0.5]]).unwrap(),
            vec![-1.5],
            Matrix::from_rows(&[[3.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(format_population(&pop), "g0,g1,fitness,d0\n0.25,0.5,-1.5,3\n");
    }

    proptest! {
        #[test]
        fn metrics_round_trip(rows in proptest::collection::vec((0usize..1000, 0usize..10, 0.0f64..1e6, 0.0f64..=1.0, -1e3f64..1e3), 0..20)) {
            let mut evals = 0;
            let records: Vec<MetricsRecord> = rows
                .into_iter()
                .map(|(g, de, q, c, m)| {
                    evals += de;
                    MetricsRecord { generation: g, evaluations: evals, qd_score: q, coverage: c, max_fitness: m }
                })
                .collect();
            prop_assert_eq!(parse_metrics(&format_metrics(&records)).unwrap(), records);
        }
    }
}
