//! Text formats: group-distribution CSV, CCDF and profile CSVs, rate tables
//! and epidemic traces.
//!
//! A distribution file looks like
//!
//! ```text
//! # l=16 N=448894
//! group_index,count
//! 2561,118
//! ...
//! ```
//!
//! Zero-count groups may be omitted.

use std::io::{BufRead, Write};

use crate::addrspace::{CcdfPoint, GroupDistribution, PrefixLevel};
use crate::epidemic::EpidemicTrace;
use crate::rates::RateReport;
use crate::{Error, Result};

fn parse_err(line: usize, text: &str, message: &str) -> Error {
    Error::Parse {
        line,
        text: text.to_string(),
        message: message.to_string(),
    }
}

/// Parses the `# l=<l> N=<N>` header line.
fn parse_meta(line: &str) -> Option<(u8, u64)> {
    let body = line.trim().strip_prefix('#')?;
    let (mut l, mut n) = (None, None);
    for tok in body.split_whitespace() {
        match tok.split_once('=') {
            Some(("l", v)) => l = v.parse().ok(),
            Some(("N", v)) => n = v.parse().ok(),
            _ => {}
        }
    }
    Some((l?, n?))
}

/// True when `first_line` looks like a distribution header.
pub fn is_distribution_header(first_line: &str) -> bool {
    parse_meta(first_line).is_some()
}

pub fn read_distribution<R: BufRead>(mut reader: R) -> Result<GroupDistribution> {
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (l, n) = parse_meta(&first)
        .ok_or_else(|| parse_err(1, first.trim_end(), "expected `# l=<l> N=<N>` header"))?;
    let level =
        PrefixLevel::new(l).map_err(|_| parse_err(1, first.trim_end(), "prefix level above 32"))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["group_index", "count"] {
        return Err(parse_err(
            2,
            &headers.iter().collect::<Vec<_>>().join(","),
            "expected `group_index,count`",
        ));
    }
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize + 1).unwrap_or(0);
        let text = rec.iter().collect::<Vec<_>>().join(",");
        if rec.len() != 2 {
            return Err(parse_err(line, &text, "expected two columns"));
        }
        let g: u32 = rec[0]
            .parse()
            .map_err(|_| parse_err(line, &text, "bad group index"))?;
        let c: u64 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, &text, "bad count"))?;
        if g as u64 >= level.group_count() {
            return Err(parse_err(
                line,
                &text,
                "group index out of range for the level",
            ));
        }
        pairs.push((g, c));
    }
    let dist = GroupDistribution::from_pairs(level, pairs)?;
    if dist.total() != n {
        return Err(parse_err(
            1,
            first.trim_end(),
            &format!("header says N={n} but counts sum to {}", dist.total()),
        ));
    }
    Ok(dist)
}

pub fn write_distribution<W: Write>(mut w: W, dist: &GroupDistribution) -> Result<()> {
    writeln!(w, "# l={} N={}", dist.level().get(), dist.total())?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["group_index", "count"])?;
    for (g, c) in dist.nonzero() {
        wtr.write_record([g.to_string(), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_ccdf<W: Write>(w: W, points: &[CcdfPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["threshold", "fraction"])?;
    for p in points {
        wtr.write_record([p.threshold.to_string(), p.fraction.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `l,<metric>` rows.
pub fn write_profile<W: Write>(w: W, metric: &str, rows: &[(u8, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["l", metric])?;
    for (l, v) in rows {
        wtr.write_record([l.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Protection requirement curve, `d,p_max`.
pub fn write_requirement_curve<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["d", "p_max"])?;
    for (d, p) in rows {
        wtr.write_record([d.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rate table with an `alpha_per_<unit>` column. MSS reports become two
/// rows, `...;stage=1` and `...;stage=2`.
pub fn write_rate_table<W: Write>(w: W, reports: &[RateReport], unit: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let alpha_col = format!("alpha_per_{unit}");
    wtr.write_record([
        "strategy",
        "uncertainty_bits",
        "info_bits",
        alpha_col.as_str(),
    ])?;
    for r in reports {
        let row = |name: String, unc: f64, bits: f64, alpha: f64| {
            [
                name,
                format!("{unc:.4}"),
                format!("{bits:.4}"),
                format!("{alpha:.6}"),
            ]
        };
        match r.mss {
            Some(stages) => {
                wtr.write_record(row(
                    format!("{};stage=1", r.strategy),
                    r.l as f64,
                    0.0,
                    stages.mss_1,
                ))?;
                wtr.write_record(row(
                    format!("{};stage=2", r.strategy),
                    r.uncertainty,
                    r.info_bits,
                    stages.mss_2,
                ))?;
            }
            None => {
                wtr.write_record(row(r.strategy.clone(), r.uncertainty, r.info_bits, r.alpha))?
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `t,n_t`, plus one `g<index>` column per occupied subnet when the trace
/// recorded them.
pub fn write_trace<W: Write>(w: W, trace: &EpidemicTrace) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "n_t".to_string()];
    if trace.subnets.is_some() {
        header.extend(trace.groups.iter().map(|g| format!("g{g}")));
    }
    wtr.write_record(&header)?;
    for (t, n) in trace.infected.iter().enumerate() {
        let mut row = vec![(t as f64 * trace.tick).to_string(), n.to_string()];
        if let Some(rec) = &trace.subnets {
            row.extend(rec[t].iter().map(|x| x.to_string()));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
