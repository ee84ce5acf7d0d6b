//! CSV schemas: replica results, event streams and susceptibility curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use liqlab_core::analysis::flux::{parse_side, side_code};
use liqlab_core::analysis::{FlowType, HawkesIntensity, StreamEvent};
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError};

pub fn csv_writer() -> csv::WriterBuilder {
    let mut b = csv::WriterBuilder::new();
    b.terminator(csv::Terminator::Any(b'\n'));
    b
}

/// Write a CSV file from a header and string rows.
pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    header: &[&str],
    rows: &[Vec<S>],
) -> Result<(), CliError> {
    let bytes = csv_bytes(header, rows)?;
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer().from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Shortest round-trip decimal form; `NaN` and infinities spelled out.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A CSV table read with its header and the file line of every record.
pub struct Table {
    pub origin: String,
    pub header: Vec<String>,
    pub rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text, &origin)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let err = |line: Option<u64>, message: String| CliError::Input {
            origin: origin.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| err(Some(1), e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(err(Some(1), "missing CSV header".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| err(e.position().map(|p| p.line()), e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Table {
            origin: origin.to_string(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, CliError> {
        self.column(name).ok_or_else(|| CliError::Input {
            origin: self.origin.clone(),
            line: Some(1),
            message: format!(
                "missing required column `{name}` (header: {})",
                self.header.join(",")
            ),
        })
    }

    pub fn error(&self, line: u64, message: impl Into<String>) -> CliError {
        CliError::Input {
            origin: self.origin.clone(),
            line: Some(line),
            message: message.into(),
        }
    }

    fn field<'a>(
        &self,
        line: u64,
        record: &'a csv::StringRecord,
        col: usize,
    ) -> Result<&'a str, CliError> {
        record
            .get(col)
            .map(str::trim)
            .ok_or_else(|| self.error(line, format!("missing field `{}`", self.header[col])))
    }

    pub fn f64_at(
        &self,
        line: u64,
        record: &csv::StringRecord,
        col: usize,
    ) -> Result<f64, CliError> {
        let s = self.field(line, record, col)?;
        s.parse::<f64>().map_err(|_| {
            self.error(
                line,
                format!("`{}` = {s:?} is not a number", self.header[col]),
            )
        })
    }

    pub fn opt_f64_at(
        &self,
        line: u64,
        record: &csv::StringRecord,
        col: usize,
    ) -> Result<Option<f64>, CliError> {
        let s = self.field(line, record, col)?;
        if s.is_empty() {
            Ok(None)
        } else {
            self.f64_at(line, record, col).map(Some)
        }
    }

    pub fn str_at<'a>(
        &self,
        line: u64,
        record: &'a csv::StringRecord,
        col: usize,
    ) -> Result<&'a str, CliError> {
        self.field(line, record, col)
    }
}

pub const EVENT_HEADER: [&str; 6] = [
    "time",
    "type",
    "side",
    "price_ticks",
    "mid_change_ticks",
    "queue_after",
];

/// Parsed event stream with the optional precomputed Hawkes columns.
pub struct EventStream {
    pub events: Vec<StreamEvent>,
    pub hawkes: Option<HawkesIntensity>,
}

pub fn read_events(path: &Path) -> Result<EventStream, CliError> {
    let table = Table::read(path)?;
    parse_events(&table)
}

pub fn parse_events(table: &Table) -> Result<EventStream, CliError> {
    let time = table.require("time")?;
    let kind = table.require("type")?;
    let side = table.require("side")?;
    let price = table.require("price_ticks")?;
    let mid = table.require("mid_change_ticks")?;
    let queue = table.column("queue_after");
    let h_total = table.column("hawkes_total");
    let h_signed = table.column("hawkes_signed");
    if h_total.is_some() != h_signed.is_some() {
        return Err(table.error(1, "hawkes_total and hawkes_signed must appear together"));
    }
    if table.rows.is_empty() {
        return Err(table.error(2, "event stream has no events"));
    }
    let mut events = Vec::with_capacity(table.rows.len());
    let mut hawkes = h_total.map(|_| HawkesIntensity {
        total: Vec::with_capacity(table.rows.len()),
        signed: Vec::with_capacity(table.rows.len()),
    });
    let mut last = f64::NEG_INFINITY;
    for (line, r) in &table.rows {
        let line = *line;
        let t = table.f64_at(line, r, time)?;
        if !t.is_finite() {
            return Err(table.error(line, format!("time {t} is not finite")));
        }
        if t < last {
            return Err(table.error(
                line,
                format!("time {t} precedes the previous event at {last}"),
            ));
        }
        last = t;
        let flow: FlowType =
            table
                .str_at(line, r, kind)?
                .parse()
                .map_err(|e: liqlab_core::Error| {
                    table.error(line, format!("{e} (expected LO, C or MO)"))
                })?;
        let s = parse_side(table.str_at(line, r, side)?)
            .map_err(|e| table.error(line, format!("{e} (expected B or A)")))?;
        let p = table.str_at(line, r, price)?;
        let price_ticks: i64 = p
            .parse()
            .map_err(|_| table.error(line, format!("price_ticks {p:?} is not an integer")))?;
        let mid_change = table.f64_at(line, r, mid)?;
        if !mid_change.is_finite() {
            return Err(table.error(line, "mid_change_ticks is not finite"));
        }
        let queue_after = match queue {
            Some(q) => {
                let v = table.str_at(line, r, q)?;
                if v.is_empty() {
                    None
                } else {
                    Some(v.parse::<u64>().map_err(|_| {
                        table.error(
                            line,
                            format!("queue_after {v:?} is not a non-negative integer"),
                        )
                    })?)
                }
            }
            None => None,
        };
        if let (Some(h), Some(ct), Some(cs)) = (hawkes.as_mut(), h_total, h_signed) {
            h.total.push(table.f64_at(line, r, ct)?);
            h.signed.push(table.f64_at(line, r, cs)?);
        }
        events.push(StreamEvent {
            time: t,
            flow,
            side: s,
            price_ticks,
            mid_change,
            queue_after,
        });
    }
    Ok(EventStream { events, hawkes })
}

pub fn event_rows(events: &[StreamEvent]) -> Vec<Vec<String>> {
    events
        .iter()
        .map(|e| {
            vec![
                fmt_f64(e.time),
                e.flow.code().to_string(),
                side_code(e.side).to_string(),
                e.price_ticks.to_string(),
                fmt_f64(e.mid_change),
                e.queue_after.map(|q| q.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

/// Parse a list such as `0.1,0.2` or a range `lo:hi:count` (inclusive, linear).
pub fn parse_list(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "cannot parse list {spec:?} (use a,b,c or lo:hi:count)"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n < 2 {
            return Ok(vec![lo]);
        }
        return Ok((0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Group values by a key while keeping a deterministic order.
pub fn group_by<K: Ord, V>(items: impl IntoIterator<Item = (K, V)>) -> BTreeMap<K, Vec<V>> {
    let mut map: BTreeMap<K, Vec<V>> = BTreeMap::new();
    for (k, v) in items {
        map.entry(k).or_default().push(v);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip() {
        let rows = vec![
            vec!["0.5", "LO", "B", "10", "0", "3"],
            vec!["1.25", "MO", "A", "11", "0.5", ""],
        ];
        let bytes = csv_bytes(&EVENT_HEADER, &rows).unwrap();
        let table = Table::parse(std::str::from_utf8(&bytes).unwrap(), "e.csv").unwrap();
        let s = parse_events(&table).unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events[1].mid_change, 0.5);
        assert_eq!(s.events[0].queue_after, Some(3));
        let again = csv_bytes(&EVENT_HEADER, &event_rows(&s.events)).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn schema_errors_name_the_line() {
        let text = "time,type,side,price_ticks,mid_change_ticks\n0,LO,B,1,0\n1,XX,B,1,0\n";
        let t = Table::parse(text, "e.csv").unwrap();
        let err = parse_events(&t).err().unwrap().to_string();
        assert!(err.starts_with("e.csv:3:"), "{err}");
        let text = "time,type,side,price_ticks,mid_change_ticks\n2,LO,B,1,0\n1,LO,B,1,0\n";
        let err = parse_events(&Table::parse(text, "e.csv").unwrap())
            .err()
            .unwrap()
            .to_string();
        assert!(
            err.starts_with("e.csv:3:") && err.contains("precedes"),
            "{err}"
        );
        let err = parse_events(&Table::parse("time,type\n", "e.csv").unwrap())
            .err()
            .unwrap()
            .to_string();
        assert!(err.contains("missing required column"), "{err}");
        let empty = "time,type,side,price_ticks,mid_change_ticks\n";
        let err = parse_events(&Table::parse(empty, "e.csv").unwrap())
            .err()
            .unwrap()
            .to_string();
        assert!(err.contains("no events"), "{err}");
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_list("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_list("a").is_err());
    }
}
