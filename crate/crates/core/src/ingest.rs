//! Delimiter-separated transaction files.
//!
//! The header row must carry exactly these columns, in any order:
//!
//! ```text
//! PrCode,PAN,TermId,MerchantID,PosCondition,AffectiveAmount,TrxDate,TrxTime,Settled,TxnGroup
//! ```
//!
//! `TrxDate` is the ISO-8601 business timestamp (`2014-03-05T14:37:22`); a bare
//! date is accepted and combined with `TrxTime`. When both carry an hour they
//! must agree. The delimiter is detected from the header (`,` `;` tab `|`).
//! Malformed rows are reported with their line number and skipped.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use thiserror::Error;

use crate::txmodel::{RawTransaction, TxnGroup};

pub const COLUMNS: [&str; 10] = [
    "PrCode",
    "PAN",
    "TermId",
    "MerchantID",
    "PosCondition",
    "AffectiveAmount",
    "TrxDate",
    "TrxTime",
    "Settled",
    "TxnGroup",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    Header(String),
}

/// A row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedFile {
    pub rows: Vec<(u64, RawTransaction)>,
    pub errors: Vec<RowError>,
}

fn sniff_delimiter(header_line: &str) -> u8 {
    b",;\t|".iter().copied().max_by_key(|d| header_line.bytes().filter(|b| b == d).count()).unwrap_or(b',')
}

pub fn read_transactions<R: Read>(mut reader: R) -> Result<ParsedFile, IngestError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header_line = text.lines().next().ok_or_else(|| IngestError::Header("file is empty".into()))?;
    let delimiter = sniff_delimiter(header_line);

    let mut csv =
        csv::ReaderBuilder::new().delimiter(delimiter).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = csv.headers()?.clone();
    let mut index = [0usize; COLUMNS.len()];
    if headers.len() != COLUMNS.len() {
        return Err(IngestError::Header(format!("expected {} columns, found {}", COLUMNS.len(), headers.len())));
    }
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Header(format!("missing column `{name}`")))?;
    }

    let mut out = ParsedFile::default();
    for record in csv.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != COLUMNS.len() {
            out.errors
                .push(RowError { line, message: format!("expected {} fields, found {}", COLUMNS.len(), record.len()) });
            continue;
        }
        let field = |i: usize| record.get(index[i]).unwrap_or("");
        match parse_row(field) {
            Ok(raw) => out.rows.push((line, raw)),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn parse_row<'a>(field: impl Fn(usize) -> &'a str) -> Result<RawTransaction, String> {
    let int = |i: usize| -> Result<i64, String> {
        field(i).parse().map_err(|_| format!("{}: `{}` is not an integer", COLUMNS[i], field(i)))
    };
    let pr_code = int(0)?;
    let pan = field(1).to_owned();
    let term_id = field(2).to_owned();
    let merchant_id = field(3).to_owned();
    let pos_condition = int(4)?;
    let affective_amount: f64 =
        field(5).parse().map_err(|_| format!("AffectiveAmount: `{}` is not a decimal", field(5)))?;
    let hour: u32 = field(7)
        .parse()
        .ok()
        .filter(|h| *h < 24)
        .ok_or_else(|| format!("TrxTime: `{}` is not an hour in 0..=23", field(7)))?;
    let business_date = parse_business_date(field(6), hour)?;
    let settled = parse_bool(field(8)).ok_or_else(|| format!("Settled: `{}` is not a boolean", field(8)))?;
    let txn_group: TxnGroup = field(9).parse().map_err(|e: crate::Error| e.to_string())?;

    let raw = RawTransaction {
        pr_code,
        pan,
        term_id,
        merchant_id,
        pos_condition,
        affective_amount,
        business_date,
        settled,
        txn_group,
        extra: BTreeMap::new(),
    };
    raw.validate().map_err(|e| e.to_string())?;
    Ok(raw)
}

fn parse_business_date(s: &str, hour: u32) -> Result<NaiveDateTime, String> {
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(s, fmt) {
            if ts.hour() != hour {
                return Err(format!("TrxDate hour {} disagrees with TrxTime {hour}", ts.hour()));
            }
            return Ok(ts);
        }
    }
    if let Ok(ts) = chrono::DateTime::parse_from_rfc3339(s) {
        let ts = ts.naive_local();
        if ts.hour() != hour {
            return Err(format!("TrxDate hour {} disagrees with TrxTime {hour}", ts.hour()));
        }
        return Ok(ts);
    }
    let date =
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("TrxDate: `{s}` is not an ISO-8601 date"))?;
    Ok(date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("hour checked")))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Writes transactions in the ingestion format with a comma delimiter.
pub fn write_transactions<'a, W: Write>(
    writer: W,
    rows: impl IntoIterator<Item = &'a RawTransaction>,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.pr_code.to_string(),
            r.pan.clone(),
            r.term_id.clone(),
            r.merchant_id.clone(),
            r.pos_condition.to_string(),
            r.affective_amount.to_string(),
            r.business_date.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.business_date.hour().to_string(),
            r.settled.to_string(),
            r.txn_group.as_str().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
