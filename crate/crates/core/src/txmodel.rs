//! Transaction records, eligibility filtering and numeric feature encoding.
//!
//! A raw bank record is reduced to the eight modeling fields plus an id,
//! with the business timestamp split into a calendar date and an hour.
//! Windows of transactions are encoded into fixed-dimension feature vectors:
//! categorical identifiers get first-occurrence integer codes and dates become
//! day offsets from the earliest date in the window.

use std::collections::{BTreeMap, HashMap};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TxId = u64;

/// Transaction group as reported by the switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxnGroup {
    Retail,
    BillPayment,
    TopUp,
    Other,
}

impl TxnGroup {
    /// Purchasing-type groups that are eligible for behavioral modeling.
    pub fn is_purchasing(self) -> bool {
        matches!(self, TxnGroup::Retail | TxnGroup::BillPayment | TxnGroup::TopUp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TxnGroup::Retail => "retail",
            TxnGroup::BillPayment => "bill_payment",
            TxnGroup::TopUp => "top_up",
            TxnGroup::Other => "other",
        }
    }
}

impl std::str::FromStr for TxnGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "retail" => Ok(TxnGroup::Retail),
            "bill_payment" | "billpayment" | "bill" => Ok(TxnGroup::BillPayment),
            "top_up" | "topup" => Ok(TxnGroup::TopUp),
            "other" => Ok(TxnGroup::Other),
            other => Err(Error::InvalidTransaction(format!("unknown transaction group `{other}`"))),
        }
    }
}

/// A transaction as received, before preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTransaction {
    pub pr_code: i64,
    pub pan: String,
    pub term_id: String,
    pub merchant_id: String,
    pub pos_condition: i64,
    pub affective_amount: f64,
    pub business_date: NaiveDateTime,
    pub settled: bool,
    pub txn_group: TxnGroup,
    /// Source fields the model does not consume, carried through untouched.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl RawTransaction {
    pub fn validate(&self) -> Result<()> {
        if self.pan.trim().is_empty() {
            return Err(Error::InvalidTransaction("pan is empty".into()));
        }
        if !self.affective_amount.is_finite() || self.affective_amount < 0.0 {
            return Err(Error::InvalidTransaction(format!(
                "affective amount must be a non-negative number, got {}",
                self.affective_amount
            )));
        }
        Ok(())
    }
}

/// The preprocessed modeling record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub pr_code: i64,
    pub pan: String,
    pub term_id: String,
    pub merchant_id: String,
    pub pos_condition: i64,
    pub affective_amount: f64,
    pub trx_date: NaiveDate,
    /// Hour of day, 0..=23.
    pub trx_time: u8,
}

impl Transaction {
    /// Start of the hour the transaction falls in.
    pub fn timestamp(&self) -> NaiveDateTime {
        self.trx_date.and_time(NaiveTime::from_hms_opt(u32::from(self.trx_time), 0, 0).expect("hour in 0..=23"))
    }
}

/// True iff the transaction is settled and belongs to a purchasing group.
pub fn filter_eligible(raw: &RawTransaction) -> bool {
    raw.settled && raw.txn_group.is_purchasing()
}

/// Reduces an eligible raw record to a [`Transaction`] with the given id.
pub fn preprocess(raw: &RawTransaction, next_id: TxId) -> Result<Transaction> {
    raw.validate()?;
    if !raw.settled {
        return Err(Error::Ineligible("transaction is not settled".into()));
    }
    if !raw.txn_group.is_purchasing() {
        return Err(Error::Ineligible(format!(
            "transaction group `{}` is not a purchasing group",
            raw.txn_group.as_str()
        )));
    }
    Ok(Transaction {
        id: next_id,
        pr_code: raw.pr_code,
        pan: raw.pan.clone(),
        term_id: raw.term_id.clone(),
        merchant_id: raw.merchant_id.clone(),
        pos_condition: raw.pos_condition,
        affective_amount: raw.affective_amount,
        trx_date: raw.business_date.date(),
        trx_time: raw.business_date.hour() as u8,
    })
}

/// Which projection of a transaction to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// amount, merchant code, pos condition, process code, day offset, hour
    SixDim,
    /// amount, day offset, hour
    ThreeDim,
}

impl FeatureSet {
    pub fn dim(self) -> usize {
        match self {
            FeatureSet::SixDim => 6,
            FeatureSet::ThreeDim => 3,
        }
    }

    pub fn column_names(self) -> &'static [&'static str] {
        match self {
            FeatureSet::SixDim => &["AffectiveAmount", "MerchantID", "PosCondition", "PrCode", "TrxDate", "TrxTime"],
            FeatureSet::ThreeDim => &["AffectiveAmount", "TrxDate", "TrxTime"],
        }
    }
}

/// Optional per-column rescaling applied after encoding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Raw units; distance thresholds such as DBSCAN's epsilon are in currency.
    #[default]
    None,
    /// Per-column z-score over the window. Constant columns map to 0.
    ZScore,
}

/// First-occurrence integer codes for one categorical field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoricalCodes {
    values: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl CategoricalCodes {
    fn code_or_insert(&mut self, value: &str) -> u32 {
        if let Some(&code) = self.index.get(value) {
            return code;
        }
        let code = self.values.len() as u32;
        self.values.push(value.to_owned());
        self.index.insert(value.to_owned(), code);
        code
    }

    pub fn code(&self, value: &str) -> Option<u32> {
        self.values.iter().position(|v| v == value).map(|i| i as u32)
    }

    pub fn value(&self, code: u32) -> Option<&str> {
        self.values.get(code as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub term_id: CategoricalCodes,
    pub merchant_id: CategoricalCodes,
    pub pan: CategoricalCodes,
    /// Day zero for the date column.
    pub date_origin: NaiveDate,
}

/// A numeric point handed to the clustering algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source_id: TxId,
}

impl FeatureVector {
    pub fn new(source_id: TxId, values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidTransaction(format!("non-finite feature value {bad}")));
        }
        Ok(Self { values, source_id })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Encodes a window, oldest first, into one vector per transaction.
pub fn encode_window(window: &[Transaction], dims: FeatureSet) -> Result<(Vec<FeatureVector>, EncodingMap)> {
    let first = window.first().ok_or(Error::EmptyInput)?;
    let date_origin = window.iter().map(|t| t.trx_date).min().unwrap_or(first.trx_date);
    let mut map = EncodingMap {
        term_id: CategoricalCodes::default(),
        merchant_id: CategoricalCodes::default(),
        pan: CategoricalCodes::default(),
        date_origin,
    };

    let vectors = window
        .iter()
        .map(|t| {
            map.term_id.code_or_insert(&t.term_id);
            map.pan.code_or_insert(&t.pan);
            let merchant = f64::from(map.merchant_id.code_or_insert(&t.merchant_id));
            let day = (t.trx_date - date_origin).num_days() as f64;
            let hour = f64::from(t.trx_time);
            let values = match dims {
                FeatureSet::SixDim => {
                    vec![t.affective_amount, merchant, t.pos_condition as f64, t.pr_code as f64, day, hour]
                }
                FeatureSet::ThreeDim => vec![t.affective_amount, day, hour],
            };
            FeatureVector::new(t.id, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vectors, map))
}

/// Rescales vectors in place according to `scaling`.
pub fn apply_scaling(vectors: &mut [FeatureVector], scaling: Scaling) {
    if scaling == Scaling::None || vectors.is_empty() {
        return;
    }
    let dim = vectors[0].dim();
    let n = vectors.len() as f64;
    for col in 0..dim {
        let mean = vectors.iter().map(|v| v.values[col]).sum::<f64>() / n;
        let var = vectors.iter().map(|v| (v.values[col] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for v in vectors.iter_mut() {
            v.values[col] = if sd > 0.0 { (v.values[col] - mean) / sd } else { 0.0 };
        }
    }
}

/// Distance measure between two feature vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    Euclidean,
    Manhattan,
}

impl Measure {
    /// Unchecked distance over equal-length slices.
    #[inline]
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Measure::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Measure::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

pub fn distance(a: &FeatureVector, b: &FeatureVector, measure: Measure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(measure.between(&a.values, &b.values))
}

/// Full pairwise distance matrix, row-major.
pub(crate) fn distance_matrix(vectors: &[FeatureVector], measure: Measure) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = measure.between(&vectors[i].values, &vectors[j].values);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

pub(crate) fn check_same_dim(vectors: &[FeatureVector]) -> Result<usize> {
    let dim = vectors.first().ok_or(Error::EmptyInput)?.dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch { left: dim, right: v.dim() });
    }
    Ok(dim)
}
