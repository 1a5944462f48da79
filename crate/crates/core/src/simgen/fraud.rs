use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::{CustomerProfile, DEVICE_CODES};
use crate::error::{Error, Result};
use crate::seed;
use crate::txmodel::{Transaction, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudKind {
    AmountSpike,
    NovelMerchant,
    OddHour,
    DeviceSwitch,
    Combined,
}

impl std::str::FromStr for FraudKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "amount_spike" => Ok(Self::AmountSpike),
            "novel_merchant" => Ok(Self::NovelMerchant),
            "odd_hour" => Ok(Self::OddHour),
            "device_switch" => Ok(Self::DeviceSwitch),
            "combined" => Ok(Self::Combined),
            other => Err(Error::InvalidFraudSpec(format!("unknown fraud kind `{other}`"))),
        }
    }
}

impl FraudKind {
    fn spikes_amount(self) -> bool {
        matches!(self, Self::AmountSpike | Self::Combined)
    }
    fn novel_merchant(self) -> bool {
        matches!(self, Self::NovelMerchant | Self::Combined)
    }
    fn odd_hour(self) -> bool {
        matches!(self, Self::OddHour | Self::Combined)
    }
    fn device_switch(self) -> bool {
        matches!(self, Self::DeviceSwitch | Self::Combined)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraudSpec {
    pub kind: FraudKind,
    pub count: usize,
    /// Spiked amounts are at least the profile's 99th percentile times this.
    #[serde(default = "default_amount_factor")]
    pub amount_factor: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_amount_factor() -> f64 {
    100.0
}

impl FraudSpec {
    pub fn new(kind: FraudKind, count: usize) -> Self {
        Self { kind, count, amount_factor: default_amount_factor(), seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidFraudSpec("count must be at least 1".into()));
        }
        if self.amount_factor.is_nan() || self.amount_factor < 1.0 {
            return Err(Error::InvalidFraudSpec("amount factor must be at least 1".into()));
        }
        Ok(())
    }
}

impl std::str::FromStr for FraudSpec {
    type Err = Error;

    /// `kind:count`, e.g. `combined:16`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, count) =
            s.split_once(':').ok_or_else(|| Error::InvalidFraudSpec(format!("expected `kind:count`, got `{s}`")))?;
        let count = count.trim().parse().map_err(|_| Error::InvalidFraudSpec(format!("`{count}` is not a count")))?;
        let spec = FraudSpec::new(kind.parse()?, count);
        spec.validate()?;
        Ok(spec)
    }
}

/// Interleaves `spec.count` anomalous transactions into the second half of
/// `history` and renumbers everything chronologically from the first id.
/// Returns the new history and the ids of the injected transactions.
pub fn inject_fraud(
    history: &[Transaction],
    profile: &CustomerProfile,
    spec: &FraudSpec,
) -> Result<(Vec<Transaction>, BTreeSet<TxId>)> {
    spec.validate()?;
    let first = history.first().ok_or(Error::EmptyInput)?;
    let odd_hours: Vec<u8> = (0..24).filter(|h| !profile.hours.contains(h)).collect();
    if spec.kind.odd_hour() && odd_hours.is_empty() {
        return Err(Error::InvalidFraudSpec("profile covers all 24 hours; no odd hour exists".into()));
    }
    let spare_devices: Vec<i64> =
        DEVICE_CODES.iter().copied().chain(100..).filter(|d| !profile.devices.contains(d)).take(4).collect();

    let mut rng = seed::rng(seed::derive(spec.seed, first.id));
    let base_id = first.id;
    // (position key, is_fraud, transaction)
    let mut merged: Vec<(usize, bool, Transaction)> =
        history.iter().enumerate().map(|(i, t)| (2 * i + 1, false, t.clone())).collect();
    let lo = history.len() / 2;
    for n in 0..spec.count {
        let anchor = rng.random_range(lo..history.len());
        let mut tx = history[anchor].clone();
        tx.affective_amount = if spec.kind.spikes_amount() {
            (profile.amount_p99() * spec.amount_factor * rng.random_range(1.0..1.5)).round()
        } else {
            profile.sample_amount(&mut rng)
        };
        if spec.kind.novel_merchant() {
            tx.merchant_id = format!("X{}-{n}", profile.pan);
            tx.term_id = format!("XT{}-{n}", profile.pan);
        }
        if spec.kind.odd_hour() {
            tx.trx_time = odd_hours[rng.random_range(0..odd_hours.len())];
        }
        if spec.kind.device_switch() {
            tx.pos_condition = spare_devices[rng.random_range(0..spare_devices.len())];
        }
        // land right after the anchor in id order
        merged.push((2 * anchor + 2, true, tx));
    }
    merged.sort_by_key(|(key, _, t)| (t.trx_date, t.trx_time, *key));

    let mut truth = BTreeSet::new();
    let out = merged
        .into_iter()
        .enumerate()
        .map(|(i, (_, fraud, mut t))| {
            t.id = base_id + i as TxId;
            if fraud {
                truth.insert(t.id);
            }
            t
        })
        .collect();
    Ok((out, truth))
}
