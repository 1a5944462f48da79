use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::txmodel::{Transaction, TxId};

/// A discrete distribution over values, weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted<T> {
    items: Vec<(T, f64)>,
}

impl<T: Clone + PartialEq> Weighted<T> {
    pub fn new(items: Vec<(T, f64)>) -> Result<Self> {
        let total: f64 = items.iter().map(|(_, w)| *w).sum();
        if items.is_empty() || total.is_nan() || total <= 0.0 || items.iter().any(|(_, w)| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidConfig("weights must be non-negative with a positive sum".into()));
        }
        Ok(Self { items: items.into_iter().map(|(v, w)| (v, w / total)).collect() })
    }

    pub fn single(value: T) -> Self {
        Self { items: vec![(value, 1.0)] }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> T {
        let mut u: f64 = rng.random();
        for (v, w) in &self.items {
            if u < *w {
                return v.clone();
            }
            u -= w;
        }
        self.items.last().expect("non-empty").0.clone()
    }

    /// Values with non-zero weight.
    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.items.iter().filter(|(_, w)| *w > 0.0).map(|(v, _)| v)
    }

    pub fn contains(&self, value: &T) -> bool {
        self.support().any(|v| v == value)
    }
}

/// Habits of one simulated customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerProfile {
    pub pan: String,
    pub merchants: Weighted<String>,
    pub terminals: Weighted<String>,
    pub hours: Weighted<u8>,
    /// Log-normal location and scale of the transaction amount.
    pub amount_mu: f64,
    pub amount_sigma: f64,
    pub devices: Weighted<i64>,
    pub process_codes: Weighted<i64>,
    /// Expected transactions per 30 days.
    pub monthly_cadence: f64,
    pub start_date: NaiveDate,
}

/// Device codes a profile may draw its mix from.
pub(crate) const DEVICE_CODES: [i64; 6] = [0, 2, 8, 14, 59, 71];
const PROCESS_CODES: [i64; 3] = [0, 17, 18];

fn weighted_subset<T: Clone + PartialEq, R: Rng>(rng: &mut R, pool: &[T], min: usize, max: usize) -> Weighted<T> {
    let n = rng.random_range(min..=max.min(pool.len()));
    let picks = rand::seq::index::sample(rng, pool.len(), n);
    let items = picks.iter().map(|i| (pool[i].clone(), rng.random_range(0.2..1.0))).collect();
    Weighted::new(items).expect("positive weights")
}

impl CustomerProfile {
    /// A plausible random customer, deterministic per seed.
    pub fn random(pan: impl Into<String>, seed: u64) -> Self {
        let pan = pan.into();
        let mut rng = seed::rng(seed);
        let merchant_pool: Vec<String> = (0..6).map(|j| format!("M{}-{j}", pan)).collect();
        let terminal_pool: Vec<String> = (0..4).map(|j| format!("T{}-{j}", pan)).collect();
        let hour_pool: Vec<u8> = (8..=22).collect();
        Self {
            merchants: weighted_subset(&mut rng, &merchant_pool, 2, 4),
            terminals: weighted_subset(&mut rng, &terminal_pool, 1, 3),
            hours: weighted_subset(&mut rng, &hour_pool, 2, 4),
            amount_mu: rng.random_range(20_000f64..200_000.0).ln(),
            amount_sigma: rng.random_range(0.25..0.5),
            devices: weighted_subset(&mut rng, &DEVICE_CODES, 1, 2),
            process_codes: weighted_subset(&mut rng, &PROCESS_CODES, 1, 2),
            monthly_cadence: rng.random_range(40.0..60.0),
            start_date: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
            pan,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pan.is_empty() {
            return Err(Error::InvalidConfig("profile pan is empty".into()));
        }
        if self.amount_sigma.is_nan() || self.amount_sigma < 0.0 || !self.amount_mu.is_finite() {
            return Err(Error::InvalidConfig("amount distribution parameters are invalid".into()));
        }
        if self.monthly_cadence.is_nan() || self.monthly_cadence <= 0.0 {
            return Err(Error::InvalidConfig("monthly cadence must be positive".into()));
        }
        if self.hours.support().any(|h| *h > 23) {
            return Err(Error::InvalidConfig("hours must be in 0..=23".into()));
        }
        Ok(())
    }

    /// 99th percentile of the amount distribution.
    pub fn amount_p99(&self) -> f64 {
        const Z99: f64 = 2.326_347_874_040_841;
        (self.amount_mu + Z99 * self.amount_sigma).exp()
    }

    pub(crate) fn sample_amount<R: Rng>(&self, rng: &mut R) -> f64 {
        let dist = LogNormal::new(self.amount_mu, self.amount_sigma).expect("validated parameters");
        dist.sample(rng).round().max(1.0)
    }
}

/// Draws `n` habitual transactions. Ids run from 1 in chronological order.
pub fn generate_history(profile: &CustomerProfile, n: usize, seed: u64) -> Result<Vec<Transaction>> {
    profile.validate()?;
    let mut rng = seed::rng(seed);
    let mean_gap = 30.0 / profile.monthly_cadence;
    let mut day = 0.0f64;
    let mut out: Vec<Transaction> = (0..n)
        .map(|_| {
            let tx = Transaction {
                id: 0,
                pr_code: profile.process_codes.sample(&mut rng),
                pan: profile.pan.clone(),
                term_id: profile.terminals.sample(&mut rng),
                merchant_id: profile.merchants.sample(&mut rng),
                pos_condition: profile.devices.sample(&mut rng),
                affective_amount: profile.sample_amount(&mut rng),
                trx_date: profile.start_date + Days::new(day as u64),
                trx_time: profile.hours.sample(&mut rng),
            };
            day += mean_gap * rng.random_range(0.5..1.5);
            tx
        })
        .collect();
    out.sort_by_key(|t| (t.trx_date, t.trx_time));
    for (i, t) in out.iter_mut().enumerate() {
        t.id = i as TxId + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized() {
        let w = Weighted::new(vec![("a", 2.0), ("b", 6.0)]).unwrap();
        assert_eq!(w.items[0].1, 0.25);
        assert!(Weighted::<u8>::new(vec![]).is_err());
        assert!(Weighted::new(vec![(1, -1.0), (2, 3.0)]).is_err());
    }

    #[test]
    fn single_merchant_profile() {
        let mut p = CustomerProfile::random("P1", 3);
        p.merchants = Weighted::single("ONLY".to_owned());
        let h = generate_history(&p, 100, 9).unwrap();
        assert_eq!(h.len(), 100);
        assert!(h.iter().all(|t| t.merchant_id == "ONLY"));
        assert!(h.iter().all(|t| t.affective_amount > 0.0));
        assert!(h.windows(2).all(|w| w[0].id + 1 == w[1].id && w[0].timestamp() <= w[1].timestamp()));
    }

    #[test]
    fn deterministic() {
        let p = CustomerProfile::random("P1", 3);
        assert_eq!(p, CustomerProfile::random("P1", 3));
        assert_eq!(generate_history(&p, 50, 1).unwrap(), generate_history(&p, 50, 1).unwrap());
        assert_ne!(generate_history(&p, 50, 1).unwrap(), generate_history(&p, 50, 2).unwrap());
    }

    #[test]
    fn cadence_sets_date_span() {
        let mut p = CustomerProfile::random("P1", 3);
        p.monthly_cadence = 30.0;
        let h = generate_history(&p, 90, 11).unwrap();
        let span = (h.last().unwrap().trx_date - h[0].trx_date).num_days();
        // seeded regression value
        assert_eq!(span, 90);
        assert!((81..=99).contains(&span));
    }
}
