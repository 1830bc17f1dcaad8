//! Observed bids with auction covariates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub auction_id: String,
    pub bidder_id: String,
    /// Bid in currency units.
    pub bid: f64,
    /// Engineer's estimate; bids are normalized by it.
    pub eng: f64,
    pub dist: f64,
    pub util: f64,
    pub rdist: f64,
    pub rutil: f64,
    pub fringe: bool,
    pub n_bidders: usize,
}

impl BidRecord {
    /// Bid relative to the engineer's estimate.
    pub fn ratio(&self) -> f64 {
        self.bid / self.eng
    }
}

/// Number of records per auction id.
pub fn bids_per_auction(records: &[BidRecord]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.auction_id.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Checks positivity and finiteness of every record and that `n_bidders`
/// matches the number of recorded bids in its auction.
pub fn validate_records(records: &[BidRecord]) -> Result<()> {
    check_values(records)?;
    let counts = bids_per_auction(records);
    for (index, r) in records.iter().enumerate() {
        let recorded = counts[r.auction_id.as_str()];
        if r.n_bidders != recorded {
            return Err(Error::InvalidRecord {
                index,
                reason: format!(
                    "auction {} declares {} bidders but has {recorded} recorded bids",
                    r.auction_id, r.n_bidders
                ),
            });
        }
    }
    Ok(())
}

fn check_values(records: &[BidRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    for (index, r) in records.iter().enumerate() {
        let fields = [
            ("bid", r.bid),
            ("eng", r.eng),
            ("dist", r.dist),
            ("util", r.util),
            ("rdist", r.rdist),
            ("rutil", r.rutil),
        ];
        if let Some((name, value)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("{name} is not finite ({value})"),
            });
        }
        if r.bid <= 0.0 {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("bid must be positive, got {}", r.bid),
            });
        }
        if r.eng <= 0.0 {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("engineer's estimate must be positive, got {}", r.eng),
            });
        }
    }
    Ok(())
}

/// Sets every `n_bidders` to the number of recorded bids in its auction and
/// returns how many records changed.
pub fn reconcile_bidder_counts(records: &mut [BidRecord]) -> Result<usize> {
    check_values(records)?;
    let counts: BTreeMap<String, usize> = bids_per_auction(records)
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
    let mut changed = 0;
    for r in records.iter_mut() {
        let recorded = counts[&r.auction_id];
        if r.n_bidders != recorded {
            r.n_bidders = recorded;
            changed += 1;
        }
    }
    Ok(changed)
}


#[cfg(test)]
mod tests {
    use super::fixtures::record;
    use super::*;

    #[test]
    fn counts_must_match() {
        let mut records = vec![record("a", "1", 1.0, 2), record("a", "2", 1.1, 3)];
        assert!(matches!(
            validate_records(&records),
            Err(Error::InvalidRecord { index: 1, .. })
        ));
        assert_eq!(reconcile_bidder_counts(&mut records).unwrap(), 1);
        validate_records(&records).unwrap();
    }

    #[test]
    fn nonpositive_bid_rejected() {
        let records = vec![record("a", "1", 0.0, 1)];
        assert!(matches!(
            validate_records(&records),
            Err(Error::InvalidRecord { index: 0, .. })
        ));
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(validate_records(&[]), Err(Error::EmptySample));
    }
}
