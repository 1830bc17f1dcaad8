//! Random-effects regression that strips observed heterogeneity from bids.
//!
//! The normalized bid `bid / eng` is regressed on an intercept, bidder-count
//! dummies for 2..=9 bidders and five covariates, with an auction random
//! effect estimated by feasible GLS (Swamy-Arora variance components). The
//! homogenized bid keeps the idiosyncratic residual plus the intercept and
//! the bidder-count effect.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::records::BidRecord;
use crate::error::{Error, Result};

/// Largest bidder count with its own dummy; larger auctions share the
/// intercept.
pub const MAX_DUMMY_BIDDERS: usize = 9;

/// Design column names in order.
pub const COLUMN_NAMES: [&str; 14] = [
    "intercept", "n2", "n3", "n4", "n5", "n6", "n7", "n8", "n9", "fringe", "dist", "util",
    "rutil", "rdist",
];

const RANK_TOL: f64 = 1e-10;

/// Design row of one record.
pub fn design_row(r: &BidRecord) -> [f64; 14] {
    let mut row = [0.0; 14];
    row[0] = 1.0;
    if (2..=MAX_DUMMY_BIDDERS).contains(&r.n_bidders) {
        row[r.n_bidders - 1] = 1.0;
    }
    row[9] = if r.fringe { 1.0 } else { 0.0 };
    row[10] = r.dist;
    row[11] = r.util;
    row[12] = r.rutil;
    row[13] = r.rdist;
    row
}

/// Fitted homogenization regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationModel {
    pub columns: Vec<String>,
    /// Zero for dropped columns: those that are identically zero and, when
    /// no auction falls outside the dummy range, the largest bidder count.
    pub coefficients: Vec<f64>,
    /// `None` for dropped columns.
    pub standard_errors: Vec<Option<f64>>,
    pub auction_variance: f64,
    pub idiosyncratic_variance: f64,
    pub auctions: usize,
    pub observations: usize,
    pub notes: Vec<String>,
}

impl HomogenizationModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.coefficients[i])
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Bidder-count effect; zero for counts without a dummy.
    pub fn bidder_effect(&self, bidders: usize) -> f64 {
        if (2..=MAX_DUMMY_BIDDERS).contains(&bidders) {
            self.coefficients[bidders - 1]
        } else {
            0.0
        }
    }

    /// Linear predictor without the auction effect.
    pub fn predict(&self, r: &BidRecord) -> f64 {
        design_row(r)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, b)| x * b)
            .sum()
    }

    /// Shrinkage weight of an auction's mean residual in its effect.
    pub fn shrinkage(&self, bids_in_auction: usize) -> f64 {
        let su = self.auction_variance;
        let se = self.idiosyncratic_variance;
        let t = bids_in_auction as f64;
        if su <= 0.0 {
            0.0
        } else if se <= 0.0 {
            1.0
        } else {
            t * su / (t * su + se)
        }
    }
}

/// One bid after homogenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedBid {
    pub auction_id: String,
    pub bidder_id: String,
    pub n_bidders: usize,
    pub fringe: bool,
    /// `bid / eng`.
    pub ratio: f64,
    pub auction_effect: f64,
    pub residual: f64,
    pub homogenized: f64,
}

/// Groups record positions by auction in order of first appearance.
fn auction_groups(records: &[BidRecord]) -> Vec<Vec<usize>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let g = *index.entry(r.auction_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Least squares by SVD with a relative rank cutoff; returns the solution,
/// the residual sum of squares and the numerical rank.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64, usize)> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax > 0.0 { smax * RANK_TOL } else { RANK_TOL };
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let beta = svd
        .solve(y, eps)
        .map_err(|e| Error::solver("least squares", e.to_string()))?;
    let resid = y - x * &beta;
    Ok((beta, resid.norm_squared(), rank))
}

/// Names of columns that load on the null space of `x`.
fn collinear_columns(x: &DMatrix<f64>, names: &[&str]) -> Vec<String> {
    let svd = x.clone().svd(false, true);
    let v_t = match svd.v_t {
        Some(v) => v,
        None => return names.iter().map(|s| s.to_string()).collect(),
    };
    let smax = svd.singular_values.max();
    let mut involved = vec![false; names.len()];
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= smax * RANK_TOL {
            for (j, flag) in involved.iter_mut().enumerate() {
                if v_t[(k, j)].abs() > 1e-6 {
                    *flag = true;
                }
            }
        }
    }
    // thin SVD returns min(rows, cols) singular values; missing ones are zero
    if x.nrows() < x.ncols() {
        return names.iter().map(|s| s.to_string()).collect();
    }
    names
        .iter()
        .zip(involved)
        .filter(|(_, f)| *f)
        .map(|(n, _)| n.to_string())
        .collect()
}

/// Fits the random-effects regression.
pub fn fit_homogenization(records: &[BidRecord]) -> Result<HomogenizationModel> {
    super::records::validate_records(records)?;
    let groups = auction_groups(records);
    let n_obs = records.len();
    let n_groups = groups.len();
    if n_groups < 2 {
        return Err(Error::NotEnoughVariation(
            "homogenization needs at least two auctions".into(),
        ));
    }
    let rows: Vec<[f64; 14]> = records.iter().map(design_row).collect();
    let y_all: Vec<f64> = records.iter().map(BidRecord::ratio).collect();

    // Columns that are identically zero carry no information and are dropped.
    let mut kept: Vec<usize> = (0..COLUMN_NAMES.len())
        .filter(|&j| rows.iter().any(|r| r[j] != 0.0))
        .collect();
    let mut notes = Vec::new();
    // Without auctions in the base category the dummies sum to the
    // intercept; the largest count then becomes the base. Intercept plus
    // bidder effect is unchanged by this choice.
    if rows.iter().all(|r| r[1..=8].iter().any(|x| *x != 0.0)) {
        if let Some(pos) = kept.iter().rposition(|j| (1..=8).contains(j)) {
            notes.push(format!(
                "no auction outside 2..={MAX_DUMMY_BIDDERS} bidders; {} is the base category",
                COLUMN_NAMES[kept[pos]]
            ));
            kept.remove(pos);
        }
    }
    let names: Vec<&str> = kept.iter().map(|&j| COLUMN_NAMES[j]).collect();
    let k = kept.len();
    let x = DMatrix::from_fn(n_obs, k, |i, j| rows[i][kept[j]]);
    let y = DVector::from_vec(y_all);

    // Column scaling keeps the rank test independent of covariate units.
    let scales: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let x_scaled = DMatrix::from_fn(n_obs, k, |i, j| x[(i, j)] / scales[j]);
    let full = x_scaled.clone().svd(false, false);
    let smax = full.singular_values.max();
    let rank = full
        .singular_values
        .iter()
        .filter(|s| **s > smax * RANK_TOL)
        .count();
    if rank < k {
        return Err(Error::CollinearDesign {
            columns: collinear_columns(&x_scaled, &names),
        });
    }

    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();

    // Within (fixed-effects) regression for the idiosyncratic variance.
    let mut xw = x_scaled.clone();
    let mut yw = y.clone();
    let mut xb = DMatrix::zeros(n_groups, k);
    let mut yb = DVector::zeros(n_groups);
    for (g, members) in groups.iter().enumerate() {
        let t = members.len() as f64;
        for j in 0..k {
            let mean = members.iter().map(|&i| x_scaled[(i, j)]).sum::<f64>() / t;
            xb[(g, j)] = mean;
            for &i in members {
                xw[(i, j)] -= mean;
            }
        }
        let mean = members.iter().map(|&i| y[i]).sum::<f64>() / t;
        yb[g] = mean;
        for &i in members {
            yw[i] -= mean;
        }
    }
    let (_, sse_w, rank_w) = least_squares(&xw, &yw)?;
    let df_w = n_obs as i64 - n_groups as i64 - rank_w as i64;
    if df_w <= 0 {
        return Err(Error::NotEnoughVariation(format!(
            "{n_obs} bids in {n_groups} auctions leave no within-auction degrees of freedom"
        )));
    }
    let sigma_e = sse_w / df_w as f64;

    // Between regression on auction means for the auction-effect variance.
    let (_, sse_b, rank_b) = least_squares(&xb, &yb)?;
    let df_b = n_groups as i64 - rank_b as i64;
    let sigma_u = if df_b > 0 {
        let harmonic = n_groups as f64 / sizes.iter().map(|t| 1.0 / t).sum::<f64>();
        let v = sse_b / df_b as f64 - sigma_e / harmonic;
        if v < 0.0 {
            notes.push("negative auction-effect variance estimate truncated at zero".into());
        }
        v.max(0.0)
    } else {
        notes.push(format!(
            "{n_groups} auctions cannot identify the auction-effect variance; set to zero"
        ));
        0.0
    };

    // Quasi-demeaned GLS.
    let mut xs = x_scaled.clone();
    let mut ys = y.clone();
    for (g, members) in groups.iter().enumerate() {
        let t = sizes[g];
        let theta = if sigma_u <= 0.0 {
            0.0
        } else {
            1.0 - (sigma_e / (t * sigma_u + sigma_e)).sqrt()
        };
        for &i in members {
            for j in 0..k {
                xs[(i, j)] -= theta * xb[(g, j)];
            }
            ys[i] -= theta * yb[g];
        }
    }
    let (beta_scaled, _, _) = least_squares(&xs, &ys)?;
    let xtx = xs.transpose() * &xs;
    let cov = xtx
        .try_inverse()
        .ok_or_else(|| Error::solver("homogenization", "singular GLS normal matrix"))?;

    let mut coefficients = vec![0.0; COLUMN_NAMES.len()];
    let mut standard_errors = vec![None; COLUMN_NAMES.len()];
    for (j, &col) in kept.iter().enumerate() {
        coefficients[col] = beta_scaled[j] / scales[j];
        standard_errors[col] = Some((sigma_e * cov[(j, j)]).max(0.0).sqrt() / scales[j]);
    }
    for (j, name) in COLUMN_NAMES.iter().enumerate() {
        if !kept.contains(&j) && rows.iter().all(|r| r[j] == 0.0) {
            notes.push(format!("column {name} is identically zero and was dropped"));
        }
    }
    Ok(HomogenizationModel {
        columns: COLUMN_NAMES.iter().map(|s| s.to_string()).collect(),
        coefficients,
        standard_errors,
        auction_variance: sigma_u,
        idiosyncratic_variance: sigma_e,
        auctions: n_groups,
        observations: n_obs,
        notes,
    })
}

/// Applies a fitted model: residual `e = y - x b - effect`, where the
/// auction effect is the shrunken mean composite residual of the auction,
/// and homogenized bid `e + intercept + bidder effect`.
pub fn homogenize(records: &[BidRecord], model: &HomogenizationModel) -> Result<Vec<HomogenizedBid>> {
    super::records::validate_records(records)?;
    let composite: Vec<f64> = records.iter().map(|r| r.ratio() - model.predict(r)).collect();
    let mut effects = vec![0.0; records.len()];
    for members in auction_groups(records) {
        let mean = members.iter().map(|&i| composite[i]).sum::<f64>() / members.len() as f64;
        let effect = model.shrinkage(members.len()) * mean;
        for i in members {
            effects[i] = effect;
        }
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let residual = composite[i] - effects[i];
            HomogenizedBid {
                auction_id: r.auction_id.clone(),
                bidder_id: r.bidder_id.clone(),
                n_bidders: r.n_bidders,
                fringe: r.fringe,
                ratio: r.ratio(),
                auction_effect: effects[i],
                residual,
                homogenized: residual + model.intercept() + model.bidder_effect(r.n_bidders),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirics::records::fixtures::record;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panel(seed: u64, effect_sd: f64) -> Vec<BidRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for a in 0..120 {
            let n = 2 + a % 4;
            let effect = effect_sd * (rng.gen::<f64>() - 0.5) * 3.46;
            let dist: f64 = rng.gen_range(0.0..10.0);
            for b in 0..n {
                let mut r = record(&format!("a{a}"), &format!("b{b}"), 1.0, n);
                r.dist = dist + rng.gen_range(0.0..2.0);
                r.util = rng.gen();
                r.rutil = rng.gen();
                r.rdist = rng.gen_range(0.0..5.0);
                r.fringe = b == 0 && a % 3 == 0;
                r.eng = rng.gen_range(1.0..5.0);
                let y = 1.0 - 0.02 * n as f64 + 0.01 * r.dist - 0.05 * r.util
                    + 0.03 * r.rutil
                    + 0.004 * r.rdist
                    + if r.fringe { 0.06 } else { 0.0 }
                    + effect
                    + 0.03 * (rng.gen::<f64>() - 0.5);
                r.bid = y * r.eng;
                out.push(r);
            }
        }
        out
    }

    #[test]
    fn recovers_coefficients() {
        let records = panel(3, 0.05);
        let m = fit_homogenization(&records).unwrap();
        assert!((m.coefficient("dist").unwrap() - 0.01).abs() < 2e-3);
        assert!((m.coefficient("util").unwrap() + 0.05).abs() < 1e-2);
        assert!((m.coefficient("fringe").unwrap() - 0.06).abs() < 1e-2);
        assert!((m.bidder_effect(3) - m.bidder_effect(2) + 0.02).abs() < 2e-2);
        assert!(m.auction_variance > 0.0);
        assert_eq!(m.bidder_effect(12), 0.0);
        assert_eq!(m.coefficient("n9"), Some(0.0));
    }

    #[test]
    fn reconstruction_is_exact() {
        let records = panel(5, 0.05);
        let m = fit_homogenization(&records).unwrap();
        let h = homogenize(&records, &m).unwrap();
        for (r, hb) in records.iter().zip(&h) {
            let back = m.predict(r) + hb.auction_effect + hb.residual;
            assert!((back - r.ratio()).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let records = panel(7, 0.05);
        let m = fit_homogenization(&records).unwrap();
        let h = homogenize(&records, &m).unwrap();
        for (j, name) in COLUMN_NAMES.iter().enumerate() {
            let dot: f64 = records
                .iter()
                .zip(&h)
                .map(|(r, hb)| design_row(r)[j] * hb.residual)
                .sum();
            assert!(dot.abs() < 1e-9, "column {name} dot {dot}");
        }
    }

    #[test]
    fn single_bid_auctions_rejected() {
        let mut records = panel(9, 0.0);
        // single-bid auctions only: no within variation
        records.retain(|r| r.bidder_id == "b0");
        for r in records.iter_mut() {
            r.n_bidders = 1;
        }
        assert!(matches!(
            fit_homogenization(&records),
            Err(Error::NotEnoughVariation(_))
        ));
    }

    #[test]
    fn zero_auction_effect_matches_least_squares() {
        // noise sums to zero within each auction, so the between fit is exact
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut records = Vec::new();
        for a in 0..80 {
            let e: f64 = rng.gen_range(-0.05..0.05);
            for (b, sign) in [1.0, -1.0].iter().enumerate() {
                let mut r = record(&format!("a{a}"), &format!("b{b}"), 1.0, 2);
                r.dist = rng.gen_range(0.0..10.0);
                r.util = rng.gen();
                r.bid = 0.9 + 0.01 * r.dist + 0.1 * r.util + sign * e;
                records.push(r);
            }
        }
        let m = fit_homogenization(&records).unwrap();
        assert_eq!(m.auction_variance, 0.0);
        let x = DMatrix::from_fn(records.len(), 3, |i, j| match j {
            0 => 1.0,
            1 => records[i].dist,
            _ => records[i].util,
        });
        let y = DVector::from_iterator(records.len(), records.iter().map(BidRecord::ratio));
        let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
        assert!((m.intercept() - ols[0]).abs() < 1e-6);
        assert!((m.coefficient("dist").unwrap() - ols[1]).abs() < 1e-6);
        assert!((m.coefficient("util").unwrap() - ols[2]).abs() < 1e-6);
    }

    #[test]
    fn collinear_columns_named() {
        let mut records = panel(11, 0.02);
        for r in records.iter_mut() {
            r.rdist = 2.0 * r.util;
        }
        match fit_homogenization(&records) {
            Err(Error::CollinearDesign { columns }) => {
                assert!(columns.contains(&"util".to_string()));
                assert!(columns.contains(&"rdist".to_string()));
                assert!(!columns.contains(&"dist".to_string()));
            }
            other => panic!("expected collinearity, got {other:?}"),
        }
    }

    #[test]
    fn scale_invariant() {
        let records = panel(13, 0.05);
        let scaled: Vec<BidRecord> = records
            .iter()
            .map(|r| BidRecord {
                bid: r.bid * 7.5,
                eng: r.eng * 7.5,
                ..r.clone()
            })
            .collect();
        let a = homogenize(&records, &fit_homogenization(&records).unwrap()).unwrap();
        let b = homogenize(&scaled, &fit_homogenization(&scaled).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.homogenized - y.homogenized).abs() < 1e-10);
        }
    }
}
