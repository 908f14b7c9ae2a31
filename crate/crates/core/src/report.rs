//! Side-by-side comparison of the published closed forms against the
//! numerical references, written out as CSV.
//!
//! The l-th user closed form is expected to sit at a constant `2/σ_h²` above
//! quadrature; the far-user form agrees exactly once its noise factor is
//! taken as `υ/sqrt(2)`. The report records the observed ratios rather than
//! asserting them, so a change in either evaluator shows up as a diff.

use std::fmt::Write as _;

use crate::asymptotic::{linearized_bound_integral, pep_upper_bound, BoundForm};
use crate::channel::ChannelModel;
use crate::error::Result;
use crate::pep::{pep_quadrature, pep_user1_closed, pep_user_l_closed, pep_user_l_series};

/// One closed-form evaluation next to its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub form: &'static str,
    pub user: usize,
    pub num_users: usize,
    pub beta: f64,
    pub upsilon: f64,
    pub sigma_h: f64,
    pub closed: f64,
    pub reference: f64,
}

impl ConsistencyRow {
    pub fn ratio(&self) -> f64 {
        self.closed / self.reference
    }
}

pub const CONSISTENCY_HEADER: &str = "form,l,L,beta,upsilon,sigma_h,closed,quadrature,ratio";

/// Parameter sets `(β, υ, σ_h²)` used by [`consistency_report`].
pub const REPORT_PARAMS: [(f64, f64, f64); 4] = [(1.0, 0.3, 1.0), (2.0, 0.1, 1.0), (0.5, 0.2, 0.5), (1.5, 0.05, 2.0)];

/// Closed forms vs quadrature for every `(l, L) ≤ (max_users, max_users)`.
///
/// Forms:
/// - `lth_user_verbatim`: the published l-th user expression;
/// - `lth_user_series`: the same sum with the `A_l/2` prefactor;
/// - `user1_mapped` (l = 1): far-user form with `ζ = υ/sqrt(2)`, `σ_h → σ_h/sqrt(L)`;
/// - `user1_zeta_as_printed` (l = 1): far-user form with `ζ = sqrt(2)|Δ|σ_n = υ`.
pub fn consistency_report(max_users: usize) -> Result<Vec<ConsistencyRow>> {
    let mut rows = Vec::new();
    for big_l in 1..=max_users {
        for l in 1..=big_l {
            for &(beta, ups, s2) in &REPORT_PARAMS {
                let model = ChannelModel::new(big_l, s2, 1.0)?;
                let q = pep_quadrature(l, &model, beta, ups)?;
                let sh = s2.sqrt();
                let mut push = |form, closed| {
                    rows.push(ConsistencyRow {
                        form,
                        user: l,
                        num_users: big_l,
                        beta,
                        upsilon: ups,
                        sigma_h: sh,
                        closed,
                        reference: q,
                    })
                };
                push("lth_user_verbatim", pep_user_l_closed(l, big_l, beta, ups, sh)?);
                push("lth_user_series", pep_user_l_series(l, big_l, beta, ups, sh)?);
                if l == 1 {
                    let s_min = (s2 / big_l as f64).sqrt();
                    push("user1_mapped", pep_user1_closed(beta, ups / std::f64::consts::SQRT_2, s_min)?);
                    push("user1_zeta_as_printed", pep_user1_closed(beta, ups, s_min)?);
                }
            }
        }
    }
    Ok(rows)
}

pub fn consistency_csv(rows: &[ConsistencyRow]) -> String {
    let mut out = String::from(CONSISTENCY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{:e}",
            r.form,
            r.user,
            r.num_users,
            r.beta,
            r.upsilon,
            r.sigma_h,
            r.closed,
            r.reference,
            r.ratio()
        );
    }
    out
}

/// High-SNR bound in both forms against the truncated integral of the
/// linearised integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub user: usize,
    pub num_users: usize,
    pub snr_db: f64,
    pub beta: f64,
    pub delta_abs_sq: f64,
    pub verbatim: f64,
    pub rederived: f64,
    pub oracle: f64,
}

pub const BOUND_HEADER: &str = "l,L,snr_db,beta,delta_abs_sq,verbatim,rederived,integral_oracle";

pub fn bound_report(max_users: usize, snr_grid_db: &[f64], beta: f64, delta_abs_sq: f64) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for big_l in 1..=max_users {
        for l in 1..=big_l {
            for &snr_db in snr_grid_db {
                let gb = crate::special::db_to_linear(snr_db);
                rows.push(BoundRow {
                    user: l,
                    num_users: big_l,
                    snr_db,
                    beta,
                    delta_abs_sq,
                    verbatim: pep_upper_bound(l, big_l, gb, beta, delta_abs_sq, BoundForm::Verbatim)?,
                    rederived: pep_upper_bound(l, big_l, gb, beta, delta_abs_sq, BoundForm::Rederived)?,
                    oracle: linearized_bound_integral(l, big_l, gb, beta, delta_abs_sq)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn bound_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from(BOUND_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e}",
            r.user, r.num_users, r.snr_db, r.beta, r.delta_abs_sq, r.verbatim, r.rederived, r.oracle
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_covers_every_pair_and_shows_the_constant() {
        let rows = consistency_report(3).unwrap();
        // 6 (l, L) pairs × 4 params × 2 forms, plus 3 L values × 4 params × 2 user-1 forms
        assert_eq!(rows.len(), 6 * 4 * 2 + 3 * 4 * 2);
        for r in &rows {
            let s2 = r.sigma_h * r.sigma_h;
            match r.form {
                "lth_user_verbatim" => assert!((r.ratio() - 2.0 / s2).abs() < 1e-6, "{r:?}"),
                "lth_user_series" | "user1_mapped" => assert!((r.ratio() - 1.0).abs() < 1e-6, "{r:?}"),
                "user1_zeta_as_printed" => assert!(r.ratio() > 1.0),
                other => panic!("unexpected form {other}"),
            }
        }
        let csv = consistency_csv(&rows);
        assert!(csv.starts_with(CONSISTENCY_HEADER));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    #[test]
    fn bound_report_rederived_tracks_oracle_at_high_snr() {
        let rows = bound_report(2, &[40.0], 1.0, 2.0).unwrap();
        for r in &rows {
            assert!(((r.rederived - r.oracle) / r.oracle).abs() < 1e-6);
        }
        assert_eq!(bound_csv(&rows).lines().count(), rows.len() + 1);
    }
}
