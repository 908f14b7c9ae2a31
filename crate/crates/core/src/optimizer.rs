//! Power allocation by exhaustive search over the ordered simplex.
//!
//! The objective is the union bound on each user's BER built from averaged
//! PEPs. A point is feasible when every user's worst-pair average PEP is at
//! most `p_th`. Grid points are `α_i = n_i · step` with integers
//! `n_1 > n_2 > … > n_L ≥ 1` summing to `1/step`, so consecutive
//! coefficients differ by at least one step.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::ChannelModel;
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::pep::{pep_matrix, SicMode};
use crate::sim::{sic_delta_weights, simulate_sic_patterns};
use crate::system::{PowerAllocation, SystemConfig};

/// How the SIC residuals enter every PEP evaluated by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicSpec {
    Perfect,
    /// Residual-error weights re-estimated by simulation at every grid point.
    /// The same seed is used everywhere so neighbouring points share random
    /// numbers and the weights vary smoothly with `α`.
    Weighted { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveScope {
    /// Equal-weight mean of the per-user bounds.
    AverageOverUsers,
    /// The bound of a single user (1-based).
    User(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    /// System parameters; its `alpha` is ignored.
    pub cfg: SystemConfig,
    pub snr_db: f64,
    pub p_th: f64,
    pub grid_step: f64,
    pub objective_scope: ObjectiveScope,
    pub sic: SicSpec,
}

impl OptimizationProblem {
    pub fn new(cfg: SystemConfig, snr_db: f64, p_th: f64, grid_step: f64) -> Result<Self> {
        let p = Self {
            cfg,
            snr_db,
            p_th,
            grid_step,
            objective_scope: ObjectiveScope::AverageOverUsers,
            sic: SicSpec::Perfect,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.p_th > 0.0 && self.p_th <= 1.0) {
            return Err(Error::InvalidConfig(format!("p_th must lie in (0, 1], got {}", self.p_th)));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.01) {
            return Err(Error::InvalidConfig(format!("grid_step must lie in (0, 0.01], got {}", self.grid_step)));
        }
        let n = 1.0 / self.grid_step;
        if (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::InvalidConfig(format!(
                "grid_step {} does not divide 1",
                self.grid_step
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR must be finite, got {}", self.snr_db)));
        }
        if let ObjectiveScope::User(l) = self.objective_scope {
            if l == 0 || l > self.cfg.num_users() {
                return Err(Error::InvalidConfig(format!(
                    "objective user {l} outside 1..={}",
                    self.cfg.num_users()
                )));
            }
        }
        if let SicSpec::Weighted { trials, .. } = self.sic {
            if trials < crate::sim::MIN_WEIGHT_TRIALS {
                return Err(Error::InsufficientTrials {
                    have: trials,
                    need: crate::sim::MIN_WEIGHT_TRIALS,
                });
            }
        }
        Ok(())
    }

    fn steps(&self) -> u32 {
        (1.0 / self.grid_step).round() as u32
    }
}

/// Union bound `(1/M) Σ_m Σ_{m̂≠m} q(m, m̂) PEP(m, m̂) / log2 M` from a PEP matrix.
pub fn union_bound_from_matrix(constellation: &Constellation, peps: &[Vec<f64>]) -> Result<f64> {
    let m = constellation.len();
    let mut total = 0.0;
    for (tx, rx) in constellation.error_pairs() {
        total += f64::from(constellation.bit_errors(tx, rx)?) * peps[tx][rx];
    }
    Ok(total / (m as f64 * f64::from(constellation.bits_per_symbol())))
}

/// Union bound on user `l`'s BER with PEPs from [`crate::pep::average_pep`].
pub fn union_bound_ber(
    user: usize,
    alpha: &PowerAllocation,
    power: f64,
    model: &ChannelModel,
    constellation: &Constellation,
    sic_mode: &SicMode,
) -> Result<f64> {
    let mat = pep_matrix(user, constellation, alpha, power, model, sic_mode)?;
    union_bound_from_matrix(constellation, &mat)
}

/// Everything computed at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub alpha: Vec<f64>,
    pub psi: f64,
    /// Per-user union-bound BER.
    pub ber: Vec<f64>,
    /// Per-user worst-pair average PEP (the constrained quantity).
    pub pep: Vec<f64>,
    pub feasible: bool,
}

fn sic_modes(problem: &OptimizationProblem, cfg: &SystemConfig) -> Result<Vec<SicMode>> {
    let num_users = cfg.num_users();
    match problem.sic {
        SicSpec::Perfect => Ok(vec![SicMode::Perfect; num_users]),
        SicSpec::Weighted { trials, seed } => {
            let stats = simulate_sic_patterns(cfg, problem.snr_db, trials, seed)?;
            (1..=num_users)
                .map(|l| Ok(SicMode::Weighted(sic_delta_weights(&stats, l, cfg.constellation.points())?)))
                .collect()
        }
    }
}

/// Evaluates the bounds, worst-pair PEPs and feasibility at `alpha`.
pub fn evaluate(problem: &OptimizationProblem, alpha: &PowerAllocation) -> Result<GridPoint> {
    let cfg = problem.cfg.with_alpha(alpha.clone());
    cfg.validate()?;
    let model = cfg.channel_at(problem.snr_db)?;
    let modes = sic_modes(problem, &cfg)?;
    let mut ber = Vec::with_capacity(cfg.num_users());
    let mut pep = Vec::with_capacity(cfg.num_users());
    for (i, mode) in modes.iter().enumerate() {
        let mat = pep_matrix(i + 1, &cfg.constellation, alpha, cfg.power, &model, mode)?;
        ber.push(union_bound_from_matrix(&cfg.constellation, &mat)?);
        let worst = cfg
            .constellation
            .error_pairs()
            .map(|(tx, rx)| mat[tx][rx])
            .fold(0.0, f64::max);
        pep.push(worst);
    }
    let psi = match problem.objective_scope {
        ObjectiveScope::AverageOverUsers => ber.iter().sum::<f64>() / ber.len() as f64,
        ObjectiveScope::User(l) => ber[l - 1],
    };
    let feasible = pep.iter().all(|&p| p <= problem.p_th);
    Ok(GridPoint {
        alpha: alpha.as_slice().to_vec(),
        psi,
        ber,
        pep,
        feasible,
    })
}

/// Objective `Ψ(α)` under the problem's scope.
pub fn objective_psi(problem: &OptimizationProblem, alpha: &PowerAllocation) -> Result<f64> {
    Ok(evaluate(problem, alpha)?.psi)
}

/// Integer compositions `n_1 > … > n_L ≥ 1` of `total`, lexicographically ascending.
fn descending_compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, parts: usize, upper: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            if remaining >= 1 && remaining < upper {
                prefix.push(remaining);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        // the remaining parts-1 entries need at least 1 + 2 + … + (parts-1)
        let tail_min = (parts as u32 - 1) * parts as u32 / 2;
        for n in 1..upper.min(remaining.saturating_sub(tail_min) + 1) {
            // n must exceed the next entry, which is at least parts-1
            if n < parts as u32 {
                continue;
            }
            prefix.push(n);
            rec(remaining - n, parts - 1, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, total + 1, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Every grid allocation of the problem, ascending lexicographically in `α`.
pub fn simplex_grid(problem: &OptimizationProblem) -> Result<Vec<PowerAllocation>> {
    let n = problem.steps();
    descending_compositions(n, problem.cfg.num_users())
        .into_iter()
        .map(|c| PowerAllocation::new(c.iter().map(|&k| f64::from(k) / f64::from(n)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_alpha: Option<Vec<f64>>,
    pub best_objective: Option<f64>,
    /// Every grid point in grid order.
    pub sweep: Vec<GridPoint>,
    pub infeasible: bool,
}

impl OptimizationResult {
    pub fn feasible_set(&self) -> impl Iterator<Item = &GridPoint> {
        self.sweep.iter().filter(|p| p.feasible)
    }

    /// Smallest and largest feasible `α_1`.
    pub fn feasible_alpha1_range(&self) -> Option<(f64, f64)> {
        let mut it = self.feasible_set().map(|p| p.alpha[0]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), a| (lo.min(a), hi.max(a))))
    }
}

/// Grid search: minimizes `Ψ` over feasible points. Equal objectives go to
/// the lexicographically larger `α`, i.e. larger `α_1` first.
pub fn solve(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let grid = simplex_grid(problem)?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "grid_step {} leaves no strictly descending allocation for {} users",
            problem.grid_step,
            problem.cfg.num_users()
        )));
    }
    let sweep: Vec<GridPoint> = grid
        .par_iter()
        .map(|a| evaluate(problem, a))
        .collect::<Result<_>>()?;
    let best = pick_best(&sweep);
    Ok(OptimizationResult {
        best_alpha: best.map(|b| b.alpha.clone()),
        best_objective: best.map(|b| b.psi),
        infeasible: best.is_none(),
        sweep,
    })
}

/// Feasible point with the smallest `Ψ`; ties go to the lexicographically
/// larger `α`.
fn pick_best(sweep: &[GridPoint]) -> Option<&GridPoint> {
    sweep.iter().filter(|p| p.feasible).fold(None, |acc: Option<&GridPoint>, p| match acc {
        Some(b) if !(p.psi < b.psi || (p.psi == b.psi && p.alpha > b.alpha)) => Some(b),
        _ => Some(p),
    })
}

/// `alpha_1..alpha_L,psi,pep_user_1..L,feasible`.
pub fn sweep_csv_header(num_users: usize) -> String {
    let mut cols: Vec<String> = (1..=num_users).map(|l| format!("alpha_{l}")).collect();
    cols.push("psi".into());
    cols.extend((1..=num_users).map(|l| format!("pep_user_{l}")));
    cols.push("feasible".into());
    cols.join(",")
}

pub fn sweep_csv(result: &OptimizationResult, num_users: usize) -> String {
    let mut out = sweep_csv_header(num_users);
    out.push('\n');
    for p in &result.sweep {
        for a in &p.alpha {
            let _ = write!(out, "{a},");
        }
        let _ = write!(out, "{:e},", p.psi);
        for v in &p.pep {
            let _ = write!(out, "{v:e},");
        }
        let _ = writeln!(out, "{}", u8::from(p.feasible));
    }
    out
}

/// `key,value` summary of the minimizer.
pub fn summary_csv(result: &OptimizationResult, problem: &OptimizationProblem) -> String {
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "snr_db,{}", problem.snr_db);
    let _ = writeln!(out, "p_th,{:e}", problem.p_th);
    let _ = writeln!(out, "grid_step,{}", problem.grid_step);
    let _ = writeln!(out, "infeasible,{}", u8::from(result.infeasible));
    let _ = writeln!(out, "feasible_points,{}", result.feasible_set().count());
    if let Some((lo, hi)) = result.feasible_alpha1_range() {
        let _ = writeln!(out, "feasible_alpha_1_min,{lo}");
        let _ = writeln!(out, "feasible_alpha_1_max,{hi}");
    }
    if let (Some(a), Some(psi)) = (&result.best_alpha, result.best_objective) {
        for (i, v) in a.iter().enumerate() {
            let _ = writeln!(out, "best_alpha_{},{v}", i + 1);
        }
        let _ = writeln!(out, "best_psi,{psi:e}");
    }
    out
}
