use std::fmt::Write as _;

use noma_pep::asymptotic::{chernoff_average, effective_diversity, pep_upper_bound, BoundForm, DiversityMethod};
use noma_pep::optimizer::{solve, sweep_csv, summary_csv, OptimizationProblem, OptimizationResult};
use noma_pep::pep::{average_pep, hypothesis_betas, pep_quadrature, upsilon, Method, PepCurve, PepPoint};
use noma_pep::sim::{empirical_pep, sic_delta_weights, simulate_with_workers, stats_csv_rows, SimStats, SIM_CSV_HEADER};
use noma_pep::{SicMode, SystemConfig};

use crate::settings::{SicModeName, Settings};
use crate::{CliError, Command, Output};

type Outcome = (Vec<Output>, Result<(), CliError>);

pub(crate) fn dispatch(command: Command, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = s.system()?;
    let outputs = match command {
        Command::Pep => pep(s, &cfg)?,
        Command::Simulate => simulate(s, &cfg)?,
        Command::Diversity => diversity(s, &cfg)?,
        Command::Bound => bound(s, &cfg)?,
        Command::Fig2 => fig2(s, &cfg)?,
        Command::Fig3 => fig3(s, &cfg)?,
        Command::Optimize | Command::Fig4 => {
            let (outputs, result) = optimize(s, &cfg, command == Command::Fig4)?;
            let outcome = if result.infeasible { Err(CliError::Infeasible) } else { Ok(()) };
            return Ok((outputs, outcome));
        }
    };
    Ok((outputs, Ok(())))
}

fn check_index(name: &str, idx: usize, m: usize) -> Result<usize, CliError> {
    if idx >= m {
        return Err(CliError::Config(format!("{name} = {idx} is outside 0..{m}")));
    }
    Ok(idx)
}

/// The `--tx/--rx` pair, or every ordered pair when neither is given.
fn pairs(s: &Settings, cfg: &SystemConfig) -> Result<Vec<(usize, usize)>, CliError> {
    let m = cfg.constellation.len();
    match (s.tx, s.rx) {
        (None, None) => Ok(cfg.constellation.error_pairs().collect()),
        (tx, rx) => {
            let tx = check_index("tx", tx.unwrap_or(0), m)?;
            let rx = check_index("rx", rx.unwrap_or(if tx == 1 { 0 } else { 1 }), m)?;
            if tx == rx {
                return Err(CliError::Config(format!("tx and rx are both {tx}")));
            }
            Ok(vec![(tx, rx)])
        }
    }
}

/// A single pair for curve-style outputs: `--tx/--rx`, defaulting to 0 → 1.
fn single_pair(s: &Settings, cfg: &SystemConfig) -> Result<(usize, usize), CliError> {
    let m = cfg.constellation.len();
    let tx = check_index("tx", s.tx.unwrap_or(0), m)?;
    let rx = check_index("rx", s.rx.unwrap_or(if tx == 1 { 0 } else { 1 }), m)?;
    if tx == rx {
        return Err(CliError::Config(format!("tx and rx are both {tx}")));
    }
    Ok((tx, rx))
}

fn run_sim(s: &Settings, cfg: &SystemConfig, snr_db: f64, trials: u64) -> Result<SimStats, CliError> {
    Ok(simulate_with_workers(cfg, snr_db, trials, s.seed, s.workers)?)
}

/// SIC modes for users `1..=L` at one SNR.
fn sic_modes(s: &Settings, cfg: &SystemConfig, snr_db: f64) -> Result<Vec<SicMode>, CliError> {
    let num_users = cfg.num_users();
    match s.sic_mode {
        SicModeName::Perfect => Ok(vec![SicMode::Perfect; num_users]),
        SicModeName::Pattern => (1..=num_users)
            .map(|l| Ok(SicMode::Pattern(s.pattern_deltas(l, &cfg.constellation)?)))
            .collect(),
        SicModeName::Weighted => {
            let stats = run_sim(s, cfg, snr_db, s.weight_trials)?;
            (1..=num_users)
                .map(|l| Ok(SicMode::Weighted(sic_delta_weights(&stats, l, cfg.constellation.points())?)))
                .collect()
        }
    }
}

fn analytic_curve(
    cfg: &SystemConfig,
    user: usize,
    pair: (usize, usize),
    snrs: &[f64],
    modes: &[Vec<SicMode>],
) -> Result<PepCurve, CliError> {
    let mut points = Vec::with_capacity(snrs.len());
    for (&snr_db, m) in snrs.iter().zip(modes) {
        let model = cfg.channel_at(snr_db)?;
        let pep = average_pep(user, pair.0, pair.1, &cfg.constellation, &cfg.alpha, cfg.power, &model, &m[user - 1])?;
        points.push(PepPoint {
            snr_db,
            pep,
            method: Method::Quadrature,
        });
    }
    Ok(PepCurve { user, points })
}

fn all_modes(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Vec<SicMode>>, CliError> {
    s.snr_db.iter().map(|&snr| sic_modes(s, cfg, snr)).collect()
}

fn pep(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let pairs = pairs(s, cfg)?;
    let mut body = String::from("snr_db,user,tx,rx,method,sic_mode,pep\n");
    for &snr_db in &s.snr_db {
        let model = cfg.channel_at(snr_db)?;
        let modes = sic_modes(s, cfg, snr_db)?;
        for (i, mode) in modes.iter().enumerate() {
            for &(tx, rx) in &pairs {
                let p = average_pep(i + 1, tx, rx, &cfg.constellation, &cfg.alpha, cfg.power, &model, mode)?;
                let _ = writeln!(body, "{snr_db},{},{tx},{rx},{},{},{p:e}", i + 1, Method::Quadrature, mode.name());
            }
        }
    }
    Ok(vec![Output {
        name: "pep.csv".into(),
        body,
    }])
}

fn simulate(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let mut body = format!("{SIM_CSV_HEADER}\n");
    for &snr_db in &s.snr_db {
        body.push_str(&stats_csv_rows(&run_sim(s, cfg, snr_db, s.trials)?));
    }
    Ok(vec![Output {
        name: "simulate.csv".into(),
        body,
    }])
}

fn diversity(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let pair = single_pair(s, cfg)?;
    let modes = all_modes(s, cfg)?;
    let mut body = String::from("user,tx,rx,snr_db,method,d_eff\n");
    for l in 1..=cfg.num_users() {
        let curve = analytic_curve(cfg, l, pair, &s.snr_db, &modes)?;
        let report = effective_diversity(&curve)?;
        for sk in &report.skipped {
            eprintln!("diversity: user {l} skipped {} dB ({})", sk.snr_db, sk.reason);
        }
        for e in &report.estimates {
            let _ = writeln!(body, "{l},{},{},{},{},{:e}", pair.0, pair.1, e.snr_db, e.method.name(), e.d_eff);
        }
    }
    Ok(vec![Output {
        name: "diversity.csv".into(),
        body,
    }])
}

fn bound(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let pairs = match (s.tx, s.rx) {
        (None, None) => vec![single_pair(s, cfg)?],
        _ => pairs(s, cfg)?,
    };
    let c = &cfg.constellation;
    let mut body =
        String::from("snr_db,user,tx,rx,pep_quadrature,chernoff_average,bound_rederived,bound_verbatim\n");
    for &snr_db in &s.snr_db {
        let model = cfg.channel_at(snr_db)?;
        let gamma_bar = model.mean_snr();
        for l in 1..=cfg.num_users() {
            for &(tx, rx) in &pairs {
                let delta = c.point(tx)? - c.point(rx)?;
                let zeros = vec![Default::default(); l - 1];
                let betas = hypothesis_betas(l, cfg.num_users(), delta, &zeros, c, &cfg.alpha, cfg.power)?;
                let ups = upsilon(model.noise_var(), delta);
                let n = betas.len() as f64;
                let mut acc = [0.0; 4];
                for &b in &betas {
                    let d2 = delta.norm_sqr();
                    acc[0] += pep_quadrature(l, &model, b, ups)?;
                    acc[1] += chernoff_average(l, cfg.num_users(), gamma_bar, b, d2)?;
                    acc[2] += pep_upper_bound(l, cfg.num_users(), gamma_bar, b, d2, BoundForm::Rederived)?;
                    acc[3] += pep_upper_bound(l, cfg.num_users(), gamma_bar, b, d2, BoundForm::Verbatim)?;
                }
                let _ = writeln!(
                    body,
                    "{snr_db},{l},{tx},{rx},{:e},{:e},{:e},{:e}",
                    acc[0] / n,
                    acc[1] / n,
                    acc[2] / n,
                    acc[3] / n
                );
            }
        }
    }
    Ok(vec![Output {
        name: "bound.csv".into(),
        body,
    }])
}

fn optimize(s: &Settings, cfg: &SystemConfig, fig4: bool) -> Result<(Vec<Output>, OptimizationResult), CliError> {
    let snr_db = match s.snr_db.as_slice() {
        [one] => *one,
        _ => return Err(CliError::Config("optimization takes exactly one snr_db value".into())),
    };
    let mut problem = OptimizationProblem::new(cfg.clone(), snr_db, s.pth, s.grid_step)?;
    problem.objective_scope = s.objective;
    problem.sic = s.sic_spec();
    problem.validate()?;
    let result = solve(&problem)?;
    let prefix = if fig4 { "fig4_" } else { "" };
    let mut outputs = vec![
        Output {
            name: format!("{prefix}sweep.csv"),
            body: sweep_csv(&result, cfg.num_users()),
        },
        Output {
            name: format!("{prefix}summary.csv"),
            body: summary_csv(&result, &problem),
        },
    ];
    let mut ber = String::new();
    let cols: Vec<String> = (1..=cfg.num_users()).map(|l| format!("ber_user_{l}")).collect();
    let alphas: Vec<String> = (1..=cfg.num_users()).map(|l| format!("alpha_{l}")).collect();
    let _ = writeln!(ber, "{},{},psi", alphas.join(","), cols.join(","));
    for p in &result.sweep {
        let a: Vec<String> = p.alpha.iter().map(|x| x.to_string()).collect();
        let b: Vec<String> = p.ber.iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(ber, "{},{},{:e}", a.join(","), b.join(","), p.psi);
    }
    outputs.push(Output {
        name: format!("{prefix}ber.csv"),
        body: ber,
    });
    Ok((outputs, result))
}

fn fig2(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let (tx, rx) = single_pair(s, cfg)?;
    let num_users = cfg.num_users();
    let mut bodies: Vec<String> =
        vec![String::from("snr_db,pep_perfect,pep_weighted,pep_simulated,ci_half_width,trials\n"); num_users];
    for &snr_db in &s.snr_db {
        let model = cfg.channel_at(snr_db)?;
        let stats = run_sim(s, cfg, snr_db, s.trials)?;
        for (i, body) in bodies.iter_mut().enumerate() {
            let l = i + 1;
            let c = &cfg.constellation;
            let perfect = average_pep(l, tx, rx, c, &cfg.alpha, cfg.power, &model, &SicMode::Perfect)?;
            let weights = sic_delta_weights(&stats, l, c.points())?;
            let weighted = average_pep(l, tx, rx, c, &cfg.alpha, cfg.power, &model, &SicMode::Weighted(weights))?;
            let sim = empirical_pep(&stats, l, tx, rx)?;
            let _ = writeln!(
                body,
                "{snr_db},{perfect:e},{weighted:e},{:e},{:e},{}",
                sim.value, sim.half_width, sim.trials
            );
        }
    }
    Ok(bodies
        .into_iter()
        .enumerate()
        .map(|(i, body)| Output {
            name: format!("fig2_user{}.csv", i + 1),
            body,
        })
        .collect())
}

fn fig3(s: &Settings, cfg: &SystemConfig) -> Result<Vec<Output>, CliError> {
    let pair = single_pair(s, cfg)?;
    let modes = all_modes(s, cfg)?;
    let mut body = String::from("snr_db,user,pep,d_ratio,d_finite_difference\n");
    for l in 1..=cfg.num_users() {
        let curve = analytic_curve(cfg, l, pair, &s.snr_db, &modes)?;
        let report = effective_diversity(&curve)?;
        for p in &curve.points {
            let find = |m: DiversityMethod| {
                report
                    .by_method(m)
                    .find(|e| e.snr_db == p.snr_db)
                    .map_or(String::new(), |e| format!("{:e}", e.d_eff))
            };
            let _ = writeln!(
                body,
                "{},{l},{:e},{},{}",
                p.snr_db,
                p.pep,
                find(DiversityMethod::RatioForm),
                find(DiversityMethod::FiniteDifference)
            );
        }
    }
    Ok(vec![Output {
        name: "fig3.csv".into(),
        body,
    }])
}
