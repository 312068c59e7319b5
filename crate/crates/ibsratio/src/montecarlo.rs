//! Grid-based replication harness behind the figure data: per-cell sample
//! means, (relative) MSE, consumption, sampling efficiency factor and
//! observed estimation efficiency, each with standard errors.
//!
//! Replication streams are derived statelessly from
//! `(master_seed, cell parameters, replication index)`, and aggregation
//! runs over fixed-size chunks that are reduced in index order, so a cell's
//! statistics are bit-identical for any worker count and any execution
//! schedule. Integer tallies are summed exactly; floating-point moments use
//! compensated summation.

use rayon::prelude::*;

use crate::analysis::{observed_efficiency, true_parameter};
use crate::error::{Error, Result};
use crate::estimator::{run_estimation, EstimatorConfig, Session, TargetParameter};
use crate::numeric::CompensatedSum;
use crate::population::PopulationModel;
use crate::rng::mix;

const CHUNK: u64 = 4096;

/// Resolves the (rho, R) parameterization into population probabilities:
/// `p1 = rho sqrt(R)`, `p2 = rho / sqrt(R)`.
pub fn resolve_cell(rho: f64, big_r: f64) -> Result<(f64, f64)> {
    if !rho.is_finite() || rho <= 0.0 || !big_r.is_finite() || big_r <= 0.0 {
        return Err(Error::InfeasibleCell(format!(
            "rho and R must be positive and finite, got rho={rho}, R={big_r}"
        )));
    }
    let s = big_r.sqrt();
    let (p1, p2) = (rho * s, rho / s);
    if !(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0) {
        return Err(Error::InfeasibleCell(format!(
            "rho={rho}, R={big_r} resolves to p1={p1}, p2={p2} outside (0,1)"
        )));
    }
    Ok((p1, p2))
}

/// Monte Carlo aggregate for one (parameter, mu, rho, R) grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStatistics {
    pub param: TargetParameter,
    pub mu_bar: f64,
    pub rho: f64,
    pub big_r: f64,
    pub p1: f64,
    pub p2: f64,
    pub r: u64,
    pub replications: u64,
    pub cell_seed: u64,
    pub mean_estimate: f64,
    /// Relative MSE for RR/OR, plain MSE for LRR/LOR.
    pub mse_or_relmse: f64,
    pub mean_consumed1: f64,
    pub mean_consumed2: f64,
    pub mean_pairs: f64,
    pub sef: f64,
    pub efficiency: f64,
    pub se_mean: f64,
    pub se_mse: f64,
    pub se_consumed1: f64,
    pub se_consumed2: f64,
    pub se_pairs: f64,
    pub se_sef: f64,
    pub se_efficiency: f64,
}

#[derive(Default)]
struct ChunkAccum {
    n: u64,
    // d is the error in the accuracy metric: (est - theta)/theta for the
    // ratio parameters, est - theta for the logarithmic ones.
    d: CompensatedSum,
    d2: CompensatedSum,
    d4: CompensatedSum,
    pairs_d2: CompensatedSum,
    c1: u64,
    c2: u64,
    pairs: u64,
    c1_sq: u128,
    c2_sq: u128,
    pairs_sq: u128,
    total_sq: u128,
    total_pairs: u128,
    failure: Option<(u64, Error)>,
}

impl ChunkAccum {
    fn merge(&mut self, other: ChunkAccum) {
        self.n += other.n;
        self.d.merge(&other.d);
        self.d2.merge(&other.d2);
        self.d4.merge(&other.d4);
        self.pairs_d2.merge(&other.pairs_d2);
        self.c1 += other.c1;
        self.c2 += other.c2;
        self.pairs += other.pairs;
        self.c1_sq += other.c1_sq;
        self.c2_sq += other.c2_sq;
        self.pairs_sq += other.pairs_sq;
        self.total_sq += other.total_sq;
        self.total_pairs += other.total_pairs;
        if self.failure.is_none() {
            self.failure = other.failure;
        }
    }
}

fn sample_var(sum_sq: f64, mean: f64, n: f64) -> f64 {
    ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
}

/// Runs one grid cell: `replications` independent estimation sessions.
pub fn run_cell(
    param: TargetParameter,
    mu_bar: f64,
    rho: f64,
    big_r: f64,
    replications: u64,
    master_seed: u64,
) -> Result<CellStatistics> {
    let (p1, p2) = resolve_cell(rho, big_r)?;
    run_cell_probs(param, mu_bar, p1, p2, replications, master_seed)
}

/// Same as [`run_cell`] with the population probabilities given directly.
pub fn run_cell_probs(
    param: TargetParameter,
    mu_bar: f64,
    p1: f64,
    p2: f64,
    replications: u64,
    master_seed: u64,
) -> Result<CellStatistics> {
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1".to_string()));
    }
    let model = PopulationModel::new(p1, p2)?;
    let config = EstimatorConfig::new(mu_bar, param)?;
    let theta = true_parameter(param, p1, p2)?;
    let cell_seed = mix(&[
        master_seed,
        param.index(),
        mu_bar.to_bits(),
        p1.to_bits(),
        p2.to_bits(),
    ]);

    let chunks = replications.div_ceil(CHUNK);
    let partials: Vec<ChunkAccum> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(replications);
            let mut acc = ChunkAccum::default();
            for rep in lo..hi {
                let mut session = Session::simulated(model, mix(&[cell_seed, rep]));
                match run_estimation(param, config, &mut session) {
                    Ok(res) => {
                        let d = if param.is_log() {
                            res.estimate - theta
                        } else {
                            (res.estimate - theta) / theta
                        };
                        acc.n += 1;
                        acc.d.add(d);
                        acc.d2.add(d * d);
                        acc.d4.add(d * d * d * d);
                        acc.pairs_d2.add(res.pairs as f64 * d * d);
                        acc.c1 += res.consumed1;
                        acc.c2 += res.consumed2;
                        acc.pairs += res.pairs;
                        acc.c1_sq += (res.consumed1 as u128).pow(2);
                        acc.c2_sq += (res.consumed2 as u128).pow(2);
                        acc.pairs_sq += (res.pairs as u128).pow(2);
                        let total = (res.consumed1 + res.consumed2) as u128;
                        acc.total_sq += total * total;
                        acc.total_pairs += total * res.pairs as u128;
                    }
                    Err(err) => {
                        acc.failure = Some((rep, err));
                        break;
                    }
                }
            }
            acc
        })
        .collect();

    let mut acc = ChunkAccum::default();
    for partial in partials {
        acc.merge(partial);
    }
    if let Some((rep, err)) = acc.failure {
        return Err(Error::NumericFailure(format!("replication {rep} failed: {err}")));
    }

    let n = replications as f64;
    let mean_d = acc.d.total() / n;
    let mse = acc.d2.total() / n;
    let (mean_estimate, se_mean) = {
        let se_d = (sample_var(acc.d2.total(), mean_d, n) / n).sqrt();
        if param.is_log() {
            (theta + mean_d, se_d)
        } else {
            (theta * (1.0 + mean_d), theta.abs() * se_d)
        }
    };
    let se_mse = (sample_var(acc.d4.total(), mse, n) / n).sqrt();

    let mean_c1 = acc.c1 as f64 / n;
    let mean_c2 = acc.c2 as f64 / n;
    let mean_pairs = acc.pairs as f64 / n;
    let se_c1 = (sample_var(acc.c1_sq as f64, mean_c1, n) / n).sqrt();
    let se_c2 = (sample_var(acc.c2_sq as f64, mean_c2, n) / n).sqrt();
    let se_pairs = (sample_var(acc.pairs_sq as f64, mean_pairs, n) / n).sqrt();

    // sef = mean(consumed1 + consumed2) / (2 mean(pairs)); exact integer
    // sums keep the odds-ratio family at 1 identically.
    let sef = (acc.c1 + acc.c2) as f64 / (2 * acc.pairs) as f64;
    let mean_total = (acc.c1 + acc.c2) as f64 / n;
    let var_total = sample_var(acc.total_sq as f64, mean_total, n);
    let var_pairs = sample_var(acc.pairs_sq as f64, mean_pairs, n);
    let cov_total_pairs =
        (acc.total_pairs as f64 - n * mean_total * mean_pairs) / (n - 1.0);
    let var_sef = (var_total + 4.0 * sef * sef * var_pairs
        - 4.0 * sef * cov_total_pairs)
        .max(0.0)
        / (4.0 * mean_pairs * mean_pairs * n);
    let se_sef = var_sef.sqrt();

    let mse_abs = if param.is_log() { mse } else { mse * theta * theta };
    let efficiency = observed_efficiency(param, p1, p2, mean_pairs, mse_abs)?;
    // Delta method on the product mean_pairs * mse.
    let cov_pairs_d2 = (acc.pairs_d2.total() - n * mean_pairs * mse) / (n - 1.0);
    let var_d2 = sample_var(acc.d4.total(), mse, n);
    let var_product = (mean_pairs * mean_pairs * var_d2
        + mse * mse * var_pairs
        + 2.0 * mean_pairs * mse * cov_pairs_d2)
        .max(0.0)
        / n;
    let se_efficiency = efficiency * var_product.sqrt() / (mean_pairs * mse);

    Ok(CellStatistics {
        param,
        mu_bar,
        rho: (p1 * p2).sqrt(),
        big_r: p1 / p2,
        p1,
        p2,
        r: config.r(),
        replications,
        cell_seed,
        mean_estimate,
        mse_or_relmse: mse,
        mean_consumed1: mean_c1,
        mean_consumed2: mean_c2,
        mean_pairs,
        sef,
        efficiency,
        se_mean,
        se_mse,
        se_consumed1: se_c1,
        se_consumed2: se_c2,
        se_pairs,
        se_sef,
        se_efficiency,
    })
}

/// Replication plan over a (mu, rho, R) grid for one parameter.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub param: TargetParameter,
    pub mu_bars: Vec<f64>,
    pub rhos: Vec<f64>,
    pub big_rs: Vec<f64>,
    pub replications: u64,
    pub master_seed: u64,
}

/// One grid row; infeasible or failed cells are recorded in place and
/// never abort the rest of the grid.
#[derive(Debug)]
pub struct GridRow {
    pub param: TargetParameter,
    pub mu_bar: f64,
    pub rho: f64,
    pub big_r: f64,
    pub outcome: Result<CellStatistics>,
}

/// Evaluates all cells in plan order: mu_bars outermost, then rhos, then
/// big_rs. Row order is independent of the execution schedule.
pub fn run_grid(plan: &SimulationPlan) -> Vec<GridRow> {
    let mut rows = Vec::new();
    for &mu_bar in &plan.mu_bars {
        for &rho in &plan.rhos {
            for &big_r in &plan.big_rs {
                let outcome = run_cell(
                    plan.param,
                    mu_bar,
                    rho,
                    big_r,
                    plan.replications,
                    plan.master_seed,
                );
                rows.push(GridRow { param: plan.param, mu_bar, rho, big_r, outcome });
            }
        }
    }
    rows
}
