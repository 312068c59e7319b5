//! Command implementations and CSV writers.

use std::fs;
use std::path::{Path, PathBuf};

use ibsratio::analysis::{
    bounds_report, efficiency_bound_pmax, efficiency_bound_rho,
    efficiency_lower_bound_r_dependent, expected_pairs_exact, mse_upper_bound,
    sef_lower_bound, true_parameter, transformed_success_probability, BoundsReport,
    JointConsumptionPmf,
};
use ibsratio::error::Error;
use ibsratio::montecarlo::{run_cell_probs, resolve_cell, CellStatistics};
use ibsratio::population::parse_replay;
use ibsratio::{
    required_successes, run_estimation, EstimatorConfig, Session, TargetParameter,
};

/// Failure carrying the process exit code: 1 usage/config, 2 data
/// exhausted, 3 numeric failure.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn usage(message: impl Into<String>) -> Self {
        CmdError { code: 1, message: message.into() }
    }
}

impl From<Error> for CmdError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::ReplayExhausted { .. } => 2,
            Error::NumericFailure(_) => 3,
            Error::InvalidConfig(_) | Error::InfeasibleCell(_) => 1,
        };
        CmdError { code, message: err.to_string() }
    }
}

type CmdResult = Result<(), CmdError>;

pub const SIM_HEADER: &str = "param,mu_bar,r,rho,R,p1,p2,reps,seed,mean_est,true_value,\
err_metric,err_bound,mean_m1,mean_m2,mean_pairs,sef,sef_bound,efficiency,effic_bound,status";

const BOUNDS_HEADER: &str = "param,mu_bar,r,rho,R,p_max,p1,p2,p_transformed,theta_true,\
mse_bound_p_dep,mse_bound_const,vef,exp_consumed1,exp_consumed2,pairs_upper_bound,\
sef_lower_bound,effic_bound_R_dep,effic_bound_R_indep,asympt_bound,asympt_bound_loose,status";

fn write_output(out: Option<&Path>, content: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CmdError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Closed-form columns attached to every simulation row.
struct RowBounds {
    true_value: f64,
    err_bound: f64,
    sef_bound: f64,
    effic_bound: f64,
}

fn row_bounds(param: TargetParameter, r: u64, p1: f64, p2: f64) -> Result<RowBounds, Error> {
    let p = transformed_success_probability(param, p1, p2)?;
    let (err_bound, _) = mse_upper_bound(param, r, p)?;
    let sef_bound = if param.uses_or_transform() {
        1.0
    } else {
        sef_lower_bound(r, param.alpha(), p1, p2)?
    };
    Ok(RowBounds {
        true_value: true_parameter(param, p1, p2)?,
        err_bound,
        sef_bound,
        effic_bound: efficiency_lower_bound_r_dependent(param, r, p1, p2, sef_bound)?,
    })
}

fn sim_row_ok(cell: &CellStatistics) -> Result<String, Error> {
    let b = row_bounds(cell.param, cell.r, cell.p1, cell.p2)?;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},ok",
        cell.param,
        cell.mu_bar,
        cell.r,
        cell.rho,
        cell.big_r,
        cell.p1,
        cell.p2,
        cell.replications,
        cell.cell_seed,
        cell.mean_estimate,
        b.true_value,
        cell.mse_or_relmse,
        b.err_bound,
        cell.mean_consumed1,
        cell.mean_consumed2,
        cell.mean_pairs,
        cell.sef,
        b.sef_bound,
        cell.efficiency,
        b.effic_bound,
    ))
}

fn sim_row_failed(
    param: TargetParameter,
    mu_bar: f64,
    rho: f64,
    big_r: f64,
    reps: u64,
    err: &Error,
) -> String {
    let status = match err {
        Error::InfeasibleCell(_) => "infeasible",
        Error::NumericFailure(_) => "numeric_failure",
        _ => "error",
    };
    format!("{param},{mu_bar},,{rho},{big_r},,,{reps},,,,,,,,,,,,,{status}")
}

fn sim_cell_row(
    param: TargetParameter,
    mu_bar: f64,
    rho: f64,
    big_r: f64,
    reps: u64,
    seed: u64,
) -> Result<String, CmdError> {
    match run_cell_probs_from_grid(param, mu_bar, rho, big_r, reps, seed) {
        Ok(cell) => Ok(sim_row_ok(&cell)?),
        // Infeasible or failed cells become rows, never abort the grid.
        Err(err) => Ok(sim_row_failed(param, mu_bar, rho, big_r, reps, &err)),
    }
}

fn run_cell_probs_from_grid(
    param: TargetParameter,
    mu_bar: f64,
    rho: f64,
    big_r: f64,
    reps: u64,
    seed: u64,
) -> Result<CellStatistics, Error> {
    let (p1, p2) = resolve_cell(rho, big_r)?;
    run_cell_probs(param, mu_bar, p1, p2, reps, seed)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

pub struct EstimateOpts {
    pub param: TargetParameter,
    pub mse: f64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub replay: Option<PathBuf>,
    pub seed: u64,
    pub csv: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_estimate(opts: &EstimateOpts) -> CmdResult {
    let config = EstimatorConfig::new(opts.mse, opts.param).map_err(CmdError::from)?;
    let mut session = match (&opts.replay, opts.p1, opts.p2) {
        (Some(path), None, None) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CmdError::usage(format!("cannot read {}: {e}", path.display()))
            })?;
            let (bits1, bits2) = parse_replay(&text)?;
            Session::replay(bits1, bits2, opts.seed)
        }
        (None, Some(p1), Some(p2)) => {
            let model = ibsratio::PopulationModel::new(p1, p2)?;
            Session::simulated(model, opts.seed)
        }
        _ => {
            return Err(CmdError::usage(
                "estimate needs either --p1 and --p2 (simulated) or --replay FILE",
            ))
        }
    };

    let res = match run_estimation(opts.param, config, &mut session) {
        Ok(res) => res,
        Err(err @ Error::ReplayExhausted { .. }) => {
            if let Error::ReplayExhausted { snapshot, progress } = &err {
                eprintln!("replay data exhausted before the estimation finished");
                if let Some(p) = progress {
                    eprintln!(
                        "  progress: phase {}, n_prime={}, n_dprime={}",
                        p.phase, p.n_prime, p.n_dprime
                    );
                }
                eprintln!(
                    "  ledger: pairs={}, consumed1={}, consumed2={}, surplus=({}, {})",
                    snapshot.pairs_drawn,
                    snapshot.consumed1,
                    snapshot.consumed2,
                    snapshot.surplus1,
                    snapshot.surplus2
                );
            }
            return Err(err.into());
        }
        Err(err) => return Err(err.into()),
    };

    let content = if opts.csv {
        format!(
            "param,mu_bar,r,estimate,n_prime,n_dprime,consumed1,consumed2,pairs\n\
             {},{},{},{},{},{},{},{},{}\n",
            opts.param,
            opts.mse,
            config.r(),
            res.estimate,
            res.n_prime,
            res.n_dprime,
            res.consumed1,
            res.consumed2,
            res.pairs
        )
    } else {
        format!(
            "param={} mu_bar={} r={} estimate={} n_prime={} n_dprime={} \
             consumed1={} consumed2={} pairs={}\n",
            opts.param,
            opts.mse,
            config.r(),
            res.estimate,
            res.n_prime,
            res.n_dprime,
            res.consumed1,
            res.consumed2,
            res.pairs
        )
    };
    write_output(opts.out.as_deref(), &content)
}

// ---------------------------------------------------------------------------
// grids shared by simulate and bounds
// ---------------------------------------------------------------------------

pub struct GridOpts {
    pub param: TargetParameter,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub big_r: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

enum GridPoints {
    RhoR(Vec<(f64, f64)>),
    Probs(Vec<(f64, f64)>),
}

fn grid_points(opts: &GridOpts) -> Result<GridPoints, CmdError> {
    let has_rho = !opts.rho.is_empty() || !opts.big_r.is_empty();
    let has_probs = !opts.p1.is_empty() || !opts.p2.is_empty();
    if opts.mu.is_empty() {
        return Err(CmdError::usage("--mu needs at least one value"));
    }
    match (has_rho, has_probs) {
        (true, false) => {
            if opts.rho.is_empty() || opts.big_r.is_empty() {
                return Err(CmdError::usage("--rho and --R must be given together"));
            }
            let mut cells = Vec::new();
            for &rho in &opts.rho {
                for &big_r in &opts.big_r {
                    cells.push((rho, big_r));
                }
            }
            Ok(GridPoints::RhoR(cells))
        }
        (false, true) => {
            if opts.p1.len() != opts.p2.len() || opts.p1.is_empty() {
                return Err(CmdError::usage(
                    "--p1 and --p2 must be non-empty lists of equal length",
                ));
            }
            Ok(GridPoints::Probs(
                opts.p1.iter().copied().zip(opts.p2.iter().copied()).collect(),
            ))
        }
        (true, true) => Err(CmdError::usage(
            "give either --rho/--R or --p1/--p2, not both",
        )),
        (false, false) => Err(CmdError::usage(
            "a grid needs either --rho/--R or --p1/--p2",
        )),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateOpts {
    pub grid: GridOpts,
    pub reps: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn cmd_simulate(opts: &SimulateOpts) -> CmdResult {
    let param = opts.grid.param;
    let mut lines = vec![SIM_HEADER.to_string()];
    match grid_points(&opts.grid)? {
        GridPoints::RhoR(cells) => {
            for &mu_bar in &opts.grid.mu {
                for &(rho, big_r) in &cells {
                    lines.push(sim_cell_row(param, mu_bar, rho, big_r, opts.reps, opts.seed)?);
                }
            }
        }
        GridPoints::Probs(pairs) => {
            for &mu_bar in &opts.grid.mu {
                for &(p1, p2) in &pairs {
                    let line = match run_cell_probs(param, mu_bar, p1, p2, opts.reps, opts.seed)
                    {
                        Ok(cell) => sim_row_ok(&cell)?,
                        Err(err) => {
                            let rho = (p1 * p2).sqrt();
                            sim_row_failed(param, mu_bar, rho, p1 / p2, opts.reps, &err)
                        }
                    };
                    lines.push(line);
                }
            }
        }
    }
    write_output(opts.out.as_deref(), &(lines.join("\n") + "\n"))
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

pub struct BoundsOpts {
    pub grid: GridOpts,
    pub out: Option<PathBuf>,
}

fn bounds_row(report: &BoundsReport) -> String {
    let rho = (report.p1 * report.p2).sqrt();
    let pairs_ub = report
        .pairs_upper_bound
        .map(|b| b.to_string())
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},ok",
        report.param,
        report.mu_bar,
        report.r,
        rho,
        report.p1 / report.p2,
        report.p1.max(report.p2),
        report.p1,
        report.p2,
        report.p_transformed,
        report.theta_true,
        report.mse_bound_p_dependent,
        report.mse_bound_constant,
        report.vef,
        report.expected_consumed1,
        report.expected_consumed2,
        pairs_ub,
        report.sef_lower_bound,
        report.effic_lower_bound_r_dependent,
        report.effic_lower_bound_r_independent,
        report.asymptotic_bound,
        report.asymptotic_bound_loose,
    )
}

type ResolvedPoint = (Result<(f64, f64), Error>, f64, f64);

pub fn cmd_bounds(opts: &BoundsOpts) -> CmdResult {
    let param = opts.grid.param;
    let mut lines = vec![BOUNDS_HEADER.to_string()];
    let points = grid_points(&opts.grid)?;
    for &mu_bar in &opts.grid.mu {
        let pairs: Vec<ResolvedPoint> = match &points {
            GridPoints::RhoR(cells) => cells
                .iter()
                .map(|&(rho, big_r)| (resolve_cell(rho, big_r), rho, big_r))
                .collect(),
            GridPoints::Probs(ps) => ps
                .iter()
                .map(|&(p1, p2)| (Ok((p1, p2)), (p1 * p2).sqrt(), p1 / p2))
                .collect(),
        };
        for (resolved, rho, big_r) in pairs {
            match resolved {
                Ok((p1, p2)) => {
                    let report = bounds_report(param, mu_bar, p1, p2)?;
                    lines.push(bounds_row(&report));
                }
                Err(_) => {
                    lines.push(format!(
                        "{param},{mu_bar},,{rho},{big_r},,,,,,,,,,,,,,,,,infeasible"
                    ));
                }
            }
        }
    }
    write_output(opts.out.as_deref(), &(lines.join("\n") + "\n"))
}

// ---------------------------------------------------------------------------
// pmf
// ---------------------------------------------------------------------------

pub struct PmfOpts {
    pub param: TargetParameter,
    pub mse: Option<f64>,
    pub successes: Option<u64>,
    pub p1: f64,
    pub p2: f64,
    pub n1: Option<(u64, u64)>,
    pub n2: Option<(u64, u64)>,
    pub expected_pairs: bool,
    pub tail_tol: f64,
    pub out: Option<PathBuf>,
}

pub fn cmd_pmf(opts: &PmfOpts) -> CmdResult {
    if opts.param.uses_or_transform() {
        return Err(CmdError::usage(
            "the joint consumption pmf is only nontrivial for rr and lrr: the \
             odds-ratio transform consumes both populations equally, so \
             consumed1 = consumed2 with a negative-binomial marginal",
        ));
    }
    let r = match (opts.mse, opts.successes) {
        (Some(mse), None) => required_successes(mse, opts.param)?,
        (None, Some(r)) => r,
        _ => return Err(CmdError::usage("give exactly one of --mse or --successes")),
    };
    let alpha = opts.param.alpha();

    let content = if opts.expected_pairs {
        if opts.n1.is_some() || opts.n2.is_some() {
            return Err(CmdError::usage("--expected-pairs does not take an --n1/--n2 window"));
        }
        let bracket = expected_pairs_exact(r, alpha, opts.p1, opts.p2, opts.tail_tol)?;
        format!(
            "r,alpha,p1,p2,tail_tol,lower,upper,width,residual_mass\n{},{},{},{},{},{},{},{},{}\n",
            r,
            alpha,
            opts.p1,
            opts.p2,
            opts.tail_tol,
            bracket.lower,
            bracket.upper,
            bracket.width(),
            bracket.residual_mass
        )
    } else {
        let (Some((n1_lo, n1_hi)), Some((n2_lo, n2_hi))) = (opts.n1, opts.n2) else {
            return Err(CmdError::usage(
                "give an --n1 a:b --n2 c:d window or --expected-pairs",
            ));
        };
        if n1_lo < r + alpha || n2_lo + alpha < r {
            return Err(CmdError::usage(format!(
                "window must start inside the support: n1 >= {}, n2 >= {}",
                r + alpha,
                r - alpha
            )));
        }
        let mut pmf = JointConsumptionPmf::new(r, alpha, opts.p1, opts.p2)?;
        let mut lines = vec!["n1,n2,prob".to_string()];
        for n1 in n1_lo..=n1_hi {
            for n2 in n2_lo..=n2_hi {
                lines.push(format!("{n1},{n2},{}", pmf.prob(n1, n2)?));
            }
        }
        lines.join("\n") + "\n"
    };
    write_output(opts.out.as_deref(), &content)
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

pub struct ReproduceOpts {
    pub figure: String,
    pub reps: u64,
    pub seed: u64,
    pub out: PathBuf,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

const FIGURE_MUS: [f64; 3] = [0.01, 0.04, 0.09];
const FIGURE_RS: [(f64, &str); 3] = [(1.0, "1"), (10.0, "10"), (0.1, "0p1")];
const RHO_POINTS: usize = 20;

fn write_figure_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CmdError> {
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CmdError::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn simulation_figure(
    param: TargetParameter,
    prefix: &str,
    opts: &ReproduceOpts,
) -> Result<Vec<PathBuf>, CmdError> {
    let rhos = log_spaced(1e-3, 1e-1, RHO_POINTS);
    let mut written = Vec::new();
    for (big_r, tag) in FIGURE_RS {
        let mut lines = vec![SIM_HEADER.to_string()];
        for &mu_bar in &FIGURE_MUS {
            for &rho in &rhos {
                lines.push(sim_cell_row(param, mu_bar, rho, big_r, opts.reps, opts.seed)?);
            }
        }
        let name = format!("{prefix}_R{tag}.csv");
        written.push(write_figure_file(&opts.out, &name, &(lines.join("\n") + "\n"))?);
    }
    Ok(written)
}

/// R-specific and R-independent bound curves for one parameter at a fixed
/// accuracy target. The R-specific curves only exist where rho stays below
/// min(sqrt(R), 1/sqrt(R)); infeasible points are skipped.
fn bounds_example_figure(
    param: TargetParameter,
    opts: &ReproduceOpts,
) -> Result<Vec<PathBuf>, CmdError> {
    let mu_bar = 0.04;
    let r = required_successes(mu_bar, param)?;
    let xs = log_spaced(1e-3, 1e-1, RHO_POINTS);
    let ratios = log_spaced(1e-3, 1e3, 25);
    let mut lines = vec!["param,mu_bar,r,rho,p_max,R,bound".to_string()];
    // The R-independent curve lives on the family's native axis: rho for
    // the risk-ratio family, p_max for the odds-ratio family.
    for &x in &xs {
        if param.uses_or_transform() {
            let bound = efficiency_bound_pmax(param, r, x)?;
            lines.push(format!("{param},{mu_bar},{r},,{x},,{bound}"));
        } else {
            let bound = efficiency_bound_rho(param, r, x)?;
            lines.push(format!("{param},{mu_bar},{r},{x},,,{bound}"));
        }
    }
    for &big_r in &ratios {
        for &x in &xs {
            let scale = big_r.sqrt().min(1.0 / big_r.sqrt());
            let (rho, p_max) = if param.uses_or_transform() {
                (x * scale, x)
            } else {
                (x, x / scale)
            };
            let Ok((p1, p2)) = resolve_cell(rho, big_r) else { continue };
            let sef = if param.uses_or_transform() {
                1.0
            } else {
                sef_lower_bound(r, param.alpha(), p1, p2)?
            };
            let bound = efficiency_lower_bound_r_dependent(param, r, p1, p2, sef)?;
            lines.push(format!("{param},{mu_bar},{r},{rho},{p_max},{big_r},{bound}"));
        }
    }
    let name = format!("bounds_example_{param}.csv");
    Ok(vec![write_figure_file(&opts.out, &name, &(lines.join("\n") + "\n"))?])
}

fn indep_bound_figure(
    params: [TargetParameter; 2],
    name: &str,
    opts: &ReproduceOpts,
) -> Result<Vec<PathBuf>, CmdError> {
    let xs = log_spaced(1e-3, 1e-1, RHO_POINTS);
    let or_family = params[0].uses_or_transform();
    let axis = if or_family { "p_max" } else { "rho" };
    let mut lines = vec![format!("param,mu_bar,r,{axis},bound")];
    for param in params {
        for &mu_bar in &FIGURE_MUS {
            let r = required_successes(mu_bar, param)?;
            for &x in &xs {
                let bound = if or_family {
                    efficiency_bound_pmax(param, r, x)?
                } else {
                    efficiency_bound_rho(param, r, x)?
                };
                lines.push(format!("{param},{mu_bar},{r},{x},{bound}"));
            }
        }
    }
    Ok(vec![write_figure_file(&opts.out, name, &(lines.join("\n") + "\n"))?])
}

pub fn cmd_reproduce(opts: &ReproduceOpts) -> CmdResult {
    fs::create_dir_all(&opts.out)
        .map_err(|e| CmdError::usage(format!("cannot create {}: {e}", opts.out.display())))?;
    use TargetParameter::*;
    let written = match opts.figure.as_str() {
        "sef-rr" => simulation_figure(RiskRatio, "sef_RR", opts)?,
        "effic-rr" => simulation_figure(RiskRatio, "effic_RR", opts)?,
        "effic-lrr" => simulation_figure(LogRiskRatio, "effic_LRR", opts)?,
        "effic-or" => simulation_figure(OddsRatio, "effic_OR", opts)?,
        "effic-lor" => simulation_figure(LogOddsRatio, "effic_LOR", opts)?,
        "bounds-rr-lrr-example" => {
            let mut files = bounds_example_figure(RiskRatio, opts)?;
            files.extend(bounds_example_figure(LogRiskRatio, opts)?);
            files
        }
        "bounds-or-lor-example" => {
            let mut files = bounds_example_figure(OddsRatio, opts)?;
            files.extend(bounds_example_figure(LogOddsRatio, opts)?);
            files
        }
        "bound-rr-lrr" => {
            indep_bound_figure([RiskRatio, LogRiskRatio], "bound_RR_LRR.csv", opts)?
        }
        "bound-or-lor" => {
            indep_bound_figure([OddsRatio, LogOddsRatio], "bound_OR_LOR.csv", opts)?
        }
        other => {
            return Err(CmdError::usage(format!(
                "unknown figure id {other:?}; expected one of sef-rr, effic-rr, effic-lrr, \
                 effic-or, effic-lor, bounds-rr-lrr-example, bound-rr-lrr, \
                 bounds-or-lor-example, bound-or-lor"
            )))
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
