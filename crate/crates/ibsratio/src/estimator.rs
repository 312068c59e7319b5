//! Two-phase inverse binomial sampling over the transformed Bernoulli
//! stream, and the unbiased point estimators built from the phase lengths.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, EstimationProgress, Result};
use crate::factory::{transform_or, transform_rr, FactoryOutcome};
use crate::numeric::CompensatedSum;
use crate::population::{PairedSampleLedger, PopulationModel};
use crate::rng::FairCoin;

/// Which association measure is estimated. Carries the two constants that
/// parameterize the sampling rule: `alpha` shifts the success/failure
/// targets of the two phases, `c` enters the sample-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetParameter {
    RiskRatio,
    LogRiskRatio,
    OddsRatio,
    LogOddsRatio,
}

impl TargetParameter {
    pub const ALL: [TargetParameter; 4] = [
        TargetParameter::RiskRatio,
        TargetParameter::LogRiskRatio,
        TargetParameter::OddsRatio,
        TargetParameter::LogOddsRatio,
    ];

    pub fn alpha(self) -> u64 {
        match self {
            TargetParameter::RiskRatio | TargetParameter::OddsRatio => 1,
            TargetParameter::LogRiskRatio | TargetParameter::LogOddsRatio => 0,
        }
    }

    pub fn c(self) -> f64 {
        match self {
            TargetParameter::RiskRatio | TargetParameter::OddsRatio => 1.0,
            TargetParameter::LogRiskRatio | TargetParameter::LogOddsRatio => 1.25,
        }
    }

    /// True for the logarithmic parameters, whose accuracy target is plain
    /// MSE rather than relative MSE.
    pub fn is_log(self) -> bool {
        self.alpha() == 0
    }

    /// True for the parameters served by the odds-ratio transform.
    pub fn uses_or_transform(self) -> bool {
        matches!(self, TargetParameter::OddsRatio | TargetParameter::LogOddsRatio)
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetParameter::RiskRatio => "RR",
            TargetParameter::LogRiskRatio => "LRR",
            TargetParameter::OddsRatio => "OR",
            TargetParameter::LogOddsRatio => "LOR",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            TargetParameter::RiskRatio => 0,
            TargetParameter::LogRiskRatio => 1,
            TargetParameter::OddsRatio => 2,
            TargetParameter::LogOddsRatio => 3,
        }
    }
}

impl fmt::Display for TargetParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TargetParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" => Ok(TargetParameter::RiskRatio),
            "lrr" => Ok(TargetParameter::LogRiskRatio),
            "or" => Ok(TargetParameter::OddsRatio),
            "lor" => Ok(TargetParameter::LogOddsRatio),
            other => Err(Error::invalid(format!(
                "unknown parameter {other:?}; expected rr, lrr, or, lor"
            ))),
        }
    }
}

/// Successes threshold guaranteeing the accuracy target: `ceil(1/mu + c)`.
/// Always at least 2.
pub fn required_successes(mu_bar: f64, param: TargetParameter) -> Result<u64> {
    if !mu_bar.is_finite() || mu_bar <= 0.0 {
        return Err(Error::invalid(format!(
            "target accuracy must be positive, got {mu_bar}"
        )));
    }
    Ok((1.0 / mu_bar + param.c()).ceil() as u64)
}

/// Accuracy target plus the successes threshold derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    mu_bar: f64,
    r: u64,
}

impl EstimatorConfig {
    pub fn new(mu_bar: f64, param: TargetParameter) -> Result<Self> {
        Ok(Self { mu_bar, r: required_successes(mu_bar, param)? })
    }

    pub fn mu_bar(&self) -> f64 {
        self.mu_bar
    }

    pub fn r(&self) -> u64 {
        self.r
    }
}

/// k-th harmonic number by compensated summation; `harmonic(0) == 0`.
pub fn harmonic(k: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for j in 1..=k {
        acc.add(1.0 / j as f64);
    }
    acc.total()
}

/// Unbiased point estimate from the two phase lengths.
pub fn point_estimate(param: TargetParameter, r: u64, n_prime: u64, n_dprime: u64) -> Result<f64> {
    let alpha = param.alpha();
    if r < 2 {
        return Err(Error::invalid(format!("successes threshold must be >= 2, got {r}")));
    }
    if n_prime < r + alpha || n_dprime < r - alpha {
        return Err(Error::invalid(format!(
            "phase lengths {n_prime}/{n_dprime} below minimum {}/{}",
            r + alpha,
            r - alpha
        )));
    }
    if param.is_log() {
        Ok(harmonic(n_dprime - 1) - harmonic(n_prime - 1))
    } else {
        Ok((r * n_dprime) as f64 / ((r - 1) * (n_prime - 1)) as f64)
    }
}

/// One run of the full estimation procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    pub n_prime: u64,
    pub n_dprime: u64,
    pub estimate: f64,
    pub consumed1: u64,
    pub consumed2: u64,
    pub pairs: u64,
}

/// A single-session bundle: the pair ledger plus the coin stream feeding
/// the risk-ratio transform. Sessions are independent; any number may run
/// concurrently.
#[derive(Debug, Clone)]
pub struct Session {
    pub ledger: PairedSampleLedger,
    pub coin: FairCoin,
}

impl Session {
    pub fn simulated(model: PopulationModel, seed: u64) -> Self {
        Session {
            ledger: PairedSampleLedger::simulated(model, seed),
            coin: FairCoin::from_seed(seed),
        }
    }

    pub fn replay(bits1: Vec<u8>, bits2: Vec<u8>, seed: u64) -> Self {
        Session {
            ledger: PairedSampleLedger::replay(bits1, bits2),
            coin: FairCoin::from_seed(seed),
        }
    }
}

/// Runs both inverse-binomial-sampling phases and computes the estimate.
/// Phase 1 collects `r + alpha` successes of the transformed stream;
/// phase 2 collects `r - alpha` failures.
pub fn run_estimation(
    param: TargetParameter,
    config: EstimatorConfig,
    session: &mut Session,
) -> Result<EstimationResult> {
    let r = config.r();
    let alpha = param.alpha();
    let mut n_prime = 0u64;
    let mut n_dprime = 0u64;

    let next = |session: &mut Session| -> Result<FactoryOutcome> {
        if param.uses_or_transform() {
            transform_or(&mut session.ledger)
        } else {
            transform_rr(&mut session.ledger, &mut session.coin)
        }
    };

    let attach_progress = |err: Error, phase: u8, n_prime: u64, n_dprime: u64| match err {
        Error::ReplayExhausted { snapshot, .. } => Error::ReplayExhausted {
            snapshot,
            progress: Some(EstimationProgress { phase, n_prime, n_dprime }),
        },
        other => other,
    };

    let mut successes = 0u64;
    while successes < r + alpha {
        let out = next(session).map_err(|e| attach_progress(e, 1, n_prime, n_dprime))?;
        n_prime += 1;
        successes += u64::from(out.y);
    }
    let mut failures = 0u64;
    while failures < r - alpha {
        let out = next(session).map_err(|e| attach_progress(e, 2, n_prime, n_dprime))?;
        n_dprime += 1;
        failures += u64::from(!out.y);
    }

    let counts = session.ledger.counts();
    Ok(EstimationResult {
        n_prime,
        n_dprime,
        estimate: point_estimate(param, r, n_prime, n_dprime)?,
        consumed1: counts.consumed1,
        consumed2: counts.consumed2,
        pairs: counts.pairs_drawn,
    })
}
