//! Closed-form layer: transformed probabilities, true parameter values,
//! inner-loop moments, the exact joint consumption distribution with a
//! rigorously bracketed expected pair count, and every accuracy and
//! efficiency bound used by the harness.
//!
//! Everything here is pure: identical inputs give bit-identical outputs.

use crate::error::{Error, Result};
use crate::estimator::{required_successes, TargetParameter};
use crate::numeric::CompensatedSum;

const LN_2: f64 = std::f64::consts::LN_2;

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::invalid(format!("{name} must lie in (0,1), got {p}")));
    }
    Ok(())
}

fn check_r(r: u64) -> Result<()> {
    if r < 2 {
        return Err(Error::invalid(format!("successes threshold must be >= 2, got {r}")));
    }
    Ok(())
}

fn check_alpha(r: u64, alpha: u64) -> Result<()> {
    check_r(r)?;
    if alpha > 1 {
        return Err(Error::invalid(format!("alpha must be 0 or 1, got {alpha}")));
    }
    Ok(())
}

/// Success probability of the transformed Bernoulli stream.
pub fn transformed_success_probability(
    param: TargetParameter,
    p1: f64,
    p2: f64,
) -> Result<f64> {
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    Ok(if param.uses_or_transform() {
        let w1 = p1 * (1.0 - p2);
        let w2 = p2 * (1.0 - p1);
        w1 / (w1 + w2)
    } else {
        p1 / (p1 + p2)
    })
}

/// True value of the estimated parameter at (p1, p2).
pub fn true_parameter(param: TargetParameter, p1: f64, p2: f64) -> Result<f64> {
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let ratio = match param {
        TargetParameter::RiskRatio | TargetParameter::LogRiskRatio => p1 / p2,
        TargetParameter::OddsRatio | TargetParameter::LogOddsRatio => {
            p1 * (1.0 - p2) / (p2 * (1.0 - p1))
        }
    };
    Ok(if param.is_log() { ratio.ln() } else { ratio })
}

/// Moments of the per-run consumption of one transform invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerLoopMoments {
    /// Risk-ratio transform: consumption depends on the output bit.
    RrTransform {
        e_n1_given_one: f64,
        e_n1_given_zero: f64,
        e_n2_given_one: f64,
        e_n2_given_zero: f64,
        e_n: f64,
        var_diff_given_y: f64,
    },
    /// Odds-ratio transform: both populations are consumed equally and
    /// independently of the output.
    OrTransform { e_n: f64 },
}

pub fn inner_loop_moments(param: TargetParameter, p1: f64, p2: f64) -> Result<InnerLoopMoments> {
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    if param.uses_or_transform() {
        Ok(InnerLoopMoments::OrTransform {
            e_n: 1.0 / (p1 * (1.0 - p2) + p2 * (1.0 - p1)),
        })
    } else {
        let s = p1 + p2;
        Ok(InnerLoopMoments::RrTransform {
            e_n1_given_one: (1.0 + p2) / s,
            e_n1_given_zero: (1.0 - p1) / s,
            e_n2_given_one: (1.0 - p2) / s,
            e_n2_given_zero: (1.0 + p1) / s,
            e_n: 1.0 / s,
            var_diff_given_y: 2.0 * (p1 * (1.0 - p2) + p2 * (1.0 - p1)) / (s * s),
        })
    }
}

/// Guaranteed (relative) MSE bounds: the p-dependent bound and the constant
/// bound it strictly improves on.
pub fn mse_upper_bound(param: TargetParameter, r: u64, p: f64) -> Result<(f64, f64)> {
    check_r(r)?;
    check_prob("p", p)?;
    let rf = r as f64;
    if param.is_log() {
        let p_dep = (rf * rf - rf / 4.0 - 0.25) / ((rf - 1.0 + p) * (rf - p) * (rf - 0.5))
            - (p * (1.0 - p) / ((rf - 0.5) * (rf - 0.5))) * (1.0 - 1.0 / (2.0 * rf - 3.0));
        Ok((p_dep, 1.0 / (rf - 1.25)))
    } else {
        let p_dep = (1.0 / (rf - 1.0)) * (1.0 - p * (1.0 - p) / (rf - 1.0 + 2.0 * p));
        Ok((p_dep, 1.0 / (rf - 1.0)))
    }
}

/// Ratio of the p-dependent MSE bound to the constant bound; lies in (0,1).
pub fn variance_efficiency_factor(param: TargetParameter, r: u64, p: f64) -> Result<f64> {
    check_r(r)?;
    check_prob("p", p)?;
    let rf = r as f64;
    Ok(if param.is_log() {
        (rf * rf - rf / 4.0 - 0.25) * (rf - 1.25) / ((rf - 1.0 + p) * (rf - p) * (rf - 0.5))
            - p * (1.0 - p) * (rf - 2.0) * (rf - 1.25)
                / ((rf - 0.5) * (rf - 0.5) * (rf - 1.5))
    } else {
        1.0 - p * (1.0 - p) / (rf - 1.0 + 2.0 * p)
    })
}

/// Expected observations consumed from each population by one estimation.
/// Both populations have the same expectation.
pub fn expected_consumption(
    param: TargetParameter,
    r: u64,
    p1: f64,
    p2: f64,
) -> Result<(f64, f64)> {
    check_r(r)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let a = param.alpha() as f64;
    let rf = r as f64;
    let e = if param.uses_or_transform() {
        (rf + a) / (p1 * (1.0 - p2)) + (rf - a) / (p2 * (1.0 - p1))
    } else {
        (rf + a) / p1 + (rf - a) / p2
    };
    Ok((e, e))
}

/// Upper bound on the expected number of pairs for the risk-ratio family.
pub fn pairs_upper_bound(r: u64, alpha: u64, p1: f64, p2: f64) -> Result<f64> {
    check_alpha(r, alpha)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let (rf, a) = (r as f64, alpha as f64);
    Ok((rf + a) / p1 + (rf - a) / p2 + ((rf + a) / (2.0 * p1) + (rf - a) / (2.0 * p2)).sqrt())
}

/// Lower bound on the sampling efficiency factor for the risk-ratio family.
/// The odds-ratio family consumes inputs in pairs, so its factor is 1.
pub fn sef_lower_bound(r: u64, alpha: u64, p1: f64, p2: f64) -> Result<f64> {
    check_alpha(r, alpha)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let (rf, a) = (r as f64, alpha as f64);
    Ok(1.0 / (1.0 + (p1 * p2 / (2.0 * ((rf + a) * p2 + (rf - a) * p1))).sqrt()))
}

/// ln(n!) built by compensated cumulative summation; exact at integer
/// arguments to double precision for every n reachable here.
struct LnFactorial {
    table: Vec<f64>,
    acc: CompensatedSum,
}

// Guards the ln-factorial table against absurd consumption counts.
const MAX_COUNT: u64 = 4_000_000;

impl LnFactorial {
    fn new() -> Self {
        Self { table: vec![0.0], acc: CompensatedSum::new() }
    }

    fn ensure(&mut self, n: u64) -> Result<()> {
        if n > MAX_COUNT {
            return Err(Error::NumericFailure(format!(
                "consumption count {n} exceeds supported maximum {MAX_COUNT}"
            )));
        }
        while self.table.len() <= n as usize {
            self.acc.add((self.table.len() as f64).ln());
            self.table.push(self.acc.total());
        }
        Ok(())
    }

    #[inline]
    fn get(&self, n: u64) -> f64 {
        self.table[n as usize]
    }
}

/// Evaluator for the exact joint probability of the per-population
/// consumption counts of the risk-ratio family. Caches the log-factorial
/// table across evaluations.
pub struct JointConsumptionPmf {
    r: u64,
    alpha: u64,
    ln_p1: f64,
    ln_p2: f64,
    ln_q1: f64,
    ln_q2: f64,
    lnf: LnFactorial,
}

impl JointConsumptionPmf {
    pub fn new(r: u64, alpha: u64, p1: f64, p2: f64) -> Result<Self> {
        check_alpha(r, alpha)?;
        check_prob("p1", p1)?;
        check_prob("p2", p2)?;
        Ok(Self {
            r,
            alpha,
            ln_p1: p1.ln(),
            ln_p2: p2.ln(),
            ln_q1: (1.0 - p1).ln(),
            ln_q2: (1.0 - p2).ln(),
            lnf: LnFactorial::new(),
        })
    }

    /// P[consumed1 = n1, consumed2 = n2]; zero outside the support
    /// n1 >= r+alpha, n2 >= r-alpha.
    ///
    /// The double sum runs over the two phase lengths compatible with
    /// (n1, n2). Every term is nonnegative, so per-term exponentiation of
    /// the log-space coefficient product sums without cancellation.
    pub fn prob(&mut self, n1: u64, n2: u64) -> Result<f64> {
        let (r, a) = (self.r, self.alpha);
        if n1 < r + a || n2 < r - a {
            return Ok(0.0);
        }
        self.lnf.ensure(n1 + n2)?;
        let base = n1 as f64 * self.ln_q1 + n2 as f64 * self.ln_q2
            - ((n1 + n2) as f64) * LN_2
            + self.lnf.get(n1 + n2 - 1);
        let mut sum = CompensatedSum::new();
        for n_prime in (r + a)..=(n2 + 2 * a) {
            for n_dprime in (r - a)..=(n1 - 2 * a) {
                let fail1 = n1 - n_dprime - 2 * a;
                let fail2 = n2 + 2 * a - n_prime;
                let succ = n_prime + n_dprime - 1;
                let ln_term = base
                    - self.lnf.get(fail1)
                    - self.lnf.get(fail2)
                    - self.lnf.get(succ)
                    + self.lnf.get(n_prime - 1)
                    - self.lnf.get(r + a - 1)
                    - self.lnf.get(n_prime - r - a)
                    + self.lnf.get(n_dprime - 1)
                    - self.lnf.get(r - a - 1)
                    - self.lnf.get(n_dprime + a - r)
                    + (n_dprime + 2 * a) as f64 * (self.ln_p1 - self.ln_q1)
                    + (n_prime - 2 * a) as f64 * (self.ln_p2 - self.ln_q2);
                sum.add(ln_term.exp());
            }
        }
        Ok(sum.total())
    }
}

/// Single evaluation of the joint consumption pmf (risk-ratio family).
pub fn joint_consumption_pmf(
    r: u64,
    alpha: u64,
    p1: f64,
    p2: f64,
    n1: u64,
    n2: u64,
) -> Result<f64> {
    if n1 < r + alpha || n2 < r.saturating_sub(alpha) {
        return Err(Error::invalid(format!(
            "({n1}, {n2}) is outside the support n1 >= {}, n2 >= {}",
            r + alpha,
            r - alpha
        )));
    }
    JointConsumptionPmf::new(r, alpha, p1, p2)?.prob(n1, n2)
}

/// Exact-series value with a rigorous truncation bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfBracket {
    pub lower: f64,
    pub upper: f64,
    pub residual_mass: f64,
}

impl PmfBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

// Shell cap for the expected-pairs series; the series converges
// geometrically, so hitting this means the inputs are impractical.
const SHELL_LIMIT: u64 = 4_000;

/// Expected number of pairs for the risk-ratio family, as a two-sided
/// bracket around the exact series value.
///
/// Shells are enumerated by m = max(n1, n2) ascending. The reported lower
/// bound is the partial sum of m-weighted shell masses; the upper bound
/// adds the un-enumerated remainder of E[consumed1] + E[consumed2], which
/// dominates the tail because max(n1, n2) <= n1 + n2.
pub fn expected_pairs_exact(
    r: u64,
    alpha: u64,
    p1: f64,
    p2: f64,
    tail_tol: f64,
) -> Result<PmfBracket> {
    if !tail_tol.is_finite() || tail_tol <= 0.0 {
        return Err(Error::invalid(format!("tail tolerance must be positive, got {tail_tol}")));
    }
    let mut pmf = JointConsumptionPmf::new(r, alpha, p1, p2)?;
    let (rf, a) = (r as f64, alpha as f64);
    let expected_each = (rf + a) / p1 + (rf - a) / p2;
    let expected_sum = 2.0 * expected_each;

    let mut lower = CompensatedSum::new();
    let mut consumed = CompensatedSum::new();
    let mut mass = CompensatedSum::new();
    for m in (r + alpha)..(r + alpha + SHELL_LIMIT) {
        for n1 in (r + alpha)..=m {
            let p = pmf.prob(n1, m)?;
            mass.add(p);
            lower.add(m as f64 * p);
            consumed.add((n1 + m) as f64 * p);
        }
        for n2 in (r - alpha)..m {
            let p = pmf.prob(m, n2)?;
            mass.add(p);
            lower.add(m as f64 * p);
            consumed.add((m + n2) as f64 * p);
        }
        let tail = (expected_sum - consumed.total()).max(0.0);
        if tail <= tail_tol {
            let lo = lower.total();
            return Ok(PmfBracket {
                lower: lo,
                upper: lo + tail,
                residual_mass: (1.0 - mass.total()).clamp(0.0, 1.0),
            });
        }
    }
    Err(Error::NumericFailure(format!(
        "expected-pairs series did not reach tolerance {tail_tol} within {SHELL_LIMIT} shells"
    )))
}

/// Numerator of the efficiency ratio: the Fisher-information-weighted
/// squared sensitivity of the parameter to (p1, p2).
pub fn cramer_rao_numerator(param: TargetParameter, p1: f64, p2: f64) -> Result<f64> {
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    let theta = true_parameter(param, p1, p2)?;
    Ok(match param {
        TargetParameter::RiskRatio => theta * theta * (1.0 / p1 + 1.0 / p2 - 2.0),
        TargetParameter::LogRiskRatio => 1.0 / p1 + 1.0 / p2 - 2.0,
        TargetParameter::OddsRatio => {
            theta * theta * (1.0 / (p1 * (1.0 - p1)) + 1.0 / (p2 * (1.0 - p2)))
        }
        TargetParameter::LogOddsRatio => {
            1.0 / (p1 * (1.0 - p1)) + 1.0 / (p2 * (1.0 - p2))
        }
    })
}

/// Efficiency of an estimator observed to spend `mean_pairs` pairs for an
/// (absolute) error variance `mse`.
pub fn observed_efficiency(
    param: TargetParameter,
    p1: f64,
    p2: f64,
    mean_pairs: f64,
    mse: f64,
) -> Result<f64> {
    if !(mean_pairs.is_finite() && mean_pairs > 0.0) {
        return Err(Error::invalid(format!("mean_pairs must be positive, got {mean_pairs}")));
    }
    if !(mse.is_finite() && mse > 0.0) {
        return Err(Error::invalid(format!("mse must be positive, got {mse}")));
    }
    Ok(cramer_rao_numerator(param, p1, p2)? / (mean_pairs * mse))
}

/// Lower efficiency bound at known (p1, p2). Pass `sef_lower_bound` for a
/// fully closed-form bound in the risk-ratio family, or 1 for the
/// odds-ratio family whose sampling efficiency factor is exactly 1.
pub fn efficiency_lower_bound_r_dependent(
    param: TargetParameter,
    r: u64,
    p1: f64,
    p2: f64,
    sef_value: f64,
) -> Result<f64> {
    check_r(r)?;
    check_prob("p1", p1)?;
    check_prob("p2", p2)?;
    if !(sef_value > 0.0 && sef_value <= 1.0) {
        return Err(Error::invalid(format!("sef must lie in (0,1], got {sef_value}")));
    }
    let (rf, a, c) = (r as f64, param.alpha() as f64, param.c());
    let p = transformed_success_probability(param, p1, p2)?;
    let vef = variance_efficiency_factor(param, r, p)?;
    let ratio = if param.uses_or_transform() {
        (p1 * (1.0 - p1) + p2 * (1.0 - p2)) * (rf - c)
            / ((rf + a) * p2 * (1.0 - p1) + (rf - a) * p1 * (1.0 - p2))
    } else {
        (p2 * (1.0 - p1) + p1 * (1.0 - p2)) * (rf - c) / ((rf + a) * p2 + (rf - a) * p1)
    };
    Ok(ratio * sef_value / vef)
}

/// R-independent efficiency bound for the risk-ratio family, as a function
/// of rho = sqrt(p1 p2) alone.
pub fn efficiency_bound_rho(param: TargetParameter, r: u64, rho: f64) -> Result<f64> {
    if param.uses_or_transform() {
        return Err(Error::invalid(
            "the rho-parameterized bound applies to RR and LRR only".to_string(),
        ));
    }
    check_r(r)?;
    check_prob("rho", rho)?;
    let (rf, a, c) = (r as f64, param.alpha() as f64, param.c());
    let quarter_root = (rf * rf - a * a).powf(0.25);
    Ok((rf - c) / (rf + a)
        * ((rf - (a * a + rho * rho * (rf * rf - a * a)).sqrt()) / (rf - a))
        * (2.0 * quarter_root / (2.0 * quarter_root + rho.sqrt())))
}

/// R-independent efficiency bound for the odds-ratio family, as a function
/// of p_max = max(p1, p2) alone.
pub fn efficiency_bound_pmax(param: TargetParameter, r: u64, p_max: f64) -> Result<f64> {
    if !param.uses_or_transform() {
        return Err(Error::invalid(
            "the p_max-parameterized bound applies to OR and LOR only".to_string(),
        ));
    }
    check_r(r)?;
    check_prob("p_max", p_max)?;
    let (rf, a, c) = (r as f64, param.alpha() as f64, param.c());
    Ok((rf - c) / (rf + a) * (1.0 - p_max))
}

/// Small-probability efficiency limits: the exact limit `(r-c)/(r+alpha)`
/// and the looser closed form `1/(1 + mu (c+alpha))`.
pub fn asymptotic_efficiency_bound(param: TargetParameter, mu_bar: f64) -> Result<(f64, f64)> {
    let r = required_successes(mu_bar, param)? as f64;
    let (a, c) = (param.alpha() as f64, param.c());
    Ok(((r - c) / (r + a), 1.0 / (1.0 + mu_bar * (c + a))))
}

/// Feasible risk-ratio interval for a given rho when p_max < p_sup.
pub fn rr_feasible_interval(rho: f64, p_sup: f64) -> Result<(f64, f64)> {
    check_prob("rho", rho)?;
    if !(p_sup > 0.0 && p_sup <= 1.0) {
        return Err(Error::invalid(format!("p_sup must lie in (0,1], got {p_sup}")));
    }
    if rho >= p_sup {
        return Err(Error::invalid(format!("rho {rho} must be below p_sup {p_sup}")));
    }
    let ratio = p_sup * p_sup / (rho * rho);
    Ok((1.0 / ratio, ratio))
}

/// Every closed-form quantity the `bounds` command reports for one grid
/// point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub param: TargetParameter,
    pub mu_bar: f64,
    pub r: u64,
    pub p1: f64,
    pub p2: f64,
    pub p_transformed: f64,
    pub theta_true: f64,
    pub mse_bound_p_dependent: f64,
    pub mse_bound_constant: f64,
    pub vef: f64,
    pub expected_consumed1: f64,
    pub expected_consumed2: f64,
    /// Risk-ratio family only; the odds-ratio family needs no bound because
    /// its pair count equals the per-population consumption exactly.
    pub pairs_upper_bound: Option<f64>,
    pub sef_lower_bound: f64,
    pub effic_lower_bound_r_dependent: f64,
    pub effic_lower_bound_r_independent: f64,
    pub asymptotic_bound: f64,
    pub asymptotic_bound_loose: f64,
}

pub fn bounds_report(
    param: TargetParameter,
    mu_bar: f64,
    p1: f64,
    p2: f64,
) -> Result<BoundsReport> {
    let r = required_successes(mu_bar, param)?;
    let alpha = param.alpha();
    let p = transformed_success_probability(param, p1, p2)?;
    let (mse_p, mse_const) = mse_upper_bound(param, r, p)?;
    let (e1, e2) = expected_consumption(param, r, p1, p2)?;
    let (sef_lb, pairs_ub) = if param.uses_or_transform() {
        (1.0, None)
    } else {
        (
            sef_lower_bound(r, alpha, p1, p2)?,
            Some(pairs_upper_bound(r, alpha, p1, p2)?),
        )
    };
    let r_indep = if param.uses_or_transform() {
        efficiency_bound_pmax(param, r, p1.max(p2))?
    } else {
        efficiency_bound_rho(param, r, (p1 * p2).sqrt())?
    };
    let (asym, asym_loose) = asymptotic_efficiency_bound(param, mu_bar)?;
    Ok(BoundsReport {
        param,
        mu_bar,
        r,
        p1,
        p2,
        p_transformed: p,
        theta_true: true_parameter(param, p1, p2)?,
        mse_bound_p_dependent: mse_p,
        mse_bound_constant: mse_const,
        vef: variance_efficiency_factor(param, r, p)?,
        expected_consumed1: e1,
        expected_consumed2: e2,
        pairs_upper_bound: pairs_ub,
        sef_lower_bound: sef_lb,
        effic_lower_bound_r_dependent: efficiency_lower_bound_r_dependent(
            param, r, p1, p2, sef_lb,
        )?,
        effic_lower_bound_r_independent: r_indep,
        asymptotic_bound: asym,
        asymptotic_bound_loose: asym_loose,
    })
}
