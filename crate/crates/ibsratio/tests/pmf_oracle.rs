//! Checks the closed-form joint consumption pmf against an exhaustive
//! enumeration of every input sequence the procedure can consume.
//!
//! The oracle walks the 4-ary tree of draw outcomes (failure/success from
//! either population) through both sampling phases, multiplying branch
//! probabilities, and accrues the probability of each terminal consumption
//! pair. It shares no code with the pmf under test.

use std::collections::HashMap;

use ibsratio::analysis::JointConsumptionPmf;

struct PathOracle {
    r: u64,
    alpha: u64,
    p1: f64,
    p2: f64,
    max_total: u64,
    mass: HashMap<(u64, u64), f64>,
}

impl PathOracle {
    fn run(r: u64, alpha: u64, p1: f64, p2: f64, max_total: u64) -> HashMap<(u64, u64), f64> {
        let mut oracle = PathOracle { r, alpha, p1, p2, max_total, mass: HashMap::new() };
        oracle.explore(0, 0, 1, 0, 1.0);
        oracle.mass
    }

    /// `phase` is 1 or 2; `k` counts phase-1 successes or phase-2 failures.
    fn explore(&mut self, n1: u64, n2: u64, phase: u8, k: u64, prob: f64) {
        if n1 + n2 >= self.max_total {
            return;
        }
        // Non-event from either population keeps the state.
        self.explore(n1 + 1, n2, phase, k, prob * (1.0 - self.p1) / 2.0);
        self.explore(n1, n2 + 1, phase, k, prob * (1.0 - self.p2) / 2.0);
        // Event from population 1 emits Y = 1.
        let p_succ1 = prob * self.p1 / 2.0;
        if phase == 1 {
            if k + 1 == self.r + self.alpha {
                self.explore(n1 + 1, n2, 2, 0, p_succ1);
            } else {
                self.explore(n1 + 1, n2, 1, k + 1, p_succ1);
            }
        } else {
            self.explore(n1 + 1, n2, 2, k, p_succ1);
        }
        // Event from population 2 emits Y = 0.
        let p_succ2 = prob * self.p2 / 2.0;
        if phase == 1 {
            self.explore(n1, n2 + 1, 1, k, p_succ2);
        } else if k + 1 == self.r - self.alpha {
            *self.mass.entry((n1, n2 + 1)).or_insert(0.0) += p_succ2;
        } else {
            self.explore(n1, n2 + 1, 2, k + 1, p_succ2);
        }
    }
}

fn compare(r: u64, alpha: u64, p1: f64, p2: f64, max_total: u64, rel_tol: f64) {
    let oracle = PathOracle::run(r, alpha, p1, p2, max_total);
    for &(n1, n2) in oracle.keys() {
        assert!(n1 >= r + alpha && n2 >= r - alpha, "mass outside support at ({n1},{n2})");
    }
    let mut pmf = JointConsumptionPmf::new(r, alpha, p1, p2).unwrap();
    let mut cells = 0;
    for n1 in (r + alpha)..=max_total {
        for n2 in (r - alpha)..=(max_total - n1) {
            let got = pmf.prob(n1, n2).unwrap();
            let want = oracle.get(&(n1, n2)).copied().unwrap_or(0.0);
            assert!(want > 0.0, "oracle missing support cell ({n1},{n2})");
            let rel = (got - want).abs() / want;
            assert!(
                rel <= rel_tol,
                "pmf({n1},{n2}) = {got:e}, oracle {want:e}, rel err {rel:e}"
            );
            cells += 1;
        }
    }
    assert!(cells > 0);
}

#[test]
fn pmf_matches_path_enumeration_alpha_one() {
    compare(2, 1, 0.25, 0.4, 12, 1e-10);
}

#[test]
fn pmf_matches_path_enumeration_alpha_zero() {
    compare(2, 0, 0.25, 0.4, 12, 1e-10);
}

#[test]
fn pmf_matches_path_enumeration_r_three() {
    compare(3, 1, 0.3, 0.35, 12, 1e-10);
}
