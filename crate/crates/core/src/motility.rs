//! Motility functions `gamma` with `gamma(0) = 0`, `gamma > 0` on `(0, inf)`
//! and a continuous derivative.
//!
//! Three kinds are supported: a single power `s^alpha`, a linear combination
//! of powers, and a tabulated function with an explicit derivative table
//! (evaluated by cubic Hermite interpolation, whose derivative is the exact
//! derivative of the interpolant). Tables are never differentiated
//! numerically.
//!
//! Tables are only defined on their tabulated range; evaluating beyond the
//! last knot is an error. Analytic kinds are defined on all of `[0, inf)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniform samples used by admissibility checks and by scans for
/// suprema when no closed form exists.
pub const SCAN_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    s: Vec<f64>,
    gamma: Vec<f64>,
    gamma_prime: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MotilitySpec {
    Power { alpha: f64 },
    Combination { terms: Vec<PowerTerm> },
    Table(Table),
}

impl MotilitySpec {
    pub fn power(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MotilitySpec::Power { alpha })
    }

    /// `gamma(s) = sum coef_i s^alpha_i`. Positivity is checked on `[0, 1]`;
    /// call [`MotilitySpec::check_admissible`] for wider ranges.
    pub fn combination(terms: Vec<PowerTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidMotility("combination has no terms".into()));
        }
        for t in &terms {
            check_alpha(t.alpha)?;
            if !t.coef.is_finite() {
                return Err(Error::InvalidMotility(format!("non-finite coefficient {}", t.coef)));
            }
        }
        let m = MotilitySpec::Combination { terms };
        m.check_admissible(1.0)?;
        Ok(m)
    }

    pub fn table(s: Vec<f64>, gamma: Vec<f64>, gamma_prime: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != gamma.len() || s.len() != gamma_prime.len() {
            return Err(Error::InvalidMotility(format!(
                "table needs at least two rows and equal column lengths (got {}, {}, {})",
                s.len(),
                gamma.len(),
                gamma_prime.len()
            )));
        }
        if s[0] != 0.0 {
            return Err(Error::InvalidMotility(format!("table must start at s = 0, starts at {}", s[0])));
        }
        if gamma[0] != 0.0 {
            return Err(Error::InvalidMotility(format!(
                "gamma(0) = {} but a degenerate motility needs gamma(0) = 0",
                gamma[0]
            )));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMotility("table abscissae must be strictly increasing".into()));
        }
        if s.iter().chain(&gamma).chain(&gamma_prime).any(|x| !x.is_finite()) {
            return Err(Error::InvalidMotility("table contains non-finite entries".into()));
        }
        let s_max = *s.last().unwrap();
        let m = MotilitySpec::Table(Table { s, gamma, gamma_prime });
        m.check_admissible(s_max)?;
        Ok(m)
    }

    /// Reads a table with columns `s, gamma, gamma_prime` (header row required).
    pub fn from_table_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let (mut s, mut g, mut gp) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Format {
                        path: path.to_path_buf(),
                        message: format!("row {}: expected 3 columns", i + 2),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Format {
                        path: path.to_path_buf(),
                        message: format!("row {}: {e}", i + 2),
                    })
            };
            s.push(parse(0)?);
            g.push(parse(1)?);
            gp.push(parse(2)?);
        }
        Self::table(s, g, gp)
    }

    /// Upper end of the range on which the spec is defined.
    pub fn domain_max(&self) -> f64 {
        match self {
            MotilitySpec::Table(t) => *t.s.last().unwrap(),
            _ => f64::INFINITY,
        }
    }

    /// Checks `gamma(0) = 0`, positivity and finiteness of `gamma'` on
    /// [`SCAN_SAMPLES`] uniform points of `[0, s_max]`.
    pub fn check_admissible(&self, s_max: f64) -> Result<()> {
        if !(s_max >= 0.0) || !s_max.is_finite() {
            return Err(Error::InvalidMotility(format!("bad sampling range [0, {s_max}]")));
        }
        if s_max > self.domain_max() {
            return Err(Error::OutOfTableRange {
                s: s_max,
                max: self.domain_max(),
            });
        }
        let g0 = self.raw_gamma(0.0);
        if g0 != 0.0 {
            return Err(Error::InvalidMotility(format!(
                "gamma(0) = {g0}; only degenerate motilities with gamma(0) = 0 are supported"
            )));
        }
        if s_max == 0.0 {
            return Ok(());
        }
        let step = s_max / (SCAN_SAMPLES - 1) as f64;
        for k in 0..SCAN_SAMPLES {
            let s = k as f64 * step;
            let (g, gp) = (self.raw_gamma(s), self.raw_gamma_prime(s));
            if !g.is_finite() || !gp.is_finite() {
                return Err(Error::InvalidMotility(format!("gamma or gamma' not finite at s = {s}")));
            }
            if k > 0 && g <= 0.0 {
                return Err(Error::InvalidMotility(format!(
                    "gamma({s}) = {g} but gamma must be positive on (0, inf)"
                )));
            }
        }
        Ok(())
    }

    pub fn eval_gamma(&self, s: f64) -> Result<f64> {
        self.check_arg(s)?;
        Ok(self.raw_gamma(s))
    }

    pub fn eval_gamma_prime(&self, s: f64) -> Result<f64> {
        self.check_arg(s)?;
        Ok(self.raw_gamma_prime(s))
    }

    /// `gamma` at `s` clamped into the domain. Used in hot loops where the
    /// argument is already known to lie in `[0, V]` up to round-off.
    pub(crate) fn gamma_clamped(&self, s: f64) -> f64 {
        self.raw_gamma(s.clamp(0.0, self.domain_max()))
    }

    /// `sup |gamma'|` over `[0, v_max]`.
    ///
    /// Closed form for powers and for combinations with nonnegative
    /// coefficients (where `gamma'` is nondecreasing); otherwise a
    /// uniform scan refined by golden-section search. Tables are scanned
    /// over their own range only.
    pub fn sup_gamma_prime(&self, v_max: f64) -> f64 {
        let v = v_max.max(0.0).min(self.domain_max());
        match self {
            MotilitySpec::Power { .. } => self.raw_gamma_prime(v).abs(),
            MotilitySpec::Combination { terms } if terms.iter().all(|t| t.coef >= 0.0) => {
                self.raw_gamma_prime(v).abs()
            }
            _ => scan_max(|s| self.raw_gamma_prime(s).abs(), v),
        }
    }

    /// `sup gamma` over `[0, v_max]`; enters the explicit stability bound.
    pub fn sup_gamma(&self, v_max: f64) -> f64 {
        let v = v_max.max(0.0).min(self.domain_max());
        match self {
            MotilitySpec::Power { .. } => self.raw_gamma(v),
            MotilitySpec::Combination { terms } if terms.iter().all(|t| t.coef >= 0.0) => {
                self.raw_gamma(v)
            }
            _ => scan_max(|s| self.raw_gamma(s), v),
        }
    }

    fn check_arg(&self, s: f64) -> Result<()> {
        if !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("motility evaluated at negative s = {s}")));
        }
        if s > self.domain_max() {
            return Err(Error::OutOfTableRange {
                s,
                max: self.domain_max(),
            });
        }
        Ok(())
    }

    fn raw_gamma(&self, s: f64) -> f64 {
        match self {
            MotilitySpec::Power { alpha } => pow(s, *alpha),
            MotilitySpec::Combination { terms } => {
                terms.iter().map(|t| t.coef * pow(s, t.alpha)).sum()
            }
            MotilitySpec::Table(t) => t.eval(s).0,
        }
    }

    fn raw_gamma_prime(&self, s: f64) -> f64 {
        match self {
            MotilitySpec::Power { alpha } => dpow(s, *alpha),
            MotilitySpec::Combination { terms } => {
                terms.iter().map(|t| t.coef * dpow(s, t.alpha)).sum()
            }
            MotilitySpec::Table(t) => t.eval(s).1,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::InvalidMotility(format!(
            "power exponent must be >= 1 for a C^1 motility vanishing at 0, got {alpha}"
        )));
    }
    Ok(())
}

fn pow(s: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        s
    } else if alpha == 2.0 {
        s * s
    } else {
        s.powf(alpha)
    }
}

fn dpow(s: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        1.0
    } else if alpha == 2.0 {
        2.0 * s
    } else {
        alpha * s.powf(alpha - 1.0)
    }
}

impl Table {
    /// Cubic Hermite value and derivative at `s` (clamped to the table).
    fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.s.len();
        let s = s.clamp(self.s[0], self.s[n - 1]);
        let k = self.s.partition_point(|&x| x <= s).clamp(1, n - 1) - 1;
        let (s0, s1) = (self.s[k], self.s[k + 1]);
        let d = s1 - s0;
        let t = (s - s0) / d;
        let (g0, g1) = (self.gamma[k], self.gamma[k + 1]);
        let (m0, m1) = (self.gamma_prime[k], self.gamma_prime[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * g0
            + (t3 - 2.0 * t2 + t) * d * m0
            + (-2.0 * t3 + 3.0 * t2) * g1
            + (t3 - t2) * d * m1;
        let slope = (6.0 * t2 - 6.0 * t) * (g0 - g1) / d
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1;
        (value, slope)
    }
}

/// Max of `f` over `[0, hi]`: uniform scan, then golden-section refinement
/// around the best sample.
fn scan_max(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    if hi == 0.0 {
        return f(0.0);
    }
    let n = SCAN_SAMPLES;
    let step = hi / (n - 1) as f64;
    let (mut best_k, mut best) = (0, f(0.0));
    for k in 1..n {
        let val = f(k as f64 * step);
        if val > best {
            best = val;
            best_k = k;
        }
    }
    let lo = best_k.saturating_sub(1) as f64 * step;
    let up = ((best_k + 1).min(n - 1) as f64 * step).min(hi);
    best.max(golden_max(&f, lo, up))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(a)).max(f(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s_exp_table(n: usize, s_max: f64) -> MotilitySpec {
        let s: Vec<f64> = (0..n).map(|k| s_max * k as f64 / (n - 1) as f64).collect();
        let g = s.iter().map(|&x| x * (-x).exp()).collect();
        let gp = s.iter().map(|&x| (1.0 - x) * (-x).exp()).collect();
        MotilitySpec::table(s, g, gp).unwrap()
    }

    #[test]
    fn power_values() {
        let lin = MotilitySpec::power(1.0).unwrap();
        assert_eq!(lin.eval_gamma(0.0).unwrap(), 0.0);
        assert_eq!(lin.eval_gamma_prime(0.3).unwrap(), 1.0);
        let sq = MotilitySpec::power(2.0).unwrap();
        assert_eq!(sq.eval_gamma(0.5).unwrap(), 0.25);
        assert_eq!(sq.eval_gamma_prime(0.5).unwrap(), 1.0);
        let p = MotilitySpec::power(1.5).unwrap();
        // 0.09^1.5 = 0.3^3
        assert!((p.eval_gamma(0.09).unwrap() - 0.027).abs() < 1e-16);
        assert!((p.eval_gamma_prime(0.25).unwrap() - 0.75).abs() < 1e-15);
        let h = 1e-6;
        let fd = (p.eval_gamma(0.25 + h).unwrap() - p.eval_gamma(0.25 - h).unwrap()) / (2.0 * h);
        assert!((fd - 0.75).abs() < 1e-8);
    }

    #[test]
    fn rejects_negative_arguments_and_bad_specs() {
        let p = MotilitySpec::power(1.0).unwrap();
        assert!(p.eval_gamma(-1e-3).is_err());
        assert!(p.eval_gamma_prime(-1.0).is_err());
        assert!(MotilitySpec::power(0.5).is_err());
        assert!(MotilitySpec::power(f64::NAN).is_err());
        assert!(MotilitySpec::combination(vec![]).is_err());
        // gamma(s) = s - 2 s^2 turns negative at s = 1/2
        assert!(MotilitySpec::combination(vec![
            PowerTerm { coef: 1.0, alpha: 1.0 },
            PowerTerm { coef: -2.0, alpha: 2.0 },
        ])
        .is_err());
    }

    #[test]
    fn non_degenerate_table_is_rejected() {
        let err = MotilitySpec::table(vec![0.0, 1.0], vec![0.5, 1.0], vec![0.5, 0.5]).unwrap_err();
        assert!(err.to_string().contains("gamma(0)"));
    }

    #[test]
    fn table_out_of_range() {
        let t = s_exp_table(65, 4.0);
        assert!(t.eval_gamma(4.5).is_err());
        assert!(t.check_admissible(5.0).is_err());
    }

    #[test]
    fn sup_gamma_prime_closed_forms() {
        assert_eq!(MotilitySpec::power(1.0).unwrap().sup_gamma_prime(3.0), 1.0);
        assert_eq!(MotilitySpec::power(2.0).unwrap().sup_gamma_prime(0.5), 1.0);
        assert_eq!(MotilitySpec::power(2.0).unwrap().sup_gamma_prime(0.0), 0.0);
        assert_eq!(MotilitySpec::power(1.0).unwrap().sup_gamma_prime(0.0), 1.0);
    }

    #[test]
    fn sup_gamma_prime_of_s_exp_table() {
        let t = s_exp_table(129, 4.0);
        // dense-scan oracle on the exact derivative (1 - s) e^{-s}
        let oracle = (0..=200_000)
            .map(|k| 2.0 * k as f64 / 200_000.0)
            .map(|s| ((1.0 - s) * (-s).exp()).abs())
            .fold(0.0_f64, f64::max);
        assert!((oracle - 1.0).abs() < 1e-15);
        assert!((t.sup_gamma_prime(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_interpolates_knots_and_derivatives() {
        let t = s_exp_table(33, 4.0);
        let s = 1.25;
        assert!((t.eval_gamma(s).unwrap() - s * (-s).exp()).abs() < 1e-15);
        assert!((t.eval_gamma_prime(s).unwrap() - (1.0 - s) * (-s).exp()).abs() < 1e-15);
        // between knots: Hermite error is O(h^4) for the value
        let s = 1.3;
        assert!((t.eval_gamma(s).unwrap() - s * (-s).exp()).abs() < 1e-6);
    }

    #[test]
    fn sup_gamma_of_hump_uses_scan() {
        let t = s_exp_table(257, 4.0);
        // max of s e^{-s} is e^{-1} at s = 1
        assert!((t.sup_gamma(3.0) - (-1.0_f64).exp()).abs() < 1e-9);
        assert!((t.sup_gamma(0.5) - 0.5 * (-0.5_f64).exp()).abs() < 1e-12);
    }

    fn specs() -> Vec<MotilitySpec> {
        vec![
            MotilitySpec::power(1.0).unwrap(),
            MotilitySpec::power(1.5).unwrap(),
            MotilitySpec::power(3.0).unwrap(),
            MotilitySpec::combination(vec![
                PowerTerm { coef: 0.5, alpha: 1.0 },
                PowerTerm { coef: 2.0, alpha: 2.5 },
            ])
            .unwrap(),
            s_exp_table(129, 4.0),
        ]
    }

    proptest! {
        #[test]
        fn first_order_taylor_consistency(s in 0.0f64..3.9, which in 0usize..5) {
            let m = &specs()[which];
            let h = 1e-5;
            let g0 = m.eval_gamma(s).unwrap();
            let g1 = m.eval_gamma(s + h).unwrap();
            let d = m.eval_gamma_prime(s).unwrap();
            prop_assert!((g1 - g0 - h * d).abs() <= 100.0 * h * h);
        }

        #[test]
        fn sup_is_monotone_in_range(a in 0.0f64..3.9, b in 0.0f64..3.9, which in 0usize..5) {
            let m = &specs()[which];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.sup_gamma_prime(lo) <= m.sup_gamma_prime(hi) + 1e-12);
        }

        #[test]
        fn mean_value_bound(s in 0.0f64..3.9, which in 0usize..5) {
            let m = &specs()[which];
            let g = m.eval_gamma(s).unwrap();
            prop_assert!(g <= s * m.sup_gamma_prime(s) * (1.0 + 1e-12) + 1e-15);
        }
    }
}
