use crate::error::{Error, Result};

/// Bracket and iteration budget for the scalar search over `theta2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub iterations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            theta_lo: 1.001,
            theta_hi: 50.0,
            iterations: 50,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_lo > 1.0 && self.theta_lo.is_finite()) {
            return Err(Error::Domain(format!("theta_lo must exceed 1, got {}", self.theta_lo)));
        }
        if !(self.theta_hi > self.theta_lo && self.theta_hi.is_finite()) {
            return Err(Error::Domain(format!(
                "theta_hi ({}) must exceed theta_lo ({})",
                self.theta_hi, self.theta_lo
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Domain("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(sqrt(5) - 1) / 2`
pub const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn score(v: &Result<f64>) -> f64 {
    match v {
        Ok(x) if !x.is_nan() => *x,
        _ => f64::NEG_INFINITY,
    }
}

/// Final state of a golden-section run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub theta: f64,
    pub objective: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Golden-section maximization of `f` over `[theta_lo, theta_hi]`.
///
/// Each iteration shrinks the bracket by `INV_PHI` and costs one evaluation.
/// A probe whose evaluation fails is treated as worse than any finite value,
/// so the search moves to the sub-interval that excludes it. Returns the better
/// of the two final interior probes and its objective.
pub fn golden_section_max<F>(f: F, cfg: &SearchConfig) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    golden_section_search(f, cfg).map(|o| (o.theta, o.objective))
}

/// Like [`golden_section_max`] but also reports the final bracket.
pub fn golden_section_search<F>(mut f: F, cfg: &SearchConfig) -> Result<SearchOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    let (mut a, mut b) = (cfg.theta_lo, cfg.theta_hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);

    for _ in 0..cfg.iterations {
        if let (Err(e), Err(_)) = (&fc, &fd) {
            return Err(Error::SearchFailed(Box::new(e.clone())));
        }
        if score(&fc) >= score(&fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }

    let (theta, objective) = match (fc, fd) {
        (Err(e), Err(_)) => return Err(Error::SearchFailed(Box::new(e))),
        (fc, fd) => {
            if score(&fc) >= score(&fd) {
                (c, score(&fc))
            } else {
                (d, score(&fd))
            }
        }
    };
    Ok(SearchOutcome { theta, objective, lo: a, hi: b })
}
