//! Frequency alignment of mixed-sampled series into regression designs.
//!
//! Timing convention: the row for response `y[t+1]` uses `y[t], ..., y[t-p+1]`
//! as autoregressive regressors and, as high-frequency lag 0, the last
//! high-frequency observation inside low-frequency period `t`. Earlier lags
//! step back one high-frequency observation at a time. Rows whose lag window
//! would start before the first observation are dropped.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lagpoly::LagWeights;

/// A low-frequency response observed `T` times and a regressor observed `m * T` times.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSeries {
    y_obs: Vec<f64>,
    x_obs: Vec<f64>,
    m: usize,
}

impl MixedSeries {
    pub fn new(y_obs: Vec<f64>, x_obs: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("frequency ratio m must be at least 1".into()));
        }
        if x_obs.len() != m * y_obs.len() {
            return Err(Error::Dimension(format!(
                "high-frequency length {} != m * T = {} * {}",
                x_obs.len(),
                m,
                y_obs.len()
            )));
        }
        Ok(Self { y_obs, x_obs, m })
    }

    pub fn y_obs(&self) -> &[f64] {
        &self.y_obs
    }

    pub fn x_obs(&self) -> &[f64] {
        &self.x_obs
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of low-frequency periods `T`.
    pub fn len(&self) -> usize {
        self.y_obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_obs.is_empty()
    }
}

/// Known measurement-error variances of the low- and high-frequency series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeVariances {
    pub sigma_u2: f64,
    pub sigma_v2: f64,
}

impl MeVariances {
    pub fn new(sigma_u2: f64, sigma_v2: f64) -> Result<Self> {
        for (name, v) in [("sigma_u2", sigma_u2), ("sigma_v2", sigma_v2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { sigma_u2, sigma_v2 })
    }

    pub const fn none() -> Self {
        Self {
            sigma_u2: 0.0,
            sigma_v2: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_u2 == 0.0 && self.sigma_v2 == 0.0
    }
}

/// Aligned response and unrestricted design, with cached second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    response: DVector<f64>,
    x_unrestricted: DMatrix<f64>,
    p: usize,
    jmax: usize,
    periods: usize,
    dropped_rows: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl DesignSet {
    /// Assemble a design from already aligned parts. `periods` is the total
    /// low-frequency sample length used as the variance denominator.
    pub fn from_parts(
        response: DVector<f64>,
        x_unrestricted: DMatrix<f64>,
        p: usize,
        jmax: usize,
        periods: usize,
    ) -> Result<Self> {
        if x_unrestricted.ncols() != jmax + p + 1 {
            return Err(Error::Dimension(format!(
                "design has {} columns, expected jmax + p + 1 = {}",
                x_unrestricted.ncols(),
                jmax + p + 1
            )));
        }
        if x_unrestricted.nrows() != response.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has {}",
                x_unrestricted.nrows(),
                response.len()
            )));
        }
        if response.len() < p + 2 {
            return Err(Error::InsufficientHistory(format!(
                "{} usable rows cannot identify {} coefficients",
                response.len(),
                p + 2
            )));
        }
        let xtx = x_unrestricted.tr_mul(&x_unrestricted);
        let xty = x_unrestricted.tr_mul(&response);
        let yty = response.dot(&response);
        Ok(Self {
            response,
            x_unrestricted,
            p,
            jmax,
            periods,
            dropped_rows: 0,
            xtx,
            xty,
            yty,
        })
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn x_unrestricted(&self) -> &DMatrix<f64> {
        &self.x_unrestricted
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn jmax(&self) -> usize {
        self.jmax
    }

    /// Number of usable rows; plays the role of `T - p` in the correction terms.
    pub fn rows(&self) -> usize {
        self.response.len()
    }

    /// Total low-frequency length `T`.
    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Rows beyond the first `p` lost to insufficient high-frequency history.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// `X'X` of the unrestricted design.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    /// `X'Y` of the unrestricted design.
    pub fn cross(&self) -> &DVector<f64> {
        &self.xty
    }

    pub fn response_ss(&self) -> f64 {
        self.yty
    }
}

/// First low-frequency index `t` (0-based, response `y[t]`) with a complete lag window.
pub fn first_usable_period(m: usize, p: usize, jmax: usize) -> usize {
    p.max(jmax.div_ceil(m))
}

/// Build the response vector and unrestricted design from a mixed series.
pub fn align_mixed(series: &MixedSeries, p: usize, jmax: usize) -> Result<DesignSet> {
    if jmax == 0 {
        return Err(Error::Domain("jmax must be at least 1".into()));
    }
    let m = series.m();
    let periods = series.len();
    let first = first_usable_period(m, p, jmax);
    if periods <= first || periods - first < p + 2 {
        return Err(Error::InsufficientHistory(format!(
            "T = {periods} leaves {} usable rows after the first complete lag window at period {}; need at least {}",
            periods.saturating_sub(first),
            first + 1,
            p + 2
        )));
    }
    let rows = periods - first;
    let k = jmax + p + 1;
    let y = series.y_obs();
    let x = series.x_obs();
    let response = DVector::from_iterator(rows, y[first..].iter().copied());
    let design = DMatrix::from_fn(rows, k, |i, c| {
        let t = first + i;
        match c {
            0 => 1.0,
            c if c <= p => y[t - c],
            c => x[m * t - 1 - (c - p - 1)],
        }
    });
    let mut ds = DesignSet::from_parts(response, design, p, jmax, periods)?;
    ds.dropped_rows = first - p;
    Ok(ds)
}

/// `blockdiag(I_{p+1}, w)`, mapping restricted coefficients into unrestricted ones.
pub fn weight_embedding(w: &LagWeights, p: usize) -> DMatrix<f64> {
    let jmax = w.jmax();
    let mut e = DMatrix::zeros(p + 1 + jmax, p + 2);
    for i in 0..=p {
        e[(i, i)] = 1.0;
    }
    for (j, &c) in w.weights().iter().enumerate() {
        e[(p + 1 + j, p + 1)] = c;
    }
    e
}

fn check_jmax(ds: &DesignSet, w: &LagWeights) -> Result<()> {
    if ds.jmax() != w.jmax() {
        return Err(Error::Dimension(format!(
            "weights have jmax = {}, design has jmax = {}",
            w.jmax(),
            ds.jmax()
        )));
    }
    Ok(())
}

/// Restricted design `X(theta)`: intercept and AR columns copied, the
/// high-frequency block collapsed into one weighted column.
pub fn restricted_design(ds: &DesignSet, w: &LagWeights) -> Result<DMatrix<f64>> {
    check_jmax(ds, w)?;
    let p = ds.p();
    let x = ds.x_unrestricted();
    let mut out = DMatrix::zeros(ds.rows(), p + 2);
    out.columns_mut(0, p + 1).copy_from(&x.columns(0, p + 1));
    let hf = x.columns(p + 1, w.jmax()) * DVector::from_column_slice(w.weights());
    out.set_column(p + 1, &hf);
    Ok(out)
}

/// Restricted second-moment matrices `(X(theta)'X(theta), X(theta)'Y)` computed
/// from the cached unrestricted moments.
pub fn restricted_moments(ds: &DesignSet, w: &LagWeights) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_jmax(ds, w)?;
    let e = weight_embedding(w, ds.p());
    let xtx = e.tr_mul(&(ds.gram() * &e));
    let xty = e.tr_mul(ds.cross());
    Ok((xtx, xty))
}

/// Limit of `V(theta)'V(theta) / (T - p)` in restricted coordinates.
pub fn sigma_c(w: &LagWeights, me: MeVariances, p: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(p + 2, p + 2);
    for i in 1..=p {
        s[(i, i)] = me.sigma_u2;
    }
    s[(p + 1, p + 1)] = me.sigma_v2 * w.sum_of_squares();
    s
}

/// Limit of `V'V / T` in unrestricted coordinates: `blockdiag(0, su2 I_p, sv2 I_jmax)`.
pub fn sigma_unrestricted(me: MeVariances, p: usize, jmax: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p + 1 + jmax, p + 1 + jmax, |i, j| {
        if i != j || i == 0 {
            0.0
        } else if i <= p {
            me.sigma_u2
        } else {
            me.sigma_v2
        }
    })
}
