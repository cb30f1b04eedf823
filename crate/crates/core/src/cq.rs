//! Backward Euler convolution quadrature for fractional time derivatives.
//!
//! The weights `b_j` are the power-series coefficients of `(1 - ξ)^α`, so that
//! `∂_τ^α v(t_n) ≈ τ^{-α} Σ_{j=0}^{n} b_{n-j} v(t_j)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CqWeights {
    alpha: f64,
    tau: f64,
    b: Vec<f64>,
}

/// Weights `b_0..=b_n` for order `alpha` and step `tau`.
pub fn weights(alpha: f64, n: usize, tau: f64) -> Result<CqWeights> {
    validate_alpha(alpha)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {tau}")));
    }
    let mut b = Vec::with_capacity(n + 1);
    b.push(1.0);
    for j in 1..=n {
        let jf = j as f64;
        b.push(b[j - 1] * (jf - 1.0 - alpha) / jf);
    }
    Ok(CqWeights { alpha, tau, b })
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("fractional order must lie in (0, 1], got {alpha}")))
    }
}

impl CqWeights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// History length `N`; weights are stored for `0..=N`.
    pub fn len(&self) -> usize {
        self.b.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.b.len() == 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.b
    }

    pub fn b(&self, j: usize) -> f64 {
        self.b[j]
    }

    /// `τ^{-α}`
    pub fn scale(&self) -> f64 {
        self.tau.powf(-self.alpha)
    }

    /// Partial sums `s_n = Σ_{j=0}^{n} b_j`.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.b
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }

    /// Coefficients of `(1 - ξ)^{-α}`, the discrete fractional integral.
    pub fn dual(&self) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.b.len());
        q.push(1.0);
        for j in 1..self.b.len() {
            let jf = j as f64;
            q.push(q[j - 1] * (jf - 1.0 + self.alpha) / jf);
        }
        q
    }
}

/// Discrete Caputo derivative `τ^{-α} Σ_{j=0}^{n} b_{n-j} (v^j - v^0)` at `n = history.len() - 1`.
pub fn caputo_apply(w: &CqWeights, history: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (first, _) = history.split_first().ok_or_else(|| Error::InvalidConfig("empty history".into()))?;
    let n = history.len() - 1;
    if n > w.len() {
        return Err(Error::InvalidConfig(format!(
            "history of length {} exceeds the {} stored weights",
            history.len(),
            w.len() + 1
        )));
    }
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for (j, v) in history.iter().enumerate().skip(1) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        let c = w.b(n - j);
        for ((o, &x), &x0) in out.iter_mut().zip(v).zip(first) {
            *o += c * (x - x0);
        }
    }
    let scale = w.scale();
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(out)
}

/// Backward Euler CQ solution of `∂_t^α u + λ u = 0`, `u(0) = u0`, on `N` uniform steps up to `T`.
///
/// Returns `u^0..=u^N`.
pub fn scalar_fode_solve(alpha: f64, lambda: f64, u0: f64, t_final: f64, n: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("decay rate must be positive, got {lambda}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("at least one time step is required".into()));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidConfig(format!("final time must be positive, got {t_final}")));
    }
    let w = weights(alpha, n, t_final / n as f64)?;
    let scale = w.scale();
    let sums = w.partial_sums();
    let mut u = Vec::with_capacity(n + 1);
    u.push(u0);
    for step in 1..=n {
        let history: f64 = (1..step).map(|j| w.b(step - j) * u[j]).sum();
        let rhs = scale * (sums[step - 1] * u0 - history);
        u.push(rhs / (scale * w.b(0) + lambda));
    }
    Ok(u)
}
