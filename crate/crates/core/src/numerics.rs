//! Small numerical utilities: compensated summation, adaptive quadrature,
//! and a least-squares slope fit.
//!
//! The quadrature is a plain adaptive Simpson scheme with the Richardson
//! acceptance test |S_fine − S_coarse|/15 ≤ tol. It reports the achieved
//! error bound and evaluation count so failures carry diagnostics instead
//! of silently returning garbage.

use crate::error::{CoreError, Result};

/// Neumaier-compensated accumulator.
///
/// Summation order is part of this crate's reproducibility contract, so the
/// accumulator is used everywhere floating-point values are reduced.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Result of an adaptive quadrature pass.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Accumulated Richardson error bound over accepted panels.
    pub error_bound: f64,
    pub evals: usize,
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`, spending at
/// most `max_evals` function evaluations.
///
/// Returns `QuadratureNonConvergence` when the evaluation budget runs out
/// before the requested tolerance is met; the error carries the tolerance
/// actually achieved.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(CoreError::InvalidParameter(
            "quadrature interval must be finite".into(),
        ));
    }
    if abs_tol <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "quadrature tolerance must be positive".into(),
        ));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_bound: 0.0,
            evals: 0,
        });
    }

    struct State<F> {
        f: F,
        evals: usize,
        max_evals: usize,
        exhausted: bool,
        value: NeumaierSum,
        error_bound: NeumaierSum,
    }

    impl<F: FnMut(f64) -> f64> State<F> {
        fn eval(&mut self, x: f64) -> f64 {
            self.evals += 1;
            (self.f)(x)
        }

        // Depth cap 60: interval widths underflow long before that, and a
        // genuine nonintegrable singularity must terminate, not recurse.
        #[allow(clippy::too_many_arguments)]
        fn simpson(
            &mut self,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            m: f64,
            fm: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) {
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = self.eval(lm);
            let frm = self.eval(rm);
            let h6 = (b - a) / 12.0;
            let left = h6 * (fa + 4.0 * flm + fm);
            let right = h6 * (fm + 4.0 * frm + fb);
            let delta = (left + right - whole) / 15.0;

            let done = delta.abs() <= tol || depth >= 60 || lm <= a || rm >= b;
            if done || self.evals >= self.max_evals {
                if !done {
                    self.exhausted = true;
                }
                self.value.add(left + right + delta);
                self.error_bound.add(delta.abs());
                return;
            }
            self.simpson(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1);
            self.simpson(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1);
        }
    }

    let mut st = State {
        f,
        evals: 0,
        max_evals,
        exhausted: false,
        value: NeumaierSum::new(),
        error_bound: NeumaierSum::new(),
    };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (st.eval(a), st.eval(m), st.eval(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    st.simpson(a, fa, b, fb, m, fm, whole, abs_tol, 0);

    let achieved = st.error_bound.total();
    if st.exhausted && achieved > abs_tol {
        return Err(CoreError::QuadratureNonConvergence {
            requested: abs_tol,
            achieved,
            evals: st.evals,
        });
    }
    Ok(Quadrature {
        value: st.value.total(),
        error_bound: achieved,
        evals: st.evals,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CoreError::InvalidParameter(
            "slope fit needs two equal-length samples or more".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(CoreError::InvalidParameter(
            "slope fit needs distinct x values".into(),
        ));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_is_exact() {
        // Simpson integrates cubics exactly.
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 1000).unwrap();
        assert!((q.value - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_exp_decay() {
        let q = adaptive_simpson(|x| (-x).exp(), 0.0, 30.0, 1e-12, 1_000_000).unwrap();
        assert!((q.value - (1.0 - (-30.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn simpson_reports_budget_exhaustion() {
        // Steep oscillation with a budget too small to resolve it.
        let err = adaptive_simpson(|x| (1000.0 * x).sin().abs(), 0.0, 10.0, 1e-14, 50);
        match err {
            Err(CoreError::QuadratureNonConvergence {
                requested,
                achieved,
                evals,
            }) => {
                assert_eq!(requested, 1e-14);
                assert!(achieved > requested);
                assert!(evals >= 50);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = NeumaierSum::new();
        s.add(1.0);
        s.add(1e100);
        s.add(1.0);
        s.add(-1e100);
        assert_eq!(s.total(), 2.0);
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((fit_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
    }
}
