//! Primal-dual interior point method for linear quantile regression.
//!
//! Works on the bounded dual `max y'd  s.t.  X'd = (1-tau) X'1, 0 <= d <= 1`
//! with Mehrotra predictor-corrector steps. The regression coefficients are
//! the negated multipliers of the equality constraints.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 500;
pub const GAP_TOL: f64 = 1e-8;
const STEP_SCALE: f64 = 0.99995;
const FEAS_TOL: f64 = 1e-7;

struct State {
    x: DVector<f64>,
    s: DVector<f64>,
    lam: DVector<f64>,
    z: DVector<f64>,
    w: DVector<f64>,
}

struct Direction {
    dx: DVector<f64>,
    dlam: DVector<f64>,
    dz: DVector<f64>,
    dw: DVector<f64>,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut step = f64::INFINITY;
    for (a, da) in v.iter().zip(dv.iter()) {
        if *da < 0.0 {
            step = step.min(-a / da);
        }
    }
    (STEP_SCALE * step).min(1.0)
}

fn factor(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let p = m.nrows();
    let scale = m.trace().abs() / p as f64;
    let mut ridge = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..6 {
        let mut mm = m.clone();
        for i in 0..p {
            mm[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(mm) {
            return Ok(c);
        }
        ridge *= 100.0;
    }
    Err(Error::SolverFailure("normal matrix is not positive definite".into()))
}

/// Solves the quantile regression LP for a full-column-rank `x`. `start` is a
/// starting coefficient vector (least squares works well).
pub(super) fn solve(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, start: &[f64]) -> Result<Vec<f64>> {
    let n = x.nrows();
    let beta0 = DVector::from_column_slice(start);
    let r = y - x * &beta0;
    let delta = 0.1 * r.iter().map(|v| v.abs()).sum::<f64>() / n as f64 + 1e-8 * (1.0 + y.amax());

    let mut st = State {
        x: DVector::from_element(n, 1.0 - tau),
        s: DVector::from_element(n, tau),
        lam: -beta0,
        z: r.map(|v| (-v).max(0.0) + delta),
        w: r.map(|v| v.max(0.0) + delta),
    };
    let b = x.tr_mul(&DVector::from_element(n, 1.0 - tau));
    let c = -y;
    let b_scale = 1.0 + b.amax();
    let c_scale = 1.0 + y.amax();

    for _ in 0..MAX_ITER {
        let rp = &b - x.tr_mul(&st.x);
        let rd = &c - x * &st.lam - &st.z + &st.w;
        let gap = st.x.dot(&st.z) + st.s.dot(&st.w);
        let pobj = c.dot(&st.x);
        let dobj = b.dot(&st.lam) - st.w.sum();
        if gap <= GAP_TOL * (1.0 + pobj.abs().max(dobj.abs()))
            && rp.amax() <= FEAS_TOL * b_scale
            && rd.amax() <= FEAS_TOL * c_scale
        {
            return Ok(st.lam.iter().map(|v| -v).collect());
        }
        if !gap.is_finite() {
            return Err(Error::SolverFailure("non-finite duality gap".into()));
        }

        let d = DVector::from_fn(n, |i, _| 1.0 / (st.z[i] / st.x[i] + st.w[i] / st.s[i]));
        let mut xd = x.clone();
        for (i, mut row) in xd.row_iter_mut().enumerate() {
            row *= d[i].sqrt();
        }
        let chol = factor(xd.tr_mul(&xd))?;

        let direction = |rxz: &DVector<f64>, rsw: &DVector<f64>| -> Direction {
            let q = DVector::from_fn(n, |i, _| rxz[i] / st.x[i] - rsw[i] / st.s[i] - rd[i]);
            let dq = d.component_mul(&q);
            let dlam = chol.solve(&(&rp - x.tr_mul(&dq)));
            let dx = d.component_mul(&(x * &dlam + &q));
            let dz = DVector::from_fn(n, |i, _| (rxz[i] - st.z[i] * dx[i]) / st.x[i]);
            let dw = DVector::from_fn(n, |i, _| (rsw[i] + st.w[i] * dx[i]) / st.s[i]);
            Direction { dx, dlam, dz, dw }
        };

        // predictor
        let rxz = -st.x.component_mul(&st.z);
        let rsw = -st.s.component_mul(&st.w);
        let aff = direction(&rxz, &rsw);
        let ds = -&aff.dx;
        let ap = max_step(&st.x, &aff.dx).min(max_step(&st.s, &ds));
        let ad = max_step(&st.z, &aff.dz).min(max_step(&st.w, &aff.dw));
        let mu_aff = (&st.x + ap * &aff.dx).dot(&(&st.z + ad * &aff.dz))
            + (&st.s + ap * &ds).dot(&(&st.w + ad * &aff.dw));
        let sigma = (mu_aff / gap).clamp(0.0, 1.0).powi(3);
        let mu = sigma * gap / (2 * n) as f64;

        // corrector
        let rxz = DVector::from_fn(n, |i, _| mu - st.x[i] * st.z[i] - aff.dx[i] * aff.dz[i]);
        let rsw = DVector::from_fn(n, |i, _| mu - st.s[i] * st.w[i] - ds[i] * aff.dw[i]);
        let dir = direction(&rxz, &rsw);
        let ds = -&dir.dx;
        let ap = max_step(&st.x, &dir.dx).min(max_step(&st.s, &ds));
        let ad = max_step(&st.z, &dir.dz).min(max_step(&st.w, &dir.dw));

        st.x += ap * &dir.dx;
        st.s += ap * &ds;
        st.lam += ad * &dir.dlam;
        st.z += ad * &dir.dz;
        st.w += ad * &dir.dw;
    }
    Err(Error::SolverFailure(format!(
        "no convergence within {MAX_ITER} iterations at tau {tau}"
    )))
}
