//! BFGS minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

/// Objective value and gradient at a point, or `None` where the objective
/// is undefined (treated as +∞ by the line search).
pub(crate) trait Objective {
    fn value_grad(&mut self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)>;
}

impl<F> Objective for F
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    fn value_grad(&mut self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        self(x)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOptions {
    /// Converged once `max|g| < tol * max(1, |f|)`.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LS: usize = 40;
/// Relative size of objective changes indistinguishable from rounding.
const NOISE: f64 = 1e-12;

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn grad_ok(f: f64, g: &DVector<f64>, tol: f64) -> bool {
    max_abs(g) < tol * f.abs().max(1.0)
}

struct Point {
    step: f64,
    f: f64,
    g: DVector<f64>,
    slope: f64,
}

/// Minimizes `obj` from `x0`. `h0` is the initial inverse-Hessian
/// approximation; identity when `None`.
pub(crate) fn minimize<O: Objective>(
    obj: &mut O,
    x0: DVector<f64>,
    h0: Option<DMatrix<f64>>,
    opts: &BfgsOptions,
) -> Option<BfgsOutcome> {
    let n = x0.len();
    let (mut f, mut g) = obj.value_grad(&x0)?;
    let mut x = x0;
    let initial_h = h0.clone();
    let identity = DMatrix::identity(n, n);
    let mut h = h0.unwrap_or_else(|| identity.clone());
    // true while `h` is an unscaled identity, whose step length is unknown
    let mut unscaled = initial_h.is_none();
    let mut retried = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if grad_ok(f, &g, opts.tol) {
            return Some(BfgsOutcome { x, iterations, converged: true });
        }
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = dir.dot(&g);
        if !(slope < 0.0) {
            h = identity.clone();
            unscaled = true;
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let step_init = if unscaled { (1.0 / max_abs(&dir)).min(1.0) } else { 1.0 };

        let Some(pt) = line_search(obj, &x, f, slope, &dir, step_init) else {
            // one retry from the starting curvature model, then give up
            if retried {
                break;
            }
            retried = true;
            h = initial_h.clone().unwrap_or_else(|| identity.clone());
            unscaled = initial_h.is_none();
            continue;
        };
        retried = false;
        let s = &dir * pt.step;
        let yv = &pt.g - &g;
        x += &s;
        f = pt.f;
        g = pt.g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if unscaled {
                h = &identity * (sy / yv.dot(&yv));
                unscaled = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
    }
    let converged = grad_ok(f, &g, opts.tol);
    Some(BfgsOutcome { x, iterations, converged })
}

fn eval_at<O: Objective>(
    obj: &mut O,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    step: f64,
) -> Option<Point> {
    let trial = x + dir * step;
    let (f, g) = obj.value_grad(&trial)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let slope = g.dot(dir);
    Some(Point { step, f, g, slope })
}

/// Strong-Wolfe line search (bracketing then zoom). Near the optimum, where
/// objective differences drown in rounding, a point satisfying the
/// curvature condition is accepted even if the decrease test is inconclusive.
fn line_search<O: Objective>(
    obj: &mut O,
    x: &DVector<f64>,
    f0: f64,
    slope0: f64,
    dir: &DVector<f64>,
    step_init: f64,
) -> Option<Point> {
    let noise = NOISE * f0.abs().max(1.0);
    let armijo = |p: &Point| p.f <= f0 + C1 * p.step * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -C2 * slope0;
    let acceptable_in_noise = |p: &Point| (p.f - f0).abs() <= noise && curvature(p);

    let mut prev = Point { step: 0.0, f: f0, g: DVector::zeros(0), slope: slope0 };
    let mut step = step_init;
    let mut best: Option<Point> = None;
    for i in 0..MAX_LS {
        let cur = eval_at(obj, x, dir, step);
        match cur {
            None => {
                return zoom(obj, x, f0, slope0, dir, prev, None, step);
            }
            Some(cur) => {
                if acceptable_in_noise(&cur) {
                    return Some(cur);
                }
                if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
                    let hi_step = cur.step;
                    return zoom(obj, x, f0, slope0, dir, prev, Some(cur), hi_step);
                }
                if curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope >= 0.0 {
                    let hi_step = prev.step;
                    return zoom(obj, x, f0, slope0, dir, cur, Some(prev), hi_step).or(best);
                }
                step = cur.step * 2.0;
                best = Some(Point { step: cur.step, f: cur.f, g: cur.g.clone(), slope: cur.slope });
                prev = cur;
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn zoom<O: Objective>(
    obj: &mut O,
    x: &DVector<f64>,
    f0: f64,
    slope0: f64,
    dir: &DVector<f64>,
    mut lo: Point,
    mut hi: Option<Point>,
    mut hi_step: f64,
) -> Option<Point> {
    let noise = NOISE * f0.abs().max(1.0);
    for _ in 0..MAX_LS {
        let (a, b) = (lo.step.min(hi_step), lo.step.max(hi_step));
        let width = b - a;
        if width <= 1e-16 * b.max(1.0) {
            break;
        }
        let mut trial = match &hi {
            Some(h) => cubic_min(&lo, h).unwrap_or(0.5 * (lo.step + h.step)),
            None => 0.5 * (lo.step + hi_step),
        };
        let (lo_bound, hi_bound) = (a + 0.1 * width, b - 0.1 * width);
        if !(trial >= lo_bound && trial <= hi_bound) {
            trial = 0.5 * (a + b);
        }
        match eval_at(obj, x, dir, trial) {
            None => {
                hi_step = trial;
                hi = None;
            }
            Some(p) => {
                let curvature = p.slope.abs() <= -C2 * slope0;
                if (p.f - f0).abs() <= noise && curvature {
                    return Some(p);
                }
                if p.f > f0 + C1 * p.step * slope0 || p.f >= lo.f {
                    hi_step = p.step;
                    hi = Some(p);
                } else {
                    if curvature {
                        return Some(p);
                    }
                    if p.slope * (hi_step - lo.step) >= 0.0 {
                        hi_step = lo.step;
                        hi = Some(std::mem::replace(&mut lo, p));
                    } else {
                        lo = p;
                    }
                }
            }
        }
    }
    // settle for sufficient decrease without curvature
    (lo.step > 0.0 && lo.f < f0).then_some(lo)
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(p: &Point, q: &Point) -> Option<f64> {
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.step - q.step);
    let disc = d1 * d1 - p.slope * q.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (q.step - p.step).signum() * disc.sqrt();
    let t = q.step - (q.step - p.step) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut obj = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ]);
            Some((f, g))
        };
        let out = minimize(
            &mut obj,
            DVector::from_vec(vec![-1.2, 1.0]),
            None,
            &BfgsOptions { tol: 1e-10, max_iter: 500 },
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn newton_start_solves_quadratic_in_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let mut obj = |x: &DVector<f64>| Some((0.5 * x.dot(&(&a * x)) - b.dot(x), &a * x - &b));
        let h0 = a.clone().try_inverse().unwrap();
        let out = minimize(
            &mut obj,
            DVector::zeros(2),
            Some(h0),
            &BfgsOptions { tol: 1e-12, max_iter: 50 },
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn undefined_region_is_avoided() {
        // f = x - ln x, undefined for x <= 0, minimum at 1
        let mut obj = |x: &DVector<f64>| {
            (x[0] > 0.0).then(|| (x[0] - x[0].ln(), DVector::from_vec(vec![1.0 - 1.0 / x[0]])))
        };
        let out = minimize(
            &mut obj,
            DVector::from_vec(vec![0.05]),
            None,
            &BfgsOptions { tol: 1e-10, max_iter: 100 },
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8);
    }
}
