//! Dense log-barrier interior-point method for small smooth convex programs
//! `min f(z) s.t. g_i(z) <= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Value, gradient and Hessian of a smooth function. `hess = None` means zero.
#[derive(Debug, Clone)]
pub struct Eval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: Option<DMatrix<f64>>,
}

pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn objective(&self, z: &DVector<f64>) -> Result<Eval>;
    fn constraints(&self, z: &DVector<f64>) -> Result<Vec<Eval>>;

    fn objective_value(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(self.objective(z)?.value)
    }

    fn constraint_values(&self, z: &DVector<f64>) -> Result<Vec<f64>> {
        Ok(self.constraints(z)?.into_iter().map(|e| e.value).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop when `m / t` falls below this.
    pub gap_tol: f64,
    pub t0: f64,
    pub mu: f64,
    /// Half squared Newton decrement at which centering stops.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub armijo: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            t0: 1.0,
            mu: 10.0,
            newton_tol: 1e-10,
            max_newton: 200,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStatus {
    Optimal,
    /// The feasible set has no strictly feasible point (or phase I could not find one).
    NoInterior,
    /// Newton or the line search broke down.
    Failed,
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub z: DVector<f64>,
    pub status: BarrierStatus,
    pub newton_iters: usize,
}

fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn strictly_feasible<P: ConvexProgram + ?Sized>(p: &P, z: &DVector<f64>) -> Option<Vec<f64>> {
    match p.constraint_values(z) {
        Ok(v) if v.iter().all(|g| *g < 0.0) => Some(v),
        _ => None,
    }
}

fn barrier_value<P: ConvexProgram + ?Sized>(p: &P, z: &DVector<f64>, t: f64) -> Option<f64> {
    let g = strictly_feasible(p, z)?;
    let f = p.objective_value(z).ok()?;
    let v = t * f - g.iter().map(|g| (-g).ln()).sum::<f64>();
    v.is_finite().then_some(v)
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(&(-g)));
    }
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-12 * scale;
    for _ in 0..20 {
        let hr = &h + DMatrix::identity(n, n) * reg;
        if let Some(ch) = hr.cholesky() {
            return Some(ch.solve(&(-g)));
        }
        reg *= 100.0;
    }
    None
}

/// Newton converges quadratically once the decrement is below 1/4, so a
/// handful of such steps reaches the rounding floor; beyond it the decrement
/// is noise.
const MAX_LOCAL_STEPS: usize = 8;

/// Minimises `t f - sum ln(-g_i)` from a strictly feasible `z`. Returns the
/// number of Newton steps, or `None` if the step computation broke down.
fn center<P: ConvexProgram + ?Sized>(
    p: &P,
    z: &mut DVector<f64>,
    t: f64,
    opts: &BarrierOptions,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> Option<usize> {
    let n = p.dim();
    let mut local_steps = 0;
    for iter in 0..opts.max_newton {
        if stop(z) {
            return Some(iter);
        }
        let f = p.objective(z).ok()?;
        let cs = p.constraints(z).ok()?;
        let mut grad = f.grad.clone() * t;
        let mut hess = match f.hess {
            Some(h) => h * t,
            None => DMatrix::zeros(n, n),
        };
        for c in &cs {
            let inv = -1.0 / c.value;
            grad.axpy(inv, &c.grad, 1.0);
            hess.ger(inv * inv, &c.grad, &c.grad, 1.0);
            if let Some(h) = &c.hess {
                hess += h * inv;
            }
        }
        let dir = newton_direction(hess, &grad)?;
        let slope = grad.dot(&dir);
        if -slope / 2.0 <= opts.newton_tol {
            return Some(iter);
        }
        let current = barrier_value(p, z, t)?;
        // Close to the centre the predicted decrease drowns in the rounding of
        // `t f`; there the largest strictly feasible step is taken as is.
        let local = -slope < 0.25;
        if local {
            local_steps += 1;
            if local_steps > MAX_LOCAL_STEPS {
                return Some(iter);
            }
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let trial = &*z + &dir * step;
            if let Some(v) = barrier_value(p, &trial, t) {
                if local || v <= current + opts.armijo * step * slope {
                    *z = trial;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            // No representable descent left at this t: treat as centred.
            return Some(iter);
        }
    }
    Some(opts.max_newton)
}

/// Barrier path from a strictly feasible point.
fn phase_two<P: ConvexProgram + ?Sized>(
    p: &P,
    mut z: DVector<f64>,
    m: usize,
    opts: &BarrierOptions,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> (DVector<f64>, bool, usize) {
    let mut t = opts.t0;
    let mut iters = 0;
    loop {
        match center(p, &mut z, t, opts, stop) {
            Some(k) => iters += k,
            None => return (z, false, iters),
        }
        if stop(&z) || (m as f64) / t < opts.gap_tol {
            return (z, true, iters);
        }
        t *= opts.mu;
    }
}

/// Phase-I program: `min s` subject to `g_i(z) <= s` and `s >= -1`.
struct PhaseOne<'a, P: ?Sized> {
    inner: &'a P,
}

impl<P: ConvexProgram + ?Sized> ConvexProgram for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn objective(&self, z: &DVector<f64>) -> Result<Eval> {
        let n = self.inner.dim();
        let mut grad = DVector::zeros(n + 1);
        grad[n] = 1.0;
        Ok(Eval {
            value: z[n],
            grad,
            hess: None,
        })
    }

    fn constraints(&self, z: &DVector<f64>) -> Result<Vec<Eval>> {
        let n = self.inner.dim();
        let s = z[n];
        let zi = z.rows(0, n).into_owned();
        let mut out: Vec<Eval> = self
            .inner
            .constraints(&zi)?
            .into_iter()
            .map(|c| {
                let mut grad = DVector::zeros(n + 1);
                grad.rows_mut(0, n).copy_from(&c.grad);
                grad[n] = -1.0;
                let hess = c.hess.map(|h| {
                    let mut big = DMatrix::zeros(n + 1, n + 1);
                    big.view_mut((0, 0), (n, n)).copy_from(&h);
                    big
                });
                Eval {
                    value: c.value - s,
                    grad,
                    hess,
                }
            })
            .collect();
        let mut grad = DVector::zeros(n + 1);
        grad[n] = -1.0;
        out.push(Eval {
            value: -1.0 - s,
            grad,
            hess: None,
        });
        Ok(out)
    }

    fn constraint_values(&self, z: &DVector<f64>) -> Result<Vec<f64>> {
        let n = self.inner.dim();
        let s = z[n];
        let zi = z.rows(0, n).into_owned();
        let mut v: Vec<f64> = self
            .inner
            .constraint_values(&zi)?
            .into_iter()
            .map(|g| g - s)
            .collect();
        v.push(-1.0 - s);
        Ok(v)
    }
}

/// Solves the program starting from `z0`, running phase I first when `z0` is
/// not strictly feasible.
pub fn solve<P: ConvexProgram + ?Sized>(
    p: &P,
    z0: DVector<f64>,
    opts: &BarrierOptions,
) -> BarrierResult {
    let never = |_: &DVector<f64>| false;
    let values = match p.constraint_values(&z0) {
        Ok(v) => v,
        Err(_) => {
            return BarrierResult {
                z: z0,
                status: BarrierStatus::Failed,
                newton_iters: 0,
            }
        }
    };
    let m = values.len();
    let mut iters = 0;
    let start = if max_value(&values) < 0.0 {
        z0
    } else {
        let worst = max_value(&values);
        if !worst.is_finite() {
            return BarrierResult {
                z: z0,
                status: BarrierStatus::Failed,
                newton_iters: 0,
            };
        }
        let n = p.dim();
        let mut z1 = DVector::zeros(n + 1);
        z1.rows_mut(0, n).copy_from(&z0);
        z1[n] = worst + 1e-3 + 0.1 * worst.abs();
        let phase1 = PhaseOne { inner: p };
        let found = |z: &DVector<f64>| {
            let zi = z.rows(0, n).into_owned();
            strictly_feasible(p, &zi).is_some()
        };
        let (z1, ok, k) = phase_two(&phase1, z1, m + 1, opts, &found);
        iters += k;
        let zi = z1.rows(0, n).into_owned();
        if strictly_feasible(p, &zi).is_none() {
            return BarrierResult {
                z: z0,
                status: if ok {
                    BarrierStatus::NoInterior
                } else {
                    BarrierStatus::Failed
                },
                newton_iters: iters,
            };
        }
        zi
    };
    let (z, ok, k) = phase_two(p, start, m, opts, &never);
    iters += k;
    BarrierResult {
        z,
        status: if ok {
            BarrierStatus::Optimal
        } else {
            BarrierStatus::Failed
        },
        newton_iters: iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `min c.z + 0.5 |z - q|^2` over linear constraints `A z <= b` and an optional ball.
    struct Toy {
        c: Vec<f64>,
        q: Option<Vec<f64>>,
        rows: Vec<(Vec<f64>, f64)>,
        ball: Option<f64>,
    }

    impl ConvexProgram for Toy {
        fn dim(&self) -> usize {
            self.c.len()
        }

        fn objective(&self, z: &DVector<f64>) -> Result<Eval> {
            let n = self.dim();
            let mut value = 0.0;
            let mut grad = DVector::from_vec(self.c.clone());
            for i in 0..n {
                value += self.c[i] * z[i];
            }
            let hess = self.q.as_ref().map(|q| {
                for i in 0..n {
                    value += 0.5 * (z[i] - q[i]).powi(2);
                    grad[i] += z[i] - q[i];
                }
                DMatrix::identity(n, n)
            });
            Ok(Eval { value, grad, hess })
        }

        fn constraints(&self, z: &DVector<f64>) -> Result<Vec<Eval>> {
            let n = self.dim();
            let mut out: Vec<Eval> = self
                .rows
                .iter()
                .map(|(a, b)| {
                    let g = DVector::from_vec(a.clone());
                    Eval {
                        value: g.dot(z) - b,
                        grad: g,
                        hess: None,
                    }
                })
                .collect();
            if let Some(r) = self.ball {
                out.push(Eval {
                    value: z.dot(z) - r * r,
                    grad: z * 2.0,
                    hess: Some(DMatrix::identity(n, n) * 2.0),
                });
            }
            Ok(out)
        }
    }

    #[test]
    fn projection_onto_simplex_corner() {
        let p = Toy {
            c: vec![0.0, 0.0],
            q: Some(vec![2.0, 0.5]),
            rows: vec![(vec![1.0, 1.0], 1.0), (vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)],
            ball: None,
        };
        let r = solve(&p, DVector::from_vec(vec![5.0, 5.0]), &BarrierOptions::default());
        assert_eq!(r.status, BarrierStatus::Optimal);
        assert!((r.z[0] - 1.0).abs() < 1e-8 && r.z[1].abs() < 1e-8, "{}", r.z);
    }

    #[test]
    fn linear_objective_over_disc() {
        let p = Toy {
            c: vec![-1.0, -1.0],
            q: None,
            rows: vec![],
            ball: Some(1.0),
        };
        let r = solve(&p, DVector::from_vec(vec![0.0, 0.0]), &BarrierOptions::default());
        assert_eq!(r.status, BarrierStatus::Optimal);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.z[0] - h).abs() < 1e-8 && (r.z[1] - h).abs() < 1e-8);
    }

    #[test]
    fn empty_interior_is_reported() {
        let disjoint = Toy {
            c: vec![1.0],
            q: None,
            rows: vec![(vec![1.0], -1.0), (vec![-1.0], -1.0)],
            ball: None,
        };
        let r = solve(&disjoint, DVector::from_vec(vec![0.0]), &BarrierOptions::default());
        assert_eq!(r.status, BarrierStatus::NoInterior);
        assert_eq!(r.z[0], 0.0);

        let flat = Toy {
            c: vec![1.0],
            q: None,
            rows: vec![(vec![1.0], 0.0), (vec![-1.0], 0.0)],
            ball: None,
        };
        let r = solve(&flat, DVector::from_vec(vec![0.3]), &BarrierOptions::default());
        assert_eq!(r.status, BarrierStatus::NoInterior);
    }
}
