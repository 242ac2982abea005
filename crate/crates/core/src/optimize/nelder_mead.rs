//! Bounded Nelder-Mead with seeded multistart.
//!
//! Bounds are enforced by clamping every trial point into the box, which keeps
//! the method derivative-free and deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMead {
    /// Edge length of the initial simplex.
    pub initial_scale: f64,
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tolerance: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around a converged point, to escape premature
    /// collapse; stops early once a restart no longer improves the value.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { initial_scale: 0.3, diameter_tolerance: 1e-6, max_evaluations: 20_000, restarts: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim()).map(|i| rng.gen_range(self.lo[i]..=self.hi[i])).collect()
    }
}

/// NaN objective values are treated as `+inf` so they never win.
fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], count: &mut usize) -> f64 {
    *count += 1;
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, start: &[f64], bounds: &Bounds) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut best = self.run(&mut f, start, bounds);
        for _ in 0..self.restarts {
            let next = self.run(&mut f, &best.x, bounds);
            let evaluations = best.evaluations + next.evaluations;
            if next.value >= best.value {
                best.evaluations = evaluations;
                break;
            }
            best = Minimum { evaluations, ..next };
        }
        best
    }

    fn run<F>(&self, mut f: F, start: &[f64], bounds: &Bounds) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        assert_eq!(n, bounds.dim(), "start point and bounds differ in dimension");
        let mut evals = 0;
        let mut x0 = start.to_vec();
        bounds.clamp(&mut x0);

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(&mut f, &x0, &mut evals);
        simplex.push((x0.clone(), v0));
        for i in 0..n {
            let mut x = x0.clone();
            // Step away from the nearer wall so the vertex is not clamped back.
            x[i] += if x[i] + self.initial_scale <= bounds.hi[i] { self.initial_scale } else { -self.initial_scale };
            bounds.clamp(&mut x);
            let v = eval(&mut f, &x, &mut evals);
            simplex.push((x, v));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        while evals < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].0.clone();
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if diameter < self.diameter_tolerance {
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
                bounds.clamp(&mut p);
                p
            };

            let xr = along(alpha);
            let fr = eval(&mut f, &xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&mut f, &xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = along(rho);
                    let fc = eval(&mut f, &xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&mut f, &xc, &mut evals);
                    (xc, fc)
                };
                if fc < fr.min(worst.1) {
                    simplex[n] = (xc, fc);
                } else {
                    for vertex in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + sigma * (v - b)).collect();
                        bounds.clamp(&mut x);
                        let v = eval(&mut f, &x, &mut evals);
                        *vertex = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evaluations: evals }
    }

    /// Runs from `starts` points drawn from a ChaCha stream seeded with `seed`
    /// and keeps the best result; ties go to the earlier start.
    pub fn multistart<F>(&self, f: F, bounds: &Bounds, starts: usize, seed: u64) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        self.multistart_from(f, bounds, &[], starts, seed)
    }

    /// As [`multistart`](Self::multistart), but runs from the `given` points first.
    pub fn multistart_from<F>(&self, mut f: F, bounds: &Bounds, given: &[Vec<f64>], starts: usize, seed: u64) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<Minimum> = None;
        let mut total = 0;
        let random = (0..starts.max(1)).map(|_| bounds.sample(&mut rng)).collect::<Vec<_>>();
        for x0 in given.iter().chain(&random) {
            let m = self.minimize(&mut f, x0, bounds);
            total += m.evaluations;
            if best.as_ref().is_none_or(|b| m.value < b.value) {
                best = Some(m);
            }
        }
        let mut best = best.expect("at least one start");
        best.evaluations = total;
        best
    }
}
