//! Optimization over setup parameters, and parameter-map sweeps.
//!
//! Every optimizer here is derivative-free and deterministic for a given seed.
//! The effective entanglement can have a kink where it first becomes nonzero,
//! so the transmission is optimized by a coarse scan followed by golden-section
//! refinement rather than by gradients.

pub mod nelder_mead;
pub mod sweep;

use std::f64::consts::FRAC_PI_2;

use crate::bell::{chsh_value, AngleSettings, DisplacementSettings};
use crate::entanglement::{effective_eof_projected, ProjectedExpansion};
use crate::error::{Error, Result};
use crate::fock::MixedState;
use crate::schemes::SchemeKind;
use crate::sources::PhotonStatistics;
use crate::subtraction::{conditional_state_small_t, DetectorModel, SubtractionExpansion, TermFilter};
use crate::C64;

pub use nelder_mead::{Bounds, Minimum, NelderMead};

/// Transmission search interval.
pub const T_MIN: f64 = 1e-6;
pub const T_MAX: f64 = 1.0 - 1e-6;
/// Points of the log-uniform coarse scan over `[T_MIN, T_MAX]`.
pub const T_GRID_POINTS: usize = 64;
/// Golden-section refinement stops once the bracket is narrower than this.
pub const T_TOLERANCE: f64 = 1e-5;

/// Default number of multistart runs and seed for the Bell optimizations.
pub const DEFAULT_STARTS: usize = 16;
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Displacements are searched in `[-DISPLACEMENT_BOX, DISPLACEMENT_BOX]` per component.
pub const DISPLACEMENT_BOX: f64 = 3.0;

/// Transmission at which small-`T` states are built; the value only sets the
/// overall normalization, which every Bell quantity divides out.
const SMALL_T_PROBE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TOptimum {
    pub t: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// The coarse scan abscissae.
pub fn t_grid() -> Vec<f64> {
    let (a, b) = (T_MIN.ln(), T_MAX.ln());
    let mut grid: Vec<f64> =
        (0..T_GRID_POINTS).map(|i| (a + (b - a) * i as f64 / (T_GRID_POINTS - 1) as f64).exp()).collect();
    grid[0] = T_MIN;
    grid[T_GRID_POINTS - 1] = T_MAX;
    grid
}

/// Maximizes `f` over `T`: coarse log-uniform scan, then golden-section search
/// inside the bracket around the best scan point. The result is never worse
/// than the best scan point. If `f` vanishes on the whole scan, returns the
/// smallest scan point with value 0.
pub fn maximize_over_t<F>(mut f: F) -> TOptimum
where
    F: FnMut(f64) -> f64,
{
    let grid = t_grid();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut evaluations = grid.len();
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best_i = i;
            best = v;
        }
    }
    if !(best > 0.0) {
        return TOptimum { t: grid[0], value: 0.0, evaluations };
    }
    let mut best_t = grid[best_i];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = grid[best_i.saturating_sub(1)];
    let mut hi = grid[(best_i + 1).min(grid.len() - 1)];
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    evaluations += 2;
    let mut consider = |t: f64, v: f64| {
        if v > best {
            best = v;
            best_t = t;
        }
    };
    consider(x1, f1);
    consider(x2, f2);
    while hi - lo > T_TOLERANCE {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            consider(x1, f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            consider(x2, f2);
        }
        evaluations += 1;
    }
    TOptimum { t: best_t, value: best, evaluations }
}

/// The projected qubit matrix of `kind` as a function of `T`, in the low-`zeta`
/// limit with the default heralding pattern. Only terms that can reach the
/// qubit subspace are generated.
pub fn projected_expansion(stats: &PhotonStatistics, kind: SchemeKind) -> Result<ProjectedExpansion> {
    let filter = match kind {
        SchemeKind::OnePhoton => TermFilter::residual(0, 2),
        SchemeKind::TwoPhoton => TermFilter::residual(2, 2),
    };
    let sources = vec![stats.clone(); kind.mode_count()];
    let expansion = SubtractionExpansion::build(
        &sources,
        &kind.unitary(),
        DetectorModel::BinaryLowEfficiency,
        &kind.default_clicks(),
        filter,
    )?;
    ProjectedExpansion::new(kind, &expansion)
}

/// `max_T E(T)` for identical sources with statistics `stats`.
pub fn maximize_e_over_t(stats: &PhotonStatistics, kind: SchemeKind) -> Result<TOptimum> {
    let curve = projected_expansion(stats, kind)?;
    let mut failure = None;
    let opt = maximize_over_t(|t| match effective_eof_projected(&curve.at(t), kind) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(opt),
    }
}

/// The heralded state of `kind` in the low-`zeta`, small-`T` limit, as used by
/// the Bell tests.
pub fn small_t_state(stats: &PhotonStatistics, kind: SchemeKind) -> Result<MixedState> {
    let sources = vec![stats.clone(); kind.mode_count()];
    let spec = kind.build_spec(SMALL_T_PROBE, DetectorModel::BinaryLowEfficiency)?;
    conditional_state_small_t(&sources, &spec)
}

/// Fast evaluator of the Clauser-Horne combination for a fixed two-mode state.
#[derive(Clone, Debug)]
pub struct ChEvaluator {
    /// Per branch: `(n1, n2, sqrt(w) A(n1, n2))`.
    branches: Vec<Vec<(usize, usize, C64)>>,
    max_n: usize,
    inv_sqrt_fact: Vec<f64>,
    trace: f64,
}

impl ChEvaluator {
    pub fn new(state: &MixedState) -> Result<Self> {
        state.check_modes(2)?;
        let trace = state.trace();
        if !(trace > 0.0) {
            return Err(Error::ZeroTrace);
        }
        let mut max_n = 0;
        let branches: Vec<Vec<_>> = state
            .branches()
            .iter()
            .map(|b| {
                let s = b.weight().sqrt();
                b.amplitudes()
                    .iter()
                    .map(|(f, &a)| {
                        let (n1, n2) = (f.get(0) as usize, f.get(1) as usize);
                        max_n = max_n.max(n1).max(n2);
                        (n1, n2, a * s)
                    })
                    .collect()
            })
            .collect();
        let mut inv_sqrt_fact = vec![1.0; max_n + 1];
        for n in 1..=max_n {
            inv_sqrt_fact[n] = inv_sqrt_fact[n - 1] / (n as f64).sqrt();
        }
        Ok(Self { branches, max_n, inv_sqrt_fact, trace })
    }

    /// `conj(z)^n / sqrt(n!)` for `n = 0..=max_n`.
    fn powers(&self, z: C64) -> Vec<C64> {
        let zc = z.conj();
        let mut out = Vec::with_capacity(self.max_n + 1);
        let mut p = C64::new(1.0, 0.0);
        for n in 0..=self.max_n {
            out.push(p * self.inv_sqrt_fact[n]);
            p *= zc;
        }
        out
    }

    fn joint_from(&self, pa: &[C64], pb: &[C64], env: f64) -> f64 {
        let mut sum = 0.0;
        for b in &self.branches {
            let amp: C64 = b.iter().map(|&(n1, n2, c)| c * pa[n1] * pb[n2]).sum();
            sum += amp.norm_sqr();
        }
        sum * env / self.trace
    }

    fn marginal_from(&self, p: &[C64], env: f64, mode: usize) -> f64 {
        let mut sum = 0.0;
        let mut partial = vec![C64::default(); self.max_n + 1];
        for b in &self.branches {
            partial.iter_mut().for_each(|z| *z = C64::default());
            for &(n1, n2, c) in b {
                let (contracted, kept) = if mode == 0 { (n1, n2) } else { (n2, n1) };
                partial[kept] += c * p[contracted];
            }
            sum += partial.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        sum * env / self.trace
    }

    pub fn q_joint(&self, alpha: C64, beta: C64) -> f64 {
        let env = (-alpha.norm_sqr() - beta.norm_sqr()).exp();
        self.joint_from(&self.powers(alpha), &self.powers(beta), env)
    }

    pub fn ch(&self, s: &DisplacementSettings) -> f64 {
        let (pa, pap, pb, pbp) =
            (self.powers(s.alpha), self.powers(s.alpha_p), self.powers(s.beta), self.powers(s.beta_p));
        let e = |z: C64| (-z.norm_sqr()).exp();
        self.joint_from(&pa, &pb, e(s.alpha) * e(s.beta))
            + self.joint_from(&pap, &pb, e(s.alpha_p) * e(s.beta))
            + self.joint_from(&pa, &pbp, e(s.alpha) * e(s.beta_p))
            - self.joint_from(&pap, &pbp, e(s.alpha_p) * e(s.beta_p))
            - self.marginal_from(&pa, e(s.alpha), 0)
            - self.marginal_from(&pb, e(s.beta), 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChOptimum {
    pub settings: DisplacementSettings,
    pub value: f64,
    pub evaluations: usize,
}

fn settings_from(x: &[f64], complex: bool) -> DisplacementSettings {
    let z = |i: usize| if complex { C64::new(x[2 * i], x[2 * i + 1]) } else { C64::new(x[i], 0.0) };
    DisplacementSettings { alpha: z(0), alpha_p: z(1), beta: z(2), beta_p: z(3) }
}

/// Minimizes the Clauser-Horne combination over displacements in
/// `[-3, 3]` per real component; `complex` doubles the search dimension,
/// starting from the real optimum as well as from random points.
pub fn minimize_ch(state: &MixedState, complex: bool, starts: usize, seed: u64) -> Result<ChOptimum> {
    let eval = ChEvaluator::new(state)?;
    let nm = NelderMead::default();
    let real = nm.multistart(
        |x| eval.ch(&settings_from(x, false)),
        &Bounds::uniform(4, -DISPLACEMENT_BOX, DISPLACEMENT_BOX),
        starts,
        seed,
    );
    if !complex {
        return Ok(ChOptimum {
            settings: settings_from(&real.x, false),
            value: real.value,
            evaluations: real.evaluations,
        });
    }
    // The real optimum, embedded, seeds the complex search so it can only improve on it.
    let embedded: Vec<f64> = real.x.iter().flat_map(|&v| [v, 0.0]).collect();
    let m = nm.multistart_from(
        |x| eval.ch(&settings_from(x, true)),
        &Bounds::uniform(8, -DISPLACEMENT_BOX, DISPLACEMENT_BOX),
        &[embedded],
        starts,
        seed,
    );
    Ok(ChOptimum { settings: settings_from(&m.x, true), value: m.value, evaluations: real.evaluations + m.evaluations })
}

/// `(k_a, n_a, k_b, n_b, sqrt(w) A)`: `k` photons in the node's first mode out of `n`.
type PortTerm = (usize, usize, usize, usize, C64);

/// Exact polarization correlation of a fixed four-mode state.
///
/// The plates conserve the photon number `n` at each node, and a node counts
/// only if all of its photons leave through one port. So every term reduces
/// to contracting the amplitudes with the rows `<n,0| R` and `<0,n| R` of the
/// rotation, which have a closed binomial form.
#[derive(Clone, Debug)]
struct PortSums {
    /// Per branch, terms with photons at both nodes.
    branches: Vec<Vec<PortTerm>>,
    max_n: usize,
    /// `sqrt(binomial(n, k))`, indexed `[n][k]`.
    sqrt_binom: Vec<Vec<f64>>,
    trace: f64,
}

impl PortSums {
    fn new(state: &MixedState) -> Result<Self> {
        state.check_modes(4)?;
        let trace = state.trace();
        if !(trace > 0.0) {
            return Err(Error::ZeroTrace);
        }
        let mut max_n = 0;
        let branches = state
            .branches()
            .iter()
            .map(|b| {
                let s = b.weight().sqrt();
                b.amplitudes()
                    .iter()
                    .filter_map(|(f, &a)| {
                        let o = |m| f.get(m) as usize;
                        let (na, nb) = (o(0) + o(1), o(2) + o(3));
                        if na == 0 || nb == 0 {
                            return None;
                        }
                        max_n = max_n.max(na).max(nb);
                        Some((o(0), na, o(2), nb, a * s))
                    })
                    .collect()
            })
            .collect();
        let mut sqrt_binom = vec![vec![1.0]];
        for n in 1..=max_n {
            let prev = &sqrt_binom[n - 1];
            let row: Vec<f64> = (0..=n)
                .map(|k| {
                    let below = |j: usize| prev.get(j).map_or(0.0, |v| v * v);
                    let left: f64 = if k == 0 { 0.0 } else { below(k - 1) };
                    (left + below(k)).sqrt()
                })
                .collect();
            sqrt_binom.push(row);
        }
        Ok(Self { branches, max_n, sqrt_binom, trace })
    }

    /// `[port][n][k]`: amplitude for `|k, n-k>` to leave entirely through
    /// `port` of a node whose mode map is `[[c, s], [s, -c]]`.
    fn port_rows(&self, phi: f64) -> [Vec<Vec<f64>>; 2] {
        let (s, c) = phi.sin_cos();
        let row = |x: f64, y: f64| -> Vec<Vec<f64>> {
            (0..=self.max_n)
                .map(|n| (0..=n).map(|k| self.sqrt_binom[n][k] * x.powi(k as i32) * y.powi((n - k) as i32)).collect())
                .collect()
        };
        [row(c, s), row(s, -c)]
    }

    /// `P13 - P14 - P23 + P24`, with node B's angle in the mirrored frame.
    fn correlation(&self, theta_a: f64, theta_b: f64) -> f64 {
        let ua = self.port_rows(theta_a);
        let ub = self.port_rows(-theta_b);
        let dim = self.max_n + 1;
        let mut amp = vec![[C64::default(); 4]; dim * dim];
        let mut sum = 0.0;
        for b in &self.branches {
            amp.iter_mut().for_each(|a| *a = [C64::default(); 4]);
            for &(ka, na, kb, nb, c) in b {
                let cell = &mut amp[na * dim + nb];
                for (i, (x, y)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                    cell[i] += c * (ua[x][na][ka] * ub[y][nb][kb]);
                }
            }
            for cell in &amp {
                sum += cell[0].norm_sqr() - cell[1].norm_sqr() - cell[2].norm_sqr() + cell[3].norm_sqr();
            }
        }
        sum / self.trace
    }
}

/// Fast evaluator of the CHSH combination for a fixed four-mode state.
///
/// With at most `N` photons per node, the port amplitudes are homogeneous of
/// degree `n <= N` in `(cos, sin)`, so the correlation is a trigonometric
/// polynomial of order `N` in `2 theta_a` and `2 theta_b`. It is sampled
/// exactly on a `(2N+1)^2` grid once and then evaluated from its Fourier
/// coefficients.
#[derive(Clone, Debug)]
pub struct ChshEvaluator {
    order: usize,
    /// `c[(p + N) * (2N + 1) + (q + N)]` multiplies `exp(2i (p theta_a + q theta_b))`.
    coeffs: Vec<C64>,
}

impl ChshEvaluator {
    pub fn new(state: &MixedState) -> Result<Self> {
        let exact = PortSums::new(state)?;
        let order = exact.max_n;
        let m = 2 * order + 1;
        let angle = |j: usize| std::f64::consts::PI * j as f64 / m as f64;
        let samples: Vec<f64> = (0..m * m).map(|i| exact.correlation(angle(i / m), angle(i % m))).collect();
        let n = order as i64;
        let mut coeffs = Vec::with_capacity(m * m);
        for p in -n..=n {
            for q in -n..=n {
                let mut c = C64::default();
                for (i, &v) in samples.iter().enumerate() {
                    let (j, l) = ((i / m) as f64, (i % m) as f64);
                    let phase = -2.0 * std::f64::consts::PI * (p as f64 * j + q as f64 * l) / m as f64;
                    c += C64::from_polar(v, phase);
                }
                coeffs.push(c / (m * m) as f64);
            }
        }
        Ok(Self { order, coeffs })
    }

    /// `exp(2i k theta)` for `k = -N..=N`.
    fn phases(&self, theta: f64) -> Vec<C64> {
        let n = self.order as i64;
        (-n..=n).map(|k| C64::from_polar(1.0, 2.0 * k as f64 * theta)).collect()
    }

    /// `P13 - P14 - P23 + P24` at the given plate angles.
    pub fn correlation(&self, theta_a: f64, theta_b: f64) -> f64 {
        let (ea, eb) = (self.phases(theta_a), self.phases(theta_b));
        let m = ea.len();
        let mut sum = C64::default();
        for (p, a) in ea.iter().enumerate() {
            let row: C64 = self.coeffs[p * m..(p + 1) * m].iter().zip(&eb).map(|(c, b)| c * b).sum();
            sum += a * row;
        }
        sum.re
    }

    pub fn chsh(&self, s: &AngleSettings) -> f64 {
        self.correlation(s.theta_a, s.theta_b)
            + self.correlation(s.theta_a_p, s.theta_b)
            + self.correlation(s.theta_a, s.theta_b_p)
            - self.correlation(s.theta_a_p, s.theta_b_p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshOptimum {
    pub angles: AngleSettings,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `|CHSH|` over the four analyser angles; the reported value keeps its sign.
pub fn optimize_chsh_angles(state: &MixedState, starts: usize, seed: u64) -> Result<ChshOptimum> {
    let angles = |x: &[f64]| AngleSettings::new(x[0], x[1], x[2], x[3]);
    let standard = AngleSettings::standard();
    let standard_value = chsh_value(state, &standard)?;
    let bounds = Bounds::uniform(4, -FRAC_PI_2, FRAC_PI_2);
    let eval = ChshEvaluator::new(state)?;
    let m = NelderMead::default().multistart(|x| -eval.chsh(&angles(x)).abs(), &bounds, starts, seed);
    let evaluations = m.evaluations + 1;
    if standard_value.abs() >= -m.value {
        return Ok(ChshOptimum { angles: standard, value: standard_value, evaluations });
    }
    let best = angles(&m.x);
    Ok(ChshOptimum { angles: best, value: chsh_value(state, &best)?, evaluations })
}
