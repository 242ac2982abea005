//! Grid sweeps producing the parameter maps as CSV tables.
//!
//! Points are independent; they run on a rayon pool and are written back in
//! row-major order (`eta` outer, source parameter inner). A point that fails
//! is reported with NaN fields and an error note without affecting the rest.

use std::fmt;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use rayon::prelude::*;

use crate::bell::{chsh_value, AngleSettings};
use crate::entanglement::threshold_small_t;
use crate::error::{domain, Error, Result};
use crate::schemes::SchemeKind;
use crate::sources::PhotonStatistics;

use super::{maximize_e_over_t, minimize_ch, optimize_chsh_angles, small_t_state, DEFAULT_SEED, DEFAULT_STARTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceFamily {
    /// x axis is the pair-emission probability `epsilon`.
    DoubleEmission,
    /// x axis is the down-conversion parameter `r`.
    DownConversion,
}

impl SourceFamily {
    pub fn stats(self, eta: f64, x: f64, mmax: usize) -> Result<PhotonStatistics> {
        match self {
            Self::DoubleEmission => PhotonStatistics::double_emission(eta, x),
            Self::DownConversion => PhotonStatistics::down_conversion(eta, x, mmax),
        }
    }

    pub fn x_name(self) -> &'static str {
        match self {
            Self::DoubleEmission => "epsilon",
            Self::DownConversion => "r",
        }
    }
}

/// What is computed at each point besides the threshold flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepTask {
    /// Effective entanglement maximized over `T`.
    Entanglement,
    /// Clauser-Horne combination minimized over displacements.
    ClauserHorne,
    /// CHSH combination at the standard (or optimized) angles.
    Chsh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Figure {
    F3a,
    F3b,
    F4a,
    F4b,
    F6a,
    F6b,
    F8a,
    F8b,
}

impl Figure {
    pub const ALL: [Figure; 8] =
        [Self::F3a, Self::F3b, Self::F4a, Self::F4b, Self::F6a, Self::F6b, Self::F8a, Self::F8b];

    pub fn id(self) -> &'static str {
        match self {
            Self::F3a => "3a",
            Self::F3b => "3b",
            Self::F4a => "4a",
            Self::F4b => "4b",
            Self::F6a => "6a",
            Self::F6b => "6b",
            Self::F8a => "8a",
            Self::F8b => "8b",
        }
    }

    pub fn family(self) -> SourceFamily {
        match self {
            Self::F3a | Self::F4a | Self::F6a | Self::F8a => SourceFamily::DoubleEmission,
            _ => SourceFamily::DownConversion,
        }
    }

    pub fn scheme(self) -> SchemeKind {
        match self {
            Self::F3a | Self::F3b | Self::F4a | Self::F4b => SchemeKind::OnePhoton,
            _ => SchemeKind::TwoPhoton,
        }
    }

    pub fn task(self) -> SweepTask {
        match self {
            Self::F3a | Self::F3b | Self::F6a | Self::F6b => SweepTask::Entanglement,
            Self::F4a | Self::F4b => SweepTask::ClauserHorne,
            Self::F8a | Self::F8b => SweepTask::Chsh,
        }
    }

    /// Down-conversion truncation used for the figure.
    pub fn default_mmax(self) -> usize {
        match self {
            Self::F4b => 3,
            Self::F6b | Self::F8b => 4,
            _ => 6,
        }
    }

    /// Default `(eta, x)` ranges: wide maps for entanglement, the region near
    /// `eta = 1` for the Bell tests.
    pub fn default_ranges(self) -> ((f64, f64), (f64, f64)) {
        let eta = match self.task() {
            SweepTask::Entanglement => (0.5, 1.0),
            _ => (0.8, 1.0),
        };
        let x = match (self.task(), self.family()) {
            (SweepTask::Entanglement, SourceFamily::DoubleEmission) => (0.0, 0.5),
            (SweepTask::Entanglement, SourceFamily::DownConversion) => (0.0, 0.25),
            (_, SourceFamily::DoubleEmission) => (0.0, 0.1),
            (_, SourceFamily::DownConversion) => (0.0, 0.05),
        };
        (eta, x)
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|f| f.id()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| domain(format!("unknown figure {s:?}; valid figures are {}", Self::valid_ids())))
    }
}

/// Evenly spaced samples `lo, lo + step, ..., hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(domain("an axis needs at least one point"));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi < lo || (points > 1 && hi == lo) {
            return Err(domain(format!("axis range [{lo}, {hi}] with {points} points has no positive step")));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        if self.points == 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.points - 1) as f64
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub family: SourceFamily,
    pub scheme: SchemeKind,
    pub task: SweepTask,
    pub eta: Axis,
    pub x: Axis,
    pub mmax: usize,
    pub seed: u64,
    pub starts: usize,
    /// Complex displacements for the Clauser-Horne search.
    pub complex: bool,
    /// Optimize CHSH angles instead of using the standard ones.
    pub optimize_angles: bool,
}

impl SweepGrid {
    pub fn new(
        family: SourceFamily,
        scheme: SchemeKind,
        task: SweepTask,
        eta: Axis,
        x: Axis,
        mmax: usize,
    ) -> Result<Self> {
        if eta.lo < 0.0 || eta.hi > 1.0 {
            return Err(domain(format!("eta range [{}, {}] must lie in [0, 1]", eta.lo, eta.hi)));
        }
        let x_ok = match family {
            SourceFamily::DoubleEmission => x.lo >= 0.0 && x.hi <= 1.0,
            SourceFamily::DownConversion => x.lo >= 0.0 && x.hi < 1.0,
        };
        if !x_ok {
            return Err(domain(format!("{} range [{}, {}] is outside the model domain", family.x_name(), x.lo, x.hi)));
        }
        if family == SourceFamily::DownConversion && mmax < 2 {
            return Err(domain(format!("mmax must be >= 2, got {mmax}")));
        }
        Ok(Self {
            family,
            scheme,
            task,
            eta,
            x,
            mmax,
            seed: DEFAULT_SEED,
            starts: DEFAULT_STARTS,
            complex: false,
            optimize_angles: false,
        })
    }

    /// The figure's default grid at `nx` by `ny` points.
    pub fn for_figure(figure: Figure, nx: usize, ny: usize) -> Result<Self> {
        let ((eta_lo, eta_hi), (x_lo, x_hi)) = figure.default_ranges();
        Self::new(
            figure.family(),
            figure.scheme(),
            figure.task(),
            Axis::new(eta_lo, eta_hi, ny)?,
            Axis::new(x_lo, x_hi, nx)?,
            figure.default_mmax(),
        )
    }

    pub fn len(&self) -> usize {
        self.eta.points * self.x.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(eta, x)` of the `index`-th point in row-major order.
    pub fn point(&self, index: usize) -> (f64, f64) {
        (self.eta.value(index / self.x.points), self.x.value(index % self.x.points))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub eta: f64,
    pub x: f64,
    pub e: f64,
    pub t_opt: f64,
    pub ch_min: f64,
    pub chsh: f64,
    pub entangled_small_t: Option<bool>,
    pub classical: Option<bool>,
    pub eval_count: usize,
    pub error: Option<String>,
}

impl SweepRecord {
    fn empty(eta: f64, x: f64) -> Self {
        Self {
            eta,
            x,
            e: f64::NAN,
            t_opt: f64::NAN,
            ch_min: f64::NAN,
            chsh: f64::NAN,
            entangled_small_t: None,
            classical: None,
            eval_count: 0,
            error: None,
        }
    }
}

fn evaluate(grid: &SweepGrid, eta: f64, x: f64, rec: &mut SweepRecord) -> Result<()> {
    let stats = grid.family.stats(eta, x, grid.mmax)?;
    rec.entangled_small_t = Some(threshold_small_t(&stats, grid.scheme));
    rec.classical = Some(stats.is_classical_candidate());
    match grid.task {
        SweepTask::Entanglement => {
            let opt = maximize_e_over_t(&stats, grid.scheme)?;
            rec.e = opt.value;
            rec.t_opt = opt.t;
            rec.eval_count = opt.evaluations;
        }
        SweepTask::ClauserHorne => {
            if grid.scheme != SchemeKind::OnePhoton {
                return Err(Error::Unsupported("the Clauser-Horne test needs the one-photon scheme".into()));
            }
            let opt = minimize_ch(&small_t_state(&stats, grid.scheme)?, grid.complex, grid.starts, grid.seed)?;
            rec.ch_min = opt.value;
            rec.eval_count = opt.evaluations;
        }
        SweepTask::Chsh => {
            if grid.scheme != SchemeKind::TwoPhoton {
                return Err(Error::Unsupported("the CHSH test needs the two-photon scheme".into()));
            }
            let state = small_t_state(&stats, grid.scheme)?;
            if grid.optimize_angles {
                let opt = optimize_chsh_angles(&state, grid.starts, grid.seed)?;
                rec.chsh = opt.value;
                rec.eval_count = opt.evaluations;
            } else {
                rec.chsh = chsh_value(&state, &AngleSettings::standard())?;
                rec.eval_count = 1;
            }
        }
    }
    Ok(())
}

fn run_point(grid: &SweepGrid, index: usize) -> SweepRecord {
    let (eta, x) = grid.point(index);
    let mut rec = SweepRecord::empty(eta, x);
    let outcome = catch_unwind(AssertUnwindSafe(|| evaluate(grid, eta, x, &mut rec)));
    let note = match outcome {
        Ok(Ok(())) => return rec,
        Ok(Err(e)) => e.to_string(),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            format!("panic: {msg}")
        }
    };
    SweepRecord { error: Some(note), ..SweepRecord::empty(eta, x) }
}

/// Evaluates every grid point on `threads` workers (0 = rayon default).
pub fn run_sweep(grid: &SweepGrid, threads: usize) -> Result<Vec<SweepRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| domain(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(|| (0..grid.len()).into_par_iter().map(|i| run_point(grid, i)).collect()))
}

pub const CSV_HEADER: &str = "eta,x,E,T_opt,CH_min,CHSH,entangled,classical,eval_count";

/// 17 significant digits; `NaN` for values that were not computed.
fn float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "",
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            float(r.eta),
            float(r.x),
            float(r.e),
            float(r.t_opt),
            float(r.ch_min),
            float(r.chsh),
            flag(r.entangled_small_t),
            flag(r.classical),
            r.eval_count
        )?;
    }
    Ok(())
}
