//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//! Runs as a plain binary so the summary is always visible.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use photsub::bell::{ch_value, chsh_value, AngleSettings, DisplacementSettings};
use photsub::entanglement::{eof, ppt_entangled, project_for, threshold_general_t, TwoQubitDm};
use photsub::fock::{MixedState, PureBranch};
use photsub::optimize::sweep::{run_sweep, write_csv, Figure, SweepGrid, SweepRecord};
use photsub::optimize::{minimize_ch, small_t_state, DEFAULT_SEED, DEFAULT_STARTS};
use photsub::schemes::{
    analytic_one_photon_elements, analytic_two_photon_elements, general_t_lhs, general_t_rhs, AnalyticForm, SchemeKind,
};
use photsub::sources::PhotonStatistics;
use photsub::subtraction::{conditional_state, DetectorModel};
use photsub::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(id: u32, name: &str, budget: Option<Duration>, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(_) => (false, "panicked".to_string()),
    };
    if let Some(limit) = budget {
        if elapsed > limit {
            pass = false;
            detail = format!("{detail}; over time budget {limit:?}");
        }
    }
    println!("{} criterion {id:>2} ({name}): {detail} [{:.2?}]", if pass { "PASS" } else { "FAIL" }, elapsed);
    pass
}

/// Uniform draw from the probability simplex, padded with zeros to `len`.
fn random_stats(rng: &mut ChaCha8Rng, len: usize) -> PhotonStatistics {
    let k = rng.gen_range(2..=len);
    let w: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let total: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    probs.resize(len, 0.0);
    PhotonStatistics::custom(probs).unwrap()
}

fn threshold_agreement(
    trials: usize,
    seed: u64,
    margin_value: impl Fn(&PhotonStatistics) -> f64,
    dm: impl Fn(&PhotonStatistics) -> TwoQubitDm,
) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut mismatches) = (0, 0);
    for _ in 0..trials {
        let stats = random_stats(&mut rng, 4);
        let gap = margin_value(&stats);
        if gap.abs() < 1e-9 {
            continue;
        }
        checked += 1;
        if ppt_entangled(&dm(&stats)).unwrap() != (gap > 0.0) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {checked} statistics"))
}

fn c1_one_photon_threshold() -> Outcome {
    threshold_agreement(
        10_000,
        1,
        |s| s.p(1).powi(2) - 8.0 * s.p(0) * s.p(2),
        |s| analytic_one_photon_elements(s, 1e-3, AnalyticForm::SmallT).unwrap().to_dm(),
    )
}

fn c2_two_photon_threshold() -> Outcome {
    threshold_agreement(
        10_000,
        2,
        |s| {
            let (p0, p1, p2, p3) = (s.p(0), s.p(1), s.p(2), s.p(3));
            p1.powi(3) - 5.0 * p0 * p1 * p2 - 3.0 * p0 * p0 * p3
        },
        |s| analytic_two_photon_elements(s, 1e-3).to_dm(),
    )
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `max |a - b| / max |b|` over the 16 entries.
fn relative_error(a: &TwoQubitDm, b: &TwoQubitDm) -> f64 {
    let scale = b.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

fn c3_engine_vs_analytics() -> Outcome {
    let t = 1e-3;
    let mut worst: f64 = 0.0;
    for eta in linspace(0.5, 1.0, 5) {
        for eps in linspace(0.0, 0.3, 5) {
            let stats = PhotonStatistics::double_emission(eta, eps).unwrap();
            for kind in [SchemeKind::OnePhoton, SchemeKind::TwoPhoton] {
                let spec = kind.build_spec(t, DetectorModel::BinaryLowEfficiency).unwrap();
                let engine =
                    project_for(kind, &conditional_state(&vec![stats.clone(); kind.mode_count()], &spec).unwrap())
                        .unwrap();
                let analytic = match kind {
                    SchemeKind::OnePhoton => {
                        analytic_one_photon_elements(&stats, t, AnalyticForm::SmallT).unwrap().to_dm()
                    }
                    SchemeKind::TwoPhoton => analytic_two_photon_elements(&stats, t).to_dm(),
                };
                worst = worst.max(relative_error(&engine, &analytic));
            }
        }
    }
    outcome(worst <= 5e-3, format!("max relative error {worst:.3e} (limit 5e-3) on 5x5 grid, both schemes"))
}

fn c4_general_t_condition() -> Outcome {
    let ts = [0.01, 0.05, 0.2, 0.5, 0.8];
    let (mut checked, mut mismatches, mut non_monotone) = (0, 0, 0);
    for eta in linspace(0.5, 1.0, 10) {
        for eps in linspace(0.0, 0.3, 10) {
            let stats = PhotonStatistics::double_emission(eta, eps).unwrap();
            let (p0, p1, p2) = (stats.p(0), stats.p(1), stats.p(2));
            let mut line = Vec::new();
            for &t in &ts {
                let spec = SchemeKind::OnePhoton.build_spec(t, DetectorModel::BinaryLowEfficiency).unwrap();
                let dm = project_for(
                    SchemeKind::OnePhoton,
                    &conditional_state(&[stats.clone(), stats.clone()], &spec).unwrap(),
                )
                .unwrap();
                let m = dm.matrix();
                let det = m[(1, 2)].norm_sqr() - m[(0, 0)].re * m[(3, 3)].re;
                let gap = general_t_lhs(p0, p1, p2) - general_t_rhs(p0, p1, p2, t);
                let predicted = threshold_general_t(&stats, t).unwrap();
                line.push(predicted);
                if gap.abs() < 1e-6 {
                    continue;
                }
                checked += 1;
                if (det > 0.0) != predicted || ppt_entangled(&dm).unwrap() != predicted {
                    mismatches += 1;
                }
            }
            // Entangled at some T implies entangled at every smaller T.
            if line.windows(2).any(|w| w[1] && !w[0]) {
                non_monotone += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && non_monotone == 0,
        format!("{mismatches} sign mismatches over {checked} points, {non_monotone} non-monotone lines"),
    )
}

fn c5_poisson_saturation() -> Outcome {
    let worst = [0.1, 0.5, 1.0, 2.0]
        .iter()
        .map(|&l| {
            let s = PhotonStatistics::poisson(l, 10).unwrap();
            (s.p(1).powi(2) - 2.0 * s.p(0) * s.p(2)).abs()
        })
        .fold(0.0, f64::max);
    outcome(worst < 1e-12, format!("max |p1^2 - 2 p0 p2| = {worst:.1e}"))
}

fn c6_model_correspondence() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for eta in [0.5, 0.9, 1.0] {
        for r in linspace(0.0005, 0.05, 100) {
            let dc = PhotonStatistics::down_conversion(eta, r, 6).unwrap();
            let de = PhotonStatistics::double_emission(eta, 2.0 * r).unwrap();
            for m in 0..=2 {
                worst_ratio = worst_ratio.max((dc.p(m) - de.p(m)).abs() / (r * r));
            }
        }
    }
    outcome(worst_ratio <= 10.0, format!("max |dp| / r^2 = {worst_ratio:.3} (limit 10)"))
}

/// `max_r [P_{>=2}^{DC}(eta, r) - 2 eta^2 r]` over a log-spaced grid in (0, 0.25).
fn tail_gap(eta: f64) -> f64 {
    let n = 4000;
    let (a, b) = (1e-4f64.ln(), 0.25f64.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / n as f64).exp())
        .map(|r| PhotonStatistics::down_conversion(eta, r, 2).unwrap().multiphoton_mass() - 2.0 * eta * eta * r)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn c7_tail_crossover() -> Outcome {
    let (mut lo, mut hi) = (0.5, 1.0);
    // The tail exceeds the double-emission p2 for strong losses only.
    if !(tail_gap(lo) > 0.0 && tail_gap(hi) <= 0.0) {
        return outcome(false, "no sign change of the multiphoton gap on [0.5, 1]");
    }
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if tail_gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta_star = 0.5 * (lo + hi);
    outcome((eta_star - 0.834).abs() <= 0.005, format!("eta* = {eta_star:.5} (target 0.834 +/- 0.005)"))
}

fn c8_ideal_limits() -> Outcome {
    let perfect = PhotonStatistics::custom(vec![0.0, 1.0]).unwrap();
    let one = SchemeKind::OnePhoton.build_spec(1e-4, DetectorModel::BinaryLowEfficiency).unwrap();
    let e = eof(&project_for(
        SchemeKind::OnePhoton,
        &conditional_state(&[perfect.clone(), perfect.clone()], &one).unwrap(),
    )
    .unwrap())
    .unwrap();
    let two = SchemeKind::TwoPhoton.build_spec(1e-3, DetectorModel::BinaryLowEfficiency).unwrap();
    let rho = project_for(SchemeKind::TwoPhoton, &conditional_state(&vec![perfect; 4], &two).unwrap())
        .unwrap()
        .normalized()
        .unwrap();
    // <Phi+| rho |Phi+> with Phi+ = (|hh> + |vv>) / sqrt 2.
    let fidelity = 0.5 * (rho[(0, 0)] + rho[(0, 3)] + rho[(3, 0)] + rho[(3, 3)]).re;
    outcome(e >= 0.999 && fidelity >= 0.999, format!("E_F(T=1e-4) = {e:.6}, F(Phi+, T=1e-3) = {fidelity:.6}"))
}

fn c9_ch_boundaries() -> Outcome {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let psi = MixedState::pure(PureBranch::from_terms(1.0, 2, &[(&[0, 1], h), (&[1, 0], h)]).unwrap());
    let vac = MixedState::pure(PureBranch::from_terms(1.0, 2, &[(&[0, 0], C64::new(1.0, 0.0))]).unwrap());
    let zero = DisplacementSettings::zero();
    let ch_psi = ch_value(&psi, &zero).unwrap();
    let ch_vac = ch_value(&vac, &zero).unwrap();
    let ideal = small_t_state(&PhotonStatistics::custom(vec![0.0, 1.0]).unwrap(), SchemeKind::OnePhoton).unwrap();
    let ideal_min = minimize_ch(&ideal, false, DEFAULT_STARTS, DEFAULT_SEED).unwrap().value;
    let (eta, r) = (0.95, 0.02);
    let opt = |mmax| {
        let s =
            small_t_state(&PhotonStatistics::down_conversion(eta, r, mmax).unwrap(), SchemeKind::OnePhoton).unwrap();
        minimize_ch(&s, false, DEFAULT_STARTS, DEFAULT_SEED).unwrap().value
    };
    let shift = (opt(3) - opt(6)).abs();
    let pass = (ch_psi + 1.0).abs() < 1e-12 && ideal_min < -1.0 && ch_vac.abs() < 1e-12 && shift < 1e-3;
    outcome(
        pass,
        format!(
            "CH(psi+, 0) = {ch_psi:.15}, CH_min(ideal) = {ideal_min:.6}, CH(vac, 0) = {ch_vac:.1e}, \
             |CH_min(mmax 3) - CH_min(mmax 6)| = {shift:.1e} at (eta, r) = ({eta}, {r})"
        ),
    )
}

fn c10_chsh() -> Outcome {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let phi = MixedState::pure(PureBranch::from_terms(1.0, 4, &[(&[1, 0, 1, 0], h), (&[0, 1, 0, 1], h)]).unwrap());
    let tsirelson = chsh_value(&phi, &AngleSettings::standard()).unwrap();
    let tsirelson_ok = (tsirelson.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-9;

    // Product fixtures: |hh>, a general real product, and a product with a
    // diagonal (hh) and a single-node inconclusive component mixed in.
    let (ca, sa, cb, sb) = (0.3f64.cos(), 0.3f64.sin(), (-1.1f64).cos(), (-1.1f64).sin());
    let product = PureBranch::from_terms(
        1.0,
        4,
        &[
            (&[1, 0, 1, 0], C64::new(ca * cb, 0.0)),
            (&[1, 0, 0, 1], C64::new(ca * sb, 0.0)),
            (&[0, 1, 1, 0], C64::new(sa * cb, 0.0)),
            (&[0, 1, 0, 1], C64::new(sa * sb, 0.0)),
        ],
    )
    .unwrap();
    let hh = PureBranch::from_terms(1.0, 4, &[(&[1, 0, 1, 0], C64::new(1.0, 0.0))]).unwrap();
    let single = PureBranch::from_terms(0.3, 4, &[(&[1, 0, 0, 0], C64::new(1.0, 0.0))]).unwrap();
    let fixtures = [
        MixedState::pure(hh.clone()),
        MixedState::pure(product.clone()),
        MixedState::new(4, vec![hh, product, single], Default::default()).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let s = AngleSettings::new(a[0], a[1], a[2], a[3]);
        let f = &fixtures[rng.gen_range(0..fixtures.len())];
        worst = worst.max(chsh_value(f, &s).unwrap().abs());
    }
    outcome(
        tsirelson_ok && worst <= 2.0 + 1e-12,
        format!("CHSH(Phi+, standard) = {tsirelson:.12}, max |CHSH| over product fixtures = {worst:.6}"),
    )
}

fn c11_boundary_reproduction() -> Outcome {
    let grid = SweepGrid::for_figure(Figure::F3a, 101, 101).unwrap();
    let records = run_sweep(&grid, 0).unwrap();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let (nx, ny) = (grid.x.points, grid.eta.points);
    let at = |i: usize, j: usize| -> &SweepRecord { &records[i * nx + j] };
    let predicate = |i: usize, j: usize| {
        let r = at(i, j);
        let s = PhotonStatistics::double_emission(r.eta, r.x).unwrap();
        s.p(1).powi(2) > 8.0 * s.p(0) * s.p(2)
    };
    let mut far = 0;
    let mut positive = 0;
    for i in 0..ny {
        for j in 0..nx {
            let e_pos = at(i, j).e > 0.0;
            positive += e_pos as usize;
            if e_pos == predicate(i, j) {
                continue;
            }
            // A disagreement is allowed only where the analytic curve passes
            // within one cell, i.e. the predicate flips in the neighbourhood.
            let near = (i.saturating_sub(1)..=(i + 1).min(ny - 1))
                .flat_map(|a| (j.saturating_sub(1)..=(j + 1).min(nx - 1)).map(move |b| (a, b)))
                .any(|(a, b)| predicate(a, b) != predicate(i, j));
            if !near {
                far += 1;
            }
        }
    }
    outcome(
        far == 0 && failed == 0 && positive > 0,
        format!("{positive} of {} cells with E > 0, {far} boundary cells off the curve by more than one cell, {failed} failed points", records.len()),
    )
}

fn csv_bytes(grid: &SweepGrid, threads: usize) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&run_sweep(grid, threads).unwrap(), &mut buf).unwrap();
    buf
}

fn c12_determinism() -> Outcome {
    let mut identical = true;
    let mut rows = 0;
    for (figure, n) in [(Figure::F3b, 6), (Figure::F4a, 3), (Figure::F8b, 3)] {
        let grid = SweepGrid::for_figure(figure, n, n).unwrap();
        let first = csv_bytes(&grid, 0);
        let second = csv_bytes(&grid, 0);
        let single = csv_bytes(&grid, 1);
        identical &= first == second && first == single;
        rows += first.iter().filter(|&&b| b == b'\n').count() - 1;
    }
    outcome(identical, format!("3b/4a/8b sweeps ({rows} rows) byte-identical across two runs and thread counts"))
}

fn main() {
    let s = |secs| Some(Duration::from_secs(secs));
    let results = [
        run(1, "one-photon threshold", s(1), c1_one_photon_threshold),
        run(2, "two-photon threshold", s(1), c2_two_photon_threshold),
        run(3, "engine vs closed forms", s(30), c3_engine_vs_analytics),
        run(4, "general-T condition", s(60), c4_general_t_condition),
        run(5, "Poisson saturation", None, c5_poisson_saturation),
        run(6, "model correspondence", None, c6_model_correspondence),
        run(7, "multiphoton crossover", s(10), c7_tail_crossover),
        run(8, "ideal-source limits", None, c8_ideal_limits),
        run(9, "CH boundaries", None, c9_ch_boundaries),
        run(10, "CHSH", None, c10_chsh),
        run(11, "threshold boundary of the one-photon map", s(600), c11_boundary_reproduction),
        run(12, "determinism", None, c12_determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
