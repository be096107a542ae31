//! Exit criteria. Runs every check, prints one line per criterion and exits
//! nonzero when any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use pnes_channel::info;
use pnes_channel::loss::{self, ChannelParams};
use pnes_channel::protocol::{self, SweepRow, ThresholdSet};
use pnes_channel::states::{Source, StateKind};
use pnes_channel::JointDistribution;

const TAIL_TOL: f64 = 1e-12;

const ORACLE_TOL: f64 = 1e-10;
const KRAUS_TOL: f64 = 1e-12;
const KRAUS_CUTOFF: usize = 8;
const CORRELATION_TOL: f64 = 1e-8;
const MANDEL_TOL: f64 = 1e-8;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const BINARY_ENTROPY_TOL: f64 = 1e-6;
const IDEAL_BINARY_RANGE: (f64, f64) = (0.9, 1.0);
const MONOTONE_SLACK: f64 = 1e-12;
const QUATERNARY_GAP: f64 = 0.1;
const CURVATURE_STEP: f64 = 1e-3;
const NORMALIZATION_TOL: f64 = 1e-9;

const GRID_MEANS: [f64; 3] = [1.0, 5.0, 10.0];
const GRID_ETAS: [f64; 4] = [0.6, 0.85, 0.95, 1.0];
const SWEEP_ETAS: [f64; 6] = [0.6, 0.7, 0.8, 0.9, 0.95, 1.0];

type Outcome = (bool, String);

fn source(kind: StateKind, n: f64) -> Source {
    Source::from_total_mean(kind, n).unwrap()
}

fn lossy(kind: StateKind, n: f64, e1: f64, e2: f64) -> JointDistribution {
    let s = source(kind, n);
    let cutoff = s.auto_cutoff(TAIL_TOL).unwrap();
    loss::joint_lossy(&s, &ChannelParams::new(e1, e2).unwrap(), cutoff, TAIL_TOL).unwrap()
}

fn grid() -> Vec<(StateKind, f64, f64, f64)> {
    let mut out = Vec::new();
    for kind in StateKind::ALL {
        for n in GRID_MEANS {
            for e1 in GRID_ETAS {
                for e2 in GRID_ETAS {
                    out.push((kind, n, e1, e2));
                }
            }
        }
    }
    out
}

fn capacity(kind: StateKind, n: f64, e1: f64, e2: f64, alphabet: usize) -> SweepRow {
    protocol::capacity_point(&source(kind, n), &ChannelParams::new(e1, e2).unwrap(), alphabet, TAIL_TOL).unwrap()
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn oracle_equivalence() -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (kind, n, e1, e2) in grid() {
        let s = source(kind, n);
        let cutoff = s.auto_cutoff(TAIL_TOL).unwrap();
        let closed = lossy(kind, n, e1, e2);
        let ideal = s.ideal_joint(cutoff, TAIL_TOL).unwrap();
        let oracle = loss::thinning_oracle(&ideal, &ChannelParams::new(e1, e2).unwrap()).unwrap();
        let d = closed.max_abs_diff(&oracle).unwrap();
        if d >= worst.0 {
            worst = (d, format!("{kind} N={n} eta=({e1}, {e2})"));
        }
    }
    (
        worst.0 <= ORACLE_TOL,
        format!("max |closed - oracle| = {:.3e} at {} (tol {ORACLE_TOL:e})", worst.0, worst.1),
    )
}

fn kraus_reduction() -> Outcome {
    let channel = ChannelParams::new(0.7, 0.9).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in StateKind::ALL {
        let s = source(kind, 2.0);
        let ideal = s.ideal_joint(KRAUS_CUTOFF, 1.0).unwrap();
        let thinned = loss::thinning_oracle(&ideal, &channel).unwrap();
        let ensemble = loss::ensemble_for(&s, KRAUS_CUTOFF, 1.0).unwrap();
        let literal = loss::kraus_reference(&ensemble, &channel, KRAUS_CUTOFF).unwrap();
        let d = thinned.max_abs_diff(&literal).unwrap();
        ok &= d <= KRAUS_TOL;
        parts.push(format!("{kind} {d:.2e}"));
    }
    (ok, format!("max |thinning - Kraus| at cutoff {KRAUS_CUTOFF}: {} (tol {KRAUS_TOL:e})", parts.join(", ")))
}

/// Correlation index claimed for each family after loss.
fn claimed_correlation(kind: StateKind, n: f64, e1: f64, e2: f64) -> f64 {
    let root = (e1 * e2).sqrt();
    let denom = ((2.0 + n * e1) * (2.0 + n * e2)).sqrt();
    match kind {
        StateKind::Tmc => root,
        StateKind::Twb => (2.0 + n) * root / denom,
        StateKind::Tth => n * root / denom,
    }
}

fn correlation_formulas() -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut tmc_by_eta: Vec<((f64, f64), Vec<f64>)> = Vec::new();
    for (kind, n, e1, e2) in grid() {
        let gamma = info::correlation_index(&info::moments(&lossy(kind, n, e1, e2))).unwrap();
        let idx = StateKind::ALL.iter().position(|k| *k == kind).unwrap();
        worst[idx] = worst[idx].max((gamma - claimed_correlation(kind, n, e1, e2)).abs());
        if kind == StateKind::Tmc {
            match tmc_by_eta.iter_mut().find(|(key, _)| *key == (e1, e2)) {
                Some((_, v)) => v.push(gamma),
                None => tmc_by_eta.push(((e1, e2), vec![gamma])),
            }
        }
    }
    let spread = tmc_by_eta
        .iter()
        .map(|(_, v)| {
            let hi = v.iter().cloned().fold(f64::MIN, f64::max);
            let lo = v.iter().cloned().fold(f64::MAX, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    let ok = worst.iter().all(|w| *w <= CORRELATION_TOL) && spread <= CORRELATION_TOL;
    (
        ok,
        format!(
            "max |moments - formula|: tmc {:.2e}, twb {:.2e}, tth {:.2e}; tmc spread over N {:.2e} (tol {CORRELATION_TOL:e})",
            worst[0], worst[1], worst[2], spread
        ),
    )
}

fn mandel_rescaling() -> Outcome {
    let mut worst = 0.0f64;
    let mut sign_flips = 0;
    for (kind, n, e1, e2) in grid() {
        let s = source(kind, n);
        let q_ideal = s.ideal_mandel_q().unwrap();
        let (m1, m2) = info::marginals(&lossy(kind, n, e1, e2));
        let q1 = info::mandel_q(&m1).unwrap();
        let q2 = info::mandel_q(&m2).unwrap();
        worst = worst.max((q1 - e1 * q_ideal).abs()).max((q2 - e2 * q_ideal).abs());
        let expected_negative = kind == StateKind::Tmc;
        for q in [q1, q2] {
            if (q < 0.0) != expected_negative || q == 0.0 {
                sign_flips += 1;
            }
        }
    }
    (
        worst <= MANDEL_TOL && sign_flips == 0,
        format!("max |Q_j - eta_j Q| = {worst:.2e} (tol {MANDEL_TOL:e}); wrong-sign marginals: {sign_flips}"),
    )
}

fn lossless_pnes() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let mut off = 0.0f64;
    for kind in [StateKind::Tmc, StateKind::Twb] {
        for n in [1.0, 5.0, 10.0, 20.0] {
            let j = lossy(kind, n, 1.0, 1.0);
            for t in 0..j.cutoff() {
                let table = protocol::symbol_table(&j, &ThresholdSet::binary(t)).unwrap();
                off = off.max(table.off_diagonal_mass());
            }
        }
    }
    ok &= off < OFF_DIAGONAL_TOL;
    notes.push(format!("max off-diagonal {off:.1e}"));

    let c = capacity(StateKind::Twb, 1.0, 1.0, 1.0, 2).capacity_bits;
    let target = binary_entropy(1.0 / 3.0);
    ok &= (c - target).abs() <= BINARY_ENTROPY_TOL;
    notes.push(format!("twb N=1 C2 {c:.10} vs H2(1/3) {target:.10}"));

    let mut outside = Vec::new();
    for kind in [StateKind::Tmc, StateKind::Twb] {
        for n in 1..=20 {
            let c = capacity(kind, n as f64, 1.0, 1.0, 2).capacity_bits;
            if !(IDEAL_BINARY_RANGE.0..=IDEAL_BINARY_RANGE.1).contains(&c) {
                outside.push(format!("{kind} N={n}: {c:.4}"));
            }
        }
    }
    ok &= outside.is_empty();
    notes.push(if outside.is_empty() {
        "ideal C2 in [0.9, 1] for N = 1..20".into()
    } else {
        format!("ideal C2 outside [0.9, 1]: {}", outside.join(", "))
    });
    (ok, notes.join("; "))
}

fn ordering() -> Outcome {
    let at = |kind| capacity(kind, 10.0, 0.9, 0.9, 2).capacity_bits;
    let (twb, tmc, tth) = (at(StateKind::Twb), at(StateKind::Tmc), at(StateKind::Tth));
    let mut ok = twb >= tmc && tmc >= tth;
    let mut drops = Vec::new();
    for kind in StateKind::ALL {
        for n in GRID_MEANS {
            let rows = protocol::capacity_sweep(kind, &[n], &SWEEP_ETAS, 2, TAIL_TOL).unwrap();
            for w in rows.windows(2) {
                if w[1].capacity_bits < w[0].capacity_bits - MONOTONE_SLACK {
                    drops.push(format!("{kind} N={n} eta {}->{}", w[0].eta, w[1].eta));
                }
            }
        }
    }
    ok &= drops.is_empty();
    (
        ok,
        format!(
            "N=10 eta=0.9: twb {twb:.4} >= tmc {tmc:.4} >= tth {tth:.4}; capacity drops in eta: {}",
            if drops.is_empty() { "none".to_string() } else { drops.join(", ") }
        ),
    )
}

fn quaternary() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let mut dominance = Vec::new();
    let mut non_consecutive = Vec::new();
    for kind in StateKind::ALL {
        for n in [5.0, 10.0, 20.0] {
            for eta in [0.9, 1.0] {
                let c2 = capacity(kind, n, eta, eta, 2).capacity_bits;
                let r4 = capacity(kind, n, eta, eta, 4);
                if r4.capacity_bits < c2 - MONOTONE_SLACK {
                    dominance.push(format!("{kind} N={n} eta={eta}"));
                }
                if kind == StateKind::Tmc && !r4.thresholds.is_consecutive() {
                    non_consecutive.push(format!("N={n} eta={eta} {:?}", r4.thresholds.thresholds()));
                }
            }
        }
    }
    ok &= dominance.is_empty();
    notes.push(format!("C4 < C2 at: {}", if dominance.is_empty() { "none".into() } else { dominance.join(", ") }));

    let mut far = Vec::new();
    for kind in [StateKind::Tmc, StateKind::Twb] {
        for n in [10.0, 20.0] {
            let c4 = capacity(kind, n, 1.0, 1.0, 4).capacity_bits;
            if 2.0 - c4 > QUATERNARY_GAP {
                far.push(format!("{kind} N={n}: {c4:.3}"));
            }
        }
    }
    ok &= far.is_empty();
    notes.push(format!(
        "ideal C4 more than {QUATERNARY_GAP} below 2: {}",
        if far.is_empty() { "none".into() } else { far.join(", ") }
    ));

    ok &= non_consecutive.is_empty();
    notes.push(format!(
        "non-consecutive tmc thresholds: {}",
        if non_consecutive.is_empty() { "none".into() } else { non_consecutive.join(", ") }
    ));
    (ok, notes.join("; "))
}

fn asymmetry() -> Outcome {
    let mut ok = true;
    let mut violations = Vec::new();
    for eta in [0.6, 0.8, 0.9] {
        let grid = [eta * eta, eta, 1.0];
        for kind in [StateKind::Tmc, StateKind::Twb] {
            let rows = protocol::asymmetry_sweep(kind, 10.0, eta, &grid, 2, TAIL_TOL).unwrap();
            let sym = rows[1].capacity_bits;
            for extreme in [&rows[0], &rows[2]] {
                let c = extreme.capacity_bits;
                let holds = match kind {
                    StateKind::Tmc => c >= sym,
                    _ => c <= sym,
                };
                if !holds {
                    violations.push(format!("{kind} eta={eta} eta1={:.2}: {c:.4} vs sym {sym:.4}", extreme.eta1));
                }
            }
        }
    }
    ok &= violations.is_empty();

    let mut wrong_sign = Vec::new();
    let mut unstable = 0;
    for eta in [0.6, 0.8, 0.9] {
        for kind in [StateKind::Tmc, StateKind::Twb] {
            let s = source(kind, 10.0);
            for n in 0..=5 {
                let c = protocol::coincidence_curvature(&s, eta, n, CURVATURE_STEP).unwrap();
                unstable += usize::from(!c.stable);
                let holds = match kind {
                    StateKind::Tmc => c.extrapolated > 0.0,
                    _ => c.extrapolated < 0.0,
                };
                if !holds {
                    wrong_sign.push(format!("{kind} eta={eta} n={n}: {:.3e}", c.extrapolated));
                }
            }
        }
    }
    ok &= wrong_sign.is_empty() && unstable == 0;
    (
        ok,
        format!(
            "capacity ordering violations: {}; curvature wrong sign: {}; unstable estimates: {unstable}",
            if violations.is_empty() { "none".into() } else { violations.join(", ") },
            if wrong_sign.is_empty() { "none".into() } else { format!("{} ({})", wrong_sign.len(), wrong_sign.join(", ")) }
        ),
    )
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (kind, n, e1, e2) in grid() {
        worst = worst.max((1.0 - lossy(kind, n, e1, e2).total_mass()).abs());
        count += 1;
    }
    for kind in StateKind::ALL {
        for n in [0.0, 20.0] {
            for eta in SWEEP_ETAS {
                worst = worst.max((1.0 - lossy(kind, n, eta, eta).total_mass()).abs());
                count += 1;
            }
        }
    }
    (
        worst <= NORMALIZATION_TOL,
        format!("max |1 - sum P| = {worst:.2e} over {count} distributions (tol {NORMALIZATION_TOL:e})"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("Kraus reduction", kraus_reduction),
        ("correlation formulas", correlation_formulas),
        ("Mandel rescaling", mandel_rescaling),
        ("lossless PNES channel", lossless_pnes),
        ("capacity ordering", ordering),
        ("quaternary protocol", quaternary),
        ("asymmetric loss", asymmetry),
        ("normalization", normalization),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!(
            "[{}] {}. {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
