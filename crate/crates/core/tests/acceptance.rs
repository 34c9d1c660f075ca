//! Acceptance criteria 1–12. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twistknot::braidtrace::{count_band_swaps_2band, global_biorthogonal_berry_phase};
use twistknot::circuit::{block_embed, k_grid, nonunitary_evolution, sweep_rotation_angle, tracked_bands, ShotConfig};
use twistknot::knots::{alexander, burau, jones, kauffman_bracket, reference_winding_entries, writhe, BurauMatrix};
use twistknot::numerics::{eig, normalized};
use twistknot::pipeline::{run, RunConfig, RunResult};
use twistknot::twister::{
    analytic_spectrum_2band, analytic_spectrum_4band, boundary_values_2band, build_hamiltonian, phase_region_2band,
    phase_region_4band, twister_matrix, ANCHORS_2BAND, ANCHORS_4BAND,
};
use twistknot::{BraidWord, KnotClass, LaurentPoly, TwisterSpec, C64};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn word(text: &str, n: usize) -> BraidWord {
    BraidWord::parse(text, n).expect("valid braid word")
}

/// Exact-mode runs shared by several criteria, keyed by (bands, m0, m1, t).
#[derive(Default)]
struct Runs(HashMap<String, RunResult>);

impl Runs {
    fn get(&mut self, spec: TwisterSpec, t: f64) -> Result<&RunResult, String> {
        let key = format!("{:?}-{t}", spec);
        if !self.0.contains_key(&key) {
            let res = run(&RunConfig::exact(spec).with_t(t)).map_err(|e| e.to_string())?;
            self.0.insert(key.clone(), res);
        }
        Ok(&self.0[&key])
    }
}

/// Published headline points: spec, expected word, link class and t.
fn headline() -> Vec<(TwisterSpec, &'static str, KnotClass, f64)> {
    vec![
        (TwisterSpec::two_band(0.5338, 0.6), "s1 s1", KnotClass::HopfLink, 20.0),
        (TwisterSpec::two_band(1.273, 0.6), "s1", KnotClass::Unknot, 25.0),
        (TwisterSpec::two_band(1.8889, 0.6), "", KnotClass::Unlink, 25.0),
        (TwisterSpec::four_band(-0.5, -0.4), "s1 s3 s2 s1 s3 s2", KnotClass::SolomonKnot, 20.0),
        (TwisterSpec::four_band(2.0, 1.1), "s1 s3 s1 s3 s2", KnotClass::HopfChain, 20.0),
    ]
}

fn criterion_1(runs: &mut Runs) -> Outcome {
    let mut words = Vec::new();
    for (spec, expected, _, t) in headline() {
        let res = runs.get(spec.clone(), t)?;
        let got =
            if spec.n_bands == 2 { res.topology.reduced_word.to_string() } else { res.topology.word().to_string() };
        ensure(got == expected, || format!("{spec:?}: word '{got}', expected '{expected}'"))?;
        words.push(if got.is_empty() { "empty".to_string() } else { got });
    }
    Ok(words.join(" | "))
}

fn criterion_2(runs: &mut Runs) -> Outcome {
    let spec = TwisterSpec::two_band(0.5338, 0.6);
    let res = runs.get(spec.clone(), 20.0)?;
    let w = res.topology.analysis.trace.pair(0, 1).and_then(|p| p.values.last().copied()).ok_or("no pair trace")?;
    ensure((w.abs() - 1.0).abs() <= 0.005, || format!("exact |W| = {w:.5}"))?;
    let check_levels = |r: &RunResult| -> Result<(), String> {
        let shifted = &r.topology.analysis.shifted;
        let mut levels = Vec::new();
        for c in &r.topology.analysis.crossings.events {
            let pair = shifted.pair(c.i, c.j).ok_or("missing pair")?;
            let m = shifted.k_grid.partition_point(|&k| k <= c.k).clamp(1, shifted.k_grid.len() - 1);
            let (k0, k1) = (shifted.k_grid[m - 1], shifted.k_grid[m]);
            let f = ((c.k - k0) / (k1 - k0)).clamp(0.0, 1.0);
            let sign = if pair.i == c.i { 1.0 } else { -1.0 };
            let value = sign * (pair.values[m - 1] + f * (pair.values[m] - pair.values[m - 1]));
            ensure((value.abs() - c.level().abs()).abs() <= 0.01, || {
                format!("crossing at k={:.4} reads {value:.4}", c.k)
            })?;
            levels.push(c.level().abs());
        }
        levels.sort_by(f64::total_cmp);
        ensure(levels.len() == 2 && (levels[0] - 0.25).abs() < 1e-12 && (levels[1] - 0.75).abs() < 1e-12, || {
            format!("crossing levels {levels:?}")
        })
    };
    check_levels(res)?;
    let mut sampled = Vec::new();
    for seed in 0..5 {
        let cfg = RunConfig::exact(spec.clone()).with_shots(ShotConfig::sampled(40_000, seed));
        let r = run(&cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let ws = r.topology.analysis.trace.pair(0, 1).and_then(|p| p.values.last().copied()).ok_or("no pair trace")?;
        check_levels(&r).map_err(|e| format!("seed {seed}: {e}"))?;
        sampled.push(ws.abs());
    }
    sampled.sort_by(f64::total_cmp);
    let median = sampled[2];
    ensure((median - 1.0).abs() <= 0.02, || format!("sampled median |W| = {median:.4}"))?;
    Ok(format!("exact W = {:.5}, sampled median = {median:.4}, levels 1/4 and 3/4", w.abs()))
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let mut worst: f64 = 0.0;
    for (m0, m1, class) in ANCHORS_4BAND {
        let res = runs.get(TwisterSpec::four_band(m0, m1), 20.0).map_err(|e| format!("({m0}, {m1}): {e}"))?;
        let got = res.topology.winding.sorted_entries();
        let expected = reference_winding_entries(class);
        ensure(got == expected, || format!("({m0}, {m1}) {class:?}: 𝒲 entries {got:?}, expected {expected:?}"))?;
        let dev = res.topology.winding.max_deviation;
        ensure(dev <= 0.005, || format!("({m0}, {m1}): pre-rounding deviation {dev:.4}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("8/8 matrices match, max pre-rounding deviation {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let s = |e: i64, c: i64| LaurentPoly::s_pow(e, c);
    let half = |e2: i64, c: i64| LaurentPoly::monomial(2 * e2, c);
    let one_minus_s = s(0, 1) - s(1, 1);
    let one_plus_s = s(0, 1) + s(1, 1);
    let one_plus_s2 = s(0, 1) + s(2, 1);
    let rows: Vec<(&str, usize, LaurentPoly, LaurentPoly)> = vec![
        ("s1 s1", 2, one_minus_s.clone(), half(1, -1) + half(5, -1)),
        ("s1", 2, LaurentPoly::one(), LaurentPoly::one()),
        ("", 2, LaurentPoly::zero(), half(-1, -1) + half(1, -1)),
        ("s1 s3 s2 s1 s3 s2", 4, &one_minus_s * &one_plus_s2, half(3, -1) + half(7, -1) + half(9, 1) + half(11, -1)),
        ("s1 s3 s1 s3 s2", 4, one_minus_s.pow(2), &s(1, 1) * &one_plus_s2.pow(2)),
        ("s2 s1 s3 s2", 4, one_minus_s.clone(), half(1, -1) + half(5, -1)),
        ("s2 s1 s3", 4, LaurentPoly::one(), LaurentPoly::one()),
        ("s1 s3", 4, LaurentPoly::zero(), half(-1, -1) + half(1, -1)),
        ("s2 s2", 4, LaurentPoly::zero(), &(&half(-1, -1) * &one_plus_s.pow(2)) * &one_plus_s2),
        ("s2", 4, LaurentPoly::zero(), &s(-1, 1) * &one_plus_s.pow(2)),
        ("", 4, LaurentPoly::zero(), &half(-3, -1) * &one_plus_s.pow(3)),
    ];
    for (text, n, alex, jon) in &rows {
        let w = word(text, *n);
        let a = alexander(&w).map_err(|e| e.to_string())?;
        let j = jones(&w).map_err(|e| e.to_string())?;
        ensure(a == *alex, || format!("Alexander of '{text}' in B{n}: {a}, expected {alex}"))?;
        ensure(j == *jon, || format!("Jones of '{text}' in B{n}: {j}, expected {jon}"))?;
    }
    let a = |terms: &[(i64, i64)]| LaurentPoly::from_a_terms(terms);
    let closures: Vec<(&str, LaurentPoly, i64)> = vec![
        ("s1 s3 s2 s1 s3 s2", a(&[(12, -1), (4, -1), (0, 1), (-4, -1)]), 6),
        ("s1 s3 s1 s3 s2", a(&[(11, -1), (3, -2), (-5, -1)]), 5),
        ("s2 s1 s3 s2", a(&[(10, -1), (2, -1)]), 4),
        ("s2 s1 s3", a(&[(9, -1)]), 3),
        ("s1 s3", a(&[(8, -1), (4, -1)]), 2),
        ("s2 s2", a(&[(8, -1), (4, -2), (0, -2), (-4, -2), (-8, -1)]), 2),
        ("s2", a(&[(7, -1), (3, -2), (-1, -1)]), 1),
        ("", a(&[(6, -1), (2, -3), (-2, -3), (-6, -1)]), 0),
    ];
    // Loop-expanded forms: −(A⁴+1)²(A⁸+1)/A⁸, −(A⁴+1)²/A, −(A⁴+1)³/A⁶.
    let a4p1 = a(&[(4, 1), (0, 1)]);
    let expanded = [
        ("s2 s2", &(&a(&[(-8, -1)]) * &a4p1.pow(2)) * &a(&[(8, 1), (0, 1)])),
        ("s2", &a(&[(-1, -1)]) * &a4p1.pow(2)),
        ("", &a(&[(-6, -1)]) * &a4p1.pow(3)),
    ];
    for (text, bracket, w) in &closures {
        let bw = word(text, 4);
        let b = kauffman_bracket(&bw).map_err(|e| e.to_string())?;
        ensure(b == *bracket, || {
            format!("bracket of '{text}': {}, expected {}", b.to_a_string(), bracket.to_a_string())
        })?;
        ensure(writhe(&bw) == *w, || format!("writhe of '{text}': {}", writhe(&bw)))?;
    }
    for (text, poly) in &expanded {
        let b = kauffman_bracket(&word(text, 4)).map_err(|e| e.to_string())?;
        ensure(b == *poly, || format!("expanded bracket of '{text}' differs"))?;
    }
    Ok("11 table rows, 8 brackets (+3 loop-expanded), writhes 6,5,4,3,2,2,1,0".into())
}

fn criterion_5() -> Outcome {
    let b = burau(&word("s1 s3 s2 s1 s3 s2", 4));
    let z = LaurentPoly::zero;
    let s = |e| LaurentPoly::s_pow(e, -1);
    let expected = BurauMatrix::from_entries(3, vec![z(), z(), s(1), z(), s(2), z(), s(3), z(), z()]);
    ensure(b == expected, || format!("{b:?}"))?;
    Ok("anti-diagonal (−s, −s², −s³)".into())
}

fn set_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = k_grid(100);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (m0, m1) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        for &k in &grid {
            for spec in [TwisterSpec::two_band(m0, m1), TwisterSpec::four_band(m0, m1)] {
                let h = build_hamiltonian(&spec, k).map_err(|e| e.to_string())?;
                let numeric = eig(&h).map_err(|e| e.to_string())?.eigenvalues;
                let analytic: Vec<C64> = if spec.n_bands == 2 {
                    analytic_spectrum_2band(m0, m1, k).to_vec()
                } else {
                    analytic_spectrum_4band(m0, m1, k).to_vec()
                };
                let d = set_distance(&analytic, &numeric);
                ensure(d <= 1e-9, || format!("({m0:.4}, {m1:.4}) N={} k={k:.4}: distance {d:.2e}", spec.n_bands))?;
                worst = worst.max(d);
            }
        }
    }
    let mut twister_worst: f64 = 0.0;
    for n in 2..=5usize {
        for v in 1..=2 * n {
            for &k in &grid {
                let m = twister_matrix(n, v, k).map_err(|e| e.to_string())?;
                let target = C64::new(0.0, v as f64 * k).exp();
                for e in eig(&m).map_err(|e| e.to_string())?.eigenvalues {
                    let d = (e.powu(n as u32) - target).norm();
                    ensure(d <= 1e-12, || format!("pure twister N={n} V={v} k={k:.4}: |E^N − e^(iVk)| = {d:.2e}"))?;
                    twister_worst = twister_worst.max(d);
                }
            }
        }
    }
    Ok(format!("model spectra max distance {worst:.1e}, pure twister {twister_worst:.1e}"))
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    normalized(&v)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for sample in 0..10 {
        let (m0, m1) = (rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
        let spec = if sample % 2 == 0 { TwisterSpec::two_band(m0, m1) } else { TwisterSpec::four_band(m0, m1) };
        let k = rng.random_range(0.0..2.0 * PI);
        let lambda = rng.random_range(0.0..2.0 * PI);
        let h = build_hamiltonian(&spec, k).map_err(|e| e.to_string())?;
        let u_h = nonunitary_evolution(&h, 1.0, lambda).map_err(|e| e.to_string())?;
        let emb = block_embed(&u_h).map_err(|e| e.to_string())?;
        let n = emb.system_dim();
        for _ in 0..10 {
            let psi = random_state(&mut rng, n);
            let mut full = psi.clone();
            full.resize(2 * n, C64::new(0.0, 0.0));
            let out = emb.u_matrix.mul_vec(&full);
            let want = u_h.mul_vec(&psi);
            for (got, w) in out[..n].iter().zip(&want) {
                let d = (got - w * emb.scale_u).norm();
                ensure(d <= 1e-8, || format!("sample {sample}: deviation {d:.2e}"))?;
                worst = worst.max(d);
            }
        }
    }
    Ok(format!("100 states over 10 samples, max deviation {worst:.1e}"))
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    for (spec, _, _, t) in headline() {
        let res = runs.get(spec.clone(), t)?;
        let f = res.min_fidelity();
        ensure(f > 0.999, || format!("{spec:?} t={t}: min overlap {f:.5}"))?;
        parts.push(format!("{f:.6}"));
    }
    Ok(format!("min overlaps {}", parts.join(", ")))
}

fn criterion_9() -> Outcome {
    let spec = TwisterSpec::four_band(-0.5, -0.4);
    let grid = k_grid(100);
    let bands = tracked_bands(&spec, &grid).map_err(|e| e.to_string())?;
    let mut worst: f64 = 1.0;
    for (&k, dec) in grid.iter().zip(&bands) {
        let h = build_hamiltonian(&spec, k).map_err(|e| e.to_string())?;
        for b in 0..4 {
            let (best, _) = sweep_rotation_angle(&h, &dec.right[b], 20.0, 720).map_err(|e| e.to_string())?;
            ensure(best.overlap > 0.99, || format!("band {b} k={k:.4}: best overlap {:.4}", best.overlap))?;
            worst = worst.min(best.overlap);
        }
    }
    Ok(format!("400/400 (band, k) reach overlap > 0.99, minimum {worst:.4}"))
}

fn criterion_10() -> Outcome {
    let grid = k_grid(400);
    let (mut checked, mut skipped) = (0, 0);
    for i in 0..20 {
        for j in 0..20 {
            let m0 = -3.0 + 0.3 * (i as f64 + 0.5);
            let m1 = -3.0 + 0.3 * (j as f64 + 0.5);
            let margin =
                boundary_values_2band(m0, m1).into_iter().flatten().map(f64::abs).fold(f64::INFINITY, f64::min);
            if margin < 0.05 || (m1 + 1.0).abs() < 0.05 {
                skipped += 1;
                continue;
            }
            let nu = count_band_swaps_2band(m0, m1).map_err(|e| e.to_string())?;
            let gamma =
                global_biorthogonal_berry_phase(&TwisterSpec::two_band(m0, m1), &grid).map_err(|e| e.to_string())?;
            ensure(gamma as usize == nu % 2, || format!("({m0:.2}, {m1:.2}): γ = {gamma}, ν_E = {nu}"))?;
            checked += 1;
        }
    }
    let mut anchors = Vec::new();
    for (m0, m1, class) in ANCHORS_2BAND {
        let nu = count_band_swaps_2band(m0, m1).map_err(|e| e.to_string())?;
        let gamma =
            global_biorthogonal_berry_phase(&TwisterSpec::two_band(m0, m1), &grid).map_err(|e| e.to_string())?;
        ensure(gamma as usize == nu % 2, || format!("anchor {class:?}: γ = {gamma}, ν_E = {nu}"))?;
        anchors.push(format!("{}:γ={gamma}", class.name()));
    }
    Ok(format!("{checked} cells agree ({skipped} boundary cells skipped); {}", anchors.join(" ")))
}

fn criterion_11() -> Outcome {
    let jitters = [(0.0, 0.0), (1e-6, 1e-6), (1e-6, -1e-6), (-1e-6, 1e-6), (-1e-6, -1e-6)];
    let mut count = 0;
    for (n, anchors) in [(2, ANCHORS_2BAND.to_vec()), (4, ANCHORS_4BAND.to_vec())] {
        for (m0, m1, class) in anchors {
            for (d0, d1) in jitters {
                let region =
                    if n == 2 { phase_region_2band(m0 + d0, m1 + d1) } else { phase_region_4band(m0 + d0, m1 + d1) };
                let label = region.map_err(|e| format!("({m0}, {m1}) N={n}: {e}"))?.label;
                ensure(label == class, || format!("({}, {}) N={n}: {label:?}, expected {class:?}", m0 + d0, m1 + d1))?;
            }
            count += 1;
        }
    }
    Ok(format!("{count}/11 anchors stable under ±1e−6 jitter"))
}

fn criterion_12() -> Outcome {
    let spec = TwisterSpec::two_band(0.5338, 0.6);
    let start = Instant::now();
    let mut infidelities = Vec::new();
    let mut recovered = 0;
    for seed in 0..20 {
        let cfg = RunConfig::exact(spec.clone()).with_shots(ShotConfig::sampled(40_000, 1000 + seed));
        match run(&cfg) {
            Ok(r) => {
                infidelities.extend(r.fidelity.iter().flatten().map(|f| 1.0 - f * f));
                if r.topology.reduced_word.to_string() == "s1 s1" {
                    recovered += 1;
                }
            }
            Err(e) => eprintln!("  seed {seed}: {e}"),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    infidelities.sort_by(f64::total_cmp);
    let median = infidelities.get(infidelities.len() / 2).copied().unwrap_or(f64::NAN);
    let rate = recovered as f64 / 20.0;
    ensure(median <= 1e-3, || format!("median infidelity {median:.2e}"))?;
    ensure(rate >= 0.95, || format!("word recovery {recovered}/20"))?;
    ensure(elapsed <= 600.0, || format!("runtime {elapsed:.0} s"))?;
    Ok(format!("median infidelity {median:.2e}, recovery {recovered}/20, {elapsed:.1} s"))
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let mut failed = 0;
    let mut report = |n: usize, outcome: Outcome, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2}: {detail} [{secs:.1} s]");
            }
        }
    };
    let t = Instant::now();
    report(1, criterion_1(&mut runs), t);
    let t = Instant::now();
    report(2, criterion_2(&mut runs), t);
    let t = Instant::now();
    report(3, criterion_3(&mut runs), t);
    let t = Instant::now();
    report(4, criterion_4(), t);
    let t = Instant::now();
    report(5, criterion_5(), t);
    let t = Instant::now();
    report(6, criterion_6(), t);
    let t = Instant::now();
    report(7, criterion_7(), t);
    let t = Instant::now();
    report(8, criterion_8(&mut runs), t);
    let t = Instant::now();
    report(9, criterion_9(), t);
    let t = Instant::now();
    report(10, criterion_10(), t);
    let t = Instant::now();
    report(11, criterion_11(), t);
    let t = Instant::now();
    report(12, criterion_12(), t);
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
