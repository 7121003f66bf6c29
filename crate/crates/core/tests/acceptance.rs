//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

use std::time::Instant;

use overindep::constructions::*;
use overindep::cylinder::oracle_measure;
use overindep::rational::q;
use overindep::verify::*;
use overindep::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn random_union(rng: &mut ChaCha8Rng, k: u8, max_window: i64) -> CylinderUnion {
    let start = rng.gen_range(-5..=5);
    let pieces = rng.gen_range(1..=4);
    let words = (0..pieces).map(|_| {
        let len = rng.gen_range(1..=max_window.min(4));
        let off = start + rng.gen_range(0..=max_window - len);
        let word: Vec<u8> = (0..len).map(|_| rng.gen_range(0..k)).collect();
        CylinderUnion::cylinder(k, &Cylinder::new(off, word))
    });
    CylinderUnion::union_all(k, words)
}

fn nontrivial_union(rng: &mut ChaCha8Rng, sys: &BernoulliSystem) -> CylinderUnion {
    loop {
        let u = random_union(rng, sys.alphabet() as u8, 10);
        let m = u.measure(sys).unwrap();
        if !m.is_zero() && !m.is_one() {
            return u;
        }
    }
}

fn exact_core() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let systems = [BernoulliSystem::fair(), BernoulliSystem::new(vec![q(1, 3), q(2, 3)]).unwrap()];
    let mut bad = 0;
    for i in 0..10_000 {
        let sys = &systems[i % 2];
        let k = sys.alphabet() as u8;
        let a = random_union(&mut rng, k, 10);
        let b = random_union(&mut rng, k, 10);
        let ma = a.measure(sys).unwrap();
        let mb = b.measure(sys).unwrap();
        let ok = ma == oracle_measure(&a, sys).unwrap()
            && a.union(&b).measure(sys).unwrap() + a.intersect(&b).measure(sys).unwrap() == &ma + &mb
            && a.shift(rng.gen_range(-50..=50)).measure(sys).unwrap() == ma;
        bad += !ok as u32;
    }
    (bad == 0, format!("10000 random unions, {bad} mismatches"))
}

fn tower_contract() -> Outcome {
    let sys = BernoulliSystem::fair();
    let mut notes = Vec::new();
    let mut ok = true;
    for h in [4u64, 16, 64] {
        for eps in [q(1, 4), q(1, 10)] {
            let t = build_tower(&sys, h, &eps).unwrap();
            let overlaps = t.level_overlaps(&sys).unwrap();
            let disjoint = overlaps.iter().all(|(_, _, m)| m.is_zero());
            let cover = t.coverage(&sys).unwrap();
            let pass = disjoint && cover > Rational::one() - &eps;
            ok &= pass;
            if !pass {
                notes.push(format!("h={h} eps={eps} disjoint={disjoint} cover={cover}"));
            }
        }
    }
    (ok, if ok { "6 towers disjoint with coverage > 1-eps".into() } else { notes.join("; ") })
}

fn oi_mixing() -> Outcome {
    let sys = BernoulliSystem::fair();
    let c1: &SeqFn = &|n| n;
    let c2: &SeqFn = &|n| 2 * n;
    let mut notes = Vec::new();
    let mut ok = true;
    for d in [1, 2] {
        let seqs: Vec<&SeqFn> = if d == 1 { vec![c1] } else { vec![c1, c2] };
        for k in 3..=5 {
            let out = build_oi_set_mixing(&sys, &seqs, k, &q(1, 32), &OiOptions::default()).unwrap();
            let h = out.trace.horizon as i64;
            let r = verify_oi(out.correlator(&sys).unwrap().as_ref(), &seqs, h).unwrap();
            let mut pass = out.trace.passed() && h >= 1000 && r.failures() == 0 && r.summary.above == 2 * h as u64;
            if k == 3 {
                // the closed-form path against the generic diagram engine
                let plain = Plain::new(&out.set, &sys).unwrap();
                let fast = out.correlator(&sys).unwrap();
                for n in [1, 2, 5, 33, h] {
                    let s: Vec<i64> = std::iter::once(0).chain(seqs.iter().map(|c| c(n))).collect();
                    pass &= plain.cluster(&s).unwrap() == fast.cluster(&s).unwrap();
                }
            }
            ok &= pass;
            notes.push(format!("d={d} K={k} H={h} fails={}", r.failures()));
        }
    }
    (ok, notes.join(", "))
}

fn density1_oi() -> Outcome {
    let sys = BernoulliSystem::fair();
    let p = vec![IntPolynomial::new(vec![0, 0, 1]), IntPolynomial::new(vec![0, 1, 1])];
    let out = build_density1_oi_set(&sys, &p, 3, &q(1, 32), &Density1Options::default()).unwrap();
    let r = verify_density1(out.correlator(&sys).unwrap().as_ref(), &p, 10_000, Sense::Over).unwrap();
    let good = r.summary.good_density.clone();
    let ok = out.trace.passed() && good >= q(99, 100);
    (ok, format!("good density {good} over n <= 10000, {} exceptional", r.failures()))
}

fn density1_ui() -> Outcome {
    let sys = BernoulliSystem::fair();
    let p = vec![IntPolynomial::identity()];
    let params = ui_parameters(1, &p, &q(1, 128), 1000).unwrap();
    let opts = UiOptions::default();
    let three = match build_ui_set(&sys, &p, &params, 3, &opts) {
        Ok(out) => Ok(out),
        Err(Error::Resource(msg)) => Err(msg),
        Err(e) => panic!("{e}"),
    };
    // with K = 3 out of reach, report the conditions on the stages that fit
    let (out, k, refused) = match three {
        Ok(out) => (out, 3, None),
        Err(msg) => (build_ui_set(&sys, &p, &params, 2, &opts).unwrap(), 2, Some(msg)),
    };
    let checks: Vec<&Check> = out.trace.all_checks().collect();
    let lemma = checks.iter().filter(|c| c.name.starts_with("zero overlap")).all(|c| c.pass);
    let is_good = |c: &&&Check| c.name.starts_with("good density");
    let conditions = checks.iter().filter(|c| !c.name.starts_with("zero overlap") && !is_good(c)).all(|c| c.pass);
    let good = checks.iter().find(is_good).unwrap();
    let mut note = format!(
        "K={k}: (a) zero overlaps {}, (b) stage bounds {}, (c) {} = {} vs {}",
        pass_word(lemma),
        pass_word(conditions),
        good.name,
        good.lhs,
        good.rhs
    );
    if let Some(msg) = &refused {
        note = format!("K=3 not built ({msg}); {note}");
    }
    (k == 3 && lemma && conditions && good.pass, note)
}

fn pass_word(b: bool) -> &'static str {
    if b {
        "hold"
    } else {
        "FAIL"
    }
}

fn cesaro_oi() -> Outcome {
    let sys = BernoulliSystem::fair();
    let k0 = 3;
    let horizon = 10_000u64;
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [0, 1, 5] {
        let out = build_cesaro_oi_set(&sys, m, k0, 4, &q(1, 32), &CesaroOptions { horizon, k_max: Some(5) }).unwrap();
        let corr = out.correlator(&sys).unwrap();
        let mu2 = corr.measure() * corr.measure();
        let mut pass = out.trace.passed() && out.trace.l_table.len() == 5;
        for &(k, l_k) in &out.trace.l_table {
            pass &= k > k0 || l_k == 0;
            let avgs = cesaro_averages(corr.as_ref(), m, k, horizon).unwrap();
            pass &= avgs[l_k.max(1) as usize - 1..].iter().all(|v| *v > mu2);
        }
        ok &= pass;
        notes.push(format!("M={m} L={:?} {}", out.trace.l_table, pass_word(pass)));
    }
    (ok, notes.join(", "))
}

fn cesaro_ui_nonexistence() -> Outcome {
    let sys = BernoulliSystem::fair();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut crossings = 0;
    for _ in 0..50 {
        let a = nontrivial_union(&mut rng, &sys);
        let plain = Plain::new(&a, &sys).unwrap();
        crossings += !find_cesaro_crossing(&plain, 1, 1000).unwrap().is_empty() as u32;
    }
    let mut agree = 0;
    for _ in 0..20 {
        let den = rng.gen_range(2..=64);
        let mu = Rational::new(rng.gen_range(1..den), den);
        let n = rng.gen_range(1..=30u64);
        let big = cesaro_analytic_bound(&mu, n).unwrap();
        let mu2 = &mu * &mu;
        // direct: bound − μ² = (N − n − n²)(μ² − μ)/N²
        let direct = |bn: u64| {
            let b = Rational::from_int(bn as i64);
            &mu2 + Rational::from_int(bn as i64 - (n + n * n) as i64) * (&mu2 - &mu) / (&b * &b)
        };
        let at = cesaro_bound_value(&mu, n, big);
        let before = cesaro_bound_value(&mu, n, big - 1);
        agree += (at == direct(big) && at < mu2 && before == direct(big - 1) && before >= mu2) as u32;
    }
    (crossings == 50 && agree == 20, format!("{crossings}/50 crossings, {agree}/20 bound pairs agree"))
}

fn rotation() -> Outcome {
    let sys = RotationSystem::golden();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut crossings, mut strict, mut arc, mut witnesses) = (0, 0, 0, 0);
    for _ in 0..20 {
        let m = rng.gen_range(1..=3);
        let den = 60;
        let mut pts: Vec<i64> = Vec::new();
        while pts.len() < 2 * m {
            let x = rng.gen_range(0..den);
            if !pts.contains(&x) {
                pts.push(x);
            }
        }
        pts.sort();
        let arcs: Vec<(Rational, Rational)> = pts.chunks(2).map(|c| (q(c[0], den), q(c[1], den))).collect();
        let a = IntervalUnion::from_rationals(&arcs).unwrap();
        let demo = rotation_no_ui_oi_demo(&a, 1000, &sys).unwrap();
        crossings += (demo.first_above.is_some() && demo.first_below.is_some()) as u32;
        witnesses += demo.witnesses.len();
        strict += demo.witnesses.iter().filter(|w| w.pass).count();
        arc += demo.witnesses.iter().filter(|w| w.arc_pass).count();
    }
    let ok = crossings == 20 && strict == witnesses;
    (
        ok,
        format!(
            "{crossings}/20 with both crossings; strict rigidity {strict}/{witnesses} witnesses, \
             mu(A) - m||n alpha|| bound {arc}/{witnesses} (the correlation equals mu(A) - m||n alpha|| at Fibonacci n)"
        ),
    )
}

fn determinism() -> Outcome {
    let sys = BernoulliSystem::fair();
    let c1: &SeqFn = &|n| n;
    let run = || {
        let out = build_oi_set_mixing(&sys, &[c1], 3, &q(1, 32), &OiOptions::default()).unwrap();
        let r = verify_oi(out.correlator(&sys).unwrap().as_ref(), &[c1], out.trace.horizon as i64).unwrap();
        let ces = build_cesaro_oi_set(&sys, 1, 3, 4, &q(1, 32), &CesaroOptions { horizon: 2000, k_max: Some(5) }).unwrap();
        let rot = rotation_no_ui_oi_demo(&IntervalUnion::from_rationals(&[(q(1, 5), q(3, 5))]).unwrap(), 500, &RotationSystem::golden()).unwrap();
        (out.trace.to_json(), r.to_csv(), r.summary_json(), ces.trace.to_json(), rot.report.to_csv())
    };
    let ok = run() == run();
    (ok, "traces and CSVs byte-identical across two runs".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact-core soundness", exact_core),
        ("tower contract", tower_contract),
        ("OI for mixing", oi_mixing),
        ("density-1 OI", density1_oi),
        ("density-1 UI", density1_ui),
        ("Cesaro OI", cesaro_oi),
        ("Cesaro UI nonexistence", cesaro_ui_nonexistence),
        ("rotation", rotation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, note) = f();
        failed += !ok as u32;
        println!("{} {} {name}: {note} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
