use std::fs;
use std::path::Path;

use overindep::constructions::{
    build_cesaro_oi_set, build_density1_oi_set, build_oi_set_mixing, build_ui_set, schedule_epsilons, ui_parameters,
    CesaroOptions, Construction, Density1Options, Kind, OiOptions, UiOptions,
};
use overindep::cylinder::oracle_measure;
use overindep::rational::q;
use overindep::verify::{
    cesaro_analytic_bound, cesaro_averages, cesaro_bound_value, rotation_no_ui_oi_demo, verify_density1, verify_oi,
    Plain, SeqFn, Sense,
};
use overindep::{build_tower, BernoulliSystem, CylinderUnion, Error, IntervalUnion, Rational};
use serde::Serialize;

use crate::config::{polynomials, ConfigError, ConstructionSpec, ExperimentConfig};

pub enum Outcome {
    Pass,
    /// A certified inequality came out false.
    Fail(String),
}

pub enum Failure {
    Config(String),
    Core(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

pub type CmdResult = Result<Outcome, Failure>;

fn write(out: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), body)?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn spec(cfg: &ExperimentConfig) -> Result<&ConstructionSpec, Failure> {
    cfg.construction.as_ref().ok_or_else(|| Failure::Config("missing [construction] table".into()))
}

fn sequences(spec: &ConstructionSpec) -> Result<Vec<Box<SeqFn>>, Failure> {
    let polys = polynomials(&spec.polynomials);
    let mut out: Vec<Box<SeqFn>> = Vec::new();
    for p in polys {
        out.push(Box::new(move |n| p.eval_i64(n).expect("sequence value fits in i64")));
    }
    Ok(out)
}

fn build(cfg: &ExperimentConfig) -> Result<Construction, Failure> {
    let spec = spec(cfg)?;
    let sys = cfg.bernoulli()?;
    let polys = polynomials(&spec.polynomials);
    let a = &spec.a;
    let k = spec.stages;
    let out = match spec.kind {
        Kind::OiMixing => {
            let seqs = sequences(spec)?;
            let refs: Vec<&SeqFn> = seqs.iter().map(|b| b.as_ref()).collect();
            let opts = OiOptions { horizon: spec.horizon.unwrap_or(OiOptions::default().horizon) };
            build_oi_set_mixing(&sys, &refs, k, a, &opts)?
        }
        Kind::Density1Oi => {
            let d = Density1Options::default();
            let opts = Density1Options { horizon: spec.horizon.unwrap_or(d.horizon), delta: spec.delta.clone().unwrap_or(d.delta) };
            build_density1_oi_set(&sys, &polys, k, a, &opts)?
        }
        Kind::Density1Ui => {
            let params = ui_parameters(polys.len() as u32, &polys, a, spec.depth)?;
            let d = UiOptions::default();
            let opts = UiOptions {
                horizon: spec.horizon.unwrap_or(d.horizon),
                delta: spec.delta.clone().unwrap_or(d.delta),
                window_guard: cfg.guards.tower_window,
                ..d
            };
            build_ui_set(&sys, &polys, &params, k, &opts)?
        }
        Kind::CesaroOi => {
            let opts = CesaroOptions { horizon: spec.horizon.unwrap_or(CesaroOptions::default().horizon), k_max: spec.k_max };
            build_cesaro_oi_set(&sys, spec.m, spec.k0, k, a, &opts)?
        }
    };
    if out.set.width() > cfg.guards.max_window {
        return Err(Error::Resource(format!("set window {} exceeds max_window {}", out.set.width(), cfg.guards.max_window)).into());
    }
    Ok(out)
}

fn trace_outcome(c: &Construction) -> Outcome {
    match c.trace.first_failure() {
        None => Outcome::Pass,
        Some(f) => Outcome::Fail(format!("{}: {} {} {}", f.name, f.lhs, f.relation, f.rhs)),
    }
}

pub fn construct(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let c = build(cfg)?;
    write(out, "trace.json", &(c.trace.to_json() + "\n"))?;
    Ok(trace_outcome(&c))
}

#[derive(Serialize)]
struct CesaroRow {
    k: u64,
    from: u64,
    to: u64,
    argmin: u64,
    min_average: Rational,
    rhs: Rational,
    pass: bool,
}

pub fn verify(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let c = build(cfg)?;
    let spec = spec(cfg)?;
    let sys = cfg.bernoulli()?;
    write(out, "trace.json", &(c.trace.to_json() + "\n"))?;
    let corr = c.correlator(&sys)?;
    let polys = polynomials(&spec.polynomials);
    let horizon = c.trace.horizon as i64;
    let verdict = match spec.kind {
        Kind::OiMixing | Kind::Density1Oi | Kind::Density1Ui => {
            let report = match spec.kind {
                Kind::OiMixing => {
                    let seqs = sequences(spec)?;
                    let refs: Vec<&SeqFn> = seqs.iter().map(|b| b.as_ref()).collect();
                    verify_oi(corr.as_ref(), &refs, horizon)?
                }
                Kind::Density1Oi => verify_density1(corr.as_ref(), &polys, horizon, Sense::Over)?,
                _ => verify_density1(corr.as_ref(), &polys, horizon, Sense::Under)?,
            };
            write(out, "sweep.csv", &report.to_csv())?;
            write(out, "summary.json", &(report.summary_json() + "\n"))?;
            let floor = match spec.kind {
                Kind::OiMixing => Rational::one(),
                Kind::Density1Oi => Rational::one() - spec.delta.clone().unwrap_or(q(1, 100)),
                _ => Rational::one() - spec.delta.clone().unwrap_or(q(1, 10)),
            };
            if report.summary.good_density >= floor {
                None
            } else {
                Some(format!("good density {} below {floor}", report.summary.good_density))
            }
        }
        Kind::CesaroOi => {
            let mu2 = corr.measure() * corr.measure();
            let mut rows = Vec::new();
            for &(k, l_k) in &c.trace.l_table {
                let avgs = cesaro_averages(corr.as_ref(), spec.m, k, horizon as u64)?;
                let from = l_k.max(1);
                let (argmin, least) = (from..=horizon as u64)
                    .map(|n| (n, &avgs[n as usize - 1]))
                    .min_by(|x, y| x.1.cmp(y.1).then(x.0.cmp(&y.0)))
                    .map(|(n, v)| (n, v.clone()))
                    .unwrap_or((from, mu2.clone()));
                rows.push(CesaroRow { k, from, to: horizon as u64, argmin, pass: least > mu2, min_average: least, rhs: mu2.clone() });
            }
            let mut csv = String::from("k,from,to,argmin,min_num,min_den,rhs_num,rhs_den,relation\n");
            for r in &rows {
                let rel = if r.pass { "GT" } else if r.min_average == r.rhs { "EQ" } else { "LT" };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{rel}\n",
                    r.k,
                    r.from,
                    r.to,
                    r.argmin,
                    r.min_average.numer(),
                    r.min_average.denom(),
                    r.rhs.numer(),
                    r.rhs.denom()
                ));
            }
            write(out, "cesaro.csv", &csv)?;
            write(out, "summary.json", &json(&rows))?;
            rows.iter().find(|r| !r.pass).map(|r| format!("Cesaro average for k={} drops to {} at N={}", r.k, r.min_average, r.argmin))
        }
    };
    match (verdict, trace_outcome(&c)) {
        (Some(msg), _) => Ok(Outcome::Fail(msg)),
        (None, o) => Ok(o),
    }
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let spec = cfg.sweep.as_ref().ok_or_else(|| Failure::Config("missing [sweep] table".into()))?;
    let sys = cfg.bernoulli()?;
    let k = sys.alphabet() as u8;
    if spec.cylinders.iter().any(|c| c.word.chars().any(|ch| ch.to_digit(10).is_none_or(|d| d >= k as u32))) {
        return Err(Failure::Config(format!("cylinder words must use digits below {k}")));
    }
    let set = CylinderUnion::union_all(k, spec.cylinders.iter().map(|c| CylinderUnion::word(k, c.offset, &c.word)));
    if set.width() > cfg.guards.max_window {
        return Err(Error::Resource(format!("set window {} exceeds max_window {}", set.width(), cfg.guards.max_window)).into());
    }
    let polys = polynomials(&spec.polynomials);
    let plain = Plain::new(&set, &sys)?;
    let report = verify_density1(&plain, &polys, spec.horizon as i64, spec.sense)?;
    write(out, "sweep.csv", &report.to_csv())?;
    write(out, "summary.json", &(report.summary_json() + "\n"))?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct RotationSummary<'a> {
    summary: &'a overindep::verify::SweepSummary,
    first_above: Option<i64>,
    first_below: Option<i64>,
}

pub fn demo_rotation(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let spec = cfg.rotation.as_ref().ok_or_else(|| Failure::Config("missing [rotation] table".into()))?;
    let sys = cfg.rotation_system()?;
    let a = IntervalUnion::from_rationals(&spec.arcs)?;
    let demo = rotation_no_ui_oi_demo(&a, spec.horizon, &sys)?;
    write(out, "sweep.csv", &demo.report.to_csv())?;
    let summary = RotationSummary { summary: &demo.report.summary, first_above: demo.first_above, first_below: demo.first_below };
    write(out, "summary.json", &json(&summary))?;
    write(out, "witnesses.json", &json(&demo.witnesses))?;
    for w in demo.witnesses.iter().filter(|w| !w.pass) {
        eprintln!("note: n = {}: correlation {} is not above mu(A) - ||n alpha|| = {}", w.n, w.correlation, w.bound);
    }
    if demo.first_above.is_none() || demo.first_below.is_none() {
        return Ok(Outcome::Fail("no crossing on both sides of mu(A)^2 within the horizon".into()));
    }
    if let Some(w) = demo.witnesses.iter().find(|w| !w.arc_pass) {
        return Ok(Outcome::Fail(format!("rigidity bound fails at n = {}", w.n)));
    }
    Ok(Outcome::Pass)
}

fn line(name: &str, ok: bool) -> bool {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Quick exact invariant suite.
pub fn selftest() -> CmdResult {
    let mut all = true;
    let words = ["0", "1", "01", "110", "1001", "0110"];
    for sys in [BernoulliSystem::fair(), BernoulliSystem::new(vec![q(1, 3), q(2, 3)])?] {
        let mut ok = true;
        for (i, u) in words.iter().enumerate() {
            for v in &words[i..] {
                let a = CylinderUnion::word(2, 0, u);
                let b = CylinderUnion::word(2, 1, v);
                let uni = a.union(&b);
                let lhs = uni.measure(&sys)? + a.intersect(&b).measure(&sys)?;
                ok &= lhs == a.measure(&sys)? + b.measure(&sys)?;
                ok &= uni.measure(&sys)? == oracle_measure(&uni, &sys)?;
                ok &= uni.shift(7).measure(&sys)? == uni.measure(&sys)?;
            }
        }
        all &= line(&format!("cylinder algebra, p = {:?}", sys.probs()), ok);
    }
    let sys = BernoulliSystem::fair();
    let t = build_tower(&sys, 4, &q(1, 4))?;
    all &= line("tower h=4 eps=1/4", t.verify_disjoint(&sys)? && t.coverage(&sys)? > q(3, 4));
    let sched = schedule_epsilons(&q(1, 32), 8, 1, Kind::CesaroOi)?;
    let bad = schedule_epsilons(&q(1, 2), 3, 1, Kind::OiMixing)?;
    all &= line("epsilon schedules", sched.passed() && !bad.passed());
    let c: &SeqFn = &|n| n;
    let oi = build_oi_set_mixing(&sys, &[c], 2, &q(1, 32), &OiOptions { horizon: 20 })?;
    let report = verify_oi(&*oi.correlator(&sys)?, &[c], oi.trace.horizon as i64)?;
    all &= line("small OI construction", oi.trace.passed() && report.failures() == 0);
    let mu = q(1, 3);
    let ok = (0..6).all(|n| {
        let big = cesaro_analytic_bound(&mu, n).unwrap();
        cesaro_bound_value(&mu, n, big) < &mu * &mu && (big <= n + n * n + 1 || cesaro_bound_value(&mu, n, big - 1) >= &mu * &mu)
    });
    all &= line("Cesaro analytic bound", ok);
    let arc = IntervalUnion::from_rationals(&[(q(0, 1), q(1, 2))])?;
    let demo = rotation_no_ui_oi_demo(&arc, 100, &overindep::RotationSystem::golden())?;
    all &= line("rotation crossings", demo.first_above.is_some() && demo.first_below.is_some());
    if all {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail("selftest".into()))
    }
}
