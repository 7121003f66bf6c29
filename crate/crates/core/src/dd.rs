//! Reduced ordered decision diagrams over integer coordinates.
//!
//! A diagram is a DAG whose inner nodes test one coordinate and branch on its
//! symbol. Nodes are hash-consed while building and then renumbered in DFS
//! post-order from the root, so two diagrams for the same set are equal field
//! by field.

use std::collections::BTreeMap;
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use crate::bernoulli::BernoulliSystem;
use crate::rational::Rational;

pub(crate) const FALSE: u32 = 0;
pub(crate) const TRUE: u32 = 1;
const TERMINAL_VAR: i64 = i64::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Diagram {
    pub k: u8,
    pub vars: Vec<i64>,
    // kids[k*i + s] is the child of node i+2 on symbol s
    pub kids: Vec<u32>,
    pub root: u32,
}

impl Diagram {
    pub fn constant(k: u8, value: bool) -> Self {
        Diagram { k, vars: Vec::new(), kids: Vec::new(), root: if value { TRUE } else { FALSE } }
    }

    #[inline]
    pub fn var(&self, r: u32) -> i64 {
        if r < 2 {
            TERMINAL_VAR
        } else {
            self.vars[(r - 2) as usize]
        }
    }

    #[inline]
    pub fn kid(&self, r: u32, s: usize) -> u32 {
        self.kids[(r - 2) as usize * self.k as usize + s]
    }

    pub fn node_count(&self) -> usize {
        self.vars.len()
    }

    /// Smallest and largest tested coordinate.
    pub fn support(&self) -> Option<(i64, i64)> {
        let lo = self.vars.iter().min()?;
        let hi = self.vars.iter().max()?;
        Some((*lo, *hi))
    }

    pub fn translate(&self, delta: i64) -> Self {
        let mut d = self.clone();
        for v in &mut d.vars {
            *v += delta;
        }
        d
    }

    pub fn negate(&self) -> Self {
        let flip = |r: u32| match r {
            FALSE => TRUE,
            TRUE => FALSE,
            x => x,
        };
        Diagram {
            k: self.k,
            vars: self.vars.clone(),
            kids: self.kids.iter().map(|&r| flip(r)).collect(),
            root: flip(self.root),
        }
    }

    /// Membership of a point given by a lookup of its coordinates.
    pub fn contains(&self, mut at: impl FnMut(i64) -> u8) -> bool {
        let mut r = self.root;
        while r >= 2 {
            r = self.kid(r, at(self.var(r)) as usize);
        }
        r == TRUE
    }
}

/// Hash-consing node store used while an operation runs.
pub(crate) struct Builder {
    k: usize,
    vars: Vec<i64>,
    kids: Vec<u32>,
    unique: FxHashMap<(i64, Box<[u32]>), u32>,
}

impl Builder {
    pub fn new(k: u8) -> Self {
        Builder { k: k as usize, vars: Vec::new(), kids: Vec::new(), unique: FxHashMap::default() }
    }

    pub fn mk(&mut self, var: i64, kids: &[u32]) -> u32 {
        debug_assert_eq!(kids.len(), self.k);
        if kids.iter().all(|&c| c == kids[0]) {
            return kids[0];
        }
        let key = (var, kids.to_vec().into_boxed_slice());
        if let Some(&r) = self.unique.get(&key) {
            return r;
        }
        let r = self.vars.len() as u32 + 2;
        self.vars.push(var);
        self.kids.extend_from_slice(kids);
        self.unique.insert(key, r);
        r
    }

    fn kid(&self, r: u32, s: usize) -> u32 {
        self.kids[(r - 2) as usize * self.k + s]
    }

    /// Extract the subgraph under `root` in canonical post-order.
    pub fn finish(self, root: u32) -> Diagram {
        let k = self.k;
        if root < 2 {
            return Diagram::constant(k as u8, root == TRUE);
        }
        let mut map: FxHashMap<u32, u32> = FxHashMap::default();
        let mut vars = Vec::new();
        let mut kids = Vec::new();
        let mut stack: Vec<(u32, usize)> = vec![(root, 0)];
        while let Some(&mut (r, ref mut next)) = stack.last_mut() {
            if *next < k {
                let c = self.kid(r, *next);
                *next += 1;
                if c >= 2 && !map.contains_key(&c) {
                    stack.push((c, 0));
                }
                continue;
            }
            stack.pop();
            if map.contains_key(&r) {
                continue;
            }
            let id = vars.len() as u32 + 2;
            vars.push(self.vars[(r - 2) as usize]);
            for s in 0..k {
                let c = self.kid(r, s);
                kids.push(if c < 2 { c } else { map[&c] });
            }
            map.insert(r, id);
        }
        let root = map[&root];
        Diagram { k: k as u8, vars, kids, root }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    And,
    Or,
    Diff,
    Xor,
}

impl Op {
    fn eval(self, a: bool, b: bool) -> bool {
        match self {
            Op::And => a && b,
            Op::Or => a || b,
            Op::Diff => a && !b,
            Op::Xor => a != b,
        }
    }

    fn shortcut(self, a: u32, b: u32) -> Option<u32> {
        if a < 2 && b < 2 {
            return Some(self.eval(a == TRUE, b == TRUE) as u32);
        }
        match self {
            Op::And if a == FALSE || b == FALSE => Some(FALSE),
            Op::Or if a == TRUE || b == TRUE => Some(TRUE),
            Op::Diff if a == FALSE || b == TRUE => Some(FALSE),
            _ => None,
        }
    }
}

/// `op(a shifted by da, b shifted by db)`; a shift adds to every coordinate.
pub(crate) fn apply(op: Op, a: &Diagram, da: i64, b: &Diagram, db: i64) -> Diagram {
    assert_eq!(a.k, b.k, "alphabet mismatch");
    let k = a.k as usize;
    let mut out = Builder::new(a.k);
    let mut memo: FxHashMap<(u32, u32), u32> = FxHashMap::default();
    let var_a = |r: u32| if r < 2 { TERMINAL_VAR } else { a.var(r) + da };
    let var_b = |r: u32| if r < 2 { TERMINAL_VAR } else { b.var(r) + db };
    let child = |x: u32, y: u32, v: i64, s: usize| {
        let cx = if var_a(x) == v { a.kid(x, s) } else { x };
        let cy = if var_b(y) == v { b.kid(y, s) } else { y };
        (cx, cy)
    };

    enum Task {
        Visit(u32, u32),
        Build(u32, u32),
    }
    let mut stack = vec![Task::Visit(a.root, b.root)];
    let mut buf = vec![0u32; k];
    while let Some(t) = stack.pop() {
        match t {
            Task::Visit(x, y) => {
                if memo.contains_key(&(x, y)) {
                    continue;
                }
                if let Some(r) = op.shortcut(x, y) {
                    memo.insert((x, y), r);
                    continue;
                }
                stack.push(Task::Build(x, y));
                let v = var_a(x).min(var_b(y));
                for s in 0..k {
                    let (cx, cy) = child(x, y, v, s);
                    if !memo.contains_key(&(cx, cy)) {
                        stack.push(Task::Visit(cx, cy));
                    }
                }
            }
            Task::Build(x, y) => {
                if memo.contains_key(&(x, y)) {
                    continue;
                }
                let v = var_a(x).min(var_b(y));
                for (s, slot) in buf.iter_mut().enumerate() {
                    let (cx, cy) = child(x, y, v, s);
                    *slot = memo[&(cx, cy)];
                }
                let r = out.mk(v, &buf);
                memo.insert((x, y), r);
            }
        }
    }
    let root = memo[&(a.root, b.root)];
    out.finish(root)
}

const MAX_PARTS: usize = 8;
type Key = [u32; MAX_PARTS];

/// Exact measure of the intersection of translated diagrams, computed by
/// pushing probability mass through the product state space without
/// materializing it.
pub(crate) fn intersection_measure(parts: &[(&Diagram, i64)], sys: &BernoulliSystem) -> Rational {
    if parts.is_empty() {
        return Rational::one();
    }
    if parts.len() > MAX_PARTS {
        let (d, off) = parts[0];
        let mut acc = d.translate(off);
        for &(e, o) in &parts[1..] {
            acc = apply(Op::And, &acc, 0, e, o);
        }
        return intersection_measure(&[(&acc, 0)], sys);
    }
    let k = sys.alphabet();
    for (d, _) in parts {
        assert_eq!(d.k as usize, k, "alphabet mismatch");
    }
    let n = parts.len();
    let var_of = |i: usize, r: u32| if r < 2 { TERMINAL_VAR } else { parts[i].0.var(r) + parts[i].1 };

    let mut start: Key = [TRUE; MAX_PARTS];
    for (i, (d, _)) in parts.iter().enumerate() {
        start[i] = d.root;
    }
    if start[..n].contains(&FALSE) {
        return Rational::zero();
    }
    let min_var = |key: &Key| (0..n).map(|i| var_of(i, key[i])).min().unwrap();
    let v0 = min_var(&start);
    if v0 == TERMINAL_VAR {
        return Rational::one();
    }
    let end = parts
        .iter()
        .filter_map(|(d, o)| d.support().map(|(_, hi)| hi + o + 1))
        .max()
        .unwrap();
    let total_exp = (end - v0) as u64;

    let pow2 = sys.denom_log2();
    let mut pow_cache: Vec<BigUint> = vec![BigUint::one()];
    let mut scale = |m: &BigUint, e: u64| -> BigUint {
        if let Some(l) = pow2 {
            return m << (e * l);
        }
        while pow_cache.len() <= e as usize {
            let next = pow_cache.last().unwrap() * sys.denom();
            pow_cache.push(next);
        }
        m * &pow_cache[e as usize]
    };
    let weights = sys.weights();
    let unit: Vec<bool> = (0..k).map(|s| sys.weight_is_one(s)).collect();

    let mut frontier: BTreeMap<i64, FxHashMap<Key, BigUint>> = BTreeMap::new();
    frontier.entry(v0).or_default().insert(start, BigUint::one());
    let mut acc = BigUint::zero();

    while let Some((v, level)) = frontier.pop_first() {
        for (key, mass) in level {
            for s in 0..k {
                let mut child = key;
                let mut dead = false;
                for i in 0..n {
                    if var_of(i, key[i]) == v {
                        let c = parts[i].0.kid(key[i], s);
                        if c == FALSE {
                            dead = true;
                            break;
                        }
                        child[i] = c;
                    }
                }
                if dead {
                    continue;
                }
                let m = if unit[s] { mass.clone() } else { &mass * &weights[s] };
                let cv = min_var(&child);
                if cv == TERMINAL_VAR {
                    acc += scale(&m, total_exp - (v - v0 + 1) as u64);
                } else {
                    let m = scale(&m, (cv - v - 1) as u64);
                    let slot = frontier.entry(cv).or_default();
                    match slot.get_mut(&child) {
                        Some(x) => *x += m,
                        None => {
                            slot.insert(child, m);
                        }
                    }
                }
            }
        }
    }
    let den = match pow2 {
        Some(l) => BigUint::one() << (total_exp * l),
        None => num_traits::pow(sys.denom().clone(), total_exp as usize),
    };
    Rational::from_big(acc.into(), den.into())
}

/// Measures of the sub-diagrams rooted at `wanted`. Children are released as soon as their last parent is done, so memory
/// stays near the diagram's width.
pub(crate) fn node_measures(d: &Diagram, sys: &BernoulliSystem, wanted: &[u32]) -> Vec<Rational> {
    let n = d.node_count();
    let k = d.k as usize;
    let end = d.support().map(|(_, hi)| hi + 1).unwrap_or(0);
    let mut parents = vec![0u32; n];
    for &c in &d.kids {
        if c >= 2 {
            parents[(c - 2) as usize] += 1;
        }
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(d.vars[i as usize]));
    let keep: rustc_hash::FxHashSet<u32> = wanted.iter().copied().collect();
    let mut live: FxHashMap<u32, BigUint> = FxHashMap::default();
    let mut kept: FxHashMap<u32, BigUint> = FxHashMap::default();
    let weights = sys.weights();
    let q = sys.denom().clone();
    let pow = |e: i64| num_traits::pow(q.clone(), e as usize);
    for i in order {
        let r = i + 2;
        let v = d.vars[i as usize];
        let mut acc = BigUint::zero();
        for s in 0..k {
            let c = d.kids[i as usize * k + s];
            let (m, cv) = match c {
                FALSE => continue,
                TRUE => (BigUint::one(), end),
                _ => (live[&c].clone(), d.var(c)),
            };
            acc += m * &weights[s] * pow(cv - v - 1);
            if c >= 2 {
                let p = &mut parents[(c - 2) as usize];
                *p -= 1;
                if *p == 0 {
                    live.remove(&c);
                }
            }
        }
        if keep.contains(&r) {
            kept.insert(r, acc.clone());
        }
        if parents[i as usize] > 0 {
            live.insert(r, acc);
        }
    }
    wanted
        .iter()
        .map(|&r| match r {
            FALSE => Rational::zero(),
            TRUE => Rational::one(),
            _ => Rational::from_big(kept[&r].clone().into(), pow(end - d.var(r)).into()),
        })
        .collect()
}

/// Outcome of one automaton step.
pub enum Step<S> {
    Accept,
    Reject,
    Next(S),
}

/// A deterministic left-to-right reader of the coordinates `[lo, hi)`.
pub trait Scanner {
    type State: Clone + Eq + Hash;
    fn start(&self) -> Self::State;
    fn step(&self, state: &Self::State, pos: i64, sym: u8) -> Step<Self::State>;
    /// Verdict for a state that survives past the last coordinate.
    fn finish(&self, state: &Self::State) -> bool;
}

/// Compile a scanner over `[lo, hi)` into a reduced diagram.
pub(crate) fn compile<S: Scanner>(scanner: &S, k: u8, lo: i64, hi: i64) -> Diagram {
    let width = (hi - lo).max(0) as usize;
    let mut levels: Vec<FxHashMap<S::State, u32>> = Vec::with_capacity(width + 1);
    let mut order: Vec<Vec<S::State>> = Vec::with_capacity(width + 1);
    let mut first = FxHashMap::default();
    first.insert(scanner.start(), 0u32);
    levels.push(first);
    order.push(vec![scanner.start()]);
    // forward reachability, remembering transitions as (level, index) targets
    let mut trans: Vec<Vec<u32>> = Vec::with_capacity(width);
    const ACC: u32 = u32::MAX;
    const REJ: u32 = u32::MAX - 1;
    for i in 0..width {
        let pos = lo + i as i64;
        let mut next: FxHashMap<S::State, u32> = FxHashMap::default();
        let mut next_order = Vec::new();
        let mut t = Vec::with_capacity(order[i].len() * k as usize);
        for st in &order[i] {
            for s in 0..k {
                t.push(match scanner.step(st, pos, s) {
                    Step::Accept => ACC,
                    Step::Reject => REJ,
                    Step::Next(ns) => {
                        let len = next.len() as u32;
                        *next.entry(ns.clone()).or_insert_with(|| {
                            next_order.push(ns);
                            len
                        })
                    }
                });
            }
        }
        trans.push(t);
        levels.push(next);
        order.push(next_order);
    }
    let mut b = Builder::new(k);
    let mut refs: Vec<u32> = order[width].iter().map(|st| if scanner.finish(st) { TRUE } else { FALSE }).collect();
    let mut buf = vec![0u32; k as usize];
    for i in (0..width).rev() {
        let pos = lo + i as i64;
        let t = &trans[i];
        let mut cur = Vec::with_capacity(order[i].len());
        for j in 0..order[i].len() {
            for s in 0..k as usize {
                buf[s] = match t[j * k as usize + s] {
                    ACC => TRUE,
                    REJ => FALSE,
                    x => refs[x as usize],
                };
            }
            cur.push(b.mk(pos, &buf));
        }
        refs = cur;
    }
    b.finish(refs[0])
}
