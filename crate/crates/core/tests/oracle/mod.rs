//! Reference implementations used only by tests: a plain serial scheduler,
//! the six deterministic rules written out directly, rollouts built on top of
//! them, and a brute-force KNN.
#![allow(dead_code)]

use rulegate_core::labeler::Depth;
use rulegate_core::{Instance, RuleId, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct Sim<'a> {
    pub inst: &'a Instance,
    pub next: Vec<usize>,
    pub job_free: Vec<u64>,
    pub mach_free: Vec<u64>,
    /// Decision count at which each job's current operation became ready.
    pub since: Vec<usize>,
    /// `(job, op, machine, start, end)` per decision.
    pub ops: Vec<(usize, usize, usize, u64, u64)>,
}

impl<'a> Sim<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let j = inst.num_jobs();
        Sim {
            inst,
            next: vec![0; j],
            job_free: vec![0; j],
            mach_free: vec![0; inst.num_machines()],
            since: vec![0; j],
            ops: Vec::new(),
        }
    }

    pub fn replay(inst: &'a Instance, jobs: &[usize]) -> Self {
        let mut s = Sim::new(inst);
        for &j in jobs {
            s.step(j);
        }
        s
    }

    pub fn done(&self) -> bool {
        self.ops.len() == self.inst.num_jobs() * self.inst.num_machines()
    }

    pub fn ready(&self) -> Vec<usize> {
        (0..self.inst.num_jobs()).filter(|&j| self.next[j] < self.inst.num_machines()).collect()
    }

    pub fn step(&mut self, j: usize) {
        let op = self.next[j];
        let m = self.inst.routing()[j][op];
        let p = self.inst.proc_times()[j][op] as u64;
        let start = self.job_free[j].max(self.mach_free[m]);
        let end = start + p;
        self.job_free[j] = end;
        self.mach_free[m] = end;
        self.next[j] += 1;
        self.ops.push((j, op, m, start, end));
        self.since[j] = self.ops.len();
    }

    pub fn makespan(&self) -> u64 {
        self.ops.iter().map(|o| o.4).max().unwrap_or(0)
    }

    fn remaining_work(&self, j: usize) -> u64 {
        self.inst.proc_times()[j][self.next[j]..].iter().map(|&p| p as u64).sum()
    }

    fn next_p(&self, j: usize) -> u64 {
        self.inst.proc_times()[j][self.next[j]] as u64
    }

    /// Deterministic choice; ties go to the lowest job index.
    pub fn pick(&self, rule: RuleId) -> usize {
        let ready = self.ready();
        let mut best = ready[0];
        for &j in &ready[1..] {
            let better = match rule {
                RuleId::Spt => self.next_p(j) < self.next_p(best),
                RuleId::Lpt => self.next_p(j) > self.next_p(best),
                RuleId::Mwkr => self.remaining_work(j) > self.remaining_work(best),
                RuleId::Lwkr => self.remaining_work(j) < self.remaining_work(best),
                RuleId::Mopnr => self.next[j] < self.next[best],
                RuleId::Fifo => (self.job_free[j], self.since[j]) < (self.job_free[best], self.since[best]),
                RuleId::Random => panic!("RANDOM has no deterministic choice"),
            };
            if better {
                best = j;
            }
        }
        best
    }

    /// Like [`Sim::pick`], with RANDOM drawing a uniform ready job.
    pub fn pick_with(&self, rule: RuleId, rng: &mut SplitMix64) -> usize {
        if rule == RuleId::Random {
            let ready = self.ready();
            ready[rng.index(ready.len())]
        } else {
            self.pick(rule)
        }
    }

    pub fn run_rule(mut self, rule: RuleId, rng: &mut SplitMix64) -> Self {
        while !self.done() {
            let j = self.pick_with(rule, rng);
            self.step(j);
        }
        self
    }
}

/// Job order produced by a deterministic rule from the empty schedule.
pub fn rule_sequence(inst: &Instance, rule: RuleId) -> Vec<usize> {
    let s = Sim::new(inst).run_rule(rule, &mut SplitMix64::new(0));
    s.ops.iter().map(|o| o.0).collect()
}

/// Candidate for `depth` steps, then `default` to completion; one rng
/// stream shared by both phases.
pub fn rollout(
    inst: &Instance,
    prefix: &[usize],
    rule: RuleId,
    depth: Depth,
    default: RuleId,
    rng: &mut SplitMix64,
) -> u64 {
    let mut s = Sim::replay(inst, prefix);
    let limit = match depth {
        Depth::Steps(k) => k,
        Depth::Full => usize::MAX,
    };
    let mut n = 0;
    while !s.done() && n < limit {
        let j = s.pick_with(rule, rng);
        s.step(j);
        n += 1;
    }
    s.run_rule(default, rng).makespan()
}

/// Brute-force distance-weighted KNN on raw vectors: z-normalize with
/// population statistics, sort every point by `(distance, index)`.
pub fn knn(train: &[(Vec<f64>, f64)], query: &[f64], k: usize, eps: f64) -> (f64, f64) {
    let dims = query.len();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dims];
    let mut std = vec![0.0; dims];
    for d in 0..dims {
        mean[d] = train.iter().map(|(x, _)| x[d]).sum::<f64>() / n;
        std[d] = (train.iter().map(|(x, _)| (x[d] - mean[d]).powi(2)).sum::<f64>() / n).sqrt();
    }
    let z = |x: &[f64]| -> Vec<f64> {
        (0..dims).map(|d| if std[d] < 1e-12 { 0.0 } else { (x[d] - mean[d]) / std[d] }).collect()
    };
    let q = z(query);
    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (x, _))| {
            let p = z(x);
            let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nb = &scored[..k];
    let w: Vec<f64> = nb.iter().map(|(d, _)| 1.0 / (d + eps)).collect();
    let ys: Vec<f64> = nb.iter().map(|(_, i)| train[*i].1).collect();
    let r = w.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / w.iter().sum::<f64>();
    let my = ys.iter().sum::<f64>() / k as f64;
    let s = (ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / k as f64).sqrt();
    (r, s)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
