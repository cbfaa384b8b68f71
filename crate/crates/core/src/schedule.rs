//! Partial schedules and the serial schedule generator.
//!
//! The ready set at every decision is the set of unfinished jobs. Dispatching
//! a job places its next operation at `max(job_ready, machine_ready)`, so
//! exactly one operation is scheduled per decision and every completed run
//! makes `J * M` decisions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{Instance, Time};
use crate::rng::SplitMix64;
use crate::rules::RuleId;

/// One scheduled operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dispatch {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: Time,
    pub end: Time,
}

/// Completion time of the last operation of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Makespan(pub Time);

impl core::fmt::Display for Makespan {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleState<'a> {
    instance: &'a Instance,
    next_op: Vec<usize>,
    job_ready: Vec<Time>,
    machine_ready: Vec<Time>,
    /// Decision index at which each job's current operation became ready.
    arrival: Vec<usize>,
    /// Unscheduled work per job, including its next operation.
    remaining_work: Vec<Time>,
    log: Vec<Dispatch>,
}

impl<'a> ScheduleState<'a> {
    /// The empty schedule.
    pub fn new(instance: &'a Instance) -> Self {
        let j = instance.num_jobs();
        ScheduleState {
            instance,
            next_op: alloc::vec![0; j],
            job_ready: alloc::vec![0; j],
            machine_ready: alloc::vec![0; instance.num_machines()],
            arrival: alloc::vec![0; j],
            remaining_work: (0..j).map(|job| instance.job_total(job)).collect(),
            log: Vec::with_capacity(instance.num_ops()),
        }
    }

    /// Rebuilds a state by dispatching `jobs` in order from the empty schedule.
    pub fn replay(instance: &'a Instance, jobs: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut state = Self::new(instance);
        for job in jobs {
            state.dispatch(job)?;
        }
        Ok(state)
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn next_op(&self) -> &[usize] {
        &self.next_op
    }

    pub fn job_ready(&self) -> &[Time] {
        &self.job_ready
    }

    pub fn machine_ready(&self) -> &[Time] {
        &self.machine_ready
    }

    pub fn arrival_order(&self) -> &[usize] {
        &self.arrival
    }

    pub fn remaining_work(&self) -> &[Time] {
        &self.remaining_work
    }

    pub fn log(&self) -> &[Dispatch] {
        &self.log
    }

    pub fn decisions_made(&self) -> usize {
        self.log.len()
    }

    pub fn remaining_decisions(&self) -> usize {
        self.instance.num_ops() - self.log.len()
    }

    pub fn is_complete(&self) -> bool {
        self.log.len() == self.instance.num_ops()
    }

    #[inline]
    pub fn is_unfinished(&self, job: usize) -> bool {
        self.next_op[job] < self.instance.num_machines()
    }

    /// Jobs with at least one unscheduled operation, in index order.
    pub fn ready_jobs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.next_op.len()).filter(move |&j| self.is_unfinished(j))
    }

    /// Duration of the next operation of an unfinished job.
    #[inline]
    pub fn next_proc_time(&self, job: usize) -> Time {
        self.instance.proc_time(job, self.next_op[job])
    }

    /// Largest end time placed so far.
    pub fn makespan(&self) -> Makespan {
        Makespan(self.machine_ready.iter().copied().max().unwrap_or(0))
    }

    /// Schedules the next operation of `job` at the earliest time both the job
    /// and its machine are free.
    pub fn dispatch(&mut self, job: usize) -> Result<Dispatch> {
        if job >= self.next_op.len() {
            return Err(Error::NoSuchJob(job));
        }
        if !self.is_unfinished(job) {
            return Err(Error::JobFinished(job));
        }
        let op = self.next_op[job];
        let machine = self.instance.machine(job, op);
        let p = self.instance.proc_time(job, op);
        let start = self.job_ready[job].max(self.machine_ready[machine]);
        let end = start + p;
        let entry = Dispatch { job, op, machine, start, end };
        self.log.push(entry);
        self.next_op[job] = op + 1;
        self.job_ready[job] = end;
        self.machine_ready[machine] = end;
        self.arrival[job] = self.log.len();
        self.remaining_work[job] -= p;
        Ok(entry)
    }

    /// Dispatches with `rule` until the schedule is complete.
    ///
    /// Returns the final makespan and the number of decisions simulated.
    pub fn complete_with_rule(&mut self, rule: RuleId, rng: &mut SplitMix64) -> (Makespan, usize) {
        let steps = self.advance_with_rule(rule, usize::MAX, rng);
        (self.makespan(), steps)
    }

    /// Dispatches with `rule` for at most `limit` decisions; returns how many were made.
    pub fn advance_with_rule(&mut self, rule: RuleId, limit: usize, rng: &mut SplitMix64) -> usize {
        let steps = limit.min(self.remaining_decisions());
        for _ in 0..steps {
            let job = rule.select_job(self, rng).expect("non-terminal state has a ready job");
            self.dispatch(job).expect("selected job is unfinished");
        }
        steps
    }

    /// Checks every schedule invariant against the dispatch log.
    pub fn verify(&self) -> Result<(), Violation> {
        verify_log(self.instance, &self.log)?;
        let mut next_op = alloc::vec![0; self.next_op.len()];
        let mut job_ready = alloc::vec![0; self.job_ready.len()];
        let mut machine_ready = alloc::vec![0; self.machine_ready.len()];
        for d in &self.log {
            next_op[d.job] += 1;
            job_ready[d.job] = d.end;
            machine_ready[d.machine] = d.end;
        }
        if next_op != self.next_op {
            return Err(Violation::new("per-job progress disagrees with the dispatch log"));
        }
        if job_ready != self.job_ready || machine_ready != self.machine_ready {
            return Err(Violation::new("ready times disagree with the dispatch log"));
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.verify().is_ok()
    }
}

/// The first invariant a schedule breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl Violation {
    fn new(msg: impl Into<String>) -> Self {
        Violation(msg.into())
    }
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Validates a dispatch log against an instance: routing order, durations,
/// the start-time rule, and pairwise machine non-overlap.
pub fn verify_log(instance: &Instance, log: &[Dispatch]) -> Result<(), Violation> {
    let j = instance.num_jobs();
    let m = instance.num_machines();
    if log.len() > instance.num_ops() {
        return Err(Violation::new("more log entries than operations"));
    }
    let mut next_op = alloc::vec![0usize; j];
    let mut job_ready: Vec<Time> = alloc::vec![0; j];
    let mut machine_ready: Vec<Time> = alloc::vec![0; m];
    for (i, d) in log.iter().enumerate() {
        if d.job >= j {
            return Err(Violation(format!("entry {i}: job {} out of range", d.job)));
        }
        if d.op != next_op[d.job] {
            return Err(Violation(format!(
                "entry {i}: job {} operation {} scheduled before operation {}",
                d.job, d.op, next_op[d.job]
            )));
        }
        if d.machine != instance.machine(d.job, d.op) {
            return Err(Violation(format!(
                "entry {i}: job {} operation {} on machine {} but routed to {}",
                d.job,
                d.op,
                d.machine,
                instance.machine(d.job, d.op)
            )));
        }
        if d.end != d.start + instance.proc_time(d.job, d.op) {
            return Err(Violation(format!("entry {i}: end != start + duration")));
        }
        if d.start < job_ready[d.job] {
            return Err(Violation(format!(
                "entry {i}: job {} operation {} starts at {} before its predecessor ends at {}",
                d.job, d.op, d.start, job_ready[d.job]
            )));
        }
        let expected = job_ready[d.job].max(machine_ready[d.machine]);
        if d.start != expected {
            return Err(Violation(format!("entry {i}: start {} differs from earliest start {expected}", d.start)));
        }
        next_op[d.job] += 1;
        job_ready[d.job] = d.end;
        machine_ready[d.machine] = d.end;
    }
    let mut by_machine: Vec<Vec<(Time, Time)>> = alloc::vec![Vec::new(); m];
    for d in log {
        by_machine[d.machine].push((d.start, d.end));
    }
    for (machine, intervals) in by_machine.iter_mut().enumerate() {
        intervals.sort_unstable();
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Violation(format!(
                    "machine {machine}: intervals [{}, {}) and [{}, {}) overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
    }
    Ok(())
}
