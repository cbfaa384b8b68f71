use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Integer time units.
pub type Time = u64;

/// Largest processing time drawn by [`generate_instance`].
pub const MAX_PROC_TIME: u32 = 99;

/// A job-shop instance: every job visits every machine exactly once, in the
/// order given by its routing.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawInstance", into = "RawInstance"))]
pub struct Instance {
    id: String,
    num_jobs: usize,
    num_machines: usize,
    routing: Vec<Vec<usize>>,
    proc_time: Vec<Vec<u32>>,
    // derived
    job_total: Vec<Time>,
    machine_load: Vec<Time>,
}

/// Unchecked wire layout of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawInstance {
    pub id: String,
    pub num_jobs: usize,
    pub num_machines: usize,
    pub routing: Vec<Vec<usize>>,
    pub proc_time: Vec<Vec<u32>>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.id, raw.num_jobs, raw.num_machines, raw.routing, raw.proc_time)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            id: inst.id,
            num_jobs: inst.num_jobs,
            num_machines: inst.num_machines,
            routing: inst.routing,
            proc_time: inst.proc_time,
        }
    }
}

impl Instance {
    /// Validates and builds an instance.
    pub fn new(
        id: impl Into<String>,
        num_jobs: usize,
        num_machines: usize,
        routing: Vec<Vec<usize>>,
        proc_time: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if num_jobs == 0 || num_machines == 0 {
            return bad(format!("shape {num_jobs}x{num_machines} must be positive"));
        }
        if routing.len() != num_jobs || proc_time.len() != num_jobs {
            return bad(format!(
                "expected {num_jobs} jobs, got {} routings and {} duration rows",
                routing.len(),
                proc_time.len()
            ));
        }
        let mut machine_load = alloc::vec![0; num_machines];
        let mut job_total = Vec::with_capacity(num_jobs);
        for (j, (route, times)) in routing.iter().zip(&proc_time).enumerate() {
            if route.len() != num_machines || times.len() != num_machines {
                return bad(format!("job {j} must have exactly {num_machines} operations"));
            }
            let mut seen = alloc::vec![false; num_machines];
            for &m in route {
                if m >= num_machines || seen[m] {
                    return bad(format!("job {j} routing is not a permutation of the machines"));
                }
                seen[m] = true;
            }
            if let Some(k) = times.iter().position(|&p| p == 0) {
                return bad(format!("job {j} operation {k} has zero duration"));
            }
            for (&m, &p) in route.iter().zip(times) {
                machine_load[m] += p as Time;
            }
            job_total.push(times.iter().map(|&p| p as Time).sum());
        }
        Ok(Instance { id: id.into(), num_jobs, num_machines, routing, proc_time, job_total, machine_load })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn num_jobs(&self) -> usize {
        self.num_jobs
    }

    pub fn num_machines(&self) -> usize {
        self.num_machines
    }

    /// Total operation count `J * M`.
    pub fn num_ops(&self) -> usize {
        self.num_jobs * self.num_machines
    }

    pub fn routing(&self) -> &[Vec<usize>] {
        &self.routing
    }

    pub fn proc_times(&self) -> &[Vec<u32>] {
        &self.proc_time
    }

    /// Machine of operation `op` of `job`.
    #[inline]
    pub fn machine(&self, job: usize, op: usize) -> usize {
        self.routing[job][op]
    }

    /// Duration of operation `op` of `job`.
    #[inline]
    pub fn proc_time(&self, job: usize, op: usize) -> Time {
        self.proc_time[job][op] as Time
    }

    /// Sum of the durations of `job`.
    pub fn job_total(&self, job: usize) -> Time {
        self.job_total[job]
    }

    /// Sum of the durations of every operation routed to `machine`.
    pub fn machine_load(&self, machine: usize) -> Time {
        self.machine_load[machine]
    }

    pub fn total_work(&self) -> Time {
        self.job_total.iter().sum()
    }

    /// Classical makespan lower bound: the longest job or the most loaded machine.
    pub fn lower_bound(&self) -> Time {
        let job = self.job_total.iter().copied().max().unwrap_or(0);
        let machine = self.machine_load.iter().copied().max().unwrap_or(0);
        job.max(machine)
    }

    /// Returns a copy with every duration multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Result<Self> {
        let proc_time = self.proc_time.iter().map(|row| row.iter().map(|&p| p * factor).collect()).collect();
        Instance::new(self.id.clone(), self.num_jobs, self.num_machines, self.routing.clone(), proc_time)
    }
}

/// Random instance: one independent uniform machine permutation per job and
/// durations uniform on `1..=99`.
///
/// For each job in order, the routing is drawn first (Fisher–Yates over
/// `0..M`), then its `M` durations as `1 + below(99)`.
pub fn generate_instance(num_jobs: usize, num_machines: usize, seed: u64) -> Result<Instance> {
    if num_jobs == 0 || num_machines == 0 {
        return Err(Error::InvalidInstance(format!("shape {num_jobs}x{num_machines} must be positive")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut routing = Vec::with_capacity(num_jobs);
    let mut proc_time = Vec::with_capacity(num_jobs);
    for _ in 0..num_jobs {
        let mut route: Vec<usize> = (0..num_machines).collect();
        rng.shuffle(&mut route);
        let times = (0..num_machines).map(|_| 1 + rng.below(MAX_PROC_TIME as u64) as u32).collect();
        routing.push(route);
        proc_time.push(times);
    }
    Instance::new(format!("{num_jobs}x{num_machines}-{seed:016x}"), num_jobs, num_machines, routing, proc_time)
}

/// Which side of a train/test split an instance set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

/// `count` instances of one shape and split, named `"{J}x{M}-{split}-{i:03}"`.
///
/// Instance `i` uses seed `derive_seed(base_seed, [J, M, split, i])`, so
/// train and test sets never share an instance and growing `count` keeps the
/// existing prefix unchanged.
pub fn generate_set(
    num_jobs: usize,
    num_machines: usize,
    count: usize,
    split: Split,
    base_seed: u64,
) -> Result<Vec<Instance>> {
    (0..count)
        .map(|i| {
            let seed =
                crate::rng::derive_seed(base_seed, &[num_jobs as u64, num_machines as u64, split.tag(), i as u64]);
            generate_instance(num_jobs, num_machines, seed)
                .map(|inst| inst.with_id(format!("{num_jobs}x{num_machines}-{}-{i:03}", split.as_str())))
        })
        .collect()
}
