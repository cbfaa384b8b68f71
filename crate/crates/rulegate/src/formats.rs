//! On-disk formats: instances (JSON and the plain-text benchmark layout),
//! labeled datasets (CSV), fitted models (binary) and cost ledgers (JSON).
//!
//! Every writer goes through [`write_atomic`], so a failed run never leaves a
//! half-written artifact behind.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rulegate_core::features::{FeatureVector, Normalizer, NUM_FEATURES};
use rulegate_core::labeler::{Breadth, CostLedger, Depth, LabelKind, LabeledSample};
use rulegate_core::{Instance, RuleId, SelectorModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const INSTANCE_FORMAT: &str = "rulegate-instance v1";
pub const DATASET_FORMAT: &str = "rulegate-dataset v1";
pub const LEDGER_FORMAT: &str = "rulegate-ledger v1";
pub const MODEL_MAGIC: &[u8; 8] = b"RGKNN\0\0\0";
pub const MODEL_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- instances

/// Instance JSON: the instance fields plus `format` and an optional
/// `config` echo.
pub fn instance_to_json(instance: &Instance, config: Option<&Value>) -> Result<String> {
    let mut v = serde_json::to_value(instance)?;
    let obj = v.as_object_mut().expect("instance serializes to an object");
    obj.insert("format".into(), Value::from(INSTANCE_FORMAT));
    if let Some(c) = config {
        obj.insert("config".into(), c.clone());
    }
    let mut text = serde_json::to_string(&v)?;
    text.push('\n');
    Ok(text)
}

pub fn write_instance(path: &Path, instance: &Instance, config: Option<&Value>) -> Result<()> {
    write_atomic(path, instance_to_json(instance, config)?.as_bytes())
}

/// Reads an instance in either JSON or the text benchmark layout. Text
/// files take their id from the file stem.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if let Some(f) = v.get("format").and_then(Value::as_str) {
            if f != INSTANCE_FORMAT {
                return Err(Error::format(path, format!("unsupported instance format {f:?}")));
            }
        }
        serde_json::from_value(v).map_err(|e| Error::format(path, e.to_string()))
    } else {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        parse_benchmark_text(&id, &text).map_err(|msg| Error::format(path, msg))
    }
}

/// Parses the common benchmark layout: a `J M` line, then one line per job
/// of `machine duration` pairs in routing order. Lines starting with `#`
/// and blank lines are skipped.
pub fn parse_benchmark_text(id: &str, text: &str) -> std::result::Result<Instance, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or("empty instance file")?;
    let dims: Vec<usize> = parse_numbers(header)?;
    let [j, m] = dims[..] else {
        return Err(format!("header must hold two numbers, got {header:?}"));
    };
    let mut routing = Vec::with_capacity(j);
    let mut proc_time = Vec::with_capacity(j);
    for job in 0..j {
        let line = lines.next().ok_or_else(|| format!("missing line for job {job}"))?;
        let nums: Vec<usize> = parse_numbers(line)?;
        if nums.len() != 2 * m {
            return Err(format!("job {job}: expected {} numbers, got {}", 2 * m, nums.len()));
        }
        routing.push(nums.iter().step_by(2).copied().collect());
        let durations = nums
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&d| u32::try_from(d).map_err(|_| format!("job {job}: duration {d} too large")))
            .collect::<std::result::Result<Vec<u32>, String>>()?;
        proc_time.push(durations);
    }
    if let Some(extra) = lines.next() {
        return Err(format!("unexpected trailing line {extra:?}"));
    }
    Instance::new(id, j, m, routing, proc_time).map_err(|e| e.to_string())
}

fn parse_numbers(line: &str) -> std::result::Result<Vec<usize>, String> {
    line.split_whitespace().map(|t| t.parse().map_err(|_| format!("not a number: {t:?}"))).collect()
}

pub fn benchmark_text(instance: &Instance) -> String {
    let mut out = format!("{} {}\n", instance.num_jobs(), instance.num_machines());
    for j in 0..instance.num_jobs() {
        let row: Vec<String> = (0..instance.num_machines())
            .map(|op| format!("{} {}", instance.machine(j, op), instance.proc_time(j, op)))
            .collect();
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

/// Reads every `*.json` or `*.txt` instance in `dir`, sorted by file name.
pub fn read_instance_dir(dir: &Path) -> Result<Vec<Instance>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json" || e == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::format(dir, "no instance files found"));
    }
    paths.iter().map(|p| read_instance(p)).collect()
}

// ----------------------------------------------------------------- datasets

/// Dataset-level metadata stored in the CSV preamble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub label_kind: LabelKind,
    pub depth: String,
    pub breadth: String,
    pub default_rule: RuleId,
    pub samples: usize,
    pub config: Value,
}

impl DatasetMeta {
    pub fn new(
        kind: LabelKind,
        depth: Depth,
        breadth: Breadth,
        default_rule: RuleId,
        samples: usize,
        config: Value,
    ) -> Self {
        DatasetMeta {
            format: DATASET_FORMAT.into(),
            label_kind: kind,
            depth: depth.to_string(),
            breadth: breadth.to_string(),
            default_rule,
            samples,
            config,
        }
    }
}

fn dataset_header() -> Vec<String> {
    let mut h: Vec<String> = (0..NUM_FEATURES).map(|i| format!("f{i}")).collect();
    for c in [
        "target",
        "instance_id",
        "state_index",
        "decision",
        "rule",
        "label_kind",
        "depth",
        "breadth",
        "makespan",
        "lower_bound",
    ] {
        h.push(c.into());
    }
    h
}

/// Serializes a dataset. Floats use Rust's shortest round-trip formatting,
/// so reading the file back reproduces every bit.
pub fn dataset_to_csv(samples: &[LabeledSample], meta: &DatasetMeta) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {DATASET_FORMAT}").expect("vec write");
    writeln!(out, "# meta {}", serde_json::to_string(meta)?).expect("vec write");
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(dataset_header())?;
        let mut row: Vec<String> = Vec::with_capacity(NUM_FEATURES + 10);
        for s in samples {
            row.clear();
            row.extend(s.features.0.iter().map(|x| format!("{x:?}")));
            row.push(format!("{:?}", s.target));
            row.push(s.instance_id.clone());
            row.push(s.state_index.to_string());
            row.push(s.decision.to_string());
            row.push(s.rule.code().to_string());
            row.push(meta.label_kind.code().to_string());
            row.push(meta.depth.clone());
            row.push(meta.breadth.clone());
            row.push(s.makespan.to_string());
            row.push(s.lower_bound.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(Path::new("<dataset>"), e))?;
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, samples: &[LabeledSample], meta: &DatasetMeta) -> Result<()> {
    write_atomic(path, &dataset_to_csv(samples, meta)?)
}

pub fn read_dataset(path: &Path) -> Result<(Vec<LabeledSample>, DatasetMeta)> {
    let text = read_text(path)?;
    let bad = |msg: String| Error::format(path, msg);
    let mut lines = text.lines();
    if lines.next() != Some(&format!("# {DATASET_FORMAT}")[..]) {
        return Err(bad(format!("missing '# {DATASET_FORMAT}' header")));
    }
    let meta_line =
        lines.next().and_then(|l| l.strip_prefix("# meta ")).ok_or_else(|| bad("missing meta line".into()))?;
    let meta: DatasetMeta = serde_json::from_str(meta_line).map_err(|e| bad(e.to_string()))?;

    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != dataset_header() {
        return Err(bad("unexpected column layout".into()));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let float = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| bad(format!("row {line}: bad number {:?}", field(i))))
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| bad(format!("row {line}: bad integer {:?}", field(i))))
        };
        let mut f = [0.0; NUM_FEATURES];
        for (d, x) in f.iter_mut().enumerate() {
            *x = float(d)?;
        }
        let base = NUM_FEATURES;
        let code = int(base + 4)?;
        let rule = usize::try_from(code)
            .ok()
            .and_then(RuleId::from_code)
            .ok_or_else(|| bad(format!("row {line}: bad rule code {code}")))?;
        samples.push(LabeledSample {
            features: FeatureVector(f),
            target: float(base)?,
            instance_id: field(base + 1).to_string(),
            state_index: int(base + 2)? as usize,
            decision: int(base + 3)? as usize,
            rule,
            makespan: int(base + 8)?,
            lower_bound: int(base + 9)?,
        });
    }
    if samples.len() != meta.samples {
        return Err(bad(format!("meta announces {} samples, file holds {}", meta.samples, samples.len())));
    }
    Ok((samples, meta))
}

// ------------------------------------------------------------------- ledger

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerFile {
    pub format: String,
    pub rollouts: u64,
    pub steps: u64,
    pub completion_steps: u64,
    pub wall_seconds: f64,
    pub config: Value,
}

impl LedgerFile {
    pub fn new(ledger: &CostLedger, config: Value) -> Self {
        LedgerFile {
            format: LEDGER_FORMAT.into(),
            rollouts: ledger.rollouts,
            steps: ledger.steps,
            completion_steps: ledger.completion_steps,
            wall_seconds: ledger.wall_seconds,
            config,
        }
    }
}

pub fn read_ledger(path: &Path) -> Result<LedgerFile> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

// ------------------------------------------------------------------- models

/// Binary model layout, little-endian throughout:
///
/// ```text
/// magic[8] version:u32 k:u64 epsilon:f64 label_kind:u8 default_rule:u8
/// normalizer_eps:f64 n:u64 dims:u32
/// mean[dims]:f64 std[dims]:f64 points[n*dims]:f64 targets[n]:f64 rules[n]:u8
/// config_len:u64 config_json[config_len]
/// ```
pub fn model_to_bytes(model: &SelectorModel, config: &Value) -> Result<Vec<u8>> {
    let n = model.len();
    let mut b = Vec::with_capacity(64 + 8 * (2 + n) * NUM_FEATURES + 9 * n);
    b.extend_from_slice(MODEL_MAGIC);
    b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    b.extend_from_slice(&(model.k() as u64).to_le_bytes());
    b.extend_from_slice(&model.epsilon().to_le_bytes());
    b.push(model.label_kind().code());
    b.push(model.default_rule().code() as u8);
    let norm = model.normalizer();
    b.extend_from_slice(&norm.epsilon.to_le_bytes());
    b.extend_from_slice(&(n as u64).to_le_bytes());
    b.extend_from_slice(&(NUM_FEATURES as u32).to_le_bytes());
    for x in norm.mean.iter().chain(norm.std.iter()) {
        b.extend_from_slice(&x.to_le_bytes());
    }
    for p in model.points() {
        for x in &p.0 {
            b.extend_from_slice(&x.to_le_bytes());
        }
    }
    for t in model.targets() {
        b.extend_from_slice(&t.to_le_bytes());
    }
    b.extend(model.rules().iter().map(|r| r.code() as u8));
    let cfg = serde_json::to_vec(config)?;
    b.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
    b.extend_from_slice(&cfg);
    Ok(b)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated model file")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self) -> std::result::Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|_| "length overflows".to_string())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> std::result::Result<(SelectorModel, Value), String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MODEL_MAGIC.len())? != MODEL_MAGIC {
        return Err("not a model file".into());
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(format!("unsupported model version {version}"));
    }
    let k = c.len()?;
    let epsilon = c.f64()?;
    let kind = LabelKind::from_code(c.u8()?).ok_or("bad label kind")?;
    let default_rule = RuleId::from_code(c.u8()? as usize).ok_or("bad default rule")?;
    let norm_eps = c.f64()?;
    let n = c.len()?;
    let dims = c.u32()? as usize;
    if dims != NUM_FEATURES {
        return Err(format!("model has {dims} features, expected {NUM_FEATURES}"));
    }
    // reject absurd counts before allocating
    if n.checked_mul(8 * NUM_FEATURES + 9).is_none_or(|need| need > bytes.len()) {
        return Err("truncated model file".into());
    }
    let mut mean = [0.0; NUM_FEATURES];
    let mut std = [0.0; NUM_FEATURES];
    for x in mean.iter_mut().chain(std.iter_mut()) {
        *x = c.f64()?;
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = [0.0; NUM_FEATURES];
        for x in p.iter_mut() {
            *x = c.f64()?;
        }
        points.push(FeatureVector(p));
    }
    let targets = (0..n).map(|_| c.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    let rules = (0..n)
        .map(|_| c.u8().and_then(|code| RuleId::from_code(code as usize).ok_or_else(|| "bad rule code".to_string())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let cfg_len = c.len()?;
    let config: Value = serde_json::from_slice(c.take(cfg_len)?).map_err(|e| e.to_string())?;
    if c.pos != bytes.len() {
        return Err("trailing bytes after model".into());
    }
    let normalizer = Normalizer { mean, std, epsilon: norm_eps };
    let model = SelectorModel::from_parts(normalizer, points, targets, rules, k, epsilon, kind, default_rule)
        .map_err(|e| e.to_string())?;
    Ok((model, config))
}

pub fn write_model(path: &Path, model: &SelectorModel, config: &Value) -> Result<()> {
    write_atomic(path, &model_to_bytes(model, config)?)
}

pub fn read_model(path: &Path) -> Result<(SelectorModel, Value)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
}

/// Hex rendering of a model fingerprint, as stored in reports.
pub fn fingerprint_hex(model: &SelectorModel) -> String {
    let mut s = String::with_capacity(16);
    write!(s, "{:016x}", model.fingerprint()).expect("string write");
    s
}
