use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::generation::{load_pool, Candidate, Encoding, Genome, GenomeSpace};
use crate::par;
use crate::pareto::ObjectiveVector;

use super::config::{CampaignConfig, PoolSource};

/// Synthetic objective functions on bitstrings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinOracle {
    /// Negated squared distances to two opposite corners of the decoded box.
    SpherePair,
    /// Negated ZDT1 on the decoded reals.
    Zdt1Discrete,
    /// `(ones / B, zeros / B)`.
    LinearTradeoff,
}

fn default_groups() -> usize {
    2
}

fn default_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Builtin {
        name: BuiltinOracle,
        /// Decoded real variables (equal-width bit groups).
        #[serde(default = "default_groups")]
        groups: usize,
    },
    /// Objective lookup by genome from a labeled pool file; without a path,
    /// the static pool's own labels.
    Table {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    /// Subprocess speaking newline-delimited JSON.
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

impl OracleSpec {
    pub(crate) fn resolve_paths(&mut self, base: &Path) {
        if let OracleSpec::Table { path: Some(p) } = self {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub(crate) fn validate(&self, cfg: &CampaignConfig) -> Result<()> {
        match self {
            OracleSpec::Builtin { name, groups } => {
                let length = match cfg.encoding.space {
                    GenomeSpace::Bits { length } => length,
                    GenomeSpace::Tokens { .. } => {
                        return Err(Error::invalid("builtin oracles need bitstring genomes"));
                    }
                };
                if cfg.objectives != 2 {
                    return Err(Error::invalid(format!(
                        "builtin oracle {name:?} has 2 objectives, config says {}",
                        cfg.objectives
                    )));
                }
                if *name != BuiltinOracle::LinearTradeoff && (*groups == 0 || length % groups != 0 || length / groups > 52) {
                    return Err(Error::invalid(format!(
                        "oracle.groups ({groups}) must split the bit length ({length}) into equal groups of at most 52 bits"
                    )));
                }
                Ok(())
            }
            OracleSpec::Table { path: None } if !matches!(cfg.pool, PoolSource::Static { .. }) => {
                Err(Error::invalid("oracle.path is required unless the pool is static"))
            }
            OracleSpec::External { command, timeout_secs } => {
                if command.is_empty() {
                    return Err(Error::invalid("oracle.command must not be empty"));
                }
                if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                    return Err(Error::invalid("oracle.timeout_secs must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// The expensive black box: one objective vector per candidate, same order.
pub trait Oracle: Send + Sync {
    fn n_objectives(&self) -> usize;
    fn evaluate(&self, batch: &[Candidate]) -> Result<Vec<ObjectiveVector>>;
}

/// Evaluates a non-empty batch and checks the shape of the answer.
pub fn evaluate_oracle(oracle: &dyn Oracle, batch: &[Candidate]) -> Result<Vec<ObjectiveVector>> {
    if batch.is_empty() {
        return Err(Error::invalid("oracle batch is empty"));
    }
    let out = oracle.evaluate(batch)?;
    if out.len() != batch.len() || out.iter().any(|y| y.dim() != oracle.n_objectives()) {
        return Err(Error::Oracle {
            message: format!("expected {} vectors of length {}", batch.len(), oracle.n_objectives()),
            raw: format!("{out:?}"),
        });
    }
    Ok(out)
}

fn decode(bits: &[bool], groups: usize) -> Vec<f64> {
    let width = bits.len() / groups;
    let top = ((1u64 << width) - 1) as f64;
    bits.chunks(width)
        .map(|c| c.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b)) as f64 / top)
        .collect()
}

/// ZDT1 (minimization form) at `x` in [0, 1]^d.
pub fn zdt1(x: &[f64]) -> (f64, f64) {
    let f1 = x[0];
    let g = if x.len() > 1 {
        1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64
    } else {
        1.0
    };
    (f1, g * (1.0 - (f1 / g).sqrt()))
}

impl BuiltinOracle {
    pub fn eval_bits(self, bits: &[bool], groups: usize) -> Vec<f64> {
        match self {
            BuiltinOracle::LinearTradeoff => {
                let b = bits.len() as f64;
                let ones = bits.iter().filter(|&&x| x).count() as f64;
                vec![ones / b, (b - ones) / b]
            }
            BuiltinOracle::SpherePair => {
                let x = decode(bits, groups);
                let d = |c: f64| -x.iter().map(|v| (v - c).powi(2)).sum::<f64>();
                vec![d(0.0), d(1.0)]
            }
            BuiltinOracle::Zdt1Discrete => {
                let (f1, f2) = zdt1(&decode(bits, groups));
                vec![-f1, -f2]
            }
        }
    }
}

struct Builtin {
    kind: BuiltinOracle,
    groups: usize,
}

impl Oracle for Builtin {
    fn n_objectives(&self) -> usize {
        2
    }

    fn evaluate(&self, batch: &[Candidate]) -> Result<Vec<ObjectiveVector>> {
        par::map_slice(batch, |c| match &c.genome {
            Genome::Bits(bits) => ObjectiveVector::new(self.kind.eval_bits(bits, self.groups)),
            Genome::Tokens(_) => Err(Error::invalid(format!("builtin oracle got token genome {}", c.id))),
        })
        .into_iter()
        .collect()
    }
}

/// Lookup oracle over known labels, keyed by genome.
pub struct TableOracle {
    m: usize,
    labels: HashMap<String, ObjectiveVector>,
}

impl TableOracle {
    pub fn new(candidates: &[Candidate], objectives: &[ObjectiveVector]) -> Result<Self> {
        crate::pareto::check_dims(candidates.len(), objectives.len())?;
        let m = objectives.first().map_or(0, |o| o.dim());
        let labels = candidates.iter().map(|c| c.key.clone()).zip(objectives.iter().cloned()).collect();
        Ok(Self { m, labels })
    }
}

impl Oracle for TableOracle {
    fn n_objectives(&self) -> usize {
        self.m
    }

    fn evaluate(&self, batch: &[Candidate]) -> Result<Vec<ObjectiveVector>> {
        batch
            .iter()
            .map(|c| {
                self.labels.get(&c.key).cloned().ok_or_else(|| Error::Oracle {
                    message: format!("no label for candidate {} ({})", c.id, c.key),
                    raw: String::new(),
                })
            })
            .collect()
    }
}

/// Subprocess oracle. The whole batch goes to one invocation.
pub struct ExternalOracle {
    command: Vec<String>,
    timeout: Duration,
    m: usize,
}

#[derive(Serialize)]
struct Request<'a> {
    id: &'a str,
    genome: String,
    features: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    id: String,
    objectives: Vec<f64>,
}

impl ExternalOracle {
    pub fn new(command: Vec<String>, timeout: Duration, m: usize) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::invalid("external oracle command is empty"));
        }
        Ok(Self { command, timeout, m })
    }
}

impl Oracle for ExternalOracle {
    fn n_objectives(&self) -> usize {
        self.m
    }

    fn evaluate(&self, batch: &[Candidate]) -> Result<Vec<ObjectiveVector>> {
        let fail = |message: String, raw: String| Error::Oracle { message, raw };
        let mut input = String::new();
        for c in batch {
            let req = Request {
                id: &c.id,
                genome: c.genome.to_string(),
                features: &c.features,
            };
            input.push_str(&serde_json::to_string(&req)?);
            input.push('\n');
        }
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("cannot start {:?}: {e}", self.command[0]), String::new()))?;

        // Feed and drain on helper threads so a chatty child cannot block on
        // a full pipe while we wait on it.
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || {
            let r = stdin.write_all(input.as_bytes());
            drop(stdin);
            r
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let status = child
            .wait_timeout(self.timeout)
            .map_err(|e| fail(format!("waiting on oracle: {e}"), String::new()))?;
        let status = match status {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                let out = reader.join().ok().and_then(|r| r.ok()).unwrap_or_default();
                return Err(fail(format!("timed out after {:?}", self.timeout), out));
            }
        };
        let write_result = writer.join().unwrap_or(Ok(()));
        let out = reader
            .join()
            .map_err(|_| fail("stdout reader panicked".into(), String::new()))?
            .map_err(|e| fail(format!("reading stdout: {e}"), String::new()))?;
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(fail(format!("exited with {status}; stderr: {}", err.trim()), out));
        }
        if let Err(e) = write_result {
            return Err(fail(format!("writing requests: {e}"), out));
        }

        let mut answers: HashMap<String, Vec<f64>> = HashMap::new();
        for line in out.lines().filter(|l| !l.trim().is_empty()) {
            let resp: Response =
                serde_json::from_str(line).map_err(|e| fail(format!("malformed response line: {e}"), out.clone()))?;
            if answers.insert(resp.id.clone(), resp.objectives).is_some() {
                return Err(fail(format!("duplicate response for {}", resp.id), out.clone()));
            }
        }
        batch
            .iter()
            .map(|c| {
                let v = answers
                    .remove(&c.id)
                    .ok_or_else(|| fail(format!("no response for {}", c.id), out.clone()))?;
                if v.len() != self.m {
                    return Err(fail(format!("{} returned {} objectives, expected {}", c.id, v.len(), self.m), out.clone()));
                }
                ObjectiveVector::new(v).map_err(|e| fail(format!("{}: {e}", c.id), out.clone()))
            })
            .collect()
    }
}

/// Builds the configured oracle. `static_labels` supplies the static pool's
/// labels for a path-less table oracle.
pub fn build_oracle(
    cfg: &CampaignConfig,
    static_labels: Option<(&[Candidate], &[ObjectiveVector])>,
) -> Result<Box<dyn Oracle>> {
    Ok(match &cfg.oracle {
        OracleSpec::Builtin { name, groups } => Box::new(Builtin {
            kind: *name,
            groups: *groups,
        }),
        OracleSpec::Table { path: Some(p) } => {
            let pool = load_pool(p, &cfg.encoding)?;
            let objs = pool
                .objectives
                .ok_or_else(|| Error::invalid(format!("table oracle file {} has no objective columns", p.display())))?;
            Box::new(TableOracle::new(&pool.candidates, &objs)?)
        }
        OracleSpec::Table { path: None } => {
            let (c, o) = static_labels.ok_or_else(|| Error::invalid("table oracle needs a labeled static pool"))?;
            Box::new(TableOracle::new(c, o)?)
        }
        OracleSpec::External { command, timeout_secs } => Box::new(ExternalOracle::new(
            command.clone(),
            Duration::from_secs_f64(*timeout_secs),
            cfg.objectives,
        )?),
    })
}

/// Encoding used by the builtin examples: `bits` long, decoded in `groups`.
pub fn builtin_encoding(bits: usize, groups: usize) -> Result<Encoding> {
    Encoding::new(
        GenomeSpace::Bits { length: bits },
        crate::generation::Featurizer::BinaryDecode { groups },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn linear_tradeoff_counts() {
        assert_eq!(BuiltinOracle::LinearTradeoff.eval_bits(&bits("11000000"), 2), vec![0.25, 0.75]);
    }

    #[test]
    fn zdt1_at_origin() {
        let y = BuiltinOracle::Zdt1Discrete.eval_bits(&bits("00000000"), 2);
        assert_eq!(y[0], 0.0);
        // g = 1 at x2 = 0, so f2 = 1.
        assert_eq!(y[1], -1.0);
        let y = BuiltinOracle::Zdt1Discrete.eval_bits(&bits("11110000"), 2);
        assert_eq!(y, vec![-1.0, 0.0]);
    }

    #[test]
    fn sphere_pair_conflicts() {
        let lo = BuiltinOracle::SpherePair.eval_bits(&bits("0000"), 2);
        let hi = BuiltinOracle::SpherePair.eval_bits(&bits("1111"), 2);
        assert_eq!(lo, vec![0.0, -2.0]);
        assert_eq!(hi, vec![-2.0, 0.0]);
    }

    #[cfg(unix)]
    #[test]
    fn external_echo() {
        let enc = builtin_encoding(4, 2).unwrap();
        let batch = vec![enc.candidate(enc.space.parse("0101").unwrap()), enc.candidate(enc.space.parse("1111").unwrap())];
        let script = r#"while read -r line; do id=$(printf '%s' "$line" | sed 's/.*"id":"\([^"]*\)".*/\1/'); printf '{"id":"%s","objectives":[1.5,-2]}\n' "$id"; done"#;
        let o = ExternalOracle::new(vec!["sh".into(), "-c".into(), script.into()], Duration::from_secs(10), 2).unwrap();
        let ys = evaluate_oracle(&o, &batch).unwrap();
        assert_eq!(ys.len(), 2);
        assert!(ys.iter().all(|y| y.as_slice() == [1.5, -2.0]));
    }

    #[cfg(unix)]
    #[test]
    fn external_failures_carry_output() {
        let enc = builtin_encoding(4, 2).unwrap();
        let batch = vec![enc.candidate(enc.space.parse("0101").unwrap())];
        let bad = ExternalOracle::new(vec!["sh".into(), "-c".into(), "cat >/dev/null; echo nonsense".into()], Duration::from_secs(10), 2).unwrap();
        match evaluate_oracle(&bad, &batch) {
            Err(Error::Oracle { raw, .. }) => assert!(raw.contains("nonsense")),
            other => panic!("{other:?}"),
        }
        let failing = ExternalOracle::new(vec!["sh".into(), "-c".into(), "cat >/dev/null; exit 3".into()], Duration::from_secs(10), 2).unwrap();
        assert!(matches!(evaluate_oracle(&failing, &batch), Err(Error::Oracle { .. })));
        let slow = ExternalOracle::new(vec!["sleep".into(), "5".into()], Duration::from_millis(200), 2).unwrap();
        match evaluate_oracle(&slow, &batch) {
            Err(Error::Oracle { message, .. }) => assert!(message.contains("timed out")),
            other => panic!("{other:?}"),
        }
    }
}
