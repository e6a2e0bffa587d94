//! On-disk document schemas: worlds, recorded instances, learned models,
//! partitions, and report files. All documents are JSON with explicit
//! `format`/`version` headers; rationals are canonical `p/q` strings (plain
//! integers when the denominator is 1) so files round-trip bit-exactly.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use selfsort_core::landmarks::VList;
use selfsort_core::model::{
    GroupModel, HiddenSource, Instance, PiecewiseLinearFunction, Rat, World,
};
use selfsort_core::outcome::{
    GroupLearned, LearnedModel, ModelParams, OutcomeTrie, PredRef, RawTrieNode,
};
use selfsort_core::partition::PartitionResult;

#[derive(Debug)]
pub enum FormatError {
    Io(std::io::Error),
    Json(serde_json::Error),
    Schema(String),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "io: {e}"),
            FormatError::Json(e) => write!(f, "json: {e}"),
            FormatError::Schema(msg) => write!(f, "schema: {msg}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e)
    }
}

fn schema(msg: impl Into<String>) -> FormatError {
    FormatError::Schema(msg.into())
}

// ── Generic file helpers ──────────────────────────────────────────────

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn expect_header(format: &str, version: u32, want: &str) -> Result<(), FormatError> {
    if format != want {
        return Err(schema(format!("expected format '{want}', found '{format}'")));
    }
    if version != 1 {
        return Err(schema(format!("unsupported {want} version {version}")));
    }
    Ok(())
}

// ── Rational and reference encodings ──────────────────────────────────

fn rat_to_string(r: &Rat) -> String {
    r.to_string()
}

fn rat_from_string(s: &str) -> Result<Rat, FormatError> {
    BigRational::from_str(s.trim())
        .map_err(|e| schema(format!("bad rational '{s}': {e}")))
}

fn pred_to_string(r: PredRef) -> String {
    match r {
        PredRef::Landmark(i) => format!("V{i}"),
        PredRef::Element(s) => format!("E{s}"),
    }
}

fn pred_from_string(s: &str) -> Result<PredRef, FormatError> {
    let (kind, num) = s.split_at(1);
    let idx: u32 = num
        .parse()
        .map_err(|_| schema(format!("bad predecessor reference '{s}'")))?;
    match kind {
        "V" => Ok(PredRef::Landmark(idx)),
        "E" => Ok(PredRef::Element(idx)),
        _ => Err(schema(format!("bad predecessor reference '{s}'"))),
    }
}

// ── World documents ───────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum SourceDoc {
    ContinuousUniform { lo: String, hi: String },
    TruncatedGaussian { mean: String, sd: String, lo: String, hi: String },
    DiscreteUniform { atoms: Vec<String> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionDoc {
    vertices: Vec<[String; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    members: Vec<u32>,
    source: SourceDoc,
    functions: Vec<FunctionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDoc {
    format: String,
    version: u32,
    n: u32,
    mu: u32,
    sigma: u32,
    seed: u64,
    groups: Vec<GroupDoc>,
}

pub fn world_to_doc(world: &World) -> WorldDoc {
    WorldDoc {
        format: "selfsort-world".into(),
        version: 1,
        n: world.n,
        mu: world.mu,
        sigma: world.sigma,
        seed: world.seed,
        groups: world
            .groups
            .iter()
            .map(|g| GroupDoc {
                members: g.members.clone(),
                source: match &g.source {
                    HiddenSource::ContinuousUniform { lo, hi } => SourceDoc::ContinuousUniform {
                        lo: rat_to_string(lo),
                        hi: rat_to_string(hi),
                    },
                    HiddenSource::TruncatedGaussian { mean, sd, lo, hi } => {
                        SourceDoc::TruncatedGaussian {
                            mean: rat_to_string(mean),
                            sd: rat_to_string(sd),
                            lo: rat_to_string(lo),
                            hi: rat_to_string(hi),
                        }
                    }
                    HiddenSource::DiscreteUniform { atoms } => SourceDoc::DiscreteUniform {
                        atoms: atoms.iter().map(rat_to_string).collect(),
                    },
                },
                functions: g
                    .functions
                    .iter()
                    .map(|f| FunctionDoc {
                        vertices: f
                            .vertices()
                            .iter()
                            .map(|(z, y)| [rat_to_string(z), rat_to_string(y)])
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn world_from_doc(doc: &WorldDoc) -> Result<World, FormatError> {
    expect_header(&doc.format, doc.version, "selfsort-world")?;
    let groups = doc
        .groups
        .iter()
        .map(|g| {
            let source = match &g.source {
                SourceDoc::ContinuousUniform { lo, hi } => HiddenSource::ContinuousUniform {
                    lo: rat_from_string(lo)?,
                    hi: rat_from_string(hi)?,
                },
                SourceDoc::TruncatedGaussian { mean, sd, lo, hi } => {
                    HiddenSource::TruncatedGaussian {
                        mean: rat_from_string(mean)?,
                        sd: rat_from_string(sd)?,
                        lo: rat_from_string(lo)?,
                        hi: rat_from_string(hi)?,
                    }
                }
                SourceDoc::DiscreteUniform { atoms } => HiddenSource::DiscreteUniform {
                    atoms: atoms
                        .iter()
                        .map(|a| rat_from_string(a))
                        .collect::<Result<_, _>>()?,
                },
            };
            let functions = g
                .functions
                .iter()
                .map(|f| {
                    let vertices = f
                        .vertices
                        .iter()
                        .map(|[z, y]| Ok((rat_from_string(z)?, rat_from_string(y)?)))
                        .collect::<Result<Vec<_>, FormatError>>()?;
                    PiecewiseLinearFunction::new(vertices)
                        .map_err(|e| schema(format!("bad function: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GroupModel { members: g.members.clone(), source, functions })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(World { n: doc.n, mu: doc.mu, sigma: doc.sigma, seed: doc.seed, groups })
}

pub fn save_world(path: &Path, world: &World) -> Result<(), FormatError> {
    write_json(path, &world_to_doc(world))
}

pub fn load_world(path: &Path) -> Result<World, FormatError> {
    world_from_doc(&read_json(path)?)
}

// ── Instance stream documents ─────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstancesDoc {
    format: String,
    version: u32,
    pub n: u32,
    pub instances: Vec<Vec<f64>>,
}

pub fn instances_to_doc(n: usize, instances: &[Instance]) -> InstancesDoc {
    InstancesDoc {
        format: "selfsort-instances".into(),
        version: 1,
        n: n as u32,
        instances: instances.iter().map(|i| i.values.clone()).collect(),
    }
}

pub fn instances_from_doc(doc: &InstancesDoc) -> Result<Vec<Instance>, FormatError> {
    expect_header(&doc.format, doc.version, "selfsort-instances")?;
    for (i, row) in doc.instances.iter().enumerate() {
        if row.len() != doc.n as usize {
            return Err(schema(format!(
                "instance {i} has {} values, expected {}",
                row.len(),
                doc.n
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(schema(format!("instance {i} has non-finite values")));
        }
    }
    Ok(doc
        .instances
        .iter()
        .map(|row| Instance { values: row.clone(), provenance: None })
        .collect())
}

pub fn save_instances(path: &Path, n: usize, instances: &[Instance]) -> Result<(), FormatError> {
    write_json(path, &instances_to_doc(n, instances))
}

pub fn load_instances(path: &Path) -> Result<(usize, Vec<Instance>), FormatError> {
    let doc: InstancesDoc = read_json(path)?;
    let instances = instances_from_doc(&doc)?;
    Ok((doc.n as usize, instances))
}

// ── Model documents ───────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    n: u32,
    mu: u32,
    sigma: u32,
    n_prime: u32,
    lambda: u32,
    rho: f64,
    t_formula: u64,
    t_used: u64,
    stat_mu: u32,
    partition_rows: u32,
    base_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrieNodeDoc {
    /// Weight as an exact rational `count/total`.
    w: String,
    /// Branch key (predecessor reference); absent on the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<String>,
    /// Children in candidate order; empty at leaves.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    c: Vec<TrieNodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelGroupDoc {
    members: Vec<u32>,
    t: u64,
    trie: TrieNodeDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    format: String,
    version: u32,
    params: ParamsDoc,
    landmarks: Vec<f64>,
    groups: Vec<ModelGroupDoc>,
}

fn trie_node_to_doc(raw: &RawTrieNode, key: Option<PredRef>, total: u64) -> TrieNodeDoc {
    TrieNodeDoc {
        w: format!("{}/{}", raw.count, total),
        b: key.map(pred_to_string),
        c: raw
            .children
            .iter()
            .map(|(k, sub)| trie_node_to_doc(sub, Some(*k), total))
            .collect(),
    }
}

fn trie_node_from_doc(
    doc: &TrieNodeDoc,
    expect_key: bool,
    total: u64,
) -> Result<(Option<PredRef>, RawTrieNode), FormatError> {
    let (count_str, total_str) = doc
        .w
        .split_once('/')
        .ok_or_else(|| schema(format!("bad weight '{}'", doc.w)))?;
    let count: u64 = count_str
        .parse()
        .map_err(|_| schema(format!("bad weight numerator '{}'", doc.w)))?;
    let denom: u64 = total_str
        .parse()
        .map_err(|_| schema(format!("bad weight denominator '{}'", doc.w)))?;
    if denom != total {
        return Err(schema(format!(
            "weight denominator {denom} does not match group total {total}"
        )));
    }
    let key = match (&doc.b, expect_key) {
        (Some(s), true) => Some(pred_from_string(s)?),
        (None, false) => None,
        (Some(_), false) => return Err(schema("root node must not carry a branch key")),
        (None, true) => return Err(schema("non-root node missing its branch key")),
    };
    let children = doc
        .c
        .iter()
        .map(|child| {
            let (k, sub) = trie_node_from_doc(child, true, total)?;
            Ok((k.expect("child key"), sub))
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok((key, RawTrieNode { count, children }))
}

pub fn model_to_doc(model: &LearnedModel) -> ModelDoc {
    let p = &model.params;
    ModelDoc {
        format: "selfsort-model".into(),
        version: 1,
        params: ParamsDoc {
            n: p.n,
            mu: p.mu,
            sigma: p.sigma,
            n_prime: p.n_prime,
            lambda: p.lambda,
            rho: p.rho,
            t_formula: p.t_formula,
            t_used: p.t_used,
            stat_mu: p.stat_mu,
            partition_rows: p.partition_rows,
            base_seed: p.base_seed,
        },
        landmarks: model.vlist.landmarks().to_vec(),
        groups: model
            .groups
            .iter()
            .map(|g| ModelGroupDoc {
                members: g.members.clone(),
                t: g.trie.total(),
                trie: trie_node_to_doc(&g.trie.to_raw(), None, g.trie.total()),
            })
            .collect(),
    }
}

pub fn model_from_doc(doc: &ModelDoc) -> Result<LearnedModel, FormatError> {
    expect_header(&doc.format, doc.version, "selfsort-model")?;
    let vlist = VList::from_landmarks(doc.landmarks.clone())
        .map_err(|e| schema(format!("bad landmarks: {e}")))?;
    // Group members must partition 0..n or the sorter would drop elements.
    let mut owner = vec![false; doc.params.n as usize];
    for g in &doc.groups {
        for &m in &g.members {
            let slot = owner
                .get_mut(m as usize)
                .ok_or_else(|| schema(format!("member {m} out of range")))?;
            if std::mem::replace(slot, true) {
                return Err(schema(format!("member {m} appears in two groups")));
            }
        }
    }
    if let Some(m) = owner.iter().position(|&o| !o) {
        return Err(schema(format!("element {m} belongs to no group")));
    }
    let groups = doc
        .groups
        .iter()
        .map(|g| {
            let (_, raw) = trie_node_from_doc(&g.trie, false, g.t)?;
            if raw.count != g.t {
                return Err(schema(format!(
                    "root weight {} does not match group total {}",
                    raw.count, g.t
                )));
            }
            let trie = OutcomeTrie::from_raw(g.members.len(), vlist.n(), &raw)
                .map_err(|e| schema(format!("bad trie: {e}")))?;
            Ok(GroupLearned { members: g.members.clone(), trie })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let p = &doc.params;
    Ok(LearnedModel {
        params: ModelParams {
            n: p.n,
            mu: p.mu,
            sigma: p.sigma,
            n_prime: p.n_prime,
            lambda: p.lambda,
            rho: p.rho,
            t_formula: p.t_formula,
            t_used: p.t_used,
            stat_mu: p.stat_mu,
            partition_rows: p.partition_rows,
            base_seed: p.base_seed,
        },
        vlist,
        groups,
    })
}

pub fn save_model(path: &Path, model: &LearnedModel) -> Result<(), FormatError> {
    write_json(path, &model_to_doc(model))
}

pub fn load_model(path: &Path) -> Result<LearnedModel, FormatError> {
    model_from_doc(&read_json(path)?)
}

// ── Partition documents ───────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDoc {
    format: String,
    version: u32,
    pub stat_mu: u32,
    pub threshold: u32,
    pub rows: u32,
    pub groups: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_d: Option<Vec<Vec<u16>>>,
}

pub fn partition_to_doc(result: &PartitionResult, stat_mu: u32, rows: usize) -> PartitionDoc {
    PartitionDoc {
        format: "selfsort-partition".into(),
        version: 1,
        stat_mu,
        threshold: 2 * stat_mu + 1,
        rows: rows as u32,
        groups: result.groups.clone(),
        pairwise_d: result.pairwise_d.clone(),
    }
}
