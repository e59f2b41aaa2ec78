use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_instance, AoiCost, ContentSpec, CostParams, Instance, Request, ServerSpec, Topology};
use crate::error::{McspError, Result};

pub const INSTANCE_SCHEMA: &str = "mcsp-instance/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema: String,
    horizon: usize,
    servers: Vec<ServerRecord>,
    contents: Vec<ContentRecord>,
    requests: Vec<RequestRecord>,
    cost: CostRecord,
    topology: TopologyRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerRecord {
    id: usize,
    cache_capacity: f64,
    backhaul_capacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContentRecord {
    id: usize,
    size: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestRecord {
    id: usize,
    content: usize,
    origin: usize,
    deadline: usize,
    candidates: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostRecord {
    alpha: f64,
    beta: f64,
    aoi: AoiCost,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRecord {
    edges: Vec<[usize; 2]>,
    triples: Vec<[usize; 3]>,
}

fn to_file(inst: &Instance) -> InstanceFile {
    InstanceFile {
        schema: INSTANCE_SCHEMA.to_string(),
        horizon: inst.horizon,
        servers: inst
            .servers
            .iter()
            .enumerate()
            .map(|(h, s)| ServerRecord { id: h + 1, cache_capacity: s.cache_capacity, backhaul_capacity: s.backhaul_capacity })
            .collect(),
        contents: inst.contents.iter().enumerate().map(|(i, c)| ContentRecord { id: i + 1, size: c.size }).collect(),
        requests: inst
            .requests
            .iter()
            .enumerate()
            .map(|(r, q)| RequestRecord {
                id: r + 1,
                content: q.content + 1,
                origin: q.origin + 1,
                deadline: q.deadline + 1,
                candidates: q.candidates.iter().map(|h| h + 1).collect(),
            })
            .collect(),
        cost: CostRecord { alpha: inst.cost.alpha, beta: inst.cost.beta, aoi: inst.cost.aoi.clone() },
        topology: TopologyRecord {
            edges: inst.topology.edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            triples: inst.topology.triples.iter().map(|t| [t[0] + 1, t[1] + 1, t[2] + 1]).collect(),
        },
    }
}

fn check_ids(kind: &str, ids: impl Iterator<Item = usize>) -> Result<()> {
    for (k, id) in ids.enumerate() {
        if id != k + 1 {
            return Err(McspError::Schema(format!("{kind} ids must be 1..n in order; entry {} has id {id}", k + 1)));
        }
    }
    Ok(())
}

fn one_based(kind: &str, v: usize) -> Result<usize> {
    v.checked_sub(1).ok_or_else(|| McspError::Schema(format!("{kind} ids are 1-based, got 0")))
}

fn from_file(f: InstanceFile) -> Result<Instance> {
    if f.schema != INSTANCE_SCHEMA {
        return Err(McspError::Schema(format!("expected schema {INSTANCE_SCHEMA:?}, found {:?}", f.schema)));
    }
    check_ids("server", f.servers.iter().map(|s| s.id))?;
    check_ids("content", f.contents.iter().map(|c| c.id))?;
    check_ids("request", f.requests.iter().map(|r| r.id))?;

    let mut requests = Vec::with_capacity(f.requests.len());
    for r in f.requests {
        let mut candidates = r.candidates.iter().map(|&h| one_based("server", h)).collect::<Result<Vec<_>>>()?;
        candidates.sort_unstable();
        requests.push(Request {
            content: one_based("content", r.content)?,
            origin: one_based("slot", r.origin)?,
            deadline: one_based("slot", r.deadline)?,
            candidates,
        });
    }
    let mut edges = Vec::new();
    for [a, b] in f.topology.edges {
        edges.push((one_based("server", a)?, one_based("server", b)?));
    }
    let mut triples = Vec::new();
    for [a, b, c] in f.topology.triples {
        triples.push([one_based("server", a)?, one_based("server", b)?, one_based("server", c)?]);
    }

    Ok(Instance {
        servers: f
            .servers
            .into_iter()
            .map(|s| ServerSpec { cache_capacity: s.cache_capacity, backhaul_capacity: s.backhaul_capacity })
            .collect(),
        contents: f.contents.into_iter().map(|c| ContentSpec { size: c.size }).collect(),
        requests,
        horizon: f.horizon,
        cost: CostParams { alpha: f.cost.alpha, beta: f.cost.beta, aoi: f.cost.aoi },
        topology: Topology { edges, triples },
    })
}

pub fn write_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(&to_file(inst)).expect("instance serializes")
}

/// Parses and validates an instance document.
pub fn read_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| McspError::Schema(e.to_string()))?;
    let inst = from_file(file)?;
    let violations = validate_instance(&inst);
    if !violations.is_empty() {
        let joined: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(McspError::InvalidInstance(joined.join("; ")));
    }
    Ok(inst)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_instance(inst)).map_err(|e| McspError::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| McspError::io(path, e))?;
    read_instance(&text)
}
