//! Append-only provenance graph: object nodes carry content hashes,
//! operation nodes carry the canonical parameters that produced an output
//! from its inputs. The node list is kept in topological order by
//! construction and re-validated on load.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Object,
    Operation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvNode {
    pub id: String,
    pub kind: NodeKind,
    /// object nodes: content hash of the object
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
    /// operation nodes: the executed operation and its parameters
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_hashes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    /// Recorded only when `SOURCE_DATE_EPOCH` is set, so identical runs
    /// produce byte-identical containers; excluded from all hashes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProvenanceGraph {
    pub nodes: Vec<ProvNode>,
}

fn timestamp() -> Option<String> {
    std::env::var("SOURCE_DATE_EPOCH").ok().map(|secs| format!("@{secs}"))
}

impl ProvenanceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn next_id(&self, kind: NodeKind) -> String {
        let count = self.nodes.iter().filter(|n| n.kind == kind).count();
        match kind {
            NodeKind::Object => format!("obj{count}"),
            NodeKind::Operation => format!("op{count}"),
        }
    }

    pub fn object_by_hash(&self, hash: &str) -> Option<&ProvNode> {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Object && n.hash.as_deref() == Some(hash))
    }

    pub fn node(&self, id: &str) -> Option<&ProvNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Object node for a hash, creating a source node when absent.
    /// Returns the node id.
    pub fn ensure_object(&mut self, hash: &str) -> String {
        if let Some(node) = self.object_by_hash(hash) {
            return node.id.clone();
        }
        let id = self.next_id(NodeKind::Object);
        self.nodes.push(ProvNode {
            id: id.clone(),
            kind: NodeKind::Object,
            hash: Some(hash.to_string()),
            op_name: None,
            params: BTreeMap::new(),
            input_ids: Vec::new(),
            output_id: None,
            input_hashes: Vec::new(),
            output_hash: None,
            tool_version: None,
            timestamp: None,
        });
        id
    }

    /// Append one executed operation and its output object. Inputs must
    /// already exist; the append keeps the graph acyclic by construction.
    pub fn record(
        &mut self,
        op_name: &str,
        params: BTreeMap<String, String>,
        input_ids: &[String],
        input_hashes: Vec<String>,
        output_hash: &str,
    ) -> Result<(String, String)> {
        if input_ids.is_empty() {
            return Err(Error::Provenance(format!(
                "operation `{op_name}` needs at least one input"
            )));
        }
        for id in input_ids {
            match self.node(id) {
                Some(node) if node.kind == NodeKind::Object => {}
                Some(_) => {
                    return Err(Error::Provenance(format!(
                        "input `{id}` of `{op_name}` is not an object node"
                    )))
                }
                None => {
                    return Err(Error::Provenance(format!(
                        "unknown input id `{id}` for `{op_name}`"
                    )))
                }
            }
        }
        let output_id = self.next_id(NodeKind::Object);
        self.nodes.push(ProvNode {
            id: output_id.clone(),
            kind: NodeKind::Object,
            hash: Some(output_hash.to_string()),
            op_name: None,
            params: BTreeMap::new(),
            input_ids: Vec::new(),
            output_id: None,
            input_hashes: Vec::new(),
            output_hash: None,
            tool_version: None,
            timestamp: None,
        });
        let op_id = self.next_id(NodeKind::Operation);
        self.nodes.push(ProvNode {
            id: op_id.clone(),
            kind: NodeKind::Operation,
            hash: None,
            op_name: Some(op_name.to_string()),
            params,
            input_ids: input_ids.to_vec(),
            output_id: Some(output_id.clone()),
            input_hashes,
            output_hash: Some(output_hash.to_string()),
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
            timestamp: timestamp(),
        });
        Ok((op_id, output_id))
    }

    /// Structural checks: unique ids, inputs precede their operation,
    /// every operation has >= 1 input and exactly one output. Because
    /// edges only point backward in the node list, a valid graph is
    /// acyclic.
    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if seen.insert(node.id.as_str(), idx).is_some() {
                return Err(Error::Provenance(format!("duplicate node id `{}`", node.id)));
            }
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.kind == NodeKind::Operation {
                if node.input_ids.is_empty() {
                    return Err(Error::Provenance(format!(
                        "operation `{}` has no inputs",
                        node.id
                    )));
                }
                let out = node.output_id.as_deref().ok_or_else(|| {
                    Error::Provenance(format!("operation `{}` has no output", node.id))
                })?;
                for input in &node.input_ids {
                    match seen.get(input.as_str()) {
                        Some(&pos) if pos < idx => {}
                        Some(_) => {
                            return Err(Error::Provenance(format!(
                                "operation `{}` references a later node `{input}` (cycle)",
                                node.id
                            )))
                        }
                        None => {
                            return Err(Error::Provenance(format!(
                                "operation `{}` references unknown node `{input}`",
                                node.id
                            )))
                        }
                    }
                }
                match seen.get(out) {
                    Some(&pos) if pos < idx => {}
                    _ => {
                        return Err(Error::Provenance(format!(
                            "operation `{}` output `{out}` must precede it",
                            node.id
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Operation nodes in execution order.
    pub fn operations(&self) -> Vec<&ProvNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Operation).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let graph: ProvenanceGraph = serde_json::from_str(text)?;
        graph.validate()?;
        Ok(graph)
    }
}
