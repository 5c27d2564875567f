//! JSON tree-description files.
//!
//! ```json
//! {"name": "root", "kind": "Sequence", "params": {}, "children": [
//!   {"name": "Grasp", "kind": "Action"}
//! ]}
//! ```

use super::node::{BtNode, DecoratorPolicy, NodeKind};
use serde_json::{json, Map, Value as Json};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_tree(document: &str) -> Result<BtNode, ParseError> {
    let json: Json = serde_json::from_str(document).map_err(|e| ParseError {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut parser = Parser {
        src: document,
        seen: HashMap::new(),
    };
    let root = parser.node(&json, "root")?;
    Ok(root)
}

struct Parser<'a> {
    src: &'a str,
    seen: HashMap<String, usize>,
}

impl Parser<'_> {
    fn node(&mut self, json: &Json, where_: &str) -> Result<BtNode, ParseError> {
        let obj = json.as_object().ok_or_else(|| ParseError {
            line: 1,
            message: format!("{where_}: expected a node object"),
        })?;
        let name = obj
            .get("name")
            .and_then(Json::as_str)
            .ok_or_else(|| ParseError {
                line: 1,
                message: format!("{where_}: missing string field `name`"),
            })?
            .to_string();
        let occurrence = self.seen.entry(name.clone()).or_insert(0);
        *occurrence += 1;
        let line = line_of_name(self.src, &name, *occurrence);
        let err = |message: String| ParseError { line, message };
        if *occurrence > 1 {
            return Err(err(format!("duplicate node name `{name}`")));
        }

        let kind_str = obj
            .get("kind")
            .and_then(Json::as_str)
            .ok_or_else(|| err(format!("node `{name}`: missing string field `kind`")))?;
        let empty = Map::new();
        let params = match obj.get("params") {
            None | Some(Json::Null) => &empty,
            Some(Json::Object(m)) => m,
            Some(_) => return Err(err(format!("node `{name}`: `params` must be an object"))),
        };
        let int_param = |key: &str| -> Result<Option<u64>, ParseError> {
            match params.get(key) {
                None => Ok(None),
                Some(v) => v
                    .as_u64()
                    .map(Some)
                    .ok_or_else(|| err(format!("node `{name}`: param `{key}` must be a non-negative integer"))),
            }
        };
        let str_list = |key: &str| -> Result<Vec<String>, ParseError> {
            match params.get(key) {
                None => Ok(Vec::new()),
                Some(Json::Array(items)) => items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| err(format!("node `{name}`: `{key}` must hold strings")))
                    })
                    .collect(),
                Some(_) => Err(err(format!("node `{name}`: `{key}` must be a list"))),
            }
        };
        let str_param = |key: &str| params.get(key).and_then(Json::as_str).map(str::to_string);

        let kind = match kind_str {
            "Sequence" => NodeKind::Sequence,
            "Fallback" => NodeKind::Fallback,
            "Parallel" => {
                let m = int_param("M")?
                    .ok_or_else(|| err(format!("node `{name}`: Parallel requires param `M`")))?;
                NodeKind::Parallel {
                    success_threshold: m as usize,
                }
            }
            "Decorator" => {
                let policy = match str_param("policy").as_deref() {
                    Some("RetryUntilSuccessful") => DecoratorPolicy::RetryUntilSuccessful {
                        max_attempts: int_param("max_attempts")?.unwrap_or(0) as u32,
                    },
                    Some("Inverter") => DecoratorPolicy::Inverter,
                    Some(other) => {
                        return Err(err(format!("node `{name}`: unknown decorator policy `{other}`")))
                    }
                    None => return Err(err(format!("node `{name}`: Decorator requires param `policy`"))),
                };
                NodeKind::Decorator(policy)
            }
            "Action" => NodeKind::Action(str_param("id").unwrap_or_else(|| name.clone())),
            "Condition" => NodeKind::Condition(str_param("id").unwrap_or_else(|| name.clone())),
            "CANode" => NodeKind::CaNode {
                atomic: str_param("atomic").unwrap_or_else(|| name.clone()),
            },
            "CSNode" => NodeKind::CsNode {
                logistic: str_list("logistic")?,
                samplers: str_list("samplers")?,
            },
            other => return Err(err(format!("node `{name}`: unknown node kind `{other}`"))),
        };

        let children_json = match obj.get("children") {
            None | Some(Json::Null) => Vec::new(),
            Some(Json::Array(items)) => items.clone(),
            Some(_) => return Err(err(format!("node `{name}`: `children` must be a list"))),
        };
        let mut children = Vec::with_capacity(children_json.len());
        for (i, c) in children_json.iter().enumerate() {
            children.push(self.node(c, &format!("{name}.children[{i}]"))?);
        }
        let node = BtNode::new(name, kind, children);
        node.check_arity().map_err(|e| err(e.to_string()))?;
        Ok(node)
    }
}

/// Line (1-based) of the `n`-th `"name": "<name>"` declaration.
fn line_of_name(src: &str, name: &str, n: usize) -> usize {
    let needle = format!("\"{name}\"");
    let mut found = 0;
    let mut from = 0;
    while let Some(off) = src[from..].find(&needle) {
        let at = from + off;
        let before = src[..at].trim_end();
        if let Some(rest) = before.strip_suffix(':') {
            if rest.trim_end().ends_with("\"name\"") {
                found += 1;
                if found == n {
                    return src[..at].matches('\n').count() + 1;
                }
            }
        }
        from = at + needle.len();
    }
    1
}

/// Serializes a tree back into the file format.
pub fn tree_to_json(node: &BtNode) -> Json {
    let params = match &node.kind {
        NodeKind::Parallel { success_threshold } => json!({ "M": success_threshold }),
        NodeKind::Decorator(DecoratorPolicy::Inverter) => json!({ "policy": "Inverter" }),
        NodeKind::Decorator(DecoratorPolicy::RetryUntilSuccessful { max_attempts }) => {
            json!({ "policy": "RetryUntilSuccessful", "max_attempts": max_attempts })
        }
        NodeKind::Action(id) | NodeKind::Condition(id) => json!({ "id": id }),
        NodeKind::CaNode { atomic } => json!({ "atomic": atomic }),
        NodeKind::CsNode { logistic, samplers } => {
            json!({ "logistic": logistic, "samplers": samplers })
        }
        NodeKind::Sequence | NodeKind::Fallback => json!({}),
    };
    json!({
        "name": node.name,
        "kind": node.kind.label(),
        "params": params,
        "children": node.children.iter().map(tree_to_json).collect::<Vec<_>>(),
    })
}
