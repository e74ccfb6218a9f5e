//! Superclass label spaces: taxonomy groupings, random size-isomorphic
//! controls and projection of prediction logs.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::metrics::{PredictionLog, Record};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Superclass {
    pub name: String,
    /// Sorted class indices.
    pub members: Vec<usize>,
}

/// A partition of the classes `0..C` into non-empty superclasses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    name: String,
    superclasses: Vec<Superclass>,
    class_count: usize,
}

/// Class index -> superclass index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    table: Vec<usize>,
    superclass_count: usize,
}

impl LabelSpace {
    /// Validates that `superclasses` partition `0..class_count`.
    pub fn new(
        name: impl Into<String>,
        class_count: usize,
        superclasses: Vec<Superclass>,
    ) -> Result<Self> {
        let mut owner = vec![None; class_count];
        let mut superclasses = superclasses;
        for (si, sc) in superclasses.iter_mut().enumerate() {
            if sc.members.is_empty() {
                return Err(Error::LabelSpace(format!("superclass `{}` is empty", sc.name)));
            }
            sc.members.sort_unstable();
            for &c in &sc.members {
                let slot = owner.get_mut(c).ok_or(Error::LabelOutOfRange {
                    label: c,
                    count: class_count,
                })?;
                if let Some(prev) = slot.replace(si) {
                    return Err(Error::LabelSpace(format!(
                        "class {c} belongs to superclasses {prev} and {si}"
                    )));
                }
            }
        }
        if let Some(c) = owner.iter().position(Option::is_none) {
            return Err(Error::LabelSpace(format!("class {c} is not covered")));
        }
        Ok(LabelSpace {
            name: name.into(),
            superclasses,
            class_count,
        })
    }

    /// One singleton superclass per class.
    pub fn hyponym(class_count: usize) -> Self {
        let superclasses = (0..class_count)
            .map(|c| Superclass {
                name: c.to_string(),
                members: vec![c],
            })
            .collect();
        LabelSpace {
            name: "hyponym".into(),
            superclasses,
            class_count,
        }
    }

    /// Rebuilds a label space from a mapping table; superclass `s` is named
    /// by its index.
    pub fn from_mapping(name: impl Into<String>, mapping: &LabelMapping) -> Result<Self> {
        let mut members = vec![Vec::new(); mapping.superclass_count];
        for (c, &s) in mapping.table.iter().enumerate() {
            members[s].push(c);
        }
        let superclasses = members
            .into_iter()
            .enumerate()
            .map(|(s, members)| Superclass {
                name: s.to_string(),
                members,
            })
            .collect();
        LabelSpace::new(name, mapping.table.len(), superclasses)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.superclasses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superclasses.is_empty()
    }

    pub fn superclasses(&self) -> &[Superclass] {
        &self.superclasses
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.superclasses.iter().map(|s| s.members.len()).collect()
    }

    pub fn mapping(&self) -> LabelMapping {
        let mut table = vec![0; self.class_count];
        for (si, sc) in self.superclasses.iter().enumerate() {
            for &c in &sc.members {
                table[c] = si;
            }
        }
        LabelMapping {
            table,
            superclass_count: self.superclasses.len(),
        }
    }
}

impl LabelMapping {
    pub fn new(table: Vec<usize>, superclass_count: usize) -> Result<Self> {
        if let Some(&s) = table.iter().find(|&&s| s >= superclass_count) {
            return Err(Error::LabelOutOfRange {
                label: s,
                count: superclass_count,
            });
        }
        Ok(LabelMapping {
            table,
            superclass_count,
        })
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn class_count(&self) -> usize {
        self.table.len()
    }

    pub fn superclass_count(&self) -> usize {
        self.superclass_count
    }

    pub fn get(&self, class: usize) -> Result<usize> {
        self.table.get(class).copied().ok_or(Error::LabelOutOfRange {
            label: class,
            count: self.table.len(),
        })
    }
}

/// A named set of hierarchy nodes; classes under any of them join the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub nodes: Vec<String>,
}

/// Parses `superclass_name<TAB>node[,node...]` lines.
pub fn parse_grouping(text: &str) -> Result<Vec<Group>> {
    let mut groups = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, nodes) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `name<TAB>node[,node...]`".into(),
        })?;
        let nodes: Vec<String> = nodes
            .split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(String::from)
            .collect();
        if name.is_empty() || nodes.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "group needs a name and at least one node".into(),
            });
        }
        groups.push(Group {
            name: name.to_string(),
            nodes,
        });
    }
    Ok(groups)
}

/// Assigns each class to the group holding its nearest listed ancestor
/// (the leaf itself counts). Superclasses keep the order of `groups`.
pub fn build_labelspace(
    h: &Hierarchy,
    name: impl Into<String>,
    groups: &[Group],
) -> Result<(LabelSpace, LabelMapping)> {
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    for (gi, g) in groups.iter().enumerate() {
        for node in &g.nodes {
            if !h.contains(node) {
                return Err(Error::UnknownNode(node.clone()));
            }
            if let Some(prev) = group_of.insert(node.as_str(), gi) {
                if prev != gi {
                    return Err(Error::LabelSpace(format!(
                        "node `{node}` listed in groups `{}` and `{}`",
                        groups[prev].name, g.name
                    )));
                }
            }
        }
    }
    let targets: HashSet<&str> = group_of.keys().copied().collect();
    let mut members = vec![Vec::new(); groups.len()];
    for c in 0..h.class_count() {
        let hit = h.hypernym_of(c, &targets).map_err(|e| match e {
            Error::NoMatchingAncestor(c) => {
                Error::LabelSpace(format!("class {c} matches no group"))
            }
            other => other,
        })?;
        members[group_of[hit]].push(c);
    }
    let superclasses = groups
        .iter()
        .zip(members)
        .map(|(g, members)| Superclass {
            name: g.name.clone(),
            members,
        })
        .collect();
    let space = LabelSpace::new(name, h.class_count(), superclasses)?;
    let mapping = space.mapping();
    Ok((space, mapping))
}

/// Uniform random partition with the same superclass sizes as `s`:
/// shuffle `0..C` with a seeded generator and cut it by the sizes of `s`.
pub fn random_isomorphic(s: &LabelSpace, seed: u64) -> (LabelSpace, LabelMapping) {
    let mut classes: Vec<usize> = (0..s.class_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    classes.shuffle(&mut rng);
    let mut rest = classes.as_slice();
    let superclasses = s
        .superclasses
        .iter()
        .enumerate()
        .map(|(i, sc)| {
            let (take, tail) = rest.split_at(sc.members.len());
            rest = tail;
            let mut members = take.to_vec();
            members.sort_unstable();
            Superclass {
                name: format!("random{i}"),
                members,
            }
        })
        .collect();
    let space = LabelSpace {
        name: format!("{}-random", s.name),
        superclasses,
        class_count: s.class_count,
    };
    let mapping = space.mapping();
    (space, mapping)
}

/// Replaces every true and predicted label by its superclass.
pub fn project_log(log: &PredictionLog, m: &LabelMapping) -> Result<PredictionLog> {
    if log.label_count() != m.class_count() {
        return Err(Error::LabelSpace(format!(
            "log has {} labels, mapping covers {}",
            log.label_count(),
            m.class_count()
        )));
    }
    let records = log
        .records()
        .iter()
        .map(|r| {
            Ok(Record {
                epoch: r.epoch,
                example_id: r.example_id.clone(),
                true_label: m.get(r.true_label)?,
                pred_label: m.get(r.pred_label)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionLog::new(records, m.superclass_count())
}

/// Parses a `class_index<TAB>superclass_index` dump.
pub fn parse_mapping(text: &str) -> Result<LabelMapping> {
    let mut slots: Vec<Option<usize>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: &str| Error::Parse {
            line: i + 1,
            message: message.into(),
        };
        let (c, s) = line.split_once('\t').ok_or_else(|| bad("expected two tab-separated fields"))?;
        let c: usize = c.trim().parse().map_err(|_| bad("invalid class index"))?;
        let s: usize = s.trim().parse().map_err(|_| bad("invalid superclass index"))?;
        if c >= slots.len() {
            slots.resize(c + 1, None);
        }
        if slots[c].replace(s).is_some() {
            return Err(bad("duplicate class index"));
        }
    }
    let table = slots
        .into_iter()
        .enumerate()
        .map(|(c, s)| s.ok_or_else(|| Error::ClassIndex(format!("missing class {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let count = table.iter().max().map_or(0, |m| m + 1);
    LabelMapping::new(table, count)
}

pub fn format_mapping(m: &LabelMapping) -> String {
    let mut out = String::new();
    for (c, s) in m.table.iter().enumerate() {
        out.push_str(&format!("{c}\t{s}\n"));
    }
    out
}
