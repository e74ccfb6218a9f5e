//! Taxonomy graphs: parsing, validation and path queries.
//!
//! A [`Hierarchy`] is a DAG of named nodes with a subset of its leaves bound
//! to contiguous class indices. Distances are hop counts on the undirected
//! graph; hypernym lookup and depth-first ordering require a tree.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Hierarchy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    /// class index -> node index
    classes: Vec<usize>,
    is_tree: bool,
}

impl Hierarchy {
    /// Builds a hierarchy from parent/child pairs and the class table.
    ///
    /// Node order (and therefore child visiting order) follows first
    /// appearance in `edges`. Repeated edges are collapsed.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)], classes: &[S]) -> Result<Self> {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };

        let mut pairs = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let p = intern(p.as_ref(), &mut names);
            let c = intern(c.as_ref(), &mut names);
            pairs.push((p, c));
        }
        // Class nodes that never appear in an edge are isolated leaves.
        for c in classes {
            intern(c.as_ref(), &mut names);
        }

        let n = names.len();
        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (p, c) in pairs {
            if seen.insert((p, c)) {
                children[p].push(c);
                parents[c].push(p);
            }
        }

        check_acyclic(&names, &children, &parents)?;

        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let mut class_nodes = Vec::with_capacity(classes.len());
        for (ci, c) in classes.iter().enumerate() {
            let node = index[c.as_ref()];
            if !children[node].is_empty() {
                return Err(Error::NonLeafClass {
                    class: ci,
                    node: c.as_ref().to_string(),
                });
            }
            class_nodes.push(node);
        }
        let mut bound = HashSet::new();
        for (ci, &node) in class_nodes.iter().enumerate() {
            if !bound.insert(node) {
                return Err(Error::ClassIndex(format!(
                    "node `{}` bound to more than one class (second at {ci})",
                    names[node]
                )));
            }
        }

        let is_tree = parents.iter().all(|p| p.len() <= 1);
        Ok(Hierarchy {
            names,
            index,
            children,
            parents,
            classes: class_nodes,
            is_tree,
        })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn is_tree(&self) -> bool {
        self.is_tree
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index.contains_key(node)
    }

    /// Node identifier bound to `class`.
    pub fn class_node(&self, class: usize) -> Option<&str> {
        self.classes.get(class).map(|&n| self.names[n].as_str())
    }

    pub fn parents_of(&self, node: &str) -> Option<Vec<&str>> {
        let i = *self.index.get(node)?;
        Some(self.parents[i].iter().map(|&p| self.names[p].as_str()).collect())
    }

    pub fn children_of(&self, node: &str) -> Option<Vec<&str>> {
        let i = *self.index.get(node)?;
        Some(self.children[i].iter().map(|&c| self.names[c].as_str()).collect())
    }

    fn require_tree(&self) -> Result<()> {
        if self.is_tree {
            return Ok(());
        }
        let node = self
            .parents
            .iter()
            .position(|p| p.len() > 1)
            .map(|i| self.names[i].clone())
            .unwrap_or_default();
        Err(Error::NotATree(node))
    }

    fn class_leaf(&self, class: usize) -> Result<usize> {
        self.classes
            .get(class)
            .copied()
            .ok_or(Error::LabelOutOfRange {
                label: class,
                count: self.classes.len(),
            })
    }

    /// Leaf-to-root node path for `class`, starting at the leaf itself.
    pub fn ancestry(&self, class: usize) -> Result<Vec<&str>> {
        self.require_tree()?;
        let mut node = self.class_leaf(class)?;
        let mut path = vec![self.names[node].as_str()];
        while let Some(&p) = self.parents[node].first() {
            path.push(self.names[p].as_str());
            node = p;
        }
        Ok(path)
    }

    /// First node on the leaf-to-root path of `class` that is in `targets`.
    pub fn hypernym_of<'a, S>(&'a self, class: usize, targets: &HashSet<S>) -> Result<&'a str>
    where
        S: std::borrow::Borrow<str> + std::hash::Hash + Eq,
    {
        self.require_tree()?;
        let mut node = self.class_leaf(class)?;
        loop {
            if targets.contains(self.names[node].as_str()) {
                return Ok(&self.names[node]);
            }
            match self.parents[node].first() {
                Some(&p) => node = p,
                None => return Err(Error::NoMatchingAncestor(class)),
            }
        }
    }

    /// Class indices in depth-first order, siblings in edge-file order.
    pub fn dfs_leaf_order(&self) -> Result<Vec<usize>> {
        self.require_tree()?;
        let class_of: HashMap<usize, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(c, &n)| (n, c))
            .collect();
        let mut order = Vec::with_capacity(self.classes.len());
        let mut stack = Vec::new();
        for root in (0..self.names.len()).filter(|&i| self.parents[i].is_empty()) {
            stack.push(root);
            while let Some(v) = stack.pop() {
                if let Some(&c) = class_of.get(&v) {
                    order.push(c);
                }
                stack.extend(self.children[v].iter().rev());
            }
        }
        Ok(order)
    }

    /// Unweighted shortest-path hop counts between the leaves of `classes`,
    /// with edges treated as undirected.
    pub fn graph_distance_matrix(&self, classes: &[usize]) -> Result<DistanceMatrix> {
        let n = classes.len();
        let leaves = classes
            .iter()
            .map(|&c| self.class_leaf(c))
            .collect::<Result<Vec<_>>>()?;
        let mut values = vec![0.0; n * n];
        for (i, &src) in leaves.iter().enumerate() {
            let hops = self.bfs(src);
            for (j, &dst) in leaves.iter().enumerate() {
                match hops[dst] {
                    Some(d) => values[i * n + j] = d as f64,
                    None => return Err(Error::Disconnected(classes[i], classes[j])),
                }
            }
        }
        Ok(DistanceMatrix {
            labels: classes.to_vec(),
            values,
        })
    }

    fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.names.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0) + 1;
            for &w in self.children[v].iter().chain(&self.parents[v]) {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

// Kahn's algorithm; any node left with positive in-degree sits on a cycle.
fn check_acyclic(names: &[String], children: &[Vec<usize>], parents: &[Vec<usize>]) -> Result<()> {
    let n = names.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop_front() {
        visited += 1;
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if visited == n {
        Ok(())
    } else {
        let culprit = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
        Err(Error::Cycle(names[culprit].clone()))
    }
}

/// Parses the edge file (`parent<TAB>child`) and class file
/// (`index<TAB>node`). Lines starting with `#` and blank lines are skipped.
pub fn parse_hierarchy(edge_text: &str, class_index_text: &str) -> Result<Hierarchy> {
    let mut edges = Vec::new();
    for (lineno, line) in content_lines(edge_text) {
        let (parent, child) = split_pair(line, lineno)?;
        edges.push((parent.to_string(), child.to_string()));
    }

    let mut slots: Vec<Option<String>> = Vec::new();
    for (lineno, line) in content_lines(class_index_text) {
        let (idx, node) = split_pair(line, lineno)?;
        let idx: usize = idx.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid class index `{idx}`"),
        })?;
        if idx >= slots.len() {
            slots.resize(idx + 1, None);
        }
        if slots[idx].is_some() {
            return Err(Error::ClassIndex(format!(
                "duplicate index {idx} at line {lineno}"
            )));
        }
        slots[idx] = Some(node.to_string());
    }
    let classes = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::ClassIndex(format!("missing index {i}"))))
        .collect::<Result<Vec<_>>>()?;
    if classes.is_empty() {
        return Err(Error::ClassIndex("no classes defined".into()));
    }

    let known: HashSet<&str> = edges
        .iter()
        .flat_map(|(p, c)| [p.as_str(), c.as_str()])
        .collect();
    if !edges.is_empty() {
        if let Some(missing) = classes.iter().find(|c| !known.contains(c.as_str())) {
            return Err(Error::UnknownNode(missing.clone()));
        }
    }
    Hierarchy::from_edges(&edges, &classes)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn split_pair(line: &str, lineno: usize) -> Result<(&str, &str)> {
    let mut fields = line.split('\t');
    match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        _ => Err(Error::Parse {
            line: lineno,
            message: "expected two non-empty tab-separated fields".into(),
        }),
    }
}

/// Square matrix of non-negative distances between labelled items.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<usize>,
    /// Row-major, `labels.len()` squared entries.
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and finiteness.
    pub fn new(labels: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "distance matrix needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!("bad distance {v} at ({i},{j})")));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(DistanceMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Relabels rows/columns: entry (i,j) of the result is entry
    /// (perm[i], perm[j]) of `self`, labels kept in place.
    pub fn permuted(&self, perm: &[usize]) -> DistanceMatrix {
        let n = self.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        DistanceMatrix {
            labels: self.labels.clone(),
            values,
        }
    }
}
