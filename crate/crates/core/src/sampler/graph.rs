//! Bipartite constraint/unknown graph over the still-unassigned unknowns.

use std::collections::BTreeSet;

use crate::model::{Constraint, Model};

/// A connected group of constraints linked through shared unassigned unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub constraints: Vec<usize>,
    pub unknowns: Vec<usize>,
}

impl Component {
    /// Constraints minus unknowns: larger means more tightly constrained.
    pub fn excess(&self) -> i64 {
        self.constraints.len() as i64 - self.unknowns.len() as i64
    }
}

#[derive(Clone, Debug)]
pub struct DependencyGraph {
    /// Unassigned unknowns of each constraint (indexed like the constraint list).
    pub edges: Vec<Vec<usize>>,
    /// Constraints taking part (a subset of the list).
    pub active: Vec<usize>,
    n_unknowns: usize,
}

impl DependencyGraph {
    pub fn build(vars_of: &[Vec<usize>], active: &[usize], assigned: &[bool]) -> DependencyGraph {
        let edges = vars_of
            .iter()
            .map(|vs| vs.iter().copied().filter(|&v| !assigned[v]).collect())
            .collect();
        DependencyGraph {
            edges,
            active: active.to_vec(),
            n_unknowns: assigned.len(),
        }
    }

    /// Active constraints with every unknown assigned.
    pub fn checkable(&self) -> Vec<usize> {
        self.active.iter().copied().filter(|&k| self.edges[k].is_empty()).collect()
    }

    /// Connected components over active constraints that still have an
    /// unassigned unknown, ordered by their first constraint.
    pub fn components(&self) -> Vec<Component> {
        self.components_without(None)
    }

    fn components_without(&self, removed: Option<usize>) -> Vec<Component> {
        let mut parent: Vec<usize> = (0..self.n_unknowns).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let keep = |v: &usize| Some(*v) != removed;
        for &k in &self.active {
            let mut vs = self.edges[k].iter().filter(|v| keep(v));
            if let Some(&first) = vs.next() {
                for &v in vs {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                    if a != b {
                        parent[b] = a;
                    }
                }
            }
        }
        let mut comps: Vec<(usize, Component)> = Vec::new();
        for &k in &self.active {
            let Some(&v) = self.edges[k].iter().find(|v| keep(v)) else { continue };
            let root = find(&mut parent, v);
            match comps.iter_mut().find(|(r, _)| *r == root) {
                Some((_, c)) => c.constraints.push(k),
                None => comps.push((
                    root,
                    Component {
                        constraints: vec![k],
                        unknowns: vec![],
                    },
                )),
            }
        }
        for (_, c) in &mut comps {
            let us: BTreeSet<usize> = c
                .constraints
                .iter()
                .flat_map(|&k| self.edges[k].iter().copied())
                .filter(|v| keep(v))
                .collect();
            c.unknowns = us.into_iter().collect();
        }
        comps.into_iter().map(|(_, c)| c).collect()
    }

    /// Number of components left after assigning `u`: how strongly the
    /// unknown holds otherwise independent parts together.
    pub fn articulation_score(&self, u: usize) -> usize {
        self.components_without(Some(u)).len()
    }
}

/// Dependency graph of a model's constraints given the set of assigned unknown names.
pub fn dependency_graph(model: &Model, assigned: &BTreeSet<String>) -> DependencyGraph {
    graph_of(model.constraints(), model.unknown_names(), assigned)
}

pub fn graph_of(cs: &[Constraint], names: &[String], assigned: &BTreeSet<String>) -> DependencyGraph {
    let vars_of: Vec<Vec<usize>> = cs.iter().map(Constraint::unknowns).collect();
    let mask: Vec<bool> = names.iter().map(|n| assigned.contains(n)).collect();
    let active: Vec<usize> = (0..cs.len()).collect();
    DependencyGraph::build(&vars_of, &active, &mask)
}
