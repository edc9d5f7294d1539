//! Instance masks and their stratification into occlusion levels.
//!
//! Level 1 holds the instances nobody occludes; every other instance sits one
//! level below its deepest occluder. Level 0 is reserved for the background,
//! which never raises an instance's level.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{check_dims, Error, Result};
use crate::raster::{DepthMap, IdMap, Mask};

/// One object instance in a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub id: u32,
    pub class_label: String,
    pub amodal: Mask,
    pub visible: Mask,
    /// Mean depth over the amodal mask, when known (meters).
    pub mean_depth: Option<f64>,
}

/// Instances of one frame with shared dimensions, unique nonzero ids,
/// `visible ⊆ amodal` and pairwise disjoint visible masks.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaskSet {
    width: usize,
    height: usize,
    instances: Vec<InstanceMask>,
}

impl InstanceMaskSet {
    pub fn new(width: usize, height: usize, mut instances: Vec<InstanceMask>) -> Result<Self> {
        instances.sort_by_key(|i| i.id);
        let mut claimed = Mask::empty(width, height);
        for (k, inst) in instances.iter().enumerate() {
            if inst.id == 0 {
                return Err(Error::Parameter("instance id 0 is reserved for background".into()));
            }
            if k > 0 && instances[k - 1].id == inst.id {
                return Err(Error::Parameter(format!("duplicate instance id {}", inst.id)));
            }
            check_dims((width, height), inst.amodal.dims())?;
            check_dims((width, height), inst.visible.dims())?;
            if !inst.visible.is_subset_of(&inst.amodal) {
                return Err(Error::Parameter(format!(
                    "instance {}: visible mask is not inside the amodal mask",
                    inst.id
                )));
            }
            if claimed.intersection_count(&inst.visible)? > 0 {
                return Err(Error::Parameter(format!(
                    "instance {}: visible mask overlaps another instance",
                    inst.id
                )));
            }
            claimed.union_with(&inst.visible)?;
        }
        Ok(InstanceMaskSet {
            width,
            height,
            instances,
        })
    }

    /// Builds instances from a visible id map plus per-instance amodal masks.
    ///
    /// Instances that appear only in the id map get `amodal = visible`.
    pub fn from_id_map(ids: &IdMap, amodal: &[(u32, Mask)]) -> Result<Self> {
        let (w, h) = ids.dims();
        let mut by_id: BTreeMap<u32, (Mask, Option<Mask>)> = BTreeMap::new();
        for (i, &id) in ids.data().iter().enumerate() {
            if id != 0 {
                by_id
                    .entry(id)
                    .or_insert_with(|| (Mask::empty(w, h), None))
                    .0
                    .set(i % w, i / w, true);
            }
        }
        for (id, mask) in amodal {
            check_dims((w, h), mask.dims())?;
            by_id.entry(*id).or_insert_with(|| (Mask::empty(w, h), None)).1 = Some(mask.clone());
        }
        let instances = by_id
            .into_iter()
            .map(|(id, (visible, amodal))| {
                let mut amodal = amodal.unwrap_or_else(|| visible.clone());
                // tolerate amodal masks that miss a few visible pixels
                amodal.union_with(&visible)?;
                Ok(InstanceMask {
                    id,
                    class_label: String::new(),
                    amodal,
                    visible,
                    mean_depth: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        InstanceMaskSet::new(w, h, instances)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Instances sorted by ascending id.
    pub fn instances(&self) -> &[InstanceMask] {
        &self.instances
    }

    pub fn get(&self, id: u32) -> Option<&InstanceMask> {
        self.instances
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|k| &self.instances[k])
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Visible-winner raster: instance id per pixel, 0 where background shows.
    pub fn visible_id_map(&self) -> IdMap {
        let mut ids = IdMap::filled(self.width, self.height, 0);
        for inst in &self.instances {
            for (x, y) in inst.visible.pixels() {
                ids.set(x, y, inst.id);
            }
        }
        ids
    }
}

/// "`front` occludes `behind` on `pixels` pixels."
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairwiseOcclusion {
    pub front: u32,
    pub behind: u32,
    pub pixels: u64,
}

/// Evidence used to decide who is in front where amodal masks overlap.
#[derive(Debug, Clone, Copy)]
pub enum OcclusionEvidence<'a> {
    /// Per-instance amodal depth rasters, in the set's (ascending id) order.
    /// Equal depths create no edge.
    Depth(&'a [DepthMap]),
    /// Visible-winner raster: at a shared amodal pixel the winner is in front.
    Winner(&'a IdMap),
    /// Explicit pairwise relations.
    Pairs(&'a [PairwiseOcclusion]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CyclePolicy {
    /// Drop the weakest edge of each cycle until the graph is acyclic.
    #[default]
    BreakWeakest,
    /// Fail on the first cycle.
    Reject,
}

/// Directed "occludes" relation between instances and the resulting levels.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionGraph {
    nodes: Vec<u32>,
    edges: BTreeMap<(u32, u32), u64>,
    removed: Vec<PairwiseOcclusion>,
    levels: BTreeMap<u32, usize>,
}

impl OcclusionGraph {
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    /// Surviving edges as `(front, behind, pixels)`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = PairwiseOcclusion> + '_ {
        self.edges
            .iter()
            .map(|(&(front, behind), &pixels)| PairwiseOcclusion {
                front,
                behind,
                pixels,
            })
    }

    /// Edges dropped while breaking cycles.
    pub fn removed_edges(&self) -> &[PairwiseOcclusion] {
        &self.removed
    }

    pub fn has_edge(&self, front: u32, behind: u32) -> bool {
        self.edges.contains_key(&(front, behind))
    }

    pub fn level(&self, id: u32) -> Option<usize> {
        self.levels.get(&id).copied()
    }

    pub fn levels(&self) -> &BTreeMap<u32, usize> {
        &self.levels
    }

    /// Level count including the background level 0.
    pub fn num_levels(&self) -> usize {
        1 + self.levels.values().copied().max().unwrap_or(0)
    }

    /// Instance ids at `level`, ascending.
    pub fn members(&self, level: usize) -> Vec<u32> {
        self.levels
            .iter()
            .filter(|(_, &l)| l == level)
            .map(|(&id, _)| id)
            .collect()
    }
}

pub fn stratify(
    instances: &InstanceMaskSet,
    evidence: OcclusionEvidence<'_>,
) -> Result<OcclusionGraph> {
    stratify_with(instances, evidence, CyclePolicy::default())
}

pub fn stratify_with(
    instances: &InstanceMaskSet,
    evidence: OcclusionEvidence<'_>,
    policy: CyclePolicy,
) -> Result<OcclusionGraph> {
    let nodes: Vec<u32> = instances.instances().iter().map(|i| i.id).collect();
    let edges = occlusion_edges(instances, evidence)?;
    let depth: BTreeMap<u32, f64> = instances
        .instances()
        .iter()
        .filter_map(|i| i.mean_depth.map(|d| (i.id, d)))
        .collect();
    let (edges, removed) = break_cycles(&nodes, edges, &depth, policy)?;
    let levels = longest_path_levels(&nodes, &edges);
    Ok(OcclusionGraph {
        nodes,
        edges,
        removed,
        levels,
    })
}

fn occlusion_edges(
    set: &InstanceMaskSet,
    evidence: OcclusionEvidence<'_>,
) -> Result<BTreeMap<(u32, u32), u64>> {
    let insts = set.instances();
    let mut edges = BTreeMap::new();
    match evidence {
        OcclusionEvidence::Pairs(pairs) => {
            for p in pairs {
                if set.get(p.front).is_none() || set.get(p.behind).is_none() {
                    return Err(Error::Parameter(format!(
                        "occlusion relation {} -> {} names an unknown instance",
                        p.front, p.behind
                    )));
                }
                if p.front != p.behind && p.pixels > 0 {
                    *edges.entry((p.front, p.behind)).or_insert(0) += p.pixels;
                }
            }
        }
        OcclusionEvidence::Depth(depths) => {
            if depths.len() != insts.len() {
                return Err(Error::Parameter(format!(
                    "{} depth rasters for {} instances",
                    depths.len(),
                    insts.len()
                )));
            }
            for d in depths {
                check_dims(set.dims(), d.dims())?;
            }
            let mut covering = Vec::with_capacity(insts.len());
            for p in 0..set.width * set.height {
                covering.clear();
                covering.extend((0..insts.len()).filter(|&k| insts[k].amodal.bits()[p]));
                for (a_pos, &a) in covering.iter().enumerate() {
                    for &b in &covering[a_pos + 1..] {
                        let (da, db) = (depths[a].data()[p], depths[b].data()[p]);
                        if !(da.is_finite() && db.is_finite()) {
                            continue;
                        }
                        if da < db {
                            *edges.entry((insts[a].id, insts[b].id)).or_insert(0) += 1;
                        } else if db < da {
                            *edges.entry((insts[b].id, insts[a].id)).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        OcclusionEvidence::Winner(winner) => {
            check_dims(set.dims(), winner.dims())?;
            for (p, &w) in winner.data().iter().enumerate() {
                if w == 0 || !set.get(w).is_some_and(|i| i.amodal.bits()[p]) {
                    continue;
                }
                for inst in insts {
                    if inst.id != w && inst.amodal.bits()[p] {
                        *edges.entry((w, inst.id)).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    Ok(edges)
}

type EdgeMap = BTreeMap<(u32, u32), u64>;

fn break_cycles(
    nodes: &[u32],
    mut edges: EdgeMap,
    depth: &BTreeMap<u32, f64>,
    policy: CyclePolicy,
) -> Result<(EdgeMap, Vec<PairwiseOcclusion>)> {
    let mut removed = Vec::new();
    while let Some(cycle) = find_cycle(nodes, &edges) {
        if policy == CyclePolicy::Reject {
            return Err(Error::Stratify { cycle });
        }
        let cycle_edges: Vec<(u32, u32)> = (0..cycle.len())
            .map(|k| (cycle[k], cycle[(k + 1) % cycle.len()]))
            .collect();
        // Weakest edge first; on equal pixel counts drop the edge whose front
        // is deepest relative to what it supposedly occludes.
        let depth_gap = |(f, b): (u32, u32)| match (depth.get(&f), depth.get(&b)) {
            (Some(df), Some(db)) => df - db,
            _ => 0.0,
        };
        let weakest = *cycle_edges
            .iter()
            .min_by(|&&e1, &&e2| {
                edges[&e1]
                    .cmp(&edges[&e2])
                    .then(depth_gap(e2).total_cmp(&depth_gap(e1)))
                    .then(e1.cmp(&e2))
            })
            .expect("a cycle has at least one edge");
        let pixels = edges.remove(&weakest).expect("edge exists");
        removed.push(PairwiseOcclusion {
            front: weakest.0,
            behind: weakest.1,
            pixels,
        });
    }
    Ok((edges, removed))
}

/// Returns the nodes of one directed cycle, if any, in edge order.
fn find_cycle(nodes: &[u32], edges: &EdgeMap) -> Option<Vec<u32>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut adj: BTreeMap<u32, Vec<u32>> = nodes.iter().map(|&n| (n, Vec::new())).collect();
    for &(a, b) in edges.keys() {
        adj.entry(a).or_default().push(b);
    }
    let mut mark: BTreeMap<u32, Mark> = adj.keys().map(|&n| (n, Mark::New)).collect();
    let roots: Vec<u32> = adj.keys().copied().collect();
    for root in roots {
        if mark[&root] != Mark::New {
            continue;
        }
        // iterative DFS keeping the active path
        let mut path: Vec<(u32, usize)> = vec![(root, 0)];
        mark.insert(root, Mark::Active);
        while let Some(top) = path.last_mut() {
            let node = top.0;
            let next = top.1;
            top.1 += 1;
            if let Some(&child) = adj[&node].get(next) {
                match mark[&child] {
                    Mark::New => {
                        mark.insert(child, Mark::Active);
                        path.push((child, 0));
                    }
                    Mark::Active => {
                        let start = path.iter().position(|&(n, _)| n == child).unwrap();
                        return Some(path[start..].iter().map(|&(n, _)| n).collect());
                    }
                    Mark::Done => {}
                }
            } else {
                mark.insert(node, Mark::Done);
                path.pop();
            }
        }
    }
    None
}

fn longest_path_levels(nodes: &[u32], edges: &EdgeMap) -> BTreeMap<u32, usize> {
    let mut indegree: BTreeMap<u32, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    let mut succ: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(a, b) in edges.keys() {
        *indegree.entry(b).or_insert(0) += 1;
        succ.entry(a).or_default().push(b);
    }
    let mut level: BTreeMap<u32, usize> = indegree.keys().map(|&n| (n, 1)).collect();
    let mut ready: BTreeSet<u32> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    while let Some(n) = ready.pop_first() {
        for &s in succ.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            let candidate = level[&n] + 1;
            let l = level.get_mut(&s).unwrap();
            *l = (*l).max(candidate);
            let d = indegree.get_mut(&s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    level
}
