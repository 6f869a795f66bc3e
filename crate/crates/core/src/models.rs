//! Model-uncertainty sets on the lattice.
//!
//! Two construction routes lead to one [`ModelPolytope`] over joint
//! path-probability vectors:
//!
//! 1. kernel route — finitely many atomic base models induce conditional
//!    kernels node by node ([`induce_kernels`]); [`lambda_modify`] injects a
//!    small mass on the extreme price moves wherever no model reaches them,
//!    which is what makes the discretized market arbitrage-free; the joint
//!    set is the convex hull of all products of per-node kernel choices
//!    ([`ModelPolytope::from_kernel_products`]);
//! 2. constraint route — joint linear constraints (per-path caps,
//!    aggregate-region bounds) give an H-representation directly
//!    ([`ModelPolytope::from_constraints`]).
//!
//! The support mask records which paths can carry positive probability at
//! all; everything downstream (martingale cone, tests, strategies) lives on
//! the supported paths.

use std::collections::HashMap;

use crate::error::EngineError;
use crate::lattice::PathLattice;
use crate::linprog::LinearProgram;
use crate::LpStatus;

/// Tolerance for the H-rep support test: a path is supported iff its
/// maximal probability over the polytope exceeds this.
const SUPPORT_TOL: f64 = 1e-9;
/// Sup-norm tolerance for deduplicating polytope vertices.
const VERTEX_DEDUP_TOL: f64 = 1e-12;
/// Default cap on enumerated kernel-product vertices.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

/// A finitely supported base model: continuum paths with weights.
#[derive(Debug, Clone)]
pub struct AtomicBaseModel {
    /// `(price path S_1..S_T, weight)`; weights nonnegative, summing to 1.
    pub atoms: Vec<(Vec<f64>, f64)>,
}

impl AtomicBaseModel {
    pub fn validate(&self, horizon: usize) -> Result<(), EngineError> {
        if self.atoms.is_empty() {
            return Err(EngineError::config("base model has no atoms"));
        }
        let mut total = 0.0;
        for (path, w) in &self.atoms {
            if path.len() != horizon {
                return Err(EngineError::config(format!(
                    "atom path length {} does not match horizon {}",
                    path.len(),
                    horizon
                )));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(EngineError::config("atom weights must be nonnegative"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(EngineError::config(format!(
                "atom weights sum to {}, expected 1",
                total
            )));
        }
        Ok(())
    }
}

/// Conditional kernels at one non-terminal node: one probability vector over
/// the next period's grid per (deduplicated) base model.
#[derive(Debug, Clone)]
pub struct NodeKernels {
    pub generators: Vec<Vec<f64>>,
    /// Every generator is the point mass at the unchanged price.
    pub degenerate: bool,
}

/// Kernels for every node of the lattice, `nodes[t][node]` for `t = 0..T-1`.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub nodes: Vec<Vec<NodeKernels>>,
    horizon: usize,
}

impl KernelSet {
    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Computes the conditional cell masses of each base model at each node.
///
/// A node whose cell carries zero mass under a model gets that model's
/// kernel as the point mass at the unchanged price, so prices freeze on
/// paths the model never reaches.
pub fn induce_kernels(
    lattice: &PathLattice,
    base_models: &[AtomicBaseModel],
) -> Result<KernelSet, EngineError> {
    if base_models.is_empty() {
        return Err(EngineError::config("at least one base model is required"));
    }
    let horizon = lattice.horizon();
    for m in base_models {
        m.validate(horizon)?;
    }
    let mut total_nodes = 0usize;
    for t in 0..horizon {
        total_nodes += lattice.num_nodes(t);
        if total_nodes > 2_000_000 {
            return Err(EngineError::resource("kernel node count exceeds 2e6"));
        }
    }

    // Per model: mass of each node at each time, by snapping atoms.
    // masses[t] maps a time-(t+1) node to its cell mass.
    let mut per_model: Vec<Vec<HashMap<usize, f64>>> = Vec::with_capacity(base_models.len());
    for m in base_models {
        let mut masses: Vec<HashMap<usize, f64>> = vec![HashMap::new(); horizon];
        for (path, w) in &m.atoms {
            let p = lattice.snap(path)?;
            let idx = lattice.path_grid_indices(p);
            let mut node = 0usize;
            for t in 0..horizon {
                node = node * lattice.grid_size(t + 1) + idx[t];
                *masses[t].entry(node).or_insert(0.0) += w;
            }
        }
        per_model.push(masses);
    }

    let mut nodes: Vec<Vec<NodeKernels>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let n_nodes = lattice.num_nodes(t);
        let succ = lattice.grid_size(t + 1);
        let mut layer = Vec::with_capacity(n_nodes);
        for node in 0..n_nodes {
            let ihat = same_price_index(lattice, t, node);
            let mut generators: Vec<Vec<f64>> = Vec::new();
            for masses in &per_model {
                let node_mass = if t == 0 {
                    1.0
                } else {
                    *masses[t - 1].get(&node).unwrap_or(&0.0)
                };
                let mut g = vec![0.0; succ];
                if node_mass > 0.0 {
                    for (i, slot) in g.iter_mut().enumerate() {
                        let child = node * succ + i;
                        let child_mass = *masses[t].get(&child).unwrap_or(&0.0);
                        if child_mass > 0.0 {
                            *slot = child_mass / node_mass;
                        }
                    }
                } else {
                    g[ihat] = 1.0;
                }
                if !generators.iter().any(|h| h == &g) {
                    generators.push(g);
                }
            }
            let degenerate = generators.len() == 1 && generators[0][ihat] == 1.0;
            layer.push(NodeKernels {
                generators,
                degenerate,
            });
        }
        nodes.push(layer);
    }
    Ok(KernelSet { nodes, horizon })
}

/// Grid index on the period-`t+1` grid of the node's own (period-`t`) price.
/// Strict bound widening keeps this strictly interior.
fn same_price_index(lattice: &PathLattice, t: usize, node: usize) -> usize {
    let num = if t == 0 {
        1i64 << lattice.level()
    } else {
        let idx = lattice.node_grid_indices(node, t);
        lattice.grid_numerator(t, idx[t - 1])
    };
    (num - lattice.grid_numerator(t + 1, 0)) as usize
}

/// Applies the four-case extreme-move modification jointly across the
/// generators of every node.
///
/// With `low`/`high` the extreme grid points of the next period:
/// (i) no generator charges `low` but some charges `high` — shift
/// `lambda/(1+lambda)` onto `low` and scale the rest by `1/(1+lambda)`;
/// (ii) the mirror image; (iii) neither extreme is charged but some
/// generator moves off the diagonal — put `(lambda/2)/(1+lambda)` on both
/// extremes; (iv) otherwise the node is left untouched.
pub fn lambda_modify(kernels: &KernelSet, lambda: f64) -> Result<KernelSet, EngineError> {
    if !(lambda > 0.0) {
        return Err(EngineError::config("lambda must be positive"));
    }
    let scale = 1.0 / (1.0 + lambda);
    let mut out = kernels.clone();
    for layer in &mut out.nodes {
        for nk in layer.iter_mut() {
            if nk.degenerate {
                continue;
            }
            let succ = nk.generators[0].len();
            let high = succ - 1;
            let all_zero_low = nk.generators.iter().all(|g| g[0] == 0.0);
            let all_zero_high = nk.generators.iter().all(|g| g[high] == 0.0);
            if all_zero_low && !all_zero_high {
                for g in &mut nk.generators {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                    g[0] = lambda * scale;
                }
            } else if all_zero_high && !all_zero_low {
                for g in &mut nk.generators {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                    g[high] = lambda * scale;
                }
            } else if all_zero_low && all_zero_high {
                // the node is not degenerate, so some generator moves off
                // the diagonal: case (iii)
                for g in &mut nk.generators {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                    g[0] = 0.5 * lambda * scale;
                    g[high] = 0.5 * lambda * scale;
                }
            }
            // case (iv): some generator charges both extremes; nothing to do
            let mut seen: Vec<Vec<f64>> = Vec::with_capacity(nk.generators.len());
            for g in nk.generators.drain(..) {
                if !seen.iter().any(|h| h == &g) {
                    seen.push(g);
                }
            }
            nk.generators = seen;
        }
    }
    Ok(out)
}

/// One aggregate-region row: total probability of `paths` compared to `bound`.
#[derive(Debug, Clone)]
pub struct RegionConstraint {
    pub paths: Vec<usize>,
    pub at_least: bool,
    pub bound: f64,
}

/// Joint linear constraints over the path-probability vector.
#[derive(Debug, Clone)]
pub struct JointConstraints {
    /// Per-path upper bounds (`f64::INFINITY` where absent).
    pub path_upper: Vec<f64>,
    /// Per-path lower bounds (0 where absent).
    pub path_lower: Vec<f64>,
    pub regions: Vec<RegionConstraint>,
}

impl JointConstraints {
    pub fn unconstrained(num_paths: usize) -> Self {
        JointConstraints {
            path_upper: vec![f64::INFINITY; num_paths],
            path_lower: vec![0.0; num_paths],
            regions: Vec::new(),
        }
    }
}

/// Paths whose period-`t` price lies in the interval; endpoint membership is
/// exact (numerator comparisons at scale `2^-(n+1)`).
pub fn paths_in_price_interval(
    lattice: &PathLattice,
    t: usize,
    lo: f64,
    lo_open: bool,
    hi: f64,
    hi_open: bool,
) -> Vec<usize> {
    let denom = f64::powi(2.0, lattice.level() as i32 + 1);
    let lo2 = lo * denom;
    let hi2 = hi * denom;
    (0..lattice.num_paths())
        .filter(|&p| {
            let g = (2 * lattice.grid_numerator(t, lattice.path_grid_indices(p)[t - 1])) as f64;
            let above = if lo_open { g > lo2 } else { g >= lo2 };
            let below = if hi_open { g < hi2 } else { g <= hi2 };
            above && below
        })
        .collect()
}

/// Representation of the uncertainty polytope.
#[derive(Debug, Clone)]
pub enum PolytopeRep {
    /// Explicit extreme points (full-length path-probability vectors).
    Vertices(Vec<Vec<f64>>),
    /// Linear constraints; the simplex conditions are implicit.
    HRep(JointConstraints),
}

/// The convex set of path-probability vectors the market may follow,
/// together with its support mask. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ModelPolytope {
    pub rep: PolytopeRep,
    /// `support[p]` iff path `p` can carry positive probability.
    pub support: Vec<bool>,
    num_paths: usize,
}

impl ModelPolytope {
    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn supported_paths(&self) -> Vec<usize> {
        (0..self.num_paths).filter(|&p| self.support[p]).collect()
    }

    /// Every probability vector on the lattice: H-rep with no extra rows.
    pub fn full_simplex(lattice: &PathLattice) -> Self {
        let n = lattice.num_paths();
        ModelPolytope {
            rep: PolytopeRep::HRep(JointConstraints::unconstrained(n)),
            support: vec![true; n],
            num_paths: n,
        }
    }

    /// Enumerates all products of one kernel generator per reachable node,
    /// deduplicates them, and treats the result as an exact V-representation
    /// of the joint uncertainty set.
    pub fn from_kernel_products(
        lattice: &PathLattice,
        kernels: &KernelSet,
        vertex_cap: usize,
    ) -> Result<Self, EngineError> {
        let horizon = lattice.horizon();
        if kernels.horizon() != horizon {
            return Err(EngineError::structural("kernel horizon mismatch"));
        }
        let num_paths = lattice.num_paths();
        let mut raw: Vec<Vec<f64>> = Vec::new();
        let mut count = 0usize;
        enumerate_products(
            lattice,
            kernels,
            vertex_cap,
            0,
            &[(0usize, 1.0)],
            &mut raw,
            &mut count,
        )?;
        // Exact-bit dedup first (identical products yield identical floats);
        // the quadratic tolerance pass only runs at small vertex counts.
        let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for v in raw {
            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            if !seen.insert(key) {
                continue;
            }
            if vertices.len() <= 4096
                && vertices.iter().any(|u| sup_dist(u, &v) <= VERTEX_DEDUP_TOL)
            {
                continue;
            }
            vertices.push(v);
        }
        let mut support = vec![false; num_paths];
        for v in &vertices {
            for (p, &q) in v.iter().enumerate() {
                if q > 0.0 {
                    support[p] = true;
                }
            }
        }
        Ok(ModelPolytope {
            rep: PolytopeRep::Vertices(vertices),
            support,
            num_paths,
        })
    }

    /// Builds an H-rep polytope from joint constraints, verifying feasibility
    /// with one LP solve and the support of each path with one LP each.
    pub fn from_constraints(
        lattice: &PathLattice,
        constraints: JointConstraints,
    ) -> Result<Self, EngineError> {
        let n = lattice.num_paths();
        if constraints.path_upper.len() != n || constraints.path_lower.len() != n {
            return Err(EngineError::structural(
                "per-path bound vectors must match the path count",
            ));
        }
        for r in &constraints.regions {
            if r.paths.iter().any(|&p| p >= n) {
                return Err(EngineError::structural("region refers to an unknown path"));
            }
        }

        let build_lp = |objective: Option<usize>| {
            let mut lp = LinearProgram::new();
            for p in 0..n {
                let c = if objective == Some(p) { -1.0 } else { 0.0 };
                lp.add_var(
                    c,
                    constraints.path_lower[p].max(0.0),
                    constraints.path_upper[p],
                );
            }
            lp.add_eq((0..n).map(|p| (p, 1.0)).collect(), 1.0);
            for r in &constraints.regions {
                let terms: Vec<(usize, f64)> = r.paths.iter().map(|&p| (p, 1.0)).collect();
                if r.at_least {
                    lp.add_ge(terms, r.bound);
                } else {
                    lp.add_le(terms, r.bound);
                }
            }
            lp
        };

        let feas = build_lp(None).solve()?;
        if feas.status != LpStatus::Optimal {
            let cert: Vec<String> = feas
                .eq_duals
                .iter()
                .chain(feas.le_duals.iter())
                .take(8)
                .map(|d| format!("{:.3e}", d))
                .collect();
            return Err(EngineError::config(format!(
                "constraint system is infeasible; phase-one dual certificate [{}]",
                cert.join(", ")
            )));
        }

        // Exact polarity test: path p is supported iff max P_p > tolerance.
        let mut support = vec![false; n];
        for (p, slot) in support.iter_mut().enumerate() {
            if constraints.path_upper[p] <= 0.0 {
                continue;
            }
            let sol = build_lp(Some(p)).solve()?;
            if sol.status == LpStatus::Optimal && -sol.objective > SUPPORT_TOL {
                *slot = true;
            }
        }
        Ok(ModelPolytope {
            rep: PolytopeRep::HRep(constraints),
            support,
            num_paths: n,
        })
    }

    /// Vertices when available (V-rep), or brute-force enumeration of a small
    /// H-rep restricted to the supported paths.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, EngineError> {
        match &self.rep {
            PolytopeRep::Vertices(vs) => Ok(vs.clone()),
            PolytopeRep::HRep(c) => {
                let sup = self.supported_paths();
                let d = sup.len();
                let mut le_rows = Vec::new();
                for r in &c.regions {
                    let mut row = vec![0.0; d];
                    for (k, &p) in sup.iter().enumerate() {
                        if r.paths.contains(&p) {
                            row[k] = 1.0;
                        }
                    }
                    if r.at_least {
                        for v in row.iter_mut() {
                            *v = -*v;
                        }
                        le_rows.push((row, -r.bound));
                    } else {
                        le_rows.push((row, r.bound));
                    }
                }
                let poly = crate::linprog::Polytope {
                    dim: d,
                    eq_rows: vec![(vec![1.0; d], 1.0)],
                    le_rows,
                    lower: sup.iter().map(|&p| c.path_lower[p].max(0.0)).collect(),
                    upper: sup.iter().map(|&p| c.path_upper[p]).collect(),
                };
                let vs = crate::linprog::vertex_enumerate(&poly)?;
                Ok(vs
                    .into_iter()
                    .map(|v| {
                        let mut full = vec![0.0; self.num_paths];
                        for (k, &p) in sup.iter().enumerate() {
                            full[p] = v[k];
                        }
                        full
                    })
                    .collect())
            }
        }
    }

    /// Minimizes `sum_p weights[p] * P(p)` over the polytope.
    pub fn minimize_linear(&self, weights: &[f64]) -> Result<f64, EngineError> {
        match &self.rep {
            PolytopeRep::Vertices(vs) => Ok(vs
                .iter()
                .map(|v| v.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min)),
            PolytopeRep::HRep(c) => {
                let mut lp = LinearProgram::new();
                for p in 0..self.num_paths {
                    let upper = if self.support[p] { c.path_upper[p] } else { 0.0 };
                    lp.add_var(weights[p], c.path_lower[p].max(0.0), upper);
                }
                lp.add_eq((0..self.num_paths).map(|p| (p, 1.0)).collect(), 1.0);
                for r in &c.regions {
                    let terms: Vec<(usize, f64)> = r.paths.iter().map(|&p| (p, 1.0)).collect();
                    if r.at_least {
                        lp.add_ge(terms, r.bound);
                    } else {
                        lp.add_le(terms, r.bound);
                    }
                }
                let sol = lp.solve()?;
                if sol.status != LpStatus::Optimal {
                    return Err(EngineError::solver(
                        "model polytope minimization did not reach an optimum",
                    ));
                }
                Ok(sol.objective)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_products(
    lattice: &PathLattice,
    kernels: &KernelSet,
    cap: usize,
    t: usize,
    dist: &[(usize, f64)], // (node at time t, probability)
    out: &mut Vec<Vec<f64>>,
    count: &mut usize,
) -> Result<(), EngineError> {
    let over_cap = || {
        EngineError::resource(format!(
            "kernel product count exceeds the cap of {}; supply the model set in constraint form instead",
            cap
        ))
    };
    if t == lattice.horizon() {
        *count += 1;
        if *count > cap {
            return Err(over_cap());
        }
        let mut v = vec![0.0; lattice.num_paths()];
        for &(node, p) in dist {
            v[node] = p; // a node at t = T is a full path index
        }
        out.push(v);
        return Ok(());
    }
    let succ = lattice.grid_size(t + 1);
    let gen_counts: Vec<usize> = dist
        .iter()
        .map(|&(n, _)| kernels.nodes[t][n].generators.len())
        .collect();
    gen_counts
        .iter()
        .try_fold(1usize, |a, &c| a.checked_mul(c).filter(|&x| x <= cap))
        .ok_or_else(over_cap)?;
    let mut choice = vec![0usize; dist.len()];
    loop {
        let mut next: Vec<(usize, f64)> = Vec::new();
        for (k, &(node, p)) in dist.iter().enumerate() {
            let g = &kernels.nodes[t][node].generators[choice[k]];
            for (i, &q) in g.iter().enumerate() {
                if q > 0.0 {
                    next.push((node * succ + i, p * q));
                }
            }
        }
        enumerate_products(lattice, kernels, cap, t + 1, &next, out, count)?;
        // advance the mixed-radix choice vector
        let mut k = 0;
        loop {
            if k == choice.len() {
                return Ok(());
            }
            choice[k] += 1;
            if choice[k] < gen_counts[k] {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Lattice paths made relevant by the modification although their continuum
/// cells are charged by no base model, with the worst-case mass they carry.
#[derive(Debug, Clone)]
pub struct MismatchReport {
    /// The polar-mismatch path set.
    pub paths: Vec<usize>,
    /// Maximum total probability of the set across polytope vertices.
    pub max_mass: f64,
    /// The closed-form bound `1 - (1/(1+lambda))^T`.
    pub bound: f64,
    /// `max_mass <= bound` up to solver tolerance.
    pub within_bound: bool,
}

/// Identifies the polar-mismatch set of a kernel-product polytope and checks
/// its worst-case mass against the closed-form bound.
pub fn mismatch_report(
    polytope: &ModelPolytope,
    lattice: &PathLattice,
    base_models: &[AtomicBaseModel],
    lambda: f64,
) -> Result<MismatchReport, EngineError> {
    let PolytopeRep::Vertices(vertices) = &polytope.rep else {
        return Err(EngineError::structural(
            "mismatch report requires a kernel-product (V-rep) polytope",
        ));
    };
    let mut charged = vec![false; lattice.num_paths()];
    for m in base_models {
        for (path, w) in &m.atoms {
            if *w > 0.0 {
                charged[lattice.snap(path)?] = true;
            }
        }
    }
    let paths: Vec<usize> = (0..lattice.num_paths())
        .filter(|&p| polytope.support[p] && !charged[p])
        .collect();
    let max_mass = vertices
        .iter()
        .map(|v| paths.iter().map(|&p| v[p]).sum::<f64>())
        .fold(0.0, f64::max);
    let bound = 1.0 - (1.0 / (1.0 + lambda)).powi(lattice.horizon() as i32);
    Ok(MismatchReport {
        paths,
        max_mass,
        bound,
        within_bound: max_mass <= bound + 1e-9,
    })
}

/// The largest `c` such that every atom prefix charged by some base model
/// admits, under some base model, moves of at least `c` both up and down
/// with positive conditional probability. `None` when a charged prefix
/// cannot move both ways.
pub fn jc_constant(base_models: &[AtomicBaseModel], horizon: usize) -> Option<f64> {
    let mut best = f64::INFINITY;
    for t in 0..horizon {
        // group atoms by exact continuum prefix across all models
        let mut prefixes: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
        for m in base_models {
            for (path, w) in &m.atoms {
                if *w <= 0.0 {
                    continue;
                }
                let key: Vec<u64> = path[..t].iter().map(|v| v.to_bits()).collect();
                let here = if t == 0 { 1.0 } else { path[t - 1] };
                let up = path[t] - here;
                let down = here - path[t];
                let e = prefixes
                    .entry(key)
                    .or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
                e.0 = e.0.max(up);
                e.1 = e.1.max(down);
            }
        }
        for (up, down) in prefixes.values() {
            if *up <= 0.0 || *down <= 0.0 {
                return None;
            }
            best = best.min(*up).min(*down);
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{MarketSpec, PayoffSpec};

    fn lattice_t1(level: u32) -> PathLattice {
        PathLattice::build(&MarketSpec {
            horizon: 1,
            level,
            bounds: vec![(1.0, 1.0), (0.5, 1.5)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        })
        .unwrap()
    }

    fn model(atoms: Vec<(Vec<f64>, f64)>) -> AtomicBaseModel {
        AtomicBaseModel { atoms }
    }

    #[test]
    fn point_mass_kernel() {
        let l = lattice_t1(1);
        let ks = induce_kernels(&l, &[model(vec![(vec![1.3], 1.0)])]).unwrap();
        assert_eq!(ks.nodes[0][0].generators, vec![vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn uniform_three_atoms() {
        let l = lattice_t1(1);
        let ks = induce_kernels(
            &l,
            &[model(vec![
                (vec![0.6], 1.0 / 3.0),
                (vec![1.0], 1.0 / 3.0),
                (vec![1.4], 1.0 / 3.0),
            ])],
        )
        .unwrap();
        let g = &ks.nodes[0][0].generators[0];
        for v in g {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_node_freezes_price() {
        let spec = MarketSpec {
            horizon: 2,
            level: 1,
            bounds: vec![(1.0, 1.0), (0.5, 1.5), (0.0, 2.0)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let l = PathLattice::build(&spec).unwrap();
        // all mass goes through S_1 = 1.0; the nodes at 0.5 and 1.5 are empty
        let ks = induce_kernels(&l, &[model(vec![(vec![1.0, 1.5], 1.0)])]).unwrap();
        let node_half = 0usize; // grid index 0 at t = 1 is price 0.5
        let nk = &ks.nodes[1][node_half];
        assert!(nk.degenerate);
        let g = &nk.generators[0];
        // 0.5 has numerator 1 at scale 2^1; the t = 2 grid starts at 0
        assert_eq!(g[1], 1.0);
        assert_eq!(g.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn lambda_cases() {
        let l2 = lattice_t1(2);
        let lam = 0.01;
        // case (iv): pure diagonal stays put
        let diag = induce_kernels(&l2, &[model(vec![(vec![1.0], 1.0)])]).unwrap();
        let out = lambda_modify(&diag, lam).unwrap();
        assert_eq!(out.nodes[0][0].generators, diag.nodes[0][0].generators);

        // case (i): mass on diagonal and top, none at the bottom
        let ks = induce_kernels(&l2, &[model(vec![(vec![1.0], 0.5), (vec![1.5], 0.5)])]).unwrap();
        let out = lambda_modify(&ks, lam).unwrap();
        let g = &out.nodes[0][0].generators[0];
        assert!((g[0] - lam / (1.0 + lam)).abs() < 1e-15);
        assert!((g[2] - 0.5 / (1.0 + lam)).abs() < 1e-15);
        assert!((g[4] - 0.5 / (1.0 + lam)).abs() < 1e-15);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // case (iii): interior off-diagonal mass only
        let ks = induce_kernels(&l2, &[model(vec![(vec![0.75], 0.5), (vec![1.25], 0.5)])]).unwrap();
        let out = lambda_modify(&ks, lam).unwrap();
        let g = &out.nodes[0][0].generators[0];
        assert!((g[0] - 0.5 * lam / (1.0 + lam)).abs() < 1e-15);
        assert!((g[4] - 0.5 * lam / (1.0 + lam)).abs() < 1e-15);
        assert!((g[1] - 0.5 / (1.0 + lam)).abs() < 1e-15);

        // re-running lands in case (iv): the extremes now carry mass
        let again = lambda_modify(&out, lam).unwrap();
        assert_eq!(again.nodes[0][0].generators, out.nodes[0][0].generators);
    }

    #[test]
    fn joint_polytope_one_period() {
        let l = lattice_t1(1);
        let ks = induce_kernels(&l, &[model(vec![(vec![0.5], 0.5), (vec![1.5], 0.5)])]).unwrap();
        let poly = ModelPolytope::from_kernel_products(&l, &ks, DEFAULT_VERTEX_CAP).unwrap();
        let PolytopeRep::Vertices(vs) = &poly.rep else {
            panic!()
        };
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0], vec![0.5, 0.0, 0.5]);
        assert_eq!(poly.support, vec![true, false, true]);

        let ks2 = induce_kernels(
            &l,
            &[
                model(vec![(vec![0.5], 0.5), (vec![1.5], 0.5)]),
                model(vec![(vec![0.5], 0.25), (vec![1.5], 0.75)]),
            ],
        )
        .unwrap();
        let poly2 = ModelPolytope::from_kernel_products(&l, &ks2, DEFAULT_VERTEX_CAP).unwrap();
        let PolytopeRep::Vertices(vs2) = &poly2.rep else {
            panic!()
        };
        assert_eq!(vs2.len(), 2);
    }

    #[test]
    fn joint_polytope_two_periods_sixteen_vertices() {
        let spec = MarketSpec {
            horizon: 2,
            level: 1,
            bounds: vec![(1.0, 1.0), (0.5, 1.5), (0.0, 2.0)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let l = PathLattice::build(&spec).unwrap();
        // two models whose atoms cover all three period-1 nodes with distinct
        // kernels at every reachable node
        let m1 = model(vec![
            (vec![0.5, 0.0], 0.2),
            (vec![0.5, 1.0], 0.2),
            (vec![1.0, 0.5], 0.3),
            (vec![1.5, 1.0], 0.15),
            (vec![1.5, 2.0], 0.15),
        ]);
        let m2 = model(vec![
            (vec![0.5, 0.5], 0.25),
            (vec![1.0, 1.5], 0.25),
            (vec![1.0, 1.0], 0.25),
            (vec![1.5, 0.5], 0.25),
        ]);
        let ks = induce_kernels(&l, &[m1, m2]).unwrap();
        let poly = ModelPolytope::from_kernel_products(&l, &ks, DEFAULT_VERTEX_CAP).unwrap();
        let PolytopeRep::Vertices(vs) = &poly.rep else {
            panic!()
        };
        // 2 root kernels x 2 generators at each of 3 reachable children
        assert_eq!(vs.len(), 16);
        for v in vs {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|&q| q >= -1e-12));
        }
    }

    #[test]
    fn constraint_polytope_support_and_feasibility() {
        let l = lattice_t1(1);
        let free =
            ModelPolytope::from_constraints(&l, JointConstraints::unconstrained(l.num_paths()))
                .unwrap();
        assert!(free.support.iter().all(|&s| s));

        // a cap of 1/20 over 3 paths cannot reach total mass 1
        let mut caps = JointConstraints::unconstrained(l.num_paths());
        caps.path_upper = vec![0.05; l.num_paths()];
        assert!(ModelPolytope::from_constraints(&l, caps).is_err());
    }

    #[test]
    fn section5_style_constraints_feasible() {
        let l = lattice_t1(5);
        assert_eq!(l.num_paths(), 33);
        let mut c = JointConstraints::unconstrained(33);
        c.path_upper = vec![0.05; 33];
        c.regions = vec![
            RegionConstraint {
                paths: paths_in_price_interval(&l, 1, 1.25, true, 1.5, false),
                at_least: true,
                bound: 0.25,
            },
            RegionConstraint {
                paths: paths_in_price_interval(&l, 1, 0.5, false, 0.75, true),
                at_least: true,
                bound: 0.25,
            },
        ];
        assert_eq!(c.regions[0].paths.len(), 8);
        assert_eq!(c.regions[1].paths.len(), 8);
        let poly = ModelPolytope::from_constraints(&l, c).unwrap();
        assert!(poly.support.iter().all(|&s| s));
    }

    #[test]
    fn mismatch_examples() {
        let l = lattice_t1(1);
        let lam = 0.01;
        // both extremes charged: case (iv), empty mismatch set
        let models = [model(vec![(vec![0.5], 0.5), (vec![1.5], 0.5)])];
        let ks = lambda_modify(&induce_kernels(&l, &models).unwrap(), lam).unwrap();
        let poly = ModelPolytope::from_kernel_products(&l, &ks, DEFAULT_VERTEX_CAP).unwrap();
        let rep = mismatch_report(&poly, &l, &models, lam).unwrap();
        assert!(rep.paths.is_empty());
        assert_eq!(rep.max_mass, 0.0);

        // case (i) at the root: the low path becomes relevant with mass
        // lambda/(1+lambda)
        let models = [model(vec![(vec![1.0], 0.5), (vec![1.5], 0.5)])];
        let ks = lambda_modify(&induce_kernels(&l, &models).unwrap(), lam).unwrap();
        let poly = ModelPolytope::from_kernel_products(&l, &ks, DEFAULT_VERTEX_CAP).unwrap();
        let rep = mismatch_report(&poly, &l, &models, lam).unwrap();
        assert_eq!(rep.paths, vec![0]);
        assert!((rep.max_mass - lam / (1.0 + lam)).abs() < 1e-12);
        assert!(rep.within_bound);
    }

    #[test]
    fn jc_constant_detection() {
        let ms = [
            model(vec![(vec![0.5], 0.5), (vec![1.5], 0.5)]),
            model(vec![(vec![0.9], 1.0)]),
        ];
        let c = jc_constant(&ms, 1).unwrap();
        assert!((c - 0.5).abs() < 1e-12);
        let one_sided = [model(vec![(vec![1.2], 1.0)])];
        assert!(jc_constant(&one_sided, 1).is_none());
    }
}
