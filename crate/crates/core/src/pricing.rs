//! Martingale-measure machinery on the lattice.
//!
//! Unnormalized measures on the supported paths that satisfy the node-wise
//! martingale rows and reprice every option form a homogeneous cone; its
//! normalized elements are exactly the option-consistent martingale
//! measures. No-arbitrage certification finds a measure with uniformly
//! positive support weight, superhedging maximizes expected claim value over
//! the cone, and the dual LP yields the semi-static superhedging strategy.

use crate::error::EngineError;
use crate::lattice::{OptionSpec, PathLattice};
use crate::linprog::LinearProgram;
use crate::LpStatus;

/// Certification threshold for the minimal support weight.
const CERT_TOL: f64 = 1e-9;
/// Duality gap allowed between strategy cost and superhedging price.
const DUALITY_TOL: f64 = 1e-6;

/// Supported tree nodes per period, shared by cone rows and strategies.
#[derive(Debug, Clone)]
pub struct NodeTable {
    /// `nodes[t]` = sorted supported node indices at time `t`, `t = 0..T`.
    pub nodes: Vec<Vec<usize>>,
}

impl NodeTable {
    pub fn build(lattice: &PathLattice, support: &[bool]) -> Self {
        let horizon = lattice.horizon();
        let mut sets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); horizon];
        for p in 0..lattice.num_paths() {
            if !support[p] {
                continue;
            }
            for (t, set) in sets.iter_mut().enumerate() {
                set.insert(lattice.node_of_path(p, t));
            }
        }
        NodeTable {
            nodes: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    /// Ordinal of `node` among the supported time-`t` nodes.
    pub fn ordinal(&self, t: usize, node: usize) -> Option<usize> {
        self.nodes[t].binary_search(&node).ok()
    }

    pub fn count(&self, t: usize) -> usize {
        self.nodes[t].len()
    }
}

/// Homogeneous linear constraints whose normalized nonnegative solutions are
/// the option-consistent martingale measures on the supported paths.
#[derive(Debug, Clone)]
pub struct MartingaleCone {
    /// Supported path indices, ascending; measure components follow this order.
    pub paths: Vec<usize>,
    /// One row per supported non-terminal node: expected price increment zero.
    pub node_rows: Vec<Vec<(usize, f64)>>,
    /// One row per option: expected payoff equals the market price.
    pub option_rows: Vec<Vec<(usize, f64)>>,
    /// `(t, node)` behind each node row.
    pub node_row_ids: Vec<(usize, usize)>,
    pub node_table: NodeTable,
    num_paths: usize,
}

impl MartingaleCone {
    pub fn num_supported(&self) -> usize {
        self.paths.len()
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    /// Position of a full-lattice path index within `paths`.
    pub fn position(&self, path: usize) -> Option<usize> {
        self.paths.binary_search(&path).ok()
    }

    /// Expands a support-ordered vector to full path length.
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_paths];
        for (pos, &p) in self.paths.iter().enumerate() {
            full[p] = values[pos];
        }
        full
    }
}

/// Assembles the martingale cone over the supported paths.
pub fn build_cone(
    lattice: &PathLattice,
    options: &[OptionSpec],
    support: &[bool],
) -> Result<MartingaleCone, EngineError> {
    if support.len() != lattice.num_paths() {
        return Err(EngineError::structural("support mask length mismatch"));
    }
    let paths: Vec<usize> = (0..lattice.num_paths()).filter(|&p| support[p]).collect();
    if paths.is_empty() {
        return Err(EngineError::config("support mask is empty"));
    }
    let node_table = NodeTable::build(lattice, support);
    let horizon = lattice.horizon();

    let mut node_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut node_row_ids = Vec::new();
    for t in 0..horizon {
        for &node in &node_table.nodes[t] {
            let price_here = lattice.node_price(node, t);
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (pos, &p) in paths.iter().enumerate() {
                if lattice.node_of_path(p, t) == node {
                    let next = lattice.path_prices(p)[t];
                    let coeff = next - price_here;
                    if coeff != 0.0 {
                        row.push((pos, coeff));
                    }
                }
            }
            node_rows.push(row);
            node_row_ids.push((t, node));
        }
    }

    let mut option_rows = Vec::new();
    for opt in options {
        let values = lattice.payoff_values(&opt.payoff)?;
        let row: Vec<(usize, f64)> = paths
            .iter()
            .enumerate()
            .filter_map(|(pos, &p)| {
                let c = values[p] - opt.price;
                (c != 0.0).then_some((pos, c))
            })
            .collect();
        option_rows.push(row);
    }

    Ok(MartingaleCone {
        paths,
        node_rows,
        option_rows,
        node_row_ids,
        node_table,
        num_paths: lattice.num_paths(),
    })
}

/// Outcome of no-arbitrage certification.
#[derive(Debug, Clone)]
pub struct NaCertificate {
    pub certified: bool,
    /// A martingale measure maximizing its minimal support weight
    /// (full path length; zeros off support). Empty when none exists.
    pub measure: Vec<f64>,
    /// The optimal minimal weight; `-inf` when the cone admits no
    /// normalized measure at all.
    pub min_weight: f64,
}

/// Maximizes the minimal path weight over normalized cone measures. A
/// strictly positive optimum dominates every model on the support, which is
/// the lattice form of freedom from arbitrage.
pub fn certify_na(cone: &MartingaleCone) -> Result<NaCertificate, EngineError> {
    let s = cone.num_supported();
    let mut lp = LinearProgram::new();
    for _ in 0..s {
        lp.add_var(0.0, 0.0, f64::INFINITY);
    }
    let eps = lp.add_var(-1.0, -1.0, 1.0); // maximize eps
    for row in cone.node_rows.iter().chain(cone.option_rows.iter()) {
        lp.add_eq(row.clone(), 0.0);
    }
    lp.add_eq((0..s).map(|p| (p, 1.0)).collect(), 1.0);
    for p in 0..s {
        lp.add_ge(vec![(p, 1.0), (eps, -1.0)], 0.0);
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Ok(NaCertificate {
            certified: false,
            measure: Vec::new(),
            min_weight: f64::NEG_INFINITY,
        });
    }
    let min_weight = -sol.objective;
    Ok(NaCertificate {
        certified: min_weight > CERT_TOL,
        measure: cone.expand(&sol.primal[..s]),
        min_weight,
    })
}

/// Maximal expected claim value over the normalized cone: the superhedging
/// price on the supported paths. Also returns the maximizing measure.
pub fn superhedge_price_measure(
    cone: &MartingaleCone,
    certificate: &NaCertificate,
    claim: &[f64],
) -> Result<(f64, Vec<f64>), EngineError> {
    if !certificate.certified {
        return Err(EngineError::uncertified(
            "superhedging requires a certified arbitrage-free market; refine the \
             discretization or check option prices",
        ));
    }
    if claim.len() != cone.num_paths() {
        return Err(EngineError::structural("claim vector length mismatch"));
    }
    let s = cone.num_supported();
    let mut lp = LinearProgram::new();
    for pos in 0..s {
        lp.add_var(-claim[cone.paths[pos]], 0.0, f64::INFINITY);
    }
    for row in cone.node_rows.iter().chain(cone.option_rows.iter()) {
        lp.add_eq(row.clone(), 0.0);
    }
    lp.add_eq((0..s).map(|p| (p, 1.0)).collect(), 1.0);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(EngineError::solver("superhedge price LP did not solve"));
    }
    Ok((-sol.objective, cone.expand(&sol.primal[..s])))
}

/// See [`superhedge_price_measure`].
pub fn superhedge_price(
    cone: &MartingaleCone,
    certificate: &NaCertificate,
    claim: &[f64],
) -> Result<f64, EngineError> {
    superhedge_price_measure(cone, certificate, claim).map(|(p, _)| p)
}

/// A semi-static strategy: initial capital, per-node stock positions and
/// static option positions.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub initial: f64,
    /// `stock[t][node]` over the full node index space; zero off support.
    pub stock: Vec<Vec<f64>>,
    /// Static option positions.
    pub options: Vec<f64>,
    /// Whether any box bound was (numerically) active at the optimum; a
    /// binding box means the bounds should be recomputed from a larger
    /// claim bound.
    pub binding_boxes: bool,
}

impl Strategy {
    /// Terminal gain `(H . S)_T + q(phi - p)` along a lattice path.
    pub fn lattice_gain(
        &self,
        lattice: &PathLattice,
        options: &[OptionSpec],
        path: usize,
    ) -> Result<f64, EngineError> {
        let prices = lattice.path_prices(path);
        let mut gain = 0.0;
        let mut prev = 1.0;
        for (t, &price) in prices.iter().enumerate() {
            let node = lattice.node_of_path(path, t);
            gain += self.stock[t][node] * (price - prev);
            prev = price;
        }
        for (q, opt) in self.options.iter().zip(options) {
            gain += q * (lattice.evaluate_payoff(&opt.payoff, path)? - opt.price);
        }
        Ok(gain)
    }
}

/// Per-period bound on the one-period price move `|S_{t+1} - S_t|`.
fn period_ranges(lattice: &PathLattice) -> Vec<f64> {
    let horizon = lattice.horizon();
    (0..horizon)
        .map(|t| {
            let (a_now, b_now) = if t == 0 { (1.0, 1.0) } else { lattice.bounds(t) };
            let (a_next, b_next) = lattice.bounds(t + 1);
            (b_next - a_now).max(b_now - a_next)
        })
        .collect()
}

/// The smallest guaranteed extreme move `min_t min(b_t - b_{t-1}, a_{t-1} - a_t)`.
pub fn default_min_move(lattice: &PathLattice) -> f64 {
    let horizon = lattice.horizon();
    let mut c = f64::INFINITY;
    let mut prev = (1.0, 1.0);
    for t in 1..=horizon {
        let (a, b) = lattice.bounds(t);
        c = c.min(b - prev.1).min(prev.0 - a);
        prev = (a, b);
    }
    c
}

/// Box bounds for superhedging strategies.
///
/// The stock bound follows the worst-case recursion: a position at time `t`
/// must not lose more than the claim bound plus everything earlier positions
/// can gain, against an adversarial extreme move of size `min_move`. The
/// option bound has no closed form; it is a configurable multiple of
/// `claim_bound / min_option_spread` and flagged when active.
pub fn strategy_box_bounds(
    lattice: &PathLattice,
    claim_bound: f64,
    min_move: f64,
    option_spreads: &[f64],
    q_multiplier: f64,
) -> Result<(f64, f64), EngineError> {
    if !(min_move > 0.0) {
        return Err(EngineError::config(
            "minimal guaranteed move must be positive",
        ));
    }
    if claim_bound < 0.0 {
        return Err(EngineError::config("claim bound must be nonnegative"));
    }
    let ranges = period_ranges(lattice);
    let mut h_box: f64 = 0.0;
    let mut d_t = claim_bound;
    for range in ranges {
        let h_t = d_t / min_move;
        h_box = h_box.max(h_t);
        d_t += h_t * range;
    }
    let q_box = if option_spreads.is_empty() {
        0.0
    } else {
        let min_spread = option_spreads.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if !(min_spread > 0.0) {
            return Err(EngineError::config(
                "every option needs a positive payoff spread for the position bound",
            ));
        }
        q_multiplier * claim_bound / min_spread
    };
    Ok((h_box, q_box))
}

/// Payoff spread (max minus min over supported paths) of each option.
pub fn option_spreads(
    lattice: &PathLattice,
    options: &[OptionSpec],
    support: &[bool],
) -> Result<Vec<f64>, EngineError> {
    options
        .iter()
        .map(|opt| {
            let values = lattice.payoff_values(&opt.payoff)?;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (p, v) in values.iter().enumerate() {
                if support[p] {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                }
            }
            Ok(hi - lo)
        })
        .collect()
}

/// Cheapest capital whose semi-static strategy dominates `claim` on every
/// supported path, together with that strategy.
///
/// `h_box`/`q_box` bound the positions; the returned strategy's cost is
/// cross-checked against [`superhedge_price`] (they are LP duals when no box
/// binds).
pub fn superhedge_strategy(
    lattice: &PathLattice,
    options: &[OptionSpec],
    cone: &MartingaleCone,
    certificate: &NaCertificate,
    claim: &[f64],
    h_box: f64,
    q_box: f64,
) -> Result<Strategy, EngineError> {
    if !certificate.certified {
        return Err(EngineError::uncertified(
            "superhedging requires a certified arbitrage-free market; refine the \
             discretization or check option prices",
        ));
    }
    let horizon = lattice.horizon();
    let table = &cone.node_table;

    let mut lp = LinearProgram::new();
    let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    // one stock position per supported non-terminal node
    let mut h_vars: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        h_vars.push(
            table.nodes[t]
                .iter()
                .map(|_| lp.add_var(0.0, -h_box, h_box))
                .collect(),
        );
    }
    let q_vars: Vec<usize> = options
        .iter()
        .map(|_| lp.add_var(0.0, -q_box, q_box))
        .collect();

    let option_values: Vec<Vec<f64>> = options
        .iter()
        .map(|o| lattice.payoff_values(&o.payoff))
        .collect::<Result<_, _>>()?;

    for &p in &cone.paths {
        let mut terms = vec![(x, 1.0)];
        let prices = lattice.path_prices(p);
        let mut prev = 1.0;
        for (t, &price) in prices.iter().enumerate() {
            let node = lattice.node_of_path(p, t);
            let ord = table
                .ordinal(t, node)
                .ok_or_else(|| EngineError::structural("path through unsupported node"))?;
            let coeff = price - prev;
            if coeff != 0.0 {
                terms.push((h_vars[t][ord], coeff));
            }
            prev = price;
        }
        for (i, q) in q_vars.iter().enumerate() {
            let coeff = option_values[i][p] - options[i].price;
            if coeff != 0.0 {
                terms.push((*q, coeff));
            }
        }
        lp.add_ge(terms, claim[p]);
    }

    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(EngineError::solver(format!(
            "superhedge strategy LP ended with status {:?}",
            sol.status
        )));
    }

    let mut stock: Vec<Vec<f64>> = (0..horizon)
        .map(|t| vec![0.0; lattice.num_nodes(t)])
        .collect();
    let mut binding = false;
    for t in 0..horizon {
        for (ord, &node) in table.nodes[t].iter().enumerate() {
            let h = sol.primal[h_vars[t][ord]];
            if h.abs() >= h_box - 1e-7 {
                binding = true;
            }
            stock[t][node] = h;
        }
    }
    let q: Vec<f64> = q_vars.iter().map(|&v| sol.primal[v]).collect();
    if q.iter().any(|v| v.abs() >= q_box - 1e-7) {
        binding = true;
    }

    let price = superhedge_price(cone, certificate, claim)?;
    if !binding && (sol.primal[x] - price).abs() > DUALITY_TOL {
        return Err(EngineError::solver(format!(
            "superhedge duality gap {:.3e} between strategy cost {} and price {}",
            (sol.primal[x] - price).abs(),
            sol.primal[x],
            price
        )));
    }

    Ok(Strategy {
        initial: sol.primal[x],
        stock,
        options: q,
        binding_boxes: binding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{MarketSpec, PayoffSpec};

    fn market(level: u32, options: Vec<OptionSpec>) -> (MarketSpec, PathLattice) {
        let spec = MarketSpec {
            horizon: 1,
            level,
            bounds: vec![(1.0, 1.0), (0.5, 1.5)],
            lambda: 0.01,
            options,
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let lattice = PathLattice::build(&spec).unwrap();
        (spec, lattice)
    }

    #[test]
    fn cone_rows_one_period() {
        let (_s, l) = market(1, vec![]);
        let cone = build_cone(&l, &[], &[true; 3]).unwrap();
        assert_eq!(cone.node_rows.len(), 1);
        assert_eq!(cone.node_rows[0], vec![(0, -0.5), (2, 0.5)]);
        assert!(cone.option_rows.is_empty());

        let put = OptionSpec {
            payoff: PayoffSpec::Put { strike: 1.0 },
            price: 0.2,
        };
        let cone = build_cone(&l, &[put], &[true; 3]).unwrap();
        assert_eq!(cone.option_rows.len(), 1);
        let row = &cone.option_rows[0];
        assert_eq!(row.len(), 3);
        assert!((row[0].1 - 0.3).abs() < 1e-15);
        assert!((row[1].1 + 0.2).abs() < 1e-15);
        assert!((row[2].1 + 0.2).abs() < 1e-15);
    }

    #[test]
    fn cone_node_rows_two_periods() {
        let spec = MarketSpec {
            horizon: 2,
            level: 1,
            bounds: vec![(1.0, 1.0), (0.5, 1.5), (0.0, 2.0)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let l = PathLattice::build(&spec).unwrap();
        let cone = build_cone(&l, &[], &vec![true; l.num_paths()]).unwrap();
        assert_eq!(cone.node_rows.len(), 1 + 3);
    }

    #[test]
    fn certify_balanced_grid() {
        let (_s, l) = market(1, vec![]);
        let cone = build_cone(&l, &[], &[true; 3]).unwrap();
        let cert = certify_na(&cone).unwrap();
        assert!(cert.certified);
        assert!((cert.min_weight - 1.0 / 3.0).abs() < 1e-9);
        let q = &cert.measure;
        assert!(((0.5 * q[0] + q[1] + 1.5 * q[2]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn certify_fails_above_money_support() {
        let (_s, l) = market(1, vec![]);
        let cone = build_cone(&l, &[], &[false, false, true]).unwrap();
        let cert = certify_na(&cone).unwrap();
        assert!(!cert.certified);
    }

    #[test]
    fn certify_fails_on_dominated_option_price() {
        let put = OptionSpec {
            payoff: PayoffSpec::Put { strike: 1.0 },
            price: 0.6,
        };
        let (_s, l) = market(1, vec![put.clone()]);
        let cone = build_cone(&l, &[put], &[true; 3]).unwrap();
        let cert = certify_na(&cone).unwrap();
        assert!(!cert.certified);
    }

    #[test]
    fn superhedge_square_claim() {
        let (spec, l) = market(1, vec![]);
        let cone = build_cone(&l, &[], &[true; 3]).unwrap();
        let cert = certify_na(&cone).unwrap();
        let f = l.payoff_values(&spec.claim).unwrap();
        let (price, q) = superhedge_price_measure(&cone, &cert, &f).unwrap();
        assert!((price - 1.25).abs() < 1e-9);
        assert!((q[0] - 0.5).abs() < 1e-8);
        assert!(q[1].abs() < 1e-8);
        assert!((q[2] - 0.5).abs() < 1e-8);

        // martingale property: E_Q[S_1] = 1 for the identity claim
        let s1: Vec<f64> = (0..3).map(|p| l.path_prices(p)[0]).collect();
        let price_s = superhedge_price(&cone, &cert, &s1).unwrap();
        assert!((price_s - 1.0).abs() < 1e-9);

        // positive homogeneity
        let scaled: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let price3 = superhedge_price(&cone, &cert, &scaled).unwrap();
        assert!((price3 - 3.0 * price).abs() < 1e-9);
    }

    #[test]
    fn strategy_half_square() {
        let (_s, l) = market(1, vec![]);
        let cone = build_cone(&l, &[], &[true; 3]).unwrap();
        let cert = certify_na(&cone).unwrap();
        let f: Vec<f64> = (0..3).map(|p| 0.5 * l.path_prices(p)[0].powi(2)).collect();
        let st = superhedge_strategy(&l, &[], &cone, &cert, &f, 10.0, 0.0).unwrap();
        assert!((st.initial - 0.625).abs() < 1e-9);
        assert!((st.stock[0][0] - 1.0).abs() < 1e-8);
        assert!(!st.binding_boxes);

        let zero = vec![0.0; 3];
        let st0 = superhedge_strategy(&l, &[], &cone, &cert, &zero, 10.0, 0.0).unwrap();
        assert!(st0.initial.abs() < 1e-9);
        assert!(st0.stock[0][0].abs() < 1e-9);
    }

    #[test]
    fn strategy_buys_the_tradable_put() {
        let put = OptionSpec {
            payoff: PayoffSpec::Put { strike: 1.0 },
            price: 0.2,
        };
        let (_s, l) = market(1, vec![put.clone()]);
        let cone = build_cone(&l, &[put.clone()], &[true; 3]).unwrap();
        let cert = certify_na(&cone).unwrap();
        assert!(cert.certified);
        let f = l.payoff_values(&put.payoff).unwrap();
        let st = superhedge_strategy(&l, &[put.clone()], &cone, &cert, &f, 10.0, 10.0).unwrap();
        assert!((st.initial - 0.2).abs() < 1e-8);
        // path-wise domination
        for (p, fv) in f.iter().enumerate() {
            let gain = st.lattice_gain(&l, &[put.clone()], p).unwrap();
            assert!(st.initial + gain >= fv - 1e-8);
        }
    }

    #[test]
    fn box_bound_recursion() {
        let (_s, l) = market(1, vec![]);
        let (h, q) = strategy_box_bounds(&l, 1.25, 0.5, &[], 1e3).unwrap();
        assert!((h - 2.5).abs() < 1e-12);
        assert_eq!(q, 0.0);
        let (h0, _) = strategy_box_bounds(&l, 0.0, 0.5, &[], 1e3).unwrap();
        assert_eq!(h0, 0.0);
        assert!(strategy_box_bounds(&l, 1.0, 0.0, &[], 1e3).is_err());

        // two-period replay of the recursion
        let spec = MarketSpec {
            horizon: 2,
            level: 2,
            bounds: vec![(1.0, 1.0), (0.75, 1.25), (0.25, 1.75)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let l2 = PathLattice::build(&spec).unwrap();
        // ranges: t=0: max(1.25-1, 1-0.75) = 0.25; t=1: max(1.75-0.75, 1.25-0.25) = 1.0
        let (h2, _) = strategy_box_bounds(&l2, 1.0, 0.25, &[], 1e3).unwrap();
        // H_0 = 4, D_1 = 1 + 4*0.25 = 2, H_1 = 8
        assert!((h2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn default_min_move_is_bound_gap() {
        let (_s, l) = market(1, vec![]);
        assert!((default_min_move(&l) - 0.5).abs() < 1e-15);
    }
}
