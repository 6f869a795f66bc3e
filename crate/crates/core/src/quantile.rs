//! Maximum expected success ratios, optimal randomized tests, and quantile
//! hedging prices.
//!
//! The worst-case testing problem couples a scale `a >= 0` with a martingale
//! measure `Q` multiplicatively. Substituting `mu = a Q` absorbs the scale
//! into the homogeneous cone and the whole problem collapses to one LP:
//!
//! ```text
//! V(x) = min  x * sum(mu) + sum_p t_p
//!        s.t. t_p >= P_p - mu_p f_p,  t >= 0,
//!             P in model polytope,    mu in martingale cone.
//! ```
//!
//! The optimal randomized test is the vector of duals of the coupling rows:
//! LP duality delivers exactly the saddle-point conditions (the maximizing
//! measure argument, the minimizing model argument, and the budget identity)
//! that characterize the optimal test, including the randomization values on
//! the boundary set. The quantile price inverts the concave, nondecreasing
//! curve `x -> V(x)` with a safeguarded bracket search.

use crate::error::EngineError;
use crate::lattice::{OptionSpec, PathLattice};
use crate::linprog::LinearProgram;
use crate::models::{ModelPolytope, PolytopeRep};
use crate::pricing::{
    self, default_min_move, option_spreads, strategy_box_bounds, MartingaleCone, NaCertificate,
    Strategy,
};
use crate::LpStatus;

/// Slack added to the bracket predicate to absorb LP solve noise.
const VALUE_TOL: f64 = 1e-9;
/// Scale below which the optimal multiplier counts as zero.
const A_STAR_TOL: f64 = 1e-11;
/// Default bracket tolerance of the price inversion.
pub const DEFAULT_INVERT_TOL: f64 = 1e-7;
/// Multiplier behind the heuristic option-position bound.
pub const Q_BOX_MULTIPLIER: f64 = 1e3;

/// A randomized test: one value in `[0, 1]` per path (1 wherever the claim
/// vanishes, since any hedge succeeds there).
#[derive(Debug, Clone)]
pub struct SuccessTest {
    pub values: Vec<f64>,
}

/// The solved testing problem at one capital level.
#[derive(Debug, Clone)]
pub struct ValuePoint {
    pub capital: f64,
    /// Maximum worst-case expected success ratio `V(x)`.
    pub value: f64,
    /// Optimal scale `a* = sum(mu*)`; a subgradient of `V` at `x`.
    pub a_star: f64,
    /// Minimizing model `P*` (full path length).
    pub model_star: Vec<f64>,
    /// Minimizing scaled measure `mu* = a* Q*` (full path length).
    pub measure_star: Vec<f64>,
    pub test: SuccessTest,
}

/// Quantile hedging price with its certificate objects.
#[derive(Debug, Clone)]
pub struct QuantilePriceResult {
    pub alpha: f64,
    pub price: f64,
    /// The claim scaled by the optimal test, `F' = F * psi`.
    pub modified_claim: Vec<f64>,
    /// Superhedging strategy of the modified claim.
    pub strategy: Strategy,
    /// Worst-case expected success ratio the test actually attains.
    pub achieved_ratio: f64,
    pub value_point: ValuePoint,
}

enum ModelVars {
    Direct(usize),  // first P index
    Weights(usize), // first theta index
}

/// Solves the value LP at capital `x`.
///
/// The reference measure is uniform on the supported paths, so its density
/// cancels throughout and plain probability vectors appear in the LP.
pub fn value_function(
    x: f64,
    claim: &[f64],
    cone: &MartingaleCone,
    certificate: &NaCertificate,
    polytope: &ModelPolytope,
) -> Result<ValuePoint, EngineError> {
    if !certificate.certified {
        return Err(EngineError::uncertified(
            "the value function requires a certified arbitrage-free market",
        ));
    }
    if x < 0.0 {
        return Err(EngineError::config("capital must be nonnegative"));
    }
    if claim.len() != cone.num_paths() || polytope.num_paths() != cone.num_paths() {
        return Err(EngineError::structural("vector length mismatch"));
    }
    let s = cone.num_supported();
    let f: Vec<f64> = cone.paths.iter().map(|&p| claim[p]).collect();

    let mut lp = LinearProgram::new();
    // t_p, one per supported path
    for _ in 0..s {
        lp.add_var(1.0, 0.0, f64::INFINITY);
    }
    // model block
    let model_vars = match &polytope.rep {
        PolytopeRep::HRep(c) => {
            let first = lp.num_vars();
            for &p in &cone.paths {
                lp.add_var(0.0, c.path_lower[p].max(0.0), c.path_upper[p]);
            }
            ModelVars::Direct(first)
        }
        PolytopeRep::Vertices(vs) => {
            let first = lp.num_vars();
            for _ in 0..vs.len() {
                lp.add_var(0.0, 0.0, f64::INFINITY);
            }
            ModelVars::Weights(first)
        }
    };
    // mu_p, one per supported path; the objective carries x * sum(mu)
    let mu0 = lp.num_vars();
    for _ in 0..s {
        lp.add_var(x, 0.0, f64::INFINITY);
    }

    // coupling rows first, so their duals are le_duals[0..s]
    for pos in 0..s {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(4);
        match &model_vars {
            ModelVars::Direct(first) => terms.push((first + pos, 1.0)),
            ModelVars::Weights(first) => {
                if let PolytopeRep::Vertices(vs) = &polytope.rep {
                    for (v, vert) in vs.iter().enumerate() {
                        let c = vert[cone.paths[pos]];
                        if c != 0.0 {
                            terms.push((first + v, c));
                        }
                    }
                }
            }
        }
        if f[pos] != 0.0 {
            terms.push((mu0 + pos, -f[pos]));
        }
        terms.push((pos, -1.0));
        lp.add_le(terms, 0.0);
    }
    // model normalization and constraint rows
    match &model_vars {
        ModelVars::Direct(first) => {
            lp.add_eq((0..s).map(|pos| (first + pos, 1.0)).collect(), 1.0);
            if let PolytopeRep::HRep(c) = &polytope.rep {
                for r in &c.regions {
                    let terms: Vec<(usize, f64)> = r
                        .paths
                        .iter()
                        .filter_map(|p| cone.position(*p).map(|pos| (first + pos, 1.0)))
                        .collect();
                    if r.at_least {
                        lp.add_ge(terms, r.bound);
                    } else {
                        lp.add_le(terms, r.bound);
                    }
                }
            }
        }
        ModelVars::Weights(first) => {
            if let PolytopeRep::Vertices(vs) = &polytope.rep {
                lp.add_eq((0..vs.len()).map(|v| (first + v, 1.0)).collect(), 1.0);
            }
        }
    }
    // homogeneous cone rows over mu
    for row in cone.node_rows.iter().chain(cone.option_rows.iter()) {
        lp.add_eq(row.iter().map(|&(pos, c)| (mu0 + pos, c)).collect(), 0.0);
    }

    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(EngineError::solver(format!(
            "value LP ended with status {:?}",
            sol.status
        )));
    }

    let mu_support: Vec<f64> = (0..s).map(|pos| sol.primal[mu0 + pos]).collect();
    let a_star: f64 = mu_support.iter().sum();
    let model_support: Vec<f64> = match &model_vars {
        ModelVars::Direct(first) => (0..s).map(|pos| sol.primal[first + pos]).collect(),
        ModelVars::Weights(first) => {
            let PolytopeRep::Vertices(vs) = &polytope.rep else {
                unreachable!()
            };
            let mut out = vec![0.0; s];
            for (v, vert) in vs.iter().enumerate() {
                let w = sol.primal[first + v];
                if w != 0.0 {
                    for (pos, &p) in cone.paths.iter().enumerate() {
                        out[pos] += w * vert[p];
                    }
                }
            }
            out
        }
    };

    // Optimal test from the coupling-row duals; the rows are <= rows of a
    // minimization, so the duals are nonpositive and psi = -dual.
    let mut psi = vec![1.0; cone.num_paths()];
    if a_star > A_STAR_TOL {
        for pos in 0..s {
            let raw = (-sol.le_duals[pos]).clamp(0.0, 1.0);
            psi[cone.paths[pos]] = if f[pos] == 0.0 { 1.0 } else { raw };
        }
    }

    Ok(ValuePoint {
        capital: x,
        value: sol.objective.clamp(0.0, 1.0 + 1e-9),
        a_star,
        model_star: cone.expand(&model_support),
        measure_star: cone.expand(&mu_support),
        test: SuccessTest { values: psi },
    })
}

/// Independent verification of the saddle-point conditions at a solved
/// [`ValuePoint`]: the scaled measure maximizes the budget, the model
/// minimizes the expected test, and the budget identity holds.
#[derive(Debug, Clone)]
pub struct SaddleReport {
    /// Conditions are vacuous when the optimal scale is zero.
    pub vacuous: bool,
    /// `max_G E[G F psi] - E[G* F psi]` (one LP over the normalized cone).
    pub measure_gap: f64,
    /// `E[Z* psi] - min_Z E[Z psi]` (one optimization over the polytope).
    pub model_gap: f64,
    /// `|E[G* F psi] - x|`.
    pub budget_gap: f64,
    pub pass: bool,
}

pub fn verify_saddle(
    point: &ValuePoint,
    claim: &[f64],
    cone: &MartingaleCone,
    polytope: &ModelPolytope,
    tol: f64,
) -> Result<SaddleReport, EngineError> {
    if point.a_star <= A_STAR_TOL {
        return Ok(SaddleReport {
            vacuous: true,
            measure_gap: 0.0,
            model_gap: 0.0,
            budget_gap: 0.0,
            pass: true,
        });
    }
    let psi = &point.test.values;

    // (i) maximize E[G F psi] over the normalized cone
    let s = cone.num_supported();
    let mut lp = LinearProgram::new();
    for &p in &cone.paths {
        lp.add_var(-claim[p] * psi[p], 0.0, f64::INFINITY);
    }
    for row in cone.node_rows.iter().chain(cone.option_rows.iter()) {
        lp.add_eq(row.clone(), 0.0);
    }
    lp.add_eq((0..s).map(|pos| (pos, 1.0)).collect(), 1.0);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(EngineError::solver("saddle check (i) LP failed"));
    }
    let best_budget = -sol.objective;
    let g_budget: f64 = cone
        .paths
        .iter()
        .map(|&p| point.measure_star[p] / point.a_star * claim[p] * psi[p])
        .sum();
    let measure_gap = best_budget - g_budget;

    // (ii) minimize E[Z psi] over the model polytope
    let best_model = polytope.minimize_linear(psi)?;
    let z_value: f64 = cone
        .paths
        .iter()
        .map(|&p| point.model_star[p] * psi[p])
        .sum();
    let model_gap = z_value - best_model;

    // (iii) budget identity
    let budget_gap = (g_budget - point.capital).abs();

    Ok(SaddleReport {
        vacuous: false,
        measure_gap,
        model_gap,
        budget_gap,
        pass: measure_gap.abs() <= tol && model_gap.abs() <= tol && budget_gap <= tol,
    })
}

/// Quantile hedging price: the smallest capital whose maximum worst-case
/// expected success ratio reaches `alpha`.
///
/// Inverts the concave value curve with a bracket search on
/// `[0, superhedging price]`; subgradient (Newton) proposals from the upper
/// end accelerate plain bisection, midpoint steps guarantee geometric
/// shrinkage, and the search stops once the bracket is narrower than `tol`.
#[allow(clippy::too_many_arguments)]
pub fn invert_price(
    alpha: f64,
    claim: &[f64],
    lattice: &PathLattice,
    options: &[OptionSpec],
    cone: &MartingaleCone,
    certificate: &NaCertificate,
    polytope: &ModelPolytope,
    tol: f64,
) -> Result<QuantilePriceResult, EngineError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EngineError::config("alpha must lie in [0, 1]"));
    }
    if !(tol > 0.0) {
        return Err(EngineError::config("tolerance must be positive"));
    }
    let sup_price = pricing::superhedge_price(cone, certificate, claim)?;

    let finish = |price: f64, point: ValuePoint| -> Result<QuantilePriceResult, EngineError> {
        let psi = &point.test.values;
        let modified: Vec<f64> = claim.iter().zip(psi).map(|(f, p)| f * p).collect();
        let d_bound = cone.paths.iter().map(|&p| claim[p]).fold(0.0f64, f64::max);
        let support: Vec<bool> = {
            let mut m = vec![false; cone.num_paths()];
            for &p in &cone.paths {
                m[p] = true;
            }
            m
        };
        let spreads = option_spreads(lattice, options, &support)?;
        let (h_box, q_box) = strategy_box_bounds(
            lattice,
            d_bound,
            default_min_move(lattice),
            &spreads,
            Q_BOX_MULTIPLIER,
        )?;
        let strategy = pricing::superhedge_strategy(
            lattice,
            options,
            cone,
            certificate,
            &modified,
            h_box,
            q_box,
        )?;
        let achieved = polytope.minimize_linear(psi)?;
        Ok(QuantilePriceResult {
            alpha,
            price,
            modified_claim: modified,
            strategy,
            achieved_ratio: achieved,
            value_point: point,
        })
    };

    // alpha at or below the zero-capital value: the infimum convention gives 0
    let at_zero = value_function(0.0, claim, cone, certificate, polytope)?;
    if alpha <= at_zero.value + VALUE_TOL {
        return finish(0.0, at_zero);
    }
    let at_sup = value_function(sup_price, claim, cone, certificate, polytope)?;
    if alpha > at_sup.value + 1e-6 {
        return Err(EngineError::solver(format!(
            "target ratio {} exceeds the attainable maximum {} at the superhedging price",
            alpha, at_sup.value
        )));
    }

    let mut lo = 0.0f64;
    let mut hi = sup_price;
    let mut hi_point = at_sup;
    let mut use_newton = true;
    while hi - lo > tol {
        let width = hi - lo;
        let mut x_next = if use_newton && hi_point.a_star > A_STAR_TOL {
            // the tangent from the upper end undershoots the root of V(x) = alpha
            hi - (hi_point.value - alpha) / hi_point.a_star
        } else {
            lo + 0.5 * width
        };
        // keep proposals strictly inside and guarantee shrinkage
        if !(x_next > lo && x_next < hi) || (hi - x_next) < 0.05 * width {
            x_next = lo + 0.5 * width;
        }
        let point = value_function(x_next, claim, cone, certificate, polytope)?;
        if point.value >= alpha - VALUE_TOL {
            hi = x_next;
            hi_point = point;
            use_newton = true;
        } else {
            lo = x_next;
            // tangents keep landing below a stale lo when V is steep near hi;
            // alternate with bisection so both ends keep moving
            use_newton = !use_newton;
        }
    }
    finish(hi, hi_point)
}

/// Quantile price by the direct route: one LP over capital, strategy, and
/// modified claim, with one worst-case ratio row per model vertex. Kept free
/// of any state shared with the value-function path so the two routes
/// cross-check each other.
pub fn direct_price_oracle(
    alpha: f64,
    claim: &[f64],
    lattice: &PathLattice,
    options: &[OptionSpec],
    polytope: &ModelPolytope,
) -> Result<f64, EngineError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EngineError::config("alpha must lie in [0, 1]"));
    }
    let vertices = polytope.vertices()?;
    if vertices.is_empty() {
        return Err(EngineError::structural("model polytope has no vertices"));
    }
    let support = &polytope.support;
    let paths: Vec<usize> = (0..polytope.num_paths()).filter(|&p| support[p]).collect();
    let table = pricing::NodeTable::build(lattice, support);
    let horizon = lattice.horizon();

    let mut lp = LinearProgram::new();
    let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    let mut h_vars: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        h_vars.push(
            table.nodes[t]
                .iter()
                .map(|_| lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY))
                .collect(),
        );
    }
    let q_vars: Vec<usize> = options
        .iter()
        .map(|_| lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let fprime0 = lp.num_vars();
    for &p in &paths {
        lp.add_var(0.0, 0.0, claim[p].max(0.0));
    }

    let option_values: Vec<Vec<f64>> = options
        .iter()
        .map(|o| lattice.payoff_values(&o.payoff))
        .collect::<Result<_, _>>()?;

    for (k, &p) in paths.iter().enumerate() {
        let mut terms = vec![(x, 1.0), (fprime0 + k, -1.0)];
        let prices = lattice.path_prices(p);
        let mut prev = 1.0;
        for (t, &price) in prices.iter().enumerate() {
            let node = lattice.node_of_path(p, t);
            let ord = table.ordinal(t, node).unwrap();
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
        lp.add_ge(terms, 0.0);
    }
    // worst-case expected success ratio across vertices
    for v in &vertices {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut zero_claim_mass = 0.0;
        for (k, &p) in paths.iter().enumerate() {
            if claim[p] > 0.0 {
                if v[p] != 0.0 {
                    terms.push((fprime0 + k, v[p] / claim[p]));
                }
            } else {
                zero_claim_mass += v[p];
            }
        }
        lp.add_ge(terms, alpha - zero_claim_mass);
    }

    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Err(EngineError::uncertified(
            "direct price LP is unbounded; the market admits arbitrage",
        )),
        LpStatus::Infeasible => Err(EngineError::solver("direct price LP infeasible")),
    }
}

/// Minimal capital reaching ratio `alpha` by dynamic stock trading plus the
/// frozen endowment `q * phi` at maturity (no option-price term). The full
/// semi-static price is recovered as the infimum of
/// `split_price(alpha, q) + q . p` over option positions `q`.
pub fn split_price(
    alpha: f64,
    q_fixed: &[f64],
    claim: &[f64],
    lattice: &PathLattice,
    options: &[OptionSpec],
    polytope: &ModelPolytope,
) -> Result<f64, EngineError> {
    if q_fixed.len() != options.len() {
        return Err(EngineError::structural(
            "fixed position vector must match the option count",
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EngineError::config("alpha must lie in [0, 1]"));
    }
    let vertices = polytope.vertices()?;
    let support = &polytope.support;
    let paths: Vec<usize> = (0..polytope.num_paths()).filter(|&p| support[p]).collect();
    let table = pricing::NodeTable::build(lattice, support);
    let horizon = lattice.horizon();

    let option_values: Vec<Vec<f64>> = options
        .iter()
        .map(|o| lattice.payoff_values(&o.payoff))
        .collect::<Result<_, _>>()?;

    let mut lp = LinearProgram::new();
    let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    let mut h_vars: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        h_vars.push(
            table.nodes[t]
                .iter()
                .map(|_| lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY))
                .collect(),
        );
    }
    let fprime0 = lp.num_vars();
    for &p in &paths {
        lp.add_var(0.0, 0.0, claim[p].max(0.0));
    }
    for (k, &p) in paths.iter().enumerate() {
        let endowment: f64 = q_fixed
            .iter()
            .zip(&option_values)
            .map(|(q, vals)| q * vals[p])
            .sum();
        let mut terms = vec![(x, 1.0), (fprime0 + k, -1.0)];
        let prices = lattice.path_prices(p);
        let mut prev = 1.0;
        for (t, &price) in prices.iter().enumerate() {
            let node = lattice.node_of_path(p, t);
            let ord = table.ordinal(t, node).unwrap();
            let coeff = price - prev;
            if coeff != 0.0 {
                terms.push((h_vars[t][ord], coeff));
            }
            prev = price;
        }
        lp.add_ge(terms, -endowment);
    }
    for v in &vertices {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut zero_claim_mass = 0.0;
        for (k, &p) in paths.iter().enumerate() {
            if claim[p] > 0.0 {
                if v[p] != 0.0 {
                    terms.push((fprime0 + k, v[p] / claim[p]));
                }
            } else {
                zero_claim_mass += v[p];
            }
        }
        lp.add_ge(terms, alpha - zero_claim_mass);
    }

    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Err(EngineError::uncertified(
            "split price LP is unbounded; the stock market alone admits arbitrage",
        )),
        LpStatus::Infeasible => Err(EngineError::solver("split price LP infeasible")),
    }
}
