//! Bridging lattice results back to the original market.
//!
//! A lattice strategy extends to arbitrary continuum paths piecewise
//! constantly: positions are read off the snapped lattice path while price
//! increments stay the real ones. The discretization error of the resulting
//! hedge is controlled by `M / 2^n` with
//! `M = C1 (T + C2 k) + C3` built from the strategy bound and the Lipschitz
//! constants of options and claim; under kernel modification the target
//! ratio additionally moves from `alpha` to
//! `alpha' = alpha + 1 - (1/(1+lambda))^T`.

use crate::error::EngineError;
use crate::lattice::{OptionSpec, PathLattice, PayoffSpec};
use crate::models::AtomicBaseModel;
use crate::pricing::Strategy;

/// A lattice strategy together with its piecewise-constant extension rule.
#[derive(Debug, Clone)]
pub struct ExtendedStrategy {
    pub strategy: Strategy,
    pub lattice: PathLattice,
}

impl ExtendedStrategy {
    pub fn new(strategy: Strategy, lattice: &PathLattice) -> Self {
        ExtendedStrategy {
            strategy,
            lattice: lattice.clone(),
        }
    }

    /// Stock positions along a continuum path: the positions of the snapped
    /// lattice path (identical on lattice paths; zero beyond unsupported
    /// prefixes by construction of the underlying strategy).
    pub fn positions(&self, prices: &[f64]) -> Result<Vec<f64>, EngineError> {
        let snapped = self.lattice.snap(prices)?;
        Ok((0..self.lattice.horizon())
            .map(|t| self.strategy.stock[t][self.lattice.node_of_path(snapped, t)])
            .collect())
    }

    /// Terminal gain `(H . S)_T + q(phi - p)` on a continuum path, with real
    /// price increments and real option payoffs.
    pub fn gain(&self, options: &[OptionSpec], prices: &[f64]) -> Result<f64, EngineError> {
        let positions = self.positions(prices)?;
        let mut gain = 0.0;
        let mut prev = 1.0;
        for (h, &price) in positions.iter().zip(prices) {
            gain += h * (price - prev);
            prev = price;
        }
        for (q, opt) in self.strategy.options.iter().zip(options) {
            gain += q * (opt.payoff.evaluate(prices)? - opt.price);
        }
        Ok(gain)
    }
}

/// Joint bound on the strategy's stock and option positions, the `C1` input
/// of [`error_budget`].
pub fn strategy_bound(strategy: &Strategy) -> f64 {
    let h = strategy
        .stock
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let q = strategy
        .options
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    h.max(q)
}

/// The adjusted target ratio `alpha' = alpha + 1 - (1/(1+lambda))^T` that the
/// lattice problem must reach so the extension attains `alpha`.
pub fn target_adjust(alpha: f64, lambda: f64, horizon: usize) -> Result<f64, EngineError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EngineError::config("alpha must lie in [0, 1]"));
    }
    if !(lambda > 0.0) {
        return Err(EngineError::config("lambda must be positive"));
    }
    let adjusted = alpha + 1.0 - (1.0 / (1.0 + lambda)).powi(horizon as i32);
    if adjusted > 1.0 {
        return Err(EngineError::config(format!(
            "adjusted target {} exceeds 1; pick a smaller lambda",
            adjusted
        )));
    }
    Ok(adjusted)
}

/// Discretization-error budget of an extended strategy.
#[derive(Debug, Clone)]
pub struct ErrorBudget {
    /// Lipschitz constant of the claim (`C3`).
    pub claim_lipschitz: f64,
    /// Largest option Lipschitz constant (`C2`).
    pub option_lipschitz: f64,
    /// Joint position bound (`C1`).
    pub strategy_bound: f64,
    pub horizon: usize,
    pub option_count: usize,
    pub level: u32,
    /// `M = C1 (T + C2 k) + C3`.
    pub constant: f64,
    /// `M / 2^n`, the extra capital covering intra-cell displacement.
    pub slack: f64,
    /// Whether the caller asserts the two-sided regime (kernels unmodified
    /// and contained in the original family), which tightens the bound to
    /// `0 <= continuum price - lattice price <= M / 2^n` at `alpha' = alpha`.
    pub two_sided: bool,
}

/// Assembles the error budget from the caller's constants. `two_sided`
/// records an assertion about the model family the engine cannot check for
/// arbitrary families; for atomic base models see
/// [`crate::models::jc_constant`].
pub fn error_budget(
    claim_lipschitz: f64,
    option_lipschitz: f64,
    strategy_bound: f64,
    horizon: usize,
    option_count: usize,
    level: u32,
    two_sided: bool,
) -> Result<ErrorBudget, EngineError> {
    if claim_lipschitz < 0.0 || option_lipschitz < 0.0 || strategy_bound < 0.0 {
        return Err(EngineError::config("Lipschitz constants must be nonnegative"));
    }
    let constant = strategy_bound * (horizon as f64 + option_lipschitz * option_count as f64)
        + claim_lipschitz;
    let slack = constant * f64::powi(2.0, -(level as i32));
    Ok(ErrorBudget {
        claim_lipschitz,
        option_lipschitz,
        strategy_bound,
        horizon,
        option_count,
        level,
        constant,
        slack,
        two_sided,
    })
}

/// Wraps a lattice strategy for continuum evaluation.
pub fn extend_strategy(strategy: &Strategy, lattice: &PathLattice) -> ExtendedStrategy {
    ExtendedStrategy::new(strategy.clone(), lattice)
}

/// Expected success ratios of the extended hedge under atomic base models.
///
/// Per model, the exact expectation of the success ratio of the terminal
/// wealth `x + gain` against the claim, clamping negative wealth to zero so
/// the ratio stays in `[0, 1]`. Returns the per-model ratios and their
/// minimum.
pub fn evaluate_success(
    extended: &ExtendedStrategy,
    capital: f64,
    claim: &PayoffSpec,
    options: &[OptionSpec],
    base_models: &[AtomicBaseModel],
) -> Result<(Vec<f64>, f64), EngineError> {
    let mut ratios = Vec::with_capacity(base_models.len());
    for model in base_models {
        let mut expected = 0.0;
        for (path, w) in &model.atoms {
            if *w == 0.0 {
                continue;
            }
            let wealth = (capital + extended.gain(options, path)?).max(0.0);
            let f = claim.evaluate(path)?;
            let psi = if wealth >= f {
                1.0
            } else {
                wealth / f // f > 0 here since wealth >= 0
            };
            expected += w * psi;
        }
        ratios.push(expected);
    }
    let worst = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok((ratios, worst))
}
