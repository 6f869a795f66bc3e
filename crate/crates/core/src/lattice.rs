//! Dyadic path lattice: the discretized path space of one stock.
//!
//! Prices live on the grid `{ i / 2^n }` intersected with per-period bounds
//! `[a_t, b_t]`. Grid values are stored as integer numerators at scale
//! `2^-n`, so grid membership, cell endpoints, and the open/closed endpoint
//! conventions are exact integer comparisons, never float tolerance checks.
//!
//! Around each lattice path sits a product of half-width `2^-(n+1)` cells
//! that partitions the continuum path space; [`PathLattice::snap`] maps any
//! in-bounds continuum path to the unique lattice path whose cell contains it.

use crate::error::EngineError;

/// Payoff of a contingent claim or option, as a function of the price path
/// `S_1..S_T` (with `S_0 = 1` implicit).
///
/// The parametric kinds extend to arbitrary real paths; `Table` carries one
/// value per lattice path and is only defined on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum PayoffSpec {
    Call { strike: f64 },
    Put { strike: f64 },
    Power { exponent: f64 },
    LookbackMax,
    Table(Vec<f64>),
}

impl PayoffSpec {
    /// Evaluates the payoff on an arbitrary price path (lattice or continuum).
    ///
    /// `Table` payoffs have no off-lattice extension and yield a domain error;
    /// evaluate those through [`PathLattice::payoff_values`].
    pub fn evaluate(&self, prices: &[f64]) -> Result<f64, EngineError> {
        if prices.is_empty() {
            return Err(EngineError::domain("empty price path"));
        }
        let terminal = *prices.last().unwrap();
        Ok(match self {
            PayoffSpec::Call { strike } => (terminal - strike).max(0.0),
            PayoffSpec::Put { strike } => (strike - terminal).max(0.0),
            PayoffSpec::Power { exponent } => terminal.powf(*exponent),
            PayoffSpec::LookbackMax => prices.iter().fold(1.0f64, |a, &b| a.max(b)),
            PayoffSpec::Table(_) => {
                return Err(EngineError::domain(
                    "table payoff queried with a non-lattice path",
                ))
            }
        })
    }

    /// A Lipschitz constant of the payoff in the sup-norm on paths confined
    /// to `[lo, hi]` per period. `None` for table payoffs.
    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> Option<f64> {
        match self {
            PayoffSpec::Call { .. } | PayoffSpec::Put { .. } | PayoffSpec::LookbackMax => Some(1.0),
            PayoffSpec::Power { exponent } => {
                let m = lo.abs().max(hi.abs());
                Some(exponent.abs() * m.powf(exponent - 1.0))
            }
            PayoffSpec::Table(_) => None,
        }
    }
}

/// A statically traded option: payoff plus its market price.
#[derive(Debug, Clone)]
pub struct OptionSpec {
    pub payoff: PayoffSpec,
    pub price: f64,
}

/// Full description of one market instance.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    /// Number of trading periods `T >= 1`.
    pub horizon: usize,
    /// Discretization level `n >= 1`; the grid step is `2^-n`.
    pub level: u32,
    /// Price bounds `(a_t, b_t)` for `t = 0..=T`, with `a_0 = b_0 = 1`.
    pub bounds: Vec<(f64, f64)>,
    /// Weight of the arbitrage-removing kernel modification.
    pub lambda: f64,
    /// Statically traded options.
    pub options: Vec<OptionSpec>,
    /// The claim to hedge.
    pub claim: PayoffSpec,
}

/// One cell interval `K(x, y)` with exact endpoints at scale `2^-(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellInterval {
    /// Numerator of the left endpoint at scale `2^-(n+1)`.
    pub lo_num: i64,
    /// Numerator of the right endpoint at scale `2^-(n+1)`.
    pub hi_num: i64,
    pub lo_open: bool,
    pub hi_open: bool,
    /// `2^(n+1)`, the denominator of the endpoint numerators.
    pub denom: f64,
}

impl CellInterval {
    pub fn lo(&self) -> f64 {
        self.lo_num as f64 / self.denom
    }
    pub fn hi(&self) -> f64 {
        self.hi_num as f64 / self.denom
    }
    /// Exact membership test.
    pub fn contains(&self, v: f64) -> bool {
        let w = v * self.denom;
        let above = if self.lo_open {
            w > self.lo_num as f64
        } else {
            w >= self.lo_num as f64
        };
        let below = if self.hi_open {
            w < self.hi_num as f64
        } else {
            w <= self.hi_num as f64
        };
        above && below
    }
}

/// The discretized path space: per-period grids and the lexicographic path
/// enumeration every downstream vector (probabilities, tests, payoffs) uses.
///
/// Immutable after construction; all queries are pure.
#[derive(Debug, Clone)]
pub struct PathLattice {
    level: u32,
    horizon: usize,
    /// Grid numerators of `a_t`/`b_t` at scale `2^-n`, index `t-1` for `t = 1..=T`.
    lo: Vec<i64>,
    hi: Vec<i64>,
    sizes: Vec<usize>,
    /// `path_index = sum_t grid_idx_t * stride[t-1]`, last period fastest.
    strides: Vec<usize>,
    num_paths: usize,
}

impl PathLattice {
    /// Builds the lattice for `spec`, validating the bound chain, the grid
    /// membership of every bound, and nonnegativity of the claim.
    pub fn build(spec: &MarketSpec) -> Result<Self, EngineError> {
        if spec.horizon < 1 {
            return Err(EngineError::config("horizon must be at least 1"));
        }
        if spec.level < 1 {
            return Err(EngineError::config("discretization level must be at least 1"));
        }
        if spec.level > 40 {
            return Err(EngineError::resource("discretization level capped at 40"));
        }
        if spec.bounds.len() != spec.horizon + 1 {
            return Err(EngineError::config(format!(
                "expected {} bound pairs for horizon {}, got {}",
                spec.horizon + 1,
                spec.horizon,
                spec.bounds.len()
            )));
        }
        if spec.bounds[0] != (1.0, 1.0) {
            return Err(EngineError::config("bounds at t = 0 must be (1, 1)"));
        }
        if !(spec.lambda > 0.0) {
            return Err(EngineError::config("lambda must be positive"));
        }
        let scale = f64::powi(2.0, spec.level as i32);
        let to_num = |v: f64, name: &str| -> Result<i64, EngineError> {
            let w = v * scale;
            if !w.is_finite() || w != w.round() {
                return Err(EngineError::config(format!(
                    "bound {} = {} is not on the 2^-{} grid",
                    name, v, spec.level
                )));
            }
            Ok(w.round() as i64)
        };
        let mut lo = Vec::with_capacity(spec.horizon);
        let mut hi = Vec::with_capacity(spec.horizon);
        for t in 1..=spec.horizon {
            let (a, b) = spec.bounds[t];
            if a < 0.0 {
                return Err(EngineError::config(format!("a_{} must be nonnegative", t)));
            }
            lo.push(to_num(a, &format!("a_{}", t))?);
            hi.push(to_num(b, &format!("b_{}", t))?);
        }
        // 0 <= a_T < ... < a_1 < a_0 = 1 = b_0 < b_1 < ... < b_T
        let one = scale as i64;
        let mut prev_lo = one;
        let mut prev_hi = one;
        for t in 1..=spec.horizon {
            if lo[t - 1] >= prev_lo {
                return Err(EngineError::config(format!(
                    "lower bounds must strictly decrease: a_{} >= a_{}",
                    t,
                    t - 1
                )));
            }
            if hi[t - 1] <= prev_hi {
                return Err(EngineError::config(format!(
                    "upper bounds must strictly increase: b_{} <= b_{}",
                    t,
                    t - 1
                )));
            }
            prev_lo = lo[t - 1];
            prev_hi = hi[t - 1];
        }
        let sizes: Vec<usize> = (0..spec.horizon)
            .map(|t| (hi[t] - lo[t]) as usize + 1)
            .collect();
        let mut num_paths: usize = 1;
        for &s in &sizes {
            num_paths = num_paths
                .checked_mul(s)
                .filter(|&p| p <= 50_000_000)
                .ok_or_else(|| EngineError::resource("path count exceeds 5e7"))?;
        }
        let mut strides = vec![1usize; spec.horizon];
        for t in (0..spec.horizon.saturating_sub(1)).rev() {
            strides[t] = strides[t + 1] * sizes[t + 1];
        }
        let lattice = PathLattice {
            level: spec.level,
            horizon: spec.horizon,
            lo,
            hi,
            sizes,
            strides,
            num_paths,
        };
        // Claims must be nonnegative and finite on every lattice path.
        let claim = lattice.payoff_values(&spec.claim)?;
        for (p, v) in claim.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(EngineError::config(format!(
                    "claim value {} on path {} is not a nonnegative real",
                    v, p
                )));
            }
        }
        Ok(lattice)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Grid step `2^-n`.
    pub fn grid_step(&self) -> f64 {
        f64::powi(2.0, -(self.level as i32))
    }

    /// Cell half-width `2^-(n+1)`.
    pub fn cell_half_width(&self) -> f64 {
        f64::powi(2.0, -(self.level as i32 + 1))
    }

    /// Number of grid points at period `t` (1-based).
    pub fn grid_size(&self, t: usize) -> usize {
        self.sizes[t - 1]
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    /// Grid value at period `t` (1-based), grid index `idx`.
    pub fn grid_value(&self, t: usize, idx: usize) -> f64 {
        let scale = f64::powi(2.0, self.level as i32);
        (self.lo[t - 1] + idx as i64) as f64 / scale
    }

    /// Grid numerator (scale `2^-n`) at period `t`, grid index `idx`.
    pub fn grid_numerator(&self, t: usize, idx: usize) -> i64 {
        self.lo[t - 1] + idx as i64
    }

    /// Bounds `(a_t, b_t)` at period `t` (1-based).
    pub fn bounds(&self, t: usize) -> (f64, f64) {
        let scale = f64::powi(2.0, self.level as i32);
        (
            self.lo[t - 1] as f64 / scale,
            self.hi[t - 1] as f64 / scale,
        )
    }

    /// Per-period grid indices of a path.
    pub fn path_grid_indices(&self, path: usize) -> Vec<usize> {
        debug_assert!(path < self.num_paths);
        let mut rest = path;
        (0..self.horizon)
            .map(|t| {
                let idx = rest / self.strides[t];
                rest %= self.strides[t];
                idx
            })
            .collect()
    }

    /// Price path `S_1..S_T` of a lattice path.
    pub fn path_prices(&self, path: usize) -> Vec<f64> {
        self.path_grid_indices(path)
            .iter()
            .enumerate()
            .map(|(t, &idx)| self.grid_value(t + 1, idx))
            .collect()
    }

    /// Path index from per-period grid indices.
    pub fn path_from_indices(&self, indices: &[usize]) -> usize {
        debug_assert_eq!(indices.len(), self.horizon);
        indices
            .iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    /// The product cell `J(path)`: one interval per period with the exact
    /// open/closed endpoint conventions (closed-closed when the price is
    /// unchanged, open-closed after an up move, closed-open after a down move).
    pub fn cell(&self, path: usize) -> Vec<CellInterval> {
        let denom = f64::powi(2.0, self.level as i32 + 1);
        let mut prev = 1i64 << self.level; // numerator of S_0 = 1 at scale 2^-n
        self.path_grid_indices(path)
            .iter()
            .enumerate()
            .map(|(t, &idx)| {
                let g = self.grid_numerator(t + 1, idx);
                let iv = CellInterval {
                    lo_num: 2 * g - 1,
                    hi_num: 2 * g + 1,
                    lo_open: g > prev,
                    hi_open: g < prev,
                    denom,
                };
                prev = g;
                iv
            })
            .collect()
    }

    /// Snaps a continuum path (within the per-period bounds) to the unique
    /// lattice path whose cell contains it.
    pub fn snap(&self, prices: &[f64]) -> Result<usize, EngineError> {
        if prices.len() != self.horizon {
            return Err(EngineError::domain(format!(
                "path has {} coordinates, lattice horizon is {}",
                prices.len(),
                self.horizon
            )));
        }
        let scale = f64::powi(2.0, self.level as i32);
        let mut prev = 1i64 << self.level;
        let mut indices = Vec::with_capacity(self.horizon);
        for (t, &v) in prices.iter().enumerate() {
            let lo = self.lo[t];
            let hi = self.hi[t];
            let lo_f = lo as f64 / scale;
            let hi_f = hi as f64 / scale;
            if !(v >= lo_f && v <= hi_f) {
                return Err(EngineError::domain(format!(
                    "coordinate {} = {} outside [{}, {}]",
                    t + 1,
                    v,
                    lo_f,
                    hi_f
                )));
            }
            let w = v * scale * 2.0; // exact power-of-two scaling
            let g = if w == w.round() && (w.round() as i64).rem_euclid(2) != 0 {
                // Exactly on a cell boundary 2g+1: the boundary belongs to the
                // lower cell iff that cell is closed above, i.e. iff its grid
                // point is at or above the previous price.
                let below = ((w.round() as i64) - 1) / 2;
                if below >= prev {
                    below
                } else {
                    below + 1
                }
            } else {
                (w / 2.0).round() as i64
            };
            debug_assert!(g >= lo && g <= hi);
            indices.push((g - lo) as usize);
            prev = g;
        }
        Ok(self.path_from_indices(&indices))
    }

    /// Evaluates a payoff on every lattice path, in path order.
    pub fn payoff_values(&self, payoff: &PayoffSpec) -> Result<Vec<f64>, EngineError> {
        if let PayoffSpec::Table(values) = payoff {
            if values.len() != self.num_paths {
                return Err(EngineError::config(format!(
                    "table payoff has {} entries, lattice has {} paths",
                    values.len(),
                    self.num_paths
                )));
            }
            return Ok(values.clone());
        }
        (0..self.num_paths)
            .map(|p| payoff.evaluate(&self.path_prices(p)))
            .collect()
    }

    /// Payoff on a single lattice path (table payoffs included).
    pub fn evaluate_payoff(&self, payoff: &PayoffSpec, path: usize) -> Result<f64, EngineError> {
        if path >= self.num_paths {
            return Err(EngineError::domain("path index out of range"));
        }
        match payoff {
            PayoffSpec::Table(values) => {
                if values.len() != self.num_paths {
                    return Err(EngineError::config("table payoff has the wrong length"));
                }
                Ok(values[path])
            }
            other => other.evaluate(&self.path_prices(path)),
        }
    }

    /// Number of nodes (distinct partial paths) at time `t`, `0..=T`;
    /// `t = 0` is the root.
    pub fn num_nodes(&self, t: usize) -> usize {
        self.sizes[..t].iter().product()
    }

    /// Node index at time `t` of the prefix of `path` (mixed radix over the
    /// first `t` grid indices).
    pub fn node_of_path(&self, path: usize, t: usize) -> usize {
        let idx = self.path_grid_indices(path);
        let mut node = 0usize;
        for s in 0..t {
            node = node * self.sizes[s] + idx[s];
        }
        node
    }

    /// Grid indices of the prefix encoded by a node index at time `t`.
    pub fn node_grid_indices(&self, node: usize, t: usize) -> Vec<usize> {
        let mut rest = node;
        let mut out = vec![0usize; t];
        for s in (0..t).rev() {
            out[s] = rest % self.sizes[s];
            rest /= self.sizes[s];
        }
        out
    }

    /// Price of the node's last coordinate (`S_t` at the node); 1 at the root.
    pub fn node_price(&self, node: usize, t: usize) -> f64 {
        if t == 0 {
            return 1.0;
        }
        let idx = self.node_grid_indices(node, t);
        self.grid_value(t, idx[t - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_t1(level: u32) -> MarketSpec {
        MarketSpec {
            horizon: 1,
            level,
            bounds: vec![(1.0, 1.0), (0.5, 1.5)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        }
    }

    #[test]
    fn grid_counts() {
        let l1 = PathLattice::build(&spec_t1(1)).unwrap();
        assert_eq!(l1.grid_size(1), 3);
        assert_eq!(l1.num_paths(), 3);
        assert_eq!(l1.path_prices(0), vec![0.5]);
        assert_eq!(l1.path_prices(2), vec![1.5]);

        let l2 = PathLattice::build(&spec_t1(2)).unwrap();
        assert_eq!(l2.grid_size(1), 5);
        let vals: Vec<f64> = (0..5).map(|i| l2.grid_value(1, i)).collect();
        assert_eq!(vals, vec![0.5, 0.75, 1.0, 1.25, 1.5]);
    }

    #[test]
    fn two_period_path_count() {
        let spec = MarketSpec {
            horizon: 2,
            level: 2,
            bounds: vec![(1.0, 1.0), (0.5, 1.5), (0.25, 1.75)],
            lambda: 0.01,
            options: vec![],
            claim: PayoffSpec::Power { exponent: 2.0 },
        };
        let l = PathLattice::build(&spec).unwrap();
        assert_eq!(l.grid_size(1), 5);
        assert_eq!(l.grid_size(2), 7);
        assert_eq!(l.num_paths(), 35);
        // lexicographic ordering: last period fastest
        assert_eq!(l.path_grid_indices(0), vec![0, 0]);
        assert_eq!(l.path_grid_indices(7), vec![1, 0]);
        assert_eq!(l.num_nodes(0), 1);
        assert_eq!(l.num_nodes(1), 5);
        assert_eq!(l.node_of_path(7, 1), 1);
    }

    #[test]
    fn off_grid_bound_rejected() {
        let mut spec = spec_t1(1);
        spec.bounds[1] = (0.5, 1.3);
        let err = PathLattice::build(&spec).unwrap_err();
        assert!(err.to_string().contains("b_1"), "{}", err);
    }

    #[test]
    fn cell_conventions() {
        let l = PathLattice::build(&spec_t1(2)).unwrap();
        // grid {0.5, 0.75, 1.0, 1.25, 1.5}; previous price is S_0 = 1
        let same = l.cell(2)[0];
        assert_eq!((same.lo(), same.hi()), (0.875, 1.125));
        assert!(!same.lo_open && !same.hi_open);

        let up = l.cell(3)[0];
        assert_eq!((up.lo(), up.hi()), (1.125, 1.375));
        assert!(up.lo_open && !up.hi_open);

        let down = l.cell(1)[0];
        assert_eq!((down.lo(), down.hi()), (0.625, 0.875));
        assert!(!down.lo_open && down.hi_open);
    }

    #[test]
    fn snap_examples() {
        let l = PathLattice::build(&spec_t1(2)).unwrap();
        assert_eq!(l.path_prices(l.snap(&[1.0]).unwrap()), vec![1.0]);
        assert_eq!(l.path_prices(l.snap(&[1.126]).unwrap()), vec![1.25]);
        // 1.125 sits on the boundary of the closed y = x cell
        assert_eq!(l.path_prices(l.snap(&[1.125]).unwrap()), vec![1.0]);
        assert!(l.snap(&[1.6]).is_err());
    }

    #[test]
    fn snap_boundary_matches_exhaustive_membership() {
        let l = PathLattice::build(&spec_t1(2)).unwrap();
        for v in [0.5, 0.625, 0.875, 1.125, 1.375, 1.4999, 1.5] {
            let snapped = l.snap(&[v]).unwrap();
            let mut owners = 0;
            for p in 0..l.num_paths() {
                if l.cell(p)[0].contains(v) {
                    owners += 1;
                    assert_eq!(p, snapped, "value {} snapped to the wrong cell", v);
                }
            }
            assert_eq!(owners, 1, "value {} must lie in exactly one cell", v);
        }
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(
            PayoffSpec::Power { exponent: 2.0 }.evaluate(&[1.5]).unwrap(),
            2.25
        );
        assert_eq!(
            PayoffSpec::Put { strike: 0.75 }.evaluate(&[0.5]).unwrap(),
            0.25
        );
        assert_eq!(
            PayoffSpec::Put { strike: 1.0 }.evaluate(&[1.25]).unwrap(),
            0.0
        );
        assert_eq!(
            PayoffSpec::LookbackMax.evaluate(&[0.75, 0.5]).unwrap(),
            1.0
        );
        assert!(PayoffSpec::Table(vec![1.0]).evaluate(&[1.0]).is_err());
    }

    #[test]
    fn negative_claim_rejected() {
        let mut spec = spec_t1(1);
        spec.claim = PayoffSpec::Table(vec![0.0, -0.5, 1.0]);
        assert!(PathLattice::build(&spec).is_err());
    }
}
