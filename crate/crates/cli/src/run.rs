//! Mode execution and file emission.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use qhedge_core::lattice::{MarketSpec, PathLattice};
use qhedge_core::models::{
    self, induce_kernels, lambda_modify, JointConstraints, ModelPolytope, RegionConstraint,
};
use qhedge_core::pricing::{self, MartingaleCone, NaCertificate, Strategy};
use qhedge_core::quantile::{self, QuantilePriceResult};
use qhedge_core::EngineError;

use crate::config::{Mode, ModelForm, RunConfig};

/// Formats a float with 12 significant digits, the CSV contract.
pub fn fmt12(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v }; // no negative zero in outputs
    format!("{:.11e}", v)
}

/// All lattice-level objects a pricing mode needs, built once per level.
pub struct Pipeline {
    pub lattice: PathLattice,
    pub polytope: ModelPolytope,
    pub cone: MartingaleCone,
    pub certificate: NaCertificate,
    pub claim: Vec<f64>,
}

/// Builds lattice, model polytope, cone, and certificate at the given level.
pub fn build_pipeline(config: &RunConfig, level: u32) -> Result<Pipeline, EngineError> {
    let mut market = config.market.clone();
    market.level = level;
    let lattice = PathLattice::build(&market)?;
    let polytope = build_polytope(&market, &config.model_form, &lattice)?;
    let cone = pricing::build_cone(&lattice, &market.options, &polytope.support)?;
    let certificate = pricing::certify_na(&cone)?;
    let claim = lattice.payoff_values(&market.claim)?;
    Ok(Pipeline {
        lattice,
        polytope,
        cone,
        certificate,
        claim,
    })
}

fn build_polytope(
    market: &MarketSpec,
    form: &ModelForm,
    lattice: &PathLattice,
) -> Result<ModelPolytope, EngineError> {
    match form {
        ModelForm::FullSimplex => Ok(ModelPolytope::full_simplex(lattice)),
        ModelForm::Constraints {
            path_prob_max,
            path_prob_min,
            regions,
        } => {
            let n = lattice.num_paths();
            let mut c = JointConstraints::unconstrained(n);
            if let Some(cap) = path_prob_max {
                c.path_upper = vec![*cap; n];
            }
            if let Some(floor) = path_prob_min {
                c.path_lower = vec![*floor; n];
            }
            for r in regions {
                c.regions.push(RegionConstraint {
                    paths: models::paths_in_price_interval(
                        lattice, r.time, r.lo, r.lo_open, r.hi, r.hi_open,
                    ),
                    at_least: r.at_least,
                    bound: r.bound,
                });
            }
            ModelPolytope::from_constraints(lattice, c)
        }
        ModelForm::Atoms {
            base_models,
            vertex_cap,
        } => {
            let kernels = lambda_modify(&induce_kernels(lattice, base_models)?, market.lambda)?;
            ModelPolytope::from_kernel_products(lattice, &kernels, *vertex_cap)
        }
    }
}

fn require_certified(p: &Pipeline) -> Result<(), EngineError> {
    if !p.certificate.certified {
        return Err(EngineError::uncertified(
            "the lattice market admits arbitrage at this level; a finer discretization \
             (larger n) or consistent option prices are required",
        ));
    }
    Ok(())
}

/// Text and files produced by one run.
pub struct RunOutput {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    /// False only in certify mode on an uncertified market.
    pub certified: bool,
}

/// Executes the configured mode, writing CSV or strategy files when an
/// output path is set and returning the stdout summary.
pub fn run(config: &RunConfig) -> Result<RunOutput, EngineError> {
    let mut out_text = String::new();
    let mut files = Vec::new();
    let mut certified = true;

    let mut emit = |name: &Option<PathBuf>, content: &str, stdout: &mut String| -> Result<(), EngineError> {
        match name {
            Some(path) => {
                fs::write(path, content).map_err(|e| {
                    EngineError::config(format!("cannot write {}: {}", path.display(), e))
                })?;
                files.push(path.clone());
                Ok(())
            }
            None => {
                stdout.push_str(content);
                Ok(())
            }
        }
    };

    match config.mode {
        Mode::Certify => {
            let p = build_pipeline(config, config.market.level)?;
            certified = p.certificate.certified;
            let supported = p.polytope.supported_paths().len();
            writeln!(out_text, "certified {}", p.certificate.certified).unwrap();
            writeln!(out_text, "min_weight {}", fmt12(p.certificate.min_weight)).unwrap();
            writeln!(out_text, "supported_paths {}", supported).unwrap();
            writeln!(out_text, "total_paths {}", p.lattice.num_paths()).unwrap();
            if let Some(path) = &config.out {
                fs::write(path, &out_text).map_err(|e| {
                    EngineError::config(format!("cannot write {}: {}", path.display(), e))
                })?;
                files.push(path.clone());
            }
        }
        Mode::Superhedge => {
            let p = build_pipeline(config, config.market.level)?;
            require_certified(&p)?;
            let price =
                pricing::superhedge_price(&p.cone, &p.certificate, &p.claim)?;
            let strategy = superhedge_strategy_with_default_boxes(config, &p)?;
            writeln!(out_text, "superhedge_price {}", fmt12(price)).unwrap();
            let dump = strategy_dump(&p.lattice, &p.cone, &strategy, &[]);
            emit(&config.out, &dump, &mut out_text)?;
        }
        Mode::CurveAlpha => {
            let p = build_pipeline(config, config.market.level)?;
            require_certified(&p)?;
            let mut csv = String::from("alpha,price,achieved_ratio\n");
            for &alpha in &config.alpha_grid {
                let r = price_at(config, &p, alpha)?;
                writeln!(
                    csv,
                    "{},{},{}",
                    fmt12(alpha),
                    fmt12(r.price),
                    fmt12(r.achieved_ratio)
                )
                .unwrap();
            }
            emit(&config.out, &csv, &mut out_text)?;
        }
        Mode::CurveX => {
            let p = build_pipeline(config, config.market.level)?;
            require_certified(&p)?;
            let mut csv = String::from("x,value,a_star\n");
            for &x in &config.x_grid {
                let vp =
                    quantile::value_function(x, &p.claim, &p.cone, &p.certificate, &p.polytope)?;
                writeln!(csv, "{},{},{}", fmt12(x), fmt12(vp.value), fmt12(vp.a_star)).unwrap();
            }
            emit(&config.out, &csv, &mut out_text)?;
        }
        Mode::Strategy => {
            let p = build_pipeline(config, config.market.level)?;
            require_certified(&p)?;
            let alpha = config.alpha.expect("validated");
            let r = price_at(config, &p, alpha)?;
            let mut header = Vec::new();
            header.push(format!("# alpha {}", fmt12(alpha)));
            header.push(format!("# price {}", fmt12(r.price)));
            header.push(format!("# achieved_ratio {}", fmt12(r.achieved_ratio)));
            let dump = strategy_dump(&p.lattice, &p.cone, &r.strategy, &header);
            emit(&config.out, &dump, &mut out_text)?;
        }
        Mode::OracleCheck => {
            let p = build_pipeline(config, config.market.level)?;
            require_certified(&p)?;
            let mut csv = String::from("alpha,price_inversion,price_direct,abs_gap\n");
            let mut max_gap = 0.0f64;
            for &alpha in &config.alpha_grid {
                let inv = price_at(config, &p, alpha)?;
                let direct = quantile::direct_price_oracle(
                    alpha,
                    &p.claim,
                    &p.lattice,
                    &config.market.options,
                    &p.polytope,
                )?;
                let gap = (inv.price - direct).abs();
                max_gap = max_gap.max(gap);
                writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt12(alpha),
                    fmt12(inv.price),
                    fmt12(direct),
                    fmt12(gap)
                )
                .unwrap();
            }
            emit(&config.out, &csv, &mut out_text)?;
            writeln!(out_text, "max_abs_gap {}", fmt12(max_gap)).unwrap();
        }
        Mode::ConvergenceSweep => {
            let mut csv = String::from("n,alpha,price\n");
            for &level in &config.n_sweep {
                let p = build_pipeline(config, level)?;
                require_certified(&p)?;
                for &alpha in &config.alpha_grid {
                    let r = price_at(config, &p, alpha)?;
                    writeln!(csv, "{},{},{}", level, fmt12(alpha), fmt12(r.price)).unwrap();
                }
            }
            emit(&config.out, &csv, &mut out_text)?;
        }
    }

    Ok(RunOutput {
        stdout: out_text,
        files,
        certified,
    })
}

fn price_at(
    config: &RunConfig,
    p: &Pipeline,
    alpha: f64,
) -> Result<QuantilePriceResult, EngineError> {
    quantile::invert_price(
        alpha,
        &p.claim,
        &p.lattice,
        &config.market.options,
        &p.cone,
        &p.certificate,
        &p.polytope,
        config.tol,
    )
}

fn superhedge_strategy_with_default_boxes(
    config: &RunConfig,
    p: &Pipeline,
) -> Result<Strategy, EngineError> {
    let d_bound = p
        .cone
        .paths
        .iter()
        .map(|&q| p.claim[q])
        .fold(0.0f64, f64::max);
    let spreads =
        pricing::option_spreads(&p.lattice, &config.market.options, &p.polytope.support)?;
    let (h_box, q_box) = pricing::strategy_box_bounds(
        &p.lattice,
        d_bound,
        pricing::default_min_move(&p.lattice),
        &spreads,
        quantile::Q_BOX_MULTIPLIER,
    )?;
    pricing::superhedge_strategy(
        &p.lattice,
        &config.market.options,
        &p.cone,
        &p.certificate,
        &p.claim,
        h_box,
        q_box,
    )
}

/// Structured-text strategy dump: capital, option positions, then one row
/// per supported node with its price prefix.
pub fn strategy_dump(
    lattice: &PathLattice,
    cone: &MartingaleCone,
    strategy: &Strategy,
    header: &[String],
) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str(line);
        out.push('\n');
    }
    writeln!(out, "x {}", fmt12(strategy.initial)).unwrap();
    let q_line = strategy
        .options
        .iter()
        .map(|q| fmt12(*q))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(out, "q {}", q_line).unwrap();
    for (t, nodes) in cone.node_table.nodes.iter().enumerate() {
        for &node in nodes {
            let prefix = if t == 0 {
                "-".to_string()
            } else {
                lattice
                    .node_grid_indices(node, t)
                    .iter()
                    .enumerate()
                    .map(|(s, &idx)| fmt12(lattice.grid_value(s + 1, idx)))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            writeln!(out, "H {} {} {}", t, prefix, fmt12(strategy.stock[t][node])).unwrap();
        }
    }
    out
}
