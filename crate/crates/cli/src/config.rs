//! Config-file schema and validation.
//!
//! One TOML file describes the market, the claim, the tradable options, the
//! model-uncertainty set (exactly one of three forms), and the run itself.
//! See the repository README for the full schema with examples.

use std::path::PathBuf;

use serde::Deserialize;

use qhedge_core::lattice::{MarketSpec, OptionSpec, PayoffSpec};
use qhedge_core::models::AtomicBaseModel;
use qhedge_core::EngineError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub market: MarketSection,
    pub claim: PayoffSection,
    #[serde(default)]
    pub options: Vec<OptionSection>,
    pub models: ModelsSection,
    pub run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub horizon: usize,
    pub level: u32,
    pub lambda: f64,
    /// `[a_t, b_t]` for `t = 1..=T`; `t = 0` is implicitly `[1, 1]`.
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSection {
    pub kind: String,
    pub strike: Option<f64>,
    pub exponent: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSection {
    pub kind: String,
    pub strike: Option<f64>,
    pub exponent: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub price: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    /// `full-simplex`, `constraints`, or `atoms`.
    pub form: String,
    pub path_prob_max: Option<f64>,
    pub path_prob_min: Option<f64>,
    #[serde(default)]
    pub regions: Vec<RegionSection>,
    #[serde(default)]
    pub base: Vec<BaseModelSection>,
    pub vertex_cap: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub time: usize,
    /// Price interval with bracket notation, e.g. `"(1.25, 1.5]"`.
    pub interval: String,
    pub min_prob: Option<f64>,
    pub max_prob: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseModelSection {
    /// Each row: `T` prices followed by the atom weight.
    pub atoms: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: String,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    #[serde(default)]
    pub n_sweep: Vec<u32>,
    pub alpha: Option<f64>,
    pub out: Option<String>,
    pub tol: Option<f64>,
}

/// Run modes of the batch front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Certify,
    Superhedge,
    CurveAlpha,
    CurveX,
    Strategy,
    OracleCheck,
    ConvergenceSweep,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, EngineError> {
        Ok(match s {
            "certify" => Mode::Certify,
            "superhedge" => Mode::Superhedge,
            "curve-alpha" => Mode::CurveAlpha,
            "curve-x" => Mode::CurveX,
            "strategy" => Mode::Strategy,
            "oracle-check" => Mode::OracleCheck,
            "convergence-sweep" => Mode::ConvergenceSweep,
            other => {
                return Err(EngineError::config(format!(
                    "unknown mode '{}'; expected one of certify, superhedge, curve-alpha, \
                     curve-x, strategy, oracle-check, convergence-sweep",
                    other
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Certify => "certify",
            Mode::Superhedge => "superhedge",
            Mode::CurveAlpha => "curve-alpha",
            Mode::CurveX => "curve-x",
            Mode::Strategy => "strategy",
            Mode::OracleCheck => "oracle-check",
            Mode::ConvergenceSweep => "convergence-sweep",
        }
    }
}

/// One region constraint before path resolution (paths depend on `n`).
#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub time: usize,
    pub lo: f64,
    pub lo_open: bool,
    pub hi: f64,
    pub hi_open: bool,
    pub at_least: bool,
    pub bound: f64,
}

/// The model-set specification, one of three exclusive forms.
#[derive(Debug, Clone)]
pub enum ModelForm {
    FullSimplex,
    Constraints {
        path_prob_max: Option<f64>,
        path_prob_min: Option<f64>,
        regions: Vec<RegionSpec>,
    },
    Atoms {
        base_models: Vec<AtomicBaseModel>,
        vertex_cap: usize,
    },
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub market: MarketSpec,
    pub model_form: ModelForm,
    pub mode: Mode,
    pub alpha_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub n_sweep: Vec<u32>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub tol: f64,
}

fn payoff_from(kind: &str, strike: Option<f64>, exponent: Option<f64>, values: Option<Vec<f64>>, what: &str) -> Result<PayoffSpec, EngineError> {
    let need = |opt: Option<f64>, field: &str| {
        opt.ok_or_else(|| {
            EngineError::config(format!("{}: kind '{}' requires field '{}'", what, kind, field))
        })
    };
    Ok(match kind {
        "call" => PayoffSpec::Call {
            strike: need(strike, "strike")?,
        },
        "put" => PayoffSpec::Put {
            strike: need(strike, "strike")?,
        },
        "power" => PayoffSpec::Power {
            exponent: need(exponent, "exponent")?,
        },
        "lookback-max" => PayoffSpec::LookbackMax,
        "table" => PayoffSpec::Table(values.ok_or_else(|| {
            EngineError::config(format!("{}: kind 'table' requires field 'values'", what))
        })?),
        other => {
            return Err(EngineError::config(format!(
                "{}: unknown payoff kind '{}'",
                what, other
            )))
        }
    })
}

/// Parses interval notation like `"(1.25, 1.5]"`.
pub fn parse_interval(s: &str) -> Result<(f64, bool, f64, bool), EngineError> {
    let t = s.trim();
    let bad = || EngineError::config(format!("malformed interval '{}'", s));
    let mut chars = t.chars();
    let first = chars.next().ok_or_else(bad)?;
    let last = t.chars().last().ok_or_else(bad)?;
    let lo_open = match first {
        '(' => true,
        '[' => false,
        _ => return Err(bad()),
    };
    let hi_open = match last {
        ')' => true,
        ']' => false,
        _ => return Err(bad()),
    };
    let inner = &t[1..t.len() - 1];
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(EngineError::config(format!(
            "interval '{}' must have lo < hi",
            s
        )));
    }
    Ok((lo, lo_open, hi, hi_open))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| EngineError::config(format!("config parse error: {}", e)))?;
        Self::from_file(file)
    }

    fn from_file(file: ConfigFile) -> Result<Self, EngineError> {
        let m = &file.market;
        let mut bounds = vec![(1.0, 1.0)];
        bounds.extend(m.bounds.iter().map(|b| (b[0], b[1])));
        let claim = payoff_from(
            &file.claim.kind,
            file.claim.strike,
            file.claim.exponent,
            file.claim.values.clone(),
            "claim",
        )?;
        let options = file
            .options
            .iter()
            .map(|o| {
                Ok(OptionSpec {
                    payoff: payoff_from(&o.kind, o.strike, o.exponent, o.values.clone(), "option")?,
                    price: o.price,
                })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        let market = MarketSpec {
            horizon: m.horizon,
            level: m.level,
            bounds,
            lambda: m.lambda,
            options,
            claim,
        };

        let ms = &file.models;
        let model_form = match ms.form.as_str() {
            "full-simplex" => {
                if ms.path_prob_max.is_some()
                    || ms.path_prob_min.is_some()
                    || !ms.regions.is_empty()
                    || !ms.base.is_empty()
                {
                    return Err(EngineError::config(
                        "models.form = 'full-simplex' admits no other model fields",
                    ));
                }
                ModelForm::FullSimplex
            }
            "constraints" => {
                if !ms.base.is_empty() {
                    return Err(EngineError::config(
                        "models.form = 'constraints' cannot carry base models",
                    ));
                }
                let regions = ms
                    .regions
                    .iter()
                    .map(|r| {
                        let (lo, lo_open, hi, hi_open) = parse_interval(&r.interval)?;
                        let (at_least, bound) = match (r.min_prob, r.max_prob) {
                            (Some(b), None) => (true, b),
                            (None, Some(b)) => (false, b),
                            _ => {
                                return Err(EngineError::config(
                                    "each region needs exactly one of min_prob / max_prob",
                                ))
                            }
                        };
                        if r.time == 0 || r.time > file.market.horizon {
                            return Err(EngineError::config(format!(
                                "region time {} outside 1..={}",
                                r.time, file.market.horizon
                            )));
                        }
                        Ok(RegionSpec {
                            time: r.time,
                            lo,
                            lo_open,
                            hi,
                            hi_open,
                            at_least,
                            bound,
                        })
                    })
                    .collect::<Result<Vec<_>, EngineError>>()?;
                ModelForm::Constraints {
                    path_prob_max: ms.path_prob_max,
                    path_prob_min: ms.path_prob_min,
                    regions,
                }
            }
            "atoms" => {
                if ms.path_prob_max.is_some() || ms.path_prob_min.is_some() || !ms.regions.is_empty()
                {
                    return Err(EngineError::config(
                        "models.form = 'atoms' admits only base-model fields",
                    ));
                }
                if ms.base.is_empty() {
                    return Err(EngineError::config(
                        "models.form = 'atoms' requires at least one [[models.base]]",
                    ));
                }
                let base_models = ms
                    .base
                    .iter()
                    .map(|b| {
                        let atoms = b
                            .atoms
                            .iter()
                            .map(|row| {
                                if row.len() != file.market.horizon + 1 {
                                    return Err(EngineError::config(format!(
                                        "atom row has {} entries; expected {} prices + weight",
                                        row.len(),
                                        file.market.horizon
                                    )));
                                }
                                let (path, w) = row.split_at(file.market.horizon);
                                Ok((path.to_vec(), w[0]))
                            })
                            .collect::<Result<Vec<_>, EngineError>>()?;
                        Ok(AtomicBaseModel { atoms })
                    })
                    .collect::<Result<Vec<_>, EngineError>>()?;
                ModelForm::Atoms {
                    base_models,
                    vertex_cap: ms.vertex_cap.unwrap_or(qhedge_core::models::DEFAULT_VERTEX_CAP),
                }
            }
            other => {
                return Err(EngineError::config(format!(
                    "models.form '{}' must be full-simplex, constraints, or atoms",
                    other
                )))
            }
        };

        let r = &file.run;
        let mode = Mode::parse(&r.mode)?;
        let config = RunConfig {
            market,
            model_form,
            mode,
            alpha_grid: r.alpha_grid.clone(),
            x_grid: r.x_grid.clone(),
            n_sweep: r.n_sweep.clone(),
            alpha: r.alpha,
            out: r.out.clone().map(PathBuf::from),
            tol: r.tol.unwrap_or(qhedge_core::quantile::DEFAULT_INVERT_TOL),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match self.mode {
            Mode::CurveAlpha | Mode::OracleCheck | Mode::ConvergenceSweep => {
                if self.alpha_grid.is_empty() {
                    return Err(EngineError::config(format!(
                        "mode {} requires a non-empty alpha_grid",
                        self.mode.name()
                    )));
                }
            }
            Mode::CurveX => {
                if self.x_grid.is_empty() {
                    return Err(EngineError::config("mode curve-x requires a non-empty x_grid"));
                }
            }
            Mode::Strategy => {
                if self.alpha.is_none() {
                    return Err(EngineError::config("mode strategy requires run.alpha"));
                }
            }
            _ => {}
        }
        if self.mode == Mode::ConvergenceSweep && self.n_sweep.is_empty() {
            return Err(EngineError::config(
                "mode convergence-sweep requires a non-empty n_sweep",
            ));
        }
        for a in self.alpha_grid.iter().chain(self.alpha.iter()) {
            if !(0.0..=1.0).contains(a) {
                return Err(EngineError::config(format!("alpha {} outside [0, 1]", a)));
            }
        }
        if !(self.tol > 0.0) {
            return Err(EngineError::config("tol must be positive"));
        }
        Ok(())
    }
}

/// Parses `--alpha-grid`: either a comma list or `start:stop:count`.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<f64>, EngineError> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(EngineError::config(
                "alpha grid spec must be 'start:stop:count' or a comma list",
            ));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| {
            EngineError::config("alpha grid start is not a number")
        })?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| {
            EngineError::config("alpha grid stop is not a number")
        })?;
        let count: usize = parts[2].trim().parse().map_err(|_| {
            EngineError::config("alpha grid count is not an integer")
        })?;
        if count < 2 {
            return Err(EngineError::config("alpha grid count must be at least 2"));
        }
        Ok((0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| EngineError::config(format!("bad alpha value '{}'", p)))
            })
            .collect()
    }
}

/// Parses `--n`: a comma list of levels.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, EngineError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| EngineError::config(format!("bad level '{}'", p)))
        })
        .collect()
}
