//! Resolution of configuration entries into engine model objects.

use std::path::PathBuf;

use catbond_core::dependence::{ArchimedeanFamily, DependenceModel, NestedCopulaSpec};
use catbond_core::marginals::{BetaParams, GpdParams, SplicedMarginal, ThresholdSpec};
use catbond_core::par::Execution;
use catbond_core::pricer::{ModelBundle, PurchaseConvention};
use catbond_core::rates::CirParams;
use catbond_core::trigger::{BondTerms, RetentionFunctional, TriggerLevels};

use crate::catalog::EventCatalog;
use crate::config::Config;
use crate::error::{CliError, CliResult};

/// Maps a core validation error onto the config key that produced it.
pub(crate) fn at(key: impl Into<String>) -> impl FnOnce(catbond_core::Error) -> CliError {
    let key = key.into();
    move |e| {
        if e.is_convergence() {
            CliError::model(key)(e)
        } else {
            CliError::config(key, e.to_string())
        }
    }
}

pub fn catalog_path(cfg: &Config) -> CliResult<PathBuf> {
    cfg.path("data.catalog")
        .ok_or_else(|| CliError::config("data.catalog", "required but not set (path of the event catalog CSV)"))
}

pub fn load_catalog(cfg: &Config) -> CliResult<EventCatalog> {
    EventCatalog::read(&catalog_path(cfg)?)
}

/// `indicators` if set, otherwise every catalog column.
pub fn indicators(cfg: &Config, catalog: Option<&EventCatalog>) -> CliResult<Vec<String>> {
    let labels = match (cfg.list("indicators")?, catalog) {
        (Some(l), _) => l,
        (None, Some(c)) => c.labels.clone(),
        (None, None) => return Err(CliError::config("indicators", "required but not set (comma-separated labels)")),
    };
    if let Some(l) = labels.iter().find(|l| l.contains(['.', '-'])) {
        return Err(CliError::config("indicators", format!("label `{l}` must not contain `.` or `-`")));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(CliError::config("indicators", format!("label `{l}` listed twice")));
        }
    }
    if let Some(c) = catalog {
        c.select(&labels)?;
    }
    Ok(labels)
}

/// Keys written by `fit-marginals` for one indicator.
pub fn marginal_keys(label: &str) -> [String; 8] {
    ["threshold", "min", "n_exceed", "n_total", "beta_alpha", "beta_beta", "gp_shape", "gp_scale"]
        .map(|f| format!("marginals.{label}.{f}"))
}

pub fn marginal(cfg: &Config, label: &str) -> CliResult<SplicedMarginal> {
    let keys = marginal_keys(label);
    if !keys[1..].iter().any(|k| cfg.contains(k)) {
        return Err(CliError::MissingArtifact(format!(
            "marginal parameters for `{label}` (run fit-marginals and pass its marginals.params with --params, \
             or set marginals.{label}.*)"
        )));
    }
    let hint = "set by fit-marginals";
    let threshold: f64 = cfg.require(&keys[0], hint)?;
    let min: f64 = cfg.require(&keys[1], hint)?;
    let n_exceed: usize = cfg.require(&keys[2], hint)?;
    let n_total: usize = cfg.require(&keys[3], hint)?;
    let spec = ThresholdSpec::new(threshold, n_exceed, n_total, min).map_err(at(&keys[0]))?;
    let bulk = BetaParams::new(cfg.require(&keys[4], hint)?, cfg.require(&keys[5], hint)?).map_err(at(&keys[4]))?;
    let tail = GpdParams::new(cfg.require(&keys[6], hint)?, cfg.require(&keys[7], hint)?).map_err(at(&keys[6]))?;
    if !(min > 0.0) {
        return Err(CliError::config(&keys[1], "indicator support must be positive"));
    }
    Ok(SplicedMarginal::new(bulk, tail, spec))
}

pub fn marginals(cfg: &Config, labels: &[String]) -> CliResult<Vec<SplicedMarginal>> {
    labels.iter().map(|l| marginal(cfg, l)).collect()
}

/// Positions of the `copula.inner` labels.
pub fn inner_indices(cfg: &Config, labels: &[String]) -> CliResult<Option<Vec<usize>>> {
    cfg.list("copula.inner")?
        .map(|inner| {
            inner
                .iter()
                .map(|l| {
                    labels.iter().position(|x| x == l).ok_or_else(|| {
                        CliError::config("copula.inner", format!("`{l}` is not one of the indicators"))
                    })
                })
                .collect()
        })
        .transpose()
}

pub fn dependence(cfg: &Config, labels: &[String]) -> CliResult<DependenceModel> {
    let Some(family) = cfg.get("copula.family") else {
        return Err(CliError::MissingArtifact(
            "copula parameters (run fit-copula and pass its copula.params with --params, or set copula.*)".into(),
        ));
    };
    let m = labels.len();
    if family.eq_ignore_ascii_case("independence") {
        return Ok(DependenceModel::independence(m));
    }
    let family: ArchimedeanFamily = cfg.require("copula.family", "")?;
    match inner_indices(cfg, labels)? {
        Some(inner) => {
            let hint = "set by fit-copula";
            let t1: f64 = cfg.require("copula.theta_inner", hint)?;
            let t0: f64 = cfg.require("copula.theta_outer", hint)?;
            let spec = NestedCopulaSpec::same_family(family, t1, t0, inner, m).map_err(at("copula.theta_inner"))?;
            Ok(DependenceModel::Nested(spec))
        }
        None => {
            let theta: f64 = cfg.require("copula.theta", "flat copula parameter; set copula.inner for nesting")?;
            DependenceModel::flat(family, theta, m).map_err(at("copula.theta"))
        }
    }
}

pub fn intensities(cfg: &Config) -> CliResult<Vec<f64>> {
    let lambdas = cfg.f64_list("frequency.intensities")?.ok_or_else(|| {
        CliError::MissingArtifact(
            "event intensities (run fit-frequency and pass its frequency.params with --params, \
             or set frequency.intensities)"
                .into(),
        )
    })?;
    catbond_core::frequency::validate_lambdas(&lambdas).map_err(at("frequency.intensities"))?;
    Ok(lambdas)
}

pub fn cir(cfg: &Config) -> CliResult<CirParams> {
    let hint = "CIR short-rate parameter";
    CirParams::new(
        cfg.require("rates.reversion", hint)?,
        cfg.require("rates.long_run", hint)?,
        cfg.require("rates.vol", hint)?,
        cfg.require("rates.r0", hint)?,
    )
    .map_err(at("rates"))
}

/// How `trigger.quantile` turns into levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileBasis {
    /// Quantiles of the spliced marginals.
    Model,
    /// Sample quantiles of the catalog columns.
    Catalog,
}

pub fn quantile_basis(cfg: &Config) -> CliResult<QuantileBasis> {
    match cfg.get("trigger.basis").unwrap_or("model") {
        "model" => Ok(QuantileBasis::Model),
        "catalog" => Ok(QuantileBasis::Catalog),
        other => Err(CliError::config("trigger.basis", format!("expected `model` or `catalog`, got `{other}`"))),
    }
}

/// Attachment levels at quantile `q` on the configured basis.
pub fn quantile_levels(
    cfg: &Config,
    labels: &[String],
    marginals: &[SplicedMarginal],
    q: f64,
) -> CliResult<TriggerLevels> {
    if !(q > 0.0 && q < 1.0) {
        return Err(CliError::config("trigger.quantile", format!("must lie in (0, 1), got {q}")));
    }
    match quantile_basis(cfg)? {
        QuantileBasis::Model => {
            let u = marginals
                .iter()
                .map(|m| m.quantile(q))
                .collect::<catbond_core::Result<Vec<_>>>()
                .map_err(at("trigger.quantile"))?;
            TriggerLevels::new(u).map_err(at("trigger.quantile"))
        }
        QuantileBasis::Catalog => {
            let (_, cols) = load_catalog(cfg)?.select(labels)?;
            TriggerLevels::from_sample_quantiles(&cols, q).map_err(at("trigger.quantile"))
        }
    }
}

pub fn trigger(cfg: &Config, labels: &[String], marginals: &[SplicedMarginal]) -> CliResult<TriggerLevels> {
    match (cfg.f64_list("trigger.levels")?, cfg.parse::<f64>("trigger.quantile")?) {
        (Some(_), Some(_)) => Err(CliError::config("trigger.levels", "set either trigger.levels or trigger.quantile")),
        (Some(u), None) => {
            if u.len() != labels.len() {
                return Err(CliError::config(
                    "trigger.levels",
                    format!("need {} levels, one per indicator, got {}", labels.len(), u.len()),
                ));
            }
            TriggerLevels::new(u).map_err(at("trigger.levels"))
        }
        (None, Some(q)) => quantile_levels(cfg, labels, marginals, q),
        (None, None) => Err(CliError::config("trigger.quantile", "set trigger.quantile or trigger.levels")),
    }
}

pub fn terms(cfg: &Config) -> CliResult<BondTerms> {
    let face: f64 = cfg.require("bond.face", "face value F")?;
    let rate: f64 = cfg.require("bond.coupon_rate", "annual coupon rate R")?;
    let maturity: u32 = cfg.require("bond.maturity", "maturity T in years")?;
    let t: u32 = cfg.parse("bond.purchase_year")?.unwrap_or(0);
    BondTerms::new(face, rate, t, maturity).map_err(at("bond"))
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub n_reps: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub execution: Execution,
}

pub fn sim_settings(cfg: &Config) -> CliResult<SimSettings> {
    let n_reps = cfg.parse("sim.n_reps")?.unwrap_or(10_000);
    if n_reps < catbond_core::pricer::MIN_REPS {
        return Err(CliError::config(
            "sim.n_reps",
            format!("must be at least {}, got {n_reps}", catbond_core::pricer::MIN_REPS),
        ));
    }
    let workers: Option<usize> = cfg.parse("sim.workers")?;
    if workers == Some(0) {
        return Err(CliError::config("sim.workers", "must be at least 1"));
    }
    let execution = match cfg.get("sim.execution").unwrap_or("parallel") {
        "parallel" => Execution::Parallel,
        "sequential" => Execution::Sequential,
        other => {
            return Err(CliError::config(
                "sim.execution",
                format!("expected `parallel` or `sequential`, got `{other}`"),
            ))
        }
    };
    Ok(SimSettings {
        n_reps,
        seed: cfg.parse("sim.seed")?.unwrap_or(1),
        workers,
        execution,
    })
}

/// Everything the pricer needs, with the indicator labels in model order.
pub fn build_bundle(cfg: &Config) -> CliResult<(ModelBundle, Vec<String>)> {
    cfg.check_keys()?;
    let catalog = match cfg.path("data.catalog") {
        Some(p) if p.exists() => Some(EventCatalog::read(&p)?),
        _ => None,
    };
    let labels = indicators(cfg, catalog.as_ref())?;
    let marginals = marginals(cfg, &labels)?;
    let dependence = dependence(cfg, &labels)?;
    let trigger = trigger(cfg, &labels, &marginals)?;
    let terms = terms(cfg)?;
    let intensities = intensities(cfg)?;
    if intensities.len() < terms.maturity as usize {
        return Err(CliError::config(
            "frequency.intensities",
            format!("need one intensity per year up to maturity {}, got {}", terms.maturity, intensities.len()),
        ));
    }
    let functional: RetentionFunctional = cfg.parse("trigger.functional")?.unwrap_or_default();
    let convention: PurchaseConvention = cfg.parse("bond.convention")?.unwrap_or_default();
    let steps_per_year = cfg.parse("sim.steps_per_year")?.unwrap_or(252);
    let bundle = ModelBundle {
        marginals,
        dependence,
        intensities,
        cir: cir(cfg)?,
        trigger,
        functional,
        terms,
        convention,
        steps_per_year,
    };
    bundle.validate().map_err(at("model"))?;
    Ok((bundle, labels))
}
