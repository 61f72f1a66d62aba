//! Subcommand implementations. Each writes machine-readable files into the
//! output directory and returns a human summary; nothing written to disk
//! depends on wall-clock time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use catbond_core::dependence::{
    fit_nested_mle, ks_gof, pseudo_observations, ArchimedeanFamily, NestedFit,
};
use catbond_core::frequency::{acf_pacf, fit_arma, forecast, jarque_bera, ljung_box};
use catbond_core::marginals::{chi_square_gof, mean_excess_curve, parameter_stability, SplicedMarginal};
use catbond_core::par::with_workers;
use catbond_core::pricer::{
    maturity_table, price, price_scenarios, sweep_indicator_subsets, sweep_intensity, PriceEstimate,
    Scenario, ScenarioPrices,
};
use catbond_core::rng::StreamSeed;
use catbond_core::stats;

use crate::bundle::{self, at, sim_settings};
use crate::catalog::{read_counts, EventCatalog};
use crate::config::{parse_grid, Config};
use crate::error::{CliError, CliResult};

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn out_file(out: &Path, name: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    Ok(out.join(name))
}

pub(crate) fn write_csv(out: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = out_file(out, name)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_write_error(&path, e))?;
    w.write_record(header).map_err(|e| csv_write_error(&path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_write_error(&path, e))?;
    }
    w.flush().map_err(CliError::io(&path))?;
    Ok(path)
}

fn csv_write_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => CliError::Validation(format!("{}: {kind:?}", path.display())),
    }
}

fn write_text(out: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let path = out_file(out, name)?;
    std::fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(path)
}

fn written(summary: &mut String, paths: &[PathBuf]) {
    for p in paths {
        let _ = writeln!(summary, "wrote {}", p.display());
    }
}

pub fn ingest(path: &Path, out: Option<&Path>) -> CliResult<String> {
    let cat = EventCatalog::read(path)?;
    let mut s = format!("{}: {} events, indicators {}\n", path.display(), cat.len(), cat.labels.join(", "));
    let _ = writeln!(
        s,
        "{:<8} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9} {:>9}",
        "label", "n", "min", "max", "mean", "median", "skewness", "kurtosis"
    );
    let mut rows = Vec::new();
    for c in cat.summary() {
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>9.3} {:>9.3}",
            c.label, c.n, c.min, c.max, c.mean, c.median, c.skewness, c.kurtosis
        );
        rows.push(vec![
            c.label,
            c.n.to_string(),
            fmt(c.min),
            fmt(c.max),
            fmt(c.mean),
            fmt(c.median),
            fmt(c.skewness),
            fmt(c.kurtosis),
        ]);
    }
    if let Some(out) = out {
        let p = write_csv(
            out,
            "catalog_summary.csv",
            &["label", "n", "min", "max", "mean", "median", "skewness", "kurtosis"],
            &rows,
        )?;
        written(&mut s, &[p]);
    }
    Ok(s)
}

/// Threshold for one indicator: absolute if given, else a sample quantile.
fn threshold_for(cfg: &Config, label: &str, column: &[f64]) -> CliResult<f64> {
    let abs_key = format!("marginals.{label}.threshold");
    if let Some(u) = cfg.parse::<f64>(&abs_key)? {
        return Ok(u);
    }
    let q_key = format!("marginals.{label}.threshold_quantile");
    let (key, q) = match cfg.parse::<f64>(&q_key)? {
        Some(q) => (q_key, q),
        None => (
            "marginals.threshold_quantile".to_string(),
            cfg.parse::<f64>("marginals.threshold_quantile")?.ok_or_else(|| {
                CliError::config(
                    abs_key.clone(),
                    "no threshold: set it, or marginals.<label>.threshold_quantile, or marginals.threshold_quantile",
                )
            })?,
        ),
    };
    if !(q > 0.0 && q < 1.0) {
        return Err(CliError::config(key, format!("must lie in (0, 1), got {q}")));
    }
    Ok(stats::quantile(column, q))
}

pub fn fit_marginals(cfg: &Config, out: &Path) -> CliResult<String> {
    cfg.check_keys()?;
    let cat = bundle::load_catalog(cfg)?;
    let labels = bundle::indicators(cfg, Some(&cat))?;
    let (_, cols) = cat.select(&labels)?;
    let bins: usize = cfg.parse("marginals.bins")?.unwrap_or(10);
    let source = bundle::catalog_path(cfg)?;
    let mut params = format!("# spliced Beta-GP marginals fitted to {}\n", source.display());
    let mut rows = Vec::new();
    let mut s = String::new();
    for (label, col) in labels.iter().zip(&cols) {
        let u = threshold_for(cfg, label, col)?;
        let m = SplicedMarginal::fit(col, u).map_err(at(format!("marginals.{label}.threshold")))?;
        let gof = chi_square_gof(col, &m, bins).map_err(at("marginals.bins"))?;
        let keys = bundle::marginal_keys(label);
        let values = [
            fmt(m.spec.threshold),
            fmt(m.spec.data_min),
            m.spec.n_exceed.to_string(),
            m.spec.n_total.to_string(),
            fmt(m.bulk.alpha),
            fmt(m.bulk.beta),
            fmt(m.tail.shape),
            fmt(m.tail.scale),
        ];
        for (k, v) in keys.iter().zip(&values) {
            let _ = writeln!(params, "{k} = {v}");
        }
        let (xi_se, sigma_se) = m.tail.std_errors.map_or((None, None), |(a, b)| (Some(a), Some(b)));
        let (a_se, b_se) = m.bulk.std_errors.map_or((None, None), |(a, b)| (Some(a), Some(b)));
        let _ = writeln!(
            s,
            "{label}: u={:.4} n_u={}/{} Beta({:.3}, {:.3}) GP(xi={:.3}, sigma={:.3}) chi2={:.3} df={} p={:.4}",
            u, m.spec.n_exceed, m.spec.n_total, m.bulk.alpha, m.bulk.beta, m.tail.shape, m.tail.scale,
            gof.statistic, gof.df, gof.p_value
        );
        rows.push(vec![
            label.clone(),
            fmt(u),
            m.spec.n_exceed.to_string(),
            m.spec.n_total.to_string(),
            fmt(m.spec.data_min),
            fmt(m.bulk.alpha),
            opt(a_se),
            fmt(m.bulk.beta),
            opt(b_se),
            fmt(m.tail.shape),
            opt(xi_se),
            fmt(m.tail.scale),
            opt(sigma_se),
            fmt(gof.statistic),
            gof.df.to_string(),
            fmt(gof.p_value),
        ]);
    }
    let p1 = write_text(out, "marginals.params", &params)?;
    let p2 = write_csv(
        out,
        "marginals.csv",
        &[
            "label", "threshold", "n_exceed", "n_total", "min", "beta_alpha", "beta_alpha_se", "beta_beta",
            "beta_beta_se", "gp_shape", "gp_shape_se", "gp_scale", "gp_scale_se", "chi2", "chi2_df", "chi2_p",
        ],
        &rows,
    )?;
    written(&mut s, &[p1, p2]);
    Ok(s)
}

fn threshold_grid(cfg: &Config, label: &str, col: &[f64]) -> CliResult<Vec<f64>> {
    let key = format!("diagnostics.{label}.grid");
    if let Some(spec) = cfg.get(&key) {
        return parse_grid(&key, spec);
    }
    let qkey = "diagnostics.grid_quantiles";
    let qs = parse_grid(qkey, cfg.get(qkey).unwrap_or("0.50:0.95:0.025"))?;
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(CliError::config(qkey, format!("quantile {q} outside (0, 1)")));
    }
    Ok(qs.iter().map(|&q| stats::quantile(col, q)).collect())
}

pub fn diagnose_threshold(cfg: &Config, out: &Path) -> CliResult<String> {
    cfg.check_keys()?;
    let cat = bundle::load_catalog(cfg)?;
    let labels = bundle::indicators(cfg, Some(&cat))?;
    let (_, cols) = cat.select(&labels)?;
    let header = ["threshold", "estimate", "ci_lo", "ci_hi", "n_exceed"];
    let mut s = String::new();
    let mut paths = Vec::new();
    for (label, col) in labels.iter().zip(&cols) {
        let grid = threshold_grid(cfg, label, col)?;
        let me = mean_excess_curve(col, &grid);
        let rows: Vec<Vec<String>> = me
            .iter()
            .map(|p| {
                vec![
                    fmt(p.threshold),
                    opt(p.mean_excess),
                    opt(p.band.map(|b| b.0)),
                    opt(p.band.map(|b| b.1)),
                    p.n_exceed.to_string(),
                ]
            })
            .collect();
        paths.push(write_csv(out, &format!("mean_excess_{label}.csv"), &header, &rows)?);
        let st = parameter_stability(col, &grid);
        let shape: Vec<Vec<String>> = st
            .iter()
            .map(|r| {
                vec![
                    fmt(r.threshold),
                    opt(r.shape),
                    opt(r.shape_ci.map(|c| c.0)),
                    opt(r.shape_ci.map(|c| c.1)),
                    r.n_exceed.to_string(),
                ]
            })
            .collect();
        let scale: Vec<Vec<String>> = st
            .iter()
            .map(|r| {
                vec![
                    fmt(r.threshold),
                    opt(r.scale),
                    opt(r.scale_ci.map(|c| c.0)),
                    opt(r.scale_ci.map(|c| c.1)),
                    r.n_exceed.to_string(),
                ]
            })
            .collect();
        paths.push(write_csv(out, &format!("stability_shape_{label}.csv"), &header, &shape)?);
        paths.push(write_csv(out, &format!("stability_scale_{label}.csv"), &header, &scale)?);
        let flagged = me.iter().filter(|p| p.flagged()).count() + st.iter().filter(|r| r.shape.is_none()).count();
        let _ = writeln!(
            s,
            "{label}: {} thresholds from {:.4} to {:.4}, {flagged} flagged rows",
            grid.len(),
            grid.first().copied().unwrap_or(f64::NAN),
            grid.last().copied().unwrap_or(f64::NAN)
        );
    }
    written(&mut s, &paths);
    Ok(s)
}

pub fn fit_copula(cfg: &Config, out: &Path) -> CliResult<String> {
    cfg.check_keys()?;
    let cat = bundle::load_catalog(cfg)?;
    let labels = bundle::indicators(cfg, Some(&cat))?;
    let (rows, _) = cat.select(&labels)?;
    let marginals = bundle::marginals(cfg, &labels)?;
    let p = pseudo_observations(&rows, &marginals).map_err(CliError::model("pseudo-observations"))?;
    let inner = bundle::inner_indices(cfg, &labels)?
        .ok_or_else(|| CliError::config("copula.inner", "required: labels of the inner (strongly dependent) block"))?;
    let families: Vec<ArchimedeanFamily> = match cfg.list("copula.fit_families")? {
        Some(list) => list
            .iter()
            .map(|f| f.parse().map_err(at("copula.fit_families")))
            .collect::<CliResult<_>>()?,
        None => vec![ArchimedeanFamily::Gumbel, ArchimedeanFamily::Clayton, ArchimedeanFamily::Frank],
    };
    let mut fits: Vec<NestedFit> = Vec::new();
    let mut s = String::new();
    for fam in &families {
        match fit_nested_mle(&p, *fam, *fam, &inner) {
            Ok(f) => fits.push(f),
            Err(e) if families.len() > 1 && e.is_convergence() => {
                let _ = writeln!(s, "{fam}: fit did not converge ({e}); skipped");
            }
            Err(e) => return Err(CliError::model(format!("fitting the nested {fam} copula"))(e)),
        }
    }
    let best = fits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.log_likelihood.total_cmp(&b.1.log_likelihood))
        .map(|(i, _)| i)
        .ok_or_else(|| CliError::Validation("no copula family could be fitted".into()))?;
    let chosen = &fits[best];
    let settings = sim_settings(cfg)?;
    let n_boot: usize = cfg.parse("copula.bootstrap")?.unwrap_or(0);
    let ks = if n_boot > 0 {
        let r = with_workers(settings.workers, || {
            ks_gof(&p, &chosen.spec, n_boot, StreamSeed::new(settings.seed), settings.execution)
        })
        .map_err(at("copula.bootstrap"))?;
        Some(r)
    } else {
        None
    };
    let inner_labels: Vec<&str> = inner.iter().map(|&i| labels[i].as_str()).collect();
    let params = format!(
        "# nested copula fitted to {}\ncopula.family = {}\ncopula.inner = {}\ncopula.theta_inner = {}\ncopula.theta_outer = {}\n",
        bundle::catalog_path(cfg)?.display(),
        chosen.spec.family(),
        inner_labels.join(","),
        chosen.spec.theta_inner,
        chosen.spec.theta_outer
    );
    let csv_rows: Vec<Vec<String>> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (se1, se0) = f.std_errors.map_or((None, None), |(a, b)| (Some(a), Some(b)));
            let ks_cols = match (&ks, i == best) {
                (Some(k), true) => vec![fmt(k.statistic), fmt(k.p_value), k.n_boot.to_string()],
                _ => vec![String::new(); 3],
            };
            let mut r = vec![
                f.spec.family().to_string(),
                fmt(f.spec.theta_inner),
                opt(se1),
                fmt(f.spec.theta_outer),
                opt(se0),
                fmt(f.log_likelihood),
                f.constraint_active.to_string(),
                (i == best).to_string(),
            ];
            r.extend(ks_cols);
            r
        })
        .collect();
    for f in &fits {
        let _ = writeln!(
            s,
            "{}: theta_inner={:.4} theta_outer={:.4} loglik={:.3}{}",
            f.spec.family(),
            f.spec.theta_inner,
            f.spec.theta_outer,
            f.log_likelihood,
            if f.constraint_active { " (constraint active)" } else { "" }
        );
    }
    let _ = writeln!(s, "selected {} (highest log-likelihood)", chosen.spec.family());
    if let Some(k) = &ks {
        let _ = writeln!(s, "KS bootstrap: D={:.4} p={:.4} ({} replicates)", k.statistic, k.p_value, k.n_boot);
    }
    let p1 = write_text(out, "copula.params", &params)?;
    let p2 = write_csv(
        out,
        "copula.csv",
        &[
            "family", "theta_inner", "theta_inner_se", "theta_outer", "theta_outer_se", "log_likelihood",
            "constraint_active", "selected", "ks_statistic", "ks_p_value", "ks_bootstrap",
        ],
        &csv_rows,
    )?;
    written(&mut s, &[p1, p2]);
    Ok(s)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(",")
}

pub fn fit_frequency(cfg: &Config, out: &Path) -> CliResult<String> {
    cfg.check_keys()?;
    let path = cfg
        .path("data.counts")
        .ok_or_else(|| CliError::config("data.counts", "required but not set (path of the year,count CSV)"))?;
    let series = read_counts(&path)?;
    let p: usize = cfg.parse("frequency.p")?.unwrap_or(1);
    let q: usize = cfg.parse("frequency.q")?.unwrap_or(3);
    // enough years for the configured bond and for a three-year maturity table
    let horizon: usize = match cfg.parse("frequency.horizon")? {
        Some(0) => return Err(CliError::config("frequency.horizon", "must be at least 1")),
        Some(h) => h,
        None => cfg.parse::<usize>("bond.maturity")?.unwrap_or(0).max(3),
    };
    let lags: usize = cfg.parse("frequency.ljung_box_lags")?.unwrap_or(10);
    let fit = fit_arma(&series, p, q).map_err(CliError::model(format!("fitting ARMA({p},{q})")))?;
    let lambdas = forecast(&fit.params, &series, horizon).map_err(CliError::model("forecasting"))?;
    let lb = ljung_box(&fit.residuals, lags, p + q).map_err(at("frequency.ljung_box_lags"))?;
    let jb = jarque_bera(&fit.residuals).map_err(CliError::model("Jarque-Bera test"))?;
    let corr = acf_pacf(series.counts(), (series.len() / 4).max(1)).map_err(CliError::model("correlogram"))?;

    let params = format!(
        "# ARMA({p},{q}) fitted to {}\nfrequency.p = {p}\nfrequency.q = {q}\nfrequency.mean = {}\nfrequency.ar = {}\n\
         frequency.ma = {}\nfrequency.noise_variance = {}\nfrequency.intensities = {}\n",
        path.display(),
        fmt(fit.params.mean),
        join(&fit.params.ar),
        join(&fit.params.ma),
        fmt(fit.params.noise_variance),
        join(&lambdas),
    );
    let mut names = vec!["mean".to_string()];
    names.extend((1..=p).map(|i| format!("ar{i}")));
    names.extend((1..=q).map(|j| format!("ma{j}")));
    let mut values = vec![fit.params.mean];
    values.extend(&fit.params.ar);
    values.extend(&fit.params.ma);
    let mut rows: Vec<Vec<String>> = names
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (n, v))| vec![n.clone(), fmt(*v), opt(fit.std_errors.as_ref().map(|s| s[i]))])
        .collect();
    rows.push(vec!["noise_variance".into(), fmt(fit.params.noise_variance), String::new()]);
    rows.push(vec!["log_likelihood".into(), fmt(fit.log_likelihood), String::new()]);
    let last = *series.years().last().unwrap_or(&0);
    let fc_rows: Vec<Vec<String>> = lambdas
        .iter()
        .enumerate()
        .map(|(h, l)| vec![(last + 1 + h as i32).to_string(), fmt(*l)])
        .collect();
    let test_rows = vec![
        vec!["ljung_box".into(), fmt(lb.statistic), lb.df.to_string(), fmt(lb.p_value)],
        vec!["jarque_bera".into(), fmt(jb.statistic), jb.df.to_string(), fmt(jb.p_value)],
    ];
    let corr_rows: Vec<Vec<String>> = (1..corr.acf.len())
        .map(|k| vec![k.to_string(), fmt(corr.acf[k]), fmt(corr.pacf[k - 1]), fmt(corr.band)])
        .collect();

    let mut s = format!(
        "ARMA({p},{q}) on {} years {}-{}: mean={:.3} ar=[{}] ma=[{}] sigma2={:.3}\n",
        series.len(),
        series.years()[0],
        last,
        fit.params.mean,
        fit.params.ar.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "),
        fit.params.ma.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "),
        fit.params.noise_variance
    );
    let _ = writeln!(
        s,
        "forecast {}: {}",
        fc_rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>().join(", "),
        lambdas.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(s, "Ljung-Box Q={:.3} df={} p={:.4}; Jarque-Bera={:.3} p={:.4}", lb.statistic, lb.df, lb.p_value, jb.statistic, jb.p_value);
    let paths = [
        write_text(out, "frequency.params", &params)?,
        write_csv(out, "frequency.csv", &["parameter", "estimate", "std_error"], &rows)?,
        write_csv(out, "forecast.csv", &["year", "intensity"], &fc_rows)?,
        write_csv(out, "frequency_tests.csv", &["test", "statistic", "df", "p_value"], &test_rows)?,
        write_csv(out, "correlogram.csv", &["lag", "acf", "pacf", "band"], &corr_rows)?,
    ];
    written(&mut s, &paths);
    Ok(s)
}

fn estimate_cells(e: &PriceEstimate) -> Vec<String> {
    vec![fmt(e.mean), fmt(e.std_error), fmt(e.ci95.0), fmt(e.ci95.1)]
}

pub fn price_cmd(cfg: &Config, out: &Path) -> CliResult<String> {
    let (b, labels) = bundle::build_bundle(cfg)?;
    let st = sim_settings(cfg)?;
    let est = with_workers(st.workers, || price(&b, st.n_reps, st.seed, st.execution)).map_err(at("model"))?;

    let mut report = String::from("[configuration]\n");
    report.push_str(&cfg.echo());
    let _ = write!(
        report,
        "\n[resolved]\nindicators = {}\nmarginals = {}\ndependence = {}\ntrigger.levels = {}\nfunctional = {}\n\
         intensities = {}\nconvention = {}\nsteps_per_year = {}\nn_reps = {}\nseed = {}\n",
        labels.join(","),
        b.marginals
            .iter()
            .map(|m| format!(
                "Beta({}, {})+GP({}, {})@{}",
                m.bulk.alpha, m.bulk.beta, m.tail.shape, m.tail.scale, m.spec.threshold
            ))
            .collect::<Vec<_>>()
            .join("; "),
        b.dependence,
        join(b.trigger.levels()),
        b.functional,
        join(&b.intensities[..b.terms.maturity as usize]),
        b.convention,
        b.steps_per_year,
        st.n_reps,
        st.seed
    );
    let _ = write!(
        report,
        "\n[result]\nmaturity = {}\npurchase_year = {}\nprice = {}\nstd_error = {}\nci95 = {}, {}\n\
         expected_redemption = {}\nexpected_coupons = {}\ndiscount_factors = {}\n",
        b.terms.maturity,
        b.terms.purchase_year,
        fmt(est.mean),
        fmt(est.std_error),
        fmt(est.ci95.0),
        fmt(est.ci95.1),
        fmt(est.expected_redemption),
        join(&est.expected_coupons),
        join(&est.discount_factors)
    );
    let mut row = vec![b.terms.maturity.to_string(), b.terms.purchase_year.to_string()];
    row.extend(estimate_cells(&est));
    row.extend([st.n_reps.to_string(), st.seed.to_string(), fmt(est.expected_redemption)]);
    let flows: Vec<Vec<String>> = est
        .expected_coupons
        .iter()
        .zip(&est.discount_factors)
        .enumerate()
        .map(|(k, (c, d))| vec![(b.terms.purchase_year as usize + 1 + k).to_string(), fmt(*c), fmt(*d)])
        .collect();
    let paths = [
        write_text(out, "price.txt", &report)?,
        write_csv(
            out,
            "price.csv",
            &[
                "maturity", "purchase_year", "price", "std_error", "ci_lo", "ci_hi", "n_reps", "seed",
                "expected_redemption",
            ],
            &[row],
        )?,
        write_csv(out, "cashflows.csv", &["year", "expected_coupon", "expected_discount_factor"], &flows)?,
    ];
    let mut s = format!(
        "price (T={}, t={}) = {:.4} (SE {:.4}, 95% CI [{:.4}, {:.4}]) with {} replications, seed {}\n",
        b.terms.maturity, b.terms.purchase_year, est.mean, est.std_error, est.ci95.0, est.ci95.1, st.n_reps, st.seed
    );
    let _ = writeln!(s, "dependence: {}; trigger levels: {}", b.dependence, join(b.trigger.levels()));
    written(&mut s, &paths);
    Ok(s)
}

/// A sweep request `name=spec`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    TriggerQuantile(Vec<f64>),
    Intensity(Vec<f64>),
    Maturity(Vec<u32>),
    Subsets(Vec<Vec<String>>),
}

impl Grid {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("grid `{spec}` is not `name=values`")))?;
        let key = format!("--grid {name}");
        match name.trim() {
            "trigger-quantile" => Ok(Grid::TriggerQuantile(parse_grid(&key, values)?)),
            "intensity" => Ok(Grid::Intensity(parse_grid(&key, values)?)),
            "maturity" => parse_grid(&key, values)?
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 && v <= 100.0 {
                        Ok(v as u32)
                    } else {
                        Err(CliError::config(&key, format!("maturity {v} is not a whole number of years in 1..=100")))
                    }
                })
                .collect::<CliResult<_>>()
                .map(Grid::Maturity),
            "subsets" => Ok(Grid::Subsets(
                values.split(',').map(|s| s.split('-').map(|l| l.trim().to_string()).collect()).collect(),
            )),
            other => Err(CliError::Validation(format!(
                "unknown grid `{other}` (expected trigger-quantile, intensity, maturity or subsets)"
            ))),
        }
    }
}

fn sweep_rows(values: &[String], prices: &ScenarioPrices) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut r = vec![v.clone()];
            r.extend(estimate_cells(&prices.estimates[k]));
            if k == 0 {
                r.extend([String::new(), String::new()]);
            } else {
                let d = prices.difference(k - 1, k);
                r.extend([fmt(d.estimate), fmt(d.std_error)]);
            }
            r
        })
        .collect()
}

pub fn sweep(cfg: &Config, grid: &Grid, out: &Path) -> CliResult<String> {
    let (b, labels) = bundle::build_bundle(cfg)?;
    let st = sim_settings(cfg)?;
    let header = ["value", "price", "std_error", "ci_lo", "ci_hi", "step", "step_se"];
    let mut s = String::new();
    let path = match grid {
        Grid::TriggerQuantile(qs) => {
            let scenarios = qs
                .iter()
                .map(|&q| {
                    Ok(Scenario {
                        trigger: bundle::quantile_levels(cfg, &labels, &b.marginals, q)?,
                        ..b.scenario()
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let prices = with_workers(st.workers, || price_scenarios(&b, &scenarios, st.n_reps, st.seed, st.execution))
                .map_err(at("model"))?;
            let values: Vec<String> = qs.iter().map(|q| fmt(*q)).collect();
            for (q, e) in qs.iter().zip(&prices.estimates) {
                let _ = writeln!(s, "q={q:.3}: {:.4} (SE {:.4})", e.mean, e.std_error);
            }
            write_csv(out, "sweep_trigger_quantile.csv", &header, &sweep_rows(&values, &prices))?
        }
        Grid::Intensity(ls) => {
            let t = with_workers(st.workers, || sweep_intensity(&b, ls, st.n_reps, st.seed, st.execution))
                .map_err(at("--grid intensity"))?;
            let values: Vec<String> = ls.iter().map(|l| fmt(*l)).collect();
            for (l, e) in ls.iter().zip(&t.prices.estimates) {
                let _ = writeln!(s, "lambda={l}: {:.4} (SE {:.4})", e.mean, e.std_error);
            }
            write_csv(out, "sweep_intensity.csv", &header, &sweep_rows(&values, &t.prices))?
        }
        Grid::Maturity(ts) => {
            let longest = ts.iter().copied().max().unwrap_or(0) as usize;
            if b.intensities.len() < longest {
                return Err(CliError::config(
                    "frequency.intensities",
                    format!("maturity {longest} needs {longest} intensities, got {}", b.intensities.len()),
                ));
            }
            let table = with_workers(st.workers, || maturity_table(&b, ts, st.n_reps, st.seed, st.execution))
                .map_err(at("--grid maturity"))?;
            let rows: Vec<Vec<String>> = table
                .cells
                .iter()
                .enumerate()
                .map(|(i, &(big_t, t))| {
                    let e = &table.prices.estimates[i];
                    let _ = writeln!(s, "T={big_t} t={t}: {:.4} (SE {:.4})", e.mean, e.std_error);
                    let mut r = vec![big_t.to_string(), t.to_string()];
                    r.extend(estimate_cells(e));
                    match t.checked_sub(1).and_then(|p| table.index(big_t, p)) {
                        Some(j) => {
                            let d = table.prices.difference(j, i);
                            r.extend([fmt(d.estimate), fmt(d.std_error)]);
                        }
                        None => r.extend([String::new(), String::new()]),
                    }
                    r
                })
                .collect();
            write_csv(
                out,
                "sweep_maturity.csv",
                &["maturity", "purchase_year", "price", "std_error", "ci_lo", "ci_hi", "step", "step_se"],
                &rows,
            )?
        }
        Grid::Subsets(sets) => {
            let idx = sets
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|l| {
                            labels.iter().position(|x| x == l).ok_or_else(|| {
                                CliError::config("--grid subsets", format!("`{l}` is not one of the indicators"))
                            })
                        })
                        .collect::<CliResult<Vec<usize>>>()
                })
                .collect::<CliResult<Vec<_>>>()?;
            let res = with_workers(st.workers, || sweep_indicator_subsets(&b, &idx, st.n_reps, st.seed, st.execution))
                .map_err(at("--grid subsets"))?;
            let rows: Vec<Vec<String>> = sets
                .iter()
                .zip(&res)
                .map(|(set, r)| {
                    let _ = writeln!(
                        s,
                        "{}: {:.4} (SE {:.4}) under {}",
                        set.join("-"),
                        r.estimate.mean,
                        r.estimate.std_error,
                        r.dependence
                    );
                    let mut row = vec![set.join("-")];
                    row.extend(estimate_cells(&r.estimate));
                    row.push(r.dependence.to_string());
                    row
                })
                .collect();
            write_csv(
                out,
                "sweep_subsets.csv",
                &["subset", "price", "std_error", "ci_lo", "ci_hi", "dependence"],
                &rows,
            )?
        }
    };
    let _ = writeln!(s, "{} replications, seed {}", st.n_reps, st.seed);
    written(&mut s, &[path]);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_requests_parse() {
        assert_eq!(
            Grid::parse("trigger-quantile=0.80:0.90:0.05").unwrap(),
            Grid::TriggerQuantile(vec![0.8, 0.85, 0.9])
        );
        assert_eq!(Grid::parse("maturity=1,2,3").unwrap(), Grid::Maturity(vec![1, 2, 3]));
        assert_eq!(
            Grid::parse("subsets=AP-CAA-DEL,AP-CAA").unwrap(),
            Grid::Subsets(vec![
                vec!["AP".into(), "CAA".into(), "DEL".into()],
                vec!["AP".into(), "CAA".into()]
            ])
        );
        assert!(Grid::parse("maturity=1.5").is_err());
        assert!(Grid::parse("volatility=1:2:1").is_err());
        assert!(Grid::parse("intensity").is_err());
    }

    #[test]
    fn non_finite_values_print_empty() {
        assert_eq!(fmt(f64::NAN), "");
        assert_eq!(fmt(0.25), "0.25");
        assert_eq!(opt(None), "");
    }
}
