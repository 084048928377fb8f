use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use forecast_cusum::calibration::{CriticalTable, MonteCarloConfig};
use forecast_cusum::detectors::{run_monitor, save_step_log, DetectorKind, MonitorConfig};
use forecast_cusum::forecasters::{
    fit_and_generate, ArmaFitOptions, DesignSpec, EtsStructure, FittedModel, ForecasterChoice,
};
use forecast_cusum::series::{load_series_with_timestamps, ErrorStream, Origin, SplitSpec};
use forecast_cusum::simlab::{export_results, format_table, run_cell, MethodSpec, MonitorSettings, ScenarioSpec};

use crate::{CalibrateArgs, FitArgs, KindArg, MethodArg, ModelArg, MonitorArgs, SimKindArg, SimulateArgs, SplitArgs};

pub enum Outcome {
    NoAlarm,
    Alarm,
}

impl SplitArgs {
    fn spec(&self) -> Option<SplitSpec> {
        match (self.m, self.train_frac) {
            (Some(m), _) => Some(SplitSpec::Count(m)),
            (None, Some(f)) => Some(SplitSpec::Fraction(f)),
            (None, None) => None,
        }
    }
}

fn load_table(path: Option<&Path>) -> Result<CriticalTable> {
    match path {
        Some(p) => CriticalTable::load(p).with_context(|| format!("reading table {}", p.display())),
        None => Ok(CriticalTable::builtin()),
    }
}

pub fn calibrate(args: CalibrateArgs) -> Result<Outcome> {
    let mc = MonteCarloConfig {
        replicates: args.replicates,
        grid: args.grid,
        seed: args.seed,
        workers: args.workers,
    };
    let table = CriticalTable::compute(&args.gamma, &args.alpha, &mc)?;
    for e in &table.entries {
        println!("gamma={} alpha={} c={:.6}", e.gamma, e.alpha, e.c);
    }
    table.save(&args.output)?;
    Ok(Outcome::NoAlarm)
}

pub fn fit(args: FitArgs) -> Result<Outcome> {
    let series = load_series_with_timestamps(&args.input, &args.column, None, args.frequency)?;
    let split = args
        .split
        .spec()
        .context("one of --m or --train-frac is required")?;
    let choice = match args.model {
        ModelArg::Arma => {
            let seasonal = args.frequency > 1;
            ForecasterChoice::Arma(ArmaFitOptions {
                max_p: args.max_p,
                max_q: args.max_q,
                design: (seasonal || args.trend).then_some(DesignSpec {
                    seasonal_period: seasonal.then_some(args.frequency),
                    trend: args.trend,
                }),
                seasonal_ar_period: (args.seasonal_ar && seasonal).then_some(args.frequency),
            })
        }
        ModelArg::EtsAnn => ForecasterChoice::Ets { structure: EtsStructure::Ann },
        ModelArg::EtsAan => ForecasterChoice::Ets { structure: EtsStructure::Aan },
        ModelArg::EtsAna => ForecasterChoice::Ets { structure: EtsStructure::Ana },
    };
    let (report, stream) = fit_and_generate(&series, &choice, split).context("fitting model")?;
    report.save(&args.output)?;
    stream.save_csv(&args.errors)?;
    match &report.model {
        FittedModel::Arma(m) => println!(
            "ARMA({},{}) phi={:?} theta={:?} lambda={:.6} sigma2={:.6}",
            m.p(),
            m.q(),
            m.phi,
            m.theta,
            m.lambda,
            m.sigma2
        ),
        FittedModel::Ets(m) => println!(
            "ETS({:?}) alpha={:.6} beta={:?} gamma={:?}",
            m.structure, m.alpha, m.beta, m.gamma_s
        ),
    }
    println!(
        "aic={:.4} sse={:.6} converged={} m={} n={}",
        report.aic,
        report.sse,
        report.converged,
        stream.m(),
        stream.len()
    );
    Ok(Outcome::NoAlarm)
}

fn kind_output(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("steps");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    base.with_file_name(name)
}

pub fn monitor(args: MonitorArgs) -> Result<Outcome> {
    let series = load_series_with_timestamps(&args.input, &args.column, args.timestamp_column.as_deref(), 1)?;
    let m = match args.split.spec() {
        Some(spec) => spec.resolve(series.len())?,
        None => ErrorStream::load_csv(&args.input)
            .context("no --m/--train-frac given and the input has no phase column")?
            .m(),
    };
    let stream = ErrorStream::new(series.values().to_vec(), m, Origin::ExternallySupplied)?;
    if stream.monitoring().is_empty() {
        bail!("no monitoring observations after the first {m}");
    }
    let table = load_table(args.table.as_deref())?;
    let c = table.lookup(args.gamma, args.alpha)?;

    let mut kinds = match args.kind {
        KindArg::Mean => vec![DetectorKind::Mean],
        KindArg::Variance => vec![DetectorKind::Variance],
        KindArg::Both => vec![DetectorKind::Mean, DetectorKind::Variance],
    };
    if args.raw {
        kinds = kinds.into_iter().map(DetectorKind::to_raw).collect();
    }
    println!("m={m} monitoring={} gamma={} alpha={} c={c}", stream.monitoring().len(), args.gamma, args.alpha);

    let mut alarmed = false;
    for kind in kinds {
        let config = MonitorConfig::new(kind, args.gamma, args.alpha, c)?;
        let run = run_monitor(&stream, config)?;
        let tag = if kind.is_variance() { "variance" } else { "mean" };
        if let Some(out) = &args.output {
            let path = if args.kind == KindArg::Both { kind_output(out, tag) } else { out.clone() };
            save_step_log(&run.steps, &path)?;
        }
        match run.stop {
            Some(k) => {
                alarmed = true;
                let label = series
                    .timestamps()
                    .map(|ts| format!(" label={}", ts[m + k - 1]))
                    .unwrap_or_default();
                println!("{tag}: sigma_hat={} ALARM at k={k}{label}", run.sigma_hat);
            }
            None => println!("{tag}: sigma_hat={} no alarm", run.sigma_hat),
        }
    }
    Ok(if alarmed { Outcome::Alarm } else { Outcome::NoAlarm })
}

pub fn simulate(args: SimulateArgs) -> Result<Outcome> {
    let spec = ScenarioSpec::load(&args.scenario).with_context(|| format!("reading scenario {}", args.scenario.display()))?;
    let kind = match args.kind {
        Some(SimKindArg::Mean) => DetectorKind::Mean,
        Some(SimKindArg::Variance) => DetectorKind::Variance,
        None => spec.change.default_kind(),
    };
    let table = load_table(args.table.as_deref())?;
    let settings = MonitorSettings {
        gamma: args.gamma,
        alpha: args.alpha,
        critical_constant: table.lookup(args.gamma, args.alpha)?,
    };
    let period = spec.seasonal.period();
    let mut results = Vec::new();
    for method in &args.methods {
        let method = match method {
            MethodArg::RawCusum => MethodSpec::raw_cusum(kind),
            MethodArg::Arma => MethodSpec::arma(kind, period),
            MethodArg::Ets => MethodSpec::ets(kind, period),
        };
        results.push(run_cell(&spec, &method, &settings, args.replicates, args.seed, args.workers)?);
    }
    print!("{}", format_table(&results));
    export_results(&results, &args.output)?;
    Ok(Outcome::NoAlarm)
}
