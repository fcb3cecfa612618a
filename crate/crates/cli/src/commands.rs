//! Subcommand bodies.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sfit::data::{MaskFill, PartitionKey};
use sfit::engine::{
    calibrate_beta, screen_interactions, sfit_first_order, sfit_partitioned, sfit_second_order, BetaCalibration,
    CandidatePairs, SfitConfig, SfitFirstOrderReport, SfitSecondOrderReport,
};
use sfit::loco::{loco_test, LocoConfig};
use sfit::model::{train, PredictiveModel, TrainHistory};
use sfit::par::ExecMode;
use sfit::seed::{derive_seed, STREAM_CALIBRATION, STREAM_TRAIN};
use sfit::sign_test::FdrMethod;
use sfit::sim::{run_loco_comparison, run_power_study, ComparisonConfig, DgpSpec, StudyConfig};

use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, Study};
use crate::data::{prepare, rebuild};
use crate::report::{sig4, summary_table, write_file, write_report};
use crate::CliError;

const DEFAULT_BETA: f64 = 1e-2;

fn sfit_config(cfg: &RunConfig, beta: f64, classification: bool) -> SfitConfig {
    let t = &cfg.test;
    SfitConfig {
        alpha: t.alpha,
        beta,
        loss: cfg.delta_loss(classification),
        fdr: FdrMethod::from_name(&t.fdr).expect("validated"),
        ci_policy: t.ci,
        ci_for_all: t.ci_for_all,
        fill: MaskFill { numeric: t.numeric_fill, categorical: t.categorical_fill },
        group_dummies: t.group_dummies,
        baseline: BTreeSet::new(),
        exec: ExecMode::Parallel,
    }
}

fn history_csv(history: &TrainHistory) -> Vec<u8> {
    let mut out = b"epoch,train_loss,validation_loss,best\n".to_vec();
    for e in &history.epochs {
        let marker = if e.epoch == history.best_epoch { "*" } else { "" };
        writeln!(out, "{},{},{},{marker}", e.epoch, e.train_loss, e.validation_loss).expect("in-memory write");
    }
    out
}

#[derive(Serialize)]
struct FitResult<'a> {
    checkpoint: String,
    history: &'a TrainHistory,
    parameters: usize,
    train_rows: usize,
    validation_rows: usize,
    inference_rows: usize,
}

pub fn fit(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prepared = prepare(&cfg.data, cfg.seed, cfg.standardize())?;
    let train_seed = derive_seed(cfg.seed, STREAM_TRAIN, 0);
    let tcfg = cfg.train_config(train_seed);
    let trained = train(&tcfg, &prepared.train, &prepared.validation).map_err(CliError::runtime)?;
    let h = &trained.history;
    log::info!("best epoch {} of {}, validation loss {}", h.best_epoch, h.epochs.len(), h.best_validation_loss);

    let ck_path = out.join("checkpoint.json");
    let parameters = trained.model.parameter_count();
    Checkpoint::new(trained.model, tcfg, prepared.provenance, h.best_epoch, h.best_validation_loss).save(&ck_path)?;
    write_file(&out.join("history.csv"), &history_csv(h))?;
    let result = FitResult {
        checkpoint: ck_path.display().to_string(),
        history: h,
        parameters,
        train_rows: prepared.train.len(),
        validation_rows: prepared.validation.len(),
        inference_rows: prepared.inference.len(),
    };
    write_report(&out.join("fit.json"), "fit", cfg, &[("root", cfg.seed), ("train", train_seed)], &result)?;
    println!(
        "trained {} epochs (best {}, validation loss {}); checkpoint {}",
        h.epochs.len(),
        h.best_epoch,
        sig4(h.best_validation_loss),
        ck_path.display()
    );
    Ok(())
}

/// The part of a calibration report `test` reads back.
#[derive(Deserialize)]
struct CalibrationFile {
    result: BetaCalibration,
}

/// The run config with the data and model sections the checkpoint was built with.
fn with_checkpoint(cfg: &RunConfig, ck: &Checkpoint) -> RunConfig {
    let mut eff = cfg.clone();
    eff.data = ck.data.section.clone();
    eff.model.hidden = ck.train.hidden.clone();
    eff
}

pub fn calibrate(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let ck = Checkpoint::load(checkpoint)?;
    let cfg = &with_checkpoint(cfg, &ck);
    let prepared = rebuild(&ck.data, None)?;
    let classification = prepared.validation.y.class_count().is_some();
    let seed = derive_seed(cfg.seed, STREAM_CALIBRATION, 0);
    let scfg = sfit_config(cfg, DEFAULT_BETA, classification);
    let grid = cfg.calibrate.grid();
    let cal = calibrate_beta(&ck.model, &prepared.validation, &scfg, &grid, cfg.calibrate.random_models, seed)
        .map_err(CliError::runtime)?;
    write_report(&out.join("calibration.json"), "calibrate", cfg, &[("root", cfg.seed), ("data", ck.data.root_seed), ("calibration", seed)], &cal)?;
    for (b, f) in cal.grid.iter().zip(&cal.false_discovery) {
        println!("beta {:>10}  discovery fraction {}", sig4(*b), sig4(*f));
    }
    if !cal.qualified {
        return Err(CliError::Runtime(format!(
            "no grid value brought the discovery fraction to {} or below; reporting the largest, {}",
            cfg.test.alpha,
            sig4(cal.chosen)
        )));
    }
    println!("chosen beta {}", sig4(cal.chosen));
    Ok(())
}

#[derive(Serialize)]
struct TestResult {
    beta: f64,
    beta_source: String,
    first_order: Option<SfitFirstOrderReport>,
    second_order: Option<SfitSecondOrderReport>,
    partitions: Option<Vec<(String, SfitFirstOrderReport)>>,
}

fn resolve_beta(cfg: &RunConfig, calibration: Option<&Path>, out: &Path) -> Result<(f64, String), CliError> {
    if let Some(b) = cfg.test.beta {
        return Ok((b, "config".into()));
    }
    let default_path = out.join("calibration.json");
    let path = match calibration {
        Some(p) => p,
        None if default_path.exists() => &default_path,
        None => return Ok((DEFAULT_BETA, "default".into())),
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read calibration {}: {e}", path.display())))?;
    let file: CalibrationFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("calibration {} is malformed: {e}", path.display())))?;
    Ok((file.result.chosen, format!("calibration {}", path.display())))
}

fn candidates<M: PredictiveModel + ?Sized>(model: &M, p: usize, cfg: &RunConfig) -> Result<CandidatePairs, CliError> {
    match model.first_layer_weights() {
        Some(w) if !cfg.test.exhaustive && p >= 2 => screen_interactions(w, cfg.test.screen_l).map_err(CliError::runtime),
        _ => Ok(CandidatePairs::exhaustive(p)),
    }
}

fn second_order_summary(r: &SfitSecondOrderReport) -> String {
    let mut s = String::from("second order: ");
    if !r.gate.passed {
        s.push_str(&format!("gate not passed (p-value {})\n", sig4(r.gate.outcome.p_value)));
        return s;
    }
    s.push_str(&format!("gate passed (p-value {}); ", sig4(r.gate.outcome.p_value)));
    let pairs = r.unordered_pairs();
    if pairs.is_empty() {
        s.push_str("no significant pairs\n");
    } else {
        let list: Vec<String> = pairs.iter().map(|(a, b)| format!("({a},{b})")).collect();
        s.push_str(&format!("significant pairs {}\n", list.join(" ")));
    }
    for p in r.pairs.iter().filter(|p| p.significant) {
        s.push_str(&format!("  ({},{})  median {}  p-value {}\n", p.j, p.k, sig4(p.outcome.statistic), sig4(p.outcome.p_value)));
    }
    if let Some(g) = &r.next_gate {
        let verdict = if g.passed { "passed" } else { "not passed" };
        s.push_str(&format!("third-order gate {verdict} (p-value {})\n", sig4(g.outcome.p_value)));
    }
    s
}

pub fn test(
    cfg: &RunConfig,
    checkpoint: &Path,
    data: Option<&Path>,
    calibration: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let ck = Checkpoint::load(checkpoint)?;
    let cfg = &with_checkpoint(cfg, &ck);
    let other = data.map(|p| {
        let mut section = ck.data.section.clone();
        section.source = crate::config::Source::Csv;
        section.path = Some(p.to_path_buf());
        section
    });
    let prepared = rebuild(&ck.data, other.as_ref())?;
    let d2 = &prepared.inference;
    if d2.x.width() != ck.model.input_width() {
        return Err(CliError::Runtime(format!(
            "model expects {} input columns, data has {}",
            ck.model.input_width(),
            d2.x.width()
        )));
    }
    let classification = d2.y.class_count().is_some();
    let (beta, beta_source) = resolve_beta(cfg, calibration, out)?;
    let scfg = sfit_config(cfg, beta, classification);

    let mut summary = String::new();
    let mut result = TestResult { beta, beta_source, first_order: None, second_order: None, partitions: None };
    if let Some(key) = &cfg.test.partition {
        let key = if key == "class" { PartitionKey::Class } else { PartitionKey::Group(key.clone()) };
        let parts = sfit_partitioned(&ck.model, d2, &key, &scfg).map_err(CliError::runtime)?;
        for (label, r) in &parts {
            summary.push_str(&format!("[{label}]\n{}", summary_table(r)));
        }
        result.partitions = Some(parts);
    } else {
        let first = sfit_first_order(&ck.model, d2, &scfg).map_err(CliError::runtime)?;
        summary.push_str(&summary_table(&first));
        if cfg.test.order == 2 {
            let p = d2.x.feature_count();
            let cands = candidates(&ck.model, p, cfg)?;
            let second = sfit_second_order(
                &ck.model,
                d2,
                &scfg.with_beta(cfg.test.beta2),
                &first.significant,
                &cands,
                cfg.test.exhaustive,
            )
            .map_err(CliError::runtime)?;
            summary.push_str(&second_order_summary(&second));
            result.second_order = Some(second);
        }
        result.first_order = Some(first);
    }
    write_report(&out.join("test.json"), "test", cfg, &[("root", cfg.seed), ("data", ck.data.root_seed)], &result)?;
    write_file(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

pub fn loco(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prepared = prepare(&cfg.data, cfg.seed, cfg.standardize())?;
    let schema = prepared.train.x.schema();
    let features = if cfg.loco.features.is_empty() {
        None
    } else {
        Some(
            cfg.loco
                .features
                .iter()
                .map(|n| schema.index_of(n).ok_or_else(|| CliError::Config(format!("loco.features: unknown feature '{n}'"))))
                .collect::<Result<Vec<_>, _>>()?,
        )
    };
    let classification = prepared.train.y.class_count().is_some();
    let train_seed = derive_seed(cfg.seed, STREAM_TRAIN, 0);
    let lcfg = LocoConfig {
        alpha: cfg.test.alpha,
        loss: cfg.delta_loss(classification),
        ci_policy: cfg.test.ci,
        features,
        exec: ExecMode::Parallel,
    };
    let outcome =
        loco_test(&prepared.train, &prepared.validation, &prepared.inference, &cfg.train_config(train_seed), &lcfg)
            .map_err(CliError::runtime)?;
    let r = &outcome.report;
    write_report(&out.join("loco.json"), "loco", cfg, &[("root", cfg.seed), ("train", train_seed)], r)?;
    println!("loco: {} refits in {}s", r.refit_count, sig4(r.total_wall_secs));
    for f in &r.features {
        match &f.outcome {
            Some(o) => println!(
                "{:<12} median {:>10}  p-value {:>10}{}",
                f.name,
                sig4(o.statistic),
                sig4(o.p_value),
                if f.significant { "  *" } else { "" }
            ),
            None => println!("{:<12} failed: {}", f.name, f.error.as_deref().unwrap_or("unknown")),
        }
    }
    if r.features.iter().any(|f| f.outcome.is_none()) {
        return Err(CliError::Runtime("some refits failed".into()));
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = &cfg.simulate;
    match s.study {
        Study::Power => {
            let n_train = s.n_train.unwrap_or(20_000);
            let mut study = StudyConfig::main(n_train, s.trials);
            study.n_validation = s.n_validation.unwrap_or(study.n_validation);
            study.n_inference = s.n_inference.unwrap_or(study.n_inference);
            study.train = cfg.train_config(0);
            study.loss = cfg.delta_loss(false);
            study.second_order = s.second_order;
            study.screen_l = cfg.test.screen_l;
            let betas: Vec<(f64, f64)> = s.betas.iter().map(|b| (b[0], b[1])).collect();
            study.cells = StudyConfig::grid(&s.alphas, &betas, &s.n2s);
            study.validate().map_err(|e| CliError::Config(format!("simulate: {e}")))?;
            let result = run_power_study(&study, cfg.seed).map_err(CliError::runtime)?;
            let mut csv = Vec::new();
            result.write_csv(&mut csv).map_err(CliError::runtime)?;
            write_file(&out.join("power.csv"), &csv)?;
            write_report(&out.join("power.json"), "simulate", cfg, &[("root", cfg.seed)], &result)?;
            for t in &result.tables {
                let first: Vec<String> = t.first_order.iter().map(|(n, f)| format!("{n}={}", sig4(*f))).collect();
                println!(
                    "alpha {} beta1 {} beta2 {} n2 {}: {}",
                    sig4(t.cell.alpha),
                    sig4(t.cell.beta1),
                    sig4(t.cell.beta2),
                    t.cell.n2,
                    first.join(" ")
                );
            }
            if !result.failed_trials.is_empty() {
                log::warn!("{} trials failed", result.failed_trials.len());
            }
        }
        Study::LocoComparison => {
            let mut comp = ComparisonConfig::correlated_toy(s.trials);
            comp.n_train = s.n_train.unwrap_or(comp.n_train);
            comp.n_validation = s.n_validation.unwrap_or(comp.n_validation);
            comp.n_inference = s.n_inference.unwrap_or(comp.n_inference);
            comp.alpha = s.alphas.first().copied().unwrap_or(comp.alpha);
            comp.beta = s.betas.first().map_or(comp.beta, |b| b[0]);
            comp.dgp = DgpSpec::correlated_toy();
            let table = run_loco_comparison(&comp, cfg.seed).map_err(CliError::runtime)?;
            let mut csv = Vec::new();
            table.write_csv(&mut csv).map_err(CliError::runtime)?;
            write_file(&out.join("loco-comparison.csv"), &csv)?;
            write_report(&out.join("loco-comparison.json"), "simulate", cfg, &[("root", cfg.seed)], &table)?;
            for (i, n) in table.names.iter().enumerate() {
                println!("{n}: sfit {} loco {}", sig4(table.sfit_rates[i]), sig4(table.loco_rates[i]));
            }
            println!("timing ratio loco/sfit {}", sig4(table.timing_ratio()));
        }
    }
    Ok(())
}
