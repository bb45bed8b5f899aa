use std::path::PathBuf;

use anyhow::Result;
use echoroom::equalizer::{DEFAULT_CLAMP_DB, DEFAULT_FIR_LENGTH};
use echoroom::estimators::{DEFAULT_KR, DEFAULT_KS_GLOBAL, DEFAULT_KS_LOCAL, DEFAULT_MU};
use echoroom::eval::{CvConfig, EstimatorSpec};
use echoroom::features::{FeatureKind, DEFAULT_TAIL_PROB};

use crate::args::{Cli, Command, Common, EchoSource};
use crate::commands::*;
use crate::config::FileConfig;
use crate::{EXIT_OK, EXIT_PARTIAL};

pub const DEFAULT_ROOMS: usize = 600;
pub const DEFAULT_SHELF_DB: f64 = 0.0;
pub const DEFAULT_CORNER_HZ: f64 = 100.0;
pub const DEFAULT_ESTIMATORS: [&str; 4] = ["average", "ls", "gpca", "lpca-rt"];

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn echo_input(src: &EchoSource) -> Result<EchoInput> {
    match (&src.record, &src.ir) {
        (Some(r), None) => Ok(EchoInput::Record(r.clone())),
        (None, Some(p)) => Ok(EchoInput::Ir {
            path: p.clone(),
            sample_rate: src.sample_rate.ok_or_else(|| usage("sample-rate: required with --ir"))?,
        }),
        _ => Err(usage("record/ir: give exactly one of --record or --ir")),
    }
}

/// Merges flags over the config file, runs the subcommand and returns the
/// process exit status.
pub fn resolve_and_run(cli: &Cli) -> Result<i32> {
    let common = &cli.common;
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let jobs = common.jobs.or(file.jobs).unwrap_or(0);

    match &cli.command {
        Command::GenData(a) => {
            let mut generator = file.gen_data.generator.clone().unwrap_or_default();
            if let Some(n) = a.nfft {
                generator.nfft = n;
            }
            if let Some(n) = a.listeners {
                generator.listeners = n;
            }
            if let Some(o) = a.max_order {
                generator.max_order_range = [o, o];
            }
            let s = GenDataSettings {
                rooms: a.rooms.or(file.gen_data.rooms).unwrap_or(DEFAULT_ROOMS),
                seed,
                generator,
                out: common.out.clone().ok_or_else(|| usage("out: gen-data needs an output directory"))?,
                jobs,
            };
            cmd_gen_data(&s)?;
        }
        Command::Features(a) => {
            cmd_features(&FeaturesSettings { dataset: a.dataset.clone(), out: out_or(common, "features.csv") })?;
        }
        Command::Train(a) => {
            let t = &file.train;
            let est = a.est.clone().or(t.est.clone()).ok_or_else(|| usage("est: choose ls, gpca or lpca"))?;
            let estimator = match est.to_ascii_lowercase().as_str() {
                "ls" => EstimatorSpec::Ls { mu: a.mu.or(t.mu).unwrap_or(DEFAULT_MU) },
                "gpca" => EstimatorSpec::GlobalPca {
                    ks: a.ks.or(t.ks).unwrap_or(DEFAULT_KS_GLOBAL),
                    kr: a.kr.or(t.kr).unwrap_or(DEFAULT_KR),
                },
                "lpca" => {
                    let feature = a.feature.clone().or(t.feature.clone()).unwrap_or_else(|| "rt30".into());
                    EstimatorSpec::LocalPca {
                        feature: feature.parse::<FeatureKind>().map_err(|e| usage(format!("feature: {e}")))?,
                        q: a.q.or(t.q).unwrap_or(DEFAULT_TAIL_PROB),
                        ks: a.ks.or(t.ks).unwrap_or(DEFAULT_KS_LOCAL),
                        kr: a.kr.or(t.kr).unwrap_or(DEFAULT_KR),
                    }
                }
                other => return Err(usage(format!("est: unknown estimator `{other}`; choose ls, gpca or lpca"))),
            };
            cmd_train(&TrainSettings { dataset: a.dataset.clone(), estimator, out: out_or(common, "model.json") })?;
        }
        Command::Predict(a) => {
            cmd_predict(&PredictSettings {
                model: a.model.clone(),
                input: echo_input(&a.source)?,
                out: out_or(common, "r_hat.csv"),
            })?;
        }
        Command::Design(a) => {
            let d = &file.design;
            let room = match (&a.r_hat, &a.model) {
                (Some(p), None) => RoomInput::RHat(p.clone()),
                (None, Some(m)) => RoomInput::Model { model: m.clone(), input: echo_input(&a.source)? },
                _ => return Err(usage("r-hat/model: give --r-hat, or --model with --record or --ir")),
            };
            cmd_design(&DesignSettings {
                room,
                shelf_db: a.shelf_db.or(d.shelf_db).unwrap_or(DEFAULT_SHELF_DB),
                corner_hz: a.corner_hz.or(d.corner_hz).unwrap_or(DEFAULT_CORNER_HZ),
                clamp_db: (
                    a.clamp_min_db.or(d.clamp_min_db).unwrap_or(DEFAULT_CLAMP_DB.0),
                    a.clamp_max_db.or(d.clamp_max_db).unwrap_or(DEFAULT_CLAMP_DB.1),
                ),
                fir_length: a.fir_length.or(d.fir_length).unwrap_or(DEFAULT_FIR_LENGTH),
                smooth_octave: a.smooth_octave.or(d.smooth_octave),
                out: out_or(common, "eq"),
            })?;
        }
        Command::Evaluate(a) => {
            let e = &file.evaluate;
            let names: Vec<String> = if !a.estimators.is_empty() {
                a.estimators.clone()
            } else if let Some(list) = &e.estimators {
                list.clone()
            } else {
                DEFAULT_ESTIMATORS.iter().map(|s| s.to_string()).collect()
            };
            let estimators = names
                .iter()
                .map(|n| n.parse::<EstimatorSpec>().map_err(|err| usage(format!("est: {err}"))))
                .collect::<Result<Vec<_>>>()?;
            let d = CvConfig::default();
            let outcome = cmd_evaluate(&EvaluateSettings {
                dataset: a.dataset.clone(),
                estimators,
                n_train: a.n_train.or(e.n_train).unwrap_or(d.n_train),
                n_val: a.n_val.or(e.n_val).unwrap_or(d.n_val),
                repeats: a.repeats.or(e.repeats).unwrap_or(d.repeats),
                seed,
                out: out_or(common, "report"),
                jobs,
            })?;
            let failed = outcome.failed_repeats();
            if failed > 0 {
                eprintln!("warning: {failed} repeat(s) failed to train; see run.json");
                return Ok(EXIT_PARTIAL);
            }
        }
    }
    Ok(EXIT_OK)
}
