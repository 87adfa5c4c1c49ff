use pgica_core::datagen::{generate_benchmark, generate_hierarchical, Protocol};

use super::{announce, core_error, path_flag};
use crate::cli::GenerateArgs;
use crate::config::ConfigFile;
use crate::formats::{write_dataset, DatasetMeta};
use crate::{output_path, CliError, Outcome};

pub fn run(cfg: &ConfigFile, a: GenerateArgs) -> Outcome {
    let mut r = cfg.resolver("generate");
    let seed: u64 = r.require("seed", a.seed)?;
    let protocol: String = r.require("protocol", a.protocol)?;
    let n = r.get("n", a.n, 500usize)?;
    let d = r.get("d", a.d, 4usize)?;
    let sigma = r.get("sigma", a.sigma, 0.01)?;
    let ds = match protocol.as_str() {
        "hierarchical" => {
            let sigma2 = r.get("sigma2", a.sigma2, 1.0)?;
            let hard = r.switch("hard", a.hard)?;
            generate_hierarchical(n, d, sigma, sigma2, hard, seed).map_err(core_error)?
        }
        "benchmark" => {
            let family = r.require("family", a.family)?;
            generate_benchmark(family, n, d, sigma, seed).map_err(core_error)?
        }
        other => {
            return Err(CliError::Usage(format!("unknown protocol '{other}' (expected hierarchical or benchmark)")))
        }
    };
    let default_out = format!("{}_{}_n{n}_d{d}_seed{seed}.jsonl", protocol, ds.protocol.family_token());
    let out = output_path(r.get("out", path_flag(a.out), default_out)?.as_ref());
    let config = r.finish()?;

    let truth = ds.truth.as_ref();
    let meta = DatasetMeta {
        protocol: ds.protocol.name().to_string(),
        n,
        d,
        sigma,
        family: ds.protocol.family_token(),
        seed,
        families: truth.and_then(|t| t.families.as_ref()).map(|f| f.iter().map(|x| x.token()).collect()),
        standardized: matches!(ds.protocol, Protocol::Benchmark { .. }),
        config,
    };
    write_dataset(&out, &meta, &ds.x, truth.map(|t| (&t.s, &t.a)))?;
    announce("dataset", &out);
    let mut summary = serde_json::to_value(&meta).map_err(anyhow::Error::from)?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("config");
    }
    println!("{summary}");
    Ok(true)
}
