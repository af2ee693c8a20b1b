// Coverage of generated samples as the instantiation set grows, rated by
// the scripted relevance judge, plus label balance and refinement depth.
//
// `cargo run --example coverage_sweep`

use std::error::Error;
use std::path::PathBuf;

use guardsynth::analytics::{coverage_csv, coverage_curve, label_balance, refinement_stats, GatewayRelevance};
use guardsynth::cli::load_task;
use guardsynth::gateway::mock::ScriptedBackend;
use guardsynth::gateway::Gateway;
use guardsynth::pipeline::{run, RunConfig, EPOCH};
use guardsynth::task::InputBlock;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/health");
    let task = load_task(&data.join("task.json")).map_err(|e| e.message)?;
    let gw = Gateway::with_backend(ScriptedBackend::from_path(&data.join("scenario.json"))?);
    let cfg = RunConfig {
        target_size: 30,
        created_at: Some(EPOCH.into()),
        ..RunConfig::default()
    };
    let out = run(&gw, &task, &cfg, &mut |_| {})?;

    let samples: Vec<InputBlock> = out.dataset.iter().map(|r| r.sample.input.clone()).collect();
    let insts = &out.manifest.decomposition.instantiations;
    let sizes: Vec<usize> = (1..=insts.len()).collect();
    let rater = GatewayRelevance {
        gateway: &gw,
        criterion: &task.criterion,
    };
    let curve = coverage_curve(&samples, insts, &sizes, &rater, 0.5)?;
    print!("{}", coverage_csv(&curve));
    assert!(curve.windows(2).all(|w| w[0].covered_fraction <= w[1].covered_fraction));

    let balance = label_balance(&out.dataset, &task.labels);
    for s in &balance.shares {
        println!("label {}: {} ({:.2})", s.label, s.count, s.fraction);
    }
    let r = refinement_stats(&out.dataset);
    println!("accepted without refinement: {:.2}", r.first_try_fraction);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
