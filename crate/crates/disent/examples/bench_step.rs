use disent::dataset::{build_dataset, DatasetSpec};
use disent::regularizers::{RegKind, RegularizerConfig};
use disent::training::{init_run, train_steps, LossTrace, TrainConfig};
use disent::vae::ModelConfig;

fn main() {
    let ds = build_dataset(DatasetSpec::default()).unwrap();
    let cfg = TrainConfig {
        steps: 100,
        batch_size: 64,
        seed: 0,
        model: ModelConfig {
            latent_dim: 10,
            ..Default::default()
        },
        regularizer: RegularizerConfig::defaults_for(RegKind::Factor),
        ..Default::default()
    };
    let mut state = init_run(&ds, &cfg).unwrap();
    let mut trace = LossTrace::default();
    // warmup
    train_steps(&mut state, &ds, 10, &mut trace).unwrap();
    let t0 = std::time::Instant::now();
    train_steps(&mut state, &ds, 110, &mut trace).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("factor kind: {:.2} ms/step -> 20k steps = {:.1} min", dt * 10.0, dt / 100.0 * 20000.0 / 60.0);
    let last = trace.records.last().unwrap();
    println!("recon={:.2} kl={:.3} disc={:?}", last.recon, last.kl, last.disc_loss);

    let cfg_beta = TrainConfig {
        regularizer: RegularizerConfig { beta: 1.0, ..RegularizerConfig::defaults_for(RegKind::Beta) },
        ..cfg
    };
    let mut state = init_run(&ds, &cfg_beta).unwrap();
    let mut trace = LossTrace::default();
    train_steps(&mut state, &ds, 10, &mut trace).unwrap();
    let t0 = std::time::Instant::now();
    train_steps(&mut state, &ds, 110, &mut trace).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("beta kind:   {:.2} ms/step -> 20k steps = {:.1} min", dt * 10.0, dt / 100.0 * 20000.0 / 60.0);
}
