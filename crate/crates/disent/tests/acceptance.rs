//! Acceptance suite: seven criteria, one test each, printing one PASS/FAIL
//! line per criterion. Criterion 6 trains at desk scale and dominates the
//! runtime (run with `--nocapture` to watch the lines appear).

use std::collections::BTreeMap;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use ndarray::{arr2, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use disent::dataset::{build_dataset, DatasetSpec, FactorTuple, GroundTruthDataset};
use disent::metrics::{
    dci, discrete_mutual_information, evaluate_all, factor_vae_score, irs, mig, sap, MetricConfig,
    Representation, RepresentationMatrix,
};
use disent::nn::fill_normal;
use disent::regularizers::{
    annealed_reg, beta_reg, btc_reg, btc_reg_with_grads, capacity_at, dip_penalty,
    dip_penalty_with_grad, discriminator_loss, factor_vae_reg, latent_covariance, permute_dims,
    tc_estimate, CovarianceMatrix, Discriminator, DiscriminatorConfig, RegKind, RegularizerConfig,
};
use disent::runner::{
    aggregate, expand_sweep, rank_csv, run_sweep, GroupField, RegOverride, SweepSpec,
};
use disent::training::{train, TrainConfig};
use disent::vae::{
    elbo_loss, kl_to_prior, kl_to_prior_grads, reconstruction_loss, reconstruction_loss_grad,
    reparameterize, reparameterize_backward, Decoder, EncoderOutput, ModelConfig,
};

fn criterion(id: u32, name: &str, body: impl FnOnce() + UnwindSafe) {
    let result = catch_unwind(body);
    match &result {
        Ok(()) => println!("ACCEPTANCE {id} ({name}): PASS"),
        Err(_) => println!("ACCEPTANCE {id} ({name}): FAIL"),
    }
    if let Err(e) = result {
        resume_unwind(e);
    }
}

/// Oracle representation that reads codes straight off the factor values.
struct IdentityOracle {
    dims: usize,
}

impl Representation for IdentityOracle {
    fn latent_dim(&self) -> usize {
        self.dims
    }

    fn codes_for(
        &self,
        _dataset: &GroundTruthDataset,
        factors: &[FactorTuple],
    ) -> disent::Result<Array2<f64>> {
        let mut codes = Array2::<f64>::zeros((factors.len(), self.dims));
        for (i, t) in factors.iter().enumerate() {
            for (j, &v) in t.values.iter().enumerate().take(self.dims) {
                codes[[i, j]] = v as f64;
            }
        }
        Ok(codes)
    }
}

/// Full-grid representation with codes = factor values.
fn full_grid_identity_rep(dataset: &GroundTruthDataset) -> RepresentationMatrix {
    let k = dataset.factor_space().num_factors();
    let n = dataset.num_configurations();
    let mut codes = Array2::<f64>::zeros((n, k));
    let mut factors = Array2::<usize>::zeros((n, k));
    for (i, tuple) in dataset.iter_grid().enumerate() {
        for (j, &v) in tuple.values.iter().enumerate() {
            codes[[i, j]] = v as f64;
            factors[[i, j]] = v;
        }
    }
    RepresentationMatrix::new(codes, factors, dataset.factor_space().clone()).unwrap()
}

const TOL: f64 = 1e-9;

#[test]
fn criterion_1_closed_form_unit_suite() {
    criterion(1, "closed-form unit suite", || {
        let started = Instant::now();

        // KL to the prior
        let kl0 = kl_to_prior(&EncoderOutput {
            mu: Array2::<f64>::zeros((1, 1)),
            logvar: Array2::zeros((1, 1)),
        });
        assert!(kl0.abs() < TOL);
        let kl_half = kl_to_prior(&EncoderOutput {
            mu: arr2(&[[1.0f64]]),
            logvar: arr2(&[[0.0]]),
        });
        assert!((kl_half - 0.5).abs() < TOL);
        let kl_wide = kl_to_prior(&EncoderOutput {
            mu: arr2(&[[0.0f64]]),
            logvar: arr2(&[[4.0f64.ln()]]),
        });
        assert!((kl_wide - 0.5 * (4.0 - 1.0 - 4.0f64.ln())).abs() < TOL);

        // beta regularizer
        assert!((beta_reg(2.0, 1.0) - 2.0).abs() < TOL);
        assert!((beta_reg(2.0, 4.0) - 8.0).abs() < TOL);
        assert!(beta_reg(0.0, 7.0).abs() < TOL);

        // annealed regularizer and its capacity schedule
        assert!(annealed_reg(1.0, 10.0, 1.0).abs() < TOL);
        assert!((annealed_reg(3.0, 10.0, 1.0) - 20.0).abs() < TOL);
        assert!((annealed_reg(1.0, 10.0, 3.0) - 20.0).abs() < TOL);
        assert!(capacity_at(0, 25.0, 100).unwrap().abs() < TOL);
        assert!((capacity_at(50, 25.0, 100).unwrap() - 12.5).abs() < TOL);
        assert!((capacity_at(400, 25.0, 100).unwrap() - 25.0).abs() < TOL);

        // DIP penalty
        let id = CovarianceMatrix::new(arr2(&[[1.0f64, 0.0], [0.0, 1.0]])).unwrap();
        assert!(dip_penalty(&id, 10.0, 10.0).abs() < TOL);
        let half = CovarianceMatrix::new(arr2(&[[1.0f64, 0.5], [0.5, 1.0]])).unwrap();
        assert!((dip_penalty(&half, 10.0, 10.0) - 5.0).abs() < TOL);
        let stretched = CovarianceMatrix::new(arr2(&[[2.0f64, 0.0], [0.0, 1.0]])).unwrap();
        assert!((dip_penalty(&stretched, 0.0, 10.0) - 10.0).abs() < TOL);

        // TC estimate from discriminator logits
        assert!(tc_estimate(&arr2(&[[1.0f64, 1.0], [0.3, 0.3]])).abs() < TOL);
        assert!((tc_estimate(&arr2(&[[2.0f64, 0.0], [2.0, 0.0]])) - 2.0).abs() < TOL);
        assert!(tc_estimate(&arr2(&[[1.0f64, 0.0], [0.0, 1.0]])).abs() < TOL);
        assert!((factor_vae_reg(1.0, 10.0, 0.2) - 3.0).abs() < TOL);

        // discriminator loss
        let chance = Array2::<f64>::zeros((4, 2));
        assert!((discriminator_loss(&chance, &chance) - std::f64::consts::LN_2).abs() < TOL);
        let sep_real = arr2(&[[20.0f64, -20.0], [20.0, -20.0]]);
        let sep_perm = arr2(&[[-20.0f64, 20.0], [-20.0, 20.0]]);
        assert!(discriminator_loss(&sep_real, &sep_perm) < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut real = Array2::<f64>::zeros((3, 2));
        let mut perm = Array2::<f64>::zeros((3, 2));
        fill_normal(&mut real, 1.5, &mut rng);
        fill_normal(&mut perm, 1.5, &mut rng);
        let oracle = {
            let ce = |l0: f64, l1: f64, target: usize| {
                let m = l0.max(l1);
                let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
                lse - if target == 0 { l0 } else { l1 }
            };
            let mut total = 0.0;
            for i in 0..3 {
                total += 0.5 * ce(real[[i, 0]], real[[i, 1]], 0) / 3.0;
                total += 0.5 * ce(perm[[i, 0]], perm[[i, 1]], 1) / 3.0;
            }
            total
        };
        assert!((discriminator_loss(&real, &perm) - oracle).abs() < TOL);

        // discrete mutual information
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let self_mi = discrete_mutual_information(&labels, &labels).unwrap();
        assert!((self_mi - 4.0f64.ln()).abs() < TOL);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for x in 0..3 {
            for y in 0..5 {
                a.push(x);
                b.push(y);
            }
        }
        assert!(discrete_mutual_information(&a, &b).unwrap().abs() < TOL);

        // reconstruction loss closed forms
        let logits0 = Array4::<f64>::zeros((2, 1, 4, 4));
        let mut x = Array4::zeros((2, 1, 4, 4));
        for v in x.iter_mut() {
            *v = rng.gen_range(0.0..=1.0);
        }
        let loss = reconstruction_loss(&logits0, &x).unwrap();
        assert!((loss - 16.0 * std::f64::consts::LN_2).abs() < TOL);
        let ones = Array4::<f64>::ones((1, 1, 2, 2));
        let big = Array4::from_elem((1, 1, 2, 2), 20.0);
        assert!(reconstruction_loss(&big, &ones).unwrap() < 1e-6);

        // reparameterization and the bound
        let enc = EncoderOutput {
            mu: arr2(&[[1.0f64]]),
            logvar: arr2(&[[4.0f64.ln()]]),
        };
        let z = reparameterize(&enc, &arr2(&[[0.5]]));
        assert!((z.z[[0, 0]] - 2.0).abs() < TOL);
        assert!((elbo_loss(3.0, 0.5) - 3.5).abs() < TOL);

        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 10.0, "unit suite took {elapsed:.1}s");
    });
}

#[test]
fn criterion_2_gradient_suite() {
    criterion(2, "finite-difference gradient suite", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rel_tol = 1e-4;
        let h = 1e-5;

        // (a) recon + kl through the decoder on a 2-latent, 4x4 instance
        {
            let cfg = ModelConfig {
                latent_dim: 2,
                conv_widths: vec![],
                fc_width: 8,
                ..Default::default()
            };
            let mut dec = Decoder::<f64>::init(&cfg, 4, &mut rng).unwrap();
            let mut mu = Array2::<f64>::zeros((3, 2));
            let mut lv = Array2::<f64>::zeros((3, 2));
            let mut eps = Array2::<f64>::zeros((3, 2));
            fill_normal(&mut mu, 0.8, &mut rng);
            fill_normal(&mut lv, 0.4, &mut rng);
            fill_normal(&mut eps, 1.0, &mut rng);
            let mut x = Array4::zeros((3, 1, 4, 4));
            for v in x.iter_mut() {
                *v = rng.gen_range(0.0..=1.0);
            }

            let value = |dec: &Decoder<f64>, mu: &Array2<f64>, lv: &Array2<f64>| {
                let enc = EncoderOutput {
                    mu: mu.clone(),
                    logvar: lv.clone(),
                };
                let z = reparameterize(&enc, &eps);
                let (logits, _) = dec.forward(&z.z).unwrap();
                reconstruction_loss(&logits, &x).unwrap() + kl_to_prior(&enc)
            };
            let enc = EncoderOutput {
                mu: mu.clone(),
                logvar: lv.clone(),
            };
            let z = reparameterize(&enc, &eps);
            let (logits, cache) = dec.forward(&z.z).unwrap();
            let g_logits = reconstruction_loss_grad(&logits, &x);
            let g_z = dec.backward(&cache, &g_logits);
            let (mut g_mu, mut g_lv) = reparameterize_backward(&enc, &eps, &g_z);
            let (kl_mu, kl_lv) = kl_to_prior_grads(&enc);
            g_mu += &kl_mu;
            g_lv += &kl_lv;

            for idx in 0..6 {
                for which in 0..2 {
                    let mut mp = mu.clone();
                    let mut lp = lv.clone();
                    let mut mm = mu.clone();
                    let mut lm = lv.clone();
                    let (tp, tm, g) = if which == 0 {
                        (&mut mp, &mut mm, g_mu.as_slice().unwrap()[idx])
                    } else {
                        (&mut lp, &mut lm, g_lv.as_slice().unwrap()[idx])
                    };
                    tp.as_slice_mut().unwrap()[idx] += h;
                    tm.as_slice_mut().unwrap()[idx] -= h;
                    let fd = (value(&dec, &mp, &lp) - value(&dec, &mm, &lm)) / (2.0 * h);
                    assert!(
                        (fd - g).abs() / g.abs().max(1e-6) < rel_tol,
                        "recon+kl gradient off at {idx}/{which}"
                    );
                }
            }
        }

        // (b) dip penalty
        {
            let mut s = Array2::<f64>::zeros((6, 4));
            fill_normal(&mut s, 0.9, &mut rng);
            let (_, grad) = dip_penalty_with_grad(&s, 7.0, 3.0).unwrap();
            for idx in 0..s.len() {
                let mut p = s.clone();
                let mut m = s.clone();
                p.as_slice_mut().unwrap()[idx] += h;
                m.as_slice_mut().unwrap()[idx] -= h;
                let fp = dip_penalty(&latent_covariance(&p).unwrap(), 7.0, 3.0);
                let fm = dip_penalty(&latent_covariance(&m).unwrap(), 7.0, 3.0);
                let fd = (fp - fm) / (2.0 * h);
                let g = grad.as_slice().unwrap()[idx];
                assert!(
                    (fd - g).abs() / g.abs().max(1e-8) < rel_tol,
                    "dip gradient off at {idx}"
                );
            }
        }

        // (c) btc penalty
        {
            let n = 6;
            let d = 4;
            let mut mu = Array2::<f64>::zeros((n, d));
            let mut lv = Array2::<f64>::zeros((n, d));
            let mut z = Array2::<f64>::zeros((n, d));
            fill_normal(&mut mu, 0.8, &mut rng);
            fill_normal(&mut lv, 0.4, &mut rng);
            fill_normal(&mut z, 1.0, &mut rng);
            let beta = 6.0;
            let ds = 100;
            let (_, (g_mu, g_lv, g_z)) = btc_reg_with_grads(&mu, &lv, &z, beta, ds).unwrap();
            let value = |mu: &Array2<f64>, lv: &Array2<f64>, z: &Array2<f64>| {
                btc_reg(mu, lv, z, beta, ds).unwrap().penalty
            };
            for idx in 0..n * d {
                for (which, grad) in [(0, &g_mu), (1, &g_lv), (2, &g_z)] {
                    let mut mp = mu.clone();
                    let mut lp = lv.clone();
                    let mut zp = z.clone();
                    let mut mm = mu.clone();
                    let mut lm = lv.clone();
                    let mut zm = z.clone();
                    match which {
                        0 => {
                            mp.as_slice_mut().unwrap()[idx] += h;
                            mm.as_slice_mut().unwrap()[idx] -= h;
                        }
                        1 => {
                            lp.as_slice_mut().unwrap()[idx] += h;
                            lm.as_slice_mut().unwrap()[idx] -= h;
                        }
                        _ => {
                            zp.as_slice_mut().unwrap()[idx] += h;
                            zm.as_slice_mut().unwrap()[idx] -= h;
                        }
                    }
                    let fd = (value(&mp, &lp, &zp) - value(&mm, &lm, &zm)) / (2.0 * h);
                    let g = grad.as_slice().unwrap()[idx];
                    assert!(
                        (fd - g).abs() / g.abs().max(1e-6) < rel_tol,
                        "btc gradient off at {idx}/{which}"
                    );
                }
            }
        }

        // (d) factor regularizer through the discriminator
        {
            let d = 4;
            let n = 5;
            let disc = Discriminator::<f64>::init(
                d,
                &DiscriminatorConfig {
                    hidden_width: 8,
                    num_layers: 2,
                    learning_rate: 1e-4,
                },
                &mut rng,
            )
            .unwrap();
            let mut mu = Array2::<f64>::zeros((n, d));
            let mut lv = Array2::<f64>::zeros((n, d));
            let mut eps = Array2::<f64>::zeros((n, d));
            fill_normal(&mut mu, 0.8, &mut rng);
            fill_normal(&mut lv, 0.4, &mut rng);
            fill_normal(&mut eps, 1.0, &mut rng);
            let gamma = 9.0;
            let value = |mu: &Array2<f64>, lv: &Array2<f64>| {
                let enc = EncoderOutput {
                    mu: mu.clone(),
                    logvar: lv.clone(),
                };
                let z = reparameterize(&enc, &eps).z;
                let (logits, _) = disc.forward(&z);
                factor_vae_reg(kl_to_prior(&enc), gamma, tc_estimate(&logits))
            };
            let enc = EncoderOutput {
                mu: mu.clone(),
                logvar: lv.clone(),
            };
            let z = reparameterize(&enc, &eps).z;
            let (logits, cache) = disc.forward(&z);
            let rows = logits.nrows() as f64;
            let mut g_logits = Array2::<f64>::zeros(logits.dim());
            for i in 0..logits.nrows() {
                g_logits[[i, 0]] = gamma / rows;
                g_logits[[i, 1]] = -gamma / rows;
            }
            let g_z = disc.backward_data(&cache, &g_logits);
            let (mut g_mu, mut g_lv) = reparameterize_backward(&enc, &eps, &g_z);
            let (kl_mu, kl_lv) = kl_to_prior_grads(&enc);
            g_mu += &kl_mu;
            g_lv += &kl_lv;
            for idx in 0..n * d {
                for (which, grad) in [(0, &g_mu), (1, &g_lv)] {
                    let mut mp = mu.clone();
                    let mut lp = lv.clone();
                    let mut mm = mu.clone();
                    let mut lm = lv.clone();
                    if which == 0 {
                        mp.as_slice_mut().unwrap()[idx] += h;
                        mm.as_slice_mut().unwrap()[idx] -= h;
                    } else {
                        lp.as_slice_mut().unwrap()[idx] += h;
                        lm.as_slice_mut().unwrap()[idx] -= h;
                    }
                    let fd = (value(&mp, &lp) - value(&mm, &lm)) / (2.0 * h);
                    let g = grad.as_slice().unwrap()[idx];
                    assert!(
                        (fd - g).abs() / g.abs().max(1e-6) < rel_tol,
                        "factor gradient off at {idx}/{which}"
                    );
                }
            }
        }

        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 60.0, "gradient suite took {elapsed:.1}s");
    });
}

#[test]
fn criterion_3_metric_oracle_suite() {
    criterion(3, "metric oracle suite", || {
        let started = Instant::now();
        let dataset = build_dataset(DatasetSpec::default()).unwrap();
        let cfg = MetricConfig::default();

        // identity oracle on the full 32x32 factor grid
        let rep = full_grid_identity_rep(&dataset);
        let oracle = IdentityOracle { dims: 5 };

        let fv = {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            factor_vae_score(&oracle, &dataset, &cfg, &mut rng).unwrap()
        };
        assert_eq!(fv, 1.0, "identity factor_vae must be exactly 1.0");

        let mig_score = mig(&rep, &cfg).unwrap();
        assert!(mig_score >= 0.95, "identity mig = {mig_score}");

        let dci_scores = {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            dci(&rep, &cfg, &mut rng).unwrap()
        };
        assert!(
            dci_scores.disentanglement >= 0.95,
            "identity dci = {:?}",
            dci_scores
        );

        let irs_score = irs(&rep, &cfg).unwrap();
        assert!(irs_score >= 0.95, "identity irs = {irs_score}");

        let sap_score = sap(&rep, &cfg).unwrap();
        assert!(sap_score >= 0.3, "identity sap = {sap_score}");

        // noise representation: same factor rows, fresh random codes
        let noise_rep = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let n = rep.num_samples();
            let mut codes = Array2::<f64>::zeros((n, 5));
            fill_normal(&mut codes, 1.0, &mut rng);
            RepresentationMatrix::new(codes, rep.factors.clone(), rep.factor_space.clone()).unwrap()
        };
        let noise_mig = mig(&noise_rep, &cfg).unwrap();
        assert!(noise_mig <= 0.05, "noise mig = {noise_mig}");
        let noise_sap = sap(&noise_rep, &cfg).unwrap();
        assert!(noise_sap <= 0.05, "noise sap = {noise_sap}");

        // determinism under a fixed seed
        let fv2 = {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            factor_vae_score(&oracle, &dataset, &cfg, &mut rng).unwrap()
        };
        let dci2 = {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            dci(&rep, &cfg, &mut rng).unwrap()
        };
        assert_eq!(fv, fv2);
        assert_eq!(dci_scores, dci2);
        assert_eq!(mig_score, mig(&rep, &cfg).unwrap());
        assert_eq!(irs_score, irs(&rep, &cfg).unwrap());
        assert_eq!(sap_score, sap(&rep, &cfg).unwrap());

        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 300.0, "metric oracle suite took {elapsed:.1}s");
    });
}

#[test]
fn criterion_4_reduction_equivalence() {
    criterion(4, "reduction equivalence over 100 steps", || {
        let dataset = build_dataset(DatasetSpec::default()).unwrap();
        let base_model = ModelConfig {
            latent_dim: 6,
            conv_widths: vec![16, 16, 32],
            fc_width: 64,
            ..Default::default()
        };
        let mk = |reg: RegularizerConfig| TrainConfig {
            steps: 100,
            batch_size: 16,
            seed: 21,
            model: base_model.clone(),
            regularizer: reg,
            discriminator: DiscriminatorConfig {
                hidden_width: 32,
                num_layers: 2,
                learning_rate: 1e-4,
            },
            ..Default::default()
        };

        let (_, elbo_trace) = train(
            &dataset,
            &mk(RegularizerConfig {
                beta: 1.0,
                ..RegularizerConfig::defaults_for(RegKind::Beta)
            }),
        )
        .unwrap();
        // the beta = 1 run IS the plain bound: total == recon + kl exactly
        for r in &elbo_trace.records {
            assert!((r.total() - elbo_loss(r.recon, r.kl)).abs() < 1e-10);
        }

        let (_, factor_trace) = train(
            &dataset,
            &mk(RegularizerConfig {
                gamma: 0.0,
                ..RegularizerConfig::defaults_for(RegKind::Factor)
            }),
        )
        .unwrap();
        let (_, annealed_trace) = train(
            &dataset,
            &mk(RegularizerConfig {
                gamma: 1.0,
                c_max: 0.0,
                ..RegularizerConfig::defaults_for(RegKind::Annealed)
            }),
        )
        .unwrap();

        assert_eq!(elbo_trace.records.len(), 100);
        for ((e, f), a) in elbo_trace
            .records
            .iter()
            .zip(&factor_trace.records)
            .zip(&annealed_trace.records)
        {
            assert!(
                (e.total() - f.total()).abs() < 1e-10,
                "factor(gamma=0) diverged at step {}: {} vs {}",
                e.step,
                f.total(),
                e.total()
            );
            assert!(
                (e.total() - a.total()).abs() < 1e-10,
                "annealed(gamma=1, C=0) diverged at step {}: {} vs {}",
                e.step,
                a.total(),
                e.total()
            );
        }
    });
}

#[test]
fn criterion_5_ranking_fixtures() {
    criterion(5, "paper-table ranking fixtures", || {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");

        let stage2 = rank_csv(&dir.join("table_stage2.csv")).unwrap();
        assert_eq!(stage2[0].label, "512", "stage-2 winner must be 512 latents");
        let expected_512 = (0.5018 + 0.1545 + 0.5457 + 0.6824 + 0.3739) / 5.0;
        assert!((stage2[0].mean - expected_512).abs() < 1e-12);
        let runner_up = (0.4458 + 0.1748 + 0.5785 + 0.5553 + 0.4166) / 5.0;
        assert_eq!(stage2[1].label, "256");
        assert!((stage2[1].mean - runner_up).abs() < 1e-12);

        let result3 = rank_csv(&dir.join("table_result3.csv")).unwrap();
        assert_eq!(
            result3[0].label, "FactorVAE (1000k)",
            "step-count winner must be the 1000k row"
        );
        let expected_1000k = (0.4844 + 0.155 + 0.523 + 0.6205 + 0.3887) / 5.0;
        assert!((result3[0].mean - expected_1000k).abs() < 1e-12);
        // the winning row also dominates per metric
        for slot in 0..5 {
            for row in &result3[1..] {
                assert!(result3[0].scores[slot] >= row.scores[slot]);
            }
        }
    });
}

#[test]
fn criterion_6_desk_scale_directional_study() {
    criterion(6, "desk-scale directional study", || {
        let started = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let base = TrainConfig {
            batch_size: 64,
            model: ModelConfig {
                latent_dim: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let metrics = MetricConfig::default();

        let mut overrides = BTreeMap::new();
        overrides.insert(
            "beta".to_string(),
            RegOverride {
                beta: Some(1.0), // plain VAE
                ..Default::default()
            },
        );
        overrides.insert(
            "factor".to_string(),
            RegOverride {
                gamma: Some(20.0),
                ..Default::default()
            },
        );

        let factor_spec = SweepSpec {
            dataset: DatasetSpec::default(),
            kinds: vec![RegKind::Factor],
            latent_dims: vec![10],
            step_counts: vec![5_000, 20_000],
            seeds: vec![0, 1, 2],
            base: base.clone(),
            overrides: overrides.clone(),
            metrics: metrics.clone(),
            out_dir: dir.path().to_path_buf(),
        };
        let plain_spec = SweepSpec {
            kinds: vec![RegKind::Beta],
            step_counts: vec![20_000],
            ..factor_spec.clone()
        };

        let _ = run_sweep(&factor_spec, 2).unwrap();
        let records = run_sweep(&plain_spec, 2).unwrap();
        assert_eq!(records.len(), 9);
        for r in &records {
            assert!(r.error.is_none(), "run {} failed: {:?}", r.run_id, r.error);
        }

        let rows = aggregate(&records, &[GroupField::Kind, GroupField::Steps]);
        let find = |kind: &str, steps: u64| {
            rows.iter()
                .find(|r| r.key.kind.as_deref() == Some(kind) && r.key.steps == Some(steps))
                .unwrap_or_else(|| panic!("missing aggregate for {kind}@{steps}"))
        };
        let factor_20k = find("factor", 20_000);
        let factor_5k = find("factor", 5_000);
        let plain_20k = find("beta", 20_000);
        assert_eq!(factor_20k.n_seeds, 3);
        assert_eq!(plain_20k.n_seeds, 3);

        let fv_factor = factor_20k.mean[0];
        let fv_plain = plain_20k.mean[0];
        println!(
            "  directional (a): factor_vae score, FactorVAE {fv_factor:.4} vs plain VAE {fv_plain:.4}"
        );
        assert!(
            fv_factor >= fv_plain + 0.05,
            "FactorVAE mean factor_vae {fv_factor:.4} does not exceed plain VAE {fv_plain:.4} by 0.05"
        );

        let mig_20k = factor_20k.mean[4];
        let mig_5k = factor_5k.mean[4];
        println!("  directional (b): mig at 20k {mig_20k:.4} vs 5k {mig_5k:.4}");
        assert!(
            mig_20k >= mig_5k - 0.02,
            "training longer hurt mig: 20k {mig_20k:.4} vs 5k {mig_5k:.4}"
        );

        let elapsed = started.elapsed().as_secs_f64();
        let cpu_hours_bound = records.iter().map(|r| r.wall_time).sum::<f64>() / 3600.0;
        println!(
            "  runtime: {:.1} min wall, {cpu_hours_bound:.2} summed run-hours",
            elapsed / 60.0
        );
        assert!(
            cpu_hours_bound <= 4.0,
            "directional study exceeded 4 CPU-hours: {cpu_hours_bound:.2}"
        );
    });
}

#[test]
fn criterion_7_determinism_and_idempotence() {
    criterion(7, "determinism and idempotence", || {
        let dataset = build_dataset(DatasetSpec::default()).unwrap();

        // (a) identical seeds: bit-comparable traces and identical reports
        let config = TrainConfig {
            steps: 12,
            batch_size: 8,
            seed: 33,
            model: ModelConfig {
                latent_dim: 4,
                conv_widths: vec![8, 8, 16],
                fc_width: 32,
                ..Default::default()
            },
            regularizer: RegularizerConfig::defaults_for(RegKind::Factor),
            discriminator: DiscriminatorConfig {
                hidden_width: 16,
                num_layers: 2,
                learning_rate: 1e-4,
            },
            ..Default::default()
        };
        let (model_a, trace_a) = train(&dataset, &config).unwrap();
        let (model_b, trace_b) = train(&dataset, &config).unwrap();
        assert_eq!(trace_a, trace_b, "traces are not bit-comparable");

        let quick_metrics = MetricConfig {
            fv_votes_train: 60,
            fv_votes_eval: 30,
            fv_batch: 8,
            mig_samples: 500,
            prune_std_threshold: 1e-6,
            ..Default::default()
        };
        let eval_a = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            evaluate_all(&model_a, &dataset, &quick_metrics, &mut rng).unwrap()
        };
        let eval_b = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            evaluate_all(&model_b, &dataset, &quick_metrics, &mut rng).unwrap()
        };
        assert_eq!(eval_a, eval_b, "metric reports differ under a fixed seed");

        // (b) six-config sweep: worker-count independence and idempotence
        let spec = |out: std::path::PathBuf| SweepSpec {
            dataset: DatasetSpec::default(),
            kinds: vec![RegKind::Beta, RegKind::Factor],
            latent_dims: vec![3],
            step_counts: vec![4],
            seeds: vec![0, 1, 2],
            base: TrainConfig {
                batch_size: 4,
                model: ModelConfig {
                    latent_dim: 3,
                    conv_widths: vec![8, 8, 8],
                    fc_width: 16,
                    ..Default::default()
                },
                discriminator: DiscriminatorConfig {
                    hidden_width: 8,
                    num_layers: 2,
                    learning_rate: 1e-4,
                },
                ..Default::default()
            },
            overrides: BTreeMap::new(),
            metrics: quick_metrics.clone(),
            out_dir: out,
        };
        assert_eq!(expand_sweep(&spec(std::env::temp_dir())).unwrap().len(), 6);

        let dir_one = tempfile::tempdir().unwrap();
        let dir_many = tempfile::tempdir().unwrap();
        let records_one = run_sweep(&spec(dir_one.path().to_path_buf()), 1).unwrap();
        let records_many = run_sweep(&spec(dir_many.path().to_path_buf()), 4).unwrap();
        assert_eq!(records_one.len(), 6);

        let normalize = |records: &[disent::runner::RunRecord]| {
            records
                .iter()
                .map(|r| {
                    (
                        r.run_id.clone(),
                        r.config_hash.clone(),
                        r.scores,
                        r.error.clone(),
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(
            normalize(&records_one),
            normalize(&records_many),
            "records depend on worker count"
        );

        // re-running the finished sweep must do zero training: every record,
        // including its wall time, comes back from the store unchanged
        let records_again = run_sweep(&spec(dir_one.path().to_path_buf()), 1).unwrap();
        assert_eq!(records_one, records_again, "finished sweep was recomputed");
    });
}
