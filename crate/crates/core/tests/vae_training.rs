use pcenet::data::Dataset;
use pcenet::nncore::Matrix;
use pcenet::rng::rng_from_seed;
use pcenet::vae::{latent_dataset, train_vae, VaeConfig};
use rand_distr::{Distribution, Normal};

fn tight_cloud(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::<f64>::new(0.5, 0.1).unwrap();
    let features = Matrix::from_fn(n, m, |_, _| noise.sample(&mut rng).clamp(0.0, 1.0));
    let names = (0..m).map(|k| format!("x{k}")).collect();
    Dataset::new(features, vec![0.0; n], names, "y".to_string()).unwrap()
}

fn config(m: usize, seed: u64) -> VaeConfig {
    VaeConfig {
        input_dim: m,
        hidden_dim: 4,
        latent_dim: 2,
        learning_rate: 1e-2,
        epochs: 60,
        batch_size: None,
        seed,
        recon_weight: 1.0,
    }
}

#[test]
fn aggregate_latent_mean_stays_near_origin() {
    let data = tight_cloud(400, 5, 1);
    let trained = train_vae(&data, &config(5, 2)).unwrap();
    let (z, _) = latent_dataset(&trained.params, &data.features, 3).unwrap();
    for k in 0..2 {
        let mean = z.column(k).iter().sum::<f64>() / z.rows() as f64;
        assert!(mean.abs() < 0.3, "latent {k} mean {mean}");
    }
}

#[test]
fn training_and_sampling_are_reproducible() {
    let data = tight_cloud(100, 4, 5);
    let a = train_vae(&data, &config(4, 9)).unwrap();
    let b = train_vae(&data, &config(4, 9)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.epoch_losses, b.epoch_losses);
    let (za, pa) = latent_dataset(&a.params, &data.features, 11).unwrap();
    let (zb, pb) = latent_dataset(&b.params, &data.features, 11).unwrap();
    assert_eq!(za, zb);
    assert_eq!(pa, pb);

    let c = train_vae(&data, &config(4, 10)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn vae_json_round_trip_preserves_encoding() {
    let data = tight_cloud(50, 4, 6);
    let trained = train_vae(&data, &config(4, 1)).unwrap();
    let text = serde_json::to_string(&trained.params).unwrap();
    let back: pcenet::vae::VaeParams = serde_json::from_str(&text).unwrap();
    for i in 0..data.len() {
        let x = data.features.row(i);
        assert_eq!(trained.params.encode(x).unwrap(), back.encode(x).unwrap());
    }
}
