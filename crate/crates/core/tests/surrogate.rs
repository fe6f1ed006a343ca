use cagetool::dataset::{generate, Dataset, LabelParams};
use cagetool::fixtures;
use cagetool::surrogate::{batch_for, train, MetricKind, MlpModel, TrainParams};
use cagetool::{ObjectConfig, Pose2};
use rand::{Rng, SeedableRng};

fn small_dataset() -> Dataset {
    let s = fixtures::u_cup();
    generate(&s, 0, 120, &LabelParams::oracle(&s), 5).unwrap()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let data = small_dataset();
    let mut model = MlpModel::new(8, MetricKind::Mee, 11);
    // perturb the zero output layer so every parameter carries gradient
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut p = model.flat_params();
    for v in p.iter_mut() {
        *v += 0.05 * (rng.random::<f64>() - 0.5);
    }
    model.set_flat_params(&p);
    let mut data = data;
    // give the batch a mix of classes
    for (i, s) in data.samples.iter_mut().enumerate().take(16) {
        if i % 3 == 0 {
            s.q_c = true;
            s.q_mee = None;
        }
    }
    let batch = batch_for(&model, &data.samples[..32]);
    let (_, g) = model.loss_and_grad(&batch, 1.0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(0..p.len());
        let mut plus = p.clone();
        plus[k] += h;
        let mut minus = p.clone();
        minus[k] -= h;
        let mut m = model.clone();
        m.set_flat_params(&plus);
        let lp = m.loss(&batch, 1.0);
        m.set_flat_params(&minus);
        let lm = m.loss(&batch, 1.0);
        let num = (lp - lm) / (2.0 * h);
        let rel = (num - g[k]).abs() / num.abs().max(g[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "max relative gradient error {worst:e}");
}

#[test]
fn saved_model_reloads_bit_identically() {
    let data = small_dataset();
    let hp = TrainParams { epochs: 3, ..Default::default() };
    let (model, _) = train(&data, MetricKind::Mee, &hp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = MlpModel::load(&path).unwrap();
    assert_eq!(back, model);
    let o = ObjectConfig::new(0.05, 0.1, 0.3);
    let t = Pose2::new(0.0, 0.02, 0.1);
    assert_eq!(back.forward(&o, &t).unwrap(), model.forward(&o, &t).unwrap());
}

#[test]
fn training_is_deterministic() {
    let data = small_dataset();
    let hp = TrainParams { epochs: 2, ..Default::default() };
    let (a, ra) = train(&data, MetricKind::Pcc, &hp).unwrap();
    let (b, rb) = train(&data, MetricKind::Pcc, &hp).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}
