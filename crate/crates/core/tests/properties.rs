use proptest::prelude::*;

use slads::cli::config::{render, ConfigFile};
use slads::engine::{select_next, SimulatedSource};
use slads::regress::model_file::{decode, encode};
use slads::regress::{fit_linear, fit_svr, train_model, ErdPredictor, Gamma, RegressorSpec, SvrConfig};
use slads::synth::Family;
use slads::training::{generate_training_db, TrainingSchedule};
use slads::{
    distortion, pgm, psnr, reconstruct, run_sampling, GroundTruthImage, IdwParams, MeasurementSet, ModelKind,
    RunConfig, FEATURE_COUNT,
};

fn image(max_side: usize) -> impl Strategy<Value = GroundTruthImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..=255, w * h)
            .prop_map(move |px| GroundTruthImage::from_bytes(w, h, &px).unwrap())
    })
}

fn full_recon(img: &GroundTruthImage) -> slads::Reconstruction {
    let dims = img.dims();
    let mut set = MeasurementSet::new(dims);
    for i in 0..dims.len() {
        let s = dims.location(i);
        set.add_measurement(s, img.get(s)).unwrap();
    }
    reconstruct(&set, &IdwParams::default()).unwrap()
}

/// Scores by a fixed linear functional of the raw descriptors, optionally
/// post-composed with `x -> 2x + 1`.
struct Affine(bool);

impl ErdPredictor for Affine {
    fn predict_batch(&self, raw: &[[f64; FEATURE_COUNT]], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(raw) {
            let s = r[0] + 0.5 * r[2] + 3.0 * r[4] - 2.0 * r[5];
            *o = if self.0 { 2.0 * s + 1.0 } else { s };
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn distortion_is_a_symmetric_metric(
        (a, b) in (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            let v = proptest::collection::vec(0u8..=255, w * h);
            (v.clone(), v).prop_map(move |(x, y)| {
                (GroundTruthImage::from_bytes(w, h, &x).unwrap(), GroundTruthImage::from_bytes(w, h, &y).unwrap())
            })
        })
    ) {
        let dab = distortion(&a, &full_recon(&b)).unwrap();
        let dba = distortion(&b, &full_recon(&a)).unwrap();
        prop_assert!(dab >= 0.0);
        prop_assert_eq!(dab, dba);
        prop_assert_eq!(dab == 0.0, a == b);
        let brute: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
        prop_assert_eq!(dab.to_bits(), brute.to_bits());
        prop_assert_eq!(psnr(&a, &full_recon(&a)).unwrap(), 99.0);
    }

    #[test]
    fn pgm_round_trip(img in image(20)) {
        let bytes: Vec<u8> = img.values().iter().map(|&v| v as u8).collect();
        let encoded = pgm::encode(img.dims(), &bytes);
        let (dims, px) = pgm::decode(&encoded).unwrap();
        prop_assert_eq!(dims, img.dims());
        prop_assert_eq!(px, &bytes[..]);
    }

    #[test]
    fn config_render_parse_round_trip(
        entries in proptest::collection::btree_map("[a-z][a-z-]{0,8}", "[A-Za-z0-9.,_/-]{0,12}", 0..6)
    ) {
        let pairs: Vec<(&str, String)> = entries.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        let keys: Vec<&str> = entries.keys().map(String::as_str).collect();
        let cfg = ConfigFile::parse(&render(&pairs), &keys).unwrap();
        for (k, v) in &entries {
            let got: Option<String> = cfg.get(k).unwrap();
            prop_assert_eq!(got.unwrap_or_default(), v.trim().to_string());
        }
    }

    #[test]
    fn linear_residual_is_orthogonal_to_columns(
        rows in proptest::collection::vec(proptest::array::uniform6(-10.0f64..10.0), 8..40),
        noise in proptest::collection::vec(-5.0f64..5.0, 40),
    ) {
        let r: Vec<f64> = rows.iter().zip(&noise).map(|(v, e)| v[0] - 2.0 * v[3] + e).collect();
        let fit = fit_linear(&rows, &r).unwrap();
        let norm_r = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let resid: Vec<f64> = rows.iter().zip(&r).map(|(v, y)| y - fit.model.predict(v)).collect();
        let vt_res: f64 = (0..6)
            .map(|j| rows.iter().zip(&resid).map(|(v, e)| v[j] * e).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        prop_assert!(vt_res <= 1e-6 * norm_r.max(1.0), "{vt_res} vs {norm_r}");
    }

    #[test]
    fn argmax_is_invariant_under_increasing_transform(seed in 0u64..500, k in 2usize..40) {
        let img = Family::PiecewiseConstant.generate(20, 16, seed);
        let dims = img.dims();
        let mut set = MeasurementSet::new(dims);
        for j in 0..k {
            let s = dims.location((j * 7919 + seed as usize * 31) % dims.len());
            if !set.is_measured(s) {
                set.add_measurement(s, img.get(s)).unwrap();
            }
        }
        let idw = IdwParams { neighbors: 4, power: 2.0, window: 3 };
        let recon = reconstruct(&set, &idw).unwrap();
        let a = select_next(&Affine(false), &recon, &set, &idw).unwrap();
        let b = select_next(&Affine(true), &recon, &set, &idw).unwrap();
        prop_assert_eq!(a.location, b.location);
        prop_assert_eq!(b.predicted_erd, 2.0 * a.predicted_erd + 1.0);
    }

    #[test]
    fn sampling_history_is_distinct_and_full_budget_is_exact(seed in 0u64..1000) {
        let img = Family::Blobs.generate(10, 9, seed);
        let config = RunConfig {
            initial_density: 0.05,
            budget_density: 1.0,
            checkpoint_densities: vec![0.5, 1.0],
            seed,
            idw: IdwParams { neighbors: 3, power: 2.0, window: 2 },
            ..Default::default()
        };
        let run = run_sampling(&mut SimulatedSource::new(img.clone()), &Affine(false), &config, Some(&img)).unwrap();
        let mut seen = std::collections::HashSet::new();
        prop_assert!(run.history.iter().all(|h| seen.insert(h.location)));
        prop_assert_eq!(run.history.len(), img.dims().len());
        prop_assert_eq!(run.reconstruction.values(), img.values());
        let last = run.checkpoints.last().unwrap();
        prop_assert_eq!(last.psnr, Some(99.0));
        prop_assert_eq!(&last.reconstruction, &run.reconstruction);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn svr_is_invariant_to_row_permutation(seed in 0u64..1000, rot in 1usize..29) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<[f64; 2]> = (0..30).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] * 1.3).sin() + 0.5 * x[1]).collect();
        let config = SvrConfig { c: 5.0, epsilon: 0.05, gamma: Gamma::Fixed(0.7), ..Default::default() };
        let a = fit_svr(&xs, &ys, &config).unwrap();
        let mut order: Vec<usize> = (0..30).collect();
        order.rotate_left(rot);
        order.swap(0, 17);
        let px: Vec<[f64; 2]> = order.iter().map(|&i| xs[i]).collect();
        let py: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let b = fit_svr(&px, &py, &config).unwrap();
        for gx in [-1.5, -0.5, 0.0, 0.7, 1.9] {
            for gy in [-1.0, 0.3, 1.4] {
                let d = (a.model.predict(&[gx, gy]) - b.model.predict(&[gx, gy])).abs();
                prop_assert!(d <= 1e-3, "({gx}, {gy}): {d}");
            }
        }
    }

    #[test]
    fn model_files_round_trip_bit_exactly(seed in 0u64..100, kind_ix in 0usize..3) {
        let images = vec![("p".to_string(), Family::PiecewiseConstant.generate(24, 24, seed))];
        let schedule = TrainingSchedule { densities: vec![0.1, 0.3], samples_per_level: 20, seed, ..Default::default() };
        let idw = IdwParams::default();
        let db = generate_training_db(&images, &schedule, &idw).unwrap();
        let mut spec = RegressorSpec::with_defaults(ModelKind::ALL[kind_ix], seed);
        if let RegressorSpec::Nn(c) = &mut spec {
            c.epochs = 3;
            c.hidden = vec![8, 8];
        }
        let (model, _) = train_model(&db.features(), &db.targets(), &spec, idw).unwrap();
        let bytes = encode(&model);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back), bytes);
        for row in db.features().iter().take(5) {
            prop_assert_eq!(model.predict_raw(row).to_bits(), back.predict_raw(row).to_bits());
        }
        let (again, _) = train_model(&db.features(), &db.targets(), &spec, idw).unwrap();
        prop_assert_eq!(encode(&again), encode(&model));
    }
}
