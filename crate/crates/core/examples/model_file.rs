//! Saves each regressor kind, reloads it and checks that predictions and
//! bytes survive the round trip. A flipped byte is reported as corruption.

use slads::regress::{train_model, RegressorSpec};
use slads::synth::Family;
use slads::training::{generate_training_db, TrainingSchedule};
use slads::{load_model, IdwParams, ModelKind};

fn main() -> slads::Result<()> {
    let params = IdwParams::default();
    let images = vec![("blobs".to_string(), Family::Blobs.generate(48, 48, 2))];
    let schedule = TrainingSchedule { samples_per_level: 60, ..Default::default() };
    let db = generate_training_db(&images, &schedule, &params)?;
    let dir = std::env::temp_dir().join(format!("slads-model-file-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");

    for kind in ModelKind::ALL {
        let mut spec = RegressorSpec::with_defaults(kind, 1);
        if let RegressorSpec::Nn(c) = &mut spec {
            c.epochs = 20;
        }
        let (model, _) = train_model(&db.features(), &db.targets(), &spec, params)?;
        let path = dir.join(format!("{kind}.slnm"));
        model.save(&path)?;
        let back = load_model(&path)?;
        let probe = db.features()[0];
        assert_eq!(model.predict_raw(&probe).to_bits(), back.predict_raw(&probe).to_bits());
        let bytes = std::fs::read(&path).expect("model bytes");
        println!("{kind}: {} bytes, prediction {:.3} restored exactly", bytes.len(), back.predict_raw(&probe));

        let mut bad = bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        std::fs::write(&path, &bad).expect("write");
        match load_model(&path) {
            Err(e) => println!("  corrupted copy rejected: {e}"),
            Ok(_) => unreachable!("corruption must be detected"),
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
