//! Measures how much one extra sample reduces distortion, exactly and with
//! the windowed approximation, then builds a small training database.

use slads::metrics::spearman;
use slads::synth::Family;
use slads::training::{generate_training_db, rd_exact, rd_windowed, TrainingSchedule};
use slads::{IdwParams, MeasurementSet, PixelLocation};

fn main() -> slads::Result<()> {
    let img = Family::Blobs.generate(64, 64, 11);
    let dims = img.dims();
    let params = IdwParams::default();
    let mut set = MeasurementSet::new(dims);
    for i in (0..dims.len()).step_by(9) {
        let s = dims.location(i);
        set.add_measurement(s, img.get(s))?;
    }

    let candidates: Vec<PixelLocation> = set.unmeasured().step_by(37).map(|i| dims.location(i)).collect();
    let mut exact = Vec::new();
    let mut windowed = Vec::new();
    for &s in &candidates {
        exact.push(rd_exact(&img, &set, s, &params)?);
        windowed.push(rd_windowed(&img, &set, s, &params, params.window)?);
    }
    println!("{} candidates, spearman(exact, windowed) = {:.4}", candidates.len(), spearman(&exact, &windowed));
    let best = (0..candidates.len()).max_by(|&a, &b| exact[a].total_cmp(&exact[b])).unwrap();
    println!("largest reduction {:.1} at {}", exact[best], candidates[best]);

    let schedule = TrainingSchedule {
        densities: vec![0.05, 0.2],
        samples_per_level: 50,
        ..Default::default()
    };
    let images = vec![
        ("blobs-a".to_string(), img),
        ("blobs-b".to_string(), Family::Blobs.generate(64, 64, 12)),
    ];
    let db = generate_training_db(&images, &schedule, &params)?;
    println!("training database: {} rows", db.len());
    for line in db.to_csv().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
