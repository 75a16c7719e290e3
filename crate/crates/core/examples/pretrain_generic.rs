//! Trains a generic model from one broad-range image through the command
//! implementations, then applies it to an image family it never saw.

use slads::cli::{cmd_pretrain, cmd_run, cmd_synth, FitArgs, PretrainArgs, RunArgs, CampaignArgs, FamilyArg, RegressorArg, SynthArgs};

fn main() {
    let dir = std::env::temp_dir().join(format!("slads-pretrain-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let generic = dir.join("generic.pgm");
    let unseen = dir.join("unseen.pgm");
    let model = dir.join("generic.slnm");

    let synth = |family, seed, out: &std::path::Path| {
        cmd_synth(&SynthArgs { family, width: 64, height: 64, seed, out: out.to_path_buf() })
    };
    print!("{}", synth(FamilyArg::Blobs, 21, &generic).expect("synth"));
    print!("{}", synth(FamilyArg::Piecewise, 4, &unseen).expect("synth"));

    let pretrain = PretrainArgs {
        image: Some(generic),
        fit: FitArgs {
            out: Some(model.clone()),
            regressor: Some(RegressorArg::Lsq),
            samples_per_level: Some(200),
            ..Default::default()
        },
    };
    print!("{}", cmd_pretrain(&pretrain).expect("pretrain"));

    let run = RunArgs {
        model: Some(model),
        image: Some(unseen),
        out: Some(dir.join("run")),
        campaign: CampaignArgs { budget: Some(0.3), ..Default::default() },
        ..Default::default()
    };
    print!("{}", cmd_run(&run).expect("run"));
    std::fs::remove_dir_all(&dir).ok();
}
