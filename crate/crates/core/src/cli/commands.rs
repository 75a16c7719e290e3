use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::engine::{
    run_random_baseline, run_sampling, RunConfig, SamplingRun, ScoringMode, SimulatedSource,
};
use crate::error::Error;
use crate::fsutil;
use crate::image::GroundTruthImage;
use crate::recon::IdwParams;
use crate::regress::{
    load_model, train_model, Activation, ErdModel, ImageRecord, ModelKind, RegressorSpec,
};
use crate::synth::Family;
use crate::training::{generate_training_db, TrainingSchedule};

use super::config::{render, ConfigFile};
use super::report::{summarize, EvalReport};
use super::{
    ActivationArg, CampaignArgs, CliError, EvalArgs, FamilyArg, FitArgs, IdwArgs, PretrainArgs,
    RunArgs, ScoringArg, SynthArgs, TrainArgs,
};

const IDW_KEYS: [&str; 3] = ["window", "neighbors", "power"];
const FIT_KEYS: [&str; 9] = [
    "out",
    "regressor",
    "activation",
    "densities",
    "samples-per-level",
    "seed",
    "epochs",
    "batch-size",
    "db-csv",
];
const CAMPAIGN_KEYS: [&str; 6] = ["initial", "budget", "densities", "seed", "noise-sigma", "scoring"];

fn keys<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn load_config(path: &Option<PathBuf>, allowed: &[&str]) -> Result<ConfigFile, CliError> {
    match path {
        Some(p) => ConfigFile::load(p, allowed),
        None => Ok(ConfigFile::default()),
    }
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn pick_list<T: FromStr>(
    flag: Option<Vec<T>>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<Vec<T>>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get_list(key),
    }
}

fn resolve_idw(args: &IdwArgs, cfg: &ConfigFile, base: IdwParams) -> Result<IdwParams, CliError> {
    let idw = IdwParams {
        neighbors: pick(args.neighbors, cfg, "neighbors")?.unwrap_or(base.neighbors),
        power: pick(args.power, cfg, "power")?.unwrap_or(base.power),
        window: pick(args.window, cfg, "window")?.unwrap_or(base.window),
    };
    idw.validate()?;
    Ok(idw)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_with_record(path: &Path) -> Result<(GroundTruthImage, ImageRecord), CliError> {
    let bytes = fsutil::read(path)?;
    let (dims, pixels) = crate::pgm::decode(&bytes).map_err(|source| Error::Pgm {
        path: path.to_path_buf(),
        source,
    })?;
    let img = GroundTruthImage::from_bytes(dims.width, dims.height, pixels)?;
    let record = ImageRecord {
        id: display_name(path),
        width: dims.width,
        height: dims.height,
        sha256: sha256_hex(&bytes),
    };
    Ok((img, record))
}

fn fit_and_save(images: &[PathBuf], fit: &FitArgs, pretrained: bool) -> Result<String, CliError> {
    let allowed = keys(&[&FIT_KEYS, &IDW_KEYS, &["images", "image"]]);
    let cfg = load_config(&fit.config, &allowed)?;
    let out: PathBuf = pick(fit.out.clone(), &cfg, "out")?
        .ok_or_else(|| CliError::Usage("--out <model file> is required".into()))?;
    let kind = match fit.regressor {
        Some(r) => ModelKind::from(r),
        None => match cfg.get::<String>("regressor")? {
            Some(s) => s.parse::<ModelKind>().map_err(|e| CliError::Usage(e.to_string()))?,
            None if pretrained => ModelKind::Nn,
            None => {
                return Err(CliError::Usage(
                    "--regressor <lsq|svr|nn> is required".into(),
                ))
            }
        },
    };
    let activation = match fit.activation {
        Some(ActivationArg::Relu) => Activation::Relu,
        Some(ActivationArg::Identity) => Activation::Identity,
        None => match cfg.get::<String>("activation")? {
            Some(s) => s.parse::<Activation>().map_err(|e| CliError::Usage(e.to_string()))?,
            None => Activation::Relu,
        },
    };
    let seed = pick(fit.seed, &cfg, "seed")?.unwrap_or(0);
    let idw = resolve_idw(&fit.idw, &cfg, IdwParams::default())?;
    let defaults = TrainingSchedule::default();
    let schedule = TrainingSchedule {
        densities: pick_list(fit.densities.clone(), &cfg, "densities")?.unwrap_or(defaults.densities),
        samples_per_level: pick(fit.samples_per_level, &cfg, "samples-per-level")?
            .unwrap_or(defaults.samples_per_level),
        rd_window: idw.window,
        seed,
    };
    schedule.validate()?;

    let mut loaded = Vec::with_capacity(images.len());
    let mut records = Vec::with_capacity(images.len());
    for p in images {
        let (img, rec) = load_with_record(p)?;
        loaded.push((rec.id.clone(), img));
        records.push(rec);
    }

    let start = Instant::now();
    let db = generate_training_db(&loaded, &schedule, &idw)?;
    if let Some(p) = pick(fit.db_csv.clone(), &cfg, "db-csv")? {
        db.write_csv(p)?;
    }
    let mut spec = RegressorSpec::with_defaults(kind, seed);
    if let RegressorSpec::Nn(c) = &mut spec {
        c.activation = activation;
        if let Some(e) = pick(fit.epochs, &cfg, "epochs")? {
            c.epochs = e;
        }
        if let Some(b) = pick(fit.batch_size, &cfg, "batch-size")? {
            c.batch_size = b;
        }
    }
    let (mut model, summary) = train_model(&db.features(), &db.targets(), &spec, idw)?;
    model.meta.pretrained = pretrained;
    model.meta.images = records;
    model.meta.hyperparameters.insert(
        "schedule".into(),
        serde_json::to_value(&schedule).expect("schedule serializes"),
    );
    model.save(&out)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut msg = format!(
        "trained {kind} model on n = {} rows from {} image(s)\n",
        summary.rows,
        images.len()
    );
    let label = match kind {
        ModelKind::Lsq => "residual norm",
        ModelKind::Svr => "dual objective",
        ModelKind::Nn => "final loss",
    };
    let _ = writeln!(msg, "{label}: {}", summary.final_loss);
    if summary.rank_deficient {
        msg.push_str("warning: design matrix is rank deficient; minimum-norm solution used\n");
    }
    if !summary.converged {
        msg.push_str("warning: solver stopped at its iteration cap before converging\n");
    }
    let _ = writeln!(msg, "elapsed: {elapsed:.2} s");
    let _ = writeln!(msg, "wrote {}", out.display());
    Ok(msg)
}

pub fn cmd_train(args: &TrainArgs) -> Result<String, CliError> {
    let allowed = keys(&[&FIT_KEYS, &IDW_KEYS, &["images"]]);
    let cfg = load_config(&args.fit.config, &allowed)?;
    let images = if args.images.is_empty() {
        cfg.get_list::<PathBuf>("images")?.unwrap_or_default()
    } else {
        args.images.clone()
    };
    if images.is_empty() {
        return Err(CliError::Usage("--images needs at least one training image".into()));
    }
    fit_and_save(&images, &args.fit, false)
}

pub fn cmd_pretrain(args: &PretrainArgs) -> Result<String, CliError> {
    let allowed = keys(&[&FIT_KEYS, &IDW_KEYS, &["image"]]);
    let cfg = load_config(&args.fit.config, &allowed)?;
    let image = match &args.image {
        Some(p) => p.clone(),
        None => cfg.get::<PathBuf>("image")?.ok_or_else(|| {
            CliError::Usage(
                "no generic training image and none is bundled; pass --image <file.pgm> \
                 with an 8-bit P5 image that has a wide intensity range and varied textures \
                 (the classic cameraman test image works well), or create one with \
                 `slads synth --family blobs --out generic.pgm`"
                    .into(),
            )
        })?,
    };
    fit_and_save(&[image], &args.fit, true)
}

struct Campaign {
    config: RunConfig,
    noise_sigma: f64,
}

fn resolve_campaign(
    args: &CampaignArgs,
    cfg: &ConfigFile,
    idw_base: IdwParams,
) -> Result<Campaign, CliError> {
    let defaults = RunConfig::default();
    let initial = pick(args.initial, cfg, "initial")?.unwrap_or(defaults.initial_density);
    let budget = pick(args.budget, cfg, "budget")?.unwrap_or(defaults.budget_density);
    let checkpoints = match pick_list(args.densities.clone(), cfg, "densities")? {
        Some(d) => d,
        None => {
            let mut d: Vec<f64> = defaults
                .checkpoint_densities
                .iter()
                .copied()
                .filter(|&d| d <= budget + 1e-12)
                .collect();
            if !d.iter().any(|&x| (x - budget).abs() < 1e-12) {
                d.push(budget);
            }
            d
        }
    };
    let scoring = match args.scoring {
        Some(ScoringArg::Full) => ScoringMode::Full,
        Some(ScoringArg::Incremental) => ScoringMode::Incremental,
        None => match cfg.get::<String>("scoring")?.as_deref() {
            None | Some("incremental") => ScoringMode::Incremental,
            Some("full") => ScoringMode::Full,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown scoring mode {other:?} (expected full or incremental)"
                )))
            }
        },
    };
    let noise_sigma = pick(args.noise_sigma, cfg, "noise-sigma")?.unwrap_or(0.0);
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(CliError::Usage(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let config = RunConfig {
        initial_density: initial,
        budget_density: budget,
        checkpoint_densities: checkpoints,
        seed: pick(args.seed, cfg, "seed")?.unwrap_or(0),
        idw: resolve_idw(&args.idw, cfg, idw_base)?,
        scoring,
        parallel: true,
    };
    config.validate()?;
    Ok(Campaign { config, noise_sigma })
}

fn campaign_record(c: &Campaign) -> Vec<(&'static str, String)> {
    let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    vec![
        ("initial", c.config.initial_density.to_string()),
        ("budget", c.config.budget_density.to_string()),
        ("densities", list(&c.config.checkpoint_densities)),
        ("seed", c.config.seed.to_string()),
        ("noise-sigma", c.noise_sigma.to_string()),
        (
            "scoring",
            match c.config.scoring {
                ScoringMode::Full => "full".into(),
                ScoringMode::Incremental => "incremental".into(),
            },
        ),
        ("window", c.config.idw.window.to_string()),
        ("neighbors", c.config.idw.neighbors.to_string()),
        ("power", c.config.idw.power.to_string()),
    ]
}

fn execute(
    model: Option<&ErdModel>,
    img: &GroundTruthImage,
    config: &RunConfig,
    noise_sigma: f64,
) -> crate::error::Result<SamplingRun> {
    let mut source = SimulatedSource::with_noise(img.clone(), noise_sigma, config.seed);
    match model {
        Some(m) => run_sampling(&mut source, m, config, Some(img)),
        None => run_random_baseline(&mut source, config, Some(img)),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<String, CliError> {
    let allowed = keys(&[&CAMPAIGN_KEYS, &IDW_KEYS, &["model", "method", "image", "out"]]);
    let cfg = load_config(&args.campaign.config, &allowed)?;
    let model_path: Option<PathBuf> = pick(args.model.clone(), &cfg, "model")?;
    let random = args.method.is_some()
        || match cfg.get::<String>("method")?.as_deref() {
            None => false,
            Some("random") => true,
            Some(other) => {
                return Err(CliError::Usage(format!("unknown method {other:?} (expected random)")))
            }
        };
    if random == model_path.is_some() {
        return Err(CliError::Usage(
            "give exactly one of --model <file> or --method random".into(),
        ));
    }
    let image_path: PathBuf = pick(args.image.clone(), &cfg, "image")?
        .ok_or_else(|| CliError::Usage("--image <ground truth> is required".into()))?;
    let out: PathBuf = pick(args.out.clone(), &cfg, "out")?
        .ok_or_else(|| CliError::Usage("--out <directory> is required".into()))?;

    let model = model_path.as_ref().map(load_model).transpose()?;
    let base_idw = model.as_ref().map_or_else(IdwParams::default, |m| m.idw);
    let campaign = resolve_campaign(&args.campaign, &cfg, base_idw)?;
    let (img, record) = load_with_record(&image_path)?;

    let run = execute(model.as_ref(), &img, &campaign.config, campaign.noise_sigma)?;

    run.export_checkpoints(&out)?;
    run.write_history_csv(out.join("history.csv"))?;
    let mut record_pairs = campaign_record(&campaign);
    record_pairs.push(("image", image_path.display().to_string()));
    record_pairs.push((
        "method",
        model_path
            .as_ref()
            .map_or("random".to_string(), |p| p.display().to_string()),
    ));
    let provenance = format!("# image sha256 {}\n{}", record.sha256, render(&record_pairs));
    fsutil::write_atomic(&out.join("run.cfg"), provenance.as_bytes())?;

    let method = model.as_ref().map_or("random".to_string(), |m| m.kind().to_string());
    let mut msg = String::new();
    for c in &run.checkpoints {
        let _ = writeln!(
            msg,
            "{method} {:.0}%: psnr {:.2} dB, distortion {}, {} measurements",
            c.density * 100.0,
            c.psnr.unwrap_or(f64::NAN),
            c.distortion.unwrap_or(f64::NAN),
            c.measured
        );
    }
    let _ = writeln!(
        msg,
        "psnr at budget {:.0}%: {:.2} dB ({} measurements, {:.2} s)",
        campaign.config.budget_density * 100.0,
        crate::metrics::psnr(&img, &run.reconstruction)?,
        run.history.len(),
        run.wall_time_s
    );
    let _ = writeln!(msg, "wrote artifacts to {}", out.display());
    Ok(msg)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<String, CliError> {
    let allowed = keys(&[
        &CAMPAIGN_KEYS,
        &IDW_KEYS,
        &["model", "method", "image", "out", "repeats", "no-timing"],
    ]);
    let cfg = load_config(&args.campaign.config, &allowed)?;
    let model_paths: Vec<PathBuf> = if args.model.is_empty() {
        cfg.get_list("model")?.unwrap_or_default()
    } else {
        args.model.clone()
    };
    let random = !args.method.is_empty()
        || match cfg.get_list::<String>("method")? {
            None => false,
            Some(v) if v.iter().all(|m| m == "random") => !v.is_empty(),
            Some(v) => {
                return Err(CliError::Usage(format!("unknown method in {v:?} (expected random)")))
            }
        };
    let image_paths: Vec<PathBuf> = if args.image.is_empty() {
        cfg.get_list("image")?.unwrap_or_default()
    } else {
        args.image.clone()
    };
    if image_paths.is_empty() {
        return Err(CliError::Usage("--image needs at least one test image".into()));
    }
    if model_paths.is_empty() && !random {
        return Err(CliError::Usage("nothing to evaluate: pass --model and/or --method random".into()));
    }
    let out: PathBuf = pick(args.out.clone(), &cfg, "out")?
        .ok_or_else(|| CliError::Usage("--out <report.csv> is required".into()))?;
    let repeats = pick(args.repeats, &cfg, "repeats")?.unwrap_or(10);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    let timing = !(args.no_timing || cfg.get::<bool>("no-timing")?.unwrap_or(false));

    // methods in canonical order: the random baseline first, then models as given
    let mut methods: Vec<(String, Option<ErdModel>)> = Vec::new();
    if random {
        methods.push(("random".into(), None));
    }
    let loaded: Vec<ErdModel> = model_paths.iter().map(load_model).collect::<Result<_, _>>()?;
    let kinds: Vec<ModelKind> = loaded.iter().map(ErdModel::kind).collect();
    for (p, m) in model_paths.iter().zip(loaded) {
        let kind = m.kind();
        let shared = kinds.iter().filter(|&&k| k == kind).count() > 1;
        let label = if shared {
            format!("{kind}:{}", display_name(p))
        } else {
            kind.to_string()
        };
        methods.push((label, Some(m)));
    }
    let images: Vec<GroundTruthImage> = image_paths
        .iter()
        .map(|p| load_with_record(p).map(|(i, _)| i))
        .collect::<Result<_, _>>()?;

    let base_idw = methods
        .iter()
        .find_map(|(_, m)| m.as_ref().map(|m| m.idw))
        .unwrap_or_default();
    let campaign = resolve_campaign(&args.campaign, &cfg, base_idw)?;
    let base_seed = campaign.config.seed;
    let seeds: Vec<u64> = (0..repeats as u64).map(|r| base_seed + r).collect();

    let jobs: Vec<(usize, usize, u64)> = (0..methods.len())
        .flat_map(|m| (0..images.len()).flat_map(move |i| (0..repeats as u64).map(move |r| (m, i, r))))
        .collect();
    let results: Vec<Option<SamplingRun>> = jobs
        .par_iter()
        .map(|&(m, i, r)| {
            let model = methods[m].1.as_ref();
            let mut config = campaign.config.clone();
            config.seed = base_seed + r;
            if let Some(mm) = model {
                if args.campaign.idw.window.is_none()
                    && args.campaign.idw.neighbors.is_none()
                    && args.campaign.idw.power.is_none()
                {
                    config.idw = mm.idw;
                }
            }
            execute(model, &images[i], &config, campaign.noise_sigma).ok()
        })
        .collect();

    let per_method = images.len() * repeats;
    let mut densities = campaign.config.checkpoint_densities.clone();
    densities.retain(|&d| d <= campaign.config.budget_density + 1e-12);
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    let mut rows = Vec::new();
    for (mi, (label, _)) in methods.iter().enumerate() {
        let runs = &results[mi * per_method..(mi + 1) * per_method];
        rows.extend(summarize(label, &densities, runs, timing));
    }
    let report = EvalReport {
        rows,
        repeats,
        seeds: seeds.clone(),
    };
    report.write_csv(&out)?;
    let mut record_pairs = campaign_record(&campaign);
    record_pairs.push(("repeats", repeats.to_string()));
    record_pairs.push((
        "seeds",
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    ));
    record_pairs.push((
        "image",
        image_paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    ));
    record_pairs.push((
        "model",
        model_paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    ));
    let mut sidecar = out.clone().into_os_string();
    sidecar.push(".cfg");
    fsutil::write_atomic(Path::new(&sidecar), render(&record_pairs).as_bytes())?;

    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed > 0 {
        return Err(CliError::RunsAborted {
            failed,
            total: results.len(),
            report: out,
        });
    }
    let mut msg = String::new();
    for r in &report.rows {
        let _ = writeln!(
            msg,
            "{:<8} {:>5.1}%  psnr {:.2} ± {:.2} dB",
            r.method,
            r.density * 100.0,
            r.psnr_mean,
            r.psnr_std
        );
    }
    let _ = writeln!(msg, "wrote {}", out.display());
    Ok(msg)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<String, CliError> {
    let family = match args.family {
        FamilyArg::Blobs => Family::Blobs,
        FamilyArg::Texture => Family::Texture,
        FamilyArg::Piecewise => Family::PiecewiseConstant,
    };
    if args.width == 0 || args.height == 0 {
        return Err(CliError::Usage("width and height must be positive".into()));
    }
    let img = family.generate(args.width, args.height, args.seed);
    img.save(&args.out)?;
    Ok(format!(
        "wrote {} {}x{} image to {}\n",
        family.name(),
        args.width,
        args.height,
        args.out.display()
    ))
}
