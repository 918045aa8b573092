use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pixelboost::analysis::{noise_fit_report, HistogramSpec};
use pixelboost::denoiser::{load_checkpoint, save_checkpoint, smoothed, train};
use pixelboost::diffusion::{forward_trajectory, reverse_sample};
use pixelboost::experiment::{run_toy, STREAM_SAMPLING, STREAM_TRAIN_DATA};
use pixelboost::imagedata::{
    bicubic_resize, make_lr_pair, read_f64_le, read_image, synth_dataset, write_f64_le, write_image, ImageFormat,
    Scale, SynthSpec, SR_FACTOR,
};
use pixelboost::metrics::{edge_report, MetricReport};
use pixelboost::{Error, Image, RngStream};

use crate::config::RunConfig;
use crate::{CliError, Command};

pub const STREAM_FORWARD: u64 = 0xf02d;
pub const STREAM_ANALYSIS: u64 = 0xa7a1;
const LOSS_SMOOTHING: usize = 50;

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Schedule { out, .. } => emit(out.as_deref(), &cfg.schedule()?.to_csv()),
        Command::Degrade { input, out } => degrade(input, out),
        Command::Forward { input, out, .. } => forward(input, out, cfg),
        Command::Train { manifest, out, .. } => train_cmd(manifest.as_deref(), out, cfg),
        Command::Sr { input, checkpoint, out } => super_resolve(input, checkpoint, out, cfg),
        Command::AnalyzeNoise {
            gt,
            test,
            residuals,
            standardize,
            out,
            ..
        } => analyze_noise(gt.as_deref(), test.as_deref(), residuals.as_deref(), *standardize, out.as_deref(), cfg),
        Command::Metrics { gt, test, out } => {
            let report = MetricReport::evaluate(&read_image::<f64>(gt)?, &read_image::<f64>(test)?)?;
            emit(out.as_deref(), &format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row()))
        }
        Command::EdgeReport { gt, test, out, .. } => edges(gt, test, out.as_deref(), cfg),
        Command::Sweep { out, .. } => sweep(out.as_deref(), cfg),
    }
}

/// Writes to `out`, or standard output when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn extension(img: &Image) -> Result<&'static str, CliError> {
    Ok(match ImageFormat::for_channels(img.channels())? {
        ImageFormat::Pgm => "pgm",
        ImageFormat::Ppm => "ppm",
    })
}

fn degrade(input: &Path, out: &Path) -> Result<(), CliError> {
    let hr: Image = read_image(input)?;
    let pair = make_lr_pair(&hr)?;
    let ext = extension(&hr)?;
    fs::create_dir_all(out)?;
    write_image(&pair.lr, &out.join(format!("lr.{ext}")))?;
    write_image(&pair.lr_up, &out.join(format!("lr_up.{ext}")))?;
    write_f64_le(pair.delta0.data().iter().copied(), &out.join("delta0.f64"))?;
    Ok(())
}

fn forward(input: &Path, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let hr: Image = read_image(input)?;
    let pair = make_lr_pair(&hr)?;
    let dcfg = cfg.diffusion()?;
    let mut rng = RngStream::new(cfg.seed, STREAM_FORWARD);
    let frames = forward_trajectory(&pair.hr, &pair.delta0, dcfg.steps(), &dcfg, &mut rng)?;
    let ext = extension(&hr)?;
    fs::create_dir_all(out)?;
    let mut csv = String::from("t,eta,mean,variance\n");
    for (t, frame) in frames.iter().enumerate() {
        write_image(frame, &out.join(format!("frame_{t:03}.{ext}")))?;
        writeln!(csv, "{t},{},{},{}", dcfg.schedule.eta(t)?, frame.mean(), frame.variance()).unwrap();
    }
    fs::write(out.join("trajectory.csv"), csv)?;
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if paths.is_empty() {
        return Err(Error::Parameter(format!("manifest {} lists no images", path.display())).into());
    }
    Ok(paths)
}

fn train_cmd(manifest: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let hrs: Vec<Image> = match manifest {
        Some(m) => read_manifest(m)?.iter().map(|p| read_image(p)).collect::<Result<_, _>>()?,
        None => synth_dataset(
            SynthSpec::new(cfg.dataset, cfg.train_images, cfg.image_size),
            &mut RngStream::new(cfg.seed, STREAM_TRAIN_DATA),
        )?,
    };
    let channels = hrs[0].channels();
    let mut data = Vec::with_capacity(hrs.len());
    for hr in &hrs {
        if hr.channels() != channels {
            return Err(Error::Parameter("all training images must have the same channel count".into()).into());
        }
        let pair = make_lr_pair(hr)?;
        data.push((pair.hr, pair.lr_up));
    }
    let outcome = train(&data, &cfg.diffusion()?, &cfg.train_options(channels))?;
    save_checkpoint(&outcome.checkpoint, out)?;
    let mut csv = String::from("step,loss,smoothed\n");
    for (i, (loss, s)) in outcome
        .losses
        .iter()
        .zip(smoothed(&outcome.losses, LOSS_SMOOTHING))
        .enumerate()
    {
        writeln!(csv, "{i},{loss},{s}").unwrap();
    }
    let mut loss_path = out.as_os_str().to_owned();
    loss_path.push(".loss.csv");
    fs::write(PathBuf::from(loss_path), csv)?;
    Ok(())
}

fn super_resolve(input: &Path, checkpoint: &Path, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let lr: Image = read_image(input)?;
    if lr.channels() != ckpt.spec.image_channels {
        return Err(Error::Parameter(format!(
            "checkpoint expects {} channel(s), image has {}",
            ckpt.spec.image_channels,
            lr.channels()
        ))
        .into());
    }
    let y0_up = bicubic_resize(&lr, Scale::up(SR_FACTOR))?;
    let dcfg = ckpt.train_config.diffusion::<f64>()?;
    let model = ckpt.model::<f64>()?;
    let mut rng = RngStream::new(cfg.seed, STREAM_SAMPLING);
    let sr = reverse_sample(&y0_up, &model, &dcfg, &mut rng, false)?;
    write_image(&sr.x0, out)?;
    Ok(())
}

fn analyze_noise(
    gt: Option<&Path>,
    test: Option<&Path>,
    residuals: Option<&Path>,
    standardize: bool,
    out: Option<&Path>,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let mut samples = match (residuals, gt, test) {
        (Some(path), _, _) => read_f64_le(path)?,
        (None, Some(gt), Some(test)) => {
            let (gt, test): (Image, Image) = (read_image(gt)?, read_image(test)?);
            (&test - &gt)?.into_vec()
        }
        _ => return Err(CliError::Usage("give --residuals, or both --gt and --test".into())),
    };
    if standardize {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateFit.into());
        }
        for v in &mut samples {
            *v = (*v - mean) / sd;
        }
    }
    let rng = RngStream::new(cfg.seed, STREAM_ANALYSIS);
    let report = noise_fit_report(&samples, cfg.sigma, &HistogramSpec::with_bins(cfg.bins), &rng)?;
    emit(out, &report.to_csv())
}

fn edges(gt: &Path, test: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let (gt, test): (Image, Image) = (read_image(gt)?, read_image(test)?);
    let report = edge_report(&gt, &test, cfg.patch)?;
    let mut csv = String::from("row,col,gt_mean,test_mean,difference\n");
    for r in 0..report.difference.rows {
        for c in 0..report.difference.cols {
            writeln!(
                csv,
                "{r},{c},{},{},{}",
                report.patches_a.get(r, c),
                report.patches_b.get(r, c),
                report.difference.get(r, c)
            )
            .unwrap();
        }
    }
    emit(out, &csv)
}

fn sweep(out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let mut csv = String::from("sigma,psnr_db,ssim,loe,bicubic_psnr_db,bicubic_ssim,initial_loss,final_loss\n");
    for &sigma in &cfg.sigmas {
        let r = run_toy(&cfg.protocol(sigma))?;
        writeln!(
            csv,
            "{sigma},{},{},{},{},{},{},{}",
            r.sr_psnr_db, r.sr_ssim, r.sr_loe, r.bicubic_psnr_db, r.bicubic_ssim, r.initial_loss, r.final_loss
        )
        .unwrap();
    }
    emit(out, &csv)
}
