//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pixelboost::analysis::{chi_square, noise_fit_report, HistogramSpec};
use pixelboost::denoiser::{
    checkpoint_roundtrip, decode_checkpoint, encode_checkpoint, ConvDenoiser, DenoiserCheckpoint, DenoiserSpec,
    OracleDenoiser, TrainConfig,
};
use pixelboost::diffusion::{
    forward_step, forward_step_with, forward_marginal, posterior_sample, reverse_sample, step_increment,
    DiffusionConfig, LossWeighting, NoiseConvention,
};
use pixelboost::experiment::{run_toy, ToyProtocol, ToyResult};
use pixelboost::imagedata::{decode, encode, make_lr_pair, write_image, ImageFormat};
use pixelboost::metrics::{edge_report, loe, psnr, sobel_magnitude, ssim, SSIM_K1, SSIM_K2};
use pixelboost::noise::sample_noise;
use pixelboost::schedule::Schedule;
use pixelboost::{Error, Image, NoiseKind, RngStream, ScheduleMode, Shape};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_image(shape: Shape, rng: &mut RngStream) -> Image {
    Image::from_fn(shape, |_, _, _| rng.uniform()).unwrap()
}

fn schedule_exactness() -> Outcome {
    let raw = Schedule::<f64>::build(15, 8.0, ScheduleMode::Raw).map_err(|e| e.to_string())?;
    let norm = Schedule::<f64>::build(15, 8.0, ScheduleMode::Normalized).map_err(|e| e.to_string())?;
    // 1/(1+e^-1) to 30 digits: 0.731058578630004879251159241822
    let e8 = (raw.eta(8).unwrap() - 0.5).abs();
    let e9 = (raw.eta(9).unwrap() - 0.731_058_578_630_004_9).abs();
    let ends = norm.eta(0).unwrap().abs().max((norm.eta(15).unwrap() - 1.0).abs());
    let mut tele: f64 = 0.0;
    for s in [&raw, &norm] {
        let sum: f64 = (1..=15).map(|t| s.alpha(t).unwrap()).sum();
        tele = tele.max((sum - (s.eta(15).unwrap() - s.eta(0).unwrap())).abs());
    }
    check(
        e8 <= 1e-12 && e9 <= 1e-12 && ends <= 1e-15 && tele <= 1e-12,
        format!("|eta8-0.5|={e8:.1e} |eta9-s(1)|={e9:.1e} normalized ends {ends:.1e} telescoping {tele:.1e}"),
    )
}

fn worked_example() -> Outcome {
    let inc = step_increment(0.2f64, 0.5, 0.0, -1.2, NoiseConvention::DriftScaled);
    let one = Shape::new(1, 1, 1);
    let x0 = Image::zeros(one).unwrap();
    let w = Image::filled(one, -1.2).unwrap();
    let x1 = forward_step_with(&x0, &x0, &w, 0.2, 0.5, NoiseConvention::DriftScaled).map_err(|e| e.to_string())?;
    let got = x1.get(0, 0, 0);
    check(inc == -0.12 && got == -0.12, format!("increment {inc:?}, x1 - x0 = {got:?}"))
}

struct Moments {
    n: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            n: 0.0,
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    fn push(&mut self, img: &Image) {
        self.n += 1.0;
        for (i, &v) in img.data().iter().enumerate() {
            self.sum[i] += v;
            self.sq[i] += v * v;
        }
    }

    /// Worst mean error in standard errors and worst relative variance error.
    fn compare(&self, mean: &[f64], var: f64) -> (f64, f64) {
        let (mut z, mut rel): (f64, f64) = (0.0, 0.0);
        for i in 0..self.sum.len() {
            let m = self.sum[i] / self.n;
            let v = (self.sq[i] - self.n * m * m) / (self.n - 1.0);
            z = z.max((m - mean[i]).abs() / (var / self.n).sqrt());
            rel = rel.max((v - var).abs() / var);
        }
        (z, rel)
    }
}

fn marginal_composition() -> Outcome {
    let cfg = DiffusionConfig::standard(15, 8.0, 1.5, 0).unwrap();
    let mut rng = RngStream::new(3, 0);
    let hr = random_image(Shape::new(8, 8, 1), &mut rng);
    let pair = make_lr_pair(&hr).unwrap();
    let checkpoints = [3usize, 8, 15];
    let mut moments: Vec<Moments> = checkpoints.iter().map(|_| Moments::new(64)).collect();
    for chain in 0..10_000u64 {
        let mut crng = rng.substream(1 + chain);
        let mut x = pair.hr.clone();
        for t in 1..=15 {
            x = forward_step(&x, &pair.delta0, t, &cfg, &mut crng).unwrap();
            if let Some(k) = checkpoints.iter().position(|&c| c == t) {
                moments[k].push(&x);
            }
        }
    }
    let mut worst = (0.0f64, 0.0f64);
    let mut ok = true;
    for (k, &t) in checkpoints.iter().enumerate() {
        let eta = cfg.schedule.eta(t).unwrap();
        let mean: Vec<f64> = pair.hr.data().iter().zip(pair.delta0.data()).map(|(x, d)| x + eta * d).collect();
        let (z, rel) = moments[k].compare(&mean, 2.25 * eta);
        ok &= z <= 3.0 && rel <= 0.05;
        worst = (worst.0.max(z), worst.1.max(rel));
    }
    check(
        ok,
        format!("64 px x t={{3,8,15}}, 1e4 chains: worst mean {:.2} SE, worst variance {:.2}%", worst.0, 100.0 * worst.1),
    )
}

fn posterior_two_step() -> Outcome {
    let cfg = DiffusionConfig::standard(15, 8.0, 1.5, 0).unwrap();
    let mut rng = RngStream::new(4, 0);
    let hr = random_image(Shape::new(4, 4, 1), &mut rng);
    let delta0 = random_image(Shape::new(4, 4, 1), &mut rng).map(|v| v - 0.5);
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64);
    for t in [2usize, 8, 15] {
        let mut m = Moments::new(16);
        for i in 0..10_000u64 {
            let mut r = rng.substream(1000 * t as u64 + i);
            let x_t = forward_marginal(&hr, &delta0, t, &cfg, &mut r).unwrap();
            m.push(&posterior_sample(&x_t, &hr, t, &cfg, &mut r).unwrap());
        }
        let eta = cfg.schedule.eta(t - 1).unwrap();
        let mean: Vec<f64> = hr.data().iter().zip(delta0.data()).map(|(x, d)| x + eta * d).collect();
        let (z, rel) = m.compare(&mean, 2.25 * eta);
        ok &= z <= 3.0 && rel <= 0.05;
        worst = (worst.0.max(z), worst.1.max(rel));
    }
    check(
        ok,
        format!("16 px x t={{2,8,15}}, 1e4 draws: worst mean {:.2} SE, worst variance {:.2}%", worst.0, 100.0 * worst.1),
    )
}

fn oracle_collapse() -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma in [0.01, 1.5, 10.0] {
        for seed in 0..5u64 {
            let mut rng = RngStream::new(seed, 0);
            let hr = random_image(Shape::new(8, 8, 1), &mut rng);
            let pair = make_lr_pair(&hr).unwrap();
            let cfg = DiffusionConfig::standard(15, 8.0, sigma, seed).unwrap();
            let out = reverse_sample(&pair.lr_up, &OracleDenoiser::new(hr.clone()), &cfg, &mut rng.substream(1), false)
                .map_err(|e| e.to_string())?;
            for (a, b) in out.x0_raw.data().iter().zip(hr.data()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max |x0_hat - x0| = {worst:.1e} over 3 sigmas x 5 seeds"))
}

fn gradient_correctness() -> Outcome {
    let mut rng = RngStream::new(6, 0);
    let spec = DenoiserSpec::conv2(1);
    let shape = Shape::new(6, 6, 1);
    let (x0, y, x_t) = (
        random_image(shape, &mut rng),
        random_image(shape, &mut rng),
        random_image(shape, &mut rng),
    );
    let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.uniform() - 0.5).collect();
    let cfg = DiffusionConfig::standard(15, 8.0, 1.5, 0).unwrap();
    let loss = |p: &[f64], w| {
        ConvDenoiser::new(spec, p.to_vec())
            .unwrap()
            .loss_gradient(&x0, &y, 5, &x_t, &cfg, w)
            .unwrap()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for weighting in [LossWeighting::UniformMse, LossWeighting::ExactKl] {
        let (_, grad) = loss(&params, weighting);
        for k in 0..grad.len() {
            let mut p = params.clone();
            p[k] += h;
            let lp = loss(&p, weighting).0;
            p[k] -= 2.0 * h;
            let lm = loss(&p, weighting).0;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8));
        }
    }
    check(worst < 1e-4, format!("{} params, both weightings: max relative error {worst:.2e}", params.len()))
}

fn toy_learning(run: &ToyResult) -> Outcome {
    let a = run.final_loss < 0.5 * run.initial_loss;
    let b = run.gain_db() >= 0.5;
    check(
        a && b,
        format!(
            "(a) {} loss {:.4} -> {:.4}; (b) {} sampler {:.2} dB vs bicubic {:.2} dB (gain {:+.2} dB, need +0.50)",
            if a { "ok" } else { "FAILED" },
            run.initial_loss,
            run.final_loss,
            if b { "ok" } else { "FAILED" },
            run.sr_psnr_db,
            run.bicubic_psnr_db,
            run.gain_db()
        ),
    )
}

fn sigma_direction(pairs: &[(ToyResult, ToyResult)]) -> Outcome {
    let wins = pairs.iter().filter(|(lo, hi)| hi.sr_psnr_db >= lo.sr_psnr_db).count();
    let detail: Vec<String> = pairs
        .iter()
        .map(|(lo, hi)| format!("{:.2}/{:.2}", lo.sr_psnr_db, hi.sr_psnr_db))
        .collect();
    check(
        wins >= 4,
        format!("sigma=1.5 >= sigma=0.01 in {wins}/5 seeds (dB 0.01/1.5: {})", detail.join(" ")),
    )
}

fn chi_square_ordering() -> Outcome {
    let sigma = 1.5;
    let spec = HistogramSpec::with_bins(64);
    let families = [
        NoiseKind::Brownian { sigma },
        NoiseKind::Gaussian,
        NoiseKind::Laplacian,
        NoiseKind::poisson(),
    ];
    let mut counts = Vec::new();
    for (f, kind) in families.iter().enumerate() {
        let mut hits = 0;
        for trial in 0..100u64 {
            let mut rng = RngStream::new(trial, 100 + f as u64);
            let xs: Vec<f64> = sample_noise(*kind, &[100_000], &mut rng).unwrap();
            let report = noise_fit_report(&xs, sigma, &spec, &RngStream::new(trial, 200 + f as u64)).unwrap();
            hits += usize::from(report.best().kind.name() == kind.name());
        }
        counts.push(hits);
    }
    let mut rng = RngStream::new(0, 1);
    let xs: Vec<f64> = sample_noise(NoiseKind::Gaussian, &[100_000], &mut rng).unwrap();
    let zero = chi_square(&xs, &xs, &spec).unwrap();
    check(
        counts.iter().all(|&c| c >= 95) && zero == 0.0,
        format!(
            "true family first: brownian {} gaussian {} laplacian {} poisson {} /100; identical input {zero:?}",
            counts[0], counts[1], counts[2], counts[3]
        ),
    )
}

fn metrics_battery() -> Outcome {
    let shape = Shape::new(16, 16, 1);
    let mut rng = RngStream::new(10, 0);
    let a = random_image(shape, &mut rng);
    let (c5, c6) = (Image::filled(shape, 0.5).unwrap(), Image::filled(shape, 0.6).unwrap());
    let ssim_closed = {
        let c1 = (SSIM_K1 * 1.0f64).powi(2);
        (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1)
    };
    let mut failures = Vec::new();
    let mut expect = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    expect(psnr(&a, &a, 1.0).unwrap() == f64::INFINITY, "psnr(a,a)");
    expect(psnr(&c5, &c6, 1.0).unwrap() == 20.0, "psnr constants");
    expect(ssim(&a, &a, 1.0).unwrap() == 1.0, "ssim(a,a)");
    expect((ssim(&c5, &c6, 1.0).unwrap() - ssim_closed).abs() < 1e-10, "ssim closed form");
    let _ = SSIM_K2;
    expect(loe(&a, &a, 64).unwrap() == 0.0, "loe identity");
    expect(loe(&a.map(|v| v.powf(2.2)), &a, 64).unwrap() == 0.0, "loe monotone remap");
    let delta = 0.3;
    let step = Image::from_fn(Shape::new(9, 12, 1), |_, x, _| if x < 6 { 0.2 } else { 0.2 + delta }).unwrap();
    let g = sobel_magnitude(&step);
    let edge_ok = (0..9).all(|y| {
        (g.get(y, 5, 0) - 4.0 * delta).abs() < 1e-12
            && (g.get(y, 6, 0) - 4.0 * delta).abs() < 1e-12
            && g.get(y, 2, 0) == 0.0
            && g.get(y, 9, 0) == 0.0
    });
    expect(edge_ok, "sobel step 4*delta");
    let b = random_image(Shape::new(21, 28, 3), &mut rng);
    let c = random_image(Shape::new(21, 28, 3), &mut rng);
    let (ab, ba) = (edge_report(&b, &c, 7).unwrap(), edge_report(&c, &b, 7).unwrap());
    expect(
        ab.difference.values.iter().zip(&ba.difference.values).all(|(x, y)| *x == -*y)
            && ab.patches_a == ba.patches_b,
        "edge grid antisymmetry",
    );
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "psnr inf/20 dB, ssim 1/closed form, loe 0/remap, sobel 4*delta, edge antisymmetry".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pixelboost"))
        .args(args)
        .current_dir(dir)
        .env_remove("PIXELBOOST_SEED")
        .output()
        .expect("spawn pixelboost");
    (
        out.status.code().unwrap_or(-1),
        out.stdout,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Every file under `dir`, sorted by path, with its bytes.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut rng = RngStream::new(42, 0);
    write_image(&random_image(Shape::new(16, 16, 1), &mut rng), &dir.join("hr.pgm")).unwrap();
    write_image(&random_image(Shape::new(16, 16, 3), &mut rng), &dir.join("hr.ppm")).unwrap();
    fs::write(dir.join("manifest.txt"), "hr.pgm\n").unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["schedule", "--steps", "15", "--out", "schedule.csv"],
        vec!["degrade", "--input", "hr.pgm", "--out", "deg"],
        vec!["degrade", "--input", "hr.ppm", "--out", "deg_rgb"],
        vec!["forward", "--input", "hr.pgm", "--out", "fwd", "--seed", "5"],
        vec!["train", "--manifest", "manifest.txt", "--out", "model.pxbk", "--train-steps", "40", "--seed", "5"],
        vec!["sr", "--input", "deg/lr.pgm", "--checkpoint", "model.pxbk", "--out", "sr.pgm", "--seed", "5"],
        vec!["metrics", "--gt", "hr.pgm", "--test", "sr.pgm", "--out", "metrics.csv"],
        vec!["edge-report", "--gt", "hr.pgm", "--test", "deg/lr_up.pgm", "--out", "edges.csv"],
        vec!["analyze-noise", "--gt", "hr.pgm", "--test", "sr.pgm", "--standardize", "--bins", "16", "--seed", "5", "--out", "noise.csv"],
        vec!["sweep", "--sigmas", "0.01,0.4,1.5", "--seed", "7", "--out", "sweep.csv"],
    ];
    for args in &commands {
        let (code, _, err) = cli(args, dir);
        if code != 0 {
            return Err(format!("`{}` exited {code}: {err}", args.join(" ")));
        }
    }
    Ok(snapshot(dir))
}

fn reproducibility_and_formats() -> Outcome {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s1 = run_pipeline(d1.path())?;
    let s2 = run_pipeline(d2.path())?;
    let cli_ok = s1 == s2;

    let mut rng = RngStream::new(11, 0);
    let mut codec_ok = true;
    for (channels, format) in [(1, ImageFormat::Pgm), (3, ImageFormat::Ppm)] {
        let img = Image::from_fn(Shape::new(5, 7, channels), |_, _, _| rng.index(256) as f64 / 255.0).unwrap();
        let bytes = encode(&img, format).unwrap();
        let back: Image = decode(&bytes).unwrap();
        codec_ok &= back == img && encode(&back, format).unwrap() == bytes;
    }

    let spec = DenoiserSpec::conv2(1);
    let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.standard_normal()).collect();
    let train_config = TrainConfig {
        step_size: 1e-2,
        steps: 10,
        batch_size: 8,
        weighting: LossWeighting::ExactKl,
        sigma: 1.5,
        diffusion_steps: 15,
        t_mid: 8.0,
        mode: ScheduleMode::Normalized,
        convention: NoiseConvention::Variance,
        seed: 9,
    };
    let ckpt = DenoiserCheckpoint::new(spec, params, 10, train_config).unwrap();
    let path = d1.path().join("roundtrip.pxbk");
    let back = checkpoint_roundtrip(&ckpt, &path).unwrap();
    let bits = |c: &DenoiserCheckpoint| c.params.iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    let ckpt_ok = back == ckpt && bits(&back) == bits(&ckpt);

    let bytes = encode_checkpoint(&ckpt);
    let truncated = matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(Error::CorruptCheckpoint(_)));
    let mut magic = bytes.clone();
    magic[0] = b'Q';
    let bad_magic = matches!(decode_checkpoint(&magic), Err(Error::CorruptCheckpoint(_)));
    let mut future = bytes.clone();
    future[4..8].copy_from_slice(&9u32.to_le_bytes());
    let versioned = matches!(decode_checkpoint(&future), Err(Error::Version { found: 9, .. }));
    fs::write(d1.path().join("future.pxbk"), &future).unwrap();
    let (code, _, err) = cli(
        &["sr", "--input", "deg/lr.pgm", "--checkpoint", "future.pxbk", "--out", "x.pgm"],
        d1.path(),
    );
    let cli_reject = code == 1 && !err.contains("panicked");
    let errors_ok = truncated && bad_magic && versioned && cli_reject;

    check(
        cli_ok && codec_ok && ckpt_ok && errors_ok,
        format!(
            "CLI byte-identical over {} files: {cli_ok}; PGM/PPM: {codec_ok}; checkpoint: {ckpt_ok}; \
             truncated/magic/version/CLI exit 1: {truncated}/{bad_magic}/{versioned}/{cli_reject}",
            s1.len()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {tag} {name}: {detail} [{secs:.1}s]");
    };

    report("1", "schedule exactness", &mut schedule_exactness);
    report("2", "worked example", &mut worked_example);
    report("3", "marginal/composition", &mut marginal_composition);
    report("4", "posterior two-step law", &mut posterior_two_step);
    report("5", "oracle collapse", &mut oracle_collapse);
    report("6", "gradient correctness", &mut gradient_correctness);

    let start = Instant::now();
    let pairs: Vec<(ToyResult, ToyResult)> = (0..5u64)
        .map(|seed| {
            let lo = run_toy(&ToyProtocol::standard(0.01, seed)).expect("toy run");
            let hi = run_toy(&ToyProtocol::standard(1.5, seed)).expect("toy run");
            (lo, hi)
        })
        .collect();
    println!("   (toy protocol: 10 runs in {:.1}s)", start.elapsed().as_secs_f64());
    report("7", "toy learning", &mut || toy_learning(&pairs[0].1));
    report("8", "sigma direction", &mut || sigma_direction(&pairs));
    report("9", "chi-square ordering", &mut chi_square_ordering);
    report("10", "metrics battery", &mut metrics_battery);
    report("11", "reproducibility & formats", &mut reproducibility_and_formats);

    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
