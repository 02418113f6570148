use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patchblend::evaluate::Evaluation;
use patchblend::experiment::{method_label, run_experiment, ExperimentConfig, METHODS};
use patchblend::imageio::{read_image, write_image};
use patchblend::simulate::simulate_truth;
use patchblend::{
    blend_progressive, make_window_2d, plan_grid, reconstruct, PaddingPolicy, PatchPredictor,
    PositionClass, PredictorSpec, SsimParams, WindowKind,
};

#[derive(Parser)]
#[command(
    name = "patchblend",
    version,
    about = "Blend patch-wise image predictions with overlap-add windows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one window variant as a grayscale PFM.
    Windows {
        #[arg(long)]
        kind: WindowKind,
        /// Patch size as HEIGHTxWIDTH.
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value = "interior")]
        position: PositionClass,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict every patch of an image and blend the predictions.
    Blend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_size)]
        patch: (usize, usize),
        /// Window kind, or `none` for non-overlapping reassembly.
        #[arg(long, default_value = "hann", value_parser = parse_window)]
        window: WindowChoice,
        #[arg(long, default_value = "identity")]
        predictor: PredictorSpec,
        #[arg(long, default_value = "reflect")]
        padding: PaddingPolicy,
        /// Also write the non-overlapping preview pass here.
        #[arg(long)]
        preview: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic one-hot ground-truth maps.
    Simulate {
        #[arg(long, default_value_t = 14)]
        images: usize,
        #[arg(long, value_parser = parse_size, default_value = "1024x1024")]
        size: (usize, usize),
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Score method outputs against ground truth with SSIM and paired statistics.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        /// LABEL=DIR, repeatable.
        #[arg(long = "method", value_parser = parse_method, required = true)]
        methods: Vec<(String, PathBuf)>,
        #[arg(long)]
        baseline: String,
        /// Per-image score CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, predict with border noise, blend with every method, and score.
    Experiment {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 14)]
        images: usize,
        #[arg(long, value_parser = parse_size, default_value = "1024x1024")]
        size: (usize, usize),
        #[arg(long, value_parser = parse_size, default_value = "128x128")]
        patch: (usize, usize),
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// Noise parameters, e.g. `--noise amplitude=0.5 falloff=8`.
        #[arg(long, num_args = 1.., value_parser = parse_key_value)]
        noise: Vec<(String, f64)>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Core(patchblend::Error),
}

impl From<patchblend::Error> for CliError {
    fn from(e: patchblend::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got `{s}`"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad size `{s}`: {e}"))
    };
    Ok((num(h)?, num(w)?))
}

/// A window kind, or `None` for the non-overlapping baseline.
#[derive(Debug, Clone, Copy)]
struct WindowChoice(Option<WindowKind>);

fn parse_window(s: &str) -> Result<WindowChoice, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(WindowChoice(None));
    }
    s.parse::<WindowKind>()
        .map(|k| WindowChoice(Some(k)))
        .map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<(String, PathBuf), String> {
    let (label, dir) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LABEL=DIR, got `{s}`"))?;
    Ok((label.to_string(), PathBuf::from(dir)))
}

fn parse_key_value(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v = v
        .parse::<f64>()
        .map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn cmd_windows(
    kind: WindowKind,
    size: (usize, usize),
    position: PositionClass,
    out: &Path,
) -> CliResult<()> {
    let window = make_window_2d(kind, size.0, size.1, position)?;
    create_parent(out)?;
    write_image(out, &window.to_tensor())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_blend(
    input: &Path,
    patch: (usize, usize),
    window: Option<WindowKind>,
    predictor: PredictorSpec,
    padding: PaddingPolicy,
    preview: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let image = read_image(input)?;
    let grid = plan_grid(image.height(), image.width(), patch.0, patch.1, padding)?;
    let predictor = PatchPredictor::new(predictor)?.parallel(true);
    create_parent(out)?;
    let result = match (window, preview) {
        (Some(kind), Some(preview_path)) => {
            create_parent(preview_path)?;
            blend_progressive(&image, &predictor, &grid, kind, |stage, img| match stage {
                patchblend::Stage::Preview => write_image(preview_path, img),
                patchblend::Stage::Final => Ok(()),
            })?
        }
        (None, Some(preview_path)) => {
            let result = reconstruct(&image, &predictor, &grid, None)?;
            create_parent(preview_path)?;
            write_image(preview_path, &result)?;
            result
        }
        (kind, None) => reconstruct(&image, &predictor, &grid, kind)?,
    };
    write_image(out, &result)?;
    eprintln!("predictions: {}", predictor.calls());
    Ok(())
}

fn cmd_simulate(
    images: usize,
    size: (usize, usize),
    classes: usize,
    seed: u64,
    outdir: &Path,
) -> CliResult<()> {
    if images == 0 {
        return Err(CliError::Config("--images must be at least 1".into()));
    }
    fs::create_dir_all(outdir)?;
    for k in 0..images {
        let truth = simulate_truth(seed, k, size.0, size.1, classes)?;
        write_image(&outdir.join(format!("sim-{k:03}.pfm")), &truth)?;
    }
    Ok(())
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pfm" | "pgm")
    )
}

/// Image files of `dir` keyed by file name.
fn list_images(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in
        fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
    {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            let name = path
                .file_name()
                .expect("file")
                .to_string_lossy()
                .into_owned();
            files.insert(name, path);
        }
    }
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "{} contains no .pfm or .pgm images",
            dir.display()
        )));
    }
    Ok(files)
}

fn cmd_evaluate(
    truth_dir: &Path,
    methods: &[(String, PathBuf)],
    baseline: &str,
    out: Option<&Path>,
) -> CliResult<()> {
    let truth_files = list_images(truth_dir)?;
    let names: Vec<&String> = truth_files.keys().collect();
    let mut truth = Vec::new();
    for (name, path) in &truth_files {
        let id = Path::new(name)
            .file_stem()
            .expect("named")
            .to_string_lossy()
            .into_owned();
        truth.push((id, read_image(path)?));
    }
    let mut outputs = Vec::new();
    for (label, dir) in methods {
        let files = list_images(dir)?;
        if files.keys().collect::<Vec<_>>() != names {
            return Err(CliError::Config(format!(
                "image set of method `{label}` ({}) does not match the truth set ({})",
                dir.display(),
                truth_dir.display()
            )));
        }
        let images = files
            .values()
            .map(|p| read_image(p))
            .collect::<patchblend::Result<Vec<_>>>()?;
        outputs.push((label.clone(), images));
    }
    let evaluation = Evaluation::score(&truth, &outputs, baseline, &SsimParams::default())?;
    let mut header = vec![format!("truth={}", truth_dir.display())];
    header.extend(
        methods
            .iter()
            .map(|(l, d)| format!("method {l}={}", d.display())),
    );
    header.push(format!("baseline={baseline}"));
    header.push("ssim=gaussian sigma 1.5 radius 5 k1 0.01 k2 0.03 range 1".into());
    if let Some(out) = out {
        create_parent(out)?;
        let mut file = fs::File::create(out)?;
        evaluation.write_long_csv(&mut file, &header)?;
    }
    print!("{}", evaluation.summary(&header)?);
    Ok(())
}

fn cmd_experiment(
    seed: u64,
    images: usize,
    size: (usize, usize),
    patch: (usize, usize),
    classes: usize,
    noise: &[(String, f64)],
    out: &Path,
) -> CliResult<()> {
    let mut config = ExperimentConfig {
        seed,
        images,
        height: size.0,
        width: size.1,
        patch_height: patch.0,
        patch_width: patch.1,
        classes,
        ..ExperimentConfig::default()
    };
    for (key, value) in noise {
        match key.as_str() {
            "amplitude" | "amp" => config.amplitude = *value,
            "falloff" => config.falloff = *value,
            other => {
                return Err(CliError::Config(format!(
                    "unknown noise parameter `{other}`"
                )))
            }
        }
    }
    let report = run_experiment(&config)?;
    fs::create_dir_all(out)?;
    let header = config.header();
    report
        .evaluation
        .write_long_csv(&mut fs::File::create(out.join("scores.csv"))?, &header)?;
    report
        .evaluation
        .write_adjusted_csv(&mut fs::File::create(out.join("adjusted.csv"))?, &header)?;

    let mut seam = fs::File::create(out.join("seam_mae.csv"))?;
    for line in &header {
        writeln!(seam, "# {line}")?;
    }
    let labels: Vec<&str> = METHODS.iter().map(|m| method_label(*m)).collect();
    writeln!(seam, "image-id,{}", labels.join(","))?;
    for (k, id) in report.evaluation.image_ids().iter().enumerate() {
        let row: Vec<String> = report
            .seam_mae
            .iter()
            .map(|m| format!("{:.10}", m[k]))
            .collect();
        writeln!(seam, "{id},{}", row.join(","))?;
    }

    let summary = report.summary()?;
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Windows {
            kind,
            size,
            position,
            out,
        } => cmd_windows(kind, size, position, &out),
        Command::Blend {
            input,
            patch,
            window,
            predictor,
            padding,
            preview,
            out,
        } => cmd_blend(
            &input,
            patch,
            window.0,
            predictor,
            padding,
            preview.as_deref(),
            &out,
        ),
        Command::Simulate {
            images,
            size,
            classes,
            seed,
            outdir,
        } => cmd_simulate(images, size, classes, seed, &outdir),
        Command::Evaluate {
            truth,
            methods,
            baseline,
            out,
        } => cmd_evaluate(&truth, &methods, &baseline, out.as_deref()),
        Command::Experiment {
            seed,
            images,
            size,
            patch,
            classes,
            noise,
            out,
        } => cmd_experiment(seed, images, size, patch, classes, &noise, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_external() { 3 } else { 2 })
        }
    }
}
