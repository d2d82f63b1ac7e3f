use clap::{Parser, Subcommand};

use eegdec::dsp;
use eegdec::ersp;
use eegdec::error::Error;
use eegdec::eval;
use eegdec::features;
use eegdec::io;
use eegdec::montage::Montage;
use eegdec::synth;
use eegdec::Real;

#[derive(Parser)]
#[command(
    name = "eegdec",
    about = "Offline EEG decoding: filtering, epoching, CSP+LDA evaluation, ERSP and topography maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording with known ground truth
    Synth {
        /// JSON generator config; defaults to the built-in 4-class layout
        #[arg(long)]
        config: Option<String>,
        /// output prefix for <prefix>.json/.f32/.events.csv and <prefix>.truth.json
        #[arg(long)]
        out: String,
        /// overrides the seed from the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Notch, bandpass, decimate, and epoch a recording
    Preprocess {
        /// input recording prefix
        #[arg(long = "in")]
        input: String,
        /// passband as LO:HI in Hz
        #[arg(long, default_value = "1:30")]
        band: String,
        /// powerline notch center in Hz; 0 disables
        #[arg(long, default_value_t = 60.0)]
        notch: Real,
        /// integer decimation factor
        #[arg(long, default_value_t = 10)]
        decim: usize,
        /// epoch window as START:END in ms relative to event onset
        #[arg(long, default_value = "500:4500")]
        epoch: String,
        /// output epochs prefix
        #[arg(long)]
        out: String,
        /// bandpass filter order
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Cross-validated CSP+LDA accuracy with a written report
    Evaluate {
        /// epochs prefix from `preprocess`
        #[arg(long)]
        epochs: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSP filters kept per spectral end, per one-vs-rest model
        #[arg(long, default_value_t = 3)]
        csp_per_side: usize,
        /// LDA covariance shrinkage in [0, 1]
        #[arg(long, default_value_t = 0.05)]
        shrinkage: Real,
        /// comma-separated list of LO:HI passbands for the feature filter bank
        #[arg(long, default_value = "8:13,13:30")]
        bands: String,
        /// where to write the JSON report
        #[arg(long)]
        report: String,
    },
    /// Event-related spectral perturbation map for one channel
    Ersp {
        #[arg(long)]
        epochs: String,
        /// baseline: either an epochs prefix, or START:END in ms within the epochs
        #[arg(long)]
        baseline: String,
        #[arg(long, default_value = "C3")]
        channel: String,
        /// output time points per frequency row
        #[arg(long, default_value_t = 200)]
        times: usize,
        #[arg(long)]
        out: String,
    },
    /// Band power per channel and time window, with montage coordinates
    Topomap {
        #[arg(long)]
        epochs: String,
        /// band as LO:HI in Hz
        #[arg(long, default_value = "8:30")]
        band: String,
        /// comma-separated START:END windows in ms
        #[arg(long, default_value = "500:1500,1500:2500,2500:3500")]
        windows: String,
        #[arg(long)]
        out: String,
    },
    /// End-to-end demonstration: synth, preprocess, evaluate, ersp
    Demo {
        /// directory for all intermediate and final artifacts
        #[arg(long, default_value = "demo-out")]
        dir: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_pair(text: &str, what: &str) -> Result<(Real, Real), Error> {
    let mut it = text.splitn(2, ':');
    let a = it.next().unwrap_or("");
    let b = it.next().ok_or_else(|| {
        Error::parse(format!("{what} must be written as LO:HI, got '{text}'"))
    })?;
    let lo: Real = a
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("{what}: '{a}' is not a number")))?;
    let hi: Real = b
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("{what}: '{b}' is not a number")))?;
    Ok((lo, hi))
}

fn parse_pair_list(text: &str, what: &str) -> Result<Vec<(Real, Real)>, Error> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_pair(s.trim(), what))
        .collect()
}

fn load_recording(prefix: &str) -> Result<eegdec::types::Recording, Error> {
    let (h, d, e) = io::recording_paths(prefix);
    io::read_recording(&h, &d, &e)
}

fn run_synth(config: Option<String>, out: String, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = match config {
        Some(path) => {
            if !io::path_exists(&path) {
                return Err(Error::domain(format!("config not found: {path}")));
            }
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str::<synth::GeneratorConfig>(&text)
                .map_err(|e| Error::format(&path, e.to_string()))?
        }
        None => synth::GeneratorConfig::default_with_seed(0),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (rec, gt) = synth::generate(&cfg)?;
    let (h, d, e) = io::recording_paths(&out);
    io::write_recording(&rec, &h, &d, &e)?;
    let truth_path = format!("{out}.truth.json");
    std::fs::write(&truth_path, synth::describe_ground_truth(&gt))
        .map_err(|e| Error::io(&truth_path, e))?;
    println!(
        "wrote {} trials, {} channels, {} samples at {} Hz to {out}.*",
        gt.trials.len(),
        rec.n_channels(),
        rec.n_samples(),
        rec.sample_rate_hz()
    );
    println!("ground truth: {truth_path}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_preprocess(
    input: String,
    band: String,
    notch: Real,
    decim: usize,
    epoch: String,
    out: String,
    order: usize,
) -> Result<(), Error> {
    let band = parse_pair(&band, "band")?;
    let window = parse_pair(&epoch, "epoch window")?;
    let mut rec = load_recording(&input)?;
    if notch > 0.0 {
        let f = dsp::design_notch::<Real>(notch, 35.0, rec.sample_rate_hz())?;
        let data = dsp::filtfilt_matrix(&f, &rec.data())?;
        rec = rec.with_parts(rec.sample_rate_hz(), data, rec.events().to_vec())?;
    }
    let bp = dsp::design_butterworth_bandpass::<Real>(order, band.0, band.1, rec.sample_rate_hz())?;
    let data = dsp::filtfilt_matrix(&bp, &rec.data())?;
    rec = rec.with_parts(rec.sample_rate_hz(), data, rec.events().to_vec())?;
    rec = dsp::decimate(&rec, decim)?;
    let label_set = {
        let mut set = Vec::new();
        for e in rec.events() {
            if !set.contains(&e.label) {
                set.push(e.label.clone());
            }
        }
        set
    };
    let (epochs, dropped) = dsp::extract_epochs(&rec, window, &label_set)?;
    io::write_epochs(&epochs, &out)?;
    println!(
        "kept {} epochs of {} samples each at {} Hz ({} events dropped)",
        epochs.n_trials(),
        epochs.n_epoch_samples(),
        epochs.sample_rate_hz(),
        dropped
    );
    println!("epochs: {out}.epochs.json / {out}.epochs.f32");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_evaluate(
    epochs: String,
    folds: usize,
    reps: usize,
    seed: u64,
    csp_per_side: usize,
    shrinkage: Real,
    bands: String,
    report_path: String,
) -> Result<(), Error> {
    let epochs = io::read_epochs(&epochs)?;
    let config = eval::PipelineConfig {
        bands_hz: parse_pair_list(&bands, "band")?,
        filter_order: 3,
        csp_per_side,
        shrinkage,
    };
    let report = eval::cross_validate(&epochs, &config, folds, reps, seed)?;
    print!("{}", eval::summarize(&report));
    io::write_report(&report, &report_path)?;
    println!("report: {report_path}");
    Ok(())
}

fn run_ersp(
    epochs_prefix: String,
    baseline: String,
    channel: String,
    times: usize,
    out: String,
) -> Result<(), Error> {
    let epochs = io::read_epochs(&epochs_prefix)?;
    let freqs = ersp::default_freqs();
    let baseline_epochs;
    let bl = if baseline.contains(':') {
        let (a, b) = parse_pair(&baseline, "baseline window")?;
        ersp::Baseline::Window(a, b)
    } else {
        baseline_epochs = io::read_epochs(&baseline)?;
        ersp::Baseline::Epochs(&baseline_epochs)
    };
    let map = ersp::compute_ersp(&epochs, &bl, &channel, &freqs, times)?;
    if !map.flagged_freqs_hz.is_empty() {
        eprintln!(
            "warning: baseline shorter than one period at {} Hz",
            map.flagged_freqs_hz
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    ersp::export_ersp_csv(&[map], &out)?;
    println!("ersp map: {out}");
    Ok(())
}

fn run_topomap(
    epochs_prefix: String,
    band: String,
    windows: String,
    out: String,
) -> Result<(), Error> {
    let epochs = io::read_epochs(&epochs_prefix)?;
    let band = parse_pair(&band, "band")?;
    let windows = parse_pair_list(&windows, "window")?;
    let map = features::band_power_topography(&epochs, band, &windows)?;
    features::export_topography_csv(&map, &Montage::standard_64(), &out)?;
    println!("topography map: {out}");
    Ok(())
}

fn run_demo(dir: String, seed: u64) -> Result<(), Error> {
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let rec_prefix = format!("{dir}/recording");
    let epoch_prefix = format!("{dir}/epochs");
    let rest_prefix = format!("{dir}/rest");
    println!("== synth ==");
    run_synth(None, rec_prefix.clone(), Some(seed))?;
    println!("== preprocess (analysis epochs) ==");
    run_preprocess(
        rec_prefix.clone(),
        "1:30".into(),
        60.0,
        1,
        "500:4500".into(),
        epoch_prefix.clone(),
        3,
    )?;
    println!("== preprocess (rest baseline) ==");
    run_preprocess(
        rec_prefix,
        "1:30".into(),
        60.0,
        1,
        "-500:0".into(),
        rest_prefix.clone(),
        3,
    )?;
    println!("== evaluate ==");
    run_evaluate(
        epoch_prefix.clone(),
        5,
        5,
        seed,
        3,
        0.05,
        "8:13,13:30".into(),
        format!("{dir}/report.json"),
    )?;
    println!("== ersp ==");
    run_ersp(
        epoch_prefix.clone(),
        rest_prefix,
        "C3".into(),
        200,
        format!("{dir}/ersp_c3.csv"),
    )?;
    println!("== topomap ==");
    run_topomap(
        epoch_prefix,
        "8:30".into(),
        "500:1500,1500:2500,2500:3500".into(),
        format!("{dir}/topomap.csv"),
    )?;
    println!("demo artifacts in {dir}/");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { config, out, seed } => run_synth(config, out, seed),
        Command::Preprocess {
            input,
            band,
            notch,
            decim,
            epoch,
            out,
            order,
        } => run_preprocess(input, band, notch, decim, epoch, out, order),
        Command::Evaluate {
            epochs,
            folds,
            reps,
            seed,
            csp_per_side,
            shrinkage,
            bands,
            report,
        } => run_evaluate(epochs, folds, reps, seed, csp_per_side, shrinkage, bands, report),
        Command::Ersp {
            epochs,
            baseline,
            channel,
            times,
            out,
        } => run_ersp(epochs, baseline, channel, times, out),
        Command::Topomap {
            epochs,
            band,
            windows,
            out,
        } => run_topomap(epochs, band, windows, out),
        Command::Demo { dir, seed } => run_demo(dir, seed),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Domain(_) | Error::Shape(_) | Error::Parse(_) | Error::Format { .. } => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
