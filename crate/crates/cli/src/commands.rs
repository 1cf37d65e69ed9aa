use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use physcorrect_core::correction::{correct_sequence, DiagnosticsLog};
use physcorrect_core::kinematics::MotionSequence;
use physcorrect_core::metrics::{evaluate_with_templates, MetricsReport};
use physcorrect_core::motion_file::{default_template, MotionFile};
use physcorrect_core::synth::{generate, Scenario, SynthParams, DEFAULT_FPS};

use crate::config::RunConfig;
use crate::{CliError, Common};

fn run_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = common.loop_n {
        cfg.loop_n = n;
    }
    if let Some(fps) = common.fps {
        cfg.fps = Some(fps);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.diagnostics |= common.diagnostics;
    Ok(cfg)
}

fn load_motion(path: &Path) -> Result<MotionFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(MotionFile::from_json_str(&text)?)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// `dir/stem.json` → `dir/stem.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

struct Corrected {
    file: MotionFile,
    log: DiagnosticsLog,
}

fn run_correction(input: &MotionFile, cfg: &RunConfig) -> Result<Corrected, CliError> {
    let correction = cfg.correction()?;
    let (sequence, log) = correct_sequence(&input.sequence, &input.template, &correction)?;
    Ok(Corrected {
        file: MotionFile::new(sequence, input.template.clone()),
        log,
    })
}

fn write_corrected(out: &Path, result: &Corrected, diagnostics: bool) -> Result<(), CliError> {
    write(out, result.file.to_json_string())?;
    write(
        &sibling(out, "diagnostics.csv"),
        csv_bytes(|w| result.log.write_csv(w)),
    )?;
    if diagnostics {
        write(
            &sibling(out, "dynamics.csv"),
            csv_bytes(|w| result.log.write_dynamics_csv(w)),
        )?;
    }
    Ok(())
}

pub fn correct(input: &Path, common: &Common) -> Result<(), CliError> {
    let cfg = run_config(common)?;
    let file = load_motion(input)?;
    let result = run_correction(&file, &cfg)?;
    for event in &result.log.events {
        eprintln!("warning: {event}");
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| sibling(input, "corrected.json"));
    write_corrected(&out, &result, cfg.diagnostics)?;
    let seq = &result.file.sequence;
    println!(
        "corrected {} persons x {} frames (loop_n={}) -> {}",
        seq.num_persons(),
        seq.num_frames(),
        cfg.loop_n,
        out.display()
    );
    Ok(())
}

fn score(pred: &MotionFile, gt: &MotionFile, cfg: &RunConfig) -> Result<MetricsReport, CliError> {
    Ok(evaluate_with_templates(
        &pred.sequence,
        &pred.template,
        &gt.sequence,
        &gt.template,
        &cfg.metric_params()?,
    )?)
}

fn units(si: bool) -> [&'static str; 6] {
    if si {
        ["m", "m", "m", "m/s^2", "m", "m"]
    } else {
        ["mm", "mm", "mm", "mm/s^2", "mm", "mm"]
    }
}

/// Aligned table; the first column holds `key` values when given.
fn table(key: Option<&str>, rows: &[(String, MetricsReport)], si: bool) -> String {
    let scale = if si { 1e-3 } else { 1.0 };
    let mut s = String::new();
    let lead = |s: &mut String, v: &str| {
        if key.is_some() {
            let _ = write!(s, "{v:>6}");
        }
    };
    lead(&mut s, key.unwrap_or(""));
    for label in MetricsReport::LABELS {
        let _ = write!(s, "{label:>14}");
    }
    s.push('\n');
    lead(&mut s, "");
    for unit in units(si) {
        let _ = write!(s, "{:>14}", format!("({unit})"));
    }
    s.push('\n');
    for (k, report) in rows {
        lead(&mut s, k);
        for v in report.values() {
            if si {
                let _ = write!(s, "{:>14.6}", v * scale);
            } else {
                let _ = write!(s, "{v:>14.3}");
            }
        }
        s.push('\n');
    }
    s
}

pub fn eval(pred: &Path, gt: &Path, common: &Common) -> Result<(), CliError> {
    let cfg = run_config(common)?;
    let pred_file = load_motion(pred)?;
    let gt_file = load_motion(gt)?;
    let report = score(&pred_file, &gt_file, &cfg)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| sibling(pred, "metrics.json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write(&out, json)?;
    write(
        &out.with_extension("csv"),
        format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()),
    )?;
    print!("{}", table(None, &[(String::new(), report)], common.si));
    Ok(())
}

pub fn sweep(
    input: &Path,
    n_values: &[usize],
    gt: Option<&Path>,
    common: &Common,
) -> Result<(), CliError> {
    if n_values.is_empty() {
        return Err(CliError::Usage(
            "--n-values needs at least one loop count".into(),
        ));
    }
    let base = run_config(common)?;
    let configs: Vec<RunConfig> = n_values
        .iter()
        .map(|&n| {
            let cfg = RunConfig {
                loop_n: n,
                ..base.clone()
            };
            cfg.correction().map(|_| cfg)
        })
        .collect::<Result<_, _>>()?;
    let file = load_motion(input)?;
    let gt_file = match gt {
        Some(path) => load_motion(path)?,
        None => file.clone(),
    };

    let results: Vec<Result<(Corrected, MetricsReport), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let (file, gt_file) = (&file, &gt_file);
                scope.spawn(move || {
                    let corrected = run_correction(file, cfg)?;
                    let report = score(&corrected.file, gt_file, cfg)?;
                    Ok((corrected, report))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let results: Vec<(Corrected, MetricsReport)> = results.into_iter().collect::<Result<_, _>>()?;

    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| sibling(input, "sweep"));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut combined = format!("n_l,{}\n", MetricsReport::CSV_HEADER);
    let mut rows = Vec::new();
    for (n, (corrected, report)) in n_values.iter().zip(&results) {
        let out = dir.join(format!("n_l_{n}.json"));
        write_corrected(&out, corrected, base.diagnostics)?;
        let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
        write(&sibling(&out, "metrics.json"), json)?;
        let _ = writeln!(combined, "{n},{}", report.csv_row());
        rows.push((n.to_string(), *report));
    }
    write(&dir.join("sweep.csv"), combined)?;
    print!("{}", table(Some("N_l"), &rows, common.si));
    Ok(())
}

pub fn synth(scenario: &str, frames: usize, common: &Common) -> Result<(), CliError> {
    let cfg = run_config(common)?;
    let scenario: Scenario = scenario.parse()?;
    let template = default_template()?;
    let params = SynthParams {
        seed: cfg.seed,
        frames,
        fps: cfg.fps.unwrap_or(DEFAULT_FPS),
    };
    let sequence: MotionSequence = generate(scenario, &params, &template)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{scenario}.json")));
    write(&out, MotionFile::new(sequence, template).to_json_string())?;
    println!(
        "{scenario} (seed {}, {frames} frames) -> {}",
        cfg.seed,
        out.display()
    );
    Ok(())
}

/// Adapter from an external pose format to a [`MotionFile`].
pub trait Importer {
    fn name(&self) -> &'static str;
    fn import(&self, input: &Path) -> Result<MotionFile, CliError>;
}

/// Interface for SLAHMR `.npz` exports; conversion is not bundled.
struct SlahmrNpz;

impl Importer for SlahmrNpz {
    fn name(&self) -> &'static str {
        "slahmr-npz"
    }

    fn import(&self, input: &Path) -> Result<MotionFile, CliError> {
        Err(CliError::Usage(format!(
            "{}: the {} adapter is not bundled; convert root_orient, pose_body, trans and betas \
             to the motion JSON layout described in the README",
            input.display(),
            self.name()
        )))
    }
}

pub fn import(from: &str, input: &Path, common: &Common) -> Result<(), CliError> {
    let importers: [&dyn Importer; 1] = [&SlahmrNpz];
    let importer = importers
        .into_iter()
        .find(|i| i.name() == from)
        .ok_or_else(|| CliError::Usage(format!("unknown import format '{from}'")))?;
    let file = importer.import(input)?;
    let out = common.out.clone().unwrap_or_else(|| sibling(input, "json"));
    write(&out, file.to_json_string())
}
