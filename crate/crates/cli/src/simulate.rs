use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stereo_noise::ingest::{
    Capture, DatasetManifest, DatasetWriter, DepthFrame, DepthUnit, ExperimentKind, SCHEMA_VERSION,
};
use stereo_noise::sim::{
    derive_seed, run_sweep, sample_generative, RangeSample, ScanlineLayout, ScanlinePattern, SimRun,
};
use stereo_noise::{Execution, IlluminationModel, NoiseFloor, PowerLawModel, StereoRig};

use crate::cli::SimMode;
use crate::config::Simulation;
use crate::error::{CliError, Context, Result};

pub const PROVENANCE_FILE: &str = "provenance.toml";
const STREAM_CAPTURE: u64 = 0x5eed;
const STREAM_PATTERN: u64 = 0x9a77;

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(flatten)]
    settings: &'a Simulation,
}

fn manifest(sim: &Simulation) -> DatasetManifest {
    DatasetManifest {
        schema_version: SCHEMA_VERSION,
        experiment_kind: ExperimentKind::Simulated,
        illumination: sim.illumination,
        depth_unit: DepthUnit::TenthMillimeters,
        invalid_value: 0,
        width: sim.pixels,
        height: 1,
        notes: format!("simulated, {} mode, seed {}", mode_name(sim.mode), sim.seed),
        captures: sim
            .distances
            .iter()
            .enumerate()
            .map(|(c, &d)| Capture {
                nominal_distance: Some(d),
                frame_count: sim.frames,
                frame_file: format!("capture_{c:02}/frame_{{frame}}.dpth"),
            })
            .collect(),
    }
}

fn mode_name(m: SimMode) -> &'static str {
    match m {
        SimMode::Generative => "generative",
        SimMode::Pipeline => "pipeline",
    }
}

fn encode(manifest: &DatasetManifest, ranges: impl Iterator<Item = Option<f64>>) -> Result<DepthFrame> {
    let values = ranges
        .map(|z| manifest.from_meters(z.unwrap_or(f64::NAN)))
        .collect::<stereo_noise::Result<Vec<u16>>>()
        .context(|| "encoding a simulated frame".into())?;
    DepthFrame::new(manifest.width, manifest.height, values).context(|| "building a simulated frame".into())
}

pub fn run(sim: &Simulation, out: &Path) -> Result<()> {
    let manifest = manifest(sim);
    let writer = DatasetWriter::create(out, &manifest).context(|| format!("creating {}", out.display()))?;
    match sim.mode {
        SimMode::Generative => generative(sim, &manifest, &writer)?,
        SimMode::Pipeline => pipeline(sim, &manifest, &writer)?,
    }
    let prov = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        settings: sim,
    };
    let text = toml::to_string(&prov).map_err(|e| CliError::Config(format!("provenance: {e}")))?;
    let p = out.join(PROVENANCE_FILE);
    std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
    log::info!(
        "wrote {} captures x {} frames to {}",
        manifest.captures.len(),
        sim.frames,
        out.display()
    );
    Ok(())
}

fn generative(sim: &Simulation, manifest: &DatasetManifest, writer: &DatasetWriter) -> Result<()> {
    let p = sim.model.expect("resolved generative settings carry a model");
    let model = PowerLawModel::new(p.k, p.lambda).context(|| "model parameters".into())?;
    let floor_var = sim.noise_floor.map_or(0.0, |s| s * s);
    let pixels = sim.pixels as usize;
    for (c, &z) in sim.distances.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sim.seed, STREAM_CAPTURE, c as u64));
        // the floor is independent of range, so it only widens each capture's Gaussian
        let sigma = (model.sigma_z(z).powi(2) + floor_var).sqrt();
        let at_z = PowerLawModel::new(sigma, 0.0).context(|| format!("capture {c}"))?;
        // pixel-major: sample p * frames + f
        let samples =
            sample_generative(&at_z, &vec![z; pixels], sim.frames, &mut rng).context(|| format!("capture {c}"))?;
        for f in 0..sim.frames {
            let frame = encode(manifest, (0..pixels).map(|p| samples[p * sim.frames + f].z))?;
            writer
                .write_frame(c, f, &frame)
                .context(|| format!("capture {c}, frame {f}"))?;
        }
    }
    Ok(())
}

fn pipeline(sim: &Simulation, manifest: &DatasetManifest, writer: &DatasetWriter) -> Result<()> {
    let r = sim.rig.expect("resolved pipeline settings carry a rig");
    let mut rig = StereoRig::new(r.focal_length, r.baseline, 0, r.control_range).context(|| "rig parameters".into())?;
    let illum =
        IlluminationModel::new(sim.illumination, r.intensity, r.control_range).context(|| "illumination".into())?;
    let nearest = sim.distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max_disparity = rig.range_to_disparity(nearest).context(|| "nearest distance".into())?;
    let opts = stereo_noise::sim::MatchOptions::default();
    let layout = ScanlineLayout::new(max_disparity, sim.pixels as usize, r.half_width, opts.search_radius)
        .context(|| "window layout".into())?;
    rig.pixel_count_x = layout.length;
    let pattern = ScanlinePattern::speckle(
        layout.length,
        r.correlation_length,
        r.contrast,
        derive_seed(sim.seed, STREAM_PATTERN, 0),
    )
    .context(|| "speckle pattern".into())?;
    let mut base = SimRun::new(rig, illum, nearest, sim.frames, sim.seed);
    base.noise_floor = sim
        .noise_floor
        .map(NoiseFloor::new)
        .transpose()
        .context(|| "noise floor".into())?;
    let outputs = run_sweep(Execution::default(), &base, &sim.distances, &pattern, &layout.windows)
        .context(|| "pipeline simulation".into())?;
    let windows = layout.windows.len();
    for (c, out) in outputs.iter().enumerate() {
        if out.match_failures + out.render_failures > 0 {
            log::warn!(
                "distance {} m: {} match failures, {} render failures",
                sim.distances[c],
                out.match_failures,
                out.render_failures
            );
        }
        for (f, chunk) in out.samples.chunks(windows).enumerate() {
            let frame = encode(manifest, chunk.iter().map(|s: &RangeSample| s.z))?;
            writer
                .write_frame(c, f, &frame)
                .context(|| format!("capture {c}, frame {f}"))?;
        }
    }
    Ok(())
}
