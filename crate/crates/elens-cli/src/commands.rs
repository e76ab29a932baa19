//! Implementations of the CLI subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use elens::ensemble::{Nnp, SampleSet, SizeMode};
use elens::kernels::{calibrate_gamma, CpdKernelSpec, KernelFamily, PointCloud};
use elens::nalgebra::DMatrix;
use elens::sampling::{
    gibbs_chain, sample_fixed, sample_low_rank, sample_varying, GibbsConfig, GibbsMode,
    RngState, SamplerRng, RNG_ALGORITHM,
};
use elens::verify::{self, instances};

use crate::args::{
    FileFormat, ForestArgs, KernelKind, ModelArgs, RepulsionArgs, SampleArgs, SamplerKind,
    SizeDistArgs, VerifyArgs,
};
use crate::formats::{self, SampleMetadata};
use crate::{CliError, CliResult};

/// Stream indices keeping cloud generation and sampling independent under
/// one master seed.
const CLOUD_STREAM: u64 = 1;
const SAMPLER_STREAM: u64 = 2;

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn build_cloud(model: &ModelArgs) -> CliResult<PointCloud> {
    match (&model.points, &model.generate_gaussian) {
        (Some(path), None) => formats::read_points(path),
        (None, Some(dims)) => {
            let (n, d) = (dims[0], dims[1]);
            if n == 0 || d == 0 {
                return Err(CliError::Config(
                    "--generate-gaussian needs positive N and D".into(),
                ));
            }
            let mut rng = RngState::new(model.seed).split(CLOUD_STREAM).rng();
            Ok(instances::gaussian_cloud(n, d, &mut rng))
        }
        (None, None) => Err(CliError::Config(
            "one of --points or --generate-gaussian is required".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    }
}

struct BuiltModel {
    nnp: Nnp,
    kernel: &'static str,
    beta: Option<f64>,
    order: Option<u32>,
    lengthscale: Option<f64>,
    gamma: f64,
}

fn build_model(model: &ModelArgs, cloud: &PointCloud) -> CliResult<BuiltModel> {
    let family = match model.kernel {
        KernelKind::Distance => KernelFamily::DistancePower { beta: model.beta },
        KernelKind::Gaussian => KernelFamily::Gaussian {
            lengthscale: model.lengthscale,
        },
    };
    let gamma = match (model.gamma, model.target_size) {
        (Some(g), None) => g,
        (None, Some(target)) => calibrate_gamma(cloud, &family, target)?.gamma,
        (None, None) => 1.0,
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    };
    let nnp = family.build(cloud, gamma)?;
    let (kernel, beta, order, lengthscale) = match model.kernel {
        KernelKind::Distance => {
            let spec = CpdKernelSpec::new(model.beta, gamma)?;
            ("distance", Some(model.beta), Some(spec.order()), None)
        }
        KernelKind::Gaussian => ("gaussian", None, None, Some(model.lengthscale)),
    };
    Ok(BuiltModel {
        nnp,
        kernel,
        beta,
        order,
        lengthscale,
        gamma,
    })
}

fn mode_string(mode: SizeMode) -> String {
    match mode {
        SizeMode::Varying => "varying".into(),
        SizeMode::Fixed(m) => format!("fixed:{m}"),
    }
}

fn write_sample_file(
    out: Option<&Path>,
    format: FileFormat,
    meta: &SampleMetadata,
    samples: &[SampleSet],
) -> CliResult<()> {
    let path_for_err = out.map(|p| p.to_path_buf());
    let sink = open_output(out)?;
    let result = match format {
        FileFormat::Jsonl => formats::write_samples_jsonl(sink, meta, samples),
        FileFormat::Csv => formats::write_samples_csv(sink, meta, samples),
    };
    result.map_err(|e| match &path_for_err {
        Some(p) => CliError::io(p, e),
        None => CliError::Config(format!("failed writing to stdout: {e}")),
    })
}

/// Factors a positive semi-definite kernel for the low-rank sampling path.
fn psd_factor(nnp: &Nnp) -> CliResult<DMatrix<f64>> {
    let eig = nnp.kernel().clone().symmetric_eigen();
    let n = nnp.n();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut cols = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-10 * scale {
            return Err(CliError::Config(
                "low-rank sampling requires a positive semi-definite kernel; \
                 the distance kernel is only conditionally positive definite"
                    .into(),
            ));
        }
        if lambda > 1e-12 * scale {
            cols.push(eig.eigenvectors.column(i) * lambda.sqrt());
        }
    }
    let mut factor = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        factor.set_column(j, c);
    }
    Ok(factor)
}

pub fn cmd_sample(args: &SampleArgs) -> CliResult<()> {
    let cloud = build_cloud(&args.model)?;
    let built = build_model(&args.model, &cloud)?;
    let nnp = &built.nnp;
    let mode = match args.fixed_size {
        Some(m) => SizeMode::Fixed(m),
        None => SizeMode::Varying,
    };
    let mut rng: SamplerRng = RngState::new(args.model.seed).split(SAMPLER_STREAM).rng();

    let (samples, burn_in, thin) = match args.sampler {
        SamplerKind::Exact => {
            let mut samples = Vec::with_capacity(args.draws);
            for _ in 0..args.draws {
                samples.push(match mode {
                    SizeMode::Varying => sample_varying(nnp, &mut rng)?,
                    SizeMode::Fixed(m) => sample_fixed(nnp, m, &mut rng)?,
                });
            }
            (samples, None, None)
        }
        SamplerKind::Lowrank => {
            let factor = psd_factor(nnp)?;
            let features = nnp.features().clone();
            let mut samples = Vec::with_capacity(args.draws);
            for _ in 0..args.draws {
                samples.push(sample_low_rank(
                    &factor,
                    &features,
                    elens::ensemble::DEFAULT_TOL,
                    mode,
                    &mut rng,
                )?);
            }
            (samples, None, None)
        }
        SamplerKind::Gibbs => {
            let config = GibbsConfig {
                mode: match mode {
                    SizeMode::Varying => GibbsMode::Varying,
                    SizeMode::Fixed(m) => GibbsMode::Fixed(m),
                },
                burn_in: args.burn_in,
                thin: args.thin,
                iterations: args.draws,
            };
            let run = gibbs_chain(
                nnp,
                &config,
                &RngState::new(args.model.seed).split(SAMPLER_STREAM),
            )?;
            (run.samples, Some(args.burn_in), Some(args.thin))
        }
    };

    let meta = SampleMetadata {
        kind: "elens-samples".into(),
        n: nnp.n(),
        seed: args.model.seed,
        rng: RNG_ALGORITHM.into(),
        sampler: match args.sampler {
            SamplerKind::Exact => "exact",
            SamplerKind::Lowrank => "lowrank",
            SamplerKind::Gibbs => "gibbs",
        }
        .into(),
        mode: mode_string(mode),
        draws: samples.len(),
        kernel: Some(built.kernel.into()),
        beta: built.beta,
        order: built.order,
        lengthscale: built.lengthscale,
        gamma: Some(built.gamma),
        q: None,
        expected_size: Some(nnp.expected_size()),
        burn_in,
        thin,
    };
    write_sample_file(args.out.as_deref(), args.format, &meta, &samples)
}

pub fn cmd_repulsion(args: &RepulsionArgs) -> CliResult<()> {
    let cloud = build_cloud(&args.model)?;
    let built = build_model(&args.model, &cloud)?;
    let kernel = built.nnp.marginal_kernel();
    let anchor = match args.anchor {
        Some(i) if i >= cloud.len() => {
            return Err(CliError::Config(format!(
                "anchor {i} out of range for {} points",
                cloud.len()
            )));
        }
        Some(i) => i,
        None => cloud.nearest_to_centroid(),
    };
    let mut out = open_output(args.out.as_deref())?;
    let emit = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "i,j,distance,rho")?;
        for j in 0..cloud.len() {
            let rho = kernel
                .repulsion_index(anchor, j)
                .expect("diagonal validated by model construction");
            writeln!(
                out,
                "{},{},{:.16e},{:.16e}",
                anchor,
                j,
                cloud.distance(anchor, j),
                rho
            )?;
        }
        Ok(())
    };
    emit(&mut out).map_err(|e| match &args.out {
        Some(p) => CliError::io(p, e),
        None => CliError::Config(format!("failed writing to stdout: {e}")),
    })
}

pub fn cmd_size_dist(args: &SizeDistArgs) -> CliResult<()> {
    let cloud = build_cloud(&args.model)?;
    let built = build_model(&args.model, &cloud)?;
    let dist = built.nnp.size_distribution();
    let mut out = open_output(args.out.as_deref())?;
    let emit = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "m,probability")?;
        for (m, &prob) in dist.iter().enumerate() {
            writeln!(out, "{},{:.16e}", m, prob)?;
        }
        Ok(())
    };
    emit(&mut out).map_err(|e| match &args.out {
        Some(p) => CliError::io(p, e),
        None => CliError::Config(format!("failed writing to stdout: {e}")),
    })
}

pub fn cmd_forest(args: &ForestArgs) -> CliResult<()> {
    let lap = formats::read_graph(&args.graph)?;
    let nnp = elens::kernels::forest_roots_nnp(&lap, args.q)?;
    let expected_roots = nnp.expected_size();
    let mut rng = RngState::new(args.seed).split(SAMPLER_STREAM).rng();
    let mut samples = Vec::with_capacity(args.draws);
    for _ in 0..args.draws {
        let roots = sample_varying(&nnp, &mut rng)?;
        debug_assert!(!roots.is_empty(), "a spanning forest has a root");
        samples.push(roots);
    }
    let meta = SampleMetadata {
        kind: "elens-forest-roots".into(),
        n: nnp.n(),
        seed: args.seed,
        rng: RNG_ALGORITHM.into(),
        sampler: "exact".into(),
        mode: "varying".into(),
        draws: samples.len(),
        kernel: None,
        beta: None,
        order: None,
        lengthscale: None,
        gamma: None,
        q: Some(args.q),
        expected_size: Some(expected_roots),
        burn_in: None,
        thin: None,
    };
    eprintln!("expected root count: {expected_roots:.6}");
    write_sample_file(args.out.as_deref(), args.format, &meta, &samples)
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    if args.inject_asymmetric {
        let mut l = DMatrix::identity(4, 4);
        l[(0, 1)] = 0.5; // deliberately not mirrored
        let err = Nnp::build(l, DMatrix::zeros(4, 0), elens::ensemble::DEFAULT_TOL)
            .expect_err("asymmetric kernel must fail validation");
        println!("FAIL injected-asymmetry validation rejected the model: {err}");
        return Err(CliError::Model(err));
    }
    let selected: Vec<_> = if args.only.is_empty() {
        verify::CRITERIA.iter().collect()
    } else {
        let known: Vec<&str> = verify::CRITERIA.iter().map(|(name, _)| *name).collect();
        for name in &args.only {
            if !known.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown check '{name}'; expected one of: {}",
                    known.join(", ")
                )));
            }
        }
        verify::CRITERIA
            .iter()
            .filter(|(name, _)| args.only.iter().any(|o| o == name))
            .collect()
    };
    println!(
        "running {} checks with seed {} (rng {})",
        selected.len(),
        args.seed,
        RNG_ALGORITHM
    );
    let mut all_passed = true;
    for (i, (_, criterion)) in selected.iter().enumerate() {
        let report = criterion(args.seed);
        println!("[{:2}/{}] {}", i + 1, selected.len(), report.summary_line());
        all_passed &= report.passed;
    }
    if all_passed {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::VerificationFailed)
    }
}
