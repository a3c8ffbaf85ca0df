//! Command implementations. Every command is a pure function of its config
//! file, input files, and seed: rerunning overwrites outputs with identical
//! bytes.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use bfcb_core::codebook::{
    build_dataset_weighted, kmeans, load_codebook, load_dataset, save_codebook, save_dataset,
    Codebook, DistanceMetric, KmeansOptions, TrainingDataset,
};
use bfcb_core::error::{Error, Result};
use bfcb_core::feedback::{
    ifor_codebook_digest, load_ifor_codebook, save_ifor_codebook, train_ifor,
    GroupRepresentative, IforCodebook, IforOptions, SchemeSpec,
};
use bfcb_core::linkmodel::{run_sweep, LinkReport, NamedScheme, SweepParams};
use bfcb_core::metrics::{evaluate_kpis, EvalParams, KpiReport};

use crate::config::{RunConfig, SchemeRef};
use crate::report::{
    hex, write_kpi_reports, write_link_reports, OutputFormat, Provenance,
};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: OutputFormat,
}

impl CommonOpts {
    fn load_config(&self) -> Result<(RunConfig, [u8; 32])> {
        let bytes = std::fs::read(&self.config).map_err(|e| Error::io(&self.config, e))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Config("config file is not utf-8".into()))?;
        let config = RunConfig::from_toml_str(&text)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        Ok((config, hasher.finalize().into()))
    }

    fn config_dir(&self) -> PathBuf {
        self.config.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    }

    fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))
    }

    fn base_seed(&self, config: &RunConfig) -> u64 {
        self.seed.unwrap_or(config.run.seed)
    }
}

/// Runs `f` on a dedicated rayon pool when a thread count was requested.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None | Some(0) => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

fn file_digest(path: &Path) -> Result<[u8; 32]> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher.finalize().into())
}

fn eval_params(config: &RunConfig) -> Result<EvalParams> {
    Ok(EvalParams {
        n_sc: config.run.n_sc,
        n_c: config.run.n_c,
        n_g: config.run.n_g,
        representative: config.run.representative.parse::<GroupRepresentative>()?,
    })
}

pub struct DatasetSummary {
    pub path: PathBuf,
    pub points: usize,
    pub digest_hex: String,
}

/// Generates the training dataset and persists it.
pub fn cmd_dataset(opts: &CommonOpts) -> Result<DatasetSummary> {
    let (config, _) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let seed = opts.base_seed(&config);

    let profiles: Vec<_> = config
        .dataset
        .profiles
        .iter()
        .map(|name| config.resolve_profile(name, &opts.config_dir()))
        .collect::<Result<_>>()?;
    let counts = config.dataset_counts();
    let entries: Vec<(&bfcb_core::channel::ChannelProfile, usize)> =
        profiles.iter().zip(counts).collect();

    let mut dataset = with_threads(opts.threads, || {
        build_dataset_weighted(&entries, config.run.n_sc, config.run.n_c, seed)
    })?;
    if config.dataset.align_phase {
        dataset.align_global_phases();
    }

    let path = opts.out_dir.join(&config.dataset.file);
    save_dataset(&dataset, &path)?;
    let digest = file_digest(&path)?;
    Ok(DatasetSummary { path, points: dataset.len(), digest_hex: hex(&digest) })
}

pub struct TrainSummary {
    pub path: PathBuf,
    pub iterations: u32,
    pub final_objective: f64,
    pub digest_hex: String,
}

/// Trains a serialized-V codebook from a persisted dataset.
pub fn cmd_train(
    opts: &CommonOpts,
    dataset_path: &Path,
    metric: DistanceMetric,
    output: Option<&str>,
) -> Result<TrainSummary> {
    let (config, _) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let dataset = load_dataset(dataset_path)?;
    check_dataset_shape(&config, &dataset)?;

    let mut km = KmeansOptions::new(metric, opts.base_seed(&config));
    km.max_iter = config.train.max_iter;
    km.tol = config.train.tol;
    let codebook =
        with_threads(opts.threads, || kmeans(&dataset, config.train.n_k, &km))?;

    let name = output
        .map(str::to_string)
        .unwrap_or_else(|| format!("codebook-{}.bin", metric.label()));
    let path = opts.out_dir.join(name);
    save_codebook(&codebook, &path)?;
    let digest = file_digest(&path)?;
    Ok(TrainSummary {
        path,
        iterations: codebook.meta().iterations,
        final_objective: codebook.meta().final_objective,
        digest_hex: hex(&digest),
    })
}

/// Trains the angle-index codebook from the same dataset.
pub fn cmd_train_ifor(
    opts: &CommonOpts,
    dataset_path: &Path,
    output: Option<&str>,
) -> Result<TrainSummary> {
    let (config, _) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let dataset = load_dataset(dataset_path)?;
    check_dataset_shape(&config, &dataset)?;

    let mut ifor_opts = IforOptions::new(config.train.n_k, opts.base_seed(&config));
    ifor_opts.bits_phi = config.compressed.bits_phi;
    ifor_opts.bits_psi = config.compressed.bits_psi;
    ifor_opts.max_iter = config.train.max_iter;
    ifor_opts.tol = config.train.tol;
    let codebook = with_threads(opts.threads, || train_ifor(&dataset, &ifor_opts))?;

    let path = opts.out_dir.join(output.unwrap_or("codebook-ifor.bin"));
    save_ifor_codebook(&codebook, &path)?;
    let digest = file_digest(&path)?;
    Ok(TrainSummary {
        path,
        iterations: codebook.meta().iterations,
        final_objective: codebook.meta().final_objective,
        digest_hex: hex(&digest),
    })
}

fn check_dataset_shape(config: &RunConfig, dataset: &TrainingDataset) -> Result<()> {
    if dataset.n_r() != config.run.n_r || dataset.n_c() != config.run.n_c {
        return Err(Error::Config(format!(
            "dataset is {}x{} but the config expects {}x{}",
            dataset.n_r(),
            dataset.n_c(),
            config.run.n_r,
            config.run.n_c
        )));
    }
    Ok(())
}

/// Codebook inputs a command may need, loaded lazily by scheme.
#[derive(Default)]
pub struct CodebookInputs {
    pub cd: Option<PathBuf>,
    pub sed: Option<PathBuf>,
    pub ifor: Option<PathBuf>,
}

struct LoadedBooks {
    cd: Option<(Codebook, [u8; 32])>,
    sed: Option<(Codebook, [u8; 32])>,
    ifor: Option<(IforCodebook, [u8; 32])>,
}

impl LoadedBooks {
    fn load(inputs: &CodebookInputs, refs: &[SchemeRef], config: &RunConfig) -> Result<Self> {
        let mut out = Self { cd: None, sed: None, ifor: None };
        for r in refs {
            match r {
                SchemeRef::SerializedV(DistanceMetric::Cd) if out.cd.is_none() => {
                    out.cd = Some(Self::load_book(
                        inputs.cd.as_deref(),
                        DistanceMetric::Cd,
                        config,
                    )?);
                }
                SchemeRef::SerializedV(DistanceMetric::Sed) if out.sed.is_none() => {
                    out.sed = Some(Self::load_book(
                        inputs.sed.as_deref(),
                        DistanceMetric::Sed,
                        config,
                    )?);
                }
                SchemeRef::Ifor if out.ifor.is_none() => {
                    let path = inputs.ifor.as_deref().ok_or_else(|| {
                        Error::Config("scheme 'ifor' needs --ifor-codebook".into())
                    })?;
                    let book = load_ifor_codebook(path)?;
                    let digest = ifor_codebook_digest(&book);
                    out.ifor = Some((book, digest));
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn load_book(
        path: Option<&Path>,
        metric: DistanceMetric,
        config: &RunConfig,
    ) -> Result<(Codebook, [u8; 32])> {
        let flag = match metric {
            DistanceMetric::Cd => "--codebook-cd",
            DistanceMetric::Sed => "--codebook-sed",
        };
        let path = path.ok_or_else(|| {
            Error::Config(format!("scheme 'serialized-v-{}' needs {flag}", metric.label()))
        })?;
        let book = load_codebook(path)?;
        if book.metric() != metric {
            return Err(Error::Config(format!(
                "{} was trained with {}, expected {}",
                path.display(),
                book.metric().label(),
                metric.label()
            )));
        }
        if book.n_r() != config.run.n_r || book.n_c() != config.run.n_c {
            return Err(Error::Config(format!(
                "codebook {} is {}x{}, config expects {}x{}",
                path.display(),
                book.n_r(),
                book.n_c(),
                config.run.n_r,
                config.run.n_c
            )));
        }
        let digest = file_digest(path)?;
        Ok((book, digest))
    }

    fn scheme<'a>(&'a self, r: SchemeRef, config: &RunConfig) -> SchemeSpec<'a> {
        match r {
            SchemeRef::PerfectCsi => SchemeSpec::PerfectCsi,
            SchemeRef::Compressed => SchemeSpec::Compressed {
                bits_phi: config.compressed.bits_phi,
                bits_psi: config.compressed.bits_psi,
            },
            SchemeRef::SerializedV(m) => {
                let book = match m {
                    DistanceMetric::Cd => &self.cd.as_ref().expect("loaded").0,
                    DistanceMetric::Sed => &self.sed.as_ref().expect("loaded").0,
                };
                SchemeSpec::SerializedV { codebook: book, select_metric: m }
            }
            SchemeRef::Ifor => {
                SchemeSpec::Ifor { codebook: &self.ifor.as_ref().expect("loaded").0 }
            }
        }
    }

    fn provenance_into(&self, prov: &mut Provenance) {
        if let Some((_, digest)) = &self.cd {
            prov.push("codebook_cd_hash", *digest);
        }
        if let Some((_, digest)) = &self.sed {
            prov.push("codebook_sed_hash", *digest);
        }
        if let Some((_, digest)) = &self.ifor {
            prov.push("codebook_ifor_hash", *digest);
        }
    }
}

fn parse_scheme_list(names: &[String]) -> Result<Vec<SchemeRef>> {
    names.iter().map(|s| s.parse()).collect()
}

/// Evaluates the KPI grid: one row per (profile, scheme).
pub fn cmd_kpi(
    opts: &CommonOpts,
    inputs: &CodebookInputs,
) -> Result<(PathBuf, Vec<KpiReport>)> {
    let (config, config_hash) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let kpi = config
        .kpi
        .clone()
        .ok_or_else(|| Error::Config("config has no [kpi] section".into()))?;
    let refs = parse_scheme_list(&kpi.schemes)?;
    let books = LoadedBooks::load(inputs, &refs, &config)?;
    let params = eval_params(&config)?;
    let seed = opts.base_seed(&config);

    let mut rows = Vec::new();
    for profile_name in &kpi.profiles {
        let profile = config.resolve_profile(profile_name, &opts.config_dir())?;
        for r in &refs {
            let scheme = books.scheme(*r, &config);
            let report = with_threads(opts.threads, || {
                evaluate_kpis(&profile, &scheme, &params, kpi.n_realizations, seed)
            })?;
            rows.push(report);
        }
    }

    let mut prov = Provenance::new();
    prov.push("config_hash", config_hash);
    books.provenance_into(&mut prov);
    let path = opts.out_dir.join(format!("{}.{}", kpi.output, opts.format.extension()));
    write_kpi_reports(&path, &rows, &prov, opts.format)?;
    Ok((path, rows))
}

fn sweep_params(config: &RunConfig, n_realizations: usize) -> Result<SweepParams> {
    Ok(SweepParams {
        snr_grid_db: config.snr_grid()?,
        n_realizations,
        eval: eval_params(config)?,
        fixed_mcs: config.sweep.as_ref().and_then(|s| s.fixed_mcs),
        timing: config.timing(),
        calibration: config.calibration(),
    })
}

/// Runs the link sweep over the configured schemes.
pub fn cmd_sweep(
    opts: &CommonOpts,
    inputs: &CodebookInputs,
) -> Result<(PathBuf, Vec<LinkReport>)> {
    let (config, config_hash) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    let refs = parse_scheme_list(&sweep.schemes)?;
    let books = LoadedBooks::load(inputs, &refs, &config)?;
    let profile = config.resolve_profile(&sweep.profile, &opts.config_dir())?;
    let params = sweep_params(&config, sweep.n_realizations)?;
    let seed = opts.base_seed(&config);

    let schemes: Vec<NamedScheme<'_>> =
        refs.iter().map(|r| NamedScheme::new(books.scheme(*r, &config))).collect();
    let grid = with_threads(opts.threads, || run_sweep(&profile, &schemes, &params, seed))?;
    let rows = grid.reports(params.fixed_mcs, &params.timing)?;

    let mut prov = Provenance::new();
    prov.push("config_hash", config_hash);
    books.provenance_into(&mut prov);
    let path = opts.out_dir.join(format!("{}.{}", sweep.output, opts.format.extension()));
    write_link_reports(&path, &rows, &prov, opts.format)?;
    Ok((path, rows))
}

/// The 2x2 train-metric x select-metric experiment at the sweep geometry.
pub fn cmd_cross_metric(
    opts: &CommonOpts,
    inputs: &CodebookInputs,
) -> Result<(PathBuf, Vec<LinkReport>)> {
    let (config, config_hash) = opts.load_config()?;
    opts.ensure_out_dir()?;
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    let both = [
        SchemeRef::SerializedV(DistanceMetric::Cd),
        SchemeRef::SerializedV(DistanceMetric::Sed),
    ];
    let books = LoadedBooks::load(inputs, &both, &config)?;
    let profile = config.resolve_profile(&sweep.profile, &opts.config_dir())?;
    let params = sweep_params(&config, sweep.n_realizations)?;
    let seed = opts.base_seed(&config);

    let cd_book = &books.cd.as_ref().expect("loaded").0;
    let sed_book = &books.sed.as_ref().expect("loaded").0;
    let mut schemes = Vec::new();
    for (train_label, book) in [("cd", cd_book), ("sed", sed_book)] {
        for select in [DistanceMetric::Cd, DistanceMetric::Sed] {
            schemes.push(NamedScheme::named(
                format!("serialized-v-train-{train_label}"),
                SchemeSpec::SerializedV { codebook: book, select_metric: select },
            ));
        }
    }

    let grid = with_threads(opts.threads, || run_sweep(&profile, &schemes, &params, seed))?;
    let rows = grid.reports(params.fixed_mcs, &params.timing)?;

    let mut prov = Provenance::new();
    prov.push("config_hash", config_hash);
    books.provenance_into(&mut prov);
    let path = opts.out_dir.join(format!("cross-metric.{}", opts.format.extension()));
    write_link_reports(&path, &rows, &prov, opts.format)?;
    Ok((path, rows))
}
