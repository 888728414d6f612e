use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use leadopt::campaign::{eval_batch, CampaignRunner};
use leadopt::data::{load_dataset_with, prepare_pools_with, PoolConfig, DEFAULT_MIN_ACTIVITY};
use leadopt::features::build_fragment_vocabulary_with;
use leadopt::generation::parse_generation_response;
use leadopt::molgraph::{parse_smiles, MolGraph};
use leadopt::qsar::cross_validate;

use crate::app::{default_data_dir, DriveOptions, ModifyRequest, Service, StartRequest};
use crate::config::ServiceConfig;
use crate::store::CampaignHandle;

#[derive(Debug, Parser)]
#[command(name = "leadopt", version, about = "Many-shot in-context lead optimization")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the campaign seed and mock backend seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a CSV of SMILES and activities, cluster it and register it.
    Prep(PrepArgs),
    /// Train the three activity models and cross-validate them.
    Train(TrainArgs),
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Validity, uniqueness, novelty, diversity and Fréchet distance of a SMILES file.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Apply one instruction to one molecule.
    Modify(ModifyArgs),
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value_t = leadopt::data::DEFAULT_BUTINA_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_ACTIVITY)]
    pub min_activity: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Skip cross-validation.
    #[arg(long)]
    pub no_cv: bool,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    Run(RunArgs),
    Resume(ResumeArgs),
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, hide = true)]
    pub throttle_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    #[arg(long)]
    pub id: String,
    #[arg(long, hide = true)]
    pub throttle_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub id: String,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One SMILES per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Dataset supplying the training set and, through pool50, the lead set.
    #[arg(long)]
    pub dataset: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Args)]
pub struct ModifyArgs {
    #[arg(long)]
    pub molecule: String,
    #[arg(long)]
    pub instruction: String,
    #[arg(long, default_value = "cli")]
    pub session: String,
}

fn load_config(cli: &Cli) -> anyhow::Result<ServiceConfig> {
    let config = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn print_handle(h: &CampaignHandle) {
    println!("campaign {} {:?} stop_reason={}", h.id, h.status, h.stop_reason.as_deref().unwrap_or("-"));
    if let Some(e) = &h.error {
        println!("error: {e}");
    }
}

fn parse_all(smiles: &[&str]) -> anyhow::Result<Vec<MolGraph>> {
    smiles.iter().map(|s| parse_smiles(s).with_context(|| format!("parsing {s}"))).collect()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let data_dir = cli.data_dir.clone().unwrap_or_else(|| default_data_dir().to_path_buf());
    let service = Arc::new(Service::open(&data_dir, config.clone())?);
    match cli.command {
        Command::Prep(a) => {
            let (ds, errors) = load_dataset_with(&a.input, &a.name, a.min_activity)?;
            for e in &errors {
                eprintln!("line {}: {}", e.line, e.reason);
            }
            let ds = prepare_pools_with(&ds, &PoolConfig { threshold: a.threshold, ..Default::default() })?;
            service.store().save_dataset(&ds, &errors)?;
            let p = ds.pools.as_ref().expect("pools were just prepared");
            println!(
                "dataset {}: {} records, {} rejected rows, {} clusters, best20 {}, pool50 {}, allminus20 {}",
                a.name,
                ds.len(),
                errors.len(),
                p.clustering.clusters.len(),
                p.best20.len(),
                p.pool50.len(),
                p.allminus20.len()
            );
        }
        Command::Train(a) => {
            let ds = service.store().dataset(&a.dataset)?;
            let cfg = &config.campaign;
            let ens = CampaignRunner::train(&ds, cfg)?;
            let dir = data_dir.join("models").join(&a.dataset);
            ens.save(&dir)?;
            println!("models written to {}", dir.display());
            if !a.no_cv {
                let mols = parse_all(&ds.smiles())?;
                let cv = cross_validate(&mols, &ds.activities(), &cfg.embedding, &cfg.gbt, a.folds, cfg.seed)?;
                let tsv = cv.to_tsv();
                fs::write(dir.join("cv.tsv"), &tsv)?;
                for r in &cv.reports {
                    println!("{}\tmean r2 {:.4}\tmean rmse {:.4}", r.view.name(), r.mean_r2, r.mean_rmse);
                }
            }
        }
        Command::Campaign(CampaignCommand::Run(a)) => {
            let mut cfg = config.campaign.clone();
            if let Some(n) = a.iterations {
                cfg.max_iterations = n;
            }
            let req = StartRequest { id: a.id, dataset: a.dataset, config: Some(cfg) };
            let opts = DriveOptions { throttle: a.throttle_ms.map(Duration::from_millis) };
            let h = service.run_campaign_blocking(&req, opts)?;
            print_handle(&h);
            print!("{}", service.campaign_report(&h.id)?.tsv);
        }
        Command::Campaign(CampaignCommand::Resume(a)) => {
            let opts = DriveOptions { throttle: a.throttle_ms.map(Duration::from_millis) };
            let h = service.resume_campaign_blocking(&a.id, opts)?;
            print_handle(&h);
            print!("{}", service.campaign_report(&h.id)?.tsv);
        }
        Command::Campaign(CampaignCommand::Report(a)) => {
            let r = service.campaign_report(&a.id)?;
            match a.format {
                ReportFormat::Tsv => print!("{}", r.tsv),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&r)?),
            }
        }
        Command::Eval(a) => {
            let ds = service.store().dataset(&a.dataset)?;
            let text = fs::read_to_string(&a.input).with_context(|| a.input.display().to_string())?;
            let lines: Vec<&str> =
                text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
            if lines.is_empty() {
                bail!("{} holds no SMILES", a.input.display());
            }
            let batch = parse_generation_response(&serde_json::to_string(&lines)?, "eval")?;
            let train = parse_all(&ds.smiles())?;
            let leads: Vec<MolGraph> = match &ds.pools {
                Some(p) => p.pool50.iter().map(|&i| train[i].clone()).collect(),
                None => train.clone(),
            };
            let vocab = build_fragment_vocabulary_with(&train, &config.campaign.embedding)?;
            let m = eval_batch(&batch, &train, &leads, &vocab)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(service, &a.addr))?;
        }
        Command::Modify(a) => {
            let req = ModifyRequest { molecule: a.molecule, instruction: a.instruction };
            let r = service.modify(&a.session, &req)?;
            println!("{}", serde_json::to_string_pretty(&r.result)?);
        }
    }
    Ok(())
}
