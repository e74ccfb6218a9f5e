//! The `hbias` command line.
//!
//! Every subcommand writes its tables into `--out` together with a
//! `run.json` manifest (arguments, seed, inputs, outputs, tool version).
//! Exit codes: 0 success, 1 data error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::collapse::{self, ClassifierHead};
use crate::hierarchy::{parse_hierarchy, Hierarchy};
use crate::io::{self, Table, TableFormat};
use crate::labelspace::{self, LabelMapping, LabelSpace};
use crate::manifold::{self, CoverConfig, Integration};
use crate::metrics::{self, PredictionLog};
use crate::synth::{self, TrajectoryParams};

#[derive(Debug, Parser)]
#[command(name = "hbias", version, about = "Hypernym-bias measurement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or randomise superclass label spaces.
    #[command(subcommand)]
    Labelspace(LabelspaceCmd),
    /// Accuracy curves, convergence epochs and confusion matrices.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Mutual-cover similarity and cophenetic correlation.
    #[command(subcommand)]
    Manifold(ManifoldCmd),
    /// Neural-collapse statistics.
    #[command(subcommand)]
    Nc(NcCmd),
    /// Synthetic features, predictions and simplex ETFs.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Closed-form and Monte-Carlo accuracy oracles.
    #[command(subcommand)]
    Oracle(OracleCmd),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TaxonomyArgs {
    /// Edge file, `parent<TAB>child` per line.
    #[arg(long)]
    hierarchy: PathBuf,
    /// Class file, `index<TAB>node` per line.
    #[arg(long)]
    classes: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Json => TableFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum LabelspaceCmd {
    /// Group classes by their nearest listed taxonomy ancestor.
    Build {
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        /// Grouping file, `name<TAB>node[,node...]` per line.
        #[arg(long)]
        groups: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Random partition with the same superclass sizes.
    Random {
        #[arg(long)]
        labelspace: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct SpacesArgs {
    /// Prediction log CSV.
    #[arg(long)]
    log: PathBuf,
    /// Label space dump, `class<TAB>superclass` per line.
    #[arg(long)]
    labelspace: PathBuf,
    /// Also evaluate a seeded random size-isomorphic label space.
    #[arg(long, requires = "seed")]
    random_iso: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum MetricsCmd {
    /// A, A_R, G_R and E_R series per label space.
    Curves {
        #[command(flatten)]
        spaces: SpacesArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        out: OutArgs,
    },
    /// First epoch reaching a fraction of the peak accuracy.
    Converge {
        #[command(flatten)]
        spaces: SpacesArgs,
        #[arg(long, default_value_t = 0.95)]
        fraction: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Confusion matrix of one epoch, rows in depth-first taxonomy order.
    Confusion {
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        #[arg(long)]
        epoch: u32,
        /// Project onto this label space first.
        #[arg(long)]
        labelspace: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct CoverArgs {
    /// Examples per class on each side of the query/support split.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Integration radius; defaults to the largest minimum distance.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    /// Integrate the step function exactly instead of the trapezoid rule.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    seed: u64,
}

impl CoverArgs {
    fn config(&self) -> CoverConfig {
        CoverConfig {
            k: self.k,
            r_max: self.r_max,
            grid_points: self.grid_points,
            integration: if self.exact {
                Integration::Exact
            } else {
                Integration::Trapezoid
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Cover,
    Means,
    Direct,
}

#[derive(Debug, Subcommand)]
enum ManifoldCmd {
    /// Self/mutual cover similarity and the derived distance matrix.
    Cover {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        cover: CoverArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Correlation between feature-space and taxonomy distances.
    Ccc {
        /// One or more feature files (e.g. one per epoch).
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        #[arg(long, value_enum, default_value = "cover")]
        method: Method,
        /// Sampled example pairs for `--method direct`.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        cover: CoverArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum NcCmd {
    /// NC1–NC4 in the class space and, optionally, a lifted superclass space.
    Compute {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        labelspace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum SynthCmd {
    /// Feature trajectory with superclass and class separation schedules.
    Features {
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        #[arg(long)]
        labelspace: PathBuf,
        /// `key=value` trajectory config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Prediction log with scheduled accuracy and error locality.
    Predictions {
        #[arg(long)]
        labelspace: PathBuf,
        /// Per-epoch accuracy, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        accuracy: Vec<f64>,
        /// Per-epoch probability that an error stays in the superclass.
        #[arg(long, value_delimiter = ',', required = true)]
        within: Vec<f64>,
        #[arg(long)]
        examples: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simplex ETF means with the matching nearest-centroid head.
    Etf {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Copies of each mean written as examples.
        #[arg(long, default_value_t = 1)]
        per_class: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCmd {
    /// Random-superclass accuracy from hyponym accuracy.
    SuperclassAcc {
        /// Hyponym accuracy in [0,1].
        #[arg(long)]
        p: f64,
        /// Superclass sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: String,
    args: &'a [String],
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

/// Collects written files for the manifest.
struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Run {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    fn table(&mut self, name: &str, table: Table<'_>, format: TableFormat) -> anyhow::Result<()> {
        let ext = match format {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        };
        let p = self.path(&format!("{name}.{ext}"));
        io::write_table(&table, &p, format).with_context(|| format!("writing {}", p.display()))
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_hierarchy(t: &TaxonomyArgs) -> anyhow::Result<Hierarchy> {
    let edges = read_text(&t.hierarchy)?;
    let classes = read_text(&t.classes)?;
    parse_hierarchy(&edges, &classes).with_context(|| {
        format!(
            "parsing hierarchy {} / {}",
            t.hierarchy.display(),
            t.classes.display()
        )
    })
}

fn load_mapping(path: &Path) -> anyhow::Result<LabelMapping> {
    labelspace::parse_mapping(&read_text(path)?)
        .with_context(|| format!("parsing label space {}", path.display()))
}

fn load_labelspace(path: &Path, name: &str) -> anyhow::Result<LabelSpace> {
    LabelSpace::from_mapping(name, &load_mapping(path)?)
        .with_context(|| format!("label space {}", path.display()))
}

fn load_log(path: &Path, label_count: usize) -> anyhow::Result<PredictionLog> {
    io::read_predictions(path, Some(label_count))
        .with_context(|| format!("reading predictions {}", path.display()))
}

/// The hyponym, hypernym and optional random label spaces with their logs.
fn spaces(args: &SpacesArgs) -> anyhow::Result<Vec<(String, LabelSpace, PredictionLog)>> {
    let s = load_labelspace(&args.labelspace, "hypernym")?;
    let log = load_log(&args.log, s.class_count())?;
    let h = LabelSpace::hyponym(s.class_count());
    let mut out = vec![
        ("hyponym".to_string(), h, log.clone()),
        ("hypernym".to_string(), s.clone(), labelspace::project_log(&log, &s.mapping())?),
    ];
    if args.random_iso {
        let seed = args.seed.context("--random-iso needs --seed")?;
        let (r, m) = labelspace::random_isomorphic(&s, seed);
        out.push(("random".to_string(), r, labelspace::project_log(&log, &m)?));
    }
    Ok(out)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli.command, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cmd: Command, args: &[String]) -> anyhow::Result<()> {
    let command = args
        .iter()
        .take_while(|a| !a.starts_with('-'))
        .cloned()
        .collect::<Vec<_>>()
        .join(" ");
    let (out_dir, seed, inputs, run) = match cmd {
        Command::Labelspace(c) => labelspace_cmd(c)?,
        Command::Metrics(c) => metrics_cmd(c)?,
        Command::Manifold(c) => manifold_cmd(c)?,
        Command::Nc(c) => nc_cmd(c)?,
        Command::Synth(c) => synth_cmd(c)?,
        Command::Oracle(c) => oracle_cmd(c)?,
    };
    let mut run = run;
    let manifest = Manifest {
        tool: "hbias",
        version: env!("CARGO_PKG_VERSION"),
        command,
        args,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: std::mem::take(&mut run.outputs),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = out_dir.join("run.json");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

type Outcome = (PathBuf, Option<u64>, Vec<PathBuf>, Run);

fn labelspace_cmd(cmd: LabelspaceCmd) -> anyhow::Result<Outcome> {
    match cmd {
        LabelspaceCmd::Build {
            taxonomy,
            groups,
            out,
        } => {
            let h = load_hierarchy(&taxonomy)?;
            let g = labelspace::parse_grouping(&read_text(&groups)?)
                .with_context(|| format!("parsing groups {}", groups.display()))?;
            let (s, m) = labelspace::build_labelspace(&h, "hypernym", &g)?;
            let mut run = Run::new(&out.out)?;
            run.text("labelspace.tsv", &labelspace::format_mapping(&m))?;
            let mut names = String::from("superclass,name,size\n");
            for (i, sc) in s.superclasses().iter().enumerate() {
                names.push_str(&format!("{i},{},{}\n", sc.name, sc.members.len()));
            }
            run.text("superclasses.csv", &names)?;
            Ok((out.out, None, vec![taxonomy.hierarchy, taxonomy.classes, groups], run))
        }
        LabelspaceCmd::Random {
            labelspace,
            seed,
            out,
        } => {
            let s = load_labelspace(&labelspace, "hypernym")?;
            let (_, m) = labelspace::random_isomorphic(&s, seed);
            let mut run = Run::new(&out.out)?;
            run.text("labelspace.tsv", &labelspace::format_mapping(&m))?;
            Ok((out.out, Some(seed), vec![labelspace], run))
        }
    }
}

fn metrics_cmd(cmd: MetricsCmd) -> anyhow::Result<Outcome> {
    match cmd {
        MetricsCmd::Curves {
            spaces: sa,
            format,
            out,
        } => {
            let format = TableFormat::from(format);
            let mut run = Run::new(&out.out)?;
            let mut baselines = String::from("space,baseline\n");
            let spaces = spaces(&sa)?;
            // class priors come from the unprojected log
            let priors = spaces[0].2.empirical_priors()?;
            for (name, space, log) in spaces {
                let acc = metrics::accuracy_series(&log)?;
                let b = metrics::baseline(&space, &priors)?;
                baselines.push_str(&format!("{name},{}\n", io::fmt_sig9(b)));
                run.table(&format!("{name}_accuracy"), Table::Series(&acc), format)?;
                let rel = metrics::relative_accuracy(&acc)?;
                run.table(&format!("{name}_relative_accuracy"), Table::Series(&rel), format)?;
                // Gain and residual error are undefined for some curves
                // (peak at chance, final accuracy 100); skip those tables.
                if let Ok(gain) = metrics::relative_gain(&acc, b) {
                    run.table(&format!("{name}_relative_gain"), Table::Series(&gain), format)?;
                }
                if let Ok(err) = metrics::residual_error(&acc) {
                    run.table(&format!("{name}_residual_error"), Table::Series(&err), format)?;
                }
            }
            run.text("baselines.csv", &baselines)?;
            Ok((out.out, sa.seed.filter(|_| sa.random_iso), vec![sa.log, sa.labelspace], run))
        }
        MetricsCmd::Converge {
            spaces: sa,
            fraction,
            out,
        } => {
            let mut table = String::from("space,epoch\n");
            for (name, _, log) in spaces(&sa)? {
                let acc = metrics::accuracy_series(&log)?;
                let e = metrics::convergence_epoch(&metrics::relative_accuracy(&acc)?, fraction)?;
                table.push_str(&format!("{name},{e}\n"));
            }
            let mut run = Run::new(&out.out)?;
            run.text("convergence.csv", &table)?;
            Ok((out.out, sa.seed.filter(|_| sa.random_iso), vec![sa.log, sa.labelspace], run))
        }
        MetricsCmd::Confusion {
            log,
            taxonomy,
            epoch,
            labelspace: ls,
            out,
        } => {
            let h = load_hierarchy(&taxonomy)?;
            let order = h.dfs_leaf_order()?;
            let mut inputs = vec![log.clone(), taxonomy.hierarchy, taxonomy.classes];
            let mut plog = load_log(&log, h.class_count())?;
            let mut order = order;
            if let Some(path) = ls {
                let m = load_mapping(&path)?;
                plog = labelspace::project_log(&plog, &m)?;
                // superclasses ordered by their first member in taxonomy order
                let mut seen = vec![false; m.superclass_count()];
                order = order
                    .iter()
                    .map(|&c| m.table()[c])
                    .filter(|&s| !std::mem::replace(&mut seen[s], true))
                    .collect();
                inputs.push(path);
            }
            let slice = plog
                .epoch_slice(epoch)
                .with_context(|| format!("epoch {epoch} not in log"))?;
            let cm = metrics::confusion_matrix(slice, plog.label_count(), &order)?;
            let mut run = Run::new(&out.out)?;
            run.table(&format!("confusion_epoch{epoch}"), Table::Confusion(&cm), TableFormat::Csv)?;
            Ok((out.out, None, inputs, run))
        }
    }
}

fn load_features(path: &Path) -> anyhow::Result<manifold::FeatureSet> {
    io::read_features(path).with_context(|| format!("reading features {}", path.display()))
}

fn manifold_cmd(cmd: ManifoldCmd) -> anyhow::Result<Outcome> {
    match cmd {
        ManifoldCmd::Cover {
            features,
            cover,
            out,
        } => {
            let f = load_features(&features)?;
            let cfg = cover.config();
            let (q, s) = manifold::split_query_support(&f, &cfg)?;
            let a = manifold::cover_similarity(&q, &s, &cfg)?;
            let d = manifold::to_distance_matrix(&a);
            let (self_cover, mutual) = manifold::cover_stats(&a);
            let mut run = Run::new(&out.out)?;
            run.table("similarity", Table::Similarity(&a), TableFormat::Csv)?;
            run.table("distance", Table::Distance(&d), TableFormat::Csv)?;
            io::write_distance_matrix(&d, &run.path("distance.bin"))?;
            run.text(
                "cover_stats.csv",
                &format!(
                    "self_cover,mutual_cover,r_max\n{},{},{}\n",
                    io::fmt_sig9(self_cover),
                    io::fmt_sig9(mutual),
                    io::fmt_sig9(a.r_max)
                ),
            )?;
            Ok((out.out, Some(cover.seed), vec![features], run))
        }
        ManifoldCmd::Ccc {
            features,
            taxonomy,
            method,
            samples,
            cover,
            out,
        } => {
            let h = load_hierarchy(&taxonomy)?;
            let cfg = cover.config();
            let mut run = Run::new(&out.out)?;
            let mut table = String::from("input,method,ccc\n");
            for (i, path) in features.iter().enumerate() {
                let f = load_features(path)?;
                let labels = f.present_classes();
                let d_w = h.graph_distance_matrix(&labels)?;
                let value = match method {
                    Method::Means => manifold::ccc(&manifold::class_mean_distances(&f), &d_w)?,
                    Method::Cover => {
                        let (q, s) = manifold::split_query_support(&f, &cfg)?;
                        let a = manifold::cover_similarity(&q, &s, &cfg)?;
                        manifold::ccc(&manifold::to_distance_matrix(&a), &d_w)?
                    }
                    Method::Direct => {
                        let (q, s) = manifold::split_query_support(&f, &cfg)?;
                        manifold::direct_correlation(&q, &s, &d_w, samples, cfg.seed)?
                    }
                };
                if i == 0 {
                    run.table("graph_distance", Table::Distance(&d_w), TableFormat::Csv)?;
                }
                table.push_str(&format!(
                    "{},{},{}\n",
                    path.display(),
                    serde_json::to_value(method)?.as_str().unwrap_or_default(),
                    io::fmt_sig9(value)
                ));
            }
            run.text("ccc.csv", &table)?;
            let mut inputs = features;
            inputs.extend([taxonomy.hierarchy, taxonomy.classes]);
            Ok((out.out, Some(cover.seed), inputs, run))
        }
    }
}

fn nc_cmd(cmd: NcCmd) -> anyhow::Result<Outcome> {
    let NcCmd::Compute {
        features,
        head,
        labelspace: ls,
        format,
        out,
    } = cmd;
    let format = TableFormat::from(format);
    let f = load_features(&features)?;
    let w = io::read_head(&head).with_context(|| format!("reading head {}", head.display()))?;
    let stats = collapse::class_statistics(&f)?;
    let mut run = Run::new(&out.out)?;
    let report = collapse::nc_report(&f, &stats, &w, "hyponym")?;
    run.table("nc_hyponym", Table::Report(&report), format)?;
    let mut inputs = vec![features, head];
    if let Some(path) = ls {
        let s = load_labelspace(&path, "hypernym")?;
        let (ls_stats, ls_head) = collapse::lift_to_superclass(&stats, &w, &s)?;
        let report = collapse::nc_report(&f, &ls_stats, &ls_head, "hypernym")?;
        run.table("nc_hypernym", Table::Report(&report), format)?;
        inputs.push(path);
    }
    Ok((out.out, None, inputs, run))
}

fn synth_cmd(cmd: SynthCmd) -> anyhow::Result<Outcome> {
    match cmd {
        SynthCmd::Features {
            taxonomy,
            labelspace: ls,
            config,
            seed,
            out,
        } => {
            let h = load_hierarchy(&taxonomy)?;
            let s = load_labelspace(&ls, "hypernym")?;
            let mut params = match &config {
                Some(p) => TrajectoryParams::parse(&read_text(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => TrajectoryParams::with_default_schedules(40, 64, 20, seed),
            };
            params.seed = seed;
            let traj = synth::gen_hierarchical_trajectory(&h, &s, &params)?;
            let mut run = Run::new(&out.out)?;
            for f in &traj {
                let e = f.epoch.unwrap_or(0);
                io::write_features(f, &run.path(&format!("features_e{e:03}.bin")))?;
                let stats = collapse::class_statistics(f)?;
                let head = ClassifierHead::nearest_centroid(&stats.class_means);
                io::write_head(&head, &run.path(&format!("head_e{e:03}.bin")))?;
            }
            let log = synth::ncc_prediction_log(&traj)?;
            io::write_predictions(&log, &run.path("predictions.csv"))?;
            let mut inputs = vec![taxonomy.hierarchy, taxonomy.classes, ls];
            inputs.extend(config);
            Ok((out.out, Some(seed), inputs, run))
        }
        SynthCmd::Predictions {
            labelspace: ls,
            accuracy,
            within,
            examples,
            seed,
            out,
        } => {
            let s = load_labelspace(&ls, "hypernym")?;
            let t = synth::gen_prediction_trajectory(&s, &accuracy, &within, examples, seed)?;
            let mut run = Run::new(&out.out)?;
            io::write_predictions(&t.log, &run.path("predictions.csv"))?;
            if !t.fallback_epochs.is_empty() {
                let list: Vec<String> = t.fallback_epochs.iter().map(u32::to_string).collect();
                eprintln!(
                    "warning: singleton superclass forced uniform errors at epochs {}",
                    list.join(",")
                );
            }
            Ok((out.out, Some(seed), vec![ls], run))
        }
        SynthCmd::Etf {
            classes,
            dim,
            scale,
            per_class,
            out,
        } => {
            if per_class == 0 {
                bail!("--per-class must be positive");
            }
            let means = synth::gen_etf(classes, dim, scale)?;
            let mut data = Vec::with_capacity(classes * per_class * dim);
            let mut labels = Vec::with_capacity(classes * per_class);
            for c in 0..classes {
                for _ in 0..per_class {
                    data.extend(means.row(c).iter());
                    labels.push(c);
                }
            }
            let f = manifold::FeatureSet::new(dim, classes, data, labels)?;
            let mut run = Run::new(&out.out)?;
            io::write_features(&f, &run.path("features.bin"))?;
            io::write_head(&ClassifierHead::nearest_centroid(&means), &run.path("head.bin"))?;
            Ok((out.out, None, vec![], run))
        }
    }
}

fn oracle_cmd(cmd: OracleCmd) -> anyhow::Result<Outcome> {
    let OracleCmd::SuperclassAcc {
        p,
        sizes,
        trials,
        seed,
        out,
    } = cmd;
    let total: usize = sizes.iter().sum();
    if total == 0 {
        bail!("--sizes must contain a positive size");
    }
    let priors = metrics::uniform_priors(total);
    let mut next = 0;
    let superclasses = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let members = (next..next + n).collect();
            next += n;
            labelspace::Superclass {
                name: i.to_string(),
                members,
            }
        })
        .collect();
    let s = LabelSpace::new("sizes", total, superclasses)?;
    let analytic = metrics::theoretical_superclass_accuracy(p, &s, &priors)?;
    let (est, se) = synth::mc_superclass_accuracy(p, &sizes, trials, seed)?;
    println!("analytic    {analytic:.6}");
    println!("monte_carlo {est:.6} ± {se:.6} ({trials} trials)");
    let mut run = Run::new(&out.out)?;
    run.text(
        "oracle.csv",
        &format!(
            "p_h,analytic,monte_carlo,standard_error,trials\n{},{},{},{},{trials}\n",
            io::fmt_sig9(p),
            io::fmt_sig9(analytic),
            io::fmt_sig9(est),
            io::fmt_sig9(se)
        ),
    )?;
    Ok((out.out, Some(seed), vec![], run))
}
