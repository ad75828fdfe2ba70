use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use luxappraise::annotation::{build_anchor_tasks, build_grid_tasks, export_annotations, write_export, LabelRecord, Task};
use luxappraise::classifiers::{evaluate_accuracy, SoftmaxConfig, SoftmaxModel};
use luxappraise::embedding::{
    default_alpha, embed_photos, kmeans, luxury_proxy, select_anchors, triplet_photo_ids, AnchorRecord, AnchorSet,
    Embedding, EmbeddingRecord, TsteConfig,
};
use luxappraise::evaluation::{
    emit_report, predict_prices, room_classes, train_view, run_ablation, train_luxury_models, train_room_classifier,
    train_valuation, LabelSource, LuxuryModelRecord, LuxuryModels, PhotoModels, PipelineConfig, SvrSettings,
    TuneSettings,
};
use luxappraise::io::{load_dataset_dir, read_records, save_dataset_dir, write_records};
use luxappraise::model::{Dataset, LuxuryLevel, PhotoRecord, RoomCategory, Split, Triplet};
use luxappraise::synth::{generate_world, WorldConfig};
use luxappraise::valuation::{Mode, ParamGrid};

mod serve;

#[derive(Parser)]
#[command(name = "luxappraise", version, about = "Luxury-aware house valuation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world (photos.jsonl and houses.jsonl).
    Synth(SynthArgs),
    /// Generate grid or anchor task files.
    #[command(subcommand)]
    Tasks(TasksCommand),
    /// Fit a t-STE embedding to triplets.
    Embed(EmbedArgs),
    /// Cluster an embedding and pick the 8 level anchors of a room.
    Anchors(AnchorsArgs),
    /// Train the room classifier.
    TrainRoom(TrainRoomArgs),
    /// Train luxury-level classifiers from aggregated labels.
    TrainLuxury(TrainLuxuryArgs),
    /// Train a price regressor for one representation mode.
    TrainValuation(TrainValuationArgs),
    /// Run the ablation matrix and write a report.
    Evaluate(EvaluateArgs),
    /// Serve tasks over HTTP and log responses.
    Serve(serve::ServeArgs),
    /// Turn a response log into triplet, label and worker files.
    Export(ExportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// World configuration (JSON); defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    houses: Option<usize>,
    #[arg(long)]
    luxury_price_weight: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum TasksCommand {
    Grid(GridTaskArgs),
    Anchor(AnchorTaskArgs),
}

#[derive(Args)]
struct RoomSelection {
    /// A room category, or "all".
    #[arg(long, default_value = "all")]
    room: String,
}

impl RoomSelection {
    fn rooms(&self) -> Result<Vec<RoomCategory>> {
        if self.room == "all" {
            Ok(RoomCategory::ALL.to_vec())
        } else {
            Ok(vec![self.room.parse()?])
        }
    }
}

#[derive(Args)]
struct GridTaskArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    room: RoomSelection,
    /// Regular tasks per room.
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Catch trials per room as a fraction of `count`.
    #[arg(long, default_value_t = 0.1)]
    catch_fraction: f64,
    /// Latent distance within which catch-grid photos count as similar.
    #[arg(long, default_value_t = 1.0)]
    catch_threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnchorTaskArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    anchors: PathBuf,
    #[command(flatten)]
    room: RoomSelection,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    catch_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    triplets: PathBuf,
    /// Keep only triplets whose three photos have this `room_true` (needs --data).
    #[arg(long, requires = "data")]
    room: Option<RoomCategory>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Student-t degrees of freedom; defaults to max(dim - 1, 1).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnchorsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long)]
    room: RoomCategory,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Anchor file; records of other rooms already in it are kept.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainRoomArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5000)]
    max_photos: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLuxuryArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label file as written by `export`.
    #[arg(long)]
    labels: PathBuf,
    /// Also train one model per room category.
    #[arg(long)]
    per_room: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainValuationArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Needed by the full and no_room_classifier modes.
    #[arg(long)]
    room_model: Option<PathBuf>,
    #[arg(long)]
    luxury_model: Option<PathBuf>,
    #[arg(long = "C", default_value_t = SvrSettings::default().c)]
    c: f64,
    #[arg(long, default_value_t = SvrSettings::default().epsilon)]
    epsilon: f64,
    /// RBF width; defaults to the configured value divided by the input dimension.
    #[arg(long)]
    gamma: Option<f64>,
    /// Choose C, epsilon and gamma by cross-validation over the default grid.
    #[arg(long)]
    tune: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "full,metadata_only,no_room_classifier,direct_regression")]
    modes: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    /// Pipeline configuration (JSON); defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Label file from `export`; without it labels come from simulated annotators.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Table path; records go next to it with a .jsonl extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// LUXAPPRAISE_LOG takes precedence when set.
    #[arg(long, env = "LUXAPPRAISE_LOG")]
    log: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Tasks(TasksCommand::Grid(a)) => tasks_grid(a),
        Command::Tasks(TasksCommand::Anchor(a)) => tasks_anchor(a),
        Command::Embed(a) => embed(a),
        Command::Anchors(a) => anchors(a),
        Command::TrainRoom(a) => train_room(a),
        Command::TrainLuxury(a) => train_luxury(a),
        Command::TrainValuation(a) => train_valuation_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve::run(a),
        Command::Export(a) => export(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_data(dir: &Path) -> Result<Dataset> {
    load_dataset_dir(dir).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn load_anchor_sets(path: &Path) -> Result<BTreeMap<RoomCategory, AnchorSet>> {
    let records: Vec<AnchorRecord> = read_records(path)?;
    Ok(AnchorSet::from_records(&records)?)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut config: WorldConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => WorldConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.houses {
        config.n_houses = n;
    }
    if let Some(w) = a.luxury_price_weight {
        config.luxury_price_weight = w;
    }
    let world = generate_world(&config)?;
    save_dataset_dir(&world, &a.out)?;
    println!(
        "wrote {} photos and {} houses to {}",
        world.num_photos(),
        world.num_houses(),
        a.out.display()
    );
    Ok(())
}

fn tasks_grid(a: GridTaskArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let tasks = build_grid_tasks(
        &data,
        &a.room.rooms()?,
        a.count,
        a.catch_fraction,
        a.catch_threshold,
        a.seed,
    )?;
    write_records(&a.out, tasks.iter())?;
    println!("wrote {} grid tasks to {}", tasks.len(), a.out.display());
    Ok(())
}

fn tasks_anchor(a: AnchorTaskArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let sets = load_anchor_sets(&a.anchors)?;
    let tasks = build_anchor_tasks(&data, &sets, &a.room.rooms()?, a.count, a.catch_fraction, a.seed)?;
    write_records(&a.out, tasks.iter())?;
    println!("wrote {} anchor tasks to {}", tasks.len(), a.out.display());
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let mut triplets: Vec<Triplet> = read_records(&a.triplets)?;
    if let (Some(room), Some(dir)) = (a.room, &a.data) {
        let data = load_data(dir)?;
        let in_room = |id: &str| data.photo(id).is_some_and(|p| p.room_true == Some(room));
        triplets.retain(|t| in_room(&t.probe) && in_room(&t.similar) && in_room(&t.dissimilar));
    }
    if triplets.is_empty() {
        bail!("no triplets to embed");
    }
    let alpha = a.alpha.unwrap_or_else(|| default_alpha(a.dim));
    let config = TsteConfig {
        max_iters: a.iters,
        seed: a.seed,
        ..TsteConfig::default()
    };
    let emb = embed_photos(triplet_photo_ids(&triplets), &triplets, a.dim, alpha, &config)?;
    write_records(&a.out, emb.to_records().iter())?;
    println!(
        "embedded {} photos from {} triplets, final loss {:.6}",
        emb.photo_ids.len(),
        triplets.len(),
        emb.final_loss
    );
    Ok(())
}

fn anchors(a: AnchorsArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let emb = Embedding::from_records(read_records::<EmbeddingRecord>(&a.embedding)?)?;
    let km = kmeans(&emb.points, 8, a.seed, 300)?;
    let proxy_of = luxury_proxy(&data);
    let proxy = |id: &str| data.photo(id).and_then(&proxy_of);
    let set = select_anchors(&emb, &km.assignments, &km.centroids, proxy, a.room)?;
    let mut records: Vec<AnchorRecord> = if a.out.exists() {
        read_records(&a.out)?
    } else {
        Vec::new()
    };
    records.retain(|r| r.room != a.room);
    records.extend(set.to_records());
    records.sort_by(|x, y| x.room.cmp(&y.room).then(x.level.cmp(&y.level)));
    write_records(&a.out, records.iter())?;
    println!("{} anchors: {}", a.room, set.anchors.join(" "));
    Ok(())
}

fn train_room(a: TrainRoomArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let photos_in = |split: Split| -> Vec<&PhotoRecord> {
        data.houses_in(split)
            .flat_map(|h| h.photo_ids.iter())
            .filter_map(|id| data.photo(id))
            .collect()
    };
    let train = photos_in(Split::Train);
    let config = SoftmaxConfig {
        seed: a.seed,
        ..SoftmaxConfig::default()
    };
    let model = train_room_classifier(&train, a.max_photos, &config)?;
    write_records(&a.out, std::iter::once(&model))?;
    let test: Vec<&PhotoRecord> = photos_in(Split::Test)
        .into_iter()
        .filter(|p| p.room_true.is_some())
        .collect();
    if !test.is_empty() {
        let features: Vec<Vec<f64>> = test.iter().map(|p| p.features.clone()).collect();
        let labels: Vec<usize> = test.iter().map(|p| p.room_true.expect("filtered").index()).collect();
        let acc = evaluate_accuracy(&model, &features, &labels)?;
        println!("room accuracy on {} test photos: {:.4}", test.len(), acc.accuracy);
    }
    Ok(())
}

fn train_luxury(a: TrainLuxuryArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let records: Vec<LabelRecord> = read_records(&a.labels)?;
    let rooms: BTreeMap<String, RoomCategory> = records.iter().map(|r| (r.photo_id.clone(), r.room)).collect();
    let labels: BTreeMap<String, LuxuryLevel> = records.iter().map(|r| (r.photo_id.clone(), r.level)).collect();
    let config = SoftmaxConfig {
        seed: a.seed,
        ..SoftmaxConfig::default()
    };
    let room_of = |p: &PhotoRecord| if a.per_room { rooms.get(&p.id).copied() } else { None };
    let view = train_view(&data)?;
    let models = train_luxury_models(&view, &labels, room_of, &config)?;
    write_records(&a.out, models.to_records().iter())?;
    println!(
        "trained global luxury model and {} per-room models from {} labels",
        models.per_room.len(),
        labels.len()
    );
    Ok(())
}

fn load_photo_models(room: Option<&Path>, luxury: Option<&Path>) -> Result<Option<PhotoModels>> {
    match (room, luxury) {
        (Some(r), Some(l)) => {
            let mut rooms: Vec<SoftmaxModel> = read_records(r)?;
            if rooms.len() != 1 || rooms[0].classes != room_classes() {
                bail!("{} must hold exactly one room model over the 7 categories", r.display());
            }
            let luxury = LuxuryModels::from_records(read_records::<LuxuryModelRecord>(l)?)?;
            Ok(Some(PhotoModels {
                room: rooms.remove(0),
                luxury,
            }))
        }
        (None, None) => Ok(None),
        _ => bail!("--room-model and --luxury-model must be given together"),
    }
}

fn train_valuation_cmd(a: TrainValuationArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let models = load_photo_models(a.room_model.as_deref(), a.luxury_model.as_deref())?;
    let dim = a.mode.vector_len(data.feature_dim());
    let mut config = PipelineConfig::default();
    config.svr = SvrSettings {
        c: a.c,
        epsilon: a.epsilon,
        gamma_per_dim: a.gamma.map_or(config.svr.gamma_per_dim, |g| g * dim as f64),
    };
    if a.tune {
        config.tune = Some(TuneSettings {
            grid: ParamGrid::default(),
            folds: a.folds,
        });
    }
    let view = train_view(&data)?;
    let model = train_valuation(&view, a.mode, models.as_ref(), &config, a.seed)?;
    write_records(&a.out, model.to_records().iter())?;
    let p = model.svr.params;
    println!(
        "{} model: C {} epsilon {} gamma {:.6}, {} support vectors, converged {}",
        a.mode,
        p.c,
        p.epsilon,
        p.gamma,
        model.svr.support_vectors.len(),
        model.svr.converged
    );
    let test: Vec<_> = data.houses_in(Split::Test).filter(|h| h.purchase_price.is_some()).collect();
    if !test.is_empty() {
        let preds = predict_prices(&data, &test, &model, models.as_ref())?;
        let actual: Vec<f64> = test.iter().filter_map(|h| h.purchase_price).collect();
        let err = luxappraise::evaluation::median_error_rate(&preds, &actual)?;
        println!("median error rate on {} test houses: {:.4}", test.len(), err);
    }
    Ok(())
}

/// Report time from SOURCE_DATE_EPOCH when set, so repeated runs can be
/// byte-identical; otherwise the current time.
fn report_time() -> Result<u64> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.trim().parse().context("SOURCE_DATE_EPOCH must be an integer"),
        Err(_) => Ok(SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs()),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let config: PipelineConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    let labels = match &a.labels {
        Some(p) => LabelSource::Provided(
            read_records::<LabelRecord>(p)?
                .into_iter()
                .map(|r| (r.photo_id, r.level))
                .collect(),
        ),
        None => LabelSource::Simulated,
    };
    let mut report = run_ablation(&data, &a.modes, &config, &labels, &a.seeds)?;
    report.generated_at = Some(report_time()?);
    emit_report(&report, &a.out)?;
    print!("{}", luxappraise::evaluation::render_table(&report));
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let tasks: Vec<Task> = read_records(&a.tasks)?;
    let export = export_annotations(&serve::log_path(a.log), &tasks)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_export(&export, &a.out)?;
    let flagged = export.workers.iter().filter(|w| w.flagged).count();
    println!(
        "exported {} triplets, {} labels, {} workers ({} flagged)",
        export.triplets.len(),
        export.labels.len(),
        export.workers.len(),
        flagged
    );
    Ok(())
}
