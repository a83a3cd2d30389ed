//! Stage commands behind the `landchange` binary.
//!
//! Each `cmd_*` function is one subcommand. `cmd_run` chains the same
//! functions over files on disk, so a batch run and a manual sequence of
//! stage commands produce the same bytes.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use landchange::cart::{train, CartParams, DecisionTree};
use landchange::change::{change_stats, detect_change, render_map, ChangeStats, Palette};
use landchange::classify::classify_raster;
use landchange::metrics::{confusion, holdout_accuracy, MetricsReport};
use landchange::raster::{read_bytemap, read_scene, scene_dtype, write_bytemap, write_scene};
use landchange::samples::{read_features, sample_raster, to_feature_collection, SampleGeometry};
use landchange::synth::{generate_change_pair, generate_scene, TransitionPlan};
use landchange::{
    ByteMap, Error, LabeledFeature, LandCover, MapKind, Raster, Scalar, SceneSpec, SplitMix64,
    TrainingTable,
};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum CliError {
    /// A library failure, with the file or object it concerns.
    Core { context: String, source: Error },
    /// Bad arguments or configuration.
    Invalid(String),
    /// Failure inside one stage of a batch run.
    Stage {
        stage: &'static str,
        source: Box<CliError>,
    },
}

impl CliError {
    fn core(context: impl fmt::Display) -> impl FnOnce(Error) -> CliError {
        let context = context.to_string();
        move |source| CliError::Core { context, source }
    }

    fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Core {
            context: "i/o".into(),
            source: Error::Io {
                path: path.to_path_buf(),
                source,
            },
        }
    }

    /// 1 for I/O failures, 2 for validation and domain errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core { source, .. } if source.is_io() => 1,
            CliError::Core { .. } | CliError::Invalid(_) => 2,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // I/O errors already carry their path
            CliError::Core { source, .. } if source.is_io() => write!(f, "{source}"),
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
            CliError::Invalid(msg) => f.write_str(msg),
            CliError::Stage { stage, source } => write!(f, "stage {stage}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn stage<T>(name: &'static str, r: CliResult<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}

/// A scene read with whatever sample type its header declares.
pub enum Scene {
    F32(Raster<f32>),
    F64(Raster<f64>),
}

macro_rules! with_scene {
    ($scene:expr, $r:ident => $body:expr) => {
        match $scene {
            Scene::F32($r) => $body,
            Scene::F64($r) => $body,
        }
    };
}

pub fn read_any_scene(path: &Path) -> CliResult<Scene> {
    let ctx = || CliError::core(path.display());
    let dtype = scene_dtype(path).map_err(ctx())?;
    match dtype.as_str() {
        "float32" => read_scene(path).map(Scene::F32).map_err(ctx()),
        "float64" => read_scene(path).map(Scene::F64).map_err(ctx()),
        other => Err(CliError::Invalid(format!(
            "{}: unsupported scene dtype {other:?}",
            path.display()
        ))),
    }
}

fn read_map(path: &Path) -> CliResult<ByteMap> {
    read_bytemap(path).map_err(CliError::core(path.display()))
}

fn write_map(map: &ByteMap, path: &Path) -> CliResult<()> {
    write_bytemap(map, path).map_err(CliError::core(path.display()))
}

fn read_tree(path: &Path) -> CliResult<DecisionTree> {
    DecisionTree::from_json(&read_text(path)?).map_err(CliError::core(path.display()))
}

fn read_table(path: &Path) -> CliResult<TrainingTable<f64>> {
    // Tables store samples widened to f64, so this is exact for either dtype.
    TrainingTable::from_json(&read_text(path)?).map_err(CliError::core(path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub rows: usize,
    pub feature_count: usize,
    pub label_counts: [usize; 2],
}

/// Extracts training rows from `scene` under the labelled `features`.
pub fn cmd_sample(scene: &Path, features: &Path, out: &Path) -> CliResult<SampleSummary> {
    let scene = read_any_scene(scene)?;
    let collection = read_features(features).map_err(CliError::core(features.display()))?;
    let (text, summary) = with_scene!(&scene, r => {
        let table = sample_raster(r, &collection).map_err(CliError::core(features.display()))?;
        let text = table.to_json().map_err(CliError::core(features.display()))?;
        (text, SampleSummary {
            rows: table.len(),
            feature_count: table.feature_count(),
            label_counts: table.label_counts(),
        })
    });
    write_text(out, &text)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// `"defaults"` or the path the parameters came from.
    pub params_source: String,
    pub params: CartParams,
    pub rows: usize,
    pub depth: usize,
    pub leaves: usize,
    pub training: MetricsReport,
}

fn train_table(
    table_path: &Path,
    params: CartParams,
    source: String,
    out: &Path,
) -> CliResult<TrainReport> {
    let table = read_table(table_path)?;
    let ctx = || CliError::core(table_path.display());
    let tree = train(&table, &params).map_err(ctx())?;
    let training = holdout_accuracy(&tree, &table)
        .and_then(|m| m.report())
        .map_err(ctx())?;
    write_text(out, &tree.to_json().map_err(CliError::core(out.display()))?)?;
    Ok(TrainReport {
        params_source: source,
        params,
        rows: table.len(),
        depth: tree.depth(),
        leaves: tree.leaf_count(),
        training,
    })
}

/// Fits a tree to a training table. Without a params file the defaults
/// apply and the report says so.
pub fn cmd_train(table: &Path, params: Option<&Path>, out: &Path) -> CliResult<TrainReport> {
    let (params, source) = match params {
        None => (CartParams::default(), "defaults".to_string()),
        Some(p) => {
            let parsed: CartParams = serde_json::from_str(&read_text(p)?).map_err(|e| {
                CliError::Invalid(format!("{}: bad CART parameters: {e}", p.display()))
            })?;
            (parsed, p.display().to_string())
        }
    };
    train_table(table, params, source, out)
}

pub fn cmd_classify(tree: &Path, scene: &Path, out: &Path) -> CliResult<ByteMap> {
    let model = read_tree(tree)?;
    let raster = read_any_scene(scene)?;
    let map = with_scene!(&raster, r => classify_raster(&model, r))
        .map_err(CliError::core(scene.display()))?;
    write_map(&map, out)?;
    Ok(map)
}

/// Writes the change map and, when asked, its statistics.
pub fn cmd_change(
    old: &Path,
    new: &Path,
    out: &Path,
    stats: Option<&Path>,
) -> CliResult<ChangeStats> {
    let a = read_map(old)?;
    let b = read_map(new)?;
    let map = detect_change(&a, &b).map_err(CliError::core(format!(
        "{} vs {}",
        old.display(),
        new.display()
    )))?;
    write_map(&map, out)?;
    let s = change_stats(&map);
    if let Some(path) = stats {
        write_text(path, &s.to_json().map_err(CliError::core(path.display()))?)?;
    }
    Ok(s)
}

fn resolve_palette(kind: MapKind, overlay: Option<&Palette>) -> Palette {
    let base = Palette::default_for(kind);
    match overlay {
        Some(p) => base.overlay(p),
        None => base,
    }
}

fn render_to(map: &ByteMap, palette: &Palette, out: &Path) -> CliResult<()> {
    let png = render_map(map, palette).map_err(CliError::core(out.display()))?;
    fs::write(out, png).map_err(|e| CliError::io(out, e))
}

/// Renders a class or change map; `palette` entries override the defaults
/// for the map's kind.
pub fn cmd_render(map: &Path, out: &Path, palette: Option<&Path>) -> CliResult<()> {
    let m = read_map(map)?;
    let overlay = palette
        .map(|p| Palette::read(p).map_err(CliError::core(p.display())))
        .transpose()?;
    render_to(&m, &resolve_palette(m.kind(), overlay.as_ref()), out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunScene {
    pub epoch: String,
    pub header: PathBuf,
    /// Reference classmap for accuracy assessment.
    #[serde(default)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PaletteSource {
    File(PathBuf),
    Inline(std::collections::BTreeMap<String, [u8; 3]>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Oldest first.
    pub scenes: Vec<RunScene>,
    pub features: PathBuf,
    #[serde(default)]
    pub cart_params: Option<CartParams>,
    /// Overrides for the change-map palette.
    #[serde(default)]
    pub palette: Option<PaletteSource>,
    pub out_dir: PathBuf,
    /// Epoch to train on; the oldest when absent.
    #[serde(default)]
    pub train_epoch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassmapEntry {
    pub epoch: String,
    pub map: String,
    pub png: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeEntry {
    pub old: String,
    pub new: String,
    pub map: String,
    pub png: String,
    pub stats: String,
}

/// Everything a completed run produced, paths relative to `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub train_epoch: String,
    pub table: String,
    pub tree: String,
    pub classmaps: Vec<ClassmapEntry>,
    pub changes: Vec<ChangeEntry>,
    pub metrics: String,
}

#[derive(Debug, Serialize)]
struct RunMetrics {
    train_epoch: String,
    training: MetricsReport,
    /// Per-epoch accuracy against supplied reference maps.
    epochs: Vec<EpochMetrics>,
}

#[derive(Debug, Serialize)]
struct EpochMetrics {
    epoch: String,
    report: MetricsReport,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn valid_epoch(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !label.starts_with('.')
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> CliResult<RunConfig> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Invalid(format!("{}: bad run config: {e}", origin.display())))
    }

    fn validate(&self, origin: &Path) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Invalid(format!("{}: {m}", origin.display())));
        if self.scenes.len() < 2 {
            return bad(format!(
                "change detection needs at least 2 epochs, config lists {}",
                self.scenes.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.scenes.iter().enumerate() {
            if !valid_epoch(&s.epoch) {
                return bad(format!(
                    "scene {i}: epoch label {:?} must be letters, digits, '-', '_' or '.'",
                    s.epoch
                ));
            }
            if !seen.insert(s.epoch.as_str()) {
                return bad(format!("scene {i}: duplicate epoch {:?}", s.epoch));
            }
        }
        if let Some(t) = &self.train_epoch {
            if !seen.contains(t.as_str()) {
                return bad(format!(
                    "train_epoch {t:?} is not one of the configured epochs"
                ));
            }
        }
        if let Some(p) = &self.cart_params {
            p.validate()
                .map_err(CliError::core(format!("{}: cart_params", origin.display())))?;
        }
        Ok(())
    }

    /// (old, new) index pairs: oldest against newest, then each consecutive pair.
    pub fn change_pairs(&self) -> Vec<(usize, usize)> {
        let last = self.scenes.len() - 1;
        let mut pairs = vec![(0, last)];
        for i in 0..last {
            if (i, i + 1) != (0, last) {
                pairs.push((i, i + 1));
            }
        }
        pairs
    }
}

/// Runs the whole pipeline described by a config file. Relative paths in the
/// config are taken from the config's directory. The manifest is written
/// last; earlier outputs stay on disk if a stage fails.
pub fn cmd_run(config: &Path) -> CliResult<Manifest> {
    cmd_run_with(config, None)
}

/// [`cmd_run`] with the training epoch overridden.
pub fn cmd_run_with(config: &Path, train_epoch: Option<&str>) -> CliResult<Manifest> {
    let mut cfg = RunConfig::from_json(&read_text(config)?, config)?;
    if let Some(epoch) = train_epoch {
        cfg.train_epoch = Some(epoch.to_string());
    }
    cfg.validate(config)?;
    let base = config.parent().unwrap_or(Path::new(""));
    let at = |p: &Path| base.join(p);
    let out_dir = at(&cfg.out_dir);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let out = |name: &str| out_dir.join(name);

    let train_epoch = cfg
        .train_epoch
        .clone()
        .unwrap_or_else(|| cfg.scenes[0].epoch.clone());
    let train_scene = cfg
        .scenes
        .iter()
        .find(|s| s.epoch == train_epoch)
        .expect("validated");

    let table = "table.json";
    stage(
        "sample",
        cmd_sample(&at(&train_scene.header), &at(&cfg.features), &out(table)),
    )?;

    let tree = "tree.json";
    let (params, source) = match cfg.cart_params {
        Some(p) => (p, format!("{}#cart_params", config.display())),
        None => (CartParams::default(), "defaults".to_string()),
    };
    let trained = stage(
        "train",
        train_table(&out(table), params, source, &out(tree)),
    )?;

    let palette = stage(
        "render",
        match &cfg.palette {
            None => Ok(None),
            Some(PaletteSource::File(p)) => {
                let p = at(p);
                Palette::read(&p)
                    .map(Some)
                    .map_err(CliError::core(p.display()))
            }
            Some(PaletteSource::Inline(entries)) => {
                let text = serde_json::to_string(entries).expect("plain data serializes");
                Palette::from_json(&text)
                    .map(Some)
                    .map_err(CliError::core(format!("{}: palette", config.display())))
            }
        },
    )?;

    let mut classmaps = Vec::new();
    let mut epochs = Vec::new();
    for s in &cfg.scenes {
        let map = format!("classmap_{}.json", s.epoch);
        let png = format!("classmap_{}.png", s.epoch);
        let predicted = stage(
            "classify",
            cmd_classify(&out(tree), &at(&s.header), &out(&map)),
        )?;
        stage("render", cmd_render(&out(&map), &out(&png), None))?;
        if let Some(truth) = &s.truth {
            let report = stage(
                "metrics",
                read_map(&at(truth)).and_then(|t| {
                    confusion(&predicted, &t)
                        .and_then(|m| m.report())
                        .map_err(CliError::core(format!("epoch {}", s.epoch)))
                }),
            )?;
            epochs.push(EpochMetrics {
                epoch: s.epoch.clone(),
                report,
            });
        }
        classmaps.push(ClassmapEntry {
            epoch: s.epoch.clone(),
            map,
            png,
        });
    }

    let mut changes = Vec::new();
    for (i, j) in cfg.change_pairs() {
        let (a, b) = (&cfg.scenes[i].epoch, &cfg.scenes[j].epoch);
        let stem = format!("change_{a}_{b}");
        let entry = ChangeEntry {
            old: a.clone(),
            new: b.clone(),
            map: format!("{stem}.json"),
            png: format!("{stem}.png"),
            stats: format!("{stem}_stats.json"),
        };
        stage(
            "change",
            cmd_change(
                &out(&classmaps[i].map),
                &out(&classmaps[j].map),
                &out(&entry.map),
                Some(&out(&entry.stats)),
            ),
        )?;
        let m = stage("render", read_map(&out(&entry.map)))?;
        stage(
            "render",
            render_to(
                &m,
                &resolve_palette(MapKind::ChangeMap, palette.as_ref()),
                &out(&entry.png),
            ),
        )?;
        changes.push(entry);
    }

    let metrics = "metrics.json";
    let report = RunMetrics {
        train_epoch: train_epoch.clone(),
        training: trained.training,
        epochs,
    };
    stage("metrics", write_text(&out(metrics), &to_json_line(&report)))?;

    let manifest = Manifest {
        train_epoch,
        table: table.into(),
        tree: tree.into(),
        classmaps,
        changes,
        metrics: metrics.into(),
    };
    stage(
        "manifest",
        write_text(&out(MANIFEST_NAME), &to_json_line(&manifest)),
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub scene: SceneSpec,
    /// When present, an old/new pair is generated from this plan.
    #[serde(default)]
    pub transitions: Option<TransitionPlan>,
    /// `"float32"` (default) or `"float64"`.
    #[serde(default)]
    pub dtype: Option<String>,
    /// Emit this many labelled points per class, drawn from the (old) truth.
    #[serde(default)]
    pub training_points: Option<usize>,
}

fn write_scene_at<T: Scalar>(r: &Raster<T>, path: &Path) -> CliResult<()> {
    write_scene(r, path).map_err(CliError::core(path.display()))
}

/// Pixel-centre points, `per_class` of each class, chosen without replacement.
pub fn training_points(
    truth: &ByteMap,
    per_class: usize,
    seed: u64,
) -> CliResult<Vec<LabeledFeature>> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for class in LandCover::ALL {
        let mut pixels: Vec<usize> = truth
            .codes()
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == class.code())
            .map(|(i, _)| i)
            .collect();
        if pixels.len() < per_class {
            return Err(CliError::Invalid(format!(
                "truth has {} pixels of class {}, {} points requested",
                pixels.len(),
                class.code(),
                per_class
            )));
        }
        rng.shuffle(&mut pixels);
        pixels.truncate(per_class);
        pixels.sort_unstable();
        for idx in pixels {
            let (col, row) = (idx % truth.width(), idx / truth.width());
            let (x, y) = truth
                .geotransform()
                .pixel_to_world(col as f64 + 0.5, row as f64 + 0.5);
            out.push(LabeledFeature {
                geometry: SampleGeometry::Point { x, y },
                label: class,
            });
        }
    }
    Ok(out)
}

fn synth_typed<T: Scalar>(spec: &SynthSpec, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let p = |suffix: &str| PathBuf::from(format!("{prefix}{suffix}"));
    let ctx = || CliError::core("scene spec");
    let mut written = Vec::new();
    let sample_truth = match &spec.transitions {
        None => {
            let (raster, truth) = generate_scene::<T>(&spec.scene).map_err(ctx())?;
            write_scene_at(&raster, &p(".json"))?;
            write_map(&truth, &p("_truth.json"))?;
            written.extend([p(".json"), p("_truth.json")]);
            truth
        }
        Some(plan) => {
            let (old, new, change) = generate_change_pair::<T>(&spec.scene, plan).map_err(ctx())?;
            let decode = |f: fn(u8) -> u8| {
                let codes = change.codes().iter().map(|&c| f(c)).collect();
                ByteMap::new(
                    change.width(),
                    change.height(),
                    *change.geotransform(),
                    MapKind::ClassMap,
                    codes,
                )
                .map_err(ctx())
            };
            let old_truth = decode(|c| c / 2)?;
            let new_truth = decode(|c| c % 2)?;
            write_scene_at(&old, &p("_old.json"))?;
            write_scene_at(&new, &p("_new.json"))?;
            write_map(&old_truth, &p("_old_truth.json"))?;
            write_map(&new_truth, &p("_new_truth.json"))?;
            write_map(&change, &p("_change_truth.json"))?;
            written.extend(
                [
                    "_old.json",
                    "_new.json",
                    "_old_truth.json",
                    "_new_truth.json",
                    "_change_truth.json",
                ]
                .map(p),
            );
            old_truth
        }
    };
    if let Some(n) = spec.training_points {
        let points = training_points(&sample_truth, n, spec.scene.seed.wrapping_add(2))?;
        write_text(&p("_points.geojson"), &to_feature_collection(&points))?;
        written.push(p("_points.geojson"));
    }
    Ok(written)
}

/// Generates a synthetic scene, or a scene pair when the spec carries
/// `transitions`. Returns the headers and files written.
pub fn cmd_synth(spec: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let parsed: SynthSpec = serde_json::from_str(&read_text(spec)?)
        .map_err(|e| CliError::Invalid(format!("{}: bad scene spec: {e}", spec.display())))?;
    let wrap = |e: CliError| match e {
        CliError::Core { source, .. } if !source.is_io() => CliError::Core {
            context: spec.display().to_string(),
            source,
        },
        other => other,
    };
    match parsed.dtype.as_deref().unwrap_or("float32") {
        "float32" => synth_typed::<f32>(&parsed, prefix).map_err(wrap),
        "float64" => synth_typed::<f64>(&parsed, prefix).map_err(wrap),
        other => Err(CliError::Invalid(format!(
            "{}: unsupported dtype {other:?}",
            spec.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize) -> RunConfig {
        RunConfig {
            scenes: (0..n)
                .map(|i| RunScene {
                    epoch: format!("{}", 2013 + i),
                    header: PathBuf::from("x.json"),
                    truth: None,
                })
                .collect(),
            features: PathBuf::from("f.geojson"),
            cart_params: None,
            palette: None,
            out_dir: PathBuf::from("out"),
            train_epoch: None,
        }
    }

    #[test]
    fn change_pairs_cover_ends_and_neighbours() {
        assert_eq!(config(2).change_pairs(), vec![(0, 1)]);
        assert_eq!(config(3).change_pairs(), vec![(0, 2), (0, 1), (1, 2)]);
        assert_eq!(
            config(4).change_pairs(),
            vec![(0, 3), (0, 1), (1, 2), (2, 3)]
        );
    }

    #[test]
    fn config_arity_and_labels() {
        let origin = Path::new("run.json");
        let e = config(1).validate(origin).unwrap_err();
        assert!(e.to_string().contains("at least 2 epochs"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let mut c = config(2);
        c.scenes[1].epoch = "2013".into();
        assert!(c
            .validate(origin)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let mut c = config(2);
        c.scenes[0].epoch = "../x".into();
        assert!(c.validate(origin).is_err());
        let mut c = config(2);
        c.train_epoch = Some("1999".into());
        assert!(c.validate(origin).is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let io = CliError::io(
            Path::new("a"),
            std::io::Error::from(std::io::ErrorKind::NotFound),
        );
        assert_eq!(io.exit_code(), 1);
        let staged = CliError::Stage {
            stage: "sample",
            source: Box::new(io),
        };
        assert_eq!(staged.exit_code(), 1);
        assert!(staged.to_string().starts_with("stage sample: a"));
        let domain = CliError::Core {
            context: "t.json".into(),
            source: Error::Training("one label".into()),
        };
        assert_eq!(domain.exit_code(), 2);
    }
}
