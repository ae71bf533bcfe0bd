use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use stdec::data::{generate_synthetic, ingest_csv, CsvLayout, CsvSchema, PlantedDrop, SyntheticSpec, WindowedDataset};
use stdec::dec::{train as train_model, write_grid_csv, write_log_csv, SavedModel, TrainedModel, Variant};
use stdec::kmeans::{elbow as elbow_curve, kmedoid_dtw_sampled, ElbowCurve};
use stdec::metrics::{assemble_report, evaluate_run, ClusterReport, RunInput};
use stdec::nn::Matrix;

use crate::config::{KRange, ModelKind, RunConfig};
use crate::dataset::{self, create, Loaded};
use crate::error::{usage, CliResult};
use crate::model::{write_hard_csv, write_label_grid_csv, write_latent_csv, MedoidModel, Model};
use crate::{resolve, ElbowArgs, ElbowSpace, EvaluateArgs, ExportArgs, IngestArgs, LayoutArg, SynthArgs, TrainArgs};

fn out_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn parse_drop(raw: &str) -> CliResult<PlantedDrop> {
    let parts: Vec<&str> = raw.split(':').collect();
    let bad = || usage(format!("drop {raw:?} is not sensor:start:len:factor"));
    let [sensor, start, len, factor] = parts.as_slice() else {
        return Err(bad());
    };
    Ok(PlantedDrop {
        sensor: sensor.parse().map_err(|_| bad())?,
        start: start.parse().map_err(|_| bad())?,
        len: len.parse().map_err(|_| bad())?,
        factor: factor.parse().map_err(|_| bad())?,
    })
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut spec = SyntheticSpec::with_regions(a.sensors as usize, a.days as usize, a.regions as usize, a.noise, a.seed)?;
    spec.anomalies = a.drops.iter().map(|d| parse_drop(d)).collect::<CliResult<_>>()?;
    let (series, regions) = generate_synthetic(&spec)?;
    out_dir(&a.out)?;
    let mut raster = create(&a.out.join("raster.csv"))?;
    dataset::write_raster_csv(&series, &mut raster)?;
    raster.flush()?;
    let mut truth = csv::Writer::from_writer(create(&a.out.join("ground_truth.csv"))?);
    truth.write_record(["sensor", "region"])?;
    for (id, r) in series.sensor_ids.iter().zip(&regions) {
        truth.write_record([id.clone(), r.to_string()])?;
    }
    truth.flush()?;
    println!("wrote {} sensors x {} timestamps to {}", series.sensors(), series.timestamps(), a.out.display());
    Ok(())
}

pub fn ingest(a: &IngestArgs) -> CliResult<()> {
    let sensor_order = match &a.sensor_order {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
        }
        None => None,
    };
    let layout = match a.layout {
        LayoutArg::Auto => CsvLayout::Auto,
        LayoutArg::Wide => CsvLayout::Wide,
        LayoutArg::Long => CsvLayout::Long,
    };
    let report = ingest_csv(&a.input, &CsvSchema { layout, sensor_order })?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    let mut out = create(&a.out)?;
    dataset::write_raster_csv(&report.series, &mut out)?;
    out.flush()?;
    for (id, n) in report.series.sensor_ids.iter().zip(&report.filled) {
        if *n > 0 {
            eprintln!("{id}: interpolated {n} cells");
        }
    }
    println!(
        "wrote {} sensors x {} timestamps to {}",
        report.series.sensors(),
        report.series.timestamps(),
        a.out.display()
    );
    Ok(())
}

/// Latents of the pretrained autoencoder (no joint phase).
fn pretrained_latents(cfg: &RunConfig, data: &WindowedDataset, k: usize) -> CliResult<Matrix> {
    let tc = cfg.train_config(k);
    Ok(train_model(data, None, &tc, Variant::KmeansAe)?.latents)
}

fn elbow_for(cfg: &RunConfig, data: &WindowedDataset, range: &KRange, space: ElbowSpace) -> CliResult<ElbowCurve> {
    let ks = range.values();
    if ks.last().is_some_and(|&k| k > data.len()) {
        return Err(usage(format!("k range reaches {} but there are {} points", range.max, data.len())));
    }
    let points = match space {
        ElbowSpace::Latent => pretrained_latents(cfg, data, ks[0])?,
        ElbowSpace::Raw => data.series().clone(),
    };
    Ok(elbow_curve(&points, &ks, cfg.kmeans_restarts, cfg.seed.wrapping_add(2))?)
}

fn write_elbow(curve: &ElbowCurve, path: &Path) -> CliResult<()> {
    let mut out = create(path)?;
    curve.write_csv(&mut out)?;
    out.flush()?;
    if curve.knee_found {
        println!("knee at k = {}", curve.knee);
    } else {
        eprintln!("inertia curve has no knee; falling back to k = {}", curve.knee);
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    variant: &'a str,
    k: usize,
    fingerprint: &'a str,
    points: usize,
    pretrain_epochs: usize,
    joint_epochs: usize,
    converged: bool,
    empty_clusters: Vec<usize>,
}

pub fn train(a: &TrainArgs, argv: &[String]) -> CliResult<()> {
    let (cfg, source) = resolve(&a.data, Some(&a.train))?;
    let out = cfg.out.clone().ok_or_else(|| usage("no output directory: pass --out"))?;
    out_dir(&out)?;
    write_json(&out.join("config.json"), &cfg)?;
    if let Some(text) = source {
        std::fs::write(out.join("config.source.json"), text)?;
    }
    write_json(&out.join("args.json"), &argv)?;

    let loaded = dataset::load(&cfg)?;
    let data = &loaded.prepared.train;
    let space = if cfg.variant == ModelKind::KmeansDtw { ElbowSpace::Raw } else { ElbowSpace::Latent };
    let k = match &cfg.elbow {
        Some(range) => {
            let curve = elbow_for(&cfg, data, range, space)?;
            write_elbow(&curve, &out.join("elbow.csv"))?;
            curve.knee
        }
        None => cfg.k,
    };

    let summary = match cfg.variant.variant() {
        Some(variant) => train_network(&cfg, &loaded, k, variant, &out)?,
        None => train_medoids(&cfg, &loaded, k, &out)?,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{} k={} on {} points; model written to {}",
        summary.variant,
        summary.k,
        summary.points,
        out.join("model.ckpt").display()
    );
    Ok(())
}

fn train_network<'a>(
    cfg: &'a RunConfig,
    loaded: &'a Loaded,
    k: usize,
    variant: Variant,
    out: &Path,
) -> CliResult<TrainSummary<'a>> {
    let data = &loaded.prepared.train;
    let lambda = match variant {
        Variant::Sdec => Some(dataset::spatial_weights(cfg, data.sensors())?),
        _ => None,
    };
    let tc = cfg.train_config(k);
    let trained: TrainedModel = train_model(data, lambda.as_ref(), &tc, variant)?;
    let saved = SavedModel {
        variant,
        config: tc,
        network: trained.network,
        head: trained.head,
        window: data.window(),
        sensors: data.sensors(),
        fingerprint: Some(loaded.fingerprint.clone()),
    };
    Model::Network(saved).save(&out.join("model.ckpt"))?;
    let mut a = create(&out.join("assignments.csv"))?;
    trained.assignments.write_csv(&mut a, data.time_origin)?;
    a.flush()?;
    let mut l = create(&out.join("loss.csv"))?;
    write_log_csv(&trained.log, &mut l)?;
    l.flush()?;
    let joint = trained.log.iter().filter(|e| e.phase == stdec::dec::Phase::Joint).count();
    Ok(TrainSummary {
        variant: cfg.variant.name(),
        k,
        fingerprint: &loaded.fingerprint,
        points: data.len(),
        pretrain_epochs: cfg.pretrain_epochs,
        joint_epochs: joint,
        converged: trained.converged,
        empty_clusters: trained.assignments.empty_clusters(),
    })
}

fn train_medoids<'a>(cfg: &'a RunConfig, loaded: &'a Loaded, k: usize, out: &Path) -> CliResult<TrainSummary<'a>> {
    let data = &loaded.prepared.train;
    let dtw = cfg.dtw();
    let fit = kmedoid_dtw_sampled(data.series(), k, &dtw, cfg.kmeans_restarts, cfg.seed, cfg.max_fit)?;
    let model = MedoidModel {
        dtw,
        window: data.window(),
        sensors: data.sensors(),
        medoids: fit.centroids.iter_rows().map(<[f64]>::to_vec).collect(),
        fingerprint: Some(loaded.fingerprint.clone()),
    };
    Model::Medoids(model).save(&out.join("model.ckpt"))?;
    let mut a = create(&out.join("assignments.csv"))?;
    write_hard_csv(&fit.assignments, data.sensors(), &mut a, data.time_origin)?;
    a.flush()?;
    let mut used = vec![false; k];
    for &l in &fit.assignments {
        used[l] = true;
    }
    Ok(TrainSummary {
        variant: cfg.variant.name(),
        k,
        fingerprint: &loaded.fingerprint,
        points: data.len(),
        pretrain_epochs: 0,
        joint_epochs: 0,
        converged: fit.iterations < 100,
        empty_clusters: (0..k).filter(|&j| !used[j]).collect(),
    })
}

pub fn elbow(a: &ElbowArgs) -> CliResult<()> {
    let (cfg, _) = resolve(&a.data, Some(&a.train))?;
    let range = cfg.elbow.ok_or_else(|| usage("pass --elbow min:max[:step]"))?;
    let out = cfg.out.clone().ok_or_else(|| usage("no output directory: pass --out"))?;
    let loaded = dataset::load(&cfg)?;
    let curve = elbow_for(&cfg, &loaded.prepared.train, &range, a.space)?;
    out_dir(&out)?;
    write_elbow(&curve, &out.join("elbow.csv"))
}

/// Model names for file prefixes: the variant, numbered when repeated.
fn model_names(kinds: &[ModelKind]) -> Vec<String> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let repeats = kinds.iter().filter(|o| *o == k).count();
            if repeats > 1 {
                let nth = kinds[..=i].iter().filter(|o| *o == k).count();
                format!("{}-{nth}", k.name())
            } else {
                k.name().to_string()
            }
        })
        .collect()
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let (cfg, _) = resolve(&a.data, None)?;
    let loaded = dataset::load(&cfg)?;
    let data = loaded.split(a.test)?;
    let models: Vec<Model> = a.models.iter().map(|p| Model::load(p)).collect::<CliResult<_>>()?;
    for (m, p) in models.iter().zip(&a.models) {
        m.check_dataset(data, &loaded.fingerprint)
            .with_context(|| format!("checking {}", p.display()))?;
    }
    let names = model_names(&models.iter().map(Model::kind).collect::<Vec<_>>());
    out_dir(&a.out)?;

    let dtw = cfg.dtw();
    let s = data.sensors();
    let origin = data.time_origin;
    let mut reports: Vec<ClusterReport> = Vec::new();
    let mut first_latents: Option<Matrix> = None;
    for (model, name) in models.iter().zip(&names) {
        let applied = model.apply(data)?;
        let run = RunInput {
            model: name.clone(),
            fingerprint: Some(loaded.fingerprint.clone()),
            labels: &applied.labels,
            k: model.k(),
            sensors: s,
            windows: data.series(),
            latents: &applied.latents,
            window_len: data.window(),
        };
        reports.push(evaluate_run(&run, &dtw)?);
        let mut g = create(&a.out.join(format!("{name}.grid.csv")))?;
        write_label_grid_csv(&applied.labels, s, &mut g, origin)?;
        g.flush()?;
        let mut an = create(&a.out.join(format!("{name}.anomaly.csv")))?;
        write_grid_csv(&applied.anomaly, &mut an, origin)?;
        an.flush()?;
        if a.export_latent {
            let mut l = create(&a.out.join(format!("{name}.latent.csv")))?;
            write_latent_csv(&applied.latents, s, &mut l, origin)?;
            l.flush()?;
        }
        if first_latents.is_none() {
            first_latents = Some(applied.latents);
        }
    }

    let comparison = assemble_report(reports)?;
    write_json(&a.out.join("report.json"), &comparison)?;
    let mut t = create(&a.out.join("table.csv"))?;
    comparison.write_table_csv(&mut t)?;
    t.flush()?;
    let mut sm = create(&a.out.join("spatial_metric.csv"))?;
    comparison.write_series_csv(&mut sm, origin)?;
    sm.flush()?;
    if let (Some(range), Some(z)) = (&a.elbow, &first_latents) {
        let curve = elbow_curve(z, &range.values(), cfg.kmeans_restarts, cfg.seed.wrapping_add(2))?;
        write_elbow(&curve, &a.out.join("elbow.csv"))?;
    }

    println!("{:<12} {:>12} {:>12} {:>15}", "model", "compactness", "connectivity", "disconnectivity");
    for r in &comparison.reports {
        println!(
            "{:<12} {:>12.4} {:>12.4} {:>15.4}",
            r.model, r.compactness_normalized, r.connectivity_normalized, r.disconnectivity_normalized
        );
    }
    for p in &comparison.t_tests {
        match &p.test {
            Some(t) => println!("t-test {} vs {}: t = {:.4}, df = {:.1}, p = {:.3e}", p.a, p.b, t.t, t.df, t.p),
            None => println!("t-test {} vs {}: undefined, both series are constant", p.a, p.b),
        }
    }
    Ok(())
}

pub fn export(a: &ExportArgs) -> CliResult<()> {
    let (cfg, _) = resolve(&a.data, None)?;
    let loaded = dataset::load(&cfg)?;
    let data = loaded.split(a.test)?;
    let model = Model::load(&a.model)?;
    model.check_dataset(data, &loaded.fingerprint)?;
    let applied = model.apply(data)?;
    let (s, origin) = (data.sensors(), data.time_origin);
    out_dir(&a.out)?;
    let file = |name: &str| -> PathBuf { a.out.join(name) };
    let mut l = create(&file("latent.csv"))?;
    write_latent_csv(&applied.latents, s, &mut l, origin)?;
    l.flush()?;
    let mut asg = create(&file("assignments.csv"))?;
    match &applied.assignments {
        Some(q) => q.write_csv(&mut asg, origin)?,
        None => write_hard_csv(&applied.labels, s, &mut asg, origin)?,
    }
    asg.flush()?;
    let mut g = create(&file("grid.csv"))?;
    write_label_grid_csv(&applied.labels, s, &mut g, origin)?;
    g.flush()?;
    let mut an = create(&file("anomaly.csv"))?;
    write_grid_csv(&applied.anomaly, &mut an, origin)?;
    an.flush()?;
    println!("exported {} points to {}", applied.labels.len(), a.out.display());
    Ok(())
}
