//! Parameter studies over the link radius and minimum instance size.
//!
//! Every grid point is independent and runs in parallel; rows always come
//! back in grid order. Unless a fixed boundary radius is given, `r_b`
//! follows `epsilon` during epsilon sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{rec_ins, score, DEFAULT_THRESHOLDS};
use crate::pointcloud::{ClassLabel, LabeledPointCloud};
use crate::segmentation::{
    fragmentation, segment_provisional, segment_with_index, InstanceLabeling,
    ObjectFragmentation, SegmentationParams,
};
use crate::spatial_index::RadiusIndex;

pub const DEFAULT_EPSILONS: [f64; 7] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07];
pub const DEFAULT_MUS: [usize; 6] = [10, 20, 50, 100, 150, 200];
/// Radius selection rule: smallest epsilon whose mRec_ins at IoU 0.5
/// reaches 90%.
pub const SELECTION_THRESHOLD: f64 = 0.5;
pub const SELECTION_TARGET: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    pub mus: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Fixed `r_b`; `None` ties it to the epsilon in use.
    pub boundary_radius: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            epsilons: DEFAULT_EPSILONS.to_vec(),
            mus: DEFAULT_MUS.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            boundary_radius: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        check_epsilons(&self.epsilons)?;
        check_mus(&self.mus)?;
        check_thresholds(&self.thresholds)?;
        if let Some(r) = self.boundary_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("boundary radius must be positive"));
            }
        }
        Ok(())
    }
}

fn check_epsilons(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty epsilon grid"));
    }
    if grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("epsilons must be positive"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("epsilon grid must be strictly ascending"));
    }
    Ok(())
}

fn check_mus(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty mu grid"));
    }
    if grid.contains(&0) {
        return Err(Error::invalid("mu values must be at least 1"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("mu grid must be strictly ascending"));
    }
    Ok(())
}

fn check_thresholds(ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::invalid("no IoU thresholds"));
    }
    if ts.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::invalid("IoU thresholds must be in (0, 1]"));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuRow {
    pub mu: usize,
    pub instances: usize,
    /// (precision, recall) per class.
    pub per_class: BTreeMap<ClassLabel, (Option<f64>, Option<f64>)>,
    pub m_prec: Option<f64>,
    pub m_rec: Option<f64>,
}

/// One segmentation and score per `mu` at fixed `epsilon` and threshold.
///
/// Boundary detection, graph search and reattachment do not depend on
/// `mu`, so they run once and only the size filter is repeated.
pub fn sweep_mu(
    cloud: &LabeledPointCloud,
    epsilon: f64,
    mus: &[usize],
    threshold: f64,
    boundary_radius: Option<f64>,
) -> Result<Vec<MuRow>> {
    check_mus(mus)?;
    check_thresholds(&[threshold])?;
    let params = SegmentationParams::new(epsilon, mus[0], boundary_radius)?;
    let index = RadiusIndex::build(&cloud.positions())?;
    let prov = segment_provisional(cloud, &index, &params)?;
    let gt = InstanceLabeling::ground_truth(cloud);
    mus.par_iter()
        .map(|&mu| {
            let pred = prov.finalize(mu);
            let report = score(&pred, &gt, &[threshold])?;
            let r = &report.thresholds[0];
            Ok(MuRow {
                mu,
                instances: pred.num_instances(),
                per_class: r
                    .per_class
                    .iter()
                    .map(|(c, s)| (*c, (s.precision, s.recall)))
                    .collect(),
                m_prec: r.m_prec,
                m_rec: r.m_rec,
            })
        })
        .collect()
}

pub fn write_mu_csv(rows: &[MuRow], out: &mut impl Write) -> std::io::Result<()> {
    let mut header = vec!["mu".to_string(), "instances".into(), "mprec".into(), "mrec".into()];
    for c in ClassLabel::ALL {
        header.push(format!("{c}_prec"));
        header.push(format!("{c}_rec"));
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut f = vec![
            row.mu.to_string(),
            row.instances.to_string(),
            fmt_opt(row.m_prec),
            fmt_opt(row.m_rec),
        ];
        for c in ClassLabel::ALL {
            let (p, r) = row.per_class[&c];
            f.push(fmt_opt(p));
            f.push(fmt_opt(r));
        }
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub boundary_radius: f64,
    /// Interior components before reattachment and the size filter.
    pub prefilter_instances: usize,
    pub instances: usize,
    /// (threshold, mPrec, mRec)
    pub metrics: Vec<(f64, Option<f64>, Option<f64>)>,
}

pub fn sweep_epsilon(
    cloud: &LabeledPointCloud,
    epsilons: &[f64],
    mu: usize,
    thresholds: &[f64],
    boundary_radius: Option<f64>,
) -> Result<Vec<EpsilonRow>> {
    check_epsilons(epsilons)?;
    check_thresholds(thresholds)?;
    let index = RadiusIndex::build(&cloud.positions())?;
    let gt = InstanceLabeling::ground_truth(cloud);
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let params = SegmentationParams::new(epsilon, mu, boundary_radius)?;
            let prov = segment_provisional(cloud, &index, &params)?;
            let pred = prov.finalize(mu);
            let report = score(&pred, &gt, thresholds)?;
            Ok(EpsilonRow {
                epsilon,
                boundary_radius: params.boundary_radius(),
                prefilter_instances: prov.prefilter_count(),
                instances: pred.num_instances(),
                metrics: report
                    .thresholds
                    .iter()
                    .map(|r| (r.threshold, r.m_prec, r.m_rec))
                    .collect(),
            })
        })
        .collect()
}

pub fn write_epsilon_csv(rows: &[EpsilonRow], out: &mut impl Write) -> std::io::Result<()> {
    let mut header = vec![
        "epsilon".to_string(),
        "boundary_radius".into(),
        "prefilter_instances".into(),
        "instances".into(),
    ];
    if let Some(first) = rows.first() {
        for (t, _, _) in &first.metrics {
            header.push(format!("mprec@{t}"));
            header.push(format!("mrec@{t}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut f = vec![
            row.epsilon.to_string(),
            row.boundary_radius.to_string(),
            row.prefilter_instances.to_string(),
            row.instances.to_string(),
        ];
        for (_, p, r) in &row.metrics {
            f.push(fmt_opt(*p));
            f.push(fmt_opt(*r));
        }
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRow {
    pub epsilon: f64,
    /// mRec_ins over all ground-truth instances, one per threshold.
    pub m_rec_ins: Vec<f64>,
    /// Rec_ins per class and threshold; `None` when the class has no
    /// instances.
    pub per_class: BTreeMap<ClassLabel, Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusSweep {
    pub thresholds: Vec<f64>,
    pub rows: Vec<RadiusRow>,
    /// Smallest epsilon with mRec_ins at IoU 0.5 of at least 90%.
    pub selected_epsilon: Option<f64>,
}

/// Per-object fragmentation of every ground-truth instance at each epsilon.
pub fn sweep_radius_per_object(
    cloud: &LabeledPointCloud,
    epsilons: &[f64],
    thresholds: &[f64],
) -> Result<RadiusSweep> {
    check_epsilons(epsilons)?;
    check_thresholds(thresholds)?;
    if !cloud.has_ground_truth() {
        return Err(Error::invalid("radius sweep needs ground-truth instances"));
    }
    let gt = InstanceLabeling::ground_truth(cloud);
    if gt.num_instances() == 0 {
        return Err(Error::invalid("no ground-truth instances"));
    }
    let objects: Vec<(ClassLabel, RadiusIndex)> = gt
        .instances()
        .par_iter()
        .zip(gt.instance_classes().par_iter())
        .map(|(members, class)| {
            let pts: Vec<_> = members.iter().map(|&i| cloud.points()[i].position).collect();
            Ok((*class, RadiusIndex::build(&pts)?))
        })
        .collect::<Result<_>>()?;

    let evaluated = epsilons
        .iter()
        .map(|&epsilon| {
            let frags: Vec<ObjectFragmentation> = objects
                .par_iter()
                .map(|(_, idx)| fragmentation(idx, epsilon))
                .collect::<Result<_>>()?;
            let rate = |class: Option<ClassLabel>, t: f64| -> Option<f64> {
                let (hit, total) = objects
                    .iter()
                    .zip(&frags)
                    .filter(|((c, _), _)| class.is_none_or(|k| k == *c))
                    .fold((0usize, 0usize), |(h, n), (_, f)| {
                        (h + usize::from(f.largest_fraction() > t), n + 1)
                    });
                (total > 0).then(|| hit as f64 / total as f64)
            };
            let row = RadiusRow {
                epsilon,
                m_rec_ins: thresholds
                    .iter()
                    .map(|&t| rate(None, t).expect("at least one instance"))
                    .collect(),
                per_class: ClassLabel::ALL
                    .iter()
                    .map(|&c| (c, thresholds.iter().map(|&t| rate(Some(c), t)).collect()))
                    .collect(),
            };
            Ok((row, rec_ins(&frags, SELECTION_THRESHOLD)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let selected_epsilon = evaluated
        .iter()
        .find(|(_, rec)| *rec >= SELECTION_TARGET)
        .map(|(row, _)| row.epsilon);

    Ok(RadiusSweep {
        thresholds: thresholds.to_vec(),
        rows: evaluated.into_iter().map(|(row, _)| row).collect(),
        selected_epsilon,
    })
}

pub fn write_radius_csv(sweep: &RadiusSweep, out: &mut impl Write) -> std::io::Result<()> {
    let mut header = vec!["epsilon".to_string(), "selected".into()];
    for t in &sweep.thresholds {
        header.push(format!("mrec_ins@{t}"));
    }
    for c in ClassLabel::ALL {
        for t in &sweep.thresholds {
            header.push(format!("{c}_rec_ins@{t}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for row in &sweep.rows {
        let mut f = vec![
            row.epsilon.to_string(),
            (sweep.selected_epsilon == Some(row.epsilon)).to_string(),
        ];
        f.extend(row.m_rec_ins.iter().map(f64::to_string));
        for c in ClassLabel::ALL {
            f.extend(row.per_class[&c].iter().map(|v| fmt_opt(*v)));
        }
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FacilityRow {
    pub name: String,
    pub m_prec: Option<f64>,
    pub m_rec: Option<f64>,
}

/// Per-facility scores plus their spread. Standard deviations are sample
/// deviations (n - 1 denominator) over facilities with a defined value.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub threshold: f64,
    pub rows: Vec<FacilityRow>,
    pub mean_prec: Option<f64>,
    pub std_prec: Option<f64>,
    pub mean_rec: Option<f64>,
    pub std_rec: Option<f64>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

pub fn facility_bias_report(
    facilities: &[(String, LabeledPointCloud)],
    params: &SegmentationParams,
    threshold: f64,
) -> Result<BiasReport> {
    if facilities.len() < 2 {
        return Err(Error::invalid("facility comparison needs at least two clouds"));
    }
    check_thresholds(&[threshold])?;
    let rows = facilities
        .par_iter()
        .map(|(name, cloud)| {
            let index = RadiusIndex::build(&cloud.positions())?;
            let pred = segment_with_index(cloud, &index, params)?;
            let gt = InstanceLabeling::ground_truth(cloud);
            let r = score(&pred, &gt, &[threshold])?;
            Ok(FacilityRow {
                name: name.clone(),
                m_prec: r.thresholds[0].m_prec,
                m_rec: r.thresholds[0].m_rec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let precs: Vec<f64> = rows.iter().filter_map(|r| r.m_prec).collect();
    let recs: Vec<f64> = rows.iter().filter_map(|r| r.m_rec).collect();
    let (mean_prec, std_prec) = mean_std(&precs);
    let (mean_rec, std_rec) = mean_std(&recs);
    Ok(BiasReport {
        threshold,
        rows,
        mean_prec,
        std_prec,
        mean_rec,
        std_rec,
    })
}

pub fn write_bias_csv(report: &BiasReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "facility,mprec,mrec")?;
    for r in &report.rows {
        writeln!(out, "{},{},{}", r.name, fmt_opt(r.m_prec), fmt_opt(r.m_rec))?;
    }
    writeln!(out, "mean,{},{}", fmt_opt(report.mean_prec), fmt_opt(report.mean_rec))?;
    writeln!(out, "std,{},{}", fmt_opt(report.std_prec), fmt_opt(report.std_rec))?;
    Ok(())
}
