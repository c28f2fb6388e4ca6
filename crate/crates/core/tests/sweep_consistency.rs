use cloi_instance::evaluation::write_report_csv;
use cloi_instance::segmentation::{fragmentation, segment_provisional};
use cloi_instance::sweep::{
    facility_bias_report, sweep_epsilon, sweep_mu, sweep_radius_per_object, write_bias_csv, write_epsilon_csv,
    write_mu_csv, write_radius_csv, DEFAULT_EPSILONS, DEFAULT_MUS,
};
use cloi_instance::synth::{generate_scene, make_benchmark_suite};
use cloi_instance::{
    score, ClassLabel, InstanceLabeling, LabeledPointCloud, RadiusIndex, SegmentationParams, segment,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(profile: &str, seed: u64) -> LabeledPointCloud {
    let (spec, _) = make_benchmark_suite(profile, seed).unwrap().remove(0);
    generate_scene(&spec).unwrap()
}

fn csv(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

fn field(v: &str) -> Option<f64> {
    (!v.is_empty()).then(|| v.parse().unwrap())
}

fn three_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..3).map(|_| rng.random_range(0..n)).collect()
}

#[test]
fn mu_rows_match_direct_runs() {
    let cloud = scene("refinery-like", 1);
    let rows = sweep_mu(&cloud, 0.04, &DEFAULT_MUS, 0.5, None).unwrap();
    let gt = InstanceLabeling::ground_truth(&cloud);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in three_rows(&mut rng, rows.len()) {
        let row = &rows[k];
        let pred = segment(&cloud, &SegmentationParams::new(0.04, row.mu, None).unwrap());
        let r = score(&pred, &gt, &[0.5]).unwrap();
        assert_eq!(row.instances, pred.num_instances());
        assert_eq!((row.m_prec, row.m_rec), (r.thresholds[0].m_prec, r.thresholds[0].m_rec));
    }

    let mut out = Vec::new();
    write_mu_csv(&rows, &mut out).unwrap();
    let (header, body) = csv(&out);
    assert_eq!(body.len(), rows.len());
    // mean columns recomputed from the per-class recall columns
    for line in &body {
        let recalls: Vec<f64> = ClassLabel::CLOI
            .iter()
            .filter_map(|c| {
                let col = header.iter().position(|h| *h == format!("{c}_rec")).unwrap();
                field(&line[col])
            })
            .collect();
        let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
        assert!((mean - field(&line[3]).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn epsilon_rows_match_direct_runs() {
    let cloud = scene("sparse", 2);
    let rows = sweep_epsilon(&cloud, &DEFAULT_EPSILONS, 20, &[0.25, 0.5], None).unwrap();
    let gt = InstanceLabeling::ground_truth(&cloud);
    let idx = RadiusIndex::build(&cloud.positions()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in three_rows(&mut rng, rows.len()) {
        let row = &rows[k];
        // boundary radius follows epsilon unless overridden
        assert_eq!(row.boundary_radius, row.epsilon);
        let params = SegmentationParams::new(row.epsilon, 20, None).unwrap();
        let prov = segment_provisional(&cloud, &idx, &params).unwrap();
        let pred = prov.finalize(20);
        assert_eq!(row.prefilter_instances, prov.prefilter_count());
        assert_eq!(row.instances, pred.num_instances());
        let r = score(&pred, &gt, &[0.25, 0.5]).unwrap();
        for (m, t) in row.metrics.iter().zip(&r.thresholds) {
            assert_eq!(*m, (t.threshold, t.m_prec, t.m_rec));
        }
    }
    let mut out = Vec::new();
    write_epsilon_csv(&rows, &mut out).unwrap();
    let (header, body) = csv(&out);
    assert_eq!(header[..4], ["epsilon", "boundary_radius", "prefilter_instances", "instances"]);
    assert_eq!(body.len(), DEFAULT_EPSILONS.len());
}

#[test]
fn radius_rows_match_direct_runs() {
    let cloud = scene("gapped", 3);
    let ts = [0.25, 0.5, 0.75];
    let sweep = sweep_radius_per_object(&cloud, &DEFAULT_EPSILONS, &ts).unwrap();
    let gt = InstanceLabeling::ground_truth(&cloud);
    let indexes: Vec<RadiusIndex> = gt
        .instances()
        .iter()
        .map(|m| RadiusIndex::build(&m.iter().map(|&i| cloud.points()[i].position).collect::<Vec<_>>()).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in three_rows(&mut rng, sweep.rows.len()) {
        let row = &sweep.rows[k];
        let frags: Vec<_> = indexes.iter().map(|idx| fragmentation(idx, row.epsilon).unwrap()).collect();
        for (j, &t) in ts.iter().enumerate() {
            let hits = frags.iter().filter(|f| f.largest_fraction() > t).count();
            assert_eq!(row.m_rec_ins[j], hits as f64 / frags.len() as f64);
        }
    }
    let mut out = Vec::new();
    write_radius_csv(&sweep, &mut out).unwrap();
    let (header, body) = csv(&out);
    let selected: Vec<&Vec<String>> = body.iter().filter(|l| l[1] == "true").collect();
    assert_eq!(selected.len(), 1);
    assert_eq!(selected[0][0], "0.04");
    // every object here is a cylinder or profile, so the overall rate is the
    // instance-weighted mean of the class rates
    let col = header.iter().position(|h| h == "mrec_ins@0.5").unwrap();
    for line in &body {
        let mut weighted = 0.0;
        for c in ClassLabel::ALL {
            let n = gt.instance_classes().iter().filter(|&&k| k == c).count();
            let ccol = header.iter().position(|h| *h == format!("{c}_rec_ins@0.5")).unwrap();
            if let Some(v) = field(&line[ccol]) {
                weighted += v * n as f64;
            }
        }
        let overall = field(&line[col]).unwrap();
        assert!((weighted / gt.num_instances() as f64 - overall).abs() < 1e-9);
    }
}

#[test]
fn report_csv_mean_row_rechecks() {
    let cloud = scene("close", 4);
    let pred = segment(&cloud, &SegmentationParams::default());
    let gt = InstanceLabeling::ground_truth(&cloud);
    let report = score(&pred, &gt, &[0.25, 0.5, 0.75]).unwrap();
    let mut out = Vec::new();
    write_report_csv(&report, &mut out).unwrap();
    let (header, body) = csv(&out);
    assert_eq!(body.len(), 9);
    let mean = body.iter().find(|l| l[0] == "mean").unwrap();
    for (col, name) in header.iter().enumerate().skip(1) {
        let values: Vec<Option<f64>> = body
            .iter()
            .filter(|l| l[0] != "mean" && l[0] != "other")
            .map(|l| field(&l[col]))
            .collect();
        let got = field(&mean[col]);
        if name.starts_with("prec") || name.starts_with("rec") {
            let defined: Vec<f64> = values.into_iter().flatten().collect();
            let want = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            match (got, want) {
                (Some(g), Some(w)) => assert!((g - w).abs() < 1e-9, "{name}"),
                (g, w) => assert_eq!(g, w, "{name}"),
            }
        } else {
            let sum: f64 = values.into_iter().flatten().sum();
            assert_eq!(got, Some(sum), "{name}");
        }
    }
}

#[test]
fn bias_report_statistics() {
    let clouds: Vec<(String, LabeledPointCloud)> = ["dense", "sparse", "close", "refinery-like"]
        .iter()
        .map(|p| (p.to_string(), scene(p, 5)))
        .collect();
    let params = SegmentationParams::default();
    let report = facility_bias_report(&clouds, &params, 0.5).unwrap();
    let mut out = Vec::new();
    write_bias_csv(&report, &mut out).unwrap();
    let (_, body) = csv(&out);
    assert_eq!(body.len(), clouds.len() + 2);
    let recs: Vec<f64> = body[..clouds.len()].iter().map(|l| field(&l[2]).unwrap()).collect();
    let mean = recs.iter().sum::<f64>() / recs.len() as f64;
    let var = recs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (recs.len() - 1) as f64;
    assert!((field(&body[clouds.len()][2]).unwrap() - mean).abs() < 1e-9);
    assert!((field(&body[clouds.len() + 1][2]).unwrap() - var.sqrt()).abs() < 1e-9);

    let same = vec![clouds[0].clone(), clouds[0].clone()];
    let r = facility_bias_report(&same, &params, 0.5).unwrap();
    assert_eq!((r.std_prec, r.std_rec), (Some(0.0), Some(0.0)));
    assert!(facility_bias_report(&clouds[..1], &params, 0.5).is_err());
}
