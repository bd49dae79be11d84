//! One-to-one object matching and the five aggregate metrics, plus CSV and
//! SVG reporting.
//!
//! Matching is global-greedy: all prediction/truth center pairs are sorted
//! by ascending Euclidean distance (ties broken by prediction index, then
//! truth index) and accepted while both endpoints are unmatched. Pair-based
//! metrics pool matched pairs across all examples; the mismatch metric
//! averages per-example object-count differences over every example,
//! including those with no predictions.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::annotation::{ObjectRecord, SceneAnnotation};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("config error: {0}")]
    Config(String),
    #[error("charts need at least two rows, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of matching one prediction list against one truth list.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    /// (prediction index, truth index, center distance), in acceptance order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
}

/// Greedy one-to-one matching by ascending center distance.
pub fn match_objects(predicted: &[ObjectRecord], truth: &[ObjectRecord]) -> MatchSet {
    let mut candidates = Vec::with_capacity(predicted.len() * truth.len());
    for (pi, p) in predicted.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let d = p.voxel_coords_center.euclidean_distance(t.voxel_coords_center);
            candidates.push((pi, ti, d));
        }
    }
    candidates.sort_by(|a, b| {
        a.2.partial_cmp(&b.2)
            .expect("center distances are finite")
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    let mut pred_used = vec![false; predicted.len()];
    let mut truth_used = vec![false; truth.len()];
    let target = predicted.len().min(truth.len());
    let mut pairs = Vec::with_capacity(target);
    for (pi, ti, d) in candidates {
        if pairs.len() == target {
            break;
        }
        if !pred_used[pi] && !truth_used[ti] {
            pred_used[pi] = true;
            truth_used[ti] = true;
            pairs.push((pi, ti, d));
        }
    }
    MatchSet {
        pairs,
        unmatched_predictions: (0..predicted.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_truth: (0..truth.len()).filter(|&i| !truth_used[i]).collect(),
    }
}

/// The five aggregate metrics. Pair-based metrics are `None` when no pair
/// exists anywhere, never silently zero.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub avg_center_distance: Option<f64>,
    pub color_accuracy: Option<f64>,
    pub desc_accuracy: Option<f64>,
    pub avg_voxel_count_diff: Option<f64>,
    pub avg_mismatch_per_example: f64,
    pub n_examples: usize,
    pub n_matched_pairs: usize,
}

impl MetricsReport {
    /// Fixture constructor for report tables assembled from known values.
    pub fn from_values(
        avg_center_distance: f64,
        color_accuracy: f64,
        desc_accuracy: f64,
        avg_voxel_count_diff: f64,
        avg_mismatch_per_example: f64,
    ) -> Self {
        MetricsReport {
            avg_center_distance: Some(avg_center_distance),
            color_accuracy: Some(color_accuracy),
            desc_accuracy: Some(desc_accuracy),
            avg_voxel_count_diff: Some(avg_voxel_count_diff),
            avg_mismatch_per_example,
            n_examples: 0,
            n_matched_pairs: 0,
        }
    }
}

/// Compute the metrics over (prediction, truth) annotation pairs.
pub fn compute_metrics(
    examples: &[(SceneAnnotation, SceneAnnotation)],
) -> Result<MetricsReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::Config("no examples to evaluate".into()));
    }
    let mut distance_sum = 0.0f64;
    let mut color_hits = 0usize;
    let mut desc_hits = 0usize;
    let mut count_diff_sum = 0.0f64;
    let mut n_pairs = 0usize;
    let mut mismatch_sum = 0.0f64;

    for (predicted, truth) in examples {
        let matches = match_objects(&predicted.objects, &truth.objects);
        for &(pi, ti, d) in &matches.pairs {
            let p = &predicted.objects[pi];
            let t = &truth.objects[ti];
            distance_sum += d;
            if p.color == t.color {
                color_hits += 1;
            }
            if p.description == t.description {
                desc_hits += 1;
            }
            count_diff_sum +=
                (p.number_of_occupied_voxel as f64 - t.number_of_occupied_voxel as f64).abs();
            n_pairs += 1;
        }
        mismatch_sum += (predicted.objects.len() as f64 - truth.objects.len() as f64).abs();
    }

    let per_pair = |v: f64| (n_pairs > 0).then(|| v / n_pairs as f64);
    Ok(MetricsReport {
        avg_center_distance: per_pair(distance_sum),
        color_accuracy: per_pair(color_hits as f64),
        desc_accuracy: per_pair(desc_hits as f64),
        avg_voxel_count_diff: per_pair(count_diff_sum),
        avg_mismatch_per_example: mismatch_sum / examples.len() as f64,
        n_examples: examples.len(),
        n_matched_pairs: n_pairs,
    })
}

fn fmt_metric(value: Option<f64>, decimals: usize) -> String {
    match value {
        Some(v) => format!("{v:.decimals$}"),
        None => "NA".to_string(),
    }
}

/// Render rows as CSV: header plus one line per labeled report. Distances
/// print with 4 decimals, everything else with 2.
pub fn report_table(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(
        "steps,avg_center_distance,color_accuracy,desc_accuracy,avg_voxel_count_diff,avg_mismatch_per_example\n",
    );
    for (label, report) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.2}",
            label,
            fmt_metric(report.avg_center_distance, 4),
            fmt_metric(report.color_accuracy, 2),
            fmt_metric(report.desc_accuracy, 2),
            fmt_metric(report.avg_voxel_count_diff, 2),
            report.avg_mismatch_per_example,
        )
        .expect("writing to String cannot fail");
    }
    out
}

const METRIC_NAMES: [&str; 5] = [
    "avg_center_distance",
    "color_accuracy",
    "desc_accuracy",
    "avg_voxel_count_diff",
    "avg_mismatch_per_example",
];

fn metric_value(report: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "avg_center_distance" => report.avg_center_distance,
        "color_accuracy" => report.color_accuracy,
        "desc_accuracy" => report.desc_accuracy,
        "avg_voxel_count_diff" => report.avg_voxel_count_diff,
        "avg_mismatch_per_example" => Some(report.avg_mismatch_per_example),
        _ => None,
    }
}

/// Render one line-chart SVG per metric into `output_dir`, named
/// `<metric>.svg`. Needs at least two rows.
pub fn render_charts(
    rows: &[(String, MetricsReport)],
    output_dir: &Path,
) -> Result<Vec<std::path::PathBuf>, EvalError> {
    if rows.len() < 2 {
        return Err(EvalError::InsufficientData(rows.len()));
    }
    std::fs::create_dir_all(output_dir)?;
    let mut written = Vec::with_capacity(METRIC_NAMES.len());
    for name in METRIC_NAMES {
        let svg = render_metric_chart(rows, name);
        let path = output_dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn render_metric_chart(rows: &[(String, MetricsReport)], metric: &str) -> String {
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 400.0;
    const MARGIN: f64 = 60.0;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;

    // x positions: numeric labels plot at their value, otherwise by index
    let xs: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, (label, _))| label.parse::<f64>().unwrap_or(i as f64))
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .zip(&xs)
        .filter_map(|((_, report), &x)| metric_value(report, metric).map(|v| (x, v)))
        .collect();

    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (y_min, y_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    let x_span = if (x_max - x_min).abs() < f64::EPSILON { 1.0 } else { x_max - x_min };
    let (y_min, y_span) = if points.is_empty() || (y_max - y_min).abs() < f64::EPSILON {
        (y_min - 0.5, 1.0)
    } else {
        (y_min, y_max - y_min)
    };

    let to_px = |(x, y): (f64, f64)| {
        let px = MARGIN + (x - x_min) / x_span * plot_w;
        let py = MARGIN + (1.0 - (y - y_min) / y_span) * plot_h;
        (px, py)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{metric}</text>"#,
        WIDTH / 2.0
    )
    .unwrap();
    // axes
    writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    )
    .unwrap();

    if points.len() >= 2 {
        let path: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = to_px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
    }
    for (&p, (label, _)) in points.iter().zip(rows) {
        let (x, y) = to_px(p);
        writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="steelblue"/>"#).unwrap();
        writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>"#,
            HEIGHT - MARGIN + 16.0
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::GridCoord;
    use crate::grid::GridDims;
    use proptest::prelude::*;

    fn record(id: &str, center: (u32, u32, u32), color: &str, desc: &str, count: u64) -> ObjectRecord {
        ObjectRecord {
            id: id.to_string(),
            color: color.to_string(),
            description: desc.to_string(),
            number_of_occupied_voxel: count,
            voxel_coords_center: GridCoord::new(center.0, center.1, center.2),
        }
    }

    fn scene(objects: Vec<ObjectRecord>) -> SceneAnnotation {
        SceneAnnotation { scene_id: "s".into(), dims: GridDims::default_scene(), objects }
    }

    /// Exhaustive-permutation optimal assignment over the smaller side.
    fn optimal_total_distance(predicted: &[ObjectRecord], truth: &[ObjectRecord]) -> f64 {
        let (small, large, pred_small) = if predicted.len() <= truth.len() {
            (predicted, truth, true)
        } else {
            (truth, predicted, false)
        };
        let dist = |a: &ObjectRecord, b: &ObjectRecord| {
            a.voxel_coords_center.euclidean_distance(b.voxel_coords_center)
        };
        let indices: Vec<usize> = (0..large.len()).collect();
        let mut best = f64::INFINITY;
        permute_k(&indices, small.len(), &mut |assign| {
            let total: f64 = assign
                .iter()
                .enumerate()
                .map(|(si, &li)| {
                    if pred_small {
                        dist(&small[si], &large[li])
                    } else {
                        dist(&large[li], &small[si])
                    }
                })
                .sum();
            best = best.min(total);
        });
        best
    }

    fn permute_k(items: &[usize], k: usize, visit: &mut impl FnMut(&[usize])) {
        fn rec(
            items: &[usize],
            used: &mut Vec<bool>,
            current: &mut Vec<usize>,
            k: usize,
            visit: &mut impl FnMut(&[usize]),
        ) {
            if current.len() == k {
                visit(current);
                return;
            }
            for (i, &item) in items.iter().enumerate() {
                if !used[i] {
                    used[i] = true;
                    current.push(item);
                    rec(items, used, current, k, visit);
                    current.pop();
                    used[i] = false;
                }
            }
        }
        rec(items, &mut vec![false; items.len()], &mut Vec::new(), k, visit);
    }

    #[test]
    fn identical_lists_match_at_zero() {
        let objs = vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (50, 60, 3), "blue", "cup", 40),
        ];
        let m = match_objects(&objs, &objs);
        assert_eq!(m.pairs.len(), 2);
        assert!(m.pairs.iter().all(|&(pi, ti, d)| pi == ti && d == 0.0));
        assert!(m.unmatched_predictions.is_empty());
        assert!(m.unmatched_truth.is_empty());
    }

    #[test]
    fn shifted_345_matches_same_index_at_5() {
        // objects far enough apart that the diagonal pairing wins
        let truth = vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (60, 70, 3), "blue", "cup", 40),
            record("2", (90, 20, 5), "green", "tent", 50),
        ];
        let predicted: Vec<ObjectRecord> = truth
            .iter()
            .map(|t| {
                let mut p = t.clone();
                p.voxel_coords_center = GridCoord::new(
                    t.voxel_coords_center.x + 3,
                    t.voxel_coords_center.y + 4,
                    t.voxel_coords_center.z,
                );
                p
            })
            .collect();
        let m = match_objects(&predicted, &truth);
        assert_eq!(m.pairs.len(), 3);
        for &(pi, ti, d) in &m.pairs {
            assert_eq!(pi, ti);
            assert!((d - 5.0).abs() < 1e-12);
        }
        // greedy total equals the exhaustive optimum here
        let optimal = optimal_total_distance(&predicted, &truth);
        let greedy: f64 = m.pairs.iter().map(|p| p.2).sum();
        assert!((greedy - optimal).abs() < 1e-9);
    }

    #[test]
    fn pair_count_is_min_of_sizes() {
        let preds = vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (20, 20, 2), "blue", "cup", 40),
        ];
        let truth = vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (20, 20, 2), "blue", "cup", 40),
            record("2", (90, 90, 5), "green", "tent", 50),
        ];
        let m = match_objects(&preds, &truth);
        assert_eq!(m.pairs.len(), 2);
        assert_eq!(m.unmatched_truth, vec![2]);
        assert!(m.unmatched_predictions.is_empty());
    }

    #[test]
    fn empty_lists_match_to_nothing() {
        let m = match_objects(&[], &[]);
        assert!(m.pairs.is_empty());
        let m = match_objects(&[], &[record("0", (1, 1, 1), "red", "cone", 5)]);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_truth, vec![0]);
    }

    #[test]
    fn perfect_predictions_give_perfect_metrics() {
        let truth = scene(vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (60, 70, 3), "blue", "cup", 40),
        ]);
        let report = compute_metrics(&[(truth.clone(), truth)]).unwrap();
        assert_eq!(report.avg_center_distance, Some(0.0));
        assert_eq!(report.color_accuracy, Some(1.0));
        assert_eq!(report.desc_accuracy, Some(1.0));
        assert_eq!(report.avg_voxel_count_diff, Some(0.0));
        assert_eq!(report.avg_mismatch_per_example, 0.0);
    }

    #[test]
    fn mismatch_follows_the_per_example_mae() {
        // counts (2,3) and (1,1): (|2-3| + |1-1|) / 2 = 0.5
        let ex1_truth = scene(vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (60, 70, 3), "blue", "cup", 40),
            record("2", (90, 20, 5), "green", "tent", 50),
        ]);
        let ex1_pred = scene(vec![ex1_truth.objects[0].clone(), ex1_truth.objects[1].clone()]);
        let ex2_truth = scene(vec![record("0", (30, 30, 4), "grey", "desk", 80)]);
        let ex2_pred = ex2_truth.clone();
        let report =
            compute_metrics(&[(ex1_pred, ex1_truth), (ex2_pred, ex2_truth)]).unwrap();
        assert_eq!(report.avg_mismatch_per_example, 0.5);
        assert_eq!(report.n_examples, 2);
        assert_eq!(report.n_matched_pairs, 3);
    }

    #[test]
    fn voxel_count_diff_uses_absolute_difference() {
        let truth = scene(vec![record("0", (71, 64, 5), "dark_green", "bowl", 1600)]);
        let pred = scene(vec![record("0", (71, 64, 5), "dark_green", "bowl", 1539)]);
        let report = compute_metrics(&[(pred, truth)]).unwrap();
        assert_eq!(report.avg_voxel_count_diff, Some(61.0));
    }

    #[test]
    fn zero_pairs_reports_undefined_not_zero() {
        let truth = scene(vec![record("0", (10, 10, 2), "red", "cone", 30)]);
        let pred = scene(vec![]);
        let report = compute_metrics(&[(pred, truth)]).unwrap();
        assert_eq!(report.avg_center_distance, None);
        assert_eq!(report.color_accuracy, None);
        assert_eq!(report.avg_mismatch_per_example, 1.0);
        // and the CSV prints NA markers
        let csv = report_table(&[("200".into(), report)]);
        assert!(csv.lines().nth(1).unwrap().contains("NA"));
    }

    #[test]
    fn empty_example_list_is_config_error() {
        assert!(matches!(compute_metrics(&[]), Err(EvalError::Config(_))));
    }

    #[test]
    fn greedy_acceptance_distances_are_nondecreasing() {
        let preds = vec![
            record("0", (10, 10, 2), "red", "cone", 30),
            record("1", (40, 40, 3), "blue", "cup", 40),
            record("2", (80, 80, 5), "green", "tent", 50),
        ];
        let truth = vec![
            record("0", (12, 11, 2), "red", "cone", 30),
            record("1", (45, 44, 3), "blue", "cup", 40),
            record("2", (79, 81, 5), "green", "tent", 50),
        ];
        let m = match_objects(&preds, &truth);
        for w in m.pairs.windows(2) {
            assert!(w[0].2 <= w[1].2);
        }
    }

    #[test]
    fn report_table_formats_rows() {
        let rows = vec![
            ("200".to_string(), MetricsReport::from_values(26.0534, 0.22, 0.18, 438.46, 2.81)),
            ("1100".to_string(), MetricsReport::from_values(9.1669, 0.78, 0.58, 182.55, 0.82)),
        ];
        let csv = report_table(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "steps,avg_center_distance,color_accuracy,desc_accuracy,avg_voxel_count_diff,avg_mismatch_per_example"
        );
        assert_eq!(lines[1], "200,26.0534,0.22,0.18,438.46,2.81");
        assert_eq!(lines[2], "1100,9.1669,0.78,0.58,182.55,0.82");
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let csv = report_table(&[]);
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn charts_render_one_svg_per_metric() {
        let rows: Vec<(String, MetricsReport)> = (0..4)
            .map(|i| {
                (
                    format!("{}", 200 + 100 * i),
                    MetricsReport::from_values(
                        20.0 - i as f64,
                        0.2 + 0.1 * i as f64,
                        0.2,
                        400.0,
                        2.0,
                    ),
                )
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let files = render_charts(&rows, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        for file in &files {
            let svg = std::fs::read_to_string(file).unwrap();
            assert_eq!(svg.matches("<circle").count(), 4);
            assert!(svg.contains("<polyline"));
        }
    }

    #[test]
    fn monotone_series_renders_monotone_y() {
        let rows: Vec<(String, MetricsReport)> = (0..5)
            .map(|i| {
                (
                    format!("{}", 200 + 100 * i),
                    MetricsReport::from_values(25.0 - 3.0 * i as f64, 0.5, 0.5, 100.0, 1.0),
                )
            })
            .collect();
        let svg = render_metric_chart(&rows, "avg_center_distance");
        let polyline = svg
            .lines()
            .find(|l| l.contains("<polyline"))
            .expect("polyline present");
        let points_attr = polyline.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<f64> = points_attr
            .split_whitespace()
            .map(|pair| pair.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        // decreasing metric values move down-to-up inverted: y grows
        for w in ys.windows(2) {
            assert!(w[1] > w[0], "svg y not monotone: {ys:?}");
        }
    }

    #[test]
    fn single_row_is_insufficient_for_charts() {
        let rows = vec![("200".to_string(), MetricsReport::from_values(1.0, 1.0, 1.0, 1.0, 1.0))];
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            render_charts(&rows, dir.path()),
            Err(EvalError::InsufficientData(1))
        ));
    }

    /// Brute-force reimplementation: nested loops, no shared helpers.
    fn brute_force_metrics(examples: &[(SceneAnnotation, SceneAnnotation)]) -> MetricsReport {
        let mut all_pairs: Vec<(ObjectRecord, ObjectRecord)> = Vec::new();
        let mut mismatch = 0.0;
        for (pred, truth) in examples {
            let mut pd: Vec<Option<&ObjectRecord>> = pred.objects.iter().map(Some).collect();
            let mut td: Vec<Option<&ObjectRecord>> = truth.objects.iter().map(Some).collect();
            loop {
                let mut best: Option<(usize, usize, f64)> = None;
                for (i, p) in pd.iter().enumerate() {
                    let Some(p) = p else { continue };
                    for (j, t) in td.iter().enumerate() {
                        let Some(t) = t else { continue };
                        let d = p
                            .voxel_coords_center
                            .euclidean_distance(t.voxel_coords_center);
                        let better = match best {
                            None => true,
                            Some((bi, bj, bd)) => {
                                d < bd || (d == bd && (i < bi || (i == bi && j < bj)))
                            }
                        };
                        if better {
                            best = Some((i, j, d));
                        }
                    }
                }
                let Some((i, j, _)) = best else { break };
                all_pairs.push((pd[i].take().unwrap().clone(), td[j].take().unwrap().clone()));
            }
            mismatch += (pred.objects.len() as f64 - truth.objects.len() as f64).abs();
        }
        let n = all_pairs.len();
        let per = |v: f64| (n > 0).then(|| v / n as f64);
        MetricsReport {
            avg_center_distance: per(all_pairs
                .iter()
                .map(|(p, t)| p.voxel_coords_center.euclidean_distance(t.voxel_coords_center))
                .sum()),
            color_accuracy: per(all_pairs.iter().filter(|(p, t)| p.color == t.color).count()
                as f64),
            desc_accuracy: per(all_pairs
                .iter()
                .filter(|(p, t)| p.description == t.description)
                .count() as f64),
            avg_voxel_count_diff: per(all_pairs
                .iter()
                .map(|(p, t)| {
                    (p.number_of_occupied_voxel as f64 - t.number_of_occupied_voxel as f64).abs()
                })
                .sum()),
            avg_mismatch_per_example: mismatch / examples.len() as f64,
            n_examples: examples.len(),
            n_matched_pairs: n,
        }
    }

    proptest! {
        #[test]
        fn matching_is_one_to_one_with_min_pair_count(
            preds in proptest::collection::vec((0u32..100, 0u32..100, 0u32..16), 0..7),
            truths in proptest::collection::vec((0u32..100, 0u32..100, 0u32..16), 0..7),
        ) {
            let preds: Vec<ObjectRecord> = preds
                .iter()
                .enumerate()
                .map(|(i, &c)| record(&i.to_string(), c, "red", "cone", 10))
                .collect();
            let truths: Vec<ObjectRecord> = truths
                .iter()
                .enumerate()
                .map(|(i, &c)| record(&i.to_string(), c, "red", "cone", 10))
                .collect();
            let m = match_objects(&preds, &truths);
            prop_assert_eq!(m.pairs.len(), preds.len().min(truths.len()));
            let mut seen_p = std::collections::HashSet::new();
            let mut seen_t = std::collections::HashSet::new();
            for &(pi, ti, _) in &m.pairs {
                prop_assert!(seen_p.insert(pi));
                prop_assert!(seen_t.insert(ti));
            }
            for w in m.pairs.windows(2) {
                prop_assert!(w[0].2 <= w[1].2);
            }
        }

        #[test]
        fn metrics_agree_with_brute_force(
            seed_objects in proptest::collection::vec(
                (
                    proptest::collection::vec((0u32..100, 0u32..100, 0u32..16), 0..5),
                    proptest::collection::vec((0u32..100, 0u32..100, 0u32..16), 0..5),
                ),
                1..5
            ),
        ) {
            let colors = ["red", "blue", "green"];
            let descs = ["cone", "cup", "tent"];
            let examples: Vec<(SceneAnnotation, SceneAnnotation)> = seed_objects
                .iter()
                .map(|(ps, ts)| {
                    let mk = |cs: &[(u32, u32, u32)]| {
                        scene(
                            cs.iter()
                                .enumerate()
                                .map(|(i, &c)| {
                                    record(
                                        &i.to_string(),
                                        c,
                                        colors[i % 3],
                                        descs[(i / 2) % 3],
                                        (10 + 7 * i) as u64,
                                    )
                                })
                                .collect(),
                        )
                    };
                    (mk(ps), mk(ts))
                })
                .collect();
            let fast = compute_metrics(&examples).unwrap();
            let brute = brute_force_metrics(&examples);
            prop_assert_eq!(fast.n_matched_pairs, brute.n_matched_pairs);
            let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (None, None) => true,
                (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                _ => false,
            };
            prop_assert!(close(fast.avg_center_distance, brute.avg_center_distance));
            prop_assert!(close(fast.color_accuracy, brute.color_accuracy));
            prop_assert!(close(fast.desc_accuracy, brute.desc_accuracy));
            prop_assert!(close(fast.avg_voxel_count_diff, brute.avg_voxel_count_diff));
            prop_assert!(
                (fast.avg_mismatch_per_example - brute.avg_mismatch_per_example).abs() < 1e-9
            );
        }
    }
}
