//! Alarm/ground-truth matching, ROC curves, AUC, per-type detection counts,
//! and the anomaly feature map.
//!
//! Matching works at the event level: consecutive alarm bins collapse into
//! one episode, each episode may confirm at most one event, and an event
//! counts as detected when at least one episode falls inside its span plus
//! slack. False positives are counted per unmatched episode, and the
//! false-positive *rate* divides by the number of non-event bins, so long
//! alarms do not inflate it.

use std::collections::BTreeMap;
use std::io::Write;

use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::{AnomalyEvent, AnomalyType};
use crate::timeseries::FlowSeries;

/// Detected/missed tallies with a per-type breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub per_type: BTreeMap<AnomalyType, TypeCounts>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypeCounts {
    pub true_positives: usize,
    pub false_negatives: usize,
}

/// Collapses a boolean alarm vector into inclusive `(start, end)` episodes.
pub fn collapse_episodes(alarms: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &a) in alarms.iter().enumerate() {
        match (a, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, alarms.len() - 1));
    }
    out
}

fn match_episodes<T: Scalar>(
    episodes: &[(usize, usize)],
    truth: &[AnomalyEvent<T>],
    slack_bins: usize,
) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by_key(|&i| truth[i].start_bin);
    // Each episode confirms at most one event, the earliest whose slack
    // window it touches. An event may absorb several episodes (onset and
    // offset runs of a long event both belong to it).
    let mut confirmed = vec![false; truth.len()];
    for &(s, e) in episodes {
        let hit = order.iter().copied().find(|&i| {
            let ev = &truth[i];
            let lo = ev.start_bin.saturating_sub(slack_bins);
            let hi = ev.end_bin() + slack_bins;
            s <= hi && e >= lo
        });
        match hit {
            Some(i) => confirmed[i] = true,
            None => counts.false_positives += 1,
        }
    }
    for (i, event) in truth.iter().enumerate() {
        let entry = counts.per_type.entry(event.anomaly_type).or_default();
        if confirmed[i] {
            counts.true_positives += 1;
            entry.true_positives += 1;
        } else {
            counts.false_negatives += 1;
            entry.false_negatives += 1;
        }
    }
    counts
}

/// Matches a detection result against ground truth with the given slack.
pub fn match_alarms<T: Scalar>(
    result: &DetectionResult<T>,
    truth: &[AnomalyEvent<T>],
    slack_bins: usize,
) -> ConfusionCounts {
    let episodes = collapse_episodes(&result.alarms);
    match_episodes(&episodes, truth, slack_bins)
}

/// A detection/false-alarm trade-off curve, anchored at (0,0) and (1,1)
/// with both coordinates non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    pub points: Vec<(T, T)>,
}

fn event_bin_count<T: Scalar>(truth: &[AnomalyEvent<T>], n_bins: usize) -> usize {
    let mut covered = vec![false; n_bins];
    for e in truth {
        for c in covered
            .iter_mut()
            .take((e.end_bin() + 1).min(n_bins))
            .skip(e.start_bin.min(n_bins))
        {
            *c = true;
        }
    }
    covered.iter().filter(|&&c| c).count()
}

/// Sweeps the threshold over every distinct finite score and emits the
/// monotone (TPR, FPR) staircase. Infinite scores alarm at every threshold,
/// which puts them first in the sweep.
pub fn roc_curve<T: Scalar>(
    result: &DetectionResult<T>,
    truth: &[AnomalyEvent<T>],
    slack_bins: usize,
) -> Result<RocCurve<T>> {
    if truth.is_empty() {
        return Err(Error::parameter(
            "truth",
            "ROC needs at least one event (TPR is undefined otherwise)",
        ));
    }
    let n = result.n_bins();
    if truth.iter().any(|e| e.end_bin() >= n) {
        return Err(Error::Alignment(format!(
            "an event extends past the {n}-bin result"
        )));
    }
    let n_event_bins = event_bin_count(truth, n);
    let n_normal_bins = n - n_event_bins;
    if n_normal_bins == 0 {
        return Err(Error::parameter(
            "truth",
            "every bin is inside an event; FPR is undefined",
        ));
    }

    let mut thresholds: Vec<T> = result
        .scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    thresholds.dedup();

    let n_events = T::of_usize(truth.len());
    let denom = T::of_usize(n_normal_bins);
    // Monotone staircase along the sweep: descending thresholds grow the
    // alarm set, and both coordinates are clamped to their running maxima.
    // Without the FPR clamp, a nearly saturated alarm pattern collapses into
    // a few giant episodes whose episode-count FPR is spuriously tiny.
    let mut points: Vec<(T, T)> = vec![(T::zero(), T::zero())];
    let mut alarms = vec![false; n];
    let mut best_fpr = T::zero();
    let mut best_tpr = T::zero();
    for &tau in &thresholds {
        for (a, &s) in alarms.iter_mut().zip(&result.scores) {
            *a = s > tau;
        }
        let episodes = collapse_episodes(&alarms);
        let counts = match_episodes(&episodes, truth, slack_bins);
        let tpr = T::of_usize(counts.true_positives) / n_events;
        let fpr = (T::of_usize(counts.false_positives) / denom).min(T::one());
        if fpr > best_fpr {
            best_fpr = fpr;
        }
        if tpr > best_tpr {
            best_tpr = tpr;
        }
        points.push((best_fpr, best_tpr));
    }
    points.push((T::one(), T::one()));
    points.dedup();
    Ok(RocCurve { points })
}

/// Trapezoidal area under the staircase.
pub fn auc<T: Scalar>(curve: &RocCurve<T>) -> T {
    let half = T::of(0.5);
    let mut area = T::zero();
    for w in curve.points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        area += (x1 - x0) * (y0 + y1) * half;
    }
    area
}

/// Best TPR attainable at or below the given FPR.
pub fn tpr_at_fpr<T: Scalar>(curve: &RocCurve<T>, fpr: T) -> T {
    let mut best = T::zero();
    for &(x, y) in &curve.points {
        if x <= fpr && y > best {
            best = y;
        }
    }
    best
}

/// Per-type true-positive table across detectors (rows: types plus total).
#[derive(Debug, Clone)]
pub struct CountsTable {
    pub detector_names: Vec<String>,
    pub labeled: BTreeMap<AnomalyType, usize>,
    /// `cells[type][detector]` true positives; the extra last row is total.
    pub rows: Vec<(String, Vec<usize>)>,
}

/// Counts detected events per type for each detector at its configured
/// threshold.
pub fn per_type_counts<T: Scalar>(
    results: &[(&str, &DetectionResult<T>)],
    truth: &[AnomalyEvent<T>],
    slack_bins: usize,
) -> CountsTable {
    let mut labeled: BTreeMap<AnomalyType, usize> = BTreeMap::new();
    for e in truth {
        *labeled.entry(e.anomaly_type).or_default() += 1;
    }
    let per_detector: Vec<ConfusionCounts> = results
        .iter()
        .map(|(_, r)| match_alarms(r, truth, slack_bins))
        .collect();
    let mut rows = Vec::new();
    for &ty in labeled.keys() {
        let cells: Vec<usize> = per_detector
            .iter()
            .map(|c| c.per_type.get(&ty).map_or(0, |t| t.true_positives))
            .collect();
        rows.push((ty.as_str().to_string(), cells));
    }
    let totals: Vec<usize> = per_detector.iter().map(|c| c.true_positives).collect();
    rows.push(("total".to_string(), totals));
    CountsTable {
        detector_names: results.iter().map(|(n, _)| n.to_string()).collect(),
        labeled,
        rows,
    }
}

/// One event in packet-delta / flow-count coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapPoint<T> {
    pub delta_packets: T,
    pub flow_count: T,
    pub anomaly_type: AnomalyType,
}

/// Maps each event to the largest consecutive-bin packet change over its
/// span and the largest distinct-count feature level within it.
pub fn feature_map<T: Scalar>(
    series: &FlowSeries<T>,
    truth: &[AnomalyEvent<T>],
) -> Result<Vec<FeatureMapPoint<T>>> {
    let n = series.n_bins();
    let m = series.n_features();
    if truth.iter().any(|e| e.end_bin() >= n) {
        return Err(Error::Alignment(format!(
            "an event extends past the {n}-bin series"
        )));
    }
    let count_features: Vec<usize> = if m >= 2 { (1..m).collect() } else { vec![0] };
    Ok(truth
        .iter()
        .map(|e| {
            let mut delta = T::zero();
            for b in e.start_bin..=e.end_bin() {
                if b == 0 {
                    continue;
                }
                let d = (series.value(b, 0) - series.value(b - 1, 0)).abs();
                if d > delta {
                    delta = d;
                }
            }
            let mut flows = T::zero();
            for b in e.start_bin..=e.end_bin() {
                for &q in &count_features {
                    let v = series.value(b, q);
                    if v > flows {
                        flows = v;
                    }
                }
            }
            FeatureMapPoint {
                delta_packets: delta,
                flow_count: flows,
                anomaly_type: e.anomaly_type,
            }
        })
        .collect())
}

/// Writes `fpr,tpr` rows.
pub fn write_roc<T: Scalar, W: Write>(curve: &RocCurve<T>, out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect roc v1")?;
    writeln!(out, "fpr,tpr")?;
    for &(fpr, tpr) in &curve.points {
        writeln!(out, "{},{}", fpr.as_f64(), tpr.as_f64())?;
    }
    Ok(())
}

/// Writes the per-type counts table: `type,labeled,<detector...>`.
pub fn write_counts<W: Write>(table: &CountsTable, out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect counts v1")?;
    write!(out, "type,labeled")?;
    for name in &table.detector_names {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (label, cells) in &table.rows {
        let labeled = if label == "total" {
            table.labeled.values().sum::<usize>()
        } else {
            table
                .labeled
                .iter()
                .find(|(t, _)| t.as_str() == label)
                .map_or(0, |(_, &c)| c)
        };
        write!(out, "{label},{labeled}")?;
        for c in cells {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes `delta_packets,flow_count,type` rows.
pub fn write_feature_map<T: Scalar, W: Write>(
    points: &[FeatureMapPoint<T>],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "# flowspect feature_map v1")?;
    writeln!(out, "delta_packets,flow_count,type")?;
    for p in points {
        writeln!(
            out,
            "{},{},{}",
            p.delta_packets.as_f64(),
            p.flow_count.as_f64(),
            p.anomaly_type
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn event(ty: AnomalyType, start: usize, dur: usize) -> AnomalyEvent<f64> {
        AnomalyEvent {
            anomaly_type: ty,
            start_bin: start,
            duration_bins: dur,
            magnitude: 1.0,
        }
    }

    fn result_from_alarms(alarms: &[bool]) -> DetectionResult<f64> {
        let scores: Vec<f64> = alarms.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        DetectionResult::new("test", scores, 0.5, 0, 1)
    }

    #[test]
    fn collapse_runs() {
        let alarms = [false, true, true, false, true, false, true];
        assert_eq!(collapse_episodes(&alarms), vec![(1, 2), (4, 4), (6, 6)]);
        assert_eq!(collapse_episodes(&[true, true]), vec![(0, 1)]);
        assert!(collapse_episodes(&[false; 4]).is_empty());
    }

    #[test]
    fn exact_cover_is_one_tp() {
        let mut alarms = vec![false; 20];
        for a in alarms.iter_mut().skip(5).take(3) {
            *a = true;
        }
        let res = result_from_alarms(&alarms);
        let truth = vec![event(AnomalyType::Dos, 5, 3)];
        let c = match_alarms(&res, &truth, 0);
        assert_eq!(
            (c.true_positives, c.false_positives, c.false_negatives),
            (1, 0, 0)
        );
        let t = c.per_type[&AnomalyType::Dos];
        assert_eq!((t.true_positives, t.false_negatives), (1, 0));
    }

    #[test]
    fn silent_detector_all_false_negatives() {
        let res = result_from_alarms(&[false; 30]);
        let truth = vec![
            event(AnomalyType::Dos, 2, 2),
            event(AnomalyType::PortScan, 10, 1),
            event(AnomalyType::LinkOutage, 20, 4),
        ];
        let c = match_alarms(&res, &truth, 1);
        assert_eq!(
            (c.true_positives, c.false_positives, c.false_negatives),
            (0, 0, 3)
        );
    }

    #[test]
    fn one_episode_matches_at_most_one_event() {
        // A single long episode spanning two events confirms only the first.
        let mut alarms = vec![false; 30];
        for a in alarms.iter_mut().skip(5).take(12) {
            *a = true;
        }
        let res = result_from_alarms(&alarms);
        let truth = vec![
            event(AnomalyType::Dos, 6, 2),
            event(AnomalyType::PortScan, 14, 2),
        ];
        let c = match_alarms(&res, &truth, 0);
        assert_eq!(c.true_positives, 1);
        assert_eq!(c.false_negatives, 1);
        assert_eq!(c.false_positives, 0);
    }

    /// Brute-force matcher with the same policy written independently.
    fn brute_force_counts(
        alarms: &[bool],
        truth: &[AnomalyEvent<f64>],
        slack: usize,
    ) -> (usize, usize, usize) {
        // Episodes by scanning every index.
        let mut episodes: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < alarms.len() {
            if alarms[i] {
                let mut j = i;
                while j + 1 < alarms.len() && alarms[j + 1] {
                    j += 1;
                }
                episodes.push((i, j));
                i = j + 1;
            } else {
                i += 1;
            }
        }
        let mut order: Vec<usize> = (0..truth.len()).collect();
        order.sort_by_key(|&i| truth[i].start_bin);
        let mut confirmed = vec![false; truth.len()];
        let mut fp = 0;
        for &(s, en) in &episodes {
            let mut hit = None;
            for &ei in &order {
                let e = &truth[ei];
                let lo = e.start_bin.saturating_sub(slack) as i64;
                let hi = (e.end_bin() + slack) as i64;
                if (s as i64) <= hi && (en as i64) >= lo {
                    hit = Some(ei);
                    break;
                }
            }
            match hit {
                Some(ei) => confirmed[ei] = true,
                None => fp += 1,
            }
        }
        let tp = confirmed.iter().filter(|&&c| c).count();
        let fneg = truth.len() - tp;
        (tp, fp, fneg)
    }

    #[test]
    fn random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = 60;
            let alarms: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.15).collect();
            let mut truth = Vec::new();
            let mut pos = 0usize;
            while pos + 4 < n && truth.len() < 6 {
                pos += rng.random_range(1..10);
                let dur = rng.random_range(1..4);
                if pos + dur >= n {
                    break;
                }
                truth.push(event(AnomalyType::Dos, pos, dur));
                pos += dur;
            }
            if truth.is_empty() {
                continue;
            }
            let res = result_from_alarms(&alarms);
            let c = match_alarms(&res, &truth, 0);
            let (tp, fp, fneg) = brute_force_counts(&alarms, &truth, 0);
            assert_eq!(
                (c.true_positives, c.false_positives, c.false_negatives),
                (tp, fp, fneg)
            );
            assert_eq!(c.true_positives + c.false_negatives, truth.len());
        }
    }

    #[test]
    fn perfect_detector_has_auc_one() {
        let n = 50;
        let truth = vec![
            event(AnomalyType::Dos, 10, 2),
            event(AnomalyType::Dos, 30, 3),
        ];
        let mut scores = vec![0.0f64; n];
        for e in &truth {
            for s in scores.iter_mut().skip(e.start_bin).take(e.duration_bins) {
                *s = 1.0;
            }
        }
        let res = DetectionResult::new("perfect", scores, 0.5, 0, 1);
        let curve = roc_curve(&res, &truth, 0).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)), "{:?}", curve.points);
        assert!(close(auc(&curve), 1.0, 1e-12));
    }

    #[test]
    fn constant_scores_auc_half() {
        let res = DetectionResult::new("flat", vec![2.0; 40], 3.0, 0, 1);
        let truth = vec![event(AnomalyType::Dos, 5, 2)];
        let curve = roc_curve(&res, &truth, 0).unwrap();
        assert!(close(auc(&curve), 0.5, 1e-12), "{:?}", curve.points);
    }

    #[test]
    fn roc_rejects_empty_truth() {
        let res = result_from_alarms(&[false; 10]);
        assert!(matches!(
            roc_curve(&res, &[], 0),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn roc_rejects_misaligned_truth() {
        let res = result_from_alarms(&[false; 10]);
        let truth = vec![event(AnomalyType::Dos, 9, 5)];
        assert!(matches!(
            roc_curve(&res, &truth, 0),
            Err(Error::Alignment(_))
        ));
    }

    /// Exhaustive per-threshold enumeration as the oracle.
    #[test]
    fn roc_matches_exhaustive_threshold_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 40;
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.random::<f64>() * 8.0).round())
            .collect();
        let truth = vec![
            event(AnomalyType::Dos, 8, 3),
            event(AnomalyType::PortScan, 25, 2),
        ];
        let res = DetectionResult::new("r", scores.clone(), 1.0, 0, 1);
        let curve = roc_curve(&res, &truth, 1).unwrap();

        let n_event_bins = 5;
        let denom = (n - n_event_bins) as f64;
        let mut taus = scores.clone();
        taus.sort_by(|a, b| b.partial_cmp(a).unwrap());
        taus.dedup();
        let mut expect: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        let (mut best_f, mut best_t) = (0.0f64, 0.0f64);
        for &tau in &taus {
            let alarms: Vec<bool> = scores.iter().map(|&s| s > tau).collect();
            let (tp, fp, _) = brute_force_counts(&alarms, &truth, 1);
            best_f = best_f.max(fp as f64 / denom);
            best_t = best_t.max(tp as f64 / 2.0);
            expect.push((best_f, best_t));
        }
        expect.push((1.0, 1.0));
        expect.dedup();
        assert_eq!(curve.points, expect);

        // Invariance under score doubling.
        let doubled =
            DetectionResult::new("r2", scores.iter().map(|&s| 2.0 * s).collect(), 1.0, 0, 1);
        let curve2 = roc_curve(&doubled, &truth, 1).unwrap();
        assert_eq!(curve.points, curve2.points);
    }

    #[test]
    fn auc_trapezoid_examples() {
        let diag = RocCurve {
            points: vec![(0.0f64, 0.0), (1.0, 1.0)],
        };
        assert!(close(auc(&diag), 0.5, 1e-15));
        let perfect = RocCurve {
            points: vec![(0.0f64, 0.0), (0.0, 1.0), (1.0, 1.0)],
        };
        assert!(close(auc(&perfect), 1.0, 1e-15));
        // 0.2·0.8/2 + 0.8·(0.8+1)/2
        let three = RocCurve {
            points: vec![(0.0f64, 0.0), (0.2, 0.8), (1.0, 1.0)],
        };
        assert!(close(auc(&three), 0.80, 1e-12));
    }

    #[test]
    fn tpr_at_fpr_walks_staircase() {
        let curve = RocCurve {
            points: vec![(0.0f64, 0.0), (0.0, 0.6), (0.01, 0.9), (1.0, 1.0)],
        };
        assert!(close(tpr_at_fpr(&curve, 1e-4), 0.6, 1e-12));
        assert!(close(tpr_at_fpr(&curve, 0.02), 0.9, 1e-12));
    }

    #[test]
    fn per_type_counts_table() {
        let truth = vec![
            event(AnomalyType::Dos, 5, 2),
            event(AnomalyType::PortScan, 15, 2),
        ];
        let mut alarms = vec![false; 30];
        alarms[5] = true;
        let hits = result_from_alarms(&alarms);
        let silent = result_from_alarms(&[false; 30]);
        let table = per_type_counts(&[("a", &hits), ("b", &silent)], &truth, 0);
        assert_eq!(table.detector_names, vec!["a", "b"]);
        let dos_row = table.rows.iter().find(|(l, _)| l == "dos").unwrap();
        assert_eq!(dos_row.1, vec![1, 0]);
        let total = table.rows.iter().find(|(l, _)| l == "total").unwrap();
        assert_eq!(total.1, vec![1, 0]);
    }

    #[test]
    fn feature_map_dos_and_outage() {
        // packets: level 100, one-bin spike by 40 at bin 10, outage at 20-21.
        let mut packets = vec![100.0f64; 30];
        packets[10] += 40.0;
        for p in packets.iter_mut().skip(20).take(2) {
            *p = 0.0;
        }
        let flows: Vec<f64> = vec![7.0; 30];
        let s = FlowSeries::from_columns(
            &[packets, flows],
            1,
            vec!["packets".into(), "flows".into()],
            0,
        )
        .unwrap();
        let truth = vec![
            event(AnomalyType::Dos, 10, 1),
            event(AnomalyType::LinkOutage, 20, 2),
        ];
        let points = feature_map(&s, &truth).unwrap();
        assert!(close(points[0].delta_packets, 40.0, 1e-12));
        assert!(close(points[1].delta_packets, 100.0, 1e-12));
        assert!(close(points[0].flow_count, 7.0, 1e-12));
        assert!(feature_map(&s, &[]).unwrap().is_empty());
    }
}
