//! Investment periods, chronological timeseries, and operational timepoints,
//! plus the weighting that scales sampled operation up to full periods.
//!
//! Chronology exists only within a timeseries. The predecessor of the first
//! timepoint wraps to the last of the same series (circular) unless the
//! series disables wrapping.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Mean Gregorian year in hours; the reference length a period's sampled
/// hours are checked against.
pub const YEAR_HOURS: f64 = 8766.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PeriodId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeriesId(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimepointId(pub usize);

#[derive(Debug, Clone)]
pub struct Period {
    pub label: String,
    pub start_year: i64,
    pub length_years: f64,
}

#[derive(Debug, Clone)]
pub struct Timeseries {
    pub id: String,
    pub period: PeriodId,
    pub num_timepoints: usize,
    pub tp_duration_hours: f64,
    /// Number of occurrences of this series in its period (fractional
    /// occurrences allowed).
    pub scale_to_period: f64,
    pub circular: bool,
}

#[derive(Debug, Clone)]
pub struct Timepoint {
    pub id: String,
    pub series: SeriesId,
    pub position: usize,
    pub timestamp_label: String,
}

/// Per-period outcome of [`TimescaleSet::validate`].
#[derive(Debug, Clone)]
pub struct PeriodCoverage {
    pub period: String,
    pub represented_hours: f64,
    pub target_hours: f64,
    pub relative_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct TimescaleReport {
    pub periods: Vec<PeriodCoverage>,
    pub pass: bool,
}

/// Validated, canonically ordered timescale data. Periods are sorted by start
/// year, series by (period, id), timepoints by (series, position), so models
/// built from the same data are identical regardless of input row order.
#[derive(Debug, Clone)]
pub struct TimescaleSet {
    periods: Vec<Period>,
    series: Vec<Timeseries>,
    timepoints: Vec<Timepoint>,
    series_tps: Vec<Vec<TimepointId>>,
    period_tps: Vec<Vec<TimepointId>>,
}

impl TimescaleSet {
    pub fn build(
        mut periods: Vec<Period>,
        series_rows: Vec<(String, String, usize, f64, f64, bool)>,
        timepoint_rows: Vec<(String, String, usize, String)>,
    ) -> Result<TimescaleSet> {
        periods.sort_by_key(|p| p.start_year);
        for pair in periods.windows(2) {
            let end = pair[0].start_year as f64 + pair[0].length_years;
            if end > pair[1].start_year as f64 {
                return Err(Error::IntegrityError(format!(
                    "periods `{}` and `{}` overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        let period_index: BTreeMap<String, PeriodId> = periods
            .iter()
            .enumerate()
            .map(|(i, p)| (p.label.clone(), PeriodId(i)))
            .collect();

        let mut series: Vec<Timeseries> = Vec::with_capacity(series_rows.len());
        for (id, period_label, num_timepoints, dur, scale, circular) in series_rows {
            let Some(&period) = period_index.get(&period_label) else {
                return Err(Error::OrphanTimeseries {
                    timeseries: id,
                    period: period_label,
                });
            };
            series.push(Timeseries {
                id,
                period,
                num_timepoints,
                tp_duration_hours: dur,
                scale_to_period: scale,
                circular,
            });
        }
        series.sort_by(|a, b| (a.period, &a.id).cmp(&(b.period, &b.id)));
        let series_index: BTreeMap<String, SeriesId> = series
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), SeriesId(i)))
            .collect();

        let mut timepoints: Vec<Timepoint> = Vec::with_capacity(timepoint_rows.len());
        for (id, series_id, position, label) in timepoint_rows {
            let Some(&sid) = series_index.get(&series_id) else {
                return Err(Error::OrphanTimepoint {
                    timepoint: id,
                    timeseries: series_id,
                });
            };
            timepoints.push(Timepoint {
                id,
                series: sid,
                position,
                timestamp_label: label,
            });
        }
        timepoints.sort_by_key(|t| (t.series, t.position));

        let mut series_tps: Vec<Vec<TimepointId>> = vec![Vec::new(); series.len()];
        for (i, tp) in timepoints.iter().enumerate() {
            series_tps[tp.series.0].push(TimepointId(i));
        }
        for (s, tps) in series.iter().zip(&series_tps) {
            if tps.len() != s.num_timepoints {
                return Err(Error::NonContiguousPositions(s.id.clone()));
            }
            for (expect, &tp) in tps.iter().enumerate() {
                if timepoints[tp.0].position != expect {
                    return Err(Error::NonContiguousPositions(s.id.clone()));
                }
            }
        }

        let mut period_tps: Vec<Vec<TimepointId>> = vec![Vec::new(); periods.len()];
        for (i, tp) in timepoints.iter().enumerate() {
            let p = series[tp.series.0].period;
            period_tps[p.0].push(TimepointId(i));
        }

        Ok(TimescaleSet {
            periods,
            series,
            timepoints,
            series_tps,
            period_tps,
        })
    }

    pub fn from_dataset(data: &Dataset) -> Result<TimescaleSet> {
        const MODULE: &str = "timescales";
        let period_table = data.require(MODULE, "periods")?;
        let mut periods = Vec::new();
        for r in period_table.row_ids() {
            periods.push(Period {
                label: period_table.get(r, "period")?.to_string(),
                start_year: period_table.get_i64(r, "start_year")?,
                length_years: period_table.get_f64(r, "length_years")?,
            });
        }

        let series_table = data.require(MODULE, "timeseries")?;
        let mut series_rows = Vec::new();
        for r in series_table.row_ids() {
            series_rows.push((
                series_table.get(r, "timeseries")?.to_string(),
                series_table.get(r, "period")?.to_string(),
                series_table.get_usize(r, "num_timepoints")?,
                series_table.get_f64(r, "tp_duration_hours")?,
                series_table.get_f64(r, "scale_to_period")?,
                series_table.get_bool_or(r, "circular", true)?,
            ));
        }

        let tp_table = data.require(MODULE, "timepoints")?;
        let mut tp_rows = Vec::new();
        for r in tp_table.row_ids() {
            let id = tp_table.get(r, "timepoint")?.to_string();
            let label = tp_table
                .get_opt(r, "timestamp_label")
                .unwrap_or(&id)
                .to_string();
            tp_rows.push((
                id,
                tp_table.get(r, "timeseries")?.to_string(),
                tp_table.get_usize(r, "position")?,
                label,
            ));
        }
        TimescaleSet::build(periods, series_rows, tp_rows)
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn period(&self, p: PeriodId) -> &Period {
        &self.periods[p.0]
    }

    pub fn period_ids(&self) -> impl Iterator<Item = PeriodId> {
        (0..self.periods.len()).map(PeriodId)
    }

    pub fn period_by_label(&self, label: &str) -> Option<PeriodId> {
        self.periods
            .iter()
            .position(|p| p.label == label)
            .map(PeriodId)
    }

    pub fn series(&self, s: SeriesId) -> &Timeseries {
        &self.series[s.0]
    }

    pub fn series_ids(&self) -> impl Iterator<Item = SeriesId> {
        (0..self.series.len()).map(SeriesId)
    }

    pub fn series_by_id(&self, id: &str) -> Option<SeriesId> {
        self.series.iter().position(|s| s.id == id).map(SeriesId)
    }

    pub fn timepoint(&self, tp: TimepointId) -> &Timepoint {
        &self.timepoints[tp.0]
    }

    pub fn timepoint_ids(&self) -> impl Iterator<Item = TimepointId> {
        (0..self.timepoints.len()).map(TimepointId)
    }

    pub fn num_timepoints(&self) -> usize {
        self.timepoints.len()
    }

    pub fn timepoint_by_id(&self, id: &str) -> Option<TimepointId> {
        self.timepoints
            .iter()
            .position(|t| t.id == id)
            .map(TimepointId)
    }

    pub fn timepoints_in_series(&self, s: SeriesId) -> &[TimepointId] {
        &self.series_tps[s.0]
    }

    pub fn timepoints_in_period(&self, p: PeriodId) -> &[TimepointId] {
        &self.period_tps[p.0]
    }

    pub fn period_of_timepoint(&self, tp: TimepointId) -> PeriodId {
        self.series[self.timepoints[tp.0].series.0].period
    }

    pub fn duration_hours(&self, tp: TimepointId) -> f64 {
        self.series[self.timepoints[tp.0].series.0].tp_duration_hours
    }

    /// Hours per period this timepoint stands for:
    /// `tp_duration_hours * scale_to_period` of its series.
    pub fn weight(&self, tp: TimepointId) -> f64 {
        let s = &self.series[self.timepoints[tp.0].series.0];
        s.tp_duration_hours * s.scale_to_period
    }

    /// Predecessor within the series; the first timepoint wraps to the last
    /// unless the series is non-circular.
    pub fn previous(&self, tp: TimepointId) -> Option<TimepointId> {
        let t = &self.timepoints[tp.0];
        let s = &self.series[t.series.0];
        let tps = &self.series_tps[t.series.0];
        if t.position == 0 {
            if s.circular {
                tps.last().copied().filter(|&last| last != tp)
            } else {
                None
            }
        } else {
            Some(tps[t.position - 1])
        }
    }

    pub fn period_hours(&self, p: PeriodId) -> f64 {
        self.periods[p.0].length_years * YEAR_HOURS
    }

    /// Total hours represented by the sampled series of period `p`:
    /// `sum(scale * num_timepoints * duration)`.
    pub fn represented_hours(&self, p: PeriodId) -> f64 {
        self.series
            .iter()
            .filter(|s| s.period == p)
            .map(|s| s.scale_to_period * s.num_timepoints as f64 * s.tp_duration_hours)
            .sum()
    }

    /// Checks that each period's represented hours are within `tolerance`
    /// (relative) of its calendar hours.
    pub fn validate(&self, tolerance: f64) -> TimescaleReport {
        assert!(tolerance > 0.0, "tolerance must be positive");
        let mut rows = Vec::with_capacity(self.periods.len());
        let mut pass = true;
        for p in self.period_ids() {
            let target = self.period_hours(p);
            let represented = self.represented_hours(p);
            let deviation = (represented - target).abs() / target;
            let ok = deviation <= tolerance;
            pass &= ok;
            rows.push(PeriodCoverage {
                period: self.periods[p.0].label.clone(),
                represented_hours: represented,
                target_hours: target,
                relative_deviation: deviation,
                pass: ok,
            });
        }
        TimescaleReport {
            periods: rows,
            pass,
        }
    }
}

/// Loads the period/timeseries/timepoint tables into the build context.
#[derive(Debug, Default)]
pub struct TimescalesModule;

impl crate::compose::EngineModule for TimescalesModule {
    fn name(&self) -> &'static str {
        "timescales"
    }

    fn callbacks(&self) -> &'static [crate::compose::Callback] {
        use crate::compose::Callback::*;
        &[DefineArguments, LoadInputs]
    }

    fn option_specs(&self) -> &'static [crate::compose::OptionSpec] {
        &[crate::compose::OptionSpec {
            key: "timescale_tolerance",
            default: "0.005",
            help: "relative tolerance for per-period sampled-hour coverage in validate",
        }]
    }

    fn input_tables(&self) -> &'static [(&'static str, bool)] {
        &[
            ("periods", true),
            ("timeseries", true),
            ("timepoints", true),
        ]
    }

    fn load_inputs(&self, data: &Dataset, ctx: &mut crate::compose::BuildContext) -> Result<()> {
        ctx.timescales = Some(TimescaleSet::from_dataset(data)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One period of `length` years with `n_series` daily series of
    /// `tps_per_series` timepoints.
    pub(crate) fn sampled_set(
        length_years: f64,
        n_series: usize,
        tps_per_series: usize,
        dur: f64,
        scale: f64,
    ) -> TimescaleSet {
        let periods = vec![Period {
            label: "2025".into(),
            start_year: 2025,
            length_years,
        }];
        let mut series = Vec::new();
        let mut tps = Vec::new();
        for s in 0..n_series {
            let sid = format!("d{s:02}");
            series.push((sid.clone(), "2025".into(), tps_per_series, dur, scale, true));
            for pos in 0..tps_per_series {
                tps.push((format!("{sid}h{pos:02}"), sid.clone(), pos, String::new()));
            }
        }
        TimescaleSet::build(periods, series, tps).unwrap()
    }

    #[test]
    fn full_resolution_year_is_valid() {
        let set = sampled_set(1.0, 1, 8760, 1.0, 1.0);
        assert_eq!(set.represented_hours(PeriodId(0)), 8760.0);
        let report = set.validate(0.005);
        assert!(report.pass);
        // 8760 vs 8766 -> deviation ~ 0.000684
        assert!((report.periods[0].relative_deviation - 6.0 / 8766.0).abs() < 1e-12);
    }

    #[test]
    fn twelve_sample_days_scale_152_covers_five_years() {
        let set = sampled_set(5.0, 12, 24, 1.0, 152.0);
        assert_eq!(set.represented_hours(PeriodId(0)), 43_776.0);
        assert_eq!(set.period_hours(PeriodId(0)), 43_830.0);
        let report = set.validate(0.005);
        assert!(report.pass);
        assert!((report.periods[0].relative_deviation - 54.0 / 43_830.0).abs() < 1e-12);
    }

    #[test]
    fn gross_undersampling_fails() {
        let set = sampled_set(1.0, 1, 24, 1.0, 1.0);
        let report = set.validate(0.005);
        assert!(!report.pass);
        assert!(report.periods[0].relative_deviation > 0.99);
    }

    #[test]
    fn weights_scale_with_duration_and_occurrences() {
        let set = sampled_set(5.0, 1, 24, 1.0, 152.0);
        assert_eq!(set.weight(TimepointId(0)), 152.0);
        let set = sampled_set(1.0, 1, 1, 24.0, 1.0);
        assert_eq!(set.weight(TimepointId(0)), 24.0);
        let set = sampled_set(1.0, 1, 4, 0.5, 10.0);
        assert_eq!(set.weight(TimepointId(0)), 5.0);
    }

    #[test]
    fn weight_sum_equals_represented_hours() {
        let set = sampled_set(5.0, 12, 24, 1.0, 152.0);
        let total: f64 = set.timepoint_ids().map(|tp| set.weight(tp)).sum();
        assert!((total - set.represented_hours(PeriodId(0))).abs() < 1e-9);
    }

    #[test]
    fn predecessors_chain_and_wrap() {
        let set = sampled_set(1.0, 1, 3, 8.0, 365.0);
        let tps: Vec<TimepointId> = set.timepoint_ids().collect();
        assert_eq!(set.previous(tps[1]), Some(tps[0]));
        assert_eq!(set.previous(tps[2]), Some(tps[1]));
        assert_eq!(set.previous(tps[0]), Some(tps[2]));
        // single-timepoint circular series has no distinct predecessor
        let single = sampled_set(1.0, 1, 1, 24.0, 365.0);
        assert_eq!(single.previous(TimepointId(0)), None);
    }

    #[test]
    fn orphan_references_are_rejected() {
        let periods = vec![Period {
            label: "2025".into(),
            start_year: 2025,
            length_years: 1.0,
        }];
        let err = TimescaleSet::build(
            periods.clone(),
            vec![("d0".into(), "2030".into(), 1, 24.0, 365.0, true)],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OrphanTimeseries { .. }));

        let err = TimescaleSet::build(
            periods,
            vec![("d0".into(), "2025".into(), 1, 24.0, 365.0, true)],
            vec![("t0".into(), "nope".into(), 0, String::new())],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OrphanTimepoint { .. }));
    }

    #[test]
    fn non_contiguous_positions_rejected() {
        let periods = vec![Period {
            label: "2025".into(),
            start_year: 2025,
            length_years: 1.0,
        }];
        let err = TimescaleSet::build(
            periods,
            vec![("d0".into(), "2025".into(), 2, 12.0, 365.0, true)],
            vec![
                ("t0".into(), "d0".into(), 0, String::new()),
                ("t2".into(), "d0".into(), 2, String::new()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonContiguousPositions(_)));
    }

    #[test]
    fn doubling_scale_doubles_weights_and_hours() {
        let a = sampled_set(5.0, 12, 24, 1.0, 152.0);
        let b = sampled_set(5.0, 12, 24, 1.0, 304.0);
        for tp in a.timepoint_ids() {
            assert!((b.weight(tp) - 2.0 * a.weight(tp)).abs() < 1e-12);
        }
        assert!(
            (b.represented_hours(PeriodId(0)) - 2.0 * a.represented_hours(PeriodId(0))).abs()
                < 1e-9
        );
    }
}
