//! Poisson catastrophe-intensity estimation from historical disaster
//! counts: closed-form MLE, Fisher-information standard error, and the
//! confidence-interval segment that feeds the uncertainty box.

use crate::error::{Error, Result};

/// Period granularity of a disaster-count series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodKind {
    Yearly,
    Monthly,
}

/// Disaster counts per contiguous period, yearly (`YYYY`) or monthly
/// (`YYYY-MM`). Multiple events in one period are counted individually.
#[derive(Debug, Clone, PartialEq)]
pub struct DisasterCounts {
    pub periods: Vec<String>,
    pub counts: Vec<u64>,
    pub kind: PeriodKind,
}

fn parse_period(s: &str) -> Result<(PeriodKind, i64)> {
    let bytes = s.as_bytes();
    let is_year = s.len() == 4 && bytes.iter().all(|b| b.is_ascii_digit());
    let is_month = s.len() == 7
        && bytes[4] == b'-'
        && bytes[..4].iter().all(|b| b.is_ascii_digit())
        && bytes[5..].iter().all(|b| b.is_ascii_digit());
    if is_year {
        let y: i64 = s.parse().unwrap();
        Ok((PeriodKind::Yearly, y))
    } else if is_month {
        let y: i64 = s[..4].parse().unwrap();
        let m: i64 = s[5..].parse().unwrap();
        if !(1..=12).contains(&m) {
            return Err(Error::Data(format!("period '{}' has month outside 1..=12", s)));
        }
        Ok((PeriodKind::Monthly, y * 12 + (m - 1)))
    } else {
        Err(Error::Data(format!("period '{}' is neither YYYY nor YYYY-MM", s)))
    }
}

fn format_period(kind: PeriodKind, ordinal: i64) -> String {
    match kind {
        PeriodKind::Yearly => format!("{:04}", ordinal),
        PeriodKind::Monthly => format!("{:04}-{:02}", ordinal.div_euclid(12), ordinal.rem_euclid(12) + 1),
    }
}

impl DisasterCounts {
    pub fn periods_per_year(&self) -> f64 {
        match self.kind {
            PeriodKind::Yearly => 1.0,
            PeriodKind::Monthly => 12.0,
        }
    }

    pub fn total_events(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_years(&self) -> f64 {
        self.counts.len() as f64 / self.periods_per_year()
    }

    /// Builds a series from period labels and counts, enforcing a single
    /// granularity and contiguity. Gaps are filled with zero-count periods
    /// only when `fill_gaps` is set; otherwise they are an error.
    pub fn new(periods: Vec<String>, counts: Vec<u64>, fill_gaps: bool) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::Data("disaster series has no periods".into()));
        }
        if periods.len() != counts.len() {
            return Err(Error::Data("periods and counts have different lengths".into()));
        }
        let (kind, mut prev) = parse_period(&periods[0])?;
        let mut out_periods = vec![periods[0].clone()];
        let mut out_counts = vec![counts[0]];
        for (label, &count) in periods.iter().zip(counts.iter()).skip(1) {
            let (k, ord) = parse_period(label)?;
            if k != kind {
                return Err(Error::Data(format!(
                    "mixed period granularity: '{}' does not match the series kind",
                    label
                )));
            }
            if ord <= prev {
                return Err(Error::Data(format!(
                    "periods must be strictly increasing; '{}' is out of order",
                    label
                )));
            }
            if ord > prev + 1 {
                if !fill_gaps {
                    return Err(Error::Data(format!(
                        "gap before period '{}'; pass fill_gaps to treat missing periods as zero counts",
                        label
                    )));
                }
                for miss in (prev + 1)..ord {
                    out_periods.push(format_period(kind, miss));
                    out_counts.push(0);
                }
            }
            out_periods.push(label.clone());
            out_counts.push(count);
            prev = ord;
        }
        Ok(DisasterCounts { periods: out_periods, counts: out_counts, kind })
    }

    /// Reads the `period,count` CSV schema.
    pub fn read_csv(path: &std::path::Path, fill_gaps: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {}", path.display(), e)))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("{}: bad header: {}", path.display(), e)))?;
        if headers.len() != 2 || &headers[0] != "period" || &headers[1] != "count" {
            return Err(Error::Data(format!(
                "disaster CSV header must be 'period,count', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut periods = Vec::new();
        let mut counts = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record =
                record.map_err(|e| Error::Data(format!("row {}: unreadable record: {}", row, e)))?;
            if record.len() != 2 {
                return Err(Error::Data(format!("row {}: expected 2 columns", row)));
            }
            let count: u64 = record[1]
                .parse()
                .map_err(|_| Error::Data(format!("row {} column 2: count must be a nonnegative integer", row)))?;
            periods.push(record[0].to_string());
            counts.push(count);
        }
        DisasterCounts::new(periods, counts, fill_gaps)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "period,count")?;
        for (p, c) in self.periods.iter().zip(&self.counts) {
            writeln!(f, "{},{}", p, c)?;
        }
        Ok(())
    }
}

/// Poisson intensity estimate with its Fisher-information standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityEstimate {
    /// Events per year.
    pub lambda_hat: f64,
    pub std_error: f64,
    /// `lambda_hat +/- 1.96 * std_error`.
    pub ci95: (f64, f64),
    /// Observation span in years.
    pub total_years: f64,
    pub total_events: u64,
}

impl IntensityEstimate {
    /// True when the series had no events, so the estimate violates the
    /// positive-intensity model invariant and needs wider data or a floor.
    pub fn is_degenerate(&self) -> bool {
        self.lambda_hat == 0.0
    }
}

/// Closed-form Poisson MLE: total events over total exposure years, with
/// `SE = sqrt(lambda / years)` from the Fisher information.
pub fn estimate_intensity(counts: &DisasterCounts) -> Result<IntensityEstimate> {
    let years = counts.total_years();
    if !(years > 0.0) {
        return Err(Error::Data("disaster series has zero exposure".into()));
    }
    let events = counts.total_events();
    let lambda_hat = events as f64 / years;
    let std_error = (lambda_hat / years).sqrt();
    Ok(IntensityEstimate {
        lambda_hat,
        std_error,
        ci95: (lambda_hat - 1.96 * std_error, lambda_hat + 1.96 * std_error),
        total_years: years,
        total_events: events,
    })
}

/// Default floor applied to the lower intensity bound.
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// Clamps the 95% confidence interval into an admissible box segment.
pub fn lambda_ci_to_box_segment(est: &IntensityEstimate, floor: f64) -> (f64, f64) {
    (est.ci95.0.max(floor), est.ci95.1.max(floor))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 17 events spread over the monthly span 1953-05 .. 2024-05
    /// (853 periods = 71.0833 years).
    fn synthetic_counts() -> DisasterCounts {
        let mut periods = Vec::new();
        let mut counts = Vec::new();
        let start = 1953 * 12 + 4; // 1953-05
        let n = 853;
        for k in 0..n {
            let ord = start + k;
            periods.push(format!("{:04}-{:02}", ord / 12, ord % 12 + 1));
            counts.push(0u64);
        }
        // 17 events at deterministic spots.
        for e in 0..17 {
            let slot = (e * 47) % n;
            counts[slot] += 1;
        }
        DisasterCounts::new(periods, counts, false).unwrap()
    }

    #[test]
    fn mle_matches_published_wildfire_estimate() {
        let counts = synthetic_counts();
        assert_eq!(counts.total_events(), 17);
        assert!((counts.total_years() - 853.0 / 12.0).abs() < 1e-12);
        let est = estimate_intensity(&counts).unwrap();
        assert!((est.lambda_hat - 0.2392).abs() < 5e-4, "lambda {}", est.lambda_hat);
        assert!((est.std_error - 0.0580).abs() < 5e-4, "se {}", est.std_error);
        assert!((est.ci95.0 - 0.1255).abs() < 1e-3);
        assert!((est.ci95.1 - 0.3528).abs() < 1e-3);
    }

    #[test]
    fn zero_events_is_degenerate_not_an_error() {
        let counts = DisasterCounts::new(
            vec!["2001".into(), "2002".into(), "2003".into()],
            vec![0, 0, 0],
            false,
        )
        .unwrap();
        let est = estimate_intensity(&counts).unwrap();
        assert_eq!(est.lambda_hat, 0.0);
        assert!(est.is_degenerate());
    }

    #[test]
    fn doubling_counts_and_span_preserves_lambda_and_shrinks_se() {
        let a = DisasterCounts::new(
            (2000..2010).map(|y| y.to_string()).collect(),
            vec![1, 0, 2, 0, 1, 3, 0, 0, 1, 2],
            false,
        )
        .unwrap();
        let mut periods: Vec<String> = (2000..2020).map(|y| y.to_string()).collect();
        let counts2: Vec<u64> = a.counts.iter().chain(a.counts.iter()).copied().collect();
        let b = DisasterCounts::new(std::mem::take(&mut periods), counts2, false).unwrap();
        let ea = estimate_intensity(&a).unwrap();
        let eb = estimate_intensity(&b).unwrap();
        assert!((ea.lambda_hat - eb.lambda_hat).abs() < 1e-12);
        assert!((ea.std_error / eb.std_error - 2f64.sqrt()).abs() < 1e-12);
        // Closed form: the sample mean count over the period length.
        let mean_count = a.counts.iter().sum::<u64>() as f64 / a.counts.len() as f64;
        assert_eq!(ea.lambda_hat, mean_count * a.periods_per_year());
        assert!(ea.ci95.0 < ea.lambda_hat && ea.lambda_hat < ea.ci95.1);
    }

    #[test]
    fn ci_segment_respects_floor() {
        let counts = DisasterCounts::new(
            vec!["2000".into(), "2001".into(), "2002".into(), "2003".into()],
            vec![1, 0, 0, 0],
            false,
        )
        .unwrap();
        let est = estimate_intensity(&counts).unwrap();
        // lambda = 0.25, se = 0.25 -> raw lower bound is negative.
        assert!(est.ci95.0 < 0.0);
        let (lo, hi) = lambda_ci_to_box_segment(&est, LAMBDA_FLOOR);
        assert_eq!(lo, LAMBDA_FLOOR);
        assert!(hi > lo);
        // Degenerate standard error collapses the segment.
        let z = IntensityEstimate {
            lambda_hat: 0.3,
            std_error: 0.0,
            ci95: (0.3, 0.3),
            total_years: 1.0,
            total_events: 1,
        };
        assert_eq!(lambda_ci_to_box_segment(&z, LAMBDA_FLOOR), (0.3, 0.3));
    }

    #[test]
    fn rejects_mixed_granularity_and_disorder() {
        assert!(DisasterCounts::new(vec!["2000".into(), "2001-03".into()], vec![1, 1], false).is_err());
        assert!(DisasterCounts::new(vec!["2001".into(), "2000".into()], vec![1, 1], false).is_err());
        assert!(DisasterCounts::new(vec!["20-1".into()], vec![1], false).is_err());
        // Gap handling is config gated.
        let gappy = DisasterCounts::new(vec!["2000".into(), "2003".into()], vec![1, 2], false);
        assert!(gappy.is_err());
        let filled = DisasterCounts::new(vec!["2000".into(), "2003".into()], vec![1, 2], true).unwrap();
        assert_eq!(filled.counts, vec![1, 0, 0, 2]);
        assert_eq!(filled.periods[1], "2001");
        // Monthly gap fill wraps the year boundary.
        let m = DisasterCounts::new(vec!["1999-11".into(), "2000-02".into()], vec![1, 1], true).unwrap();
        assert_eq!(m.periods, vec!["1999-11", "1999-12", "2000-01", "2000-02"]);
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let dir = std::env::temp_dir().join("timberlease_counts_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("counts.csv");
        let counts = synthetic_counts();
        counts.write_csv(&path).unwrap();
        let loaded = DisasterCounts::read_csv(&path, false).unwrap();
        assert_eq!(counts, loaded);

        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "period,count\n2000,1\n2001-02,3\n").unwrap();
        assert!(DisasterCounts::read_csv(&bad, false).is_err());
        let bad2 = dir.join("bad2.csv");
        std::fs::write(&bad2, "period,count\n2000,-3\n").unwrap();
        assert!(DisasterCounts::read_csv(&bad2, false).is_err());
    }
}
