//! CSV emission for every artifact the pipeline produces. Floats are
//! written with Rust's shortest round-trip formatting so re-parsing a file
//! recovers the exact bits.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::intensity::IntensityEstimate;
use crate::kalman::EstimationResult;
use crate::sim::{PathSet, TimeGrid};
use crate::solver::BoundaryGrid;
use crate::valuation::{ScenarioRun, StoppingSet};

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// `estimation.csv`: parameter, estimate, std_error, ci_lo, ci_hi rows plus
/// a trailing log_likelihood row.
pub fn write_estimation_csv(result: &EstimationResult, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "parameter,estimate,std_error,ci_lo,ci_hi")?;
    for (name, est, se, lo, hi) in result.rows() {
        writeln!(f, "{},{},{},{},{}", name, est, se, lo, hi)?;
    }
    writeln!(f, "log_likelihood,{},,,", result.log_likelihood)?;
    Ok(())
}

/// `intensity.csv`: the intensity MLE with its confidence interval.
pub fn write_intensity_csv(est: &IntensityEstimate, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "lambda_hat,std_error,ci_lo,ci_hi,total_events,total_years")?;
    writeln!(
        f,
        "{},{},{},{},{},{}",
        est.lambda_hat, est.std_error, est.ci95.0, est.ci95.1, est.total_events, est.total_years
    )?;
    Ok(())
}

/// `stopping_times.csv`: scenario, path, tau_years, price_at_tau, delta_at_tau.
pub fn write_stopping_times_csv(sets: &[&StoppingSet], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "scenario,path,tau_years,price_at_tau,delta_at_tau")?;
    for set in sets {
        for (m, s) in set.samples.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{}",
                set.scenario.name(),
                m,
                s.tau,
                s.state_at_tau.price,
                s.state_at_tau.delta
            )?;
        }
    }
    Ok(())
}

/// `valuation.csv`: scenario, run, estimate.
pub fn write_valuation_csv(runs: &[ScenarioRun], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "scenario,run,estimate")?;
    for run in runs {
        for (k, v) in run.report.per_run.iter().enumerate() {
            writeln!(f, "{},{},{}", run.scenario.name(), k, v)?;
        }
    }
    Ok(())
}

/// `report.csv`: scenario, mean, std, ci_lo, ci_hi, div (and the mean
/// harvest time as a convenience column).
pub fn write_report_csv(runs: &[ScenarioRun], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "scenario,mean,std,ci_lo,ci_hi,div,mean_tau_years")?;
    for run in runs {
        let r = &run.report;
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            run.scenario.name(),
            r.mean,
            r.std,
            r.ci95.0,
            r.ci95.1,
            r.div,
            run.mean_tau
        )?;
    }
    Ok(())
}

/// `boundary_<t>.csv`: p_grid, delta_grid, payoff, value, stop_flag.
pub fn write_boundary_csv(grid: &BoundaryGrid, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "p_grid,delta_grid,payoff,value,stop_flag")?;
    for pi in 0..grid.prices.len() {
        for di in 0..grid.deltas.len() {
            let (p, d, s, v, stop) = grid.node(pi, di);
            writeln!(f, "{},{},{},{},{}", p, d, s, v, stop as u8)?;
        }
    }
    Ok(())
}

/// `paths.csv`: path, time, delta, price for a simulated path set.
pub fn write_paths_csv(paths: &PathSet, grid: &TimeGrid, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "path,time_years,delta,price")?;
    for m in 0..paths.n_paths {
        for i in 0..paths.n_times {
            let s = paths.state(m, i);
            writeln!(f, "{},{},{},{}", m, grid.time(i), s.delta, s.price)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, StateVec};
    use crate::sim::simulate_paths;

    #[test]
    fn paths_csv_round_trips_exact_floats() {
        let grid = TimeGrid::new(1.0, 8);
        let paths = simulate_paths(3, &grid, StateVec::new(-0.01, 600.0), &ModelParams::reference(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.csv");
        write_paths_csv(&paths, &grid, &file).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        let mut lines = text.lines().skip(1);
        for m in 0..3 {
            for i in 0..9 {
                let line = lines.next().unwrap();
                let cols: Vec<&str> = line.split(',').collect();
                assert_eq!(cols[0].parse::<usize>().unwrap(), m);
                let price: f64 = cols[3].parse().unwrap();
                assert_eq!(price.to_bits(), paths.state(m, i).price.to_bits());
                let delta: f64 = cols[2].parse().unwrap();
                assert_eq!(delta.to_bits(), paths.state(m, i).delta.to_bits());
            }
        }
    }
}
