//! CSV files. Floats are written as `{:.16e}`, which parses back to the
//! same `f64`, and lines end in `\n` on every platform.

use std::io::{BufRead, Read, Write};

use lattice_echo_core::{Complex64, DensityMeasure, ExpSumField, FrequencySet, Realization, RegularGrid};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed field file: {0}")]
    Malformed(String),
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

/// Points of `W ∩ B_R` with their lattice coefficients: `coeff_1..,w_1..`.
pub fn write_realization<W: Write>(out: W, realization: &Realization, radius: f64) -> Result<(), IoError> {
    let d = realization.dim();
    let window = realization.window(radius).map_err(|e| IoError::Malformed(e.to_string()))?;
    let mut w = writer(out);
    w.write_record(header("coeff", d).chain(header("w", d)))?;
    for (i, &entry) in window.entries().iter().enumerate() {
        let coeffs = realization.coeffs(entry).iter().map(|k| k.to_string());
        let pos = window.position(i).iter().map(|&x| fmt(x));
        w.write_record(coeffs.chain(pos))?;
    }
    w.flush()?;
    Ok(())
}

/// `lambda_1..,re,im`, preceded by a `#` line holding the radius and window size.
pub fn write_field<W: Write>(mut out: W, field: &ExpSumField) -> Result<(), IoError> {
    write!(out, "# radius={} normalization={} window_count={}", fmt(field.radius), fmt(field.normalization), field.window_count)?;
    if let FrequencySet::Regular(g) = &field.frequencies {
        write!(out, " spacing={}", fmt(g.spacing()))?;
    }
    writeln!(out)?;
    let d = field.frequencies.dim();
    let mut w = writer(out);
    w.write_record(header("lambda", d).chain(["re".to_string(), "im".to_string()]))?;
    for (i, z) in field.values.iter().enumerate() {
        let lambda = field.frequencies.point(i);
        w.write_record(lambda.iter().map(|&x| fmt(x)).chain([fmt(z.re), fmt(z.im)]))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field file back. Frequencies that fill a row-major grid (last
/// axis fastest) are restored as a regular grid, anything else as points.
pub fn read_field<R: Read>(input: R) -> Result<ExpSumField, IoError> {
    let mut buf = std::io::BufReader::new(input);
    let mut first = String::new();
    buf.read_line(&mut first)?;
    let meta = |name: &str| -> Result<&str, IoError> {
        first
            .split_whitespace()
            .find_map(|t| t.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| IoError::Malformed(format!("missing `{name}` in the first line")))
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| IoError::Malformed(e.to_string()));
    let radius = num(meta("radius")?)?;
    let normalization = num(meta("normalization")?)?;
    let window_count = meta("window_count")?.parse::<usize>().map_err(|e| IoError::Malformed(e.to_string()))?;

    let mut r = csv::Reader::from_reader(buf);
    let cols = r.headers()?.len();
    if cols < 3 {
        return Err(IoError::Malformed("need lambda columns plus re, im".into()));
    }
    let d = cols - 2;
    let mut lambdas = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let xs: Vec<f64> = rec.iter().map(num).collect::<Result<_, _>>()?;
        lambdas.push(xs[..d].to_vec());
        values.push(Complex64::new(xs[d], xs[d + 1]));
    }
    let spacing = meta("spacing").ok().map(num).transpose()?;
    let frequencies = restore_grid(&lambdas, d, spacing);
    Ok(ExpSumField { radius, normalization, window_count, frequencies, values, provenance: None })
}

fn restore_grid(lambdas: &[Vec<f64>], d: usize, spacing: Option<f64>) -> FrequencySet {
    let points = || FrequencySet::Points { dim: d, coords: lambdas.iter().flatten().copied().collect() };
    let mut axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut a: Vec<f64> = lambdas.iter().map(|l| l[j]).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        })
        .collect();
    if axes.iter().map(|a| a.len()).product::<usize>() != lambdas.len() || lambdas.is_empty() {
        return points();
    }
    let spacing = spacing.unwrap_or_else(|| axes.iter().find(|a| a.len() > 1).map(|a| a[1] - a[0]).unwrap_or(1.0));
    let grid = match RegularGrid::from_axes(std::mem::take(&mut axes), spacing) {
        Ok(g) => g,
        Err(_) => return points(),
    };
    if lambdas.iter().enumerate().all(|(i, l)| grid.node(i) == *l) {
        FrequencySet::Regular(grid)
    } else {
        points()
    }
}

/// `lambda_1..,radius,re,im` for radius sweeps.
pub fn write_sweep<W: Write>(out: W, rows: &[(Vec<f64>, f64, Complex64)]) -> Result<(), IoError> {
    let d = rows.first().map(|r| r.0.len()).unwrap_or(0);
    let mut w = writer(out);
    w.write_record(header("lambda", d).chain(["radius".to_string(), "re".to_string(), "im".to_string()]))?;
    for (lambda, radius, z) in rows {
        w.write_record(lambda.iter().map(|&x| fmt(x)).chain([fmt(*radius), fmt(z.re), fmt(z.im)]))?;
    }
    w.flush()?;
    Ok(())
}

/// `x_1..,density` with `x` the cell coordinates of each node.
pub fn write_measure<W: Write>(out: W, m: &DensityMeasure) -> Result<(), IoError> {
    let mut w = writer(out);
    w.write_record(header("x", m.dim()).chain(["density".to_string()]))?;
    for (i, &rho) in m.density().iter().enumerate() {
        w.write_record(m.node(i).iter().map(|&x| fmt(x)).chain([fmt(rho)]))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lattice_echo_core::{make_lattice, realize, Matrix, NoiseModel, Sequential};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -2.5, 1.0 / 3.0, 6.02e23, 5e-324, -0.0] {
            assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn field_round_trip() {
        let lat = make_lattice(Matrix::identity(2)).unwrap();
        let r = realize(&lat, &NoiseModel::gaussian(2, 0.1).unwrap(), &[0.0, 0.0], 4, 10.0).unwrap();
        let grid = RegularGrid::integer_box(2, -0.5, 0.5, 0.1).unwrap();
        let field = lattice_echo_core::exp_sum_grid(&r, 10.0, &FrequencySet::Regular(grid), &Sequential).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &field).unwrap();
        assert!(!buf.contains(&b'\r'));
        let back = read_field(&buf[..]).unwrap();
        assert_eq!(back.values, field.values);
        assert_eq!(back.frequencies, field.frequencies);
        assert_eq!(back.radius, 10.0);
        assert_eq!(back.window_count, field.window_count);
    }

    #[test]
    fn scattered_frequencies_stay_points() {
        let lambdas = vec![vec![0.0, 0.0], vec![0.3, 0.1]];
        assert!(matches!(restore_grid(&lambdas, 2, None), FrequencySet::Points { .. }));
    }
}
