//! CSV writers. Numbers use 17 significant digits, `.` as the decimal
//! separator and LF line endings.

use std::io::{self, Write};

use crate::invariant::LambdaSweep;
use crate::metrics::{EnsembleReport, TransferReport, SE_LABELS};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
    writeln!(w, "{}", cells.join(","))
}

/// `t_ns,p_100,p_010,p_001[,leakage],fidelity`
pub fn write_transfer_csv<W: Write>(report: &TransferReport, mut w: W) -> io::Result<()> {
    let mut header = vec!["t_ns".to_string()];
    header.extend(SE_LABELS.iter().map(|l| format!("p_{l}")));
    if report.leakage.is_some() {
        header.push("leakage".into());
    }
    header.push("fidelity".into());
    writeln!(w, "{}", header.join(","))?;
    for (k, &t) in report.times.iter().enumerate() {
        let mut values = vec![t];
        values.extend(report.populations.iter().map(|p| p[k]));
        if let Some(l) = &report.leakage {
            values.push(l[k]);
        }
        values.push(report.fidelity_curve[k]);
        row(&mut w, &values)?;
    }
    Ok(())
}

/// `t_ns,fidelity`
pub fn write_ensemble_csv<W: Write>(report: &EnsembleReport, mut w: W) -> io::Result<()> {
    writeln!(w, "t_ns,fidelity")?;
    for (&t, &f) in report.times.iter().zip(&report.fidelity_curve) {
        row(&mut w, &[t, f])?;
    }
    Ok(())
}

/// `lambda,theta_plus_rad,theta_plus_reduced_rad`
pub fn write_sweep_csv<W: Write>(sweep: &LambdaSweep, mut w: W) -> io::Result<()> {
    writeln!(w, "lambda,theta_plus_rad,theta_plus_reduced_rad")?;
    for p in &sweep.points {
        row(&mut w, &[p.lambda, p.theta_plus, p.theta_plus_reduced])?;
    }
    Ok(())
}
