//! Bundled Re = 100 centerline reference profiles and the comparison metric.

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/ghia_re100.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct GhiaReference {
    /// `(y, u / U_lid)` along `x = 0.5`.
    pub u_vertical: Vec<(f64, f64)>,
    /// `(x, v / U_lid)` along `y = 0.5`.
    pub v_horizontal: Vec<(f64, f64)>,
    /// Comment lines of the data file.
    pub provenance: String,
}

impl GhiaReference {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled reference data is well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut u = Vec::new();
        let mut v = Vec::new();
        let mut section: Option<&mut Vec<(f64, f64)>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(c) = line.strip_prefix('#') {
                if section.is_none() {
                    provenance.push(c.trim().to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match line {
                "[u_vertical_centerline]" => section = Some(&mut u),
                "[v_horizontal_centerline]" => section = Some(&mut v),
                _ => {
                    let bad = || Error::Invalid(format!("reference data line {}: '{raw}'", lineno + 1));
                    let table = section.as_mut().ok_or_else(bad)?;
                    let mut it = line.split_whitespace().map(str::parse::<f64>);
                    match (it.next(), it.next(), it.next()) {
                        (Some(Ok(c)), Some(Ok(val)), None) => table.push((c, val)),
                        _ => return Err(bad()),
                    }
                }
            }
        }
        for (name, t) in [("u", &u), ("v", &v)] {
            if t.is_empty() {
                return Err(Error::Invalid(format!("reference table {name} is empty")));
            }
            if t.iter().any(|p| !(0.0..=1.0).contains(&p.0)) {
                return Err(Error::Invalid(format!("reference table {name}: coordinate outside [0, 1]")));
            }
            if t.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Invalid(format!(
                    "reference table {name}: coordinates not strictly increasing"
                )));
            }
        }
        Ok(Self {
            u_vertical: u,
            v_horizontal: v,
            provenance: provenance.join("\n"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileError {
    pub rms: f64,
    pub max: f64,
}

/// RMS and max of `|num - ref|` over the reference stations, in units of
/// the lid speed. `samples` must sit at the reference coordinates and carry
/// dimensional velocities.
pub fn compare_ghia(samples: &[(f64, f64)], reference: &[(f64, f64)], u_lid: f64) -> Result<ProfileError> {
    if samples.len() != reference.len() || samples.is_empty() {
        return Err(Error::Invalid(format!(
            "expected {} samples at the reference stations, got {}",
            reference.len(),
            samples.len()
        )));
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (s, r) in samples.iter().zip(reference) {
        if (s.0 - r.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "sample coordinate {} does not match reference station {}",
                s.0, r.0
            )));
        }
        let e = (s.1 / u_lid - r.1).abs();
        sum += e * e;
        max = max.max(e);
    }
    Ok(ProfileError {
        rms: (sum / samples.len() as f64).sqrt(),
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bundled_tables() {
        let g = GhiaReference::bundled();
        assert_eq!(g.u_vertical.len(), 17);
        assert_eq!(g.v_horizontal.len(), 17);
        assert_eq!(g.u_vertical[0], (0.0, 0.0));
        assert_eq!(g.u_vertical[16], (1.0, 1.0));
        assert_eq!(g.v_horizontal[16], (1.0, 0.0));
        assert!(g.provenance.contains("Ghia"));
    }

    #[test]
    fn metric_definition() {
        let g = GhiaReference::bundled();
        let u_lid = 0.1;
        let exact: Vec<(f64, f64)> = g.u_vertical.iter().map(|&(c, v)| (c, v * u_lid)).collect();
        let e = compare_ghia(&exact, &g.u_vertical, u_lid).unwrap();
        assert!(e.rms < 1e-15 && e.max < 1e-15);

        let shifted: Vec<(f64, f64)> = exact.iter().map(|&(c, v)| (c, v + 0.01 * u_lid)).collect();
        let e = compare_ghia(&shifted, &g.u_vertical, u_lid).unwrap();
        assert_abs_diff_eq!(e.rms, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(e.max, 0.01, epsilon = 1e-12);

        let mut one = exact.clone();
        one[5].1 += 0.04 * u_lid;
        let e = compare_ghia(&one, &g.u_vertical, u_lid).unwrap();
        assert_abs_diff_eq!(e.max, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(e.rms, 0.04 / 17f64.sqrt(), epsilon = 1e-12);

        assert!(compare_ghia(&exact[1..], &g.u_vertical, u_lid).is_err());
        let mut moved = exact;
        moved[3].0 += 0.01;
        assert!(compare_ghia(&moved, &g.u_vertical, u_lid).is_err());
    }

    #[test]
    fn malformed_input_is_reported() {
        assert!(GhiaReference::parse("[u_vertical_centerline]\n0.1 x\n").is_err());
        assert!(GhiaReference::parse("0.1 0.2\n").is_err());
        assert!(GhiaReference::parse("[u_vertical_centerline]\n0.5 1\n0.2 1\n[v_horizontal_centerline]\n0 0\n").is_err());
    }
}
