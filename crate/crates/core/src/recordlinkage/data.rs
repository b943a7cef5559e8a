use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Two record tables over the same categorical fields, stored as dense
/// category codes, with per-field value frequencies `θ_s` taken from both
/// tables together.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    nx: usize,
    ny: usize,
    fields: usize,
    x: Vec<u32>,
    y: Vec<u32>,
    categories: Vec<usize>,
    theta: Vec<Vec<f64>>,
}

impl Dataset {
    /// `x_rows[i][s]` is the code of field `s` of record `i`; codes of field
    /// `s` must lie below `categories[s]`.
    pub fn from_codes(
        x_rows: &[Vec<u32>],
        y_rows: &[Vec<u32>],
        categories: Vec<usize>,
    ) -> Result<Self> {
        let fields = categories.len();
        if fields == 0 {
            return Err(Error::InvalidArgument(
                "record linkage needs at least one field".into(),
            ));
        }
        if x_rows.is_empty() || y_rows.is_empty() {
            return Err(Error::InvalidArgument(
                "both databases need at least one record".into(),
            ));
        }
        let mut counts: Vec<Vec<u64>> = categories.iter().map(|&m| vec![0; m]).collect();
        let mut flatten = |rows: &[Vec<u32>], side: &str| -> Result<Vec<u32>> {
            let mut out = Vec::with_capacity(rows.len() * fields);
            for (r, row) in rows.iter().enumerate() {
                if row.len() != fields {
                    return Err(Error::InvalidArgument(format!(
                        "{side} record {r} has {} fields, expected {fields}",
                        row.len()
                    )));
                }
                for (s, &c) in row.iter().enumerate() {
                    if c as usize >= categories[s] {
                        return Err(Error::InvalidArgument(format!(
                            "{side} record {r} field {s}: code {c} outside 0..{}",
                            categories[s]
                        )));
                    }
                    counts[s][c as usize] += 1;
                    out.push(c);
                }
            }
            Ok(out)
        };
        let x = flatten(x_rows, "x")?;
        let y = flatten(y_rows, "y")?;
        let total = (x_rows.len() + y_rows.len()) as f64;
        let theta = counts
            .iter()
            .map(|c| c.iter().map(|&k| k as f64 / total).collect())
            .collect();
        Ok(Self {
            nx: x_rows.len(),
            ny: y_rows.len(),
            fields,
            x,
            y,
            categories,
            theta,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn num_fields(&self) -> usize {
        self.fields
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    #[inline]
    pub fn x(&self, i: usize, s: usize) -> u32 {
        self.x[i * self.fields + s]
    }

    #[inline]
    pub fn y(&self, j: usize, s: usize) -> u32 {
        self.y[j * self.fields + s]
    }

    pub fn x_row(&self, i: usize) -> &[u32] {
        &self.x[i * self.fields..(i + 1) * self.fields]
    }

    pub fn y_row(&self, j: usize) -> &[u32] {
        &self.y[j * self.fields..(j + 1) * self.fields]
    }

    /// `θ_{s,c}`.
    pub fn theta(&self, s: usize, c: u32) -> f64 {
        self.theta[s][c as usize]
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_frequencies() {
        let d = Dataset::from_codes(&[vec![0, 1], vec![1, 1]], &[vec![0, 0]], vec![2, 3]).unwrap();
        assert_eq!((d.nx(), d.ny(), d.num_fields()), (2, 1, 2));
        assert!((d.theta(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.theta(1, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.theta(1, 2), 0.0);
        for t in d.thetas() {
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(d.y_row(0), &[0, 0]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Dataset::from_codes(&[vec![0]], &[vec![0, 1]], vec![2]).is_err());
        assert!(Dataset::from_codes(&[vec![2]], &[vec![0]], vec![2]).is_err());
        assert!(Dataset::from_codes(&[], &[vec![0]], vec![2]).is_err());
    }
}
