use std::path::Path;

use crate::embedding::{FeatureTable, IngestError};

type Mat3 = [[f64; 3]; 3];

/// Pointwise flow fields from which the closure features are built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvariantFields {
    /// Strain-rate tensor S (1/s).
    pub strain: Vec<Mat3>,
    /// Rotation-rate tensor Ω (1/s).
    pub rotation: Vec<Mat3>,
    pub grad_t: Vec<[f64; 3]>,
    /// Specific dissipation rate ω (1/s).
    pub omega: Vec<f64>,
    pub k: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_t: Vec<f64>,
    /// Wall distance.
    pub y: Vec<f64>,
    /// Optional externally computed blending function.
    pub n3: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum InvariantError {
    #[error("point {0}: omega must be positive")]
    NonPositiveOmega(usize),
    #[error("point {0}: strain tensor is not symmetric")]
    NotSymmetric(usize),
    #[error("point {0}: rotation tensor is not antisymmetric")]
    NotAntisymmetric(usize),
    #[error("field {0} has {1} points, expected {2}")]
    Length(&'static str, usize, usize),
    #[error("expected columns {0}")]
    Columns(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Column order expected by [`ingest_invariant_fields`]; `N3` is optional.
pub const FIELD_COLUMNS: [&str; 27] = [
    "S11", "S12", "S13", "S21", "S22", "S23", "S31", "S32", "S33", "W11", "W12", "W13", "W21", "W22", "W23", "W31",
    "W32", "W33", "dTdx", "dTdy", "dTdz", "omega", "k", "nu", "nu_t", "y", "N3",
];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// tr(A·B) = A_mn B_nm
fn trace_prod(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for m in 0..3 {
        for n in 0..3 {
            s += a[m][n] * b[n][m];
        }
    }
    s
}

/// gᵢ Aᵢⱼ gⱼ
fn quad(g: &[f64; 3], a: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += g[i] * a[i][j] * g[j];
        }
    }
    s
}

impl InvariantFields {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    fn check(&self) -> Result<(), InvariantError> {
        let n = self.len();
        let lens = [
            ("strain", self.strain.len()),
            ("rotation", self.rotation.len()),
            ("grad_t", self.grad_t.len()),
            ("k", self.k.len()),
            ("nu", self.nu.len()),
            ("nu_t", self.nu_t.len()),
            ("y", self.y.len()),
            ("N3", self.n3.as_ref().map_or(n, Vec::len)),
        ];
        for (name, len) in lens {
            if len != n {
                return Err(InvariantError::Length(name, len, n));
            }
        }
        for p in 0..n {
            if !(self.omega[p] > 0.0) {
                return Err(InvariantError::NonPositiveOmega(p));
            }
            let (s, w) = (&self.strain[p], &self.rotation[p]);
            for i in 0..3 {
                for j in 0..3 {
                    if (s[i][j] - s[j][i]).abs() > 1e-12 {
                        return Err(InvariantError::NotSymmetric(p));
                    }
                    if (w[i][j] + w[j][i]).abs() > 1e-12 {
                        return Err(InvariantError::NotAntisymmetric(p));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Scalar closure features per point: I1, I2 from the ω-scaled deviatoric
/// strain and rotation, J1..J5 from the temperature gradient, the wall
/// Reynolds number N1 (capped at 2), the viscosity ratio N2, and N3 when
/// supplied.
pub fn compute_invariants(f: &InvariantFields) -> Result<FeatureTable, InvariantError> {
    f.check()?;
    let n = f.len();
    let mut cols: Vec<Vec<f64>> = (0..9).map(|_| Vec::with_capacity(n)).collect();
    for p in 0..n {
        let om = f.omega[p];
        let sr = &f.strain[p];
        let wr = &f.rotation[p];
        let tr = (sr[0][0] + sr[1][1] + sr[2][2]) / 3.0;
        let mut s = [[0.0; 3]; 3];
        let mut w = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = (sr[i][j] - if i == j { tr } else { 0.0 }) / om;
                w[i][j] = wr[i][j] / om;
            }
        }
        let g = &f.grad_t[p];
        cols[0].push(trace_prod(&s, &s));
        cols[1].push(trace_prod(&w, &w));
        cols[2].push(g.iter().map(|v| v * v).sum());
        cols[3].push(quad(g, sr));
        cols[4].push(quad(g, &matmul(sr, sr)));
        cols[5].push(quad(g, &matmul(wr, wr)));
        cols[6].push(quad(g, &matmul(wr, sr)));
        cols[7].push((f.k[p].sqrt() * f.y[p] / (50.0 * f.nu[p])).min(2.0));
        cols[8].push(f.nu_t[p] / (f.nu_t[p] + f.nu[p]));
    }
    let mut names: Vec<String> = ["I1", "I2", "J1", "J2", "J3", "J4", "J5", "N1", "N2"].iter().map(|s| s.to_string()).collect();
    if let Some(n3) = &f.n3 {
        names.push("N3".into());
        cols.push(n3.clone());
    }
    Ok(FeatureTable::new(names, cols)?)
}

/// Read fields from a delimited file with a header row whose columns follow
/// [`FIELD_COLUMNS`] (the trailing `N3` may be omitted).
pub fn ingest_invariant_fields(path: &Path) -> Result<InvariantFields, InvariantError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    parse_invariant_fields(&text)
}

pub fn parse_invariant_fields(text: &str) -> Result<InvariantFields, InvariantError> {
    let table = crate::embedding::parse_feature_table(text)?;
    let names = table.names();
    let with_n3 = names.len() == FIELD_COLUMNS.len();
    let expected = if with_n3 { &FIELD_COLUMNS[..] } else { &FIELD_COLUMNS[..26] };
    if names.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(InvariantError::Columns(expected.join(",")));
    }
    let mut f = InvariantFields::default();
    for row in table.rows() {
        let m = |o: usize| [[row[o], row[o + 1], row[o + 2]], [row[o + 3], row[o + 4], row[o + 5]], [row[o + 6], row[o + 7], row[o + 8]]];
        f.strain.push(m(0));
        f.rotation.push(m(9));
        f.grad_t.push([row[18], row[19], row[20]]);
        f.omega.push(row[21]);
        f.k.push(row[22]);
        f.nu.push(row[23]);
        f.nu_t.push(row[24]);
        f.y.push(row[25]);
        if with_n3 {
            f.n3.get_or_insert_with(Vec::new).push(row[26]);
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(strain: Mat3, rotation: Mat3, g: [f64; 3]) -> InvariantFields {
        InvariantFields {
            strain: vec![strain],
            rotation: vec![rotation],
            grad_t: vec![g],
            omega: vec![1.0],
            k: vec![1.0],
            nu: vec![1.0],
            nu_t: vec![1.0],
            y: vec![1.0],
            n3: None,
        }
    }

    #[test]
    fn zero_fields() {
        let t = compute_invariants(&one([[0.0; 3]; 3], [[0.0; 3]; 3], [0.0; 3])).unwrap();
        for c in ["I1", "I2", "J1", "J2", "J3", "J4", "J5"] {
            assert_eq!(t.column(c).unwrap(), &[0.0]);
        }
    }

    #[test]
    fn pure_shear() {
        let a = 0.7;
        let s = [[0.0, a, 0.0], [a, 0.0, 0.0], [0.0; 3]];
        let t = compute_invariants(&one(s, [[0.0; 3]; 3], [0.0; 3])).unwrap();
        assert!((t.column("I1").unwrap()[0] - 2.0 * a * a).abs() < 1e-15);
    }

    #[test]
    fn deviatoric_part_is_used() {
        let s = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let t = compute_invariants(&one(s, [[0.0; 3]; 3], [0.0; 3])).unwrap();
        assert!(t.column("I1").unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn n1_caps_at_two() {
        let mut f = one([[0.0; 3]; 3], [[0.0; 3]; 3], [0.0; 3]);
        f.k = vec![9.0];
        f.y = vec![50.0];
        // sqrt(9) * 50 / 50 = 3
        assert_eq!(compute_invariants(&f).unwrap().column("N1").unwrap(), &[2.0]);
        f.k = vec![1.0];
        f.y = vec![25.0];
        assert_eq!(compute_invariants(&f).unwrap().column("N1").unwrap(), &[0.5]);
    }

    #[test]
    fn temperature_invariants_by_hand() {
        let s = [[1.0, 2.0, 0.0], [2.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
        let w = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let t = compute_invariants(&one(s, w, [1.0, 1.0, 0.0])).unwrap();
        let get = |c: &str| t.column(c).unwrap()[0];
        assert_eq!(get("J1"), 2.0);
        // g·S·g = 1 + 2 + 2 - 1
        assert_eq!(get("J2"), 4.0);
        // S² = [[5,0],[0,5]]
        assert_eq!(get("J3"), 10.0);
        // Ω² = -I in the plane
        assert_eq!(get("J4"), -2.0);
        // ΩS = [[2,-1],[-1,-2]] -> 2 - 1 - 1 - 2
        assert_eq!(get("J5"), -2.0);
        assert_eq!(get("I2"), -2.0);
    }

    #[test]
    fn domain_errors() {
        let mut f = one([[0.0; 3]; 3], [[0.0; 3]; 3], [0.0; 3]);
        f.omega = vec![0.0];
        assert!(matches!(compute_invariants(&f), Err(InvariantError::NonPositiveOmega(0))));
        let f = one([[0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]], [[0.0; 3]; 3], [0.0; 3]);
        assert!(matches!(compute_invariants(&f), Err(InvariantError::NotSymmetric(0))));
        let f = one([[0.0; 3]; 3], [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]], [0.0; 3]);
        assert!(matches!(compute_invariants(&f), Err(InvariantError::NotAntisymmetric(0))));
    }

    #[test]
    fn parses_documented_columns() {
        let header = FIELD_COLUMNS[..26].join(",");
        let mut row = vec!["0"; 26];
        row[21] = "2";
        row[22] = "1";
        row[23] = "1";
        let text = format!("{header}\n{}\n", row.join(","));
        let f = parse_invariant_fields(&text).unwrap();
        assert_eq!(f.omega, vec![2.0]);
        assert!(f.n3.is_none());
        assert!(parse_invariant_fields("a,b\n1,2\n").is_err());
    }
}
