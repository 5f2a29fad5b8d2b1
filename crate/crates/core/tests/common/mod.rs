//! Published per-model statistics used as fixtures.
#![allow(dead_code)]

use std::path::Path;

pub const MODELS: [&str; 15] = [
    "LN-HIS(6m)", "BTS(6m)", "GARCH-N(6m)", "GARCH-t(6m)", "GJR-FHS(6m)", "LN-HIS(5y)", "BTS(5y)", "GARCH-N(5y)",
    "GARCH-t(5y)", "GJR-FHS(5y)", "LN-ATM", "HESTON", "BATES", "VG", "BL-MALZ",
];

/// Berkowitz, JB and KS p-values in percent.
pub const P: [[f64; 3]; 15] = [
    [19.25, 3.02, 47.51], [12.33, 1.79, 75.07], [4.00, 2.32, 32.81], [30.24, 4.22, 19.36], [2.81, 50.00, 74.09],
    [70.82, 0.10, 5.84], [71.14, 0.10, 22.41], [15.77, 16.23, 28.51], [0.01, 9.77, 5.19], [29.26, 36.88, 83.68],
    [10.66, 12.74, 1.61], [8.96, 0.10, 0.80], [20.45, 50.00, 14.69], [20.04, 50.00, 11.33], [0.16, 50.00, 0.84],
];

/// Entire-sample excess log-likelihood and excess CRPS.
pub const LL: [f64; 15] = [0.0, 2.34, 12.68, 7.63, 9.73, 7.29, 12.12, 26.29, 19.37, 28.74, 21.48, 26.75, 24.03, 31.28, 27.69];
pub const CRPS: [f64; 15] =
    [0.0, 0.012, -0.034, -0.021, -0.036, -0.214, -0.198, -0.260, -0.184, -0.257, -0.259, -0.241, -0.274, -0.286, -0.217];

/// (IFS, IFS rank, consistency, rank, accuracy, rank, errors, rank).
pub const SCORES: [(f64, usize, f64, usize, f64, usize, f64, usize); 15] = [
    (0.232, 15, 0.574, 9, 0.048, 15, 0.072, 14),
    (0.242, 14, 0.592, 7, 0.075, 14, 0.059, 15),
    (0.249, 13, 0.291, 14, 0.332, 9, 0.123, 12),
    (0.280, 12, 0.561, 10, 0.178, 12, 0.103, 13),
    (0.341, 11, 0.660, 5, 0.234, 11, 0.127, 11),
    (0.476, 10, 0.588, 8, 0.170, 13, 0.670, 8),
    (0.511, 9, 0.605, 6, 0.312, 10, 0.615, 9),
    (0.812, 4, 0.823, 4, 0.811, 5, 0.802, 3),
    (0.558, 8, 0.521, 12, 0.585, 8, 0.567, 10),
    (0.864, 2, 0.929, 1, 0.868, 2, 0.793, 5),
    (0.665, 5, 0.534, 11, 0.662, 7, 0.800, 4),
    (0.612, 7, 0.260, 15, 0.823, 4, 0.751, 6),
    (0.817, 3, 0.871, 2, 0.747, 6, 0.833, 2),
    (0.880, 1, 0.867, 3, 0.914, 1, 0.859, 1),
    (0.619, 6, 0.334, 13, 0.846, 3, 0.679, 7),
];

/// Writes the three score-tables inputs in `order` (indices into MODELS).
pub fn write_inputs(dir: &Path, order: &[usize]) {
    let mut p = String::from("model,berkowitz,jb,ks\n");
    let mut ll = String::from("model,entire\n");
    let mut cr = String::from("model,entire\n");
    for &i in order {
        p += &format!("{},{},{},{}\n", MODELS[i], P[i][0], P[i][1], P[i][2]);
        ll += &format!("{},{}\n", MODELS[i], LL[i]);
        cr += &format!("{},{}\n", MODELS[i], CRPS[i]);
    }
    std::fs::write(dir.join("p_values.csv"), p).unwrap();
    std::fs::write(dir.join("loglik.csv"), ll).unwrap();
    std::fs::write(dir.join("crps.csv"), cr).unwrap();
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct IfsCsvRow {
    pub model: String,
    pub ifs: f64,
    pub ifs_rank: usize,
    pub consistency: f64,
    pub consistency_rank: usize,
    pub accuracy: f64,
    pub accuracy_rank: usize,
    pub errors: f64,
    pub errors_rank: usize,
}

pub fn read_ifs(path: &Path) -> Vec<IfsCsvRow> {
    csv::Reader::from_path(path).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_densitybench")
}
