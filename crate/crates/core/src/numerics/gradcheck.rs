//! Central-difference gradient verification.

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors. Coordinates whose true gradient is
/// (near) zero are compared on an absolute scale of this size instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Outcome of a gradient check: the worst coordinate and its error.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            checked: 0,
        }
    }

    /// Merges another report, keeping whichever worst case is larger.
    pub fn merge(&mut self, other: &GradCheckReport, index_offset: usize) {
        if other.max_rel_error > self.max_rel_error || self.checked == 0 {
            self.max_rel_error = other.max_rel_error;
            self.worst_index = other.worst_index + index_offset;
            self.analytic = other.analytic;
            self.numeric = other.numeric;
        }
        self.checked += other.checked;
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `f` at `params`.
///
/// `params` is perturbed in place and restored before returning.
pub fn grad_check<F>(f: F, params: &mut [f64], analytic: &[f64]) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..params.len()).collect();
    grad_check_coords(f, params, analytic, &coords)
}

/// Like [`grad_check`] but only probes the listed coordinates.
pub fn grad_check_coords<F>(
    mut f: F,
    params: &mut [f64],
    analytic: &[f64],
    coords: &[usize],
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let mut report = GradCheckReport::empty();
    for &i in coords {
        let orig = params[i];
        params[i] = orig + FD_STEP;
        let plus = f(params);
        params[i] = orig - FD_STEP;
        let minus = f(params);
        params[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        let single = GradCheckReport {
            max_rel_error: err,
            worst_index: i,
            analytic: analytic[i],
            numeric,
            checked: 1,
        };
        report.merge(&single, 0);
    }
    report
}
