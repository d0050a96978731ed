use crate::mesh::Point;

/// Data of a two-species PNP problem: sources, Dirichlet traces on the whole
/// boundary, and initial values.
pub trait PnpProblem: Sync {
    fn poisson_source(&self, x: Point, t: f64) -> f64;
    fn species_source(&self, species: usize, x: Point, t: f64) -> f64;
    fn boundary_potential(&self, x: Point, t: f64) -> f64;
    fn boundary_concentration(&self, species: usize, x: Point, t: f64) -> f64;

    fn initial_potential(&self, _x: Point) -> f64 {
        0.0
    }

    fn initial_concentration(&self, species: usize, x: Point) -> f64;
}

/// Homogeneous boundary data and zero sources. Initial concentrations are
/// zero unless the stepper is given an explicit initial state.
#[derive(Debug, Clone, Copy, Default)]
pub struct HomogeneousProblem;

impl PnpProblem for HomogeneousProblem {
    fn poisson_source(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }

    fn species_source(&self, _species: usize, _x: Point, _t: f64) -> f64 {
        0.0
    }

    fn boundary_potential(&self, _x: Point, _t: f64) -> f64 {
        0.0
    }

    fn boundary_concentration(&self, _species: usize, _x: Point, _t: f64) -> f64 {
        0.0
    }

    fn initial_concentration(&self, _species: usize, _x: Point) -> f64 {
        0.0
    }
}
