//! Sampler for the discrete Gaussian free field on a square lattice.
//!
//! With `L = G G^T` the banded Cholesky factorization of the interior
//! Laplacian, `X = sqrt(2 pi) G^{-T} z` for standard normal `z` has
//! covariance `2 pi L^{-1}`, the lattice Green function used by
//! [`DgffGreenSolver`]. Interior nodes are exposed as a [`GridDomain`]
//! whose cell centers sit exactly on the nodes `i/n`, so realizations plug
//! into the same chaos and analysis pipelines as the other constructions.

use std::sync::Arc;

use crate::kernels::{DgffGreenSolver, SquareLattice};
use crate::rng::SeedLineage;

use super::{
    standard_normals, ConstructionTag, FieldRealization, GridDomain, Result, VarianceProfile,
};

/// Exact sampler of the zero-boundary lattice free field.
pub struct DgffSampler {
    solver: DgffGreenSolver,
    grid: GridDomain,
    variance: Arc<VarianceProfile>,
}

impl DgffSampler {
    pub fn new(lattice: SquareLattice) -> Result<Self> {
        let solver = DgffGreenSolver::new(lattice)?;
        let side = lattice.n - 1;
        let h = lattice.spacing();
        // Cell i has center (i + 1) / n, the interior node (i+1, .).
        let grid = GridDomain::new(vec![0.5 * h, 0.5 * h], vec![side, side], h)?;
        let variance = Arc::new(VarianceProfile::Exact(solver.variance_diagonal()));
        Ok(Self {
            solver,
            grid,
            variance,
        })
    }

    pub fn lattice(&self) -> SquareLattice {
        self.solver.lattice()
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    /// Green-function oracle backing this sampler.
    pub fn solver(&self) -> &DgffGreenSolver {
        &self.solver
    }

    pub fn variance(&self) -> &Arc<VarianceProfile> {
        &self.variance
    }

    /// One lattice field; the cutoff is the lattice spacing.
    pub fn sample(&self, lineage: SeedLineage) -> FieldRealization {
        let mut rng = lineage.rng();
        let z = standard_normals(&mut rng, self.grid.n_cells());
        let mut values = self.solver.cholesky().solve_lower_transpose(&z);
        let scale = (2.0 * std::f64::consts::PI).sqrt();
        for v in values.iter_mut() {
            *v *= scale;
        }
        FieldRealization {
            grid: self.grid.clone(),
            values,
            eps: self.lattice().spacing(),
            variance: self.variance.clone(),
            construction: ConstructionTag::DgffLattice,
            lineage,
            level: 0,
        }
    }
}
