//! A slab, its two walls and the discretization they are studied on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{discretize, BoundaryOperatorSpec, DiscreteBoundaryOp, KernelSpec, Wall};
use crate::error::{Error, Result};
use crate::phase::{PhaseDensity, XGrid};
use crate::scalar::Amplitude;
use crate::vgrid::{grid_pair, HalfGrid, DEFAULT_GRADING, DEFAULT_V_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub n_v: usize,
    pub v_min: f64,
    pub grading_q: f64,
    pub n_x: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            n_v: 400,
            v_min: DEFAULT_V_MIN,
            grading_q: DEFAULT_GRADING,
            n_x: 201,
        }
    }
}

/// One wall's reflection law, without its side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallLaw {
    pub alpha: f64,
    pub kernel: KernelSpec,
}

impl WallLaw {
    pub fn diffuse(kernel: KernelSpec) -> Self {
        Self { alpha: 0.0, kernel }
    }

    pub fn on(self, side: Wall) -> Result<BoundaryOperatorSpec> {
        BoundaryOperatorSpec::new(side, self.alpha, self.kernel)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub a: f64,
    pub o1_spec: BoundaryOperatorSpec,
    pub o2_spec: BoundaryOperatorSpec,
    pub grid: GridParams,
    pub pos: Arc<HalfGrid>,
    pub neg: Arc<HalfGrid>,
    pub xgrid: Arc<XGrid>,
    /// Left wall, negative to positive velocities.
    pub o1: DiscreteBoundaryOp,
    /// Right wall, positive to negative velocities.
    pub o2: DiscreteBoundaryOp,
}

impl Scenario {
    pub fn new(a: f64, left: WallLaw, right: WallLaw, grid: GridParams) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!(
                "slab half-width must be positive, got {a}"
            )));
        }
        let o1_spec = left.on(Wall::Left)?;
        let o2_spec = right.on(Wall::Right)?;
        let (pos, neg) = grid_pair(grid.n_v, grid.v_min, grid.grading_q)?;
        let xgrid = Arc::new(XGrid::new(a, grid.n_x)?);
        let o1 = discretize(&o1_spec, neg.clone(), pos.clone())?;
        let o2 = discretize(&o2_spec, pos.clone(), neg.clone())?;
        Ok(Self {
            a,
            o1_spec,
            o2_spec,
            grid,
            pos,
            neg,
            xgrid,
            o1,
            o2,
        })
    }

    pub fn left(&self) -> WallLaw {
        WallLaw {
            alpha: self.o1_spec.alpha,
            kernel: self.o1_spec.kernel,
        }
    }

    pub fn right(&self) -> WallLaw {
        WallLaw {
            alpha: self.o2_spec.alpha,
            kernel: self.o2_spec.kernel,
        }
    }

    /// Same walls on a different grid.
    pub fn regrid(&self, grid: GridParams) -> Result<Self> {
        Self::new(self.a, self.left(), self.right(), grid)
    }

    pub fn with_v_min(&self, v_min: f64) -> Result<Self> {
        self.regrid(GridParams { v_min, ..self.grid })
    }

    pub fn zeros<T: Amplitude>(&self) -> PhaseDensity<T> {
        PhaseDensity::zeros(self.xgrid.clone(), self.pos.clone(), self.neg.clone())
    }

    pub fn density<T: Amplitude>(&self, f: impl Fn(f64, f64) -> T) -> PhaseDensity<T> {
        PhaseDensity::from_fn(self.xgrid.clone(), self.pos.clone(), self.neg.clone(), f)
    }

    pub fn canonical_datum(&self) -> PhaseDensity<f64> {
        crate::phase::canonical_datum(self.xgrid.clone(), self.pos.clone(), self.neg.clone())
    }

    pub fn is_pure_specular(&self) -> bool {
        self.o1_spec.alpha == 1.0 && self.o2_spec.alpha == 1.0
    }

    /// a = 1, fully diffuse `PowerMaxwell(2)` walls.
    pub fn canon1(grid: GridParams) -> Result<Self> {
        let pm2 = WallLaw::diffuse(KernelSpec::PowerMaxwell { m: 2.0 });
        Self::new(1.0, pm2, pm2, grid)
    }

    /// a = 1, fully diffuse constant kernels: no invariant density.
    pub fn sweep1(grid: GridParams) -> Result<Self> {
        let c = WallLaw::diffuse(KernelSpec::Constant);
        Self::new(1.0, c, c, grid)
    }

    /// a = 1, specular walls.
    pub fn spec1(grid: GridParams) -> Result<Self> {
        let r = WallLaw {
            alpha: 1.0,
            kernel: KernelSpec::PowerMaxwell { m: 2.0 },
        };
        Self::new(1.0, r, r, grid)
    }

    /// a = 1, half specular on the left, diffuse `PowerMaxwell(2)` on the right.
    pub fn mix1(grid: GridParams) -> Result<Self> {
        let pm2 = KernelSpec::PowerMaxwell { m: 2.0 };
        Self::new(
            1.0,
            WallLaw {
                alpha: 0.5,
                kernel: pm2,
            },
            WallLaw::diffuse(pm2),
            grid,
        )
    }
}
