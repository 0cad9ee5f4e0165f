//! Crate-level error wrapping the per-module errors.

use thiserror::Error;

use crate::blowup_constructor::ConstructionError;
use crate::bubble_analysis::BubbleError;
use crate::domain_geometry::GeometryError;
use crate::elliptic_core::EllipticError;
use crate::green::GreenError;
use crate::pohozaev::PohozaevError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Pohozaev(#[from] PohozaevError),
    #[error(transparent)]
    Bubble(#[from] BubbleError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}
