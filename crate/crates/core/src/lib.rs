//! Detection of modifications between a reference scanned document and a
//! test copy, by coordinating OCR text points and falling back to pixel
//! comparison for words the OCR could not reconcile.

pub mod cli;
pub mod diff;
pub mod error;
pub mod eval;
pub mod ocr;
pub mod pixmatch;
pub mod raster;
pub mod segment;
pub mod textmatch;

pub use error::{Error, Result, Stage};
